// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 umda contributors

#include "umda/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "umda/rng.hpp"

namespace umda {

namespace {

double eval_scalar(const std::function<Tensor(ParameterSet&)>& f, ParameterSet& p) {
    Tensor out = f(p);
    const double v = out.value();
    if (!std::isfinite(v)) throw NumericError("grad_check: non-finite function value");
    return v;
}

} // namespace

GradCheckReport grad_check(const std::function<Tensor(ParameterSet&)>& f,
                           ParameterSet& params,
                           double eps,
                           int max_coords_per_entry,
                           std::uint64_t seed) {
    if (!(eps > 0.0)) throw ValidationError("grad_check: eps must be positive");

    params.zero_grads();
    Tensor out = f(params);
    if (out.size() != 1) throw ValidationError("grad_check: function must return a scalar");
    out.backward();

    // Snapshot reverse-mode gradients before any perturbation.
    std::vector<std::vector<double>> ad_grads;
    ad_grads.reserve(params.names().size());
    for (const auto& name : params.names()) ad_grads.push_back(params.at(name).grad_or_zeros());

    GradCheckReport report;
    Rng rng(Rng::mix(seed, 0x67726164));

    for (std::size_t e = 0; e < params.names().size(); ++e) {
        const std::string& name = params.names()[e];
        GradCheckEntry entry;
        entry.name = name;

        if (!params.is_learnable(name)) {
            entry.frozen = true;
            // Freeze contract: the reported gradient is exactly zero.
            for (double g : ad_grads[e]) entry.max_rel_err = std::max(entry.max_rel_err, std::abs(g));
            report.entries.push_back(entry);
            report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
            continue;
        }

        Tensor& t = params.at(name);
        const int n = t.size();
        std::vector<int> coords;
        if (max_coords_per_entry > 0 && n > max_coords_per_entry) {
            for (int k = 0; k < max_coords_per_entry; ++k)
                coords.push_back(static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(n))));
            std::sort(coords.begin(), coords.end());
            coords.erase(std::unique(coords.begin(), coords.end()), coords.end());
        } else {
            coords.resize(static_cast<std::size_t>(n));
            for (int k = 0; k < n; ++k) coords[static_cast<std::size_t>(k)] = k;
        }

        double gmax = 0.0;
        for (double g : ad_grads[e]) gmax = std::max(gmax, std::abs(g));

        for (int idx : coords) {
            auto& data = t.raw_data();
            const double keep = data[static_cast<std::size_t>(idx)];
            data[static_cast<std::size_t>(idx)] = keep + eps;
            const double fp = eval_scalar(f, params);
            data[static_cast<std::size_t>(idx)] = keep - eps;
            const double fm = eval_scalar(f, params);
            data[static_cast<std::size_t>(idx)] = keep;

            const double fd = (fp - fm) / (2.0 * eps);
            const double ad = ad_grads[e][static_cast<std::size_t>(idx)];
            const double denom = std::max({std::abs(ad), std::abs(fd), 1e-3 * gmax, 1e-10});
            entry.max_rel_err = std::max(entry.max_rel_err, std::abs(ad - fd) / denom);
            ++entry.coords_checked;
        }
        report.entries.push_back(entry);
        report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
    }
    return report;
}

} // namespace umda
