// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 umda contributors

#include "umda/grad_suite.hpp"

#include <cmath>

#include "umda/grad_check.hpp"
#include "umda/losses.hpp"
#include "umda/model.hpp"
#include "umda/rng.hpp"
#include "umda/tca.hpp"

namespace umda {

bool GradSuiteResult::all_passed() const {
    for (const auto& c : checks)
        if (!c.passed) return false;
    return !checks.empty();
}

namespace {

Tensor uniform_tensor(std::vector<int> shape, double lo, double hi, Rng& rng) {
    std::vector<double> data(static_cast<std::size_t>(shape_size(shape)));
    for (auto& v : data) v = rng.uniform(lo, hi);
    return Tensor(std::move(shape), std::move(data));
}

Frame random_frame(int size, Rng& rng) {
    Frame f;
    f.width = size;
    f.height = size;
    f.pixels.resize(static_cast<std::size_t>(3) * size * size);
    for (auto& v : f.pixels) v = rng.uniform(0.0, 1.0);
    return f;
}

EncoderConfig tiny_encoder() {
    EncoderConfig cfg;
    cfg.patch_size = 8;
    cfg.embed_dim = 8;
    cfg.depth = 1;
    cfg.heads = 2;
    cfg.template_size = 16;
    cfg.search_size = 16;
    cfg.mlp_ratio = 2;
    cfg.head_channels = 4;
    cfg.bank_tokens = 3;
    return cfg;
}

GradSuiteCheck run_one(const std::string& name, double tol,
                       const std::function<Tensor(ParameterSet&)>& f, ParameterSet& params,
                       int max_coords, std::uint64_t seed) {
    GradSuiteCheck check;
    check.name = name;
    check.tol = tol;
    const GradCheckReport report = grad_check(f, params, 1e-6, max_coords, seed);
    check.max_rel_err = report.max_rel_err;
    check.passed = report.passed(tol);
    return check;
}

/// Scores with clear argmax margins per sample and a clear maximum of the
/// cross-batch confidence gaps, so the PSOT cell/normalizer selections stay
/// stable under finite-difference nudges.
std::pair<std::vector<double>, std::vector<double>> stable_psot_scores(int n, int hw, Rng& rng) {
    for (int attempt = 0; attempt < 64; ++attempt) {
        std::vector<double> s(static_cast<std::size_t>(n) * hw), t(s.size());
        for (auto& v : s) v = rng.uniform(0.05, 0.95);
        for (auto& v : t) v = rng.uniform(0.05, 0.95);
        auto margins_ok = [&](const std::vector<double>& m) {
            for (int i = 0; i < n; ++i) {
                double top = -1.0, second = -1.0;
                for (int p = 0; p < hw; ++p) {
                    const double v = m[static_cast<std::size_t>(i) * hw + p];
                    if (v > top) {
                        second = top;
                        top = v;
                    } else if (v > second) {
                        second = v;
                    }
                }
                if (top - second < 0.05) return false;
            }
            return true;
        };
        if (!margins_ok(s) || !margins_ok(t)) continue;

        // Peak scores and the spread of their pairwise gaps.
        std::vector<double> sp(static_cast<std::size_t>(n)), tp(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            double best_s = -1.0, best_t = -1.0;
            for (int p = 0; p < hw; ++p) {
                best_s = std::max(best_s, s[static_cast<std::size_t>(i) * hw + p]);
                best_t = std::max(best_t, t[static_cast<std::size_t>(i) * hw + p]);
            }
            sp[static_cast<std::size_t>(i)] = best_s;
            tp[static_cast<std::size_t>(i)] = best_t;
        }
        double top = -1.0, second = -1.0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                const double d = std::abs(sp[static_cast<std::size_t>(i)] - tp[static_cast<std::size_t>(j)]);
                if (d > top) {
                    second = top;
                    top = d;
                } else if (d > second) {
                    second = d;
                }
            }
        if (top - second < 0.02) continue;
        return {std::move(s), std::move(t)};
    }
    throw NumericError("psot grad check: could not build a stable instance");
}

} // namespace

GradSuiteResult run_grad_suite(std::uint64_t seed) {
    GradSuiteResult result;
    Rng rng(Rng::mix(seed, 0x5D17E));

    { // focal loss through the score sigmoid
        ParameterSet p;
        p.insert("logits", uniform_tensor({1, 1, 4, 4}, -1.5, 1.5, rng));
        std::vector<double> target(16, 0.0);
        for (int r = 0; r < 4; ++r)
            for (int c = 0; c < 4; ++c) {
                const double d2 = (r - 1) * (r - 1) + (c - 2) * (c - 2);
                target[static_cast<std::size_t>(r) * 4 + c] = std::exp(-d2 / 2.0);
            }
        target[1 * 4 + 2] = 1.0;
        auto f = [&target](ParameterSet& ps) {
            return focal_loss(sigmoid(ps.at("logits")), target, 1);
        };
        result.checks.push_back(run_one("focal", 1e-4, f, p, -1, seed));
    }

    { // L1 box
        ParameterSet p;
        p.insert("pred", Tensor({4}, {0.45, 0.58, 0.31, 0.24}));
        const Tensor gt({4}, {0.52, 0.49, 0.36, 0.30});
        auto f = [gt](ParameterSet& ps) { return l1_box(ps.at("pred"), gt); };
        result.checks.push_back(run_one("l1", 1e-4, f, p, -1, seed));
    }

    { // GIoU
        ParameterSet p;
        p.insert("pred", Tensor({4}, {0.42, 0.61, 0.33, 0.27}));
        const Tensor gt({4}, {0.55, 0.47, 0.28, 0.35});
        auto f = [gt](ParameterSet& ps) { return giou_loss(ps.at("pred"), gt); };
        result.checks.push_back(run_one("giou", 1e-4, f, p, -1, seed));
    }

    { // PSOT under the envelope convention
        const int n = 6, gh = 4, gw = 4;
        auto [s, t] = stable_psot_scores(n, gh * gw, rng);
        ParameterSet p;
        p.insert("student", Tensor({n, gh * gw}, s));
        p.insert("teacher", Tensor({n, gh * gw}, t));
        PsotConfig cfg;
        cfg.epsilon = 0.05;
        cfg.max_iter = 20000;
        cfg.tol = 1e-12;
        auto f = [cfg, gh, gw](ParameterSet& ps) {
            return psot_loss(ps.at("student"), ps.at("teacher"), gh, gw, cfg).loss;
        };
        result.checks.push_back(run_one("psot", 1e-3, f, p, -1, seed));
    }

    { // adapter cross-attention
        ParameterSet p;
        p.insert("query", uniform_tensor({4, 8}, -0.8, 0.8, rng));
        p.insert("bank", uniform_tensor({3, 8}, -0.8, 0.8, rng));
        p.insert("kproj", uniform_tensor({8, 8}, -0.5, 0.5, rng));
        p.insert("vproj", uniform_tensor({8, 8}, -0.5, 0.5, rng));
        const Tensor w = uniform_tensor({4, 8}, -1.0, 1.0, rng);
        auto f = [w](ParameterSet& ps) {
            return dot(w, dca_attention(ps.at("query"), ps.at("bank"), ps.at("kproj"), ps.at("vproj"), 4));
        };
        result.checks.push_back(run_one("dca_attention", 1e-4, f, p, -1, seed));
    }

    const EncoderConfig cfg = tiny_encoder();

    { // encoder
        ParameterSet p = init_model_params(cfg, Rng::mix(seed, 1));
        for (const auto& name : p.names())
            if (name.rfind("head.", 0) == 0) p.set_frozen(name, true);
        const Frame tmpl = random_frame(cfg.template_size, rng);
        const Frame search = random_frame(cfg.search_size, rng);
        const int tokens = cfg.template_tokens() + cfg.search_tokens();
        const Tensor w = uniform_tensor({tokens, cfg.embed_dim}, -1.0, 1.0, rng);
        auto f = [&tmpl, &search, &cfg, w](ParameterSet& ps) {
            return dot(w, encode(tmpl, search, ps, cfg));
        };
        result.checks.push_back(run_one("encoder", 1e-4, f, p, 6, seed));
    }

    { // head (batch statistics path)
        ParameterSet p = init_model_params(cfg, Rng::mix(seed, 2));
        for (const auto& name : p.names())
            if (name.rfind("head.", 0) != 0) p.set_frozen(name, true);
        const int s = cfg.search_tokens();
        std::vector<Tensor> tokens;
        for (int i = 0; i < 2; ++i) tokens.push_back(uniform_tensor({s, cfg.embed_dim}, -1.0, 1.0, rng));
        const int g = cfg.grid();
        const Tensor w1 = uniform_tensor({2, 1, g, g}, -1.0, 1.0, rng);
        const Tensor w2 = uniform_tensor({2, 2, g, g}, -1.0, 1.0, rng);
        const Tensor w3 = uniform_tensor({2, 2, g, g}, -1.0, 1.0, rng);
        auto f = [&tokens, &cfg, w1, w2, w3](ParameterSet& ps) {
            const ResponseBatch r = head_forward(tokens, ps, cfg, /*training=*/true);
            return add(add(dot(w1, r.scores), dot(w2, r.offsets)), dot(w3, r.sizes));
        };
        result.checks.push_back(run_one("head", 1e-4, f, p, 8, seed));
    }

    return result;
}

std::string grad_suite_report(const GradSuiteResult& result) {
    std::string out;
    char line[160];
    for (const auto& c : result.checks) {
        std::snprintf(line, sizeof(line), "%-14s max_rel_err=%.3e tol=%.0e %s\n", c.name.c_str(),
                      c.max_rel_err, c.tol, c.passed ? "PASS" : "FAIL");
        out += line;
    }
    return out;
}

} // namespace umda
