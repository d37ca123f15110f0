// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 umda contributors

#include "umda/otbench.hpp"

#include <cstdio>
#include <fstream>

#include "umda/rng.hpp"
#include "umda/tca.hpp"

namespace umda {

std::vector<OtBenchRow> run_ot_bench(int instances_per_cell, std::uint64_t seed) {
    if (instances_per_cell < 1) throw ValidationError("ot bench: need at least one instance per cell");
    const double epsilons[] = {0.5, 0.1, 0.02, 0.005};
    Rng rng(Rng::mix(seed, 0x07BE));

    std::vector<OtBenchRow> rows;
    for (int n = 2; n <= 4; ++n) {
        for (int inst = 0; inst < instances_per_cell; ++inst) {
            std::vector<double> cost(static_cast<std::size_t>(n) * n);
            for (auto& c : cost) c = rng.uniform(0.0, 1.0);

            std::vector<double> a(static_cast<std::size_t>(n)), b(static_cast<std::size_t>(n));
            if (inst % 2 == 0) {
                for (auto& v : a) v = 1.0 / n;
                for (auto& v : b) v = 1.0 / n;
            } else {
                double sa = 0.0, sb = 0.0;
                for (auto& v : a) sa += (v = rng.uniform(0.2, 1.0));
                for (auto& v : b) sb += (v = rng.uniform(0.2, 1.0));
                for (auto& v : a) v /= sa;
                for (auto& v : b) v /= sb;
            }
            const LpSolution lp = lp_oracle(cost, a, b);
            for (double eps : epsilons) {
                const SinkhornResult sk = sinkhorn(cost, a, b, eps, 20000, 1e-9);
                OtBenchRow row;
                row.n = n;
                row.epsilon = eps;
                row.sinkhorn_cost = transport_cost(sk.plan, cost, n);
                row.lp_cost = lp.cost;
                row.gap = row.sinkhorn_cost - row.lp_cost;
                row.iterations = sk.iterations;
                rows.push_back(row);
            }
        }
    }
    return rows;
}

void write_ot_bench_csv(const std::vector<OtBenchRow>& rows, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write OT bench table: " + path);
    out << "n,epsilon,sinkhorn_cost,lp_cost,gap,iters\n";
    char line[160];
    for (const auto& r : rows) {
        std::snprintf(line, sizeof(line), "%d,%.4g,%.12g,%.12g,%.12g,%d\n", r.n, r.epsilon,
                      r.sinkhorn_cost, r.lp_cost, r.gap, r.iterations);
        out << line;
    }
}

} // namespace umda
