// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 umda contributors

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace umda {

struct OtBenchRow {
    int n = 0;
    double epsilon = 0.0;
    double sinkhorn_cost = 0.0;
    double lp_cost = 0.0;
    double gap = 0.0; // sinkhorn_cost - lp_cost
    int iterations = 0;
};

/// Random solver-vs-oracle sweep over N in {2..4} and a decreasing epsilon
/// ladder. Instances use U[0,1] costs and mixed uniform/random marginals.
std::vector<OtBenchRow> run_ot_bench(int instances_per_cell, std::uint64_t seed);

/// CSV columns: n, epsilon, sinkhorn_cost, lp_cost, gap, iters.
void write_ot_bench_csv(const std::vector<OtBenchRow>& rows, const std::string& path);

} // namespace umda
