// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 umda contributors

#pragma once

#include <string>
#include <vector>

#include "umda/params.hpp"

namespace umda {

struct GradSuiteCheck {
    std::string name;
    double max_rel_err = 0.0;
    double tol = 0.0;
    bool passed = false;
};

struct GradSuiteResult {
    std::vector<GradSuiteCheck> checks;
    bool all_passed() const;
};

/// Central finite-difference audit of every differentiable building block:
/// focal, L1, GIoU, PSOT, the adapter cross-attention, the encoder and the
/// head. Small fixed shapes; runs in seconds.
GradSuiteResult run_grad_suite(std::uint64_t seed = 7);

std::string grad_suite_report(const GradSuiteResult& result);

} // namespace umda
