// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 umda contributors

#pragma once

#include <functional>
#include <string>
#include <vector>

#include "umda/params.hpp"

namespace umda {

struct GradCheckEntry {
    std::string name;
    double max_rel_err = 0.0;
    int coords_checked = 0;
    bool frozen = false;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> entries;
    double max_rel_err = 0.0;

    bool passed(double tol) const { return max_rel_err < tol; }
};

/// Compares the reverse-mode gradient of a scalar function against central
/// finite differences, per learnable parameter entry. Frozen entries are
/// asserted to report an exactly-zero gradient and are not perturbed.
///
/// When an entry has more coordinates than `max_coords_per_entry` (> 0), a
/// seeded random subset is checked. The relative error of a coordinate is
/// |ad - fd| / max(|ad|, |fd|, 1e-3 * gmax, 1e-10) where gmax is the largest
/// gradient magnitude in the entry; the floor keeps finite-difference noise
/// on negligibly small components from dominating the report.
GradCheckReport grad_check(const std::function<Tensor(ParameterSet&)>& f,
                           ParameterSet& params,
                           double eps = 1e-6,
                           int max_coords_per_entry = -1,
                           std::uint64_t seed = 0);

} // namespace umda
