// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 umda contributors

#pragma once

#include <string>
#include <vector>

#include "umda/config.hpp"
#include "umda/image.hpp"

namespace umda {

/// One row of the ablation table: a named configuration evaluated across
/// seeds on the held-out target domain.
struct AblationCell {
    std::string name;
    std::vector<double> aucs;
    std::vector<double> precisions;
    double auc_median = 0.0;
    double auc_min = 0.0;
    double auc_max = 0.0;
    double prec_median = 0.0;
    double delta_auc_vs_baseline = 0.0;
};

/// Known presets: baseline (source-only), pseudo (+synthesized targets with
/// pseudo labels), tca (+alignment loss), dca (+adapter stage), full;
/// ema_epoch / ema_batch / ema_every3 / ema_every5; ratio_1 / ratio_2 /
/// ratio_4 / ratio_6. Throws ConfigError on unknown names.
void apply_preset(Config& cfg, const std::string& preset);

double median(std::vector<double> v);

/// Trains and evaluates every preset across the seeds; rows come back sorted
/// by name and carry the AUC delta against the baseline row when present.
std::vector<AblationCell> run_ablation(const Config& base, const std::vector<std::string>& presets,
                                       const std::vector<std::uint64_t>& seeds);

void write_ablation_csv(const std::vector<AblationCell>& cells, const std::string& path);

/// Trains one preset for one seed and returns (auc, precision) on the
/// held-out domain given by ablate.domain.
std::pair<double, double> run_preset_once(const Config& cfg_with_preset, std::uint64_t seed);

} // namespace umda
