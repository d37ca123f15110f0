// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 umda contributors

#include "umda/ablate.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "umda/trainer.hpp"

namespace umda {

void apply_preset(Config& cfg, const std::string& preset) {
    const std::string domain = cfg.get_string("ablate.domain", "fog");
    auto with_targets = [&]() {
        cfg.set("data.domains", domain);
        cfg.set("ablate.stage2", "false");
    };

    if (preset == "baseline") {
        cfg.set("data.domains", "");
        cfg.set("loss.psot", "0");
        cfg.set("ablate.stage2", "false");
    } else if (preset == "pseudo") {
        with_targets();
        cfg.set("loss.psot", "0");
    } else if (preset == "tca") {
        with_targets();
        cfg.set("loss.psot", "10");
    } else if (preset == "dca") {
        with_targets();
        cfg.set("loss.psot", "0");
        cfg.set("ablate.stage2", "true");
    } else if (preset == "full") {
        with_targets();
        cfg.set("loss.psot", "10");
        cfg.set("ablate.stage2", "true");
    } else if (preset == "ema_epoch") {
        with_targets();
        cfg.set("loss.psot", "10");
        cfg.set("train.ema_frequency", "epoch");
    } else if (preset == "ema_batch") {
        with_targets();
        cfg.set("loss.psot", "10");
        cfg.set("train.ema_frequency", "batch");
    } else if (preset == "ema_every3") {
        with_targets();
        cfg.set("loss.psot", "10");
        cfg.set("train.ema_frequency", "every_k");
        cfg.set("train.ema_k", "3");
    } else if (preset == "ema_every5") {
        with_targets();
        cfg.set("loss.psot", "10");
        cfg.set("train.ema_frequency", "every_k");
        cfg.set("train.ema_k", "5");
    } else if (preset.rfind("ratio_", 0) == 0) {
        const std::string r = preset.substr(6);
        if (r != "1" && r != "2" && r != "4" && r != "6")
            throw ConfigError("unknown ablation preset: " + preset);
        with_targets();
        cfg.set("loss.psot", "10");
        cfg.set("data.target_ratio", r);
    } else {
        throw ConfigError("unknown ablation preset: " + preset);
    }
}

double median(std::vector<double> v) {
    if (v.empty()) throw ValidationError("median of empty set");
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::pair<double, double> run_preset_once(const Config& cfg_with_preset, std::uint64_t seed) {
    const RunSpec spec = run_spec_from_config(cfg_with_preset);
    const DomainTag eval_domain = domain_from_name(cfg_with_preset.get_string("ablate.domain", "fog"));
    const bool stage2 = cfg_with_preset.get_bool("ablate.stage2", false);

    Stage1Result s1 = train_stage1(spec, seed);

    // Eval material depends on the seed only, so every preset of a seed is
    // scored on identical sequences.
    const EvalSequenceSet eval_set = build_eval_set(spec, eval_domain, Rng::mix(seed, 0xEBA1));

    EvalResult er;
    if (stage2) {
        const Stage2Result s2 = train_stage2_dca(s1.student, eval_domain, spec, seed);
        er = evaluate_set(s1.student, &s2.adapter, spec.enc, eval_set, spec.precision_threshold_px);
    } else {
        er = evaluate_set(s1.student, nullptr, spec.enc, eval_set, spec.precision_threshold_px);
    }
    return {er.auc, er.precision};
}

std::vector<AblationCell> run_ablation(const Config& base, const std::vector<std::string>& presets,
                                       const std::vector<std::uint64_t>& seeds) {
    if (presets.empty() || seeds.empty()) throw ConfigError("ablation: presets and seeds required");
    std::vector<AblationCell> cells;
    for (const auto& preset : presets) {
        Config cfg = base;
        apply_preset(cfg, preset);
        AblationCell cell;
        cell.name = preset;
        for (std::uint64_t seed : seeds) {
            const auto [auc, prec] = run_preset_once(cfg, seed);
            cell.aucs.push_back(auc);
            cell.precisions.push_back(prec);
        }
        cell.auc_median = median(cell.aucs);
        cell.auc_min = *std::min_element(cell.aucs.begin(), cell.aucs.end());
        cell.auc_max = *std::max_element(cell.aucs.begin(), cell.aucs.end());
        cell.prec_median = median(cell.precisions);
        cells.push_back(std::move(cell));
    }
    std::sort(cells.begin(), cells.end(),
              [](const AblationCell& a, const AblationCell& b) { return a.name < b.name; });
    double baseline_auc = 0.0;
    bool have_baseline = false;
    for (const auto& c : cells) {
        if (c.name == "baseline") {
            baseline_auc = c.auc_median;
            have_baseline = true;
        }
    }
    for (auto& c : cells) c.delta_auc_vs_baseline = have_baseline ? c.auc_median - baseline_auc : 0.0;
    return cells;
}

void write_ablation_csv(const std::vector<AblationCell>& cells, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write ablation table: " + path);
    out << "config,seeds,auc_median,auc_min,auc_max,precision_median,delta_auc_vs_baseline\n";
    char line[256];
    for (const auto& c : cells) {
        std::snprintf(line, sizeof(line), "%s,%zu,%.6f,%.6f,%.6f,%.6f,%.6f\n", c.name.c_str(),
                      c.aucs.size(), c.auc_median, c.auc_min, c.auc_max, c.prec_median,
                      c.delta_auc_vs_baseline);
        out << line;
    }
}

} // namespace umda
