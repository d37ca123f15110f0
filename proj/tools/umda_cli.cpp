// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 umda contributors
//
// Command-line front end. Everything goes through the shared library's C
// interface; this translation unit never touches the C++ core directly.

#include <cstdint>
#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "umda/capi.h"

namespace {

struct ConfigHandle {
    umda_config* cfg = nullptr;
    ~ConfigHandle() { umda_config_free(cfg); }
};

/// Builds the effective config: file first, then --set overrides.
int build_config(ConfigHandle& handle, const std::string& config_path,
                 const std::vector<std::string>& overrides) {
    handle.cfg = config_path.empty() ? umda_config_create() : umda_config_load(config_path.c_str());
    if (!handle.cfg) {
        std::fprintf(stderr, "umda: %s\n", umda_last_error());
        return 1;
    }
    for (const auto& kv : overrides) {
        const std::size_t eq = kv.find('=');
        if (eq == std::string::npos) {
            std::fprintf(stderr, "umda: --set expects key=value, got '%s'\n", kv.c_str());
            return 1;
        }
        if (umda_config_set(handle.cfg, kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str()) != UMDA_OK) {
            std::fprintf(stderr, "umda: %s\n", umda_last_error());
            return 1;
        }
    }
    return 0;
}

int report(int status) {
    if (status != UMDA_OK) {
        std::fprintf(stderr, "umda: %s (%s)\n", umda_last_error(), umda_status_name(status));
        return 1;
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"umda - unified multi-domain adaptive tracking (desk scale)"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> overrides;
    std::uint64_t seed = 0;
    app.add_option("--config", config_path, "key=value configuration file")->expected(1);
    app.add_option("--set", overrides, "override a config entry (key=value), repeatable");
    app.add_option("--seed", seed, "run seed");

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "generate labeled source sequences");
    std::string gen_out = "data";
    gen->add_option("--out", gen_out, "output directory");

    // synth
    auto* synth = app.add_subcommand("synth", "corrupt a sequence directory");
    std::string synth_domain = "fog", synth_in, synth_out = "synth";
    synth->add_option("--domain", synth_domain, "fog|dark|rain");
    synth->add_option("--in", synth_in, "source sequence directory")->required();
    synth->add_option("--out", synth_out, "output directory");

    // train-backbone
    auto* train1 = app.add_subcommand("train-backbone", "stage-1 teacher-student training");
    std::string train1_out = "run";
    train1->add_option("--out", train1_out, "run directory");

    // train-dca
    auto* train2 = app.add_subcommand("train-dca", "stage-2 adapter training (frozen backbone)");
    std::string train2_ckpt, train2_domain = "fog", train2_out = "run-dca";
    train2->add_option("--checkpoint", train2_ckpt, "stage-1 checkpoint")->required();
    train2->add_option("--domain", train2_domain, "fog|dark|rain");
    train2->add_option("--out", train2_out, "run directory");

    // eval
    auto* ev = app.add_subcommand("eval", "one-pass evaluation on held-out sequences");
    std::string eval_ckpt, eval_domain = "fog", eval_out;
    ev->add_option("--checkpoint", eval_ckpt, "checkpoint to evaluate")->required();
    ev->add_option("--domain", eval_domain, "source|fog|dark|rain");
    ev->add_option("--out", eval_out, "directory for success_curve.csv and summary.json");

    // ablate
    auto* ab = app.add_subcommand("ablate", "train/evaluate a preset grid");
    std::string ab_presets = "baseline,pseudo,tca,dca,full";
    std::string ab_seeds = "1,2,3";
    std::string ab_out = "ablation.csv";
    ab->add_option("--presets", ab_presets, "comma-separated preset names");
    ab->add_option("--seeds", ab_seeds, "comma-separated seeds");
    ab->add_option("--out", ab_out, "output CSV path");

    // ot-bench
    auto* ot = app.add_subcommand("ot-bench", "Sinkhorn vs exact LP sweep");
    std::string ot_out = "ot_bench.csv";
    ot->add_option("--out", ot_out, "output CSV path");

    // grad-check
    auto* gc = app.add_subcommand("grad-check", "finite-difference gradient audit");

    CLI11_PARSE(app, argc, argv);

    ConfigHandle cfg;
    if (build_config(cfg, config_path, overrides) != 0) return 1;

    if (gen->parsed()) return report(umda_gen_data(cfg.cfg, seed, gen_out.c_str()));

    if (synth->parsed())
        return report(umda_synth(cfg.cfg, synth_domain.c_str(), seed, synth_in.c_str(), synth_out.c_str()));

    if (train1->parsed()) {
        const int rc = report(umda_train_backbone(cfg.cfg, seed, train1_out.c_str()));
        if (rc == 0) std::printf("checkpoint written to %s/checkpoint.bin\n", train1_out.c_str());
        return rc;
    }

    if (train2->parsed()) {
        const int rc = report(umda_train_dca(cfg.cfg, seed, train2_ckpt.c_str(), train2_domain.c_str(),
                                             train2_out.c_str()));
        if (rc == 0) std::printf("adapter written to %s/checkpoint.bin\n", train2_out.c_str());
        return rc;
    }

    if (ev->parsed()) {
        umda_eval_metrics m{};
        const int rc = report(umda_eval(cfg.cfg, seed, eval_ckpt.c_str(), eval_domain.c_str(),
                                        eval_out.empty() ? nullptr : eval_out.c_str(), &m));
        if (rc == 0) {
            std::printf("domain=%s frames=%d auc=%.4f precision=%.4f ao=%.4f sr50=%.4f sr75=%.4f\n",
                        eval_domain.c_str(), m.frames, m.auc, m.precision, m.ao, m.sr50, m.sr75);
        }
        return rc;
    }

    if (ab->parsed()) {
        const int rc = report(umda_ablate(cfg.cfg, ab_presets.c_str(), ab_seeds.c_str(), ab_out.c_str()));
        if (rc == 0) std::printf("ablation table written to %s\n", ab_out.c_str());
        return rc;
    }

    if (ot->parsed()) {
        const int rc = report(umda_ot_bench(cfg.cfg, seed, ot_out.c_str()));
        if (rc == 0) std::printf("bench table written to %s\n", ot_out.c_str());
        return rc;
    }

    if (gc->parsed()) {
        char buf[4096];
        int32_t ok = 0;
        const int rc = report(umda_grad_check(seed == 0 ? 7 : seed, buf, sizeof(buf), &ok));
        if (rc != 0) return rc;
        std::fputs(buf, stdout);
        if (!ok) {
            std::fprintf(stderr, "umda: gradient audit failed\n");
            return 1;
        }
        return 0;
    }

    return 1;
}
