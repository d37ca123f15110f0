// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 umda contributors

#pragma once

#include <map>
#include <string>
#include <vector>

#include "umda/checkpoint.hpp"
#include "umda/config.hpp"
#include "umda/datagen.hpp"
#include "umda/eval.hpp"
#include "umda/losses.hpp"
#include "umda/model.hpp"
#include "umda/tca.hpp"

namespace umda {

/// Adam with decoupled weight decay over the learnable entries of a
/// ParameterSet. Buffers and frozen entries are never touched.
class AdamW {
public:
    AdamW(double lr, double weight_decay, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

    void step(ParameterSet& params);
    void set_lr(double lr) { lr_ = lr; }
    double lr() const { return lr_; }

private:
    double lr_, wd_, beta1_, beta2_, eps_;
    long t_ = 0;
    std::map<std::string, std::vector<double>> m_, v_;
};

/// theta_T <- alpha * theta_T + (1 - alpha) * theta_S over every entry.
void ema_update(ParameterSet& teacher, const ParameterSet& student, double alpha);

enum class EmaFrequency { PerEpoch, PerBatch, EveryKEpochs };

struct PseudoLabel {
    BBox box;                // search-crop pixels
    double confidence = 0.0; // teacher peak score
    bool accepted = false;   // confidence >= tau
    int cell = 0;
};

/// Teacher decodes every target sample in evaluation mode; no gradients are
/// recorded (the teacher is fully frozen).
std::vector<PseudoLabel> make_pseudo_labels(const ParameterSet& teacher,
                                            const std::vector<const SamplePair*>& targets,
                                            const EncoderConfig& cfg, double tau);

struct TrainConfig {
    double alpha = 0.99;
    EmaFrequency ema_frequency = EmaFrequency::PerEpoch;
    int ema_k = 5; // EveryKEpochs period
    int epochs_stage1 = 40;
    int epochs_stage2 = 10;
    int steps_per_epoch = 10;
    double learning_rate = 4e-4;
    double weight_decay = 1e-4;
    int batch_size = 8;
    double tau = 0.6;
    LossWeights weights;
    PsotConfig psot;
    bool log_ema_snapshots = true;
    bool stage2_epoch_eval = true;

    void validate() const;
};

struct DataConfig {
    SceneConfig scene;
    int source_sequences = 16;
    int target_sequences = 1; // per corrupted domain
    int target_length = 15;   // frames per target sequence
    int eval_sequences = 4;
    int eval_length = 40;
    double source_ratio = 1.0;
    double target_ratio = 4.0;
    std::vector<DomainTag> domains = {DomainTag::Fog, DomainTag::Dark, DomainTag::Rain};
};

/// Everything a run needs, parsed from a flat Config.
struct RunSpec {
    EncoderConfig enc;
    TrainConfig train;
    DataConfig data;
    WeatherParams fog = WeatherParams::defaults_for(WeatherKind::Fog);
    WeatherParams dark = WeatherParams::defaults_for(WeatherKind::Dark);
    WeatherParams rain = WeatherParams::defaults_for(WeatherKind::Rain);
    double precision_threshold_px = kPrecisionThresholdPx;
    Config raw;

    HeadConfig head() const;
    const WeatherParams& weather_for(DomainTag tag) const;
};

RunSpec run_spec_from_config(const Config& cfg);

/// Source pool plus one corrupted pool per active domain. The corrupted
/// material is a small designated subset: per domain its frame count stays
/// under 2% of the source frame count with the default configuration.
std::vector<DomainPool> build_training_pools(const RunSpec& spec, std::uint64_t seed);
std::vector<double> pool_ratios(const RunSpec& spec, std::size_t pool_count);

/// Held-out labeled sequences for scoring; corruption preserves geometry so
/// the source ground truth stays valid.
EvalSequenceSet build_eval_set(const RunSpec& spec, DomainTag domain, std::uint64_t seed);

struct StepOutcome {
    LossReport report;
    int source_count = 0;
    int target_count = 0;
    int accepted_pseudo = 0;
    bool psot_converged = true;
};

/// One optimizer step of stage-1 training: supervised source loss, pseudo-
/// labeled target loss, PSOT alignment, then AdamW on the student. EMA is the
/// caller's responsibility (frequency policy lives in the epoch loop). The
/// teacher is only read; it must already be frozen.
StepOutcome train_step_stage1(ParameterSet& student, ParameterSet& teacher, AdamW& opt,
                              const BatchSampler::Batch& batch, const RunSpec& spec);

struct Stage1Result {
    ParameterSet student;
    ParameterSet teacher;
    ParameterSet teacher_init;              // teacher state before any EMA event
    std::vector<ParameterSet> ema_snapshots; // student at each EMA event, in order
    std::vector<LossReport> step_reports;
    int ema_events = 0;
};

/// Full stage-1 run. When run_dir is non-empty, writes config.txt,
/// metrics.log, checkpoint.bin (groups "model" = student, "teacher") and
/// ema/snap_*.bin snapshots.
Stage1Result train_stage1(const RunSpec& spec, std::uint64_t seed, const std::string& run_dir = "");

struct Stage2Result {
    ParameterSet adapter;
    std::vector<double> epoch_auc; // per-epoch target-domain AUC
    std::uint64_t backbone_hash_before = 0;
    std::uint64_t backbone_hash_after = 0;
    std::vector<LossReport> step_reports;
};

/// Frozen-backbone adapter training for one domain. Only adapter parameters
/// receive updates; the base model (including normalization buffers) is
/// byte-identical afterwards.
Stage2Result train_stage2_dca(const ParameterSet& base_model, DomainTag domain, const RunSpec& spec,
                              std::uint64_t seed, const std::string& run_dir = "");

/// Rebuilds the Eq.-style EMA recursion from logged snapshots; used to audit
/// a finished run.
ParameterSet replay_ema(const ParameterSet& teacher_init, const std::vector<ParameterSet>& snapshots,
                        double alpha);

/// Renders one metrics-log line: "step cls l1 giou psot total".
std::string metrics_line(int step, const LossReport& r);

} // namespace umda
