// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 umda contributors

#include "umda/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

namespace umda {

// ---------------------------------------------------------------------------
// Optimizer and EMA
// ---------------------------------------------------------------------------

AdamW::AdamW(double lr, double weight_decay, double beta1, double beta2, double eps)
    : lr_(lr), wd_(weight_decay), beta1_(beta1), beta2_(beta2), eps_(eps) {
    if (!(lr > 0.0)) throw ConfigError("AdamW: learning rate must be positive");
}

void AdamW::step(ParameterSet& params) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (const auto& name : params.names()) {
        if (!params.is_learnable(name)) continue;
        Tensor& p = params.at(name);
        const auto& g = p.grad_or_zeros();
        auto& m = m_[name];
        auto& v = v_[name];
        if (m.size() != g.size()) m.assign(g.size(), 0.0);
        if (v.size() != g.size()) v.assign(g.size(), 0.0);
        auto& w = p.raw_data();
        for (std::size_t i = 0; i < g.size(); ++i) {
            m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
            v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            w[i] -= lr_ * (mhat / (std::sqrt(vhat) + eps_) + wd_ * w[i]);
            if (!std::isfinite(w[i])) throw NumericError("AdamW: non-finite parameter after update");
        }
    }
}

void ema_update(ParameterSet& teacher, const ParameterSet& student, double alpha) {
    teacher.ema_blend_from(student, alpha);
}

// ---------------------------------------------------------------------------
// Pseudo labels
// ---------------------------------------------------------------------------

std::vector<PseudoLabel> make_pseudo_labels(const ParameterSet& teacher,
                                            const std::vector<const SamplePair*>& targets,
                                            const EncoderConfig& cfg, double tau) {
    if (!(tau >= 0.0 && tau <= 1.0)) throw ConfigError("pseudo labels: tau outside [0,1]");
    std::vector<PseudoLabel> out;
    if (targets.empty()) return out;
    ParameterSet frozen = teacher.clone();
    frozen.freeze_all();
    const ResponseBatch resp = forward_batch(targets, frozen, nullptr, cfg, /*training=*/false);
    out.reserve(targets.size());
    for (std::size_t i = 0; i < targets.size(); ++i) {
        const Decoded dec = decode_box(resp, static_cast<int>(i), cfg.search_size);
        PseudoLabel pl;
        pl.box = dec.box;
        pl.confidence = dec.score;
        pl.accepted = dec.score >= tau;
        pl.cell = dec.cell;
        out.push_back(pl);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Config plumbing
// ---------------------------------------------------------------------------

void TrainConfig::validate() const {
    if (!(alpha >= 0.0 && alpha < 1.0)) throw ConfigError("train: alpha must lie in [0,1)");
    if (!(tau > 0.0 && tau < 1.0) && tau != 0.0 && tau != 1.0)
        throw ConfigError("train: tau must lie in [0,1]");
    if (epochs_stage1 < 1 || epochs_stage2 < 1 || steps_per_epoch < 1 || batch_size < 1)
        throw ConfigError("train: schedule values must be positive");
    if (ema_k < 1) throw ConfigError("train: ema_k must be positive");
    weights.validate();
}

HeadConfig RunSpec::head() const {
    HeadConfig h;
    h.grid = enc.grid();
    h.search_size = enc.search_size;
    return h;
}

const WeatherParams& RunSpec::weather_for(DomainTag tag) const {
    switch (tag) {
        case DomainTag::Fog: return fog;
        case DomainTag::Dark: return dark;
        case DomainTag::Rain: return rain;
        case DomainTag::Source: break;
    }
    throw ConfigError("no weather parameters for the source domain");
}

RunSpec run_spec_from_config(const Config& cfg) {
    RunSpec s;
    s.raw = cfg;

    s.enc.patch_size = cfg.get_int("encoder.patch_size", 8);
    s.enc.embed_dim = cfg.get_int("encoder.embed_dim", 32);
    s.enc.depth = cfg.get_int("encoder.depth", 2);
    s.enc.heads = cfg.get_int("encoder.heads", 4);
    s.enc.template_size = cfg.get_int("encoder.template_size", 32);
    s.enc.search_size = cfg.get_int("encoder.search_size", 64);
    s.enc.mlp_ratio = cfg.get_int("encoder.mlp_ratio", 2);
    s.enc.head_channels = cfg.get_int("encoder.head_channels", 16);
    s.enc.bank_tokens = cfg.get_int("encoder.bank_tokens", 8);
    s.enc.validate();

    s.train.alpha = cfg.get_double("train.alpha", 0.99);
    const std::string freq = cfg.get_string("train.ema_frequency", "epoch");
    if (freq == "epoch") {
        s.train.ema_frequency = EmaFrequency::PerEpoch;
    } else if (freq == "batch") {
        s.train.ema_frequency = EmaFrequency::PerBatch;
    } else if (freq == "every_k") {
        s.train.ema_frequency = EmaFrequency::EveryKEpochs;
    } else {
        throw ConfigError("train.ema_frequency must be epoch|batch|every_k");
    }
    s.train.ema_k = cfg.get_int("train.ema_k", 5);
    s.train.epochs_stage1 = cfg.get_int("train.epochs_stage1", 40);
    s.train.epochs_stage2 = cfg.get_int("train.epochs_stage2", 10);
    s.train.steps_per_epoch = cfg.get_int("train.steps_per_epoch", 10);
    s.train.learning_rate = cfg.get_double("train.learning_rate", 4e-4);
    s.train.weight_decay = cfg.get_double("train.weight_decay", 1e-4);
    s.train.batch_size = cfg.get_int("train.batch_size", 8);
    s.train.tau = cfg.get_double("train.tau", 0.6);
    s.train.log_ema_snapshots = cfg.get_bool("train.log_ema_snapshots", true);
    s.train.stage2_epoch_eval = cfg.get_bool("train.stage2_epoch_eval", true);
    s.train.weights.w_cls = cfg.get_double("loss.cls", 1.0);
    s.train.weights.beta = cfg.get_double("loss.l1", 5.0);
    s.train.weights.gamma_w = cfg.get_double("loss.giou", 2.0);
    s.train.weights.lambda = cfg.get_double("loss.psot", 10.0);
    s.train.psot.epsilon = cfg.get_double("ot.epsilon", 0.05);
    s.train.psot.max_iter = cfg.get_int("ot.max_iter", 1000);
    s.train.psot.tol = cfg.get_double("ot.tol", 1e-9);
    s.train.psot.anchor_student_at_teacher = cfg.get_bool("ot.anchor_student", false);
    s.train.validate();

    s.data.scene.frame_width = cfg.get_int("data.frame_size", 128);
    s.data.scene.frame_height = s.data.scene.frame_width;
    s.data.scene.length = cfg.get_int("data.sequence_length", 50);
    s.data.scene.target_w = cfg.get_double("data.target_w", 18.0);
    s.data.scene.target_h = cfg.get_double("data.target_h", 14.0);
    s.data.scene.distractors = cfg.get_int("data.distractors", 2);
    s.data.scene.max_speed = cfg.get_double("data.max_speed", 3.0);
    s.data.scene.accel = cfg.get_double("data.accel", 0.8);
    s.data.scene.validate();
    s.data.source_sequences = cfg.get_int("data.source_sequences", 16);
    s.data.target_sequences = cfg.get_int("data.target_sequences", 1);
    s.data.target_length = cfg.get_int("data.target_length", 15);
    s.data.eval_sequences = cfg.get_int("data.eval_sequences", 4);
    s.data.eval_length = cfg.get_int("data.eval_length", 40);
    s.data.source_ratio = cfg.get_double("data.source_ratio", 1.0);
    s.data.target_ratio = cfg.get_double("data.target_ratio", 4.0);

    s.data.domains.clear();
    const std::string domains = cfg.get_string("data.domains", "fog,dark,rain");
    std::string token;
    for (std::size_t i = 0; i <= domains.size(); ++i) {
        if (i == domains.size() || domains[i] == ',') {
            if (!token.empty()) s.data.domains.push_back(domain_from_name(token));
            token.clear();
        } else if (!std::isspace(static_cast<unsigned char>(domains[i]))) {
            token += domains[i];
        }
    }

    s.fog.fog_beta = cfg.get_double("weather.fog_beta", 2.0);
    s.fog.airlight = {cfg.get_double("weather.airlight_r", 0.9),
                      cfg.get_double("weather.airlight_g", 0.92),
                      cfg.get_double("weather.airlight_b", 0.95)};
    s.dark.gamma = cfg.get_double("weather.gamma", 2.5);
    s.dark.brightness = cfg.get_double("weather.brightness", 0.6);
    s.rain.rain_density = cfg.get_double("weather.rain_density", 5.0);
    s.rain.rain_angle = cfg.get_double("weather.rain_angle", 15.0);
    s.rain.rain_alpha = cfg.get_double("weather.rain_alpha", 0.5);
    s.fog.validate();
    s.dark.validate();
    s.rain.validate();

    s.precision_threshold_px = cfg.get_double("eval.precision_threshold", kPrecisionThresholdPx);
    return s;
}

std::vector<DomainPool> build_training_pools(const RunSpec& spec, std::uint64_t seed) {
    std::vector<DomainPool> pools;

    DomainPool source;
    source.tag = DomainTag::Source;
    for (int i = 0; i < spec.data.source_sequences; ++i) {
        Sequence seq = generate_sequence(spec.data.scene, Rng::mix(seed, 0x100 + static_cast<std::uint64_t>(i)));
        source.boxes.push_back(seq.annotations);
        source.sequences.push_back(std::move(seq));
    }
    pools.push_back(std::move(source));

    SceneConfig target_scene = spec.data.scene;
    target_scene.length = spec.data.target_length;
    for (std::size_t d = 0; d < spec.data.domains.size(); ++d) {
        const DomainTag tag = spec.data.domains[d];
        DomainPool pool;
        pool.tag = tag;
        for (int i = 0; i < spec.data.target_sequences; ++i) {
            const std::uint64_t sseed = Rng::mix(seed, 0x9000 + 64 * static_cast<std::uint64_t>(d) +
                                                           static_cast<std::uint64_t>(i));
            Sequence clean = generate_sequence(target_scene, sseed);
            WeatherParams wp = spec.weather_for(tag);
            wp.seed = Rng::mix(sseed, 0x77);
            CorruptedSequence corrupted = corrupt_sequence(clean, wp);
            pool.sequences.push_back(std::move(corrupted.sequence));
            pool.boxes.push_back(std::move(corrupted.boxes));
        }
        pools.push_back(std::move(pool));
    }
    return pools;
}

std::vector<double> pool_ratios(const RunSpec& spec, std::size_t pool_count) {
    std::vector<double> ratios;
    ratios.push_back(spec.data.source_ratio);
    for (std::size_t i = 1; i < pool_count; ++i) ratios.push_back(spec.data.target_ratio);
    return ratios;
}

EvalSequenceSet build_eval_set(const RunSpec& spec, DomainTag domain, std::uint64_t seed) {
    SceneConfig scene = spec.data.scene;
    scene.length = spec.data.eval_length;
    EvalSequenceSet set;
    set.domain = domain;
    for (int i = 0; i < spec.data.eval_sequences; ++i) {
        const std::uint64_t sseed = Rng::mix(seed, 0xE7A1 + static_cast<std::uint64_t>(i));
        Sequence clean = generate_sequence(scene, sseed);
        if (domain == DomainTag::Source) {
            set.boxes.push_back(clean.annotations);
            set.frames.push_back(std::move(clean.frames));
        } else {
            WeatherParams wp = spec.weather_for(domain);
            wp.seed = Rng::mix(sseed, 0x55);
            CorruptedSequence corrupted = corrupt_sequence(clean, wp);
            set.boxes.push_back(std::move(corrupted.boxes));
            set.frames.push_back(std::move(corrupted.sequence.frames));
        }
    }
    return set;
}

// ---------------------------------------------------------------------------
// Training steps
// ---------------------------------------------------------------------------

namespace {

struct SupervisedTerms {
    LossTerms terms;
    int samples = 0;
};

/// Focal + box terms of a response batch against per-sample label maps.
/// `active` masks which samples contribute (pseudo-label acceptance).
SupervisedTerms supervised_terms(const ResponseBatch& resp, const std::vector<LabelMaps>& labels,
                                 const std::vector<bool>& active) {
    const int hw = resp.grid * resp.grid;
    SupervisedTerms out;

    std::vector<Tensor> active_scores;
    std::vector<double> flat_target;
    Tensor l1_acc, giou_acc;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (!active[i]) continue;
        ++out.samples;
        active_scores.push_back(index0(resp.scores, static_cast<int>(i)));
        flat_target.insert(flat_target.end(), labels[i].cls.begin(), labels[i].cls.end());

        const Tensor pred = pred_box_at_cell(resp, static_cast<int>(i), labels[i].peak_index());
        const Tensor gt = label_box_normalized(labels[i]);
        const Tensor l1_i = l1_box(pred, gt);
        const Tensor giou_i = giou_loss(pred, gt);
        l1_acc = l1_acc.defined() ? add(l1_acc, l1_i) : l1_i;
        giou_acc = giou_acc.defined() ? add(giou_acc, giou_i) : giou_i;
    }
    if (out.samples == 0) return out;

    const Tensor score_stack = stack0(active_scores);
    (void)hw;
    out.terms.cls = focal_loss(score_stack, flat_target, out.samples);
    out.terms.l1 = mul_scalar(l1_acc, 1.0 / out.samples);
    out.terms.giou = mul_scalar(giou_acc, 1.0 / out.samples);
    return out;
}

std::vector<const SamplePair*> pointers(const std::vector<SamplePair>& v) {
    std::vector<const SamplePair*> p;
    p.reserve(v.size());
    for (const auto& s : v) p.push_back(&s);
    return p;
}

} // namespace

StepOutcome train_step_stage1(ParameterSet& student, ParameterSet& teacher, AdamW& opt,
                              const BatchSampler::Batch& batch, const RunSpec& spec) {
    StepOutcome outcome;
    outcome.source_count = static_cast<int>(batch.source.size());
    outcome.target_count = static_cast<int>(batch.target.size());
    const HeadConfig head_cfg = spec.head();

    student.zero_grads();

    LossTerms source_terms;
    if (!batch.source.empty()) {
        const auto ptrs = pointers(batch.source);
        const ResponseBatch resp = forward_batch(ptrs, student, nullptr, spec.enc, /*training=*/true);
        std::vector<LabelMaps> labels;
        std::vector<bool> active;
        for (const auto& s : batch.source) {
            labels.push_back(make_labels(*s.label, head_cfg));
            active.push_back(true);
        }
        source_terms = supervised_terms(resp, labels, active).terms;
    }

    std::optional<LossTerms> target_terms;
    Tensor psot;
    if (!batch.target.empty()) {
        const auto ptrs = pointers(batch.target);
        // One teacher pass (evaluation mode, fully frozen, no gradients)
        // serves both the pseudo labels and the alignment reference.
        const ResponseBatch teacher_resp =
            forward_batch(ptrs, teacher, nullptr, spec.enc, /*training=*/false);
        std::vector<PseudoLabel> pseudo;
        for (std::size_t i = 0; i < ptrs.size(); ++i) {
            const Decoded dec = decode_box(teacher_resp, static_cast<int>(i), spec.enc.search_size);
            pseudo.push_back(PseudoLabel{dec.box, dec.score, dec.score >= spec.train.tau, dec.cell});
        }

        const ResponseBatch resp = forward_batch(ptrs, student, nullptr, spec.enc, /*training=*/true);

        std::vector<LabelMaps> labels(batch.target.size());
        std::vector<bool> active(batch.target.size(), false);
        for (std::size_t i = 0; i < pseudo.size(); ++i) {
            if (!pseudo[i].accepted) continue;
            // A degenerate teacher box cannot supervise regression.
            if (!(pseudo[i].box.w > 1e-6 && pseudo[i].box.h > 1e-6)) continue;
            labels[i] = make_labels(pseudo[i].box, head_cfg);
            active[i] = true;
            ++outcome.accepted_pseudo;
        }
        const SupervisedTerms st = supervised_terms(resp, labels, active);
        if (st.samples > 0) target_terms = st.terms;

        if (spec.train.weights.lambda > 0.0) {
            const PsotResult pr = psot_loss(resp.scores, teacher_resp.scores, resp.grid, resp.grid,
                                            spec.train.psot);
            psot = pr.loss;
            outcome.psot_converged = pr.converged;
        }
    }

    const Tensor total = total_loss(source_terms, target_terms, psot, spec.train.weights, &outcome.report);
    total.backward();
    opt.step(student);
    student.zero_grads();
    return outcome;
}

// ---------------------------------------------------------------------------
// Stage 1
// ---------------------------------------------------------------------------

std::string metrics_line(int step, const LossReport& r) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%d %.17g %.17g %.17g %.17g %.17g", step, r.cls, r.l1, r.giou,
                  r.psot, r.total);
    return std::string(buf);
}

namespace {

void save_snapshot(const ParameterSet& p, const std::string& path) {
    Checkpoint c;
    c.put("student", p.clone());
    c.save(path);
}

} // namespace

Stage1Result train_stage1(const RunSpec& spec, std::uint64_t seed, const std::string& run_dir) {
    const bool to_disk = !run_dir.empty();
    std::ofstream metrics;
    if (to_disk) {
        std::filesystem::create_directories(run_dir);
        std::filesystem::create_directories(run_dir + "/ema");
        std::ofstream cfg_out(run_dir + "/config.txt");
        cfg_out << spec.raw.canonical_text();
        metrics.open(run_dir + "/metrics.log");
        if (!metrics) throw IoError("cannot open metrics log in " + run_dir);
    }

    const std::vector<DomainPool> pools = build_training_pools(spec, Rng::mix(seed, 0xDA7A));
    BatchSampler sampler(pools, pool_ratios(spec, pools.size()), spec.train.batch_size,
                         Rng::mix(seed, 0x5A3));

    Stage1Result result;
    result.student = init_model_params(spec.enc, seed);
    result.teacher = result.student.clone();
    result.teacher.freeze_all(); // never directly optimized
    result.teacher_init = result.teacher.clone();

    AdamW opt(spec.train.learning_rate, spec.train.weight_decay);

    int step = 0;
    auto ema_event = [&]() {
        result.ema_snapshots.push_back(result.student.clone());
        ema_update(result.teacher, result.student, spec.train.alpha);
        ++result.ema_events;
        if (to_disk && spec.train.log_ema_snapshots) {
            char name[64];
            std::snprintf(name, sizeof(name), "/ema/snap_%04d.bin", result.ema_events - 1);
            save_snapshot(result.ema_snapshots.back(), run_dir + name);
        }
    };

    for (int epoch = 0; epoch < spec.train.epochs_stage1; ++epoch) {
        for (int s = 0; s < spec.train.steps_per_epoch; ++s) {
            const StepOutcome out = train_step_stage1(result.student, result.teacher, opt,
                                                      sampler.next(), spec);
            result.step_reports.push_back(out.report);
            if (to_disk) metrics << metrics_line(step, out.report) << "\n";
            ++step;
            if (spec.train.ema_frequency == EmaFrequency::PerBatch) ema_event();
        }
        if (spec.train.ema_frequency == EmaFrequency::PerEpoch ||
            (spec.train.ema_frequency == EmaFrequency::EveryKEpochs &&
             (epoch + 1) % spec.train.ema_k == 0)) {
            ema_event();
        }
    }

    if (to_disk) {
        metrics.flush();
        Checkpoint ckpt;
        ckpt.config_fingerprint = spec.raw.fingerprint();
        ckpt.config_text = spec.raw.canonical_text();
        ckpt.put("model", result.student.clone());
        ckpt.put("teacher", result.teacher.clone());
        ckpt.save(run_dir + "/checkpoint.bin");
        save_snapshot(result.teacher_init, run_dir + "/ema/teacher_init.bin");
    }
    return result;
}

ParameterSet replay_ema(const ParameterSet& teacher_init, const std::vector<ParameterSet>& snapshots,
                        double alpha) {
    ParameterSet teacher = teacher_init.clone();
    for (const auto& snap : snapshots) ema_update(teacher, snap, alpha);
    return teacher;
}

// ---------------------------------------------------------------------------
// Stage 2 (domain-customized adapter)
// ---------------------------------------------------------------------------

Stage2Result train_stage2_dca(const ParameterSet& base_model, DomainTag domain, const RunSpec& spec,
                              std::uint64_t seed, const std::string& run_dir) {
    if (domain == DomainTag::Source) throw ConfigError("stage 2 adapts a corrupted domain, not source");
    const bool to_disk = !run_dir.empty();
    std::ofstream metrics;
    if (to_disk) {
        std::filesystem::create_directories(run_dir);
        std::ofstream cfg_out(run_dir + "/config.txt");
        cfg_out << spec.raw.canonical_text();
        metrics.open(run_dir + "/metrics.log");
        if (!metrics) throw IoError("cannot open metrics log in " + run_dir);
    }

    // Restrict the pools to source material plus the chosen domain.
    RunSpec stage_spec = spec;
    stage_spec.data.domains = {domain};
    const std::vector<DomainPool> pools = build_training_pools(stage_spec, Rng::mix(seed, 0xDA7A));
    BatchSampler sampler(pools, pool_ratios(stage_spec, pools.size()), spec.train.batch_size,
                         Rng::mix(seed, 0x5A32));

    Stage2Result result;
    ParameterSet model = base_model.clone();
    model.freeze_all(); // backbone and head fixed; normalization in eval mode
    result.backbone_hash_before = parameter_bytes_hash(model);

    result.adapter = init_adapter_params(spec.enc, Rng::mix(seed, 0xADA0));
    AdamW opt(spec.train.learning_rate, spec.train.weight_decay);
    const HeadConfig head_cfg = spec.head();

    const EvalSequenceSet eval_set =
        spec.train.stage2_epoch_eval ? build_eval_set(spec, domain, Rng::mix(seed, 0xE0A1))
                                     : EvalSequenceSet{};

    int step = 0;
    for (int epoch = 0; epoch < spec.train.epochs_stage2; ++epoch) {
        for (int s = 0; s < spec.train.steps_per_epoch; ++s) {
            const BatchSampler::Batch batch = sampler.next();
            result.adapter.zero_grads();

            LossTerms source_terms;
            if (!batch.source.empty()) {
                const auto ptrs = pointers(batch.source);
                // Adapter applies to every stage-2 forward; source supervision
                // anchors it against drifting off the base behavior.
                const ResponseBatch resp =
                    forward_batch(ptrs, model, &result.adapter, spec.enc, /*training=*/false);
                std::vector<LabelMaps> labels;
                std::vector<bool> active;
                for (const auto& sp : batch.source) {
                    labels.push_back(make_labels(*sp.label, head_cfg));
                    active.push_back(true);
                }
                source_terms = supervised_terms(resp, labels, active).terms;
            }

            std::optional<LossTerms> target_terms;
            Tensor psot;
            if (!batch.target.empty()) {
                const auto ptrs = pointers(batch.target);
                // The frozen base model plays the teacher: one adapter-free
                // pass yields pseudo labels and the alignment reference.
                const ResponseBatch teacher_resp =
                    forward_batch(ptrs, model, nullptr, spec.enc, /*training=*/false);
                std::vector<PseudoLabel> pseudo;
                for (std::size_t i = 0; i < ptrs.size(); ++i) {
                    const Decoded dec =
                        decode_box(teacher_resp, static_cast<int>(i), spec.enc.search_size);
                    pseudo.push_back(
                        PseudoLabel{dec.box, dec.score, dec.score >= spec.train.tau, dec.cell});
                }
                const ResponseBatch resp =
                    forward_batch(ptrs, model, &result.adapter, spec.enc, /*training=*/false);

                std::vector<LabelMaps> labels(batch.target.size());
                std::vector<bool> active(batch.target.size(), false);
                for (std::size_t i = 0; i < pseudo.size(); ++i) {
                    if (!pseudo[i].accepted) continue;
                    if (!(pseudo[i].box.w > 1e-6 && pseudo[i].box.h > 1e-6)) continue;
                    labels[i] = make_labels(pseudo[i].box, head_cfg);
                    active[i] = true;
                }
                const SupervisedTerms st = supervised_terms(resp, labels, active);
                if (st.samples > 0) target_terms = st.terms;

                if (spec.train.weights.lambda > 0.0) {
                    const PsotResult pr = psot_loss(resp.scores, teacher_resp.scores, resp.grid,
                                                    resp.grid, spec.train.psot);
                    psot = pr.loss;
                }
            }

            LossReport report;
            const Tensor total = total_loss(source_terms, target_terms, psot, spec.train.weights, &report);
            total.backward();
            opt.step(result.adapter);
            result.adapter.zero_grads();
            result.step_reports.push_back(report);
            if (to_disk) metrics << metrics_line(step, report) << "\n";
            ++step;
        }
        if (spec.train.stage2_epoch_eval) {
            const EvalResult er = evaluate_set(model, &result.adapter, spec.enc, eval_set,
                                               spec.precision_threshold_px);
            result.epoch_auc.push_back(er.auc);
        }
    }

    result.backbone_hash_after = parameter_bytes_hash(model);

    if (to_disk) {
        metrics.flush();
        if (!result.epoch_auc.empty()) {
            std::ofstream curve(run_dir + "/epoch_auc.csv");
            curve << "epoch,auc\n";
            char line[64];
            for (std::size_t e = 0; e < result.epoch_auc.size(); ++e) {
                std::snprintf(line, sizeof(line), "%zu,%.17g\n", e, result.epoch_auc[e]);
                curve << line;
            }
        }
        Checkpoint ckpt;
        ckpt.config_fingerprint = spec.raw.fingerprint();
        ckpt.config_text = spec.raw.canonical_text();
        ckpt.put("model", model.clone());
        ckpt.put(std::string("adapter/") + domain_name(domain), result.adapter.clone());
        ckpt.save(run_dir + "/checkpoint.bin");
    }
    return result;
}

} // namespace umda
