// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 umda contributors

#include "umda/eval.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

namespace umda {

void EvalResult::finalize(double precision_threshold_px) {
    frames = static_cast<int>(ious.size());
    if (frames == 0) throw ValidationError("eval: no scored frames");
    for (int k = 0; k < 21; ++k) {
        const double thr = 0.05 * k;
        int hits = 0;
        for (double v : ious)
            if (v > thr) ++hits;
        success_curve[static_cast<std::size_t>(k)] = static_cast<double>(hits) / frames;
    }
    auc = 0.0;
    for (double s : success_curve) auc += s;
    auc /= 21.0;

    int close = 0;
    for (double e : center_errors)
        if (e <= precision_threshold_px) ++close;
    precision = static_cast<double>(close) / frames;

    ao = 0.0;
    int h50 = 0, h75 = 0;
    for (double v : ious) {
        ao += v;
        if (v > 0.50) ++h50;
        if (v > 0.75) ++h75;
    }
    ao /= frames;
    sr50 = static_cast<double>(h50) / frames;
    sr75 = static_cast<double>(h75) / frames;
}

EvalResult run_ope(const ParameterSet& model, const ParameterSet* adapter, const EncoderConfig& cfg,
                   const std::vector<Frame>& frames, const std::vector<BBox>& ground_truth,
                   double precision_threshold_px) {
    if (frames.size() < 2) throw ValidationError("run_ope: sequence needs at least two frames");
    if (frames.size() != ground_truth.size()) throw ValidationError("run_ope: ground truth length mismatch");

    // Read-only frozen copies so evaluation never builds gradient graphs.
    ParameterSet m = model.clone();
    m.freeze_all();
    ParameterSet a;
    if (adapter) {
        a = adapter->clone();
        a.freeze_all();
    }

    const BBox init = ground_truth[0];
    const Crop tcrop = crop_template(frames[0], init, cfg.template_size);
    BBox prev = init;

    EvalResult result;
    for (std::size_t t = 1; t < frames.size(); ++t) {
        const double side = 4.0 * std::sqrt(std::max(1.0, prev.w * prev.h));
        const Crop scrop = crop_region(frames[t], prev.cx, prev.cy, side, cfg.search_size);

        SamplePair pair;
        pair.template_crop = tcrop.image;
        pair.search_crop = scrop.image;
        pair.domain = frames[t].domain_tag;
        const std::vector<const SamplePair*> batch{&pair};
        const ResponseBatch resp = forward_batch(batch, m, adapter ? &a : nullptr, cfg, /*training=*/false);
        const Decoded dec = decode_box(resp, 0, cfg.search_size);

        BBox pred = scrop.to_frame(dec.box);
        pred.w = std::max(2.0, pred.w);
        pred.h = std::max(2.0, pred.h);
        pred.cx = std::clamp(pred.cx, 0.0, static_cast<double>(frames[t].width));
        pred.cy = std::clamp(pred.cy, 0.0, static_cast<double>(frames[t].height));
        prev = pred;

        result.ious.push_back(iou(pred, ground_truth[t]));
        result.center_errors.push_back(center_distance(pred, ground_truth[t]));
    }
    result.finalize(precision_threshold_px);
    return result;
}

EvalResult evaluate_set(const ParameterSet& model, const ParameterSet* adapter,
                        const EncoderConfig& cfg, const EvalSequenceSet& set,
                        double precision_threshold_px) {
    if (set.frames.empty()) throw ValidationError("evaluate_set: no sequences");
    EvalResult pooled;
    for (std::size_t i = 0; i < set.frames.size(); ++i) {
        const EvalResult r =
            run_ope(model, adapter, cfg, set.frames[i], set.boxes[i], precision_threshold_px);
        pooled.ious.insert(pooled.ious.end(), r.ious.begin(), r.ious.end());
        pooled.center_errors.insert(pooled.center_errors.end(), r.center_errors.begin(),
                                    r.center_errors.end());
    }
    pooled.finalize(precision_threshold_px);
    return pooled;
}

void export_metrics(const EvalResult& result, const std::string& out_dir, const Config& cfg,
                    const std::vector<std::uint64_t>& seeds) {
    if (result.frames == 0) throw ValidationError("export_metrics: empty result");
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);

    {
        std::ofstream csv(out_dir + "/success_curve.csv");
        if (!csv) throw IoError("cannot write success curve: " + out_dir);
        csv << "threshold,success\n";
        char line[64];
        for (int k = 0; k < 21; ++k) {
            std::snprintf(line, sizeof(line), "%.2f,%.17g\n", 0.05 * k,
                          result.success_curve[static_cast<std::size_t>(k)]);
            csv << line;
        }
    }

    // Run id: deterministic digest of config fingerprint and seeds.
    std::uint64_t rid = cfg.fingerprint();
    for (std::uint64_t s : seeds) rid = 1099511628211ULL * (rid ^ (s + 0x9e3779b97f4a7c15ULL));

    nlohmann::json j;
    j["auc"] = result.auc;
    j["precision"] = result.precision;
    j["ao"] = result.ao;
    j["sr50"] = result.sr50;
    j["sr75"] = result.sr75;
    j["frames"] = result.frames;
    j["seeds"] = seeds;
    j["config_fingerprint"] = fingerprint_hex(cfg.fingerprint());
    j["run_id"] = fingerprint_hex(rid);

    std::ofstream js(out_dir + "/summary.json");
    if (!js) throw IoError("cannot write summary: " + out_dir);
    js << j.dump(2) << "\n";
}

EvalSummary load_summary(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open summary: " + path);
    nlohmann::json j;
    in >> j;
    EvalSummary s;
    s.auc = j.at("auc").get<double>();
    s.precision = j.at("precision").get<double>();
    s.ao = j.at("ao").get<double>();
    s.sr50 = j.at("sr50").get<double>();
    s.sr75 = j.at("sr75").get<double>();
    s.frames = j.at("frames").get<int>();
    s.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    s.config_fingerprint = j.at("config_fingerprint").get<std::string>();
    s.run_id = j.at("run_id").get<std::string>();
    return s;
}

} // namespace umda
