// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 umda contributors

#pragma once

#include <array>
#include <string>
#include <vector>

#include "umda/config.hpp"
#include "umda/model.hpp"

namespace umda {

/// One-pass evaluation scores. The success curve runs over IoU thresholds
/// 0.00..1.00 in steps of 0.05 (21 entries); AUC is its mean. Precision is
/// the fraction of frames with center error at or below the pixel threshold.
struct EvalResult {
    std::vector<double> ious;
    std::vector<double> center_errors;
    std::array<double, 21> success_curve{};
    double auc = 0.0;
    double precision = 0.0;
    double ao = 0.0;   // mean IoU
    double sr50 = 0.0; // success at IoU > 0.50
    double sr75 = 0.0;
    int frames = 0;

    void finalize(double precision_threshold_px);
};

inline constexpr double kPrecisionThresholdPx = 5.0;

/// Runs the tracker once through a labeled sequence: template fixed from the
/// first frame's ground truth, search window centered on the previous
/// prediction, ground truth touched only for scoring. The model is used
/// read-only.
EvalResult run_ope(const ParameterSet& model, const ParameterSet* adapter, const EncoderConfig& cfg,
                   const std::vector<Frame>& frames, const std::vector<BBox>& ground_truth,
                   double precision_threshold_px = kPrecisionThresholdPx);

struct EvalSequenceSet {
    std::vector<std::vector<Frame>> frames;
    std::vector<std::vector<BBox>> boxes;
    DomainTag domain = DomainTag::Source;
};

/// Frame-pooled aggregation of run_ope over every sequence in the set.
EvalResult evaluate_set(const ParameterSet& model, const ParameterSet* adapter,
                        const EncoderConfig& cfg, const EvalSequenceSet& set,
                        double precision_threshold_px = kPrecisionThresholdPx);

/// Writes success_curve.csv (threshold, success; 21 rows) and summary.json
/// (metrics, seeds, config fingerprint, run id) into out_dir.
void export_metrics(const EvalResult& result, const std::string& out_dir, const Config& cfg,
                    const std::vector<std::uint64_t>& seeds);

/// Reads back a summary.json written by export_metrics.
struct EvalSummary {
    double auc = 0.0;
    double precision = 0.0;
    double ao = 0.0;
    double sr50 = 0.0;
    double sr75 = 0.0;
    int frames = 0;
    std::vector<std::uint64_t> seeds;
    std::string config_fingerprint;
    std::string run_id;
};
EvalSummary load_summary(const std::string& path);

} // namespace umda
