// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 umda contributors

#pragma once

#include <optional>

#include "umda/datagen.hpp"
#include "umda/model.hpp"
#include "umda/tensor.hpp"

namespace umda {

struct LossWeights {
    double w_cls = 1.0;
    double beta = 5.0;    // L1
    double gamma_w = 2.0; // GIoU
    double lambda = 10.0; // PSOT

    void validate() const;
};

/// Unweighted component values plus the weighted total; the total always
/// equals the exact linear combination of the components.
struct LossReport {
    double cls = 0.0;
    double l1 = 0.0;
    double giou = 0.0;
    double psot = 0.0;
    double total = 0.0;
};

/// Penalty-reduced focal loss for Gaussian heatmap targets. At cells where
/// target == 1: -(1-p)^2 log p; elsewhere: -(1-t)^4 p^2 log(1-p). The sum is
/// divided by n_pos. Predictions are clamped to [1e-7, 1-1e-7] before logs.
Tensor focal_loss(const Tensor& pred_scores, const std::vector<double>& target, int n_pos);

/// Mean absolute difference of the 4 box parameters (normalized coords).
Tensor l1_box(const Tensor& pred_box, const Tensor& gt_box);

/// 1 - GIoU for center-format boxes with positive extents.
Tensor giou_loss(const Tensor& pred_box, const Tensor& gt_box);

/// Predicted box of one sample read at a fixed grid cell, in normalized
/// search coordinates [cx, cy, w, h] (cx, cy in units of the search side).
Tensor pred_box_at_cell(const ResponseBatch& resp, int sample, int cell);

/// Ground-truth box of a label map in the same normalized coordinates.
Tensor label_box_normalized(const LabelMaps& labels);

struct LossTerms {
    Tensor cls;
    Tensor l1;
    Tensor giou;
};

/// Hybrid supervision total: source terms plus pseudo-labeled target terms
/// (componentwise sums), plus lambda * psot. Undefined tensors count as
/// zero. The report receives the unweighted component values.
Tensor total_loss(const LossTerms& source, const std::optional<LossTerms>& target,
                  const Tensor& psot, const LossWeights& weights, LossReport* report = nullptr);

} // namespace umda
