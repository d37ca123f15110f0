// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 umda contributors

#include "umda/losses.hpp"

#include <cmath>

namespace umda {

void LossWeights::validate() const {
    if (w_cls < 0.0 || beta < 0.0 || gamma_w < 0.0 || lambda < 0.0)
        throw ConfigError("loss weights must be non-negative");
}

Tensor focal_loss(const Tensor& pred_scores, const std::vector<double>& target, int n_pos) {
    if (static_cast<std::size_t>(pred_scores.size()) != target.size())
        throw DimensionError("focal_loss: prediction/target size mismatch");
    if (n_pos < 1) throw ValidationError("focal_loss: n_pos must be positive");

    const int n = pred_scores.size();
    std::vector<double> pos_mask(target.size(), 0.0);
    std::vector<double> neg_weight(target.size(), 0.0);
    for (std::size_t i = 0; i < target.size(); ++i) {
        const double t = target[i];
        if (!(t >= 0.0 && t <= 1.0)) throw ValidationError("focal_loss: target outside [0,1]");
        if (t == 1.0) {
            pos_mask[i] = 1.0;
        } else {
            const double w = (1.0 - t) * (1.0 - t);
            neg_weight[i] = w * w;
        }
    }

    const Tensor p = clamp(pred_scores, 1e-7, 1.0 - 1e-7);
    const Tensor ones(pred_scores.shape(), 1.0);
    const Tensor one_minus_p = sub(ones, p);
    const Tensor pos_terms = mul(square(one_minus_p), log_elem(p));
    const Tensor neg_terms = mul(square(p), log_elem(one_minus_p));
    const Tensor mask_pos(pred_scores.shape(), std::move(pos_mask));
    const Tensor mask_neg(pred_scores.shape(), std::move(neg_weight));
    const Tensor summed = sum(add(mul(mask_pos, pos_terms), mul(mask_neg, neg_terms)));
    return mul_scalar(summed, -1.0 / static_cast<double>(n_pos));
}

Tensor l1_box(const Tensor& pred_box, const Tensor& gt_box) {
    if (pred_box.size() != 4 || gt_box.size() != 4) throw DimensionError("l1_box: boxes carry 4 parameters");
    return mean(abs_elem(sub(pred_box, gt_box)));
}

namespace {

struct Corners {
    Tensor x1, y1, x2, y2, area;
};

Corners corners_of(const Tensor& box) {
    const Tensor cx = gather(box, {0});
    const Tensor cy = gather(box, {1});
    const Tensor w = gather(box, {2});
    const Tensor h = gather(box, {3});
    if (!(w.value() > 0.0 && h.value() > 0.0)) throw ValidationError("giou_loss: box area must be positive");
    Corners c;
    c.x1 = sub(cx, mul_scalar(w, 0.5));
    c.x2 = add(cx, mul_scalar(w, 0.5));
    c.y1 = sub(cy, mul_scalar(h, 0.5));
    c.y2 = add(cy, mul_scalar(h, 0.5));
    c.area = mul(w, h);
    return c;
}

} // namespace

Tensor giou_loss(const Tensor& pred_box, const Tensor& gt_box) {
    if (pred_box.size() != 4 || gt_box.size() != 4) throw DimensionError("giou_loss: boxes carry 4 parameters");
    const Corners a = corners_of(pred_box);
    const Corners b = corners_of(gt_box);

    const Tensor iw = relu(sub(minimum(a.x2, b.x2), maximum(a.x1, b.x1)));
    const Tensor ih = relu(sub(minimum(a.y2, b.y2), maximum(a.y1, b.y1)));
    const Tensor inter = mul(iw, ih);
    const Tensor uni = sub(add(a.area, b.area), inter);
    const Tensor iou_t = div_elem(inter, uni);

    const Tensor cw = sub(maximum(a.x2, b.x2), minimum(a.x1, b.x1));
    const Tensor ch = sub(maximum(a.y2, b.y2), minimum(a.y1, b.y1));
    const Tensor area_c = mul(cw, ch);
    const Tensor giou = sub(iou_t, div_elem(sub(area_c, uni), area_c));
    return sub(Tensor::scalar(1.0), giou);
}

Tensor pred_box_at_cell(const ResponseBatch& resp, int sample, int cell) {
    const int g = resp.grid;
    const int hw = g * g;
    if (sample < 0 || sample >= resp.n) throw ValidationError("pred_box_at_cell: sample out of range");
    if (cell < 0 || cell >= hw) throw ValidationError("pred_box_at_cell: cell out of range");
    const int row = cell / g;
    const int col = cell % g;
    const int base = sample * 2 * hw;

    const Tensor off_x = gather(resp.offsets, {base + cell});
    const Tensor off_y = gather(resp.offsets, {base + hw + cell});
    const Tensor size_w = gather(resp.sizes, {base + cell});
    const Tensor size_h = gather(resp.sizes, {base + hw + cell});

    // Normalized center: (cell corner + offset) / grid.
    const Tensor cx = mul_scalar(add_scalar(off_x, static_cast<double>(col)), 1.0 / g);
    const Tensor cy = mul_scalar(add_scalar(off_y, static_cast<double>(row)), 1.0 / g);
    return reshape(stack0({cx, cy, size_w, size_h}), {4});
}

Tensor label_box_normalized(const LabelMaps& labels) {
    const int g = labels.grid;
    const int p = labels.peak_index();
    const double cx = (labels.peak_col + labels.off_x[static_cast<std::size_t>(p)]) / g;
    const double cy = (labels.peak_row + labels.off_y[static_cast<std::size_t>(p)]) / g;
    return Tensor({4}, {cx, cy, labels.size_w[static_cast<std::size_t>(p)],
                        labels.size_h[static_cast<std::size_t>(p)]});
}

Tensor total_loss(const LossTerms& source, const std::optional<LossTerms>& target,
                  const Tensor& psot, const LossWeights& weights, LossReport* report) {
    weights.validate();
    auto or_zero = [](const Tensor& t) { return t.defined() ? t : Tensor::scalar(0.0); };

    Tensor cls = or_zero(source.cls);
    Tensor l1 = or_zero(source.l1);
    Tensor giou = or_zero(source.giou);
    if (target) {
        cls = add(cls, or_zero(target->cls));
        l1 = add(l1, or_zero(target->l1));
        giou = add(giou, or_zero(target->giou));
    }
    const Tensor psot_t = or_zero(psot);
    for (const Tensor* t : {&cls, &l1, &giou, &psot_t}) {
        if (!std::isfinite(t->value())) throw NumericError("total_loss: non-finite component");
    }

    const Tensor total = add(add(mul_scalar(cls, weights.w_cls), mul_scalar(l1, weights.beta)),
                             add(mul_scalar(giou, weights.gamma_w), mul_scalar(psot_t, weights.lambda)));
    if (report) {
        report->cls = cls.value();
        report->l1 = l1.value();
        report->giou = giou.value();
        report->psot = psot_t.value();
        report->total = total.value();
    }
    return total;
}

} // namespace umda
