// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 umda contributors

#include "umda/datagen.hpp"

#include <algorithm>
#include <cmath>

namespace umda {

void SceneConfig::validate() const {
    if (frame_width < 16 || frame_height < 16) throw ValidationError("frame too small");
    if (length < 1) throw ValidationError("sequence length must be >= 1");
    if (!(target_w > 2.0 && target_h > 2.0)) throw ValidationError("target too small");
    if (target_w >= frame_width || target_h >= frame_height)
        throw ValidationError("target larger than frame");
    if (distractors < 0) throw ValidationError("negative distractor count");
}

namespace {

struct MovingObject {
    double x, y, vx, vy;
    double w, h;
    std::array<double, 3> color;
};

struct TexParams {
    // Three sinusoid octaves per channel.
    std::array<double, 9> fx, fy, phase, amp;
    std::array<double, 3> base;
};

TexParams make_texture(Rng& rng, double contrast) {
    TexParams t{};
    for (int c = 0; c < 3; ++c) t.base[static_cast<std::size_t>(c)] = rng.uniform(0.35, 0.6);
    for (int k = 0; k < 9; ++k) {
        t.fx[static_cast<std::size_t>(k)] = rng.uniform(0.05, 0.45);
        t.fy[static_cast<std::size_t>(k)] = rng.uniform(0.05, 0.45);
        t.phase[static_cast<std::size_t>(k)] = rng.uniform(0.0, 6.28318530717958647692);
        t.amp[static_cast<std::size_t>(k)] = contrast * rng.uniform(0.3, 1.0) / 3.0;
    }
    return t;
}

double texture_value(const TexParams& t, int c, double x, double y) {
    double v = t.base[static_cast<std::size_t>(c)];
    for (int k = 0; k < 3; ++k) {
        const int i = c * 3 + k;
        v += t.amp[static_cast<std::size_t>(i)] *
             std::sin(t.fx[static_cast<std::size_t>(i)] * x + t.fy[static_cast<std::size_t>(i)] * y +
                      t.phase[static_cast<std::size_t>(i)]);
    }
    return std::clamp(v, 0.0, 1.0);
}

/// Anti-aliased ellipse coverage in [0,1] for a pixel center.
double ellipse_coverage(double px, double py, const MovingObject& o) {
    const double nx = (px - o.x) / (0.5 * o.w);
    const double ny = (py - o.y) / (0.5 * o.h);
    const double r = std::sqrt(nx * nx + ny * ny);
    const double edge = 1.5 / std::min(o.w, o.h); // ~0.75 px transition band
    return std::clamp((1.0 - r) / edge + 0.5, 0.0, 1.0);
}

void draw_object(Frame& f, const MovingObject& o) {
    const int x0 = std::max(0, static_cast<int>(std::floor(o.x - 0.5 * o.w - 1)));
    const int x1 = std::min(f.width - 1, static_cast<int>(std::ceil(o.x + 0.5 * o.w + 1)));
    const int y0 = std::max(0, static_cast<int>(std::floor(o.y - 0.5 * o.h - 1)));
    const int y1 = std::min(f.height - 1, static_cast<int>(std::ceil(o.y + 0.5 * o.h + 1)));
    for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
            const double cov = ellipse_coverage(x + 0.5, y + 0.5, o);
            if (cov <= 0.0) continue;
            for (int c = 0; c < 3; ++c) {
                f.at(x, y, c) = (1.0 - cov) * f.at(x, y, c) + cov * o.color[static_cast<std::size_t>(c)];
            }
        }
    }
}

void step_object(MovingObject& o, Rng& rng, const SceneConfig& cfg) {
    o.vx += rng.uniform(-cfg.accel, cfg.accel);
    o.vy += rng.uniform(-cfg.accel, cfg.accel);
    o.vx = std::clamp(o.vx, -cfg.max_speed, cfg.max_speed);
    o.vy = std::clamp(o.vy, -cfg.max_speed, cfg.max_speed);
    o.x += o.vx;
    o.y += o.vy;
    const double mx0 = 0.5 * o.w + 1.0, mx1 = cfg.frame_width - 0.5 * o.w - 1.0;
    const double my0 = 0.5 * o.h + 1.0, my1 = cfg.frame_height - 0.5 * o.h - 1.0;
    if (o.x < mx0) { o.x = 2 * mx0 - o.x; o.vx = -o.vx; }
    if (o.x > mx1) { o.x = 2 * mx1 - o.x; o.vx = -o.vx; }
    if (o.y < my0) { o.y = 2 * my0 - o.y; o.vy = -o.vy; }
    if (o.y > my1) { o.y = 2 * my1 - o.y; o.vy = -o.vy; }
    o.x = std::clamp(o.x, mx0, mx1);
    o.y = std::clamp(o.y, my0, my1);
}

} // namespace

Sequence generate_sequence(const SceneConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Rng rng(Rng::mix(seed, 0x7363656e)); // 'scen'
    const TexParams tex = make_texture(rng, cfg.texture_contrast);

    MovingObject target{};
    target.w = cfg.target_w;
    target.h = cfg.target_h;
    target.color = cfg.target_color;
    target.x = rng.uniform(0.5 * target.w + 2.0, cfg.frame_width - 0.5 * target.w - 2.0);
    target.y = rng.uniform(0.5 * target.h + 2.0, cfg.frame_height - 0.5 * target.h - 2.0);
    target.vx = rng.uniform(-cfg.max_speed, cfg.max_speed);
    target.vy = rng.uniform(-cfg.max_speed, cfg.max_speed);

    std::vector<MovingObject> distractors;
    for (int d = 0; d < cfg.distractors; ++d) {
        MovingObject o{};
        o.w = cfg.target_w * rng.uniform(0.7, 1.3);
        o.h = cfg.target_h * rng.uniform(0.7, 1.3);
        // Distractor palette stays away from the target's warm tone.
        o.color = {rng.uniform(0.1, 0.45), rng.uniform(0.35, 0.8), rng.uniform(0.4, 0.9)};
        o.x = rng.uniform(0.5 * o.w + 2.0, cfg.frame_width - 0.5 * o.w - 2.0);
        o.y = rng.uniform(0.5 * o.h + 2.0, cfg.frame_height - 0.5 * o.h - 2.0);
        o.vx = rng.uniform(-cfg.max_speed, cfg.max_speed);
        o.vy = rng.uniform(-cfg.max_speed, cfg.max_speed);
        distractors.push_back(o);
    }

    Sequence seq;
    seq.seed = seed;
    seq.tag = DomainTag::Source;
    seq.frames.reserve(static_cast<std::size_t>(cfg.length));
    seq.annotations.reserve(static_cast<std::size_t>(cfg.length));

    for (int t = 0; t < cfg.length; ++t) {
        Frame f;
        f.width = cfg.frame_width;
        f.height = cfg.frame_height;
        f.pixels.resize(static_cast<std::size_t>(3) * f.width * f.height);
        for (int y = 0; y < f.height; ++y)
            for (int x = 0; x < f.width; ++x)
                for (int c = 0; c < 3; ++c) f.at(x, y, c) = texture_value(tex, c, x + 0.5, y + 0.5);

        for (const auto& o : distractors) draw_object(f, o);
        draw_object(f, target); // target rendered last, never occluded

        seq.frames.push_back(std::move(f));
        seq.annotations.push_back(BBox{target.x, target.y, target.w, target.h});

        for (auto& o : distractors) step_object(o, rng, cfg);
        step_object(target, rng, cfg);
    }
    return seq;
}

CorruptedSequence corrupt_sequence(const Sequence& src, const WeatherParams& params) {
    if (!src.labeled()) throw ValidationError("corrupt_sequence: source sequence must be labeled");
    CorruptedSequence out;
    out.sequence.seed = src.seed;
    out.sequence.tag = domain_from_weather(params.kind);
    out.sequence.frames.reserve(src.frames.size());
    for (std::size_t i = 0; i < src.frames.size(); ++i) {
        WeatherParams p = params;
        // Per-frame seed keeps streak patterns varied but reproducible.
        p.seed = Rng::mix(params.seed, i);
        out.sequence.frames.push_back(apply_weather(src.frames[i], p));
    }
    out.boxes = src.annotations;
    return out;
}

// ---------------------------------------------------------------------------
// Cropping
// ---------------------------------------------------------------------------

BBox Crop::to_crop(const BBox& frame_box) const {
    const double s = scale();
    return BBox{(frame_box.cx - (src_cx - 0.5 * src_side)) * s,
                (frame_box.cy - (src_cy - 0.5 * src_side)) * s,
                frame_box.w * s, frame_box.h * s};
}

BBox Crop::to_frame(const BBox& crop_box) const {
    const double s = scale();
    return BBox{crop_box.cx / s + (src_cx - 0.5 * src_side),
                crop_box.cy / s + (src_cy - 0.5 * src_side),
                crop_box.w / s, crop_box.h / s};
}

Crop crop_region(const Frame& frame, double cx, double cy, double side, int out_size) {
    if (!(side > 0.0)) throw ValidationError("crop: side must be positive");
    if (out_size < 1) throw ValidationError("crop: output size must be positive");

    double mean[3] = {0.0, 0.0, 0.0};
    const int npix = frame.width * frame.height;
    for (int i = 0; i < npix; ++i)
        for (int c = 0; c < 3; ++c) mean[c] += frame.pixels[3 * static_cast<std::size_t>(i) + c];
    for (double& m : mean) m /= npix;

    Crop crop;
    crop.src_cx = cx;
    crop.src_cy = cy;
    crop.src_side = side;
    crop.out_size = out_size;
    crop.image.width = out_size;
    crop.image.height = out_size;
    crop.image.domain_tag = frame.domain_tag;
    crop.image.pixels.resize(static_cast<std::size_t>(3) * out_size * out_size);

    const double x0 = cx - 0.5 * side;
    const double y0 = cy - 0.5 * side;
    const double step = side / out_size;
    for (int oy = 0; oy < out_size; ++oy) {
        for (int ox = 0; ox < out_size; ++ox) {
            const double sx = x0 + (ox + 0.5) * step;
            const double sy = y0 + (oy + 0.5) * step;
            for (int c = 0; c < 3; ++c) {
                double v;
                if (sx < 0.0 || sx >= frame.width || sy < 0.0 || sy >= frame.height) {
                    v = mean[c];
                } else {
                    // Bilinear over pixel centers, edges clamped.
                    const double fx = sx - 0.5, fy = sy - 0.5;
                    const int ix = static_cast<int>(std::floor(fx));
                    const int iy = static_cast<int>(std::floor(fy));
                    const double ax = fx - ix, ay = fy - iy;
                    auto px = [&](int x, int y) {
                        x = std::clamp(x, 0, frame.width - 1);
                        y = std::clamp(y, 0, frame.height - 1);
                        return frame.at(x, y, c);
                    };
                    v = (1 - ax) * (1 - ay) * px(ix, iy) + ax * (1 - ay) * px(ix + 1, iy) +
                        (1 - ax) * ay * px(ix, iy + 1) + ax * ay * px(ix + 1, iy + 1);
                }
                crop.image.at(ox, oy, c) = v;
            }
        }
    }
    return crop;
}

namespace {

void require_box_touches_frame(const Frame& frame, const BBox& box, const char* op) {
    if (!(box.w > 0.0 && box.h > 0.0)) throw ValidationError(std::string(op) + ": box extents must be positive");
    const bool outside = box.x2() <= 0.0 || box.x1() >= frame.width || box.y2() <= 0.0 || box.y1() >= frame.height;
    if (outside) throw ValidationError(std::string(op) + ": box fully outside frame");
}

} // namespace

Crop crop_template(const Frame& frame, const BBox& box, int out_size) {
    require_box_touches_frame(frame, box, "crop_template");
    const double side = 2.0 * std::sqrt(box.w * box.h);
    return crop_region(frame, box.cx, box.cy, side, out_size);
}

Crop crop_search(const Frame& frame, const BBox& box, int out_size) {
    require_box_touches_frame(frame, box, "crop_search");
    const double side = 4.0 * std::sqrt(box.w * box.h);
    return crop_region(frame, box.cx, box.cy, side, out_size);
}

// ---------------------------------------------------------------------------
// Label construction
// ---------------------------------------------------------------------------

LabelMaps make_labels(const BBox& label_box, const HeadConfig& cfg) {
    if (cfg.grid < 1 || cfg.search_size % cfg.grid != 0)
        throw ValidationError("make_labels: grid must divide search size");
    const int g = cfg.grid;
    const double stride = cfg.stride();

    LabelMaps maps;
    maps.grid = g;
    maps.cls.assign(static_cast<std::size_t>(g) * g, 0.0);
    maps.off_x.assign(static_cast<std::size_t>(g) * g, 0.0);
    maps.off_y.assign(static_cast<std::size_t>(g) * g, 0.0);
    maps.size_w.assign(static_cast<std::size_t>(g) * g, 0.0);
    maps.size_h.assign(static_cast<std::size_t>(g) * g, 0.0);

    const double cx_cells = label_box.cx / stride;
    const double cy_cells = label_box.cy / stride;
    maps.peak_col = std::clamp(static_cast<int>(std::floor(cx_cells)), 0, g - 1);
    maps.peak_row = std::clamp(static_cast<int>(std::floor(cy_cells)), 0, g - 1);

    const double sigma =
        std::max(cfg.min_sigma, cfg.sigma_scale * std::sqrt(label_box.w * label_box.h) / stride);
    for (int r = 0; r < g; ++r) {
        for (int c = 0; c < g; ++c) {
            const double dr = r - maps.peak_row;
            const double dc = c - maps.peak_col;
            maps.cls[static_cast<std::size_t>(r) * g + c] = std::exp(-(dr * dr + dc * dc) / (2.0 * sigma * sigma));
        }
    }
    const int p = maps.peak_index();
    maps.cls[static_cast<std::size_t>(p)] = 1.0;
    maps.off_x[static_cast<std::size_t>(p)] = cx_cells - maps.peak_col;
    maps.off_y[static_cast<std::size_t>(p)] = cy_cells - maps.peak_row;
    maps.size_w[static_cast<std::size_t>(p)] = label_box.w / cfg.search_size;
    maps.size_h[static_cast<std::size_t>(p)] = label_box.h / cfg.search_size;
    return maps;
}

// ---------------------------------------------------------------------------
// Batch sampling
// ---------------------------------------------------------------------------

BatchSampler::BatchSampler(std::vector<DomainPool> pools, std::vector<double> ratios,
                           int batch_size, std::uint64_t seed, SamplerConfig cfg)
    : pools_(std::move(pools)), batch_size_(batch_size), cfg_(cfg), rng_(Rng::mix(seed, 0x62617463)) {
    if (pools_.size() != ratios.size()) throw ConfigError("sampler: one ratio per pool required");
    if (pools_.empty()) throw ConfigError("sampler: no pools");
    if (batch_size_ < 1) throw ConfigError("sampler: batch size must be positive");
    double total = 0.0;
    for (std::size_t i = 0; i < ratios.size(); ++i) {
        if (ratios[i] < 0.0) throw ConfigError("sampler: negative ratio");
        if (ratios[i] > 0.0) {
            bool empty = pools_[i].sequences.empty();
            for (const auto& s : pools_[i].sequences)
                if (s.frames.empty()) empty = true;
            if (empty) throw ConfigError("sampler: empty pool with nonzero ratio");
            if (pools_[i].boxes.size() != pools_[i].sequences.size())
                throw ConfigError("sampler: boxes missing for pool");
        }
        total += ratios[i];
        cumulative_.push_back(total);
    }
    if (!(total > 0.0)) throw ConfigError("sampler: all ratios zero");
}

DomainTag BatchSampler::draw_tag() {
    const double u = rng_.uniform(0.0, cumulative_.back());
    const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    std::size_t idx = static_cast<std::size_t>(std::distance(cumulative_.begin(), it));
    if (idx >= pools_.size()) idx = pools_.size() - 1;
    return pools_[idx].tag;
}

SamplePair BatchSampler::draw_from(const DomainPool& pool) {
    const std::size_t si = rng_.uniform_index(pool.sequences.size());
    const Sequence& seq = pool.sequences[si];
    const std::vector<BBox>& boxes = pool.boxes[si];
    const int len = static_cast<int>(seq.frames.size());

    const int ti = static_cast<int>(rng_.uniform_index(static_cast<std::uint64_t>(len)));
    const int gap = static_cast<int>(rng_.uniform_index(static_cast<std::uint64_t>(2 * cfg_.max_frame_gap + 1))) -
                    cfg_.max_frame_gap;
    const int fi = std::clamp(ti + gap, 0, len - 1);

    const BBox& tbox = boxes[static_cast<std::size_t>(ti)];
    const BBox& sbox = boxes[static_cast<std::size_t>(fi)];

    Crop tmpl = crop_template(seq.frames[static_cast<std::size_t>(ti)], tbox, cfg_.template_size);

    // Jittered search center/scale so the target is not always centered.
    const double base_side = 4.0 * std::sqrt(sbox.w * sbox.h);
    const double jx = rng_.uniform(-cfg_.center_jitter, cfg_.center_jitter) * base_side;
    const double jy = rng_.uniform(-cfg_.center_jitter, cfg_.center_jitter) * base_side;
    const double js = 1.0 + rng_.uniform(-cfg_.scale_jitter, cfg_.scale_jitter);
    Crop search = crop_region(seq.frames[static_cast<std::size_t>(fi)], sbox.cx + jx, sbox.cy + jy,
                              base_side * js, cfg_.search_size);

    SamplePair pair;
    pair.template_crop = std::move(tmpl.image);
    pair.search_crop = search.image;
    pair.domain = pool.tag;
    if (pool.tag == DomainTag::Source) pair.label = search.to_crop(sbox);
    return pair;
}

BatchSampler::Batch BatchSampler::next() {
    Batch batch;
    for (int i = 0; i < batch_size_; ++i) {
        const double u = rng_.uniform(0.0, cumulative_.back());
        const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
        std::size_t idx = static_cast<std::size_t>(std::distance(cumulative_.begin(), it));
        if (idx >= pools_.size()) idx = pools_.size() - 1;
        SamplePair pair = draw_from(pools_[idx]);
        if (pair.domain == DomainTag::Source)
            batch.source.push_back(std::move(pair));
        else
            batch.target.push_back(std::move(pair));
    }
    return batch;
}

} // namespace umda
