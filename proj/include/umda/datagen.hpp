// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 umda contributors

#pragma once

#include <array>
#include <optional>
#include <vector>

#include "umda/image.hpp"
#include "umda/rng.hpp"
#include "umda/weather.hpp"

namespace umda {

/// Scene layout and motion model for one synthetic tracking sequence.
struct SceneConfig {
    int frame_width = 128;
    int frame_height = 128;
    int length = 50;
    double target_w = 18.0;
    double target_h = 14.0;
    std::array<double, 3> target_color = {0.88, 0.22, 0.18};
    int distractors = 2;
    double max_speed = 3.0;  // px per frame
    double accel = 0.8;      // velocity random-walk step
    double texture_contrast = 0.16;

    void validate() const;
};

struct Sequence {
    std::vector<Frame> frames;
    std::vector<BBox> annotations; // present iff tag == Source
    std::uint64_t seed = 0;
    DomainTag tag = DomainTag::Source;

    bool labeled() const { return !annotations.empty(); }
};

/// Deterministic synthetic sequence with tight per-frame ground truth; the
/// target stays fully inside the frame.
Sequence generate_sequence(const SceneConfig& cfg, std::uint64_t seed);

/// Corrupted copy of a source sequence. The returned sequence is unlabeled;
/// the geometry-preserving ground truth is handed back separately so callers
/// can decide whether they are allowed to see it (crop prep, eval scoring).
struct CorruptedSequence {
    Sequence sequence;          // tag = corruption domain, annotations empty
    std::vector<BBox> boxes;    // withheld ground truth
};
CorruptedSequence corrupt_sequence(const Sequence& src, const WeatherParams& params);

// ---------------------------------------------------------------------------
// Cropping
// ---------------------------------------------------------------------------

/// Square resampled region plus the transform between frame and crop
/// coordinates.
struct Crop {
    Frame image;
    double src_cx = 0.0;
    double src_cy = 0.0;
    double src_side = 0.0;
    int out_size = 0;

    double scale() const { return out_size / src_side; }
    BBox to_crop(const BBox& frame_box) const;
    BBox to_frame(const BBox& crop_box) const;
};

/// Square crop centered on the box, side factor * sqrt(w*h), out-of-frame
/// area padded with the frame's channel means, bilinearly resized.
Crop crop_region(const Frame& frame, double cx, double cy, double side, int out_size);
Crop crop_template(const Frame& frame, const BBox& box, int out_size = 32); // factor 2
Crop crop_search(const Frame& frame, const BBox& box, int out_size = 64);   // factor 4

// ---------------------------------------------------------------------------
// Label construction
// ---------------------------------------------------------------------------

struct HeadConfig {
    int grid = 8;          // H' = W'
    int search_size = 64;  // stride = search_size / grid
    double sigma_scale = 0.5;
    double min_sigma = 0.5;

    int stride() const { return search_size / grid; }
};

struct LabelMaps {
    int grid = 0;
    std::vector<double> cls;     // grid*grid, peak cell exactly 1
    std::vector<double> off_x;   // sub-cell residual in [0,1), at the peak
    std::vector<double> off_y;
    std::vector<double> size_w;  // box extents normalized by search size
    std::vector<double> size_h;
    int peak_row = 0;
    int peak_col = 0;
    int peak_index() const { return peak_row * grid + peak_col; }
};

LabelMaps make_labels(const BBox& label_box, const HeadConfig& cfg);

// ---------------------------------------------------------------------------
// Batch sampling
// ---------------------------------------------------------------------------

struct SamplePair {
    Frame template_crop;
    Frame search_crop;
    std::optional<BBox> label; // search-crop coordinates; source domain only
    DomainTag domain = DomainTag::Source;
};

/// One domain's material: sequences plus the boxes used for cropping. For
/// the source domain these are the annotations; for corrupted domains they
/// are the withheld ground truth, used during pair construction only.
struct DomainPool {
    DomainTag tag = DomainTag::Source;
    std::vector<Sequence> sequences;
    std::vector<std::vector<BBox>> boxes;
};

struct SamplerConfig {
    int template_size = 32;
    int search_size = 64;
    int max_frame_gap = 20;
    double center_jitter = 0.2; // fraction of the search side
    double scale_jitter = 0.1;
};

/// Seeded sequential stream of mixed-domain batches. Draw counts are
/// multinomial with probabilities proportional to the ratios.
class BatchSampler {
public:
    BatchSampler(std::vector<DomainPool> pools, std::vector<double> ratios,
                 int batch_size, std::uint64_t seed, SamplerConfig cfg = {});

    struct Batch {
        std::vector<SamplePair> source;
        std::vector<SamplePair> target;
    };
    Batch next();

    /// Tag stream only (for ratio tests); advances the same RNG draws as a
    /// pool pick.
    DomainTag draw_tag();

private:
    SamplePair draw_from(const DomainPool& pool);

    std::vector<DomainPool> pools_;
    std::vector<double> cumulative_;
    int batch_size_;
    SamplerConfig cfg_;
    Rng rng_;
};

} // namespace umda
