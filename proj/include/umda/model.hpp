// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 umda contributors

#pragma once

#include <vector>

#include "umda/datagen.hpp"
#include "umda/params.hpp"
#include "umda/tensor.hpp"

namespace umda {

/// One-stream tracker geometry. Token counts are derived from the crop and
/// patch sizes; the search grid doubles as the response-map resolution.
struct EncoderConfig {
    int patch_size = 8;
    int embed_dim = 32;
    int depth = 2;
    int heads = 4;
    int template_size = 32;
    int search_size = 64;
    int mlp_ratio = 2;
    int head_channels = 16;
    int bank_tokens = 8; // L' of the adapter token bank
    double init_std = 0.02;

    int template_tokens() const {
        return (template_size / patch_size) * (template_size / patch_size);
    }
    int search_tokens() const { return grid() * grid(); }
    int grid() const { return search_size / patch_size; }
    int head_dim() const { return embed_dim / heads; }

    void validate() const;
};

/// Fresh backbone + head parameters, Gaussian-initialized from the seed.
ParameterSet init_model_params(const EncoderConfig& cfg, std::uint64_t seed);

/// Fresh per-domain adapter parameters (token bank, projections, query net).
ParameterSet init_adapter_params(const EncoderConfig& cfg, std::uint64_t seed);

/// Constant patch matrix of a crop: one row per patch, row-major over the
/// patch grid, each row the flattened (c, y, x) patch contents.
Tensor patch_matrix(const Frame& crop, int patch_size);

/// Cross-attention of Eq. "S = softmax(Q K^T / sqrt(d_k)) V" with
/// K = bank * key_proj and V = bank * value_proj; d_k is the per-head width
/// of the encoder.
Tensor dca_attention(const Tensor& query, const Tensor& bank, const Tensor& key_proj,
                     const Tensor& value_proj, int head_dim);

/// Query net (strided stem + residual conv block) followed by the bank
/// cross-attention; yields one structural token per search grid cell.
Tensor dca_forward(const Frame& search_crop, const ParameterSet& adapter, const EncoderConfig& cfg);

/// Patch-embeds both crops, adds learned position embeddings, appends the
/// adapter tokens when given, runs the pre-norm attention blocks and returns
/// the template+search token rows (adapter rows stripped).
Tensor encode(const Frame& template_crop, const Frame& search_crop, const ParameterSet& params,
              const EncoderConfig& cfg, const Tensor* adapter_tokens = nullptr);

struct ResponseBatch {
    Tensor scores;  // [N, 1, g, g], post-sigmoid
    Tensor offsets; // [N, 2, g, g], post-sigmoid sub-cell residuals
    Tensor sizes;   // [N, 2, g, g], post-sigmoid extents / search size
    int n = 0;
    int grid = 0;
};

/// Conv-BN-ReLU trunk plus the three sigmoid branches over stacked
/// per-sample search tokens. Training mode drives the BN batch statistics.
ResponseBatch head_forward(const std::vector<Tensor>& search_tokens, ParameterSet& params,
                           const EncoderConfig& cfg, bool training);

/// Full forward over a batch of sample pairs. The adapter, when present, is
/// applied to every sample's search crop.
ResponseBatch forward_batch(const std::vector<const SamplePair*>& batch, ParameterSet& params,
                            const ParameterSet* adapter, const EncoderConfig& cfg, bool training);

struct Decoded {
    BBox box;     // search-crop pixel coordinates
    double score; // peak response value
    int cell;     // flat grid index of the peak
};

/// Argmax decoding; ties resolved toward the smallest flat index.
Decoded decode_box(const ResponseBatch& resp, int sample, int search_size);

} // namespace umda
