// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 umda contributors

#include "umda/model.hpp"

#include <cmath>

#include "umda/rng.hpp"

namespace umda {

void EncoderConfig::validate() const {
    if (patch_size < 1 || embed_dim < 1 || heads < 1) throw ConfigError("encoder: bad dimensions");
    if (depth < 0) throw ConfigError("encoder: negative depth");
    if (embed_dim % heads != 0) throw ConfigError("encoder: embed_dim must be divisible by heads");
    if (template_size % patch_size != 0 || search_size % patch_size != 0)
        throw ConfigError("encoder: crop sizes must be multiples of the patch size");
    if (mlp_ratio < 1 || head_channels < 1 || bank_tokens < 1) throw ConfigError("encoder: bad widths");
}

namespace {

Tensor gauss(std::vector<int> shape, double std, Rng& rng) {
    std::vector<double> data(static_cast<std::size_t>(shape_size(shape)));
    for (auto& v : data) v = rng.normal(0.0, std);
    return Tensor(std::move(shape), std::move(data));
}

Tensor he_conv(int cout, int cin, int k, Rng& rng) {
    const double std = std::sqrt(2.0 / (cin * k * k));
    return gauss({cout, cin, k, k}, std, rng);
}

} // namespace

ParameterSet init_model_params(const EncoderConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Rng rng(Rng::mix(seed, 0x6d6f64656c)); // 'model'
    const int c = cfg.embed_dim;
    const int pd = cfg.patch_size * cfg.patch_size * 3;
    const int hc = cfg.head_channels;

    ParameterSet p;
    p.insert("patch.w", gauss({pd, c}, cfg.init_std, rng));
    p.insert("patch.b", Tensor({c}, 0.0));
    p.insert("pos.template", gauss({cfg.template_tokens(), c}, cfg.init_std, rng));
    p.insert("pos.search", gauss({cfg.search_tokens(), c}, cfg.init_std, rng));

    for (int i = 0; i < cfg.depth; ++i) {
        const std::string b = "blk" + std::to_string(i) + ".";
        p.insert(b + "ln1.g", Tensor({c}, 1.0));
        p.insert(b + "ln1.b", Tensor({c}, 0.0));
        for (const char* n : {"wq", "wk", "wv", "wo"}) p.insert(b + "attn." + n, gauss({c, c}, cfg.init_std, rng));
        for (const char* n : {"bq", "bk", "bv", "bo"}) p.insert(b + "attn." + n, Tensor({c}, 0.0));
        p.insert(b + "ln2.g", Tensor({c}, 1.0));
        p.insert(b + "ln2.b", Tensor({c}, 0.0));
        p.insert(b + "mlp.w1", gauss({c, cfg.mlp_ratio * c}, cfg.init_std, rng));
        p.insert(b + "mlp.b1", Tensor({cfg.mlp_ratio * c}, 0.0));
        p.insert(b + "mlp.w2", gauss({cfg.mlp_ratio * c, c}, cfg.init_std, rng));
        p.insert(b + "mlp.b2", Tensor({c}, 0.0));
    }

    for (int i = 0; i < 4; ++i) {
        const std::string h = "head.conv" + std::to_string(i) + ".";
        p.insert(h + "w", he_conv(hc, i == 0 ? c : hc, 3, rng));
        p.insert(h + "b", Tensor({hc}, 0.0));
        const std::string bn = "head.bn" + std::to_string(i) + ".";
        p.insert(bn + "g", Tensor({hc}, 1.0));
        p.insert(bn + "b", Tensor({hc}, 0.0));
        p.insert(bn + "rm", Tensor({hc}, 0.0), /*buffer=*/true);
        p.insert(bn + "rv", Tensor({hc}, 1.0), /*buffer=*/true);
    }
    p.insert("head.score.w", he_conv(1, hc, 1, rng));
    p.insert("head.score.b", Tensor({1}, -2.1972245773362196)); // sigmoid -> 0.1 prior
    p.insert("head.off.w", he_conv(2, hc, 1, rng));
    p.insert("head.off.b", Tensor({2}, 0.0));
    p.insert("head.size.w", he_conv(2, hc, 1, rng));
    p.insert("head.size.b", Tensor({2}, -1.1));
    return p;
}

ParameterSet init_adapter_params(const EncoderConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Rng rng(Rng::mix(seed, 0x61646170)); // 'adap'
    const int c = cfg.embed_dim;

    ParameterSet p;
    p.insert("dca.bank", gauss({cfg.bank_tokens, c}, 0.02, rng));
    p.insert("dca.kproj", gauss({c, c}, cfg.init_std, rng));
    p.insert("dca.vproj", gauss({c, c}, cfg.init_std, rng));
    p.insert("dca.q.stem.w", he_conv(c, 3, cfg.patch_size, rng));
    p.insert("dca.q.stem.b", Tensor({c}, 0.0));
    p.insert("dca.q.conv1.w", he_conv(c, c, 3, rng));
    p.insert("dca.q.conv1.b", Tensor({c}, 0.0));
    p.insert("dca.q.conv2.w", he_conv(c, c, 3, rng));
    p.insert("dca.q.conv2.b", Tensor({c}, 0.0));
    return p;
}

Tensor patch_matrix(const Frame& crop, int patch_size) {
    if (crop.width % patch_size != 0 || crop.height % patch_size != 0)
        throw DimensionError("patch_matrix: crop not divisible into patches");
    const int gx = crop.width / patch_size;
    const int gy = crop.height / patch_size;
    const int pd = patch_size * patch_size * 3;
    std::vector<double> data(static_cast<std::size_t>(gx) * gy * pd);
    std::size_t k = 0;
    for (int py = 0; py < gy; ++py) {
        for (int px = 0; px < gx; ++px) {
            for (int c = 0; c < 3; ++c) {
                for (int y = 0; y < patch_size; ++y) {
                    for (int x = 0; x < patch_size; ++x) {
                        data[k++] = crop.at(px * patch_size + x, py * patch_size + y, c);
                    }
                }
            }
        }
    }
    return Tensor({gx * gy, pd}, std::move(data));
}

namespace {

Tensor frame_chw(const Frame& f) {
    std::vector<double> data(static_cast<std::size_t>(3) * f.width * f.height);
    std::size_t k = 0;
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < f.height; ++y)
            for (int x = 0; x < f.width; ++x) data[k++] = f.at(x, y, c);
    return Tensor({1, 3, f.height, f.width}, std::move(data));
}

Tensor linear(const Tensor& x, const ParameterSet& p, const std::string& w, const std::string& b) {
    return add_rowvec(matmul(x, p.at(w)), p.at(b));
}

Tensor attention(const Tensor& x, const ParameterSet& p, const std::string& prefix,
                 const EncoderConfig& cfg) {
    const Tensor q = linear(x, p, prefix + "wq", prefix + "bq");
    const Tensor k = linear(x, p, prefix + "wk", prefix + "bk");
    const Tensor v = linear(x, p, prefix + "wv", prefix + "bv");
    const int dh = cfg.head_dim();
    std::vector<Tensor> heads;
    heads.reserve(static_cast<std::size_t>(cfg.heads));
    for (int h = 0; h < cfg.heads; ++h) {
        const Tensor qh = slice_cols(q, h * dh, (h + 1) * dh);
        const Tensor kh = slice_cols(k, h * dh, (h + 1) * dh);
        const Tensor vh = slice_cols(v, h * dh, (h + 1) * dh);
        const Tensor attn = softmax(mul_scalar(matmul(qh, transpose(kh)), 1.0 / std::sqrt(dh)), 1);
        heads.push_back(matmul(attn, vh));
    }
    return linear(cfg.heads == 1 ? heads[0] : concat_cols(heads), p, prefix + "wo", prefix + "bo");
}

Tensor mlp(const Tensor& x, const ParameterSet& p, const std::string& prefix) {
    return add_rowvec(matmul(gelu(add_rowvec(matmul(x, p.at(prefix + "w1")), p.at(prefix + "b1"))),
                             p.at(prefix + "w2")),
                      p.at(prefix + "b2"));
}

} // namespace

Tensor dca_attention(const Tensor& query, const Tensor& bank, const Tensor& key_proj,
                     const Tensor& value_proj, int head_dim) {
    const Tensor k = matmul(bank, key_proj);
    const Tensor v = matmul(bank, value_proj);
    const Tensor attn = softmax(mul_scalar(matmul(query, transpose(k)), 1.0 / std::sqrt(head_dim)), 1);
    return matmul(attn, v);
}

Tensor dca_forward(const Frame& search_crop, const ParameterSet& adapter, const EncoderConfig& cfg) {
    if (search_crop.width != cfg.search_size || search_crop.height != cfg.search_size)
        throw ConfigError("dca_forward: crop does not match configured search size");
    const int g = cfg.grid();
    const Tensor img = frame_chw(search_crop);
    Tensor x = conv2d(img, adapter.at("dca.q.stem.w"), adapter.at("dca.q.stem.b"), cfg.patch_size, 0);
    Tensor y = relu(conv2d(x, adapter.at("dca.q.conv1.w"), adapter.at("dca.q.conv1.b"), 1, 1));
    y = conv2d(y, adapter.at("dca.q.conv2.w"), adapter.at("dca.q.conv2.b"), 1, 1);
    x = relu(add(x, y)); // residual block
    // [1, C, g, g] -> Q [g*g, C]
    const Tensor q = transpose(reshape(x, {cfg.embed_dim, g * g}));
    return dca_attention(q, adapter.at("dca.bank"), adapter.at("dca.kproj"), adapter.at("dca.vproj"),
                         cfg.head_dim());
}

Tensor encode(const Frame& template_crop, const Frame& search_crop, const ParameterSet& params,
              const EncoderConfig& cfg, const Tensor* adapter_tokens) {
    if (template_crop.width != cfg.template_size || search_crop.width != cfg.search_size)
        throw ConfigError("encode: crop sizes do not match the configuration");
    const int t = cfg.template_tokens();
    const int s = cfg.search_tokens();

    Tensor t_tok = add(linear(patch_matrix(template_crop, cfg.patch_size), params, "patch.w", "patch.b"),
                       params.at("pos.template"));
    Tensor s_tok = add(linear(patch_matrix(search_crop, cfg.patch_size), params, "patch.w", "patch.b"),
                       params.at("pos.search"));

    Tensor x;
    if (adapter_tokens) {
        if (adapter_tokens->extent(1) != cfg.embed_dim)
            throw ConfigError("encode: adapter embed_dim mismatch");
        x = concat_rows({t_tok, s_tok, *adapter_tokens});
    } else {
        x = concat_rows({t_tok, s_tok});
    }

    for (int i = 0; i < cfg.depth; ++i) {
        const std::string b = "blk" + std::to_string(i) + ".";
        x = add(x, attention(layer_norm(x, params.at(b + "ln1.g"), params.at(b + "ln1.b")), params,
                             b + "attn.", cfg));
        x = add(x, mlp(layer_norm(x, params.at(b + "ln2.g"), params.at(b + "ln2.b")), params, b + "mlp."));
    }
    return adapter_tokens ? slice_rows(x, 0, t + s) : x;
}

ResponseBatch head_forward(const std::vector<Tensor>& search_tokens, ParameterSet& params,
                           const EncoderConfig& cfg, bool training) {
    if (search_tokens.empty()) throw ValidationError("head_forward: empty batch");
    const int g = cfg.grid();
    std::vector<Tensor> grids;
    grids.reserve(search_tokens.size());
    for (const auto& tok : search_tokens) {
        grids.push_back(reshape(transpose(tok), {cfg.embed_dim, g, g}));
    }
    Tensor x = stack0(grids); // [N, C, g, g]

    for (int i = 0; i < 4; ++i) {
        const std::string h = "head.conv" + std::to_string(i) + ".";
        const std::string bn = "head.bn" + std::to_string(i) + ".";
        x = conv2d(x, params.at(h + "w"), params.at(h + "b"), 1, 1);
        x = batch_norm(x, params.at(bn + "g"), params.at(bn + "b"), params.at(bn + "rm"),
                       params.at(bn + "rv"), training);
        x = relu(x);
    }

    ResponseBatch out;
    out.n = static_cast<int>(search_tokens.size());
    out.grid = g;
    out.scores = sigmoid(conv2d(x, params.at("head.score.w"), params.at("head.score.b"), 1, 0));
    out.offsets = sigmoid(conv2d(x, params.at("head.off.w"), params.at("head.off.b"), 1, 0));
    out.sizes = sigmoid(conv2d(x, params.at("head.size.w"), params.at("head.size.b"), 1, 0));
    return out;
}

ResponseBatch forward_batch(const std::vector<const SamplePair*>& batch, ParameterSet& params,
                            const ParameterSet* adapter, const EncoderConfig& cfg, bool training) {
    if (batch.empty()) throw ValidationError("forward_batch: empty batch");
    const int t = cfg.template_tokens();
    const int s = cfg.search_tokens();
    std::vector<Tensor> search_tokens;
    search_tokens.reserve(batch.size());
    for (const SamplePair* pair : batch) {
        Tensor adapter_tokens;
        const Tensor* at = nullptr;
        if (adapter) {
            adapter_tokens = dca_forward(pair->search_crop, *adapter, cfg);
            at = &adapter_tokens;
        }
        const Tensor tokens = encode(pair->template_crop, pair->search_crop, params, cfg, at);
        search_tokens.push_back(slice_rows(tokens, t, t + s));
    }
    return head_forward(search_tokens, params, cfg, training);
}

Decoded decode_box(const ResponseBatch& resp, int sample, int search_size) {
    const int g = resp.grid;
    const int hw = g * g;
    if (sample < 0 || sample >= resp.n) throw ValidationError("decode_box: sample out of range");
    const auto& scores = resp.scores.data();
    const std::size_t base = static_cast<std::size_t>(sample) * hw;

    int best = 0;
    double best_v = scores[base];
    for (int p = 1; p < hw; ++p) {
        if (scores[base + p] > best_v) {
            best_v = scores[base + p];
            best = p;
        }
    }
    const int row = best / g;
    const int col = best % g;
    const double stride = static_cast<double>(search_size) / g;

    const auto& off = resp.offsets.data();
    const auto& sz = resp.sizes.data();
    const std::size_t off_base = static_cast<std::size_t>(sample) * 2 * hw;
    const double ox = off[off_base + best];           // channel 0: x residual
    const double oy = off[off_base + hw + best];      // channel 1: y residual
    const double w = sz[off_base + best] * search_size;
    const double h = sz[off_base + hw + best] * search_size;

    Decoded d;
    d.box = BBox{(col + ox) * stride, (row + oy) * stride, w, h};
    d.score = best_v;
    d.cell = best;
    return d;
}

} // namespace umda
