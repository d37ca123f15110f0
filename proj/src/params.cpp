// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 umda contributors

#include "umda/params.hpp"

#include <cstring>

namespace umda {

void ParameterSet::insert(const std::string& name, Tensor t, bool buffer) {
    if (entries_.count(name)) throw ValidationError("duplicate parameter name: " + name);
    if (!t.defined()) throw ValidationError("undefined tensor for parameter: " + name);
    if (buffer) {
        buffers_.insert(name);
        t.set_requires_grad(false);
    } else {
        t.set_requires_grad(true);
    }
    order_.push_back(name);
    entries_.emplace(name, std::move(t));
}

Tensor& ParameterSet::at(const std::string& name) {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw ValidationError("unknown parameter: " + name);
    return it->second;
}

const Tensor& ParameterSet::at(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw ValidationError("unknown parameter: " + name);
    return it->second;
}

bool ParameterSet::is_learnable(const std::string& name) const {
    return !is_frozen(name) && !is_buffer(name);
}

void ParameterSet::set_frozen(const std::string& name, bool frozen) {
    Tensor& t = at(name);
    if (frozen) {
        frozen_.insert(name);
        t.set_requires_grad(false);
    } else {
        frozen_.erase(name);
        if (!is_buffer(name)) t.set_requires_grad(true);
    }
}

void ParameterSet::freeze_all() {
    for (const auto& n : order_) set_frozen(n, true);
}

void ParameterSet::unfreeze_all() {
    for (const auto& n : order_) set_frozen(n, false);
}

void ParameterSet::zero_grads() {
    for (const auto& n : order_) at(n).zero_grad();
}

ParameterSet ParameterSet::clone() const {
    ParameterSet out;
    for (const auto& n : order_) {
        const Tensor& t = at(n);
        out.insert(n, Tensor(t.shape(), t.data(), false), is_buffer(n));
    }
    for (const auto& n : frozen_) out.set_frozen(n, true);
    return out;
}

bool ParameterSet::same_schema(const ParameterSet& a, const ParameterSet& b) {
    if (a.order_.size() != b.order_.size()) return false;
    for (std::size_t i = 0; i < a.order_.size(); ++i) {
        if (a.order_[i] != b.order_[i]) return false;
        if (a.at(a.order_[i]).shape() != b.at(b.order_[i]).shape()) return false;
    }
    return true;
}

void ParameterSet::ema_blend_from(const ParameterSet& source, double alpha) {
    if (!same_schema(*this, source)) throw ValidationError("EMA blend: parameter schema mismatch");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ValidationError("EMA blend: alpha outside [0,1]");
    for (const auto& n : order_) {
        auto& dst = at(n).raw_data();
        const auto& src = source.at(n).data();
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = alpha * dst[i] + (1.0 - alpha) * src[i];
    }
}

std::size_t ParameterSet::total_size() const {
    std::size_t n = 0;
    for (const auto& name : order_) n += static_cast<std::size_t>(at(name).size());
    return n;
}

std::uint64_t parameter_bytes_hash(const ParameterSet& p) {
    std::uint64_t h = 1469598103934665603ULL;
    auto mix_bytes = [&h](const void* ptr, std::size_t len) {
        const unsigned char* b = static_cast<const unsigned char*>(ptr);
        for (std::size_t i = 0; i < len; ++i) {
            h ^= b[i];
            h *= 1099511628211ULL;
        }
    };
    for (const auto& name : p.names()) {
        mix_bytes(name.data(), name.size());
        const auto& d = p.at(name).data();
        mix_bytes(d.data(), d.size() * sizeof(double));
    }
    return h;
}

} // namespace umda
