// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 umda contributors

#pragma once

#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "umda/tensor.hpp"

namespace umda {

/// Named, ordered collection of learnable arrays. Entries marked frozen never
/// receive gradients or optimizer updates; entries marked as buffers (e.g.
/// normalization running statistics) are state rather than weights and never
/// carry gradients, but participate in EMA blending and serialization.
class ParameterSet {
public:
    void insert(const std::string& name, Tensor t, bool buffer = false);

    bool has(const std::string& name) const { return entries_.count(name) != 0; }
    Tensor& at(const std::string& name);
    const Tensor& at(const std::string& name) const;

    const std::vector<std::string>& names() const { return order_; }
    std::size_t count() const { return order_.size(); }

    bool is_frozen(const std::string& name) const { return frozen_.count(name) != 0; }
    bool is_buffer(const std::string& name) const { return buffers_.count(name) != 0; }
    /// Trainable right now: not frozen and not a buffer.
    bool is_learnable(const std::string& name) const;

    void set_frozen(const std::string& name, bool frozen);
    void freeze_all();
    void unfreeze_all();

    void zero_grads();

    /// Deep copy; freeze state and buffer tags carried over.
    ParameterSet clone() const;

    /// Same entry names in the same order with the same shapes.
    static bool same_schema(const ParameterSet& a, const ParameterSet& b);

    /// theta <- alpha * theta + (1 - alpha) * source, per entry (all entries,
    /// buffers included). Throws on schema mismatch.
    void ema_blend_from(const ParameterSet& source, double alpha);

    /// Total scalar count across entries.
    std::size_t total_size() const;

private:
    std::vector<std::string> order_;
    std::unordered_map<std::string, Tensor> entries_;
    std::set<std::string> frozen_;
    std::set<std::string> buffers_;
};

/// FNV-1a over every entry's raw bytes in schema order; detects any change
/// to parameter values.
std::uint64_t parameter_bytes_hash(const ParameterSet& p);

} // namespace umda
