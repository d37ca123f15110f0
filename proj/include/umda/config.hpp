// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 umda contributors

#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "umda/errors.hpp"

namespace umda {

/// Flat key=value run configuration. Text format: one `key = value` per line,
/// '#' starts a comment. Keys are namespaced with dots (train.alpha, ...).
class Config {
public:
    Config() = default;

    static Config from_file(const std::string& path);
    static Config from_text(const std::string& text);

    void set(const std::string& key, const std::string& value);
    bool has(const std::string& key) const { return kv_.count(key) != 0; }

    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    int get_int(const std::string& key, int fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;

    /// Overlays every entry of `other` on top of this config.
    void merge(const Config& other);

    /// Sorted-key canonical rendering; basis of the fingerprint.
    std::string canonical_text() const;

    /// FNV-1a of the canonical text.
    std::uint64_t fingerprint() const;

    const std::map<std::string, std::string>& entries() const { return kv_; }

private:
    std::map<std::string, std::string> kv_;
};

std::string fingerprint_hex(std::uint64_t fp);

} // namespace umda
