// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 umda contributors

#pragma once

#include <string>
#include <utility>
#include <vector>

#include "umda/params.hpp"

namespace umda {

/// Versioned container of named parameter groups ("model", "teacher",
/// "adapter/<domain>", ...). Writes are atomic (temp file + rename).
struct Checkpoint {
    static constexpr std::uint32_t kVersion = 1;

    std::uint64_t config_fingerprint = 0;
    std::string config_text;
    std::vector<std::pair<std::string, ParameterSet>> groups;

    ParameterSet* find(const std::string& name);
    const ParameterSet* find(const std::string& name) const;
    void put(const std::string& name, ParameterSet p);

    void save(const std::string& path) const;
    static Checkpoint load(const std::string& path);
};

} // namespace umda
