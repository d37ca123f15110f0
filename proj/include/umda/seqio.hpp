// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 umda contributors

#pragma once

#include <string>

#include "umda/datagen.hpp"

namespace umda {

/// Writes frame_0000.ppm... plus groundtruth.txt (one line per frame:
/// index cx cy w h) and meta.txt (domain, seed, frame count).
void write_sequence_dir(const Sequence& seq, const std::string& dir);

/// Reads a directory produced by write_sequence_dir (annotations optional).
Sequence read_sequence_dir(const std::string& dir);

/// Corrupts every frame of a sequence directory and writes the result plus
/// manifest.txt with one line per frame: name, kind, parameters, per-frame
/// seed and the SSIM against the clean frame.
void synthesize_sequence_dir(const std::string& src_dir, const std::string& out_dir,
                             const WeatherParams& params);

} // namespace umda
