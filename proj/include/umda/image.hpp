// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 umda contributors

#pragma once

#include <string>
#include <vector>

#include "umda/errors.hpp"

namespace umda {

enum class DomainTag { Source, Fog, Dark, Rain };

const char* domain_name(DomainTag tag);
DomainTag domain_from_name(const std::string& name);

/// Axis-aligned box in pixel units, center format.
struct BBox {
    double cx = 0.0;
    double cy = 0.0;
    double w = 0.0;
    double h = 0.0;

    double x1() const { return cx - 0.5 * w; }
    double y1() const { return cy - 0.5 * h; }
    double x2() const { return cx + 0.5 * w; }
    double y2() const { return cy + 0.5 * h; }
    double area() const { return w * h; }
};

double iou(const BBox& a, const BBox& b);
double center_distance(const BBox& a, const BBox& b);

/// RGB raster with float pixels in [0,1], interleaved row-major.
struct Frame {
    int width = 0;
    int height = 0;
    std::vector<double> pixels; // 3 * width * height
    DomainTag domain_tag = DomainTag::Source;

    static Frame filled(int width, int height, double r, double g, double b);

    double& at(int x, int y, int c) { return pixels[3 * (static_cast<std::size_t>(y) * width + x) + c]; }
    double at(int x, int y, int c) const { return pixels[3 * (static_cast<std::size_t>(y) * width + x) + c]; }
    bool in_bounds(int x, int y) const { return x >= 0 && x < width && y >= 0 && y < height; }
};

/// Throws ValidationError unless every pixel lies in [0,1].
void validate_pixel_range(const Frame& f, const char* where);

/// Binary PPM (P6), 8-bit, maxval 255. Values are quantized by rounding.
void write_ppm(const Frame& f, const std::string& path);
Frame read_ppm(const std::string& path);

} // namespace umda
