// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 umda contributors

#include "umda/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace umda {

const char* domain_name(DomainTag tag) {
    switch (tag) {
        case DomainTag::Source: return "source";
        case DomainTag::Fog: return "fog";
        case DomainTag::Dark: return "dark";
        case DomainTag::Rain: return "rain";
    }
    return "unknown";
}

DomainTag domain_from_name(const std::string& name) {
    if (name == "source") return DomainTag::Source;
    if (name == "fog") return DomainTag::Fog;
    if (name == "dark") return DomainTag::Dark;
    if (name == "rain") return DomainTag::Rain;
    throw ValidationError("unknown domain name: " + name);
}

double iou(const BBox& a, const BBox& b) {
    const double ix1 = std::max(a.x1(), b.x1());
    const double iy1 = std::max(a.y1(), b.y1());
    const double ix2 = std::min(a.x2(), b.x2());
    const double iy2 = std::min(a.y2(), b.y2());
    const double iw = std::max(0.0, ix2 - ix1);
    const double ih = std::max(0.0, iy2 - iy1);
    const double inter = iw * ih;
    const double uni = a.area() + b.area() - inter;
    if (uni <= 0.0) return 0.0;
    return inter / uni;
}

double center_distance(const BBox& a, const BBox& b) {
    const double dx = a.cx - b.cx;
    const double dy = a.cy - b.cy;
    return std::sqrt(dx * dx + dy * dy);
}

Frame Frame::filled(int width, int height, double r, double g, double b) {
    Frame f;
    f.width = width;
    f.height = height;
    f.pixels.resize(static_cast<std::size_t>(3) * width * height);
    for (int i = 0; i < width * height; ++i) {
        f.pixels[3 * static_cast<std::size_t>(i) + 0] = r;
        f.pixels[3 * static_cast<std::size_t>(i) + 1] = g;
        f.pixels[3 * static_cast<std::size_t>(i) + 2] = b;
    }
    return f;
}

void validate_pixel_range(const Frame& f, const char* where) {
    if (f.width <= 0 || f.height <= 0 ||
        f.pixels.size() != static_cast<std::size_t>(3) * f.width * f.height) {
        throw ValidationError(std::string(where) + ": malformed frame");
    }
    for (double v : f.pixels) {
        if (!(v >= 0.0 && v <= 1.0)) throw ValidationError(std::string(where) + ": pixel outside [0,1]");
    }
}

void write_ppm(const Frame& f, const std::string& path) {
    validate_pixel_range(f, "write_ppm");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << "P6\n" << f.width << " " << f.height << "\n255\n";
    std::vector<unsigned char> bytes(f.pixels.size());
    for (std::size_t i = 0; i < f.pixels.size(); ++i) {
        bytes[i] = static_cast<unsigned char>(std::lround(f.pixels[i] * 255.0));
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("short write: " + path);
}

namespace {

int read_pnm_token(std::istream& in) {
    // Skips whitespace and '#' comments, then reads a non-negative integer.
    int c = in.get();
    while (c != EOF && (std::isspace(c) || c == '#')) {
        if (c == '#') {
            while (c != EOF && c != '\n') c = in.get();
        }
        c = in.get();
    }
    int value = 0;
    bool any = false;
    while (c != EOF && std::isdigit(c)) {
        value = value * 10 + (c - '0');
        any = true;
        c = in.get();
    }
    if (!any) throw IoError("malformed PPM header");
    return value;
}

} // namespace

Frame read_ppm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);
    char m0 = 0, m1 = 0;
    in.get(m0);
    in.get(m1);
    if (m0 != 'P' || m1 != '6') throw IoError("not a binary PPM (P6): " + path);
    const int w = read_pnm_token(in);
    const int h = read_pnm_token(in);
    const int maxval = read_pnm_token(in);
    if (w <= 0 || h <= 0 || maxval != 255) throw IoError("unsupported PPM geometry: " + path);

    Frame f;
    f.width = w;
    f.height = h;
    std::vector<unsigned char> bytes(static_cast<std::size_t>(3) * w * h);
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (in.gcount() != static_cast<std::streamsize>(bytes.size())) throw IoError("truncated PPM: " + path);
    f.pixels.resize(bytes.size());
    for (std::size_t i = 0; i < bytes.size(); ++i) f.pixels[i] = bytes[i] / 255.0;
    return f;
}

} // namespace umda
