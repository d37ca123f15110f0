// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 umda contributors

#include "umda/weather.hpp"

#include <algorithm>
#include <cmath>

#include "umda/rng.hpp"

namespace umda {

const char* weather_name(WeatherKind kind) {
    switch (kind) {
        case WeatherKind::Fog: return "fog";
        case WeatherKind::Dark: return "dark";
        case WeatherKind::Rain: return "rain";
    }
    return "unknown";
}

WeatherKind weather_from_domain(DomainTag tag) {
    switch (tag) {
        case DomainTag::Fog: return WeatherKind::Fog;
        case DomainTag::Dark: return WeatherKind::Dark;
        case DomainTag::Rain: return WeatherKind::Rain;
        case DomainTag::Source: break;
    }
    throw ValidationError("source domain has no weather corruption");
}

DomainTag domain_from_weather(WeatherKind kind) {
    switch (kind) {
        case WeatherKind::Fog: return DomainTag::Fog;
        case WeatherKind::Dark: return DomainTag::Dark;
        case WeatherKind::Rain: return DomainTag::Rain;
    }
    return DomainTag::Source;
}

void WeatherParams::validate() const {
    if (!(fog_beta >= 0.0)) throw ValidationError("fog_beta must be >= 0");
    for (double a : airlight)
        if (!(a >= 0.0 && a <= 1.0)) throw ValidationError("airlight must lie in [0,1]");
    if (!(gamma >= 1.0)) throw ValidationError("gamma must be >= 1");
    if (!(brightness > 0.0 && brightness <= 1.0)) throw ValidationError("brightness must lie in (0,1]");
    if (!(rain_density >= 0.0)) throw ValidationError("rain_density must be >= 0");
    if (!(rain_alpha >= 0.0 && rain_alpha <= 1.0)) throw ValidationError("rain_alpha must lie in [0,1]");
}

WeatherParams WeatherParams::defaults_for(WeatherKind kind, std::uint64_t seed) {
    WeatherParams p;
    p.kind = kind;
    p.seed = seed;
    return p;
}

Frame apply_fog(const Frame& frame, const WeatherParams& params) {
    params.validate();
    validate_pixel_range(frame, "apply_fog");
    Frame out = frame;
    out.domain_tag = DomainTag::Fog;
    const int h = frame.height;
    for (int y = 0; y < h; ++y) {
        const double depth = (h > 1) ? static_cast<double>(h - 1 - y) / (h - 1) : 0.0;
        const double t = std::exp(-params.fog_beta * depth);
        for (int x = 0; x < frame.width; ++x) {
            for (int c = 0; c < 3; ++c) {
                const double v = frame.at(x, y, c) * t + params.airlight[static_cast<std::size_t>(c)] * (1.0 - t);
                out.at(x, y, c) = std::clamp(v, 0.0, 1.0);
            }
        }
    }
    return out;
}

Frame apply_dark(const Frame& frame, const WeatherParams& params) {
    params.validate();
    validate_pixel_range(frame, "apply_dark");
    Frame out = frame;
    out.domain_tag = DomainTag::Dark;
    for (auto& v : out.pixels) v = std::clamp(params.brightness * std::pow(v, params.gamma), 0.0, 1.0);
    return out;
}

Frame apply_rain(const Frame& frame, const WeatherParams& params) {
    params.validate();
    validate_pixel_range(frame, "apply_rain");
    Frame out = frame;
    out.domain_tag = DomainTag::Rain;
    if (params.rain_alpha == 0.0 || params.rain_density == 0.0) return out;

    const int w = frame.width, h = frame.height;
    const int streaks = static_cast<int>(std::lround(params.rain_density * (static_cast<double>(w) * h) / 1000.0));
    Rng rng(Rng::mix(params.seed, 0x7261696e)); // 'rain'
    const double angle_rad = params.rain_angle * 3.14159265358979323846 / 180.0;
    const double dirx = std::sin(angle_rad);
    const double diry = std::cos(angle_rad);
    const double streak_gray = 0.85;

    for (int s = 0; s < streaks; ++s) {
        const double sx = rng.uniform(0.0, static_cast<double>(w));
        const double sy = rng.uniform(0.0, static_cast<double>(h));
        const double len = rng.uniform(0.35, 1.0) * 0.15 * h + 2.0;
        const int steps = std::max(2, static_cast<int>(std::lround(len)));
        for (int k = 0; k < steps; ++k) {
            const int x = static_cast<int>(std::lround(sx + dirx * k));
            const int y = static_cast<int>(std::lround(sy + diry * k));
            if (!out.in_bounds(x, y)) break;
            for (int c = 0; c < 3; ++c) {
                const double v = (1.0 - params.rain_alpha) * out.at(x, y, c) + params.rain_alpha * streak_gray;
                out.at(x, y, c) = std::clamp(v, 0.0, 1.0);
            }
        }
    }
    return out;
}

Frame apply_weather(const Frame& frame, const WeatherParams& params) {
    switch (params.kind) {
        case WeatherKind::Fog: return apply_fog(frame, params);
        case WeatherKind::Dark: return apply_dark(frame, params);
        case WeatherKind::Rain: return apply_rain(frame, params);
    }
    throw ValidationError("unknown weather kind");
}

double ssim(const Frame& a, const Frame& b) {
    if (a.width != b.width || a.height != b.height)
        throw DimensionError("ssim: frame dimensions differ");
    validate_pixel_range(a, "ssim");
    validate_pixel_range(b, "ssim");

    constexpr int win = 8;
    constexpr double c1 = 0.01 * 0.01;
    constexpr double c2 = 0.03 * 0.03;
    if (a.width < win || a.height < win) throw DimensionError("ssim: frame smaller than the 8x8 window");

    double total = 0.0;
    long count = 0;
    for (int c = 0; c < 3; ++c) {
        for (int y0 = 0; y0 + win <= a.height; ++y0) {
            for (int x0 = 0; x0 + win <= a.width; ++x0) {
                double ma = 0.0, mb = 0.0;
                for (int y = y0; y < y0 + win; ++y)
                    for (int x = x0; x < x0 + win; ++x) {
                        ma += a.at(x, y, c);
                        mb += b.at(x, y, c);
                    }
                const double n = win * win;
                ma /= n;
                mb /= n;
                double va = 0.0, vb = 0.0, cov = 0.0;
                for (int y = y0; y < y0 + win; ++y)
                    for (int x = x0; x < x0 + win; ++x) {
                        const double da = a.at(x, y, c) - ma;
                        const double db = b.at(x, y, c) - mb;
                        va += da * da;
                        vb += db * db;
                        cov += da * db;
                    }
                va /= n;
                vb /= n;
                cov /= n;
                const double num = (2.0 * ma * mb + c1) * (2.0 * cov + c2);
                const double den = (ma * ma + mb * mb + c1) * (va + vb + c2);
                total += num / den;
                ++count;
            }
        }
    }
    return total / static_cast<double>(count);
}

} // namespace umda
