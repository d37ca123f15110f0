// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 umda contributors

#pragma once

#include <array>
#include <cstdint>

#include "umda/image.hpp"

namespace umda {

enum class WeatherKind { Fog, Dark, Rain };

const char* weather_name(WeatherKind kind);
WeatherKind weather_from_domain(DomainTag tag);
DomainTag domain_from_weather(WeatherKind kind);

/// Parameters of the deterministic scenario corruptions. Identical
/// (params, seed, frame) always produce an identical output frame.
struct WeatherParams {
    WeatherKind kind = WeatherKind::Fog;

    // Fog: I' = I * t + A * (1 - t), t = exp(-fog_beta * d), where the depth
    // proxy d rises linearly from 0 at the bottom row to 1 at the top row.
    double fog_beta = 2.0;
    std::array<double, 3> airlight = {0.9, 0.92, 0.95};

    // Dark: I' = brightness * I^gamma.
    double gamma = 2.5;
    double brightness = 0.6;

    // Rain: seeded streak overlay, alpha-blended.
    double rain_density = 5.0; // streaks per kilopixel
    double rain_angle = 15.0;  // degrees from vertical
    double rain_alpha = 0.5;

    std::uint64_t seed = 0;

    void validate() const;

    static WeatherParams defaults_for(WeatherKind kind, std::uint64_t seed = 0);
};

Frame apply_fog(const Frame& frame, const WeatherParams& params);
Frame apply_dark(const Frame& frame, const WeatherParams& params);
Frame apply_rain(const Frame& frame, const WeatherParams& params);

/// Dispatches on params.kind.
Frame apply_weather(const Frame& frame, const WeatherParams& params);

/// Mean SSIM over sliding 8x8 windows and the three channels, with the
/// stabilizers C1 = 0.01^2 and C2 = 0.03^2 for the [0,1] value range.
double ssim(const Frame& a, const Frame& b);

} // namespace umda
