#pragma once

#include <cmath>
#include <cstddef>
#include <string_view>

#include "mvq/error.hpp"
#include "mvq/sequence.hpp"

namespace mvq::ssl {

enum class InterpMode { nearest, linear };

inline InterpMode parse_interp_mode(std::string_view s) {
    if (s == "nearest") return InterpMode::nearest;
    if (s == "linear") return InterpMode::linear;
    throw ConfigError("unknown interpolation mode '" + std::string(s) + "'");
}

// Resamples teacher frames to `target_rate`. Output frame j sits at time
// j / target_rate, i.e. at fractional source position p = j * r_src / r_dst.
// Nearest takes the closest source frame (half rounds up); linear blends the
// two bracketing frames. Positions past the last frame clamp to it.
inline FeatureSequence interpolate_targets(const FeatureSequence& src, double target_rate,
                                           InterpMode mode = InterpMode::nearest) {
    const double r_src = src.frame_rate_hz;
    if (!(r_src > 0.0) || !(target_rate > 0.0)) throw InvalidInput("interpolate_targets: frame rates must be positive");
    if (r_src == target_rate) return src;
    const std::size_t t_src = src.length();
    if (t_src == 0) throw InvalidInput("interpolate_targets: empty input with differing frame rates");
    if (mode == InterpMode::linear && t_src < 2)
        throw InvalidInput("interpolate_targets: linear mode needs at least two frames");

    const double ratio = r_src / target_rate;
    const auto t_dst = static_cast<std::size_t>(std::llround(static_cast<double>(t_src) * target_rate / r_src));
    FeatureSequence out(t_dst, src.dim(), target_rate, src.domain);
    const std::size_t last = t_src - 1;
    for (std::size_t j = 0; j < t_dst; ++j) {
        const double p = static_cast<double>(j) * ratio;
        auto dst = out.frame(j);
        if (mode == InterpMode::nearest) {
            const auto i = std::min(last, static_cast<std::size_t>(std::floor(p + 0.5)));
            const auto s = src.frame(i);
            std::copy(s.begin(), s.end(), dst.begin());
            continue;
        }
        const auto i0 = static_cast<std::size_t>(std::floor(p));
        if (i0 >= last) {
            const auto s = src.frame(last);
            std::copy(s.begin(), s.end(), dst.begin());
            continue;
        }
        const double frac = p - static_cast<double>(i0);
        const auto a = src.frame(i0);
        const auto b = src.frame(i0 + 1);
        for (std::size_t k = 0; k < dst.size(); ++k) dst[k] = (1.0 - frac) * a[k] + frac * b[k];
    }
    return out;
}

} // namespace mvq::ssl
