#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mvq/error.hpp"
#include "mvq/numerics.hpp"
#include "mvq/sequence.hpp"

namespace mvq::ssl {

// Span masking: every frame starts a span with probability p_start and a span
// covers `span` frames, clipped to the sequence.
struct MaskConfig {
    double p_start = 0.065;
    std::size_t span = 10;

    void validate() const {
        if (!(p_start >= 0.0 && p_start <= 1.0)) throw ConfigError("mask: p_start must lie in [0, 1]");
        if (span < 1) throw ConfigError("mask: span must be >= 1");
    }
};

struct MaskSpec {
    std::size_t length = 0;            // T
    std::vector<std::size_t> indices;  // sorted, unique, all < T
    std::vector<std::uint8_t> flags;   // flags[t] == 1 iff t is masked
    MaskConfig policy;
    std::uint64_t seed = 0;

    bool masked(std::size_t t) const { return flags[t] != 0; }
    std::size_t count() const { return indices.size(); }

    static MaskSpec from_indices(std::size_t length, std::vector<std::size_t> idx) {
        MaskSpec m;
        m.length = length;
        m.flags.assign(length, 0);
        for (std::size_t t : idx) {
            if (t >= length) throw IndexError("mask index out of range");
            m.flags[t] = 1;
        }
        for (std::size_t t = 0; t < length; ++t)
            if (m.flags[t]) m.indices.push_back(t);
        return m;
    }
};

inline MaskSpec sample_mask(std::size_t length, const MaskConfig& cfg, std::uint64_t seed, std::uint64_t stream = 0) {
    cfg.validate();
    Rng rng(seed, 100 + stream);
    MaskSpec m;
    m.length = length;
    m.policy = cfg;
    m.seed = seed;
    m.flags.assign(length, 0);
    for (std::size_t t = 0; t < length; ++t) {
        if (!rng.bernoulli(cfg.p_start)) continue;
        const std::size_t end = std::min(length, t + cfg.span);
        for (std::size_t u = t; u < end; ++u) m.flags[u] = 1;
    }
    for (std::size_t t = 0; t < length; ++t)
        if (m.flags[t]) m.indices.push_back(t);
    return m;
}

// Copy of `xs` with every masked frame replaced by the mask embedding.
inline FeatureSequence apply_mask(const FeatureSequence& xs, const MaskSpec& mask, std::span<const double> embedding) {
    if (embedding.size() != xs.dim())
        throw ShapeError("apply_mask: mask embedding has dim " + std::to_string(embedding.size()) + ", frames have " +
                         std::to_string(xs.dim()));
    if (mask.length != xs.length()) throw ShapeError("apply_mask: mask length differs from sequence length");
    FeatureSequence out = xs;
    for (std::size_t t : mask.indices) std::copy(embedding.begin(), embedding.end(), out.frame(t).begin());
    return out;
}

} // namespace mvq::ssl
