#pragma once

// Synthetic stand-in for teacher representations: frames emitted by a hidden
// Markov chain over M states. Each state has a fixed random direction scaled
// to `separation`; frames are the state mean plus isotropic Gaussian noise.
// With p_stay near 1 states persist for ~1/(1 - p_stay) frames, which is what
// makes masked frames predictable from their context.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "mvq/error.hpp"
#include "mvq/numerics.hpp"
#include "mvq/sequence.hpp"

namespace mvq::io {

struct SynthConfig {
    std::size_t num_states = 8;
    std::size_t dim = 16;
    double p_stay = 0.95;
    double sigma = 0.03;
    double separation = 3.0;
    std::size_t length = 5000;
    double frame_rate_hz = 50.0;
    DomainTag domain = DomainTag::unspecified;
    std::uint64_t seed = 0;

    void validate() const {
        if (num_states < 2) throw ConfigError("synth: num_states must be >= 2");
        if (dim < 1) throw ConfigError("synth: dim must be >= 1");
        if (!(p_stay >= 0.0 && p_stay < 1.0)) throw ConfigError("synth: p_stay must lie in [0, 1)");
        if (!(sigma >= 0.0)) throw ConfigError("synth: sigma must be >= 0");
        if (!(separation >= 0.0)) throw ConfigError("synth: separation must be >= 0");
        if (!(frame_rate_hz > 0.0)) throw ConfigError("synth: frame rate must be positive");
    }
};

struct SynthSequence {
    FeatureSequence features;
    std::vector<std::size_t> states;  // hidden state of every frame
    Matrix means;                     // M x d
};

// State means depend only on (seed, num_states, dim), so two sequences drawn
// with different `length` but the same seed share their emission model.
inline Matrix synth_state_means(const SynthConfig& cfg) {
    Rng rng(cfg.seed, 10);
    Matrix means(cfg.num_states, cfg.dim);
    for (std::size_t s = 0; s < cfg.num_states; ++s) {
        auto row = means.row(s);
        double norm = 0.0;
        do {
            norm = 0.0;
            for (double& v : row) {
                v = rng.normal();
                norm += v * v;
            }
        } while (norm == 0.0);
        norm = std::sqrt(norm);
        for (double& v : row) v = v / norm * cfg.separation;
    }
    return means;
}

inline SynthSequence generate_synthetic_with_states(const SynthConfig& cfg) {
    cfg.validate();
    SynthSequence out;
    out.means = synth_state_means(cfg);
    out.features = FeatureSequence(cfg.length, cfg.dim, cfg.frame_rate_hz, cfg.domain);
    out.states.resize(cfg.length);

    Rng chain(cfg.seed, 11);
    Rng noise(cfg.seed, 12);
    std::size_t state = chain.index(cfg.num_states);
    for (std::size_t t = 0; t < cfg.length; ++t) {
        if (t > 0 && !chain.bernoulli(cfg.p_stay)) {
            // Uniform over the other M - 1 states.
            const std::size_t jump = 1 + chain.index(cfg.num_states - 1);
            state = (state + jump) % cfg.num_states;
        }
        out.states[t] = state;
        auto mean = out.means.row(state);
        auto frame = out.features.frame(t);
        for (std::size_t i = 0; i < cfg.dim; ++i) frame[i] = mean[i] + cfg.sigma * noise.normal();
    }
    return out;
}

inline FeatureSequence generate_synthetic(const SynthConfig& cfg) {
    return generate_synthetic_with_states(cfg).features;
}

} // namespace mvq::io
