#pragma once

// Test-side helpers: independent oracles and small fixtures shared by the unit
// tests and the acceptance binary. Nothing here calls the code paths it is
// used to check (the brute-force encoder never touches refine()).

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "mvq/numerics.hpp"
#include "mvq/quantiser.hpp"
#include "mvq/sequence.hpp"
#include "mvq/ssl/loss.hpp"
#include "mvq/ssl/mask.hpp"
#include "mvq/ssl/student.hpp"

namespace mvq::testing {

inline Quantiser random_quantiser(std::size_t n, std::size_t k, std::size_t d, Rng& rng, double scale = 1.0,
                                  std::size_t refine_steps = 5) {
    Quantiser q(n, k, d, refine_steps);
    for (double& v : q.codebooks()) v = rng.normal() * scale;
    for (double& v : q.weights()) v = rng.normal();
    for (double& v : q.biases()) v = rng.normal() * 0.1;
    return q;
}

inline std::vector<double> random_vector(std::size_t d, Rng& rng, double scale = 1.0) {
    std::vector<double> v(d);
    for (double& x : v) x = rng.normal() * scale;
    return v;
}

inline double sq_err(std::span<const double> x, std::span<const Token> z, const Quantiser& q) {
    double s = 0.0;
    for (std::size_t i = 0; i < q.dim(); ++i) {
        double r = x[i];
        for (std::size_t n = 0; n < q.n_codebooks(); ++n) r -= q.code(n, z[n])[i];
        s += r * r;
    }
    return s;
}

struct BruteForce {
    TokenTuple z;
    double err = 0.0;
};

// Enumerates all K^N tuples in lexicographic order; the first strict minimum
// wins, which is the lowest-index tie rule.
inline BruteForce brute_force_encode(std::span<const double> x, const Quantiser& q) {
    const std::size_t n_cb = q.n_codebooks(), k = q.codebook_size();
    TokenTuple z(n_cb, 0);
    BruteForce best{z, std::numeric_limits<double>::infinity()};
    while (true) {
        const double e = sq_err(x, z, q);
        if (e < best.err) best = {z, e};
        std::size_t pos = n_cb;
        while (pos > 0) {
            --pos;
            if (++z[pos] < k) break;
            z[pos] = 0;
            if (pos == 0) return best;
        }
    }
}

inline TokenSequence random_tokens(std::size_t t, std::size_t n, std::size_t k, Rng& rng) {
    TokenSequence z(t, n, k);
    for (auto& v : z.tokens) v = static_cast<Token>(rng.index(k));
    return z;
}

inline Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
    Matrix m(r, c);
    for (double& v : m.data) v = rng.normal() * scale;
    return m;
}

inline ssl::MaskSpec random_mask(std::size_t t, Rng& rng, double p = 0.4) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < t; ++i)
        if (rng.bernoulli(p)) idx.push_back(i);
    return ssl::MaskSpec::from_indices(t, idx);
}

// Flattens every student parameter in parameter_groups() order.
inline std::vector<double> flatten(ssl::StudentModel& m) {
    std::vector<double> out;
    for (auto g : m.parameter_groups()) out.insert(out.end(), g.begin(), g.end());
    return out;
}

inline void unflatten(std::span<const double> flat, ssl::StudentModel& m) {
    std::size_t off = 0;
    for (auto g : m.parameter_groups())
        for (double& v : g) v = flat[off++];
}

// End-to-end masked prediction loss of a student on one utterance, with the
// analytic gradient of every parameter (flattened) when requested.
inline double student_objective(ssl::StudentModel& model, const FeatureSequence& xs, const ssl::MaskSpec& mask,
                                const TokenSequence& z, double alpha, std::vector<double>* grad = nullptr) {
    const auto masked = ssl::apply_mask(xs, mask, model.mask_embedding);
    const auto cache = ssl::student_forward(masked, model);
    const auto loss = ssl::single_domain_loss(cache.output, z, mask, model.speech_heads, alpha);
    if (grad) {
        auto g = model.zeros_like();
        ssl::student_backward(cache, loss.d_h, model, mask.flags, g);
        g.speech_heads = loss.d_heads;
        *grad = flatten(g);
    }
    return loss.total;
}

} // namespace mvq::testing
