#pragma once

// Dense numeric kernel shared by every other module: a row-major matrix,
// softmax / cross-entropy with analytic gradients, Adam, a keyed RNG and a
// central-difference gradient checker.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "mvq/error.hpp"

namespace mvq {

struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
    std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

    std::size_t size() const { return data.size(); }
    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

    bool operator==(const Matrix&) const = default;
};

inline bool all_finite(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double diff = a[i] - b[i];
        s += diff * diff;
    }
    return s;
}

// Index of the largest entry; ties go to the lowest index.
inline std::size_t argmax(std::span<const double> v) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] > v[best]) best = i;
    return best;
}

inline double log_sum_exp(std::span<const double> logits) {
    const double mx = *std::max_element(logits.begin(), logits.end());
    double s = 0.0;
    for (double l : logits) s += std::exp(l - mx);
    return mx + std::log(s);
}

inline std::vector<double> softmax(std::span<const double> logits) {
    if (logits.empty()) throw InvalidInput("softmax: empty logits");
    if (!all_finite(logits)) throw InvalidInput("softmax: non-finite logit");
    const double mx = *std::max_element(logits.begin(), logits.end());
    std::vector<double> out(logits.size());
    double s = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - mx);
        s += out[i];
    }
    for (double& p : out) p /= s;
    return out;
}

struct CrossEntropy {
    double loss = 0.0;
    std::vector<double> grad;  // d loss / d logits = softmax - onehot
};

inline CrossEntropy cross_entropy(std::span<const double> logits, std::size_t target) {
    if (target >= logits.size())
        throw IndexError("cross_entropy: target " + std::to_string(target) + " out of range " +
                         std::to_string(logits.size()));
    CrossEntropy ce;
    ce.grad = softmax(logits);
    ce.loss = log_sum_exp(logits) - logits[target];
    ce.grad[target] -= 1.0;
    return ce;
}

// ---------------------------------------------------------------------------
// Adam

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct AdamState {
    std::uint64_t step = 0;
    std::vector<double> m;
    std::vector<double> v;
    AdamConfig cfg;

    AdamState() = default;
    AdamState(std::size_t n, AdamConfig c) : m(n, 0.0), v(n, 0.0), cfg(c) {
        if (!(cfg.beta1 >= 0.0 && cfg.beta1 < 1.0 && cfg.beta2 >= 0.0 && cfg.beta2 < 1.0))
            throw ConfigError("adam: betas must lie in [0, 1)");
        if (!(cfg.epsilon > 0.0)) throw ConfigError("adam: epsilon must be positive");
    }
};

inline void adam_step(std::span<double> param, std::span<const double> grad, AdamState& st) {
    if (param.size() != grad.size() || st.m.size() != param.size() || st.v.size() != param.size())
        throw ShapeError("adam_step: parameter, gradient and moment sizes differ");
    ++st.step;
    const auto& c = st.cfg;
    const double t = static_cast<double>(st.step);
    const double bc1 = 1.0 - std::pow(c.beta1, t);
    const double bc2 = 1.0 - std::pow(c.beta2, t);
    for (std::size_t i = 0; i < param.size(); ++i) {
        const double g = grad[i];
        st.m[i] = c.beta1 * st.m[i] + (1.0 - c.beta1) * g;
        st.v[i] = c.beta2 * st.v[i] + (1.0 - c.beta2) * g * g;
        const double mhat = st.m[i] / bc1;
        const double vhat = st.v[i] / bc2;
        param[i] -= c.learning_rate * mhat / (std::sqrt(vhat) + c.epsilon);
    }
}

inline void adam_step(Matrix& param, const Matrix& grad, AdamState& st) {
    if (!param.same_shape(grad)) throw ShapeError("adam_step: parameter and gradient shapes differ");
    adam_step(std::span<double>(param.data), std::span<const double>(grad.data), st);
}

// ---------------------------------------------------------------------------
// RNG: xoshiro256** seeded through splitmix64 from (seed, stream). Streams with
// different ids are independent, which lets data generation and encoding fan
// out without sharing state. Normal deviates use Box-Muller so the stream is
// identical on every standard library.

class Rng {
public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) {
        std::uint64_t x = seed ^ (0x9E3779B97F4A7C15ULL * (stream + 1));
        for (auto& s : s_) s = splitmix(x);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Unbiased integer in [0, n).
    std::uint64_t index(std::uint64_t n) {
        if (n == 0) throw InvalidInput("Rng::index: empty range");
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                    std::numeric_limits<std::uint64_t>::max() % n;
        std::uint64_t r;
        do {
            r = next_u64();
        } while (r >= limit);
        return r % n;
    }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    bool bernoulli(double p) { return uniform() < p; }

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[index(i)]);
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    static std::uint64_t splitmix(std::uint64_t& x) {
        std::uint64_t z = (x += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    std::uint64_t s_[4];
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// ---------------------------------------------------------------------------
// Central-difference gradient check. `f` maps a parameter vector to a scalar;
// returns max_i |fd_i - g_i| / max(1e-8, |fd_i| + |g_i|).

template <class F>
double finite_difference_check(F&& f, std::vector<double> x, std::span<const double> analytic,
                               double epsilon = 1e-5) {
    if (x.size() != analytic.size()) throw ShapeError("finite_difference_check: size mismatch");
    double worst = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double saved = x[i];
        x[i] = saved + epsilon;
        const double fp = f(std::span<const double>(x));
        x[i] = saved - epsilon;
        const double fm = f(std::span<const double>(x));
        x[i] = saved;
        const double fd = (fp - fm) / (2.0 * epsilon);
        const double err = std::abs(fd - analytic[i]) / std::max(1e-8, std::abs(fd) + std::abs(analytic[i]));
        worst = std::max(worst, err);
    }
    return worst;
}

} // namespace mvq
