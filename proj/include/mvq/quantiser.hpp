#pragma once

// Multi-codebook vector quantiser.
//
// N non-hierarchical codebooks of K code vectors each. A vector x is encoded
// as one index per codebook and reconstructed as the direct sum of the
// selected code vectors. Encoding starts from N linear classifiers (one
// argmax per codebook) and is refined by R sweeps of block coordinate
// descent on the reconstruction error (see refine()).

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <algorithm>
#include <functional>
#include <utility>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "mvq/error.hpp"
#include "mvq/numerics.hpp"
#include "mvq/sequence.hpp"

namespace mvq {

class Quantiser {
public:
    Quantiser() = default;
    Quantiser(std::size_t n_codebooks, std::size_t codebook_size, std::size_t dim, std::size_t refine_steps = 5)
        : n_(n_codebooks), k_(codebook_size), d_(dim), refine_steps_(refine_steps),
          codebooks_(n_codebooks * codebook_size * dim, 0.0),
          weights_(n_codebooks * codebook_size * dim, 0.0),
          biases_(n_codebooks * codebook_size, 0.0) {
        if (n_ < 1) throw ConfigError("quantiser: need at least one codebook");
        if (k_ < 2 || k_ > 65536) throw ConfigError("quantiser: codebook size must be in [2, 65536]");
        if (d_ < 1) throw ConfigError("quantiser: dimension must be positive");
    }

    std::size_t n_codebooks() const { return n_; }
    std::size_t codebook_size() const { return k_; }
    std::size_t dim() const { return d_; }
    std::size_t refine_steps() const { return refine_steps_; }
    void set_refine_steps(std::size_t r) { refine_steps_ = r; }

    std::span<const double> code(std::size_t n, std::size_t k) const { return {&codebooks_[(n * k_ + k) * d_], d_}; }
    std::span<double> code(std::size_t n, std::size_t k) { return {&codebooks_[(n * k_ + k) * d_], d_}; }
    std::span<const double> weight(std::size_t n, std::size_t k) const { return {&weights_[(n * k_ + k) * d_], d_}; }
    std::span<double> weight(std::size_t n, std::size_t k) { return {&weights_[(n * k_ + k) * d_], d_}; }
    double bias(std::size_t n, std::size_t k) const { return biases_[n * k_ + k]; }
    double& bias(std::size_t n, std::size_t k) { return biases_[n * k_ + k]; }

    // Flat parameter storage: codebooks and weights are N x K x d, biases N x K.
    std::vector<double>& codebooks() { return codebooks_; }
    const std::vector<double>& codebooks() const { return codebooks_; }
    std::vector<double>& weights() { return weights_; }
    const std::vector<double>& weights() const { return weights_; }
    std::vector<double>& biases() { return biases_; }
    const std::vector<double>& biases() const { return biases_; }

    bool operator==(const Quantiser&) const = default;

private:
    std::size_t n_ = 0;
    std::size_t k_ = 0;
    std::size_t d_ = 0;
    std::size_t refine_steps_ = 5;
    std::vector<double> codebooks_;
    std::vector<double> weights_;
    std::vector<double> biases_;
};

namespace detail {

inline void check_dim(std::span<const double> x, const Quantiser& q, const char* who) {
    if (x.size() != q.dim())
        throw ShapeError(std::string(who) + ": vector has dimension " + std::to_string(x.size()) +
                         ", quantiser expects " + std::to_string(q.dim()));
}

inline void check_tuple(std::span<const Token> z, const Quantiser& q) {
    if (z.size() != q.n_codebooks())
        throw ShapeError("token tuple has length " + std::to_string(z.size()) + ", expected " +
                         std::to_string(q.n_codebooks()));
    for (Token t : z)
        if (t >= q.codebook_size())
            throw IndexError("token " + std::to_string(t) + " out of range for K=" + std::to_string(q.codebook_size()));
}

} // namespace detail

inline std::vector<double> decode(std::span<const Token> z, const Quantiser& q) {
    detail::check_tuple(z, q);
    std::vector<double> out(q.dim(), 0.0);
    for (std::size_t n = 0; n < q.n_codebooks(); ++n) {
        auto c = q.code(n, z[n]);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += c[i];
    }
    return out;
}

// Reconstruction from a subset of codebooks only (e.g. to inspect what a
// single codebook captures).
inline std::vector<double> decode_partial(std::span<const Token> z, const Quantiser& q,
                                          std::span<const std::size_t> codebooks) {
    detail::check_tuple(z, q);
    std::vector<double> out(q.dim(), 0.0);
    for (std::size_t n : codebooks) {
        if (n >= q.n_codebooks()) throw IndexError("decode_partial: codebook index out of range");
        auto c = q.code(n, z[n]);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += c[i];
    }
    return out;
}

inline double reconstruction_error(std::span<const double> x, std::span<const Token> z, const Quantiser& q) {
    return squared_distance(x, decode(z, q));
}

// Logits of classifier n: W_n x + b_n.
inline std::vector<double> classifier_logits(std::span<const double> x, const Quantiser& q, std::size_t n) {
    std::vector<double> logits(q.codebook_size());
    for (std::size_t k = 0; k < logits.size(); ++k) logits[k] = dot(q.weight(n, k), x) + q.bias(n, k);
    return logits;
}

inline TokenTuple classifier_init(std::span<const double> x, const Quantiser& q) {
    detail::check_dim(x, q, "classifier_init");
    TokenTuple z(q.n_codebooks());
    for (std::size_t n = 0; n < z.size(); ++n) z[n] = static_cast<Token>(argmax(classifier_logits(x, q, n)));
    return z;
}

// One accepted or rejected refinement move. Single-coordinate moves have
// first == second; pair moves re-choose two codebooks jointly.
struct RefineEvent {
    std::size_t sweep = 0;
    std::size_t first = 0;
    std::size_t second = 0;
    double before = 0.0;  // ||x - xhat||^2 before the move
    double after = 0.0;
};

// Tests hook this to assert that no move ever increases the error.
using RefineObserver = std::function<void(const RefineEvent&)>;

// Candidates per codebook considered by a pair move.
inline constexpr std::size_t kPairCandidates = 8;

namespace detail {

// Indices of the `count` codes of codebook n closest to `target`, ordered by
// (error, index).
inline std::vector<std::size_t> nearest_codes(std::span<const double> target, const Quantiser& q, std::size_t n,
                                              std::size_t count) {
    std::vector<std::pair<double, std::size_t>> scored(q.codebook_size());
    for (std::size_t k = 0; k < scored.size(); ++k) scored[k] = {squared_distance(target, q.code(n, k)), k};
    count = std::min(count, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(count), scored.end());
    std::vector<std::size_t> out(count);
    for (std::size_t i = 0; i < count; ++i) out[i] = scored[i].second;
    return out;
}

} // namespace detail

// Each sweep first re-chooses every codebook in order 0..N-1 with the others
// fixed (lowest index wins ties), then re-chooses every pair (n, m), n < m,
// jointly over the kPairCandidates best codes of each. A move is taken only
// when it does not increase the error, so the reconstruction error is
// monotone. Stops early once a sweep changes nothing.
inline TokenTuple refine(std::span<const double> x, TokenTuple z, const Quantiser& q,
                         const RefineObserver& observer = {}) {
    detail::check_dim(x, q, "refine");
    detail::check_tuple(z, q);
    const std::size_t d = q.dim();
    const std::size_t n_cb = q.n_codebooks();
    std::vector<double> xhat = decode(z, q);
    std::vector<double> target(d), pair_target(d), tmp(d);

    auto report = [&](std::size_t sweep, std::size_t a, std::size_t b, double before) {
        if (observer) observer({sweep, a, b, before, squared_distance(x, xhat)});
    };

    for (std::size_t sweep = 0; sweep < q.refine_steps(); ++sweep) {
        bool changed = false;
        for (std::size_t n = 0; n < n_cb; ++n) {
            // target = x - (xhat - C^n_{z_n}); the error of choosing k is ||target - C^n_k||^2.
            auto cur = q.code(n, z[n]);
            for (std::size_t i = 0; i < d; ++i) target[i] = x[i] - (xhat[i] - cur[i]);
            std::size_t best = 0;
            double best_err = squared_distance(target, q.code(n, 0));
            for (std::size_t k = 1; k < q.codebook_size(); ++k) {
                const double e = squared_distance(target, q.code(n, k));
                if (e < best_err) {
                    best_err = e;
                    best = k;
                }
            }
            const double before = observer ? squared_distance(x, xhat) : 0.0;
            if (best != z[n]) {
                z[n] = static_cast<Token>(best);
                xhat = decode(z, q);
                changed = true;
            }
            report(sweep, n, n, before);
        }
        for (std::size_t n = 0; n + 1 < n_cb; ++n) {
            for (std::size_t m = n + 1; m < n_cb; ++m) {
                auto cn = q.code(n, z[n]);
                auto cm = q.code(m, z[m]);
                // pair_target = x minus every codebook except n and m.
                for (std::size_t i = 0; i < d; ++i) pair_target[i] = x[i] - (xhat[i] - cn[i] - cm[i]);
                for (std::size_t i = 0; i < d; ++i) tmp[i] = pair_target[i] - cm[i];
                const auto cand_n = detail::nearest_codes(tmp, q, n, kPairCandidates);
                for (std::size_t i = 0; i < d; ++i) tmp[i] = pair_target[i] - cn[i];
                const auto cand_m = detail::nearest_codes(tmp, q, m, kPairCandidates);

                auto pair_err = [&](std::size_t a, std::size_t b) {
                    auto ca = q.code(n, a);
                    auto cb = q.code(m, b);
                    double s = 0.0;
                    for (std::size_t i = 0; i < d; ++i) {
                        const double r = pair_target[i] - ca[i] - cb[i];
                        s += r * r;
                    }
                    return s;
                };
                std::size_t best_a = z[n], best_b = z[m];
                double best_err = pair_err(best_a, best_b);
                for (std::size_t a : cand_n)
                    for (std::size_t b : cand_m) {
                        const double e = pair_err(a, b);
                        if (e < best_err) {
                            best_err = e;
                            best_a = a;
                            best_b = b;
                        }
                    }
                const double before = observer ? squared_distance(x, xhat) : 0.0;
                if (best_a != z[n] || best_b != z[m]) {
                    z[n] = static_cast<Token>(best_a);
                    z[m] = static_cast<Token>(best_b);
                    xhat = decode(z, q);
                    changed = true;
                }
                report(sweep, n, m, before);
            }
        }
        if (!changed) break;
    }
    return z;
}

inline TokenTuple encode(std::span<const double> x, const Quantiser& q) {
    return refine(x, classifier_init(x, q), q);
}

// Per-frame encode. With threads > 1 the frames are split into contiguous
// chunks; every frame is encoded independently so the result does not depend
// on the thread count.
inline TokenSequence encode_sequence(const FeatureSequence& xs, const Quantiser& q, unsigned threads = 1) {
    if (!xs.empty() && xs.dim() != q.dim())
        throw ShapeError("encode_sequence: feature dim " + std::to_string(xs.dim()) + " != quantiser dim " +
                         std::to_string(q.dim()));
    const std::size_t t_total = xs.length();
    TokenSequence out(t_total, q.n_codebooks(), q.codebook_size());
    auto work = [&](std::size_t begin, std::size_t end) {
        for (std::size_t t = begin; t < end; ++t) {
            const TokenTuple z = encode(xs.frame(t), q);
            std::copy(z.begin(), z.end(), out.tokens.begin() + static_cast<std::ptrdiff_t>(t * q.n_codebooks()));
        }
    };
    if (threads <= 1 || t_total < 2) {
        work(0, t_total);
        return out;
    }
    const std::size_t chunk = (t_total + threads - 1) / threads;
    std::vector<std::jthread> pool;
    for (std::size_t begin = 0; begin < t_total; begin += chunk)
        pool.emplace_back(work, begin, std::min(t_total, begin + chunk));
    pool.clear();
    return out;
}

inline FeatureSequence decode_sequence(const TokenSequence& zs, const Quantiser& q, double frame_rate_hz = 50.0,
                                       DomainTag tag = DomainTag::unspecified) {
    if (zs.n_codebooks != q.n_codebooks()) throw ShapeError("decode_sequence: codebook count mismatch");
    FeatureSequence out(zs.length(), q.dim(), frame_rate_hz, tag);
    for (std::size_t t = 0; t < zs.length(); ++t) {
        const auto xhat = decode(zs.tuple(t), q);
        std::copy(xhat.begin(), xhat.end(), out.frame(t).begin());
    }
    return out;
}

// Mean over frames, e.g. an utterance-level embedding of a reconstruction.
inline std::vector<double> mean_pool(const FeatureSequence& xs) {
    if (xs.empty()) throw InvalidInput("mean_pool: empty sequence");
    std::vector<double> out(xs.dim(), 0.0);
    for (std::size_t t = 0; t < xs.length(); ++t)
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += xs.frames(t, i);
    for (double& v : out) v /= static_cast<double>(xs.length());
    return out;
}

inline double reconstruction_mse(const FeatureSequence& xs, const Quantiser& q) {
    if (xs.empty()) throw InvalidInput("reconstruction_mse: empty input");
    if (xs.dim() != q.dim()) throw ShapeError("reconstruction_mse: dimension mismatch");
    double total = 0.0;
    for (std::size_t t = 0; t < xs.length(); ++t) {
        const auto z = encode(xs.frame(t), q);
        total += reconstruction_error(xs.frame(t), z, q);
    }
    return total / static_cast<double>(xs.length());
}

// Entropy (nats) of the empirical index histogram of one codebook.
inline double hard_usage_entropy(const TokenSequence& zs, std::size_t codebook) {
    std::vector<double> counts(zs.codebook_size, 0.0);
    const std::size_t t_total = zs.length();
    if (t_total == 0) return 0.0;
    for (std::size_t t = 0; t < t_total; ++t) counts[zs.at(t, codebook)] += 1.0;
    double h = 0.0;
    for (double c : counts) {
        if (c == 0.0) continue;
        const double p = c / static_cast<double>(t_total);
        h -= p * std::log(p);
    }
    return h;
}

// ---------------------------------------------------------------------------
// Training loss

struct QuantiserGrad {
    std::vector<double> codebooks;
    std::vector<double> weights;
    std::vector<double> biases;
};

struct QuantiserLoss {
    double residual = 0.0;    // mean ||x - decode(z)||^2
    double prediction = 0.0;  // mean sum_n CE(G_n(x), z_n)
    double reg = 0.0;         // sum_n KL(uniform || batch-mean softmax of G_n)
    double total = 0.0;       // residual + prediction + beta * reg
    QuantiserGrad grad;
};

// Loss with the encodings supplied by the caller. `tokens` holds one tuple per
// batch row; they act as constants, so this function is smooth in every
// parameter and can be checked against finite differences.
inline QuantiserLoss quantiser_loss_with_tokens(const Matrix& batch, const TokenSequence& tokens, const Quantiser& q,
                                                double beta) {
    const std::size_t b_total = batch.rows;
    if (b_total == 0) throw InvalidInput("quantiser_loss: empty batch");
    if (batch.cols != q.dim()) throw ShapeError("quantiser_loss: batch dimension mismatch");
    if (tokens.length() != b_total || tokens.n_codebooks != q.n_codebooks())
        throw ShapeError("quantiser_loss: token shape does not match batch");

    const std::size_t n_cb = q.n_codebooks(), k_sz = q.codebook_size(), d = q.dim();
    const double inv_b = 1.0 / static_cast<double>(b_total);
    QuantiserLoss out;
    out.grad.codebooks.assign(q.codebooks().size(), 0.0);
    out.grad.weights.assign(q.weights().size(), 0.0);
    out.grad.biases.assign(q.biases().size(), 0.0);

    // Residual term: only the selected code vectors receive gradient.
    for (std::size_t b = 0; b < b_total; ++b) {
        const auto x = batch.row(b);
        const auto z = tokens.tuple(b);
        const auto xhat = decode(z, q);
        for (std::size_t i = 0; i < d; ++i) {
            const double r = x[i] - xhat[i];
            out.residual += r * r * inv_b;
            for (std::size_t n = 0; n < n_cb; ++n) out.grad.codebooks[(n * k_sz + z[n]) * d + i] -= 2.0 * r * inv_b;
        }
    }

    // Prediction and regulariser terms, per codebook.
    std::vector<double> probs(b_total * k_sz);
    std::vector<double> dlogits(b_total * k_sz);
    for (std::size_t n = 0; n < n_cb; ++n) {
        std::vector<double> pbar(k_sz, 0.0);
        for (std::size_t b = 0; b < b_total; ++b) {
            const auto logits = classifier_logits(batch.row(b), q, n);
            const auto ce = cross_entropy(logits, tokens.at(b, n));
            out.prediction += ce.loss * inv_b;
            for (std::size_t k = 0; k < k_sz; ++k) {
                const double p = ce.grad[k] + (k == tokens.at(b, n) ? 1.0 : 0.0);
                probs[b * k_sz + k] = p;
                pbar[k] += p * inv_b;
                dlogits[b * k_sz + k] = ce.grad[k] * inv_b;
            }
        }
        // KL(u || pbar) = sum_k (1/K) log((1/K) / pbar_k)
        const double inv_k = 1.0 / static_cast<double>(k_sz);
        std::vector<double> g(k_sz);
        for (std::size_t k = 0; k < k_sz; ++k) {
            out.reg += inv_k * (std::log(inv_k) - std::log(pbar[k]));
            g[k] = -inv_k / pbar[k];
        }
        if (beta != 0.0) {
            // d reg / d logit_bj = (1/B) p_bj (g_j - sum_k g_k p_bk)
            for (std::size_t b = 0; b < b_total; ++b) {
                const double* p = &probs[b * k_sz];
                double gp = 0.0;
                for (std::size_t k = 0; k < k_sz; ++k) gp += g[k] * p[k];
                for (std::size_t j = 0; j < k_sz; ++j) dlogits[b * k_sz + j] += beta * inv_b * p[j] * (g[j] - gp);
            }
        }
        for (std::size_t b = 0; b < b_total; ++b) {
            const auto x = batch.row(b);
            for (std::size_t k = 0; k < k_sz; ++k) {
                const double dl = dlogits[b * k_sz + k];
                out.grad.biases[n * k_sz + k] += dl;
                double* w = &out.grad.weights[(n * k_sz + k) * d];
                for (std::size_t i = 0; i < d; ++i) w[i] += dl * x[i];
            }
        }
    }
    out.total = out.residual + out.prediction + beta * out.reg;
    return out;
}

inline TokenSequence encode_rows(const Matrix& batch, const Quantiser& q) {
    TokenSequence z(batch.rows, q.n_codebooks(), q.codebook_size());
    for (std::size_t b = 0; b < batch.rows; ++b) {
        const auto t = encode(batch.row(b), q);
        std::copy(t.begin(), t.end(), z.tokens.begin() + static_cast<std::ptrdiff_t>(b * q.n_codebooks()));
    }
    return z;
}

inline QuantiserLoss quantiser_loss(const Matrix& batch, const Quantiser& q, double beta) {
    if (batch.rows == 0) throw InvalidInput("quantiser_loss: empty batch");
    if (batch.cols != q.dim()) throw ShapeError("quantiser_loss: batch dimension mismatch");
    return quantiser_loss_with_tokens(batch, encode_rows(batch, q), q, beta);
}

inline QuantiserLoss quantiser_loss(const FeatureSequence& batch, const Quantiser& q, double beta) {
    return quantiser_loss(batch.frames, q, beta);
}

// ---------------------------------------------------------------------------
// Training

struct QuantiserTrainConfig {
    std::size_t n_codebooks = 16;
    std::size_t codebook_size = 256;
    std::size_t refine_steps = 5;
    double beta = 0.1;
    std::size_t batch_size = 64;
    std::size_t steps = 2000;
    AdamConfig adam{.learning_rate = 5e-3};
    double init_noise_sigma = 0.01;
    std::uint64_t seed = 0;

    void validate() const {
        if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
        if (steps < 1) throw ConfigError("steps must be >= 1");
        if (beta < 0.0) throw ConfigError("beta must be >= 0");
        if (init_noise_sigma < 0.0) throw ConfigError("init_noise_sigma must be >= 0");
    }
};

struct QuantiserStepMetrics {
    std::size_t step = 0;
    double residual = 0.0;
    double prediction = 0.0;
    double reg = 0.0;
    double total = 0.0;
    std::vector<double> usage_entropy;  // per codebook, over the minibatch
};

struct QuantiserTrainResult {
    Quantiser quantiser;
    std::vector<QuantiserStepMetrics> trace;
};

// Codes start at (random training frame) / N plus Gaussian noise scaled by
// init_noise_sigma times the per-dimension std of the data, so sums of initial
// codes sit near the data. Classifier weights start at small random values.
inline Quantiser init_quantiser(const FeatureSequence& features, const QuantiserTrainConfig& cfg) {
    const std::size_t d = features.dim();
    Quantiser q(cfg.n_codebooks, cfg.codebook_size, d, cfg.refine_steps);
    const std::size_t t_total = features.length();
    std::vector<double> mean(d, 0.0), stdev(d, 0.0);
    for (std::size_t t = 0; t < t_total; ++t)
        for (std::size_t i = 0; i < d; ++i) mean[i] += features.frames(t, i) / static_cast<double>(t_total);
    for (std::size_t t = 0; t < t_total; ++t)
        for (std::size_t i = 0; i < d; ++i) {
            const double c = features.frames(t, i) - mean[i];
            stdev[i] += c * c / static_cast<double>(t_total);
        }
    for (double& s : stdev) s = std::sqrt(s);

    Rng rng(cfg.seed, 1);
    const double inv_n = 1.0 / static_cast<double>(cfg.n_codebooks);
    for (std::size_t n = 0; n < cfg.n_codebooks; ++n)
        for (std::size_t k = 0; k < cfg.codebook_size; ++k) {
            const auto src = features.frame(rng.index(t_total));
            auto c = q.code(n, k);
            for (std::size_t i = 0; i < d; ++i) c[i] = src[i] * inv_n + rng.normal() * cfg.init_noise_sigma * stdev[i];
        }
    const double wscale = 0.01 / std::sqrt(static_cast<double>(d));
    for (double& w : q.weights()) w = rng.normal() * wscale;
    return q;
}

using QuantiserStepCallback = std::function<void(const QuantiserStepMetrics&)>;

inline QuantiserTrainResult train_quantiser(const FeatureSequence& features, const QuantiserTrainConfig& cfg,
                                            const QuantiserStepCallback& on_step = {}) {
    cfg.validate();
    if (features.length() < cfg.batch_size)
        throw InvalidInput("train_quantiser: fewer frames (" + std::to_string(features.length()) +
                           ") than batch_size (" + std::to_string(cfg.batch_size) + ")");
    QuantiserTrainResult res{init_quantiser(features, cfg), {}};
    Quantiser& q = res.quantiser;
    AdamState st_c(q.codebooks().size(), cfg.adam);
    AdamState st_w(q.weights().size(), cfg.adam);
    AdamState st_b(q.biases().size(), cfg.adam);

    Rng rng(cfg.seed, 2);
    std::vector<std::size_t> order(features.length());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);
    std::size_t cursor = 0;

    Matrix batch(cfg.batch_size, features.dim());
    res.trace.reserve(cfg.steps);
    for (std::size_t step = 0; step < cfg.steps; ++step) {
        if (cursor + cfg.batch_size > order.size()) {
            rng.shuffle(order);
            cursor = 0;
        }
        for (std::size_t b = 0; b < cfg.batch_size; ++b) {
            const auto src = features.frame(order[cursor + b]);
            std::copy(src.begin(), src.end(), batch.row(b).begin());
        }
        cursor += cfg.batch_size;

        const TokenSequence z = encode_rows(batch, q);
        const QuantiserLoss loss = quantiser_loss_with_tokens(batch, z, q, cfg.beta);

        QuantiserStepMetrics m{step, loss.residual, loss.prediction, loss.reg, loss.total, {}};
        for (std::size_t n = 0; n < q.n_codebooks(); ++n) m.usage_entropy.push_back(hard_usage_entropy(z, n));

        adam_step(std::span<double>(q.codebooks()), loss.grad.codebooks, st_c);
        adam_step(std::span<double>(q.weights()), loss.grad.weights, st_w);
        adam_step(std::span<double>(q.biases()), loss.grad.biases, st_b);

        if (on_step) on_step(m);
        res.trace.push_back(std::move(m));
    }
    return res;
}

} // namespace mvq
