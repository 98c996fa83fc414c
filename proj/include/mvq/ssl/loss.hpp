#pragma once

// Multi-codebook masked token prediction losses.
//
// Single domain, N codebooks, weight alpha between masked (M) and unmasked
// frames, losses summed over frames:
//
//   L_single = (1/N) sum_n [ alpha L_m^n + (1 - alpha) L_u^n ]
//   L_m^n    = sum_{t in M}     -log softmax(W_n h_t)[z_{t,n}]
//   L_u^n    = sum_{t not in M} -log softmax(W_n h_t)[z_{t,n}]
//
// Dual domain combines a speech-target and an audio-target L_single according
// to a strategy; see dual_domain_loss().

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mvq/error.hpp"
#include "mvq/numerics.hpp"
#include "mvq/sequence.hpp"
#include "mvq/ssl/mask.hpp"
#include "mvq/ssl/student.hpp"

namespace mvq::ssl {

struct SingleLoss {
    double total = 0.0;
    std::vector<double> masked;        // L_m^n per codebook
    std::vector<double> unmasked;      // L_u^n per codebook
    std::vector<std::size_t> correct;  // masked frames with argmax == target, per codebook
    std::size_t masked_frames = 0;
    Matrix d_h;                        // dL/dH
    std::vector<Matrix> d_heads;       // dL/dW_n

    double masked_mean() const {
        double s = 0.0;
        for (double v : masked) s += v;
        return masked.empty() ? 0.0 : s / static_cast<double>(masked.size());
    }
    double unmasked_mean() const {
        double s = 0.0;
        for (double v : unmasked) s += v;
        return unmasked.empty() ? 0.0 : s / static_cast<double>(unmasked.size());
    }
};

inline SingleLoss single_domain_loss(const Matrix& h, const TokenSequence& z, const MaskSpec& mask,
                                     std::span<const Matrix> heads, double alpha) {
    const std::size_t t_total = h.rows, n_cb = heads.size();
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [0, 1]");
    if (z.length() != t_total) throw ShapeError("single_domain_loss: token length differs from T");
    if (z.n_codebooks != n_cb)
        throw ShapeError("single_domain_loss: " + std::to_string(n_cb) + " heads for " +
                         std::to_string(z.n_codebooks) + " codebooks");
    if (mask.length != t_total) throw ShapeError("single_domain_loss: mask length differs from T");
    for (const auto& w : heads)
        if (w.rows != z.codebook_size) throw ShapeError("single_domain_loss: head rows differ from K");
    z.validate();

    SingleLoss out;
    out.masked.assign(n_cb, 0.0);
    out.unmasked.assign(n_cb, 0.0);
    out.correct.assign(n_cb, 0);
    out.masked_frames = mask.count();
    out.d_h = Matrix(t_total, h.cols);
    const double inv_n = 1.0 / static_cast<double>(n_cb);
    const double w_masked = alpha * inv_n, w_unmasked = (1.0 - alpha) * inv_n;

    for (std::size_t n = 0; n < n_cb; ++n) {
        const Matrix& w = heads[n];
        Matrix dw(w.rows, w.cols);
        const Matrix logits = head_logits(h, w);
        for (std::size_t t = 0; t < t_total; ++t) {
            const auto row = logits.row(t);
            const std::size_t target = z.at(t, n);
            const auto ce = cross_entropy(row, target);
            const bool is_masked = mask.masked(t);
            if (is_masked) {
                out.masked[n] += ce.loss;
                if (argmax(row) == target) ++out.correct[n];
            } else {
                out.unmasked[n] += ce.loss;
            }
            const double scale = is_masked ? w_masked : w_unmasked;
            if (scale == 0.0) continue;
            const auto ht = h.row(t);
            auto dht = out.d_h.row(t);
            for (std::size_t k = 0; k < w.rows; ++k) {
                const double g = scale * ce.grad[k];
                auto wk = w.row(k);
                auto dwk = dw.row(k);
                for (std::size_t i = 0; i < h.cols; ++i) {
                    dwk[i] += g * ht[i];
                    dht[i] += g * wk[i];
                }
            }
        }
        out.d_heads.push_back(std::move(dw));
    }
    double total = 0.0;
    for (std::size_t n = 0; n < n_cb; ++n) total += alpha * out.masked[n] + (1.0 - alpha) * out.unmasked[n];
    out.total = total * inv_n;
    return out;
}

enum class DualStrategy { joint, disjoint, asymmetrical };

inline std::string_view to_string(DualStrategy s) {
    switch (s) {
    case DualStrategy::joint: return "joint";
    case DualStrategy::disjoint: return "disjoint";
    case DualStrategy::asymmetrical: return "asymmetrical";
    }
    return "unknown";
}

inline DualStrategy parse_strategy(std::string_view s) {
    if (s == "joint") return DualStrategy::joint;
    if (s == "disjoint") return DualStrategy::disjoint;
    if (s == "asymmetrical") return DualStrategy::asymmetrical;
    throw ConfigError("unknown dual-domain strategy '" + std::string(s) + "'");
}

// Weights of the speech-target and audio-target terms for one input.
//   asymmetrical: 1,          is_audio * lambda
//   joint:        1,          lambda
//   disjoint:     !is_audio,  is_audio * lambda
struct DualWeights {
    double speech = 0.0;
    double audio = 0.0;
};

inline DualWeights dual_weights(DualStrategy s, bool is_audio, double lambda) {
    switch (s) {
    case DualStrategy::asymmetrical: return {1.0, is_audio ? lambda : 0.0};
    case DualStrategy::joint: return {1.0, lambda};
    case DualStrategy::disjoint: return {is_audio ? 0.0 : 1.0, is_audio ? lambda : 0.0};
    }
    return {};
}

struct DualLoss {
    double total = 0.0;
    DualWeights weights;
    std::optional<SingleLoss> speech;  // present iff its weight is nonzero
    std::optional<SingleLoss> audio;
    Matrix d_h;
    std::vector<Matrix> d_speech_heads;  // zero when the speech term is gated off
    std::vector<Matrix> d_audio_heads;   // zero when the audio term is gated off
};

// A term whose weight is zero is not evaluated at all: it contributes exactly
// zero loss and exactly zero gradient.
inline DualLoss dual_domain_loss(const Matrix& h, const TokenSequence& z_speech, const TokenSequence* z_audio,
                                 const MaskSpec& mask, std::span<const Matrix> speech_heads,
                                 std::span<const Matrix> audio_heads, bool is_audio, double lambda,
                                 DualStrategy strategy, double alpha) {
    if (!(lambda >= 0.0)) throw ConfigError("lambda must be >= 0");
    DualLoss out;
    out.weights = dual_weights(strategy, is_audio, lambda);
    if (out.weights.audio != 0.0 && z_audio == nullptr)
        throw ConfigError("dual_domain_loss: strategy '" + std::string(to_string(strategy)) +
                          "' needs audio targets for this input");
    if (out.weights.audio != 0.0 && audio_heads.empty()) throw ConfigError("dual_domain_loss: no audio heads");

    out.d_h = Matrix(h.rows, h.cols);
    for (const auto& w : speech_heads) out.d_speech_heads.emplace_back(w.rows, w.cols);
    for (const auto& w : audio_heads) out.d_audio_heads.emplace_back(w.rows, w.cols);

    if (out.weights.speech != 0.0) {
        out.speech = single_domain_loss(h, z_speech, mask, speech_heads, alpha);
        if (out.weights.speech == 1.0) {
            out.total = out.speech->total;
            out.d_h = out.speech->d_h;
            out.d_speech_heads = out.speech->d_heads;
        } else {
            out.total = out.weights.speech * out.speech->total;
            for (std::size_t k = 0; k < out.d_h.size(); ++k) out.d_h.data[k] = out.weights.speech * out.speech->d_h.data[k];
            for (std::size_t n = 0; n < out.d_speech_heads.size(); ++n)
                for (std::size_t k = 0; k < out.d_speech_heads[n].size(); ++k)
                    out.d_speech_heads[n].data[k] = out.weights.speech * out.speech->d_heads[n].data[k];
        }
    }
    if (out.weights.audio != 0.0) {
        out.audio = single_domain_loss(h, *z_audio, mask, audio_heads, alpha);
        const double lam = out.weights.audio;
        out.total += lam * out.audio->total;
        for (std::size_t k = 0; k < out.d_h.size(); ++k) out.d_h.data[k] += lam * out.audio->d_h.data[k];
        for (std::size_t n = 0; n < out.d_audio_heads.size(); ++n)
            for (std::size_t k = 0; k < out.d_audio_heads[n].size(); ++k)
                out.d_audio_heads[n].data[k] = lam * out.audio->d_heads[n].data[k];
    }
    return out;
}

} // namespace mvq::ssl
