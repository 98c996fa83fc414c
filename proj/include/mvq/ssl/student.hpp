#pragma once

// Toy contextual student encoder.
//
//   A_0[t]     = W_in x[t] + b_in
//   A_{l+1}[t] = A_l[t] + tanh(b_l + sum_j C_l[j] A_l[t + j - r])   r = (w - 1) / 2
//   H          = A_L
//
// Convolutions are zero padded so every block keeps the sequence length. The
// output at frame t only sees inputs within L * r frames. Prediction heads are
// bias-free K x d_model matrices, one per codebook and target family.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "mvq/error.hpp"
#include "mvq/numerics.hpp"
#include "mvq/sequence.hpp"

namespace mvq::ssl {

struct StudentConfig {
    std::size_t d_in = 16;
    std::size_t d_model = 64;
    std::size_t layers = 2;
    std::size_t window = 9;

    void validate() const {
        if (d_in < 1 || d_model < 1) throw ConfigError("student: dimensions must be positive");
        if (window < 1 || window % 2 == 0) throw ConfigError("student: window must be odd");
    }
    std::size_t radius() const { return (window - 1) / 2; }
    std::size_t receptive_radius() const { return layers * radius(); }
};

struct ConvBlock {
    std::vector<double> weight;  // window x d_model(out) x d_model(in)
    std::vector<double> bias;    // d_model
};

struct StudentModel {
    StudentConfig cfg;
    std::vector<double> mask_embedding;  // d_in
    Matrix in_proj;                      // d_model x d_in
    std::vector<double> in_bias;         // d_model
    std::vector<ConvBlock> blocks;
    std::vector<Matrix> speech_heads;    // N_s of K_s x d_model
    std::vector<Matrix> audio_heads;     // N_a of K_a x d_model; empty for single-domain

    StudentModel() = default;
    StudentModel(const StudentConfig& c, std::size_t n_speech, std::size_t k_speech, std::size_t n_audio = 0,
                 std::size_t k_audio = 0)
        : cfg(c), mask_embedding(c.d_in, 0.0), in_proj(c.d_model, c.d_in), in_bias(c.d_model, 0.0) {
        c.validate();
        blocks.resize(c.layers);
        for (auto& b : blocks) {
            b.weight.assign(c.window * c.d_model * c.d_model, 0.0);
            b.bias.assign(c.d_model, 0.0);
        }
        speech_heads.assign(n_speech, Matrix(k_speech, c.d_model));
        audio_heads.assign(n_audio, Matrix(k_audio, c.d_model));
    }

    // Zero-valued model with the same shapes, used as a gradient accumulator.
    StudentModel zeros_like() const {
        StudentModel z = *this;
        for (auto g : z.parameter_groups()) std::fill(g.begin(), g.end(), 0.0);
        return z;
    }

    // Every parameter tensor in a fixed order. Two models of the same shape
    // yield aligned groups, which is how gradients are paired with parameters.
    std::vector<std::span<double>> parameter_groups() {
        std::vector<std::span<double>> g;
        g.emplace_back(mask_embedding);
        g.emplace_back(in_proj.data);
        g.emplace_back(in_bias);
        for (auto& b : blocks) {
            g.emplace_back(b.weight);
            g.emplace_back(b.bias);
        }
        for (auto& h : speech_heads) g.emplace_back(h.data);
        for (auto& h : audio_heads) g.emplace_back(h.data);
        return g;
    }

    std::size_t parameter_count() {
        std::size_t n = 0;
        for (auto g : parameter_groups()) n += g.size();
        return n;
    }

    bool operator==(const StudentModel& o) const {
        auto same_blocks = [&] {
            if (blocks.size() != o.blocks.size()) return false;
            for (std::size_t i = 0; i < blocks.size(); ++i)
                if (blocks[i].weight != o.blocks[i].weight || blocks[i].bias != o.blocks[i].bias) return false;
            return true;
        };
        return cfg.d_in == o.cfg.d_in && cfg.d_model == o.cfg.d_model && cfg.layers == o.cfg.layers &&
               cfg.window == o.cfg.window && mask_embedding == o.mask_embedding && in_proj == o.in_proj &&
               in_bias == o.in_bias && same_blocks() && speech_heads == o.speech_heads && audio_heads == o.audio_heads;
    }
};

inline StudentModel init_student(const StudentConfig& cfg, std::size_t n_speech, std::size_t k_speech,
                                 std::size_t n_audio, std::size_t k_audio, std::uint64_t seed) {
    StudentModel m(cfg, n_speech, k_speech, n_audio, k_audio);
    Rng rng(seed, 20);
    const double in_scale = 1.0 / std::sqrt(static_cast<double>(cfg.d_in));
    const double conv_scale = 1.0 / std::sqrt(static_cast<double>(cfg.window * cfg.d_model));
    const double head_scale = 0.1 / std::sqrt(static_cast<double>(cfg.d_model));
    for (double& v : m.mask_embedding) v = rng.normal() * 0.1;
    for (double& v : m.in_proj.data) v = rng.normal() * in_scale;
    for (auto& b : m.blocks)
        for (double& v : b.weight) v = rng.normal() * conv_scale;
    for (auto& h : m.speech_heads)
        for (double& v : h.data) v = rng.normal() * head_scale;
    for (auto& h : m.audio_heads)
        for (double& v : h.data) v = rng.normal() * head_scale;
    return m;
}

// Activations kept from the forward pass for backprop.
struct ForwardCache {
    Matrix input;                    // masked input X^, T x d_in
    std::vector<Matrix> block_in;    // A_l, l = 0..L-1
    std::vector<Matrix> block_tanh;  // tanh(pre_l)
    Matrix output;                   // H = A_L, T x d_model
};

inline ForwardCache student_forward(const FeatureSequence& masked, const StudentModel& model) {
    const auto& cfg = model.cfg;
    if (masked.dim() != cfg.d_in)
        throw ShapeError("student_forward: input dim " + std::to_string(masked.dim()) + " != d_in " +
                         std::to_string(cfg.d_in));
    const std::size_t t_total = masked.length(), dm = cfg.d_model, w = cfg.window, r = cfg.radius();
    ForwardCache c;
    c.input = masked.frames;

    Matrix a(t_total, dm);
    for (std::size_t t = 0; t < t_total; ++t) {
        auto x = masked.frame(t);
        auto out = a.row(t);
        for (std::size_t o = 0; o < dm; ++o) out[o] = dot(model.in_proj.row(o), x) + model.in_bias[o];
    }

    for (const auto& blk : model.blocks) {
        Matrix th(t_total, dm);
        for (std::size_t t = 0; t < t_total; ++t) {
            auto pre = th.row(t);
            std::copy(blk.bias.begin(), blk.bias.end(), pre.begin());
            for (std::size_t j = 0; j < w; ++j) {
                const std::ptrdiff_t s = static_cast<std::ptrdiff_t>(t + j) - static_cast<std::ptrdiff_t>(r);
                if (s < 0 || s >= static_cast<std::ptrdiff_t>(t_total)) continue;
                const auto src = a.row(static_cast<std::size_t>(s));
                const double* wj = &blk.weight[j * dm * dm];
                for (std::size_t o = 0; o < dm; ++o) {
                    const double* wrow = wj + o * dm;
                    double acc = 0.0;
                    for (std::size_t i = 0; i < dm; ++i) acc += wrow[i] * src[i];
                    pre[o] += acc;
                }
            }
            for (double& v : pre) v = std::tanh(v);
        }
        Matrix next = a;
        for (std::size_t k = 0; k < next.data.size(); ++k) next.data[k] += th.data[k];
        c.block_in.push_back(std::move(a));
        c.block_tanh.push_back(std::move(th));
        a = std::move(next);
    }
    c.output = std::move(a);
    return c;
}

// Accumulates parameter gradients into `grad` given dL/dH. The gradient that
// reaches masked input frames is routed to the mask embedding; `mask_flags`
// marks those frames (empty means nothing was masked).
inline void student_backward(const ForwardCache& c, const Matrix& d_out, const StudentModel& model,
                             std::span<const std::uint8_t> mask_flags, StudentModel& grad) {
    const auto& cfg = model.cfg;
    const std::size_t t_total = c.output.rows, dm = cfg.d_model, w = cfg.window, r = cfg.radius();
    if (!d_out.same_shape(c.output)) throw ShapeError("student_backward: gradient shape mismatch");

    Matrix g = d_out;
    for (std::size_t l = model.blocks.size(); l-- > 0;) {
        const auto& blk = model.blocks[l];
        auto& gblk = grad.blocks[l];
        const Matrix& a = c.block_in[l];
        const Matrix& th = c.block_tanh[l];
        Matrix dpre(t_total, dm);
        for (std::size_t k = 0; k < dpre.data.size(); ++k) dpre.data[k] = g.data[k] * (1.0 - th.data[k] * th.data[k]);
        Matrix g_prev = g;  // residual path
        for (std::size_t t = 0; t < t_total; ++t) {
            const auto dp = dpre.row(t);
            for (std::size_t o = 0; o < dm; ++o) gblk.bias[o] += dp[o];
            for (std::size_t j = 0; j < w; ++j) {
                const std::ptrdiff_t s = static_cast<std::ptrdiff_t>(t + j) - static_cast<std::ptrdiff_t>(r);
                if (s < 0 || s >= static_cast<std::ptrdiff_t>(t_total)) continue;
                const auto src = a.row(static_cast<std::size_t>(s));
                auto gsrc = g_prev.row(static_cast<std::size_t>(s));
                const double* wj = &blk.weight[j * dm * dm];
                double* gwj = &gblk.weight[j * dm * dm];
                for (std::size_t o = 0; o < dm; ++o) {
                    const double d = dp[o];
                    if (d == 0.0) continue;
                    const double* wrow = wj + o * dm;
                    double* gwrow = gwj + o * dm;
                    for (std::size_t i = 0; i < dm; ++i) {
                        gwrow[i] += d * src[i];
                        gsrc[i] += d * wrow[i];
                    }
                }
            }
        }
        g = std::move(g_prev);
    }

    const std::size_t d_in = cfg.d_in;
    std::vector<double> dx(d_in);
    for (std::size_t t = 0; t < t_total; ++t) {
        const auto gt = g.row(t);
        const auto x = c.input.row(t);
        std::fill(dx.begin(), dx.end(), 0.0);
        for (std::size_t o = 0; o < dm; ++o) {
            grad.in_bias[o] += gt[o];
            auto wrow = model.in_proj.row(o);
            auto gwrow = grad.in_proj.row(o);
            for (std::size_t i = 0; i < d_in; ++i) {
                gwrow[i] += gt[o] * x[i];
                dx[i] += gt[o] * wrow[i];
            }
        }
        if (!mask_flags.empty() && mask_flags[t])
            for (std::size_t i = 0; i < d_in; ++i) grad.mask_embedding[i] += dx[i];
    }
}

// T x K logits of one prediction head: logits[t] = W h[t].
inline Matrix head_logits(const Matrix& h, const Matrix& head) {
    if (h.cols != head.cols)
        throw ShapeError("head_logits: d_model " + std::to_string(h.cols) + " != head width " +
                         std::to_string(head.cols));
    Matrix out(h.rows, head.rows);
    for (std::size_t t = 0; t < h.rows; ++t)
        for (std::size_t k = 0; k < head.rows; ++k) out(t, k) = dot(head.row(k), h.row(t));
    return out;
}

} // namespace mvq::ssl
