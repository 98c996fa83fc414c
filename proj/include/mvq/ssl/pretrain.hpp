#pragma once

// Desk-scale masked-token-prediction pretraining loop and its evaluation.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "mvq/error.hpp"
#include "mvq/numerics.hpp"
#include "mvq/quantiser.hpp"
#include "mvq/sequence.hpp"
#include "mvq/ssl/interpolate.hpp"
#include "mvq/ssl/loss.hpp"
#include "mvq/ssl/mask.hpp"
#include "mvq/ssl/student.hpp"

namespace mvq::ssl {

// One training utterance: the student input plus optional teacher
// representations. A missing teacher means the input itself is the teacher.
// Teachers at a different frame rate are interpolated to the input rate.
struct Utterance {
    FeatureSequence input;
    std::optional<FeatureSequence> speech_teacher;
    std::optional<FeatureSequence> audio_teacher;
};

struct SslTrainConfig {
    double alpha = 0.5;
    double lambda = 0.1;
    DualStrategy strategy = DualStrategy::asymmetrical;
    MaskConfig mask;
    AdamConfig adam;
    StudentConfig student;  // d_in is taken from the data
    std::size_t steps = 3000;
    std::size_t batch_size = 4;
    std::size_t seq_len = 100;
    std::size_t speech_ratio = 1;  // dual mode: speech batches per cycle
    std::size_t audio_ratio = 1;   // dual mode: audio batches per cycle
    InterpMode interp = InterpMode::nearest;
    std::uint64_t seed = 0;

    void validate() const {
        if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [0, 1]");
        if (!(lambda >= 0.0)) throw ConfigError("lambda must be >= 0");
        mask.validate();
        if (steps < 1) throw ConfigError("steps must be >= 1");
        if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
        if (seq_len < 1) throw ConfigError("seq_len must be >= 1");
        if (speech_ratio + audio_ratio == 0) throw ConfigError("speech_ratio + audio_ratio must be positive");
    }
};

struct PretrainStepMetrics {
    std::size_t step = 0;
    DomainTag domain = DomainTag::speech;
    double loss_total = 0.0;
    // Masked / unmasked parts, (1/N) sum_n L_m^n and (1/N) sum_n L_u^n, of the
    // speech-target term; zero when that term is gated off. Averaged over the
    // sequences of the batch, like loss_total.
    double loss_masked = 0.0;
    double loss_unmasked = 0.0;
    double loss_audio = 0.0;  // unscaled audio-target L_single; dual mode only
    std::vector<double> acc;        // masked top-1 accuracy per speech codebook
    std::vector<double> acc_audio;  // per audio codebook; dual mode only
    std::size_t masked_frames = 0;
};

struct PretrainResult {
    StudentModel model;
    std::vector<PretrainStepMetrics> trace;
};

namespace detail {

struct PreparedUtterance {
    FeatureSequence input;
    TokenSequence speech;
    std::optional<TokenSequence> audio;
    bool is_audio = false;
};

inline TokenSequence teacher_tokens(const FeatureSequence& input, const std::optional<FeatureSequence>& teacher,
                                    const Quantiser& q, InterpMode mode) {
    const FeatureSequence& e = teacher ? *teacher : input;
    if (e.dim() != q.dim())
        throw ShapeError("teacher dim " + std::to_string(e.dim()) + " != quantiser dim " + std::to_string(q.dim()));
    return encode_sequence(interpolate_targets(e, input.frame_rate_hz, mode), q);
}

inline std::vector<PreparedUtterance> prepare(const std::vector<Utterance>& data, const Quantiser& q_speech,
                                              const Quantiser* q_audio, InterpMode mode, bool force_audio_flag,
                                              bool audio_flag) {
    std::vector<PreparedUtterance> out;
    for (const auto& u : data) {
        PreparedUtterance p;
        p.speech = teacher_tokens(u.input, u.speech_teacher, q_speech, mode);
        if (q_audio) p.audio = teacher_tokens(u.input, u.audio_teacher, *q_audio, mode);
        // Teacher rounding can leave the targets a frame short or long.
        std::size_t t = std::min(u.input.length(), p.speech.length());
        if (p.audio) t = std::min(t, p.audio->length());
        p.input = u.input.slice(0, t);
        p.speech = p.speech.slice(0, t);
        if (p.audio) p.audio = p.audio->slice(0, t);
        p.is_audio = force_audio_flag ? audio_flag : u.input.domain == DomainTag::audio;
        if (t > 0) out.push_back(std::move(p));
    }
    return out;
}

} // namespace detail

using PretrainStepCallback = std::function<void(const PretrainStepMetrics&)>;

// Single-domain mode when `q_audio` is null (audio_data is ignored); dual mode
// otherwise. In dual mode steps alternate between domains in cycles of
// speech_ratio speech batches followed by audio_ratio audio batches, and
// is_audio comes from which dataset a batch was drawn from.
inline PretrainResult pretrain(const std::vector<Utterance>& speech_data, const std::vector<Utterance>& audio_data,
                               const Quantiser& q_speech, const Quantiser* q_audio, const SslTrainConfig& cfg,
                               const PretrainStepCallback& on_step = {}) {
    cfg.validate();
    const bool dual = q_audio != nullptr;
    if (speech_data.empty() && (!dual || cfg.speech_ratio > 0)) throw ConfigError("pretrain: empty speech dataset");
    if (dual && audio_data.empty() && cfg.audio_ratio > 0) throw ConfigError("pretrain: empty audio dataset");

    const auto speech = detail::prepare(speech_data, q_speech, q_audio, cfg.interp, true, false);
    const auto audio =
        dual ? detail::prepare(audio_data, q_speech, q_audio, cfg.interp, true, true) : decltype(speech){};
    if ((speech.empty() && (!dual || cfg.speech_ratio > 0)) || (dual && audio.empty() && cfg.audio_ratio > 0))
        throw ConfigError("pretrain: dataset has no frames");

    const std::size_t d_in = speech.empty() ? audio.front().input.dim() : speech.front().input.dim();
    for (const auto* set : {&speech, &audio})
        for (const auto& u : *set)
            if (u.input.dim() != d_in) throw ShapeError("pretrain: inputs have differing dimensions");

    StudentConfig scfg = cfg.student;
    scfg.d_in = d_in;
    PretrainResult res;
    res.model = init_student(scfg, q_speech.n_codebooks(), q_speech.codebook_size(),
                             dual ? q_audio->n_codebooks() : 0, dual ? q_audio->codebook_size() : 0, cfg.seed);
    StudentModel& model = res.model;

    std::vector<AdamState> opt;
    for (auto g : model.parameter_groups()) opt.emplace_back(g.size(), cfg.adam);

    Rng rng(cfg.seed, 30);
    std::uint64_t mask_stream = 0;
    const std::size_t cycle = dual ? cfg.speech_ratio + cfg.audio_ratio : 1;
    const double inv_b = 1.0 / static_cast<double>(cfg.batch_size);

    for (std::size_t step = 0; step < cfg.steps; ++step) {
        const bool audio_step = dual && (step % cycle) >= cfg.speech_ratio;
        const auto& pool = audio_step ? audio : speech;

        StudentModel grad = model.zeros_like();
        PretrainStepMetrics m;
        m.step = step;
        m.domain = audio_step ? DomainTag::audio : DomainTag::speech;
        std::vector<std::size_t> correct(q_speech.n_codebooks(), 0);
        std::vector<std::size_t> correct_audio(dual ? q_audio->n_codebooks() : 0, 0);

        for (std::size_t b = 0; b < cfg.batch_size; ++b) {
            const auto& u = pool[rng.index(pool.size())];
            const std::size_t t_full = u.input.length();
            const std::size_t len = std::min(cfg.seq_len, t_full);
            const std::size_t offset = t_full > len ? rng.index(t_full - len + 1) : 0;

            const FeatureSequence x = u.input.slice(offset, len);
            const MaskSpec mask = sample_mask(len, cfg.mask, cfg.seed, mask_stream++);
            const ForwardCache fc = student_forward(apply_mask(x, mask, model.mask_embedding), model);
            const TokenSequence zs = u.speech.slice(offset, len);

            Matrix d_h;
            if (!dual) {
                auto loss = single_domain_loss(fc.output, zs, mask, model.speech_heads, cfg.alpha);
                m.loss_total += loss.total * inv_b;
                m.loss_masked += loss.masked_mean() * inv_b;
                m.loss_unmasked += loss.unmasked_mean() * inv_b;
                for (std::size_t n = 0; n < correct.size(); ++n) correct[n] += loss.correct[n];
                for (std::size_t n = 0; n < grad.speech_heads.size(); ++n)
                    for (std::size_t k = 0; k < grad.speech_heads[n].size(); ++k)
                        grad.speech_heads[n].data[k] += loss.d_heads[n].data[k];
                d_h = std::move(loss.d_h);
            } else {
                const TokenSequence za = u.audio->slice(offset, len);
                auto loss = dual_domain_loss(fc.output, zs, &za, mask, model.speech_heads, model.audio_heads,
                                             u.is_audio, cfg.lambda, cfg.strategy, cfg.alpha);
                m.loss_total += loss.total * inv_b;
                if (loss.speech) {
                    m.loss_masked += loss.speech->masked_mean() * inv_b;
                    m.loss_unmasked += loss.speech->unmasked_mean() * inv_b;
                    for (std::size_t n = 0; n < correct.size(); ++n) correct[n] += loss.speech->correct[n];
                }
                if (loss.audio) {
                    m.loss_audio += loss.audio->total * inv_b;
                    for (std::size_t n = 0; n < correct_audio.size(); ++n) correct_audio[n] += loss.audio->correct[n];
                }
                for (std::size_t n = 0; n < grad.speech_heads.size(); ++n)
                    for (std::size_t k = 0; k < grad.speech_heads[n].size(); ++k)
                        grad.speech_heads[n].data[k] += loss.d_speech_heads[n].data[k];
                for (std::size_t n = 0; n < grad.audio_heads.size(); ++n)
                    for (std::size_t k = 0; k < grad.audio_heads[n].size(); ++k)
                        grad.audio_heads[n].data[k] += loss.d_audio_heads[n].data[k];
                d_h = std::move(loss.d_h);
            }
            m.masked_frames += mask.count();
            student_backward(fc, d_h, model, mask.flags, grad);
        }

        auto ratio = [&](std::size_t c) {
            return m.masked_frames == 0 ? std::numeric_limits<double>::quiet_NaN()
                                        : static_cast<double>(c) / static_cast<double>(m.masked_frames);
        };
        for (std::size_t c : correct) m.acc.push_back(ratio(c));
        for (std::size_t c : correct_audio) m.acc_audio.push_back(ratio(c));

        auto params = model.parameter_groups();
        auto grads = grad.parameter_groups();
        for (std::size_t i = 0; i < params.size(); ++i) {
            for (double& g : grads[i]) g *= inv_b;
            adam_step(params[i], grads[i], opt[i]);
        }
        if (on_step) on_step(m);
        res.trace.push_back(std::move(m));
    }
    return res;
}

struct MaskedAccuracy {
    std::vector<double> speech;  // per codebook
    std::vector<double> audio;   // per audio codebook, when evaluated
    double mean = 0.0;           // mean over speech codebooks
    double audio_mean = 0.0;
    std::size_t masked_frames = 0;
};

// Masks every utterance (stream = utterance index) and scores argmax head
// predictions against the targets on masked frames only.
inline MaskedAccuracy eval_masked_accuracy(const StudentModel& model, const std::vector<Utterance>& data,
                                           const Quantiser& q_speech, const Quantiser* q_audio,
                                           const MaskConfig& mask_cfg, std::uint64_t seed,
                                           InterpMode interp = InterpMode::nearest) {
    if (model.speech_heads.size() != q_speech.n_codebooks())
        throw ShapeError("eval_masked_accuracy: head count differs from speech codebook count");
    if (q_audio && model.audio_heads.size() != q_audio->n_codebooks())
        throw ShapeError("eval_masked_accuracy: head count differs from audio codebook count");
    const auto prepared = detail::prepare(data, q_speech, q_audio, interp, false, false);

    MaskedAccuracy out;
    std::vector<std::size_t> correct(q_speech.n_codebooks(), 0);
    std::vector<std::size_t> correct_audio(q_audio ? q_audio->n_codebooks() : 0, 0);
    for (std::size_t u = 0; u < prepared.size(); ++u) {
        const auto& p = prepared[u];
        const MaskSpec mask = sample_mask(p.input.length(), mask_cfg, seed, u);
        if (mask.count() == 0) continue;
        const ForwardCache fc = student_forward(apply_mask(p.input, mask, model.mask_embedding), model);
        out.masked_frames += mask.count();
        auto score = [&](const std::vector<Matrix>& heads, const TokenSequence& z, std::vector<std::size_t>& hits) {
            for (std::size_t n = 0; n < heads.size(); ++n) {
                const Matrix logits = head_logits(fc.output, heads[n]);
                for (std::size_t t : mask.indices)
                    if (argmax(logits.row(t)) == z.at(t, n)) ++hits[n];
            }
        };
        score(model.speech_heads, p.speech, correct);
        if (q_audio) score(model.audio_heads, *p.audio, correct_audio);
    }
    if (out.masked_frames == 0) throw ConfigError("eval_masked_accuracy: no masked frames in the evaluation set");
    const double total = static_cast<double>(out.masked_frames);
    for (std::size_t c : correct) out.speech.push_back(static_cast<double>(c) / total);
    for (std::size_t c : correct_audio) out.audio.push_back(static_cast<double>(c) / total);
    for (double a : out.speech) out.mean += a / static_cast<double>(out.speech.size());
    for (double a : out.audio) out.audio_mean += a / static_cast<double>(out.audio.size());
    return out;
}

} // namespace mvq::ssl
