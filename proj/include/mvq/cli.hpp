#pragma once

// `mvq` command-line front end. Exit codes: 0 success, 1 usage error,
// 2 data / format / configuration error.
//
// Metrics traces are tab-separated with one header line. Pretraining writes
//   step loss_total loss_masked loss_unmasked [loss_audio] acc_cb_<n>... [acc_audio_cb_<n>...]
// and quantiser training writes
//   step loss_total loss_residual loss_prediction loss_reg entropy_cb_<n>...

#include <CLI11.hpp>

#include <cstdint>
#include <cstdio>
#include <algorithm>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "mvq/error.hpp"
#include "mvq/io/config.hpp"
#include "mvq/io/formats.hpp"
#include "mvq/io/synth.hpp"
#include "mvq/quantiser.hpp"
#include "mvq/ssl/pretrain.hpp"

namespace mvq::cli {

// Shortest text that round-trips the double exactly.
inline std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace detail {

// Line-delimited metrics sink: a file, standard output ("-"), or nothing.
class MetricsSink {
public:
    MetricsSink(const std::string& path, std::ostream& stdout_stream) {
        if (path.empty()) return;
        if (path == "-") {
            os_ = &stdout_stream;
            return;
        }
        file_ = std::make_unique<std::ofstream>(path, std::ios::trunc);
        if (!*file_) throw FileError("cannot open metrics file '" + path + "'");
        os_ = file_.get();
    }

    void line(const std::vector<std::string>& fields) {
        if (!os_) return;
        for (std::size_t i = 0; i < fields.size(); ++i) *os_ << (i ? "\t" : "") << fields[i];
        *os_ << '\n';
    }

private:
    std::unique_ptr<std::ofstream> file_;
    std::ostream* os_ = nullptr;
};

template <class T>
void override_if_set(const CLI::Option* opt, T& target, const T& value) {
    if (opt->count() > 0) target = value;
}

} // namespace detail

inline int run(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Multi-codebook vector quantisation and masked token prediction toolkit", "mvq"};
    app.require_subcommand(1);
    app.option_defaults()->always_capture_default();

    std::function<void()> action;

    // ---- gen-synth -----------------------------------------------------
    io::SynthConfig synth;
    std::string synth_domain = "unspecified", synth_out;
    auto* gen = app.add_subcommand("gen-synth", "Generate a synthetic HMM feature sequence (MVQF)");
    gen->add_option("--states", synth.num_states, "Number of hidden states M");
    gen->add_option("--dim", synth.dim, "Feature dimension d");
    gen->add_option("--frames", synth.length, "Number of frames T");
    gen->add_option("--p-stay", synth.p_stay, "Self-loop probability of the hidden chain");
    gen->add_option("--sigma", synth.sigma, "Emission noise std");
    gen->add_option("--separation", synth.separation, "Norm of every state mean");
    gen->add_option("--frame-rate", synth.frame_rate_hz, "Frame rate in Hz");
    gen->add_option("--domain", synth_domain, "Domain tag: speech, audio or unspecified");
    gen->add_option("--seed", synth.seed, "Random seed")->required();
    gen->add_option("--out", synth_out, "Output MVQF file")->required();
    gen->callback([&] {
        action = [&] {
            synth.domain = parse_domain(synth_domain);
            const auto xs = io::generate_synthetic(synth);
            io::write_features(synth_out, xs);
            out << "wrote " << synth_out << " T=" << xs.length() << " d=" << xs.dim() << "\n";
        };
    });

    // ---- train-quantiser -----------------------------------------------
    const QuantiserTrainConfig qdef;
    QuantiserTrainConfig qflags = qdef;
    std::string tq_features, tq_out, tq_metrics, tq_config;
    auto* tq = app.add_subcommand("train-quantiser", "Train an MVQ quantiser on a feature file");
    tq->add_option("--features", tq_features, "Training features (MVQF)")->required();
    auto* o_n = tq->add_option("--n", qflags.n_codebooks, "Number of codebooks N");
    auto* o_k = tq->add_option("--k", qflags.codebook_size, "Codebook size K");
    auto* o_r = tq->add_option("--refine-steps", qflags.refine_steps, "Refinement sweeps R");
    auto* o_beta = tq->add_option("--beta", qflags.beta, "Scale of the code-usage regulariser");
    auto* o_qsteps = tq->add_option("--steps", qflags.steps, "Adam steps");
    auto* o_qbatch = tq->add_option("--batch-size", qflags.batch_size, "Frames per minibatch");
    auto* o_qlr = tq->add_option("--lr", qflags.adam.learning_rate, "Adam learning rate");
    auto* o_noise = tq->add_option("--init-noise-sigma", qflags.init_noise_sigma,
                                   "Code init noise, relative to per-dim data std");
    auto* o_qseed = tq->add_option("--seed", qflags.seed, "Random seed")->required();
    tq->add_option("--config", tq_config, "Config file (flags override it)");
    tq->add_option("--out", tq_out, "Output MVQQ file")->required();
    tq->add_option("--metrics-out", tq_metrics, "Metrics trace file ('-' for stdout)");
    tq->callback([&] {
        action = [&] {
            QuantiserTrainConfig cfg = tq_config.empty() ? qdef : io::parse_config(tq_config).quantiser;
            detail::override_if_set(o_n, cfg.n_codebooks, qflags.n_codebooks);
            detail::override_if_set(o_k, cfg.codebook_size, qflags.codebook_size);
            detail::override_if_set(o_r, cfg.refine_steps, qflags.refine_steps);
            detail::override_if_set(o_beta, cfg.beta, qflags.beta);
            detail::override_if_set(o_qsteps, cfg.steps, qflags.steps);
            detail::override_if_set(o_qbatch, cfg.batch_size, qflags.batch_size);
            detail::override_if_set(o_qlr, cfg.adam.learning_rate, qflags.adam.learning_rate);
            detail::override_if_set(o_noise, cfg.init_noise_sigma, qflags.init_noise_sigma);
            detail::override_if_set(o_qseed, cfg.seed, qflags.seed);

            const auto xs = io::read_features(tq_features);
            detail::MetricsSink sink(tq_metrics, out);
            std::vector<std::string> header{"step", "loss_total", "loss_residual", "loss_prediction", "loss_reg"};
            for (std::size_t n = 0; n < cfg.n_codebooks; ++n) header.push_back("entropy_cb_" + std::to_string(n));
            sink.line(header);
            const auto res = train_quantiser(xs, cfg, [&](const QuantiserStepMetrics& m) {
                std::vector<std::string> f{std::to_string(m.step), fmt(m.total), fmt(m.residual), fmt(m.prediction),
                                           fmt(m.reg)};
                for (double h : m.usage_entropy) f.push_back(fmt(h));
                sink.line(f);
            });
            io::write_quantiser(tq_out, res.quantiser);
            // Report the error of the quantiser as stored (f32), so it agrees with eval-recon.
            const auto stored = io::read_quantiser(tq_out);
            out << "N=" << cfg.n_codebooks << " K=" << cfg.codebook_size << " R=" << cfg.refine_steps
                << " beta=" << cfg.beta << " steps=" << cfg.steps << "\n";
            out << "reconstruction_mse=" << fmt(reconstruction_mse(xs, stored)) << "\n";
        };
    });

    // ---- encode --------------------------------------------------------
    std::string enc_features, enc_quantiser, enc_out;
    unsigned enc_threads = 1;
    auto* enc = app.add_subcommand("encode", "Encode features into MVQ tokens (MVQT)");
    enc->add_option("--features", enc_features, "Input features (MVQF)")->required();
    enc->add_option("--quantiser", enc_quantiser, "Quantiser (MVQQ)")->required();
    enc->add_option("--threads", enc_threads, "Worker threads; output does not depend on it");
    enc->add_option("--out", enc_out, "Output MVQT file")->required();
    enc->callback([&] {
        action = [&] {
            const auto q = io::read_quantiser(enc_quantiser);
            const auto zs = encode_sequence(io::read_features(enc_features), q, enc_threads);
            io::write_tokens(enc_out, zs);
            out << "wrote " << enc_out << " T=" << zs.length() << " N=" << zs.n_codebooks << "\n";
        };
    });

    // ---- decode --------------------------------------------------------
    std::string dec_tokens, dec_quantiser, dec_out, dec_domain = "unspecified";
    double dec_rate = 50.0;
    auto* dec = app.add_subcommand("decode", "Reconstruct features from MVQ tokens");
    dec->add_option("--tokens", dec_tokens, "Input tokens (MVQT)")->required();
    dec->add_option("--quantiser", dec_quantiser, "Quantiser (MVQQ)")->required();
    dec->add_option("--frame-rate", dec_rate, "Frame rate recorded in the output");
    dec->add_option("--domain", dec_domain, "Domain tag recorded in the output");
    dec->add_option("--out", dec_out, "Output MVQF file")->required();
    dec->callback([&] {
        action = [&] {
            const auto q = io::read_quantiser(dec_quantiser);
            const auto xs = decode_sequence(io::read_tokens(dec_tokens), q, dec_rate, parse_domain(dec_domain));
            io::write_features(dec_out, xs);
            out << "wrote " << dec_out << " T=" << xs.length() << " d=" << xs.dim() << "\n";
        };
    });

    // ---- eval-recon ----------------------------------------------------
    std::string er_features, er_quantiser;
    auto* er = app.add_subcommand("eval-recon", "Mean squared reconstruction error of a quantiser");
    er->add_option("--features", er_features, "Features (MVQF)")->required();
    er->add_option("--quantiser", er_quantiser, "Quantiser (MVQQ)")->required();
    er->callback([&] {
        action = [&] {
            const auto xs = io::read_features(er_features);
            const auto q = io::read_quantiser(er_quantiser);
            out << "frames=" << xs.length() << "\n";
            out << "mse=" << fmt(reconstruction_mse(xs, q)) << "\n";
        };
    });

    // ---- pretrain ------------------------------------------------------
    const ssl::SslTrainConfig sdef;
    ssl::SslTrainConfig sflags = sdef;
    std::string strategy = std::string(ssl::to_string(sdef.strategy)), interp = "nearest";
    std::vector<std::string> pt_speech, pt_audio;
    std::string pt_speech_q, pt_audio_q, pt_speech_teacher, pt_audio_teacher, pt_out, pt_metrics, pt_config;
    auto* pt = app.add_subcommand("pretrain", "Masked multi-codebook token prediction pretraining");
    pt->add_option("--speech-features", pt_speech, "Speech-domain student inputs (MVQF)")->required();
    pt->add_option("--speech-quantiser", pt_speech_q, "Quantiser producing speech targets (MVQQ)")->required();
    pt->add_option("--audio-features", pt_audio, "Audio-domain student inputs (MVQF); enables dual mode");
    pt->add_option("--audio-quantiser", pt_audio_q, "Quantiser producing audio targets (MVQQ); enables dual mode");
    pt->add_option("--speech-teacher", pt_speech_teacher,
                   "Teacher features for the first speech input (default: the input itself)");
    pt->add_option("--audio-teacher", pt_audio_teacher,
                   "Teacher features for the first audio input (default: the input itself)");
    auto* o_strategy = pt->add_option("--strategy", strategy, "Dual-domain strategy: joint, disjoint, asymmetrical");
    auto* o_alpha = pt->add_option("--alpha", sflags.alpha, "Weight of masked vs unmasked frames");
    auto* o_lambda = pt->add_option("--lambda", sflags.lambda, "Weight of the audio-target loss");
    auto* o_pstart = pt->add_option("--p-start", sflags.mask.p_start, "Probability a frame starts a masked span");
    auto* o_span = pt->add_option("--span", sflags.mask.span, "Masked span length");
    auto* o_dmodel = pt->add_option("--d-model", sflags.student.d_model, "Encoder width");
    auto* o_layers = pt->add_option("--layers", sflags.student.layers, "Number of conv blocks");
    auto* o_window = pt->add_option("--window", sflags.student.window, "Conv window (odd)");
    auto* o_steps = pt->add_option("--steps", sflags.steps, "Training steps");
    auto* o_batch = pt->add_option("--batch-size", sflags.batch_size, "Sequences per batch");
    auto* o_seqlen = pt->add_option("--seq-len", sflags.seq_len, "Frames per training sequence");
    auto* o_lr = pt->add_option("--lr", sflags.adam.learning_rate, "Adam learning rate");
    auto* o_sratio = pt->add_option("--speech-ratio", sflags.speech_ratio, "Speech batches per domain cycle");
    auto* o_aratio = pt->add_option("--audio-ratio", sflags.audio_ratio, "Audio batches per domain cycle");
    auto* o_interp = pt->add_option("--interp", interp, "Teacher frame-rate interpolation: nearest or linear");
    auto* o_seed = pt->add_option("--seed", sflags.seed, "Random seed")->required();
    pt->add_option("--config", pt_config, "Config file (flags override it)");
    pt->add_option("--out", pt_out, "Output student model (MVQS)")->required();
    pt->add_option("--metrics-out", pt_metrics, "Metrics trace file ('-' for stdout)");
    pt->callback([&] {
        action = [&] {
            ssl::SslTrainConfig cfg = pt_config.empty() ? sdef : io::parse_config(pt_config).ssl;
            if (o_strategy->count()) cfg.strategy = ssl::parse_strategy(strategy);
            if (o_interp->count()) cfg.interp = ssl::parse_interp_mode(interp);
            detail::override_if_set(o_alpha, cfg.alpha, sflags.alpha);
            detail::override_if_set(o_lambda, cfg.lambda, sflags.lambda);
            detail::override_if_set(o_pstart, cfg.mask.p_start, sflags.mask.p_start);
            detail::override_if_set(o_span, cfg.mask.span, sflags.mask.span);
            detail::override_if_set(o_dmodel, cfg.student.d_model, sflags.student.d_model);
            detail::override_if_set(o_layers, cfg.student.layers, sflags.student.layers);
            detail::override_if_set(o_window, cfg.student.window, sflags.student.window);
            detail::override_if_set(o_steps, cfg.steps, sflags.steps);
            detail::override_if_set(o_batch, cfg.batch_size, sflags.batch_size);
            detail::override_if_set(o_seqlen, cfg.seq_len, sflags.seq_len);
            detail::override_if_set(o_lr, cfg.adam.learning_rate, sflags.adam.learning_rate);
            detail::override_if_set(o_sratio, cfg.speech_ratio, sflags.speech_ratio);
            detail::override_if_set(o_aratio, cfg.audio_ratio, sflags.audio_ratio);
            detail::override_if_set(o_seed, cfg.seed, sflags.seed);

            const bool dual = !pt_audio_q.empty();
            if (dual != !pt_audio.empty())
                throw ConfigError("--audio-features and --audio-quantiser must be given together");
            const auto q_speech = io::read_quantiser(pt_speech_q);
            std::optional<Quantiser> q_audio;
            if (dual) q_audio = io::read_quantiser(pt_audio_q);

            std::vector<ssl::Utterance> speech, audio;
            for (const auto& p : pt_speech) speech.push_back({io::read_features(p), {}, {}});
            for (const auto& p : pt_audio) audio.push_back({io::read_features(p), {}, {}});
            if (!pt_speech_teacher.empty()) speech.front().speech_teacher = io::read_features(pt_speech_teacher);
            if (!pt_audio_teacher.empty()) {
                if (audio.empty()) throw ConfigError("--audio-teacher needs --audio-features");
                audio.front().audio_teacher = io::read_features(pt_audio_teacher);
            }

            out << "mode=" << (dual ? "dual" : "single") << "\n";
            out << "alpha=" << cfg.alpha << "\n";
            out << "lambda=" << cfg.lambda << "\n";
            out << "strategy=" << ssl::to_string(cfg.strategy) << "\n";
            out << "p_start=" << cfg.mask.p_start << "\nspan=" << cfg.mask.span << "\n";
            out << "d_model=" << cfg.student.d_model << "\nlayers=" << cfg.student.layers
                << "\nwindow=" << cfg.student.window << "\n";
            out << "steps=" << cfg.steps << "\nbatch_size=" << cfg.batch_size << "\nseq_len=" << cfg.seq_len
                << "\nlr=" << cfg.adam.learning_rate << "\nseed=" << cfg.seed << "\n";

            detail::MetricsSink sink(pt_metrics, out);
            std::vector<std::string> header{"step", "loss_total", "loss_masked", "loss_unmasked"};
            if (dual) header.push_back("loss_audio");
            for (std::size_t n = 0; n < q_speech.n_codebooks(); ++n) header.push_back("acc_cb_" + std::to_string(n));
            if (dual)
                for (std::size_t n = 0; n < q_audio->n_codebooks(); ++n)
                    header.push_back("acc_audio_cb_" + std::to_string(n));
            sink.line(header);

            const auto res = ssl::pretrain(speech, audio, q_speech, q_audio ? &*q_audio : nullptr, cfg,
                                           [&](const ssl::PretrainStepMetrics& m) {
                                               std::vector<std::string> f{std::to_string(m.step), fmt(m.loss_total),
                                                                          fmt(m.loss_masked), fmt(m.loss_unmasked)};
                                               if (dual) f.push_back(fmt(m.loss_audio));
                                               for (double a : m.acc) f.push_back(fmt(a));
                                               for (double a : m.acc_audio) f.push_back(fmt(a));
                                               sink.line(f);
                                           });
            io::write_student(pt_out, res.model);
            out << "final_loss_total=" << fmt(res.trace.back().loss_total) << "\n";
        };
    });

    // ---- eval-pretrain -------------------------------------------------
    std::vector<std::string> ep_features;
    std::string ep_model, ep_speech_q, ep_audio_q;
    ssl::MaskConfig ep_mask;
    std::uint64_t ep_seed = 0;
    auto* ep = app.add_subcommand("eval-pretrain", "Masked top-1 accuracy of a pretrained student");
    ep->add_option("--model", ep_model, "Student model (MVQS)")->required();
    ep->add_option("--features", ep_features, "Evaluation inputs (MVQF)")->required();
    ep->add_option("--speech-quantiser", ep_speech_q, "Quantiser producing speech targets (MVQQ)")->required();
    ep->add_option("--audio-quantiser", ep_audio_q, "Quantiser producing audio targets (MVQQ)");
    ep->add_option("--p-start", ep_mask.p_start, "Probability a frame starts a masked span");
    ep->add_option("--span", ep_mask.span, "Masked span length");
    ep->add_option("--seed", ep_seed, "Mask seed")->required();
    ep->callback([&] {
        action = [&] {
            const auto model = io::read_student(ep_model);
            const auto q_speech = io::read_quantiser(ep_speech_q);
            std::optional<Quantiser> q_audio;
            if (!ep_audio_q.empty()) q_audio = io::read_quantiser(ep_audio_q);
            std::vector<ssl::Utterance> data;
            for (const auto& p : ep_features) data.push_back({io::read_features(p), {}, {}});
            const auto acc =
                ssl::eval_masked_accuracy(model, data, q_speech, q_audio ? &*q_audio : nullptr, ep_mask, ep_seed);
            out << "masked_frames=" << acc.masked_frames << "\n";
            for (std::size_t n = 0; n < acc.speech.size(); ++n) out << "acc_cb_" << n << "=" << fmt(acc.speech[n]) << "\n";
            out << "acc_mean=" << fmt(acc.mean) << "\n";
            for (std::size_t n = 0; n < acc.audio.size(); ++n)
                out << "acc_audio_cb_" << n << "=" << fmt(acc.audio[n]) << "\n";
            if (!acc.audio.empty()) out << "acc_audio_mean=" << fmt(acc.audio_mean) << "\n";
            out << "chance=" << fmt(1.0 / static_cast<double>(q_speech.codebook_size())) << "\n";
        };
    });

    // ---- inspect -------------------------------------------------------
    std::string inspect_path;
    auto* ins = app.add_subcommand("inspect", "Print the header fields of an MVQF/MVQQ/MVQT/MVQS file");
    ins->add_option("file", inspect_path, "File to inspect")->required();
    ins->callback([&] { action = [&] { out << io::describe(io::read_file_bytes(inspect_path)); }; });

    std::reverse(args.begin(), args.end());
    try {
        app.parse(args);
    } catch (const CLI::Success& e) {
        return app.exit(e, out, err), 0;
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return 1;
    }
    try {
        action();
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return run(std::move(args), out, err);
}

} // namespace mvq::cli
