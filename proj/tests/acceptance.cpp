// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails.
//
// Usage: mvq_acceptance <golden-dir> [criterion...]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <bit>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "mvq/cli.hpp"
#include "mvq/io/formats.hpp"
#include "mvq/io/synth.hpp"
#include "mvq/quantiser.hpp"
#include "mvq/ssl/loss.hpp"
#include "mvq/ssl/pretrain.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using namespace mvq;
using mvq::testing::BruteForce;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmtd(double v, int prec = 4) {
    std::ostringstream os;
    os.precision(prec);
    os << v;
    return os.str();
}

fs::path g_golden;

// Synthetic data for criteria 4-6: M=8 states, d=16, p_stay 0.95. The
// quantiser criteria use sigma 0.3: at the generator default (0.03) two
// codebooks already reach the noise floor d * sigma^2 and there is nothing
// left for more codebooks to capture. The pretext criterion uses the default,
// where states are identifiable from single frames.
constexpr double kQuantiserSigma = 0.3;
constexpr double kPretextSigma = 0.03;

io::SynthConfig synth_cfg(std::size_t length, std::uint64_t seed, double sigma) {
    io::SynthConfig c;
    c.num_states = 8;
    c.dim = 16;
    c.p_stay = 0.95;
    c.length = length;
    c.seed = seed;
    c.sigma = sigma;
    return c;
}

QuantiserTrainConfig quantiser_cfg(std::size_t n) {
    QuantiserTrainConfig c;
    c.n_codebooks = n;
    c.codebook_size = 8;
    c.steps = 2000;
    c.beta = 0.1;
    c.seed = 1;
    return c;
}

// ---------------------------------------------------------------------------

Outcome encode_oracle() {
    const auto t0 = Clock::now();
    Rng rng(1001, 0);
    std::size_t exact = 0, worse = 0;
    double worst_excess = 0.0;
    const std::size_t trials = 1000;
    for (std::size_t i = 0; i < trials; ++i) {
        const auto q = testing::random_quantiser(2, 4, 3, rng, 1.0, 5);
        const auto x = testing::random_vector(3, rng, 1.5);
        const auto z = encode(x, q);
        const BruteForce best = testing::brute_force_encode(x, q);
        if (z == best.z) {
            ++exact;
            continue;
        }
        const double e = testing::sq_err(x, z, q);
        const double excess = best.err > 0.0 ? (e - best.err) / best.err : (e > 0.0 ? 1e300 : 0.0);
        worst_excess = std::max(worst_excess, excess);
        if (excess > 0.05) ++worse;
    }
    const double rate = static_cast<double>(exact) / trials;
    const double secs = seconds_since(t0);
    return {rate >= 0.95 && worse == 0 && secs < 5.0,
            "match " + fmtd(100 * rate) + "% (>= 95%), worst excess " + fmtd(100 * worst_excess) +
                "% (<= 5%), " + fmtd(secs, 3) + " s (< 5 s)"};
}

Outcome refine_monotone() {
    Rng rng(2002, 0);
    std::size_t single_moves = 0, violations = 0;
    double worst = 0.0;
    for (std::size_t i = 0; i < 10000; ++i) {
        const std::size_t n = 1 + rng.index(4), k = 2 + rng.index(7), d = 1 + rng.index(6);
        const auto q = testing::random_quantiser(n, k, d, rng, 1.0, 1 + rng.index(5));
        const auto x = testing::random_vector(d, rng, 2.0);
        TokenTuple z(n);
        for (auto& v : z) v = static_cast<Token>(rng.index(k));
        refine(x, z, q, [&](const RefineEvent& ev) {
            if (ev.first != ev.second) return;
            ++single_moves;
            if (ev.after > ev.before + 1e-12) {
                ++violations;
                worst = std::max(worst, ev.after - ev.before);
            }
        });
    }
    return {violations == 0 && single_moves > 0,
            std::to_string(single_moves) + " single-coordinate updates, " + std::to_string(violations) +
                " increases (worst " + fmtd(worst) + ")"};
}

// --- gradient checks -------------------------------------------------------

double check_quantiser_loss(Rng& rng) {
    const std::size_t b = 5, n = 3, k = 5, d = 3;
    const Quantiser q0 = testing::random_quantiser(n, k, d, rng, 0.7);
    const Matrix batch = testing::random_matrix(b, d, rng);
    const TokenSequence z = testing::random_tokens(b, n, k, rng);
    const double beta = 0.3;
    const auto loss = quantiser_loss_with_tokens(batch, z, q0, beta);

    std::vector<double> x, g;
    for (auto* v : {&q0.codebooks(), &q0.weights(), &q0.biases()}) x.insert(x.end(), v->begin(), v->end());
    for (auto* v : {&loss.grad.codebooks, &loss.grad.weights, &loss.grad.biases}) g.insert(g.end(), v->begin(), v->end());
    auto f = [&](std::span<const double> p) {
        Quantiser q = q0;
        std::size_t off = 0;
        for (auto* v : {&q.codebooks(), &q.weights(), &q.biases()})
            for (double& e : *v) e = p[off++];
        return quantiser_loss_with_tokens(batch, z, q, beta).total;
    };
    return finite_difference_check(f, x, g);
}

double check_single_loss(Rng& rng) {
    const std::size_t t = 7, n = 3, k = 5, dm = 6;
    const Matrix h = testing::random_matrix(t, dm, rng);
    std::vector<Matrix> heads;
    for (std::size_t i = 0; i < n; ++i) heads.push_back(testing::random_matrix(k, dm, rng, 0.5));
    const auto z = testing::random_tokens(t, n, k, rng);
    const auto mask = testing::random_mask(t, rng);
    const double alpha = 0.3;
    const auto loss = ssl::single_domain_loss(h, z, mask, heads, alpha);

    std::vector<double> x = h.data, g = loss.d_h.data;
    for (std::size_t i = 0; i < n; ++i) {
        x.insert(x.end(), heads[i].data.begin(), heads[i].data.end());
        g.insert(g.end(), loss.d_heads[i].data.begin(), loss.d_heads[i].data.end());
    }
    auto f = [&](std::span<const double> p) {
        Matrix hh = h;
        std::vector<Matrix> ww = heads;
        std::copy(p.begin(), p.begin() + static_cast<std::ptrdiff_t>(hh.size()), hh.data.begin());
        std::size_t off = hh.size();
        for (auto& w : ww)
            for (double& e : w.data) e = p[off++];
        return ssl::single_domain_loss(hh, z, mask, ww, alpha).total;
    };
    return finite_difference_check(f, x, g);
}

double check_dual_loss(Rng& rng) {
    const std::size_t t = 6, ns = 2, ks = 5, na = 3, ka = 4, dm = 5;
    const Matrix h = testing::random_matrix(t, dm, rng);
    std::vector<Matrix> sh, ah;
    for (std::size_t i = 0; i < ns; ++i) sh.push_back(testing::random_matrix(ks, dm, rng, 0.5));
    for (std::size_t i = 0; i < na; ++i) ah.push_back(testing::random_matrix(ka, dm, rng, 0.5));
    const auto zs = testing::random_tokens(t, ns, ks, rng);
    const auto za = testing::random_tokens(t, na, ka, rng);
    const auto mask = testing::random_mask(t, rng);
    double worst = 0.0;
    for (auto strategy : {ssl::DualStrategy::joint, ssl::DualStrategy::disjoint, ssl::DualStrategy::asymmetrical})
        for (bool is_audio : {false, true}) {
            const double lambda = 0.4, alpha = 0.6;
            const auto loss = ssl::dual_domain_loss(h, zs, &za, mask, sh, ah, is_audio, lambda, strategy, alpha);
            std::vector<double> x = h.data, g = loss.d_h.data;
            for (std::size_t i = 0; i < ns; ++i) {
                x.insert(x.end(), sh[i].data.begin(), sh[i].data.end());
                g.insert(g.end(), loss.d_speech_heads[i].data.begin(), loss.d_speech_heads[i].data.end());
            }
            for (std::size_t i = 0; i < na; ++i) {
                x.insert(x.end(), ah[i].data.begin(), ah[i].data.end());
                g.insert(g.end(), loss.d_audio_heads[i].data.begin(), loss.d_audio_heads[i].data.end());
            }
            auto f = [&](std::span<const double> p) {
                Matrix hh = h;
                auto s2 = sh;
                auto a2 = ah;
                std::size_t off = 0;
                for (double& e : hh.data) e = p[off++];
                for (auto& w : s2)
                    for (double& e : w.data) e = p[off++];
                for (auto& w : a2)
                    for (double& e : w.data) e = p[off++];
                return ssl::dual_domain_loss(hh, zs, &za, mask, s2, a2, is_audio, lambda, strategy, alpha).total;
            };
            worst = std::max(worst, finite_difference_check(f, x, g));
        }
    return worst;
}

double check_student(Rng& rng) {
    ssl::StudentConfig cfg{.d_in = 3, .d_model = 6, .layers = 2, .window = 3};
    auto model = ssl::init_student(cfg, 2, 4, 0, 0, 77);
    // Non-zero biases so every parameter is exercised away from the init.
    for (auto& b : model.blocks)
        for (double& v : b.bias) v = rng.normal() * 0.3;
    for (double& v : model.in_bias) v = rng.normal() * 0.3;
    for (auto& hd : model.speech_heads)
        for (double& v : hd.data) v = rng.normal() * 0.5;
    const std::size_t t = 8;
    FeatureSequence xs(t, cfg.d_in);
    for (double& v : xs.frames.data) v = rng.normal();
    const auto z = testing::random_tokens(t, 2, 4, rng);
    const auto mask = ssl::MaskSpec::from_indices(t, {2, 3, 6});
    const double alpha = 0.7;
    std::vector<double> g;
    testing::student_objective(model, xs, mask, z, alpha, &g);
    auto f = [&](std::span<const double> p) {
        auto m = model;
        testing::unflatten(p, m);
        return testing::student_objective(m, xs, mask, z, alpha);
    };
    return finite_difference_check(f, testing::flatten(model), g);
}

Outcome gradient_checks() {
    const auto t0 = Clock::now();
    Rng rng(3003, 0);
    const double eq = check_quantiser_loss(rng);
    const double es = check_single_loss(rng);
    const double ed = check_dual_loss(rng);
    const double ef = check_student(rng);
    const double secs = seconds_since(t0);
    const double tol = 1e-4;
    return {eq < tol && es < tol && ed < tol && ef < tol && secs < 30.0,
            "max rel err quantiser " + fmtd(eq, 3) + ", single " + fmtd(es, 3) + ", dual " + fmtd(ed, 3) +
                ", student " + fmtd(ef, 3) + " (< 1e-4), " + fmtd(secs, 3) + " s (< 30 s)"};
}

// --- training ----------------------------------------------------------------

Outcome quantiser_training() {
    const auto t0 = Clock::now();
    const auto xs = io::generate_synthetic(synth_cfg(5000, 1, kQuantiserSigma));
    const auto cfg = quantiser_cfg(4);
    const double init_mse = reconstruction_mse(xs, init_quantiser(xs, cfg));
    const auto q = train_quantiser(xs, cfg).quantiser;
    const double final_mse = reconstruction_mse(xs, q);
    const auto zs = encode_sequence(xs, q);
    double min_ratio = 1e300;
    for (std::size_t n = 0; n < q.n_codebooks(); ++n)
        min_ratio = std::min(min_ratio, hard_usage_entropy(zs, n) / std::log(8.0));
    const double secs = seconds_since(t0);
    const double ratio = final_mse / init_mse;
    return {ratio < 0.5 && min_ratio > 0.6 && secs < 60.0,
            "sigma " + fmtd(kQuantiserSigma) + ": MSE " + fmtd(init_mse) + " -> " + fmtd(final_mse) + " (ratio " + fmtd(ratio, 3) +
                " < 0.5), min usage entropy " + fmtd(min_ratio, 3) + " ln K (> 0.6), " + fmtd(secs, 3) +
                " s (< 60 s)"};
}

Outcome codebook_trend() {
    const auto t0 = Clock::now();
    const auto xs = io::generate_synthetic(synth_cfg(5000, 1, kQuantiserSigma));
    std::vector<double> mse;
    for (std::size_t n : {1, 2, 4}) mse.push_back(reconstruction_mse(xs, train_quantiser(xs, quantiser_cfg(n)).quantiser));
    const double secs = seconds_since(t0);
    return {mse[0] > mse[1] && mse[1] > mse[2] && secs < 180.0,
            "sigma " + fmtd(kQuantiserSigma) + ": final MSE N=1 " + fmtd(mse[0]) + ", N=2 " + fmtd(mse[1]) + ", N=4 " + fmtd(mse[2]) + ", " +
                fmtd(secs, 3) + " s (< 180 s)"};
}

Outcome pretext_learnability() {
    const auto t0 = Clock::now();
    const auto xs = io::generate_synthetic(synth_cfg(5000, 1, kPretextSigma));
    const auto q = train_quantiser(xs, quantiser_cfg(4)).quantiser;
    // Train on the first 4000 frames, score on the held-out last 1000.
    const std::vector<ssl::Utterance> train{{xs.slice(0, 4000), {}, {}}};
    const std::vector<ssl::Utterance> test{{xs.slice(4000, 1000), {}, {}}};

    auto run = [&](double alpha) {
        ssl::SslTrainConfig c;
        c.alpha = alpha;
        c.steps = 3000;
        c.batch_size = 8;
        c.adam.learning_rate = 3e-3;
        c.student = {.d_in = 16, .d_model = 16, .layers = 3, .window = 13};
        c.seed = 3;
        const auto r = ssl::pretrain(train, {}, q, nullptr, c);
        return ssl::eval_masked_accuracy(r.model, test, q, nullptr, c.mask, 7).mean;
    };
    const double acc_half = run(0.5);
    const double acc_zero = run(0.0);
    const double secs = seconds_since(t0);
    const double chance = 1.0 / 8.0;
    return {acc_half >= 5.0 * chance && acc_zero < acc_half && secs < 300.0,
            "sigma " + fmtd(kPretextSigma) + ": held-out masked acc alpha=0.5 " + fmtd(acc_half, 3) + " (>= " + fmtd(5 * chance, 3) + "), alpha=0.0 " +
                fmtd(acc_zero, 3) + ", " + fmtd(secs, 3) + " s (< 300 s)"};
}

// --- loss identities -----------------------------------------------------

bool bitwise_equal(const Matrix& a, const Matrix& b) {
    return a.same_shape(b) && std::memcmp(a.data.data(), b.data.data(), a.data.size() * sizeof(double)) == 0;
}

bool all_zero(const std::vector<Matrix>& ms) {
    for (const auto& m : ms)
        for (double v : m.data)
            if (v != 0.0 || std::signbit(v)) return false;
    return true;
}

Outcome dual_gating() {
    Rng rng(7007, 0);
    bool ok = true;
    double worst = 0.0;
    std::string why;
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t t = 4 + rng.index(8), ns = 1 + rng.index(3), na = 1 + rng.index(3), dm = 2 + rng.index(6);
        const std::size_t ks = 2 + rng.index(6), ka = 2 + rng.index(6);
        const Matrix h = testing::random_matrix(t, dm, rng);
        std::vector<Matrix> sh, ah;
        for (std::size_t i = 0; i < ns; ++i) sh.push_back(testing::random_matrix(ks, dm, rng));
        for (std::size_t i = 0; i < na; ++i) ah.push_back(testing::random_matrix(ka, dm, rng));
        const auto zs = testing::random_tokens(t, ns, ks, rng);
        const auto za = testing::random_tokens(t, na, ka, rng);
        const auto mask = testing::random_mask(t, rng);
        const double alpha = rng.uniform(), lambda = 0.05 + rng.uniform();

        const auto ls = ssl::single_domain_loss(h, zs, mask, sh, alpha);
        const auto la = ssl::single_domain_loss(h, za, mask, ah, alpha);

        // Asymmetrical, speech input: exactly the speech-only loss.
        const auto a0 = ssl::dual_domain_loss(h, zs, &za, mask, sh, ah, false, lambda,
                                              ssl::DualStrategy::asymmetrical, alpha);
        if (!(a0.total == ls.total && bitwise_equal(a0.d_h, ls.d_h) && all_zero(a0.d_audio_heads))) {
            ok = false;
            why = " [asymmetrical is_audio=0 not exact]";
        }
        // lambda = 0 on an audio input: the same.
        const auto a1 =
            ssl::dual_domain_loss(h, zs, &za, mask, sh, ah, true, 0.0, ssl::DualStrategy::asymmetrical, alpha);
        if (!(a1.total == ls.total && bitwise_equal(a1.d_h, ls.d_h) && all_zero(a1.d_audio_heads))) {
            ok = false;
            why = " [lambda=0 not exact]";
        }
        // Documented combinations.
        for (bool is_audio : {false, true}) {
            const double a = is_audio ? 1.0 : 0.0;
            const std::pair<ssl::DualStrategy, double> expect[] = {
                {ssl::DualStrategy::joint, ls.total + lambda * la.total},
                {ssl::DualStrategy::disjoint, (1.0 - a) * ls.total + a * lambda * la.total},
                {ssl::DualStrategy::asymmetrical, ls.total + a * lambda * la.total},
            };
            for (const auto& [s, want] : expect) {
                const auto got = ssl::dual_domain_loss(h, zs, &za, mask, sh, ah, is_audio, lambda, s, alpha).total;
                worst = std::max(worst, std::abs(got - want));
            }
        }
    }
    ok = ok && worst <= 1e-12;
    return {ok, "bitwise gating exact over 50 batches, max strategy-combination error " + fmtd(worst, 3) +
                    " (<= 1e-12)" + why};
}

// Independent oracle: per-codebook masked / unmasked cross-entropy sums.
double oracle_single(const Matrix& h, const TokenSequence& z, const ssl::MaskSpec& mask,
                     const std::vector<Matrix>& heads, double alpha) {
    const std::size_t n_cb = heads.size();
    double total = 0.0;
    for (std::size_t n = 0; n < n_cb; ++n) {
        double lm = 0.0, lu = 0.0;
        for (std::size_t t = 0; t < h.rows; ++t) {
            std::vector<double> logit(heads[n].rows);
            for (std::size_t k = 0; k < logit.size(); ++k) {
                double s = 0.0;
                for (std::size_t i = 0; i < h.cols; ++i) s += heads[n](k, i) * h(t, i);
                logit[k] = s;
            }
            const double mx = *std::max_element(logit.begin(), logit.end());
            double se = 0.0;
            for (double v : logit) se += std::exp(v - mx);
            const double nll = mx + std::log(se) - logit[z.at(t, n)];
            (mask.masked(t) ? lm : lu) += nll;
        }
        total += alpha * lm + (1.0 - alpha) * lu;
    }
    return total / static_cast<double>(n_cb);
}

Outcome loss_algebra() {
    Rng rng(8008, 0);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t t = 1 + rng.index(12), n = 1 + rng.index(4), k = 2 + rng.index(8), dm = 1 + rng.index(6);
        const Matrix h = testing::random_matrix(t, dm, rng);
        std::vector<Matrix> heads;
        for (std::size_t i = 0; i < n; ++i) heads.push_back(testing::random_matrix(k, dm, rng));
        const auto z = testing::random_tokens(t, n, k, rng);
        const auto mask = testing::random_mask(t, rng, rng.uniform());
        const double alpha = rng.uniform();
        const double got = ssl::single_domain_loss(h, z, mask, heads, alpha).total;
        worst = std::max(worst, std::abs(got - oracle_single(h, z, mask, heads, alpha)));
    }
    // Zero heads, nothing masked, alpha = 0: every frame costs ln K.
    const std::size_t t = 9, n = 3, k = 7;
    Rng r2(8009, 0);
    const Matrix h = testing::random_matrix(t, 4, r2);
    const std::vector<Matrix> zero_heads(n, Matrix(k, 4));
    const auto z = testing::random_tokens(t, n, k, r2);
    const double uniform = ssl::single_domain_loss(h, z, ssl::MaskSpec::from_indices(t, {}), zero_heads, 0.0).total;
    const double want = static_cast<double>(t) * std::log(static_cast<double>(k));
    const double err0 = std::abs(uniform - want);
    return {worst <= 1e-12 && err0 <= 1e-9, "max |total - oracle| over 100 cases " + fmtd(worst, 3) +
                                                " (<= 1e-12); uniform case error " + fmtd(err0, 3) + " (<= 1e-9)"};
}

// --- serialization --------------------------------------------------------

Outcome serialization() {
    std::vector<std::string> failures;
    auto expect = [&](bool c, const std::string& what) {
        if (!c) failures.push_back(what);
    };

    // Features: payload survives at f32 precision, bit for bit.
    const auto xs = io::generate_synthetic(synth_cfg(500, 5, kQuantiserSigma));
    const auto xs2 = io::parse_features(io::serialize_features(xs));
    bool bits = xs2.length() == xs.length() && xs2.dim() == xs.dim();
    for (std::size_t i = 0; bits && i < xs.frames.size(); ++i)
        bits = std::bit_cast<std::uint32_t>(static_cast<float>(xs.frames.data[i])) ==
               std::bit_cast<std::uint32_t>(static_cast<float>(xs2.frames.data[i]));
    expect(bits, "feature payload bits");
    expect(io::serialize_features(xs2) == io::serialize_features(xs), "feature re-serialisation");

    // Quantiser: encodings are unchanged by a save/load cycle.
    QuantiserTrainConfig qc = quantiser_cfg(4);
    qc.steps = 300;
    const auto q = train_quantiser(xs, qc).quantiser;
    const auto q1 = io::parse_quantiser(io::serialize_quantiser(q));
    const auto q2 = io::parse_quantiser(io::serialize_quantiser(q1));
    expect(q1 == q2, "quantiser reload idempotent");
    expect(encode_sequence(xs2, q) == encode_sequence(xs2, q1), "encode before/after quantiser reload");

    // Tokens.
    Rng rng(9009, 0);
    const auto z256 = testing::random_tokens(123, 16, 256, rng);
    const auto b256 = io::serialize_tokens(z256);
    expect(b256.size() == io::kTokenHeaderBytes + 123 * 16, "K=256 size header + T*N");
    expect(io::parse_tokens(b256) == z256, "K=256 token roundtrip");
    const auto z300 = testing::random_tokens(40, 3, 300, rng);
    const auto b300 = io::serialize_tokens(z300);
    expect(b300.size() == io::kTokenHeaderBytes + 40 * 3 * 2, "K=300 uses 2-byte tokens");
    expect(io::parse_tokens(b300) == z300, "K=300 token roundtrip");

    // Golden files, written independently with Python struct.pack.
    try {
        const auto fb = io::read_file_bytes(g_golden / "features.mvqf");
        const auto f = io::parse_features(fb);
        bool ok = f.length() == 3 && f.dim() == 4 && f.frame_rate_hz == 50.0 && f.domain == DomainTag::speech;
        for (std::size_t t = 0; ok && t < 3; ++t)
            for (std::size_t i = 0; i < 4; ++i) ok = ok && f.frames(t, i) == static_cast<double>(t * 4 + i) * 0.25 - 1.0;
        expect(ok && io::serialize_features(f) == fb, "golden features");

        const auto qb = io::read_file_bytes(g_golden / "quantiser.mvqq");
        const auto gq = io::parse_quantiser(qb);
        ok = gq.n_codebooks() == 2 && gq.codebook_size() == 3 && gq.dim() == 2 && gq.refine_steps() == 5;
        for (std::size_t j = 0; ok && j < 12; ++j)
            ok = gq.codebooks()[j] == static_cast<double>(j) * 0.5 - 1.0 &&
                 gq.weights()[j] == static_cast<double>(j) * -0.125;
        for (std::size_t j = 0; ok && j < 6; ++j) ok = gq.biases()[j] == static_cast<double>(j) * 0.0625;
        expect(ok && io::serialize_quantiser(gq) == qb, "golden quantiser");

        const auto tb = io::read_file_bytes(g_golden / "tokens_k8.mvqt");
        const auto t8 = io::parse_tokens(tb);
        ok = t8.length() == 4 && t8.n_codebooks == 2 && t8.codebook_size == 8;
        for (std::size_t t = 0; ok && t < 4; ++t)
            for (std::size_t n = 0; n < 2; ++n) ok = ok && t8.at(t, n) == (t * 2 + n) % 8;
        expect(ok && io::serialize_tokens(t8) == tb, "golden tokens K=8");

        const auto wb = io::read_file_bytes(g_golden / "tokens_k300.mvqt");
        const auto t300 = io::parse_tokens(wb);
        expect(t300.tokens == std::vector<Token>{0, 299, 256, 1} && t300.codebook_size == 300 &&
                   io::serialize_tokens(t300) == wb,
               "golden tokens K=300");
    } catch (const std::exception& e) {
        failures.push_back(std::string("golden: ") + e.what());
    }

    std::string detail = failures.empty() ? "features, quantiser, tokens and golden files all roundtrip" : "failed:";
    for (const auto& f : failures) detail += " [" + f + "]";
    return {failures.empty(), detail};
}

// --- determinism ----------------------------------------------------------

std::string slurp(const fs::path& p) {
    const auto b = io::read_file_bytes(p);
    return {b.begin(), b.end()};
}

Outcome determinism() {
    const fs::path root = fs::temp_directory_path() / ("mvq_accept_" + std::to_string(::getpid()));
    fs::remove_all(root);
    std::vector<std::string> failures;

    // Runs the whole pipeline in `dir`; returns stdout of every command plus
    // the bytes of every produced file.
    auto pipeline = [&](const fs::path& dir) {
        fs::create_directories(dir);
        auto p = [&](const char* name) { return (dir / name).string(); };
        std::map<std::string, std::string> outputs;
        auto call = [&](const std::string& label, std::vector<std::string> args) {
            std::ostringstream out, err;
            const int rc = cli::run(args, out, err);
            if (rc != 0) failures.push_back(label + " exited " + std::to_string(rc) + ": " + err.str());
            // Paths differ between the two runs; strip them from the captured text.
            std::string text = out.str();
            for (std::size_t pos; (pos = text.find(dir.string())) != std::string::npos;)
                text.replace(pos, dir.string().size(), "<dir>");
            outputs[label + ".stdout"] = text;
        };
        call("gen-synth", {"gen-synth", "--frames", "600", "--seed", "4", "--out", p("s.mvqf")});
        call("gen-synth-audio",
             {"gen-synth", "--frames", "600", "--seed", "5", "--domain", "audio", "--out", p("a.mvqf")});
        call("train-quantiser", {"train-quantiser", "--features", p("s.mvqf"), "--n", "2", "--k", "8", "--steps",
                                 "100", "--seed", "1", "--out", p("q.mvqq"), "--metrics-out", p("q.tsv")});
        call("train-quantiser-audio", {"train-quantiser", "--features", p("a.mvqf"), "--n", "2", "--k", "4",
                                       "--steps", "100", "--seed", "2", "--out", p("qa.mvqq")});
        call("encode", {"encode", "--features", p("s.mvqf"), "--quantiser", p("q.mvqq"), "--threads", "3", "--out",
                        p("t.mvqt")});
        call("decode", {"decode", "--tokens", p("t.mvqt"), "--quantiser", p("q.mvqq"), "--out", p("r.mvqf")});
        call("eval-recon", {"eval-recon", "--features", p("s.mvqf"), "--quantiser", p("q.mvqq")});
        call("pretrain", {"pretrain", "--speech-features", p("s.mvqf"), "--speech-quantiser", p("q.mvqq"), "--steps",
                          "20", "--d-model", "8", "--seed", "3", "--out", p("m.mvqs"), "--metrics-out", p("m.tsv")});
        call("pretrain-dual", {"pretrain", "--speech-features", p("s.mvqf"), "--speech-quantiser", p("q.mvqq"),
                               "--audio-features", p("a.mvqf"), "--audio-quantiser", p("qa.mvqq"), "--strategy",
                               "joint", "--steps", "20", "--d-model", "8", "--seed", "3", "--out", p("md.mvqs"),
                               "--metrics-out", p("md.tsv")});
        call("eval-pretrain", {"eval-pretrain", "--model", p("m.mvqs"), "--features", p("s.mvqf"),
                               "--speech-quantiser", p("q.mvqq"), "--seed", "9"});
        call("inspect", {"inspect", p("q.mvqq")});
        for (const auto& e : fs::directory_iterator(dir)) outputs[e.path().filename().string()] = slurp(e.path());
        return outputs;
    };

    std::size_t compared = 0;
    try {
        const auto a = pipeline(root / "a");
        const auto b = pipeline(root / "b");
        if (a.size() != b.size()) failures.push_back("different artifact sets");
        for (const auto& [name, bytes] : a) {
            const auto it = b.find(name);
            if (it == b.end() || it->second != bytes) failures.push_back(name + " differs");
            ++compared;
        }
        // Encoding must not depend on the worker count either.
        std::ostringstream o, e;
        cli::run({"encode", "--features", (root / "a" / "s.mvqf").string(), "--quantiser",
                  (root / "a" / "q.mvqq").string(), "--threads", "1", "--out", (root / "t1.mvqt").string()},
                 o, e);
        if (slurp(root / "t1.mvqt") != a.at("t.mvqt")) failures.push_back("encode output depends on --threads");
    } catch (const std::exception& e) {
        failures.push_back(e.what());
    }
    fs::remove_all(root);
    std::string detail = std::to_string(compared) + " artifacts/outputs byte-identical across reruns";
    if (!failures.empty()) {
        detail = "failed:";
        for (const auto& f : failures) detail += " [" + f + "]";
    }
    return {failures.empty(), detail};
}

} // namespace

int main(int argc, char** argv) {
    g_golden = argc > 1 ? fs::path(argv[1]) : fs::path("tests/golden");
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"1 encode-oracle equivalence", encode_oracle},
        {"2 refinement monotonicity", refine_monotone},
        {"3 gradient checks", gradient_checks},
        {"4 quantiser training", quantiser_training},
        {"5 codebook-count trend", codebook_trend},
        {"6 pretext learnability", pretext_learnability},
        {"7 dual-domain gating exactness", dual_gating},
        {"8 loss algebra", loss_algebra},
        {"9 serialization", serialization},
        {"10 determinism", determinism},
    };
    std::vector<std::string> only(argv + std::min(argc, 2), argv + argc);
    int failed = 0;
    for (const auto& [name, fn] : criteria) {
        const auto id = name.substr(0, name.find(' '));
        if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        std::printf("%s criterion %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
        std::fflush(stdout);
        if (!o.pass) ++failed;
    }
    return failed == 0 ? 0 : 1;
}
