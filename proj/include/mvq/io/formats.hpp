#pragma once

// Little-endian binary formats. Layouts are documented in docs/FORMATS.md and
// pinned by the golden files under tests/golden/.
//
//   MVQF  features   magic, version, T, d (u32), frame_rate (f32), domain (u8), T*d f32
//   MVQQ  quantiser  magic, version, N, K, d, R (u32), codebooks, weights (N*K*d f32), biases (N*K f32)
//   MVQT  tokens     magic, version, T, N, K (u32), T*N tokens as u8 (K <= 256) or u16
//   MVQS  student    magic, version, d_in, d_model, layers, window, N_s, K_s, N_a, K_a (u32), f64 parameters

#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "mvq/error.hpp"
#include "mvq/quantiser.hpp"
#include "mvq/sequence.hpp"
#include "mvq/ssl/student.hpp"

namespace mvq::io {

inline constexpr std::uint32_t kFormatVersion = 1;
inline constexpr std::size_t kFeatureHeaderBytes = 21;
inline constexpr std::size_t kQuantiserHeaderBytes = 24;
inline constexpr std::size_t kTokenHeaderBytes = 20;
inline constexpr std::size_t kStudentHeaderBytes = 40;

inline std::size_t token_width(std::size_t codebook_size) { return codebook_size <= 256 ? 1 : 2; }

namespace detail {

class Writer {
public:
    void magic(std::string_view m) { bytes_.insert(bytes_.end(), m.begin(), m.end()); }
    void u8(std::uint8_t v) { bytes_.push_back(v); }
    void u16(std::uint16_t v) {
        bytes_.push_back(static_cast<std::uint8_t>(v));
        bytes_.push_back(static_cast<std::uint8_t>(v >> 8));
    }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f32(double v) { u32(std::bit_cast<std::uint32_t>(static_cast<float>(v))); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void count(std::size_t v, const char* what) {
        if (v > 0xFFFFFFFFu) throw FormatError(std::string(what) + " does not fit in u32");
        u32(static_cast<std::uint32_t>(v));
    }

    std::vector<std::uint8_t> take() { return std::move(bytes_); }

private:
    std::vector<std::uint8_t> bytes_;
};

class Reader {
public:
    Reader(std::span<const std::uint8_t> b, std::string_view kind) : b_(b), kind_(kind) {}

    void expect_magic(std::string_view m) {
        need(4, "magic");
        if (std::memcmp(b_.data(), m.data(), 4) != 0)
            throw BadMagic(std::string(kind_) + ": bad magic, expected '" + std::string(m) + "'");
        pos_ = 4;
    }
    void expect_version() {
        const std::uint32_t v = u32();
        if (v != kFormatVersion) throw UnknownVersion(std::string(kind_) + ": unknown version " + std::to_string(v));
    }
    std::uint8_t u8() {
        need(1, "u8");
        return b_[pos_++];
    }
    std::uint16_t u16() {
        need(2, "u16");
        const auto v = static_cast<std::uint16_t>(b_[pos_] | (b_[pos_ + 1] << 8));
        pos_ += 2;
        return v;
    }
    std::uint32_t u32() {
        need(4, "u32");
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b_[pos_ + i]) << (8 * i);
        pos_ += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8, "u64");
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b_[pos_ + i]) << (8 * i);
        pos_ += 8;
        return v;
    }
    double f32() { return static_cast<double>(std::bit_cast<float>(u32())); }
    double f64() { return std::bit_cast<double>(u64()); }

    // The declared payload must match the bytes that remain, exactly.
    void expect_payload(std::uint64_t bytes) {
        const std::uint64_t left = b_.size() - pos_;
        if (left < bytes)
            throw TruncatedFile(std::string(kind_) + ": payload truncated, header declares " + std::to_string(bytes) +
                                " bytes, file has " + std::to_string(left));
        if (left > bytes)
            throw SizeMismatch(std::string(kind_) + ": " + std::to_string(left - bytes) +
                               " trailing bytes after declared payload");
    }

private:
    void need(std::size_t n, const char* what) {
        if (b_.size() - pos_ < n) throw TruncatedFile(std::string(kind_) + ": truncated header (" + what + ")");
    }

    std::span<const std::uint8_t> b_;
    std::string_view kind_;
    std::size_t pos_ = 0;
};

inline void check_finite_f32(double v, const char* kind) {
    if (!std::isfinite(v)) throw FormatError(std::string(kind) + ": non-finite value in payload");
}

} // namespace detail

// ---------------------------------------------------------------------------
// Raw file access

inline std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FileError("cannot open '" + path.string() + "' for reading");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw FileError("error reading '" + path.string() + "'");
    return bytes;
}

inline void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FileError("cannot open '" + path.string() + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FileError("error writing '" + path.string() + "'");
}

// ---------------------------------------------------------------------------
// Features

inline std::vector<std::uint8_t> serialize_features(const FeatureSequence& xs) {
    detail::Writer w;
    w.magic("MVQF");
    w.u32(kFormatVersion);
    w.count(xs.length(), "T");
    w.count(xs.dim(), "d");
    w.f32(xs.frame_rate_hz);
    w.u8(static_cast<std::uint8_t>(xs.domain));
    for (double v : xs.frames.data) w.f32(v);
    return w.take();
}

inline FeatureSequence parse_features(std::span<const std::uint8_t> bytes) {
    detail::Reader r(bytes, "MVQF");
    r.expect_magic("MVQF");
    r.expect_version();
    const std::uint32_t t = r.u32();
    const std::uint32_t d = r.u32();
    const double rate = r.f32();
    const std::uint8_t tag = r.u8();
    if (tag > 2) throw FormatError("MVQF: unknown domain tag " + std::to_string(tag));
    if (!(rate > 0.0) || !std::isfinite(rate)) throw FormatError("MVQF: frame rate must be positive");
    r.expect_payload(std::uint64_t{t} * d * 4);
    FeatureSequence xs(t, d, rate, static_cast<DomainTag>(tag));
    for (double& v : xs.frames.data) {
        v = r.f32();
        detail::check_finite_f32(v, "MVQF");
    }
    return xs;
}

inline void write_features(const std::filesystem::path& path, const FeatureSequence& xs) {
    write_file_bytes(path, serialize_features(xs));
}

inline FeatureSequence read_features(const std::filesystem::path& path) { return parse_features(read_file_bytes(path)); }

// ---------------------------------------------------------------------------
// Quantiser

inline std::vector<std::uint8_t> serialize_quantiser(const Quantiser& q) {
    detail::Writer w;
    w.magic("MVQQ");
    w.u32(kFormatVersion);
    w.count(q.n_codebooks(), "N");
    w.count(q.codebook_size(), "K");
    w.count(q.dim(), "d");
    w.count(q.refine_steps(), "R");
    for (double v : q.codebooks()) w.f32(v);
    for (double v : q.weights()) w.f32(v);
    for (double v : q.biases()) w.f32(v);
    return w.take();
}

inline Quantiser parse_quantiser(std::span<const std::uint8_t> bytes) {
    detail::Reader r(bytes, "MVQQ");
    r.expect_magic("MVQQ");
    r.expect_version();
    const std::uint32_t n = r.u32(), k = r.u32(), d = r.u32(), rs = r.u32();
    if (n < 1 || k < 2 || k > 65536 || d < 1) throw FormatError("MVQQ: invalid shape N/K/d in header");
    const std::uint64_t nkd = std::uint64_t{n} * k * d;
    r.expect_payload((2 * nkd + std::uint64_t{n} * k) * 4);
    Quantiser q(n, k, d, rs);
    for (auto* vec : {&q.codebooks(), &q.weights(), &q.biases()})
        for (double& v : *vec) {
            v = r.f32();
            detail::check_finite_f32(v, "MVQQ");
        }
    return q;
}

inline void write_quantiser(const std::filesystem::path& path, const Quantiser& q) {
    write_file_bytes(path, serialize_quantiser(q));
}

inline Quantiser read_quantiser(const std::filesystem::path& path) { return parse_quantiser(read_file_bytes(path)); }

// ---------------------------------------------------------------------------
// Tokens

inline std::vector<std::uint8_t> serialize_tokens(const TokenSequence& zs) {
    zs.validate();
    if (zs.codebook_size < 2 || zs.codebook_size > 65536) throw FormatError("MVQT: K must lie in [2, 65536]");
    detail::Writer w;
    w.magic("MVQT");
    w.u32(kFormatVersion);
    w.count(zs.length(), "T");
    w.count(zs.n_codebooks, "N");
    w.count(zs.codebook_size, "K");
    const bool narrow = token_width(zs.codebook_size) == 1;
    for (Token z : zs.tokens) {
        if (narrow)
            w.u8(static_cast<std::uint8_t>(z));
        else
            w.u16(static_cast<std::uint16_t>(z));
    }
    return w.take();
}

inline TokenSequence parse_tokens(std::span<const std::uint8_t> bytes) {
    detail::Reader r(bytes, "MVQT");
    r.expect_magic("MVQT");
    r.expect_version();
    const std::uint32_t t = r.u32(), n = r.u32(), k = r.u32();
    if (n < 1 || k < 2 || k > 65536) throw FormatError("MVQT: invalid N/K in header");
    const std::size_t width = token_width(k);
    r.expect_payload(std::uint64_t{t} * n * width);
    TokenSequence zs(t, n, k);
    for (Token& z : zs.tokens) {
        z = width == 1 ? r.u8() : r.u16();
        if (z >= k) throw FormatError("MVQT: stored token " + std::to_string(z) + " >= K=" + std::to_string(k));
    }
    return zs;
}

inline void write_tokens(const std::filesystem::path& path, const TokenSequence& zs) {
    write_file_bytes(path, serialize_tokens(zs));
}

inline TokenSequence read_tokens(const std::filesystem::path& path) { return parse_tokens(read_file_bytes(path)); }

// ---------------------------------------------------------------------------
// Student model (f64 payload so a reloaded model predicts exactly as trained)

inline std::vector<std::uint8_t> serialize_student(const ssl::StudentModel& model) {
    ssl::StudentModel m = model;
    detail::Writer w;
    w.magic("MVQS");
    w.u32(kFormatVersion);
    w.count(m.cfg.d_in, "d_in");
    w.count(m.cfg.d_model, "d_model");
    w.count(m.cfg.layers, "layers");
    w.count(m.cfg.window, "window");
    w.count(m.speech_heads.size(), "N_s");
    w.count(m.speech_heads.empty() ? 0 : m.speech_heads.front().rows, "K_s");
    w.count(m.audio_heads.size(), "N_a");
    w.count(m.audio_heads.empty() ? 0 : m.audio_heads.front().rows, "K_a");
    for (auto g : m.parameter_groups())
        for (double v : g) w.f64(v);
    return w.take();
}

inline ssl::StudentModel parse_student(std::span<const std::uint8_t> bytes) {
    detail::Reader r(bytes, "MVQS");
    r.expect_magic("MVQS");
    r.expect_version();
    ssl::StudentConfig cfg;
    cfg.d_in = r.u32();
    cfg.d_model = r.u32();
    cfg.layers = r.u32();
    cfg.window = r.u32();
    const std::uint32_t ns = r.u32(), ks = r.u32(), na = r.u32(), ka = r.u32();
    if (cfg.d_in < 1 || cfg.d_model < 1 || cfg.window % 2 == 0 || cfg.layers > 1024 || (ns > 0 && ks < 2) ||
        (na > 0 && ka < 2))
        throw FormatError("MVQS: invalid model shape in header");
    const std::uint64_t dm = cfg.d_model;
    const std::uint64_t count = cfg.d_in + dm * cfg.d_in + dm + cfg.layers * (cfg.window * dm * dm + dm) +
                                std::uint64_t{ns} * ks * dm + std::uint64_t{na} * ka * dm;
    r.expect_payload(count * 8);
    ssl::StudentModel m(cfg, ns, ks, na, ka);
    for (auto g : m.parameter_groups())
        for (double& v : g) {
            v = r.f64();
            if (!std::isfinite(v)) throw FormatError("MVQS: non-finite parameter");
        }
    return m;
}

inline void write_student(const std::filesystem::path& path, const ssl::StudentModel& m) {
    write_file_bytes(path, serialize_student(m));
}

inline ssl::StudentModel read_student(const std::filesystem::path& path) {
    return parse_student(read_file_bytes(path));
}

// ---------------------------------------------------------------------------
// Header summary of any of the formats, one `key=value` per line.

inline std::string describe(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 4) throw TruncatedFile("file too short to hold a magic number");
    const std::string magic(bytes.begin(), bytes.begin() + 4);
    std::ostringstream os;
    if (magic == "MVQF") {
        const auto xs = parse_features(bytes);
        os << "format=MVQF\nversion=" << kFormatVersion << "\nT=" << xs.length() << "\nd=" << xs.dim()
           << "\nframe_rate_hz=" << xs.frame_rate_hz << "\ndomain=" << to_string(xs.domain) << "\n";
    } else if (magic == "MVQQ") {
        const auto q = parse_quantiser(bytes);
        os << "format=MVQQ\nversion=" << kFormatVersion << "\nN=" << q.n_codebooks() << "\nK=" << q.codebook_size()
           << "\nd=" << q.dim() << "\nR=" << q.refine_steps() << "\n";
    } else if (magic == "MVQT") {
        const auto zs = parse_tokens(bytes);
        os << "format=MVQT\nversion=" << kFormatVersion << "\nT=" << zs.length() << "\nN=" << zs.n_codebooks
           << "\nK=" << zs.codebook_size << "\ntoken_bytes=" << token_width(zs.codebook_size) << "\n";
    } else if (magic == "MVQS") {
        auto m = parse_student(bytes);
        os << "format=MVQS\nversion=" << kFormatVersion << "\nd_in=" << m.cfg.d_in << "\nd_model=" << m.cfg.d_model
           << "\nlayers=" << m.cfg.layers << "\nwindow=" << m.cfg.window << "\nN_s=" << m.speech_heads.size()
           << "\nN_a=" << m.audio_heads.size() << "\nparameters=" << m.parameter_count() << "\n";
    } else {
        throw BadMagic("unrecognised magic");
    }
    return os.str();
}

} // namespace mvq::io
