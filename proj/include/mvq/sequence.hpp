#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mvq/error.hpp"
#include "mvq/numerics.hpp"

namespace mvq {

enum class DomainTag : std::uint8_t { speech = 0, audio = 1, unspecified = 2 };

inline std::string_view to_string(DomainTag t) {
    switch (t) {
    case DomainTag::speech: return "speech";
    case DomainTag::audio: return "audio";
    case DomainTag::unspecified: return "unspecified";
    }
    return "unknown";
}

inline DomainTag parse_domain(std::string_view s) {
    if (s == "speech") return DomainTag::speech;
    if (s == "audio") return DomainTag::audio;
    if (s == "unspecified") return DomainTag::unspecified;
    throw ConfigError("unknown domain tag '" + std::string(s) + "'");
}

// T x d frames with the rate they were sampled at.
struct FeatureSequence {
    Matrix frames;
    double frame_rate_hz = 50.0;
    DomainTag domain = DomainTag::unspecified;

    FeatureSequence() = default;
    FeatureSequence(std::size_t t, std::size_t d, double rate = 50.0, DomainTag tag = DomainTag::unspecified)
        : frames(t, d), frame_rate_hz(rate), domain(tag) {}
    FeatureSequence(Matrix m, double rate, DomainTag tag) : frames(std::move(m)), frame_rate_hz(rate), domain(tag) {}

    std::size_t length() const { return frames.rows; }
    std::size_t dim() const { return frames.cols; }
    bool empty() const { return frames.rows == 0; }
    std::span<const double> frame(std::size_t t) const { return frames.row(t); }
    std::span<double> frame(std::size_t t) { return frames.row(t); }

    // Frames [begin, begin + count) as a new sequence.
    FeatureSequence slice(std::size_t begin, std::size_t count) const {
        FeatureSequence out(count, dim(), frame_rate_hz, domain);
        std::copy_n(frames.data.begin() + static_cast<std::ptrdiff_t>(begin * dim()), count * dim(),
                    out.frames.data.begin());
        return out;
    }
};

using Token = std::uint32_t;
using TokenTuple = std::vector<Token>;

// T tuples of N tokens, each in [0, K).
struct TokenSequence {
    std::size_t n_codebooks = 0;
    std::size_t codebook_size = 0;
    std::vector<Token> tokens;  // row-major T x N

    TokenSequence() = default;
    TokenSequence(std::size_t t, std::size_t n, std::size_t k) : n_codebooks(n), codebook_size(k), tokens(t * n, 0) {}

    std::size_t length() const { return n_codebooks == 0 ? 0 : tokens.size() / n_codebooks; }
    Token at(std::size_t t, std::size_t n) const { return tokens[t * n_codebooks + n]; }
    Token& at(std::size_t t, std::size_t n) { return tokens[t * n_codebooks + n]; }
    std::span<const Token> tuple(std::size_t t) const { return {tokens.data() + t * n_codebooks, n_codebooks}; }

    TokenSequence slice(std::size_t begin, std::size_t count) const {
        TokenSequence out(count, n_codebooks, codebook_size);
        std::copy_n(tokens.begin() + static_cast<std::ptrdiff_t>(begin * n_codebooks), count * n_codebooks,
                    out.tokens.begin());
        return out;
    }

    void validate() const {
        for (Token z : tokens)
            if (z >= codebook_size)
                throw IndexError("token " + std::to_string(z) + " >= K=" + std::to_string(codebook_size));
    }

    bool operator==(const TokenSequence&) const = default;
};

} // namespace mvq
