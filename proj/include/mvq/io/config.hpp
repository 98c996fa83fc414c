#pragma once

// Plain-text configuration: one `key = value` per line, `#` starts a comment,
// blank lines are ignored. Missing keys keep their defaults; unknown keys are
// rejected all at once.

#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "mvq/error.hpp"
#include "mvq/io/formats.hpp"
#include "mvq/quantiser.hpp"
#include "mvq/ssl/pretrain.hpp"

namespace mvq::io {

struct Config {
    QuantiserTrainConfig quantiser;
    ssl::SslTrainConfig ssl;
    std::uint64_t seed = 0;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

inline double parse_real(std::string_view v, int line, std::string_view key) {
    double out = 0.0;
    const auto* end = v.data() + v.size();
    const auto [ptr, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || ptr != end || !std::isfinite(out))
        throw ParseError(line, "'" + std::string(key) + "' expects a real number, got '" + std::string(v) + "'");
    return out;
}

inline std::uint64_t parse_count(std::string_view v, int line, std::string_view key) {
    std::uint64_t out = 0;
    const auto* end = v.data() + v.size();
    const auto [ptr, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || ptr != end)
        throw ParseError(line, "'" + std::string(key) + "' expects a non-negative integer, got '" + std::string(v) + "'");
    return out;
}

using Setter = std::function<void(Config&, std::string_view value, int line)>;

inline const std::map<std::string, Setter, std::less<>>& setters() {
    static const std::map<std::string, Setter, std::less<>> table = {
        // quantiser
        {"n_codebooks", [](Config& c, std::string_view v, int l) { c.quantiser.n_codebooks = parse_count(v, l, "n_codebooks"); }},
        {"codebook_size", [](Config& c, std::string_view v, int l) { c.quantiser.codebook_size = parse_count(v, l, "codebook_size"); }},
        {"refine_steps", [](Config& c, std::string_view v, int l) { c.quantiser.refine_steps = parse_count(v, l, "refine_steps"); }},
        {"beta", [](Config& c, std::string_view v, int l) { c.quantiser.beta = parse_real(v, l, "beta"); }},
        {"quantiser_steps", [](Config& c, std::string_view v, int l) { c.quantiser.steps = parse_count(v, l, "quantiser_steps"); }},
        {"quantiser_batch_size", [](Config& c, std::string_view v, int l) { c.quantiser.batch_size = parse_count(v, l, "quantiser_batch_size"); }},
        {"quantiser_lr", [](Config& c, std::string_view v, int l) { c.quantiser.adam.learning_rate = parse_real(v, l, "quantiser_lr"); }},
        {"init_noise_sigma", [](Config& c, std::string_view v, int l) { c.quantiser.init_noise_sigma = parse_real(v, l, "init_noise_sigma"); }},
        // masked prediction
        {"alpha", [](Config& c, std::string_view v, int l) { c.ssl.alpha = parse_real(v, l, "alpha"); }},
        {"lambda", [](Config& c, std::string_view v, int l) { c.ssl.lambda = parse_real(v, l, "lambda"); }},
        {"strategy", [](Config& c, std::string_view v, int l) {
             try {
                 c.ssl.strategy = ssl::parse_strategy(v);
             } catch (const ConfigError& e) {
                 throw ParseError(l, e.what());
             }
         }},
        {"p_start", [](Config& c, std::string_view v, int l) { c.ssl.mask.p_start = parse_real(v, l, "p_start"); }},
        {"span", [](Config& c, std::string_view v, int l) { c.ssl.mask.span = parse_count(v, l, "span"); }},
        {"d_model", [](Config& c, std::string_view v, int l) { c.ssl.student.d_model = parse_count(v, l, "d_model"); }},
        {"layers", [](Config& c, std::string_view v, int l) { c.ssl.student.layers = parse_count(v, l, "layers"); }},
        {"window", [](Config& c, std::string_view v, int l) { c.ssl.student.window = parse_count(v, l, "window"); }},
        {"steps", [](Config& c, std::string_view v, int l) { c.ssl.steps = parse_count(v, l, "steps"); }},
        {"batch_size", [](Config& c, std::string_view v, int l) { c.ssl.batch_size = parse_count(v, l, "batch_size"); }},
        {"seq_len", [](Config& c, std::string_view v, int l) { c.ssl.seq_len = parse_count(v, l, "seq_len"); }},
        {"lr", [](Config& c, std::string_view v, int l) { c.ssl.adam.learning_rate = parse_real(v, l, "lr"); }},
        {"speech_ratio", [](Config& c, std::string_view v, int l) { c.ssl.speech_ratio = parse_count(v, l, "speech_ratio"); }},
        {"audio_ratio", [](Config& c, std::string_view v, int l) { c.ssl.audio_ratio = parse_count(v, l, "audio_ratio"); }},
        {"interp", [](Config& c, std::string_view v, int l) {
             try {
                 c.ssl.interp = ssl::parse_interp_mode(v);
             } catch (const ConfigError& e) {
                 throw ParseError(l, e.what());
             }
         }},
        // shared optimiser settings
        {"adam_beta1", [](Config& c, std::string_view v, int l) {
             c.ssl.adam.beta1 = c.quantiser.adam.beta1 = parse_real(v, l, "adam_beta1");
         }},
        {"adam_beta2", [](Config& c, std::string_view v, int l) {
             c.ssl.adam.beta2 = c.quantiser.adam.beta2 = parse_real(v, l, "adam_beta2");
         }},
        {"adam_epsilon", [](Config& c, std::string_view v, int l) {
             c.ssl.adam.epsilon = c.quantiser.adam.epsilon = parse_real(v, l, "adam_epsilon");
         }},
        {"seed", [](Config& c, std::string_view v, int l) {
             c.seed = c.quantiser.seed = c.ssl.seed = parse_count(v, l, "seed");
         }},
    };
    return table;
}

} // namespace detail

inline std::vector<std::string> config_keys() {
    std::vector<std::string> keys;
    for (const auto& [k, _] : detail::setters()) keys.push_back(k);
    return keys;
}

inline Config parse_config_text(std::string_view text) {
    Config cfg;
    std::vector<std::string> unknown;
    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) throw ParseError(line_no, "expected 'key = value'");
        const auto key = detail::trim(line.substr(0, eq));
        const auto value = detail::trim(line.substr(eq + 1));
        if (key.empty()) throw ParseError(line_no, "missing key before '='");
        if (value.empty()) throw ParseError(line_no, "missing value for '" + std::string(key) + "'");
        const auto it = detail::setters().find(key);
        if (it == detail::setters().end()) {
            unknown.emplace_back(key);
            continue;
        }
        it->second(cfg, value, line_no);
    }
    if (!unknown.empty()) {
        std::string msg = "unknown configuration keys:";
        for (const auto& k : unknown) msg += " " + k;
        throw ConfigError(msg);
    }
    return cfg;
}

inline Config parse_config(const std::filesystem::path& path) {
    const auto bytes = read_file_bytes(path);
    return parse_config_text(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

} // namespace mvq::io
