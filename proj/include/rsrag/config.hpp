#pragma once

#include "rsrag/error.hpp"
#include "rsrag/language.hpp"
#include "rsrag/lm_gateway.hpp"
#include "rsrag/prompt.hpp"
#include "rsrag/text_util.hpp"

#include <nlohmann/json.hpp>

#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

namespace rsrag {

struct RunConfig {
    std::string image_vectors;
    std::string caption_vectors;
    std::string metadata;
    std::string translations;
    /// Directory that image_ref paths are relative to; defaults to the metadata directory.
    std::string image_root;

    std::size_t pool_size = 10;
    std::size_t n = 3;
    std::size_t k = 3;
    double alpha = 0.9;
    PromptMode mode = PromptMode::kImageBlind;
    bool pagerank_enabled = true;
    bool include_diagonal = true;
    std::vector<std::string> languages{"en"};
    bool generate_then_translate = false;
    std::string output_dir = "run";

    bool mock = false;
    EndpointConfig backend;
    DecodeParams decode;
    std::size_t jobs = 1;

    /// Throws kInvalidArgument / kUnsupportedLanguage on a violated invariant.
    void validate() const {
        if (pool_size == 0) throw Error(ErrorKind::kInvalidArgument, "pool_size must be >= 1");
        if (k == 0) throw Error(ErrorKind::kInvalidArgument, "k must be >= 1");
        if (n > pool_size) throw Error(ErrorKind::kInvalidArgument, "N must be <= pool_size");
        if (k > pool_size) throw Error(ErrorKind::kInvalidArgument, "k must be <= pool_size");
        if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorKind::kInvalidArgument, "alpha must be in (0,1)");
        if (languages.empty()) throw Error(ErrorKind::kInvalidArgument, "no languages");
        for (const auto& l : languages) (void)language_info(l);
        if (decode.num_beams < 1) throw Error(ErrorKind::kInvalidArgument, "num_beams must be >= 1");
        if (jobs == 0) throw Error(ErrorKind::kInvalidArgument, "jobs must be >= 1");
    }
};

/// Language entries are normalized to codes.
inline std::vector<std::string> language_codes(const std::vector<std::string>& names) {
    std::vector<std::string> out;
    for (const auto& l : names) out.emplace_back(language_info(l).code);
    return out;
}

inline nlohmann::json to_json(const RunConfig& c) {
    return {{"image_vectors", c.image_vectors},
            {"caption_vectors", c.caption_vectors},
            {"metadata", c.metadata},
            {"translations", c.translations},
            {"image_root", c.image_root},
            {"pool_size", c.pool_size},
            {"n", c.n},
            {"k", c.k},
            {"alpha", c.alpha},
            {"mode", prompt_mode_name(c.mode)},
            {"pagerank", c.pagerank_enabled},
            {"include_diagonal", c.include_diagonal},
            {"languages", c.languages},
            {"generate_then_translate", c.generate_then_translate},
            {"output_dir", c.output_dir},
            {"mock", c.mock},
            {"backend_url", c.backend.base_url},
            {"chat_path", c.backend.chat_path},
            {"embeddings_path", c.backend.embeddings_path},
            {"model", c.backend.model},
            {"api_key_env", c.backend.api_key_env},
            {"timeout_s", c.backend.timeout_s},
            {"max_in_flight", c.backend.max_in_flight},
            {"max_attempts", c.backend.max_attempts},
            {"send_num_beams", c.backend.send_num_beams},
            {"num_beams", c.decode.num_beams},
            {"max_new_tokens", c.decode.max_new_tokens},
            {"deterministic", c.decode.deterministic},
            {"jobs", c.jobs}};
}

// ---------------------------------------------------------------------------
// Flat `key = value` config files: strings in double quotes, integers, reals, true/false,
// and arrays of strings. `#` starts a comment outside strings.

using ConfigValue = std::variant<std::string, long long, double, bool, std::vector<std::string>>;

namespace detail {

inline std::string parse_toml_string(std::string_view& s, std::size_t line_no) {
    if (s.empty() || s.front() != '"') throw Error(ErrorKind::kMalformedRecord, "line " + std::to_string(line_no) + ": expected string");
    std::string out;
    std::size_t i = 1;
    for (; i < s.size() && s[i] != '"'; ++i) {
        if (s[i] != '\\') {
            out.push_back(s[i]);
            continue;
        }
        if (++i >= s.size()) break;
        switch (s[i]) {
        case 'n': out.push_back('\n'); break;
        case 't': out.push_back('\t'); break;
        case '"': out.push_back('"'); break;
        case '\\': out.push_back('\\'); break;
        default: throw Error(ErrorKind::kMalformedRecord, "line " + std::to_string(line_no) + ": bad escape");
        }
    }
    if (i >= s.size()) throw Error(ErrorKind::kMalformedRecord, "line " + std::to_string(line_no) + ": unterminated string");
    s.remove_prefix(i + 1);
    return out;
}

inline std::string_view strip_comment(std::string_view s) {
    bool in_string = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '"' && (i == 0 || s[i - 1] != '\\')) in_string = !in_string;
        if (s[i] == '#' && !in_string) return s.substr(0, i);
    }
    return s;
}

inline ConfigValue parse_toml_value(std::string_view v, std::size_t line_no) {
    const std::string where = "line " + std::to_string(line_no);
    if (v.empty()) throw Error(ErrorKind::kMalformedRecord, where + ": missing value");
    if (v.front() == '"') {
        std::string s = parse_toml_string(v, line_no);
        if (!trim(v).empty()) throw Error(ErrorKind::kMalformedRecord, where + ": trailing characters");
        return s;
    }
    if (v.front() == '[') {
        std::vector<std::string> items;
        v.remove_prefix(1);
        while (true) {
            v = trim(v);
            if (!v.empty() && v.front() == ']') break;
            items.push_back(parse_toml_string(v, line_no));
            v = trim(v);
            if (!v.empty() && v.front() == ',') v.remove_prefix(1);
            else if (v.empty() || v.front() != ']') throw Error(ErrorKind::kMalformedRecord, where + ": bad array");
        }
        v.remove_prefix(1);
        if (!trim(v).empty()) throw Error(ErrorKind::kMalformedRecord, where + ": trailing characters");
        return items;
    }
    if (v == "true") return true;
    if (v == "false") return false;
    long long i = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), i);
    if (ec == std::errc() && p == v.data() + v.size()) return i;
    double d = 0.0;
    auto [pd, ecd] = std::from_chars(v.data(), v.data() + v.size(), d);
    if (ecd == std::errc() && pd == v.data() + v.size()) return d;
    throw Error(ErrorKind::kMalformedRecord, where + ": cannot parse value '" + std::string(v) + "'");
}

} // namespace detail

inline std::map<std::string, ConfigValue> parse_config_text(std::string_view text) {
    std::map<std::string, ConfigValue> out;
    std::size_t line_no = 0;
    for (std::string_view raw : split_lines(text)) {
        ++line_no;
        std::string_view line = trim(detail::strip_comment(raw));
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw Error(ErrorKind::kMalformedRecord, "line " + std::to_string(line_no) + ": expected key = value");
        }
        std::string key(trim(line.substr(0, eq)));
        if (key.empty()) throw Error(ErrorKind::kMalformedRecord, "line " + std::to_string(line_no) + ": empty key");
        if (out.count(key)) throw Error(ErrorKind::kDuplicateId, "config key '" + key + "' repeated");
        out.emplace(std::move(key), detail::parse_toml_value(trim(line.substr(eq + 1)), line_no));
    }
    return out;
}

namespace detail {

template <typename T>
const T& config_get(const ConfigValue& v, const std::string& key) {
    if (const T* p = std::get_if<T>(&v)) return *p;
    throw Error(ErrorKind::kMalformedRecord, "config key '" + key + "' has the wrong type");
}

inline double config_real(const ConfigValue& v, const std::string& key) {
    if (const auto* i = std::get_if<long long>(&v)) return static_cast<double>(*i);
    return config_get<double>(v, key);
}

inline std::size_t config_count(const ConfigValue& v, const std::string& key) {
    const long long i = config_get<long long>(v, key);
    if (i < 0) throw Error(ErrorKind::kInvalidArgument, "config key '" + key + "' must be >= 0");
    return static_cast<std::size_t>(i);
}

} // namespace detail

/// Overlays the keys present in `values` onto `cfg`. Unknown keys are errors.
inline void apply_config(RunConfig& cfg, const std::map<std::string, ConfigValue>& values) {
    using detail::config_count;
    using detail::config_get;
    using detail::config_real;
    for (const auto& [key, v] : values) {
        if (key == "image_vectors") cfg.image_vectors = config_get<std::string>(v, key);
        else if (key == "caption_vectors") cfg.caption_vectors = config_get<std::string>(v, key);
        else if (key == "metadata") cfg.metadata = config_get<std::string>(v, key);
        else if (key == "translations") cfg.translations = config_get<std::string>(v, key);
        else if (key == "image_root") cfg.image_root = config_get<std::string>(v, key);
        else if (key == "pool_size") cfg.pool_size = config_count(v, key);
        else if (key == "n") cfg.n = config_count(v, key);
        else if (key == "k") cfg.k = config_count(v, key);
        else if (key == "alpha") cfg.alpha = config_real(v, key);
        else if (key == "mode") cfg.mode = parse_prompt_mode(config_get<std::string>(v, key));
        else if (key == "pagerank") cfg.pagerank_enabled = config_get<bool>(v, key);
        else if (key == "include_diagonal") cfg.include_diagonal = config_get<bool>(v, key);
        else if (key == "languages") cfg.languages = language_codes(config_get<std::vector<std::string>>(v, key));
        else if (key == "generate_then_translate") cfg.generate_then_translate = config_get<bool>(v, key);
        else if (key == "output_dir") cfg.output_dir = config_get<std::string>(v, key);
        else if (key == "mock") cfg.mock = config_get<bool>(v, key);
        else if (key == "backend_url") cfg.backend.base_url = config_get<std::string>(v, key);
        else if (key == "chat_path") cfg.backend.chat_path = config_get<std::string>(v, key);
        else if (key == "embeddings_path") cfg.backend.embeddings_path = config_get<std::string>(v, key);
        else if (key == "model") cfg.backend.model = config_get<std::string>(v, key);
        else if (key == "api_key_env") cfg.backend.api_key_env = config_get<std::string>(v, key);
        else if (key == "timeout_s") cfg.backend.timeout_s = config_real(v, key);
        else if (key == "max_in_flight") cfg.backend.max_in_flight = static_cast<int>(config_count(v, key));
        else if (key == "max_attempts") cfg.backend.max_attempts = static_cast<int>(config_count(v, key));
        else if (key == "send_num_beams") cfg.backend.send_num_beams = config_get<bool>(v, key);
        else if (key == "num_beams") cfg.decode.num_beams = static_cast<int>(config_count(v, key));
        else if (key == "max_new_tokens") cfg.decode.max_new_tokens = static_cast<int>(config_count(v, key));
        else if (key == "deterministic") cfg.decode.deterministic = config_get<bool>(v, key);
        else if (key == "jobs") cfg.jobs = config_count(v, key);
        else throw Error(ErrorKind::kInvalidArgument, "unknown config key '" + key + "'");
    }
}

inline void load_config_file(RunConfig& cfg, const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    apply_config(cfg, parse_config_text(ss.str()));
}

} // namespace rsrag
