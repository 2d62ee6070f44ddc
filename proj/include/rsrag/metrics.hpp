#pragma once

// Caption metrics: 13a-style tokenization, corpus BLEU, CIDEr-D, RefSigLIPScore, and the
// prompt diagnostics (n-gram overlap, 1-gram attribution).

#include "rsrag/embedding.hpp"
#include "rsrag/error.hpp"
#include "rsrag/language.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

namespace rsrag {

struct TokenizedCaption {
    std::vector<std::string> tokens;
    std::string language;
};

namespace detail {

inline void replace_all(std::string& s, std::string_view from, std::string_view to) {
    std::size_t pos = 0;
    while ((pos = s.find(from, pos)) != std::string::npos) {
        s.replace(pos, from.size(), to);
        pos += to.size();
    }
}

inline bool is_13a_symbol(char c) {
    return (c >= '{' && c <= '~') || (c >= '[' && c <= '`') || (c >= ' ' && c <= '&') || (c >= '(' && c <= '+') ||
           (c >= ':' && c <= '@') || c == '/';
}

inline bool is_digit(char c) { return c >= '0' && c <= '9'; }
inline bool is_period_comma(char c) { return c == '.' || c == ','; }

/// Left-to-right, non-overlapping rewrite of every adjacent pair (a, b) matching `match`.
template <typename Match, typename Emit>
std::string rewrite_pairs(const std::string& s, Match match, Emit emit) {
    std::string out;
    out.reserve(s.size() + s.size() / 2);
    std::size_t i = 0;
    while (i < s.size()) {
        if (i + 1 < s.size() && match(s[i], s[i + 1])) {
            emit(out, s[i], s[i + 1]);
            i += 2;
        } else {
            out.push_back(s[i]);
            ++i;
        }
    }
    return out;
}

inline std::string pad_13a(std::string_view text) {
    std::string line(text);
    replace_all(line, "<skipped>", "");
    replace_all(line, "-\n", "");
    replace_all(line, "\n", " ");
    if (line.find('&') != std::string::npos) {
        replace_all(line, "&quot;", "\"");
        replace_all(line, "&amp;", "&");
        replace_all(line, "&lt;", "<");
        replace_all(line, "&gt;", ">");
    }
    std::string s;
    s.reserve(line.size() * 2 + 2);
    s.push_back(' ');
    for (char c : line) {
        if (is_13a_symbol(c)) {
            s.push_back(' ');
            s.push_back(c);
            s.push_back(' ');
        } else {
            s.push_back(c);
        }
    }
    s.push_back(' ');
    // period and comma unless preceded by a digit
    s = rewrite_pairs(
        s, [](char a, char b) { return !is_digit(a) && is_period_comma(b); },
        [](std::string& o, char a, char b) { o += a; o += ' '; o += b; o += ' '; });
    // period and comma unless followed by a digit
    s = rewrite_pairs(
        s, [](char a, char b) { return is_period_comma(a) && !is_digit(b); },
        [](std::string& o, char a, char b) { o += ' '; o += a; o += ' '; o += b; });
    // dash preceded by a digit
    s = rewrite_pairs(
        s, [](char a, char b) { return is_digit(a) && b == '-'; },
        [](std::string& o, char a, char b) { o += a; o += ' '; o += b; o += ' '; });
    return s;
}

inline std::vector<std::string> split_whitespace(std::string_view s) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\n' || s[i] == '\r' || s[i] == '\f' ||
                                s[i] == '\v'))
            ++i;
        std::size_t j = i;
        while (j < s.size() && !(s[j] == ' ' || s[j] == '\t' || s[j] == '\n' || s[j] == '\r' || s[j] == '\f' ||
                                 s[j] == '\v'))
            ++j;
        if (j > i) out.emplace_back(s.substr(i, j - i));
        i = j;
    }
    return out;
}

inline bool is_cjk_codepoint(std::uint32_t cp) {
    return (cp >= 0x1100 && cp <= 0x11FF) ||    // Hangul Jamo
           (cp >= 0x2E80 && cp <= 0x2FDF) ||    // CJK radicals
           (cp >= 0x3000 && cp <= 0x303F) ||    // CJK symbols and punctuation
           (cp >= 0x3040 && cp <= 0x30FF) ||    // Hiragana, Katakana
           (cp >= 0x3130 && cp <= 0x318F) ||    // Hangul compatibility Jamo
           (cp >= 0x3400 && cp <= 0x4DBF) ||    // CJK extension A
           (cp >= 0x4E00 && cp <= 0x9FFF) ||    // CJK unified ideographs
           (cp >= 0xA960 && cp <= 0xA97F) ||    // Hangul Jamo extended A
           (cp >= 0xAC00 && cp <= 0xD7FF) ||    // Hangul syllables, Jamo extended B
           (cp >= 0xF900 && cp <= 0xFAFF) ||    // CJK compatibility ideographs
           (cp >= 0xFF00 && cp <= 0xFFEF) ||    // halfwidth and fullwidth forms
           (cp >= 0x20000 && cp <= 0x2FFFF);    // CJK extensions B..F
}

/// Surrounds every CJK/Hangul code point with spaces; other bytes pass through.
inline std::string isolate_cjk(std::string_view text) {
    std::string out;
    out.reserve(text.size() * 2);
    std::size_t i = 0;
    while (i < text.size()) {
        const auto b0 = static_cast<unsigned char>(text[i]);
        std::size_t len = 1;
        std::uint32_t cp = b0;
        if (b0 >= 0xF0 && i + 3 < text.size() + 0) {
            len = 4;
            cp = ((b0 & 0x07u) << 18) | ((static_cast<unsigned char>(text[i + 1]) & 0x3Fu) << 12) |
                 ((static_cast<unsigned char>(text[i + 2]) & 0x3Fu) << 6) | (static_cast<unsigned char>(text[i + 3]) & 0x3Fu);
        } else if (b0 >= 0xE0 && i + 2 < text.size()) {
            len = 3;
            cp = ((b0 & 0x0Fu) << 12) | ((static_cast<unsigned char>(text[i + 1]) & 0x3Fu) << 6) |
                 (static_cast<unsigned char>(text[i + 2]) & 0x3Fu);
        } else if (b0 >= 0xC0 && i + 1 < text.size()) {
            len = 2;
            cp = ((b0 & 0x1Fu) << 6) | (static_cast<unsigned char>(text[i + 1]) & 0x3Fu);
        }
        if (is_cjk_codepoint(cp)) {
            out.push_back(' ');
            out.append(text.substr(i, len));
            out.push_back(' ');
        } else {
            out.append(text.substr(i, len));
        }
        i += len;
    }
    return out;
}

} // namespace detail

/// 13a rules for Latin/Cyrillic scripts (case preserved). Chinese and Korean are split into
/// single characters first; embedded Latin runs still follow 13a.
inline TokenizedCaption tokenize(std::string_view text, std::string_view language = "en") {
    const LanguageInfo& lang = language_info(language);
    TokenizedCaption out;
    out.language = std::string(lang.code);
    if (lang.per_character) {
        out.tokens = detail::split_whitespace(detail::pad_13a(detail::isolate_cjk(text)));
    } else {
        out.tokens = detail::split_whitespace(detail::pad_13a(text));
    }
    return out;
}

// ---------------------------------------------------------------------------
// n-gram helpers

using NgramCounts = std::unordered_map<std::string, int>;

namespace detail {

inline std::string join_ngram(const std::vector<std::string>& tokens, std::size_t start, std::size_t n) {
    std::string key;
    for (std::size_t i = 0; i < n; ++i) {
        if (i) key.push_back('\x1f');
        key += tokens[start + i];
    }
    return key;
}

} // namespace detail

inline NgramCounts ngram_counts(const std::vector<std::string>& tokens, std::size_t n) {
    NgramCounts counts;
    if (n == 0 || tokens.size() < n) return counts;
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) ++counts[detail::join_ngram(tokens, i, n)];
    return counts;
}

inline std::unordered_set<std::string> ngram_set(const std::vector<std::string>& tokens, std::size_t n) {
    std::unordered_set<std::string> out;
    if (n == 0 || tokens.size() < n) return out;
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) out.insert(detail::join_ngram(tokens, i, n));
    return out;
}

// ---------------------------------------------------------------------------
// BLEU

struct BleuStats {
    std::array<std::uint64_t, 4> matches{};
    std::array<std::uint64_t, 4> totals{};
    std::uint64_t candidate_length = 0;
    std::uint64_t reference_length = 0;
};

/// Sufficient statistics with clipped counts; the reference length of each segment is the
/// closest reference length (shorter wins ties).
inline BleuStats bleu_stats(std::span<const std::vector<std::string>> candidates,
                            std::span<const std::vector<std::vector<std::string>>> references, int max_n = 4) {
    if (candidates.size() != references.size()) {
        throw Error(ErrorKind::kInvalidArgument, "candidate/reference count mismatch");
    }
    BleuStats st;
    for (std::size_t s = 0; s < candidates.size(); ++s) {
        const auto& cand = candidates[s];
        const auto& refs = references[s];
        if (refs.empty()) throw Error(ErrorKind::kInvalidArgument, "segment without references");
        st.candidate_length += cand.size();
        std::size_t best = refs.front().size();
        for (const auto& r : refs) {
            const auto diff = [&](std::size_t len) { return len > cand.size() ? len - cand.size() : cand.size() - len; };
            if (diff(r.size()) < diff(best) || (diff(r.size()) == diff(best) && r.size() < best)) best = r.size();
        }
        st.reference_length += best;
        for (int n = 1; n <= max_n; ++n) {
            const auto cand_counts = ngram_counts(cand, static_cast<std::size_t>(n));
            NgramCounts max_ref;
            for (const auto& r : refs) {
                for (const auto& [g, c] : ngram_counts(r, static_cast<std::size_t>(n))) {
                    int& slot = max_ref[g];
                    slot = std::max(slot, c);
                }
            }
            for (const auto& [g, c] : cand_counts) {
                st.totals[n - 1] += static_cast<std::uint64_t>(c);
                auto it = max_ref.find(g);
                if (it != max_ref.end()) st.matches[n - 1] += static_cast<std::uint64_t>(std::min(c, it->second));
            }
        }
    }
    return st;
}

/// Geometric mean of modified precisions over orders 1..max_n times the brevity penalty.
/// Orders with no candidate n-grams at all (corpus shorter than n) are dropped from the mean.
inline double bleu_from_stats(const BleuStats& st, int max_n) {
    if (st.candidate_length == 0) return 0.0;
    double log_sum = 0.0;
    int orders = 0;
    for (int n = 1; n <= max_n; ++n) {
        if (st.totals[n - 1] == 0) break;
        if (st.matches[n - 1] == 0) return 0.0;
        log_sum += std::log(static_cast<double>(st.matches[n - 1]) / static_cast<double>(st.totals[n - 1]));
        ++orders;
    }
    if (orders == 0) return 0.0;
    double bp = 1.0;
    if (st.candidate_length < st.reference_length) {
        bp = std::exp(1.0 - static_cast<double>(st.reference_length) / static_cast<double>(st.candidate_length));
    }
    return bp * std::exp(log_sum / orders);
}

inline double bleu_tokens(std::span<const std::vector<std::string>> candidates,
                          std::span<const std::vector<std::vector<std::string>>> references, int max_n) {
    if (max_n < 1 || max_n > 4) throw Error(ErrorKind::kInvalidArgument, "BLEU order must be in 1..4");
    if (candidates.empty()) throw Error(ErrorKind::kInvalidArgument, "empty corpus");
    return bleu_from_stats(bleu_stats(candidates, references, max_n), max_n);
}

namespace detail {

struct TokenizedCorpus {
    std::vector<std::vector<std::string>> candidates;
    std::vector<std::vector<std::vector<std::string>>> references;
};

inline TokenizedCorpus tokenize_corpus(std::span<const std::string> candidates,
                                       std::span<const std::vector<std::string>> references, std::string_view language) {
    if (candidates.size() != references.size()) {
        throw Error(ErrorKind::kInvalidArgument, "candidate/reference count mismatch");
    }
    TokenizedCorpus corpus;
    for (const auto& c : candidates) corpus.candidates.push_back(tokenize(c, language).tokens);
    for (const auto& refs : references) {
        auto& out = corpus.references.emplace_back();
        for (const auto& r : refs) out.push_back(tokenize(r, language).tokens);
    }
    return corpus;
}

} // namespace detail

/// Corpus-level BLEU-max_n over raw texts.
inline double bleu(std::span<const std::string> candidates, std::span<const std::vector<std::string>> references,
                   int max_n, std::string_view language = "en") {
    auto corpus = detail::tokenize_corpus(candidates, references, language);
    return bleu_tokens(corpus.candidates, corpus.references, max_n);
}

// ---------------------------------------------------------------------------
// CIDEr-D (COCO caption evaluation variant: tf-idf over n = 1..4, clipped, sigma = 6, x10)

struct CiderResult {
    double score = 0.0;
    std::vector<double> per_item;
};

namespace detail {

struct CiderVec {
    std::array<std::unordered_map<std::string, double>, 4> vec;
    std::array<double, 4> norm{};
    int length = 0;
};

inline NgramCounts cook(const std::vector<std::string>& tokens) {
    NgramCounts all;
    for (std::size_t n = 1; n <= 4; ++n) {
        for (auto& [g, c] : ngram_counts(tokens, n)) all[std::to_string(n) + '\x1e' + g] = c;
    }
    return all;
}

inline std::size_t cooked_order(const std::string& key) { return static_cast<std::size_t>(key[0] - '0'); }

} // namespace detail

inline CiderResult cider_d_tokens(std::span<const std::vector<std::string>> candidates,
                                  std::span<const std::vector<std::vector<std::string>>> references,
                                  double sigma = 6.0) {
    if (candidates.empty()) throw Error(ErrorKind::kInvalidArgument, "empty corpus");
    if (candidates.size() != references.size()) {
        throw Error(ErrorKind::kInvalidArgument, "candidate/reference count mismatch");
    }
    std::vector<NgramCounts> cand_cooked;
    std::vector<std::vector<NgramCounts>> ref_cooked;
    std::unordered_map<std::string, double> doc_freq;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        if (references[i].empty()) throw Error(ErrorKind::kInvalidArgument, "item without references");
        cand_cooked.push_back(detail::cook(candidates[i]));
        auto& refs = ref_cooked.emplace_back();
        std::unordered_set<std::string> seen;
        for (const auto& r : references[i]) {
            refs.push_back(detail::cook(r));
            for (const auto& [g, c] : refs.back()) seen.insert(g);
        }
        for (const auto& g : seen) doc_freq[g] += 1.0;
    }
    const double ref_len = std::log(static_cast<double>(candidates.size()));

    auto to_vec = [&](const NgramCounts& counts) {
        detail::CiderVec v;
        for (const auto& [g, tf] : counts) {
            auto it = doc_freq.find(g);
            const double df = std::log(std::max(1.0, it == doc_freq.end() ? 0.0 : it->second));
            const std::size_t n = detail::cooked_order(g) - 1;
            const double w = static_cast<double>(tf) * (ref_len - df);
            v.vec[n][g] = w;
            v.norm[n] += w * w;
            // Length counts bigram occurrences, as in the COCO implementation.
            if (n == 1) v.length += tf;
        }
        for (double& x : v.norm) x = std::sqrt(x);
        return v;
    };

    CiderResult result;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        const detail::CiderVec hyp = to_vec(cand_cooked[i]);
        std::array<double, 4> score{};
        for (const auto& ref_counts : ref_cooked[i]) {
            const detail::CiderVec ref = to_vec(ref_counts);
            const double delta = static_cast<double>(hyp.length - ref.length);
            for (std::size_t n = 0; n < 4; ++n) {
                double val = 0.0;
                for (const auto& [g, w] : hyp.vec[n]) {
                    auto it = ref.vec[n].find(g);
                    if (it != ref.vec[n].end()) val += std::min(w, it->second) * it->second;
                }
                if (hyp.norm[n] != 0.0 && ref.norm[n] != 0.0) val /= hyp.norm[n] * ref.norm[n];
                val *= std::exp(-(delta * delta) / (2.0 * sigma * sigma));
                score[n] += val;
            }
        }
        double avg = (score[0] + score[1] + score[2] + score[3]) / 4.0;
        avg /= static_cast<double>(ref_cooked[i].size());
        avg *= 10.0;
        result.per_item.push_back(avg);
    }
    double total = 0.0;
    for (double s : result.per_item) total += s;
    result.score = total / static_cast<double>(result.per_item.size());
    return result;
}

inline double cider_d(std::span<const std::string> candidates, std::span<const std::vector<std::string>> references,
                      std::string_view language = "en") {
    auto corpus = detail::tokenize_corpus(candidates, references, language);
    return cider_d_tokens(corpus.candidates, corpus.references).score;
}

// ---------------------------------------------------------------------------
// RefSigLIPScore

/// Harmonic mean of max(cos(caption, image), 0) and the best max(cos(caption, ref), 0).
inline double ref_siglip_score(const EmbeddingVector& caption, const EmbeddingVector& image,
                               std::span<const EmbeddingVector> references) {
    const double a = std::max(cosine_similarity(caption, image), 0.0);
    double b = 0.0;
    for (const auto& r : references) b = std::max(b, std::max(cosine_similarity(caption, r), 0.0));
    if (a <= 0.0 || b <= 0.0) return 0.0;
    return 2.0 * a * b / (a + b);
}

// ---------------------------------------------------------------------------
// Prompt diagnostics

struct OverlapPR {
    double precision = 0.0;
    double recall = 0.0;
};

/// Unique n-gram sets A (prompt) and B (references): P = |A∩B|/|A|, R = |A∩B|/|B|.
inline OverlapPR ngram_overlap_sets(const std::unordered_set<std::string>& a, const std::unordered_set<std::string>& b) {
    std::size_t common = 0;
    for (const auto& g : a) common += b.count(g);
    OverlapPR out;
    if (!a.empty()) out.precision = static_cast<double>(common) / static_cast<double>(a.size());
    if (!b.empty()) out.recall = static_cast<double>(common) / static_cast<double>(b.size());
    return out;
}

inline OverlapPR ngram_overlap(std::span<const std::string> prompt_captions,
                               std::span<const std::string> reference_captions, std::size_t n,
                               std::string_view language = "en") {
    if (n == 0) throw Error(ErrorKind::kInvalidArgument, "n-gram order must be >= 1");
    std::unordered_set<std::string> a;
    std::unordered_set<std::string> b;
    for (const auto& t : prompt_captions) a.merge(ngram_set(tokenize(t, language).tokens, n));
    for (const auto& t : reference_captions) b.merge(ngram_set(tokenize(t, language).tokens, n));
    return ngram_overlap_sets(a, b);
}

struct AttributionCounts {
    std::size_t valid_in = 0;
    std::size_t invalid_in = 0;
    std::size_t valid_out = 0;
    std::size_t invalid_out = 0;

    std::size_t total() const noexcept { return valid_in + invalid_in + valid_out + invalid_out; }
    AttributionCounts& operator+=(const AttributionCounts& o) {
        valid_in += o.valid_in;
        invalid_in += o.invalid_in;
        valid_out += o.valid_out;
        invalid_out += o.invalid_out;
        return *this;
    }
};

/// Each unique generated 1-gram is valid (in some reference) or invalid, and in or out of the prompt.
inline AttributionCounts prompt_attribution(std::string_view generated, std::span<const std::string> references,
                                            std::span<const std::string> prompt_captions,
                                            std::string_view language = "en") {
    std::unordered_set<std::string> ref_words;
    for (const auto& r : references) ref_words.merge(ngram_set(tokenize(r, language).tokens, 1));
    std::unordered_set<std::string> prompt_words;
    for (const auto& p : prompt_captions) prompt_words.merge(ngram_set(tokenize(p, language).tokens, 1));

    AttributionCounts out;
    for (const auto& w : ngram_set(tokenize(generated, language).tokens, 1)) {
        const bool valid = ref_words.count(w) > 0;
        const bool in_prompt = prompt_words.count(w) > 0;
        if (valid && in_prompt) ++out.valid_in;
        else if (!valid && in_prompt) ++out.invalid_in;
        else if (valid) ++out.valid_out;
        else ++out.invalid_out;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Report

struct OverlapScores {
    double p1 = 0.0;
    double p4 = 0.0;
    double r1 = 0.0;
    double r4 = 0.0;
    std::size_t images = 0;
};

struct LanguageScores {
    double bleu1 = 0.0;
    double bleu4 = 0.0;
    double cider_d = 0.0;
    std::optional<double> ref_siglip;
    std::size_t items = 0;
    std::optional<OverlapScores> overlap;
    std::optional<AttributionCounts> attribution;
};

struct MetricReport {
    std::string dataset;
    std::map<std::string, LanguageScores> languages;
};

inline nlohmann::json to_json(const MetricReport& report) {
    nlohmann::json langs = nlohmann::json::object();
    for (const auto& [code, s] : report.languages) {
        nlohmann::json j{{"bleu1", s.bleu1}, {"bleu4", s.bleu4}, {"cider_d", s.cider_d}, {"items", s.items}};
        j["ref_siglip"] = s.ref_siglip ? nlohmann::json(*s.ref_siglip) : nlohmann::json(nullptr);
        if (s.overlap) {
            j["overlap"] = {{"p1", s.overlap->p1}, {"p4", s.overlap->p4}, {"r1", s.overlap->r1},
                            {"r4", s.overlap->r4}, {"images", s.overlap->images}};
        }
        if (s.attribution) {
            j["attribution"] = {{"valid_in", s.attribution->valid_in},
                                {"invalid_in", s.attribution->invalid_in},
                                {"valid_out", s.attribution->valid_out},
                                {"invalid_out", s.attribution->invalid_out}};
        }
        langs[code] = std::move(j);
    }
    return {{"dataset", report.dataset}, {"languages", langs}};
}

/// Plain-text tables: scores per language, then overlap and attribution when present.
inline std::string render_report_table(const MetricReport& report) {
    std::ostringstream os;
    os << std::fixed;
    os << std::left << std::setw(14) << "Dataset" << std::setw(6) << "Lang" << std::right << std::setw(8) << "BLEU1"
       << std::setw(8) << "BLEU4" << std::setw(8) << "CIDEr" << std::setw(8) << "SigLIP" << std::setw(7) << "N"
       << '\n';
    for (const auto& [code, s] : report.languages) {
        os << std::left << std::setw(14) << report.dataset << std::setw(6) << code << std::right << std::setprecision(3)
           << std::setw(8) << s.bleu1 << std::setw(8) << s.bleu4 << std::setw(8) << s.cider_d;
        if (s.ref_siglip) os << std::setw(8) << *s.ref_siglip;
        else os << std::setw(8) << "-";
        os << std::setw(7) << s.items << '\n';
    }
    bool any_overlap = false;
    for (const auto& [code, s] : report.languages) any_overlap = any_overlap || s.overlap.has_value();
    if (any_overlap) {
        os << "\nPrompt-reference overlap (%)\n";
        os << std::left << std::setw(14) << "Dataset" << std::setw(6) << "Lang" << std::right << std::setw(8) << "P-1"
           << std::setw(8) << "P-4" << std::setw(8) << "R-1" << std::setw(8) << "R-4" << '\n';
        for (const auto& [code, s] : report.languages) {
            if (!s.overlap) continue;
            os << std::left << std::setw(14) << report.dataset << std::setw(6) << code << std::right
               << std::setprecision(0) << std::setw(8) << 100.0 * s.overlap->p1 << std::setw(8) << 100.0 * s.overlap->p4
               << std::setw(8) << 100.0 * s.overlap->r1 << std::setw(8) << 100.0 * s.overlap->r4 << '\n';
        }
        os << "\nGenerated 1-grams (valid/invalid x in/out of prompt)\n";
        os << std::left << std::setw(14) << "Dataset" << std::setw(6) << "Lang" << std::right << std::setw(10)
           << "valid-in" << std::setw(10) << "valid-out" << std::setw(12) << "invalid-in" << std::setw(12)
           << "invalid-out" << '\n';
        for (const auto& [code, s] : report.languages) {
            if (!s.attribution) continue;
            os << std::left << std::setw(14) << report.dataset << std::setw(6) << code << std::right << std::setw(10)
               << s.attribution->valid_in << std::setw(10) << s.attribution->valid_out << std::setw(12)
               << s.attribution->invalid_in << std::setw(12) << s.attribution->invalid_out << '\n';
        }
    }
    return os.str();
}

} // namespace rsrag
