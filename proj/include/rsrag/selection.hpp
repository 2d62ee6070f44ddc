#pragma once

#include "rsrag/datastore.hpp"
#include "rsrag/error.hpp"
#include "rsrag/rerank.hpp"
#include "rsrag/text_util.hpp"

#include <algorithm>
#include <functional>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

namespace rsrag {

struct FewShotExample {
    std::string image_id;
    std::vector<std::string> retrieved_captions;  // k English texts
    std::string gold_caption;                     // target-language text
    std::string gold_caption_id;
};

struct PromptContent {
    std::vector<FewShotExample> examples;
    std::vector<std::string> input_captions;
    std::vector<std::string> input_caption_ids;
    /// Indices into the re-ranked retrieved caption list.
    std::vector<std::size_t> combination;
    std::size_t requested_examples = 0;
    std::vector<std::string> warnings;

    bool degraded() const noexcept { return examples.size() < requested_examples; }
};

/// Maps a gold caption to its text in the target language; nullopt when unavailable.
using GoldResolver = std::function<std::optional<std::string>(const PoolCaption&)>;

inline GoldResolver english_gold() {
    return [](const PoolCaption& c) -> std::optional<std::string> { return c.text; };
}

/// Gold captions in `language`, taken from the datastore translation table.
inline GoldResolver gold_in_language(const Datastore& store, std::string language) {
    if (!is_supported_language(language)) throw Error(ErrorKind::kUnsupportedLanguage, language);
    return [&store, language = std::move(language)](const PoolCaption& c) -> std::optional<std::string> {
        if (language == "en") return c.text;
        if (const std::string* t = store.translations().find(c.caption_id, language)) return *t;
        return std::nullopt;
    };
}

inline constexpr std::size_t kMaxCombinations = 2'000'000;

/// All k-subsets of [0, m) ordered by descending score sum; equal sums stay in lexicographic order.
inline std::vector<std::vector<std::size_t>> ranked_combinations(const std::vector<double>& scores, std::size_t k) {
    const std::size_t m = scores.size();
    if (k > m) throw Error(ErrorKind::kInsufficientCandidates, "k=" + std::to_string(k) + " > " + std::to_string(m));
    double count = 1.0;
    for (std::size_t i = 0; i < k; ++i) count = count * static_cast<double>(m - i) / static_cast<double>(i + 1);
    if (count > static_cast<double>(kMaxCombinations)) {
        throw Error(ErrorKind::kInvalidArgument, "too many caption combinations to enumerate");
    }

    std::vector<std::vector<std::size_t>> combos;
    std::vector<double> sums;
    std::vector<std::size_t> idx(k);
    for (std::size_t i = 0; i < k; ++i) idx[i] = i;
    while (true) {
        double sum = 0.0;
        for (std::size_t i : idx) sum += scores[i];
        combos.push_back(idx);
        sums.push_back(sum);
        // next lexicographic combination
        std::size_t pos = k;
        while (pos > 0 && idx[pos - 1] == m - k + pos - 1) --pos;
        if (pos == 0) break;
        ++idx[pos - 1];
        for (std::size_t i = pos; i < k; ++i) idx[i] = idx[i - 1] + 1;
    }

    std::vector<std::size_t> order(combos.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return sums[a] > sums[b]; });
    std::vector<std::vector<std::size_t>> out;
    out.reserve(order.size());
    for (std::size_t i : order) out.push_back(std::move(combos[i]));
    return out;
}

namespace detail {

/// Greedy walk over the ranked images for one caption combination.
/// Returns the examples built (fewer than `n_examples` means the combination is infeasible).
inline std::vector<FewShotExample> build_examples(const CandidatePool& pool, std::unordered_set<std::string> mask,
                                                  std::size_t n_examples, std::size_t k, const GoldResolver& gold_text) {
    std::vector<FewShotExample> examples;
    for (const PoolImage& img : pool.similar_images) {
        if (examples.size() == n_examples) break;

        const PoolCaption* gold = nullptr;
        std::string gold_rendered;
        for (const PoolCaption& g : img.gold_captions) {
            auto resolved = gold_text(g);
            if (!resolved || resolved->empty()) continue;
            if (mask.count(normalize_caption(g.text)) || mask.count(normalize_caption(*resolved))) continue;
            gold = &g;
            gold_rendered = std::move(*resolved);
            break;
        }
        if (!gold) continue;

        std::unordered_set<std::string> tentative = mask;
        tentative.insert(normalize_caption(gold->text));
        tentative.insert(normalize_caption(gold_rendered));
        std::vector<std::string> kept;
        for (const PoolCaption& c : img.similar_captions) {
            if (kept.size() == k) break;
            std::string norm = normalize_caption(c.text);
            if (tentative.count(norm)) continue;
            tentative.insert(std::move(norm));
            kept.push_back(c.text);
        }
        if (kept.size() < k) continue;

        mask = std::move(tentative);
        examples.push_back(FewShotExample{img.image_id, std::move(kept), std::move(gold_rendered), gold->caption_id});
    }
    return examples;
}

} // namespace detail

/// Repetition-free prompt content: the first caption combination (in descending score-sum
/// order) for which `n_examples` complete examples can be built. When no combination works
/// the example count is lowered one at a time, with a warning per step.
inline PromptContent select_prompt_content(const ReRankedPool& reranked, std::size_t n_examples, std::size_t k,
                                           const GoldResolver& gold_text = english_gold()) {
    if (k == 0) throw Error(ErrorKind::kInvalidArgument, "k must be >= 1");
    const CandidatePool& pool = reranked.pool;
    std::vector<double> scores;
    scores.reserve(pool.retrieved_captions.size());
    for (const auto& c : pool.retrieved_captions) scores.push_back(c.score);
    const auto combos = ranked_combinations(scores, k);

    PromptContent out;
    out.requested_examples = n_examples;
    for (std::size_t target = n_examples;; --target) {
        for (const auto& combo : combos) {
            std::unordered_set<std::string> mask;
            for (std::size_t i : combo) mask.insert(normalize_caption(pool.retrieved_captions[i].text));
            if (mask.size() < combo.size()) continue;

            auto examples = detail::build_examples(pool, mask, target, k, gold_text);
            if (examples.size() < target) continue;

            out.examples = std::move(examples);
            out.combination = combo;
            for (std::size_t i : combo) {
                out.input_captions.push_back(pool.retrieved_captions[i].text);
                out.input_caption_ids.push_back(pool.retrieved_captions[i].caption_id);
            }
            return out;
        }
        if (target == 0) break;
        out.warnings.push_back("no repetition-free prompt with " + std::to_string(target) +
                               " examples; retrying with " + std::to_string(target - 1));
    }
    throw Error(ErrorKind::kInsufficientCandidates, "fewer than k distinct retrieved captions");
}

} // namespace rsrag
