#pragma once

#include "rsrag/datastore.hpp"
#include "rsrag/embedding.hpp"
#include "rsrag/text_util.hpp"

#include <nlohmann/json.hpp>

#include <string>
#include <unordered_set>
#include <vector>

namespace rsrag {

struct PoolCaption {
    std::string caption_id;
    std::string text;
    /// Cosine to the retrieval anchor (query image, or the owning similar image).
    double similarity = 0.0;
    /// Ranking score: PageRank mass after re-ranking, otherwise the similarity.
    double score = 0.0;
};

struct PoolImage {
    std::string image_id;
    double similarity = 0.0;
    double score = 0.0;
    /// Captions retrieved against this image's embedding (excluding its own captions).
    std::vector<PoolCaption> similar_captions;
    /// This image's own captions, ranked by similarity to it, minus any retrieved caption.
    std::vector<PoolCaption> gold_captions;
};

struct CandidatePool {
    std::string query_image_id;
    std::vector<PoolCaption> retrieved_captions;
    std::vector<PoolImage> similar_images;
};

struct PoolOptions {
    std::size_t pool_size = 10;
    SplitSet splits = SplitSet::train_only();
};

namespace detail {

inline PoolCaption pool_caption(const Datastore& store, const RetrievalHit& hit) {
    const CaptionRecord& c = store.captions()[hit.index];
    return PoolCaption{c.caption_id, c.text, hit.score, hit.score};
}

} // namespace detail

/// Top captions and top images for the query, each image carrying its ranked gold captions
/// and its own nearest captions. Gold captions equal to a retrieved caption are dropped.
/// Lists are shorter than pool_size when the store is small.
inline CandidatePool assemble_pool(const Datastore& store, const EmbeddingVector& query,
                                   std::string_view query_image_id = {}, PoolOptions options = {}) {
    if (options.pool_size == 0) throw Error(ErrorKind::kInvalidArgument, "pool_size must be >= 1");
    const std::string query_id(query_image_id);
    auto in_scope = [&](const CaptionRecord& c) {
        return options.splits.contains(c.split) && (query_id.empty() || c.image_id != query_id);
    };

    CandidatePool pool;
    pool.query_image_id = query_id;
    std::unordered_set<std::string> retrieved_texts;
    for (const auto& hit : retrieve_captions_where(store, query, options.pool_size, in_scope)) {
        pool.retrieved_captions.push_back(detail::pool_caption(store, hit));
        retrieved_texts.insert(normalize_caption(pool.retrieved_captions.back().text));
    }

    const auto image_hits = retrieve_images_where(store, query, options.pool_size, [&](const ImageRecord& img) {
        return options.splits.contains(img.split) && (query_id.empty() || img.image_id != query_id);
    });
    for (const auto& hit : image_hits) {
        const ImageRecord& img = store.images()[hit.index];
        PoolImage entry{img.image_id, hit.score, hit.score, {}, {}};

        for (const auto& gold : rank_captions_of_image(store, img.image_id)) {
            PoolCaption pc = detail::pool_caption(store, gold);
            if (retrieved_texts.count(normalize_caption(pc.text))) continue;
            entry.gold_captions.push_back(std::move(pc));
        }

        const EmbeddingVector image_emb = EmbeddingVector::from_span(store.image_vector(img));
        const auto similar = retrieve_captions_where(store, image_emb, options.pool_size, [&](const CaptionRecord& c) {
            return in_scope(c) && c.image_id != img.image_id;
        });
        for (const auto& hit_c : similar) entry.similar_captions.push_back(detail::pool_caption(store, hit_c));

        pool.similar_images.push_back(std::move(entry));
    }
    return pool;
}

// ---------------------------------------------------------------------------
// JSON (manifest records)

inline nlohmann::json to_json(const PoolCaption& c) {
    return {{"caption_id", c.caption_id}, {"text", c.text}, {"similarity", c.similarity}, {"score", c.score}};
}

inline nlohmann::json to_json(const CandidatePool& pool) {
    nlohmann::json captions = nlohmann::json::array();
    for (const auto& c : pool.retrieved_captions) captions.push_back(to_json(c));
    nlohmann::json images = nlohmann::json::array();
    for (const auto& img : pool.similar_images) {
        nlohmann::json sim = nlohmann::json::array();
        for (const auto& c : img.similar_captions) sim.push_back(to_json(c));
        nlohmann::json gold = nlohmann::json::array();
        for (const auto& c : img.gold_captions) gold.push_back(to_json(c));
        images.push_back({{"image_id", img.image_id},
                          {"similarity", img.similarity},
                          {"score", img.score},
                          {"similar_captions", sim},
                          {"gold_captions", gold}});
    }
    return {{"query_image_id", pool.query_image_id}, {"retrieved_captions", captions}, {"similar_images", images}};
}

} // namespace rsrag
