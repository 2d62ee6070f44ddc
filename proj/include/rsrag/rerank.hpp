#pragma once

#include "rsrag/datastore.hpp"
#include "rsrag/graph_rank.hpp"
#include "rsrag/pool.hpp"

#include <algorithm>
#include <numeric>
#include <unordered_map>
#include <vector>

namespace rsrag {

/// Pool element -> graph node index. A caption that appears in several lists is a single node.
struct PoolNodeMap {
    std::vector<std::size_t> retrieved;
    std::vector<std::size_t> images;
    std::vector<std::vector<std::size_t>> similar;
    std::vector<std::vector<std::size_t>> gold;
};

struct PoolGraph {
    std::vector<GraphNode> nodes;
    PoolNodeMap map;
};

struct ReRankedPool {
    CandidatePool pool;
    bool by_pagerank = false;
};

/// Builds one node per distinct pool element with s_i = cos(query, node embedding).
inline PoolGraph pool_graph_nodes(const Datastore& store, const CandidatePool& pool, const EmbeddingVector& query) {
    PoolGraph out;
    std::unordered_map<std::string, std::size_t> caption_nodes;
    std::unordered_map<std::string, std::size_t> image_nodes;

    auto caption_node = [&](const PoolCaption& c, NodeKind kind) {
        auto it = caption_nodes.find(c.caption_id);
        if (it != caption_nodes.end()) return it->second;
        EmbeddingVector emb = store.caption_embedding(c.caption_id);
        const double s = cosine_similarity(query, emb);
        out.nodes.push_back(GraphNode{out.nodes.size(), kind, c.caption_id, std::move(emb), s});
        caption_nodes.emplace(c.caption_id, out.nodes.size() - 1);
        return out.nodes.size() - 1;
    };
    auto image_node = [&](const PoolImage& img) {
        auto it = image_nodes.find(img.image_id);
        if (it != image_nodes.end()) return it->second;
        EmbeddingVector emb = store.image_embedding(img.image_id);
        const double s = cosine_similarity(query, emb);
        out.nodes.push_back(GraphNode{out.nodes.size(), NodeKind::kSimilarImage, img.image_id, std::move(emb), s});
        image_nodes.emplace(img.image_id, out.nodes.size() - 1);
        return out.nodes.size() - 1;
    };

    for (const auto& c : pool.retrieved_captions) out.map.retrieved.push_back(caption_node(c, NodeKind::kRetrievedCaption));
    for (const auto& img : pool.similar_images) out.map.images.push_back(image_node(img));
    for (const auto& img : pool.similar_images) {
        auto& gold = out.map.gold.emplace_back();
        for (const auto& c : img.gold_captions) gold.push_back(caption_node(c, NodeKind::kGoldCaption));
        auto& similar = out.map.similar.emplace_back();
        for (const auto& c : img.similar_captions) similar.push_back(caption_node(c, NodeKind::kSimilarCaption));
    }
    return out;
}

namespace detail {

inline double node_score(const RankScores& scores, std::size_t node) {
    if (node >= scores.r.size()) throw Error(ErrorKind::kInvalidArgument, "unmapped pool element");
    return scores.r[node];
}

template <typename T>
void sort_by_score(std::vector<T>& items) {
    std::stable_sort(items.begin(), items.end(), [](const T& a, const T& b) { return a.score > b.score; });
}

} // namespace detail

/// Reorders retrieved captions, similar images and each image's similar captions by
/// descending PageRank score; equal scores keep their similarity order. Gold order is kept.
inline ReRankedPool rerank_pool(const CandidatePool& pool, const RankScores& scores, const PoolNodeMap& map) {
    if (map.retrieved.size() != pool.retrieved_captions.size() || map.images.size() != pool.similar_images.size() ||
        map.gold.size() != pool.similar_images.size() || map.similar.size() != pool.similar_images.size()) {
        throw Error(ErrorKind::kInvalidArgument, "unmapped pool element");
    }
    ReRankedPool out{pool, true};
    CandidatePool& p = out.pool;
    for (std::size_t i = 0; i < p.retrieved_captions.size(); ++i) {
        p.retrieved_captions[i].score = detail::node_score(scores, map.retrieved[i]);
    }
    for (std::size_t i = 0; i < p.similar_images.size(); ++i) {
        PoolImage& img = p.similar_images[i];
        img.score = detail::node_score(scores, map.images[i]);
        if (map.gold[i].size() != img.gold_captions.size() || map.similar[i].size() != img.similar_captions.size()) {
            throw Error(ErrorKind::kInvalidArgument, "unmapped pool element");
        }
        for (std::size_t k = 0; k < img.gold_captions.size(); ++k) {
            img.gold_captions[k].score = detail::node_score(scores, map.gold[i][k]);
        }
        for (std::size_t k = 0; k < img.similar_captions.size(); ++k) {
            img.similar_captions[k].score = detail::node_score(scores, map.similar[i][k]);
        }
        detail::sort_by_score(img.similar_captions);
    }
    detail::sort_by_score(p.retrieved_captions);
    detail::sort_by_score(p.similar_images);
    return out;
}

/// The no-PageRank ablation: scores are the retrieval similarities and order is unchanged.
inline ReRankedPool similarity_ranked(const CandidatePool& pool) {
    ReRankedPool out{pool, false};
    for (auto& c : out.pool.retrieved_captions) c.score = c.similarity;
    for (auto& img : out.pool.similar_images) {
        img.score = img.similarity;
        for (auto& c : img.similar_captions) c.score = c.similarity;
        for (auto& c : img.gold_captions) c.score = c.similarity;
    }
    return out;
}

struct PageRankOutcome {
    ReRankedPool pool;
    RankGraph graph;
    RankScores scores;
};

/// Graph construction, power iteration and re-ranking in one call.
inline PageRankOutcome pagerank_rerank(const Datastore& store, const CandidatePool& pool, const EmbeddingVector& query,
                                       double alpha, RankGraphOptions options = {}) {
    PoolGraph pg = pool_graph_nodes(store, pool, query);
    RankGraph graph = build_rank_graph(std::move(pg.nodes), alpha, options);
    RankScores scores = pagerank(graph);
    ReRankedPool reranked = rerank_pool(pool, scores, pg.map);
    return {std::move(reranked), std::move(graph), std::move(scores)};
}

} // namespace rsrag
