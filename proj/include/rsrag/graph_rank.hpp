#pragma once

// Personalized PageRank over a fully connected similarity graph.
//
//   W_ij = max(cos(e_i, e_j), 0) / sum_k max(cos(e_i, e_k), 0)     (row-stochastic)
//   v_i  = max(s_i, 0) / sum_j max(s_j, 0)                          (personalization)
//   r    = alpha * W^T r + (1 - alpha) * v                          (fixed point)

#include "rsrag/embedding.hpp"
#include "rsrag/error.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace rsrag {

enum class NodeKind { kRetrievedCaption, kSimilarImage, kGoldCaption, kSimilarCaption };

inline std::string_view node_kind_name(NodeKind k) {
    switch (k) {
    case NodeKind::kRetrievedCaption: return "retrieved_caption";
    case NodeKind::kSimilarImage: return "similar_image";
    case NodeKind::kGoldCaption: return "gold_caption";
    case NodeKind::kSimilarCaption: return "similar_caption";
    }
    return "retrieved_caption";
}

struct GraphNode {
    std::size_t node_id = 0;
    NodeKind kind = NodeKind::kRetrievedCaption;
    std::string source_id;
    EmbeddingVector embedding;
    /// s_i: cosine between the node content and the query image.
    double query_similarity = 0.0;
};

struct RankGraphOptions {
    /// Literal formula: the self term (cosine 1) is part of each row. When false the
    /// diagonal is zero and an all-zero row falls back to uniform.
    bool include_diagonal = true;
};

struct RankGraph {
    std::vector<GraphNode> nodes;
    std::vector<double> weights;          // n*n, row-major
    std::vector<double> personalization;  // v
    double alpha = 0.9;

    std::size_t size() const noexcept { return nodes.size(); }
    double w(std::size_t i, std::size_t j) const { return weights[i * nodes.size() + j]; }
};

struct RankScores {
    std::vector<double> r;
    int iterations = 0;
    double residual = 0.0;
};

/// Raised when the power iteration hits max_iter; carries the last L1 residual.
class NonConvergenceError : public Error {
public:
    NonConvergenceError(int iterations, double residual)
        : Error(ErrorKind::kNonConvergence,
                "no convergence after " + std::to_string(iterations) + " iterations, residual " +
                    std::to_string(residual)),
          residual_(residual) {}

    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

namespace detail {

inline void normalize_or_uniform(std::vector<double>& xs) {
    double sum = 0.0;
    for (double x : xs) sum += x;
    if (sum > 0.0) {
        for (double& x : xs) x /= sum;
    } else {
        const double u = 1.0 / static_cast<double>(xs.size());
        for (double& x : xs) x = u;
    }
}

} // namespace detail

inline RankGraph build_rank_graph(std::vector<GraphNode> nodes, double alpha, RankGraphOptions options = {}) {
    if (nodes.empty()) throw Error(ErrorKind::kInvalidArgument, "rank graph needs at least one node");
    if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorKind::kInvalidArgument, "alpha must lie in (0, 1)");
    const std::size_t n = nodes.size();
    const std::size_t dim = nodes.front().embedding.dim();
    for (std::size_t i = 0; i < n; ++i) {
        nodes[i].node_id = i;
        if (nodes[i].embedding.dim() != dim) throw Error(ErrorKind::kDimensionMismatch, "graph node " + nodes[i].source_id);
        require_nondegenerate(nodes[i].embedding, "graph node embedding");
    }

    RankGraph g;
    g.alpha = alpha;
    g.weights.assign(n * n, 0.0);
    std::vector<double> row(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < n; ++k) {
            if (i == k) {
                row[k] = options.include_diagonal ? 1.0 : 0.0;
            } else {
                row[k] = std::max(cosine_similarity(nodes[i].embedding, nodes[k].embedding), 0.0);
            }
        }
        detail::normalize_or_uniform(row);
        std::copy(row.begin(), row.end(), g.weights.begin() + static_cast<std::ptrdiff_t>(i * n));
    }

    g.personalization.resize(n);
    for (std::size_t i = 0; i < n; ++i) g.personalization[i] = std::max(nodes[i].query_similarity, 0.0);
    detail::normalize_or_uniform(g.personalization);
    g.nodes = std::move(nodes);
    return g;
}

/// One step r' = alpha W^T r + (1 - alpha) v.
inline std::vector<double> pagerank_step(const RankGraph& g, const std::vector<double>& r) {
    const std::size_t n = g.size();
    std::vector<double> next(n);
    for (std::size_t j = 0; j < n; ++j) next[j] = (1.0 - g.alpha) * g.personalization[j];
    for (std::size_t i = 0; i < n; ++i) {
        const double share = g.alpha * r[i];
        const double* wi = &g.weights[i * n];
        for (std::size_t j = 0; j < n; ++j) next[j] += share * wi[j];
    }
    return next;
}

/// Power iteration from r0 = v until the L1 change drops below `tol`.
inline RankScores pagerank(const RankGraph& g, double tol = 1e-10, int max_iter = 1000) {
    if (g.size() == 0) throw Error(ErrorKind::kInvalidArgument, "empty rank graph");
    RankScores out;
    out.r = g.personalization;
    out.residual = std::numeric_limits<double>::infinity();
    for (int it = 1; it <= max_iter; ++it) {
        std::vector<double> next = pagerank_step(g, out.r);
        double residual = 0.0;
        for (std::size_t j = 0; j < next.size(); ++j) residual += std::abs(next[j] - out.r[j]);
        out.r = std::move(next);
        out.iterations = it;
        out.residual = residual;
        if (residual < tol) return out;
    }
    throw NonConvergenceError(out.iterations, out.residual);
}

/// Debug dump of nodes, W, v and r.
inline nlohmann::json graph_to_json(const RankGraph& g, const RankScores* scores = nullptr) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& node : g.nodes) {
        nodes.push_back({{"node_id", node.node_id},
                         {"kind", node_kind_name(node.kind)},
                         {"source_id", node.source_id},
                         {"query_similarity", node.query_similarity}});
    }
    const std::size_t n = g.size();
    nlohmann::json w = nlohmann::json::array();
    for (std::size_t i = 0; i < n; ++i) {
        w.push_back(std::vector<double>(g.weights.begin() + static_cast<std::ptrdiff_t>(i * n),
                                        g.weights.begin() + static_cast<std::ptrdiff_t>((i + 1) * n)));
    }
    nlohmann::json j{{"alpha", g.alpha}, {"nodes", nodes}, {"W", w}, {"v", g.personalization}};
    if (scores) {
        j["r"] = scores->r;
        j["iterations"] = scores->iterations;
        j["residual"] = scores->residual;
    }
    return j;
}

} // namespace rsrag
