#pragma once

// Closed-form personalized PageRank, r = (1 - alpha) (I - alpha W^T)^{-1} v, via a dense LU
// solve. Independent of the power iteration in graph_rank.hpp; intended for tests.

#include "rsrag/error.hpp"
#include "rsrag/graph_rank.hpp"

#include <Eigen/Dense>

namespace rsrag {

inline constexpr std::size_t kOracleMaxNodes = 200;

inline RankScores pagerank_oracle(const RankGraph& g) {
    const auto n = static_cast<Eigen::Index>(g.size());
    if (n == 0 || g.size() > kOracleMaxNodes) {
        throw Error(ErrorKind::kInvalidArgument, "oracle supports 1.." + std::to_string(kOracleMaxNodes) + " nodes");
    }
    Eigen::MatrixXd w(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) w(i, j) = g.w(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
    }
    const Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(g.personalization.data(), n);
    const Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n) - g.alpha * w.transpose();
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);
    // I - alpha W^T is strictly column diagonally dominant for alpha < 1, hence invertible.
    if (!(std::abs(lu.determinant()) > 0.0)) throw Error(ErrorKind::kInvalidArgument, "singular PageRank system");
    const Eigen::VectorXd r = lu.solve((1.0 - g.alpha) * v);

    RankScores out;
    out.r.assign(r.data(), r.data() + n);
    out.residual = (a * r - (1.0 - g.alpha) * v).lpNorm<1>();
    return out;
}

} // namespace rsrag
