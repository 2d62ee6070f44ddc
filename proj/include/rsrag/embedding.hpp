#pragma once

#include "rsrag/error.hpp"

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace rsrag {

/// Dot product of float vectors accumulated in double precision.
inline double dot(std::span<const float> a, std::span<const float> b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        acc += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    }
    return acc;
}

inline double euclidean_norm(std::span<const float> a) { return std::sqrt(dot(a, a)); }

/// Cosine given precomputed norms; both norms must be positive.
inline double cosine(std::span<const float> a, double norm_a, std::span<const float> b, double norm_b) {
    return dot(a, b) / (norm_a * norm_b);
}

/// Fixed-dimension embedding with its Euclidean norm cached at construction.
class EmbeddingVector {
public:
    EmbeddingVector() = default;

    explicit EmbeddingVector(std::vector<float> values) : values_(std::move(values)) {
        for (float v : values_) {
            if (!std::isfinite(v)) throw Error(ErrorKind::kInvalidArgument, "non-finite embedding value");
        }
        norm_ = euclidean_norm(values_);
    }

    EmbeddingVector(std::initializer_list<float> values) : EmbeddingVector(std::vector<float>(values)) {}

    static EmbeddingVector from_span(std::span<const float> values) {
        return EmbeddingVector(std::vector<float>(values.begin(), values.end()));
    }

    std::size_t dim() const noexcept { return values_.size(); }
    std::span<const float> values() const noexcept { return values_; }
    double norm() const noexcept { return norm_; }
    bool degenerate() const noexcept { return norm_ == 0.0; }

    friend bool operator==(const EmbeddingVector& a, const EmbeddingVector& b) { return a.values_ == b.values_; }

private:
    std::vector<float> values_;
    double norm_ = 0.0;
};

inline void require_nondegenerate(const EmbeddingVector& v, const char* what = "embedding") {
    if (v.dim() == 0 || v.degenerate()) throw Error(ErrorKind::kDegenerateEmbedding, std::string(what) + " has zero norm");
}

/// dot(a,b) / (|a| |b|). Symmetric bit-for-bit in its arguments.
inline double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.dim() != b.dim()) {
        throw Error(ErrorKind::kDimensionMismatch,
                    "cosine of dim " + std::to_string(a.dim()) + " and " + std::to_string(b.dim()));
    }
    require_nondegenerate(a);
    require_nondegenerate(b);
    return cosine(a.values(), a.norm(), b.values(), b.norm());
}

} // namespace rsrag
