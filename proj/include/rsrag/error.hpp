#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rsrag {

enum class ErrorKind {
    kInvalidArgument,
    kIo,
    kBadMagic,
    kMalformedHeader,
    kDimensionMismatch,
    kDanglingEmbeddingRow,
    kDuplicateId,
    kUnknownId,
    kEmptyDatastore,
    kDegenerateEmbedding,
    kNonConvergence,
    kInsufficientCandidates,
    kUnsupportedLanguage,
    kUnsupportedMediaType,
    kTransport,
    kHttpStatus,
    kEmptyCompletion,
    kDimensionInconsistency,
    kMalformedRecord,
};

inline std::string_view error_kind_name(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::kInvalidArgument: return "invalid argument";
    case ErrorKind::kIo: return "io error";
    case ErrorKind::kBadMagic: return "bad magic";
    case ErrorKind::kMalformedHeader: return "malformed header";
    case ErrorKind::kDimensionMismatch: return "dimension mismatch";
    case ErrorKind::kDanglingEmbeddingRow: return "dangling embedding_row";
    case ErrorKind::kDuplicateId: return "duplicate id";
    case ErrorKind::kUnknownId: return "unknown id";
    case ErrorKind::kEmptyDatastore: return "empty datastore";
    case ErrorKind::kDegenerateEmbedding: return "degenerate embedding";
    case ErrorKind::kNonConvergence: return "non-convergence";
    case ErrorKind::kInsufficientCandidates: return "insufficient candidates";
    case ErrorKind::kUnsupportedLanguage: return "unsupported language";
    case ErrorKind::kUnsupportedMediaType: return "unsupported media type";
    case ErrorKind::kTransport: return "transport failure";
    case ErrorKind::kHttpStatus: return "http status";
    case ErrorKind::kEmptyCompletion: return "empty completion";
    case ErrorKind::kDimensionInconsistency: return "dimension inconsistency";
    case ErrorKind::kMalformedRecord: return "malformed record";
    }
    return "error";
}

/// Every failure raised by the library. what() reads "<kind name>: <detail>".
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& detail)
        : std::runtime_error(compose(kind, detail)), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    static std::string compose(ErrorKind kind, const std::string& detail) {
        std::string msg(error_kind_name(kind));
        if (!detail.empty()) {
            msg += ": ";
            msg += detail;
        }
        return msg;
    }

    ErrorKind kind_;
};

} // namespace rsrag
