#pragma once

#include "rsrag/embedding.hpp"
#include "rsrag/error.hpp"
#include "rsrag/language.hpp"
#include "rsrag/vector_file.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace rsrag {

enum class Split : std::uint8_t { kTrain = 0, kVal = 1, kTest = 2 };

inline std::string_view split_name(Split s) {
    switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
    }
    return "train";
}

inline Split parse_split(std::string_view name) {
    if (name == "train") return Split::kTrain;
    if (name == "val") return Split::kVal;
    if (name == "test") return Split::kTest;
    throw Error(ErrorKind::kMalformedRecord, "unknown split '" + std::string(name) + "'");
}

/// Small bit set over the three splits.
class SplitSet {
public:
    constexpr SplitSet() = default;
    constexpr SplitSet(std::initializer_list<Split> splits) {
        for (Split s : splits) insert(s);
    }
    static constexpr SplitSet train_only() { return SplitSet{Split::kTrain}; }
    static constexpr SplitSet all() { return SplitSet{Split::kTrain, Split::kVal, Split::kTest}; }

    constexpr void insert(Split s) { bits_ |= static_cast<std::uint8_t>(1u << static_cast<unsigned>(s)); }
    constexpr bool contains(Split s) const { return (bits_ >> static_cast<unsigned>(s)) & 1u; }
    constexpr bool empty() const { return bits_ == 0; }

    friend constexpr bool operator==(SplitSet, SplitSet) = default;

private:
    std::uint8_t bits_ = 0;
};

struct CaptionRecord {
    std::string caption_id;
    std::string image_id;
    std::string text;
    Split split = Split::kTrain;
    std::size_t embedding_row = 0;
};

struct ImageRecord {
    std::string image_id;
    std::string image_ref;
    Split split = Split::kTrain;
    std::size_t embedding_row = 0;
    std::vector<std::string> caption_ids;
};

/// One line of the metadata JSONL file (one per caption).
struct MetadataRow {
    std::string caption_id;
    std::string image_id;
    std::string split;
    std::string text;
    std::int64_t caption_row = -1;
    std::optional<std::int64_t> image_row;
    std::optional<std::string> image_ref;
};

/// Pre-translated caption texts keyed by (caption_id, language code).
class TranslationTable {
public:
    void add(const std::string& caption_id, const std::string& language, const std::string& text) {
        if (!is_supported_language(language)) throw Error(ErrorKind::kUnsupportedLanguage, language);
        if (text.empty()) throw Error(ErrorKind::kMalformedRecord, "empty translation for " + caption_id);
        auto [it, inserted] = entries_.try_emplace({caption_id, language}, text);
        if (!inserted && it->second != text) {
            throw Error(ErrorKind::kDuplicateId, "conflicting translation for " + caption_id + "/" + language);
        }
    }

    const std::string* find(const std::string& caption_id, const std::string& language) const {
        auto it = entries_.find({caption_id, language});
        return it == entries_.end() ? nullptr : &it->second;
    }

    bool contains(const std::string& caption_id, const std::string& language) const {
        return find(caption_id, language) != nullptr;
    }

    std::size_t size() const noexcept { return entries_.size(); }
    const auto& entries() const noexcept { return entries_; }

private:
    std::map<std::pair<std::string, std::string>, std::string> entries_;
};

struct RetrievalHit {
    std::string target_id;
    double score = 0.0;
    int rank = 0;
    /// Position of the record in Datastore::captions() or Datastore::images().
    std::size_t index = 0;
};

struct SplitCounts {
    std::array<std::size_t, 3> images{};
    std::array<std::size_t, 3> captions{};
};

class Datastore;

namespace detail {

inline void check_rows_nondegenerate(const VectorMatrix& m, const char* label, std::vector<double>& norms) {
    norms.resize(m.count);
    for (std::size_t r = 0; r < m.count; ++r) {
        norms[r] = euclidean_norm(m.row(r));
        if (norms[r] == 0.0) {
            throw Error(ErrorKind::kDegenerateEmbedding, std::string(label) + " row " + std::to_string(r));
        }
    }
}

} // namespace detail

/// Immutable image/caption index. Safe for any number of concurrent readers.
class Datastore {
public:
    static Datastore from_parts(VectorMatrix image_vectors, VectorMatrix caption_vectors,
                                const std::vector<MetadataRow>& rows, TranslationTable translations = {}) {
        if (caption_vectors.count == 0) throw Error(ErrorKind::kEmptyDatastore, "caption vector file has no rows");
        if (rows.empty()) throw Error(ErrorKind::kEmptyDatastore, "metadata has no captions");
        if (image_vectors.dim != caption_vectors.dim) {
            throw Error(ErrorKind::kDimensionMismatch, "image dim " + std::to_string(image_vectors.dim) +
                                                           " != caption dim " + std::to_string(caption_vectors.dim));
        }

        Datastore ds;
        ds.dim_ = caption_vectors.dim;
        detail::check_rows_nondegenerate(image_vectors, "image vector", ds.image_norms_);
        detail::check_rows_nondegenerate(caption_vectors, "caption vector", ds.caption_norms_);

        for (const MetadataRow& row : rows) {
            if (row.caption_id.empty() || row.image_id.empty()) {
                throw Error(ErrorKind::kMalformedRecord, "metadata row missing caption_id or image_id");
            }
            if (row.text.empty()) throw Error(ErrorKind::kMalformedRecord, "empty text for " + row.caption_id);
            if (row.caption_row < 0 || static_cast<std::uint64_t>(row.caption_row) >= caption_vectors.count) {
                throw Error(ErrorKind::kDanglingEmbeddingRow,
                            "caption " + row.caption_id + " caption_row " + std::to_string(row.caption_row));
            }
            const Split split = parse_split(row.split);
            if (ds.caption_index_.count(row.caption_id)) throw Error(ErrorKind::kDuplicateId, row.caption_id);

            auto img_it = ds.image_index_.find(row.image_id);
            if (img_it == ds.image_index_.end()) {
                ImageRecord img;
                img.image_id = row.image_id;
                img.split = split;
                img.embedding_row = SIZE_MAX;
                img_it = ds.image_index_.emplace(row.image_id, ds.images_.size()).first;
                ds.images_.push_back(std::move(img));
            }
            ImageRecord& img = ds.images_[img_it->second];
            if (img.split != split) throw Error(ErrorKind::kMalformedRecord, "image " + row.image_id + " spans splits");
            if (row.image_row) {
                if (*row.image_row < 0 || static_cast<std::uint64_t>(*row.image_row) >= image_vectors.count) {
                    throw Error(ErrorKind::kDanglingEmbeddingRow,
                                "image " + row.image_id + " image_row " + std::to_string(*row.image_row));
                }
                const auto image_row = static_cast<std::size_t>(*row.image_row);
                const std::string ref = row.image_ref.value_or("");
                if (img.embedding_row == SIZE_MAX) {
                    img.embedding_row = image_row;
                    img.image_ref = ref;
                } else if (img.embedding_row != image_row || (row.image_ref && img.image_ref != ref)) {
                    throw Error(ErrorKind::kDuplicateId, "conflicting image fields for " + row.image_id);
                }
            }
            img.caption_ids.push_back(row.caption_id);

            ds.caption_index_.emplace(row.caption_id, ds.captions_.size());
            ds.captions_.push_back(CaptionRecord{row.caption_id, row.image_id, row.text, split,
                                                 static_cast<std::size_t>(row.caption_row)});
        }
        for (const ImageRecord& img : ds.images_) {
            if (img.embedding_row == SIZE_MAX) {
                throw Error(ErrorKind::kMalformedRecord, "image " + img.image_id + " has no image_row");
            }
        }
        for (const auto& [key, text] : translations.entries()) {
            if (!ds.caption_index_.count(key.first)) {
                throw Error(ErrorKind::kUnknownId, "translation references caption " + key.first);
            }
        }

        ds.image_vectors_ = std::move(image_vectors);
        ds.caption_vectors_ = std::move(caption_vectors);
        ds.translations_ = std::move(translations);
        return ds;
    }

    std::uint32_t dim() const noexcept { return dim_; }
    std::span<const ImageRecord> images() const noexcept { return images_; }
    std::span<const CaptionRecord> captions() const noexcept { return captions_; }
    const TranslationTable& translations() const noexcept { return translations_; }

    std::optional<std::size_t> find_caption(std::string_view id) const {
        auto it = caption_index_.find(std::string(id));
        if (it == caption_index_.end()) return std::nullopt;
        return it->second;
    }
    std::optional<std::size_t> find_image(std::string_view id) const {
        auto it = image_index_.find(std::string(id));
        if (it == image_index_.end()) return std::nullopt;
        return it->second;
    }

    const CaptionRecord& caption(std::string_view id) const {
        auto idx = find_caption(id);
        if (!idx) throw Error(ErrorKind::kUnknownId, "caption " + std::string(id));
        return captions_[*idx];
    }
    const ImageRecord& image(std::string_view id) const {
        auto idx = find_image(id);
        if (!idx) throw Error(ErrorKind::kUnknownId, "image " + std::string(id));
        return images_[*idx];
    }

    std::span<const float> caption_vector(const CaptionRecord& c) const { return caption_vectors_.row(c.embedding_row); }
    std::span<const float> image_vector(const ImageRecord& i) const { return image_vectors_.row(i.embedding_row); }
    double caption_norm(const CaptionRecord& c) const { return caption_norms_[c.embedding_row]; }
    double image_norm(const ImageRecord& i) const { return image_norms_[i.embedding_row]; }

    EmbeddingVector caption_embedding(std::string_view caption_id) const {
        return EmbeddingVector::from_span(caption_vector(caption(caption_id)));
    }
    EmbeddingVector image_embedding(std::string_view image_id) const {
        return EmbeddingVector::from_span(image_vector(image(image_id)));
    }

    /// Caption text in `language`; English returns the original, others come from the translation table.
    const std::string* caption_text(const CaptionRecord& c, std::string_view language) const {
        if (language == "en") return &c.text;
        return translations_.find(c.caption_id, std::string(language));
    }

    SplitCounts split_counts() const {
        SplitCounts counts;
        for (const auto& img : images_) ++counts.images[static_cast<std::size_t>(img.split)];
        for (const auto& cap : captions_) ++counts.captions[static_cast<std::size_t>(cap.split)];
        return counts;
    }

private:
    Datastore() = default;

    std::uint32_t dim_ = 0;
    std::vector<ImageRecord> images_;
    std::vector<CaptionRecord> captions_;
    std::unordered_map<std::string, std::size_t> image_index_;
    std::unordered_map<std::string, std::size_t> caption_index_;
    VectorMatrix image_vectors_;
    VectorMatrix caption_vectors_;
    std::vector<double> image_norms_;
    std::vector<double> caption_norms_;
    TranslationTable translations_;
};

// ---------------------------------------------------------------------------
// JSON Lines readers/writers

inline MetadataRow parse_metadata_line(std::string_view line, std::size_t line_no) {
    const std::string where = "metadata line " + std::to_string(line_no);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::kMalformedRecord, where + ": " + e.what());
    }
    try {
        MetadataRow row;
        row.caption_id = j.at("caption_id").get<std::string>();
        row.image_id = j.at("image_id").get<std::string>();
        row.split = j.at("split").get<std::string>();
        row.text = j.at("text").get<std::string>();
        row.caption_row = j.at("caption_row").get<std::int64_t>();
        if (j.contains("image_row")) row.image_row = j.at("image_row").get<std::int64_t>();
        if (j.contains("image_ref")) row.image_ref = j.at("image_ref").get<std::string>();
        return row;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::kMalformedRecord, where + ": " + e.what());
    }
}

inline nlohmann::json metadata_to_json(const MetadataRow& row) {
    nlohmann::json j{{"caption_id", row.caption_id}, {"image_id", row.image_id}, {"split", row.split},
                     {"text", row.text},             {"caption_row", row.caption_row}};
    if (row.image_row) j["image_row"] = *row.image_row;
    if (row.image_ref) j["image_ref"] = *row.image_ref;
    return j;
}

namespace detail {

inline std::ifstream open_text(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
    return in;
}

inline bool blank(std::string_view line) {
    return line.find_first_not_of(" \t\r") == std::string_view::npos;
}

} // namespace detail

inline std::vector<MetadataRow> read_metadata_file(const std::filesystem::path& path) {
    auto in = detail::open_text(path);
    std::vector<MetadataRow> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::blank(line)) continue;
        rows.push_back(parse_metadata_line(line, line_no));
    }
    return rows;
}

inline void write_metadata_file(const std::filesystem::path& path, std::span<const MetadataRow> rows) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
    for (const auto& row : rows) out << metadata_to_json(row).dump() << '\n';
}

struct TranslationRow {
    std::string caption_id;
    std::string language;
    std::string text;
};

inline nlohmann::json translation_to_json(const TranslationRow& row) {
    return {{"caption_id", row.caption_id}, {"language", row.language}, {"text", row.text}};
}

inline std::vector<TranslationRow> read_translation_rows(const std::filesystem::path& path) {
    auto in = detail::open_text(path);
    std::vector<TranslationRow> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::blank(line)) continue;
        try {
            auto j = nlohmann::json::parse(line);
            rows.push_back({j.at("caption_id").get<std::string>(), j.at("language").get<std::string>(),
                            j.at("text").get<std::string>()});
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorKind::kMalformedRecord, "translations line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return rows;
}

inline TranslationTable read_translations_file(const std::filesystem::path& path) {
    TranslationTable table;
    for (const auto& row : read_translation_rows(path)) table.add(row.caption_id, row.language, row.text);
    return table;
}

/// Loads and validates the three (or four) datastore files.
inline Datastore build_datastore(const std::filesystem::path& image_vector_file,
                                 const std::filesystem::path& caption_vector_file,
                                 const std::filesystem::path& metadata_file,
                                 const std::optional<std::filesystem::path>& translations_file = std::nullopt) {
    auto images = read_vector_file(image_vector_file);
    auto captions = read_vector_file(caption_vector_file);
    auto rows = read_metadata_file(metadata_file);
    TranslationTable table;
    if (translations_file) table = read_translations_file(*translations_file);
    return Datastore::from_parts(std::move(images), std::move(captions), rows, std::move(table));
}

// ---------------------------------------------------------------------------
// Exact cosine retrieval

namespace detail {

/// Orders hits by score descending, then id ascending.
inline bool hit_before(const RetrievalHit& a, const RetrievalHit& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.target_id < b.target_id;
}

inline std::vector<RetrievalHit> finalize_top(std::vector<RetrievalHit> hits, std::size_t m) {
    const std::size_t keep = std::min(m, hits.size());
    std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(keep), hits.end(), hit_before);
    hits.resize(keep);
    for (std::size_t i = 0; i < hits.size(); ++i) hits[i].rank = static_cast<int>(i + 1);
    return hits;
}

inline void check_query(const Datastore& store, const EmbeddingVector& query, std::size_t m) {
    if (m == 0) throw Error(ErrorKind::kInvalidArgument, "retrieval size must be >= 1");
    if (query.dim() != store.dim()) {
        throw Error(ErrorKind::kDimensionMismatch,
                    "query dim " + std::to_string(query.dim()) + " != store dim " + std::to_string(store.dim()));
    }
    require_nondegenerate(query, "query embedding");
}

} // namespace detail

/// Exact top-m captions by cosine to `query` among captions for which `keep(record)` holds.
template <typename Keep>
std::vector<RetrievalHit> retrieve_captions_where(const Datastore& store, const EmbeddingVector& query, std::size_t m,
                                                  Keep&& keep) {
    detail::check_query(store, query, m);
    std::vector<RetrievalHit> hits;
    const auto captions = store.captions();
    hits.reserve(captions.size());
    for (std::size_t i = 0; i < captions.size(); ++i) {
        const auto& c = captions[i];
        if (!keep(c)) continue;
        const double s = cosine(query.values(), query.norm(), store.caption_vector(c), store.caption_norm(c));
        hits.push_back({c.caption_id, s, 0, i});
    }
    return detail::finalize_top(std::move(hits), m);
}

template <typename Keep>
std::vector<RetrievalHit> retrieve_images_where(const Datastore& store, const EmbeddingVector& query, std::size_t m,
                                                Keep&& keep) {
    detail::check_query(store, query, m);
    std::vector<RetrievalHit> hits;
    const auto images = store.images();
    hits.reserve(images.size());
    for (std::size_t i = 0; i < images.size(); ++i) {
        const auto& img = images[i];
        if (!keep(img)) continue;
        const double s = cosine(query.values(), query.norm(), store.image_vector(img), store.image_norm(img));
        hits.push_back({img.image_id, s, 0, i});
    }
    return detail::finalize_top(std::move(hits), m);
}

/// Exact top-m captions in `splits`; captions of `exclude_image_id` are skipped.
inline std::vector<RetrievalHit> retrieve_captions(const Datastore& store, const EmbeddingVector& query, std::size_t m,
                                                   SplitSet splits = SplitSet::train_only(),
                                                   std::string_view exclude_image_id = {}) {
    return retrieve_captions_where(store, query, m, [&](const CaptionRecord& c) {
        return splits.contains(c.split) && (exclude_image_id.empty() || c.image_id != exclude_image_id);
    });
}

/// Exact top-m images in `splits`.
inline std::vector<RetrievalHit> retrieve_images(const Datastore& store, const EmbeddingVector& query, std::size_t m,
                                                 SplitSet splits = SplitSet::train_only(),
                                                 std::string_view exclude_image_id = {}) {
    return retrieve_images_where(store, query, m, [&](const ImageRecord& img) {
        return splits.contains(img.split) && (exclude_image_id.empty() || img.image_id != exclude_image_id);
    });
}

/// The image's own captions ranked by cosine to the image embedding.
inline std::vector<RetrievalHit> rank_captions_of_image(const Datastore& store, std::string_view image_id) {
    const ImageRecord& img = store.image(image_id);
    std::vector<RetrievalHit> hits;
    hits.reserve(img.caption_ids.size());
    for (const auto& cid : img.caption_ids) {
        const std::size_t idx = *store.find_caption(cid);
        const CaptionRecord& c = store.captions()[idx];
        const double s =
            cosine(store.image_vector(img), store.image_norm(img), store.caption_vector(c), store.caption_norm(c));
        hits.push_back({c.caption_id, s, 0, idx});
    }
    return detail::finalize_top(std::move(hits), hits.size());
}

} // namespace rsrag
