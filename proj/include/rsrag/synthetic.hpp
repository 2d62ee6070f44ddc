#pragma once

// Deterministic toy datastore: scene-class captions, hash embeddings, 1x1 PNG images.

#include "rsrag/datastore.hpp"
#include "rsrag/lm_gateway.hpp"
#include "rsrag/vector_file.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace rsrag {

inline constexpr std::string_view kTinyPng{
    "\x89\x50\x4e\x47\x0d\x0a\x1a\x0a\x00\x00\x00\x0d\x49\x48\x44\x52\x00\x00\x00\x01\x00\x00\x00\x01\x08\x02\x00"
    "\x00\x00\x90\x77\x53\xde\x00\x00\x00\x0c\x49\x44\x41\x54\x78\x9c\x63\x70\x68\x70\x00\x00\x02\x04\x01\x01\x5d"
    "\xfe\x04\x95\x00\x00\x00\x00\x49\x45\x4e\x44\xae\x42\x60\x82",
    69};

struct SyntheticOptions {
    std::size_t images = 50;
    std::size_t captions_per_image = 5;
    std::size_t dim = 32;
    /// The last round(images * test_fraction) images form the test split.
    double test_fraction = 0.2;
    std::uint64_t seed = 7;
};

struct SyntheticStore {
    VectorMatrix image_vectors;
    VectorMatrix caption_vectors;
    std::vector<MetadataRow> rows;
};

namespace detail {

struct Scene {
    std::string_view place;
    std::array<std::string_view, 3> objects;
};

inline constexpr std::array<Scene, 6> kScenes{{
    {"airport", {"plane", "runway", "terminal"}},
    {"harbor", {"boat", "pier", "ship"}},
    {"farmland", {"field", "road", "house"}},
    {"residential area", {"house", "tree", "car"}},
    {"forest", {"tree", "path", "clearing"}},
    {"parking lot", {"car", "bus", "lane"}},
}};

inline constexpr std::array<std::string_view, 5> kColors{"white", "green", "gray", "red", "dark"};
inline constexpr std::array<std::string_view, 4> kCounts{"Two", "Three", "Many", "Several"};

inline std::string synth_caption(const Scene& scene, std::mt19937_64& rng) {
    auto pick = [&](std::size_t n) { return static_cast<std::size_t>(rng() % n); };
    const std::string_view obj = scene.objects[pick(scene.objects.size())];
    const std::string_view color = kColors[pick(kColors.size())];
    std::string s;
    switch (pick(4)) {
    case 0: s = std::string(kCounts[pick(kCounts.size())]) + " " + std::string(color) + " " + std::string(obj) + "s are in the " + std::string(scene.place) + "."; break;
    case 1: s = "A " + std::string(color) + " " + std::string(obj) + " is next to the " + std::string(scene.place) + "."; break;
    case 2: s = "There are some " + std::string(obj) + "s in the " + std::string(scene.place) + "."; break;
    default: s = "The " + std::string(scene.place) + " has a " + std::string(color) + " " + std::string(obj) + "."; break;
    }
    return s;
}

inline void add_scaled(std::vector<double>& acc, const EmbeddingVector& v, double w) {
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += w * v.values()[i];
}

inline void append_unit(std::vector<float>& out, const std::vector<double>& v) {
    double n2 = 0.0;
    for (double x : v) n2 += x * x;
    const double n = std::sqrt(n2);
    for (double x : v) out.push_back(static_cast<float>(x / n));
}

} // namespace detail

inline SyntheticStore make_synthetic_store(const SyntheticOptions& opt) {
    if (opt.images == 0 || opt.captions_per_image == 0 || opt.dim < 2) {
        throw Error(ErrorKind::kInvalidArgument, "synthetic store needs images, captions and dim >= 2");
    }
    const HashEmbedder hasher(opt.dim, opt.seed);
    std::mt19937_64 rng(opt.seed);
    const auto n_test = static_cast<std::size_t>(std::llround(static_cast<double>(opt.images) * opt.test_fraction));

    SyntheticStore out;
    out.image_vectors.dim = out.caption_vectors.dim = static_cast<std::uint32_t>(opt.dim);
    for (std::size_t i = 0; i < opt.images; ++i) {
        const auto& scene = detail::kScenes[i % detail::kScenes.size()];
        const EmbeddingVector scene_vec = hasher.embed_text("scene:" + std::string(scene.place));
        char id_buf[32];
        std::snprintf(id_buf, sizeof id_buf, "img%04zu", i);
        const std::string image_id = id_buf;
        const std::string split = i >= opt.images - n_test ? "test" : "train";

        std::vector<double> image_acc(opt.dim, 0.0);
        for (std::size_t c = 0; c < opt.captions_per_image; ++c) {
            const std::string text = detail::synth_caption(scene, rng);
            std::vector<double> cap(opt.dim, 0.0);
            detail::add_scaled(cap, scene_vec, 1.0);
            detail::add_scaled(cap, hasher.embed_text(text), 0.6);
            const std::size_t row = out.caption_vectors.count++;
            detail::append_unit(out.caption_vectors.data, cap);
            detail::add_scaled(image_acc, EmbeddingVector::from_span(out.caption_vectors.row(row)), 1.0);

            MetadataRow r;
            r.caption_id = image_id + "_" + std::to_string(c);
            r.image_id = image_id;
            r.split = split;
            r.text = text;
            r.caption_row = static_cast<std::int64_t>(row);
            if (c == 0) {
                r.image_row = static_cast<std::int64_t>(i);
                r.image_ref = "images/" + image_id + ".png";
            }
            out.rows.push_back(std::move(r));
        }
        detail::add_scaled(image_acc, hasher.embed_text("image:" + image_id), 0.3);
        detail::append_unit(out.image_vectors.data, image_acc);
        ++out.image_vectors.count;
    }
    return out;
}

struct SyntheticPaths {
    std::filesystem::path image_vectors;
    std::filesystem::path caption_vectors;
    std::filesystem::path metadata;
};

/// Writes images.evec, captions.evec, metadata.jsonl and images/<id>.png under `dir`.
inline SyntheticPaths write_synthetic_store(const std::filesystem::path& dir, const SyntheticOptions& opt) {
    const SyntheticStore s = make_synthetic_store(opt);
    std::filesystem::create_directories(dir / "images");
    SyntheticPaths p{dir / "images.evec", dir / "captions.evec", dir / "metadata.jsonl"};
    write_vector_file(p.image_vectors, s.image_vectors.dim, s.image_vectors.data);
    write_vector_file(p.caption_vectors, s.caption_vectors.dim, s.caption_vectors.data);
    write_metadata_file(p.metadata, s.rows);
    for (const auto& r : s.rows) {
        if (!r.image_ref) continue;
        std::ofstream png(dir / *r.image_ref, std::ios::binary | std::ios::trunc);
        if (!png) throw Error(ErrorKind::kIo, "cannot write " + (dir / *r.image_ref).string());
        png.write(kTinyPng.data(), static_cast<std::streamsize>(kTinyPng.size()));
    }
    return p;
}

} // namespace rsrag
