#pragma once

// Batch orchestration: captioning runs with manifests, replay, table translation, evaluation.

#include "rsrag/config.hpp"
#include "rsrag/datastore.hpp"
#include "rsrag/lm_gateway.hpp"
#include "rsrag/metrics.hpp"
#include "rsrag/pool.hpp"
#include "rsrag/prompt.hpp"
#include "rsrag/rerank.hpp"
#include "rsrag/selection.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

namespace rsrag {

inline std::unique_ptr<ChatBackend> make_chat_backend(const RunConfig& cfg) {
    if (cfg.mock) return std::make_unique<EchoFirstCaptionBackend>();
    return std::make_unique<HttpChatBackend>(cfg.backend);
}

inline Datastore load_datastore(const RunConfig& cfg, bool with_translations = true) {
    if (cfg.image_vectors.empty() || cfg.caption_vectors.empty() || cfg.metadata.empty()) {
        throw Error(ErrorKind::kInvalidArgument, "image_vectors, caption_vectors and metadata paths are required");
    }
    std::optional<std::filesystem::path> tr;
    if (with_translations && !cfg.translations.empty() && std::filesystem::exists(cfg.translations)) {
        tr = cfg.translations;
    }
    return build_datastore(cfg.image_vectors, cfg.caption_vectors, cfg.metadata, tr);
}

/// Test-split image ids in ascending order.
inline std::vector<std::string> query_image_ids(const Datastore& store) {
    std::vector<std::string> ids;
    for (const auto& img : store.images()) {
        if (img.split == Split::kTest) ids.push_back(img.image_id);
    }
    std::sort(ids.begin(), ids.end());
    return ids;
}

inline std::filesystem::path resolve_image_path(const RunConfig& cfg, const std::string& image_ref) {
    const std::filesystem::path ref(image_ref);
    if (ref.is_absolute()) return ref;
    const std::filesystem::path root =
        cfg.image_root.empty() ? std::filesystem::path(cfg.metadata).parent_path() : std::filesystem::path(cfg.image_root);
    return root / ref;
}

// ---------------------------------------------------------------------------
// Captioning

struct QueryRecord {
    std::string query_image_id;
    std::string language;
    std::optional<CandidatePool> pool;
    std::optional<ReRankedPool> ranked;
    std::optional<RankScores> pagerank;
    std::vector<std::size_t> combination;
    std::vector<std::string> warnings;
    std::optional<PromptSpec> prompt;
    std::optional<std::string> image_ref;
    std::optional<GenerationResult> generation;
    std::optional<std::string> translation_prompt;
    std::optional<GenerationResult> translation;
    std::string caption;
    std::optional<std::string> error;
    double wall_ms = 0.0;

    bool ok() const noexcept { return !error.has_value(); }
};

namespace detail {

inline nlohmann::json generation_json(const GenerationResult& g, const DecodeParams& d) {
    return {{"text", g.text},
            {"backend_id", g.backend_id},
            {"raw_response", g.raw_response},
            {"attempts", g.attempts},
            {"beam_param_sent", g.beam_param_sent},
            {"num_beams", d.num_beams},
            {"max_new_tokens", d.max_new_tokens}};
}

template <typename T>
nlohmann::json opt_json(const std::optional<T>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

} // namespace detail

/// Manifest line; latency is left out so that reruns are byte-identical.
inline nlohmann::json to_json(const QueryRecord& r, const RunConfig& cfg) {
    nlohmann::json j{{"type", "record"}, {"query_image_id", r.query_image_id}, {"language", r.language}};
    j["pool"] = r.pool ? to_json(*r.pool) : nlohmann::json(nullptr);
    j["ranked_pool"] = r.ranked ? to_json(r.ranked->pool) : nlohmann::json(nullptr);
    j["ranked_by"] = r.ranked ? (r.ranked->by_pagerank ? "pagerank" : "similarity") : nlohmann::json(nullptr);
    j["pagerank"] = r.pagerank ? nlohmann::json{{"iterations", r.pagerank->iterations}, {"residual", r.pagerank->residual}}
                               : nlohmann::json(nullptr);
    j["combination"] = r.combination;
    j["warnings"] = r.warnings;
    j["prompt"] = r.prompt ? to_json(*r.prompt) : nlohmann::json(nullptr);
    j["image_ref"] = detail::opt_json(r.image_ref);
    j["generation"] = r.generation ? detail::generation_json(*r.generation, cfg.decode) : nlohmann::json(nullptr);
    j["translation_prompt"] = detail::opt_json(r.translation_prompt);
    j["translation"] = r.translation ? detail::generation_json(*r.translation, cfg.decode) : nlohmann::json(nullptr);
    j["caption"] = r.caption;
    j["error"] = detail::opt_json(r.error);
    return j;
}

/// One query image in one target language. Errors are captured in the record.
inline QueryRecord caption_query(const Datastore& store, ChatBackend& backend, const RunConfig& cfg,
                                 const std::string& image_id, const std::string& language) {
    QueryRecord rec;
    rec.query_image_id = image_id;
    rec.language = language;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        const EmbeddingVector query = store.image_embedding(image_id);
        const bool translate_after = cfg.generate_then_translate && language != "en";
        const std::string prompt_language = translate_after ? "en" : language;

        PromptSpec spec;
        if (cfg.mode == PromptMode::kBaseline) {
            spec = make_baseline_spec(prompt_language);
        } else {
            rec.pool = assemble_pool(store, query, image_id, PoolOptions{cfg.pool_size, SplitSet::train_only()});
            if (cfg.pagerank_enabled) {
                auto outcome = pagerank_rerank(store, *rec.pool, query, cfg.alpha, RankGraphOptions{cfg.include_diagonal});
                rec.ranked = std::move(outcome.pool);
                rec.pagerank = std::move(outcome.scores);
            } else {
                rec.ranked = similarity_ranked(*rec.pool);
            }
            PromptContent content =
                select_prompt_content(*rec.ranked, cfg.n, cfg.k, gold_in_language(store, prompt_language));
            rec.combination = content.combination;
            rec.warnings = content.warnings;
            spec = make_prompt_spec(cfg.mode, prompt_language, cfg.k, content);
        }

        GenerationRequest req;
        req.prompt = spec.rendered;
        req.decode = cfg.decode;
        req.model_name = cfg.backend.model;
        req.target_language = prompt_language;
        rec.prompt = std::move(spec);
        if (cfg.mode != PromptMode::kImageBlind) {
            const ImageRecord& img = store.image(image_id);
            if (img.image_ref.empty()) throw Error(ErrorKind::kInvalidArgument, "image " + image_id + " has no image_ref");
            rec.image_ref = img.image_ref;
            req.image = load_image_payload(resolve_image_path(cfg, img.image_ref).string());
        }
        rec.generation = backend.run(req);
        rec.caption = rec.generation->text;

        if (translate_after) {
            GenerationRequest tr;
            tr.prompt = render_translation_prompt(rec.caption, language);
            tr.decode = cfg.decode;
            tr.model_name = cfg.backend.model;
            tr.target_language = language;
            rec.translation_prompt = tr.prompt;
            rec.translation = backend.complete(tr);
            rec.caption = rec.translation->text;
        }
    } catch (const Error& e) {
        rec.error = e.what();
    } catch (const std::exception& e) {
        rec.error = std::string("internal: ") + e.what();
    }
    rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return rec;
}

struct CaptionRun {
    std::vector<QueryRecord> records;  // query-id order, then language order
    std::size_t failures = 0;
    double total_ms = 0.0;
};

/// Runs every (test image, language) pair on up to cfg.jobs threads; output order is fixed.
inline CaptionRun run_captioning(const Datastore& store, ChatBackend& backend, const RunConfig& cfg,
                                 std::vector<std::string> image_ids = {}) {
    cfg.validate();
    if (image_ids.empty()) image_ids = query_image_ids(store);
    std::vector<std::pair<std::string, std::string>> jobs;
    for (const auto& id : image_ids) {
        for (const auto& lang : cfg.languages) jobs.emplace_back(id, std::string(language_info(lang).code));
    }
    CaptionRun run;
    run.records.resize(jobs.size());
    const auto t0 = std::chrono::steady_clock::now();
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < jobs.size(); i = next++) {
            run.records[i] = caption_query(store, backend, cfg, jobs[i].first, jobs[i].second);
        }
    };
    const std::size_t threads = std::min(cfg.jobs, std::max<std::size_t>(jobs.size(), 1));
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    run.total_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    for (const auto& r : run.records) run.failures += r.ok() ? 0 : 1;
    return run;
}

inline nlohmann::json config_header(const RunConfig& cfg) { return {{"type", "config"}, {"config", to_json(cfg)}}; }

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& p) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::kIo, "cannot write " + p.string());
    return out;
}

} // namespace detail

/// config.json, manifest.jsonl, captions.jsonl and timing.json under cfg.output_dir.
inline void write_caption_outputs(const RunConfig& cfg, const CaptionRun& run) {
    const std::filesystem::path dir(cfg.output_dir);
    std::filesystem::create_directories(dir);
    detail::open_out(dir / "config.json") << to_json(cfg).dump(2) << '\n';

    auto manifest = detail::open_out(dir / "manifest.jsonl");
    auto captions = detail::open_out(dir / "captions.jsonl");
    manifest << config_header(cfg).dump() << '\n';
    captions << config_header(cfg).dump() << '\n';
    nlohmann::json timing = nlohmann::json::array();
    for (const auto& r : run.records) {
        manifest << to_json(r, cfg).dump() << '\n';
        if (r.ok()) {
            captions << nlohmann::json{{"image_id", r.query_image_id}, {"language", r.language}, {"caption", r.caption}}.dump()
                     << '\n';
        }
        timing.push_back({{"query_image_id", r.query_image_id},
                          {"language", r.language},
                          {"wall_ms", r.wall_ms},
                          {"latency_ms", r.generation ? r.generation->latency_ms : 0.0}});
    }
    detail::open_out(dir / "timing.json") << nlohmann::json{{"total_ms", run.total_ms}, {"records", timing}}.dump(2)
                                          << '\n';
}

// ---------------------------------------------------------------------------
// Manifest reading and replay

struct ManifestFile {
    nlohmann::json config;
    std::vector<nlohmann::json> records;
};

inline ManifestFile read_jsonl_with_header(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
    ManifestFile out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorKind::kMalformedRecord, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
        if (j.value("type", std::string()) == "config") out.config = j.at("config");
        else out.records.push_back(std::move(j));
    }
    return out;
}

struct ReplayReport {
    std::size_t records = 0;
    std::size_t replayed = 0;
    std::size_t prompt_mismatches = 0;
    std::size_t caption_mismatches = 0;
    std::vector<std::string> details;

    bool identical() const noexcept { return prompt_mismatches == 0 && caption_mismatches == 0; }
};

/// Re-renders every stored prompt spec and regenerates the caption with `backend`.
inline ReplayReport replay_manifest(const std::filesystem::path& manifest_path, ChatBackend& backend,
                                    const std::optional<std::filesystem::path>& image_root = std::nullopt) {
    const ManifestFile m = read_jsonl_with_header(manifest_path);
    ReplayReport rep;
    for (const auto& j : m.records) {
        ++rep.records;
        if (!j.at("error").is_null() || j.at("prompt").is_null()) continue;
        ++rep.replayed;
        const std::string where = j.at("query_image_id").get<std::string>() + "/" + j.at("language").get<std::string>();
        PromptSpec spec = prompt_spec_from_json(j.at("prompt"));
        const std::string rendered = render_caption_prompt(spec);
        if (rendered != spec.rendered) {
            ++rep.prompt_mismatches;
            rep.details.push_back(where + ": prompt differs");
            continue;
        }
        GenerationRequest req;
        req.prompt = rendered;
        if (!j.at("image_ref").is_null()) {
            const std::filesystem::path root =
                image_root ? *image_root
                           : std::filesystem::path(m.config.value("image_root", std::string())).empty()
                                 ? std::filesystem::path(m.config.value("metadata", std::string())).parent_path()
                                 : std::filesystem::path(m.config.value("image_root", std::string()));
            req.image = load_image_payload((root / j.at("image_ref").get<std::string>()).string());
        }
        std::string caption = backend.run(req).text;
        if (!j.at("translation_prompt").is_null()) {
            GenerationRequest tr;
            tr.prompt = render_translation_prompt(caption, j.at("language").get<std::string>());
            if (tr.prompt != j.at("translation_prompt").get<std::string>()) {
                ++rep.prompt_mismatches;
                rep.details.push_back(where + ": translation prompt differs");
                continue;
            }
            caption = backend.complete(tr).text;
        }
        if (caption != j.at("caption").get<std::string>()) {
            ++rep.caption_mismatches;
            rep.details.push_back(where + ": caption differs");
        }
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Translation table population

struct TranslateSummary {
    std::size_t requested = 0;
    std::size_t written = 0;
    std::size_t skipped = 0;
    std::vector<std::string> failures;
};

/// Appends missing (caption, language) rows to `table_path`, one flushed line per caption.
inline TranslateSummary translate_captions(const Datastore& store, ChatBackend& backend,
                                           const std::vector<std::string>& languages,
                                           const std::filesystem::path& table_path, const RunConfig& cfg) {
    std::set<std::pair<std::string, std::string>> have;
    if (std::filesystem::exists(table_path)) {
        for (const auto& row : read_translation_rows(table_path)) have.emplace(row.caption_id, row.language);
    }
    std::vector<std::string> codes;
    for (const auto& l : languages) {
        const std::string code(language_info(l).code);
        if (code != "en" && std::find(codes.begin(), codes.end(), code) == codes.end()) codes.push_back(code);
    }
    if (table_path.has_parent_path()) std::filesystem::create_directories(table_path.parent_path());
    std::ofstream out(table_path, std::ios::binary | std::ios::app);
    if (!out) throw Error(ErrorKind::kIo, "cannot write " + table_path.string());

    TranslateSummary sum;
    for (const auto& c : store.captions()) {
        for (const auto& code : codes) {
            ++sum.requested;
            if (have.count({c.caption_id, code})) {
                ++sum.skipped;
                continue;
            }
            try {
                GenerationRequest req;
                req.prompt = render_translation_prompt(c.text, code);
                req.decode = cfg.decode;
                req.model_name = cfg.backend.model;
                req.target_language = code;
                const GenerationResult res = backend.complete(req);
                out << translation_to_json(TranslationRow{c.caption_id, code, res.text}).dump() << '\n';
                out.flush();
                have.emplace(c.caption_id, code);
                ++sum.written;
            } catch (const Error& e) {
                sum.failures.push_back(c.caption_id + "/" + code + ": " + e.what());
            }
        }
    }
    return sum;
}

// ---------------------------------------------------------------------------
// Evaluation

struct CandidateCaption {
    std::string image_id;
    std::string language;
    std::string caption;
};

inline std::vector<CandidateCaption> read_candidates(const std::filesystem::path& path, nlohmann::json* config = nullptr) {
    const ManifestFile f = read_jsonl_with_header(path);
    if (config) *config = f.config;
    std::vector<CandidateCaption> out;
    for (const auto& j : f.records) {
        try {
            out.push_back({j.at("image_id").get<std::string>(), j.value("language", std::string("en")),
                           j.at("caption").get<std::string>()});
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorKind::kMalformedRecord, path.string() + ": " + e.what());
        }
    }
    return out;
}

/// Reference texts of an image in `language` (original captions for English).
inline std::vector<std::string> reference_texts(const Datastore& store, const std::string& image_id,
                                                const std::string& language) {
    const auto idx = store.find_image(image_id);
    if (!idx) throw Error(ErrorKind::kUnknownId, "caption for unknown image '" + image_id + "'");
    std::vector<std::string> refs;
    for (const auto& cid : store.images()[*idx].caption_ids) {
        const CaptionRecord& c = store.caption(cid);
        if (const std::string* t = store.caption_text(c, language)) refs.push_back(*t);
    }
    if (refs.empty()) {
        throw Error(ErrorKind::kUnknownId, "no " + language + " references for image '" + image_id + "'");
    }
    return refs;
}

struct EvaluateOptions {
    std::string dataset = "dataset";
    std::optional<std::filesystem::path> manifest;
    EmbeddingBackend* embedder = nullptr;
};

namespace detail {

inline std::vector<std::string> prompt_retrieved_captions(const nlohmann::json& prompt) {
    std::vector<std::string> out = prompt.at("input_captions").get<std::vector<std::string>>();
    for (const auto& ex : prompt.at("examples")) {
        for (const auto& c : ex.at("retrieved_captions")) out.push_back(c.get<std::string>());
    }
    return out;
}

} // namespace detail

inline MetricReport evaluate_captions(const Datastore& store, const std::vector<CandidateCaption>& candidates,
                                      const EvaluateOptions& opt) {
    if (candidates.empty()) throw Error(ErrorKind::kInvalidArgument, "no captions to evaluate");
    std::map<std::string, std::vector<const CandidateCaption*>> by_lang;
    for (const auto& c : candidates) by_lang[std::string(language_info(c.language).code)].push_back(&c);

    std::map<std::pair<std::string, std::string>, nlohmann::json> prompts;
    if (opt.manifest) {
        for (auto& j : read_jsonl_with_header(*opt.manifest).records) {
            if (!j.at("prompt").is_null() && j.at("error").is_null()) {
                prompts[{j.at("query_image_id").get<std::string>(), j.at("language").get<std::string>()}] = j;
            }
        }
    }

    MetricReport report;
    report.dataset = opt.dataset;
    for (const auto& [lang, items] : by_lang) {
        std::vector<std::string> cands;
        std::vector<std::vector<std::string>> refs;
        for (const auto* c : items) {
            cands.push_back(c->caption);
            refs.push_back(reference_texts(store, c->image_id, lang));
        }
        LanguageScores s;
        s.items = items.size();
        s.bleu1 = bleu(cands, refs, 1, lang);
        s.bleu4 = bleu(cands, refs, 4, lang);
        s.cider_d = cider_d(cands, refs, lang);

        if (opt.embedder) {
            std::vector<EmbedItem> batch;
            for (const auto& c : cands) batch.push_back({c, std::nullopt});
            const auto embs = opt.embedder->embed_remote(batch);
            double total = 0.0;
            for (std::size_t i = 0; i < items.size(); ++i) {
                const ImageRecord& img = store.image(items[i]->image_id);
                std::vector<EmbeddingVector> ref_embs;
                for (const auto& cid : img.caption_ids) ref_embs.push_back(store.caption_embedding(cid));
                total += ref_siglip_score(embs[i], store.image_embedding(img.image_id), ref_embs);
            }
            s.ref_siglip = total / static_cast<double>(items.size());
        }

        if (opt.manifest) {
            OverlapScores ov;
            AttributionCounts attr;
            for (const auto* c : items) {
                auto it = prompts.find({c->image_id, lang});
                if (it == prompts.end()) {
                    throw Error(ErrorKind::kUnknownId, "no manifest record for " + c->image_id + "/" + lang);
                }
                const nlohmann::json& prompt = it->second.at("prompt");
                const auto retrieved = detail::prompt_retrieved_captions(prompt);
                const auto english_refs = reference_texts(store, c->image_id, "en");
                const auto o1 = ngram_overlap(retrieved, english_refs, 1, "en");
                const auto o4 = ngram_overlap(retrieved, english_refs, 4, "en");
                ov.p1 += o1.precision;
                ov.r1 += o1.recall;
                ov.p4 += o4.precision;
                ov.r4 += o4.recall;
                ++ov.images;

                std::vector<std::string> in_prompt = retrieved;
                for (const auto& ex : prompt.at("examples")) in_prompt.push_back(ex.at("gold_caption").get<std::string>());
                attr += prompt_attribution(c->caption, reference_texts(store, c->image_id, lang), in_prompt, lang);
            }
            const double n = static_cast<double>(ov.images);
            ov.p1 /= n;
            ov.p4 /= n;
            ov.r1 /= n;
            ov.r4 /= n;
            s.overlap = ov;
            s.attribution = attr;
        }
        report.languages.emplace(lang, std::move(s));
    }
    return report;
}

/// metrics.json and report.txt; both carry the run configuration when known.
inline void write_metric_outputs(const std::filesystem::path& dir, const MetricReport& report,
                                 const nlohmann::json& config) {
    std::filesystem::create_directories(dir);
    nlohmann::json j = to_json(report);
    j["config"] = config;
    detail::open_out(dir / "metrics.json") << j.dump(2) << '\n';
    auto txt = detail::open_out(dir / "report.txt");
    txt << "# config: " << config.dump() << "\n\n" << render_report_table(report);
}

} // namespace rsrag
