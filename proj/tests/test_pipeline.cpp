#include "rsrag/config.hpp"
#include "rsrag/pipeline.hpp"
#include "rsrag/synthetic.hpp"
#include "prompt_oracle.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <set>
#include <sstream>

using namespace rsrag;
using namespace rsrag::testing;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::size_t line_count(const fs::path& p) {
    std::ifstream in(p);
    std::size_t n = 0;
    for (std::string line; std::getline(in, line);) n += line.empty() ? 0 : 1;
    return n;
}

/// Synthetic store on disk and a mock run configuration pointing at it.
RunConfig synthetic_config(const std::string& name, std::size_t images = 25) {
    const fs::path dir = scratch_dir(name);
    SyntheticOptions opt;
    opt.images = images;
    const auto paths = write_synthetic_store(dir / "data", opt);
    RunConfig cfg;
    cfg.image_vectors = paths.image_vectors.string();
    cfg.caption_vectors = paths.caption_vectors.string();
    cfg.metadata = paths.metadata.string();
    cfg.translations = (dir / "data" / "translations.jsonl").string();
    cfg.output_dir = (dir / "run").string();
    cfg.mock = true;
    return cfg;
}

ErrorKind kind_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    ADD_FAILURE() << "no error thrown";
    return ErrorKind::kInvalidArgument;
}

} // namespace

// ---------------------------------------------------------------------------
// configuration

TEST(Config, ParsesSubset) {
    const auto values = parse_config_text(R"(
# run settings
pool_size = 12
alpha = 0.85   # damping
mode = "image_aware"
pagerank = false
languages = ["en", "Portuguese", "zh"]
output_dir = "out # not a comment"
model = "m\"q"
)");
    RunConfig cfg;
    apply_config(cfg, values);
    EXPECT_EQ(cfg.pool_size, 12u);
    EXPECT_DOUBLE_EQ(cfg.alpha, 0.85);
    EXPECT_EQ(cfg.mode, PromptMode::kImageAware);
    EXPECT_FALSE(cfg.pagerank_enabled);
    EXPECT_EQ(cfg.languages, (std::vector<std::string>{"en", "pt", "zh"}));
    EXPECT_EQ(cfg.output_dir, "out # not a comment");
    EXPECT_EQ(cfg.backend.model, "m\"q");
    EXPECT_NO_THROW(cfg.validate());
    EXPECT_EQ(to_json(cfg)["alpha"], 0.85);
}

TEST(Config, RejectsBadInput) {
    RunConfig cfg;
    EXPECT_EQ(kind_of([&] { apply_config(cfg, parse_config_text("colour = 3")); }), ErrorKind::kInvalidArgument);
    EXPECT_EQ(kind_of([] { parse_config_text("k = 1\nk = 2"); }), ErrorKind::kDuplicateId);
    EXPECT_EQ(kind_of([] { parse_config_text("k 1"); }), ErrorKind::kMalformedRecord);
    EXPECT_EQ(kind_of([&] { apply_config(cfg, parse_config_text("k = \"three\"")); }), ErrorKind::kMalformedRecord);
    EXPECT_EQ(kind_of([&] { apply_config(cfg, parse_config_text("languages = [\"xx\"]")); }),
              ErrorKind::kUnsupportedLanguage);
    EXPECT_EQ(kind_of([&] { load_config_file(cfg, "/nonexistent.toml"); }), ErrorKind::kIo);
}

TEST(Config, ValidateInvariants) {
    auto bad = [](auto mutate) {
        RunConfig cfg;
        mutate(cfg);
        return kind_of([&] { cfg.validate(); });
    };
    EXPECT_EQ(bad([](RunConfig& c) { c.alpha = 1.0; }), ErrorKind::kInvalidArgument);
    EXPECT_EQ(bad([](RunConfig& c) { c.alpha = 0.0; }), ErrorKind::kInvalidArgument);
    EXPECT_EQ(bad([](RunConfig& c) { c.k = 0; }), ErrorKind::kInvalidArgument);
    EXPECT_EQ(bad([](RunConfig& c) { c.n = 11; }), ErrorKind::kInvalidArgument);
    EXPECT_EQ(bad([](RunConfig& c) { c.k = 11; }), ErrorKind::kInvalidArgument);
    EXPECT_EQ(bad([](RunConfig& c) { c.jobs = 0; }), ErrorKind::kInvalidArgument);
    EXPECT_EQ(bad([](RunConfig& c) { c.languages = {"tlh"}; }), ErrorKind::kUnsupportedLanguage);
    RunConfig ok;
    ok.n = 0;
    EXPECT_NO_THROW(ok.validate());
}

// ---------------------------------------------------------------------------
// synthetic data

TEST(Synthetic, StoreIsLoadableAndDeterministic) {
    const RunConfig cfg = synthetic_config("synth");
    const Datastore store = load_datastore(cfg);
    EXPECT_EQ(store.images().size(), 25u);
    EXPECT_EQ(store.captions().size(), 125u);
    EXPECT_EQ(query_image_ids(store).size(), 5u);
    const auto a = make_synthetic_store({});
    const auto b = make_synthetic_store({});
    EXPECT_EQ(a.caption_vectors.data, b.caption_vectors.data);
    EXPECT_EQ(slurp(resolve_image_path(cfg, "images/img0000.png")), std::string(kTinyPng));
}

// ---------------------------------------------------------------------------
// captioning

TEST(Captioning, MockRunWritesOutputsAndReplays) {
    RunConfig cfg = synthetic_config("caption_run");
    cfg.mode = PromptMode::kImageAware;
    const Datastore store = load_datastore(cfg);
    EchoFirstCaptionBackend echo;
    const CaptionRun run = run_captioning(store, echo, cfg);
    ASSERT_EQ(run.records.size(), 5u);
    EXPECT_EQ(run.failures, 0u);
    for (const auto& r : run.records) {
        ASSERT_TRUE(r.ok()) << *r.error;
        EXPECT_EQ(r.caption, r.prompt->input_captions.front());
        EXPECT_TRUE(r.image_ref.has_value());
        EXPECT_EQ(r.ranked->by_pagerank, true);
        EXPECT_EQ(count_prefix(r.prompt->rendered, "CAPTION "), 12u);
        EXPECT_EQ(count_prefix(r.prompt->rendered, prompt_text::kGoldLinePrefix), 3u);
        for (const auto& img : r.ranked->pool.similar_images) EXPECT_NE(img.image_id, r.query_image_id);
    }
    write_caption_outputs(cfg, run);
    const fs::path out(cfg.output_dir);
    EXPECT_EQ(line_count(out / "captions.jsonl"), 6u);
    EXPECT_EQ(line_count(out / "manifest.jsonl"), 6u);
    EXPECT_TRUE(fs::exists(out / "timing.json"));
    const auto header = read_jsonl_with_header(out / "captions.jsonl");
    EXPECT_EQ(header.config["k"], 3);
    EXPECT_EQ(header.records.size(), 5u);

    const ReplayReport rep = replay_manifest(out / "manifest.jsonl", echo);
    EXPECT_EQ(rep.records, 5u);
    EXPECT_EQ(rep.replayed, 5u);
    EXPECT_TRUE(rep.identical());
}

TEST(Captioning, ReplayDetectsTamperedPrompt) {
    RunConfig cfg = synthetic_config("replay_tamper");
    const Datastore store = load_datastore(cfg);
    EchoFirstCaptionBackend echo;
    write_caption_outputs(cfg, run_captioning(store, echo, cfg));
    const fs::path manifest = fs::path(cfg.output_dir) / "manifest.jsonl";
    std::string text = slurp(manifest);
    const auto pos = text.find("\"gold_caption\":\"");
    ASSERT_NE(pos, std::string::npos);
    text.insert(pos + 16, "X");
    std::ofstream(manifest, std::ios::binary | std::ios::trunc) << text;
    const ReplayReport rep = replay_manifest(manifest, echo);
    EXPECT_EQ(rep.prompt_mismatches, 1u);
    EXPECT_FALSE(rep.identical());
}

TEST(Captioning, WithoutPageRankUsesSimilarityOrder) {
    RunConfig cfg = synthetic_config("no_pagerank");
    cfg.pagerank_enabled = false;
    const Datastore store = load_datastore(cfg);
    EchoFirstCaptionBackend echo;
    for (const auto& r : run_captioning(store, echo, cfg).records) {
        ASSERT_TRUE(r.ok());
        EXPECT_FALSE(r.ranked->by_pagerank);
        EXPECT_FALSE(r.pagerank.has_value());
        const auto& caps = r.ranked->pool.retrieved_captions;
        for (std::size_t i = 1; i < caps.size(); ++i) EXPECT_GE(caps[i - 1].similarity, caps[i].similarity);
        for (std::size_t i = 0; i < caps.size(); ++i) EXPECT_EQ(caps[i].caption_id, r.pool->retrieved_captions[i].caption_id);
    }
}

TEST(Captioning, FiveByFivePrompt) {
    RunConfig cfg = synthetic_config("n5k5", 60);
    cfg.n = 5;
    cfg.k = 5;
    // Templated synthetic captions repeat often; a wider pool leaves room for 5 distinct ones.
    cfg.pool_size = 25;
    const Datastore store = load_datastore(cfg);
    EchoFirstCaptionBackend echo;
    std::size_t full = 0;
    for (const auto& r : run_captioning(store, echo, cfg).records) {
        ASSERT_TRUE(r.ok()) << *r.error;
        if (!r.warnings.empty()) continue;
        ++full;
        EXPECT_EQ(count_prefix(r.prompt->rendered, "CAPTION "), 30u);
        EXPECT_EQ(count_prefix(r.prompt->rendered, prompt_text::kGoldLinePrefix), 5u);
    }
    EXPECT_GT(full, 0u);
}

TEST(Captioning, BaselineModeHasNoCaptions) {
    RunConfig cfg = synthetic_config("baseline");
    cfg.mode = PromptMode::kBaseline;
    const Datastore store = load_datastore(cfg);
    // The echo mock returns the first prompt line for a caption-free prompt.
    EchoFirstCaptionBackend echo;
    for (const auto& r : run_captioning(store, echo, cfg).records) {
        ASSERT_TRUE(r.ok()) << *r.error;
        EXPECT_FALSE(r.pool.has_value());
        EXPECT_EQ(count_prefix(r.prompt->rendered, "CAPTION"), 0u);
        EXPECT_TRUE(r.image_ref.has_value());
    }
}

TEST(Captioning, FailuresAreIsolated) {
    RunConfig cfg = synthetic_config("isolation");
    const Datastore store = load_datastore(cfg);
    EchoFirstCaptionBackend echo;
    auto ids = query_image_ids(store);
    ids.insert(ids.begin() + 2, "no-such-image");
    const CaptionRun run = run_captioning(store, echo, cfg, ids);
    ASSERT_EQ(run.records.size(), 6u);
    EXPECT_EQ(run.failures, 1u);
    EXPECT_FALSE(run.records[2].ok());
    EXPECT_NE(run.records[2].error->find("no-such-image"), std::string::npos);
    write_caption_outputs(cfg, run);
    EXPECT_EQ(line_count(fs::path(cfg.output_dir) / "captions.jsonl"), 6u);
    EXPECT_EQ(line_count(fs::path(cfg.output_dir) / "manifest.jsonl"), 7u);
}

TEST(Captioning, ThreadCountDoesNotChangeOutputs) {
    RunConfig cfg = synthetic_config("jobs");
    cfg.languages = {"en", "fr"};
    const Datastore store = load_datastore(cfg);
    EchoFirstCaptionBackend echo;
    const std::string base = cfg.output_dir;
    cfg.output_dir = base + "_1";
    write_caption_outputs(cfg, run_captioning(store, echo, cfg));
    RunConfig par = cfg;
    par.jobs = 4;
    par.output_dir = base + "_4";
    write_caption_outputs(par, run_captioning(store, echo, par));
    // jobs is part of the config header; compare record lines only.
    auto records = [](const fs::path& p) {
        const auto f = read_jsonl_with_header(p);
        std::string s;
        for (const auto& j : f.records) s += j.dump() + "\n";
        return s;
    };
    EXPECT_EQ(records(fs::path(cfg.output_dir) / "manifest.jsonl"), records(fs::path(par.output_dir) / "manifest.jsonl"));
    EXPECT_EQ(records(fs::path(cfg.output_dir) / "captions.jsonl"), records(fs::path(par.output_dir) / "captions.jsonl"));
}

TEST(Captioning, GenerateThenTranslate) {
    RunConfig cfg = synthetic_config("gtt");
    cfg.languages = {"de"};
    cfg.generate_then_translate = true;
    const Datastore store = load_datastore(cfg);
    EchoFirstCaptionBackend echo;
    for (const auto& r : run_captioning(store, echo, cfg).records) {
        ASSERT_TRUE(r.ok()) << *r.error;
        EXPECT_EQ(r.language, "de");
        EXPECT_EQ(r.prompt->language, "en");
        ASSERT_TRUE(r.translation_prompt.has_value());
        EXPECT_EQ(*r.translation_prompt, render_translation_prompt(r.generation->text, "de"));
        EXPECT_EQ(r.caption, r.generation->text);
    }
}

TEST(Captioning, TargetLanguageGoldFromTranslationTable) {
    RunConfig cfg = synthetic_config("pt_gold");
    cfg.languages = {"pt"};
    {
        const Datastore en_only = load_datastore(cfg);
        EchoFirstCaptionBackend echo;
        // Without translations no image has a Portuguese gold caption: examples degrade to zero.
        for (const auto& r : run_captioning(en_only, echo, cfg).records) {
            ASSERT_TRUE(r.ok());
            EXPECT_TRUE(r.prompt->examples.empty());
            EXPECT_EQ(r.warnings.size(), 3u);
        }
        // Mock translations: "[pt] <text>" via a prefixing table.
        std::ofstream tr(cfg.translations, std::ios::binary | std::ios::trunc);
        for (const auto& c : en_only.captions()) {
            tr << translation_to_json({c.caption_id, "pt", "[pt] " + c.text}).dump() << '\n';
        }
    }
    const Datastore store = load_datastore(cfg);
    EchoFirstCaptionBackend echo;
    for (const auto& r : run_captioning(store, echo, cfg).records) {
        ASSERT_TRUE(r.ok()) << *r.error;
        for (const auto& ex : r.prompt->examples) EXPECT_EQ(ex.gold_caption.rfind("[pt] ", 0), 0u);
        EXPECT_NE(r.prompt->rendered.find("in Portuguese would be: [pt] "), std::string::npos);
    }
}

// ---------------------------------------------------------------------------
// translation table

TEST(Translate, ResumableAndComplete) {
    RunConfig cfg = synthetic_config("translate", 10);
    const Datastore store = load_datastore(cfg, false);
    EchoFirstCaptionBackend echo;
    std::vector<std::string> langs;
    for (const auto& l : kSupportedLanguages) langs.emplace_back(l.code);

    const auto first = translate_captions(store, echo, langs, cfg.translations, cfg);
    EXPECT_EQ(first.requested, 50u * 9u);
    EXPECT_EQ(first.written, 450u);
    EXPECT_TRUE(first.failures.empty());
    EXPECT_EQ(line_count(cfg.translations), 450u);

    // Simulate an interrupted run: keep the first 100 rows.
    {
        std::ifstream in(cfg.translations);
        std::string kept, line;
        for (int i = 0; i < 100 && std::getline(in, line); ++i) kept += line + "\n";
        in.close();
        std::ofstream(cfg.translations, std::ios::binary | std::ios::trunc) << kept;
    }
    const auto resumed = translate_captions(store, echo, langs, cfg.translations, cfg);
    EXPECT_EQ(resumed.skipped, 100u);
    EXPECT_EQ(resumed.written, 350u);
    const auto again = translate_captions(store, echo, langs, cfg.translations, cfg);
    EXPECT_EQ(again.written, 0u);

    const auto rows = read_translation_rows(cfg.translations);
    EXPECT_EQ(rows.size(), 450u);
    std::set<std::pair<std::string, std::string>> keys;
    for (const auto& r : rows) EXPECT_TRUE(keys.insert({r.caption_id, r.language}).second);
    EXPECT_EQ(load_datastore(cfg).translations().size(), 450u);
}

// ---------------------------------------------------------------------------
// evaluation

TEST(Evaluate, IdentityAndErrors) {
    RunConfig cfg = synthetic_config("evaluate");
    const Datastore store = load_datastore(cfg);
    std::vector<CandidateCaption> cands;
    for (const auto& id : query_image_ids(store)) cands.push_back({id, "en", reference_texts(store, id, "en").front()});
    EvaluateOptions opt;
    opt.dataset = "synthetic";
    HashEmbedder embedder(store.dim());
    opt.embedder = &embedder;
    const MetricReport r = evaluate_captions(store, cands, opt);
    const auto& en = r.languages.at("en");
    EXPECT_NEAR(en.bleu1, 1.0, 1e-12);
    EXPECT_NEAR(en.bleu4, 1.0, 1e-12);
    EXPECT_GT(en.cider_d, 0.0);
    ASSERT_TRUE(en.ref_siglip.has_value());
    EXPECT_GE(*en.ref_siglip, 0.0);
    EXPECT_LE(*en.ref_siglip, 1.0);
    EXPECT_EQ(en.items, 5u);

    cands.push_back({"ghost", "en", "a caption"});
    EXPECT_EQ(kind_of([&] { evaluate_captions(store, cands, opt); }), ErrorKind::kUnknownId);
    EXPECT_EQ(kind_of([&] { evaluate_captions(store, {}, opt); }), ErrorKind::kInvalidArgument);
    EXPECT_EQ(kind_of([&] { reference_texts(store, query_image_ids(store).front(), "ko"); }), ErrorKind::kUnknownId);
}

TEST(Evaluate, OverlapReportFromManifest) {
    RunConfig cfg = synthetic_config("overlap");
    const Datastore store = load_datastore(cfg);
    EchoFirstCaptionBackend echo;
    write_caption_outputs(cfg, run_captioning(store, echo, cfg));
    nlohmann::json config;
    const auto cands = read_candidates(fs::path(cfg.output_dir) / "captions.jsonl", &config);
    EXPECT_EQ(config["n"], 3);
    EvaluateOptions opt;
    opt.manifest = fs::path(cfg.output_dir) / "manifest.jsonl";
    const MetricReport r = evaluate_captions(store, cands, opt);
    const auto& en = r.languages.at("en");
    ASSERT_TRUE(en.overlap && en.attribution);
    EXPECT_EQ(en.overlap->images, 5u);
    for (double v : {en.overlap->p1, en.overlap->p4, en.overlap->r1, en.overlap->r4}) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
    }
    // Captions are copies of prompt captions, so every generated 1-gram is in the prompt.
    EXPECT_EQ(en.attribution->valid_out + en.attribution->invalid_out, 0u);
    EXPECT_GT(en.attribution->total(), 0u);

    write_metric_outputs(fs::path(cfg.output_dir), r, config);
    const std::string report = slurp(fs::path(cfg.output_dir) / "report.txt");
    EXPECT_EQ(report.rfind("# config: ", 0), 0u);
    EXPECT_NE(report.find("Prompt-reference overlap"), std::string::npos);
    EXPECT_EQ(nlohmann::json::parse(slurp(fs::path(cfg.output_dir) / "metrics.json"))["config"], config);
}
