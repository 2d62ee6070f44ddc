// rsrag: ingest, translate, caption, evaluate (plus synth and replay helpers).

#include "rsrag/config.hpp"
#include "rsrag/datastore.hpp"
#include "rsrag/lm_gateway.hpp"
#include "rsrag/pipeline.hpp"
#include "rsrag/synthetic.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace rsrag;

namespace {

constexpr int kExitFailures = 1;
constexpr int kExitError = 2;

/// Datastore and backend flags shared by several subcommands; explicit flags override the config file.
struct CommonFlags {
    std::string config_file;
    std::string image_vectors, caption_vectors, metadata, translations, image_root;
    std::string backend_url, model;
    bool mock = false;
    std::size_t jobs = 1;

    std::vector<std::pair<CLI::Option*, std::function<void(RunConfig&)>>> overrides;

    void add(CLI::App* app) {
        app->add_option("--config", config_file, "key = value config file")->check(CLI::ExistingFile);
        bind(app->add_option("--image-vectors", image_vectors, "image embedding file (EVEC)"),
             [this](RunConfig& c) { c.image_vectors = image_vectors; });
        bind(app->add_option("--caption-vectors", caption_vectors, "caption embedding file (EVEC)"),
             [this](RunConfig& c) { c.caption_vectors = caption_vectors; });
        bind(app->add_option("--metadata", metadata, "caption metadata (JSONL)"),
             [this](RunConfig& c) { c.metadata = metadata; });
        bind(app->add_option("--translations", translations, "translation table (JSONL)"),
             [this](RunConfig& c) { c.translations = translations; });
        bind(app->add_option("--image-root", image_root, "directory for image_ref paths"),
             [this](RunConfig& c) { c.image_root = image_root; });
        bind(app->add_option("--backend-url", backend_url, "chat/embedding server base URL"),
             [this](RunConfig& c) { c.backend.base_url = backend_url; });
        bind(app->add_option("--model", model, "model name sent to the server"),
             [this](RunConfig& c) { c.backend.model = model; });
        bind(app->add_flag("--mock", mock, "use the offline mock backends"), [this](RunConfig& c) { c.mock = mock; });
        bind(app->add_option("--jobs", jobs, "concurrent queries"), [this](RunConfig& c) { c.jobs = jobs; });
    }

    void bind(CLI::Option* opt, std::function<void(RunConfig&)> fn) { overrides.emplace_back(opt, std::move(fn)); }

    RunConfig resolve() const {
        RunConfig cfg;
        if (!config_file.empty()) load_config_file(cfg, config_file);
        for (const auto& [opt, fn] : overrides) {
            if (opt->count() > 0) fn(cfg);
        }
        return cfg;
    }
};

void print_ingest_summary(const Datastore& store) {
    const SplitCounts counts = store.split_counts();
    std::cout << "dim: " << store.dim() << '\n';
    std::cout << "images: " << store.images().size() << '\n';
    std::cout << "captions: " << store.captions().size() << '\n';
    for (Split s : {Split::kTrain, Split::kVal, Split::kTest}) {
        const auto i = static_cast<std::size_t>(s);
        std::cout << split_name(s) << ": " << counts.images[i] << " images, " << counts.captions[i] << " captions\n";
    }
    std::cout << "translations: " << store.translations().size() << '\n';
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Retrieval-augmented multilingual captioning of aerial images"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "write a deterministic synthetic datastore");
    std::string synth_out;
    SyntheticOptions synth_opt;
    synth->add_option("--out", synth_out, "output directory")->required();
    synth->add_option("--images", synth_opt.images, "number of images");
    synth->add_option("--captions-per-image", synth_opt.captions_per_image, "captions per image");
    synth->add_option("--dim", synth_opt.dim, "embedding dimension");
    synth->add_option("--test-fraction", synth_opt.test_fraction, "fraction of images in the test split");
    synth->add_option("--seed", synth_opt.seed, "generator seed");

    // ingest
    auto* ingest = app.add_subcommand("ingest", "validate and index datastore files");
    CommonFlags ingest_flags;
    ingest_flags.add(ingest);

    // translate
    auto* translate = app.add_subcommand("translate", "populate the translation table");
    CommonFlags tr_flags;
    tr_flags.add(translate);
    std::vector<std::string> tr_languages;
    std::string tr_output;
    translate->add_option("--language", tr_languages, "target language(s); default: all non-English");
    translate->add_option("--output", tr_output, "table to append to (default: --translations)");

    // caption
    auto* caption = app.add_subcommand("caption", "caption every test image");
    CommonFlags cap_flags;
    cap_flags.add(caption);
    std::size_t pool_size = 10, n = 3, k = 3;
    double alpha = 0.9;
    std::string mode = "blind", output_dir;
    bool no_pagerank = false, gtt = false, exclude_diagonal = false;
    std::vector<std::string> cap_languages;
    int num_beams = 3;
    cap_flags.bind(caption->add_option("--pool-size", pool_size, "retrieved captions and images"),
                   [&](RunConfig& c) { c.pool_size = pool_size; });
    cap_flags.bind(caption->add_option("--n", n, "few-shot examples"), [&](RunConfig& c) { c.n = n; });
    cap_flags.bind(caption->add_option("--k", k, "captions per example"), [&](RunConfig& c) { c.k = k; });
    cap_flags.bind(caption->add_option("--alpha", alpha, "PageRank damping"), [&](RunConfig& c) { c.alpha = alpha; });
    cap_flags.bind(caption->add_option("--mode", mode, "blind | aware | baseline")
                       ->check(CLI::IsMember({"blind", "aware", "baseline", "image_blind", "image_aware",
                                              "no_retrieval_baseline"})),
                   [&](RunConfig& c) { c.mode = parse_prompt_mode(mode); });
    cap_flags.bind(caption->add_flag("--no-pagerank", no_pagerank, "rank the pool by similarity only"),
                   [&](RunConfig& c) { c.pagerank_enabled = !no_pagerank; });
    cap_flags.bind(caption->add_flag("--exclude-diagonal", exclude_diagonal, "drop self-loops from the graph"),
                   [&](RunConfig& c) { c.include_diagonal = !exclude_diagonal; });
    cap_flags.bind(caption->add_option("--language", cap_languages, "target language(s)"),
                   [&](RunConfig& c) { c.languages = language_codes(cap_languages); });
    cap_flags.bind(caption->add_flag("--generate-then-translate", gtt, "caption in English, then translate"),
                   [&](RunConfig& c) { c.generate_then_translate = gtt; });
    cap_flags.bind(caption->add_option("--num-beams", num_beams, "beam width passed to the server"),
                   [&](RunConfig& c) { c.decode.num_beams = num_beams; });
    cap_flags.bind(caption->add_option("--output", output_dir, "run directory"),
                   [&](RunConfig& c) { c.output_dir = output_dir; });

    // evaluate
    auto* evaluate = app.add_subcommand("evaluate", "score a captions file");
    CommonFlags ev_flags;
    ev_flags.add(evaluate);
    std::string ev_captions, ev_manifest, ev_output, ev_dataset = "dataset";
    bool ev_overlap = false;
    std::uint64_t ev_seed = 7;
    evaluate->add_option("--captions", ev_captions, "captions.jsonl from a caption run")->required();
    evaluate->add_option("--manifest", ev_manifest, "manifest.jsonl for overlap and attribution");
    evaluate->add_flag("--overlap", ev_overlap, "prompt-reference overlap and 1-gram attribution");
    evaluate->add_option("--output", ev_output, "where metrics.json and report.txt go (default: captions dir)");
    evaluate->add_option("--dataset", ev_dataset, "dataset label in the report");
    evaluate->add_option("--hash-seed", ev_seed, "seed of the mock embedder used with --mock");

    // replay
    auto* replay = app.add_subcommand("replay", "re-render prompts from a manifest and regenerate captions");
    std::string rp_manifest;
    bool rp_mock = false;
    replay->add_option("--manifest", rp_manifest, "manifest.jsonl")->required()->check(CLI::ExistingFile);
    replay->add_flag("--mock", rp_mock, "use the echo mock backend");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*synth) {
            const auto p = write_synthetic_store(synth_out, synth_opt);
            std::cout << "wrote " << p.image_vectors.string() << ", " << p.caption_vectors.string() << ", "
                      << p.metadata.string() << '\n';
            return 0;
        }
        if (*ingest) {
            const RunConfig cfg = ingest_flags.resolve();
            print_ingest_summary(load_datastore(cfg));
            return 0;
        }
        if (*translate) {
            RunConfig cfg = tr_flags.resolve();
            const Datastore store = load_datastore(cfg, false);
            std::vector<std::string> langs = tr_languages;
            if (langs.empty()) {
                for (const auto& l : kSupportedLanguages) {
                    if (l.code != "en") langs.emplace_back(l.code);
                }
            }
            fs::path table = !tr_output.empty() ? fs::path(tr_output)
                             : !cfg.translations.empty() ? fs::path(cfg.translations)
                                                         : fs::path(cfg.metadata).parent_path() / "translations.jsonl";
            auto backend = make_chat_backend(cfg);
            const TranslateSummary s = translate_captions(store, *backend, langs, table, cfg);
            for (const auto& f : s.failures) std::cerr << "failed: " << f << '\n';
            std::cout << "requested: " << s.requested << "\nwritten: " << s.written << "\nskipped: " << s.skipped
                      << "\nfailed: " << s.failures.size() << "\ntable: " << table.string() << '\n';
            return s.failures.empty() ? 0 : kExitFailures;
        }
        if (*caption) {
            RunConfig cfg = cap_flags.resolve();
            cfg.validate();
            const Datastore store = load_datastore(cfg);
            auto backend = make_chat_backend(cfg);
            const CaptionRun run = run_captioning(store, *backend, cfg);
            write_caption_outputs(cfg, run);
            for (const auto& r : run.records) {
                if (!r.ok()) std::cerr << "failed: " << r.query_image_id << "/" << r.language << ": " << *r.error << '\n';
                for (const auto& w : r.warnings) std::cerr << "warning: " << r.query_image_id << "/" << r.language << ": " << w << '\n';
            }
            std::cout << "queries: " << run.records.size() << "\ncaptioned: " << run.records.size() - run.failures
                      << "\nfailed: " << run.failures << "\noutput: " << cfg.output_dir << '\n';
            return run.failures == 0 ? 0 : kExitFailures;
        }
        if (*evaluate) {
            RunConfig cfg = ev_flags.resolve();
            nlohmann::json run_config;
            const auto candidates = read_candidates(ev_captions, &run_config);
            // Datastore paths fall back to the ones recorded by the caption run.
            if (cfg.image_vectors.empty() && run_config.is_object()) {
                cfg.image_vectors = run_config.value("image_vectors", std::string());
                cfg.caption_vectors = run_config.value("caption_vectors", std::string());
                cfg.metadata = run_config.value("metadata", std::string());
                if (cfg.translations.empty()) cfg.translations = run_config.value("translations", std::string());
            }
            const Datastore store = load_datastore(cfg);
            EvaluateOptions opt;
            opt.dataset = ev_dataset;
            const fs::path captions_dir = fs::path(ev_captions).parent_path();
            if (!ev_manifest.empty()) opt.manifest = ev_manifest;
            else if (ev_overlap) opt.manifest = captions_dir / "manifest.jsonl";
            std::unique_ptr<EmbeddingBackend> embedder;
            if (cfg.mock) embedder = std::make_unique<HashEmbedder>(store.dim(), ev_seed);
            else if (!cfg.backend.model.empty()) embedder = std::make_unique<HttpEmbeddingBackend>(cfg.backend);
            opt.embedder = embedder.get();
            const MetricReport report = evaluate_captions(store, candidates, opt);
            const fs::path out = ev_output.empty() ? captions_dir : fs::path(ev_output);
            write_metric_outputs(out, report, run_config);
            std::cout << render_report_table(report);
            return 0;
        }
        if (*replay) {
            RunConfig cfg;
            cfg.mock = rp_mock;
            const ManifestFile m = read_jsonl_with_header(rp_manifest);
            if (!rp_mock && m.config.is_object()) {
                cfg.backend.base_url = m.config.value("backend_url", cfg.backend.base_url);
                cfg.backend.model = m.config.value("model", std::string());
            }
            auto backend = make_chat_backend(cfg);
            const ReplayReport rep = replay_manifest(rp_manifest, *backend);
            for (const auto& d : rep.details) std::cerr << d << '\n';
            std::cout << "records: " << rep.records << "\nreplayed: " << rep.replayed
                      << "\nprompt mismatches: " << rep.prompt_mismatches
                      << "\ncaption mismatches: " << rep.caption_mismatches << '\n';
            return rep.identical() ? 0 : kExitFailures;
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitError;
    }
    return 0;
}
