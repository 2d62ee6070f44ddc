#include "rsrag/pool.hpp"
#include "rsrag/prompt.hpp"
#include "rsrag/rerank.hpp"
#include "rsrag/selection.hpp"
#include "prompt_oracle.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <random>
#include <set>
#include <sstream>

using namespace rsrag;
using namespace rsrag::testing;

namespace {

std::string read_golden(const std::string& name) {
    std::ifstream in(std::string(RSRAG_SOURCE_DIR) + "/tests/golden/" + name, std::ios::binary);
    EXPECT_TRUE(in) << name;
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Store of `images` training images, each with `caps` captions, all with distinct texts.
StoreSpec distinct_spec(std::mt19937_64& rng, std::size_t images, std::size_t caps, std::size_t dim = 8) {
    StoreSpec s;
    for (std::size_t i = 0; i < images; ++i) {
        StoreSpec::Image img{"i" + std::to_string(i), random_unit(rng, dim), "train", {}};
        for (std::size_t c = 0; c < caps; ++c) {
            img.captions.push_back({"text " + std::to_string(i) + "." + std::to_string(c), random_unit(rng, dim)});
        }
        s.images.push_back(std::move(img));
    }
    return s;
}

PoolCaption pc(std::string id, std::string text, double score) { return {std::move(id), std::move(text), score, score}; }

/// Hand-built pool: m retrieved captions r0..r{m-1} with decreasing scores; images with
/// given gold texts and similar texts.
ReRankedPool hand_pool(std::vector<std::string> retrieved,
                       std::vector<std::pair<std::vector<std::string>, std::vector<std::string>>> images) {
    CandidatePool p;
    for (std::size_t i = 0; i < retrieved.size(); ++i) {
        p.retrieved_captions.push_back(pc("r" + std::to_string(i), retrieved[i], 1.0 - 0.01 * static_cast<double>(i)));
    }
    for (std::size_t i = 0; i < images.size(); ++i) {
        PoolImage img{"img" + std::to_string(i), 0.5, 0.5, {}, {}};
        for (std::size_t g = 0; g < images[i].first.size(); ++g) img.gold_captions.push_back(pc("g" + std::to_string(i) + "_" + std::to_string(g), images[i].first[g], 0));
        for (std::size_t s = 0; s < images[i].second.size(); ++s) img.similar_captions.push_back(pc("s" + std::to_string(i) + "_" + std::to_string(s), images[i].second[s], 0));
        p.similar_images.push_back(std::move(img));
    }
    return ReRankedPool{p, false};
}

PromptContent golden_content() {
    PromptContent c;
    c.examples = {
        {"e1", {"A plane is parked at the gate.", "Two runways cross near the terminal.", "Several planes are on the apron."},
         "Um avião está estacionado no aeroporto.", "g1"},
        {"e2", {"Boats are docked in the harbor.", "A pier extends into the sea.", "Many ships are near the coast."},
         "Barcos estão atracados no porto.", "g2"},
        {"e3", {"Green fields surround a farm.", "A road crosses the farmland.", "Some houses are near the fields."},
         "Campos verdes cercam uma fazenda.", "g3"},
    };
    c.input_captions = {"An airplane is on the runway.", "The airport has a large terminal.", "Some cars are in the parking lot."};
    c.requested_examples = 3;
    return c;
}

PromptContent synthetic_content(std::size_t n, std::size_t k) {
    PromptContent c;
    for (std::size_t e = 0; e < n; ++e) {
        FewShotExample ex{"e" + std::to_string(e), {}, "gold " + std::to_string(e), ""};
        for (std::size_t i = 0; i < k; ++i) ex.retrieved_captions.push_back("ex " + std::to_string(e) + " cap " + std::to_string(i));
        c.examples.push_back(ex);
    }
    for (std::size_t i = 0; i < k; ++i) c.input_captions.push_back("input " + std::to_string(i));
    return c;
}

} // namespace

// ---------------------------------------------------------------------------
// assemble_pool

TEST(AssemblePool, DefaultSizes) {
    std::mt19937_64 rng(21);
    const Datastore s = make_store(distinct_spec(rng, 15, 5));
    const auto pool = assemble_pool(s, EmbeddingVector(random_unit(rng, 8)));
    EXPECT_EQ(pool.retrieved_captions.size(), 10u);
    EXPECT_EQ(pool.similar_images.size(), 10u);
    for (const auto& img : pool.similar_images) {
        std::size_t owned = 0;
        for (const auto& c : pool.retrieved_captions) owned += s.caption(c.caption_id).image_id == img.image_id;
        EXPECT_EQ(img.gold_captions.size() + owned, 5u);
        EXPECT_EQ(img.similar_captions.size(), 10u);
        for (const auto& c : img.similar_captions) EXPECT_NE(s.caption(c.caption_id).image_id, img.image_id);
        for (std::size_t i = 1; i < img.gold_captions.size(); ++i) {
            EXPECT_GE(img.gold_captions[i - 1].similarity, img.gold_captions[i].similarity);
        }
    }
}

TEST(AssemblePool, SmallStoreTruncates) {
    StoreSpec spec;
    spec.images.push_back({"a", {1, 0}, "train", {{"x", {1, 0}}, {"y", {0, 1}}, {"z", {1, 1}}}});
    const auto pool = assemble_pool(make_store(spec), EmbeddingVector{1, 0});
    EXPECT_EQ(pool.retrieved_captions.size(), 3u);
    EXPECT_EQ(pool.similar_images.size(), 1u);
}

TEST(AssemblePool, GoldEqualToRetrievedCaptionIsDropped) {
    StoreSpec spec;
    // Query (1,0). Image B's caption "shared" is the second retrieved caption; image A owns the same text.
    spec.images.push_back({"A", {1, 0.1f}, "train", {{"shared", {0.2f, 1}}, {"own a", {0.1f, 1}}}});
    spec.images.push_back({"B", {0.5f, 1}, "train", {{"top", {1, 0}}, {"shared", {1, 0.05f}}}});
    const Datastore s = make_store(spec);
    PoolOptions opt;
    opt.pool_size = 2;
    const auto pool = assemble_pool(s, EmbeddingVector{1, 0}, {}, opt);
    ASSERT_EQ(pool.retrieved_captions.size(), 2u);
    EXPECT_EQ(pool.retrieved_captions[1].text, "shared");
    const auto& a = pool.similar_images[0];
    ASSERT_EQ(a.image_id, "A");
    ASSERT_EQ(a.gold_captions.size(), 1u);
    EXPECT_EQ(a.gold_captions[0].text, "own a");
}

TEST(AssemblePool, QueryImageNeverInPool) {
    std::mt19937_64 rng(22);
    StoreSpec spec = distinct_spec(rng, 6, 3);
    const Datastore s = make_store(spec);
    PoolOptions opt;
    opt.splits = SplitSet::all();
    const auto pool = assemble_pool(s, s.image_embedding("i2"), "i2", opt);
    for (const auto& img : pool.similar_images) {
        EXPECT_NE(img.image_id, "i2");
        for (const auto& c : img.similar_captions) EXPECT_NE(s.caption(c.caption_id).image_id, "i2");
    }
    for (const auto& c : pool.retrieved_captions) EXPECT_NE(s.caption(c.caption_id).image_id, "i2");
}

TEST(PoolGraphNodes, CaptionsDeduplicatedById) {
    std::mt19937_64 rng(23);
    const Datastore s = make_store(distinct_spec(rng, 8, 4));
    const EmbeddingVector q(random_unit(rng, 8));
    const auto pool = assemble_pool(s, q);
    const auto pg = pool_graph_nodes(s, pool, q);
    std::set<std::pair<int, std::string>> seen;
    for (const auto& n : pg.nodes) {
        const int is_image = n.kind == NodeKind::kSimilarImage;
        EXPECT_TRUE(seen.insert({is_image, n.source_id}).second) << n.source_id;
        EXPECT_NEAR(n.query_similarity, cosine_similarity(q, n.embedding), 1e-12);
    }
    // similar captions of one image are retrieved captions of another, so sharing happens
    std::size_t refs = pool.retrieved_captions.size() + pool.similar_images.size();
    for (const auto& img : pool.similar_images) refs += img.gold_captions.size() + img.similar_captions.size();
    EXPECT_LT(pg.nodes.size(), refs);
    const auto outcome = pagerank_rerank(s, pool, q, 0.9);
    EXPECT_TRUE(outcome.pool.by_pagerank);
    EXPECT_EQ(outcome.graph.size(), pg.nodes.size());
}

// ---------------------------------------------------------------------------
// select_prompt_content

TEST(SelectPromptContent, DisjointTextsTakeTopCombinationAndTopImages) {
    const auto pool = hand_pool({"a", "b", "c", "d", "e"},
                                {{{"g0"}, {"x0", "y0", "z0"}}, {{"g1"}, {"x1", "y1", "z1"}},
                                 {{"g2"}, {"x2", "y2", "z2"}}, {{"g3"}, {"x3", "y3", "z3"}}});
    const auto out = select_prompt_content(pool, 3, 3);
    EXPECT_EQ(out.combination, (std::vector<std::size_t>{0, 1, 2}));
    EXPECT_EQ(out.input_captions, (std::vector<std::string>{"a", "b", "c"}));
    ASSERT_EQ(out.examples.size(), 3u);
    EXPECT_EQ(out.examples[0].image_id, "img0");
    EXPECT_EQ(out.examples[2].image_id, "img2");
    EXPECT_EQ(out.examples[1].gold_caption, "g1");
    EXPECT_FALSE(out.degraded());
    EXPECT_TRUE(out.warnings.empty());
}

TEST(SelectPromptContent, SecondCombinationWhenFirstBlocksGold) {
    // Combination {0,1} uses "g", the only gold caption of the single image; {0,2} is next.
    const auto pool = hand_pool({"a", "g", "c"}, {{{"g"}, {"x", "y"}}});
    const auto out = select_prompt_content(pool, 1, 2);
    EXPECT_EQ(out.combination, (std::vector<std::size_t>{0, 2}));
    const auto oracle = oracle_first_feasible(pool.pool, 1, 2);
    ASSERT_TRUE(oracle);
    EXPECT_EQ(oracle->combination, out.combination);
}

TEST(SelectPromptContent, ZeroExamples) {
    const auto pool = hand_pool({"a", "b", "c", "d"}, {{{"g"}, {"x", "y"}}});
    const auto out = select_prompt_content(pool, 0, 3);
    EXPECT_TRUE(out.examples.empty());
    EXPECT_EQ(out.input_captions, (std::vector<std::string>{"a", "b", "c"}));
}

TEST(SelectPromptContent, FallbackLowersExampleCount) {
    // Only one image can ever yield an example.
    const auto pool = hand_pool({"a", "b"}, {{{"g"}, {"x"}}, {{"a"}, {"y"}}, {{"h"}, {"b"}}});
    const auto out = select_prompt_content(pool, 3, 1);
    EXPECT_EQ(out.examples.size(), 2u);
    EXPECT_TRUE(out.degraded());
    ASSERT_EQ(out.warnings.size(), 1u);
    EXPECT_NE(out.warnings[0].find("3"), std::string::npos);
}

TEST(SelectPromptContent, ImagesAreNotReused) {
    const auto pool = hand_pool({"a", "b"}, {{{"g0", "g1", "g2"}, {"x", "y", "z", "w"}}});
    const auto out = select_prompt_content(pool, 2, 1);
    EXPECT_EQ(out.examples.size(), 1u);
}

TEST(SelectPromptContent, WhitespaceVariantsCountAsDuplicates) {
    const auto pool = hand_pool({"a  plane", " a plane ", "b"}, {});
    const auto out = select_prompt_content(pool, 0, 2);
    EXPECT_EQ(out.combination, (std::vector<std::size_t>{0, 2}));
    const auto cased = hand_pool({"A plane", "a plane"}, {});
    EXPECT_EQ(select_prompt_content(cased, 0, 2).combination, (std::vector<std::size_t>{0, 1}));
}

TEST(SelectPromptContent, InsufficientCandidates) {
    EXPECT_THROW(select_prompt_content(hand_pool({"a", "b"}, {}), 0, 3), Error);
    EXPECT_THROW(select_prompt_content(hand_pool({"a", "a", "a"}, {}), 0, 2), Error);
    EXPECT_THROW(select_prompt_content(hand_pool({"a"}, {}), 0, 0), Error);
}

TEST(SelectPromptContent, GoldCaptionsInTargetLanguage) {
    std::mt19937_64 rng(24);
    StoreSpec spec = distinct_spec(rng, 8, 3);
    TranslationTable tr;
    for (const auto& img : spec.images) {
        // i0 has no Portuguese translations at all.
        if (img.id == "i0") continue;
        for (std::size_t c = 0; c < img.captions.size(); ++c) tr.add(img.id + "_" + std::to_string(c), "pt", "pt: " + img.captions[c].first);
    }
    const Datastore s = make_store(spec, tr);
    const auto q = s.image_embedding("i0");
    const auto ranked = similarity_ranked(assemble_pool(s, q));
    const auto out = select_prompt_content(ranked, 3, 3, gold_in_language(s, "pt"));
    ASSERT_EQ(out.examples.size(), 3u);
    for (const auto& ex : out.examples) {
        EXPECT_NE(ex.image_id, "i0");
        EXPECT_EQ(ex.gold_caption, *s.translations().find(ex.gold_caption_id, "pt"));
    }
    const auto en = select_prompt_content(ranked, 3, 3, gold_in_language(s, "en"));
    for (const auto& ex : en.examples) EXPECT_EQ(ex.gold_caption, s.caption(ex.gold_caption_id).text);
    EXPECT_THROW(gold_in_language(s, "xx"), Error);
}

TEST(RankedCombinations, DescendingSumsLexicographicTies) {
    const auto combos = ranked_combinations({0.5, 0.5, 0.5, 0.1}, 2);
    ASSERT_EQ(combos.size(), 6u);
    EXPECT_EQ(combos[0], (std::vector<std::size_t>{0, 1}));
    EXPECT_EQ(combos[1], (std::vector<std::size_t>{0, 2}));
    EXPECT_EQ(combos[2], (std::vector<std::size_t>{1, 2}));
    EXPECT_EQ(combos[3], (std::vector<std::size_t>{0, 3}));
    EXPECT_EQ(ranked_combinations({1, 2, 3}, 0).size(), 1u);
}

TEST(SelectPromptContent, PropertyRepetitionFreeAndMatchesOracle) {
    std::mt19937_64 rng(25);
    std::size_t checked = 0;
    for (int t = 0; t < 300; ++t) {
        const CandidatePool pool = random_pool(rng);
        const ReRankedPool ranked{pool, true};
        const auto oracle = oracle_first_feasible(pool, 3, 3);
        PromptContent got;
        try {
            got = select_prompt_content(ranked, 3, 3);
        } catch (const Error&) {
            EXPECT_FALSE(oracle);
            continue;
        }
        if (got.degraded()) {
            EXPECT_FALSE(oracle);
            continue;
        }
        ASSERT_TRUE(oracle);
        EXPECT_EQ(got.combination, oracle->combination);
        std::vector<std::string> images;
        for (const auto& ex : got.examples) images.push_back(ex.image_id);
        EXPECT_EQ(images, oracle->example_images);

        const auto spec = make_prompt_spec(PromptMode::kImageBlind, "en", 3, got);
        std::set<std::string> seen;
        for (const auto& text : prompt_caption_texts(spec.rendered)) {
            EXPECT_TRUE(seen.insert(normalize_caption(text)).second) << text;
        }
        ++checked;
    }
    EXPECT_GT(checked, 100u);
}

// ---------------------------------------------------------------------------
// rendering

TEST(RenderCaptionPrompt, LineCounts) {
    for (std::size_t nk : {3u, 5u}) {
        const auto spec = make_prompt_spec(PromptMode::kImageBlind, "en", nk, synthetic_content(nk, nk));
        EXPECT_EQ(count_prefix(spec.rendered, "CAPTION "), nk * nk + nk);
        EXPECT_EQ(count_prefix(spec.rendered, prompt_text::kGoldLinePrefix), nk);
    }
}

TEST(RenderCaptionPrompt, ImageAwareDiffersOnlyByClause) {
    const auto content = golden_content();
    const auto blind = make_prompt_spec(PromptMode::kImageBlind, "pt", 3, content).rendered;
    const auto aware = make_prompt_spec(PromptMode::kImageAware, "pt", 3, content).rendered;
    const std::string clause(prompt_text::kImageClause);
    const auto pos = aware.find(clause);
    ASSERT_NE(pos, std::string::npos);
    EXPECT_EQ(aware.substr(0, pos) + aware.substr(pos + clause.size()), blind);
    EXPECT_EQ(blind.find(clause), std::string::npos);
}

TEST(RenderCaptionPrompt, PortugueseGolden) {
    const auto content = golden_content();
    const auto blind = make_prompt_spec(PromptMode::kImageBlind, "Portuguese", 3, content).rendered;
    EXPECT_EQ(blind, read_golden("caption_pt_blind_n3k3.txt"));
    EXPECT_EQ(make_prompt_spec(PromptMode::kImageAware, "pt", 3, content).rendered,
              read_golden("caption_pt_aware_n3k3.txt"));
    EXPECT_EQ(blind.find("English language"), std::string::npos);
}

TEST(RenderCaptionPrompt, PureAndSerializable) {
    const auto spec = make_prompt_spec(PromptMode::kImageAware, "ko", 3, golden_content());
    EXPECT_EQ(render_caption_prompt(spec), render_caption_prompt(spec));
    const auto back = prompt_spec_from_json(to_json(spec));
    EXPECT_EQ(render_caption_prompt(back), spec.rendered);
    EXPECT_EQ(to_json(back), to_json(spec));
}

TEST(RenderCaptionPrompt, Errors) {
    PromptSpec spec = make_prompt_spec(PromptMode::kImageBlind, "en", 3, golden_content());
    spec.input_captions.pop_back();
    EXPECT_THROW(render_caption_prompt(spec), Error);
    spec = make_prompt_spec(PromptMode::kImageBlind, "en", 3, golden_content());
    spec.language = "xx";
    EXPECT_THROW(render_caption_prompt(spec), Error);
    EXPECT_THROW(parse_prompt_mode("sideways"), Error);
}

TEST(RenderTranslationPrompt, LiteralForm) {
    EXPECT_EQ(render_translation_prompt("a plane is parked", "German"), read_golden("translation_de.txt"));
    EXPECT_EQ(render_translation_prompt("a plane is parked", "de"), read_golden("translation_de.txt"));
    EXPECT_EQ(render_translation_prompt("two\nlines", "French"),
              "Translate the following text from English into French.\nEnglish: two\nlines\nFrench:");
    EXPECT_THROW(render_translation_prompt("", "French"), Error);
}

TEST(RenderBaselinePrompt, GoldenPerLanguage) {
    for (const auto& lang : kSupportedLanguages) {
        const std::string p = render_baseline_prompt(lang.code);
        EXPECT_EQ(p, read_golden("baseline_" + std::string(lang.code) + ".txt")) << lang.code;
        EXPECT_EQ(count_prefix(p, "CAPTION"), 0u);
        EXPECT_NE(p.find("image captioning bot"), std::string::npos);
    }
    EXPECT_EQ(make_baseline_spec("es").rendered, render_baseline_prompt("Spanish"));
    EXPECT_THROW(render_baseline_prompt("Klingon"), Error);
}
