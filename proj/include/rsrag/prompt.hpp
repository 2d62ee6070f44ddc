#pragma once

#include "rsrag/error.hpp"
#include "rsrag/language.hpp"
#include "rsrag/selection.hpp"

#include <nlohmann/json.hpp>

#include <string>
#include <string_view>
#include <vector>

namespace rsrag {

enum class PromptMode { kImageBlind, kImageAware, kBaseline };

inline std::string_view prompt_mode_name(PromptMode m) {
    switch (m) {
    case PromptMode::kImageBlind: return "image_blind";
    case PromptMode::kImageAware: return "image_aware";
    case PromptMode::kBaseline: return "no_retrieval_baseline";
    }
    return "image_blind";
}

inline PromptMode parse_prompt_mode(std::string_view s) {
    if (s == "image_blind" || s == "blind") return PromptMode::kImageBlind;
    if (s == "image_aware" || s == "aware") return PromptMode::kImageAware;
    if (s == "no_retrieval_baseline" || s == "baseline") return PromptMode::kBaseline;
    throw Error(ErrorKind::kInvalidArgument, "unknown prompt mode '" + std::string(s) + "'");
}

struct PromptSpec {
    PromptMode mode = PromptMode::kImageBlind;
    std::string language = "en";
    std::size_t n_examples = 0;
    std::size_t k_captions = 0;
    std::vector<FewShotExample> examples;
    std::vector<std::string> input_captions;
    std::string rendered;
};

namespace prompt_text {

inline constexpr std::string_view kGoldLinePrefix = "A short and concise caption that can be used to describe this image in ";
inline constexpr std::string_view kImageClause = "the input image, plus ";

inline std::string opening(std::string_view lang, bool image_aware) {
    std::string s = "You are an intelligent image captioning bot tasked with describing aerial images with short and "
                    "concise descriptions in the ";
    s += lang;
    s += " language. To generate a short one-sentence caption that accurately describes an input image in ";
    s += lang;
    s += ", you should analyze ";
    if (image_aware) s += kImageClause;
    s += "the information present in a set of English captions associated to other images that are similar to the "
         "input, attending to common features in these descriptions and avoiding spurious information resulting from "
         "errors in the process of retrieving similar examples.";
    return s;
}

inline constexpr std::string_view kFirstExample =
    "To illustrate how the captioning task should be performed, consider that an aerial image that is highly similar "
    "to the input that you need to process is associated to the following set of different descriptions:";

inline constexpr std::string_view kNextExample =
    "In another example illustrating how the captioning task should be performed, consider that the aerial image is "
    "associated to the following set of descriptions:";

inline constexpr std::string_view kInputSection =
    "For the input that you need to process, consider that similar images are associated to the following captions:";

inline std::string notice(std::string_view lang) {
    std::string s = "Notice that you should generate a description specifically in ";
    s += lang;
    s += " and not in any other language, from the complete instructions that are being provided to you. The caption "
         "that is to be generated should be direct and concise, consisting of a single sentence and featuring only "
         "accurate information about the input. Be particularly careful when describing object properties such as "
         "color or size, or when mentioning objects that are seldom encountered on aerial images, given that this "
         "information is more likely to correspond to mistakes derived from incorrect similarity assessments.";
    return s;
}

inline std::string request(std::string_view lang) {
    std::string s = "Reflecting upon all the previous information, a short and concise caption that can describe the "
                    "input image in ";
    s += lang;
    s += " is:";
    return s;
}

inline void caption_lines(std::string& out, const std::vector<std::string>& captions) {
    for (std::size_t i = 0; i < captions.size(); ++i) {
        out += "CAPTION ";
        out += std::to_string(i + 1);
        out += ": ";
        out += captions[i];
        out += '\n';
    }
}

} // namespace prompt_text

/// Instruction paragraph and final request only, image-aware wording. No captions or examples.
inline std::string render_baseline_prompt(std::string_view language) {
    const std::string lang(language_info(language).name);
    std::string out = prompt_text::opening(lang, true);
    out += "\n\n";
    out += prompt_text::request(lang);
    return out;
}

/// Four sections: instructions, N few-shot examples, the k input captions, closing instructions.
inline std::string render_caption_prompt(const PromptSpec& spec) {
    if (spec.mode == PromptMode::kBaseline) return render_baseline_prompt(spec.language);
    const std::string lang(language_info(spec.language).name);
    if (spec.k_captions == 0) throw Error(ErrorKind::kInvalidArgument, "k must be >= 1");
    if (spec.examples.size() != spec.n_examples) throw Error(ErrorKind::kInvalidArgument, "example count != N");
    if (spec.input_captions.size() != spec.k_captions) throw Error(ErrorKind::kInvalidArgument, "input captions != k");
    for (const auto& ex : spec.examples) {
        if (ex.retrieved_captions.size() != spec.k_captions) {
            throw Error(ErrorKind::kInvalidArgument, "example " + ex.image_id + " caption count != k");
        }
    }

    std::string out = prompt_text::opening(lang, spec.mode == PromptMode::kImageAware);
    out += "\n\n";
    for (std::size_t e = 0; e < spec.examples.size(); ++e) {
        out += e == 0 ? prompt_text::kFirstExample : prompt_text::kNextExample;
        out += "\n\n";
        prompt_text::caption_lines(out, spec.examples[e].retrieved_captions);
        out += '\n';
        out += prompt_text::kGoldLinePrefix;
        out += lang;
        out += " would be: ";
        out += spec.examples[e].gold_caption;
        out += "\n\n";
    }
    out += prompt_text::kInputSection;
    out += "\n\n";
    prompt_text::caption_lines(out, spec.input_captions);
    out += '\n';
    out += prompt_text::notice(lang);
    out += "\n\n";
    out += prompt_text::request(lang);
    return out;
}

/// Zero-shot translation instruction used for gold captions and generate-then-translate.
inline std::string render_translation_prompt(std::string_view caption, std::string_view language) {
    if (caption.empty()) throw Error(ErrorKind::kInvalidArgument, "empty caption");
    const std::string lang(language_info(language).name);
    std::string out = "Translate the following text from English into ";
    out += lang;
    out += ".\nEnglish: ";
    out += caption;
    out += '\n';
    out += lang;
    out += ':';
    return out;
}

inline PromptSpec make_prompt_spec(PromptMode mode, std::string language, std::size_t k, const PromptContent& content) {
    PromptSpec spec;
    spec.mode = mode;
    spec.language = std::move(language);
    spec.k_captions = k;
    if (mode != PromptMode::kBaseline) {
        spec.examples = content.examples;
        spec.n_examples = content.examples.size();
        spec.input_captions = content.input_captions;
    }
    spec.rendered = render_caption_prompt(spec);
    return spec;
}

inline PromptSpec make_baseline_spec(std::string language) {
    PromptSpec spec;
    spec.mode = PromptMode::kBaseline;
    spec.language = std::move(language);
    spec.rendered = render_baseline_prompt(spec.language);
    return spec;
}

inline nlohmann::json to_json(const PromptSpec& spec) {
    nlohmann::json examples = nlohmann::json::array();
    for (const auto& ex : spec.examples) {
        examples.push_back({{"image_id", ex.image_id},
                            {"retrieved_captions", ex.retrieved_captions},
                            {"gold_caption", ex.gold_caption},
                            {"gold_caption_id", ex.gold_caption_id}});
    }
    return {{"mode", prompt_mode_name(spec.mode)},
            {"language", spec.language},
            {"N", spec.n_examples},
            {"k", spec.k_captions},
            {"examples", examples},
            {"input_captions", spec.input_captions},
            {"rendered", spec.rendered}};
}

inline PromptSpec prompt_spec_from_json(const nlohmann::json& j) {
    try {
        PromptSpec spec;
        spec.mode = parse_prompt_mode(j.at("mode").get<std::string>());
        spec.language = j.at("language").get<std::string>();
        spec.n_examples = j.at("N").get<std::size_t>();
        spec.k_captions = j.at("k").get<std::size_t>();
        for (const auto& ex : j.at("examples")) {
            spec.examples.push_back(FewShotExample{ex.at("image_id").get<std::string>(),
                                                   ex.at("retrieved_captions").get<std::vector<std::string>>(),
                                                   ex.at("gold_caption").get<std::string>(),
                                                   ex.value("gold_caption_id", std::string())});
        }
        spec.input_captions = j.at("input_captions").get<std::vector<std::string>>();
        spec.rendered = j.value("rendered", std::string());
        return spec;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::kMalformedRecord, std::string("prompt spec: ") + e.what());
    }
}

} // namespace rsrag
