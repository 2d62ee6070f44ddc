#pragma once

#include "rsrag/error.hpp"

#include <array>
#include <string>
#include <string_view>

namespace rsrag {

struct LanguageInfo {
    std::string_view code;
    std::string_view name;
    /// Tokenized per character (Chinese, Korean) instead of 13a word rules.
    bool per_character;
};

// English plus the nine target languages of the multilingual evaluation.
inline constexpr std::array<LanguageInfo, 10> kSupportedLanguages{{
    {"en", "English", false},
    {"pt", "Portuguese", false},
    {"es", "Spanish", false},
    {"fr", "French", false},
    {"de", "German", false},
    {"nl", "Dutch", false},
    {"it", "Italian", false},
    {"zh", "Chinese", true},
    {"ko", "Korean", true},
    {"ru", "Russian", false},
}};

inline bool is_supported_language(std::string_view code) {
    for (const auto& lang : kSupportedLanguages) {
        if (lang.code == code) return true;
    }
    return false;
}

/// Accepts either a code ("pt") or a name ("Portuguese").
inline const LanguageInfo& language_info(std::string_view code_or_name) {
    for (const auto& lang : kSupportedLanguages) {
        if (lang.code == code_or_name || lang.name == code_or_name) return lang;
    }
    throw Error(ErrorKind::kUnsupportedLanguage, std::string(code_or_name));
}

inline std::string language_name(std::string_view code) { return std::string(language_info(code).name); }

} // namespace rsrag
