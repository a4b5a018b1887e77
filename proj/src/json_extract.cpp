#include "evmob/json_extract.hpp"

namespace evmob {

namespace {

// Returns one past the matching close brace, or npos when unbalanced.
std::size_t find_balanced_end(std::string_view text, std::size_t open) {
    int depth = 0;
    bool in_string = false;
    for (std::size_t i = open; i < text.size(); ++i) {
        char c = text[i];
        if (in_string) {
            if (c == '\\')
                ++i;
            else if (c == '"')
                in_string = false;
            continue;
        }
        if (c == '"') {
            in_string = true;
        } else if (c == '{') {
            ++depth;
        } else if (c == '}') {
            if (--depth == 0) return i + 1;
        }
    }
    return std::string_view::npos;
}

} // namespace

std::optional<nlohmann::json> extract_first_json_object(std::string_view text) {
    for (std::size_t pos = text.find('{'); pos != std::string_view::npos;
         pos = text.find('{', pos + 1)) {
        std::size_t end = find_balanced_end(text, pos);
        if (end == std::string_view::npos) continue;
        auto parsed = nlohmann::json::parse(text.substr(pos, end - pos), nullptr,
                                            /*allow_exceptions=*/false);
        if (!parsed.is_discarded() && parsed.is_object()) return parsed;
    }
    return std::nullopt;
}

} // namespace evmob
