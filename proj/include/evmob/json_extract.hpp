#pragma once

#include <nlohmann/json.hpp>

#include <optional>
#include <string_view>

namespace evmob {

/// Extract the first parseable JSON object embedded in free-form model
/// output. Tolerates surrounding prose and fenced code blocks; when several
/// objects appear, the first one wins.
std::optional<nlohmann::json> extract_first_json_object(std::string_view text);

} // namespace evmob
