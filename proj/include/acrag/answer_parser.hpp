// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "acrag/core_model.hpp"

namespace acrag {

inline constexpr std::string_view kAnswerMarker = "### Answer:";

// Reads the label after the last "### Answer:" marker. Multiple choice takes
// one letter A-E, yes/no takes yes|no|maybe; both case-insensitive, with
// surrounding punctuation tolerated. Labels come back normalized (upper-case
// letters, lower-case yes/no/maybe). nullopt means unparsed.
std::optional<std::string> parse_answer(std::string_view text, TaskKind kind);

}  // namespace acrag
