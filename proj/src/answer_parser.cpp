// SPDX-License-Identifier: Apache-2.0
#include "acrag/answer_parser.hpp"

#include <cctype>
#include <regex>

namespace acrag {

namespace {

const std::regex& mcq_pattern() {
  static const std::regex re(R"(^[\s*_"'`(\[]*([A-Ea-e])(?![A-Za-z0-9]))");
  return re;
}

const std::regex& yes_no_pattern() {
  static const std::regex re(R"(^[\s*_"'`(\[]*(yes|no|maybe)(?![A-Za-z0-9]))", std::regex::icase);
  return re;
}

}  // namespace

std::optional<std::string> parse_answer(std::string_view text, TaskKind kind) {
  const auto marker = text.rfind(kAnswerMarker);
  if (marker == std::string_view::npos) return std::nullopt;
  const std::string tail(text.substr(marker + kAnswerMarker.size()));

  std::smatch match;
  if (kind == TaskKind::multiple_choice) {
    if (!std::regex_search(tail, match, mcq_pattern())) return std::nullopt;
    return std::string(1, static_cast<char>(std::toupper(static_cast<unsigned char>(match[1].str()[0]))));
  }
  if (!std::regex_search(tail, match, yes_no_pattern())) return std::nullopt;
  std::string label = match[1].str();
  for (auto& c : label) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return label;
}

}  // namespace acrag
