// SPDX-License-Identifier: Apache-2.0
#pragma once

// Confidence scoring over first-position token log-probabilities and the two
// threshold gates that decide whether to start and whether to keep retrieving.

#include <initializer_list>
#include <set>
#include <string>
#include <string_view>

#include "acrag/llm_gateway.hpp"

namespace acrag {

// Case-sensitive, non-empty set of tokens whose summed probability is the
// confidence score.
class AffirmativeSet {
 public:
  // Throws InvalidArgument on an empty set.
  explicit AffirmativeSet(std::set<std::string, std::less<>> tokens);
  AffirmativeSet(std::initializer_list<std::string> tokens);

  static AffirmativeSet default_affirmative();  // yes, Yes, " yes", " Yes"
  static AffirmativeSet default_negative();     // no, No, " no", " No"

  bool contains(std::string_view token) const { return tokens_.contains(token); }
  const std::set<std::string, std::less<>>& tokens() const noexcept { return tokens_; }

  bool operator==(const AffirmativeSet&) const = default;

 private:
  std::set<std::string, std::less<>> tokens_;
};

struct Thresholds {
  double delta1 = -2.0;   // pre-check
  double delta4 = -3.0;   // post-check
  int max_iterations = 3;
  // Stop after the first retrieval round regardless of score. A delta4 of
  // negative infinity selects the same behavior.
  bool single_round = false;

  bool operator==(const Thresholds&) const = default;
};

// Throws InvalidArgument when max_iterations < 0 or a threshold is NaN.
void validate_thresholds(const Thresholds& thresholds);

// Which way a score above threshold points.
enum class CheckPolarity { affirmative_means_proceed, affirmative_means_stop };

std::string_view to_string(CheckPolarity polarity);
CheckPolarity check_polarity_from_string(std::string_view text);

enum class PreCheckDecision { retrieve, skip };
enum class PostCheckDecision { proceed, stop };

// log(sum over t in S of exp(logprob_t)), natural log. Tokens of S missing
// from the map contribute nothing; an empty intersection yields -infinity.
// Throws InvalidArgument on an empty map.
double affirmative_score(const TokenLogprobs& position_logprobs, const AffirmativeSet& set);

// retrieve iff score0 > delta1 (strict). With affirmative_means_stop the
// comparison result is inverted.
PreCheckDecision pre_check(double score0, const Thresholds& thresholds,
                           CheckPolarity polarity = CheckPolarity::affirmative_means_proceed);

// proceed iff k < max_iterations, single_round is off, and scorek > delta4
// (inverted by affirmative_means_stop). Throws InvalidArgument when k < 1.
PostCheckDecision post_check(double scorek, int k, const Thresholds& thresholds,
                             CheckPolarity polarity = CheckPolarity::affirmative_means_proceed);

}  // namespace acrag
