// SPDX-License-Identifier: Apache-2.0
#include "acrag/adaptive_retrieval.hpp"

#include <cmath>
#include <limits>
#include <vector>

#include "acrag/errors.hpp"

namespace acrag {

AffirmativeSet::AffirmativeSet(std::set<std::string, std::less<>> tokens) : tokens_(std::move(tokens)) {
  if (tokens_.empty()) throw InvalidArgument("affirmative set must not be empty");
}

AffirmativeSet::AffirmativeSet(std::initializer_list<std::string> tokens)
    : AffirmativeSet(std::set<std::string, std::less<>>(tokens.begin(), tokens.end())) {}

AffirmativeSet AffirmativeSet::default_affirmative() { return {"yes", "Yes", " yes", " Yes"}; }

AffirmativeSet AffirmativeSet::default_negative() { return {"no", "No", " no", " No"}; }

void validate_thresholds(const Thresholds& t) {
  if (t.max_iterations < 0) throw InvalidArgument("max_iterations must be >= 0");
  if (std::isnan(t.delta1) || std::isnan(t.delta4)) throw InvalidArgument("thresholds must not be NaN");
}

std::string_view to_string(CheckPolarity polarity) {
  return polarity == CheckPolarity::affirmative_means_proceed ? "affirmative_means_proceed"
                                                              : "affirmative_means_stop";
}

CheckPolarity check_polarity_from_string(std::string_view text) {
  if (text == "affirmative_means_proceed") return CheckPolarity::affirmative_means_proceed;
  if (text == "affirmative_means_stop") return CheckPolarity::affirmative_means_stop;
  throw InvalidArgument("unknown check polarity: " + std::string(text));
}

double affirmative_score(const TokenLogprobs& position_logprobs, const AffirmativeSet& set) {
  if (position_logprobs.empty()) throw InvalidArgument("affirmative_score: empty log-probability map");

  std::vector<double> hits;
  double peak = -std::numeric_limits<double>::infinity();
  for (const auto& [token, logprob] : position_logprobs) {
    if (!set.contains(token)) continue;
    hits.push_back(logprob);
    peak = std::max(peak, logprob);
  }
  if (hits.empty() || std::isinf(peak)) return -std::numeric_limits<double>::infinity();

  // log-sum-exp, shifted by the largest term
  double sum = 0.0;
  for (double logprob : hits) sum += std::exp(logprob - peak);
  return std::min(0.0, peak + std::log(sum));
}

PreCheckDecision pre_check(double score0, const Thresholds& thresholds, CheckPolarity polarity) {
  bool above = score0 > thresholds.delta1;
  if (polarity == CheckPolarity::affirmative_means_stop) above = !above;
  return above ? PreCheckDecision::retrieve : PreCheckDecision::skip;
}

PostCheckDecision post_check(double scorek, int k, const Thresholds& thresholds, CheckPolarity polarity) {
  if (k < 1) throw InvalidArgument("post_check: iteration must be >= 1");
  const bool single_round =
      thresholds.single_round || thresholds.delta4 == -std::numeric_limits<double>::infinity();
  if (single_round || k >= thresholds.max_iterations) return PostCheckDecision::stop;
  bool above = scorek > thresholds.delta4;
  if (polarity == CheckPolarity::affirmative_means_stop) above = !above;
  return above ? PostCheckDecision::proceed : PostCheckDecision::stop;
}

}  // namespace acrag
