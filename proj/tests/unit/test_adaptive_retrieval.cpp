// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "acrag/adaptive_retrieval.hpp"
#include "acrag/errors.hpp"

using namespace acrag;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Direct probability sum, then log.
double oracle(const TokenLogprobs& m, const AffirmativeSet& s) {
  double p = 0.0;
  for (const auto& [t, lp] : m) {
    if (s.contains(t)) p += std::exp(lp);
  }
  return std::log(p);
}

}  // namespace

TEST_CASE("default token sets") {
  CHECK(AffirmativeSet::default_affirmative().tokens() == std::set<std::string, std::less<>>{"yes", "Yes", " yes", " Yes"});
  CHECK(AffirmativeSet::default_negative().tokens() == std::set<std::string, std::less<>>{"no", "No", " no", " No"});
  CHECK_THROWS_AS(AffirmativeSet(std::set<std::string, std::less<>>{}), InvalidArgument);
}

TEST_CASE("affirmative score examples") {
  const auto yes = AffirmativeSet::default_affirmative();
  CHECK(affirmative_score({{"yes", -0.5}, {"no", -1.2}}, yes) == -0.5);
  CHECK(affirmative_score({{"yes", std::log(0.2)}, {"Yes", std::log(0.3)}, {"no", std::log(0.4)}}, yes) ==
        doctest::Approx(std::log(0.5)).epsilon(1e-14));
  CHECK(affirmative_score({{"no", -0.1}}, yes) == -kInf);
  CHECK(affirmative_score({{"YES", -0.1}}, yes) == -kInf);  // case-sensitive
  CHECK_THROWS_AS(affirmative_score({}, yes), InvalidArgument);
}

TEST_CASE("property: score matches the probability-sum oracle, is monotone in S, and is <= 0") {
  std::mt19937_64 rng(20240611);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::vector<std::string> vocab = {"yes", "Yes", " yes", " Yes", "no", "No", " no", "maybe", "the", "A"};
  for (int trial = 0; trial < 500; ++trial) {
    // Random distribution over a random subset of the vocabulary.
    TokenLogprobs m;
    double total = 0.0;
    for (const auto& t : vocab) {
      if (unit(rng) < 0.6) {
        const double x = std::pow(unit(rng), 3.0) + 1e-9;
        m[t] = x;
        total += x;
      }
    }
    if (m.empty()) m["the"] = total = 1.0;
    const double mass = 0.5 + 0.5 * unit(rng);
    for (auto& [t, lp] : m) lp = std::log(lp / total * mass);

    std::set<std::string, std::less<>> small, large;
    for (const auto& t : vocab) {
      if (unit(rng) < 0.4) small.insert(t);
    }
    if (small.empty()) small.insert("yes");
    large = small;
    for (const auto& t : vocab) {
      if (unit(rng) < 0.4) large.insert(t);
    }
    const AffirmativeSet s_small(small), s_large(large);
    const double a = affirmative_score(m, s_small);
    const double b = affirmative_score(m, s_large);
    const double o = oracle(m, s_small);
    if (std::isinf(o)) {
      CHECK(a == -kInf);
    } else {
      CHECK(std::abs(a - o) <= 1e-12);
    }
    CHECK(a <= 0.0);
    CHECK(b <= 0.0);
    CHECK(a <= b);
  }
}

TEST_CASE("score of a full-mass distribution clamps to 0") {
  const auto yes = AffirmativeSet::default_affirmative();
  CHECK(affirmative_score({{"yes", std::log(0.6)}, {"Yes", std::log(0.4)}}, yes) <= 0.0);
  CHECK(affirmative_score({{"yes", 0.0}}, yes) == 0.0);
}

TEST_CASE("pre-check truth table with delta1 = -2") {
  const Thresholds th;
  CHECK(th.delta1 == -2.0);
  const std::vector<std::pair<double, PreCheckDecision>> table = {
      {-4.0, PreCheckDecision::skip},     {-3.0, PreCheckDecision::skip},     {-2.5, PreCheckDecision::skip},
      {-2.0, PreCheckDecision::skip},     {-1.5, PreCheckDecision::retrieve}, {-1.0, PreCheckDecision::retrieve},
      {-0.5, PreCheckDecision::retrieve}, {-kInf, PreCheckDecision::skip},    {0.0, PreCheckDecision::retrieve},
  };
  for (const auto& [score, expected] : table) {
    CAPTURE(score);
    CHECK(pre_check(score, th) == expected);
    const auto inverted = expected == PreCheckDecision::retrieve ? PreCheckDecision::skip : PreCheckDecision::retrieve;
    CHECK(pre_check(score, th, CheckPolarity::affirmative_means_stop) == inverted);
  }
}

TEST_CASE("post-check truth table with delta4 = -3") {
  const Thresholds th;
  CHECK(th.delta4 == -3.0);
  CHECK(th.max_iterations == 3);
  for (double score : {-4.0, -3.0, -2.5, -2.0, -1.5, -1.0, -0.5}) {
    for (int k = 1; k <= 4; ++k) {
      CAPTURE(score);
      CAPTURE(k);
      const bool proceed = score > -3.0 && k < 3;
      CHECK(post_check(score, k, th) == (proceed ? PostCheckDecision::proceed : PostCheckDecision::stop));
      const bool inv = !(score > -3.0) && k < 3;
      CHECK(post_check(score, k, th, CheckPolarity::affirmative_means_stop) ==
            (inv ? PostCheckDecision::proceed : PostCheckDecision::stop));
    }
  }
  CHECK_THROWS_AS(post_check(-1.0, 0, th), InvalidArgument);
}

TEST_CASE("single round and negative-infinity delta4 both stop after round 1") {
  Thresholds single;
  single.single_round = true;
  Thresholds neg_inf;
  neg_inf.delta4 = -kInf;
  for (double score : {-kInf, -10.0, -0.1, 0.0}) {
    CHECK(post_check(score, 1, single) == PostCheckDecision::stop);
    CHECK(post_check(score, 1, neg_inf) == PostCheckDecision::stop);
    CHECK(post_check(score, 1, single, CheckPolarity::affirmative_means_stop) == PostCheckDecision::stop);
  }
}

TEST_CASE("threshold validation") {
  Thresholds t;
  CHECK_NOTHROW(validate_thresholds(t));
  t.max_iterations = -1;
  CHECK_THROWS_AS(validate_thresholds(t), InvalidArgument);
  t = {};
  t.delta1 = std::nan("");
  CHECK_THROWS_AS(validate_thresholds(t), InvalidArgument);
}

TEST_CASE("polarity names") {
  for (auto p : {CheckPolarity::affirmative_means_proceed, CheckPolarity::affirmative_means_stop})
    CHECK(check_polarity_from_string(to_string(p)) == p);
  CHECK_THROWS_AS(check_polarity_from_string("sideways"), InvalidArgument);
}
