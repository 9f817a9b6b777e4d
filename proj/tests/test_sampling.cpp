#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <set>

#include "doctest.h"
#include "threatlens/errors.hpp"
#include "threatlens/rng.hpp"
#include "threatlens/sampling.hpp"

using namespace threatlens;

namespace {

std::vector<Sentence> labeled_set(std::size_t n_minority,
                                  std::size_t n_majority) {
  std::vector<Sentence> out;
  std::size_t i = 0;
  for (; i < n_minority; ++i) {
    Sentence s;
    s.doc_id = "min";
    s.index = i;
    s.label = Label::relevant;
    s.tokens = {Token{"rel" + std::to_string(i), Bio::B, "B"}};
    out.push_back(std::move(s));
  }
  for (std::size_t j = 0; j < n_majority; ++j) {
    Sentence s;
    s.doc_id = "maj";
    s.index = j;
    s.label = Label::irrelevant;
    s.tokens = {Token{"irr" + std::to_string(j), Bio::O, "O"}};
    out.push_back(std::move(s));
  }
  return out;
}

std::pair<std::size_t, std::size_t> class_counts(
    const std::vector<Sentence>& sentences) {
  std::size_t rel = 0, irr = 0;
  for (const auto& s : sentences) {
    (s.label == Label::relevant ? rel : irr) += 1;
  }
  return {rel, irr};
}

SamplingConfig cfg_of(SamplingMode mode, std::uint64_t r_min,
                      std::uint64_t r_maj, std::uint64_t seed = 42) {
  SamplingConfig cfg;
  cfg.mode = mode;
  cfg.ratio_minority = r_min;
  cfg.ratio_majority = r_maj;
  cfg.seed = seed;
  return cfg;
}

std::multiset<std::string> key_multiset(const std::vector<Sentence>& v) {
  std::multiset<std::string> keys;
  for (const auto& s : v) {
    keys.insert(s.doc_id + "#" + std::to_string(s.index));
  }
  return keys;
}

}  // namespace

TEST_CASE("class_weights inverse-frequency formula") {
  const ClassWeights w = class_weights(100, 900);
  CHECK(w.w_relevant == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(w.w_irrelevant == doctest::Approx(0.555555556).epsilon(1e-6));
  // w_rel * n_rel + w_irr * n_irr == N_total
  CHECK(w.w_relevant * 100 + w.w_irrelevant * 900 ==
        doctest::Approx(1000.0).epsilon(1e-9));

  const ClassWeights balanced = class_weights(500, 500);
  CHECK(balanced.w_relevant == 1.0);
  CHECK(balanced.w_irrelevant == 1.0);

  CHECK(class_weights(1, 999).w_relevant == doctest::Approx(500.0));
  CHECK_THROWS_AS(class_weights(0, 10), ValidationError);
  CHECK_THROWS_AS(class_weights(10, 0), ValidationError);
}

TEST_CASE("parse_ratio") {
  CHECK(parse_ratio("1:2") == std::pair<std::uint64_t, std::uint64_t>{1, 2});
  CHECK(parse_ratio("3:10") == std::pair<std::uint64_t, std::uint64_t>{3, 10});
  CHECK_THROWS_AS(parse_ratio("12"), ValidationError);
  CHECK_THROWS_AS(parse_ratio("0:2"), ValidationError);
  CHECK_THROWS_AS(parse_ratio("a:b"), ValidationError);
  CHECK_THROWS_AS(parse_ratio("1:2x"), ValidationError);
}

TEST_CASE("undersample hits the requested counts") {
  const auto data = labeled_set(100, 900);

  SUBCASE("1:1") {
    const auto out = undersample(data, cfg_of(SamplingMode::undersample, 1, 1));
    const auto [rel, irr] = class_counts(out.sentences);
    CHECK(rel == 100);
    CHECK(irr == 100);
    CHECK_FALSE(out.clamped);
  }
  SUBCASE("1:2") {
    const auto out = undersample(data, cfg_of(SamplingMode::undersample, 1, 2));
    const auto [rel, irr] = class_counts(out.sentences);
    CHECK(rel == 100);
    CHECK(irr == 200);
  }
  SUBCASE("clamped when the majority is too small") {
    const auto small = labeled_set(100, 150);
    const auto out =
        undersample(small, cfg_of(SamplingMode::undersample, 1, 2));
    const auto [rel, irr] = class_counts(out.sentences);
    CHECK(rel == 100);
    CHECK(irr == 150);
    CHECK(out.clamped);
  }
  SUBCASE("every minority example survives") {
    const auto out = undersample(data, cfg_of(SamplingMode::undersample, 1, 1));
    std::size_t minority_seen = 0;
    for (const auto& s : out.sentences) {
      if (s.label == Label::relevant) ++minority_seen;
    }
    CHECK(minority_seen == 100);
  }
}

TEST_CASE("oversample hits the requested counts") {
  const auto data = labeled_set(100, 900);

  SUBCASE("1:2") {
    const auto out = oversample(data, cfg_of(SamplingMode::oversample, 1, 2));
    const auto [rel, irr] = class_counts(out.sentences);
    CHECK(rel == 450);  // ceil(900 * 1 / 2)
    CHECK(irr == 900);
  }
  SUBCASE("1:10 floors at the original minority count") {
    const auto out = oversample(data, cfg_of(SamplingMode::oversample, 1, 10));
    const auto [rel, irr] = class_counts(out.sentences);
    CHECK(rel == 100);  // target 90 < 100
    CHECK(irr == 900);
  }
  SUBCASE("1:1 duplicates the minority up to the majority") {
    const auto out = oversample(data, cfg_of(SamplingMode::oversample, 1, 1));
    const auto [rel, irr] = class_counts(out.sentences);
    CHECK(rel == 900);
    CHECK(irr == 900);
  }
  SUBCASE("every majority example survives") {
    const auto out = oversample(data, cfg_of(SamplingMode::oversample, 1, 2));
    std::multiset<std::string> majority;
    for (const auto& s : out.sentences) {
      if (s.label == Label::irrelevant) {
        majority.insert(s.doc_id + "#" + std::to_string(s.index));
      }
    }
    CHECK(majority.size() == 900);
    // no duplicates among the majority
    for (const auto& key : majority) CHECK(majority.count(key) == 1);
  }
}

TEST_CASE("duplication-factor reading of the ratio") {
  const auto data = labeled_set(100, 900);
  SamplingConfig cfg = cfg_of(SamplingMode::oversample, 1, 10);
  cfg.ratio_is_duplication_factor = true;
  const auto out = oversample(data, cfg);
  const auto [rel, irr] = class_counts(out.sentences);
  CHECK(rel == 1000);  // minority x10
  CHECK(irr == 900);
}

TEST_CASE("resampling is deterministic and order-independent") {
  const auto data = labeled_set(50, 400);

  for (SamplingMode mode :
       {SamplingMode::undersample, SamplingMode::oversample}) {
    CAPTURE(sampling_mode_name(mode));
    const auto a = resample(data, cfg_of(mode, 1, 2, 7));
    const auto b = resample(data, cfg_of(mode, 1, 2, 7));
    REQUIRE(a.sentences.size() == b.sentences.size());
    for (std::size_t i = 0; i < a.sentences.size(); ++i) {
      CHECK(a.sentences[i] == b.sentences[i]);
    }

    // permuting the input leaves the output sequence identical
    auto shuffled = data;
    std::reverse(shuffled.begin(), shuffled.end());
    const auto c = resample(shuffled, cfg_of(mode, 1, 2, 7));
    REQUIRE(c.sentences.size() == a.sentences.size());
    for (std::size_t i = 0; i < a.sentences.size(); ++i) {
      CHECK(c.sentences[i] == a.sentences[i]);
    }

    // a different seed reshuffles
    const auto d = resample(data, cfg_of(mode, 1, 2, 8));
    bool any_difference = d.sentences.size() != a.sentences.size();
    for (std::size_t i = 0; !any_difference && i < a.sentences.size(); ++i) {
      any_difference = !(d.sentences[i] == a.sentences[i]);
    }
    CHECK(any_difference);
  }
}

TEST_CASE("achieved ratio is within one example across random shapes") {
  Rng check_rng(31);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t n_min = 5 + check_rng.bounded(80);
    const std::size_t n_maj = n_min + check_rng.bounded(500);
    const std::uint64_t r_maj = 1 + check_rng.bounded(10);
    const auto data = labeled_set(n_min, n_maj);

    const auto under =
        undersample(data, cfg_of(SamplingMode::undersample, 1, r_maj));
    const auto [urel, uirr] = class_counts(under.sentences);
    CHECK(urel == n_min);
    const std::size_t want_maj =
        std::min<std::size_t>(n_maj, n_min * r_maj / 1);
    CHECK(uirr == want_maj);

    const auto over =
        oversample(data, cfg_of(SamplingMode::oversample, 1, r_maj));
    const auto [orel, oirr] = class_counts(over.sentences);
    CHECK(oirr == n_maj);
    const std::size_t want_min =
        std::max<std::size_t>(n_min, (n_maj + r_maj - 1) / r_maj);
    CHECK(orel == want_min);
  }
}

TEST_CASE("single-class input is rejected") {
  const auto only_majority = labeled_set(0, 10);
  CHECK_THROWS_AS(
      undersample(only_majority, cfg_of(SamplingMode::undersample, 1, 1)),
      ValidationError);
  CHECK_THROWS_AS(
      oversample(only_majority, cfg_of(SamplingMode::oversample, 1, 1)),
      ValidationError);
}

TEST_CASE("mode none and weights pass the data through") {
  const auto data = labeled_set(10, 90);
  const auto out = resample(data, cfg_of(SamplingMode::none, 1, 1));
  CHECK(key_multiset(out.sentences) == key_multiset(data));
  const auto out2 = resample(data, cfg_of(SamplingMode::class_weights, 1, 1));
  CHECK(key_multiset(out2.sentences) == key_multiset(data));
}
