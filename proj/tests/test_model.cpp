#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>

#include "doctest.h"
#include "threatlens/errors.hpp"
#include "threatlens/features.hpp"
#include "threatlens/io.hpp"
#include "threatlens/linear.hpp"
#include "threatlens/model_io.hpp"
#include "threatlens/vocab.hpp"

using namespace threatlens;

namespace {

Corpus tiny_corpus(const std::vector<std::vector<std::string>>& sentences) {
  Corpus c;
  Document doc;
  doc.id = "d";
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    Sentence s;
    s.doc_id = "d";
    s.index = i;
    for (const auto& w : sentences[i]) s.tokens.push_back(Token{w, Bio::O, "O"});
    s.label = Label::irrelevant;
    doc.sentences.push_back(std::move(s));
  }
  c.documents.push_back(std::move(doc));
  return c;
}

// Test-side FNV-1a/64, written out digit by digit.
std::uint64_t fnv_oracle(const std::string& s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

SparseFeatures dense2(double x0, double x1) {
  SparseFeatures f;
  f.dimension = 1024;
  if (x0 != 0.0) f.entries.emplace_back(0, x0);
  if (x1 != 0.0) f.entries.emplace_back(1, x1);
  return f;
}

}  // namespace

TEST_CASE("vocab: min_freq cutoff and specials") {
  const Corpus c = tiny_corpus({{"the", "the", "the"}, {"[EXE]", "ran"}});
  const Vocab v = Vocab::build(c, 2);

  CHECK(v.id_of("the") >= Vocab::first_regular_id);
  CHECK(v.id_of("ran") == Vocab::unk_id);          // below min_freq
  CHECK(v.id_of("[EXE]") == Vocab::first_placeholder_id);
  CHECK(v.id_of("[IP]") == Vocab::first_placeholder_id + 5);
  CHECK(v.id_of("[PAD]") == Vocab::pad_id);
  CHECK(v.id_of("THE") == v.id_of("the"));  // lowercased lookup
  CHECK(v.size() == Vocab::first_regular_id + 1);

  SUBCASE("placeholders survive at frequency zero") {
    for (int id = Vocab::first_placeholder_id; id < Vocab::first_regular_id;
         ++id) {
      CHECK(v.is_special(id));
      CHECK(v.id_of(v.token_of(id)) == id);
    }
  }
  SUBCASE("deterministic dump") {
    const Vocab again = Vocab::build(c, 2);
    CHECK(v.dump() == again.dump());
  }
  SUBCASE("frequency-then-lexicographic order") {
    const Corpus c2 = tiny_corpus({{"b", "b", "a", "a", "z"}});
    const Vocab v2 = Vocab::build(c2, 1);
    CHECK(v2.id_of("a") == Vocab::first_regular_id);      // freq 2, lex first
    CHECK(v2.id_of("b") == Vocab::first_regular_id + 1);  // freq 2
    CHECK(v2.id_of("z") == Vocab::first_regular_id + 2);  // freq 1
  }
  SUBCASE("empty corpus is rejected") {
    CHECK_THROWS_AS(Vocab::build(Corpus{}, 1), ValidationError);
  }
}

TEST_CASE("hashed features") {
  SUBCASE("empty sentence, single token") {
    CHECK(featurize_hashed(std::vector<std::string>{}, 1024).entries.empty());
    const auto f = featurize_hashed(std::vector<std::string>{"alpha"}, 1024);
    CHECK(f.entries.size() == 1);
  }
  SUBCASE("hand-hash oracle on a five-token vocabulary") {
    const std::vector<std::string> tokens = {"a", "b", "c", "d", "e"};
    const auto f = featurize_hashed(tokens, 4096);
    // expected: 5 unigrams + 4 bigrams hashed over index = h & 4095,
    // sign from bit 63, duplicates summed
    std::map<std::uint32_t, double> expect;
    auto add = [&](const std::string& key) {
      const std::uint64_t h = fnv_oracle(key);
      expect[static_cast<std::uint32_t>(h & 4095)] +=
          (h >> 63) != 0 ? -1.0 : 1.0;
    };
    for (const auto& t : tokens) add(t);
    for (std::size_t i = 1; i < tokens.size(); ++i) {
      add(tokens[i - 1] + '\x1f' + tokens[i]);
    }
    std::erase_if(expect, [](const auto& e) { return e.second == 0.0; });

    REQUIRE(f.entries.size() == expect.size());
    for (const auto& [index, value] : f.entries) {
      REQUIRE(expect.count(index) == 1);
      CHECK(expect[index] == value);
    }
  }
  SUBCASE("bigram order matters") {
    const auto ab = featurize_hashed(std::vector<std::string>{"a", "b"}, 4096);
    const auto ba = featurize_hashed(std::vector<std::string>{"b", "a"}, 4096);
    CHECK(ab.entries != ba.entries);
  }
  SUBCASE("indices strictly increasing") {
    const auto f = featurize_hashed(
        std::vector<std::string>{"x", "y", "z", "x", "y"}, 1024);
    for (std::size_t i = 1; i < f.entries.size(); ++i) {
      CHECK(f.entries[i - 1].first < f.entries[i].first);
    }
  }
  SUBCASE("dimension must be a power of two >= 1024") {
    CHECK_THROWS_AS(featurize_hashed(std::vector<std::string>{"a"}, 1000),
                    ValidationError);
    CHECK_THROWS_AS(featurize_hashed(std::vector<std::string>{"a"}, 512),
                    ValidationError);
  }
  SUBCASE("case folding") {
    const auto a = featurize_hashed(std::vector<std::string>{"Word"}, 1024);
    const auto b = featurize_hashed(std::vector<std::string>{"word"}, 1024);
    CHECK(a.entries == b.entries);
  }
}

TEST_CASE("linear model on the separable 2-D toy set") {
  // 20 points, separable on the first coordinate.
  std::vector<SparseFeatures> xs;
  std::vector<int> ys;
  for (int i = 0; i < 10; ++i) {
    xs.push_back(dense2(2.0 + 0.1 * i, (i % 3) - 1.0));
    ys.push_back(1);
    xs.push_back(dense2(-2.0 - 0.1 * i, (i % 5) - 2.0));
    ys.push_back(0);
  }

  // Oracle: an exhaustive threshold search on x0 must reach F1 = 1.0,
  // confirming separability before the trainer is trusted with it.
  {
    bool separable = false;
    for (double thr = -5.0; thr <= 5.0; thr += 0.05) {
      std::size_t wrong = 0;
      for (std::size_t i = 0; i < xs.size(); ++i) {
        const double x0 = xs[i].entries.empty() ? 0.0 : xs[i].entries[0].second;
        const int pred = x0 > thr ? 1 : 0;
        wrong += pred != ys[i] ? 1 : 0;
      }
      if (wrong == 0) separable = true;
    }
    REQUIRE(separable);
  }

  TrainConfig cfg;
  cfg.epochs = 60;
  cfg.learning_rate = 0.5;
  cfg.seed = 3;
  const LinearTrainResult result =
      train_linear(xs, ys, ClassWeights{1.0, 1.0}, cfg);

  std::size_t wrong = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const int pred = predict_linear(result.model, xs[i]) >= 0.5 ? 1 : 0;
    wrong += pred != ys[i] ? 1 : 0;
  }
  CHECK(wrong == 0);  // training F1 == 1.0 on a separable set
}

TEST_CASE("linear trainer edge cases") {
  SUBCASE("single-class input is rejected") {
    std::vector<SparseFeatures> xs = {dense2(1, 0), dense2(2, 0)};
    std::vector<int> ys = {1, 1};
    CHECK_THROWS_AS(train_linear(xs, ys, ClassWeights{1, 1}, TrainConfig{}),
                    ValidationError);
  }
  SUBCASE("unit weights reproduce the unweighted loss bit for bit") {
    std::vector<SparseFeatures> xs = {dense2(1, 0), dense2(-1, 0),
                                      dense2(0.5, 1), dense2(-0.5, -1)};
    std::vector<int> ys = {1, 0, 1, 0};
    TrainConfig cfg;
    cfg.epochs = 1;
    cfg.learning_rate = 0.0;  // no updates: the loss is pure evaluation
    const auto run = train_linear(xs, ys, ClassWeights{1.0, 1.0}, cfg);
    // zero weights, p = 0.5 for every example
    const double expected = -std::log(0.5 + 1e-12);
    CHECK(run.epoch_losses.at(0) == expected);
  }
  SUBCASE("zero-weight model predicts exactly 0.5") {
    LinearModel model;
    model.dimension = 1024;
    model.weights.assign(1024, 0.0);
    CHECK(predict_linear(model, dense2(3.0, -2.0)) == 0.5);
  }
  SUBCASE("dimension mismatch") {
    LinearModel model;
    model.dimension = 2048;
    model.weights.assign(2048, 0.0);
    CHECK_THROWS_AS(predict_linear(model, dense2(1, 1)), ValidationError);
  }
  SUBCASE("determinism") {
    std::vector<SparseFeatures> xs = {dense2(1, 2), dense2(-1, 1),
                                      dense2(2, -1), dense2(-2, 0)};
    std::vector<int> ys = {1, 0, 1, 0};
    TrainConfig cfg;
    cfg.epochs = 5;
    cfg.learning_rate = 0.1;
    const auto a = train_linear(xs, ys, ClassWeights{1, 1}, cfg);
    const auto b = train_linear(xs, ys, ClassWeights{1, 1}, cfg);
    CHECK(a.model.weights == b.model.weights);
    CHECK(a.model.bias == b.model.bias);
    CHECK(a.epoch_losses == b.epoch_losses);
  }
}

TEST_CASE("linear model file round trip is byte-stable") {
  std::vector<SparseFeatures> xs = {dense2(1, 2), dense2(-1, 1),
                                    dense2(2, -1), dense2(-2, 0)};
  std::vector<int> ys = {1, 0, 1, 0};
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.learning_rate = 0.2;
  const LinearModel model = train_linear(xs, ys, ClassWeights{2, 0.5}, cfg).model;

  const auto dir = std::filesystem::temp_directory_path() / "tl_model_test";
  std::filesystem::create_directories(dir);
  const std::string p1 = (dir / "m1.tlm").string();
  const std::string p2 = (dir / "m2.tlm").string();

  save_model(model, p1);
  CHECK(peek_model_type(p1) == ModelType::linear);
  const LinearModel loaded = load_linear_model(p1);
  CHECK(loaded.weights == model.weights);
  CHECK(loaded.bias == model.bias);
  CHECK(loaded.trained_with.w_relevant == 2.0);

  save_model(loaded, p2);
  CHECK(read_file(p1) == read_file(p2));

  SUBCASE("loading garbage fails cleanly") {
    const std::string bad = (dir / "bad.tlm").string();
    write_file(bad, "not a model");
    CHECK_THROWS_AS(peek_model_type(bad), DataError);
  }
}
