#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "threatlens/corpus.hpp"
#include "threatlens/rng.hpp"

namespace threatlens {

// Seeded synthetic corpus over templates covering all six artifact kinds,
// with roughly a 1:9 relevant:irrelevant imbalance. Ships so every test and
// the whole acceptance suite run without the licensed dataset.
struct FixtureSpec {
  std::size_t n_docs = 10;
  std::size_t sentences_per_doc = 20;
  std::size_t relevant_per_doc = 2;
  std::uint64_t seed = 42;
};

Corpus make_fixture_corpus(Split split, const FixtureSpec& spec = {});

// Adversarial token stream (artifacts, punctuation runs, digits, non-ASCII
// words, random BIO tags) for property tests.
Sentence random_fixture_sentence(Rng& rng, const std::string& doc_id,
                                 std::size_t index);

// 50 sentences, each one word type repeated eight times: a lookup table can
// reach accuracy 1.0 on masked tokens, so the corpus is memorizable.
std::vector<Sentence> lm_toy_corpus();

}  // namespace threatlens
