#pragma once

#include <cstddef>
#include <string>
#include <unordered_map>
#include <vector>

#include "threatlens/corpus.hpp"

namespace threatlens {

// Token ids are dense 0..V-1. Ids below first_regular_id are special: the
// four control tokens plus the six artifact placeholders. Specials are never
// pruned by frequency and never selected for masking.
class Vocab {
 public:
  static constexpr int pad_id = 0;
  static constexpr int unk_id = 1;
  static constexpr int mask_id = 2;
  static constexpr int cls_id = 3;
  static constexpr int first_placeholder_id = 4;  // [EXE]..[IP], spec order
  static constexpr int first_regular_id = 10;

  // Lowercased corpus tokens with count >= min_freq, ordered by frequency
  // descending then lexicographic, after the specials. Placeholder surfaces
  // in the text map to their special ids, not to regular entries. Throws
  // ValidationError on an empty corpus.
  static Vocab build(const Corpus& corpus, std::size_t min_freq);

  // Reconstructs a vocab from its id-ordered token list (model files).
  static Vocab from_tokens(std::vector<std::string> tokens,
                           std::size_t min_freq);

  int id_of(const std::string& token) const;  // [UNK] fallback
  const std::string& token_of(int id) const { return tokens_.at(id); }
  std::size_t size() const { return tokens_.size(); }
  std::size_t min_freq() const { return min_freq_; }
  bool is_special(int id) const { return id < first_regular_id; }

  const std::vector<std::string>& tokens() const { return tokens_; }

  std::vector<int> encode(const std::vector<Token>& tokens) const;

  // Deterministic text dump, one token per line in id order.
  std::string dump() const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
  std::size_t min_freq_ = 1;
};

}  // namespace threatlens
