#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "threatlens/corpus.hpp"

namespace threatlens {

struct SparseFeatures {
  std::uint32_t dimension = 0;
  // (index, value) pairs with strictly increasing indices.
  std::vector<std::pair<std::uint32_t, double>> entries;
};

// Hashed unigram + adjacent-bigram features. Tokens are lowercased; a bigram
// hashes the two tokens joined by 0x1f. The hash is FNV-1a/64: the low
// log2(dimension) bits index, bit 63 picks the +1/-1 sign. Duplicate indices
// are summed. dimension must be a power of two >= 1024.
SparseFeatures featurize_hashed(const std::vector<std::string>& tokens,
                                std::uint32_t dimension);
SparseFeatures featurize_hashed(const std::vector<Token>& tokens,
                                std::uint32_t dimension);

}  // namespace threatlens
