#pragma once

#include <cstddef>
#include <vector>

#include "threatlens/corpus.hpp"
#include "threatlens/rng.hpp"
#include "threatlens/vocab.hpp"

namespace threatlens {

// A padded id batch. Every row starts with [CLS]; rows are truncated to the
// model's max length and padded with [PAD] to the widest row.
struct Batch {
  std::size_t n_rows = 0;
  std::size_t width = 0;
  std::vector<int> ids;               // n_rows * width
  std::vector<std::size_t> lengths;   // true lengths, [CLS] included

  int at(std::size_t row, std::size_t col) const {
    return ids[row * width + col];
  }
};

Batch encode_batch(const Vocab& vocab, const std::vector<Sentence>& sentences,
                   std::size_t max_len);
Batch encode_batch(const Vocab& vocab,
                   const std::vector<const Sentence*>& sentences,
                   std::size_t max_len);

struct MaskedBatch {
  Batch corrupted;
  std::vector<std::size_t> target_rows;
  std::vector<std::size_t> target_cols;
  std::vector<int> target_ids;  // original ids at the selected positions

  std::size_t n_targets() const { return target_ids.size(); }
};

// BERT-style corruption: per row, ceil(mask_prob * n_maskable) non-special
// positions are selected; of those 80% become [MASK], 10% a random regular
// token and 10% stay unchanged. Targets always record the original id. Rows
// without maskable tokens come back untouched with no targets.
MaskedBatch mask_batch(const Batch& clean, const Vocab& vocab,
                       double mask_prob, Rng& rng);

}  // namespace threatlens
