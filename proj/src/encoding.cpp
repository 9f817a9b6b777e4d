#include "threatlens/encoding.hpp"

#include <algorithm>
#include <cmath>

#include "threatlens/errors.hpp"

namespace threatlens {

Batch encode_batch(const Vocab& vocab, const std::vector<Sentence>& sentences,
                   std::size_t max_len) {
  std::vector<const Sentence*> ptrs;
  ptrs.reserve(sentences.size());
  for (const auto& s : sentences) ptrs.push_back(&s);
  return encode_batch(vocab, ptrs, max_len);
}

Batch encode_batch(const Vocab& vocab,
                   const std::vector<const Sentence*>& sentences,
                   std::size_t max_len) {
  Batch batch;
  batch.n_rows = sentences.size();

  std::vector<std::vector<int>> rows;
  rows.reserve(sentences.size());
  for (const Sentence* s : sentences) {
    std::vector<int> ids;
    ids.reserve(s->tokens.size() + 1);
    ids.push_back(Vocab::cls_id);
    for (const auto& t : s->tokens) {
      if (ids.size() >= max_len) break;
      ids.push_back(vocab.id_of(t.text));
    }
    batch.width = std::max(batch.width, ids.size());
    batch.lengths.push_back(ids.size());
    rows.push_back(std::move(ids));
  }

  batch.ids.assign(batch.n_rows * batch.width, Vocab::pad_id);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::copy(rows[r].begin(), rows[r].end(),
              batch.ids.begin() + static_cast<std::ptrdiff_t>(r * batch.width));
  }
  return batch;
}

MaskedBatch mask_batch(const Batch& clean, const Vocab& vocab,
                       double mask_prob, Rng& rng) {
  if (!(mask_prob > 0.0 && mask_prob < 1.0)) {
    throw ValidationError("mask_prob must be in (0, 1)");
  }

  MaskedBatch out;
  out.corrupted = clean;

  const int n_regular =
      static_cast<int>(vocab.size()) - Vocab::first_regular_id;

  for (std::size_t r = 0; r < clean.n_rows; ++r) {
    std::vector<std::size_t> maskable;
    for (std::size_t c = 0; c < clean.lengths[r]; ++c) {
      if (!vocab.is_special(clean.at(r, c))) maskable.push_back(c);
    }
    if (maskable.empty()) continue;

    const auto k = static_cast<std::size_t>(
        std::ceil(mask_prob * static_cast<double>(maskable.size())));
    rng.shuffle(maskable);
    maskable.resize(k);
    std::sort(maskable.begin(), maskable.end());

    for (std::size_t c : maskable) {
      const int original = clean.at(r, c);
      int& slot = out.corrupted.ids[r * clean.width + c];
      const double u = rng.uniform01();
      if (u < 0.8) {
        slot = Vocab::mask_id;
      } else if (u < 0.9 && n_regular > 0) {
        slot = Vocab::first_regular_id +
               static_cast<int>(rng.bounded(static_cast<std::uint64_t>(n_regular)));
      }  // else: left unchanged
      out.target_rows.push_back(r);
      out.target_cols.push_back(c);
      out.target_ids.push_back(original);
    }
  }
  return out;
}

}  // namespace threatlens
