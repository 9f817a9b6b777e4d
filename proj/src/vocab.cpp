#include "threatlens/vocab.hpp"

#include <algorithm>
#include <cctype>
#include <map>

#include "threatlens/errors.hpp"
#include "threatlens/normalize.hpp"

namespace threatlens {

namespace {

const char* kSpecials[Vocab::first_regular_id] = {
    "[PAD]",     "[UNK]",  "[MASK]", "[CLS]", "[EXE]",
    "[ADDRESS]", "[MALWARE]", "[FILE]", "[PATH]", "[IP]"};

std::string lower(std::string s) {
  for (char& c : s) {
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return s;
}

}  // namespace

Vocab Vocab::build(const Corpus& corpus, std::size_t min_freq) {
  if (corpus_stats(corpus).n_sentences == 0) {
    throw ValidationError("build_vocab: empty corpus");
  }

  std::map<std::string, std::size_t> counts;
  for (const auto& doc : corpus.documents) {
    for (const auto& s : doc.sentences) {
      for (const auto& t : s.tokens) {
        if (placeholder_of(t.text)) continue;  // placeholders are specials
        ++counts[lower(t.text)];
      }
    }
  }

  std::vector<std::pair<std::string, std::size_t>> kept;
  for (const auto& [token, count] : counts) {
    if (count >= min_freq) kept.emplace_back(token, count);
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  std::vector<std::string> tokens;
  tokens.reserve(first_regular_id + kept.size());
  for (const char* s : kSpecials) tokens.emplace_back(s);
  for (auto& [token, count] : kept) {
    (void)count;
    tokens.push_back(std::move(token));
  }
  return from_tokens(std::move(tokens), min_freq);
}

Vocab Vocab::from_tokens(std::vector<std::string> tokens,
                         std::size_t min_freq) {
  Vocab v;
  v.tokens_ = std::move(tokens);
  v.min_freq_ = min_freq;
  v.index_.reserve(v.tokens_.size());
  for (std::size_t i = 0; i < v.tokens_.size(); ++i) {
    v.index_.emplace(v.tokens_[i], static_cast<int>(i));
  }
  return v;
}

int Vocab::id_of(const std::string& token) const {
  // Specials (placeholders included) match on their exact surface; regular
  // tokens are matched lowercased.
  auto it = index_.find(token);
  if (it != index_.end() && is_special(it->second)) return it->second;
  it = index_.find(lower(token));
  if (it != index_.end()) return it->second;
  return unk_id;
}

std::vector<int> Vocab::encode(const std::vector<Token>& tokens) const {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(id_of(t.text));
  return ids;
}

std::string Vocab::dump() const {
  std::string out;
  for (const auto& t : tokens_) {
    out += t;
    out += '\n';
  }
  return out;
}

}  // namespace threatlens
