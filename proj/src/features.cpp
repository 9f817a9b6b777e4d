#include "threatlens/features.hpp"

#include <algorithm>
#include <cctype>

#include "threatlens/errors.hpp"
#include "threatlens/hash.hpp"

namespace threatlens {

namespace {

std::string lower(std::string s) {
  for (char& c : s) {
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return s;
}

void add_hash(std::vector<std::pair<std::uint32_t, double>>& raw,
              const std::string& key, std::uint32_t dimension) {
  const std::uint64_t h = fnv1a64(key);
  const auto index = static_cast<std::uint32_t>(h & (dimension - 1));
  const double sign = (h >> 63) != 0 ? -1.0 : 1.0;
  raw.emplace_back(index, sign);
}

}  // namespace

SparseFeatures featurize_hashed(const std::vector<std::string>& tokens,
                                std::uint32_t dimension) {
  if (dimension < 1024 || (dimension & (dimension - 1)) != 0) {
    throw ValidationError(
        "feature dimension must be a power of two >= 1024, got " +
        std::to_string(dimension));
  }

  std::vector<std::pair<std::uint32_t, double>> raw;
  raw.reserve(tokens.size() * 2);
  std::string prev;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const std::string cur = lower(tokens[i]);
    add_hash(raw, cur, dimension);
    if (i > 0) {
      add_hash(raw, prev + '\x1f' + cur, dimension);
    }
    prev = cur;
  }

  std::sort(raw.begin(), raw.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  SparseFeatures out;
  out.dimension = dimension;
  for (const auto& [index, value] : raw) {
    if (!out.entries.empty() && out.entries.back().first == index) {
      out.entries.back().second += value;
    } else {
      out.entries.emplace_back(index, value);
    }
  }
  // +1/-1 collisions on the same index can cancel exactly; drop those.
  std::erase_if(out.entries, [](const auto& e) { return e.second == 0.0; });
  return out;
}

SparseFeatures featurize_hashed(const std::vector<Token>& tokens,
                                std::uint32_t dimension) {
  std::vector<std::string> words;
  words.reserve(tokens.size());
  for (const auto& t : tokens) words.push_back(t.text);
  return featurize_hashed(words, dimension);
}

}  // namespace threatlens
