#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "threatlens/corpus.hpp"

namespace threatlens {

// Cybersecurity-artifact placeholders. Substitution applies the rules in the
// fixed order IP -> ADDRESS -> PATH -> MALWARE -> EXE -> FILE so the most
// specific structural pattern wins (paths contain filenames, malware names
// contain dots). Placeholder tokens are atomic: later passes never split,
// alter or re-match them.
enum class PlaceholderKind : int {
  exe = 0,
  address = 1,
  malware = 2,
  file = 3,
  path = 4,
  ip = 5,
};

inline constexpr std::size_t kPlaceholderCount = 6;

const char* placeholder_surface(PlaceholderKind kind);  // "[EXE]", ...
std::optional<PlaceholderKind> placeholder_of(const std::string& token);

struct NormalizeConfig {
  // Token suffixes rewritten to [FILE]; ".exe" is handled by its own rule.
  std::vector<std::string> file_extensions = {
      ".bat", ".doc", ".docx", ".txt", ".dll", ".pdf", ".js", ".vbs",
      ".ps1", ".zip", ".rar", ".tmp", ".dat", ".xls", ".rtf"};
  // AV-convention platform segments that mark a dotted name as malware.
  std::vector<std::string> platforms = {"Win32",   "Win64", "W32", "W97M",
                                        "MSIL",    "OSX",   "Linux",
                                        "Android", "JS",    "VBS"};
  // "Not English" heuristic: drop when fewer than this fraction of the
  // non-space characters (placeholders removed) are ASCII letters.
  double ascii_letter_ratio = 0.60;
  // Memory addresses: 0x followed by this many hex digits.
  std::size_t address_min_hex = 4;
  std::size_t address_max_hex = 16;
  // Longest run of adjacent tokens considered for a single artifact that a
  // tokenizer split apart ("192 . 168 . 0 . 1").
  std::size_t max_join = 8;
};

enum class DropReason { not_english, numbers_only, empty };

const char* drop_reason_name(DropReason r);

struct NormalizeReport {
  std::array<std::size_t, kPlaceholderCount> substitutions{};
  bool dropped = false;
  std::optional<DropReason> drop_reason;

  std::size_t total_substitutions() const;
};

// Rewrites artifacts in whitespace-tokenized text to placeholders. One pass
// over the rule order; pure rewriting, never fails.
std::pair<std::string, NormalizeReport> substitute_artifacts(
    const std::string& text, const NormalizeConfig& cfg = {});

// Removes punctuation characters and standalone digit runs, collapses
// whitespace. Placeholder tokens are protected.
std::string strip_punct_numbers(const std::string& text,
                                const NormalizeConfig& cfg = {});

struct FilterDecision {
  bool keep = true;
  std::optional<DropReason> reason;
};

FilterDecision filter_sentence(const std::string& text,
                               const NormalizeConfig& cfg = {});

// Full per-sentence pipeline: substitute -> strip, iterated to a fixpoint so
// the pipeline is idempotent, then filter. BIO tags of surviving tokens are
// carried over positionally; a matched span inherits B if any constituent
// was B/I, else O. Returns nullopt when the sentence is dropped; the report
// captures substitution counts and the drop reason.
std::optional<Sentence> normalize_pipeline(const Sentence& sentence,
                                           NormalizeReport* report = nullptr,
                                           const NormalizeConfig& cfg = {});

struct NormalizeSummary {
  std::array<std::size_t, kPlaceholderCount> substitutions{};
  std::size_t sentences_in = 0;
  std::size_t sentences_out = 0;
  std::size_t dropped_not_english = 0;
  std::size_t dropped_numbers_only = 0;
  std::size_t dropped_empty = 0;
};

// Applies the pipeline to every sentence; dropped sentences are removed and
// the surviving ones re-indexed so document indices stay contiguous.
std::pair<Corpus, NormalizeSummary> normalize_corpus(
    const Corpus& corpus, const NormalizeConfig& cfg = {});

// name,count CSV of a summary (substitutions per kind, drop counters).
std::string summary_csv(const NormalizeSummary& summary);

}  // namespace threatlens
