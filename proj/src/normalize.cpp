#include "threatlens/normalize.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace threatlens {

namespace {

const char* kSurfaces[kPlaceholderCount] = {"[EXE]",  "[ADDRESS]", "[MALWARE]",
                                            "[FILE]", "[PATH]",    "[IP]"};

bool is_ascii_digit(char c) { return c >= '0' && c <= '9'; }

bool is_ascii_alpha(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

bool is_ascii_alnum(char c) { return is_ascii_digit(c) || is_ascii_alpha(c); }

bool is_ascii_punct(char c) {
  return std::ispunct(static_cast<unsigned char>(c)) != 0;
}

bool is_hex_digit(char c) {
  return is_ascii_digit(c) || (c >= 'a' && c <= 'f') || (c >= 'A' && c <= 'F');
}

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

bool ends_with_ci(const std::string& s, const std::string& suffix) {
  if (s.size() < suffix.size()) return false;
  return lower(s.substr(s.size() - suffix.size())) == lower(suffix);
}

// Edge punctuation that may cling to an artifact in running text.
std::string trim_edges(const std::string& s) {
  static const std::string kTrim = "\"'`,;:!?()<>{}";
  std::size_t b = 0, e = s.size();
  while (b < e && (kTrim.find(s[b]) != std::string::npos)) ++b;
  while (e > b && (kTrim.find(s[e - 1]) != std::string::npos || s[e - 1] == '.'))
    --e;
  return s.substr(b, e - b);
}

std::vector<std::string> split_dots(const std::string& t) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = t.find('.', start);
    if (dot == std::string::npos) {
      parts.push_back(t.substr(start));
      break;
    }
    parts.push_back(t.substr(start, dot - start));
    start = dot + 1;
  }
  return parts;
}

// Four dot-separated decimal octets, each 0..255.
bool match_ip(const std::string& t) {
  const auto parts = split_dots(t);
  if (parts.size() != 4) return false;
  for (const auto& part : parts) {
    if (part.empty() || part.size() > 3) return false;
    int value = 0;
    for (char c : part) {
      if (!is_ascii_digit(c)) return false;
      value = value * 10 + (c - '0');
    }
    if (value > 255) return false;
  }
  return true;
}

bool match_address(const std::string& t, const NormalizeConfig& cfg) {
  if (t.size() < 2 || t[0] != '0' || (t[1] != 'x' && t[1] != 'X')) return false;
  const std::size_t digits = t.size() - 2;
  if (digits < cfg.address_min_hex || digits > cfg.address_max_hex) return false;
  for (std::size_t i = 2; i < t.size(); ++i) {
    if (!is_hex_digit(t[i])) return false;
  }
  return true;
}

// Drive-letter prefix or two or more path separators.
bool match_path(const std::string& t) {
  if (t.size() >= 3 && is_ascii_alpha(t[0]) && t[1] == ':' &&
      (t[2] == '\\' || t[2] == '/')) {
    return true;
  }
  std::size_t separators = 0;
  for (char c : t) {
    if (c == '\\' || c == '/') ++separators;
  }
  return separators >= 2;
}

// >= 3 dot-separated alphanumeric segments where a non-final segment names a
// platform, matching the AV naming convention (TrojanDropper.Win32.Agent.life).
// The final segment is excluded so a platform-named file extension ("x.y.js")
// stays a file.
bool match_malware(const std::string& t, const NormalizeConfig& cfg) {
  const auto segments = split_dots(t);
  if (segments.size() < 3) return false;
  for (const auto& seg : segments) {
    if (seg.empty()) return false;
    for (char c : seg) {
      if (!is_ascii_alnum(c)) return false;
    }
  }
  for (std::size_t i = 0; i + 1 < segments.size(); ++i) {
    const std::string ls = lower(segments[i]);
    for (const auto& platform : cfg.platforms) {
      if (ls == lower(platform)) return true;
    }
  }
  return false;
}

bool match_exe(const std::string& t) {
  return t.size() > 4 && ends_with_ci(t, ".exe");
}

bool match_file(const std::string& t, const NormalizeConfig& cfg) {
  for (const auto& ext : cfg.file_extensions) {
    if (t.size() > ext.size() && ends_with_ci(t, ext)) return true;
  }
  return false;
}

bool match_kind(PlaceholderKind kind, const std::string& t,
                const NormalizeConfig& cfg) {
  switch (kind) {
    case PlaceholderKind::ip:
      return match_ip(t);
    case PlaceholderKind::address:
      return match_address(t, cfg);
    case PlaceholderKind::path:
      return match_path(t);
    case PlaceholderKind::malware:
      return match_malware(t, cfg);
    case PlaceholderKind::exe:
      return match_exe(t);
    case PlaceholderKind::file:
      return match_file(t, cfg);
  }
  return false;
}

constexpr PlaceholderKind kRuleOrder[kPlaceholderCount] = {
    PlaceholderKind::ip,      PlaceholderKind::address, PlaceholderKind::path,
    PlaceholderKind::malware, PlaceholderKind::exe,     PlaceholderKind::file};

Token make_placeholder(PlaceholderKind kind,
                       const std::vector<Token>& tokens, std::size_t first,
                       std::size_t run) {
  Token repl;
  repl.text = kSurfaces[static_cast<int>(kind)];
  repl.bio = Bio::O;
  for (std::size_t r = 0; r < run; ++r) {
    if (tokens[first + r].bio != Bio::O) repl.bio = Bio::B;
  }
  repl.tag = repl.bio == Bio::B ? "B" : "O";
  return repl;
}

// One substitution pass over the token stream. Each rule first rewrites
// single matching tokens; then, for artifacts a tokenizer split apart
// ("192 . 168 . 0 . 1"), adjacent runs up to cfg.max_join tokens are joined
// and the shortest matching run wins, so a join can never swallow a
// neighbouring word that was not needed for the match. Returns true when
// anything changed.
bool substitute_tokens(std::vector<Token>& tokens, const NormalizeConfig& cfg,
                       std::array<std::size_t, kPlaceholderCount>& counts) {
  bool changed = false;
  for (PlaceholderKind kind : kRuleOrder) {
    // single tokens
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (placeholder_of(tokens[i].text)) continue;
      if (match_kind(kind, trim_edges(tokens[i].text), cfg)) {
        tokens[i] = make_placeholder(kind, tokens, i, 1);
        ++counts[static_cast<int>(kind)];
        changed = true;
      }
    }

    // joined runs, shortest first (ties go to the leftmost)
    while (true) {
      std::size_t best_i = 0, best_run = 0;
      for (std::size_t run = 2; run <= cfg.max_join; ++run) {
        if (best_run != 0) break;
        for (std::size_t i = 0; i + run <= tokens.size(); ++i) {
          bool joinable = true;
          std::string joined;
          for (std::size_t r = 0; r < run; ++r) {
            if (placeholder_of(tokens[i + r].text)) {
              joinable = false;
              break;
            }
            joined += tokens[i + r].text;
          }
          if (!joinable) continue;
          if (match_kind(kind, trim_edges(joined), cfg)) {
            best_i = i;
            best_run = run;
            break;
          }
        }
      }
      if (best_run == 0) break;
      Token repl = make_placeholder(kind, tokens, best_i, best_run);
      tokens.erase(tokens.begin() + static_cast<std::ptrdiff_t>(best_i),
                   tokens.begin() +
                       static_cast<std::ptrdiff_t>(best_i + best_run));
      tokens.insert(tokens.begin() + static_cast<std::ptrdiff_t>(best_i),
                    std::move(repl));
      ++counts[static_cast<int>(kind)];
      changed = true;
    }
  }
  return changed;
}

// One strip pass: remove punctuation characters inside tokens, drop tokens
// that end up empty or digits-only. Placeholders are untouched.
bool strip_tokens(std::vector<Token>& tokens) {
  bool changed = false;
  std::vector<Token> out;
  out.reserve(tokens.size());
  for (auto& tok : tokens) {
    if (placeholder_of(tok.text)) {
      out.push_back(std::move(tok));
      continue;
    }
    std::string cleaned;
    cleaned.reserve(tok.text.size());
    for (char c : tok.text) {
      if (!is_ascii_punct(c)) cleaned += c;
    }
    if (cleaned.size() != tok.text.size()) changed = true;
    if (cleaned.empty()) {
      changed = true;
      continue;
    }
    bool digits_only = true;
    for (char c : cleaned) {
      if (!is_ascii_digit(c)) {
        digits_only = false;
        break;
      }
    }
    if (digits_only) {
      changed = true;
      continue;
    }
    tok.text = std::move(cleaned);
    out.push_back(std::move(tok));
  }
  tokens = std::move(out);
  return changed;
}

std::vector<Token> tokenize_ws(const std::string& text) {
  std::vector<Token> tokens;
  std::istringstream in(text);
  std::string word;
  while (in >> word) {
    tokens.push_back(Token{word, Bio::O, "O"});
  }
  return tokens;
}

std::string join_tokens(const std::vector<Token>& tokens) {
  std::string out;
  for (const auto& t : tokens) {
    if (!out.empty()) out += ' ';
    out += t.text;
  }
  return out;
}

// Text with placeholder surfaces removed, for the language heuristic.
std::string remove_placeholders(const std::string& text) {
  std::string out = text;
  for (const char* surface : kSurfaces) {
    const std::string needle = surface;
    std::size_t pos;
    while ((pos = out.find(needle)) != std::string::npos) {
      out.erase(pos, needle.size());
    }
  }
  return out;
}

}  // namespace

const char* placeholder_surface(PlaceholderKind kind) {
  return kSurfaces[static_cast<int>(kind)];
}

std::optional<PlaceholderKind> placeholder_of(const std::string& token) {
  for (std::size_t i = 0; i < kPlaceholderCount; ++i) {
    if (token == kSurfaces[i]) return static_cast<PlaceholderKind>(i);
  }
  return std::nullopt;
}

const char* drop_reason_name(DropReason r) {
  switch (r) {
    case DropReason::not_english:
      return "not_english";
    case DropReason::numbers_only:
      return "numbers_only";
    default:
      return "empty";
  }
}

std::size_t NormalizeReport::total_substitutions() const {
  std::size_t total = 0;
  for (std::size_t c : substitutions) total += c;
  return total;
}

std::pair<std::string, NormalizeReport> substitute_artifacts(
    const std::string& text, const NormalizeConfig& cfg) {
  NormalizeReport report;
  std::vector<Token> tokens = tokenize_ws(text);
  substitute_tokens(tokens, cfg, report.substitutions);
  return {join_tokens(tokens), report};
}

std::string strip_punct_numbers(const std::string& text,
                                const NormalizeConfig& cfg) {
  (void)cfg;
  std::vector<Token> tokens = tokenize_ws(text);
  strip_tokens(tokens);
  return join_tokens(tokens);
}

FilterDecision filter_sentence(const std::string& text,
                               const NormalizeConfig& cfg) {
  std::string residual = remove_placeholders(text);
  const bool had_placeholder = residual.size() != text.size();

  std::string chars;
  chars.reserve(residual.size());
  for (char c : residual) {
    if (!std::isspace(static_cast<unsigned char>(c))) chars += c;
  }

  if (chars.empty()) {
    if (had_placeholder) return {false, DropReason::numbers_only};
    return {false, DropReason::empty};
  }

  bool digits_only = true;
  for (char c : chars) {
    if (!is_ascii_digit(c)) {
      digits_only = false;
      break;
    }
  }
  if (digits_only) return {false, DropReason::numbers_only};

  std::size_t letters = 0;
  for (char c : chars) {
    if (is_ascii_alpha(c)) ++letters;
  }
  const double ratio = static_cast<double>(letters) /
                       static_cast<double>(chars.size());
  if (ratio < cfg.ascii_letter_ratio) return {false, DropReason::not_english};

  return {true, std::nullopt};
}

std::optional<Sentence> normalize_pipeline(const Sentence& sentence,
                                           NormalizeReport* report,
                                           const NormalizeConfig& cfg) {
  NormalizeReport local;
  NormalizeReport& rep = report != nullptr ? *report : local;
  rep = NormalizeReport{};

  Sentence out = sentence;
  // Substitute and strip to a fixpoint: stripping can expose an artifact a
  // tokenizer had interleaved with punctuation, and resubstituting keeps the
  // whole pipeline idempotent.
  for (std::size_t round = 0; round < 8; ++round) {
    const bool s1 = substitute_tokens(out.tokens, cfg, rep.substitutions);
    const bool s2 = strip_tokens(out.tokens);
    if (!s1 && !s2) break;
  }

  const FilterDecision decision = filter_sentence(out.text(), cfg);
  if (!decision.keep) {
    rep.dropped = true;
    rep.drop_reason = decision.reason;
    return std::nullopt;
  }
  return out;
}

std::pair<Corpus, NormalizeSummary> normalize_corpus(
    const Corpus& corpus, const NormalizeConfig& cfg) {
  Corpus out;
  out.split = corpus.split;
  NormalizeSummary summary;

  for (const auto& doc : corpus.documents) {
    Document ndoc;
    ndoc.id = doc.id;
    ndoc.has_annotations = doc.has_annotations;
    for (const auto& s : doc.sentences) {
      ++summary.sentences_in;
      NormalizeReport rep;
      auto normalized = normalize_pipeline(s, &rep, cfg);
      for (std::size_t k = 0; k < kPlaceholderCount; ++k) {
        summary.substitutions[k] += rep.substitutions[k];
      }
      if (!normalized) {
        switch (*rep.drop_reason) {
          case DropReason::not_english:
            ++summary.dropped_not_english;
            break;
          case DropReason::numbers_only:
            ++summary.dropped_numbers_only;
            break;
          case DropReason::empty:
            ++summary.dropped_empty;
            break;
        }
        continue;
      }
      normalized->index = ndoc.sentences.size();
      ndoc.sentences.push_back(std::move(*normalized));
      ++summary.sentences_out;
    }
    out.documents.push_back(std::move(ndoc));
  }
  return {out, summary};
}

std::string summary_csv(const NormalizeSummary& summary) {
  std::ostringstream out;
  out << "name,count\n";
  for (std::size_t k = 0; k < kPlaceholderCount; ++k) {
    const char* surface = kSurfaces[k];
    out << surface << ',' << summary.substitutions[k] << '\n';
  }
  out << "sentences_in," << summary.sentences_in << '\n';
  out << "sentences_out," << summary.sentences_out << '\n';
  out << "dropped_not_english," << summary.dropped_not_english << '\n';
  out << "dropped_numbers_only," << summary.dropped_numbers_only << '\n';
  out << "dropped_empty," << summary.dropped_empty << '\n';
  return out.str();
}

}  // namespace threatlens
