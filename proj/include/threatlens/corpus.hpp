#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace threatlens {

enum class Bio { B, I, O };

enum class Label { irrelevant = 0, relevant = 1 };

enum class Split { train, dev, test };

struct Token {
  std::string text;  // surface form, non-empty, no whitespace
  Bio bio = Bio::O;
  std::string tag;  // full original tag, e.g. "B-Action", kept verbatim

  bool operator==(const Token&) const = default;
};

struct Sentence {
  std::vector<Token> tokens;
  Label label = Label::irrelevant;
  std::string doc_id;
  std::size_t index = 0;  // position within the document

  bool operator==(const Sentence&) const = default;

  // Space-joined surface forms.
  std::string text() const;
};

struct Document {
  std::string id;
  std::vector<Sentence> sentences;
  // False when the source file carried no label column at all, i.e. every
  // tag was defaulted to O and derived labels are not gold.
  bool has_annotations = true;

  bool operator==(const Document&) const = default;
};

struct Corpus {
  Split split = Split::train;
  std::vector<Document> documents;
};

struct CorpusStats {
  std::size_t n_documents = 0;
  std::size_t n_sentences = 0;
  std::size_t n_relevant = 0;
  std::size_t n_irrelevant = 0;

  bool operator==(const CorpusStats&) const = default;
};

// A sentence is irrelevant iff every token is tagged O; anything else makes
// it relevant. Throws ValidationError on an empty token list.
Label derive_sentence_label(const std::vector<Token>& tokens);

// Parses one annotated report in token-per-line form: "<token>\t<tag>" with a
// blank line terminating each sentence. The tag column is optional and
// defaults to O. A trailing unterminated sentence is accepted. Throws
// ParseError (with line number) on malformed lines and on empty input.
Document parse_annotated_document(std::istream& in, const std::string& doc_id);
Document parse_annotated_document(const std::string& raw,
                                  const std::string& doc_id);

// Token-per-line rendering, the inverse of parse_annotated_document.
std::string serialize_document(const Document& doc);

CorpusStats corpus_stats(const Corpus& corpus);

// Union of two corpora (LM-corpus augmentation). Document ids must be
// disjoint; a collision raises DataError naming the id.
Corpus merge_corpora(const Corpus& a, const Corpus& b);

// Gold-label overrides: (doc_id, sentence index) -> label. Lines are
// "<doc_id>\t<index>\t<0|1>". Unknown doc/sentence references raise
// DataError.
using GoldLabels = std::map<std::pair<std::string, std::size_t>, Label>;
GoldLabels parse_gold_labels(std::istream& in);
void apply_gold_labels(Corpus& corpus, const GoldLabels& gold);

Bio bio_of(const std::string& tag);      // "B-Action" -> Bio::B; throws ParseError
const char* split_name(Split s);
std::optional<Split> split_from_name(const std::string& name);

// Canonical corpus dump: JSON-lines, one sentence per line with fields
// {doc_id, index, tokens[], bio[], label}.
void write_jsonl(const Corpus& corpus, std::ostream& out);
Corpus read_jsonl(std::istream& in, Split split);

}  // namespace threatlens
