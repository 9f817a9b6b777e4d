#include "threatlens/corpus.hpp"

#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "threatlens/errors.hpp"

namespace threatlens {

std::string Sentence::text() const {
  std::string out;
  for (const auto& t : tokens) {
    if (!out.empty()) out += ' ';
    out += t.text;
  }
  return out;
}

Label derive_sentence_label(const std::vector<Token>& tokens) {
  if (tokens.empty()) {
    throw ValidationError("derive_sentence_label: empty token list");
  }
  for (const auto& t : tokens) {
    if (t.bio != Bio::O) return Label::relevant;
  }
  return Label::irrelevant;
}

Bio bio_of(const std::string& tag) {
  const std::size_t dash = tag.find('-');
  const std::string head = dash == std::string::npos ? tag : tag.substr(0, dash);
  if (head == "B") return Bio::B;
  if (head == "I") return Bio::I;
  if (head == "O") return Bio::O;
  throw ParseError("invalid BIO tag '" + tag + "'");
}

namespace {

const char* bio_name(Bio b) {
  switch (b) {
    case Bio::B:
      return "B";
    case Bio::I:
      return "I";
    default:
      return "O";
  }
}

bool has_whitespace(const std::string& s) {
  for (char c : s) {
    if (c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\v' ||
        c == '\f') {
      return true;
    }
  }
  return false;
}

}  // namespace

Document parse_annotated_document(std::istream& in, const std::string& doc_id) {
  Document doc;
  doc.id = doc_id;
  doc.has_annotations = false;

  std::vector<Token> pending;
  std::string line;
  std::size_t line_no = 0;
  bool saw_anything = false;

  auto flush_sentence = [&]() {
    if (pending.empty()) return;
    Sentence s;
    s.tokens = std::move(pending);
    pending.clear();
    s.doc_id = doc_id;
    s.index = doc.sentences.size();
    s.label = derive_sentence_label(s.tokens);
    doc.sentences.push_back(std::move(s));
  };

  while (std::getline(in, line)) {
    ++line_no;
    saw_anything = true;
    if (!line.empty() && line.back() == '\r') line.pop_back();

    if (line.empty()) {
      flush_sentence();
      continue;
    }

    // Split on tabs: "<token>" or "<token>\t<tag>".
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      const std::size_t tab = line.find('\t', start);
      if (tab == std::string::npos) {
        fields.push_back(line.substr(start));
        break;
      }
      fields.push_back(line.substr(start, tab - start));
      start = tab + 1;
    }
    if (fields.size() > 2) {
      throw ParseError(doc_id + ":" + std::to_string(line_no) +
                       ": expected '<token>\\t<tag>', got " +
                       std::to_string(fields.size()) + " fields");
    }

    Token tok;
    tok.text = fields[0];
    if (tok.text.empty() || has_whitespace(tok.text)) {
      throw ParseError(doc_id + ":" + std::to_string(line_no) +
                       ": token must be non-empty and whitespace-free");
    }
    if (fields.size() == 2 && !fields[1].empty()) {
      tok.tag = fields[1];
      try {
        tok.bio = bio_of(tok.tag);
      } catch (const ParseError&) {
        throw ParseError(doc_id + ":" + std::to_string(line_no) +
                         ": invalid BIO tag '" + tok.tag + "'");
      }
      doc.has_annotations = true;
    } else {
      tok.tag = "O";
      tok.bio = Bio::O;
    }
    pending.push_back(std::move(tok));
  }
  flush_sentence();

  if (!saw_anything) {
    throw ParseError(doc_id + ": empty document");
  }
  return doc;
}

Document parse_annotated_document(const std::string& raw,
                                  const std::string& doc_id) {
  std::istringstream in(raw);
  return parse_annotated_document(in, doc_id);
}

std::string serialize_document(const Document& doc) {
  std::string out;
  for (const auto& s : doc.sentences) {
    for (const auto& t : s.tokens) {
      out += t.text;
      out += '\t';
      out += t.tag.empty() ? bio_name(t.bio) : t.tag.c_str();
      out += '\n';
    }
    out += '\n';
  }
  return out;
}

CorpusStats corpus_stats(const Corpus& corpus) {
  CorpusStats st;
  st.n_documents = corpus.documents.size();
  for (const auto& doc : corpus.documents) {
    st.n_sentences += doc.sentences.size();
    for (const auto& s : doc.sentences) {
      if (s.label == Label::relevant) {
        ++st.n_relevant;
      } else {
        ++st.n_irrelevant;
      }
    }
  }
  return st;
}

Corpus merge_corpora(const Corpus& a, const Corpus& b) {
  Corpus out;
  out.split = a.split;
  out.documents = a.documents;
  std::set<std::string> ids;
  for (const auto& doc : a.documents) ids.insert(doc.id);
  for (const auto& doc : b.documents) {
    if (!ids.insert(doc.id).second) {
      throw DataError("merge_corpora: duplicate document id '" + doc.id + "'");
    }
    out.documents.push_back(doc);
  }
  return out;
}

GoldLabels parse_gold_labels(std::istream& in) {
  GoldLabels gold;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream parts(line);
    std::string doc_id, index_s, label_s;
    if (!std::getline(parts, doc_id, '\t') ||
        !std::getline(parts, index_s, '\t') ||
        !std::getline(parts, label_s, '\t')) {
      throw ParseError("gold labels:" + std::to_string(line_no) +
                       ": expected '<doc_id>\\t<index>\\t<0|1>'");
    }
    std::size_t index = 0;
    try {
      index = std::stoul(index_s);
    } catch (const std::exception&) {
      throw ParseError("gold labels:" + std::to_string(line_no) +
                       ": bad sentence index '" + index_s + "'");
    }
    Label label;
    if (label_s == "0") {
      label = Label::irrelevant;
    } else if (label_s == "1") {
      label = Label::relevant;
    } else {
      throw ParseError("gold labels:" + std::to_string(line_no) +
                       ": label must be 0 or 1, got '" + label_s + "'");
    }
    gold[{doc_id, index}] = label;
  }
  return gold;
}

void apply_gold_labels(Corpus& corpus, const GoldLabels& gold) {
  std::set<std::pair<std::string, std::size_t>> seen;
  for (auto& doc : corpus.documents) {
    for (auto& s : doc.sentences) {
      const auto it = gold.find({doc.id, s.index});
      if (it != gold.end()) {
        s.label = it->second;
        seen.insert(it->first);
      }
    }
    if (!doc.sentences.empty()) doc.has_annotations = true;
  }
  for (const auto& [key, label] : gold) {
    (void)label;
    if (!seen.count(key)) {
      throw DataError("gold labels reference unknown sentence " + key.first +
                      ":" + std::to_string(key.second));
    }
  }
}

const char* split_name(Split s) {
  switch (s) {
    case Split::train:
      return "train";
    case Split::dev:
      return "dev";
    default:
      return "test";
  }
}

std::optional<Split> split_from_name(const std::string& name) {
  if (name == "train") return Split::train;
  if (name == "dev") return Split::dev;
  if (name == "test") return Split::test;
  return std::nullopt;
}

void write_jsonl(const Corpus& corpus, std::ostream& out) {
  for (const auto& doc : corpus.documents) {
    for (const auto& s : doc.sentences) {
      nlohmann::json j;
      j["doc_id"] = doc.id;
      j["index"] = s.index;
      auto& toks = j["tokens"] = nlohmann::json::array();
      auto& bios = j["bio"] = nlohmann::json::array();
      for (const auto& t : s.tokens) {
        toks.push_back(t.text);
        bios.push_back(t.tag.empty() ? bio_name(t.bio) : t.tag.c_str());
      }
      j["label"] = s.label == Label::relevant ? 1 : 0;
      out << j.dump() << '\n';
    }
  }
}

Corpus read_jsonl(std::istream& in, Split split) {
  Corpus corpus;
  corpus.split = split;
  std::string line;
  std::size_t line_no = 0;
  Document* current = nullptr;

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("jsonl:" + std::to_string(line_no) + ": " + e.what());
    }
    try {
      Sentence s;
      s.doc_id = j.at("doc_id").get<std::string>();
      s.index = j.at("index").get<std::size_t>();
      const auto& toks = j.at("tokens");
      const auto& bios = j.at("bio");
      if (toks.size() != bios.size()) {
        throw ParseError("jsonl:" + std::to_string(line_no) +
                         ": tokens/bio length mismatch");
      }
      for (std::size_t i = 0; i < toks.size(); ++i) {
        Token t;
        t.text = toks[i].get<std::string>();
        t.tag = bios[i].get<std::string>();
        t.bio = bio_of(t.tag);
        s.tokens.push_back(std::move(t));
      }
      s.label = j.at("label").get<int>() == 1 ? Label::relevant
                                              : Label::irrelevant;

      if (current == nullptr || current->id != s.doc_id) {
        for (const auto& doc : corpus.documents) {
          if (doc.id == s.doc_id) {
            throw ParseError("jsonl:" + std::to_string(line_no) +
                             ": document '" + s.doc_id +
                             "' is not contiguous");
          }
        }
        corpus.documents.push_back(Document{s.doc_id, {}, true});
        current = &corpus.documents.back();
      }
      if (s.index != current->sentences.size()) {
        throw ParseError("jsonl:" + std::to_string(line_no) +
                         ": sentence index " + std::to_string(s.index) +
                         " out of order in document '" + s.doc_id + "'");
      }
      current->sentences.push_back(std::move(s));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("jsonl:" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return corpus;
}

}  // namespace threatlens
