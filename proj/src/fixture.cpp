#include "threatlens/fixture.hpp"

#include <algorithm>
#include <array>
#include <sstream>

#include "threatlens/hash.hpp"

namespace threatlens {

namespace {

// Relevant sentences describe behaviour; the verb span carries B/I tags.
// The "{ART}" slot receives one of the artifact strings below.
struct RelevantTemplate {
  const char* before;  // tokens before the verb span
  const char* verbs;   // tagged B-Action I-Action ...
  const char* after;   // tokens after, containing {ART}
};

const RelevantTemplate kRelevant[] = {
    {"The malware", "drops and executes", "{ART} on the infected host"},
    {"The backdoor", "injects code", "into {ART} during startup"},
    {"This trojan", "downloads the payload", "from {ART} and runs it"},
    {"The implant", "exfiltrates stolen documents", "to {ART} over smtp"},
    {"The sample", "modifies registry values", "and writes {ART} to disk"},
    {"The dropper", "spawns a hidden process", "using {ART} as cover"},
    {"The worm", "copies itself", "to {ART} on every reboot"},
    {"The loader", "decrypts the second stage", "stored in {ART} at runtime"},
};

const char* kIrrelevant[] = {
    "Once decoded the analysts identified the payload family",
    "Researchers at the lab published a detailed report last week",
    "The vendor released an advisory describing the campaign timeline",
    "Security teams from several companies reviewed the findings",
    "The conference talk summarized the incident response process",
    "A spokesperson declined to comment on the attribution claims",
    "The appendix lists the affected industries and regions",
    "Journalists covered the breach after the disclosure deadline",
    "The report thanks the community for sharing telemetry data",
    "An earlier version of this document contained a typo",
    "The timeline section was compiled from public sources",
    "Several customers asked about the scope of the investigation",
};

const char* kArtifacts[] = {
    "copy.exe",
    "update.exe",
    "0x20000001",
    "0x7ffe0300",
    "TrojanDropper.Win32.Agent.life",
    "Backdoor.MSIL.Crypt.gen",
    "notes.bat",
    "invoice.doc",
    "C:\\Windows\\system32\\drv.dll",
    "/tmp/payload/stage2.bin",
    "192.168.0.1",
    "10.0.14.77",
};

std::vector<Token> tag_tokens(const std::string& text, const std::string& tag_prefix) {
  std::vector<Token> tokens;
  std::istringstream in(text);
  std::string word;
  bool first = true;
  while (in >> word) {
    Token t;
    t.text = word;
    if (tag_prefix.empty()) {
      t.bio = Bio::O;
      t.tag = "O";
    } else {
      t.bio = first ? Bio::B : Bio::I;
      t.tag = (first ? "B-" : "I-") + tag_prefix;
      first = false;
    }
    tokens.push_back(std::move(t));
  }
  return tokens;
}

std::string replace_slot(std::string text, const std::string& artifact) {
  const std::size_t pos = text.find("{ART}");
  if (pos != std::string::npos) text.replace(pos, 5, artifact);
  return text;
}

Sentence make_relevant(Rng& rng, const std::string& doc_id, std::size_t index) {
  const auto& tpl = kRelevant[rng.bounded(std::size(kRelevant))];
  const std::string artifact = kArtifacts[rng.bounded(std::size(kArtifacts))];

  Sentence s;
  s.doc_id = doc_id;
  s.index = index;
  s.label = Label::relevant;
  for (auto& t : tag_tokens(tpl.before, "")) s.tokens.push_back(std::move(t));
  for (auto& t : tag_tokens(tpl.verbs, "Action")) s.tokens.push_back(std::move(t));
  for (auto& t : tag_tokens(replace_slot(tpl.after, artifact), "")) {
    s.tokens.push_back(std::move(t));
  }
  return s;
}

Sentence make_irrelevant(Rng& rng, const std::string& doc_id,
                         std::size_t index) {
  Sentence s;
  s.doc_id = doc_id;
  s.index = index;
  s.label = Label::irrelevant;
  s.tokens = tag_tokens(kIrrelevant[rng.bounded(std::size(kIrrelevant))], "");
  return s;
}

}  // namespace

Corpus make_fixture_corpus(Split split, const FixtureSpec& spec) {
  Rng rng(derive_seed(spec.seed, std::string("fixture-") + split_name(split)));

  Corpus corpus;
  corpus.split = split;
  for (std::size_t d = 0; d < spec.n_docs; ++d) {
    Document doc;
    char id[32];
    std::snprintf(id, sizeof(id), "%s_%02zu", split_name(split), d);
    doc.id = id;

    // distinct relevant positions within the document
    std::vector<std::size_t> positions(spec.sentences_per_doc);
    for (std::size_t i = 0; i < positions.size(); ++i) positions[i] = i;
    rng.shuffle(positions);
    std::vector<bool> is_relevant(spec.sentences_per_doc, false);
    for (std::size_t i = 0; i < spec.relevant_per_doc && i < positions.size();
         ++i) {
      is_relevant[positions[i]] = true;
    }

    for (std::size_t i = 0; i < spec.sentences_per_doc; ++i) {
      doc.sentences.push_back(is_relevant[i]
                                  ? make_relevant(rng, doc.id, i)
                                  : make_irrelevant(rng, doc.id, i));
    }
    corpus.documents.push_back(std::move(doc));
  }
  return corpus;
}

Sentence random_fixture_sentence(Rng& rng, const std::string& doc_id,
                                 std::size_t index) {
  static const char* kPool[] = {
      "the",       "backdoor",   "copy.exe",    "192.168.0.1", "999.1.1.1",
      "0x20000001", "0xZZ",      "report,",     "files!",      "42",
      "..",         "(",         ")",           "C:\\a\\b.exe", "a/b/c",
      "файл",       "заражен",   "Trojan.Win32.Agent", "x.y",  "update.bat",
      "7",          "---",       "[EXE]",       "word",        "0x12",
      "168",        ".",         "exe",         "doc.txt",     "систему"};
  static const char* kTags[] = {"O", "O", "O", "B-Action", "I-Action",
                                "B-Entity"};

  Sentence s;
  s.doc_id = doc_id;
  s.index = index;
  const std::size_t len = 1 + rng.bounded(12);
  for (std::size_t i = 0; i < len; ++i) {
    Token t;
    t.text = kPool[rng.bounded(std::size(kPool))];
    t.tag = kTags[rng.bounded(std::size(kTags))];
    t.bio = bio_of(t.tag);
    s.tokens.push_back(std::move(t));
  }
  s.label = derive_sentence_label(s.tokens);
  return s;
}

std::vector<Sentence> lm_toy_corpus() {
  static const char* kWords[] = {
      "alpha",  "bravo",  "charlie", "delta",  "echo",   "foxtrot", "golf",
      "hotel",  "india",  "juliet",  "kilo",   "lima",   "mike",    "november",
      "oscar",  "papa",   "quebec",  "romeo",  "sierra", "tango",   "uniform",
      "victor", "whiskey", "xray",   "yankee"};

  std::vector<Sentence> corpus;
  for (std::size_t i = 0; i < 50; ++i) {
    Sentence s;
    s.doc_id = "lm_toy";
    s.index = i;
    s.label = Label::irrelevant;
    const char* word = kWords[i % std::size(kWords)];
    for (std::size_t t = 0; t < 8; ++t) {
      s.tokens.push_back(Token{word, Bio::O, "O"});
    }
    corpus.push_back(std::move(s));
  }
  return corpus;
}

}  // namespace threatlens
