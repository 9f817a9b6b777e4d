// threatlens: sentence-level malware-behavior classification over APT
// threat reports. Subcommands wire the pipeline end to end: ingest ->
// normalize -> sample -> train -> evaluate, plus the sweep harness and the
// analyst-facing highlight rendering.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "threatlens/config.hpp"
#include "threatlens/corpus.hpp"
#include "threatlens/errors.hpp"
#include "threatlens/fixture.hpp"
#include "threatlens/io.hpp"
#include "threatlens/kernels.hpp"
#include "threatlens/metrics.hpp"
#include "threatlens/model_io.hpp"
#include "threatlens/normalize.hpp"
#include "threatlens/pipeline.hpp"
#include "threatlens/sampling.hpp"
#include "threatlens/sweep.hpp"
#include "threatlens/vocab.hpp"

namespace fs = std::filesystem;
using namespace threatlens;

namespace {

constexpr const char* kToolVersion = "threatlens 0.1.0";

// ---------------------------------------------------------------------- io

Corpus load_corpus_jsonl(const std::string& path, Split split) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read corpus '" + path + "'");
  return read_jsonl(in, split);
}

void save_corpus_jsonl(const Corpus& corpus, const std::string& path) {
  std::ostringstream out;
  write_jsonl(corpus, out);
  write_file(path, out.str());
}

nlohmann::json stats_json(const CorpusStats& st) {
  return nlohmann::json{{"documents", st.n_documents},
                        {"sentences", st.n_sentences},
                        {"relevant", st.n_relevant},
                        {"irrelevant", st.n_irrelevant}};
}

nlohmann::json metrics_json(const EvalResult& r, const std::string& split) {
  nlohmann::json j{{"precision", r.m.precision}, {"recall", r.m.recall},
                   {"f1", r.m.f1},               {"tp", r.cm.tp},
                   {"fp", r.cm.fp},              {"fn", r.cm.fn},
                   {"tn", r.cm.tn}};
  if (!split.empty()) j["split"] = split;
  return j;
}

// ------------------------------------------------------------------ config

// file < THREATLENS_SEED < explicit flags
KeyValues merged_config(
    const std::string& config_path,
    const std::vector<std::pair<std::string, std::string>>& flag_overrides) {
  KeyValues kv = config_path.empty() ? KeyValues::empty()
                                     : KeyValues::parse_file(config_path);
  if (const char* env = std::getenv("THREATLENS_SEED");
      env != nullptr && env[0] != '\0') {
    kv.set("seed", env);
  }
  for (const auto& [key, value] : flag_overrides) {
    if (!value.empty()) kv.set(key, value);
  }
  return kv;
}

// ------------------------------------------------------------------ ingest

Corpus ingest_directory(const std::string& dir, Split split, std::size_t jobs) {
  const std::vector<std::string> files = list_files(dir, ".tsv");
  if (files.empty()) {
    throw DataError("no .tsv files in '" + dir + "'");
  }

  std::vector<Document> documents(files.size());
  std::vector<std::string> errors(files.size());
  jobs = std::max<std::size_t>(1, jobs);

  auto parse_one = [&](std::size_t i) {
    try {
      const std::string stem = fs::path(files[i]).stem().string();
      documents[i] = parse_annotated_document(read_file(files[i]), stem);
    } catch (const std::exception& e) {
      errors[i] = std::string(e.what()) + " (file " + files[i] + ")";
    }
  };
  if (jobs == 1) {
    for (std::size_t i = 0; i < files.size(); ++i) parse_one(i);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < jobs; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t i = w; i < files.size(); i += jobs) parse_one(i);
      });
    }
    for (auto& t : pool) t.join();
  }
  for (const auto& err : errors) {
    if (!err.empty()) throw ParseError(err);
  }

  Corpus corpus;
  corpus.split = split;
  corpus.documents = std::move(documents);
  return corpus;
}

void check_expectations(const CorpusStats& st, const std::string& expect) {
  if (expect.empty()) return;
  std::istringstream in(expect);
  std::string part;
  while (std::getline(in, part, ',')) {
    const std::size_t eq = part.find('=');
    if (eq == std::string::npos) {
      throw ValidationError("--expect wants docs=N,sents=N, got '" + expect +
                            "'");
    }
    const std::string key = part.substr(0, eq);
    std::size_t want = 0;
    try {
      want = std::stoul(part.substr(eq + 1));
    } catch (const std::exception&) {
      throw ValidationError("--expect wants numeric values, got '" + part + "'");
    }
    std::size_t got = 0;
    if (key == "docs") {
      got = st.n_documents;
    } else if (key == "sents") {
      got = st.n_sentences;
    } else if (key == "relevant") {
      got = st.n_relevant;
    } else {
      throw ValidationError("--expect key must be docs|sents|relevant");
    }
    if (got != want) {
      throw DataError("expectation failed: " + key + "=" + std::to_string(got) +
                      ", wanted " + std::to_string(want));
    }
  }
}

NormalizeConfig rules_arg(const std::string& path) {
  if (path.empty()) return NormalizeConfig{};
  return normalize_config_from(KeyValues::parse_file(path));
}

Split split_arg(const std::string& name) {
  const auto split = split_from_name(name);
  if (!split) {
    throw ValidationError("--split must be train|dev|test, got '" + name + "'");
  }
  return *split;
}

// ------------------------------------------------------------------- train

struct TrainOutcome {
  AnyModel model;
  ClassWeights weights{1.0, 1.0};
  std::size_t train_sentences = 0;
  std::vector<std::string> notes;
};

TrainOutcome train_from_corpus(const Corpus& normalized_train,
                               const PipelineConfig& cfg,
                               const Corpus* lm_extra) {
  TrainOutcome outcome;

  std::vector<Sentence> sentences = flatten(normalized_train);
  const ResampleResult resampled = resample(sentences, cfg.sampling);
  if (resampled.clamped) {
    outcome.notes.push_back(
        "requested majority count exceeds the data; clamped");
  }

  if (cfg.sampling.mode == SamplingMode::class_weights) {
    const CorpusStats st = corpus_stats(normalized_train);
    outcome.weights = class_weights(st.n_relevant, st.n_irrelevant);
  }

  FitSpec fit;
  fit.model = cfg.model;
  fit.train = cfg.train;
  fit.transformer = cfg.transformer;
  fit.feature_dim = cfg.feature_dim;
  fit.vocab_min_freq = cfg.vocab_min_freq;
  fit.norm = cfg.norm;
  fit.threshold = cfg.threshold;
  fit.run_lm_stages = cfg.run_lm_stages;
  fit.lm_train = cfg.lm_train;
  fit.lm_train.seed = cfg.train.seed;

  std::vector<Sentence> lm_corpus;
  if (cfg.run_lm_stages) {
    if (lm_extra != nullptr) {
      lm_corpus = flatten(merge_corpora(normalized_train, *lm_extra));
    } else {
      lm_corpus = flatten(normalized_train);
    }
  }

  if (cfg.model == ModelKind::transformer && !cfg.run_lm_stages) {
    outcome.notes.push_back(
        "LM stages skipped; classifier trained from scratch "
        "(set train.run_lm_stages or pass --with-lm-stages)");
  }

  outcome.train_sentences = resampled.sentences.size();
  outcome.model = fit_model(resampled.sentences, outcome.weights, fit,
                            lm_corpus.empty() ? nullptr : &lm_corpus);
  return outcome;
}

// ---------------------------------------------------------------- manifest

class Manifest {
 public:
  explicit Manifest(std::uint64_t seed) {
    j_["schema_version"] = 1;
    j_["tool"] = kToolVersion;
    j_["kernels"] = kernels::isa_name();
    j_["seed"] = seed;
    j_["inputs"] = nlohmann::json::object();
    j_["outputs"] = nlohmann::json::object();
    j_["stages"] = nlohmann::json::array();
    j_["failed_stage"] = nullptr;
  }

  void add_input(const std::string& path) {
    j_["inputs"][path] = hash_file_hex(path);
  }
  void add_output(const std::string& path) {
    j_["outputs"][path] = hash_file_hex(path);
  }
  void stage_ok(const std::string& name) {
    j_["stages"].push_back({{"name", name}, {"status", "ok"}});
  }
  void stage_failed(const std::string& name, const std::string& error) {
    j_["stages"].push_back(
        {{"name", name}, {"status", "failed"}, {"error", error}});
    j_["failed_stage"] = name;
  }
  void save(const std::string& path) const {
    write_file(path, j_.dump(2) + "\n");
  }

 private:
  nlohmann::json j_;
};

// --------------------------------------------------------------- highlight

nlohmann::json highlight_json(const Document& doc,
                              const std::vector<double>& scores,
                              double threshold) {
  nlohmann::json sentences = nlohmann::json::array();
  for (std::size_t i = 0; i < doc.sentences.size(); ++i) {
    const Sentence& s = doc.sentences[i];
    nlohmann::json row{{"index", s.index},
                       {"text", s.text()},
                       {"score", scores[i]},
                       {"predicted", scores[i] >= threshold ? 1 : 0}};
    if (doc.has_annotations) {
      row["gold"] = s.label == Label::relevant ? 1 : 0;
    } else {
      row["gold"] = nullptr;
    }
    sentences.push_back(std::move(row));
  }
  return nlohmann::json{{"doc_id", doc.id}, {"sentences", sentences}};
}

std::string highlight_text(const Document& doc,
                           const std::vector<double>& scores,
                           double threshold) {
  std::ostringstream out;
  char score_buf[32];
  for (std::size_t i = 0; i < doc.sentences.size(); ++i) {
    const bool hit = scores[i] >= threshold;
    std::snprintf(score_buf, sizeof(score_buf), "%.3f", scores[i]);
    out << (hit ? "► " : "  ") << doc.sentences[i].text();
    if (hit) out << "  [" << score_buf << "]";
    out << '\n';
  }
  return out.str();
}

// ----------------------------------------------------------------- run-all

int cmd_run_all(const PipelineConfig& cfg, std::size_t jobs) {
  validate_paths(cfg);
  fs::create_directories(cfg.output_dir);
  const auto out_path = [&](const std::string& name) {
    return (fs::path(cfg.output_dir) / name).string();
  };

  Manifest manifest(cfg.train.seed);
  for (const auto& f : list_files(cfg.train_dir, ".tsv")) manifest.add_input(f);
  for (const auto& f : list_files(cfg.dev_dir, ".tsv")) manifest.add_input(f);
  if (!cfg.rules_path.empty()) manifest.add_input(cfg.rules_path);

  const std::string manifest_path = out_path("manifest.json");
  std::string stage = "ingest";
  try {
    const Corpus train = ingest_directory(cfg.train_dir, Split::train, jobs);
    const Corpus dev = ingest_directory(cfg.dev_dir, Split::dev, jobs);
    save_corpus_jsonl(train, out_path("corpus_train.jsonl"));
    save_corpus_jsonl(dev, out_path("corpus_dev.jsonl"));
    std::cout << "train: " << stats_json(corpus_stats(train)).dump() << "\n";
    std::cout << "dev:   " << stats_json(corpus_stats(dev)).dump() << "\n";
    manifest.stage_ok(stage);

    stage = "normalize";
    const auto [ntrain, train_summary] = normalize_corpus(train, cfg.norm);
    const auto [ndev, dev_summary] = normalize_corpus(dev, cfg.norm);
    save_corpus_jsonl(ntrain, out_path("normalized_train.jsonl"));
    save_corpus_jsonl(ndev, out_path("normalized_dev.jsonl"));
    write_file(out_path("normalize_summary.csv"), summary_csv(train_summary));
    manifest.stage_ok(stage);

    stage = "sample";
    const ResampleResult resampled = resample(flatten(ntrain), cfg.sampling);
    {
      Corpus sampled;
      sampled.split = Split::train;
      Document doc;
      doc.id = "_resampled";
      doc.sentences = resampled.sentences;
      for (std::size_t i = 0; i < doc.sentences.size(); ++i) {
        doc.sentences[i].doc_id = "_resampled";
        doc.sentences[i].index = i;
      }
      sampled.documents.push_back(std::move(doc));
      save_corpus_jsonl(sampled, out_path("sampled_train.jsonl"));
    }
    manifest.stage_ok(stage);

    stage = "train";
    const TrainOutcome outcome = train_from_corpus(ntrain, cfg, nullptr);
    const std::string model_path = out_path("model.tlm");
    std::visit([&](const auto& m) { save_model(m, model_path); },
               outcome.model);
    for (const auto& note : outcome.notes) {
      std::cerr << "note: " << note << "\n";
    }
    manifest.stage_ok(stage);

    stage = "evaluate";
    if (corpus_stats(ndev).n_relevant == 0) {
      throw DataError(
          "evaluation split has no relevant gold labels; refusing to score");
    }
    const EvalResult eval =
        evaluate_model(outcome.model, ndev, cfg.threshold, cfg.norm);
    write_file(out_path("metrics.json"),
               metrics_json(eval, "dev").dump(2) + "\n");

    ReportRow row;
    row.model = model_kind_name(cfg.model);
    row.remarks = sampling_mode_name(cfg.sampling.mode);
    if (cfg.sampling.mode == SamplingMode::undersample ||
        cfg.sampling.mode == SamplingMode::oversample) {
      row.remarks += " " + format_ratio(cfg.sampling);
    }
    row.epochs = std::to_string(cfg.train.epochs);
    row.metrics = eval.m;
    const std::string report = format_report({row});
    write_file(out_path("report.txt"), report);
    std::cout << report;
    manifest.stage_ok(stage);

    manifest.add_output(out_path("model.tlm"));
    manifest.add_output(out_path("metrics.json"));
    manifest.save(manifest_path);
  } catch (...) {
    manifest.stage_failed(stage, "see stderr");
    manifest.save(manifest_path);
    throw;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{std::string(kToolVersion) +
               " — malware-behavior sentence classification"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);

  // ---- fixture
  auto* c_fixture = app.add_subcommand(
      "fixture", "Write the bundled synthetic corpus as .tsv trees");
  std::string fx_out = "data/fixture";
  std::uint64_t fx_seed = 42;
  c_fixture->add_option("--out", fx_out, "Output directory");
  c_fixture->add_option("--seed", fx_seed, "Generator seed");

  // ---- ingest
  auto* c_ingest =
      app.add_subcommand("ingest", "Parse a directory of .tsv annotations");
  std::string in_dir, in_split = "train", in_out, in_gold, in_expect;
  std::size_t in_jobs = 1;
  c_ingest->add_option("--dir", in_dir, "Directory of <doc_id>.tsv files")
      ->required();
  c_ingest->add_option("--split", in_split, "train|dev|test");
  c_ingest->add_option("--out", in_out, "Corpus JSONL output path")->required();
  c_ingest->add_option("--gold", in_gold, "Gold-label override file");
  c_ingest->add_option("--expect", in_expect,
                       "Fail unless stats match, e.g. docs=65,sents=9424");
  c_ingest->add_option("--jobs", in_jobs, "Parallel file parsing");

  // ---- stats
  auto* c_stats = app.add_subcommand("stats", "Print corpus statistics");
  std::string st_corpus;
  c_stats->add_option("--corpus", st_corpus, "Corpus JSONL")->required();

  // ---- normalize
  auto* c_norm = app.add_subcommand(
      "normalize", "Apply artifact placeholders, stripping and filtering");
  std::string nm_corpus, nm_out, nm_summary, nm_rules, nm_split = "train";
  c_norm->add_option("--corpus", nm_corpus, "Corpus JSONL")->required();
  c_norm->add_option("--out", nm_out, "Normalized JSONL output")->required();
  c_norm->add_option("--summary", nm_summary, "Substitution-count CSV output");
  c_norm->add_option("--rules", nm_rules, "Normalization rules file");
  c_norm->add_option("--split", nm_split, "train|dev|test");

  // ---- train
  auto* c_train = app.add_subcommand("train", "Train a classifier");
  std::string tr_model = "linear", tr_train, tr_out = "model.tlm";
  std::string tr_config, tr_sampling, tr_ratio, tr_seed, tr_epochs, tr_lr;
  std::string tr_from, tr_optimizer;
  bool tr_skip_stages = false, tr_lm_stages = false, tr_dup_factor = false;
  c_train->add_option("--model", tr_model, "linear|transformer");
  c_train->add_option("--train", tr_train, "Training corpus JSONL")->required();
  c_train->add_option("--out", tr_out, "Model output path");
  c_train->add_option("--config", tr_config, "Config file");
  c_train->add_option("--sampling", tr_sampling, "none|under|over|weights");
  c_train->add_option("--ratio", tr_ratio,
                      "Target minority:majority, e.g. 1:2");
  c_train->add_flag("--ratio-is-duplication-factor", tr_dup_factor,
                    "Read the ratio as a plain duplication factor");
  c_train->add_option("--seed", tr_seed, "RNG seed");
  c_train->add_option("--epochs", tr_epochs, "Training epochs");
  c_train->add_option("--learning-rate", tr_lr, "Learning rate");
  c_train->add_option("--optimizer", tr_optimizer, "sgd|adam");
  c_train->add_option("--from", tr_from,
                      "Continue from a stage-2 transformer model file");
  c_train->add_flag("--skip-stages", tr_skip_stages,
                    "Train the transformer classifier without LM stages");
  c_train->add_flag("--with-lm-stages", tr_lm_stages,
                    "Run LM stages 1-2 before the classifier stage");

  // ---- pretrain
  auto* c_pre = app.add_subcommand("pretrain", "Masked-LM stages 1 and 2");
  int pre_stage = 1;
  std::string pre_corpus, pre_extra, pre_from, pre_out = "model.tlm";
  std::string pre_config, pre_seed, pre_epochs, pre_lr, pre_optimizer;
  c_pre->add_option("--stage", pre_stage, "1|2")->required();
  c_pre->add_option("--corpus", pre_corpus, "Task corpus JSONL")->required();
  c_pre->add_option("--extra", pre_extra,
                    "Extra LM corpus JSONL merged in (stage 1)");
  c_pre->add_option("--from", pre_from, "Model to continue from");
  c_pre->add_option("--out", pre_out, "Model output path");
  c_pre->add_option("--config", pre_config, "Config file");
  c_pre->add_option("--seed", pre_seed, "RNG seed");
  c_pre->add_option("--epochs", pre_epochs, "Epochs (default 30)");
  c_pre->add_option("--learning-rate", pre_lr, "Learning rate");
  c_pre->add_option("--optimizer", pre_optimizer, "sgd|adam");

  // ---- predict
  auto* c_pred = app.add_subcommand(
      "predict", "Score a corpus, appending a score field per sentence");
  std::string pd_model, pd_corpus, pd_out = "scored.jsonl", pd_rules;
  c_pred->add_option("--model", pd_model, "Model file")->required();
  c_pred->add_option("--corpus", pd_corpus, "Corpus JSONL")->required();
  c_pred->add_option("--out", pd_out, "Scored JSONL output path");
  c_pred->add_option("--rules", pd_rules, "Normalization rules file");

  // ---- evaluate
  auto* c_eval = app.add_subcommand("evaluate", "Score a corpus and report");
  std::string ev_model, ev_corpus, ev_out = "metrics.json", ev_split = "dev";
  std::string ev_rules;
  double ev_threshold = 0.5;
  c_eval->add_option("--model", ev_model, "Model file")->required();
  c_eval->add_option("--corpus", ev_corpus, "Corpus JSONL")->required();
  c_eval->add_option("--out", ev_out, "metrics.json output path");
  c_eval->add_option("--threshold", ev_threshold, "Decision threshold");
  c_eval->add_option("--split", ev_split, "Split name recorded in the output");
  c_eval->add_option("--rules", ev_rules, "Normalization rules file");

  // ---- sweep
  auto* c_sweep =
      app.add_subcommand("sweep", "Sampling-ratio sweep over (mode, ratio)");
  std::string sw_train, sw_dev, sw_modes = "over,under";
  std::string sw_ratios = "1:1,1:2,1:5,1:10", sw_out = "sweep.csv";
  std::string sw_model = "linear", sw_config, sw_seed, sw_epochs, sw_lr;
  std::string sw_optimizer;
  std::size_t sw_jobs = 1;
  c_sweep->add_option("--train", sw_train, "Training corpus JSONL")->required();
  c_sweep->add_option("--dev", sw_dev, "Dev corpus JSONL")->required();
  c_sweep->add_option("--modes", sw_modes,
                      "Comma list of none|under|over|weights");
  c_sweep->add_option("--ratios", sw_ratios, "Comma list like 1:1,1:2");
  c_sweep->add_option("--out", sw_out, "CSV output path");
  c_sweep->add_option("--model", sw_model, "linear|transformer");
  c_sweep->add_option("--config", sw_config, "Config file");
  c_sweep->add_option("--seed", sw_seed, "RNG seed");
  c_sweep->add_option("--epochs", sw_epochs, "Training epochs per row");
  c_sweep->add_option("--learning-rate", sw_lr, "Learning rate per row");
  c_sweep->add_option("--optimizer", sw_optimizer, "sgd|adam");
  c_sweep->add_option("--jobs", sw_jobs, "Parallel sweep rows");

  // ---- highlight
  auto* c_hl = app.add_subcommand(
      "highlight", "Render a report with relevant sentences accentuated");
  std::string hl_model, hl_doc, hl_json, hl_text_path, hl_rules;
  double hl_threshold = 0.5;
  c_hl->add_option("--model", hl_model, "Model file")->required();
  c_hl->add_option("--doc", hl_doc, "Report .tsv file")->required();
  c_hl->add_option("--out", hl_json, "JSON output path");
  c_hl->add_option("--text", hl_text_path, "Plain-text output path");
  c_hl->add_option("--threshold", hl_threshold, "Decision threshold");
  c_hl->add_option("--rules", hl_rules, "Normalization rules file");

  // ---- run-all
  auto* c_all = app.add_subcommand("run-all", "Full pipeline from a config");
  std::string ra_config, ra_seed, ra_model, ra_sampling, ra_ratio, ra_outdir;
  std::size_t ra_jobs = 1;
  c_all->add_option("--config", ra_config, "Pipeline config file")->required();
  c_all->add_option("--seed", ra_seed, "RNG seed override");
  c_all->add_option("--model", ra_model, "Model override");
  c_all->add_option("--sampling", ra_sampling, "Sampling mode override");
  c_all->add_option("--ratio", ra_ratio, "Sampling ratio override");
  c_all->add_option("--out-dir", ra_outdir, "Output directory override");
  c_all->add_option("--jobs", ra_jobs, "Parallelism bound");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return ValidationError::exit_code;
  }

  try {
    if (app.got_subcommand(c_fixture)) {
      FixtureSpec spec;
      spec.seed = fx_seed;
      const Corpus train = make_fixture_corpus(Split::train, spec);
      FixtureSpec dev_spec;
      dev_spec.seed = fx_seed;
      dev_spec.n_docs = 3;
      const Corpus dev = make_fixture_corpus(Split::dev, dev_spec);
      for (const Corpus* corpus : {&train, &dev}) {
        for (const auto& doc : corpus->documents) {
          const fs::path path = fs::path(fx_out) / split_name(corpus->split) /
                                (doc.id + ".tsv");
          write_file(path.string(), serialize_document(doc));
        }
      }
      std::cout << "fixture written to " << fx_out << "\n";
      std::cout << "train: " << stats_json(corpus_stats(train)).dump() << "\n";
      std::cout << "dev:   " << stats_json(corpus_stats(dev)).dump() << "\n";
      return 0;
    }

    if (app.got_subcommand(c_ingest)) {
      Corpus corpus = ingest_directory(in_dir, split_arg(in_split), in_jobs);
      if (!in_gold.empty()) {
        std::istringstream gold_in(read_file(in_gold));
        apply_gold_labels(corpus, parse_gold_labels(gold_in));
      }
      const CorpusStats st = corpus_stats(corpus);
      save_corpus_jsonl(corpus, in_out);
      std::cout << stats_json(st).dump(2) << "\n";
      check_expectations(st, in_expect);
      return 0;
    }

    if (app.got_subcommand(c_stats)) {
      const Corpus corpus = load_corpus_jsonl(st_corpus, Split::train);
      std::cout << stats_json(corpus_stats(corpus)).dump(2) << "\n";
      return 0;
    }

    if (app.got_subcommand(c_norm)) {
      const Corpus corpus = load_corpus_jsonl(nm_corpus, split_arg(nm_split));
      const auto [normalized, summary] =
          normalize_corpus(corpus, rules_arg(nm_rules));
      save_corpus_jsonl(normalized, nm_out);
      if (!nm_summary.empty()) write_file(nm_summary, summary_csv(summary));
      std::cout << stats_json(corpus_stats(normalized)).dump(2) << "\n";
      return 0;
    }

    if (app.got_subcommand(c_train)) {
      KeyValues kv = merged_config(
          tr_config,
          {{"model", tr_model},
           {"sampling.mode", tr_sampling},
           {"sampling.ratio", tr_ratio},
           {"seed", tr_seed},
           {"train.epochs", tr_epochs},
           {"train.learning_rate", tr_lr},
           {"train.optimizer", tr_optimizer},
           {"sampling.duplication_factor", tr_dup_factor ? "true" : ""},
           {"train.run_lm_stages", tr_lm_stages ? "true" : ""}});
      PipelineConfig cfg = pipeline_config_from(kv);

      const Corpus raw = load_corpus_jsonl(tr_train, Split::train);
      const Corpus normalized = normalize_corpus(raw, cfg.norm).first;

      if (!tr_from.empty()) {
        TinyTransformer model = load_transformer_model(tr_from);
        const std::vector<Sentence> sentences =
            resample(flatten(normalized), cfg.sampling).sentences;
        ClassWeights weights{1.0, 1.0};
        if (cfg.sampling.mode == SamplingMode::class_weights) {
          const CorpusStats st = corpus_stats(normalized);
          weights = class_weights(st.n_relevant, st.n_irrelevant);
        }
        TrainConfig tc = cfg.train;
        tc.allow_stage_skip = tr_skip_stages;
        const TrainLog log =
            finetune_classifier(model, sentences, weights, tc);
        for (const auto& note : log.notes) {
          std::cerr << "note: " << note << "\n";
        }
        save_model(model, tr_out);
        std::cout << "model written to " << tr_out << "\n";
        return 0;
      }

      if (tr_skip_stages) cfg.run_lm_stages = false;
      const TrainOutcome outcome = train_from_corpus(normalized, cfg, nullptr);
      for (const auto& note : outcome.notes) {
        std::cerr << "note: " << note << "\n";
      }
      std::visit([&](const auto& m) { save_model(m, tr_out); }, outcome.model);
      std::cout << "model written to " << tr_out << " ("
                << outcome.train_sentences << " training sentences)\n";
      return 0;
    }

    if (app.got_subcommand(c_pre)) {
      KeyValues kv = merged_config(pre_config,
                                   {{"seed", pre_seed},
                                    {"lm.epochs", pre_epochs},
                                    {"lm.learning_rate", pre_lr},
                                    {"lm.optimizer", pre_optimizer}});
      PipelineConfig cfg = pipeline_config_from(kv);

      const Corpus task_raw = load_corpus_jsonl(pre_corpus, Split::train);
      const Corpus task = normalize_corpus(task_raw, cfg.norm).first;

      TrainLog log;
      TinyTransformer model = [&]() -> TinyTransformer {
        if (pre_stage == 1) {
          Corpus lm = task;
          if (!pre_extra.empty()) {
            const Corpus extra_raw = load_corpus_jsonl(pre_extra, Split::train);
            lm = merge_corpora(task,
                               normalize_corpus(extra_raw, cfg.norm).first);
            std::cout << "merged LM corpus: "
                      << stats_json(corpus_stats(lm)).dump() << "\n";
          }
          TinyTransformer m =
              pre_from.empty()
                  ? TinyTransformer(cfg.transformer,
                                    Vocab::build(lm, cfg.vocab_min_freq),
                                    cfg.train.seed)
                  : load_transformer_model(pre_from);
          TrainConfig tc = cfg.lm_train;
          tc.seed = cfg.train.seed;
          log = pretrain_lm(m, flatten(lm), tc);
          return m;
        }
        if (pre_stage != 2) {
          throw ValidationError("--stage must be 1 or 2");
        }
        if (pre_from.empty()) {
          throw ValidationError("--stage 2 requires --from <stage-1 model>");
        }
        TinyTransformer m = load_transformer_model(pre_from);
        TrainConfig tc = cfg.lm_train;
        tc.seed = cfg.train.seed;
        if (pre_lr.empty() && !kv.has("lm.learning_rate")) {
          tc.learning_rate *= 0.5;  // stage 2 defaults below stage 1
        }
        log = finetune_lm(m, flatten(task), tc);
        return m;
      }();

      for (std::size_t e = 0; e < log.epoch_losses.size(); ++e) {
        std::cout << "epoch " << e + 1 << " loss " << log.epoch_losses[e]
                  << "\n";
      }
      save_model(model, pre_out);
      std::cout << "model written to " << pre_out << " (stage "
                << model.stage() << ")\n";
      return 0;
    }

    if (app.got_subcommand(c_pred)) {
      const AnyModel model = load_any_model(pd_model);
      const Corpus corpus = load_corpus_jsonl(pd_corpus, Split::test);
      const NormalizeConfig rules = rules_arg(pd_rules);
      std::ostringstream out;
      for (const auto& doc : corpus.documents) {
        const std::vector<double> scores =
            score_sentences(model, doc.sentences, rules);
        for (std::size_t i = 0; i < doc.sentences.size(); ++i) {
          const Sentence& sen = doc.sentences[i];
          nlohmann::json j;
          j["doc_id"] = doc.id;
          j["index"] = sen.index;
          auto& toks = j["tokens"] = nlohmann::json::array();
          auto& bios = j["bio"] = nlohmann::json::array();
          for (const auto& t : sen.tokens) {
            toks.push_back(t.text);
            bios.push_back(t.tag);
          }
          j["label"] = sen.label == Label::relevant ? 1 : 0;
          j["score"] = scores[i];
          out << j.dump() << '\n';
        }
      }
      write_file(pd_out, out.str());
      std::cout << "scores written to " << pd_out << "\n";
      return 0;
    }

    if (app.got_subcommand(c_eval)) {
      const AnyModel model = load_any_model(ev_model);
      const Corpus corpus = load_corpus_jsonl(ev_corpus, split_arg(ev_split));
      const CorpusStats st = corpus_stats(corpus);
      if (st.n_sentences == 0) {
        throw DataError("evaluation corpus is empty");
      }
      if (st.n_relevant == 0) {
        throw DataError(
            "evaluation corpus has no relevant gold labels; refusing to "
            "score what looks like an unannotated split");
      }
      const EvalResult r =
          evaluate_model(model, corpus, ev_threshold, rules_arg(ev_rules));
      write_file(ev_out, metrics_json(r, ev_split).dump(2) + "\n");
      std::cout << metrics_json(r, ev_split).dump(2) << "\n";
      return 0;
    }

    if (app.got_subcommand(c_sweep)) {
      KeyValues kv = merged_config(sw_config,
                                   {{"model", sw_model},
                                    {"seed", sw_seed},
                                    {"train.epochs", sw_epochs},
                                    {"train.learning_rate", sw_lr},
                                    {"train.optimizer", sw_optimizer}});
      const PipelineConfig cfg = pipeline_config_from(kv);

      SweepSpec spec;
      {
        std::istringstream in(sw_modes);
        std::string item;
        while (std::getline(in, item, ',')) {
          const auto mode = sampling_mode_from_name(item);
          if (!mode) {
            throw ValidationError("unknown sampling mode '" + item + "'");
          }
          spec.modes.push_back(*mode);
        }
      }
      {
        std::istringstream in(sw_ratios);
        std::string item;
        while (std::getline(in, item, ',')) {
          spec.ratios.push_back(parse_ratio(item));
        }
      }
      spec.fit.model = cfg.model;
      spec.fit.train = cfg.train;
      spec.fit.transformer = cfg.transformer;
      spec.fit.feature_dim = cfg.feature_dim;
      spec.fit.vocab_min_freq = cfg.vocab_min_freq;
      spec.fit.norm = cfg.norm;
      spec.fit.threshold = cfg.threshold;
      spec.seed = cfg.train.seed;
      spec.ratio_is_duplication_factor =
          cfg.sampling.ratio_is_duplication_factor;
      spec.jobs = sw_jobs;

      const Corpus train = load_corpus_jsonl(sw_train, Split::train);
      const Corpus dev = load_corpus_jsonl(sw_dev, Split::dev);
      const auto rows = run_sweep(train, dev, spec);

      write_file(sw_out, sweep_csv(rows));
      std::cout << format_report(
          sweep_report_rows(rows, model_kind_name(cfg.model)));
      for (const auto& row : rows) {
        if (row.failed) {
          std::cerr << "row " << sampling_mode_name(row.mode) << " "
                    << row.ratio << " failed: " << row.error << "\n";
        }
      }
      std::cout << "sweep written to " << sw_out << "\n";
      return 0;
    }

    if (app.got_subcommand(c_hl)) {
      const AnyModel model = load_any_model(hl_model);
      const std::string stem = fs::path(hl_doc).stem().string();
      const Document doc = parse_annotated_document(read_file(hl_doc), stem);
      const std::vector<double> scores =
          score_sentences(model, doc.sentences, rules_arg(hl_rules));
      const std::string text = highlight_text(doc, scores, hl_threshold);
      std::cout << text;
      if (!hl_text_path.empty()) write_file(hl_text_path, text);
      if (!hl_json.empty()) {
        write_file(hl_json,
                   highlight_json(doc, scores, hl_threshold).dump(2) + "\n");
      }
      return 0;
    }

    if (app.got_subcommand(c_all)) {
      KeyValues kv = merged_config(ra_config, {{"seed", ra_seed},
                                               {"model", ra_model},
                                               {"sampling.mode", ra_sampling},
                                               {"sampling.ratio", ra_ratio},
                                               {"output_dir", ra_outdir}});
      return cmd_run_all(pipeline_config_from(kv), ra_jobs);
    }
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return ValidationError::exit_code;
  } catch (const DivergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return DivergenceError::exit_code;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return DataError::exit_code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return DataError::exit_code;
  }
  return 0;
}
