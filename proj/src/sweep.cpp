#include "threatlens/sweep.hpp"

#include <cstdio>
#include <sstream>
#include <thread>

#include "threatlens/errors.hpp"
#include "threatlens/features.hpp"
#include "threatlens/hash.hpp"
#include "threatlens/linear.hpp"
#include "threatlens/pipeline.hpp"
#include "threatlens/vocab.hpp"

namespace threatlens {

const char* model_kind_name(ModelKind kind) {
  return kind == ModelKind::linear ? "linear" : "transformer";
}

AnyModel fit_model(const std::vector<Sentence>& train_sentences,
                   const ClassWeights& weights, const FitSpec& spec,
                   const std::vector<Sentence>* lm_corpus) {
  if (spec.model == ModelKind::linear) {
    std::vector<SparseFeatures> features;
    std::vector<int> labels;
    features.reserve(train_sentences.size());
    for (const auto& s : train_sentences) {
      features.push_back(featurize_hashed(s.tokens, spec.feature_dim));
      labels.push_back(s.label == Label::relevant ? 1 : 0);
    }
    return train_linear(features, labels, weights, spec.train).model;
  }

  // Vocabulary comes from the (unresampled) LM corpus when staged training
  // runs, else from the training sentences themselves.
  Corpus vocab_corpus;
  Document vdoc;
  vdoc.id = "_vocab";
  vdoc.sentences = lm_corpus != nullptr && spec.run_lm_stages
                       ? *lm_corpus
                       : train_sentences;
  vocab_corpus.documents.push_back(std::move(vdoc));
  Vocab vocab = Vocab::build(vocab_corpus, spec.vocab_min_freq);

  TinyTransformer model(spec.transformer, std::move(vocab), spec.train.seed);
  TrainConfig cls_cfg = spec.train;
  if (spec.run_lm_stages) {
    const std::vector<Sentence>& lm_data =
        lm_corpus != nullptr ? *lm_corpus : train_sentences;
    pretrain_lm(model, lm_data, spec.lm_train);
    TrainConfig stage2 = spec.lm_train;
    stage2.learning_rate = spec.lm_train.learning_rate * 0.5;
    finetune_lm(model, train_sentences, stage2);
  } else {
    cls_cfg.allow_stage_skip = true;
  }
  finetune_classifier(model, train_sentences, weights, cls_cfg);
  return model;
}

namespace {

SweepRow run_row(const Corpus& train, const Corpus& dev, const SweepSpec& spec,
                 SamplingMode mode, std::uint64_t r_min, std::uint64_t r_maj) {
  SweepRow row;
  row.mode = mode;
  const bool has_ratio =
      mode == SamplingMode::undersample || mode == SamplingMode::oversample;
  row.ratio = has_ratio
                  ? std::to_string(r_min) + ":" + std::to_string(r_maj)
                  : "-";
  row.epochs = spec.fit.train.epochs;

  try {
    SamplingConfig scfg;
    scfg.mode = mode;
    scfg.ratio_minority = r_min;
    scfg.ratio_majority = r_maj;
    scfg.ratio_is_duplication_factor = spec.ratio_is_duplication_factor;
    scfg.seed = derive_seed(
        spec.seed, std::string("sweep:") + sampling_mode_name(mode) + ":" +
                       row.ratio);

    const std::vector<Sentence> train_sentences = flatten(train);
    const ResampleResult resampled = resample(train_sentences, scfg);

    ClassWeights weights{1.0, 1.0};
    if (mode == SamplingMode::class_weights) {
      const CorpusStats st = corpus_stats(train);
      weights = class_weights(st.n_relevant, st.n_irrelevant);
    }

    FitSpec fit = spec.fit;
    fit.train.seed = scfg.seed;
    const std::vector<Sentence>* lm = &train_sentences;
    const AnyModel model = fit_model(resampled.sentences, weights, fit, lm);

    const EvalResult eval =
        evaluate_model(model, dev, fit.threshold, fit.norm);
    row.metrics = eval.m;
    row.cm = eval.cm;
  } catch (const std::exception& e) {
    row.failed = true;
    row.error = e.what();
  }
  return row;
}

}  // namespace

std::vector<SweepRow> run_sweep(const Corpus& train_raw, const Corpus& dev_raw,
                                const SweepSpec& spec) {
  // Normalize once up front (idempotent if the caller already did).
  const Corpus train = normalize_corpus(train_raw, spec.fit.norm).first;
  const Corpus dev = normalize_corpus(dev_raw, spec.fit.norm).first;

  struct Task {
    SamplingMode mode;
    std::uint64_t r_min, r_maj;
  };
  std::vector<Task> tasks;
  for (SamplingMode mode : spec.modes) {
    if (mode == SamplingMode::undersample || mode == SamplingMode::oversample) {
      for (const auto& [r_min, r_maj] : spec.ratios) {
        tasks.push_back({mode, r_min, r_maj});
      }
    } else {
      tasks.push_back({mode, 1, 1});  // ratio-free, exactly once
    }
  }

  std::vector<SweepRow> rows(tasks.size());
  const std::size_t jobs = std::max<std::size_t>(1, spec.jobs);
  if (jobs == 1) {
    for (std::size_t i = 0; i < tasks.size(); ++i) {
      rows[i] = run_row(train, dev, spec, tasks[i].mode, tasks[i].r_min,
                        tasks[i].r_maj);
    }
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < jobs; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t i = w; i < tasks.size(); i += jobs) {
          rows[i] = run_row(train, dev, spec, tasks[i].mode, tasks[i].r_min,
                            tasks[i].r_maj);
        }
      });
    }
    for (auto& t : pool) t.join();
  }
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  out << "ratio,mode,precision,recall,f1\n";
  char buf[64];
  for (const auto& row : rows) {
    out << row.ratio << ',' << sampling_mode_name(row.mode) << ',';
    if (row.failed) {
      out << ",,";
    } else {
      std::snprintf(buf, sizeof(buf), "%.6f,%.6f,%.6f", row.metrics.precision,
                    row.metrics.recall, row.metrics.f1);
      out << buf;
    }
    out << '\n';
  }
  return out.str();
}

std::vector<ReportRow> sweep_report_rows(const std::vector<SweepRow>& rows,
                                         const std::string& model_name) {
  std::vector<ReportRow> out;
  out.reserve(rows.size());
  for (const auto& row : rows) {
    ReportRow r;
    r.model = model_name;
    r.remarks = std::string(sampling_mode_name(row.mode)) +
                (row.ratio == "-" ? "" : " " + row.ratio);
    r.epochs = std::to_string(row.epochs);
    r.failed = row.failed;
    r.metrics = row.metrics;
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace threatlens
