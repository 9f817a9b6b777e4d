#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace threatlens {

// Positive class = relevant (1).
struct ConfusionMatrix {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  std::uint64_t tn = 0;

  std::uint64_t total() const { return tp + fp + fn + tn; }
  bool operator==(const ConfusionMatrix&) const = default;
};

ConfusionMatrix confusion(const std::vector<int>& predictions,
                          const std::vector<int>& gold);

struct Metrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// precision = TP/(TP+FP), recall = TP/(TP+FN), f1 = 2PR/(P+R). A zero
// denominator yields 0 for that metric, which keeps degenerate all-negative
// submissions scoreable.
Metrics metrics(const ConfusionMatrix& cm);

// Two decimals from full-precision internals ("0.5183" prints "0.52").
std::string format_metric(double value);

struct ReportRow {
  std::string model;
  std::string remarks;
  std::string epochs;
  bool failed = false;
  Metrics metrics{};
};

// Aligned table with columns Model/Remarks/Epochs/Precision/Recall/F1;
// failed rows print em-dashes in the metric columns.
std::string format_report(const std::vector<ReportRow>& rows);
std::string report_csv(const std::vector<ReportRow>& rows);

}  // namespace threatlens
