#include "threatlens/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "threatlens/errors.hpp"

namespace threatlens {

ConfusionMatrix confusion(const std::vector<int>& predictions,
                          const std::vector<int>& gold) {
  if (predictions.size() != gold.size()) {
    throw ValidationError("confusion: got " +
                          std::to_string(predictions.size()) +
                          " predictions for " + std::to_string(gold.size()) +
                          " gold labels");
  }
  if (predictions.empty()) {
    throw ValidationError("confusion: empty input");
  }
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const bool p = predictions[i] == 1;
    const bool g = gold[i] == 1;
    if (p && g) {
      ++cm.tp;
    } else if (p && !g) {
      ++cm.fp;
    } else if (!p && g) {
      ++cm.fn;
    } else {
      ++cm.tn;
    }
  }
  return cm;
}

Metrics metrics(const ConfusionMatrix& cm) {
  Metrics m;
  const double tp = static_cast<double>(cm.tp);
  if (cm.tp + cm.fp > 0) m.precision = tp / static_cast<double>(cm.tp + cm.fp);
  if (cm.tp + cm.fn > 0) m.recall = tp / static_cast<double>(cm.tp + cm.fn);
  if (m.precision + m.recall > 0.0) {
    m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
  }
  return m;
}

std::string format_metric(double value) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", value);
  return buf;
}

namespace {

std::vector<std::string> row_cells(const ReportRow& r) {
  if (r.failed) {
    return {r.model, r.remarks, r.epochs, "—", "—", "—"};
  }
  return {r.model,
          r.remarks,
          r.epochs,
          format_metric(r.metrics.precision),
          format_metric(r.metrics.recall),
          format_metric(r.metrics.f1)};
}

}  // namespace

std::string format_report(const std::vector<ReportRow>& rows) {
  const std::vector<std::string> header = {"Model",     "Remarks", "Epochs",
                                           "Precision", "Recall",  "F1"};
  std::vector<std::vector<std::string>> cells = {header};
  for (const auto& r : rows) cells.push_back(row_cells(r));

  std::vector<std::size_t> widths(header.size(), 0);
  for (const auto& row : cells) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      // the em-dash is 3 bytes but 1 column
      const std::size_t display =
          row[c] == "—" ? 1 : row[c].size();
      widths[c] = std::max(widths[c], display);
    }
  }

  std::ostringstream out;
  for (std::size_t ri = 0; ri < cells.size(); ++ri) {
    const auto& row = cells[ri];
    for (std::size_t c = 0; c < row.size(); ++c) {
      const std::size_t display = row[c] == "—" ? 1 : row[c].size();
      out << row[c] << std::string(widths[c] - display + 2, ' ');
    }
    out << '\n';
    if (ri == 0) {
      std::size_t total = 0;
      for (std::size_t w : widths) total += w + 2;
      out << std::string(total, '-') << '\n';
    }
  }
  return out.str();
}

std::string report_csv(const std::vector<ReportRow>& rows) {
  std::ostringstream out;
  out << "model,remarks,epochs,precision,recall,f1\n";
  for (const auto& r : rows) {
    out << r.model << ',' << r.remarks << ',' << r.epochs << ',';
    if (r.failed) {
      out << ",,";
    } else {
      out << format_metric(r.metrics.precision) << ','
          << format_metric(r.metrics.recall) << ','
          << format_metric(r.metrics.f1);
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace threatlens
