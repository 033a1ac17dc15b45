#include "corex/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

namespace corex {

namespace {

double entropy_from_counts(const std::map<std::vector<int>, std::size_t>& counts, std::size_t n) {
  double total = static_cast<double>(n);
  double h = 0.0;
  for (const auto& [key, c] : counts) {
    double p = static_cast<double>(c) / total;
    h -= p * std::log(p);
  }
  return h;
}

nlohmann::json optional_number(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

nlohmann::json macro_to_json(const MacroAverage& m, std::span<const LabelMetrics> rows) {
  nlohmann::json excluded = nlohmann::json::array();
  for (auto k : m.excluded) excluded.push_back(rows[k].label);
  return {{"mean", m.mean}, {"included", m.included}, {"excluded", excluded}};
}

nlohmann::json rows_to_json(std::span<const LabelMetrics> rows) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : rows) {
    arr.push_back({{"label", r.label},
                   {"factor", r.factor ? nlohmann::json(*r.factor) : nlohmann::json(nullptr)},
                   {"support", r.support},
                   {"precision", r.scores.precision},
                   {"recall", r.scores.recall},
                   {"f1", r.scores.f1},
                   {"auc", optional_number(r.auc)}});
  }
  return arr;
}

LabelMetrics score_label(const std::string& name, std::span<const double> scores, std::span<const int> truth,
                         double threshold) {
  LabelMetrics row;
  row.label = name;
  row.support = static_cast<std::size_t>(std::count(truth.begin(), truth.end(), 1));
  std::vector<int> pred(scores.size());
  for (std::size_t l = 0; l < scores.size(); ++l) pred[l] = scores[l] >= threshold ? 1 : 0;
  row.scores = f1(pred, truth);
  try {
    row.auc = auc(scores, truth);
  } catch (const UndefinedAuc&) {
    row.auc.reset();
  }
  return row;
}

std::pair<MacroAverage, MacroAverage> macros(std::span<const LabelMetrics> rows) {
  std::vector<std::optional<double>> f1s, aucs;
  for (const auto& r : rows) {
    f1s.emplace_back(r.scores.f1);
    aucs.push_back(r.auc);
  }
  return {macro(f1s), macro(aucs)};
}

std::string fixed4(double v) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(4) << v;
  return s.str();
}

}  // namespace

BinaryScores f1(std::span<const int> pred, std::span<const int> truth) {
  if (pred.size() != truth.size()) throw ValidationError("f1: prediction and truth lengths differ");
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t k = 0; k < pred.size(); ++k) {
    if (pred[k] && truth[k]) ++tp;
    else if (pred[k]) ++fp;
    else if (truth[k]) ++fn;
  }
  BinaryScores s;
  s.precision = (tp + fp) ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  s.recall = (tp + fn) ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  s.f1 = (s.precision + s.recall) > 0.0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
  return s;
}

double auc(std::span<const double> scores, std::span<const int> truth) {
  if (scores.size() != truth.size()) throw ValidationError("auc: score and truth lengths differ");
  std::size_t n_pos = static_cast<std::size_t>(std::count_if(truth.begin(), truth.end(), [](int t) { return t != 0; }));
  std::size_t n_neg = truth.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) throw UndefinedAuc("auc undefined: truth needs both classes");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Mann-Whitney U from midranks; twice the rank sum keeps everything integral.
  std::uint64_t twice_rank_sum = 0;
  std::size_t k = 0;
  while (k < order.size()) {
    std::size_t end = k;
    while (end < order.size() && scores[order[end]] == scores[order[k]]) ++end;
    std::uint64_t twice_midrank = static_cast<std::uint64_t>(k + 1 + end);  // ranks k+1..end
    for (std::size_t t = k; t < end; ++t) {
      if (truth[order[t]]) twice_rank_sum += twice_midrank;
    }
    k = end;
  }
  std::uint64_t twice_u = twice_rank_sum - static_cast<std::uint64_t>(n_pos) * (n_pos + 1);
  return static_cast<double>(twice_u) / (2.0 * static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

MacroAverage macro(std::span<const std::optional<double>> values) {
  MacroAverage m;
  double sum = 0.0;
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (values[k]) {
      sum += *values[k];
      ++m.included;
    } else {
      m.excluded.push_back(k);
    }
  }
  m.mean = m.included ? sum / static_cast<double>(m.included) : std::numeric_limits<double>::quiet_NaN();
  return m;
}

BernoulliNB nb_fit(const SparseBinaryMatrix& train, std::span<const int> labels) {
  if (train.n_rows() == 0) throw DataError("nb_fit: empty training matrix");
  if (labels.size() != train.n_rows()) throw DataError("nb_fit: label count differs from row count");
  BernoulliNB model;
  model.n_words = train.n_cols();
  std::size_t class_docs[2] = {0, 0};
  std::vector<std::size_t> present[2] = {std::vector<std::size_t>(train.n_cols(), 0),
                                         std::vector<std::size_t>(train.n_cols(), 0)};
  for (std::size_t l = 0; l < train.n_rows(); ++l) {
    int c = labels[l] ? 1 : 0;
    ++class_docs[c];
    for (auto i : train.row(l)) ++present[c][i];
  }
  const double n = static_cast<double>(train.n_rows());
  for (int c = 0; c < 2; ++c) {
    model.log_prior[c] = class_docs[c] ? std::log(static_cast<double>(class_docs[c]) / n)
                                       : -std::numeric_limits<double>::infinity();
    double denom = static_cast<double>(class_docs[c]) + 2.0;
    model.log_p_present[c].resize(train.n_cols());
    model.log_p_absent[c].resize(train.n_cols());
    for (std::size_t i = 0; i < train.n_cols(); ++i) {
      double k = static_cast<double>(present[c][i]);
      model.log_p_present[c][i] = std::log((k + 1.0) / denom);
      model.log_p_absent[c][i] = std::log((static_cast<double>(class_docs[c]) - k + 1.0) / denom);
    }
  }
  return model;
}

NBPrediction nb_predict(const BernoulliNB& model, const SparseBinaryMatrix& data) {
  if (data.n_cols() != model.n_words) throw DataError("nb_predict: column count differs from the model");
  double all_absent[2] = {0.0, 0.0};
  for (int c = 0; c < 2; ++c) {
    for (double v : model.log_p_absent[c]) all_absent[c] += v;
  }
  NBPrediction out;
  out.positive.resize(data.n_rows());
  out.negative.resize(data.n_rows());
  out.labels.resize(data.n_rows());
  for (std::size_t l = 0; l < data.n_rows(); ++l) {
    double s[2];
    for (int c = 0; c < 2; ++c) {
      s[c] = model.log_prior[c] + all_absent[c];
      for (auto i : data.row(l)) s[c] += model.log_p_present[c][i] - model.log_p_absent[c][i];
    }
    double lz = log_add_exp(s[0], s[1]);
    out.positive[l] = std::exp(s[1] - lz);
    out.negative[l] = std::exp(s[0] - lz);
    out.labels[l] = out.positive[l] >= 0.5 ? 1 : 0;
  }
  return out;
}

double entropy_of_column(const DiscreteSamples& samples, std::size_t col) {
  std::map<std::vector<int>, std::size_t> counts;
  for (const auto& row : samples) ++counts[{row.at(col)}];
  return entropy_from_counts(counts, samples.size());
}

double exact_total_correlation(const DiscreteSamples& samples) {
  if (samples.empty()) throw ValidationError("exact_total_correlation: no samples");
  const std::size_t cols = samples.front().size();
  if (cols > 20) throw ValidationError("exact_total_correlation: more than 20 columns");
  double cells = 1.0;
  for (std::size_t c = 0; c < cols; ++c) {
    std::set<int> values;
    for (const auto& row : samples) {
      if (row.size() != cols) throw ValidationError("exact_total_correlation: ragged sample table");
      values.insert(row[c]);
    }
    cells *= static_cast<double>(values.size());
  }
  if (cells > static_cast<double>(1u << 20)) {
    throw ValidationError("exact_total_correlation: joint support too large to enumerate");
  }
  double marginal_sum = 0.0;
  for (std::size_t c = 0; c < cols; ++c) marginal_sum += entropy_of_column(samples, c);
  std::map<std::vector<int>, std::size_t> joint;
  for (const auto& row : samples) ++joint[row];
  return marginal_sum - entropy_from_counts(joint, samples.size());
}

DiscreteSamples to_samples(const SparseBinaryMatrix& data) {
  DiscreteSamples out(data.n_rows(), std::vector<int>(data.n_cols(), 0));
  for (std::size_t l = 0; l < data.n_rows(); ++l) {
    for (auto i : data.row(l)) out[l][i] = 1;
  }
  return out;
}

std::vector<LabelTruth> label_truths(std::span<const Document> docs) {
  std::set<std::string> names;
  for (const auto& d : docs) names.insert(d.labels.begin(), d.labels.end());
  std::vector<LabelTruth> out;
  for (const auto& name : names) {
    LabelTruth t;
    t.name = name;
    t.truth.resize(docs.size());
    for (std::size_t l = 0; l < docs.size(); ++l) {
      t.truth[l] = std::find(docs[l].labels.begin(), docs[l].labels.end(), name) != docs[l].labels.end();
    }
    out.push_back(std::move(t));
  }
  return out;
}

MetricsReport evaluate(const DenseMatrix& scores, std::span<const LabelTruth> truths,
                       const std::map<std::string, std::size_t>& label_to_factor, double threshold,
                       const std::map<std::string, std::vector<double>>* baseline) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw ValidationError("threshold must lie in [0, 1]");
  MetricsReport report;
  report.threshold = threshold;
  for (const auto& [label, factor] : label_to_factor) {
    auto it = std::find_if(truths.begin(), truths.end(), [&](const LabelTruth& t) { return t.name == label; });
    if (it == truths.end()) throw ValidationError("label '" + label + "' not present in the label data");
    if (factor >= scores.cols()) {
      throw ValidationError("label '" + label + "' mapped to factor " + std::to_string(factor) +
                            " but the model has " + std::to_string(scores.cols()));
    }
    if (it->truth.size() != scores.rows()) throw DataError("label data and score matrix differ in length");
    std::vector<double> column(scores.rows());
    for (std::size_t l = 0; l < scores.rows(); ++l) column[l] = scores(l, factor);
    LabelMetrics row = score_label(label, column, it->truth, threshold);
    row.factor = factor;
    report.rows.push_back(std::move(row));

    if (baseline) {
      auto b = baseline->find(label);
      if (b == baseline->end()) throw ValidationError("baseline has no scores for label '" + label + "'");
      report.baseline_rows.push_back(score_label(label, b->second, it->truth, threshold));
    }
  }
  std::tie(report.macro_f1, report.macro_auc) = macros(report.rows);
  if (baseline) {
    auto [bf1, bauc] = macros(report.baseline_rows);
    report.baseline_macro_f1 = bf1;
    report.baseline_macro_auc = bauc;
  }
  return report;
}

nlohmann::json metrics_to_json(const MetricsReport& report) {
  nlohmann::json j;
  j["threshold"] = report.threshold;
  j["labels"] = rows_to_json(report.rows);
  j["macro"] = {{"f1", macro_to_json(report.macro_f1, report.rows)},
                {"auc", macro_to_json(report.macro_auc, report.rows)}};
  if (report.baseline_macro_f1) {
    j["baseline"] = {{"name", "bernoulli_naive_bayes"},
                     {"labels", rows_to_json(report.baseline_rows)},
                     {"macro",
                      {{"f1", macro_to_json(*report.baseline_macro_f1, report.baseline_rows)},
                       {"auc", macro_to_json(*report.baseline_macro_auc, report.baseline_rows)}}}};
  }
  return j;
}

std::string metrics_to_string(const MetricsReport& report) {
  return metrics_to_json(report).dump(2) + "\n";
}

std::string metrics_to_table(const MetricsReport& report) {
  auto auc_text = [](const std::optional<double>& v) { return v ? fixed4(*v) : std::string("n/a"); };
  std::ostringstream out;
  out << std::left << std::setw(28) << "label" << std::setw(8) << "factor" << std::setw(10) << "F1"
      << std::setw(10) << "AUC";
  if (report.baseline_macro_f1) out << std::setw(10) << "F1_NB" << std::setw(10) << "AUC_NB";
  out << '\n';
  for (std::size_t k = 0; k < report.rows.size(); ++k) {
    const auto& r = report.rows[k];
    out << std::left << std::setw(28) << r.label << std::setw(8) << *r.factor << std::setw(10)
        << fixed4(r.scores.f1) << std::setw(10) << auc_text(r.auc);
    if (report.baseline_macro_f1) {
      const auto& b = report.baseline_rows[k];
      out << std::setw(10) << fixed4(b.scores.f1) << std::setw(10) << auc_text(b.auc);
    }
    out << '\n';
  }
  auto macro_text = [](const MacroAverage& m) {
    return m.included ? fixed4(m.mean) : std::string("n/a");
  };
  out << std::left << std::setw(28) << "macro" << std::setw(8) << "" << std::setw(10)
      << macro_text(report.macro_f1) << std::setw(10) << macro_text(report.macro_auc);
  if (report.baseline_macro_f1) {
    out << std::setw(10) << macro_text(*report.baseline_macro_f1) << std::setw(10)
        << macro_text(*report.baseline_macro_auc);
  }
  out << '\n';
  return out.str();
}

}  // namespace corex
