#ifndef COREX_EVAL_HPP
#define COREX_EVAL_HPP

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "corex/common.hpp"
#include "corex/corpus.hpp"

namespace corex {

/// Thrown when AUC is requested for a label vector lacking one of the classes.
class UndefinedAuc : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

struct BinaryScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Precision is 0 when nothing is predicted positive; F1 is 0 when P + R = 0.
BinaryScores f1(std::span<const int> pred, std::span<const int> truth);

/// Probability that a random positive outscores a random negative, ties
/// counting one half. Computed from midranks in O(N log N).
double auc(std::span<const double> scores, std::span<const int> truth);

struct MacroAverage {
  double mean = 0.0;
  std::size_t included = 0;
  /// Positions of undefined entries that were left out of the mean.
  std::vector<std::size_t> excluded;
};

MacroAverage macro(std::span<const std::optional<double>> values);

/// Bernoulli naive Bayes for one binary class, add-one smoothed.
struct BernoulliNB {
  std::size_t n_words = 0;
  double log_prior[2] = {0.0, 0.0};
  std::vector<double> log_p_present[2];  // log p(x_i = 1 | c)
  std::vector<double> log_p_absent[2];   // log p(x_i = 0 | c)
};

BernoulliNB nb_fit(const SparseBinaryMatrix& train, std::span<const int> labels);

struct NBPrediction {
  /// p(c = 1 | x) and p(c = 0 | x) per document.
  std::vector<double> positive;
  std::vector<double> negative;
  std::vector<int> labels;  // positive >= 0.5
};

NBPrediction nb_predict(const BernoulliNB& model, const SparseBinaryMatrix& data);

/// Small discrete sample table for the exact information-measure oracles.
using DiscreteSamples = std::vector<std::vector<int>>;

/// TC = sum_i H(X_i) - H(X_1..X_n) of the empirical distribution, nats.
/// Throws ValidationError when the product of column cardinalities exceeds
/// 2^20 cells or there are more than 20 columns.
double exact_total_correlation(const DiscreteSamples& samples);
/// Column subset of a binary matrix as a sample table.
DiscreteSamples to_samples(const SparseBinaryMatrix& data);
double entropy_of_column(const DiscreteSamples& samples, std::size_t col);

// Per-label evaluation report shared by the CLI and the service.

struct LabelTruth {
  std::string name;
  std::vector<int> truth;  // one entry per document row
};

/// Binary truth vectors for every label name appearing in `docs` (sorted by name).
std::vector<LabelTruth> label_truths(std::span<const Document> docs);

struct LabelMetrics {
  std::string label;
  std::optional<std::size_t> factor;  // unset for baselines
  std::size_t support = 0;
  BinaryScores scores;
  std::optional<double> auc;
};

struct MetricsReport {
  double threshold = 0.5;
  std::vector<LabelMetrics> rows;
  MacroAverage macro_f1;
  MacroAverage macro_auc;
  std::vector<LabelMetrics> baseline_rows;
  std::optional<MacroAverage> baseline_macro_f1;
  std::optional<MacroAverage> baseline_macro_auc;
};

/// Scores each mapped label with its factor's column of `scores` and, when
/// `baseline` holds per-label probabilities, the baseline too.
MetricsReport evaluate(const DenseMatrix& scores, std::span<const LabelTruth> truths,
                       const std::map<std::string, std::size_t>& label_to_factor, double threshold,
                       const std::map<std::string, std::vector<double>>* baseline = nullptr);

nlohmann::json metrics_to_json(const MetricsReport& report);
/// Canonical serialisation; byte-identical for equal reports.
std::string metrics_to_string(const MetricsReport& report);
/// Plain-text table: label, F1 and AUC for the model and the baseline.
std::string metrics_to_table(const MetricsReport& report);

}  // namespace corex

#endif  // COREX_EVAL_HPP
