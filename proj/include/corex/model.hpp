#ifndef COREX_MODEL_HPP
#define COREX_MODEL_HPP

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <stop_token>
#include <vector>

#include "corex/common.hpp"
#include "corex/corpus.hpp"

namespace corex {

struct Anchor {
  std::size_t word = 0;
  std::size_t factor = 0;
  double strength = 1.0;

  friend bool operator==(const Anchor&, const Anchor&) = default;
};

/// The (word, factor, strength) pairs whose connection weights are clamped.
/// A word may anchor several factors and a factor may carry several words.
class AnchorSet {
 public:
  explicit AnchorSet(double default_strength = 1.0);

  /// Adds with the default strength.
  void add(std::size_t word, std::size_t factor);
  /// Throws ValidationError on a duplicate pair or a non-positive strength.
  void add(std::size_t word, std::size_t factor, double strength);

  double default_strength() const { return default_strength_; }
  /// Sorted by (word, factor).
  const std::vector<Anchor>& entries() const { return entries_; }
  bool empty() const { return entries_.empty(); }
  std::size_t size() const { return entries_.size(); }

  std::optional<double> strength(std::size_t word, std::size_t factor) const;
  bool anchors_word(std::size_t word) const;
  /// Anchors attached to factor j, in word order.
  std::vector<Anchor> for_factor(std::size_t factor) const;

  friend bool operator==(const AnchorSet&, const AnchorSet&) = default;

 private:
  double default_strength_;
  std::vector<Anchor> entries_;
};

struct FitConfig {
  std::size_t n_factors = 1;
  std::size_t max_iter = 200;
  double tol = 1e-5;
  std::size_t patience = 10;
  std::uint64_t seed = 0;
  /// Damping on connection updates, in (0, 1].
  double damping = 0.1;
  /// Pseudo-counts on conditional and background marginals.
  double smoothing = 0.5;
  AnchorSet anchors;
  /// Let anchored words also win non-anchored factors through competition.
  bool anchored_words_compete = false;
  /// Bias the initial responsibilities of anchored factors toward documents
  /// containing their anchors.
  bool seed_from_anchors = true;
  /// Stop updating connection weights after this many iterations.
  std::optional<std::size_t> freeze_structure_after;
  /// Worker cap for row-parallel passes (0 = hardware concurrency). Never
  /// changes results.
  std::size_t threads = 1;

  friend bool operator==(const FitConfig&, const FitConfig&) = default;
};

/// Throws ValidationError when a field is out of range or an anchor refers to
/// a word >= n_words or a factor >= n_factors.
void validate(const FitConfig& config, std::size_t n_words);

/// Binary latent factors over binary words. Probabilities are stored in the
/// log domain; table layouts are documented on the index helpers.
struct LatentFactorModel {
  std::size_t n_words = 0;
  std::size_t n_factors = 0;
  DenseMatrix alpha;                    // n_words x n_factors
  std::vector<double> log_prior;        // [j*2 + y]
  std::vector<double> log_cond;         // [((i*m + j)*2 + v)*2 + y] = log p(x_i=v | y_j=y)
  std::vector<double> log_marg;         // [i*2 + v]
  std::vector<std::uint8_t> anchor_mask;  // [i*m + j]
  std::vector<std::uint8_t> flipped;      // per factor, toggled by orientation
  FitConfig config;
  /// MI between words and factors at the end of the fit (n_words x n_factors).
  DenseMatrix mi;

  std::size_t cond_index(std::size_t i, std::size_t j, int v, int y) const {
    return ((i * n_factors + j) * 2 + static_cast<std::size_t>(v)) * 2 + static_cast<std::size_t>(y);
  }
  double cond(std::size_t i, std::size_t j, int v, int y) const { return log_cond[cond_index(i, j, v, y)]; }
  double prior(std::size_t j, int y) const { return log_prior[j * 2 + static_cast<std::size_t>(y)]; }
  double marg(std::size_t i, int v) const { return log_marg[i * 2 + static_cast<std::size_t>(v)]; }
  bool anchored(std::size_t i, std::size_t j) const { return anchor_mask[i * n_factors + j] != 0; }

  friend bool operator==(const LatentFactorModel&, const LatentFactorModel&) = default;
};

/// Per-document factor posteriors q[l,j,y] = p(y_j=y | x^l) and their log normalizers.
struct Posteriors {
  std::size_t n_docs = 0;
  std::size_t n_factors = 0;
  std::vector<double> q;      // [(l*m + j)*2 + y]
  std::vector<double> log_z;  // [l*m + j]

  double at(std::size_t l, std::size_t j, int y) const {
    return q[(l * n_factors + j) * 2 + static_cast<std::size_t>(y)];
  }
  double normalizer(std::size_t l, std::size_t j) const { return log_z[l * n_factors + j]; }

  friend bool operator==(const Posteriors&, const Posteriors&) = default;
};

struct FitReport {
  std::vector<double> tc_history;
  std::vector<double> tc_per_factor;
  DenseMatrix mi;
  std::size_t iterations_run = 0;
  bool converged = false;

  double tc_total() const;
};

struct FitResult {
  LatentFactorModel model;
  FitReport report;
  /// Posteriors of the returned (oriented) model on the training data.
  Posteriors posteriors;
};

struct IterationInfo {
  std::size_t iteration = 0;
  double tc = 0.0;
};

struct FitControl {
  /// Initial posteriors for a warm start; must match the data rows and n_factors.
  const Posteriors* warm_start = nullptr;
  std::stop_token stop;
  std::function<void(const IterationInfo&)> on_iteration;
};

/// Initial model plus the posteriors it was seeded from.
struct InitialState {
  LatentFactorModel model;
  Posteriors posteriors;
};

/// Random responsibilities in [0.3, 0.7) (or the warm-start posteriors), one
/// marginal pass, uniform 1/m connections with anchors clamped.
InitialState init_model(const SparseBinaryMatrix& data, const FitConfig& config,
                        const Posteriors* warm_start = nullptr);

Posteriors compute_posteriors(const LatentFactorModel& model, const SparseBinaryMatrix& data,
                              std::size_t threads = 1);

/// Moment-matching update of priors and conditionals; background marginals
/// come from smoothed document frequencies.
void update_marginals(LatentFactorModel& model, const SparseBinaryMatrix& data,
                      const Posteriors& posteriors, double smoothing);

/// MI[i,j] in nats from the 2x2 joint of x_i and y_j under the empirical
/// distribution weighted by q.
DenseMatrix mutual_information(const SparseBinaryMatrix& data, const Posteriors& posteriors);

/// Winner-take-all connection competition with damping, then anchor re-clamp.
void update_alpha(LatentFactorModel& model, const DenseMatrix& mi, double damping);

struct TcBound {
  std::vector<double> per_factor;
  double total = 0.0;
};

TcBound tc_bound(const Posteriors& posteriors);

FitResult fit(const SparseBinaryMatrix& data, const FitConfig& config, const FitControl& control = {});

/// Posteriors for new documents under a frozen model.
Posteriors transform(const LatentFactorModel& model, const SparseBinaryMatrix& data,
                     std::size_t threads = 1);

}  // namespace corex

#endif  // COREX_MODEL_HPP
