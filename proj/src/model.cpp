#include "corex/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <tuple>

#include "corex/topics.hpp"

namespace corex {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Posterior-weighted co-occurrence counts shared by the marginal and MI passes.
struct SufficientStats {
  std::size_t n_docs = 0;
  std::size_t n_words = 0;
  std::size_t n_factors = 0;
  std::vector<double> present;  // [(i*m + j)*2 + y] = sum over docs containing i of q[l,j,y]
  std::vector<double> total;    // [j*2 + y] = sum over all docs of q[l,j,y]
};

void check_posteriors(const SparseBinaryMatrix& data, const Posteriors& post) {
  if (post.n_docs != data.n_rows()) {
    throw DataError("posteriors have " + std::to_string(post.n_docs) + " rows, data has " +
                    std::to_string(data.n_rows()));
  }
  if (post.q.size() != post.n_docs * post.n_factors * 2) {
    throw DataError("posteriors: q table has the wrong size");
  }
}

SufficientStats accumulate(const SparseBinaryMatrix& data, const Posteriors& post) {
  check_posteriors(data, post);
  const std::size_t m = post.n_factors;
  SufficientStats s;
  s.n_docs = data.n_rows();
  s.n_words = data.n_cols();
  s.n_factors = m;
  s.present.assign(s.n_words * m * 2, 0.0);
  s.total.assign(m * 2, 0.0);
  for (std::size_t l = 0; l < data.n_rows(); ++l) {
    const double* ql = post.q.data() + l * m * 2;
    for (std::size_t k = 0; k < m * 2; ++k) s.total[k] += ql[k];
    for (auto i : data.row(l)) {
      double* dst = s.present.data() + static_cast<std::size_t>(i) * m * 2;
      for (std::size_t k = 0; k < m * 2; ++k) dst[k] += ql[k];
    }
  }
  return s;
}

void apply_marginals(LatentFactorModel& model, const SufficientStats& s,
                     const std::vector<std::size_t>& doc_freq, double smoothing) {
  const std::size_t m = model.n_factors;
  const double n = static_cast<double>(s.n_docs);
  for (std::size_t j = 0; j < m; ++j) {
    for (int y = 0; y < 2; ++y) {
      double p = s.total[j * 2 + y] / n;
      model.log_prior[j * 2 + y] = p > 0.0 ? std::log(p) : kNegInf;
    }
  }
  for (std::size_t i = 0; i < model.n_words; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      for (int y = 0; y < 2; ++y) {
        double weight = s.total[j * 2 + y];
        double with_word = s.present[(i * m + j) * 2 + y];
        double without_word = std::max(0.0, weight - with_word);
        double log_denom = std::log(weight + 2.0 * smoothing);
        model.log_cond[model.cond_index(i, j, 1, y)] = std::log(with_word + smoothing) - log_denom;
        model.log_cond[model.cond_index(i, j, 0, y)] = std::log(without_word + smoothing) - log_denom;
      }
    }
    double df = static_cast<double>(doc_freq[i]);
    double log_denom = std::log(n + 2.0 * smoothing);
    model.log_marg[i * 2 + 1] = std::log(df + smoothing) - log_denom;
    model.log_marg[i * 2 + 0] = std::log(n - df + smoothing) - log_denom;
  }
}

double xlogx_ratio(double p, double denom) {
  return p > 0.0 ? p * std::log(p / denom) : 0.0;
}

DenseMatrix mi_from_stats(const SufficientStats& s) {
  const std::size_t m = s.n_factors;
  const double n = static_cast<double>(s.n_docs);
  DenseMatrix mi(s.n_words, m);
  for (std::size_t i = 0; i < s.n_words; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      double p11 = s.present[(i * m + j) * 2 + 1] / n;
      double p10 = s.present[(i * m + j) * 2 + 0] / n;
      double p01 = std::max(0.0, s.total[j * 2 + 1] / n - p11);
      double p00 = std::max(0.0, s.total[j * 2 + 0] / n - p10);
      double px1 = p11 + p10;
      double px0 = p01 + p00;
      double py1 = p11 + p01;
      double py0 = p10 + p00;
      double v = xlogx_ratio(p11, px1 * py1) + xlogx_ratio(p10, px1 * py0) +
                 xlogx_ratio(p01, px0 * py1) + xlogx_ratio(p00, px0 * py0);
      mi(i, j) = std::max(0.0, v);
    }
  }
  return mi;
}

void clamp_anchors(LatentFactorModel& model) {
  for (const auto& a : model.config.anchors.entries()) model.alpha(a.word, a.factor) = a.strength;
}

}  // namespace

AnchorSet::AnchorSet(double default_strength) : default_strength_(default_strength) {
  if (!(default_strength > 0.0)) throw ValidationError("anchor strength must be positive");
}

void AnchorSet::add(std::size_t word, std::size_t factor) { add(word, factor, default_strength_); }

void AnchorSet::add(std::size_t word, std::size_t factor, double strength) {
  if (!(strength > 0.0) || !std::isfinite(strength)) {
    throw ValidationError("anchor strength must be positive and finite");
  }
  Anchor a{word, factor, strength};
  auto pos = std::lower_bound(entries_.begin(), entries_.end(), a, [](const Anchor& x, const Anchor& y) {
    return std::tie(x.word, x.factor) < std::tie(y.word, y.factor);
  });
  if (pos != entries_.end() && pos->word == word && pos->factor == factor) {
    throw ValidationError("duplicate anchor (word " + std::to_string(word) + ", factor " +
                          std::to_string(factor) + ")");
  }
  entries_.insert(pos, a);
}

std::optional<double> AnchorSet::strength(std::size_t word, std::size_t factor) const {
  for (const auto& a : entries_) {
    if (a.word == word && a.factor == factor) return a.strength;
  }
  return std::nullopt;
}

bool AnchorSet::anchors_word(std::size_t word) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const Anchor& a) { return a.word == word; });
}

std::vector<Anchor> AnchorSet::for_factor(std::size_t factor) const {
  std::vector<Anchor> out;
  for (const auto& a : entries_) {
    if (a.factor == factor) out.push_back(a);
  }
  return out;
}

double FitReport::tc_total() const {
  double s = 0.0;
  for (double v : tc_per_factor) s += v;
  return s;
}

void validate(const FitConfig& config, std::size_t n_words) {
  if (config.n_factors < 1) throw ValidationError("n_factors must be >= 1");
  if (n_words < 1) throw ValidationError("need at least one word");
  if (!(config.tol > 0.0)) throw ValidationError("tol must be > 0");
  if (!(config.damping > 0.0 && config.damping <= 1.0)) throw ValidationError("damping must lie in (0, 1]");
  if (!(config.smoothing > 0.0)) throw ValidationError("smoothing must be > 0");
  if (config.max_iter < 1) throw ValidationError("max_iter must be >= 1");
  for (const auto& a : config.anchors.entries()) {
    if (a.word >= n_words) {
      throw ValidationError("anchor word index " + std::to_string(a.word) + " out of range");
    }
    if (a.factor >= config.n_factors) {
      throw ValidationError("anchor factor " + std::to_string(a.factor) + " out of range (m=" +
                            std::to_string(config.n_factors) + ")");
    }
  }
}

InitialState init_model(const SparseBinaryMatrix& data, const FitConfig& config,
                        const Posteriors* warm_start) {
  const std::size_t n = data.n_cols();
  validate(config, n);
  if (data.n_rows() == 0) throw DataError("cannot fit an empty matrix");
  const std::size_t m = config.n_factors;

  InitialState st;
  LatentFactorModel& model = st.model;
  model.n_words = n;
  model.n_factors = m;
  model.config = config;
  model.alpha = DenseMatrix(n, m, 1.0 / static_cast<double>(m));
  model.log_prior.assign(m * 2, 0.0);
  model.log_cond.assign(n * m * 4, 0.0);
  model.log_marg.assign(n * 2, 0.0);
  model.anchor_mask.assign(n * m, 0);
  model.flipped.assign(m, 0);
  model.mi = DenseMatrix(n, m);
  for (const auto& a : config.anchors.entries()) {
    model.anchor_mask[a.word * m + a.factor] = 1;
    if (!config.anchored_words_compete) {
      for (std::size_t j = 0; j < m; ++j) model.alpha(a.word, j) = 0.0;
    }
  }
  clamp_anchors(model);

  Posteriors& post = st.posteriors;
  if (warm_start != nullptr) {
    if (warm_start->n_docs != data.n_rows() || warm_start->n_factors != m) {
      throw DataError("warm-start posteriors do not match the data and factor count");
    }
    post = *warm_start;
  } else {
    post.n_docs = data.n_rows();
    post.n_factors = m;
    post.q.resize(post.n_docs * m * 2);
    post.log_z.assign(post.n_docs * m, 0.0);
    // Anchors seed their factors: the draw is folded into the upper half of
    // the range when the strength-weighted vote of the factor's anchors says
    // "present", into the lower half when it says "absent".
    std::vector<std::vector<Anchor>> anchors_of(m);
    for (const auto& a : config.anchors.entries()) anchors_of[a.factor].push_back(a);
    Rng rng(config.seed);
    for (std::size_t l = 0; l < post.n_docs; ++l) {
      for (std::size_t j = 0; j < m; ++j) {
        double q1 = rng.uniform(0.3, 0.7);
        if (config.seed_from_anchors && !anchors_of[j].empty()) {
          double vote = 0.0;
          for (const auto& a : anchors_of[j]) vote += data.contains(l, a.word) ? a.strength : -a.strength;
          if (vote > 0.0) q1 = std::max(q1, 1.0 - q1);
          if (vote < 0.0) q1 = std::min(q1, 1.0 - q1);
        }
        post.q[(l * m + j) * 2 + 1] = q1;
        post.q[(l * m + j) * 2 + 0] = 1.0 - q1;
      }
    }
  }
  update_marginals(model, data, post, config.smoothing);
  return st;
}

Posteriors compute_posteriors(const LatentFactorModel& model, const SparseBinaryMatrix& data,
                              std::size_t threads) {
  if (data.n_cols() != model.n_words) {
    throw DataError("data has " + std::to_string(data.n_cols()) + " columns, model expects " +
                    std::to_string(model.n_words));
  }
  const std::size_t n = model.n_words;
  const std::size_t m = model.n_factors;

  // score(y) = base(y) + sum over present words of delta(i, y), where base
  // already holds every word's absent-state term. An absent-state term of
  // -inf (a hand-set zero probability) cannot be cancelled by subtraction, so
  // those are counted instead: the score is -inf while any such absent word
  // remains, and a present word removes its count.
  std::vector<double> base(model.log_prior);
  std::vector<int> base_impossible(m * 2, 0);
  std::vector<double> delta(n * m * 2, 0.0);
  std::vector<std::uint8_t> absent_impossible(n * m * 2, 0);
  bool any_impossible = false;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      double a = model.alpha(i, j);
      if (a == 0.0) continue;
      for (int y = 0; y < 2; ++y) {
        const std::size_t k = (i * m + j) * 2 + static_cast<std::size_t>(y);
        double absent = a * (model.cond(i, j, 0, y) - model.marg(i, 0));
        double present = a * (model.cond(i, j, 1, y) - model.marg(i, 1));
        if (absent == -std::numeric_limits<double>::infinity()) {
          ++base_impossible[j * 2 + y];
          absent_impossible[k] = 1;
          any_impossible = true;
          delta[k] = present;
        } else {
          base[j * 2 + y] += absent;
          delta[k] = present - absent;
        }
      }
    }
  }

  Posteriors post;
  post.n_docs = data.n_rows();
  post.n_factors = m;
  post.q.assign(post.n_docs * m * 2, 0.0);
  post.log_z.assign(post.n_docs * m, 0.0);
  parallel_for(post.n_docs, threads, [&](std::size_t begin, std::size_t end) {
    std::vector<double> score(m * 2);
    std::vector<int> impossible(m * 2);
    for (std::size_t l = begin; l < end; ++l) {
      std::copy(base.begin(), base.end(), score.begin());
      for (auto i : data.row(l)) {
        const double* d = delta.data() + static_cast<std::size_t>(i) * m * 2;
        for (std::size_t k = 0; k < m * 2; ++k) score[k] += d[k];
      }
      if (any_impossible) {
        std::copy(base_impossible.begin(), base_impossible.end(), impossible.begin());
        for (auto i : data.row(l)) {
          const std::uint8_t* f = absent_impossible.data() + static_cast<std::size_t>(i) * m * 2;
          for (std::size_t k = 0; k < m * 2; ++k) impossible[k] -= f[k];
        }
        for (std::size_t k = 0; k < m * 2; ++k) {
          if (impossible[k] > 0) score[k] = -std::numeric_limits<double>::infinity();
        }
      }
      for (std::size_t j = 0; j < m; ++j) {
        double lz = log_add_exp(score[j * 2], score[j * 2 + 1]);
        post.log_z[l * m + j] = lz;
        post.q[(l * m + j) * 2 + 0] = std::exp(score[j * 2] - lz);
        post.q[(l * m + j) * 2 + 1] = std::exp(score[j * 2 + 1] - lz);
      }
    }
  });
  return post;
}

void update_marginals(LatentFactorModel& model, const SparseBinaryMatrix& data,
                      const Posteriors& posteriors, double smoothing) {
  if (data.n_cols() != model.n_words || posteriors.n_factors != model.n_factors) {
    throw DataError("update_marginals: inconsistent shapes");
  }
  if (data.n_rows() == 0) throw DataError("update_marginals: no documents");
  apply_marginals(model, accumulate(data, posteriors), data.column_counts(), smoothing);
}

DenseMatrix mutual_information(const SparseBinaryMatrix& data, const Posteriors& posteriors) {
  if (data.n_rows() == 0) throw DataError("mutual_information: no documents");
  return mi_from_stats(accumulate(data, posteriors));
}

void update_alpha(LatentFactorModel& model, const DenseMatrix& mi, double damping) {
  const std::size_t m = model.n_factors;
  if (mi.rows() != model.n_words || mi.cols() != m) throw DataError("update_alpha: MI shape mismatch");
  for (std::size_t i = 0; i < model.n_words; ++i) {
    bool anchored_word = false;
    for (std::size_t j = 0; j < m; ++j) anchored_word = anchored_word || model.anchored(i, j);

    if (anchored_word && !model.config.anchored_words_compete) {
      for (std::size_t j = 0; j < m; ++j) {
        if (!model.anchored(i, j)) model.alpha(i, j) = 0.0;
      }
      continue;
    }
    std::optional<std::size_t> best;
    for (std::size_t j = 0; j < m; ++j) {
      if (model.anchored(i, j)) continue;
      if (!best || mi(i, j) > mi(i, *best)) best = j;
    }
    if (!best) continue;
    for (std::size_t j = 0; j < m; ++j) {
      if (model.anchored(i, j)) continue;
      double target = (j == *best) ? 1.0 : 0.0;
      model.alpha(i, j) = (1.0 - damping) * model.alpha(i, j) + damping * target;
    }
  }
  clamp_anchors(model);
}

TcBound tc_bound(const Posteriors& posteriors) {
  const std::size_t m = posteriors.n_factors;
  TcBound out;
  out.per_factor.assign(m, 0.0);
  if (posteriors.n_docs == 0) return out;
  std::vector<double> column(posteriors.n_docs);
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t l = 0; l < posteriors.n_docs; ++l) column[l] = posteriors.log_z[l * m + j];
    out.per_factor[j] = pairwise_sum(column) / static_cast<double>(posteriors.n_docs);
  }
  out.total = pairwise_sum(out.per_factor);
  return out;
}

FitResult fit(const SparseBinaryMatrix& data, const FitConfig& config, const FitControl& control) {
  InitialState init = init_model(data, config, control.warm_start);
  LatentFactorModel model = std::move(init.model);
  const std::vector<std::size_t> doc_freq = data.column_counts();

  FitReport report;
  std::size_t stable = 0;
  for (std::size_t t = 0; t < config.max_iter; ++t) {
    if (control.stop.stop_requested()) break;
    Posteriors post = compute_posteriors(model, data, config.threads);
    SufficientStats stats = accumulate(data, post);
    apply_marginals(model, stats, doc_freq, config.smoothing);
    DenseMatrix mi = mi_from_stats(stats);
    bool frozen = config.freeze_structure_after && t >= *config.freeze_structure_after;
    update_alpha(model, mi, frozen ? 0.0 : config.damping);

    double tc = tc_bound(post).total;
    if (!report.tc_history.empty() && std::abs(tc - report.tc_history.back()) < config.tol) {
      ++stable;
    } else {
      stable = 0;
    }
    report.tc_history.push_back(tc);
    report.iterations_run = t + 1;
    if (control.on_iteration) control.on_iteration({t, tc});
    if (stable >= config.patience) {
      report.converged = true;
      break;
    }
  }

  Posteriors post = compute_posteriors(model, data, config.threads);
  DenseMatrix mi = mutual_information(data, post);
  orient_factors(model, mi);
  model.mi = mi;

  FitResult result;
  result.posteriors = compute_posteriors(model, data, config.threads);
  report.tc_per_factor = tc_bound(result.posteriors).per_factor;
  report.mi = std::move(mi);
  result.model = std::move(model);
  result.report = std::move(report);
  return result;
}

Posteriors transform(const LatentFactorModel& model, const SparseBinaryMatrix& data, std::size_t threads) {
  return compute_posteriors(model, data, threads);
}

}  // namespace corex
