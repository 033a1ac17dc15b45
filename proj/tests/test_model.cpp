#include <doctest.h>

#include <cmath>

#include "corex/model.hpp"
#include "corex/synthetic.hpp"
#include "test_support.hpp"

using namespace corex;
using namespace corex::testing;

namespace {

/// One word, one factor, with the given cell counts of (x, y).
struct Joint {
  SparseBinaryMatrix data;
  Posteriors post;
};

Joint joint(int x1y1, int x1y0, int x0y1, int x0y0) {
  std::vector<std::vector<std::uint32_t>> rows;
  std::vector<std::vector<int>> states;
  auto add = [&](int count, bool x, int y) {
    for (int k = 0; k < count; ++k) {
      rows.push_back(x ? std::vector<std::uint32_t>{0} : std::vector<std::uint32_t>{});
      states.push_back({y});
    }
  };
  add(x1y1, true, 1);
  add(x1y0, true, 0);
  add(x0y1, false, 1);
  add(x0y0, false, 0);
  return {SparseBinaryMatrix(1, rows), hard_posteriors(states)};
}

SparseBinaryMatrix two_blocks(std::uint64_t seed) {
  SyntheticSpec spec;
  spec.seed = seed;
  return generate_synthetic(spec).matrix;
}

}  // namespace

TEST_CASE("AnchorSet semantics") {
  AnchorSet a;
  CHECK(a.default_strength() == 1.0);
  a.add(3, 0);
  a.add(3, 1, 2.0);
  a.add(1, 1);
  CHECK(a.size() == 3);
  CHECK(a.entries().front().word == 1);
  CHECK(a.strength(3, 1) == 2.0);
  CHECK_FALSE(a.strength(2, 0));
  CHECK(a.anchors_word(3));
  CHECK(a.for_factor(1).size() == 2);
  CHECK_THROWS_AS(a.add(3, 0), ValidationError);
  CHECK_THROWS_AS(a.add(4, 0, 0.0), ValidationError);
}

TEST_CASE("validate rejects bad configurations") {
  FitConfig c;
  c.n_factors = 0;
  CHECK_THROWS_AS(validate(c, 5), ValidationError);
  c.n_factors = 2;
  c.damping = 0.0;
  CHECK_THROWS_AS(validate(c, 5), ValidationError);
  c.damping = 1.0;
  c.tol = 0.0;
  CHECK_THROWS_AS(validate(c, 5), ValidationError);
  c.tol = 1e-5;
  c.anchors.add(7, 0);
  CHECK_THROWS_AS(validate(c, 5), ValidationError);
  FitConfig d;
  d.n_factors = 2;
  d.anchors.add(0, 2);
  CHECK_THROWS_AS(validate(d, 5), ValidationError);
}

TEST_CASE("init_model examples") {
  auto data = two_blocks(1);
  FitConfig c;
  c.n_factors = 2;
  c.seed = 9;
  auto a = init_model(data, c);
  auto b = init_model(data, c);
  CHECK(a.model == b.model);
  CHECK(a.posteriors == b.posteriors);

  c.anchors.add(3, 0);
  auto anchored = init_model(data, c);
  CHECK(anchored.model.alpha(3, 0) == 1.0);
  CHECK(anchored.model.anchored(3, 0));
  CHECK(anchored.model.alpha(3, 1) == 0.0);  // anchored words do not compete by default
  CHECK(anchored.model.alpha(4, 1) == 0.5);

  SparseBinaryMatrix one(1, {{0}, {}});
  FitConfig single;
  auto s = init_model(one, single);
  CHECK(s.model.alpha(0, 0) == 1.0);

  FitConfig plain;
  plain.n_factors = 2;
  plain.seed_from_anchors = false;
  auto p = init_model(data, plain);
  for (double q : p.posteriors.q) {
    CHECK(q >= 0.3);
    CHECK(q <= 0.7);
  }
}

TEST_CASE("compute_posteriors examples") {
  SUBCASE("no connections give the prior") {
    auto model = blank_model(2, 1);
    model.log_prior = {std::log(0.3), std::log(0.7)};
    auto post = compute_posteriors(model, SparseBinaryMatrix(2, {{0}, {1}, {}}));
    for (std::size_t l = 0; l < 3; ++l) {
      CHECK(post.at(l, 0, 1) == doctest::Approx(0.7).epsilon(1e-12));
      CHECK(post.normalizer(l, 0) == doctest::Approx(0.0).epsilon(1e-12));
    }
  }
  SUBCASE("Bayes-rule oracle") {
    auto model = blank_model(1, 1);
    model.alpha(0, 0) = 1.0;
    set_cond(model, 0, 0, 0.9, 0.1);
    auto post = compute_posteriors(model, SparseBinaryMatrix(1, {{0}}));
    CHECK(std::abs(post.at(0, 0, 1) - 0.9) < 1e-12);
    CHECK(std::abs(post.at(0, 0, 0) + post.at(0, 0, 1) - 1.0) < 1e-12);
  }
  SUBCASE("uninformative word contributes nothing") {
    auto model = blank_model(2, 1);
    model.alpha(0, 0) = 1.0;
    model.alpha(1, 0) = 1.0;
    set_cond(model, 1, 0, 0.8, 0.3);
    auto with = compute_posteriors(model, SparseBinaryMatrix(2, {{0, 1}}));
    model.alpha(0, 0) = 0.0;
    auto without = compute_posteriors(model, SparseBinaryMatrix(2, {{0, 1}}));
    CHECK(std::abs(with.at(0, 0, 1) - without.at(0, 0, 1)) < 1e-15);
  }
  SUBCASE("dimension mismatch") {
    auto model = blank_model(2, 1);
    CHECK_THROWS_AS(compute_posteriors(model, SparseBinaryMatrix(3, {{0}})), DataError);
  }
  SUBCASE("sparse restructuring matches the dense formula") {
    auto data = two_blocks(4);
    FitConfig c;
    c.n_factors = 3;
    auto st = init_model(data, c);
    auto& model = st.model;
    Rng rng(5);
    for (auto& a : model.alpha.data()) a = rng.uniform();
    auto post = compute_posteriors(model, data);
    for (std::size_t l = 0; l < 20; ++l) {
      for (std::size_t j = 0; j < 3; ++j) {
        double s[2];
        for (int y = 0; y < 2; ++y) {
          s[y] = model.prior(j, y);
          for (std::size_t i = 0; i < model.n_words; ++i) {
            int x = data.contains(l, i) ? 1 : 0;
            s[y] += model.alpha(i, j) * (model.cond(i, j, x, y) - model.marg(i, x));
          }
        }
        double lz = std::log(std::exp(s[0]) + std::exp(s[1]));
        CHECK(std::abs(post.normalizer(l, j) - lz) < 1e-9);
        CHECK(std::abs(post.at(l, j, 1) - std::exp(s[1] - lz)) < 1e-9);
      }
    }
  }
}

TEST_CASE("update_marginals examples") {
  SUBCASE("all-present word under certain factor") {
    const std::size_t N = 10;
    std::vector<std::vector<std::uint32_t>> rows(N, {0});
    SparseBinaryMatrix data(1, rows);
    auto post = hard_posteriors(std::vector<std::vector<int>>(N, {1}));
    auto model = blank_model(1, 1);
    update_marginals(model, data, post, 0.5);
    CHECK(std::exp(model.cond(0, 0, 1, 1)) == doctest::Approx((N + 0.5) / (N + 1.0)).epsilon(1e-12));
    CHECK(std::exp(model.marg(0, 1)) == doctest::Approx((N + 0.5) / (N + 1.0)).epsilon(1e-12));
  }
  SUBCASE("uniform responsibilities give the smoothed frequency") {
    SparseBinaryMatrix data(1, {{0}, {}, {}, {0}, {0}});
    Posteriors post{5, 1, std::vector<double>(10, 0.5), std::vector<double>(5, 0.0)};
    auto model = blank_model(1, 1);
    update_marginals(model, data, post, 0.5);
    // Each state holds half of every document: (1.5 + λ) / (2.5 + 2λ).
    double expected = (1.5 + 0.5) / (2.5 + 1.0);
    CHECK(std::exp(model.cond(0, 0, 1, 1)) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(std::exp(model.cond(0, 0, 1, 0)) == doctest::Approx(expected).epsilon(1e-12));
  }
  SUBCASE("single document") {
    SparseBinaryMatrix data(1, {{0}});
    auto model = blank_model(1, 1);
    update_marginals(model, data, hard_posteriors({{1}}), 0.5);
    CHECK(std::exp(model.prior(0, 1)) == 1.0);
    CHECK(std::exp(model.prior(0, 0)) + std::exp(model.prior(0, 1)) == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("normalisation invariants") {
    auto data = two_blocks(2);
    FitConfig c;
    c.n_factors = 2;
    auto st = init_model(data, c);
    for (std::size_t j = 0; j < 2; ++j) {
      CHECK(std::abs(std::exp(st.model.prior(j, 0)) + std::exp(st.model.prior(j, 1)) - 1.0) < 1e-9);
      for (std::size_t i = 0; i < st.model.n_words; ++i) {
        for (int y = 0; y < 2; ++y) {
          CHECK(std::abs(std::exp(st.model.cond(i, j, 0, y)) + std::exp(st.model.cond(i, j, 1, y)) - 1.0) < 1e-9);
        }
      }
    }
    for (std::size_t i = 0; i < st.model.n_words; ++i) {
      CHECK(std::abs(std::exp(st.model.marg(i, 0)) + std::exp(st.model.marg(i, 1)) - 1.0) < 1e-9);
    }
  }
}

TEST_CASE("mutual_information examples") {
  auto indep = joint(25, 25, 25, 25);
  CHECK(mutual_information(indep.data, indep.post)(0, 0) == doctest::Approx(0.0));
  auto det = joint(50, 0, 0, 50);
  CHECK(std::abs(mutual_information(det.data, det.post)(0, 0) - std::log(2.0)) < 1e-12);
  auto mid = joint(40, 10, 10, 40);
  double expected = 0.8 * std::log(0.4 / 0.25) + 0.2 * std::log(0.1 / 0.25);
  CHECK(std::abs(mutual_information(mid.data, mid.post)(0, 0) - expected) < 1e-12);
  CHECK(std::abs(expected - 0.19274) < 1e-5);
}

TEST_CASE("MI stays within entropy bounds") {
  auto data = two_blocks(3);
  FitConfig c;
  c.n_factors = 2;
  auto result = fit(data, c);
  const auto& mi = result.report.mi;
  auto counts = data.column_counts();
  const double N = static_cast<double>(data.n_rows());
  auto h = [](double p) { return (p > 0 && p < 1) ? -(p * std::log(p) + (1 - p) * std::log(1 - p)) : 0.0; };
  for (std::size_t j = 0; j < 2; ++j) {
    double py = 0.0;
    for (std::size_t l = 0; l < data.n_rows(); ++l) py += result.posteriors.at(l, j, 1);
    py /= N;
    for (std::size_t i = 0; i < data.n_cols(); ++i) {
      CHECK(mi(i, j) >= 0.0);
      CHECK(mi(i, j) <= std::min(h(counts[i] / N), h(py)) + 1e-9);
    }
  }
}

TEST_CASE("update_alpha examples") {
  auto model = blank_model(2, 2);
  model.alpha(0, 0) = 0.5;
  model.alpha(0, 1) = 0.5;
  DenseMatrix mi(2, 2);
  mi(0, 0) = 0.5;
  mi(0, 1) = 0.2;
  mi(1, 0) = 0.3;
  mi(1, 1) = 0.3;
  update_alpha(model, mi, 1.0);
  CHECK(model.alpha(0, 0) == 1.0);
  CHECK(model.alpha(0, 1) == 0.0);
  CHECK(model.alpha(1, 0) == 1.0);  // tie -> lowest index
  CHECK(model.alpha(1, 1) == 0.0);

  auto damped = blank_model(1, 2);
  damped.alpha(0, 0) = 0.5;
  damped.alpha(0, 1) = 0.5;
  DenseMatrix mi1(1, 2);
  mi1(0, 1) = 0.1;
  update_alpha(damped, mi1, 0.5);
  CHECK(damped.alpha(0, 0) == 0.25);
  CHECK(damped.alpha(0, 1) == 0.75);

  auto anchored = blank_model(1, 2);
  anchored.config.anchors.add(0, 1, 2.0);
  anchored.anchor_mask[0 * 2 + 1] = 1;
  anchored.alpha(0, 0) = 0.5;
  DenseMatrix mi2(1, 2);
  mi2(0, 0) = 0.9;
  update_alpha(anchored, mi2, 1.0);
  CHECK(anchored.alpha(0, 1) == 2.0);
  CHECK(anchored.alpha(0, 0) == 0.0);
}

TEST_CASE("tc_bound examples") {
  auto model = blank_model(1, 1);
  auto zero = tc_bound(compute_posteriors(model, SparseBinaryMatrix(1, {{0}, {}})));
  CHECK(zero.total == 0.0);

  model.alpha(0, 0) = 1.0;
  set_cond(model, 0, 0, 1.0, 0.0);
  // One word alone carries no total correlation: log_z = log(0.5·2 + 0.5·0) = 0.
  SparseBinaryMatrix data(1, {{0}, {}});
  CHECK(std::abs(tc_bound(compute_posteriors(model, data)).total) < 1e-12);

  // Two copies of that word: TC(X1, X2) = ln 2, and the bound is tight.
  auto pair = blank_model(2, 1);
  pair.alpha(0, 0) = pair.alpha(1, 0) = 1.0;
  set_cond(pair, 0, 0, 1.0, 0.0);
  set_cond(pair, 1, 0, 1.0, 0.0);
  SparseBinaryMatrix pair_data(2, {{0, 1}, {}});
  auto tc = tc_bound(compute_posteriors(pair, pair_data));
  CHECK(std::abs(tc.total - std::log(2.0)) < 1e-12);

  SparseBinaryMatrix doubled(2, {{0, 1}, {}, {0, 1}, {}});
  CHECK(std::abs(tc_bound(compute_posteriors(pair, doubled)).total - tc.total) < 1e-15);
}

TEST_CASE("fit behaviour") {
  auto data = two_blocks(7);
  FitConfig c;
  c.n_factors = 2;
  c.seed = 7;
  auto a = fit(data, c);
  auto b = fit(data, c);
  CHECK(a.model == b.model);
  CHECK(a.report.tc_history == b.report.tc_history);

  SUBCASE("threads never change results") {
    FitConfig threaded = c;
    threaded.threads = 4;
    auto t = fit(data, threaded);
    CHECK(t.model.alpha == a.model.alpha);
    CHECK(t.report.tc_history == a.report.tc_history);
  }
  SUBCASE("posteriors normalised and transform reproduces them") {
    for (std::size_t l = 0; l < a.posteriors.n_docs; ++l) {
      for (std::size_t j = 0; j < 2; ++j) {
        CHECK(std::abs(a.posteriors.at(l, j, 0) + a.posteriors.at(l, j, 1) - 1.0) < 1e-9);
      }
    }
    CHECK(transform(a.model, data) == a.posteriors);
  }
  SUBCASE("objective progress") {
    CHECK(a.report.tc_history.back() >= a.report.tc_history.front() - 1e-6);
    for (double v : a.report.tc_per_factor) CHECK(v >= -1e-6);
  }
  SUBCASE("full damping gives a hard single-topic structure") {
    FitConfig hard = c;
    hard.damping = 1.0;
    auto h = fit(data, hard);
    for (std::size_t i = 0; i < h.model.n_words; ++i) {
      int nonzero = 0;
      for (std::size_t j = 0; j < 2; ++j) {
        CHECK((h.model.alpha(i, j) == 0.0 || h.model.alpha(i, j) == 1.0));
        nonzero += h.model.alpha(i, j) != 0.0;
      }
      CHECK(nonzero == 1);
    }
  }
  SUBCASE("anchors stay clamped") {
    FitConfig anchored = c;
    anchored.anchors.add(0, 1, 1.5);
    anchored.anchors.add(12, 0);
    auto r = fit(data, anchored);
    CHECK(r.model.alpha(0, 1) == 1.5);
    CHECK(r.model.alpha(12, 0) == 1.0);
    CHECK(r.model.alpha(0, 0) == 0.0);
  }
  SUBCASE("all-zero data has nothing to explain") {
    SparseBinaryMatrix empty(4, std::vector<std::vector<std::uint32_t>>(50));
    auto r = fit(empty, c);
    // Smoothing makes the conditionals and the background marginals differ by
    // O(n·λ/N), which is all the bound can see here.
    CHECK(std::abs(r.report.tc_total()) < 0.05);
  }
  SUBCASE("two-block structure is recovered") {
    SyntheticSpec spec;
    spec.seed = 11;
    auto corpus = generate_synthetic(spec);
    FitConfig rc;
    rc.n_factors = 2;
    rc.seed = 11;
    CHECK(same_partition(assignment(fit(corpus.matrix, rc).model), corpus.word_factor));
  }
  SUBCASE("cancellation stops early") {
    std::stop_source stop;
    stop.request_stop();
    FitControl control;
    control.stop = stop.get_token();
    auto r = fit(data, c, control);
    CHECK(r.report.iterations_run == 0);
  }
  SUBCASE("warm start must match the data") {
    FitControl control;
    Posteriors wrong{3, 2, std::vector<double>(12, 0.5), std::vector<double>(6, 0.0)};
    control.warm_start = &wrong;
    CHECK_THROWS_AS(fit(data, c, control), DataError);
  }
}

TEST_CASE("transform on degenerate inputs") {
  auto data = two_blocks(8);
  FitConfig c;
  c.n_factors = 2;
  auto r = fit(data, c);
  SparseBinaryMatrix held(data.n_cols(), {{}, {0, 1, 2}, {0, 1, 2}});
  auto p = transform(r.model, held);
  CHECK(p.at(1, 0, 1) == p.at(2, 0, 1));
  CHECK(p.at(1, 1, 1) == p.at(2, 1, 1));
  CHECK(std::abs(p.at(0, 0, 0) + p.at(0, 0, 1) - 1.0) < 1e-12);
}
