#include <doctest.h>

#include <cmath>
#include <random>

#include "corex/eval.hpp"
#include "corex/synthetic.hpp"

using namespace corex;

namespace {

double brute_auc(const std::vector<double>& s, const std::vector<int>& t) {
  double wins = 0.0, pairs = 0.0;
  for (std::size_t a = 0; a < s.size(); ++a) {
    if (!t[a]) continue;
    for (std::size_t b = 0; b < s.size(); ++b) {
      if (t[b]) continue;
      pairs += 1.0;
      wins += s[a] > s[b] ? 1.0 : (s[a] == s[b] ? 0.5 : 0.0);
    }
  }
  return wins / pairs;
}

}  // namespace

TEST_CASE("f1") {
  std::vector<int> pred{1, 1, 0, 0, 1}, truth{1, 0, 1, 0, 1};
  auto s = f1(pred, truth);
  CHECK(s.precision == doctest::Approx(2.0 / 3.0));
  CHECK(s.recall == doctest::Approx(2.0 / 3.0));
  CHECK(s.f1 == doctest::Approx(2.0 / 3.0));
  std::vector<int> none{0, 0, 0, 0, 0};
  CHECK(f1(none, truth).f1 == 0.0);
  CHECK(f1(none, none).f1 == 0.0);
  CHECK(f1(truth, truth).f1 == 1.0);
  CHECK_THROWS_AS(f1(std::vector<int>{1}, truth), ValidationError);
}

TEST_CASE("auc") {
  CHECK(auc(std::vector<double>{0.1, 0.4, 0.35, 0.8}, std::vector<int>{0, 0, 1, 1}) == 0.75);
  CHECK(auc(std::vector<double>{0.5, 0.5}, std::vector<int>{0, 1}) == 0.5);
  CHECK(auc(std::vector<double>{0.9, 0.1}, std::vector<int>{0, 1}) == 0.0);
  CHECK_THROWS_AS(auc(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 1}), UndefinedAuc);
  CHECK_THROWS_AS(auc(std::vector<double>{0.1}, std::vector<int>{0, 1}), ValidationError);

  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    std::size_t n = 2 + rng() % 499;
    std::vector<double> s(n);
    std::vector<int> t(n);
    for (std::size_t k = 0; k < n; ++k) {
      s[k] = static_cast<double>(rng() % 20) / 20.0;  // many ties
      t[k] = static_cast<int>(rng() % 2);
    }
    t[0] = 0;
    t[1] = 1;
    CHECK(auc(s, t) == brute_auc(s, t));
  }
}

TEST_CASE("macro") {
  std::vector<std::optional<double>> v{0.5, std::nullopt, 1.0};
  auto m = macro(v);
  CHECK(m.mean == 0.75);
  CHECK(m.included == 2);
  CHECK(m.excluded == std::vector<std::size_t>{1});
  CHECK(std::isnan(macro(std::vector<std::optional<double>>{std::nullopt}).mean));
}

TEST_CASE("Bernoulli naive Bayes") {
  SparseBinaryMatrix train(2, {{0}, {0}, {0, 1}, {1}, {1}, {}});
  std::vector<int> labels{1, 1, 1, 0, 0, 0};
  auto model = nb_fit(train, labels);
  CHECK(std::exp(model.log_prior[1]) == doctest::Approx(0.5));
  CHECK(std::exp(model.log_p_present[1][0]) == doctest::Approx(4.0 / 5.0));  // Laplace (3+1)/(3+2)
  CHECK(std::exp(model.log_p_present[0][0]) == doctest::Approx(1.0 / 5.0));
  auto pred = nb_predict(model, SparseBinaryMatrix(2, {{0}, {1}, {}}));
  for (std::size_t l = 0; l < 3; ++l) CHECK(pred.positive[l] + pred.negative[l] == doctest::Approx(1.0));
  CHECK(pred.labels[0] == 1);
  CHECK(pred.labels[1] == 0);
  CHECK(pred.positive[0] == doctest::Approx(6.0 / 7.0));  // 0.48 / (0.48 + 0.08)
  CHECK_THROWS_AS(nb_predict(model, SparseBinaryMatrix(3, {{}})), DataError);
  CHECK_THROWS_AS(nb_fit(train, std::vector<int>{1}), DataError);
}

TEST_CASE("exact_total_correlation") {
  const double ln2 = std::log(2.0);
  DiscreteSamples independent{{0, 0}, {0, 1}, {1, 0}, {1, 1}};
  CHECK(std::abs(exact_total_correlation(independent)) < 1e-12);
  DiscreteSamples identical{{0, 0}, {1, 1}};
  CHECK(exact_total_correlation(identical) == doctest::Approx(ln2));
  DiscreteSamples xor3{{0, 0, 0}, {0, 1, 1}, {1, 0, 1}, {1, 1, 0}};
  CHECK(exact_total_correlation(xor3) == doctest::Approx(ln2));
  // Independent blocks add.
  DiscreteSamples blocks;
  for (const auto& a : identical)
    for (const auto& b : xor3) blocks.push_back({a[0], a[1], b[0], b[1], b[2]});
  CHECK(exact_total_correlation(blocks) == doctest::Approx(2 * ln2));
  CHECK(entropy_of_column(xor3, 2) == doctest::Approx(ln2));
  CHECK_THROWS_AS(exact_total_correlation({}), ValidationError);
  CHECK_THROWS_AS(exact_total_correlation(DiscreteSamples{std::vector<int>(21, 0)}), ValidationError);
  CHECK(to_samples(SparseBinaryMatrix(3, {{2}, {0, 1}})) == DiscreteSamples{{0, 0, 1}, {1, 1, 0}});
}

TEST_CASE("generate_synthetic") {
  SUBCASE("noise 0 gives exact copies of the factor") {
    SyntheticSpec spec;
    spec.noise = 0.0;
    spec.seed = 3;
    auto c = generate_synthetic(spec);
    CHECK(c.matrix.n_rows() == 500);
    CHECK(c.matrix.n_cols() == 20);
    CHECK(c.vocab.term(0) == "f0w0");
    for (std::size_t l = 0; l < 500; ++l) {
      std::vector<int> x(20, 0);
      for (auto i : c.matrix.row(l)) x[i] = 1;
      for (std::size_t i = 0; i < 20; ++i) CHECK(x[i] == c.states[l][c.word_factor[i]]);
    }
  }
  SUBCASE("within-block correlation is (1-2e)^2") {
    SyntheticSpec spec;
    spec.n_docs = 20000;
    spec.seed = 9;
    auto c = generate_synthetic(spec);
    auto s = to_samples(c.matrix);
    double n = static_cast<double>(s.size()), m0 = 0, m1 = 0, c01 = 0, v0 = 0, v1 = 0;
    for (const auto& r : s) { m0 += r[0]; m1 += r[1]; }
    m0 /= n;
    m1 /= n;
    for (const auto& r : s) {
      c01 += (r[0] - m0) * (r[1] - m1);
      v0 += (r[0] - m0) * (r[0] - m0);
      v1 += (r[1] - m1) * (r[1] - m1);
    }
    CHECK(std::abs(c01 / std::sqrt(v0 * v1) - 0.64) < 0.05);
  }
  SUBCASE("determinism and validation") {
    SyntheticSpec spec;
    spec.seed = 1;
    CHECK(generate_synthetic(spec).matrix == generate_synthetic(spec).matrix);
    spec.noise = 0.6;
    CHECK_THROWS_AS(generate_synthetic(spec), ValidationError);
  }
}

TEST_CASE("metrics report") {
  std::vector<LabelTruth> truths{{"a", {1, 0, 1, 0}}, {"b", {0, 0, 0, 0}}};
  DenseMatrix scores(4, 2);
  double col0[] = {0.9, 0.2, 0.6, 0.4};
  for (int l = 0; l < 4; ++l) scores(l, 0) = col0[l];
  auto r = evaluate(scores, truths, {{"a", 0}, {"b", 1}}, 0.5);
  REQUIRE(r.rows.size() == 2);
  CHECK(r.rows[0].scores.f1 == 1.0);
  CHECK(r.rows[0].auc == 1.0);
  CHECK_FALSE(r.rows[1].auc.has_value());
  CHECK(r.macro_auc.included == 1);
  CHECK(r.macro_f1.included == 2);
  auto j = metrics_to_json(r);
  CHECK(j["labels"][0]["label"] == "a");
  CHECK(metrics_to_string(r) == metrics_to_string(evaluate(scores, truths, {{"a", 0}, {"b", 1}}, 0.5)));
  CHECK(metrics_to_table(r).find("n/a") != std::string::npos);
  CHECK_THROWS_AS(evaluate(scores, truths, {{"zzz", 0}}, 0.5), ValidationError);
  CHECK_THROWS_AS(evaluate(scores, truths, {{"a", 5}}, 0.5), ValidationError);
  CHECK_THROWS_AS(evaluate(scores, truths, {{"a", 0}}, 1.5), ValidationError);

  std::map<std::string, std::vector<double>> base{{"a", {0.1, 0.9, 0.2, 0.8}}};
  auto rb = evaluate(scores, truths, {{"a", 0}}, 0.5, &base);
  CHECK(rb.baseline_rows.at(0).auc == 0.0);
  CHECK(metrics_to_json(rb)["baseline"]["name"] == "bernoulli_naive_bayes");

  std::vector<Document> docs{{"d0", "", {"x"}}, {"d1", "", {"x", "y"}}, {"d2", "", {}}};
  auto lt = label_truths(docs);
  REQUIRE(lt.size() == 2);
  CHECK(lt[0].truth == std::vector<int>{1, 1, 0});
  CHECK(lt[1].truth == std::vector<int>{0, 1, 0});
}
