#include "corex/topics.hpp"

#include <algorithm>
#include <optional>
#include <sstream>
#include <utility>

namespace corex {

void flip_factor(LatentFactorModel& model, std::size_t j) {
  std::swap(model.log_prior[j * 2], model.log_prior[j * 2 + 1]);
  for (std::size_t i = 0; i < model.n_words; ++i) {
    for (int v = 0; v < 2; ++v) {
      std::swap(model.log_cond[model.cond_index(i, j, v, 0)], model.log_cond[model.cond_index(i, j, v, 1)]);
    }
  }
  model.flipped[j] ^= 1;
}

namespace {

std::optional<std::size_t> reference_word(const LatentFactorModel& model, const DenseMatrix& mi, std::size_t j) {
  auto anchors = model.config.anchors.for_factor(j);
  if (!anchors.empty()) {
    const Anchor* best = &anchors.front();
    for (const auto& a : anchors) {
      if (a.strength > best->strength) best = &a;  // word order already ascending
    }
    return best->word;
  }
  std::optional<std::size_t> best;
  double best_weight = 0.0;
  for (std::size_t i = 0; i < model.n_words; ++i) {
    double w = model.alpha(i, j) * mi(i, j);
    if (w > best_weight) {
      best_weight = w;
      best = i;
    }
  }
  return best;
}

}  // namespace

void orient_factors(LatentFactorModel& model, const DenseMatrix& mi) {
  for (std::size_t j = 0; j < model.n_factors; ++j) {
    auto ref = reference_word(model, mi, j);
    if (!ref) continue;
    if (model.cond(*ref, j, 1, 1) < model.cond(*ref, j, 1, 0)) flip_factor(model, j);
  }
}

void orient_factors(LatentFactorModel& model, const SparseBinaryMatrix& data) {
  auto post = compute_posteriors(model, data, model.config.threads);
  orient_factors(model, mutual_information(data, post));
}

Topic top_words(const LatentFactorModel& model, const DenseMatrix& mi, std::size_t factor, std::size_t top) {
  if (factor >= model.n_factors) throw ValidationError("factor index out of range");
  Topic topic;
  topic.factor = factor;
  for (const auto& a : model.config.anchors.for_factor(factor)) topic.anchors.push_back(a.word);

  std::vector<TopicTerm> candidates;
  for (std::size_t i = 0; i < model.n_words; ++i) {
    bool anchor = model.anchored(i, factor);
    if (!anchor && !(model.alpha(i, factor) > 0.5)) continue;
    TopicTerm t;
    t.word = i;
    t.weight = model.alpha(i, factor) * mi(i, factor);
    t.positive = model.cond(i, factor, 1, 1) > model.cond(i, factor, 1, 0);
    t.anchor = anchor;
    candidates.push_back(t);
  }
  topic.empty = candidates.empty();
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const TopicTerm& a, const TopicTerm& b) { return a.weight > b.weight; });
  if (candidates.size() > top) candidates.resize(top);
  topic.terms = std::move(candidates);
  return topic;
}

std::vector<Topic> all_topics(const LatentFactorModel& model, const DenseMatrix& mi, std::size_t top) {
  std::vector<Topic> out;
  for (std::size_t j = 0; j < model.n_factors; ++j) out.push_back(top_words(model, mi, j, top));
  return out;
}

DenseMatrix scores_from_posteriors(const Posteriors& posteriors) {
  DenseMatrix scores(posteriors.n_docs, posteriors.n_factors);
  for (std::size_t l = 0; l < posteriors.n_docs; ++l) {
    for (std::size_t j = 0; j < posteriors.n_factors; ++j) scores(l, j) = posteriors.at(l, j, 1);
  }
  return scores;
}

DenseMatrix score_documents(const LatentFactorModel& model, const SparseBinaryMatrix& data, std::size_t threads) {
  return scores_from_posteriors(transform(model, data, threads));
}

std::vector<int> classify(const DenseMatrix& scores, double threshold, std::size_t factor) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw ValidationError("threshold must lie in [0, 1]");
  if (factor >= scores.cols()) throw ValidationError("factor index out of range");
  std::vector<int> labels(scores.rows());
  for (std::size_t l = 0; l < scores.rows(); ++l) labels[l] = scores(l, factor) >= threshold ? 1 : 0;
  return labels;
}

nlohmann::json topics_to_json(const std::vector<Topic>& topics, const Vocabulary& vocab) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& t : topics) {
    nlohmann::json obj;
    obj["id"] = t.factor;
    obj["anchors"] = nlohmann::json::array();
    for (auto a : t.anchors) obj["anchors"].push_back(vocab.term(a));
    obj["terms"] = nlohmann::json::array();
    for (const auto& term : t.terms) {
      obj["terms"].push_back({{"term", vocab.term(term.word)},
                              {"weight", term.weight},
                              {"sign", term.positive ? "+" : "-"},
                              {"anchor", term.anchor}});
    }
    obj["empty"] = t.empty;
    arr.push_back(std::move(obj));
  }
  return arr;
}

std::string topics_to_string(const std::vector<Topic>& topics, const Vocabulary& vocab) {
  return topics_to_json(topics, vocab).dump(2) + "\n";
}

std::string topics_to_text(const std::vector<Topic>& topics, const Vocabulary& vocab) {
  std::ostringstream out;
  for (const auto& t : topics) {
    out << "topic_" << t.factor << ':';
    for (std::size_t k = 0; k < t.terms.size(); ++k) {
      out << (k ? ", " : " ") << vocab.term(t.terms[k].word);
      if (t.terms[k].anchor) out << '*';
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace corex
