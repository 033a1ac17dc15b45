#ifndef COREX_TOPICS_HPP
#define COREX_TOPICS_HPP

#include <cstddef>
#include <string>
#include <vector>

#include <json.hpp>

#include "corex/common.hpp"
#include "corex/corpus.hpp"
#include "corex/model.hpp"

namespace corex {

/// Swaps the two states of factor j: prior, every conditional, orientation bit.
void flip_factor(LatentFactorModel& model, std::size_t j);

/// Relabels states so that y=1 means "topic present": each factor's reference
/// word (its strongest anchor, else its highest alpha*MI word) must be more
/// likely present under y=1 than under y=0.
void orient_factors(LatentFactorModel& model, const DenseMatrix& mi);
void orient_factors(LatentFactorModel& model, const SparseBinaryMatrix& data);

struct TopicTerm {
  std::size_t word = 0;
  double weight = 0.0;  // alpha * MI, nats
  bool positive = true;
  bool anchor = false;

  friend bool operator==(const TopicTerm&, const TopicTerm&) = default;
};

struct Topic {
  std::size_t factor = 0;
  std::vector<std::size_t> anchors;
  std::vector<TopicTerm> terms;
  /// No candidate words at all (distinct from a truncated list).
  bool empty = false;

  friend bool operator==(const Topic&, const Topic&) = default;
};

/// Candidates: alpha > 0.5 plus every anchor of the factor; ranked by
/// alpha*MI descending, ties to the lower word index; at most `top` entries.
Topic top_words(const LatentFactorModel& model, const DenseMatrix& mi, std::size_t factor, std::size_t top);
std::vector<Topic> all_topics(const LatentFactorModel& model, const DenseMatrix& mi, std::size_t top);

/// N x m matrix of p(y_j = 1 | x^l).
DenseMatrix score_documents(const LatentFactorModel& model, const SparseBinaryMatrix& data,
                            std::size_t threads = 1);
DenseMatrix scores_from_posteriors(const Posteriors& posteriors);

/// 1 iff score >= threshold.
std::vector<int> classify(const DenseMatrix& scores, double threshold, std::size_t factor);

/// [{"id", "anchors": [term], "terms": [{"term","weight","sign"}], "empty"}]
nlohmann::json topics_to_json(const std::vector<Topic>& topics, const Vocabulary& vocab);
/// Canonical serialisation shared by the CLI and the service.
std::string topics_to_string(const std::vector<Topic>& topics, const Vocabulary& vocab);
/// One "topic_j: term1, term2, ..." line per factor.
std::string topics_to_text(const std::vector<Topic>& topics, const Vocabulary& vocab);

}  // namespace corex

#endif  // COREX_TOPICS_HPP
