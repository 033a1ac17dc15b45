#ifndef COREX_SYNTHETIC_HPP
#define COREX_SYNTHETIC_HPP

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "corex/corpus.hpp"

namespace corex {

/// Block-structured binary corpus with known ground truth. Each factor is a
/// fair coin per document (or a noisy copy of a shared parent coin); each of
/// its words copies the factor state and flips with probability `noise`.
struct SyntheticSpec {
  std::size_t n_factors = 2;
  std::size_t words_per_factor = 10;
  /// Per-factor block sizes; overrides words_per_factor when non-empty.
  std::vector<std::size_t> block_sizes;
  double noise = 0.1;
  std::size_t n_docs = 500;
  std::uint64_t seed = 0;
  /// Optional parent coin per factor; factors sharing a parent are correlated.
  std::vector<std::optional<std::size_t>> parent;
  std::size_t n_parents = 0;
  /// Probability that a factor disagrees with its parent.
  double parent_noise = 0.1;
};

struct SyntheticCorpus {
  SparseBinaryMatrix matrix;
  /// Ground-truth factor of every word column (columns are factor-major).
  std::vector<std::size_t> word_factor;
  /// states[l][k] = state of factor k in document l.
  std::vector<std::vector<int>> states;
  /// Column names "f<k>w<t>", matching the matrix columns.
  Vocabulary vocab;
};

SyntheticCorpus generate_synthetic(const SyntheticSpec& spec);

/// Corpus view of a synthetic sample: text is the space-joined present words,
/// labels are "factor<k>" for every active factor, ids are "doc<l>".
std::vector<Document> synthetic_documents(const SyntheticCorpus& corpus);

}  // namespace corex

#endif  // COREX_SYNTHETIC_HPP
