#include "corex/synthetic.hpp"

#include <algorithm>

#include "corex/common.hpp"

namespace corex {

SyntheticCorpus generate_synthetic(const SyntheticSpec& spec) {
  if (!(spec.noise >= 0.0 && spec.noise <= 0.5)) throw ValidationError("noise must lie in [0, 0.5]");
  if (!(spec.parent_noise >= 0.0 && spec.parent_noise <= 0.5)) {
    throw ValidationError("parent_noise must lie in [0, 0.5]");
  }
  std::vector<std::size_t> sizes = spec.block_sizes;
  if (sizes.empty()) sizes.assign(spec.n_factors, spec.words_per_factor);
  if (spec.n_factors == 0 || sizes.size() != spec.n_factors) throw ValidationError("bad synthetic block layout");
  if (std::find(sizes.begin(), sizes.end(), std::size_t{0}) != sizes.end()) {
    throw ValidationError("synthetic blocks must be non-empty");
  }
  if (!spec.parent.empty() && spec.parent.size() != spec.n_factors) {
    throw ValidationError("parent list must have one entry per factor");
  }
  for (const auto& p : spec.parent) {
    if (p && *p >= spec.n_parents) throw ValidationError("parent index out of range");
  }

  SyntheticCorpus out;
  std::vector<std::string> names;
  for (std::size_t k = 0; k < spec.n_factors; ++k) {
    for (std::size_t t = 0; t < sizes[k]; ++t) {
      out.word_factor.push_back(k);
      names.push_back("f" + std::to_string(k) + "w" + std::to_string(t));
    }
  }
  const std::size_t n_words = out.word_factor.size();
  out.vocab = Vocabulary(std::move(names), {});

  Rng rng(spec.seed);
  std::vector<std::vector<std::uint32_t>> rows(spec.n_docs);
  out.states.assign(spec.n_docs, std::vector<int>(spec.n_factors, 0));
  std::vector<int> parents(spec.n_parents);
  for (std::size_t l = 0; l < spec.n_docs; ++l) {
    for (auto& p : parents) p = rng.bernoulli(0.5) ? 1 : 0;
    for (std::size_t k = 0; k < spec.n_factors; ++k) {
      int state;
      if (!spec.parent.empty() && spec.parent[k]) {
        state = parents[*spec.parent[k]] ^ (rng.bernoulli(spec.parent_noise) ? 1 : 0);
      } else {
        state = rng.bernoulli(0.5) ? 1 : 0;
      }
      out.states[l][k] = state;
    }
    for (std::size_t i = 0; i < n_words; ++i) {
      int x = out.states[l][out.word_factor[i]] ^ (rng.bernoulli(spec.noise) ? 1 : 0);
      if (x) rows[l].push_back(static_cast<std::uint32_t>(i));
    }
  }
  out.matrix = SparseBinaryMatrix(n_words, std::move(rows));
  return out;
}

std::vector<Document> synthetic_documents(const SyntheticCorpus& corpus) {
  std::vector<Document> docs(corpus.matrix.n_rows());
  for (std::size_t l = 0; l < docs.size(); ++l) {
    docs[l].id = "doc" + std::to_string(l);
    for (auto i : corpus.matrix.row(l)) {
      if (!docs[l].text.empty()) docs[l].text.push_back(' ');
      docs[l].text += corpus.vocab.term(i);
    }
    for (std::size_t k = 0; k < corpus.states[l].size(); ++k) {
      if (corpus.states[l][k]) docs[l].labels.push_back("factor" + std::to_string(k));
    }
  }
  return docs;
}

}  // namespace corex
