#ifndef COREX_PIPELINE_HPP
#define COREX_PIPELINE_HPP

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "corex/corpus.hpp"
#include "corex/model.hpp"

namespace corex {

/// Text-to-matrix settings shared by the CLI and the service, so that both
/// produce identical vocabularies and matrices from the same corpus.
struct CorpusOptions {
  TokenizeOptions tokenize;
  bool strip_boilerplate = false;
  std::size_t vocab_size = 20000;
  std::size_t min_df = 1;
};

/// Applies boilerplate stripping when enabled; other fields pass through.
std::vector<Document> prepare_documents(std::vector<Document> docs, const CorpusOptions& opts);

struct PreparedCorpus {
  std::vector<Document> docs;
  Vocabulary vocab;
  SparseBinaryMatrix matrix;
};

PreparedCorpus prepare_corpus(std::vector<Document> docs, const CorpusOptions& opts);

/// One "term:factor[:strength]" item of an anchor specification.
struct AnchorSpecEntry {
  std::string term;
  std::size_t factor = 0;
  std::optional<double> strength;

  friend bool operator==(const AnchorSpecEntry&, const AnchorSpecEntry&) = default;
};

/// Items separated by commas and/or newlines; blank items and lines starting
/// with '#' are skipped. Throws ValidationError on a malformed item.
std::vector<AnchorSpecEntry> parse_anchor_spec(std::string_view text);

struct ResolvedAnchors {
  AnchorSet anchors;
  /// Terms absent from the vocabulary, in specification order.
  std::vector<std::string> unknown;
};

/// Maps terms to word indices; entries without a strength get `default_strength`.
ResolvedAnchors resolve_anchors(std::span<const AnchorSpecEntry> entries, const Vocabulary& vocab,
                                double default_strength);

/// Anchors as [{"term","factor","strength"}].
nlohmann::json anchors_to_json(const AnchorSet& anchors, const Vocabulary& vocab);

}  // namespace corex

#endif  // COREX_PIPELINE_HPP
