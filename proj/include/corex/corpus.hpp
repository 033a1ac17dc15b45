#ifndef COREX_CORPUS_HPP
#define COREX_CORPUS_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "corex/common.hpp"

namespace corex {

/// A corpus contains the same document id twice.
class DuplicateIdError : public DataError {
 public:
  explicit DuplicateIdError(std::string id)
      : DataError("corpus: duplicate document id '" + id + "'"), id_(std::move(id)) {}
  const std::string& id() const { return id_; }

 private:
  std::string id_;
};

struct Document {
  std::string id;
  std::string text;
  std::vector<std::string> labels;
};

struct TokenizeOptions {
  bool lowercase = true;
  std::size_t min_token_length = 2;
  std::set<std::string> stopwords;
  /// Emit "not_<tok>" for the token right after "not"/"no"; the negator is dropped.
  bool negation = false;
};

/// Splits text into maximal alphanumeric runs. Apostrophes survive only between
/// two word characters; bytes >= 0x80 count as word characters so UTF-8 words
/// stay whole.
std::vector<std::string> tokenize(std::string_view text, const TokenizeOptions& opts);

/// Removes a leading "Key: value" header block, quoted (">") lines and a
/// trailing "--" signature within the last ten lines.
std::string strip_newsgroup_boilerplate(std::string_view text);

class Vocabulary {
 public:
  Vocabulary() = default;
  Vocabulary(std::vector<std::string> terms, std::vector<std::size_t> doc_freq);

  std::size_t size() const { return terms_.size(); }
  bool empty() const { return terms_.empty(); }
  const std::vector<std::string>& terms() const { return terms_; }
  const std::string& term(std::size_t i) const { return terms_.at(i); }
  const std::vector<std::size_t>& doc_freq() const { return doc_freq_; }
  std::optional<std::size_t> find(std::string_view term) const;

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.terms_ == b.terms_ && a.doc_freq_ == b.doc_freq_;
  }

 private:
  std::vector<std::string> terms_;
  std::vector<std::size_t> doc_freq_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Ranks terms by document frequency (desc), ties lexicographic (asc). Terms
/// with df < min_df are removed before truncating to `cap`.
Vocabulary build_vocabulary(std::span<const Document> docs, const TokenizeOptions& opts,
                            std::size_t cap, std::size_t min_df = 1);

/// Presence/absence document-term matrix stored as sorted column lists per row.
class SparseBinaryMatrix {
 public:
  SparseBinaryMatrix() = default;
  /// Validates and canonicalises rows (sort + dedupe); throws DataError on an
  /// out-of-range column.
  SparseBinaryMatrix(std::size_t n_cols, std::vector<std::vector<std::uint32_t>> rows);

  std::size_t n_rows() const { return rows_.size(); }
  std::size_t n_cols() const { return n_cols_; }
  std::size_t nnz() const;
  std::span<const std::uint32_t> row(std::size_t r) const { return rows_[r]; }
  const std::vector<std::vector<std::uint32_t>>& rows() const { return rows_; }
  bool contains(std::size_t r, std::size_t c) const;
  /// Number of rows containing each column.
  std::vector<std::size_t> column_counts() const;

  friend bool operator==(const SparseBinaryMatrix&, const SparseBinaryMatrix&) = default;

 private:
  std::size_t n_cols_ = 0;
  std::vector<std::vector<std::uint32_t>> rows_;
};

SparseBinaryMatrix vectorize(std::span<const Document> docs, const Vocabulary& vocab,
                             const TokenizeOptions& opts);

// File formats.

/// JSON-lines: {"id": str, "text": str, "labels": [str]?}. Rejects duplicate ids.
std::vector<Document> parse_corpus_jsonl(std::istream& in);
std::vector<Document> read_corpus_jsonl(const std::filesystem::path& path);
/// Returns the first id that occurs twice, if any.
std::optional<std::string> find_duplicate_id(std::span<const Document> docs);

void write_vocabulary(std::ostream& out, const Vocabulary& vocab);
Vocabulary parse_vocabulary(std::istream& in);
Vocabulary read_vocabulary(const std::filesystem::path& path);

void write_matrix(std::ostream& out, const SparseBinaryMatrix& m);
SparseBinaryMatrix parse_matrix(std::istream& in);
SparseBinaryMatrix read_matrix(const std::filesystem::path& path);

}  // namespace corex

#endif  // COREX_CORPUS_HPP
