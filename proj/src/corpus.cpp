#include "corex/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <regex>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

namespace corex {

namespace {

bool is_word_byte(unsigned char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c >= 0x80;
}

bool is_negator(std::string_view tok) {
  auto lower = [](char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c; };
  if (tok.size() == 2) return lower(tok[0]) == 'n' && lower(tok[1]) == 'o';
  if (tok.size() == 3) return lower(tok[0]) == 'n' && lower(tok[1]) == 'o' && lower(tok[2]) == 't';
  return false;
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (true) {
    std::size_t nl = text.find('\n', start);
    std::string_view line = text.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    if (nl == std::string_view::npos) break;
    start = nl + 1;
  }
  return lines;
}

bool is_blank(std::string_view line) {
  return std::all_of(line.begin(), line.end(), [](char c) { return c == ' ' || c == '\t'; });
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return in;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text, const TokenizeOptions& opts) {
  std::vector<std::string> raw;
  std::size_t i = 0;
  while (i < text.size()) {
    if (!is_word_byte(static_cast<unsigned char>(text[i]))) {
      ++i;
      continue;
    }
    std::size_t start = i;
    while (i < text.size()) {
      auto c = static_cast<unsigned char>(text[i]);
      if (is_word_byte(c)) {
        ++i;
      } else if (c == '\'' && i + 1 < text.size() &&
                 is_word_byte(static_cast<unsigned char>(text[i + 1]))) {
        ++i;  // word-internal apostrophe
      } else {
        break;
      }
    }
    raw.emplace_back(text.substr(start, i - start));
  }

  std::vector<std::string> out;
  out.reserve(raw.size());
  bool negate_next = false;
  for (auto& tok : raw) {
    if (opts.negation && is_negator(tok)) {
      negate_next = true;
      continue;
    }
    bool negated = negate_next;
    negate_next = false;
    if (opts.lowercase) {
      for (auto& c : tok) {
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
      }
    }
    if (tok.size() < opts.min_token_length) continue;
    if (opts.stopwords.count(tok)) continue;
    out.push_back(negated ? "not_" + tok : std::move(tok));
  }
  return out;
}

std::string strip_newsgroup_boilerplate(std::string_view text) {
  static const std::regex header_line(R"(^[A-Za-z][A-Za-z0-9-]*: )");
  std::vector<std::string_view> lines = split_lines(text);

  std::size_t begin = 0;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (!is_blank(lines[i])) continue;
    bool has_header = false;
    for (std::size_t k = 0; k < i && !has_header; ++k) {
      std::string line(lines[k]);
      has_header = std::regex_search(line, header_line);
    }
    if (has_header) begin = i + 1;
    break;
  }

  std::size_t end = lines.size();
  for (std::size_t i = lines.size(); i-- > begin;) {
    if (trim(lines[i]) == "--") {
      if (lines.size() - i <= 10) end = i;
      break;
    }
  }

  std::string out;
  bool first = true;
  for (std::size_t i = begin; i < end; ++i) {
    std::string_view line = lines[i];
    std::size_t nonspace = line.find_first_not_of(" \t");
    if (nonspace != std::string_view::npos && line[nonspace] == '>') continue;
    if (!first) out.push_back('\n');
    out.append(line);
    first = false;
  }
  return out;
}

Vocabulary::Vocabulary(std::vector<std::string> terms, std::vector<std::size_t> doc_freq)
    : terms_(std::move(terms)), doc_freq_(std::move(doc_freq)) {
  if (!doc_freq_.empty() && doc_freq_.size() != terms_.size()) {
    throw DataError("vocabulary: doc_freq length differs from term count");
  }
  index_.reserve(terms_.size());
  for (std::size_t i = 0; i < terms_.size(); ++i) {
    if (terms_[i].empty()) throw DataError("vocabulary: empty term at line " + std::to_string(i));
    if (!index_.emplace(terms_[i], i).second) {
      throw DataError("vocabulary: duplicate term '" + terms_[i] + "'");
    }
  }
}

std::optional<std::size_t> Vocabulary::find(std::string_view term) const {
  auto it = index_.find(std::string(term));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

Vocabulary build_vocabulary(std::span<const Document> docs, const TokenizeOptions& opts,
                            std::size_t cap, std::size_t min_df) {
  if (docs.empty()) throw DataError("build_vocabulary: no documents");
  std::map<std::string, std::size_t> df;
  for (const auto& doc : docs) {
    auto tokens = tokenize(doc.text, opts);
    std::sort(tokens.begin(), tokens.end());
    tokens.erase(std::unique(tokens.begin(), tokens.end()), tokens.end());
    for (auto& t : tokens) ++df[t];
  }
  std::vector<std::pair<std::string, std::size_t>> ranked;
  for (auto& [term, count] : df) {
    if (count >= min_df) ranked.emplace_back(term, count);
  }
  // df map iterates lexicographically, so a stable sort on count keeps the tie-break.
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  if (ranked.size() > cap) ranked.resize(cap);
  if (ranked.empty()) throw DataError("build_vocabulary: every term was filtered out");

  std::vector<std::string> terms;
  std::vector<std::size_t> counts;
  for (auto& [term, count] : ranked) {
    terms.push_back(term);
    counts.push_back(count);
  }
  return Vocabulary(std::move(terms), std::move(counts));
}

SparseBinaryMatrix::SparseBinaryMatrix(std::size_t n_cols,
                                       std::vector<std::vector<std::uint32_t>> rows)
    : n_cols_(n_cols), rows_(std::move(rows)) {
  for (std::size_t r = 0; r < rows_.size(); ++r) {
    auto& row = rows_[r];
    std::sort(row.begin(), row.end());
    row.erase(std::unique(row.begin(), row.end()), row.end());
    if (!row.empty() && row.back() >= n_cols_) {
      throw DataError("matrix row " + std::to_string(r) + ": column " + std::to_string(row.back()) +
                      " out of range (n_cols=" + std::to_string(n_cols_) + ")");
    }
  }
}

std::size_t SparseBinaryMatrix::nnz() const {
  std::size_t total = 0;
  for (const auto& row : rows_) total += row.size();
  return total;
}

bool SparseBinaryMatrix::contains(std::size_t r, std::size_t c) const {
  const auto& row = rows_.at(r);
  return std::binary_search(row.begin(), row.end(), static_cast<std::uint32_t>(c));
}

std::vector<std::size_t> SparseBinaryMatrix::column_counts() const {
  std::vector<std::size_t> counts(n_cols_, 0);
  for (const auto& row : rows_) {
    for (auto c : row) ++counts[c];
  }
  return counts;
}

SparseBinaryMatrix vectorize(std::span<const Document> docs, const Vocabulary& vocab,
                             const TokenizeOptions& opts) {
  if (vocab.empty()) throw DataError("vectorize: empty vocabulary");
  std::vector<std::vector<std::uint32_t>> rows(docs.size());
  for (std::size_t l = 0; l < docs.size(); ++l) {
    for (const auto& tok : tokenize(docs[l].text, opts)) {
      if (auto idx = vocab.find(tok)) rows[l].push_back(static_cast<std::uint32_t>(*idx));
    }
  }
  return SparseBinaryMatrix(vocab.size(), std::move(rows));
}

std::vector<Document> parse_corpus_jsonl(std::istream& in) {
  std::vector<Document> docs;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError("corpus line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!obj.is_object() || !obj.contains("id") || !obj["id"].is_string() ||
        !obj.contains("text") || !obj["text"].is_string()) {
      throw DataError("corpus line " + std::to_string(line_no) +
                      ": expected object with string fields \"id\" and \"text\"");
    }
    Document doc;
    doc.id = obj["id"].get<std::string>();
    doc.text = obj["text"].get<std::string>();
    if (obj.contains("labels")) {
      const auto& labels = obj["labels"];
      if (!labels.is_array()) {
        throw DataError("corpus line " + std::to_string(line_no) + ": \"labels\" must be an array");
      }
      for (const auto& l : labels) {
        if (!l.is_string()) {
          throw DataError("corpus line " + std::to_string(line_no) + ": labels must be strings");
        }
        doc.labels.push_back(l.get<std::string>());
      }
    }
    if (!seen.insert(doc.id).second) {
      throw DuplicateIdError(doc.id);
    }
    docs.push_back(std::move(doc));
  }
  return docs;
}

std::vector<Document> read_corpus_jsonl(const std::filesystem::path& path) {
  auto in = open_input(path);
  return parse_corpus_jsonl(in);
}

std::optional<std::string> find_duplicate_id(std::span<const Document> docs) {
  std::unordered_set<std::string> seen;
  for (const auto& d : docs) {
    if (!seen.insert(d.id).second) return d.id;
  }
  return std::nullopt;
}

void write_vocabulary(std::ostream& out, const Vocabulary& vocab) {
  out << "#n=" << vocab.size() << '\n';
  for (const auto& t : vocab.terms()) out << t << '\n';
}

Vocabulary parse_vocabulary(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("#n=", 0) != 0) {
    throw DataError("vocabulary: missing '#n=<count>' header");
  }
  std::size_t expected = 0;
  try {
    expected = std::stoull(line.substr(3));
  } catch (const std::exception&) {
    throw DataError("vocabulary: bad header '" + line + "'");
  }
  std::vector<std::string> terms;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    terms.push_back(line);
  }
  if (terms.size() != expected) {
    throw DataError("vocabulary: header says " + std::to_string(expected) + " terms, found " +
                    std::to_string(terms.size()));
  }
  return Vocabulary(std::move(terms), {});
}

Vocabulary read_vocabulary(const std::filesystem::path& path) {
  auto in = open_input(path);
  return parse_vocabulary(in);
}

void write_matrix(std::ostream& out, const SparseBinaryMatrix& m) {
  out << "#rows=" << m.n_rows() << " cols=" << m.n_cols() << '\n';
  for (const auto& row : m.rows()) {
    for (std::size_t k = 0; k < row.size(); ++k) {
      if (k) out << ' ';
      out << row[k];
    }
    out << '\n';
  }
}

SparseBinaryMatrix parse_matrix(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("matrix: empty input");
  std::size_t n_rows = 0, n_cols = 0;
  {
    std::istringstream hdr(line);
    std::string rows_tok, cols_tok;
    hdr >> rows_tok >> cols_tok;
    if (rows_tok.rfind("#rows=", 0) != 0 || cols_tok.rfind("cols=", 0) != 0) {
      throw DataError("matrix: missing '#rows=<N> cols=<n>' header");
    }
    try {
      n_rows = std::stoull(rows_tok.substr(6));
      n_cols = std::stoull(cols_tok.substr(5));
    } catch (const std::exception&) {
      throw DataError("matrix: bad header '" + line + "'");
    }
  }
  std::vector<std::vector<std::uint32_t>> rows;
  rows.reserve(n_rows);
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::vector<std::uint32_t> row;
    long long v = 0;
    while (ls >> v) {
      if (v < 0) throw DataError("matrix: negative column index at row " + std::to_string(rows.size()));
      row.push_back(static_cast<std::uint32_t>(v));
    }
    if (!ls.eof()) throw DataError("matrix: non-numeric token at row " + std::to_string(rows.size()));
    if (!std::is_sorted(row.begin(), row.end()) ||
        std::adjacent_find(row.begin(), row.end()) != row.end()) {
      throw DataError("matrix: indices not strictly increasing at row " + std::to_string(rows.size()));
    }
    rows.push_back(std::move(row));
  }
  if (rows.size() != n_rows) {
    throw DataError("matrix: header says " + std::to_string(n_rows) + " rows, found " +
                    std::to_string(rows.size()));
  }
  return SparseBinaryMatrix(n_cols, std::move(rows));
}

SparseBinaryMatrix read_matrix(const std::filesystem::path& path) {
  auto in = open_input(path);
  return parse_matrix(in);
}

}  // namespace corex
