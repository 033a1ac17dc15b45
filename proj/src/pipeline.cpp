#include "corex/pipeline.hpp"

#include <charconv>

namespace corex {

std::vector<Document> prepare_documents(std::vector<Document> docs, const CorpusOptions& opts) {
  if (opts.strip_boilerplate) {
    for (auto& d : docs) d.text = strip_newsgroup_boilerplate(d.text);
  }
  return docs;
}

PreparedCorpus prepare_corpus(std::vector<Document> docs, const CorpusOptions& opts) {
  if (docs.empty()) throw DataError("corpus is empty");
  if (auto dup = find_duplicate_id(docs)) throw DuplicateIdError(*dup);
  PreparedCorpus out;
  out.docs = prepare_documents(std::move(docs), opts);
  out.vocab = build_vocabulary(out.docs, opts.tokenize, opts.vocab_size, opts.min_df);
  out.matrix = vectorize(out.docs, out.vocab, opts.tokenize);
  return out;
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

AnchorSpecEntry parse_item(std::string_view item) {
  auto bad = [&](const std::string& why) {
    return ValidationError("bad anchor '" + std::string(item) + "': " + why +
                           " (expected term:factor[:strength])");
  };
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  for (std::size_t k = 0; k <= item.size(); ++k) {
    if (k == item.size() || item[k] == ':') {
      parts.push_back(trim(item.substr(start, k - start)));
      start = k + 1;
    }
  }
  if (parts.size() < 2 || parts.size() > 3) throw bad("wrong number of fields");
  AnchorSpecEntry e;
  e.term = std::string(parts[0]);
  if (e.term.empty()) throw bad("empty term");
  auto f = parts[1];
  auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), e.factor);
  if (f.empty() || ec != std::errc() || ptr != f.data() + f.size()) throw bad("factor is not a non-negative integer");
  if (parts.size() == 3) {
    std::string s(parts[2]);
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      throw bad("strength is not a number");
    }
    if (used != s.size()) throw bad("strength is not a number");
    if (!(v > 0.0)) throw bad("strength must be positive");
    e.strength = v;
  }
  return e;
}

}  // namespace

std::vector<AnchorSpecEntry> parse_anchor_spec(std::string_view text) {
  std::vector<AnchorSpecEntry> out;
  std::size_t line_start = 0;
  while (line_start <= text.size()) {
    std::size_t line_end = text.find('\n', line_start);
    if (line_end == std::string_view::npos) line_end = text.size();
    auto line = trim(text.substr(line_start, line_end - line_start));
    if (!line.empty() && line.front() != '#') {
      std::size_t s = 0;
      for (std::size_t k = 0; k <= line.size(); ++k) {
        if (k == line.size() || line[k] == ',') {
          auto item = trim(line.substr(s, k - s));
          if (!item.empty()) out.push_back(parse_item(item));
          s = k + 1;
        }
      }
    }
    line_start = line_end + 1;
  }
  return out;
}

ResolvedAnchors resolve_anchors(std::span<const AnchorSpecEntry> entries, const Vocabulary& vocab,
                                double default_strength) {
  ResolvedAnchors out{AnchorSet(default_strength), {}};
  for (const auto& e : entries) {
    auto idx = vocab.find(e.term);
    if (!idx) {
      out.unknown.push_back(e.term);
      continue;
    }
    out.anchors.add(*idx, e.factor, e.strength.value_or(default_strength));
  }
  return out;
}

nlohmann::json anchors_to_json(const AnchorSet& anchors, const Vocabulary& vocab) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& a : anchors.entries()) {
    arr.push_back({{"term", vocab.term(a.word)}, {"factor", a.factor}, {"strength", a.strength}});
  }
  return arr;
}

}  // namespace corex
