#include "corex/hierarchy.hpp"

#include <cctype>
#include <charconv>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

#include "corex/topics.hpp"

namespace corex {

SparseBinaryMatrix hard_labels(const Posteriors& posteriors) {
  std::vector<std::vector<std::uint32_t>> rows(posteriors.n_docs);
  for (std::size_t l = 0; l < posteriors.n_docs; ++l) {
    for (std::size_t j = 0; j < posteriors.n_factors; ++j) {
      if (posteriors.at(l, j, 1) >= 0.5) rows[l].push_back(static_cast<std::uint32_t>(j));
    }
  }
  return SparseBinaryMatrix(posteriors.n_factors, std::move(rows));
}

LayerStack fit_hierarchy(const SparseBinaryMatrix& data, const std::vector<std::size_t>& layer_sizes,
                         const FitConfig& config) {
  if (layer_sizes.empty()) throw ValidationError("at least one layer is required");
  for (auto s : layer_sizes) {
    if (s == 0) throw ValidationError("layer sizes must be positive");
  }
  LayerStack stack;
  stack.layer_sizes = layer_sizes;
  SparseBinaryMatrix input = data;
  for (std::size_t k = 0; k < layer_sizes.size(); ++k) {
    FitConfig c = config;
    c.n_factors = layer_sizes[k];
    c.seed = config.seed + k;
    if (k > 0) c.anchors = AnchorSet(config.anchors.default_strength());
    stack.layers.push_back(fit(input, c));
    if (k + 1 < layer_sizes.size()) input = hard_labels(stack.layers.back().posteriors);
  }
  return stack;
}

namespace {

std::string factor_id(std::size_t layer, std::size_t j) {
  return "L" + std::to_string(layer) + "F" + std::to_string(j);
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace

TopicTree export_tree(const LayerStack& stack, const Vocabulary& vocab, std::size_t top) {
  if (stack.layers.empty()) throw ValidationError("empty layer stack");
  const auto& base = stack.layers.front().model;
  if (base.n_words != vocab.size()) throw DataError("vocabulary does not match the layer-0 model");

  TopicTree tree;
  for (std::size_t k = stack.layers.size(); k-- > 0;) {
    const auto& model = stack.layers[k].model;
    for (std::size_t j = 0; j < model.n_factors; ++j) {
      TreeNode node;
      node.id = factor_id(k, j);
      node.kind = TreeNode::Kind::factor;
      node.layer = k;
      node.index = j;
      node.label = node.id;
      node.anchored = !model.config.anchors.for_factor(j).empty();
      tree.nodes.push_back(std::move(node));
    }
  }

  // Upper layers: every connected lower factor becomes a child.
  for (std::size_t k = stack.layers.size(); k-- > 1;) {
    const auto& model = stack.layers[k].model;
    for (std::size_t j = 0; j < model.n_factors; ++j) {
      for (const auto& t : top_words(model, model.mi, j, model.n_words).terms) {
        tree.edges.push_back({factor_id(k, j), factor_id(k - 1, t.word), t.weight});
      }
    }
  }

  std::set<std::size_t> seen;
  for (std::size_t j = 0; j < base.n_factors; ++j) {
    for (const auto& t : top_words(base, base.mi, j, top).terms) {
      if (seen.insert(t.word).second) {
        TreeNode node;
        node.id = "w" + std::to_string(t.word);
        node.kind = TreeNode::Kind::word;
        node.index = t.word;
        node.anchored = base.config.anchors.anchors_word(t.word);
        node.label = vocab.term(t.word) + (node.anchored ? "*" : "");
        tree.nodes.push_back(std::move(node));
      }
      tree.edges.push_back({factor_id(0, j), "w" + std::to_string(t.word), t.weight});
    }
  }
  return tree;
}

std::string tree_to_dot(const TopicTree& tree) {
  std::ostringstream out;
  out << "digraph corex {\n";
  for (const auto& n : tree.nodes) {
    out << "  " << quote(n.id) << " [kind=" << (n.kind == TreeNode::Kind::word ? "word" : "factor")
        << ", layer=" << n.layer << ", index=" << n.index << ", label=" << quote(n.label)
        << ", anchored=" << (n.anchored ? "true" : "false");
    if (n.anchored && n.kind == TreeNode::Kind::factor) out << ", color=red";
    out << "];\n";
  }
  for (const auto& e : tree.edges) {
    out << "  " << quote(e.parent) << " -> " << quote(e.child) << " [weight=" << format_double(e.weight)
        << "];\n";
  }
  out << "}\n";
  return out.str();
}

namespace {

/// Reader for the subset of DOT written by tree_to_dot.
class DotReader {
 public:
  explicit DotReader(const std::string& text) : s_(text) {}

  void skip_space() {
    while (p_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[p_]))) ++p_;
  }
  bool at_end() {
    skip_space();
    return p_ >= s_.size();
  }
  bool peek(char c) {
    skip_space();
    return p_ < s_.size() && s_[p_] == c;
  }
  bool peek_arrow() {
    skip_space();
    return s_.compare(p_, 2, "->") == 0;
  }
  void expect(const std::string& tok) {
    skip_space();
    if (s_.compare(p_, tok.size(), tok) != 0) fail("expected '" + tok + "'");
    p_ += tok.size();
  }
  std::string word() {
    skip_space();
    std::size_t start = p_;
    while (p_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[p_])) || s_[p_] == '_' ||
                              s_[p_] == '.' || s_[p_] == '-' || s_[p_] == '+')) {
      ++p_;
    }
    if (start == p_) fail("expected a word");
    return s_.substr(start, p_ - start);
  }
  std::string quoted() {
    skip_space();
    if (p_ >= s_.size() || s_[p_] != '"') fail("expected a quoted string");
    ++p_;
    std::string out;
    while (p_ < s_.size() && s_[p_] != '"') {
      char c = s_[p_++];
      if (c == '\\') {
        if (p_ >= s_.size()) fail("dangling escape");
        c = s_[p_++];
        if (c == 'n') c = '\n';
      }
      out.push_back(c);
    }
    if (p_ >= s_.size()) fail("unterminated string");
    ++p_;
    return out;
  }
  std::map<std::string, std::string> attributes() {
    std::map<std::string, std::string> attrs;
    expect("[");
    while (!peek(']')) {
      std::string key = word();
      expect("=");
      attrs[key] = peek('"') ? quoted() : word();
      if (peek(',')) expect(",");
    }
    expect("]");
    expect(";");
    return attrs;
  }
  [[noreturn]] void fail(const std::string& what) const {
    throw DataError("tree DOT parse error at offset " + std::to_string(p_) + ": " + what);
  }

 private:
  const std::string& s_;
  std::size_t p_ = 0;
};

std::size_t to_size(const std::string& s) {
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw DataError("bad integer in tree: " + s);
  return v;
}

const std::string& need(const std::map<std::string, std::string>& attrs, const std::string& key) {
  auto it = attrs.find(key);
  if (it == attrs.end()) throw DataError("tree DOT node lacks '" + key + "'");
  return it->second;
}

void check_edges(const TopicTree& tree) {
  std::set<std::string> ids;
  for (const auto& n : tree.nodes) {
    if (!ids.insert(n.id).second) throw DataError("duplicate tree node " + n.id);
  }
  for (const auto& e : tree.edges) {
    if (!ids.count(e.parent) || !ids.count(e.child)) throw DataError("tree edge references unknown node");
  }
}

}  // namespace

TopicTree tree_from_dot(const std::string& text) {
  DotReader r(text);
  TopicTree tree;
  r.expect("digraph");
  r.word();
  r.expect("{");
  while (!r.peek('}')) {
    std::string first = r.quoted();
    if (r.peek_arrow()) {
      r.expect("->");
      std::string second = r.quoted();
      auto attrs = r.attributes();
      const auto& w = need(attrs, "weight");
      double weight = 0.0;
      try {
        std::size_t used = 0;
        weight = std::stod(w, &used);
        if (used != w.size()) throw std::invalid_argument(w);
      } catch (const std::exception&) {
        throw DataError("bad edge weight in tree: " + w);
      }
      tree.edges.push_back({first, second, weight});
    } else {
      auto attrs = r.attributes();
      TreeNode n;
      n.id = first;
      const auto& kind = need(attrs, "kind");
      if (kind != "word" && kind != "factor") throw DataError("bad node kind in tree: " + kind);
      n.kind = kind == "word" ? TreeNode::Kind::word : TreeNode::Kind::factor;
      n.layer = to_size(need(attrs, "layer"));
      n.index = to_size(need(attrs, "index"));
      n.label = need(attrs, "label");
      n.anchored = need(attrs, "anchored") == "true";
      tree.nodes.push_back(std::move(n));
    }
  }
  r.expect("}");
  if (!r.at_end()) r.fail("trailing content");
  check_edges(tree);
  return tree;
}

nlohmann::json tree_to_json(const TopicTree& tree) {
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& n : tree.nodes) {
    nodes.push_back({{"id", n.id},
                     {"kind", n.kind == TreeNode::Kind::word ? "word" : "factor"},
                     {"layer", n.layer},
                     {"index", n.index},
                     {"label", n.label},
                     {"anchored", n.anchored}});
  }
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& e : tree.edges) {
    edges.push_back({{"parent", e.parent}, {"child", e.child}, {"weight", e.weight}});
  }
  return {{"nodes", nodes}, {"edges", edges}};
}

TopicTree tree_from_json(const nlohmann::json& j) {
  TopicTree tree;
  try {
    for (const auto& n : j.at("nodes")) {
      TreeNode node;
      node.id = n.at("id").get<std::string>();
      const auto kind = n.at("kind").get<std::string>();
      if (kind != "word" && kind != "factor") throw DataError("bad node kind in tree: " + kind);
      node.kind = kind == "word" ? TreeNode::Kind::word : TreeNode::Kind::factor;
      node.layer = n.at("layer").get<std::size_t>();
      node.index = n.at("index").get<std::size_t>();
      node.label = n.at("label").get<std::string>();
      node.anchored = n.at("anchored").get<bool>();
      tree.nodes.push_back(std::move(node));
    }
    for (const auto& e : j.at("edges")) {
      tree.edges.push_back(
          {e.at("parent").get<std::string>(), e.at("child").get<std::string>(), e.at("weight").get<double>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad tree JSON: ") + e.what());
  }
  check_edges(tree);
  return tree;
}

}  // namespace corex
