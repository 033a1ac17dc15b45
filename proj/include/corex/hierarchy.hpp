#ifndef COREX_HIERARCHY_HPP
#define COREX_HIERARCHY_HPP

#include <cstddef>
#include <string>
#include <vector>

#include <json.hpp>

#include "corex/corpus.hpp"
#include "corex/model.hpp"

namespace corex {

/// Present iff q[l,j,1] >= 0.5.
SparseBinaryMatrix hard_labels(const Posteriors& posteriors);

/// Layer k > 0 is fit on the hard labels of layer k-1 with seed + k and no anchors.
struct LayerStack {
  std::vector<std::size_t> layer_sizes;
  std::vector<FitResult> layers;
};

LayerStack fit_hierarchy(const SparseBinaryMatrix& data, const std::vector<std::size_t>& layer_sizes,
                         const FitConfig& config);

struct TreeNode {
  enum class Kind { word, factor };
  /// "w<i>" for words, "L<k>F<j>" for factors.
  std::string id;
  Kind kind = Kind::word;
  std::size_t layer = 0;  // always 0 for words
  std::size_t index = 0;  // word index or factor index
  /// Word term (with a trailing '*' when anchored) or the factor id.
  std::string label;
  bool anchored = false;

  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

struct TreeEdge {
  std::string parent;
  std::string child;
  double weight = 0.0;  // alpha * MI of the child under the parent, nats

  friend bool operator==(const TreeEdge&, const TreeEdge&) = default;
};

/// Factors ordered from the top layer down, then words in order of first use.
struct TopicTree {
  std::vector<TreeNode> nodes;
  std::vector<TreeEdge> edges;

  friend bool operator==(const TopicTree&, const TopicTree&) = default;
};

/// Leaves are the top `top` words of every layer-0 factor; upper-layer edges
/// link each factor to all lower factors it connects to (alpha > 0.5).
TopicTree export_tree(const LayerStack& stack, const Vocabulary& vocab, std::size_t top);

std::string tree_to_dot(const TopicTree& tree);
TopicTree tree_from_dot(const std::string& text);
nlohmann::json tree_to_json(const TopicTree& tree);
TopicTree tree_from_json(const nlohmann::json& j);

}  // namespace corex

#endif  // COREX_HIERARCHY_HPP
