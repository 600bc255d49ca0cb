#include "devlm/graphs.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <string>

#include "devlm/errors.hpp"
#include "devlm/logging.hpp"

namespace devlm {

const char* to_string(GraphMode mode) {
  return mode == GraphMode::kInductive ? "inductive" : "transductive";
}

GraphMode parse_graph_mode(const std::string& text) {
  if (text == "inductive") return GraphMode::kInductive;
  if (text == "transductive") return GraphMode::kTransductive;
  throw DomainError("unknown mode '" + text + "' (expected inductive or transductive)");
}

LinguisticGraph::LinguisticGraph(ModifierKind kind, std::size_t slots, std::size_t num_classes,
                                 std::vector<LinguisticNode> nodes)
    : kind_(kind), slots_(slots), num_classes_(num_classes), nodes_(std::move(nodes)) {
  cell_to_node_.assign(slots_ * num_classes_, std::nullopt);
  const std::size_t d = nodes_.empty() ? 0 : nodes_.front().embedding.size();
  cells_ = Matrix(slots_ * num_classes_, d);
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const auto& n = nodes_[i];
    if (n.slot >= slots_ || n.cls >= num_classes_) throw IndexError("LinguisticGraph: node out of grid");
    if (n.embedding.size() != d) throw ShapeError("LinguisticGraph: node dimensions differ");
    const std::size_t cell = cell_index(n.slot, n.cls);
    cell_to_node_[cell] = i;
    std::copy(n.embedding.begin(), n.embedding.end(), cells_.row(cell).begin());
  }
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    for (std::size_t j = i + 1; j < nodes_.size(); ++j) {
      if (nodes_[i].cls == nodes_[j].cls || nodes_[i].modifier == nodes_[j].modifier) {
        edges_.emplace_back(i, j);
      }
    }
  }
}

std::optional<std::size_t> LinguisticGraph::node_at(std::size_t slot, std::size_t cls) const {
  if (slot >= slots_ || cls >= num_classes_) return std::nullopt;
  return cell_to_node_[cell_index(slot, cls)];
}

std::vector<std::size_t> LinguisticGraph::nodes_of_class(std::size_t cls) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    if (nodes_[i].cls == cls) out.push_back(i);
  return out;
}

bool LinguisticGraph::has_class(std::size_t cls) const {
  return std::any_of(nodes_.begin(), nodes_.end(), [&](const auto& n) { return n.cls == cls; });
}

VisualGraph::VisualGraph(std::vector<VisualNode> nodes) : nodes_(std::move(nodes)) {
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    for (std::size_t j = i + 1; j < nodes_.size(); ++j)
      if (nodes_[i].cls == nodes_[j].cls) edges_.emplace_back(i, j);
}

std::vector<std::size_t> VisualGraph::nodes_of_class(std::size_t cls) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    if (nodes_[i].cls == cls) out.push_back(i);
  return out;
}

std::vector<std::size_t> VisualGraph::classes() const {
  std::set<std::size_t> seen;
  for (const auto& n : nodes_) seen.insert(n.cls);
  return {seen.begin(), seen.end()};
}

ProjectionWeights ProjectionWeights::initial(std::size_t d, std::size_t groups, std::uint64_t seed) {
  if (groups == 0 || d % groups != 0) {
    throw DomainError("ProjectionWeights: group count " + std::to_string(groups) +
                      " does not divide dimension " + std::to_string(d));
  }
  ProjectionWeights w;
  w.spatial = Matrix::identity(d);
  w.channel = Matrix(d, d / groups);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  for (double& x : w.channel.values()) x = normal(rng) * scale;
  return w;
}

LinguisticGraph build_linguistic_graph(const KnowledgeBase& kb, ModifierKind kind, std::size_t m,
                                       GraphMode mode) {
  const auto& names = kb.modifiers(kind);
  if (m == 0 || m > names.size()) {
    throw DomainError("build_linguistic_graph: M=" + std::to_string(m) + " exceeds the " +
                      std::to_string(names.size()) + " available " + to_string(kind) + "s");
  }
  std::vector<LinguisticNode> nodes;
  const std::size_t included =
      mode == GraphMode::kTransductive ? kb.num_classes() : kb.num_seen();
  for (std::size_t cls = 0; cls < included; ++cls) {
    const auto ranked = kb.ranked_modifiers(kind, cls);
    for (std::size_t slot = 0; slot < m; ++slot) {
      const auto it = kb.phrases(kind).find({ranked[slot], cls});
      if (it == kb.phrases(kind).end()) {
        throw ValidationError(std::string("build_linguistic_graph: missing ") + to_string(kind) +
                              " phrase embedding for '" + names[ranked[slot]] + "|" +
                              kb.class_name(cls) + "'");
      }
      nodes.push_back({it->second, ranked[slot], cls, slot});
    }
  }
  return LinguisticGraph(kind, m, kb.num_classes(), std::move(nodes));
}

VisualGraph build_spatial_visual_graph(const LabeledEmbeddings& matched, const Matrix& unmatched,
                                       std::size_t k, const ProjectionWeights& weights) {
  if (k < 2) throw DomainError("build_spatial_visual_graph: k must be at least 2");
  if (matched.size() == 0) throw DomainError("build_spatial_visual_graph: no matched queries");
  if (matched.classes.size() != matched.size()) {
    throw ShapeError("build_spatial_visual_graph: class tags do not match query count");
  }
  std::vector<VisualNode> nodes;
  if (unmatched.rows() == 0) return VisualGraph(std::move(nodes));
  if (unmatched.cols() != matched.vectors.cols()) {
    throw ShapeError("build_spatial_visual_graph: matched/unmatched dimensions differ");
  }
  const std::set<std::size_t> classes(matched.classes.begin(), matched.classes.end());
  for (std::size_t cls : classes) {
    Vector sims(unmatched.rows(), -2.0);
    for (std::size_t q = 0; q < matched.size(); ++q) {
      if (matched.classes[q] != cls) continue;
      for (std::size_t u = 0; u < unmatched.rows(); ++u) {
        sims[u] = std::max(sims[u], cosine_similarity(matched.vectors.row(q), unmatched.row(u)));
      }
    }
    for (std::size_t u : top_k_indices(sims, k - 1)) {
      nodes.push_back({matvec(weights.spatial, unmatched.row(u)), cls, VisualOrigin::kQuery, u, 0});
    }
  }
  return VisualGraph(std::move(nodes));
}

VisualGraph build_channel_visual_graph(const LabeledEmbeddings& matched, std::size_t groups,
                                       const ProjectionWeights& weights) {
  const std::size_t d = matched.vectors.cols();
  if (groups == 0 || d % groups != 0) {
    throw DomainError("build_channel_visual_graph: R=" + std::to_string(groups) +
                      " does not divide d=" + std::to_string(d));
  }
  const std::size_t width = d / groups;
  if (weights.channel.cols() != width) {
    throw ShapeError("build_channel_visual_graph: channel map expects groups of " +
                     std::to_string(weights.channel.cols()) + " channels, got " +
                     std::to_string(width));
  }
  if (matched.classes.size() != matched.size() || matched.class_probs.size() != matched.size()) {
    throw ShapeError("build_channel_visual_graph: class tags/probabilities do not match query count");
  }
  std::vector<VisualNode> nodes;
  const std::set<std::size_t> classes(matched.classes.begin(), matched.classes.end());
  for (std::size_t cls : classes) {
    std::optional<std::size_t> best;
    for (std::size_t q = 0; q < matched.size(); ++q) {
      if (matched.classes[q] != cls) continue;
      if (!best || matched.class_probs[q] > matched.class_probs[*best]) best = q;
    }
    auto query = matched.vectors.row(*best);
    for (std::size_t r = 0; r < groups; ++r) {
      nodes.push_back({matvec(weights.channel, query.subspan(r * width, width)), cls,
                       VisualOrigin::kChannelGroup, *best, r});
    }
  }
  return VisualGraph(std::move(nodes));
}

TriStateLabelMatrix derive_supervision_mask(std::size_t m_star, const LinguisticGraph& graph,
                                            std::size_t visual_class) {
  TriStateLabelMatrix labels(graph.slots(), graph.num_classes(), Label::kIgnore);
  for (const auto& node : graph.nodes()) {
    Label l = Label::kIgnore;
    if (node.modifier == m_star) {
      l = Label::kPositive;
    } else if (node.cls != visual_class) {
      l = Label::kNegative;
    }
    labels.at(node.slot, node.cls) = l;
  }
  return labels;
}

std::size_t ClassMatch::distinct_matches() const {
  return std::set<std::size_t>(linguistic_nodes.begin(), linguistic_nodes.end()).size();
}

ClassMatch match_class_subgraphs(const VisualGraph& vgraph, const LinguisticGraph& lgraph,
                                 std::size_t cls, const MatchOptions& options) {
  ClassMatch out;
  out.cls = cls;
  out.visual_nodes = vgraph.nodes_of_class(cls);
  const auto lnodes = lgraph.nodes_of_class(cls);
  if (out.visual_nodes.empty() || lnodes.empty()) {
    out.visual_nodes.clear();
    out.skipped = true;
    log_debug("match_class_subgraphs: class " + std::to_string(cls) +
              " absent from a graph, skipped");
    return out;
  }
  std::vector<Vector> vrows, lrows;
  for (std::size_t i : out.visual_nodes) vrows.push_back(vgraph.nodes()[i].embedding);
  for (std::size_t j : lnodes) lrows.push_back(lgraph.nodes()[j].embedding);
  out.affinity = affinity_matrix(Matrix::from_rows(vrows), Matrix::from_rows(lrows));

  std::vector<std::size_t> cols;
  if (options.use_sinkhorn) {
    const auto marginals = MarginalSpec::for_subgraph(vrows.size(), lrows.size());
    out.plan = sinkhorn_normalize(out.affinity, marginals, options.sinkhorn);
    cols = argmax_match(*out.plan);
  } else {
    cols = argmax_match(out.affinity);
  }
  for (std::size_t c : cols) out.linguistic_nodes.push_back(lnodes[c]);
  return out;
}

}  // namespace devlm
