#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "devlm/knowledge_base.hpp"
#include "devlm/losses.hpp"
#include "devlm/sinkhorn.hpp"
#include "devlm/tensor.hpp"

namespace devlm {

enum class GraphMode { kInductive, kTransductive };

const char* to_string(GraphMode mode);
/// Parses "inductive" / "transductive"; throws DomainError otherwise.
GraphMode parse_graph_mode(const std::string& text);

struct LinguisticNode {
  Vector embedding;
  std::size_t modifier = 0;
  std::size_t cls = 0;
  std::size_t slot = 0;  // rank of the modifier within its class
};

/// Phrase-embedding graph with exactly M nodes per included class. Nodes are
/// stored class-major; edges join nodes that share a class or a modifier.
class LinguisticGraph {
 public:
  LinguisticGraph() = default;
  LinguisticGraph(ModifierKind kind, std::size_t slots, std::size_t num_classes,
                  std::vector<LinguisticNode> nodes);

  ModifierKind kind() const { return kind_; }
  std::size_t slots() const { return slots_; }
  std::size_t num_classes() const { return num_classes_; }
  const std::vector<LinguisticNode>& nodes() const { return nodes_; }
  const std::vector<std::pair<std::size_t, std::size_t>>& edges() const { return edges_; }

  std::optional<std::size_t> node_at(std::size_t slot, std::size_t cls) const;
  std::vector<std::size_t> nodes_of_class(std::size_t cls) const;
  bool has_class(std::size_t cls) const;

  /// One row per (slot, class) cell, slot-major; zero rows for cells without a node.
  const Matrix& cell_embeddings() const { return cells_; }
  std::size_t cell_index(std::size_t slot, std::size_t cls) const { return slot * num_classes_ + cls; }

 private:
  ModifierKind kind_ = ModifierKind::kPart;
  std::size_t slots_ = 0;
  std::size_t num_classes_ = 0;
  std::vector<LinguisticNode> nodes_;
  std::vector<std::pair<std::size_t, std::size_t>> edges_;
  std::vector<std::optional<std::size_t>> cell_to_node_;
  Matrix cells_;
};

enum class VisualOrigin : std::uint8_t { kQuery, kChannelGroup };

struct VisualNode {
  Vector embedding;
  std::size_t cls = 0;
  VisualOrigin origin = VisualOrigin::kQuery;
  std::size_t source = 0;  // index into the input embedding set
  std::size_t group = 0;   // channel group, 0 for query nodes
};

class VisualGraph {
 public:
  VisualGraph() = default;
  explicit VisualGraph(std::vector<VisualNode> nodes);

  const std::vector<VisualNode>& nodes() const { return nodes_; }
  const std::vector<std::pair<std::size_t, std::size_t>>& edges() const { return edges_; }
  std::vector<std::size_t> nodes_of_class(std::size_t cls) const;
  /// Classes with at least one node, ascending.
  std::vector<std::size_t> classes() const;

 private:
  std::vector<VisualNode> nodes_;
  std::vector<std::pair<std::size_t, std::size_t>> edges_;
};

/// Linear maps applied to graph nodes. `channel` is d x (d/R): it maps one
/// channel group back to a d-dimensional node.
struct ProjectionWeights {
  Matrix spatial;
  Matrix channel;

  /// Spatial map = identity; channel map = seeded Gaussian scaled by 1/sqrt(d).
  static ProjectionWeights initial(std::size_t d, std::size_t groups, std::uint64_t seed);
  std::size_t dim() const { return spatial.rows(); }
  std::size_t group_width() const { return channel.cols(); }
};

/// Query embeddings with their ground-truth class and predicted probability
/// for that class.
struct LabeledEmbeddings {
  Matrix vectors;
  std::vector<std::size_t> classes;
  std::vector<double> class_probs;

  std::size_t size() const { return vectors.rows(); }
};

LinguisticGraph build_linguistic_graph(const KnowledgeBase& kb, ModifierKind kind, std::size_t m,
                                       GraphMode mode);

/// Per class in the batch: the k-1 unmatched queries most similar (cosine,
/// max over that class's matched queries) pass through the spatial map.
VisualGraph build_spatial_visual_graph(const LabeledEmbeddings& matched, const Matrix& unmatched,
                                       std::size_t k, const ProjectionWeights& weights);

/// Per class: the matched query with the highest class probability is cut into
/// R contiguous channel groups, each mapped to a node by the channel map.
VisualGraph build_channel_visual_graph(const LabeledEmbeddings& matched, std::size_t groups,
                                       const ProjectionWeights& weights);

/// Labels for one visual node of `visual_class` matched to modifier m_star:
/// positive where the modifier equals m_star, negative where both modifier and
/// class differ, ignore otherwise (and for cells without a node).
TriStateLabelMatrix derive_supervision_mask(std::size_t m_star, const LinguisticGraph& graph,
                                            std::size_t visual_class);

struct MatchOptions {
  SinkhornOptions sinkhorn;
  bool use_sinkhorn = true;  // false: raw row-wise argmax of the affinity
};

struct ClassMatch {
  std::size_t cls = 0;
  std::vector<std::size_t> visual_nodes;      // indices into the visual graph
  std::vector<std::size_t> linguistic_nodes;  // matched index per visual node
  Matrix affinity;
  std::optional<TransportPlan> plan;
  bool skipped = false;

  std::size_t distinct_matches() const;
};

/// Matches the class-c subgraphs: cosine affinity, Sinkhorn under the subgraph
/// marginals, then row-wise argmax. A class missing from either graph yields a
/// skipped, empty result.
ClassMatch match_class_subgraphs(const VisualGraph& vgraph, const LinguisticGraph& lgraph,
                                 std::size_t cls, const MatchOptions& options = {});

}  // namespace devlm
