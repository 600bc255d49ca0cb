#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "devlm/benchmark.hpp"
#include "devlm/graphs.hpp"
#include "devlm/knowledge_base.hpp"
#include "devlm/losses.hpp"
#include "devlm/tensor.hpp"

namespace devlm {

struct TrainConfig {
  std::size_t k = 3;
  std::size_t R = 4;
  double alpha = 2.0;
  double beta = 2.0;
  double tau = 0.01;
  std::size_t M = 10;
  double epsilon = 0.1;
  std::size_t max_iter = 1000;
  double tol = 1e-6;
  double learning_rate = 0.05;
  std::size_t steps = 200;
  std::uint64_t seed = 0;
  GraphMode mode = GraphMode::kTransductive;
  bool enable_sp = true;
  bool enable_cs = true;
  bool enable_sinkhorn = true;
  std::size_t batch_size = 8;
  double lambda_mask = 1.0;
  Reduction graph_reduction = Reduction::kSum;
  MaskLossOptions mask;

  /// Checks numeric ranges; `d` (when non-zero) also checks R | d.
  void validate(std::size_t d = 0) const;
  bool sp_active() const { return enable_sp && alpha != 0.0; }
  bool cs_active() const { return enable_cs && beta != 0.0; }
};

/// Parses a config document. Unknown keys and ill-typed values raise
/// ValidationError naming the field.
TrainConfig train_config_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const TrainConfig& config);

/// Mean feature and binary mask of one ground-truth part region.
struct Query {
  Vector feature;
  Vector mask;
};

/// One ground-truth object: class and binary mask.
struct GroundTruth {
  std::size_t cls = 0;
  Vector mask;
};

/// Desk-scale stand-ins for decoder queries: one query per connected part
/// region of every object, in object then region order.
std::vector<Query> scene_queries(const ToyScene& scene);
std::vector<GroundTruth> scene_ground_truths(const ToyScene& scene);

/// Training-time classification targets: row 0 is the "no object" embedding,
/// rows 1.. are the seen class embeddings.
EmbeddingSet training_class_embeddings(const KnowledgeBase& kb);

struct MatchingDiagnostics {
  std::size_t sp_matches = 0;        // class subgraph matchings performed
  std::size_t sp_distinct = 0;       // summed distinct linguistic nodes over them
  std::size_t cs_matches = 0;
  std::size_t cs_distinct = 0;
  double max_marginal_error = 0.0;
  std::size_t unconverged_plans = 0;

  double sp_distinct_per_class() const;
  double cs_distinct_per_class() const;
};

struct Model {
  std::size_t dim = 0;
  std::size_t groups = 0;
  Matrix semantic;  // d x d semantic projection
  ProjectionWeights weights;
  GraphMode mode = GraphMode::kTransductive;
  bool unseen_nodes_excluded = false;
  MatchingDiagnostics diagnostics;

  static Model initial(std::size_t d, const TrainConfig& config);
  Vector embed(std::span<const double> feature) const { return matvec(semantic, feature); }
};

nlohmann::json to_json(const Model& model);
Model model_from_json(const nlohmann::json& doc);

struct StepLog {
  std::size_t step = 0;
  double l_mask = 0.0;
  double l_match = 0.0;
  double l_sp = 0.0;
  double l_cs = 0.0;
  double total = 0.0;
};

struct TrainResult {
  Model model;
  std::vector<StepLog> log;
};

/// Raised when a loss component turns non-finite; the message names the step
/// and the component values.
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Plain gradient descent on the joint objective over the training scenes,
/// batch_size scenes per step in a fixed cyclic order.
TrainResult train(const TrainConfig& config, const SceneSet& data, const KnowledgeBase& kb);

/// "step,l_mask,l_match,l_sp,l_cs,total" header plus one row per step.
std::string training_log_csv(const std::vector<StepLog>& log);

struct MetricsReport {
  std::vector<std::string> class_names;
  std::vector<bool> class_seen;
  std::vector<std::optional<double>> class_iou;  // fraction; nullopt = absent from ground truth
  std::vector<std::vector<std::uint64_t>> confusion;  // [ground truth][prediction]
  double seen_miou = 0.0;    // percent
  double unseen_miou = 0.0;  // percent
  double harmonic = 0.0;     // percent
  GraphMode mode = GraphMode::kTransductive;
  bool unseen_nodes_excluded = false;
  MatchingDiagnostics diagnostics;
};

/// Cell-wise argmax of cos(model(feature), class embedding) over every class.
MetricsReport evaluate(const Model& model, const std::vector<ToyScene>& scenes,
                       const KnowledgeBase& kb, GraphMode mode);

/// Builds the report from a confusion matrix (rows ground truth).
MetricsReport report_from_confusion(std::vector<std::vector<std::uint64_t>> confusion,
                                    const std::vector<std::string>& names,
                                    const std::vector<bool>& seen);

/// 2 s u / (s + u); 0 when both are 0.
double harmonic_mean(double seen, double unseen);

/// Rounds to one decimal place, as the reported tables do.
double round1(double value);

nlohmann::json to_json(const MetricsReport& report);
std::string metrics_table(const MetricsReport& report);

}  // namespace devlm
