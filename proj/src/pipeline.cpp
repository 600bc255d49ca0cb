#include "devlm/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "devlm/assignment.hpp"
#include "devlm/errors.hpp"
#include "devlm/json_io.hpp"
#include "devlm/logging.hpp"

namespace devlm {

namespace {

template <typename T>
void read_field(const nlohmann::json& doc, const char* key, T& out) {
  if (!doc.contains(key)) return;
  const auto& v = doc.at(key);
  try {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ValidationError("expected a boolean");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer() || (v.is_number_integer() && v.get<long long>() < 0)) {
        throw ValidationError("expected a non-negative integer");
      }
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ValidationError("expected a number");
    }
    out = v.get<T>();
  } catch (const std::exception& e) {
    throw ValidationError(std::string("config field '") + key + "': " + e.what());
  }
}

}  // namespace

void TrainConfig::validate(std::size_t d) const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw ValidationError("config field '" + field + "': " + why);
  };
  if (k < 2) fail("k", "must be at least 2");
  if (R == 0) fail("R", "must be positive");
  if (d != 0 && d % R != 0) fail("R", std::to_string(R) + " does not divide d=" + std::to_string(d));
  if (!(tau > 0.0)) fail("tau", "must be positive");
  if (M == 0) fail("M", "must be positive");
  if (!(epsilon > 0.0)) fail("epsilon", "must be positive");
  if (max_iter == 0) fail("max_iter", "must be positive");
  if (!(tol > 0.0)) fail("tol", "must be positive");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) fail("learning_rate", "must be >= 0");
  if (!std::isfinite(alpha) || alpha < 0.0) fail("alpha", "must be finite and >= 0");
  if (!std::isfinite(beta) || beta < 0.0) fail("beta", "must be finite and >= 0");
  if (batch_size == 0) fail("batch_size", "must be positive");
  if (!(lambda_mask >= 0.0)) fail("lambda_mask", "must be >= 0");
  if (!(mask.dice_smoothing >= 0.0)) fail("dice_smoothing", "must be >= 0");
  if (!(mask.focal_gamma >= 0.0)) fail("focal_gamma", "must be >= 0");
  if (!(mask.focal_alpha > 0.0 && mask.focal_alpha < 1.0)) fail("focal_alpha", "must lie in (0, 1)");
}

TrainConfig train_config_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ValidationError("config: top level must be an object");
  static const std::set<std::string> kKnown = {
      "k",        "R",          "alpha",      "beta",           "tau",
      "M",        "epsilon",    "max_iter",   "tol",            "learning_rate",
      "steps",    "seed",       "mode",       "enable_sp",      "enable_cs",
      "enable_sinkhorn", "batch_size", "lambda_mask", "graph_reduction", "dice_smoothing",
      "focal_gamma", "focal_alpha"};
  for (const auto& [key, _] : doc.items()) {
    if (!kKnown.count(key)) throw ValidationError("config field '" + key + "': unknown key");
  }
  TrainConfig c;
  read_field(doc, "k", c.k);
  read_field(doc, "R", c.R);
  read_field(doc, "alpha", c.alpha);
  read_field(doc, "beta", c.beta);
  read_field(doc, "tau", c.tau);
  read_field(doc, "M", c.M);
  read_field(doc, "epsilon", c.epsilon);
  read_field(doc, "max_iter", c.max_iter);
  read_field(doc, "tol", c.tol);
  read_field(doc, "learning_rate", c.learning_rate);
  read_field(doc, "steps", c.steps);
  read_field(doc, "seed", c.seed);
  read_field(doc, "enable_sp", c.enable_sp);
  read_field(doc, "enable_cs", c.enable_cs);
  read_field(doc, "enable_sinkhorn", c.enable_sinkhorn);
  read_field(doc, "batch_size", c.batch_size);
  read_field(doc, "lambda_mask", c.lambda_mask);
  read_field(doc, "dice_smoothing", c.mask.dice_smoothing);
  read_field(doc, "focal_gamma", c.mask.focal_gamma);
  read_field(doc, "focal_alpha", c.mask.focal_alpha);
  if (doc.contains("mode")) {
    if (!doc.at("mode").is_string()) throw ValidationError("config field 'mode': expected a string");
    try {
      c.mode = parse_graph_mode(doc.at("mode").get<std::string>());
    } catch (const DomainError& e) {
      throw ValidationError(std::string("config field 'mode': ") + e.what());
    }
  }
  if (doc.contains("graph_reduction")) {
    const auto& v = doc.at("graph_reduction");
    if (v == "sum") {
      c.graph_reduction = Reduction::kSum;
    } else if (v == "mean") {
      c.graph_reduction = Reduction::kMean;
    } else {
      throw ValidationError("config field 'graph_reduction': expected \"sum\" or \"mean\"");
    }
  }
  c.validate();
  return c;
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"k", c.k},
          {"R", c.R},
          {"alpha", c.alpha},
          {"beta", c.beta},
          {"tau", c.tau},
          {"M", c.M},
          {"epsilon", c.epsilon},
          {"max_iter", c.max_iter},
          {"tol", c.tol},
          {"learning_rate", c.learning_rate},
          {"steps", c.steps},
          {"seed", c.seed},
          {"mode", to_string(c.mode)},
          {"enable_sp", c.enable_sp},
          {"enable_cs", c.enable_cs},
          {"enable_sinkhorn", c.enable_sinkhorn},
          {"batch_size", c.batch_size},
          {"lambda_mask", c.lambda_mask},
          {"graph_reduction", c.graph_reduction == Reduction::kSum ? "sum" : "mean"},
          {"dice_smoothing", c.mask.dice_smoothing},
          {"focal_gamma", c.mask.focal_gamma},
          {"focal_alpha", c.mask.focal_alpha}};
}

std::vector<Query> scene_queries(const ToyScene& scene) {
  std::vector<Query> out;
  const std::size_t d = scene.features.cols();
  for (const auto& obj : scene.objects) {
    for (const auto& region : obj.regions) {
      Query q{Vector(d, 0.0), Vector(scene.cell_count(), 0.0)};
      for (std::size_t cell : region.cells) {
        axpy(1.0, scene.features.row(cell), q.feature);
        q.mask[cell] = 1.0;
      }
      for (double& x : q.feature) x /= static_cast<double>(region.cells.size());
      out.push_back(std::move(q));
    }
  }
  return out;
}

std::vector<GroundTruth> scene_ground_truths(const ToyScene& scene) {
  std::vector<GroundTruth> out;
  for (const auto& obj : scene.objects) {
    GroundTruth gt{obj.cls, Vector(scene.cell_count(), 0.0)};
    for (std::size_t cell : obj.cells()) gt.mask[cell] = 1.0;
    out.push_back(std::move(gt));
  }
  return out;
}

EmbeddingSet training_class_embeddings(const KnowledgeBase& kb) {
  const std::size_t d = kb.dim();
  Vector no_object(d, 0.0);
  for (std::size_t c = 0; c < kb.num_seen(); ++c) axpy(-1.0, kb.class_embeddings.row(c), no_object);
  if (!(norm(no_object) > 1e-12)) {
    no_object.assign(d, 0.0);
    no_object[0] = 1.0;
  }
  std::vector<Vector> rows{normalized(no_object)};
  std::vector<std::string> tags{"no_object"};
  for (std::size_t c = 0; c < kb.num_seen(); ++c) {
    rows.push_back(kb.class_embeddings.row_copy(c));
    tags.push_back(kb.seen_classes[c]);
  }
  return EmbeddingSet::from_rows(rows, tags);
}

double MatchingDiagnostics::sp_distinct_per_class() const {
  return sp_matches == 0 ? 0.0 : static_cast<double>(sp_distinct) / static_cast<double>(sp_matches);
}

double MatchingDiagnostics::cs_distinct_per_class() const {
  return cs_matches == 0 ? 0.0 : static_cast<double>(cs_distinct) / static_cast<double>(cs_matches);
}

Model Model::initial(std::size_t d, const TrainConfig& config) {
  Model m;
  m.dim = d;
  m.groups = config.R;
  m.semantic = Matrix::identity(d);
  m.weights = ProjectionWeights::initial(d, config.R, config.seed);
  m.mode = config.mode;
  m.unseen_nodes_excluded = config.mode == GraphMode::kInductive;
  return m;
}

namespace {

nlohmann::json diagnostics_to_json(const MatchingDiagnostics& d) {
  return {{"sp_matches", d.sp_matches},
          {"sp_distinct", d.sp_distinct},
          {"sp_distinct_per_class", d.sp_distinct_per_class()},
          {"cs_matches", d.cs_matches},
          {"cs_distinct", d.cs_distinct},
          {"cs_distinct_per_class", d.cs_distinct_per_class()},
          {"max_marginal_error", d.max_marginal_error},
          {"unconverged_plans", d.unconverged_plans}};
}

MatchingDiagnostics diagnostics_from_json(const nlohmann::json& j) {
  MatchingDiagnostics d;
  d.sp_matches = j.at("sp_matches").get<std::size_t>();
  d.sp_distinct = j.at("sp_distinct").get<std::size_t>();
  d.cs_matches = j.at("cs_matches").get<std::size_t>();
  d.cs_distinct = j.at("cs_distinct").get<std::size_t>();
  d.max_marginal_error = j.at("max_marginal_error").get<double>();
  d.unconverged_plans = j.at("unconverged_plans").get<std::size_t>();
  return d;
}

}  // namespace

nlohmann::json to_json(const Model& m) {
  return {{"dim", m.dim},
          {"groups", m.groups},
          {"mode", to_string(m.mode)},
          {"unseen_nodes_excluded", m.unseen_nodes_excluded},
          {"semantic_projection", io::to_json(m.semantic)},
          {"spatial_projection", io::to_json(m.weights.spatial)},
          {"channel_projection", io::to_json(m.weights.channel)},
          {"diagnostics", diagnostics_to_json(m.diagnostics)}};
}

Model model_from_json(const nlohmann::json& doc) {
  Model m;
  try {
    m.dim = doc.at("dim").get<std::size_t>();
    m.groups = doc.at("groups").get<std::size_t>();
    m.mode = parse_graph_mode(doc.at("mode").get<std::string>());
    m.unseen_nodes_excluded = doc.at("unseen_nodes_excluded").get<bool>();
    m.semantic = io::matrix_from_json(doc.at("semantic_projection"), "semantic_projection");
    m.weights.spatial = io::matrix_from_json(doc.at("spatial_projection"), "spatial_projection");
    m.weights.channel = io::matrix_from_json(doc.at("channel_projection"), "channel_projection");
    m.diagnostics = diagnostics_from_json(doc.at("diagnostics"));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("model: ") + e.what());
  }
  if (m.semantic.rows() != m.dim || m.semantic.cols() != m.dim) {
    throw ValidationError("model: semantic projection must be dim x dim");
  }
  return m;
}

namespace {

// Per-step working state for one batch of scenes.
struct BatchState {
  std::vector<Vector> features;    // mean query features, batch-wide
  std::vector<Vector> embeddings;  // semantic embeddings W x
  std::vector<Vector> grads;       // dL/d embedding
  LabeledEmbeddings matched;
  std::vector<std::size_t> matched_src;
  std::vector<Vector> unmatched_rows;
  std::vector<std::size_t> unmatched_src;
};

// Matches every class subgraph, derives supervision and accumulates the
// squared matching loss gradients into the projection and the embeddings.
double graph_branch(const VisualGraph& vgraph, const LinguisticGraph& lgraph,
                    const TrainConfig& config, const MatchOptions& options, double weight,
                    const std::vector<std::size_t>& node_src, BatchState& batch, Matrix& proj,
                    Matrix& proj_grad, bool channel_groups, std::size_t group_width,
                    std::size_t& match_count, std::size_t& distinct_count,
                    MatchingDiagnostics& diag) {
  std::vector<Vector> node_rows;
  std::vector<std::size_t> node_ids;
  std::vector<TriStateLabelMatrix> labels;
  for (std::size_t cls : vgraph.classes()) {
    const ClassMatch cm = match_class_subgraphs(vgraph, lgraph, cls, options);
    if (cm.skipped) continue;
    ++match_count;
    distinct_count += cm.distinct_matches();
    if (cm.plan) {
      diag.max_marginal_error = std::max(diag.max_marginal_error, cm.plan->marginal_error);
      if (!cm.plan->converged) ++diag.unconverged_plans;
    }
    for (std::size_t i = 0; i < cm.visual_nodes.size(); ++i) {
      const std::size_t m_star = lgraph.nodes()[cm.linguistic_nodes[i]].modifier;
      labels.push_back(derive_supervision_mask(m_star, lgraph, cls));
      node_rows.push_back(vgraph.nodes()[cm.visual_nodes[i]].embedding);
      node_ids.push_back(cm.visual_nodes[i]);
    }
  }
  if (node_rows.empty()) return 0.0;
  const Matrix nodes = Matrix::from_rows(node_rows);
  const LossResult loss =
      graph_matching_loss(nodes, lgraph.cell_embeddings(), labels, config.tau, config.graph_reduction);
  const std::size_t d = nodes.cols();
  for (std::size_t j = 0; j < node_ids.size(); ++j) {
    const VisualNode& vn = vgraph.nodes()[node_ids[j]];
    const std::span<const double> g(loss.gradient.data() + j * d, d);
    const std::size_t q = node_src[vn.source];
    if (channel_groups) {
      auto slice = std::span<const double>(batch.embeddings[q]).subspan(vn.group * group_width, group_width);
      add_outer(proj_grad, g, slice, weight);
      const Vector back = matvec_transposed(proj, g);
      axpy(weight, back, std::span<double>(batch.grads[q]).subspan(vn.group * group_width, group_width));
    } else {
      add_outer(proj_grad, g, batch.embeddings[q], weight);
      axpy(weight, matvec_transposed(proj, g), batch.grads[q]);
    }
  }
  return loss.value;
}

}  // namespace

TrainResult train(const TrainConfig& config, const SceneSet& data, const KnowledgeBase& kb) {
  const std::size_t d = kb.dim();
  config.validate(d);
  if (data.train.empty()) throw ValidationError("train: no training scenes");
  for (const auto& s : data.train) {
    if (s.features.cols() != d) throw ShapeError("train: scene feature dimension differs from the knowledge base");
  }

  TrainResult result;
  result.model = Model::initial(d, config);
  Model& model = result.model;
  const EmbeddingSet class_emb = training_class_embeddings(kb);
  const MatchOptions options{{config.epsilon, config.max_iter, config.tol}, config.enable_sinkhorn};

  LinguisticGraph part_graph, state_graph;
  if (config.sp_active()) part_graph = build_linguistic_graph(kb, ModifierKind::kPart, config.M, config.mode);
  if (config.cs_active()) state_graph = build_linguistic_graph(kb, ModifierKind::kState, config.M, config.mode);

  std::vector<std::vector<Query>> queries;
  std::vector<std::vector<GroundTruth>> truths;
  for (const auto& s : data.train) {
    queries.push_back(scene_queries(s));
    truths.push_back(scene_ground_truths(s));
  }

  const std::size_t n_scenes = data.train.size();
  const std::size_t batch_size = std::min(config.batch_size, n_scenes);
  for (std::size_t step = 0; step < config.steps; ++step) {
    BatchState batch;
    batch.matched.vectors = Matrix(0, d);
    double mask_sum = 0.0;
    double match_sum = 0.0;
    std::size_t pairs = 0;
    std::vector<std::pair<std::size_t, Vector>> match_grads;

    for (std::size_t b = 0; b < batch_size; ++b) {
      const std::size_t s = (step * batch_size + b) % n_scenes;
      const auto& qs = queries[s];
      const auto& gts = truths[s];
      const std::size_t base = batch.features.size();
      Matrix probs(qs.size(), class_emb.size());
      std::vector<Vector> masks;
      for (std::size_t i = 0; i < qs.size(); ++i) {
        batch.features.push_back(qs[i].feature);
        batch.embeddings.push_back(model.embed(qs[i].feature));
        batch.grads.emplace_back(d, 0.0);
        Vector logits(class_emb.size());
        for (std::size_t c = 0; c < class_emb.size(); ++c)
          logits[c] = cosine_similarity(batch.embeddings.back(), class_emb[c]);
        const Vector p = softmax_with_temperature(logits, config.tau);
        std::copy(p.begin(), p.end(), probs.row(i).begin());
        masks.push_back(qs[i].mask);
      }
      std::vector<std::size_t> gt_classes;
      std::vector<Vector> gt_masks;
      for (const auto& gt : gts) {
        gt_classes.push_back(gt.cls + 1);
        gt_masks.push_back(gt.mask);
      }
      const Matrix cost =
          build_assignment_cost(probs, masks, gt_classes, gt_masks, config.lambda_mask, config.mask);
      const AssignmentResult assignment = hungarian(cost);
      for (const auto& [qi, g] : assignment.pairs) {
        const std::size_t q = base + qi;
        mask_sum += dice_loss(masks[qi], gt_masks[g], config.mask.dice_smoothing).value +
                    focal_loss(masks[qi], gt_masks[g], config.mask.focal_gamma, config.mask.focal_alpha).value;
        LossResult lm = classification_match_loss(batch.embeddings[q], class_emb, gt_classes[g], config.tau);
        match_sum += lm.value;
        match_grads.emplace_back(q, std::move(lm.gradient));
        ++pairs;
        batch.matched_src.push_back(q);
        batch.matched.classes.push_back(gts[g].cls);
        batch.matched.class_probs.push_back(probs(qi, gt_classes[g]));
      }
      for (std::size_t qi : assignment.unmatched_queries) {
        batch.unmatched_src.push_back(base + qi);
        batch.unmatched_rows.push_back(batch.embeddings[base + qi]);
      }
    }

    StepLog log;
    log.step = step + 1;
    const double inv_pairs = pairs > 0 ? 1.0 / static_cast<double>(pairs) : 0.0;
    log.l_mask = mask_sum * inv_pairs;
    log.l_match = match_sum * inv_pairs;
    for (const auto& [q, g] : match_grads) axpy(inv_pairs, g, batch.grads[q]);

    std::vector<Vector> matched_rows;
    for (std::size_t q : batch.matched_src) matched_rows.push_back(batch.embeddings[q]);
    batch.matched.vectors = matched_rows.empty() ? Matrix(0, d) : Matrix::from_rows(matched_rows);

    Matrix spatial_grad(d, d);
    Matrix channel_grad(model.weights.channel.rows(), model.weights.channel.cols());
    if (config.sp_active() && batch.matched.size() > 0 && !batch.unmatched_rows.empty()) {
      const VisualGraph vgraph = build_spatial_visual_graph(
          batch.matched, Matrix::from_rows(batch.unmatched_rows), config.k, model.weights);
      log.l_sp = graph_branch(vgraph, part_graph, config, options, config.alpha, batch.unmatched_src,
                              batch, model.weights.spatial, spatial_grad, false, 0,
                              model.diagnostics.sp_matches, model.diagnostics.sp_distinct,
                              model.diagnostics);
    }
    if (config.cs_active() && batch.matched.size() > 0) {
      const VisualGraph vgraph = build_channel_visual_graph(batch.matched, config.R, model.weights);
      log.l_cs = graph_branch(vgraph, state_graph, config, options, config.beta, batch.matched_src,
                              batch, model.weights.channel, channel_grad, true, d / config.R,
                              model.diagnostics.cs_matches, model.diagnostics.cs_distinct,
                              model.diagnostics);
    }
    log.total = total_loss(log.l_mask, log.l_match, log.l_sp, log.l_cs, config.alpha, config.beta);
    if (!std::isfinite(log.total)) {
      std::ostringstream msg;
      msg << "train: non-finite loss at step " << log.step << " (l_mask=" << log.l_mask
          << ", l_match=" << log.l_match << ", l_sp=" << log.l_sp << ", l_cs=" << log.l_cs << ")";
      throw TrainingError(msg.str());
    }
    result.log.push_back(log);

    if (config.learning_rate == 0.0) continue;
    Matrix semantic_grad(d, d);
    for (std::size_t q = 0; q < batch.features.size(); ++q) add_outer(semantic_grad, batch.grads[q], batch.features[q]);
    axpy(-config.learning_rate, semantic_grad.values(), model.semantic.values());
    if (config.sp_active()) axpy(-config.learning_rate, spatial_grad.values(), model.weights.spatial.values());
    if (config.cs_active()) axpy(-config.learning_rate, channel_grad.values(), model.weights.channel.values());
  }
  return result;
}

std::string training_log_csv(const std::vector<StepLog>& log) {
  std::ostringstream out;
  out.precision(17);
  out << "step,l_mask,l_match,l_sp,l_cs,total\n";
  for (const auto& row : log) {
    out << row.step << ',' << row.l_mask << ',' << row.l_match << ',' << row.l_sp << ',' << row.l_cs
        << ',' << row.total << '\n';
  }
  return out.str();
}

}  // namespace devlm
