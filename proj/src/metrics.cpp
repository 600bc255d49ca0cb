#include <cmath>
#include <cstdio>
#include <sstream>

#include "devlm/errors.hpp"
#include "devlm/logging.hpp"
#include "devlm/pipeline.hpp"

namespace devlm {

double harmonic_mean(double seen, double unseen) {
  if (seen + unseen == 0.0) {
    log_info("harmonic_mean: seen and unseen are both 0, reporting 0");
    return 0.0;
  }
  return 2.0 * seen * unseen / (seen + unseen);
}

double round1(double value) { return std::round(value * 10.0) / 10.0; }

MetricsReport report_from_confusion(std::vector<std::vector<std::uint64_t>> confusion,
                                    const std::vector<std::string>& names,
                                    const std::vector<bool>& seen) {
  const std::size_t c = names.size();
  if (confusion.size() != c || seen.size() != c) throw ShapeError("report_from_confusion: class count mismatch");
  MetricsReport report;
  report.class_names = names;
  report.class_seen = seen;
  report.class_iou.assign(c, std::nullopt);
  double seen_sum = 0.0, unseen_sum = 0.0;
  std::size_t seen_n = 0, unseen_n = 0;
  for (std::size_t i = 0; i < c; ++i) {
    if (confusion[i].size() != c) throw ShapeError("report_from_confusion: confusion matrix must be square");
    std::uint64_t tp = confusion[i][i], fn = 0, fp = 0;
    for (std::size_t j = 0; j < c; ++j) {
      if (j == i) continue;
      fn += confusion[i][j];
      fp += confusion[j][i];
    }
    if (tp + fn == 0) {
      log_info("evaluate: class '" + names[i] + "' absent from ground truth, excluded from mIoU");
      continue;
    }
    const double iou = static_cast<double>(tp) / static_cast<double>(tp + fp + fn);
    report.class_iou[i] = iou;
    if (seen[i]) {
      seen_sum += iou;
      ++seen_n;
    } else {
      unseen_sum += iou;
      ++unseen_n;
    }
  }
  report.seen_miou = seen_n ? 100.0 * seen_sum / static_cast<double>(seen_n) : 0.0;
  report.unseen_miou = unseen_n ? 100.0 * unseen_sum / static_cast<double>(unseen_n) : 0.0;
  report.harmonic = harmonic_mean(report.seen_miou, report.unseen_miou);
  report.confusion = std::move(confusion);
  return report;
}

MetricsReport evaluate(const Model& model, const std::vector<ToyScene>& scenes,
                       const KnowledgeBase& kb, GraphMode mode) {
  const std::size_t c = kb.num_classes();
  std::vector<std::vector<std::uint64_t>> confusion(c, std::vector<std::uint64_t>(c, 0));
  for (const auto& scene : scenes) {
    if (scene.features.cols() != model.dim) throw ShapeError("evaluate: scene dimension differs from the model");
    for (std::size_t cell = 0; cell < scene.cell_count(); ++cell) {
      const std::size_t gt = scene.labels[cell];
      if (gt >= c) throw IndexError("evaluate: label " + std::to_string(gt) + " outside the class set");
      const Vector y = model.embed(scene.features.row(cell));
      std::size_t best = 0;
      double best_score = -2.0;
      for (std::size_t k = 0; k < c; ++k) {
        const double s = cosine_similarity(y, kb.class_embeddings.row(k));
        if (s > best_score) {
          best_score = s;
          best = k;
        }
      }
      ++confusion[gt][best];
    }
  }
  std::vector<std::string> names;
  std::vector<bool> seen;
  for (std::size_t k = 0; k < c; ++k) {
    names.push_back(kb.class_name(k));
    seen.push_back(kb.is_seen(k));
  }
  MetricsReport report = report_from_confusion(std::move(confusion), names, seen);
  report.mode = mode;
  report.unseen_nodes_excluded = mode == GraphMode::kInductive;
  report.diagnostics = model.diagnostics;
  return report;
}

nlohmann::json to_json(const MetricsReport& r) {
  nlohmann::json classes = nlohmann::json::array();
  for (std::size_t i = 0; i < r.class_names.size(); ++i) {
    nlohmann::json entry = {{"name", r.class_names[i]}, {"seen", static_cast<bool>(r.class_seen[i])}};
    entry["iou"] = r.class_iou[i] ? nlohmann::json(100.0 * *r.class_iou[i]) : nlohmann::json(nullptr);
    classes.push_back(entry);
  }
  return {{"classes", classes},
          {"confusion", r.confusion},
          {"seen_miou", r.seen_miou},
          {"unseen_miou", r.unseen_miou},
          {"harmonic", r.harmonic},
          {"rounded", {{"seen", round1(r.seen_miou)}, {"unseen", round1(r.unseen_miou)}, {"harmonic", round1(r.harmonic)}}},
          {"diagnostics",
           {{"mode", to_string(r.mode)},
            {"unseen_nodes_excluded", r.unseen_nodes_excluded},
            {"sp_distinct_per_class", r.diagnostics.sp_distinct_per_class()},
            {"cs_distinct_per_class", r.diagnostics.cs_distinct_per_class()},
            {"sp_matches", r.diagnostics.sp_matches},
            {"cs_matches", r.diagnostics.cs_matches},
            {"max_marginal_error", r.diagnostics.max_marginal_error},
            {"unconverged_plans", r.diagnostics.unconverged_plans}}}};
}

std::string metrics_table(const MetricsReport& r) {
  std::ostringstream out;
  char line[128];
  for (std::size_t i = 0; i < r.class_names.size(); ++i) {
    if (r.class_iou[i]) {
      std::snprintf(line, sizeof line, "  %-16s %-7s %6.1f\n", r.class_names[i].c_str(),
                    r.class_seen[i] ? "seen" : "unseen", 100.0 * *r.class_iou[i]);
    } else {
      std::snprintf(line, sizeof line, "  %-16s %-7s %6s\n", r.class_names[i].c_str(),
                    r.class_seen[i] ? "seen" : "unseen", "n/a");
    }
    out << line;
  }
  std::snprintf(line, sizeof line, "%-14s %6s %6s %6s\n", "setting", "Seen", "Unseen", "Harm.");
  out << line;
  std::snprintf(line, sizeof line, "%-14s %6.1f %6.1f %6.1f\n", to_string(r.mode), r.seen_miou,
                r.unseen_miou, r.harmonic);
  out << line;
  return out.str();
}

}  // namespace devlm
