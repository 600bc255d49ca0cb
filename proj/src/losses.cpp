#include "devlm/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "devlm/errors.hpp"

namespace devlm {

namespace {

void require_same_shape(std::span<const double> a, std::span<const double> b, const char* op) {
  if (a.size() != b.size()) {
    throw ShapeError(std::string(op) + ": shape mismatch (" + std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()) + ")");
  }
}

double label_value(Label l) { return l == Label::kPositive ? 1.0 : 0.0; }

}  // namespace

std::size_t TriStateLabelMatrix::count(Label l) const {
  return static_cast<std::size_t>(std::count(cells_.begin(), cells_.end(), l));
}

LossResult classification_match_loss(std::span<const double> q, const EmbeddingSet& class_embeddings,
                                     std::size_t gt_class, double tau) {
  if (gt_class >= class_embeddings.size()) {
    throw IndexError("classification_match_loss: class index " + std::to_string(gt_class) +
                     " out of range for " + std::to_string(class_embeddings.size()) + " classes");
  }
  if (!(tau > 0.0)) throw DomainError("classification_match_loss: temperature must be positive");
  const std::size_t n = class_embeddings.size();
  Vector logits(n);
  for (std::size_t c = 0; c < n; ++c) logits[c] = cosine_similarity(q, class_embeddings[c]) / tau;

  LossResult out;
  out.value = log_sum_exp(logits) - logits[gt_class];
  const Vector p = softmax_with_temperature(logits, 1.0);
  out.gradient.assign(q.size(), 0.0);
  for (std::size_t c = 0; c < n; ++c) {
    const double dz = p[c] - (c == gt_class ? 1.0 : 0.0);
    if (dz == 0.0) continue;
    axpy(dz / tau, cosine_gradient(q, class_embeddings[c]), out.gradient);
  }
  return out;
}

LossResult dice_loss(std::span<const double> pred, std::span<const double> gt, double smoothing) {
  require_same_shape(pred, gt, "dice_loss");
  double inter = 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    inter += pred[i] * gt[i];
    total += pred[i] + gt[i];
  }
  const double num = 2.0 * inter + smoothing;
  const double den = total + smoothing;
  LossResult out;
  out.value = 1.0 - num / den;
  out.gradient.resize(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    out.gradient[i] = -(2.0 * gt[i] * den - num) / (den * den);
  }
  return out;
}

LossResult focal_loss(std::span<const double> pred, std::span<const double> gt, double gamma,
                      double alpha) {
  require_same_shape(pred, gt, "focal_loss");
  if (pred.empty()) throw ShapeError("focal_loss: empty mask");
  LossResult out;
  out.gradient.assign(pred.size(), 0.0);
  const double inv_n = 1.0 / static_cast<double>(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double raw = pred[i];
    const double p = std::clamp(raw, tol::kProbClamp, 1.0 - tol::kProbClamp);
    const bool positive = gt[i] > 0.5;
    const double pt = positive ? p : 1.0 - p;
    const double at = positive ? alpha : 1.0 - alpha;
    const double one_minus = 1.0 - pt;
    const double mod = std::pow(one_minus, gamma);
    const double log_pt = std::log(pt);
    out.value += -at * mod * log_pt * inv_n;

    if (raw <= tol::kProbClamp || raw >= 1.0 - tol::kProbClamp) continue;
    // d/dpt of -at (1-pt)^g log pt
    double d_pt = -at * mod / pt;
    if (gamma != 0.0) d_pt += at * gamma * std::pow(one_minus, gamma - 1.0) * log_pt;
    out.gradient[i] = (positive ? d_pt : -d_pt) * inv_n;
  }
  return out;
}

LossResult graph_matching_loss(std::span<const Vector> scores,
                               std::span<const TriStateLabelMatrix> labels, Reduction reduction) {
  if (scores.size() != labels.size()) {
    throw ShapeError("graph_matching_loss: " + std::to_string(scores.size()) +
                     " score grids for " + std::to_string(labels.size()) + " label grids");
  }
  LossResult out;
  std::size_t offset = 0;
  std::size_t active = 0;
  for (std::size_t n = 0; n < scores.size(); ++n) {
    if (scores[n].size() != labels[n].cell_count()) {
      throw ShapeError("graph_matching_loss: score grid " + std::to_string(n) +
                       " does not match its label grid");
    }
    out.gradient.resize(offset + scores[n].size(), 0.0);
    for (std::size_t i = 0; i < scores[n].size(); ++i) {
      const Label l = labels[n].cell(i);
      if (l == Label::kIgnore) continue;
      const double diff = scores[n][i] - label_value(l);
      out.value += diff * diff;
      out.gradient[offset + i] = 2.0 * diff;
      ++active;
    }
    offset += scores[n].size();
  }
  if (reduction == Reduction::kMean && active > 0) {
    const double inv = 1.0 / static_cast<double>(active);
    out.value *= inv;
    for (double& g : out.gradient) g *= inv;
  }
  return out;
}

LossResult graph_matching_loss(const Matrix& visual_nodes, const Matrix& cell_embeddings,
                               std::span<const TriStateLabelMatrix> labels, double tau,
                               Reduction reduction) {
  if (visual_nodes.rows() != labels.size()) {
    throw ShapeError("graph_matching_loss: " + std::to_string(visual_nodes.rows()) +
                     " visual nodes for " + std::to_string(labels.size()) + " label grids");
  }
  if (!(tau > 0.0)) throw DomainError("graph_matching_loss: temperature must be positive");
  if (!visual_nodes.empty() && visual_nodes.cols() != cell_embeddings.cols()) {
    throw ShapeError("graph_matching_loss: embedding dimension mismatch");
  }
  const std::size_t d = visual_nodes.cols();
  LossResult out;
  out.gradient.assign(visual_nodes.rows() * d, 0.0);
  std::size_t active = 0;
  for (std::size_t n = 0; n < visual_nodes.rows(); ++n) {
    if (labels[n].cell_count() != cell_embeddings.rows()) {
      throw ShapeError("graph_matching_loss: label grid " + std::to_string(n) +
                       " does not match the linguistic grid");
    }
    auto v = visual_nodes.row(n);
    std::span<double> grad(out.gradient.data() + n * d, d);
    for (std::size_t cell = 0; cell < cell_embeddings.rows(); ++cell) {
      const Label l = labels[n].cell(cell);
      if (l == Label::kIgnore) continue;
      auto t = cell_embeddings.row(cell);
      const double s = sigmoid(cosine_similarity(v, t) / tau);
      const double diff = s - label_value(l);
      out.value += diff * diff;
      ++active;
      const double coeff = 2.0 * diff * s * (1.0 - s) / tau;
      if (coeff != 0.0) axpy(coeff, cosine_gradient(v, t), grad);
    }
  }
  if (reduction == Reduction::kMean && active > 0) {
    const double inv = 1.0 / static_cast<double>(active);
    out.value *= inv;
    for (double& g : out.gradient) g *= inv;
  }
  return out;
}

double total_loss(double mask_l, double match_l, double sp_l, double cs_l, double alpha,
                  double beta) {
  return mask_l + match_l + alpha * sp_l + beta * cs_l;
}

}  // namespace devlm
