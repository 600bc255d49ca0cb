#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "devlm/tensor.hpp"

namespace devlm {

enum class ModifierKind { kPart, kState };

const char* to_string(ModifierKind kind);

/// Offline relation knowledge: classes (seen first, then unseen), part and
/// state vocabularies, class-by-modifier relation scores, and phrase
/// embeddings keyed by (modifier index, class index).
struct KnowledgeBase {
  using PhraseKey = std::pair<std::size_t, std::size_t>;  // (modifier, class)

  std::vector<std::string> seen_classes;
  std::vector<std::string> unseen_classes;
  std::vector<std::string> parts;
  std::vector<std::string> states;
  Matrix part_scores;   // classes x parts
  Matrix state_scores;  // classes x states
  Matrix class_embeddings;
  std::map<PhraseKey, Vector> part_phrases;
  std::map<PhraseKey, Vector> state_phrases;

  std::size_t num_seen() const { return seen_classes.size(); }
  std::size_t num_classes() const { return seen_classes.size() + unseen_classes.size(); }
  bool is_seen(std::size_t cls) const { return cls < seen_classes.size(); }
  std::string class_name(std::size_t cls) const;
  std::size_t dim() const { return class_embeddings.cols(); }

  const std::vector<std::string>& modifiers(ModifierKind kind) const;
  const Matrix& scores(ModifierKind kind) const;
  const std::map<PhraseKey, Vector>& phrases(ModifierKind kind) const;

  /// Modifier indices of a class ranked by descending relation score, ties
  /// broken by modifier name.
  std::vector<std::size_t> ranked_modifiers(ModifierKind kind, std::size_t cls) const;

  /// Throws ValidationError naming the first "<modifier>|<class>" pair picked
  /// by a top-M selection that has no phrase embedding.
  void validate_selection(std::size_t m) const;

  /// Structural checks: shapes, finite non-negative scores, uniform dimension.
  void validate() const;
};

KnowledgeBase knowledge_base_from_json(const nlohmann::json& doc);
nlohmann::json knowledge_base_to_json(const KnowledgeBase& kb);

/// Reads and validates a knowledge-base document. When selection_m is given,
/// additionally checks that every top-M pair has a phrase embedding.
KnowledgeBase load_knowledge_base(const std::filesystem::path& path,
                                  std::optional<std::size_t> selection_m = std::nullopt);

void save_knowledge_base(const KnowledgeBase& kb, const std::filesystem::path& path);

}  // namespace devlm
