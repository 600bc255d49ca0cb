#include "devlm/knowledge_base.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "devlm/errors.hpp"
#include "devlm/json_io.hpp"

namespace devlm {

namespace {

constexpr char kKeySeparator = '|';

const char* phrase_field(ModifierKind kind) {
  return kind == ModifierKind::kPart ? "part_phrase_embeddings" : "state_phrase_embeddings";
}

std::vector<std::string> names_from_json(const nlohmann::json& doc, const char* field) {
  if (!doc.contains(field)) throw ParseError(std::string("knowledge base: missing field '") + field + "'");
  const auto& arr = doc.at(field);
  if (!arr.is_array()) throw ParseError(std::string(field) + ": expected an array of strings");
  std::vector<std::string> out;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    if (!arr[i].is_string()) {
      throw ParseError(std::string(field) + "[" + std::to_string(i) + "]: expected a string");
    }
    out.push_back(arr[i].get<std::string>());
  }
  return out;
}

std::size_t index_of(const std::vector<std::string>& names, const std::string& name,
                     const std::string& where) {
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw ValidationError(where + ": unknown name '" + name + "'");
  return static_cast<std::size_t>(it - names.begin());
}

}  // namespace

const char* to_string(ModifierKind kind) { return kind == ModifierKind::kPart ? "part" : "state"; }

std::string KnowledgeBase::class_name(std::size_t cls) const {
  return cls < seen_classes.size() ? seen_classes.at(cls)
                                   : unseen_classes.at(cls - seen_classes.size());
}

const std::vector<std::string>& KnowledgeBase::modifiers(ModifierKind kind) const {
  return kind == ModifierKind::kPart ? parts : states;
}

const Matrix& KnowledgeBase::scores(ModifierKind kind) const {
  return kind == ModifierKind::kPart ? part_scores : state_scores;
}

const std::map<KnowledgeBase::PhraseKey, Vector>& KnowledgeBase::phrases(ModifierKind kind) const {
  return kind == ModifierKind::kPart ? part_phrases : state_phrases;
}

std::vector<std::size_t> KnowledgeBase::ranked_modifiers(ModifierKind kind, std::size_t cls) const {
  const auto& names = modifiers(kind);
  const auto& grid = scores(kind);
  std::vector<std::size_t> order(names.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (grid(cls, a) != grid(cls, b)) return grid(cls, a) > grid(cls, b);
    return names[a] < names[b];
  });
  return order;
}

void KnowledgeBase::validate() const {
  const std::size_t c = num_classes();
  if (c == 0) throw ValidationError("knowledge base: no classes");
  if (class_embeddings.rows() != c) {
    throw ValidationError("knowledge base: " + std::to_string(class_embeddings.rows()) +
                          " class embeddings for " + std::to_string(c) + " classes");
  }
  const std::size_t d = dim();
  if (d == 0) throw ValidationError("knowledge base: zero embedding dimension");
  if (!all_finite(class_embeddings.values())) {
    throw ValidationError("knowledge base: non-finite class embedding");
  }
  for (ModifierKind kind : {ModifierKind::kPart, ModifierKind::kState}) {
    const auto& grid = scores(kind);
    const auto& names = modifiers(kind);
    const std::string field = std::string(to_string(kind)) + "_scores";
    if (names.empty()) continue;
    if (grid.rows() != c || grid.cols() != names.size()) {
      throw ValidationError("knowledge base: " + field + " must be " + std::to_string(c) + "x" +
                            std::to_string(names.size()));
    }
    for (double s : grid.values()) {
      if (!std::isfinite(s) || s < 0.0) {
        throw ValidationError("knowledge base: " + field + " entries must be finite and >= 0");
      }
    }
    for (const auto& [key, vec] : phrases(kind)) {
      if (vec.size() != d) {
        throw ValidationError(std::string("knowledge base: ") + phrase_field(kind) + " '" +
                              names.at(key.first) + kKeySeparator + class_name(key.second) +
                              "' has dimension " + std::to_string(vec.size()) + ", expected " +
                              std::to_string(d));
      }
      if (!all_finite(vec)) throw ValidationError("knowledge base: non-finite phrase embedding");
    }
  }
}

void KnowledgeBase::validate_selection(std::size_t m) const {
  for (ModifierKind kind : {ModifierKind::kPart, ModifierKind::kState}) {
    const auto& names = modifiers(kind);
    if (names.empty()) continue;
    const std::size_t take = std::min(m, names.size());
    for (std::size_t cls = 0; cls < num_classes(); ++cls) {
      const auto ranked = ranked_modifiers(kind, cls);
      for (std::size_t i = 0; i < take; ++i) {
        if (!phrases(kind).count({ranked[i], cls})) {
          throw ValidationError(std::string("knowledge base: missing ") + to_string(kind) +
                                " phrase embedding for '" + names[ranked[i]] + kKeySeparator +
                                class_name(cls) + "'");
        }
      }
    }
  }
}

KnowledgeBase knowledge_base_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ParseError("knowledge base: top level must be an object");
  static const std::vector<std::string> kFields = {
      "seen_classes", "unseen_classes",   "parts",
      "states",       "part_scores",      "state_scores",
      "class_embeddings", "part_phrase_embeddings", "state_phrase_embeddings",
      "manifest_digest"};
  for (const auto& [key, value] : doc.items()) {
    if (std::find(kFields.begin(), kFields.end(), key) == kFields.end()) {
      throw ParseError("knowledge base: unknown field '" + key + "'");
    }
  }
  KnowledgeBase kb;
  kb.seen_classes = names_from_json(doc, "seen_classes");
  kb.unseen_classes = names_from_json(doc, "unseen_classes");
  kb.parts = names_from_json(doc, "parts");
  kb.states = doc.contains("states") ? names_from_json(doc, "states") : std::vector<std::string>{};
  kb.part_scores = io::matrix_from_json(doc.at("part_scores"), "part_scores");
  kb.state_scores = doc.contains("state_scores")
                        ? io::matrix_from_json(doc.at("state_scores"), "state_scores")
                        : Matrix{};
  kb.class_embeddings = io::matrix_from_json(doc.at("class_embeddings"), "class_embeddings");

  std::vector<std::string> classes = kb.seen_classes;
  classes.insert(classes.end(), kb.unseen_classes.begin(), kb.unseen_classes.end());
  for (ModifierKind kind : {ModifierKind::kPart, ModifierKind::kState}) {
    const char* field = phrase_field(kind);
    if (!doc.contains(field)) continue;
    const auto& obj = doc.at(field);
    if (!obj.is_object()) throw ParseError(std::string(field) + ": expected an object");
    auto& target = kind == ModifierKind::kPart ? kb.part_phrases : kb.state_phrases;
    for (const auto& [key, value] : obj.items()) {
      const auto sep = key.find(kKeySeparator);
      if (sep == std::string::npos) {
        throw ParseError(std::string(field) + ": key '" + key + "' lacks the '|' separator");
      }
      const std::string where = std::string(field) + "." + key;
      const std::size_t mod = index_of(kb.modifiers(kind), key.substr(0, sep), where);
      const std::size_t cls = index_of(classes, key.substr(sep + 1), where);
      target[{mod, cls}] = io::vector_from_json(value, where);
    }
  }
  kb.validate();
  return kb;
}

nlohmann::json knowledge_base_to_json(const KnowledgeBase& kb) {
  nlohmann::json doc;
  doc["seen_classes"] = kb.seen_classes;
  doc["unseen_classes"] = kb.unseen_classes;
  doc["parts"] = kb.parts;
  doc["states"] = kb.states;
  doc["part_scores"] = io::to_json(kb.part_scores);
  doc["state_scores"] = io::to_json(kb.state_scores);
  doc["class_embeddings"] = io::to_json(kb.class_embeddings);
  for (ModifierKind kind : {ModifierKind::kPart, ModifierKind::kState}) {
    nlohmann::json obj = nlohmann::json::object();
    for (const auto& [key, vec] : kb.phrases(kind)) {
      obj[kb.modifiers(kind).at(key.first) + kKeySeparator + kb.class_name(key.second)] = vec;
    }
    doc[phrase_field(kind)] = obj;
  }
  return doc;
}

KnowledgeBase load_knowledge_base(const std::filesystem::path& path,
                                  std::optional<std::size_t> selection_m) {
  KnowledgeBase kb;
  try {
    kb = knowledge_base_from_json(io::read_json(path));
  } catch (const ParseError& e) {
    const std::string msg = e.what();
    if (msg.rfind(path.string(), 0) == 0) throw;
    throw ParseError(path.string() + ": " + msg);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  if (selection_m) kb.validate_selection(*selection_m);
  return kb;
}

void save_knowledge_base(const KnowledgeBase& kb, const std::filesystem::path& path) {
  io::write_json(knowledge_base_to_json(kb), path);
}

}  // namespace devlm
