#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "devlm/knowledge_base.hpp"
#include "devlm/tensor.hpp"

namespace devlm {

struct ClassSpec {
  std::string name;
  std::vector<std::string> parts;
  std::vector<std::string> states;
};

/// Declarative description of a synthetic ontology and its scene generator.
struct OntologySpec {
  std::size_t dim = 16;
  std::size_t grid_height = 8;
  std::size_t grid_width = 8;
  double noise = 0.1;
  double class_weight = 1.0;       // weight of the object's class prototype in cell features
  double state_weight = 0.0;       // weight of the object's state prototype in cell features
  double modality_gap = 0.0;       // visual prototypes = normalize((I + gap * G) text prototype)
  double part_composition = 0.0;   // class prototypes mix in the mean of their owned-part prototypes
  double distractor_max = 0.3;     // non-owned relation scores ~ U[0, distractor_max)
  double test_fraction = 0.5;      // evaluation scenes = round(scenes * test_fraction)
  double unseen_object_rate = 0.5; // chance an evaluation object is drawn from unseen classes
  std::size_t max_objects = 3;
  std::size_t max_queries = 8;
  std::vector<std::string> parts;
  std::vector<std::string> states;
  std::vector<ClassSpec> seen_classes;
  std::vector<ClassSpec> unseen_classes;

  /// Throws ValidationError on violated ontology invariants.
  void validate() const;
};

OntologySpec ontology_spec_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const OntologySpec& spec);

struct OntologyClass {
  std::string name;
  bool seen = true;
  std::vector<std::size_t> parts;   // owned part indices
  std::vector<std::size_t> states;  // owned state indices
};

struct SyntheticOntology {
  std::size_t dim = 0;
  double noise = 0.0;
  double class_weight = 1.0;
  double state_weight = 0.0;
  std::vector<std::string> part_names;
  std::vector<std::string> state_names;
  std::vector<OntologyClass> classes;  // seen first, then unseen
  Matrix class_prototypes;             // visual side, unit rows
  Matrix part_prototypes;
  Matrix state_prototypes;
  Matrix modality_map;                 // text -> visual prototype map

  std::size_t num_seen() const;
};

struct PartRegion {
  std::size_t part = 0;
  std::vector<std::size_t> cells;  // row-major cell indices
};

struct SceneObject {
  std::size_t cls = 0;
  std::size_t state = 0;
  std::vector<PartRegion> regions;
  std::vector<std::size_t> cells() const;
};

/// A grid of cells, each with a feature vector and a ground-truth class.
struct ToyScene {
  std::size_t height = 0;
  std::size_t width = 0;
  Matrix features;                 // cells x d
  std::vector<std::size_t> labels; // per cell
  std::vector<SceneObject> objects;

  std::size_t cell_count() const { return height * width; }
};

struct SceneSet {
  std::vector<ToyScene> train;  // seen classes only
  std::vector<ToyScene> test;   // seen and unseen classes
};

struct Benchmark {
  SyntheticOntology ontology;
  SceneSet scenes;
  KnowledgeBase kb;
};

/// Deterministic generator. Draw order from one mt19937_64 seeded with `seed`:
/// class, part, then state text prototypes; the modality map; relation-score
/// distractors (class-major, parts then states); training scenes; evaluation
/// scenes. Per scene: object
/// count, band widths, then per object its class, state, part order and strip
/// heights; finally per-cell noise in row-major order.
Benchmark generate_benchmark(const OntologySpec& spec, std::size_t scenes, std::uint64_t seed);

nlohmann::json to_json(const SyntheticOntology& ontology);
nlohmann::json to_json(const SceneSet& scenes);
SceneSet scene_set_from_json(const nlohmann::json& doc);

}  // namespace devlm
