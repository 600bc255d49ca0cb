#include <doctest.h>

#include <fstream>
#include <set>

#include "devlm/benchmark.hpp"
#include "devlm/errors.hpp"
#include "devlm/graphs.hpp"

using namespace devlm;

namespace {

OntologySpec bundled_spec() {
  std::ifstream in(std::string(DEVLM_DATA_DIR) + "/benchmark_spec.json");
  REQUIRE(in);
  return ontology_spec_from_json(nlohmann::json::parse(in));
}

}  // namespace

TEST_CASE("bundled spec describes four seen and two unseen classes in d=16") {
  const OntologySpec spec = bundled_spec();
  CHECK(spec.dim == 16);
  CHECK(spec.seen_classes.size() == 4);
  CHECK(spec.unseen_classes.size() == 2);
}

TEST_CASE("same seed gives byte-identical datasets") {
  const OntologySpec spec = bundled_spec();
  const Benchmark a = generate_benchmark(spec, 12, 42);
  const Benchmark b = generate_benchmark(spec, 12, 42);
  CHECK(to_json(a.scenes).dump() == to_json(b.scenes).dump());
  CHECK(to_json(a.ontology).dump() == to_json(b.ontology).dump());
  CHECK(knowledge_base_to_json(a.kb).dump() == knowledge_base_to_json(b.kb).dump());
  const Benchmark c = generate_benchmark(spec, 12, 43);
  CHECK(to_json(a.scenes).dump() != to_json(c.scenes).dump());
}

TEST_CASE("zero noise gives exact prototype sums") {
  OntologySpec spec = bundled_spec();
  spec.noise = 0.0;
  const Benchmark bench = generate_benchmark(spec, 10, 7);
  const auto& onto = bench.ontology;
  for (const auto* set : {&bench.scenes.train, &bench.scenes.test}) {
    for (const ToyScene& scene : *set) {
      for (const auto& obj : scene.objects) {
        for (const auto& region : obj.regions) {
          Vector expected(spec.dim, 0.0);
          axpy(onto.class_weight, onto.class_prototypes.row(obj.cls), expected);
          axpy(1.0, onto.part_prototypes.row(region.part), expected);
          axpy(onto.state_weight, onto.state_prototypes.row(obj.state), expected);
          for (std::size_t cell : region.cells) CHECK(scene.features.row_copy(cell) == expected);
        }
      }
    }
  }
}

TEST_CASE("scenes are fully labeled and respect the seen/unseen split") {
  const OntologySpec spec = bundled_spec();
  const Benchmark bench = generate_benchmark(spec, 40, 1);
  CHECK(bench.scenes.train.size() == 40);
  CHECK(bench.scenes.test.size() == 20);
  const std::size_t seen = bench.ontology.num_seen();
  bool unseen_present = false;
  for (const ToyScene& s : bench.scenes.train) {
    CHECK(s.features.rows() == s.cell_count());
    CHECK(s.features.cols() == spec.dim);
    for (std::size_t l : s.labels) CHECK(l < seen);
    CHECK(s.objects.size() >= 1);
    CHECK(s.objects.size() <= spec.max_objects);
  }
  for (const ToyScene& s : bench.scenes.test)
    for (std::size_t l : s.labels) unseen_present = unseen_present || l >= seen;
  CHECK(unseen_present);
  for (std::size_t c = 0; c < bench.ontology.classes.size(); ++c)
    CHECK(norm(bench.ontology.class_prototypes.row(c)) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("top-M selection on generated scores recovers each class's parts") {
  const OntologySpec spec = bundled_spec();
  for (std::uint64_t seed : {0u, 1u, 2u}) {
    const Benchmark bench = generate_benchmark(spec, 2, seed);
    for (std::size_t c = 0; c < bench.ontology.classes.size(); ++c) {
      const auto& cls = bench.ontology.classes[c];
      for (ModifierKind kind : {ModifierKind::kPart, ModifierKind::kState}) {
        const auto& owned = kind == ModifierKind::kPart ? cls.parts : cls.states;
        auto ranked = bench.kb.ranked_modifiers(kind, c);
        ranked.resize(owned.size());
        CHECK(std::set<std::size_t>(ranked.begin(), ranked.end()) ==
              std::set<std::size_t>(owned.begin(), owned.end()));
        for (std::size_t m = 0; m < bench.kb.modifiers(kind).size(); ++m) {
          const double s = bench.kb.scores(kind)(c, m);
          if (std::find(owned.begin(), owned.end(), m) != owned.end()) CHECK(s == 1.0);
          else CHECK(s < spec.distractor_max);
        }
      }
    }
  }
}

TEST_CASE("scene sets round-trip through JSON") {
  const Benchmark bench = generate_benchmark(bundled_spec(), 4, 3);
  const nlohmann::json doc = to_json(bench.scenes);
  const SceneSet back = scene_set_from_json(doc);
  CHECK(to_json(back).dump() == doc.dump());
}

TEST_CASE("ontology spec violations are validation errors") {
  nlohmann::json doc;
  {
    std::ifstream in(std::string(DEVLM_DATA_DIR) + "/benchmark_spec.json");
    doc = nlohmann::json::parse(in);
  }
  SUBCASE("class owning a single part") {
    doc["seen_classes"][0]["parts"] = {"eye"};
    CHECK_THROWS_AS(ontology_spec_from_json(doc), ValidationError);
  }
  SUBCASE("class owning a single state") {
    doc["unseen_classes"][0]["states"] = {"furry"};
    CHECK_THROWS_AS(ontology_spec_from_json(doc), ValidationError);
  }
  SUBCASE("class in both label spaces") {
    doc["unseen_classes"][0]["name"] = "dog";
    CHECK_THROWS_AS(ontology_spec_from_json(doc), ValidationError);
  }
  SUBCASE("unknown part name") {
    doc["seen_classes"][0]["parts"] = {"eye", "antenna"};
    CHECK_THROWS_AS(generate_benchmark(ontology_spec_from_json(doc), 1, 0), ValidationError);
  }
  SUBCASE("unknown field") {
    doc["colour"] = "red";
    CHECK_THROWS_AS(ontology_spec_from_json(doc), ValidationError);
  }
  SUBCASE("zero dimension") {
    doc["dim"] = 0;
    CHECK_THROWS_AS(ontology_spec_from_json(doc), ValidationError);
  }
}
