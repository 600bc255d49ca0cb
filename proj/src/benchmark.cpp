#include "devlm/benchmark.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "devlm/errors.hpp"
#include "devlm/json_io.hpp"

namespace devlm {

namespace {

using Rng = std::mt19937_64;

std::size_t uniform_index(Rng& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

Vector unit_gaussian(Rng& rng, std::size_t d) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector v(d);
  for (double& x : v) x = normal(rng);
  return normalized(v);
}

// Splits `total` into `n` positive sizes, each at least `min_size`.
std::vector<std::size_t> random_split(Rng& rng, std::size_t total, std::size_t n,
                                      std::size_t min_size) {
  std::vector<std::size_t> sizes(n, min_size);
  for (std::size_t extra = total - n * min_size; extra > 0; --extra) ++sizes[uniform_index(rng, n)];
  return sizes;
}

std::size_t index_in(const std::vector<std::string>& names, const std::string& name,
                     const std::string& where) {
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw ValidationError(where + ": unknown name '" + name + "'");
  return static_cast<std::size_t>(it - names.begin());
}

ToyScene make_scene(const OntologySpec& spec, const SyntheticOntology& onto, Rng& rng,
                    bool evaluation) {
  ToyScene scene;
  scene.height = spec.grid_height;
  scene.width = spec.grid_width;
  const std::size_t d = onto.dim;
  const std::size_t max_objects = std::min(spec.max_objects, spec.grid_width / 2);
  const std::size_t n_objects = 1 + uniform_index(rng, max_objects);
  const auto widths = random_split(rng, spec.grid_width, n_objects, 2);
  const std::size_t per_object_queries = std::max<std::size_t>(1, spec.max_queries / n_objects);
  const std::size_t n_seen = onto.num_seen();
  const std::size_t n_unseen = onto.classes.size() - n_seen;

  scene.labels.assign(scene.cell_count(), 0);
  std::size_t col0 = 0;
  for (std::size_t o = 0; o < n_objects; ++o) {
    SceneObject obj;
    const bool unseen = evaluation && n_unseen > 0 &&
                        std::bernoulli_distribution(spec.unseen_object_rate)(rng);
    obj.cls = unseen ? n_seen + uniform_index(rng, n_unseen) : uniform_index(rng, n_seen);
    const auto& cls = onto.classes[obj.cls];
    obj.state = cls.states[uniform_index(rng, cls.states.size())];

    std::vector<std::size_t> parts = cls.parts;
    std::shuffle(parts.begin(), parts.end(), rng);
    const std::size_t strips =
        std::min({parts.size(), per_object_queries, spec.grid_height});
    parts.resize(strips);
    const auto heights = random_split(rng, spec.grid_height, strips, 1);

    std::size_t row0 = 0;
    for (std::size_t s = 0; s < strips; ++s) {
      PartRegion region;
      region.part = parts[s];
      for (std::size_t r = row0; r < row0 + heights[s]; ++r)
        for (std::size_t c = col0; c < col0 + widths[o]; ++c) {
          const std::size_t cell = r * scene.width + c;
          region.cells.push_back(cell);
          scene.labels[cell] = obj.cls;
        }
      row0 += heights[s];
      obj.regions.push_back(std::move(region));
    }
    col0 += widths[o];
    scene.objects.push_back(std::move(obj));
  }

  // Noise-free prototype sum per cell, then noise in row-major cell order.
  scene.features = Matrix(scene.cell_count(), d);
  for (const auto& obj : scene.objects) {
    for (const auto& region : obj.regions) {
      for (std::size_t cell : region.cells) {
        auto f = scene.features.row(cell);
        axpy(onto.class_weight, onto.class_prototypes.row(obj.cls), f);
        axpy(1.0, onto.part_prototypes.row(region.part), f);
        if (onto.state_weight != 0.0) axpy(onto.state_weight, onto.state_prototypes.row(obj.state), f);
      }
    }
  }
  if (onto.noise > 0.0) {
    std::normal_distribution<double> normal(0.0, onto.noise);
    for (double& x : scene.features.values()) x += normal(rng);
  }
  return scene;
}

nlohmann::json scene_to_json(const ToyScene& scene) {
  nlohmann::json objects = nlohmann::json::array();
  for (const auto& obj : scene.objects) {
    nlohmann::json regions = nlohmann::json::array();
    for (const auto& r : obj.regions) regions.push_back({{"part", r.part}, {"cells", r.cells}});
    objects.push_back({{"class", obj.cls}, {"state", obj.state}, {"regions", regions}});
  }
  return {{"height", scene.height},
          {"width", scene.width},
          {"features", io::to_json(scene.features)},
          {"labels", scene.labels},
          {"objects", objects}};
}

ToyScene scene_from_json(const nlohmann::json& j, const std::string& where) {
  ToyScene scene;
  scene.height = j.at("height").get<std::size_t>();
  scene.width = j.at("width").get<std::size_t>();
  scene.features = io::matrix_from_json(j.at("features"), where + ".features");
  scene.labels = j.at("labels").get<std::vector<std::size_t>>();
  for (const auto& o : j.at("objects")) {
    SceneObject obj;
    obj.cls = o.at("class").get<std::size_t>();
    obj.state = o.at("state").get<std::size_t>();
    for (const auto& r : o.at("regions")) {
      obj.regions.push_back({r.at("part").get<std::size_t>(), r.at("cells").get<std::vector<std::size_t>>()});
    }
    scene.objects.push_back(std::move(obj));
  }
  if (scene.labels.size() != scene.cell_count() || scene.features.rows() != scene.cell_count()) {
    throw ValidationError(where + ": every cell needs one feature row and one label");
  }
  return scene;
}

}  // namespace

void OntologySpec::validate() const {
  if (dim == 0) throw ValidationError("ontology: dim must be positive");
  if (grid_width < 2 || grid_height < 1) throw ValidationError("ontology: grid too small");
  if (max_objects == 0 || max_queries == 0) throw ValidationError("ontology: object/query caps must be positive");
  if (seen_classes.empty()) throw ValidationError("ontology: at least one seen class required");
  if (!(noise >= 0.0) || !(distractor_max >= 0.0) || distractor_max > 1.0) {
    throw ValidationError("ontology: noise must be >= 0 and distractor_max in [0, 1]");
  }
  if (!(test_fraction >= 0.0) || !(unseen_object_rate >= 0.0) || unseen_object_rate > 1.0) {
    throw ValidationError("ontology: test_fraction/unseen_object_rate out of range");
  }
  std::set<std::string> names;
  for (const auto* group : {&seen_classes, &unseen_classes}) {
    for (const auto& c : *group) {
      if (!names.insert(c.name).second) {
        throw ValidationError("ontology: class '" + c.name + "' declared twice (seen and unseen label spaces must be disjoint)");
      }
      if (c.parts.size() < 2) throw ValidationError("ontology: class '" + c.name + "' must own at least 2 parts");
      if (c.states.size() < 2) throw ValidationError("ontology: class '" + c.name + "' must own at least 2 states");
      for (const auto& p : c.parts) index_in(parts, p, "ontology class '" + c.name + "' part");
      for (const auto& s : c.states) index_in(states, s, "ontology class '" + c.name + "' state");
      if (std::set<std::string>(c.parts.begin(), c.parts.end()).size() != c.parts.size()) {
        throw ValidationError("ontology: class '" + c.name + "' lists a part twice");
      }
    }
  }
}

OntologySpec ontology_spec_from_json(const nlohmann::json& doc) {
  static const std::set<std::string> kKnown = {
      "dim",   "grid",          "noise",        "state_weight",       "distractor_max",
      "modality_gap", "part_composition", "class_weight",
      "test_fraction", "unseen_object_rate", "max_objects", "max_queries", "parts",
      "states", "seen_classes", "unseen_classes"};
  for (const auto& [key, _] : doc.items()) {
    if (!kKnown.count(key)) throw ValidationError("ontology spec: unknown field '" + key + "'");
  }
  OntologySpec s;
  try {
    s.dim = doc.value("dim", s.dim);
    if (doc.contains("grid")) {
      const auto g = doc.at("grid").get<std::vector<std::size_t>>();
      if (g.size() != 2) throw ValidationError("ontology spec: grid must be [height, width]");
      s.grid_height = g[0];
      s.grid_width = g[1];
    }
    s.noise = doc.value("noise", s.noise);
    s.state_weight = doc.value("state_weight", s.state_weight);
    s.modality_gap = doc.value("modality_gap", s.modality_gap);
    s.class_weight = doc.value("class_weight", s.class_weight);
    s.part_composition = doc.value("part_composition", s.part_composition);
    s.distractor_max = doc.value("distractor_max", s.distractor_max);
    s.test_fraction = doc.value("test_fraction", s.test_fraction);
    s.unseen_object_rate = doc.value("unseen_object_rate", s.unseen_object_rate);
    s.max_objects = doc.value("max_objects", s.max_objects);
    s.max_queries = doc.value("max_queries", s.max_queries);
    s.parts = doc.at("parts").get<std::vector<std::string>>();
    s.states = doc.at("states").get<std::vector<std::string>>();
    auto read_classes = [](const nlohmann::json& arr) {
      std::vector<ClassSpec> out;
      for (const auto& c : arr) {
        out.push_back({c.at("name").get<std::string>(), c.at("parts").get<std::vector<std::string>>(),
                       c.at("states").get<std::vector<std::string>>()});
      }
      return out;
    };
    s.seen_classes = read_classes(doc.at("seen_classes"));
    if (doc.contains("unseen_classes")) s.unseen_classes = read_classes(doc.at("unseen_classes"));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("ontology spec: ") + e.what());
  }
  s.validate();
  return s;
}

nlohmann::json to_json(const OntologySpec& spec) {
  auto classes = [](const std::vector<ClassSpec>& v) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& c : v) arr.push_back({{"name", c.name}, {"parts", c.parts}, {"states", c.states}});
    return arr;
  };
  return {{"dim", spec.dim},
          {"grid", {spec.grid_height, spec.grid_width}},
          {"noise", spec.noise},
          {"state_weight", spec.state_weight},
          {"modality_gap", spec.modality_gap},
          {"class_weight", spec.class_weight},
          {"part_composition", spec.part_composition},
          {"distractor_max", spec.distractor_max},
          {"test_fraction", spec.test_fraction},
          {"unseen_object_rate", spec.unseen_object_rate},
          {"max_objects", spec.max_objects},
          {"max_queries", spec.max_queries},
          {"parts", spec.parts},
          {"states", spec.states},
          {"seen_classes", classes(spec.seen_classes)},
          {"unseen_classes", classes(spec.unseen_classes)}};
}

std::size_t SyntheticOntology::num_seen() const {
  return static_cast<std::size_t>(
      std::count_if(classes.begin(), classes.end(), [](const auto& c) { return c.seen; }));
}

std::vector<std::size_t> SceneObject::cells() const {
  std::vector<std::size_t> out;
  for (const auto& r : regions) out.insert(out.end(), r.cells.begin(), r.cells.end());
  std::sort(out.begin(), out.end());
  return out;
}

Benchmark generate_benchmark(const OntologySpec& spec, std::size_t scenes, std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  Benchmark bench;
  auto& onto = bench.ontology;
  onto.dim = spec.dim;
  onto.noise = spec.noise;
  onto.state_weight = spec.state_weight;
  onto.class_weight = spec.class_weight;
  onto.part_names = spec.parts;
  onto.state_names = spec.states;
  for (const auto* group : {&spec.seen_classes, &spec.unseen_classes}) {
    for (const auto& c : *group) {
      OntologyClass oc{c.name, group == &spec.seen_classes, {}, {}};
      for (const auto& p : c.parts) oc.parts.push_back(index_in(spec.parts, p, c.name));
      for (const auto& s : c.states) oc.states.push_back(index_in(spec.states, s, c.name));
      onto.classes.push_back(std::move(oc));
    }
  }
  const std::size_t n_classes = onto.classes.size();
  const std::size_t d = spec.dim;
  auto draw_prototypes = [&](std::size_t n) {
    Matrix m(n, d);
    for (std::size_t i = 0; i < n; ++i) {
      const Vector v = unit_gaussian(rng, d);
      std::copy(v.begin(), v.end(), m.row(i).begin());
    }
    return m;
  };
  Matrix class_text = draw_prototypes(n_classes);
  const Matrix part_text = draw_prototypes(spec.parts.size());
  const Matrix state_text = draw_prototypes(spec.states.size());
  // A class is partly described by the parts it owns.
  for (std::size_t c = 0; c < n_classes; ++c) {
    const auto& owned = onto.classes[c].parts;
    Vector t = class_text.row_copy(c);
    for (std::size_t p : owned) {
      axpy(spec.part_composition / static_cast<double>(owned.size()), part_text.row(p), t);
    }
    t = normalized(t);
    std::copy(t.begin(), t.end(), class_text.row(c).begin());
  }

  // Visual prototypes are the text prototypes seen through a fixed random map.
  onto.modality_map = Matrix::identity(d);
  {
    std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(d)));
    for (double& x : onto.modality_map.values()) x += spec.modality_gap * normal(rng);
  }
  auto to_visual = [&](const Matrix& text) {
    Matrix out(text.rows(), d);
    for (std::size_t i = 0; i < text.rows(); ++i) {
      const Vector v = normalized(matvec(onto.modality_map, text.row(i)));
      std::copy(v.begin(), v.end(), out.row(i).begin());
    }
    return out;
  };
  onto.class_prototypes = to_visual(class_text);
  onto.part_prototypes = to_visual(part_text);
  onto.state_prototypes = to_visual(state_text);

  auto& kb = bench.kb;
  for (const auto& c : onto.classes) (c.seen ? kb.seen_classes : kb.unseen_classes).push_back(c.name);
  kb.parts = spec.parts;
  kb.states = spec.states;
  kb.part_scores = Matrix(n_classes, spec.parts.size());
  kb.state_scores = Matrix(n_classes, spec.states.size());
  std::uniform_real_distribution<double> distractor(0.0, spec.distractor_max);
  for (std::size_t c = 0; c < n_classes; ++c) {
    const auto& cls = onto.classes[c];
    for (std::size_t p = 0; p < spec.parts.size(); ++p) {
      const double noise = distractor(rng);
      const bool owned = std::find(cls.parts.begin(), cls.parts.end(), p) != cls.parts.end();
      kb.part_scores(c, p) = owned ? 1.0 : noise;
    }
    for (std::size_t s = 0; s < spec.states.size(); ++s) {
      const double noise = distractor(rng);
      const bool owned = std::find(cls.states.begin(), cls.states.end(), s) != cls.states.end();
      kb.state_scores(c, s) = owned ? 1.0 : noise;
    }
  }
  kb.class_embeddings = class_text;
  for (std::size_t c = 0; c < n_classes; ++c) {
    for (std::size_t p = 0; p < spec.parts.size(); ++p) {
      Vector v = part_text.row_copy(p);
      axpy(1.0, class_text.row(c), v);
      kb.part_phrases[{p, c}] = normalized(v);
    }
    for (std::size_t s = 0; s < spec.states.size(); ++s) {
      Vector v = state_text.row_copy(s);
      axpy(1.0, class_text.row(c), v);
      kb.state_phrases[{s, c}] = normalized(v);
    }
  }
  kb.validate();

  const auto n_test = static_cast<std::size_t>(std::llround(static_cast<double>(scenes) * spec.test_fraction));
  for (std::size_t i = 0; i < scenes; ++i) bench.scenes.train.push_back(make_scene(spec, onto, rng, false));
  for (std::size_t i = 0; i < n_test; ++i) bench.scenes.test.push_back(make_scene(spec, onto, rng, true));
  return bench;
}

nlohmann::json to_json(const SyntheticOntology& onto) {
  nlohmann::json classes = nlohmann::json::array();
  for (const auto& c : onto.classes) {
    classes.push_back({{"name", c.name}, {"seen", c.seen}, {"parts", c.parts}, {"states", c.states}});
  }
  return {{"dim", onto.dim},
          {"noise", onto.noise},
          {"state_weight", onto.state_weight},
          {"parts", onto.part_names},
          {"states", onto.state_names},
          {"classes", classes},
          {"class_prototypes", io::to_json(onto.class_prototypes)},
          {"part_prototypes", io::to_json(onto.part_prototypes)},
          {"state_prototypes", io::to_json(onto.state_prototypes)},
          {"modality_map", io::to_json(onto.modality_map)}};
}

nlohmann::json to_json(const SceneSet& scenes) {
  nlohmann::json train = nlohmann::json::array();
  nlohmann::json test = nlohmann::json::array();
  for (const auto& s : scenes.train) train.push_back(scene_to_json(s));
  for (const auto& s : scenes.test) test.push_back(scene_to_json(s));
  return {{"train", train}, {"test", test}};
}

SceneSet scene_set_from_json(const nlohmann::json& doc) {
  SceneSet set;
  try {
    for (std::size_t i = 0; i < doc.at("train").size(); ++i)
      set.train.push_back(scene_from_json(doc.at("train")[i], "train[" + std::to_string(i) + "]"));
    for (std::size_t i = 0; i < doc.at("test").size(); ++i)
      set.test.push_back(scene_from_json(doc.at("test")[i], "test[" + std::to_string(i) + "]"));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("scene set: ") + e.what());
  }
  return set;
}

}  // namespace devlm
