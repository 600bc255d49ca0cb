#include "cli.hpp"

#include <openssl/evp.h>

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <optional>
#include <sstream>

#include "devlm/benchmark.hpp"
#include "devlm/errors.hpp"
#include "devlm/json_io.hpp"
#include "devlm/logging.hpp"
#include "devlm/pipeline.hpp"
#include "devlm/sinkhorn.hpp"

#ifndef DEVLM_VERSION
#define DEVLM_VERSION "0.0.0"
#endif

namespace devlm::cli {

namespace fs = std::filesystem;

const char* version() { return DEVLM_VERSION; }

std::string sha256_hex(std::string_view bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256: digest failed");
  }
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", md[i]);
    hex += buf;
  }
  return hex;
}

std::string file_digest(const fs::path& path) { return sha256_hex(io::read_text(path)); }

nlohmann::json to_json(const RunManifest& m) {
  return {{"command", m.command}, {"config", m.config}, {"inputs", m.inputs},
          {"outputs", m.outputs}, {"seed", m.seed},     {"version", m.version}};
}

std::string write_manifest(const RunManifest& manifest, const fs::path& path) {
  const std::string text = to_json(manifest).dump(2) + "\n";
  io::write_text(text, path);
  return sha256_hex(text);
}

namespace {

struct Globals {
  std::optional<std::uint64_t> seed;
  std::string out;
  bool quiet = false;
};

RunManifest start_manifest(const std::string& command, const Globals& g) {
  RunManifest m;
  m.command = command;
  m.seed = g.seed.value_or(0);
  m.version = version();
  return m;
}

// Manifest path for commands whose --out names a single file.
fs::path manifest_path_for(const fs::path& out) {
  fs::path p = out;
  return p.replace_extension(".manifest.json");
}

void require_out(const Globals& g, const std::string& command) {
  if (g.out.empty()) throw ValidationError(command + ": --out is required");
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw std::runtime_error("cannot create output directory " + dir.string() +
                             (ec ? ": " + ec.message() : ""));
  }
}

void ensure_parent(const fs::path& file) {
  if (file.has_parent_path()) ensure_dir(file.parent_path());
}

// ---- gen ------------------------------------------------------------------

struct GenArgs {
  std::string spec;
  std::size_t scenes = 200;
};

void cmd_gen(const GenArgs& a, const Globals& g) {
  require_out(g, "gen");
  const fs::path dir = g.out;
  const nlohmann::json spec_doc = io::read_json(a.spec);
  const OntologySpec spec = ontology_spec_from_json(spec_doc);
  ensure_dir(dir);

  RunManifest m = start_manifest("gen", g);
  m.config = {{"spec", to_json(spec)}, {"scenes", a.scenes}};
  m.inputs[a.spec] = file_digest(a.spec);
  for (const char* name : {"ontology.json", "scenes.json", "kb.json"}) m.outputs.push_back(name);
  const std::string digest = write_manifest(m, dir / "manifest.json");

  log_info("gen: " + std::to_string(a.scenes) + " scenes, seed " + std::to_string(m.seed));
  const Benchmark bench = generate_benchmark(spec, a.scenes, m.seed);
  nlohmann::json onto = to_json(bench.ontology);
  onto["manifest_digest"] = digest;
  io::write_json(onto, dir / "ontology.json");
  nlohmann::json scenes = to_json(bench.scenes);
  scenes["manifest_digest"] = digest;
  io::write_json(scenes, dir / "scenes.json");
  nlohmann::json kb = knowledge_base_to_json(bench.kb);
  kb["manifest_digest"] = digest;
  io::write_json(kb, dir / "kb.json");
}

// ---- train ----------------------------------------------------------------

struct TrainArgs {
  std::string config;
  std::string data;
};

TrainConfig load_config(const std::string& path, const Globals& g) {
  TrainConfig config = train_config_from_json(io::read_json(path));
  if (g.seed) config.seed = *g.seed;
  return config;
}

struct LoadedData {
  SceneSet scenes;
  KnowledgeBase kb;
};

LoadedData load_data(const fs::path& dir, RunManifest& m) {
  const fs::path scenes = dir / "scenes.json";
  const fs::path kb = dir / "kb.json";
  LoadedData d;
  d.scenes = scene_set_from_json(io::read_json(scenes));
  d.kb = load_knowledge_base(kb);
  m.inputs[scenes.string()] = file_digest(scenes);
  m.inputs[kb.string()] = file_digest(kb);
  return d;
}

void cmd_train(const TrainArgs& a, const Globals& g) {
  require_out(g, "train");
  const fs::path dir = g.out;
  const TrainConfig config = load_config(a.config, g);
  RunManifest m = start_manifest("train", g);
  m.seed = config.seed;
  m.config = to_json(config);
  m.inputs[a.config] = file_digest(a.config);
  const LoadedData data = load_data(a.data, m);
  config.validate(data.kb.dim());
  ensure_dir(dir);
  m.outputs = {"model.json", "train_log.csv"};
  const std::string digest = write_manifest(m, dir / "manifest.json");

  log_info("train: " + std::to_string(config.steps) + " steps on " +
           std::to_string(data.scenes.train.size()) + " scenes");
  const TrainResult result = train(config, data.scenes, data.kb);
  nlohmann::json model = to_json(result.model);
  model["manifest_digest"] = digest;
  io::write_json(model, dir / "model.json");
  io::write_text(training_log_csv(result.log), dir / "train_log.csv");
  if (!result.log.empty()) {
    const StepLog& last = result.log.back();
    std::ostringstream msg;
    msg << "train: final l_match " << last.l_match << ", l_sp " << last.l_sp << ", l_cs " << last.l_cs;
    log_info(msg.str());
  }
}

// ---- eval -----------------------------------------------------------------

struct EvalArgs {
  std::string model;
  std::string data;
  std::string mode = "transductive";
};

void cmd_eval(const EvalArgs& a, const Globals& g, std::ostream& out) {
  require_out(g, "eval");
  const GraphMode mode = parse_graph_mode(a.mode);
  const fs::path out_path = g.out;
  RunManifest m = start_manifest("eval", g);
  m.config = {{"mode", to_string(mode)}};
  const Model model = model_from_json(io::read_json(a.model));
  m.inputs[a.model] = file_digest(a.model);
  const LoadedData data = load_data(a.data, m);
  ensure_parent(out_path);
  m.outputs = {out_path.filename().string()};
  const std::string digest = write_manifest(m, manifest_path_for(out_path));

  const MetricsReport report = evaluate(model, data.scenes.test, data.kb, mode);
  nlohmann::json doc = to_json(report);
  doc["manifest_digest"] = digest;
  io::write_json(doc, out_path);
  out << metrics_table(report);
}

// ---- match ----------------------------------------------------------------

struct MatchArgs {
  std::string affinity;
  std::vector<double> rows;
  std::vector<double> cols;
  SinkhornOptions options;
};

void cmd_match(const MatchArgs& a, const Globals& g) {
  require_out(g, "match");
  const fs::path out_path = g.out;
  const Matrix affinity = io::matrix_from_json(io::read_json(a.affinity), a.affinity);
  if (affinity.empty()) throw ShapeError("match: affinity matrix is empty");
  Vector rows = a.rows, cols = a.cols;
  const MarginalSpec defaults = MarginalSpec::for_subgraph(affinity.rows(), affinity.cols());
  if (rows.empty()) rows = defaults.row_targets();
  if (cols.empty()) cols = defaults.col_targets();
  if (rows.size() != affinity.rows() || cols.size() != affinity.cols()) {
    throw ShapeError("match: marginal lengths must equal the affinity shape (" +
                     std::to_string(affinity.rows()) + "x" + std::to_string(affinity.cols()) + ")");
  }
  const MarginalSpec marginals(rows, cols);

  RunManifest m = start_manifest("match", g);
  m.config = {{"epsilon", a.options.epsilon}, {"max_iter", a.options.max_iter}, {"tol", a.options.tol},
              {"row_marginals", rows}, {"col_marginals", cols}};
  m.inputs[a.affinity] = file_digest(a.affinity);
  ensure_parent(out_path);
  m.outputs = {out_path.filename().string()};
  const std::string digest = write_manifest(m, manifest_path_for(out_path));

  const TransportPlan plan = sinkhorn_normalize(affinity, marginals, a.options);
  if (!plan.converged) {
    log_info("match: not converged after " + std::to_string(plan.iterations) + " sweeps");
  }
  io::write_json({{"plan", io::to_json(plan.plan)},
                  {"marginal_error", plan.marginal_error},
                  {"converged", plan.converged},
                  {"iterations", plan.iterations},
                  {"matches", argmax_match(plan)},
                  {"manifest_digest", digest}},
                 out_path);
}

// ---- sweep ----------------------------------------------------------------

struct SweepArgs {
  std::string config;
  std::string data;
  std::string param;
  std::vector<std::string> values;
};

std::size_t parse_count(const std::string& param, const std::string& text) {
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size() || v < 0) {
    throw ValidationError("sweep: " + param + " value '" + text + "' is not a non-negative integer");
  }
  return static_cast<std::size_t>(v);
}

double parse_real(const std::string& param, const std::string& text) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size() || !std::isfinite(v)) {
    throw ValidationError("sweep: " + param + " value '" + text + "' is not a number");
  }
  return v;
}

TrainConfig with_value(TrainConfig c, const std::string& param, const std::string& text) {
  if (param == "k") c.k = parse_count(param, text);
  else if (param == "R") c.R = parse_count(param, text);
  else if (param == "alpha") c.alpha = parse_real(param, text);
  else if (param == "beta") c.beta = parse_real(param, text);
  else if (param == "epsilon") c.epsilon = parse_real(param, text);
  else throw ValidationError("sweep: unknown parameter '" + param + "' (expected k, R, alpha, beta or epsilon)");
  return c;
}

void cmd_sweep(const SweepArgs& a, const Globals& g) {
  require_out(g, "sweep");
  if (a.values.empty()) throw ValidationError("sweep: --values is empty");
  const fs::path out_path = g.out;
  const TrainConfig base = load_config(a.config, g);
  RunManifest m = start_manifest("sweep", g);
  m.seed = base.seed;
  m.inputs[a.config] = file_digest(a.config);
  const LoadedData data = load_data(a.data, m);
  std::vector<TrainConfig> configs;
  for (const auto& v : a.values) {
    configs.push_back(with_value(base, a.param, v));
    try {
      configs.back().validate(data.kb.dim());
    } catch (const ValidationError& e) {
      throw ValidationError("sweep: " + a.param + "=" + v + " rejected: " + e.what());
    }
  }
  m.config = {{"base", to_json(base)}, {"param", a.param}, {"values", a.values}};
  ensure_parent(out_path);
  m.outputs = {out_path.filename().string()};
  write_manifest(m, manifest_path_for(out_path));

  std::ostringstream csv;
  csv.precision(17);
  csv << "value,seen,unseen,harmonic\n";
  for (std::size_t i = 0; i < configs.size(); ++i) {
    log_info("sweep: " + a.param + "=" + a.values[i]);
    const TrainResult result = train(configs[i], data.scenes, data.kb);
    const MetricsReport r = evaluate(result.model, data.scenes.test, data.kb, configs[i].mode);
    csv << a.values[i] << ',' << r.seen_miou << ',' << r.unseen_miou << ',' << r.harmonic << '\n';
  }
  io::write_text(csv.str(), out_path);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Decoupled vision-language graph matching experiments"};
  app.set_version_flag("--version", version());
  app.require_subcommand(1);

  Globals g;
  std::uint64_t seed = 0;
  auto* seed_opt = app.add_option("--seed", seed, "Random seed (overrides the config seed)");
  app.add_option("--out", g.out, "Output directory (gen, train) or file (eval, match, sweep)");
  app.add_flag("--quiet", g.quiet, "Suppress progress messages");

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen", "Generate a synthetic benchmark");
  gen_cmd->add_option("--spec", gen.spec, "Ontology spec JSON")->required();
  gen_cmd->add_option("--scenes", gen.scenes, "Number of training scenes")->check(CLI::PositiveNumber);

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train on a generated benchmark");
  train_cmd->add_option("--config", tr.config, "Training config JSON")->required();
  train_cmd->add_option("--data", tr.data, "Benchmark directory")->required();

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a trained model");
  eval_cmd->add_option("--model", ev.model, "Model JSON")->required();
  eval_cmd->add_option("--data", ev.data, "Benchmark directory")->required();
  eval_cmd->add_option("--mode", ev.mode, "inductive or transductive");

  MatchArgs ma;
  auto* match_cmd = app.add_subcommand("match", "Sinkhorn-normalize an affinity matrix");
  match_cmd->add_option("--affinity", ma.affinity, "Affinity JSON (array of arrays)")->required();
  match_cmd->add_option("--rows", ma.rows, "Row marginals (default: cols/rows each)")->delimiter(',');
  match_cmd->add_option("--cols", ma.cols, "Column marginals (default: 1 each)")->delimiter(',');
  match_cmd->add_option("--epsilon", ma.options.epsilon, "Entropic regularization");
  match_cmd->add_option("--max-iter", ma.options.max_iter, "Maximum scaling sweeps");
  match_cmd->add_option("--tol", ma.options.tol, "Marginal tolerance");

  SweepArgs sw;
  auto* sweep_cmd = app.add_subcommand("sweep", "Train and evaluate over one parameter");
  sweep_cmd->add_option("--config", sw.config, "Base training config JSON")->required();
  sweep_cmd->add_option("--data", sw.data, "Benchmark directory")->required();
  sweep_cmd->add_option("--param", sw.param, "k, R, alpha, beta or epsilon")->required();
  sweep_cmd->add_option("--values", sw.values, "Comma-separated values")->required()->delimiter(',');

  for (auto* sub : {gen_cmd, train_cmd, eval_cmd, match_cmd, sweep_cmd}) sub->fallthrough();

  std::vector<std::string> rev(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }
  if (seed_opt->count() > 0) g.seed = seed;

  const LogLevel previous = log_level();
  set_log_level(g.quiet ? LogLevel::kQuiet : LogLevel::kInfo);
  int status = 0;
  try {
    if (*gen_cmd) cmd_gen(gen, g);
    else if (*train_cmd) cmd_train(tr, g);
    else if (*eval_cmd) cmd_eval(ev, g, out);
    else if (*match_cmd) cmd_match(ma, g);
    else if (*sweep_cmd) cmd_sweep(sw, g);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    status = 1;
  }
  set_log_level(previous);
  return status;
}

}  // namespace devlm::cli
