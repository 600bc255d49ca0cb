#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cli.hpp"
#include "devlm/pipeline.hpp"

namespace fs = std::filesystem;
using devlm::cli::run;

namespace {

const std::string kData = DEVLM_DATA_DIR;

struct Result {
  int status = 0;
  std::string out;
  std::string err;
};

Result cli(std::vector<std::string> args) {
  args.insert(args.begin(), "devlm-cli");
  args.push_back("--quiet");
  std::ostringstream out, err;
  const int status = run(args, out, err);
  return {status, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(slurp(p)); }

// A fresh scratch directory per test case.
struct Scratch {
  fs::path dir;
  explicit Scratch(const std::string& name) : dir(fs::temp_directory_path() / ("devlm_cli_" + name)) {
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Scratch() { fs::remove_all(dir); }
  std::string operator/(const std::string& name) const { return (dir / name).string(); }
};

std::string small_config(const Scratch& s, nlohmann::json overrides = nlohmann::json::object()) {
  nlohmann::json cfg = read_json(kData + "/train_config.json");
  cfg["steps"] = 5;
  cfg["batch_size"] = 4;
  for (const auto& [k, v] : overrides.items()) cfg[k] = v;
  const std::string path = s / "config.json";
  std::ofstream(path) << cfg.dump();
  return path;
}

void generate(const Scratch& s, const std::string& name = "data", const std::string& seed = "3") {
  const Result r = cli({"gen", "--spec", kData + "/benchmark_spec.json", "--scenes", "12", "--out",
                        s / name, "--seed", seed});
  REQUIRE(r.status == 0);
}

}  // namespace

TEST_CASE("gen writes four files and is reproducible") {
  Scratch s("gen");
  generate(s, "a");
  generate(s, "b");
  for (const char* f : {"manifest.json", "ontology.json", "scenes.json", "kb.json"}) {
    CHECK(fs::exists(s.dir / "a" / f));
    CHECK(devlm::cli::file_digest(s.dir / "a" / f) == devlm::cli::file_digest(s.dir / "b" / f));
  }
  const nlohmann::json manifest = read_json(s.dir / "a" / "manifest.json");
  CHECK(manifest.at("command") == "gen");
  CHECK(manifest.at("seed") == 3);
  CHECK(manifest.at("inputs").size() == 1);
  const std::string digest = devlm::cli::file_digest(s.dir / "a" / "manifest.json");
  CHECK(read_json(s.dir / "a" / "kb.json").at("manifest_digest") == digest);
}

TEST_CASE("gen into an unwritable location fails") {
  Scratch s("gen_bad");
  std::ofstream(s / "blocker") << "x";
  const Result r = cli({"gen", "--spec", kData + "/benchmark_spec.json", "--out", s / "blocker/sub"});
  CHECK(r.status != 0);
  CHECK(r.err.find("error") != std::string::npos);
}

TEST_CASE("train writes a model, a log and a manifest; baseline logs zero graph losses") {
  Scratch s("train");
  generate(s);
  const Result r = cli({"train", "--config", small_config(s, {{"alpha", 0}, {"beta", 0}}), "--data",
                        s / "data", "--out", s / "run"});
  REQUIRE(r.status == 0);
  CHECK(fs::exists(s.dir / "run" / "model.json"));
  CHECK(fs::exists(s.dir / "run" / "manifest.json"));
  std::istringstream log(slurp(s.dir / "run" / "train_log.csv"));
  std::string line;
  std::getline(log, line);
  CHECK(line == "step,l_mask,l_match,l_sp,l_cs,total");
  int rows = 0;
  while (std::getline(log, line)) {
    ++rows;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, ',');) cols.push_back(c);
    REQUIRE(cols.size() == 6);
    CHECK(cols[3] == "0");
    CHECK(cols[4] == "0");
  }
  CHECK(rows == 5);
}

TEST_CASE("train errors name the field or the path") {
  Scratch s("train_bad");
  generate(s);
  nlohmann::json bad = read_json(kData + "/train_config.json");
  bad["learning_rte"] = 0.1;
  std::ofstream(s / "bad.json") << bad.dump();
  Result r = cli({"train", "--config", s / "bad.json", "--data", s / "data", "--out", s / "run"});
  CHECK(r.status != 0);
  CHECK(r.err.find("learning_rte") != std::string::npos);

  r = cli({"train", "--config", small_config(s), "--data", s / "nowhere", "--out", s / "run"});
  CHECK(r.status != 0);
  CHECK(r.err.find(s / "nowhere") != std::string::npos);
}

TEST_CASE("train runs are byte-identical") {
  Scratch s("train_det");
  generate(s);
  const std::string cfg = small_config(s);
  REQUIRE(cli({"train", "--config", cfg, "--data", s / "data", "--out", s / "r1"}).status == 0);
  REQUIRE(cli({"train", "--config", cfg, "--data", s / "data", "--out", s / "r2"}).status == 0);
  CHECK(slurp(s.dir / "r1" / "train_log.csv") == slurp(s.dir / "r2" / "train_log.csv"));
  CHECK(slurp(s.dir / "r1" / "model.json") == slurp(s.dir / "r2" / "model.json"));
}

TEST_CASE("eval reports, is reproducible and flags inductive exclusion") {
  Scratch s("eval");
  generate(s);
  REQUIRE(cli({"train", "--config", small_config(s), "--data", s / "data", "--out", s / "run"}).status == 0);
  const std::string model = s / "run/model.json";
  const Result a = cli({"eval", "--model", model, "--data", s / "data", "--out", s / "a.json"});
  REQUIRE(a.status == 0);
  CHECK(a.out.find("Harm.") != std::string::npos);
  REQUIRE(cli({"eval", "--model", model, "--data", s / "data", "--out", s / "b.json"}).status == 0);
  nlohmann::json ja = read_json(s / "a.json"), jb = read_json(s / "b.json");
  CHECK(fs::exists(s / "a.manifest.json"));
  ja.erase("manifest_digest");
  jb.erase("manifest_digest");
  CHECK(ja == jb);
  CHECK(ja.at("harmonic").get<double>() ==
        doctest::Approx(devlm::harmonic_mean(ja.at("seen_miou").get<double>(), ja.at("unseen_miou").get<double>())));
  CHECK(ja.at("diagnostics").at("unseen_nodes_excluded") == false);

  REQUIRE(cli({"train", "--config", small_config(s, {{"mode", "inductive"}}), "--data", s / "data", "--out",
               s / "ind"}).status == 0);
  REQUIRE(cli({"eval", "--model", s / "ind/model.json", "--data", s / "data", "--mode", "inductive", "--out",
               s / "i.json"}).status == 0);
  CHECK(read_json(s / "i.json").at("diagnostics").at("unseen_nodes_excluded") == true);

  const Result bad = cli({"eval", "--model", model, "--data", s / "data", "--mode", "zero-shot", "--out", s / "c.json"});
  CHECK(bad.status != 0);
  CHECK_FALSE(fs::exists(s / "c.json"));
}

TEST_CASE("match on small and fixture affinities") {
  Scratch s("match");
  std::ofstream(s / "one.json") << "[[0.4]]";
  REQUIRE(cli({"match", "--affinity", s / "one.json", "--out", s / "one_out.json"}).status == 0);
  CHECK(read_json(s / "one_out.json").at("plan")[0][0].get<double>() == doctest::Approx(1.0));

  std::ofstream(s / "flat.json") << "[[0.2,0.2],[0.2,0.2]]";
  REQUIRE(cli({"match", "--affinity", s / "flat.json", "--rows", "1,1", "--out", s / "flat_out.json"}).status == 0);
  for (const auto& row : read_json(s / "flat_out.json").at("plan"))
    for (const auto& x : row) CHECK(x.get<double>() == doctest::Approx(0.5));

  REQUIRE(cli({"match", "--affinity", kData + "/affinity_3x3.json", "--epsilon", "0.05", "--tol", "1e-12",
               "--max-iter", "10000", "--out", s / "fx.json"}).status == 0);
  const auto got = read_json(s / "fx.json");
  const auto want = read_json(kData + "/affinity_3x3_oracle.json");
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      CHECK(std::abs(got.at("plan")[i][j].get<double>() - want.at("plan")[i][j].get<double>()) < 1e-4);
  CHECK(got.at("converged") == true);
  CHECK(got.at("matches").size() == 3);
}

TEST_CASE("match rejects inconsistent marginals") {
  Scratch s("match_bad");
  std::ofstream(s / "a.json") << "[[0.1,0.2],[0.3,0.4]]";
  const Result r = cli({"match", "--affinity", s / "a.json", "--rows", "1,1", "--cols", "1,2", "--out", s / "o.json"});
  CHECK(r.status != 0);
  CHECK(r.err.find("MarginalSpec") != std::string::npos);
}

TEST_CASE("sweep writes one row per value and validates its parameter") {
  Scratch s("sweep");
  generate(s);
  const std::string cfg = small_config(s);
  REQUIRE(cli({"sweep", "--config", cfg, "--data", s / "data", "--param", "alpha", "--values", "0,1,2", "--out",
               s / "sweep.csv"}).status == 0);
  std::istringstream csv(slurp(s / "sweep.csv"));
  std::string line;
  std::getline(csv, line);
  CHECK(line == "value,seen,unseen,harmonic");
  int rows = 0;
  while (std::getline(csv, line)) ++rows;
  CHECK(rows == 3);

  // alpha=0 equals a baseline train + eval.
  REQUIRE(cli({"sweep", "--config", cfg, "--data", s / "data", "--param", "alpha", "--values", "0", "--out",
               s / "zero.csv"}).status == 0);
  REQUIRE(cli({"train", "--config", small_config(s, {{"alpha", 0}}), "--data", s / "data", "--out", s / "base"})
              .status == 0);
  REQUIRE(cli({"eval", "--model", s / "base/model.json", "--data", s / "data", "--out", s / "base.json"}).status == 0);
  const auto base = read_json(s / "base.json");
  std::istringstream zero(slurp(s / "zero.csv"));
  std::getline(zero, line);
  std::getline(zero, line);
  std::stringstream ss(line);
  std::string cell;
  std::getline(ss, cell, ',');
  std::getline(ss, cell, ',');
  CHECK(std::stod(cell) == doctest::Approx(base.at("seen_miou").get<double>()).epsilon(1e-12));
  std::getline(ss, cell, ',');
  CHECK(std::stod(cell) == doctest::Approx(base.at("unseen_miou").get<double>()).epsilon(1e-12));

  Result r = cli({"sweep", "--config", cfg, "--data", s / "data", "--param", "R", "--values", "2,4,8", "--out",
                  s / "r.csv"});
  CHECK(r.status == 0);
  r = cli({"sweep", "--config", cfg, "--data", s / "data", "--param", "R", "--values", "2,3", "--out", s / "r3.csv"});
  CHECK(r.status != 0);
  CHECK(r.err.find("R=3") != std::string::npos);
  r = cli({"sweep", "--config", cfg, "--data", s / "data", "--param", "gamma", "--values", "1", "--out", s / "g.csv"});
  CHECK(r.status != 0);
  CHECK(r.err.find("gamma") != std::string::npos);
}

TEST_CASE("manifest digests are content hashes") {
  CHECK(devlm::cli::sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  Scratch s("digest");
  devlm::cli::RunManifest m;
  m.command = "gen";
  m.seed = 5;
  m.version = devlm::cli::version();
  const std::string d = devlm::cli::write_manifest(m, s / "m.json");
  CHECK(d == devlm::cli::file_digest(s / "m.json"));
}
