#include <unistd.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "pubn/cli.hpp"
#include "pubn/experiment.hpp"

using namespace pubn;
namespace fs = std::filesystem;

namespace {

const char* kConfig = R"({
  "task": {
    "synthetic": {
      "dim": 2, "pi": 0.4, "rho": 0.2,
      "categories": [
        {"mean": [2, 0], "label": 1, "weight": 1.0},
        {"mean": [-2, 0], "label": -1, "weight": 0.5},
        {"mean": [0, 2], "scale": 0.8, "label": -1, "weight": 0.5, "labeled_weight": 1.0}
      ]
    },
    "sizes": {"p": 40, "bn": 40, "u": 300, "p_val": 20, "bn_val": 20, "u_val": 80, "test": 200}
  },
  "estimators": ["nnPU", "PUbN"],
  "train": {"epochs": 3, "learning_rate": 0.05, "batch_u": 30},
  "grids": {"tau": [0.7]},
  "trials": 2,
  "seed": 5
})";

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

struct Workspace {
  fs::path dir;
  fs::path config;
  Workspace() {
    dir = fs::temp_directory_path() / ("pubn_cli_test_" + std::to_string(::getpid()));
    fs::create_directories(dir);
    config = dir / "config.json";
    std::ofstream(config) << kConfig;
  }
  ~Workspace() { fs::remove_all(dir); }
};

}  // namespace

TEST_CASE("usage errors exit with the config code") {
  CHECK(cli({}).code == kExitConfig);
  CHECK(cli({"fly"}).code == kExitConfig);
  CHECK(cli({"experiment"}).code == kExitConfig);
  CHECK(cli({"experiment", "--config", "/nonexistent.json"}).code == kExitConfig);
  CHECK(cli({"experiment", "--config"}).code == kExitConfig);
  CHECK(cli({"sweep", "--config", "x.json"}).code == kExitConfig);
  CHECK(cli({"--help"}).code == kExitOk);
}

TEST_CASE("bad values map to the config code") {
  Workspace ws;
  const std::string c = ws.config.string();
  CHECK(cli({"experiment", "--config", c, "--estimator", "SVM", "--out", (ws.dir / "a").string()}).code ==
        kExitConfig);
  CHECK(cli({"experiment", "--config", c, "--gamma", "2", "--estimator", "PNU"}).code == kExitConfig);
  CHECK(cli({"sweep", "--config", c, "--sweep", "beta:1"}).code == kExitConfig);
  CHECK(cli({"sweep", "--config", c, "--sweep", "tau:x"}).code == kExitConfig);
  CHECK(cli({"train", "--config", c, "--estimator", "nnPU,PUbN"}).code == kExitConfig);
}

TEST_CASE("runtime failures map to the runtime code") {
  Workspace ws;
  const Run r = cli({"experiment", "--config", ws.config.string(), "--estimator", "PUbN", "--tau", "9", "--out",
                     (ws.dir / "x").string()});
  CHECK(r.code == kExitRuntime);
  CHECK(r.err.find("infeasible tau") != std::string::npos);
}

TEST_CASE("gen is byte reproducible") {
  Workspace ws;
  const Run a = cli({"gen", "--config", ws.config.string()});
  const Run b = cli({"gen", "--config", ws.config.string()});
  REQUIRE(a.code == kExitOk);
  CHECK(a.out == b.out);
  CHECK(a.out.rfind("split,latent,f1,f2\n", 0) == 0);
  const Run c = cli({"gen", "--config", ws.config.string(), "--seed", "6"});
  CHECK(c.out != a.out);
  REQUIRE(cli({"gen", "--config", ws.config.string(), "--out", (ws.dir / "d.csv").string()}).code == kExitOk);
  CHECK(slurp(ws.dir / "d.csv") == a.out);
}

TEST_CASE("train writes results and checkpoints") {
  Workspace ws;
  const fs::path out = ws.dir / "train";
  const Run r = cli({"train", "--config", ws.config.string(), "--estimator", "PUbN", "--out", out.string()});
  REQUIRE(r.code == kExitOk);
  CHECK(fs::exists(out / "results.csv"));
  CHECK(fs::exists(out / "summary.json"));
  REQUIRE(fs::exists(out / "g.ckpt"));
  REQUIRE(fs::exists(out / "sigma.ckpt"));
  std::ifstream ck(out / "g.ckpt");
  Checkpoint meta;
  const Scorer g = load_checkpoint(ck, &meta);
  CHECK(g.input_dim() == 2);
  bool has_tau = false;
  for (const auto& [k, v] : meta.config) has_tau = has_tau || (k == "tau" && v.rfind("0.7", 0) == 0);
  CHECK(has_tau);
}

TEST_CASE("experiment and sweep outputs are byte reproducible") {
  Workspace ws;
  const std::string c = ws.config.string();
  for (const char* verb : {"experiment", "sweep"}) {
    const fs::path a = ws.dir / (std::string(verb) + "_a");
    const fs::path b = ws.dir / (std::string(verb) + "_b");
    std::vector<std::string> args{verb, "--config", c, "--jobs", "2"};
    if (std::string(verb) == "sweep") {
      args.push_back("--sweep");
      args.push_back("tau:0.5,0.9");
    }
    auto with_out = [&](const fs::path& p) {
      auto v = args;
      v.push_back("--out");
      v.push_back(p.string());
      return v;
    };
    const Run ra = cli(with_out(a));
    const Run rb = cli(with_out(b));
    REQUIRE(ra.code == kExitOk);
    REQUIRE(rb.code == kExitOk);
    CHECK(ra.out == rb.out);
    for (const auto& entry : fs::directory_iterator(a)) {
      CHECK(slurp(entry.path()) == slurp(b / entry.path().filename()));
    }
  }
  CHECK(fs::exists(ws.dir / "experiment_a" / "results.csv"));
  CHECK(fs::exists(ws.dir / "sweep_a" / "sweep.json"));
}

TEST_CASE("overrides reach the run") {
  Workspace ws;
  const fs::path out = ws.dir / "o";
  REQUIRE(cli({"experiment", "--config", ws.config.string(), "--trials", "1", "--estimator", "PNU", "--gamma", "0.5",
               "--seed", "9", "--out", out.string()})
              .code == kExitOk);
  const std::string csv = slurp(out / "results.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 2);
  CHECK(csv.find(",PNU,,0.5,") != std::string::npos);
}

TEST_CASE("check verb") {
  Workspace ws;
  const fs::path report = ws.dir / "check.txt";
  const Run r = cli({"check", "--cases", "50", "--trials", "100", "--seed", "3", "--out", report.string()});
  CHECK(r.code == kExitOk);
  CHECK(std::count(r.out.begin(), r.out.end(), '\n') == 8);
  CHECK(r.out.find("FAIL") == std::string::npos);
  CHECK(slurp(report) == r.out);
  CHECK(cli({"check", "--cases", "50", "--trials", "100", "--seed", "3"}).out == r.out);
}
