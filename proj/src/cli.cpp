#include "pubn/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "pubn/checks.hpp"
#include "pubn/experiment.hpp"

namespace pubn {

namespace {

namespace fs = std::filesystem;

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<std::size_t> trials;
  std::string estimator;
  std::optional<double> tau;
  std::optional<double> gamma;
  std::optional<std::size_t> jobs;
  std::string sweep;
  std::size_t cases = 1000;
};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double parse_double(const std::string& s) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw Error(ErrorKind::Config, "not a number: '" + s + "'");
  return v;
}

ExperimentConfig resolve_config(const Options& o) {
  if (o.config.empty()) throw Error(ErrorKind::Config, "--config is required");
  ExperimentConfig cfg = load_config_file(o.config);
  if (o.seed) cfg.seed = *o.seed;
  if (o.trials) cfg.trials = *o.trials;
  if (o.jobs) cfg.jobs = *o.jobs;
  if (!o.estimator.empty()) cfg.estimators = split_list(o.estimator);
  if (o.tau) cfg.tau_grid = {*o.tau};
  if (o.gamma) cfg.gamma_grid = {*o.gamma};
  if (!o.out.empty()) cfg.out = o.out;
  cfg.validate();
  return cfg;
}

fs::path output_dir(const ExperimentConfig& cfg) {
  const fs::path dir = cfg.out.empty() ? fs::path(".") : fs::path(cfg.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::Config, "cannot create output directory " + dir.string());
  return dir;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::InvalidInput, "cannot write " + path.string());
  f << content;
}

void print_summary(std::ostream& out, const std::vector<SummaryRow>& summary) {
  char line[200];
  std::snprintf(line, sizeof line, "%-10s %6s %16s %16s %16s\n", "estimator", "trials", "error", "fpr", "fnr");
  out << line;
  for (const SummaryRow& s : summary) {
    std::snprintf(line, sizeof line, "%-10s %6zu %7.4f +- %6.4f %7.4f +- %6.4f %7.4f +- %6.4f\n", s.estimator.c_str(),
                  s.trials, s.mean_error, s.std_error, s.mean_fpr, s.std_fpr, s.mean_fnr, s.std_fnr);
    out << line;
  }
}

int cmd_gen(const Options& o, std::ostream& out) {
  ExperimentConfig cfg = resolve_config(o);
  if (!cfg.task.synthetic) throw Error(ErrorKind::Config, "gen needs a synthetic task");
  const Dataset data = trial_dataset(cfg, 0);
  if (o.out.empty() || o.out == "-") {
    write_csv(out, data);
  } else {
    std::ofstream f(o.out, std::ios::binary);
    if (!f) throw Error(ErrorKind::InvalidInput, "cannot write " + o.out);
    write_csv(f, data);
    out << "wrote " << o.out << " (hash " << dataset_hash(data) << ")\n";
  }
  return kExitOk;
}

int cmd_train(const Options& o, std::ostream& out) {
  ExperimentConfig cfg = resolve_config(o);
  if (cfg.estimators.size() != 1 && o.estimator.empty()) cfg.estimators.resize(1);
  if (cfg.estimators.size() != 1) throw Error(ErrorKind::Config, "train runs exactly one estimator");
  cfg.trials = 1;
  const fs::path dir = output_dir(cfg);
  const Dataset data = trial_dataset(cfg, 0);
  SingleRun run = run_single_detailed(cfg, data, cfg.estimators.front(), derive_seed(derive_seed(cfg.seed, 0), 100));
  ExperimentResult result;
  result.rows.push_back(run.row);
  result.summary = summarize(result.rows, cfg.estimators);

  std::ostringstream csv;
  write_rows_csv(csv, result.rows);
  write_file(dir / "results.csv", csv.str());
  write_file(dir / "summary.json", summary_json(cfg, result));
  for (const NamedScorer& m : run.models) {
    Checkpoint meta;
    meta.config = {{"estimator", run.row.estimator},
                   {"seed", std::to_string(cfg.seed)},
                   {"learning_rate", std::to_string(run.row.learning_rate)}};
    if (run.row.tau) meta.config.emplace_back("tau", std::to_string(*run.row.tau));
    if (run.row.gamma) meta.config.emplace_back("gamma", std::to_string(*run.row.gamma));
    std::ostringstream ck;
    save_checkpoint(ck, m.scorer, meta);
    write_file(dir / (m.name + ".ckpt"), ck.str());
  }
  print_summary(out, result.summary);
  return kExitOk;
}

int cmd_experiment(const Options& o, std::ostream& out) {
  const ExperimentConfig cfg = resolve_config(o);
  const fs::path dir = output_dir(cfg);
  const ExperimentResult result = run_experiment(cfg);
  std::ostringstream csv;
  write_rows_csv(csv, result.rows);
  write_file(dir / "results.csv", csv.str());
  write_file(dir / "summary.json", summary_json(cfg, result));
  print_summary(out, result.summary);
  return kExitOk;
}

int cmd_sweep(const Options& o, std::ostream& out) {
  const ExperimentConfig cfg = resolve_config(o);
  const auto colon = o.sweep.find(':');
  if (colon == std::string::npos) throw Error(ErrorKind::Config, "--sweep expects tau:v1,v2,... or rho:m1,m2,...");
  const std::string kind_name = o.sweep.substr(0, colon);
  SweepKind kind;
  if (kind_name == "tau") {
    kind = SweepKind::Tau;
  } else if (kind_name == "rho") {
    kind = SweepKind::RhoMultiplier;
  } else {
    throw Error(ErrorKind::Config, "unknown sweep '" + kind_name + "'");
  }
  std::vector<double> values;
  for (const std::string& v : split_list(o.sweep.substr(colon + 1))) values.push_back(parse_double(v));
  const fs::path dir = output_dir(cfg);
  const SweepResult result = run_sweep(cfg, kind, values);
  std::ostringstream csv;
  write_sweep_csv(csv, result);
  write_file(dir / "sweep.csv", csv.str());
  write_file(dir / "sweep.json", sweep_json(cfg, result));
  for (const SweepBlock& b : result.blocks) {
    out << kind_name << " = " << b.value << '\n';
    if (b.result) {
      print_summary(out, b.result->summary);
    } else {
      out << "  failed: " << b.error << '\n';
    }
  }
  return kExitOk;
}

int cmd_check(const Options& o, std::ostream& out) {
  const std::uint64_t seed = o.seed.value_or(0);
  const std::size_t cases = o.cases;
  const std::size_t trials = o.trials.value_or(500);
  std::vector<CheckResult> results;
  results.push_back(check_decomposition(derive_seed(seed, 1), cases));
  results.push_back(check_unbiased(Estimator::UPU, derive_seed(seed, 2), 50, trials, 200, 48));
  results.push_back(check_unbiased(Estimator::PUbN, derive_seed(seed, 3), 50, trials, 200, 48));
  results.push_back(check_nnpu_ordering(derive_seed(seed, 4), cases * 10));
  results.push_back(check_endpoints(derive_seed(seed, 5), cases));
  results.push_back(check_gradients(ScorerKind::Linear, derive_seed(seed, 6), 100, 1e-5));
  results.push_back(check_gradients(ScorerKind::Mlp, derive_seed(seed, 7), 100, 1e-4));
  results.push_back(check_eta_rule(derive_seed(seed, 8), cases * 10));
  bool ok = true;
  for (const CheckResult& r : results) {
    out << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << '\n';
    ok = ok && r.passed;
  }
  if (!o.out.empty()) {
    std::ostringstream report;
    for (const CheckResult& r : results) {
      report << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << '\n';
    }
    write_file(o.out, report.str());
  }
  return ok ? kExitOk : kExitRuntime;
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Config:
    case ErrorKind::Parse:
    case ErrorKind::InvalidPrior:
    case ErrorKind::InvalidSpec:
      return kExitConfig;
    default:
      return kExitRuntime;
  }
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"PU learning with biased negative data", "pubn"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&o](CLI::App* sub) {
    sub->add_option("--config", o.config, "JSON experiment config");
    sub->add_option("--seed", o.seed, "base seed");
    sub->add_option("--out", o.out, "output directory (file for gen and check)");
  };
  auto add_selection = [&o](CLI::App* sub) {
    sub->add_option("--estimator", o.estimator, "estimator name, or a comma separated list");
    sub->add_option("--tau", o.tau, "fix the tau grid to one value");
    sub->add_option("--gamma", o.gamma, "fix the gamma grid to one value");
  };

  CLI::App* gen = app.add_subcommand("gen", "draw a synthetic dataset to CSV");
  add_common(gen);
  CLI::App* train = app.add_subcommand("train", "train one estimator on one draw");
  add_common(train);
  add_selection(train);
  CLI::App* experiment = app.add_subcommand("experiment", "multi-trial comparison of estimators");
  add_common(experiment);
  add_selection(experiment);
  experiment->add_option("--trials", o.trials, "number of trials");
  experiment->add_option("--jobs", o.jobs, "parallel workers");
  CLI::App* sweep = app.add_subcommand("sweep", "repeat the experiment over tau or rho multipliers");
  add_common(sweep);
  add_selection(sweep);
  sweep->add_option("--trials", o.trials, "number of trials");
  sweep->add_option("--jobs", o.jobs, "parallel workers");
  sweep->add_option("--sweep", o.sweep, "tau:v1,v2,... or rho:m1,m2,...")->required();
  CLI::App* check = app.add_subcommand("check", "run the randomized oracle suites");
  check->add_option("--seed", o.seed, "base seed");
  check->add_option("--out", o.out, "also write the report to this file");
  check->add_option("--cases", o.cases, "random cases per suite");
  check->add_option("--trials", o.trials, "Monte-Carlo draws per bias config");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (gen->parsed()) return cmd_gen(o, out);
    if (train->parsed()) return cmd_train(o, out);
    if (experiment->parsed()) return cmd_experiment(o, out);
    if (sweep->parsed()) return cmd_sweep(o, out);
    if (check->parsed()) return cmd_check(o, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitConfig;
}

}  // namespace pubn
