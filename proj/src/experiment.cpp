#include "pubn/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <thread>

#include "json.hpp"

namespace pubn {

using json = nlohmann::ordered_json;

Metrics evaluate_metrics(std::span<const int> predictions, std::span<const int> truths) {
  if (predictions.size() != truths.size()) throw Error(ErrorKind::InvalidInput, "prediction and truth lengths differ");
  if (predictions.empty()) throw Error(ErrorKind::InvalidInput, "no predictions to evaluate");
  std::size_t fp = 0, fn = 0, pos = 0, neg = 0;
  for (std::size_t i = 0; i < truths.size(); ++i) {
    const int p = predictions[i];
    const int t = truths[i];
    if ((p != 1 && p != -1) || (t != 1 && t != -1)) throw Error(ErrorKind::InvalidInput, "labels must be +1 or -1");
    if (t == 1) {
      ++pos;
      if (p == -1) ++fn;
    } else {
      ++neg;
      if (p == 1) ++fp;
    }
  }
  Metrics m;
  m.fpr = neg ? static_cast<double>(fp) / static_cast<double>(neg) : 0.0;
  m.fnr = pos ? static_cast<double>(fn) / static_cast<double>(pos) : 0.0;
  m.error = static_cast<double>(fp + fn) / static_cast<double>(truths.size());
  return m;
}

int predict(double score) { return score > 0.0 ? 1 : -1; }

Metrics evaluate_on(const SampleList& test, const DecisionFunction& g) {
  std::vector<int> pred, truth;
  pred.reserve(test.size());
  truth.reserve(test.size());
  for (const Sample& s : test) {
    if (!s.label) throw Error(ErrorKind::InvalidInput, "test sample without a label");
    pred.push_back(predict(g.score(s.features)));
    truth.push_back(*s.label);
  }
  return evaluate_metrics(pred, truth);
}

void ExperimentConfig::validate() const {
  if (!task.synthetic && task.csv_path.empty()) throw Error(ErrorKind::Config, "task needs a synthetic spec or a csv path");
  if (task.synthetic) task.synthetic->validate();
  if (!task.synthetic && !priors) throw Error(ErrorKind::Config, "csv tasks need explicit priors");
  if (estimators.empty()) throw Error(ErrorKind::Config, "no estimators listed");
  for (const std::string& e : estimators) {
    if (e == kPuToPn) continue;
    const Estimator est = estimator_from_string(e);
    if (uses_sigma(est) && tau_grid.empty()) throw Error(ErrorKind::Config, e + " needs a non-empty tau grid");
    if (uses_gamma(est) && gamma_grid.empty()) throw Error(ErrorKind::Config, e + " needs a non-empty gamma grid");
  }
  for (double t : tau_grid) {
    if (!(t > 0.0)) throw Error(ErrorKind::Config, "tau values must be positive");
  }
  for (double g : gamma_grid) {
    if (!(g >= 0.0 && g <= 1.0)) throw Error(ErrorKind::Config, "gamma values must lie in [0, 1]");
  }
  for (double lr : learning_rate_grid) {
    if (!(lr > 0.0)) throw Error(ErrorKind::Config, "learning rates must be positive");
  }
  if (trials < 1) throw Error(ErrorKind::Config, "trials must be at least 1");
  if (jobs < 1) throw Error(ErrorKind::Config, "jobs must be at least 1");
  train.validate();
}

std::vector<double> ExperimentConfig::learning_rates() const {
  return learning_rate_grid.empty() ? std::vector<double>{train.learning_rate} : learning_rate_grid;
}

Priors ExperimentConfig::effective_priors() const {
  if (priors) return *priors;
  if (task.synthetic) return task.synthetic->priors();
  throw Error(ErrorKind::Config, "no priors available");
}

namespace {

template <typename T>
T get_or(const json& obj, const char* key, T fallback) {
  if (!obj.contains(key)) return fallback;
  return obj.at(key).get<T>();
}

LatentMixtureSpec parse_mixture(const json& j) {
  LatentMixtureSpec spec;
  spec.dim = j.at("dim").get<std::size_t>();
  spec.pi = j.at("pi").get<double>();
  spec.rho = get_or<double>(j, "rho", 0.0);
  for (const json& c : j.at("categories")) {
    Category cat;
    cat.mean = c.at("mean").get<Vector>();
    cat.scale = get_or<double>(c, "scale", 1.0);
    cat.label = c.at("label").get<int>();
    cat.weight = c.at("weight").get<double>();
    cat.labeled_weight = get_or<double>(c, "labeled_weight", 0.0);
    spec.categories.push_back(std::move(cat));
  }
  return spec;
}

json mixture_json(const LatentMixtureSpec& spec) {
  json j;
  j["dim"] = spec.dim;
  j["pi"] = spec.pi;
  j["rho"] = spec.rho;
  j["categories"] = json::array();
  for (const Category& c : spec.categories) {
    j["categories"].push_back(json{{"mean", c.mean},
                                   {"scale", c.scale},
                                   {"label", c.label},
                                   {"weight", c.weight},
                                   {"labeled_weight", c.labeled_weight}});
  }
  return j;
}

ModelSpec parse_model(const json& m) {
  ModelSpec spec;
  const std::string kind = get_or<std::string>(m, "kind", "linear");
  if (kind == "linear") {
    spec.kind = ScorerKind::Linear;
  } else if (kind == "mlp") {
    spec.kind = ScorerKind::Mlp;
    spec.hidden = m.at("hidden").get<std::vector<std::size_t>>();
    if (spec.hidden.empty()) throw Error(ErrorKind::Config, "mlp needs at least one hidden layer");
  } else {
    throw Error(ErrorKind::Config, "unknown model kind '" + kind + "'");
  }
  return spec;
}

json model_json(const ModelSpec& m) { return json{{"kind", to_string(m.kind)}, {"hidden", m.hidden}}; }

ExperimentConfig parse_config(const json& j, const std::string& base_dir) {
  ExperimentConfig cfg;
  const json& task = j.at("task");
  if (task.contains("synthetic")) {
    cfg.task.synthetic = parse_mixture(task.at("synthetic"));
    const json sizes = task.value("sizes", json::object());
    cfg.task.sizes.n_p = get_or<std::size_t>(sizes, "p", 0);
    cfg.task.sizes.n_bn = get_or<std::size_t>(sizes, "bn", 0);
    cfg.task.sizes.n_u = get_or<std::size_t>(sizes, "u", 0);
    cfg.task.sizes.n_p_val = get_or<std::size_t>(sizes, "p_val", 0);
    cfg.task.sizes.n_bn_val = get_or<std::size_t>(sizes, "bn_val", 0);
    cfg.task.sizes.n_u_val = get_or<std::size_t>(sizes, "u_val", 0);
    cfg.task.sizes.n_test = get_or<std::size_t>(sizes, "test", 0);
  } else if (task.contains("csv")) {
    std::filesystem::path p = task.at("csv").get<std::string>();
    if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
    cfg.task.csv_path = p.lexically_normal().string();
  } else {
    throw Error(ErrorKind::Config, "task must contain 'synthetic' or 'csv'");
  }
  if (j.contains("priors")) {
    const json& pr = j.at("priors");
    cfg.priors = Priors(pr.at("pi").get<double>(), get_or<double>(pr, "rho", 0.0));
  }
  if (j.contains("estimators")) cfg.estimators = j.at("estimators").get<std::vector<std::string>>();
  if (j.contains("model")) cfg.model = parse_model(j.at("model"));
  if (j.contains("sigma_model")) cfg.sigma_model = parse_model(j.at("sigma_model"));
  if (j.contains("train")) {
    const json& t = j.at("train");
    TrainConfig& tc = cfg.train;
    tc.epochs = get_or(t, "epochs", tc.epochs);
    tc.batch_p = get_or(t, "batch_p", tc.batch_p);
    tc.batch_bn = get_or(t, "batch_bn", tc.batch_bn);
    tc.batch_u = get_or(t, "batch_u", tc.batch_u);
    tc.learning_rate = get_or(t, "learning_rate", tc.learning_rate);
    tc.lr_decay_epochs = get_or(t, "lr_decay_epochs", tc.lr_decay_epochs);
    tc.beta_threshold = get_or(t, "beta", tc.beta_threshold);
    tc.weight_decay = get_or(t, "weight_decay", tc.weight_decay);
    tc.disjoint_sigma = get_or(t, "disjoint_sigma", tc.disjoint_sigma);
    if (t.contains("loss")) cfg.loss = Loss{loss_kind_from_string(t.at("loss").get<std::string>())};
  }
  if (j.contains("grids")) {
    const json& g = j.at("grids");
    cfg.tau_grid = get_or(g, "tau", cfg.tau_grid);
    cfg.gamma_grid = get_or(g, "gamma", cfg.gamma_grid);
    cfg.learning_rate_grid = get_or(g, "learning_rate", cfg.learning_rate_grid);
  }
  cfg.trials = get_or(j, "trials", cfg.trials);
  cfg.seed = get_or(j, "seed", cfg.seed);
  cfg.jobs = get_or(j, "jobs", cfg.jobs);
  cfg.out = get_or(j, "out", cfg.out);
  return cfg;
}

json config_json(const ExperimentConfig& cfg) {
  json j;
  if (cfg.task.synthetic) {
    const SplitSizes& s = cfg.task.sizes;
    j["task"] = json{{"synthetic", mixture_json(*cfg.task.synthetic)},
                     {"sizes", json{{"p", s.n_p},
                                    {"bn", s.n_bn},
                                    {"u", s.n_u},
                                    {"p_val", s.n_p_val},
                                    {"bn_val", s.n_bn_val},
                                    {"u_val", s.n_u_val},
                                    {"test", s.n_test}}}};
  } else {
    j["task"] = json{{"csv", cfg.task.csv_path}};
  }
  const Priors pr = cfg.effective_priors();
  j["priors"] = json{{"pi", pr.pi()}, {"rho", pr.rho()}};
  j["estimators"] = cfg.estimators;
  j["model"] = model_json(cfg.model);
  j["sigma_model"] = model_json(cfg.sigma_model.value_or(cfg.model));
  const TrainConfig& t = cfg.train;
  j["train"] = json{{"epochs", t.epochs},
                    {"batch_p", t.batch_p},
                    {"batch_bn", t.batch_bn},
                    {"batch_u", t.batch_u},
                    {"learning_rate", t.learning_rate},
                    {"lr_decay_epochs", t.lr_decay_epochs},
                    {"beta", t.beta_threshold},
                    {"weight_decay", t.weight_decay},
                    {"disjoint_sigma", t.disjoint_sigma},
                    {"loss", to_string(cfg.loss.kind)}};
  j["grids"] = json{{"tau", cfg.tau_grid}, {"gamma", cfg.gamma_grid}, {"learning_rate", cfg.learning_rates()}};
  j["trials"] = cfg.trials;
  j["seed"] = cfg.seed;
  return j;
}

}  // namespace

ExperimentConfig load_config(std::istream& in, const std::string& base_dir) {
  try {
    const json j = json::parse(in);
    ExperimentConfig cfg = parse_config(j, base_dir);
    return cfg;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Config, e.what());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::InvalidPrior) throw Error(ErrorKind::Config, e.what());
    throw;
  }
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Config, "cannot open config " + path);
  return load_config(in, std::filesystem::path(path).parent_path().string());
}

Dataset trial_dataset(const ExperimentConfig& config, std::size_t trial) {
  const Priors priors = config.effective_priors();
  Dataset data;
  if (config.task.synthetic) {
    data = generate(*config.task.synthetic, config.task.sizes, derive_seed(config.seed, trial, 0xda7a));
  } else {
    data = ingest_csv(config.task.csv_path, priors);
  }
  data.priors = priors;
  data.validate();
  return data;
}

std::string dataset_hash(const Dataset& data) {
  // FNV-1a over tags and feature bytes.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix_bytes = [&h](const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 0x100000001b3ULL;
    }
  };
  auto mix_list = [&](const SampleList& list, char tag) {
    mix_bytes(&tag, 1);
    for (const Sample& s : list) mix_bytes(s.features.data(), s.features.size() * sizeof(double));
  };
  mix_list(data.train.p, 'p');
  mix_list(data.train.bn, 'b');
  mix_list(data.train.u, 'u');
  mix_list(data.valid.p, 'P');
  mix_list(data.valid.bn, 'B');
  mix_list(data.valid.u, 'U');
  mix_list(data.test, 't');
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

// Positive only where both scores are positive.
class MinScore final : public DecisionFunction {
 public:
  MinScore(Scorer a, Scorer b) : a_(std::move(a)), b_(std::move(b)) {}
  double score(std::span<const double> x) const override { return std::min(a_.score(x), b_.score(x)); }

 private:
  Scorer a_;
  Scorer b_;
};

std::vector<EpochPoint> series_of(const TrainReport& report) {
  std::vector<EpochPoint> out;
  for (const EpochStats& e : report.epochs) {
    out.push_back({e.epoch, e.train_risk, e.validation_loss, e.monitor, e.corrected_steps});
  }
  return out;
}

struct Candidate {
  double validation_loss = std::numeric_limits<double>::infinity();
  std::optional<double> tau;
  std::optional<double> gamma;
  double learning_rate = 0.0;
  std::optional<TrainedModel> model;
  std::optional<Scorer> sigma;
};

SingleRun pu_to_pn(const ExperimentConfig& config, const Dataset& data, std::uint64_t seed) {
  const Priors priors = data.priors;
  if (!(priors.rho() > 0.0) || data.train.bn.empty()) {
    throw Error(ErrorKind::EmptySplit, std::string(kPuToPn) + " needs bN data and rho > 0");
  }
  // Classifier A separates s=+1 from s=-1; classifier B separates P from bN.
  const Priors pn_priors(priors.pi() / (priors.pi() + priors.rho()), 0.0);
  const Partition pn_train{data.train.p, data.train.bn, {}};
  const Partition pn_valid{data.valid.p, data.valid.bn, {}};
  RiskSpec pn_spec;
  pn_spec.estimator = Estimator::PN;
  pn_spec.loss = config.loss;

  std::optional<SigmaFit> best_a;
  std::optional<TrainedModel> best_b;
  double best_a_loss = std::numeric_limits<double>::infinity();
  double best_b_loss = std::numeric_limits<double>::infinity();
  double lr_b = 0.0;
  for (double lr : config.learning_rates()) {
    TrainConfig tc = config.train;
    tc.learning_rate = lr;
    tc.seed = seed;
    SigmaFit a = estimate_sigma(data.train, data.valid, priors, config.sigma_model.value_or(config.model), data.dim, tc);
    if (a.report.best_validation_loss < best_a_loss) {
      best_a_loss = a.report.best_validation_loss;
      best_a = std::move(a);
    }
    TrainConfig tb = tc;
    tb.seed = derive_seed(seed, 5);
    Scorer b = config.model.build(data.dim, tc.weight_decay, derive_seed(seed, 6));
    TrainReport rb = fit(pn_train, pn_priors, b, pn_spec, nullptr, tb, [&](const Scorer& s) {
      return risk_pn(pn_valid, pn_priors, s, kSigmoidLoss).total;
    });
    if (rb.best_validation_loss < best_b_loss) {
      best_b_loss = rb.best_validation_loss;
      lr_b = lr;
      best_b = TrainedModel{std::move(b), std::move(rb)};
    }
  }
  const MinScore composed(best_a->scorer, best_b->scorer);
  ResultRow row;
  row.estimator = kPuToPn;
  row.learning_rate = lr_b;
  row.metrics = data.test.empty() ? Metrics{} : evaluate_on(data.test, composed);
  row.validation_loss = validation_loss_g(data.valid, composed, priors);
  row.best_epoch = best_b->report.best_epoch;
  return {row, {{"sigma", best_a->scorer}, {"pn", best_b->scorer}}};
}

}  // namespace

SingleRun run_single_detailed(const ExperimentConfig& config, const Dataset& data, const std::string& estimator,
                              std::uint64_t seed, std::optional<double> eta_rho) {
  SingleRun out;
  ResultRow& row = out.row;
  if (estimator == kPuToPn) {
    out = pu_to_pn(config, data, seed);
  } else {
    const Estimator est = estimator_from_string(estimator);
    ScorerMetric monitor;
    if (!data.test.empty()) monitor = [&data](const Scorer& g) { return evaluate_on(data.test, g).error; };
    Candidate best;
    auto consider = [&best](Candidate c) {
      if (c.validation_loss < best.validation_loss || !best.model) best = std::move(c);
    };
    std::optional<Error> last_error;
    for (double lr : config.learning_rates()) {
      TrainConfig tc = config.train;
      tc.learning_rate = lr;
      tc.seed = seed;
      if (uses_sigma(est)) {
        const SigmaFit sigma = pubn_sigma_step(data, config.sigma_model.value_or(config.model), tc, est);
        for (double tau : config.tau_grid) {
          PubnOptions opts;
          opts.estimator = est;
          opts.tau = tau;
          opts.loss = config.loss;
          opts.eta_rho = eta_rho;
          opts.monitor = monitor;
          try {
            PubnRun run = pubn_second_step(data, config.model, tc, opts, sigma);
            consider({run.model.report.best_validation_loss, tau, {}, lr, std::move(run.model), run.sigma.scorer});
          } catch (const Error& e) {
            if (e.kind() != ErrorKind::InfeasibleTau) throw;
            last_error = e;
          }
        }
      } else if (uses_gamma(est)) {
        for (double gamma : config.gamma_grid) {
          RiskSpec spec{est, config.loss, gamma, config.train.beta_threshold, {}, {}};
          TrainedModel m = train_estimator(data, config.model, tc, spec, monitor);
          consider({m.report.best_validation_loss, {}, gamma, lr, std::move(m), {}});
        }
      } else {
        RiskSpec spec{est, config.loss, {}, config.train.beta_threshold, {}, {}};
        TrainedModel m = train_estimator(data, config.model, tc, spec, monitor);
        consider({m.report.best_validation_loss, {}, {}, lr, std::move(m), {}});
      }
    }
    if (!best.model) {
      if (last_error) throw *last_error;
      throw Error(ErrorKind::DivergedTraining, "no grid point produced a model");
    }
    row.estimator = std::string(to_string(est));
    row.tau = best.tau;
    row.gamma = best.gamma;
    row.learning_rate = best.learning_rate;
    row.metrics = data.test.empty() ? Metrics{} : evaluate_on(data.test, best.model->scorer);
    row.validation_loss = best.validation_loss;
    row.best_epoch = best.model->report.best_epoch;
    row.series = series_of(best.model->report);
    out.models.push_back({"g", best.model->scorer});
    if (best.sigma) out.models.push_back({"sigma", *best.sigma});
  }
  row.seed = seed;
  row.data_hash = dataset_hash(data);
  return out;
}

ResultRow run_single(const ExperimentConfig& config, const Dataset& data, const std::string& estimator,
                     std::uint64_t seed, std::optional<double> eta_rho) {
  return run_single_detailed(config, data, estimator, seed, eta_rho).row;
}

namespace {

double mean_of(const std::vector<double>& v) {
  CompensatedSum s;
  for (double x : v) s.add(x);
  return v.empty() ? 0.0 : s.value() / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v, double mean) {
  if (v.size() < 2) return 0.0;
  CompensatedSum s;
  for (double x : v) s.add((x - mean) * (x - mean));
  return std::sqrt(s.value() / static_cast<double>(v.size() - 1));
}

}  // namespace

std::vector<SummaryRow> summarize(const std::vector<ResultRow>& rows, const std::vector<std::string>& estimators) {
  std::vector<SummaryRow> out;
  for (const std::string& name : estimators) {
    const std::string canonical = name == kPuToPn ? name : std::string(to_string(estimator_from_string(name)));
    std::vector<double> err, fpr, fnr;
    for (const ResultRow& r : rows) {
      if (r.estimator != canonical) continue;
      err.push_back(r.metrics.error);
      fpr.push_back(r.metrics.fpr);
      fnr.push_back(r.metrics.fnr);
    }
    SummaryRow s;
    s.estimator = canonical;
    s.trials = err.size();
    s.mean_error = mean_of(err);
    s.std_error = std_of(err, s.mean_error);
    s.mean_fpr = mean_of(fpr);
    s.std_fpr = std_of(fpr, s.mean_fpr);
    s.mean_fnr = mean_of(fnr);
    s.std_fnr = std_of(fnr, s.mean_fnr);
    out.push_back(s);
  }
  return out;
}

namespace {

ExperimentResult run_experiment_impl(const ExperimentConfig& config, std::optional<double> eta_rho) {
  config.validate();
  const std::size_t n_est = config.estimators.size();
  std::vector<std::vector<ResultRow>> per_trial(config.trials);
  std::vector<std::exception_ptr> failures(config.trials);

  auto run_trial = [&](std::size_t t) {
    try {
      const std::uint64_t trial_seed = derive_seed(config.seed, t);
      const Dataset data = trial_dataset(config, t);
      for (std::size_t i = 0; i < n_est; ++i) {
        const std::string& name = config.estimators[i];
        try {
          ResultRow row = run_single(config, data, name, derive_seed(trial_seed, 100 + i), eta_rho);
          row.trial = t;
          per_trial[t].push_back(std::move(row));
        } catch (const Error& e) {
          throw Error(e.kind(), "trial " + std::to_string(t) + ", estimator " + name + ": " + e.what());
        }
      }
    } catch (...) {
      failures[t] = std::current_exception();
    }
  };

  const std::size_t workers = std::min(config.jobs, config.trials);
  if (workers <= 1) {
    for (std::size_t t = 0; t < config.trials; ++t) run_trial(t);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t t = next++; t < config.trials; t = next++) run_trial(t);
      });
    }
    for (std::thread& th : pool) th.join();
  }
  for (const auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }
  ExperimentResult result;
  for (auto& rows : per_trial) {
    for (auto& r : rows) result.rows.push_back(std::move(r));
  }
  result.summary = summarize(result.rows, config.estimators);
  return result;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config) { return run_experiment_impl(config, {}); }

SweepResult run_sweep(const ExperimentConfig& config, SweepKind kind, const std::vector<double>& values) {
  if (values.empty()) throw Error(ErrorKind::Config, "sweep needs at least one value");
  SweepResult out;
  out.kind = kind;
  const Priors truth = config.effective_priors();
  for (double v : values) {
    SweepBlock block;
    block.value = v;
    try {
      ExperimentConfig cfg = config;
      std::optional<double> eta_rho;
      if (kind == SweepKind::Tau) {
        cfg.tau_grid = {v};
      } else {
        if (!(v > 0.0)) throw Error(ErrorKind::Config, "rho multipliers must be positive");
        cfg.priors = truth.with_rho(truth.rho() * v);
        // tau -> eta keeps using the true rho.
        eta_rho = truth.rho();
      }
      block.result = run_experiment_impl(cfg, eta_rho);
    } catch (const Error& e) {
      block.error = e.what();
    }
    out.blocks.push_back(std::move(block));
  }
  return out;
}

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string opt_num(const std::optional<double>& v) { return v ? num(*v) : std::string(); }

constexpr const char* kRowHeader =
    "trial,seed,estimator,tau,gamma,learning_rate,fpr,fnr,error,validation_loss,best_epoch,data_hash";

std::string row_csv(const ResultRow& r) {
  return std::to_string(r.trial) + ',' + std::to_string(r.seed) + ',' + r.estimator + ',' + opt_num(r.tau) + ',' +
         opt_num(r.gamma) + ',' + num(r.learning_rate) + ',' + num(r.metrics.fpr) + ',' + num(r.metrics.fnr) + ',' +
         num(r.metrics.error) + ',' + num(r.validation_loss) + ',' + std::to_string(r.best_epoch) + ',' + r.data_hash;
}

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json row_json(const ResultRow& r) {
  json j{{"trial", r.trial},
         {"seed", r.seed},
         {"estimator", r.estimator},
         {"tau", opt_json(r.tau)},
         {"gamma", opt_json(r.gamma)},
         {"learning_rate", r.learning_rate},
         {"fpr", r.metrics.fpr},
         {"fnr", r.metrics.fnr},
         {"error", r.metrics.error},
         {"validation_loss", r.validation_loss},
         {"best_epoch", r.best_epoch},
         {"data_hash", r.data_hash}};
  json series{{"epoch", json::array()},
              {"train_risk", json::array()},
              {"validation_loss", json::array()},
              {"test_error", json::array()},
              {"corrected_steps", json::array()}};
  for (const EpochPoint& p : r.series) {
    series["epoch"].push_back(p.epoch);
    series["train_risk"].push_back(p.train_risk);
    series["validation_loss"].push_back(p.validation_loss);
    series["test_error"].push_back(p.test_error);
    series["corrected_steps"].push_back(p.corrected_steps);
  }
  j["series"] = std::move(series);
  return j;
}

json summary_rows_json(const std::vector<SummaryRow>& rows) {
  json arr = json::array();
  for (const SummaryRow& s : rows) {
    arr.push_back(json{{"estimator", s.estimator},
                       {"trials", s.trials},
                       {"error", json{{"mean", s.mean_error}, {"std", s.std_error}}},
                       {"fpr", json{{"mean", s.mean_fpr}, {"std", s.std_fpr}}},
                       {"fnr", json{{"mean", s.mean_fnr}, {"std", s.std_fnr}}}});
  }
  return arr;
}

json result_json(const ExperimentResult& result) {
  json rows = json::array();
  for (const ResultRow& r : result.rows) rows.push_back(row_json(r));
  return json{{"summary", summary_rows_json(result.summary)}, {"rows", std::move(rows)}};
}

}  // namespace

void write_rows_csv(std::ostream& out, const std::vector<ResultRow>& rows) {
  out << kRowHeader << '\n';
  for (const ResultRow& r : rows) out << row_csv(r) << '\n';
}

std::string summary_json(const ExperimentConfig& config, const ExperimentResult& result) {
  json j{{"format", "pubn-results"}, {"version", 1}, {"config", config_json(config)}};
  const json body = result_json(result);
  j["summary"] = body["summary"];
  j["rows"] = body["rows"];
  return j.dump(2) + "\n";
}

std::string sweep_json(const ExperimentConfig& config, const SweepResult& result) {
  json j{{"format", "pubn-sweep"},
         {"version", 1},
         {"sweep", result.kind == SweepKind::Tau ? "tau" : "rho"},
         {"config", config_json(config)},
         {"blocks", json::array()}};
  for (const SweepBlock& b : result.blocks) {
    json block{{"value", b.value}};
    if (b.result) {
      const json body = result_json(*b.result);
      block["summary"] = body["summary"];
      block["rows"] = body["rows"];
    } else {
      block["error"] = b.error;
    }
    j["blocks"].push_back(std::move(block));
  }
  return j.dump(2) + "\n";
}

void write_sweep_csv(std::ostream& out, const SweepResult& result) {
  const char* name = result.kind == SweepKind::Tau ? "tau" : "rho_multiplier";
  out << "sweep,value," << kRowHeader << ",failure\n";
  for (const SweepBlock& b : result.blocks) {
    if (!b.result) {
      std::string quoted = b.error;
      for (std::size_t i = 0; (i = quoted.find('"', i)) != std::string::npos; i += 2) quoted.insert(i, 1, '"');
      out << name << ',' << num(b.value) << std::string(13, ',') << '"' << quoted << "\"\n";
      continue;
    }
    for (const ResultRow& r : b.result->rows) out << name << ',' << num(b.value) << ',' << row_csv(r) << ",\n";
  }
}

}  // namespace pubn
