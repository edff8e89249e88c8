#include "virel/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "virel/actor_critic.hpp"
#include "virel/boltzmann.hpp"
#include "virel/config.hpp"
#include "virel/em_exact.hpp"
#include "virel/errors.hpp"
#include "virel/format.hpp"
#include "virel/merl.hpp"
#include "virel/verify.hpp"

#ifndef VIREL_VERSION
#define VIREL_VERSION "0.0.0"
#endif

namespace virel {

namespace {

struct RunConfig {
  std::string subcommand;
  std::string config_path;
  std::uint64_t seed = 0;
  std::string out_dir;
  std::vector<std::string> overrides;
};

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

ResolvedConfig resolve(const RunConfig& run) {
  KeyValues file;
  if (!run.config_path.empty()) file = parse_config_file(run.config_path);
  KeyValues overrides;
  for (const auto& o : run.overrides) overrides.push_back(parse_override(o));
  return ResolvedConfig(run.subcommand, file, overrides);
}

std::string csv_header(const RunConfig& run, const ResolvedConfig& cfg) {
  std::ostringstream h;
  h << "# virel " << VIREL_VERSION << "\n";
  h << "# subcommand: " << run.subcommand << "\n";
  h << "# seed: " << run.seed << "\n";
  for (const auto& [k, v] : cfg.entries()) h << "# config: " << k << " = " << v << "\n";
  return h.str();
}

nlohmann::ordered_json json_header(const RunConfig& run, const ResolvedConfig& cfg) {
  nlohmann::ordered_json h;
  h["tool"] = "virel";
  h["version"] = VIREL_VERSION;
  h["subcommand"] = run.subcommand;
  h["seed"] = run.seed;
  nlohmann::ordered_json c = nlohmann::ordered_json::object();
  for (const auto& [k, v] : cfg.entries()) c[k] = v;
  h["config"] = c;
  return h;
}

/// Writes to <out_dir>/<name> when an output directory is set, else to `fallback`.
void emit(const RunConfig& run, const std::string& name, const std::string& text,
          std::ostream& fallback) {
  if (run.out_dir.empty()) {
    fallback << text;
    return;
  }
  std::filesystem::create_directories(run.out_dir);
  const auto path = std::filesystem::path(run.out_dir) / name;
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
}

int cmd_verify(const RunConfig& run, const std::string& suite_arg, std::optional<double> fault,
               std::ostream& out, std::ostream& err) {
  RunConfig r = run;
  if (!suite_arg.empty()) r.overrides.push_back("suite=" + suite_arg);
  const ResolvedConfig cfg = resolve(r);
  const std::string suite = cfg.get("suite");
  if (suite != "theorems" && suite != "operators" && suite != "gradients" && suite != "all") {
    throw UsageError("unknown verify suite: " + suite);
  }
  VerifyOptions opt;
  opt.draws = cfg.get_size("draws");
  opt.seed = run.seed;
  if (opt.draws == 0) throw UsageError("draws must be positive");

  if (fault) testing::set_normalizer_fault(*fault);
  VerifyReport report;
  try {
    report = run_verify(suite, opt);
  } catch (...) {
    testing::set_normalizer_fault(1.0);
    throw;
  }
  testing::set_normalizer_fault(1.0);

  nlohmann::ordered_json doc;
  doc["header"] = json_header(r, cfg);
  doc["report"] = to_json(report);
  emit(r, "verify.json", doc.dump(2) + "\n", out);

  if (cfg.get_bool("dirac_trace")) {
    std::ostringstream csv;
    csv << csv_header(r, cfg) << "fixture,eps,tv_distance,expected_index\n";
    const auto traces = dirac_fixture_traces(run.seed);
    for (std::size_t i = 0; i < traces.size(); ++i) {
      for (std::size_t k = 0; k < traces[i].eps.size(); ++k) {
        csv << i << ',' << format_double(traces[i].eps[k]) << ','
            << format_double(traces[i].tv_distance[k]) << ','
            << format_double(traces[i].expected_index[k]) << '\n';
      }
    }
    emit(r, "dirac.csv", csv.str(), out);
  }

  for (const auto& name : report.failures()) err << "FAILED " << name << "\n";
  if (!run.out_dir.empty()) {
    err << report.checks.size() - report.failures().size() << "/" << report.checks.size()
        << " checks passed\n";
  }
  return report.passed() ? kExitOk : kExitCheckFailed;
}

int cmd_counterexample(const RunConfig& run, std::ostream& out) {
  const ResolvedConfig cfg = resolve(run);
  const CounterexampleGrid grid = grid_from(cfg);
  std::ostringstream csv;
  csv << csv_header(run, cfg);
  csv << "k1,gamma,c,p1_closed,p1_numeric,indicator,hard_optimal_action\n";
  for (const CounterexampleRow& row : counterexample_sweep(grid)) {
    csv << row.k1 << ',' << format_double(row.gamma) << ',' << format_double(row.c) << ','
        << format_double(row.p1_closed) << ',' << format_double(row.p1_numeric) << ','
        << (row.indicator ? 1 : 0) << ','
        << (row.hard_optimal_action == CounterexampleLayout::a2 ? "a2" : "a1") << '\n';
  }
  emit(run, "counterexample.csv", csv.str(), out);
  return kExitOk;
}

int cmd_em_demo(const RunConfig& run, std::ostream& out) {
  const ResolvedConfig cfg = resolve(run);
  const std::string source = cfg.get("mdp");
  const std::string mode = cfg.get("mode");
  const double gamma = cfg.get_double("gamma");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw UsageError("gamma must lie in [0, 1)");

  std::optional<DiscreteMdp> mdp;
  if (source == "counterexample") {
    mdp = build_counterexample({cfg.get_size("k1"), cfg.get_size("k2"), gamma, 1.0});
  } else if (source == "random") {
    mdp = random_mdp(cfg.get_size("n_states"), cfg.get_size("n_actions"), run.seed, gamma);
  } else if (source.rfind("file:", 0) == 0) {
    std::ifstream f(source.substr(5));
    if (!f) throw UsageError("cannot open MDP file: " + source.substr(5));
    mdp = mdp_from_json(nlohmann::json::parse(f));
  } else {
    throw UsageError("mdp must be counterexample, random or file:<path>");
  }

  std::ostringstream csv;
  csv << csv_header(run, cfg) << "iteration";
  for (std::size_t s = 0; s < mdp->n_states(); ++s) csv << ",v" << s;
  csv << ",fingerprint\n";
  auto row = [&](std::size_t it, const Eigen::VectorXd& v, std::uint64_t fp) {
    csv << it;
    for (Eigen::Index s = 0; s < v.size(); ++s) csv << ',' << format_double(v(s));
    csv << ',' << fp << '\n';
  };

  if (mode == "policy_iteration") {
    const EmTrace trace = em_policy_iteration(*mdp);
    for (const EmIterate& it : trace.iterates) row(it.iteration, it.values, it.fingerprint);
  } else if (mode == "q_learning") {
    Rng rng(run.seed);
    std::normal_distribution<double> n(0.0, 1.0);
    QTable q0(static_cast<Eigen::Index>(mdp->n_states()), static_cast<Eigen::Index>(mdp->n_actions()));
    for (Eigen::Index i = 0; i < q0.size(); ++i) q0.data()[i] = n(rng);
    const auto iterates = em_q_learning(*mdp, q0, cfg.get_size("steps"));
    for (std::size_t k = 0; k < iterates.size(); ++k) {
      row(k, iterates[k].rowwise().maxCoeff(), policy_fingerprint(ExactPolicy::greedy(iterates[k])));
    }
  } else {
    throw UsageError("mode must be policy_iteration or q_learning");
  }
  emit(run, "em_demo.csv", csv.str(), out);
  return kExitOk;
}

int cmd_train(const RunConfig& run, std::ostream& out, std::ostream& err) {
  const ResolvedConfig cfg = resolve(run);
  const TrainConfig tc = train_config_from(cfg);
  Variant variant;
  try {
    variant = variant_from_string(cfg.get("variant"));
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  std::optional<ContinuousEnv> env;
  try {
    env = make_env(cfg.get("env"), cfg.get_size("horizon"));
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }

  TrainResult result;
  try {
    result = train(*env, tc, variant, run.seed);
  } catch (const TrainingDiverged& e) {
    err << "training diverged: " << e.what() << "\n";
    return kExitCheckFailed;
  }

  std::ostringstream csv;
  csv << csv_header(run, cfg) << "step,mean_return,eps_hat,entropy,loss_v,loss_q,loss_pi\n";
  for (const TrainRow& r : result.rows) {
    csv << r.step << ',' << format_double(r.mean_return) << ',' << format_double(r.eps_hat) << ','
        << format_double(r.entropy) << ',' << format_double(r.loss_v) << ','
        << format_double(r.loss_q) << ',' << format_double(r.loss_pi) << '\n';
  }
  emit(run, "trace.csv", csv.str(), out);
  if (!run.out_dir.empty()) {
    for (const auto& [name, params] : {std::pair{"policy.ckpt", &result.policy_params},
                                       std::pair{"q.ckpt", &result.q_params},
                                       std::pair{"v.ckpt", &result.v_params}}) {
      std::ostringstream bin;
      write_checkpoint(bin, *params);
      emit(run, name, bin.str(), out);
    }
  }
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"VIREL reinforcement-learning toolkit", "virel"};
  app.require_subcommand(1);
  app.set_version_flag("--version", VIREL_VERSION);

  RunConfig run;
  std::string suite_arg;
  std::optional<double> fault;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", run.config_path, "key = value config file")->check(CLI::ExistingFile);
    sub->add_option("--seed", run.seed, "random seed");
    sub->add_option("--out", run.out_dir, "output directory");
    sub->add_option("--set", run.overrides, "key=value override (repeatable)");
  };
  CLI::App* verify = app.add_subcommand("verify", "run property suites");
  common(verify);
  verify->add_option("suite", suite_arg, "theorems | operators | gradients | all");
  verify->add_option("--fault-normalizer", fault, "scale Boltzmann probabilities (test hook)")
      ->group("");
  CLI::App* counter = app.add_subcommand("counterexample", "MERL counterexample sweep");
  common(counter);
  CLI::App* em = app.add_subcommand("em-demo", "exact EM on a discrete MDP");
  common(em);
  CLI::App* tr = app.add_subcommand("train", "actor-critic training on a toy task");
  common(tr);

  std::vector<std::string> storage{"virel"};
  storage.insert(storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : storage) argv.push_back(s.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << VIREL_VERSION << "\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  }

  run.subcommand = app.get_subcommands().front()->get_name();
  try {
    if (run.subcommand == "verify") return cmd_verify(run, suite_arg, fault, out, err);
    if (run.subcommand == "counterexample") return cmd_counterexample(run, out);
    if (run.subcommand == "em-demo") return cmd_em_demo(run, out);
    return cmd_train(run, out, err);
  } catch (const ConfigError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitCheckFailed;
  }
}

}  // namespace virel
