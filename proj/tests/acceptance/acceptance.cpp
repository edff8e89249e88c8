// Acceptance harness: one PASS/FAIL line per criterion.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "oracles.hpp"
#include "virel/actor_critic.hpp"
#include "virel/bellman.hpp"
#include "virel/boltzmann.hpp"
#include "virel/cli.hpp"
#include "virel/config.hpp"
#include "virel/em_exact.hpp"
#include "virel/format.hpp"
#include "virel/merl.hpp"

namespace fs = std::filesystem;
using namespace virel;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string sci(double x) {
  std::ostringstream o;
  o.precision(3);
  o << std::scientific << x;
  return o.str();
}

Outcome c01_closed_form() {
  double worst = 0.0;
  int indicator_bad = 0;
  const double base = std::abs(optimal_p1_numeric(1, 0.5, 1.0) - 1.0 / (std::exp(1.0) + 1.0));
  for (double k1 : {1.0, 2.0, 5.0, 20.0, 100.0}) {
    for (double g : {0.0, 0.25, 0.5, 0.9, 0.99}) {
      for (double c : {0.1, 0.3, 1.0, 3.0, 10.0}) {
        const double closed = oracle::p1_closed(k1, g, c);
        const double numeric = optimal_p1_numeric(static_cast<std::size_t>(k1), g, c);
        worst = std::max(worst, std::abs(closed - numeric));
        const bool ind = std::pow(k1, -g) * std::exp(1.0 / c) < 1.0;
        if ((numeric > 0.5) != ind) ++indicator_bad;
        if (optimal_p1_closed(static_cast<std::size_t>(k1), g, c).indicator != ind) ++indicator_bad;
      }
    }
  }
  return {base < 1e-8 && worst < 1e-8 && indicator_bad == 0,
          "k1=1 err " + sci(base) + ", grid max err " + sci(worst) + ", indicator mismatches " +
              std::to_string(indicator_bad)};
}

Outcome c02_hard_vs_soft() {
  const DiscreteMdp mdp = build_counterexample({100, 5, 0.99, 1.0});
  const EmTrace pi = em_policy_iteration(mdp);
  const std::size_t hard = pi.iterates.back().policy.mode()[CounterexampleLayout::s0];
  const double p1 = optimal_p1_numeric(100, 0.99, 1.0);
  const bool pass = hard == CounterexampleLayout::a2 && p1 > 0.5;
  return {pass, std::string("PI action at s0: ") + (hard == CounterexampleLayout::a2 ? "a2" : "a1") +
                    ", MERL p1* = " + format_double(p1)};
}

Outcome c03_em_policy_iteration() {
  double worst_iter = 0.0;
  double worst_value = 0.0;
  int length_bad = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const DiscreteMdp mdp = random_mdp(10, 4, 1000 + seed, 0.9);
    const EmTrace em = em_policy_iteration(mdp);
    const auto ref = oracle::policy_iteration(mdp);
    if (ref.size() != em.iterates.size()) {
      ++length_bad;
      continue;
    }
    for (std::size_t k = 0; k < ref.size(); ++k) {
      worst_iter = std::max(worst_iter, (em.iterates[k].q - ref[k].q).cwiseAbs().maxCoeff());
      if (em.iterates[k].policy.mode() != ref[k].policy) ++length_bad;
    }
    const QTable q_star = oracle::value_iteration(mdp);
    const Eigen::VectorXd v_star = q_star.rowwise().maxCoeff();
    worst_value = std::max(worst_value, (em.iterates.back().values - v_star).cwiseAbs().maxCoeff());
  }
  return {worst_iter < 1e-10 && worst_value < 1e-6 && length_bad == 0,
          "iterate max err " + sci(worst_iter) + ", final value err " + sci(worst_value) +
              ", sequence mismatches " + std::to_string(length_bad)};
}

Outcome c04_em_q_learning() {
  double bit_diff = 0.0;
  double limit = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const DiscreteMdp mdp = random_mdp(8, 3, 2000 + seed, 0.9);
    std::mt19937_64 rng(seed);
    const QTable q0 = oracle::gaussian(8, 3, rng);
    const std::vector<QTable> it = em_q_learning(mdp, q0, 400);
    QTable ref = it[1];
    for (std::size_t k = 2; k < it.size(); ++k) {
      ref = oracle::bellman_optimal(mdp, ref);
      bit_diff = std::max(bit_diff, (it[k] - ref).cwiseAbs().maxCoeff());
    }
    limit = std::max(limit, (it.back() - oracle::value_iteration(mdp)).cwiseAbs().maxCoeff());
  }
  return {bit_diff == 0.0 && limit < 1e-6,
          "max |EM - T*^k| = " + sci(bit_diff) + ", limit err " + sci(limit)};
}

Outcome c05_dirac() {
  std::mt19937_64 rng(5);
  const std::vector<double> temps{1.0, 0.1, 0.01, 0.001};
  double worst_final = 0.0;
  double worst_oracle = 0.0;
  int monotone_bad = 0;
  int tables = 0;
  while (tables < 50) {
    const QTable q = oracle::gaussian(5, 4, rng);
    bool unique = true;
    for (Eigen::Index s = 0; s < q.rows(); ++s) {
      Eigen::RowVectorXd row = q.row(s);
      std::sort(row.data(), row.data() + row.size());
      if (row(row.size() - 1) - row(row.size() - 2) < 0.01) unique = false;
    }
    if (!unique) continue;
    ++tables;
    for (Eigen::Index s = 0; s < q.rows(); ++s) {
      const Eigen::VectorXd row = q.row(s).transpose();
      const DiracTrace tr = dirac_limit(row, temps);
      const std::size_t star = oracle::argmax_lowest(q.row(s));
      if (tr.argmax != star) ++monotone_bad;
      for (std::size_t i = 0; i < temps.size(); ++i) {
        Eigen::VectorXd onehot = Eigen::VectorXd::Zero(row.size());
        onehot(static_cast<Eigen::Index>(star)) = 1.0;
        const double tv = 0.5 * (oracle::softmax(row, temps[i]) - onehot).cwiseAbs().sum();
        worst_oracle = std::max(worst_oracle, std::abs(tv - tr.tv_distance[i]));
        if (i > 0 && tr.tv_distance[i] > tr.tv_distance[i - 1]) ++monotone_bad;
      }
      worst_final = std::max(worst_final, tr.tv_distance.back());
    }
  }
  return {worst_final < 1e-3 && monotone_bad == 0 && worst_oracle < 1e-12,
          "max TV at eps=1e-3 " + sci(worst_final) + ", TV vs oracle " + sci(worst_oracle) +
              ", argmax or monotonicity violations " +
              std::to_string(monotone_bad)};
}

Outcome c06_elbo() {
  std::mt19937_64 rng(6);
  double worst_identity = 0.0;
  double worst_fit = 0.0;
  for (int i = 0; i < 30; ++i) {
    const QTable q = oracle::gaussian(4, 3, rng);
    const double eps = 0.1 + std::abs(oracle::gaussian(1, 1, rng)(0, 0));
    const QTable pi = oracle::random_stochastic(4, 3, rng);
    const Eigen::VectorXd d = oracle::random_simplex(4, rng);
    // l(omega) - KL(d pi || p_omega) - H(d), all from scratch.
    const QTable u = q / eps;
    const double m = u.maxCoeff();
    const double log_z = m + std::log((u.array() - m).exp().sum());
    double kl = 0.0, h_d = 0.0;
    for (Eigen::Index s = 0; s < 4; ++s) {
      h_d -= d(s) * std::log(d(s));
      for (Eigen::Index a = 0; a < 3; ++a) {
        const double joint = d(s) * pi(s, a);
        kl += joint * (std::log(joint) - (u(s, a) - log_z));
      }
    }
    const double elbo = elbo_discrete(q, eps, pi, d).elbo;
    worst_identity = std::max(worst_identity, std::abs(elbo - (log_z - kl - h_d)));

    const VariationalFit fit = fit_variational_table(q, eps, d);
    worst_fit = std::max(worst_fit, (fit.pi - oracle::boltzmann_rows(q, eps)).cwiseAbs().maxCoeff());
  }
  return {worst_identity < 1e-10 && worst_fit < 1e-8,
          "identity err " + sci(worst_identity) + ", argmax-ELBO vs pi_omega " + sci(worst_fit)};
}

Outcome c07_membership() {
  std::mt19937_64 rng(7);
  const std::vector<double> temps{1.0, 1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6};
  double worst_b = 0.0, worst_w = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const DiscreteMdp mdp = random_mdp(5, 3, 3000 + seed, 0.9);
    const QTable q = oracle::gaussian(5, 3, rng);
    const QTable tstar = oracle::bellman_optimal(mdp, q);
    const double eps = temps.back();
    const QTable b = apply_operator(OperatorSpec::boltzmann(eps), q, mdp);
    const QTable w = apply_operator(OperatorSpec::diminishing(eps), q, mdp);
    worst_b = std::max(worst_b, (b - tstar).cwiseAbs().maxCoeff());
    worst_w = std::max(worst_w, (w - tstar).cwiseAbs().maxCoeff());
  }
  // Action-independent Q: the soft policy is uniform and adds gamma c log|A|.
  const DiscreteMdp mdp = random_mdp(4, 3, 3100, 0.9);
  QTable flat(4, 3);
  for (Eigen::Index s = 0; s < 4; ++s) flat.row(s).setConstant(static_cast<double>(s));
  const double c = 1.0;
  const QTable soft = apply_operator(OperatorSpec::soft(c), flat, mdp);
  const double gap = (soft - oracle::bellman_optimal(mdp, flat)).cwiseAbs().minCoeff();
  const double bonus = mdp.gamma() * c * std::log(3.0);
  return {worst_b < 1e-6 && worst_w < 1e-6 && gap >= bonus - 1e-12,
          "Boltzmann gap " + sci(worst_b) + ", T_wk gap " + sci(worst_w) + ", soft gap " +
              format_double(gap) + " >= bonus " + format_double(bonus)};
}

Outcome c08_gradients() {
  std::mt19937_64 rng(8);
  Rng init(8);
  const int draws = 50;
  double w_q = 0, w_v = 0, w_jq = 0, w_virel = 0, w_beta = 0, w_dir = 0, w_twk = 0, w_e = 0, w_m = 0;
  for (int i = 0; i < draws; ++i) {
    auto perturb = [&](ParamVector& p, double sd) {
      p.values = oracle::gaussian(static_cast<Eigen::Index>(p.size()), 1, rng, sd).col(0);
    };
    // q_grad on discrete and continuous MLPs
    QApproximator qd = QApproximator::mlp_discrete(3, 2, 8, init);
    perturb(qd.params(), 0.5);
    const StateAction hd = StateAction::discrete(static_cast<std::size_t>(i) % 3, static_cast<std::size_t>(i) % 2);
    w_q = std::max(w_q, oracle::rel_err(qd.grad(hd).values, oracle::central_difference([&](const Eigen::VectorXd& x) {
      QApproximator c = qd; c.params().values = x; return c.eval(hd); }, qd.params().values)));

    // actor-critic losses
    const Eigen::Index n = 6;
    ValueApproximator v = ValueApproximator::mlp(2, 8, init);
    ValueApproximator vt = ValueApproximator::mlp(2, 8, init);
    QApproximator q = QApproximator::mlp(2, 1, 8, init);
    GaussianPolicy pi(2, 1, 8, init);
    perturb(v.params(), 0.5);
    perturb(vt.params(), 0.5);
    perturb(q.params(), 0.5);
    perturb(pi.params(), 0.3);
    std::vector<Transition> ts;
    for (Eigen::Index j = 0; j < n; ++j) {
      ts.push_back({oracle::gaussian(2, 1, rng).col(0), oracle::gaussian(1, 1, rng).col(0),
                    oracle::gaussian(1, 1, rng)(0, 0), oracle::gaussian(2, 1, rng).col(0), j % 3 == 0});
    }
    const Batch b = make_batch(ts);
    const Eigen::MatrixXd noise = oracle::gaussian(1, n, rng);
    const StateAction hc = StateAction::continuous(ts[0].state, ts[0].action);
    w_q = std::max(w_q, oracle::rel_err(q.grad(hc).values, oracle::central_difference([&](const Eigen::VectorXd& x) {
      QApproximator c = q; c.params().values = x; return c.eval(hc); }, q.params().values)));
    w_v = std::max(w_v, oracle::rel_err(j_v_loss(v, b, pi, q, noise).grad.values,
        oracle::central_difference([&](const Eigen::VectorXd& x) {
          ValueApproximator c = v; c.params().values = x; return j_v_loss(c, b, pi, q, noise).loss; }, v.params().values)));
    w_jq = std::max(w_jq, oracle::rel_err(j_q_loss(q, b, vt, 0.99).grad.values,
        oracle::central_difference([&](const Eigen::VectorXd& x) {
          QApproximator c = q; c.params().values = x; return j_q_loss(c, b, vt, 0.99).loss; }, q.params().values)));
    w_virel = std::max(w_virel, oracle::rel_err(j_pi_virel_loss(pi, b, q, vt, noise, 0.2).grad.values,
        oracle::central_difference([&](const Eigen::VectorXd& x) {
          GaussianPolicy c = pi; c.params().values = x; return j_pi_virel_loss(c, b, q, vt, noise, 0.2).loss; }, pi.params().values)));
    const double eps_hat = 0.3 + 0.1 * i;
    w_beta = std::max(w_beta, oracle::rel_err(j_pi_beta_loss(pi, b, q, vt, noise, eps_hat, 0.04).grad.values,
        oracle::central_difference([&](const Eigen::VectorXd& x) {
          GaussianPolicy c = pi; c.params().values = x; return j_pi_beta_loss(c, b, q, vt, noise, eps_hat, 0.04).loss; }, pi.params().values)));

    // residual gradients
    const DiscreteMdp mdp = random_mdp(3, 2, 4000 + static_cast<std::uint64_t>(i), 0.9);
    const QTable frozen = oracle::bellman_optimal(mdp, qd.table());
    w_dir = std::max(w_dir, oracle::rel_err(residual_grad_direct(qd, OperatorSpec::optimal(), mdp).values,
        oracle::central_difference([&](const Eigen::VectorXd& x) {
          QApproximator c = qd; c.params().values = x; return oracle::residual(frozen, c.table()); }, qd.params().values)));
    const double eps_k = 0.05 + 0.02 * i;
    auto twk = [&](const QApproximator& c) {
      const QTable t = c.table();
      const QTable target = oracle::bellman_policy(mdp, t, oracle::boltzmann_rows(t, eps_k));
      return oracle::residual(target, t) + eps_k;
    };
    w_twk = std::max(w_twk, oracle::rel_err(residual_grad_twk(qd, eps_k, mdp).values,
        oracle::central_difference([&](const Eigen::VectorXd& x) {
          QApproximator c = qd; c.params().values = x; return twk(c); }, qd.params().values)));

    // E-step and M-step on tabular fixtures
    const QTable qt = oracle::gaussian(3, 2, rng);
    const Eigen::VectorXd d = oracle::random_simplex(3, rng);
    SoftmaxTablePolicy sp(3, 2);
    perturb(sp.params(), 1.0);
    const double eps = 0.2 + 0.05 * i;
    auto scaled_elbo = [&](const QTable& qq, double e, const QTable& p) {
      double l = 0.0;
      for (Eigen::Index s = 0; s < 3; ++s) {
        for (Eigen::Index a = 0; a < 2; ++a) l += d(s) * p(s, a) * (qq(s, a) / e - std::log(p(s, a)));
      }
      return l;
    };
    auto probs = [](const Eigen::VectorXd& z) {
      QTable p(3, 2);
      for (Eigen::Index s = 0; s < 3; ++s) p.row(s) = oracle::softmax(z.segment(2 * s, 2), 1.0).transpose();
      return p;
    };
    w_e = std::max(w_e, oracle::rel_err(e_step_gradient(sp, qt, eps, d).values,
        oracle::central_difference([&](const Eigen::VectorXd& z) { return eps * scaled_elbo(qt, eps, probs(z)); },
                                   sp.params().values)));
    const QTable pol = oracle::random_stochastic(3, 2, rng);
    const double eps_i = twk(qd);
    const ParamVector gm = m_step_gradient(qd, pol, d, eps_i, residual_grad_twk(qd, eps_k, mdp));
    w_m = std::max(w_m, oracle::rel_err(gm.values, oracle::central_difference([&](const Eigen::VectorXd& x) {
      QApproximator c = qd; c.params().values = x;
      return eps_i * eps_i * scaled_elbo(c.table(), twk(c), pol); }, qd.params().values)));
  }
  const double worst = std::max({w_q, w_v, w_jq, w_virel, w_beta, w_dir, w_twk, w_e, w_m});
  std::ostringstream o;
  o << "q " << sci(w_q) << ", J^V " << sci(w_v) << ", J^Q " << sci(w_jq) << ", J^pi virel " << sci(w_virel)
    << ", J^pi beta " << sci(w_beta) << ", direct " << sci(w_dir) << ", twk " << sci(w_twk)
    << ", E-step " << sci(w_e) << ", M-step " << sci(w_m);
  return {worst < 1e-4, o.str()};
}

Outcome c09_projected() {
  std::mt19937_64 rng(9);
  double worst_gtd = 0.0, worst_proj = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const DiscreteMdp mdp = random_mdp(3, 2, 5000 + seed, 0.9);
    const QTable pi = oracle::random_stochastic(3, 2, rng);
    const Eigen::MatrixXd phi = oracle::gaussian(6, 3, rng);
    const GtdResult g = gtd_solve(phi, mdp, pi, 0.5, 0.1);
    worst_gtd = std::max(worst_gtd, (g.state.omega - oracle::lstd(phi, mdp, pi)).cwiseAbs().maxCoeff());

    QApproximator q = QApproximator::linear(Eigen::MatrixXd::Identity(6, 6), 3, 2);
    ParamVector w = q.params();
    w.values = oracle::gaussian(6, 1, rng).col(0);
    q.set_params(w);
    const OperatorSpec op = OperatorSpec::on_policy(pi);
    const double plain = oracle::residual(oracle::bellman_policy(mdp, q.table(), pi), q.table());
    worst_proj = std::max(worst_proj, std::abs(projected_residual_linear(q, op, mdp) - plain));
  }
  return {worst_gtd < 1e-6 && worst_proj < 1e-12,
          "GTD vs LSTD " + sci(worst_gtd) + ", one-hot projected vs plain " + sci(worst_proj)};
}

Outcome c10_incremental() {
  std::mt19937_64 rng(10);
  std::vector<double> schedule;
  for (double e = 1.0; e >= 1e-6 * 0.999; e /= 10.0) schedule.push_back(e);
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const DiscreteMdp mdp = random_mdp(4, 3, 6000 + seed, 0.8);
    const QTable qt = oracle::gaussian(4, 3, rng);
    QApproximator q = QApproximator::tabular(4, 3);
    ParamVector p = q.params();
    p.values = Eigen::Map<const Eigen::VectorXd>(qt.data(), 12);
    q.set_params(p);
    const double eps_omega = oracle::residual(oracle::bellman_optimal(mdp, qt), qt);
    const double last = schedule.back();
    worst = std::max(worst, std::abs(incremental_residual(q, last, mdp) - last - eps_omega));
  }
  return {worst < 1e-6, "final gap " + sci(worst)};
}

TrainConfig load_config(const std::string& name) {
  const KeyValues kv = parse_config_file(std::string(VIREL_SOURCE_DIR) + "/configs/" + name);
  return train_config_from(ResolvedConfig("train", kv, {}));
}

double random_baseline(const ContinuousEnv& env, std::size_t episodes, std::uint64_t seed) {
  Rng rng(seed);
  double total = 0.0;
  for (std::size_t ep = 0; ep < episodes; ++ep) {
    Eigen::VectorXd s = env.reset(rng);
    for (std::size_t t = 0; t < env.horizon(); ++t) {
      Eigen::VectorXd a(env.action_dim());
      for (Eigen::Index i = 0; i < a.size(); ++i) {
        a(i) = std::uniform_real_distribution<double>(env.action_low()(i), env.action_high()(i))(rng);
      }
      const StepResult r = env.step(s, a, rng);
      total += r.reward;
      s = r.next_state;
      if (r.done) break;
    }
  }
  return total / static_cast<double>(episodes);
}

Outcome c11_training() {
  std::ostringstream o;
  bool pass = true;
  const ContinuousEnv bandit = ContinuousEnv::continuous_bandit();
  const TrainConfig bc = load_config("bandit.conf");
  for (Variant v : {Variant::kVirel, Variant::kBeta}) {
    o << to_string(v) << " bandit:";
    for (std::uint64_t seed : {1, 2, 3}) {
      const TrainResult r = train(bandit, bc, v, seed);
      pass = pass && r.final_return >= 0.95 && bc.total_steps <= 20000;
      o << ' ' << format_double(std::round(r.final_return * 1e4) / 1e4);
      if (v == Variant::kBeta) {
        double peak = 0.0;
        for (const auto& row : r.rows) peak = std::max(peak, row.eps_hat);
        const double end = r.rows.back().eps_hat;
        pass = pass && end < 0.2 * peak;
        o << " (eps end/peak " << sci(end / peak) << ")";
      }
    }
    o << "; ";
  }
  const TrainConfig pc = load_config("point_mass.conf");
  const ContinuousEnv pm = ContinuousEnv::point_mass(100);
  const double baseline = random_baseline(pm, 100, 77);
  o << "point mass random " << format_double(std::round(baseline * 100) / 100) << ", trained:";
  for (Variant v : {Variant::kVirel, Variant::kBeta}) {
    for (std::uint64_t seed : {1, 2, 3}) {
      const TrainResult r = train(pm, pc, v, seed);
      // Costs are negative returns: trained cost at most a fifth of the random cost.
      pass = pass && r.final_return >= baseline / 5.0;
      o << ' ' << to_string(v)[0] << format_double(std::round(r.final_return * 100) / 100);
    }
  }
  return {pass, o.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome c12_determinism() {
  const fs::path root = fs::temp_directory_path() / ("virel_accept_" + std::to_string(::getpid()));
  const std::string cfg = std::string(VIREL_SOURCE_DIR) + "/configs/bandit.conf";
  struct Case {
    std::string name;
    std::vector<std::string> args;
    std::vector<std::string> files;
  };
  const std::vector<Case> cases{
      {"verify", {"verify", "all", "--seed", "3", "--set", "draws=3", "--set", "dirac_trace=true"}, {"verify.json", "dirac.csv"}},
      {"counterexample", {"counterexample", "--seed", "3"}, {"counterexample.csv"}},
      {"em-pi", {"em-demo", "--seed", "3", "--set", "mdp=random"}, {"em_demo.csv"}},
      {"em-q", {"em-demo", "--seed", "3", "--set", "mode=q_learning", "--set", "mdp=random"}, {"em_demo.csv"}},
      {"train", {"train", "--seed", "1", "--config", cfg, "--set", "total_steps=600", "--set", "variant=beta"},
       {"trace.csv", "policy.ckpt"}},
  };
  int mismatches = 0;
  int bad_exit = 0;
  for (const Case& c : cases) {
    std::string first[2];
    for (int run = 0; run < 2; ++run) {
      std::vector<std::string> args = c.args;
      const fs::path out = root / (c.name + std::to_string(run));
      args.push_back("--out");
      args.push_back(out.string());
      std::ostringstream so, se;
      if (run_cli(args, so, se) != kExitOk) ++bad_exit;
      std::string all;
      for (const auto& f : c.files) all += slurp(out / f) + '\x1f';
      first[run] = all;
    }
    if (first[0] != first[1] || first[0].size() < 16) ++mismatches;
  }
  fs::remove_all(root);
  return {mismatches == 0 && bad_exit == 0,
          std::to_string(cases.size()) + " subcommand runs repeated, mismatches " +
              std::to_string(mismatches) + ", nonzero exits " + std::to_string(bad_exit)};
}

}  // namespace

int main() {
  struct Criterion {
    const char* id;
    const char* title;
    double budget_s;
    Outcome (*run)();
  };
  const std::vector<Criterion> criteria{
      {"C01", "counterexample closed form", 5, c01_closed_form},
      {"C02", "hard vs soft disagreement", 5, c02_hard_vs_soft},
      {"C03", "EM equals policy iteration", 10, c03_em_policy_iteration},
      {"C04", "EM equals Q-learning", 5, c04_em_q_learning},
      {"C05", "Dirac limit", 2, c05_dirac},
      {"C06", "ELBO identity and variational optimum", 2, c06_elbo},
      {"C07", "target operator membership", 2, c07_membership},
      {"C08", "gradient integrity", 60, c08_gradients},
      {"C09", "projected residual", 10, c09_projected},
      {"C10", "incremental optimisation", 2, c10_incremental},
      {"C11", "toy training", 600, c11_training},
      {"C12", "determinism", 120, c12_determinism},
  };
  int failed = 0;
  for (const Criterion& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool pass = out.pass && secs < c.budget_s;
    if (!pass) ++failed;
    std::ostringstream t;
    t.precision(2);
    t << std::fixed << secs;
    std::cout << (pass ? "PASS " : "FAIL ") << c.id << ' ' << c.title << " [" << t.str() << "s / "
              << c.budget_s << "s] " << out.detail << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
