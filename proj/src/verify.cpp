#include "virel/verify.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <stdexcept>

#include "virel/actor_critic.hpp"
#include "virel/bellman.hpp"
#include "virel/em_exact.hpp"
#include "virel/merl.hpp"

namespace virel {

const char* to_string(Relation r) {
  switch (r) {
    case Relation::kLess: return "<";
    case Relation::kLessEqual: return "<=";
    case Relation::kGreaterEqual: return ">=";
  }
  return "?";
}

bool VerifyReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

std::vector<std::string> VerifyReport::failures() const {
  std::vector<std::string> out;
  for (const auto& c : checks) {
    if (!c.passed) out.push_back(c.suite + "/" + c.name);
  }
  return out;
}

double relative_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double floor) {
  const double denom = std::max({a.norm(), b.norm(), floor});
  return (a - b).norm() / denom;
}

namespace {

using Objective = std::function<double(const Eigen::VectorXd&)>;

Eigen::VectorXd central_difference(const Objective& f, const Eigen::VectorXd& x, double h = 1e-6) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double orig = xp(i);
    xp(i) = orig + h;
    const double fp = f(xp);
    xp(i) = orig - h;
    const double fm = f(xp);
    xp(i) = orig;
    g(i) = (fp - fm) / (2.0 * h);
  }
  return g;
}

Eigen::MatrixXd normal_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = n(rng);
  }
  return m;
}

Eigen::VectorXd normal_vector(Eigen::Index n, Rng& rng, double scale = 1.0) {
  return normal_matrix(n, 1, rng, scale).col(0);
}

QTable random_policy_table(Eigen::Index S, Eigen::Index A, Rng& rng) {
  std::uniform_real_distribution<double> u(0.1, 1.0);
  QTable p(S, A);
  for (Eigen::Index s = 0; s < S; ++s) {
    for (Eigen::Index a = 0; a < A; ++a) p(s, a) = u(rng);
    p.row(s) /= p.row(s).sum();
  }
  return p;
}

Eigen::VectorXd random_distribution(Eigen::Index n, Rng& rng) {
  std::uniform_real_distribution<double> u(0.1, 1.0);
  Eigen::VectorXd d(n);
  for (Eigen::Index i = 0; i < n; ++i) d(i) = u(rng);
  return d / d.sum();
}

Eigen::VectorXd dirac_fixture(Rng& rng, Eigen::Index n_actions = 5) {
  for (;;) {
    Eigen::VectorXd q = normal_vector(n_actions, rng);
    Eigen::VectorXd sorted = q;
    std::sort(sorted.data(), sorted.data() + sorted.size());
    if (sorted(n_actions - 1) - sorted(n_actions - 2) >= 0.05) return q;
  }
}

const std::vector<double> kDiracTemps{1.0, 0.1, 0.01, 0.001};

class Recorder {
 public:
  Recorder(VerifyReport& report, std::string suite) : report_(report), suite_(std::move(suite)) {}

  void add(const std::string& name, double measured, double tol, Relation rel,
           std::string detail = {}) {
    CheckResult c;
    c.suite = suite_;
    c.name = name;
    c.measured = measured;
    c.tolerance = tol;
    c.relation = rel;
    c.detail = std::move(detail);
    switch (rel) {
      case Relation::kLess: c.passed = measured < tol; break;
      case Relation::kLessEqual: c.passed = measured <= tol; break;
      case Relation::kGreaterEqual: c.passed = measured >= tol; break;
    }
    if (!std::isfinite(measured)) c.passed = false;
    report_.checks.push_back(std::move(c));
  }

  /// Runs body and records a failed check if it throws.
  void guarded(const std::string& name, const std::function<void()>& body) {
    try {
      body();
    } catch (const std::exception& e) {
      add(name, INFINITY, 0.0, Relation::kLess, std::string("exception: ") + e.what());
    }
  }

 private:
  VerifyReport& report_;
  std::string suite_;
};

void theorems_suite(VerifyReport& report, const VerifyOptions& opt) {
  Recorder rec(report, "theorems");
  Rng rng(opt.seed + 101);

  rec.guarded("dirac_limit", [&] {
    double worst_final = 0.0;
    double worst_increase = 0.0;
    for (const DiracTrace& t : dirac_fixture_traces(opt.seed, 50)) {
      worst_final = std::max(worst_final, t.tv_distance.back());
      for (std::size_t i = 2; i < t.tv_distance.size(); ++i) {
        worst_increase = std::max(worst_increase, t.tv_distance[i] - t.tv_distance[i - 1]);
      }
    }
    rec.add("dirac_limit_tv", worst_final, 1e-3, Relation::kLess, "TV to one-hot argmax at eps=1e-3");
    rec.add("dirac_limit_monotone", worst_increase, 0.0, Relation::kLessEqual,
            "largest TV increase after the first temperature");
  });

  rec.guarded("elbo_identity", [&] {
    double worst = 0.0;
    for (int i = 0; i < 20; ++i) {
      const QTable q = normal_matrix(4, 3, rng);
      const double eps = 0.1 + std::abs(normal_vector(1, rng)(0));
      const ElboTerms t = elbo_discrete(q, eps, random_policy_table(4, 3, rng), random_distribution(4, rng));
      worst = std::max(worst, std::abs(t.elbo - (t.log_norm - t.kl_joint - t.entropy_d)));
    }
    rec.add("elbo_identity", worst, 1e-10, Relation::kLess, "|L - (log Z - KL - H(d))|");
  });

  rec.guarded("variational_fit", [&] {
    double worst_fit = 0.0;
    double worst_kl = 0.0;
    for (int i = 0; i < 10; ++i) {
      const QTable q = normal_matrix(4, 3, rng);
      const double eps = 0.2 + std::abs(normal_vector(1, rng)(0));
      const Eigen::VectorXd d = random_distribution(4, rng);
      const VariationalFit fit = fit_variational_table(q, eps, d);
      const QTable target = boltzmann_table(q, eps);
      worst_fit = std::max(worst_fit, (fit.pi - target).cwiseAbs().maxCoeff());
      const ElboTerms t = elbo_discrete(q, eps, target, boltzmann_state_marginal(q, eps));
      worst_kl = std::max({worst_kl, std::abs(t.kl_joint), std::abs(t.kl_policy)});
    }
    rec.add("variational_fit_recovers_boltzmann", worst_fit, 1e-8, Relation::kLess);
    rec.add("kl_zero_at_boltzmann", worst_kl, 1e-10, Relation::kLess);
  });

  rec.guarded("counterexample_closed_form", [&] {
    const CounterexampleGrid grid;
    double worst = 0.0;
    double mismatches = 0.0;
    for (const CounterexampleRow& row : counterexample_sweep(grid)) {
      worst = std::max(worst, std::abs(row.p1_closed - row.p1_numeric));
      if ((row.p1_numeric > 0.5) != row.indicator) mismatches += 1.0;
    }
    rec.add("counterexample_closed_vs_numeric", worst, 1e-8, Relation::kLess);
    rec.add("counterexample_indicator", mismatches, 0.0, Relation::kLessEqual,
            "grid points where p1* > 1/2 disagrees with the indicator");
  });

  rec.guarded("hard_vs_soft", [&] {
    const DiscreteMdp mdp = build_counterexample({100, 5, 0.99, 1.0});
    const EmTrace pi = em_policy_iteration(mdp);
    const std::size_t hard = pi.iterates.back().policy.mode()[CounterexampleLayout::s0];
    const double p1 = optimal_p1_closed(100, 0.99, 1.0).p1;
    const bool differ = hard == CounterexampleLayout::a2 && p1 > 0.5;
    rec.add("hard_vs_soft_mode_differ", differ ? 1.0 : 0.0, 1.0, Relation::kGreaterEqual);
  });

  rec.guarded("em_policy_iteration", [&] {
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const DiscreteMdp mdp = random_mdp(10, 4, opt.seed * 1000 + seed, 0.9);
      const EmTrace em = em_policy_iteration(mdp);
      const ValueIterationResult vi = value_iteration_oracle(mdp);
      const Eigen::VectorXd v_star = vi.q.rowwise().maxCoeff();
      worst = std::max(worst, (em.iterates.back().values - v_star).cwiseAbs().maxCoeff());
    }
    rec.add("em_policy_iteration_value", worst, 1e-6, Relation::kLess, "sup-norm vs value iteration");
  });

  rec.guarded("em_q_learning", [&] {
    const DiscreteMdp mdp = random_mdp(6, 3, opt.seed + 7, 0.9);
    const QTable q0 = normal_matrix(6, 3, rng);
    const std::vector<QTable> it = em_q_learning(mdp, q0, 400);
    double bitwise = 0.0;
    QTable ref = it[1];
    for (std::size_t k = 2; k < it.size(); ++k) {
      ref = optimal_backup(mdp, ref);
      bitwise = std::max(bitwise, (it[k] - ref).cwiseAbs().maxCoeff());
    }
    const ValueIterationResult vi = value_iteration_oracle(mdp);
    rec.add("em_q_learning_equals_tstar", bitwise, 0.0, Relation::kLessEqual);
    rec.add("em_q_learning_limit", (it.back() - vi.q).cwiseAbs().maxCoeff(), 1e-6, Relation::kLess);
  });
}

void operators_suite(VerifyReport& report, const VerifyOptions& opt) {
  Recorder rec(report, "operators");
  Rng rng(opt.seed + 202);
  const std::vector<double> temps{1.0, 1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6};

  rec.guarded("membership", [&] {
    const DiscreteMdp mdp = random_mdp(5, 3, opt.seed + 11, 0.9);
    const QTable q = normal_matrix(5, 3, rng);
    const MembershipCheck b = check_membership(OperatorKind::kBoltzmann, q, mdp, temps);
    const MembershipCheck w = check_membership(OperatorKind::kDiminishingTemp, q, mdp, temps);
    rec.add("membership_boltzmann", b.max_gap.back(), 1e-6, Relation::kLess);
    rec.add("membership_twk", w.max_gap.back(), 1e-6, Relation::kLess);

    // Action-independent Q makes the soft policy uniform, so the gap to T*
    // is exactly the entropy bonus gamma * log |A|.
    QTable flat(5, 3);
    for (Eigen::Index s = 0; s < 5; ++s) flat.row(s).setConstant(normal_vector(1, rng)(0));
    const MembershipCheck soft = check_membership(OperatorKind::kSoft, flat, mdp, temps);
    const double bonus = mdp.gamma() * std::log(3.0);
    rec.add("soft_not_member", soft.max_gap.back() - bonus, -1e-12, Relation::kGreaterEqual,
            "soft gap minus entropy bonus");
  });

  rec.guarded("incremental_limit", [&] {
    const DiscreteMdp mdp = random_mdp(4, 3, opt.seed + 13, 0.8);
    const QTable q = normal_matrix(4, 3, rng);
    const IncrementalTrace t = incremental_limit(q, mdp, temps);
    rec.add("incremental_limit_gap", t.steps.back().gap, 1e-6, Relation::kLess);
  });

  rec.guarded("self_consistent_eps", [&] {
    const DiscreteMdp mdp = random_mdp(4, 3, opt.seed + 17, 0.8);
    const QTable q = normal_matrix(4, 3, rng);
    const SelfConsistentResult r = solve_self_consistent_eps(q, mdp);
    const double f = residual_error(q, OperatorSpec::boltzmann(r.epsilon), mdp).epsilon;
    rec.add("self_consistent_eps", r.greedy ? 0.0 : std::abs(f - r.epsilon), 1e-9, Relation::kLess);
  });

  rec.guarded("gtd", [&] {
    const DiscreteMdp mdp = random_mdp(3, 2, opt.seed + 19, 0.9);
    const QTable pi = random_policy_table(3, 2, rng);
    const Eigen::MatrixXd phi = normal_matrix(6, 3, rng);
    const GtdResult g = gtd_solve(phi, mdp, pi, 0.5, 0.1);
    const Eigen::VectorXd w = td_fixed_point(phi, mdp, pi);
    rec.add("gtd_matches_td_fixed_point", (g.state.omega - w).cwiseAbs().maxCoeff(), 1e-6,
            Relation::kLess);
  });

  rec.guarded("projected_one_hot", [&] {
    const DiscreteMdp mdp = random_mdp(3, 2, opt.seed + 23, 0.9);
    QApproximator q = QApproximator::linear(Eigen::MatrixXd::Identity(6, 6), 3, 2);
    ParamVector p = q.params();
    p.values = normal_vector(6, rng);
    q.set_params(p);
    const OperatorSpec op = OperatorSpec::on_policy(random_policy_table(3, 2, rng));
    const double proj = projected_residual_linear(q, op, mdp);
    const double plain = residual_error(q, op, mdp).epsilon;
    rec.add("projected_equals_unprojected", std::abs(proj - plain), 1e-12, Relation::kLess);
  });
}

void randomise(ParamVector& p, Rng& rng, double scale) {
  p.values = normal_vector(static_cast<Eigen::Index>(p.size()), rng, scale);
}

void gradients_suite(VerifyReport& report, const VerifyOptions& opt) {
  Recorder rec(report, "gradients");
  Rng rng(opt.seed + 303);
  const std::size_t draws = opt.draws;
  const double tol = 1e-4;

  rec.guarded("q_grad", [&] {
    double worst = 0.0;
    for (std::size_t i = 0; i < draws; ++i) {
      QApproximator qd = QApproximator::mlp_discrete(3, 2, 6, rng);
      randomise(qd.params(), rng, 0.5);
      const StateAction hd = StateAction::discrete(i % 3, i % 2);
      Objective fd = [&](const Eigen::VectorXd& x) {
        QApproximator c = qd;
        c.params().values = x;
        return c.eval(hd);
      };
      worst = std::max(worst, relative_error(qd.grad(hd).values, central_difference(fd, qd.params().values)));

      QApproximator qc = QApproximator::mlp(2, 1, 6, rng);
      randomise(qc.params(), rng, 0.5);
      const StateAction hc = StateAction::continuous(normal_vector(2, rng), normal_vector(1, rng));
      Objective fc = [&](const Eigen::VectorXd& x) {
        QApproximator c = qc;
        c.params().values = x;
        return c.eval(hc);
      };
      worst = std::max(worst, relative_error(qc.grad(hc).values, central_difference(fc, qc.params().values)));
    }
    rec.add("q_grad", worst, tol, Relation::kLess);
  });

  rec.guarded("actor_critic_losses", [&] {
    double worst_v = 0.0, worst_q = 0.0, worst_virel = 0.0, worst_beta = 0.0;
    for (std::size_t i = 0; i < draws; ++i) {
      const std::size_t ds = 2, da = 1, width = 6;
      const Eigen::Index n = 5;
      ValueApproximator v = ValueApproximator::mlp(ds, width, rng);
      ValueApproximator vt = ValueApproximator::mlp(ds, width, rng);
      QApproximator q = QApproximator::mlp(ds, da, width, rng);
      GaussianPolicy pi(ds, da, width, rng);
      randomise(v.params(), rng, 0.5);
      randomise(vt.params(), rng, 0.5);
      randomise(q.params(), rng, 0.5);
      randomise(pi.params(), rng, 0.3);
      std::vector<Transition> ts;
      for (Eigen::Index j = 0; j < n; ++j) {
        ts.push_back({normal_vector(2, rng), normal_vector(1, rng), normal_vector(1, rng)(0),
                      normal_vector(2, rng), j == 0});
      }
      const Batch b = make_batch(ts);
      const Eigen::MatrixXd noise = normal_matrix(1, n, rng);
      const double w_soft = i % 2 == 0 ? 0.0 : 0.7;

      Objective fv = [&](const Eigen::VectorXd& x) {
        ValueApproximator c = v;
        c.params().values = x;
        return j_v_loss(c, b, pi, q, noise, w_soft).loss;
      };
      worst_v = std::max(worst_v, relative_error(j_v_loss(v, b, pi, q, noise, w_soft).grad.values,
                                                 central_difference(fv, v.params().values)));

      Objective fq = [&](const Eigen::VectorXd& x) {
        QApproximator c = q;
        c.params().values = x;
        return j_q_loss(c, b, vt, 0.9).loss;
      };
      worst_q = std::max(worst_q, relative_error(j_q_loss(q, b, vt, 0.9).grad.values,
                                                 central_difference(fq, q.params().values)));

      const double alpha = 0.2;
      Objective fp = [&](const Eigen::VectorXd& x) {
        GaussianPolicy c = pi;
        c.params().values = x;
        return j_pi_virel_loss(c, b, q, vt, noise, alpha).loss;
      };
      worst_virel = std::max(worst_virel, relative_error(j_pi_virel_loss(pi, b, q, vt, noise, alpha).grad.values,
                                                         central_difference(fp, pi.params().values)));

      const double eps_hat = std::abs(normal_vector(1, rng)(0));
      const double lambda = 0.05;
      Objective fb = [&](const Eigen::VectorXd& x) {
        GaussianPolicy c = pi;
        c.params().values = x;
        return j_pi_beta_loss(c, b, q, vt, noise, eps_hat, lambda).loss;
      };
      worst_beta = std::max(worst_beta, relative_error(j_pi_beta_loss(pi, b, q, vt, noise, eps_hat, lambda).grad.values,
                                                       central_difference(fb, pi.params().values)));
    }
    rec.add("j_v_grad", worst_v, tol, Relation::kLess);
    rec.add("j_q_grad", worst_q, tol, Relation::kLess);
    rec.add("j_pi_virel_grad", worst_virel, tol, Relation::kLess);
    rec.add("j_pi_beta_grad", worst_beta, tol, Relation::kLess);
  });

  rec.guarded("residual_grads", [&] {
    double worst_direct = 0.0, worst_twk = 0.0;
    for (std::size_t i = 0; i < draws; ++i) {
      const DiscreteMdp mdp = random_mdp(3, 2, opt.seed * 7919 + i, 0.9);
      QApproximator q = QApproximator::mlp_discrete(3, 2, 6, rng);
      randomise(q.params(), rng, 0.5);

      const OperatorSpec op = OperatorSpec::optimal();
      const QTable frozen = apply_operator(op, q, mdp);
      Objective fd = [&](const Eigen::VectorXd& x) {
        QApproximator c = q;
        c.params().values = x;
        return residual_from_beta(frozen - c.table(), op.c, op.p);
      };
      worst_direct = std::max(worst_direct, relative_error(residual_grad_direct(q, op, mdp).values,
                                                           central_difference(fd, q.params().values)));

      const double eps_k = 0.05 + 0.5 * std::abs(normal_vector(1, rng)(0));
      Objective ft = [&](const Eigen::VectorXd& x) {
        QApproximator c = q;
        c.params().values = x;
        return incremental_residual(c, eps_k, mdp);
      };
      worst_twk = std::max(worst_twk, relative_error(residual_grad_twk(q, eps_k, mdp).values,
                                                     central_difference(ft, q.params().values)));
    }
    rec.add("residual_grad_direct", worst_direct, tol, Relation::kLess);
    rec.add("residual_grad_twk", worst_twk, tol, Relation::kLess);
  });

  rec.guarded("em_step_grads", [&] {
    double worst_e = 0.0, worst_m = 0.0;
    for (std::size_t i = 0; i < draws; ++i) {
      const Eigen::Index S = 3, A = 2;
      const QTable qt = normal_matrix(S, A, rng);
      const Eigen::VectorXd d = random_distribution(S, rng);
      SoftmaxTablePolicy pi(S, A);
      randomise(pi.params(), rng, 1.0);
      const double eps = 0.1 + std::abs(normal_vector(1, rng)(0));
      Objective fe = [&](const Eigen::VectorXd& z) {
        SoftmaxTablePolicy c = pi;
        c.params().values = z;
        return eps * elbo_discrete(qt, eps, c.probs(), d).elbo;
      };
      worst_e = std::max(worst_e, relative_error(e_step_gradient(pi, qt, eps, d).values,
                                                 central_difference(fe, pi.params().values)));

      const DiscreteMdp mdp = random_mdp(3, 2, opt.seed * 104729 + i, 0.9);
      QApproximator q = QApproximator::mlp_discrete(3, 2, 6, rng);
      randomise(q.params(), rng, 0.5);
      const QTable pol = random_policy_table(S, A, rng);
      const double eps_k = 0.05 + 0.5 * std::abs(normal_vector(1, rng)(0));
      const double eps_i = incremental_residual(q, eps_k, mdp);
      Objective fm = [&](const Eigen::VectorXd& x) {
        QApproximator c = q;
        c.params().values = x;
        return eps_i * eps_i * elbo_discrete(c.table(), incremental_residual(c, eps_k, mdp), pol, d).elbo;
      };
      const ParamVector g = m_step_gradient(q, pol, d, eps_i, residual_grad_twk(q, eps_k, mdp));
      worst_m = std::max(worst_m, relative_error(g.values, central_difference(fm, q.params().values)));
    }
    rec.add("e_step_grad", worst_e, tol, Relation::kLess);
    rec.add("m_step_grad", worst_m, tol, Relation::kLess);
  });
}

}  // namespace

std::vector<DiracTrace> dirac_fixture_traces(std::uint64_t seed, std::size_t count) {
  Rng rng(seed + 404);
  std::vector<DiracTrace> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(dirac_limit(dirac_fixture(rng), kDiracTemps));
  return out;
}

VerifyReport run_verify(const std::string& suite, const VerifyOptions& options) {
  if (suite != "theorems" && suite != "operators" && suite != "gradients" && suite != "all") {
    throw std::invalid_argument("unknown verify suite: " + suite);
  }
  if (options.draws == 0) throw std::invalid_argument("draws must be positive");
  VerifyReport report;
  report.suite = suite;
  if (suite == "theorems" || suite == "all") theorems_suite(report, options);
  if (suite == "operators" || suite == "all") operators_suite(report, options);
  if (suite == "gradients" || suite == "all") gradients_suite(report, options);
  return report;
}

nlohmann::ordered_json to_json(const VerifyReport& report) {
  nlohmann::ordered_json j;
  j["suite"] = report.suite;
  j["passed"] = report.passed();
  j["checks"] = nlohmann::ordered_json::array();
  for (const CheckResult& c : report.checks) {
    nlohmann::ordered_json e;
    e["suite"] = c.suite;
    e["name"] = c.name;
    if (std::isfinite(c.measured)) {
      e["measured_error"] = c.measured;
    } else {
      e["measured_error"] = nullptr;
    }
    e["tolerance"] = c.tolerance;
    e["relation"] = to_string(c.relation);
    e["passed"] = c.passed;
    e["detail"] = c.detail;
    j["checks"].push_back(std::move(e));
  }
  return j;
}

}  // namespace virel
