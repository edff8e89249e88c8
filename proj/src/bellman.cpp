#include "virel/bellman.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "virel/boltzmann.hpp"
#include "virel/errors.hpp"

namespace virel {

const char* to_string(OperatorKind kind) {
  switch (kind) {
    case OperatorKind::kOnPolicy: return "on_policy";
    case OperatorKind::kBoltzmann: return "boltzmann";
    case OperatorKind::kOptimal: return "optimal";
    case OperatorKind::kDiminishingTemp: return "diminishing_temp";
    case OperatorKind::kSoft: return "soft";
  }
  return "unknown";
}

OperatorSpec OperatorSpec::optimal() { return {}; }

OperatorSpec OperatorSpec::on_policy(QTable pi) {
  OperatorSpec op;
  op.kind = OperatorKind::kOnPolicy;
  op.policy = std::move(pi);
  return op;
}

OperatorSpec OperatorSpec::boltzmann(std::optional<double> temperature) {
  OperatorSpec op;
  op.kind = OperatorKind::kBoltzmann;
  op.temperature = temperature;
  return op;
}

OperatorSpec OperatorSpec::diminishing(double eps_k) {
  OperatorSpec op;
  op.kind = OperatorKind::kDiminishingTemp;
  op.eps_k = eps_k;
  return op;
}

OperatorSpec OperatorSpec::soft(double entropy_weight, QTable pi) {
  OperatorSpec op;
  op.kind = OperatorKind::kSoft;
  op.entropy_weight = entropy_weight;
  op.policy = std::move(pi);
  return op;
}

void OperatorSpec::validate() const {
  if (!(c > 0.0)) throw std::invalid_argument("operator scale c must be positive");
  if (!(p >= 1.0)) throw std::invalid_argument("norm exponent p must be at least 1");
  if (kind == OperatorKind::kDiminishingTemp && !(eps_k > 0.0)) {
    throw std::invalid_argument("eps_k must be positive");
  }
  if (kind == OperatorKind::kBoltzmann && temperature && !(*temperature >= 0.0)) {
    throw std::invalid_argument("temperature must be non-negative");
  }
  if (kind == OperatorKind::kSoft && !(entropy_weight >= 0.0)) {
    throw std::invalid_argument("entropy weight must be non-negative");
  }
}

namespace {

void require_shape(const QTable& t, const DiscreteMdp& mdp, const char* what) {
  if (static_cast<std::size_t>(t.rows()) != mdp.n_states() ||
      static_cast<std::size_t>(t.cols()) != mdp.n_actions()) {
    throw std::invalid_argument(std::string(what) + " does not match the MDP shape");
  }
}

/// r + gamma * P v, summed over next states in index order.
QTable backup_from_values(const DiscreteMdp& mdp, const Eigen::VectorXd& v) {
  const auto n_s = static_cast<Eigen::Index>(mdp.n_states());
  const auto n_a = static_cast<Eigen::Index>(mdp.n_actions());
  const Eigen::MatrixXd& P = mdp.transition();
  QTable out(n_s, n_a);
  for (Eigen::Index s = 0; s < n_s; ++s) {
    for (Eigen::Index a = 0; a < n_a; ++a) {
      const Eigen::Index h = s * n_a + a;
      double acc = 0.0;
      for (Eigen::Index n = 0; n < n_s; ++n) acc += P(h, n) * v(n);
      out(s, a) = mdp.reward()(s, a) + mdp.gamma() * acc;
    }
  }
  return out;
}

QTable softmax_rows(const QTable& logits) {
  QTable p(logits.rows(), logits.cols());
  for (Eigen::Index s = 0; s < logits.rows(); ++s) {
    p.row(s) = (logits.row(s).array() - logits.row(s).maxCoeff()).exp();
    p.row(s) /= p.row(s).sum();
  }
  return p;
}

/// Boltzmann rows at eps_k, without the greedy fallback (eps_k > 0 always).
QTable boltzmann_rows(const QTable& q, double eps_k) {
  return softmax_rows(q / std::max(eps_k, kTemperatureFloor));
}

Eigen::VectorXd power_weights(const QTable& beta, double p) {
  const Eigen::Map<const Eigen::VectorXd> b(beta.data(), beta.size());
  if (p == 2.0) return b;
  Eigen::VectorXd w(b.size());
  for (Eigen::Index i = 0; i < b.size(); ++i) {
    const double sgn = (b(i) > 0.0) - (b(i) < 0.0);
    w(i) = sgn * std::pow(std::abs(b(i)), p - 1.0);
  }
  return w;
}

}  // namespace

QTable policy_backup(const DiscreteMdp& mdp, const QTable& q, const QTable& pi) {
  require_shape(q, mdp, "Q table");
  require_shape(pi, mdp, "policy table");
  const Eigen::VectorXd v = q.cwiseProduct(pi).rowwise().sum();
  return backup_from_values(mdp, v);
}

QTable optimal_backup(const DiscreteMdp& mdp, const QTable& q) {
  require_shape(q, mdp, "Q table");
  Eigen::VectorXd v(q.rows());
  for (Eigen::Index s = 0; s < q.rows(); ++s) {
    double m = q(s, 0);
    for (Eigen::Index a = 1; a < q.cols(); ++a) m = std::max(m, q(s, a));
    v(s) = m;
  }
  return backup_from_values(mdp, v);
}

QTable soft_backup(const DiscreteMdp& mdp, const QTable& q, const QTable& pi, double weight) {
  require_shape(q, mdp, "Q table");
  require_shape(pi, mdp, "policy table");
  Eigen::VectorXd v = Eigen::VectorXd::Zero(q.rows());
  for (Eigen::Index s = 0; s < q.rows(); ++s) {
    for (Eigen::Index a = 0; a < q.cols(); ++a) {
      const double pa = pi(s, a);
      if (pa <= 0.0) {
        if (weight == 0.0) continue;
        throw std::invalid_argument("soft backup needs a strictly positive policy");
      }
      v(s) += pa * (q(s, a) - weight * std::log(pa));
    }
  }
  return backup_from_values(mdp, v);
}

QTable operator_policy(const OperatorSpec& op, const QTable& q, const DiscreteMdp& mdp) {
  op.validate();
  switch (op.kind) {
    case OperatorKind::kOnPolicy:
      require_shape(op.policy, mdp, "policy table");
      return op.policy;
    case OperatorKind::kOptimal:
      return greedy_table(q);
    case OperatorKind::kBoltzmann: {
      const double eps = op.temperature ? *op.temperature
                                        : solve_self_consistent_eps(q, mdp, op.c, op.p).epsilon;
      return boltzmann_table(q, eps);
    }
    case OperatorKind::kDiminishingTemp:
      return boltzmann_rows(q, op.eps_k);
    case OperatorKind::kSoft:
      if (op.policy.size() > 0) return op.policy;
      if (op.entropy_weight == 0.0) return greedy_table(q);
      return softmax_rows(q / op.entropy_weight);
  }
  throw std::logic_error("unhandled operator kind");
}

QTable apply_operator(const OperatorSpec& op, const QTable& q, const DiscreteMdp& mdp) {
  op.validate();
  require_shape(q, mdp, "Q table");
  if (op.kind == OperatorKind::kOptimal) return optimal_backup(mdp, q);
  const QTable pi = operator_policy(op, q, mdp);
  if (op.kind == OperatorKind::kSoft) return soft_backup(mdp, q, pi, op.entropy_weight);
  return policy_backup(mdp, q, pi);
}

QTable apply_operator(const OperatorSpec& op, const QApproximator& q, const DiscreteMdp& mdp) {
  return apply_operator(op, q.table(), mdp);
}

double residual_from_beta(const QTable& beta, double c, double p) {
  if (beta.size() == 0) return 0.0;
  return c / p * beta.array().abs().pow(p).mean();
}

ResidualReport residual_error(const QTable& q, const OperatorSpec& op, const DiscreteMdp& mdp) {
  ResidualReport report;
  report.beta = apply_operator(op, q, mdp) - q;
  report.epsilon = residual_from_beta(report.beta, op.c, op.p);
  return report;
}

ResidualReport residual_error(const QApproximator& q, const OperatorSpec& op,
                              const DiscreteMdp& mdp) {
  return residual_error(q.table(), op, mdp);
}

nlohmann::json to_json(const ResidualReport& report) {
  nlohmann::json beta = nlohmann::json::array();
  for (Eigen::Index s = 0; s < report.beta.rows(); ++s) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index a = 0; a < report.beta.cols(); ++a) row.push_back(report.beta(s, a));
    beta.push_back(std::move(row));
  }
  return {{"epsilon", report.epsilon}, {"beta", std::move(beta)}};
}

SelfConsistentResult solve_self_consistent_eps(const QTable& q, const DiscreteMdp& mdp, double c,
                                               double p, double tol, std::size_t max_iters) {
  require_shape(q, mdp, "Q table");
  auto f = [&](double eps) {
    return residual_from_beta(policy_backup(mdp, q, boltzmann_table(q, eps)) - q, c, p);
  };
  SelfConsistentResult res;
  double eps = f(0.0);
  res.trace.push_back(eps);
  double prev_step = 0.0;
  for (std::size_t it = 1; it <= max_iters; ++it) {
    const double target = f(eps);
    double step = target - eps;
    if (res.damped || (prev_step != 0.0 && (step > 0.0) != (prev_step > 0.0))) {
      res.damped = true;
      step *= 0.5;
    }
    eps += step;
    res.trace.push_back(eps);
    res.iterations = it;
    if (std::abs(step) < tol) {
      res.epsilon = eps;
      res.greedy = eps < kTemperatureFloor;
      return res;
    }
    prev_step = step;
  }
  throw ConvergenceError("self-consistent temperature did not converge", max_iters,
                         std::abs(prev_step));
}

ParamVector residual_grad_direct(const QApproximator& q, const OperatorSpec& op,
                                 const DiscreteMdp& mdp) {
  const QTable table = q.table();
  const QTable beta = apply_operator(op, table, mdp) - table;
  const Eigen::MatrixXd jac = q.jacobian();
  const Eigen::VectorXd w = power_weights(beta, op.p);
  return ParamVector(q.params().layout,
                     -op.c * jac.transpose() * w / static_cast<double>(beta.size()));
}

ParamVector residual_grad_direct(const QApproximator& q, const std::vector<StateAction>& batch,
                                 const Eigen::VectorXd& targets) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  if (static_cast<std::size_t>(targets.size()) != batch.size()) {
    throw std::invalid_argument("one target per sample required");
  }
  ParamVector g = q.params().zeros_like();
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const double diff = q.eval(batch[i]) - targets(static_cast<Eigen::Index>(i));
    g.values += diff * q.grad(batch[i]).values;
  }
  g.values /= static_cast<double>(batch.size());
  return g;
}

double incremental_residual(const QApproximator& q, double eps_k, const DiscreteMdp& mdp, double c,
                            double p) {
  OperatorSpec op = OperatorSpec::diminishing(eps_k);
  op.c = c;
  op.p = p;
  return residual_error(q, op, mdp).epsilon + eps_k;
}

ParamVector residual_grad_twk(const QApproximator& q, double eps_k, const DiscreteMdp& mdp,
                              double c, double p) {
  if (!(eps_k > 0.0)) throw std::invalid_argument("eps_k must be positive");
  const QTable table = q.table();
  const auto n_s = table.rows();
  const auto n_a = table.cols();
  const QTable pk = boltzmann_rows(table, eps_k);
  const QTable beta = policy_backup(mdp, table, pk) - table;
  const Eigen::MatrixXd jac = q.jacobian();
  const auto n_p = jac.cols();
  const double e = std::max(eps_k, kTemperatureFloor);

  // G.row(s') = grad of sum_a' p_k(a'|s') Q(s', a')
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(n_s, n_p);
  for (Eigen::Index s = 0; s < n_s; ++s) {
    Eigen::RowVectorXd mean_grad = Eigen::RowVectorXd::Zero(n_p);
    for (Eigen::Index a = 0; a < n_a; ++a) mean_grad += pk(s, a) * jac.row(s * n_a + a);
    for (Eigen::Index a = 0; a < n_a; ++a) {
      const auto row = jac.row(s * n_a + a);
      G.row(s) += pk(s, a) * ((row - mean_grad) / e * table(s, a) + row);
    }
  }
  const Eigen::MatrixXd grad_beta = mdp.gamma() * mdp.transition() * G - jac;
  const Eigen::VectorXd w = power_weights(beta, p);
  return ParamVector(q.params().layout,
                     c * grad_beta.transpose() * w / static_cast<double>(beta.size()));
}

ProjectedMoments projected_moments(const QApproximator& q, const OperatorSpec& op,
                                   const DiscreteMdp& mdp) {
  if (q.kind() != ApproxKind::kLinear || !q.discrete()) {
    throw std::invalid_argument("projected residual needs a linear feature approximator");
  }
  const Eigen::MatrixXd& phi = q.features();
  const QTable table = q.table();
  const QTable beta = apply_operator(op, table, mdp) - table;
  const Eigen::Map<const Eigen::VectorXd> b(beta.data(), beta.size());
  const double n = static_cast<double>(phi.rows());
  ProjectedMoments m;
  m.second_moment = phi.transpose() * phi / n;
  m.beta_b = phi.transpose() * b / n;
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(m.second_moment);
  const auto& sv = svd.singularValues();
  m.condition_number = sv(sv.size() - 1) > 0.0 ? sv(0) / sv(sv.size() - 1)
                                                : std::numeric_limits<double>::infinity();
  return m;
}

double projected_residual_linear(const QApproximator& q, const OperatorSpec& op,
                                 const DiscreteMdp& mdp, double max_condition) {
  if (op.p != 2.0) throw std::invalid_argument("projected residual is defined for p = 2");
  const ProjectedMoments m = projected_moments(q, op, mdp);
  if (!(m.condition_number <= max_condition)) {
    throw SingularMatrixError("feature second-moment matrix is singular", m.condition_number);
  }
  const Eigen::VectorXd zeta = m.second_moment.ldlt().solve(m.beta_b);
  return 0.5 * op.c * m.beta_b.dot(zeta);
}

GtdState gtd_update(const GtdState& state, const Eigen::VectorXd& b, const Eigen::VectorXd& b_next,
                    double beta, double gamma, double alpha_zeta, double alpha_omega) {
  GtdState next;
  next.zeta = state.zeta + alpha_zeta * (beta - b.dot(state.zeta)) * b;
  // Linear features: the Hessian correction term is zero.
  next.omega = state.omega + alpha_omega * (b - gamma * b_next) * b.dot(state.zeta);
  return next;
}

namespace {

Eigen::MatrixXd expected_next_features(const Eigen::MatrixXd& features, const DiscreteMdp& mdp,
                                       const QTable& pi) {
  require_shape(pi, mdp, "policy table");
  const auto n_s = static_cast<Eigen::Index>(mdp.n_states());
  const auto n_a = static_cast<Eigen::Index>(mdp.n_actions());
  if (features.rows() != n_s * n_a) throw std::invalid_argument("one feature row per pair");
  Eigen::MatrixXd state_feat = Eigen::MatrixXd::Zero(n_s, features.cols());
  for (Eigen::Index s = 0; s < n_s; ++s) {
    for (Eigen::Index a = 0; a < n_a; ++a) state_feat.row(s) += pi(s, a) * features.row(s * n_a + a);
  }
  return mdp.transition() * state_feat;
}

}  // namespace

GtdState gtd_sweep(const GtdState& state, const Eigen::MatrixXd& features, const DiscreteMdp& mdp,
                   const QTable& pi, double alpha_zeta, double alpha_omega) {
  const Eigen::MatrixXd next = expected_next_features(features, mdp, pi);
  const Eigen::Map<const Eigen::VectorXd> r(mdp.reward().data(), mdp.reward().size());
  const double n = static_cast<double>(features.rows());
  const double g = mdp.gamma();
  const Eigen::VectorXd beta = r + g * next * state.omega - features * state.omega;
  const Eigen::VectorXd proj = features * state.zeta;
  GtdState out;
  out.zeta = state.zeta + alpha_zeta * features.transpose() * (beta - proj) / n;
  out.omega = state.omega + alpha_omega * (features - g * next).transpose() * proj / n;
  return out;
}

GtdResult gtd_solve(const Eigen::MatrixXd& features, const DiscreteMdp& mdp, const QTable& pi,
                    double alpha_zeta, double alpha_omega, double tol, std::size_t max_iters) {
  GtdResult res;
  res.state.zeta = Eigen::VectorXd::Zero(features.cols());
  res.state.omega = Eigen::VectorXd::Zero(features.cols());
  for (std::size_t it = 1; it <= max_iters; ++it) {
    GtdState next = gtd_sweep(res.state, features, mdp, pi, alpha_zeta, alpha_omega);
    res.last_change = std::max((next.omega - res.state.omega).cwiseAbs().maxCoeff(),
                               (next.zeta - res.state.zeta).cwiseAbs().maxCoeff());
    res.state = std::move(next);
    res.iterations = it;
    if (!res.state.omega.allFinite()) {
      throw ConvergenceError("GTD iterates diverged", it, res.last_change);
    }
    if (res.last_change < tol) return res;
  }
  throw ConvergenceError("GTD iterates did not converge", max_iters, res.last_change);
}

Eigen::VectorXd td_fixed_point(const Eigen::MatrixXd& features, const DiscreteMdp& mdp,
                               const QTable& pi) {
  const Eigen::MatrixXd next = expected_next_features(features, mdp, pi);
  const Eigen::Map<const Eigen::VectorXd> r(mdp.reward().data(), mdp.reward().size());
  const Eigen::MatrixXd A = features.transpose() * (features - mdp.gamma() * next);
  const Eigen::VectorXd b = features.transpose() * r;
  return A.fullPivLu().solve(b);
}

IncrementalTrace incremental_limit(const QTable& q, const DiscreteMdp& mdp,
                                   const std::vector<double>& schedule, double c, double p) {
  OperatorSpec star = OperatorSpec::optimal();
  star.c = c;
  star.p = p;
  IncrementalTrace trace;
  trace.eps_omega = residual_error(q, star, mdp).epsilon;
  for (double eps_k : schedule) {
    if (!(eps_k > 0.0)) throw std::invalid_argument("schedule temperatures must be positive");
    OperatorSpec op = OperatorSpec::diminishing(eps_k);
    op.c = c;
    op.p = p;
    IncrementalStep step;
    step.eps_k = eps_k;
    step.eps_wk = residual_error(q, op, mdp).epsilon + eps_k;
    step.gap = std::abs(step.eps_wk - eps_k - trace.eps_omega);
    trace.steps.push_back(step);
  }
  return trace;
}

MembershipCheck check_membership(OperatorKind kind, const QTable& q, const DiscreteMdp& mdp,
                                 const std::vector<double>& temperatures, double tol) {
  if (temperatures.empty()) throw std::invalid_argument("empty temperature schedule");
  const QTable target = optimal_backup(mdp, q);
  MembershipCheck check;
  check.kind = kind;
  for (double t : temperatures) {
    OperatorSpec op;
    switch (kind) {
      case OperatorKind::kBoltzmann: op = OperatorSpec::boltzmann(t); break;
      case OperatorKind::kDiminishingTemp: op = OperatorSpec::diminishing(t); break;
      case OperatorKind::kOptimal: op = OperatorSpec::optimal(); break;
      // The soft operator's weight is not a residual temperature; it stays at 1.
      case OperatorKind::kSoft: op = OperatorSpec::soft(1.0); break;
      case OperatorKind::kOnPolicy:
        throw std::invalid_argument("membership is defined for Q-dependent operators");
    }
    check.temperatures.push_back(t);
    check.max_gap.push_back((apply_operator(op, q, mdp) - target).cwiseAbs().maxCoeff());
  }
  check.member = check.max_gap.back() < tol;
  return check;
}

}  // namespace virel
