#include "virel/boltzmann.hpp"

#include <atomic>
#include <cmath>
#include <stdexcept>

#include "virel/errors.hpp"

namespace virel {

namespace {

std::atomic<double> g_fault_scale{1.0};

void require_positive_eps(double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("temperature must be positive");
}

double entropy_of(const Eigen::Ref<const Eigen::RowVectorXd>& p) {
  double h = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (p(i) > 0.0) h -= p(i) * std::log(p(i));
  }
  return h;
}

void require_distribution(const Eigen::Ref<const Eigen::RowVectorXd>& p, const char* what) {
  if ((p.array() < 0.0).any() || std::abs(p.sum() - 1.0) > 1e-10) {
    throw std::invalid_argument(std::string(what) + " is not normalised");
  }
}

}  // namespace

namespace testing {
void set_normalizer_fault(double scale) { g_fault_scale.store(scale); }
double normalizer_fault() { return g_fault_scale.load(); }
}  // namespace testing

Eigen::VectorXd boltzmann_probs(const Eigen::VectorXd& q_values, double eps) {
  require_positive_eps(eps);
  if (q_values.size() == 0) throw std::invalid_argument("empty action support");
  const double e = std::max(eps, kTemperatureFloor);
  Eigen::VectorXd p = ((q_values.array() - q_values.maxCoeff()) / e).exp();
  p /= p.sum();
  const double fault = g_fault_scale.load(std::memory_order_relaxed);
  if (fault != 1.0) p *= fault;
  return p;
}

Eigen::VectorXd boltzmann_probs(const QApproximator& q, std::size_t s, double eps) {
  Eigen::VectorXd values(static_cast<Eigen::Index>(q.n_actions()));
  for (std::size_t a = 0; a < q.n_actions(); ++a) {
    values(static_cast<Eigen::Index>(a)) = q.eval(StateAction::discrete(s, a));
  }
  return boltzmann_probs(values, eps);
}

std::size_t greedy_action(const Eigen::Ref<const Eigen::RowVectorXd>& q_row) {
  Eigen::Index best = 0;
  for (Eigen::Index a = 1; a < q_row.size(); ++a) {
    if (q_row(a) > q_row(best)) best = a;
  }
  return static_cast<std::size_t>(best);
}

QTable greedy_table(const QTable& q) {
  QTable pi = QTable::Zero(q.rows(), q.cols());
  for (Eigen::Index s = 0; s < q.rows(); ++s) {
    pi(s, static_cast<Eigen::Index>(greedy_action(q.row(s)))) = 1.0;
  }
  return pi;
}

QTable boltzmann_table(const QTable& q, double eps) {
  if (eps < 0.0 || std::isnan(eps)) throw std::invalid_argument("temperature must be non-negative");
  if (eps < kTemperatureFloor) return greedy_table(q);
  QTable pi(q.rows(), q.cols());
  for (Eigen::Index s = 0; s < q.rows(); ++s) {
    pi.row(s) = boltzmann_probs(Eigen::VectorXd(q.row(s).transpose()), eps).transpose();
  }
  return pi;
}

std::size_t unique_argmax(const Eigen::VectorXd& values, double tol) {
  if (values.size() == 0) throw std::invalid_argument("empty action support");
  Eigen::Index best = 0;
  values.maxCoeff(&best);
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    if (i != best && values(best) - values(i) <= tol) {
      throw TieError("argmax is not unique: entries " + std::to_string(best) + " and " +
                     std::to_string(i) + " tie");
    }
  }
  return static_cast<std::size_t>(best);
}

std::size_t ActionGrid::size() const {
  std::size_t n = 1;
  for (std::size_t i = 0; i < dim(); ++i) n *= points_per_dim;
  return n;
}

Eigen::MatrixXd ActionGrid::points() const {
  if (low.size() != high.size() || low.size() == 0) throw std::invalid_argument("bad action box");
  if (points_per_dim == 0) throw std::invalid_argument("grid needs at least one point per dimension");
  const auto d = static_cast<Eigen::Index>(dim());
  const std::size_t n = size();
  const Eigen::VectorXd width = (high - low) / static_cast<double>(points_per_dim);
  Eigen::MatrixXd pts(d, static_cast<Eigen::Index>(n));
  for (std::size_t j = 0; j < n; ++j) {
    std::size_t rem = j;
    for (Eigen::Index k = 0; k < d; ++k) {
      const std::size_t idx = rem % points_per_dim;
      rem /= points_per_dim;
      pts(k, static_cast<Eigen::Index>(j)) = low(k) + (static_cast<double>(idx) + 0.5) * width(k);
    }
  }
  return pts;
}

double ActionGrid::cell_volume() const {
  return ((high - low) / static_cast<double>(points_per_dim)).prod();
}

Eigen::VectorXd boltzmann_grid_probs(const QApproximator& q, const Eigen::VectorXd& s, double eps,
                                     const ActionGrid& grid) {
  const Eigen::MatrixXd actions = grid.points();
  const Eigen::MatrixXd states = s.replicate(1, actions.cols());
  return boltzmann_probs(q.eval_batch(states, actions), eps);
}

DiracTrace dirac_limit(const Eigen::VectorXd& q_values, const std::vector<double>& eps_sequence) {
  if (eps_sequence.empty()) throw std::invalid_argument("empty temperature sequence");
  for (std::size_t i = 0; i < eps_sequence.size(); ++i) {
    if (!(eps_sequence[i] > 0.0)) throw std::invalid_argument("temperatures must be positive");
    if (i > 0 && !(eps_sequence[i] < eps_sequence[i - 1])) {
      throw std::invalid_argument("temperatures must be strictly decreasing");
    }
  }
  DiracTrace trace;
  trace.argmax = unique_argmax(q_values);
  const auto star = static_cast<Eigen::Index>(trace.argmax);
  const Eigen::VectorXd idx = Eigen::VectorXd::LinSpaced(q_values.size(), 0.0,
                                                         static_cast<double>(q_values.size() - 1));
  for (double e : eps_sequence) {
    const Eigen::VectorXd p = boltzmann_probs(q_values, e);
    Eigen::VectorXd diff = p;
    diff(star) -= 1.0;
    trace.eps.push_back(e);
    trace.tv_distance.push_back(0.5 * diff.cwiseAbs().sum());
    trace.expected_index.push_back(p.dot(idx));
  }
  return trace;
}

QTable optimality_likelihood(const QTable& q, double eps) {
  require_positive_eps(eps);
  const double e = std::max(eps, kTemperatureFloor);
  QTable lik(q.rows(), q.cols());
  for (Eigen::Index s = 0; s < q.rows(); ++s) {
    lik.row(s) = ((q.row(s).array() - q.row(s).maxCoeff()) / e).exp();
  }
  return lik;
}

QTable bayes_action_posterior(const QTable& q, double eps) {
  const QTable lik = optimality_likelihood(q, eps);
  const double prior = 1.0 / static_cast<double>(q.size());
  QTable joint = lik * prior;
  joint /= joint.sum();
  for (Eigen::Index s = 0; s < joint.rows(); ++s) joint.row(s) /= joint.row(s).sum();
  return joint;
}

Eigen::VectorXd boltzmann_state_marginal(const QTable& q, double eps) {
  require_positive_eps(eps);
  const double e = std::max(eps, kTemperatureFloor);
  const double m = q.maxCoeff();
  Eigen::VectorXd w = ((q.array() - m) / e).exp().matrix().rowwise().sum();
  return w / w.sum();
}

ElboTerms elbo_discrete(const QTable& q, double eps, const QTable& pi_theta,
                        const Eigen::VectorXd& d) {
  require_positive_eps(eps);
  if (pi_theta.rows() != q.rows() || pi_theta.cols() != q.cols() || d.size() != q.rows()) {
    throw std::invalid_argument("ELBO inputs have inconsistent shapes");
  }
  require_distribution(d.transpose(), "state distribution");
  for (Eigen::Index s = 0; s < pi_theta.rows(); ++s) require_distribution(pi_theta.row(s), "policy row");

  const double e = std::max(eps, kTemperatureFloor);
  const QTable u = q / e;
  const double m = u.maxCoeff();
  const double log_norm = m + std::log((u.array() - m).exp().sum());
  const QTable pi_omega = boltzmann_table(q, eps);

  ElboTerms t;
  t.log_norm = log_norm;
  t.entropy_d = entropy_of(d.transpose());
  for (Eigen::Index s = 0; s < q.rows(); ++s) {
    if (d(s) == 0.0) continue;
    t.elbo += d(s) * (pi_theta.row(s).dot(u.row(s)) + entropy_of(pi_theta.row(s)));
    double kl_s = 0.0;
    for (Eigen::Index a = 0; a < q.cols(); ++a) {
      const double p = pi_theta(s, a);
      if (p == 0.0) continue;
      const double qh = d(s) * p;
      t.kl_joint += qh * (std::log(qh) - (u(s, a) - log_norm));
      kl_s += p * (std::log(p) - std::log(pi_omega(s, a)));
    }
    t.kl_policy += d(s) * kl_s;
  }
  return t;
}

VariationalFit fit_variational_table(const QTable& q, double eps, const Eigen::VectorXd& d,
                                     double step, std::size_t max_iters, double tol) {
  require_positive_eps(eps);
  if (!(step > 0.0 && step <= 1.0)) throw std::invalid_argument("step must lie in (0, 1]");
  const double e = std::max(eps, kTemperatureFloor);
  const QTable u = q / e;
  QTable logits = QTable::Zero(q.rows(), q.cols());
  VariationalFit fit;
  auto probs_of = [](const QTable& z) {
    QTable p(z.rows(), z.cols());
    for (Eigen::Index s = 0; s < z.rows(); ++s) {
      p.row(s) = (z.row(s).array() - z.row(s).maxCoeff()).exp();
      p.row(s) /= p.row(s).sum();
    }
    return p;
  };
  fit.pi = probs_of(logits);
  fit.elbo_trace.push_back(elbo_discrete(q, eps, fit.pi, d).elbo);
  for (std::size_t it = 0; it < max_iters; ++it) {
    // gradient of the per-state objective in pi-space is u - log pi - 1;
    // the constant drops out under the softmax.
    QTable log_pi = logits;
    for (Eigen::Index s = 0; s < log_pi.rows(); ++s) {
      const double mx = logits.row(s).maxCoeff();
      log_pi.row(s).array() -= mx + std::log((logits.row(s).array() - mx).exp().sum());
    }
    logits += step * (u - log_pi);
    const QTable next = probs_of(logits);
    const double change = (next - fit.pi).cwiseAbs().maxCoeff();
    fit.pi = next;
    fit.iterations = it + 1;
    fit.elbo_trace.push_back(elbo_discrete(q, eps, fit.pi, d).elbo);
    if (change < tol) break;
  }
  return fit;
}

}  // namespace virel
