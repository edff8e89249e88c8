#include "virel/em_exact.hpp"

#include <cmath>
#include <stdexcept>

#include "virel/bellman.hpp"
#include "virel/boltzmann.hpp"
#include "virel/errors.hpp"

namespace virel {

ExactPolicy ExactPolicy::from_table(QTable table) {
  ExactPolicy pol;
  pol.deterministic = true;
  for (Eigen::Index s = 0; s < table.rows(); ++s) {
    if ((table.row(s).array() < 0.0).any() || std::abs(table.row(s).sum() - 1.0) > 1e-12) {
      throw std::invalid_argument("policy rows must be distributions");
    }
    if (table.row(s).maxCoeff() != 1.0) pol.deterministic = false;
  }
  pol.table = std::move(table);
  return pol;
}

ExactPolicy ExactPolicy::uniform(std::size_t n_states, std::size_t n_actions) {
  const auto rows = static_cast<Eigen::Index>(n_states);
  const auto cols = static_cast<Eigen::Index>(n_actions);
  return from_table(QTable::Constant(rows, cols, 1.0 / static_cast<double>(n_actions)));
}

ExactPolicy ExactPolicy::greedy(const QTable& q) { return from_table(greedy_table(q)); }

std::vector<std::size_t> ExactPolicy::mode() const {
  std::vector<std::size_t> out;
  out.reserve(static_cast<std::size_t>(table.rows()));
  for (Eigen::Index s = 0; s < table.rows(); ++s) out.push_back(greedy_action(table.row(s)));
  return out;
}

std::uint64_t policy_fingerprint(const ExactPolicy& policy) {
  std::uint64_t hash = 1469598103934665603ULL;
  for (std::size_t a : policy.mode()) {
    for (int byte = 0; byte < 8; ++byte) {
      hash ^= (static_cast<std::uint64_t>(a) >> (8 * byte)) & 0xffU;
      hash *= 1099511628211ULL;
    }
  }
  return hash;
}

QTable policy_evaluation_exact(const DiscreteMdp& mdp, const ExactPolicy& policy) {
  const auto n_s = static_cast<Eigen::Index>(mdp.n_states());
  const auto n_a = static_cast<Eigen::Index>(mdp.n_actions());
  if (policy.table.rows() != n_s || policy.table.cols() != n_a) {
    throw std::invalid_argument("policy does not match the MDP shape");
  }
  // Reduce to the state system (I - gamma P_pi) V = r_pi, then Q = r + gamma P V.
  Eigen::MatrixXd P_pi = Eigen::MatrixXd::Zero(n_s, n_s);
  Eigen::VectorXd r_pi = Eigen::VectorXd::Zero(n_s);
  for (Eigen::Index s = 0; s < n_s; ++s) {
    for (Eigen::Index a = 0; a < n_a; ++a) {
      const double w = policy.table(s, a);
      if (w == 0.0) continue;
      P_pi.row(s) += w * mdp.transition().row(s * n_a + a);
      r_pi(s) += w * mdp.reward()(s, a);
    }
  }
  const Eigen::MatrixXd A = Eigen::MatrixXd::Identity(n_s, n_s) - mdp.gamma() * P_pi;
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(A);
  if (!(std::abs(lu.determinant()) > 0.0)) {
    throw SingularMatrixError("policy evaluation system is singular", INFINITY);
  }
  const Eigen::VectorXd v = lu.solve(r_pi);
  const Eigen::VectorXd next = mdp.transition() * v;
  QTable q(n_s, n_a);
  for (Eigen::Index s = 0; s < n_s; ++s) {
    for (Eigen::Index a = 0; a < n_a; ++a) {
      q(s, a) = mdp.reward()(s, a) + mdp.gamma() * next(s * n_a + a);
    }
  }
  return q;
}

ValueIterationResult value_iteration_oracle(const DiscreteMdp& mdp, double tol) {
  const double g = mdp.gamma();
  const double threshold = g > 0.0 ? tol * (1.0 - g) / (2.0 * g) : INFINITY;
  ValueIterationResult res;
  res.q = QTable::Zero(static_cast<Eigen::Index>(mdp.n_states()),
                       static_cast<Eigen::Index>(mdp.n_actions()));
  for (;;) {
    QTable next = optimal_backup(mdp, res.q);
    const double change = (next - res.q).cwiseAbs().maxCoeff();
    res.q = std::move(next);
    ++res.sweeps;
    if (change < threshold) break;
    if (res.sweeps >= 10000000) {
      throw ConvergenceError("value iteration did not reach the tolerance", res.sweeps, change);
    }
  }
  res.policy = ExactPolicy::greedy(res.q);
  return res;
}

EmTrace em_policy_iteration(const DiscreteMdp& mdp, std::size_t max_iters,
                            std::optional<ExactPolicy> initial) {
  ExactPolicy current;
  if (initial) {
    current = *initial;
  } else {
    QTable first = QTable::Zero(static_cast<Eigen::Index>(mdp.n_states()),
                                static_cast<Eigen::Index>(mdp.n_actions()));
    first.col(0).setOnes();
    current = ExactPolicy::from_table(std::move(first));
  }
  EmTrace trace;
  for (std::size_t k = 1; k <= max_iters; ++k) {
    EmIterate it;
    it.iteration = k;
    it.q = policy_evaluation_exact(mdp, current);
    it.values = it.q.cwiseProduct(current.table).rowwise().sum();
    it.policy = ExactPolicy::greedy(it.q);
    it.fingerprint = policy_fingerprint(it.policy);
    it.policy_changed = !(it.policy.table == current.table);
    current = it.policy;
    const bool done = !it.policy_changed;
    trace.iterates.push_back(std::move(it));
    if (done) {
      trace.converged = true;
      return trace;
    }
  }
  throw ConvergenceError("policy iteration did not stabilise", max_iters, 0.0);
}

std::vector<QTable> em_q_learning(const DiscreteMdp& mdp, const QTable& q0, std::size_t n_steps,
                                  std::optional<ExactPolicy> pi0) {
  const ExactPolicy start = pi0 ? *pi0 : ExactPolicy::uniform(mdp.n_states(), mdp.n_actions());
  std::vector<QTable> iterates;
  iterates.reserve(n_steps + 1);
  iterates.push_back(q0);
  if (n_steps == 0) return iterates;
  iterates.push_back(policy_backup(mdp, q0, start.table));
  for (std::size_t k = 2; k <= n_steps; ++k) {
    const QTable& prev = iterates.back();
    // E-step at zero temperature, then a full M-step onto the frozen target.
    const QTable pi = greedy_table(prev);
    iterates.push_back(policy_backup(mdp, prev, pi));
  }
  return iterates;
}

}  // namespace virel
