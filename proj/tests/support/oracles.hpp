#pragma once

// Independent reference computations shared by the unit and acceptance tests.
// Nothing here calls into the library's solvers; only the MDP container is read.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "virel/mdp.hpp"

namespace oracle {

using virel::DiscreteMdp;
using virel::QTable;

inline Eigen::VectorXd central_difference(const std::function<double(const Eigen::VectorXd&)>& f,
                                          Eigen::VectorXd x, double h = 1e-6) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double x0 = x(i);
    x(i) = x0 + h;
    const double fp = f(x);
    x(i) = x0 - h;
    const double fm = f(x);
    x(i) = x0;
    g(i) = (fp - fm) / (2 * h);
  }
  return g;
}

inline double rel_err(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return (a - b).norm() / std::max({a.norm(), b.norm(), 1e-8});
}

inline Eigen::VectorXd softmax(const Eigen::VectorXd& x, double temp) {
  Eigen::VectorXd e = ((x.array() - x.maxCoeff()) / temp).exp();
  return e / e.sum();
}

inline std::size_t argmax_lowest(const Eigen::RowVectorXd& row) {
  std::size_t best = 0;
  for (Eigen::Index a = 1; a < row.size(); ++a) {
    if (row(a) > row(static_cast<Eigen::Index>(best))) best = static_cast<std::size_t>(a);
  }
  return best;
}

/// Q^pi for a deterministic policy from the |H| x |H| system (I - gamma P Pi) q = r.
inline QTable evaluate_deterministic(const DiscreteMdp& mdp, const std::vector<std::size_t>& pi) {
  const auto S = static_cast<Eigen::Index>(mdp.n_states());
  const auto A = static_cast<Eigen::Index>(mdp.n_actions());
  const Eigen::Index H = S * A;
  Eigen::MatrixXd M = Eigen::MatrixXd::Identity(H, H);
  Eigen::VectorXd r(H);
  for (Eigen::Index s = 0; s < S; ++s) {
    for (Eigen::Index a = 0; a < A; ++a) {
      const Eigen::Index h = s * A + a;
      r(h) = mdp.r(static_cast<std::size_t>(s), static_cast<std::size_t>(a));
      for (Eigen::Index n = 0; n < S; ++n) {
        const double p = mdp.p(static_cast<std::size_t>(s), static_cast<std::size_t>(a),
                               static_cast<std::size_t>(n));
        M(h, n * A + static_cast<Eigen::Index>(pi[static_cast<std::size_t>(n)])) -= mdp.gamma() * p;
      }
    }
  }
  const Eigen::VectorXd q = M.fullPivLu().solve(r);
  QTable out(S, A);
  for (Eigen::Index h = 0; h < H; ++h) out(h / A, h % A) = q(h);
  return out;
}

struct PiStep {
  QTable q;
  std::vector<std::size_t> policy;
};

/// Howard policy iteration from "action 0 everywhere", greedy ties to the lowest index.
inline std::vector<PiStep> policy_iteration(const DiscreteMdp& mdp, std::size_t max_iters = 1000) {
  std::vector<std::size_t> pi(mdp.n_states(), 0);
  std::vector<PiStep> steps;
  for (std::size_t it = 0; it < max_iters; ++it) {
    PiStep st;
    st.q = evaluate_deterministic(mdp, pi);
    st.policy.resize(mdp.n_states());
    for (Eigen::Index s = 0; s < st.q.rows(); ++s) st.policy[static_cast<std::size_t>(s)] = argmax_lowest(st.q.row(s));
    const bool same = st.policy == pi;
    pi = st.policy;
    steps.push_back(std::move(st));
    if (same) break;
  }
  return steps;
}

/// One T* backup with the next-state sum taken in index order.
inline QTable bellman_optimal(const DiscreteMdp& mdp, const QTable& q) {
  const auto S = static_cast<Eigen::Index>(mdp.n_states());
  const auto A = static_cast<Eigen::Index>(mdp.n_actions());
  std::vector<double> v(static_cast<std::size_t>(S));
  for (Eigen::Index s = 0; s < S; ++s) {
    double m = q(s, 0);
    for (Eigen::Index a = 1; a < A; ++a) m = std::max(m, q(s, a));
    v[static_cast<std::size_t>(s)] = m;
  }
  QTable out(S, A);
  for (Eigen::Index s = 0; s < S; ++s) {
    for (Eigen::Index a = 0; a < A; ++a) {
      double acc = 0.0;
      for (Eigen::Index n = 0; n < S; ++n) {
        acc += mdp.p(static_cast<std::size_t>(s), static_cast<std::size_t>(a), static_cast<std::size_t>(n)) *
               v[static_cast<std::size_t>(n)];
      }
      out(s, a) = mdp.r(static_cast<std::size_t>(s), static_cast<std::size_t>(a)) + mdp.gamma() * acc;
    }
  }
  return out;
}

/// Expected backup under a stochastic next-state policy table.
inline QTable bellman_policy(const DiscreteMdp& mdp, const QTable& q, const QTable& pi) {
  const auto S = static_cast<Eigen::Index>(mdp.n_states());
  const auto A = static_cast<Eigen::Index>(mdp.n_actions());
  Eigen::VectorXd v(S);
  for (Eigen::Index s = 0; s < S; ++s) v(s) = pi.row(s).dot(q.row(s));
  QTable out(S, A);
  for (Eigen::Index s = 0; s < S; ++s) {
    for (Eigen::Index a = 0; a < A; ++a) {
      double acc = 0.0;
      for (Eigen::Index n = 0; n < S; ++n) {
        acc += mdp.p(static_cast<std::size_t>(s), static_cast<std::size_t>(a), static_cast<std::size_t>(n)) * v(n);
      }
      out(s, a) = mdp.r(static_cast<std::size_t>(s), static_cast<std::size_t>(a)) + mdp.gamma() * acc;
    }
  }
  return out;
}

inline QTable value_iteration(const DiscreteMdp& mdp, double tol = 1e-13) {
  QTable q = QTable::Zero(static_cast<Eigen::Index>(mdp.n_states()), static_cast<Eigen::Index>(mdp.n_actions()));
  for (int it = 0; it < 1000000; ++it) {
    QTable next = bellman_optimal(mdp, q);
    const double change = (next - q).cwiseAbs().maxCoeff();
    q = next;
    if (change < tol) break;
  }
  return q;
}

inline QTable boltzmann_rows(const QTable& q, double eps) {
  QTable p(q.rows(), q.cols());
  for (Eigen::Index s = 0; s < q.rows(); ++s) p.row(s) = softmax(q.row(s).transpose(), eps).transpose();
  return p;
}

/// (c/p) mean |target - q|^p
inline double residual(const QTable& target, const QTable& q, double c = 1.0, double p = 2.0) {
  return c / p * (target - q).array().abs().pow(p).mean();
}

/// Least-squares TD solution with uniform weighting over H:
/// Phi^T (Phi - gamma P_pi Phi) w = Phi^T r.
inline Eigen::VectorXd lstd(const Eigen::MatrixXd& phi, const DiscreteMdp& mdp, const QTable& pi) {
  const auto S = static_cast<Eigen::Index>(mdp.n_states());
  const auto A = static_cast<Eigen::Index>(mdp.n_actions());
  const Eigen::Index H = S * A;
  Eigen::MatrixXd next_phi = Eigen::MatrixXd::Zero(H, phi.cols());
  Eigen::VectorXd r(H);
  for (Eigen::Index h = 0; h < H; ++h) {
    const auto s = static_cast<std::size_t>(h / A);
    const auto a = static_cast<std::size_t>(h % A);
    r(h) = mdp.r(s, a);
    for (Eigen::Index n = 0; n < S; ++n) {
      for (Eigen::Index b = 0; b < A; ++b) {
        next_phi.row(h) += mdp.p(s, a, static_cast<std::size_t>(n)) * pi(n, b) * phi.row(n * A + b);
      }
    }
  }
  const Eigen::MatrixXd lhs = phi.transpose() * (phi - mdp.gamma() * next_phi);
  return lhs.fullPivLu().solve(phi.transpose() * r);
}

inline double p1_closed(double k1, double gamma, double c) {
  return 1.0 / (std::pow(k1, -gamma) * std::exp(1.0 / c) + 1.0);
}

inline Eigen::MatrixXd gaussian(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double sd = 1.0) {
  std::normal_distribution<double> n(0.0, sd);
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index j = 0; j < c; ++j) {
    for (Eigen::Index i = 0; i < r; ++i) m(i, j) = n(rng);
  }
  return m;
}

inline QTable random_stochastic(Eigen::Index S, Eigen::Index A, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.1, 1.0);
  QTable p(S, A);
  for (Eigen::Index s = 0; s < S; ++s) {
    for (Eigen::Index a = 0; a < A; ++a) p(s, a) = u(rng);
    p.row(s) /= p.row(s).sum();
  }
  return p;
}

inline Eigen::VectorXd random_simplex(Eigen::Index n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.1, 1.0);
  Eigen::VectorXd d(n);
  for (Eigen::Index i = 0; i < n; ++i) d(i) = u(rng);
  return d / d.sum();
}

}  // namespace oracle
