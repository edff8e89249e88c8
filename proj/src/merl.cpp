#include "virel/merl.hpp"

#include <cmath>
#include <stdexcept>

#include "virel/bellman.hpp"
#include "virel/em_exact.hpp"
#include "virel/errors.hpp"

namespace virel {

CounterexamplePolicy CounterexamplePolicy::uniform_branch(double p1, std::size_t k1) {
  if (k1 == 0) throw std::invalid_argument("k1 must be at least 1");
  CounterexamplePolicy pol;
  pol.p1 = p1;
  pol.p1i = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(k1), 1.0 / static_cast<double>(k1));
  return pol;
}

void CounterexamplePolicy::validate() const {
  if (!(p1 > 0.0 && p1 < 1.0)) throw std::invalid_argument("p1 must lie strictly inside (0, 1)");
  if (p1i.size() == 0) throw std::invalid_argument("p1i must be non-empty");
  if (!(p1i.array() > 0.0).all()) throw std::invalid_argument("p1i entries must be positive");
  if (std::abs(p1i.sum() - 1.0) > 1e-12) throw std::invalid_argument("p1i must sum to 1");
}

namespace {

template <typename T>
T j_merl_impl(T p1, T branch_term, T c, T gamma) {
  return (1 - p1) * (1 - c * std::log(1 - p1)) - p1 * (c * std::log(p1) + gamma * c * branch_term);
}

}  // namespace

double j_merl_counterexample(const CounterexamplePolicy& pol, double c, double gamma) {
  pol.validate();
  double branch = 0.0;
  for (Eigen::Index i = 0; i < pol.p1i.size(); ++i) branch += pol.p1i(i) * std::log(pol.p1i(i));
  return j_merl_impl<double>(pol.p1, branch, c, gamma);
}

ClosedFormP1 optimal_p1_closed(std::size_t k1, double gamma, double c) {
  if (k1 == 0) throw std::invalid_argument("k1 must be at least 1");
  if (!(c > 0.0)) throw std::invalid_argument("c must be positive");
  const double ratio = std::pow(static_cast<double>(k1), -gamma) * std::exp(1.0 / c);
  return {1.0 / (ratio + 1.0), ratio < 1.0};
}

double optimal_p1_numeric(std::size_t k1, double gamma, double c, double tol) {
  if (k1 == 0) throw std::invalid_argument("k1 must be at least 1");
  if (!(c > 0.0)) throw std::invalid_argument("c must be positive");
  if (!(tol > 0.0)) throw std::invalid_argument("tol must be positive");
  using L = long double;
  // With p1i uniform, sum_i p1i log p1i = -log k1.
  const L branch = -std::log(static_cast<L>(k1));
  auto f = [&](L p) { return j_merl_impl<L>(p, branch, static_cast<L>(c), static_cast<L>(gamma)); };

  const L lo = 1e-9L;
  const L hi = 1.0L - 1e-9L;
  constexpr int kScan = 101;
  std::vector<L> xs(kScan), fs(kScan);
  for (int i = 0; i < kScan; ++i) {
    xs[i] = lo + (hi - lo) * static_cast<L>(i) / (kScan - 1);
    fs[i] = f(xs[i]);
  }
  int best = 0;
  for (int i = 1; i < kScan; ++i) {
    if (fs[i] > fs[best]) best = i;
  }
  // A single peak means the scan rises to `best` and falls after it.
  for (int i = 1; i <= best; ++i) {
    if (fs[i] < fs[i - 1]) throw NonUnimodalError("objective is not unimodal on the scan");
  }
  for (int i = best + 1; i < kScan; ++i) {
    if (fs[i] > fs[i - 1]) throw NonUnimodalError("objective is not unimodal on the scan");
  }
  L a = xs[std::max(best - 1, 0)];
  L b = xs[std::min(best + 1, kScan - 1)];

  const L inv_phi = (std::sqrt(5.0L) - 1.0L) / 2.0L;
  L x1 = b - inv_phi * (b - a);
  L x2 = a + inv_phi * (b - a);
  L f1 = f(x1);
  L f2 = f(x2);
  for (int it = 0; it < 500 && (b - a) > static_cast<L>(tol); ++it) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + inv_phi * (b - a);
      f2 = f(x2);
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - inv_phi * (b - a);
      f1 = f(x1);
    }
  }
  return static_cast<double>((a + b) / 2);
}

MonteCarloEstimate merl_monte_carlo(const CounterexamplePolicy& pol,
                                    const CounterexampleParams& params, std::size_t episodes,
                                    Rng& rng) {
  pol.validate();
  if (static_cast<std::size_t>(pol.p1i.size()) != params.k1) {
    throw std::invalid_argument("p1i must have k1 entries");
  }
  if (episodes < 2) throw std::invalid_argument("need at least two episodes");
  const DiscreteMdp mdp = build_counterexample(params);
  const CounterexampleLayout lay{params.k1, params.k2};
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double c = params.c;
  const double g = params.gamma;

  double sum = 0.0;
  double sum_sq = 0.0;
  for (std::size_t ep = 0; ep < episodes; ++ep) {
    std::size_t s = lay.s0;
    double ret = 0.0;
    double disc = 1.0;
    while (s != lay.tail_state()) {
      std::size_t a = CounterexampleLayout::a1;
      double bonus = 0.0;
      if (s == lay.s0) {
        const bool pick_a1 = unif(rng) < pol.p1;
        a = pick_a1 ? CounterexampleLayout::a1 : CounterexampleLayout::a2;
        bonus = -c * std::log(pick_a1 ? pol.p1 : 1.0 - pol.p1);
      } else if (s == lay.s1) {
        double u = unif(rng);
        std::size_t i = 1;
        while (i < params.k1 && u >= pol.p1i(static_cast<Eigen::Index>(i - 1))) {
          u -= pol.p1i(static_cast<Eigen::Index>(i - 1));
          ++i;
        }
        a = lay.branch_action(i);
        bonus = -c * std::log(pol.p1i(static_cast<Eigen::Index>(i - 1)));
      }
      const SampledTransition tr = sample_transition(mdp, s, a, rng);
      ret += disc * (tr.reward + bonus);
      disc *= g;
      s = tr.next_state;
    }
    sum += ret;
    sum_sq += ret * ret;
  }
  const double n = static_cast<double>(episodes);
  MonteCarloEstimate est;
  est.episodes = episodes;
  est.mean = sum / n;
  const double var = std::max(0.0, (sum_sq - n * est.mean * est.mean) / (n - 1.0));
  est.std_error = std::sqrt(var / n);
  return est;
}

QTable soft_policy_evaluation(const DiscreteMdp& mdp, const QTable& pi, double c, double tol,
                              std::size_t max_iters) {
  if (!(c >= 0.0)) throw std::invalid_argument("c must be non-negative");
  if (c > 0.0 && !(pi.array() > 0.0).all()) {
    throw std::invalid_argument("soft evaluation needs a strictly positive policy");
  }
  const double g = mdp.gamma();
  const double threshold = g > 0.0 ? tol * (1.0 - g) / g : INFINITY;
  QTable q = QTable::Zero(static_cast<Eigen::Index>(mdp.n_states()),
                          static_cast<Eigen::Index>(mdp.n_actions()));
  for (std::size_t it = 0; it < max_iters; ++it) {
    QTable next = soft_backup(mdp, q, pi, c);
    const double change = (next - q).cwiseAbs().maxCoeff();
    q = std::move(next);
    if (change <= threshold) return q;
  }
  throw ConvergenceError("soft policy evaluation did not converge", max_iters, 0.0);
}

std::vector<CounterexampleRow> counterexample_sweep(const CounterexampleGrid& grid) {
  std::vector<CounterexampleRow> rows;
  for (std::size_t k1 : grid.k1) {
    for (double gamma : grid.gamma) {
      if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must lie in [0, 1)");
      const DiscreteMdp mdp = build_counterexample({k1, grid.k2, gamma, 1.0});
      const EmTrace pi = em_policy_iteration(mdp);
      const std::size_t hard = pi.iterates.back().policy.mode()[CounterexampleLayout::s0];
      for (double c : grid.c) {
        CounterexampleRow row;
        row.k1 = k1;
        row.gamma = gamma;
        row.c = c;
        const ClosedFormP1 closed = optimal_p1_closed(k1, gamma, c);
        row.p1_closed = closed.p1;
        row.indicator = closed.indicator;
        row.p1_numeric = optimal_p1_numeric(k1, gamma, c);
        row.hard_optimal_action = hard;
        rows.push_back(row);
      }
    }
  }
  return rows;
}

TrainResult train_soft_baseline(const ContinuousEnv& env, const TrainConfig& config,
                                std::uint64_t seed) {
  return train(env, config, Variant::kSoft, seed);
}

}  // namespace virel
