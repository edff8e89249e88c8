#include <sstream>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "virel/actor_critic.hpp"
#include "virel/boltzmann.hpp"
#include "virel/cli.hpp"
#include "virel/em_exact.hpp"
#include "virel/merl.hpp"
#include "virel/verify.hpp"

namespace py = pybind11;
using namespace virel;

PYBIND11_MODULE(_virel, m) {
  m.doc() = "Tabular and toy continuous-control routines of the virel toolkit.";
  m.attr("__version__") = VIREL_VERSION;

  py::class_<DiscreteMdp>(m, "DiscreteMdp")
      .def_property_readonly("n_states", &DiscreteMdp::n_states)
      .def_property_readonly("n_actions", &DiscreteMdp::n_actions)
      .def_property_readonly("gamma", &DiscreteMdp::gamma)
      .def("p", &DiscreteMdp::p, py::arg("s"), py::arg("a"), py::arg("next"))
      .def("r", &DiscreteMdp::r, py::arg("s"), py::arg("a"))
      .def("to_json", [](const DiscreteMdp& mdp) { return to_json(mdp).dump(); })
      .def_static("from_json", [](const std::string& text) { return mdp_from_json(nlohmann::json::parse(text)); });

  m.def("random_mdp", &random_mdp, py::arg("n_states"), py::arg("n_actions"), py::arg("seed"),
        py::arg("gamma"));
  m.def(
      "counterexample_mdp",
      [](std::size_t k1, std::size_t k2, double gamma, double c) {
        return build_counterexample({k1, k2, gamma, c});
      },
      py::arg("k1"), py::arg("k2") = 5, py::arg("gamma") = 0.99, py::arg("c") = 1.0);

  m.def(
      "boltzmann_probs", [](const Eigen::VectorXd& q, double eps) { return boltzmann_probs(q, eps); },
      py::arg("q"), py::arg("eps"));
  m.def("boltzmann_table", &boltzmann_table, py::arg("q"), py::arg("eps"));

  m.def(
      "optimal_p1_closed", [](std::size_t k1, double gamma, double c) { return optimal_p1_closed(k1, gamma, c).p1; },
      py::arg("k1"), py::arg("gamma"), py::arg("c"));
  m.def(
      "optimal_p1_numeric", [](std::size_t k1, double gamma, double c) { return optimal_p1_numeric(k1, gamma, c); },
      py::arg("k1"), py::arg("gamma"), py::arg("c"));

  m.def(
      "em_policy_iteration",
      [](const DiscreteMdp& mdp) {
        py::list out;
        for (const EmIterate& it : em_policy_iteration(mdp).iterates) {
          py::dict d;
          d["q"] = it.q;
          d["policy"] = it.policy.mode();
          d["values"] = it.values;
          out.append(d);
        }
        return out;
      },
      py::arg("mdp"));
  m.def(
      "em_q_learning",
      [](const DiscreteMdp& mdp, const QTable& q0, std::size_t steps) { return em_q_learning(mdp, q0, steps); },
      py::arg("mdp"), py::arg("q0"), py::arg("steps"));
  m.def(
      "value_iteration", [](const DiscreteMdp& mdp) { return value_iteration_oracle(mdp).q; }, py::arg("mdp"));

  m.def(
      "verify",
      [](const std::string& suite, std::size_t draws, std::uint64_t seed) {
        return to_json(run_verify(suite, {draws, seed})).dump();
      },
      py::arg("suite") = "all", py::arg("draws") = 50, py::arg("seed") = 0);

  m.def(
      "train",
      [](const std::string& env, const std::string& variant, std::uint64_t seed, const py::dict& overrides) {
        TrainConfig cfg;
        for (auto item : overrides) {
          const std::string key = py::str(item.first);
          const py::handle v = item.second;
          if (key == "total_steps") cfg.total_steps = v.cast<std::size_t>();
          else if (key == "net_width") cfg.net_width = v.cast<std::size_t>();
          else if (key == "batch_size") cfg.batch_size = v.cast<std::size_t>();
          else if (key == "steps_per_eval") cfg.steps_per_eval = v.cast<std::size_t>();
          else if (key == "warmup_steps") cfg.warmup_steps = v.cast<std::size_t>();
          else if (key == "eval_episodes") cfg.eval_episodes = v.cast<std::size_t>();
          else if (key == "n_eps_samples") cfg.n_eps_samples = v.cast<std::size_t>();
          else if (key == "gamma") cfg.gamma = v.cast<double>();
          else if (key == "alpha") cfg.alpha = v.cast<double>();
          else if (key == "reward_scale") cfg.reward_scale = v.cast<double>();
          else if (key == "tau") cfg.tau = v.cast<double>();
          else if (key == "lr") cfg.lr_q = cfg.lr_v = cfg.lr_pi = v.cast<double>();
          else throw py::key_error("unknown training option '" + key + "'");
        }
        cfg.validate();
        TrainResult r;
        {
          py::gil_scoped_release release;
          r = train(make_env(env), cfg, variant_from_string(variant), seed);
        }
        py::list rows;
        for (const TrainRow& row : r.rows) {
          py::dict d;
          d["step"] = row.step;
          d["mean_return"] = row.mean_return;
          d["eps_hat"] = row.eps_hat;
          d["entropy"] = row.entropy;
          rows.append(d);
        }
        py::dict out;
        out["rows"] = rows;
        out["final_return"] = r.final_return;
        return out;
      },
      py::arg("env") = "bandit", py::arg("variant") = "virel", py::arg("seed") = 0,
      py::arg("overrides") = py::dict());

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        const int code = run_cli(args, out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"));
}
