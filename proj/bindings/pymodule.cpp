#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "ilb/bounds.hpp"
#include "ilb/harness.hpp"
#include "ilb/meta.hpp"
#include "ilb/tabular.hpp"

namespace py = pybind11;
using namespace ilb;

namespace {

py::dict exact_result_dict(const ExactDaggerResult& res) {
  py::dict d;
  d["chosen_losses"] = res.chosen_losses;
  d["own_losses"] = res.own_losses;
  d["eps_hat"] = res.eps_hat;
  d["gamma"] = res.gamma;
  d["beta_penalty"] = res.beta_penalty;
  d["n_beta"] = res.n_beta;
  d["selected"] = res.selected;
  d["lhs"] = res.lhs;
  d["rhs"] = res.rhs;
  return d;
}

py::dict bound_row_dict(const BoundRow& r) {
  py::dict d;
  d["instance"] = r.instance;
  d["theorem"] = r.theorem;
  d["lhs"] = r.lhs;
  d["rhs"] = r.rhs;
  d["slack"] = r.slack;
  d["pass"] = r.pass;
  return d;
}

}  // namespace

PYBIND11_MODULE(_ilb, m) {
  m.doc() = "imitation-learning benchmark core: exact tabular analytics, "
            "bound-verification suites, and the experiment harness";

  py::register_exception<ConfigError>(m, "ConfigError");
  py::register_exception<SchemaError>(m, "SchemaError");
  py::register_exception<IoError>(m, "IoError");

  py::class_<TabularMDP>(m, "TabularMDP")
      .def(py::init<>())
      .def_readwrite("n_states", &TabularMDP::n_states)
      .def_readwrite("n_actions", &TabularMDP::n_actions)
      .def_readwrite("horizon", &TabularMDP::horizon)
      .def_readwrite("transition", &TabularMDP::transition)
      .def_readwrite("cost", &TabularMDP::cost)
      .def_readwrite("initial", &TabularMDP::initial)
      .def("validate", &TabularMDP::validate)
      .def("to_text",
           [](const TabularMDP& mdp) {
             std::ostringstream out;
             mdp.save(out);
             return out.str();
           })
      .def_static("from_text", [](const std::string& text) {
        std::istringstream in(text);
        return TabularMDP::load(in);
      });

  py::class_<TabularPolicy>(m, "TabularPolicy")
      .def(py::init<>())
      .def_readwrite("n_states", &TabularPolicy::n_states)
      .def_readwrite("n_actions", &TabularPolicy::n_actions)
      .def_readwrite("horizon", &TabularPolicy::horizon)
      .def_readwrite("probs", &TabularPolicy::probs)
      .def_static("deterministic", &TabularPolicy::deterministic)
      .def_static("uniform", &TabularPolicy::uniform)
      .def("pi", &TabularPolicy::pi);

  py::class_<DistributionReport>(m, "DistributionReport")
      .def_readonly("per_step", &DistributionReport::per_step)
      .def_readonly("average", &DistributionReport::average);

  m.def("state_distributions", &state_distributions, py::arg("mdp"), py::arg("policy"));
  m.def("expected_cost", &expected_cost, py::arg("mdp"), py::arg("policy"));
  m.def("q_value",
        py::overload_cast<const TabularMDP&, const TabularPolicy&, int, int, int>(&q_value),
        py::arg("mdp"), py::arg("continuation"), py::arg("t_remaining"), py::arg("s"),
        py::arg("a"));
  m.def("recoverability_u", &recoverability_u, py::arg("mdp"), py::arg("expert"),
        py::arg("visited"));
  m.def("tv_distance", [](const std::vector<double>& p, const std::vector<double>& q) {
    return tv_distance(p, q);
  });
  m.def("mix_policies", &mix_policies, py::arg("expert"), py::arg("learned"), py::arg("beta"));
  m.def("disagreement_rate", &disagreement_rate);

  m.def("kaariainen_expected_mistakes", &kaariainen_expected_mistakes, py::arg("T"),
        py::arg("eps"));
  m.def(
      "build_kaariainen_chain",
      [](int T, double eps) {
        ChainInstance inst = build_kaariainen_chain(T, eps);
        return py::make_tuple(inst.mdp, inst.expert, inst.learner);
      },
      py::arg("T"), py::arg("eps"));
  m.def(
      "build_quadratic_gap_example",
      [](int T, double eps, double on_track_cost) {
        GapInstance inst = build_quadratic_gap_example(T, eps, on_track_cost);
        return py::make_tuple(inst.mdp, inst.expert, inst.cloned_learner);
      },
      py::arg("T"), py::arg("eps"), py::arg("on_track_cost") = 0.0);
  m.def(
      "build_gap_family_instance",
      [](int T, double eps) {
        GapFamilyInstance inst = build_gap_family_instance(T, eps);
        return py::make_tuple(inst.mdp, inst.expert, inst.feature_group, inst.n_groups);
      },
      py::arg("T"), py::arg("eps"));

  m.def(
      "exact_dagger_squared",
      [](const TabularMDP& mdp, const TabularPolicy& expert, const std::vector<int>& group,
         int n_groups, int N, const std::string& schedule) {
        return exact_result_dict(exact_dagger_squared(mdp, expert, group, n_groups, N,
                                                      BetaSchedule::parse(schedule)));
      },
      py::arg("mdp"), py::arg("expert"), py::arg("feature_group"), py::arg("n_groups"),
      py::arg("iterations"), py::arg("schedule") = "indicator");

  m.def(
      "verify_bounds",
      [](const std::string& suite) {
        const BoundReport rep = verify_bounds(suite);
        py::list rows;
        for (const auto& r : rep.rows) rows.append(bound_row_dict(r));
        return rows;
      },
      py::arg("suite"));

  m.def(
      "run_experiment",
      [](const std::string& config_text, const std::string& out_dir, std::uint64_t seed,
         bool override_seed) {
        std::istringstream in(config_text);
        ExperimentConfig cfg = ExperimentConfig::parse(in);
        if (!out_dir.empty()) cfg.out_dir = out_dir;
        if (override_seed) cfg.seed = seed;
        const RunArtifacts art = run_experiment(cfg);
        py::dict d;
        d["summary"] = art.summary;
        d["out_dir"] = art.out_dir;
        d["selected_iteration"] = art.selected_iteration;
        py::list series;
        for (const auto& [data, metric] : env_metric_series(art.record)) {
          series.append(py::make_tuple(data, metric));
        }
        d["metric_series"] = series;
        return d;
      },
      py::arg("config_text"), py::arg("out_dir") = std::string(), py::arg("seed") = 0,
      py::arg("override_seed") = false);

  m.def("smile_weights", &smile_weights, py::arg("alpha"), py::arg("n"));
  m.def("smile_renormalized_weights", &smile_renormalized_weights, py::arg("alpha"),
        py::arg("n"));
  m.def("searn_greedy_weights", &searn_greedy_weights, py::arg("alpha"), py::arg("n"));
  m.def(
      "beta_schedule",
      [](const std::string& name, int n) {
        const BetaSchedule s = BetaSchedule::parse(name);
        std::vector<double> betas;
        for (int i = 1; i <= n; ++i) betas.push_back(s.beta(i));
        return betas;
      },
      py::arg("name"), py::arg("n"));
}
