#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "pauseflow/cli.hpp"
#include "pauseflow/config.hpp"
#include "pauseflow/envs.hpp"
#include "pauseflow/flywheel.hpp"
#include "pauseflow/idle.hpp"
#include "pauseflow/metrics.hpp"
#include "pauseflow/perturb.hpp"
#include "pauseflow/policy.hpp"

#include <sstream>

namespace py = pybind11;
using namespace pauseflow;

namespace {

// Matrices cross the boundary as nested lists (rows of K entries).
std::vector<Vec> to_rows(const nn::Matrix& m) {
  std::vector<Vec> rows(m.rows(), Vec(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) rows[r][c] = m(r, c);
  return rows;
}

nn::Matrix from_rows(const std::vector<Vec>& rows) {
  const auto cols = rows.empty() ? 0 : rows.front().size();
  nn::Matrix m(rows.size(), cols);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != cols) throw UsageError("ragged matrix");
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = rows[r][c];
  }
  return m;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "pauseflow core bindings";
  m.attr("__version__") = PAUSEFLOW_VERSION;

  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<UsageError>(m, "UsageError", PyExc_ValueError);

  py::class_<Step>(m, "Step")
      .def(py::init<>())
      .def_readwrite("t", &Step::t)
      .def_readwrite("obs", &Step::obs)
      .def_readwrite("joints", &Step::joints)
      .def_readwrite("action", &Step::action)
      .def_readwrite("perturbed", &Step::perturbed);

  py::class_<Episode>(m, "Episode")
      .def(py::init<>())
      .def_readwrite("episode_id", &Episode::episode_id)
      .def_readwrite("env_name", &Episode::env_name)
      .def_readwrite("seed", &Episode::seed)
      .def_readwrite("steps", &Episode::steps)
      .def_readwrite("final_joints", &Episode::final_joints)
      .def_readwrite("success", &Episode::success)
      .def("positions", &Episode::positions)
      .def("perturbed_count", &Episode::perturbed_count)
      .def("__len__", [](const Episode& e) { return e.steps.size(); });

  py::class_<IdleConfig>(m, "IdleConfig")
      .def(py::init([](double epsilon, int t_min, int stride) {
             IdleConfig c{epsilon, t_min, stride};
             c.validate();
             return c;
           }),
           py::arg("epsilon") = 0.005, py::arg("t_min") = 8, py::arg("stride") = 1)
      .def_readwrite("epsilon", &IdleConfig::epsilon)
      .def_readwrite("t_min", &IdleConfig::t_min)
      .def_readwrite("stride", &IdleConfig::stride);

  py::class_<IdleSegment>(m, "IdleSegment")
      .def_readonly("start", &IdleSegment::start)
      .def_readonly("end", &IdleSegment::end)
      .def("__repr__", [](const IdleSegment& s) {
        return "IdleSegment(" + std::to_string(s.start) + ", " + std::to_string(s.end) + ")";
      });

  py::class_<NarrowGateConfig>(m, "NarrowGateConfig")
      .def(py::init<>())
      .def_readwrite("gate_width", &NarrowGateConfig::gate_width)
      .def_readwrite("max_step", &NarrowGateConfig::max_step)
      .def_readwrite("horizon", &NarrowGateConfig::horizon)
      .def_readwrite("wall_y", &NarrowGateConfig::wall_y);

  py::class_<ExpertConfig>(m, "ExpertConfig")
      .def(py::init<>())
      .def_readwrite("pause_mean", &ExpertConfig::pause_mean)
      .def_readwrite("pause_jitter_std", &ExpertConfig::pause_jitter_std)
      .def_readwrite("precision_zone_radius", &ExpertConfig::precision_zone_radius)
      .def_readwrite("precision_step", &ExpertConfig::precision_step);

  py::class_<EnvState>(m, "EnvState")
      .def_readonly("agent", &EnvState::agent)
      .def_readonly("gate_center", &EnvState::gate_center)
      .def_readonly("step_count", &EnvState::step_count)
      .def_readonly("done", &EnvState::done);

  m.def("reset", &reset, py::arg("config"), py::arg("seed"));
  m.def(
      "step",
      [](const NarrowGateConfig& c, const EnvState& s, const Vec& a) {
        const StepResult r = step(c, s, a);
        return py::make_tuple(r.state, r.obs, r.success, r.done);
      },
      py::arg("config"), py::arg("state"), py::arg("action"));
  m.def("gen_demos",
        [](const NarrowGateConfig& env, const ExpertConfig& expert, int n, std::uint64_t seed) {
          return gen_demos(env, expert, n, seed).episodes;
        },
        py::arg("env"), py::arg("expert"), py::arg("n"), py::arg("seed"));

  m.def(
      "detect_idle_segments",
      [](const std::vector<Vec>& positions, const IdleConfig& c) {
        return detect_idle_segments(positions, c);
      },
      py::arg("positions"), py::arg("config") = IdleConfig{});
  m.def(
      "pip_action", [](const Vec& cur, const Vec& init, double sigma) {
        return pip_action(cur, init, sigma);
      },
      py::arg("current"), py::arg("initial"), py::arg("sigma") = 0.6);

  py::class_<Interval>(m, "Interval")
      .def_readonly("rate", &Interval::rate)
      .def_readonly("lo", &Interval::lo)
      .def_readonly("hi", &Interval::hi);
  m.def("success_rate_ci", &success_rate_ci, py::arg("n_success"), py::arg("n_trials"),
        py::arg("level") = 0.90);

  m.def("laplace_kl", py::overload_cast<double, double, double, double>(&laplace_kl),
        py::arg("mu_ref"), py::arg("b_ref"), py::arg("mu"), py::arg("b"));

  py::class_<PolicyConfig>(m, "PolicyConfig")
      .def(py::init<>())
      .def_readwrite("chunk_len", &PolicyConfig::chunk_len)
      .def_readwrite("open_loop", &PolicyConfig::open_loop)
      .def_readwrite("hidden_sizes", &PolicyConfig::hidden_sizes);

  py::class_<PolicyParams>(m, "Policy")
      .def_property_readonly("num_params", &PolicyParams::num_params)
      .def_readonly("config", &PolicyParams::config)
      .def("save", [](const PolicyParams& p, const std::filesystem::path& path) {
        save_policy(path, p);
      });
  m.def("init_policy", &init_policy, py::arg("config") = PolicyConfig{}, py::arg("seed") = 0);
  m.def("load_policy", &load_policy, py::arg("path"));
  m.def(
      "predict_chunk",
      [](const PolicyParams& p, const Vec& obs) {
        const ChunkDistribution d = predict_chunk(p, obs);
        return py::make_tuple(to_rows(d.means), to_rows(d.scales));
      },
      py::arg("policy"), py::arg("obs"));
  m.def(
      "nll",
      [](const std::vector<Vec>& means, const std::vector<Vec>& scales,
         const std::vector<Vec>& actions) {
        return nll({from_rows(means), from_rows(scales)}, from_rows(actions));
      },
      py::arg("means"), py::arg("scales"), py::arg("actions"));

  m.def("read_episodes", [](const std::filesystem::path& p) { return read_episodes(p); });
  m.def("write_episodes", [](const std::filesystem::path& p, const std::vector<Episode>& e) {
    return write_episodes(p, e);
  });

  m.def(
      "collect",
      [](const PolicyParams& policy, int n, std::uint64_t seed, const std::string& perturb,
         bool deterministic) {
        RolloutConfig rc;
        rc.mode = parse_perturb_mode(perturb);
        rc.deterministic_actions = deterministic;
        py::gil_scoped_release release;
        return collect(policy, NarrowGateConfig{}, n, seed, rc).episodes;
      },
      py::arg("policy"), py::arg("n"), py::arg("seed") = 0, py::arg("perturb") = "none",
      py::arg("deterministic") = true);

  m.def(
      "idle_failure_fraction",
      [](const std::vector<Episode>& eps, const IdleConfig& c) {
        return idle_failure_fraction(eps, c).fraction;
      },
      py::arg("episodes"), py::arg("config") = IdleConfig{});

  m.def("default_config_json",
        [] { return experiment_config_to_json(default_experiment_config()).dump(); });

  m.def(
      "run_cli",
      [](std::vector<std::string> args) {
        args.insert(args.begin(), "pauseflow");
        std::ostringstream out, err;
        const int code = run_cli(args, out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"));
}
