// SPDX-License-Identifier: Apache-2.0
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "lid/cli.hpp"
#include "lid/error.hpp"
#include "lid/losses.hpp"
#include "lid/memory.hpp"
#include "lid/report.hpp"

namespace py = pybind11;
using Rows = std::vector<std::vector<double>>;

namespace {

lid::Tensor to_tensor(const Rows& rows, std::size_t cols_if_empty = 0) {
  if (rows.empty()) return lid::Tensor::matrix(0, cols_if_empty);
  return lid::Tensor::from_rows(rows);
}

std::string run_json(const std::string& config_json) {
  lid::RunConfig cfg = lid::run_config_from_json(lid::json::parse(config_json));
  const lid::BenchmarkSchedule sched = lid::materialize_schedule(cfg.source);
  const lid::RunReport report = lid::run_benchmark(sched, cfg.strategy, cfg.hyperparams, cfg.seed);
  return lid::report_json_string(report, lid::to_json(cfg));
}

std::string schedule_json(const std::string& config_json) {
  const lid::RunConfig cfg = lid::run_config_from_json(lid::json::parse(config_json));
  return lid::schedule_manifest_json(lid::materialize_schedule(cfg.source));
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Class-incremental intent detection: losses, replay memory and the training engine.";

  static py::exception<lid::ConfigError> config_error(m, "ConfigError", PyExc_ValueError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const lid::ConfigError& e) {
      PyErr_SetString(config_error.ptr(), e.what());
    } catch (const lid::DomainError& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    } catch (const lid::ShapeError& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    } catch (const lid::json::exception& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    }
  });

  m.def("dot_scores", [](const std::vector<double>& f, const Rows& theta) {
    return lid::dot_scores(f, to_tensor(theta, f.size()));
  }, py::arg("f"), py::arg("theta"));
  m.def("cosine_probs", [](const std::vector<double>& f, const Rows& theta, double tau) {
    return lid::cosine_probs(f, to_tensor(theta, f.size()), tau);
  }, py::arg("f"), py::arg("theta"), py::arg("tau") = 50.0);
  m.def("cross_entropy", [](const std::vector<double>& p, const std::vector<double>& y) {
    return lid::cross_entropy(p, y);
  }, py::arg("p"), py::arg("y"));
  m.def("kd_loss", [](const std::vector<double>& s_star, const std::vector<double>& s, double t) {
    return lid::kd_loss(s_star, s, t);
  }, py::arg("s_star"), py::arg("s"), py::arg("temperature") = 2.0);
  m.def("fkd_loss", [](const std::vector<double>& f, const std::vector<double>& f_star) {
    return lid::fkd_loss(f, f_star);
  }, py::arg("f"), py::arg("f_star"));
  m.def("icml_loss", [](const Rows& theta_new, const Rows& theta_old, double alpha) {
    return lid::icml_loss(to_tensor(theta_new), to_tensor(theta_old), alpha);
  }, py::arg("theta_new"), py::arg("theta_old"), py::arg("alpha") = -0.1);

  m.def("memory_quota", &lid::memory_quota, py::arg("budget"), py::arg("classes"), py::arg("rank"),
        "Exemplars allowed for the class of the given rank (0 = oldest).");

  m.def("synth_generate", [](std::size_t n_classes, std::size_t per_class, std::size_t vocab_per_class,
                             double overlap, std::uint64_t seed) {
    std::vector<std::pair<std::string, int>> out;
    for (const auto& s : lid::synth_generate(n_classes, per_class, vocab_per_class, overlap, seed)) {
      out.emplace_back(s.text, s.label);
    }
    return out;
  }, py::arg("n_classes"), py::arg("per_class"), py::arg("vocab_per_class") = 12,
     py::arg("overlap") = 0.2, py::arg("seed") = 0);

  m.def("strategy_names", &lid::strategy_names);
  m.def("ablation_variants", [] {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& v : lid::ablation_variants()) out.emplace_back(v.name, v.preset);
    return out;
  });

  // JSON in, JSON out: configs and reports share the CLI's format.
  m.def("schedule_json", &schedule_json, py::arg("config_json") = "{}",
        py::call_guard<py::gil_scoped_release>());
  m.def("run_json", &run_json, py::arg("config_json") = "{}", py::call_guard<py::gil_scoped_release>());
  m.def("cli", [](const std::vector<std::string>& args) {
    std::ostringstream out, err;
    std::vector<std::string> argv{"lid"};
    argv.insert(argv.end(), args.begin(), args.end());
    const int code = lid::cli::main(argv, out, err);
    return py::make_tuple(code, out.str(), err.str());
  }, py::arg("args"));
}
