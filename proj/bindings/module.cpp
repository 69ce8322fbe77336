// SPDX-License-Identifier: Apache-2.0
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <string>
#include <vector>

#include "dni/checkpoint.hpp"
#include "dni/harness.hpp"
#include "dni/synth_digits.hpp"

namespace py = pybind11;

namespace {

py::dict result_dict(const dni::RunResult& r) {
    py::dict d;
    d["steps"] = r.steps;
    d["metrics_path"] = r.metrics_path;
    d["checkpoint_path"] = r.checkpoint_path;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "dni: decoupled training engine (native core)";

    m.def(
        "run_experiment",
        [](const std::string& config_json, const std::string& resume) {
            dni::RunResult r;
            {
                py::gil_scoped_release release;
                const dni::ExperimentConfig cfg = dni::config_from_json_text(config_json);
                r = dni::run_experiment(cfg, resume);
            }
            return result_dict(r);
        },
        py::arg("config_json"), py::arg("resume") = "",
        "Run one experiment from a config json string; returns paths and the "
        "final step count.");

    m.def(
        "run_sweep",
        [](const std::string& config_json) {
            std::vector<dni::RunResult> rs;
            {
                py::gil_scoped_release release;
                const dni::ExperimentConfig base = dni::config_from_json_text(config_json);
                rs = dni::run_sweep(base);
            }
            py::list out;
            for (const dni::RunResult& r : rs) out.append(result_dict(r));
            return out;
        },
        py::arg("config_json"),
        "Run the attached one-parameter grid; returns one result per value.");

    m.def(
        "verify",
        [](const std::string& corrupt) {
            std::vector<dni::VerifyCheck> checks;
            {
                py::gil_scoped_release release;
                checks = dni::run_verification(corrupt);
            }
            py::list out;
            for (const dni::VerifyCheck& c : checks) {
                py::dict d;
                d["name"] = c.name;
                d["passed"] = c.passed;
                d["value"] = c.value;
                d["detail"] = c.detail;
                out.append(d);
            }
            return out;
        },
        py::arg("corrupt") = "",
        "Run the built-in invariant checks. `corrupt` perturbs the named check "
        "so it must fail (a self-test of the checker).");

    m.def(
        "canonical_config",
        [](const std::string& config_json) {
            return dni::config_to_json_text(dni::config_from_json_text(config_json));
        },
        py::arg("config_json"),
        "Validate a config json string and return its canonical serialization.");

    m.def(
        "inspect_checkpoint",
        [](const std::string& path) {
            const dni::CheckpointReader r = dni::CheckpointReader::load(path);
            py::list out;
            for (const auto& e : r.entries()) {
                py::dict d;
                d["key"] = e.key;
                d["summary"] = r.describe(e);
                out.append(d);
            }
            py::dict top;
            top["version"] = r.version();
            top["records"] = out;
            return top;
        },
        py::arg("path"), "List the records inside a checkpoint file.");

    m.def("make_synthetic_digits", &dni::make_synthetic_digits, py::arg("out_dir"),
          py::arg("n_train"), py::arg("n_test"), py::arg("seed"),
          "Write a small rendered-digit dataset in the idx format.");

    m.def("bp_lambda_chain_divergence", &dni::bp_lambda_chain_divergence, py::arg("depth"),
          py::arg("width"), py::arg("batch"), py::arg("steps"), py::arg("seed"),
          py::call_guard<py::gil_scoped_release>(),
          "Max parameter divergence of a lambda = 1 trajectory from exact backprop.");
    m.def("lambda_simplex_deviation", &dni::lambda_simplex_deviation, py::arg("schedules"),
          py::arg("seed"), py::call_guard<py::gil_scoped_release>(),
          "Max deviation of the mixing weights from a probability simplex.");
    m.def("oracle_mixture_error", &dni::oracle_mixture_error, py::arg("schedules"),
          py::arg("seed"), py::call_guard<py::gil_scoped_release>(),
          "Max mixed-estimator error when every synthetic gradient is exact.");
    m.def("rnn_window_recurrence_divergence", &dni::rnn_window_recurrence_divergence,
          py::arg("T"), py::arg("windows"), py::arg("seed"),
          py::call_guard<py::gil_scoped_release>(),
          "Max gap between window-trainer gradients and the truncation-rule recurrence.");
}
