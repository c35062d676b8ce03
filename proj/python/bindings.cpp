#include <sstream>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "deepsplit/experiment.hpp"
#include "deepsplit/nn.hpp"
#include "deepsplit/optim.hpp"
#include "deepsplit/oracles.hpp"
#include "deepsplit/rng.hpp"
#include "deepsplit/selftest.hpp"

namespace py = pybind11;
using namespace deepsplit;

namespace {

NetworkShape shape_of(int d, int hidden_dim, int hidden_layers, bool batch_norm) {
    NetworkShape s = NetworkShape::standard(d);
    s.hidden_dim = hidden_dim;
    s.hidden_layers = hidden_layers;
    s.batch_norm = batch_norm;
    return s;
}

py::dict report_dict(const ExperimentReport& report) {
    py::list rows;
    for (const auto& r : report.rows) {
        py::dict row;
        row["run"] = r.run;
        row["result"] = r.result;
        row["runtime_s"] = r.runtime_s;
        row["reference"] = r.reference;
        row["reference_std_error"] = r.reference_std_error;
        row["rel_pathwise_error"] = r.rel_pathwise_error;
        row["failed"] = r.failed;
        row["failure"] = r.failure;
        rows.append(row);
    }
    std::ostringstream csv;
    write_report_csv(report, csv, false);
    py::dict out;
    out["problem"] = problem_name(report.config.problem);
    out["dim"] = report.config.dim;
    out["rows"] = rows;
    out["rel_l2"] = report.rel_l2;
    out["csv"] = csv.str();
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Deep splitting solver for semilinear SPDEs";

    m.def("philox4x32",
          [](std::array<std::uint32_t, 4> counter, std::array<std::uint32_t, 2> key) { return philox4x32(counter, key); },
          py::arg("counter"), py::arg("key"));
    m.def("normals",
          [](std::uint64_t seed, std::uint64_t stream_id, std::size_t count) {
              RngStream s = make_stream(seed, stream_id);
              return sample_std_normal(s, count);
          },
          py::arg("seed"), py::arg("stream_id"), py::arg("count"));

    m.def("param_count",
          [](int d, int hidden_dim, int hidden_layers, bool batch_norm) {
              return shape_of(d, hidden_dim, hidden_layers, batch_norm).param_count();
          },
          py::arg("d"), py::arg("hidden_dim") = 51, py::arg("hidden_layers") = 2, py::arg("batch_norm") = true);
    m.def("init_params",
          [](int d, std::uint64_t seed, int hidden_dim, int hidden_layers, bool batch_norm) {
              RngStream s = make_stream(seed, 0);
              return init_params(s, shape_of(d, hidden_dim, hidden_layers, batch_norm), InitScheme::Uniform).values;
          },
          py::arg("d"), py::arg("seed") = 0, py::arg("hidden_dim") = 51, py::arg("hidden_layers") = 2,
          py::arg("batch_norm") = true);
    m.def("forward_train",
          [](const Vector& theta, const Matrix& batch, int hidden_dim, int hidden_layers, bool batch_norm,
             double bn_epsilon) {
              const NetworkShape s = shape_of(static_cast<int>(batch.rows()), hidden_dim, hidden_layers, batch_norm);
              return net_forward_train(ParamVector{s, theta}, batch, bn_epsilon).outputs;
          },
          py::arg("theta"), py::arg("batch"), py::arg("hidden_dim") = 51, py::arg("hidden_layers") = 2,
          py::arg("batch_norm") = true, py::arg("bn_epsilon") = 1e-3,
          "Training-mode outputs for a features x batch matrix.");
    m.def("param_grad",
          [](const Vector& theta, const Matrix& batch, const Vector& weights, int hidden_dim, int hidden_layers,
             bool batch_norm, double bn_epsilon) {
              const NetworkShape s = shape_of(static_cast<int>(batch.rows()), hidden_dim, hidden_layers, batch_norm);
              const ParamVector p{s, theta};
              return net_param_grad(p, net_forward_train(p, batch, bn_epsilon).cache, weights);
          },
          py::arg("theta"), py::arg("batch"), py::arg("weights"), py::arg("hidden_dim") = 51,
          py::arg("hidden_layers") = 2, py::arg("batch_norm") = true, py::arg("bn_epsilon") = 1e-3,
          "Gradient of sum_j weights_j * output_j with respect to theta.");

    m.def("adam_step",
          [](const Vector& theta, const Vector& grad, double lr, const Vector& m1, const Vector& v2, long step) {
              AdamState st{m1, v2, step};
              auto [next_state, next] = adam_step(st, theta, grad, lr);
              return py::make_tuple(next, next_state.m, next_state.v, next_state.step);
          },
          py::arg("theta"), py::arg("grad"), py::arg("lr"), py::arg("m"), py::arg("v"), py::arg("step"));
    m.def("lr_at", [](const std::string& schedule, long m) { return LrSchedule::parse(schedule).at(m); },
          py::arg("schedule"), py::arg("m"));

    m.def("reference_heat_additive", &reference_heat_additive, py::arg("t"), py::arg("x"), py::arg("w_t"));
    m.def("reference_heat_mult", &reference_heat_mult, py::arg("t"), py::arg("x"), py::arg("w_t"));
    m.def("rel_l2", [](const std::vector<double>& e) { return rel_l2(e); }, py::arg("errors"));

    m.def("run_experiment",
          [](const std::string& text, const std::vector<std::pair<std::string, std::string>>& overrides) {
              const ExperimentConfig config = parse_config(text, overrides);
              ExperimentReport report;
              {
                  py::gil_scoped_release release;
                  report = run_experiment(config);
              }
              return report_dict(report);
          },
          py::arg("config") = "", py::arg("overrides") = std::vector<std::pair<std::string, std::string>>{},
          "Runs an experiment from `key = value` text plus overrides; returns rows, rel_l2 and the CSV.");

    m.def("selftest", [] {
        py::list out;
        for (const auto& r : run_selftest()) out.append(py::make_tuple(r.name, r.passed, r.detail));
        return out;
    });
}
