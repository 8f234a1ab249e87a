#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "ncpd/baselines.hpp"
#include "ncpd/cli.hpp"
#include "ncpd/detection.hpp"
#include "ncpd/error.hpp"
#include "ncpd/evaluation.hpp"
#include "ncpd/ingest.hpp"
#include "ncpd/selfsup.hpp"
#include "ncpd/sgnn.hpp"
#include "ncpd/synthetic.hpp"

namespace py = pybind11;
using namespace ncpd;

namespace {

py::array_t<double> to_numpy(const Matrix& m) {
  py::array_t<double> a({m.rows(), m.cols()});
  std::copy(m.data().begin(), m.data().end(), a.mutable_data());
  return a;
}

Matrix from_numpy(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 2) throw DimensionError("expected a 2-d array");
  Matrix m(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)));
  std::copy(a.data(), a.data() + a.size(), m.data().begin());
  return m;
}

py::dict series_dict(const Series& s) {
  py::dict d;
  d["first"] = s.first;
  d["values"] = s.values;
  return d;
}

Series to_series(std::size_t first, std::vector<double> values) { return Series{first, std::move(values)}; }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Network change-point detection core";

  static py::exception<Error> base_error(m, "NcpdError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      PyErr_SetString(base_error.ptr(), (std::string(e.kind()) + ": " + e.what()).c_str());
    }
  });

  py::class_<DynamicNetwork>(m, "DynamicNetwork")
      .def(py::init([](const std::vector<py::array_t<double, py::array::c_style | py::array::forcecast>>& adj,
                       std::vector<std::size_t> change_points) {
             std::vector<Graph> g;
             for (const auto& a : adj) g.emplace_back(from_numpy(a));
             return DynamicNetwork(std::move(g), std::move(change_points));
           }),
           py::arg("adjacency"), py::arg("change_points") = std::vector<std::size_t>{})
      .def_property_readonly("length", &DynamicNetwork::length)
      .def_property_readonly("nodes", &DynamicNetwork::nodes)
      .def_property_readonly("change_points", &DynamicNetwork::change_points)
      .def("adjacency", [](const DynamicNetwork& n, std::size_t t) { return to_numpy(n.at(t).adjacency()); },
           py::arg("t"))
      .def("__len__", &DynamicNetwork::length);

  m.def("load_network", [](const std::string& path) { return load_network(path); }, py::arg("path"));
  m.def("save_network", [](const std::string& path, const DynamicNetwork& n) { save_network(path, n); },
        py::arg("path"), py::arg("network"));

  m.def(
      "generate_sequence",
      [](const std::string& scenario, double level, std::size_t n, std::size_t T, std::optional<std::size_t> tau,
         std::uint64_t seed) {
        ScenarioSpec spec;
        spec.kind = parse_scenario(scenario);
        spec.level = level;
        spec.n = n;
        Rng rng(seed);
        return generate_sequence(spec, T, tau, rng);
      },
      py::arg("scenario"), py::arg("level"), py::arg("n") = 400, py::arg("T") = 100, py::arg("tau") = py::none(),
      py::arg("seed") = 0);

  m.def(
      "baseline_statistic",
      [](const std::string& method, const DynamicNetwork& net, std::size_t L, std::size_t k_spectral) {
        BaselineConfig c;
        c.k_spectral = k_spectral;
        const auto s = baseline_statistic(parse_baseline(method), net, L, c);
        auto d = series_dict(s.statistic);
        d["orientation"] = to_string(s.orientation);
        d["warnings"] = s.warnings;
        return d;
      },
      py::arg("method"), py::arg("network"), py::arg("L"), py::arg("k_spectral") = 6);

  m.def(
      "similarity_statistic",
      [](const std::string& checkpoint, const DynamicNetwork& net, std::size_t L) {
        const auto model = load_checkpoint(checkpoint);
        const auto graphs = prepare_graphs(net.snapshots(), model.config.encoding);
        std::vector<Matrix> emb;
        for (const auto& g : graphs) emb.push_back(model.embed(g));
        const PairScore score = [&](std::size_t a, std::size_t b) {
          return model.score_embeddings(emb[a - 1], emb[b - 1]);
        };
        return series_dict(similarity_statistic(score, net.length(), L));
      },
      py::arg("checkpoint"), py::arg("network"), py::arg("L"));

  m.def(
      "detect_online",
      [](std::size_t first, std::vector<double> values, std::size_t L, double theta, bool distance) {
        return detect_online(to_series(first, std::move(values)), L, theta,
                             distance ? Orientation::DistanceRises : Orientation::SimilarityFalls);
      },
      py::arg("first"), py::arg("values"), py::arg("L"), py::arg("theta"), py::arg("distance") = false);

  m.def(
      "localize",
      [](std::size_t first, std::vector<double> values, bool distance) {
        return localize_single_offline(to_series(first, std::move(values)), Localisation::ArgMin,
                                       distance ? Orientation::DistanceRises : Orientation::SimilarityFalls);
      },
      py::arg("first"), py::arg("values"), py::arg("distance") = false);

  m.def(
      "calibrate_threshold",
      [](std::size_t first, std::vector<double> values, std::vector<std::size_t> cps, std::size_t L, bool distance,
         std::size_t tol) {
        const auto c = calibrate_threshold(to_series(first, std::move(values)), cps, L,
                                           distance ? Orientation::DistanceRises : Orientation::SimilarityFalls, tol);
        return py::make_tuple(c.theta, c.f1);
      },
      py::arg("first"), py::arg("values"), py::arg("change_points"), py::arg("L"), py::arg("distance") = false,
      py::arg("tol") = 5);

  m.def(
      "adjusted_f1",
      [](std::vector<std::size_t> predicted, std::vector<std::size_t> truth, std::size_t T, std::size_t tol) {
        const auto s = adjusted_f1(predicted, truth, T, tol);
        return py::make_tuple(s.precision, s.recall, s.f1);
      },
      py::arg("predicted"), py::arg("truth"), py::arg("T"), py::arg("tol") = 5);
  m.def("localisation_error", &localisation_error, py::arg("tau_hat"), py::arg("tau"));

  m.def(
      "windowed_correlations",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& panel, std::size_t window) {
        TimeSeriesPanel p{from_numpy(panel)};
        std::vector<py::array_t<double>> out;
        for (const auto& c : windowed_correlations(p, window)) out.push_back(to_numpy(c));
        return out;
      },
      py::arg("panel"), py::arg("window"));

  m.def(
      "selfsup_change_points",
      [](const std::vector<py::array_t<double, py::array::c_style | py::array::forcecast>>& corr, std::size_t k,
         std::size_t clusters, std::uint64_t seed) {
        std::vector<Matrix> mats;
        for (const auto& c : corr) mats.push_back(from_numpy(c));
        SelfsupConfig cfg;
        cfg.k_candidates = {k};
        cfg.clusters = clusters;
        cfg.seed = seed;
        return selfsup_pipeline(mats, cfg).change_points;
      },
      py::arg("correlations"), py::arg("k"), py::arg("clusters"), py::arg("seed") = 0);

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::vector<std::string> all{"ncpd"};
        all.insert(all.end(), args.begin(), args.end());
        std::vector<const char*> argv;
        for (const auto& a : all) argv.push_back(a.c_str());
        std::ostringstream out;
        std::ostringstream err;
        const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"));
}
