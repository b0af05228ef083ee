#include "gdrift/config.hpp"
#include "gdrift/drift_field.hpp"
#include "gdrift/feature_bank.hpp"
#include "gdrift/mgda.hpp"
#include "gdrift/phantom.hpp"
#include "gdrift/spectrum.hpp"
#include "gdrift/trainer.hpp"
#include "gdrift/transport.hpp"

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <algorithm>

namespace py = pybind11;
using namespace gdrift;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor3 to_tensor3(const Array& a) {
  if (a.ndim() != 3) throw std::invalid_argument("expected a 3-d array (N, M, C)");
  Tensor3 t(a.shape(0), a.shape(1), a.shape(2));
  std::copy(a.data(), a.data() + a.size(), t.data().begin());
  return t;
}

Array from_tensor3(const Tensor3& t) {
  Array out({t.n(), t.m(), t.c()});
  std::copy(t.data().begin(), t.data().end(), out.mutable_data());
  return out;
}

Volume to_volume(const Array& a) {
  if (a.ndim() != 3) throw std::invalid_argument("expected a 3-d array (D, H, W)");
  return Volume({static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)),
                 static_cast<std::size_t>(a.shape(2))},
                std::vector<double>(a.data(), a.data() + a.size()));
}

Array from_volume(const Volume& v) {
  const Dims3 d = v.dims();
  Array out({d.d, d.h, d.w});
  std::copy(v.data().begin(), v.data().end(), out.mutable_data());
  return out;
}

Family parse_family(const std::string& name) {
  const auto f = family_from_name(name);
  if (!f) throw std::invalid_argument("unknown family \"" + name + "\"");
  return *f;
}

}  // namespace

PYBIND11_MODULE(_gdrift, m) {
  m.doc() = "Drift fields, simplex-coordinated gradients, particle transport and descriptor features";

  py::class_<DriftConfig>(m, "DriftConfig")
      .def(py::init<>())
      .def_readwrite("temperatures", &DriftConfig::temperatures)
      .def_readwrite("mu_mask", &DriftConfig::mu_mask)
      .def_readwrite("eps", &DriftConfig::eps)
      .def_readwrite("include_mask_in_scale", &DriftConfig::include_mask_in_scale)
      .def_readwrite("normalize_temperatures", &DriftConfig::normalize_temperatures)
      .def_readwrite("lambda_drift", &DriftConfig::lambda_drift);

  m.def("transport_drift_defaults", &transport_drift_defaults);

  m.def("pairwise_distances", &pairwise_distances, py::arg("a"), py::arg("b"));

  m.def(
      "drift_field",
      [](const Array& h, const Array& pos, const Array& neg, const DriftConfig& cfg, const std::string& family) {
        FeatureTriplet t;
        t.family = parse_family(family);
        t.h = to_tensor3(h);
        t.u_pos = to_tensor3(pos);
        t.u_neg = to_tensor3(neg);
        const DriftField f = compute_drift_field(t, cfg);
        py::dict out;
        out["v"] = from_tensor3(f.v);
        out["scale"] = f.scale;
        out["temperature_norms"] = f.temperature_norms;
        return out;
      },
      py::arg("h"), py::arg("pos"), py::arg("neg"), py::arg("config") = DriftConfig{}, py::arg("family") = "local",
      "Drift field V (N, M, C) of one feature triplet, with its global scale.");

  m.def(
      "drift_loss",
      [](const Array& h_norm, const Array& v) {
        DriftField f;
        f.v = to_tensor3(v);
        f.scale = 1.0;
        const DriftLossResult r = drift_loss(to_tensor3(h_norm), f);
        return py::make_tuple(r.loss, from_tensor3(r.grad_h));
      },
      py::arg("h_norm"), py::arg("v"), "(loss, gradient) of the stop-gradient regression onto h + V.");

  m.def("gram_matrix", [](const std::vector<Vector>& g) { return gram_matrix(g); }, py::arg("grads"));
  m.def(
      "solve_simplex_qp",
      [](const Matrix& h, int max_iters, double tol) {
        QpOptions o;
        o.max_iters = max_iters;
        o.tol = tol;
        return Vector(solve_simplex_qp(h, o).alpha);
      },
      py::arg("h"), py::arg("max_iters") = 500, py::arg("tol") = 1e-10);
  m.def(
      "two_objective_closed_form", [](const Vector& g1, const Vector& g2) { return Vector(two_objective_closed_form(g1, g2).alpha); },
      py::arg("g1"), py::arg("g2"));
  m.def(
      "coordinate",
      [](const Vector& g_fid, const Vector& g_drift, double lambda) {
        Coordination c = coordinate(g_fid, g_drift, lambda);
        return py::make_tuple(Vector(c.weights.alpha), Vector(c.combined));
      },
      py::arg("grad_fid"), py::arg("grad_drift"), py::arg("lam"), "(alpha, combined gradient)");

  m.def("energy_distance", &energy_distance, py::arg("x"), py::arg("y"));
  m.def(
      "run_transport",
      [](const Matrix& particles, const Matrix& targets, int steps, double eta, std::uint64_t seed,
         const DriftConfig& cfg) {
        ParticleCloud c;
        c.particles = particles;
        c.target_samples = targets;
        c.eta = eta;
        c.seed = seed;
        TransportReport r = run_transport(c, steps, cfg);
        py::dict out;
        out["energy_distance"] = r.energy_distance;
        out["mean_drift_norm"] = r.mean_drift_norm;
        out["particles"] = r.final_particles;
        return out;
      },
      py::arg("particles"), py::arg("targets"), py::arg("steps"), py::arg("eta") = 0.5, py::arg("seed") = 0,
      py::arg("config") = transport_drift_defaults());

  m.def(
      "radial_power_spectrum",
      [](const Array& residual, std::size_t bands) { return radial_power_spectrum(to_volume(residual), bands); },
      py::arg("residual"), py::arg("bands") = 8);

  m.def(
      "phantom_pair",
      [](std::uint64_t seed, std::size_t d, std::size_t h, std::size_t w) {
        const PhantomPair p = generate_phantom_pair(seed, {d, h, w});
        return py::make_tuple(from_volume(p.source), from_volume(p.target));
      },
      py::arg("seed"), py::arg("d") = 32, py::arg("h") = 32, py::arg("w") = 32, "(source, target) volumes");

  m.def(
      "extract_features",
      [](const std::vector<Array>& patches) {
        const FeatureBank bank(FeatureBankConfig{});
        std::vector<Volume> v;
        for (const Array& a : patches) v.push_back(to_volume(a));
        const Extraction e = bank.extract(v);
        py::dict out;
        for (const FamilyFeatures& f : e.families) out[py::str(std::string(family_name(f.family)))] = from_tensor3(f.features);
        return out;
      },
      py::arg("patches"), "Default descriptor families of a list of equally shaped patches.");

  m.def(
      "resolve_config",
      [](const std::string& document, const std::vector<std::string>& overrides) {
        return config_to_string(resolve_config(document, overrides));
      },
      py::arg("document") = "", py::arg("overrides") = std::vector<std::string>{},
      "Fully resolved JSON config text.");
}
