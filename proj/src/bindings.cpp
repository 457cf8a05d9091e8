#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>
#include <stdexcept>

#include <json.hpp>

#include "ripsample/harness.hpp"
#include "ripsample/maurey.hpp"
#include "ripsample/recovery.hpp"
#include "ripsample/rip.hpp"
#include "ripsample/rng.hpp"
#include "ripsample/sampling.hpp"
#include "ripsample/unitary.hpp"

namespace py = pybind11;
using namespace ripsample;

namespace {

using ComplexArray =
    py::array_t<std::complex<double>, py::array::c_style | py::array::forcecast>;

ComplexVector to_vector(const ComplexArray& arr) {
  if (arr.ndim() != 1) throw std::invalid_argument("expected a 1-D complex array");
  ComplexVector v(static_cast<std::size_t>(arr.shape(0)));
  std::memcpy(v.data(), arr.data(), v.size() * sizeof(Complex));
  return v;
}

py::array_t<std::complex<double>> to_array(const ComplexVector& v) {
  // Pass an explicit shape vector: the scalar-count constructor produced a
  // zero-stride (broadcast) array with this pybind11 release.
  py::array_t<std::complex<double>> out(
      std::vector<py::ssize_t>{static_cast<py::ssize_t>(v.size())});
  std::memcpy(out.mutable_data(), v.data(), v.size() * sizeof(Complex));
  return out;
}

py::dict estimate_to_dict(const RipEstimate& e) {
  py::dict d;
  d["k"] = e.k;
  d["delta"] = e.value;
  d["mode"] = to_string(e.mode);
  d["supports_examined"] = e.supports_examined;
  d["witness"] = e.witness;
  d["seed"] = e.seed;
  d["elapsed_seconds"] = e.elapsed_seconds;
  return d;
}

py::dict recovery_to_dict(const RecoveryResult& r) {
  py::dict d;
  d["estimate"] = to_array(r.estimate);
  d["iterations"] = r.iterations;
  d["residual_norm"] = r.residual_norm;
  d["support"] = r.support;
  d["converged"] = r.converged;
  d["degenerate"] = r.degenerate;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Subsampled-unitary measurement matrices: construction, RIP audits, "
            "sampling nets, and sparse recovery";
  m.attr("rng_algorithm") = std::string(kRngAlgorithm);

  py::class_<ImplicitUnitary>(m, "Unitary")
      .def_static("dft", &ImplicitUnitary::dft, py::arg("n"))
      .def_static("hadamard", &ImplicitUnitary::hadamard, py::arg("n"))
      .def_static(
          "dense",
          [](const ComplexArray& entries) {
            if (entries.ndim() != 2) {
              throw std::invalid_argument("dense expects a 2-D complex array");
            }
            const auto rows = static_cast<std::size_t>(entries.shape(0));
            const auto cols = static_cast<std::size_t>(entries.shape(1));
            std::vector<ComplexVector> data(rows, ComplexVector(cols));
            auto view = entries.unchecked<2>();
            for (std::size_t r = 0; r < rows; ++r) {
              for (std::size_t c = 0; c < cols; ++c) {
                data[r][c] = view(static_cast<py::ssize_t>(r), static_cast<py::ssize_t>(c));
              }
            }
            return ImplicitUnitary::dense(std::move(data));
          },
          py::arg("entries"))
      .def_property_readonly("dim", &ImplicitUnitary::dim)
      .def_property_readonly("kind",
                             [](const ImplicitUnitary& u) { return to_string(u.kind()); })
      .def_property_readonly("flatness", &ImplicitUnitary::flatness)
      .def("entry", &ImplicitUnitary::entry, py::arg("row"), py::arg("col"))
      .def("column",
           [](const ImplicitUnitary& u, std::size_t col) { return to_array(u.column(col)); },
           py::arg("col"))
      .def("apply",
           [](const ImplicitUnitary& u, const ComplexArray& x) {
             return to_array(u.apply(to_vector(x)));
           },
           py::arg("x"))
      .def("apply_adjoint",
           [](const ImplicitUnitary& u, const ComplexArray& y) {
             return to_array(u.apply_adjoint(to_vector(y)));
           },
           py::arg("y"));

  py::class_<RowSample>(m, "RowSample")
      .def_readonly("ambient_dim", &RowSample::ambient_dim)
      .def_readonly("indices", &RowSample::indices)
      .def_readonly("seed", &RowSample::seed)
      .def_property_readonly("q", &RowSample::q)
      .def_property_readonly("scale", &RowSample::scale);

  m.def("sample_rows", &sample_rows, py::arg("n"), py::arg("q"), py::arg("seed"));
  m.def("full_sample", &full_sample, py::arg("n"));
  m.def("make_row_sample", &make_row_sample, py::arg("n"), py::arg("indices"),
        py::arg("seed") = 0);

  py::class_<PartialOperator>(m, "PartialOperator")
      .def(py::init<ImplicitUnitary, RowSample>(), py::arg("unitary"), py::arg("sample"))
      .def_property_readonly("ambient_dim", &PartialOperator::ambient_dim)
      .def_property_readonly("rows", &PartialOperator::rows)
      .def_property_readonly("scale", &PartialOperator::scale)
      .def_property_readonly("sample", &PartialOperator::sample)
      .def("entry", &PartialOperator::entry, py::arg("row"), py::arg("col"))
      .def("column",
           [](const PartialOperator& a, std::size_t col) { return to_array(a.column(col)); },
           py::arg("col"))
      .def("apply",
           [](const PartialOperator& a, const ComplexArray& x) {
             return to_array(a.apply(to_vector(x)));
           },
           py::arg("x"))
      .def("apply_adjoint",
           [](const PartialOperator& a, const ComplexArray& y) {
             return to_array(a.apply_adjoint(to_vector(y)));
           },
           py::arg("y"));

  m.def(
      "rip_constant_exact",
      [](const PartialOperator& a, std::size_t k, std::uint64_t enumeration_budget,
         int threads) {
        RipOptions options;
        options.enumeration_budget = enumeration_budget;
        options.threads = threads;
        return estimate_to_dict(rip_constant_exact(a, k, options));
      },
      py::arg("a"), py::arg("k"), py::arg("enumeration_budget") = 1'000'000,
      py::arg("threads") = 1);
  m.def(
      "rip_lower_bound",
      [](const PartialOperator& a, std::size_t k, std::size_t trials, std::uint64_t seed) {
        return estimate_to_dict(rip_lower_bound(a, k, trials, seed));
      },
      py::arg("a"), py::arg("k"), py::arg("trials"), py::arg("seed"));
  m.def(
      "check_rip_for_vector",
      [](const PartialOperator& a, const ComplexArray& x, double eps) {
        return check_rip_for_vector(a, to_vector(x), eps);
      },
      py::arg("a"), py::arg("x"), py::arg("eps"));

  py::class_<NetParams>(m, "NetParams")
      .def_static("capped", &NetParams::capped, py::arg("eps"), py::arg("eta"),
                  py::arg("sample_constant") = 8.0)
      .def_static("telescoped", &NetParams::telescoped, py::arg("eps"), py::arg("eta"),
                  py::arg("sample_constant") = 8.0)
      .def_property_readonly("variant",
                             [](const NetParams& p) { return to_string(p.variant); })
      .def_readonly("eps", &NetParams::eps)
      .def_readonly("eta", &NetParams::eta)
      .def_readonly("t", &NetParams::t)
      .def_readonly("r", &NetParams::r)
      .def_readonly("gamma", &NetParams::gamma)
      .def_readonly("sample_constant", &NetParams::sample_constant)
      .def("sample_count", &NetParams::sample_count, py::arg("level"))
      .def_property_readonly("max_level", &NetParams::max_level);

  m.def(
      "phase_decompose",
      [](const ComplexArray& x) {
        const PhaseDistribution d = phase_decompose(to_vector(x));
        py::array_t<double> out({static_cast<py::ssize_t>(d.dim()), py::ssize_t(4)});
        auto view = out.mutable_unchecked<2>();
        for (std::size_t l = 0; l < d.dim(); ++l) {
          for (int s = 0; s < 4; ++s) view(static_cast<py::ssize_t>(l), s) = d.weights[l][s];
        }
        return out;
      },
      py::arg("x"));
  m.def(
      "sample_g",
      [](const ImplicitUnitary& u, const ComplexArray& x, int level, const NetParams& params,
         std::uint64_t seed) {
        Rng rng(seed);
        return to_array(sample_g(u, phase_decompose(to_vector(x)), level, params, rng));
      },
      py::arg("unitary"), py::arg("x"), py::arg("level"), py::arg("params"), py::arg("seed"));
  m.def(
      "find_good_g",
      [](const ImplicitUnitary& u, const ComplexArray& x, const RowSample& q, int level,
         const NetParams& params, std::uint64_t seed, int max_attempts) {
        Rng rng(seed);
        const GoodGResult res = find_good_g(u, to_vector(x), q, level, params, rng,
                                            max_attempts);
        py::dict d;
        d["g"] = to_array(res.g);
        d["attempts"] = res.attempts;
        d["ok"] = res.ok;
        d["violation_fraction_ambient"] = res.violation_fraction_ambient;
        d["violation_fraction_sample"] = res.violation_fraction_sample;
        return d;
      },
      py::arg("unitary"), py::arg("x"), py::arg("sample"), py::arg("level"),
      py::arg("params"), py::arg("seed"), py::arg("max_attempts") = 64);

  m.def(
      "sampled_mean",
      [](const PartialOperator& a, const ComplexArray& x) {
        return sampled_mean(a, to_vector(x));
      },
      py::arg("a"), py::arg("x"));
  m.def(
      "full_mean",
      [](const ImplicitUnitary& u, const ComplexArray& x) {
        return full_mean(u, to_vector(x));
      },
      py::arg("unitary"), py::arg("x"));

  m.def(
      "iht",
      [](const PartialOperator& a, const ComplexArray& y, std::size_t k,
         std::size_t max_iters, double tol) {
        return recovery_to_dict(iht(a, to_vector(y), k, max_iters, tol));
      },
      py::arg("a"), py::arg("y"), py::arg("k"), py::arg("max_iters") = 200,
      py::arg("tol") = 1e-12);
  m.def(
      "omp",
      [](const PartialOperator& a, const ComplexArray& y, std::size_t k, double tol) {
        return recovery_to_dict(omp(a, to_vector(y), k, tol));
      },
      py::arg("a"), py::arg("y"), py::arg("k"), py::arg("tol") = 1e-12);

  m.def(
      "run_experiment",
      [](const std::string& config_json) {
        nlohmann::json doc;
        try {
          doc = nlohmann::json::parse(config_json);
        } catch (const nlohmann::json::exception& e) {
          throw std::invalid_argument(std::string("config is not valid JSON: ") + e.what());
        }
        return run_experiment(parse_config(doc));
      },
      py::arg("config_json"),
      "Run one experiment from a JSON config string; returns the output document "
      "(CSV or JSON) as a string.");
  m.def(
      "config_hash",
      [](const std::string& config_json) {
        return config_hash(parse_config(nlohmann::json::parse(config_json)));
      },
      py::arg("config_json"));

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
}
