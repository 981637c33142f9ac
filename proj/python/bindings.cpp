#include "conalign/basis.hpp"
#include "conalign/density.hpp"
#include "conalign/error.hpp"
#include "conalign/geometry.hpp"
#include "conalign/parallel.hpp"
#include "conalign/population.hpp"
#include "conalign/registration.hpp"
#include "conalign/simulate.hpp"
#include "conalign/warp.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace conalign;

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

density::DensityField field(const std::string& domain, const density::Matrix& values) {
  density::DensityField f{density::Domain::parse(domain), values};
  f.validate(1e-2);
  return f;
}

RowMatrix points(const std::vector<geometry::Vec3>& v) {
  RowMatrix m(static_cast<Eigen::Index>(v.size()), 3);
  for (std::size_t i = 0; i < v.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = v[i].transpose();
  return m;
}

std::vector<geometry::Vec3> rows(const RowMatrix& m) {
  if (m.cols() != 3) throw ValidationError("expected an (n, 3) array of points");
  std::vector<geometry::Vec3> v(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) v[static_cast<std::size_t>(i)] = m.row(i).transpose();
  return v;
}

registration::RegistrationConfig reg_config(double step_size, double epsilon, int basis_size, int max_iters,
                                            bool multires) {
  registration::RegistrationConfig c;
  c.step_size = step_size;
  c.tolerance = epsilon;
  c.basis_size = basis_size;
  c.max_iterations = max_iters;
  c.multires = multires;
  return c;
}

py::dict trace_dict(const registration::Trace& t) {
  py::dict d;
  d["cost_trace"] = t.cost;
  d["gradient_norms"] = t.gradient_norm;
  d["steps"] = t.step;
  d["iterations"] = t.iterations;
  d["converged"] = t.converged;
  d["stop_reason"] = t.stop_reason;
  return d;
}

py::object warp_array(const population::AnyWarp& w) {
  if (const auto* w1 = std::get_if<warp::Warp1D>(&w)) return py::cast(Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(w1->values().data(), static_cast<Eigen::Index>(w1->size()))));
  if (const auto* ws = std::get_if<warp::SphereWarp>(&w)) return py::cast(points(ws->targets()));
  const auto& wd = std::get<warp::DualWarp>(w);
  auto t = wd.first.targets();
  t.insert(t.end(), wd.second.targets().begin(), wd.second.targets().end());
  return py::cast(points(t));
}

population::AnyWarp warp_from(const density::Domain& d, const py::object& obj) {
  switch (d.kind()) {
    case density::DomainKind::Interval: {
      auto v = obj.cast<Eigen::VectorXd>();
      return warp::Warp1D::from_values(std::vector<double>(v.data(), v.data() + v.size()));
    }
    case density::DomainKind::Sphere:
      return warp::SphereWarp(d.ico_ptr(), rows(obj.cast<RowMatrix>()));
    case density::DomainKind::DualSphere: {
      auto t = rows(obj.cast<RowMatrix>());
      const auto v = static_cast<std::ptrdiff_t>(d.hemisphere_size());
      if (static_cast<std::ptrdiff_t>(t.size()) != 2 * v) throw ValidationError("dual warp needs 2V target points");
      return warp::DualWarp{warp::SphereWarp(d.ico_ptr(), {t.begin(), t.begin() + v}),
                            warp::SphereWarp(d.ico_ptr(), {t.begin() + v, t.end()})};
    }
  }
  throw ValidationError("unknown domain");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Alignment of symmetric connectivity densities";

  // Translators run newest first, so the base class goes in first.
  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
  py::register_exception<DiffeomorphismError>(m, "DiffeomorphismError", PyExc_ValueError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);

  m.def("set_max_threads", &set_max_threads, py::arg("n"));

  m.def(
      "icosphere",
      [](int level) {
        const auto ico = geometry::icosphere(level);
        Eigen::Matrix<int, Eigen::Dynamic, 3, Eigen::RowMajor> f(static_cast<Eigen::Index>(ico->num_faces()), 3);
        for (std::size_t k = 0; k < ico->num_faces(); ++k) {
          for (int c = 0; c < 3; ++c) f(static_cast<Eigen::Index>(k), c) = ico->faces()[k][c];
        }
        return py::make_tuple(points(ico->vertices()), f);
      },
      py::arg("level"), "Vertices (V, 3) and faces (F, 3) of the subdivided icosahedron.");

  m.def(
      "domain_weights", [](const std::string& domain) { return Eigen::VectorXd(density::Domain::parse(domain).weights()); },
      py::arg("domain"), "Quadrature weight of every node.");

  m.def(
      "q_map", [](const std::string& domain, const density::Matrix& f) { return density::q_map(field(domain, f)).values; },
      py::arg("domain"), py::arg("f"));

  m.def(
      "riemannian_distance",
      [](const std::string& domain, const density::Matrix& f1, const density::Matrix& f2) {
        return density::riemannian_distance(density::q_map(field(domain, f1)), density::q_map(field(domain, f2)));
      },
      py::arg("domain"), py::arg("f1"), py::arg("f2"), "Arc length between the square-root maps of two densities.");

  m.def(
      "act",
      [](const std::string& domain, const density::Matrix& f, const py::object& w) {
        const auto fd = field(domain, f);
        return density::q_unmap(population::act(density::q_map(fd), warp_from(fd.domain, w))).values;
      },
      py::arg("domain"), py::arg("f"), py::arg("warp"),
      "Warped density f * gamma. The warp is gamma on the grid (interval) or the target of every vertex (spheres).");

  m.def(
      "register_pair",
      [](const std::string& domain, const density::Matrix& f1, const density::Matrix& f2, double step_size,
         double epsilon, int basis_size, int max_iters, bool multires) {
        const auto cfg = reg_config(step_size, epsilon, basis_size, max_iters, multires);
        const auto res = registration::register_pair(field(domain, f1), field(domain, f2), cfg);
        py::dict d = std::visit([](const auto& r) { return trace_dict(r.trace); }, res);
        d["warp"] = std::visit([](const auto& r) { return warp_array(population::AnyWarp(r.warp)); }, res);
        return d;
      },
      py::arg("domain"), py::arg("f1"), py::arg("f2"), py::arg("step_size") = 0.0, py::arg("epsilon") = 0.0,
      py::arg("basis_size") = 0, py::arg("max_iters") = 200, py::arg("multires") = false,
      "Aligns f2 to f1. Returns the warp and the optimization trace.");

  m.def(
      "template",
      [](const std::string& domain, const std::vector<density::Matrix>& fs, double step_size, double epsilon,
         int basis_size, int max_iters) {
        std::vector<density::DensityField> in;
        for (const auto& f : fs) in.push_back(field(domain, f));
        population::TemplateConfig cfg;
        cfg.reg = reg_config(step_size, epsilon, basis_size, max_iters, false);
        const auto res = population::full_pipeline(in, cfg);
        py::dict d;
        d["template"] = density::q_unmap(res.template_q).values;
        py::list warps, aligned, failed;
        for (std::size_t j = 0; j < in.size(); ++j) {
          warps.append(warp_array(res.warps[j]));
          aligned.append(res.aligned[j].values);
          failed.append(res.subjects[j].failed);
        }
        d["warps"] = warps;
        d["aligned"] = aligned;
        d["failed"] = failed;
        d["update_norms"] = res.update_norms;
        d["converged"] = res.karcher_converged;
        d["centering_residual"] = res.centering_residual;
        return d;
      },
      py::arg("domain"), py::arg("densities"), py::arg("step_size") = 0.0, py::arg("epsilon") = 0.0,
      py::arg("basis_size") = 0, py::arg("max_iters") = 200,
      "Karcher-mean template, centered, with the warps aligning every subject to it.");

  m.def(
      "simulate_warp_1d",
      [](int knots, std::size_t n, std::uint64_t seed) {
        const auto w = simulate::simulate_warp_1d(knots, n, seed);
        return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(w.values().data(), static_cast<Eigen::Index>(n)));
      },
      py::arg("knots"), py::arg("n"), py::arg("seed"));

  m.def(
      "simulate_population",
      [](const std::string& domain, int n, std::uint64_t seed, int knots, double amplitude) {
        simulate::PopulationConfig pc;
        pc.knots = knots;
        pc.sphere_amplitude = amplitude;
        const auto pop = simulate::simulate_population(density::Domain::parse(domain), n, pc, seed);
        py::list originals, observed, truth;
        for (std::size_t j = 0; j < pop.observed.size(); ++j) {
          originals.append(pop.originals[j].values);
          observed.append(pop.observed[j].values);
          truth.append(warp_array(pop.true_warps[j]));
        }
        py::dict d;
        d["originals"] = originals;
        d["observed"] = observed;
        d["true_warps"] = truth;
        return d;
      },
      py::arg("domain"), py::arg("n"), py::arg("seed"), py::arg("knots") = 3, py::arg("amplitude") = 0.15);

  m.def(
      "warp_distance",
      [](const std::string& domain, const py::object& a, const py::object& b) {
        const auto d = density::Domain::parse(domain);
        return population::warp_distance(warp_from(d, a), warp_from(d, b));
      },
      py::arg("domain"), py::arg("a"), py::arg("b"), "L2 distance on [0,1], RMS geodesic distance on spheres.");

  m.def(
      "invert_warp",
      [](const std::string& domain, const py::object& w) {
        return warp_array(population::invert(warp_from(density::Domain::parse(domain), w)));
      },
      py::arg("domain"), py::arg("warp"));

  m.def(
      "run_table1",
      [](int n, std::uint64_t seed, std::size_t grid_size) {
        simulate::Table1Config cfg;
        cfg.grid_size = grid_size;
        const auto r = simulate::run_table1_experiment(n, cfg, seed);
        py::dict d;
        d["a"] = r.a;
        d["b"] = r.b;
        d["mean_a"] = r.mean_a;
        d["sd_a"] = r.sd_a;
        d["mean_b"] = r.mean_b;
        d["sd_b"] = r.sd_b;
        return d;
      },
      py::arg("n"), py::arg("seed") = 1, py::arg("grid_size") = 200,
      "Simulation study: recovery error of the template warps (a) and size of the true warps (b).");

  m.def(
      "harmonic_divergences",
      [](int level, int max_degree) {
        const auto& basis = registration::harmonic_basis(level, max_degree);
        RowMatrix out(static_cast<Eigen::Index>(basis.size()), static_cast<Eigen::Index>(basis.front().divergence.size()));
        for (std::size_t k = 0; k < basis.size(); ++k) {
          for (std::size_t i = 0; i < basis[k].divergence.size(); ++i) {
            out(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) = basis[k].divergence[i];
          }
        }
        return out;
      },
      py::arg("level"), py::arg("max_degree"), "Analytic divergence of every tangent basis field at every vertex.");
}
