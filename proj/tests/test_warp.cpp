#include "conalign/basis.hpp"
#include "conalign/error.hpp"
#include "conalign/registration.hpp"
#include "conalign/simulate.hpp"
#include "conalign/warp.hpp"
#include "support.hpp"

#include <doctest.h>

#include <numbers>

using namespace conalign;
using namespace conalign::warp;

namespace {

double max_node_error(const Warp1D& a, const Warp1D& b) {
  double e = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) e = std::max(e, std::abs(a.values()[i] - b.values()[i]));
  return e;
}

double max_target_error(const SphereWarp& a, const SphereWarp& b) {
  double e = 0.0;
  for (std::size_t i = 0; i < a.targets().size(); ++i) e = std::max(e, (a.targets()[i] - b.targets()[i]).norm());
  return e;
}

}  // namespace

TEST_SUITE("warp") {

TEST_CASE("1D warp invariants") {
  CHECK_NOTHROW(Warp1D::identity(10));
  CHECK_THROWS_AS(Warp1D::from_values({0.0, 0.6, 0.5, 1.0}), DiffeomorphismError);
  CHECK_THROWS_AS(Warp1D::from_values({0.1, 0.5, 1.0}), DiffeomorphismError);
  CHECK_THROWS_AS(Warp1D({0.0, 0.5, 1.0}, {1.0, 0.0, 1.0}), DiffeomorphismError);
  for (std::uint64_t s = 0; s < 1000; ++s) CHECK_NOTHROW(simulate::simulate_warp_1d(3, 200, s));
}

TEST_CASE("1D incremental warp") {
  const auto grid = geometry::Grid1D::uniform(200);
  const auto b = basis::sine_basis(grid, 4);
  const auto zero = incremental_warp(std::vector<double>(200, 0.0), std::vector<double>(200, 0.0), 0.3);
  CHECK(max_node_error(zero, Warp1D::identity(200)) == 0.0);
  const double sigma = 0.05;
  const auto w = incremental_warp(b[2].values, b[2].derivative, sigma);
  for (std::size_t i = 0; i < 200; ++i) {
    CHECK(w.values()[i] == doctest::Approx(grid.points[i] + sigma * b[2].values[i]).epsilon(1e-15));
    CHECK(w.derivative()[i] == doctest::Approx(1.0 + sigma * b[2].derivative[i]).epsilon(1e-15));
  }
  CHECK_THROWS_AS(incremental_warp(b[2].values, b[2].derivative, 1.0), DiffeomorphismError);
}

TEST_CASE("1D composition and inversion") {
  const auto id = Warp1D::identity(200);
  const auto g1 = simulate::simulate_warp_1d(3, 200, 1);
  const auto g2 = simulate::simulate_warp_1d(3, 200, 2);
  const auto g3 = simulate::simulate_warp_1d(3, 200, 3);
  CHECK(max_node_error(compose(g1, id), g1) <= 1e-10);
  CHECK(max_node_error(compose(id, g1), g1) <= 1e-10);
  CHECK(max_node_error(compose(compose(g1, g2), g3), compose(g1, compose(g2, g3))) <= 1e-6);
  CHECK(max_node_error(invert(id), id) <= 1e-14);
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto g = simulate::simulate_warp_1d(3, 200, 100 + s);
    CHECK(max_node_error(compose(g, invert(g)), id) <= 1e-3);
    CHECK(max_node_error(invert(invert(g)), g) <= 1e-3);
  }

  // Analytic inverse of x(1+x)/2.
  std::vector<double> v(200);
  const auto& x = geometry::Grid1D::uniform(200).points;
  for (std::size_t i = 0; i < 200; ++i) v[i] = 0.5 * x[i] * (1.0 + x[i]);
  const auto inv = invert(Warp1D::from_values(v));
  double worst = 0.0;
  for (std::size_t i = 0; i < 200; ++i) worst = std::max(worst, std::abs(inv.values()[i] - 0.5 * (std::sqrt(1 + 8 * x[i]) - 1)));
  CHECK(worst <= 1e-6);
}

TEST_CASE("1D warp evaluation between nodes") {
  const auto g = simulate::simulate_warp_1d(3, 200, 9);
  CHECK(g(0.0) == 0.0);
  CHECK(g(1.0) == 1.0);
  double prev = 0.0;
  for (int s = 1; s <= 997; ++s) {
    const double v = g(s / 997.0);
    CHECK(v > prev);
    prev = v;
  }
}

TEST_CASE("sphere incremental warp and Jacobian linearization") {
  const auto ico = geometry::icosphere(4);
  const auto zero = incremental_warp(ico, std::vector<Vec3>(ico->num_vertices(), Vec3::Zero()), 1.0);
  CHECK(max_target_error(zero, SphereWarp::identity(ico)) == 0.0);

  // Oracle: d/dsigma |J| at sigma = 0 is the discrete divergence of the field,
  // computed independently by the linearizer; the analytic divergence bounds
  // the discretization gap.
  const auto& lin = registration::sphere_linearizer(4, 2);
  const double sigma = 1e-3;
  for (std::size_t k : {0u, 3u, 9u}) {
    const auto& b = lin.basis()[k];
    const auto jac = incremental_warp(ico, b.field, sigma).jacobians();
    const auto& div = lin.mesh_divergence(k);
    double worst = 0.0, analytic = 0.0;
    for (std::size_t v = 0; v < jac.size(); ++v) {
      worst = std::max(worst, std::abs(jac[v] - 1.0 - sigma * div[static_cast<Eigen::Index>(v)]));
      analytic = std::max(analytic, std::abs(jac[v] - 1.0 - sigma * b.divergence[v]));
    }
    CHECK(worst <= 1e-4);
    CHECK(analytic <= 1e-3);
  }
}

TEST_CASE("sphere composition and inversion") {
  const auto ico = geometry::icosphere(3);
  const auto id = SphereWarp::identity(ico);
  const auto w = simulate::random_sphere_warp(ico, 3, 0.15, 5);
  CHECK(max_target_error(compose(w, id), w) <= 1e-10);
  CHECK(max_target_error(compose(id, w), w) <= 1e-10);
  CHECK(max_target_error(compose(w, invert(w)), id) <= 1e-10);
  CHECK(max_target_error(compose(invert(w), w), id) <= 2e-2);

  const Eigen::Matrix3d r = Eigen::AngleAxisd(0.3, Vec3(1, 0, 0)).toRotationMatrix();
  const auto rot = SphereWarp::rotation(ico, r);
  CHECK(max_target_error(invert(rot), SphereWarp::rotation(ico, r.transpose())) <= 1e-2);
}

TEST_CASE("sphere warp interpolation modes agree at vertices") {
  const auto ico = geometry::icosphere(3);
  const auto w = simulate::random_sphere_warp(ico, 3, 0.15, 6);
  const SphereWarp t(ico, w.targets(), SphereInterpolation::TransportedDisplacement);
  for (std::size_t v = 0; v < ico->num_vertices(); v += 7) CHECK((t(ico->vertex(v)) - w(ico->vertex(v))).norm() <= 1e-12);
  std::mt19937_64 rng(2);
  double gap = 0.0;
  for (int k = 0; k < 100; ++k) {
    const Vec3 p = testing::random_unit(rng);
    gap = std::max(gap, (t(p) - w(p)).norm());
  }
  CHECK(gap <= 1e-2);
  const auto jt = t.jacobians();
  CHECK(*std::min_element(jt.begin(), jt.end()) > 0.0);
}

TEST_CASE("area is preserved on average") {
  const auto ico = geometry::icosphere(4);
  const auto w = simulate::random_sphere_warp(ico, 3, 0.15, 8);
  const auto jac = w.jacobians();
  double mean = 0.0;
  for (std::size_t v = 0; v < jac.size(); ++v) mean += ico->vertex_weights()[v] * jac[v];
  CHECK(std::abs(mean / (4 * std::numbers::pi) - 1.0) <= 5e-2);
}

}
