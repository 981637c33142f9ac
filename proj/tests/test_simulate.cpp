#include "conalign/error.hpp"
#include "conalign/simulate.hpp"
#include "support.hpp"

#include <doctest.h>

#include <numbers>

using namespace conalign;
using namespace conalign::simulate;

namespace {

double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2 * std::numbers::pi); }
double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double kl_to_mixture(const EndpointParams& p, std::size_t n, std::uint64_t seed) {
  const auto grid = geometry::Grid1D::uniform(n);
  const auto d = density::Domain::interval(n);
  const auto est = estimate_density(simulate_endpoints(p, seed), grid, default_bandwidth(simulate_endpoints(p, seed)));
  density::Matrix truth(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      truth(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = mixture_density(p, grid.points[i], grid.points[j]);
    }
  }
  density::normalize_integral(d, truth);
  const density::Matrix integrand = truth.array() * (truth.array() / est.values.array()).log();
  return density::integral(d, integrand);
}

}  // namespace

TEST_SUITE("simulate") {

TEST_CASE("warp generator is reproducible and valid") {
  const auto a = simulate_warp_1d(3, 200, 77);
  const auto b = simulate_warp_1d(3, 200, 77);
  CHECK(a.values() == b.values());
  CHECK(a.derivative() == b.derivative());
  CHECK_THROWS_AS(simulate_warp_1d(2, 200, 1), ValidationError);
}

// Frozen statistic of the generator at K = 3 over 1000 draws.
TEST_CASE("mean distance of simulated warps from the identity") {
  const auto id = warp::Warp1D::identity(200);
  std::vector<double> e;
  for (std::uint64_t k = 0; k < 1000; ++k) e.push_back(l2_warp_error(simulate_warp_1d(3, 200, stream_seed(1, k)), id));
  const auto [mean, sd] = mean_sd(e);
  CHECK(mean == doctest::Approx(0.1216).epsilon(2e-3 / 0.1216));
  CHECK(sd == doctest::Approx(0.0696).epsilon(2e-3 / 0.0696));
}

TEST_CASE("more knots give rougher warps") {
  const auto id = warp::Warp1D::identity(200);
  double prev = 0.0;
  for (int k : {3, 6, 12}) {
    double s = 0.0;
    for (std::uint64_t j = 0; j < 200; ++j) s += l2_warp_error(simulate_warp_1d(k, 200, stream_seed(5, j)), id);
    s /= 200;
    if (k > 3) CHECK(s < prev);
    prev = s;
  }
}

TEST_CASE("endpoint totals and reproducibility") {
  const auto p = EndpointParams::table_s1();
  CHECK(p.total() == 20000);
  CHECK(p.components.size() == 6);
  CHECK(p.parcels == 200);
  const auto a = simulate_endpoints(p, 9), b = simulate_endpoints(p, 9);
  CHECK(a.size() == 20000);
  CHECK(a.pairs == b.pairs);
  for (const auto& pr : a.pairs) {
    CHECK(pr[0] >= 0.0);
    CHECK(pr[0] <= 1.0);
    CHECK(pr[1] >= 0.0);
    CHECK(pr[1] <= 1.0);
  }
}

TEST_CASE("truncated normal moments of the first component") {
  const auto p = EndpointParams::table_s1();
  const auto pts = simulate_endpoints(p, 10);
  const auto& c = p.components[0];
  const double s = std::sqrt(c.variance);
  auto moments = [&](double mu) {
    const double al = (0.0 - mu) / s, be = (1.0 - mu) / s;
    const double z = normal_cdf(be) - normal_cdf(al);
    const double m = mu + s * (normal_pdf(al) - normal_pdf(be)) / z;
    const double var = s * s * (1 + (al * normal_pdf(al) - be * normal_pdf(be)) / z -
                                std::pow((normal_pdf(al) - normal_pdf(be)) / z, 2));
    return std::array<double, 2>{m, std::sqrt(var)};
  };
  const auto m1 = moments(c.mu1), m2 = moments(c.mu2);
  double u = 0.0, v = 0.0;
  for (int k = 0; k < c.count; ++k) {
    u += pts.pairs[static_cast<std::size_t>(k)][0];
    v += pts.pairs[static_cast<std::size_t>(k)][1];
  }
  u /= c.count;
  v /= c.count;
  CHECK(std::abs(u - m1[0]) <= 3 * m1[1] / std::sqrt(c.count));
  CHECK(std::abs(v - m2[0]) <= 3 * m2[1] / std::sqrt(c.count));
}

TEST_CASE("kernel estimate") {
  const auto grid = geometry::Grid1D::uniform(101);
  EndpointSet one;
  one.pairs.push_back({0.5, 0.5});
  const auto f = estimate_density(one, grid, 0.05);
  CHECK_NOTHROW(f.validate());
  Eigen::Index i = 0, j = 0;
  f.values.maxCoeff(&i, &j);
  CHECK(i == 50);
  CHECK(j == 50);
  CHECK_THROWS_AS(estimate_density(one, grid, 0.0), ValidationError);

  const auto pts = simulate_endpoints(EndpointParams::table_s1(), 11);
  const auto g = estimate_density(pts, grid, default_bandwidth(pts));
  CHECK(g.values == g.values.transpose());
  CHECK(std::abs(density::integral(g.domain, g.values) - 1.0) <= 1e-6);
}

TEST_CASE("kernel estimate converges to the mixture") {
  auto p = EndpointParams::table_s1();
  std::vector<double> kl;
  for (int scale : {1, 10, 100}) {
    auto q = p;
    for (auto& c : q.components) c.count = c.count * scale / 20;
    kl.push_back(kl_to_mixture(q, 60, 12));
  }
  CHECK(kl[1] < kl[0]);
  CHECK(kl[2] < kl[1]);
}

TEST_CASE("warp distance") {
  const auto id = warp::Warp1D::identity(200);
  CHECK(l2_warp_error(id, id) == 0.0);
  // x^2 sampled with an exact derivative; its distance from x is sqrt(1/30).
  const auto& x = geometry::Grid1D::uniform(2001).points;
  std::vector<double> v, dv;
  for (double t : x) {
    v.push_back(t * t);
    dv.push_back(std::max(2 * t, 1e-9));
  }
  const warp::Warp1D sq(v, dv);
  CHECK(l2_warp_error(sq, warp::Warp1D::identity(2001)) == doctest::Approx(std::sqrt(1.0 / 30.0)).epsilon(1e-6));

  // Fine-grid oracle for a random pair.
  const auto a = simulate_warp_1d(3, 200, 1), b = simulate_warp_1d(3, 200, 2);
  double fine = 0.0;
  const int m = 200000;
  for (int k = 0; k <= m; ++k) {
    const double t = static_cast<double>(k) / m;
    const double w = (k == 0 || k == m) ? 0.5 : 1.0;
    fine += w * std::pow(a(t) - b(t), 2) / m;
  }
  CHECK(std::abs(l2_warp_error(a, b) - std::sqrt(fine)) <= 1e-4 * std::sqrt(fine));
}

TEST_CASE("population streams") {
  PopulationConfig pc;
  const auto d = density::Domain::interval(60);
  const auto p1 = simulate_population(d, 3, pc, 5);
  const auto p2 = simulate_population(d, 3, pc, 5);
  for (std::size_t j = 0; j < 3; ++j) {
    CHECK(p1.observed[j].values == p2.observed[j].values);
    CHECK_NOTHROW(p1.observed[j].validate(1e-6));
  }
  CHECK(p1.observed[0].values != p1.observed[1].values);

  const auto ds = density::Domain::dual_sphere(2);
  const auto ps = simulate_population(ds, 2, pc, 6);
  CHECK(std::holds_alternative<warp::DualWarp>(ps.true_warps[0]));
  CHECK_NOTHROW(ps.observed[1].validate(1e-6));
}

TEST_CASE("sphere warp amplitude") {
  const auto ico = geometry::icosphere(3);
  const auto w = random_sphere_warp(ico, 3, 0.15, 3);
  double s = 0.0;
  for (std::size_t v = 0; v < ico->num_vertices(); ++v) {
    s += ico->vertex_weights()[v] * std::pow(geometry::geodesic_distance(ico->vertex(v), w.targets()[v]), 2);
  }
  CHECK(std::sqrt(s / (4 * std::numbers::pi)) == doctest::Approx(0.15).epsilon(0.2));
}

TEST_CASE("small experiment is deterministic") {
  Table1Config cfg;
  cfg.grid_size = 60;
  cfg.tmpl.max_outer = 5;
  const auto a = run_table1_experiment(3, cfg, 8);
  const auto b = run_table1_experiment(3, cfg, 8);
  CHECK(a.a == b.a);
  CHECK(a.b == b.b);
  CHECK(a.a.size() == 3);
  CHECK(a.mean_a < a.mean_b);
  CHECK_THROWS_AS(run_table1_experiment(1, cfg, 8), ValidationError);
}

}
