#include "conalign/error.hpp"
#include "conalign/geometry.hpp"
#include "conalign/io.hpp"
#include "support.hpp"

#include <doctest.h>

#include <numbers>

using namespace conalign;
using namespace conalign::geometry;

TEST_SUITE("geometry") {

TEST_CASE("grid endpoints and trapezoid weights") {
  const auto g = Grid1D::uniform(200);
  CHECK(g.points.front() == 0.0);
  CHECK(g.points.back() == 1.0);
  for (std::size_t i = 1; i < g.size(); ++i) CHECK(g.points[i] > g.points[i - 1]);
  double s = 0.0;
  for (double w : g.weights) s += w;
  CHECK(std::abs(s - 1.0) <= 1e-12);
  CHECK(g.weights.front() == doctest::Approx(0.5 * g.spacing()));
}

TEST_CASE("icosphere vertex counts") {
  CHECK(icosphere(0)->num_vertices() == 12);
  CHECK(icosphere(1)->num_vertices() == 42);
  CHECK(icosphere(4)->num_vertices() == 2562);
  for (int g = 0; g <= 6; ++g) {
    const auto ico = icosphere(g);
    CHECK(ico->num_vertices() == 10 * (std::size_t{1} << (2 * g)) + 2);
    CHECK(ico->num_faces() == 20 * (std::size_t{1} << (2 * g)));
  }
  CHECK_THROWS_AS(Icosphere::build(9), ResourceError);
}

TEST_CASE("icosphere invariants") {
  for (int g = 0; g <= 5; ++g) {
    const auto ico = icosphere(g);
    double total = 0.0;
    for (double w : ico->vertex_weights()) total += w;
    CHECK(std::abs(total - 4.0 * std::numbers::pi) <= 1e-9);
    for (const auto& v : ico->vertices()) CHECK(std::abs(v.norm() - 1.0) <= 1e-12);
    const auto& a = ico->face_areas();
    const double ratio = *std::max_element(a.begin(), a.end()) / *std::min_element(a.begin(), a.end());
    CHECK(ratio <= 2.0);
  }
}

TEST_CASE("levels are nested") {
  for (int g = 0; g < 6; ++g) {
    const auto coarse = icosphere(g);
    const auto fine = icosphere(g + 1);
    for (std::size_t i = 0; i < coarse->num_vertices(); ++i) CHECK((coarse->vertex(i) - fine->vertex(i)).norm() == 0.0);
  }
}

TEST_CASE("face adjacency is symmetric") {
  const auto ico = icosphere(3);
  const auto& adj = ico->face_adjacency();
  for (std::size_t f = 0; f < adj.size(); ++f) {
    for (int n : adj[f]) {
      const auto& back = adj[static_cast<std::size_t>(n)];
      CHECK(std::find(back.begin(), back.end(), static_cast<int>(f)) != back.end());
    }
  }
}

TEST_CASE("locate at a vertex, an edge midpoint and a centroid") {
  const auto ico = icosphere(3);
  const auto& faces = ico->faces();
  const auto& f = faces[17];
  const Vec3 a = ico->vertex(f[0]), b = ico->vertex(f[1]), c = ico->vertex(f[2]);

  const auto at_vertex = ico->locate(a);
  double top = *std::max_element(at_vertex.bary.begin(), at_vertex.bary.end());
  CHECK(top == doctest::Approx(1.0).epsilon(1e-12));

  const auto mid = ico->locate((a + b).normalized());
  std::array<double, 3> sorted = mid.bary;
  std::sort(sorted.begin(), sorted.end());
  CHECK(std::abs(sorted[0]) <= 1e-10);
  CHECK(sorted[1] == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(sorted[2] == doctest::Approx(0.5).epsilon(1e-10));

  // Oracle: gnomonic projection of the centroid direction onto the face plane.
  const auto centroid = ico->locate((a + b + c).normalized());
  CHECK(centroid.face == 17);
  for (double w : centroid.bary) CHECK(std::abs(w - 1.0 / 3.0) <= 1e-6);
}

TEST_CASE("locate is consistent with brute force and reconstructs the point") {
  std::mt19937_64 rng(11);
  const auto ico = icosphere(4);
  double worst = 0.0;
  for (int k = 0; k < 10000; ++k) {
    const Vec3 p = testing::random_unit(rng);
    const auto loc = ico->locate(p);
    double sum = 0.0;
    for (double w : loc.bary) {
      CHECK(w >= -1e-12);
      sum += w;
    }
    CHECK(std::abs(sum - 1.0) <= 1e-10);
    const auto& f = ico->faces()[static_cast<std::size_t>(loc.face)];
    Vec3 r = Vec3::Zero();
    for (int i = 0; i < 3; ++i) r += loc.bary[i] * ico->vertex(f[i]);
    worst = std::max(worst, (r.normalized() - p).norm());
    if (k % 50 == 0) {
      const auto brute = ico->locate_brute_force(p);
      for (int i = 0; i < 3; ++i) CHECK(std::abs(brute.bary[i] - loc.bary[i]) <= 1e-9 + (brute.face != loc.face ? 1.0 : 0.0));
    }
  }
  CHECK(worst <= 1e-3);
}

TEST_CASE("locate flags non-unit input") {
  const auto ico = icosphere(2);
  CHECK_FALSE(ico->locate(Vec3(0, 0, 1)).renormalized);
  CHECK(ico->locate(Vec3(0, 0, 2)).renormalized);
}

TEST_CASE("exp and log") {
  const Vec3 north(0, 0, 1);
  CHECK((sphere_exp(north, Vec3::Zero()) - north).norm() == 0.0);
  const Vec3 v(std::numbers::pi / 2, 0, 0);
  CHECK((sphere_exp(north, v) - Vec3(1, 0, 0)).norm() <= 1e-12);
  CHECK(sphere_log(north, north).norm() == 0.0);
  CHECK(sphere_log(north, Vec3(0, 1, 0)).norm() == doctest::Approx(std::numbers::pi / 2));
  CHECK_THROWS_AS(sphere_log(north, -north), DomainError);

  std::mt19937_64 rng(3);
  for (int k = 0; k < 1000; ++k) {
    const Vec3 x = testing::random_unit(rng);
    Vec3 t = testing::random_tangent(rng, x, 1.0);
    if (t.norm() > 3.0) t *= 3.0 / t.norm();
    CHECK((sphere_log(x, sphere_exp(x, t)) - t).norm() <= 1e-10);
    const Vec3 y = testing::random_unit(rng);
    CHECK((sphere_exp(x, sphere_log(x, y)) - y).norm() <= 1e-10);
    CHECK(sphere_log(x, y).norm() == doctest::Approx(geodesic_distance(x, y)).epsilon(1e-12));
  }
}

TEST_CASE("parallel transport") {
  std::mt19937_64 rng(5);
  const Vec3 x0 = testing::random_unit(rng);
  const Vec3 v0 = testing::random_tangent(rng, x0, 0.7);
  CHECK((parallel_transport(x0, x0, v0) - v0).norm() <= 1e-15);
  CHECK_THROWS_AS(parallel_transport(x0, -x0, v0), DomainError);
  for (int k = 0; k < 1000; ++k) {
    const Vec3 x = testing::random_unit(rng);
    const Vec3 y = testing::random_unit(rng);
    const Vec3 v = testing::random_tangent(rng, x, 1.3);
    const Vec3 w = parallel_transport(x, y, v);
    CHECK(std::abs(w.norm() - v.norm()) <= 1e-10);
    CHECK(std::abs(w.dot(y)) <= 1e-10);
    CHECK((parallel_transport(y, x, w) - v).norm() <= 1e-9);
  }
  // Transport of the direction of travel stays the direction of travel.
  const Vec3 e(1, 0, 0);
  const Vec3 n(0, 0, 1);
  const Vec3 along = parallel_transport(e, n, Vec3(0, 0, 1));
  CHECK((along - Vec3(-1, 0, 0)).norm() <= 1e-12);
}

TEST_CASE("spherical coordinates") {
  CHECK((spherical_to_cartesian(0.0, 1.0) - Vec3(0, 0, 1)).norm() <= 1e-15);
  CHECK((spherical_to_cartesian(std::numbers::pi / 2, 0.0) - Vec3(1, 0, 0)).norm() <= 1e-15);
  const auto pole = cartesian_to_spherical(Vec3(0, 0, -1));
  CHECK(pole.at_pole);
  CHECK(pole.phi == 0.0);
  std::mt19937_64 rng(9);
  for (int k = 0; k < 1000; ++k) {
    const Vec3 p = testing::random_unit(rng);
    const auto s = cartesian_to_spherical(p);
    CHECK(s.phi >= 0.0);
    CHECK(s.phi < 2 * std::numbers::pi);
    CHECK((spherical_to_cartesian(s.theta, s.phi) - p).norm() <= 1e-12);
  }
}

TEST_CASE("tangent frame is right handed") {
  std::mt19937_64 rng(2);
  for (int k = 0; k < 200; ++k) {
    const Vec3 x = k == 0 ? Vec3(0, 0, 1) : k == 1 ? Vec3(0, 0, -1) : testing::random_unit(rng);
    const auto f = tangent_frame(x);
    CHECK(std::abs(f[0].dot(x)) <= 1e-12);
    CHECK(std::abs(f[1].dot(x)) <= 1e-12);
    CHECK((f[0].cross(f[1]) - x).norm() <= 1e-12);
  }
}

TEST_CASE("spherical triangle area of an octant") {
  CHECK(spherical_triangle_area(Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1)) ==
        doctest::Approx(std::numbers::pi / 2).epsilon(1e-12));
}

TEST_CASE("icosphere serialization") {
  const auto dir = std::filesystem::temp_directory_path() / "conalign_geometry_test";
  io::write_icosphere(dir / "ico2.json", *icosphere(2));
  const auto header = io::read_json(dir / "ico2.json");
  CHECK(header["level"] == 2);
  CHECK(header["V"] == 162);
  CHECK(io::level_for_vertices(162) == 2);
  CHECK(io::level_for_vertices(163) == -1);
}

}
