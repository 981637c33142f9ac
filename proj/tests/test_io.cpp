#include "conalign/error.hpp"
#include "conalign/io.hpp"
#include "conalign/simulate.hpp"
#include "support.hpp"

#include <doctest.h>

#include <fstream>

using namespace conalign;

namespace {

io::fs::path scratch(const std::string& name) {
  const auto p = io::fs::temp_directory_path() / "conalign_io_test" / name;
  io::fs::remove_all(p);
  io::fs::create_directories(p);
  return p;
}

double max_gap(const std::vector<geometry::Vec3>& a, const std::vector<geometry::Vec3>& b) {
  double e = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) e = std::max(e, (a[i] - b[i]).norm());
  return e;
}

}  // namespace

TEST_SUITE("io") {

TEST_CASE("density round trip on every domain kind") {
  const auto dir = scratch("density");
  const auto f1 = testing::random_interval_density(30, 1);
  io::write_density(dir / "a.csv", f1);
  const auto g1 = io::read_density(dir / "a.csv");
  CHECK(g1.domain == f1.domain);
  CHECK(g1.values == f1.values);
  const auto header = io::read_json(dir / "a.json");
  CHECK(header["domain"] == "interval:30");
  CHECK(header["symmetric"] == true);

  for (const auto& d : {density::Domain::sphere(1), density::Domain::dual_sphere(1)}) {
    const auto f = testing::random_sphere_density(d, 2);
    io::write_density(dir / "s.csv", f);
    const auto g = io::read_density(dir / "s.csv");
    CHECK(g.domain == d);
    CHECK(g.values == f.values);
  }
}

TEST_CASE("warp round trips") {
  const auto dir = scratch("warp");
  const auto w = simulate::simulate_warp_1d(3, 50, 3);
  io::write_warp(dir / "w.csv", w);
  CHECK(io::read_warp1d(dir / "w.csv").values() == w.values());

  const auto ico = geometry::icosphere(2);
  const auto s = simulate::random_sphere_warp(ico, 2, 0.1, 4);
  io::write_warp(dir / "s.csv", s);
  CHECK(max_gap(io::read_sphere_warp(dir / "s.csv").targets(), s.targets()) <= 1e-15);

  const warp::DualWarp dw{s, warp::SphereWarp::identity(ico)};
  io::write_warp(dir / "d.csv", dw);
  const auto back = io::read_dual_warp(dir / "d.csv");
  CHECK(max_gap(back.first.targets(), dw.first.targets()) <= 1e-15);
  CHECK(max_gap(back.second.targets(), dw.second.targets()) <= 1e-15);
}

TEST_CASE("malformed inputs") {
  const auto dir = scratch("bad");
  CHECK_THROWS_AS(io::read_density(dir / "missing.csv"), IoError);
  std::ofstream(dir / "x.csv") << "1,2\n3,4\n";
  std::ofstream(dir / "x.json") << R"({"domain": "interval", "n": 3, "symmetric": true})";
  CHECK_THROWS_AS(io::read_density(dir / "x.csv"), IoError);
  std::ofstream(dir / "y.csv") << "1,oops\n2,3\n";
  std::ofstream(dir / "y.json") << R"({"domain": "interval", "n": 2, "symmetric": true})";
  CHECK_THROWS_AS(io::read_density(dir / "y.csv"), IoError);
  std::ofstream(dir / "z.json") << "{not json";
  CHECK_THROWS_AS(io::read_json(dir / "z.json"), IoError);
}

TEST_CASE("csv and svg writers") {
  const auto dir = scratch("csv");
  io::write_csv(dir / "t.csv", {"i", "v"}, {{0, 1}, {0.1, 1.0 / 3.0}});
  std::ifstream in(dir / "t.csv");
  std::string line;
  std::getline(in, line);
  CHECK(line == "i,v");
  std::getline(in, line);
  std::getline(in, line);
  CHECK(line.find("0.33333333333333331") != std::string::npos);
  const auto svg = io::svg_line_plot({3, 2, 1.5, 1.4}, "cost", "H");
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find("polyline") != std::string::npos);
}

}
