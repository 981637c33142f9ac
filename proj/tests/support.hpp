#pragma once

#include "conalign/density.hpp"
#include "conalign/geometry.hpp"
#include "conalign/simulate.hpp"
#include "conalign/warp.hpp"

#include <cmath>
#include <random>

namespace testing {

using conalign::geometry::Vec3;

inline Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  Vec3 v(n(rng), n(rng), n(rng));
  return v.normalized();
}

inline Vec3 random_tangent(std::mt19937_64& rng, const Vec3& x, double scale) {
  std::normal_distribution<double> n;
  Vec3 v(n(rng), n(rng), n(rng));
  return scale * (v - x * x.dot(v));
}

/// Smooth positive symmetric density on the interval grid: a random mixture of
/// symmetrized Gaussian bumps, unit integral.
inline conalign::density::DensityField random_interval_density(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.15, 0.85);
  std::uniform_real_distribution<double> s(0.08, 0.2);
  const auto d = conalign::density::Domain::interval(n);
  const auto& x = d.grid().points;
  conalign::density::Matrix m = conalign::density::Matrix::Constant(n, n, 0.05);
  for (int c = 0; c < 3; ++c) {
    const double a = u(rng), b = u(rng), w = s(rng);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        const double e1 = std::exp(-(std::pow(x[i] - a, 2) + std::pow(x[j] - b, 2)) / (2 * w * w));
        const double e2 = std::exp(-(std::pow(x[j] - a, 2) + std::pow(x[i] - b, 2)) / (2 * w * w));
        m(i, j) += 0.5 * (e1 + e2);
      }
    }
  }
  conalign::density::normalize_integral(d, m);
  return {d, m};
}

inline conalign::density::DensityField random_sphere_density(const conalign::density::Domain& d, std::uint64_t seed,
                                                            int components = 0) {
  const bool dual = d.kind() == conalign::density::DomainKind::DualSphere;
  if (components == 0) components = dual ? 6 : 3;
  auto c = conalign::simulate::random_sphere_components(components, dual, seed);
  if (dual) {
    // Every hemisphere block carries mass.
    c[0].hemisphere1 = 0, c[0].hemisphere2 = 0;
    c[1].hemisphere1 = 0, c[1].hemisphere2 = 1;
    c[2].hemisphere1 = 1, c[2].hemisphere2 = 1;
  }
  return conalign::simulate::vmf_mixture(d, c);
}

}  // namespace testing
