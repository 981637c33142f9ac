#pragma once

#include "conalign/density.hpp"
#include "conalign/population.hpp"
#include "conalign/warp.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

namespace conalign::simulate {

using density::DensityField;

/// One bivariate normal endpoint component, truncated to [0,1]^2.
struct EndpointComponent {
  int count = 0;
  double mu1 = 0.5;
  double mu2 = 0.5;
  double variance = 0.1;
};

struct EndpointParams {
  std::vector<EndpointComponent> components;
  int parcels = 200;

  /// Six components, 20 000 pairs in total.
  static EndpointParams table_s1();
  int total() const;
  void validate() const;
};

struct EndpointSet {
  std::vector<std::array<double, 2>> pairs;

  std::size_t size() const { return pairs.size(); }
};

/// Independent stream seed derived from a master seed.
std::uint64_t stream_seed(std::uint64_t master, std::uint64_t stream);

/// K uniform slopes, cumulative sum normalized to end at 1, a leading 0, and
/// a monotone cubic through the K+1 knots evaluated on the n-point grid.
warp::Warp1D simulate_warp_1d(int knots, std::size_t n, std::uint64_t seed);

EndpointSet simulate_endpoints(const EndpointParams& params, std::uint64_t seed);

/// Scott-type rule sigma_hat * (2N)^(-1/6) over the symmetrized coordinates.
double default_bandwidth(const EndpointSet& pts);

/// Symmetrized product-Gaussian kernel estimate on the grid, unit integral.
DensityField estimate_density(const EndpointSet& pts, const geometry::Grid1D& grid, double bandwidth);

/// Symmetrized mixture density that generated the endpoints, at (x, y).
double mixture_density(const EndpointParams& params, double x, double y);

/// (int_0^1 |a - b|^2)^(1/2) by trapezoid quadrature.
double l2_warp_error(const warp::Warp1D& a, const warp::Warp1D& b);

/// von Mises-Fisher endpoint component on a (dual) sphere.
struct SphereComponent {
  double weight = 1.0;
  geometry::Vec3 mean1{0, 0, 1};
  geometry::Vec3 mean2{1, 0, 0};
  int hemisphere1 = 0;
  int hemisphere2 = 0;
  double kappa = 5.0;
};

/// Symmetrized vMF mixture sampled at the nodes of a sphere or dual-sphere domain.
DensityField vmf_mixture(const density::Domain& domain, const std::vector<SphereComponent>& components);

/// Random components with the given count, drawn from the seed.
std::vector<SphereComponent> random_sphere_components(int count, bool dual, std::uint64_t seed);

/// exp_v(sum_i c_i b_i(v)) for a random combination of harmonic fields of degree <= L
/// with root mean square displacement close to amplitude.
warp::SphereWarp random_sphere_warp(std::shared_ptr<const geometry::Icosphere> ico, int max_degree, double amplitude,
                                    std::uint64_t seed);

struct PopulationConfig {
  int knots = 3;
  EndpointParams params = EndpointParams::table_s1();
  double bandwidth = 0.0;  // 0 selects default_bandwidth per subject
  int sphere_components = 3;
  int sphere_degree = 3;
  double sphere_amplitude = 0.15;
};

struct Population {
  std::vector<DensityField> originals;
  std::vector<DensityField> observed;  // originals warped by the true warps, unit integral
  std::vector<population::AnyWarp> true_warps;
};

/// Subject j draws from streams 2j (density) and 2j+1 (warp) of the seed. On the
/// interval the densities are kernel estimates of simulated endpoints; on
/// spheres they are random vMF mixtures warped by random harmonic flows.
Population simulate_population(const density::Domain& domain, int n_subjects, const PopulationConfig& cfg,
                               std::uint64_t seed);

struct Table1Config {
  std::size_t grid_size = 200;
  int knots = 3;
  EndpointParams params = EndpointParams::table_s1();
  double bandwidth = 0.0;  // 0 selects default_bandwidth per subject
  population::TemplateConfig tmpl;
};

struct Table1Result {
  std::vector<double> a;  // L2(gamma_j, gamma_hat_j)
  std::vector<double> b;  // L2(gamma_j, gamma_id)
  double mean_a = 0.0, sd_a = 0.0, mean_b = 0.0, sd_b = 0.0;
  std::vector<warp::Warp1D> true_warps;
  std::vector<warp::Warp1D> estimated_warps;  // gamma_hat_j, the inverses of the pipeline warps
  std::vector<DensityField> originals;
  std::vector<DensityField> observed;  // f_j * gamma_j
  std::optional<population::TemplateResult> pipeline;
};

/// Simulates N subjects, warps them, runs the full pipeline and scores recovery.
Table1Result run_table1_experiment(int n_subjects, const Table1Config& cfg, std::uint64_t seed);

/// Mean and sample standard deviation.
std::array<double, 2> mean_sd(const std::vector<double>& v);

}  // namespace conalign::simulate
