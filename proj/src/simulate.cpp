#include "conalign/simulate.hpp"

#include "conalign/error.hpp"
#include "conalign/parallel.hpp"
#include "conalign/pchip.hpp"
#include "conalign/registration.hpp"

#include <cmath>
#include <numeric>
#include <random>

namespace conalign::simulate {

EndpointParams EndpointParams::table_s1() {
  EndpointParams p;
  p.components = {{2500, 0.1, 0.9, 0.5}, {2500, 0.1, 0.3, 0.5}, {2500, 0.5, 0.6, 0.4},
                  {2500, 0.2, 0.6, 0.2}, {8000, 0.55, 0.95, 0.3}, {2000, 0.4, 0.8, 0.6}};
  p.parcels = 200;
  return p;
}

int EndpointParams::total() const {
  int t = 0;
  for (const auto& c : components) t += c.count;
  return t;
}

void EndpointParams::validate() const {
  if (components.empty()) throw ValidationError("endpoints: no components");
  for (const auto& c : components) {
    if (c.count <= 0) throw ValidationError("endpoints: component count must be positive");
    if (c.mu1 < 0.0 || c.mu1 > 1.0 || c.mu2 < 0.0 || c.mu2 > 1.0) throw ValidationError("endpoints: means must lie in [0,1]");
    if (!(c.variance > 0.0)) throw ValidationError("endpoints: variance must be positive");
  }
  if (parcels < 2) throw ValidationError("endpoints: need at least two parcels");
}

std::uint64_t stream_seed(std::uint64_t master, std::uint64_t stream) {
  // splitmix64 finalizer over the combined key.
  std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

warp::Warp1D simulate_warp_1d(int knots, std::size_t n, std::uint64_t seed) {
  if (knots < 3) throw ValidationError("simulate_warp_1d: need K >= 3");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> slopes(static_cast<std::size_t>(knots));
  double total = 0.0;
  do {
    total = 0.0;
    for (double& s : slopes) {
      s = unif(rng);
      total += s;
    }
  } while (total < 1e-6 || *std::min_element(slopes.begin(), slopes.end()) <= 0.0);
  std::vector<double> kx(static_cast<std::size_t>(knots) + 1), ky(kx.size(), 0.0);
  for (std::size_t k = 0; k < kx.size(); ++k) kx[k] = static_cast<double>(k) / knots;
  for (std::size_t k = 1; k < ky.size(); ++k) ky[k] = ky[k - 1] + slopes[k - 1] / total;
  ky.back() = 1.0;
  const pchip::Interpolant curve(kx, ky);
  const auto grid = geometry::Grid1D::uniform(n);
  std::vector<double> v(n), d(n);
  for (std::size_t i = 0; i < n; ++i) {
    v[i] = curve(grid.points[i]);
    d[i] = curve.derivative(grid.points[i]);
  }
  // Flat knot slopes would leave zero derivatives; fall back to the grid slopes there.
  const warp::Warp1D fallback = warp::Warp1D::from_values(v);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(d[i] > 0.0)) d[i] = fallback.derivative()[i];
  }
  return warp::Warp1D(std::move(v), std::move(d));
}

EndpointSet simulate_endpoints(const EndpointParams& params, std::uint64_t seed) {
  params.validate();
  std::mt19937_64 rng(seed);
  EndpointSet out;
  out.pairs.reserve(static_cast<std::size_t>(params.total()));
  for (const auto& c : params.components) {
    const double sd = std::sqrt(c.variance);
    std::normal_distribution<double> n1(c.mu1, sd), n2(c.mu2, sd);
    auto draw = [&](std::normal_distribution<double>& dist) {
      for (;;) {
        const double x = dist(rng);
        if (x >= 0.0 && x <= 1.0) return x;
      }
    };
    for (int k = 0; k < c.count; ++k) {
      const double u = draw(n1);
      const double v = draw(n2);
      out.pairs.push_back({u, v});
    }
  }
  return out;
}

double default_bandwidth(const EndpointSet& pts) {
  if (pts.size() < 2) throw ValidationError("default_bandwidth: need at least two pairs");
  double sum = 0.0, sq = 0.0;
  for (const auto& p : pts.pairs) {
    sum += p[0] + p[1];
    sq += p[0] * p[0] + p[1] * p[1];
  }
  const double m = 2.0 * static_cast<double>(pts.size());
  const double mean = sum / m;
  const double sd = std::sqrt(std::max(sq / m - mean * mean, 0.0) * m / (m - 1.0));
  return sd * std::pow(m, -1.0 / 6.0);
}

DensityField estimate_density(const EndpointSet& pts, const geometry::Grid1D& grid, double bandwidth) {
  if (pts.size() == 0) throw ValidationError("estimate_density: no endpoints");
  if (!(bandwidth > 0.0)) throw ValidationError("estimate_density: bandwidth must be positive");
  const auto n = static_cast<Eigen::Index>(grid.size());
  const auto m = static_cast<Eigen::Index>(pts.size());
  Eigen::MatrixXd a(n, m), b(n, m);
  const double norm = 1.0 / (std::sqrt(2.0 * M_PI) * bandwidth);
  for (Eigen::Index k = 0; k < m; ++k) {
    const auto& p = pts.pairs[static_cast<std::size_t>(k)];
    for (Eigen::Index i = 0; i < n; ++i) {
      const double x = grid.points[static_cast<std::size_t>(i)];
      const double du = (x - p[0]) / bandwidth;
      const double dv = (x - p[1]) / bandwidth;
      a(i, k) = norm * std::exp(-0.5 * du * du);
      b(i, k) = norm * std::exp(-0.5 * dv * dv);
    }
  }
  const Eigen::MatrixXd c = a * b.transpose();
  density::Domain domain = density::Domain::interval(grid.size());
  density::Matrix f = 0.5 * (c + c.transpose());
  density::normalize_integral(domain, f);
  return {domain, std::move(f)};
}

namespace {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double truncated_normal_pdf(double x, double mu, double sd) {
  if (x < 0.0 || x > 1.0) return 0.0;
  const double z = (x - mu) / sd;
  const double mass = normal_cdf((1.0 - mu) / sd) - normal_cdf(-mu / sd);
  return std::exp(-0.5 * z * z) / (std::sqrt(2.0 * M_PI) * sd * mass);
}

}  // namespace

double mixture_density(const EndpointParams& params, double x, double y) {
  const double total = params.total();
  double f = 0.0;
  for (const auto& c : params.components) {
    const double sd = std::sqrt(c.variance);
    const double a = truncated_normal_pdf(x, c.mu1, sd) * truncated_normal_pdf(y, c.mu2, sd);
    const double b = truncated_normal_pdf(x, c.mu2, sd) * truncated_normal_pdf(y, c.mu1, sd);
    f += c.count / total * 0.5 * (a + b);
  }
  return f;
}

double l2_warp_error(const warp::Warp1D& a, const warp::Warp1D& b) {
  return population::warp_distance(a, b);
}

DensityField vmf_mixture(const density::Domain& domain, const std::vector<SphereComponent>& components) {
  if (domain.kind() == density::DomainKind::Interval) throw ValidationError("vmf_mixture: needs a sphere domain");
  if (components.empty()) throw ValidationError("vmf_mixture: no components");
  const auto& ico = domain.ico();
  const std::size_t n = domain.size();
  const std::size_t v = ico.num_vertices();
  density::Matrix f = density::Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (const auto& c : components) {
    Eigen::VectorXd k1 = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    Eigen::VectorXd k2 = k1;
    const geometry::Vec3 m1 = c.mean1.normalized();
    const geometry::Vec3 m2 = c.mean2.normalized();
    for (std::size_t i = 0; i < n; ++i) {
      const int h = domain.hemisphere(i);
      const geometry::Vec3& x = ico.vertex(i % v);
      if (h == c.hemisphere1) k1[static_cast<Eigen::Index>(i)] = std::exp(c.kappa * (m1.dot(x) - 1.0));
      if (h == c.hemisphere2) k2[static_cast<Eigen::Index>(i)] = std::exp(c.kappa * (m2.dot(x) - 1.0));
    }
    const double z1 = domain.weights().dot(k1);
    const double z2 = domain.weights().dot(k2);
    f += c.weight * 0.5 * (k1 * k2.transpose() + k2 * k1.transpose()) / (z1 * z2);
  }
  density::mirror_upper(f);
  density::normalize_integral(domain, f);
  return {domain, std::move(f)};
}

std::vector<SphereComponent> random_sphere_components(int count, bool dual, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  auto direction = [&] {
    geometry::Vec3 p(normal(rng), normal(rng), normal(rng));
    return geometry::Vec3(p.normalized());
  };
  std::vector<SphereComponent> out;
  for (int k = 0; k < count; ++k) {
    SphereComponent c;
    c.weight = 0.5 + unif(rng);
    c.mean1 = direction();
    c.mean2 = direction();
    c.kappa = 2.0 + 4.0 * unif(rng);
    if (dual) {
      c.hemisphere1 = unif(rng) < 0.5 ? 0 : 1;
      c.hemisphere2 = unif(rng) < 0.5 ? 0 : 1;
    }
    out.push_back(c);
  }
  return out;
}

warp::SphereWarp random_sphere_warp(std::shared_ptr<const geometry::Icosphere> ico, int max_degree, double amplitude,
                                    std::uint64_t seed) {
  const auto& basis = registration::harmonic_basis(ico->level(), max_degree);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<geometry::Vec3> g(ico->num_vertices(), geometry::Vec3::Zero());
  for (const auto& b : basis) {
    const double c = normal(rng);
    for (std::size_t v = 0; v < g.size(); ++v) g[v] += c * b.field[v];
  }
  const auto& w = ico->vertex_weights();
  double sq = 0.0;
  for (std::size_t v = 0; v < g.size(); ++v) sq += w[v] * g[v].squaredNorm();
  const double rms = std::sqrt(sq / (4.0 * M_PI));
  return warp::incremental_warp(ico, g, amplitude / rms);
}

std::array<double, 2> mean_sd(const std::vector<double>& v) {
  if (v.empty()) return {0.0, 0.0};
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  if (v.size() < 2) return {mean, 0.0};
  double sq = 0.0;
  for (double x : v) sq += (x - mean) * (x - mean);
  return {mean, std::sqrt(sq / static_cast<double>(v.size() - 1))};
}

Population simulate_population(const density::Domain& domain, int n_subjects, const PopulationConfig& cfg,
                               std::uint64_t seed) {
  if (n_subjects < 1) throw ValidationError("simulate: need at least one subject");
  const auto count = static_cast<std::size_t>(n_subjects);
  Population pop;
  pop.originals.resize(count);
  pop.observed.resize(count);
  std::vector<std::optional<population::AnyWarp>> truth(count);
  const auto kind = domain.kind();
  parallel_for(count, [&](std::size_t j) {
    const std::uint64_t s_density = stream_seed(seed, 2 * j);
    const std::uint64_t s_warp = stream_seed(seed, 2 * j + 1);
    if (kind == density::DomainKind::Interval) {
      const EndpointSet pts = simulate_endpoints(cfg.params, s_density);
      const double bw = cfg.bandwidth > 0.0 ? cfg.bandwidth : default_bandwidth(pts);
      pop.originals[j] = estimate_density(pts, domain.grid(), bw);
      const auto w = simulate_warp_1d(cfg.knots, domain.size(), s_warp);
      DensityField g = warp::act(pop.originals[j], w);
      density::normalize_integral(g.domain, g.values);
      pop.observed[j] = std::move(g);
      truth[j].emplace(w);
      return;
    }
    const bool dual = kind == density::DomainKind::DualSphere;
    pop.originals[j] = vmf_mixture(domain, random_sphere_components(cfg.sphere_components, dual, s_density));
    const auto ico = domain.ico_ptr();
    auto w1 = random_sphere_warp(ico, cfg.sphere_degree, cfg.sphere_amplitude, s_warp);
    if (dual) {
      auto w2 = random_sphere_warp(ico, cfg.sphere_degree, cfg.sphere_amplitude, stream_seed(s_warp, 1));
      warp::DualWarp w{std::move(w1), std::move(w2)};
      pop.observed[j] = warp::act(pop.originals[j], w);
      truth[j].emplace(std::move(w));
    } else {
      pop.observed[j] = warp::act(pop.originals[j], w1);
      truth[j].emplace(std::move(w1));
    }
  });
  for (auto& t : truth) pop.true_warps.push_back(std::move(*t));
  return pop;
}

Table1Result run_table1_experiment(int n_subjects, const Table1Config& cfg, std::uint64_t seed) {
  if (n_subjects < 2) throw ValidationError("table1: need at least two subjects");
  const auto count = static_cast<std::size_t>(n_subjects);
  PopulationConfig pc;
  pc.knots = cfg.knots;
  pc.params = cfg.params;
  pc.bandwidth = cfg.bandwidth;
  Population pop = simulate_population(density::Domain::interval(cfg.grid_size), n_subjects, pc, seed);
  Table1Result r;
  r.originals = std::move(pop.originals);
  r.observed = std::move(pop.observed);
  for (auto& t : pop.true_warps) r.true_warps.push_back(std::get<warp::Warp1D>(std::move(t)));

  r.pipeline.emplace(population::full_pipeline(r.observed, cfg.tmpl));
  const auto identity = warp::Warp1D::identity(cfg.grid_size);
  for (std::size_t j = 0; j < count; ++j) {
    r.estimated_warps.push_back(warp::invert(std::get<warp::Warp1D>(r.pipeline->warps[j])));
    r.a.push_back(l2_warp_error(r.true_warps[j], r.estimated_warps[j]));
    r.b.push_back(l2_warp_error(r.true_warps[j], identity));
  }
  const auto sa = mean_sd(r.a);
  const auto sb = mean_sd(r.b);
  r.mean_a = sa[0];
  r.sd_a = sa[1];
  r.mean_b = sb[0];
  r.sd_b = sb[1];
  return r;
}

}  // namespace conalign::simulate
