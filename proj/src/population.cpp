#include "conalign/population.hpp"

#include "conalign/error.hpp"
#include "conalign/parallel.hpp"

#include <cmath>
#include <limits>

namespace conalign::population {

using density::DomainKind;

void TemplateConfig::validate() const {
  if (!(eps1 > 0.0)) throw ValidationError("template: eps1 must be positive");
  if (!(eps2 > 0.0 && eps2 <= 1.0)) throw ValidationError("template: eps2 must lie in (0,1]");
  if (max_outer < 1) throw ValidationError("template: need at least one outer iteration");
  if (statistic == Statistic::Median) throw ValidationError("template: the median statistic is not implemented");
}

HalfDensity hilbert_exp(const HalfDensity& mu, const Matrix& v, double t) {
  const double norm = density::l2_norm(mu.domain, v);
  if (norm * std::abs(t) < 1e-15) return mu;
  const double a = t * norm;
  Matrix out = std::cos(a) * mu.values + (std::sin(a) / norm) * v;
  density::normalize_l2(mu.domain, out);
  density::mirror_upper(out);
  return {mu.domain, std::move(out)};
}

Matrix hilbert_log(const HalfDensity& mu, const HalfDensity& q) {
  if (mu.domain != q.domain) throw ValidationError("hilbert_log: domain mismatch");
  const double c = std::clamp(density::inner(mu.domain, mu.values, q.values), -1.0, 1.0);
  const double theta = std::acos(c);
  if (theta < 1e-14) return Matrix::Zero(mu.values.rows(), mu.values.cols());
  if (M_PI - theta < 1e-8) throw DomainError("hilbert_log: points are antipodal");
  return (theta / std::sin(theta)) * (q.values - c * mu.values);
}

AnyWarp identity_warp(const density::Domain& domain) {
  switch (domain.kind()) {
    case DomainKind::Interval:
      return warp::Warp1D::identity(domain.size());
    case DomainKind::Sphere:
      return warp::SphereWarp::identity(domain.ico_ptr());
    case DomainKind::DualSphere:
      return warp::DualWarp::identity(domain.ico_ptr());
  }
  throw ValidationError("identity_warp: unknown domain");
}

HalfDensity act(const HalfDensity& q, const AnyWarp& w, const registration::RegistrationConfig& cfg) {
  const warp::SphereActionOptions opts{cfg.jacobian_step, cfg.renormalize};
  return std::visit(
      [&](const auto& g) -> HalfDensity {
        using W = std::decay_t<decltype(g)>;
        if constexpr (std::is_same_v<W, warp::Warp1D>) {
          return warp::act(q, g);
        } else {
          return warp::act(q, g, opts);
        }
      },
      w);
}

AnyWarp invert(const AnyWarp& w) {
  return std::visit(
      [](const auto& g) -> AnyWarp {
        using W = std::decay_t<decltype(g)>;
        if constexpr (std::is_same_v<W, warp::DualWarp>) {
          return warp::DualWarp{warp::invert(g.first), warp::invert(g.second)};
        } else {
          return warp::invert(g);
        }
      },
      w);
}

namespace {

double sphere_rms(const warp::SphereWarp& a, const warp::SphereWarp& b) {
  const auto& w = a.ico().vertex_weights();
  double s = 0.0, total = 0.0;
  for (std::size_t v = 0; v < w.size(); ++v) {
    const double d = geometry::geodesic_distance(a.targets()[v], b.targets()[v]);
    s += w[v] * d * d;
    total += w[v];
  }
  return std::sqrt(s / total);
}

}  // namespace

double warp_distance(const AnyWarp& a, const AnyWarp& b) {
  if (a.index() != b.index()) throw ValidationError("warp_distance: warps of different kinds");
  if (const auto* x = std::get_if<warp::Warp1D>(&a)) {
    const auto& y = std::get<warp::Warp1D>(b);
    if (x->size() != y.size()) throw ValidationError("warp_distance: different grids");
    const auto grid = geometry::Grid1D::uniform(x->size());
    double s = 0.0;
    for (std::size_t k = 0; k < x->size(); ++k) {
      const double d = x->values()[k] - y.values()[k];
      s += grid.weights[k] * d * d;
    }
    return std::sqrt(s);
  }
  if (const auto* x = std::get_if<warp::SphereWarp>(&a)) return sphere_rms(*x, std::get<warp::SphereWarp>(b));
  const auto& x = std::get<warp::DualWarp>(a);
  const auto& y = std::get<warp::DualWarp>(b);
  const double d1 = sphere_rms(x.first, y.first);
  const double d2 = sphere_rms(x.second, y.second);
  return std::sqrt(0.5 * (d1 * d1 + d2 * d2));
}

warp::Warp1D karcher_mean_warps(const std::vector<warp::Warp1D>& warps) {
  if (warps.empty()) throw ValidationError("karcher_mean_warps: empty input");
  const std::size_t n = warps.front().size();
  std::vector<double> v(n, 0.0), d(n, 0.0);
  for (const auto& w : warps) {
    if (w.size() != n) throw ValidationError("karcher_mean_warps: different grids");
    for (std::size_t k = 0; k < n; ++k) {
      v[k] += w.values()[k];
      d[k] += w.derivative()[k];
    }
  }
  const double inv = 1.0 / static_cast<double>(warps.size());
  for (std::size_t k = 0; k < n; ++k) {
    v[k] *= inv;
    d[k] *= inv;
  }
  try {
    return warp::Warp1D(std::move(v), std::move(d));
  } catch (const DiffeomorphismError& e) {
    throw ValidationError(std::string("karcher_mean_warps: mean is not a diffeomorphism: ") + e.what());
  }
}

warp::SphereWarp karcher_mean_warps(const std::vector<warp::SphereWarp>& warps) {
  if (warps.empty()) throw ValidationError("karcher_mean_warps: empty input");
  const auto& ico = warps.front().ico();
  const std::size_t nv = ico.num_vertices();
  std::vector<geometry::Vec3> out(nv);
  for (std::size_t v = 0; v < nv; ++v) {
    geometry::Vec3 m = ico.vertex(v);
    for (int it = 0; it < 100; ++it) {
      geometry::Vec3 step = geometry::Vec3::Zero();
      for (const auto& w : warps) step += geometry::sphere_log(m, w.targets()[v]);
      step /= static_cast<double>(warps.size());
      m = geometry::sphere_exp(m, step);
      if (step.norm() < 1e-14) break;
    }
    out[v] = m;
  }
  warp::SphereWarp mean(warps.front().ico_ptr(), std::move(out), warps.front().mode());
  try {
    mean.jacobians();
  } catch (const DiffeomorphismError& e) {
    throw ValidationError(std::string("karcher_mean_warps: mean is not a diffeomorphism: ") + e.what());
  }
  return mean;
}

warp::DualWarp karcher_mean_warps(const std::vector<warp::DualWarp>& warps) {
  std::vector<warp::SphereWarp> a, b;
  for (const auto& w : warps) {
    a.push_back(w.first);
    b.push_back(w.second);
  }
  return {karcher_mean_warps(a), karcher_mean_warps(b)};
}

AnyWarp karcher_mean_warps(const std::vector<AnyWarp>& warps) {
  if (warps.empty()) throw ValidationError("karcher_mean_warps: empty input");
  return std::visit(
      [&](const auto& first) -> AnyWarp {
        using W = std::decay_t<decltype(first)>;
        std::vector<W> typed;
        for (const auto& w : warps) typed.push_back(std::get<W>(w));
        return karcher_mean_warps(typed);
      },
      warps.front());
}

AnyWarp align_to(const HalfDensity& mu, const HalfDensity& q, const registration::RegistrationConfig& cfg,
                 const AnyWarp* init, SubjectStatus* status) {
  auto fill = [&](const registration::Trace& t) {
    if (!status) return;
    status->converged = t.converged;
    status->iterations = t.iterations;
    status->final_cost = t.cost.empty() ? 0.0 : t.cost.back();
    status->message = t.stop_reason;
  };
  switch (mu.domain.kind()) {
    case DomainKind::Interval: {
      auto r = registration::register_interval(mu, q, cfg, init ? &std::get<warp::Warp1D>(*init) : nullptr);
      fill(r.trace);
      return std::move(r.warp);
    }
    case DomainKind::Sphere: {
      auto r = registration::register_sphere(mu, q, cfg, init ? &std::get<warp::SphereWarp>(*init) : nullptr);
      fill(r.trace);
      return std::move(r.warp);
    }
    case DomainKind::DualSphere: {
      auto r = registration::register_dual(mu, q, cfg, init ? &std::get<warp::DualWarp>(*init) : nullptr);
      fill(r.trace);
      return std::move(r.warp);
    }
  }
  throw ValidationError("align_to: unknown domain");
}

namespace {

void check_inputs(const std::vector<HalfDensity>& qs) {
  if (qs.size() < 2) throw ValidationError("template: need at least two inputs");
  for (const auto& q : qs) {
    if (q.domain != qs.front().domain) throw ValidationError("template: inputs live on different domains");
  }
}

std::size_t medoid(const std::vector<HalfDensity>& qs) {
  std::size_t best = 0;
  double best_sum = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < qs.size(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < qs.size(); ++j) {
      if (i != j) s += density::l2_norm(qs[i].domain, qs[i].values - qs[j].values);
    }
    if (s < best_sum) {
      best_sum = s;
      best = i;
    }
  }
  return best;
}

// Aligns every subject to mu in parallel, isolating failures.
void align_all(const HalfDensity& mu, const std::vector<HalfDensity>& qs, const registration::RegistrationConfig& cfg,
               std::vector<AnyWarp>& warps, std::vector<SubjectStatus>& status) {
  parallel_for(qs.size(), [&](std::size_t j) {
    SubjectStatus s;
    try {
      warps[j] = align_to(mu, qs[j], cfg, &warps[j], &s);
    } catch (const Error& e) {
      s.failed = true;
      s.message = e.what();
    }
    status[j] = s;
  });
}

}  // namespace

KarcherResult karcher_mean_orbits(const std::vector<HalfDensity>& qs, const TemplateConfig& cfg) {
  check_inputs(qs);
  cfg.validate();
  const auto& domain = qs.front().domain;
  KarcherResult res{qs[medoid(qs)], std::vector<AnyWarp>(qs.size(), identity_warp(domain)), {},
                    std::vector<SubjectStatus>(qs.size()), 0, false};
  for (int k = 0; k < cfg.max_outer; ++k) {
    if (cfg.register_subjects) align_all(res.mean, qs, cfg.reg, res.warps, res.subjects);
    Matrix vbar = Matrix::Zero(res.mean.values.rows(), res.mean.values.cols());
    std::size_t used = 0;
    for (std::size_t j = 0; j < qs.size(); ++j) {
      if (res.subjects[j].failed) continue;
      const HalfDensity moved = cfg.register_subjects ? act(qs[j], res.warps[j], cfg.reg) : qs[j];
      vbar += hilbert_log(res.mean, moved);
      ++used;
    }
    if (used == 0) throw ValidationError("template: every subject failed to register");
    vbar /= static_cast<double>(used);
    const double norm = density::l2_norm(domain, vbar);
    res.update_norms.push_back(norm);
    res.iterations = k + 1;
    if (norm <= cfg.eps1) {
      res.converged = true;
      break;
    }
    res.mean = hilbert_exp(res.mean, vbar, cfg.eps2);
  }
  return res;
}

double frechet_objective(const HalfDensity& mu, const std::vector<HalfDensity>& qs, const TemplateConfig& cfg) {
  double total = 0.0;
  for (const auto& q : qs) {
    const HalfDensity moved = cfg.register_subjects ? act(q, align_to(mu, q, cfg.reg), cfg.reg) : q;
    const double d = density::riemannian_distance(mu, moved);
    total += d * d;
  }
  return total;
}

CenterResult center_of_orbit(const HalfDensity& mu, const std::vector<HalfDensity>& qs, const TemplateConfig& cfg,
                             const std::vector<AnyWarp>* init) {
  check_inputs(qs);
  std::vector<AnyWarp> warps = init ? *init : std::vector<AnyWarp>(qs.size(), identity_warp(mu.domain));
  std::vector<SubjectStatus> status(qs.size());
  align_all(mu, qs, cfg.reg, warps, status);
  std::vector<AnyWarp> ok;
  for (std::size_t j = 0; j < qs.size(); ++j) {
    if (!status[j].failed) ok.push_back(warps[j]);
  }
  if (ok.empty()) throw ValidationError("center_of_orbit: every subject failed to register");
  AnyWarp mean = karcher_mean_warps(ok);
  HalfDensity center = act(mu, invert(mean), cfg.reg);
  return {std::move(center), std::move(mean), std::move(warps)};
}

namespace {

AnyWarp compose_any(const AnyWarp& outer, const AnyWarp& inner) {
  return std::visit(
      [&](const auto& a) -> AnyWarp {
        using W = std::decay_t<decltype(a)>;
        const auto& b = std::get<W>(inner);
        if constexpr (std::is_same_v<W, warp::DualWarp>) {
          return warp::DualWarp{warp::compose(a.first, b.first), warp::compose(a.second, b.second)};
        } else {
          return warp::compose(a, b);
        }
      },
      outer);
}

}  // namespace

TemplateResult full_pipeline(const std::vector<DensityField>& fs, const TemplateConfig& cfg) {
  std::vector<HalfDensity> qs;
  qs.reserve(fs.size());
  for (const auto& f : fs) qs.push_back(density::q_map(f));
  check_inputs(qs);

  KarcherResult km = karcher_mean_orbits(qs, cfg);
  CenterResult centered = center_of_orbit(km.mean, qs, cfg, &km.warps);

  // Warm start from gamma_j o gamma_bar^{-1}, which aligns q_j to the center.
  const AnyWarp inv_mean = invert(centered.mean_warp);
  std::vector<AnyWarp> warps;
  warps.reserve(qs.size());
  for (const auto& w : centered.warps) {
    try {
      warps.push_back(compose_any(w, inv_mean));
    } catch (const Error&) {
      warps.push_back(identity_warp(qs.front().domain));
    }
  }
  std::vector<SubjectStatus> status(qs.size());
  align_all(centered.center, qs, cfg.reg, warps, status);

  TemplateResult out{centered.center, warps, {}, status, km.update_norms, km.converged, centered.mean_warp, 0.0};
  std::vector<AnyWarp> ok;
  for (std::size_t j = 0; j < qs.size(); ++j) {
    const HalfDensity moved = status[j].failed ? qs[j] : act(qs[j], warps[j], cfg.reg);
    out.aligned.push_back(density::q_unmap(moved));
    if (!status[j].failed) ok.push_back(warps[j]);
  }
  if (!ok.empty()) {
    out.centering_residual = warp_distance(karcher_mean_warps(ok), identity_warp(qs.front().domain));
  }
  return out;
}

}  // namespace conalign::population
