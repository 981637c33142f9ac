#include "conalign/warp.hpp"

#include "conalign/error.hpp"
#include "conalign/pchip.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>

namespace conalign::warp {

namespace {

constexpr double kBoundaryTolerance = 1e-12;

std::vector<double> uniform_pchip_slopes(const std::vector<double>& y) {
  std::vector<double> d(y.size());
  pchip::uniform_slopes(y, 1.0 / static_cast<double>(y.size() - 1), d);
  return d;
}

double eval_stencil(const pchip::Stencil& s, const double* y, const double* d) {
  return s.w00 * y[s.k] + s.w01 * y[s.k + 1] + s.w10 * d[s.k] + s.w11 * d[s.k + 1];
}

// Node derivatives of a warp scaled per interval into the Fritsch-Carlson
// region, so that the Hermite cubic stays monotone.
struct IntervalSlopes {
  std::vector<double> left, right;
};

std::array<double, 2> limit(double secant, double d0, double d1) {
  const double a = d0 / secant, b = d1 / secant;
  const double r = a * a + b * b;
  if (r <= 9.0) return {d0, d1};
  const double tau = 3.0 / std::sqrt(r);
  return {tau * d0, tau * d1};
}

IntervalSlopes limited_slopes(const std::vector<double>& x, const std::vector<double>& y, const std::vector<double>& d) {
  const std::size_t n = y.size();
  IntervalSlopes s{std::vector<double>(n - 1), std::vector<double>(n - 1)};
  for (std::size_t k = 0; k + 1 < n; ++k) {
    const auto l = limit((y[k + 1] - y[k]) / (x[k + 1] - x[k]), d[k], d[k + 1]);
    s.left[k] = l[0];
    s.right[k] = l[1];
  }
  return s;
}

double eval_limited(const pchip::Stencil& s, const double* y, const IntervalSlopes& d) {
  return s.w00 * y[s.k] + s.w01 * y[s.k + 1] + s.w10 * d.left[s.k] + s.w11 * d.right[s.k];
}

// Interpolates every column of m at the query stencils.
density::Matrix interp_columns(const density::Matrix& m, const std::vector<pchip::Stencil>& st) {
  const Eigen::Index n = m.rows();
  density::Matrix out(static_cast<Eigen::Index>(st.size()), m.cols());
  std::vector<double> d(static_cast<std::size_t>(n));
  const double h = 1.0 / static_cast<double>(n - 1);
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    const double* col = m.col(j).data();
    pchip::uniform_slopes(std::span<const double>(col, static_cast<std::size_t>(n)), h, d);
    for (std::size_t i = 0; i < st.size(); ++i) out(static_cast<Eigen::Index>(i), j) = eval_stencil(st[i], col, d.data());
  }
  return out;
}

std::array<double, 3> raw_coords(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 bc = b.cross(c);
  const double det = a.dot(bc);
  return {p.dot(bc) / det, a.dot(p.cross(c)) / det, a.dot(b.cross(p)) / det};
}

}  // namespace

Warp1D::Warp1D(std::vector<double> values, std::vector<double> derivative)
    : values_(std::move(values)), derivative_(std::move(derivative)) {
  const std::size_t n = values_.size();
  if (n < 2 || derivative_.size() != n) throw DiffeomorphismError("warp: need >= 2 nodes with matching derivative");
  if (std::abs(values_.front()) > kBoundaryTolerance || std::abs(values_.back() - 1.0) > kBoundaryTolerance) {
    std::ostringstream msg;
    msg << "warp: boundary values " << values_.front() << ", " << values_.back() << " are not 0 and 1";
    throw DiffeomorphismError(msg.str());
  }
  values_.front() = 0.0;
  values_.back() = 1.0;
  for (std::size_t k = 0; k < n; ++k) {
    if (!std::isfinite(values_[k]) || !std::isfinite(derivative_[k])) throw DiffeomorphismError("warp: non-finite value");
    if (!(derivative_[k] > 0.0)) {
      throw DiffeomorphismError("warp: nonpositive derivative at node " + std::to_string(k));
    }
    if (k > 0 && !(values_[k] > values_[k - 1])) {
      throw DiffeomorphismError("warp: not strictly increasing at node " + std::to_string(k));
    }
  }
}

Warp1D Warp1D::identity(std::size_t n) {
  const auto grid = geometry::Grid1D::uniform(n);
  return Warp1D(grid.points, std::vector<double>(n, 1.0));
}

Warp1D Warp1D::from_values(std::vector<double> values) {
  if (values.size() < 2) throw DiffeomorphismError("warp: need >= 2 nodes");
  auto d = uniform_pchip_slopes(values);
  return Warp1D(std::move(values), std::move(d));
}

double Warp1D::operator()(double t) const {
  const double q[1] = {t};
  const auto st = pchip::uniform_stencils(size(), q);
  const auto d = limited_slopes(geometry::Grid1D::uniform(size()).points, values_, derivative_);
  return eval_limited(st[0], values_.data(), d);
}

double Warp1D::slope(double t) const {
  const double q[1] = {t};
  const auto st = pchip::uniform_stencils(size(), q);
  const auto d = uniform_pchip_slopes(derivative_);
  return eval_stencil(st[0], derivative_.data(), d.data());
}

Warp1D compose(const Warp1D& outer, const Warp1D& inner) {
  if (outer.size() != inner.size()) throw ValidationError("compose: warps live on different grids");
  const std::size_t n = outer.size();
  const auto st = pchip::uniform_stencils(n, inner.values());
  const auto dv = limited_slopes(geometry::Grid1D::uniform(n).points, outer.values(), outer.derivative());
  const auto dd = uniform_pchip_slopes(outer.derivative());
  std::vector<double> v(n), d(n);
  for (std::size_t k = 0; k < n; ++k) {
    v[k] = eval_limited(st[k], outer.values().data(), dv);
    d[k] = eval_stencil(st[k], outer.derivative().data(), dd.data()) * inner.derivative()[k];
  }
  return Warp1D(std::move(v), std::move(d));
}

Warp1D invert(const Warp1D& gamma) {
  const std::size_t n = gamma.size();
  const auto grid = geometry::Grid1D::uniform(n);
  const auto& y = gamma.values();
  std::vector<double> slope(n);
  for (std::size_t k = 0; k < n; ++k) slope[k] = 1.0 / gamma.derivative()[k];
  const auto lim = limited_slopes(y, grid.points, slope);
  const auto dd = uniform_pchip_slopes(gamma.derivative());
  std::vector<double> v(n), d(n);
  std::size_t j = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const double t = grid.points[k];
    while (j + 2 < n && y[j + 1] <= t) ++j;
    const double h = y[j + 1] - y[j];
    const double s = std::clamp((t - y[j]) / h, 0.0, 1.0);
    const double s2 = s * s, s3 = s2 * s;
    v[k] = (2 * s3 - 3 * s2 + 1) * grid.points[j] + (-2 * s3 + 3 * s2) * grid.points[j + 1] +
           (s3 - 2 * s2 + s) * h * lim.left[j] + (s3 - s2) * h * lim.right[j];
  }
  v.front() = 0.0;
  v.back() = 1.0;
  const auto st = pchip::uniform_stencils(n, v);
  for (std::size_t k = 0; k < n; ++k) d[k] = 1.0 / eval_stencil(st[k], gamma.derivative().data(), dd.data());
  return Warp1D(std::move(v), std::move(d));
}

Warp1D incremental_warp(const std::vector<double>& g, const std::vector<double>& gdot, double sigma) {
  const std::size_t n = g.size();
  if (gdot.size() != n) throw ValidationError("incremental_warp: size mismatch");
  const auto grid = geometry::Grid1D::uniform(n);
  std::vector<double> v(n), d(n);
  for (std::size_t k = 0; k < n; ++k) {
    v[k] = grid.points[k] + sigma * g[k];
    d[k] = 1.0 + sigma * gdot[k];
  }
  return Warp1D(std::move(v), std::move(d));
}

HalfDensity act(const HalfDensity& q, const Warp1D& gamma) {
  if (q.domain.kind() != density::DomainKind::Interval || q.domain.size() != gamma.size()) {
    throw ValidationError("act: warp does not match the interval domain " + q.domain.describe());
  }
  const auto st = pchip::uniform_stencils(gamma.size(), gamma.values());
  const density::Matrix stage = interp_columns(q.values, st);
  density::Matrix out = interp_columns(stage.transpose(), st).transpose();
  Eigen::VectorXd s(static_cast<Eigen::Index>(gamma.size()));
  for (std::size_t k = 0; k < gamma.size(); ++k) s[static_cast<Eigen::Index>(k)] = std::sqrt(gamma.derivative()[k]);
  out = s.asDiagonal() * out * s.asDiagonal();
  density::Matrix sym = 0.5 * (out + out.transpose());
  return {q.domain, std::move(sym)};
}

DensityField act(const DensityField& f, const Warp1D& gamma) { return density::q_unmap(act(density::q_map(f), gamma)); }

density::Matrix action_slopes(const HalfDensity& q, const Warp1D& gamma) {
  if (q.domain.kind() != density::DomainKind::Interval || q.domain.size() != gamma.size()) {
    throw ValidationError("action_slopes: warp does not match the interval domain " + q.domain.describe());
  }
  const std::size_t n = gamma.size();
  const auto st = pchip::uniform_stencils(n, gamma.values());
  const auto dst = pchip::uniform_derivative_stencils(n, gamma.values());
  const density::Matrix stage = interp_columns(q.values, st);
  const density::Matrix dstage = interp_columns(q.values, dst);
  const density::Matrix raw = interp_columns(stage.transpose(), st).transpose();
  // a: derivative in the first argument, b: in the second.
  const density::Matrix a = interp_columns(dstage.transpose(), st).transpose();
  const density::Matrix b = interp_columns(stage.transpose(), dst).transpose();
  const auto& d = gamma.derivative();
  const auto dd = uniform_pchip_slopes(d);
  Eigen::VectorXd s(static_cast<Eigen::Index>(n)), t(static_cast<Eigen::Index>(n)), h(static_cast<Eigen::Index>(n));
  for (std::size_t k = 0; k < n; ++k) {
    const auto kk = static_cast<Eigen::Index>(k);
    s[kk] = std::sqrt(d[k]);
    t[kk] = d[k];
    h[kk] = 0.5 * dd[k] / d[k];
  }
  const density::Matrix out = s.asDiagonal() * raw * s.asDiagonal();
  const density::Matrix ax = s.asDiagonal() * (t.asDiagonal() * a) * s.asDiagonal() + h.asDiagonal() * out;
  const density::Matrix by = s.asDiagonal() * (b * t.asDiagonal()) * s.asDiagonal() + out * h.asDiagonal();
  // act returns the symmetric part, whose first-index slope mixes both.
  return 0.5 * (ax + by.transpose());
}

SphereWarp::SphereWarp(std::shared_ptr<const geometry::Icosphere> ico, std::vector<Vec3> targets,
                       SphereInterpolation mode)
    : ico_(std::move(ico)), targets_(std::move(targets)), mode_(mode) {
  if (!ico_) throw ValidationError("sphere warp: missing icosphere");
  if (targets_.size() != ico_->num_vertices()) throw ValidationError("sphere warp: one target per vertex required");
  for (auto& t : targets_) {
    const double norm = t.norm();
    if (!std::isfinite(norm) || norm < 0.5) throw DiffeomorphismError("sphere warp: invalid target point");
    t /= norm;
  }
}

SphereWarp SphereWarp::identity(std::shared_ptr<const geometry::Icosphere> ico, SphereInterpolation mode) {
  auto v = ico->vertices();
  return SphereWarp(std::move(ico), std::move(v), mode);
}

SphereWarp SphereWarp::rotation(std::shared_ptr<const geometry::Icosphere> ico, const Eigen::Matrix3d& r) {
  std::vector<Vec3> t;
  t.reserve(ico->num_vertices());
  for (const auto& v : ico->vertices()) t.push_back(r * v);
  return SphereWarp(std::move(ico), std::move(t));
}

Vec3 SphereWarp::operator()(const Vec3& p_in) const {
  const auto loc = ico_->locate(p_in);
  const auto& f = ico_->faces()[static_cast<std::size_t>(loc.face)];
  if (mode_ == SphereInterpolation::Chordal) {
    Vec3 s = Vec3::Zero();
    for (int k = 0; k < 3; ++k) s += loc.bary[k] * targets_[f[k]];
    return s.normalized();
  }
  const Vec3 p = p_in.normalized();
  Vec3 u = Vec3::Zero();
  for (int k = 0; k < 3; ++k) {
    const Vec3& v = ico_->vertex(f[k]);
    u += loc.bary[k] * geometry::parallel_transport(v, p, geometry::sphere_log(v, targets_[f[k]]));
  }
  return geometry::sphere_exp(p, geometry::project_tangent(p, u));
}

double SphereWarp::jacobian(std::size_t v, double delta) const {
  const Vec3& x = ico_->vertex(v);
  const auto frame = geometry::tangent_frame(x);
  std::array<Vec3, 2> d;
  for (int k = 0; k < 2; ++k) {
    const Vec3 plus = (*this)(geometry::sphere_exp(x, delta * frame[k]));
    const Vec3 minus = (*this)(geometry::sphere_exp(x, -delta * frame[k]));
    d[k] = (plus - minus) / (2.0 * std::sin(delta));
  }
  const double j = d[0].cross(d[1]).dot(targets_[v]);
  if (!(j > 0.0)) {
    std::ostringstream msg;
    msg << "sphere warp: nonpositive Jacobian " << j << " at vertex " << v;
    throw DiffeomorphismError(msg.str());
  }
  return j;
}

std::vector<double> SphereWarp::jacobians(double delta) const {
  std::vector<double> out(targets_.size());
  for (std::size_t v = 0; v < out.size(); ++v) out[v] = jacobian(v, delta);
  return out;
}

SphereWarp compose(const SphereWarp& outer, const SphereWarp& inner) {
  if (outer.ico().num_vertices() != inner.ico().num_vertices()) throw ValidationError("compose: different icospheres");
  std::vector<Vec3> t(inner.targets().size());
  for (std::size_t v = 0; v < t.size(); ++v) t[v] = outer(inner.targets()[v]);
  return SphereWarp(outer.ico_ptr(), std::move(t), outer.mode());
}

SphereWarp incremental_warp(std::shared_ptr<const geometry::Icosphere> ico, const std::vector<Vec3>& g, double sigma,
                            SphereInterpolation mode) {
  if (g.size() != ico->num_vertices()) throw ValidationError("incremental_warp: one tangent vector per vertex required");
  std::vector<Vec3> t(g.size());
  for (std::size_t v = 0; v < g.size(); ++v) {
    const Vec3& x = ico->vertex(v);
    t[v] = geometry::sphere_exp(x, sigma * geometry::project_tangent(x, g[v]));
  }
  return SphereWarp(std::move(ico), std::move(t), mode);
}

SphereWarp invert(const SphereWarp& gamma) {
  const auto& ico = gamma.ico();
  const auto& faces = ico.faces();
  const auto& t = gamma.targets();
  std::vector<Vec3> out(t.size());
  for (std::size_t v = 0; v < t.size(); ++v) {
    const Vec3& y = ico.vertex(v);
    double best = -std::numeric_limits<double>::infinity();
    std::array<double, 3> best_raw{};
    std::size_t best_face = 0;
    for (std::size_t f = 0; f < faces.size(); ++f) {
      const auto& tri = faces[f];
      const auto raw = raw_coords(y, t[tri[0]], t[tri[1]], t[tri[2]]);
      const double sum = raw[0] + raw[1] + raw[2];
      if (!(sum > 0.0)) continue;
      const double score = std::min({raw[0], raw[1], raw[2]}) / sum;
      if (score > best) {
        best = score;
        best_raw = raw;
        best_face = f;
        if (score >= 0.0) break;
      }
    }
    if (best < -1e-6) throw DiffeomorphismError("invert: warped mesh does not cover vertex " + std::to_string(v));
    Vec3 p = Vec3::Zero();
    for (int k = 0; k < 3; ++k) p += std::max(best_raw[k], 0.0) * ico.vertex(faces[best_face][k]);
    out[v] = p.normalized();
  }
  return SphereWarp(gamma.ico_ptr(), std::move(out), gamma.mode());
}

DualWarp DualWarp::identity(std::shared_ptr<const geometry::Icosphere> ico, SphereInterpolation mode) {
  return {SphereWarp::identity(ico, mode), SphereWarp::identity(ico, mode)};
}

namespace {

HalfDensity sphere_action(const HalfDensity& q, const std::vector<const SphereWarp*>& warps,
                          const SphereActionOptions& opts, SphereActionReport* report) {
  const auto& ico = q.domain.ico();
  const std::size_t v = ico.num_vertices();
  std::vector<density::InterpRow> rows;
  Eigen::VectorXd s(static_cast<Eigen::Index>(v * warps.size()));
  rows.reserve(v * warps.size());
  double jmin = std::numeric_limits<double>::infinity();
  double jmax = -jmin;
  for (std::size_t h = 0; h < warps.size(); ++h) {
    const SphereWarp& w = *warps[h];
    if (w.ico().num_vertices() != v) throw ValidationError("act: warp icosphere does not match the domain");
    const auto jac = w.jacobians(opts.jacobian_step);
    for (std::size_t i = 0; i < v; ++i) {
      rows.push_back(density::interp_row(ico, w.targets()[i], static_cast<int>(h * v)));
      s[static_cast<Eigen::Index>(h * v + i)] = std::sqrt(jac[i]);
      jmin = std::min(jmin, jac[i]);
      jmax = std::max(jmax, jac[i]);
    }
  }
  density::Matrix out = density::resample(q.values, rows, rows);
  out = s.asDiagonal() * out * s.asDiagonal();
  density::mirror_upper(out);
  const double raw = density::l2_norm(q.domain, out);
  if (opts.renormalize) out /= raw;
  if (report) *report = {raw, jmin, jmax};
  return {q.domain, std::move(out)};
}

}  // namespace

HalfDensity act(const HalfDensity& q, const SphereWarp& gamma, const SphereActionOptions& opts,
                SphereActionReport* report) {
  if (q.domain.kind() != density::DomainKind::Sphere) throw ValidationError("act: expected a sphere domain");
  return sphere_action(q, {&gamma}, opts, report);
}

HalfDensity act(const HalfDensity& q, const DualWarp& gamma, const SphereActionOptions& opts,
                SphereActionReport* report) {
  if (q.domain.kind() != density::DomainKind::DualSphere) throw ValidationError("act: expected a dual-sphere domain");
  return sphere_action(q, {&gamma.first, &gamma.second}, opts, report);
}

DensityField act(const DensityField& f, const SphereWarp& gamma, const SphereActionOptions& opts,
                 SphereActionReport* report) {
  return density::q_unmap(act(density::q_map(f), gamma, opts, report));
}

DensityField act(const DensityField& f, const DualWarp& gamma, const SphereActionOptions& opts,
                 SphereActionReport* report) {
  return density::q_unmap(act(density::q_map(f), gamma, opts, report));
}

}  // namespace conalign::warp
