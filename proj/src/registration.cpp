#include "conalign/registration.hpp"

#include "conalign/error.hpp"
#include "conalign/pchip.hpp"

#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <tuple>

namespace conalign::registration {

using density::DomainKind;

RegistrationConfig RegistrationConfig::resolved(DomainKind kind) const {
  RegistrationConfig c = *this;
  const bool interval = kind == DomainKind::Interval;
  if (c.step_size == 0.0) c.step_size = interval ? 0.1 : 0.5;
  if (c.tolerance == 0.0) c.tolerance = interval ? 1e-4 : 1e-3;
  if (c.basis_size == 0) c.basis_size = interval ? 8 : 6;
  return c;
}

void RegistrationConfig::validate() const {
  if (!(step_size > 0.0)) throw ValidationError("registration: step size must be positive");
  if (!(tolerance > 0.0)) throw ValidationError("registration: tolerance must be positive");
  if (basis_size < 1) throw ValidationError("registration: basis size must be positive");
  if (max_iterations < 0) throw ValidationError("registration: max iterations must be nonnegative");
  if (!(step_decay > 0.0 && step_decay < 1.0)) throw ValidationError("registration: step decay must lie in (0,1)");
  if (max_backoffs < 0) throw ValidationError("registration: max backoffs must be nonnegative");
  if (!(jacobian_step > 0.0) || !(spatial_step > 0.0)) throw ValidationError("registration: finite-difference steps must be positive");
}

Matrix spatial_slopes(const HalfDensity& q, SlopeScheme scheme) {
  const Matrix& m = q.values;
  const Eigen::Index n = m.rows();
  const double h = 1.0 / static_cast<double>(n - 1);
  Matrix d(n, m.cols());
  if (scheme != SlopeScheme::Central) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      pchip::uniform_slopes(std::span<const double>(m.col(j).data(), static_cast<std::size_t>(n)), h,
                            std::span<double>(d.col(j).data(), static_cast<std::size_t>(n)));
    }
    return d;
  }
  d.row(0) = (m.row(1) - m.row(0)) / h;
  d.row(n - 1) = (m.row(n - 1) - m.row(n - 2)) / h;
  d.middleRows(1, n - 2) = (m.bottomRows(n - 2) - m.topRows(n - 2)) / (2.0 * h);
  return d;
}

Matrix dphi_1d(const HalfDensity& q, const basis::BasisElement1D& b, SlopeScheme scheme) {
  const Matrix dx = spatial_slopes(q, scheme);
  const auto n = static_cast<Eigen::Index>(b.values.size());
  if (q.values.rows() != n) throw ValidationError("dphi_1d: basis and density grids differ");
  const Eigen::Map<const Eigen::VectorXd> bv(b.values.data(), n);
  const Eigen::Map<const Eigen::VectorXd> bd(b.derivative.data(), n);
  // dq/dy at (i,j) is the first-argument slope of the transpose.
  const Matrix dy = spatial_slopes({q.domain, q.values.transpose()}, scheme).transpose();
  Matrix out = bv.asDiagonal() * dx + dy * bv.asDiagonal();
  out += 0.5 * q.values.cwiseProduct(bd.replicate(1, n) + bd.transpose().replicate(n, 1));
  return out;
}

SphereShifts sphere_shifts(const HalfDensity& q, double eps) {
  const auto kind = q.domain.kind();
  if (kind != DomainKind::Sphere && kind != DomainKind::DualSphere) throw ValidationError("sphere_shifts: not a sphere domain");
  const auto& ico = q.domain.ico();
  const std::size_t v = ico.num_vertices();
  const std::size_t n = q.domain.size();
  SphereShifts s;
  s.frame.resize(n);
  std::array<std::vector<density::InterpRow>, 2> rows;
  for (auto& r : rows) r.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t vi = i % v;
    const int offset = static_cast<int>(i - vi);
    const Vec3& x = ico.vertex(vi);
    s.frame[i] = geometry::tangent_frame(x);
    for (int k = 0; k < 2; ++k) rows[k][i] = density::interp_row(ico, geometry::sphere_exp(x, eps * s.frame[i][k]), offset);
  }
  for (int k = 0; k < 2; ++k) {
    Matrix& d = s.d[k];
    d.resize(q.values.rows(), q.values.cols());
    for (std::size_t i = 0; i < n; ++i) {
      const auto& r = rows[k][i];
      const auto ii = static_cast<Eigen::Index>(i);
      d.row(ii) = (r.w[0] * q.values.row(r.idx[0]) + r.w[1] * q.values.row(r.idx[1]) + r.w[2] * q.values.row(r.idx[2]) -
                   q.values.row(ii)) /
                  eps;
    }
  }
  return s;
}

namespace {

struct NodeCoefficients {
  Eigen::VectorXd a1, a2, div;
};

// Frame coordinates and divergence of b on every node, zero off the active hemisphere.
NodeCoefficients node_coefficients(const density::Domain& domain, const SphereShifts& s,
                                   const basis::HarmonicBasisElement& b, int hemisphere) {
  const std::size_t n = domain.size();
  const std::size_t v = domain.ico().num_vertices();
  if (b.field.size() != v) throw ValidationError("dphi_sphere: basis sampled on a different icosphere");
  NodeCoefficients c{Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n)), Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n)),
                     Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n))};
  for (std::size_t i = 0; i < n; ++i) {
    if (domain.hemisphere(i) != hemisphere) continue;
    const auto ii = static_cast<Eigen::Index>(i);
    const std::size_t vi = i % v;
    c.a1[ii] = s.frame[i][0].dot(b.field[vi]);
    c.a2[ii] = s.frame[i][1].dot(b.field[vi]);
    c.div[ii] = b.divergence[vi];
  }
  return c;
}

}  // namespace

Matrix dphi_sphere(const SphereShifts& s, const HalfDensity& q, const basis::HarmonicBasisElement& b, int hemisphere) {
  const auto c = node_coefficients(q.domain, s, b, hemisphere);
  const Matrix x_part = c.a1.asDiagonal() * s.d[0] + c.a2.asDiagonal() * s.d[1];
  const Eigen::Index n = q.values.rows();
  Matrix out = x_part + x_part.transpose();
  out += 0.5 * q.values.cwiseProduct(c.div.replicate(1, n) + c.div.transpose().replicate(n, 1));
  return out;
}

Matrix dphi_sphere(const HalfDensity& q, const basis::HarmonicBasisElement& b, double eps, int hemisphere) {
  return dphi_sphere(sphere_shifts(q, eps), q, b, hemisphere);
}

double directional_derivative(const HalfDensity& q1, const HalfDensity& q2, const Matrix& dphi) {
  if (q1.domain != q2.domain) throw ValidationError("directional_derivative: domain mismatch");
  return -2.0 * density::inner(q1.domain, q1.values - q2.values, dphi);
}

Gradient1D gradient_H(const HalfDensity& q1, const HalfDensity& q2, const std::vector<basis::BasisElement1D>& basis,
                      SlopeScheme scheme) {
  if (q1.domain != q2.domain) throw ValidationError("gradient_H: domain mismatch");
  return gradient_H(q1, q2, spatial_slopes(q2, scheme), basis);
}

Gradient1D gradient_H(const HalfDensity& q1, const HalfDensity& q2, const Matrix& dx,
                      const std::vector<basis::BasisElement1D>& basis) {
  if (q1.domain != q2.domain) throw ValidationError("gradient_H: domain mismatch");
  if (dx.rows() != q2.values.rows() || dx.cols() != q2.values.cols()) throw ValidationError("gradient_H: slope shape");
  const Eigen::VectorXd& w = q1.domain.weights();
  const Matrix r = q1.values - q2.values;
  // With symmetric r and q the y terms equal the x terms.
  const Eigen::VectorXd p = r.cwiseProduct(dx) * w;
  const Eigen::VectorXd qq = r.cwiseProduct(q2.values) * w;
  Gradient1D g;
  const std::size_t n = q1.domain.size();
  g.coefficients.resize(static_cast<Eigen::Index>(basis.size()));
  g.field.assign(n, 0.0);
  g.derivative.assign(n, 0.0);
  for (std::size_t k = 0; k < basis.size(); ++k) {
    const auto& b = basis[k];
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      s += w[ii] * (2.0 * b.values[i] * p[ii] + b.derivative[i] * qq[ii]);
    }
    g.coefficients[static_cast<Eigen::Index>(k)] = -2.0 * s;
  }
  for (std::size_t k = 0; k < basis.size(); ++k) {
    const double c = g.coefficients[static_cast<Eigen::Index>(k)];
    for (std::size_t i = 0; i < n; ++i) {
      g.field[i] += c * basis[k].values[i];
      g.derivative[i] += c * basis[k].derivative[i];
    }
  }
  g.norm = g.coefficients.norm();
  return g;
}

Gradient1D gradient_H_explicit(const HalfDensity& q1, const HalfDensity& q2,
                               const std::vector<basis::BasisElement1D>& basis, SlopeScheme scheme) {
  Gradient1D g;
  const std::size_t n = q1.domain.size();
  g.coefficients.resize(static_cast<Eigen::Index>(basis.size()));
  g.field.assign(n, 0.0);
  g.derivative.assign(n, 0.0);
  for (std::size_t k = 0; k < basis.size(); ++k) {
    const double c = directional_derivative(q1, q2, dphi_1d(q2, basis[k], scheme));
    g.coefficients[static_cast<Eigen::Index>(k)] = c;
    for (std::size_t i = 0; i < n; ++i) {
      g.field[i] += c * basis[k].values[i];
      g.derivative[i] += c * basis[k].derivative[i];
    }
  }
  g.norm = g.coefficients.norm();
  return g;
}

namespace {

GradientSphere assemble(const std::vector<basis::HarmonicBasisElement>& basis, Eigen::VectorXd coefficients) {
  GradientSphere g;
  g.coefficients = std::move(coefficients);
  const std::size_t v = basis.empty() ? 0 : basis.front().field.size();
  g.field.assign(v, Vec3::Zero());
  for (std::size_t k = 0; k < basis.size(); ++k) {
    const double c = g.coefficients[static_cast<Eigen::Index>(k)];
    for (std::size_t i = 0; i < v; ++i) g.field[i] += c * basis[k].field[i];
  }
  g.norm = g.coefficients.norm();
  return g;
}

}  // namespace

GradientSphere gradient_H(const HalfDensity& q1, const HalfDensity& q2,
                          const std::vector<basis::HarmonicBasisElement>& basis, double eps, int hemisphere) {
  if (q1.domain != q2.domain) throw ValidationError("gradient_H: domain mismatch");
  const auto& domain = q1.domain;
  const Eigen::VectorXd& w = domain.weights();
  const SphereShifts s = sphere_shifts(q2, eps);
  const Matrix r = q1.values - q2.values;
  const Eigen::VectorXd p1 = r.cwiseProduct(s.d[0]) * w;
  const Eigen::VectorXd p2 = r.cwiseProduct(s.d[1]) * w;
  const Eigen::VectorXd qq = r.cwiseProduct(q2.values) * w;
  Eigen::VectorXd coeff(static_cast<Eigen::Index>(basis.size()));
  for (std::size_t k = 0; k < basis.size(); ++k) {
    const auto c = node_coefficients(domain, s, basis[k], hemisphere);
    const Eigen::VectorXd terms = c.a1.cwiseProduct(p1) + c.a2.cwiseProduct(p2) + 0.5 * c.div.cwiseProduct(qq);
    coeff[static_cast<Eigen::Index>(k)] = -4.0 * w.dot(terms);
  }
  return assemble(basis, std::move(coeff));
}

GradientSphere gradient_H_explicit(const HalfDensity& q1, const HalfDensity& q2,
                                   const std::vector<basis::HarmonicBasisElement>& basis, double eps, int hemisphere) {
  const SphereShifts s = sphere_shifts(q2, eps);
  Eigen::VectorXd coeff(static_cast<Eigen::Index>(basis.size()));
  for (std::size_t k = 0; k < basis.size(); ++k) {
    coeff[static_cast<Eigen::Index>(k)] = directional_derivative(q1, q2, dphi_sphere(s, q2, basis[k], hemisphere));
  }
  return assemble(basis, std::move(coeff));
}

namespace {

int slot_of(std::vector<int>& list, int idx) {
  for (std::size_t s = 0; s < list.size(); ++s) {
    if (list[s] == idx) return static_cast<int>(s);
  }
  list.push_back(idx);
  return static_cast<int>(list.size() - 1);
}

}  // namespace

SphereLinearizer::SphereLinearizer(std::shared_ptr<const geometry::Icosphere> ico,
                                   const std::vector<basis::HarmonicBasisElement>& basis, double spatial_step,
                                   double jacobian_step, warp::SphereInterpolation mode)
    : ico_(std::move(ico)), basis_(&basis) {
  if (!ico_) throw ValidationError("SphereLinearizer: missing icosphere");
  if (!(spatial_step > 0.0) || !(jacobian_step > 0.0)) throw ValidationError("SphereLinearizer: steps must be positive");
  const std::size_t v = ico_->num_vertices();
  neighbors_.resize(v);
  for (std::size_t i = 0; i < v; ++i) neighbors_[i] = {static_cast<int>(i)};

  // Points where the action samples the warp to form the Jacobian.
  struct Probe {
    Vec3 p;
    geometry::Location loc;
  };
  std::vector<std::array<Probe, 4>> probes(v);
  std::vector<std::array<Vec3, 2>> frames(v);
  for (std::size_t i = 0; i < v; ++i) {
    const Vec3& x = ico_->vertex(i);
    frames[i] = geometry::tangent_frame(x);
    for (int k = 0; k < 2; ++k) {
      for (int s = 0; s < 2; ++s) {
        const Vec3 p = geometry::sphere_exp(x, (s == 0 ? jacobian_step : -jacobian_step) * frames[i][k]);
        probes[i][2 * k + s] = {p, ico_->locate(p)};
      }
    }
  }
  const auto& faces = ico_->faces();
  const double scale = 1.0 / (2.0 * std::sin(jacobian_step));

  elements_.reserve(basis.size());
  for (const auto& b : basis) {
    if (b.field.size() != v) throw ValidationError("SphereLinearizer: basis sampled on a different icosphere");
    Element e;
    e.slot.assign(v, {0, 0, 0, 0, 0, 0});
    e.coef.assign(v, {0, 0, 0, 0, 0, 0});
    e.divergence = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(v));
    for (std::size_t i = 0; i < v; ++i) {
      const Vec3& x = ico_->vertex(i);
      const Vec3 bi = geometry::project_tangent(x, b.field[i]);
      const double len = bi.norm();
      if (len > 1e-14) {
        for (int s = 0; s < 2; ++s) {
          const double sign = s == 0 ? 1.0 : -1.0;
          const auto loc = ico_->locate(geometry::sphere_exp(x, sign * spatial_step / len * bi));
          const auto& f = faces[static_cast<std::size_t>(loc.face)];
          for (int a = 0; a < 3; ++a) {
            e.slot[i][3 * s + a] = slot_of(neighbors_[i], f[a]);
            e.coef[i][3 * s + a] = sign * loc.bary[a] * len / (2.0 * spatial_step);
          }
        }
      }
      double div = 0.0;
      for (int k = 0; k < 2; ++k) {
        std::array<Vec3, 2> beta;
        for (int s = 0; s < 2; ++s) {
          const auto& pr = probes[i][2 * k + s];
          const auto& f = faces[static_cast<std::size_t>(pr.loc.face)];
          if (mode == warp::SphereInterpolation::Chordal) {
            Vec3 sum = Vec3::Zero();
            Vec3 db = Vec3::Zero();
            for (int a = 0; a < 3; ++a) {
              sum += pr.loc.bary[a] * ico_->vertex(f[a]);
              db += pr.loc.bary[a] * b.field[f[a]];
            }
            const Vec3 n = sum.normalized();
            beta[s] = (db - n * n.dot(db)) / sum.norm();
          } else {
            Vec3 u = Vec3::Zero();
            for (int a = 0; a < 3; ++a) {
              const Vec3& va = ico_->vertex(f[a]);
              u += pr.loc.bary[a] * geometry::parallel_transport(va, pr.p, geometry::project_tangent(va, b.field[f[a]]));
            }
            beta[s] = geometry::project_tangent(pr.p, u);
          }
        }
        div += frames[i][k].dot(beta[0] - beta[1]) * scale;
      }
      e.divergence[static_cast<Eigen::Index>(i)] = div;
    }
    elements_.push_back(std::move(e));
  }
}

void SphereLinearizer::check(const HalfDensity& q, int hemisphere) const {
  const auto kind = q.domain.kind();
  if (kind != DomainKind::Sphere && kind != DomainKind::DualSphere) throw ValidationError("SphereLinearizer: not a sphere domain");
  if (q.domain.ico().num_vertices() != ico_->num_vertices()) throw ValidationError("SphereLinearizer: icosphere mismatch");
  const int hemispheres = kind == DomainKind::Sphere ? 1 : 2;
  if (hemisphere < 0 || hemisphere >= hemispheres) throw ValidationError("SphereLinearizer: hemisphere out of range");
}

Matrix SphereLinearizer::dphi(const HalfDensity& q, std::size_t k, int hemisphere) const {
  check(q, hemisphere);
  if (k >= elements_.size()) throw ValidationError("SphereLinearizer: basis index out of range");
  const Element& e = elements_[k];
  const auto v = static_cast<Eigen::Index>(ico_->num_vertices());
  const Eigen::Index off = hemisphere * v;
  const Eigen::Index n = q.values.rows();
  Matrix s = Matrix::Zero(n, n);
  Eigen::VectorXd div = Eigen::VectorXd::Zero(n);
  for (Eigen::Index i = 0; i < v; ++i) {
    const auto& nb = neighbors_[static_cast<std::size_t>(i)];
    const auto& slot = e.slot[static_cast<std::size_t>(i)];
    const auto& coef = e.coef[static_cast<std::size_t>(i)];
    for (int t = 0; t < 6; ++t) {
      if (coef[t] != 0.0) s.col(off + i) += coef[t] * q.values.col(off + nb[static_cast<std::size_t>(slot[t])]);
    }
    div[off + i] = e.divergence[i];
  }
  Matrix out = s + s.transpose();
  out += 0.5 * q.values.cwiseProduct(div.replicate(1, n) + div.transpose().replicate(n, 1));
  return out;
}

Eigen::VectorXd SphereLinearizer::gradient(const HalfDensity& q1, const HalfDensity& q2, int hemisphere) const {
  check(q1, hemisphere);
  if (q1.domain != q2.domain) throw ValidationError("gradient_H: domain mismatch");
  const Eigen::VectorXd& w = q1.domain.weights();
  const auto v = static_cast<Eigen::Index>(ico_->num_vertices());
  const Eigen::Index off = hemisphere * v;
  const Matrix r = q1.values - q2.values;
  const Matrix rw = w.asDiagonal() * r;
  // R(i, a) = sum_j w_j r(i, j) q2(a, j) for every stencil vertex a of i.
  std::vector<std::vector<double>> rr(static_cast<std::size_t>(v));
  Eigen::VectorXd qq(v);
  for (Eigen::Index i = 0; i < v; ++i) {
    const auto& nb = neighbors_[static_cast<std::size_t>(i)];
    auto& row = rr[static_cast<std::size_t>(i)];
    row.resize(nb.size());
    const auto ri = rw.col(off + i);
    for (std::size_t s = 0; s < nb.size(); ++s) row[s] = ri.dot(q2.values.col(off + nb[s]));
    qq[i] = ri.dot(q2.values.col(off + i));
  }
  const Eigen::VectorXd wv = w.segment(off, v);
  Eigen::VectorXd out(static_cast<Eigen::Index>(elements_.size()));
  for (std::size_t k = 0; k < elements_.size(); ++k) {
    const Element& e = elements_[k];
    double total = 0.0;
    for (Eigen::Index i = 0; i < v; ++i) {
      const auto& slot = e.slot[static_cast<std::size_t>(i)];
      const auto& coef = e.coef[static_cast<std::size_t>(i)];
      const auto& row = rr[static_cast<std::size_t>(i)];
      double p = 0.0;
      for (int t = 0; t < 6; ++t) p += coef[t] * row[static_cast<std::size_t>(slot[t])];
      total += wv[i] * (2.0 * p + e.divergence[i] * qq[i]);
    }
    out[static_cast<Eigen::Index>(k)] = -2.0 * total;
  }
  return out;
}

GradientSphere gradient_H(const HalfDensity& q1, const HalfDensity& q2, const SphereLinearizer& lin, int hemisphere) {
  return assemble(lin.basis(), lin.gradient(q1, q2, hemisphere));
}

GradientSphere gradient_H_explicit(const HalfDensity& q1, const HalfDensity& q2, const SphereLinearizer& lin,
                                   int hemisphere) {
  Eigen::VectorXd coeff(static_cast<Eigen::Index>(lin.size()));
  for (std::size_t k = 0; k < lin.size(); ++k) {
    coeff[static_cast<Eigen::Index>(k)] = directional_derivative(q1, q2, lin.dphi(q2, k, hemisphere));
  }
  return assemble(lin.basis(), std::move(coeff));
}

const SphereLinearizer& sphere_linearizer(int level, int max_degree, double spatial_step, double jacobian_step,
                                          warp::SphereInterpolation mode) {
  const auto& basis = harmonic_basis(level, max_degree);
  static std::mutex mutex;
  static std::map<std::tuple<int, int, double, double, int>, std::unique_ptr<SphereLinearizer>> cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto& slot = cache[{level, max_degree, spatial_step, jacobian_step, static_cast<int>(mode)}];
  if (!slot) slot = std::make_unique<SphereLinearizer>(geometry::icosphere(level), basis, spatial_step, jacobian_step, mode);
  return *slot;
}

const std::vector<basis::HarmonicBasisElement>& harmonic_basis(int level, int max_degree) {
  static std::mutex mutex;
  static std::map<std::pair<int, int>, std::unique_ptr<std::vector<basis::HarmonicBasisElement>>> cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto& slot = cache[{level, max_degree}];
  if (!slot) {
    slot = std::make_unique<std::vector<basis::HarmonicBasisElement>>(
        basis::harmonic_tangent_basis(*geometry::icosphere(level), max_degree));
  }
  return *slot;
}

namespace {

// One backtracking gradient step. Returns false when no step decreased H.
template <typename Warp, typename Step, typename Act>
bool line_search(const RegistrationConfig& cfg, const HalfDensity& q1, Warp& total, HalfDensity& current, double& cost,
                 Step&& step, Act&& act, Trace& trace) {
  double sigma = cfg.step_size;
  for (int attempt = 0; attempt <= cfg.max_backoffs; ++attempt, sigma *= cfg.step_decay) {
    try {
      Warp candidate = step(sigma);
      HalfDensity moved = act(candidate);
      const double c = density::alignment_cost(q1, moved);
      if (c < cost) {
        total = std::move(candidate);
        current = std::move(moved);
        cost = c;
        trace.step.push_back(sigma);
        return true;
      }
    } catch (const DiffeomorphismError&) {
    }
  }
  return false;
}

void require_pair(const HalfDensity& q1, const HalfDensity& q2, DomainKind kind, const char* who) {
  if (q1.domain != q2.domain) throw ValidationError(std::string(who) + ": domain mismatch");
  if (q1.domain.kind() != kind) throw ValidationError(std::string(who) + ": wrong domain kind " + q1.domain.describe());
}

}  // namespace

Result1D register_interval(const HalfDensity& q1, const HalfDensity& q2, const RegistrationConfig& cfg_in,
                           const warp::Warp1D* init) {
  require_pair(q1, q2, DomainKind::Interval, "register_interval");
  const RegistrationConfig cfg = cfg_in.resolved(DomainKind::Interval);
  cfg.validate();
  const std::size_t n = q1.domain.size();
  const auto basis = basis::sine_basis(q1.domain.grid(), std::min<int>(cfg.basis_size, static_cast<int>(n / 2)));
  Result1D res{init ? *init : warp::Warp1D::identity(n), {}};
  HalfDensity current = warp::act(q2, res.warp);
  double cost = density::alignment_cost(q1, current);
  res.trace.cost.push_back(cost);
  res.trace.stop_reason = "max iterations";
  for (int it = 0; it < cfg.max_iterations; ++it) {
    const Gradient1D g = cfg.slopes == SlopeScheme::Warped
                             ? gradient_H(q1, current, warp::action_slopes(q2, res.warp), basis)
                             : gradient_H(q1, current, basis, cfg.slopes);
    res.trace.gradient_norm.push_back(g.norm);
    if (g.norm <= cfg.tolerance) {
      res.trace.converged = true;
      res.trace.stop_reason = "gradient below tolerance";
      break;
    }
    const bool ok = line_search(
        cfg, q1, res.warp, current, cost,
        [&](double sigma) { return warp::compose(res.warp, warp::incremental_warp(g.field, g.derivative, -sigma)); },
        [&](const warp::Warp1D& w) { return warp::act(q2, w); }, res.trace);
    if (!ok) {
      res.trace.stop_reason = "line search failed";
      break;
    }
    res.trace.cost.push_back(cost);
    ++res.trace.iterations;
  }
  return res;
}

HalfDensity restrict_level(const HalfDensity& q, int level) {
  const auto kind = q.domain.kind();
  if (kind == DomainKind::Interval) throw ValidationError("restrict_level: interval domain");
  if (level > q.domain.level()) throw ValidationError("restrict_level: target level is finer than the source");
  density::Domain d = kind == DomainKind::Sphere ? density::Domain::sphere(level) : density::Domain::dual_sphere(level);
  const auto vc = static_cast<Eigen::Index>(d.ico().num_vertices());
  const auto vf = static_cast<Eigen::Index>(q.domain.ico().num_vertices());
  Matrix m(d.size(), d.size());
  const int copies = kind == DomainKind::Sphere ? 1 : 2;
  for (int a = 0; a < copies; ++a) {
    for (int b = 0; b < copies; ++b) m.block(a * vc, b * vc, vc, vc) = q.values.block(a * vf, b * vf, vc, vc);
  }
  density::normalize_l2(d, m);
  return {d, std::move(m)};
}

warp::SphereWarp prolong(const warp::SphereWarp& coarse, int level) {
  auto ico = geometry::icosphere(level);
  std::vector<Vec3> t(ico->num_vertices());
  for (std::size_t v = 0; v < t.size(); ++v) t[v] = coarse(ico->vertex(v));
  return warp::SphereWarp(ico, std::move(t), coarse.mode());
}

namespace {

std::function<GradientSphere(const HalfDensity&, const HalfDensity&, int)> gradient_route(int level,
                                                                                       const RegistrationConfig& cfg) {
  if (cfg.linearization == Linearization::Frame) {
    const auto* basis = &harmonic_basis(level, cfg.basis_size);
    const double eps = cfg.spatial_step;
    return [basis, eps](const HalfDensity& a, const HalfDensity& b, int h) { return gradient_H(a, b, *basis, eps, h); };
  }
  const auto* lin = &sphere_linearizer(level, cfg.basis_size, cfg.spatial_step, cfg.jacobian_step, cfg.interpolation);
  return [lin](const HalfDensity& a, const HalfDensity& b, int h) { return gradient_H(a, b, *lin, h); };
}

ResultSphere register_sphere_single(const HalfDensity& q1, const HalfDensity& q2, const RegistrationConfig& cfg,
                                    const warp::SphereWarp* init) {
  const auto ico = q1.domain.ico_ptr();
  const auto gradient = gradient_route(q1.domain.level(), cfg);
  const warp::SphereActionOptions opts{cfg.jacobian_step, cfg.renormalize};
  ResultSphere res{init ? *init : warp::SphereWarp::identity(ico, cfg.interpolation), {}};
  auto act = [&](const warp::SphereWarp& w) { return warp::act(q2, w, opts); };
  HalfDensity current = act(res.warp);
  double cost = density::alignment_cost(q1, current);
  res.trace.cost.push_back(cost);
  res.trace.stop_reason = "max iterations";
  for (int it = 0; it < cfg.max_iterations; ++it) {
    const GradientSphere g = gradient(q1, current, 0);
    res.trace.gradient_norm.push_back(g.norm);
    if (g.norm <= cfg.tolerance) {
      res.trace.converged = true;
      res.trace.stop_reason = "gradient below tolerance";
      break;
    }
    const bool ok = line_search(
        cfg, q1, res.warp, current, cost,
        [&](double sigma) {
          auto inc = warp::incremental_warp(ico, g.field, -sigma, res.warp.mode());
          inc.jacobians(cfg.jacobian_step);
          return warp::compose(res.warp, inc);
        },
        act, res.trace);
    if (!ok) {
      res.trace.stop_reason = "line search failed";
      break;
    }
    res.trace.cost.push_back(cost);
    ++res.trace.iterations;
  }
  return res;
}

ResultDual register_dual_single(const HalfDensity& q1, const HalfDensity& q2, const RegistrationConfig& cfg,
                                const warp::DualWarp* init) {
  const auto ico = q1.domain.ico_ptr();
  const auto gradient = gradient_route(q1.domain.level(), cfg);
  const warp::SphereActionOptions opts{cfg.jacobian_step, cfg.renormalize};
  ResultDual res{init ? *init : warp::DualWarp::identity(ico, cfg.interpolation), {}};
  auto act = [&](const warp::DualWarp& w) { return warp::act(q2, w, opts); };
  HalfDensity current = act(res.warp);
  double cost = density::alignment_cost(q1, current);
  res.trace.cost.push_back(cost);
  res.trace.stop_reason = "max iterations";
  for (int it = 0; it < cfg.max_iterations; ++it) {
    double worst = 0.0;
    bool moved = false;
    for (int h = 0; h < 2; ++h) {
      const GradientSphere g = gradient(q1, current, h);
      worst = std::max(worst, g.norm);
      if (g.norm <= cfg.tolerance) continue;
      const bool ok = line_search(
          cfg, q1, res.warp, current, cost,
          [&](double sigma) {
            warp::DualWarp next = res.warp;
            warp::SphereWarp& part = h == 0 ? next.first : next.second;
            auto inc = warp::incremental_warp(ico, g.field, -sigma, part.mode());
            inc.jacobians(cfg.jacobian_step);
            part = warp::compose(part, inc);
            return next;
          },
          act, res.trace);
      moved = moved || ok;
    }
    res.trace.gradient_norm.push_back(worst);
    if (worst <= cfg.tolerance) {
      res.trace.converged = true;
      res.trace.stop_reason = "gradient below tolerance";
      break;
    }
    if (!moved) {
      res.trace.stop_reason = "line search failed";
      break;
    }
    res.trace.cost.push_back(cost);
    ++res.trace.iterations;
  }
  return res;
}

template <typename Result, typename Warp, typename Single, typename Prolong>
Result multiresolution(const HalfDensity& q1, const HalfDensity& q2, const RegistrationConfig& cfg, const Warp* init,
                       Single&& single, Prolong&& up) {
  const int top = q1.domain.level();
  if (!cfg.multires || top <= 2 || init) return single(q1, q2, cfg, init);
  std::optional<Result> res;
  int iterations = 0;
  std::vector<double> steps;
  for (int level = 2; level <= top; ++level) {
    const HalfDensity a = level == top ? q1 : restrict_level(q1, level);
    const HalfDensity b = level == top ? q2 : restrict_level(q2, level);
    std::optional<Warp> start;
    if (res) start = up(res->warp, level);
    res.emplace(single(a, b, cfg, start ? &*start : nullptr));
    iterations += res->trace.iterations;
    steps.insert(steps.end(), res->trace.step.begin(), res->trace.step.end());
  }
  // Cost traces of coarser levels are not comparable with the finest one.
  res->trace.iterations = iterations;
  res->trace.step = std::move(steps);
  return std::move(*res);
}

}  // namespace

ResultSphere register_sphere(const HalfDensity& q1, const HalfDensity& q2, const RegistrationConfig& cfg_in,
                             const warp::SphereWarp* init) {
  require_pair(q1, q2, DomainKind::Sphere, "register_sphere");
  const RegistrationConfig cfg = cfg_in.resolved(DomainKind::Sphere);
  cfg.validate();
  return multiresolution<ResultSphere>(q1, q2, cfg, init, register_sphere_single,
                                       [](const warp::SphereWarp& w, int level) { return prolong(w, level); });
}

ResultDual register_dual(const HalfDensity& q1, const HalfDensity& q2, const RegistrationConfig& cfg_in,
                         const warp::DualWarp* init) {
  require_pair(q1, q2, DomainKind::DualSphere, "register_dual");
  const RegistrationConfig cfg = cfg_in.resolved(DomainKind::DualSphere);
  cfg.validate();
  return multiresolution<ResultDual>(q1, q2, cfg, init, register_dual_single, [](const warp::DualWarp& w, int level) {
    return warp::DualWarp{prolong(w.first, level), prolong(w.second, level)};
  });
}

AnyResult register_pair(const DensityField& f1, const DensityField& f2, const RegistrationConfig& cfg) {
  const HalfDensity q1 = density::q_map(f1);
  const HalfDensity q2 = density::q_map(f2);
  switch (f1.domain.kind()) {
    case DomainKind::Interval:
      return register_interval(q1, q2, cfg);
    case DomainKind::Sphere:
      return register_sphere(q1, q2, cfg);
    case DomainKind::DualSphere:
      return register_dual(q1, q2, cfg);
  }
  throw ValidationError("register_pair: unknown domain");
}

}  // namespace conalign::registration
