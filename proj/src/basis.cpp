#include "conalign/basis.hpp"

#include "conalign/error.hpp"

#include <cmath>
#include <complex>

namespace conalign::basis {

namespace {

std::vector<double> legendre_coefficients(int l) {
  std::vector<double> prev{1.0};
  if (l == 0) return prev;
  std::vector<double> cur{0.0, 1.0};
  for (int k = 1; k < l; ++k) {
    std::vector<double> next(static_cast<std::size_t>(k + 2), 0.0);
    for (std::size_t i = 0; i < cur.size(); ++i) next[i + 1] += (2.0 * k + 1.0) * cur[i];
    for (std::size_t i = 0; i < prev.size(); ++i) next[i] -= k * prev[i];
    for (double& c : next) c /= k + 1.0;
    prev = std::move(cur);
    cur = std::move(next);
  }
  return cur;
}

std::vector<double> differentiate(const std::vector<double>& c) {
  if (c.size() <= 1) return {0.0};
  std::vector<double> d(c.size() - 1);
  for (std::size_t i = 1; i < c.size(); ++i) d[i - 1] = static_cast<double>(i) * c[i];
  return d;
}

double horner(const std::vector<double>& c, double z) {
  double v = 0.0;
  for (auto it = c.rbegin(); it != c.rend(); ++it) v = v * z + *it;
  return v;
}

std::complex<double> ipow(std::complex<double> w, int m) {
  std::complex<double> r(1.0, 0.0);
  for (int k = 0; k < m; ++k) r *= w;
  return r;
}

}  // namespace

std::vector<BasisElement1D> sine_basis(const geometry::Grid1D& grid, int m) {
  const std::size_t n = grid.size();
  if (m < 1 || static_cast<std::size_t>(m) > n / 2) {
    throw ValidationError("sine_basis: need 1 <= M <= n/2 (M=" + std::to_string(m) + ", n=" + std::to_string(n) + ")");
  }
  std::vector<BasisElement1D> out;
  out.reserve(static_cast<std::size_t>(m));
  for (int k = 1; k <= m; ++k) {
    BasisElement1D b;
    b.k = k;
    b.values.resize(n);
    b.derivative.resize(n);
    const double w = k * M_PI;
    for (std::size_t i = 0; i < n; ++i) {
      b.values[i] = std::sqrt(2.0) * std::sin(w * grid.points[i]);
      b.derivative[i] = std::sqrt(2.0) * w * std::cos(w * grid.points[i]);
    }
    b.values.front() = 0.0;
    b.values.back() = 0.0;
    out.push_back(std::move(b));
  }
  return out;
}

std::vector<HarmonicIndex> harmonic_indices(int max_degree) {
  std::vector<HarmonicIndex> out;
  for (int l = 0; l <= max_degree; ++l) {
    out.push_back({l, 0, false});
    for (int m = 1; m <= l; ++m) {
      out.push_back({l, m, false});
      out.push_back({l, m, true});
    }
  }
  return out;
}

RealHarmonic::RealHarmonic(HarmonicIndex index) : index_(index) {
  if (index.l < 0 || index.m < 0 || index.m > index.l) throw ValidationError("harmonic: invalid (l, m)");
  if (index.m == 0 && index.imaginary) throw ValidationError("harmonic: Y_l^0 has no imaginary part");
  double ratio = 1.0;  // (l-m)!/(l+m)!
  for (int k = index.l - index.m + 1; k <= index.l + index.m; ++k) ratio /= k;
  scale_ = std::sqrt((2.0 * index.l + 1.0) / (4.0 * M_PI) * ratio);
  if (index.m > 0) scale_ *= std::sqrt(2.0);
  q_ = legendre_coefficients(index.l);
  for (int k = 0; k < index.m; ++k) q_ = differentiate(q_);
  dq_ = differentiate(q_);
}

double RealHarmonic::value(const Vec3& p) const {
  const std::complex<double> c = ipow({p.x(), p.y()}, index_.m);
  return scale_ * horner(q_, p.z()) * (index_.imaginary ? c.imag() : c.real());
}

Vec3 RealHarmonic::gradient(const Vec3& p) const {
  const int m = index_.m;
  const std::complex<double> c = ipow({p.x(), p.y()}, m);
  const double q = horner(q_, p.z());
  const double dq = horner(dq_, p.z());
  Vec3 g;
  if (m == 0) {
    g = Vec3(0.0, 0.0, dq);
  } else {
    const std::complex<double> c1 = ipow({p.x(), p.y()}, m - 1);
    if (index_.imaginary) {
      g = Vec3(q * m * c1.imag(), q * m * c1.real(), dq * c.imag());
    } else {
      g = Vec3(q * m * c1.real(), -q * m * c1.imag(), dq * c.real());
    }
  }
  g *= scale_;
  return geometry::project_tangent(p, g);
}

Eigen::MatrixXd real_spherical_harmonics(int max_degree, const std::vector<Vec3>& points) {
  if (max_degree < 0 || max_degree > 20) throw ValidationError("real_spherical_harmonics: need 0 <= L <= 20");
  const auto idx = harmonic_indices(max_degree);
  Eigen::MatrixXd table(static_cast<Eigen::Index>(points.size()), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t c = 0; c < idx.size(); ++c) {
    const RealHarmonic h(idx[c]);
    for (std::size_t r = 0; r < points.size(); ++r) {
      table(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = h.value(points[r]);
    }
  }
  return table;
}

Vec3 HarmonicBasisElement::evaluate(const Vec3& p) const {
  const Vec3 g = RealHarmonic(index).gradient(p) / norm;
  return kind == FieldKind::Gradient ? g : Vec3(g.cross(p));
}

double HarmonicBasisElement::divergence_at(const Vec3& p) const {
  if (kind == FieldKind::Rotated) return 0.0;
  return -index.l * (index.l + 1.0) * RealHarmonic(index).value(p) / norm;
}

std::vector<HarmonicBasisElement> harmonic_tangent_basis(const geometry::Icosphere& ico, int max_degree) {
  if (max_degree < 1 || max_degree > 20) throw ValidationError("harmonic_tangent_basis: need 1 <= L <= 20");
  const auto& verts = ico.vertices();
  const auto& w = ico.vertex_weights();
  std::vector<HarmonicBasisElement> out;
  for (const auto& index : harmonic_indices(max_degree)) {
    if (index.l == 0) continue;
    const RealHarmonic h(index);
    std::vector<Vec3> grad(verts.size());
    std::vector<double> val(verts.size());
    double sq = 0.0;
    for (std::size_t v = 0; v < verts.size(); ++v) {
      grad[v] = h.gradient(verts[v]);
      val[v] = h.value(verts[v]);
      sq += w[v] * grad[v].squaredNorm();
    }
    const double norm = std::sqrt(sq);
    HarmonicBasisElement g{index, FieldKind::Gradient, norm, {}, {}};
    HarmonicBasisElement r{index, FieldKind::Rotated, norm, {}, {}};
    g.field.resize(verts.size());
    r.field.resize(verts.size());
    g.divergence.resize(verts.size());
    r.divergence.assign(verts.size(), 0.0);
    for (std::size_t v = 0; v < verts.size(); ++v) {
      g.field[v] = grad[v] / norm;
      r.field[v] = g.field[v].cross(verts[v]);
      g.divergence[v] = -index.l * (index.l + 1.0) * val[v] / norm;
    }
    out.push_back(std::move(g));
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace conalign::basis
