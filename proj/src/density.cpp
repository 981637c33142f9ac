#include "conalign/density.hpp"

#include "conalign/error.hpp"

#include <cmath>
#include <sstream>

namespace conalign::density {

namespace {

void require_same(const Domain& a, const Domain& b, const char* what) {
  if (a != b) throw ValidationError(std::string(what) + ": domain mismatch (" + a.describe() + " vs " + b.describe() + ")");
}

}  // namespace

Domain Domain::interval(std::size_t n) {
  Domain d;
  d.kind_ = DomainKind::Interval;
  d.grid_ = geometry::Grid1D::uniform(n);
  d.weights_ = Eigen::Map<const Vector>(d.grid_.weights.data(), static_cast<Eigen::Index>(n));
  return d;
}

Domain Domain::sphere(int level) {
  Domain d;
  d.kind_ = DomainKind::Sphere;
  d.level_ = level;
  d.ico_ = geometry::icosphere(level);
  const auto& w = d.ico_->vertex_weights();
  d.weights_ = Eigen::Map<const Vector>(w.data(), static_cast<Eigen::Index>(w.size()));
  return d;
}

Domain Domain::dual_sphere(int level) {
  Domain d;
  d.kind_ = DomainKind::DualSphere;
  d.level_ = level;
  d.ico_ = geometry::icosphere(level);
  const auto& w = d.ico_->vertex_weights();
  const auto v = static_cast<Eigen::Index>(w.size());
  d.weights_.resize(2 * v);
  d.weights_.head(v) = Eigen::Map<const Vector>(w.data(), v);
  d.weights_.tail(v) = d.weights_.head(v);
  return d;
}

Domain Domain::parse(const std::string& spec) {
  const auto colon = spec.find(':');
  const std::string kind = spec.substr(0, colon);
  if (colon == std::string::npos) throw ValidationError("domain '" + spec + "' must look like interval:n, sphere:G or dual:G");
  long value = 0;
  try {
    std::size_t used = 0;
    value = std::stol(spec.substr(colon + 1), &used);
    if (used != spec.size() - colon - 1) throw std::invalid_argument("trailing");
  } catch (const std::exception&) {
    throw ValidationError("domain '" + spec + "': size is not an integer");
  }
  if (kind == "interval") return interval(static_cast<std::size_t>(std::max(0L, value)));
  if (value < 0) throw ValidationError("domain '" + spec + "': negative level");
  if (kind == "sphere") return sphere(static_cast<int>(value));
  if (kind == "dual") return dual_sphere(static_cast<int>(value));
  throw ValidationError("unknown domain kind '" + kind + "'");
}

const geometry::Grid1D& Domain::grid() const {
  if (kind_ != DomainKind::Interval) throw ValidationError("domain " + describe() + " has no interval grid");
  return grid_;
}

const geometry::Icosphere& Domain::ico() const {
  if (!ico_) throw ValidationError("domain " + describe() + " has no icosphere");
  return *ico_;
}

std::size_t Domain::hemisphere_size() const { return ico().num_vertices(); }

int Domain::hemisphere(std::size_t node) const {
  if (kind_ != DomainKind::DualSphere) return 0;
  return node < ico_->num_vertices() ? 0 : 1;
}

std::string Domain::describe() const {
  switch (kind_) {
    case DomainKind::Interval:
      return "interval:" + std::to_string(size());
    case DomainKind::Sphere:
      return "sphere:" + std::to_string(level_);
    case DomainKind::DualSphere:
      return "dual:" + std::to_string(level_);
  }
  return "?";
}

bool Domain::operator==(const Domain& other) const {
  return kind_ == other.kind_ && level_ == other.level_ && size() == other.size();
}

void DensityField::validate(double integral_tolerance) const {
  const auto n = static_cast<Eigen::Index>(domain.size());
  if (values.rows() != n || values.cols() != n) throw ValidationError("density: matrix shape does not match domain");
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const double v = values(i, j);
      if (!std::isfinite(v)) throw ValidationError("density: non-finite value");
      if (v < 0.0) throw ValidationError("density: negative value at (" + std::to_string(i) + "," + std::to_string(j) + ")");
      if (v != values(j, i)) throw ValidationError("density: not symmetric");
    }
  }
  const double total = integral(domain, values);
  if (std::abs(total - 1.0) > integral_tolerance) {
    std::ostringstream msg;
    msg << "density: integral " << total << " differs from 1";
    throw ValidationError(msg.str());
  }
}

void HalfDensity::validate(double norm_tolerance) const {
  const auto n = static_cast<Eigen::Index>(domain.size());
  if (values.rows() != n || values.cols() != n) throw ValidationError("half-density: matrix shape does not match domain");
  if (!values.allFinite()) throw ValidationError("half-density: non-finite value");
  if (values != values.transpose()) throw ValidationError("half-density: not symmetric");
  const double norm = l2_norm(domain, values);
  if (std::abs(norm - 1.0) > norm_tolerance) {
    std::ostringstream msg;
    msg << "half-density: norm " << norm << " differs from 1";
    throw ValidationError(msg.str());
  }
}

double q_transform(double s) { return s >= 0.0 ? std::sqrt(s) : -std::sqrt(-s); }

double q_inverse(double q) { return q * std::abs(q); }

HalfDensity q_map(const DensityField& f) {
  return {f.domain, f.values.unaryExpr([](double s) { return q_transform(s); })};
}

DensityField q_unmap(const HalfDensity& q) {
  return {q.domain, q.values.unaryExpr([](double s) { return q_inverse(s); })};
}

double inner(const Domain& d, const Matrix& a, const Matrix& b) {
  const Vector& w = d.weights();
  double total = 0.0;
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    double col = 0.0;
    for (Eigen::Index i = 0; i < a.rows(); ++i) col += w[i] * a(i, j) * b(i, j);
    total += w[j] * col;
  }
  return total;
}

double integral(const Domain& d, const Matrix& a) {
  const Vector& w = d.weights();
  return w.dot(a * w);
}

double l2_norm(const Domain& d, const Matrix& a) { return std::sqrt(inner(d, a, a)); }

double normalize_integral(const Domain& d, Matrix& a) {
  const double total = integral(d, a);
  if (!(total > 0.0)) throw ValidationError("cannot normalize a density with nonpositive integral");
  a /= total;
  return total;
}

double normalize_l2(const Domain& d, Matrix& a) {
  const double norm = l2_norm(d, a);
  if (!(norm > 0.0)) throw ValidationError("cannot normalize a zero half-density");
  a /= norm;
  return norm;
}

void mirror_upper(Matrix& a) {
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    for (Eigen::Index i = j + 1; i < a.rows(); ++i) a(i, j) = a(j, i);
  }
}

double riemannian_distance(const HalfDensity& q1, const HalfDensity& q2) {
  require_same(q1.domain, q2.domain, "riemannian_distance");
  return std::acos(std::clamp(inner(q1.domain, q1.values, q2.values), -1.0, 1.0));
}

double alignment_cost(const HalfDensity& q1, const HalfDensity& q2) {
  require_same(q1.domain, q2.domain, "alignment_cost");
  const Matrix diff = q1.values - q2.values;
  return inner(q1.domain, diff, diff);
}

double region_connectivity(const DensityField& f, const std::vector<std::size_t>& e1,
                           const std::vector<std::size_t>& e2) {
  const Vector& w = f.domain.weights();
  const std::size_t n = f.domain.size();
  double total = 0.0;
  for (std::size_t i : e1) {
    if (i >= n) throw ValidationError("region_connectivity: node index out of range");
    double row = 0.0;
    for (std::size_t j : e2) {
      if (j >= n) throw ValidationError("region_connectivity: node index out of range");
      row += w[static_cast<Eigen::Index>(j)] * f.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }
    total += w[static_cast<Eigen::Index>(i)] * row;
  }
  return total;
}

InterpRow interp_row(const geometry::Icosphere& ico, const Vec3& p, int offset) {
  const auto loc = ico.locate(p);
  const auto& face = ico.faces()[static_cast<std::size_t>(loc.face)];
  InterpRow row;
  for (int k = 0; k < 3; ++k) {
    row.idx[k] = face[k] + offset;
    row.w[k] = loc.bary[k];
  }
  return row;
}

Matrix resample(const Matrix& q, const std::vector<InterpRow>& rx, const std::vector<InterpRow>& ry) {
  // Stage 1 along columns (y), then along rows (x).
  const auto nx = static_cast<Eigen::Index>(rx.size());
  const auto ny = static_cast<Eigen::Index>(ry.size());
  Matrix tmp(q.rows(), ny);
  for (Eigen::Index j = 0; j < ny; ++j) {
    const auto& r = ry[static_cast<std::size_t>(j)];
    tmp.col(j) = r.w[0] * q.col(r.idx[0]) + r.w[1] * q.col(r.idx[1]) + r.w[2] * q.col(r.idx[2]);
  }
  Matrix out(nx, ny);
  for (Eigen::Index i = 0; i < nx; ++i) {
    const auto& r = rx[static_cast<std::size_t>(i)];
    out.row(i) = r.w[0] * tmp.row(r.idx[0]) + r.w[1] * tmp.row(r.idx[1]) + r.w[2] * tmp.row(r.idx[2]);
  }
  return out;
}

double interpolate_bivariate(const HalfDensity& q, const Vec3& x, const Vec3& y) {
  if (q.domain.kind() != DomainKind::Sphere) throw ValidationError("interpolate_bivariate needs a sphere domain");
  const auto& ico = q.domain.ico();
  const InterpRow ax = interp_row(ico, x);
  const InterpRow ay = interp_row(ico, y);
  Eigen::Matrix3d b;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) b(r, c) = q.values(ax.idx[r], ay.idx[c]);
  }
  Eigen::Matrix3d t;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) t(r, c) = (ax.w[r] * ay.w[c]) * b(r, c);
  }
  // Pairwise sums keep the result bitwise symmetric in x and y.
  return (t(0, 0) + t(1, 1) + t(2, 2)) + ((t(0, 1) + t(1, 0)) + (t(0, 2) + t(2, 0)) + (t(1, 2) + t(2, 1)));
}

double spatial_derivative(const HalfDensity& q, const Vec3& x, const Vec3& y, const Vec3& bx, const Vec3& by,
                          double eps) {
  const double base = interpolate_bivariate(q, x, y);
  double total = 0.0;
  const auto fx = geometry::tangent_frame(x);
  const auto fy = geometry::tangent_frame(y);
  for (int k = 0; k < 2; ++k) {
    const double ax = fx[k].dot(bx);
    const double ay = fy[k].dot(by);
    if (ax != 0.0) total += ax * (interpolate_bivariate(q, geometry::sphere_exp(x, eps * fx[k]), y) - base) / eps;
    if (ay != 0.0) total += ay * (interpolate_bivariate(q, x, geometry::sphere_exp(y, eps * fy[k])) - base) / eps;
  }
  return total;
}

}  // namespace conalign::density
