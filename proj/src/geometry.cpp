#include "conalign/geometry.hpp"

#include "conalign/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <string>
#include <utility>

namespace conalign::geometry {

namespace {

constexpr double kLocateTolerance = 1e-12;

// Unnormalized Cramer coordinates of p in the basis (a, b, c).
std::array<double, 3> raw_barycentric(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 bc = b.cross(c);
  const double det = a.dot(bc);
  return {p.dot(bc) / det, a.dot(p.cross(c)) / det, a.dot(b.cross(p)) / det};
}

// Smallest normalized coordinate, or -inf when p projects through the
// antipodal cone of the face.
double containment_score(const std::array<double, 3>& raw) {
  const double sum = raw[0] + raw[1] + raw[2];
  if (!(sum > 0.0)) return -std::numeric_limits<double>::infinity();
  return std::min({raw[0], raw[1], raw[2]}) / sum;
}

std::array<double, 3> clamp_normalize(const std::array<double, 3>& raw) {
  std::array<double, 3> out{};
  double sum = 0.0;
  for (int k = 0; k < 3; ++k) {
    out[k] = std::max(raw[k], 0.0);
    sum += out[k];
  }
  for (double& v : out) v /= sum;
  return out;
}

std::vector<Vec3> base_vertices() {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> v = {{-1, t, 0}, {1, t, 0},   {-1, -t, 0}, {1, -t, 0}, {0, -1, t},  {0, 1, t},
                         {0, -1, -t}, {0, 1, -t}, {t, 0, -1},  {t, 0, 1},  {-t, 0, -1}, {-t, 0, 1}};
  for (auto& p : v) p.normalize();
  return v;
}

std::vector<std::array<int, 3>> base_faces(const std::vector<Vec3>& v) {
  std::vector<std::array<int, 3>> f = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                                       {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                                       {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                                       {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  // Orient every face counterclockwise seen from outside.
  for (auto& face : f) {
    const Vec3& a = v[face[0]];
    const Vec3& b = v[face[1]];
    const Vec3& c = v[face[2]];
    if ((b - a).cross(c - a).dot(a + b + c) < 0.0) std::swap(face[1], face[2]);
  }
  return f;
}

}  // namespace

Grid1D Grid1D::uniform(std::size_t n) {
  if (n < 2) throw ValidationError("Grid1D needs at least 2 points, got " + std::to_string(n));
  Grid1D g;
  g.points.resize(n);
  g.weights.assign(n, 1.0 / static_cast<double>(n - 1));
  for (std::size_t i = 0; i < n; ++i) g.points[i] = static_cast<double>(i) / static_cast<double>(n - 1);
  g.points.back() = 1.0;
  g.weights.front() *= 0.5;
  g.weights.back() *= 0.5;
  return g;
}

std::array<double, 3> gnomonic_barycentric(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  const auto raw = raw_barycentric(p, a, b, c);
  const double sum = raw[0] + raw[1] + raw[2];
  return {raw[0] / sum, raw[1] / sum, raw[2] / sum};
}

double spherical_triangle_area(const Vec3& a, const Vec3& b, const Vec3& c) {
  const double triple = std::abs(a.dot(b.cross(c)));
  const double denom = 1.0 + a.dot(b) + b.dot(c) + c.dot(a);
  return 2.0 * std::atan2(triple, denom);
}

Icosphere Icosphere::build(int level) {
  if (level < 0) throw ValidationError("icosphere level must be nonnegative");
  if (level > kMaxLevel) {
    throw ResourceError("icosphere level " + std::to_string(level) + " exceeds the memory guard (max " +
                        std::to_string(kMaxLevel) + ")");
  }
  Icosphere ico;
  ico.level_ = level;
  ico.vertices_ = base_vertices();
  ico.faces_.push_back(base_faces(ico.vertices_));

  for (int g = 0; g < level; ++g) {
    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      const int idx = static_cast<int>(ico.vertices_.size());
      ico.vertices_.push_back((ico.vertices_[a] + ico.vertices_[b]).normalized());
      midpoint.emplace(key, idx);
      return idx;
    };
    const auto& parents = ico.faces_.back();
    std::vector<std::array<int, 3>> children;
    children.reserve(parents.size() * 4);
    for (const auto& f : parents) {
      const int ab = mid(f[0], f[1]);
      const int bc = mid(f[1], f[2]);
      const int ca = mid(f[2], f[0]);
      children.push_back({f[0], ab, ca});
      children.push_back({ab, f[1], bc});
      children.push_back({ca, bc, f[2]});
      children.push_back({ab, bc, ca});
    }
    ico.faces_.push_back(std::move(children));
  }

  const auto& faces = ico.faces_.back();
  ico.face_areas_.resize(faces.size());
  ico.weights_.assign(ico.vertices_.size(), 0.0);
  for (std::size_t f = 0; f < faces.size(); ++f) {
    const auto& t = faces[f];
    const double area = spherical_triangle_area(ico.vertices_[t[0]], ico.vertices_[t[1]], ico.vertices_[t[2]]);
    ico.face_areas_[f] = area;
    for (int k = 0; k < 3; ++k) ico.weights_[t[k]] += area / 3.0;
  }

  std::map<std::pair<int, int>, std::vector<int>> edge_faces;
  for (std::size_t f = 0; f < faces.size(); ++f) {
    for (int k = 0; k < 3; ++k) {
      edge_faces[std::minmax(faces[f][k], faces[f][(k + 1) % 3])].push_back(static_cast<int>(f));
    }
  }
  ico.adjacency_.resize(faces.size());
  double edge_sum = 0.0;
  for (const auto& [edge, fs] : edge_faces) {
    edge_sum += geodesic_distance(ico.vertices_[edge.first], ico.vertices_[edge.second]);
  }
  ico.mean_edge_ = edge_sum / static_cast<double>(edge_faces.size());
  for (std::size_t f = 0; f < faces.size(); ++f) {
    for (int k = 0; k < 3; ++k) {
      const auto& fs = edge_faces[std::minmax(faces[f][k], faces[f][(k + 1) % 3])];
      ico.adjacency_[f][k] = fs[0] == static_cast<int>(f) ? fs[1] : fs[0];
    }
  }
  return ico;
}

Location Icosphere::locate_brute_force(const Vec3& p_in) const {
  Location loc;
  Vec3 p = p_in;
  if (std::abs(p.norm() - 1.0) > 1e-12) {
    p.normalize();
    loc.renormalized = true;
  }
  const auto& faces = faces_.back();
  double best = -std::numeric_limits<double>::infinity();
  int best_face = 0;
  std::array<double, 3> best_raw{};
  for (std::size_t f = 0; f < faces.size(); ++f) {
    const auto& t = faces[f];
    const auto raw = raw_barycentric(p, vertices_[t[0]], vertices_[t[1]], vertices_[t[2]]);
    const double score = containment_score(raw);
    if (score >= -kLocateTolerance) {
      loc.face = static_cast<int>(f);
      loc.bary = clamp_normalize(raw);
      return loc;
    }
    if (score > best) {
      best = score;
      best_face = static_cast<int>(f);
      best_raw = raw;
    }
  }
  loc.face = best_face;
  loc.bary = clamp_normalize(best_raw);
  return loc;
}

Location Icosphere::locate(const Vec3& p_in) const {
  if (level_ <= 3) return locate_brute_force(p_in);
  Location loc;
  Vec3 p = p_in;
  if (std::abs(p.norm() - 1.0) > 1e-12) {
    p.normalize();
    loc.renormalized = true;
  }
  int face = 0;
  std::array<double, 3> raw_best{};
  for (int g = 0; g <= level_; ++g) {
    const auto& faces = faces_[g];
    const int first = g == 0 ? 0 : 4 * face;
    const int count = g == 0 ? static_cast<int>(faces.size()) : 4;
    double best = -std::numeric_limits<double>::infinity();
    int chosen = first;
    for (int f = first; f < first + count; ++f) {
      const auto& t = faces[f];
      const auto raw = raw_barycentric(p, vertices_[t[0]], vertices_[t[1]], vertices_[t[2]]);
      const double score = containment_score(raw);
      if (score >= -kLocateTolerance) {
        chosen = f;
        raw_best = raw;
        break;
      }
      if (score > best) {
        best = score;
        chosen = f;
        raw_best = raw;
      }
    }
    face = chosen;
  }
  loc.face = face;
  loc.bary = clamp_normalize(raw_best);
  return loc;
}

std::shared_ptr<const Icosphere> icosphere(int level) {
  static std::mutex mutex;
  static std::map<int, std::shared_ptr<const Icosphere>> cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto it = cache.find(level);
  if (it != cache.end()) return it->second;
  auto ico = std::make_shared<const Icosphere>(Icosphere::build(level));
  cache.emplace(level, ico);
  return ico;
}

Vec3 sphere_exp(const Vec3& x, const Vec3& v) {
  const double theta = v.norm();
  if (theta < 1e-12) return x;
  return (std::cos(theta) * x + std::sin(theta) / theta * v).normalized();
}

Vec3 sphere_log(const Vec3& x, const Vec3& y) {
  const double c = std::clamp(x.dot(y), -1.0, 1.0);
  if (c < -1.0 + kAntipodalTolerance) throw DomainError("sphere_log: points are antipodal");
  const Vec3 u = y - c * x;
  const double s = u.norm();
  if (s < 1e-300) return Vec3::Zero();
  return std::atan2(s, c) / s * u;
}

double geodesic_distance(const Vec3& x, const Vec3& y) {
  return std::atan2(x.cross(y).norm(), x.dot(y));
}

Vec3 parallel_transport(const Vec3& x, const Vec3& y, const Vec3& v) {
  const double c = x.dot(y);
  if (c < -1.0 + kAntipodalTolerance) throw DomainError("parallel_transport: points are antipodal");
  return v - (y.dot(v) / (1.0 + c)) * (x + y);
}

Vec3 project_tangent(const Vec3& x, const Vec3& v) { return v - x.dot(v) * x; }

Vec3 spherical_to_cartesian(double theta, double phi) {
  return {std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), std::cos(theta)};
}

SphericalCoords cartesian_to_spherical(const Vec3& p) {
  SphericalCoords s;
  const double r = std::hypot(p.x(), p.y());
  s.theta = std::atan2(r, p.z());
  if (r < 1e-15) {
    s.at_pole = true;
    s.phi = 0.0;
    return s;
  }
  s.phi = std::atan2(p.y(), p.x());
  if (s.phi < 0.0) s.phi += 2.0 * M_PI;
  if (s.phi >= 2.0 * M_PI) s.phi = 0.0;
  return s;
}

std::array<Vec3, 2> tangent_frame(const Vec3& x) {
  const double r = std::hypot(x.x(), x.y());
  if (r < 1e-12) {
    if (x.z() > 0.0) return {Vec3(1, 0, 0), Vec3(0, 1, 0)};
    return {Vec3(-1, 0, 0), Vec3(0, 1, 0)};
  }
  const double cp = x.x() / r;
  const double sp = x.y() / r;
  const double ct = x.z() / x.norm();
  const double st = r / x.norm();
  return {Vec3(ct * cp, ct * sp, -st), Vec3(-sp, cp, 0.0)};
}

}  // namespace conalign::geometry
