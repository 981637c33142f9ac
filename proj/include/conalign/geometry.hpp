#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <cstddef>
#include <memory>
#include <vector>

namespace conalign::geometry {

using Vec3 = Eigen::Vector3d;

/// Uniform grid on [0,1] with trapezoid quadrature weights.
struct Grid1D {
  std::vector<double> points;
  std::vector<double> weights;

  static Grid1D uniform(std::size_t n);

  std::size_t size() const { return points.size(); }
  double spacing() const { return 1.0 / static_cast<double>(points.size() - 1); }
  bool operator==(const Grid1D& other) const { return points.size() == other.points.size(); }
};

/// Tangent vector `vec` attached to the unit vector `base`.
struct SphereTangent {
  Vec3 base;
  Vec3 vec;
};

/// Result of point location on an icosphere.
struct Location {
  int face = -1;
  std::array<double, 3> bary{0.0, 0.0, 0.0};
  // Input was not unit length and had to be normalized first.
  bool renormalized = false;
};

/// Recursively subdivided icosahedron projected to the unit sphere.
///
/// Vertex order is stable: the 12 icosahedron vertices first, then the edge
/// midpoints of every subdivision pass in insertion order. The vertices of
/// level G therefore occupy the first 10*4^G+2 slots of every finer level.
/// Faces at level g+1 are stored so that face 4*f+k is the k-th child of face
/// f at level g, which is what the hierarchical point location walks.
class Icosphere {
 public:
  static constexpr int kMaxLevel = 8;

  /// Throws ResourceError for level > kMaxLevel.
  static Icosphere build(int level);

  int level() const { return level_; }
  std::size_t num_vertices() const { return vertices_.size(); }
  std::size_t num_faces() const { return faces_.back().size(); }

  const std::vector<Vec3>& vertices() const { return vertices_; }
  const Vec3& vertex(std::size_t i) const { return vertices_[i]; }
  const std::vector<std::array<int, 3>>& faces() const { return faces_.back(); }
  const std::vector<std::array<int, 3>>& faces_at_level(int g) const { return faces_.at(g); }
  const std::vector<double>& vertex_weights() const { return weights_; }
  const std::vector<std::array<int, 3>>& face_adjacency() const { return adjacency_; }
  /// Spherical (geodesic triangle) area of each finest-level face.
  const std::vector<double>& face_areas() const { return face_areas_; }
  /// Mean geodesic edge length, a convenient mesh-size scale.
  double mean_edge_length() const { return mean_edge_; }

  /// Face containing the radial projection of p and its gnomonic barycentric
  /// coordinates. Brute force for level <= 3, hierarchical descent above.
  Location locate(const Vec3& p) const;
  Location locate_brute_force(const Vec3& p) const;

 private:
  int level_ = 0;
  std::vector<Vec3> vertices_;
  std::vector<std::vector<std::array<int, 3>>> faces_;
  std::vector<double> weights_;
  std::vector<std::array<int, 3>> adjacency_;
  std::vector<double> face_areas_;
  double mean_edge_ = 0.0;
};

/// Shared, lazily built icosphere for a level. Thread safe.
std::shared_ptr<const Icosphere> icosphere(int level);

/// Normalized barycentric coordinates of the gnomonic projection of p onto the
/// plane through a, b, c. Coordinates sum to one; they are all nonnegative iff
/// p lies in the spherical triangle.
std::array<double, 3> gnomonic_barycentric(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

/// Area of the geodesic triangle abc on the unit sphere.
double spherical_triangle_area(const Vec3& a, const Vec3& b, const Vec3& c);

inline constexpr double kAntipodalTolerance = 1e-8;

Vec3 sphere_exp(const Vec3& x, const Vec3& v);
/// Throws DomainError when y is antipodal to x.
Vec3 sphere_log(const Vec3& x, const Vec3& y);
double geodesic_distance(const Vec3& x, const Vec3& y);
/// Transport of v from T_x to T_y along the shorter great circle.
/// Throws DomainError for antipodal points.
Vec3 parallel_transport(const Vec3& x, const Vec3& y, const Vec3& v);
/// Removes the normal component of v at x.
Vec3 project_tangent(const Vec3& x, const Vec3& v);

struct SphericalCoords {
  double theta = 0.0;  // polar angle in [0, pi]
  double phi = 0.0;    // azimuth in [0, 2 pi)
  bool at_pole = false;
};

Vec3 spherical_to_cartesian(double theta, double phi);
SphericalCoords cartesian_to_spherical(const Vec3& p);

/// Orthonormal frame (w_theta, w_phi) of T_x S^2 with w_theta x w_phi = x.
/// At the poles a fixed frame aligned with the x/y axes is returned.
std::array<Vec3, 2> tangent_frame(const Vec3& x);

}  // namespace conalign::geometry
