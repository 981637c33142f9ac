#pragma once

#include "conalign/density.hpp"
#include "conalign/registration.hpp"
#include "conalign/warp.hpp"

#include <string>
#include <variant>
#include <vector>

// Population templates: Karcher mean of orbits, orbit centering and the
// complete registration pipeline.
namespace conalign::population {

using density::DensityField;
using density::HalfDensity;
using density::Matrix;

using AnyWarp = std::variant<warp::Warp1D, warp::SphereWarp, warp::DualWarp>;

enum class Statistic { Mean, Median };

struct TemplateConfig {
  registration::RegistrationConfig reg;
  double eps1 = 1e-3;  // stop when |mean shooting vector| <= eps1
  double eps2 = 0.3;   // step along the mean shooting vector
  int max_outer = 50;
  bool register_subjects = true;  // false: plain Karcher mean on the Hilbert sphere
  Statistic statistic = Statistic::Mean;

  void validate() const;
};

/// cos(t|v|) mu + sin(t|v|) v/|v|.
HalfDensity hilbert_exp(const HalfDensity& mu, const Matrix& v, double t = 1.0);
/// (theta / sin theta)(q - cos theta mu); throws DomainError when antipodal.
Matrix hilbert_log(const HalfDensity& mu, const HalfDensity& q);

AnyWarp identity_warp(const density::Domain& domain);
HalfDensity act(const HalfDensity& q, const AnyWarp& w, const registration::RegistrationConfig& cfg = {});
AnyWarp invert(const AnyWarp& w);
/// Root mean square displacement: L2 on [0,1], area-normalized geodesic on spheres.
double warp_distance(const AnyWarp& a, const AnyWarp& b);

warp::Warp1D karcher_mean_warps(const std::vector<warp::Warp1D>& warps);
warp::SphereWarp karcher_mean_warps(const std::vector<warp::SphereWarp>& warps);
warp::DualWarp karcher_mean_warps(const std::vector<warp::DualWarp>& warps);
AnyWarp karcher_mean_warps(const std::vector<AnyWarp>& warps);

struct SubjectStatus {
  bool failed = false;
  bool converged = false;
  int iterations = 0;
  double final_cost = 0.0;
  std::string message;
};

struct KarcherResult {
  HalfDensity mean;
  std::vector<AnyWarp> warps;       // subject warps aligning q_j to the returned mean's predecessor
  std::vector<double> update_norms;  // |v bar| per outer iteration
  std::vector<SubjectStatus> subjects;
  int iterations = 0;
  bool converged = false;
};

/// Warp gamma with q * gamma close to mu.
AnyWarp align_to(const HalfDensity& mu, const HalfDensity& q, const registration::RegistrationConfig& cfg,
                 const AnyWarp* init = nullptr, SubjectStatus* status = nullptr);

/// Karcher mean of the orbits [q_j].
KarcherResult karcher_mean_orbits(const std::vector<HalfDensity>& qs, const TemplateConfig& cfg);

/// Sum of squared orbit distances d([mu],[q_j])^2 with the one-sided alignment.
double frechet_objective(const HalfDensity& mu, const std::vector<HalfDensity>& qs, const TemplateConfig& cfg);

struct CenterResult {
  HalfDensity center;
  AnyWarp mean_warp;
  std::vector<AnyWarp> warps;  // alignments of q_j to the uncentered mean
};

CenterResult center_of_orbit(const HalfDensity& mu, const std::vector<HalfDensity>& qs, const TemplateConfig& cfg,
                             const std::vector<AnyWarp>* init = nullptr);

struct TemplateResult {
  HalfDensity template_q;
  std::vector<AnyWarp> warps;          // gamma*_j
  std::vector<DensityField> aligned;   // f_j * gamma*_j
  std::vector<SubjectStatus> subjects;
  std::vector<double> update_norms;
  bool karcher_converged = false;
  AnyWarp centering_warp;              // Karcher mean of the pre-centering warps
  double centering_residual = 0.0;     // distance of mean(gamma*_j) from the identity
};

TemplateResult full_pipeline(const std::vector<DensityField>& fs, const TemplateConfig& cfg);

}  // namespace conalign::population
