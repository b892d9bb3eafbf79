#ifndef BUBBLELAB_MODELS_HPP
#define BUBBLELAB_MODELS_HPP

// Singularity models z_{lambda,a,R}: a stereographic bubble of scale lambda at
// a, glued through a radial cutoff to the Green's-function tail, projected
// to S^2 and rotated by R. Also the weight rho_z and the z-inner product.

#include "bubblelab/greens.hpp"
#include "bubblelab/torus.hpp"

#include <Eigen/Dense>

#include <array>
#include <stdexcept>

namespace bubblelab {

/// Radii on the unit square torus: iota = inj/2, rho = 2 iota, r = rho/4.
inline constexpr double kIota = 0.25;
inline constexpr double kChartRadius = 0.5;
inline constexpr double kCutoffRadius = 0.125;

class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct BubbleParams {
  TorusPoint a;
  double lambda = 1.0;
  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();

  /// Throws ModelError unless lambda >= 1 and R^T R = I to 1e-12.
  void validate() const;
};

/// Radial cutoff: 1 on |x| <= inner, 0 on |x| >= outer, quintic smoothstep
/// (C^2) in between.
struct CutoffProfile {
  double inner = kCutoffRadius;
  double outer = 2.0 * kCutoffRadius;

  double operator()(double r) const {
    if (r <= inner) return 1.0;
    if (r >= outer) return 0.0;
    const double t = (r - inner) / (outer - inner);
    return 1.0 - t * t * t * (10.0 + t * (-15.0 + 6.0 * t));
  }
};

/// Unnormalised model value z~ at chart displacement d, given grad j(d) and
/// grad j(0) (j = g + log|x|).
Eigen::Vector3d model_point(double lambda, const ChartDisplacement& d,
                            const Eigen::Vector2d& grad_regular,
                            const Eigen::Vector2d& grad_regular_origin,
                            const CutoffProfile& cutoff = {});

struct ModelField {
  int n = 0;
  BubbleParams params;
  Vec3Field z;
  double min_raw_norm = 0.0;  // min |z~| before projection
  bool under_resolved = false;  // lambda h > 1/4
};

ModelField build_z(const BubbleParams& params, const Grid& grid, const GreensSamples& greens,
                   const CutoffProfile& cutoff = {});
ModelField build_z(const BubbleParams& params, const Grid& grid, const GreensEvaluator& G,
                   const CutoffProfile& cutoff = {});

double rho_z(const BubbleParams& params, const TorusPoint& p);
ScalarField rho_z_field(const BubbleParams& params, const Grid& grid);

/// <V, W>_z = int grad V . grad W + rho_z^2 V . W, with forward differences
/// for the gradient term.
double z_inner(const Grid& grid, const Vec3Field& V, const Vec3Field& W,
               const BubbleParams& params);
double z_inner(const Grid& grid, const Vec3Field& V, const Vec3Field& W, const ScalarField& rho);
inline double z_norm(const Grid& grid, const Vec3Field& V, const BubbleParams& params) {
  return std::sqrt(z_inner(grid, V, V, params));
}

/// The six directions of T_z Z: d/dlambda, the two translations of a, and
/// the three infinitesimal rotations e_k x z. The differenced fields are
/// projected pointwise onto the tangent plane of z.
struct TangentBasis {
  static constexpr std::array<const char*, 6> names = {"dlambda", "da1", "da2",
                                                       "rot1", "rot2", "rot3"};
  std::array<Vec3Field, 6> fields;
};

TangentBasis tangent_basis(const BubbleParams& params, const Grid& grid, GreensCache& greens,
                           double dlambda_rel = 1e-3, double da = 1e-4);

}  // namespace bubblelab

#endif  // BUBBLELAB_MODELS_HPP
