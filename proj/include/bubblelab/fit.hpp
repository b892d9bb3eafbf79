#ifndef BUBBLELAB_FIT_HPP
#define BUBBLELAB_FIT_HPP

// Recovery of the model parameters (a, lambda, R) nearest to a computed
// field in the z-norm: closed-form coarse estimators, then a Nelder-Mead
// refinement of the z-distance.

#include "bubblelab/greens.hpp"
#include "bubblelab/models.hpp"
#include "bubblelab/torus.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace bubblelab {

class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct FitStage {
  std::string stage;
  BubbleParams params;
  double z_distance = 0.0;
};

struct FitResult {
  BubbleParams params;
  double z_distance = 0.0;
  std::vector<FitStage> stage_trace;
  std::vector<FitStage> alternatives;  // restart minima disagreeing by > 1%
  int evaluations = 0;
};

/// Node of largest central-difference |grad u|^2, moved to the vertex of a
/// per-axis parabola through its neighbours. Throws FitError when
/// max |grad u| < 1.
TorusPoint locate(const Grid& grid, const Vec3Field& u);

/// Interpolated peak |grad u| near a, divided by 2 sqrt 2 (the peak of
/// |grad pi_lambda| is 2 sqrt 2 lambda).
double scale_estimate(const Grid& grid, const Vec3Field& u, const TorusPoint& a);

/// Maximiser of tr(R^T M) over O(3) with det R = det_sign: the polar factor of
/// M with its last singular direction flipped if needed. Throws FitError if M
/// is rank deficient.
Eigen::Matrix3d procrustes(const Eigen::Matrix3d& M, int det_sign);

/// Least-squares R with u ~ R pi_lambda(x - a) over nodes |x - a| <= 2/lambda.
/// det_sign = 0 takes the sign of the degree of u.
Eigen::Matrix3d fit_rotation(const Grid& grid, const Vec3Field& u, const TorusPoint& a,
                             double lambda, int det_sign = 0);

struct NelderMeadResult {
  Eigen::VectorXd x;
  double value = 0.0;
  int evaluations = 0;
  bool converged = false;
};

/// Minimises f with GSL's nmsimplex2 from the simplex x0, x0 + step_i e_i
/// until the simplex size, measured in units of tol_i per coordinate, is
/// below 1. Checks the evaluation cap between iterations.
NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                             const Eigen::VectorXd& x0, const Eigen::VectorXd& step,
                             const Eigen::VectorXd& tol, int max_evaluations = 5000);

struct RefineOptions {
  double tol = 1e-4;           // simplex size in a1, a2 and log lambda
  double step_a = 0.0;         // initial simplex; <= 0 selects h/2
  double step_log_lambda = 0.02;
  int max_evaluations = 2000;
  bool restart = true;
  double disagreement = 0.01;  // relative, for recording alternatives
  std::uint64_t seed = 1;      // orientation of the restart simplex
};

/// ||u - R z_{lambda, a}||_z with R fitted exactly: <u, R z>_z is linear in R,
/// so the optimum is the polar factor of M_ij = <u_i, z_j>_z.
struct ZDistance {
  double distance = 0.0;
  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
};

class ZDistanceObjective {
 public:
  ZDistanceObjective(const Grid& grid, const Vec3Field& u, GreensCache& greens, int det_sign);

  ZDistance operator()(const TorusPoint& a, double lambda);
  int det_sign() const { return det_sign_; }

 private:
  Grid grid_;
  const Vec3Field& u_;
  GreensCache& greens_;
  int det_sign_;
  Vec3Field du_[2];
  GreensSamples samples_;
  bool have_samples_ = false;
};

/// Nelder-Mead over (a1, a2, log lambda) of the z-distance. Throws FitError
/// if lambda leaves [coarse/4, 4 coarse].
FitResult refine(const Grid& grid, const Vec3Field& u, const BubbleParams& coarse,
                 GreensCache& greens, const RefineOptions& opts = {});

/// locate, scale_estimate, fit_rotation, then refine.
FitResult fit_bubble(const Grid& grid, const Vec3Field& u, GreensCache& greens,
                     const RefineOptions& opts = {});

}  // namespace bubblelab

#endif  // BUBBLELAB_FIT_HPP
