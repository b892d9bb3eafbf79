#ifndef BUBBLELAB_GREENS_HPP
#define BUBBLELAB_GREENS_HPP

// Green's function of the unit square torus,
//   -Laplace g = 2 pi (delta_0 - 1),   int g = 0,
// evaluated by Ewald summation, together with its regular part
// j(x) = g(x) + log|x| and the Green's-function route to the torus value of
// script-J.

#include "bubblelab/torus.hpp"

#include <Eigen/Dense>

#include <map>
#include <memory>
#include <stdexcept>
#include <vector>

namespace bubblelab {

class GreensError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EwaldParameters {
  double split = M_PI;      // Gaussian screening exponent s
  int real_space_shells = 3;  // images n with |n_i| <= shells
  int fourier_shells = 3;     // modes k with |k_i| <= shells
};

/// Immutable Ewald evaluator. The real-space part is a sum of
/// E1(s|x+n|^2)/2 over lattice images, the Fourier part a Gaussian-damped
/// cosine series; both truncation tails must fall below 1e-12 or the
/// constructor throws GreensError.
class GreensEvaluator {
 public:
  explicit GreensEvaluator(EwaldParameters params = {});

  const EwaldParameters& parameters() const { return params_; }
  double real_space_tail() const { return real_tail_; }
  double fourier_tail() const { return fourier_tail_; }

  /// g(d); throws GreensError at d = 0.
  double g(const ChartDisplacement& d) const;
  Eigen::Vector2d grad_g(const ChartDisplacement& d) const;

  /// j(d) = g(d) + log|d| on the chart square; smooth, finite at 0.
  double regular(const ChartDisplacement& d) const;
  Eigen::Vector2d grad_regular(const ChartDisplacement& d) const;

  /// grad_y J_a(x, 0) = -grad j(x).
  Eigen::Vector2d grad_J_y(const ChartDisplacement& x) const { return -grad_regular(x); }

  /// grad_regular on the tensor lattice xs x ys; column i * ys.size() + j
  /// holds (xs[i], ys[j]).
  void grad_regular_lattice(const std::vector<double>& xs, const std::vector<double>& ys,
                            Eigen::Matrix2Xd& out) const;

 private:
  struct Mode {
    int k1, k2;
    double weight;  // 2 exp(-pi^2 |k|^2 / s) / (2 pi |k|^2), half-plane doubled
  };

  // Sum over images except n = 0 (value and/or gradient), plus the Fourier
  // series and the mean-zero shift.
  double smooth_value(const Eigen::Vector2d& d) const;
  Eigen::Vector2d smooth_grad(const Eigen::Vector2d& d) const;

  EwaldParameters params_;
  std::vector<Eigen::Vector2d> images_;  // nonzero lattice vectors
  std::vector<Mode> modes_;
  double real_tail_ = 0.0;
  double fourier_tail_ = 0.0;
};

double eval_g(const GreensEvaluator& G, const ChartDisplacement& d);
Eigen::Vector2d eval_gradJ_y(const GreensEvaluator& G, const ChartDisplacement& x);

/// script-J from the holomorphic one-form dz: -2 pi c_gamma |phi(a)|^2 with
/// |dz|^2 = 1 on the unit-area square torus, independent of a.
double script_J_forms(const TorusPoint& a = {}, double c_gamma = 1.0);

/// Derivatives of J_a at the origin of the chart.
struct RegularPartJet {
  Eigen::Matrix2d mixed_hessian;  // (i, j): d^2 J / dx^i dy^j at (0, 0)
  Eigen::Matrix2d third;          // (i, j): d^3 J / dx^i dx^j dy^j at (0, 0)
  double trace_error = 0.0;       // |difference of the two Richardson levels|
  std::vector<double> richardson_traces;  // per step pair (h, h/2)
};

/// Mixed Hessian by symmetric differences of grad_J_y at the given steps,
/// Richardson-extrapolated in h^2.
RegularPartJet regular_part_jet(const GreensEvaluator& G,
                                const std::vector<double>& steps = {1e-2, 5e-3, 2.5e-3});

struct ScriptJGreens {
  double value;
  double error_estimate;
  RegularPartJet jet;
};

/// Trace of the mixed Hessian of J. Throws GreensError when the estimated
/// differencing error exceeds 1e-3 relative.
ScriptJGreens script_J_greens(const GreensEvaluator& G,
                              const std::vector<double>& steps = {1e-2, 5e-3, 2.5e-3});

/// max |-Laplace_h g + 2 pi| over nodes with inner <= |x| <= outer.
double check_pde_residual(const GreensEvaluator& G, const Grid& grid, double inner_radius,
                          double outer_radius = 1.0);
inline double check_pde_residual(const GreensEvaluator& G, const Grid& grid) {
  return check_pde_residual(G, grid, 3.0 * grid.h());
}

/// Green's data sampled at every node p for a bubble at a: the chart
/// displacement wrap(p - a) and grad j there.
struct GreensSamples {
  int n = 0;
  TorusPoint a;
  Eigen::Matrix2Xd displacement;
  Eigen::Matrix2Xd grad_regular;
  Eigen::Vector2d grad_regular_origin = Eigen::Vector2d::Zero();
};

GreensSamples sample_greens(const GreensEvaluator& G, const Grid& grid, const TorusPoint& a);

/// Reuses one table per grid size when a sits on a node: the torus is
/// homogeneous, so the table for a = 0 only needs an index shift.
class GreensCache {
 public:
  explicit GreensCache(std::shared_ptr<const GreensEvaluator> evaluator);

  const GreensEvaluator& evaluator() const { return *evaluator_; }
  GreensSamples samples(const Grid& grid, const TorusPoint& a);

 private:
  std::shared_ptr<const GreensEvaluator> evaluator_;
  std::map<int, GreensSamples> base_;
};

}  // namespace bubblelab

#endif  // BUBBLELAB_GREENS_HPP
