#ifndef BUBBLELAB_MINIMIZER_HPP
#define BUBBLELAB_MINIMIZER_HPP

// Sphere-constrained descent on the discrete epsilon-energy.

#include "bubblelab/energy.hpp"
#include "bubblelab/torus.hpp"

#include <complex>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace bubblelab {

class MinimizeError : public std::runtime_error {
 public:
  MinimizeError(const std::string& what, double epsilon = 0.0)
      : std::runtime_error(what), epsilon_(epsilon) {}
  double epsilon() const { return epsilon_; }

 private:
  double epsilon_;
};

/// (u + tau d)/|u + tau d| nodewise. Throws MinimizeError if any node has
/// |u + tau d| < 1/2.
Vec3Field retract(const Vec3Field& u, const Vec3Field& d, double tau);

/// Inverse of  shift - Lap_h + eps Lap_h^2  by FFT; the operator is diagonal in
/// the discrete Fourier basis.
class SpectralPreconditioner {
 public:
  SpectralPreconditioner(const Grid& grid, double epsilon, double shift);

  Vec3Field solve(const Vec3Field& r) const;
  /// Applies the operator itself, by stencils.
  Vec3Field apply(const Vec3Field& s) const;

 private:
  void transform(std::vector<std::complex<double>>& data, bool inverse) const;

  Grid grid_;
  double epsilon_;
  double shift_;
  Eigen::ArrayXd inverse_symbol_;  // indexed like the grid
};

struct MinimizeOptions {
  int max_iters = 200000;
  double tol = 0.0;  // absolute bound on ||el_residual||_L2; <= 0 selects rel_tol
  double rel_tol = 1e-6;
  double armijo_c = 1e-4;
  double backtrack = 0.5;
  int max_backtracks = 50;
  int log_every = 100;  // 0: silent
  int degree_check_every = 100;
  double precondition_shift = 1.0;
  bool precondition = true;
};

struct MinimizeResult {
  Vec3Field u;
  int iterations = 0;
  double initial_residual = 0.0;
  double final_residual = 0.0;
  double threshold = 0.0;
  std::vector<double> energy_trace;
  std::vector<double> residual_trace;
  DegreeResult degree_in;
  DegreeResult degree_out;
  bool converged = false;
  std::string status;
};

double residual_norm(const Grid& grid, const Vec3Field& r);

/// Descent along the preconditioned, tangentially projected residual with
/// Barzilai-Borwein trial steps and Armijo backtracking. A change of the
/// rounded degree throws MinimizeError.
MinimizeResult minimize(const Grid& grid, const Vec3Field& u0, double epsilon,
                        const MinimizeOptions& opts = {});

/// Bubble scale read off the peak gradient, |grad u|_max / (2 sqrt 2).
double peak_scale(const Grid& grid, const Vec3Field& u);

using SweepCallback = std::function<void(std::size_t, const MinimizeResult&)>;

/// Chains minimize over a strictly decreasing epsilon list (warm starts unless
/// disabled). Refuses to go on once the bubble outgrows the grid, lambda h > 1/4.
/// on_result, if set, sees each result as soon as it is available.
std::vector<MinimizeResult> continuation_sweep(const Grid& grid, const std::vector<double>& eps_list,
                                               const Vec3Field& u_seed,
                                               const MinimizeOptions& opts = {},
                                               bool warm_start = true,
                                               const SweepCallback& on_result = {});

}  // namespace bubblelab

#endif  // BUBBLELAB_MINIMIZER_HPP
