#ifndef BUBBLELAB_LAB_HPP
#define BUBBLELAB_LAB_HPP

// Batch experiments: configuration, the expansion checks along the model
// family, the epsilon sweep with bubble fits, and their CSV/JSON artifacts.

#include "bubblelab/energy.hpp"
#include "bubblelab/fit.hpp"
#include "bubblelab/greens.hpp"
#include "bubblelab/minimizer.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace bubblelab {

enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 1,
  kExitGreens = 2,
  kExitExpansion = 3,
  kExitMinimizer = 4,
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct BubbleSeed {
  TorusPoint a{0.5, 0.5};
  std::optional<double> lambda;  // empty: predicted from the first epsilon
  bool cold = false;             // start at twice the seed scale
};

struct LabConfig {
  int grid_n = 512;
  std::vector<double> epsilon_list = {1e-4, 5e-5, 2.5e-5};
  BubbleSeed bubble;
  MinimizeOptions minimizer = [] {
    MinimizeOptions o;
    o.tol = 1e-5;
    return o;
  }();
  bool warm_start = true;
  std::filesystem::path output_dir = "bubblelab_out";
  std::uint64_t seed = 1;

  std::vector<double> verify_lambdas = {8, 16, 32, 64};
  std::vector<int> verify_grids = {1024, 2048};
  double verify_epsilon = 1e-5;
  double verify_derivative_lambda = 16;
  std::vector<double> verify_eps_term_lambdas = {16, 32};  // where the eps coefficient is held to 5%

  int greens_radii = 16;
  int greens_angles = 32;

  RefineOptions fit;

  /// Throws ConfigError unless the invariants hold.
  void validate() const;
};

LabConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const LabConfig& c);
LabConfig load_config(const std::filesystem::path& path);

/// "%.17g"
std::string full_precision(double v);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
  double slope_ci_low = 0.0;  // 95%, Student t
  double slope_ci_high = 0.0;
};

/// Least-squares line through (x_i, y_i); needs two or more points.
LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

// ---- Green's function summary

struct GreensReport {
  double scriptJ_forms = 0.0;
  double scriptJ_greens = 0.0;
  double scriptJ_error = 0.0;
  Eigen::Matrix2d mixed_hessian = Eigen::Matrix2d::Zero();
  // max |-Lap_h g - 2 pi| on the annulus [0.1, 0.5] at n and n/2
  int pde_grid = 0;
  double pde_residual = 0.0;
  double pde_residual_half = 0.0;
  double elapsed_seconds = 0.0;
};

GreensReport greens_report(const LabConfig& config);

// ---- expansions along the model family

struct ExpansionRow {
  double lambda = 0.0;
  double epsilon = 0.0;
  double energy_coarse = 0.0;
  double energy_fine = 0.0;
  double energy_extrapolated = 0.0;
  double predicted = 0.0;
  double residual = 0.0;
};

struct ExpansionReport {
  int n_coarse = 0;
  int n_fine = 0;
  std::vector<ExpansionRow> rows;

  // epsilon = 0 remainder E - (4 pi - 4 pi J / lambda^2)
  double remainder_slope = 0.0;
  double remainder_at_smallest_lambda = 0.0;
  // eps-term: (E_eps - E_0)/eps against (32 pi / 3) lambda^2
  std::vector<std::pair<double, double>> eps_term_relative_error;  // (lambda, error)
  // d/dlambda at verify_derivative_lambda, verify_epsilon
  double dlambda_measured = 0.0;
  double dlambda_predicted = 0.0;
  // d/da at the same point; grad J = 0 on the torus
  Eigen::Vector2d dA_measured = Eigen::Vector2d::Zero();
  double dA_constant = 0.0;  // |dA| / (1/lambda^3 + eps lambda)

  double dlambda_relative_error() const {
    return std::abs(dlambda_measured - dlambda_predicted) / std::abs(dlambda_predicted);
  }
  double elapsed_seconds = 0.0;
};

inline constexpr double kRemainderSlopeFloor = -2.5;
inline constexpr double kRemainderMagnitudeBound = 0.05;
inline constexpr double kEpsTermTolerance = 0.05;
inline constexpr double kDlambdaTolerance = 0.10;
inline constexpr double kDaConstantBound = 50.0;

ExpansionReport verify_expansions(const LabConfig& config, GreensCache& cache);

/// Failed floors (orders and coefficients), empty when all hold.
std::vector<std::string> expansion_violations(const ExpansionReport& report);

// ---- sweep

struct SweepRow {
  double epsilon = 0.0;
  double lambda_hat = 0.0;
  double a_x = 0.0;
  double a_y = 0.0;
  double det_R = 0.0;
  double energy_total = 0.0;
  double energy_dirichlet = 0.0;
  double residual = 0.0;
  double eps_lambda4 = 0.0;
  double z_distance = 0.0;
  int iterations = 0;
};

std::string sweep_csv_header();
std::string sweep_csv_line(const SweepRow& row);

struct ScalingReport {
  LinearFit fit;  // log lambda_hat against log eps
  double mean_eps_lambda4 = 0.0;
  double target = 0.0;
  std::vector<int> degrees;
  // ||grad u||_inf / lambda_hat per row; one constant should bound them all
  std::vector<double> gradient_ratios;
  double gradient_constant = 0.0;
};

ScalingReport scaling_report(const std::vector<SweepRow>& rows, const std::vector<int>& degrees);

struct SweepOutcome {
  std::vector<SweepRow> rows;
  std::vector<MinimizeResult> results;
  std::vector<FitResult> fits;
  ScalingReport scaling;
};

/// Runs the continuation sweep and fits every minimiser. on_row sees each
/// row as soon as its fit is done. Throws MinimizeError on a minimiser
/// failure.
SweepOutcome run_sweep(const LabConfig& config, GreensCache& cache,
                       const std::function<void(const SweepRow&, const MinimizeResult&)>& on_row = {});

// ---- subcommands; each writes into config.output_dir and returns an exit code

int cmd_greens(const LabConfig& config);
int cmd_verify_expansions(const LabConfig& config);
int cmd_sweep(const LabConfig& config);
int cmd_fit(const LabConfig& config, const std::filesystem::path& snapshot);

}  // namespace bubblelab

#endif  // BUBBLELAB_LAB_HPP
