#include "bubblelab/lab.hpp"

#include "bubblelab/models.hpp"
#include "bubblelab/snapshot.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <numeric>
#include <set>

namespace bubblelab {

namespace {

using nlohmann::json;

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [key, value] : j.items())
    if (!known.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

bool is_power_of_two_grid(int n) { return n >= 64 && (n & (n - 1)) == 0; }

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

json matrix_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

json stage_json(const FitStage& s) {
  return {{"stage", s.stage},
          {"a", {s.params.a.x(), s.params.a.y()}},
          {"lambda", s.params.lambda},
          {"R", matrix_json(s.params.R)},
          {"z_distance", s.z_distance}};
}

json fit_json(const FitResult& f) {
  json trace = json::array(), alternatives = json::array();
  for (const auto& s : f.stage_trace) trace.push_back(stage_json(s));
  for (const auto& s : f.alternatives) alternatives.push_back(stage_json(s));
  return {{"a", {f.params.a.x(), f.params.a.y()}},
          {"lambda", f.params.lambda},
          {"R", matrix_json(f.params.R)},
          {"det_R", f.params.R.determinant()},
          {"z_distance", f.z_distance},
          {"evaluations", f.evaluations},
          {"stage_trace", trace},
          {"alternatives", alternatives}};
}

// Dirichlet and (unweighted) biharmonic energies of the model.
EnergyBreakdown model_energy(const Grid& grid, GreensCache& cache, const TorusPoint& a,
                             double lambda) {
  BubbleParams p;
  p.a = a;
  p.lambda = lambda;
  return energy(grid, build_z(p, grid, cache.samples(grid, a)).z, 0.0);
}

}  // namespace

// ---- configuration

void LabConfig::validate() const {
  if (!is_power_of_two_grid(grid_n))
    throw ConfigError("grid_n must be a power of two >= 64, got " + std::to_string(grid_n));
  if (epsilon_list.empty()) throw ConfigError("epsilon_list is empty");
  for (std::size_t k = 0; k < epsilon_list.size(); ++k) {
    if (!(epsilon_list[k] > 0.0)) throw ConfigError("epsilon_list entries must be positive");
    if (k > 0 && !(epsilon_list[k] < epsilon_list[k - 1]))
      throw ConfigError("epsilon_list must be strictly decreasing");
  }
  if (bubble.lambda && !(*bubble.lambda >= 1.0)) throw ConfigError("bubble lambda must be >= 1");
  if (verify_lambdas.size() < 2) throw ConfigError("verify.lambdas needs two or more values");
  for (double l : verify_lambdas)
    if (!(l >= 2.0)) throw ConfigError("verify.lambdas entries must be >= 2");
  if (verify_grids.size() < 2) throw ConfigError("verify.grids needs two resolutions");
  for (std::size_t k = 0; k < verify_grids.size(); ++k) {
    if (!is_power_of_two_grid(verify_grids[k]))
      throw ConfigError("verify.grids entries must be powers of two >= 64");
    if (k > 0 && !(verify_grids[k] > verify_grids[k - 1]))
      throw ConfigError("verify.grids must be increasing");
  }
  if (!(verify_epsilon > 0.0)) throw ConfigError("verify.epsilon must be positive");
  if (!(verify_derivative_lambda >= 2.0)) throw ConfigError("verify.derivative_lambda must be >= 2");
  if (greens_radii < 1 || greens_angles < 1) throw ConfigError("greens sample counts must be positive");
  if (!(fit.tol > 0.0) || fit.max_evaluations < 1) throw ConfigError("invalid fit options");
}

LabConfig config_from_json(const json& j) {
  LabConfig c;
  try {
    reject_unknown(j,
                   {"grid_n", "epsilon_list", "bubble", "minimizer", "warm_start", "output_dir",
                    "seed", "verify", "greens", "fit"},
                   "config");
    read(j, "grid_n", c.grid_n);
    read(j, "epsilon_list", c.epsilon_list);
    read(j, "warm_start", c.warm_start);
    read(j, "seed", c.seed);
    if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();

    if (j.contains("bubble")) {
      const json& b = j.at("bubble");
      reject_unknown(b, {"a", "lambda", "cold"}, "bubble");
      if (b.contains("a")) {
        const auto a = b.at("a").get<std::vector<double>>();
        if (a.size() != 2) throw ConfigError("bubble.a must have two coordinates");
        c.bubble.a = TorusPoint(a[0], a[1]);
      }
      if (b.contains("lambda")) {
        const json& l = b.at("lambda");
        if (l.is_string()) {
          if (l.get<std::string>() != "predicted")
            throw ConfigError("bubble.lambda must be a number or \"predicted\"");
          c.bubble.lambda.reset();
        } else {
          c.bubble.lambda = l.get<double>();
        }
      }
      read(b, "cold", c.bubble.cold);
    }

    if (j.contains("minimizer")) {
      const json& m = j.at("minimizer");
      reject_unknown(m,
                     {"max_iters", "tol", "rel_tol", "armijo_c", "backtrack", "max_backtracks",
                      "log_every", "degree_check_every", "precondition_shift", "precondition"},
                     "minimizer");
      MinimizeOptions& o = c.minimizer;
      read(m, "max_iters", o.max_iters);
      read(m, "tol", o.tol);
      read(m, "rel_tol", o.rel_tol);
      read(m, "armijo_c", o.armijo_c);
      read(m, "backtrack", o.backtrack);
      read(m, "max_backtracks", o.max_backtracks);
      read(m, "log_every", o.log_every);
      read(m, "degree_check_every", o.degree_check_every);
      read(m, "precondition_shift", o.precondition_shift);
      read(m, "precondition", o.precondition);
    }

    if (j.contains("verify")) {
      const json& v = j.at("verify");
      reject_unknown(v, {"lambdas", "grids", "epsilon", "derivative_lambda", "eps_term_lambdas"},
                     "verify");
      read(v, "lambdas", c.verify_lambdas);
      read(v, "grids", c.verify_grids);
      read(v, "epsilon", c.verify_epsilon);
      read(v, "derivative_lambda", c.verify_derivative_lambda);
      read(v, "eps_term_lambdas", c.verify_eps_term_lambdas);
    }

    if (j.contains("greens")) {
      const json& g = j.at("greens");
      reject_unknown(g, {"radii", "angles"}, "greens");
      read(g, "radii", c.greens_radii);
      read(g, "angles", c.greens_angles);
    }

    if (j.contains("fit")) {
      const json& f = j.at("fit");
      reject_unknown(f,
                     {"tol", "step_a", "step_log_lambda", "max_evaluations", "restart",
                      "disagreement"},
                     "fit");
      read(f, "tol", c.fit.tol);
      read(f, "step_a", c.fit.step_a);
      read(f, "step_log_lambda", c.fit.step_log_lambda);
      read(f, "max_evaluations", c.fit.max_evaluations);
      read(f, "restart", c.fit.restart);
      read(f, "disagreement", c.fit.disagreement);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
  c.fit.seed = c.seed;
  c.validate();
  return c;
}

json config_to_json(const LabConfig& c) {
  const MinimizeOptions& o = c.minimizer;
  json bubble = {{"a", {c.bubble.a.x(), c.bubble.a.y()}}, {"cold", c.bubble.cold}};
  if (c.bubble.lambda)
    bubble["lambda"] = *c.bubble.lambda;
  else
    bubble["lambda"] = "predicted";
  return {{"grid_n", c.grid_n},
          {"epsilon_list", c.epsilon_list},
          {"bubble", bubble},
          {"minimizer",
           {{"max_iters", o.max_iters},
            {"tol", o.tol},
            {"rel_tol", o.rel_tol},
            {"armijo_c", o.armijo_c},
            {"backtrack", o.backtrack},
            {"max_backtracks", o.max_backtracks},
            {"log_every", o.log_every},
            {"degree_check_every", o.degree_check_every},
            {"precondition_shift", o.precondition_shift},
            {"precondition", o.precondition}}},
          {"warm_start", c.warm_start},
          {"output_dir", c.output_dir.string()},
          {"seed", c.seed},
          {"verify",
           {{"lambdas", c.verify_lambdas},
            {"grids", c.verify_grids},
            {"epsilon", c.verify_epsilon},
            {"derivative_lambda", c.verify_derivative_lambda},
            {"eps_term_lambdas", c.verify_eps_term_lambdas}}},
          {"greens", {{"radii", c.greens_radii}, {"angles", c.greens_angles}}},
          {"fit",
           {{"tol", c.fit.tol},
            {"step_a", c.fit.step_a},
            {"step_log_lambda", c.fit.step_log_lambda},
            {"max_evaluations", c.fit.max_evaluations},
            {"restart", c.fit.restart},
            {"disagreement", c.fit.disagreement}}}};
}

LabConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

std::string full_precision(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw std::invalid_argument("line fit needs two or more (x, y) pairs");
  const double n = double(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sxx += (x[k] - mx) * (x[k] - mx);
    sxy += (x[k] - mx) * (y[k] - my);
  }
  if (!(sxx > 0.0)) throw std::invalid_argument("line fit needs distinct x values");
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  if (x.size() > 2) {
    double ss = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
      const double e = y[k] - (f.intercept + f.slope * x[k]);
      ss += e * e;
    }
    f.slope_stderr = std::sqrt(ss / (n - 2.0) / sxx);
    const boost::math::students_t t(n - 2.0);
    const double q = boost::math::quantile(boost::math::complement(t, 0.025));
    f.slope_ci_low = f.slope - q * f.slope_stderr;
    f.slope_ci_high = f.slope + q * f.slope_stderr;
  } else {
    f.slope_stderr = std::numeric_limits<double>::quiet_NaN();
    f.slope_ci_low = f.slope_ci_high = std::numeric_limits<double>::quiet_NaN();
  }
  return f;
}

// ---- Green's function summary

GreensReport greens_report(const LabConfig& config) {
  const auto t0 = std::chrono::steady_clock::now();
  const GreensEvaluator G;
  GreensReport r;
  r.scriptJ_forms = script_J_forms(config.bubble.a);
  const ScriptJGreens sj = script_J_greens(G);
  r.scriptJ_greens = sj.value;
  r.scriptJ_error = sj.error_estimate;
  r.mixed_hessian = sj.jet.mixed_hessian;
  r.pde_grid = std::max(config.grid_n, 128);
  r.pde_residual = check_pde_residual(G, Grid(r.pde_grid), 0.1, 0.5);
  r.pde_residual_half = check_pde_residual(G, Grid(r.pde_grid / 2), 0.1, 0.5);
  r.elapsed_seconds = seconds_since(t0);
  return r;
}

int cmd_greens(const LabConfig& config) {
  try {
    std::filesystem::create_directories(config.output_dir);
    const GreensReport r = greens_report(config);
    const GreensEvaluator G;

    std::string csv = "x,y,g,gradJ1,gradJ2\n";
    for (int k = 1; k <= config.greens_radii; ++k) {
      const double radius = 0.45 * k / config.greens_radii;
      for (int m = 0; m < config.greens_angles; ++m) {
        const double th = 2.0 * M_PI * m / config.greens_angles;
        const ChartDisplacement x(radius * std::cos(th), radius * std::sin(th));
        const Eigen::Vector2d gj = eval_gradJ_y(G, x);
        csv += full_precision(x(0)) + ',' + full_precision(x(1)) + ',' +
               full_precision(eval_g(G, x)) + ',' + full_precision(gj(0)) + ',' +
               full_precision(gj(1)) + '\n';
      }
    }
    write_text(config.output_dir / "greens.csv", csv);

    const json summary = {
        {"scriptJ_forms", r.scriptJ_forms},
        {"scriptJ_greens", r.scriptJ_greens},
        {"scriptJ_greens_error", r.scriptJ_error},
        {"mixed_hessian", matrix_json(r.mixed_hessian)},
        {"pde_residual",
         {{"grid_n", r.pde_grid},
          {"annulus", {0.1, 0.5}},
          {"max_abs", r.pde_residual},
          {"max_abs_half_grid", r.pde_residual_half},
          {"observed_order", std::log2(r.pde_residual_half / r.pde_residual)}}},
        {"ewald", {{"split", G.parameters().split},
                   {"real_space_shells", G.parameters().real_space_shells},
                   {"fourier_shells", G.parameters().fourier_shells},
                   {"real_space_tail", G.real_space_tail()},
                   {"fourier_tail", G.fourier_tail()}}}};
    write_text(config.output_dir / "jsummary.json", summary.dump(2) + "\n");
    std::cerr << "scriptJ forms=" << full_precision(r.scriptJ_forms)
              << " greens=" << full_precision(r.scriptJ_greens) << '\n';
    return kExitOk;
  } catch (const GreensError& e) {
    std::cerr << "Green's function failure: " << e.what() << '\n';
    return kExitGreens;
  }
}

// ---- expansions

ExpansionReport verify_expansions(const LabConfig& config, GreensCache& cache) {
  const auto t0 = std::chrono::steady_clock::now();
  ExpansionReport rep;
  rep.n_coarse = config.verify_grids[config.verify_grids.size() - 2];
  rep.n_fine = config.verify_grids.back();
  const Grid coarse(rep.n_coarse), fine(rep.n_fine);
  const double ratio = double(rep.n_fine) / rep.n_coarse;
  const double w = ratio * ratio;  // O(h^2) Richardson weights
  auto extrapolate = [&](double ec, double ef) { return (w * ef - ec) / (w - 1.0); };

  const double J = script_J_forms(config.bubble.a);
  const double eps = config.verify_epsilon;
  const TorusPoint a = config.bubble.a;

  std::vector<double> log_l, log_rem;
  double smallest = std::numeric_limits<double>::infinity();
  for (double lambda : config.verify_lambdas) {
    const EnergyBreakdown ec = model_energy(coarse, cache, a, lambda);
    const EnergyBreakdown ef = model_energy(fine, cache, a, lambda);
    for (double e : {0.0, eps}) {
      ExpansionRow row;
      row.lambda = lambda;
      row.epsilon = e;
      row.energy_coarse = ec.dirichlet + e * ec.biharmonic;
      row.energy_fine = ef.dirichlet + e * ef.biharmonic;
      row.energy_extrapolated = extrapolate(row.energy_coarse, row.energy_fine);
      row.predicted = expansion_energy({J, lambda, e, 1.0});
      row.residual = row.energy_extrapolated - row.predicted;
      rep.rows.push_back(row);
    }
    const double rem = rep.rows[rep.rows.size() - 2].residual;
    log_l.push_back(std::log(lambda));
    log_rem.push_back(std::log(std::abs(rem)));
    if (lambda < smallest) {
      smallest = lambda;
      rep.remainder_at_smallest_lambda = rem;
    }
    const double bih = extrapolate(ec.biharmonic, ef.biharmonic);
    const double predicted_bih = 32.0 * M_PI / 3.0 * lambda * lambda;
    rep.eps_term_relative_error.emplace_back(lambda, (bih - predicted_bih) / predicted_bih);
  }
  rep.remainder_slope = fit_line(log_l, log_rem).slope;

  const double ld = config.verify_derivative_lambda;
  auto energy_eps = [&](const TorusPoint& at, double lambda) {
    const EnergyBreakdown c = model_energy(coarse, cache, at, lambda);
    const EnergyBreakdown f = model_energy(fine, cache, at, lambda);
    return extrapolate(c.dirichlet + eps * c.biharmonic, f.dirichlet + eps * f.biharmonic);
  };
  const double dl = 0.5;
  rep.dlambda_measured = (energy_eps(a, ld + dl) - energy_eps(a, ld - dl)) / (2.0 * dl);
  rep.dlambda_predicted = expansion_dlambda({J, ld, eps, 1.0});

  const double da = 1e-3;
  for (int axis = 0; axis < 2; ++axis) {
    const TorusPoint plus(a.x() + (axis == 0 ? da : 0.0), a.y() + (axis == 1 ? da : 0.0));
    const TorusPoint minus(a.x() - (axis == 0 ? da : 0.0), a.y() - (axis == 1 ? da : 0.0));
    rep.dA_measured(axis) = (energy_eps(plus, ld) - energy_eps(minus, ld)) / (2.0 * da);
  }
  rep.dA_constant = rep.dA_measured.norm() / (1.0 / (ld * ld * ld) + eps * ld);
  rep.elapsed_seconds = seconds_since(t0);
  return rep;
}

std::vector<std::string> expansion_violations(const ExpansionReport& r) {
  std::vector<std::string> out;
  if (!(r.remainder_slope <= kRemainderSlopeFloor))
    out.push_back("energy remainder slope " + full_precision(r.remainder_slope) + " > " +
                  full_precision(kRemainderSlopeFloor));
  if (!(r.dlambda_relative_error() <= kDlambdaTolerance))
    out.push_back("lambda derivative off by " + full_precision(r.dlambda_relative_error()));
  if (!(r.dA_constant <= kDaConstantBound))
    out.push_back("a-derivative constant " + full_precision(r.dA_constant) + " > " +
                  full_precision(kDaConstantBound));
  return out;
}

int cmd_verify_expansions(const LabConfig& config) {
  try {
    std::filesystem::create_directories(config.output_dir);
    GreensCache cache(std::make_shared<const GreensEvaluator>());
    const ExpansionReport r = verify_expansions(config, cache);

    std::string csv =
        "lambda,epsilon,n_coarse,n_fine,energy_coarse,energy_fine,energy_extrapolated,"
        "predicted,residual\n";
    for (const auto& row : r.rows)
      csv += full_precision(row.lambda) + ',' + full_precision(row.epsilon) + ',' +
             std::to_string(r.n_coarse) + ',' + std::to_string(r.n_fine) + ',' +
             full_precision(row.energy_coarse) + ',' + full_precision(row.energy_fine) + ',' +
             full_precision(row.energy_extrapolated) + ',' + full_precision(row.predicted) + ',' +
             full_precision(row.residual) + '\n';
    write_text(config.output_dir / "expansions.csv", csv);

    std::vector<std::string> violations = expansion_violations(r);
    json eps_terms = json::array();
    for (const auto& [lambda, err] : r.eps_term_relative_error) {
      const bool held = std::find(config.verify_eps_term_lambdas.begin(),
                                  config.verify_eps_term_lambdas.end(),
                                  lambda) != config.verify_eps_term_lambdas.end();
      eps_terms.push_back({{"lambda", lambda}, {"relative_error", err}, {"checked", held}});
      if (held && !(std::abs(err) <= kEpsTermTolerance))
        violations.push_back("eps coefficient at lambda " + full_precision(lambda) + " off by " +
                             full_precision(err));
    }
    const json orders = {
        {"energy_remainder_slope", r.remainder_slope},
        {"energy_remainder_slope_floor", kRemainderSlopeFloor},
        {"energy_remainder_at_smallest_lambda", r.remainder_at_smallest_lambda},
        {"energy_remainder_magnitude_bound", kRemainderMagnitudeBound},
        {"eps_term", eps_terms},
        {"dlambda",
         {{"lambda", config.verify_derivative_lambda},
          {"epsilon", config.verify_epsilon},
          {"measured", r.dlambda_measured},
          {"predicted", r.dlambda_predicted},
          {"relative_error", r.dlambda_relative_error()}}},
        {"dA_check",
         {{"lambda", config.verify_derivative_lambda},
          {"epsilon", config.verify_epsilon},
          {"gradient", {r.dA_measured(0), r.dA_measured(1)}},
          {"fitted_C", r.dA_constant},
          {"bound", kDaConstantBound}}},
        {"grids", {r.n_coarse, r.n_fine}},
        {"violations", violations}};
    write_text(config.output_dir / "orders.json", orders.dump(2) + "\n");
    for (const auto& v : violations) std::cerr << "expansion check failed: " << v << '\n';
    return violations.empty() ? kExitOk : kExitExpansion;
  } catch (const GreensError& e) {
    std::cerr << "Green's function failure: " << e.what() << '\n';
    return kExitGreens;
  }
}

// ---- sweep

std::string sweep_csv_header() {
  return "epsilon,lambda_hat,a_x,a_y,det_R,energy_total,energy_dirichlet,residual,eps_lambda4,"
         "z_distance,iterations";
}

std::string sweep_csv_line(const SweepRow& r) {
  return full_precision(r.epsilon) + ',' + full_precision(r.lambda_hat) + ',' +
         full_precision(r.a_x) + ',' + full_precision(r.a_y) + ',' + full_precision(r.det_R) +
         ',' + full_precision(r.energy_total) + ',' + full_precision(r.energy_dirichlet) + ',' +
         full_precision(r.residual) + ',' + full_precision(r.eps_lambda4) + ',' +
         full_precision(r.z_distance) + ',' + std::to_string(r.iterations);
}

ScalingReport scaling_report(const std::vector<SweepRow>& rows, const std::vector<int>& degrees) {
  ScalingReport s;
  s.target = 3.0 * std::abs(script_J_forms()) / 8.0;
  s.degrees = degrees;
  if (rows.empty()) return s;
  std::vector<double> le, ll;
  double sum = 0.0;
  for (const auto& r : rows) {
    le.push_back(std::log(r.epsilon));
    ll.push_back(std::log(r.lambda_hat));
    sum += r.eps_lambda4;
  }
  s.mean_eps_lambda4 = sum / double(rows.size());
  if (rows.size() >= 2)
    s.fit = fit_line(le, ll);
  else
    s.fit.slope = s.fit.slope_stderr = s.fit.slope_ci_low = s.fit.slope_ci_high =
        std::numeric_limits<double>::quiet_NaN();
  return s;
}

SweepOutcome run_sweep(const LabConfig& config, GreensCache& cache,
                       const std::function<void(const SweepRow&, const MinimizeResult&)>& on_row) {
  const Grid grid(config.grid_n);
  const double J = script_J_forms(config.bubble.a);
  BubbleParams seed;
  seed.a = config.bubble.a;
  seed.lambda = config.bubble.lambda ? *config.bubble.lambda
                                     : predicted_lambda(config.epsilon_list.front(), J);
  if (config.bubble.cold) seed.lambda *= 2.0;
  const Vec3Field u_seed = build_z(seed, grid, cache.samples(grid, seed.a)).z;

  SweepOutcome out;
  std::vector<int> degrees;
  std::vector<double> ratios;
  auto handle = [&](std::size_t k, const MinimizeResult& res) {
    const double eps = config.epsilon_list[k];
    RefineOptions fo = config.fit;
    fo.seed = config.seed + k;
    FitResult fit = fit_bubble(grid, res.u, cache, fo);
    const EnergyBreakdown e = energy(grid, res.u, eps);
    SweepRow row;
    row.epsilon = eps;
    row.lambda_hat = fit.params.lambda;
    row.a_x = fit.params.a.x();
    row.a_y = fit.params.a.y();
    row.det_R = fit.params.R.determinant();
    row.energy_total = e.total;
    row.energy_dirichlet = e.dirichlet;
    row.residual = res.final_residual;
    row.eps_lambda4 = eps * std::pow(fit.params.lambda, 4);
    row.z_distance = fit.z_distance;
    row.iterations = res.iterations;
    degrees.push_back(res.degree_out.nearest);
    ratios.push_back(gradient_sup(grid, res.u) / row.lambda_hat);
    out.rows.push_back(row);
    out.fits.push_back(std::move(fit));
    if (on_row) on_row(row, res);
  };
  out.results = continuation_sweep(grid, config.epsilon_list, u_seed, config.minimizer,
                                   config.warm_start, handle);
  out.scaling = scaling_report(out.rows, degrees);
  out.scaling.gradient_ratios = ratios;
  for (double r : ratios) out.scaling.gradient_constant = std::max(out.scaling.gradient_constant, r);
  return out;
}

int cmd_sweep(const LabConfig& config) {
  const auto& dir = config.output_dir;
  try {
    std::filesystem::create_directories(dir);
    write_text(dir / "config.json", config_to_json(config).dump(2) + "\n");
    std::ofstream csv(dir / "sweep.csv", std::ios::trunc);
    if (!csv) throw std::runtime_error("cannot write " + (dir / "sweep.csv").string());
    csv << sweep_csv_header() << '\n' << std::flush;

    GreensCache cache(std::make_shared<const GreensEvaluator>());
    const Grid grid(config.grid_n);
    std::size_t k = 0;
    const SweepOutcome out = run_sweep(config, cache, [&](const SweepRow& row, const MinimizeResult& res) {
      csv << sweep_csv_line(row) << '\n' << std::flush;
      write_snapshot(dir / ("field_eps" + std::to_string(k++) + ".bin"), grid, res.u);
      std::cerr << "epsilon=" << full_precision(row.epsilon) << " lambda_hat=" << row.lambda_hat
                << " eps_lambda4=" << row.eps_lambda4 << " status=" << res.status << '\n';
    });

    const ScalingReport& s = out.scaling;
    json fits = json::array();
    for (const auto& f : out.fits) fits.push_back(fit_json(f));
    const json scaling = {{"slope", s.fit.slope},
                          {"slope_ci", {s.fit.slope_ci_low, s.fit.slope_ci_high}},
                          {"slope_stderr", s.fit.slope_stderr},
                          {"expected_slope", -0.25},
                          {"mean_eps_lambda4", s.mean_eps_lambda4},
                          {"target", s.target},
                          {"relative_error", (s.mean_eps_lambda4 - s.target) / s.target},
                          {"degrees", s.degrees},
                          {"gradient_over_lambda", s.gradient_ratios},
                          {"gradient_constant", s.gradient_constant},
                          {"fits", fits}};
    write_text(dir / "scaling.json", scaling.dump(2) + "\n");
    return kExitOk;
  } catch (const MinimizeError& e) {
    std::cerr << "minimizer failure at epsilon = " << full_precision(e.epsilon()) << ": "
              << e.what() << '\n';
    return kExitMinimizer;
  } catch (const GreensError& e) {
    std::cerr << "Green's function failure: " << e.what() << '\n';
    return kExitGreens;
  }
}

int cmd_fit(const LabConfig& config, const std::filesystem::path& snapshot) {
  Snapshot snap;
  try {
    snap = read_snapshot(snapshot);
  } catch (const SnapshotError& e) {
    std::cerr << "snapshot error: " << e.what() << '\n';
    return kExitConfig;
  }
  try {
    const Grid grid(snap.n);
    GreensCache cache(std::make_shared<const GreensEvaluator>());
    const FitResult fit = fit_bubble(grid, snap.field, cache, config.fit);
    std::filesystem::create_directories(config.output_dir);
    const json j = fit_json(fit);
    write_text(config.output_dir / "fit.json", j.dump(2) + "\n");
    std::cout << j.dump(2) << '\n';
    return kExitOk;
  } catch (const FitError& e) {
    std::cerr << "fit failed: " << e.what() << '\n';
    return kExitConfig;
  } catch (const GreensError& e) {
    std::cerr << "Green's function failure: " << e.what() << '\n';
    return kExitGreens;
  }
}

}  // namespace bubblelab
