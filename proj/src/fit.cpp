#include "bubblelab/fit.hpp"

#include "bubblelab/energy.hpp"
#include "bubblelab/stereo.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

#include <algorithm>
#include <exception>
#include <memory>
#include <cmath>
#include <random>

namespace bubblelab {

namespace {

ScalarField gradient_density(const Grid& grid, const Vec3Field& u) {
  const Gradient<double, 3> g = grad(grid, u);
  return g.dx.colwise().squaredNorm() + g.dy.colwise().squaredNorm();
}

// Vertex offset in [-1/2, 1/2] and height gain of the parabola through
// (-1, fm), (0, f0), (1, fp).
std::pair<double, double> parabola_peak(double fm, double f0, double fp) {
  const double curv = fm - 2.0 * f0 + fp;
  if (!(curv < 0.0)) return {0.0, 0.0};
  const double t = std::clamp(0.5 * (fm - fp) / curv, -0.5, 0.5);
  return {t, -0.25 * (fm - fp) * t};
}

struct Peak {
  int i = 0, j = 0;
  double ti = 0.0, tj = 0.0;
  double value = 0.0;  // interpolated |grad u|^2
};

Peak interpolate_peak(const Grid& grid, const ScalarField& dens, int i, int j) {
  auto at = [&](int di, int dj) { return dens(grid.index(i + di, j + dj)); };
  Peak p;
  p.i = i;
  p.j = j;
  const auto [ti, gi] = parabola_peak(at(-1, 0), at(0, 0), at(1, 0));
  const auto [tj, gj] = parabola_peak(at(0, -1), at(0, 0), at(0, 1));
  p.ti = ti;
  p.tj = tj;
  p.value = at(0, 0) + gi + gj;
  return p;
}

int degree_sign(const Grid& grid, const Vec3Field& u) {
  const int d = degree(grid, u).nearest;
  if (d == 0) throw FitError("field has degree 0: no bubble orientation to fit");
  return d > 0 ? 1 : -1;
}

double wrapped_gap(const TorusPoint& p, const TorusPoint& q) { return geodesic_distance(p, q); }

}  // namespace

TorusPoint locate(const Grid& grid, const Vec3Field& u) {
  require_unit(u);
  const ScalarField dens = gradient_density(grid, u);
  Eigen::Index kmax = 0;
  const double peak = dens.maxCoeff(&kmax);
  if (!(std::sqrt(peak) >= 1.0)) throw FitError("flat field: max |grad u| < 1, no bubble");
  const int i = int(kmax / grid.n()), j = int(kmax % grid.n());
  const Peak p = interpolate_peak(grid, dens, i, j);
  return {(i + p.ti) * grid.h(), (j + p.tj) * grid.h()};
}

double scale_estimate(const Grid& grid, const Vec3Field& u, const TorusPoint& a) {
  const ScalarField dens = gradient_density(grid, u);
  const int i = int(std::lround(a.x() * grid.n())), j = int(std::lround(a.y() * grid.n()));
  // climb to the local maximum next to a
  int bi = i, bj = j;
  for (int di = -1; di <= 1; ++di)
    for (int dj = -1; dj <= 1; ++dj)
      if (dens(grid.index(i + di, j + dj)) > dens(grid.index(bi, bj))) {
        bi = i + di;
        bj = j + dj;
      }
  const Peak p = interpolate_peak(grid, dens, bi, bj);
  return std::sqrt(p.value) / (2.0 * std::sqrt(2.0));
}

Eigen::Matrix3d procrustes(const Eigen::Matrix3d& M, int det_sign) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(M, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Vector3d s = svd.singularValues();
  if (!(s(2) > 1e-10 * s(0)))
    throw FitError("degenerate cross-covariance: rank deficient, rotation not determined");
  Eigen::Matrix3d U = svd.matrixU();
  const Eigen::Matrix3d V = svd.matrixV();
  const double want = det_sign < 0 ? -1.0 : 1.0;
  if ((U * V.transpose()).determinant() * want < 0.0) U.col(2) *= -1.0;
  return U * V.transpose();
}

Eigen::Matrix3d fit_rotation(const Grid& grid, const Vec3Field& u, const TorusPoint& a,
                             double lambda, int det_sign) {
  if (det_sign == 0) det_sign = degree_sign(grid, u);
  const double radius = 2.0 / lambda;
  Eigen::Matrix3d M = Eigen::Matrix3d::Zero();
  int count = 0;
  for (int i = 0; i < grid.n(); ++i)
    for (int j = 0; j < grid.n(); ++j) {
      const ChartDisplacement d = wrap_displacement(grid.node(i, j), a);
      if (d.norm() > radius) continue;
      M += u.col(grid.index(i, j)) * stereo(lambda, Eigen::Vector2d(d)).transpose();
      ++count;
    }
  if (count < 4) throw FitError("too few nodes inside 2/lambda to fit a rotation");
  return procrustes(M, det_sign);
}

NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                             const Eigen::VectorXd& x0, const Eigen::VectorXd& step,
                             const Eigen::VectorXd& tol, int max_evaluations) {
  // GSL works in coordinates scaled by tol, so its simplex size test is against 1.
  struct Context {
    const std::function<double(const Eigen::VectorXd&)>* f;
    const Eigen::VectorXd* tol;
    int evaluations = 0;
    std::exception_ptr error;
  } ctx{&f, &tol, 0, nullptr};
  const std::size_t dim = std::size_t(x0.size());

  gsl_multimin_function fn;
  fn.n = dim;
  fn.params = &ctx;
  fn.f = [](const gsl_vector* y, void* p) -> double {
    auto& c = *static_cast<Context*>(p);
    ++c.evaluations;
    if (c.error) return GSL_NAN;
    try {
      const Eigen::VectorXd x =
          Eigen::Map<const Eigen::VectorXd, 0, Eigen::InnerStride<>>(y->data, Eigen::Index(y->size),
                                                                     Eigen::InnerStride<>(int(y->stride)))
              .cwiseProduct(*c.tol);
      return (*c.f)(x);
    } catch (...) {
      c.error = std::current_exception();
      return GSL_NAN;
    }
  };

  auto vec = [dim](const Eigen::VectorXd& v) {
    gsl_vector* g = gsl_vector_alloc(dim);
    for (std::size_t k = 0; k < dim; ++k) gsl_vector_set(g, k, v(Eigen::Index(k)));
    return std::unique_ptr<gsl_vector, decltype(&gsl_vector_free)>(g, &gsl_vector_free);
  };
  const auto y0 = vec(x0.cwiseQuotient(tol));
  const auto dy = vec(step.cwiseQuotient(tol).cwiseAbs());
  std::unique_ptr<gsl_multimin_fminimizer, decltype(&gsl_multimin_fminimizer_free)> s(
      gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, dim),
      &gsl_multimin_fminimizer_free);

  gsl_error_handler_t* previous = gsl_set_error_handler_off();
  NelderMeadResult res;
  int status = gsl_multimin_fminimizer_set(s.get(), &fn, y0.get(), dy.get());
  while (status == GSL_SUCCESS && !ctx.error) {
    if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(s.get()), 1.0) == GSL_SUCCESS) {
      res.converged = true;
      break;
    }
    if (ctx.evaluations >= max_evaluations) break;
    status = gsl_multimin_fminimizer_iterate(s.get());
  }
  gsl_set_error_handler(previous);
  if (ctx.error) std::rethrow_exception(ctx.error);
  if (status != GSL_SUCCESS) throw FitError(std::string("simplex search failed: ") + gsl_strerror(status));

  const gsl_vector* best = gsl_multimin_fminimizer_x(s.get());
  res.x.resize(Eigen::Index(dim));
  for (std::size_t k = 0; k < dim; ++k) res.x(Eigen::Index(k)) = gsl_vector_get(best, k) * tol(Eigen::Index(k));
  res.value = gsl_multimin_fminimizer_minimum(s.get());
  res.evaluations = ctx.evaluations;
  return res;
}

ZDistanceObjective::ZDistanceObjective(const Grid& grid, const Vec3Field& u, GreensCache& greens,
                                       int det_sign)
    : grid_(grid), u_(u), greens_(greens), det_sign_(det_sign) {
  require_unit(u);
  if (det_sign_ == 0) det_sign_ = degree_sign(grid, u);
  du_[0] = forward_diff(grid, u, 0);
  du_[1] = forward_diff(grid, u, 1);
}

ZDistance ZDistanceObjective::operator()(const TorusPoint& a, double lambda) {
  if (!have_samples_ || samples_.a.x() != a.x() || samples_.a.y() != a.y()) {
    samples_ = greens_.samples(grid_, a);
    have_samples_ = true;
  }
  BubbleParams p;
  p.a = a;
  p.lambda = lambda;
  const Vec3Field z = build_z(p, grid_, samples_).z;
  const Vec3Field dz[2] = {forward_diff(grid_, z, 0), forward_diff(grid_, z, 1)};
  const ScalarField rho = rho_z_field(p, grid_);
  const Eigen::RowVectorXd w = rho.cwiseProduct(rho);

  const Eigen::Matrix3d M = du_[0] * dz[0].transpose() + du_[1] * dz[1].transpose() +
                            (u_.array().rowwise() * w.array()).matrix() * z.transpose();
  ZDistance out;
  out.R = procrustes(M, det_sign_);
  // direct evaluation; ||u||^2 + ||z||^2 - 2 tr(R^T M) would cancel
  const double h2 = grid_.h() * grid_.h();
  double sum = (du_[0] - out.R * dz[0]).squaredNorm() + (du_[1] - out.R * dz[1]).squaredNorm();
  sum += ((u_ - out.R * z).colwise().squaredNorm().array() * w.array()).sum();
  out.distance = std::sqrt(h2 * sum);
  return out;
}

FitResult refine(const Grid& grid, const Vec3Field& u, const BubbleParams& coarse,
                 GreensCache& greens, const RefineOptions& opts) {
  coarse.validate();
  ZDistanceObjective objective(grid, u, greens, coarse.R.determinant() < 0.0 ? -1 : 1);
  const double lo = coarse.lambda / 4.0, hi = coarse.lambda * 4.0;
  const double ax = coarse.a.x(), ay = coarse.a.y();

  auto unpack = [&](const Eigen::VectorXd& x) {
    BubbleParams p;
    p.a = TorusPoint(ax + x(0), ay + x(1));
    p.lambda = coarse.lambda * std::exp(x(2));
    return p;
  };
  auto f = [&](const Eigen::VectorXd& x) {
    const BubbleParams p = unpack(x);
    if (!(p.lambda >= lo && p.lambda <= hi))
      throw FitError("fit left the basin: lambda = " + std::to_string(p.lambda) + " outside [" +
                     std::to_string(lo) + ", " + std::to_string(hi) + "]");
    return objective(p.a, p.lambda).distance;
  };
  auto finish = [&](const Eigen::VectorXd& x, const std::string& stage) {
    FitStage s;
    s.stage = stage;
    s.params = unpack(x);
    const ZDistance d = objective(s.params.a, s.params.lambda);
    s.params.R = d.R;
    s.z_distance = d.distance;
    return s;
  };

  FitResult res;
  {
    FitStage c = finish(Eigen::VectorXd::Zero(3), "coarse");
    c.params.R = coarse.R;
    c.z_distance = z_norm(grid, u - build_z(coarse, grid, greens.samples(grid, coarse.a)).z, coarse);
    res.stage_trace.push_back(c);
  }

  const double step_a = opts.step_a > 0.0 ? opts.step_a : 0.5 * grid.h();
  const Eigen::Vector3d step(step_a, step_a, opts.step_log_lambda);
  const Eigen::Vector3d tol = Eigen::Vector3d::Constant(opts.tol);
  NelderMeadResult nm = nelder_mead(f, Eigen::Vector3d::Zero(), step, tol, opts.max_evaluations);
  res.evaluations = nm.evaluations;
  FitStage best = finish(nm.x, nm.converged ? "refined" : "refined (evaluation cap)");
  res.stage_trace.push_back(best);

  if (opts.restart) {
    // fresh simplex with random signs and sizes around the first optimum
    std::mt19937_64 rng(opts.seed);
    std::uniform_real_distribution<double> size(0.5, 1.5);
    Eigen::Vector3d restart_step;
    for (int k = 0; k < 3; ++k) restart_step(k) = step(k) * size(rng) * (rng() & 1 ? 1.0 : -1.0);
    const NelderMeadResult again = nelder_mead(f, nm.x, restart_step, tol, opts.max_evaluations);
    res.evaluations += again.evaluations;
    FitStage second = finish(again.x, "restart");
    res.stage_trace.push_back(second);
    const double dl = std::abs(second.params.lambda - best.params.lambda) / best.params.lambda;
    const double da = wrapped_gap(second.params.a, best.params.a) * best.params.lambda;
    if (dl > opts.disagreement || da > opts.disagreement) {
      res.alternatives.push_back(second.z_distance < best.z_distance ? best : second);
    }
    if (second.z_distance < best.z_distance) best = second;
  }

  res.params = best.params;
  res.z_distance = best.z_distance;
  return res;
}

FitResult fit_bubble(const Grid& grid, const Vec3Field& u, GreensCache& greens,
                     const RefineOptions& opts) {
  BubbleParams coarse;
  coarse.a = locate(grid, u);
  coarse.lambda = std::max(1.0, scale_estimate(grid, u, coarse.a));
  coarse.R = fit_rotation(grid, u, coarse.a, coarse.lambda);
  return refine(grid, u, coarse, greens, opts);
}

}  // namespace bubblelab
