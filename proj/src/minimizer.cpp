#include "bubblelab/minimizer.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>

namespace bubblelab {

Vec3Field retract(const Vec3Field& u, const Vec3Field& d, double tau) {
  if (tau == 0.0) return u;
  Vec3Field out = u + tau * d;
  for (Eigen::Index k = 0; k < out.cols(); ++k) {
    const double nrm = out.col(k).norm();
    if (nrm < 0.5) throw MinimizeError("retraction degenerates: step too large");
    out.col(k) /= nrm;
  }
  return out;
}

SpectralPreconditioner::SpectralPreconditioner(const Grid& grid, double epsilon, double shift)
    : grid_(grid), epsilon_(epsilon), shift_(shift), inverse_symbol_(grid.size()) {
  if (!(shift > 0.0)) throw std::invalid_argument("preconditioner shift must be positive");
  for (int i = 0; i < grid.n(); ++i)
    for (int j = 0; j < grid.n(); ++j) {
      const double sigma = -laplacian_symbol(grid, i, j);
      inverse_symbol_(grid.index(i, j)) = 1.0 / (shift + sigma + epsilon * sigma * sigma);
    }
}

void SpectralPreconditioner::transform(std::vector<std::complex<double>>& data, bool inverse) const {
  const int n = grid_.n();
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> in(n), out(n);
  auto pass = [&](std::complex<double>* base, std::ptrdiff_t stride) {
    for (int k = 0; k < n; ++k) in[k] = base[k * stride];
    if (inverse)
      fft.inv(out.data(), in.data(), n);
    else
      fft.fwd(out.data(), in.data(), n);
    for (int k = 0; k < n; ++k) base[k * stride] = out[k];
  };
  for (int i = 0; i < n; ++i) pass(data.data() + std::ptrdiff_t(i) * n, 1);
  for (int j = 0; j < n; ++j) pass(data.data() + j, n);
}

Vec3Field SpectralPreconditioner::solve(const Vec3Field& r) const {
  const auto N = grid_.size();
  Vec3Field out(3, N);
  std::vector<std::complex<double>> buf(N);
  // Two real components per complex transform; the symbol is real and even.
  for (int pair = 0; pair < 2; ++pair) {
    const int c0 = 2 * pair, c1 = 2 * pair + 1;
    for (Eigen::Index k = 0; k < N; ++k) buf[k] = {r(c0, k), c1 < 3 ? r(c1, k) : 0.0};
    transform(buf, false);
    for (Eigen::Index k = 0; k < N; ++k) buf[k] *= inverse_symbol_(k);
    transform(buf, true);
    for (Eigen::Index k = 0; k < N; ++k) {
      out(c0, k) = buf[k].real();
      if (c1 < 3) out(c1, k) = buf[k].imag();
    }
  }
  return out;
}

Vec3Field SpectralPreconditioner::apply(const Vec3Field& s) const {
  const Vec3Field lap = laplacian(grid_, s);
  Vec3Field out = shift_ * s - lap;
  if (epsilon_ != 0.0) out += epsilon_ * laplacian(grid_, lap);
  return out;
}

double residual_norm(const Grid& grid, const Vec3Field& r) { return r.norm() * grid.h(); }

double peak_scale(const Grid& grid, const Vec3Field& u) {
  return gradient_sup(grid, u) / (2.0 * std::sqrt(2.0));
}

namespace {

Vec3Field project_tangent(const Vec3Field& u, Vec3Field v) {
  for (Eigen::Index k = 0; k < v.cols(); ++k) v.col(k) -= v.col(k).dot(u.col(k)) * u.col(k);
  return v;
}

}  // namespace

MinimizeResult minimize(const Grid& grid, const Vec3Field& u0, double epsilon,
                        const MinimizeOptions& opts) {
  require_unit(u0);
  if (!(opts.backtrack > 0.0 && opts.backtrack < 1.0))
    throw std::invalid_argument("backtracking factor must lie in (0, 1)");
  if (!(opts.tol > 0.0) && !(opts.rel_tol > 0.0))
    throw std::invalid_argument("a positive tolerance is required");

  const double h2 = grid.h() * grid.h();
  const SpectralPreconditioner precond(grid, epsilon, opts.precondition_shift);

  MinimizeResult res;
  res.u = u0;
  res.degree_in = degree(grid, u0);
  double E = energy(grid, res.u, epsilon).total;
  Vec3Field r = el_residual(grid, res.u, epsilon);
  double rnorm = residual_norm(grid, r);
  res.initial_residual = rnorm;
  res.threshold = opts.tol > 0.0 ? opts.tol : opts.rel_tol * rnorm;
  res.energy_trace.push_back(E);
  res.residual_trace.push_back(rnorm);

  double alpha = 1.0;
  int k = 0;
  res.status = "max_iters";
  while (true) {
    if (rnorm <= res.threshold || rnorm == 0.0) {
      res.converged = true;
      res.status = "converged";
      break;
    }
    if (k >= opts.max_iters) break;

    const Vec3Field d =
        -project_tangent(res.u, opts.precondition ? precond.solve(r) : Vec3Field(r));
    const double slope = h2 * r.cwiseProduct(d).sum();
    if (!(slope < 0.0)) {
      res.status = "no descent direction";
      break;
    }

    alpha = std::clamp(alpha, 1e-10, 1e10);
    const double trial_decrease = -alpha * slope;
    Vec3Field u_new;
    double E_new = std::numeric_limits<double>::infinity();
    bool accepted = false;
    for (int bt = 0; bt <= opts.max_backtracks; ++bt) {
      try {
        u_new = retract(res.u, d, alpha);
        E_new = energy(grid, u_new, epsilon).total;
        if (E_new <= E + opts.armijo_c * alpha * slope) {
          accepted = true;
          break;
        }
      } catch (const MinimizeError&) {
        // step overshoots the sphere: shrink
      }
      alpha *= opts.backtrack;
    }
    if (!accepted) {
      // Armijo cannot be resolved once the expected decrease is lost in the
      // rounding of E.
      res.status = trial_decrease < 1e-12 * std::abs(E) ? "round-off floor" : "line search failed";
      break;
    }

    const Vec3Field r_new = el_residual(grid, u_new, epsilon);
    const Vec3Field s = u_new - res.u;
    const double sy = h2 * s.cwiseProduct(r_new - r).sum();
    const double sMs =
        h2 * s.cwiseProduct(opts.precondition ? precond.apply(s) : Vec3Field(s)).sum();
    alpha = sy > 0.0 ? sMs / sy : 2.0 * alpha;

    res.u = u_new;
    r = r_new;
    E = E_new;
    rnorm = residual_norm(grid, r);
    ++k;
    res.energy_trace.push_back(E);
    res.residual_trace.push_back(rnorm);

    if (opts.degree_check_every > 0 && k % opts.degree_check_every == 0) {
      const DegreeResult deg = degree(grid, res.u);
      if (deg.nearest != res.degree_in.nearest)
        throw MinimizeError("degree changed from " + std::to_string(res.degree_in.nearest) +
                                " to " + std::to_string(deg.nearest) + " at iteration " +
                                std::to_string(k),
                            epsilon);
    }
    if (opts.log_every > 0 && k % opts.log_every == 0)
      std::cerr << "iter=" << k << " E=" << E << " res=" << rnorm << '\n';
  }

  res.iterations = k;
  res.final_residual = rnorm;
  res.degree_out = degree(grid, res.u);
  if (res.degree_out.nearest != res.degree_in.nearest)
    throw MinimizeError("degree changed from " + std::to_string(res.degree_in.nearest) + " to " +
                            std::to_string(res.degree_out.nearest),
                        epsilon);
  return res;
}

std::vector<MinimizeResult> continuation_sweep(const Grid& grid, const std::vector<double>& eps_list,
                                               const Vec3Field& u_seed,
                                               const MinimizeOptions& opts, bool warm_start,
                                               const SweepCallback& on_result) {
  for (std::size_t k = 0; k < eps_list.size(); ++k) {
    if (!(eps_list[k] > 0.0)) throw std::invalid_argument("epsilon values must be positive");
    if (k > 0 && !(eps_list[k] < eps_list[k - 1]))
      throw std::invalid_argument("epsilon list must be strictly decreasing");
  }

  auto guard = [&](const Vec3Field& u, double eps) {
    const double scale = peak_scale(grid, u);
    if (scale * grid.h() > 0.25)
      throw MinimizeError("bubble under-resolved: lambda h = " + std::to_string(scale * grid.h()),
                          eps);
  };

  std::vector<MinimizeResult> out;
  out.reserve(eps_list.size());
  const Vec3Field* start = &u_seed;
  for (double eps : eps_list) {
    guard(*start, eps);
    try {
      out.push_back(minimize(grid, *start, eps, opts));
    } catch (const MinimizeError& e) {
      throw MinimizeError(std::string(e.what()) + " (epsilon = " + std::to_string(eps) + ")", eps);
    } catch (const std::exception& e) {
      throw MinimizeError(std::string(e.what()) + " (epsilon = " + std::to_string(eps) + ")", eps);
    }
    guard(out.back().u, eps);
    if (on_result) on_result(out.size() - 1, out.back());
    if (warm_start) start = &out.back().u;
  }
  return out;
}

}  // namespace bubblelab
