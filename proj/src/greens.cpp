#include "bubblelab/greens.hpp"

#include <array>
#include <cmath>
#include <numbers>

namespace bubblelab {

namespace {

constexpr double kEulerGamma = std::numbers::egamma;
constexpr double kNegligibleExponent = 40.0;  // exp(-40) ~ 4e-18
constexpr int kMaxShells = 12;

// E1(t) + log(t), finite as t -> 0.
double e1_plus_log(double t) {
  if (t < 1.0) {
    // -gamma + Ein(t),  Ein(t) = sum_k (-1)^{k+1} t^k / (k k!)
    double term = 1.0, sum = 0.0;
    for (int k = 1; k < 40; ++k) {
      term *= t / k;
      const double add = (k % 2 ? term : -term) / k;
      sum += add;
      if (std::abs(add) < 1e-18) break;
    }
    return -kEulerGamma + sum;
  }
  return -std::expint(-t) + std::log(t);
}

double e1(double t) { return -std::expint(-t); }

// (1 - exp(-t)) / t
double one_minus_exp_over(double t) { return t < 1e-300 ? 1.0 : -std::expm1(-t) / t; }

struct TrigTable {
  std::array<double, kMaxShells + 1> c{}, s{};
  TrigTable(double x, int shells) {
    const double a = 2.0 * M_PI * x;
    const double ca = std::cos(a), sa = std::sin(a);
    c[0] = 1.0;
    s[0] = 0.0;
    for (int k = 1; k <= shells; ++k) {
      c[k] = c[k - 1] * ca - s[k - 1] * sa;
      s[k] = s[k - 1] * ca + c[k - 1] * sa;
    }
  }
  double cos_at(int k) const { return c[std::abs(k)]; }
  double sin_at(int k) const { return k < 0 ? -s[-k] : s[k]; }
};

}  // namespace

GreensEvaluator::GreensEvaluator(EwaldParameters params) : params_(params) {
  const double s = params_.split;
  const int L = params_.real_space_shells;
  const int K = params_.fourier_shells;
  if (!(s > 0.0) || L < 0 || K < 0 || L > kMaxShells || K > kMaxShells)
    throw GreensError("invalid Ewald parameters");

  for (int n1 = -L; n1 <= L; ++n1)
    for (int n2 = -L; n2 <= L; ++n2)
      if (n1 != 0 || n2 != 0) images_.emplace_back(n1, n2);

  for (int k1 = 0; k1 <= K; ++k1)
    for (int k2 = -K; k2 <= K; ++k2) {
      if (k1 == 0 && k2 <= 0) continue;
      const double k2norm = double(k1 * k1 + k2 * k2);
      modes_.push_back({k1, k2, std::exp(-M_PI * M_PI * k2norm / s) / (M_PI * k2norm)});
    }

  // Omitted images sit at distance >= L + 1/2 from every chart point; omitted
  // modes have |k| >= K + 1. Shell sizes bound the number of omitted terms
  // that matter.
  const double R = L + 0.5;
  real_tail_ = 8.0 * (L + 1) * std::exp(-s * R * R) * std::max(1.0 / R, 1.0 / (2.0 * s * R * R));
  const double kmin = K + 1.0;
  fourier_tail_ = 8.0 * (K + 1) * std::exp(-M_PI * M_PI * kmin * kmin / s) * (1.0 + 2.0 * M_PI * kmin);
  if (real_tail_ > 1e-12 || fourier_tail_ > 1e-12)
    throw GreensError("Ewald sums not converged: real-space tail " + std::to_string(real_tail_) +
                      ", Fourier tail " + std::to_string(fourier_tail_));
}

double GreensEvaluator::smooth_value(const Eigen::Vector2d& d) const {
  const double s = params_.split;
  double sum = -M_PI / (2.0 * s);
  for (const auto& n : images_) {
    const double t = s * (d + n).squaredNorm();
    if (t < kNegligibleExponent) sum += 0.5 * e1(t);
  }
  const TrigTable tx(d(0), params_.fourier_shells), ty(d(1), params_.fourier_shells);
  for (const auto& m : modes_) {
    const double c = tx.cos_at(m.k1) * ty.cos_at(m.k2) - tx.sin_at(m.k1) * ty.sin_at(m.k2);
    sum += m.weight * c;
  }
  return sum;
}

Eigen::Vector2d GreensEvaluator::smooth_grad(const Eigen::Vector2d& d) const {
  const double s = params_.split;
  Eigen::Vector2d sum = Eigen::Vector2d::Zero();
  for (const auto& n : images_) {
    const Eigen::Vector2d y = d + n;
    const double r2 = y.squaredNorm();
    if (s * r2 < kNegligibleExponent) sum -= (std::exp(-s * r2) / r2) * y;
  }
  const TrigTable tx(d(0), params_.fourier_shells), ty(d(1), params_.fourier_shells);
  for (const auto& m : modes_) {
    const double sn = tx.sin_at(m.k1) * ty.cos_at(m.k2) + tx.cos_at(m.k1) * ty.sin_at(m.k2);
    const double f = -2.0 * M_PI * m.weight * sn;
    sum(0) += f * m.k1;
    sum(1) += f * m.k2;
  }
  return sum;
}

double GreensEvaluator::g(const ChartDisplacement& d) const {
  const double r2 = d.squaredNorm();
  if (r2 == 0.0) throw GreensError("Green's function evaluated at its singularity");
  return 0.5 * e1(params_.split * r2) + smooth_value(d);
}

Eigen::Vector2d GreensEvaluator::grad_g(const ChartDisplacement& d) const {
  const double r2 = d.squaredNorm();
  if (r2 == 0.0) throw GreensError("Green's function gradient evaluated at its singularity");
  return grad_regular(d) - d / r2;
}

double GreensEvaluator::regular(const ChartDisplacement& d) const {
  const double s = params_.split;
  return 0.5 * e1_plus_log(s * d.squaredNorm()) - 0.5 * std::log(s) + smooth_value(d);
}

Eigen::Vector2d GreensEvaluator::grad_regular(const ChartDisplacement& d) const {
  const double s = params_.split;
  return s * one_minus_exp_over(s * d.squaredNorm()) * d + smooth_grad(d);
}

double eval_g(const GreensEvaluator& G, const ChartDisplacement& d) { return G.g(d); }

Eigen::Vector2d eval_gradJ_y(const GreensEvaluator& G, const ChartDisplacement& x) {
  return G.grad_J_y(x);
}

double script_J_forms(const TorusPoint&, double c_gamma) {
  // phi = dz is L^2-normalised on the unit-area flat torus, |phi|^2 = 1.
  constexpr double phi_norm2 = 1.0;
  return -2.0 * M_PI * c_gamma * phi_norm2;
}

RegularPartJet regular_part_jet(const GreensEvaluator& G, const std::vector<double>& steps) {
  if (steps.size() < 2) throw std::invalid_argument("need at least two difference steps");

  auto mixed = [&](double h) {
    Eigen::Matrix2d H;
    for (int i = 0; i < 2; ++i) {
      Eigen::Vector2d e = Eigen::Vector2d::Zero();
      e(i) = h;
      H.row(i) = ((G.grad_J_y(e) - G.grad_J_y(-e)) / (2.0 * h)).transpose();
    }
    return H;
  };

  std::vector<Eigen::Matrix2d> levels;
  for (double h : steps) levels.push_back(mixed(h));

  RegularPartJet jet;
  std::vector<Eigen::Matrix2d> extrapolated;
  for (std::size_t k = 0; k + 1 < levels.size(); ++k) {
    const double ratio2 = std::pow(steps[k] / steps[k + 1], 2);
    extrapolated.push_back((ratio2 * levels[k + 1] - levels[k]) / (ratio2 - 1.0));
    jet.richardson_traces.push_back(extrapolated.back().trace());
  }
  jet.mixed_hessian = extrapolated.back();
  jet.trace_error = extrapolated.size() > 1
                        ? std::abs(jet.richardson_traces.back() - jet.richardson_traces.front())
                        : std::abs(levels.back().trace() - levels.front().trace());

  // d^3 J / dx^i dx^j dy^j from second differences of grad_J_y.
  const double h = steps.back();
  const Eigen::Vector2d g0 = G.grad_J_y(Eigen::Vector2d::Zero());
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      if (i == j) {
        Eigen::Vector2d e = Eigen::Vector2d::Zero();
        e(i) = h;
        jet.third(i, j) = (G.grad_J_y(e)(j) - 2.0 * g0(j) + G.grad_J_y(-e)(j)) / (h * h);
      } else {
        const Eigen::Vector2d pp(h, h), pm(h, -h);
        jet.third(i, j) =
            (G.grad_J_y(pp)(j) - G.grad_J_y(pm)(j) - G.grad_J_y(-pm)(j) + G.grad_J_y(-pp)(j)) /
            (4.0 * h * h);
      }
    }
  return jet;
}

ScriptJGreens script_J_greens(const GreensEvaluator& G, const std::vector<double>& steps) {
  RegularPartJet jet = regular_part_jet(G, steps);
  const double value = jet.mixed_hessian.trace();
  if (!(jet.trace_error <= 1e-3 * std::abs(value)))
    throw GreensError("script-J differencing error " + std::to_string(jet.trace_error) +
                      " exceeds 1e-3 relative");
  return {value, jet.trace_error, jet};
}

double check_pde_residual(const GreensEvaluator& G, const Grid& grid, double inner_radius,
                          double outer_radius) {
  const TorusPoint origin;
  const int n = grid.n();
  // g is needed on the mask plus a one-node halo; the singular node gets a
  // placeholder that never enters a masked stencil when inner >= h.
  ScalarField g(1, grid.size());
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const ChartDisplacement d = wrap_displacement(grid.node(i, j), origin);
      g(0, grid.index(i, j)) = d.squaredNorm() == 0.0 ? 0.0 : G.g(d);
    }
  const ScalarField lap = laplacian(grid, g);
  double worst = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double r = wrap_displacement(grid.node(i, j), origin).norm();
      if (r < std::max(inner_radius, 1.5 * grid.h()) || r > outer_radius) continue;
      worst = std::max(worst, std::abs(-lap(0, grid.index(i, j)) + 2.0 * M_PI));
    }
  return worst;
}

void GreensEvaluator::grad_regular_lattice(const std::vector<double>& xs,
                                           const std::vector<double>& ys,
                                           Eigen::Matrix2Xd& out) const {
  // Same sums as grad_regular; the Gaussian and trig factors separate in x, y.
  const double s = params_.split;
  const int L = params_.real_space_shells, K = params_.fourier_shells;
  const std::size_t nx = xs.size(), ny = ys.size();
  const int span = 2 * L + 1;
  auto gauss_table = [&](const std::vector<double>& v) {
    std::vector<double> t(v.size() * span);
    for (std::size_t i = 0; i < v.size(); ++i)
      for (int m = -L; m <= L; ++m) t[i * span + (m + L)] = std::exp(-s * (v[i] + m) * (v[i] + m));
    return t;
  };
  const std::vector<double> gx = gauss_table(xs), gy = gauss_table(ys);
  std::vector<TrigTable> tx, ty;
  for (double x : xs) tx.emplace_back(x, K);
  for (double y : ys) ty.emplace_back(y, K);

  out.resize(2, Eigen::Index(nx * ny));
  for (std::size_t i = 0; i < nx; ++i)
    for (std::size_t j = 0; j < ny; ++j) {
      const Eigen::Vector2d d(xs[i], ys[j]);
      Eigen::Vector2d sum = Eigen::Vector2d::Zero();
      const double t0 = s * d.squaredNorm();
      if (t0 > 0.0) {
        // s (1 - exp(-t)) / t; the series avoids cancellation for small t
        const double f =
            t0 < 1e-2 ? 1.0 - t0 / 2.0 * (1.0 - t0 / 3.0 * (1.0 - t0 / 4.0 * (1.0 - t0 / 5.0 * (1.0 - t0 / 6.0))))
                      : (1.0 - gx[i * span + L] * gy[j * span + L]) / t0;
        sum += s * f * d;
      }
      // Branch-free: images beyond the negligible exponent add < 1e-17.
      double sx = 0.0, sy = 0.0;
      for (int n1 = -L; n1 <= L; ++n1) {
        const double y1 = d(0) + n1, w1 = gx[i * span + (n1 + L)];
        for (int n2 = -L; n2 <= L; ++n2) {
          const double y2 = d(1) + n2;
          const double w = (n1 == 0 && n2 == 0) ? 0.0 : w1 * gy[j * span + (n2 + L)] / (y1 * y1 + y2 * y2 + 1e-300);
          sx += w * y1;
          sy += w * y2;
        }
      }
      sum(0) -= sx;
      sum(1) -= sy;
      for (const auto& m : modes_) {
        const double sn = tx[i].sin_at(m.k1) * ty[j].cos_at(m.k2) +
                          tx[i].cos_at(m.k1) * ty[j].sin_at(m.k2);
        const double f = -2.0 * M_PI * m.weight * sn;
        sum(0) += f * m.k1;
        sum(1) += f * m.k2;
      }
      out.col(Eigen::Index(i * ny + j)) = sum;
    }
}

GreensSamples sample_greens(const GreensEvaluator& G, const Grid& grid, const TorusPoint& a) {
  const int n = grid.n();
  GreensSamples out;
  out.n = n;
  out.a = a;
  out.grad_regular_origin = G.grad_regular(Eigen::Vector2d::Zero());
  std::vector<double> xs(n), ys(n);
  for (int i = 0; i < n; ++i) {
    xs[i] = wrap_coordinate(i * grid.h() - a.x());
    ys[i] = wrap_coordinate(i * grid.h() - a.y());
  }
  G.grad_regular_lattice(xs, ys, out.grad_regular);
  out.displacement.resize(2, grid.size());
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) out.displacement.col(grid.index(i, j)) = Eigen::Vector2d(xs[i], ys[j]);
  return out;
}

GreensCache::GreensCache(std::shared_ptr<const GreensEvaluator> evaluator)
    : evaluator_(std::move(evaluator)) {}

GreensSamples GreensCache::samples(const Grid& grid, const TorusPoint& a) {
  const int n = grid.n();
  const double fi = a.x() * n, fj = a.y() * n;
  const long ia = std::lround(fi), ja = std::lround(fj);
  if (std::abs(fi - ia) > 1e-9 || std::abs(fj - ja) > 1e-9) return sample_greens(*evaluator_, grid, a);

  auto it = base_.find(n);
  if (it == base_.end()) it = base_.emplace(n, sample_greens(*evaluator_, grid, TorusPoint{})).first;
  const GreensSamples& base = it->second;

  GreensSamples out;
  out.n = n;
  out.a = grid.node(int(ia), int(ja));
  out.grad_regular_origin = base.grad_regular_origin;
  out.displacement.resize(2, grid.size());
  out.grad_regular.resize(2, grid.size());
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const auto src = grid.index(i - int(ia), j - int(ja));
      out.displacement.col(grid.index(i, j)) = base.displacement.col(src);
      out.grad_regular.col(grid.index(i, j)) = base.grad_regular.col(src);
    }
  return out;
}

}  // namespace bubblelab
