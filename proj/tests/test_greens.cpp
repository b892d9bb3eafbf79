#include "bubblelab/greens.hpp"

#include "support.hpp"

#include <doctest.h>

#include <complex>

using namespace bubblelab;
using namespace bubblelab::testing;

namespace {

// Square torus closed form up to a constant:
//   g(x) = -log|theta_1(pi z, q)| + pi y^2 + C,  z = x1 + i x2, q = e^{-pi}.
double theta_form(const ChartDisplacement& d) {
  const std::complex<double> v(M_PI * d.x(), M_PI * d.y());
  const double q = std::exp(-M_PI);
  std::complex<double> theta = 0.0;
  for (int n = 0; n < 12; ++n)
    theta += 2.0 * std::pow(-1.0, n) * std::pow(q, (n + 0.5) * (n + 0.5)) *
             std::sin(double(2 * n + 1) * v);
  return -std::log(std::abs(theta)) + M_PI * d.y() * d.y();
}

double smooth_step(double t) {
  auto f = [](double s) { return s > 0.0 ? std::exp(-1.0 / s) : 0.0; };
  return f(t) / (f(t) + f(1.0 - t));
}

// C-infinity radial bump: 1 on [0, 0.1], 0 beyond 0.4.
double bump(double r) { return r <= 0.1 ? 1.0 : r >= 0.4 ? 0.0 : smooth_step((0.4 - r) / 0.3); }

}  // namespace

TEST_CASE("Green's function differences match the theta-function form") {
  const auto& G = shared_greens();
  const ChartDisplacement ref(0.3, 0.2);
  Rng rng(5);
  for (int t = 0; t < 200; ++t) {
    const ChartDisplacement d(uniform(rng, -0.5, 0.5), uniform(rng, -0.5, 0.5));
    if (d.norm() < 1e-3) continue;
    CHECK(G.g(d) - G.g(ref) == doctest::Approx(theta_form(d) - theta_form(ref)).epsilon(1e-11));
  }
}

TEST_CASE("Green's function symmetries") {
  const auto& G = shared_greens();
  CHECK(G.g({0.5, 0.0}) == doctest::Approx(G.g({0.0, 0.5})).epsilon(1e-12));
  Rng rng(6);
  for (int t = 0; t < 100; ++t) {
    const ChartDisplacement d(uniform(rng, -0.5, 0.5), uniform(rng, -0.5, 0.5));
    CHECK(std::abs(G.g(d) - G.g(-d)) <= 1e-10);
    CHECK(std::abs(G.g(d) - G.g({d.y(), d.x()})) <= 1e-10);
    CHECK(std::abs(G.g(d) - G.g({d.x() + 1.0, d.y()})) <= 1e-10);
    CHECK((G.grad_J_y(d) + G.grad_J_y(-d)).norm() <= 1e-12);
  }
}

TEST_CASE("Green's function is singular only at the origin") {
  const auto& G = shared_greens();
  CHECK_THROWS_AS(G.g({0.0, 0.0}), GreensError);
  CHECK(std::isfinite(G.regular({0.0, 0.0})));
  // grad j(0) = 0, so j(d) - j(0) is quadratic.
  for (double r : {1e-2, 1e-4, 1e-6, 1e-8}) {
    const ChartDisplacement d(0.6 * r, -0.8 * r);
    CHECK(std::abs(G.regular(d) - G.regular({0.0, 0.0})) <= 10.0 * r * r);
    CHECK(std::abs(G.g(d) + std::log(r) - G.regular(d)) <= 1e-9);
  }
}

TEST_CASE("Green's function has mean zero") {
  // g = (g + bump log|x|) - bump log|x|: the first part is smooth and
  // periodic so the node sum is spectrally accurate, the second is radial.
  const auto& G = shared_greens();
  const Grid grid(256);
  double smooth_sum = 0.0;
  for (int i = 0; i < grid.n(); ++i)
    for (int j = 0; j < grid.n(); ++j) {
      const ChartDisplacement d = wrap_displacement(grid.node(i, j), {0.0, 0.0});
      const double r = d.norm();
      smooth_sum += r == 0.0 ? G.regular(d) : G.g(d) + bump(r) * std::log(r);
    }
  smooth_sum *= grid.h() * grid.h();

  const double r0 = 0.1;
  double radial = r0 * r0 / 2 * std::log(r0) - r0 * r0 / 4;  // int_0^r0 r log r
  const int m = 4000;
  const double dr = 0.3 / m;
  for (int k = 0; k <= m; ++k) {
    const double r = r0 + k * dr;
    const double w = k == 0 || k == m ? 1.0 : k % 2 ? 4.0 : 2.0;
    radial += w * dr / 3 * bump(r) * r * std::log(r);
  }
  CHECK(std::abs(smooth_sum - 2 * M_PI * radial) <= 1e-6);
}

TEST_CASE("mixed gradient of the regular part is continuous at the origin") {
  const auto& G = shared_greens();
  CHECK(G.grad_J_y({0.0, 0.0}).norm() <= 1e-12);
  double C = 0.0;
  for (double r : {1e-4, 1e-3, 1e-2})
    for (int k = 0; k < 8; ++k) {
      const double t = 2 * M_PI * k / 8;
      const ChartDisplacement d(r * std::cos(t), r * std::sin(t));
      C = std::max(C, (G.grad_J_y(d) - G.grad_J_y({0.0, 0.0})).norm() / r);
    }
  CHECK(C < 10.0);
}

TEST_CASE("script-J from one-forms is -2 pi and independent of the point") {
  CHECK(script_J_forms() == doctest::Approx(-2 * M_PI).epsilon(1e-15));
  CHECK(script_J_forms({0.3, 0.8}) == script_J_forms({0.0, 0.0}));
  CHECK(script_J_forms({}, 2.0) == doctest::Approx(-4 * M_PI));
}

TEST_CASE("script-J from the Green's function agrees with the one-forms") {
  const auto res = script_J_greens(shared_greens());
  CHECK(res.value == doctest::Approx(script_J_forms()).epsilon(1e-6));
  CHECK(res.error_estimate <= 1e-3 * std::abs(res.value));
  const auto& m = res.jet.mixed_hessian;
  CHECK(std::abs(m(0, 1)) <= 1e-6);
  CHECK(std::abs(m(1, 0)) <= 1e-6);
  const auto& traces = res.jet.richardson_traces;
  REQUIRE(traces.size() >= 2);
  for (std::size_t k = 1; k < traces.size(); ++k) CHECK(std::abs(traces[k] - traces[0]) <= 1e-5);
}

TEST_CASE("another Ewald split gives the same function") {
  EwaldParameters p;
  p.split = 2 * M_PI;
  p.real_space_shells = 3;
  p.fourier_shells = 4;
  const GreensEvaluator other(p);
  const auto& G = shared_greens();
  Rng rng(7);
  for (int t = 0; t < 50; ++t) {
    const ChartDisplacement d(uniform(rng, -0.5, 0.5), uniform(rng, -0.5, 0.5));
    CHECK(std::abs(other.g(d) - G.g(d)) <= 1e-11);
    CHECK((other.grad_g(d) - G.grad_g(d)).norm() <= 1e-10);
  }
}

TEST_CASE("truncations with large tails are refused") {
  EwaldParameters p;
  p.real_space_shells = 1;
  CHECK_THROWS_AS(GreensEvaluator{p}, GreensError);
  EwaldParameters q;
  q.fourier_shells = 1;
  CHECK_THROWS_AS(GreensEvaluator{q}, GreensError);
}

TEST_CASE("discrete Laplacian residual is second order in h") {
  const auto& G = shared_greens();
  const double inner = 0.1, outer = 0.5;
  const double coarse = check_pde_residual(G, Grid(256), inner, outer);
  const double fine = check_pde_residual(G, Grid(512), inner, outer);
  CHECK(coarse / fine == doctest::Approx(4.0).epsilon(0.05));
  // Leading truncation of the 5-point stencil on -log r: h^2 |cos 4t| / r^4.
  const double h = 1.0 / 512;
  CHECK(fine <= 1.1 * h * h / std::pow(inner, 4));
}

TEST_CASE("tensor-lattice gradients equal pointwise evaluation") {
  const auto& G = shared_greens();
  const Grid grid(64);
  const TorusPoint a(0.123, 0.877);
  const auto s = sample_greens(G, grid, a);
  double worst = 0.0;
  for (Eigen::Index k = 0; k < grid.size(); ++k) {
    const ChartDisplacement d = s.displacement.col(k);
    worst = std::max(worst, (s.grad_regular.col(k) - G.grad_regular(d)).norm());
  }
  CHECK(worst <= 1e-13);
  CHECK(s.grad_regular_origin.norm() <= 1e-12);
}

TEST_CASE("cached samples at a node equal direct sampling") {
  const Grid grid(64);
  const TorusPoint a = grid.node(10, 37);
  const auto cached = shared_cache().samples(grid, a);
  const auto direct = sample_greens(shared_greens(), grid, a);
  CHECK(max_abs(cached.displacement - direct.displacement) <= 1e-15);
  CHECK(max_abs(cached.grad_regular - direct.grad_regular) <= 1e-13);
}
