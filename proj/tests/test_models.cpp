#include "bubblelab/models.hpp"

#include "bubblelab/energy.hpp"
#include "bubblelab/stereo.hpp"
#include "support.hpp"

#include <doctest.h>

using namespace bubblelab;
using namespace bubblelab::testing;

TEST_CASE("parameter validation") {
  CHECK_THROWS_AS(params(0.5).validate(), ModelError);
  Eigen::Matrix3d S = Eigen::Matrix3d::Identity();
  S(0, 1) = 1e-6;
  CHECK_THROWS_AS(params(4.0, {}, S).validate(), ModelError);
  Eigen::Matrix3d F = Eigen::Matrix3d::Identity();
  F(2, 2) = -1.0;
  CHECK_NOTHROW(params(4.0, {}, F).validate());
}

TEST_CASE("cutoff profile") {
  const CutoffProfile phi;
  CHECK(phi(0.0) == 1.0);
  CHECK(phi(0.125) == 1.0);
  CHECK(phi(0.25) == 0.0);
  CHECK(phi(0.4) == 0.0);
  CHECK(phi(0.1875) == doctest::Approx(0.5));
  double prev = 1.0;
  for (int k = 0; k <= 1000; ++k) {
    const double v = phi(0.125 + 0.125 * k / 1000.0);
    CHECK(v <= prev);
    CHECK(v >= 0.0);
    prev = v;
  }
  // C^2 junctions: second differences straddling either end are O(e), not
  // O(1); |phi''| <= 60 t / w^2 at distance t w from the junction.
  const double e = 1e-4, w = phi.outer - phi.inner;
  for (double r0 : {phi.inner, phi.outer}) {
    const double left = (phi(r0 - 2 * e) - 2 * phi(r0 - e) + phi(r0)) / (e * e);
    const double right = (phi(r0) - 2 * phi(r0 + e) + phi(r0 + 2 * e)) / (e * e);
    CHECK(std::abs(left) <= 120 * e / (w * w * w));
    CHECK(std::abs(right) <= 120 * e / (w * w * w));
  }
}

TEST_CASE("model field is unit and sits on the bubble at its centre") {
  const Grid grid(512);
  const auto p = params(16.0);
  const auto m = build_z(p, grid, shared_cache().samples(grid, p.a));
  CHECK(max_abs((m.z.colwise().norm().array() - 1.0).matrix()) <= 1e-12);
  CHECK_FALSE(m.under_resolved);
  CHECK(m.min_raw_norm >= 0.5);
  const Eigen::Index centre = grid.index(256, 256);
  CHECK((m.z.col(centre) - Eigen::Vector3d(0, 0, 1)).norm() <= 1e-2);
}

TEST_CASE("model follows the stereographic bubble inside the cutoff") {
  const Grid grid(256);
  const auto& G = shared_greens();
  for (double lambda : {8.0, 16.0, 32.0}) {
    const auto p = params(lambda, {0.3, 0.6});
    const Vec3Field z = build_z(p, grid, G).z;
    double C = 0.0;
    for (int i = 0; i < grid.n(); ++i)
      for (int j = 0; j < grid.n(); ++j) {
        const ChartDisplacement d = wrap_displacement(grid.node(i, j), p.a);
        const double r = d.norm();
        if (r == 0.0 || r > kCutoffRadius) continue;
        C = std::max(C, (z.col(grid.index(i, j)) - stereo(lambda, Eigen::Vector2d(d))).norm() / (r / lambda));
      }
    // the correction is (2/lambda)(grad j(0) - grad j(x)) with Hess j = pi I
    CHECK(C <= 2 * M_PI * 1.05);
  }
}

TEST_CASE("far field is the normalised Green's-function tail") {
  const Grid grid(128);
  const auto& G = shared_greens();
  Rng rng(31);
  const Eigen::Matrix3d R = random_rotation(rng);
  const double lambda = 12.0;
  const auto p = params(lambda, {0.41, 0.27}, R);
  const Vec3Field z = build_z(p, grid, G).z;
  const Eigen::Vector2d origin = G.grad_regular({0.0, 0.0});
  double worst = 0.0;
  int count = 0;
  for (int i = 0; i < grid.n(); ++i)
    for (int j = 0; j < grid.n(); ++j) {
      const ChartDisplacement d = wrap_displacement(grid.node(i, j), p.a);
      if (d.norm() < 2 * kCutoffRadius) continue;
      const Eigen::Vector2d c = (2.0 / lambda) * (-G.grad_g(d) + origin);
      const Eigen::Vector3d tail = Eigen::Vector3d(c.x(), c.y(), -1.0).normalized();
      worst = std::max(worst, (z.col(grid.index(i, j)) - R * tail).norm());
      ++count;
    }
  CHECK(count > grid.size() / 2);
  CHECK(worst <= 1e-12);
}

TEST_CASE("model construction errors") {
  const Grid grid(64);
  const auto samples = shared_cache().samples(grid, {0.5, 0.5});
  CHECK_THROWS_AS(build_z(params(4.0, {0.25, 0.5}), grid, samples), ModelError);
  CHECK_THROWS_AS(build_z(params(4.0), Grid(128), samples), ModelError);
  CHECK_THROWS_AS(build_z(params(0.9), grid, samples), ModelError);
  CHECK(build_z(params(32.0), grid, samples).under_resolved);
}

TEST_CASE("model degree is the sign of det R") {
  const Grid grid(512);
  Rng rng(32);
  Eigen::Matrix3d R = random_rotation(rng);
  CHECK(std::abs(degree(grid, bubble(grid, params(16.0, {0.5, 0.5}, R))).value - 1.0) <= 1e-6);
  R.col(2) *= -1.0;
  CHECK(std::abs(degree(grid, bubble(grid, params(16.0, {0.5, 0.5}, R))).value + 1.0) <= 1e-6);
}

TEST_CASE("rho_z") {
  const auto p = params(8.0, {0.2, 0.2});
  CHECK(rho_z(p, p.a) == doctest::Approx(8.0));
  CHECK(rho_z(p, {0.325, 0.2}) == doctest::Approx(4.0));
  const double seam = 8.0 / (1.0 + 64.0 / 16.0);
  CHECK(rho_z(p, {0.45, 0.2}) == doctest::Approx(seam));
  CHECK(rho_z(p, {0.7, 0.7}) == doctest::Approx(seam));
  CHECK(rho_z(p, {0.2 + 0.25 * std::cos(1.0), 0.2 + 0.25 * std::sin(1.0)}) ==
        doctest::Approx(seam));
}

TEST_CASE("z-inner product is a symmetric positive definite form") {
  const Grid grid(64);
  const auto p = params(6.0, {0.3, 0.3});
  Rng rng(33);
  const Eigen::Vector3d c(1.0, -2.0, 0.5);
  const Vec3Field C = c.replicate(1, grid.size());
  const ScalarField rho2 = rho_z_field(p, grid).array().square().matrix();
  CHECK(z_inner(grid, C, C, p) == doctest::Approx(c.squaredNorm() * integrate(grid, rho2)));
  CHECK(z_inner(grid, Vec3Field::Zero(3, grid.size()), C, p) == 0.0);

  for (int t = 0; t < 20; ++t) {
    const Vec3Field V = smooth_vec(grid, rng, 6);
    const Vec3Field W = smooth_vec(grid, rng, 6);
    const Vec3Field X = smooth_vec(grid, rng, 6);
    const double vw = z_inner(grid, V, W, p);
    CHECK(vw == doctest::Approx(z_inner(grid, W, V, p)).epsilon(1e-13));
    CHECK(z_inner(grid, V, V, p) > 0.0);
    CHECK(z_inner(grid, (2.0 * V + X).eval(), W, p) ==
          doctest::Approx(2.0 * vw + z_inner(grid, X, W, p)).epsilon(1e-12));
    CHECK(vw * vw <= z_inner(grid, V, V, p) * z_inner(grid, W, W, p) * (1 + 1e-12));
    CHECK(z_norm(grid, (V + W).eval(), p) <= z_norm(grid, V, p) + z_norm(grid, W, p) + 1e-12);
  }
}

TEST_CASE("L1 norm is controlled by the z-norm uniformly in log lambda") {
  const Grid grid(256);
  Rng rng(34);
  std::vector<Vec3Field> fields;
  for (int t = 0; t < 20; ++t) fields.push_back(smooth_vec(grid, rng, 4));
  std::vector<double> K;
  for (double lambda : {8.0, 16.0, 32.0}) {
    const auto p = params(lambda);
    const ScalarField rho = rho_z_field(p, grid);
    double k = 0.0;
    for (const auto& V : fields) {
      const double l1 = V.colwise().norm().sum() * grid.h() * grid.h();
      k = std::max(k, l1 / (std::sqrt(std::log(lambda)) * std::sqrt(z_inner(grid, V, V, rho))));
    }
    K.push_back(k);
  }
  CHECK(K[2] / K[0] <= 1.25);
}

TEST_CASE("tangent basis") {
  const Grid grid(256);
  std::vector<double> scale;
  for (double lambda : {8.0, 16.0, 32.0}) {
    const auto p = params(lambda, {0.5, 0.5});
    const auto basis = tangent_basis(p, grid, shared_cache());
    const Vec3Field z = bubble(grid, p);
    for (int k = 0; k < 6; ++k) {
      INFO(TangentBasis::names[k]);
      CHECK(max_abs(dot(basis.fields[k], z)) <= 1e-6);
    }
    for (int k = 3; k < 6; ++k) CHECK(basis.fields[k].colwise().norm().maxCoeff() <= 1.0 + 1e-15);
    scale.push_back(lambda * basis.fields[0].colwise().norm().maxCoeff());

    const auto half = tangent_basis(p, grid, shared_cache(), 5e-4, 5e-5);
    CHECK(max_abs(half.fields[0] - basis.fields[0]) <= 1e-6);
  }
  for (double C : scale) CHECK(C <= 5.0);
  CHECK_THROWS_AS(tangent_basis(params(1.5), grid, shared_cache()), ModelError);
}
