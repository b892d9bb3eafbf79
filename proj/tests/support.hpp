#ifndef BUBBLELAB_TESTS_SUPPORT_HPP
#define BUBBLELAB_TESTS_SUPPORT_HPP

// Shared generators for the tests: smooth random fields, random rotations,
// model fields from one process-wide Green's cache.

#include "bubblelab/greens.hpp"
#include "bubblelab/models.hpp"
#include "bubblelab/torus.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <memory>
#include <random>

namespace bubblelab::testing {

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo = -1.0, double hi = 1.0) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

/// Trigonometric polynomial with modes |k_i| <= kmax and random coefficients.
inline ScalarField smooth_scalar(const Grid& grid, Rng& rng, int kmax = 3) {
  ScalarField f = ScalarField::Zero(1, grid.size());
  for (int k1 = -kmax; k1 <= kmax; ++k1)
    for (int k2 = 0; k2 <= kmax; ++k2) {
      const double c = uniform(rng) / (1.0 + k1 * k1 + k2 * k2);
      const double s = uniform(rng) / (1.0 + k1 * k1 + k2 * k2);
      f += sample<1>(grid, [&](const TorusPoint& p) {
        const double t = 2.0 * M_PI * (k1 * p.x() + k2 * p.y());
        return c * std::cos(t) + s * std::sin(t);
      });
    }
  return f;
}

inline Vec3Field smooth_vec(const Grid& grid, Rng& rng, int kmax = 3) {
  Vec3Field v(3, grid.size());
  for (int c = 0; c < 3; ++c) v.row(c) = smooth_scalar(grid, rng, kmax);
  return v;
}

/// Normalised e + v with |v| < 1/2 everywhere, so the map never degenerates.
inline Vec3Field smooth_unit_map(const Grid& grid, Rng& rng, int kmax = 3) {
  Vec3Field v = smooth_vec(grid, rng, kmax);
  v *= 0.5 / v.colwise().norm().maxCoeff();
  Eigen::Vector3d e(uniform(rng), uniform(rng), uniform(rng));
  e.normalize();
  v.colwise() += e;
  return v.colwise().normalized();
}

inline Vec3Field tangent_part(const Vec3Field& u, Vec3Field v) {
  for (Eigen::Index k = 0; k < v.cols(); ++k) v.col(k) -= v.col(k).dot(u.col(k)) * u.col(k);
  return v;
}

inline Eigen::Matrix3d random_rotation(Rng& rng) {
  std::normal_distribution<double> nd;
  Eigen::Quaterniond q(nd(rng), nd(rng), nd(rng), nd(rng));
  return q.normalized().toRotationMatrix();
}

inline GreensCache& shared_cache() {
  static GreensCache cache(std::make_shared<const GreensEvaluator>());
  return cache;
}

inline const GreensEvaluator& shared_greens() { return shared_cache().evaluator(); }

inline BubbleParams params(double lambda, TorusPoint a = {0.5, 0.5},
                           Eigen::Matrix3d R = Eigen::Matrix3d::Identity()) {
  BubbleParams p;
  p.a = a;
  p.lambda = lambda;
  p.R = R;
  return p;
}

inline Vec3Field bubble(const Grid& grid, const BubbleParams& p) {
  return build_z(p, grid, shared_cache().samples(grid, p.a)).z;
}

inline double max_abs(const Eigen::MatrixXd& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace bubblelab::testing

#endif  // BUBBLELAB_TESTS_SUPPORT_HPP
