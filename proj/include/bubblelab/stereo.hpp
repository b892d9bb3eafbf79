#ifndef BUBBLELAB_STEREO_HPP
#define BUBBLELAB_STEREO_HPP

// Inverse stereographic projection at scale lambda, pi_l : R^2 -> S^2, and
// its closed-form derivatives.

#include <Eigen/Dense>

namespace bubblelab {

template <typename Scalar>
Eigen::Matrix<Scalar, 3, 1> stereo(Scalar lambda, const Eigen::Matrix<Scalar, 2, 1>& x) {
  const Scalar l2r2 = lambda * lambda * x.squaredNorm();
  const Scalar inv = Scalar(1) / (Scalar(1) + l2r2);
  return {Scalar(2) * lambda * x(0) * inv, Scalar(2) * lambda * x(1) * inv,
          (Scalar(1) - l2r2) * inv};
}

template <typename Scalar>
struct StereoJet {
  Eigen::Matrix<Scalar, 3, 1> value;
  Eigen::Matrix<Scalar, 3, 2> gradient;  // column i is d/dx_i
  Eigen::Matrix<Scalar, 3, 1> laplacian;
  Eigen::Matrix<Scalar, 3, 1> dlambda;
};

template <typename Scalar>
StereoJet<Scalar> stereo_jet(Scalar lambda, const Eigen::Matrix<Scalar, 2, 1>& x) {
  const Scalar l = lambda;
  const Scalar l2 = l * l;
  const Scalar x1 = x(0), x2 = x(1);
  const Scalar q = Scalar(1) + l2 * x.squaredNorm();

  StereoJet<Scalar> jet;
  jet.value = stereo(lambda, x);

  const Scalar c = Scalar(2) * l / (q * q);
  jet.gradient.col(0) << c * (Scalar(1) - l2 * x1 * x1 + l2 * x2 * x2),
      c * (Scalar(-2) * l2 * x1 * x2), c * (Scalar(-2) * l * x1);
  jet.gradient.col(1) << c * (Scalar(-2) * l2 * x1 * x2),
      c * (Scalar(1) + l2 * x1 * x1 - l2 * x2 * x2), c * (Scalar(-2) * l * x2);

  jet.laplacian = (Scalar(-8) * l2 / (q * q)) * jet.value;
  jet.dlambda = (x1 * jet.gradient.col(0) + x2 * jet.gradient.col(1)) / l;
  return jet;
}

}  // namespace bubblelab

#endif  // BUBBLELAB_STEREO_HPP
