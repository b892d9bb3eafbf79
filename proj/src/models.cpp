#include "bubblelab/models.hpp"

#include "bubblelab/stereo.hpp"

#include <cmath>

namespace bubblelab {

void BubbleParams::validate() const {
  if (!(lambda >= 1.0)) throw ModelError("bubble scale must satisfy lambda >= 1");
  if (!((R.transpose() * R - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() <= 1e-12))
    throw ModelError("R is not orthogonal");
}

Eigen::Vector3d model_point(double lambda, const ChartDisplacement& d,
                            const Eigen::Vector2d& grad_regular,
                            const Eigen::Vector2d& grad_regular_origin,
                            const CutoffProfile& cutoff) {
  const double r = d.norm();
  const double phi = r < kIota ? cutoff(r) : 0.0;
  const double c = 2.0 / lambda;

  Eigen::Vector3d out = Eigen::Vector3d::Zero();
  if (phi > 0.0) {
    // pi_lambda + ((2/lambda)(grad_y J(x,0) - grad_y J(0,0)), 0)
    out += phi * stereo(lambda, Eigen::Vector2d(d));
    out.head<2>() += phi * c * (grad_regular_origin - grad_regular);
  }
  if (phi < 1.0) {
    // ((2/lambda)(grad_y G(x,0) - grad_y J(0,0)), -1) with grad_y G(x,0) = -grad g(x)
    const Eigen::Vector2d minus_grad_g = d / (r * r) - grad_regular;
    out.head<2>() += (1.0 - phi) * c * (minus_grad_g + grad_regular_origin);
    out(2) -= 1.0 - phi;
  }
  return out;
}

ModelField build_z(const BubbleParams& params, const Grid& grid, const GreensSamples& greens,
                   const CutoffProfile& cutoff) {
  params.validate();
  if (greens.n != grid.n() || geodesic_distance(greens.a, params.a) > 1e-12)
    throw ModelError("Green's samples do not match the grid and bubble point");

  ModelField out;
  out.n = grid.n();
  out.params = params;
  out.under_resolved = params.lambda * grid.h() > 0.25;
  out.z.resize(3, grid.size());
  double min_norm = std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < grid.size(); ++k) {
    const Eigen::Vector3d raw = model_point(params.lambda, greens.displacement.col(k),
                                            greens.grad_regular.col(k),
                                            greens.grad_regular_origin, cutoff);
    const double nrm = raw.norm();
    min_norm = std::min(min_norm, nrm);
    out.z.col(k) = params.R * (raw / nrm);
  }
  out.min_raw_norm = min_norm;
  if (min_norm < 0.5)
    throw ModelError("model degenerates before projection (min |z~| = " + std::to_string(min_norm) +
                     "); lambda too small?");
  return out;
}

ModelField build_z(const BubbleParams& params, const Grid& grid, const GreensEvaluator& G,
                   const CutoffProfile& cutoff) {
  return build_z(params, grid, sample_greens(G, grid, params.a), cutoff);
}

double rho_z(const BubbleParams& params, const TorusPoint& p) {
  const double l = params.lambda;
  const double d = std::min(geodesic_distance(p, params.a), kIota);
  return l / (1.0 + l * l * d * d);
}

ScalarField rho_z_field(const BubbleParams& params, const Grid& grid) {
  return sample<1>(grid, [&](const TorusPoint& p) { return rho_z(params, p); });
}

double z_inner(const Grid& grid, const Vec3Field& V, const Vec3Field& W, const ScalarField& rho) {
  double grad_part = 0.0;
  for (int axis = 0; axis < 2; ++axis)
    grad_part += inner(grid, forward_diff(grid, V, axis), forward_diff(grid, W, axis));
  const ScalarField weight = rho.cwiseProduct(rho);
  const ScalarField vw = dot(V, W);
  return grad_part + integrate(grid, ScalarField(weight.cwiseProduct(vw)));
}

double z_inner(const Grid& grid, const Vec3Field& V, const Vec3Field& W,
               const BubbleParams& params) {
  return z_inner(grid, V, W, rho_z_field(params, grid));
}

TangentBasis tangent_basis(const BubbleParams& params, const Grid& grid, GreensCache& greens,
                           double dlambda_rel, double da) {
  if (!(params.lambda >= 2.0)) throw ModelError("tangent basis needs lambda >= 2");
  TangentBasis basis;

  const GreensSamples here = greens.samples(grid, params.a);
  const double dl = dlambda_rel * params.lambda;
  BubbleParams p = params;
  p.lambda = params.lambda + dl;
  const Vec3Field up = build_z(p, grid, here).z;
  p.lambda = params.lambda - dl;
  basis.fields[0] = (up - build_z(p, grid, here).z) / (2.0 * dl);

  for (int axis = 0; axis < 2; ++axis) {
    Eigen::Vector2d shift = Eigen::Vector2d::Zero();
    shift(axis) = da;
    BubbleParams plus = params, minus = params;
    plus.a = TorusPoint(params.a.x() + shift(0), params.a.y() + shift(1));
    minus.a = TorusPoint(params.a.x() - shift(0), params.a.y() - shift(1));
    const Vec3Field zp = build_z(plus, grid, greens.samples(grid, plus.a)).z;
    const Vec3Field zm = build_z(minus, grid, greens.samples(grid, minus.a)).z;
    basis.fields[1 + axis] = (zp - zm) / (2.0 * da);
  }

  const Vec3Field z = build_z(params, grid, here).z;
  // Differenced curves leave the tangent plane at O(step^2 lambda^3) near a.
  for (int k = 0; k < 3; ++k) {
    Vec3Field& f = basis.fields[k];
    for (Eigen::Index i = 0; i < grid.size(); ++i) f.col(i) -= f.col(i).dot(z.col(i)) * z.col(i);
  }
  for (int k = 0; k < 3; ++k) {
    Vec3Field rot(3, grid.size());
    const Eigen::Vector3d omega = Eigen::Vector3d::Unit(k);
    for (Eigen::Index i = 0; i < grid.size(); ++i) rot.col(i) = omega.cross(z.col(i).eval());
    basis.fields[3 + k] = std::move(rot);
  }
  return basis;
}

}  // namespace bubblelab
