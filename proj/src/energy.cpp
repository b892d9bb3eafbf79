#include "bubblelab/energy.hpp"

#include <cmath>
#include <string>

namespace bubblelab {

void require_unit(const Vec3Field& u, double tol) {
  const double worst = (u.colwise().norm().array() - 1.0).abs().maxCoeff();
  if (!(worst <= tol))
    throw EnergyError("field is not sphere-valued (max ||u|-1| = " + std::to_string(worst) + ")");
}

void require_tangent(const Vec3Field& u, const Vec3Field& V, double tol) {
  if (u.cols() != V.cols()) throw EnergyError("tangent field has the wrong size");
  const auto normal = dot(u, V).cwiseAbs().array();
  const auto scale = V.colwise().norm().array().max(1.0);
  const double worst = (normal / scale).maxCoeff();
  if (!(worst <= tol))
    throw EnergyError("direction is not tangent (max |V.u| = " + std::to_string(worst) + ")");
}

EnergyBreakdown energy(const Grid& grid, const Vec3Field& u, double epsilon) {
  require_unit(u);
  EnergyBreakdown e;
  e.epsilon = epsilon;
  const double h2 = grid.h() * grid.h();
  e.dirichlet = 0.5 * h2 *
                (forward_diff(grid, u, 0).squaredNorm() + forward_diff(grid, u, 1).squaredNorm());
  e.biharmonic = 0.5 * h2 * laplacian(grid, u).squaredNorm();
  e.total = e.dirichlet + epsilon * e.biharmonic;
  return e;
}

Vec3Field energy_gradient(const Grid& grid, const Vec3Field& u, double epsilon) {
  const Vec3Field lap = laplacian(grid, u);
  if (epsilon == 0.0) return -lap;
  return epsilon * laplacian(grid, lap) - lap;
}

Vec3Field el_residual(const Grid& grid, const Vec3Field& u, double epsilon) {
  Vec3Field r = energy_gradient(grid, u, epsilon);
  for (Eigen::Index k = 0; k < r.cols(); ++k) r.col(k) -= r.col(k).dot(u.col(k)) * u.col(k);
  return r;
}

double first_variation(const Grid& grid, const Vec3Field& u, double epsilon, const Vec3Field& V) {
  require_tangent(u, V);
  double value = 0.0;
  for (int axis = 0; axis < 2; ++axis)
    value += inner(grid, forward_diff(grid, u, axis), forward_diff(grid, V, axis));
  if (epsilon != 0.0) value += epsilon * inner(grid, laplacian(grid, u), laplacian(grid, V));
  return value;
}

double second_variation(const Grid& grid, const Vec3Field& u, double epsilon, const Vec3Field& V,
                        const Vec3Field& W) {
  require_tangent(u, V);
  require_tangent(u, W);
  const ScalarField vw = dot(V, W);
  Vec3Field uvw = u;
  for (Eigen::Index k = 0; k < u.cols(); ++k) uvw.col(k) *= vw(0, k);

  double value = 0.0;
  for (int axis = 0; axis < 2; ++axis) {
    value += inner(grid, forward_diff(grid, V, axis), forward_diff(grid, W, axis));
    value -= inner(grid, forward_diff(grid, u, axis), forward_diff(grid, uvw, axis));
  }
  if (epsilon != 0.0) {
    value += epsilon * inner(grid, laplacian(grid, V), laplacian(grid, W));
    value -= epsilon * inner(grid, laplacian(grid, u), laplacian(grid, uvw));
  }
  return value;
}

namespace {

// Signed solid angle of the spherical triangle (a, b, c).
double solid_angle(const Eigen::Vector3d& a, const Eigen::Vector3d& b, const Eigen::Vector3d& c) {
  const double num = a.dot(b.cross(c));
  const double den = 1.0 + a.dot(b) + b.dot(c) + c.dot(a);
  return 2.0 * std::atan2(num, den);
}

}  // namespace

DegreeResult degree(const Grid& grid, const Vec3Field& u) {
  require_unit(u);
  const int n = grid.n();
  double total = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const Eigen::Vector3d p00 = u.col(grid.index(i, j));
      const Eigen::Vector3d p10 = u.col(grid.index(i + 1, j));
      const Eigen::Vector3d p11 = u.col(grid.index(i + 1, j + 1));
      const Eigen::Vector3d p01 = u.col(grid.index(i, j + 1));
      total += solid_angle(p00, p10, p11) + solid_angle(p00, p11, p01);
    }
  DegreeResult d;
  d.value = total / (4.0 * M_PI);
  d.nearest = int(std::lround(d.value));
  return d;
}

double gradient_sup(const Grid& grid, const Vec3Field& u) {
  const auto g = grad(grid, u);
  return std::sqrt((g.dx.colwise().squaredNorm() + g.dy.colwise().squaredNorm()).maxCoeff());
}

double expansion_energy(const ExpansionInputs& in) {
  const double l2 = in.lambda * in.lambda;
  return 4.0 * M_PI - 4.0 * M_PI * in.scriptJ / l2 +
         32.0 * M_PI / (3.0 * in.c_gamma) * in.epsilon * l2;
}

double expansion_dlambda(const ExpansionInputs& in) {
  const double l = in.lambda;
  return 8.0 * M_PI * in.scriptJ / (l * l * l) + 64.0 * M_PI / (3.0 * in.c_gamma) * in.epsilon * l;
}

double expansion_dA(double gradJ_A, double lambda) {
  return 4.0 * M_PI * gradJ_A / (lambda * lambda);
}

double predicted_lambda(double epsilon, double scriptJ, double c_gamma) {
  if (!(scriptJ < 0.0))
    throw EnergyError("no balanced bubble scale for script-J >= 0");
  if (!(epsilon > 0.0)) throw EnergyError("predicted scale needs epsilon > 0");
  return std::pow(3.0 * c_gamma * std::abs(scriptJ) / (8.0 * epsilon), 0.25);
}

}  // namespace bubblelab
