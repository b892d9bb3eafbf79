#ifndef BUBBLELAB_ENERGY_HPP
#define BUBBLELAB_ENERGY_HPP

// Discrete epsilon-energy of sphere-valued grid maps
//
//   E_eps[u] = 1/2 h^2 sum |D+ u|^2  +  eps/2 h^2 sum |Lap_h u|^2,
//
// its exact first and second variations along the normalisation retraction,
// the topological degree, and the leading-order expansions of E_eps along
// the model family.

#include "bubblelab/torus.hpp"

#include <stdexcept>

namespace bubblelab {

class EnergyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EnergyBreakdown {
  double dirichlet = 0.0;
  double biharmonic = 0.0;  // before the eps weight
  double epsilon = 0.0;
  double total = 0.0;
};

/// Throws EnergyError unless | |u| - 1 | <= tol at every node.
void require_unit(const Vec3Field& u, double tol = 1e-8);

/// Throws EnergyError unless |V . u| <= tol max(1, |V|) at every node.
void require_tangent(const Vec3Field& u, const Vec3Field& V, double tol = 1e-8);

EnergyBreakdown energy(const Grid& grid, const Vec3Field& u, double epsilon);

/// L^2 gradient of the discrete energy in R^3: -Lap_h u + eps Lap_h^2 u.
Vec3Field energy_gradient(const Grid& grid, const Vec3Field& u, double epsilon);

/// Pointwise tangential part of energy_gradient.
Vec3Field el_residual(const Grid& grid, const Vec3Field& u, double epsilon);

double first_variation(const Grid& grid, const Vec3Field& u, double epsilon, const Vec3Field& V);

/// Second derivative of the discrete energy along the retraction,
///   int D+V.D+W - D+u.D+(u (V.W)) + eps (Lap V.Lap W - Lap u.Lap(u (V.W))).
/// The second term is the discrete form of |grad u|^2 (V.W).
double second_variation(const Grid& grid, const Vec3Field& u, double epsilon, const Vec3Field& V,
                        const Vec3Field& W);

struct DegreeResult {
  double value = 0.0;
  int nearest = 0;
};

/// Degree as the sum of signed solid angles of the image of the grid
/// triangulation, divided by 4 pi.
DegreeResult degree(const Grid& grid, const Vec3Field& u);

/// max over nodes of the central-difference |grad u|.
double gradient_sup(const Grid& grid, const Vec3Field& u);

struct ExpansionInputs {
  double scriptJ = 0.0;
  double lambda = 1.0;
  double epsilon = 0.0;
  double c_gamma = 1.0;
};

/// 4 pi - 4 pi J / lambda^2 + (32 pi / 3c) eps lambda^2
double expansion_energy(const ExpansionInputs& in);
/// 8 pi J / lambda^3 + (64 pi / 3c) eps lambda
double expansion_dlambda(const ExpansionInputs& in);
/// 4 pi dJ_A / lambda^2
double expansion_dA(double gradJ_A, double lambda);
/// (3 c |J| / (8 eps))^{1/4}; requires J < 0 and eps > 0.
double predicted_lambda(double epsilon, double scriptJ, double c_gamma = 1.0);

}  // namespace bubblelab

#endif  // BUBBLELAB_ENERGY_HPP
