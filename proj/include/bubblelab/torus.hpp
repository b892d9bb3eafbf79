#ifndef BUBBLELAB_TORUS_HPP
#define BUBBLELAB_TORUS_HPP

// The unit square torus R^2/Z^2: points, the translation chart, the periodic
// node-centred grid and the finite-difference operators used everywhere else.

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>

namespace bubblelab {

/// Point of the unit torus, coordinates kept in [0, 1).
class TorusPoint {
 public:
  TorusPoint() = default;
  TorusPoint(double x, double y) : x_(reduce(x)), y_(reduce(y)) {}

  double x() const { return x_; }
  double y() const { return y_; }
  Eigen::Vector2d vec() const { return {x_, y_}; }

  static double reduce(double t) {
    double r = t - std::floor(t);
    return r >= 1.0 ? 0.0 : r;  // floor() of values just below an integer
  }

 private:
  double x_ = 0.0;
  double y_ = 0.0;
};

/// Chart coordinates of p in the translation chart centred at a; each
/// component lies in (-1/2, 1/2].
using ChartDisplacement = Eigen::Vector2d;

/// Representative of t in (-1/2, 1/2].
inline double wrap_coordinate(double t) {
  double r = t - std::floor(t);  // [0, 1)
  return r > 0.5 ? r - 1.0 : r;
}

inline ChartDisplacement wrap_displacement(const TorusPoint& p, const TorusPoint& a) {
  return {wrap_coordinate(p.x() - a.x()), wrap_coordinate(p.y() - a.y())};
}

inline double geodesic_distance(const TorusPoint& p, const TorusPoint& q) {
  return wrap_displacement(p, q).norm();
}

/// Periodic n x n node-centred grid with spacing h = 1/n. Node (i, j) sits at
/// (i h, j h); storage index is i n + j.
class Grid {
 public:
  explicit Grid(int n) : n_(n), h_(1.0 / n) {
    if (n < 64 || (n & (n - 1)) != 0)
      throw std::invalid_argument("grid size must be a power of two >= 64, got " +
                                  std::to_string(n));
  }

  int n() const { return n_; }
  double h() const { return h_; }
  Eigen::Index size() const { return Eigen::Index(n_) * n_; }

  Eigen::Index index(int i, int j) const { return Eigen::Index(wrap(i)) * n_ + wrap(j); }
  int wrap(int i) const { return i & (n_ - 1); }
  TorusPoint node(int i, int j) const { return {wrap(i) * h_, wrap(j) * h_}; }

  friend bool operator==(const Grid& a, const Grid& b) { return a.n_ == b.n_; }

 private:
  int n_;
  double h_;
};

/// Grid samples with C components per node, stored column-per-node.
template <typename Scalar, int C>
using FieldT = Eigen::Matrix<Scalar, C, Eigen::Dynamic>;

template <typename Scalar>
using ScalarFieldT = FieldT<Scalar, 1>;
template <typename Scalar>
using Vec3FieldT = FieldT<Scalar, 3>;

using ScalarField = ScalarFieldT<double>;
using Vec3Field = Vec3FieldT<double>;

namespace detail {

template <typename Scalar, int C>
void check_size(const Grid& grid, const FieldT<Scalar, C>& f) {
  if (f.cols() != grid.size())
    throw std::invalid_argument("field does not match grid: " + std::to_string(f.cols()) +
                                " nodes, expected " + std::to_string(grid.size()));
}

// out(:, k) = sum of stencil weights over neighbours (di, dj).
template <typename Scalar, int C, typename Kernel>
FieldT<Scalar, C> apply_stencil(const Grid& grid, const FieldT<Scalar, C>& f, Kernel&& kernel) {
  check_size(grid, f);
  const int n = grid.n();
  FieldT<Scalar, C> out(f.rows(), f.cols());
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      out.col(Eigen::Index(i) * n + j) = kernel([&](int di, int dj) {
        return f.col(grid.index(i + di, j + dj));
      });
  return out;
}

}  // namespace detail

/// Second-order central difference along axis 0 (x) or 1 (y).
template <typename Scalar, int C>
FieldT<Scalar, C> central_diff(const Grid& grid, const FieldT<Scalar, C>& f, int axis) {
  const Scalar inv2h = Scalar(0.5) / Scalar(grid.h());
  return detail::apply_stencil(grid, f, [&](auto at) {
    return axis == 0 ? ((at(1, 0) - at(-1, 0)) * inv2h).eval()
                     : ((at(0, 1) - at(0, -1)) * inv2h).eval();
  });
}

/// Forward difference (f_{i+1} - f_i)/h. Its grid adjoint is minus the
/// backward difference, and  -D+^T D+  summed over both axes is the 5-point
/// Laplacian.
template <typename Scalar, int C>
FieldT<Scalar, C> forward_diff(const Grid& grid, const FieldT<Scalar, C>& f, int axis) {
  const Scalar invh = Scalar(1) / Scalar(grid.h());
  return detail::apply_stencil(grid, f, [&](auto at) {
    return axis == 0 ? ((at(1, 0) - at(0, 0)) * invh).eval()
                     : ((at(0, 1) - at(0, 0)) * invh).eval();
  });
}

template <typename Scalar, int C>
FieldT<Scalar, C> backward_diff(const Grid& grid, const FieldT<Scalar, C>& f, int axis) {
  const Scalar invh = Scalar(1) / Scalar(grid.h());
  return detail::apply_stencil(grid, f, [&](auto at) {
    return axis == 0 ? ((at(0, 0) - at(-1, 0)) * invh).eval()
                     : ((at(0, 0) - at(0, -1)) * invh).eval();
  });
}

template <typename Scalar, int C>
struct Gradient {
  FieldT<Scalar, C> dx;
  FieldT<Scalar, C> dy;
};

template <typename Scalar, int C>
Gradient<Scalar, C> grad(const Grid& grid, const FieldT<Scalar, C>& f) {
  return {central_diff(grid, f, 0), central_diff(grid, f, 1)};
}

/// 5-point Laplacian.
template <typename Scalar, int C>
FieldT<Scalar, C> laplacian(const Grid& grid, const FieldT<Scalar, C>& f) {
  const Scalar invh2 = Scalar(1) / (Scalar(grid.h()) * Scalar(grid.h()));
  return detail::apply_stencil(grid, f, [&](auto at) {
    return ((at(1, 0) + at(-1, 0) + at(0, 1) + at(0, -1) - Scalar(4) * at(0, 0)) * invh2).eval();
  });
}

template <typename Scalar, int C>
FieldT<Scalar, C> bilaplacian(const Grid& grid, const FieldT<Scalar, C>& f) {
  return laplacian(grid, laplacian(grid, f));
}

/// Symbol of the 5-point Laplacian on the Fourier mode (k1, k2).
inline double laplacian_symbol(const Grid& grid, int k1, int k2) {
  const double s1 = std::sin(M_PI * k1 * grid.h());
  const double s2 = std::sin(M_PI * k2 * grid.h());
  return -4.0 * (s1 * s1 + s2 * s2) / (grid.h() * grid.h());
}

/// h^2 times the sum over nodes; exact for every resolved Fourier mode.
template <typename Scalar>
Scalar integrate(const Grid& grid, const ScalarFieldT<Scalar>& f) {
  detail::check_size(grid, f);
  return f.sum() * Scalar(grid.h() * grid.h());
}

/// Grid L^2 pairing  h^2 sum_k f_k . g_k.
template <typename Scalar, int C>
Scalar inner(const Grid& grid, const FieldT<Scalar, C>& f, const FieldT<Scalar, C>& g) {
  detail::check_size(grid, f);
  detail::check_size(grid, g);
  return f.cwiseProduct(g).sum() * Scalar(grid.h() * grid.h());
}

/// Pointwise dot product of two vector fields.
template <typename Scalar, int C>
ScalarFieldT<Scalar> dot(const FieldT<Scalar, C>& f, const FieldT<Scalar, C>& g) {
  return f.cwiseProduct(g).colwise().sum();
}

/// Samples a callable f(TorusPoint) at every node.
template <int C, typename Fn>
FieldT<double, C> sample(const Grid& grid, Fn&& fn) {
  FieldT<double, C> out(C, grid.size());
  for (int i = 0; i < grid.n(); ++i)
    for (int j = 0; j < grid.n(); ++j) {
      if constexpr (C == 1)
        out(0, grid.index(i, j)) = fn(grid.node(i, j));
      else
        out.col(grid.index(i, j)) = fn(grid.node(i, j));
    }
  return out;
}

}  // namespace bubblelab

#endif  // BUBBLELAB_TORUS_HPP
