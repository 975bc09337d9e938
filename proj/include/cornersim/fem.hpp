// SPDX-License-Identifier: Apache-2.0
//
// P1 Lagrange discretisation of  -div(sigma grad u) = f  on an AnnulusMesh
// with homogeneous Dirichlet data on the whole boundary.
#pragma once

#include <array>
#include <complex>
#include <functional>
#include <memory>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "cornersim/mesh.hpp"
#include "cornersim/spectral.hpp"

namespace cornersim {

using Vector = Eigen::VectorXd;

/// Symmetric sparse matrix; both triangles are stored.
class SparseSymMatrix {
 public:
  using Storage = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;

  SparseSymMatrix() = default;
  /// Throws ParamError if `m` is not square or not exactly symmetric.
  explicit SparseSymMatrix(Storage m);

  Eigen::Index dimension() const noexcept { return m_.rows(); }
  const Storage& storage() const noexcept { return m_; }
  double coeff(Eigen::Index i, Eigen::Index j) const { return m_.coeff(i, j); }
  double max_norm() const noexcept;
  /// Maximum absolute row sum.
  double inf_norm() const noexcept;
  Vector operator*(const Vector& x) const { return m_ * x; }

 private:
  Storage m_;
};

using LocalMatrix = std::array<std::array<double, 3>, 3>;

/// sigma * int_T grad(l_i) . grad(l_j) for the barycentric basis of triangle (p0, p1, p2).
LocalMatrix local_stiffness(const Point& p0, const Point& p1, const Point& p2, double sigma);

/// Stiffness with coefficient `w_minus` on Minus triangles and `w_plus` on Plus
/// triangles. Throws DegenerateError for triangles with area below 1e-14 of the mesh scale.
SparseSymMatrix assemble_weighted_stiffness(const AnnulusMesh& mesh, double w_minus,
                                            double w_plus);

/// (sigma grad u, grad v) with sigma = sigma_minus / sigma_plus by region.
SparseSymMatrix assemble_stiffness(const AnnulusMesh& mesh, const Contrast& contrast);

/// Consistent P1 mass matrix.
SparseSymMatrix assemble_mass(const AnnulusMesh& mesh);

struct HalfPlaneX {
  double threshold;
  double amplitude;  // f = amplitude where x < threshold
};

struct Annular {
  double r_inner;
  double amplitude;  // f = amplitude where r > r_inner
};

struct NodalValues {
  std::vector<double> values;  // P1 source, one value per vertex
};

using SourceSpec = std::variant<HalfPlaneX, Annular, NodalValues>;

/// Throws ParamError when a source violates its invariants.
void validate_source(const SourceSpec& source);

/// Load vector by the three-point edge-midpoint rule.
Vector assemble_load(const AnnulusMesh& mesh, const SourceSpec& source);

/// Interior (non-boundary) system plus the map back to full nodal vectors.
struct ReducedSystem {
  SparseSymMatrix matrix;
  Vector load;
  std::vector<int> free_dofs;  // reduced index -> vertex index
  std::shared_ptr<const AnnulusMesh> mesh;

  Vector expand(const Vector& reduced) const;
  Vector restrict_to_free(const Vector& full) const;
};

ReducedSystem apply_dirichlet(const SparseSymMatrix& matrix, const Vector& load,
                              std::shared_ptr<const AnnulusMesh> mesh);

/// Threshold partial pivoting sparse LU of a symmetric indefinite matrix.
class IndefiniteFactorization {
 public:
  static constexpr double kPivotTolerance = 1e-14;

  /// Throws SingularSystemError when the smallest pivot magnitude falls below
  /// kPivotTolerance * max_norm.
  explicit IndefiniteFactorization(const SparseSymMatrix& matrix);
  ~IndefiniteFactorization();
  IndefiniteFactorization(IndefiniteFactorization&&) noexcept;
  IndefiniteFactorization& operator=(IndefiniteFactorization&&) noexcept;

  Vector solve(const Vector& rhs) const;
  double pivot_floor() const noexcept { return pivot_floor_; }
  Eigen::Index dimension() const noexcept { return n_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  double pivot_floor_ = 0.0;
  Eigen::Index n_ = 0;
};

struct SolveDiagnostics {
  double pivot_floor = 0.0;
  double relative_residual = 0.0;
  int refinement_steps = 0;
};

struct FemSolution {
  std::shared_ptr<const AnnulusMesh> mesh;
  Vector values;  // one per vertex, zero on the boundary
  SolveDiagnostics diagnostics;
};

inline constexpr double kResidualTolerance = 1e-8;

FemSolution solve_direct(const ReducedSystem& system);
FemSolution solve_direct(const ReducedSystem& system, const IndefiniteFactorization& lu);

double h1_seminorm(const AnnulusMesh& mesh, const Vector& nodal);
double h1_seminorm(const FemSolution& solution);
double l2_norm(const AnnulusMesh& mesh, const Vector& nodal);
double l2_norm(const FemSolution& solution);

struct SmallestSingular {
  double value = 0.0;
  bool singular = false;  // factorization failed: value is 0
  int iterations = 0;
};

/// Smallest |eigenvalue| by block inverse iteration with Rayleigh-Ritz on the
/// inverse. At most 200 iterations; stops on relative change <= 1e-8.
SmallestSingular smallest_singular(const SparseSymMatrix& matrix);
SmallestSingular smallest_singular(const SparseSymMatrix& matrix,
                                   const IndefiniteFactorization& lu);

struct Inertia {
  int positive = 0;
  int negative = 0;
  int zero = 0;
};

/// Sylvester inertia from a symmetric LDL^T factorization.
Inertia matrix_inertia(const SparseSymMatrix& matrix);

struct Ring {
  double r_lo;
  double r_hi;
};

struct SingularCoefficients {
  Complex c_plus;   // coefficient of r^{i mu} phi
  Complex c_minus;  // coefficient of r^{-i mu} phi
  double fit_residual = 0.0;  // relative least-squares residual
};

inline constexpr int kExtractionRadii = 16;

/// Angular projection m(r) = int sigma u phi / int sigma phi^2 at 16 log-spaced
/// radii, fitted against {r^{i mu}, r^{-i mu}, r^2, r^{-2}, 1}.
/// `field(r, theta)` must be defined on the ring.
SingularCoefficients extract_singular_coefficients(
    const std::function<double(double, double)>& field, Ring ring, const SpectralData& spectral,
    int angular_samples = 4096);

SingularCoefficients extract_singular_coefficients(const FemSolution& solution, Ring ring,
                                                   const SpectralData& spectral);

}  // namespace cornersim
