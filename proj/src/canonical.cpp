// SPDX-License-Identifier: Apache-2.0
#include "cornersim/canonical.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <sstream>

#include <Eigen/SparseCholesky>

#include "cornersim/errors.hpp"

namespace cornersim {

namespace {

double det_of_nu(const Contrast& contrast, double nu) {
  return contrast.sigma_minus() * std::sinh(3.0 * nu) * std::cosh(nu) +
         contrast.sigma_plus() * std::sinh(nu) * std::cosh(3.0 * nu);
}

double det_scale_of_nu(const Contrast& contrast, double nu) {
  return std::abs(contrast.sigma_minus() * std::sinh(3.0 * nu) * std::cosh(nu)) +
         std::abs(contrast.sigma_plus() * std::sinh(nu) * std::cosh(3.0 * nu));
}

const GridInfo& require_grid(const AnnulusMesh& mesh, MeshKind kind, const char* op) {
  if (mesh.kind() != kind || !mesh.grid()) {
    std::ostringstream msg;
    msg << op << ": requires a " << to_string(kind) << " mesh, got " << to_string(mesh.kind());
    throw MeshKindError(msg.str());
  }
  return *mesh.grid();
}

// Vertex image of the reflection on the Minus closure of a TCoercivityPlus mesh
// (theta -> pi - 3 theta); -1 for vertices outside the Minus closure.
std::vector<int> plus_reflection_map(const AnnulusMesh& mesh) {
  const GridInfo& g = *mesh.grid();
  const int n = g.interface_column;
  std::vector<int> image(mesh.num_vertices(), -1);
  for (int i = 0; i < g.num_radial(); ++i) {
    for (int j = 0; j <= n; ++j) image[g.node(i, j)] = g.node(i, 2 * n - j);
  }
  for (int i = 0; i + 1 < g.num_radial(); ++i) {
    for (int j = 0; j < n; ++j) image[g.center(i, j)] = g.center(i, 2 * n - 1 - j);
  }
  return image;
}

}  // namespace

double mode_nu(double delta, int n) {
  if (!(delta > 0.0 && delta < 1.0)) throw DomainError("mode_nu: delta must lie in (0, 1)");
  if (n < 1) throw ParamError("mode_nu: n must be >= 1");
  return n * kPi * kPi / (4.0 * std::log(delta));
}

double det57(const Contrast& contrast, double delta, int n) {
  return det_of_nu(contrast, mode_nu(delta, n));
}

double det57_root(const Contrast& contrast, int n) {
  if (n < 1) throw ParamError("det57_root: n must be >= 1");
  // delta in (0, 1) <-> nu in (-inf, 0), monotone; bracket in nu.
  double near_zero = -1e-8;
  double far = -1.0;
  const double s0 = det_of_nu(contrast, near_zero);
  while (std::signbit(det_of_nu(contrast, far)) == std::signbit(s0)) {
    far *= 2.0;
    if (far < -170.0) {
      throw RegimeError("det57_root: no sign change, the transmission system is never singular");
    }
  }
  for (int it = 0; it < 400; ++it) {
    const double mid = 0.5 * (near_zero + far);
    if (mid <= far || mid >= near_zero) break;
    if (std::signbit(det_of_nu(contrast, mid)) == std::signbit(s0)) {
      near_zero = mid;
    } else {
      far = mid;
    }
  }
  const double nu = std::abs(det_of_nu(contrast, near_zero)) < std::abs(det_of_nu(contrast, far))
                        ? near_zero
                        : far;
  return std::exp(n * kPi * kPi / (4.0 * nu));
}

TransmissionResidual transmission_residual(const Contrast& contrast, const ModeData& mode) {
  const double nu = mode.nu;
  const double c1 = -mode.u_plus_n * std::sinh(3.0 * nu);
  const double c2 = mode.u_minus_n * std::sinh(nu);
  const double f1 = mode.u_plus_n * contrast.sigma_plus() * std::cosh(3.0 * nu);
  const double f2 = mode.u_minus_n * contrast.sigma_minus() * std::cosh(nu);
  auto rel = [](double a, double b) {
    const double s = std::abs(a) + std::abs(b);
    return s > 0.0 ? std::abs(a - b) / s : 0.0;
  };
  return {rel(c1, c2), rel(f1, f2)};
}

ModeData kernel_coefficients(const Contrast& contrast, double delta, int n) {
  const double nu = mode_nu(delta, n);
  const double det = det_of_nu(contrast, nu);
  const double scale = det_scale_of_nu(contrast, nu);
  if (!(std::abs(det) <= 1e-8 * scale)) {
    std::ostringstream msg;
    msg << "kernel_coefficients: delta = " << delta << " is not resonant for n = " << n
        << " (relative determinant " << std::abs(det) / scale << ")";
    throw NotResonantError(msg.str());
  }
  return ModeData{n, nu, 1.0, -std::sinh(3.0 * nu) / std::sinh(nu)};
}

ModeData continuous_mode(double delta, int n) {
  const double nu = mode_nu(delta, n);
  return ModeData{n, nu, 1.0, -std::sinh(3.0 * nu) / std::sinh(nu)};
}

double kernel_field_eval(double r, double theta, const ModeData& mode, double delta) {
  constexpr double kSlack = 1e-12;
  if (!(r >= delta * (1.0 - kSlack) && r <= 1.0 + kSlack && theta >= -kSlack &&
        theta <= kPi + kSlack)) {
    throw DomainError("kernel_field_eval: point outside the annulus sector");
  }
  r = std::clamp(r, delta, 1.0);
  theta = std::clamp(theta, 0.0, kPi);
  const double log_delta = std::log(delta);
  const double radial = std::sin(mode.n * kPi * std::log(r / delta) / log_delta);
  if (theta > kInterfaceAngle) {
    return mode.u_plus_n * std::sinh(mode.n * kPi * (theta - kPi) / log_delta) * radial;
  }
  return mode.u_minus_n * std::sinh(mode.n * kPi * theta / log_delta) * radial;
}

double kernel_residual_check(const Contrast& contrast, double delta, const ModeData& mode,
                             const AnnulusMesh& mesh) {
  Vector u(static_cast<Eigen::Index>(mesh.num_vertices()));
  for (std::size_t v = 0; v < mesh.num_vertices(); ++v) {
    u[static_cast<Eigen::Index>(v)] =
        mesh.is_boundary(v) ? 0.0 : kernel_field_eval(mesh.radius(v), mesh.angle(v), mode, delta);
  }
  const SparseSymMatrix k = assemble_stiffness(mesh, contrast);
  auto shared = std::make_shared<const AnnulusMesh>(mesh);
  const ReducedSystem sys = apply_dirichlet(k, Vector::Zero(u.size()), shared);
  const Vector uf = sys.restrict_to_free(u);
  const double denom = sys.matrix.inf_norm() * uf.norm();
  if (!(denom > 0.0)) throw DomainError("kernel_residual_check: interpolated mode vanishes");
  return (sys.matrix * uf).norm() / denom;
}

double kernel_residual_check(const Contrast& contrast, double delta_n, int n,
                             const AnnulusMesh& mesh) {
  return kernel_residual_check(contrast, delta_n, kernel_coefficients(contrast, delta_n, n), mesh);
}

Vector t_plus_apply(const Vector& field, const AnnulusMesh& mesh) {
  const GridInfo& g = require_grid(mesh, MeshKind::TCoercivityPlus, "t_plus_apply");
  if (field.size() != static_cast<Eigen::Index>(mesh.num_vertices())) {
    throw ParamError("t_plus_apply: field size does not match the mesh");
  }
  const int n = g.interface_column;
  Vector out = field;
  for (int i = 0; i < g.num_radial(); ++i) {
    for (int j = 0; j < n; ++j) {
      out[g.node(i, j)] = -field[g.node(i, j)] + 2.0 * field[g.node(i, 2 * n - j)];
    }
  }
  for (int i = 0; i + 1 < g.num_radial(); ++i) {
    for (int j = 0; j < n; ++j) {
      out[g.center(i, j)] = -field[g.center(i, j)] + 2.0 * field[g.center(i, 2 * n - 1 - j)];
    }
  }
  return out;
}

Vector t_minus_apply(const Vector& field, const AnnulusMesh& mesh) {
  const GridInfo& g = require_grid(mesh, MeshKind::TCoercivityMinus, "t_minus_apply");
  if (field.size() != static_cast<Eigen::Index>(mesh.num_vertices())) {
    throw ParamError("t_minus_apply: field size does not match the mesh");
  }
  const int n = g.interface_column;
  Vector out = field;
  for (int i = 0; i < g.num_radial(); ++i) {
    for (int j = 0; j <= n; ++j) out[g.node(i, j)] = -field[g.node(i, j)];
    // Closed convention: theta = pi/2 (j = 2n) takes the reflected value.
    for (int j = n + 1; j <= 2 * n; ++j) {
      out[g.node(i, j)] = field[g.node(i, j)] - 2.0 * field[g.node(i, 2 * n - j)];
    }
  }
  for (int i = 0; i + 1 < g.num_radial(); ++i) {
    for (int j = 0; j < n; ++j) out[g.center(i, j)] = -field[g.center(i, j)];
    for (int j = n; j < 2 * n; ++j) {
      out[g.center(i, j)] = field[g.center(i, j)] - 2.0 * field[g.center(i, 2 * n - 1 - j)];
    }
  }
  return out;
}

double coercivity_probe(const Contrast& contrast, const AnnulusMesh& mesh, int trials,
                        TOperator which, std::uint64_t seed, bool check_regime) {
  if (trials < 1) throw ParamError("coercivity_probe: trials must be >= 1");
  const double kappa = contrast.kappa();
  if (check_regime) {
    if (which == TOperator::TPlus && !(kappa > -1.0 / 3.0)) {
      throw RegimeError("coercivity_probe: T+ requires kappa > -1/3");
    }
    if (which == TOperator::TMinus && !(kappa < -1.0)) {
      throw RegimeError("coercivity_probe: T- requires kappa < -1");
    }
  }
  const MeshKind needed =
      which == TOperator::TPlus ? MeshKind::TCoercivityPlus : MeshKind::TCoercivityMinus;
  require_grid(mesh, needed, "coercivity_probe");

  const SparseSymMatrix k = assemble_stiffness(mesh, contrast);
  const SparseSymMatrix k1 = assemble_weighted_stiffness(mesh, 1.0, 1.0);
  auto shared = std::make_shared<const AnnulusMesh>(mesh);
  const ReducedSystem sys = apply_dirichlet(k, Vector::Zero(k.dimension()), shared);
  std::optional<IndefiniteFactorization> lu;
  try {
    lu.emplace(sys.matrix);
  } catch (const SingularSystemError&) {
    return 0.0;
  }

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(-1.0, 1.0);
  double best = std::numeric_limits<double>::infinity();
  Vector xi(sys.matrix.dimension());
  for (int trial = 0; trial < trials; ++trial) {
    for (Eigen::Index i = 0; i < xi.size(); ++i) xi[i] = uniform(rng);
    const Vector u = sys.expand(lu->solve(xi));
    const Vector tu = which == TOperator::TPlus ? t_plus_apply(u, mesh) : t_minus_apply(u, mesh);
    const double energy = u.dot(k1 * u);
    if (!(energy > 0.0)) continue;
    best = std::min(best, std::abs(u.dot(k * tu)) / energy);
  }
  return best;
}

double reflection_norm_estimate(const AnnulusMesh& mesh, int iterations) {
  const GridInfo& g = require_grid(mesh, MeshKind::TCoercivityPlus, "reflection_norm_estimate");
  const int n = g.interface_column;
  const std::vector<int> image = plus_reflection_map(mesh);

  // Unknowns: Plus-closure vertices off the outer boundary.
  std::vector<int> plus_dofs;
  std::vector<int> full_to_dof(mesh.num_vertices(), -1);
  for (int i = 1; i + 1 < g.num_radial(); ++i) {
    for (int j = n; j < 2 * n; ++j) {
      full_to_dof[g.node(i, j)] = static_cast<int>(plus_dofs.size());
      plus_dofs.push_back(g.node(i, j));
    }
  }
  for (int i = 0; i + 1 < g.num_radial(); ++i) {
    for (int j = n; j < 2 * n; ++j) {
      full_to_dof[g.center(i, j)] = static_cast<int>(plus_dofs.size());
      plus_dofs.push_back(g.center(i, j));
    }
  }
  const SparseSymMatrix k_plus_full = assemble_weighted_stiffness(mesh, 0.0, 1.0);
  const SparseSymMatrix k_minus = assemble_weighted_stiffness(mesh, 1.0, 0.0);
  const auto np = static_cast<Eigen::Index>(plus_dofs.size());
  std::vector<Eigen::Triplet<double, int>> trip;
  for (Eigen::Index c = 0; c < k_plus_full.storage().outerSize(); ++c) {
    const int cd = full_to_dof[static_cast<std::size_t>(c)];
    if (cd < 0) continue;
    for (SparseSymMatrix::Storage::InnerIterator it(k_plus_full.storage(), c); it; ++it) {
      const int rd = full_to_dof[static_cast<std::size_t>(it.index())];
      if (rd >= 0) trip.emplace_back(rd, cd, it.value());
    }
  }
  SparseSymMatrix::Storage kp(np, np);
  kp.setFromTriplets(trip.begin(), trip.end());
  Eigen::SimplicialLDLT<SparseSymMatrix::Storage> chol(kp);
  if (chol.info() != Eigen::Success) {
    throw SingularSystemError("reflection_norm_estimate: Plus stiffness not definite", 0.0);
  }

  const auto nv = static_cast<Eigen::Index>(mesh.num_vertices());
  auto reflect = [&](const Vector& dof) {
    Vector full = Vector::Zero(nv);
    Vector plus_full = Vector::Zero(nv);
    for (Eigen::Index d = 0; d < np; ++d) plus_full[plus_dofs[d]] = dof[d];
    for (Eigen::Index v = 0; v < nv; ++v) {
      if (image[v] >= 0) full[v] = plus_full[image[v]];
    }
    return full;
  };
  auto reflect_transpose = [&](const Vector& full) {
    Vector dof = Vector::Zero(np);
    for (Eigen::Index v = 0; v < nv; ++v) {
      if (image[v] >= 0 && full_to_dof[image[v]] >= 0) dof[full_to_dof[image[v]]] += full[v];
    }
    return dof;
  };

  std::mt19937_64 rng(7);
  std::normal_distribution<double> normal;
  Vector u(np);
  for (Eigen::Index d = 0; d < np; ++d) u[d] = normal(rng);
  double quotient = 0.0;
  for (int it = 0; it < iterations; ++it) {
    const Vector ru = reflect(u);
    const Vector kru = k_minus * ru;
    const double num = ru.dot(kru);
    const double den = u.dot(kp * u);
    const double q = num / den;
    const bool done = it > 0 && std::abs(q - quotient) <= 1e-12 * q;
    quotient = q;
    if (done) break;
    u = chol.solve(reflect_transpose(kru));
    u /= std::sqrt(u.dot(kp * u));
  }
  return std::sqrt(quotient);
}

}  // namespace cornersim
