// SPDX-License-Identifier: Apache-2.0
//
// Separable analysis of the annulus sector: the 2x2 transmission system of
// each radial mode sin(n pi ln(r/delta) / ln delta), its kernel, and the
// reflection operators used for T-coercivity.
#pragma once

#include <cstdint>

#include "cornersim/fem.hpp"
#include "cornersim/mesh.hpp"
#include "cornersim/spectral.hpp"

namespace cornersim {

struct ModeData {
  int n = 1;
  double nu = 0.0;  // n pi^2 / (4 ln delta), negative
  double u_plus_n = 0.0;
  double u_minus_n = 0.0;
};

/// n pi^2 / (4 ln delta).
double mode_nu(double delta, int n);

/// sigma_minus sinh(3 nu) cosh(nu) + sigma_plus sinh(nu) cosh(3 nu), nu = mode_nu(delta, n).
double det57(const Contrast& contrast, double delta, int n);

/// Bisection root of det57 in delta for fixed n; independent of the closed form.
/// Throws RegimeError if det57 has no sign change in (0, 1).
double det57_root(const Contrast& contrast, int n);

/// Relative residuals of the two transmission relations for a mode
/// (value continuity, flux balance), each scaled by its term magnitudes.
struct TransmissionResidual {
  double continuity;
  double flux;
};
TransmissionResidual transmission_residual(const Contrast& contrast, const ModeData& mode);

/// Kernel vector normalised to u_plus_n = 1. Requires |det57| <= 1e-8 relative
/// to its term magnitudes, otherwise NotResonantError.
ModeData kernel_coefficients(const Contrast& contrast, double delta, int n);

/// Mode continuous across the interface but not necessarily flux-balanced:
/// u_plus_n = 1, u_minus_n from the continuity relation alone.
ModeData continuous_mode(double delta, int n);

/// Single-mode field; Plus branch for theta > pi/4. Throws DomainError outside
/// delta <= r <= 1, 0 <= theta <= pi.
double kernel_field_eval(double r, double theta, const ModeData& mode, double delta);

/// Interpolates `mode` at the vertices of `mesh`, applies the reduced stiffness
/// and returns ||K u|| / (||K||_inf ||u||).
double kernel_residual_check(const Contrast& contrast, double delta, const ModeData& mode,
                             const AnnulusMesh& mesh);
double kernel_residual_check(const Contrast& contrast, double delta_n, int n,
                             const AnnulusMesh& mesh);

/// T+ u = u on the Plus closure, -u + 2 R+ u on the open Minus sector, with
/// (R+ u)(r, theta) = u(r, pi - 3 theta). Requires a TCoercivityPlus mesh.
Vector t_plus_apply(const Vector& field, const AnnulusMesh& mesh);

/// T- u = u - 2 R- u on the open Plus sector, -u on the Minus closure, with
/// (R- u)(r, theta) = u(r, pi/2 - theta) for theta <= pi/2 and 0 beyond.
/// Requires a TCoercivityMinus mesh.
Vector t_minus_apply(const Vector& field, const AnnulusMesh& mesh);

enum class TOperator { TPlus, TMinus };

/// min over seeded trials of |u^T K (T u)| / (u^T K1 u). Trial fields are the
/// discrete solutions u = K^{-1} xi for random interior loads xi.
/// TPlus requires kappa > -1/3, TMinus requires kappa < -1 unless
/// `check_regime` is false (used to probe the critical interval).
double coercivity_probe(const Contrast& contrast, const AnnulusMesh& mesh, int trials,
                        TOperator which, std::uint64_t seed = 0, bool check_regime = true);

/// Discrete norm of R+ : H1(Plus) -> H1(Minus) on a TCoercivityPlus mesh,
/// sup of |R+ u|_{1,Minus} / |u|_{1,Plus} by power iteration on the
/// generalized eigenproblem. Fields vanish on the outer boundary.
double reflection_norm_estimate(const AnnulusMesh& mesh, int iterations = 300);

}  // namespace cornersim
