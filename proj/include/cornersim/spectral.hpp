// SPDX-License-Identifier: Apache-2.0
//
// Closed-form corner analysis for the two-sector transmission problem: the
// sector (0, pi/4) carries sigma_minus < 0, the sector (pi/4, pi) carries
// sigma_plus > 0. Everything here is a pure function of its arguments.
#pragma once

#include <complex>
#include <numbers>
#include <vector>

namespace cornersim {

using Complex = std::complex<double>;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kInterfaceAngle = kPi / 4.0;

/// Absolute tolerance on kappa used to recognise the excluded limit contrasts.
inline constexpr double kRegimeTolerance = 1e-14;

class Contrast {
 public:
  /// Throws ParamError unless sigma_plus > 0 and sigma_minus < 0 (both finite).
  Contrast(double sigma_plus, double sigma_minus);

  static Contrast from_kappa(double kappa, double sigma_plus = 1.0);

  double sigma_plus() const noexcept { return sigma_plus_; }
  double sigma_minus() const noexcept { return sigma_minus_; }
  double kappa() const noexcept { return sigma_minus_ / sigma_plus_; }

  /// (1 - kappa) / (2 (1 + kappa)); exceeds 1 exactly inside the critical interval.
  double resonance_argument() const noexcept;

 private:
  double sigma_plus_;
  double sigma_minus_;
};

enum class Regime { CriticalInterval, FredholmOutside, LimitMinusOne, LimitMinusThird };

const char* to_string(Regime regime) noexcept;

Regime classify_contrast(const Contrast& contrast) noexcept;

/// sigma_minus coth(mu pi/4) + sigma_plus coth(3 mu pi/4): flux balance of the
/// sinh eigenfunction across the interface.
double dispersion(const Contrast& contrast, double mu);

/// Positive root of `dispersion`, by geometric bracketing then bisection.
double mu_dispersion(const Contrast& contrast);

/// (2/pi) acosh((1 - kappa) / (2 (1 + kappa))).
double mu_closed_form(const Contrast& contrast);

/// Amplitude c_phi > 0 with mu * int_0^pi sigma phi^2 = 1.
double phi_normalization(double mu, const Contrast& contrast);

struct SpectralData {
  double mu;
  double c_phi;
  Contrast contrast;
};

SpectralData make_spectral_data(const Contrast& contrast);

double phi_eval(double theta, const SpectralData& spectral);

/// One-sided angular derivative of phi; `from_minus_side` selects the branch at pi/4.
double phi_derivative(double theta, const SpectralData& spectral, bool from_minus_side);

/// Members of (2Z \ {0}) u (i mu + 4Z) u (-i mu + 4Z) with |Re| <= re_bound,
/// sorted by (Re, Im).
std::vector<Complex> lambda_set(const Contrast& contrast, double re_bound);

/// delta^n = exp(-n pi^2 / (2 acosh((1 - kappa) / (2 (1 + kappa))))), n = 1..n_max.
std::vector<double> resonance_deltas(const Contrast& contrast, int n_max);

/// delta^{i mu} computed as exp(i mu ln delta), delta > 0.
Complex oscillating_power(double delta, double mu);

struct SafeSetParams {
  double alpha;
  double delta_star;
  double mu;

  /// Throws ParamError unless 0 < alpha < 1/2, delta_star > 0, mu > 0.
  void validate() const;
};

/// Interval form: frac(mu ln(delta/delta_star) / pi) in [alpha, 1 - alpha].
bool safe_set_contains(double delta, const SafeSetParams& params);

/// Modulus form: |1 - (delta/delta_star)^{2 i mu}| >= 2 sin(pi alpha).
bool safe_set_contains_modulus(double delta, const SafeSetParams& params);

struct MatchingData {
  Complex c0_delta;
  Complex c_zeta;
  Complex C0_delta;
  Complex C_z;
  Complex c0;
};

struct GaugePair {
  Complex a;
  Complex A;
};

/// Denominator tolerance for the matching and gauge systems.
inline constexpr double kResonanceTolerance = 1e-9;

/// Solves  c0_delta + a c_zeta = A delta^{-i mu},  a = (C0_delta + A C_z) delta^{i mu}.
GaugePair matching_solve(const MatchingData& data, double delta, double mu);

/// delta_star > 0 with c_zeta C_z = delta_star^{-2 i mu}, chosen in (e^{-pi/mu}, 1].
/// Requires |c_zeta C_z| = 1 up to 1e-12.
double delta_star_from(Complex c_zeta, Complex C_z, double mu);

/// a = c0 C_z delta^{2 i mu} / d,  A = c0 delta^{i mu} / d,  d = 1 - (delta/delta_star)^{2 i mu}.
GaugePair gauge_first_order(Complex c0, Complex C_z, double delta, double mu,
                            double delta_star);

}  // namespace cornersim
