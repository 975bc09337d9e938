// SPDX-License-Identifier: Apache-2.0
#include "cornersim/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "cornersim/errors.hpp"

namespace cornersim {

namespace {

void require_critical(const Contrast& contrast, const char* op) {
  const Regime regime = classify_contrast(contrast);
  if (regime != Regime::CriticalInterval) {
    std::ostringstream msg;
    msg << op << ": kappa = " << contrast.kappa() << " is " << to_string(regime)
        << ", no real oscillating exponent exists";
    throw RegimeError(msg.str());
  }
}

// coth(x) - 1, accurate for large x.
double coth_minus_one(double x) { return 2.0 / std::expm1(2.0 * x); }

// acosh((1 - kappa) / (2 (1 + kappa))) written as log1p to keep digits near kappa = -1/3.
double resonance_acosh(const Contrast& contrast) {
  const double kappa = contrast.kappa();
  const double excess = (-1.0 - 3.0 * kappa) / (2.0 * (1.0 + kappa));
  if (!(excess > 0.0) || !std::isfinite(excess)) {
    throw RegimeError("acosh argument below 1: contrast outside the critical interval");
  }
  return std::log1p(excess + std::sqrt(excess * (excess + 2.0)));
}

// int_0^L sinh^2(mu s) ds / sinh^2(mu L)
double normalized_sinh_square_integral(double mu, double length) {
  const double x = mu * length;
  const double s = std::sinh(x);
  return 1.0 / (2.0 * mu * std::tanh(x)) - length / (2.0 * s * s);
}

}  // namespace

Contrast::Contrast(double sigma_plus, double sigma_minus)
    : sigma_plus_(sigma_plus), sigma_minus_(sigma_minus) {
  if (!std::isfinite(sigma_plus) || !std::isfinite(sigma_minus) || !(sigma_plus > 0.0) ||
      !(sigma_minus < 0.0)) {
    std::ostringstream msg;
    msg << "contrast requires sigma_plus > 0 and sigma_minus < 0, got (" << sigma_plus << ", "
        << sigma_minus << ")";
    throw ParamError(msg.str());
  }
}

Contrast Contrast::from_kappa(double kappa, double sigma_plus) {
  return Contrast(sigma_plus, kappa * sigma_plus);
}

double Contrast::resonance_argument() const noexcept {
  const double kappa = this->kappa();
  return (1.0 - kappa) / (2.0 * (1.0 + kappa));
}

const char* to_string(Regime regime) noexcept {
  switch (regime) {
    case Regime::CriticalInterval:
      return "critical-interval";
    case Regime::FredholmOutside:
      return "fredholm-outside";
    case Regime::LimitMinusOne:
      return "limit-minus-one";
    case Regime::LimitMinusThird:
      return "limit-minus-third";
  }
  return "unknown";
}

Regime classify_contrast(const Contrast& contrast) noexcept {
  const double kappa = contrast.kappa();
  if (std::abs(kappa + 1.0) <= kRegimeTolerance) return Regime::LimitMinusOne;
  if (std::abs(kappa + 1.0 / 3.0) <= kRegimeTolerance) return Regime::LimitMinusThird;
  if (kappa > -1.0 && kappa < -1.0 / 3.0) return Regime::CriticalInterval;
  return Regime::FredholmOutside;
}

double dispersion(const Contrast& contrast, double mu) {
  if (!(mu > 0.0)) throw DomainError("dispersion: mu must be positive");
  const double sm = contrast.sigma_minus();
  const double sp = contrast.sigma_plus();
  return (sm + sp) + sm * coth_minus_one(mu * kPi / 4.0) +
         sp * coth_minus_one(3.0 * mu * kPi / 4.0);
}

double mu_dispersion(const Contrast& contrast) {
  require_critical(contrast, "mu_dispersion");
  double lo = 1e-8;
  double hi = 1.0;
  if (dispersion(contrast, lo) >= 0.0) {
    throw RegimeError("mu_dispersion: no sign change at the lower bracket");
  }
  while (dispersion(contrast, hi) < 0.0) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e6) throw RegimeError("mu_dispersion: failed to bracket the root");
  }
  // Bisect down to adjacent doubles.
  for (int it = 0; it < 400; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (dispersion(contrast, mid) < 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return std::abs(dispersion(contrast, lo)) < std::abs(dispersion(contrast, hi)) ? lo : hi;
}

double mu_closed_form(const Contrast& contrast) {
  require_critical(contrast, "mu_closed_form");
  return 2.0 / kPi * resonance_acosh(contrast);
}

double phi_normalization(double mu, const Contrast& contrast) {
  if (!(mu > 0.0) || !std::isfinite(mu)) throw DomainError("phi_normalization: mu must be positive");
  const double weighted =
      contrast.sigma_minus() * normalized_sinh_square_integral(mu, kPi / 4.0) +
      contrast.sigma_plus() * normalized_sinh_square_integral(mu, 3.0 * kPi / 4.0);
  if (!(weighted > 0.0) || !std::isfinite(weighted)) {
    std::ostringstream msg;
    msg << "phi_normalization: weighted integral int sigma phi^2 = " << weighted
        << " is not positive";
    throw NormalizationError(msg.str());
  }
  return 1.0 / std::sqrt(mu * weighted);
}

SpectralData make_spectral_data(const Contrast& contrast) {
  const double mu = mu_closed_form(contrast);
  return SpectralData{mu, phi_normalization(mu, contrast), contrast};
}

double phi_eval(double theta, const SpectralData& spectral) {
  if (!(theta >= 0.0 && theta <= kPi)) throw DomainError("phi_eval: theta outside [0, pi]");
  const double mu = spectral.mu;
  if (theta <= kInterfaceAngle) {
    return spectral.c_phi * std::sinh(mu * theta) / std::sinh(mu * kInterfaceAngle);
  }
  return spectral.c_phi * std::sinh(mu * (kPi - theta)) / std::sinh(mu * 3.0 * kInterfaceAngle);
}

double phi_derivative(double theta, const SpectralData& spectral, bool from_minus_side) {
  if (!(theta >= 0.0 && theta <= kPi)) throw DomainError("phi_derivative: theta outside [0, pi]");
  const double mu = spectral.mu;
  const bool minus = theta < kInterfaceAngle || (theta == kInterfaceAngle && from_minus_side);
  if (minus) {
    return spectral.c_phi * mu * std::cosh(mu * theta) / std::sinh(mu * kInterfaceAngle);
  }
  return -spectral.c_phi * mu * std::cosh(mu * (kPi - theta)) /
         std::sinh(mu * 3.0 * kInterfaceAngle);
}

std::vector<Complex> lambda_set(const Contrast& contrast, double re_bound) {
  if (!(re_bound > 0.0)) throw ParamError("lambda_set: re_bound must be positive");
  const double mu = mu_closed_form(contrast);
  std::vector<Complex> out;
  const auto k_even = static_cast<long>(std::floor(re_bound / 2.0));
  for (long k = -k_even; k <= k_even; ++k) {
    if (k != 0) out.emplace_back(2.0 * static_cast<double>(k), 0.0);
  }
  const auto k_four = static_cast<long>(std::floor(re_bound / 4.0));
  for (long k = -k_four; k <= k_four; ++k) {
    out.emplace_back(4.0 * static_cast<double>(k), mu);
    out.emplace_back(4.0 * static_cast<double>(k), -mu);
  }
  std::sort(out.begin(), out.end(), [](const Complex& a, const Complex& b) {
    return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
  });
  return out;
}

std::vector<double> resonance_deltas(const Contrast& contrast, int n_max) {
  require_critical(contrast, "resonance_deltas");
  if (n_max < 1) throw ParamError("resonance_deltas: n_max must be >= 1");
  const double a = resonance_acosh(contrast);
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(n_max));
  for (int n = 1; n <= n_max; ++n) {
    out.push_back(std::exp(-static_cast<double>(n) * kPi * kPi / (2.0 * a)));
  }
  return out;
}

Complex oscillating_power(double delta, double mu) {
  if (!(delta > 0.0)) throw DomainError("oscillating_power: delta must be positive");
  return std::polar(1.0, mu * std::log(delta));
}

void SafeSetParams::validate() const {
  if (!(alpha > 0.0 && alpha < 0.5)) throw ParamError("safe set: alpha must lie in (0, 1/2)");
  if (!(delta_star > 0.0)) throw ParamError("safe set: delta_star must be positive");
  if (!(mu > 0.0)) throw ParamError("safe set: mu must be positive");
}

bool safe_set_contains(double delta, const SafeSetParams& params) {
  params.validate();
  if (!(delta > 0.0)) throw DomainError("safe_set_contains: delta must be positive");
  const double s = params.mu * std::log(delta / params.delta_star) / kPi;
  const double frac = s - std::floor(s);
  return frac >= params.alpha && frac <= 1.0 - params.alpha;
}

bool safe_set_contains_modulus(double delta, const SafeSetParams& params) {
  params.validate();
  if (!(delta > 0.0)) throw DomainError("safe_set_contains_modulus: delta must be positive");
  const Complex p = oscillating_power(delta / params.delta_star, 2.0 * params.mu);
  return std::abs(1.0 - p) >= 2.0 * std::sin(kPi * params.alpha);
}

GaugePair matching_solve(const MatchingData& data, double delta, double mu) {
  if (!(delta > 0.0)) throw DomainError("matching_solve: delta must be positive");
  const Complex w = oscillating_power(delta, mu);  // delta^{i mu}
  const Complex gap = std::conj(w) * std::conj(w) - data.c_zeta * data.C_z;
  if (std::abs(gap) < kResonanceTolerance) {
    throw ResonanceError("matching_solve: delta^{-2 i mu} = c_zeta C_z, matching system singular");
  }
  // Cramer's rule on
  //   c_zeta a - delta^{-i mu} A = -c0_delta
  //          a - C_z delta^{i mu} A = C0_delta delta^{i mu}
  const Complex det = w * gap;
  const Complex a = (data.c0_delta * data.C_z * w + data.C0_delta) / det;
  const Complex A = (data.c_zeta * data.C0_delta * w + data.c0_delta) / det;
  return GaugePair{a, A};
}

double delta_star_from(Complex c_zeta, Complex C_z, double mu) {
  if (!(mu > 0.0)) throw ParamError("delta_star_from: mu must be positive");
  const Complex p = c_zeta * C_z;
  if (std::abs(std::abs(p) - 1.0) > 1e-12) {
    throw ParamError("delta_star_from: |c_zeta C_z| must equal 1");
  }
  double log_star = -std::arg(p) / (2.0 * mu);
  if (log_star > 0.0) log_star -= kPi / mu;
  return std::exp(log_star);
}

GaugePair gauge_first_order(Complex c0, Complex C_z, double delta, double mu,
                            double delta_star) {
  if (!(delta > 0.0) || !(delta_star > 0.0) || !(mu > 0.0)) {
    throw DomainError("gauge_first_order: delta, delta_star and mu must be positive");
  }
  const Complex denom = 1.0 - oscillating_power(delta / delta_star, 2.0 * mu);
  if (std::abs(denom) < kResonanceTolerance) {
    throw ResonanceError("gauge_first_order: delta lies in the resonant family I_star");
  }
  const Complex w = oscillating_power(delta, mu);
  return GaugePair{c0 * C_z * w * w / denom, c0 * w / denom};
}

}  // namespace cornersim
