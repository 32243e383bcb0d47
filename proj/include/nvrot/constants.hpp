#pragma once

// Physical constants and unit conversions.
//
// Interface units: lengths in nm, fields in G, frequencies in kHz (cycles),
// times in us. Internally angular frequencies are rad/ms and times are ms,
// so omega * t is a phase in radians without further scaling.

#include <numbers>

namespace nvrot::units {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// 13C gyromagnetic ratio gamma/2pi, kHz/G.
inline constexpr double kGammaC13 = 1.0715;
/// NV electron gyromagnetic ratio gamma/2pi, kHz/G (2.8 MHz/G).
inline constexpr double kGammaElectron = 2800.0;

inline constexpr double kHbar = 1.054571817e-34;       // J s
inline constexpr double kMu0Over4Pi = 1.0e-7;          // T m / A

inline constexpr double kGaussPerTesla = 1.0e4;
inline constexpr double kHzPerKHz = 1.0e3;
inline constexpr double kCubicMetresPerCubicNm = 1.0e-27;
inline constexpr double kSecondsPerMs = 1.0e-3;
inline constexpr double kUsPerMs = 1.0e3;

/// kHz (cycles/ms) -> rad/ms.
constexpr double angular(double f_khz) { return kTwoPi * f_khz; }
/// rad/ms -> kHz.
constexpr double cyclic(double omega_radms) { return omega_radms / kTwoPi; }
/// us -> ms.
constexpr double us_to_ms(double t_us) { return t_us / kUsPerMs; }

/// gamma/2pi in kHz/G -> gamma in rad s^-1 T^-1.
constexpr double gamma_si(double gamma_khz_per_gauss) {
  return kTwoPi * gamma_khz_per_gauss * kHzPerKHz * kGaussPerTesla;
}

/// (mu0/4pi) g1 g2 hbar expressed as rad/ms * nm^3.
constexpr double dipolar_prefactor(double gamma1_khz_per_gauss, double gamma2_khz_per_gauss) {
  const double si = kMu0Over4Pi * gamma_si(gamma1_khz_per_gauss) *
                    gamma_si(gamma2_khz_per_gauss) * kHbar;  // rad/s * m^3
  return si / kCubicMetresPerCubicNm * kSecondsPerMs;
}

/// NV electron - 13C point-dipole prefactor (about 125 rad/ms at 1 nm).
inline constexpr double kHyperfinePrefactor = dipolar_prefactor(kGammaElectron, kGammaC13);
/// 13C - 13C point-dipole prefactor (about 0.048 rad/ms at 1 nm).
inline constexpr double kNuclearDipolarPrefactor = dipolar_prefactor(kGammaC13, kGammaC13);

/// Natural abundance of 13C.
inline constexpr double kNaturalAbundance = 0.011;
/// Diamond cubic lattice constant, nm.
inline constexpr double kDiamondLatticeConstant = 0.3567;

}  // namespace nvrot::units
