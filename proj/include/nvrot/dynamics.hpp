#pragma once

// Spin-echo signals of the NV (m_S = 0, -1) qubit coupled to a 13C bath in a
// frame co-rotating with the diamond.
//
// Rotation at f_rot adds f_rot to every species' precession frequency, which is
// the same as a species-dependent pseudo-field f_rot / gamma.

#include <cstddef>
#include <cstdint>
#include <complex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nvrot/bath.hpp"
#include "nvrot/constants.hpp"

namespace nvrot {

/// NV electron spin projection of the sensing branch.
inline constexpr double kSensingBranch = -1.0;

struct FieldConfig {
  double b0_z = 37.0;    // G, signed along the rotation axis
  double f_rot = 0.0;    // kHz, signed; positive = anticlockwise
  double theta_b = 0.0;  // rad, field tilt from the rotation axis
  double theta_nv = 0.0; // rad, NV-axis tilt from the rotation axis
  double gamma_n = units::kGammaC13;       // kHz/G
  double gamma_e = units::kGammaElectron;  // kHz/G

  void validate() const;
};

struct EffectiveFields {
  double f_n0 = 0.0;        // kHz, nuclear precession with NV in m_S = 0
  double f_e = 0.0;         // kHz, electron Larmor + rotation shift (diagnostic)
  double b_pseudo_n = 0.0;  // G
  double b_pseudo_e = 0.0;  // G

  double nuclear_larmor() const;  // |f_n0|
};

/// Normalized echo signal versus total free-evolution time.
struct EchoCurve {
  std::vector<double> times;   // us, strictly increasing
  std::vector<double> values;  // S in [-1, 1]
  std::string metadata;

  void validate() const;
};

struct PulseSequence {
  double total_time = 0.0;         // us
  double pi_pulse_fraction = 0.5;  // pi pulse at fraction * total_time
  /// Rotation phase at t = 0 in rad; empty means uniformly averaged.
  std::optional<double> rotation_phase;
};

enum class Method { product, cce2 };

std::string_view to_string(Method method);
Method parse_method(std::string_view name);

struct CceOptions {
  double pair_cutoff = 1.5;             // nm
  std::size_t cluster_budget = 100000;  // max pairs per realization
};

struct EnsembleOptions {
  std::size_t n_real = 1;
  std::uint64_t base_seed = 0;
  double abundance = units::kNaturalAbundance;
  Method method = Method::product;
  CceOptions cce;
  unsigned jobs = 1;
};

/// B = f_rot / gamma (G). Throws DomainError for gamma <= 0.
double pseudo_field(double f_rot, double gamma);

EffectiveFields effective_fields(const FieldConfig& cfg);

/// Two-branch echo modulation of one nucleus,
/// M = 1 - 2 k sin^2(w0 tau / 2) sin^2(w1 tau / 2) with tau = t / 2 and
/// k = |w0_hat x w1_hat|^2.
double single_nucleus_echo(const NuclearSite& site, double f_n0, double t_us);

/// Independent-nucleus product S(t) = prod_j M_j(t).
EchoCurve echo_signal(const BathRealization& bath, const FieldConfig& cfg,
                      std::span<const double> times);

/// Pair-cluster correlation expansion over all pairs within opts.pair_cutoff.
EchoCurve cce2_echo(const BathRealization& bath, const FieldConfig& cfg,
                    std::span<const double> times, const CceOptions& opts = {});

/// CCE-2 with an explicit pair list (indices into bath.sites).
EchoCurve cce2_echo(const BathRealization& bath, const FieldConfig& cfg,
                    std::span<const double> times, std::span<const PairCoupling> pairs);

/// Complex echo coherence of one interacting pair, evaluated exactly.
std::vector<std::complex<double>> pair_coherence(const NuclearSite& j, const NuclearSite& k,
                                                 double b_jk, double f_n0,
                                                 std::span<const double> times);

/// Mean of echo_signal (or cce2_echo) over seeds base_seed .. base_seed+n_real-1.
/// The reduction runs in seed order, so the result does not depend on jobs.
EchoCurve ensemble_echo(const LatticeSpec& spec, const FieldConfig& cfg,
                        std::span<const double> times, const EnsembleOptions& opts);

/// Echo amplitude factor from the axial AC field B_eff sin(2 pi f_rot t + phi0),
/// B_eff = |b0_z| sin(theta_b) sin(theta_nv). For a fixed phase returns
/// cos(phi); averaged over phase returns J0(|c|) where phi = |c| cos(phi0 + arg c).
/// The averaged factor is negative past the first zero of J0.
double misalignment_attenuation(const FieldConfig& cfg, const PulseSequence& seq);

/// 2 / |f_n0| in us; empty when the nuclear field is cancelled exactly.
std::optional<double> revival_time_prediction(const FieldConfig& cfg);

/// Points i * dt for t_min <= i * dt <= t_max (dt > 0).
std::vector<double> uniform_grid(double t_min, double t_max, double dt);

/// Merge extra points at spacing dt_fine inside [lo, hi] into a sorted grid.
std::vector<double> refine_grid(std::span<const double> grid, double lo, double hi,
                                double dt_fine);

}  // namespace nvrot
