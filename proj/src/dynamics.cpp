#include "nvrot/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "nvrot/errors.hpp"
#include "nvrot/parallel.hpp"

namespace nvrot {

void FieldConfig::validate() const {
  for (double v : {b0_z, f_rot, theta_b, theta_nv, gamma_n, gamma_e}) {
    if (!std::isfinite(v)) throw ValidationError("FieldConfig fields must be finite");
  }
  if (gamma_n <= 0.0) throw ValidationError("FieldConfig.gamma_n must be > 0");
  if (gamma_e <= 0.0) throw ValidationError("FieldConfig.gamma_e must be > 0");
  if (std::abs(theta_b) >= std::numbers::pi / 2) {
    throw ValidationError("FieldConfig.theta_b must satisfy |theta_b| < pi/2");
  }
  if (std::abs(theta_nv) >= std::numbers::pi / 2) {
    throw ValidationError("FieldConfig.theta_nv must satisfy |theta_nv| < pi/2");
  }
}

double EffectiveFields::nuclear_larmor() const { return std::abs(f_n0); }

void EchoCurve::validate() const {
  if (times.size() != values.size()) {
    throw ValidationError("EchoCurve: times and values differ in length");
  }
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (!std::isfinite(times[i]) || !std::isfinite(values[i])) {
      throw ValidationError("EchoCurve: non-finite sample");
    }
    if (i > 0 && !(times[i] > times[i - 1])) {
      throw ValidationError("EchoCurve: times must be strictly increasing");
    }
  }
}

std::string_view to_string(Method method) {
  return method == Method::product ? "product" : "cce2";
}

Method parse_method(std::string_view name) {
  if (name == "product") return Method::product;
  if (name == "cce2") return Method::cce2;
  throw ValidationError("unknown method '" + std::string(name) + "' (expected product or cce2)");
}

double pseudo_field(double f_rot, double gamma) {
  if (!(gamma > 0.0)) throw DomainError("pseudo_field: gamma must be > 0");
  return f_rot / gamma;
}

EffectiveFields effective_fields(const FieldConfig& cfg) {
  cfg.validate();
  EffectiveFields out;
  out.b_pseudo_n = pseudo_field(cfg.f_rot, cfg.gamma_n);
  out.b_pseudo_e = pseudo_field(cfg.f_rot, cfg.gamma_e);
  out.f_n0 = cfg.gamma_n * cfg.b0_z + cfg.f_rot;
  out.f_e = cfg.gamma_e * cfg.b0_z + cfg.f_rot;
  return out;
}

double single_nucleus_echo(const NuclearSite& site, double f_n0, double t_us) {
  if (!(t_us >= 0.0)) throw ValidationError("single_nucleus_echo: t must be >= 0");
  const double w0 = units::angular(f_n0);
  // Conditional field in the sensing branch; the transverse part lies along x.
  const double w1_x = kSensingBranch * site.a_perp;
  const double w1_z = w0 + kSensingBranch * site.a_par;
  const double w1 = std::hypot(w1_x, w1_z);
  // w0_hat is +-z (the z limit when w0 = 0), so k is the transverse fraction of w1.
  const double k = w1 > 0.0 ? (w1_x / w1) * (w1_x / w1) : 0.0;
  const double tau = units::us_to_ms(t_us) / 2.0;
  const double s0 = std::sin(w0 * tau / 2.0);
  const double s1 = std::sin(w1 * tau / 2.0);
  return 1.0 - 2.0 * k * s0 * s0 * s1 * s1;
}

namespace {

void require_times(std::span<const double> times) {
  if (times.empty()) throw ValidationError("echo: times list is empty");
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (!std::isfinite(times[i]) || times[i] < 0.0) {
      throw ValidationError("echo: times must be finite and >= 0");
    }
    if (i > 0 && !(times[i] > times[i - 1])) {
      throw ValidationError("echo: times must be strictly increasing");
    }
  }
}

// Phase-averaged AC attenuation applied to each sample when the geometry is
// misaligned and the diamond rotates; static tilts are refocused by the echo.
void apply_misalignment(const FieldConfig& cfg, EchoCurve& curve) {
  if (cfg.f_rot == 0.0) return;
  if (std::sin(cfg.theta_b) * std::sin(cfg.theta_nv) == 0.0) return;
  for (std::size_t i = 0; i < curve.times.size(); ++i) {
    curve.values[i] *= misalignment_attenuation(cfg, PulseSequence{curve.times[i], 0.5, {}});
  }
}

std::string describe(const FieldConfig& cfg, Method method) {
  return std::string(to_string(method)) + " b0_z=" + std::to_string(cfg.b0_z) +
         "G f_rot=" + std::to_string(cfg.f_rot) + "kHz";
}

}  // namespace

EchoCurve echo_signal(const BathRealization& bath, const FieldConfig& cfg,
                      std::span<const double> times) {
  require_times(times);
  const double f_n0 = effective_fields(cfg).f_n0;
  EchoCurve curve;
  curve.times.assign(times.begin(), times.end());
  curve.values.assign(times.size(), 1.0);
  for (const auto& site : bath.sites) {
    for (std::size_t i = 0; i < times.size(); ++i) {
      curve.values[i] *= single_nucleus_echo(site, f_n0, times[i]);
    }
  }
  apply_misalignment(cfg, curve);
  curve.metadata = describe(cfg, Method::product);
  return curve;
}

EchoCurve ensemble_echo(const LatticeSpec& spec, const FieldConfig& cfg,
                        std::span<const double> times, const EnsembleOptions& opts) {
  if (opts.n_real < 1) throw ValidationError("ensemble_echo: n_real must be >= 1");
  require_times(times);
  cfg.validate();
  const auto positions = generate_lattice_sites(spec);

  std::vector<std::vector<double>> per_seed(opts.n_real);
  parallel_for(opts.n_real, opts.jobs, [&](std::size_t r) {
    const auto bath = sample_bath(positions, opts.abundance, opts.base_seed + r, spec);
    auto curve = opts.method == Method::product ? echo_signal(bath, cfg, times)
                                                : cce2_echo(bath, cfg, times, opts.cce);
    per_seed[r] = std::move(curve.values);
  });

  EchoCurve mean;
  mean.times.assign(times.begin(), times.end());
  mean.values.assign(times.size(), 0.0);
  for (const auto& values : per_seed) {
    for (std::size_t i = 0; i < values.size(); ++i) mean.values[i] += values[i];
  }
  for (double& v : mean.values) v /= static_cast<double>(opts.n_real);
  mean.metadata = describe(cfg, opts.method) + " n_real=" + std::to_string(opts.n_real) +
                  " base_seed=" + std::to_string(opts.base_seed);
  return mean;
}

double misalignment_attenuation(const FieldConfig& cfg, const PulseSequence& seq) {
  cfg.validate();
  if (!(seq.pi_pulse_fraction > 0.0 && seq.pi_pulse_fraction < 1.0)) {
    throw ValidationError("PulseSequence.pi_pulse_fraction must lie in (0, 1)");
  }
  if (!(seq.total_time >= 0.0)) throw ValidationError("PulseSequence.total_time must be >= 0");
  const double b_eff = std::abs(cfg.b0_z) * std::sin(cfg.theta_b) * std::sin(cfg.theta_nv);
  if (b_eff == 0.0) return 1.0;
  if (cfg.f_rot == 0.0) {
    throw DomainError("misalignment_attenuation: f_rot must be nonzero for a tilted geometry");
  }
  // phi(phi0) = 2 pi gamma_e B_eff int_0^T sin(w t + phi0) s(t) dt = Re[c e^{i phi0}],
  // c = (2 pi gamma_e B_eff / w) (1 - 2 e^{i w t_pi} + e^{i w T}).
  const double w = units::angular(cfg.f_rot);
  const double total = units::us_to_ms(seq.total_time);
  const double t_pi = seq.pi_pulse_fraction * total;
  const std::complex<double> bracket = 1.0 - 2.0 * std::polar(1.0, w * t_pi) +
                                       std::polar(1.0, w * total);
  const std::complex<double> c = units::angular(cfg.gamma_e) * b_eff / w * bracket;
  if (seq.rotation_phase) return std::cos(std::real(c * std::polar(1.0, *seq.rotation_phase)));
  return std::cyl_bessel_j(0.0, std::abs(c));
}

std::optional<double> revival_time_prediction(const FieldConfig& cfg) {
  const double f = effective_fields(cfg).nuclear_larmor();
  if (f == 0.0) return std::nullopt;
  return 2.0 / f * units::kUsPerMs;
}

std::vector<double> uniform_grid(double t_min, double t_max, double dt) {
  if (!(dt > 0.0) || !std::isfinite(t_min) || !std::isfinite(t_max) || t_max < t_min) {
    throw ValidationError("time grid requires dt > 0 and t_min <= t_max");
  }
  std::vector<double> grid;
  const auto first = static_cast<long long>(std::ceil(t_min / dt - 1e-9));
  const auto last = static_cast<long long>(std::floor(t_max / dt + 1e-9));
  for (long long i = std::max(0LL, first); i <= last; ++i) grid.push_back(i * dt);
  if (grid.empty()) throw ValidationError("time grid is empty");
  return grid;
}

std::vector<double> refine_grid(std::span<const double> grid, double lo, double hi,
                                double dt_fine) {
  std::vector<double> out(grid.begin(), grid.end());
  if (hi > lo) {
    const auto fine = uniform_grid(std::max(0.0, lo), hi, dt_fine);
    out.insert(out.end(), fine.begin(), fine.end());
  }
  std::sort(out.begin(), out.end());
  // Collapse points closer than a small fraction of the fine spacing.
  std::vector<double> merged;
  for (double t : out) {
    if (merged.empty() || t - merged.back() > 1e-6 * dt_fine) merged.push_back(t);
  }
  return merged;
}

}  // namespace nvrot
