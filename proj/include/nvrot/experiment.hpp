#pragma once

// Experiment orchestration behind the command-line tool: configuration,
// the simulate / sweep / validate runs, and their on-disk outputs.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "nvrot/bath.hpp"
#include "nvrot/dynamics.hpp"
#include "nvrot/fitting.hpp"
#include "nvrot/serialization.hpp"

namespace nvrot {

struct TimeGrid {
  double t_min = 0.0;      // us
  double t_max = 80.0;     // us
  double dt = 0.25;        // us
  double dt_refine = 0.05; // us, inside the predicted revival window
  /// Half-width of the refined revival window as a fraction of the revival time.
  double refine_fraction = 0.25;
};

struct ExperimentConfig {
  LatticeSpec lattice;
  double abundance = units::kNaturalAbundance;
  FieldConfig field;
  Method method = Method::product;
  std::size_t n_real = 200;
  std::uint64_t base_seed = 1;
  TimeGrid grid;
  std::optional<double> noise_sigma;
  CceOptions cce;
  std::vector<double> f_rot_sweep;    // kHz
  std::vector<double> b_total_sweep;  // G, b0_z + f_rot / gamma_n
  /// Gaussian revival window half-width as a fraction of the detected peak time.
  /// Kept to the top of the peak: the revival envelope is slightly asymmetric
  /// and wider windows pull the centroid by ~0.1 us.
  double revival_window_fraction = 0.05;
  /// Lower |B| bound (G) of the power-law subset in a field sweep.
  double power_law_min_field = 1.0;

  void validate() const;
};

json config_to_json(const ExperimentConfig& cfg);
/// Accepts either a bare config or a sidecar document with a "config" member.
ExperimentConfig config_from_json(const json& j);

/// Uniform grid plus a refined window around the predicted revival.
std::vector<double> build_time_grid(const ExperimentConfig& cfg);

/// Ensemble echo for cfg (plus optional seeded additive noise).
EchoCurve simulate_curve(const ExperimentConfig& cfg, unsigned jobs = 1);

/// Locates the first revival after the initial collapse and fits a Gaussian to it.
fit::FitResult fit_revival(const EchoCurve& curve, double window_fraction);

struct SimulateOutput {
  EchoCurve curve;
  std::filesystem::path csv_path;
  std::filesystem::path sidecar_path;
};
SimulateOutput run_simulate(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                            unsigned jobs = 1);

struct RotationPoint {
  double f_rot = 0.0;
  std::optional<double> f13c;
  std::optional<double> f13c_err;
  std::optional<double> t0;
  std::optional<double> t0_err;
  std::string status = "ok";
};

struct LinearFit {
  double slope = 0.0;
  double slope_err = 0.0;
  double intercept = 0.0;
  double intercept_err = 0.0;
};

/// Ordinary least squares y = intercept + slope x.
LinearFit fit_line(std::span<const double> x, std::span<const double> y);

struct RotationSweepResult {
  std::vector<RotationPoint> points;
  std::optional<LinearFit> line;
};
RotationSweepResult run_sweep_rotation(const ExperimentConfig& cfg,
                                       const std::filesystem::path& out_dir, unsigned jobs = 1);

struct FieldPoint {
  double b_total = 0.0;
  double f_rot = 0.0;
  std::optional<double> tau_c;
  std::optional<double> tau_c_err;
  std::optional<double> n;
  std::optional<double> n_err;
  std::string status = "ok";
};

struct FieldSweepResult {
  std::vector<FieldPoint> points;
  std::optional<fit::FitResult> power_law;
};
FieldSweepResult run_sweep_field(const ExperimentConfig& cfg,
                                 const std::filesystem::path& out_dir, unsigned jobs = 1);

struct ValidateReport {
  std::size_t n_nuclei = 0;
  std::size_t n_seeds = 0;
  double max_dev_product = 0.0;
  double max_dev_cce2_pair = 0.0;
  double tolerance = 1e-9;
  bool pass = true;
};
ValidateReport run_validate(std::size_t n_nuclei, std::size_t n_seeds, std::uint64_t base_seed,
                            unsigned jobs = 1);
json validate_report_to_json(const ValidateReport& report);

}  // namespace nvrot
