#pragma once

// Nonlinear least squares and the three analysis models:
//   gaussian       y = offset + amplitude exp(-(t - t0)^2 / (2 sigma^2))
//   stretched_exp  y = exp(-(t / tau_c)^n)
//   power_law      ln tau = ln prefactor - k ln B   (fit in log-log space)

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nvrot/dynamics.hpp"

namespace nvrot::fit {

enum class Model { gaussian, stretched_exp, power_law };

std::string_view to_string(Model model);
Model parse_model(std::string_view name);
std::vector<std::string> parameter_names(Model model);

/// Model value at x. For power_law x is ln B and the value is ln tau.
double evaluate(Model model, double x, std::span<const double> params);
/// Analytic partial derivatives with respect to each parameter.
void gradient(Model model, double x, std::span<const double> params, std::span<double> out);

struct ModelSpec {
  Model model = Model::gaussian;
  std::vector<double> initial;
  std::vector<double> lower;  // empty = unbounded
  std::vector<double> upper;

  void validate() const;
};

struct FitResult {
  std::string model;
  std::vector<std::string> names;
  std::vector<double> params;
  std::vector<double> std_errors;  // empty unless converged
  double residual_norm = 0.0;
  bool converged = false;
  bool singular = false;
  int iterations = 0;
  std::vector<std::string> warnings;

  double param(std::string_view name) const;
  double std_error(std::string_view name) const;
};

struct SolverOptions {
  int max_iterations = 200;
  double relative_step_tolerance = 1e-8;
};

/// Minimizes sum_i w_i^2 (y_i - f(x_i; p))^2 by damped Gauss-Newton with adaptive
/// (Levenberg-Marquardt) damping and box constraints. Weights are optional.
FitResult least_squares(const ModelSpec& spec, std::span<const double> x,
                        std::span<const double> y, std::span<const double> weights = {},
                        const SolverOptions& opts = {});

struct Window {
  double lo = 0.0;
  double hi = 0.0;
};

/// Gaussian fit of a revival inside `window`; t0 is the revival time.
/// Throws FitError("no revival detected") when no peak is resolved.
FitResult fit_gaussian_revival(const EchoCurve& curve, Window window);

struct LarmorEstimate {
  double frequency = 0.0;  // kHz
  double error = 0.0;      // kHz
};

/// f = 2 / t0 with error 2 sigma_t0 / t0^2.
LarmorEstimate extract_larmor(const FitResult& revival_fit);

/// Stretched exponential exp(-(t/tau_c)^n), tau_c > 0 and n in [1, 6].
/// Adds the warning "revival_overlap" when the range reaches a rising signal.
FitResult fit_collapse(const EchoCurve& curve, Window range);

/// Default collapse range [0, 0.8 * predicted revival], capped at the last sample.
Window default_collapse_range(const EchoCurve& curve, std::optional<double> revival_time);

/// tau_c = prefactor * B^-k from (B, tau_c) pairs, all positive.
FitResult fit_power_law(std::span<const double> fields, std::span<const double> tau_c);

}  // namespace nvrot::fit
