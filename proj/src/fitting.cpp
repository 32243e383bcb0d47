#include "nvrot/fitting.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Dense>

#include "nvrot/errors.hpp"

namespace nvrot::fit {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::size_t parameter_count(Model model) { return model == Model::gaussian ? 4 : 2; }

struct Sampled {
  std::vector<double> t;
  std::vector<double> y;
};

Sampled slice(const EchoCurve& curve, Window w) {
  curve.validate();
  Sampled s;
  for (std::size_t i = 0; i < curve.times.size(); ++i) {
    if (curve.times[i] >= w.lo && curve.times[i] <= w.hi) {
      s.t.push_back(curve.times[i]);
      s.y.push_back(curve.values[i]);
    }
  }
  return s;
}

double sum_squares(const Eigen::VectorXd& r) { return r.squaredNorm(); }

}  // namespace

std::string_view to_string(Model model) {
  switch (model) {
    case Model::gaussian: return "gaussian";
    case Model::stretched_exp: return "stretched_exp";
    case Model::power_law: return "power_law";
  }
  return "unknown";
}

Model parse_model(std::string_view name) {
  if (name == "gaussian") return Model::gaussian;
  if (name == "stretched_exp") return Model::stretched_exp;
  if (name == "power_law") return Model::power_law;
  throw ValidationError("unknown model '" + std::string(name) + "'");
}

std::vector<std::string> parameter_names(Model model) {
  switch (model) {
    case Model::gaussian: return {"offset", "amplitude", "t0", "sigma"};
    case Model::stretched_exp: return {"tau_c", "n"};
    case Model::power_law: return {"prefactor", "k"};
  }
  return {};
}

double evaluate(Model model, double x, std::span<const double> p) {
  switch (model) {
    case Model::gaussian: {
      const double z = (x - p[2]) / p[3];
      return p[0] + p[1] * std::exp(-0.5 * z * z);
    }
    case Model::stretched_exp:
      if (x == 0.0) return 1.0;
      return std::exp(-std::pow(x / p[0], p[1]));
    case Model::power_law:
      return std::log(p[0]) - p[1] * x;
  }
  return 0.0;
}

void gradient(Model model, double x, std::span<const double> p, std::span<double> out) {
  switch (model) {
    case Model::gaussian: {
      const double d = x - p[2];
      const double s2 = p[3] * p[3];
      const double e = std::exp(-0.5 * d * d / s2);
      out[0] = 1.0;
      out[1] = e;
      out[2] = p[1] * e * d / s2;
      out[3] = p[1] * e * d * d / (s2 * p[3]);
      return;
    }
    case Model::stretched_exp: {
      if (x == 0.0) {
        out[0] = 0.0;
        out[1] = 0.0;
        return;
      }
      const double ratio = x / p[0];
      const double u = std::pow(ratio, p[1]);
      const double f = std::exp(-u);
      out[0] = f * u * p[1] / p[0];
      out[1] = -f * u * std::log(ratio);
      return;
    }
    case Model::power_law:
      out[0] = 1.0 / p[0];
      out[1] = -x;
      return;
  }
}

void ModelSpec::validate() const {
  const std::size_t n = parameter_count(model);
  if (initial.size() != n) throw ValidationError("ModelSpec: every parameter needs an initializer");
  if ((!lower.empty() && lower.size() != n) || (!upper.empty() && upper.size() != n)) {
    throw ValidationError("ModelSpec: bounds size mismatch");
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double lo = lower.empty() ? -kInf : lower[i];
    const double hi = upper.empty() ? kInf : upper[i];
    if (!(lo < hi)) throw ValidationError("ModelSpec: bounds must be well-ordered");
    if (!std::isfinite(initial[i])) throw ValidationError("ModelSpec: non-finite initializer");
  }
}

double FitResult::param(std::string_view name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return params.at(i);
  }
  throw ValidationError("FitResult: no parameter '" + std::string(name) + "'");
}

double FitResult::std_error(std::string_view name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) {
      if (std_errors.empty()) throw FitError("FitResult: standard errors unavailable");
      return std_errors.at(i);
    }
  }
  throw ValidationError("FitResult: no parameter '" + std::string(name) + "'");
}

FitResult least_squares(const ModelSpec& spec, std::span<const double> x,
                        std::span<const double> y, std::span<const double> weights,
                        const SolverOptions& opts) {
  spec.validate();
  const std::size_t n = parameter_count(spec.model);
  const std::size_t m = x.size();
  if (y.size() != m || (!weights.empty() && weights.size() != m)) {
    throw ValidationError("least_squares: data length mismatch");
  }
  if (m < n) throw ValidationError("least_squares: fewer data points than parameters");
  for (std::size_t i = 0; i < m; ++i) {
    if (!std::isfinite(x[i]) || !std::isfinite(y[i])) {
      throw ValidationError("least_squares: non-finite data");
    }
  }

  Eigen::VectorXd lo = Eigen::VectorXd::Constant(n, -kInf);
  Eigen::VectorXd hi = Eigen::VectorXd::Constant(n, kInf);
  for (std::size_t i = 0; i < n; ++i) {
    if (!spec.lower.empty()) lo[i] = spec.lower[i];
    if (!spec.upper.empty()) hi[i] = spec.upper[i];
  }
  auto clamp = [&](Eigen::VectorXd p) {
    return p.cwiseMax(lo).cwiseMin(hi).eval();
  };
  auto weight = [&](std::size_t i) { return weights.empty() ? 1.0 : weights[i]; };
  auto residuals = [&](const Eigen::VectorXd& p) {
    Eigen::VectorXd r(m);
    for (std::size_t i = 0; i < m; ++i) {
      r[i] = weight(i) * (y[i] - evaluate(spec.model, x[i], {p.data(), n}));
    }
    return r;
  };
  auto jacobian = [&](const Eigen::VectorXd& p) {
    Eigen::MatrixXd j(m, n);
    std::vector<double> g(n);
    for (std::size_t i = 0; i < m; ++i) {
      gradient(spec.model, x[i], {p.data(), n}, g);
      for (std::size_t k = 0; k < n; ++k) j(i, k) = weight(i) * g[k];
    }
    return j;
  };

  Eigen::VectorXd p = clamp(Eigen::Map<const Eigen::VectorXd>(spec.initial.data(), n));
  Eigen::VectorXd r = residuals(p);
  double cost = sum_squares(r);
  double lambda = 1e-3;

  FitResult result;
  result.model = std::string(to_string(spec.model));
  result.names = parameter_names(spec.model);

  bool converged = cost == 0.0;
  int iter = 0;
  while (!converged && iter < opts.max_iterations) {
    ++iter;
    const Eigen::MatrixXd j = jacobian(p);
    const Eigen::MatrixXd jtj = j.transpose() * j;
    const Eigen::VectorXd g = j.transpose() * r;
    bool accepted = false;
    while (!accepted) {
      Eigen::MatrixXd a = jtj;
      for (std::size_t k = 0; k < n; ++k) {
        a(k, k) += lambda * std::max(jtj(k, k), 1e-12);
      }
      const Eigen::VectorXd step = a.ldlt().solve(g);
      const Eigen::VectorXd trial = clamp(p + step);
      const Eigen::VectorXd r_trial = residuals(trial);
      const double cost_trial = sum_squares(r_trial);
      if (std::isfinite(cost_trial) && cost_trial < cost) {
        const Eigen::VectorXd delta = trial - p;
        double rel = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          rel = std::max(rel, std::abs(delta[k]) / std::max(std::abs(p[k]), 1e-300));
        }
        p = trial;
        r = r_trial;
        cost = cost_trial;
        lambda = std::max(lambda / 10.0, 1e-15);
        accepted = true;
        if (rel < opts.relative_step_tolerance || cost == 0.0) converged = true;
      } else {
        lambda *= 10.0;
        // No downhill step at any damping: p is a (constrained) minimum.
        if (lambda > 1e16) {
          converged = true;
          break;
        }
      }
    }
  }

  result.params.assign(p.data(), p.data() + n);
  result.residual_norm = std::sqrt(cost);
  result.iterations = iter;

  const Eigen::MatrixXd j = jacobian(p);
  const Eigen::MatrixXd jtj = j.transpose() * j;
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(jtj);
  const double smax = svd.singularValues()(0);
  const double smin = svd.singularValues()(n - 1);
  if (!(smax > 0.0) || smin <= 1e-13 * smax) {
    result.singular = true;
    result.converged = false;
    result.warnings.emplace_back("singular");
    return result;
  }
  result.converged = converged;
  if (!converged) {
    result.warnings.emplace_back("max_iterations");
    return result;
  }
  const double dof = static_cast<double>(std::max<std::size_t>(m - n, 1));
  const Eigen::MatrixXd cov = jtj.inverse() * (cost / dof);
  for (std::size_t k = 0; k < n; ++k) result.std_errors.push_back(std::sqrt(cov(k, k)));
  return result;
}

FitResult fit_gaussian_revival(const EchoCurve& curve, Window window) {
  const Sampled s = slice(curve, window);
  if (s.t.size() < 8) throw ValidationError("fit_gaussian_revival: window needs >= 8 samples");

  // Initial guess from a 3-point moving average.
  std::vector<double> smooth(s.y.size());
  for (std::size_t i = 0; i < s.y.size(); ++i) {
    const std::size_t a = i == 0 ? 0 : i - 1;
    const std::size_t b = std::min(i + 1, s.y.size() - 1);
    double sum = 0.0;
    for (std::size_t k = a; k <= b; ++k) sum += s.y[k];
    smooth[i] = sum / static_cast<double>(b - a + 1);
  }
  const auto peak = static_cast<std::size_t>(
      std::max_element(smooth.begin(), smooth.end()) - smooth.begin());
  const double base = *std::min_element(smooth.begin(), smooth.end());
  const double height = smooth[peak] - base;
  std::size_t left = peak;
  std::size_t right = peak;
  while (left > 0 && smooth[left] > base + height / 2) --left;
  while (right + 1 < smooth.size() && smooth[right] > base + height / 2) ++right;
  const double span = s.t.back() - s.t.front();
  double sigma0 = (s.t[right] - s.t[left]) / 2.3548;
  if (!(sigma0 > 0.0)) sigma0 = span / 6.0;

  ModelSpec spec;
  spec.model = Model::gaussian;
  spec.initial = {base, height, s.t[peak], sigma0};
  spec.lower = {-kInf, -kInf, s.t.front() - span, 1e-6 * span};
  spec.upper = {kInf, kInf, s.t.back() + span, 10.0 * span};
  FitResult result = least_squares(spec, s.t, s.y);

  if (!result.converged) throw FitError("no revival detected: fit did not converge");
  const double amp = result.param("amplitude");
  const double t0 = result.param("t0");
  if (!(amp > 2.0 * result.std_error("amplitude"))) {
    throw FitError("no revival detected: amplitude not resolved");
  }
  if (t0 < window.lo || t0 > window.hi) {
    throw FitError("no revival detected: peak outside window");
  }
  return result;
}

LarmorEstimate extract_larmor(const FitResult& revival_fit) {
  if (!revival_fit.converged) throw FitError("extract_larmor: revival fit did not converge");
  const double t0 = revival_fit.param("t0");
  if (!(t0 > 0.0)) throw DomainError("extract_larmor: revival time must be > 0");
  const double sigma_t0 = revival_fit.std_error("t0");
  // t0 in us, frequency in kHz.
  return {2.0 / t0 * units::kUsPerMs, 2.0 * sigma_t0 / (t0 * t0) * units::kUsPerMs};
}

Window default_collapse_range(const EchoCurve& curve, std::optional<double> revival_time) {
  curve.validate();
  if (curve.times.empty()) throw ValidationError("default_collapse_range: empty curve");
  double hi = curve.times.back();
  if (revival_time) hi = std::min(hi, 0.8 * *revival_time);
  return {0.0, hi};
}

FitResult fit_collapse(const EchoCurve& curve, Window range) {
  const Sampled s = slice(curve, range);
  if (s.t.size() < 10) throw ValidationError("fit_collapse: range needs >= 10 samples");

  // tau_c from the first crossing of 1/e.
  const double target = std::exp(-1.0);
  double tau0 = 0.0;
  for (std::size_t i = 1; i < s.t.size(); ++i) {
    if (s.y[i] <= target && s.y[i - 1] > target) {
      const double frac = (s.y[i - 1] - target) / (s.y[i - 1] - s.y[i]);
      tau0 = s.t[i - 1] + frac * (s.t[i] - s.t[i - 1]);
      break;
    }
  }
  if (!(tau0 > 0.0)) {
    const double y_last = s.y.back();
    tau0 = (y_last > 0.0 && y_last < 1.0) ? s.t.back() / std::pow(-std::log(y_last), 0.25)
                                          : s.t.back();
  }
  if (!(tau0 > 0.0)) tau0 = 1.0;

  ModelSpec spec;
  spec.model = Model::stretched_exp;
  spec.initial = {tau0, 4.0};
  spec.lower = {1e-9, 1.0};
  spec.upper = {kInf, 6.0};
  FitResult result = least_squares(spec, s.t, s.y);

  const auto min_it = std::min_element(s.y.begin(), s.y.end());
  const double rise = *std::max_element(min_it, s.y.end()) - *min_it;
  if (rise > 0.1) result.warnings.emplace_back("revival_overlap");
  return result;
}

FitResult fit_power_law(std::span<const double> fields, std::span<const double> tau_c) {
  if (fields.size() != tau_c.size()) throw ValidationError("fit_power_law: length mismatch");
  if (fields.size() < 3) throw ValidationError("fit_power_law: needs >= 3 points");
  std::vector<double> x;
  std::vector<double> y;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (!(fields[i] > 0.0) || !(tau_c[i] > 0.0) || !std::isfinite(fields[i]) ||
        !std::isfinite(tau_c[i])) {
      throw ValidationError("fit_power_law: fields and collapse times must be positive");
    }
    x.push_back(std::log(fields[i]));
    y.push_back(std::log(tau_c[i]));
  }
  const double k0 = 0.5;
  double mean = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) mean += y[i] + k0 * x[i];
  mean /= static_cast<double>(x.size());

  ModelSpec spec;
  spec.model = Model::power_law;
  spec.initial = {std::exp(mean), k0};
  spec.lower = {1e-300, -kInf};
  spec.upper = {kInf, kInf};
  FitResult result = least_squares(spec, x, y);
  if (result.singular) throw FitError("fit_power_law: degenerate field values");
  return result;
}

}  // namespace nvrot::fit
