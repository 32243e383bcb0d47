#include "nvrot/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>

#include "nvrot/errors.hpp"
#include "nvrot/oracle.hpp"
#include "nvrot/parallel.hpp"
#include "nvrot/rng.hpp"

namespace nvrot {
namespace {

constexpr std::uint64_t kNoiseStream = 0x6E6F697365ULL;
constexpr std::uint64_t kValidateFieldStream = 0x6669656C64ULL;

template <typename T>
void read_optional(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config: bad value for '") + key + "': " + e.what());
  }
}

void reject_unknown(const json& j, std::initializer_list<const char*> known, const char* what) {
  if (!j.is_object()) throw ValidationError(std::string(what) + " must be a JSON object");
  for (const auto& item : j.items()) {
    if (std::none_of(known.begin(), known.end(),
                     [&](const char* k) { return item.key() == k; })) {
      throw ValidationError(std::string(what) + ": unknown key '" + item.key() + "'");
    }
  }
}

json optional_number(const std::optional<double>& v) {
  return v ? json(*v) : json(nullptr);
}

std::string csv_cell(const std::optional<double>& v) { return v ? format_number(*v) : ""; }

std::string point_file(const char* prefix, std::size_t index) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%03zu.csv", prefix, index);
  return buf;
}

json sidecar_base(const ExperimentConfig& cfg, const char* kind) {
  return {{"kind", kind},
          {"method", std::string(to_string(cfg.method))},
          {"seeds", {{"first", cfg.base_seed}, {"count", cfg.n_real}}},
          {"config", config_to_json(cfg)}};
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

}  // namespace

void ExperimentConfig::validate() const {
  lattice.validate();
  field.validate();
  if (!(abundance >= 0.0 && abundance <= 1.0)) {
    throw ValidationError("config.abundance must lie in [0, 1]");
  }
  if (n_real < 1) throw ValidationError("config.n_real must be >= 1");
  if (!(grid.dt > 0.0) || !(grid.dt_refine > 0.0) || !(grid.t_max >= grid.t_min) ||
      grid.t_min < 0.0 || !(grid.refine_fraction >= 0.0 && grid.refine_fraction < 1.0)) {
    throw ValidationError("config.time_grid is invalid");
  }
  if (noise_sigma && !(*noise_sigma >= 0.0)) {
    throw ValidationError("config.noise_sigma must be >= 0");
  }
  if (!(cce.pair_cutoff > 0.0)) throw ValidationError("config.cce.pair_cutoff_nm must be > 0");
  for (double v : f_rot_sweep) {
    if (!std::isfinite(v)) throw ValidationError("config.sweep.f_rot_kHz must be finite");
  }
  for (double v : b_total_sweep) {
    if (!std::isfinite(v)) throw ValidationError("config.sweep.b_total_G must be finite");
  }
  if (!(revival_window_fraction > 0.0 && revival_window_fraction < 1.0)) {
    throw ValidationError("config.revival_window_fraction must lie in (0, 1)");
  }
  if (!(power_law_min_field >= 0.0)) {
    throw ValidationError("config.power_law_min_field_G must be >= 0");
  }
}

json config_to_json(const ExperimentConfig& cfg) {
  return {{"lattice", lattice_to_json(cfg.lattice)},
          {"abundance", cfg.abundance},
          {"field", field_to_json(cfg.field)},
          {"method", std::string(to_string(cfg.method))},
          {"n_real", cfg.n_real},
          {"base_seed", cfg.base_seed},
          {"time_grid",
           {{"t_min_us", cfg.grid.t_min},
            {"t_max_us", cfg.grid.t_max},
            {"dt_us", cfg.grid.dt},
            {"dt_refine_us", cfg.grid.dt_refine},
            {"refine_fraction", cfg.grid.refine_fraction}}},
          {"noise_sigma", optional_number(cfg.noise_sigma)},
          {"cce", {{"pair_cutoff_nm", cfg.cce.pair_cutoff}, {"cluster_budget", cfg.cce.cluster_budget}}},
          {"sweep", {{"f_rot_kHz", cfg.f_rot_sweep}, {"b_total_G", cfg.b_total_sweep}}},
          {"revival_window_fraction", cfg.revival_window_fraction},
          {"power_law_min_field_G", cfg.power_law_min_field}};
}

ExperimentConfig config_from_json(const json& doc) {
  const json& j = doc.contains("config") ? doc.at("config") : doc;
  reject_unknown(j,
                 {"lattice", "abundance", "field", "method", "n_real", "base_seed", "time_grid",
                  "noise_sigma", "cce", "sweep", "revival_window_fraction",
                  "power_law_min_field_G"},
                 "config");
  ExperimentConfig cfg;
  if (j.contains("lattice")) cfg.lattice = lattice_from_json(j.at("lattice"));
  if (j.contains("field")) cfg.field = field_from_json(j.at("field"));
  read_optional(j, "abundance", cfg.abundance);
  if (j.contains("method")) cfg.method = parse_method(j.at("method").get<std::string>());
  read_optional(j, "n_real", cfg.n_real);
  read_optional(j, "base_seed", cfg.base_seed);
  if (j.contains("time_grid")) {
    const json& g = j.at("time_grid");
    reject_unknown(g, {"t_min_us", "t_max_us", "dt_us", "dt_refine_us", "refine_fraction"},
                   "time_grid");
    read_optional(g, "t_min_us", cfg.grid.t_min);
    read_optional(g, "t_max_us", cfg.grid.t_max);
    read_optional(g, "dt_us", cfg.grid.dt);
    read_optional(g, "dt_refine_us", cfg.grid.dt_refine);
    read_optional(g, "refine_fraction", cfg.grid.refine_fraction);
  }
  if (j.contains("noise_sigma") && !j.at("noise_sigma").is_null()) {
    double sigma = 0.0;
    read_optional(j, "noise_sigma", sigma);
    cfg.noise_sigma = sigma;
  }
  if (j.contains("cce")) {
    const json& c = j.at("cce");
    reject_unknown(c, {"pair_cutoff_nm", "cluster_budget"}, "cce");
    read_optional(c, "pair_cutoff_nm", cfg.cce.pair_cutoff);
    read_optional(c, "cluster_budget", cfg.cce.cluster_budget);
  }
  if (j.contains("sweep")) {
    const json& s = j.at("sweep");
    reject_unknown(s, {"f_rot_kHz", "b_total_G"}, "sweep");
    read_optional(s, "f_rot_kHz", cfg.f_rot_sweep);
    read_optional(s, "b_total_G", cfg.b_total_sweep);
  }
  read_optional(j, "revival_window_fraction", cfg.revival_window_fraction);
  read_optional(j, "power_law_min_field_G", cfg.power_law_min_field);
  cfg.validate();
  return cfg;
}

std::vector<double> build_time_grid(const ExperimentConfig& cfg) {
  const auto& g = cfg.grid;
  auto grid = uniform_grid(g.t_min, g.t_max, g.dt);
  if (const auto t_rev = revival_time_prediction(cfg.field); t_rev && g.refine_fraction > 0.0) {
    const double lo = std::max(g.t_min, *t_rev * (1.0 - g.refine_fraction));
    const double hi = std::min(g.t_max, *t_rev * (1.0 + g.refine_fraction));
    if (hi > lo) grid = refine_grid(grid, lo, hi, g.dt_refine);
  }
  return grid;
}

EchoCurve simulate_curve(const ExperimentConfig& cfg, unsigned jobs) {
  cfg.validate();
  const auto times = build_time_grid(cfg);
  EnsembleOptions opts;
  opts.n_real = cfg.n_real;
  opts.base_seed = cfg.base_seed;
  opts.abundance = cfg.abundance;
  opts.method = cfg.method;
  opts.cce = cfg.cce;
  opts.jobs = jobs;
  EchoCurve curve = ensemble_echo(cfg.lattice, cfg.field, times, opts);
  if (cfg.noise_sigma && *cfg.noise_sigma > 0.0) {
    const auto key = rng::derive(cfg.base_seed, kNoiseStream);
    for (std::size_t i = 0; i < curve.values.size(); ++i) {
      curve.values[i] += *cfg.noise_sigma * rng::normal(key, i);
    }
  }
  return curve;
}

fit::FitResult fit_revival(const EchoCurve& curve, double window_fraction) {
  curve.validate();
  const double collapsed = std::exp(-1.0);
  const auto first_low = std::find_if(curve.values.begin(), curve.values.end(),
                                      [&](double v) { return v < collapsed; });
  if (first_low == curve.values.end()) {
    throw FitError("no revival detected: signal never collapses");
  }
  const auto peak = std::max_element(first_low, curve.values.end());
  const double t_peak = curve.times[static_cast<std::size_t>(peak - curve.values.begin())];
  return fit::fit_gaussian_revival(
      curve, {t_peak * (1.0 - window_fraction), t_peak * (1.0 + window_fraction)});
}

SimulateOutput run_simulate(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                            unsigned jobs) {
  SimulateOutput out;
  out.curve = simulate_curve(cfg, jobs);
  out.csv_path = out_dir / "echo.csv";
  out.sidecar_path = out_dir / "echo.json";
  json side = sidecar_base(cfg, "simulate");
  const auto eff = effective_fields(cfg.field);
  side["effective_fields"] = {{"f_n0_kHz", eff.f_n0},
                              {"f_e_kHz", eff.f_e},
                              {"b_pseudo_n_G", eff.b_pseudo_n},
                              {"b_pseudo_e_G", eff.b_pseudo_e}};
  side["outputs"] = {{"csv", "echo.csv"}};
  write_text_atomic(out.csv_path, echo_csv(out.curve));
  write_text_atomic(out.sidecar_path, dump(side));
  return out;
}

LinearFit fit_line(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  if (n < 2 || y.size() != n) throw ValidationError("fit_line: needs >= 2 points");
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (!(sxx > 0.0)) throw FitError("fit_line: degenerate x values");
  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  if (n > 2) {
    double rss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = y[i] - fit.intercept - fit.slope * x[i];
      rss += r * r;
    }
    const double s2 = rss / static_cast<double>(n - 2);
    fit.slope_err = std::sqrt(s2 / sxx);
    fit.intercept_err = std::sqrt(s2 * (1.0 / static_cast<double>(n) + mx * mx / sxx));
  }
  return fit;
}

RotationSweepResult run_sweep_rotation(const ExperimentConfig& cfg,
                                       const std::filesystem::path& out_dir, unsigned jobs) {
  cfg.validate();
  const auto& values = cfg.f_rot_sweep;
  if (values.size() < 2 || std::set<double>(values.begin(), values.end()).size() < 2) {
    throw ValidationError("sweep-rotation: needs >= 2 distinct f_rot values (degenerate sweep)");
  }
  RotationSweepResult result;
  result.points.resize(values.size());
  parallel_for(values.size(), jobs, [&](std::size_t i) {
    ExperimentConfig pc = cfg;
    pc.field.f_rot = values[i];
    const EchoCurve curve = simulate_curve(pc, 1);
    write_text_atomic(out_dir / "points" / point_file("rotation", i), echo_csv(curve));
    RotationPoint& p = result.points[i];
    p.f_rot = values[i];
    try {
      const auto fitted = fit_revival(curve, cfg.revival_window_fraction);
      const auto larmor = fit::extract_larmor(fitted);
      p.t0 = fitted.param("t0");
      p.t0_err = fitted.std_error("t0");
      p.f13c = larmor.frequency;
      p.f13c_err = larmor.error;
    } catch (const FitError& e) {
      p.status = "no_revival";
    }
  });

  std::vector<double> xs;
  std::vector<double> ys;
  std::string table = "f_rot_kHz,f13c_kHz,f13c_err_kHz,t0_us,t0_err_us,status\n";
  for (const auto& p : result.points) {
    table += format_number(p.f_rot) + "," + csv_cell(p.f13c) + "," + csv_cell(p.f13c_err) + "," +
             csv_cell(p.t0) + "," + csv_cell(p.t0_err) + "," + p.status + "\n";
    if (p.f13c) {
      xs.push_back(p.f_rot);
      ys.push_back(*p.f13c);
    }
  }
  json side = sidecar_base(cfg, "sweep-rotation");
  if (std::set<double>(xs.begin(), xs.end()).size() >= 2) {
    result.line = fit_line(xs, ys);
    side["line"] = {{"slope", result.line->slope},
                    {"slope_err", result.line->slope_err},
                    {"intercept_kHz", result.line->intercept},
                    {"intercept_err_kHz", result.line->intercept_err}};
  } else {
    side["line"] = nullptr;
  }
  side["outputs"] = {{"table", "sweep_rotation.csv"}, {"points_dir", "points"}};
  write_text_atomic(out_dir / "sweep_rotation.csv", table);
  write_text_atomic(out_dir / "sweep_rotation.json", dump(side));
  return result;
}

FieldSweepResult run_sweep_field(const ExperimentConfig& cfg,
                                 const std::filesystem::path& out_dir, unsigned jobs) {
  cfg.validate();
  const auto& values = cfg.b_total_sweep;
  if (values.size() < 3) throw ValidationError("sweep-field: needs >= 3 field values");
  if (std::set<double>(values.begin(), values.end()).size() == 1) {
    throw FitError("sweep-field: power-law fit degenerate (all fields identical)");
  }
  FieldSweepResult result;
  result.points.resize(values.size());
  parallel_for(values.size(), jobs, [&](std::size_t i) {
    ExperimentConfig pc = cfg;
    // Rotation supplies whatever pseudo-field brings b0_z to the requested total.
    pc.field.f_rot = cfg.field.gamma_n * (values[i] - cfg.field.b0_z);
    const EchoCurve curve = simulate_curve(pc, 1);
    write_text_atomic(out_dir / "points" / point_file("field", i), echo_csv(curve));
    FieldPoint& p = result.points[i];
    p.b_total = values[i];
    p.f_rot = pc.field.f_rot;
    try {
      const auto range = fit::default_collapse_range(curve, revival_time_prediction(pc.field));
      const auto fitted = fit::fit_collapse(curve, range);
      if (!fitted.converged) {
        p.status = "fit_failed";
        return;
      }
      p.tau_c = fitted.param("tau_c");
      p.tau_c_err = fitted.std_error("tau_c");
      p.n = fitted.param("n");
      p.n_err = fitted.std_error("n");
      for (const auto& w : fitted.warnings) p.status += ";" + w;
    } catch (const std::exception& e) {
      p.status = "fit_failed";
    }
  });

  std::vector<double> bs;
  std::vector<double> taus;
  std::string table = "b_total_G,f_rot_kHz,tau_c_us,tau_c_err_us,n,n_err,status\n";
  for (const auto& p : result.points) {
    table += format_number(p.b_total) + "," + format_number(p.f_rot) + "," + csv_cell(p.tau_c) +
             "," + csv_cell(p.tau_c_err) + "," + csv_cell(p.n) + "," + csv_cell(p.n_err) + "," +
             p.status + "\n";
    if (p.tau_c && std::abs(p.b_total) >= cfg.power_law_min_field && p.b_total != 0.0) {
      bs.push_back(std::abs(p.b_total));
      taus.push_back(*p.tau_c);
    }
  }
  json side = sidecar_base(cfg, "sweep-field");
  if (bs.size() >= 3) {
    result.power_law = fit::fit_power_law(bs, taus);
    side["power_law"] = fit_result_to_json(*result.power_law);
  } else {
    side["power_law"] = nullptr;
  }
  side["outputs"] = {{"table", "sweep_field.csv"}, {"points_dir", "points"}};
  write_text_atomic(out_dir / "sweep_field.csv", table);
  write_text_atomic(out_dir / "sweep_field.json", dump(side));
  return result;
}

ValidateReport run_validate(std::size_t n_nuclei, std::size_t n_seeds, std::uint64_t base_seed,
                            unsigned jobs) {
  if (n_nuclei > oracle::kMaxNuclei) {
    throw ResourceError("validate: too many nuclei for the exact oracle", n_nuclei,
                        oracle::kMaxNuclei);
  }
  if (n_seeds < 1) throw ValidationError("validate: needs >= 1 seed");
  const LatticeSpec region{units::kDiamondLatticeConstant, 1.2, 0.5};
  const auto candidates = generate_lattice_sites(region);
  const auto times = uniform_grid(0.0, 60.0, 1.0);

  std::vector<std::pair<double, double>> devs(n_seeds);
  parallel_for(n_seeds, jobs, [&](std::size_t s) {
    const std::uint64_t key = base_seed + s;
    std::vector<std::size_t> order(candidates.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return rng::bits(key, a) < rng::bits(key, b);
    });
    // f_n0 supplied entirely by rotation so both paths see the identical value.
    FieldConfig field;
    field.b0_z = 0.0;
    field.f_rot = 5.0 + 45.0 * rng::uniform(rng::derive(key, kValidateFieldStream), 0);

    BathRealization bath;
    bath.seed = key;
    oracle::ExactSystem sys;
    sys.f_n0 = field.f_rot;
    for (std::size_t i = 0; i < n_nuclei; ++i) {
      bath.sites.push_back(make_site(candidates[order[i]]));
    }
    sys.sites = bath.sites;
    const auto product = echo_signal(bath, field, times);
    const auto exact = oracle::exact_echo(sys, times);
    double dev_product = 0.0;
    for (std::size_t i = 0; i < times.size(); ++i) {
      dev_product = std::max(dev_product, std::abs(product.values[i] - exact.values[i]));
    }

    // Interacting pair: a random site and its nearest lattice neighbour.
    const Vec3 first = candidates[order[0]];
    std::size_t partner = order[1];
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      if (c == order[0]) continue;
      if ((candidates[c] - first).squaredNorm() < (candidates[partner] - first).squaredNorm()) {
        partner = c;
      }
    }
    BathRealization pair_bath;
    pair_bath.seed = key;
    pair_bath.sites = {make_site(first), make_site(candidates[partner])};
    const auto pairs = pairs_within(pair_bath.sites, 10.0);
    const auto cce = cce2_echo(pair_bath, field, times, pairs);
    oracle::ExactSystem pair_sys{pair_bath.sites, pairs, field.f_rot};
    const auto pair_exact = oracle::exact_echo(pair_sys, times);
    double dev_pair = 0.0;
    for (std::size_t i = 0; i < times.size(); ++i) {
      dev_pair = std::max(dev_pair, std::abs(cce.values[i] - pair_exact.values[i]));
    }
    devs[s] = {dev_product, dev_pair};
  });

  ValidateReport report;
  report.n_nuclei = n_nuclei;
  report.n_seeds = n_seeds;
  for (const auto& [p, c] : devs) {
    report.max_dev_product = std::max(report.max_dev_product, p);
    report.max_dev_cce2_pair = std::max(report.max_dev_cce2_pair, c);
  }
  report.pass = report.max_dev_product <= report.tolerance &&
                report.max_dev_cce2_pair <= report.tolerance;
  return report;
}

json validate_report_to_json(const ValidateReport& r) {
  return {{"n_nuclei", r.n_nuclei},
          {"n_seeds", r.n_seeds},
          {"max_abs_deviation_product", r.max_dev_product},
          {"max_abs_deviation_cce2_pair", r.max_dev_cce2_pair},
          {"tolerance", r.tolerance},
          {"pass", r.pass}};
}

}  // namespace nvrot
