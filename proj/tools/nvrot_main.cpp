// nvrot: rotating-diamond NV spin-echo simulator.
//
// Exit status: 0 success, 2 validation, 3 resource, 4 fit failure,
// 5 I/O, 6 oracle deviation above tolerance, 1 anything else.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "nvrot/errors.hpp"
#include "nvrot/experiment.hpp"
#include "nvrot/fitting.hpp"
#include "nvrot/serialization.hpp"

namespace {

enum ExitCode : int {
  kOk = 0,
  kOther = 1,
  kValidation = 2,
  kResource = 3,
  kFitFailure = 4,
  kIo = 5,
  kOracleMismatch = 6,
};

struct CommonOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  unsigned jobs = 1;
  std::string out_dir;
  std::optional<std::string> method;
};

void add_common(CLI::App* cmd, CommonOptions& opts) {
  cmd->add_option("--config", opts.config_path, "Experiment config JSON (or a sidecar)");
  cmd->add_option("--seed", opts.seed, "Base seed override");
  cmd->add_option("--jobs", opts.jobs, "Worker threads")->check(CLI::PositiveNumber);
  cmd->add_option("--out", opts.out_dir, "Output directory (default $NVROT_OUT_DIR or nvrot_out)");
  cmd->add_option("--method", opts.method, "product or cce2")
      ->check(CLI::IsMember({"product", "cce2"}));
}

std::filesystem::path output_dir(const CommonOptions& opts) {
  if (!opts.out_dir.empty()) return opts.out_dir;
  if (const char* env = std::getenv("NVROT_OUT_DIR"); env && *env) return env;
  return "nvrot_out";
}

nvrot::ExperimentConfig load_config(const CommonOptions& opts) {
  nvrot::ExperimentConfig cfg;
  if (!opts.config_path.empty()) {
    nvrot::json doc;
    try {
      doc = nvrot::json::parse(nvrot::read_text_file(opts.config_path));
    } catch (const nvrot::json::parse_error& e) {
      throw nvrot::ValidationError(std::string("config is not valid JSON: ") + e.what());
    }
    cfg = nvrot::config_from_json(doc);
  }
  if (opts.seed) cfg.base_seed = *opts.seed;
  if (opts.method) cfg.method = nvrot::parse_method(*opts.method);
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"NV spin-echo simulator for a rotating diamond with a 13C bath"};
  app.require_subcommand(1);

  CommonOptions sim_opts, rot_opts, field_opts;
  auto* simulate = app.add_subcommand("simulate", "Ensemble echo curve to CSV + sidecar JSON");
  add_common(simulate, sim_opts);
  auto* sweep_rot = app.add_subcommand("sweep-rotation", "Revival-derived 13C frequency vs f_rot");
  add_common(sweep_rot, rot_opts);
  auto* sweep_field = app.add_subcommand("sweep-field", "Collapse fits vs total nuclear field");
  add_common(sweep_field, field_opts);

  auto* fit_cmd = app.add_subcommand("fit", "Fit a model to a two-column CSV");
  std::string fit_input, fit_model = "stretched_exp", fit_out;
  std::vector<double> fit_window;
  fit_cmd->add_option("--input", fit_input, "CSV input")->required();
  fit_cmd->add_option("--model", fit_model, "gaussian, stretched_exp or power_law")
      ->check(CLI::IsMember({"gaussian", "stretched_exp", "power_law"}));
  fit_cmd->add_option("--window", fit_window, "Fit window lo hi (us)")->expected(2);
  fit_cmd->add_option("--out", fit_out, "Write the FitResult JSON here as well");

  auto* validate = app.add_subcommand("validate", "Compare product and CCE-2 against exact evolution");
  std::size_t n_nuclei = 4, n_seeds = 20;
  std::uint64_t validate_seed = 1;
  unsigned validate_jobs = 1;
  std::string validate_out;
  validate->add_option("--size,-n", n_nuclei, "Number of nuclei (<= 8)");
  validate->add_option("--seeds", n_seeds, "Number of random systems");
  validate->add_option("--seed", validate_seed, "Base seed");
  validate->add_option("--jobs", validate_jobs, "Worker threads")->check(CLI::PositiveNumber);
  validate->add_option("--out", validate_out, "Write the report JSON here as well");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kValidation;
  }

  try {
    if (*simulate) {
      const auto cfg = load_config(sim_opts);
      const auto out = nvrot::run_simulate(cfg, output_dir(sim_opts), sim_opts.jobs);
      std::cout << out.csv_path.string() << "\n" << out.sidecar_path.string() << "\n";
    } else if (*sweep_rot) {
      const auto cfg = load_config(rot_opts);
      const auto dir = output_dir(rot_opts);
      const auto res = nvrot::run_sweep_rotation(cfg, dir, rot_opts.jobs);
      std::cout << (dir / "sweep_rotation.csv").string() << "\n";
      if (res.line) {
        std::cout << "slope " << res.line->slope << " +- " << res.line->slope_err
                  << ", intercept " << res.line->intercept << " +- " << res.line->intercept_err
                  << " kHz\n";
      }
    } else if (*sweep_field) {
      const auto cfg = load_config(field_opts);
      const auto dir = output_dir(field_opts);
      const auto res = nvrot::run_sweep_field(cfg, dir, field_opts.jobs);
      std::cout << (dir / "sweep_field.csv").string() << "\n";
      if (res.power_law) {
        std::cout << "k " << res.power_law->param("k") << " +- " << res.power_law->std_error("k")
                  << "\n";
      }
    } else if (*fit_cmd) {
      const auto text = nvrot::read_text_file(fit_input);
      const auto model = nvrot::fit::parse_model(fit_model);
      nvrot::fit::FitResult result;
      if (model == nvrot::fit::Model::power_law) {
        const auto [b, tau] = nvrot::parse_two_column_csv(text);
        result = nvrot::fit::fit_power_law(b, tau);
      } else {
        const auto curve = nvrot::parse_echo_csv(text);
        const nvrot::fit::Window window =
            fit_window.size() == 2 ? nvrot::fit::Window{fit_window[0], fit_window[1]}
                                   : nvrot::fit::Window{curve.times.front(), curve.times.back()};
        result = model == nvrot::fit::Model::gaussian
                     ? nvrot::fit::fit_gaussian_revival(curve, window)
                     : nvrot::fit::fit_collapse(curve, window);
      }
      const auto doc = nvrot::fit_result_to_json(result).dump(2) + "\n";
      std::cout << doc;
      if (!fit_out.empty()) nvrot::write_text_atomic(fit_out, doc);
      if (!result.converged) return kFitFailure;
    } else if (*validate) {
      const auto report = nvrot::run_validate(n_nuclei, n_seeds, validate_seed, validate_jobs);
      const auto doc = nvrot::validate_report_to_json(report).dump(2) + "\n";
      std::cout << doc;
      if (!validate_out.empty()) nvrot::write_text_atomic(validate_out, doc);
      if (!report.pass) return kOracleMismatch;
    }
  } catch (const nvrot::ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kValidation;
  } catch (const nvrot::DomainError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kValidation;
  } catch (const nvrot::ResourceError& e) {
    std::cerr << "resource error: " << e.what() << "\n";
    return kResource;
  } catch (const nvrot::FitError& e) {
    std::cerr << "fit failure: " << e.what() << "\n";
    return kFitFailure;
  } catch (const nvrot::IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kIo;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kOther;
  }
  return kOk;
}
