#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nvrot/bath.hpp"
#include "nvrot/dynamics.hpp"
#include "nvrot/fitting.hpp"

namespace nvrot {

using json = nlohmann::ordered_json;

json lattice_to_json(const LatticeSpec& spec);
LatticeSpec lattice_from_json(const json& j, LatticeSpec defaults = {});

json field_to_json(const FieldConfig& cfg);
FieldConfig field_from_json(const json& j, FieldConfig defaults = {});

/// {seed, abundance, lattice_constant_nm, bath_radius_nm, exclusion_radius_nm,
///  sites: [{x, y, z, a_par_radms, a_perp_radms}]}
json bath_to_json(const BathRealization& bath);
/// Rejects sites whose couplings disagree with the point-dipole formula.
BathRealization bath_from_json(const json& j);

json fit_result_to_json(const fit::FitResult& result);

/// "t_us,signal" header then one row per sample.
std::string echo_csv(const EchoCurve& curve);
EchoCurve parse_echo_csv(const std::string& text);

/// Two numeric columns with a header row; returns the columns.
std::pair<std::vector<double>, std::vector<double>> parse_two_column_csv(const std::string& text);

std::string format_number(double value);

std::string read_text_file(const std::filesystem::path& path);
/// Writes via a temporary file and rename so readers never see partial output.
void write_text_atomic(const std::filesystem::path& path, const std::string& text);

}  // namespace nvrot
