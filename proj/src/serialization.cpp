#include "nvrot/serialization.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "nvrot/errors.hpp"

namespace nvrot {
namespace {

template <typename T>
void read_optional(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bad value for '") + key + "': " + e.what());
  }
}

void reject_unknown(const json& j, std::initializer_list<const char*> known, const char* what) {
  if (!j.is_object()) throw ValidationError(std::string(what) + " must be a JSON object");
  for (const auto& item : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || item.key() == k;
    if (!ok) throw ValidationError(std::string(what) + ": unknown key '" + item.key() + "'");
  }
}

double parse_double(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\r' || s.back() == '\t')) {
    s.remove_suffix(1);
  }
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ValidationError("CSV: cannot parse number '" + std::string(s) + "'");
  }
  return value;
}

}  // namespace

json lattice_to_json(const LatticeSpec& spec) {
  return {{"lattice_constant_nm", spec.lattice_constant},
          {"bath_radius_nm", spec.bath_radius},
          {"exclusion_radius_nm", spec.exclusion_radius}};
}

LatticeSpec lattice_from_json(const json& j, LatticeSpec spec) {
  reject_unknown(j, {"lattice_constant_nm", "bath_radius_nm", "exclusion_radius_nm"}, "lattice");
  read_optional(j, "lattice_constant_nm", spec.lattice_constant);
  read_optional(j, "bath_radius_nm", spec.bath_radius);
  read_optional(j, "exclusion_radius_nm", spec.exclusion_radius);
  spec.validate();
  return spec;
}

json field_to_json(const FieldConfig& cfg) {
  return {{"b0_z_G", cfg.b0_z},
          {"f_rot_kHz", cfg.f_rot},
          {"theta_b_rad", cfg.theta_b},
          {"theta_nv_rad", cfg.theta_nv},
          {"gamma_n_kHz_per_G", cfg.gamma_n},
          {"gamma_e_kHz_per_G", cfg.gamma_e}};
}

FieldConfig field_from_json(const json& j, FieldConfig cfg) {
  reject_unknown(j,
                 {"b0_z_G", "f_rot_kHz", "theta_b_rad", "theta_nv_rad", "gamma_n_kHz_per_G",
                  "gamma_e_kHz_per_G"},
                 "field");
  read_optional(j, "b0_z_G", cfg.b0_z);
  read_optional(j, "f_rot_kHz", cfg.f_rot);
  read_optional(j, "theta_b_rad", cfg.theta_b);
  read_optional(j, "theta_nv_rad", cfg.theta_nv);
  read_optional(j, "gamma_n_kHz_per_G", cfg.gamma_n);
  read_optional(j, "gamma_e_kHz_per_G", cfg.gamma_e);
  cfg.validate();
  return cfg;
}

json bath_to_json(const BathRealization& bath) {
  json sites = json::array();
  for (const auto& s : bath.sites) {
    sites.push_back({{"x", s.position.x()},
                     {"y", s.position.y()},
                     {"z", s.position.z()},
                     {"a_par_radms", s.a_par},
                     {"a_perp_radms", s.a_perp}});
  }
  return {{"seed", bath.seed},
          {"abundance", bath.abundance},
          {"lattice_constant_nm", bath.spec.lattice_constant},
          {"bath_radius_nm", bath.spec.bath_radius},
          {"exclusion_radius_nm", bath.spec.exclusion_radius},
          {"sites", sites}};
}

BathRealization bath_from_json(const json& j) {
  try {
    BathRealization bath;
    bath.seed = j.at("seed").get<std::uint64_t>();
    bath.abundance = j.at("abundance").get<double>();
    bath.spec.lattice_constant = j.at("lattice_constant_nm").get<double>();
    bath.spec.bath_radius = j.at("bath_radius_nm").get<double>();
    bath.spec.exclusion_radius = j.at("exclusion_radius_nm").get<double>();
    bath.spec.validate();
    for (const auto& s : j.at("sites")) {
      NuclearSite site;
      site.position = Vec3(s.at("x").get<double>(), s.at("y").get<double>(),
                           s.at("z").get<double>());
      site.a_par = s.at("a_par_radms").get<double>();
      site.a_perp = s.at("a_perp_radms").get<double>();
      const auto expected = hyperfine_vector(site.position);
      const double scale = std::hypot(expected.a_par, expected.a_perp);
      if (std::abs(expected.a_par - site.a_par) > 1e-9 * scale ||
          std::abs(expected.a_perp - site.a_perp) > 1e-9 * scale) {
        throw ValidationError("bath: site couplings disagree with the point-dipole formula");
      }
      bath.sites.push_back(site);
    }
    return bath;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bath JSON: ") + e.what());
  }
}

json fit_result_to_json(const fit::FitResult& r) {
  json params = json::object();
  json errors = json::object();
  for (std::size_t i = 0; i < r.names.size(); ++i) {
    params[r.names[i]] = r.params[i];
    if (!r.std_errors.empty()) errors[r.names[i]] = r.std_errors[i];
  }
  return {{"model", r.model},
          {"params", params},
          {"std_errors", errors},
          {"residual_norm", r.residual_norm},
          {"converged", r.converged},
          {"iterations", r.iterations},
          {"warnings", r.warnings}};
}

std::string format_number(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

std::string echo_csv(const EchoCurve& curve) {
  curve.validate();
  std::string out = "t_us,signal\n";
  for (std::size_t i = 0; i < curve.times.size(); ++i) {
    out += format_number(curve.times[i]);
    out += ',';
    out += format_number(curve.values[i]);
    out += '\n';
  }
  return out;
}

std::pair<std::vector<double>, std::vector<double>> parse_two_column_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<double> a;
  std::vector<double> b;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    if (header) {
      header = false;
      continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw ValidationError("CSV: expected two columns");
    const std::string_view view(line);
    a.push_back(parse_double(view.substr(0, comma)));
    const auto rest = view.substr(comma + 1);
    if (rest.find(',') != std::string_view::npos) throw ValidationError("CSV: expected two columns");
    b.push_back(parse_double(rest));
  }
  return {a, b};
}

EchoCurve parse_echo_csv(const std::string& text) {
  auto [t, s] = parse_two_column_csv(text);
  EchoCurve curve{std::move(t), std::move(s), "csv"};
  curve.validate();
  return curve;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp);
    out << text;
    if (!out) throw IoError("write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace nvrot
