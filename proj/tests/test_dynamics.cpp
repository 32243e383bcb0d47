#include <cmath>
#include <complex>
#include <numbers>

#include <doctest.h>
#include <Eigen/Core>

#include "nvrot/dynamics.hpp"
#include "nvrot/errors.hpp"
#include "nvrot/rng.hpp"

using namespace nvrot;
using cd = std::complex<double>;

namespace {

constexpr double kPi = std::numbers::pi;

// exp(-i (w . sigma / 2) t) for a spin-1/2 in field w (rad/ms), t in ms.
Eigen::Matrix2cd spin_half_propagator(const Eigen::Vector3d& w, double t) {
  const double n = w.norm();
  Eigen::Matrix2cd u = Eigen::Matrix2cd::Identity() * std::cos(n * t / 2);
  if (n == 0.0) return u;
  const Eigen::Vector3d e = w / n;
  Eigen::Matrix2cd s;
  s << cd(e.z(), 0), cd(e.x(), -e.y()), cd(e.x(), e.y()), cd(-e.z(), 0);
  return u - cd(0, 1) * std::sin(n * t / 2) * s;
}

// Echo for one nucleus by direct matrix products, sensing branch m_S = -1.
double echo_by_matrices(double a_par, double a_perp, double f_n0, double t_us) {
  const double w0 = 2 * kPi * f_n0;
  const Eigen::Vector3d h0(0, 0, w0);
  const Eigen::Vector3d h1(-a_perp, 0, w0 - a_par);
  const double tau = t_us * 1e-3 / 2;
  const Eigen::Matrix2cd u0 = spin_half_propagator(h0, tau);
  const Eigen::Matrix2cd u1 = spin_half_propagator(h1, tau);
  const Eigen::Matrix2cd branch0 = u1 * u0;
  const Eigen::Matrix2cd branch1 = u0 * u1;
  return ((branch1.adjoint() * branch0).trace() / 2.0).real();
}

NuclearSite site_with(double a_par, double a_perp) {
  NuclearSite s;
  s.position = Vec3(1, 0, 0);
  s.a_par = a_par;
  s.a_perp = a_perp;
  return s;
}

}  // namespace

TEST_CASE("pseudo field: gyromagnetic ratios") {
  CHECK(pseudo_field(1.0715, units::kGammaC13) == doctest::Approx(1.0));
  CHECK(pseudo_field(2800.0, units::kGammaElectron) == doctest::Approx(1.0));
  CHECK(pseudo_field(-5.0, units::kGammaC13) == doctest::Approx(-5.0 / 1.0715));
  CHECK_THROWS_AS(pseudo_field(1.0, 0.0), DomainError);
  CHECK_THROWS_AS(pseudo_field(1.0, -1.0), DomainError);
}

TEST_CASE("effective fields and revival prediction at 37 G") {
  FieldConfig cfg;
  cfg.b0_z = 37.0;
  const auto f = effective_fields(cfg);
  CHECK(f.f_n0 == doctest::Approx(39.6455));
  CHECK(f.f_e == doctest::Approx(103600.0));
  CHECK(revival_time_prediction(cfg).value() == doctest::Approx(2000.0 / 39.6455));
  cfg.f_rot = -39.6455;
  CHECK(std::abs(effective_fields(cfg).f_n0) < 1e-12);
  CHECK_FALSE(revival_time_prediction(cfg).has_value());
  cfg.f_rot = 3.0;
  const auto g = effective_fields(cfg);
  CHECK(g.b_pseudo_n == doctest::Approx(3.0 / 1.0715));
  CHECK(g.b_pseudo_e == doctest::Approx(3.0 / 2800.0));
  CHECK(g.nuclear_larmor() == doctest::Approx(42.6455));
}

TEST_CASE("field config validation") {
  FieldConfig cfg;
  cfg.theta_b = kPi / 2;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg.theta_b = 0.0;
  cfg.gamma_n = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg.gamma_n = units::kGammaC13;
  cfg.b0_z = std::nan("");
  CHECK_THROWS_AS(effective_fields(cfg), ValidationError);
  CHECK(parse_method("product") == Method::product);
  CHECK(parse_method("cce2") == Method::cce2);
  CHECK_THROWS_AS(parse_method("cce3"), ValidationError);
}

TEST_CASE("single nucleus: closed form equals explicit propagators") {
  for (std::uint64_t i = 0; i < 300; ++i) {
    const double a_par = 2 * kPi * (200.0 * rng::uniform(11, i) - 100.0);
    const double a_perp = 2 * kPi * 100.0 * rng::uniform(12, i);
    const double f = 120.0 * rng::uniform(13, i) - 60.0;
    const double t = 150.0 * rng::uniform(14, i);
    const double got = single_nucleus_echo(site_with(a_par, a_perp), f, t);
    CHECK(got == doctest::Approx(echo_by_matrices(a_par, a_perp, f, t)).epsilon(1e-11));
  }
}

TEST_CASE("single nucleus: invariants") {
  for (std::uint64_t i = 0; i < 300; ++i) {
    const auto site = site_with(2 * kPi * (100.0 * rng::uniform(21, i) - 50.0),
                                2 * kPi * 50.0 * rng::uniform(22, i));
    const double f = 80.0 * rng::uniform(23, i) - 40.0;
    const double t = 200.0 * rng::uniform(24, i);
    const double m = single_nucleus_echo(site, f, t);
    CHECK(m <= 1.0 + 1e-15);
    CHECK(m >= -1.0 - 1e-15);
    CHECK(single_nucleus_echo(site, f, 0.0) == 1.0);
    // Full revival when w0 tau / 2 = pi.
    if (f != 0.0) CHECK(single_nucleus_echo(site, f, 2000.0 / std::abs(f)) == doctest::Approx(1.0));
    // Reversing rotation, field and hyperfine vector together leaves the echo unchanged.
    const auto mirrored = site_with(-site.a_par, -site.a_perp);
    CHECK(single_nucleus_echo(mirrored, -f, t) == doctest::Approx(m).epsilon(1e-12));
    // Purely axial coupling and exact cancellation are both refocused.
    CHECK(single_nucleus_echo(site_with(site.a_par, 0.0), f, t) == doctest::Approx(1.0));
    CHECK(single_nucleus_echo(site, 0.0, t) == 1.0);
  }
  CHECK_THROWS_AS(single_nucleus_echo(site_with(1, 1), 1.0, -1.0), ValidationError);
}

TEST_CASE("echo signal depends on rotation only through f_n0") {
  const auto bath = generate_bath({0.3567, 2.5, 0.5}, 0.011, 5);
  const auto times = uniform_grid(0, 80, 0.5);
  FieldConfig rotating;
  rotating.b0_z = 37.0;
  rotating.f_rot = 4.25;
  FieldConfig stationary;
  stationary.b0_z = 37.0 + 4.25 / units::kGammaC13;
  const auto a = echo_signal(bath, rotating, times);
  const auto b = echo_signal(bath, stationary, times);
  for (std::size_t i = 0; i < times.size(); ++i) {
    CHECK(a.values[i] == doctest::Approx(b.values[i]).epsilon(1e-9));
  }
  CHECK(a.values.front() == 1.0);
  CHECK_NOTHROW(a.validate());
}

TEST_CASE("echo signal: empty bath and bad times") {
  BathRealization empty;
  const std::vector<double> times = {0, 10, 20};
  const auto curve = echo_signal(empty, FieldConfig{}, times);
  for (double v : curve.values) CHECK(v == 1.0);
  CHECK_THROWS_AS(echo_signal(empty, FieldConfig{}, std::vector<double>{}), ValidationError);
  CHECK_THROWS_AS(echo_signal(empty, FieldConfig{}, std::vector<double>{0, 2, 1}), ValidationError);
  CHECK_THROWS_AS(echo_signal(empty, FieldConfig{}, std::vector<double>{-1, 2}), ValidationError);
}

TEST_CASE("ensemble: mean of realizations, independent of jobs") {
  const LatticeSpec spec{0.3567, 2.0, 0.5};
  const auto times = uniform_grid(0, 60, 1.0);
  FieldConfig cfg;
  EnsembleOptions opts;
  opts.n_real = 12;
  opts.base_seed = 40;
  const auto serial = ensemble_echo(spec, cfg, times, opts);
  opts.jobs = 4;
  const auto threaded = ensemble_echo(spec, cfg, times, opts);
  CHECK(serial.values == threaded.values);

  std::vector<double> manual(times.size(), 0.0);
  for (std::uint64_t s = 40; s < 52; ++s) {
    const auto c = echo_signal(generate_bath(spec, 0.011, s), cfg, times);
    for (std::size_t i = 0; i < times.size(); ++i) manual[i] += c.values[i];
  }
  for (std::size_t i = 0; i < times.size(); ++i) {
    CHECK(serial.values[i] == doctest::Approx(manual[i] / 12.0).epsilon(1e-12));
  }
  opts.n_real = 0;
  CHECK_THROWS_AS(ensemble_echo(spec, cfg, times, opts), ValidationError);
}

TEST_CASE("ensemble: converges to the site-wise occupation average") {
  // Independent occupations: E[prod M] = prod (1 - p (1 - M_site)).
  const LatticeSpec spec{0.3567, 2.0, 0.5};
  const auto positions = generate_lattice_sites(spec);
  const std::vector<double> times = {10, 20, 30, 40, 50, 60};
  FieldConfig cfg;
  const double f = effective_fields(cfg).f_n0;
  EnsembleOptions opts;
  opts.n_real = 2000;
  opts.jobs = 4;
  const auto mean = ensemble_echo(spec, cfg, times, opts);
  for (std::size_t i = 0; i < times.size(); ++i) {
    double expected = 1.0;
    for (const auto& p : positions) {
      expected *= 1.0 - 0.011 * (1.0 - single_nucleus_echo(make_site(p), f, times[i]));
    }
    // Per-realization spread is below 1, so 5 / sqrt(2000) bounds the error.
    CHECK(std::abs(mean.values[i] - expected) < 5.0 / std::sqrt(2000.0));
  }
}

TEST_CASE("misalignment: aligned geometries are unattenuated") {
  FieldConfig cfg;
  cfg.f_rot = 3.0;
  cfg.theta_nv = 0.3;
  CHECK(misalignment_attenuation(cfg, {40.0, 0.5, {}}) == 1.0);
  cfg.theta_b = 0.2;
  cfg.theta_nv = 0.0;
  CHECK(misalignment_attenuation(cfg, {40.0, 0.5, {}}) == 1.0);
  cfg.theta_nv = 0.1;
  cfg.f_rot = 0.0;
  CHECK_THROWS_AS(misalignment_attenuation(cfg, {40.0, 0.5, {}}), DomainError);
  cfg.f_rot = 1.0;
  CHECK_THROWS_AS(misalignment_attenuation(cfg, {40.0, 1.0, {}}), ValidationError);
}

TEST_CASE("misalignment: phase average equals quadrature of the accumulated phase") {
  // phi(phi0) = 2 pi gamma_e B_eff int_0^T sin(w t + phi0) s(t) dt by Simpson,
  // then averaged over phi0 with the trapezoid rule (periodic, spectrally exact).
  for (double f_rot : {0.5, 2.0, 7.5, -3.0}) {
    for (double total : {20.0, 60.0, 150.0}) {
      FieldConfig cfg;
      cfg.b0_z = 37.0;
      cfg.f_rot = f_rot;
      cfg.theta_b = 0.02;
      cfg.theta_nv = 0.03;
      const double b_eff = 37.0 * std::sin(0.02) * std::sin(0.03);
      const double w = 2 * kPi * f_rot;
      const double t_end = total * 1e-3;
      auto simpson = [&](double a, double b, double phi0) {
        const int n = 2000;
        const double h = (b - a) / n;
        double acc = 0.0;
        for (int i = 0; i <= n; ++i) {
          const double wgt = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
          acc += wgt * std::sin(w * (a + i * h) + phi0);
        }
        return acc * h / 3.0;
      };
      // the echo sign flips at the pi pulse, so integrate each half separately
      auto phase = [&](double phi0) {
        const double half = t_end / 2;
        return 2 * kPi * 2800.0 * b_eff * (simpson(0, half, phi0) - simpson(half, t_end, phi0));
      };
      const int m = 256;
      double avg = 0.0;
      for (int k = 0; k < m; ++k) {
        const double phi0 = 2 * kPi * k / m;
        const double fixed = misalignment_attenuation(cfg, {total, 0.5, phi0});
        CHECK(fixed == doctest::Approx(std::cos(phase(phi0))).epsilon(1e-5));
        avg += std::cos(phase(phi0)) / m;
      }
      CHECK(std::abs(misalignment_attenuation(cfg, {total, 0.5, {}}) - avg) < 1e-6);
    }
  }
}

TEST_CASE("misalignment: averaged factor can change sign") {
  FieldConfig cfg;
  cfg.b0_z = 500.0;
  cfg.f_rot = 2.0;
  cfg.theta_b = 0.3;
  cfg.theta_nv = 0.3;
  double lowest = 1.0;
  for (double t = 1; t < 300; t += 1) {
    lowest = std::min(lowest, misalignment_attenuation(cfg, {t, 0.5, {}}));
  }
  CHECK(lowest < 0.0);
  CHECK(lowest > -0.41);  // J0 is bounded below by about -0.4028
}

TEST_CASE("time grids") {
  const auto g = uniform_grid(0, 1, 0.25);
  CHECK(g == std::vector<double>{0, 0.25, 0.5, 0.75, 1.0});
  CHECK(uniform_grid(0.3, 1.0, 0.25) == std::vector<double>{0.5, 0.75, 1.0});
  CHECK_THROWS_AS(uniform_grid(0, 1, 0), ValidationError);
  CHECK_THROWS_AS(uniform_grid(2, 1, 0.1), ValidationError);
  const auto r = refine_grid(g, 0.4, 0.6, 0.05);
  CHECK(std::is_sorted(r.begin(), r.end()));
  CHECK(std::adjacent_find(r.begin(), r.end()) == r.end());
  CHECK(r.size() == 5 + 5 - 1);  // 0.4..0.6 adds five points, 0.5 is shared
}
