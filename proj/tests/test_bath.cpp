#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include <doctest.h>
#include <Eigen/Geometry>

#include "nvrot/bath.hpp"
#include "nvrot/errors.hpp"
#include "nvrot/rng.hpp"
#include "nvrot/serialization.hpp"

using namespace nvrot;

namespace {

// Brute force over conventional cubic cells: 4 FCC sites plus the (1/4,1/4,1/4)
// offset copy. Returns distances from the origin, sorted.
std::vector<double> conventional_cell_distances(double a, double r_min, double r_max) {
  const std::array<Vec3, 8> basis = {
      Vec3(0, 0, 0),          Vec3(0, 0.5, 0.5),       Vec3(0.5, 0, 0.5),
      Vec3(0.5, 0.5, 0),      Vec3(0.25, 0.25, 0.25),  Vec3(0.25, 0.75, 0.75),
      Vec3(0.75, 0.25, 0.75), Vec3(0.75, 0.75, 0.25)};
  const int n = static_cast<int>(std::ceil(r_max / a)) + 1;
  std::vector<double> out;
  for (int i = -n; i <= n; ++i)
    for (int j = -n; j <= n; ++j)
      for (int k = -n; k <= n; ++k)
        for (const auto& b : basis) {
          const double r = ((Vec3(i, j, k) + b) * a).norm();
          if (r >= r_min && r <= r_max) out.push_back(r);
        }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<double> distances(const std::vector<Vec3>& sites) {
  std::vector<double> out;
  for (const auto& s : sites) out.push_back(s.norm());
  std::sort(out.begin(), out.end());
  return out;
}

// (mu0/4pi) g1 g2 hbar / (1 nm)^3 in rad/s, evaluated directly in SI.
double dipolar_si_at_1nm(double gamma1_hz_per_tesla, double gamma2_hz_per_tesla) {
  const double two_pi = 2.0 * std::numbers::pi;
  return 1e-7 * (two_pi * gamma1_hz_per_tesla) * (two_pi * gamma2_hz_per_tesla) *
         1.054571817e-34 / 1e-27;
}

}  // namespace

TEST_CASE("lattice: no site closer than the nearest-neighbour distance") {
  const LatticeSpec spec{0.3567, 0.1, 0.0};
  CHECK(generate_lattice_sites(spec).empty());
  CHECK(conventional_cell_distances(0.3567, 0.0, 0.1).size() == 1);  // only the NV site itself
}

TEST_CASE("lattice: nearest neighbours at a*sqrt(3)/4") {
  const auto sites = generate_lattice_sites({0.3567, 0.16, 0.01});
  REQUIRE(sites.size() == 4);
  for (const auto& s : sites) CHECK(s.norm() == doctest::Approx(0.3567 * std::sqrt(3.0) / 4));
}

TEST_CASE("lattice: matches conventional-cell enumeration and bulk density") {
  const LatticeSpec spec{0.3567, 2.0, 0.0};
  const auto sites = generate_lattice_sites(spec);
  auto expected = conventional_cell_distances(spec.lattice_constant, 1e-12, spec.bath_radius);
  const auto got = distances(sites);
  REQUIRE(got.size() == expected.size());
  for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i] == doctest::Approx(expected[i]));
  // 8 atoms per a^3 times the ball volume.
  const double bulk = 8.0 / std::pow(0.3567, 3) * 4.0 / 3.0 * std::numbers::pi * 8.0;
  CHECK(std::abs(static_cast<double>(sites.size()) - bulk) / bulk < 0.02);
}

TEST_CASE("lattice: shell bounds, ordering and the [111] axis") {
  const LatticeSpec spec{0.3567, 1.5, 0.5};
  const auto sites = generate_lattice_sites(spec);
  for (const auto& s : sites) {
    CHECK(s.norm() >= 0.5 - 1e-12);
    CHECK(s.norm() <= 1.5 + 1e-12);
  }
  CHECK(generate_lattice_sites(spec) == sites);
  // The bond to the (1/4,1/4,1/4) neighbour lies along the NV axis.
  const auto nn = generate_lattice_sites({0.3567, 0.16, 0.01});
  const bool axial = std::any_of(nn.begin(), nn.end(), [](const Vec3& v) {
    return std::abs(v.x()) < 1e-12 && std::abs(v.y()) < 1e-12;
  });
  CHECK(axial);
}

TEST_CASE("lattice: empty shell and validation errors name the field") {
  CHECK(generate_lattice_sites({0.3567, 1.0, 1.0}).empty());
  auto message = [](const LatticeSpec& s) {
    try {
      s.validate();
    } catch (const ValidationError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(message({0.0, 1.0, 0.5}).find("lattice_constant") != std::string::npos);
  CHECK(message({0.3567, 1.0, -0.1}).find("exclusion_radius") != std::string::npos);
  CHECK(message({0.3567, 0.4, 0.5}).find("bath_radius") != std::string::npos);
  CHECK_THROWS_AS(generate_lattice_sites({-1.0, 1.0, 0.5}), ValidationError);
}

TEST_CASE("sample_bath: trivial abundances and validation") {
  const auto positions = generate_lattice_sites({0.3567, 1.5, 0.5});
  CHECK(sample_bath(positions, 0.0, 7).sites.empty());
  CHECK(sample_bath(positions, 1.0, 7).sites.size() == positions.size());
  CHECK_THROWS_AS(sample_bath(positions, 1.5, 7), ValidationError);
  CHECK_THROWS_AS(sample_bath(positions, -0.1, 7), ValidationError);
}

TEST_CASE("sample_bath: deterministic and order independent") {
  const LatticeSpec spec{0.3567, 2.5, 0.5};
  const auto a = generate_bath(spec, 0.011, 1234);
  const auto b = generate_bath(spec, 0.011, 1234);
  CHECK(a == b);
  CHECK_FALSE(a == generate_bath(spec, 0.011, 1235));
  // Decisions depend only on (seed, index): a prefix samples identically.
  const auto positions = generate_lattice_sites(spec);
  const std::span<const Vec3> prefix(positions.data(), positions.size() / 2);
  const auto partial = sample_bath(prefix, 0.011, 1234, spec);
  REQUIRE(partial.sites.size() <= a.sites.size());
  for (std::size_t i = 0; i < partial.sites.size(); ++i) {
    CHECK(partial.sites[i].position == a.sites[i].position);
  }
}

TEST_CASE("sample_bath: binomial occupancy statistics") {
  const std::vector<Vec3> positions(10000, Vec3(1.0, 0.0, 0.0));
  const double p = 0.011;
  const double n = 10000.0;
  const double sd = std::sqrt(n * p * (1 - p));
  double total = 0.0;
  const int seeds = 200;
  for (int s = 0; s < seeds; ++s) {
    const double count = static_cast<double>(sample_bath(positions, p, 1000 + s).sites.size());
    CHECK(std::abs(count - n * p) < 5.0 * sd);
    total += count;
  }
  const double mean = total / seeds;
  CHECK(std::abs(mean - 110.0) < 5.0 * sd / std::sqrt(static_cast<double>(seeds)));
}

TEST_CASE("hyperfine: prefactor matches independent constant evaluation") {
  const double d_si = dipolar_si_at_1nm(2.8e10, 1.0715e7);  // rad/s at 1 nm
  CHECK(units::kHyperfinePrefactor == doctest::Approx(d_si * 1e-3).epsilon(1e-12));
  const double khz = units::kHyperfinePrefactor / (2.0 * std::numbers::pi);
  CHECK(std::abs(khz - 19.9) / 19.9 < 0.01);
}

TEST_CASE("hyperfine: axial, equatorial and magic-angle geometries") {
  const double d = units::kHyperfinePrefactor;
  auto axial = hyperfine_vector(Vec3(0, 0, 1));
  CHECK(axial.a_par == doctest::Approx(2 * d));
  CHECK(axial.a_perp == doctest::Approx(0.0));
  auto equator = hyperfine_vector(Vec3(1, 0, 0));
  CHECK(equator.a_par == doctest::Approx(-d));
  CHECK(equator.a_perp == doctest::Approx(0.0));
  const double magic = std::acos(1.0 / std::sqrt(3.0));
  auto m = hyperfine_vector(Vec3(std::sin(magic), 0, std::cos(magic)));
  CHECK(std::abs(m.a_par) < 1e-12 * d);
  CHECK(m.a_perp > 0.0);
  CHECK_THROWS_AS(hyperfine_vector(Vec3::Zero()), DomainError);
}

TEST_CASE("hyperfine: 1/r^3 scaling and axial symmetry (property)") {
  for (std::uint64_t i = 0; i < 200; ++i) {
    const Vec3 dir = Vec3(rng::uniform(1, 3 * i) - 0.5, rng::uniform(1, 3 * i + 1) - 0.5,
                          rng::uniform(1, 3 * i + 2) - 0.5)
                         .normalized();
    const double r = 0.5 + 2.0 * rng::uniform(2, i);
    const auto near = hyperfine_vector(r * dir);
    const auto far = hyperfine_vector(2 * r * dir);
    CHECK(far.a_par == doctest::Approx(near.a_par / 8).epsilon(1e-12));
    CHECK(far.a_perp == doctest::Approx(near.a_perp / 8).epsilon(1e-12));
    const double phi = 2 * std::numbers::pi * rng::uniform(3, i);
    const Eigen::Matrix3d rot = Eigen::AngleAxisd(phi, Vec3::UnitZ()).toRotationMatrix();
    const auto turned = hyperfine_vector(rot * (r * dir));
    CHECK(turned.a_par == doctest::Approx(near.a_par).epsilon(1e-12));
    CHECK(turned.a_perp == doctest::Approx(near.a_perp).epsilon(1e-12));
    // Site hyperfine vector carries the same magnitudes.
    const auto site = make_site(r * dir);
    CHECK(site.hyperfine().z() == doctest::Approx(site.a_par));
    CHECK(site.hyperfine().head<2>().norm() == doctest::Approx(site.a_perp));
  }
}

TEST_CASE("hyperfine: shell average of a_par vanishes") {
  // Gauss-Legendre in cos(theta) times uniform azimuth integrates 3cos^2-1 exactly.
  const std::array<double, 4> x = {-0.8611363115940526, -0.3399810435848563,
                                   0.3399810435848563, 0.8611363115940526};
  const std::array<double, 4> w = {0.3478548451374538, 0.6521451548625461,
                                   0.6521451548625461, 0.3478548451374538};
  double sum = 0.0;
  for (int i = 0; i < 4; ++i) {
    for (int k = 0; k < 8; ++k) {
      const double phi = 2 * std::numbers::pi * k / 8;
      const double s = std::sqrt(1 - x[i] * x[i]);
      sum += w[i] / 8 * hyperfine_vector(1.3 * Vec3(s * std::cos(phi), s * std::sin(phi), x[i])).a_par;
    }
  }
  CHECK(std::abs(sum) < 1e-12);
}

TEST_CASE("pair coupling: geometry, symmetry and constants") {
  const double c = units::kNuclearDipolarPrefactor;
  CHECK(c == doctest::Approx(dipolar_si_at_1nm(1.0715e7, 1.0715e7) * 1e-3).epsilon(1e-12));
  const Vec3 o(0.3, -0.2, 0.9);
  CHECK(flip_flop_coupling(o, o + Vec3(0, 0, 0.4)) == doctest::Approx(c / (2 * 0.064)));
  const double magic = std::acos(1.0 / std::sqrt(3.0));
  CHECK(std::abs(flip_flop_coupling(o, o + 0.4 * Vec3(std::sin(magic), 0, std::cos(magic)))) <
        1e-12 * c);
  // r = 0.5 nm at 90 degrees: -(C / 4) / r^3 with C from SI constants.
  const double expected = -dipolar_si_at_1nm(1.0715e7, 1.0715e7) * 1e-3 / (4 * 0.125);
  const double got = flip_flop_coupling(o, o + Vec3(0.5, 0, 0));
  CHECK(std::abs(got - expected) / std::abs(expected) < 0.01);
  const Vec3 p(-0.7, 0.4, 0.1);
  CHECK(flip_flop_coupling(o, p) == flip_flop_coupling(p, o));
  CHECK(flip_flop_coupling(o, o + 2 * (p - o)) == doctest::Approx(flip_flop_coupling(o, p) / 8));
  CHECK_THROWS_AS(flip_flop_coupling(o, o), DomainError);

  BathRealization bath;
  bath.sites = {make_site(o), make_site(p)};
  const auto pc = pair_coupling(bath, 0, 1);
  CHECK(pc.b_jk == flip_flop_coupling(o, p));
  CHECK_THROWS_AS(pair_coupling(bath, 1, 1), DomainError);
  CHECK(pairs_within(bath.sites, 0.1).empty());
  CHECK(pairs_within(bath.sites, 5.0).size() == 1);
}

TEST_CASE("bath JSON round trip is exact and checks couplings") {
  const auto bath = generate_bath({0.3567, 2.0, 0.5}, 0.011, 99);
  const auto text = bath_to_json(bath).dump();
  const auto back = bath_from_json(json::parse(text));
  CHECK(back == bath);
  auto doc = json::parse(text);
  REQUIRE(!doc["sites"].empty());
  doc["sites"][0]["a_par_radms"] = doc["sites"][0]["a_par_radms"].get<double>() * 1.1 + 1.0;
  CHECK_THROWS_AS(bath_from_json(doc), ValidationError);
  CHECK_THROWS_AS(bath_from_json(json::object()), ValidationError);
}
