#pragma once

// 13C nuclear spin bath around an NV centre.
//
// Coordinates are in nm with the NV at the origin and the NV axis along z.
// The diamond lattice is oriented so that the crystal [111] direction is z.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "nvrot/constants.hpp"

namespace nvrot {

using Vec3 = Eigen::Vector3d;

struct LatticeSpec {
  double lattice_constant = units::kDiamondLatticeConstant;  // nm
  double bath_radius = 3.0;                                  // nm
  double exclusion_radius = 0.5;                             // nm

  /// Throws ValidationError naming the offending field.
  void validate() const;
};

/// Point-dipole hyperfine components in rad/ms.
struct HyperfineCoupling {
  double a_par = 0.0;
  double a_perp = 0.0;  // >= 0
};

struct NuclearSite {
  Vec3 position = Vec3::Zero();
  double a_par = 0.0;   // rad/ms
  double a_perp = 0.0;  // rad/ms

  /// Full hyperfine vector (a_x, a_y, a_par); the transverse azimuth follows
  /// from the position.
  Vec3 hyperfine() const;
};

struct BathRealization {
  std::vector<NuclearSite> sites;
  std::uint64_t seed = 0;
  double abundance = units::kNaturalAbundance;
  LatticeSpec spec;

  bool operator==(const BathRealization&) const;
};

/// Secular flip-flop coupling b_jk between two bath sites, rad/ms.
struct PairCoupling {
  std::size_t index_j = 0;
  std::size_t index_k = 0;
  double b_jk = 0.0;
};

/// Diamond lattice carbon positions with exclusion_radius <= |r| <= bath_radius,
/// ordered lexicographically by FCC cell index then basis index.
std::vector<Vec3> generate_lattice_sites(const LatticeSpec& spec);

/// Keeps each position independently with probability `abundance`; the draw
/// for position i depends only on (seed, i).
BathRealization sample_bath(std::span<const Vec3> positions, double abundance,
                            std::uint64_t seed, const LatticeSpec& spec = {});

/// Convenience: generate_lattice_sites followed by sample_bath.
BathRealization generate_bath(const LatticeSpec& spec, double abundance, std::uint64_t seed);

/// A = (d/r^3)(3(z.r)r - z), d the electron-nuclear dipolar prefactor.
Vec3 hyperfine_field(const Vec3& position);
HyperfineCoupling hyperfine_vector(const Vec3& position);
NuclearSite make_site(const Vec3& position);

/// b = -(mu0/4pi) gamma_n^2 hbar (1 - 3cos^2 theta) / (4 r^3).
double flip_flop_coupling(const Vec3& position_j, const Vec3& position_k);
PairCoupling pair_coupling(const BathRealization& bath, std::size_t j, std::size_t k);

/// All pairs (j < k) closer than `cutoff` nm, in (j, k) lexicographic order.
std::vector<PairCoupling> pairs_within(std::span<const NuclearSite> sites, double cutoff);

}  // namespace nvrot
