#include "nvrot/bath.hpp"

#include <array>
#include <cmath>
#include <string>

#include "nvrot/errors.hpp"
#include "nvrot/rng.hpp"

namespace nvrot {
namespace {

// Rows are the NV-frame axes expressed in cubic crystal coordinates.
Eigen::Matrix3d crystal_to_nv_frame() {
  const Vec3 z = Vec3(1.0, 1.0, 1.0).normalized();
  const Vec3 x = Vec3(1.0, -1.0, 0.0).normalized();
  const Vec3 y = z.cross(x);
  Eigen::Matrix3d r;
  r.row(0) = x.transpose();
  r.row(1) = y.transpose();
  r.row(2) = z.transpose();
  return r;
}

void require_finite(double value, const char* field) {
  if (!std::isfinite(value)) {
    throw ValidationError(std::string("LatticeSpec.") + field + " must be finite");
  }
}

}  // namespace

void LatticeSpec::validate() const {
  require_finite(lattice_constant, "lattice_constant");
  require_finite(bath_radius, "bath_radius");
  require_finite(exclusion_radius, "exclusion_radius");
  if (lattice_constant <= 0.0) {
    throw ValidationError("LatticeSpec.lattice_constant must be > 0");
  }
  if (exclusion_radius < 0.0) {
    throw ValidationError("LatticeSpec.exclusion_radius must be >= 0");
  }
  if (bath_radius < exclusion_radius) {
    throw ValidationError("LatticeSpec.bath_radius must be >= exclusion_radius");
  }
}

Vec3 NuclearSite::hyperfine() const { return hyperfine_field(position); }

bool BathRealization::operator==(const BathRealization& other) const {
  if (seed != other.seed || abundance != other.abundance || sites.size() != other.sites.size() ||
      spec.lattice_constant != other.spec.lattice_constant ||
      spec.bath_radius != other.spec.bath_radius ||
      spec.exclusion_radius != other.spec.exclusion_radius) {
    return false;
  }
  for (std::size_t i = 0; i < sites.size(); ++i) {
    const auto& a = sites[i];
    const auto& b = other.sites[i];
    if (a.position != b.position || a.a_par != b.a_par || a.a_perp != b.a_perp) return false;
  }
  return true;
}

std::vector<Vec3> generate_lattice_sites(const LatticeSpec& spec) {
  spec.validate();
  const double a = spec.lattice_constant;
  // Radius equal to the exclusion radius leaves an empty shell.
  if (spec.bath_radius == spec.exclusion_radius) return {};

  const std::array<Vec3, 3> primitive = {Vec3(0.0, 0.5, 0.5) * a, Vec3(0.5, 0.0, 0.5) * a,
                                         Vec3(0.5, 0.5, 0.0) * a};
  const std::array<Vec3, 2> basis = {Vec3::Zero(), Vec3(0.25, 0.25, 0.25) * a};
  // |n_i| <= 3 (R + a) / a bounds every cell that can touch the ball.
  const int n_max = static_cast<int>(std::ceil(3.0 * (spec.bath_radius + a) / a));
  const Eigen::Matrix3d to_nv = crystal_to_nv_frame();
  const double r_min2 = spec.exclusion_radius * spec.exclusion_radius;
  const double r_max2 = spec.bath_radius * spec.bath_radius;

  std::vector<Vec3> sites;
  for (int n1 = -n_max; n1 <= n_max; ++n1) {
    for (int n2 = -n_max; n2 <= n_max; ++n2) {
      for (int n3 = -n_max; n3 <= n_max; ++n3) {
        const Vec3 cell = n1 * primitive[0] + n2 * primitive[1] + n3 * primitive[2];
        for (const Vec3& offset : basis) {
          const Vec3 r = cell + offset;
          const double r2 = r.squaredNorm();
          // the origin is the NV site itself
          if (r2 == 0.0 || r2 < r_min2 || r2 > r_max2) continue;
          sites.push_back(to_nv * r);
        }
      }
    }
  }
  return sites;
}

BathRealization sample_bath(std::span<const Vec3> positions, double abundance,
                            std::uint64_t seed, const LatticeSpec& spec) {
  if (!(abundance >= 0.0 && abundance <= 1.0)) {
    throw ValidationError("abundance must lie in [0, 1]");
  }
  BathRealization bath;
  bath.seed = seed;
  bath.abundance = abundance;
  bath.spec = spec;
  for (std::size_t i = 0; i < positions.size(); ++i) {
    if (rng::uniform(seed, i) < abundance) bath.sites.push_back(make_site(positions[i]));
  }
  return bath;
}

BathRealization generate_bath(const LatticeSpec& spec, double abundance, std::uint64_t seed) {
  const auto positions = generate_lattice_sites(spec);
  return sample_bath(positions, abundance, seed, spec);
}

Vec3 hyperfine_field(const Vec3& position) {
  const double r = position.norm();
  if (!(r > 0.0)) throw DomainError("hyperfine coupling undefined at zero separation");
  const Vec3 n = position / r;
  const double scale = units::kHyperfinePrefactor / (r * r * r);
  return scale * (3.0 * n.z() * n - Vec3::UnitZ());
}

HyperfineCoupling hyperfine_vector(const Vec3& position) {
  const Vec3 a = hyperfine_field(position);
  return {a.z(), std::hypot(a.x(), a.y())};
}

NuclearSite make_site(const Vec3& position) {
  const auto hf = hyperfine_vector(position);
  return {position, hf.a_par, hf.a_perp};
}

double flip_flop_coupling(const Vec3& position_j, const Vec3& position_k) {
  const Vec3 sep = position_k - position_j;
  const double r = sep.norm();
  if (!(r > 0.0)) throw DomainError("pair coupling undefined for coincident sites");
  const double cos_theta = sep.z() / r;
  return -units::kNuclearDipolarPrefactor * (1.0 - 3.0 * cos_theta * cos_theta) /
         (4.0 * r * r * r);
}

PairCoupling pair_coupling(const BathRealization& bath, std::size_t j, std::size_t k) {
  if (j >= bath.sites.size() || k >= bath.sites.size()) {
    throw ValidationError("pair_coupling: site index out of range");
  }
  if (j == k) throw DomainError("pair_coupling requires distinct sites");
  return {j, k, flip_flop_coupling(bath.sites[j].position, bath.sites[k].position)};
}

std::vector<PairCoupling> pairs_within(std::span<const NuclearSite> sites, double cutoff) {
  if (!(cutoff > 0.0)) throw ValidationError("pair_cutoff must be > 0");
  const double cutoff2 = cutoff * cutoff;
  std::vector<PairCoupling> pairs;
  for (std::size_t j = 0; j < sites.size(); ++j) {
    for (std::size_t k = j + 1; k < sites.size(); ++k) {
      if ((sites[k].position - sites[j].position).squaredNorm() <= cutoff2) {
        pairs.push_back({j, k, flip_flop_coupling(sites[j].position, sites[k].position)});
      }
    }
  }
  return pairs;
}

}  // namespace nvrot
