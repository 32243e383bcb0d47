// Pair-cluster correlation expansion of the echo signal.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>

#include <Eigen/Eigenvalues>

#include "nvrot/dynamics.hpp"
#include "nvrot/errors.hpp"

namespace nvrot {
namespace {

using cd = std::complex<double>;
using Mat4 = Eigen::Matrix4cd;

Mat4 kron(const Eigen::Matrix2cd& a, const Eigen::Matrix2cd& b) {
  Mat4 out;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 2; ++k)
        for (int l = 0; l < 2; ++l) out(2 * i + k, 2 * j + l) = a(i, j) * b(k, l);
  return out;
}

// Two spin-1/2 operators in the basis |uu>, |ud>, |du>, |dd>, site j first.
struct PairOperators {
  std::array<Mat4, 3> j;
  std::array<Mat4, 3> k;
  Mat4 flip_flop;  // Ijx Ikx + Ijy Iky

  PairOperators() {
    Eigen::Matrix2cd sx, sy, sz;
    sx << 0.0, 0.5, 0.5, 0.0;
    sy << 0.0, cd(0.0, -0.5), cd(0.0, 0.5), 0.0;
    sz << 0.5, 0.0, 0.0, -0.5;
    const Eigen::Matrix2cd id = Eigen::Matrix2cd::Identity();
    const std::array<Eigen::Matrix2cd, 3> s = {sx, sy, sz};
    for (int a = 0; a < 3; ++a) {
      j[a] = kron(s[a], id);
      k[a] = kron(id, s[a]);
    }
    flip_flop = j[0] * k[0] + j[1] * k[1];
  }
};

const PairOperators& pair_operators() {
  static const PairOperators ops;
  return ops;
}

Mat4 branch_hamiltonian(double m_s, double w0, const Vec3& a_j, const Vec3& a_k, double b) {
  const auto& ops = pair_operators();
  Mat4 h = b * ops.flip_flop;
  for (int a = 0; a < 3; ++a) {
    const double bias = a == 2 ? w0 : 0.0;
    h += (bias + m_s * a_j[a]) * ops.j[a] + (bias + m_s * a_k[a]) * ops.k[a];
  }
  return h;
}

}  // namespace

std::vector<cd> pair_coherence(const NuclearSite& j, const NuclearSite& k, double b_jk,
                               double f_n0, std::span<const double> times) {
  const double w0 = units::angular(f_n0);
  const Vec3 a_j = j.hyperfine();
  const Vec3 a_k = k.hyperfine();
  const Eigen::SelfAdjointEigenSolver<Mat4> h0(branch_hamiltonian(0.0, w0, a_j, a_k, b_jk));
  const Eigen::SelfAdjointEigenSolver<Mat4> h1(
      branch_hamiltonian(kSensingBranch, w0, a_j, a_k, b_jk));
  const Mat4 x = h1.eigenvectors().adjoint() * h0.eigenvectors();
  const Eigen::Vector4d& l0 = h0.eigenvalues();
  const Eigen::Vector4d& l1 = h1.eigenvalues();

  // With U0 = e^{-i H1 tau} e^{-i H0 tau} and U1 = e^{-i H0 tau} e^{-i H1 tau},
  // Tr[U1^dag U0] = sum_ab |Y_ab|^2 e^{i (l1_a - l1_b) tau}, Y = X e^{i D0 tau} X^dag.
  std::vector<cd> out(times.size());
  for (std::size_t n = 0; n < times.size(); ++n) {
    const double tau = units::us_to_ms(times[n]) / 2.0;
    Eigen::Vector4cd p0;
    Eigen::Vector4cd p1;
    for (int a = 0; a < 4; ++a) {
      p0[a] = std::polar(1.0, l0[a] * tau);
      p1[a] = std::polar(1.0, l1[a] * tau);
    }
    const Mat4 y = x * p0.asDiagonal() * x.adjoint();
    cd trace = 0.0;
    for (int a = 0; a < 4; ++a) {
      for (int c = 0; c < 4; ++c) trace += std::norm(y(a, c)) * p1[a] * std::conj(p1[c]);
    }
    out[n] = trace / 4.0;
  }
  return out;
}

EchoCurve cce2_echo(const BathRealization& bath, const FieldConfig& cfg,
                    std::span<const double> times, std::span<const PairCoupling> pairs) {
  // Single-site factors and the misalignment attenuation come from the product model.
  FieldConfig aligned = cfg;
  aligned.theta_b = 0.0;
  EchoCurve curve = echo_signal(bath, aligned, times);
  const double f_n0 = effective_fields(cfg).f_n0;

  std::vector<cd> total(curve.values.begin(), curve.values.end());
  for (const auto& pair : pairs) {
    if (pair.index_j >= bath.sites.size() || pair.index_k >= bath.sites.size() ||
        pair.index_j == pair.index_k) {
      throw ValidationError("cce2_echo: invalid pair indices");
    }
    const auto& sj = bath.sites[pair.index_j];
    const auto& sk = bath.sites[pair.index_k];
    const auto joint = pair_coherence(sj, sk, pair.b_jk, f_n0, times);
    for (std::size_t n = 0; n < times.size(); ++n) {
      const double singles = single_nucleus_echo(sj, f_n0, times[n]) *
                             single_nucleus_echo(sk, f_n0, times[n]);
      // The correction is ill-conditioned where a single-site factor vanishes;
      // the product already carries that zero.
      if (std::abs(singles) > 1e-10) total[n] *= joint[n] / singles;
    }
  }
  for (std::size_t n = 0; n < times.size(); ++n) {
    curve.values[n] = std::clamp(total[n].real(), -1.0, 1.0);
  }
  if (cfg.f_rot != 0.0 && std::sin(cfg.theta_b) * std::sin(cfg.theta_nv) != 0.0) {
    for (std::size_t n = 0; n < times.size(); ++n) {
      curve.values[n] *= misalignment_attenuation(cfg, PulseSequence{times[n], 0.5, {}});
    }
  }
  curve.metadata = "cce2 b0_z=" + std::to_string(cfg.b0_z) + "G f_rot=" +
                   std::to_string(cfg.f_rot) + "kHz pairs=" + std::to_string(pairs.size());
  return curve;
}

EchoCurve cce2_echo(const BathRealization& bath, const FieldConfig& cfg,
                    std::span<const double> times, const CceOptions& opts) {
  if (!(opts.pair_cutoff > 0.0)) throw ValidationError("cce2_echo: pair_cutoff must be > 0");
  const double cutoff2 = opts.pair_cutoff * opts.pair_cutoff;
  std::size_t count = 0;
  for (std::size_t j = 0; j < bath.sites.size(); ++j) {
    for (std::size_t k = j + 1; k < bath.sites.size(); ++k) {
      if ((bath.sites[k].position - bath.sites[j].position).squaredNorm() <= cutoff2) ++count;
    }
  }
  if (count > opts.cluster_budget) {
    throw ResourceError("cce2_echo: pair cluster count exceeds budget", count,
                        opts.cluster_budget);
  }
  const auto pairs = pairs_within(bath.sites, opts.pair_cutoff);
  return cce2_echo(bath, cfg, times, pairs);
}

}  // namespace nvrot
