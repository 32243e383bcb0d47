#include "nvrot/oracle.hpp"

#include <cmath>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "nvrot/errors.hpp"

namespace nvrot::oracle {
namespace {

using cd = std::complex<double>;
using Mat = Eigen::MatrixXcd;

void check_size(const ExactSystem& sys) {
  if (sys.sites.size() > kMaxNuclei) {
    throw ResourceError("exact_echo: too many nuclei for exact evolution", sys.sites.size(),
                        kMaxNuclei);
  }
  for (const auto& p : sys.pair_couplings) {
    if (p.index_j >= sys.sites.size() || p.index_k >= sys.sites.size() ||
        p.index_j == p.index_k) {
      throw ValidationError("exact_echo: invalid pair coupling indices");
    }
  }
}

// Single-spin operator `op` acting on spin `which` of `n` spins (spin 0 is the
// most significant bit of the basis index).
Mat embed(const Eigen::Matrix2cd& op, std::size_t which, std::size_t n) {
  Mat out = Mat::Identity(1, 1);
  for (std::size_t s = 0; s < n; ++s) {
    const Eigen::Matrix2cd factor = s == which ? op : Eigen::Matrix2cd::Identity();
    Mat next(out.rows() * 2, out.cols() * 2);
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
      for (Eigen::Index j = 0; j < out.cols(); ++j) {
        next.block<2, 2>(2 * i, 2 * j) = out(i, j) * factor;
      }
    }
    out = std::move(next);
  }
  return out;
}

struct SpinOps {
  std::vector<std::array<Mat, 3>> spins;
};

SpinOps spin_operators(std::size_t n) {
  Eigen::Matrix2cd sx, sy, sz;
  sx << 0.0, 0.5, 0.5, 0.0;
  sy << 0.0, cd(0.0, -0.5), cd(0.0, 0.5), 0.0;
  sz << 0.5, 0.0, 0.0, -0.5;
  SpinOps ops;
  for (std::size_t s = 0; s < n; ++s) {
    ops.spins.push_back({embed(sx, s, n), embed(sy, s, n), embed(sz, s, n)});
  }
  return ops;
}

// Nuclear Hamiltonian conditional on the NV projection m_s, rad/ms.
Mat nuclear_hamiltonian(const ExactSystem& sys, const SpinOps& ops, double m_s) {
  const std::size_t n = sys.sites.size();
  const Eigen::Index dim = Eigen::Index{1} << n;
  const double w0 = units::angular(sys.f_n0);
  Mat h = Mat::Zero(dim, dim);
  for (std::size_t s = 0; s < n; ++s) {
    const Vec3 a = sys.sites[s].hyperfine();
    h += (w0 + m_s * a.z()) * ops.spins[s][2];
    h += m_s * a.x() * ops.spins[s][0] + m_s * a.y() * ops.spins[s][1];
  }
  for (const auto& p : sys.pair_couplings) {
    const auto& sj = ops.spins[p.index_j];
    const auto& sk = ops.spins[p.index_k];
    h += p.b_jk * (sj[0] * sk[0] + sj[1] * sk[1]);
  }
  return h;
}

// Propagator exp(-i H tau) from an eigendecomposition.
Mat propagate(const Eigen::SelfAdjointEigenSolver<Mat>& eig, double tau) {
  const Eigen::VectorXcd phases =
      (eig.eigenvalues().cast<cd>() * cd(0.0, -tau)).array().exp().matrix();
  return eig.eigenvectors() * phases.asDiagonal() * eig.eigenvectors().adjoint();
}

}  // namespace

ExactResult exact_echo_detailed(const ExactSystem& sys, std::span<const double> times) {
  check_size(sys);
  const std::size_t n = sys.sites.size();
  const Eigen::Index nuc_dim = Eigen::Index{1} << n;
  const Eigen::Index dim = 2 * nuc_dim;
  const SpinOps ops = spin_operators(n);

  // Full Hamiltonian, NV block 0 = m_S 0 and block 1 = m_S -1.
  Mat h = Mat::Zero(dim, dim);
  h.topLeftCorner(nuc_dim, nuc_dim) = nuclear_hamiltonian(sys, ops, 0.0);
  h.bottomRightCorner(nuc_dim, nuc_dim) = nuclear_hamiltonian(sys, ops, kSensingBranch);
  const Eigen::SelfAdjointEigenSolver<Mat> eig(h);

  // Columns: NV superposition times each nuclear basis state, left at unit
  // amplitudes (norm sqrt 2) so an empty bath gives exactly 1.
  Mat psi0 = Mat::Zero(dim, nuc_dim);
  for (Eigen::Index b = 0; b < nuc_dim; ++b) {
    psi0(b, b) = 1.0;
    psi0(nuc_dim + b, b) = 1.0;
  }

  ExactResult result;
  result.curve.times.assign(times.begin(), times.end());
  for (double t : times) {
    if (!(t >= 0.0)) throw ValidationError("exact_echo: times must be >= 0");
    const Mat u = propagate(eig, units::us_to_ms(t) / 2.0);
    Mat psi = u * psi0;
    // Perfect pi pulse exchanges the two NV levels.
    Mat swapped(dim, nuc_dim);
    swapped.topRows(nuc_dim) = psi.bottomRows(nuc_dim);
    swapped.bottomRows(nuc_dim) = psi.topRows(nuc_dim);
    psi = u * swapped;

    cd coherence = 0.0;
    for (Eigen::Index b = 0; b < nuc_dim; ++b) {
      const double norm = psi.col(b).norm() / std::sqrt(2.0);
      result.max_norm_deviation = std::max(result.max_norm_deviation, std::abs(norm - 1.0));
      // Branch that started in m_S = 0 ends in block 1.
      coherence += psi.col(b).head(nuc_dim).dot(psi.col(b).tail(nuc_dim));
    }
    coherence /= static_cast<double>(nuc_dim);
    result.coherence.push_back(coherence);
    result.curve.values.push_back(coherence.real());
  }
  result.curve.metadata = "exact n=" + std::to_string(n);
  return result;
}

EchoCurve exact_echo(const ExactSystem& sys, std::span<const double> times) {
  return exact_echo_detailed(sys, times).curve;
}

std::vector<cd> exact_coherence_trace(const ExactSystem& sys, std::span<const double> times) {
  check_size(sys);
  const SpinOps ops = spin_operators(sys.sites.size());
  const Eigen::SelfAdjointEigenSolver<Mat> h0(nuclear_hamiltonian(sys, ops, 0.0));
  const Eigen::SelfAdjointEigenSolver<Mat> h1(nuclear_hamiltonian(sys, ops, kSensingBranch));
  std::vector<cd> out;
  for (double t : times) {
    const double tau = units::us_to_ms(t) / 2.0;
    const Mat u0 = propagate(h0, tau);
    const Mat u1 = propagate(h1, tau);
    const Mat w = (u0 * u1).adjoint() * (u1 * u0);
    out.push_back(w.trace() / static_cast<double>(w.rows()));
  }
  return out;
}

std::vector<cd> exact_coherence_basis_state(const ExactSystem& sys, std::size_t basis_state,
                                            std::span<const double> times) {
  check_size(sys);
  const SpinOps ops = spin_operators(sys.sites.size());
  const Eigen::SelfAdjointEigenSolver<Mat> h0(nuclear_hamiltonian(sys, ops, 0.0));
  const Eigen::SelfAdjointEigenSolver<Mat> h1(nuclear_hamiltonian(sys, ops, kSensingBranch));
  const auto dim = h0.eigenvalues().size();
  if (static_cast<Eigen::Index>(basis_state) >= dim) {
    throw ValidationError("exact_coherence_basis_state: basis state out of range");
  }
  Eigen::VectorXcd e = Eigen::VectorXcd::Zero(dim);
  e[static_cast<Eigen::Index>(basis_state)] = 1.0;
  std::vector<cd> out;
  for (double t : times) {
    const double tau = units::us_to_ms(t) / 2.0;
    const Mat u0 = propagate(h0, tau);
    const Mat u1 = propagate(h1, tau);
    out.push_back(((u0 * u1) * e).dot((u1 * u0) * e));
  }
  return out;
}

}  // namespace nvrot::oracle
