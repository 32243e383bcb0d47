#pragma once

// Exact reference for small baths: state-vector evolution of the NV qubit
// together with every nuclear spin through the echo sequence. Used only to
// validate the product formula and the pair expansion.

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "nvrot/bath.hpp"
#include "nvrot/dynamics.hpp"

namespace nvrot::oracle {

inline constexpr std::size_t kMaxNuclei = 8;

struct ExactSystem {
  std::vector<NuclearSite> sites;
  std::vector<PairCoupling> pair_couplings;
  double f_n0 = 0.0;  // kHz
};

struct ExactResult {
  EchoCurve curve;
  std::vector<std::complex<double>> coherence;
  double max_norm_deviation = 0.0;  // max | |psi| - 1 | over all evolutions
};

/// Averages over all 2^N computational basis states of the nuclei (the
/// infinite-temperature state) with the NV prepared in (|0> + |-1>)/sqrt(2).
/// S(t) is the real part of the normalized NV coherence.
ExactResult exact_echo_detailed(const ExactSystem& sys, std::span<const double> times);
EchoCurve exact_echo(const ExactSystem& sys, std::span<const double> times);

/// The same observable from Tr[U1^dag U0] / 2^N on the nuclear space alone.
std::vector<std::complex<double>> exact_coherence_trace(const ExactSystem& sys,
                                                        std::span<const double> times);

/// Coherence for a single initial nuclear basis state.
std::vector<std::complex<double>> exact_coherence_basis_state(const ExactSystem& sys,
                                                              std::size_t basis_state,
                                                              std::span<const double> times);

}  // namespace nvrot::oracle
