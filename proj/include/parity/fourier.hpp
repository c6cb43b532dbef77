#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "parity/hypercube.hpp"

namespace parity {

// In-place unnormalized Walsh-Hadamard transform. Length must be a power of two.
// Works for any scalar with + and -, including int64 for exact spectra.
template <typename Derived>
void fwht(Eigen::DenseBase<Derived>& a) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index N = a.size();
  for (Eigen::Index h = 1; h < N; h <<= 1)
    for (Eigen::Index i = 0; i < N; i += h << 1)
      for (Eigen::Index j = i; j < i + h; ++j) {
        Scalar x = a(j), y = a(j + h);
        a(j) = x + y;
        a(j + h) = x - y;
      }
}

// Coefficients indexed by subset mask: coeffs[S.mask] = f^(S).
struct FourierSpectrum {
  int n = 0;
  Eigen::VectorXd coeffs;

  double operator[](const IndexSet& S) const { return coeffs[static_cast<Eigen::Index>(S.mask)]; }
  double operator[](std::uint64_t mask) const { return coeffs[static_cast<Eigen::Index>(mask)]; }
  double energy() const { return coeffs.squaredNorm(); }
};

// Truth table indexed by packed word (bit i set <=> x_i = -1).
FourierSpectrum full_spectrum(const Eigen::VectorXd& table, int n);
Eigen::VectorXd inverse_spectrum(const FourierSpectrum& spec);
// Integer pathway: returns 2^n * f^(S) exactly for an integer-valued table.
Eigen::Matrix<std::int64_t, Eigen::Dynamic, 1> full_spectrum_exact(
    const Eigen::Matrix<std::int64_t, Eigen::Dynamic, 1>& table, int n);

Eigen::VectorXd truth_table(const RealFn& f, int n);
Eigen::VectorXd majority_table(int n);
// 1{w.x + b > 0} for a sign vector w (packed like inputs).
Eigen::VectorXd ltf_table(const InputVector& w, double b);

// Common Maj_n coefficient on any size-k set.
double majority_coefficient(int n, int k);
double majority_gap_bound(int n, int k);
double ltf_spectrum_entry(const InputVector& w, double b, const IndexSet& S);

// min over (k-1)-subsets of S of |f^| minus max over (k+1)-supersets of |f^|.
double fourier_gap(const FourierSpectrum& spec, const IndexSet& S);
// max_{i in S} |g_i| - max_{i not in S} |g_i|
double relaxed_gap(const Eigen::VectorXd& g, const IndexSet& S);

}  // namespace parity
