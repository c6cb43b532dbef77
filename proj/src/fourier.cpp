#include "parity/fourier.hpp"

#include <cmath>

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <boost/multiprecision/cpp_int.hpp>

namespace parity {

namespace {

using boost::multiprecision::cpp_int;

cpp_int binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  cpp_int r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

}  // namespace

FourierSpectrum full_spectrum(const Eigen::VectorXd& table, int n) {
  check_enumerable(n);
  if (table.size() != (Eigen::Index{1} << n))
    throw DimensionError("full_spectrum: table length must be 2^n");
  FourierSpectrum s;
  s.n = n;
  s.coeffs = table;
  fwht(s.coeffs);
  s.coeffs *= std::ldexp(1.0, -n);
  double lhs = s.energy(), rhs = std::ldexp(table.squaredNorm(), -n);
  if (std::abs(lhs - rhs) > 1e-10 * std::max(1.0, rhs))
    throw std::logic_error("full_spectrum: Parseval check failed");
  return s;
}

Eigen::VectorXd inverse_spectrum(const FourierSpectrum& spec) {
  Eigen::VectorXd t = spec.coeffs;
  fwht(t);
  return t;
}

Eigen::Matrix<std::int64_t, Eigen::Dynamic, 1> full_spectrum_exact(
    const Eigen::Matrix<std::int64_t, Eigen::Dynamic, 1>& table, int n) {
  check_enumerable(n);
  if (table.size() != (Eigen::Index{1} << n))
    throw DimensionError("full_spectrum_exact: table length must be 2^n");
  Eigen::Matrix<std::int64_t, Eigen::Dynamic, 1> t = table;
  fwht(t);
  return t;
}

Eigen::VectorXd truth_table(const RealFn& f, int n) {
  check_enumerable(n);
  Eigen::VectorXd t(Eigen::Index{1} << n);
  enumerate_inputs(n, [&](const InputVector& x) { t[static_cast<Eigen::Index>(x.bits)] = f(x); });
  return t;
}

Eigen::VectorXd majority_table(int n) {
  if (n % 2 == 0) throw std::invalid_argument("majority_table: n must be odd");
  check_enumerable(n);
  Eigen::VectorXd t(Eigen::Index{1} << n);
  for (Eigen::Index b = 0; b < t.size(); ++b)
    t[b] = 2 * __builtin_popcountll(static_cast<std::uint64_t>(b)) < n ? 1.0 : -1.0;
  return t;
}

Eigen::VectorXd ltf_table(const InputVector& w, double b) {
  const int n = w.n;
  check_enumerable(n);
  Eigen::VectorXd t(Eigen::Index{1} << n);
  for (Eigen::Index x = 0; x < t.size(); ++x) {
    // w.x = n - 2 * #{i : w_i != x_i}
    int dot = n - 2 * __builtin_popcountll(static_cast<std::uint64_t>(x) ^ w.bits);
    t[x] = dot + b > 0 ? 1.0 : 0.0;
  }
  return t;
}

double majority_coefficient(int n, int k) {
  if (n < 1 || n % 2 == 0) throw std::invalid_argument("majority_coefficient: n must be odd");
  if (k < 1 || k > n) throw std::invalid_argument("majority_coefficient: k out of range");
  if (k % 2 == 0) return 0.0;
  using Real = boost::multiprecision::cpp_bin_float_50;
  const int h = (n - 1) / 2, j = (k - 1) / 2;
  Real num(binomial(h, j) * binomial(n - 1, h));
  Real den(binomial(n - 1, k - 1));
  Real v = num / den;
  v = ldexp(v, -(n - 1));
  double out = v.convert_to<double>();
  return (j % 2) ? -out : out;
}

double majority_gap_bound(int n, int k) {
  if (n % 2 == 0 || k % 2 != 0 || k < 2 || n < 4 * k)
    throw std::invalid_argument("majority_gap_bound: requires odd n, even k >= 2, n >= 4k");
  return 0.03 * std::pow(static_cast<double>(n - 1), -(k - 1) / 2.0);
}

double ltf_spectrum_entry(const InputVector& w, double b, const IndexSet& S) {
  if (w.n % 2 == 0) throw std::invalid_argument("ltf_spectrum_entry: n must be odd");
  if (!(std::abs(b) < 1.0)) throw std::invalid_argument("ltf_spectrum_entry: requires |b| < 1");
  if (S.n != w.n) throw DimensionError("ltf_spectrum_entry: dimension mismatch");
  if (S.size() == 0) throw std::invalid_argument("ltf_spectrum_entry: S must be nonempty");
  return 0.5 * majority_coefficient(w.n, S.size()) * chi(S, w);
}

double fourier_gap(const FourierSpectrum& spec, const IndexSet& S) {
  const int k = S.size(), n = spec.n;
  if (S.n != n) throw DimensionError("fourier_gap: dimension mismatch");
  if (k < 1 || k > n - 1) throw std::invalid_argument("fourier_gap: k out of range");
  double lo = std::numeric_limits<double>::infinity();
  for (int i : S.members()) lo = std::min(lo, std::abs(spec[S.mask & ~(std::uint64_t{1} << i)]));
  double hi = 0.0;
  for (int i : S.complement().members())
    hi = std::max(hi, std::abs(spec[S.mask | (std::uint64_t{1} << i)]));
  return lo - hi;
}

double relaxed_gap(const Eigen::VectorXd& g, const IndexSet& S) {
  if (g.size() != S.n) throw DimensionError("relaxed_gap: dimension mismatch");
  if (S.size() == 0 || S.size() == S.n)
    throw std::invalid_argument("relaxed_gap: S and its complement must be nonempty");
  double in = 0.0, out = 0.0;
  for (int i = 0; i < S.n; ++i) {
    if (S.contains(i))
      in = std::max(in, std::abs(g[i]));
    else
      out = std::max(out, std::abs(g[i]));
  }
  return in - out;
}

}  // namespace parity
