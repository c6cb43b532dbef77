#include "parity/hypercube.hpp"

#include <bit>
#include <cmath>
#include <cstdlib>
#include <numbers>
#include <sstream>

namespace parity {

int enumeration_cap() {
  if (const char* env = std::getenv("PARITY_FORGE_MAX_N")) {
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (end != env && v > 0 && v <= 40) return static_cast<int>(v);
  }
  return 24;
}

void check_enumerable(int n) {
  if (n < 1 || n > enumeration_cap())
    throw DimensionError("n = " + std::to_string(n) + " exceeds the enumeration cap " +
                         std::to_string(enumeration_cap()));
}

InputVector::InputVector(int n_, std::uint64_t bits_) : n(n_), bits(bits_) {
  if (n < 1 || n > 64) throw DimensionError("InputVector: n must be in [1, 64]");
  if (bits & ~low_mask(n)) throw DimensionError("InputVector: bits above n-1 are set");
}

Eigen::VectorXd InputVector::dense() const {
  Eigen::VectorXd x(n);
  for (int i = 0; i < n; ++i) x[i] = (*this)[i];
  return x;
}

InputVector InputVector::from_dense(const Eigen::VectorXd& x) {
  std::uint64_t bits = 0;
  for (int i = 0; i < x.size(); ++i) {
    if (x[i] == -1.0)
      bits |= std::uint64_t{1} << i;
    else if (x[i] != 1.0)
      throw std::invalid_argument("InputVector::from_dense: entries must be +-1");
  }
  return {static_cast<int>(x.size()), bits};
}

IndexSet::IndexSet(int n_, std::uint64_t mask_) : n(n_), mask(mask_) {
  if (n < 1 || n > 64) throw DimensionError("IndexSet: n must be in [1, 64]");
  if (mask & ~low_mask(n)) throw DimensionError("IndexSet: member outside [0, n)");
}

IndexSet IndexSet::of(int n, const std::vector<int>& members) {
  std::uint64_t m = 0;
  for (int i : members) {
    if (i < 0 || i >= n) throw DimensionError("IndexSet: member outside [0, n)");
    if ((m >> i) & 1u) throw std::invalid_argument("IndexSet: duplicate member");
    m |= std::uint64_t{1} << i;
  }
  return {n, m};
}

IndexSet IndexSet::prefix(int n, int k) {
  if (k < 0 || k > n) throw DimensionError("IndexSet::prefix: k out of range");
  return {n, low_mask(k)};
}

std::vector<IndexSet> subsets_of_size(int n, int k) {
  if (n < 0 || n > 63 || k < 0 || k > n) throw DimensionError("subsets_of_size: bad n or k");
  std::vector<IndexSet> out;
  if (k == 0) return {IndexSet(n, 0)};
  const std::uint64_t end = std::uint64_t{1} << n;
  for (std::uint64_t m = low_mask(k); m < end;) {
    out.emplace_back(n, m);
    const std::uint64_t c = m & (~m + 1), r = m + c;  // next mask with the same popcount
    m = (((r ^ m) >> 2) / c) | r;
  }
  return out;
}

int IndexSet::size() const { return std::popcount(mask); }

std::vector<int> IndexSet::members() const {
  std::vector<int> out;
  for (std::uint64_t m = mask; m; m &= m - 1) out.push_back(std::countr_zero(m));
  return out;
}

std::string IndexSet::str() const {
  std::ostringstream os;
  os << '{';
  bool first = true;
  for (int i : members()) {
    if (!first) os << ',';
    os << i;
    first = false;
  }
  os << '}';
  return os.str();
}

int chi(const IndexSet& S, const InputVector& x) {
  if (S.n != x.n) throw DimensionError("chi: dimension mismatch");
  return chi_bits(S.mask, x.bits);
}

ParityTask::ParityTask(IndexSet support_, double flip_prob_)
    : n(support_.n), support(support_), flip_prob(flip_prob_) {
  if (support.size() < 1) throw std::invalid_argument("ParityTask: empty support");
  if (!(flip_prob >= 0.0 && flip_prob <= 0.5))
    throw std::invalid_argument("ParityTask: flip_prob must lie in [0, 0.5]");
}

std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t hash64(std::uint64_t a, std::uint64_t b) {
  return splitmix64(splitmix64(a) ^ (b * 0xd1342543de82ef95ULL + 0x2545f4914f6cdd1dULL));
}

RngStream::RngStream(std::uint64_t base_seed, std::uint64_t stream_id)
    : base_(base_seed), id_(stream_id), key_(hash64(base_seed, stream_id)) {}

double RngStream::uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

double RngStream::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

std::uint64_t RngStream::below(std::uint64_t bound) {
  if (bound == 0) throw std::invalid_argument("RngStream::below: zero bound");
  // Lemire's multiply-shift with rejection.
  for (;;) {
    unsigned __int128 m = static_cast<unsigned __int128>((*this)()) * bound;
    auto lo = static_cast<std::uint64_t>(m);
    if (lo >= bound || lo >= (-bound) % bound) return static_cast<std::uint64_t>(m >> 64);
  }
}

double RngStream::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = 0.0;
  while (u1 == 0.0) u1 = uniform();
  double u2 = uniform();
  double r = std::sqrt(-2.0 * std::log(u1));
  spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
  has_spare_ = true;
  return r * std::cos(2.0 * std::numbers::pi * u2);
}

RngStream RngStream::split(std::uint64_t id) const { return {hash64(base_, id_), id}; }

std::pair<std::uint64_t, int> sample_point(const ParityTask& task, RngStream& rng) {
  std::uint64_t bits = rng() & low_mask(task.n);
  int y = task.label(bits);
  double u = rng.uniform();
  if (u < task.flip_prob) y = -y;
  return {bits, y};
}

Batch sample_batch(const ParityTask& task, int B, RngStream& rng) {
  if (B < 1) throw std::invalid_argument("sample_batch: B must be >= 1");
  Batch out;
  out.n = task.n;
  out.inputs.resize(B);
  out.labels.resize(B);
  for (int j = 0; j < B; ++j) {
    auto [bits, y] = sample_point(task, rng);
    out.inputs[j] = bits;
    out.labels[j] = y;
  }
  return out;
}

Eigen::MatrixXd to_matrix(int n, const std::uint64_t* words, std::size_t count) {
  Eigen::MatrixXd X(n, static_cast<Eigen::Index>(count));
  for (std::size_t j = 0; j < count; ++j) {
    std::uint64_t w = words[j];
    double* col = X.col(static_cast<Eigen::Index>(j)).data();
    for (int i = 0; i < n; ++i) col[i] = 1.0 - 2.0 * static_cast<double>((w >> i) & 1u);
  }
  return X;
}

void enumerate_inputs(int n, const std::function<void(const InputVector&)>& visit) {
  check_enumerable(n);
  const std::uint64_t N = std::uint64_t{1} << n;
  for (std::uint64_t b = 0; b < N; ++b) visit(InputVector(n, b));
}

std::vector<InputVector> all_inputs(int n) {
  std::vector<InputVector> out;
  out.reserve(std::size_t{1} << n);
  enumerate_inputs(n, [&](const InputVector& x) { out.push_back(x); });
  return out;
}

double exact_correlation(const RealFn& f, const RealFn& g, int n) {
  check_enumerable(n);
  double acc = 0.0;
  enumerate_inputs(n, [&](const InputVector& x) { acc += f(x) * g(x); });
  return std::ldexp(acc, -n);
}

std::int64_t parity_inner_product(const IndexSet& S, const IndexSet& T) {
  if (S.n != T.n) throw DimensionError("parity_inner_product: dimension mismatch");
  check_enumerable(S.n);
  std::int64_t acc = 0;
  const std::uint64_t N = std::uint64_t{1} << S.n;
  for (std::uint64_t b = 0; b < N; ++b) acc += chi_bits(S.mask, b) * chi_bits(T.mask, b);
  return acc;
}

double exact_error(const RealFn& predictor, const ParityTask& task) {
  check_enumerable(task.n);
  std::uint64_t wrong = 0;
  enumerate_inputs(task.n, [&](const InputVector& x) {
    double v = predictor(x);
    int y = task.label(x.bits);
    if (!(v * y > 0.0)) ++wrong;
  });
  return std::ldexp(static_cast<double>(wrong), -task.n);
}

double mc_error(const RealFn& predictor, const ParityTask& task, int eval_size, RngStream rng) {
  if (eval_size < 1) throw std::invalid_argument("mc_error: eval_size must be >= 1");
  ParityTask clean(task.support, 0.0);
  Batch b = sample_batch(clean, eval_size, rng);
  int wrong = 0;
  for (std::size_t j = 0; j < b.size(); ++j)
    if (!(predictor(b.input(j)) * b.labels[j] > 0.0)) ++wrong;
  return static_cast<double>(wrong) / eval_size;
}

}  // namespace parity
