#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

// Points of {+-1}^n, parity tasks and sampling.
// Coordinates are 0-based throughout: bit i of a word is coordinate i.

namespace parity {

struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Hard cap for exhaustive enumeration. Default 24, PARITY_FORGE_MAX_N overrides.
int enumeration_cap();
void check_enumerable(int n);

inline std::uint64_t low_mask(int n) {
  return n >= 64 ? ~std::uint64_t{0} : ((std::uint64_t{1} << n) - 1);
}

struct InputVector {
  int n = 0;
  std::uint64_t bits = 0;  // bit i set <=> x_i = -1

  InputVector() = default;
  InputVector(int n_, std::uint64_t bits_);

  int operator[](int i) const { return ((bits >> i) & 1u) ? -1 : 1; }
  Eigen::VectorXd dense() const;
  static InputVector from_dense(const Eigen::VectorXd& x);
};

struct IndexSet {
  int n = 0;
  std::uint64_t mask = 0;

  IndexSet() = default;
  IndexSet(int n_, std::uint64_t mask_);
  static IndexSet of(int n, const std::vector<int>& members);
  static IndexSet prefix(int n, int k);  // {0, ..., k-1}

  int size() const;
  bool contains(int i) const { return (mask >> i) & 1u; }
  std::vector<int> members() const;
  IndexSet complement() const { return {n, ~mask & low_mask(n)}; }
  std::string str() const;  // "{0,3,5}"
  bool operator==(const IndexSet&) const = default;
};

// Every size-k subset of [0, n), in increasing mask order.
std::vector<IndexSet> subsets_of_size(int n, int k);

// chi_S(x) = prod_{i in S} x_i
int chi(const IndexSet& S, const InputVector& x);
inline int chi_bits(std::uint64_t mask, std::uint64_t bits) {
  return (__builtin_popcountll(mask & bits) & 1) ? -1 : 1;
}

struct ParityTask {
  int n = 0;
  IndexSet support;
  double flip_prob = 0.0;

  ParityTask() = default;
  ParityTask(IndexSet support_, double flip_prob_ = 0.0);
  int k() const { return support.size(); }
  int label(std::uint64_t bits) const { return chi_bits(support.mask, bits); }
};

std::uint64_t splitmix64(std::uint64_t z);
std::uint64_t hash64(std::uint64_t a, std::uint64_t b);

// Counter-based stream: the i-th output is a pure function of (base_seed, stream_id, i).
class RngStream {
 public:
  using result_type = std::uint64_t;

  RngStream() : RngStream(0, 0) {}
  RngStream(std::uint64_t base_seed, std::uint64_t stream_id);

  std::uint64_t base_seed() const { return base_; }
  std::uint64_t stream_id() const { return id_; }
  std::uint64_t counter() const { return ctr_; }

  result_type operator()() { return splitmix64(key_ ^ splitmix64(ctr_++)); }
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  double uniform();                         // [0, 1)
  double uniform(double lo, double hi);
  std::uint64_t below(std::uint64_t bound);  // uniform in [0, bound)
  int sign() { return ((*this)() >> 63) ? -1 : 1; }
  double normal();

  // Independent child stream keyed by `id`.
  RngStream split(std::uint64_t id) const;

 private:
  std::uint64_t base_, id_, key_, ctr_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

struct Batch {
  int n = 0;
  std::vector<std::uint64_t> inputs;
  std::vector<int> labels;

  std::size_t size() const { return inputs.size(); }
  InputVector input(std::size_t j) const { return {n, inputs[j]}; }
};

// Draws one point: uniform x, label chi_S(x) flipped w.p. flip_prob.
// Always consumes exactly two words so streams stay aligned across noise levels.
std::pair<std::uint64_t, int> sample_point(const ParityTask& task, RngStream& rng);
Batch sample_batch(const ParityTask& task, int B, RngStream& rng);

// n x B matrix of +-1 entries.
Eigen::MatrixXd to_matrix(int n, const std::uint64_t* words, std::size_t count);
inline Eigen::MatrixXd to_matrix(const Batch& b) {
  return to_matrix(b.n, b.inputs.data(), b.inputs.size());
}

using RealFn = std::function<double(const InputVector&)>;

// Visits all 2^n points in increasing word order.
void enumerate_inputs(int n, const std::function<void(const InputVector&)>& visit);
std::vector<InputVector> all_inputs(int n);

double exact_correlation(const RealFn& f, const RealFn& g, int n);
// Exact integer correlation sum_x chi_S(x) chi_T(x).
std::int64_t parity_inner_product(const IndexSet& S, const IndexSet& T);

// Noiseless error; predictor(x) == 0 counts as an error.
double exact_error(const RealFn& predictor, const ParityTask& task);

// Error on a validation batch drawn from the noiseless distribution with `rng`.
double mc_error(const RealFn& predictor, const ParityTask& task, int eval_size, RngStream rng);

}  // namespace parity
