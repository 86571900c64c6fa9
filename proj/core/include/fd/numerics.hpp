#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fd {

/// Dense real vector with a fixed length. No resizing after construction.
class Vec {
 public:
  Vec() = default;
  explicit Vec(std::size_t n, double fill = 0.0) : xs_(n, fill) {}
  Vec(std::initializer_list<double> xs) : xs_(xs) {}
  static Vec from(std::vector<double> xs) {
    Vec v;
    v.xs_ = std::move(xs);
    return v;
  }

  std::size_t size() const { return xs_.size(); }
  double operator[](std::size_t i) const { return xs_[i]; }
  double& operator[](std::size_t i) { return xs_[i]; }
  const double* data() const { return xs_.data(); }
  double* data() { return xs_.data(); }
  auto begin() const { return xs_.begin(); }
  auto end() const { return xs_.end(); }
  auto begin() { return xs_.begin(); }
  auto end() { return xs_.end(); }
  operator std::span<const double>() const { return xs_; }
  operator std::span<double>() { return xs_; }
  bool operator==(const Vec&) const = default;

 private:
  std::vector<double> xs_;
};

/// Dense row-major matrix with fixed dimensions.
class Mat {
 public:
  Mat() = default;
  Mat(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), xs_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double operator()(std::size_t r, std::size_t c) const { return xs_[r * cols_ + c]; }
  double& operator()(std::size_t r, std::size_t c) { return xs_[r * cols_ + c]; }
  std::span<const double> row(std::size_t r) const { return {xs_.data() + r * cols_, cols_}; }
  std::span<double> row(std::size_t r) { return {xs_.data() + r * cols_, cols_}; }
  void set_row(std::size_t r, std::span<const double> v);
  const double* data() const { return xs_.data(); }
  double* data() { return xs_.data(); }
  bool operator==(const Mat&) const = default;

 private:
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<double> xs_;
};

double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> a);
/// Index of the first maximum entry.
std::size_t argmax(std::span<const double> xs);

/// Numerically stable tempered softmax: exp((z - max z) / t) normalized.
Vec softmax(std::span<const double> z, double temperature);

/// Shannon entropy in nats of a probability vector (0 ln 0 := 0).
double entropy(std::span<const double> p);

/// Standard normal tail Q(x) = P(Z > x).
double q_tail(double x);

/// Nonnegative integer counts proportional to `weights` summing exactly to
/// `total`; fractional parts resolved largest-remainder-first, ties to the
/// lower index.
std::vector<std::size_t> largest_remainder_apportion(std::span<const double> weights,
                                                     std::size_t total);

/// Shortest decimal string that parses back to exactly the same double.
std::string format_double(double v);

/// Deterministic labeled random stream. Equal (seed, label) pairs produce
/// identical sequences on every platform; children obtained via split() do
/// not perturb the parent or each other, so adding a consumer never changes
/// what another consumer draws.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::string_view label);

  /// Child stream independent of this one. Does not advance this stream.
  RngStream split(std::string_view label) const;

  std::uint64_t next_u64();
  /// Uniform integer in [0, bound); bound must be positive.
  std::uint64_t uniform_below(std::uint64_t bound);
  /// Uniform double in [0, 1).
  double uniform();
  double uniform(double lo, double hi);
  /// Standard normal draw (Marsaglia polar, spare cached per stream).
  double normal();
  /// Gamma(shape, 1) draw; shape must be positive.
  double gamma(double shape);
  /// Symmetric Dirichlet(alpha, ..., alpha) over k categories.
  std::vector<double> dirichlet(double alpha, std::size_t k);

  template <typename T>
  void shuffle(std::vector<T>& xs) {
    for (std::size_t i = xs.size(); i > 1; --i) {
      std::swap(xs[i - 1], xs[uniform_below(i)]);
    }
  }

  /// k distinct values from [0, n), uniform without replacement, ascending.
  std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

 private:
  explicit RngStream(std::uint64_t derived);

  std::uint64_t base_;
  std::array<std::uint64_t, 4> state_;  // xoshiro256**
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace fd
