#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include <Eigen/Dense>

namespace flowbind {

// Identifies an independent random stream. Child keys are derived by hashing,
// so any (seed, path) pair maps to the same stream on every run.
struct StreamKey {
  std::uint64_t value = 0;

  StreamKey child(std::uint64_t tag) const;
  StreamKey child(std::string_view tag) const;
  template <typename... Tags>
  StreamKey derive(Tags... tags) const {
    StreamKey k = *this;
    ((k = k.child(tags)), ...);
    return k;
  }
  bool operator==(const StreamKey&) const = default;
};

std::uint64_t splitmix64(std::uint64_t x);

class Random {
 public:
  explicit Random(StreamKey key);
  explicit Random(std::uint64_t seed) : Random(StreamKey{seed}) {}

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }
  std::uint64_t next_u64() { return engine_(); }
  // Uniform integer in [0, n).
  std::size_t index(std::size_t n);
  double gamma(double shape);
  double beta(double a, double b);

  template <typename Derived>
  void fill_normal(Eigen::MatrixBase<Derived>& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = normal();
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace flowbind
