#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace brainage {

// Mixes a parent seed with a stream index (splitmix64 finaliser). Used to
// derive per-subject, per-epoch and per-job seeds so that parallel and
// serial runs draw identical numbers.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b);

// Thin wrapper over mt19937_64. The distributions are implemented here
// rather than taken from <random> because the standard leaves their
// algorithms unspecified, and outputs must be bit-reproducible.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  double uniform();                       // [0, 1)
  double uniform(double lo, double hi);   // [lo, hi)
  std::size_t uniform_index(std::size_t n);  // [0, n)
  double normal();

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = uniform_index(i);
      std::swap(v[i - 1], v[j]);
    }
  }

  // k distinct indices from [0, n), in draw order.
  std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);
  std::vector<std::size_t> bootstrap(std::size_t n);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace brainage
