#pragma once

#include "fedprompt/types.hpp"

#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace fedprompt {

// A named deterministic random stream. Identical (seed, label) pairs yield
// identical draw sequences on every platform: the engine is the fully
// specified std::mt19937_64 and all distributions are implemented here
// rather than taken from <random>, whose distributions are not portable.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::string_view label);

  std::uint64_t next_u64();

  // Uniform in [0, 1).
  Scalar uniform();
  // Uniform in [0, n), unbiased. Requires n > 0.
  int uniform_int(int n);
  // Standard normal via Box-Muller.
  Scalar normal();
  // Gamma(alpha, 1) via Marsaglia-Tsang. Requires alpha > 0.
  Scalar gamma(Scalar alpha);
  // Proportions ~ Dirichlet(beta * 1_k).
  std::vector<Scalar> dirichlet(Scalar beta, int k);

  Matrix gaussian_matrix(Index rows, Index cols, Scalar stddev = 1.0);
  Vector gaussian_vector(Index n, Scalar stddev = 1.0);

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_int(static_cast<int>(i)));
      std::swap(v[i - 1], v[j]);
    }
  }

  std::uint64_t seed() const { return seed_; }
  const std::string& label() const { return label_; }

 private:
  std::uint64_t seed_ = 0;
  std::string label_;
  std::mt19937_64 engine_;
  bool has_cached_normal_ = false;
  Scalar cached_normal_ = 0.0;
};

}  // namespace fedprompt
