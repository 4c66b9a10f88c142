#include "fedprompt/rng.hpp"

#include <cmath>
#include <numbers>

namespace fedprompt {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::string_view label)
    : seed_(seed), label_(label) {
  std::uint64_t mixed = fnv1a(label.data(), label.size(), splitmix64(seed));
  engine_.seed(splitmix64(mixed));
}

std::uint64_t RngStream::next_u64() { return engine_(); }

Scalar RngStream::uniform() {
  return static_cast<Scalar>(next_u64() >> 11) * 0x1.0p-53;
}

int RngStream::uniform_int(int n) {
  if (n <= 0) throw ContractError("uniform_int: n must be positive");
  const std::uint64_t un = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % un;
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return static_cast<int>(x % un);
}

Scalar RngStream::normal() {
  if (has_cached_normal_) {
    has_cached_normal_ = false;
    return cached_normal_;
  }
  Scalar u1 = uniform();
  if (u1 <= 0.0) u1 = 0x1.0p-53;
  const Scalar u2 = uniform();
  const Scalar r = std::sqrt(-2.0 * std::log(u1));
  const Scalar theta = 2.0 * std::numbers::pi_v<Scalar> * u2;
  cached_normal_ = r * std::sin(theta);
  has_cached_normal_ = true;
  return r * std::cos(theta);
}

Scalar RngStream::gamma(Scalar alpha) {
  if (alpha <= 0.0) throw ContractError("gamma: alpha must be positive");
  if (alpha < 1.0) {
    Scalar u = uniform();
    if (u <= 0.0) u = 0x1.0p-53;
    return gamma(alpha + 1.0) * std::pow(u, 1.0 / alpha);
  }
  const Scalar d = alpha - 1.0 / 3.0;
  const Scalar c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    Scalar x;
    Scalar v;
    do {
      x = normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    Scalar u = uniform();
    if (u <= 0.0) u = 0x1.0p-53;
    if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) {
      return d * v;
    }
  }
}

std::vector<Scalar> RngStream::dirichlet(Scalar beta, int k) {
  if (beta <= 0.0) throw ContractError("dirichlet: beta must be positive");
  if (k <= 0) throw ContractError("dirichlet: k must be positive");
  std::vector<Scalar> w(static_cast<std::size_t>(k));
  Scalar total = 0.0;
  for (auto& wi : w) {
    wi = gamma(beta);
    total += wi;
  }
  if (total <= 0.0) {
    // All draws underflowed (tiny beta); fall back to a single winner.
    w.assign(w.size(), 0.0);
    w[static_cast<std::size_t>(uniform_int(k))] = 1.0;
    return w;
  }
  for (auto& wi : w) wi /= total;
  return w;
}

Matrix RngStream::gaussian_matrix(Index rows, Index cols, Scalar stddev) {
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = stddev * normal();
  return m;
}

Vector RngStream::gaussian_vector(Index n, Scalar stddev) {
  Vector v(n);
  for (Index i = 0; i < n; ++i) v(i) = stddev * normal();
  return v;
}

}  // namespace fedprompt
