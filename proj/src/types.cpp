#include "fedprompt/types.hpp"

namespace fedprompt {

std::uint64_t fnv1a(const void* data, std::size_t bytes, std::uint64_t h) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < bytes; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

std::uint64_t fnv1a(std::uint64_t value, std::uint64_t h) {
  return fnv1a(&value, sizeof(value), h);
}

std::uint64_t matrix_checksum(const Matrix& m, std::uint64_t h) {
  h = fnv1a(static_cast<std::uint64_t>(m.rows()), h);
  h = fnv1a(static_cast<std::uint64_t>(m.cols()), h);
  return fnv1a(m.data(), sizeof(Scalar) * static_cast<std::size_t>(m.size()), h);
}

}  // namespace fedprompt
