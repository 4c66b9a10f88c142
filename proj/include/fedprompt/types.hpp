#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <stdexcept>

namespace fedprompt {

// 64-bit floats throughout: the gradient checks run at 1e-4 relative
// tolerance, which single precision cannot sustain.
using Scalar = double;
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
using Index = Eigen::Index;

// An operation was called outside its stated contract.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Incompatible tensor shapes.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

std::uint64_t fnv1a(const void* data, std::size_t bytes,
                    std::uint64_t h = 1469598103934665603ull);
std::uint64_t fnv1a(std::uint64_t value, std::uint64_t h);
std::uint64_t matrix_checksum(const Matrix& m,
                              std::uint64_t h = 1469598103934665603ull);

}  // namespace fedprompt
