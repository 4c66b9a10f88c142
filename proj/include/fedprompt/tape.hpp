#pragma once

#include "fedprompt/types.hpp"

#include <functional>
#include <span>
#include <vector>

namespace fedprompt {

class Tape;

// Hard masking uses a finite large-negative additive bias instead of -inf so
// that exp/sum arithmetic stays finite; positions at or below the threshold
// must come out of masked_softmax with probability exactly zero.
inline constexpr Scalar kHardMask = -1e9;
inline constexpr Scalar kHardMaskThreshold = -1e8;
inline bool is_hard_bias(Scalar b) { return b <= kHardMaskThreshold; }

// Handle to a node recorded on a Tape.
struct Var {
  Tape* tape = nullptr;
  int id = -1;
  bool valid() const { return tape != nullptr && id >= 0; }
};

// Define-by-run reverse-mode tape over dense matrices. A tape is rebuilt for
// every forward pass and owns all intermediate values and gradient buffers;
// it must never be shared between training contexts.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, int)>;

  Var leaf(Matrix value, bool requires_grad = true);
  Var constant(Matrix value) { return leaf(std::move(value), false); }
  Var scalar(Scalar v);

  const Matrix& value(Var v) const;
  const Matrix& grad(Var v) const;
  bool requires_grad(Var v) const;
  std::size_t size() const { return nodes_.size(); }

  // Reverse-mode accumulation from a scalar loss. Every requires-grad node
  // gets a gradient buffer; leaves unreachable from the loss end up with
  // zero gradient.
  void backward(Var loss);

  // Surface for op implementations and the optimizer.
  Var emit(Matrix value, std::vector<int> parents, BackwardFn fn);
  const Matrix& value_at(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  const Matrix& grad_at(int id) const { return nodes_[static_cast<std::size_t>(id)].grad; }
  bool requires_grad_at(int id) const { return nodes_[static_cast<std::size_t>(id)].requires_grad; }
  void accumulate_grad(int id, const Matrix& g);
  void set_value(int id, Matrix v);
  void clear_grad(int id);

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
  const Node& node(Var v) const;
};

// --- primitive operations -------------------------------------------------

Var matmul(Var a, Var b);
// a * b^T without materializing the transpose node.
Var matmul_nt(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var neg(Var a);
Var scale(Var a, Scalar c);
// Adds a 1xN row vector to every row of a MxN matrix.
Var add_rowvec(Var a, Var v);
Var hcat(std::span<const Var> parts);
Var vcat(std::span<const Var> parts);
Var row(Var a, Index i);
Var entry(Var a, Index i, Index j);
Var sum(Var a);
Var mean_all(Var a);
Var gelu(Var a);
Var log_sigmoid(Var a);
// Row logsumexp of a 1xN input, stable under large entries.
Var logsumexp_row(Var a);
// Row-wise softmax of (logits + bias); entries whose bias is at or below the
// hard-mask sentinel get probability exactly zero. A fully hard row throws.
Var masked_softmax(Var logits, const Matrix& bias);
Var layer_norm(Var x, Var gain, Var bias, Scalar eps);
Var cosine_sim(Var a, Var b);

inline Var operator*(Var a, Var b) { return matmul(a, b); }
inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Scalar c, Var a) { return scale(a, c); }

}  // namespace fedprompt
