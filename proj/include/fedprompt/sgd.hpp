#pragma once

#include "fedprompt/tape.hpp"

#include <span>

namespace fedprompt {

// p <- p - lr * (grad + weight_decay * p). Throws if the gradient is missing
// or shaped differently from the parameter.
void sgd_step(Matrix& param, const Matrix& grad, Scalar lr, Scalar weight_decay);

// In-place update of leaf nodes on a tape; gradients are cleared afterwards.
void sgd_step(Tape& tape, std::span<const Var> params, Scalar lr, Scalar weight_decay);

}  // namespace fedprompt
