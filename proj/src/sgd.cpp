#include "fedprompt/sgd.hpp"

namespace fedprompt {

void sgd_step(Matrix& param, const Matrix& grad, Scalar lr, Scalar weight_decay) {
  if (grad.size() == 0) throw ContractError("sgd_step: gradient not populated");
  if (grad.rows() != param.rows() || grad.cols() != param.cols()) {
    throw ShapeError("sgd_step: gradient shape differs from parameter");
  }
  param -= lr * (grad + weight_decay * param);
}

void sgd_step(Tape& tape, std::span<const Var> params, Scalar lr, Scalar weight_decay) {
  for (Var p : params) {
    if (!tape.requires_grad(p)) throw ContractError("sgd_step: parameter is frozen");
    if (tape.grad(p).size() == 0) throw ContractError("sgd_step: gradient not populated");
  }
  for (Var p : params) {
    Matrix updated = tape.value(p);
    sgd_step(updated, tape.grad(p), lr, weight_decay);
    tape.set_value(p.id, std::move(updated));
    tape.clear_grad(p.id);
  }
}

}  // namespace fedprompt
