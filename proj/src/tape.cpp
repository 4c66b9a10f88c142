#include "fedprompt/tape.hpp"

#include <cmath>
#include <numbers>
#include <utility>

namespace fedprompt {

namespace {

Tape& same_tape(Var a, Var b, const char* op) {
  if (!a.valid() || !b.valid()) throw ContractError(std::string(op) + ": invalid var");
  if (a.tape != b.tape) throw ContractError(std::string(op) + ": vars from different tapes");
  return *a.tape;
}

Tape& own_tape(Var a, const char* op) {
  if (!a.valid()) throw ContractError(std::string(op) + ": invalid var");
  return *a.tape;
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                     std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                     std::to_string(b.cols()));
  }
}

Scalar sigmoid(Scalar x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const Scalar e = std::exp(x);
  return e / (1.0 + e);
}

Scalar log_sigmoid_scalar(Scalar x) {
  // -softplus(-x), stable on both tails.
  if (x >= 0.0) return -std::log1p(std::exp(-x));
  return x - std::log1p(std::exp(x));
}

constexpr Scalar kInvSqrt2 = std::numbers::sqrt2 / 2.0;

Scalar gelu_scalar(Scalar x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); }

Scalar gelu_grad_scalar(Scalar x) {
  const Scalar cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
  const Scalar pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

}  // namespace

Var Tape::leaf(Matrix value, bool requires_grad) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::scalar(Scalar v) {
  Matrix m(1, 1);
  m(0, 0) = v;
  return constant(std::move(m));
}

const Tape::Node& Tape::node(Var v) const {
  if (v.tape != this || v.id < 0 || static_cast<std::size_t>(v.id) >= nodes_.size()) {
    throw ContractError("tape: var does not belong to this tape");
  }
  return nodes_[static_cast<std::size_t>(v.id)];
}

const Matrix& Tape::value(Var v) const { return node(v).value; }

const Matrix& Tape::grad(Var v) const { return node(v).grad; }

bool Tape::requires_grad(Var v) const { return node(v).requires_grad; }

Var Tape::emit(Matrix value, std::vector<int> parents, BackwardFn fn) {
  bool needs = false;
  for (int p : parents) {
    if (nodes_[static_cast<std::size_t>(p)].requires_grad) {
      needs = true;
      break;
    }
  }
  Node n;
  n.value = std::move(value);
  n.requires_grad = needs;
  if (needs) n.backward = std::move(fn);
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

void Tape::accumulate_grad(int id, const Matrix& g) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (!n.requires_grad) return;
  if (n.grad.size() == 0) {
    n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  }
  n.grad += g;
}

void Tape::set_value(int id, Matrix v) {
  nodes_[static_cast<std::size_t>(id)].value = std::move(v);
}

void Tape::clear_grad(int id) { nodes_[static_cast<std::size_t>(id)].grad.resize(0, 0); }

void Tape::backward(Var loss) {
  const Node& ln = node(loss);
  if (ln.value.rows() != 1 || ln.value.cols() != 1) {
    throw ContractError("backward: loss must be a scalar node");
  }
  for (Node& n : nodes_) {
    if (n.requires_grad) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  }
  if (!ln.requires_grad) return;  // loss does not depend on any learnable leaf
  nodes_[static_cast<std::size_t>(loss.id)].grad(0, 0) = 1.0;
  for (int id = loss.id; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.requires_grad && n.backward) n.backward(*this, id);
  }
}

// --- operations -------------------------------------------------------------

Var matmul(Var a, Var b) {
  Tape& t = same_tape(a, b, "matmul");
  const Matrix& A = t.value(a);
  const Matrix& B = t.value(b);
  if (A.cols() != B.rows()) {
    throw ShapeError("matmul: inner dimensions disagree (" + std::to_string(A.cols()) + " vs " +
                     std::to_string(B.rows()) + ")");
  }
  const int ia = a.id, ib = b.id;
  return t.emit(A * B, {ia, ib}, [ia, ib](Tape& t, int self) {
    const Matrix& G = t.grad_at(self);
    t.accumulate_grad(ia, G * t.value_at(ib).transpose());
    t.accumulate_grad(ib, t.value_at(ia).transpose() * G);
  });
}

Var matmul_nt(Var a, Var b) {
  Tape& t = same_tape(a, b, "matmul_nt");
  const Matrix& A = t.value(a);
  const Matrix& B = t.value(b);
  if (A.cols() != B.cols()) {
    throw ShapeError("matmul_nt: inner dimensions disagree");
  }
  const int ia = a.id, ib = b.id;
  return t.emit(A * B.transpose(), {ia, ib}, [ia, ib](Tape& t, int self) {
    const Matrix& G = t.grad_at(self);
    t.accumulate_grad(ia, G * t.value_at(ib));
    t.accumulate_grad(ib, G.transpose() * t.value_at(ia));
  });
}

Var add(Var a, Var b) {
  Tape& t = same_tape(a, b, "add");
  require_same_shape(t.value(a), t.value(b), "add");
  const int ia = a.id, ib = b.id;
  return t.emit(t.value(a) + t.value(b), {ia, ib}, [ia, ib](Tape& t, int self) {
    t.accumulate_grad(ia, t.grad_at(self));
    t.accumulate_grad(ib, t.grad_at(self));
  });
}

Var sub(Var a, Var b) {
  Tape& t = same_tape(a, b, "sub");
  require_same_shape(t.value(a), t.value(b), "sub");
  const int ia = a.id, ib = b.id;
  return t.emit(t.value(a) - t.value(b), {ia, ib}, [ia, ib](Tape& t, int self) {
    t.accumulate_grad(ia, t.grad_at(self));
    t.accumulate_grad(ib, -t.grad_at(self));
  });
}

Var neg(Var a) { return scale(a, -1.0); }

Var scale(Var a, Scalar c) {
  Tape& t = own_tape(a, "scale");
  const int ia = a.id;
  return t.emit(c * t.value(a), {ia}, [ia, c](Tape& t, int self) {
    t.accumulate_grad(ia, c * t.grad_at(self));
  });
}

Var add_rowvec(Var a, Var v) {
  Tape& t = same_tape(a, v, "add_rowvec");
  const Matrix& A = t.value(a);
  const Matrix& V = t.value(v);
  if (V.rows() != 1 || V.cols() != A.cols()) {
    throw ShapeError("add_rowvec: vector must be 1x" + std::to_string(A.cols()));
  }
  Matrix out = A;
  out.rowwise() += V.row(0);
  const int ia = a.id, iv = v.id;
  return t.emit(std::move(out), {ia, iv}, [ia, iv](Tape& t, int self) {
    const Matrix& G = t.grad_at(self);
    t.accumulate_grad(ia, G);
    t.accumulate_grad(iv, G.colwise().sum());
  });
}

Var hcat(std::span<const Var> parts) {
  if (parts.empty()) throw ContractError("hcat: no parts");
  Tape& t = own_tape(parts[0], "hcat");
  const Index rows = t.value(parts[0]).rows();
  Index cols = 0;
  std::vector<int> ids;
  std::vector<Index> offsets;
  for (Var p : parts) {
    same_tape(parts[0], p, "hcat");
    if (t.value(p).rows() != rows) throw ShapeError("hcat: row count mismatch");
    ids.push_back(p.id);
    offsets.push_back(cols);
    cols += t.value(p).cols();
  }
  Matrix out(rows, cols);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const Matrix& part = t.value_at(ids[i]);
    out.middleCols(offsets[i], part.cols()) = part;
  }
  return t.emit(std::move(out), ids, [ids, offsets](Tape& t, int self) {
    const Matrix& G = t.grad_at(self);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      t.accumulate_grad(ids[i], G.middleCols(offsets[i], t.value_at(ids[i]).cols()));
    }
  });
}

Var vcat(std::span<const Var> parts) {
  if (parts.empty()) throw ContractError("vcat: no parts");
  Tape& t = own_tape(parts[0], "vcat");
  const Index cols = t.value(parts[0]).cols();
  Index rows = 0;
  std::vector<int> ids;
  std::vector<Index> offsets;
  for (Var p : parts) {
    same_tape(parts[0], p, "vcat");
    if (t.value(p).cols() != cols) throw ShapeError("vcat: column count mismatch");
    ids.push_back(p.id);
    offsets.push_back(rows);
    rows += t.value(p).rows();
  }
  Matrix out(rows, cols);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const Matrix& part = t.value_at(ids[i]);
    out.middleRows(offsets[i], part.rows()) = part;
  }
  return t.emit(std::move(out), ids, [ids, offsets](Tape& t, int self) {
    const Matrix& G = t.grad_at(self);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      t.accumulate_grad(ids[i], G.middleRows(offsets[i], t.value_at(ids[i]).rows()));
    }
  });
}

Var row(Var a, Index i) {
  Tape& t = own_tape(a, "row");
  const Matrix& A = t.value(a);
  if (i < 0 || i >= A.rows()) throw ShapeError("row: index out of range");
  const int ia = a.id;
  return t.emit(A.row(i), {ia}, [ia, i](Tape& t, int self) {
    const Matrix& A = t.value_at(ia);
    Matrix g = Matrix::Zero(A.rows(), A.cols());
    g.row(i) = t.grad_at(self);
    t.accumulate_grad(ia, g);
  });
}

Var entry(Var a, Index i, Index j) {
  Tape& t = own_tape(a, "entry");
  const Matrix& A = t.value(a);
  if (i < 0 || i >= A.rows() || j < 0 || j >= A.cols()) {
    throw ShapeError("entry: index out of range");
  }
  Matrix out(1, 1);
  out(0, 0) = A(i, j);
  const int ia = a.id;
  return t.emit(std::move(out), {ia}, [ia, i, j](Tape& t, int self) {
    const Matrix& A = t.value_at(ia);
    Matrix g = Matrix::Zero(A.rows(), A.cols());
    g(i, j) = t.grad_at(self)(0, 0);
    t.accumulate_grad(ia, g);
  });
}

Var sum(Var a) {
  Tape& t = own_tape(a, "sum");
  Matrix out(1, 1);
  out(0, 0) = t.value(a).sum();
  const int ia = a.id;
  return t.emit(std::move(out), {ia}, [ia](Tape& t, int self) {
    const Matrix& A = t.value_at(ia);
    t.accumulate_grad(ia, Matrix::Constant(A.rows(), A.cols(), t.grad_at(self)(0, 0)));
  });
}

Var mean_all(Var a) {
  Tape& t = own_tape(a, "mean_all");
  const Index n = t.value(a).size();
  if (n == 0) throw ShapeError("mean_all: empty input");
  return scale(sum(a), 1.0 / static_cast<Scalar>(n));
}

Var gelu(Var a) {
  Tape& t = own_tape(a, "gelu");
  const int ia = a.id;
  Matrix out = t.value(a).unaryExpr([](Scalar x) { return gelu_scalar(x); });
  return t.emit(std::move(out), {ia}, [ia](Tape& t, int self) {
    const Matrix d = t.value_at(ia).unaryExpr([](Scalar x) { return gelu_grad_scalar(x); });
    t.accumulate_grad(ia, t.grad_at(self).cwiseProduct(d));
  });
}

Var log_sigmoid(Var a) {
  Tape& t = own_tape(a, "log_sigmoid");
  const int ia = a.id;
  Matrix out = t.value(a).unaryExpr([](Scalar x) { return log_sigmoid_scalar(x); });
  return t.emit(std::move(out), {ia}, [ia](Tape& t, int self) {
    const Matrix d = t.value_at(ia).unaryExpr([](Scalar x) { return sigmoid(-x); });
    t.accumulate_grad(ia, t.grad_at(self).cwiseProduct(d));
  });
}

Var logsumexp_row(Var a) {
  Tape& t = own_tape(a, "logsumexp_row");
  const Matrix& A = t.value(a);
  if (A.rows() != 1 || A.cols() < 1) throw ShapeError("logsumexp_row: expects a 1xN row");
  const Scalar m = A.maxCoeff();
  Scalar s = 0.0;
  for (Index j = 0; j < A.cols(); ++j) s += std::exp(A(0, j) - m);
  Matrix out(1, 1);
  out(0, 0) = m + std::log(s);
  const int ia = a.id;
  return t.emit(std::move(out), {ia}, [ia](Tape& t, int self) {
    const Matrix& A = t.value_at(ia);
    const Scalar lse = t.value_at(self)(0, 0);
    Matrix g(1, A.cols());
    for (Index j = 0; j < A.cols(); ++j) g(0, j) = std::exp(A(0, j) - lse);
    t.accumulate_grad(ia, t.grad_at(self)(0, 0) * g);
  });
}

Var masked_softmax(Var logits, const Matrix& bias) {
  Tape& t = own_tape(logits, "masked_softmax");
  const Matrix& Z = t.value(logits);
  require_same_shape(Z, bias, "masked_softmax");
  Matrix out(Z.rows(), Z.cols());
  for (Index i = 0; i < Z.rows(); ++i) {
    Scalar m = -std::numeric_limits<Scalar>::infinity();
    for (Index j = 0; j < Z.cols(); ++j) {
      if (!is_hard_bias(bias(i, j))) m = std::max(m, Z(i, j) + bias(i, j));
    }
    if (!std::isfinite(m)) {
      throw ContractError("masked_softmax: row " + std::to_string(i) +
                          " is fully hard-masked");
    }
    Scalar s = 0.0;
    for (Index j = 0; j < Z.cols(); ++j) {
      if (is_hard_bias(bias(i, j))) {
        out(i, j) = 0.0;
      } else {
        out(i, j) = std::exp(Z(i, j) + bias(i, j) - m);
        s += out(i, j);
      }
    }
    out.row(i) /= s;
  }
  const int iz = logits.id;
  return t.emit(std::move(out), {iz}, [iz](Tape& t, int self) {
    const Matrix& P = t.value_at(self);
    const Matrix& G = t.grad_at(self);
    Matrix g(P.rows(), P.cols());
    for (Index i = 0; i < P.rows(); ++i) {
      const Scalar dot = G.row(i).cwiseProduct(P.row(i)).sum();
      g.row(i) = (P.row(i).array() * (G.row(i).array() - dot)).matrix();
    }
    t.accumulate_grad(iz, g);
  });
}

Var layer_norm(Var x, Var gain, Var bias, Scalar eps) {
  Tape& t = same_tape(x, gain, "layer_norm");
  same_tape(x, bias, "layer_norm");
  const Matrix& X = t.value(x);
  const Matrix& G = t.value(gain);
  const Matrix& B = t.value(bias);
  const Index d = X.cols();
  if (G.rows() != 1 || G.cols() != d || B.rows() != 1 || B.cols() != d) {
    throw ShapeError("layer_norm: gain/bias must be 1x" + std::to_string(d));
  }
  Matrix xhat(X.rows(), d);
  Vector inv_std(X.rows());
  for (Index i = 0; i < X.rows(); ++i) {
    const Scalar mu = X.row(i).mean();
    const Scalar var = (X.row(i).array() - mu).square().mean();
    inv_std(i) = 1.0 / std::sqrt(var + eps);
    xhat.row(i) = (X.row(i).array() - mu) * inv_std(i);
  }
  Matrix out(X.rows(), d);
  for (Index i = 0; i < X.rows(); ++i) {
    out.row(i) = xhat.row(i).cwiseProduct(G.row(0)) + B.row(0);
  }
  const int ix = x.id, ig = gain.id, ib = bias.id;
  return t.emit(std::move(out), {ix, ig, ib},
                [ix, ig, ib, xhat, inv_std](Tape& t, int self) {
                  const Matrix& Gout = t.grad_at(self);
                  const Matrix& gain = t.value_at(ig);
                  const Index d = xhat.cols();
                  Matrix dx(xhat.rows(), d);
                  Matrix dgain = Matrix::Zero(1, d);
                  Matrix dbias = Matrix::Zero(1, d);
                  for (Index i = 0; i < xhat.rows(); ++i) {
                    const auto dy = Gout.row(i);
                    Matrix gdy = dy.cwiseProduct(gain.row(0));
                    const Scalar mean_gdy = gdy.mean();
                    const Scalar mean_gdy_xhat = gdy.cwiseProduct(xhat.row(i)).mean();
                    dx.row(i) = (inv_std(i) * (gdy.array() - mean_gdy -
                                               xhat.row(i).array() * mean_gdy_xhat))
                                    .matrix();
                    dgain += dy.cwiseProduct(xhat.row(i));
                    dbias += dy;
                  }
                  t.accumulate_grad(ix, dx);
                  t.accumulate_grad(ig, dgain);
                  t.accumulate_grad(ib, dbias);
                });
}

Var cosine_sim(Var a, Var b) {
  Tape& t = same_tape(a, b, "cosine_sim");
  const Matrix& A = t.value(a);
  const Matrix& B = t.value(b);
  if (A.size() != B.size()) throw ShapeError("cosine_sim: length mismatch");
  if (A.rows() != 1 && A.cols() != 1) throw ShapeError("cosine_sim: expects vectors");
  const Scalar na = A.norm();
  const Scalar nb = B.norm();
  if (na == 0.0 || nb == 0.0) throw std::domain_error("cosine_sim: zero vector");
  const Scalar dot = (A.reshaped().array() * B.reshaped().array()).sum();
  const Scalar c = dot / (na * nb);
  Matrix out(1, 1);
  out(0, 0) = c;
  const int ia = a.id, ib = b.id;
  return t.emit(std::move(out), {ia, ib}, [ia, ib, na, nb, c](Tape& t, int self) {
    const Scalar g = t.grad_at(self)(0, 0);
    const Matrix& A = t.value_at(ia);
    const Matrix& B = t.value_at(ib);
    Matrix da = g * (B.reshaped(A.rows(), A.cols()) / (na * nb) - (c / (na * na)) * A);
    Matrix db = g * (A.reshaped(B.rows(), B.cols()) / (na * nb) - (c / (nb * nb)) * B);
    t.accumulate_grad(ia, da);
    t.accumulate_grad(ib, db);
  });
}

}  // namespace fedprompt
