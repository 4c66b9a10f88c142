#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fedprompt/grad_check.hpp"
#include "fedprompt/mask.hpp"
#include "fedprompt/rng.hpp"
#include "fedprompt/sgd.hpp"
#include "fedprompt/tape.hpp"

#include <cmath>

using namespace fedprompt;

namespace {

Matrix mat(std::initializer_list<std::initializer_list<Scalar>> rows) {
  Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.begin()->size()));
  Index i = 0;
  for (const auto& r : rows) {
    Index j = 0;
    for (Scalar v : r) m(i, j++) = v;
    ++i;
  }
  return m;
}

}  // namespace

TEST_CASE("matmul basics") {
  Tape tape;
  Var id2 = tape.constant(Matrix::Identity(2, 2));
  Var a = tape.constant(mat({{1.0, 2.0}, {3.0, 4.0}}));
  CHECK(tape.value(matmul(id2, a)) == tape.value(a));

  Var b = tape.constant(mat({{0.0}, {1.0}}));
  Matrix expected = mat({{2.0}, {4.0}});
  CHECK(tape.value(matmul(a, b)) == expected);

  CHECK_THROWS_AS(matmul(a, tape.constant(Matrix::Zero(3, 1))), ShapeError);
}

TEST_CASE("matmul gradient matches finite differences") {
  RngStream rng(7, "matmul-grad");
  const Matrix a0 = rng.gaussian_matrix(3, 4);
  const Matrix b0 = rng.gaussian_matrix(4, 2);

  auto loss_at_a = [&](const Matrix& a) {
    Tape tape;
    Var va = tape.leaf(a);
    Var vb = tape.constant(b0);
    Tape& t = *va.tape;
    return t.value(sum(matmul(va, vb)))(0, 0);
  };
  auto loss_at_b = [&](const Matrix& b) {
    Tape tape;
    Var va = tape.constant(a0);
    Var vb = tape.leaf(b);
    return tape.value(sum(matmul(va, vb)))(0, 0);
  };

  Tape tape;
  Var va = tape.leaf(a0);
  Var vb = tape.leaf(b0);
  Var loss = sum(matmul(va, vb));
  tape.backward(loss);
  CHECK(grad_check(loss_at_a, a0, tape.grad(va)) <= 1e-5);
  CHECK(grad_check(loss_at_b, b0, tape.grad(vb)) <= 1e-5);
}

TEST_CASE("masked_softmax hand cases") {
  AttentionMask none;
  none.n_prompt = 0;
  none.n_text = 2;
  none.bias = Matrix::Zero(3, 3);

  Tape tape;
  Var z = tape.constant(Matrix::Zero(3, 3));
  Matrix p = tape.value(masked_softmax(z, none));
  for (Index i = 0; i < 3; ++i)
    for (Index j = 0; j < 3; ++j) CHECK(p(i, j) == doctest::Approx(1.0 / 3.0));

  AttentionMask col_blocked = none;
  col_blocked.bias.col(2).setConstant(kHardMask);
  Matrix q = tape.value(masked_softmax(z, col_blocked));
  for (Index i = 0; i < 3; ++i) {
    CHECK(q(i, 0) == doctest::Approx(0.5));
    CHECK(q(i, 1) == doctest::Approx(0.5));
    CHECK(q(i, 2) == 0.0);  // exactly zero, not just small
  }

  // softmax(0, ln 2, 0) = (1, 2, 1) / 4 by direct computation.
  AttentionMask biased = none;
  biased.bias.col(1).setConstant(std::log(2.0));
  Matrix r = tape.value(masked_softmax(z, biased));
  for (Index i = 0; i < 3; ++i) {
    CHECK(r(i, 0) == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(r(i, 1) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(r(i, 2) == doctest::Approx(0.25).epsilon(1e-12));
  }
}

TEST_CASE("masked_softmax row sums and degenerate rows") {
  RngStream rng(11, "softmax-rows");
  for (int trial = 0; trial < 50; ++trial) {
    const Index n = 2 + rng.uniform_int(5);
    Matrix bias = Matrix::Zero(n, n);
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < n; ++j) {
        const Scalar u = rng.uniform();
        if (u < 0.3) bias(i, j) = kHardMask;
        else if (u < 0.5) bias(i, j) = rng.uniform();
      }
      bias(i, i) = 0.0;  // keep every row viable
    }
    Tape tape;
    Var z = tape.constant(rng.gaussian_matrix(n, n, 3.0));
    Matrix p = tape.value(masked_softmax(z, bias));
    for (Index i = 0; i < n; ++i) {
      CHECK(std::abs(p.row(i).sum() - 1.0) <= 1e-9);
      for (Index j = 0; j < n; ++j) {
        if (is_hard_bias(bias(i, j))) CHECK(std::abs(p(i, j)) < 1e-30);
      }
    }
  }

  Matrix dead = Matrix::Zero(2, 2);
  dead.row(1).setConstant(kHardMask);
  Tape tape;
  Var z = tape.constant(Matrix::Zero(2, 2));
  CHECK_THROWS_AS(masked_softmax(z, dead), ContractError);
}

TEST_CASE("layer_norm hand cases and gradient") {
  Tape tape;
  Var gain = tape.constant(Matrix::Ones(1, 4));
  Var bias = tape.constant(Matrix::Zero(1, 4));

  Var constant_row = tape.constant(Matrix::Constant(1, 4, 3.7));
  Matrix out = tape.value(layer_norm(constant_row, gain, bias, 1e-5));
  for (Index j = 0; j < 4; ++j) CHECK(out(0, j) == doctest::Approx(0.0));

  Var pm = tape.constant(mat({{1.0, -1.0}}));
  Var g2 = tape.constant(Matrix::Ones(1, 2));
  Var b2 = tape.constant(Matrix::Zero(1, 2));
  Matrix out2 = tape.value(layer_norm(pm, g2, b2, 1e-12));
  CHECK(out2(0, 0) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(out2(0, 1) == doctest::Approx(-1.0).epsilon(1e-9));

  RngStream rng(3, "ln-grad");
  const Matrix x0 = rng.gaussian_matrix(1, 4);
  const Matrix g0 = rng.gaussian_matrix(1, 4);
  const Matrix bb0 = rng.gaussian_matrix(1, 4);
  auto f = [&](const Matrix& x) {
    Tape t;
    Var vx = t.leaf(x);
    Var vg = t.constant(g0);
    Var vb = t.constant(bb0);
    return t.value(sum(layer_norm(vx, vg, vb, 1e-5)))(0, 0);
  };
  Tape t2;
  Var vx = t2.leaf(x0);
  Var loss = sum(layer_norm(vx, t2.constant(g0), t2.constant(bb0), 1e-5));
  t2.backward(loss);
  CHECK(grad_check(f, x0, t2.grad(vx)) <= 1e-5);
}

TEST_CASE("backward populates leaves and rejects non-scalar losses") {
  Tape tape;
  Var a = tape.leaf(mat({{1.0, 2.0}, {3.0, 4.0}}));
  Var loss = sum(a);
  tape.backward(loss);
  CHECK(tape.grad(a) == Matrix::Ones(2, 2));

  // A leaf not feeding the loss keeps a zero gradient.
  Var unused = tape.leaf(Matrix::Ones(2, 2));
  Var loss2 = sum(a);
  tape.backward(loss2);
  CHECK(tape.grad(unused) == Matrix::Zero(2, 2));

  CHECK_THROWS_AS(tape.backward(a), ContractError);
}

TEST_CASE("cosine similarity values and scale-invariance of its gradient") {
  Tape tape;
  Var a = tape.leaf(mat({{2.0, 1.0, -1.0}}));
  Var same = tape.constant(mat({{2.0, 1.0, -1.0}}));
  CHECK(tape.value(cosine_sim(a, same))(0, 0) == doctest::Approx(1.0));

  Var e1 = tape.constant(mat({{1.0, 0.0}}));
  Var e2 = tape.constant(mat({{0.0, 1.0}}));
  CHECK(tape.value(cosine_sim(e1, e2))(0, 0) == doctest::Approx(0.0));

  Var b = tape.constant(mat({{1.0, 1.0}}));
  CHECK(tape.value(cosine_sim(e1, b))(0, 0) == doctest::Approx(1.0 / std::sqrt(2.0)));

  // d cos(a, b) / da is orthogonal to a; with a == b it vanishes entirely.
  Tape t2;
  Var va = t2.leaf(mat({{2.0, 1.0, -1.0}}));
  Var vb = t2.constant(mat({{2.0, 1.0, -1.0}}));
  t2.backward(cosine_sim(va, vb));
  CHECK(t2.grad(va).norm() <= 1e-12);

  RngStream rng(19, "cos-orth");
  for (int trial = 0; trial < 20; ++trial) {
    Tape t3;
    const Matrix a0 = rng.gaussian_matrix(1, 5);
    Var x = t3.leaf(a0);
    Var y = t3.constant(rng.gaussian_matrix(1, 5));
    t3.backward(cosine_sim(x, y));
    CHECK(std::abs((t3.grad(x).array() * a0.array()).sum()) <= 1e-10);
  }

  Var zero = tape.constant(Matrix::Zero(1, 3));
  Var any = tape.constant(Matrix::Ones(1, 3));
  CHECK_THROWS_AS(cosine_sim(zero, any), std::domain_error);
}

TEST_CASE("sgd_step contract and convergence") {
  Matrix p = mat({{1.0}});
  sgd_step(p, mat({{1.0}}), 0.1, 0.0);
  CHECK(p(0, 0) == doctest::Approx(0.9));

  Matrix q = mat({{1.0}});
  sgd_step(q, mat({{0.0}}), 0.1, 0.001);
  CHECK(q(0, 0) == doctest::Approx(0.9999));

  // Quadratic 0.5 * p^2: gradient p, so p contracts by 0.9 per step.
  Matrix r = mat({{1.0}});
  for (int i = 0; i < 100; ++i) sgd_step(r, r, 0.1, 0.0);
  CHECK(std::abs(r(0, 0)) < 1e-4);
  CHECK(r(0, 0) == doctest::Approx(std::pow(0.9, 100)).epsilon(1e-9));

  Matrix s = mat({{1.0}});
  CHECK_THROWS_AS(sgd_step(s, Matrix(), 0.1, 0.0), ContractError);

  Tape tape;
  Var leaf = tape.leaf(mat({{1.0}}));
  const Var params[] = {leaf};
  CHECK_THROWS_AS(sgd_step(tape, params, 0.1, 0.0), ContractError);  // no backward yet
  tape.backward(sum(leaf));
  sgd_step(tape, params, 0.1, 0.0);
  CHECK(tape.value(leaf)(0, 0) == doctest::Approx(0.9));
  CHECK(tape.grad(leaf).size() == 0);  // cleared
}

TEST_CASE("grad_check on a matmul chain and a masked softmax row") {
  RngStream rng(23, "chain");
  const Matrix x0 = rng.gaussian_matrix(2, 3);
  const Matrix w0 = rng.gaussian_matrix(3, 3);
  const Matrix v0 = rng.gaussian_matrix(3, 2);
  Matrix bias = Matrix::Zero(2, 3);
  bias(0, 2) = kHardMask;
  bias(1, 0) = 0.4;

  auto f = [&](const Matrix& x) {
    Tape t;
    Var vx = t.leaf(x);
    Var scores = matmul(vx, t.constant(w0));
    Var p = masked_softmax(scores, bias);
    Var out = matmul(p, t.constant(v0));
    return t.value(sum(out))(0, 0);
  };
  Tape t;
  Var vx = t.leaf(x0);
  Var scores = matmul(vx, t.constant(w0));
  Var p = masked_softmax(scores, bias);
  Var loss = sum(matmul(p, t.constant(v0)));
  t.backward(loss);
  CHECK(grad_check(f, x0, t.grad(vx)) <= 1e-4);
}

TEST_CASE("composite pipelines match finite differences over many seeds") {
  for (int seed = 0; seed < 100; ++seed) {
    RngStream rng(static_cast<std::uint64_t>(seed), "composite");
    const Matrix x0 = rng.gaussian_matrix(4, 4);
    const Matrix w0 = rng.gaussian_matrix(4, 4);
    const Matrix v0 = rng.gaussian_matrix(4, 3);
    const Matrix g0 = rng.gaussian_matrix(1, 4);
    const Matrix b0 = rng.gaussian_matrix(1, 4);
    const Matrix ref = rng.gaussian_matrix(1, 3);
    Matrix bias = Matrix::Zero(4, 4);
    for (Index i = 0; i < 4; ++i) {
      for (Index j = 0; j < 4; ++j) {
        if (i != j && rng.uniform() < 0.25) bias(i, j) = kHardMask;
      }
    }

    auto f = [&](const Matrix& x) {
      Tape t;
      Var vx = t.leaf(x);
      Var h = layer_norm(vx, t.constant(g0), t.constant(b0), 1e-5);
      Var p = masked_softmax(matmul(h, t.constant(w0)), bias);
      Var out = matmul(p, t.constant(v0));
      Var c = cosine_sim(row(out, 0), t.constant(ref));
      return t.value(add(c, mean_all(out)))(0, 0);
    };

    Tape t;
    Var vx = t.leaf(x0);
    Var h = layer_norm(vx, t.constant(g0), t.constant(b0), 1e-5);
    Var p = masked_softmax(matmul(h, t.constant(w0)), bias);
    Var out = matmul(p, t.constant(v0));
    Var c = cosine_sim(row(out, 0), t.constant(ref));
    Var loss = add(c, mean_all(out));
    t.backward(loss);
    CHECK(grad_check(f, x0, t.grad(vx)) <= 1e-4);
  }
}

TEST_CASE("rng streams are deterministic and label-sensitive") {
  RngStream a(42, "stream");
  RngStream b(42, "stream");
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

  Matrix m1 = RngStream(42, "stream").gaussian_matrix(5, 5);
  Matrix m2 = RngStream(42, "stream").gaussian_matrix(5, 5);
  CHECK(m1 == m2);  // bitwise

  Matrix m3 = RngStream(42, "other").gaussian_matrix(5, 5);
  CHECK(m1 != m3);
  Matrix m4 = RngStream(43, "stream").gaussian_matrix(5, 5);
  CHECK(m1 != m4);
}

TEST_CASE("dirichlet draws are proportions") {
  RngStream rng(5, "dir");
  for (Scalar beta : {0.1, 0.5, 100.0}) {
    auto w = rng.dirichlet(beta, 8);
    Scalar total = 0.0;
    for (Scalar wi : w) {
      CHECK(wi >= 0.0);
      total += wi;
    }
    CHECK(total == doctest::Approx(1.0));
  }
}
