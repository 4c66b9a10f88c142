#include "fedprompt/grad_check.hpp"

#include <cmath>

namespace fedprompt {

Matrix central_difference(const std::function<Scalar(const Matrix&)>& f,
                          const Matrix& point, Scalar eps) {
  Matrix g(point.rows(), point.cols());
  Matrix x = point;
  for (Index i = 0; i < point.rows(); ++i) {
    for (Index j = 0; j < point.cols(); ++j) {
      const Scalar orig = x(i, j);
      x(i, j) = orig + eps;
      const Scalar up = f(x);
      x(i, j) = orig - eps;
      const Scalar down = f(x);
      x(i, j) = orig;
      g(i, j) = (up - down) / (2.0 * eps);
    }
  }
  return g;
}

Scalar max_rel_error(const Matrix& autodiff, const Matrix& numeric) {
  if (autodiff.rows() != numeric.rows() || autodiff.cols() != numeric.cols()) {
    throw ShapeError("max_rel_error: shape mismatch");
  }
  Scalar worst = 0.0;
  for (Index i = 0; i < autodiff.rows(); ++i) {
    for (Index j = 0; j < autodiff.cols(); ++j) {
      const Scalar denom = std::max<Scalar>(1.0, std::abs(numeric(i, j)));
      worst = std::max(worst, std::abs(autodiff(i, j) - numeric(i, j)) / denom);
    }
  }
  return worst;
}

Scalar grad_check(const std::function<Scalar(const Matrix&)>& f, const Matrix& point,
                  const Matrix& autodiff_grad, Scalar eps) {
  return max_rel_error(autodiff_grad, central_difference(f, point, eps));
}

}  // namespace fedprompt
