#pragma once

#include "fedprompt/types.hpp"

#include <functional>

namespace fedprompt {

// Central finite differences of a scalar-valued function at `point`,
// coordinate by coordinate. Independent of the tape machinery so it can act
// as an oracle for it.
Matrix central_difference(const std::function<Scalar(const Matrix&)>& f,
                          const Matrix& point, Scalar eps = 1e-6);

// max over coordinates of |autodiff - numeric| / max(1, |numeric|).
Scalar max_rel_error(const Matrix& autodiff, const Matrix& numeric);

// Convenience: finite-difference the function and compare to a gradient.
Scalar grad_check(const std::function<Scalar(const Matrix&)>& f, const Matrix& point,
                  const Matrix& autodiff_grad, Scalar eps = 1e-6);

}  // namespace fedprompt
