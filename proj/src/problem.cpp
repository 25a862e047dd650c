#include "nnreg/problem.hpp"

#include "nnreg/errors.hpp"

#include <cmath>

namespace nnreg {

void InverseProblem::validate() const {
  if (data_noisy.size() != operator_noisy.rows())
    throw ContractViolation("InverseProblem: data length does not match operator rows");
  if (!(h >= 0) || !(delta >= 0) || !std::isfinite(h) || !std::isfinite(delta))
    throw ContractViolation("InverseProblem: noise levels must be finite and >= 0");
  if (operator_exact) {
    if (operator_exact->rows() != operator_noisy.rows() ||
        operator_exact->cols() != operator_noisy.cols())
      throw ContractViolation("InverseProblem: exact/noisy operator shape mismatch");
    const double d = operator_distance(*operator_exact, operator_noisy);
    if (d > h * (1 + 1e-9) + 1e-12)
      throw InvariantViolation("InverseProblem: ‖A_h − A‖ exceeds h");
  }
  if (data_exact) {
    if (data_exact->size() != data_noisy.size())
      throw ContractViolation("InverseProblem: exact/noisy data length mismatch");
    if ((data_noisy - *data_exact).norm() > delta + 1e-12)
      throw InvariantViolation("InverseProblem: ‖y^δ − y‖ exceeds delta");
  }
}

InverseProblem make_exact_problem(const DenseOperator& a, const Vector& y) {
  InverseProblem p{a, a, y, y, 0.0, 0.0};
  p.validate();
  return p;
}

}  // namespace nnreg
