#pragma once

#include "nnreg/operators.hpp"

#include <optional>

namespace nnreg {

/// Exact and perturbed data of one inverse problem. The exact parts are
/// optional; solvers only ever touch the perturbed ones.
struct InverseProblem {
  std::optional<DenseOperator> operator_exact;
  DenseOperator operator_noisy;
  std::optional<Vector> data_exact;
  Vector data_noisy;
  double h = 0.0;
  double delta = 0.0;

  /// Checks shapes, non-negative noise levels and the two noise bounds.
  void validate() const;
};

/// Problem with exact operator and data only (h = δ = 0).
InverseProblem make_exact_problem(const DenseOperator& a, const Vector& y);

}  // namespace nnreg
