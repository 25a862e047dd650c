#pragma once

#include "nnreg/operators.hpp"
#include "nnreg/problem.hpp"
#include "nnreg/stopping.hpp"

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace nnreg {

struct OutputMap {
  enum class Kind { Abs, PositivePart, Blend };
  Kind kind = Kind::Abs;
  double a = 0.0;  // Blend only, in [0, 1/2]

  static OutputMap abs() { return {Kind::Abs, 0.0}; }
  static OutputMap positive_part() { return {Kind::PositivePart, 0.0}; }
  static OutputMap blend(double a);
};

/// Abs: |z|. PositivePart: (z + |z|)/2. Blend a: a·z + (1−a)|z|.
/// The result is exactly non-negative in floating point.
Vector output_map(const OutputMap& m, const Vector& z);

struct RelaxationSchedule {
  enum class Kind { Zero, Harmonic, HarmonicLog };
  Kind kind = Kind::Harmonic;
  int q = 1;  // HarmonicLog: number of iterated logarithms
};

/// α_k for k ≥ 1. Harmonic is 1/(k+1) so that α_k < 1 already at k = 1.
double relaxation(const RelaxationSchedule& s, std::int64_t k);

struct IterationState {
  std::int64_t k = 0;
  Vector z;
  Vector x;
  std::optional<Vector> dual;
  double preconditioned_residual = std::numeric_limits<double>::quiet_NaN();
};

IterationState algorithm1_step(const IterationState& s, const InverseProblem& p,
                               const Preconditioner& g);
IterationState algorithm2_step(const IterationState& s, const InverseProblem& p,
                               const Preconditioner& g, double alpha_k, const Vector& x0,
                               const OutputMap& out = OutputMap::positive_part());
IterationState projected_landweber_step(const IterationState& s, const InverseProblem& p,
                                        double omega);
IterationState dual_projected_landweber_step(const IterationState& s, const InverseProblem& p,
                                             double omega);

enum class Method { Algorithm1, Algorithm2, ProjectedLandweber, DualProjectedLandweber };

Method parse_method(const std::string& s);
const char* to_string(Method m);

struct SolverConfig {
  Method method = Method::Algorithm1;
  /// Needed by Algorithms 1/2 and by the modified discrepancy rule.
  std::optional<Preconditioner> preconditioner;
  double omega = 1.0;
  RelaxationSchedule schedule;
  /// Algorithm 1 always uses Abs; this is read by Algorithm 2 only.
  OutputMap output_map = OutputMap::positive_part();
  /// Empty means the zero vector.
  Vector x0;
  std::int64_t max_iterations = 1000000;
};

enum class StopReason { DiscrepancyMet, APrioriReached, MaxIterations };
const char* to_string(StopReason r);

struct RunOptions {
  /// Ground truth for diagnostics (error history and l2err).
  std::optional<Vector> x_dagger;
  bool record_traces = false;
};

struct SolveReport {
  Method method = Method::Algorithm1;
  std::int64_t k_star = 0;
  StopReason stop_reason = StopReason::MaxIterations;
  Vector x;
  Vector z;
  std::optional<double> l2err;
  double residual = 0.0;  // ‖A_h x − y^δ‖
  std::optional<double> preconditioned_residual;
  std::optional<double> threshold;
  double wall_time = 0.0;
  double cpu_time = 0.0;
  /// Only filled when RunOptions::record_traces is set; entry k belongs to x_k.
  std::vector<double> residual_history;
  std::vector<double> functional_history;
  std::vector<double> error_history;
  /// Smallest entry of every emitted x_k (always recorded).
  double min_entry = 0.0;
};

SolveReport run_solver(const SolverConfig& cfg, const InverseProblem& p, const StoppingRule& stop,
                       const RunOptions& opts = {});

}  // namespace nnreg
