#pragma once

#include "nnreg/operators.hpp"
#include "nnreg/problem.hpp"

#include <cstdint>
#include <variant>

namespace nnreg {

struct APrioriRule {
  enum class Kind { Holder, Log, Admissible };
  Kind kind = Kind::Admissible;
  double exponent = 0.0;  // p for Holder, a for Log, unused for Admissible
  double scale = 1.0;
};

struct MorozovRule {
  double tau0 = 1.1;
};

/// Preconditioned discrepancy rule. τ₀ is stored; for scalar G = μI the
/// classical parameter is τ = τ₀/μ, so τ₀ > 1 is the same as τμ > 1.
struct ModifiedDiscrepancyRule {
  double tau0 = 1.1;
  double c_dagger = 0.0;

  static ModifiedDiscrepancyRule with_tau(double tau, double mu, double c_dagger) {
    return {tau * mu, c_dagger};
  }
  double tau(double mu) const { return tau0 / mu; }
};

struct MaxOnlyRule {};

struct StoppingRule {
  std::variant<APrioriRule, MorozovRule, ModifiedDiscrepancyRule, MaxOnlyRule> kind = MaxOnlyRule{};
  std::int64_t n_max = 1000000;

  void validate() const;
};

struct StoppingDecision {
  bool stop = false;
  double functional_value = 0.0;
  double threshold = 0.0;
};

/// Scalar G: ‖(μI + A_hA_hᵀ)^{-1}(y^δ − A_h|z|)‖.
/// Otherwise (square systems only): ‖G^{1/2}(G + A_hA_hᵀ)^{-1}(y^δ − A_h|z|)‖.
double preconditioned_residual(const InverseProblem& p, const Preconditioner& g, const Vector& z);

/// Same functional with the data-space solves done once up front; used inside
/// the iteration loop. Takes the already non-negative |z|.
class ResidualFunctional {
 public:
  ResidualFunctional(const InverseProblem& p, const Preconditioner& g);
  double operator()(const Vector& abs_z) const;

 private:
  Matrix pa_;  // W (G̃ + AAᵀ)^{-1} A
  Vector py_;  // W (G̃ + AAᵀ)^{-1} y^δ
};

StoppingDecision should_stop_modified(double r, const ModifiedDiscrepancyRule& rule, double delta,
                                      double h, const Preconditioner& g);
StoppingDecision should_stop_morozov(double residual_norm, const MorozovRule& rule, double delta,
                                     double h);

/// Stopping index of an a-priori rule; throws DomainError when h + δ = 0.
std::int64_t a_priori_k(double h, double delta, const APrioriRule& rule);

}  // namespace nnreg
