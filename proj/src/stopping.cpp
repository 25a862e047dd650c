#include "nnreg/stopping.hpp"

#include "nnreg/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace nnreg {

void StoppingRule::validate() const {
  if (n_max < 0) throw ConfigError("stopping rule: n_max must be >= 0");
  if (auto* m = std::get_if<MorozovRule>(&kind); m && !(m->tau0 > 1))
    throw ConfigError("Morozov rule: tau0 must be > 1");
  if (auto* m = std::get_if<ModifiedDiscrepancyRule>(&kind)) {
    if (!(m->tau0 > 1)) throw ConfigError("modified discrepancy: tau0 must be > 1 (tau*mu > 1)");
    if (!(m->c_dagger >= 0)) throw ConfigError("modified discrepancy: c_dagger must be >= 0");
  }
  if (auto* a = std::get_if<APrioriRule>(&kind)) {
    if (!(a->scale > 0)) throw ConfigError("a-priori rule: scale must be > 0");
    if (a->kind == APrioriRule::Kind::Holder && !(a->exponent > 0))
      throw ConfigError("a-priori Holder rule: p must be > 0");
    if (a->kind == APrioriRule::Kind::Log && !(a->exponent > 0 && a->exponent < 1))
      throw ConfigError("a-priori log rule: a must lie in (0,1)");
  }
}

namespace {

void check_shapes(const InverseProblem& p, const Preconditioner& g) {
  const DenseOperator& a = p.operator_noisy;
  if (p.data_noisy.size() != a.rows()) throw ContractViolation("residual: data length mismatch");
  if (g.kind() != PreconditionerKind::Scalar && a.rows() != a.cols())
    throw UnsupportedConfiguration(
        "preconditioned residual with a non-scalar preconditioner needs a square operator");
}

}  // namespace

double preconditioned_residual(const InverseProblem& p, const Preconditioner& g, const Vector& z) {
  check_shapes(p, g);
  const Vector r = p.data_noisy - apply(p.operator_noisy, z.cwiseAbs());
  const Vector w = companion_resolvent_apply(g, p.operator_noisy, r);
  if (g.kind() == PreconditionerKind::Scalar) return w.norm();
  return g.sqrt_apply(w).norm();
}

ResidualFunctional::ResidualFunctional(const InverseProblem& p, const Preconditioner& g) {
  check_shapes(p, g);
  const Index n = p.operator_noisy.cols();
  Matrix rhs(p.operator_noisy.rows(), n + 1);
  rhs.leftCols(n) = p.operator_noisy.matrix();
  rhs.col(n) = p.data_noisy;
  Matrix s = companion_resolvent_apply(g, p.operator_noisy, rhs);
  if (g.kind() != PreconditionerKind::Scalar) {
    for (Index j = 0; j <= n; ++j) s.col(j) = g.sqrt_apply(s.col(j));
  }
  pa_ = s.leftCols(n);
  py_ = s.col(n);
}

double ResidualFunctional::operator()(const Vector& abs_z) const {
  return (py_ - pa_ * abs_z).norm();
}

StoppingDecision should_stop_modified(double r, const ModifiedDiscrepancyRule& rule, double delta,
                                      double h, const Preconditioner& g) {
  if (!(r >= 0)) throw ContractViolation("should_stop_modified: r must be >= 0");
  if (delta < 0 || h < 0) throw DomainError("should_stop_modified: negative noise level");
  const double eps = delta + h * rule.c_dagger;
  double thr;
  if (g.kind() == PreconditionerKind::Scalar) {
    thr = rule.tau(g.mu()) * eps;
  } else {
    thr = rule.tau0 * eps / g.sqrt_norm();
  }
  return {r <= thr, r, thr};
}

StoppingDecision should_stop_morozov(double residual_norm, const MorozovRule& rule, double delta,
                                     double h) {
  if (!(residual_norm >= 0)) throw ContractViolation("should_stop_morozov: residual must be >= 0");
  const double thr = rule.tau0 * (h + delta);
  return {residual_norm <= thr, residual_norm, thr};
}

std::int64_t a_priori_k(double h, double delta, const APrioriRule& rule) {
  if (h < 0 || delta < 0) throw DomainError("a_priori_k: negative noise level");
  if (h + delta == 0) throw DomainError("a_priori_k: h + delta = 0 gives an infinite index");
  double v = 0;
  switch (rule.kind) {
    case APrioriRule::Kind::Holder: {
      const double p = rule.exponent;
      const double level = std::pow(h, std::min(1.0, p)) + delta;
      v = rule.scale * std::pow(level, -1.0 / (p + 1.0));
      break;
    }
    case APrioriRule::Kind::Log:
      v = rule.scale * std::pow(h + delta, -rule.exponent);
      break;
    case APrioriRule::Kind::Admissible:
      v = rule.scale * std::pow(h + delta, -0.5);
      break;
  }
  if (!std::isfinite(v) || v > 9e18) throw DomainError("a_priori_k: index overflows");
  // pow() is not exact: 1e-4^-0.5 may come out as 100.00000000000001
  const double r = std::round(v);
  if (std::abs(v - r) <= 1e-9 * std::max(1.0, v)) v = r;
  return std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(v)));
}

}  // namespace nnreg
