#include "nnreg/solvers.hpp"

#include "nnreg/errors.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>

namespace nnreg {

OutputMap OutputMap::blend(double a) {
  if (!(a >= 0.0 && a <= 0.5)) throw ConfigError("blend output map: a must lie in [0, 1/2]");
  return {Kind::Blend, a};
}

Vector output_map(const OutputMap& m, const Vector& z) {
  switch (m.kind) {
    case OutputMap::Kind::Abs:
      return z.cwiseAbs();
    case OutputMap::Kind::PositivePart:
      return 0.5 * (z + z.cwiseAbs());
    case OutputMap::Kind::Blend: {
      // a·z + (1−a)|z| is z for z ≥ 0 and (1−2a)|z| otherwise; written that
      // way the sign cannot flip through rounding.
      const double c = 1.0 - 2.0 * m.a;
      Vector x(z.size());
      for (Index i = 0; i < z.size(); ++i) x[i] = z[i] >= 0 ? z[i] : c * -z[i];
      return x;
    }
  }
  return z;
}

double relaxation(const RelaxationSchedule& s, std::int64_t k) {
  if (k < 1) throw ContractViolation("relaxation: k must be >= 1");
  const double kk = static_cast<double>(k + 1);
  switch (s.kind) {
    case RelaxationSchedule::Kind::Zero:
      return 0.0;
    case RelaxationSchedule::Kind::Harmonic:
      return 1.0 / kk;
    case RelaxationSchedule::Kind::HarmonicLog: {
      double den = kk;
      double l = kk;
      for (int i = 0; i < s.q; ++i) {
        l = l > 1.0 ? std::log(l) : 0.0;
        den *= std::max(1.0, l);
      }
      return 1.0 / den;
    }
  }
  return 0.0;
}

namespace {

void check_state(const IterationState& s, const InverseProblem& p) {
  const Index n = p.operator_noisy.cols();
  if (s.z.size() != n || s.x.size() != n) throw ContractViolation("iteration state: dimension mismatch");
  if (p.data_noisy.size() != p.operator_noisy.rows())
    throw ContractViolation("iteration state: data length mismatch");
}

Vector fixed_point_update(const Vector& z, const InverseProblem& p, const Preconditioner& g) {
  const DenseOperator& a = p.operator_noisy;
  const Vector az = z.cwiseAbs();
  const Vector rhs = g.apply(az) - apply_adjoint(a, apply(a, az)) + 2.0 * apply_adjoint(a, p.data_noisy);
  return resolvent_solve(g, a, rhs);
}

}  // namespace

IterationState algorithm1_step(const IterationState& s, const InverseProblem& p,
                               const Preconditioner& g) {
  check_state(s, p);
  IterationState out;
  out.k = s.k + 1;
  out.z = fixed_point_update(s.z, p, g);
  out.x = out.z.cwiseAbs();
  return out;
}

IterationState algorithm2_step(const IterationState& s, const InverseProblem& p,
                               const Preconditioner& g, double alpha_k, const Vector& x0,
                               const OutputMap& out_map) {
  check_state(s, p);
  if (!(alpha_k >= 0.0 && alpha_k < 1.0)) throw ContractViolation("algorithm2_step: alpha must lie in [0,1)");
  if (x0.size() != s.z.size()) throw ContractViolation("algorithm2_step: x0 dimension mismatch");
  IterationState out;
  out.k = s.k + 1;
  out.z = alpha_k * x0 + (1.0 - alpha_k) * fixed_point_update(s.z, p, g);
  out.x = output_map(out_map, out.z);
  return out;
}

IterationState projected_landweber_step(const IterationState& s, const InverseProblem& p,
                                        double omega) {
  check_state(s, p);
  if (!(omega > 0)) throw ContractViolation("projected_landweber_step: omega must be > 0");
  const DenseOperator& a = p.operator_noisy;
  IterationState out;
  out.k = s.k + 1;
  out.x = (s.x + omega * apply_adjoint(a, p.data_noisy - apply(a, s.x))).cwiseMax(0.0);
  out.z = out.x;
  return out;
}

IterationState dual_projected_landweber_step(const IterationState& s, const InverseProblem& p,
                                             double omega) {
  check_state(s, p);
  if (!s.dual) throw ContractViolation("dual_projected_landweber_step: missing dual vector");
  if (!(omega > 0)) throw ContractViolation("dual_projected_landweber_step: omega must be > 0");
  const DenseOperator& a = p.operator_noisy;
  if (s.dual->size() != a.rows()) throw ContractViolation("dual vector has wrong length");
  const Vector xk = apply_adjoint(a, *s.dual).cwiseMax(0.0);
  IterationState out;
  out.k = s.k + 1;
  out.dual = *s.dual + omega * (p.data_noisy - apply(a, xk));
  out.x = apply_adjoint(a, *out.dual).cwiseMax(0.0);
  out.z = out.x;
  return out;
}

Method parse_method(const std::string& s) {
  if (s == "Algorithm1") return Method::Algorithm1;
  if (s == "Algorithm2") return Method::Algorithm2;
  if (s == "ProjectedLandweber") return Method::ProjectedLandweber;
  if (s == "DualProjectedLandweber") return Method::DualProjectedLandweber;
  throw ConfigError("unknown method '" + s + "'");
}

const char* to_string(Method m) {
  switch (m) {
    case Method::Algorithm1: return "Algorithm1";
    case Method::Algorithm2: return "Algorithm2";
    case Method::ProjectedLandweber: return "ProjectedLandweber";
    case Method::DualProjectedLandweber: return "DualProjectedLandweber";
  }
  return "?";
}

const char* to_string(StopReason r) {
  switch (r) {
    case StopReason::DiscrepancyMet: return "DiscrepancyMet";
    case StopReason::APrioriReached: return "APrioriReached";
    case StopReason::MaxIterations: return "MaxIterations";
  }
  return "?";
}

SolveReport run_solver(const SolverConfig& cfg, const InverseProblem& p, const StoppingRule& stop,
                       const RunOptions& opts) {
  const auto wall0 = std::chrono::steady_clock::now();
  const std::clock_t cpu0 = std::clock();

  stop.validate();
  const DenseOperator& a = p.operator_noisy;
  const Index n = a.cols();
  if (p.data_noisy.size() != a.rows()) throw ContractViolation("run_solver: data length mismatch");
  if (cfg.max_iterations < 0) throw ConfigError("run_solver: max_iterations must be >= 0");
  const Vector x0 = cfg.x0.size() == 0 ? Vector::Zero(n) : cfg.x0;
  if (x0.size() != n) throw ContractViolation("run_solver: x0 dimension mismatch");
  if (!x0.allFinite()) throw ContractViolation("run_solver: x0 must be finite");
  if (opts.x_dagger && opts.x_dagger->size() != n)
    throw ContractViolation("run_solver: x_dagger dimension mismatch");

  const bool fixed_point = cfg.method == Method::Algorithm1 || cfg.method == Method::Algorithm2;
  const auto* modified = std::get_if<ModifiedDiscrepancyRule>(&stop.kind);
  const auto* morozov = std::get_if<MorozovRule>(&stop.kind);
  const auto* apriori = std::get_if<APrioriRule>(&stop.kind);
  if ((fixed_point || modified) && !cfg.preconditioner)
    throw ConfigError(std::string("run_solver: ") + to_string(cfg.method) +
                      " with this stopping rule needs a preconditioner");
  if (cfg.preconditioner && cfg.preconditioner->dimension() != n)
    throw ContractViolation("run_solver: preconditioner dimension mismatch");

  if (!fixed_point) {
    const double na = spectral_norm(a);
    if (!(cfg.omega > 0) || (na > 0 && !(cfg.omega < 2.0 / (na * na))))
      throw ConfigError("run_solver: omega must lie in (0, 2/‖A_h‖²)");
  }

  std::int64_t cap = std::min(cfg.max_iterations, stop.n_max);
  bool apriori_cap = false;
  if (apriori) {
    const std::int64_t target = a_priori_k(p.h, p.delta, *apriori);
    if (target <= cap) {
      cap = target;
      apriori_cap = true;
    }
  }

  // Per-run precomputation. The fixed-point map is z ↦ T|z| + c with
  // T = (G + AᵀA)^{-1}(G − AᵀA) and c = 2(G + AᵀA)^{-1}Aᵀy^δ.
  Matrix t, b;
  Vector c, aty;
  if (fixed_point) {
    const Preconditioner& g = *cfg.preconditioner;
    const Matrix ata = a.matrix().transpose() * a.matrix();
    t = resolvent_solve(g, a, Matrix(g.dense() - ata));
    c = resolvent_solve(g, a, Vector(2.0 * apply_adjoint(a, p.data_noisy)));
  } else if (cfg.method == Method::ProjectedLandweber) {
    b = a.matrix().transpose() * a.matrix();
    aty = apply_adjoint(a, p.data_noisy);
  }
  std::optional<ResidualFunctional> functional;
  if (cfg.preconditioner && (cfg.preconditioner->kind() == PreconditionerKind::Scalar || a.rows() == a.cols()))
    functional.emplace(p, *cfg.preconditioner);
  else if (modified)
    throw UnsupportedConfiguration(
        "modified discrepancy with a non-scalar preconditioner needs a square operator");

  const OutputMap out_map =
      cfg.method == Method::Algorithm2 ? cfg.output_map : OutputMap::abs();
  const RelaxationSchedule schedule =
      cfg.method == Method::Algorithm2 ? cfg.schedule : RelaxationSchedule{RelaxationSchedule::Kind::Zero};
  const double xd_norm = opts.x_dagger ? opts.x_dagger->norm() : 0.0;

  SolveReport rep;
  rep.method = cfg.method;
  Vector z, x, w;
  switch (cfg.method) {
    case Method::Algorithm1:
    case Method::Algorithm2:
      z = x0;
      x = output_map(out_map, z);
      break;
    case Method::ProjectedLandweber:
      x = x0.cwiseMax(0.0);
      z = x;
      break;
    case Method::DualProjectedLandweber:
      w = Vector::Zero(a.rows());
      x = Vector::Zero(n);
      z = x;
      break;
  }
  rep.min_entry = x.minCoeff();

  double last_functional = std::numeric_limits<double>::quiet_NaN();
  auto check = [&](std::int64_t k) -> bool {
    if (!z.allFinite())
      throw ConvergenceFailure(std::string(to_string(cfg.method)) + ": iterates became non-finite at k = " +
                                   std::to_string(k),
                               last_functional);
    const Vector abs_z = z.cwiseAbs();
    double res = -1.0;
    if (opts.record_traces || morozov) res = (apply(a, x) - p.data_noisy).norm();
    if (functional && (opts.record_traces || modified)) last_functional = (*functional)(abs_z);
    if (opts.record_traces) {
      rep.residual_history.push_back(res);
      rep.functional_history.push_back(functional ? last_functional : std::numeric_limits<double>::quiet_NaN());
      if (opts.x_dagger) {
        const double e = (x - *opts.x_dagger).norm();
        rep.error_history.push_back(xd_norm > 0 ? e / xd_norm : e);
      }
    }
    if (morozov) return should_stop_morozov(res, *morozov, p.delta, p.h).stop;
    if (modified) {
      auto d = should_stop_modified(last_functional, *modified, p.delta, p.h, *cfg.preconditioner);
      rep.threshold = d.threshold;
      return d.stop;
    }
    return false;
  };

  std::int64_t k = 0;
  bool met = check(0);
  while (!met && k < cap) {
    switch (cfg.method) {
      case Method::Algorithm1:
      case Method::Algorithm2: {
        const double alpha = relaxation(schedule, k + 1);
        Vector u = t * z.cwiseAbs() + c;
        z = alpha * x0 + (1.0 - alpha) * u;
        x = output_map(out_map, z);
        break;
      }
      case Method::ProjectedLandweber:
        x = (x + cfg.omega * (aty - b * x)).cwiseMax(0.0);
        z = x;
        break;
      case Method::DualProjectedLandweber:
        w += cfg.omega * (p.data_noisy - apply(a, x));
        x = apply_adjoint(a, w).cwiseMax(0.0);
        z = x;
        break;
    }
    ++k;
    rep.min_entry = std::min(rep.min_entry, x.minCoeff());
    met = check(k);
  }

  rep.k_star = k;
  if (met)
    rep.stop_reason = StopReason::DiscrepancyMet;
  else if (apriori_cap && k == cap)
    rep.stop_reason = StopReason::APrioriReached;
  else
    rep.stop_reason = StopReason::MaxIterations;
  rep.x = x;
  rep.z = z;
  rep.residual = (apply(a, x) - p.data_noisy).norm();
  if (functional) rep.preconditioned_residual = (*functional)(z.cwiseAbs());
  if (modified) {
    rep.threshold =
        should_stop_modified(*rep.preconditioned_residual, *modified, p.delta, p.h, *cfg.preconditioner)
            .threshold;
  } else if (morozov) {
    rep.threshold = morozov->tau0 * (p.h + p.delta);
  }
  if (opts.x_dagger) {
    const double e = (x - *opts.x_dagger).norm();
    rep.l2err = xd_norm > 0 ? e / xd_norm : e;
  }
  rep.cpu_time = static_cast<double>(std::clock() - cpu0) / CLOCKS_PER_SEC;
  rep.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();
  return rep;
}

}  // namespace nnreg
