#include "nnreg/analysis.hpp"

#include "nnreg/errors.hpp"
#include "nnreg/random.hpp"
#include "nnreg/solvers.hpp"
#include "nnreg/stopping.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace nnreg {

SpectralDecomposition eigendecompose(const DenseOperator& op) {
  if (op.cols() > 256) throw ContractViolation("eigendecompose: size cap (256) exceeded");
  const Matrix b = op.matrix().transpose() * op.matrix();
  Eigen::SelfAdjointEigenSolver<Matrix> es(b);
  if (es.info() != Eigen::Success) throw InvariantViolation("eigendecompose: solver failed");
  const Index n = b.rows();
  SpectralDecomposition d;
  d.eigenvalues.resize(n);
  d.eigenvectors.resize(n, n);
  for (Index i = 0; i < n; ++i) {
    d.eigenvalues[i] = std::max(0.0, es.eigenvalues()[n - 1 - i]);
    d.eigenvectors.col(i) = es.eigenvectors().col(n - 1 - i);
  }
  return d;
}

Vector gk_apply(const SpectralDecomposition& dec, double mu, std::int64_t k, const Vector& x) {
  if (!(mu > 0)) throw ContractViolation("gk_apply: mu must be > 0");
  if (k < 0) throw ContractViolation("gk_apply: k must be >= 0");
  if (x.size() != dec.eigenvalues.size()) throw ContractViolation("gk_apply: dimension mismatch");
  if (k == 0) return x;
  Vector c = dec.eigenvectors.transpose() * x;
  for (Index j = 0; j < c.size(); ++j) {
    const double l = dec.eigenvalues[j];
    c[j] *= std::pow((mu - l) / (mu + l), static_cast<double>(k));
  }
  return dec.eigenvectors * c;
}

double phi_eval(SourceKind kind, double param, double lambda) {
  if (!(lambda > 0)) throw DomainError("phi_eval: lambda must be > 0");
  if (!(param > 0)) throw DomainError("phi_eval: index parameter must be > 0");
  if (kind == SourceKind::Holder) return std::pow(lambda, param);
  const double nu = param;
  if (lambda <= std::exp(-2 * nu - 1)) return std::pow(std::log(1.0 / lambda), -nu);
  return std::pow(2 * nu + 1, -nu - 0.5) * std::sqrt(2 * nu * std::exp(2 * nu + 1) * lambda + 1);
}

SourceProblem build_source_problem(const SpectralDecomposition& dec, const SourceSpec& spec,
                                   const Vector& x0) {
  const Index n = dec.eigenvalues.size();
  if (spec.v.size() != n || x0.size() != n) throw ContractViolation("build_source_problem: dimension mismatch");
  if (!spec.v.allFinite()) throw ContractViolation("build_source_problem: v must be finite");
  Vector c = dec.eigenvectors.transpose() * spec.v;
  for (Index j = 0; j < n; ++j) {
    const double l = dec.eigenvalues[j];
    c[j] *= l > 0 ? phi_eval(spec.kind, spec.param, l) : 0.0;  // φ(0⁺) = 0 for both families
  }
  SourceProblem sp;
  sp.x_dagger = x0 - dec.eigenvectors * c;
  sp.valid = sp.x_dagger.minCoeff() >= 0;
  return sp;
}

bool qualification_bound_check(double p, double mu, const std::vector<std::int64_t>& k_list) {
  if (!(p > 0) || !(mu > 0)) throw ContractViolation("qualification_bound_check: need p > 0, mu > 0");
  constexpr int points = 10000;
  const double lo = std::log(1e-10 * mu), hi = std::log(mu);
  for (std::int64_t k : k_list) {
    if (k < 1) throw ContractViolation("qualification_bound_check: k must be >= 1");
    const double kk = static_cast<double>(k);
    const double bound = std::pow(p * mu / 2, p) * std::pow(kk, -p);
    double mx = 0;
    for (int i = 0; i < points; ++i) {
      const double l = std::exp(lo + (hi - lo) * i / (points - 1));
      mx = std::max(mx, std::pow(l, p) * std::pow((mu - l) / (mu + l), kk));
    }
    if (mx > bound * (1 + 1e-9)) return false;
  }
  return true;
}

namespace {

Matrix contraction(const Matrix& a, const Matrix& g) {
  const Matrix ata = a.transpose() * a;
  Eigen::LLT<Matrix> llt(g + ata);
  if (llt.info() != Eigen::Success) throw InvariantViolation("contraction: factorization failed");
  return llt.solve(Matrix(g - ata));
}

Matrix regularized_inverse(const Matrix& a, const Matrix& g) {
  Eigen::LLT<Matrix> llt(g + a.transpose() * a);
  if (llt.info() != Eigen::Success) throw InvariantViolation("regularized_inverse: factorization failed");
  return llt.solve(Matrix(a.transpose()));
}

double sym_norm(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace

PerturbationBounds perturbation_constants(const DenseOperator& a, const Preconditioner& g, int probes,
                                          std::uint64_t seed) {
  if (g.dimension() != a.cols()) throw ContractViolation("perturbation_constants: dimension mismatch");
  const double na = spectral_norm(a);
  if (na == 0) throw ContractViolation("perturbation_constants: operator must be nonzero");
  const Matrix gd = g.dense();
  const double nm = sym_norm(gd + a.matrix().transpose() * a.matrix());
  PerturbationBounds b;
  b.c1 = 12 * na / nm;
  b.h0 = 0.5 * std::min(na, nm / (3 * na));
  const Matrix r0 = regularized_inverse(a.matrix(), gd);
  Rng rng = Rng::child(seed, "perturbation");
  for (int i = 0; i < probes; ++i) {
    Matrix e(a.rows(), a.cols());
    for (Index c = 0; c < e.cols(); ++c)
      for (Index r = 0; r < e.rows(); ++r) e(r, c) = rng.normal();
    e *= b.h0 / spectral_norm(e);
    const Matrix d = regularized_inverse(a.matrix() + e, gd) - r0;
    b.c2 = std::max(b.c2, spectral_norm(d) / b.h0);
  }
  return b;
}

double contraction_sensitivity(const DenseOperator& a, const DenseOperator& a_h, const Preconditioner& g) {
  if (a.rows() != a_h.rows() || a.cols() != a_h.cols() || g.dimension() != a.cols())
    throw ContractViolation("contraction_sensitivity: dimension mismatch");
  const Matrix gd = g.dense();
  return spectral_norm(Matrix(contraction(a_h.matrix(), gd) - contraction(a.matrix(), gd)));
}

double fixed_point_residual(const Vector& z, const InverseProblem& p, const Preconditioner& g) {
  const DenseOperator& a = p.operator_exact && p.data_exact ? *p.operator_exact : p.operator_noisy;
  const Vector& y = p.operator_exact && p.data_exact ? *p.data_exact : p.data_noisy;
  if (z.size() != a.cols()) throw ContractViolation("fixed_point_residual: dimension mismatch");
  const Vector az = z.cwiseAbs();
  const Vector rhs = g.apply(az) - apply_adjoint(a, apply(a, az)) + 2.0 * apply_adjoint(a, y);
  return (z - resolvent_solve(g, a, rhs)).norm();
}

Vector nnls_bruteforce(const DenseOperator& a, const Vector& y, const Vector& x0) {
  const Index n = a.cols();
  if (n > 12) throw ContractViolation("nnls_bruteforce: at most 12 columns (size cap exceeded)");
  if (y.size() != a.rows() || x0.size() != n) throw ContractViolation("nnls_bruteforce: dimension mismatch");
  const Matrix& am = a.matrix();

  struct Cand {
    Vector x;
    double res, dist;
    std::vector<Index> support;
  };
  std::vector<Cand> cands;
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    std::vector<Index> s;
    for (Index j = 0; j < n; ++j)
      if (mask & (1u << j)) s.push_back(j);
    Vector x = Vector::Zero(n);
    if (!s.empty()) {
      Matrix as(am.rows(), static_cast<Index>(s.size()));
      Vector x0s(static_cast<Index>(s.size()));
      for (std::size_t c = 0; c < s.size(); ++c) {
        as.col(static_cast<Index>(c)) = am.col(s[c]);
        x0s[static_cast<Index>(c)] = x0[s[c]];
      }
      const Vector d = Eigen::CompleteOrthogonalDecomposition<Matrix>(as).solve(Vector(y - as * x0s));
      for (std::size_t c = 0; c < s.size(); ++c) x[s[c]] = x0s[static_cast<Index>(c)] + d[static_cast<Index>(c)];
    }
    if (x.minCoeff() < -1e-12) continue;
    x = x.cwiseMax(0.0);
    const Vector r = am.transpose() * (am * x - y);
    if (r.minCoeff() < -1e-10 || std::abs(x.dot(r)) > 1e-10) continue;
    cands.push_back({x, (am * x - y).norm(), (x - x0).norm(), s});
  }
  if (cands.empty()) throw InvariantViolation("nnls_bruteforce: no KKT point found");

  double best_res = cands[0].res;
  for (const auto& c : cands) best_res = std::min(best_res, c.res);
  const double res_tol = best_res * (1 + 1e-9) + 1e-12;
  double best_dist = -1;
  for (const auto& c : cands)
    if (c.res <= res_tol && (best_dist < 0 || c.dist < best_dist)) best_dist = c.dist;
  const double dist_tol = best_dist * (1 + 1e-9) + 1e-12;
  const Cand* pick = nullptr;
  for (const auto& c : cands) {
    if (c.res > res_tol || c.dist > dist_tol) continue;
    if (!pick || c.support < pick->support) pick = &c;
  }
  return pick->x;
}

double rate_fit(const std::vector<double>& noise, const std::vector<double>& errors) {
  if (noise.size() != errors.size()) throw ContractViolation("rate_fit: length mismatch");
  if (noise.size() < 3) throw ContractViolation("rate_fit: need at least 3 points");
  const std::size_t n = noise.size();
  double sx = 0, sy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(noise[i] > 0) || !(errors[i] > 0)) throw DomainError("rate_fit: inputs must be positive");
    sx += std::log(noise[i]);
    sy += std::log(errors[i]);
  }
  const double mx = sx / n, my = sy / n;
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = std::log(noise[i]) - mx;
    sxy += dx * (std::log(errors[i]) - my);
    sxx += dx * dx;
  }
  if (sxx == 0) throw DomainError("rate_fit: noise levels must not all be equal");
  return sxy / sxx;
}

double harmonic_alpha_partial_sup(std::int64_t k_max) {
  double s = 0, sup = 0;
  for (std::int64_t k = 1; k <= k_max; ++k) {
    const double a = 1.0 / static_cast<double>(k + 1);
    s = s * (1 - a) + a;
    sup = std::max(sup, s);
  }
  return sup;
}

RateStudyResult run_rate_study(const RateStudyConfig& cfg) {
  if (cfg.n < 1) throw ConfigError("rate study: n must be >= 1");
  if (!(cfg.mu > 0)) throw ConfigError("rate study: mu must be > 0");
  if (!(cfg.param > 0)) throw ConfigError("rate study: source parameter must be > 0");
  std::vector<double> deltas;
  for (double d : cfg.deltas)
    if (d > 0) deltas.push_back(d);
  if (deltas.size() < 3) throw ConfigError("rate study: need at least 3 positive noise levels");

  const Index n = cfg.n;
  Vector sigma(n);
  for (Index j = 0; j < n; ++j) sigma[j] = std::pow(static_cast<double>(j + 1), -cfg.lambda_decay / 2);
  const DenseOperator a(Matrix(sigma.asDiagonal()));
  const SpectralDecomposition dec = eigendecompose(a);
  const Vector x0 = Vector::Ones(n);
  const SourceProblem sp = build_source_problem(dec, {cfg.kind, cfg.param, Vector::Constant(n, cfg.v_scale)}, x0);
  if (!sp.valid) throw ConfigError("rate study: source gives a negative exact solution; reduce v_scale");
  const Vector y = apply(a, sp.x_dagger);

  APrioriRule rule;
  const double dmin = *std::min_element(deltas.begin(), deltas.end());
  const double lmin = dec.eigenvalues.minCoeff();
  if (cfg.kind == SourceKind::Holder) {
    rule.kind = APrioriRule::Kind::Holder;
    rule.exponent = cfg.param;
  } else {
    rule.kind = APrioriRule::Kind::Log;
    rule.exponent = cfg.log_exponent;
  }
  const double rate_exp = cfg.kind == SourceKind::Holder ? 1.0 / (cfg.param + 1) : cfg.log_exponent;
  rule.scale = cfg.scale > 0 ? cfg.scale : std::pow(dmin, rate_exp) / (2 * lmin);

  SolverConfig sc;
  sc.method = Method::Algorithm1;
  sc.preconditioner = Preconditioner::scalar(cfg.mu, n);
  sc.x0 = x0;

  RateStudyResult out;
  out.scale = rule.scale;
  out.expected_slope = cfg.kind == SourceKind::Holder ? cfg.param / (cfg.param + 1) : 0.0;
  std::vector<double> ns, es;
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    Rng rng = Rng::child(cfg.seed, "noise:" + std::to_string(i));
    Vector eta(n);
    for (Index j = 0; j < n; ++j) eta[j] = rng.normal();
    eta *= deltas[i] / eta.norm();
    InverseProblem p{a, a, y, y + eta, 0.0, deltas[i]};
    StoppingRule stop{rule, std::numeric_limits<std::int64_t>::max()};
    RunOptions opts;
    opts.x_dagger = sp.x_dagger;
    const SolveReport rep = run_solver(sc, p, stop, opts);
    out.rows.push_back({deltas[i], (rep.x - sp.x_dagger).norm(), rep.k_star});
    ns.push_back(deltas[i]);
    es.push_back(out.rows.back().error);
  }
  out.slope = rate_fit(ns, es);
  return out;
}

}  // namespace nnreg
