#pragma once

#include "nnreg/operators.hpp"
#include "nnreg/problem.hpp"

#include <cstdint>
#include <vector>

namespace nnreg {

/// Eigenpairs of opᵀop, eigenvalues descending.
struct SpectralDecomposition {
  Vector eigenvalues;
  Matrix eigenvectors;
};

SpectralDecomposition eigendecompose(const DenseOperator& op);

/// Σ_j ((μ−λ_j)/(μ+λ_j))^k ⟨x,u_j⟩u_j
Vector gk_apply(const SpectralDecomposition& dec, double mu, std::int64_t k, const Vector& x);

enum class SourceKind { Holder, Logarithmic };

struct SourceSpec {
  SourceKind kind = SourceKind::Holder;
  double param = 1.0;  // p or ν
  Vector v;
};

/// Hölder λ^p, or the two-branch logarithmic index function.
double phi_eval(SourceKind kind, double param, double lambda);

struct SourceProblem {
  Vector x_dagger;
  bool valid = false;
};

/// x† = x0 − φ(opᵀop)v; valid iff x† ≥ 0.
SourceProblem build_source_problem(const SpectralDecomposition& dec, const SourceSpec& spec,
                                   const Vector& x0);

/// Checks max over λ ∈ (0, μ] of λ^p((μ−λ)/(μ+λ))^k against (pμ/2)^p k^{−p}.
/// The grid is 10⁴ log-spaced points on [1e-10·μ, μ].
bool qualification_bound_check(double p, double mu, const std::vector<std::int64_t>& k_list);

struct PerturbationBounds {
  double c1 = 0;
  double c2 = 0;  // empirical estimate
  double h0 = 0;
};

/// c1 = 12‖A‖/‖G+AᵀA‖, h0 = min(‖A‖, ‖G+AᵀA‖/(3‖A‖))/2. c2 is the largest
/// ratio ‖(G+A_hᵀA_h)^{-1}A_hᵀ − (G+AᵀA)^{-1}Aᵀ‖/h seen over `probes` random
/// perturbations of norm h0.
PerturbationBounds perturbation_constants(const DenseOperator& a, const Preconditioner& g,
                                          int probes = 20, std::uint64_t seed = 1);

/// ‖(G+A_hᵀA_h)^{-1}(G−A_hᵀA_h) − (G+AᵀA)^{-1}(G−AᵀA)‖₂
double contraction_sensitivity(const DenseOperator& a, const DenseOperator& a_h,
                               const Preconditioner& g);

/// ‖z − T(z)‖ with T the fixed-point map. Uses exact (A, y) when present.
double fixed_point_residual(const Vector& z, const InverseProblem& p, const Preconditioner& g);

/// Non-negative least squares by support enumeration (cols ≤ 12). Among
/// minimal-residual KKT points returns the one closest to x0.
Vector nnls_bruteforce(const DenseOperator& a, const Vector& y, const Vector& x0);

/// Least-squares slope of log(error) against log(noise).
double rate_fit(const std::vector<double>& noise, const std::vector<double>& errors);

/// sup_{k ≤ k_max} Σ_{i≤k} α_i ∏_{i<j≤k}(1−α_j) for α_k = 1/(k+1).
double harmonic_alpha_partial_sup(std::int64_t k_max);

struct RateStudyConfig {
  int n = 32;
  double lambda_decay = 2.0;  // λ_j = j^{−decay}
  double mu = 1.0;
  SourceKind kind = SourceKind::Holder;
  double param = 1.0;
  std::vector<double> deltas;
  /// A-priori scale; ≤ 0 picks the scale that puts the index at the
  /// smallest δ at 1/(2λ_min).
  double scale = 0.0;
  /// Exponent a of the logarithmic a-priori rule.
  double log_exponent = 0.5;
  /// v = v_scale·(1,…,1); must keep x† = x0 − φ(Λ)v non-negative.
  double v_scale = 1.0;
  std::uint64_t seed = 1;
};

struct RateStudyRow {
  double noise = 0;
  double error = 0;
  std::int64_t k_star = 0;
};

struct RateStudyResult {
  std::vector<RateStudyRow> rows;
  double slope = 0;
  double scale = 0;
  double expected_slope = 0;  // p/(p+1) for Hölder, 0 for logarithmic
};

/// Diagonal operator with spectrum λ_j, x0 = 1, constant v, data noise of exact
/// norm δ along a seeded random direction, h = 0, a-priori stopping.
/// Zero noise levels are dropped.
RateStudyResult run_rate_study(const RateStudyConfig& cfg);

}  // namespace nnreg
