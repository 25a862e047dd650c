#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <memory>
#include <string_view>

namespace nnreg {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Content hash of a dense matrix (shape and raw bits).
std::uint64_t fingerprint(const Matrix& m);

/// Immutable dense operator. Entries must be finite.
class DenseOperator {
 public:
  explicit DenseOperator(Matrix m);

  Index rows() const { return m_.rows(); }
  Index cols() const { return m_.cols(); }
  const Matrix& matrix() const { return m_; }
  std::uint64_t fingerprint() const { return fp_; }

 private:
  Matrix m_;
  std::uint64_t fp_;
};

Vector apply(const DenseOperator& op, const Vector& x);
Vector apply_adjoint(const DenseOperator& op, const Vector& y);

struct PowerIterationConfig {
  double tolerance = 1e-13;
  int max_iterations = 200000;
  std::uint64_t seed = 0x9a1f5eedULL;
};

/// Largest singular value by power iteration on opᵀop. A zero matrix
/// returns 0.
double spectral_norm(const DenseOperator& op, const PowerIterationConfig& cfg = {});
double spectral_norm(const Matrix& m, const PowerIterationConfig& cfg = {});

double operator_distance(const DenseOperator& a, const DenseOperator& b,
                         const PowerIterationConfig& cfg = {});

enum class PreconditionerKind { Scalar, Diagonal, Spd };

/// The operator G of the fixed-point iteration, together with lazily built
/// Cholesky factors of G + AᵀA (model space) and G̃ + AAᵀ (data space).
/// Copies share the factor cache. Filling the cache is thread safe; two
/// threads may both compute a factor, the first insert wins.
class Preconditioner {
 public:
  static Preconditioner scalar(double mu, Index n);
  static Preconditioner diagonal(Vector d);
  static Preconditioner spd(Matrix g);

  PreconditionerKind kind() const { return kind_; }
  Index dimension() const { return n_; }
  double mu() const;  // Scalar kind only
  const Vector& eigenvalues() const { return eig_; }  // ascending
  Matrix dense() const;
  Vector apply(const Vector& x) const;
  /// G^{1/2} r
  Vector sqrt_apply(const Vector& r) const;
  /// ‖G^{1/2}‖₂
  double sqrt_norm() const;
  std::uint64_t fingerprint() const { return fp_; }

  using Factor = Eigen::LLT<Matrix>;
  std::shared_ptr<const Factor> model_factor(const DenseOperator& op) const;
  std::shared_ptr<const Factor> data_factor(const DenseOperator& op) const;

 private:
  struct Cache;
  Preconditioner() = default;
  void finish();

  PreconditionerKind kind_ = PreconditionerKind::Scalar;
  Index n_ = 0;
  double mu_ = 0.0;
  Vector diag_;
  Matrix mat_;
  Vector eig_;
  Matrix eigvec_;
  std::uint64_t fp_ = 0;
  std::shared_ptr<Cache> cache_;
};

enum class CatalogId { G1, G2, G3, G4, G5, G6, G7, G8 };

CatalogId parse_catalog_id(std::string_view s);
const char* to_string(CatalogId id);

/// G1-G4: scalar multiples of lambda_max. G5/G6: random diagonal with
/// minimum entry a and the rest uniform in [a, n·a]. G7/G8: U·G5/G6·Uᵀ with a
/// random orthogonal U. Deterministic per seed.
Preconditioner make_preconditioner(CatalogId id, Index n, double lambda_max,
                                   std::uint64_t seed);

/// Solves (G + opᵀop) z = rhs with one refinement step.
Vector resolvent_solve(const Preconditioner& g, const DenseOperator& op, const Vector& rhs);
Matrix resolvent_solve(const Preconditioner& g, const DenseOperator& op, const Matrix& rhs);

/// (G̃ + op·opᵀ)^{-1} r with G̃ = μI for scalar G and G̃ = G for square systems.
Vector companion_resolvent_apply(const Preconditioner& g, const DenseOperator& op,
                                 const Vector& r);
Matrix companion_resolvent_apply(const Preconditioner& g, const DenseOperator& op,
                                 const Matrix& r);

}  // namespace nnreg
