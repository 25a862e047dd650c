#include "nnreg/operators.hpp"

#include "nnreg/errors.hpp"
#include "nnreg/random.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <mutex>
#include <string>

namespace nnreg {

std::uint64_t fingerprint(const Matrix& m) {
  std::uint64_t h = splitmix64(static_cast<std::uint64_t>(m.rows()) * 0x100000001ULL +
                               static_cast<std::uint64_t>(m.cols()));
  const double* p = m.data();
  for (Index i = 0; i < m.size(); ++i) {
    std::uint64_t bits;
    std::memcpy(&bits, p + i, sizeof bits);
    h = splitmix64(h ^ bits);
  }
  return h;
}

DenseOperator::DenseOperator(Matrix m) : m_(std::move(m)) {
  if (m_.rows() < 1 || m_.cols() < 1) throw ContractViolation("DenseOperator: empty matrix");
  if (!m_.allFinite()) throw InvariantViolation("DenseOperator: non-finite entry");
  fp_ = nnreg::fingerprint(m_);
}

Vector apply(const DenseOperator& op, const Vector& x) {
  if (x.size() != op.cols())
    throw ContractViolation("apply: expected length " + std::to_string(op.cols()) + ", got " +
                            std::to_string(x.size()));
  return op.matrix() * x;
}

Vector apply_adjoint(const DenseOperator& op, const Vector& y) {
  if (y.size() != op.rows())
    throw ContractViolation("apply_adjoint: expected length " + std::to_string(op.rows()) +
                            ", got " + std::to_string(y.size()));
  return op.matrix().transpose() * y;
}

double spectral_norm(const Matrix& m, const PowerIterationConfig& cfg) {
  if (cfg.tolerance <= 0 || cfg.max_iterations < 1)
    throw ContractViolation("spectral_norm: bad power iteration config");
  if (m.size() == 0 || m.cwiseAbs().maxCoeff() == 0.0) return 0.0;

  Rng rng = Rng::child(cfg.seed, "power");
  Vector v(m.cols());
  for (Index i = 0; i < v.size(); ++i) v[i] = rng.normal();
  v.normalize();

  double lam = 0.0;
  for (int it = 0; it < cfg.max_iterations; ++it) {
    Vector w = m.transpose() * (m * v);
    const double next = v.dot(w);  // Rayleigh quotient of mᵀm
    const double nw = w.norm();
    if (nw == 0.0) {
      // start vector in the null space; restart from a fresh draw
      for (Index i = 0; i < v.size(); ++i) v[i] = rng.normal();
      v.normalize();
      continue;
    }
    v = w / nw;
    if (it > 0 && std::abs(next - lam) <= cfg.tolerance * next) return std::sqrt(next);
    lam = next;
  }
  throw ConvergenceFailure("spectral_norm: power iteration did not converge", std::sqrt(lam));
}

double spectral_norm(const DenseOperator& op, const PowerIterationConfig& cfg) {
  return spectral_norm(op.matrix(), cfg);
}

double operator_distance(const DenseOperator& a, const DenseOperator& b,
                         const PowerIterationConfig& cfg) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ContractViolation("operator_distance: shape mismatch");
  return spectral_norm(Matrix(a.matrix() - b.matrix()), cfg);
}

// ---------------------------------------------------------------------------

struct Preconditioner::Cache {
  std::mutex mu;
  std::map<std::uint64_t, std::shared_ptr<const Factor>> model;
  std::map<std::uint64_t, std::shared_ptr<const Factor>> data;
};

Preconditioner Preconditioner::scalar(double mu, Index n) {
  if (!(mu > 0) || !std::isfinite(mu)) throw InvariantViolation("scalar preconditioner: mu must be > 0");
  if (n < 1) throw ContractViolation("preconditioner dimension must be >= 1");
  Preconditioner g;
  g.kind_ = PreconditionerKind::Scalar;
  g.n_ = n;
  g.mu_ = mu;
  g.finish();
  return g;
}

Preconditioner Preconditioner::diagonal(Vector d) {
  if (d.size() < 1) throw ContractViolation("preconditioner dimension must be >= 1");
  if (!d.allFinite() || d.minCoeff() <= 0)
    throw InvariantViolation("diagonal preconditioner: entries must be > 0");
  Preconditioner g;
  g.kind_ = PreconditionerKind::Diagonal;
  g.n_ = d.size();
  g.diag_ = std::move(d);
  g.finish();
  return g;
}

Preconditioner Preconditioner::spd(Matrix m) {
  if (m.rows() < 1 || m.rows() != m.cols()) throw ContractViolation("SPD preconditioner must be square");
  if (!m.allFinite()) throw InvariantViolation("SPD preconditioner: non-finite entry");
  const double scale = m.cwiseAbs().maxCoeff();
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw InvariantViolation("SPD preconditioner: matrix is not symmetric");
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success) throw InvariantViolation("SPD preconditioner: not positive definite");
  Preconditioner g;
  g.kind_ = PreconditionerKind::Spd;
  g.n_ = m.rows();
  g.mat_ = std::move(m);
  g.finish();
  if (g.eig_.minCoeff() <= 0) throw InvariantViolation("SPD preconditioner: not positive definite");
  return g;
}

void Preconditioner::finish() {
  switch (kind_) {
    case PreconditionerKind::Scalar:
      eig_ = Vector::Constant(n_, mu_);
      fp_ = splitmix64(fnv1a("scalar") ^ static_cast<std::uint64_t>(n_)) ^
            nnreg::fingerprint(Matrix(Matrix::Constant(1, 1, mu_)));
      break;
    case PreconditionerKind::Diagonal: {
      eig_ = diag_;
      std::sort(eig_.data(), eig_.data() + eig_.size());
      fp_ = splitmix64(fnv1a("diag")) ^ nnreg::fingerprint(Matrix(diag_));
      break;
    }
    case PreconditionerKind::Spd: {
      Eigen::SelfAdjointEigenSolver<Matrix> es(mat_);
      eig_ = es.eigenvalues();
      eigvec_ = es.eigenvectors();
      fp_ = splitmix64(fnv1a("spd")) ^ nnreg::fingerprint(mat_);
      break;
    }
  }
  cache_ = std::make_shared<Cache>();
}

double Preconditioner::mu() const {
  if (kind_ != PreconditionerKind::Scalar) throw ContractViolation("mu() on a non-scalar preconditioner");
  return mu_;
}

Matrix Preconditioner::dense() const {
  switch (kind_) {
    case PreconditionerKind::Scalar: return mu_ * Matrix::Identity(n_, n_);
    case PreconditionerKind::Diagonal: return diag_.asDiagonal();
    case PreconditionerKind::Spd: return mat_;
  }
  return {};
}

Vector Preconditioner::apply(const Vector& x) const {
  if (x.size() != n_) throw ContractViolation("Preconditioner::apply: dimension mismatch");
  switch (kind_) {
    case PreconditionerKind::Scalar: return mu_ * x;
    case PreconditionerKind::Diagonal: return diag_.cwiseProduct(x);
    case PreconditionerKind::Spd: return mat_ * x;
  }
  return {};
}

Vector Preconditioner::sqrt_apply(const Vector& r) const {
  if (r.size() != n_) throw ContractViolation("Preconditioner::sqrt_apply: dimension mismatch");
  switch (kind_) {
    case PreconditionerKind::Scalar: return std::sqrt(mu_) * r;
    case PreconditionerKind::Diagonal: return diag_.cwiseSqrt().cwiseProduct(r);
    case PreconditionerKind::Spd:
      return eigvec_ * eig_.cwiseSqrt().cwiseProduct(eigvec_.transpose() * r);
  }
  return {};
}

double Preconditioner::sqrt_norm() const { return std::sqrt(eig_.maxCoeff()); }

namespace {

std::shared_ptr<const Preconditioner::Factor> cached(
    std::mutex& mu, std::map<std::uint64_t, std::shared_ptr<const Preconditioner::Factor>>& slot,
    std::uint64_t key, const auto& build) {
  {
    std::lock_guard lock(mu);
    auto it = slot.find(key);
    if (it != slot.end()) return it->second;
  }
  auto f = std::make_shared<const Preconditioner::Factor>(build());
  if (f->info() != Eigen::Success) throw InvariantViolation("resolvent factorization failed");
  std::lock_guard lock(mu);
  auto [it, inserted] = slot.emplace(key, f);
  return it->second;
}

}  // namespace

std::shared_ptr<const Preconditioner::Factor> Preconditioner::model_factor(
    const DenseOperator& op) const {
  if (op.cols() != n_) throw ContractViolation("model_factor: preconditioner/operator dimension mismatch");
  return cached(cache_->mu, cache_->model, op.fingerprint(), [&] {
    Matrix m = op.matrix().transpose() * op.matrix();
    if (kind_ == PreconditionerKind::Scalar)
      m.diagonal().array() += mu_;
    else
      m += dense();
    return Factor(m);
  });
}

std::shared_ptr<const Preconditioner::Factor> Preconditioner::data_factor(
    const DenseOperator& op) const {
  if (kind_ != PreconditionerKind::Scalar && op.rows() != op.cols())
    throw UnsupportedConfiguration(
        "data-space resolvent with a non-scalar preconditioner needs a square operator");
  if (kind_ != PreconditionerKind::Scalar && op.rows() != n_)
    throw ContractViolation("data_factor: preconditioner/operator dimension mismatch");
  return cached(cache_->mu, cache_->data, op.fingerprint(), [&] {
    Matrix m = op.matrix() * op.matrix().transpose();
    if (kind_ == PreconditionerKind::Scalar)
      m.diagonal().array() += mu_;
    else
      m += dense();
    return Factor(m);
  });
}

// ---------------------------------------------------------------------------

CatalogId parse_catalog_id(std::string_view s) {
  static constexpr const char* names[] = {"G1", "G2", "G3", "G4", "G5", "G6", "G7", "G8"};
  for (int i = 0; i < 8; ++i)
    if (s == names[i]) return static_cast<CatalogId>(i);
  throw ConfigError("unknown preconditioner catalog id '" + std::string(s) + "'");
}

const char* to_string(CatalogId id) {
  static constexpr const char* names[] = {"G1", "G2", "G3", "G4", "G5", "G6", "G7", "G8"};
  return names[static_cast<int>(id)];
}

namespace {

Vector random_diagonal(Index n, double a, std::uint64_t seed) {
  Rng rng = Rng::child(seed, "diag");
  Vector d(n);
  d[0] = a;
  for (Index i = 1; i < n; ++i) d[i] = rng.uniform(a, static_cast<double>(n) * a);
  return d;
}

Matrix random_orthogonal(Index n, std::uint64_t seed) {
  Rng rng = Rng::child(seed, "orth");
  Matrix g(n, n);
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < n; ++i) g(i, j) = rng.normal();
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ();
  const Matrix& r = qr.matrixQR();
  for (Index j = 0; j < n; ++j)
    if (r(j, j) < 0) q.col(j) = -q.col(j);
  return q;
}

}  // namespace

Preconditioner make_preconditioner(CatalogId id, Index n, double lambda_max, std::uint64_t seed) {
  if (n < 1) throw ContractViolation("make_preconditioner: n must be >= 1");
  if (!(lambda_max > 0)) throw ContractViolation("make_preconditioner: lambda_max must be > 0");
  switch (id) {
    case CatalogId::G1: return Preconditioner::scalar(1e-6 * lambda_max, n);
    case CatalogId::G2: return Preconditioner::scalar(1e-4 * lambda_max, n);
    case CatalogId::G3: return Preconditioner::scalar(1e-3 * lambda_max, n);
    case CatalogId::G4: return Preconditioner::scalar(1e-2 * lambda_max, n);
    case CatalogId::G5: return Preconditioner::diagonal(random_diagonal(n, 1e-4 * lambda_max, seed));
    case CatalogId::G6: return Preconditioner::diagonal(random_diagonal(n, 1e-3 * lambda_max, seed));
    case CatalogId::G7:
    case CatalogId::G8: {
      const double a = (id == CatalogId::G7 ? 1e-4 : 1e-3) * lambda_max;
      const Vector d = random_diagonal(n, a, seed);
      const Matrix u = random_orthogonal(n, seed);
      Matrix g = u * d.asDiagonal() * u.transpose();
      g = 0.5 * (g + g.transpose()).eval();
      return Preconditioner::spd(std::move(g));
    }
  }
  throw ConfigError("unknown preconditioner catalog id");
}

namespace {

Matrix model_product(const Preconditioner& g, const DenseOperator& op, const Matrix& z) {
  return g.dense() * z + op.matrix().transpose() * (op.matrix() * z);
}

Matrix data_product(const Preconditioner& g, const DenseOperator& op, const Matrix& w) {
  Matrix gw = g.kind() == PreconditionerKind::Scalar ? Matrix(g.mu() * w) : Matrix(g.dense() * w);
  return gw + op.matrix() * (op.matrix().transpose() * w);
}

}  // namespace

Matrix resolvent_solve(const Preconditioner& g, const DenseOperator& op, const Matrix& rhs) {
  if (g.dimension() != op.cols() || rhs.rows() != op.cols())
    throw ContractViolation("resolvent_solve: dimension mismatch");
  auto f = g.model_factor(op);
  Matrix z = f->solve(rhs);
  z += f->solve(rhs - model_product(g, op, z));
  return z;
}

Vector resolvent_solve(const Preconditioner& g, const DenseOperator& op, const Vector& rhs) {
  return resolvent_solve(g, op, Matrix(rhs)).col(0);
}

Matrix companion_resolvent_apply(const Preconditioner& g, const DenseOperator& op,
                                 const Matrix& r) {
  if (r.rows() != op.rows()) throw ContractViolation("companion_resolvent_apply: dimension mismatch");
  auto f = g.data_factor(op);
  Matrix w = f->solve(r);
  w += f->solve(r - data_product(g, op, w));
  return w;
}

Vector companion_resolvent_apply(const Preconditioner& g, const DenseOperator& op,
                                 const Vector& r) {
  return companion_resolvent_apply(g, op, Matrix(r)).col(0);
}

}  // namespace nnreg
