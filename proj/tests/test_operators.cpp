#include "nnreg/errors.hpp"
#include "nnreg/operators.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace nnreg;

namespace {

DenseOperator op(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.begin()->size()));
  Index i = 0;
  for (const auto& r : rows) {
    Index j = 0;
    for (double v : r) m(i, j++) = v;
    ++i;
  }
  return DenseOperator(m);
}

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

}  // namespace

TEST(Apply, Identity) {
  EXPECT_EQ(apply(DenseOperator(Matrix::Identity(3, 3)), vec({1, 2, 3})), vec({1, 2, 3}));
}

TEST(Apply, ZeroOperator) {
  EXPECT_EQ(apply(DenseOperator(Matrix::Zero(2, 2)), vec({5, -7})), vec({0, 0}));
}

TEST(Apply, RowVector) { EXPECT_EQ(apply(op({{1, 1}}), vec({1, 1})), vec({2})); }

TEST(Apply, SizeMismatchThrows) {
  EXPECT_THROW(apply(op({{1, 1}}), vec({1})), ContractViolation);
  EXPECT_THROW(apply_adjoint(op({{1, 1}}), vec({1, 2})), ContractViolation);
}

TEST(ApplyAdjoint, Cases) {
  EXPECT_EQ(apply_adjoint(DenseOperator(Matrix::Identity(2, 2)), vec({4, 5})), vec({4, 5}));
  EXPECT_EQ(apply_adjoint(op({{1, 1}}), vec({2})), vec({2, 2}));
  EXPECT_EQ(apply_adjoint(DenseOperator(Matrix::Zero(2, 3)), vec({1, 2})), Vector::Zero(3));
}

TEST(DenseOperator, RejectsNonFinite) {
  Matrix m = Matrix::Ones(2, 2);
  m(1, 0) = std::nan("");
  EXPECT_THROW(DenseOperator{m}, InvariantViolation);
}

TEST(SpectralNorm, Cases) {
  EXPECT_NEAR(spectral_norm(Matrix(Matrix::Identity(5, 5))), 1.0, 1e-12);
  EXPECT_NEAR(spectral_norm(Matrix(vec({1, 2, 3}).asDiagonal())), 3.0, 1e-12);
  EXPECT_NEAR(spectral_norm(op({{0, 1}, {0, 0}})), 1.0, 1e-12);
  EXPECT_EQ(spectral_norm(Matrix(Matrix::Zero(3, 2))), 0.0);
}

TEST(SpectralNorm, AgreesWithSvd) {
  Rng rng(101);
  for (int t = 0; t < 50; ++t) {
    const Index m = 1 + static_cast<Index>(rng.uniform01() * 8), n = 1 + static_cast<Index>(rng.uniform01() * 8);
    const Matrix a = oracle::random_matrix(rng, m, n);
    EXPECT_NEAR(spectral_norm(a), oracle::svd_norm(a), 1e-8 * oracle::svd_norm(a));
  }
}

TEST(SpectralNorm, NonConvergenceCarriesEstimate) {
  Rng rng(102);
  const Matrix a = oracle::random_matrix(rng, 20, 20);
  PowerIterationConfig cfg;
  cfg.max_iterations = 3;
  cfg.tolerance = 1e-300;
  try {
    spectral_norm(a, cfg);
    FAIL() << "expected ConvergenceFailure";
  } catch (const ConvergenceFailure& e) {
    EXPECT_GT(e.last_estimate(), 0.0);
    EXPECT_LE(e.last_estimate(), oracle::svd_norm(a) * (1 + 1e-12));
  }
}

TEST(OperatorDistance, Cases) {
  const auto a = op({{3, 0}, {0, 1}});
  EXPECT_EQ(operator_distance(a, a), 0.0);
  EXPECT_NEAR(operator_distance(DenseOperator(Matrix::Identity(2, 2)), DenseOperator(Matrix::Zero(2, 2))), 1.0, 1e-12);
  EXPECT_NEAR(operator_distance(a, op({{1, 0}, {0, 1}})), 2.0, 1e-12);
  EXPECT_THROW(operator_distance(a, op({{1, 2}})), ContractViolation);
}

TEST(Catalog, G1IsScaledIdentity) {
  const auto g = make_preconditioner(CatalogId::G1, 3, 2.0, 99);
  ASSERT_EQ(g.kind(), PreconditionerKind::Scalar);
  EXPECT_DOUBLE_EQ(g.mu(), 2e-6);
}

TEST(Catalog, G5SingleEntry) {
  const auto g = make_preconditioner(CatalogId::G5, 1, 1.0, 5);
  ASSERT_EQ(g.kind(), PreconditionerKind::Diagonal);
  EXPECT_DOUBLE_EQ(g.dense()(0, 0), 1e-4);
}

TEST(Catalog, G5EntriesInRange) {
  const Index n = 10;
  const auto g = make_preconditioner(CatalogId::G5, n, 2.0, 5);
  const Vector d = g.dense().diagonal();
  EXPECT_DOUBLE_EQ(d.minCoeff(), 2e-4);
  EXPECT_LE(d.maxCoeff(), n * 2e-4);
}

TEST(Catalog, G7SharesSpectrumWithG5) {
  for (std::uint64_t s : {1u, 2u, 3u}) {
    const auto g5 = make_preconditioner(CatalogId::G5, 4, 1.0, s);
    const auto g7 = make_preconditioner(CatalogId::G7, 4, 1.0, s);
    ASSERT_EQ(g7.kind(), PreconditionerKind::Spd);
    Eigen::SelfAdjointEigenSolver<Matrix> es(g7.dense());
    EXPECT_LE((es.eigenvalues() - g5.eigenvalues()).norm(), 1e-15);
    EXPECT_LE((g7.dense() - g7.dense().transpose()).norm(), 0.0);
  }
}

TEST(Catalog, Deterministic) {
  for (auto id : {CatalogId::G1, CatalogId::G4, CatalogId::G6, CatalogId::G8}) {
    const auto a = make_preconditioner(id, 7, 0.3, 17), b = make_preconditioner(id, 7, 0.3, 17);
    EXPECT_EQ(a.dense(), b.dense());
    EXPECT_EQ(a.fingerprint(), b.fingerprint());
  }
}

TEST(Catalog, ParseNames) {
  EXPECT_EQ(parse_catalog_id("G7"), CatalogId::G7);
  EXPECT_STREQ(to_string(CatalogId::G3), "G3");
  EXPECT_THROW(parse_catalog_id("G9"), ConfigError);
}

TEST(Preconditioner, Validation) {
  EXPECT_THROW(Preconditioner::scalar(0.0, 2), InvariantViolation);
  EXPECT_THROW(Preconditioner::diagonal(vec({1, -1})), InvariantViolation);
  Matrix m(2, 2);
  m << 1, 2, 2, 1;  // symmetric, indefinite
  EXPECT_THROW(Preconditioner::spd(m), InvariantViolation);
}

TEST(ResolventSolve, Cases) {
  const auto g = Preconditioner::scalar(4.0, 2);
  EXPECT_LE((resolvent_solve(g, DenseOperator(Matrix::Zero(3, 2)), vec({8, 4})) - vec({2, 1})).norm(), 1e-15);
  EXPECT_NEAR(resolvent_solve(Preconditioner::scalar(1.0, 1), op({{1}}), vec({2}))[0], 1.0, 1e-15);
  EXPECT_LE((resolvent_solve(Preconditioner::scalar(1.0, 2), DenseOperator(Matrix::Identity(2, 2)), vec({2, 2})) -
             vec({1, 1})).norm(),
            1e-15);
}

TEST(ResolventSolve, MultiplyBackResidual) {
  Rng rng(7);
  for (int t = 0; t < 30; ++t) {
    const Index n = 1 + static_cast<Index>(rng.uniform01() * 64), m = 1 + static_cast<Index>(rng.uniform01() * 64);
    const DenseOperator a(oracle::random_matrix(rng, m, n));
    Preconditioner g = Preconditioner::scalar(0.5, n);
    if (t % 3 == 1) g = Preconditioner::diagonal(oracle::random_vector(rng, n, 0.1, 2.0));
    if (t % 3 == 2) {
      const Matrix b = oracle::random_matrix(rng, n, n);
      g = Preconditioner::spd(b * b.transpose() + Matrix::Identity(n, n));
    }
    const Vector rhs = oracle::random_vector(rng, n);
    const Vector z = resolvent_solve(g, a, rhs);
    const Vector back = g.apply(z) + a.matrix().transpose() * (a.matrix() * z);
    EXPECT_LE((back - rhs).norm(), 1e-10 * rhs.norm());
  }
}

TEST(CompanionResolvent, Cases) {
  EXPECT_NEAR(companion_resolvent_apply(Preconditioner::scalar(2.0, 1), DenseOperator(Matrix::Zero(1, 1)), vec({4}))[0],
              2.0, 1e-15);
  EXPECT_NEAR(companion_resolvent_apply(Preconditioner::scalar(1.0, 1), op({{1}}), vec({2}))[0], 1.0, 1e-15);
}

TEST(CompanionResolvent, CommutesWithAdjointForScalarG) {
  Rng rng(8);
  for (int t = 0; t < 40; ++t) {
    const Index n = 1 + static_cast<Index>(rng.uniform01() * 10), m = 1 + static_cast<Index>(rng.uniform01() * 12);
    const DenseOperator a(oracle::random_matrix(rng, m, n));
    const auto g = Preconditioner::scalar(rng.uniform(0.01, 3.0), n);
    const Vector r = oracle::random_vector(rng, m);
    const Vector lhs = apply_adjoint(a, companion_resolvent_apply(g, a, r));
    const Vector rhs = resolvent_solve(g, a, apply_adjoint(a, r));
    EXPECT_LE((lhs - rhs).norm(), 1e-10 * std::max(1.0, rhs.norm()));
  }
}

TEST(CompanionResolvent, NonSquareNonScalarUnsupported) {
  const DenseOperator a(Matrix::Ones(3, 2));
  EXPECT_THROW(companion_resolvent_apply(Preconditioner::diagonal(vec({1, 2})), a, vec({1, 1, 1})),
               UnsupportedConfiguration);
}

TEST(Contraction, ScalarGIsNonExpansive) {
  Rng rng(9);
  for (int t = 0; t < 40; ++t) {
    const Index n = 1 + static_cast<Index>(rng.uniform01() * 8), m = 1 + static_cast<Index>(rng.uniform01() * 8);
    const Matrix a = oracle::random_matrix(rng, m, n);
    const double mu = std::exp(rng.uniform(-6, 2));
    const Matrix ata = a.transpose() * a;
    const Matrix t1 = (mu * Matrix::Identity(n, n) + ata).ldlt().solve(mu * Matrix::Identity(n, n) - ata);
    EXPECT_LE(oracle::svd_norm(t1), 1.0 + 1e-12);
  }
}

TEST(Preconditioner, FactorCacheIsShared) {
  const DenseOperator a(Matrix::Identity(3, 3));
  const auto g = Preconditioner::scalar(1.0, 3);
  const auto copy = g;
  EXPECT_EQ(g.model_factor(a).get(), copy.model_factor(a).get());
}

TEST(Preconditioner, SqrtApply) {
  Matrix m(2, 2);
  m << 2, 1, 1, 2;
  const auto g = Preconditioner::spd(m);
  const Vector r = vec({0.3, -1.2});
  const Vector s = g.sqrt_apply(g.sqrt_apply(r));
  EXPECT_LE((s - m * r).norm(), 1e-14);
  EXPECT_NEAR(g.sqrt_norm(), std::sqrt(3.0), 1e-14);
}
