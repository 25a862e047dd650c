#include "nnreg/biosensor.hpp"

#include "nnreg/errors.hpp"
#include "nnreg/random.hpp"

#include <array>
#include <cmath>

namespace nnreg {

namespace {

bool valid_rect(const Rect& r) {
  return std::isfinite(r.x0) && std::isfinite(r.x1) && std::isfinite(r.y0) && std::isfinite(r.y1) &&
         r.x0 < r.x1 && r.y0 < r.y1;
}

}  // namespace

void KineticsModel::validate() const {
  if (!valid_rect(omega)) throw ConfigError("kinetics model: invalid omega rectangle");
  if (!valid_rect(theta)) throw ConfigError("kinetics model: invalid theta rectangle");
  if (!(theta.y0 > 0)) throw ConfigError("kinetics model: concentrations must be > 0");
  if (!(omega.x0 >= 0 && omega.y0 >= 0)) throw ConfigError("kinetics model: rate constants must be >= 0");
  if (!(t_inj > 0)) throw ConfigError("kinetics model: t_inj must be > 0");
  if (!(dt >= 0)) throw ConfigError("kinetics model: dt must be >= 0");
  if (!std::isfinite(t0)) throw ConfigError("kinetics model: t0 must be finite");
  if (!(normalization > 0) || !std::isfinite(normalization))
    throw ConfigError("kinetics model: normalization must be > 0");
}

Grid2D::Grid2D(Rect r, int nx, int ny) : r_(r), nx_(nx), ny_(ny) {
  if (nx < 1 || ny < 1) throw ConfigError("grid: cell counts must be >= 1");
  if (!valid_rect(r)) throw ConfigError("grid: invalid rectangle");
  cell_area_ = r.area() / (static_cast<double>(nx) * ny);
}

std::pair<double, double> Grid2D::centroid(Index i) const {
  if (i < 0 || i >= size()) throw ContractViolation("grid: cell index out of range");
  const Index ix = i / ny_;
  const Index iy = i % ny_;
  const double hx = (r_.x1 - r_.x0) / nx_;
  const double hy = (r_.y1 - r_.y0) / ny_;
  return {r_.x0 + (static_cast<double>(ix) + 0.5) * hx, r_.y0 + (static_cast<double>(iy) + 0.5) * hy};
}

Vector RateConstantMap::coefficients() const {
  return values * std::sqrt(grid.area(0));
}

RateConstantMap RateConstantMap::from_coefficients(const Grid2D& grid, const Vector& c) {
  if (c.size() != grid.size()) throw ContractViolation("from_coefficients: size mismatch");
  return {grid, c / std::sqrt(grid.area(0))};
}

double kernel_eval(const KineticsModel& m, double t, double c, double ka, double kd, double dt) {
  if (!(c > 0)) throw DomainError("kernel: concentration must be > 0");
  if (!(ka >= 0) || !(kd >= 0) || !(ka + kd > 0)) throw DomainError("kernel: need ka, kd >= 0 and ka + kd > 0");
  if (t <= m.t0 + dt) return 0.0;
  const double s = kd + ka * c;
  const double coef = ka * c / s;
  double v;
  if (t <= m.t0 + m.t_inj + dt) {
    v = coef * -std::expm1(-s * (t - m.t0));
  } else {
    v = coef * -std::expm1(-s * m.t_inj) * std::exp(-kd * (t - m.t0 - m.t_inj));
  }
  return v / m.normalization;
}

double kernel_eval(const KineticsModel& m, double t, double c, double ka, double kd) {
  return kernel_eval(m, t, c, ka, kd, m.dt);
}

namespace {

struct Node {
  double a, b, w;  // coordinates and weight relative to the cell area
};

std::vector<Node> cell_nodes(const Grid2D& g, Index i, Quadrature q) {
  auto [cx, cy] = g.centroid(i);
  if (q == Quadrature::Midpoint) return {{cx, cy, 1.0}};
  const double hx = (g.rect().x1 - g.rect().x0) / g.nx();
  const double hy = (g.rect().y1 - g.rect().y0) / g.ny();
  const double ox = 0.5 * hx / std::sqrt(3.0);
  const double oy = 0.5 * hy / std::sqrt(3.0);
  return {{cx - ox, cy - oy, 0.25}, {cx - ox, cy + oy, 0.25}, {cx + ox, cy - oy, 0.25}, {cx + ox, cy + oy, 0.25}};
}

// Mean of K over the node pairs of (data cell i, model cell j), and the mean of K².
std::pair<double, double> cell_pair(const KineticsModel& m, const std::vector<Node>& di,
                                    const std::vector<Node>& mj, double dt) {
  double s = 0, s2 = 0;
  for (const Node& d : di)
    for (const Node& e : mj) {
      const double k = kernel_eval(m, d.a, d.b, e.a, e.b, dt);
      s += d.w * e.w * k;
      s2 += d.w * e.w * k * k;
    }
  return {s, s2};
}

}  // namespace

DenseOperator assemble_operator(const KineticsModel& m, const Grid2D& model_grid,
                                const Grid2D& data_grid, double dt_value, Quadrature q) {
  m.validate();
  if (!(model_grid.rect() == m.omega)) throw ConfigError("assemble: model grid does not cover omega");
  if (!(data_grid.rect() == m.theta)) throw ConfigError("assemble: data grid does not cover theta");
  const Index rows = data_grid.size(), cols = model_grid.size();
  const double w = std::sqrt(model_grid.area(0) * data_grid.area(0));
  std::vector<std::vector<Node>> mn(cols);
  for (Index j = 0; j < cols; ++j) mn[j] = cell_nodes(model_grid, j, q);
  Matrix a(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    const auto dn = cell_nodes(data_grid, i, q);
    for (Index j = 0; j < cols; ++j) a(i, j) = w * cell_pair(m, dn, mn[j], dt_value).first;
  }
  return DenseOperator(std::move(a));
}

double frobenius_divisor(const DenseOperator& raw) { return 2.0 * raw.matrix().norm(); }

KineticsModel normalize(const KineticsModel& m, const Grid2D& model_grid, const Grid2D& data_grid,
                        Quadrature q) {
  KineticsModel raw = m;
  raw.normalization = 1.0;
  raw.validate();
  const double wa = model_grid.area(0) * data_grid.area(0);
  double sum = 0;
  for (Index i = 0; i < data_grid.size(); ++i) {
    const auto dn = cell_nodes(data_grid, i, q);
    for (Index j = 0; j < model_grid.size(); ++j)
      sum += wa * cell_pair(raw, dn, cell_nodes(model_grid, j, q), raw.dt).second;
  }
  if (!(sum > 0)) throw InvariantViolation("normalize: kernel vanishes on the grids");
  raw.normalization = 2.0 * std::sqrt(sum);
  return raw;
}

double perturb_timing(const KineticsModel& m, double h_prime, std::uint64_t seed) {
  if (!(h_prime >= 0 && h_prime < 1.0 / std::sqrt(8.0)))
    throw ConfigError("perturb_timing: h' must lie in [0, 1/sqrt(8))");
  Rng rng = Rng::child(seed, "timing");
  const double u = rng.uniform01();
  if (h_prime == 0) return m.dt;
  return (1.0 + h_prime * (2.0 * u - 1.0)) * m.dt;
}

std::pair<Sensorgram, double> perturb_data(const Sensorgram& y, double delta_prime, std::uint64_t seed) {
  if (!(delta_prime >= 0) || !std::isfinite(delta_prime)) throw ConfigError("perturb_data: delta' must be >= 0");
  Sensorgram out = y;
  if (delta_prime == 0) return {out, 0.0};
  Rng rng = Rng::child(seed, "data");
  for (Index i = 0; i < out.values.size(); ++i)
    out.values[i] = (1.0 + delta_prime * (2.0 * rng.uniform01() - 1.0)) * y.values[i];
  return {out, (out.values - y.values).norm()};
}

ExampleId parse_example(const std::string& s) {
  if (s == "Example1") return ExampleId::Example1;
  if (s == "Example2") return ExampleId::Example2;
  throw ConfigError("unknown example '" + s + "'");
}

const char* to_string(ExampleId e) { return e == ExampleId::Example1 ? "Example1" : "Example2"; }

KineticsModel example_model(ExampleId e) {
  KineticsModel m;
  if (e == ExampleId::Example1) {
    m.omega = {0, 3, 0, 3};
    m.theta = {0, 5, 0.001, 2};
    m.t0 = 0;
    m.dt = 0.1;
    m.t_inj = 2;
  } else {
    m.omega = {0, 9, 0, 2};
    m.theta = {0, 8, 0.01, 1};
    m.t0 = 0;
    m.dt = 0.2;
    m.t_inj = 4;
  }
  return m;
}

double phantom_value(ExampleId e, double ka, double kd) {
  if (e == ExampleId::Example1) return 1.0;
  const double a = (ka - 3) * (ka - 3) + (kd - 0.5) * (kd - 0.5);
  const double b = (ka - 6) * (ka - 6) + (kd - 1.5) * (kd - 1.5);
  return 0.5 * (std::exp(-8 * a) + std::exp(-32 * b));
}

RateConstantMap phantom(ExampleId e, const Grid2D& grid) {
  if (!(grid.rect() == example_model(e).omega))
    throw DomainError(std::string("phantom: grid does not cover the ") + to_string(e) + " domain");
  Vector v(grid.size());
  for (Index i = 0; i < grid.size(); ++i) {
    auto [ka, kd] = grid.centroid(i);
    v[i] = phantom_value(e, ka, kd);
  }
  return {grid, v};
}

Sensorgram synth_sensorgram(const DenseOperator& op, const RateConstantMap& x, const Grid2D& data_grid) {
  if (op.cols() != x.grid.size()) throw ContractViolation("synth_sensorgram: operator/map size mismatch");
  if (op.rows() != data_grid.size()) throw ContractViolation("synth_sensorgram: operator/data grid mismatch");
  return {data_grid, apply(op, x.coefficients())};
}

KernelPerturbationCheck verify_kernel_perturbation_bound(const KineticsModel& m, double dt_h,
                                                         const Grid2D& model_grid,
                                                         const Grid2D& data_grid, Quadrature q) {
  KernelPerturbationCheck r;
  r.h_bound = std::sqrt(2.0) * std::abs(dt_h - m.dt);
  const DenseOperator a = assemble_operator(m, model_grid, data_grid, m.dt, q);
  const DenseOperator ah = assemble_operator(m, model_grid, data_grid, dt_h, q);
  r.distance = operator_distance(ah, a);
  r.ok = r.distance <= r.h_bound * 1.05;
  return r;
}

}  // namespace nnreg
