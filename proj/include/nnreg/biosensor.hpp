#pragma once

#include "nnreg/operators.hpp"

#include <cstdint>
#include <string>
#include <utility>

namespace nnreg {

struct Rect {
  double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  double area() const { return (x1 - x0) * (y1 - y0); }
  bool operator==(const Rect&) const = default;
};

/// Rate constants live in omega = [ka_min, ka_max]×[kd_min, kd_max],
/// measurements in theta = [t_min, t_max]×[C_min, C_max].
struct KineticsModel {
  Rect omega;
  Rect theta;
  double t0 = 0.0;
  double dt = 0.0;
  double t_inj = 1.0;
  double normalization = 1.0;

  void validate() const;
};

/// Uniform nx×ny partition of a rectangle. Cell index = ix·ny + iy, so the
/// second axis runs fastest.
class Grid2D {
 public:
  Grid2D(Rect r, int nx, int ny);

  const Rect& rect() const { return r_; }
  int nx() const { return nx_; }
  int ny() const { return ny_; }
  Index size() const { return static_cast<Index>(nx_) * ny_; }
  std::pair<double, double> centroid(Index i) const;
  double area(Index) const { return cell_area_; }

 private:
  Rect r_;
  int nx_, ny_;
  double cell_area_;
};

/// Cell values of a function on the rate-constant domain. Solvers work with
/// coefficients in the orthonormal indicator basis, value·√area.
struct RateConstantMap {
  Grid2D grid;
  Vector values;

  Vector coefficients() const;
  static RateConstantMap from_coefficients(const Grid2D& grid, const Vector& c);
};

/// Data vector on the measurement grid (coefficients in the orthonormal
/// indicator basis).
struct Sensorgram {
  Grid2D grid;
  Vector values;
};

enum class Quadrature { Midpoint, Gauss2x2 };

/// Kernel with detector delay m.dt, divided by m.normalization.
double kernel_eval(const KineticsModel& m, double t, double c, double ka, double kd);
/// Same with an explicit delay.
double kernel_eval(const KineticsModel& m, double t, double c, double ka, double kd, double dt);

DenseOperator assemble_operator(const KineticsModel& m, const Grid2D& model_grid,
                                const Grid2D& data_grid, double dt_value,
                                Quadrature q = Quadrature::Midpoint);

/// 2·‖A‖_F of an operator assembled with the raw kernel.
double frobenius_divisor(const DenseOperator& raw);

/// Returns m with normalization = 2·√(quadrature estimate of ∫∫K²).
KineticsModel normalize(const KineticsModel& m, const Grid2D& model_grid, const Grid2D& data_grid,
                        Quadrature q = Quadrature::Midpoint);

/// Δt_h = [1 + h'(2U − 1)]·Δt, one draw per seed.
double perturb_timing(const KineticsModel& m, double h_prime, std::uint64_t seed);

/// Multiplicative uniform noise; returns (y^δ, realized δ).
std::pair<Sensorgram, double> perturb_data(const Sensorgram& y, double delta_prime,
                                           std::uint64_t seed);

enum class ExampleId { Example1, Example2 };
ExampleId parse_example(const std::string& s);
const char* to_string(ExampleId e);

KineticsModel example_model(ExampleId e);
double phantom_value(ExampleId e, double ka, double kd);
RateConstantMap phantom(ExampleId e, const Grid2D& grid);

Sensorgram synth_sensorgram(const DenseOperator& op, const RateConstantMap& x,
                            const Grid2D& data_grid);

struct KernelPerturbationCheck {
  double h_bound = 0.0;
  double distance = 0.0;
  bool ok = false;
};

/// Compares ‖A_h − A‖₂ with h = √2·|dt_h − dt| (5% slack for quadrature).
KernelPerturbationCheck verify_kernel_perturbation_bound(const KineticsModel& m, double dt_h,
                                                         const Grid2D& model_grid,
                                                         const Grid2D& data_grid,
                                                         Quadrature q = Quadrature::Midpoint);

}  // namespace nnreg
