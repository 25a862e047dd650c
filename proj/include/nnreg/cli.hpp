#pragma once

#include "nnreg/biosensor.hpp"
#include "nnreg/problem.hpp"
#include "nnreg/solvers.hpp"
#include "nnreg/stopping.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace nnreg::cli {

using json = nlohmann::json;
namespace fs = std::filesystem;

inline constexpr int kSchemaVersion = 1;

/// Number, or a string such as "1%" or "0.01".
double parse_fraction(const json& v, const std::string& what);

struct ModelDescription {
  ExampleId example = ExampleId::Example1;
  KineticsModel model;
  int grid_omega[2] = {3, 3};
  int grid_theta[2] = {20, 10};
  Quadrature quadrature = Quadrature::Midpoint;
  std::uint64_t seed = 1;
  double h_prime = 0.0;
  double delta_prime = 0.0;
};

/// Keys: example, omega, theta, t0, dt, t_inj, grid_omega, grid_theta, seed,
/// h_prime, delta_prime, quadrature. Geometry defaults to the example's.
ModelDescription parse_model_description(const json& j);
json to_json(const ModelDescription& d);

struct Bundle {
  ModelDescription desc;
  KineticsModel model;  // normalized
  Grid2D model_grid;
  Grid2D data_grid;
  DenseOperator a;
  DenseOperator a_h;
  RateConstantMap phantom;
  Sensorgram y;
  Sensorgram y_delta;
  double dt_h = 0;
  double h = 0;
  double delta = 0;

  InverseProblem problem() const;
};

Bundle synthesize(const ModelDescription& d);
void write_bundle(const Bundle& b, const fs::path& dir);
Bundle read_bundle(const fs::path& dir);

struct ResolvedSolver {
  std::string name;
  SolverConfig cfg;
  StoppingRule stop;
  json echo;  // entry with every default filled in
};

/// `x_dagger_norm` feeds c_dagger = "auto" (1.1·‖x†‖).
ResolvedSolver resolve_solver(const json& entry, const InverseProblem& p,
                              std::optional<double> x_dagger_norm, std::uint64_t seed);

struct RunFlags {
  bool traces = false;
  int parallel = 1;
  std::optional<std::uint64_t> seed;
};

/// Loads a config file and inlines referenced model files.
json load_config(const fs::path& path);

json cmd_synth(const json& config, const fs::path& out, const RunFlags& flags);
json cmd_solve(const json& config, const fs::path& bundle_dir, const fs::path& out,
               const RunFlags& flags);
json cmd_compare(const json& config, const fs::path& out, const RunFlags& flags);
json cmd_rates(const json& config, const fs::path& out, const RunFlags& flags);

/// Header of the comparison table.
inline constexpr const char* kCompareHeader = "method,noise_h,noise_delta,l2err,k_star,cpu_seconds";

}  // namespace nnreg::cli
