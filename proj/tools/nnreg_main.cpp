#include "nnreg/cli.hpp"
#include "nnreg/errors.hpp"
#include "nnreg/io.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

struct Common {
  std::string config;
  std::string out;
  bool traces = false;
  int parallel = 1;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "JSON config file")->required()->check(CLI::ExistingFile);
  sub->add_option("--out", c.out, "output directory")->required();
  sub->add_option("--seed", c.seed, "override the noise seed");
  sub->add_option("--parallel", c.parallel, "worker threads")->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char** argv) {
  using namespace nnreg;
  CLI::App app{"Non-negative regularization of biosensor rate-constant maps"};
  app.require_subcommand(1);

  Common c;
  std::string bundle;
  auto* synth = app.add_subcommand("synth", "synthesize an operator/data bundle");
  add_common(synth, c);
  auto* solve = app.add_subcommand("solve", "run solvers on a bundle");
  add_common(solve, c);
  solve->add_option("--bundle", bundle, "bundle directory written by synth")->required();
  solve->add_flag("--traces", c.traces, "write per-iteration traces");
  auto* compare = app.add_subcommand("compare", "method comparison over noise levels");
  add_common(compare, c);
  auto* rates = app.add_subcommand("rates", "convergence-rate study");
  add_common(rates, c);

  CLI11_PARSE(app, argc, argv);

  try {
    const cli::json cfg = cli::load_config(c.config);
    const cli::RunFlags flags{c.traces, c.parallel, c.seed};
    cli::json res;
    if (*synth) {
      res = cli::cmd_synth(cfg, c.out, flags);
    } else if (*solve) {
      res = cli::cmd_solve(cfg, bundle, c.out, flags);
    } else if (*compare) {
      cli::cmd_compare(cfg, c.out, flags);
      std::cout << io::read_text(std::filesystem::path(c.out) / "compare.txt");
      return 0;
    } else {
      cli::cmd_rates(cfg, c.out, flags);
      std::cout << io::read_text(std::filesystem::path(c.out) / "rates.txt");
      return 0;
    }
    std::cout << res.dump(2) << '\n';
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
