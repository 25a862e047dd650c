#include "nnreg/cli.hpp"

#include "nnreg/analysis.hpp"
#include "nnreg/errors.hpp"
#include "nnreg/io.hpp"
#include "nnreg/random.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <thread>

namespace nnreg::cli {

double parse_fraction(const json& v, const std::string& what) {
  double out;
  if (v.is_number()) {
    out = v.get<double>();
  } else if (v.is_string()) {
    std::string s = v.get<std::string>();
    bool pct = !s.empty() && s.back() == '%';
    if (pct) s.pop_back();
    try {
      std::size_t used = 0;
      out = std::stod(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
    } catch (const std::exception&) {
      throw ConfigError(what + ": cannot parse '" + v.get<std::string>() + "'");
    }
    if (pct) out /= 100.0;
  } else {
    throw ConfigError(what + ": expected a number or a percent string");
  }
  if (!std::isfinite(out) || out < 0) throw ConfigError(what + ": must be finite and >= 0");
  return out;
}

namespace {

Rect parse_rect(const json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 4) throw ConfigError(what + ": expected [min1, max1, min2, max2]");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
}

json rect_json(const Rect& r) { return json::array({r.x0, r.x1, r.y0, r.y1}); }

void parse_grid(const json& j, int out[2], const std::string& what) {
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    int a = 0, b = 0;
    char tail = 0;
    if (std::sscanf(s.c_str(), "%d,%d%c", &a, &b, &tail) != 2) throw ConfigError(what + ": expected \"nx,ny\"");
    out[0] = a;
    out[1] = b;
  } else if (j.is_array() && j.size() == 2) {
    out[0] = j[0].get<int>();
    out[1] = j[1].get<int>();
  } else {
    throw ConfigError(what + ": expected \"nx,ny\"");
  }
  if (out[0] < 1 || out[1] < 1) throw ConfigError(what + ": cell counts must be >= 1");
}

std::uint64_t parse_seed(const json& j) {
  if (j.is_number_unsigned()) return j.get<std::uint64_t>();
  if (j.is_number_integer() && j.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(j.get<std::int64_t>());
  throw ConfigError("seed must be a non-negative integer");
}

template <class T>
T get_or(const json& j, const char* key, T def) {
  return j.contains(key) ? j.at(key).get<T>() : def;
}

}  // namespace

ModelDescription parse_model_description(const json& j) {
  if (!j.is_object()) throw ConfigError("model description must be an object");
  ModelDescription d;
  try {
    d.example = parse_example(get_or<std::string>(j, "example", "Example1"));
    d.model = example_model(d.example);
    if (j.contains("omega")) d.model.omega = parse_rect(j["omega"], "omega");
    if (j.contains("theta")) d.model.theta = parse_rect(j["theta"], "theta");
    d.model.t0 = get_or(j, "t0", d.model.t0);
    d.model.dt = get_or(j, "dt", d.model.dt);
    d.model.t_inj = get_or(j, "t_inj", d.model.t_inj);
    if (j.contains("grid_omega")) parse_grid(j["grid_omega"], d.grid_omega, "grid_omega");
    if (j.contains("grid_theta")) parse_grid(j["grid_theta"], d.grid_theta, "grid_theta");
    if (j.contains("seed")) d.seed = parse_seed(j["seed"]);
    if (j.contains("h_prime")) d.h_prime = parse_fraction(j["h_prime"], "h_prime");
    if (j.contains("delta_prime")) d.delta_prime = parse_fraction(j["delta_prime"], "delta_prime");
    const std::string q = get_or<std::string>(j, "quadrature", "midpoint");
    if (q == "midpoint")
      d.quadrature = Quadrature::Midpoint;
    else if (q == "gauss2x2")
      d.quadrature = Quadrature::Gauss2x2;
    else
      throw ConfigError("quadrature must be 'midpoint' or 'gauss2x2'");
  } catch (const json::exception& e) {
    throw ConfigError(std::string("model description: ") + e.what());
  }
  d.model.validate();
  return d;
}

json to_json(const ModelDescription& d) {
  return json{{"example", to_string(d.example)},
              {"omega", rect_json(d.model.omega)},
              {"theta", rect_json(d.model.theta)},
              {"t0", d.model.t0},
              {"dt", d.model.dt},
              {"t_inj", d.model.t_inj},
              {"grid_omega", std::to_string(d.grid_omega[0]) + "," + std::to_string(d.grid_omega[1])},
              {"grid_theta", std::to_string(d.grid_theta[0]) + "," + std::to_string(d.grid_theta[1])},
              {"quadrature", d.quadrature == Quadrature::Midpoint ? "midpoint" : "gauss2x2"},
              {"seed", d.seed},
              {"h_prime", d.h_prime},
              {"delta_prime", d.delta_prime}};
}

InverseProblem Bundle::problem() const {
  InverseProblem p{a, a_h, y.values, y_delta.values, h, delta};
  p.validate();
  return p;
}

Bundle synthesize(const ModelDescription& d) {
  const Grid2D mg(d.model.omega, d.grid_omega[0], d.grid_omega[1]);
  const Grid2D dg(d.model.theta, d.grid_theta[0], d.grid_theta[1]);
  const KineticsModel m = normalize(d.model, mg, dg, d.quadrature);
  DenseOperator a = assemble_operator(m, mg, dg, m.dt, d.quadrature);
  const double dt_h = perturb_timing(m, d.h_prime, d.seed);
  DenseOperator a_h = dt_h == m.dt ? a : assemble_operator(m, mg, dg, dt_h, d.quadrature);
  RateConstantMap ph = phantom(d.example, mg);
  Sensorgram y = synth_sensorgram(a, ph, dg);
  auto [yd, delta] = perturb_data(y, d.delta_prime, d.seed);
  const double h = operator_distance(a_h, a);
  return Bundle{d, m, mg, dg, std::move(a), std::move(a_h), std::move(ph), std::move(y), std::move(yd),
                dt_h, h, delta};
}

void write_bundle(const Bundle& b, const fs::path& dir) {
  fs::create_directories(dir);
  io::write_matrix_csv(dir / "A.csv", b.a.matrix());
  io::write_matrix_csv(dir / "A_h.csv", b.a_h.matrix());
  io::write_grid_csv(dir / "y.csv", b.data_grid, b.y.values);
  io::write_grid_csv(dir / "y_delta.csv", b.data_grid, b.y_delta.values);
  io::write_grid_csv(dir / "x_dagger.csv", b.model_grid, b.phantom.values);
  const json noise{{"h", b.h},
                   {"delta", b.delta},
                   {"dt", b.model.dt},
                   {"dt_h", b.dt_h},
                   {"h_prime", b.desc.h_prime},
                   {"delta_prime", b.desc.delta_prime},
                   {"seed", b.desc.seed},
                   {"rng", kRngAlgorithm}};
  io::write_text(dir / "noise.json", noise.dump(2) + "\n");
  const json meta{{"schema_version", kSchemaVersion},
                  {"model_description", to_json(b.desc)},
                  {"normalization", b.model.normalization},
                  {"files",
                   {{"operator", "A.csv"},
                    {"operator_noisy", "A_h.csv"},
                    {"data", "y.csv"},
                    {"data_noisy", "y_delta.csv"},
                    {"phantom", "x_dagger.csv"},
                    {"noise", "noise.json"}}}};
  io::write_text(dir / "bundle.json", meta.dump(2) + "\n");
}

Bundle read_bundle(const fs::path& dir) {
  json meta, noise;
  try {
    meta = json::parse(io::read_text(dir / "bundle.json"));
    noise = json::parse(io::read_text(dir / "noise.json"));
  } catch (const json::exception& e) {
    throw IoError("bundle " + dir.string() + ": " + e.what());
  }
  if (meta.value("schema_version", 0) != kSchemaVersion) throw IoError("bundle: unsupported schema_version");
  const ModelDescription d = parse_model_description(meta.at("model_description"));
  KineticsModel m = d.model;
  m.normalization = meta.at("normalization").get<double>();
  const Grid2D mg(m.omega, d.grid_omega[0], d.grid_omega[1]);
  const Grid2D dg(m.theta, d.grid_theta[0], d.grid_theta[1]);
  DenseOperator a(io::read_matrix_csv(dir / "A.csv"));
  DenseOperator ah(io::read_matrix_csv(dir / "A_h.csv"));
  if (a.rows() != dg.size() || a.cols() != mg.size() || ah.rows() != a.rows() || ah.cols() != a.cols())
    throw IoError("bundle: operator shape does not match the grids");
  RateConstantMap ph{mg, io::read_grid_csv(dir / "x_dagger.csv", mg)};
  Sensorgram y{dg, io::read_grid_csv(dir / "y.csv", dg)};
  Sensorgram yd{dg, io::read_grid_csv(dir / "y_delta.csv", dg)};
  return Bundle{d, m, mg, dg, std::move(a), std::move(ah), std::move(ph), std::move(y), std::move(yd),
                noise.at("dt_h").get<double>(), noise.at("h").get<double>(), noise.at("delta").get<double>()};
}

// ---------------------------------------------------------------------------

namespace {

OutputMap parse_output_map(const json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "Abs") return OutputMap::abs();
    if (s == "PositivePart") return OutputMap::positive_part();
    throw ConfigError("unknown output_map '" + s + "'");
  }
  if (j.is_object() && j.value("kind", "") == "Blend") return OutputMap::blend(j.at("a").get<double>());
  throw ConfigError("output_map must be \"Abs\", \"PositivePart\" or {\"kind\":\"Blend\",\"a\":...}");
}

json output_map_json(const OutputMap& m) {
  switch (m.kind) {
    case OutputMap::Kind::Abs: return "Abs";
    case OutputMap::Kind::PositivePart: return "PositivePart";
    case OutputMap::Kind::Blend: return json{{"kind", "Blend"}, {"a", m.a}};
  }
  return nullptr;
}

RelaxationSchedule parse_schedule(const json& j) {
  RelaxationSchedule s;
  const std::string kind = j.is_string() ? j.get<std::string>() : j.value("kind", "");
  if (kind == "Zero")
    s.kind = RelaxationSchedule::Kind::Zero;
  else if (kind == "Harmonic")
    s.kind = RelaxationSchedule::Kind::Harmonic;
  else if (kind == "HarmonicLog") {
    s.kind = RelaxationSchedule::Kind::HarmonicLog;
    s.q = j.is_object() ? j.value("q", 1) : 1;
    if (s.q < 1) throw ConfigError("HarmonicLog schedule: q must be >= 1");
  } else {
    throw ConfigError("unknown schedule '" + kind + "'");
  }
  return s;
}

json schedule_json(const RelaxationSchedule& s) {
  switch (s.kind) {
    case RelaxationSchedule::Kind::Zero: return "Zero";
    case RelaxationSchedule::Kind::Harmonic: return "Harmonic";
    case RelaxationSchedule::Kind::HarmonicLog: return json{{"kind", "HarmonicLog"}, {"q", s.q}};
  }
  return nullptr;
}

}  // namespace

ResolvedSolver resolve_solver(const json& entry, const InverseProblem& p, std::optional<double> x_dagger_norm,
                              std::uint64_t seed) {
  if (!entry.is_object()) throw ConfigError("solver entry must be an object");
  ResolvedSolver r;
  json echo = entry;
  try {
    r.cfg.method = parse_method(entry.at("method").get<std::string>());
    r.name = entry.value("name", std::string(to_string(r.cfg.method)));
    echo["name"] = r.name;
    const Index n = p.operator_noisy.cols();

    if (entry.contains("preconditioner")) {
      const json& g = entry["preconditioner"];
      if (g.is_string()) {
        const CatalogId id = parse_catalog_id(g.get<std::string>());
        const std::uint64_t ps =
            entry.contains("preconditioner_seed") ? parse_seed(entry["preconditioner_seed"]) : child_seed(seed, "preconditioner");
        const double lmax = spectral_norm(p.operator_noisy);
        r.cfg.preconditioner = make_preconditioner(id, n, lmax, ps);
        echo["preconditioner_seed"] = ps;
        echo["lambda_max"] = lmax;
      } else if (g.is_object()) {
        const std::string kind = g.value("kind", "");
        if (kind == "scalar")
          r.cfg.preconditioner = Preconditioner::scalar(g.at("mu").get<double>(), n);
        else if (kind == "diagonal")
          r.cfg.preconditioner = Preconditioner::diagonal(Eigen::Map<const Vector>(
              g.at("d").get<std::vector<double>>().data(), static_cast<Index>(g.at("d").size())));
        else
          throw ConfigError("explicit preconditioner kind must be 'scalar' or 'diagonal'");
      } else {
        throw ConfigError("preconditioner must be a catalog id or an object");
      }
      if (r.cfg.preconditioner->kind() == PreconditionerKind::Scalar) echo["mu"] = r.cfg.preconditioner->mu();
    }

    r.cfg.omega = entry.value("omega", 1.0);
    echo["omega"] = r.cfg.omega;
    r.cfg.schedule = entry.contains("schedule") ? parse_schedule(entry["schedule"]) : RelaxationSchedule{};
    if (r.cfg.method == Method::Algorithm2) echo["schedule"] = schedule_json(r.cfg.schedule);
    r.cfg.output_map =
        entry.contains("output_map") ? parse_output_map(entry["output_map"]) : OutputMap::positive_part();
    if (r.cfg.method == Method::Algorithm2) echo["output_map"] = output_map_json(r.cfg.output_map);
    if (entry.contains("x0") && entry["x0"].is_array()) {
      const auto v = entry["x0"].get<std::vector<double>>();
      if (static_cast<Index>(v.size()) != n) throw ConfigError("x0 has the wrong length");
      r.cfg.x0 = Eigen::Map<const Vector>(v.data(), n);
    } else if (entry.contains("x0") && entry["x0"] != "zeros") {
      throw ConfigError("x0 must be \"zeros\" or an array");
    } else {
      echo["x0"] = "zeros";
    }
    r.cfg.max_iterations = entry.value("max_iterations", std::int64_t{1000000});
    echo["max_iterations"] = r.cfg.max_iterations;

    const json st = entry.value("stopping", json{{"kind", "MaxOnly"}});
    const std::string kind = st.value("kind", "");
    json st_echo = st;
    r.stop.n_max = st.value("n_max", r.cfg.max_iterations);
    st_echo["n_max"] = r.stop.n_max;
    if (kind == "MaxOnly") {
      r.stop.kind = MaxOnlyRule{};
    } else if (kind == "Morozov") {
      r.stop.kind = MorozovRule{st.value("tau0", 1.1)};
      st_echo["tau0"] = std::get<MorozovRule>(r.stop.kind).tau0;
    } else if (kind == "ModifiedDiscrepancy") {
      if (!r.cfg.preconditioner) throw ConfigError("ModifiedDiscrepancy needs a preconditioner");
      ModifiedDiscrepancyRule m;
      if (st.contains("tau")) {
        if (r.cfg.preconditioner->kind() != PreconditionerKind::Scalar)
          throw ConfigError("'tau' applies to scalar preconditioners only; use 'tau0'");
        m.tau0 = st["tau"].get<double>() * r.cfg.preconditioner->mu();
      } else {
        m.tau0 = st.value("tau0", 1.1);
      }
      const json cd = st.value("c_dagger", json("auto"));
      if (cd.is_string() && cd.get<std::string>() == "auto") {
        if (!x_dagger_norm) throw ConfigError("c_dagger \"auto\" needs the exact solution");
        m.c_dagger = 1.1 * *x_dagger_norm;
      } else {
        m.c_dagger = cd.get<double>();
      }
      st_echo["tau0"] = m.tau0;
      st_echo["c_dagger"] = m.c_dagger;
      r.stop.kind = m;
    } else if (kind == "APriori") {
      APrioriRule a;
      const std::string rule = st.value("rule", "Admissible");
      if (rule == "Holder") {
        a.kind = APrioriRule::Kind::Holder;
        a.exponent = st.at("p").get<double>();
      } else if (rule == "Log") {
        a.kind = APrioriRule::Kind::Log;
        a.exponent = st.at("a").get<double>();
      } else if (rule == "Admissible") {
        a.kind = APrioriRule::Kind::Admissible;
      } else {
        throw ConfigError("unknown a-priori rule '" + rule + "'");
      }
      a.scale = st.value("scale", 1.0);
      st_echo["scale"] = a.scale;
      r.stop.kind = a;
    } else {
      throw ConfigError("unknown stopping kind '" + kind + "'");
    }
    r.stop.validate();
    echo["stopping"] = st_echo;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("solver entry: ") + e.what());
  }
  r.echo = echo;
  return r;
}

// ---------------------------------------------------------------------------

json load_config(const fs::path& path) {
  json c;
  try {
    c = json::parse(io::read_text(path));
  } catch (const json::parse_error& e) {
    throw ConfigError("cannot parse " + path.string() + ": " + e.what());
  }
  if (!c.is_object()) throw ConfigError("config must be a JSON object");
  if (c.value("schema_version", 0) != kSchemaVersion)
    throw ConfigError("config schema_version must be " + std::to_string(kSchemaVersion));
  if (c.contains("problem") && c["problem"].contains("model") && c["problem"]["model"].is_string()) {
    const fs::path mp = path.parent_path() / c["problem"]["model"].get<std::string>();
    if (!fs::exists(mp)) throw IoError("model file not found: " + mp.string());
    try {
      c["problem"]["model"] = json::parse(io::read_text(mp));
    } catch (const json::parse_error& e) {
      throw ConfigError("cannot parse " + mp.string() + ": " + e.what());
    }
  }
  return c;
}

namespace {

ModelDescription description_from(const json& config, const RunFlags& flags) {
  if (!config.contains("problem") || !config["problem"].contains("model"))
    throw ConfigError("config needs problem.model");
  const json& pr = config["problem"];
  if (pr.value("type", "biosensor") != "biosensor") throw ConfigError("this command needs a biosensor problem");
  ModelDescription d = parse_model_description(pr["model"]);
  if (config.contains("noise")) {
    const json& nz = config["noise"];
    if (nz.contains("h_prime")) d.h_prime = parse_fraction(nz["h_prime"], "noise.h_prime");
    if (nz.contains("delta_prime")) d.delta_prime = parse_fraction(nz["delta_prime"], "noise.delta_prime");
    if (nz.contains("seed")) d.seed = parse_seed(nz["seed"]);
  }
  if (flags.seed) d.seed = *flags.seed;
  return d;
}

json config_echo(const json& config, std::uint64_t seed) {
  json e = config;
  e["rng"] = kRngAlgorithm;
  e["noise"]["seed"] = seed;
  return e;
}

std::string slug(const std::string& s) {
  std::string o;
  for (char c : s) o += std::isalnum(static_cast<unsigned char>(c)) ? static_cast<char>(std::tolower(c)) : '_';
  return o;
}

json report_json(const ResolvedSolver& rs, const SolveReport& rep, const json& echo) {
  json j{{"method", rs.name},
         {"method_id", to_string(rep.method)},
         {"k_star", rep.k_star},
         {"stop_reason", to_string(rep.stop_reason)},
         {"residual", rep.residual},
         {"wall_time", rep.wall_time},
         {"cpu_seconds", rep.cpu_time},
         {"min_entry", rep.min_entry},
         {"solver", rs.echo},
         {"config_echo", echo}};
  j["l2err"] = rep.l2err ? json(*rep.l2err) : json(nullptr);
  j["preconditioned_residual"] = rep.preconditioned_residual ? json(*rep.preconditioned_residual) : json(nullptr);
  j["threshold"] = rep.threshold ? json(*rep.threshold) : json(nullptr);
  return j;
}

void write_traces(const fs::path& path, const SolveReport& rep) {
  std::ostringstream os;
  os << "k,residual,functional,l2err\n";
  for (std::size_t k = 0; k < rep.residual_history.size(); ++k) {
    os << k << ',' << io::format_double(rep.residual_history[k]) << ','
       << io::format_double(rep.functional_history[k]) << ','
       << (k < rep.error_history.size() ? io::format_double(rep.error_history[k]) : std::string("")) << '\n';
  }
  io::write_text(path, os.str());
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

/// Runs `n` independent jobs on up to `threads` workers; exceptions are
/// rethrown after all workers stop.
void run_jobs(std::size_t n, int threads, const std::function<void(std::size_t)>& job) {
  const int t = std::max(1, std::min<int>(threads, static_cast<int>(n)));
  if (t == 1) {
    for (std::size_t i = 0; i < n; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr err;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (int w = 0; w < t; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          job(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!err) err = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (err) std::rethrow_exception(err);
}

}  // namespace

json cmd_synth(const json& config, const fs::path& out, const RunFlags& flags) {
  const ModelDescription d = description_from(config, flags);
  const Bundle b = synthesize(d);
  write_bundle(b, out);
  return json{{"bundle", out.string()}, {"h", b.h},           {"delta", b.delta},
              {"dt_h", b.dt_h},         {"seed", d.seed},     {"rows", b.a.rows()},
              {"cols", b.a.cols()},     {"normalization", b.model.normalization}};
}

json cmd_solve(const json& config, const fs::path& bundle_dir, const fs::path& out, const RunFlags& flags) {
  const Bundle b = read_bundle(bundle_dir);
  const InverseProblem p = b.problem();
  const Vector xd = b.phantom.coefficients();
  if (!config.contains("solvers") || !config["solvers"].is_array() || config["solvers"].empty())
    throw ConfigError("config needs a non-empty 'solvers' array");
  std::uint64_t seed = b.desc.seed;
  if (config.contains("noise") && config["noise"].contains("seed")) seed = parse_seed(config["noise"]["seed"]);
  if (flags.seed) seed = *flags.seed;
  json echo = config_echo(config, seed);
  echo["bundle"] = {{"path", bundle_dir.string()}, {"model_description", to_json(b.desc)}, {"h", b.h}, {"delta", b.delta}};
  const bool traces = flags.traces || config.value("traces", false);

  std::vector<ResolvedSolver> solvers;
  for (const auto& e : config["solvers"]) solvers.push_back(resolve_solver(e, p, xd.norm(), seed));
  std::vector<SolveReport> reps(solvers.size());
  run_jobs(solvers.size(), flags.parallel, [&](std::size_t i) {
    RunOptions o;
    o.x_dagger = xd;
    o.record_traces = traces;
    reps[i] = run_solver(solvers[i].cfg, p, solvers[i].stop, o);
  });

  fs::create_directories(out);
  std::ostringstream csv;
  csv << "method,k_star,stop_reason,l2err,residual,preconditioned_residual,threshold,cpu_seconds\n";
  json summary = json::array();
  for (std::size_t i = 0; i < solvers.size(); ++i) {
    const auto& r = reps[i];
    const std::string s = std::to_string(i) + "_" + slug(solvers[i].name);
    const json rj = report_json(solvers[i], r, echo);
    io::write_text(out / ("report_" + s + ".json"), rj.dump(2) + "\n");
    io::write_grid_csv(out / ("solution_" + s + ".csv"), b.model_grid,
                       RateConstantMap::from_coefficients(b.model_grid, r.x).values);
    if (traces) write_traces(out / ("trace_" + s + ".csv"), r);
    csv << solvers[i].name << ',' << r.k_star << ',' << to_string(r.stop_reason) << ','
        << (r.l2err ? io::format_double(*r.l2err) : "") << ',' << io::format_double(r.residual) << ','
        << (r.preconditioned_residual ? io::format_double(*r.preconditioned_residual) : "") << ','
        << (r.threshold ? io::format_double(*r.threshold) : "") << ',' << fmt("%.6g", r.cpu_time) << '\n';
    json sj = rj;
    sj.erase("config_echo");
    summary.push_back(sj);
  }
  io::write_text(out / "solve.csv", csv.str());
  return json{{"reports", summary}};
}

json cmd_compare(const json& config, const fs::path& out, const RunFlags& flags) {
  const ModelDescription base = description_from(config, flags);
  if (!config.contains("solvers") || !config["solvers"].is_array() || config["solvers"].size() < 2)
    throw ConfigError("compare needs at least 2 solver entries");
  std::vector<std::pair<double, double>> pairs;
  if (config.contains("noise") && config["noise"].contains("pairs")) {
    for (const auto& pr : config["noise"]["pairs"]) {
      if (!pr.is_array() || pr.size() != 2) throw ConfigError("noise.pairs entries must be [h_prime, delta_prime]");
      pairs.emplace_back(parse_fraction(pr[0], "noise pair h'"), parse_fraction(pr[1], "noise pair delta'"));
    }
  } else {
    pairs.emplace_back(base.h_prime, base.delta_prime);
  }
  const int reps = config.value("repetitions", 1);
  if (reps < 1) throw ConfigError("repetitions must be >= 1");

  struct Case {
    Bundle bundle;
    std::optional<InverseProblem> problem;
    std::vector<ResolvedSolver> solvers;
  };
  std::vector<Case> cases;
  for (int r = 0; r < reps; ++r) {
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      ModelDescription d = base;
      d.h_prime = pairs[i].first;
      d.delta_prime = pairs[i].second;
      if (r > 0) d.seed = child_seed(base.seed, "rep:" + std::to_string(r));
      Case c{synthesize(d), std::nullopt, {}};
      c.problem = c.bundle.problem();
      const double xn = c.bundle.phantom.coefficients().norm();
      for (const auto& e : config["solvers"]) c.solvers.push_back(resolve_solver(e, *c.problem, xn, d.seed));
      write_bundle(c.bundle, out / "bundles" / ("rep" + std::to_string(r) + "_pair" + std::to_string(i)));
      cases.push_back(std::move(c));
    }
  }
  const std::size_t ns = config["solvers"].size();
  std::vector<SolveReport> results(cases.size() * ns);
  run_jobs(results.size(), flags.parallel, [&](std::size_t t) {
    const Case& c = cases[t / ns];
    const ResolvedSolver& s = c.solvers[t % ns];
    RunOptions o;
    o.x_dagger = c.bundle.phantom.coefficients();
    results[t] = run_solver(s.cfg, *c.problem, s.stop, o);
  });

  std::ostringstream csv, txt;
  csv << kCompareHeader << '\n';
  json rows = json::array();
  for (std::size_t ci = 0; ci < cases.size(); ++ci) {
    const Case& c = cases[ci];
    txt << "(h', delta') = (" << fmt("%g%%", 100 * c.bundle.desc.h_prime) << ", "
        << fmt("%g%%", 100 * c.bundle.desc.delta_prime) << ")  seed " << c.bundle.desc.seed << "  realized h "
        << fmt("%.4g", c.bundle.h) << ", delta " << fmt("%.4g", c.bundle.delta) << '\n';
    txt << std::left << std::setw(22) << "method" << std::right << std::setw(14) << "L2Err" << std::setw(12) << "k*"
        << std::setw(14) << "CPU" << "  stop\n";
    for (std::size_t si = 0; si < ns; ++si) {
      const SolveReport& r = results[ci * ns + si];
      const std::string& name = c.solvers[si].name;
      csv << name << ',' << io::format_double(c.bundle.desc.h_prime) << ','
          << io::format_double(c.bundle.desc.delta_prime) << ',' << io::format_double(*r.l2err) << ',' << r.k_star
          << ',' << fmt("%.6g", r.cpu_time) << '\n';
      txt << std::left << std::setw(22) << name << std::right << std::setw(14) << fmt("%.4g", *r.l2err)
          << std::setw(12) << r.k_star << std::setw(14) << fmt("%.4g", r.cpu_time) << "  "
          << to_string(r.stop_reason) << '\n';
      rows.push_back({{"method", name},
                      {"noise_h", c.bundle.desc.h_prime},
                      {"noise_delta", c.bundle.desc.delta_prime},
                      {"seed", c.bundle.desc.seed},
                      {"realized_h", c.bundle.h},
                      {"realized_delta", c.bundle.delta},
                      {"l2err", *r.l2err},
                      {"k_star", r.k_star},
                      {"stop_reason", to_string(r.stop_reason)},
                      {"residual", r.residual},
                      {"min_entry", r.min_entry},
                      {"cpu_seconds", r.cpu_time},
                      {"solver", c.solvers[si].echo}});
    }
    txt << '\n';
  }
  fs::create_directories(out);
  io::write_text(out / "compare.csv", csv.str());
  io::write_text(out / "compare.txt", txt.str());
  const json doc{{"rows", rows}, {"config_echo", config_echo(config, base.seed)}};
  io::write_text(out / "compare.json", doc.dump(2) + "\n");
  return doc;
}

json cmd_rates(const json& config, const fs::path& out, const RunFlags& flags) {
  if (!config.contains("rates")) throw ConfigError("config needs a 'rates' section");
  const json& rc = config["rates"];
  RateStudyConfig base;
  try {
    const json pr = config.value("problem", json::object());
    if (pr.value("type", "synthetic") != "synthetic") throw ConfigError("rates needs a synthetic problem");
    base.n = pr.value("n", 32);
    base.lambda_decay = pr.value("lambda_decay", 2.0);
    base.mu = rc.value("mu", 1.0);
    base.seed = rc.contains("seed") ? parse_seed(rc["seed"]) : 1;
    if (flags.seed) base.seed = *flags.seed;
    base.log_exponent = rc.value("log_exponent", 0.5);
    base.v_scale = rc.value("v_scale", 1.0);
    if (rc.contains("scale") && rc["scale"].is_number()) base.scale = rc["scale"].get<double>();
    const json& dl = rc.at("deltas");
    if (dl.is_array()) {
      for (const auto& v : dl) base.deltas.push_back(parse_fraction(v, "deltas"));
    } else {
      const double from = dl.at("from").get<double>(), to = dl.at("to").get<double>();
      const int count = dl.at("count").get<int>();
      if (count < 2 || !(from > 0) || !(to > 0)) throw ConfigError("deltas: need count >= 2 and positive bounds");
      for (int i = 0; i < count; ++i)
        base.deltas.push_back(std::exp(std::log(from) + (std::log(to) - std::log(from)) * i / (count - 1)));
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("rates config: ") + e.what());
  }
  const std::string kind = rc.value("kind", "holder");
  if (kind == "holder")
    base.kind = SourceKind::Holder;
  else if (kind == "log")
    base.kind = SourceKind::Logarithmic;
  else
    throw ConfigError("rates.kind must be 'holder' or 'log'");
  const json params = rc.value(kind == "holder" ? "p" : "nu", json::array({1.0}));
  if (!params.is_array() || params.empty()) throw ConfigError("rates: parameter list must be a non-empty array");

  std::vector<RateStudyResult> res(params.size());
  run_jobs(params.size(), flags.parallel, [&](std::size_t i) {
    RateStudyConfig c = base;
    c.param = params[i].get<double>();
    res[i] = run_rate_study(c);
  });

  std::ostringstream csv, txt;
  csv << "kind,param,noise,error,k_star\n";
  json studies = json::array();
  for (std::size_t i = 0; i < res.size(); ++i) {
    const double param = params[i].get<double>();
    json rows = json::array();
    for (const auto& r : res[i].rows) {
      csv << kind << ',' << io::format_double(param) << ',' << io::format_double(r.noise) << ','
          << io::format_double(r.error) << ',' << r.k_star << '\n';
      rows.push_back({{"noise", r.noise}, {"error", r.error}, {"k_star", r.k_star}});
    }
    json s{{"kind", kind}, {"param", param}, {"slope", res[i].slope}, {"scale", res[i].scale}, {"rows", rows}};
    txt << kind << " " << (kind == "holder" ? "p" : "nu") << "=" << fmt("%g", param) << "  slope "
        << fmt("%.4f", res[i].slope);
    if (base.kind == SourceKind::Holder) {
      s["expected_slope"] = res[i].expected_slope;
      txt << "  (p/(p+1) = " << fmt("%.4f", res[i].expected_slope) << ")";
    } else {
      // errors should fall with the noise and stay under twice the
      // log^{-ν}(1/δ) profile fitted at the largest noise level
      const auto& rs = res[i].rows;
      std::size_t imax = 0;
      for (std::size_t k = 1; k < rs.size(); ++k)
        if (rs[k].noise > rs[imax].noise) imax = k;
      const double c = rs[imax].error / std::pow(std::log(1 / rs[imax].noise), -param);
      bool monotone = true, below = true;
      for (std::size_t a = 0; a < rs.size(); ++a) {
        below = below && rs[a].error <= 2 * c * std::pow(std::log(1 / rs[a].noise), -param);
        for (std::size_t b2 = 0; b2 < rs.size(); ++b2)
          if (rs[a].noise < rs[b2].noise && rs[a].error > rs[b2].error) monotone = false;
      }
      s["monotone"] = monotone;
      s["below_log_profile"] = below;
      txt << "  monotone " << (monotone ? "yes" : "no") << "  below 2x log profile " << (below ? "yes" : "no");
    }
    txt << '\n';
    studies.push_back(s);
  }
  fs::create_directories(out);
  io::write_text(out / "rates.csv", csv.str());
  io::write_text(out / "rates.txt", txt.str());
  const json doc{{"studies", studies}, {"config_echo", config_echo(config, base.seed)}};
  io::write_text(out / "rates.json", doc.dump(2) + "\n");
  return doc;
}

}  // namespace nnreg::cli
