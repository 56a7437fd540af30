// biharm: command-line driver for the steep-well toolkit.
//
//   biharm constants <config>
//   biharm spectrum  <config> [--count K] [--lambda-grid a,b,...]
//   biharm solve     <config> [--tol t] [--max-iter n] [--path-nodes n]
//   biharm limit     <config> [--tol t] [--max-iter n] [--path-nodes n]
//   biharm sweep     <config> [--lambda-grid a,b,...] [--cold]
//   biharm check     [config]
//
// Global: --seed, --out-dir, --threads, --dump-forms.
// Exit codes: 0 ok, 2 invalid config, 3 solver failure, 4 acceptance failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "biharm/acceptance.hpp"
#include "biharm/concentration.hpp"
#include "biharm/constants.hpp"
#include "biharm/discretization.hpp"
#include "biharm/io.hpp"
#include "biharm/limit_problem.hpp"
#include "biharm/model_config.hpp"
#include "biharm/spectral_decomposition.hpp"
#include "biharm/variational_solver.hpp"

namespace fs = std::filesystem;
using namespace biharm;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitSolver = 3;
constexpr int kExitAcceptance = 4;

struct Global {
  std::uint64_t seed = 1;
  std::string out_dir = "out";
  int threads = 1;
  bool dump_forms = false;
};

struct SolveFlags {
  double tol = -1.0;  // < 0: regime default
  int max_iter = 50000;
  int path_nodes = 41;
};

bool is_config_error(ErrorCode c) {
  return c == ErrorCode::InvalidConfig || c == ErrorCode::InvalidGeometry || c == ErrorCode::InvalidExponent ||
         c == ErrorCode::InvalidLambda;
}

std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      require(used == item.size(), ErrorCode::InvalidConfig, "bad lambda grid entry '" + item + "'");
    } catch (const std::logic_error&) {
      fail(ErrorCode::InvalidConfig, "bad lambda grid entry '" + item + "'");
    }
  }
  require(!out.empty(), ErrorCode::InvalidConfig, "empty lambda grid");
  return out;
}

class Run {
 public:
  Run(std::string command, const Global& g, std::string config_path)
      : g_(g), dir_(g.out_dir) {
    manifest_.command = std::move(command);
    manifest_.config_path = std::move(config_path);
    manifest_.seed = g.seed;
    manifest_.threads = g.threads;
    manifest_.started = utc_timestamp();
  }

  /// Loads and validates the config; nothing is written on failure.
  ProblemParams load() {
    auto p = load_params(manifest_.config_path);
    const auto report = validate(p);
    manifest_.config = params_to_json(p);
    for (const auto& c : report.checks) manifest_.checks["validate." + c.name] = to_string(c.status);
    return p;
  }

  const fs::path& dir() {
    fs::create_directories(dir_);
    return dir_;
  }

  void write(const std::string& name, const Csv& csv) {
    csv.write(dir() / name);
    manifest_.outputs.push_back((dir_ / name).string());
  }

  void write_json(const std::string& name, const json& j) {
    std::ofstream out(dir() / name);
    out << j.dump(2) << '\n';
    manifest_.outputs.push_back((dir_ / name).string());
  }

  void dump(const QuadraticForms& forms) {
    if (!g_.dump_forms) return;
    for (auto& path : dump_forms(forms, dir().string())) manifest_.outputs.push_back(path);
  }

  RunManifest& manifest() { return manifest_; }

  int finish(int code) {
    manifest_.exit_code = code;
    manifest_.finished = utc_timestamp();
    manifest_.write(dir());
    return code;
  }

 private:
  Global g_;
  fs::path dir_;
  RunManifest manifest_;
};

int cmd_constants(Run& run) {
  const auto p = run.load();
  const int count = 16;
  const auto setup = dirichlet_mu(p.well.omega, count);
  Csv csv({"name", "value", "formula_branch"});
  const std::string regime = indefinite(p.a0, p.b0) ? "indefinite" : "definite";
  csv.row({"lambda_floor", Csv::num(lambda_floor(p.b0, p.well.b_infty)), "max{0,-b0/b_infty}"});
  csv.row({"critical_exponent", Csv::num(critical_exponent(p.N)), p.N >= 3 ? "2N/(N-2)" : "infinite: N<=2"});
  for (std::size_t j = 0; j < setup.mu_bar.size(); ++j)
    csv.row({"mu_bar_" + std::to_string(j + 1), Csv::num(setup.mu_bar[j]), "dirichlet level, multiplicity " +
                                                                               std::to_string(setup.multiplicities[j])});
  if (indefinite(p.a0, p.b0)) {
    const auto t = thresholds(p, setup);
    for (std::size_t j = 0; j < setup.mu_bar.size(); ++j) {
      csv.row({"beta0_" + std::to_string(j + 1), Csv::num(beta0(static_cast<int>(j) + 1, p.a0, p.b0, setup)), regime});
      csv.row({"Lambda_" + std::to_string(j + 1), Csv::num(t.Lambda_k[j]), regime});
    }
    csv.row({"k0_star", std::to_string(t.k0_star), t.linking_admissible ? "linking" : "mountain pass"});
    csv.row({"d_star", Csv::num(t.d_star), "max over j<=k0* of sqrt(mu^2+a0+ mu+b0+)"});
  } else {
    csv.row({"k0_star", "1", "definite"});
  }
  const auto spec = limit_spectrum(p.a0, p.b0, setup, static_cast<int>(setup.mu.size()));
  for (std::size_t k = 0; k < std::min<std::size_t>(spec.size(), 8); ++k)
    csv.row({"limit_spectrum_" + std::to_string(k + 1), Csv::num(spec[k]), "mu^2+a0 mu+b0"});
  if (p.N >= 3) {
    const auto ec = embedding_constants(p);
    csv.row({"S", Csv::num(ec.S), "sharp sobolev"});
    csv.row({"B0", Csv::num(ec.B0), "gagliardo-nirenberg"});
    csv.row({"sublevel_measure", Csv::num(ec.sublevel_measure), "|{b<b_infty}|"});
    csv.row({"A_infty", Csv::num(ec.A_infty), "|B_infty|^{2/N}/S"});
    csv.row({"C_lambda", Csv::num(ec.C_lambda), ec.branch});
    csv.row({"d0", Csv::num(ec.d0), ec.branch});
  } else {
    run.manifest().checks["embedding_constants"] = "skipped: N <= 2";
  }
  run.write("constants.csv", csv);
  return run.finish(kExitOk);
}

int cmd_spectrum(Run& run, int count, const std::optional<std::string>& grid_text) {
  const auto p = run.load();
  const auto grid = grid_text ? parse_grid(*grid_text) : std::vector<double>{p.lambda};
  const auto table = eigen_convergence_sweep(p, grid, count);
  Csv csv({"lambda", "k", "beta_k", "beta_k_0", "rel_err", "outside_mass", "residual"});
  for (const auto& r : table.rows)
    csv.row({Csv::num(r.lambda), std::to_string(r.k), Csv::num(r.beta), Csv::num(r.beta0), Csv::num(r.rel_err),
             Csv::num(r.outside_mass), Csv::num(r.residual)});
  run.write("spectrum.csv", csv);
  if (table.empirical_simple_from)
    run.manifest().checks["beta1_simple_from_lambda"] = *table.empirical_simple_from;
  if (run.manifest().command == "spectrum") {
    const auto basis = build_basis(p.well.domain, p.modes_per_dim);
    run.dump(assemble_forms(basis, p));
  }
  return run.finish(kExitOk);
}

json trace_summary(const CriticalPoint& c) {
  json t = json::array();
  const std::size_t n = c.cerami_trace.size();
  const std::size_t stride = std::max<std::size_t>(1, n / 50);
  for (std::size_t i = 0; i < n; i += stride) {
    const auto& e = c.cerami_trace[i];
    t.push_back({{"iteration", e.iteration}, {"energy", e.energy}, {"norm", e.norm}, {"grad_norm", e.grad_norm},
                 {"cerami", e.cerami}});
  }
  return t;
}

json point_report(const CriticalPoint& c, const LinkingGeometry* g, const QuadraticForms& forms,
                  const NonlinearitySpec& spec) {
  json r = {{"method", c.method},
            {"energy", c.energy},
            {"grad_norm", c.grad_norm},
            {"norm_lambda", c.norm},
            {"iterations", c.iterations},
            {"newton_iterations", c.newton_iterations},
            {"trace_length", c.cerami_trace.size()},
            {"trace_norm_bound", c.trace_norm_bound()},
            {"trace", trace_summary(c)}};
  if (c.coeffs.size() == static_cast<Eigen::Index>(forms.size()))
    r["relative_euler_lagrange_residual"] = euler_lagrange_residual(forms, spec, c.coeffs);
  if (g != nullptr)
    r["geometry"] = {{"rho", g->rho},
                     {"kappa", g->kappa},
                     {"R", g->R},
                     {"boundary_sup", g->boundary_sup},
                     {"negative_dim", g->negative_dim()},
                     {"sphere_samples", g->sphere_samples},
                     {"boundary_samples", g->boundary_samples}};
  return r;
}

void write_solution(Run& run, const CriticalPoint& c) {
  Csv csv({"mode_index", "coefficient"});
  for (Eigen::Index k = 0; k < c.coeffs.size(); ++k) csv.row({std::to_string(k), Csv::num(c.coeffs(k))});
  run.write("solution.csv", csv);
}

SolveOptions solve_options(const SolveFlags& f, bool linking) {
  SolveOptions so;
  so.tol = f.tol >= 0.0 ? f.tol : (linking ? 1e-6 : 1e-8);
  so.max_iter = f.max_iter;
  so.path_nodes = f.path_nodes;
  return so;
}

int solve_and_report(Run& run, const QuadraticForms& forms, const NonlinearitySpec& spec, const SolveFlags& flags,
                     std::uint64_t seed, const HypothesisReport& hyp) {
  std::optional<SpectralDecomposition> dec;
  if (!forms.negative_part_vanishes()) dec = solve_pencil(forms, std::min<int>(8, static_cast<int>(forms.size())));
  run.manifest().checks["hypotheses"] = {{"definite", hyp.definite},
                                         {"k0_star", hyp.k0_star},
                                         {"linking_admissible", hyp.linking_admissible},
                                         {"window_ok", hyp.window_ok},
                                         {"window_squared_ok", hyp.window_squared_ok},
                                         {"off_limit_spectrum", hyp.off_limit_spectrum}};
  GeometryOptions go;
  go.seed = seed;
  try {
    const auto geo = find_linking_geometry(forms, spec, dec ? &*dec : nullptr, go);
    const auto opts = solve_options(flags, !geo.mountain_pass);
    const auto c = linking_solve(forms, spec, geo, opts);
    write_solution(run, c);
    auto rep = point_report(c, &geo, forms, spec);
    rep["status"] = "ok";
    run.write_json("report.json", rep);
    return run.finish(kExitOk);
  } catch (const SolverError& e) {
    write_solution(run, e.partial());
    auto rep = point_report(e.partial(), nullptr, forms, spec);
    rep["status"] = std::string(to_string(e.code()));
    rep["message"] = e.what();
    run.write_json("report.json", rep);
    std::cerr << "solver failure: " << e.what() << '\n';
    return run.finish(kExitSolver);
  }
}

int cmd_solve(Run& run, const SolveFlags& flags, std::uint64_t seed) {
  const auto p = run.load();
  const auto basis = build_basis(p.well.domain, p.modes_per_dim);
  const auto forms = assemble_forms(basis, p);
  run.dump(forms);
  const auto hyp = check_hypotheses(p.a0, p.b0, p.nonlinearity, p.well.omega);
  return solve_and_report(run, forms, p.nonlinearity, flags, seed, hyp);
}

int cmd_limit(Run& run, const SolveFlags& flags, std::uint64_t seed) {
  const auto p = run.load();
  const auto forms = assemble_limit_forms(p.well.omega, p.modes_per_dim, p.quadrature_panels, p.a0, p.b0);
  run.dump(forms);
  const auto hyp = check_hypotheses(p.a0, p.b0, p.nonlinearity, p.well.omega);
  Csv spec({"k", "eigenvalue"});
  const auto ev = limit_quadratic_spectrum(forms, 8);
  for (std::size_t k = 0; k < ev.size(); ++k) spec.row({std::to_string(k + 1), Csv::num(ev[k])});
  run.write("limit_spectrum.csv", spec);
  return solve_and_report(run, forms, p.nonlinearity, flags, seed, hyp);
}

int cmd_sweep(Run& run, const std::optional<std::string>& grid_text, bool cold, const SolveFlags& flags,
              const Global& g) {
  const auto p = run.load();
  const auto grid = grid_text ? parse_grid(*grid_text) : std::vector<double>{1e2, 1e3, 1e4};
  SweepOptions opt;
  opt.warm_start = !cold;
  opt.threads = g.threads;
  opt.geometry.seed = g.seed;
  opt.limit.geometry.seed = g.seed;
  opt.limit.modes_per_dim = p.modes_per_dim;
  opt.limit.quadrature_panels = p.quadrature_panels;
  opt.solve = solve_options(flags, indefinite(p.a0, p.b0));
  const auto rep = sweep(p, grid, opt);
  run.write("sweep.csv", acceptance::sweep_csv(rep));
  run.manifest().checks["limit_status"] = rep.limit_status;
  bool any_ok = false;
  for (const auto& r : rep.rows) any_ok = any_ok || r.ok();
  return run.finish(any_ok ? kExitOk : kExitSolver);
}

int cmd_check(Run& run, const Global& g) {
  if (!run.manifest().config_path.empty()) (void)run.load();
  acceptance::Settings s;
  s.seed = g.seed;
  s.threads = g.threads;
  std::vector<acceptance::CriterionResult> results;
  bool all = true;
  for (int id = 1; id <= 8; ++id) {
    results.push_back(acceptance::run(id, s));
    std::cout << acceptance::summary_line(results.back()) << std::endl;
    all = all && results.back().passed;
  }
  // Determinism: regenerate every artifact and compare bytes.
  bool same = true;
  for (int id = 1; id <= 8; ++id) {
    const auto again = acceptance::run(id, s);
    same = same && again.artifacts == results[static_cast<std::size_t>(id - 1)].artifacts;
  }
  acceptance::CriterionResult det;
  det.id = 9;
  det.title = "regenerated artifacts are byte-identical";
  det.flag("identical artifact bytes", same);
  det.finish();
  results.push_back(det);
  std::cout << acceptance::summary_line(det) << std::endl;
  all = all && same;

  for (const auto& r : results) {
    for (const auto& [name, text] : r.artifacts) {
      std::ofstream(run.dir() / name, std::ios::binary) << text;
      run.manifest().outputs.push_back((run.dir() / name).string());
    }
    run.manifest().checks["criterion_" + std::to_string(r.id)] = {
        {"passed", r.passed}, {"seconds", r.seconds}, {"note", r.note}};
  }
  run.write("acceptance.csv", acceptance::verdict_csv(results));
  return run.finish(all ? kExitOk : kExitAcceptance);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spectral Galerkin toolkit for the biharmonic steep-well problem"};
  app.require_subcommand(1);
  app.fallthrough();
  Global g;
  app.add_option("--seed", g.seed, "RNG seed for sampling")->capture_default_str();
  app.add_option("--out-dir", g.out_dir, "artifact directory")->capture_default_str();
  app.add_option("--threads", g.threads, "worker threads (cold sweeps)")->check(CLI::PositiveNumber);
  app.add_flag("--dump-forms", g.dump_forms, "write the assembled matrices as CSV");

  std::string config;
  SolveFlags sf;
  int count = 5;
  std::optional<std::string> grid;
  bool cold = false;

  auto* c_constants = app.add_subcommand("constants", "closed-form constants and thresholds");
  c_constants->add_option("config", config, "problem JSON")->required();

  auto* c_spectrum = app.add_subcommand("spectrum", "pencil eigenvalues across a lambda grid");
  c_spectrum->add_option("config", config, "problem JSON")->required();
  c_spectrum->add_option("--count", count, "eigenpairs per lambda")->check(CLI::PositiveNumber);
  c_spectrum->add_option("--lambda-grid", grid, "comma-separated lambdas");

  auto add_solve_flags = [&](CLI::App* c) {
    c->add_option("config", config, "problem JSON")->required();
    c->add_option("--tol", sf.tol, "gradient tolerance (default 1e-8 definite, 1e-6 linking)");
    c->add_option("--max-iter", sf.max_iter, "iteration cap")->check(CLI::PositiveNumber);
    c->add_option("--path-nodes", sf.path_nodes, "mountain-pass path nodes")->check(CLI::Range(3, 100000));
  };
  auto* c_solve = app.add_subcommand("solve", "nontrivial critical point of E_lambda");
  add_solve_flags(c_solve);
  auto* c_limit = app.add_subcommand("limit", "critical point of the well-bottom problem on Omega");
  add_solve_flags(c_limit);

  auto* c_sweep = app.add_subcommand("sweep", "concentration diagnostics across lambda");
  c_sweep->add_option("config", config, "problem JSON")->required();
  c_sweep->add_option("--lambda-grid", grid, "comma-separated increasing lambdas (default 1e2,1e3,1e4)");
  c_sweep->add_flag("--cold", cold, "no warm starts between lambdas");
  c_sweep->add_option("--tol", sf.tol, "gradient tolerance");

  auto* c_check = app.add_subcommand("check", "run the acceptance suite");
  c_check->add_option("config", config, "optional problem JSON recorded in the manifest");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  Run run(name, g, config);
  try {
    if (name == "constants") return cmd_constants(run);
    if (name == "spectrum") return cmd_spectrum(run, count, grid);
    if (name == "solve") return cmd_solve(run, sf, g.seed);
    if (name == "limit") return cmd_limit(run, sf, g.seed);
    if (name == "sweep") return cmd_sweep(run, grid, cold, sf, g);
    if (name == "check") return cmd_check(run, g);
  } catch (const Error& e) {
    std::cerr << e.what() << '\n';
    if (is_config_error(e.code()) && run.manifest().config.is_null()) return kExitConfig;
    return run.finish(is_config_error(e.code()) ? kExitConfig : kExitSolver);
  }
  return kExitConfig;
}
