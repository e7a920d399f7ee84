// Experiment runner: afemmg <experiment> --config <path> [options]

#include "afemmg/experiments.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace afemmg;

namespace {

[[noreturn]] void config_error(const std::string& msg) { throw Error(ErrorCode::kConfig, msg); }

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) config_error(where + " must be an object");
  for (const auto& [key, _] : j.items()) {
    if (!allowed.count(key)) config_error("unknown key '" + key + "' in " + where);
  }
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    config_error(std::string("bad value for '") + key + "'");
  }
}

Problem load_problem(const json& j) {
  reject_unknown(j, {"name", "mesh", "K", "f"}, "problem");
  if (!j.contains("name")) config_error("problem.name is required");
  Problem pr = make_problem(j.at("name").get<std::string>());
  if (j.contains("mesh")) {
    try {
      pr.mesh = std::make_shared<const MeshLevel>(read_mesh_file(j.at("mesh").get<std::string>()));
    } catch (const Error& e) {
      config_error(e.what());
    }
    if (pr.name == "checkerboard") pr.K = checkerboard_coefficient(*pr.mesh, 1.0, 100.0);
  }
  if (j.contains("K")) {
    const json& k = j.at("K");
    if (k == "identity") {
      pr.K = DiffusionField::identity();
    } else if (k == "checkerboard") {
      pr.K = checkerboard_coefficient(*pr.mesh, 1.0, 100.0);
    } else if (k.is_array()) {
      auto values = k.get<std::vector<double>>();
      if (static_cast<int>(values.size()) != pr.mesh->num_triangles()) {
        config_error("problem.K table needs one value per initial triangle");
      }
      for (double v : values) {
        if (!(v > 0.0)) config_error("problem.K values must be positive");
      }
      pr.K = DiffusionField::per_element(std::move(values));
    } else {
      config_error("problem.K must be \"identity\", \"checkerboard\" or a table");
    }
  }
  if (j.contains("f")) {
    const json& f = j.at("f");
    if (f.is_number()) {
      const double c = f.get<double>();
      pr.f = [c](const Point&) { return c; };
      pr.exact_grad = nullptr;
    } else if (f == "manufactured") {
      if (pr.name != "manufactured_sine") config_error("f = \"manufactured\" needs manufactured_sine");
    } else {
      config_error("problem.f must be a number or \"manufactured\"");
    }
  }
  return pr;
}

struct Options {
  std::string experiment;
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  bool with_exact = false;
  bool large = false;
};

// Levels above this are only run with --large.
constexpr int kDefaultLevelCap = 12;

RefineRule parse_rule(const std::string& s) {
  if (s == "all_edges") return RefineRule::kAllEdges;
  if (s == "refinement_edge") return RefineRule::kRefinementEdge;
  config_error("refine_rule must be \"all_edges\" or \"refinement_edge\"");
}

void write_file(const fs::path& path, const auto& rows) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  write_csv(os, rows);
  std::cout << "wrote " << path.string() << '\n';
}

int run(const Options& opt) {
  std::ifstream in(opt.config_path);
  if (!in) throw Error(ErrorCode::kConfig, "cannot open config " + opt.config_path);
  json cfg;
  try {
    cfg = json::parse(in);
  } catch (const json::exception& e) {
    config_error(std::string("invalid JSON: ") + e.what());
  }
  reject_unknown(cfg, {"experiment", "problem", "solvers", "p", "theta", "lambda_stop", "tolerances",
                       "seed", "output_dir", "levels", "budget", "refine_rule", "lanczos_steps",
                       "mesh_snapshots"},
                 "config");
  if (cfg.contains("experiment") && cfg.at("experiment") != opt.experiment) {
    config_error("config is for experiment '" + cfg.at("experiment").get<std::string>() + "'");
  }
  if (!cfg.contains("problem")) config_error("problem is required");
  const Problem problem = load_problem(cfg.at("problem"));

  StudyConfig study;
  study.degrees = get_or(cfg, "p", std::vector<int>{1});
  for (int p : study.degrees) {
    if (p < 1 || p > kMaxPolynomialDegree) config_error("p out of range");
  }
  study.theta = get_or(cfg, "theta", 0.5);
  study.lambda_stop = get_or(cfg, "lambda_stop", 0.1);
  if (!(study.theta > 0.0 && study.theta <= 1.0)) config_error("theta must lie in (0,1]");
  if (!(study.lambda_stop > 0.0)) config_error("lambda_stop must be positive");
  study.refine_rule = parse_rule(get_or<std::string>(cfg, "refine_rule", "all_edges"));
  study.seed = opt.seed.value_or(get_or<std::uint64_t>(cfg, "seed", 0));
  study.lanczos_steps = get_or(cfg, "lanczos_steps", 60);
  if (cfg.contains("tolerances")) {
    const json& t = cfg.at("tolerances");
    reject_unknown(t, {"energy", "max_iter"}, "tolerances");
    study.energy_tol = get_or(t, "energy", study.energy_tol);
    study.max_iter = get_or(t, "max_iter", study.max_iter);
  }
  for (int l : get_or(cfg, "levels", std::vector<int>{})) {
    if (l < 0) config_error("levels must be non-negative");
    if (l > kDefaultLevelCap && !opt.large) {
      std::cerr << "skipping level " << l << " (needs --large)\n";
      continue;
    }
    study.levels.push_back(l);
  }
  std::vector<std::string> solver_names = get_or(cfg, "solvers", std::vector<std::string>{});

  fs::path out = opt.out_dir.empty() ? fs::path(get_or<std::string>(cfg, "output_dir", "out"))
                                     : fs::path(opt.out_dir);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec || !fs::is_directory(out)) throw Error(ErrorCode::kConfig, "output directory not writable: " + out.string());

  const std::string& ex = opt.experiment;
  if (ex == "condition") {
    std::vector<PrecondKind> precs;
    for (const auto& s : solver_names) {
      if (s == "AS") precs.push_back(PrecondKind::kAs);
      else if (s == "sMG") precs.push_back(PrecondKind::kSMg);
      else if (s == "BPX") precs.push_back(PrecondKind::kBpx);
      else config_error("condition preconditioners are AS, sMG, BPX; got " + s);
    }
    write_file(out / "condition.csv", run_condition(problem, precs, study));
    return 0;
  }
  for (const auto& s : solver_names) study.solvers.push_back(parse_solver(s));

  if (ex == "contraction") {
    write_file(out / "contraction.csv", run_contraction(problem, study));
  } else if (ex == "robustness") {
    const auto rows = run_robustness(problem, study);
    for (const auto& r : rows) {
      if (!r.converged) {
        std::cerr << "warning: " << r.solver << " p=" << r.p << " level=" << r.level << " stopped unconverged after "
                  << r.steps << " steps\n";
      }
    }
    write_file(out / "robustness.csv", rows);
  } else if (ex == "failure") {
    write_file(out / "failure.csv", run_failure(problem, study));
  } else if (ex == "afem") {
    if (study.solvers.empty()) study.solvers.push_back(SolverKind::kGpcgMg);
    AfemConfig ac;
    ac.theta = study.theta;
    ac.lambda_stop = study.lambda_stop;
    ac.refine_rule = study.refine_rule;
    ac.with_exact = opt.with_exact;
    if (cfg.contains("budget")) {
      const json& b = cfg.at("budget");
      reject_unknown(b, {"max_level", "max_dofs", "max_cum_dofs", "max_solver_steps"}, "budget");
      ac.max_level = get_or(b, "max_level", ac.max_level);
      ac.max_dofs = get_or(b, "max_dofs", ac.max_dofs);
      ac.max_cum_dofs = get_or(b, "max_cum_dofs", ac.max_cum_dofs);
      ac.max_solver_steps = get_or(b, "max_solver_steps", ac.max_solver_steps);
    }
    if (ac.max_level < 0 && ac.max_dofs <= 0 && ac.max_cum_dofs <= 0) {
      config_error("afem needs a budget (max_level, max_dofs or max_cum_dofs)");
    }
    const bool snapshots = get_or(cfg, "mesh_snapshots", false);
    for (SolverKind kind : study.solvers) {
      for (int p : study.degrees) {
        ac.solver = kind;
        ac.p = p;
        const AfemResult res = adaptive_loop(problem, ac);
        std::string tag = problem.name + "_" + to_string(kind) + "_p" + std::to_string(p);
        std::replace(tag.begin(), tag.end(), '+', '-');
        write_file(out / ("afem_" + tag + ".csv"), res.log);
        std::cout << "  stop: " << res.log.stop_reason << '\n';
        if (snapshots) {
          for (int l = 0; l < res.hierarchy.num_levels(); ++l) {
            std::ofstream os(out / ("mesh_" + tag + "_level" + std::to_string(l) + ".mesh"));
            res.hierarchy.level(l).write(os);
          }
        }
      }
    }
  } else {
    config_error("unknown experiment '" + ex + "'");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive FEM with multigrid-preconditioned Krylov solvers"};
  Options opt;
  app.add_option("experiment", opt.experiment, "afem | contraction | robustness | condition | failure")
      ->required()
      ->check(CLI::IsMember({"afem", "contraction", "robustness", "condition", "failure"}));
  app.add_option("--config", opt.config_path, "JSON experiment config")->required();
  app.add_option("--out", opt.out_dir, "output directory (overrides output_dir)");
  app.add_option("--seed", opt.seed, "random seed (overrides seed)");
  app.add_flag("--with-exact", opt.with_exact, "log the quasi-error via direct solves (afem)");
  app.add_flag("--large", opt.large, "allow levels above 12");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  try {
    return run(opt);
  } catch (const Error& e) {
    std::cerr << "afemmg: " << e.what() << '\n';
    return e.code() == ErrorCode::kConfig || e.code() == ErrorCode::kIo ? 2 : 3;
  } catch (const std::exception& e) {
    std::cerr << "afemmg: " << e.what() << '\n';
    return 3;
  }
}
