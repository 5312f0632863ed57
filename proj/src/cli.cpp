#include "opgd/cli.hpp"

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "opgd/csv_io.hpp"
#include "opgd/data.hpp"
#include "opgd/error.hpp"
#include "opgd/experiment.hpp"
#include "opgd/gram.hpp"
#include "opgd/network.hpp"
#include "opgd/trainer.hpp"
#include "opgd/verify.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace opgd::cli {

namespace {

struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

std::uint64_t default_seed() {
  if (const char* env = std::getenv("OPGD_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw UsageError(std::string("OPGD_SEED is not an unsigned integer: ") + env);
    }
  }
  return 1;
}

template <typename T>
void take(const json& cfg, const char* key, T& field) {
  if (cfg.contains(key)) field = cfg.at(key).get<T>();
}

// --- gen -------------------------------------------------------------------

struct GenArgs {
  std::size_t n = 100;
  std::size_t d = 50;
  std::uint64_t seed = 1;
  std::string out;
  bool spectrum = false;

  void apply(const json& c) {
    take(c, "n", n);
    take(c, "d", d);
    take(c, "seed", seed);
    take(c, "out", out);
    take(c, "spectrum", spectrum);
  }
  json resolved() const {
    return {{"command", "gen"}, {"n", n}, {"d", d}, {"seed", seed}, {"out", out}, {"spectrum", spectrum}};
  }
};

int cmd_gen(const GenArgs& a) {
  const Dataset ds = generate_sphere_dataset(a.n, a.d, a.seed);
  save_dataset(ds, a.out);
  io::write_json(fs::path(a.out) / "resolved_config.json", a.resolved());
  const auto angle = min_pairwise_angle(ds.X);
  std::cout << "wrote " << a.out << " (n=" << ds.n() << ", d=" << ds.d() << ")\n";
  std::cout << "min pairwise angle: " << io::format_double(angle.angle) << " rad (rows " << angle.i
            << ", " << angle.j << ")\n";
  if (a.spectrum) {
    const auto spec = min_eigenvalue(gram_H_infinity(ds));
    std::cout << "lambda0 = " << io::format_double(spec.lambda_min)
              << "  lambda_max(H_inf) = " << io::format_double(spec.lambda_max) << '\n';
  }
  return kSuccess;
}

// --- train -----------------------------------------------------------------

struct TrainArgs {
  std::string data;
  std::string mode = "gd_first_layer";
  std::size_t m = 1000;
  std::size_t steps = 100;
  std::string eta = "0.01";
  double dt = 0.0;
  double horizon = 1.0;
  std::size_t record_every = 1;
  std::size_t gram_every = 10;
  double flip_radius = 0.0;
  std::uint64_t seed = 1;
  std::string out;

  void apply(const json& c) {
    take(c, "data", data);
    take(c, "mode", mode);
    take(c, "m", m);
    take(c, "steps", steps);
    if (c.contains("eta"))
      eta = c["eta"].is_string() ? c["eta"].get<std::string>() : io::format_double(c["eta"].get<double>());
    take(c, "dt", dt);
    take(c, "horizon", horizon);
    take(c, "record_every", record_every);
    take(c, "gram_every", gram_every);
    take(c, "flip_radius", flip_radius);
    take(c, "seed", seed);
    take(c, "out", out);
  }
};

void write_lr_trajectory(const LinearRegressionRun& run, double eta, const fs::path& path) {
  Trajectory traj;
  for (std::size_t k = 0; k < run.residual_norms.size(); ++k) {
    TrajectoryRecord r;
    r.step = k;
    r.time = static_cast<double>(k) * eta;
    r.residual_norm_sq = run.residual_norms[k] * run.residual_norms[k];
    r.loss = 0.5 * r.residual_norm_sq;
    traj.push_back(r);
  }
  write_trajectory_csv(traj, path);
}

int cmd_train(const TrainArgs& a) {
  const TrainMode mode = parse_train_mode(a.mode);
  const Dataset ds = load_dataset(a.data);
  const EtaPolicy policy = EtaPolicy::parse(a.eta);
  double lambda0 = 0.0;
  double eta = policy.value;
  if (policy.kind == EtaPolicy::Kind::theory) {
    lambda0 = compute_lambda0(ds);
    eta = theory_step_size(lambda0, ds.n());
  }
  fs::create_directories(a.out);
  json resolved = {{"command", "train"},  {"data", a.data},
                   {"mode", a.mode},      {"m", a.m},
                   {"steps", a.steps},    {"eta_policy", policy.to_string()},
                   {"eta", eta},          {"dt", a.dt},
                   {"horizon", a.horizon}, {"record_every", a.record_every},
                   {"gram_every", a.gram_every}, {"flip_radius", a.flip_radius},
                   {"seed", a.seed},      {"out", a.out}};
  if (policy.kind == EtaPolicy::Kind::theory) resolved["lambda0"] = lambda0;

  const fs::path traj_path =
      fs::path(a.out) / trajectory_filename(mode, ds.n(), ds.d(), a.m, a.seed);
  resolved["trajectory"] = traj_path.filename().string();

  if (mode == TrainMode::linear_regression) {
    const auto run = linear_regression_dynamics(ds.X, ds.y, eta, a.steps);
    write_lr_trajectory(run, eta, traj_path);
    io::write_json(fs::path(a.out) / "resolved_config.json", resolved);
    std::cout << "final residual norm: " << io::format_double(run.residual_norms.back()) << '\n';
    return kSuccess;
  }

  TrainConfig cfg;
  cfg.mode = mode;
  cfg.eta = eta;
  cfg.steps = a.steps;
  cfg.dt = a.dt;
  cfg.horizon = a.horizon;
  cfg.record_every = a.record_every;
  cfg.gram_every = a.gram_every;
  cfg.flip_radius = a.flip_radius;
  cfg.seed = a.seed;
  validate_config(cfg);

  const TwoLayerNet net0 = init_network(a.m, ds.d(), a.seed);
  save_checkpoint(net0, a.mode, fs::path(a.out) / "checkpoint_init");
  io::write_json(fs::path(a.out) / "resolved_config.json", resolved);
  try {
    const TrainResult res = train(net0, ds, cfg);
    write_trajectory_csv(res.records, traj_path);
    save_checkpoint(res.net, a.mode, fs::path(a.out) / "checkpoint_final");
    const auto& last = res.records.back();
    std::cout << "step " << last.step << ": loss " << io::format_double(last.loss)
              << ", flip fraction " << io::format_double(last.pattern_flip_fraction)
              << ", max deviation " << io::format_double(last.max_weight_deviation) << '\n';
    return kSuccess;
  } catch (const DivergenceError& e) {
    write_trajectory_csv(e.records(), traj_path);
    std::cerr << "error: " << e.what() << '\n';
    return kDiverged;
  }
}

// --- verify ----------------------------------------------------------------

const std::vector<std::string> kTrajectoryChecks = {"linear_convergence", "deviation_bound",
                                                    "gram_stability", "flip_set_bound"};
const std::vector<std::string> kAllChecks = {"linear_convergence", "deviation_bound",
                                             "gram_stability",     "flip_set_bound",
                                             "positive_definiteness", "concentration"};

struct VerifyArgs {
  std::string run;
  std::string data;
  std::vector<std::string> checks;
  double delta = kDefaultDelta;
  double c_r = kDefaultCR;
  std::vector<std::size_t> m_list;
  std::size_t trials = 10;
  std::uint64_t seed = 1;
  std::string out;
  bool strict = false;

  void apply(const json& c) {
    take(c, "run", run);
    take(c, "data", data);
    take(c, "checks", checks);
    take(c, "delta", delta);
    take(c, "c_r", c_r);
    take(c, "m_list", m_list);
    take(c, "trials", trials);
    take(c, "seed", seed);
    take(c, "out", out);
    take(c, "strict", strict);
  }
};

int cmd_verify(VerifyArgs a) {
  for (const auto& c : a.checks)
    if (std::find(kAllChecks.begin(), kAllChecks.end(), c) == kAllChecks.end())
      throw UsageError("unknown check '" + c + "'");
  if (a.checks.empty()) {
    if (!a.run.empty()) a.checks = kTrajectoryChecks;
    a.checks.push_back("positive_definiteness");
  }
  const bool wants_concentration =
      std::find(a.checks.begin(), a.checks.end(), "concentration") != a.checks.end();
  if (wants_concentration) {
    if (a.m_list.size() < 4) throw UsageError("--check concentration needs at least 4 --m-list widths");
    const auto [lo, hi] = std::minmax_element(a.m_list.begin(), a.m_list.end());
    if (*hi < 4 * *lo) throw UsageError("--m-list must span at least 2 octaves");
  }

  json run_cfg;
  if (!a.run.empty()) {
    run_cfg = io::read_json(fs::path(a.run) / "resolved_config.json");
    if (a.data.empty()) a.data = run_cfg.at("data").get<std::string>();
  }
  if (a.data.empty()) throw UsageError("verify needs --data or --run");
  const Dataset ds = load_dataset(a.data);
  fs::create_directories(a.out);

  std::vector<VerificationReport> reports;
  std::optional<Trajectory> traj;
  std::optional<TwoLayerNet> net0;
  std::optional<TheoryBounds> bounds;
  auto need_run = [&](const std::string& check) {
    if (a.run.empty()) throw UsageError("check '" + check + "' needs --run");
    if (!traj) {
      traj = read_trajectory_csv(fs::path(a.run) / run_cfg.at("trajectory").get<std::string>());
      net0 = load_checkpoint(fs::path(a.run) / "checkpoint_init").net;
      bounds = compute_theory_bounds(ds, predict_all(*net0, ds), net0->m(),
                                     run_cfg.at("eta").get<double>(), a.delta, a.c_r);
    }
  };

  for (const auto& check : a.checks) {
    VerificationReport rep;
    if (check == "linear_convergence") {
      need_run(check);
      rep = check_linear_convergence(*traj, *bounds);
    } else if (check == "deviation_bound") {
      need_run(check);
      rep = check_deviation_bound(*traj, *bounds);
    } else if (check == "gram_stability") {
      need_run(check);
      rep = check_gram_stability(*traj, *bounds);
      if (rep.skipped) std::cerr << "notice: gram_stability skipped: " << rep.notes << '\n';
    } else if (check == "flip_set_bound") {
      need_run(check);
      rep = check_flip_set_bound(*net0, ds, bounds->R, a.delta);
    } else if (check == "positive_definiteness") {
      rep = check_positive_definiteness(ds);
    } else if (check == "concentration") {
      rep = check_concentration(ds, a.m_list, a.trials, a.delta, a.seed);
    }
    io::write_json(fs::path(a.out) / ("report_" + check + ".json"), to_json(rep));
    std::cout << (rep.skipped ? "SKIP " : rep.pass ? "PASS " : "FAIL ") << check << '\n';
    reports.push_back(std::move(rep));
  }

  bool all_pass = true;
  json summary = {{"checks", json::array()}};
  for (const auto& r : reports) {
    if (!r.skipped && !r.pass) all_pass = false;
    summary["checks"].push_back({{"check", r.check}, {"pass", r.pass}, {"skipped", r.skipped}});
  }
  summary["all_pass"] = all_pass;
  if (bounds) summary["theory_bounds"] = to_json(*bounds);
  io::write_json(fs::path(a.out) / "summary.json", summary);
  json resolved = {{"command", "verify"}, {"run", a.run},     {"data", a.data},
                   {"checks", a.checks},  {"delta", a.delta}, {"c_r", a.c_r},
                   {"m_list", a.m_list},  {"trials", a.trials}, {"seed", a.seed},
                   {"out", a.out},        {"strict", a.strict}};
  io::write_json(fs::path(a.out) / "resolved_config.json", resolved);
  return (a.strict && !all_pass) ? kVerificationFailed : kSuccess;
}

// --- experiment ------------------------------------------------------------

struct ExperimentArgs {
  ExperimentConfig cfg;
  std::string eta = "0.01";
  std::string mode = "gd_first_layer";
  std::string out;
  bool paper_scale = false;

  void apply(const json& c) {
    take(c, "paper_scale", paper_scale);
    if (paper_scale) {
      const auto jobs = cfg.jobs;
      cfg = ExperimentConfig::paper_scale();
      cfg.jobs = jobs;
    }
    take(c, "n", cfg.n);
    take(c, "d", cfg.d);
    take(c, "m_list", cfg.m_list);
    take(c, "steps", cfg.steps);
    if (c.contains("eta"))
      eta = c["eta"].is_string() ? c["eta"].get<std::string>() : io::format_double(c["eta"].get<double>());
    take(c, "seeds", cfg.seeds);
    take(c, "record_every", cfg.record_every);
    take(c, "gram_every", cfg.gram_every);
    take(c, "jobs", cfg.jobs);
    take(c, "mode", mode);
    take(c, "out", out);
  }
};

int cmd_experiment(ExperimentArgs a) {
  a.cfg.eta = EtaPolicy::parse(a.eta);
  a.cfg.mode = parse_train_mode(a.mode);
  a.cfg.validate();
  fs::create_directories(a.out);
  json resolved = to_json(a.cfg);
  resolved["command"] = "experiment";
  resolved["out"] = a.out;
  io::write_json(fs::path(a.out) / "resolved_config.json", resolved);

  const ExperimentResult result = run_experiment(a.cfg);
  write_experiment_outputs(result, a.out);
  for (auto m : a.cfg.m_list)
    std::cout << "m=" << m << "  loss=" << io::format_double(result.final_mean(m, &TrajectoryRecord::loss))
              << "  flip=" << io::format_double(result.final_mean(m, &TrajectoryRecord::pattern_flip_fraction))
              << "  maxdev=" << io::format_double(result.final_mean(m, &TrajectoryRecord::max_weight_deviation))
              << '\n';
  if (a.cfg.m_list.size() >= 2)
    std::cout << "slope(maxdev vs m) = " << io::format_double(result.maxdev_slope())
              << "  slope(||H0-Hinf||_F vs m) = " << io::format_double(result.h0_hinf_slope()) << '\n';
  return kSuccess;
}

// Finds "--config PATH" / "--config=PATH" before CLI11 sees the arguments so
// config values can become defaults that explicit flags then override.
std::optional<std::string> find_config_path(const std::vector<std::string>& args) {
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw UsageError("--config needs a path");
      return args[i + 1];
    }
    if (args[i].rfind("--config=", 0) == 0) return args[i].substr(9);
  }
  return std::nullopt;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  try {
    const std::uint64_t seed0 = default_seed();
    GenArgs gen;
    TrainArgs tr;
    VerifyArgs ver;
    ExperimentArgs exp;
    gen.seed = tr.seed = ver.seed = seed0;
    if (std::find(args.begin(), args.end(), "--paper-scale") != args.end())
      exp.cfg = ExperimentConfig::paper_scale();
    if (std::getenv("OPGD_SEED")) exp.cfg.seeds = {seed0};

    if (const auto path = find_config_path(args)) {
      const json c = io::read_json(*path);
      if (!c.is_object()) throw UsageError("config file must hold a JSON object");
      try {
        gen.apply(c);
        tr.apply(c);
        ver.apply(c);
        exp.apply(c);
      } catch (const json::exception& e) {
        throw UsageError(std::string("config file: ") + e.what());
      }
    }

    CLI::App app{"Over-parameterized two-layer ReLU network training dynamics"};
    app.require_subcommand(1);
    app.fallthrough();
    std::string config_path;
    app.add_option("--config", config_path, "JSON config file (flags override it)");

    auto* g = app.add_subcommand("gen", "Generate a unit-sphere dataset");
    g->add_option("--n", gen.n, "Sample count")->check(CLI::PositiveNumber);
    g->add_option("--d", gen.d, "Input dimension")->check(CLI::Range(std::size_t{2}, std::size_t{1} << 40));
    g->add_option("--seed", gen.seed, "Generator seed");
    g->add_option("--out", gen.out, "Output directory");
    g->add_flag("--spectrum", gen.spectrum, "Also print lambda0");

    auto* t = app.add_subcommand("train", "Train a network on a dataset");
    t->add_option("--data", tr.data, "Dataset directory");
    t->add_option("--mode", tr.mode, "gd_first_layer|gd_joint|flow_first_layer|flow_joint|linear_regression");
    t->add_option("--m", tr.m, "Hidden width")->check(CLI::PositiveNumber);
    t->add_option("--steps", tr.steps, "GD steps");
    t->add_option("--eta", tr.eta, "Step size, or 'theory' for lambda0/(4 n^2)");
    t->add_option("--dt", tr.dt, "Flow step (0 = automatic)");
    t->add_option("--horizon", tr.horizon, "Flow horizon T");
    t->add_option("--record-every", tr.record_every, "Record cadence")->check(CLI::PositiveNumber);
    t->add_option("--gram-every", tr.gram_every, "lambda_min(H) cadence (0 = never)");
    t->add_option("--flip-radius", tr.flip_radius, "Radius for the flip-set sum (0 = current max deviation)");
    t->add_option("--seed", tr.seed, "Initialization seed");
    t->add_option("--out", tr.out, "Output directory");

    auto* v = app.add_subcommand("verify", "Audit a run against the theory bounds");
    v->add_option("--run", ver.run, "Output directory of a train run");
    v->add_option("--data", ver.data, "Dataset directory (defaults to the run's)");
    v->add_option("--check", ver.checks, "Checks to run")->delimiter(',');
    v->add_option("--delta", ver.delta, "Failure probability");
    v->add_option("--c-r", ver.c_r, "Constant in R = c_R lambda0 / n^2");
    v->add_option("--m-list", ver.m_list, "Widths for the concentration check")->delimiter(',');
    v->add_option("--trials", ver.trials, "Trials per width (concentration)");
    v->add_option("--seed", ver.seed, "Seed (concentration)");
    v->add_option("--out", ver.out, "Report directory");
    v->add_flag("--strict", ver.strict, "Exit 4 when any check fails");

    auto* e = app.add_subcommand("experiment", "Width sweep producing plot-ready CSVs");
    e->add_option("--n", exp.cfg.n, "Sample count");
    e->add_option("--d", exp.cfg.d, "Input dimension");
    e->add_option("--m-list", exp.cfg.m_list, "Widths")->delimiter(',');
    e->add_option("--steps", exp.cfg.steps, "GD steps per run");
    e->add_option("--eta", exp.eta, "Step size, or 'theory'");
    e->add_option("--seeds", exp.cfg.seeds, "Seeds")->delimiter(',');
    e->add_option("--record-every", exp.cfg.record_every, "Record cadence")->check(CLI::PositiveNumber);
    e->add_option("--gram-every", exp.cfg.gram_every, "lambda_min(H) cadence (0 = never)");
    e->add_option("--jobs", exp.cfg.jobs, "Parallel runs");
    e->add_option("--mode", exp.mode, "gd_first_layer|gd_joint");
    e->add_flag("--paper-scale", exp.paper_scale, "n = d = 1000, m in {1000, 2000, 4000, 8000}");
    e->add_option("--out", exp.out, "Output directory");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
      app.parse(reversed);
    } catch (const CLI::CallForHelp& ex) {
      return app.exit(ex);
    } catch (const CLI::ParseError& ex) {
      app.exit(ex);
      return kUsageError;
    }

    auto require_out = [](const std::string& out, const char* cmd) {
      if (out.empty()) throw UsageError(std::string(cmd) + ": --out is required");
    };
    if (g->parsed()) {
      require_out(gen.out, "gen");
      return cmd_gen(gen);
    }
    if (t->parsed()) {
      require_out(tr.out, "train");
      if (tr.data.empty()) throw UsageError("train: --data is required");
      return cmd_train(tr);
    }
    if (v->parsed()) {
      require_out(ver.out, "verify");
      return cmd_verify(ver);
    }
    if (e->parsed()) {
      require_out(exp.out, "experiment");
      return cmd_experiment(exp);
    }
    return kUsageError;
  } catch (const UsageError& ex) {
    std::cerr << "usage error: " << ex.what() << '\n';
    return kUsageError;
  } catch (const std::invalid_argument& ex) {
    std::cerr << "usage error: " << ex.what() << '\n';
    return kUsageError;
  } catch (const DivergenceError& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return kDiverged;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return kRuntimeFailure;
  }
}

}  // namespace opgd::cli
