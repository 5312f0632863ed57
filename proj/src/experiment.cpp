#include "opgd/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <iostream>
#include <map>
#include <set>
#include <thread>

#include "opgd/csv_io.hpp"
#include "opgd/gram.hpp"
#include "opgd/rng.hpp"
#include "opgd/verify.hpp"

namespace opgd {

EtaPolicy EtaPolicy::parse(const std::string& text) {
  if (text == "theory") return theory();
  double v;
  try {
    v = io::parse_double(text);
  } catch (const std::exception&) {
    throw std::invalid_argument("eta must be 'theory' or a positive number, got '" + text + "'");
  }
  if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument("eta must be positive");
  return fixed(v);
}

std::string EtaPolicy::to_string() const {
  return kind == Kind::theory ? "theory" : io::format_double(value);
}

ExperimentConfig ExperimentConfig::paper_scale() {
  ExperimentConfig cfg;
  cfg.n = 1000;
  cfg.d = 1000;
  cfg.m_list = {1000, 2000, 4000, 8000};
  return cfg;
}

void ExperimentConfig::validate() const {
  if (n < 1 || d < 2) throw std::invalid_argument("experiment: need n >= 1 and d >= 2");
  if (m_list.empty()) throw std::invalid_argument("experiment: m_list is empty");
  for (auto m : m_list)
    if (m < 1) throw std::invalid_argument("experiment: widths must be >= 1");
  if (seeds.empty()) throw std::invalid_argument("experiment: seeds is empty");
  if (record_every < 1) throw std::invalid_argument("experiment: record_every must be >= 1");
  if (mode != TrainMode::gd_first_layer && mode != TrainMode::gd_joint)
    throw std::invalid_argument("experiment: mode must be gd_first_layer or gd_joint");
  if (eta.kind == EtaPolicy::Kind::fixed && !(eta.value > 0.0))
    throw std::invalid_argument("experiment: eta must be positive");
}

nlohmann::json to_json(const ExperimentConfig& cfg) {
  return {{"n", cfg.n},
          {"d", cfg.d},
          {"m_list", cfg.m_list},
          {"steps", cfg.steps},
          {"eta", cfg.eta.to_string()},
          {"seeds", cfg.seeds},
          {"record_every", cfg.record_every},
          {"gram_every", cfg.gram_every},
          {"jobs", cfg.jobs},
          {"mode", std::string(to_string(cfg.mode))}};
}

Dataset experiment_dataset(const ExperimentConfig& cfg, std::uint64_t seed) {
  return generate_sphere_dataset(cfg.n, cfg.d, derive_seed(seed, streams::kExperimentData));
}

TwoLayerNet experiment_network(const ExperimentConfig& cfg, std::size_t m, std::uint64_t seed) {
  return init_network(m, cfg.d, derive_seed(derive_seed(seed, streams::kExperimentNet), m));
}

namespace {

struct SeedContext {
  Dataset ds;
  GramMatrix Hinf;
  double lambda0 = 0.0;
};

CellResult run_cell(const ExperimentConfig& cfg, const SeedContext& ctx, std::size_t m,
                    std::uint64_t seed) {
  CellResult cell;
  cell.m = m;
  cell.seed = seed;
  cell.lambda0 = ctx.lambda0;
  cell.eta = cfg.eta.kind == EtaPolicy::Kind::theory ? theory_step_size(ctx.lambda0, cfg.n)
                                                     : cfg.eta.value;
  const TwoLayerNet net0 = experiment_network(cfg, m, seed);
  cell.h0_hinf_fro = frobenius_norm(gram_H(net0, ctx.ds).entries - ctx.Hinf.entries);

  TrainConfig tc;
  tc.mode = cfg.mode;
  tc.eta = cell.eta;
  tc.steps = cfg.steps;
  tc.record_every = cfg.record_every;
  tc.gram_every = cfg.gram_every;
  tc.seed = seed;
  try {
    cell.records = train_gd(net0, ctx.ds, tc).records;
  } catch (const DivergenceError& e) {
    cell.diverged = true;
    cell.error = e.what();
    cell.records = e.records();
  }
  return cell;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  std::map<std::uint64_t, SeedContext> contexts;
  for (auto seed : cfg.seeds) {
    if (contexts.count(seed)) continue;
    SeedContext ctx;
    ctx.ds = experiment_dataset(cfg, seed);
    ctx.Hinf = gram_H_infinity(ctx.ds);
    if (cfg.eta.kind == EtaPolicy::Kind::theory) ctx.lambda0 = min_eigenvalue(ctx.Hinf).lambda_min;
    contexts.emplace(seed, std::move(ctx));
  }

  ExperimentResult result;
  result.config = cfg;
  for (auto m : cfg.m_list)
    for (auto seed : cfg.seeds) {
      CellResult cell;
      cell.m = m;
      cell.seed = seed;
      result.cells.push_back(std::move(cell));
    }

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t idx = next++; idx < result.cells.size(); idx = next++) {
      CellResult& cell = result.cells[idx];
      cell = run_cell(cfg, contexts.at(cell.seed), cell.m, cell.seed);
    }
  };
  const unsigned jobs = std::max(1u, std::min<unsigned>(cfg.jobs, result.cells.size()));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (const auto& cell : result.cells)
    if (cell.diverged)
      std::cerr << "warning: run m=" << cell.m << " seed=" << cell.seed
                << " diverged and is excluded from averages (" << cell.error << ")\n";
  return result;
}

double ExperimentResult::final_mean(std::size_t m, double TrajectoryRecord::*metric) const {
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& cell : cells) {
    if (cell.m != m || cell.diverged || cell.records.empty()) continue;
    total += cell.records.back().*metric;
    ++count;
  }
  return count ? total / static_cast<double>(count) : std::nan("");
}

double ExperimentResult::mean_h0_hinf_fro(std::size_t m) const {
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& cell : cells) {
    if (cell.m != m) continue;
    total += cell.h0_hinf_fro;
    ++count;
  }
  return count ? total / static_cast<double>(count) : std::nan("");
}

namespace {

std::vector<double> widths_of(const ExperimentConfig& cfg) {
  return {cfg.m_list.begin(), cfg.m_list.end()};
}

}  // namespace

double ExperimentResult::maxdev_slope() const {
  std::vector<double> vals;
  for (auto m : config.m_list) vals.push_back(final_mean(m, &TrajectoryRecord::max_weight_deviation));
  return loglog_slope(widths_of(config), vals);
}

double ExperimentResult::h0_hinf_slope() const {
  std::vector<double> vals;
  for (auto m : config.m_list) vals.push_back(mean_h0_hinf_fro(m));
  return loglog_slope(widths_of(config), vals);
}

std::string aggregate_csv(const ExperimentResult& result, double TrajectoryRecord::*metric) {
  const auto& cfg = result.config;
  std::set<std::size_t> steps;
  // value[(m, seed)][step]
  std::map<std::pair<std::size_t, std::uint64_t>, std::map<std::size_t, double>> values;
  for (const auto& cell : result.cells)
    for (const auto& rec : cell.records) {
      steps.insert(rec.step);
      values[{cell.m, cell.seed}][rec.step] = rec.*metric;
    }

  std::string out = io::schema_line(io::kSweepSchema);
  out += "step";
  for (auto m : cfg.m_list) {
    out += ",m" + std::to_string(m) + "_mean";
    for (auto seed : cfg.seeds) out += ",m" + std::to_string(m) + "_seed" + std::to_string(seed);
  }
  out += '\n';
  for (auto step : steps) {
    out += std::to_string(step);
    for (auto m : cfg.m_list) {
      double total = 0.0;
      std::size_t count = 0;
      std::string seed_cols;
      for (auto seed : cfg.seeds) {
        seed_cols += ',';
        const auto& series = values[{m, seed}];
        const auto it = series.find(step);
        if (it == series.end()) continue;
        seed_cols += io::format_double(it->second);
        bool diverged = false;
        for (const auto& cell : result.cells)
          if (cell.m == m && cell.seed == seed) diverged = cell.diverged;
        if (!diverged) {
          total += it->second;
          ++count;
        }
      }
      out += ',';
      if (count) out += io::format_double(total / static_cast<double>(count));
      out += seed_cols;
    }
    out += '\n';
  }
  return out;
}

void write_experiment_outputs(const ExperimentResult& result, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "runs");
  const auto& cfg = result.config;
  io::write_text(dir / "loss_vs_step_by_m.csv", aggregate_csv(result, &TrajectoryRecord::loss));
  io::write_text(dir / "flipfrac_vs_step_by_m.csv",
                 aggregate_csv(result, &TrajectoryRecord::pattern_flip_fraction));
  io::write_text(dir / "maxdev_vs_step_by_m.csv",
                 aggregate_csv(result, &TrajectoryRecord::max_weight_deviation));
  for (const auto& cell : result.cells)
    write_trajectory_csv(cell.records,
                         dir / "runs" / trajectory_filename(cfg.mode, cfg.n, cfg.d, cell.m, cell.seed));

  std::string summary = io::schema_line(io::kSweepSchema);
  summary += "m,final_loss_mean,final_flip_fraction_mean,final_max_w_dev_mean,h0_hinf_fro_mean\n";
  for (auto m : cfg.m_list) {
    summary += std::to_string(m) + ',' +
               io::format_double(result.final_mean(m, &TrajectoryRecord::loss)) + ',' +
               io::format_double(result.final_mean(m, &TrajectoryRecord::pattern_flip_fraction)) +
               ',' +
               io::format_double(result.final_mean(m, &TrajectoryRecord::max_weight_deviation)) +
               ',' + io::format_double(result.mean_h0_hinf_fro(m)) + '\n';
  }
  io::write_text(dir / "summary.csv", summary);

  nlohmann::json j;
  j["schema"] = io::kSweepSchema;
  j["config"] = to_json(cfg);
  if (cfg.m_list.size() >= 2) {
    j["slopes"] = {{"final_max_w_dev_vs_m", result.maxdev_slope()},
                   {"h0_hinf_fro_vs_m", result.h0_hinf_slope()}};
  }
  j["diverged"] = nlohmann::json::array();
  for (const auto& cell : result.cells)
    if (cell.diverged) j["diverged"].push_back({{"m", cell.m}, {"seed", cell.seed}, {"error", cell.error}});
  io::write_json(dir / "summary.json", j);
}

}  // namespace opgd
