#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "opgd/data.hpp"
#include "opgd/trainer.hpp"

namespace opgd {

/// Either a fixed step size or lambda0 / (4 n^2) computed per dataset.
struct EtaPolicy {
  enum class Kind { fixed, theory };
  Kind kind = Kind::fixed;
  double value = 0.01;

  static EtaPolicy fixed(double eta) { return {Kind::fixed, eta}; }
  static EtaPolicy theory() { return {Kind::theory, 0.0}; }
  /// "theory" or a positive number.
  static EtaPolicy parse(const std::string& text);
  std::string to_string() const;
};

/// Width sweep: one training run per (m, seed). Each seed fixes one dataset
/// shared by every width.
struct ExperimentConfig {
  std::size_t n = 200;
  std::size_t d = 200;
  std::vector<std::size_t> m_list{256, 1024, 4096};
  std::size_t steps = 100;
  EtaPolicy eta = EtaPolicy::fixed(0.01);
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::size_t record_every = 1;
  std::size_t gram_every = 0;
  unsigned jobs = 1;
  TrainMode mode = TrainMode::gd_first_layer;

  static ExperimentConfig desk_preset() { return {}; }
  static ExperimentConfig paper_scale();
  void validate() const;
};

nlohmann::json to_json(const ExperimentConfig& cfg);

struct CellResult {
  std::size_t m = 0;
  std::uint64_t seed = 0;
  double eta = 0.0;
  double lambda0 = 0.0;
  /// ||H(0) - H_infinity||_F at initialization.
  double h0_hinf_fro = 0.0;
  Trajectory records;
  bool diverged = false;
  std::string error;
};

struct ExperimentResult {
  ExperimentConfig config;
  std::vector<CellResult> cells;  // ordered by (m, seed) as listed in the config

  /// Seed mean of a metric at the last recorded step, excluding diverged runs.
  double final_mean(std::size_t m, double TrajectoryRecord::*metric) const;
  double mean_h0_hinf_fro(std::size_t m) const;
  /// Fitted log-log slopes against m.
  double maxdev_slope() const;
  double h0_hinf_slope() const;
};

/// Dataset used by every width for one seed.
Dataset experiment_dataset(const ExperimentConfig& cfg, std::uint64_t seed);
/// Initial network for one cell.
TwoLayerNet experiment_network(const ExperimentConfig& cfg, std::size_t m, std::uint64_t seed);

ExperimentResult run_experiment(const ExperimentConfig& cfg);

/// Writes loss_vs_step_by_m.csv, flipfrac_vs_step_by_m.csv,
/// maxdev_vs_step_by_m.csv, summary.csv, summary.json and runs/<trajectory>.csv.
void write_experiment_outputs(const ExperimentResult& result, const std::filesystem::path& dir);

/// One aggregate table (the text of one of the *_vs_step_by_m.csv files).
std::string aggregate_csv(const ExperimentResult& result, double TrajectoryRecord::*metric);

}  // namespace opgd
