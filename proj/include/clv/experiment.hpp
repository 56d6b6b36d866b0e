#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "clv/active.hpp"
#include "clv/grid.hpp"
#include "clv/mtl.hpp"
#include "clv/ode.hpp"
#include "clv/svm.hpp"
#include "clv/systems.hpp"
#include "clv/verify.hpp"

namespace clv {

enum class SamplerMode { Batch, Sequential, Passive };

const char* to_string(SamplerMode mode);

struct SamplerConfig {
  SamplerMode mode = SamplerMode::Batch;
  std::size_t batch_size = 10;
  double lambda = 0.7;
  std::size_t total = 250;   // oracle budget including the initial set
  std::size_t initial = 50;
};

struct EstimatorConfig {
  bool kfold = false;
  std::size_t k = 5;
  bool validation = false;
};

struct ExperimentConfig {
  std::string name = "experiment";
  std::string system = "vdp";
  std::string formula = "vdp_roa";
  mtl::IntervalReading reading = mtl::IntervalReading::Simultaneous;
  ClMracGains gains;  // ignored by vdp
  GridSpec grid;
  IntegratorConfig integrator;
  SamplerConfig sampler;
  SvmConfig svm;
  std::uint64_t seed = 1;
  std::size_t replicates = 1;
  std::string output = "out";
  std::string cache_dir;
  EstimatorConfig estimators;
  std::vector<CostMatrix> post_costs;
  std::size_t jobs = 1;

  // Number of sampling iterations after the initial model.
  std::size_t iterations() const;
  // Throws ConfigError naming the offending field.
  void validate() const;
};

constexpr double kNotComputed = std::numeric_limits<double>::quiet_NaN();

struct IterationRecord {
  std::size_t iteration = 0;
  std::size_t labeled = 0;
  std::size_t retrains = 0;
  ErrorRates error;
  double kfold = kNotComputed;
  double validation = kNotComputed;
  double retrain_seconds = 0.0;  // cumulative
};

struct PostCostResult {
  CostMatrix cost;
  ErrorRates error;
};

struct ReplicateRun {
  std::uint64_t seed = 0;
  std::vector<IterationRecord> records;
  ActiveRun run;
  std::vector<PostCostResult> post;
  double wall_seconds = 0.0;
};

struct ExperimentResult {
  ExperimentConfig config;
  GroundTruth truth;
  GroundTruthStats truth_stats;
  std::vector<ReplicateRun> replicates;
};

// Seeds used for the configured replicates: the master seed itself for a
// single replicate, otherwise replicate_seeds(master, n).
std::vector<std::uint64_t> experiment_seeds(const ExperimentConfig& cfg);

// Everything an individual replicate needs, built once per experiment.
struct ExperimentSetup {
  std::unique_ptr<SystemModel> system;
  mtl::Formula formula;
  PointSet grid;
  GroundTruth truth;
  GroundTruthStats truth_stats;
};

ExperimentSetup prepare_experiment(const ExperimentConfig& cfg);

ReplicateRun run_replicate(const ExperimentConfig& cfg, const ExperimentSetup& setup,
                           std::uint64_t seed);

ExperimentResult run_experiment(const ExperimentConfig& cfg);

// results.csv (mean over replicates), replicates.csv, costs.csv,
// timing.json, model.txt, run.json. Everything but timing.json is a pure
// function of the config.
void write_bundle(const ExperimentResult& result, const std::filesystem::path& dir);

// Parsed results.csv of a bundle.
struct ResultTable {
  std::string family;
  std::vector<std::size_t> iteration;
  std::vector<std::size_t> labeled;
  std::vector<double> mean_error;
  std::vector<double> sigma_error;
};

ResultTable read_results(const std::filesystem::path& dir);

// Long-format merge: family, iteration, n_labeled, mean_error, sigma.
// Throws IncompatibleRuns for fewer than two tables or differing lengths.
std::string compare_tables(const std::vector<ResultTable>& tables);

// Self-contained line chart of mean error per family.
std::string render_svg(const std::vector<ResultTable>& tables);

}  // namespace clv
