#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "clv/grid.hpp"
#include "clv/mtl.hpp"
#include "clv/ode.hpp"
#include "clv/svm.hpp"

namespace clv {

// Simulates theta and evaluates the requirement.
Label label_point(const SystemModel& system, const mtl::Formula& formula,
                  std::span<const double> theta, const IntegratorConfig& cfg);

struct GroundTruth {
  std::uint64_t key = 0;
  GridSpec grid;
  std::vector<Label> labels;  // one per grid index

  std::size_t size() const { return labels.size(); }
  std::size_t unsafe_count() const;
  bool operator==(const GroundTruth&) const = default;
};

// FNV-1a over the system fingerprint, formula text, grid and integrator
// settings (all doubles at full precision).
std::uint64_t ground_truth_key(const SystemModel& system, const mtl::Formula& formula,
                               const GridSpec& grid, const IntegratorConfig& cfg);

// Text format:
//   clv-ground-truth v1
//   key <16 hex digits>
//   axes <d>
//   <min> <max> <count>            (d lines)
//   labels <n>
//   <'+'/'-' characters, 100 per line>
void save_ground_truth(std::ostream& os, const GroundTruth& gt);
GroundTruth load_ground_truth(std::istream& is);

struct GroundTruthOptions {
  std::string cache_dir;  // empty disables caching
  std::size_t jobs = 1;
};

struct GroundTruthStats {
  std::size_t simulations = 0;
  bool cache_hit = false;
};

// Labels every grid point by simulation, or loads a matching cache file
// (<cache_dir>/gt-<key>.txt).
GroundTruth ground_truth(const SystemModel& system, const mtl::Formula& formula,
                         const GridSpec& grid, const IntegratorConfig& cfg,
                         const GroundTruthOptions& opts = {}, GroundTruthStats* stats = nullptr);

struct ErrorRates {
  std::size_t points = 0;
  std::size_t wrong = 0;
  std::size_t unsafe_wrong = 0;  // truly unsafe, predicted safe
  std::size_t safe_wrong = 0;    // truly safe, predicted unsafe
  double total = 0.0;
  double unsafe = 0.0;
  double safe = 0.0;
};

// Rates are fractions of all grid points, so unsafe + safe == total.
ErrorRates true_error(const SvmModel& model, const PointSet& grid, std::span<const Label> truth);

// Index permutation split into k contiguous folds.
std::vector<std::vector<std::size_t>> kfold_partition(std::size_t n, std::size_t k,
                                                      std::uint64_t seed);

// Mean of the per-fold held-out misclassification rates. Throws
// TooFewPoints unless 2 <= k <= |data|.
double kfold_error(const TrainingSet& data, std::size_t k, const SvmConfig& cfg,
                   std::uint64_t seed);

// Throws ValueUndefined on an empty holdout.
double independent_validation_error(const SvmModel& model, const TrainingSet& holdout);

// P(y = +1 | H) = 1 / (1 + exp(A H + B)).
struct PlattModel {
  double a = 0.0;
  double b = 0.0;
  std::size_t iterations = 0;
  double probability(double h) const;
};

// Newton iterations with backtracking on the smoothed-target likelihood.
// Throws SingleClassData unless both labels occur.
PlattModel platt_fit(std::span<const double> decisions, std::span<const Label> labels);
PlattModel platt_scale(const SvmModel& model, const TrainingSet& calib);

struct CurveStats {
  std::vector<double> mean;
  std::vector<double> sigma;  // sample standard deviation (n - 1)
};

// Per-index mean and sigma across curves of equal length. Throws
// IncompatibleRuns when lengths differ and InvalidArgument when empty.
CurveStats aggregate_curves(const std::vector<std::vector<double>>& curves);

// n distinct seeds derived from master; throws InvalidArgument for n < 2.
std::vector<std::uint64_t> replicate_seeds(std::uint64_t master, std::size_t n);

// Throws InvalidArgument for fewer than two or repeated seeds.
void check_replicate_seeds(std::span<const std::uint64_t> seeds);

}  // namespace clv
