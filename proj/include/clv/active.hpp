#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "clv/rng.hpp"
#include "clv/svm.hpp"

namespace clv {

// Unobserved grid indices U. Removal is O(1) (swap with last); iteration
// order is therefore arbitrary and every selection rule breaks ties by the
// smallest grid index instead of pool position.
class CandidatePool {
 public:
  explicit CandidatePool(std::size_t grid_size);

  std::size_t size() const { return members_.size(); }
  bool empty() const { return members_.empty(); }
  std::size_t grid_size() const { return position_.size(); }
  bool contains(std::size_t grid_index) const;
  std::span<const std::size_t> members() const { return members_; }

  // Throws InvalidArgument if grid_index is not in the pool.
  void remove(std::size_t grid_index);
  // Uniform draw without replacement; throws EmptyPool.
  std::size_t draw(Rng& rng);

 private:
  static constexpr std::size_t kAbsent = static_cast<std::size_t>(-1);
  std::vector<std::size_t> members_;
  std::vector<std::size_t> position_;
};

// Labels a grid point. Must be safe to call concurrently when jobs > 1.
using Oracle = std::function<Label(std::size_t grid_index)>;

// 1 - sign(H) H with sign(0) = -1: the expected gradient of the dual
// objective if the point were added with alpha = 0.
double expected_model_change(const SvmModel& model, std::span<const double> theta);

// argmin |H| over the pool, ties to the smallest grid index. A degenerate
// (single-class) model falls back to a uniform random pick.
std::size_t expected_model_change_pick(const SvmModel& model, const PointSet& grid,
                                       const CandidatePool& pool, Rng& rng);

// |k(a,b)| / sqrt(k(a,a) k(b,b)).
double diversity(std::span<const double> a, std::span<const double> b, double gamma);

// argmin of lambda |H| + (1 - lambda) max_{s in partial} diversity; the
// diversity term is 0 while partial is empty.
std::size_t batch_pick(const SvmModel& model, const PointSet& grid, const CandidatePool& pool,
                       std::span<const std::size_t> partial, double lambda, Rng& rng);

struct IterationSnapshot {
  std::size_t iteration = 0;
  std::size_t labeled = 0;
  std::size_t retrains = 0;
  std::vector<std::size_t> picks;
  SvmModel model;
};

struct ActiveRun {
  std::vector<std::size_t> labeled_indices;  // insertion order
  TrainingSet data;
  std::vector<double> alphas;  // full dual vector, for warm starts
  SvmModel model;
  std::vector<IterationSnapshot> snapshots;  // [0] is the initial model
  std::size_t retrains = 0;
  std::size_t oracle_calls = 0;
  double retrain_seconds = 0.0;
};

struct ActiveContext {
  const PointSet& grid;
  Oracle oracle;
  SvmConfig svm;
  std::size_t jobs = 1;
};

// Labels the initial indices, removes them from the pool and trains the
// starting model. The initial fit is not counted as a retrain.
ActiveRun initialize_run(const ActiveContext& ctx, std::span<const std::size_t> initial,
                         CandidatePool& pool);

// Draws `count` distinct initial indices uniformly from the pool (without
// removing them).
std::vector<std::size_t> random_initial(const CandidatePool& pool, std::size_t count, Rng& rng);

// Sequential loop: T single picks, one retrain each.
void run_sequential(const ActiveContext& ctx, ActiveRun& run, CandidatePool& pool, std::size_t T,
                    Rng& rng);

// Batch loop: per iteration, M picks against a fixed model with the
// diversity penalty, M labels, one retrain.
void run_batch(const ActiveContext& ctx, ActiveRun& run, CandidatePool& pool,
               std::size_t iterations, std::size_t M, double lambda, Rng& rng);

// Passive baseline: M uniform picks without replacement per iteration.
void run_passive(const ActiveContext& ctx, ActiveRun& run, CandidatePool& pool,
                 std::size_t iterations, std::size_t M, Rng& rng);

}  // namespace clv
