#include "clv/active.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <future>
#include <limits>
#include <string>

#include "clv/error.hpp"

namespace clv {

CandidatePool::CandidatePool(std::size_t grid_size) : members_(grid_size), position_(grid_size) {
  for (std::size_t i = 0; i < grid_size; ++i) {
    members_[i] = i;
    position_[i] = i;
  }
}

bool CandidatePool::contains(std::size_t grid_index) const {
  return grid_index < position_.size() && position_[grid_index] != kAbsent;
}

void CandidatePool::remove(std::size_t grid_index) {
  if (!contains(grid_index)) {
    throw InvalidArgument("grid index " + std::to_string(grid_index) + " is not in the pool");
  }
  const std::size_t pos = position_[grid_index];
  const std::size_t last = members_.back();
  members_[pos] = last;
  position_[last] = pos;
  members_.pop_back();
  position_[grid_index] = kAbsent;
}

std::size_t CandidatePool::draw(Rng& rng) {
  if (members_.empty()) throw EmptyPool("candidate pool is empty");
  const std::size_t idx = members_[rng.uniform_index(members_.size())];
  remove(idx);
  return idx;
}

double expected_model_change(const SvmModel& model, std::span<const double> theta) {
  const double h = decision(model, theta);
  const double y_hat = h > 0.0 ? 1.0 : -1.0;
  return 1.0 - y_hat * h;
}

namespace {

std::size_t random_member(const CandidatePool& pool, Rng& rng) {
  return pool.members()[rng.uniform_index(pool.size())];
}

// Index of the minimum score; ties go to the smaller grid index.
template <typename Score>
std::size_t argmin_by_index(const CandidatePool& pool, Score&& score) {
  double best = std::numeric_limits<double>::infinity();
  std::size_t best_idx = std::numeric_limits<std::size_t>::max();
  for (std::size_t idx : pool.members()) {
    const double s = score(idx);
    if (s < best || (s == best && idx < best_idx)) {
      best = s;
      best_idx = idx;
    }
  }
  return best_idx;
}

}  // namespace

std::size_t expected_model_change_pick(const SvmModel& model, const PointSet& grid,
                                       const CandidatePool& pool, Rng& rng) {
  if (pool.empty()) throw EmptyPool("candidate pool is empty");
  if (model.degenerate()) return random_member(pool, rng);
  return argmin_by_index(pool, [&](std::size_t idx) { return std::abs(decision(model, grid[idx])); });
}

double diversity(std::span<const double> a, std::span<const double> b, double gamma) {
  const double kab = rbf_kernel(a, b, gamma);
  return std::abs(kab) / std::sqrt(rbf_kernel(a, a, gamma) * rbf_kernel(b, b, gamma));
}

std::size_t batch_pick(const SvmModel& model, const PointSet& grid, const CandidatePool& pool,
                       std::span<const std::size_t> partial, double lambda, Rng& rng) {
  if (pool.empty()) throw EmptyPool("candidate pool is empty");
  if (model.degenerate()) return random_member(pool, rng);
  return argmin_by_index(pool, [&](std::size_t idx) {
    double div = 0.0;
    for (std::size_t s : partial) div = std::max(div, diversity(grid[idx], grid[s], model.gamma));
    return lambda * std::abs(decision(model, grid[idx])) + (1.0 - lambda) * div;
  });
}

std::vector<std::size_t> random_initial(const CandidatePool& pool, std::size_t count, Rng& rng) {
  if (count > pool.size()) throw EmptyPool("pool smaller than the requested initial set");
  std::vector<std::size_t> members(pool.members().begin(), pool.members().end());
  std::sort(members.begin(), members.end());
  // Partial Fisher-Yates over the sorted members.
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + rng.uniform_index(members.size() - i);
    std::swap(members[i], members[j]);
  }
  members.resize(count);
  return members;
}

namespace {

std::vector<Label> label_all(const ActiveContext& ctx, std::span<const std::size_t> indices) {
  std::vector<Label> out(indices.size());
  if (ctx.jobs <= 1 || indices.size() <= 1) {
    for (std::size_t k = 0; k < indices.size(); ++k) out[k] = ctx.oracle(indices[k]);
    return out;
  }
  const std::size_t workers = std::min(ctx.jobs, indices.size());
  std::vector<std::future<void>> tasks;
  for (std::size_t w = 0; w < workers; ++w) {
    tasks.push_back(std::async(std::launch::async, [&, w] {
      for (std::size_t k = w; k < indices.size(); k += workers) out[k] = ctx.oracle(indices[k]);
    }));
  }
  for (auto& t : tasks) t.get();
  return out;
}

void add_labeled(const ActiveContext& ctx, ActiveRun& run, std::span<const std::size_t> picks) {
  const auto labels = label_all(ctx, picks);
  run.oracle_calls += picks.size();
  for (std::size_t k = 0; k < picks.size(); ++k) {
    run.labeled_indices.push_back(picks[k]);
    run.data.add(ctx.grid[picks[k]], labels[k]);
    run.alphas.push_back(0.0);
  }
}

void refit(const ActiveContext& ctx, ActiveRun& run, bool count_retrain) {
  const auto start = std::chrono::steady_clock::now();
  Fit f = fit(run.data, ctx.svm, run.alphas);
  const auto stop = std::chrono::steady_clock::now();
  run.model = std::move(f.model);
  run.alphas = std::move(f.dual.alphas);
  if (count_retrain) {
    ++run.retrains;
    run.retrain_seconds += std::chrono::duration<double>(stop - start).count();
  }
}

void snapshot(ActiveRun& run, std::vector<std::size_t> picks) {
  IterationSnapshot s;
  s.iteration = run.snapshots.size();
  s.labeled = run.data.size();
  s.retrains = run.retrains;
  s.picks = std::move(picks);
  s.model = run.model;
  run.snapshots.push_back(std::move(s));
}

}  // namespace

ActiveRun initialize_run(const ActiveContext& ctx, std::span<const std::size_t> initial,
                         CandidatePool& pool) {
  if (initial.empty()) throw InvalidArgument("initial training set is empty");
  ActiveRun run;
  run.data = TrainingSet(ctx.grid.dim());
  for (std::size_t idx : initial) pool.remove(idx);
  add_labeled(ctx, run, initial);
  refit(ctx, run, false);
  snapshot(run, {initial.begin(), initial.end()});
  return run;
}

void run_sequential(const ActiveContext& ctx, ActiveRun& run, CandidatePool& pool, std::size_t T,
                    Rng& rng) {
  for (std::size_t it = 0; it < T; ++it) {
    const std::size_t pick = expected_model_change_pick(run.model, ctx.grid, pool, rng);
    pool.remove(pick);
    const std::size_t picks[] = {pick};
    add_labeled(ctx, run, picks);
    refit(ctx, run, true);
    snapshot(run, {pick});
  }
}

void run_batch(const ActiveContext& ctx, ActiveRun& run, CandidatePool& pool,
               std::size_t iterations, std::size_t M, double lambda, Rng& rng) {
  if (M == 0) throw InvalidArgument("batch size must be >= 1");
  if (!(lambda >= 0.0 && lambda < 1.0)) throw InvalidArgument("lambda must lie in [0, 1)");
  const std::size_t n_grid = ctx.grid.size();
  std::vector<double> abs_h(n_grid, 0.0);
  std::vector<double> max_div(n_grid, 0.0);

  for (std::size_t it = 0; it < iterations; ++it) {
    if (pool.size() < M) throw EmptyPool("pool has fewer than M candidates");
    std::vector<std::size_t> batch;
    batch.reserve(M);
    if (run.model.degenerate()) {
      for (std::size_t d = 0; d < M; ++d) batch.push_back(pool.draw(rng));
    } else {
      // The model is fixed for the whole batch, so |H| is computed once and
      // the diversity maximum is maintained incrementally per candidate.
      for (std::size_t idx : pool.members()) {
        abs_h[idx] = std::abs(decision(run.model, ctx.grid[idx]));
        max_div[idx] = 0.0;
      }
      const double inv_g2 = 1.0 / (ctx.svm.gamma * ctx.svm.gamma);
      const std::size_t dim = ctx.grid.dim();
      for (std::size_t d = 0; d < M; ++d) {
        const std::size_t pick = argmin_by_index(pool, [&](std::size_t idx) {
          return lambda * abs_h[idx] + (1.0 - lambda) * max_div[idx];
        });
        pool.remove(pick);
        batch.push_back(pick);
        const auto p = ctx.grid[pick];
        for (std::size_t idx : pool.members()) {
          const auto q = ctx.grid[idx];
          double d2 = 0.0;
          for (std::size_t k = 0; k < dim; ++k) {
            const double diff = p[k] - q[k];
            d2 += diff * diff;
          }
          max_div[idx] = std::max(max_div[idx], std::exp(-d2 * inv_g2));
        }
      }
    }
    add_labeled(ctx, run, batch);
    refit(ctx, run, true);
    snapshot(run, std::move(batch));
  }
}

void run_passive(const ActiveContext& ctx, ActiveRun& run, CandidatePool& pool,
                 std::size_t iterations, std::size_t M, Rng& rng) {
  if (M == 0) throw InvalidArgument("batch size must be >= 1");
  for (std::size_t it = 0; it < iterations; ++it) {
    if (pool.size() < M) throw EmptyPool("pool has fewer than M candidates");
    std::vector<std::size_t> batch;
    for (std::size_t d = 0; d < M; ++d) batch.push_back(pool.draw(rng));
    add_labeled(ctx, run, batch);
    refit(ctx, run, true);
    snapshot(run, std::move(batch));
  }
}

}  // namespace clv
