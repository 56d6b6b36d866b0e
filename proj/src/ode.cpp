#include "clv/ode.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "clv/error.hpp"

namespace clv {

std::size_t IntegratorConfig::step_count() const {
  validate();
  return static_cast<std::size_t>(std::llround(t_final / step_h));
}

void IntegratorConfig::validate() const {
  if (!(step_h > 0.0) || !std::isfinite(step_h)) throw InvalidArgument("integrator step must be > 0");
  if (!(t_final > 0.0) || !std::isfinite(t_final)) throw InvalidArgument("t_final must be > 0");
  if (!(divergence_radius > 0.0)) throw InvalidArgument("divergence_radius must be > 0");
  const double ratio = t_final / step_h;
  const double rounded = std::round(ratio);
  if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-9 * std::max(1.0, ratio)) {
    throw InvalidArgument("t_final / step must be a positive integer");
  }
}

Trajectory::Trajectory(std::vector<std::string> state_names, std::vector<std::string> aux_names,
                       std::size_t reserve)
    : state_dim_(state_names.size()) {
  names_ = std::move(state_names);
  names_.insert(names_.end(), aux_names.begin(), aux_names.end());
  columns_.resize(names_.size());
  times_.reserve(reserve);
  for (auto& c : columns_) c.reserve(reserve);
}

const std::vector<double>* Trajectory::find_channel(std::string_view name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return &columns_[i];
  }
  return nullptr;
}

std::span<const double> Trajectory::channel(std::string_view name) const {
  const auto* col = find_channel(name);
  if (col == nullptr) throw UnknownChannel("unknown trajectory channel '" + std::string(name) + "'");
  return *col;
}

StateVector Trajectory::state(std::size_t sample) const {
  StateVector x(state_dim_);
  for (std::size_t i = 0; i < state_dim_; ++i) x[i] = columns_[i].at(sample);
  return x;
}

std::size_t Trajectory::index_at(double t) const {
  if (times_.empty()) return 0;
  if (step_ <= 0.0) return 0;
  const double k = std::round(t / step_);
  if (k <= 0.0) return 0;
  return std::min(static_cast<std::size_t>(k), times_.size() - 1);
}

void Trajectory::push(double t, std::span<const double> state, std::span<const double> aux) {
  times_.push_back(t);
  for (std::size_t i = 0; i < state_dim_; ++i) columns_[i].push_back(state[i]);
  for (std::size_t i = 0; i < aux.size(); ++i) columns_[state_dim_ + i].push_back(aux[i]);
}

double inf_norm(std::span<const double> x) {
  double m = 0.0;
  for (double v : x) {
    if (!std::isfinite(v)) return std::numeric_limits<double>::infinity();
    m = std::max(m, std::abs(v));
  }
  return m;
}

Trajectory simulate(const SystemModel& system, std::span<const double> theta,
                    const IntegratorConfig& cfg) {
  if (theta.size() != system.param_dim()) {
    throw DimensionMismatch("system '" + system.name() + "' expects " +
                            std::to_string(system.param_dim()) + " parameters, got " +
                            std::to_string(theta.size()));
  }
  const std::size_t steps = cfg.step_count();
  const double h = cfg.step_h;

  auto plant = system.instantiate(theta);
  const auto aux_names = system.aux_names();
  Trajectory traj(system.state_names(), aux_names, steps + 1);
  traj.set_step(h);

  std::size_t period = 0;
  if (plant->discrete_period() > 0.0) {
    period = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(plant->discrete_period() / h)));
  }

  std::vector<double> aux(aux_names.size());
  StateVector x = plant->initial_state();
  plant->discrete_update(0.0, x);
  plant->aux(0.0, x, aux);
  traj.push(0.0, x, aux);

  auto field = [&plant](double t, std::span<const double> s, std::span<double> ds) {
    plant->derivative(t, s, ds);
  };

  bool diverged = inf_norm(x) >= cfg.divergence_radius;
  std::size_t k = 1;
  for (; k <= steps && !diverged; ++k) {
    const double t_prev = static_cast<double>(k - 1) * h;
    const double t = static_cast<double>(k) * h;
    x = rk4_step(field, x, t_prev, h);
    if (inf_norm(x) >= cfg.divergence_radius) {
      diverged = true;
    } else if (period != 0 && k % period == 0) {
      plant->discrete_update(t, x);
    }
    plant->aux(t, x, aux);
    traj.push(t, x, aux);
  }
  if (diverged) {
    traj.mark_diverged();
    for (; k <= steps; ++k) traj.push(static_cast<double>(k) * h, x, aux);
  }
  return traj;
}

}  // namespace clv
