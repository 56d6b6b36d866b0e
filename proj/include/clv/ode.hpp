#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace clv {

using StateVector = std::vector<double>;

struct IntegratorConfig {
  double step_h = 0.01;
  double t_final = 30.0;
  double divergence_radius = 1e3;

  // Number of steps; throws InvalidArgument unless t_final / step_h is a
  // positive integer and both are positive.
  std::size_t step_count() const;
  void validate() const;
};

// Sampled closed-loop response. Channel columns hold the state components
// first (in declaration order) followed by the auxiliary signals.
class Trajectory {
 public:
  Trajectory() = default;
  Trajectory(std::vector<std::string> state_names, std::vector<std::string> aux_names,
             std::size_t reserve);

  std::size_t size() const { return times_.size(); }
  std::size_t state_dim() const { return state_dim_; }
  double step() const { return step_; }
  double t_final() const { return times_.empty() ? 0.0 : times_.back(); }
  bool diverged() const { return diverged_; }

  std::span<const double> times() const { return times_; }
  const std::vector<std::string>& channel_names() const { return names_; }

  // Column for a named state or auxiliary channel; throws UnknownChannel.
  std::span<const double> channel(std::string_view name) const;
  const std::vector<double>* find_channel(std::string_view name) const;

  StateVector state(std::size_t sample) const;

  // Sample index nearest to time t (clamped to the valid range).
  std::size_t index_at(double t) const;

  // Builder interface used by simulate().
  void push(double t, std::span<const double> state, std::span<const double> aux);
  void set_step(double h) { step_ = h; }
  void mark_diverged() { diverged_ = true; }

  bool operator==(const Trajectory&) const = default;

 private:
  std::vector<std::string> names_;
  std::size_t state_dim_ = 0;
  double step_ = 0.0;
  std::vector<double> times_;
  std::vector<std::vector<double>> columns_;
  bool diverged_ = false;
};

// One simulation instance of a closed-loop plant at a fixed uncertainty
// vector. Holds any discrete controller memory (e.g. a history stack), so a
// fresh instance is created for every simulation.
class PlantInstance {
 public:
  virtual ~PlantInstance() = default;

  virtual StateVector initial_state() const = 0;
  virtual void derivative(double t, std::span<const double> x, std::span<double> dx) const = 0;

  // Discrete update hook, called at t = 0 and then every discrete_period()
  // steps, before the sample at t is recorded.
  virtual void discrete_update(double /*t*/, std::span<const double> /*x*/) {}
  virtual double discrete_period() const { return 0.0; }

  virtual void aux(double /*t*/, std::span<const double> /*x*/, std::span<double> /*out*/) const {}
};

class SystemModel {
 public:
  virtual ~SystemModel() = default;

  virtual std::string name() const = 0;
  virtual std::size_t param_dim() const = 0;
  virtual std::size_t state_dim() const = 0;
  virtual std::vector<std::string> state_names() const = 0;
  virtual std::vector<std::string> aux_names() const { return {}; }
  // Parameters that affect the dynamics beyond theta; folded into cache keys.
  virtual std::string fingerprint() const { return name(); }

  virtual std::unique_ptr<PlantInstance> instantiate(std::span<const double> theta) const = 0;
};

// Infinity norm; +inf when any component is not finite.
double inf_norm(std::span<const double> x);

// Classical four-stage Runge-Kutta step of dx/dt = f(t, x).
// f is called as f(t, x, dx) with spans.
template <typename Field>
StateVector rk4_step(Field&& f, std::span<const double> x, double t, double h) {
  const std::size_t n = x.size();
  StateVector k1(n), k2(n), k3(n), k4(n), tmp(n);
  f(t, x, std::span<double>(k1));
  for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * h * k1[i];
  f(t + 0.5 * h, std::span<const double>(tmp), std::span<double>(k2));
  for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * h * k2[i];
  f(t + 0.5 * h, std::span<const double>(tmp), std::span<double>(k3));
  for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + h * k3[i];
  f(t + h, std::span<const double>(tmp), std::span<double>(k4));
  StateVector out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = x[i] + (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  }
  return out;
}

// Fixed-step simulation sampled at t = 0, h, ..., t_final. If the state
// infinity norm reaches the divergence radius, integration stops and the
// remaining samples hold the last value. Throws DimensionMismatch when theta
// does not have the system's parameter dimension.
Trajectory simulate(const SystemModel& system, std::span<const double> theta,
                    const IntegratorConfig& cfg);

}  // namespace clv
