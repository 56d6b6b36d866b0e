#pragma once

#include <array>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "clv/ode.hpp"

namespace clv {

using Vec2 = std::array<double, 2>;
using Mat2 = std::array<std::array<double, 2>, 2>;  // row-major

// ---------------------------------------------------------------------------
// Unstable (time-reversed) Van der Pol oscillator. theta is the initial state.

Vec2 vdp_field(const Vec2& x);

class VanDerPol final : public SystemModel {
 public:
  std::string name() const override { return "vdp"; }
  std::size_t param_dim() const override { return 2; }
  std::size_t state_dim() const override { return 2; }
  std::vector<std::string> state_names() const override { return {"x1", "x2"}; }
  std::unique_ptr<PlantInstance> instantiate(std::span<const double> theta) const override;
};

// ---------------------------------------------------------------------------
// Concurrent-learning MRAC on the uncertain second-order plant
//   x1' = x2,  x2' = (-0.2 + th1) x1 + (-0.2 + th2) x2 + u.

struct ClMracGains {
  double omega_n = 1.0;
  double zeta_n = 0.5;
  double kp = 1.5;
  double kd = 1.3;
  double gamma = 2.0;     // instantaneous adaptation rate
  double gamma_c = 0.2;   // history-stack adaptation rate
  std::size_t stack_capacity = 20;
  double stack_period = 0.1;    // seconds between stack candidates
  double stack_epsilon = 0.01;  // relative inf-norm novelty gate
  // Add the known nominal plant terms (-0.2 x1 - 0.2 x2) back into the
  // control so the nominal closed loop tracks the reference exactly.
  bool cancel_nominal = true;
  Vec2 nominal_row = {-0.2, -0.2};
  // Solve the Lyapunov equation for the reference-model matrix instead of
  // the open-loop nominal plant. Gives a much smaller P (weaker adaptation).
  bool lyapunov_reference = false;
};

// Reference command: 1 on [0,2], 1.5 on [10,12], -1.5 on [20,22], else 0.
double z_cmd(double t);

// Reference model derivative (PCH-modified when nu_h != 0).
Vec2 reference_model(const Vec2& xm, double z, double nu_h, const ClMracGains& g = {});

struct ControlOutput {
  double u_des = 0.0;
  double u = 0.0;
  double nu_h = 0.0;
};

struct ClMracSignals {
  Vec2 x{};
  Vec2 xm{};
  Vec2 theta_hat{};
};

ControlOutput clmrac_control(const ClMracSignals& s, double t, const ClMracGains& g,
                             double u_max = std::numeric_limits<double>::infinity());

// History stack of plant states used by the concurrent-learning term.
class HistoryStack {
 public:
  explicit HistoryStack(std::size_t capacity = 20, double epsilon = 0.01)
      : capacity_(capacity), epsilon_(epsilon) {}

  std::size_t size() const { return entries_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool full() const { return entries_.size() >= capacity_; }
  const std::vector<Vec2>& entries() const { return entries_; }

  // Sum of x_k x_k^T over the stored entries.
  Mat2 gram() const;
  double min_singular_value() const;

  // Returns true when the stack changed.
  bool update(const Vec2& candidate);

  // Replaces the contents (truncated to capacity), bypassing the gate.
  void assign(std::vector<Vec2> entries);

  bool operator==(const HistoryStack&) const = default;

 private:
  std::size_t capacity_;
  double epsilon_;
  std::vector<Vec2> entries_;
};

// Smallest eigenvalue of a symmetric 2x2 matrix (equals the smallest
// singular value when the matrix is positive semidefinite).
double min_eigenvalue_sym(const Mat2& m);

// Derivative of the parameter estimate:
//   -Gamma x (e^T P B) - Gamma_c sum_k x_k x_k^T (theta_hat - theta).
Vec2 clmrac_adapt(const ClMracSignals& s, const Vec2& theta_true, const Mat2& p,
                  const HistoryStack& stack, const ClMracGains& g = {});

// Solves A^T P + P A = -I for symmetric P. Throws NotHurwitz.
Mat2 solve_lyapunov_2x2(const Mat2& a);

// Nominal open-loop plant with theta = 0.
Mat2 nominal_plant_matrix(const ClMracGains& g = {});

// [[0, 1], [-wn^2, -2 zeta wn]].
Mat2 reference_model_matrix(const ClMracGains& g = {});

// Case 2 ("clmrac"): theta = (th1, th2), no saturation.
// Case 3 ("clmrac_pch"): theta = (th1, th2, x1(0), u_max), saturated input
// with pseudo-control hedging of the reference model.
class ClMrac final : public SystemModel {
 public:
  ClMrac(bool saturated, ClMracGains gains = {});

  std::string name() const override { return saturated_ ? "clmrac_pch" : "clmrac"; }
  std::size_t param_dim() const override { return saturated_ ? 4 : 2; }
  std::size_t state_dim() const override { return 6; }
  std::vector<std::string> state_names() const override {
    return {"x1", "x2", "xm1", "xm2", "th1", "th2"};
  }
  std::vector<std::string> aux_names() const override {
    return {"e1", "e2", "u", "u_des", "nu_h", "z_cmd"};
  }
  std::string fingerprint() const override;
  std::unique_ptr<PlantInstance> instantiate(std::span<const double> theta) const override;

  const ClMracGains& gains() const { return gains_; }
  const Mat2& lyapunov_p() const { return p_; }

 private:
  bool saturated_;
  ClMracGains gains_;
  Mat2 p_;
};

// Looks up "vdp", "clmrac" or "clmrac_pch"; throws InvalidArgument otherwise.
std::unique_ptr<SystemModel> make_system(const std::string& name, const ClMracGains& gains = {});

}  // namespace clv
