#include "clv/systems.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "clv/error.hpp"

namespace clv {

Vec2 vdp_field(const Vec2& x) { return {-x[1], x[0] + (x[1] * x[1] - 1.0) * x[1]}; }

namespace {

class VanDerPolInstance final : public PlantInstance {
 public:
  explicit VanDerPolInstance(std::span<const double> theta) : x0_{theta[0], theta[1]} {}

  StateVector initial_state() const override { return {x0_[0], x0_[1]}; }

  void derivative(double, std::span<const double> x, std::span<double> dx) const override {
    const Vec2 d = vdp_field({x[0], x[1]});
    dx[0] = d[0];
    dx[1] = d[1];
  }

 private:
  Vec2 x0_;
};

}  // namespace

std::unique_ptr<PlantInstance> VanDerPol::instantiate(std::span<const double> theta) const {
  if (theta.size() != 2) throw DimensionMismatch("vdp expects 2 parameters");
  return std::make_unique<VanDerPolInstance>(theta);
}

// ---------------------------------------------------------------------------

double z_cmd(double t) {
  if (t >= 0.0 && t <= 2.0) return 1.0;
  if (t >= 10.0 && t <= 12.0) return 1.5;
  if (t >= 20.0 && t <= 22.0) return -1.5;
  return 0.0;
}

Vec2 reference_model(const Vec2& xm, double z, double nu_h, const ClMracGains& g) {
  const double w2 = g.omega_n * g.omega_n;
  return {xm[1], -w2 * xm[0] - 2.0 * g.zeta_n * g.omega_n * xm[1] + w2 * z - nu_h};
}

ControlOutput clmrac_control(const ClMracSignals& s, double t, const ClMracGains& g,
                             double u_max) {
  const double w2 = g.omega_n * g.omega_n;
  const double e1 = s.xm[0] - s.x[0];
  const double e2 = s.xm[1] - s.x[1];
  const double u_rm = -w2 * s.xm[0] - 2.0 * g.zeta_n * g.omega_n * s.xm[1] + w2 * z_cmd(t);
  const double u_pd = g.kp * e1 + g.kd * e2;
  const double u_ad = s.theta_hat[0] * s.x[0] + s.theta_hat[1] * s.x[1];
  double u_des = u_rm + u_pd - u_ad;
  if (g.cancel_nominal) u_des -= g.nominal_row[0] * s.x[0] + g.nominal_row[1] * s.x[1];

  ControlOutput out;
  out.u_des = u_des;
  if (u_des > u_max) {
    out.u = u_max;
    out.nu_h = u_max - u_des;
  } else if (u_des < -u_max) {
    out.u = -u_max;
    out.nu_h = -u_max - u_des;
  } else {
    out.u = u_des;
    out.nu_h = 0.0;
  }
  return out;
}

Mat2 HistoryStack::gram() const {
  Mat2 m{};
  for (const auto& x : entries_) {
    m[0][0] += x[0] * x[0];
    m[0][1] += x[0] * x[1];
    m[1][1] += x[1] * x[1];
  }
  m[1][0] = m[0][1];
  return m;
}

double min_eigenvalue_sym(const Mat2& m) {
  const double mean = 0.5 * (m[0][0] + m[1][1]);
  const double half_diff = 0.5 * (m[0][0] - m[1][1]);
  return mean - std::hypot(half_diff, m[0][1]);
}

double HistoryStack::min_singular_value() const { return min_eigenvalue_sym(gram()); }

bool HistoryStack::update(const Vec2& candidate) {
  const double scale = std::max(std::abs(candidate[0]), std::abs(candidate[1]));
  if (!(scale > 0.0) || !std::isfinite(scale)) return false;

  if (!full()) {
    if (!entries_.empty()) {
      const Vec2& last = entries_.back();
      const double dist = std::max(std::abs(candidate[0] - last[0]), std::abs(candidate[1] - last[1]));
      if (!(dist / scale > epsilon_)) return false;
    }
    entries_.push_back(candidate);
    return true;
  }

  // Full: try the candidate in every slot and keep the swap that raises the
  // minimum singular value of the stack Gram matrix the most.
  const Mat2 base = gram();
  const double current = min_eigenvalue_sym(base);
  double best = current;
  std::size_t best_slot = entries_.size();
  for (std::size_t k = 0; k < entries_.size(); ++k) {
    const Vec2& old = entries_[k];
    Mat2 m = base;
    m[0][0] += candidate[0] * candidate[0] - old[0] * old[0];
    m[0][1] += candidate[0] * candidate[1] - old[0] * old[1];
    m[1][1] += candidate[1] * candidate[1] - old[1] * old[1];
    m[1][0] = m[0][1];
    const double v = min_eigenvalue_sym(m);
    if (v > best) {
      best = v;
      best_slot = k;
    }
  }
  if (best_slot == entries_.size()) return false;
  entries_[best_slot] = candidate;
  return true;
}

void HistoryStack::assign(std::vector<Vec2> entries) {
  if (entries.size() > capacity_) entries.resize(capacity_);
  entries_ = std::move(entries);
}

Vec2 clmrac_adapt(const ClMracSignals& s, const Vec2& theta_true, const Mat2& p,
                  const HistoryStack& stack, const ClMracGains& g) {
  const double e1 = s.xm[0] - s.x[0];
  const double e2 = s.xm[1] - s.x[1];
  // B = (0, 1)^T, so e^T P B = e1 P12 + e2 P22.
  const double epb = e1 * p[0][1] + e2 * p[1][1];
  const Vec2 tilde = {s.theta_hat[0] - theta_true[0], s.theta_hat[1] - theta_true[1]};
  const Mat2 m = stack.gram();
  const Vec2 cl = {m[0][0] * tilde[0] + m[0][1] * tilde[1], m[1][0] * tilde[0] + m[1][1] * tilde[1]};
  return {-g.gamma * s.x[0] * epb - g.gamma_c * cl[0], -g.gamma * s.x[1] * epb - g.gamma_c * cl[1]};
}

Mat2 solve_lyapunov_2x2(const Mat2& a) {
  const double tr = a[0][0] + a[1][1];
  const double det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
  if (!(tr < 0.0 && det > 0.0)) throw NotHurwitz("matrix is not Hurwitz");

  // Unknowns (p11, p12, p22):
  //   2 a11 p11 + 2 a21 p12               = -1
  //   a12 p11 + (a11 + a22) p12 + a21 p22 = 0
  //   2 a12 p12 + 2 a22 p22               = -1
  double m[3][4] = {{2.0 * a[0][0], 2.0 * a[1][0], 0.0, -1.0},
                    {a[0][1], a[0][0] + a[1][1], a[1][0], 0.0},
                    {0.0, 2.0 * a[0][1], 2.0 * a[1][1], -1.0}};
  for (int col = 0; col < 3; ++col) {
    int pivot = col;
    for (int r = col + 1; r < 3; ++r) {
      if (std::abs(m[r][col]) > std::abs(m[pivot][col])) pivot = r;
    }
    for (int c = 0; c < 4; ++c) std::swap(m[col][c], m[pivot][c]);
    for (int r = 0; r < 3; ++r) {
      if (r == col) continue;
      const double f = m[r][col] / m[col][col];
      for (int c = col; c < 4; ++c) m[r][c] -= f * m[col][c];
    }
  }
  const double p11 = m[0][3] / m[0][0];
  const double p12 = m[1][3] / m[1][1];
  const double p22 = m[2][3] / m[2][2];
  return {{{p11, p12}, {p12, p22}}};
}

Mat2 nominal_plant_matrix(const ClMracGains& g) {
  return {{{0.0, 1.0}, {g.nominal_row[0], g.nominal_row[1]}}};
}

Mat2 reference_model_matrix(const ClMracGains& g) {
  return {{{0.0, 1.0}, {-g.omega_n * g.omega_n, -2.0 * g.zeta_n * g.omega_n}}};
}

namespace {

class ClMracInstance final : public PlantInstance {
 public:
  ClMracInstance(const ClMracGains& g, const Mat2& p, Vec2 theta_true, double x1_0, double u_max,
                 bool hedge)
      : g_(g), p_(p), theta_(theta_true), x1_0_(x1_0), u_max_(u_max), hedge_(hedge),
        stack_(g.stack_capacity, g.stack_epsilon) {}

  StateVector initial_state() const override { return {x1_0_, 0.0, 0.0, 0.0, 0.0, 0.0}; }

  void derivative(double t, std::span<const double> s, std::span<double> ds) const override {
    const ClMracSignals sig = unpack(s);
    const ControlOutput c = clmrac_control(sig, t, g_, u_max_);
    const double nu = hedge_ ? c.nu_h : 0.0;
    const Vec2 dxm = reference_model(sig.xm, z_cmd(t), nu, g_);
    const Vec2 dth = clmrac_adapt(sig, theta_, p_, stack_, g_);
    ds[0] = sig.x[1];
    ds[1] = (g_.nominal_row[0] + theta_[0]) * sig.x[0] + (g_.nominal_row[1] + theta_[1]) * sig.x[1] + c.u;
    ds[2] = dxm[0];
    ds[3] = dxm[1];
    ds[4] = dth[0];
    ds[5] = dth[1];
  }

  double discrete_period() const override { return g_.stack_period; }

  void discrete_update(double, std::span<const double> s) override { stack_.update({s[0], s[1]}); }

  void aux(double t, std::span<const double> s, std::span<double> out) const override {
    const ClMracSignals sig = unpack(s);
    const ControlOutput c = clmrac_control(sig, t, g_, u_max_);
    out[0] = sig.xm[0] - sig.x[0];
    out[1] = sig.xm[1] - sig.x[1];
    out[2] = c.u;
    out[3] = c.u_des;
    out[4] = hedge_ ? c.nu_h : 0.0;
    out[5] = z_cmd(t);
  }

 private:
  static ClMracSignals unpack(std::span<const double> s) {
    return {{s[0], s[1]}, {s[2], s[3]}, {s[4], s[5]}};
  }

  ClMracGains g_;
  Mat2 p_;
  Vec2 theta_;
  double x1_0_;
  double u_max_;
  bool hedge_;
  HistoryStack stack_;
};

}  // namespace

ClMrac::ClMrac(bool saturated, ClMracGains gains)
    : saturated_(saturated), gains_(gains), p_(solve_lyapunov_2x2(gains.lyapunov_reference ? reference_model_matrix(gains)
                                                      : nominal_plant_matrix(gains))) {}

std::string ClMrac::fingerprint() const {
  std::ostringstream os;
  os.precision(17);
  os << name() << ";wn=" << gains_.omega_n << ";zn=" << gains_.zeta_n << ";kp=" << gains_.kp
     << ";kd=" << gains_.kd << ";G=" << gains_.gamma << ";Gc=" << gains_.gamma_c
     << ";pmax=" << gains_.stack_capacity << ";dt=" << gains_.stack_period
     << ";eps=" << gains_.stack_epsilon << ";cancel=" << gains_.cancel_nominal;
  if (gains_.lyapunov_reference) os << ";lyap=ref";
  return os.str();
}

std::unique_ptr<PlantInstance> ClMrac::instantiate(std::span<const double> theta) const {
  if (theta.size() != param_dim()) {
    throw DimensionMismatch(name() + " expects " + std::to_string(param_dim()) + " parameters");
  }
  const Vec2 th = {theta[0], theta[1]};
  if (!saturated_) {
    return std::make_unique<ClMracInstance>(gains_, p_, th, 0.0,
                                            std::numeric_limits<double>::infinity(), false);
  }
  if (!(theta[3] > 0.0)) throw InvalidArgument("u_max must be positive");
  return std::make_unique<ClMracInstance>(gains_, p_, th, theta[2], theta[3], true);
}

std::unique_ptr<SystemModel> make_system(const std::string& name, const ClMracGains& gains) {
  if (name == "vdp") return std::make_unique<VanDerPol>();
  if (name == "clmrac") return std::make_unique<ClMrac>(false, gains);
  if (name == "clmrac_pch") return std::make_unique<ClMrac>(true, gains);
  throw InvalidArgument("unknown system '" + name + "' (expected vdp, clmrac or clmrac_pch)");
}

}  // namespace clv
