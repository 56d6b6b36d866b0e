#include <cmath>
#include <random>

#include "doctest.h"

#include "clv/error.hpp"
#include "clv/mtl.hpp"
#include "clv/rng.hpp"
#include "clv/systems.hpp"

using namespace clv;

namespace {

double lyapunov_residual(const Mat2& a, const Mat2& p) {
  double worst = 0.0;
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      double v = (i == j) ? 1.0 : 0.0;
      for (int k = 0; k < 2; ++k) v += a[k][i] * p[k][j] + p[i][k] * a[k][j];
      worst = std::max(worst, std::abs(v));
    }
  }
  return worst;
}

double max_abs(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace

TEST_SUITE("systems") {
  TEST_CASE("van der pol field") {
    CHECK(vdp_field({0.0, 0.0}) == Vec2{0.0, 0.0});
    CHECK(vdp_field({1.0, 0.0}) == Vec2{0.0, 1.0});
    CHECK(vdp_field({0.0, 1.0}) == Vec2{-1.0, 0.0});
  }

  TEST_CASE("reference model") {
    CHECK(reference_model({0.0, 0.0}, 0.0, 0.0) == Vec2{0.0, 0.0});
    CHECK(reference_model({1.0, 0.0}, 1.0, 0.0) == Vec2{0.0, 0.0});
    CHECK(reference_model({0.0, 0.0}, 1.0, 0.5) == Vec2{0.0, 0.5});
  }

  TEST_CASE("reference command schedule") {
    CHECK(z_cmd(1.0) == 1.0);
    CHECK(z_cmd(11.0) == 1.5);
    CHECK(z_cmd(21.0) == -1.5);
    CHECK(z_cmd(5.0) == 0.0);
    CHECK(z_cmd(0.0) == 1.0);
    CHECK(z_cmd(2.0) == 1.0);
    CHECK(z_cmd(30.0) == 0.0);
  }

  TEST_CASE("control law and saturation cases") {
    ClMracGains g;
    const auto rest = clmrac_control({}, 5.0, g);
    CHECK(rest.u_des == 0.0);
    CHECK(rest.u == 0.0);
    CHECK(rest.nu_h == 0.0);

    // u_des = kp * e1 = 10 with everything else zero.
    g.kp = 1.0;
    g.cancel_nominal = false;
    ClMracSignals s;
    s.x = {-10.0, 0.0};
    const auto high = clmrac_control(s, 5.0, g, 3.0);
    CHECK(high.u_des == doctest::Approx(10.0));
    CHECK(high.u == 3.0);
    CHECK(high.nu_h == doctest::Approx(-7.0));

    s.x = {5.0, 0.0};
    const auto low = clmrac_control(s, 5.0, g, 3.0);
    CHECK(low.u_des == doctest::Approx(-5.0));
    CHECK(low.u == -3.0);
    CHECK(low.nu_h == doctest::Approx(2.0));

    const auto inside = clmrac_control(s, 5.0, g, 8.0);
    CHECK(inside.u == inside.u_des);
    CHECK(inside.nu_h == 0.0);
  }

  TEST_CASE("adaptive law terms") {
    const ClMracGains g;
    const Mat2 p = solve_lyapunov_2x2(nominal_plant_matrix(g));
    HistoryStack empty;
    ClMracSignals s;
    s.x = {0.3, -0.4};
    s.xm = s.x;
    s.theta_hat = {1.0, 2.0};
    CHECK(clmrac_adapt(s, {1.0, 2.0}, p, empty, g) == Vec2{0.0, 0.0});
    CHECK(clmrac_adapt(s, {0.0, 1.0}, p, empty, g) == Vec2{0.0, 0.0});

    HistoryStack one;
    one.assign({{1.0, 0.0}});
    s.theta_hat = {1.0, 0.0};
    const Vec2 d = clmrac_adapt(s, {0.0, 0.0}, p, one, g);
    CHECK(d[0] == doctest::Approx(-0.2));
    CHECK(d[1] == doctest::Approx(0.0));
  }

  TEST_CASE("history stack insertion gate") {
    HistoryStack st;
    CHECK(st.update({1.0, 0.0}));
    CHECK(st.size() == 1);
    CHECK_FALSE(st.update({1.0, 0.0}));
    CHECK_FALSE(st.update({0.0, 0.0}));
    CHECK(st.size() == 1);
    CHECK(st.update({1.0, 0.5}));
    CHECK(st.size() == 2);
  }

  TEST_CASE("full stack swap matches brute force") {
    HistoryStack st(20);
    st.assign(std::vector<Vec2>(20, Vec2{1.0, 0.0}));
    REQUIRE(st.full());
    CHECK(st.min_singular_value() == doctest::Approx(0.0));

    // Brute force over all 20 swap positions.
    double best = 0.0;
    for (int k = 0; k < 20; ++k) {
      std::vector<Vec2> e(20, Vec2{1.0, 0.0});
      e[k] = {0.0, 1.0};
      HistoryStack probe(20);
      probe.assign(e);
      best = std::max(best, probe.min_singular_value());
    }
    CHECK(st.update({0.0, 1.0}));
    CHECK(st.min_singular_value() == doctest::Approx(best));
    CHECK(st.entries()[0] == Vec2{0.0, 1.0});
    CHECK(st.min_singular_value() > 0.0);
  }

  TEST_CASE("stack min singular value never decreases once full") {
    Rng rng(11);
    HistoryStack st(5);
    for (int i = 0; i < 5; ++i) st.update({rng.uniform(-1, 1), rng.uniform(-1, 1)});
    REQUIRE(st.full());
    double prev = st.min_singular_value();
    for (int i = 0; i < 500; ++i) {
      st.update({rng.uniform(-2, 2), rng.uniform(-2, 2)});
      const double now = st.min_singular_value();
      CHECK(now >= prev - 1e-12);
      prev = now;
    }
  }

  TEST_CASE("lyapunov solves") {
    const Mat2 neg_i = {{{-1.0, 0.0}, {0.0, -1.0}}};
    const Mat2 p1 = solve_lyapunov_2x2(neg_i);
    CHECK(p1[0][0] == doctest::Approx(0.5));
    CHECK(p1[0][1] == doctest::Approx(0.0));
    CHECK(p1[1][1] == doctest::Approx(0.5));

    const Mat2 diag = {{{-1.0, 0.0}, {0.0, -2.0}}};
    const Mat2 p2 = solve_lyapunov_2x2(diag);
    CHECK(p2[0][0] == doctest::Approx(0.5));
    CHECK(p2[1][1] == doctest::Approx(0.25));
    CHECK(p2[0][1] == doctest::Approx(0.0));

    // Nominal plant: hand elimination gives p12 = 2.5, p22 = 15, p11 = 3.5.
    const Mat2 a = nominal_plant_matrix();
    const Mat2 p = solve_lyapunov_2x2(a);
    CHECK(lyapunov_residual(a, p) < 1e-10);
    CHECK(p[0][0] == doctest::Approx(3.5));
    CHECK(p[0][1] == doctest::Approx(2.5));
    CHECK(p[1][1] == doctest::Approx(15.0));
    CHECK(p[0][1] == p[1][0]);
    CHECK(p[0][0] * p[1][1] - p[0][1] * p[0][1] > 0.0);

    CHECK(lyapunov_residual(reference_model_matrix(), solve_lyapunov_2x2(reference_model_matrix())) <
          1e-12);
  }

  TEST_CASE("lyapunov rejects non-Hurwitz matrices") {
    const Mat2 unstable = {{{1.0, 0.0}, {0.0, -1.0}}};
    CHECK_THROWS_AS(solve_lyapunov_2x2(unstable), NotHurwitz);
    const Mat2 marginal = {{{0.0, 1.0}, {-1.0, 0.0}}};
    CHECK_THROWS_AS(solve_lyapunov_2x2(marginal), NotHurwitz);
  }

  TEST_CASE("nominal closed loop tracks the reference") {
    const ClMrac sys(false);
    IntegratorConfig cfg;
    cfg.t_final = 40.0;
    const std::vector<double> theta = {0.0, 0.0};
    const auto tr = simulate(sys, theta, cfg);
    CHECK_FALSE(tr.diverged());
    CHECK(max_abs(tr.channel("e1")) < 1e-6);
    CHECK(max_abs(tr.channel("th1")) < 1e-9);
  }

  TEST_CASE("hedging is inert when the input never saturates") {
    const ClMrac plain(false);
    const ClMrac pch(true);
    IntegratorConfig cfg;
    cfg.t_final = 40.0;
    const std::vector<double> th2 = {1.0, -0.5};
    const std::vector<double> th4 = {1.0, -0.5, 0.0, 1e6};
    const auto a = simulate(plain, th2, cfg);
    const auto b = simulate(pch, th4, cfg);
    CHECK(max_abs(b.channel("nu_h")) == 0.0);
    for (const char* ch : {"x1", "x2", "xm1", "xm2", "th1", "th2"}) {
      const auto ca = a.channel(ch);
      const auto cb = b.channel(ch);
      REQUIRE(ca.size() == cb.size());
      CHECK(std::equal(ca.begin(), ca.end(), cb.begin()));
    }
  }

  TEST_CASE("saturation engages the hedge") {
    const ClMrac pch(true);
    IntegratorConfig cfg;
    cfg.t_final = 40.0;
    const std::vector<double> theta = {4.0, 4.0, 1.0, 3.0};
    const auto tr = simulate(pch, theta, cfg);
    CHECK(max_abs(tr.channel("u")) <= 3.0);
    CHECK(max_abs(tr.channel("nu_h")) > 0.0);
  }

  TEST_CASE("parameter error shrinks on safe samples") {
    const ClMrac sys(false);
    IntegratorConfig cfg;
    cfg.t_final = 40.0;
    const auto phi = mtl::resolve("phi_bound");
    Rng rng(5);
    int checked = 0, shrank = 0;
    for (int i = 0; i < 20; ++i) {
      const std::vector<double> theta = {rng.uniform(-3, 3), rng.uniform(-3, 3)};
      const auto tr = simulate(sys, theta, cfg);
      if (mtl::label(phi, tr) != Label::Safe) continue;
      ++checked;
      const double e0 = std::hypot(theta[0], theta[1]);
      const double ef = std::hypot(tr.channel("th1").back() - theta[0], tr.channel("th2").back() - theta[1]);
      shrank += ef < e0;
    }
    REQUIRE(checked > 0);
    CHECK(shrank == checked);
  }

  TEST_CASE("system lookup") {
    CHECK(make_system("vdp")->param_dim() == 2);
    CHECK(make_system("clmrac")->param_dim() == 2);
    CHECK(make_system("clmrac_pch")->param_dim() == 4);
    CHECK_THROWS_AS(make_system("pendulum"), InvalidArgument);
    const std::vector<double> bad = {1.0, 2.0, 0.0, -1.0};
    CHECK_THROWS_AS(make_system("clmrac_pch")->instantiate(bad), InvalidArgument);
  }
}
