#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ghe/sim.hpp"

using namespace ghe::sim;

namespace {

GridConfig small_cfg(int n = 16) {
  GridConfig cfg;
  cfg.nx = cfg.ny = cfg.nz = n;
  return cfg;
}

double sup_diff(const FieldState& a, const FieldState& b) {
  double m = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::fabs(a.up[i] - b.up[i]));
    m = std::max(m, std::fabs(a.v[i] - b.v[i]));
  }
  return m;
}

}  // namespace

TEST_CASE("config parsing round-trips and rejects nonsense") {
  GridConfig cfg = parse_config("nx = 16\nny=16\n nz =16\ndt = 1e-3\nT = 0.5\n# comment\nb = -0.25\nseed = 9\n");
  CHECK(cfg.nx == 16);
  CHECK(cfg.dt == doctest::Approx(1e-3));
  CHECK(cfg.horizon == doctest::Approx(0.5));
  CHECK(cfg.b == doctest::Approx(-0.25));
  CHECK(cfg.seed == 9);

  CHECK_THROWS(parse_config("nx = 4\n"));          // below the axis minimum
  CHECK_THROWS(parse_config("dt = 0\n"));
  CHECK_THROWS(parse_config("volume = 3\n"));      // unknown key
  CHECK_THROWS(parse_config("bc = outflow\n"));    // only periodic data
  CHECK_THROWS(parse_config("nx\n"));              // not key = value
}

TEST_CASE("initial state: floor, determinism, and the eps=0 vacuum") {
  GridConfig cfg = small_cfg();
  FieldState s = init_state(cfg);
  CHECK(min_uyz(s) > 1.0 - 2 * cfg.eps);
  CHECK(min_uyz(s) < 1.0 + 2 * cfg.eps);

  FieldState again = init_state(cfg);
  CHECK(sup_diff(s, again) == 0.0);
  cfg.seed = 2;
  FieldState other = init_state(cfg);
  CHECK(sup_diff(s, other) > 0.0);

  cfg.eps = 0;
  FieldState flat = init_state(cfg);
  for (double x : flat.up) CHECK(x == 0.0);
  for (double x : flat.v) CHECK(x == 0.0);
}

TEST_CASE("grid derivatives commute and hit the analytic value at 4th order") {
  GridConfig cfg = small_cfg();
  FieldState s = init_state(cfg);
  std::vector<double> f(s.size());
  for (int k = 0; k < s.nz; ++k)
    for (int j = 0; j < s.ny; ++j)
      for (int i = 0; i < s.nx; ++i)
        f[s.idx(i, j, k)] = std::sin(i * s.hx) * std::cos(j * s.hy + k * s.hz);
  std::vector<double> yz = d1(s, d1(s, f, 1), 2);
  std::vector<double> zy = d1(s, d1(s, f, 2), 1);
  double m = 0;
  for (size_t i = 0; i < f.size(); ++i) m = std::max(m, std::fabs(yz[i] - zy[i]));
  CHECK(m < 1e-12);

  std::vector<double> fx = d1(s, f, 0);
  double err = 0;
  for (int k = 0; k < s.nz; ++k)
    for (int j = 0; j < s.ny; ++j)
      for (int i = 0; i < s.nx; ++i)
        err = std::max(err, std::fabs(fx[s.idx(i, j, k)] -
                                      std::cos(i * s.hx) * std::cos(j * s.hy + k * s.hz)));
  CHECK(err < std::pow(s.hx, 4));  // h^4/30 truly, with slack
}

TEST_CASE("u = y z is a fixed point to machine precision") {
  GridConfig cfg = small_cfg(8);
  cfg.eps = 0;
  FieldState s = init_state(cfg);
  for (int step = 0; step < 200; ++step) rk4_step(s, cfg.dt, cfg.b, cfg.uyz_floor);
  double m = 0;
  for (double x : s.up) m = std::max(m, std::fabs(x));
  for (double x : s.v) m = std::max(m, std::fabs(x));
  CHECK(m == 0.0);  // the vacuum right-hand side vanishes identically
}

TEST_CASE("one step against two half steps: local error is O(dt^5)") {
  GridConfig cfg = small_cfg();
  double err[2];
  int t = 0;
  for (double dt : {0.02, 0.01}) {
    FieldState one = init_state(cfg), two = one;
    rk4_step(one, dt, cfg.b, cfg.uyz_floor);
    rk4_step(two, dt / 2, cfg.b, cfg.uyz_floor);
    rk4_step(two, dt / 2, cfg.b, cfg.uyz_floor);
    err[t++] = sup_diff(one, two);
  }
  CHECK(err[0] < 1e-11);
  double ratio = err[0] / err[1];
  CHECK(ratio > 24.0);
  CHECK(ratio < 40.0);
}

TEST_CASE("halving dt cuts the time-integration error about 16x") {
  GridConfig cfg = small_cfg();
  const double T = 0.1;
  FieldState ref = init_state(cfg);
  for (int i = 0; i < 40; ++i) rk4_step(ref, T / 40, cfg.b, cfg.uyz_floor);
  double e[2];
  int t = 0;
  for (int steps : {2, 4}) {
    FieldState s = init_state(cfg);
    for (int i = 0; i < steps; ++i) rk4_step(s, T / steps, cfg.b, cfg.uyz_floor);
    e[t++] = sup_diff(s, ref);
  }
  double ratio = e[0] / e[1];
  CHECK(ratio > 12.0);
  CHECK(ratio < 22.0);
}

TEST_CASE("b -> -b with x-mirrored data gives the mirrored trajectory") {
  GridConfig cfg = small_cfg();
  FieldState a = init_state(cfg);
  FieldState m = a;
  for (int k = 0; k < a.nz; ++k)
    for (int j = 0; j < a.ny; ++j)
      for (int i = 0; i < a.nx; ++i) {
        int mi = (a.nx - i) % a.nx;
        m.up[m.idx(i, j, k)] = a.up[a.idx(mi, j, k)];
        m.v[m.idx(i, j, k)] = a.v[a.idx(mi, j, k)];
      }
  for (int step = 0; step < 20; ++step) {
    rk4_step(a, cfg.dt, cfg.b, cfg.uyz_floor);
    rk4_step(m, cfg.dt, -cfg.b, cfg.uyz_floor);
  }
  double worst = 0;
  for (int k = 0; k < a.nz; ++k)
    for (int j = 0; j < a.ny; ++j)
      for (int i = 0; i < a.nx; ++i) {
        int mi = (a.nx - i) % a.nx;
        worst = std::max(worst, std::fabs(m.up[m.idx(i, j, k)] - a.up[a.idx(mi, j, k)]));
        worst = std::max(worst, std::fabs(m.v[m.idx(i, j, k)] - a.v[a.idx(mi, j, k)]));
      }
  CHECK(worst < 1e-12);
}

TEST_CASE("the eight monitored integrals: conservation and the negative control") {
  GridConfig cfg = small_cfg();
  cfg.horizon = 0.5;
  RunReport r = run_and_monitor(cfg);
  REQUIRE(!r.aborted);
  for (size_t m = 0; m < r.names.size(); ++m) {
    INFO(r.names[m]);
    if (r.names[m] == "Hcd")
      CHECK(r.max_drift[m] > 5e-5);  // not conserved along this flow
    else
      CHECK(r.max_drift[m] < 1e-5);
  }
}

TEST_CASE("eps=0 run reports identically zero drifts") {
  GridConfig cfg = small_cfg(8);
  cfg.eps = 0;
  cfg.horizon = 0.05;
  RunReport r = run_and_monitor(cfg);
  REQUIRE(!r.aborted);
  for (double d : r.max_drift) CHECK(d == 0.0);
}

TEST_CASE("CSV schema and JSON summary") {
  GridConfig cfg = small_cfg(8);
  cfg.horizon = 0.02;
  cfg.sample_every = 5;
  RunReport r = run_and_monitor(cfg);
  std::string csv = report_csv(r);
  CHECK(csv.rfind("time,H1,H2,H5,H6,H7,H8,min_uyz,drift_H1,drift_H2,drift_H5,"
                  "drift_H6,drift_H7,drift_H8\n", 0) == 0);
  // monotone time column
  CHECK(r.rows.size() >= 2);
  for (size_t i = 1; i < r.rows.size(); ++i) CHECK(r.rows[i][0] > r.rows[i - 1][0]);

  std::string js = report_json(r, cfg);
  CHECK(js.find("\"max_drift\"") != std::string::npos);
  CHECK(js.find("\"Hcd\"") != std::string::npos);
  CHECK(js.find("\"aborted\": false") != std::string::npos);
}

TEST_CASE("w-solve: manufactured solution, kernel gauge, nonlocal flow field") {
  GridConfig cfg = small_cfg();
  FieldState s = init_state(cfg);

  std::vector<double> sigma0(s.size());
  for (int k = 0; k < s.nz; ++k)
    for (int j = 0; j < s.ny; ++j)
      for (int i = 0; i < s.nx; ++i)
        sigma0[s.idx(i, j, k)] = std::sin(i * s.hx + 2 * j * s.hy) +
                                 0.3 * std::cos(j * s.hy - k * s.hz);
  WSolveResult w = solve_w(s, apply_w(s, sigma0));
  CHECK(w.converged);
  CHECK(w.residual < 1e-8);

  WSolveResult trivial = solve_w(s, std::vector<double>(s.size(), 0.0));
  for (double x : trivial.sigma) CHECK(x == 0.0);

  // right-hand side of the nonlocal flow piece: (b/2) w^{-1}(v v_yz + v_y v_z)
  std::vector<double> vy = d1(s, s.v, 1);
  std::vector<double> vyz = d1(s, vy, 2);
  std::vector<double> vz = d1(s, s.v, 2);
  std::vector<double> g(s.size());
  for (size_t i = 0; i < g.size(); ++i)
    g[i] = 0.5 * cfg.b * (s.v[i] * vyz[i] + vy[i] * vz[i]);
  WSolveResult fl = solve_w(s, g, 1e-8, 30000);
  for (double x : fl.sigma) CHECK(std::isfinite(x));
  // g is not in the range of the rank-deficient operator, so the residual
  // stays finite; least-squares optimality (in the row-scaled metric the
  // solver uses) means the adjoint applied to it vanishes
  std::vector<double> ux = d1(s, s.up, 0);
  std::vector<double> uxz = d1(s, ux, 2);
  std::vector<double> uyzf = d1(s, d1(s, s.up, 1), 2);
  std::vector<double> res = apply_w(s, fl.sigma), cres(s.size());
  for (size_t i = 0; i < res.size(); ++i) {
    double uyzv = 1.0 + uyzf[i];
    res[i] = (res[i] - g[i]) / uyzv;
    cres[i] = uxz[i] / uyzv * res[i];
  }
  std::vector<double> nr1 = d1(s, res, 0), nr2 = d1(s, cres, 1);
  double normal_res = 0;
  for (size_t i = 0; i < res.size(); ++i)
    normal_res = std::max(normal_res, std::fabs(-nr1[i] + nr2[i]));
  CHECK(normal_res < 1e-5);
}

TEST_CASE("floor violation aborts with diagnostics") {
  GridConfig cfg = small_cfg(8);
  cfg.uyz_floor = 0.999;  // essentially any perturbation trips it
  cfg.eps = 0.05;
  CHECK_THROWS(init_state(cfg));
}
