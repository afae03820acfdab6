#include "ghe/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "ghe/verdict.hpp"

namespace ghe::sim {

static constexpr double TWO_PI = 6.283185307179586476925286766559;

std::string GridConfig::validate() const {
  auto bad = [](const std::string& m) { return m; };
  if (nx < 8 || ny < 8 || nz < 8) return bad("grid needs at least 8 points per axis");
  if (dt <= 0) return bad("dt must be positive");
  if (horizon < 0) return bad("horizon must be nonnegative");
  if (lx < 0 || ly < 0 || lz < 0) return bad("domain lengths must be positive");
  if (eps < 0) return bad("eps must be nonnegative");
  if (!(uyz_floor > 0) || uyz_floor >= 1) return bad("u_yz floor must lie in (0,1)");
  if (sample_every < 1) return bad("sample_every must be at least 1");
  if (stencil_order != 4) return bad("only the 4th-order stencil is implemented");
  if (!std::isfinite(b) || std::fabs(b) > 1e3) return bad("parameter b out of range");
  return {};
}

GridConfig parse_config(const std::string& text) {
  GridConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto trim = [](std::string s) {
      auto a = s.find_first_not_of(" \t\r");
      if (a == std::string::npos) return std::string();
      auto b = s.find_last_not_of(" \t\r");
      return s.substr(a, b - a + 1);
    };
    std::string t = trim(line);
    if (t.empty()) continue;
    auto eq = t.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config line " + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(t.substr(0, eq)), val = trim(t.substr(eq + 1));
    try {
      if (key == "nx") cfg.nx = std::stoi(val);
      else if (key == "ny") cfg.ny = std::stoi(val);
      else if (key == "nz") cfg.nz = std::stoi(val);
      else if (key == "lx") cfg.lx = std::stod(val);
      else if (key == "ly") cfg.ly = std::stod(val);
      else if (key == "lz") cfg.lz = std::stod(val);
      else if (key == "dt") cfg.dt = std::stod(val);
      else if (key == "T" || key == "horizon") cfg.horizon = std::stod(val);
      else if (key == "b") cfg.b = std::stod(val);
      else if (key == "eps") cfg.eps = std::stod(val);
      else if (key == "seed") cfg.seed = static_cast<unsigned>(std::stoul(val));
      else if (key == "uyz_floor") cfg.uyz_floor = std::stod(val);
      else if (key == "sample_every") cfg.sample_every = std::stoi(val);
      else if (key == "stencil_order") cfg.stencil_order = std::stoi(val);
      else if (key == "bc") {
        if (val != "periodic")
          throw std::runtime_error("only periodic boundary conditions are supported");
      } else
        throw std::runtime_error("unknown config key '" + key + "'");
    } catch (const std::invalid_argument&) {
      throw std::runtime_error("config line " + std::to_string(lineno) + ": bad value for " + key);
    }
  }
  std::string err = cfg.validate();
  if (!err.empty()) throw std::runtime_error("invalid config: " + err);
  return cfg;
}

GridConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::vector<double> d1(const FieldState& s, const std::vector<double>& f, int axis) {
  const int n[3] = {s.nx, s.ny, s.nz};
  const double h[3] = {s.hx, s.hy, s.hz};
  const int na = n[axis];
  const double c1 = 8.0 / (12.0 * h[axis]), c2 = 1.0 / (12.0 * h[axis]);
  std::vector<double> out(f.size());
  for (int k = 0; k < s.nz; ++k)
    for (int j = 0; j < s.ny; ++j)
      for (int i = 0; i < s.nx; ++i) {
        int c[3] = {i, j, k};
        auto at = [&](int d) {
          int t[3] = {c[0], c[1], c[2]};
          t[axis] = (c[axis] + d + 2 * na) % na;
          return s.idx(t[0], t[1], t[2]);
        };
        out[s.idx(i, j, k)] =
            c1 * (f[at(1)] - f[at(-1)]) - c2 * (f[at(2)] - f[at(-2)]);
      }
  return out;
}

FieldState init_state(const GridConfig& cfg) {
  std::string err = cfg.validate();
  if (!err.empty()) throw std::runtime_error("invalid config: " + err);
  FieldState s;
  s.nx = cfg.nx;
  s.ny = cfg.ny;
  s.nz = cfg.nz;
  double lx = cfg.lx > 0 ? cfg.lx : TWO_PI;
  double ly = cfg.ly > 0 ? cfg.ly : TWO_PI;
  double lz = cfg.lz > 0 ? cfg.lz : TWO_PI;
  s.hx = lx / s.nx;
  s.hy = ly / s.ny;
  s.hz = lz / s.nz;
  size_t total = static_cast<size_t>(s.nx) * s.ny * s.nz;
  s.up.assign(total, 0.0);
  s.v.assign(total, 0.0);
  if (cfg.eps != 0) {
    // low-mode data even in y and in z separately.  The flow preserves the
    // class that is even under the joint reflection (y,z) -> (-y,-z), and on
    // the torus the integrals generated by y- and z-diffeomorphisms are
    // conserved only for data even axis by axis: the y*z background is
    // multivalued on the quotient, and this parity is what cancels its
    // boundary monodromy fluxes.  Random phases enter through x alone.
    std::mt19937 rng(cfg.seed);
    std::uniform_real_distribution<double> phase(0.0, TWO_PI);
    std::uniform_real_distribution<double> amp(0.5, 1.0);
    const int modes[4][3] = {{1, 1, 0}, {0, 1, 1}, {1, 0, 1}, {1, 1, 1}};
    for (auto* field : {&s.up, &s.v})
      for (const auto& m : modes) {
        double a = cfg.eps * amp(rng) / 4.0;
        double p1 = phase(rng);
        for (int k = 0; k < s.nz; ++k)
          for (int j = 0; j < s.ny; ++j)
            for (int i = 0; i < s.nx; ++i)
              (*field)[s.idx(i, j, k)] += a * std::cos(m[0] * (i * s.hx) + p1) *
                                          std::cos(m[1] * (j * s.hy)) *
                                          std::cos(m[2] * (k * s.hz));
      }
  }
  double floor0 = min_uyz(s);
  if (floor0 < cfg.uyz_floor)
    throw std::runtime_error("initial data violates the u_yz floor: min u_yz = " +
                             std::to_string(floor0));
  return s;
}

static std::vector<double> uyz_field(const FieldState& s, const std::vector<double>& up) {
  std::vector<double> uy = d1(s, up, 1);
  std::vector<double> uyz = d1(s, uy, 2);
  for (double& x : uyz) x += 1.0;
  return uyz;
}

double min_uyz(const FieldState& s) {
  std::vector<double> uyz = uyz_field(s, s.up);
  return *std::min_element(uyz.begin(), uyz.end());
}

// right-hand side of u_t = v, v_t = u_xx + (-u_xy u_xz + v_y v_z
//   + b (v_y u_xz - v_z u_xy)) / u_yz on the periodic part
static void rhs(const FieldState& s, const std::vector<double>& up,
                const std::vector<double>& v, double b, double floor,
                std::vector<double>& du, std::vector<double>& dv) {
  std::vector<double> ux = d1(s, up, 0);
  std::vector<double> uxx = d1(s, ux, 0);
  std::vector<double> uxy = d1(s, ux, 1);
  std::vector<double> uxz = d1(s, ux, 2);
  std::vector<double> uyz = uyz_field(s, up);
  std::vector<double> vy = d1(s, v, 1);
  std::vector<double> vz = d1(s, v, 2);
  double mn = *std::min_element(uyz.begin(), uyz.end());
  if (mn < floor) {
    char buf[128];
    std::snprintf(buf, sizeof buf,
                  "u_yz floor violated during step: min u_yz = %.6g < %.3g at t = %.6g",
                  mn, floor, s.time);
    throw std::runtime_error(buf);
  }
  du = v;
  dv.resize(v.size());
  for (size_t i = 0; i < v.size(); ++i)
    dv[i] = uxx[i] + (-uxy[i] * uxz[i] + vy[i] * vz[i] +
                      b * (vy[i] * uxz[i] - vz[i] * uxy[i])) /
                         uyz[i];
}

void rk4_step(FieldState& s, double dt, double b, double floor) {
  size_t n = s.size();
  std::vector<double> k1u, k1v, k2u, k2v, k3u, k3v, k4u, k4v, tu(n), tv(n);
  rhs(s, s.up, s.v, b, floor, k1u, k1v);
  for (size_t i = 0; i < n; ++i) {
    tu[i] = s.up[i] + 0.5 * dt * k1u[i];
    tv[i] = s.v[i] + 0.5 * dt * k1v[i];
  }
  rhs(s, tu, tv, b, floor, k2u, k2v);
  for (size_t i = 0; i < n; ++i) {
    tu[i] = s.up[i] + 0.5 * dt * k2u[i];
    tv[i] = s.v[i] + 0.5 * dt * k2v[i];
  }
  rhs(s, tu, tv, b, floor, k3u, k3v);
  for (size_t i = 0; i < n; ++i) {
    tu[i] = s.up[i] + dt * k3u[i];
    tv[i] = s.v[i] + dt * k3v[i];
  }
  rhs(s, tu, tv, b, floor, k4u, k4v);
  for (size_t i = 0; i < n; ++i) {
    s.up[i] += dt / 6.0 * (k1u[i] + 2 * k2u[i] + 2 * k3u[i] + k4u[i]);
    s.v[i] += dt / 6.0 * (k1v[i] + 2 * k2v[i] + 2 * k3v[i] + k4v[i]);
  }
  s.time += dt;
}

std::vector<std::string> density_names() {
  return {"H1", "H2", "H5", "H6", "H7", "H8", "h2", "H0", "Hcd"};
}

// integrand of the named functional at one grid point; abstract functions are
// instantiated with periodic representatives f(z)=sin z, g(y)=cos y,
// h(y)=cos y, k(z)=cos z (h and k must be even about the reflection centre,
// or the background monodromy spoils conservation on the torus), and the
// non-conserved control Hcd uses the fixed x-periodic surrogate
// c+d = sin x + cos x
static double density_at(const std::string& name, double b, double x, double y,
                         double z, double v, double ux, double uy, double uz,
                         double uyz, double uxy, double uxz) {
  if (name == "H1") return 0.5 * (v * v + ux * ux) * uyz;
  if (name == "H2") return (b * v * ux - 0.5 * (ux * ux + v * v)) * uyz;
  if (name == "H5") return std::sin(z) * v * uyz + 0.5 * b * std::cos(z) * ux * uy;
  if (name == "H6") return std::cos(y) * v * uyz + 0.5 * b * std::sin(y) * ux * uz;
  if (name == "H7")
    return -0.25 * std::cos(y) *
           (4 * v * uy * uyz + b * (2 * ux * uy * uyz - uy * uy * uxz));
  if (name == "H8")
    return -0.25 * std::cos(z) *
           (4 * v * uz * uyz - b * (2 * ux * uz * uyz - uz * uz * uxy));
  if (name == "h2") return (0.5 * b * (v * v + ux * ux) - v * ux) * uyz;
  if (name == "H0") {
    if (std::fabs(b * b - 1.0) < 1e-12)
      throw std::runtime_error("H0 is undefined at b = +-1");
    return (2 * ux * v + b * (v * v + ux * ux)) * uyz / (2 * (b * b - 1));
  }
  if (name == "Hcd") {
    double c = std::sin(x) + std::cos(x), cp = std::cos(x) - std::sin(x);
    return c * v * uyz + 0.5 * cp * uy * uz;
  }
  throw std::runtime_error("unknown density '" + name + "'");
}

struct DensitySums {
  std::vector<double> value;  // quadrature of the density
  std::vector<double> l1;     // quadrature of its absolute value
};

static DensitySums integrate_all(const FieldState& s,
                                 const std::vector<std::string>& names, double b) {
  std::vector<double> ux = d1(s, s.up, 0);
  std::vector<double> uyp = d1(s, s.up, 1);
  std::vector<double> uzp = d1(s, s.up, 2);
  std::vector<double> uyz = d1(s, uyp, 2);
  std::vector<double> uxy = d1(s, ux, 1);
  std::vector<double> uxz = d1(s, ux, 2);
  double cell = s.hx * s.hy * s.hz;
  DensitySums out;
  out.value.assign(names.size(), 0.0);
  out.l1.assign(names.size(), 0.0);
  for (int k = 0; k < s.nz; ++k)
    for (int j = 0; j < s.ny; ++j)
      for (int i = 0; i < s.nx; ++i) {
        size_t p = s.idx(i, j, k);
        double x = i * s.hx, y = j * s.hy, z = k * s.hz;
        double uy = z + uyp[p], uz = y + uzp[p], uyzv = 1.0 + uyz[p];
        for (size_t m = 0; m < names.size(); ++m) {
          double d = density_at(names[m], b, x, y, z, s.v[p], ux[p], uy, uz,
                                uyzv, uxy[p], uxz[p]);
          out.value[m] += d * cell;
          out.l1[m] += std::fabs(d) * cell;
        }
      }
  return out;
}

double integral_value(const FieldState& s, const std::string& name, double b) {
  return integrate_all(s, {name}, b).value[0];
}

std::vector<double> apply_w(const FieldState& s, const std::vector<double>& f) {
  std::vector<double> ux = d1(s, s.up, 0);
  std::vector<double> uxz = d1(s, ux, 2);
  std::vector<double> uyz = uyz_field(s, s.up);
  std::vector<double> fx = d1(s, f, 0);
  std::vector<double> fy = d1(s, f, 1);
  std::vector<double> out(f.size());
  for (size_t i = 0; i < f.size(); ++i) out[i] = uyz[i] * fx[i] - uxz[i] * fy[i];
  return out;
}

static double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

WSolveResult solve_w(const FieldState& s, const std::vector<double>& g,
                     double tol, int max_iter) {
  size_t n = g.size();
  std::vector<double> ux = d1(s, s.up, 0);
  std::vector<double> uxz = d1(s, ux, 2);
  std::vector<double> uyz = uyz_field(s, s.up);
  // row equilibration: solve (D_x - (u_xz/u_yz) D_y) f = g / u_yz, which
  // leaves the normal-equation diagonal nearly constant (u_yz stays near 1)
  std::vector<double> c(n), gp(n);
  for (size_t i = 0; i < n; ++i) {
    c[i] = uxz[i] / uyz[i];
    gp[i] = g[i] / uyz[i];
  }
  auto A = [&](const std::vector<double>& f) {
    std::vector<double> fx = d1(s, f, 0), fy = d1(s, f, 1), out(n);
    for (size_t i = 0; i < n; ++i) out[i] = fx[i] - c[i] * fy[i];
    return out;
  };
  // centered differences are exactly antisymmetric on the periodic lattice
  auto At = [&](const std::vector<double>& r) {
    std::vector<double> cr(n);
    for (size_t i = 0; i < n; ++i) cr[i] = c[i] * r[i];
    std::vector<double> rx = d1(s, r, 0), cy = d1(s, cr, 1), out(n);
    for (size_t i = 0; i < n; ++i) out[i] = -rx[i] + cy[i];
    return out;
  };
  WSolveResult res;
  res.sigma.assign(n, 0.0);
  double gnorm = std::sqrt(dot(gp, gp));
  if (gnorm == 0) {
    res.converged = true;
    return res;
  }
  std::vector<double> r = gp;  // residual with sigma = 0
  std::vector<double> sv = At(r), p = sv;
  double rho = dot(sv, sv);
  for (int it = 0; it < max_iter; ++it) {
    std::vector<double> q = A(p);
    double qq = dot(q, q);
    if (qq == 0) break;
    double alpha = rho / qq;
    for (size_t i = 0; i < n; ++i) {
      res.sigma[i] += alpha * p[i];
      r[i] -= alpha * q[i];
    }
    res.iterations = it + 1;
    res.residual = std::sqrt(dot(r, r)) / gnorm;
    if (res.residual < tol) {
      res.converged = true;
      break;
    }
    sv = At(r);
    double rho2 = dot(sv, sv);
    double beta = rho2 / rho;
    rho = rho2;
    for (size_t i = 0; i < n; ++i) p[i] = sv[i] + beta * p[i];
  }
  // mean-zero gauge over each z-slice (the kernel contains functions of z)
  size_t slab = static_cast<size_t>(s.nx) * s.ny;
  for (int k = 0; k < s.nz; ++k) {
    double mean = 0;
    for (size_t i = 0; i < slab; ++i) mean += res.sigma[k * slab + i];
    mean /= static_cast<double>(slab);
    for (size_t i = 0; i < slab; ++i) res.sigma[k * slab + i] -= mean;
  }
  return res;
}

RunReport run_and_monitor(const GridConfig& cfg) {
  RunReport rep;
  rep.names = density_names();
  FieldState s = init_state(cfg);
  DensitySums first = integrate_all(s, rep.names, cfg.b);
  rep.initial = first.value;
  rep.scale.resize(rep.names.size());
  for (size_t m = 0; m < rep.names.size(); ++m)
    rep.scale[m] = first.l1[m] > 1e-300 ? first.l1[m] : 1.0;
  rep.max_drift.assign(rep.names.size(), 0.0);
  long steps = std::lround(cfg.horizon / cfg.dt);
  auto record = [&]() {
    DensitySums now = integrate_all(s, rep.names, cfg.b);
    std::vector<double> row;
    row.push_back(s.time);
    for (double h : now.value) row.push_back(h);
    row.push_back(min_uyz(s));
    for (size_t m = 0; m < rep.names.size(); ++m) {
      double drift = std::fabs(now.value[m] - rep.initial[m]) / rep.scale[m];
      rep.max_drift[m] = std::max(rep.max_drift[m], drift);
      row.push_back(drift);
    }
    rep.rows.push_back(std::move(row));
  };
  record();
  for (long step = 0; step < steps; ++step) {
    try {
      rk4_step(s, cfg.dt, cfg.b, cfg.uyz_floor);
    } catch (const std::exception& e) {
      rep.aborted = true;
      rep.abort_reason = e.what();
      break;
    }
    if ((step + 1) % cfg.sample_every == 0 || step + 1 == steps) record();
  }
  return rep;
}

// the CSV carries the acceptance set; the JSON summary carries everything
static const std::vector<std::string> kCsvSet = {"H1", "H2", "H5",
                                                 "H6", "H7", "H8"};

std::string report_csv(const RunReport& r) {
  std::vector<size_t> cols;
  for (const auto& n : kCsvSet)
    cols.push_back(std::find(r.names.begin(), r.names.end(), n) - r.names.begin());
  std::ostringstream out;
  out << "time";
  for (const auto& n : kCsvSet) out << "," << n;
  out << ",min_uyz";
  for (const auto& n : kCsvSet) out << ",drift_" << n;
  out << "\n";
  char buf[32];
  for (const auto& row : r.rows) {
    auto emit = [&](double x) {
      std::snprintf(buf, sizeof buf, "%.12g", x);
      out << buf;
    };
    emit(row[0]);
    for (size_t c : cols) {
      out << ",";
      emit(row[1 + c]);
    }
    out << ",";
    emit(row[1 + r.names.size()]);
    for (size_t c : cols) {
      out << ",";
      emit(row[2 + r.names.size() + c]);
    }
    out << "\n";
  }
  return out.str();
}

std::string report_json(const RunReport& r, const GridConfig& cfg) {
  nlohmann::json j;
  j["grid"] = {{"nx", cfg.nx}, {"ny", cfg.ny}, {"nz", cfg.nz}};
  j["dt"] = cfg.dt;
  j["horizon"] = cfg.horizon;
  j["b"] = cfg.b;
  j["eps"] = cfg.eps;
  j["seed"] = cfg.seed;
  j["aborted"] = r.aborted;
  if (r.aborted) j["abort_reason"] = r.abort_reason;
  j["samples"] = r.rows.size();
  nlohmann::json drifts = nlohmann::json::object();
  nlohmann::json initial = nlohmann::json::object();
  for (size_t m = 0; m < r.names.size(); ++m) {
    drifts[r.names[m]] = r.max_drift[m];
    initial[r.names[m]] = r.initial[m];
  }
  j["max_drift"] = drifts;
  j["initial"] = initial;
  j["control"] = "Hcd";
  return j.dump(2);
}

void register_sim_checks() {
  register_check("sim:steady", [] {
    GridConfig cfg;
    cfg.nx = cfg.ny = cfg.nz = 8;
    cfg.eps = 0;
    FieldState s = init_state(cfg);
    double worst = 0;
    for (int step = 0; step < 1000; ++step) {
      rk4_step(s, cfg.dt, cfg.b, cfg.uyz_floor);
      for (double x : s.up) worst = std::max(worst, std::fabs(x));
      for (double x : s.v) worst = std::max(worst, std::fabs(x));
    }
    Verdict v;
    v.name = "sim:steady";
    v.pass = worst <= 1e-12;
    v.detail = "max |field| after 1000 steps from u = y z: " + std::to_string(worst);
    return v;
  });
  register_check("sim:wsolve", [] {
    GridConfig cfg;
    FieldState s = init_state(cfg);
    std::vector<double> sigma0(s.size());
    for (int k = 0; k < s.nz; ++k)
      for (int j = 0; j < s.ny; ++j)
        for (int i = 0; i < s.nx; ++i)
          sigma0[s.idx(i, j, k)] = std::sin(i * s.hx + 2 * j * s.hy) +
                                   0.3 * std::cos(j * s.hy - k * s.hz);
    WSolveResult r = solve_w(s, apply_w(s, sigma0));
    Verdict v;
    v.name = "sim:wsolve";
    v.pass = r.converged && r.residual < 1e-8;
    v.detail = "manufactured solution residual " + std::to_string(r.residual) +
               " after " + std::to_string(r.iterations) + " iterations";
    return v;
  });
}

}  // namespace ghe::sim
