#pragma once

// Periodic-grid integration of the two-component flow with conserved-integral
// monitoring, plus a grid-level least-squares inverse of the first-order
// operator w = u_yz D_x - u_xz D_y.
//
// The evolved field is the periodic part of u = y*z + utilde; the background
// contributes u_yz = 1 + utilde_yz, u_y = z + utilde_y, u_z = y + utilde_z and
// nothing else (every other background derivative vanishes identically).

#include <array>
#include <string>
#include <vector>

namespace ghe::sim {

struct GridConfig {
  int nx = 32, ny = 32, nz = 32;
  double lx = 0, ly = 0, lz = 0;  // 0 means 2*pi
  double dt = 2e-3;
  double horizon = 1.0;
  double b = 0.5;
  double eps = 0.05;
  unsigned seed = 1;
  double uyz_floor = 0.1;
  int sample_every = 25;
  int stencil_order = 4;

  // empty string when valid, otherwise a human-readable complaint
  std::string validate() const;
};

// key = value lines, '#' comments; unknown keys are an error
GridConfig load_config(const std::string& path);
GridConfig parse_config(const std::string& text);

struct FieldState {
  int nx = 0, ny = 0, nz = 0;
  double hx = 0, hy = 0, hz = 0;
  double time = 0;
  std::vector<double> up;  // periodic part of u
  std::vector<double> v;

  size_t size() const { return up.size(); }
  size_t idx(int i, int j, int k) const {
    return (static_cast<size_t>(k) * ny + j) * nx + i;
  }
};

FieldState init_state(const GridConfig& cfg);

// centered 4th-order first difference along axis 0/1/2 (x/y/z)
std::vector<double> d1(const FieldState& s, const std::vector<double>& f, int axis);

double min_uyz(const FieldState& s);

// one classical Runge-Kutta step of (up, v); throws std::runtime_error with
// diagnostics when min u_yz falls below the floor
void rk4_step(FieldState& s, double dt, double b, double floor);

// monitored densities: H1, H2, H5, H6, H7, H8 (acceptance set), plus the
// lower-index pair h2, H0 and the non-conserved control Hcd
std::vector<std::string> density_names();
double integral_value(const FieldState& s, const std::string& name, double b);

std::vector<double> apply_w(const FieldState& s, const std::vector<double>& f);

struct WSolveResult {
  std::vector<double> sigma;
  double residual = 0;  // ||w sigma - g|| / ||g||
  int iterations = 0;
  bool converged = false;
};

// conjugate gradient on the normal equations with diagonal row scaling;
// the kernel ambiguity (functions of z and u_z) is fixed by a mean-zero gauge
// over each z-slice
WSolveResult solve_w(const FieldState& s, const std::vector<double>& g,
                     double tol = 1e-9, int max_iter = 30000);

struct RunReport {
  std::vector<std::string> names;  // densities in CSV order
  std::vector<double> initial;
  std::vector<double> scale;              // drift normalization per density
  std::vector<std::vector<double>> rows;  // time, H..., min_uyz, drift...
  std::vector<double> max_drift;
  bool aborted = false;
  std::string abort_reason;
};

RunReport run_and_monitor(const GridConfig& cfg);

// schema: time,H1,H2,H5,H6,H7,H8,min_uyz,drift_H1,...
std::string report_csv(const RunReport& r);
std::string report_json(const RunReport& r, const GridConfig& cfg);

void register_sim_checks();

}  // namespace ghe::sim
