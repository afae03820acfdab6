#pragma once

// Dirac constraint operator K, the symplectic two-form closure test, the first
// Hamiltonian operator J0 = K^{-1}, the Hamiltonian form of the flow, the
// inverse Noether reconstruction of conserved densities, and the integrals
// table with conservation checks.

#include <functional>

#include "ghe/model.hpp"

namespace ghe {

// K11 = (v_z + b u_xz) D_y + (v_y - b u_xy) D_z + v_yz
LinOp k11_op();
LinOp2 constraint_matrix();  // K
LinOp2 j0();                 // inverse of K

// closure of a two-form given as its bilinear density on two test flows:
// the vertical differential, evaluated on three generic arguments, must be a
// total divergence
using BilinearForm = std::function<DiffExpr(const Flow&, const Flow&)>;
Verdict closure_verdict(const BilinearForm& omega, const std::string& name);
Verdict symplectic_closure_verdict(const LinOp2& K, const std::string& name);
Verdict symplectic_closure_check();

Verdict j0_inverse_check();  // K J0 = J0 K = 1 and J0 + J0^+ = 0

DiffExpr h1_density();      // 1/2 (v^2 + u_x^2) u_yz
DiffExpr h1_density_alt();  // 1/2 (v^2 u_yz + u_y u_z u_xx)
std::array<DiffExpr, 2> gradient(const DiffExpr& density);  // (delta_u, delta_v)
Verdict hamiltonian_flow_check();

struct NoetherResult {
  bool variational = false;
  DiffExpr density;      // set when variational
  DiffExpr obstruction;  // set when not
};

// reconstruct a density H with delta_u H = K11 phi - u_yz psi, delta_v H = u_yz phi
NoetherResult inverse_noether(const Flow& q);

struct IntegralEntry {
  std::string name;    // H2, H3, H5, H6, H7, H8, Hcd
  std::string source;  // generating symmetry
  DiffExpr density;
};
std::vector<IntegralEntry> integral_table();

// d/dt of the density along u_t = v, v_t = q (includes explicit t-dependence)
Verdict conservation_gh_flow(const DiffExpr& density, const std::string& name);
// d/dtau along an arbitrary symmetry flow
Verdict conservation_along(const DiffExpr& density, const Flow& q, const std::string& name);
// full table x {flows}: conserved exactly when source and flow commute
Verdict conservation_matrix_check();

std::string integral_table_json();

void register_hamiltonian_checks();

}  // namespace ghe
