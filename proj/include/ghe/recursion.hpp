#pragma once

// Recursion structure: the one-component recursion relations and their
// integrability conditions, the two-component recursion operator R with its
// adjoint, the second Hamiltonian operator J1 = R J0, the bi-Hamiltonian
// form of the flow, and the higher flows generated by R^+.

#include "ghe/hamiltonian.hpp"

namespace ghe {

LinOp zeta_op();  // u_yz D_x - u_xy D_z

// audit of the two commutator expansions used in the integrability proof;
// direct computation is authoritative, disagreements are recorded with the
// corrected coefficients
Verdict commutator_expansion_check();

// eliminate phi-jets (resp. psi-jets) from the prolonged recursion relations
// of family n; the surviving relation must be a nonzero multiple of the
// linearized equation for the other characteristic
Verdict integrability_elimination_check(int n, bool negate_gamma = false);

LinOp2 r_matrix();          // entrywise form
LinOp2 r_matrix_product();  // factored form, before expansion
LinOp2 r_adjoint();         // entrywise form of R^+

// entry form == product form; the defining matrix recursion relation holds;
// R = J1 J0^{-1} and R^+ = J0^{-1} J1; printed adjoint entries
Verdict recursion_inversion_check();

LinOp2 j1();
Verdict j1_entries_check();  // R J0 == printed entries
Verdict j1_skew_check();     // J1 + J1^+ = 0

DiffExpr h0_density();  // [2 u_x v + b(v^2+u_x^2)] u_yz / (2(b^2-1))
Verdict bihamiltonian_check();

struct AdjointStep {
  std::array<DiffExpr, 2> grad;  // R^+ (delta_u H, delta_v H), atom-reduced
  bool gradient = false;         // true when a local density matches
  DiffExpr density;              // set when gradient
  DiffExpr obstruction;          // set when not
};
AdjointStep adjoint_step(const DiffExpr& density);

DiffExpr h2_density();  // (b/2)(v^2+u_x^2) u_yz - v u_x u_yz
Verdict h2_check();

std::array<DiffExpr, 2> higher_flow(const DiffExpr& density, const LinOp2& op);
Verdict j0h2_flow_check();  // (b v - u_x, b q - v_x)
Verdict j1h2_flow_check();  // nonlocal characteristic with the w^{-1} term

void register_recursion_checks();

}  // namespace ghe
