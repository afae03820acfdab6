#pragma once

// Jacobi identities for the Hamiltonian pencil through the functional
// multi-vector criterion: the bi-vector of a skew-adjoint operator matrix,
// the prolonged evolutionary vector field with operator-valued characteristic,
// and the reduction of pr v(Theta) modulo total divergences with symbolic
// parameters a and b.

#include "ghe/recursion.hpp"
#include "ghe/wedge.hpp"

namespace ghe {

LinOp2 j_pencil();           // J1 + a J0 in the arranged entry form
Verdict j_pencil_check();    // agrees with j1() + a j0(); skew-adjoint
LinOp2 j_pencil_mutated();   // the a D_z v_y summand of J^22 deleted

// Theta = 1/2 (eta,theta) ^ J (eta,theta)^T, expanded term by term
WedgeExpr build_bivector(const LinOp2& J);
WedgeExpr theta_bivector_display();  // the arranged nine-term integrand

// characteristic row i of J omega as a degree-1 wedge
WedgeExpr characteristic_row(const LinOp2& J, int row);

// prolonged vector field with characteristic J omega; annihilates bare
// uni-vectors, differentiates coefficients and w^{-1} wraps (the wrap rule
// pr v(w^{-1}) = -w^{-1} pr v(w) w^{-1} is applied with the integrations by
// parts done on the spot, so the result is canonical modulo divergences)
WedgeExpr pr_v_J(const LinOp2& J, Sym jet_sym);
WedgeExpr pr_v_J(const LinOp2& J, const WedgeExpr& e);

// the arranged trivector display for pr v(Theta) of the pencil, and the audit
// that the machine expansion agrees with it modulo divergences
WedgeExpr prv_theta_display();
Verdict prv_theta_audit();

Verdict theta_display_check();  // build_bivector(j_pencil()) vs the display

Verdict jacobi_verdict(const LinOp2& J, const std::string& name, bool fail_fast = false);
Verdict jacobi_compatibility_check();  // pencil J, symbolic a and b

void register_olver_checks();

}  // namespace ghe
