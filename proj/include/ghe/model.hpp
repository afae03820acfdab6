#pragma once

// The equation itself: residuals in both charts, the first-order operators
// L_{ij(k)} and the three Lax pairs, reduction modulo the equation ideal,
// the linearization operator and its divergence decomposition, the
// two-component evolutionary flow with its Lagrangian, and the table of
// point symmetries in characteristic form.

#include "ghe/nonlocal.hpp"
#include "ghe/verdict.hpp"

namespace ghe {

// alpha = -(beta + gamma), eliminated throughout
DiffExpr alpha_param();

DiffExpr ghe_residual(Chart ch);

// rewrite modulo the equation: solves for u_12 (and t,x-prolongations) in the
// z-chart; result is a normal form that vanishes iff the input is in the ideal
DiffExpr ghe_reduce(const DiffExpr& e);

// L_{ij(k)} = u_{jk} D_i - u_{ik} D_j  (1-based z-chart axes, all distinct)
LinOp L_op(int i, int j, int k);

// the pair (X1, X2) with spectral parameter lambda, n = 1, 2, 3
std::pair<LinOp, LinOp> lax_pair(int n);

// commutator of two first-order z-chart operators reduced mod the equation
Verdict lax_commutator_verdict(const LinOp& X1, const LinOp& X2, const std::string& name);
Verdict lax_commutator_check(int n);

// linearization:  A phi = alpha(u34 phi12 + u12 phi34) + beta(u24 phi13 + u13 phi24)
//                        + gamma(u23 phi14 + u14 phi23)
DiffExpr symmetry_operator_apply(const DiffExpr& phi);
// the equivalent divergence form  beta(D3 L14(2) - D2 L14(3)) + gamma(D3 L24(1) - D1 L24(3))
LinOp symcon_operator_form();

// u_t = v, v_t = q
Flow two_component_flow();

DiffExpr lagrangian_density();
Verdict lagrangian_verdict(const DiffExpr& density);
Verdict lagrangian_check();

struct SymmetryCharacteristic {
  std::string name;
  Flow q;
};

std::vector<std::string> symmetry_names();
SymmetryCharacteristic point_symmetry(const std::string& name);

Verdict is_symmetry(const Flow& q, const std::string& label = "characteristic");

void register_model_checks();

}  // namespace ghe
