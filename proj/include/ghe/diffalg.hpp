#pragma once

// Total derivatives, Euler (variational derivative) operators, total-divergence
// tests, elimination of t-derivatives along an evolution flow, and evolutionary
// prolongation / characteristic brackets.

#include "ghe/expr.hpp"

namespace ghe {

// Hooks implemented by the nonlocal layer (atoms are w^{-1} applications whose
// x-derivative rewrites through the payload).
DiffExpr atom_dx_rule(Sym atom_sym);
bool atom_payload_contains_dep(Sym atom_sym, Dep dep);

DiffExpr total_derivative(const DiffExpr& e, Axis ax);
DiffExpr total_derivative_multi(const DiffExpr& e, Chart ch, MultiIndex J);

// Euler operator over all four axes of the chart.
DiffExpr euler_full(const DiffExpr& e, Dep dep, Chart ch);

// Euler operator over the spatial axes x,y,z of the TX chart, applied to the
// class of jets of `dep` carrying exactly `tcount` t-derivatives (each such
// class behaves as an independent dependent when t-derivatives are inert).
DiffExpr euler_spatial_class(const DiffExpr& e, Dep dep, int tcount);

// spatial Euler for densities free of t-derivatives of `dep`
DiffExpr euler_spatial(const DiffExpr& e, Dep dep);

// e = D_x(.) + D_y(.) + D_z(.) for some local expressions?
bool is_total_divergence_xyz(const DiffExpr& e);

// An evolution flow u_t = phi, v_t = psi (phi, psi free of t-derivatives).
struct Flow {
  DiffExpr phi, psi;
};

// the two-component evolution flow of the equation itself is built in model.cpp
// Eliminate every t-derivative of u and v from e using the flow.
DiffExpr substitute_flow(const DiffExpr& e, const Flow& fl);

// Prolongation of the evolutionary vector field with characteristic (phi, psi)
// acting on a local expression in jets of u and v.
DiffExpr prolong_evolutionary(const Flow& q, const DiffExpr& e);

// commutator of characteristics: [Q1,Q2] = pr_{Q1} Q2 - pr_{Q2} Q1, componentwise
Flow characteristic_bracket(const Flow& q1, const Flow& q2);

}  // namespace ghe
