#include "ghe/model.hpp"

#include <array>
#include <map>

namespace ghe {

namespace {

DiffExpr beta_p() { return param(Param::Beta); }
DiffExpr gamma_p() { return param(Param::Gamma); }
DiffExpr b_p() { return param(Param::Bflow); }

DiffExpr uz(int a, int b, int c, int d) { return jet_z(Dep::U, a, b, c, d); }
DiffExpr utx(int a, int b, int c, int d) { return jet_tx(Dep::U, a, b, c, d); }
DiffExpr vtx(int a, int b, int c, int d) { return jet_tx(Dep::V, a, b, c, d); }

// u_{ij} in the z-chart, 1-based indices
DiffExpr u_pair(int i, int j) {
  MultiIndex J;
  J.c[i - 1] += 1;
  J.c[j - 1] += 1;
  return jet(Dep::U, Chart::Z, J);
}

}  // namespace

DiffExpr alpha_param() { return -(beta_p() + gamma_p()); }

DiffExpr ghe_residual(Chart ch) {
  if (ch == Chart::Z)
    return alpha_param() * u_pair(1, 2) * u_pair(3, 4) + beta_p() * u_pair(1, 3) * u_pair(2, 4) +
           gamma_p() * u_pair(1, 4) * u_pair(2, 3);
  return alpha_param() * (utx(2, 0, 0, 0) - utx(0, 2, 0, 0)) * utx(0, 0, 1, 1) +
         beta_p() * (utx(1, 0, 1, 0) + utx(0, 1, 1, 0)) * (utx(1, 0, 0, 1) - utx(0, 1, 0, 1)) +
         gamma_p() * (utx(1, 0, 1, 0) - utx(0, 1, 1, 0)) * (utx(1, 0, 0, 1) + utx(0, 1, 0, 1));
}

DiffExpr ghe_reduce(const DiffExpr& e) {
  // u_12 = -(beta u13 u24 + gamma u14 u23) / (alpha u34); alpha = -(beta+gamma)
  // is a nonzero polynomial, so the rewrite is well defined for formal parameters.
  static const DiffExpr rhs =
      -(beta_p() * u_pair(1, 3) * u_pair(2, 4) + gamma_p() * u_pair(1, 4) * u_pair(2, 3)) /
      (alpha_param() * u_pair(3, 4));
  DiffExpr r = e;
  for (int guard = 0; guard < 4096; ++guard) {
    Sym best = 0;
    long best_rank = -1;
    for (Sym s : collect_syms(r)) {
      if (!sym_is_jet(s) || jet_dep(s) != Dep::U || jet_chart(s) != Chart::Z) continue;
      MultiIndex J = jet_index(s);
      if (J.c[0] < 1 || J.c[1] < 1) continue;
      // (c1 + c2) strictly decreases across substitutions, so rank by it first
      long rank = 100L * (J.c[0] + J.c[1]) + J.order();
      if (rank > best_rank || (rank == best_rank && sym_less(best, s))) {
        best = s;
        best_rank = rank;
      }
    }
    if (!best) return r;
    MultiIndex J = jet_index(best);
    DiffExpr value =
        total_derivative_multi(rhs, Chart::Z, mi(J.c[0] - 1, J.c[1] - 1, J.c[2], J.c[3]));
    r = subst(r, best, value);
  }
  throw std::runtime_error("ghe_reduce did not reach a normal form");
}

LinOp L_op(int i, int j, int k) {
  if (i < 1 || i > 4 || j < 1 || j > 4 || k < 1 || k > 4 || i == j || i == k || j == k)
    throw std::runtime_error("L_op: indices must be three distinct z-chart axes");
  return LinOp::mul(u_pair(j, k)) * LinOp::diff(ax_zi(i)) -
         LinOp::mul(u_pair(i, k)) * LinOp::diff(ax_zi(j));
}

std::pair<LinOp, LinOp> lax_pair(int n) {
  DiffExpr lg = param(Param::Lambda) * gamma_p();
  DiffExpr lb = param(Param::Lambda) * beta_p();
  switch (n) {
    case 1:
      return {L_op(1, 4, 3) + LinOp::mul(lg) * L_op(1, 3, 4),
              -L_op(2, 4, 3) + LinOp::mul(lb) * L_op(2, 3, 4)};
    case 2:
      return {L_op(2, 3, 1) + LinOp::mul(lg) * L_op(1, 3, 2),
              L_op(2, 4, 1) - LinOp::mul(lb) * L_op(1, 4, 2)};
    case 3:
      return {L_op(4, 1, 2) + LinOp::mul(lg) * L_op(4, 2, 1),
              -L_op(3, 1, 2) + LinOp::mul(lb) * L_op(3, 2, 1)};
  }
  throw std::runtime_error("lax_pair: n must be 1, 2 or 3");
}

namespace {

// coefficients of a purely first-order operator sum_i a_i D_i in the z-chart
std::array<DiffExpr, 4> first_order_z_coeffs(const LinOp& X) {
  std::array<DiffExpr, 4> a = {DiffExpr(0), DiffExpr(0), DiffExpr(0), DiffExpr(0)};
  for (auto& t : X.terms) {
    DiffExpr c(1);
    int axis = -1;
    for (auto& f : t) {
      switch (f.kind) {
        case OpFactor::Kind::Mul:
          if (axis >= 0) throw std::runtime_error("first-order operator: factor after D");
          c = c * f.c;
          break;
        case OpFactor::Kind::Diff:
          if (axis >= 0 || f.ax.chart != Chart::Z)
            throw std::runtime_error("first-order operator: unexpected shape");
          axis = f.ax.id;
          break;
        case OpFactor::Kind::InvW:
          throw std::runtime_error("first-order operator: nonlocal factor");
      }
    }
    if (axis < 0) throw std::runtime_error("first-order operator: zeroth-order term");
    a[(size_t)axis] += c;
  }
  return a;
}

}  // namespace

// The pair annihilates a joint eigenfunction, so the defining property is the
// integrability of the span on solutions: [X1, X2] = a X1 + b X2 modulo the
// equation, with function coefficients a, b.  The commutator itself is not
// zero; its expansion through the first-order L-operators makes that explicit.
Verdict lax_commutator_verdict(const LinOp& X1, const LinOp& X2, const std::string& name) {
  Verdict v;
  v.name = name;
  auto x1 = first_order_z_coeffs(X1);
  auto x2 = first_order_z_coeffs(X2);
  Sym lam = sym_param(Param::Lambda);
  int max_lambda_deg = 0;
  std::array<DiffExpr, 4> c;
  for (int i = 0; i < 4; ++i) {
    // [X1, X2] = sum_i { X1(x2_i) - X2(x1_i) } D_i
    c[(size_t)i] = DiffExpr(0);
    for (int j = 0; j < 4; ++j)
      c[(size_t)i] += x1[(size_t)j] * total_derivative(x2[(size_t)i], ax_zi(j + 1)) -
                      x2[(size_t)j] * total_derivative(x1[(size_t)i], ax_zi(j + 1));
    c[(size_t)i] = ghe_reduce(c[(size_t)i]);
    max_lambda_deg = std::max(max_lambda_deg, poly_deg_in(c[(size_t)i].num(), lam));
  }
  // solve a, b from two independent rows, then verify the remaining ones
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j) {
      DiffExpr det = x1[(size_t)i] * x2[(size_t)j] - x1[(size_t)j] * x2[(size_t)i];
      if (ghe_reduce(det).is_zero()) continue;
      DiffExpr a = (c[(size_t)i] * x2[(size_t)j] - c[(size_t)j] * x2[(size_t)i]) / det;
      DiffExpr b = (x1[(size_t)i] * c[(size_t)j] - x1[(size_t)j] * c[(size_t)i]) / det;
      bool ok = true;
      for (int k = 0; k < 4 && ok; ++k) {
        DiffExpr res = a * x1[(size_t)k] + b * x2[(size_t)k] - c[(size_t)k];
        ok = ghe_reduce(res).is_zero();
      }
      if (ok) {
        v.pass = true;
        v.detail = "[X1,X2] = a X1 + b X2 on solutions (lambda degree <= " +
                   std::to_string(max_lambda_deg) + "); the joint kernel is preserved";
        return v;
      }
    }
  v.pass = false;
  v.detail = "commutator does not lie in the span of the pair modulo the equation";
  for (int i = 0; i < 4; ++i)
    if (!c[(size_t)i].is_zero())
      v.data.emplace_back("residual_D" + std::to_string(i + 1), pretty(c[(size_t)i]));
  return v;
}

Verdict lax_commutator_check(int n) {
  auto [X1, X2] = lax_pair(n);
  return lax_commutator_verdict(X1, X2, "lax" + std::to_string(n));
}

DiffExpr symmetry_operator_apply(const DiffExpr& phi) {
  auto d2 = [&](int i, int j) {
    return total_derivative(total_derivative(phi, ax_zi(i)), ax_zi(j));
  };
  return alpha_param() * (u_pair(3, 4) * d2(1, 2) + u_pair(1, 2) * d2(3, 4)) +
         beta_p() * (u_pair(2, 4) * d2(1, 3) + u_pair(1, 3) * d2(2, 4)) +
         gamma_p() * (u_pair(2, 3) * d2(1, 4) + u_pair(1, 4) * d2(2, 3));
}

LinOp symcon_operator_form() {
  LinOp D1 = LinOp::diff(ax_zi(1)), D2 = LinOp::diff(ax_zi(2)), D3 = LinOp::diff(ax_zi(3));
  return LinOp::mul(beta_p()) * (D3 * L_op(1, 4, 2) - D2 * L_op(1, 4, 3)) +
         LinOp::mul(gamma_p()) * (D3 * L_op(2, 4, 1) - D1 * L_op(2, 4, 3));
}

Flow two_component_flow() {
  DiffExpr q = (utx(0, 2, 0, 0) * utx(0, 0, 1, 1) - utx(0, 1, 1, 0) * utx(0, 1, 0, 1) +
                vtx(0, 0, 1, 0) * vtx(0, 0, 0, 1) +
                b_p() * (vtx(0, 0, 1, 0) * utx(0, 1, 0, 1) - vtx(0, 0, 0, 1) * utx(0, 1, 1, 0))) /
               utx(0, 0, 1, 1);
  return Flow{vtx(0, 0, 0, 0), q};
}

DiffExpr lagrangian_density() {
  DiffExpr v = vtx(0, 0, 0, 0), ut = utx(1, 0, 0, 0);
  return (v * ut - v * v / rat(2)) * utx(0, 0, 1, 1) -
         rat(1, 2) * utx(0, 0, 1, 0) * utx(0, 0, 0, 1) * utx(0, 2, 0, 0) +
         (b_p() / rat(3)) * ut *
             (utx(0, 0, 0, 1) * utx(0, 1, 1, 0) - utx(0, 0, 1, 0) * utx(0, 1, 0, 1));
}

namespace {

// replace every u-jet carrying one t-derivative by the matching v-jet
DiffExpr rename_ut_to_v(const DiffExpr& e) {
  DiffExpr r = e;
  for (Sym s : collect_syms(e)) {
    if (!sym_is_jet(s) || jet_dep(s) != Dep::U) continue;
    MultiIndex J = jet_index(s);
    if (J.c[0] == 0) continue;
    if (J.c[0] > 1) throw std::runtime_error("rename_ut_to_v: second t-derivative of u");
    r = subst(r, s, jet(Dep::V, Chart::TX, mi(0, J.c[1], J.c[2], J.c[3])));
  }
  return r;
}

bool params_only(const DiffExpr& e) {
  for (Sym s : collect_syms(e))
    if (sym_kind(s) != symkind::ParamK) return false;
  return true;
}

}  // namespace

Verdict lagrangian_verdict(const DiffExpr& density) {
  Verdict v;
  v.name = "lagrangian";
  DiffExpr dv = euler_full(density, Dep::V, Chart::TX);
  DiffExpr forced = (utx(1, 0, 0, 0) - vtx(0, 0, 0, 0)) * utx(0, 0, 1, 1);
  if (!(dv == forced)) {
    v.pass = false;
    v.detail = "delta_v of the density is not (u_t - v) u_yz: " + pretty(dv);
    return v;
  }
  DiffExpr du = rename_ut_to_v(euler_full(density, Dep::U, Chart::TX));
  Flow fl = two_component_flow();
  DiffExpr cand = utx(0, 0, 1, 1) * (vtx(1, 0, 0, 0) - fl.psi);
  DiffExpr ratio = du / cand;
  if (ratio.is_zero() || !params_only(ratio)) {
    v.pass = false;
    v.detail = "delta_u equation is not a multiple of u_yz (v_t - q); residual " + pretty(du);
    return v;
  }
  v.pass = true;
  v.detail = "delta_v L = (u_t - v) u_yz and delta_u L = " + pretty(ratio) + " * u_yz (v_t - q)";
  return v;
}

Verdict lagrangian_check() { return lagrangian_verdict(lagrangian_density()); }

namespace {

struct Generator {
  DiffExpr xit, xix, xiy, xiz, etau, etav;
};

std::map<std::string, Generator> generator_table() {
  DiffExpr zero(0), one(1);
  DiffExpr t = coord(ax_t()), x = coord(ax_x());
  DiffExpr u = utx(0, 0, 0, 0), v = vtx(0, 0, 0, 0);
  std::map<std::string, Generator> g;
  g["X1"] = {t, x, zero, zero, u, zero};
  g["X2"] = {one, -b_p(), zero, zero, zero, zero};
  g["X3"] = {one, zero, zero, zero, zero, zero};
  g["X4"] = {zero, zero, zero, zero, u, v};
  g["X5"] = {zero, zero, zero, zero, absfunc(FuncTag::F), zero};
  g["X6"] = {zero, zero, zero, zero, absfunc(FuncTag::G), zero};
  g["X7"] = {zero, zero, absfunc(FuncTag::H), zero, zero, zero};
  g["X8"] = {zero, zero, zero, absfunc(FuncTag::K), zero, zero};
  g["Xcd"] = {zero, zero, zero, zero, absfunc(FuncTag::C) + absfunc(FuncTag::D),
              absfunc(FuncTag::C, 1) + absfunc(FuncTag::D, 1)};
  return g;
}

}  // namespace

std::vector<std::string> symmetry_names() {
  return {"X1", "X2", "X3", "X4", "X5", "X6", "X7", "X8", "Xcd"};
}

SymmetryCharacteristic point_symmetry(const std::string& name) {
  auto table = generator_table();
  auto it = table.find(name);
  if (it == table.end()) throw std::runtime_error("unknown symmetry: " + name);
  const Generator& g = it->second;
  Flow fl = two_component_flow();
  SymmetryCharacteristic sc;
  sc.name = name;
  sc.q.phi = g.etau - vtx(0, 0, 0, 0) * g.xit - utx(0, 1, 0, 0) * g.xix -
             utx(0, 0, 1, 0) * g.xiy - utx(0, 0, 0, 1) * g.xiz;
  sc.q.psi = g.etav - fl.psi * g.xit - vtx(0, 1, 0, 0) * g.xix - vtx(0, 0, 1, 0) * g.xiy -
             vtx(0, 0, 0, 1) * g.xiz;
  return sc;
}

Verdict is_symmetry(const Flow& q, const std::string& label) {
  Verdict v;
  v.name = "symmetry:" + label;
  Flow fl = two_component_flow();
  DiffExpr r1 = substitute_flow(total_derivative(q.phi, ax_t()), fl) - q.psi;
  if (!r1.is_zero()) {
    v.pass = false;
    v.detail = "D_t phi != psi along the flow: " + pretty(r1);
    return v;
  }
  DiffExpr r2 =
      substitute_flow(total_derivative(q.psi, ax_t()), fl) - prolong_evolutionary(q, fl.psi);
  if (!r2.is_zero()) {
    v.pass = false;
    v.detail = "D_t psi != pr_Q(q) along the flow: " + pretty(r2);
    return v;
  }
  v.pass = true;
  v.detail = "linearized equations hold identically";
  return v;
}

void register_model_checks() {
  for (int n = 1; n <= 3; ++n)
    register_check("lax" + std::to_string(n), [n] { return lax_commutator_check(n); });
  register_check("lagrangian", [] { return lagrangian_check(); });
  register_check("symcond:decomposition", [] {
    Verdict v;
    v.name = "symcond:decomposition";
    DiffExpr phi = jet(Dep::Rho, Chart::Z, mi(0, 0, 0, 0));
    v.pass = op_apply(symcon_operator_form(), phi) == symmetry_operator_apply(phi);
    v.detail = v.pass ? "divergence form equals the direct linearization"
                      : "decomposition mismatch";
    return v;
  });
  for (auto& name : symmetry_names())
    register_check("symmetry:" + name,
                   [name] { return is_symmetry(point_symmetry(name).q, name); });
}

}  // namespace ghe
