#include "ghe/recursion.hpp"

#include <stdexcept>

namespace ghe {

namespace {

DiffExpr U(int t, int x, int y, int z) { return jet_tx(Dep::U, t, x, y, z); }
DiffExpr V(int t, int x, int y, int z) { return jet_tx(Dep::V, t, x, y, z); }
DiffExpr bpar() { return param(Param::Bflow); }

DiffExpr uz(int a, int b, int c, int d) { return jet_z(Dep::U, a, b, c, d); }

// ---------------------------------------------------------------------------
// commutator audit

// coefficients of D_1..D_4 in a first-order z-chart expression applied to rho
std::array<DiffExpr, 4> d_coeffs(const DiffExpr& applied) {
  std::array<DiffExpr, 4> c;
  for (int i = 0; i < 4; ++i)
    c[(size_t)i] = partial(applied, sym_jet(Dep::Rho, Chart::Z, mi(0, 0, 0, 0).plus(i)));
  return c;
}

}  // namespace

Verdict commutator_expansion_check() {
  Verdict vd;
  vd.name = "recursion:commutators";
  vd.pass = true;

  DiffExpr rho = jet(Dep::Rho, Chart::Z, mi(0, 0, 0, 0));
  DiffExpr u34 = uz(0, 0, 1, 1);

  auto audit = [&](const LinOp& A, const LinOp& B, const LinOp& E1, const LinOp& E2,
                   const DiffExpr& C1p, const DiffExpr& C2p, bool neg2, const std::string& tag) {
    DiffExpr comm = op_apply(A, op_apply(B, rho)) - op_apply(B, op_apply(A, rho));
    DiffExpr e1 = op_apply(E1, rho), e2 = op_apply(E2, rho);
    DiffExpr printed = (C1p * e1 + (neg2 ? -C2p : C2p) * e2) / u34;
    bool match = ghe_reduce(comm - printed).is_zero();
    vd.data.emplace_back(tag, match ? "printed expansion confirmed" : "printed expansion corrected");
    if (!match) {
      // the commutator is first order; its D-coefficients determine the
      // expansion coefficients directly
      auto c = d_coeffs(comm);
      DiffExpr C1 = c[0], C2 = c[1];
      DiffExpr span = ghe_reduce(comm - (C1 * e1 + C2 * e2) / u34);
      if (!span.is_zero()) {
        vd.pass = false;
        vd.detail += tag + ": commutator not in the operator span; ";
        return;
      }
      vd.data.emplace_back(tag + ":coeff1", pretty(C1));
      vd.data.emplace_back(tag + ":coeff2", pretty(C2));
    }
  };

  // [L24(3), L14(3)] against (1/u34){(u34 u234 + u23 u344) L14(3)
  //                                 + (u34 u134 - u13 u344) L24(3)}
  audit(L_op(2, 4, 3), L_op(1, 4, 3), L_op(1, 4, 3), L_op(2, 4, 3),
        u34 * uz(0, 1, 1, 1) + uz(0, 1, 1, 0) * uz(0, 0, 1, 2),
        u34 * uz(1, 0, 1, 1) - uz(1, 0, 1, 0) * uz(0, 0, 1, 2), false, "comm1");

  // [L23(4), L13(4)] against (1/u34){(u34 u234 - u24 u344) L13(4)
  //                                 - (u34 u134 - u14 u334) L23(4)}
  audit(L_op(2, 3, 4), L_op(1, 3, 4), L_op(1, 3, 4), L_op(2, 3, 4),
        u34 * uz(0, 1, 1, 1) - uz(0, 1, 0, 1) * uz(0, 0, 1, 2),
        u34 * uz(1, 0, 1, 1) - uz(1, 0, 0, 1) * uz(0, 0, 2, 1), true, "comm2");

  if (vd.pass && vd.detail.empty())
    vd.detail = "both commutators expand inside the operator span";
  return vd;
}

// ---------------------------------------------------------------------------
// integrability of the recursion relations

namespace {

std::pair<DiffExpr, DiffExpr> recursion_relations(int n, const DiffExpr& bet,
                                                  const DiffExpr& gam) {
  DiffExpr phi = jet(Dep::Rho, Chart::Z, mi(0, 0, 0, 0));
  DiffExpr psi = jet(Dep::Rho2, Chart::Z, mi(0, 0, 0, 0));
  auto L = [&](int i, int j, int k, const DiffExpr& f) { return op_apply(L_op(i, j, k), f); };
  switch (n) {
    case 1:
      return {L(1, 4, 3, phi) - gam * L(1, 3, 4, psi), L(2, 4, 3, phi) + bet * L(2, 3, 4, psi)};
    case 2:
      return {L(2, 3, 1, phi) - gam * L(1, 3, 2, psi), L(2, 4, 1, phi) + bet * L(1, 4, 2, psi)};
    case 3:
      return {L(4, 1, 2, phi) - gam * L(4, 2, 1, psi), L(3, 1, 2, phi) + bet * L(3, 2, 1, psi)};
  }
  throw std::invalid_argument("recursion_relations: n must be 1, 2 or 3");
}

bool contains_dep_jet(const DiffExpr& e, Dep d) {
  for (Sym s : collect_syms(e))
    if (sym_is_jet(s) && jet_dep(s) == d) return true;
  return false;
}

// Gaussian elimination of d-jets over the differential fraction field;
// coefficients are reduced modulo the equation ideal at every step.
// Returns the equations that were never used as pivots and ended up d-free.
std::vector<DiffExpr> eliminate_dep(std::vector<DiffExpr> eqs, Dep d) {
  std::set<Sym> jets;
  for (auto& e : eqs)
    for (Sym s : collect_syms(e))
      if (sym_is_jet(s) && jet_dep(s) == d) jets.insert(s);

  std::vector<Sym> order(jets.begin(), jets.end());
  auto jord = [](Sym s) {
    MultiIndex J = jet_index(s);
    return J.c[0] + J.c[1] + J.c[2] + J.c[3];
  };
  std::sort(order.begin(), order.end(), [&](Sym a, Sym b) {
    if (jord(a) != jord(b)) return jord(a) > jord(b);
    return a > b;
  });

  std::vector<char> used(eqs.size(), 0);
  for (Sym s : order) {
    int piv = -1;
    DiffExpr pc;
    for (size_t i = 0; i < eqs.size(); ++i) {
      if (used[i]) continue;
      DiffExpr c = partial(eqs[i], s);
      if (!c.is_zero()) {
        piv = (int)i;
        pc = c;
        break;
      }
    }
    if (piv < 0) continue;
    used[(size_t)piv] = 1;
    for (size_t i = 0; i < eqs.size(); ++i) {
      if (used[i]) continue;
      DiffExpr c = partial(eqs[i], s);
      if (!c.is_zero()) eqs[i] = ghe_reduce(eqs[i] - (c / pc) * eqs[(size_t)piv]);
    }
  }

  std::vector<DiffExpr> out;
  for (size_t i = 0; i < eqs.size(); ++i)
    if (!used[i] && !contains_dep_jet(eqs[i], d)) out.push_back(eqs[i]);
  return out;
}

}  // namespace

Verdict integrability_elimination_check(int n, bool negate_gamma) {
  Verdict vd;
  vd.name = "recursion:integrability:" + std::to_string(n);

  DiffExpr bet = param(Param::Beta);
  DiffExpr gam = param(Param::Gamma);
  if (negate_gamma) gam = -gam;
  auto [r1, r2] = recursion_relations(n, bet, gam);

  std::vector<DiffExpr> eqs = {ghe_reduce(r1), ghe_reduce(r2)};
  for (int i = 1; i <= 4; ++i) {
    eqs.push_back(ghe_reduce(total_derivative(r1, ax_zi(i))));
    eqs.push_back(ghe_reduce(total_derivative(r2, ax_zi(i))));
  }

  auto direction = [&](Dep elim, Dep keep, const std::string& what) {
    auto residuals = eliminate_dep(eqs, elim);
    DiffExpr target =
        ghe_reduce(symmetry_operator_apply(jet(keep, Chart::Z, mi(0, 0, 0, 0))));
    bool found = false;
    for (auto& r : residuals) {
      if (r.is_zero()) continue;
      // proportionality against the linearized operator applied to the
      // surviving characteristic
      DiffExpr lambda;
      for (Sym s : collect_syms(target)) {
        if (!(sym_is_jet(s) && jet_dep(s) == keep)) continue;
        DiffExpr ct = partial(target, s);
        if (ct.is_zero()) continue;
        lambda = partial(r, s) / ct;
        break;
      }
      if (lambda.is_zero() || !ghe_reduce(r - lambda * target).is_zero()) {
        vd.detail += what + ": residual is not a multiple of the symmetry condition; ";
        return false;
      }
      found = true;
    }
    if (!found) vd.detail += what + ": elimination produced no residual; ";
    return found;
  };

  bool a = direction(Dep::Rho, Dep::Rho2, "phi-elimination");
  bool b = direction(Dep::Rho2, Dep::Rho, "psi-elimination");
  vd.pass = a && b;
  if (vd.pass)
    vd.detail = "both integrability residuals are multiples of the symmetry condition";
  return vd;
}

// ---------------------------------------------------------------------------
// the two-component recursion operator

LinOp zeta_op() {
  return LinOp::mul(U(0, 0, 1, 1)) * LinOp::diff(ax_x()) -
         LinOp::mul(U(0, 1, 1, 0)) * LinOp::diff(ax_z());
}

namespace {

LinOp vy_dz() { return LinOp::mul(V(0, 0, 1, 0)) * LinOp::diff(ax_z()); }
LinOp vz_dy() { return LinOp::mul(V(0, 0, 0, 1)) * LinOp::diff(ax_y()); }

}  // namespace

LinOp2 r_matrix() {
  DiffExpr iu = U(0, 0, 1, 1).inverse();
  LinOp iw = LinOp::invw();
  LinOp2 R;
  R.m[0][0] = iw * (LinOp::mul(bpar()) * zeta_op() + vy_dz());
  R.m[0][1] = -(iw * LinOp::mul(U(0, 0, 1, 1)));
  R.m[1][0] = LinOp::mul(iu) * (vz_dy() * iw * vy_dz() - zeta_op()) +
              LinOp::mul(bpar() * iu) * (vz_dy() * iw * zeta_op() - vy_dz());
  R.m[1][1] = LinOp::mul(bpar()) -
              LinOp::mul(V(0, 0, 0, 1) * iu) * LinOp::diff(ax_y()) * iw * LinOp::mul(U(0, 0, 1, 1));
  return R;
}

LinOp2 r_matrix_product() {
  // alpha = 1, beta = (b-1)/2, gamma = -(b+1)/2
  DiffExpr bet = (bpar() - rat(1)) / rat(2);
  DiffExpr gam = -(bpar() + rat(1)) / rat(2);
  DiffExpr iu = U(0, 0, 1, 1).inverse();

  LinOp2 M1;
  M1.m[0][0] = LinOp::mul(bet);
  M1.m[0][1] = LinOp::mul(-gam);
  M1.m[1][0] = LinOp::mul(bet * iu) * (LinOp::w() + vz_dy());
  M1.m[1][1] = LinOp::mul(gam * iu) * (LinOp::w() - vz_dy());

  LinOp2 IW;
  IW.m[0][0] = LinOp::invw();
  IW.m[1][1] = LinOp::invw();

  LinOp2 M2;
  M2.m[0][0] = zeta_op() - vy_dz();
  M2.m[0][1] = LinOp::mul(U(0, 0, 1, 1));
  M2.m[1][0] = zeta_op() + vy_dz();
  M2.m[1][1] = LinOp::mul(-U(0, 0, 1, 1));

  return M1 * IW * M2;
}

LinOp2 r_adjoint() {
  DiffExpr iu = U(0, 0, 1, 1).inverse();
  LinOp iw = LinOp::invw();
  LinOp dz_vy = LinOp::diff(ax_z()) * LinOp::mul(V(0, 0, 1, 0));
  LinOp dy_vz = LinOp::diff(ax_y()) * LinOp::mul(V(0, 0, 0, 1));
  LinOp2 Rd;
  Rd.m[0][0] = (LinOp::mul(bpar()) * zeta_op() + dz_vy) * iw;
  Rd.m[1][0] = LinOp::mul(U(0, 0, 1, 1)) * iw;
  Rd.m[0][1] = -((dz_vy * iw * dy_vz - zeta_op() +
                  LinOp::mul(bpar()) * (zeta_op() * iw * dy_vz - dz_vy)) *
                 LinOp::mul(iu));
  Rd.m[1][1] = LinOp::mul(bpar()) -
               LinOp::mul(U(0, 0, 1, 1)) * iw * LinOp::diff(ax_y()) * LinOp::mul(V(0, 0, 0, 1) * iu);
  return Rd;
}

namespace {

std::pair<LinOp2, LinOp2> recursion_relation_matrices() {
  DiffExpr bet = (bpar() - rat(1)) / rat(2);
  DiffExpr gam = -(bpar() + rat(1)) / rat(2);
  DiffExpr uyz = U(0, 0, 1, 1);
  LinOp dx = LinOp::diff(ax_x()), dy = LinOp::diff(ax_y()), dz = LinOp::diff(ax_z());

  LinOp2 A;  // left-hand side, acting on (phi, psi)
  A.m[0][0] = LinOp::mul(uyz) * dx - LinOp::mul(V(0, 0, 1, 0) + U(0, 1, 1, 0)) * dz;
  A.m[0][1] = LinOp::mul(uyz);
  A.m[1][0] = LinOp::mul(V(0, 0, 1, 0) - U(0, 1, 1, 0)) * dz + LinOp::mul(uyz) * dx;
  A.m[1][1] = LinOp::mul(-uyz);

  LinOp2 B;  // right-hand side, acting on the transformed pair
  B.m[0][0] = LinOp::mul(gam) * (LinOp::mul(uyz) * dx - LinOp::mul(V(0, 0, 0, 1) + U(0, 1, 0, 1)) * dy);
  B.m[0][1] = LinOp::mul(gam * uyz);
  B.m[1][0] = LinOp::mul(bet) * (LinOp::mul(-uyz) * dx + LinOp::mul(U(0, 1, 0, 1) - V(0, 0, 0, 1)) * dy);
  B.m[1][1] = LinOp::mul(bet * uyz);
  return {A, B};
}

}  // namespace

Verdict recursion_inversion_check() {
  Verdict vd;
  vd.name = "recursion:inversion";
  vd.pass = true;
  auto step = [&](const std::string& what, bool ok) {
    vd.data.emplace_back(what, ok ? "ok" : "FAILED");
    if (!ok) {
      vd.pass = false;
      vd.detail += what + " failed; ";
    }
  };

  LinOp2 R = r_matrix();
  step("entry form equals product form", mat_equal_semantic(R, r_matrix_product()));

  // R absorbs the constant 2 beta gamma / alpha = (1-b^2)/2, so the defining
  // relation picks up the same factor on its left-hand side
  auto [A, B] = recursion_relation_matrices();
  DiffExpr fac = (rat(1) - bpar() * bpar()) / rat(2);
  step("matrix recursion relation", mat_equal_semantic(mat_scale(LinOp::mul(fac), A), B * R));

  LinOp2 Rd = r_adjoint();
  step("adjoint entries", mat_equal_semantic(Rd, mat_adjoint(R)));

  step("R = J1 J0^{-1}", mat_equal_semantic(R, j1() * constraint_matrix()));
  step("R^+ = J0^{-1} J1", mat_equal_semantic(Rd, constraint_matrix() * j1()));

  if (vd.pass) vd.detail = "inversion, adjoint and pencil factorizations agree";
  return vd;
}

// ---------------------------------------------------------------------------
// second Hamiltonian operator

LinOp2 j1() {
  DiffExpr uyz = U(0, 0, 1, 1);
  DiffExpr iu = uyz.inverse();
  DiffExpr vz = V(0, 0, 0, 1);
  LinOp iw = LinOp::invw();
  LinOp dy = LinOp::diff(ax_y());

  LinOp2 J;
  J.m[0][0] = iw;
  J.m[0][1] = LinOp::mul(bpar() * iu) - iw * dy * LinOp::mul(vz * iu);
  J.m[1][0] = -LinOp::mul(bpar() * iu) + LinOp::mul(vz * iu) * dy * iw;
  J.m[1][1] = -(LinOp::mul(iu) * zeta_op() * LinOp::mul(iu)) +
              LinOp::mul(bpar() * bpar() * iu) * (zeta_op() - LinOp::w()) * LinOp::mul(iu) +
              LinOp::mul(bpar() * iu) * (dy * LinOp::mul(vz) + LinOp::mul(vz) * dy) * LinOp::mul(iu) -
              LinOp::mul(vz * iu) * dy * iw * dy * LinOp::mul(vz * iu);
  return J;
}

Verdict j1_entries_check() {
  Verdict vd;
  vd.name = "j1:entries";
  vd.pass = mat_equal_semantic(r_matrix() * j0(), j1());
  vd.detail = vd.pass ? "R J0 matches the closed-form entries"
                      : "R J0 disagrees with the closed-form entries";
  return vd;
}

Verdict j1_skew_check() {
  Verdict vd;
  vd.name = "j1:skew";
  LinOp2 zero;
  vd.pass = mat_equal_semantic(j1() + mat_adjoint(j1()), zero);
  vd.detail = vd.pass ? "J1 + J1^+ = 0" : "J1 is not skew-adjoint";
  return vd;
}

DiffExpr h0_density() {
  DiffExpr b = bpar();
  return (rat(2) * U(0, 1, 0, 0) * V(0, 0, 0, 0) +
          b * (V(0, 0, 0, 0).pow(2) + U(0, 1, 0, 0).pow(2))) *
         U(0, 0, 1, 1) / (rat(2) * (b * b - rat(1)));
}

Verdict bihamiltonian_check() {
  Verdict vd;
  vd.name = "bihamiltonian";
  auto g = gradient(h0_density());
  // clear the constant 2(b^2-1) denominator before feeding w^{-1}: the
  // preimage search works monomial by monomial
  DiffExpr s = rat(2) * (bpar() * bpar() - rat(1));
  auto res = mat_apply(j1(), {s * g[0], s * g[1]});
  Flow fl = two_component_flow();
  bool c0 = is_zero_mod_w(res[0] - s * fl.phi);
  bool c1 = is_zero_mod_w(res[1] - s * fl.psi);
  vd.pass = c0 && c1;
  vd.detail = vd.pass ? "J1 grad H0 = (v, q); all nonlocal terms cancel"
                      : std::string("J1 grad H0 mismatch in component ") + (c0 ? "2" : "1");
  return vd;
}

// ---------------------------------------------------------------------------
// adjoint steps and higher flows

namespace {

bool has_atoms(const DiffExpr& e) {
  for (Sym s : collect_syms(e))
    if (sym_is_atom(s)) return true;
  return false;
}

bool den_param_only(const DiffExpr& e) {
  for (auto& [m, c] : e.den().t)
    for (auto& [s, ex] : m.f)
      if (sym_kind(s) != symkind::ParamK) return false;
  return true;
}

// straight-line homotopy for a joint gradient pair: scale both dependents
// to zero and integrate along the ray
DiffExpr joint_homotopy(const std::array<DiffExpr, 2>& g) {
  DiffExpr bare[2] = {U(0, 0, 0, 0), V(0, 0, 0, 0)};
  DiffExpr h(0);
  for (int comp = 0; comp < 2; ++comp) {
    const DiffExpr& e = g[(size_t)comp];
    DiffExpr invden = DiffExpr(1) / DiffExpr(Poly(e.den()));
    for (auto& [m, c] : e.num().t) {
      int deg = 0;
      for (auto& [s, ex] : m.f)
        if (sym_is_jet(s) && (jet_dep(s) == Dep::U || jet_dep(s) == Dep::V)) deg += (int)ex;
      Poly mono;
      mono.t.emplace_back(m, c);
      h += DiffExpr(mono) * invden * bare[comp] / rat(deg + 1);
    }
  }
  return h;
}

}  // namespace

AdjointStep adjoint_step(const DiffExpr& density) {
  AdjointStep st;
  auto g = mat_apply(r_adjoint(), gradient(density));
  st.grad = {reduce_mod_atoms(g[0]), reduce_mod_atoms(g[1])};

  if (has_atoms(st.grad[0]) || has_atoms(st.grad[1])) {
    st.obstruction = st.grad[0];
    return st;
  }
  if (!den_param_only(st.grad[0]) || !den_param_only(st.grad[1])) {
    st.obstruction = st.grad[0];
    return st;
  }
  DiffExpr h = joint_homotopy(st.grad);
  if (euler_spatial(h, Dep::U) == st.grad[0] && euler_spatial(h, Dep::V) == st.grad[1]) {
    st.gradient = true;
    st.density = h;
  } else {
    st.obstruction = euler_spatial(h, Dep::U) - st.grad[0];
  }
  return st;
}

DiffExpr h2_density() {
  DiffExpr b = bpar();
  return (b / rat(2)) * (V(0, 0, 0, 0).pow(2) + U(0, 1, 0, 0).pow(2)) * U(0, 0, 1, 1) -
         V(0, 0, 0, 0) * U(0, 1, 0, 0) * U(0, 0, 1, 1);
}

Verdict h2_check() {
  Verdict vd;
  vd.name = "h2";
  auto st = adjoint_step(h1_density());
  if (!st.gradient) {
    vd.pass = false;
    vd.detail = "adjoint step on H1 did not produce a gradient pair";
    return vd;
  }
  bool match = is_total_divergence_xyz(st.density - h2_density());
  bool conserved = conservation_gh_flow(h2_density(), "H2").pass;
  vd.pass = match && conserved;
  vd.detail = vd.pass ? "H2 = (b/2)(v^2+u_x^2) u_yz - v u_x u_yz, conserved along the flow"
                      : (match ? "H2 density is not conserved" : "reconstructed density mismatch");
  return vd;
}

std::array<DiffExpr, 2> higher_flow(const DiffExpr& density, const LinOp2& op) {
  return mat_apply(op, gradient(density));
}

Verdict j0h2_flow_check() {
  Verdict vd;
  vd.name = "flow:J0H2";
  auto f = higher_flow(h2_density(), j0());
  DiffExpr b = bpar();
  Flow fl = two_component_flow();
  vd.pass = f[0] == b * V(0, 0, 0, 0) - U(0, 1, 0, 0) && f[1] == b * fl.psi - V(0, 1, 0, 0);
  vd.detail = vd.pass ? "J0 grad H2 = (b v - u_x, b q - v_x)" : "J0 grad H2 mismatch";
  return vd;
}

Verdict j1h2_flow_check() {
  // with a linear w^{-1} the two nonlocal contributions carry opposite copies
  // of the payload D_y(v v_z) and cancel, so the flow is local:
  // (1+b^2)(v, q) - 2b (u_x, v_x)
  Verdict vd;
  vd.name = "flow:J1H2";
  auto f = higher_flow(h2_density(), j1());
  DiffExpr b = bpar();
  Flow fl = two_component_flow();
  DiffExpr e0 = (rat(1) + b * b) * V(0, 0, 0, 0) - rat(2) * b * U(0, 1, 0, 0);
  DiffExpr e1 = (rat(1) + b * b) * fl.psi - rat(2) * b * V(0, 1, 0, 0);
  bool c0 = is_zero_mod_w(f[0] - e0);
  bool c1 = is_zero_mod_w(f[1] - e1);
  vd.pass = c0 && c1;
  vd.data.emplace_back("nonlocal term",
                       "the w^{-1} payloads cancel; no residual w^{-1}(v v_yz + v_y v_z) survives");
  vd.detail = vd.pass ? "J1 grad H2 = (1+b^2)(v, q) - 2b (u_x, v_x)"
                      : std::string("mismatch in component ") + (c0 ? "2" : "1");
  return vd;
}

void register_recursion_checks() {
  register_check("recursion:inversion", [] { return recursion_inversion_check(); });
  for (int n = 1; n <= 3; ++n)
    register_check("recursion:integrability:" + std::to_string(n),
                   [n] { return integrability_elimination_check(n); });
  register_check("j1:entries", [] { return j1_entries_check(); });
  register_check("j1:skew", [] { return j1_skew_check(); });
  register_check("bihamiltonian", [] { return bihamiltonian_check(); });
  register_check("h2", [] { return h2_check(); });
  register_check("flow:J1H2", [] { return j1h2_flow_check(); });
}

}  // namespace ghe
