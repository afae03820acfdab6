#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ghe/recursion.hpp"

using namespace ghe;

namespace {

DiffExpr u(int nt, int nx, int ny, int nz) { return jet_tx(Dep::U, nt, nx, ny, nz); }
DiffExpr v(int nt, int nx, int ny, int nz) { return jet_tx(Dep::V, nt, nx, ny, nz); }
DiffExpr b() { return param(Param::Bflow); }

std::array<DiffExpr, 4> op_coeffs_z(const LinOp& O) {
  DiffExpr applied = op_apply(O, jet(Dep::Rho, Chart::Z, mi(0, 0, 0, 0)));
  std::array<DiffExpr, 4> c;
  for (int i = 0; i < 4; ++i)
    c[(size_t)i] = partial(applied, sym_jet(Dep::Rho, Chart::Z, mi(0, 0, 0, 0).plus(i)));
  return c;
}

}  // namespace

TEST_CASE("commutator audit: direct expansion is authoritative") {
  Verdict vd = commutator_expansion_check();
  INFO(vd.detail);
  CHECK(vd.pass);
  // the printed expansions do not survive direct recomputation; the audit
  // records the corrected coefficients instead
  bool corrected = false;
  for (auto& [k, val] : vd.data)
    if (val.find("corrected") != std::string::npos) corrected = true;
  CHECK(corrected);
}

TEST_CASE("commutator coefficients via two independent expansion routes") {
  LinOp A = L_op(2, 4, 3), B = L_op(1, 4, 3);
  DiffExpr rho = jet(Dep::Rho, Chart::Z, mi(0, 0, 0, 0));

  DiffExpr direct = op_apply(A, op_apply(B, rho)) - op_apply(B, op_apply(A, rho));

  // naive product route: c_k = sum_m (a_m D_m b_k - b_m D_m a_k)
  auto a = op_coeffs_z(A), bc = op_coeffs_z(B);
  DiffExpr rebuilt(0);
  for (int k = 0; k < 4; ++k) {
    DiffExpr ck(0);
    for (int m = 0; m < 4; ++m)
      ck += a[(size_t)m] * total_derivative(bc[(size_t)k], ax_zi(m + 1)) -
            bc[(size_t)m] * total_derivative(a[(size_t)k], ax_zi(m + 1));
    rebuilt += ck * DiffExpr::var(sym_jet(Dep::Rho, Chart::Z, mi(0, 0, 0, 0).plus(k)));
  }
  CHECK(direct == rebuilt);

  // [A, A] = 0
  CHECK((op_apply(A, op_apply(A, rho)) - op_apply(A, op_apply(A, rho))).is_zero());
}

TEST_CASE("integrability of all three recursion relation families") {
  for (int n = 1; n <= 3; ++n) {
    Verdict vd = integrability_elimination_check(n);
    INFO(vd.name, ": ", vd.detail);
    CHECK(vd.pass);
  }
}

TEST_CASE("negating gamma destroys integrability") {
  Verdict vd = integrability_elimination_check(1, true);
  INFO(vd.detail);
  CHECK(!vd.pass);
}

TEST_CASE("recursion operator entries act as displayed") {
  reset_atoms();
  LinOp2 R = r_matrix();

  // R12 = -w^{-1} u_yz: feeding w(u_x)/u_yz must return -u_x exactly
  DiffExpr probe = w_apply(u(0, 1, 0, 0)) / u(0, 0, 1, 1);
  CHECK(op_apply(R.m[0][1], probe) == -u(0, 1, 0, 0));

  // R22 applied to a w-image: b f - (v_z/u_yz) D_y w^{-1}(u_yz f)
  DiffExpr f = w_apply(u(0, 0, 0, 1));
  DiffExpr expect = b() * f -
                    (v(0, 0, 0, 1) / u(0, 0, 1, 1)) *
                        total_derivative(apply_invw(u(0, 0, 1, 1) * f), ax_y());
  CHECK(is_zero_mod_w(op_apply(R.m[1][1], f) - expect));
}

TEST_CASE("inversion: product form, matrix relation, adjoint, pencil factorization") {
  reset_atoms();
  Verdict vd = recursion_inversion_check();
  for (auto& [k, val] : vd.data) {
    INFO(k, " -> ", val);
    CHECK(val == "ok");
  }
  CHECK(vd.pass);
}

TEST_CASE("recursion relations close on a transformed point symmetry") {
  reset_atoms();
  // with (phi~, psi~) = R(phi, psi), the defining matrix relation is exact
  Flow x2 = point_symmetry("X2").q;
  auto rx = mat_apply(r_matrix(), {x2.phi, x2.psi});

  DiffExpr uyz = u(0, 0, 1, 1);
  auto dx = [](const DiffExpr& e) { return total_derivative(e, ax_x()); };
  auto dy = [](const DiffExpr& e) { return total_derivative(e, ax_y()); };
  auto dz = [](const DiffExpr& e) { return total_derivative(e, ax_z()); };
  DiffExpr bet = (b() - rat(1)) / rat(2), gam = -(b() + rat(1)) / rat(2);

  // the absorbed normalization 2*beta*gamma shows up on the left-hand side
  DiffExpr fac = rat(2) * bet * gam;

  DiffExpr lhs1 = uyz * dx(x2.phi) - (v(0, 0, 1, 0) + u(0, 1, 1, 0)) * dz(x2.phi) + uyz * x2.psi;
  DiffExpr rhs1 = gam * (uyz * dx(rx[0]) - (v(0, 0, 0, 1) + u(0, 1, 0, 1)) * dy(rx[0])) +
                  gam * uyz * rx[1];
  CHECK(is_zero_mod_w(fac * lhs1 - rhs1));

  DiffExpr lhs2 = (v(0, 0, 1, 0) - u(0, 1, 1, 0)) * dz(x2.phi) + uyz * dx(x2.phi) - uyz * x2.psi;
  DiffExpr rhs2 = bet * (-uyz * dx(rx[0]) + (u(0, 1, 0, 1) - v(0, 0, 0, 1)) * dy(rx[0])) +
                  bet * uyz * rx[1];
  CHECK(is_zero_mod_w(fac * lhs2 - rhs2));
}

TEST_CASE("J1 entries and skew-adjointness") {
  reset_atoms();
  CHECK(j1_entries_check().pass);
  CHECK(j1_skew_check().pass);

  // J1^{11} = w^{-1} undoes w on an exact image
  CHECK(op_apply(j1().m[0][0], w_apply(u(0, 1, 0, 0))) == u(0, 1, 0, 0));
}

TEST_CASE("bi-Hamiltonian form of the flow") {
  reset_atoms();
  Verdict vd = bihamiltonian_check();
  INFO(vd.detail);
  CHECK(vd.pass);

  // b = 0 specialization, as an independent oracle
  Sym bs = sym_param(Param::Bflow);
  auto g = gradient(h0_density());
  std::array<DiffExpr, 2> g0 = {subst(g[0], bs, DiffExpr(0)), subst(g[1], bs, DiffExpr(0))};
  auto res = mat_apply(mat_subst_param(j1(), bs, DiffExpr(0)), g0);
  Flow fl = two_component_flow();
  CHECK(is_zero_mod_w(res[0] - v(0, 0, 0, 0)));
  CHECK(is_zero_mod_w(res[1] - subst(fl.psi, bs, DiffExpr(0))));
}

TEST_CASE("adjoint step sends H1 to H2") {
  reset_atoms();
  Verdict vd = h2_check();
  INFO(vd.detail);
  CHECK(vd.pass);

  CHECK(euler_spatial(h2_density(), Dep::V) ==
        b() * v(0, 0, 0, 0) * u(0, 0, 1, 1) - u(0, 1, 0, 0) * u(0, 0, 1, 1));

  // the u_z variant of the middle term is inconsistent with the J0 flow
  DiffExpr wrong = (b() / rat(2)) * (v(0, 0, 0, 0).pow(2) + u(0, 1, 0, 0).pow(2)) * u(0, 0, 1, 1) -
                   v(0, 0, 0, 0) * u(0, 1, 0, 0) * u(0, 0, 0, 1);
  auto f = higher_flow(wrong, j0());
  CHECK(f[0] != b() * v(0, 0, 0, 0) - u(0, 1, 0, 0));

  // trivial input
  auto z = adjoint_step(DiffExpr(0));
  CHECK(z.gradient);
  CHECK(z.density.is_zero());
}

TEST_CASE("higher flows from H2") {
  reset_atoms();
  CHECK(j0h2_flow_check().pass);
  CHECK(j1h2_flow_check().pass);

  // J0 grad H2 is the combination -(1/b) X2 + (1-b^2)/b X3 of table symmetries
  auto f = higher_flow(h2_density(), j0());
  Flow x2 = point_symmetry("X2").q, x3 = point_symmetry("X3").q;
  DiffExpr c2 = -rat(1) / b(), c3 = (rat(1) - b() * b()) / b();
  CHECK(f[0] == c2 * x2.phi + c3 * x3.phi);
  CHECK(f[1] == c2 * x2.psi + c3 * x3.psi);
}

TEST_CASE("second adjoint step stays well-formed under the nesting cap") {
  reset_atoms();
  AdjointStep st;
  CHECK_NOTHROW(st = adjoint_step(h2_density()));
  std::array<DiffExpr, 2> next;
  CHECK_NOTHROW(next = mat_apply(j1(), st.grad, 3));
  CHECK(!(next[0].is_zero() && next[1].is_zero()));
}

TEST_CASE("recursion checks are registered") {
  register_all_checks();
  CHECK(have_check("recursion:inversion"));
  CHECK(have_check("recursion:integrability:2"));
  CHECK(have_check("bihamiltonian"));
  CHECK(run_check("j1:skew").pass);
}
