#include "ghe/olver.hpp"

#include <map>
#include <sstream>

namespace ghe {

namespace {

DiffExpr a() { return param(Param::Amix); }
DiffExpr b() { return param(Param::Bflow); }
DiffExpr uj(int nx, int ny, int nz) { return jet_tx(Dep::U, 0, nx, ny, nz); }
DiffExpr vj(int nx, int ny, int nz) { return jet_tx(Dep::V, 0, nx, ny, nz); }
DiffExpr uyz() { return uj(0, 1, 1); }

WedgeExpr eta1() { return wedge_term(DiffExpr(1), {uni(UniBase::Eta, 0, 0, 0)}); }
WedgeExpr theta1() { return wedge_term(DiffExpr(1), {uni(UniBase::Theta, 0, 0, 0)}); }

LinOp mul(const DiffExpr& c) { return LinOp::mul(c); }

}  // namespace

LinOp2 j_pencil() {
  LinOp invw = LinOp::invw(), w = LinOp::w(), zeta = zeta_op();
  LinOp dy = LinOp::diff(ax_y()), dz = LinOp::diff(ax_z());
  DiffExpr iu = DiffExpr(1) / uyz();
  DiffExpr c = vj(0, 0, 1) / uyz();

  LinOp2 J;
  J.m[0][0] = invw;
  J.m[0][1] = mul((a() + b()) * iu) - invw * dy * mul(c);
  J.m[1][0] = LinOp::zero() - mul((a() + b()) * iu) + mul(c) * dy * invw;
  J.m[1][1] = LinOp::zero() - mul(iu) * zeta * mul(iu) +
              mul(b() * (a() + b()) * iu) * (zeta - w) * mul(iu) +
              mul(iu) *
                  ((mul(a() + rat(2) * b()) * dy * mul(vj(0, 0, 1))) +
                   (mul(a()) * dz * mul(vj(0, 1, 0))) -
                   mul((a() + b()) * vj(0, 1, 1))) *
                  mul(iu) -
              mul(c) * dy * invw * dy * mul(c);
  return J;
}

LinOp2 j_pencil_mutated() {
  // the a D_z v_y summand of J^22 is dropped
  LinOp2 J = j_pencil();
  LinOp invw = LinOp::invw(), w = LinOp::w(), zeta = zeta_op();
  LinOp dy = LinOp::diff(ax_y()), dz = LinOp::diff(ax_z());
  DiffExpr iu = DiffExpr(1) / uyz();
  DiffExpr c = vj(0, 0, 1) / uyz();
  J.m[1][1] = LinOp::zero() - mul(iu) * zeta * mul(iu) +
              mul(b() * (a() + b()) * iu) * (zeta - w) * mul(iu) +
              mul(iu) *
                  ((mul(a() + rat(2) * b()) * dy * mul(vj(0, 0, 1))) -
                   mul((a() + b()) * vj(0, 1, 1))) *
                  mul(iu) -
              mul(c) * dy * invw * dy * mul(c);
  return J;
}

Verdict j_pencil_check() {
  Verdict v;
  v.name = "olver:pencil";
  LinOp2 J = j_pencil();
  Sym sa = sym_param(Param::Amix);
  LinOp2 ref = j1() + mat_scale(mul(a()), j0());
  bool agree = mat_equal_semantic(J, ref);
  LinOp2 Z;
  bool skew = mat_equal_semantic(mat_adjoint(J), Z - J);
  // the a-part in isolation
  LinOp2 Ja = mat_subst_param(J, sa, DiffExpr(1)) - mat_subst_param(J, sa, DiffExpr(0));
  bool apart = mat_equal_semantic(Ja, j0());
  v.pass = agree && skew && apart;
  v.data = {{"pencil = J1 + a J0", agree ? "ok" : "mismatch"},
            {"skew-adjoint", skew ? "ok" : "mismatch"},
            {"a-part equals J0", apart ? "ok" : "mismatch"}};
  v.detail = v.pass ? "arranged pencil entries verified" : "pencil entry mismatch";
  return v;
}

WedgeExpr characteristic_row(const LinOp2& J, int row) {
  return op_apply_wedge(J.m[row][0], eta1()) + op_apply_wedge(J.m[row][1], theta1());
}

WedgeExpr build_bivector(const LinOp2& J) {
  // Theta = 1/2 [ eta ^ (J omega)_1 + theta ^ (J omega)_2 ]; only the skew
  // part of J survives the wedge
  WedgeExpr s = wedge(eta1(), characteristic_row(J, 0)) +
                wedge(theta1(), characteristic_row(J, 1));
  return rat(1, 2) * s;
}

WedgeExpr theta_bivector_display() {
  DiffExpr iu = DiffExpr(1) / uyz();
  DiffExpr c = vj(0, 0, 1) / uyz();
  WedgeExpr A = op_apply_wedge(LinOp::invw(), eta1());
  WedgeExpr B =
      op_apply_wedge(LinOp::invw(), wedge_deriv(c * theta1(), ax_y()));
  WedgeExpr thu = iu * theta1();  // theta / u_yz
  WedgeExpr e = eta1(), th = theta1();

  WedgeExpr out = wedge(e, A);
  out = out + rat(2) * ((a() + b()) * iu) * wedge(e, th);
  out = out - wedge(e, B);
  out = out + c * wedge(th, wedge_deriv(A, ax_y()));
  out = out + wedge(th, (uj(1, 1, 0) * iu) * wedge_deriv(thu, ax_z()) -
                            wedge_deriv(thu, ax_x()));
  out = out + (b() * (a() + b())) *
                  wedge(th, (uj(1, 0, 1) * iu) * wedge_deriv(thu, ax_y()) -
                                (uj(1, 1, 0) * iu) * wedge_deriv(thu, ax_z()));
  out = out + ((a() + rat(2) * b()) * c) * wedge(th, wedge_deriv(thu, ax_y()));
  out = out + (a() * vj(0, 1, 0) * iu) * wedge(th, wedge_deriv(thu, ax_z()));
  out = out - c * wedge(th, wedge_deriv(B, ax_y()));
  return rat(1, 2) * out;
}

Verdict theta_display_check() {
  Verdict v;
  v.name = "olver:theta";
  WedgeExpr built = build_bivector(j_pencil());
  WedgeExpr disp = theta_bivector_display();
  bool exact = wedge_equal(built, disp);
  v.pass = exact;
  if (!exact) {
    // fall back to agreement modulo divergences before declaring failure
    WedgeExpr diff = reduce_mod_divergence(built - disp);
    v.pass = diff.is_zero();
    v.data.push_back({"agreement", v.pass ? "mod divergence only" : "fails"});
    if (!diff.is_zero()) v.data.push_back({"difference", wedge_text(diff)});
  } else {
    v.data.push_back({"agreement", "term by term"});
  }
  v.detail = v.pass ? "bi-vector matches the arranged nine-term integrand"
                    : "bi-vector disagrees with the arranged integrand";
  return v;
}

// ---- the prolonged vector field --------------------------------------------

namespace {

struct PrV {
  const LinOp2& J;
  WedgeExpr ch[2];
  std::map<std::string, WedgeExpr> memo;

  explicit PrV(const LinOp2& Jin) : J(Jin) {
    ch[0] = characteristic_row(J, 0);
    ch[1] = characteristic_row(J, 1);
  }

  WedgeExpr X(Dep d, MultiIndex k) {
    std::ostringstream os;
    os << (int)d << ':' << (int)k.c[1] << (int)k.c[2] << (int)k.c[3];
    auto it = memo.find(os.str());
    if (it != memo.end()) return it->second;
    WedgeExpr r = ch[d == Dep::U ? 0 : 1];
    for (int ax = 1; ax < 4; ++ax)
      for (int n = 0; n < k.c[ax]; ++n)
        r = wedge_deriv(r, Axis{Chart::TX, (std::uint8_t)ax});
    memo.emplace(os.str(), r);
    return r;
  }

  // coefficient-site contributions of a scalar, wedged in front of `rest`
  WedgeExpr scalar_site(const DiffExpr& c, const WedgeExpr& rest) {
    WedgeExpr out;
    for (Sym s : collect_syms(c)) {
      if (!sym_is_jet(s) || jet_chart(s) != Chart::TX) continue;
      Dep d = jet_dep(s);
      if (d != Dep::U && d != Dep::V) continue;
      MultiIndex k = jet_index(s);
      if (k.c[0] != 0) throw std::runtime_error("t-jet inside a multi-vector coefficient");
      DiffExpr dc = partial(c, s);
      if (dc.is_zero()) continue;
      out = out + dc * wedge(X(d, k), rest);
    }
    return out;
  }

  WedgeExpr apply(const WedgeExpr& e0) {
    WedgeExpr e = wedge_normalize(e0);
    WedgeExpr out;
    for (const auto& t : e.t) {
      WedgeExpr rest;
      rest.t.push_back(WedgeTerm{DiffExpr(1), t.f});
      out = out + scalar_site(t.c, rest);
      for (size_t i = 0; i < t.f.size(); ++i) {
        const UniFactor& fi = t.f[i];
        if (!fi.wrapped) continue;  // bare uni-vectors are annihilated
        if (t.f.size() != 2)
          throw std::runtime_error("wrapped factor site outside a bilinear term");
        const UniFactor& other = t.f[1 - i];
        if (other.wrapped)
          throw std::runtime_error("w^{-1} nesting depth exceeded in pr v");
        int sign = ((i % 2) ? -1 : 1) * ((fi.d.order() % 2) ? -1 : 1);
        // R = D^{Jo}(c * other), then w^{-1} moved onto it by parts
        WedgeExpr R = wedge_term(t.c, {other});
        for (int ax = 2; ax < 4; ++ax)
          for (int n = 0; n < fi.d.c[ax]; ++n)
            R = wedge_deriv(R, Axis{Chart::TX, (std::uint8_t)ax});
        WedgeExpr W1 = op_apply_wedge(LinOp::invw(), R);
        // pr v(w) applied to the underived wrap
        UniFactor G = fi;
        G.d = mi(0, 0, 0, 0);
        WedgeExpr Z = wedge(X(Dep::U, mi(0, 0, 1, 1)), factor_deriv(G, ax_x())) -
                      wedge(X(Dep::U, mi(0, 1, 0, 1)), factor_deriv(G, ax_y()));
        // pr v acting inside the payload
        WedgeExpr dp;
        for (auto& [K, cK] : fi.payload) {
          WedgeExpr inner = wedge_term(DiffExpr(1), {uni(fi.base, K.c[1], K.c[2], K.c[3])});
          dp = dp + scalar_site(cK, inner);
        }
        out = out + rat(sign) * (wedge(W1, Z) - wedge(W1, dp));
      }
    }
    return out;
  }
};

}  // namespace

WedgeExpr pr_v_J(const LinOp2& J, Sym jet_sym) {
  if (!sym_is_jet(jet_sym) || jet_chart(jet_sym) != Chart::TX)
    throw std::runtime_error("pr v needs a TX jet symbol");
  PrV pv(J);
  return pv.X(jet_dep(jet_sym), jet_index(jet_sym));
}

WedgeExpr pr_v_J(const LinOp2& J, const WedgeExpr& e) {
  PrV pv(J);
  return pv.apply(e);
}

WedgeExpr prv_theta_display() {
  LinOp2 J = j_pencil();
  PrV pv(J);
  DiffExpr iu = DiffExpr(1) / uyz();
  DiffExpr c = vj(0, 0, 1) / uyz();
  WedgeExpr A = op_apply_wedge(LinOp::invw(), eta1());
  WedgeExpr B = op_apply_wedge(LinOp::invw(), wedge_deriv(c * theta1(), ax_y()));
  WedgeExpr e = eta1(), th = theta1();
  WedgeExpr PVyz = pv.X(Dep::U, mi(0, 0, 1, 1));
  WedgeExpr PVxz = pv.X(Dep::U, mi(0, 1, 0, 1));
  WedgeExpr PVxy = pv.X(Dep::U, mi(0, 1, 1, 0));
  WedgeExpr PVvy = pv.X(Dep::V, mi(0, 0, 1, 0));
  WedgeExpr PVvz = pv.X(Dep::V, mi(0, 0, 0, 1));
  WedgeExpr prvc = iu * PVvz - (vj(0, 0, 1) * iu * iu) * PVyz;
  auto dx = [](const WedgeExpr& w) { return wedge_deriv(w, ax_x()); };
  auto dy = [](const WedgeExpr& w) { return wedge_deriv(w, ax_y()); };
  auto dz = [](const WedgeExpr& w) { return wedge_deriv(w, ax_z()); };

  WedgeExpr out = wedge(A, wedge(PVyz, dx(A))) - wedge(A, wedge(PVxz, dy(A)));
  out = out - rat(2) * ((a() + b()) * iu * iu) * wedge(e, wedge(PVyz, th));
  out = out - rat(2) * wedge(dy(A), wedge(prvc, th));
  out = out + (iu * iu) * wedge(th, wedge(PVyz, dx(th)) + wedge(PVxy, dz(th)));
  out = out - rat(2) * (uj(1, 1, 0) * iu * iu * iu) * wedge(th, wedge(PVyz, dz(th)));
  out = out + (b() * (a() + b()) * iu * iu) *
                  wedge(th, wedge(PVxz, dy(th)) - wedge(PVxy, dz(th)));
  out = out + rat(2) * (b() * (a() + b()) * iu * iu * iu) *
                  wedge(th, uj(1, 1, 0) * wedge(PVyz, dz(th)) -
                                uj(1, 0, 1) * wedge(PVyz, dy(th)));
  out = out + (a() + rat(2) * b()) *
                  wedge(th, wedge((iu * iu) * PVvz - rat(2) * (vj(0, 0, 1) * iu.pow(3)) * PVyz,
                                  dy(th)));
  out = out + a() * wedge(th, wedge((iu * iu) * PVvy -
                                        rat(2) * (vj(0, 1, 0) * iu.pow(3)) * PVyz,
                                    dz(th)));
  out = out + rat(2) * wedge(dy(B), wedge(prvc, th));
  out = out + wedge(B, wedge(PVyz, dx(B))) - wedge(B, wedge(PVxz, dy(B)));
  return out;
}

Verdict prv_theta_audit() {
  Verdict v;
  v.name = "olver:prv-audit";
  LinOp2 J = j_pencil();
  WedgeExpr E = pr_v_J(J, build_bivector(J));
  WedgeExpr disp = prv_theta_display();
  // The arranged display carries a -2 normalization relative to pr v(Theta).
  // Since pr v(Theta) itself reduces to zero, the probe is divergence-
  // equivalent to the display alone; the audit therefore tests whether the
  // hand-arranged representative reduces to zero.  The test is one-sided
  // where nonlocal wraps are involved: the local cells use a complete
  // decision procedure, the nonlocal ones a bounded certificate search, so a
  // surviving nonlocal cell is reported as unresolved rather than refuted.
  WedgeExpr probe = rat(2) * E + disp;
  ReduceResult rr = reduce_mod_divergence_traced(probe, /*fail_fast=*/false, /*max_rounds=*/1);
  v.data.push_back({"normalization", "display = -2 pr v(Theta)"});
  // a surviving cell is decisive only when its whole (eta, a, b) group is
  // local; any wrapped sibling means the group went through the bounded search
  std::map<std::string, bool> group_local;
  for (const auto& ct : rr.cells) {
    std::string g = ct.label.substr(0, ct.label.rfind("|invw") + 1);
    bool local = ct.label.find("|invw0") != std::string::npos;
    auto [it, fresh] = group_local.emplace(g, local);
    if (!fresh) it->second = it->second && local;
  }
  int confirmed = 0, unresolved = 0, refuted = 0;
  for (const auto& ct : rr.cells) {
    if (ct.residual_terms == 0) {
      ++confirmed;
      continue;
    }
    std::string g = ct.label.substr(0, ct.label.rfind("|invw") + 1);
    if (group_local[g]) {
      ++refuted;
      v.data.push_back({ct.label, "disagrees: " + ct.residual});
    } else {
      ++unresolved;
      v.data.push_back({ct.label, "unresolved (no divergence certificate found)"});
    }
  }
  v.pass = refuted == 0;
  std::ostringstream os;
  os << confirmed << " cells confirmed, " << unresolved << " nonlocal cells unresolved, "
     << refuted << " local cells refuted";
  v.detail = os.str();
  return v;
}

// ---- the Jacobi identity ---------------------------------------------------

Verdict jacobi_verdict(const LinOp2& J, const std::string& name, bool fail_fast) {
  Verdict v;
  v.name = name;
  WedgeExpr Th = build_bivector(J);
  WedgeExpr E = pr_v_J(J, Th);
  ReduceResult rr = reduce_mod_divergence_traced(E, fail_fast);
  v.pass = rr.residual.is_zero();
  int cells = 0, bad = 0;
  for (const auto& ct : rr.cells) {
    ++cells;
    if (ct.residual_terms > 0) ++bad;
    std::ostringstream os;
    if (ct.skipped) {
      os << "initial " << ct.initial_terms << ", not reduced (stopped after the first survivor)";
    } else {
      os << "initial " << ct.initial_terms << ", residual " << ct.residual_terms;
      if (!ct.residual.empty()) os << ": " << ct.residual;
    }
    v.data.push_back({ct.label, os.str()});
  }
  std::ostringstream os;
  os << (v.pass ? "vanishes" : "survives") << " modulo divergences across " << cells
     << " cells (" << bad << " nonzero)";
  v.detail = os.str();
  return v;
}

Verdict jacobi_compatibility_check() {
  Verdict v = jacobi_verdict(j_pencil(), "olver:jacobi");
  // corollaries read off the trace: the a-free cells are the Jacobi identity
  // of J1 alone; the cells of positive a-degree are the compatibility of the
  // pencil
  bool j1_ok = true, mix_ok = true;
  for (const auto& [label, val] : v.data) {
    bool bad = val.find("residual 0") == std::string::npos;
    if (label.find("|a0") != std::string::npos)
      j1_ok = j1_ok && !bad;
    else
      mix_ok = mix_ok && !bad;
  }
  v.data.insert(v.data.begin(),
                {{"J1 Jacobi (a-free cells)", j1_ok ? "ok" : "fails"},
                 {"pencil compatibility (a-cells)", mix_ok ? "ok" : "fails"}});
  return v;
}

void register_olver_checks() {
  register_check("olver:pencil", j_pencil_check);
  register_check("olver:theta", theta_display_check);
  register_check("olver:prv-audit", prv_theta_audit);
  register_check("olver:jacobi", jacobi_compatibility_check);
  register_check("olver:jacobi:j0", [] {
    Verdict v = jacobi_verdict(j0(), "olver:jacobi:j0");
    // independent oracle: J0 is the inverse of a closed two-form
    Verdict sym = symplectic_closure_check();
    v.data.push_back({"closed two-form oracle", sym.pass ? "ok" : "fails"});
    v.pass = v.pass && sym.pass;
    return v;
  });
  register_check("olver:jacobi:mutation-control", [] {
    Verdict inner = jacobi_verdict(j_pencil_mutated(), "olver:jacobi:mutated",
                                   /*fail_fast=*/true);
    Verdict v;
    v.name = "olver:jacobi:mutation-control";
    v.pass = !inner.pass;
    v.detail = v.pass ? "dropping the a D_z v_y summand is detected"
                      : "mutated pencil slipped through";
    for (auto& kv : inner.data)
      if (kv.second.find("residual 0") == std::string::npos &&
          kv.second.find("not reduced") == std::string::npos)
        v.data.push_back(kv);
    return v;
  });
}

}  // namespace ghe
