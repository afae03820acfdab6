#include "ghe/diffalg.hpp"

#include <algorithm>

namespace ghe {

namespace {

// derivative of a single symbol along an axis, as an expression
DiffExpr d_sym(Sym s, Axis ax) {
  switch (sym_kind(s)) {
    case symkind::ParamK:
      return DiffExpr(0);
    case symkind::Coord: {
      Axis c = coord_axis(s);
      if (c.chart == ax.chart) return DiffExpr(c.id == ax.id ? 1 : 0);
      if (ax.chart == Chart::TX) {
        // z1=(t+x)/2, z2=(t-x)/2, z3=y, z4=z
        switch (c.id) {
          case 0: return (ax.id == kAxisT || ax.id == kAxisX) ? rat(1, 2) : DiffExpr(0);
          case 1:
            if (ax.id == kAxisT) return rat(1, 2);
            if (ax.id == kAxisX) return rat(-1, 2);
            return DiffExpr(0);
          case 2: return DiffExpr(ax.id == kAxisY ? 1 : 0);
          case 3: return DiffExpr(ax.id == kAxisZ ? 1 : 0);
        }
      } else {
        // t=z1+z2, x=z1-z2, y=z3, z=z4
        switch (c.id) {
          case kAxisT: return DiffExpr(ax.id <= 1 ? 1 : 0);
          case kAxisX:
            if (ax.id == 0) return DiffExpr(1);
            if (ax.id == 1) return DiffExpr(-1);
            return DiffExpr(0);
          case kAxisY: return DiffExpr(ax.id == 2 ? 1 : 0);
          case kAxisZ: return DiffExpr(ax.id == 3 ? 1 : 0);
        }
      }
      return DiffExpr(0);
    }
    case symkind::AbsFunc: {
      FuncTag t = absfunc_tag(s);
      int n = absfunc_deriv(s);
      DiffExpr next = absfunc(t, n + 1);
      if (ax.chart == Chart::TX) {
        switch (t) {
          case FuncTag::F:
          case FuncTag::K:
            return ax.id == kAxisZ ? next : DiffExpr(0);
          case FuncTag::G:
          case FuncTag::H:
            return ax.id == kAxisY ? next : DiffExpr(0);
          case FuncTag::C:  // argument t+x
            return (ax.id == kAxisT || ax.id == kAxisX) ? next : DiffExpr(0);
          case FuncTag::D:  // argument t-x
            if (ax.id == kAxisT) return next;
            if (ax.id == kAxisX) return -next;
            return DiffExpr(0);
        }
      } else {
        switch (t) {
          case FuncTag::F:
          case FuncTag::K:
            return ax.id == 3 ? next : DiffExpr(0);
          case FuncTag::G:
          case FuncTag::H:
            return ax.id == 2 ? next : DiffExpr(0);
          case FuncTag::C:  // argument t+x = 2 z1
            return ax.id == 0 ? rat(2) * next : DiffExpr(0);
          case FuncTag::D:  // argument t-x = 2 z2
            return ax.id == 1 ? rat(2) * next : DiffExpr(0);
        }
      }
      return DiffExpr(0);
    }
    case symkind::Jet: {
      if (jet_chart(s) != ax.chart)
        throw std::runtime_error("total derivative across charts on jet " + sym_name(s));
      return DiffExpr::var(sym_jet(jet_dep(s), jet_chart(s), jet_index(s).plus(ax.id)));
    }
    case symkind::AtomJet: {
      if (ax.chart != Chart::TX) throw std::runtime_error("atom jets live in the TX chart");
      if (ax.id == kAxisY) return DiffExpr::var(sym_atom_jet(atom_id_of(s), atom_dy(s) + 1, atom_dz(s)));
      if (ax.id == kAxisZ) return DiffExpr::var(sym_atom_jet(atom_id_of(s), atom_dy(s), atom_dz(s) + 1));
      if (ax.id == kAxisX) return atom_dx_rule(s);
      throw std::runtime_error("t-derivative of a nonlocal atom is undefined here");
    }
  }
  throw std::runtime_error("d_sym: unknown symbol kind");
}

DiffExpr d_poly(const Poly& p, Axis ax) {
  DiffExpr r(0);
  for (auto& [m, c] : p.t) {
    for (size_t i = 0; i < m.f.size(); ++i) {
      DiffExpr ds = d_sym(m.f[i].first, ax);
      if (ds.is_zero()) continue;
      // c * e * s^(e-1) * ds * (rest of monomial)
      DiffExpr term{Rational(c * (int)m.f[i].second)};
      for (size_t j = 0; j < m.f.size(); ++j) {
        unsigned e = m.f[j].second - (j == i ? 1 : 0);
        if (e) term = term * DiffExpr::var(m.f[j].first).pow((int)e);
      }
      r += term * ds;
    }
  }
  return r;
}

}  // namespace

DiffExpr total_derivative(const DiffExpr& e, Axis ax) {
  DiffExpr dn = d_poly(e.num(), ax);
  if (e.den().is_constant()) {
    Rational d = e.den().is_zero() ? Rational(1) : e.den().t[0].second;
    return dn / DiffExpr(d);
  }
  DiffExpr dd = d_poly(e.den(), ax);
  DiffExpr den(e.den());
  return dn / den - DiffExpr(e.num()) * dd / (den * den);
}

DiffExpr total_derivative_multi(const DiffExpr& e, Chart ch, MultiIndex J) {
  DiffExpr r = e;
  for (int axis = 0; axis < 4; ++axis)
    for (int k = 0; k < J.c[axis]; ++k) r = total_derivative(r, Axis{ch, (std::uint8_t)axis});
  return r;
}

namespace {

void require_dep_outside_atoms(const DiffExpr& e, Dep dep) {
  for (Sym s : collect_syms(e))
    if (sym_is_atom(s) && atom_payload_contains_dep(s, dep))
      throw std::runtime_error("Euler operator: dependent occurs inside a nonlocal atom");
}

}  // namespace

DiffExpr euler_full(const DiffExpr& e, Dep dep, Chart ch) {
  require_dep_outside_atoms(e, dep);
  DiffExpr r(0);
  for (Sym s : collect_syms(e)) {
    if (!sym_is_jet(s) || jet_dep(s) != dep) continue;
    if (jet_chart(s) != ch) throw std::runtime_error("euler_full: jet in unexpected chart");
    MultiIndex J = jet_index(s);
    DiffExpr piece = total_derivative_multi(partial(e, s), ch, J);
    r += (J.order() % 2) ? -piece : piece;
  }
  return r;
}

DiffExpr euler_spatial_class(const DiffExpr& e, Dep dep, int tcount) {
  require_dep_outside_atoms(e, dep);
  DiffExpr r(0);
  for (Sym s : collect_syms(e)) {
    if (!sym_is_jet(s) || jet_dep(s) != dep) continue;
    if (jet_chart(s) != Chart::TX) throw std::runtime_error("spatial Euler needs the TX chart");
    MultiIndex J = jet_index(s);
    if ((int)J.c[0] != tcount) continue;
    MultiIndex S = mi(0, J.c[1], J.c[2], J.c[3]);
    DiffExpr piece = total_derivative_multi(partial(e, s), Chart::TX, S);
    r += (S.order() % 2) ? -piece : piece;
  }
  return r;
}

DiffExpr euler_spatial(const DiffExpr& e, Dep dep) {
  for (Sym s : collect_syms(e))
    if (sym_is_jet(s) && jet_dep(s) == dep && jet_index(s).c[0] != 0)
      throw std::runtime_error("euler_spatial: unexpected t-derivative of dependent");
  return euler_spatial_class(e, dep, 0);
}

bool is_total_divergence_xyz(const DiffExpr& e) {
  std::vector<Dep> deps;
  for (Sym s : collect_syms(e)) {
    if (sym_is_atom(s)) throw std::runtime_error("divergence test on nonlocal expression");
    if (sym_is_jet(s)) deps.push_back(jet_dep(s));
  }
  std::sort(deps.begin(), deps.end());
  deps.erase(std::unique(deps.begin(), deps.end()), deps.end());
  for (Dep d : deps)
    if (!euler_spatial(e, d).is_zero()) return false;
  return true;
}

DiffExpr substitute_flow(const DiffExpr& e, const Flow& fl) {
  DiffExpr r = e;
  for (int guard = 0; guard < 4096; ++guard) {
    Sym target = 0;
    for (Sym s : collect_syms(r)) {
      if (!sym_is_jet(s)) continue;
      Dep d = jet_dep(s);
      if (d != Dep::U && d != Dep::V) continue;
      if (jet_chart(s) != Chart::TX || jet_index(s).c[0] == 0) continue;
      if (!target || sym_less(target, s)) target = s;
    }
    if (!target) return r;
    MultiIndex J = jet_index(target);
    MultiIndex rest = mi(J.c[0] - 1, J.c[1], J.c[2], J.c[3]);
    const DiffExpr& base = (jet_dep(target) == Dep::U) ? fl.phi : fl.psi;
    r = subst(r, target, total_derivative_multi(base, Chart::TX, rest));
  }
  throw std::runtime_error("substitute_flow did not terminate");
}

DiffExpr prolong_evolutionary(const Flow& q, const DiffExpr& e) {
  DiffExpr r(0);
  for (Sym s : collect_syms(e)) {
    if (sym_is_atom(s)) throw std::runtime_error("prolongation on nonlocal expression");
    if (!sym_is_jet(s)) continue;
    Dep d = jet_dep(s);
    if (d != Dep::U && d != Dep::V) continue;
    if (jet_chart(s) != Chart::TX) throw std::runtime_error("prolongation needs the TX chart");
    const DiffExpr& base = (d == Dep::U) ? q.phi : q.psi;
    r += total_derivative_multi(base, Chart::TX, jet_index(s)) * partial(e, s);
  }
  return r;
}

Flow characteristic_bracket(const Flow& q1, const Flow& q2) {
  Flow r;
  r.phi = prolong_evolutionary(q1, q2.phi) - prolong_evolutionary(q2, q1.phi);
  r.psi = prolong_evolutionary(q1, q2.psi) - prolong_evolutionary(q2, q1.psi);
  return r;
}

}  // namespace ghe
