#include "ghe/nonlocal.hpp"

#include <algorithm>
#include <map>
#include <mutex>
#include <set>

namespace ghe {

namespace {

DiffExpr u_yz() { return jet_tx(Dep::U, 0, 0, 1, 1); }
DiffExpr u_xz() { return jet_tx(Dep::U, 0, 1, 0, 1); }
DiffExpr u_xy() { return jet_tx(Dep::U, 0, 1, 1, 0); }

// ---------------------------------------------------------------------------
// atom registry

struct Registry {
  std::vector<DiffExpr> payloads;
  std::vector<int> nesting;
  std::map<std::string, std::uint32_t> by_text;
  std::mutex mu;
};

Registry& reg() {
  static Registry r;
  return r;
}

int payload_nesting(const DiffExpr& p) {
  int n = 0;
  for (Sym s : collect_syms(p))
    if (sym_is_atom(s)) n = std::max(n, atom_nesting(atom_id_of(s)));
  return n + 1;
}

}  // namespace

std::uint32_t intern_atom(const DiffExpr& payload) {
  std::string key = to_text(payload);
  auto& r = reg();
  std::lock_guard lk(r.mu);
  auto it = r.by_text.find(key);
  if (it != r.by_text.end()) return it->second;
  std::uint32_t id = (std::uint32_t)r.payloads.size();
  r.payloads.push_back(payload);
  r.nesting.push_back(payload_nesting(payload));
  r.by_text.emplace(std::move(key), id);
  return id;
}

const DiffExpr& atom_payload(std::uint32_t id) {
  auto& r = reg();
  std::lock_guard lk(r.mu);
  if (id >= r.payloads.size()) throw std::runtime_error("unknown atom id");
  return r.payloads[id];
}

int atom_nesting(std::uint32_t id) {
  auto& r = reg();
  std::lock_guard lk(r.mu);
  if (id >= r.nesting.size()) throw std::runtime_error("unknown atom id");
  return r.nesting[id];
}

void reset_atoms() {
  auto& r = reg();
  std::lock_guard lk(r.mu);
  r.payloads.clear();
  r.nesting.clear();
  r.by_text.clear();
}

// hooks used by the differential algebra layer
DiffExpr atom_dx_rule(Sym atom_sym) {
  std::uint32_t id = atom_id_of(atom_sym);
  DiffExpr s_y = DiffExpr::var(sym_atom_jet(id, 1, 0));
  DiffExpr base = atom_payload(id) / u_yz() + (u_xz() / u_yz()) * s_y;
  return total_derivative_multi(base, Chart::TX, mi(0, 0, atom_dy(atom_sym), atom_dz(atom_sym)));
}

bool atom_payload_contains_dep(Sym atom_sym, Dep dep) {
  const DiffExpr& p = atom_payload(atom_id_of(atom_sym));
  for (Sym s : collect_syms(p)) {
    if (sym_is_jet(s) && jet_dep(s) == dep) return true;
    if (sym_is_atom(s) && atom_payload_contains_dep(s, dep)) return true;
  }
  return false;
}

// ---------------------------------------------------------------------------
// w and zeta

DiffExpr w_apply(const DiffExpr& e) {
  return u_yz() * total_derivative(e, ax_x()) - u_xz() * total_derivative(e, ax_y());
}

DiffExpr zeta_apply(const DiffExpr& e) {
  return u_yz() * total_derivative(e, ax_x()) - u_xy() * total_derivative(e, ax_z());
}

// ---------------------------------------------------------------------------
// linear solving over the field of parameter-rational functions

namespace {

bool is_param_only(const DiffExpr& e) {
  for (Sym s : collect_syms(e))
    if (sym_kind(s) != symkind::ParamK) return false;
  return true;
}

struct MonoGreaterCmp {
  bool operator()(const Monomial& a, const Monomial& b) const { return mono_less(b, a); }
};

// split a polynomial into (non-parameter monomial) -> parameter-rational coeff

std::map<Monomial, DiffExpr, MonoGreaterCmp> split_rows_impl(const Poly& p) {
  std::map<Monomial, DiffExpr, MonoGreaterCmp> rows;
  for (auto& [m, c] : p.t) {
    Monomial key;
    Poly parampart = Poly::constant(c);
    for (auto& [s, e] : m.f) {
      if (sym_kind(s) == symkind::ParamK)
        parampart = parampart * poly_pow(Poly::var(s), e);
      else
        key.f.emplace_back(s, e);
    }
    auto it = rows.find(key);
    if (it == rows.end())
      rows.emplace(std::move(key), DiffExpr(parampart));
    else
      it->second += DiffExpr(parampart);
  }
  for (auto it = rows.begin(); it != rows.end();)
    it = it->second.is_zero() ? rows.erase(it) : std::next(it);
  return rows;
}

// Solve sum_k x_k * col_k = rhs exactly; x in Q(params).  Free variables are
// fixed to zero, giving a deterministic representative.  nullopt = inconsistent.
std::optional<std::vector<DiffExpr>> solve_linear(const std::vector<DiffExpr>& cols,
                                                  const DiffExpr& rhs) {
  // Clear denominators by multiplying through with the product of all distinct
  // non-constant denominators (exact, if blunt).
  std::vector<const DiffExpr*> all;
  for (auto& c : cols) all.push_back(&c);
  all.push_back(&rhs);
  std::vector<std::string> seen;
  DiffExpr mult(1);
  for (auto* e : all) {
    if (e->den().is_constant()) continue;
    std::string key = to_text(DiffExpr(e->den()));
    if (std::find(seen.begin(), seen.end(), key) != seen.end()) continue;
    seen.push_back(key);
    mult = mult * DiffExpr(e->den());
  }
  std::vector<std::map<Monomial, DiffExpr, MonoGreaterCmp>> colrows;
  std::map<Monomial, DiffExpr, MonoGreaterCmp> rhsrows;
  std::set<Monomial, MonoGreaterCmp> keys;
  for (size_t k = 0; k < cols.size(); ++k) {
    DiffExpr e = cols[k] * mult;
    if (!e.den().is_constant() && !is_param_only(DiffExpr(e.den()))) return std::nullopt;
    // param-only denominator folds into coefficients
    DiffExpr invden = DiffExpr(e.den()).inverse();
    auto rows = split_rows_impl(e.num());
    for (auto& [m, c] : rows) c = c * invden;
    for (auto& [m, c] : rows) keys.insert(m);
    colrows.push_back(std::move(rows));
  }
  {
    DiffExpr e = rhs * mult;
    if (!e.den().is_constant() && !is_param_only(DiffExpr(e.den()))) return std::nullopt;
    DiffExpr invden = DiffExpr(e.den()).inverse();
    rhsrows = split_rows_impl(e.num());
    for (auto& [m, c] : rhsrows) c = c * invden;
    for (auto& [m, c] : rhsrows) keys.insert(m);
  }

  size_t nrows = keys.size(), ncols = cols.size();
  std::vector<std::vector<DiffExpr>> A(nrows, std::vector<DiffExpr>(ncols, DiffExpr(0)));
  std::vector<DiffExpr> B(nrows, DiffExpr(0));
  size_t ri = 0;
  for (auto& key : keys) {
    for (size_t k = 0; k < ncols; ++k) {
      auto it = colrows[k].find(key);
      if (it != colrows[k].end()) A[ri][k] = it->second;
    }
    auto it = rhsrows.find(key);
    if (it != rhsrows.end()) B[ri] = it->second;
    ++ri;
  }

  // Gaussian elimination, column-major pivoting in natural order
  std::vector<int> pivot_row_of_col(ncols, -1);
  size_t prow = 0;
  for (size_t pc = 0; pc < ncols && prow < nrows; ++pc) {
    size_t sel = nrows;
    for (size_t r = prow; r < nrows; ++r)
      if (!A[r][pc].is_zero()) { sel = r; break; }
    if (sel == nrows) continue;
    std::swap(A[prow], A[sel]);
    std::swap(B[prow], B[sel]);
    DiffExpr inv = A[prow][pc].inverse();
    for (size_t c2 = pc; c2 < ncols; ++c2) A[prow][c2] = A[prow][c2] * inv;
    B[prow] = B[prow] * inv;
    for (size_t r = 0; r < nrows; ++r) {
      if (r == prow || A[r][pc].is_zero()) continue;
      DiffExpr f = A[r][pc];
      for (size_t c2 = pc; c2 < ncols; ++c2) A[r][c2] = A[r][c2] - f * A[prow][c2];
      B[r] = B[r] - f * B[prow];
    }
    pivot_row_of_col[pc] = (int)prow;
    ++prow;
  }
  // consistency: zero rows must have zero rhs
  for (size_t r = prow; r < nrows; ++r)
    if (!B[r].is_zero()) return std::nullopt;

  std::vector<DiffExpr> x(ncols, DiffExpr(0));
  for (size_t c2 = 0; c2 < ncols; ++c2)
    if (pivot_row_of_col[c2] >= 0) x[c2] = B[(size_t)pivot_row_of_col[c2]];
  return x;
}

// null-space basis of the homogeneous system sum_k x_k col_k = 0
std::vector<std::vector<DiffExpr>> null_space(const std::vector<DiffExpr>& cols) {
  std::vector<std::vector<DiffExpr>> out;
  // reuse solve_linear's reduction by hand: build matrix as above with rhs 0
  std::vector<std::map<Monomial, DiffExpr, MonoGreaterCmp>> colrows;
  std::set<Monomial, MonoGreaterCmp> keys;
  std::vector<std::string> seen;
  DiffExpr mult(1);
  for (auto& c : cols) {
    if (c.den().is_constant()) continue;
    std::string key = to_text(DiffExpr(c.den()));
    if (std::find(seen.begin(), seen.end(), key) != seen.end()) continue;
    seen.push_back(key);
    mult = mult * DiffExpr(c.den());
  }
  for (auto& c : cols) {
    DiffExpr e = c * mult;
    if (!e.den().is_constant() && !is_param_only(DiffExpr(e.den()))) return out;
    DiffExpr invden = DiffExpr(e.den()).inverse();
    auto rows = split_rows_impl(e.num());
    for (auto& [m, cc] : rows) cc = cc * invden;
    for (auto& [m, cc] : rows) keys.insert(m);
    colrows.push_back(std::move(rows));
  }
  size_t nrows = keys.size(), ncols = cols.size();
  std::vector<std::vector<DiffExpr>> A(nrows, std::vector<DiffExpr>(ncols, DiffExpr(0)));
  size_t ri = 0;
  for (auto& key : keys) {
    for (size_t k = 0; k < ncols; ++k) {
      auto it = colrows[k].find(key);
      if (it != colrows[k].end()) A[ri][k] = it->second;
    }
    ++ri;
  }
  std::vector<int> pivot_col_of_row;
  std::vector<bool> is_pivot(ncols, false);
  size_t prow = 0;
  for (size_t pc = 0; pc < ncols && prow < nrows; ++pc) {
    size_t sel = nrows;
    for (size_t r = prow; r < nrows; ++r)
      if (!A[r][pc].is_zero()) { sel = r; break; }
    if (sel == nrows) continue;
    std::swap(A[prow], A[sel]);
    DiffExpr inv = A[prow][pc].inverse();
    for (size_t c2 = pc; c2 < ncols; ++c2) A[prow][c2] = A[prow][c2] * inv;
    for (size_t r = 0; r < nrows; ++r) {
      if (r == prow || A[r][pc].is_zero()) continue;
      DiffExpr f = A[r][pc];
      for (size_t c2 = pc; c2 < ncols; ++c2) A[r][c2] = A[r][c2] - f * A[prow][c2];
    }
    is_pivot[pc] = true;
    pivot_col_of_row.push_back((int)pc);
    ++prow;
  }
  for (size_t fc = 0; fc < ncols; ++fc) {
    if (is_pivot[fc]) continue;
    std::vector<DiffExpr> v(ncols, DiffExpr(0));
    v[fc] = DiffExpr(1);
    for (size_t r = 0; r < pivot_col_of_row.size(); ++r)
      v[(size_t)pivot_col_of_row[r]] = -A[r][fc];
    out.push_back(std::move(v));
  }
  return out;
}

// ---------------------------------------------------------------------------
// preimage candidate pool

Sym lower_axis(Sym s, int axis) {
  if (sym_is_jet(s)) {
    MultiIndex J = jet_index(s);
    if (J.c[axis] == 0) throw std::runtime_error("lower_axis underflow");
    J.c[axis] -= 1;
    return sym_jet(jet_dep(s), jet_chart(s), J);
  }
  if (sym_is_atom(s)) {
    int dy = atom_dy(s), dz = atom_dz(s);
    if (axis == kAxisY) return sym_atom_jet(atom_id_of(s), dy - 1, dz);
    if (axis == kAxisZ) return sym_atom_jet(atom_id_of(s), dy, dz - 1);
    throw std::runtime_error("lower_axis on atom: bad axis");
  }
  throw std::runtime_error("lower_axis: bad symbol");
}

// candidates nu such that w(nu) may hit monomial fractions of P
void add_candidates(const DiffExpr& P, std::vector<DiffExpr>& pool,
                    std::set<std::string>& pool_keys) {
  auto push = [&](const DiffExpr& nu) {
    if (nu.is_zero()) return;
    std::string k = to_text(nu);
    if (pool_keys.insert(k).second) pool.push_back(nu);
  };
  if (P.den().t.size() != 1) return;  // only monomial denominators occur here
  const Monomial& dd = P.den().t[0].first;
  Sym syz = sym_jet(Dep::U, Chart::TX, mi(0, 0, 1, 1));
  Sym sxz = sym_jet(Dep::U, Chart::TX, mi(0, 1, 0, 1));
  for (auto& [m, c] : P.num().t) {
    for (size_t i = 0; i < m.f.size(); ++i) {
      Sym s = m.f[i].first;
      bool jet_ok = sym_is_jet(s) && jet_chart(s) == Chart::TX;
      bool atom_ok = sym_is_atom(s);
      if (!jet_ok && !atom_ok) continue;
      auto make = [&](int axis, Sym extra_den) {
        Monomial num = m;
        if (num.f[i].second == 1) {
          Sym lo = lower_axis(s, axis);
          num.f.erase(num.f.begin() + (long)i);
          // re-insert lowered factor in sorted position
          Monomial one;
          one.f.emplace_back(lo, 1u);
          num = mono_mul(num, one);
        } else {
          num.f[i].second -= 1;
          Monomial one;
          one.f.emplace_back(lower_axis(s, axis), 1u);
          num = mono_mul(num, one);
        }
        Monomial den = dd;
        Monomial extra;
        extra.f.emplace_back(extra_den, 1u);
        den = mono_mul(den, extra);
        Poly pn, pd;
        pn.t.emplace_back(num, Rational(1));
        pd.t.emplace_back(den, Rational(1));
        push(DiffExpr(pn, pd));
      };
      if (jet_ok && jet_index(s).c[1] >= 1) make(kAxisX, syz);
      if (jet_ok && jet_index(s).c[2] >= 1) make(kAxisY, sxz);
      if (atom_ok && atom_dy(s) >= 1) make(kAxisY, sxz);
    }
    if (pool.size() > 240) return;
  }
}

}  // namespace

std::optional<DiffExpr> w_preimage(const DiffExpr& P) {
  if (P.is_zero()) return DiffExpr(0);
  std::vector<DiffExpr> pool;
  std::set<std::string> keys;
  add_candidates(P, pool, keys);
  if (pool.empty()) return std::nullopt;
  std::vector<DiffExpr> cols;
  cols.reserve(pool.size());
  for (auto& nu : pool) cols.push_back(w_apply(nu));
  auto sol = solve_linear(cols, P);
  if (!sol) return std::nullopt;
  DiffExpr r(0);
  for (size_t k = 0; k < pool.size(); ++k)
    if (!(*sol)[k].is_zero()) r += (*sol)[k] * pool[k];
  return r;
}

namespace {

bool commutes_with_w(Sym s) {
  switch (sym_kind(s)) {
    case symkind::ParamK:
      return true;
    case symkind::AbsFunc: {
      FuncTag t = absfunc_tag(s);
      return t == FuncTag::F || t == FuncTag::K;  // functions of z only
    }
    case symkind::Coord: {
      Axis a = coord_axis(s);
      return a.chart == Chart::TX && (a.id == kAxisT || a.id == kAxisZ);
    }
    default:
      return false;
  }
}

}  // namespace

DiffExpr apply_invw(const DiffExpr& e, int depth_cap) {
  if (e.is_zero()) return DiffExpr(0);
  if (auto p = w_preimage(e)) return *p;

  auto intern_checked = [&](const DiffExpr& payload) {
    if (payload_nesting(payload) > depth_cap)
      throw std::runtime_error("w^{-1} nesting exceeds the configured cap");
    return DiffExpr::var(sym_atom_jet(intern_atom(payload), 0, 0));
  };

  if (e.den().t.size() == 1) {
    const Monomial& dd = e.den().t[0].first;
    const Rational& dc = e.den().t[0].second;
    DiffExpr result(0);
    for (auto& [m, c] : e.num().t) {
      DiffExpr outer{Rational(c / dc)};
      Monomial pn, pdm;
      for (auto& [s, ex] : m.f) {
        if (commutes_with_w(s))
          outer = outer * DiffExpr::var(s).pow((int)ex);
        else
          pn.f.emplace_back(s, ex);
      }
      for (auto& [s, ex] : dd.f) {
        if (commutes_with_w(s))
          outer = outer / DiffExpr::var(s).pow((int)ex);
        else
          pdm.f.emplace_back(s, ex);
      }
      Poly num, den;
      num.t.emplace_back(pn, Rational(1));
      den.t.emplace_back(pdm, Rational(1));
      DiffExpr payload(num, den);
      if (auto pre = w_preimage(payload))
        result += outer * *pre;
      else
        result += outer * intern_checked(payload);
    }
    return result;
  }

  // non-monomial denominator: one atom for the whole expression
  Rational lead = e.num().t[0].second;
  DiffExpr payload = e / DiffExpr(lead);
  return DiffExpr(lead) * intern_checked(payload);
}

// ---------------------------------------------------------------------------
// zero test modulo atom relations

namespace {

std::vector<std::uint32_t> atoms_in(const DiffExpr& e) {
  std::vector<std::uint32_t> ids;
  for (Sym s : collect_syms(e))
    if (sym_is_atom(s)) ids.push_back(atom_id_of(s));
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

DiffExpr subst_atom(const DiffExpr& e, std::uint32_t id, const DiffExpr& value) {
  DiffExpr r = e;
  for (Sym s : collect_syms(e)) {
    if (!sym_is_atom(s) || atom_id_of(s) != id) continue;
    DiffExpr repl = total_derivative_multi(value, Chart::TX, mi(0, 0, atom_dy(s), atom_dz(s)));
    r = subst(r, s, repl);
  }
  return r;
}

}  // namespace

DiffExpr reduce_mod_atoms(const DiffExpr& e0) {
  DiffExpr e = e0;
  for (int guard = 0; guard < 64; ++guard) {
    if (e.is_zero()) return e;
    auto ids = atoms_in(e);
    if (ids.empty()) return e;

    // look for linear relations  sum_i c_i payload_i = w(sum_k d_k nu_k)
    std::vector<DiffExpr> pool;
    std::set<std::string> keys;
    for (auto id : ids) add_candidates(atom_payload(id), pool, keys);
    std::vector<DiffExpr> cols;
    for (auto id : ids) cols.push_back(atom_payload(id));
    for (auto& nu : pool) cols.push_back(-w_apply(nu));
    auto basis = null_space(cols);

    bool advanced = false;
    for (auto& v : basis) {
      // pivot: present atom of greatest id with nonzero coefficient
      int pidx = -1;
      for (size_t i = 0; i < ids.size(); ++i)
        if (!v[i].is_zero()) pidx = (int)i;
      if (pidx < 0) continue;
      std::uint32_t pid = ids[(size_t)pidx];
      // S_pid = ( sum_k d_k nu_k - sum_{i != pivot} c_i S_i ) / c_pivot
      DiffExpr rhs(0);
      for (size_t k = 0; k < pool.size(); ++k)
        if (!v[ids.size() + k].is_zero()) rhs += v[ids.size() + k] * pool[k];
      for (size_t i = 0; i < ids.size(); ++i) {
        if ((int)i == pidx || v[i].is_zero()) continue;
        rhs -= v[i] * DiffExpr::var(sym_atom_jet(ids[i], 0, 0));
      }
      rhs = rhs / v[(size_t)pidx];
      e = subst_atom(e, pid, rhs);
      advanced = true;
      break;
    }
    if (!advanced) return e;
  }
  return e;
}

bool is_zero_mod_w(const DiffExpr& e, int depth_cap) {
  (void)depth_cap;
  return reduce_mod_atoms(e).is_zero();
}

// ---------------------------------------------------------------------------
// linear operators

LinOp LinOp::identity() {
  LinOp r;
  r.terms.push_back({});
  return r;
}
LinOp LinOp::mul(const DiffExpr& c) {
  if (c.is_zero()) return zero();
  LinOp r;
  r.terms.push_back({OpFactor{OpFactor::Kind::Mul, c, {}}});
  return r;
}
LinOp LinOp::diff(Axis ax) {
  LinOp r;
  r.terms.push_back({OpFactor{OpFactor::Kind::Diff, DiffExpr(0), ax}});
  return r;
}
LinOp LinOp::invw() {
  LinOp r;
  r.terms.push_back({OpFactor{OpFactor::Kind::InvW, DiffExpr(0), {}}});
  return r;
}
LinOp LinOp::w() {
  return LinOp::mul(u_yz()) * LinOp::diff(ax_x()) - LinOp::mul(u_xz()) * LinOp::diff(ax_y());
}

namespace {

// merge adjacent Mul factors, drop terms multiplied by zero
OpTerm tidy_term(OpTerm t, bool& nonzero) {
  OpTerm out;
  for (auto& f : t) {
    if (f.kind == OpFactor::Kind::Mul) {
      if (f.c.is_zero()) {
        nonzero = false;
        return {};
      }
      if (!out.empty() && out.back().kind == OpFactor::Kind::Mul) {
        out.back().c = out.back().c * f.c;
        continue;
      }
      if (f.c == DiffExpr(1) && !out.empty()) continue;
    }
    out.push_back(f);
  }
  // drop a leading Mul(1) when other factors exist
  if (out.size() > 1 && out[0].kind == OpFactor::Kind::Mul && out[0].c == DiffExpr(1))
    out.erase(out.begin());
  nonzero = true;
  return out;
}

}  // namespace

LinOp operator+(const LinOp& a, const LinOp& b) {
  LinOp r = a;
  r.terms.insert(r.terms.end(), b.terms.begin(), b.terms.end());
  return r;
}
LinOp operator-(const LinOp& a) {
  LinOp r;
  for (auto& t : a.terms) {
    OpTerm nt;
    nt.push_back(OpFactor{OpFactor::Kind::Mul, DiffExpr(-1), {}});
    nt.insert(nt.end(), t.begin(), t.end());
    bool ok;
    nt = tidy_term(std::move(nt), ok);
    if (ok) r.terms.push_back(std::move(nt));
  }
  return r;
}
LinOp operator-(const LinOp& a, const LinOp& b) { return a + (-b); }

LinOp operator*(const LinOp& a, const LinOp& b) {
  LinOp r;
  for (auto& ta : a.terms)
    for (auto& tb : b.terms) {
      OpTerm t = ta;
      t.insert(t.end(), tb.begin(), tb.end());
      bool ok;
      t = tidy_term(std::move(t), ok);
      if (ok) r.terms.push_back(std::move(t));
    }
  return r;
}

DiffExpr op_apply(const LinOp& op, const DiffExpr& e, int depth_cap) {
  DiffExpr out(0);
  for (auto& t : op.terms) {
    DiffExpr r = e;
    for (auto it = t.rbegin(); it != t.rend(); ++it) {
      switch (it->kind) {
        case OpFactor::Kind::Mul: r = it->c * r; break;
        case OpFactor::Kind::Diff: r = total_derivative(r, it->ax); break;
        case OpFactor::Kind::InvW: r = apply_invw(r, depth_cap); break;
      }
      if (r.is_zero()) break;
    }
    out += r;
  }
  return out;
}

LinOp op_adjoint(const LinOp& op) {
  LinOp r;
  for (auto& t : op.terms) {
    OpTerm nt(t.rbegin(), t.rend());
    int sign = 0;
    for (auto& f : nt)
      if (f.kind != OpFactor::Kind::Mul) ++sign;
    if (sign % 2) nt.insert(nt.begin(), OpFactor{OpFactor::Kind::Mul, DiffExpr(-1), {}});
    bool ok;
    nt = tidy_term(std::move(nt), ok);
    if (ok) r.terms.push_back(std::move(nt));
  }
  return r;
}

std::vector<std::pair<MultiIndex, DiffExpr>> op_local_normal_form(const LinOp& op) {
  // acc maps D^K -> coefficient, built right-to-left
  std::map<std::uint32_t, DiffExpr> acc_all;  // key packs the multi-index
  auto pack = [](MultiIndex K) {
    return ((std::uint32_t)K.c[0] << 24) | ((std::uint32_t)K.c[1] << 16) |
           ((std::uint32_t)K.c[2] << 8) | (std::uint32_t)K.c[3];
  };
  auto unpack = [](std::uint32_t k) {
    return mi((int)(k >> 24) & 0xff, (int)(k >> 16) & 0xff, (int)(k >> 8) & 0xff, (int)k & 0xff);
  };
  for (auto& t : op.terms) {
    std::map<std::uint32_t, DiffExpr> acc;
    acc[0] = DiffExpr(1);
    for (auto it = t.rbegin(); it != t.rend(); ++it) {
      std::map<std::uint32_t, DiffExpr> next;
      switch (it->kind) {
        case OpFactor::Kind::Mul:
          for (auto& [k, c] : acc) {
            auto& slot = next[k];
            slot += it->c * c;
          }
          break;
        case OpFactor::Kind::Diff: {
          if (it->ax.chart != Chart::TX)
            throw std::runtime_error("op_local_normal_form: TX chart only");
          for (auto& [k, c] : acc) {
            MultiIndex K = unpack(k);
            next[pack(K.plus(it->ax.id))] += c;
            DiffExpr dc = total_derivative(c, it->ax);
            if (!dc.is_zero()) next[k] += dc;
          }
          break;
        }
        case OpFactor::Kind::InvW:
          throw std::runtime_error("op_local_normal_form: operator is nonlocal");
      }
      acc = std::move(next);
    }
    for (auto& [k, c] : acc) acc_all[k] += c;
  }
  std::vector<std::pair<MultiIndex, DiffExpr>> out;
  for (auto& [k, c] : acc_all)
    if (!c.is_zero()) out.emplace_back(unpack(k), c);
  return out;
}

std::optional<LinOp> op_invert(const LinOp& op) {
  bool nonlocal = false;
  for (auto& t : op.terms)
    for (auto& f : t)
      if (f.kind == OpFactor::Kind::InvW) nonlocal = true;
  if (nonlocal) return std::nullopt;
  auto nf = op_local_normal_form(op);
  if (nf.empty()) return std::nullopt;
  if (nf.size() == 1 && nf[0].first.is_zero()) return LinOp::mul(nf[0].second.inverse());
  // pattern c * w = (c u_yz) D_x - (c u_xz) D_y
  DiffExpr cx(0), cy(0);
  for (auto& [K, c] : nf) {
    if (K == mi(0, 1, 0, 0)) cx = c;
    else if (K == mi(0, 0, 1, 0)) cy = c;
    else return std::nullopt;
  }
  if (cx.is_zero()) return std::nullopt;
  DiffExpr c = cx / u_yz();
  if (!(cy == -(c * u_xz()))) return std::nullopt;
  return LinOp::invw() * LinOp::mul(c.inverse());
}

bool op_equal_semantic(const LinOp& a, const LinOp& b, Dep test, int depth_cap) {
  DiffExpr probe = jet_tx(test, 0, 0, 0, 0);
  DiffExpr d = op_apply(a, probe, depth_cap) - op_apply(b, probe, depth_cap);
  return is_zero_mod_w(d, depth_cap);
}

// ---------------------------------------------------------------------------
// 2x2 matrices

LinOp2 LinOp2::identity() {
  LinOp2 r;
  r.m[0][0] = LinOp::identity();
  r.m[1][1] = LinOp::identity();
  return r;
}

LinOp2 operator+(const LinOp2& a, const LinOp2& b) {
  LinOp2 r;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) r.m[i][j] = a.m[i][j] + b.m[i][j];
  return r;
}
LinOp2 operator-(const LinOp2& a, const LinOp2& b) {
  LinOp2 r;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) r.m[i][j] = a.m[i][j] - b.m[i][j];
  return r;
}
LinOp2 operator*(const LinOp2& a, const LinOp2& b) {
  LinOp2 r;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) r.m[i][j] = a.m[i][0] * b.m[0][j] + a.m[i][1] * b.m[1][j];
  return r;
}
LinOp2 mat_scale(const LinOp& s, const LinOp2& a) {
  LinOp2 r;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) r.m[i][j] = s * a.m[i][j];
  return r;
}
LinOp2 mat_adjoint(const LinOp2& a) {
  LinOp2 r;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) r.m[i][j] = op_adjoint(a.m[j][i]);
  return r;
}
std::array<DiffExpr, 2> mat_apply(const LinOp2& a, const std::array<DiffExpr, 2>& x,
                                  int depth_cap) {
  return {op_apply(a.m[0][0], x[0], depth_cap) + op_apply(a.m[0][1], x[1], depth_cap),
          op_apply(a.m[1][0], x[0], depth_cap) + op_apply(a.m[1][1], x[1], depth_cap)};
}

std::optional<LinOp2> mat_inverse(const LinOp2& M) {
  const LinOp &a = M.m[0][0], &b = M.m[0][1], &c = M.m[1][0], &d = M.m[1][1];
  LinOp2 r;
  if (d.is_zero_op()) {
    auto ib = op_invert(b), ic = op_invert(c);
    if (!ib || !ic) return std::nullopt;
    r.m[0][0] = LinOp::zero();
    r.m[0][1] = *ic;
    r.m[1][0] = *ib;
    r.m[1][1] = -(*ib * a * *ic);
    return r;
  }
  if (a.is_zero_op()) {
    auto ib = op_invert(b), ic = op_invert(c);
    if (!ib || !ic) return std::nullopt;
    r.m[0][0] = -(*ic * d * *ib);
    r.m[0][1] = *ic;
    r.m[1][0] = *ib;
    r.m[1][1] = LinOp::zero();
    return r;
  }
  auto ia = op_invert(a), ib = op_invert(b), ic = op_invert(c), id = op_invert(d);
  if (!ia || !ib || !ic || !id) return std::nullopt;
  auto e = op_invert(a - b * *id * c);
  auto f = op_invert(c - d * *ib * a);
  auto g = op_invert(b - a * *ic * d);
  auto h = op_invert(d - c * *ia * b);
  if (!e || !f || !g || !h) return std::nullopt;
  r.m[0][0] = *e;
  r.m[0][1] = *f;
  r.m[1][0] = *g;
  r.m[1][1] = *h;
  return r;
}

bool mat_equal_semantic(const LinOp2& a, const LinOp2& b, int depth_cap) {
  std::array<DiffExpr, 2> probe = {jet_tx(Dep::Rho, 0, 0, 0, 0), jet_tx(Dep::Rho2, 0, 0, 0, 0)};
  auto ra = mat_apply(a, probe, depth_cap);
  auto rb = mat_apply(b, probe, depth_cap);
  return is_zero_mod_w(ra[0] - rb[0], depth_cap) && is_zero_mod_w(ra[1] - rb[1], depth_cap);
}

LinOp op_subst_param(const LinOp& op, Sym p, const DiffExpr& value) {
  LinOp r = op;
  for (auto& term : r.terms)
    for (auto& f : term)
      if (f.kind == OpFactor::Kind::Mul) f.c = subst(f.c, p, value);
  return r;
}

LinOp2 mat_subst_param(const LinOp2& a, Sym p, const DiffExpr& value) {
  LinOp2 r;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) r.m[i][j] = op_subst_param(a.m[i][j], p, value);
  return r;
}

}  // namespace ghe
