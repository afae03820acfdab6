#include "ghe/wedge.hpp"

#include "ghe/diffalg.hpp"

#include <algorithm>
#include <atomic>
#include <functional>
#include <future>
#include <thread>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

namespace ghe {

namespace {

DiffExpr u_yz() { return jet_tx(Dep::U, 0, 0, 1, 1); }
DiffExpr u_xz() { return jet_tx(Dep::U, 0, 1, 0, 1); }

bool mi_lex_less(const MultiIndex& a, const MultiIndex& b) {
  for (int i = 0; i < 4; ++i)
    if (a.c[i] != b.c[i]) return a.c[i] < b.c[i];
  return false;
}

// ---- scalar content ---------------------------------------------------------
// Pull out of a coefficient the part that commutes with w: rational constants
// and polynomials in the formal parameters.  Used to scale wrap payloads to a
// canonical representative.

bool is_param_sym(Sym s) { return sym_kind(s) == symkind::ParamK; }

std::string mono_key(const Monomial& m) {
  std::ostringstream os;
  for (auto& [s, e] : m.f) os << s << ':' << e << ',';
  return os.str();
}

Rational rat_gcd(const Rational& a, const Rational& b) {
  using boost::multiprecision::gcd;
  using boost::multiprecision::lcm;
  BigInt na = numerator(a), nb = numerator(b);
  if (na < 0) na = -na;
  if (nb < 0) nb = -nb;
  BigInt da = denominator(a), db = denominator(b);
  return Rational(gcd(na, nb), lcm(da, db));
}

// content = (gcd over the jet-monomial groups of the parameter coefficient
// polynomials) * (rational content) * (sign of the leading coefficient)
Poly poly_jetfree_content(const Poly& p) {
  if (p.is_zero()) return Poly::constant(1);
  std::map<std::string, Poly> groups;
  for (auto& [m, r] : p.t) {
    Monomial par, rest;
    for (auto& [s, e] : m.f)
      (is_param_sym(s) ? par : rest).f.push_back({s, e});
    Poly piece;
    piece.t.push_back({par, r});
    auto it = groups.find(mono_key(rest));
    if (it == groups.end())
      groups.emplace(mono_key(rest), piece);
    else
      it->second = it->second + piece;
  }
  Poly g = Poly::zero();
  for (auto& [k, pp] : groups) {
    if (pp.is_zero()) continue;
    g = g.is_zero() ? pp : poly_gcd(g, pp);
  }
  if (g.is_zero() || g.is_constant()) g = Poly::constant(1);
  auto q = poly_divexact(p, g);
  if (!q) return Poly::constant(1);  // defensive; gcd construction makes this exact
  Rational rc = 0;
  for (auto& [m, r] : q->t) rc = (rc == 0) ? (r < 0 ? Rational(-r) : r) : rat_gcd(rc, r);
  if (rc == 0) rc = 1;
  if (!q->t.empty() && q->t.front().second < 0) rc = -rc;
  return poly_scale(g, rc);
}

// returns s with e = s * (e/s) and s free of jets; e is replaced by e/s
DiffExpr pull_scalar_content(DiffExpr& e) {
  if (e.is_zero()) return DiffExpr(1);
  DiffExpr s(poly_jetfree_content(e.num()), poly_jetfree_content(e.den()));
  if (s.is_zero()) return DiffExpr(1);
  e = e / s;
  return s;
}

}  // namespace

// ---- factors ---------------------------------------------------------------

static std::string payload_text(const WrapPayload& p) {
  std::ostringstream os;
  for (auto& [k, c] : p)
    os << (int)k.c[1] << (int)k.c[2] << (int)k.c[3] << '=' << to_text(c) << ';';
  return os.str();
}

std::string factor_text(const UniFactor& f) {
  std::ostringstream os;
  os << (f.base == UniBase::Eta ? 'E' : 'T');
  os << (int)f.d.c[1] << (int)f.d.c[2] << (int)f.d.c[3];
  if (f.wrapped) os << "W{" << payload_text(f.payload) << '}';
  return os.str();
}

bool factor_equal(const UniFactor& a, const UniFactor& b) {
  if (a.base != b.base || !(a.d == b.d) || a.wrapped != b.wrapped) return false;
  if (!a.wrapped) return true;
  if (a.payload.size() != b.payload.size()) return false;
  for (size_t i = 0; i < a.payload.size(); ++i) {
    if (!(a.payload[i].first == b.payload[i].first)) return false;
    if (!(a.payload[i].second == b.payload[i].second)) return false;
  }
  return true;
}

bool factor_less(const UniFactor& a, const UniFactor& b) {
  if (a.base != b.base) return a.base < b.base;
  if (a.d.order() != b.d.order()) return a.d.order() < b.d.order();
  if (a.wrapped != b.wrapped) return !a.wrapped;  // local before nonlocal
  if (!(a.d == b.d)) return mi_lex_less(a.d, b.d);
  if (!a.wrapped) return false;
  return payload_text(a.payload) < payload_text(b.payload);
}

UniFactor uni(UniBase b, int dx, int dy, int dz) {
  UniFactor f;
  f.base = b;
  f.d = mi(0, dx, dy, dz);
  return f;
}

UniFactor wrap(UniBase b, WrapPayload p, DiffExpr& scale) {
  std::map<std::string, std::pair<MultiIndex, DiffExpr>> acc;
  for (auto& [k, c] : p) {
    if (k.c[0] != 0) throw std::runtime_error("wrap payload carries a t-derivative");
    std::ostringstream os;
    os << (int)k.c[1] << (int)k.c[2] << (int)k.c[3];
    auto it = acc.find(os.str());
    if (it == acc.end())
      acc.emplace(os.str(), std::make_pair(k, c));
    else
      it->second.second += c;
  }
  WrapPayload q;
  for (auto& [key, kc] : acc)
    if (!kc.second.is_zero()) q.push_back(kc);
  UniFactor f;
  f.base = b;
  f.wrapped = true;
  if (q.empty()) {  // w^{-1}[0]: kill the term through the scale
    scale = DiffExpr(0);
    return f;
  }
  DiffExpr s = pull_scalar_content(q.front().second);
  for (size_t i = 1; i < q.size(); ++i) q[i].second = q[i].second / s;
  scale = scale * s;
  f.payload = q;
  return f;
}

// ---- wedge expressions -----------------------------------------------------

static std::string term_key(const std::vector<UniFactor>& fs) {
  std::string k;
  for (auto& f : fs) {
    k += factor_text(f);
    k += '^';
  }
  return k;
}

WedgeExpr wedge_normalize(const WedgeExpr& e) {
  std::map<std::string, WedgeTerm> acc;
  for (const auto& t : e.t) {
    if (t.c.is_zero()) continue;
    bool dead = false;
    for (auto& f : t.f)
      if (f.wrapped && f.payload.empty()) dead = true;
    if (dead) continue;
    std::vector<UniFactor> fs = t.f;
    int sign = 1;
    // insertion sort, counting transpositions
    for (size_t i = 1; i < fs.size() && !dead; ++i) {
      size_t j = i;
      while (j > 0 && factor_less(fs[j], fs[j - 1])) {
        std::swap(fs[j], fs[j - 1]);
        sign = -sign;
        --j;
      }
    }
    for (size_t i = 0; i + 1 < fs.size(); ++i)
      if (factor_equal(fs[i], fs[i + 1])) dead = true;
    if (dead) continue;
    DiffExpr c = (sign > 0) ? t.c : -t.c;
    std::string key = term_key(fs);
    auto it = acc.find(key);
    if (it == acc.end())
      acc.emplace(key, WedgeTerm{c, fs});
    else
      it->second.c += c;
  }
  WedgeExpr out;
  for (auto& [k, t] : acc)
    if (!t.c.is_zero()) out.t.push_back(t);
  return out;
}

WedgeExpr wedge_term(const DiffExpr& c, std::vector<UniFactor> fs) {
  WedgeExpr e;
  e.t.push_back(WedgeTerm{c, std::move(fs)});
  return wedge_normalize(e);
}

WedgeExpr operator+(const WedgeExpr& a, const WedgeExpr& b) {
  WedgeExpr e;
  e.t = a.t;
  e.t.insert(e.t.end(), b.t.begin(), b.t.end());
  return wedge_normalize(e);
}

WedgeExpr operator-(const WedgeExpr& a) {
  WedgeExpr e = a;
  for (auto& t : e.t) t.c = -t.c;
  return e;
}

WedgeExpr operator-(const WedgeExpr& a, const WedgeExpr& b) { return a + (-b); }

WedgeExpr operator*(const DiffExpr& c, const WedgeExpr& a) {
  WedgeExpr e = a;
  for (auto& t : e.t) t.c = c * t.c;
  return wedge_normalize(e);
}

WedgeExpr wedge(const WedgeExpr& a, const WedgeExpr& b) {
  WedgeExpr e;
  for (const auto& ta : a.t)
    for (const auto& tb : b.t) {
      WedgeTerm t;
      t.c = ta.c * tb.c;
      t.f = ta.f;
      t.f.insert(t.f.end(), tb.f.begin(), tb.f.end());
      e.t.push_back(std::move(t));
    }
  return wedge_normalize(e);
}

bool wedge_equal(const WedgeExpr& a, const WedgeExpr& b) {
  return wedge_normalize(a - b).is_zero();
}

std::string wedge_text(const WedgeExpr& e) {
  std::ostringstream os;
  for (const auto& t : e.t) {
    os << '[' << to_text(t.c) << "] ";
    for (size_t i = 0; i < t.f.size(); ++i)
      os << (i ? "^" : "") << factor_text(t.f[i]);
    os << "  ";
  }
  return os.str();
}

// ---- derivatives -----------------------------------------------------------

static WedgeExpr payload_expand(const UniFactor& f) {
  WedgeExpr e;
  for (auto& [k, c] : f.payload)
    e.t.push_back(WedgeTerm{c, {uni(f.base, k.c[1], k.c[2], k.c[3])}});
  return wedge_normalize(e);
}

WedgeExpr factor_deriv(const UniFactor& f, Axis ax) {
  if (ax.chart != Chart::TX || ax.id == kAxisT)
    throw std::runtime_error("uni-vector derivative needs a spatial TX axis");
  if (!f.wrapped || ax.id != kAxisX) {
    UniFactor g = f;
    g.d = f.d.plus(ax.id);
    return wedge_term(DiffExpr(1), {g});
  }
  // D_x w^{-1}[p] = p / u_yz + (u_xz / u_yz) (w^{-1}[p])_y, then restore the
  // outer y,z derivatives
  UniFactor base = f;
  base.d = mi(0, 0, 0, 0);
  UniFactor basey = base;
  basey.d = mi(0, 0, 1, 0);
  WedgeExpr e = (DiffExpr(1) / u_yz()) * payload_expand(base) +
                (u_xz() / u_yz()) * wedge_term(DiffExpr(1), {basey});
  for (int i = 0; i < f.d.c[2]; ++i) e = wedge_deriv(e, ax_y());
  for (int i = 0; i < f.d.c[3]; ++i) e = wedge_deriv(e, ax_z());
  return e;
}

WedgeExpr wedge_deriv(const WedgeExpr& e, Axis ax) {
  WedgeExpr out;
  for (const auto& t : e.t) {
    out.t.push_back(WedgeTerm{total_derivative(t.c, ax), t.f});
    for (size_t i = 0; i < t.f.size(); ++i) {
      WedgeExpr df = factor_deriv(t.f[i], ax);
      for (const auto& dt : df.t) {
        WedgeTerm nt;
        nt.c = t.c * dt.c;
        nt.f = t.f;
        nt.f[i] = dt.f[0];
        out.t.push_back(std::move(nt));
      }
    }
  }
  return wedge_normalize(out);
}

// ---- operator application --------------------------------------------------

WedgeExpr op_apply_wedge(const LinOp& op, const WedgeExpr& e) {
  WedgeExpr out;
  for (const auto& term : op.terms) {
    WedgeExpr cur = e;
    for (auto it = term.rbegin(); it != term.rend(); ++it) {
      switch (it->kind) {
        case OpFactor::Kind::Mul:
          cur = it->c * cur;
          break;
        case OpFactor::Kind::Diff:
          cur = wedge_deriv(cur, it->ax);
          break;
        case OpFactor::Kind::InvW: {
          // w^{-1} is additive, so each payload monomial becomes its own
          // single-entry wrap; merged payloads would hide cancellations
          WedgeExpr res;
          for (const auto& tt : cur.t) {
            if (tt.f.size() != 1)
              throw std::runtime_error("w^{-1} applied to a non-linear wedge");
            if (tt.f[0].wrapped)
              throw std::runtime_error("w^{-1} nesting depth exceeded");
            WrapPayload p = {{tt.f[0].d, tt.c}};
            DiffExpr sc(1);
            UniFactor f = wrap(tt.f[0].base, std::move(p), sc);
            res = res + wedge_term(sc, {f});
          }
          cur = res;
          break;
        }
      }
    }
    out = out + cur;
  }
  return out;
}

int eta_degree(const WedgeTerm& t) {
  int n = 0;
  for (auto& f : t.f) n += (f.base == UniBase::Eta) ? 1 : 0;
  return n;
}

int invw_degree(const WedgeTerm& t) {
  int n = 0;
  for (auto& f : t.f) n += f.wrapped ? 1 : 0;
  return n;
}

// ---- reduction modulo total divergences ------------------------------------

namespace {

using GroupKey = std::tuple<int, int, int, int>;  // degree, eta, pow(a), pow(b)

struct GroupResult {
  std::vector<WedgeTerm> residual;  // coefficients free of a and b
  std::map<int, std::pair<int, int>> per_invw;  // invw -> (initial, residual)
  bool skipped = false;
};

Poly poly_lcm(const Poly& a, const Poly& b) {
  if (a.is_constant()) return b;
  if (b.is_constant()) return a;
  Poly g = poly_gcd(a, b);
  auto q = poly_divexact(a, g);
  return q ? (*q) * b : a * b;
}

// split one normalized term by the monomials in the formal parameters a, b
void ab_split(const WedgeTerm& t, std::map<GroupKey, std::vector<WedgeTerm>>& groups) {
  Sym sa = sym_param(Param::Amix), sb = sym_param(Param::Bflow);
  for (Sym s : collect_syms(DiffExpr(t.c.den())))
    if (is_param_sym(s))
      throw std::runtime_error("parameter denominator in a wedge coefficient");
  std::map<std::pair<int, int>, Poly> parts;
  for (auto& [m, r] : t.c.num().t) {
    int pa = 0, pb = 0;
    Monomial rest;
    for (auto& [s, e] : m.f) {
      if (s == sa)
        pa = (int)e;
      else if (s == sb)
        pb = (int)e;
      else
        rest.f.push_back({s, e});
    }
    Poly piece;
    piece.t.push_back({rest, r});
    auto it = parts.find({pa, pb});
    if (it == parts.end())
      parts.emplace(std::make_pair(pa, pb), piece);
    else
      it->second = it->second + piece;
  }
  for (auto& [ab, num] : parts) {
    if (num.is_zero()) continue;
    WedgeTerm nt;
    nt.c = DiffExpr(num, t.c.den());
    nt.f = t.f;
    groups[{(int)t.f.size(), eta_degree(t), ab.first, ab.second}].push_back(std::move(nt));
  }
}

// integrate by parts until the minimal factor of every term is underived
std::vector<WedgeTerm> strip_pivots(std::vector<WedgeTerm> work) {
  std::map<std::string, WedgeTerm> done;
  long guard = 0;
  while (!work.empty()) {
    if (++guard > 4000000) throw std::runtime_error("pivot stripping did not settle");
    WedgeTerm t = std::move(work.back());
    work.pop_back();
    const UniFactor& piv = t.f.front();
    if (piv.d.order() == 0) {
      std::string key = term_key(t.f);
      auto it = done.find(key);
      if (it == done.end())
        done.emplace(key, t);
      else
        it->second.c += t.c;
      continue;
    }
    int axid = piv.d.c[1] ? kAxisX : (piv.d.c[2] ? kAxisY : kAxisZ);
    Axis ax{Chart::TX, (std::uint8_t)axid};
    UniFactor G = piv;
    G.d.c[axid]--;
    // c D_ax(G)^rest = div - D_ax(c) G^rest - sum_j c G^D_ax(f_j)^rest
    WedgeExpr spawned;
    {
      WedgeTerm nt;
      nt.c = -total_derivative(t.c, ax);
      nt.f = t.f;
      nt.f[0] = G;
      spawned.t.push_back(std::move(nt));
    }
    for (size_t j = 1; j < t.f.size(); ++j) {
      WedgeExpr df = factor_deriv(t.f[j], ax);
      for (const auto& dt : df.t) {
        WedgeTerm nt;
        nt.c = -t.c * dt.c;
        nt.f = t.f;
        nt.f[0] = G;
        nt.f[j] = dt.f[0];
        spawned.t.push_back(std::move(nt));
      }
    }
    for (auto& nt : wedge_normalize(spawned).t) work.push_back(nt);
  }
  std::vector<WedgeTerm> out;
  for (auto& [k, t] : done)
    if (!t.c.is_zero()) out.push_back(t);
  return out;
}

// ---- divergence certificate search -----------------------------------------

// coordinates are identified by a 64-bit FNV-1a hash of their label; a hash
// collision can at worst let the linear solve propose a bogus combination,
// which the full verification pass at the end of xdiv_round then rejects
std::uint64_t coord_id(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

using SparseVec = std::map<std::uint64_t, Rational>;

// Gaussian elimination over Q with an augmented bookkeeping part so a
// successful membership also yields the combination coefficients
bool in_span(const SparseVec& target, std::vector<SparseVec>& cols, SparseVec* lambda = nullptr) {
  struct Row {
    SparseVec v;    // coordinates, pivot on the smallest index
    SparseVec aug;  // composition in terms of the original columns
  };
  std::map<int, Row> pivots;
  auto reduce = [&](Row& r) {
    while (!r.v.empty()) {
      auto lead = r.v.begin();
      auto p = pivots.find(lead->first);
      if (p == pivots.end()) return;
      Rational f = lead->second;
      for (auto& [i, x] : p->second.v) {
        r.v[i] -= f * x;
        if (r.v[i] == 0) r.v.erase(i);
      }
      for (auto& [i, x] : p->second.aug) {
        r.aug[i] -= f * x;
        if (r.aug[i] == 0) r.aug.erase(i);
      }
    }
  };
  for (size_t m = 0; m < cols.size(); ++m) {
    Row r;
    r.v = cols[m];
    r.aug[(std::uint64_t)m] = Rational(1);
    reduce(r);
    if (r.v.empty()) continue;
    Rational lead = r.v.begin()->second;
    for (auto& [i, x] : r.v) x /= lead;
    for (auto& [i, x] : r.aug) x /= lead;
    pivots.emplace(r.v.begin()->first, std::move(r));
  }
  Row t;
  t.v = target;
  reduce(t);
  if (!t.v.empty()) return false;
  if (lambda) {
    lambda->clear();
    for (auto& [m, x] : t.aug) (*lambda)[m] = -x;  // target = sum lambda_m cols_m
  }
  return true;
}

int cert_debug() {
  static int on = [] {
    const char* e = std::getenv("GHE_REDUCE_DEBUG");
    return e ? std::atoi(e) : 0;
  }();
  return on;
}

// drop candidate columns that contain a coordinate supported nowhere else and
// absent from the target; such columns can only carry weight zero
void prune_columns(const SparseVec& target, std::vector<SparseVec>& cols,
                   std::vector<int>* ids = nullptr) {
  bool changed = true;
  while (changed) {
    changed = false;
    std::map<std::uint64_t, int> support;
    for (auto& c : cols)
      for (auto& [i, r] : c) support[i]++;
    std::vector<SparseVec> keep;
    std::vector<int> kid;
    keep.reserve(cols.size());
    for (size_t m = 0; m < cols.size(); ++m) {
      bool dead = false;
      for (auto& [i, r] : cols[m])
        if (support[i] == 1 && !target.count(i)) {
          dead = true;
          break;
        }
      if (dead) {
        changed = true;
      } else {
        keep.push_back(std::move(cols[m]));
        if (ids) kid.push_back((*ids)[m]);
      }
    }
    cols = std::move(keep);
    if (ids) *ids = std::move(kid);
  }
}

// ---- Euler operators --------------------------------------------------------
//
// Within one term every factor is a y,z-derivative of a "generator": a bare
// uni-vector carrying only x-derivatives, or a wrap (whose payload the outer
// derivatives never touch).  Over these generators D_y and D_z act freely, so
// an expression is D_y(..) + D_z(..) exactly when every Euler operator -- one
// per generator, plus one per u/v jet family in the coefficients -- vanishes.
// Only the D_x direction needs an explicit potential, found by a linear solve.

// generator label: base letter, x-part of the outer derivative, payload
std::string factor_gen(const UniFactor& f) {
  std::ostringstream os;
  os << (f.base == UniBase::Eta ? 'E' : 'T') << (int)f.d.c[1];
  if (f.wrapped) os << 'W' << payload_text(f.payload);
  return os.str();
}

using EulerMap = std::map<std::string, WedgeExpr>;

void euler_accumulate(EulerMap& E, const std::string& key, WedgeExpr contrib, int ny, int nz) {
  for (int n = 0; n < ny; ++n) contrib = wedge_deriv(contrib, Axis{Chart::TX, (std::uint8_t)kAxisY});
  for (int n = 0; n < nz; ++n) contrib = wedge_deriv(contrib, Axis{Chart::TX, (std::uint8_t)kAxisZ});
  if ((ny + nz) % 2) contrib = -contrib;
  auto it = E.find(key);
  if (it == E.end())
    E.emplace(key, std::move(contrib));
  else  // raw append; euler_all normalizes each entry once at the end
    it->second.t.insert(it->second.t.end(), contrib.t.begin(), contrib.t.end());
}

EulerMap euler_all(const WedgeExpr& e, bool coeff_sites = true) {
  EulerMap E;
  for (const auto& t : e.t) {
    for (size_t i = 0; i < t.f.size(); ++i) {
      const UniFactor& f = t.f[i];
      std::vector<UniFactor> rest;
      for (size_t j = 0; j < t.f.size(); ++j)
        if (j != i) rest.push_back(t.f[j]);
      DiffExpr c = (i % 2) ? -t.c : t.c;  // left derivative past i odd factors
      euler_accumulate(E, "~" + factor_gen(f), wedge_term(c, rest), f.d.c[2], f.d.c[3]);
    }
    if (!coeff_sites) continue;
    for (Sym s : collect_syms(t.c)) {
      if (!sym_is_jet(s) || jet_chart(s) != Chart::TX) continue;
      Dep d = jet_dep(s);
      if (d != Dep::U && d != Dep::V) continue;
      MultiIndex k = jet_index(s);
      DiffExpr dc = partial(t.c, s);
      if (dc.is_zero()) continue;
      std::ostringstream os;
      os << (d == Dep::U ? 'u' : 'v') << (int)k.c[1];
      euler_accumulate(E, os.str(), wedge_term(dc, t.f), k.c[2], k.c[3]);
    }
  }
  for (auto it = E.begin(); it != E.end();) {
    it->second = wedge_normalize(it->second);
    if (it->second.is_zero())
      it = E.erase(it);
    else
      ++it;
  }
  return E;
}

void euler_feed_den(const EulerMap& E, std::map<std::string, Poly>& cden) {
  for (auto& [g, ex] : E)
    for (auto& t : ex.t) {
      std::string key = g + "|" + term_key(t.f);
      auto it = cden.find(key);
      if (it == cden.end())
        cden.emplace(key, t.c.den());
      else
        it->second = poly_lcm(it->second, t.c.den());
    }
}

void euler_coordinates(const EulerMap& E, const std::map<std::string, Poly>& cden,
                       SparseVec& out) {
  for (auto& [g, ex] : E)
    for (auto& t : ex.t) {
      std::string key = g + "|" + term_key(t.f);
      const Poly& L = cden.at(key);
      auto q = poly_divexact(L, t.c.den());
      if (!q) throw std::runtime_error("euler coordinate denominator mismatch");
      Poly n = t.c.num() * (*q);
      for (auto& [m, r] : n.t) {
        std::uint64_t cid = coord_id(key + "|" + mono_key(m));
        out[cid] += r;
        if (out[cid] == 0) out.erase(cid);
      }
    }
}

// the three-fold grading by derivative counts: a jet u/v_{abc} weighs
// (a,b,c), a denominator subtracts, an outer derivative adds its axis, and a
// w^{-1} wrap weighs (-1,-1,-1) plus its payload; total derivatives are
// homogeneous, so a potential's weight is pinned by the residual's
struct Weight {
  int w[3] = {0, 0, 0};
  bool ok = true;  // false when a piece fails to be homogeneous
  Weight& operator+=(const Weight& o) {
    for (int i = 0; i < 3; ++i) w[i] += o.w[i];
    ok = ok && o.ok;
    return *this;
  }
  Weight operator-() const {
    Weight r = *this;
    for (int i = 0; i < 3; ++i) r.w[i] = -r.w[i];
    return r;
  }
  bool operator==(const Weight& o) const {
    return ok && o.ok && w[0] == o.w[0] && w[1] == o.w[1] && w[2] == o.w[2];
  }
};

Weight weight_mono(const Monomial& m) {
  Weight r;
  for (auto& [s, e] : m.f) {
    if (!sym_is_jet(s) || jet_chart(s) != Chart::TX) continue;
    MultiIndex k = jet_index(s);
    for (int i = 0; i < 3; ++i) r.w[i] += (int)e * k.c[i + 1];
  }
  return r;
}

Weight weight_poly(const Poly& p) {
  Weight r;
  if (p.is_zero()) return r;
  r = weight_mono(p.t.front().first);
  for (auto& [m, c] : p.t) {
    Weight w = weight_mono(m);
    if (!(w == r)) r.ok = false;
  }
  return r;
}

Weight weight_coeff(const DiffExpr& c) {
  Weight r = weight_poly(c.num());
  r += -weight_poly(c.den());
  return r;
}

Weight weight_factor(const UniFactor& f) {
  Weight r;
  for (int i = 0; i < 3; ++i) r.w[i] = f.d.c[i + 1];
  if (f.wrapped) {
    for (int i = 0; i < 3; ++i) r.w[i] -= 1;
    Weight pw;
    bool first = true;
    for (auto& [k, ck] : f.payload) {
      Weight e = weight_coeff(ck);
      for (int i = 0; i < 3; ++i) e.w[i] += k.c[i + 1];
      if (first) {
        pw = e;
        first = false;
      } else if (!(e == pw)) {
        pw.ok = false;
      }
    }
    r += pw;
  }
  return r;
}

Weight weight_term(const WedgeTerm& t) {
  Weight r = weight_coeff(t.c);
  for (auto& f : t.f) r += weight_factor(f);
  return r;
}

// structural superset of the generator|factor-list keys euler_all(., false)
// can produce; coefficients are ignored, so a listed key may cancel exactly
void euler_skeleton(const WedgeExpr& V, std::set<std::string>& out) {
  for (const auto& t : V.t) {
    for (size_t i = 0; i < t.f.size(); ++i) {
      const UniFactor& f = t.f[i];
      std::vector<UniFactor> rest;
      for (size_t j = 0; j < t.f.size(); ++j)
        if (j != i) rest.push_back(t.f[j]);
      std::string gen = "~" + factor_gen(f);
      // distribute the strip derivatives over the coefficient and the rest
      std::function<void(size_t, int, int)> go = [&](size_t j, int ry, int rz) {
        if (j == rest.size()) {  // leftover derivatives land on the coefficient
          std::vector<UniFactor> fs = rest;
          std::sort(fs.begin(), fs.end(), factor_less);
          bool dup = false;
          for (size_t m = 1; m < fs.size(); ++m)
            if (factor_equal(fs[m - 1], fs[m])) dup = true;
          if (!dup) out.insert(gen + "|" + term_key(fs));
          return;
        }
        for (int ay = 0; ay <= ry; ++ay)
          for (int az = 0; az <= rz; ++az) {
            UniFactor save = rest[j];
            rest[j].d.c[2] += (std::uint8_t)ay;
            rest[j].d.c[3] += (std::uint8_t)az;
            go(j + 1, ry - ay, rz - az);
            rest[j] = save;
          }
      };
      go(0, f.d.c[2], f.d.c[3]);
    }
  }
}

bool xdiv_round(const std::vector<WedgeTerm>& residual, int round) {
  size_t degree = residual.front().f.size();

  // factor pool: residual factors, their underived and lowered companions
  // (candidates only need x-lowerings -- the y,z directions are already
  // quotiented out -- but lowerings also widen the net on later rounds)
  std::map<std::string, UniFactor> pool;
  auto add_factor = [&](const UniFactor& f) { pool.emplace(factor_text(f), f); };
  auto add_lowerings = [&](const UniFactor& f) {
    for (int ax = 1; ax < 4; ++ax)
      if (f.d.c[ax] > 0) {
        UniFactor g = f;
        g.d.c[ax]--;
        add_factor(g);
      }
  };
  for (auto& t : residual)
    for (auto& f : t.f) {
      add_factor(f);
      add_lowerings(f);
      UniFactor g = f;
      g.d = mi(0, 0, 0, 0);
      add_factor(g);
    }
  for (int extra = 0; extra < round; ++extra) {
    auto snapshot = pool;
    for (auto& [k, f] : snapshot) add_lowerings(f);
  }
  std::vector<UniFactor> factors;
  for (auto& [k, f] : pool) factors.push_back(f);

  // coefficient pool: low-order building blocks first; the residual's own
  // coefficients -- end products of the stripping, rarely potentials -- only
  // as a last resort
  std::map<std::string, DiffExpr> cpool;
  auto add_coeff = [&](const DiffExpr& c) {
    if (!c.is_zero()) cpool.emplace(to_text(c), c);
  };
  DiffExpr uy = u_yz();
  std::vector<DiffExpr> blocks = {DiffExpr(1), jet_tx(Dep::U, 0, 1, 1, 0),
                                  jet_tx(Dep::U, 0, 1, 0, 1), jet_tx(Dep::V, 0, 0, 1, 0),
                                  jet_tx(Dep::V, 0, 0, 0, 1)};
  for (int k = 0; k <= 3; ++k)
    for (auto& bl : blocks) add_coeff(bl / uy.pow(k));
  // positive powers of u_yz matter too: moving a factor in and out of the
  // nonlocal wrap trades f ^ w^{-1}g + w^{-1}f ^ g for an x-derivative of
  // u_yz w^{-1}f ^ w^{-1}g (modulo a y-divergence), and the matching
  // potential carries u_yz upstairs
  for (int k = 1; k <= 2; ++k)
    for (auto& bl : blocks) add_coeff(bl * uy.pow(k));
  if (round >= 1) {
    // second tier: the jets the residual coefficients are built from, and
    // pair products of the blocks
    std::set<std::string> seen;
    for (auto& t : residual)
      for (Sym s : collect_syms(DiffExpr(t.c.num()))) {
        if (!sym_is_jet(s) || jet_chart(s) != Chart::TX) continue;
        if (jet_index(s).order() > 3) continue;
        if (seen.insert(sym_name(s)).second) blocks.push_back(DiffExpr::var(s));
      }
    for (size_t i = 0; i < blocks.size(); ++i)
      for (size_t j = i; j < blocks.size(); ++j) {
        for (int k = 0; k <= 4; ++k) add_coeff(blocks[i] * blocks[j] / uy.pow(k));
        add_coeff(blocks[i] * blocks[j] * uy);
      }
  }
  if (round >= 2) {
    for (auto& t : residual) add_coeff(t.c);
    std::map<std::string, DiffExpr> snap = cpool;
    for (auto& [k, c] : snap) {
      add_coeff(c * uy);
      add_coeff(c / uy);
    }
  }

  size_t eval_budget = 40000 + 40000 * (size_t)round;  // exact Euler evaluations
  if (cert_debug())
    fprintf(stderr, "[xdiv] round %d: residual %zu, pool %zu factors, %zu coeffs\n", round,
            residual.size(), factors.size(), cpool.size());

  // candidate potentials: coefficient x ordered factor subset whose minimal
  // factor is underived (candidates differing by a y,z-integration by parts
  // contribute the same column, so only stripped shapes are enumerated)
  std::vector<std::vector<UniFactor>> combos;
  std::vector<size_t> idx(degree);
  std::function<void(size_t, size_t)> rec = [&](size_t start, size_t depth) {
    if (depth == degree) {
      std::vector<UniFactor> fs;
      for (size_t i : idx) fs.push_back(factors[i]);
      std::sort(fs.begin(), fs.end(), factor_less);
      if (fs.front().d.order() == 0) combos.push_back(std::move(fs));
      return;
    }
    for (size_t i = start; i < factors.size(); ++i) {
      idx[depth] = i;
      rec(i + 1, depth + 1);
    }
  };
  rec(0, 0);

  // solve on the uni-vector (odd generator) components only -- far cheaper
  // than carrying the coefficient-site rows -- then verify the recovered
  // combination against the full Euler test, which restores soundness
  WedgeExpr re;
  re.t = residual;
  EulerMap ER = euler_all(re, /*coeff_sites=*/false);
  std::vector<std::pair<std::string, DiffExpr>> trows;
  std::set<std::uint64_t> tkeys;
  for (auto& [g, ex] : ER)
    for (auto& t : ex.t) {
      std::string key = g + "|" + term_key(t.f);
      tkeys.insert(coord_id(key));
      trows.emplace_back(std::move(key), t.c);
    }

  // homogeneity: when the whole residual carries one weight, any useful
  // potential must carry exactly that weight minus one x
  Weight wtarget = weight_term(residual.front());
  for (auto& t : residual)
    if (!(weight_term(t) == wtarget)) wtarget.ok = false;
  wtarget.w[0] -= 1;

  // first pass is skeleton-only: the structural key superset of D_x(c * fs)
  // depends on the factor list alone (one x-bump per factor, plus the list
  // itself when the derivative lands on the coefficient), so candidates
  // sharing a factor list share one key set and nothing heavy is materialized
  // before the exact Euler work starts
  struct ComboGroup {
    const std::vector<UniFactor>* fs = nullptr;
    std::vector<const DiffExpr*> coeffs;
    std::set<std::uint64_t> keys;  // hashed key superset
    size_t outside = 0;            // keys the target never touches
  };
  std::vector<ComboGroup> groups;
  size_t n_cands = 0;
  for (auto& fs : combos) {
    Weight wf;
    for (auto& f : fs) wf += weight_factor(f);
    ComboGroup g;
    g.fs = &fs;
    std::vector<std::pair<size_t, const DiffExpr*>> ranked;
    for (auto& [ck, c] : cpool) {
      if (wtarget.ok) {
        Weight wb = wf;
        wb += weight_coeff(c);
        if (!(wb == wtarget)) continue;
      }
      ranked.emplace_back(ck.size(), &c);
    }
    if (ranked.empty()) continue;
    // simple coefficients first: the budgeted evaluation below walks each
    // group front to back
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](auto& a, auto& b) { return a.first < b.first; });
    for (auto& [len, c] : ranked) g.coeffs.push_back(c);
    // unit-coefficient derivative: D_x(c * fs) = (D_x c) * fs + c * D_x(fs),
    // and scaling by a common coefficient cannot create new factor lists, so
    // this key set is a superset for every coefficient in the group
    WedgeExpr sk = wedge_deriv(wedge_term(DiffExpr(1), fs), Axis{Chart::TX, (std::uint8_t)kAxisX});
    WedgeTerm base;
    base.c = DiffExpr(1);
    base.f = fs;
    sk.t.push_back(base);
    std::set<std::string> named;
    euler_skeleton(sk, named);
    for (auto& k : named) g.keys.insert(coord_id(k));
    if (g.keys.empty()) continue;
    for (auto& k : g.keys)
      if (!tkeys.count(k)) g.outside++;
    n_cands += g.coeffs.size();
    groups.push_back(std::move(g));
  }

  // key-level pruning: a candidate whose support reaches a key no other
  // candidate or the target touches can only carry weight zero
  bool changed = true;
  while (changed) {
    changed = false;
    std::map<std::uint64_t, size_t> supp;
    for (auto& g : groups)
      for (auto& k : g.keys) supp[k] += g.coeffs.size();
    std::vector<ComboGroup> keep;
    keep.reserve(groups.size());
    for (auto& g : groups) {
      bool dead = false;
      for (auto& k : g.keys)
        if (supp[k] == 1 && !tkeys.count(k)) {
          dead = true;
          break;
        }
      if (dead)
        changed = true;
      else
        keep.push_back(std::move(g));
    }
    groups = std::move(keep);
  }
  // a target key no candidate skeleton can reach dooms the whole round
  // (coefficients never change the key set), so bail before any exact work
  {
    std::set<std::uint64_t> reach;
    for (auto& g : groups)
      for (auto& k : g.keys) reach.insert(k);
    size_t missing = 0;
    for (auto& k : tkeys)
      if (!reach.count(k)) missing++;
    if (missing) {
      if (cert_debug())
        fprintf(stderr, "[xdiv] round %d: %zu of %zu target keys unreachable, abandoning\n",
                round, missing, tkeys.size());
      return false;
    }
  }
  // candidates that overlap the target directly go first; everything else is
  // ranked by how far it strays, so the chunked solve below has a chance to
  // finish long before the evaluation budget is spent
  std::stable_sort(groups.begin(), groups.end(), [](const ComboGroup& a, const ComboGroup& b) {
    if (a.outside != b.outside) return a.outside < b.outside;
    return a.keys.size() < b.keys.size();
  });
  struct CandRef {
    const ComboGroup* g = nullptr;
    const DiffExpr* c = nullptr;
  };
  std::vector<CandRef> cands;
  cands.reserve(n_cands);
  for (auto& g : groups)
    for (auto* c : g.coeffs) cands.push_back({&g, c});
  // coverage guard: the budgeted prefix must contain witnesses for every
  // reachable target key, or the round aborts on the first uncovered
  // coordinate; pull a handful of touchers per key to the front
  {
    std::map<std::uint64_t, size_t> want;
    for (auto& g : groups)
      for (auto& k : g.keys)
        if (tkeys.count(k)) want.emplace(k, 0);
    std::vector<CandRef> head;
    head.reserve(cands.size());
    std::vector<char> taken(cands.size(), 0);
    for (size_t m = 0; m < cands.size(); ++m) {
      bool pull = false;
      for (auto& k : cands[m].g->keys) {
        auto it = want.find(k);
        if (it != want.end() && it->second < 24) {
          it->second++;
          pull = true;
        }
      }
      if (pull) {
        head.push_back(cands[m]);
        taken[m] = 1;
      }
    }
    for (size_t m = 0; m < cands.size(); ++m)
      if (!taken[m]) head.push_back(cands[m]);
    cands = std::move(head);
  }
  if (cert_debug())
    fprintf(stderr, "[xdiv] round %d: %zu candidates after key pruning\n", round, cands.size());

  // second pass, chunked: evaluate candidates exactly in priority order, keep
  // only the flattened (key, coefficient) rows, and try the span test after
  // every chunk -- memory stays bounded by one chunk of live expressions and
  // the search exits as soon as a combination verifies
  auto rebuild = [&](const CandRef& cd) {
    WedgeExpr P = wedge_term(*cd.c, *cd.g->fs);
    if (P.is_zero()) return WedgeExpr{};
    return wedge_deriv(P, Axis{Chart::TX, (std::uint8_t)kAxisX});
  };
  // denominators in this calculus are single monomials (rational multiples of
  // u_yz powers), so every row embeds linearly into coordinates indexed by the
  // euler key plus a signed-exponent monomial -- the numerator monomial divided
  // by the denominator monomial -- with no common-denominator bookkeeping
  auto coords_of = [&](const std::vector<std::pair<std::string, DiffExpr>>& rows,
                       std::map<std::uint64_t, std::uint64_t>* keyof) {
    SparseVec out;
    for (auto& [key, c] : rows) {
      const Poly& dn = c.den();
      if (dn.t.size() != 1)
        throw std::runtime_error("non-monomial denominator in an euler row");
      const Monomial& dm = dn.t.front().first;
      const Rational& dr = dn.t.front().second;
      for (auto& [m, r] : c.num().t) {
        std::ostringstream os;
        size_t i = 0, j = 0;
        while (i < m.f.size() || j < dm.f.size()) {
          if (j == dm.f.size() ||
              (i < m.f.size() && sym_less(m.f[i].first, dm.f[j].first))) {
            os << m.f[i].first << ':' << (long long)m.f[i].second << ',';
            ++i;
          } else if (i == m.f.size() || sym_less(dm.f[j].first, m.f[i].first)) {
            os << dm.f[j].first << ':' << -(long long)dm.f[j].second << ',';
            ++j;
          } else {
            long long e = (long long)m.f[i].second - (long long)dm.f[j].second;
            if (e) os << m.f[i].first << ':' << e << ',';
            ++i;
            ++j;
          }
        }
        std::uint64_t cid = coord_id(key + "|" + os.str());
        out[cid] += r / dr;
        if (out[cid] == 0) out.erase(cid);
        if (keyof) (*keyof)[cid] = coord_id(key);
      }
    }
    return out;
  };
  std::map<std::uint64_t, std::uint64_t> tkey_of;  // target coordinate -> its euler key
  SparseVec target = coords_of(trows, &tkey_of);

  std::vector<size_t> candids;  // candidate index behind each kept column
  std::vector<SparseVec> cols;
  std::set<std::uint64_t> colsupp;
  const size_t chunk = 1024;
  for (size_t start = 0; start < cands.size() && start < eval_budget;) {
    size_t stop = std::min({start + chunk, cands.size(), eval_budget});
    std::vector<SparseVec> fresh(stop - start);
    {
      std::atomic<size_t> next{start};
      auto worker = [&]() {
        for (size_t m = next.fetch_add(1); m < stop; m = next.fetch_add(1)) {
          WedgeExpr V = rebuild(cands[m]);
          if (V.is_zero()) continue;
          EulerMap M = euler_all(V, /*coeff_sites=*/false);
          std::vector<std::pair<std::string, DiffExpr>> rows;
          for (auto& [g, ex] : M)
            for (auto& t : ex.t) rows.emplace_back(g + "|" + term_key(t.f), std::move(t.c));
          fresh[m - start] = coords_of(rows, nullptr);
        }
      };
      unsigned n = std::min(6u, std::max(1u, std::thread::hardware_concurrency() - 2));
      std::vector<std::thread> ths;
      for (unsigned i = 1; i < n; ++i) ths.emplace_back(worker);
      worker();
      for (auto& th : ths) th.join();
    }
    size_t first_new = cols.size();
    for (size_t m = 0; m < fresh.size(); ++m)
      if (!fresh[m].empty()) {
        candids.push_back(start + m);
        for (auto& [i, r] : fresh[m]) colsupp.insert(i);
        cols.push_back(std::move(fresh[m]));
      }
    if (cols.size() == first_new) {  // chunk contributed nothing
      start = stop;
      continue;
    }
    // necessary condition before the (costly) elimination: every target
    // coordinate must be reachable by some column; while some are not, spend
    // the budget only on candidates whose skeletons touch the uncovered keys
    std::set<std::uint64_t> want;
    for (auto& [i, r] : target)
      if (!colsupp.count(i)) want.insert(tkey_of.at(i));
    if (!want.empty()) {
      if (cert_debug() > 1 && stop + chunk >= std::min(cands.size(), eval_budget)) {
        std::map<std::uint64_t, std::string> keyname;
        for (auto& [key, c] : trows) keyname[coord_id(key)] = key;
        for (auto k : want)
          fprintf(stderr, "[xdiv]   uncovered: %s\n", keyname[k].c_str());
      }
      // exhaust the scarcest uncovered key first: queue every remaining
      // candidate whose skeleton touches it.  Either the key gets covered, or
      // its touchers run out -- and a key no remaining candidate can touch is
      // provably unreachable, so the round aborts without burning the budget
      std::map<std::uint64_t, size_t> avail;
      for (auto k : want) avail[k] = 0;
      for (auto it = cands.begin() + stop; it != cands.end(); ++it)
        for (auto& k : it->g->keys) {
          auto q = avail.find(k);
          if (q != avail.end()) q->second++;
        }
      std::uint64_t scarcest = 0;
      size_t nmin = SIZE_MAX;
      bool unreachable = false;
      for (auto& [k, n] : avail) {
        if (n == 0) unreachable = true;
        if (n < nmin) {
          nmin = n;
          scarcest = k;
        }
      }
      if (unreachable) {
        if (cert_debug()) {
          size_t gone = 0;
          for (auto& [k, n] : avail) gone += (n == 0);
          fprintf(stderr,
                  "[xdiv] round %d: %zu evaluated, %zu target keys out of reach, abandoning\n",
                  round, stop, gone);
          if (cert_debug() > 1) {
            std::map<std::uint64_t, std::string> keyname;
            for (auto& [key, c] : trows) keyname[coord_id(key)] = key;
            for (auto& [k, n] : avail)
              if (n == 0)
                fprintf(stderr, "[xdiv]   out of reach: %s\n", keyname[k].c_str());
          }
        }
        return false;
      }
      std::vector<CandRef> sel, rest;
      rest.reserve(cands.size() - stop);
      for (auto it = cands.begin() + stop; it != cands.end(); ++it) {
        bool take = false;
        for (auto& k : it->g->keys)
          if (k == scarcest) take = true;
        (take ? sel : rest).push_back(*it);
      }
      std::copy(rest.begin(), rest.end(),
                std::copy(sel.begin(), sel.end(), cands.begin() + stop));
      if (cert_debug())
        fprintf(stderr,
                "[xdiv] round %d: %zu evaluated, %zu target keys uncovered, scarcest has %zu touchers\n",
                round, stop, want.size(), nmin);
      start = stop;
      continue;
    }
    SparseVec t2 = target;
    std::vector<SparseVec> c2;
    std::vector<int> ids;
    for (size_t m = 0; m < cols.size(); ++m)
      if (!cols[m].empty()) {
        c2.push_back(cols[m]);
        ids.push_back((int)m);
      }
    prune_columns(t2, c2, &ids);
    SparseVec lambda;
    bool ok = in_span(t2, c2, &lambda);
    if (cert_debug())
      fprintf(stderr, "[xdiv] round %d: %zu evaluated, %zu vectors after pruning, target %zu coords -> %s\n",
              round, stop, c2.size(), t2.size(), ok ? "solved" : "unsolved");
    if (ok) {
      WedgeExpr check = re;
      for (auto& [m, x] : lambda)
        check = check - DiffExpr(x) * rebuild(cands[candids[ids[m]]]);
      if (euler_all(check).empty()) return true;
      if (cert_debug())
        fprintf(stderr, "[xdiv] round %d: combination failed full verification\n", round);
    }
    start = stop;
  }
  return false;
}

bool divergence_certificate(const std::vector<WedgeTerm>& residual, int max_rounds) {
  if (residual.empty()) return true;
  size_t degree = residual.front().f.size();
  for (auto& t : residual)
    if (t.f.size() != degree) return false;
  WedgeExpr re;
  re.t = residual;
  if (cert_debug()) fprintf(stderr, "[xdiv] zero test on %zu terms\n", residual.size());
  if (euler_all(re).empty()) return true;  // a plain y,z-divergence
  if (cert_debug()) fprintf(stderr, "[xdiv] zero test: nonzero, searching\n");
  for (int round = 0; round < max_rounds; ++round)
    if (xdiv_round(residual, round)) return true;
  return false;
}

GroupResult reduce_group(std::vector<WedgeTerm> terms, int max_rounds) {
  GroupResult gr;
  for (auto& t : terms) gr.per_invw[invw_degree(t)].first++;
  std::vector<WedgeTerm> residual = strip_pivots(std::move(terms));
  if (!residual.empty()) {
    bool local = true;
    for (auto& t : residual)
      for (auto& f : t.f) local = local && !f.wrapped;
    bool gone = false;
    if (local) {
      // the polarization oracle is complete on local multi-vectors
      WedgeExpr re;
      re.t = residual;
      gone = divergence_bruteforce(re);
    } else {
      gone = divergence_certificate(residual, max_rounds);
    }
    if (gone) residual.clear();
  }
  for (auto& t : residual) gr.per_invw[invw_degree(t)].second++;
  gr.residual = std::move(residual);
  return gr;
}

}  // namespace

ReduceResult reduce_mod_divergence_traced(const WedgeExpr& e0, bool fail_fast, int max_rounds) {
  WedgeExpr e = wedge_normalize(e0);
  std::map<GroupKey, std::vector<WedgeTerm>> groups;
  for (const auto& t : e.t) ab_split(t, groups);

  // bounded worker pool: each group can hold sizeable intermediate state, so
  // running them all at once is a memory hazard
  std::vector<std::pair<GroupKey, std::vector<WedgeTerm>>> work(groups.begin(), groups.end());
  std::vector<GroupResult> results(work.size());
  {
    std::atomic<size_t> next{0};
    std::atomic<bool> bail{false};
    auto run = [&]() {
      for (size_t i = next.fetch_add(1); i < work.size(); i = next.fetch_add(1)) {
        if (fail_fast && bail.load()) {
          results[i].skipped = true;
          for (auto& t : work[i].second) results[i].per_invw[invw_degree(t)].first++;
          continue;
        }
        results[i] = reduce_group(work[i].second, max_rounds);
        if (!results[i].residual.empty()) bail.store(true);
      }
    };
    unsigned n = std::min<unsigned>(3, std::max(1u, std::thread::hardware_concurrency()));
    std::vector<std::thread> ths;
    for (unsigned i = 1; i < n && i < work.size(); ++i) ths.emplace_back(run);
    run();
    for (auto& th : ths) th.join();
  }

  ReduceResult rr;
  for (size_t wi = 0; wi < work.size(); ++wi) {
    GroupResult& gr = results[wi];
    auto [deg, eta, pa, pb] = work[wi].first;
    DiffExpr abmono = param(Param::Amix).pow(pa) * param(Param::Bflow).pow(pb);
    for (auto& [invw, counts] : gr.per_invw) {
      CellTrace ct;
      std::ostringstream os;
      os << "eta" << eta << "|a" << pa << "b" << pb << "|invw" << invw;
      ct.label = os.str();
      ct.initial_terms = counts.first;
      ct.residual_terms = counts.second;
      ct.skipped = gr.skipped;
      rr.cells.push_back(ct);
    }
    for (auto& t : gr.residual) {
      WedgeTerm nt = t;
      nt.c = abmono * nt.c;
      rr.residual.t.push_back(nt);
    }
    if (!gr.residual.empty()) {
      WedgeExpr re;
      re.t = gr.residual;
      for (auto& ct : rr.cells) {
        std::ostringstream os;
        os << "eta" << eta << "|a" << pa << "b" << pb << "|";
        if (ct.label.rfind(os.str(), 0) == 0 && ct.residual_terms > 0 && ct.residual.empty())
          ct.residual = wedge_text(re);
      }
    }
  }
  rr.residual = wedge_normalize(rr.residual);
  return rr;
}

WedgeExpr reduce_mod_divergence(const WedgeExpr& e) {
  return reduce_mod_divergence_traced(e).residual;
}

// ---- brute-force oracle ----------------------------------------------------

bool divergence_bruteforce(const WedgeExpr& e0) {
  WedgeExpr e = wedge_normalize(e0);
  if (e.is_zero()) return true;
  size_t k = e.t.front().f.size();
  static const Dep P[3] = {Dep::P1, Dep::P2, Dep::P3};
  static const Dep Q[3] = {Dep::Q1, Dep::Q2, Dep::Q3};
  // permutations with signs, up to k = 3
  static const int perms3[6][4] = {{0, 1, 2, 1}, {0, 2, 1, -1}, {1, 0, 2, -1},
                                   {1, 2, 0, 1}, {2, 0, 1, 1},  {2, 1, 0, -1}};
  DiffExpr s(0);
  for (const auto& t : e.t) {
    if (t.f.size() != k) throw std::runtime_error("mixed-degree polarization");
    size_t nperm = (k == 1) ? 1 : (k == 2) ? 2 : 6;
    for (size_t p = 0; p < nperm; ++p) {
      int slot[3], sign;
      if (k == 1) {
        slot[0] = 0;
        sign = 1;
      } else if (k == 2) {
        slot[0] = (p == 0) ? 0 : 1;
        slot[1] = (p == 0) ? 1 : 0;
        sign = (p == 0) ? 1 : -1;
      } else {
        slot[0] = perms3[p][0];
        slot[1] = perms3[p][1];
        slot[2] = perms3[p][2];
        sign = perms3[p][3];
      }
      DiffExpr prod = (sign > 0) ? t.c : -t.c;
      for (size_t i = 0; i < k; ++i) {
        const UniFactor& f = t.f[i];
        if (f.wrapped) throw std::runtime_error("polarization needs local factors");
        Dep d = (f.base == UniBase::Eta) ? P[slot[i]] : Q[slot[i]];
        prod = prod * jet_tx(d, 0, f.d.c[1], f.d.c[2], f.d.c[3]);
      }
      s += prod;
    }
  }
  return is_total_divergence_xyz(s);
}

}  // namespace ghe
