#include "ghe/expr.hpp"

#include <algorithm>
#include <cctype>
#include <cstring>
#include <map>
#include <sstream>

namespace ghe {

// ---------------------------------------------------------------------------
// symbol packing

static constexpr int kKindShift = 61;

Sym sym_coord(Axis a) {
  return (symkind::Coord << kKindShift) | ((std::uint64_t)(a.chart == Chart::Z ? 0 : 1) << 8) |
         a.id;
}
Sym sym_param(Param p) { return (symkind::ParamK << kKindShift) | (std::uint64_t)p; }
Sym sym_absfunc(FuncTag t, int deriv) {
  if (deriv < 0 || deriv > 255) throw std::runtime_error("absfunc deriv out of range");
  return (symkind::AbsFunc << kKindShift) | ((std::uint64_t)t << 8) | (std::uint64_t)deriv;
}
Sym sym_jet(Dep d, Chart ch, MultiIndex idx) {
  std::uint64_t counts = ((std::uint64_t)idx.c[0] << 24) | ((std::uint64_t)idx.c[1] << 16) |
                         ((std::uint64_t)idx.c[2] << 8) | (std::uint64_t)idx.c[3];
  return (symkind::Jet << kKindShift) | ((std::uint64_t)d << 40) |
         ((std::uint64_t)(ch == Chart::Z ? 0 : 1) << 39) | counts;
}
Sym sym_atom_jet(std::uint32_t atom_id, int dy, int dz) {
  if (dy < 0 || dy > 255 || dz < 0 || dz > 255) throw std::runtime_error("atom jet out of range");
  return (symkind::AtomJet << kKindShift) | ((std::uint64_t)atom_id << 16) |
         ((std::uint64_t)dy << 8) | (std::uint64_t)dz;
}

std::uint64_t sym_kind(Sym s) { return s >> kKindShift; }
bool sym_is_jet(Sym s) { return sym_kind(s) == symkind::Jet; }
bool sym_is_atom(Sym s) { return sym_kind(s) == symkind::AtomJet; }
Dep jet_dep(Sym s) { return (Dep)((s >> 40) & 0xff); }
Chart jet_chart(Sym s) { return ((s >> 39) & 1) ? Chart::TX : Chart::Z; }
MultiIndex jet_index(Sym s) {
  MultiIndex m;
  m.c[0] = (std::uint8_t)(s >> 24);
  m.c[1] = (std::uint8_t)(s >> 16);
  m.c[2] = (std::uint8_t)(s >> 8);
  m.c[3] = (std::uint8_t)s;
  return m;
}
Axis coord_axis(Sym s) {
  return Axis{((s >> 8) & 1) ? Chart::TX : Chart::Z, (std::uint8_t)(s & 0xff)};
}
Param param_id(Sym s) { return (Param)(s & 0xff); }
FuncTag absfunc_tag(Sym s) { return (FuncTag)((s >> 8) & 0xff); }
int absfunc_deriv(Sym s) { return (int)(s & 0xff); }
std::uint32_t atom_id_of(Sym s) { return (std::uint32_t)((s >> 16) & 0xffffffffu); }
int atom_dy(Sym s) { return (int)((s >> 8) & 0xff); }
int atom_dz(Sym s) { return (int)(s & 0xff); }

bool sym_less(Sym a, Sym b) {
  auto ka = sym_kind(a), kb = sym_kind(b);
  if (ka != kb) return ka < kb;
  switch (ka) {
    case symkind::Jet: {
      Dep da = jet_dep(a), db = jet_dep(b);
      if (da != db) return da < db;
      Chart ca = jet_chart(a), cb = jet_chart(b);
      if (ca != cb) return ca < cb;
      MultiIndex ia = jet_index(a), ib = jet_index(b);
      if (ia.order() != ib.order()) return ia.order() < ib.order();
      for (int i = 0; i < 4; ++i)
        if (ia.c[i] != ib.c[i]) return ia.c[i] < ib.c[i];
      return false;
    }
    case symkind::AtomJet: {
      if (atom_id_of(a) != atom_id_of(b)) return atom_id_of(a) < atom_id_of(b);
      int oa = atom_dy(a) + atom_dz(a), ob = atom_dy(b) + atom_dz(b);
      if (oa != ob) return oa < ob;
      return (a & 0xffff) < (b & 0xffff);
    }
    default:
      return a < b;
  }
}

static const char* dep_name(Dep d) {
  switch (d) {
    case Dep::U: return "u";
    case Dep::V: return "v";
    case Dep::Rho: return "rho";
    case Dep::Rho2: return "rho2";
    case Dep::P1: return "p1";
    case Dep::Q1: return "q1";
    case Dep::P2: return "p2";
    case Dep::Q2: return "q2";
    case Dep::P3: return "p3";
    case Dep::Q3: return "q3";
  }
  return "?";
}

static const char* func_name(FuncTag t) {
  switch (t) {
    case FuncTag::F: return "f";
    case FuncTag::G: return "g";
    case FuncTag::H: return "h";
    case FuncTag::K: return "k";
    case FuncTag::C: return "c";
    case FuncTag::D: return "d";
  }
  return "?";
}

std::string sym_name(Sym s) {
  std::ostringstream os;
  switch (sym_kind(s)) {
    case symkind::Coord: {
      Axis a = coord_axis(s);
      if (a.chart == Chart::Z)
        os << "Z" << (int)(a.id + 1);
      else
        os << "txyz"[a.id];
      break;
    }
    case symkind::ParamK:
      switch (param_id(s)) {
        case Param::Beta: os << "beta"; break;
        case Param::Gamma: os << "gamma"; break;
        case Param::Bflow: os << "b"; break;
        case Param::Amix: os << "a"; break;
        case Param::Lambda: os << "lambda"; break;
      }
      break;
    case symkind::AbsFunc:
      os << "af[" << func_name(absfunc_tag(s)) << "," << absfunc_deriv(s) << "]";
      break;
    case symkind::Jet: {
      MultiIndex m = jet_index(s);
      os << "jet[" << dep_name(jet_dep(s)) << ";" << (jet_chart(s) == Chart::Z ? "Z" : "TX") << ";"
         << (int)m.c[0] << "," << (int)m.c[1] << "," << (int)m.c[2] << "," << (int)m.c[3] << "]";
      break;
    }
    case symkind::AtomJet:
      os << "atom[" << atom_id_of(s) << ";" << atom_dy(s) << "," << atom_dz(s) << "]";
      break;
    default:
      os << "sym#" << s;
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// monomials

bool mono_less(const Monomial& a, const Monomial& b) {
  int da = a.degree(), db = b.degree();
  if (da != db) return da < db;
  // lex on the sorted factor sequence: compare greatest symbols first
  auto ia = a.f.rbegin(), ib = b.f.rbegin();
  for (; ia != a.f.rend() && ib != b.f.rend(); ++ia, ++ib) {
    if (ia->first != ib->first) return sym_less(ia->first, ib->first);
    if (ia->second != ib->second) return ia->second < ib->second;
  }
  return false;  // same degree, exhausted together
}

Monomial mono_mul(const Monomial& a, const Monomial& b) {
  Monomial r;
  r.f.reserve(a.f.size() + b.f.size());
  auto ia = a.f.begin(), ib = b.f.begin();
  while (ia != a.f.end() && ib != b.f.end()) {
    if (ia->first == ib->first) {
      r.f.emplace_back(ia->first, ia->second + ib->second);
      ++ia; ++ib;
    } else if (sym_less(ia->first, ib->first)) {
      r.f.push_back(*ia++);
    } else {
      r.f.push_back(*ib++);
    }
  }
  r.f.insert(r.f.end(), ia, a.f.end());
  r.f.insert(r.f.end(), ib, b.f.end());
  return r;
}

std::optional<Monomial> mono_div(const Monomial& a, const Monomial& b) {
  Monomial r;
  auto ia = a.f.begin();
  for (auto& [s, e] : b.f) {
    while (ia != a.f.end() && sym_less(ia->first, s)) r.f.push_back(*ia++);
    if (ia == a.f.end() || ia->first != s || ia->second < e) return std::nullopt;
    if (ia->second > e) r.f.emplace_back(s, ia->second - e);
    ++ia;
  }
  r.f.insert(r.f.end(), ia, a.f.end());
  return r;
}

Monomial mono_gcd(const Monomial& a, const Monomial& b) {
  Monomial r;
  auto ia = a.f.begin(), ib = b.f.begin();
  while (ia != a.f.end() && ib != b.f.end()) {
    if (ia->first == ib->first) {
      r.f.emplace_back(ia->first, std::min(ia->second, ib->second));
      ++ia; ++ib;
    } else if (sym_less(ia->first, ib->first)) {
      ++ia;
    } else {
      ++ib;
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// polynomials

Poly Poly::constant(const Rational& r) {
  Poly p;
  if (r != 0) p.t.emplace_back(Monomial{}, r);
  return p;
}

Poly Poly::var(Sym s) {
  Poly p;
  Monomial m;
  m.f.emplace_back(s, 1u);
  p.t.emplace_back(std::move(m), Rational(1));
  return p;
}

struct MonoGreater {
  bool operator()(const Monomial& a, const Monomial& b) const { return mono_less(b, a); }
};

static Poly from_map(std::map<Monomial, Rational, MonoGreater>& m) {
  Poly r;
  r.t.reserve(m.size());
  for (auto& [mo, c] : m)
    if (c != 0) r.t.emplace_back(mo, c);
  return r;
}

Poly operator+(const Poly& a, const Poly& b) {
  // merge two sorted-descending term lists
  Poly r;
  r.t.reserve(a.t.size() + b.t.size());
  auto ia = a.t.begin(), ib = b.t.begin();
  while (ia != a.t.end() && ib != b.t.end()) {
    if (ia->first == ib->first) {
      Rational c = ia->second + ib->second;
      if (c != 0) r.t.emplace_back(ia->first, std::move(c));
      ++ia; ++ib;
    } else if (mono_less(ib->first, ia->first)) {
      r.t.push_back(*ia++);
    } else {
      r.t.push_back(*ib++);
    }
  }
  r.t.insert(r.t.end(), ia, a.t.end());
  r.t.insert(r.t.end(), ib, b.t.end());
  return r;
}

Poly operator-(const Poly& a) {
  Poly r = a;
  for (auto& [m, c] : r.t) c = -c;
  return r;
}

Poly operator-(const Poly& a, const Poly& b) { return a + (-b); }

Poly operator*(const Poly& a, const Poly& b) {
  if (a.is_zero() || b.is_zero()) return Poly::zero();
  // single-term fast path
  if (a.t.size() == 1) {
    Poly r;
    r.t.reserve(b.t.size());
    for (auto& [m, c] : b.t) r.t.emplace_back(mono_mul(a.t[0].first, m), a.t[0].second * c);
    std::sort(r.t.begin(), r.t.end(),
              [](auto& x, auto& y) { return mono_less(y.first, x.first); });
    return r;
  }
  if (b.t.size() == 1) return b * a;
  std::map<Monomial, Rational, MonoGreater> acc;
  for (auto& [ma, ca] : a.t)
    for (auto& [mb, cb] : b.t) acc[mono_mul(ma, mb)] += ca * cb;
  return from_map(acc);
}

Poly poly_scale(const Poly& a, const Rational& r) {
  if (r == 0) return Poly::zero();
  Poly p = a;
  for (auto& [m, c] : p.t) c *= r;
  return p;
}

Poly poly_pow(const Poly& a, unsigned n) {
  Poly r = Poly::constant(1);
  Poly base = a;
  while (n) {
    if (n & 1) r = r * base;
    n >>= 1;
    if (n) base = base * base;
  }
  return r;
}

Poly poly_partial(const Poly& a, Sym s) {
  Poly r;
  for (auto& [m, c] : a.t) {
    for (size_t i = 0; i < m.f.size(); ++i) {
      if (m.f[i].first != s) continue;
      Monomial dm = m;
      if (dm.f[i].second == 1)
        dm.f.erase(dm.f.begin() + (long)i);
      else
        dm.f[i].second -= 1;
      Poly term;
      term.t.emplace_back(std::move(dm), c * (int)m.f[i].second);
      r = r + term;
      break;
    }
  }
  return r;
}

Poly poly_subst(const Poly& a, Sym s, const Poly& val) {
  Poly out;
  std::map<Monomial, Rational, MonoGreater> acc;
  for (auto& [m, c] : a.t) {
    unsigned e = 0;
    Monomial rest;
    for (auto& [sy, ex] : m.f) {
      if (sy == s)
        e = ex;
      else
        rest.f.emplace_back(sy, ex);
    }
    if (e == 0) {
      acc[m] += c;
      continue;
    }
    Poly piece = poly_pow(val, e);
    for (auto& [pm, pc] : piece.t) acc[mono_mul(pm, rest)] += pc * c;
  }
  return from_map(acc);
}

bool poly_contains(const Poly& a, Sym s) {
  for (auto& [m, c] : a.t)
    for (auto& [sy, e] : m.f)
      if (sy == s) return true;
  return false;
}

void poly_collect_syms(const Poly& a, std::vector<Sym>& out) {
  for (auto& [m, c] : a.t)
    for (auto& [sy, e] : m.f) out.push_back(sy);
  std::sort(out.begin(), out.end(), sym_less);
  out.erase(std::unique(out.begin(), out.end()), out.end());
}

int poly_deg_in(const Poly& a, Sym s) {
  int d = 0;
  for (auto& [m, c] : a.t)
    for (auto& [sy, e] : m.f)
      if (sy == s) d = std::max(d, (int)e);
  return d;
}

// ---- gcd machinery --------------------------------------------------------

static Rational rat_content(const Poly& a) {
  // gcd of coefficients, sign of leading term
  if (a.is_zero()) return 0;
  BigInt gn = 0, ld = 1;
  for (auto& [m, c] : a.t) {
    gn = gcd(gn, numerator(c));
    ld = lcm(ld, denominator(c));
  }
  Rational r(gn, ld);
  if (a.t[0].second < 0) r = -r;
  return r;
}

static Monomial mono_content(const Poly& a) {
  if (a.is_zero()) return {};
  Monomial g = a.t[0].first;
  for (size_t i = 1; i < a.t.size() && !g.is_one(); ++i) g = mono_gcd(g, a.t[i].first);
  return g;
}

static Poly strip_mono(const Poly& a, const Monomial& m) {
  if (m.is_one()) return a;
  Poly r;
  r.t.reserve(a.t.size());
  for (auto& [mo, c] : a.t) r.t.emplace_back(*mono_div(mo, m), c);
  return r;
}

std::optional<Poly> poly_divexact(const Poly& a, const Poly& b) {
  if (b.is_zero()) return std::nullopt;
  if (a.is_zero()) return Poly::zero();
  Poly r = a, q;
  const Monomial& lb = b.t[0].first;
  const Rational& cb = b.t[0].second;
  while (!r.is_zero()) {
    auto md = mono_div(r.t[0].first, lb);
    if (!md) return std::nullopt;
    Poly term;
    term.t.emplace_back(*md, r.t[0].second / cb);
    q = q + term;
    r = r - term * b;
    if (q.t.size() > a.t.size() * 4 + 16) return std::nullopt;  // runaway guard
  }
  return q;
}

// univariate view in a chosen main symbol, coefficients are polys in the rest
static std::vector<Poly> to_uni(const Poly& a, Sym x) {
  int d = poly_deg_in(a, x);
  std::vector<Poly> u((size_t)d + 1);
  for (auto& [m, c] : a.t) {
    unsigned e = 0;
    Monomial rest;
    for (auto& [sy, ex] : m.f) {
      if (sy == x)
        e = ex;
      else
        rest.f.emplace_back(sy, ex);
    }
    Poly term;
    term.t.emplace_back(std::move(rest), c);
    u[e] = u[e] + term;
  }
  return u;
}

static Poly from_uni(const std::vector<Poly>& u, Sym x) {
  Poly r;
  for (size_t e = 0; e < u.size(); ++e) {
    if (u[e].is_zero()) continue;
    Poly xe = poly_pow(Poly::var(x), (unsigned)e);
    r = r + u[e] * xe;
  }
  return r;
}

static void uni_trim(std::vector<Poly>& u) {
  while (!u.empty() && u.back().is_zero()) u.pop_back();
}

static Poly poly_gcd_impl(Poly a, Poly b, int depth);

static Poly uni_content(const std::vector<Poly>& u, int depth) {
  Poly g = Poly::zero();
  for (auto& c : u) {
    if (c.is_zero()) continue;
    g = g.is_zero() ? c : poly_gcd_impl(g, c, depth + 1);
    if (g.is_constant() && !g.is_zero()) return Poly::constant(1);
  }
  return g.is_zero() ? Poly::constant(1) : g;
}

// pseudo-remainder of A by B (deg A >= deg B), both trimmed, B nonzero
static std::vector<Poly> uni_prem(std::vector<Poly> A, const std::vector<Poly>& B) {
  const Poly& lb = B.back();
  int db = (int)B.size() - 1;
  while ((int)A.size() - 1 >= db && !A.empty()) {
    int da = (int)A.size() - 1;
    Poly la = A.back();
    // A := lb*A - la * x^(da-db) * B
    for (auto& c : A) c = lb * c;
    for (int i = 0; i <= db; ++i) A[(size_t)(da - db + i)] = A[(size_t)(da - db + i)] - la * B[(size_t)i];
    uni_trim(A);
  }
  return A;
}

static Poly poly_gcd_impl(Poly a, Poly b, int depth) {
  if (a.is_zero()) return b;
  if (b.is_zero()) return a;
  if (depth > 12) return Poly::constant(1);  // give up: 1 is always a valid divisor

  Monomial mc = mono_gcd(mono_content(a), mono_content(b));
  a = strip_mono(a, mono_content(a));
  b = strip_mono(b, mono_content(b));
  a = poly_scale(a, Rational(1) / rat_content(a));
  b = poly_scale(b, Rational(1) / rat_content(b));

  Poly mono_part;
  mono_part.t.emplace_back(mc, Rational(1));

  if (a.is_constant() || b.is_constant()) return mono_part;
  if (a == b) return mono_part * a;

  // cheap one-way exact division probes
  if (auto q = poly_divexact(a, b)) { (void)q; return mono_part * b; }
  if (auto q = poly_divexact(b, a)) { (void)q; return mono_part * a; }

  std::vector<Sym> sa, sb;
  poly_collect_syms(a, sa);
  poly_collect_syms(b, sb);
  std::vector<Sym> common;
  std::set_intersection(sa.begin(), sa.end(), sb.begin(), sb.end(), std::back_inserter(common),
                        sym_less);
  if (common.empty()) return mono_part;
  Sym x = common.back();  // greatest shared symbol as main variable

  auto ua = to_uni(a, x), ub = to_uni(b, x);
  uni_trim(ua); uni_trim(ub);
  Poly ca = uni_content(ua, depth), cb = uni_content(ub, depth);
  for (auto& c : ua) { auto q = poly_divexact(c, ca); c = q ? *q : c; }
  for (auto& c : ub) { auto q = poly_divexact(c, cb); c = q ? *q : c; }
  Poly cont_gcd = poly_gcd_impl(ca, cb, depth + 1);

  // primitive PRS
  if (ua.size() < ub.size()) std::swap(ua, ub);
  int guard = 0;
  while (!ub.empty()) {
    if (++guard > 40) return mono_part * cont_gcd;
    auto r = uni_prem(ua, ub);
    ua = std::move(ub);
    ub = std::move(r);
    if (!ub.empty()) {
      Poly c = uni_content(ub, depth);
      for (auto& cc : ub) { auto q = poly_divexact(cc, c); cc = q ? *q : cc; }
    }
  }
  Poly g = from_uni(ua, x);
  Monomial gm = mono_content(g);
  g = strip_mono(g, gm);
  g = poly_scale(g, Rational(1) / rat_content(g));
  return mono_part * cont_gcd * g;
}

Poly poly_gcd(const Poly& a, const Poly& b) { return poly_gcd_impl(a, b, 0); }

// ---------------------------------------------------------------------------
// fractions

void DiffExpr::normalize() {
  if (den_.is_zero()) throw std::runtime_error("division by zero expression");
  if (num_.is_zero()) {
    den_ = Poly::constant(1);
    return;
  }
  // common monomial factor
  Monomial g = mono_gcd(mono_content(num_), mono_content(den_));
  if (!g.is_one()) {
    num_ = strip_mono(num_, g);
    den_ = strip_mono(den_, g);
  }
  if (!den_.is_constant()) {
    if (auto q = poly_divexact(num_, den_)) {
      num_ = *q;
      den_ = Poly::constant(1);
    } else if (num_.t.size() <= 400 && den_.t.size() <= 400) {
      Poly d = poly_gcd(num_, den_);
      if (!d.is_constant()) {
        auto qn = poly_divexact(num_, d);
        auto qd = poly_divexact(den_, d);
        if (qn && qd) {
          num_ = *qn;
          den_ = *qd;
        }
      }
    }
  }
  // canonical scaling: denominator primitive integer, positive leading coeff
  Rational c = rat_content(den_);
  if (c != 1) {
    num_ = poly_scale(num_, Rational(1) / c);
    den_ = poly_scale(den_, Rational(1) / c);
  }
}

DiffExpr::DiffExpr(Poly n, Poly d) : num_(std::move(n)), den_(std::move(d)) { normalize(); }

DiffExpr operator+(const DiffExpr& a, const DiffExpr& b) {
  if (a.den_ == b.den_) return DiffExpr(a.num_ + b.num_, a.den_);
  return DiffExpr(a.num_ * b.den_ + b.num_ * a.den_, a.den_ * b.den_);
}
DiffExpr operator-(const DiffExpr& a, const DiffExpr& b) {
  if (a.den_ == b.den_) return DiffExpr(a.num_ - b.num_, a.den_);
  return DiffExpr(a.num_ * b.den_ - b.num_ * a.den_, a.den_ * b.den_);
}
DiffExpr operator*(const DiffExpr& a, const DiffExpr& b) {
  return DiffExpr(a.num_ * b.num_, a.den_ * b.den_);
}
DiffExpr operator/(const DiffExpr& a, const DiffExpr& b) {
  if (b.num_.is_zero()) throw std::runtime_error("division by zero expression");
  return DiffExpr(a.num_ * b.den_, a.den_ * b.num_);
}
DiffExpr operator-(const DiffExpr& a) {
  DiffExpr r = a;
  r.num_ = -r.num_;
  return r;
}

bool operator==(const DiffExpr& a, const DiffExpr& b) {
  if (a.den_ == b.den_) return a.num_ == b.num_;
  return a.num_ * b.den_ == b.num_ * a.den_;
}

DiffExpr DiffExpr::pow(int n) const {
  if (n == 0) return DiffExpr(1);
  if (n < 0) return inverse().pow(-n);
  DiffExpr r(1);
  for (int i = 0; i < n; ++i) r = r * *this;
  return r;
}

DiffExpr DiffExpr::inverse() const {
  if (num_.is_zero()) throw std::runtime_error("inverse of zero");
  return DiffExpr(den_, num_);
}

DiffExpr partial(const DiffExpr& e, Sym s) {
  // quotient rule; denominator untouched when s absent from it
  Poly dn = poly_partial(e.num(), s);
  if (!poly_contains(e.den(), s)) return DiffExpr(dn, e.den());
  Poly dd = poly_partial(e.den(), s);
  return DiffExpr(dn * e.den() - e.num() * dd, e.den() * e.den());
}

DiffExpr subst(const DiffExpr& e, Sym s, const DiffExpr& val) {
  if (!contains(e, s)) return e;
  // expand: substitute in num and den separately as fractions
  auto subst_poly = [&](const Poly& p) {
    DiffExpr acc(0);
    for (auto& [m, c] : p.t) {
      DiffExpr term{Rational(c)};
      for (auto& [sy, ex] : m.f) {
        DiffExpr base = (sy == s) ? val : DiffExpr::var(sy);
        term = term * base.pow((int)ex);
      }
      acc = acc + term;
    }
    return acc;
  };
  return subst_poly(e.num()) / subst_poly(e.den());
}

bool contains(const DiffExpr& e, Sym s) {
  return poly_contains(e.num(), s) || poly_contains(e.den(), s);
}

std::vector<Sym> collect_syms(const DiffExpr& e) {
  std::vector<Sym> out;
  poly_collect_syms(e.num(), out);
  poly_collect_syms(e.den(), out);
  std::sort(out.begin(), out.end(), sym_less);
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

DiffExpr jet(Dep d, Chart ch, MultiIndex idx) { return DiffExpr::var(sym_jet(d, ch, idx)); }
DiffExpr jet_tx(Dep d, int nt, int nx, int ny, int nz) {
  return jet(d, Chart::TX, mi(nt, nx, ny, nz));
}
DiffExpr jet_z(Dep d, int n1, int n2, int n3, int n4) {
  return jet(d, Chart::Z, mi(n1, n2, n3, n4));
}
DiffExpr coord(Axis a) { return DiffExpr::var(sym_coord(a)); }
DiffExpr param(Param p) { return DiffExpr::var(sym_param(p)); }
DiffExpr absfunc(FuncTag t, int deriv) { return DiffExpr::var(sym_absfunc(t, deriv)); }
DiffExpr rat(long n, long d) { return DiffExpr(Rational(n, d)); }

// ---------------------------------------------------------------------------
// serialization: prefix notation, whitespace separated
//   expr    := poly | (/ poly poly)
//   poly    := 0 | (+ term+)
//   term    := (* rational factor*)
//   factor  := symname | (^ symname int)

static void print_poly(std::ostream& os, const Poly& p) {
  if (p.is_zero()) {
    os << "0";
    return;
  }
  os << "(+";
  for (auto& [m, c] : p.t) {
    os << " (* " << c;
    for (auto& [s, e] : m.f) {
      if (e == 1)
        os << " " << sym_name(s);
      else
        os << " (^ " << sym_name(s) << " " << e << ")";
    }
    os << ")";
  }
  os << ")";
}

std::string to_text(const DiffExpr& e) {
  std::ostringstream os;
  if (e.den().is_constant() && !e.den().is_zero() && e.den().t[0].second == 1) {
    print_poly(os, e.num());
  } else {
    os << "(/ ";
    print_poly(os, e.num());
    os << " ";
    print_poly(os, e.den());
    os << ")";
  }
  return os.str();
}

namespace {

struct Lexer {
  const std::string& s;
  size_t i = 0;
  explicit Lexer(const std::string& str) : s(str) {}
  void skip_ws() {
    while (i < s.size() && std::isspace((unsigned char)s[i])) ++i;
  }
  std::string next() {
    skip_ws();
    if (i >= s.size()) return "";
    if (s[i] == '(' || s[i] == ')') return std::string(1, s[i++]);
    size_t j = i;
    while (j < s.size() && !std::isspace((unsigned char)s[j]) && s[j] != '(' && s[j] != ')') ++j;
    std::string tok = s.substr(i, j - i);
    i = j;
    return tok;
  }
  std::string peek() {
    size_t save = i;
    std::string t = next();
    i = save;
    return t;
  }
  void expect(const std::string& t) {
    std::string g = next();
    if (g != t) throw std::runtime_error("parse: expected '" + t + "' got '" + g + "'");
  }
};

Sym parse_sym(const std::string& tok) {
  if (tok == "t") return sym_coord(ax_t());
  if (tok == "x") return sym_coord(ax_x());
  if (tok == "y") return sym_coord(ax_y());
  if (tok == "z") return sym_coord(ax_z());
  if (tok.size() == 2 && tok[0] == 'Z' && tok[1] >= '1' && tok[1] <= '4')
    return sym_coord(ax_zi(tok[1] - '0'));
  if (tok == "beta") return sym_param(Param::Beta);
  if (tok == "gamma") return sym_param(Param::Gamma);
  if (tok == "b") return sym_param(Param::Bflow);
  if (tok == "a") return sym_param(Param::Amix);
  if (tok == "lambda") return sym_param(Param::Lambda);
  auto bracket = [&](const char* prefix) -> std::optional<std::string> {
    size_t n = std::strlen(prefix);
    if (tok.size() > n + 1 && tok.compare(0, n, prefix) == 0 && tok[n] == '[' && tok.back() == ']')
      return tok.substr(n + 1, tok.size() - n - 2);
    return std::nullopt;
  };
  if (auto body = bracket("af")) {
    size_t comma = body->find(',');
    std::string fn = body->substr(0, comma);
    int deriv = std::stoi(body->substr(comma + 1));
    FuncTag t;
    if (fn == "f") t = FuncTag::F;
    else if (fn == "g") t = FuncTag::G;
    else if (fn == "h") t = FuncTag::H;
    else if (fn == "k") t = FuncTag::K;
    else if (fn == "c") t = FuncTag::C;
    else if (fn == "d") t = FuncTag::D;
    else throw std::runtime_error("parse: bad absfunc " + tok);
    return sym_absfunc(t, deriv);
  }
  if (auto body = bracket("jet")) {
    size_t s1 = body->find(';'), s2 = body->find(';', s1 + 1);
    std::string dn = body->substr(0, s1);
    std::string cn = body->substr(s1 + 1, s2 - s1 - 1);
    std::string idx = body->substr(s2 + 1);
    Dep d;
    if (dn == "u") d = Dep::U;
    else if (dn == "v") d = Dep::V;
    else if (dn == "rho") d = Dep::Rho;
    else if (dn == "rho2") d = Dep::Rho2;
    else if (dn == "p1") d = Dep::P1;
    else if (dn == "q1") d = Dep::Q1;
    else if (dn == "p2") d = Dep::P2;
    else if (dn == "q2") d = Dep::Q2;
    else if (dn == "p3") d = Dep::P3;
    else if (dn == "q3") d = Dep::Q3;
    else throw std::runtime_error("parse: bad dep " + dn);
    Chart ch = (cn == "Z") ? Chart::Z : Chart::TX;
    int c[4], k = 0;
    std::istringstream is(idx);
    std::string piece;
    while (std::getline(is, piece, ',') && k < 4) c[k++] = std::stoi(piece);
    if (k != 4) throw std::runtime_error("parse: bad jet index " + tok);
    return sym_jet(d, ch, mi(c[0], c[1], c[2], c[3]));
  }
  if (auto body = bracket("atom")) {
    size_t s1 = body->find(';'), comma = body->find(',', s1 + 1);
    std::uint32_t id = (std::uint32_t)std::stoul(body->substr(0, s1));
    int dy = std::stoi(body->substr(s1 + 1, comma - s1 - 1));
    int dz = std::stoi(body->substr(comma + 1));
    return sym_atom_jet(id, dy, dz);
  }
  throw std::runtime_error("parse: unknown symbol '" + tok + "'");
}

Poly parse_poly(Lexer& lx) {
  std::string tok = lx.next();
  if (tok == "0") return Poly::zero();
  if (tok != "(") throw std::runtime_error("parse: expected poly, got '" + tok + "'");
  lx.expect("+");
  Poly p;
  while (lx.peek() != ")") {
    lx.expect("(");
    lx.expect("*");
    Rational c{lx.next()};
    Monomial m;
    while (lx.peek() != ")") {
      std::string f = lx.next();
      if (f == "(") {
        lx.expect("^");
        Sym s = parse_sym(lx.next());
        unsigned e = (unsigned)std::stoul(lx.next());
        lx.expect(")");
        m.f.emplace_back(s, e);
      } else {
        m.f.emplace_back(parse_sym(f), 1u);
      }
    }
    lx.expect(")");
    std::sort(m.f.begin(), m.f.end(), [](auto& a, auto& b) { return sym_less(a.first, b.first); });
    Poly term;
    term.t.emplace_back(std::move(m), std::move(c));
    p = p + term;
  }
  lx.expect(")");
  return p;
}

}  // namespace

DiffExpr parse_expr(const std::string& text) {
  Lexer lx(text);
  if (lx.peek() == "(") {
    size_t save = lx.i;
    lx.next();
    std::string op = lx.peek();
    lx.i = save;
    if (op == "/") {
      lx.expect("(");
      lx.expect("/");
      Poly n = parse_poly(lx);
      Poly d = parse_poly(lx);
      lx.expect(")");
      return DiffExpr(std::move(n), std::move(d));
    }
  }
  return DiffExpr(parse_poly(lx));
}

// ---------------------------------------------------------------------------
// report-friendly rendering

static std::string pretty_sym(Sym s) {
  switch (sym_kind(s)) {
    case symkind::Jet: {
      std::string base = dep_name(jet_dep(s));
      MultiIndex m = jet_index(s);
      if (m.is_zero()) return base;
      base += "_";
      if (jet_chart(s) == Chart::TX) {
        const char* ax = "txyz";
        for (int i = 0; i < 4; ++i)
          for (int k = 0; k < m.c[i]; ++k) base += ax[i];
      } else {
        for (int i = 0; i < 4; ++i)
          for (int k = 0; k < m.c[i]; ++k) base += (char)('1' + i);
      }
      return base;
    }
    case symkind::AbsFunc: {
      std::string r = func_name(absfunc_tag(s));
      for (int i = 0; i < absfunc_deriv(s); ++i) r += "'";
      return r;
    }
    case symkind::AtomJet: {
      std::string r = "W" + std::to_string(atom_id_of(s));
      if (atom_dy(s) || atom_dz(s)) {
        r += "_";
        for (int i = 0; i < atom_dy(s); ++i) r += "y";
        for (int i = 0; i < atom_dz(s); ++i) r += "z";
      }
      return r;
    }
    default:
      return sym_name(s);
  }
}

static std::string pretty_poly(const Poly& p) {
  if (p.is_zero()) return "0";
  std::ostringstream os;
  bool first = true;
  for (auto& [m, c] : p.t) {
    Rational ca = c < 0 ? Rational(-c) : c;
    if (first) {
      if (c < 0) os << "-";
      first = false;
    } else {
      os << (c < 0 ? " - " : " + ");
    }
    std::vector<std::string> parts;
    if (ca != 1 || m.is_one()) {
      std::ostringstream cs;
      cs << ca;
      parts.push_back(cs.str());
    }
    for (auto& [s, e] : m.f) {
      std::string f = pretty_sym(s);
      if (e > 1) f += "^" + std::to_string(e);
      parts.push_back(std::move(f));
    }
    for (size_t i = 0; i < parts.size(); ++i) os << (i ? "*" : "") << parts[i];
  }
  return os.str();
}

std::string pretty(const DiffExpr& e) {
  if (e.den().is_constant() && !e.den().is_zero() && e.den().t[0].second == 1)
    return pretty_poly(e.num());
  return "(" + pretty_poly(e.num()) + ") / (" + pretty_poly(e.den()) + ")";
}

}  // namespace ghe
