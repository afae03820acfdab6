#pragma once

// Exact jet-space expression algebra: multivariate polynomials with
// rational coefficients over a fixed symbol universe (jet variables,
// coordinates, formal parameters, abstract one-argument functions and
// nonlocal atoms), plus reduced fractions thereof.

#include <boost/multiprecision/cpp_int.hpp>

#include <compare>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace ghe {

using Rational = boost::multiprecision::cpp_rational;
using BigInt = boost::multiprecision::cpp_int;

// ---------------------------------------------------------------------------
// Symbols

enum class Chart : std::uint8_t { Z = 0, TX = 1 };

// Axis ids are chart-local: Z chart is z1,z2,z3,z4; TX chart is t,x,y,z.
struct Axis {
  Chart chart = Chart::TX;
  std::uint8_t id = 0;  // 0..3
  friend bool operator==(const Axis&, const Axis&) = default;
};

inline constexpr std::uint8_t kAxisT = 0, kAxisX = 1, kAxisY = 2, kAxisZ = 3;

inline Axis ax_t() { return {Chart::TX, kAxisT}; }
inline Axis ax_x() { return {Chart::TX, kAxisX}; }
inline Axis ax_y() { return {Chart::TX, kAxisY}; }
inline Axis ax_z() { return {Chart::TX, kAxisZ}; }
inline Axis ax_zi(int i) { return {Chart::Z, static_cast<std::uint8_t>(i - 1)}; }  // i in 1..4

struct MultiIndex {
  std::uint8_t c[4] = {0, 0, 0, 0};
  int order() const { return c[0] + c[1] + c[2] + c[3]; }
  MultiIndex plus(int axis, int n = 1) const {
    MultiIndex r = *this;
    r.c[axis] = static_cast<std::uint8_t>(r.c[axis] + n);
    return r;
  }
  bool is_zero() const { return order() == 0; }
  friend bool operator==(const MultiIndex&, const MultiIndex&) = default;
};

inline MultiIndex mi(int a, int b, int c, int d) {
  MultiIndex m;
  m.c[0] = (std::uint8_t)a; m.c[1] = (std::uint8_t)b;
  m.c[2] = (std::uint8_t)c; m.c[3] = (std::uint8_t)d;
  return m;
}

enum class Dep : std::uint8_t {
  U = 0,
  V = 1,
  // generic test dependents used by oracles and operator identity checks
  Rho = 2,
  Rho2 = 3,
  P1 = 4, Q1 = 5, P2 = 6, Q2 = 7, P3 = 8, Q3 = 9,
};

enum class Param : std::uint8_t { Beta = 0, Gamma = 1, Bflow = 2, Amix = 3, Lambda = 4 };

enum class FuncTag : std::uint8_t { F = 0, G = 1, H = 2, K = 3, C = 4, D = 5 };

// A symbol is a packed 64-bit key.  Layout (high bits first):
//   kind [61..63] | payload
// kinds: 1 coord, 2 param, 3 absfunc, 4 jet, 5 atom jet.
using Sym = std::uint64_t;

namespace symkind {
inline constexpr std::uint64_t Coord = 1, ParamK = 2, AbsFunc = 3, Jet = 4, AtomJet = 5;
}

Sym sym_coord(Axis a);
Sym sym_param(Param p);
Sym sym_absfunc(FuncTag t, int deriv);
Sym sym_jet(Dep d, Chart ch, MultiIndex idx);
Sym sym_atom_jet(std::uint32_t atom_id, int dy, int dz);

std::uint64_t sym_kind(Sym s);
bool sym_is_jet(Sym s);
bool sym_is_atom(Sym s);
Dep jet_dep(Sym s);
Chart jet_chart(Sym s);
MultiIndex jet_index(Sym s);
Axis coord_axis(Sym s);
Param param_id(Sym s);
FuncTag absfunc_tag(Sym s);
int absfunc_deriv(Sym s);
std::uint32_t atom_id_of(Sym s);
int atom_dy(Sym s);
int atom_dz(Sym s);

// Deterministic total order on symbols (dependent tag, chart, index, ...).
bool sym_less(Sym a, Sym b);

std::string sym_name(Sym s);

// ---------------------------------------------------------------------------
// Monomials and polynomials

struct Monomial {
  // sorted by sym_less, exponents > 0
  std::vector<std::pair<Sym, std::uint32_t>> f;
  int degree() const {
    int d = 0;
    for (auto& [s, e] : f) d += (int)e;
    return d;
  }
  bool is_one() const { return f.empty(); }
  friend bool operator==(const Monomial&, const Monomial&) = default;
};

// graded lex: higher degree first, ties by symbol sequence
bool mono_less(const Monomial& a, const Monomial& b);
Monomial mono_mul(const Monomial& a, const Monomial& b);
// divide a by b; nullopt when not divisible
std::optional<Monomial> mono_div(const Monomial& a, const Monomial& b);
Monomial mono_gcd(const Monomial& a, const Monomial& b);

struct Poly {
  // terms sorted descending under mono_less, nonzero coefficients
  std::vector<std::pair<Monomial, Rational>> t;

  bool is_zero() const { return t.empty(); }
  bool is_constant() const { return t.empty() || (t.size() == 1 && t[0].first.is_one()); }
  static Poly zero() { return {}; }
  static Poly constant(const Rational& r);
  static Poly var(Sym s);
  friend bool operator==(const Poly&, const Poly&) = default;
};

Poly operator+(const Poly& a, const Poly& b);
Poly operator-(const Poly& a, const Poly& b);
Poly operator*(const Poly& a, const Poly& b);
Poly operator-(const Poly& a);
Poly poly_scale(const Poly& a, const Rational& r);
Poly poly_pow(const Poly& a, unsigned n);

// partial derivative with respect to one symbol
Poly poly_partial(const Poly& a, Sym s);
// substitute symbol -> polynomial
Poly poly_subst(const Poly& a, Sym s, const Poly& val);
bool poly_contains(const Poly& a, Sym s);
void poly_collect_syms(const Poly& a, std::vector<Sym>& out);
int poly_deg_in(const Poly& a, Sym s);

// exact multivariate gcd (primitive PRS); result content-normalized
Poly poly_gcd(const Poly& a, const Poly& b);
// exact division; nullopt if not divisible
std::optional<Poly> poly_divexact(const Poly& a, const Poly& b);

// ---------------------------------------------------------------------------
// Fractions

class DiffExpr {
 public:
  DiffExpr() : num_(Poly::zero()), den_(Poly::constant(1)) {}
  DiffExpr(int n) : num_(Poly::constant(n)), den_(Poly::constant(1)) {}
  explicit DiffExpr(const Rational& r) : num_(Poly::constant(r)), den_(Poly::constant(1)) {}
  explicit DiffExpr(const Poly& p) : num_(p), den_(Poly::constant(1)) {}
  DiffExpr(Poly n, Poly d);

  static DiffExpr var(Sym s) { return DiffExpr(Poly::var(s)); }

  const Poly& num() const { return num_; }
  const Poly& den() const { return den_; }
  bool is_zero() const { return num_.is_zero(); }

  friend DiffExpr operator+(const DiffExpr& a, const DiffExpr& b);
  friend DiffExpr operator-(const DiffExpr& a, const DiffExpr& b);
  friend DiffExpr operator*(const DiffExpr& a, const DiffExpr& b);
  friend DiffExpr operator/(const DiffExpr& a, const DiffExpr& b);
  friend DiffExpr operator-(const DiffExpr& a);
  DiffExpr& operator+=(const DiffExpr& o) { return *this = *this + o; }
  DiffExpr& operator-=(const DiffExpr& o) { return *this = *this - o; }
  DiffExpr& operator*=(const DiffExpr& o) { return *this = *this * o; }

  // exact semantic equality (cross-multiplied)
  friend bool operator==(const DiffExpr& a, const DiffExpr& b);

  DiffExpr pow(int n) const;
  DiffExpr inverse() const;

 private:
  void normalize();
  Poly num_, den_;
};

DiffExpr partial(const DiffExpr& e, Sym s);
DiffExpr subst(const DiffExpr& e, Sym s, const DiffExpr& val);
bool contains(const DiffExpr& e, Sym s);
std::vector<Sym> collect_syms(const DiffExpr& e);

// convenience constructors
DiffExpr jet(Dep d, Chart ch, MultiIndex idx);
DiffExpr jet_tx(Dep d, int nt, int nx, int ny, int nz);
DiffExpr jet_z(Dep d, int n1, int n2, int n3, int n4);
DiffExpr coord(Axis a);
DiffExpr param(Param p);
DiffExpr absfunc(FuncTag t, int deriv = 0);
DiffExpr rat(long n, long d = 1);

// deterministic prefix-notation serialization; parse/print round-trips exactly
std::string to_text(const DiffExpr& e);
DiffExpr parse_expr(const std::string& text);
// infix rendering mirroring the paper's notation, for reports
std::string pretty(const DiffExpr& e);

}  // namespace ghe
