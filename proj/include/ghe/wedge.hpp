#pragma once

// Functional multi-vectors over the anticommuting uni-vectors eta and theta.
//
// A factor is a total derivative of either a bare uni-vector or of a w^{-1}
// wrap around a local combination of derivatives of one uni-vector.  Wrapped
// factors never carry an x-derivative: D_x is eliminated on the spot through
// w = u_yz D_x - u_xz D_y, which trades one x-derivative for the payload.
// Wedge expressions are sums of DiffExpr-coefficient times an ordered factor
// list; the list is kept sorted with the permutation sign absorbed into the
// coefficient, and a repeated factor kills the term.

#include "ghe/nonlocal.hpp"
#include "ghe/verdict.hpp"

namespace ghe {

enum class UniBase : std::uint8_t { Eta = 0, Theta = 1 };

// payload of a w^{-1} wrap: sum of local coefficients times inner derivatives
// of one uni-vector; kept sorted by multi-index, canonically scaled
using WrapPayload = std::vector<std::pair<MultiIndex, DiffExpr>>;

struct UniFactor {
  UniBase base = UniBase::Eta;
  MultiIndex d;          // outer total derivatives (never t; never x if wrapped)
  bool wrapped = false;  // D^d applied to w^{-1}[payload]
  WrapPayload payload;   // only meaningful when wrapped
};

bool factor_equal(const UniFactor& a, const UniFactor& b);
// pivot order: base letter, then outer derivative count, then local before
// nonlocal, with lexicographic tie-breaks
bool factor_less(const UniFactor& a, const UniFactor& b);
std::string factor_text(const UniFactor& f);

UniFactor uni(UniBase b, int dx, int dy, int dz);
// normalizes the payload (sorting, pruning, scalar content pullout); the
// pulled-out scalar is multiplied into `scale`
UniFactor wrap(UniBase b, WrapPayload p, DiffExpr& scale);

struct WedgeTerm {
  DiffExpr c;
  std::vector<UniFactor> f;  // sorted ascending under factor_less
};

struct WedgeExpr {
  std::vector<WedgeTerm> t;
  bool is_zero() const { return t.empty(); }
};

WedgeExpr wedge_term(const DiffExpr& c, std::vector<UniFactor> fs);
WedgeExpr wedge_normalize(const WedgeExpr& e);
WedgeExpr operator+(const WedgeExpr& a, const WedgeExpr& b);
WedgeExpr operator-(const WedgeExpr& a, const WedgeExpr& b);
WedgeExpr operator-(const WedgeExpr& a);
WedgeExpr operator*(const DiffExpr& c, const WedgeExpr& a);
WedgeExpr wedge(const WedgeExpr& a, const WedgeExpr& b);
bool wedge_equal(const WedgeExpr& a, const WedgeExpr& b);
std::string wedge_text(const WedgeExpr& e);

// total derivative of one factor, as a degree-1 expression (the x-derivative
// of a wrapped factor expands through the defining relation of w)
WedgeExpr factor_deriv(const UniFactor& f, Axis ax);
WedgeExpr wedge_deriv(const WedgeExpr& e, Axis ax);

// apply a linear operator built from Mul/Diff/InvW factors to a degree-1
// wedge; InvW on an already wrapped factor throws (nesting depth exceeded)
WedgeExpr op_apply_wedge(const LinOp& op, const WedgeExpr& e);

int eta_degree(const WedgeTerm& t);   // factors whose base letter is eta
int invw_degree(const WedgeTerm& t);  // wrapped factors

// one reduction cell: eta-degree, monomial a^pa b^pb, and w^{-1} degree
struct CellTrace {
  std::string label;
  int initial_terms = 0;
  int residual_terms = 0;
  bool skipped = false;  // fail-fast runs stop reducing after the first survivor
  std::string residual;  // empty when the cell cancels
};

struct ReduceResult {
  WedgeExpr residual;
  std::vector<CellTrace> cells;
};

// canonical reduction modulo total divergences: split into cells, integrate
// by parts until every term's minimal factor is underived, then search for an
// explicit divergence certificate for whatever is left
// fail_fast stops dispatching cells once one has survived: cheap when only
// the existence of a nonzero cell matters (mutation controls)
// max_rounds caps the certificate-search effort per surviving cell; lower it
// for informational audits where "unresolved" is an acceptable verdict
ReduceResult reduce_mod_divergence_traced(const WedgeExpr& e, bool fail_fast = false,
                                          int max_rounds = 3);
WedgeExpr reduce_mod_divergence(const WedgeExpr& e);

// brute-force soundness oracle for purely local multi-vectors: polarize the
// slots into independent test dependents and run the scalar divergence test
bool divergence_bruteforce(const WedgeExpr& e);

}  // namespace ghe
