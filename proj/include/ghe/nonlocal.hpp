#pragma once

// Nonlocalities generated by w^{-1}, where  w = u_yz D_x - u_xz D_y.
//
// Every application of w^{-1} to an expression that has no exact preimage is
// interned as an "atom": an opaque quantity S with  w(S) = payload.  Atoms
// carry only y/z derivative indices; the x-derivative is eliminated through
// the defining relation,  S_x = payload/u_yz + (u_xz/u_yz) S_y.
// The additive kernel of w (functions of z and u_z alone) is fixed to the
// zero representative throughout.

#include <array>
#include <optional>

#include "ghe/diffalg.hpp"

namespace ghe {

// --- atom registry ---------------------------------------------------------

std::uint32_t intern_atom(const DiffExpr& payload);
const DiffExpr& atom_payload(std::uint32_t id);
int atom_nesting(std::uint32_t id);  // 1 = local payload, 2 = payload holds atoms, ...
void reset_atoms();                  // test isolation; invalidates existing atom symbols

// --- the operator w and friends -------------------------------------------

DiffExpr w_apply(const DiffExpr& e);
DiffExpr zeta_apply(const DiffExpr& e);  // zeta = u_yz D_x - u_xy D_z

// exact preimage under w within a finitely generated candidate pool;
// deterministic representative (free components set to zero)
std::optional<DiffExpr> w_preimage(const DiffExpr& P);

// w^{-1} e: exact preimage when one exists, otherwise a combination of atoms
// (one per monomial payload after pulling out factors that commute with w)
DiffExpr apply_invw(const DiffExpr& e, int depth_cap = 2);

// rewrite e by eliminating atoms whose payload combinations are exact
// w-images; atoms that survive have genuinely nonlocal content
DiffExpr reduce_mod_atoms(const DiffExpr& e);

// decide e == 0 modulo the atom relations w(S_i) = payload_i
bool is_zero_mod_w(const DiffExpr& e, int depth_cap = 4);

// --- linear (pseudo)differential operators ---------------------------------

struct OpFactor {
  enum class Kind { Mul, Diff, InvW } kind = Kind::Mul;
  DiffExpr c;  // Mul
  Axis ax;     // Diff
};

using OpTerm = std::vector<OpFactor>;  // composition, applied right-to-left

struct LinOp {
  std::vector<OpTerm> terms;  // implicit sum

  static LinOp zero() { return {}; }
  static LinOp identity();
  static LinOp mul(const DiffExpr& c);
  static LinOp diff(Axis ax);
  static LinOp invw();
  static LinOp w();  // u_yz D_x - u_xz D_y
  bool is_zero_op() const { return terms.empty(); }
};

LinOp operator+(const LinOp& a, const LinOp& b);
LinOp operator-(const LinOp& a, const LinOp& b);
LinOp operator-(const LinOp& a);
LinOp operator*(const LinOp& a, const LinOp& b);  // composition a after b

DiffExpr op_apply(const LinOp& op, const DiffExpr& e, int depth_cap = 2);

// formal adjoint: Mul self-adjoint, D -> -D, InvW -> -InvW
LinOp op_adjoint(const LinOp& op);

// canonical expansion sum c_K D^K for purely local operators (no InvW)
std::vector<std::pair<MultiIndex, DiffExpr>> op_local_normal_form(const LinOp& op);

// inverse for the shapes that actually occur: Mul(c), and c*w
std::optional<LinOp> op_invert(const LinOp& op);

// semantic operator equality: act on a generic dependent and decide with the
// atom-relation zero test
bool op_equal_semantic(const LinOp& a, const LinOp& b, Dep test = Dep::Rho, int depth_cap = 4);

// substitute a parameter symbol inside every multiplication coefficient
LinOp op_subst_param(const LinOp& op, Sym p, const DiffExpr& value);

// --- 2x2 operator matrices --------------------------------------------------

struct LinOp2 {
  LinOp m[2][2];
  static LinOp2 identity();
};

LinOp2 operator+(const LinOp2& a, const LinOp2& b);
LinOp2 operator-(const LinOp2& a, const LinOp2& b);
LinOp2 operator*(const LinOp2& a, const LinOp2& b);
LinOp2 mat_scale(const LinOp& s, const LinOp2& a);  // s * each entry (left)
LinOp2 mat_adjoint(const LinOp2& a);
std::array<DiffExpr, 2> mat_apply(const LinOp2& a, const std::array<DiffExpr, 2>& x,
                                  int depth_cap = 2);
std::optional<LinOp2> mat_inverse(const LinOp2& a);
bool mat_equal_semantic(const LinOp2& a, const LinOp2& b, int depth_cap = 4);
LinOp2 mat_subst_param(const LinOp2& a, Sym p, const DiffExpr& value);

}  // namespace ghe
