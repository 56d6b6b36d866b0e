#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "clv/ode.hpp"

namespace clv {

enum class Label : int { Unsafe = -1, Safe = 1 };

inline int to_int(Label y) { return static_cast<int>(y); }
inline Label label_from_sign(bool safe) { return safe ? Label::Safe : Label::Unsafe; }

namespace mtl {

// Arithmetic over named trajectory channels.
struct Expr {
  enum class Kind { Constant, Channel, Add, Sub, Mul, Neg, Abs };
  Kind kind = Kind::Constant;
  double value = 0.0;
  std::string channel;
  std::shared_ptr<const Expr> lhs;
  std::shared_ptr<const Expr> rhs;
};
using ExprPtr = std::shared_ptr<const Expr>;

ExprPtr constant(double v);
ExprPtr chan(std::string name);
ExprPtr add(ExprPtr a, ExprPtr b);
ExprPtr sub(ExprPtr a, ExprPtr b);
ExprPtr mul(ExprPtr a, ExprPtr b);
ExprPtr neg(ExprPtr a);
ExprPtr abs(ExprPtr a);

struct Node;
using Formula = std::shared_ptr<const Node>;

// Formula tree. A predicate holds iff zeta > 0 (strict) or zeta >= 0.
struct Node {
  enum class Kind { True, False, Predicate, Not, And, Or, Always, Eventually, Until };
  Kind kind = Kind::True;
  ExprPtr zeta;
  bool strict = false;
  double t1 = 0.0;
  double t2 = 0.0;
  Formula lhs;
  Formula rhs;
};

Formula truth();
Formula falsity();
// zeta >= 0 (or > 0 when strict)
Formula predicate(ExprPtr zeta, bool strict = false);
// a - b >= 0
Formula geq(ExprPtr a, ExprPtr b);
Formula gt(ExprPtr a, ExprPtr b);
Formula negation(Formula f);
Formula conj(Formula a, Formula b);
Formula disj(Formula a, Formula b);
Formula always(double t1, double t2, Formula f);
Formula eventually(double t1, double t2, Formula f);
Formula until(double t1, double t2, Formula f, Formula g);

// Pointwise discrete semantics at time t; window endpoints snap to the
// nearest sample. Throws WindowOutOfRange when t + t2 exceeds the
// trajectory horizon and UnknownChannel for unresolved channel names.
bool evaluate(const Formula& f, const Trajectory& traj, double t = 0.0);

// +1 iff the formula holds at t = 0; diverged trajectories are always -1.
Label label(const Formula& f, const Trajectory& traj);

// Largest t2 reached from t = 0 (nested windows accumulate).
double horizon(const Formula& f);

// Channel names referenced by the formula, sorted and unique.
std::vector<std::string> channels(const Formula& f);

// Prefix DSL, e.g. "always 0 40 (geq (sub 1 (abs e1)) 0)".
Formula parse(const std::string& text);
std::string to_string(const Formula& f);
std::string to_string(const ExprPtr& e);

enum class IntervalReading {
  // Membership in [lo, hi] at one common instant of the window.
  Simultaneous,
  // Two independently timed eventually clauses.
  Literal,
};

// phi_bound, phi1, phi2, phi3, phi, vdp_roa.
std::map<std::string, Formula> builtin_formulas(IntervalReading reading = IntervalReading::Simultaneous);

// Resolves a builtin name first, then falls back to parsing the DSL.
Formula resolve(const std::string& name_or_dsl,
                IntervalReading reading = IntervalReading::Simultaneous);

}  // namespace mtl
}  // namespace clv
