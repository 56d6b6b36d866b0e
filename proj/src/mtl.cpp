#include "clv/mtl.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_map>

#include "clv/error.hpp"

namespace clv::mtl {

ExprPtr constant(double v) {
  auto e = std::make_shared<Expr>();
  e->kind = Expr::Kind::Constant;
  e->value = v;
  return e;
}

ExprPtr chan(std::string name) {
  auto e = std::make_shared<Expr>();
  e->kind = Expr::Kind::Channel;
  e->channel = std::move(name);
  return e;
}

namespace {

ExprPtr binary(Expr::Kind k, ExprPtr a, ExprPtr b) {
  auto e = std::make_shared<Expr>();
  e->kind = k;
  e->lhs = std::move(a);
  e->rhs = std::move(b);
  return e;
}

Formula make(Node::Kind k) {
  auto n = std::make_shared<Node>();
  n->kind = k;
  return n;
}

Formula temporal(Node::Kind k, double t1, double t2, Formula a, Formula b) {
  if (!(t1 >= 0.0) || !(t2 >= t1)) {
    throw InvalidArgument("temporal window must satisfy 0 <= t1 <= t2");
  }
  auto n = std::make_shared<Node>();
  n->kind = k;
  n->t1 = t1;
  n->t2 = t2;
  n->lhs = std::move(a);
  n->rhs = std::move(b);
  return n;
}

}  // namespace

ExprPtr add(ExprPtr a, ExprPtr b) { return binary(Expr::Kind::Add, std::move(a), std::move(b)); }
ExprPtr sub(ExprPtr a, ExprPtr b) { return binary(Expr::Kind::Sub, std::move(a), std::move(b)); }
ExprPtr mul(ExprPtr a, ExprPtr b) { return binary(Expr::Kind::Mul, std::move(a), std::move(b)); }
ExprPtr neg(ExprPtr a) { return binary(Expr::Kind::Neg, std::move(a), nullptr); }
ExprPtr abs(ExprPtr a) { return binary(Expr::Kind::Abs, std::move(a), nullptr); }

Formula truth() { return make(Node::Kind::True); }
Formula falsity() { return make(Node::Kind::False); }

Formula predicate(ExprPtr zeta, bool strict) {
  auto n = std::make_shared<Node>();
  n->kind = Node::Kind::Predicate;
  n->zeta = std::move(zeta);
  n->strict = strict;
  return n;
}

namespace {
ExprPtr difference(ExprPtr a, ExprPtr b) {
  if (b->kind == Expr::Kind::Constant && b->value == 0.0) return a;
  return sub(std::move(a), std::move(b));
}
}  // namespace

Formula geq(ExprPtr a, ExprPtr b) { return predicate(difference(std::move(a), std::move(b)), false); }
Formula gt(ExprPtr a, ExprPtr b) { return predicate(difference(std::move(a), std::move(b)), true); }

Formula negation(Formula f) {
  auto n = std::make_shared<Node>();
  n->kind = Node::Kind::Not;
  n->lhs = std::move(f);
  return n;
}

Formula conj(Formula a, Formula b) {
  auto n = std::make_shared<Node>();
  n->kind = Node::Kind::And;
  n->lhs = std::move(a);
  n->rhs = std::move(b);
  return n;
}

Formula disj(Formula a, Formula b) {
  auto n = std::make_shared<Node>();
  n->kind = Node::Kind::Or;
  n->lhs = std::move(a);
  n->rhs = std::move(b);
  return n;
}

Formula always(double t1, double t2, Formula f) {
  return temporal(Node::Kind::Always, t1, t2, std::move(f), nullptr);
}

Formula eventually(double t1, double t2, Formula f) {
  return temporal(Node::Kind::Eventually, t1, t2, std::move(f), nullptr);
}

Formula until(double t1, double t2, Formula f, Formula g) {
  return temporal(Node::Kind::Until, t1, t2, std::move(f), std::move(g));
}

// ---------------------------------------------------------------------------

namespace {

class Evaluator {
 public:
  explicit Evaluator(const Trajectory& traj) : traj_(traj), last_(traj.size() - 1) {}

  bool eval(const Node& n, std::size_t i) {
    switch (n.kind) {
      case Node::Kind::True:
        return true;
      case Node::Kind::False:
        return false;
      case Node::Kind::Predicate: {
        const double z = value(*n.zeta, i);
        return n.strict ? z > 0.0 : z >= 0.0;
      }
      case Node::Kind::Not:
        return !eval(*n.lhs, i);
      case Node::Kind::And:
        return eval(*n.lhs, i) && eval(*n.rhs, i);
      case Node::Kind::Or:
        return eval(*n.lhs, i) || eval(*n.rhs, i);
      case Node::Kind::Always: {
        const auto [lo, hi] = window(n, i);
        for (std::size_t j = lo; j <= hi; ++j) {
          if (!eval(*n.lhs, j)) return false;
        }
        return true;
      }
      case Node::Kind::Eventually: {
        const auto [lo, hi] = window(n, i);
        for (std::size_t j = lo; j <= hi; ++j) {
          if (eval(*n.lhs, j)) return true;
        }
        return false;
      }
      case Node::Kind::Until: {
        // psi at some j in the window, phi at every sample in [lo, j).
        const auto [lo, hi] = window(n, i);
        for (std::size_t j = lo; j <= hi; ++j) {
          if (eval(*n.rhs, j)) return true;
          if (!eval(*n.lhs, j)) return false;
        }
        return false;
      }
    }
    return false;
  }

 private:
  std::pair<std::size_t, std::size_t> window(const Node& n, std::size_t i) const {
    const double h = traj_.step();
    const auto off1 = static_cast<std::size_t>(std::llround(n.t1 / h));
    const auto off2 = static_cast<std::size_t>(std::llround(n.t2 / h));
    if (i + off2 > last_) {
      throw WindowOutOfRange("temporal window [" + std::to_string(n.t1) + ", " +
                             std::to_string(n.t2) + "] at t=" + std::to_string(traj_.times()[i]) +
                             " exceeds trajectory horizon " + std::to_string(traj_.t_final()));
    }
    return {i + off1, i + off2};
  }

  const std::vector<double>& column(const Expr& e) {
    auto it = columns_.find(&e);
    if (it != columns_.end()) return *it->second;
    const auto* col = traj_.find_channel(e.channel);
    if (col == nullptr) throw UnknownChannel("unknown trajectory channel '" + e.channel + "'");
    columns_.emplace(&e, col);
    return *col;
  }

  double value(const Expr& e, std::size_t i) {
    switch (e.kind) {
      case Expr::Kind::Constant:
        return e.value;
      case Expr::Kind::Channel:
        return column(e)[i];
      case Expr::Kind::Add:
        return value(*e.lhs, i) + value(*e.rhs, i);
      case Expr::Kind::Sub:
        return value(*e.lhs, i) - value(*e.rhs, i);
      case Expr::Kind::Mul:
        return value(*e.lhs, i) * value(*e.rhs, i);
      case Expr::Kind::Neg:
        return -value(*e.lhs, i);
      case Expr::Kind::Abs:
        return std::abs(value(*e.lhs, i));
    }
    return 0.0;
  }

  const Trajectory& traj_;
  std::size_t last_;
  std::unordered_map<const Expr*, const std::vector<double>*> columns_;
};

}  // namespace

bool evaluate(const Formula& f, const Trajectory& traj, double t) {
  if (traj.size() == 0) throw InvalidArgument("cannot evaluate a formula on an empty trajectory");
  if (t < 0.0 || t > traj.t_final() + 0.5 * traj.step()) {
    throw WindowOutOfRange("evaluation time outside [0, T_final]");
  }
  Evaluator ev(traj);
  return ev.eval(*f, traj.index_at(t));
}

Label label(const Formula& f, const Trajectory& traj) {
  if (traj.diverged()) return Label::Unsafe;
  return label_from_sign(evaluate(f, traj, 0.0));
}

namespace {

void collect(const ExprPtr& e, std::set<std::string>& out) {
  if (!e) return;
  if (e->kind == Expr::Kind::Channel) out.insert(e->channel);
  collect(e->lhs, out);
  collect(e->rhs, out);
}

void collect(const Formula& f, std::set<std::string>& out) {
  if (!f) return;
  collect(f->zeta, out);
  collect(f->lhs, out);
  collect(f->rhs, out);
}

}  // namespace

std::vector<std::string> channels(const Formula& f) {
  std::set<std::string> out;
  collect(f, out);
  return {out.begin(), out.end()};
}

double horizon(const Formula& f) {
  switch (f->kind) {
    case Node::Kind::True:
    case Node::Kind::False:
    case Node::Kind::Predicate:
      return 0.0;
    case Node::Kind::Not:
      return horizon(f->lhs);
    case Node::Kind::And:
    case Node::Kind::Or:
      return std::max(horizon(f->lhs), horizon(f->rhs));
    case Node::Kind::Always:
    case Node::Kind::Eventually:
      return f->t2 + horizon(f->lhs);
    case Node::Kind::Until:
      return f->t2 + std::max(horizon(f->lhs), horizon(f->rhs));
  }
  return 0.0;
}

// ---------------------------------------------------------------------------

namespace {

Formula interval_membership(double t1, double t2, double lo, double hi, IntervalReading reading,
                            double t1_upper, double t2_upper) {
  auto x1 = chan("x1");
  auto above = geq(x1, constant(lo));  // x1 - lo >= 0
  auto below = geq(constant(hi), x1);  // hi - x1 >= 0
  if (reading == IntervalReading::Simultaneous) return eventually(t1, t2, conj(above, below));
  return conj(eventually(t1, t2, above), eventually(t1_upper, t2_upper, below));
}

}  // namespace

std::map<std::string, Formula> builtin_formulas(IntervalReading reading) {
  std::map<std::string, Formula> out;
  out["phi_bound"] = always(0.0, 40.0, geq(sub(constant(1.0), abs(chan("e1"))), constant(0.0)));
  auto phi1 = interval_membership(2.0, 3.0, 0.7, 1.3, reading, 2.0, 3.0);
  auto phi2 = interval_membership(12.0, 13.0, 1.1, 1.7, reading, 12.0, 13.0);
  auto phi3 = always(22.4, 22.6,
                     conj(geq(add(chan("x1"), constant(1.6)), constant(0.0)),
                          geq(sub(constant(-1.2), chan("x1")), constant(0.0))));
  out["phi1"] = phi1;
  out["phi2"] = phi2;
  out["phi3"] = phi3;
  out["phi"] = conj(phi1, conj(phi2, phi3));
  // Van der Pol convergence: non-diverged and inside the 0.5 box at t = 30.
  out["vdp_roa"] = always(30.0, 30.0,
                          conj(gt(constant(0.5), abs(chan("x1"))), gt(constant(0.5), abs(chan("x2")))));
  return out;
}

Formula resolve(const std::string& name_or_dsl, IntervalReading reading) {
  const auto builtins = builtin_formulas(reading);
  if (auto it = builtins.find(name_or_dsl); it != builtins.end()) return it->second;
  return parse(name_or_dsl);
}

}  // namespace clv::mtl
