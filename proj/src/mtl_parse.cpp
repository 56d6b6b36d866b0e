#include <cctype>
#include <charconv>
#include <sstream>

#include "clv/error.hpp"
#include "clv/mtl.hpp"

namespace clv::mtl {

namespace {

struct Token {
  std::string text;
  std::size_t offset = 0;
};

std::vector<Token> tokenize(const std::string& s) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < s.size()) {
    const char c = s[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
    } else if (c == '(' || c == ')') {
      out.push_back({std::string(1, c), i});
      ++i;
    } else {
      const std::size_t start = i;
      while (i < s.size() && !std::isspace(static_cast<unsigned char>(s[i])) && s[i] != '(' &&
             s[i] != ')') {
        ++i;
      }
      out.push_back({s.substr(start, i - start), start});
    }
  }
  return out;
}

bool parse_number(const std::string& text, double& out) {
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

bool is_identifier(const std::string& t) {
  if (t.empty() || !(std::isalpha(static_cast<unsigned char>(t[0])) || t[0] == '_')) return false;
  for (char c : t) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_')) return false;
  }
  return true;
}

class Parser {
 public:
  explicit Parser(const std::string& text) : text_(text), tokens_(tokenize(text)) {}

  Formula parse_top() {
    if (tokens_.empty()) fail("empty formula");
    Formula f;
    if (peek().text == "(") {
      f = parse_formula();
    } else {
      f = parse_formula_body(next().text);
    }
    if (pos_ != tokens_.size()) fail("unexpected trailing token '" + peek().text + "'");
    return f;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const {
    std::size_t offset = pos_ < tokens_.size() ? tokens_[pos_].offset : text_.size();
    throw ParseError("formula parse error at offset " + std::to_string(offset) + ": " + msg);
  }

  const Token& peek() const {
    if (pos_ >= tokens_.size()) fail("unexpected end of formula");
    return tokens_[pos_];
  }

  const Token& next() {
    const Token& t = peek();
    ++pos_;
    return t;
  }

  void expect(const std::string& s) {
    if (next().text != s) {
      --pos_;
      fail("expected '" + s + "'");
    }
  }

  double number() {
    const Token& t = next();
    double v = 0.0;
    if (!parse_number(t.text, v)) {
      --pos_;
      fail("expected a number, got '" + t.text + "'");
    }
    return v;
  }

  Formula parse_formula() {
    const Token& t = next();
    if (t.text == "(") {
      Formula f = parse_formula_body(next().text);
      expect(")");
      return f;
    }
    if (t.text == "true") return truth();
    if (t.text == "false") return falsity();
    const auto builtins = builtin_formulas();
    if (auto it = builtins.find(t.text); it != builtins.end()) return it->second;
    --pos_;
    fail("expected a formula, got '" + t.text + "'");
  }

  bool at_close() const { return pos_ >= tokens_.size() || tokens_[pos_].text == ")"; }

  Formula parse_formula_body(const std::string& head) {
    if (head == "true") return truth();
    if (head == "false") return falsity();
    if (head == "not") return negation(parse_formula());
    if (head == "and" || head == "or") {
      Formula acc = parse_formula();
      std::vector<Formula> rest;
      while (!at_close()) rest.push_back(parse_formula());
      if (rest.empty()) fail("'" + head + "' needs at least two operands");
      // Right-nested so that (and a b c) == (and a (and b c)).
      Formula tail = rest.back();
      for (std::size_t k = rest.size() - 1; k-- > 0;) {
        tail = head == "and" ? conj(rest[k], tail) : disj(rest[k], tail);
      }
      return head == "and" ? conj(acc, tail) : disj(acc, tail);
    }
    if (head == "always" || head == "eventually" || head == "until") {
      const double t1 = number();
      const double t2 = number();
      if (!(t1 >= 0.0) || !(t2 >= t1)) fail("window must satisfy 0 <= t1 <= t2");
      Formula a = parse_formula();
      if (head == "always") return always(t1, t2, a);
      if (head == "eventually") return eventually(t1, t2, a);
      return until(t1, t2, a, parse_formula());
    }
    if (head == "geq" || head == "gt" || head == "leq" || head == "lt") {
      ExprPtr a = parse_expr();
      ExprPtr b = parse_expr();
      if (head == "geq") return geq(a, b);
      if (head == "gt") return gt(a, b);
      if (head == "leq") return geq(b, a);
      return gt(b, a);
    }
    --pos_;
    fail("unknown formula operator '" + head + "'");
  }

  ExprPtr parse_expr() {
    const Token& t = next();
    double v = 0.0;
    if (parse_number(t.text, v)) return constant(v);
    if (t.text == "(") {
      const std::string op = next().text;
      ExprPtr out;
      if (op == "add" || op == "sub" || op == "mul") {
        ExprPtr a = parse_expr();
        ExprPtr b = parse_expr();
        out = op == "add" ? add(a, b) : op == "sub" ? sub(a, b) : mul(a, b);
      } else if (op == "neg") {
        out = neg(parse_expr());
      } else if (op == "abs") {
        out = abs(parse_expr());
      } else {
        --pos_;
        fail("unknown expression operator '" + op + "'");
      }
      expect(")");
      return out;
    }
    if (is_identifier(t.text)) return chan(t.text);
    --pos_;
    fail("expected an expression, got '" + t.text + "'");
  }

  const std::string& text_;
  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
};

std::string num(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string nested(const Formula& f) {
  if (f->kind == Node::Kind::True) return "true";
  if (f->kind == Node::Kind::False) return "false";
  return "(" + to_string(f) + ")";
}

}  // namespace

Formula parse(const std::string& text) { return Parser(text).parse_top(); }

std::string to_string(const ExprPtr& e) {
  switch (e->kind) {
    case Expr::Kind::Constant:
      return num(e->value);
    case Expr::Kind::Channel:
      return e->channel;
    case Expr::Kind::Add:
      return "(add " + to_string(e->lhs) + " " + to_string(e->rhs) + ")";
    case Expr::Kind::Sub:
      return "(sub " + to_string(e->lhs) + " " + to_string(e->rhs) + ")";
    case Expr::Kind::Mul:
      return "(mul " + to_string(e->lhs) + " " + to_string(e->rhs) + ")";
    case Expr::Kind::Neg:
      return "(neg " + to_string(e->lhs) + ")";
    case Expr::Kind::Abs:
      return "(abs " + to_string(e->lhs) + ")";
  }
  return {};
}

std::string to_string(const Formula& f) {
  switch (f->kind) {
    case Node::Kind::True:
      return "true";
    case Node::Kind::False:
      return "false";
    case Node::Kind::Predicate:
      return std::string(f->strict ? "gt " : "geq ") + to_string(f->zeta) + " 0";
    case Node::Kind::Not:
      return "not " + nested(f->lhs);
    case Node::Kind::And:
      return "and " + nested(f->lhs) + " " + nested(f->rhs);
    case Node::Kind::Or:
      return "or " + nested(f->lhs) + " " + nested(f->rhs);
    case Node::Kind::Always:
      return "always " + num(f->t1) + " " + num(f->t2) + " " + nested(f->lhs);
    case Node::Kind::Eventually:
      return "eventually " + num(f->t1) + " " + num(f->t2) + " " + nested(f->lhs);
    case Node::Kind::Until:
      return "until " + num(f->t1) + " " + num(f->t2) + " " + nested(f->lhs) + " " + nested(f->rhs);
  }
  return {};
}

}  // namespace clv::mtl
