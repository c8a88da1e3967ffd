#include "chdbc/expression.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <numbers>
#include <vector>

#include "chdbc/error.hpp"

namespace chdbc {

struct Expression::Node {
  enum class Op { Num, X, Y, T, Add, Sub, Mul, Div, Pow, Neg, Call } op = Op::Num;
  double value = 0.0;
  std::string fn;
  std::vector<std::shared_ptr<const Node>> args;

  double eval(double x, double y, double t) const {
    switch (op) {
      case Op::Num: return value;
      case Op::X: return x;
      case Op::Y: return y;
      case Op::T: return t;
      case Op::Add: return args[0]->eval(x, y, t) + args[1]->eval(x, y, t);
      case Op::Sub: return args[0]->eval(x, y, t) - args[1]->eval(x, y, t);
      case Op::Mul: return args[0]->eval(x, y, t) * args[1]->eval(x, y, t);
      case Op::Div: return args[0]->eval(x, y, t) / args[1]->eval(x, y, t);
      case Op::Pow: return std::pow(args[0]->eval(x, y, t), args[1]->eval(x, y, t));
      case Op::Neg: return -args[0]->eval(x, y, t);
      case Op::Call: break;
    }
    const double a = args[0]->eval(x, y, t);
    if (fn == "sin") return std::sin(a);
    if (fn == "cos") return std::cos(a);
    if (fn == "tan") return std::tan(a);
    if (fn == "exp") return std::exp(a);
    if (fn == "log") return std::log(a);
    if (fn == "sqrt") return std::sqrt(a);
    if (fn == "abs") return std::abs(a);
    if (fn == "tanh") return std::tanh(a);
    if (fn == "step") return a >= 0.0 ? 1.0 : 0.0;
    const double b = args[1]->eval(x, y, t);
    if (fn == "min") return std::min(a, b);
    return std::max(a, b);
  }

  bool uses(Op var) const {
    if (op == var) return true;
    for (const auto& a : args)
      if (a->uses(var)) return true;
    return false;
  }
};

namespace {

using NodePtr = std::shared_ptr<const Expression::Node>;
using Op = Expression::Node::Op;

class Parser {
 public:
  explicit Parser(const std::string& s) : s_(s) {}

  NodePtr parse() {
    NodePtr n = expr();
    skip();
    if (pos_ != s_.size()) fail("unexpected '" + std::string(1, s_[pos_]) + "'");
    return n;
  }

 private:
  const std::string& s_;
  std::size_t pos_ = 0;

  [[noreturn]] void fail(const std::string& what) const {
    throw Error(ErrorCode::Parse, "expression '" + s_ + "' at position " + std::to_string(pos_) + ": " + what);
  }

  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  bool eat(char c) {
    skip();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  static NodePtr make(Op op, std::vector<NodePtr> args = {}, double v = 0.0, std::string fn = {}) {
    auto n = std::make_shared<Expression::Node>();
    n->op = op;
    n->args = std::move(args);
    n->value = v;
    n->fn = std::move(fn);
    return n;
  }

  NodePtr expr() {
    NodePtr lhs = term();
    for (;;) {
      if (eat('+')) lhs = make(Op::Add, {lhs, term()});
      else if (eat('-')) lhs = make(Op::Sub, {lhs, term()});
      else return lhs;
    }
  }

  NodePtr term() {
    NodePtr lhs = unary();
    for (;;) {
      if (eat('*')) lhs = make(Op::Mul, {lhs, unary()});
      else if (eat('/')) lhs = make(Op::Div, {lhs, unary()});
      else return lhs;
    }
  }

  NodePtr unary() {
    if (eat('-')) return make(Op::Neg, {unary()});
    if (eat('+')) return unary();
    return power();
  }

  NodePtr power() {
    NodePtr base = primary();
    if (eat('^')) return make(Op::Pow, {base, unary()});
    return base;
  }

  NodePtr primary() {
    skip();
    if (pos_ >= s_.size()) fail("unexpected end of input");
    if (eat('(')) {
      NodePtr n = expr();
      if (!eat(')')) fail("expected ')'");
      return n;
    }
    const char c = s_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      const char* begin = s_.c_str() + pos_;
      char* end = nullptr;
      const double v = std::strtod(begin, &end);
      if (end == begin) fail("bad number");
      pos_ += static_cast<std::size_t>(end - begin);
      return make(Op::Num, {}, v);
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      const std::size_t start = pos_;
      while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) ++pos_;
      const std::string id = s_.substr(start, pos_ - start);
      if (id == "x") return make(Op::X);
      if (id == "y") return make(Op::Y);
      if (id == "t") return make(Op::T);
      if (id == "pi") return make(Op::Num, {}, std::numbers::pi);
      if (id == "e") return make(Op::Num, {}, std::numbers::e);
      static const std::vector<std::string> unary_fns = {"sin", "cos", "tan", "exp", "log", "sqrt", "abs", "tanh", "step"};
      const bool is_unary = std::find(unary_fns.begin(), unary_fns.end(), id) != unary_fns.end();
      const bool is_binary = id == "min" || id == "max";
      if (!is_unary && !is_binary) fail("unknown identifier '" + id + "'");
      if (!eat('(')) fail("expected '(' after " + id);
      std::vector<NodePtr> args{expr()};
      if (is_binary) {
        if (!eat(',')) fail(id + " takes two arguments");
        args.push_back(expr());
      }
      if (!eat(')')) fail("expected ')'");
      return make(Op::Call, std::move(args), 0.0, id);
    }
    fail("unexpected '" + std::string(1, c) + "'");
  }
};

}  // namespace

Expression Expression::parse(const std::string& text) {
  Expression e;
  e.text_ = text;
  e.root_ = Parser(text).parse();
  return e;
}

double Expression::operator()(double x, double y, double t) const { return root_->eval(x, y, t); }

bool Expression::constant() const { return !root_->uses(Op::X) && !root_->uses(Op::Y) && !root_->uses(Op::T); }

bool Expression::depends_on_t() const { return root_->uses(Op::T); }

}  // namespace chdbc
