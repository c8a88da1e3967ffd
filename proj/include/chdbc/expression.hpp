#pragma once

// Scalar expressions in x, y, t used by config files, e.g.
//   0.1*cos(2*pi*x/4) + 0.05*sin(pi*y)
// Operators + - * / ^ and unary minus; functions sin cos tan exp log sqrt abs
// tanh min max step (step(s) = 1 for s >= 0, else 0); constants pi, e.

#include <memory>
#include <string>

namespace chdbc {

class Expression {
 public:
  struct Node;

  /// Throws ERR_PARSE with the offending position.
  static Expression parse(const std::string& text);

  double operator()(double x, double y, double t) const;
  const std::string& text() const { return text_; }
  /// True when the expression does not depend on x, y or t.
  bool constant() const;
  bool depends_on_t() const;

 private:
  std::string text_;
  std::shared_ptr<const Node> root_;
};

}  // namespace chdbc
