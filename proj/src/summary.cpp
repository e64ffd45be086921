#include "gce/summary.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>

#include "gce/error.hpp"

namespace gce {

class ExpressionParser {
 public:
  using Op = Expression::Op;

  ExpressionParser(const std::string& text, std::vector<Expression::Instr>& out)
      : s_(text), out_(out) {}

  void parse() {
    expr();
    skip();
    if (pos_ != s_.size()) fail("unexpected '" + std::string(1, s_[pos_]) + "'");
  }

 private:
  void fail(const std::string& what) const {
    throw ConfigError("summary expression '" + s_ + "': " + what + " at offset " +
                      std::to_string(pos_));
  }

  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void emit(Op op, double value = 0.0) { out_.push_back({op, value}); }

  void expr() {
    term();
    for (;;) {
      if (accept('+')) {
        term();
        emit(Op::Add);
      } else if (accept('-')) {
        term();
        emit(Op::Sub);
      } else {
        return;
      }
    }
  }

  void term() {
    unary();
    for (;;) {
      if (accept('*')) {
        unary();
        emit(Op::Mul);
      } else if (accept('/')) {
        unary();
        emit(Op::Div);
      } else {
        return;
      }
    }
  }

  void unary() {
    if (accept('-')) {
      unary();
      emit(Op::Neg);
      return;
    }
    if (accept('+')) {
      unary();
      return;
    }
    power();
  }

  // right-associative; binds tighter than unary minus on its left
  void power() {
    primary();
    if (accept('^')) {
      unary();
      emit(Op::Pow);
    }
  }

  void primary() {
    skip();
    if (pos_ >= s_.size()) fail("unexpected end");
    const char c = s_[pos_];
    if (accept('(')) {
      expr();
      if (!accept(')')) fail("missing ')'");
      return;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      const char* begin = s_.c_str() + pos_;
      char* end = nullptr;
      const double value = std::strtod(begin, &end);
      if (end == begin) fail("bad number");
      pos_ += static_cast<std::size_t>(end - begin);
      emit(Op::Const, value);
      return;
    }
    if (std::isalpha(static_cast<unsigned char>(c))) {
      std::size_t start = pos_;
      while (pos_ < s_.size() && std::isalnum(static_cast<unsigned char>(s_[pos_]))) ++pos_;
      const std::string word = s_.substr(start, pos_ - start);
      if (word == "u") return emit(Op::U);
      if (word == "v") return emit(Op::V);
      Op fn;
      if (word == "log") {
        fn = Op::Log;
      } else if (word == "exp") {
        fn = Op::Exp;
      } else if (word == "sqrt") {
        fn = Op::Sqrt;
      } else if (word == "abs") {
        fn = Op::Abs;
      } else {
        pos_ = start;
        fail("unknown name '" + word + "'");
      }
      if (!accept('(')) fail("expected '(' after " + word);
      expr();
      if (!accept(')')) fail("missing ')'");
      emit(fn);
      return;
    }
    fail("unexpected '" + std::string(1, c) + "'");
  }

  const std::string& s_;
  std::vector<Expression::Instr>& out_;
  std::size_t pos_ = 0;
};

Expression::Expression(const std::string& text) : text_(text) {
  ExpressionParser(text_, code_).parse();
}

double Expression::operator()(double u, double v) const {
  std::vector<double> stack(code_.size() + 1);
  std::size_t top = 0;
  for (const auto& in : code_) {
    switch (in.op) {
      case Op::Const: stack[top++] = in.value; break;
      case Op::U: stack[top++] = u; break;
      case Op::V: stack[top++] = v; break;
      case Op::Add: --top; stack[top - 1] += stack[top]; break;
      case Op::Sub: --top; stack[top - 1] -= stack[top]; break;
      case Op::Mul: --top; stack[top - 1] *= stack[top]; break;
      case Op::Div: --top; stack[top - 1] /= stack[top]; break;
      case Op::Pow: --top; stack[top - 1] = std::pow(stack[top - 1], stack[top]); break;
      case Op::Neg: stack[top - 1] = -stack[top - 1]; break;
      case Op::Log: stack[top - 1] = std::log(stack[top - 1]); break;
      case Op::Exp: stack[top - 1] = std::exp(stack[top - 1]); break;
      case Op::Sqrt: stack[top - 1] = std::sqrt(stack[top - 1]); break;
      case Op::Abs: stack[top - 1] = std::abs(stack[top - 1]); break;
    }
  }
  return top == 1 ? stack[0] : std::nan("");
}

SummaryMap::SummaryMap(SummarySpec spec) : spec_(std::move(spec)) {
  if (spec_.name.empty()) {
    spec_.name = spec_.kind == SummarySpec::Kind::Difference ? "difference"
                 : spec_.kind == SummarySpec::Kind::Ratio    ? "ratio"
                                                             : "custom";
  }
  if (spec_.kind == SummarySpec::Kind::Custom) {
    if (spec_.f.empty() || spec_.df_du.empty() || spec_.df_dv.empty()) {
      throw ConfigError("custom summary needs f, df_du and df_dv");
    }
    f_ = Expression(spec_.f);
    du_ = Expression(spec_.df_du);
    dv_ = Expression(spec_.df_dv);
  }
}

double SummaryMap::value(const Eigen::Vector2d& lambda) const {
  switch (spec_.kind) {
    case SummarySpec::Kind::Difference: return lambda(0) - lambda(1);
    case SummarySpec::Kind::Ratio:
      if (lambda(1) == 0.0) throw SingularityError("ratio summary with lambda_0 = 0");
      return lambda(0) / lambda(1);
    case SummarySpec::Kind::Custom: {
      const double r = f_(lambda(0), lambda(1));
      if (!std::isfinite(r)) {
        throw NumericalError("summary '" + spec_.name + "' is not finite at (" +
                             std::to_string(lambda(0)) + ", " + std::to_string(lambda(1)) + ")");
      }
      return r;
    }
  }
  return 0.0;
}

Eigen::Vector2d SummaryMap::gradient(const Eigen::Vector2d& lambda) const {
  switch (spec_.kind) {
    case SummarySpec::Kind::Difference: return {1.0, -1.0};
    case SummarySpec::Kind::Ratio:
      if (lambda(1) == 0.0) throw SingularityError("ratio summary with lambda_0 = 0");
      return {1.0 / lambda(1), -lambda(0) / (lambda(1) * lambda(1))};
    case SummarySpec::Kind::Custom: {
      Eigen::Vector2d g(du_(lambda(0), lambda(1)), dv_(lambda(0), lambda(1)));
      if (!g.allFinite()) {
        throw NumericalError("gradient of summary '" + spec_.name + "' is not finite");
      }
      return g;
    }
  }
  return Eigen::Vector2d::Zero();
}

void SummaryMap::check_gradient(const Eigen::Vector2d& lambda, double tolerance) const {
  const Eigen::Vector2d g = gradient(lambda);
  for (int c = 0; c < 2; ++c) {
    const double h = 1e-5 * (1.0 + std::abs(lambda(c)));
    Eigen::Vector2d up = lambda, down = lambda;
    up(c) += h;
    down(c) -= h;
    const double fd = (value(up) - value(down)) / (2.0 * h);
    const double err = std::abs(fd - g(c)) / std::max(1.0, std::abs(g(c)));
    if (!(err <= tolerance)) {
      throw NumericalError("summary '" + spec_.name + "': analytic d/d" + (c == 0 ? "u" : "v") +
                           " = " + std::to_string(g(c)) + " but finite differences give " +
                           std::to_string(fd));
    }
  }
}

SummaryValue summarize(const SummaryMap& f, const Eigen::Vector2d& lambda,
                       const Eigen::Matrix2d& cov) {
  SummaryValue out;
  out.value = f.value(lambda);
  out.gradient = f.gradient(lambda);
  out.variance = out.gradient.dot(cov * out.gradient);
  return out;
}

}  // namespace gce
