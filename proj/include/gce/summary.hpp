#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

namespace gce {

/// Arithmetic expression over the variables u and v, compiled to postfix.
/// Grammar: numbers, u, v, + - * / ^, unary minus, parentheses and the
/// functions log, exp, sqrt, abs.
class Expression {
 public:
  Expression() = default;
  explicit Expression(const std::string& text);

  double operator()(double u, double v) const;
  const std::string& text() const { return text_; }
  bool empty() const { return code_.empty(); }

 private:
  enum class Op { Const, U, V, Add, Sub, Mul, Div, Pow, Neg, Log, Exp, Sqrt, Abs };
  struct Instr {
    Op op;
    double value = 0.0;
  };
  std::string text_;
  std::vector<Instr> code_;
  friend class ExpressionParser;
};

struct SummarySpec {
  enum class Kind { Difference, Ratio, Custom };
  Kind kind = Kind::Ratio;
  std::string name;  // label in reports; defaults to the kind name
  std::string f;
  std::string df_du;
  std::string df_dv;

  static SummarySpec difference() { return {Kind::Difference, "difference", "", "", ""}; }
  static SummarySpec ratio() { return {Kind::Ratio, "ratio", "", "", ""}; }
  static SummarySpec custom(std::string name, std::string f, std::string df_du, std::string df_dv) {
    return {Kind::Custom, std::move(name), std::move(f), std::move(df_du), std::move(df_dv)};
  }
};

/// Compiled summary map f(λ1, λ0) with its gradient.
class SummaryMap {
 public:
  explicit SummaryMap(SummarySpec spec);

  double value(const Eigen::Vector2d& lambda) const;
  Eigen::Vector2d gradient(const Eigen::Vector2d& lambda) const;
  const SummarySpec& spec() const { return spec_; }
  const std::string& name() const { return spec_.name; }

  /// Compares the analytic gradient against central differences with step
  /// 1e-5·(1+|λ|). Throws NumericalError when a component disagrees by more
  /// than `tolerance` relative to max(1, |g|).
  void check_gradient(const Eigen::Vector2d& lambda, double tolerance = 1e-4) const;

 private:
  SummarySpec spec_;
  Expression f_, du_, dv_;
};

struct SummaryValue {
  double value = 0.0;
  double variance = 0.0;
  Eigen::Vector2d gradient = Eigen::Vector2d::Zero();
};

/// f(λ) and the delta-method variance ∇fᵀ·cov·∇f.
SummaryValue summarize(const SummaryMap& f, const Eigen::Vector2d& lambda,
                       const Eigen::Matrix2d& cov);

}  // namespace gce
