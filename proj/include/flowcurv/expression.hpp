#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "flowcurv/model.hpp"

namespace flowcurv {

/// Node of a polynomial / piecewise-linear expression tree over x1..xn.
/// Parameters are substituted by value when an expression is parsed.
struct Expr {
  enum class Kind { Const, Var, Add, Sub, Mul, Neg, Pow, Pwl, PwlSlope };

  Kind kind = Kind::Const;
  long double value = 0;  // Const; also the exponent of Pow
  int index = 0;          // Var: state index; Pwl/PwlSlope: pwl term index
  long double a = 0, b = 0;  // Pwl slopes
  std::shared_ptr<const Expr> lhs, rhs;
};
using ExprPtr = std::shared_ptr<const Expr>;

/// Parses `text` with variables x1..x`dim`. Errors are ConfigError carrying the
/// 1-based column. Every pwl(...) occurrence is assigned the next pwl term
/// index starting from `*pwl_counter`; its argument is appended to
/// `pwl_args` when non-null.
ExprPtr parse_expression(std::string_view text, int dim, const ParamSet& params, int* pwl_counter = nullptr,
                         std::vector<ExprPtr>* pwl_args = nullptr);

/// Parses a state-independent expression and returns its value.
long double parse_constant(std::string_view text, const ParamSet& params);

/// Symbolic partial derivative with respect to x_(var+1).
ExprPtr differentiate(const ExprPtr& e, int var);

bool is_constant(const ExprPtr& e);

std::string to_string(const ExprPtr& e);

/// Evaluates on plain scalars or jets. `branches[j]` is the branch of pwl term j.
template <typename S>
S evaluate(const Expr& e, const VectorX<S>& x, const std::vector<int>& branches) {
  using T = scalar_of_t<S>;
  switch (e.kind) {
    case Expr::Kind::Const:
      return S(static_cast<T>(e.value));
    case Expr::Kind::Var:
      return x[e.index];
    case Expr::Kind::Add:
      return evaluate(*e.lhs, x, branches) + evaluate(*e.rhs, x, branches);
    case Expr::Kind::Sub:
      return evaluate(*e.lhs, x, branches) - evaluate(*e.rhs, x, branches);
    case Expr::Kind::Mul:
      return evaluate(*e.lhs, x, branches) * evaluate(*e.rhs, x, branches);
    case Expr::Kind::Neg:
      return -evaluate(*e.lhs, x, branches);
    case Expr::Kind::Pow: {
      const S base = evaluate(*e.lhs, x, branches);
      S r = S(T(1));
      for (int k = 0; k < static_cast<int>(e.value); ++k) r = r * base;
      return r;
    }
    case Expr::Kind::Pwl: {
      const S u = evaluate(*e.lhs, x, branches);
      const T a = static_cast<T>(e.a), b = static_cast<T>(e.b);
      switch (branches[static_cast<std::size_t>(e.index)]) {
        case 1:
          return b * u + S(a - b);
        case -1:
          return b * u + S(b - a);
        default:
          return a * u;
      }
    }
    case Expr::Kind::PwlSlope:
      return S(static_cast<T>(branches[static_cast<std::size_t>(e.index)] == 0 ? e.a : e.b));
  }
  throw std::logic_error("unhandled expression node");
}

/// Builds a model from JSON text with keys `name`, `dim`, `params`, `rhs` and
/// optional `fixed_point_guesses`. `overrides` replace declared parameters.
ModelDef load_model(std::string_view json_text, const ParamSet& overrides = {});
ModelDef load_model_file(const std::filesystem::path& path, const ParamSet& overrides = {});

}  // namespace flowcurv
