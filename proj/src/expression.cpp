#include "flowcurv/expression.hpp"

#include <cctype>
#include <charconv>
#include <cstdlib>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace flowcurv {
namespace {

using Kind = Expr::Kind;

ExprPtr make_const(long double v) {
  auto e = std::make_shared<Expr>();
  e->kind = Kind::Const;
  e->value = v;
  return e;
}

ExprPtr make_var(int i) {
  auto e = std::make_shared<Expr>();
  e->kind = Kind::Var;
  e->index = i;
  return e;
}

bool is_const_value(const ExprPtr& e, long double v) { return e->kind == Kind::Const && e->value == v; }

ExprPtr make_binary(Kind k, ExprPtr l, ExprPtr r) {
  if (l->kind == Kind::Const && r->kind == Kind::Const) {
    switch (k) {
      case Kind::Add:
        return make_const(l->value + r->value);
      case Kind::Sub:
        return make_const(l->value - r->value);
      case Kind::Mul:
        return make_const(l->value * r->value);
      default:
        break;
    }
  }
  if (k == Kind::Add) {
    if (is_const_value(l, 0)) return r;
    if (is_const_value(r, 0)) return l;
  } else if (k == Kind::Sub) {
    if (is_const_value(r, 0)) return l;
  } else if (k == Kind::Mul) {
    if (is_const_value(l, 0) || is_const_value(r, 0)) return make_const(0);
    if (is_const_value(l, 1)) return r;
    if (is_const_value(r, 1)) return l;
  }
  auto e = std::make_shared<Expr>();
  e->kind = k;
  e->lhs = std::move(l);
  e->rhs = std::move(r);
  return e;
}

ExprPtr make_neg(ExprPtr x) {
  if (x->kind == Kind::Const) return make_const(-x->value);
  auto e = std::make_shared<Expr>();
  e->kind = Kind::Neg;
  e->lhs = std::move(x);
  return e;
}

ExprPtr make_pow(ExprPtr base, int k) {
  if (k == 0) return make_const(1);
  if (k == 1) return base;
  if (base->kind == Kind::Const) {
    long double r = 1;
    for (int i = 0; i < k; ++i) r *= base->value;
    return make_const(r);
  }
  auto e = std::make_shared<Expr>();
  e->kind = Kind::Pow;
  e->value = k;
  e->lhs = std::move(base);
  return e;
}

ExprPtr make_pwl(Kind kind, ExprPtr u, long double a, long double b, int index) {
  auto e = std::make_shared<Expr>();
  e->kind = kind;
  e->lhs = std::move(u);
  e->a = a;
  e->b = b;
  e->index = index;
  return e;
}

class Parser {
 public:
  Parser(std::string_view text, int dim, const ParamSet& params, int* counter, std::vector<ExprPtr>* args)
      : text_(text), dim_(dim), params_(params), counter_(counter), args_(args) {}

  ExprPtr parse() {
    skip_ws();
    if (pos_ >= text_.size()) fail("empty expression");
    ExprPtr e = parse_sum();
    skip_ws();
    if (pos_ < text_.size()) fail(std::string("unexpected '") + text_[pos_] + "'");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const { fail_at(pos_, what); }
  [[noreturn]] void fail_at(std::size_t at, const std::string& what) const {
    throw ConfigError("column " + std::to_string(at + 1) + ": " + what);
  }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!accept(c)) {
      if (pos_ >= text_.size()) fail(std::string("expected '") + c + "' before end of expression");
      fail(std::string("expected '") + c + "'");
    }
  }

  ExprPtr parse_sum() {
    ExprPtr e = parse_product();
    for (;;) {
      if (accept('+'))
        e = make_binary(Kind::Add, e, parse_product());
      else if (accept('-'))
        e = make_binary(Kind::Sub, e, parse_product());
      else
        return e;
    }
  }

  ExprPtr parse_product() {
    ExprPtr e = parse_unary();
    for (;;) {
      if (accept('*')) {
        e = make_binary(Kind::Mul, e, parse_unary());
      } else if (accept('/')) {
        skip_ws();
        const std::size_t at = pos_;
        ExprPtr d = parse_unary();
        if (!is_constant(d)) fail_at(at, "division by a state-dependent expression");
        if (d->value == 0) fail_at(at, "division by zero");
        if (e->kind == Kind::Const)
          e = make_const(e->value / d->value);
        else
          e = make_binary(Kind::Mul, e, make_const(1.0L / d->value));
      } else {
        return e;
      }
    }
  }

  ExprPtr parse_unary() {
    if (accept('-')) return make_neg(parse_unary());
    if (accept('+')) return parse_unary();
    return parse_power();
  }

  ExprPtr parse_power() {
    ExprPtr base = parse_primary();
    if (!accept('^')) return base;
    skip_ws();
    const std::size_t at = pos_;
    std::size_t end = pos_;
    while (end < text_.size() && std::isdigit(static_cast<unsigned char>(text_[end]))) ++end;
    if (end == pos_) fail_at(at, "exponent must be a non-negative integer literal");
    int k = 0;
    auto [ptr, ec] = std::from_chars(text_.data() + pos_, text_.data() + end, k);
    if (ec != std::errc() || k > 64) fail_at(at, "exponent out of range");
    pos_ = end;
    return make_pow(base, k);
  }

  ExprPtr parse_primary() {
    skip_ws();
    if (pos_ >= text_.size()) fail("unexpected end of expression");
    const char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      ExprPtr e = parse_sum();
      expect(')');
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_identifier();
    fail(std::string("unexpected '") + c + "'");
  }

  ExprPtr parse_number() {
    const std::size_t start = pos_;
    std::size_t end = pos_;
    auto digits = [&] {
      while (end < text_.size() && std::isdigit(static_cast<unsigned char>(text_[end]))) ++end;
    };
    digits();
    if (end < text_.size() && text_[end] == '.') {
      ++end;
      digits();
    }
    if (end < text_.size() && (text_[end] == 'e' || text_[end] == 'E')) {
      std::size_t exp = end + 1;
      if (exp < text_.size() && (text_[exp] == '+' || text_[exp] == '-')) ++exp;
      if (exp < text_.size() && std::isdigit(static_cast<unsigned char>(text_[exp]))) {
        end = exp;
        digits();
      }
    }
    const std::string token(text_.substr(start, end - start));
    if (token == ".") fail_at(start, "malformed number");
    pos_ = end;
    // strtold: std::from_chars has no long double overload in this toolchain.
    char* stop = nullptr;
    const long double v = std::strtold(token.c_str(), &stop);
    if (stop != token.c_str() + token.size() || !std::isfinite(v)) fail_at(start, "malformed number '" + token + "'");
    return make_const(v);
  }

  ExprPtr parse_identifier() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) ++pos_;
    const std::string name(text_.substr(start, pos_ - start));
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == '(') {
      if (name != "pwl") fail_at(start, "unknown function '" + name + "'");
      ++pos_;
      return parse_pwl(start);
    }
    if (name.size() > 1 && name[0] == 'x' &&
        name.find_first_not_of("0123456789", 1) == std::string::npos && name[1] != '0') {
      const int i = std::stoi(name.substr(1));
      if (i < 1 || i > dim_) fail_at(start, "state variable '" + name + "' outside x1..x" + std::to_string(dim_));
      return make_var(i - 1);
    }
    if (params_.contains(name)) return make_const(params_.at(name));
    fail_at(start, "unknown symbol '" + name + "'");
  }

  ExprPtr parse_pwl(std::size_t start) {
    ExprPtr u = parse_sum();
    if (!accept(';')) expect(',');
    skip_ws();
    std::size_t at = pos_;
    ExprPtr a = parse_sum();
    if (!is_constant(a)) fail_at(at, "pwl slope must be constant");
    expect(',');
    skip_ws();
    at = pos_;
    ExprPtr b = parse_sum();
    if (!is_constant(b)) fail_at(at, "pwl slope must be constant");
    expect(')');
    if (!counter_) fail_at(start, "pwl(...) is not allowed here");
    const int index = (*counter_)++;
    if (index >= kMaxPwlTerms) fail_at(start, "too many pwl terms");
    if (args_) args_->push_back(u);
    return make_pwl(Kind::Pwl, u, a->value, b->value, index);
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  int dim_;
  const ParamSet& params_;
  int* counter_;
  std::vector<ExprPtr>* args_;
};

// Vector field backed by parsed expressions.
class ExpressionField : public VectorFieldCrtp<ExpressionField> {
 public:
  ExpressionField(std::vector<ExprPtr> rhs, std::vector<ExprPtr> pwl_args)
      : rhs_(std::move(rhs)), pwl_args_(std::move(pwl_args)) {
    const int n = dim();
    jac_.resize(static_cast<std::size_t>(n * n));
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) jac_[static_cast<std::size_t>(i * n + j)] = differentiate(rhs_[i], j);
  }

  int dim() const override { return static_cast<int>(rhs_.size()); }
  int pwl_terms() const override { return static_cast<int>(pwl_args_.size()); }

  Eigen::VectorXd switching_arguments(const Eigen::VectorXd& x) const override {
    Eigen::VectorXd u(pwl_terms());
    const std::vector<int> none;
    for (int j = 0; j < pwl_terms(); ++j) u[j] = flowcurv::evaluate<double>(*pwl_args_[j], x, none);
    return u;
  }

  Eigen::MatrixXd jacobian(const Eigen::VectorXd& x, std::optional<Region> region) const override {
    const int n = dim();
    if (!region) region = classify(x);
    const std::vector<int> branches = decode_region(region.value_or(Region{}), pwl_terms());
    const VectorX<long double> xl = x.cast<long double>();
    Eigen::MatrixXd J(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        J(i, j) = static_cast<double>(flowcurv::evaluate<long double>(*jac_[static_cast<std::size_t>(i * n + j)], xl, branches));
    return J;
  }

  template <typename S>
  void evaluate(const VectorX<S>& x, Region r, VectorX<S>& f) const {
    const std::vector<int> branches = decode_region(r, pwl_terms());
    for (int i = 0; i < dim(); ++i) f[i] = flowcurv::evaluate<S>(*rhs_[i], x, branches);
  }

 private:
  std::vector<ExprPtr> rhs_;
  std::vector<ExprPtr> pwl_args_;
  std::vector<ExprPtr> jac_;
};

std::pair<std::size_t, std::size_t> line_col(std::string_view text, std::size_t offset) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < offset && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

// Rewrites an expression error so it points into the config text when the
// expression appears verbatim there.
[[noreturn]] void rethrow_located(std::string_view json_text, const std::string& expr_text, const std::string& where,
                                  const ConfigError& err) {
  std::string msg = err.what();
  std::size_t column = 0;
  if (msg.rfind("column ", 0) == 0) {
    const std::size_t colon = msg.find(':');
    column = std::stoul(msg.substr(7, colon - 7));
    msg = msg.substr(colon + 2);
  }
  const std::size_t at = json_text.find('"' + expr_text + '"');
  if (at != std::string_view::npos && column > 0) {
    auto [line, col] = line_col(json_text, at + column);
    throw ConfigError("line " + std::to_string(line) + ", column " + std::to_string(col) + ": " + where + ": " + msg);
  }
  throw ConfigError(where + (column > 0 ? ", column " + std::to_string(column) : std::string()) + ": " + msg);
}

// Numbers are read as long double so decimal parameters keep full precision.
using Json = nlohmann::basic_json<nlohmann::ordered_map, std::vector, std::string, bool, std::int64_t, std::uint64_t,
                                  long double>;

ModelDef build_from_json(const std::string& json_text, const ParamSet& overrides) {
  Json doc;
  try {
    doc = Json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    auto [line, col] = line_col(json_text, e.byte > 0 ? e.byte - 1 : 0);
    throw ConfigError("line " + std::to_string(line) + ", column " + std::to_string(col) + ": invalid JSON");
  }
  if (!doc.is_object()) throw ConfigError("model config must be a JSON object");
  for (const auto& [key, value] : doc.items())
    if (key != "name" && key != "dim" && key != "params" && key != "rhs" && key != "fixed_point_guesses")
      throw ConfigError("unknown config key '" + key + "'");
  if (!doc.contains("name") || !doc["name"].is_string() || doc["name"].get<std::string>().empty())
    throw ConfigError("config needs a non-empty string 'name'");
  if (!doc.contains("dim") || !doc["dim"].is_number_integer() || doc["dim"].get<long long>() < 1)
    throw ConfigError("config needs a positive integer 'dim'");
  const std::string name = doc["name"].get<std::string>();
  const int dim = static_cast<int>(doc["dim"].get<long long>());
  if (dim > 64) throw ConfigError("'dim' larger than 64 is not supported");

  ParamSet params;
  if (doc.contains("params")) {
    if (!doc["params"].is_object()) throw ConfigError("'params' must be an object");
    for (const auto& [pname, value] : doc["params"].items()) {
      if (pname.empty() || !(std::isalpha(static_cast<unsigned char>(pname[0])) || pname[0] == '_'))
        throw ConfigError("invalid parameter name '" + pname + "'");
      if (pname == "pwl" || (pname[0] == 'x' && pname.size() > 1 &&
                             pname.find_first_not_of("0123456789", 1) == std::string::npos))
        throw ConfigError("parameter name '" + pname + "' is reserved");
      long double v;
      if (overrides.contains(pname)) {
        v = overrides.at(pname);
      } else if (value.is_number()) {
        v = value.get<long double>();
      } else if (value.is_string()) {
        const std::string text = value.get<std::string>();
        try {
          v = parse_constant(text, params);
        } catch (const ConfigError& err) {
          rethrow_located(json_text, text, "params." + pname, err);
        }
      } else {
        throw ConfigError("parameter '" + pname + "' must be a number or a constant expression");
      }
      if (!std::isfinite(v)) throw ConfigError("parameter '" + pname + "' is not finite");
      params.set(pname, v);
    }
  }
  for (const auto& [oname, value] : overrides.entries())
    if (!params.contains(oname)) throw ConfigError("model '" + name + "' has no parameter '" + oname + "'");

  if (!doc.contains("rhs") || !doc["rhs"].is_array()) throw ConfigError("config needs an array 'rhs'");
  const auto& rhs = doc["rhs"];
  if (static_cast<int>(rhs.size()) != dim)
    throw ConfigError("dimension mismatch: 'dim' is " + std::to_string(dim) + " but 'rhs' has " +
                      std::to_string(rhs.size()) + " expressions");
  std::vector<ExprPtr> exprs;
  std::vector<ExprPtr> pwl_args;
  int counter = 0;
  for (std::size_t i = 0; i < rhs.size(); ++i) {
    if (!rhs[i].is_string()) throw ConfigError("rhs[" + std::to_string(i) + "] must be a string");
    const std::string text = rhs[i].get<std::string>();
    try {
      exprs.push_back(parse_expression(text, dim, params, &counter, &pwl_args));
    } catch (const ConfigError& err) {
      rethrow_located(json_text, text, "rhs[" + std::to_string(i) + "]", err);
    }
  }

  std::vector<Eigen::VectorXd> guesses;
  if (doc.contains("fixed_point_guesses")) {
    const auto& g = doc["fixed_point_guesses"];
    if (!g.is_array()) throw ConfigError("'fixed_point_guesses' must be an array of state vectors");
    for (const auto& v : g) {
      if (!v.is_array() || static_cast<int>(v.size()) != dim)
        throw ConfigError("each fixed point guess must list " + std::to_string(dim) + " numbers");
      Eigen::VectorXd x(dim);
      for (int i = 0; i < dim; ++i) {
        if (!v[static_cast<std::size_t>(i)].is_number()) throw ConfigError("fixed point guesses must be numeric");
        x[i] = v[static_cast<std::size_t>(i)].get<double>();
      }
      guesses.push_back(x);
    }
  }

  auto field = std::make_shared<const ExpressionField>(std::move(exprs), std::move(pwl_args));
  auto text = std::make_shared<const std::string>(json_text);
  ModelDef model(name, params, field, [text](const ParamSet& next) { return build_from_json(*text, next); });
  model.set_fixed_point_guesses(std::move(guesses));
  return model;
}

void print(const ExprPtr& e, std::ostringstream& os) {
  switch (e->kind) {
    case Kind::Const: {
      std::ostringstream num;
      num.precision(21);
      num << e->value;
      os << num.str();
      return;
    }
    case Kind::Var:
      os << 'x' << e->index + 1;
      return;
    case Kind::Add:
    case Kind::Sub:
    case Kind::Mul:
      os << '(';
      print(e->lhs, os);
      os << (e->kind == Kind::Add ? " + " : e->kind == Kind::Sub ? " - " : "*");
      print(e->rhs, os);
      os << ')';
      return;
    case Kind::Neg:
      os << "-(";
      print(e->lhs, os);
      os << ')';
      return;
    case Kind::Pow:
      os << '(';
      print(e->lhs, os);
      os << ")^" << static_cast<int>(e->value);
      return;
    case Kind::Pwl:
    case Kind::PwlSlope:
      os << (e->kind == Kind::Pwl ? "pwl(" : "pwl_slope(");
      print(e->lhs, os);
      os << "; " << static_cast<double>(e->a) << ", " << static_cast<double>(e->b) << ')';
      return;
  }
}

}  // namespace

ExprPtr parse_expression(std::string_view text, int dim, const ParamSet& params, int* pwl_counter,
                         std::vector<ExprPtr>* pwl_args) {
  return Parser(text, dim, params, pwl_counter, pwl_args).parse();
}

long double parse_constant(std::string_view text, const ParamSet& params) {
  ExprPtr e = Parser(text, 0, params, nullptr, nullptr).parse();
  if (!is_constant(e)) throw ConfigError("expression '" + std::string(text) + "' is not constant");
  return e->value;
}

bool is_constant(const ExprPtr& e) { return e->kind == Kind::Const; }

ExprPtr differentiate(const ExprPtr& e, int var) {
  switch (e->kind) {
    case Kind::Const:
    case Kind::PwlSlope:
      return make_const(0);
    case Kind::Var:
      return make_const(e->index == var ? 1 : 0);
    case Kind::Add:
    case Kind::Sub:
      return make_binary(e->kind, differentiate(e->lhs, var), differentiate(e->rhs, var));
    case Kind::Mul:
      return make_binary(Kind::Add, make_binary(Kind::Mul, differentiate(e->lhs, var), e->rhs),
                         make_binary(Kind::Mul, e->lhs, differentiate(e->rhs, var)));
    case Kind::Neg:
      return make_neg(differentiate(e->lhs, var));
    case Kind::Pow: {
      const int k = static_cast<int>(e->value);
      return make_binary(Kind::Mul, make_binary(Kind::Mul, make_const(k), make_pow(e->lhs, k - 1)),
                         differentiate(e->lhs, var));
    }
    case Kind::Pwl:
      return make_binary(Kind::Mul, make_pwl(Kind::PwlSlope, e->lhs, e->a, e->b, e->index),
                         differentiate(e->lhs, var));
  }
  throw std::logic_error("unhandled expression node");
}

std::string to_string(const ExprPtr& e) {
  std::ostringstream os;
  print(e, os);
  return os.str();
}

ModelDef load_model(std::string_view json_text, const ParamSet& overrides) {
  return build_from_json(std::string(json_text), overrides);
}

ModelDef load_model_file(const std::filesystem::path& path, const ParamSet& overrides) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open model config '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return load_model(buf.str(), overrides);
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

}  // namespace flowcurv
