#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "flowcurv/jet.hpp"

namespace flowcurv {

/// Thrown for malformed model configs and invalid run configurations.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Thrown when a numerical procedure cannot deliver a result.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Piecewise-linear region label.
///
/// Each pwl nonlinearity of a model sits on one of three branches
/// (-1: argument < -1, 0: |argument| <= 1, +1: argument > 1). A region is the
/// tuple of branches, packed as a balanced-ternary integer so that a model
/// with a single nonlinearity has the labels -1, 0, +1.
struct Region {
  std::int64_t code = 0;

  friend bool operator==(const Region&, const Region&) = default;
  friend auto operator<=>(const Region&, const Region&) = default;
};

/// Largest number of pwl nonlinearities a region code can represent.
inline constexpr int kMaxPwlTerms = 39;

Region encode_region(std::span<const int> branches);
std::vector<int> decode_region(Region region, int terms);

/// Branch of a pwl argument under the breakpoint tie-break: |u| = 1 belongs to
/// the middle branch.
inline int pwl_branch(double u) { return u > 1.0 ? 1 : (u < -1.0 ? -1 : 0); }

/// Ordered named parameters. Values are stored in the widest native float.
class ParamSet {
 public:
  ParamSet() = default;
  ParamSet(std::initializer_list<std::pair<std::string, long double>> values);

  void set(const std::string& name, long double value);
  long double at(const std::string& name) const;
  bool contains(const std::string& name) const;
  const std::vector<std::pair<std::string, long double>>& entries() const { return values_; }

 private:
  std::vector<std::pair<std::string, long double>> values_;
};

/// An n-dimensional autonomous vector field evaluable on plain scalars and on
/// jets. Piecewise-linear fields evaluate with a frozen region: when `region`
/// is empty the state (or the order-0 coefficient of jet input) is classified.
class VectorField {
 public:
  virtual ~VectorField() = default;

  virtual int dim() const = 0;

  /// Number of pwl nonlinearities; 0 for smooth fields.
  virtual int pwl_terms() const { return 0; }
  /// Arguments u_j of the pwl nonlinearities; the region changes where some
  /// u_j crosses +1 or -1.
  virtual Eigen::VectorXd switching_arguments(const Eigen::VectorXd& x) const;

  virtual void eval(const VectorX<double>& x, std::optional<Region> region, VectorX<double>& out) const = 0;
  virtual void eval(const VectorX<long double>& x, std::optional<Region> region,
                    VectorX<long double>& out) const = 0;
  virtual void eval(const VectorX<JetD>& x, std::optional<Region> region, VectorX<JetD>& out) const = 0;
  virtual void eval(const VectorX<JetL>& x, std::optional<Region> region, VectorX<JetL>& out) const = 0;

  /// Functional Jacobian df_i/dx_j.
  virtual Eigen::MatrixXd jacobian(const Eigen::VectorXd& x, std::optional<Region> region) const;

  std::optional<Region> classify(const Eigen::VectorXd& x) const;
};

/// Equilibrium of a vector field. For piecewise-linear fields `region` is the
/// affine piece the point solves; `admissible` is false for a virtual
/// equilibrium, i.e. a zero of that piece lying outside the piece's region.
struct FixedPoint {
  Eigen::VectorXd location;
  std::optional<Region> region;
  bool admissible = true;
};

/// Immutable model definition: name, dimension, parameters and the vector
/// field. Copies share the underlying field; all evaluators are re-entrant.
class ModelDef {
 public:
  /// Rebuilds the model from its definition with some parameters replaced.
  using Rebuild = std::function<ModelDef(const ParamSet& overrides)>;

  ModelDef(std::string name, ParamSet params, std::shared_ptr<const VectorField> field,
           Rebuild rebuild = {});

  const std::string& name() const { return name_; }
  int dim() const { return field_->dim(); }
  const ParamSet& params() const { return params_; }
  const VectorField& field() const { return *field_; }
  bool piecewise() const { return field_->pwl_terms() > 0; }

  /// Initial guesses used by Newton fixed-point search for smooth models.
  const std::vector<Eigen::VectorXd>& fixed_point_guesses() const { return guesses_; }
  ModelDef& set_fixed_point_guesses(std::vector<Eigen::VectorXd> guesses);

  Eigen::VectorXd rhs(const Eigen::VectorXd& x, std::optional<Region> region = std::nullopt) const;
  Eigen::MatrixXd jacobian(const Eigen::VectorXd& x, std::optional<Region> region = std::nullopt) const;
  std::optional<Region> region_of(const Eigen::VectorXd& x) const { return field_->classify(x); }

  template <typename S>
  VectorX<S> rhs_as(const VectorX<S>& x, std::optional<Region> region = std::nullopt) const {
    VectorX<S> out(dim());
    field_->eval(x, region, out);
    return out;
  }

  /// Same model with some parameters replaced.
  ModelDef with_params(const ParamSet& overrides) const;

 private:
  std::string name_;
  ParamSet params_;
  std::shared_ptr<const VectorField> field_;
  Rebuild rebuild_;
  ParamSet overrides_;
  std::vector<Eigen::VectorXd> guesses_;
};

/// Adapter that implements every VectorField::eval overload from a single
/// templated `evaluate<S>` member of Derived.
template <typename Derived>
class VectorFieldCrtp : public VectorField {
 public:
  void eval(const VectorX<double>& x, std::optional<Region> r, VectorX<double>& out) const override {
    self().evaluate(x, resolve(x, r), out);
  }
  void eval(const VectorX<long double>& x, std::optional<Region> r, VectorX<long double>& out) const override {
    self().evaluate(x, resolve(x, r), out);
  }
  void eval(const VectorX<JetD>& x, std::optional<Region> r, VectorX<JetD>& out) const override {
    self().evaluate(x, resolve(x, r), out);
  }
  void eval(const VectorX<JetL>& x, std::optional<Region> r, VectorX<JetL>& out) const override {
    self().evaluate(x, resolve(x, r), out);
  }

 protected:
  template <typename S>
  Region resolve(const VectorX<S>& x, std::optional<Region> r) const {
    if (r) return *r;
    if (pwl_terms() == 0) return Region{};
    Eigen::VectorXd plain(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) plain[i] = static_cast<double>(value_of(x[i]));
    return *classify(plain);
  }

 private:
  const Derived& self() const { return static_cast<const Derived&>(*this); }
};

}  // namespace flowcurv
