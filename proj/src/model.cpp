#include "flowcurv/model.hpp"

#include <algorithm>

namespace flowcurv {

Region encode_region(std::span<const int> branches) {
  if (branches.size() > static_cast<std::size_t>(kMaxPwlTerms))
    throw std::invalid_argument("too many pwl terms for a region code");
  std::int64_t code = 0;
  for (auto it = branches.rbegin(); it != branches.rend(); ++it) {
    if (*it < -1 || *it > 1) throw std::invalid_argument("pwl branch must be -1, 0 or 1");
    code = code * 3 + *it;
  }
  return Region{code};
}

std::vector<int> decode_region(Region region, int terms) {
  std::vector<int> branches(static_cast<std::size_t>(terms), 0);
  std::int64_t c = region.code;
  for (int j = 0; j < terms; ++j) {
    std::int64_t digit = ((c % 3) + 3) % 3;
    if (digit == 2) digit = -1;
    branches[static_cast<std::size_t>(j)] = static_cast<int>(digit);
    c = (c - digit) / 3;
  }
  if (c != 0) throw std::invalid_argument("region code out of range for " + std::to_string(terms) + " pwl terms");
  return branches;
}

ParamSet::ParamSet(std::initializer_list<std::pair<std::string, long double>> values) {
  for (const auto& [name, value] : values) set(name, value);
}

void ParamSet::set(const std::string& name, long double value) {
  auto it = std::find_if(values_.begin(), values_.end(), [&](const auto& p) { return p.first == name; });
  if (it == values_.end())
    values_.emplace_back(name, value);
  else
    it->second = value;
}

long double ParamSet::at(const std::string& name) const {
  auto it = std::find_if(values_.begin(), values_.end(), [&](const auto& p) { return p.first == name; });
  if (it == values_.end()) throw ConfigError("unknown parameter '" + name + "'");
  return it->second;
}

bool ParamSet::contains(const std::string& name) const {
  return std::any_of(values_.begin(), values_.end(), [&](const auto& p) { return p.first == name; });
}

Eigen::VectorXd VectorField::switching_arguments(const Eigen::VectorXd&) const { return Eigen::VectorXd(0); }

std::optional<Region> VectorField::classify(const Eigen::VectorXd& x) const {
  const int terms = pwl_terms();
  if (terms == 0) return std::nullopt;
  const Eigen::VectorXd u = switching_arguments(x);
  std::vector<int> branches(static_cast<std::size_t>(terms));
  for (int j = 0; j < terms; ++j) branches[static_cast<std::size_t>(j)] = pwl_branch(u[j]);
  return encode_region(branches);
}

Eigen::MatrixXd VectorField::jacobian(const Eigen::VectorXd& x, std::optional<Region> region) const {
  const int n = dim();
  if (!region) region = classify(x);
  Eigen::MatrixXd jac(n, n);
  VectorX<JetL> seed(n), out(n);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i)
      seed[i] = JetL::variable(static_cast<long double>(x[i]), i == j ? 1.0L : 0.0L, 1);
    eval(seed, region, out);
    for (int i = 0; i < n; ++i) jac(i, j) = static_cast<double>(out[i][1]);
  }
  return jac;
}

ModelDef::ModelDef(std::string name, ParamSet params, std::shared_ptr<const VectorField> field, Rebuild rebuild)
    : name_(std::move(name)), params_(std::move(params)), field_(std::move(field)), rebuild_(std::move(rebuild)) {
  if (!field_) throw std::invalid_argument("model '" + name_ + "' has no vector field");
  if (field_->dim() < 1) throw std::invalid_argument("model '" + name_ + "' has non-positive dimension");
}

ModelDef& ModelDef::set_fixed_point_guesses(std::vector<Eigen::VectorXd> guesses) {
  for (const auto& g : guesses)
    if (g.size() != dim())
      throw ConfigError("fixed point guess of length " + std::to_string(g.size()) + " for a " +
                        std::to_string(dim()) + "-dimensional model");
  guesses_ = std::move(guesses);
  return *this;
}

Eigen::VectorXd ModelDef::rhs(const Eigen::VectorXd& x, std::optional<Region> region) const {
  if (x.size() != dim()) throw std::invalid_argument("state has wrong dimension");
  return rhs_as<double>(x, region);
}

Eigen::MatrixXd ModelDef::jacobian(const Eigen::VectorXd& x, std::optional<Region> region) const {
  if (x.size() != dim()) throw std::invalid_argument("state has wrong dimension");
  return field_->jacobian(x, region);
}

ModelDef ModelDef::with_params(const ParamSet& overrides) const {
  if (overrides.entries().empty()) return *this;
  if (!rebuild_) throw ConfigError("model '" + name_ + "' does not support parameter overrides");
  ParamSet accumulated = overrides_;
  for (const auto& [name, value] : overrides.entries()) {
    if (!params_.contains(name)) throw ConfigError("model '" + name_ + "' has no parameter '" + name + "'");
    accumulated.set(name, value);
  }
  ModelDef out = rebuild_(accumulated);
  out.overrides_ = accumulated;
  out.guesses_ = guesses_;
  return out;
}

}  // namespace flowcurv
