#include "flowcurv/derivatives.hpp"

#include <cmath>
#include <string>

namespace flowcurv {

template <typename S>
DerivStack<S> derivative_stack(const ModelDef& model, const VectorX<S>& x, int order, const StackOptions& options) {
  const int n = model.dim();
  if (x.size() != n)
    throw std::invalid_argument("state has " + std::to_string(x.size()) + " components, model has " + std::to_string(n));
  if (options.max_order < 1 || options.max_order > kJetMaxOrder)
    throw std::invalid_argument("derivative order cap must lie in [1, " + std::to_string(kJetMaxOrder) + "]");
  if (order < 1 || order > options.max_order)
    throw std::invalid_argument("derivative order " + std::to_string(order) + " outside [1, " +
                                std::to_string(options.max_order) + "]");
  for (Eigen::Index i = 0; i < n; ++i)
    if (!std::isfinite(static_cast<double>(x[i]))) throw std::invalid_argument("non-finite state");

  DerivStack<S> stack;
  stack.point = x;
  stack.region = options.region;
  if (!stack.region && model.piecewise()) stack.region = model.region_of(x.template cast<double>());

  using J = Jet<S>;
  // Coefficients c_0..c_order of x(t).
  std::vector<VectorX<S>> c(static_cast<std::size_t>(order + 1), VectorX<S>(n));
  c[0] = x;
  VectorX<J> xj(n), fj(n);
  for (int k = 0; k < order; ++k) {
    for (int i = 0; i < n; ++i) {
      J v = J::constant(c[0][i], k);
      for (int j = 1; j <= k; ++j) v[j] = c[static_cast<std::size_t>(j)][i];
      xj[i] = v;
    }
    model.field().eval(xj, stack.region ? stack.region : std::optional<Region>(Region{}), fj);
    for (int i = 0; i < n; ++i) c[static_cast<std::size_t>(k + 1)][i] = fj[i][k] / S(k + 1);
  }
  S factorial(1);
  for (int k = 1; k <= order; ++k) {
    factorial *= S(k);
    stack.derivs.push_back(c[static_cast<std::size_t>(k)] * factorial);
  }
  return stack;
}

DerivStack<long double> derivative_stack_l(const ModelDef& model, const Eigen::VectorXd& x, int order,
                                           const StackOptions& options) {
  StackOptions opt = options;
  if (!opt.region && model.piecewise() && x.size() == model.dim()) opt.region = model.region_of(x);
  return derivative_stack<long double>(model, x.cast<long double>(), order, opt);
}

template <typename T>
VectorX<Jet<T>> jet_eval(const ModelDef& model, const VectorX<Jet<T>>& x, std::optional<Region> region) {
  const int n = model.dim();
  if (x.size() != n) throw std::invalid_argument("jet vector has wrong dimension");
  for (int i = 1; i < n; ++i)
    if (x[i].order() != x[0].order()) throw std::invalid_argument("jets have mixed truncation orders");
  VectorX<Jet<T>> out(n);
  model.field().eval(x, region, out);
  return out;
}

template DerivStack<double> derivative_stack(const ModelDef&, const VectorX<double>&, int, const StackOptions&);
template DerivStack<long double> derivative_stack(const ModelDef&, const VectorX<long double>&, int,
                                                  const StackOptions&);
template VectorX<JetD> jet_eval(const ModelDef&, const VectorX<JetD>&, std::optional<Region>);
template VectorX<JetL> jet_eval(const ModelDef&, const VectorX<JetL>&, std::optional<Region>);

}  // namespace flowcurv
