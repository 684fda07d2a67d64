#pragma once

#include <optional>
#include <vector>

#include "flowcurv/model.hpp"

namespace flowcurv {

/// Time derivatives d_1..d_m of the trajectory through `point`, d_k = X^(k).
template <typename S>
struct DerivStack {
  VectorX<S> point;
  std::vector<VectorX<S>> derivs;
  /// Region the stack was computed in (piecewise-linear models only).
  std::optional<Region> region;

  int order() const { return static_cast<int>(derivs.size()); }
  const VectorX<S>& d(int k) const { return derivs.at(static_cast<std::size_t>(k - 1)); }

  /// Columns d_first..d_(first+count-1).
  MatrixX<S> columns(int first, int count) const {
    MatrixX<S> m(point.size(), count);
    for (int c = 0; c < count; ++c) m.col(c) = d(first + c);
    return m;
  }
};

struct StackOptions {
  int max_order = 12;
  /// Region to freeze; classified from the point when empty.
  std::optional<Region> region;
};

/// Exact trajectory derivatives through the Taylor-coefficient recurrence
/// c_(k+1) = (f(sum_j c_j t^j))_k / (k+1), d_k = k! c_k. Piecewise-linear
/// models are evaluated with the region frozen for the whole stack.
///
/// Throws std::invalid_argument for order < 1, order above the cap, a
/// non-finite state or a state of the wrong dimension.
template <typename S>
DerivStack<S> derivative_stack(const ModelDef& model, const VectorX<S>& x, int order, const StackOptions& options = {});

/// Long-double stack from a double state.
DerivStack<long double> derivative_stack_l(const ModelDef& model, const Eigen::VectorXd& x, int order,
                                           const StackOptions& options = {});

/// Component-wise evaluation of the right-hand side on jets sharing one
/// truncation order.
template <typename T>
VectorX<Jet<T>> jet_eval(const ModelDef& model, const VectorX<Jet<T>>& x, std::optional<Region> region = std::nullopt);

extern template DerivStack<double> derivative_stack(const ModelDef&, const VectorX<double>&, int, const StackOptions&);
extern template DerivStack<long double> derivative_stack(const ModelDef&, const VectorX<long double>&, int,
                                                         const StackOptions&);
extern template VectorX<JetD> jet_eval(const ModelDef&, const VectorX<JetD>&, std::optional<Region>);
extern template VectorX<JetL> jet_eval(const ModelDef&, const VectorX<JetL>&, std::optional<Region>);

}  // namespace flowcurv
