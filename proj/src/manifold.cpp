#include "flowcurv/manifold.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "flowcurv/expression.hpp"
#include "flowcurv/parallel.hpp"

namespace flowcurv {
namespace {

using LMatrix = MatrixX<long double>;

long double det_l(const LMatrix& m) { return m.partialPivLu().determinant(); }

struct PhiLie {
  long double phi, lie, trace;
  std::optional<Region> region;
};

long double trace_l(const ModelDef& model, const Eigen::VectorXd& x, std::optional<Region> region) {
  const int n = model.dim();
  VectorX<JetL> seed(n), out(n);
  long double tr = 0;
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) seed[i] = JetL::variable(static_cast<long double>(x[i]), i == j ? 1.0L : 0.0L, 1);
    model.field().eval(seed, region ? region : std::optional<Region>(Region{}), out);
    tr += out[j][1];
  }
  return tr;
}

std::optional<Region> resolve_region(const ModelDef& model, const Eigen::VectorXd& x, std::optional<Region> region) {
  if (region || !model.piecewise()) return region;
  return model.region_of(x);
}

long double phi_l(const ModelDef& model, const Eigen::VectorXd& x, std::optional<Region> region) {
  const int n = model.dim();
  StackOptions opt;
  opt.region = resolve_region(model, x, region);
  const auto stack = derivative_stack_l(model, x, n, opt);
  return det_l(stack.columns(1, n));
}

PhiLie phi_lie(const ModelDef& model, const Eigen::VectorXd& x, std::optional<Region> region) {
  const int n = model.dim();
  StackOptions opt;
  opt.region = resolve_region(model, x, region);
  const auto stack = derivative_stack_l(model, x, n + 1, opt);
  LMatrix m = stack.columns(1, n);
  const long double ph = det_l(m);
  m.col(n - 1) = stack.d(n + 1);
  const long double lie = det_l(m);
  return {ph, lie, trace_l(model, x, opt.region), opt.region};
}

double cofactor_residual(const PhiLie& v) {
  const long double tp = v.trace * v.phi;
  return static_cast<double>(std::abs(v.lie - tp) / (1.0L + std::abs(tp)));
}

bool less_lex(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(), b.data() + b.size());
}

double sign_of(double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); }

}  // namespace

double phi(const ModelDef& model, const Eigen::VectorXd& x, std::optional<Region> region) {
  return static_cast<double>(phi_l(model, x, region));
}

double lie_phi(const ModelDef& model, const Eigen::VectorXd& x, std::optional<Region> region) {
  return static_cast<double>(phi_lie(model, x, region).lie);
}

double darboux_residual(const ModelDef& model, const Eigen::VectorXd& x, std::optional<Region> region) {
  return cofactor_residual(phi_lie(model, x, region));
}

ManifoldSample sample(const ModelDef& model, const Eigen::VectorXd& x, std::optional<Region> region) {
  const PhiLie v = phi_lie(model, x, region);
  return ManifoldSample{x, static_cast<double>(v.phi), static_cast<double>(v.lie), cofactor_residual(v), v.region};
}

std::vector<ManifoldSample> sample_points(const ModelDef& model, const std::vector<Eigen::VectorXd>& points,
                                          int threads) {
  std::vector<ManifoldSample> out(points.size());
  parallel_for(points.size(), threads, [&](std::size_t i) { out[i] = sample(model, points[i]); });
  return out;
}

double local_phi_scale(const ModelDef& model, const Eigen::VectorXd& x, double step, std::optional<Region> region) {
  double scale = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    for (double s : {-step, step}) {
      Eigen::VectorXd y = x;
      y[i] += s;
      scale = std::max(scale, std::abs(phi(model, y, region)));
    }
  }
  return scale;
}

ZeroSet zero_set_grid(const ModelDef& model, const GridSpec& grid, int threads, ZeroTolerance tol) {
  const int n = model.dim();
  const int na = static_cast<int>(grid.axes.size());
  if (na < 2 || na > 3) throw std::invalid_argument("zero-set grid needs 2 or 3 axes");
  if (grid.base.size() != n) throw std::invalid_argument("grid base point has wrong dimension");
  std::vector<bool> used(static_cast<std::size_t>(n), false);
  for (const auto& a : grid.axes) {
    if (a.index < 0 || a.index >= n) throw std::invalid_argument("grid axis outside the state dimension");
    if (used[static_cast<std::size_t>(a.index)]) throw std::invalid_argument("grid axis repeated");
    used[static_cast<std::size_t>(a.index)] = true;
    if (a.count < 2) throw std::invalid_argument("grid axis needs at least 2 nodes");
    if (!std::isfinite(a.lo) || !std::isfinite(a.hi) || a.lo == a.hi)
      throw std::invalid_argument("grid axis range must be finite and non-empty");
  }
  if (!grid.base.allFinite()) throw std::invalid_argument("non-finite slice value");

  std::vector<std::size_t> stride(static_cast<std::size_t>(na));
  std::size_t total = 1;
  for (int a = 0; a < na; ++a) {
    stride[static_cast<std::size_t>(a)] = total;
    total *= static_cast<std::size_t>(grid.axes[static_cast<std::size_t>(a)].count);
  }
  auto node_point = [&](std::size_t idx) {
    Eigen::VectorXd p = grid.base;
    for (int a = 0; a < na; ++a) {
      const auto& ax = grid.axes[static_cast<std::size_t>(a)];
      const std::size_t k = (idx / stride[static_cast<std::size_t>(a)]) % static_cast<std::size_t>(ax.count);
      p[ax.index] = ax.lo + (ax.hi - ax.lo) * static_cast<double>(k) / (ax.count - 1);
    }
    return p;
  };

  std::vector<double> values(total);
  parallel_for(total, threads, [&](std::size_t i) {
    const double v = phi(model, node_point(i));
    values[i] = std::isfinite(v) ? v : std::numeric_limits<double>::quiet_NaN();
  });

  ZeroSet out;
  struct Edge {
    std::size_t a, b;
    int axis;
  };
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < total; ++i) {
    if (std::isnan(values[i])) {
      ++out.nonfinite_nodes;
      continue;
    }
    if (values[i] == 0.0) {
      const Eigen::VectorXd p = node_point(i);
      out.points.push_back(ZeroPoint{p, 0.0, model.region_of(p), -1, 0.0, 0.0});
      continue;
    }
    for (int a = 0; a < na; ++a) {
      const auto& ax = grid.axes[static_cast<std::size_t>(a)];
      const std::size_t k = (i / stride[static_cast<std::size_t>(a)]) % static_cast<std::size_t>(ax.count);
      if (k + 1 >= static_cast<std::size_t>(ax.count)) continue;
      const std::size_t j = i + stride[static_cast<std::size_t>(a)];
      if (!std::isnan(values[j]) && values[j] != 0.0 && sign_of(values[i]) != sign_of(values[j]))
        edges.push_back({i, j, ax.index});
    }
  }

  std::vector<std::optional<ZeroPoint>> found(edges.size());
  parallel_for(edges.size(), threads, [&](std::size_t e) {
    const Edge& edge = edges[e];
    Eigen::VectorXd lo = node_point(edge.a), hi = node_point(edge.b);
    double flo = values[edge.a];
    const double scale = std::max(std::abs(values[edge.a]), std::abs(values[edge.b]));
    Eigen::VectorXd mid = lo;
    double fmid = flo;
    for (int it = 0; it < 200; ++it) {
      mid = 0.5 * (lo + hi);
      if ((mid - lo).norm() <= 1e-15 * (1.0 + mid.norm())) break;
      fmid = phi(model, mid);
      if (!std::isfinite(fmid) || fmid == 0.0) break;
      if (sign_of(fmid) == sign_of(flo)) {
        lo = mid;
        flo = fmid;
      } else {
        hi = mid;
      }
    }
    if (std::isfinite(fmid) && std::abs(fmid) <= tol.abs + tol.rel * scale)
      found[e] = ZeroPoint{mid, fmid, model.region_of(mid), edge.axis, 0.0, scale};
  });
  for (auto& f : found) {
    if (f)
      out.points.push_back(std::move(*f));
    else
      ++out.rejected_brackets;
  }
  std::sort(out.points.begin(), out.points.end(),
            [](const ZeroPoint& a, const ZeroPoint& b) { return less_lex(a.point, b.point); });
  if (out.nonfinite_nodes > 0)
    out.warnings.push_back(std::to_string(out.nonfinite_nodes) + " grid nodes with non-finite phi were excluded");
  return out;
}

ZeroSet zero_crossings_on_trajectory(const ModelDef& model, const Trajectory& traj, ZeroTolerance tol,
                                     const IntegrateOptions& reintegration) {
  ZeroSet out;
  const std::size_t m = traj.size();
  if (m == 0) return out;
  std::vector<double> start(m), end(m);
  bool all_zero = true;
  for (std::size_t i = 0; i < m; ++i) {
    start[i] = phi(model, traj.states[i], traj.regions[i]);
    if (start[i] != 0.0) all_zero = false;
    // phi at the next sample, still in the region used for the step.
    if (i + 1 < m) end[i] = phi(model, traj.states[i + 1], traj.regions[i]);
  }
  if (all_zero) {
    out.degenerate = true;
    out.warnings.push_back("phi vanishes at every sample (degenerate trajectory)");
    return out;
  }
  IntegrateOptions ropt = reintegration;
  ropt.rel_tol = std::min(ropt.rel_tol, 1e-12);
  ropt.abs_tol = std::min(ropt.abs_tol, 1e-14);
  std::size_t straddles = 0;
  for (std::size_t i = 0; i + 1 < m; ++i) {
    if (traj.regions[i] != traj.regions[i + 1] && sign_of(end[i]) != sign_of(start[i + 1])) ++straddles;
    if (start[i] == 0.0) {
      out.points.push_back(ZeroPoint{traj.states[i], 0.0, traj.regions[i], -1, traj.times[i], 0.0});
      continue;
    }
    if (end[i] == 0.0 || sign_of(start[i]) == sign_of(end[i])) continue;
    const double scale = std::max(std::abs(start[i]), std::abs(end[i]));
    const double dt = traj.times[i + 1] - traj.times[i];
    ropt.initial_region = traj.regions[i];
    double lo = 0.0, hi = dt, flo = start[i];
    Eigen::VectorXd x_mid = traj.states[i];
    double fmid = flo;
    while (std::abs(hi - lo) > 1e-10) {
      const double mid = 0.5 * (lo + hi);
      x_mid = advance(model, traj.states[i], mid, ropt);
      fmid = phi(model, x_mid, traj.regions[i]);
      if (fmid == 0.0) {
        lo = hi = mid;
        break;
      }
      if (sign_of(fmid) == sign_of(flo)) {
        lo = mid;
        flo = fmid;
      } else {
        hi = mid;
      }
    }
    const double t_mid = 0.5 * (lo + hi);
    x_mid = advance(model, traj.states[i], t_mid, ropt);
    fmid = phi(model, x_mid, traj.regions[i]);
    if (std::abs(fmid) <= tol.abs + tol.rel * scale)
      out.points.push_back(ZeroPoint{x_mid, fmid, traj.regions[i], -1, traj.times[i] + t_mid, scale});
    else
      ++out.rejected_brackets;
  }
  if (straddles > 0)
    out.warnings.push_back(std::to_string(straddles) +
                           " sample pairs straddle a breakpoint where phi jumps across zero");
  return out;
}

std::optional<Eigen::VectorXd> solve_row_for(const ModelDef& model, int row, int solve_index, Eigen::VectorXd x) {
  for (int it = 0; it < 80; ++it) {
    const double f = model.rhs(x)[row];
    if (!std::isfinite(f)) return std::nullopt;
    const Eigen::MatrixXd J = model.jacobian(x);
    const double scale = 1.0 + J.row(row).cwiseAbs().dot(x.cwiseAbs());
    if (std::abs(f) <= 1e-13 * scale) return x;
    const double d = J(row, solve_index);
    if (d == 0.0 || !std::isfinite(d)) return std::nullopt;
    double step = f / d;
    const double cap = 1.0 + std::abs(x[solve_index]);
    if (std::abs(step) > cap) step = std::copysign(cap, step);
    x[solve_index] -= step;
  }
  return std::nullopt;
}

namespace {

std::optional<Eigen::VectorXd> solve_constraints(const ModelDef& model, const std::vector<int>& rows,
                                                 const std::vector<int>& fast, Eigen::VectorXd x) {
  const int k = static_cast<int>(fast.size());
  for (int it = 0; it < 80; ++it) {
    const Eigen::VectorXd f = model.rhs(x);
    const Eigen::MatrixXd J = model.jacobian(x);
    Eigen::VectorXd g(k);
    Eigen::MatrixXd Jg(k, k);
    double scale = 1.0;
    for (int r = 0; r < k; ++r) {
      g[r] = f[rows[static_cast<std::size_t>(r)]];
      scale += J.row(rows[static_cast<std::size_t>(r)]).cwiseAbs().dot(x.cwiseAbs());
      for (int c = 0; c < k; ++c) Jg(r, c) = J(rows[static_cast<std::size_t>(r)], fast[static_cast<std::size_t>(c)]);
    }
    if (!g.allFinite()) return std::nullopt;
    if (g.norm() <= 1e-13 * scale) return x;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(Jg);
    if (lu.rank() < k) return std::nullopt;
    Eigen::VectorXd dx = lu.solve(g);
    const double cap = 1.0 + x.norm();
    if (dx.norm() > cap) dx *= cap / dx.norm();
    for (int c = 0; c < k; ++c) x[fast[static_cast<std::size_t>(c)]] -= dx[c];
  }
  return std::nullopt;
}

Eigen::VectorXd phi_gradient(const ModelDef& model, const Eigen::VectorXd& x, std::optional<Region> region) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = 1e-5 * (1.0 + std::abs(x[i]));
    Eigen::VectorXd a = x, b = x;
    a[i] += h;
    b[i] -= h;
    g[i] = static_cast<double>((phi_l(model, a, region) - phi_l(model, b, region)) / (2.0L * h));
  }
  return g;
}

}  // namespace

GspSummary gsp_order0_residual(const ModelDef& model, const SlowFastSplit& split, std::size_t samples,
                               std::uint64_t seed) {
  const int n = model.dim();
  if (!(split.epsilon > 0)) throw std::invalid_argument("slow-fast split needs epsilon > 0");
  if (split.fast_indices.empty()) throw std::invalid_argument("slow-fast split needs at least one fast index");
  const std::vector<int> rows = split.constraint_rows.empty() ? split.fast_indices : split.constraint_rows;
  if (rows.size() != split.fast_indices.size())
    throw std::invalid_argument("slow-fast split needs one constraint row per fast index");
  for (int i : split.fast_indices)
    if (i < 0 || i >= n) throw std::invalid_argument("fast index outside the state dimension");
  for (int r : rows)
    if (r < 0 || r >= n) throw std::invalid_argument("constraint row outside the state dimension");
  if (split.lo.size() != n || split.hi.size() != n) throw std::invalid_argument("sampling box has wrong dimension");

  GspSummary s;
  s.epsilon = split.epsilon;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double sum = 0.0;
  for (std::size_t k = 0; k < samples; ++k) {
    Eigen::VectorXd x(n);
    for (int i = 0; i < n; ++i) x[i] = split.lo[i] + (split.hi[i] - split.lo[i]) * unit(rng);
    auto solved = solve_constraints(model, rows, split.fast_indices, x);
    if (!solved) {
      ++s.failures;
      continue;
    }
    const auto region = model.region_of(*solved);
    const double ph = std::abs(phi(model, *solved, region));
    const double gn = phi_gradient(model, *solved, region).norm();
    const double r = gn > 0 ? ph / gn : (ph == 0 ? 0.0 : std::numeric_limits<double>::infinity());
    ++s.samples;
    s.max = std::max(s.max, r);
    sum += r;
  }
  s.mean = s.samples > 0 ? sum / static_cast<double>(s.samples) : 0.0;
  return s;
}

std::vector<GspSummary> gsp_order0_profile(const ModelDef& model, const SlowFastSplit& split, std::size_t samples,
                                           const std::vector<double>& stiffness_factors, std::uint64_t seed) {
  if (!split.stiffness_param) throw std::invalid_argument("slow-fast split has no stiffness parameter");
  const long double base = model.params().at(*split.stiffness_param);
  std::vector<GspSummary> out;
  for (double f : stiffness_factors) {
    if (!(f > 0)) throw std::invalid_argument("stiffness factors must be positive");
    ParamSet ov;
    ov.set(*split.stiffness_param, base * f);
    SlowFastSplit sp = split;
    sp.epsilon = split.epsilon / f;
    out.push_back(gsp_order0_residual(model.with_params(ov), sp, samples, seed));
  }
  return out;
}

FactorReport factor_check(const ModelDef& model, const std::string& factor, const Box& box, std::size_t samples,
                          std::uint64_t seed) {
  const int n = model.dim();
  if (box.lo.size() != n || box.hi.size() != n) throw std::invalid_argument("sampling box has wrong dimension");
  const ExprPtr F = parse_expression(factor, n, model.params());
  std::vector<ExprPtr> grad;
  for (int i = 0; i < n; ++i) grad.push_back(differentiate(F, i));
  const std::vector<int> none;

  FactorReport rep;
  rep.factor = factor;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Eigen::VectorXd> pts;
  std::vector<long double> values;
  long double fmax = 0;
  for (std::size_t k = 0; k < samples; ++k) {
    Eigen::VectorXd x(n);
    for (int i = 0; i < n; ++i) x[i] = box.lo[i] + (box.hi[i] - box.lo[i]) * unit(rng);
    const long double v = evaluate<long double>(*F, x.cast<long double>(), none);
    fmax = std::max(fmax, std::abs(v));
    pts.push_back(x);
    values.push_back(v);
  }
  if (samples > 0 && fmax == 0) throw std::invalid_argument("factor '" + factor + "' vanishes on the whole box");

  // Quadratic ansatz basis.
  rep.basis.push_back("1");
  for (int i = 0; i < n; ++i) rep.basis.push_back("x" + std::to_string(i + 1));
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) rep.basis.push_back("x" + std::to_string(i + 1) + "*x" + std::to_string(j + 1));
  const int nb = static_cast<int>(rep.basis.size());
  auto basis_row = [&](const Eigen::VectorXd& x) {
    VectorX<long double> b(nb);
    int c = 0;
    b[c++] = 1;
    for (int i = 0; i < n; ++i) b[c++] = x[i];
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) b[c++] = static_cast<long double>(x[i]) * x[j];
    return b;
  };

  std::vector<VectorX<long double>> rows;
  std::vector<long double> targets;
  for (std::size_t k = 0; k < pts.size(); ++k) {
    const Eigen::VectorXd& x = pts[k];
    const Eigen::VectorXd V = model.rhs(x);
    VectorX<JetL> xj(n);
    for (int i = 0; i < n; ++i) xj[i] = JetL::variable(x[i], V[i], 1);
    const long double lie = evaluate<JetL>(*F, xj, none)[1];
    long double terms = 0;
    for (int i = 0; i < n; ++i)
      terms += std::abs(evaluate<long double>(*grad[static_cast<std::size_t>(i)], x.cast<long double>(), none) * V[i]);
    const double lie_scaled = terms > 0 ? static_cast<double>(std::abs(lie) / terms) : 0.0;
    rep.max_lie_scaled = std::max(rep.max_lie_scaled, lie_scaled);
    if (std::abs(values[k]) > 1e-8L * fmax) {
      rows.push_back(basis_row(x));
      targets.push_back(lie / values[k]);
    }
  }
  if (rep.max_lie_scaled <= 1e-12) {
    rep.verdict = FactorVerdict::FirstIntegral;
    rep.cofactor.assign(static_cast<std::size_t>(nb), 0.0);
  } else if (static_cast<int>(rows.size()) >= nb) {
    LMatrix A(static_cast<Eigen::Index>(rows.size()), nb);
    VectorX<long double> b(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      A.row(static_cast<Eigen::Index>(r)) = rows[r].transpose();
      b[static_cast<Eigen::Index>(r)] = targets[r];
    }
    const VectorX<long double> theta = A.colPivHouseholderQr().solve(b);
    const long double bn = b.norm();
    rep.fit_residual = bn > 0 ? static_cast<double>((A * theta - b).norm() / bn) : 0.0;
    for (int c = 0; c < nb; ++c) rep.cofactor.push_back(static_cast<double>(theta[c]));
    rep.verdict = rep.fit_residual <= 1e-8 ? FactorVerdict::Invariant : FactorVerdict::NotInvariant;
  } else {
    rep.fit_residual = std::numeric_limits<double>::infinity();
    rep.verdict = FactorVerdict::NotInvariant;
  }

  // Project samples onto F = 0 and check that phi vanishes there.
  for (const Eigen::VectorXd& start : pts) {
    VectorX<long double> x = start.cast<long double>();
    bool converged = false;
    for (int it = 0; it < 80; ++it) {
      const long double f = evaluate<long double>(*F, x, none);
      VectorX<long double> g(n);
      for (int i = 0; i < n; ++i) g[i] = evaluate<long double>(*grad[static_cast<std::size_t>(i)], x, none);
      const long double gg = g.squaredNorm();
      if (std::abs(f) <= 1e-13L * std::max(1.0L, fmax)) {
        converged = true;
        break;
      }
      if (gg == 0 || !std::isfinite(static_cast<double>(f))) break;
      x -= (f / gg) * g;
    }
    if (!converged) continue;
    const Eigen::VectorXd p = x.cast<double>();
    if (!p.allFinite()) continue;
    const double ph = std::abs(phi(model, p));
    const double scale = local_phi_scale(model, p);
    const double scaled = scale > 0 ? ph / scale : (ph == 0 ? 0.0 : std::numeric_limits<double>::infinity());
    ++rep.zero_points;
    rep.max_scaled_phi = std::max(rep.max_scaled_phi, scaled);
  }
  return rep;
}

std::string to_string(FactorVerdict verdict) {
  switch (verdict) {
    case FactorVerdict::FirstIntegral:
      return "first-integral";
    case FactorVerdict::Invariant:
      return "invariant";
    case FactorVerdict::NotInvariant:
      return "not-invariant";
  }
  return "unknown";
}

}  // namespace flowcurv
