#include "flowcurv/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>

#include "flowcurv/derivatives.hpp"
#include "flowcurv/geometry.hpp"
#include "flowcurv/manifold.hpp"
#include "flowcurv/models.hpp"
#include "flowcurv/spectral.hpp"

namespace flowcurv {

bool VerifyReport::passed() const {
  return std::all_of(rows.begin(), rows.end(), [](const VerifyRow& r) { return r.passed; });
}

Table VerifyReport::table() const {
  Table t;
  t.columns = {"check", "value", "bound", "status", "note"};
  for (const auto& r : rows)
    t.add_row({r.check, r.value, (r.lower_bound ? ">= " : "<= ") + format_double(r.bound),
               std::string(r.passed ? "pass" : "FAIL"), r.note});
  return t;
}

namespace {

using Eigen::VectorXd;

double median(std::vector<double> v) {
  if (v.empty()) return std::nan("");
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2) return *mid;
  const double hi = *mid;
  return 0.5 * (hi + *std::max_element(v.begin(), mid));
}

class Suite {
 public:
  explicit Suite(VerifyReport& report) : report_(report) {}

  void upper(std::string check, double value, double bound, std::string note = {}) {
    report_.rows.push_back({std::move(check), value, bound, false, std::isfinite(value) && value <= bound,
                            std::move(note)});
  }
  void lower(std::string check, double value, double bound, std::string note = {}) {
    report_.rows.push_back({std::move(check), value, bound, true, std::isfinite(value) && value >= bound,
                            std::move(note)});
  }
  // Records a check that could not be evaluated.
  void error(std::string check, const std::string& what) {
    report_.rows.push_back({std::move(check), std::nan(""), 0.0, false, false, what});
  }

 private:
  VerifyReport& report_;
};

VectorXd random_point(std::mt19937_64& rng, const VectorXd& lo, const VectorXd& hi) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  VectorXd x(lo.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = lo[i] + (hi[i] - lo[i]) * u(rng);
  return x;
}

VectorXd random_point(std::mt19937_64& rng, int n, double half) {
  return random_point(rng, VectorXd::Constant(n, -half), VectorXd::Constant(n, half));
}

void jacobian_suite(const ModelDef& model, std::mt19937_64& rng, Suite& s) {
  const int n = model.dim();
  double worst = 0;
  for (int k = 0; k < 200; ++k) {
    const VectorXd x = random_point(rng, n, 2.0);
    const auto region = model.region_of(x);
    const Eigen::MatrixXd J = model.jacobian(x, region);
    Eigen::MatrixXd fd(n, n);
    for (int j = 0; j < n; ++j) {
      const double h = 1e-6 * (1.0 + std::abs(x[j]));
      VectorXd a = x, b = x;
      a[j] += h;
      b[j] -= h;
      fd.col(j) = (model.rhs(a, region) - model.rhs(b, region)) / (2 * h);
    }
    worst = std::max(worst, (J - fd).cwiseAbs().maxCoeff() / std::max(1.0, J.cwiseAbs().maxCoeff()));
  }
  s.upper("jacobian vs central differences", worst, 1e-6, "200 points");
}

void fixed_point_suite(const ModelDef& model, Suite& s) {
  std::vector<FixedPoint> fps;
  try {
    fps = fixed_points(model, {.include_virtual = true});
  } catch (const std::exception& e) {
    s.error("fixed points", e.what());
    return;
  }
  if (fps.empty()) {
    s.upper("fixed-point residual", 0.0, 1e-12, "no fixed points");
    return;
  }
  double res = 0, ph = 0;
  for (const auto& fp : fps) {
    const VectorXd f = model.rhs(fp.location, fp.region);
    const double scale = 1.0 + model.jacobian(fp.location, fp.region).cwiseAbs().maxCoeff() *
                                   fp.location.cwiseAbs().maxCoeff();
    res = std::max(res, f.cwiseAbs().maxCoeff() / scale);
    const double local = local_phi_scale(model, fp.location, 0.1, fp.region);
    const double p = std::abs(phi(model, fp.location, fp.region));
    ph = std::max(ph, local > 0 ? p / local : p);
  }
  const std::string note = std::to_string(fps.size()) + " fixed points";
  s.upper("fixed-point residual", res, 1e-12, note);
  s.upper("phi at fixed points (scaled)", ph, 1e-12, note);
}

void pwl_suite(const ModelDef& model, std::mt19937_64& rng, Suite& s) {
  const int n = model.dim();

  double darboux = 0, eq7 = 0, hyper = 0;
  for (int k = 0; k < 500; ++k) {
    const VectorXd x = random_point(rng, n, 3.0);
    const auto region = model.region_of(x);
    darboux = std::max(darboux, darboux_residual(model, x, region));
    if (k < 200) {
      const AffinePiece piece = affine_piece(model, region);
      StackOptions opt;
      opt.region = region;
      const auto st = derivative_stack_l(model, x, n + 1, opt);
      for (int j = 1; j <= n; ++j) {
        const VectorX<long double> next = st.d(j + 1);
        const long double err = (next - piece.A * st.d(j)).norm();
        const long double den = next.norm();
        eq7 = std::max(eq7, static_cast<double>(den > 0 ? err / den : err));
      }
      hyper = std::max(hyper, hypercoplanarity_check(model, x, region).relative_difference);
    }
  }
  s.upper("darboux identity", darboux, 1e-8, "500 in-region points");
  s.upper("stack recurrence d(k+1) = J d(k)", eq7, 1e-12, "200 points");
  s.upper("phi by LU vs wedge", hyper, 1e-10, "200 points");

  std::vector<FixedPoint> outer;
  for (const auto& fp : fixed_points(model, {.include_virtual = true})) {
    const auto branches = decode_region(*fp.region, model.field().pwl_terms());
    if (std::any_of(branches.begin(), branches.end(), [](int b) { return b != 0; })) outer.push_back(fp);
  }
  if (outer.empty()) {
    s.error("tangent planes", "no outer-region equilibria");
    return;
  }
  double plane_res = 0, factor = 0, parallel = 0, copl = 0;
  std::size_t plane_points = 0;
  for (const auto& fp : outer) {
    const Hyperplane plane = tls_hyperplane(model, fp);
    plane_res = std::max(plane_res, darboux_check_plane(model, plane, 200, 2.0, rng()).max_residual);

    const Spectrum sp = spectrum_at(model, fp.location, fp.region);
    std::vector<double> on, off;
    double copl_here = 0;
    for (int attempt = 0; attempt < 20000 && on.size() < 200; ++attempt) {
      VectorXd x = fp.location + random_point(rng, n, 2.0);
      x -= plane(x) * plane.normal;
      if (model.region_of(x) != fp.region) continue;
      const VectorXd y = x + 0.1 * plane.normal;
      if (model.region_of(y) != fp.region) continue;
      on.push_back(std::abs(phi(model, x, fp.region)));
      off.push_back(std::abs(phi(model, y, fp.region)));
      if (on.size() <= 50) {
        const Coplanarity c = coplanarity_equivalence(model, x, sp, plane.eigen_index);
        copl_here = std::max({copl_here, c.scaled1(), c.scaled2()});
        parallel = std::max(parallel, c.parallelism);
      }
    }
    plane_points += on.size();
    if (on.empty()) continue;
    const double med = median(off);
    factor = std::max(factor, *std::max_element(on.begin(), on.end()) / med);
    copl = std::max(copl, copl_here);
  }
  const std::string note = std::to_string(outer.size()) + " outer equilibria";
  s.upper("tangent plane darboux", plane_res, 1e-8, note);
  if (plane_points == 0)
    s.error("phi on tangent plane / off-plane median", "no sample points inside the outer regions");
  else
    s.upper("phi on tangent plane / off-plane median", factor, 1e-6, std::to_string(plane_points) + " points");
  s.upper("coplanarity on tangent plane", copl, 1e-8);
  s.upper("slow wedge parallel to left eigenvector", parallel, 1e-8);
}

void identity_suite(int n, std::mt19937_64& rng, Suite& s) {
  std::normal_distribution<double> g;
  auto random_matrix = [&] { return Eigen::MatrixXd::NullaryExpr(n, n, [&] { return g(rng); }).eval(); };
  double a10 = 0, a15 = 0, a16 = 0;
  for (int k = 0; k < 1000; ++k) {
    const Eigen::MatrixXd a = random_matrix(), J = random_matrix();
    a10 = std::max(a10, identity_a10_residual(a));
    a15 = std::max(a15, identity_a15_residual(J, a));
    a16 = std::max(a16, identity_a16_residual(J, a));
  }
  const std::string dim = "n = " + std::to_string(n);
  s.upper("|det| = product of Gram-Schmidt norms", a10, 1e-10, dim);
  s.upper("det(J a) = det J det a", a15, 1e-10, dim);
  s.upper("trace derivation identity", a16, 1e-10, dim);
}

void smooth_suite(const ModelDef& model, std::mt19937_64& rng, Suite& s) {
  double worst = 0;
  std::size_t used = 0;
  for (int k = 0; k < 100; ++k) {
    const VectorXd x = random_point(rng, model.dim(), 1.0);
    try {
      worst = std::max(worst, lie_time_fd_error(model, x));
      ++used;
    } catch (const NumericalError&) {
    }
  }
  s.upper("lie_phi vs time differences", worst, 1e-4, std::to_string(used) + " points");
}

void singular_suite(const ModelDef& model, Suite& s) {
  const SingularRatio r = singular_approximation_ratio(model, 200, 1.5);
  s.lower("darboux off / on f1 = 0 (median)", r.ratio, 10.0, std::to_string(r.points) + " points");
}

void gsp_suite(const ModelDef& model, Suite& s) {
  SlowFastSplit split;
  split.fast_indices = {0};
  split.constraint_rows = {0};
  split.epsilon = 1.0 / static_cast<double>(model.params().at("alpha1"));
  split.lo = VectorXd::Constant(model.dim(), -1.5);
  split.hi = VectorXd::Constant(model.dim(), 1.5);
  split.stiffness_param = "alpha1";
  const auto prof = gsp_order0_profile(model, split, 200, {1.0, 10.0, 100.0});
  double worst_ratio = 0;
  for (std::size_t i = 1; i < prof.size(); ++i)
    worst_ratio = std::max(worst_ratio, prof[i].mean / prof[i - 1].mean);
  char note[160];
  std::snprintf(note, sizeof note, "mean |phi|/|grad phi| %.3g, %.3g, %.3g at alpha1 x1, x10, x100", prof[0].mean,
                prof[1].mean, prof[2].mean);
  s.upper("order-0 residual ratio under stiffening", worst_ratio, 1.0, note);
}

void gear_suite(const ModelDef& model, std::mt19937_64& rng, Suite& s) {
  Box box{VectorXd::Constant(5, -1.5), VectorXd::Constant(5, 1.5)};
  box.lo[2] = -1.0;
  box.hi[2] = 3.0;

  const FactorReport integral = factor_check(model, "x1^2 + x2^2", box, 100, rng());
  s.upper("first integral x1^2+x2^2", integral.max_lie_scaled, 1e-12, to_string(integral.verdict));

  for (const char* f : {"x1^2 + x2^2", "x1^2 + x2^2 - x3", "x4^2 + beta1"}) {
    const FactorReport r = factor_check(model, f, box, 200, rng());
    s.upper(std::string("phi on ") + f + " = 0", r.max_scaled_phi, 1e-6,
            r.zero_points ? std::to_string(r.zero_points) + " points" : "empty real zero set");
  }

  const FactorReport prod = factor_check(model, "(x1^2 + x2^2)*(x1^2 + x2^2 - x3)*(x4^2 + beta1)", box, 200, rng());
  const double L = static_cast<double>(model.params().at("L"));
  double err = 0;
  for (std::size_t i = 0; i < prod.basis.size(); ++i) {
    double expect = 0;
    if (prod.basis[i] == "1") expect = -L;
    if (prod.basis[i] == "x4") expect = 2.0;
    err = std::max(err, std::abs(prod.cofactor[i] - expect) / std::max(1.0, std::abs(expect)));
  }
  s.upper("product cofactor vs -(L - 2 x4)", err, 1e-3, to_string(prod.verdict));

  // phi divided by the three factors stays bounded away from their zeros.
  bool finite = true;
  double biggest = 0;
  for (int k = 0; k < 200; ++k) {
    const VectorXd x = random_point(rng, box.lo, box.hi);
    const double r2 = x[0] * x[0] + x[1] * x[1];
    const double q = r2 * (r2 - x[2]) * (x[3] * x[3] + static_cast<double>(model.params().at("beta1")));
    if (std::abs(r2) < 1e-2 || std::abs(r2 - x[2]) < 1e-2) continue;
    const double ratio = phi(model, x) / q;
    finite = finite && std::isfinite(ratio);
    biggest = std::max(biggest, std::abs(ratio));
  }
  s.upper("phi / factor product finite", finite ? 0.0 : 1.0, 0.0, "max |ratio| " + format_double(biggest));
}

}  // namespace

double lie_time_fd_error(const ModelDef& model, const Eigen::VectorXd& x, double dt) {
  IntegrateOptions opt;
  opt.rel_tol = 1e-13;
  opt.abs_tol = 1e-15;
  auto central = [&](double h) {
    const long double plus = phi(model, advance(model, x, h, opt));
    const long double minus = phi(model, advance(model, x, -h, opt));
    return static_cast<double>((plus - minus) / (2.0L * h));
  };
  const double fd = (4.0 * central(dt / 2) - central(dt)) / 3.0;
  const double lie = lie_phi(model, x);
  const double den = std::max(std::abs(lie), std::abs(fd));
  return den > 0 ? std::abs(lie - fd) / den : 0.0;
}

SingularRatio singular_approximation_ratio(const ModelDef& model, std::size_t samples, double box, double shift,
                                           std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<double> on, off;
  for (std::size_t attempt = 0; attempt < 20 * samples && on.size() < samples; ++attempt) {
    const auto x = solve_row_for(model, 0, 0, random_point(rng, model.dim(), box));
    if (!x) continue;
    VectorXd y = *x;
    y[0] += shift;
    on.push_back(darboux_residual(model, *x));
    off.push_back(darboux_residual(model, y));
  }
  SingularRatio r;
  r.points = on.size();
  if (on.empty()) return r;
  r.median_on = median(on);
  r.median_off = median(off);
  r.ratio = r.median_on > 0 ? r.median_off / r.median_on : std::numeric_limits<double>::infinity();
  return r;
}

VerifyReport verify_model(const ModelDef& model, const VerifyOptions& options) {
  VerifyReport report;
  report.model = model.name();
  Suite s(report);
  std::mt19937_64 rng(options.seed);

  auto guarded = [&](const char* name, auto&& fn) {
    try {
      fn();
    } catch (const std::exception& e) {
      s.error(name, e.what());
    }
  };

  guarded("jacobian", [&] { jacobian_suite(model, rng, s); });
  guarded("fixed points", [&] { fixed_point_suite(model, s); });
  guarded("determinant identities", [&] { identity_suite(model.dim(), rng, s); });
  if (model.piecewise()) {
    guarded("piecewise-linear suite", [&] { pwl_suite(model, rng, s); });
  } else {
    guarded("lie derivative", [&] { smooth_suite(model, rng, s); });
  }
  const bool has_fast_row = model.params().contains("alpha1") || model.name() == "magnetoconvection5";
  if (!model.piecewise() && has_fast_row) guarded("singular approximation", [&] { singular_suite(model, s); });
  if (!model.piecewise() && model.dim() == 4 && model.params().contains("alpha1") && model.params().contains("c1"))
    guarded("order-0 residual", [&] { gsp_suite(model, s); });
  if (model.name() == "gear5") guarded("gear factors", [&] { gear_suite(model, rng, s); });
  return report;
}

}  // namespace flowcurv
