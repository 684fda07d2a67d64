#include "flowcurv/integrate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace flowcurv {
namespace {

// Dormand-Prince 5(4) coefficients.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784, a76 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200, e6 = 22.0 / 525,
                 e7 = -1.0 / 40;

struct StepResult {
  Eigen::VectorXd y, k7, err;
};

class Stepper {
 public:
  Stepper(const ModelDef& m, std::optional<Region> region) : m_(m), region_(region) {}

  Eigen::VectorXd f(const Eigen::VectorXd& x) const { return m_.rhs(x, region_); }

  StepResult step(const Eigen::VectorXd& x, const Eigen::VectorXd& k1, double h, bool with_error) const {
    const Eigen::VectorXd k2 = f(x + h * (a21 * k1));
    const Eigen::VectorXd k3 = f(x + h * (a31 * k1 + a32 * k2));
    const Eigen::VectorXd k4 = f(x + h * (a41 * k1 + a42 * k2 + a43 * k3));
    const Eigen::VectorXd k5 = f(x + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
    const Eigen::VectorXd k6 = f(x + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
    StepResult r;
    r.y = x + h * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
    if (with_error) {
      r.k7 = f(r.y);
      r.err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * r.k7);
    }
    return r;
  }

  std::optional<Region> region() const { return region_; }
  void set_region(std::optional<Region> r) { region_ = r; }

 private:
  const ModelDef& m_;
  std::optional<Region> region_;
};

double error_norm(const Eigen::VectorXd& err, const Eigen::VectorXd& x, const Eigen::VectorXd& y, double rtol,
                  double atol) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < err.size(); ++i) {
    const double sc = atol + rtol * std::max(std::abs(x[i]), std::abs(y[i]));
    const double q = err[i] / sc;
    acc += q * q;
  }
  return std::sqrt(acc / static_cast<double>(err.size()));
}

double initial_step(const Stepper& s, const Eigen::VectorXd& x0, const Eigen::VectorXd& f0, double dir,
                    const IntegrateOptions& o) {
  const Eigen::ArrayXd sc = o.abs_tol + o.rel_tol * x0.array().abs();
  const double n = static_cast<double>(x0.size());
  const double d0 = std::sqrt((x0.array() / sc).square().sum() / n);
  const double d1 = std::sqrt((f0.array() / sc).square().sum() / n);
  double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
  const Eigen::VectorXd f1 = s.f(x0 + dir * h0 * f0);
  const double d2 = std::sqrt(((f1 - f0).array() / sc).square().sum() / n) / h0;
  const double h1 = std::max(d1, d2) <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / std::max(d1, d2), 0.2);
  return std::min(100.0 * h0, h1);
}

// New branch when a switching argument u leaves `branch`, following the
// tie-break that |u| = 1 belongs to the middle branch.
std::optional<int> leaves(double u, int branch) {
  switch (branch) {
    case 0:
      if (u > 1.0) return 1;
      if (u < -1.0) return -1;
      return std::nullopt;
    case 1:
      return u <= 1.0 ? std::optional<int>(0) : std::nullopt;
    default:
      return u >= -1.0 ? std::optional<int>(0) : std::nullopt;
  }
}

bool any_leaves(const ModelDef& m, const Eigen::VectorXd& y, const std::vector<int>& branches) {
  const Eigen::VectorXd u = m.field().switching_arguments(y);
  for (std::size_t j = 0; j < branches.size(); ++j)
    if (leaves(u[static_cast<Eigen::Index>(j)], branches[j])) return true;
  return false;
}

Trajectory run(const ModelDef& model, const Eigen::VectorXd& x0, double t_end, const IntegrateOptions& o) {
  const int n = model.dim();
  if (x0.size() != n) throw std::invalid_argument("initial state has wrong dimension");
  if (!(o.rel_tol > 0) || !(o.abs_tol > 0)) throw std::invalid_argument("tolerances must be positive");
  if (!(o.event_tol > 0)) throw std::invalid_argument("event tolerance must be positive");
  if (!x0.allFinite()) throw std::invalid_argument("non-finite initial state");
  if (!std::isfinite(t_end)) throw std::invalid_argument("non-finite end time");

  const int terms = model.field().pwl_terms();
  std::optional<Region> region = o.initial_region;
  if (!region && terms > 0) region = model.region_of(x0);
  std::vector<int> branches = terms > 0 ? decode_region(*region, terms) : std::vector<int>{};

  Trajectory tr;
  Stepper s(model, region);
  double t = 0.0;
  Eigen::VectorXd x = x0;
  auto record = [&](bool force) {
    if (!o.store_steps && !force) return;
    tr.times.push_back(t);
    tr.states.push_back(x);
    tr.regions.push_back(s.region());
  };
  record(true);
  if (t_end == 0.0) return tr;

  const double dir = t_end > 0 ? 1.0 : -1.0;
  Eigen::VectorXd k1 = s.f(x);
  if (!k1.allFinite()) {
    tr.status = IntegrationStatus::NonFinite;
    tr.message = "non-finite derivative at the initial state";
    return tr;
  }
  double h = o.initial_step > 0 ? o.initial_step : initial_step(s, x, k1, dir, o);
  if (o.max_step > 0) h = std::min(h, o.max_step);
  constexpr double eps = std::numeric_limits<double>::epsilon();
  bool last_rejected = false;
  long steps = 0;

  while (dir * (t_end - t) > 0) {
    if (++steps > o.max_steps) {
      tr.status = IntegrationStatus::MaxSteps;
      tr.message = "step budget exhausted at t = " + std::to_string(t);
      break;
    }
    const double remaining = std::abs(t_end - t);
    const bool final_step = h >= remaining;
    const double hs = final_step ? remaining : h;
    if (hs < 10.0 * eps * std::max(1.0, std::abs(t))) {
      tr.status = IntegrationStatus::StepUnderflow;
      tr.message = "step size underflow at t = " + std::to_string(t);
      break;
    }
    StepResult r = s.step(x, k1, dir * hs, true);
    const bool finite = r.y.allFinite() && r.k7.allFinite();
    const double err = finite ? error_norm(r.err, x, r.y, o.rel_tol, o.abs_tol) : std::numeric_limits<double>::infinity();
    if (!(err <= 1.0)) {
      ++tr.rejected_steps;
      const double fac = finite ? std::max(0.2, 0.9 * std::pow(err, -0.2)) : 0.2;
      h = hs * std::min(1.0, fac);
      last_rejected = true;
      if (!finite && h < 10.0 * eps * std::max(1.0, std::abs(t))) {
        tr.status = IntegrationStatus::NonFinite;
        tr.message = "state became non-finite near t = " + std::to_string(t);
        break;
      }
      continue;
    }

    if (terms > 0 && any_leaves(model, r.y, branches)) {
      // Earliest breakpoint crossing inside the accepted step.
      double lo = 0.0, hi = hs;
      Eigen::VectorXd y_hi = r.y;
      while (hi - lo > o.event_tol) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        Eigen::VectorXd y_mid = s.step(x, k1, dir * mid, false).y;
        if (any_leaves(model, y_mid, branches)) {
          hi = mid;
          y_hi = std::move(y_mid);
        } else {
          lo = mid;
        }
      }
      t += dir * hi;
      x = y_hi;
      const Eigen::VectorXd u = model.field().switching_arguments(x);
      const Region from = *s.region();
      for (int j = 0; j < terms; ++j) {
        auto next = leaves(u[j], branches[static_cast<std::size_t>(j)]);
        if (!next) continue;
        RegionEvent ev;
        ev.time = t;
        ev.term = j;
        ev.from_branch = branches[static_cast<std::size_t>(j)];
        ev.to_branch = *next;
        ev.from = from;
        branches[static_cast<std::size_t>(j)] = *next;
        tr.events.push_back(ev);
      }
      const Region to = encode_region(branches);
      for (auto& ev : tr.events)
        if (ev.time == t) ev.to = to;
      s.set_region(to);
      k1 = s.f(x);
      record(true);
      continue;
    }

    t = final_step ? t_end : t + dir * hs;
    x = r.y;
    k1 = r.k7;
    record(final_step);
    double fac = std::min(5.0, std::max(0.2, 0.9 * std::pow(std::max(err, 1e-10), -0.2)));
    if (last_rejected) fac = std::min(fac, 1.0);
    last_rejected = false;
    h = hs * fac;
    if (o.max_step > 0) h = std::min(h, o.max_step);
  }
  if (!o.store_steps && tr.times.back() != t) record(true);
  return tr;
}

}  // namespace

Trajectory integrate(const ModelDef& model, const Eigen::VectorXd& x0, double t_end, const IntegrateOptions& options) {
  if (!(t_end > 0)) throw std::invalid_argument("end time must be positive");
  return run(model, x0, t_end, options);
}

Eigen::VectorXd advance(const ModelDef& model, const Eigen::VectorXd& x0, double tau, const IntegrateOptions& options) {
  IntegrateOptions o = options;
  o.store_steps = false;
  Trajectory tr = run(model, x0, tau, o);
  if (!tr.ok()) throw NumericalError("integration failed: " + tr.message);
  return tr.states.back();
}

std::string to_string(IntegrationStatus status) {
  switch (status) {
    case IntegrationStatus::Completed:
      return "completed";
    case IntegrationStatus::StepUnderflow:
      return "step-underflow";
    case IntegrationStatus::NonFinite:
      return "non-finite";
    case IntegrationStatus::MaxSteps:
      return "max-steps";
  }
  return "unknown";
}

}  // namespace flowcurv
