#include "flowcurv/models.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace flowcurv {
namespace {

template <typename S>
using Scalar = scalar_of_t<S>;

template <typename S>
Scalar<S> p(const ParamSet& ps, const char* name) {
  return static_cast<Scalar<S>>(ps.at(name));
}

// Fields with a single Chua diode acting on x1.
template <typename Derived>
class ChuaPwlBase : public VectorFieldCrtp<Derived> {
 public:
  int pwl_terms() const override { return 1; }
  Eigen::VectorXd switching_arguments(const Eigen::VectorXd& x) const override {
    return Eigen::VectorXd::Constant(1, x[0]);
  }
};

class Chua3Pwl : public ChuaPwlBase<Chua3Pwl> {
 public:
  explicit Chua3Pwl(ParamSet ps) : ps_(std::move(ps)) {}
  int dim() const override { return 3; }

  template <typename S>
  void evaluate(const VectorX<S>& x, Region r, VectorX<S>& f) const {
    const auto alpha = p<S>(ps_, "alpha"), beta = p<S>(ps_, "beta");
    const S k = pwl_k(x[0], p<S>(ps_, "a"), p<S>(ps_, "b"), static_cast<int>(r.code));
    f[0] = alpha * (x[1] - x[0] - k);
    f[1] = x[0] - x[1] + x[2];
    f[2] = -beta * x[1];
  }

 private:
  ParamSet ps_;
};

// The 4-D circuit; `Cubic` selects the smooth characteristic.
template <bool Cubic>
class Chua4 : public VectorFieldCrtp<Chua4<Cubic>> {
 public:
  explicit Chua4(ParamSet ps) : ps_(std::move(ps)) {}
  int dim() const override { return 4; }
  int pwl_terms() const override { return Cubic ? 0 : 1; }
  Eigen::VectorXd switching_arguments(const Eigen::VectorXd& x) const override {
    if constexpr (Cubic) return Eigen::VectorXd(0);
    return Eigen::VectorXd::Constant(1, x[0]);
  }

  template <typename S>
  void evaluate(const VectorX<S>& x, Region r, VectorX<S>& f) const {
    S k;
    if constexpr (Cubic)
      k = cubic_k(x[0], p<S>(ps_, "c1"), p<S>(ps_, "c2"));
    else
      k = pwl_k(x[0], p<S>(ps_, "a"), p<S>(ps_, "b"), static_cast<int>(r.code));
    f[0] = p<S>(ps_, "alpha1") * (x[2] - k);
    f[1] = p<S>(ps_, "alpha2") * x[1] - x[2] - x[3];
    f[2] = p<S>(ps_, "beta1") * (x[1] - x[0] - x[2]);
    f[3] = p<S>(ps_, "beta2") * x[1];
  }

 private:
  ParamSet ps_;
};

template <bool Cubic>
class Chua5 : public VectorFieldCrtp<Chua5<Cubic>> {
 public:
  explicit Chua5(ParamSet ps) : ps_(std::move(ps)) {}
  int dim() const override { return 5; }
  int pwl_terms() const override { return Cubic ? 0 : 1; }
  Eigen::VectorXd switching_arguments(const Eigen::VectorXd& x) const override {
    if constexpr (Cubic) return Eigen::VectorXd(0);
    return Eigen::VectorXd::Constant(1, x[0]);
  }

  template <typename S>
  void evaluate(const VectorX<S>& x, Region r, VectorX<S>& f) const {
    S k;
    if constexpr (Cubic)
      k = cubic_k(x[0], p<S>(ps_, "c1"), p<S>(ps_, "c2"));
    else
      k = pwl_k(x[0], p<S>(ps_, "a"), p<S>(ps_, "b"), static_cast<int>(r.code));
    f[0] = p<S>(ps_, "alpha1") * (x[1] - x[0] - k);
    f[1] = p<S>(ps_, "alpha2") * x[0] - x[1] + x[2];
    f[2] = p<S>(ps_, "beta1") * (x[3] - x[1]);
    f[3] = p<S>(ps_, "beta2") * (x[2] + x[4]);
    f[4] = p<S>(ps_, "gamma2") * (x[3] + p<S>(ps_, "gamma1") * x[4]);
  }

 private:
  ParamSet ps_;
};

class Magnetoconvection5 : public VectorFieldCrtp<Magnetoconvection5> {
 public:
  explicit Magnetoconvection5(ParamSet ps) : ps_(std::move(ps)) {}
  int dim() const override { return 5; }

  template <typename S>
  void evaluate(const VectorX<S>& x, Region, VectorX<S>& f) const {
    using T = Scalar<S>;
    const T vs = p<S>(ps_, "varsigma"), sigma = p<S>(ps_, "sigma"), r = p<S>(ps_, "r"), q = p<S>(ps_, "q"),
            w = p<S>(ps_, "omega");
    const T c5 = w * (T(3) - w) / (vs * vs * (T(4) - w));
    f[0] = sigma * (r * x[1] - x[0] - q * x[3] * (S(T(1)) + c5 * x[4]));
    f[1] = x[0] - x[1] - x[0] * x[2];
    f[2] = w * (x[0] * x[1] - x[2]);
    f[3] = -vs * (x[3] - x[0]) - (w / (vs * (T(4) - w))) * (x[0] * x[4]);
    f[4] = -vs * (T(4) - w) * (x[4] - x[0] * x[3]);
  }

 private:
  ParamSet ps_;
};

class Gear5 : public VectorFieldCrtp<Gear5> {
 public:
  explicit Gear5(ParamSet ps) : ps_(std::move(ps)) {}
  int dim() const override { return 5; }

  template <typename S>
  void evaluate(const VectorX<S>& x, Region, VectorX<S>& f) const {
    f[0] = -x[1];
    f[1] = x[0];
    f[2] = p<S>(ps_, "L") * (x[0] * x[0] + x[1] * x[1] - x[2]);
    f[3] = S(p<S>(ps_, "beta1")) + x[3] * x[3];
    f[4] = S(p<S>(ps_, "beta2")) + x[1] * x[1];
  }

 private:
  ParamSet ps_;
};

struct Entry {
  BuiltinInfo info;
  ParamSet defaults;
  std::function<std::shared_ptr<const VectorField>(const ParamSet&)> make;
};

template <typename F>
std::function<std::shared_ptr<const VectorField>(const ParamSet&)> factory() {
  return [](const ParamSet& ps) { return std::make_shared<const F>(ps); };
}

const std::vector<Entry>& registry() {
  static const std::vector<Entry> entries = {
      {{"chua3-pwl", "3-D Chua circuit, piecewise-linear diode"},
       {{"alpha", 9.0L}, {"beta", 100.0L / 7.0L}, {"a", -8.0L / 7.0L}, {"b", -5.0L / 7.0L}},
       factory<Chua3Pwl>()},
      {{"chua4-pwl", "4-D Chua circuit, piecewise-linear diode"},
       {{"alpha1", 2.1429L}, {"alpha2", -0.18L}, {"beta1", 0.0774L}, {"beta2", 0.003L}, {"a", -0.42L}, {"b", 1.2L}},
       factory<Chua4<false>>()},
      {{"chua5-pwl", "5-D Chua circuit, piecewise-linear diode"},
       {{"alpha1", 9.934L},
        {"alpha2", 1.0L},
        {"beta1", 14.47L},
        {"beta2", -406.5L},
        {"gamma1", -0.0152L},
        {"gamma2", 41000.0L},
        {"a", -1.246L},
        {"b", -0.6724L}},
       factory<Chua5<false>>()},
      {{"chua4-cubic", "4-D Chua circuit, cubic diode"},
       {{"alpha1", 2.1429L}, {"alpha2", -0.18L}, {"beta1", 0.0774L}, {"beta2", 0.003L}, {"c1", 0.3937L}, {"c2", -0.7235L}},
       factory<Chua4<true>>()},
      {{"chua5-cubic", "5-D Chua circuit, cubic diode"},
       {{"alpha1", 9.934L},
        {"alpha2", 1.0L},
        {"beta1", 14.47L},
        {"beta2", -406.5L},
        {"gamma1", -0.0152L},
        {"gamma2", 41000.0L},
        {"c1", 0.1068L},
        {"c2", -0.3056L}},
       factory<Chua5<true>>()},
      {{"magnetoconvection5", "5-D magnetoconvection model"},
       {{"varsigma", 0.09683L}, {"sigma", 1.0L}, {"r", 14.47L}, {"q", 5.0L}, {"omega", 0.1081L}},
       factory<Magnetoconvection5>()},
      {{"gear5", "5-D gear model"},
       {{"L", 1000.0L}, {"beta1", 800.0L}, {"beta2", 1200.0L}},
       factory<Gear5>()},
  };
  return entries;
}

ModelDef build(const Entry& e, const ParamSet& overrides) {
  ParamSet ps = e.defaults;
  for (const auto& [name, value] : overrides.entries()) ps.set(name, value);
  const Entry* entry = &e;
  return ModelDef(e.info.name, ps, e.make(ps), [entry](const ParamSet& next) { return build(*entry, next); });
}

bool less_lex(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(), b.data() + b.size());
}

bool residual_ok(const ModelDef& m, const Eigen::VectorXd& x) {
  return m.rhs(x).norm() <= 1e-10 * (1.0 + x.norm());
}

void add_unique(std::vector<FixedPoint>& out, FixedPoint fp) {
  for (const auto& q : out)
    if ((q.location - fp.location).norm() <= 1e-7 * (1.0 + fp.location.norm())) return;
  out.push_back(std::move(fp));
}

// Damped Newton in long double. Returns nullopt when it fails to converge.
std::optional<Eigen::VectorXd> newton(const ModelDef& m, Eigen::VectorXd x, int max_iter) {
  const int n = m.dim();
  for (int it = 0; it < max_iter; ++it) {
    const Eigen::VectorXd f = m.rhs(x);
    if (!f.allFinite()) return std::nullopt;
    if (residual_ok(m, x)) return x;
    const Eigen::MatrixXd J = m.jacobian(x);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(J);
    if (lu.rank() < n) return std::nullopt;
    const Eigen::VectorXd dx = lu.solve(f);
    double t = 1.0;
    const double f0 = f.norm();
    bool moved = false;
    for (int ls = 0; ls < 30; ++ls, t *= 0.5) {
      const Eigen::VectorXd trial = x - t * dx;
      const Eigen::VectorXd ft = m.rhs(trial);
      if (ft.allFinite() && ft.norm() < (1.0 - 1e-4 * t) * f0) {
        x = trial;
        moved = true;
        break;
      }
    }
    if (!moved) {
      x -= dx;
      if (residual_ok(m, x)) return x;
      return std::nullopt;
    }
  }
  return residual_ok(m, x) ? std::optional<Eigen::VectorXd>(x) : std::nullopt;
}

std::vector<FixedPoint> pwl_fixed_points(const ModelDef& m, const FixedPointOptions& opt) {
  const int terms = m.field().pwl_terms();
  const int n = m.dim();
  std::int64_t count = 1;
  for (int j = 0; j < terms; ++j) count *= 3;
  std::vector<FixedPoint> out;
  std::vector<int> branches(static_cast<std::size_t>(terms));
  for (std::int64_t idx = 0; idx < count; ++idx) {
    std::int64_t c = idx;
    for (int j = 0; j < terms; ++j) {
      branches[static_cast<std::size_t>(j)] = static_cast<int>(c % 3) - 1;
      c /= 3;
    }
    const Region region = encode_region(branches);
    const AffinePiece piece = affine_piece(m, region);
    Eigen::FullPivLU<MatrixX<long double>> lu(piece.A);
    if (lu.rank() < n) continue;
    const VectorX<long double> xl = lu.solve(-piece.c);
    const Eigen::VectorXd x = xl.cast<double>();
    const bool admissible = m.region_of(x) == region;
    if (!admissible && !opt.include_virtual) continue;
    add_unique(out, FixedPoint{x, region, admissible});
  }
  return out;
}

// Rows 2..n linear and row 1 an odd cubic along their null line.
std::optional<std::vector<FixedPoint>> cubic_reduction(const ModelDef& m) {
  const int n = m.dim();
  if (n < 2) return std::nullopt;
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(n);
  if (m.rhs(zero).norm() != 0.0) return std::nullopt;
  const Eigen::MatrixXd J0 = m.jacobian(zero);
  const Eigen::VectorXd probes[] = {Eigen::VectorXd::LinSpaced(n, 0.3, 1.7), Eigen::VectorXd::LinSpaced(n, -2.1, 0.9)};
  for (const auto& pr : probes) {
    const Eigen::MatrixXd Jp = m.jacobian(pr);
    if ((Jp.bottomRows(n - 1) - J0.bottomRows(n - 1)).norm() > 1e-12 * (1.0 + J0.norm())) return std::nullopt;
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(J0.bottomRows(n - 1));
  if (lu.rank() != n - 1) return std::nullopt;
  const Eigen::VectorXd v = lu.kernel().col(0).normalized();
  const double g1 = m.rhs(v)[0], g2 = m.rhs(2.0 * v)[0], gm = m.rhs(-v)[0];
  if (std::abs(g1 + gm) > 1e-12 * (1.0 + std::abs(g1))) return std::nullopt;
  const double A = (g2 - 2.0 * g1) / 6.0, B = g1 - A;
  // Cubic check: the fitted odd cubic must reproduce a third sample.
  const double s3 = 0.7, g3 = m.rhs(s3 * v)[0];
  if (std::abs(A * s3 * s3 * s3 + B * s3 - g3) > 1e-10 * (1.0 + std::abs(g3))) return std::nullopt;
  std::vector<FixedPoint> out;
  out.push_back(FixedPoint{zero, std::nullopt, true});
  if (A != 0.0 && -B / A > 0.0) {
    const double s = std::sqrt(-B / A);
    for (double sign : {-1.0, 1.0}) {
      auto polished = newton(m, sign * s * v, 50);
      if (polished) add_unique(out, FixedPoint{*polished, std::nullopt, true});
    }
  }
  return out;
}

}  // namespace

const std::vector<BuiltinInfo>& builtin_models() {
  static const std::vector<BuiltinInfo> infos = [] {
    std::vector<BuiltinInfo> v;
    for (const auto& e : registry()) v.push_back(e.info);
    return v;
  }();
  return infos;
}

ModelDef make_builtin(std::string_view name, const ParamSet& overrides) {
  for (const auto& e : registry()) {
    if (e.info.name != name) continue;
    return build(e, {}).with_params(overrides);
  }
  throw ConfigError("unknown model '" + std::string(name) + "'");
}

AffinePiece affine_piece(const ModelDef& model, std::optional<Region> region) {
  const int n = model.dim();
  AffinePiece piece{MatrixX<long double>(n, n), VectorX<long double>(n)};
  VectorX<JetL> seed(n), out(n);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) seed[i] = JetL::variable(0.0L, i == j ? 1.0L : 0.0L, 1);
    model.field().eval(seed, region ? region : std::optional<Region>(Region{}), out);
    for (int i = 0; i < n; ++i) {
      piece.A(i, j) = out[i][1];
      piece.c[i] = out[i][0];
    }
  }
  return piece;
}

std::string region_label(const ModelDef& model, std::optional<Region> region) {
  const int terms = model.field().pwl_terms();
  if (terms == 0 || !region) return "";
  std::string s;
  for (int b : decode_region(*region, terms)) s += b < 0 ? '-' : (b > 0 ? '+' : '0');
  return s;
}

std::vector<FixedPoint> fixed_points(const ModelDef& model, const FixedPointOptions& options,
                                     std::vector<std::string>* diagnostics) {
  std::vector<FixedPoint> out;
  if (model.piecewise()) {
    out = pwl_fixed_points(model, options);
  } else if (auto reduced = model.fixed_point_guesses().empty() ? cubic_reduction(model) : std::nullopt) {
    out = std::move(*reduced);
  } else if (!model.fixed_point_guesses().empty()) {
    for (std::size_t g = 0; g < model.fixed_point_guesses().size(); ++g) {
      auto x = newton(model, model.fixed_point_guesses()[g], options.newton_max_iter);
      if (x)
        add_unique(out, FixedPoint{*x, std::nullopt, true});
      else if (diagnostics)
        diagnostics->push_back("Newton iteration from fixed point guess " + std::to_string(g + 1) +
                               " did not converge");
    }
  } else {
    const int n = model.dim();
    const int k = std::max(options.lattice_points_per_axis, 1);
    std::int64_t total = 1;
    for (int i = 0; i < n; ++i) total *= k;
    Eigen::VectorXd start(n);
    for (std::int64_t idx = 0; idx < total; ++idx) {
      std::int64_t c = idx;
      for (int i = 0; i < n; ++i) {
        const int digit = static_cast<int>(c % k);
        c /= k;
        start[i] = k == 1 ? 0.0 : -options.lattice_radius + 2.0 * options.lattice_radius * digit / (k - 1);
      }
      if (auto x = newton(model, start, options.newton_max_iter)) add_unique(out, FixedPoint{*x, std::nullopt, true});
    }
  }
  std::sort(out.begin(), out.end(), [](const FixedPoint& a, const FixedPoint& b) { return less_lex(a.location, b.location); });
  return out;
}

}  // namespace flowcurv
