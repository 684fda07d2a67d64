#include "flowcurv/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

#include "flowcurv/derivatives.hpp"
#include "flowcurv/geometry.hpp"

namespace flowcurv {
namespace {

using cd = std::complex<double>;

void normalize_phase(Eigen::Ref<Eigen::VectorXcd> v) {
  const double nrm = v.norm();
  if (nrm == 0.0) return;
  v /= nrm;
  Eigen::Index k = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i)
    if (std::abs(v[i]) > std::abs(v[k]) * (1.0 + 1e-12)) k = i;
  v *= std::conj(v[k]) / std::abs(v[k]);
  // Remove the rounding residue of the phase rotation on real vectors.
  if (v.imag().norm() <= 1e-14) v = v.real().cast<cd>();
}

void check_residual(const Eigen::MatrixXd& J, const Eigen::VectorXcd& y, cd lambda, const char* what) {
  const Eigen::VectorXcd r = J.cast<cd>() * y - lambda * y;
  if (r.norm() > 1e-8 * (std::abs(lambda) + 1.0) * y.norm()) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%s eigenvector residual %.3g for eigenvalue %.6g%+.6gi: defective Jacobian", what,
                  r.norm(), lambda.real(), lambda.imag());
    throw NumericalError(buf);
  }
}

std::string format_number(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

}  // namespace

bool Spectrum::is_real(Eigen::Index i) const {
  const cd l = eigenvalues[i];
  return std::abs(l.imag()) <= 1e-12 * std::max(1.0, std::abs(l));
}

Spectrum spectrum_of(const Eigen::MatrixXd& J) {
  if (J.rows() != J.cols() || J.rows() == 0) throw std::invalid_argument("spectrum needs a non-empty square matrix");
  if (!J.allFinite()) throw NumericalError("Jacobian is not finite");
  const Eigen::Index n = J.rows();
  Eigen::EigenSolver<Eigen::MatrixXd> es(J, true);
  Eigen::EigenSolver<Eigen::MatrixXd> et(J.transpose(), true);
  if (es.info() != Eigen::Success || et.info() != Eigen::Success)
    throw NumericalError("eigenvalue iteration did not converge");
  const Eigen::VectorXcd vals = es.eigenvalues(), tvals = et.eigenvalues();

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    const double ra = std::abs(vals[a].real()), rb = std::abs(vals[b].real());
    if (ra != rb) return ra > rb;
    return vals[a].imag() > vals[b].imag();
  });

  Spectrum s;
  s.jacobian = J;
  s.eigenvalues.resize(n);
  s.right.resize(n, n);
  s.left.resize(n, n);
  std::vector<bool> used(static_cast<std::size_t>(n), false);
  for (Eigen::Index c = 0; c < n; ++c) {
    const Eigen::Index i = order[static_cast<std::size_t>(c)];
    s.eigenvalues[c] = vals[i];
    s.right.col(c) = es.eigenvectors().col(i);
    Eigen::Index best = -1;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (used[static_cast<std::size_t>(j)]) continue;
      if (best < 0 || std::abs(tvals[j] - vals[i]) < std::abs(tvals[best] - vals[i])) best = j;
    }
    used[static_cast<std::size_t>(best)] = true;
    s.left.col(c) = et.eigenvectors().col(best);
    normalize_phase(s.right.col(c));
    normalize_phase(s.left.col(c));
    check_residual(J, s.right.col(c), s.eigenvalues[c], "right");
    check_residual(J.transpose(), s.left.col(c), s.eigenvalues[c], "left");
  }
  return s;
}

Spectrum spectrum_at(const ModelDef& model, const Eigen::VectorXd& x, std::optional<Region> region) {
  if (!x.allFinite()) throw std::invalid_argument("non-finite state");
  if (!region && model.piecewise()) region = model.region_of(x);
  Spectrum s = spectrum_of(model.jacobian(x, region));
  s.point = x;
  s.region = region;
  return s;
}

Hyperplane tls_hyperplane(const ModelDef& model, const FixedPoint& fp, FastPolicy policy) {
  const Spectrum s = spectrum_at(model, fp.location, fp.region);
  Eigen::Index k = 0;
  const bool complex_fast = !s.is_real(0);
  if (complex_fast) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "fast eigenvalue %.6g%+.6gi is complex: no real invariant hyperplane",
                  s.eigenvalues[0].real(), s.eigenvalues[0].imag());
    if (policy == FastPolicy::Strict) throw ComplexFastEigenvalue(buf);
    k = -1;
    for (Eigen::Index i = 1; i < s.eigenvalues.size(); ++i)
      if (s.is_real(i)) {
        k = i;
        break;
      }
    if (k < 0) throw ComplexFastEigenvalue(std::string(buf) + " and no eigenvalue is real");
  }
  Hyperplane h;
  h.normal = s.left.col(k).real().normalized();
  const double big = h.normal.cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < h.normal.size(); ++i) {
    if (std::abs(h.normal[i]) > 1e-12 * big) {
      if (h.normal[i] < 0) h.normal = -h.normal;
      break;
    }
  }
  h.offset = -h.normal.dot(fp.location);
  h.base = fp;
  h.base.region = s.region;
  h.lambda = s.eigenvalues[k].real();
  h.eigen_index = static_cast<int>(k);
  h.fast_pair_complex = complex_fast;
  return h;
}

Eigen::VectorXd scaled_coefficients(const Hyperplane& plane, PlaneDisplay display) {
  const Eigen::Index n = plane.normal.size();
  Eigen::VectorXd c(n + 1);
  c.head(n) = plane.normal;
  c[n] = plane.offset;
  switch (display.scaling) {
    case PlaneScaling::Canonical:
      return c;
    case PlaneScaling::UnitCoefficient:
      if (display.index < 0 || display.index >= n) throw std::invalid_argument("coefficient index out of range");
      if (plane.normal[display.index] == 0.0) throw std::invalid_argument("cannot normalize by a zero coefficient");
      return c / plane.normal[display.index];
    case PlaneScaling::Lambda:
      return c * plane.lambda;
  }
  return c;
}

std::string plane_equation(const Hyperplane& plane, PlaneDisplay display, int digits) {
  const Eigen::VectorXd c = scaled_coefficients(plane, display);
  const Eigen::Index n = plane.normal.size();
  std::string out;
  bool first = true;
  for (Eigen::Index i = 0; i <= n; ++i) {
    const double v = c[i];
    if (v == 0.0 && (i < n || !first)) continue;
    const double mag = std::abs(v);
    if (first)
      out += v < 0 ? "-" : "";
    else
      out += v < 0 ? " - " : " + ";
    const std::string num = format_number(mag, digits);
    if (i < n)
      out += (num == "1" ? std::string() : num) + "x" + std::to_string(i + 1);
    else
      out += num;
    first = false;
  }
  return out + " = 0";
}

PlaneCheck darboux_check_plane(const ModelDef& model, const Hyperplane& plane, std::size_t samples, double spread,
                               std::uint64_t seed) {
  const int n = model.dim();
  if (plane.normal.size() != n) throw std::invalid_argument("plane dimension does not match the model");
  PlaneCheck out;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const std::optional<Region> region = plane.base.region;
  double sum = 0.0;
  const std::size_t max_attempts = 100 * std::max<std::size_t>(samples, 1);
  for (std::size_t attempt = 0; attempt < max_attempts && out.samples < samples; ++attempt) {
    Eigen::VectorXd x(n);
    for (int i = 0; i < n; ++i) x[i] = plane.base.location[i] + spread * unit(rng);
    if (model.piecewise() && model.region_of(x) != region) {
      ++out.excluded;
      continue;
    }
    const Eigen::VectorXd V = model.rhs(x, region);
    const double pi = plane(x);
    const double r = std::abs(plane.normal.dot(V) - plane.lambda * pi) / (1.0 + std::abs(plane.lambda * pi));
    out.max_residual = std::max(out.max_residual, r);
    sum += r;
    ++out.samples;
  }
  out.mean_residual = out.samples > 0 ? sum / static_cast<double>(out.samples) : 0.0;
  out.invariant = out.samples > 0 && out.max_residual <= 1e-8;
  return out;
}

Coplanarity coplanarity_equivalence(const ModelDef& model, const Eigen::VectorXd& x, const Spectrum& spectrum,
                                    int fast_index) {
  const Eigen::Index n = spectrum.eigenvalues.size();
  if (x.size() != n) throw std::invalid_argument("state dimension does not match the spectrum");
  if (fast_index < 0 || fast_index >= n) throw std::invalid_argument("fast eigenvalue index out of range");
  if (!spectrum.is_real(fast_index)) throw NumericalError("fast eigenvalue is complex: no real coplanarity test");
  Eigen::MatrixXd B(n, n - 1);
  Eigen::Index col = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (i == fast_index) continue;
    const Eigen::VectorXcd y = spectrum.right.col(i);
    if (spectrum.is_real(i)) {
      if (col >= n - 1) throw NumericalError("unpaired eigenvalues in the slow spectrum");
      B.col(col++) = y.real();
    } else if (spectrum.eigenvalues[i].imag() > 0) {
      if (col + 1 >= n) throw NumericalError("unpaired complex eigenvalue in the slow spectrum");
      B.col(col++) = y.real();
      B.col(col++) = y.imag();
    }
  }
  if (col != n - 1) throw NumericalError("unpaired complex eigenvalue in the slow spectrum");
  const Eigen::VectorXd W = wedge<double>(B);
  double colnorms = 1.0;
  for (Eigen::Index c = 0; c < n - 1; ++c) colnorms *= B.col(c).norm();
  if (W.norm() <= 1e-12 * colnorms)
    throw NumericalError("slow eigenvectors are linearly dependent: equivalence not evaluable");
  const Eigen::VectorXd tY = spectrum.left.col(fast_index).real();
  const Eigen::VectorXd V = model.rhs(x, spectrum.region);
  Coplanarity c;
  c.r1 = std::abs(V.dot(W));
  c.scale1 = V.norm() * W.norm();
  c.r2 = std::abs(V.dot(tY));
  c.scale2 = V.norm() * tY.norm();
  c.parallelism = std::max(0.0, 1.0 - std::abs(W.dot(tY)) / (W.norm() * tY.norm()));
  return c;
}

Hypercoplanarity hypercoplanarity_check(const ModelDef& model, const Eigen::VectorXd& x, std::optional<Region> region) {
  const int n = model.dim();
  StackOptions opt;
  opt.region = region;
  const auto stack = derivative_stack_l(model, x, n, opt);
  const MatrixX<long double> m = stack.columns(1, n);
  const long double lu = m.partialPivLu().determinant();
  long double wedged = 0;
  if (n == 1) {
    wedged = m(0, 0);
  } else {
    const VectorX<long double> w = wedge<long double>(stack.columns(2, n - 1));
    wedged = stack.d(1).dot(w);
  }
  Hypercoplanarity h;
  h.phi_lu = static_cast<double>(lu);
  h.phi_wedge = static_cast<double>(wedged);
  const long double s = std::max(std::abs(lu), std::abs(wedged));
  h.relative_difference = s > 0 ? static_cast<double>(std::abs(lu - wedged) / s) : 0.0;
  return h;
}

}  // namespace flowcurv
