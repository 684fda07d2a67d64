#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "flowcurv/model.hpp"
#include "flowcurv/table.hpp"

namespace flowcurv {

/// One residual check: `value` must stay at or below `bound`, or at or above
/// it when `lower_bound` is set.
struct VerifyRow {
  std::string check;
  double value = 0;
  double bound = 0;
  bool lower_bound = false;
  bool passed = false;
  std::string note;
};

struct VerifyReport {
  std::string model;
  std::vector<VerifyRow> rows;

  bool passed() const;
  Table table() const;
};

struct VerifyOptions {
  std::uint64_t seed = 7;
  int threads = 1;
};

/// Runs every residual suite that applies to the model: Jacobian and fixed
/// points, Darboux identities, derivative-stack identities, tangent linear
/// system planes, the determinant identities and the model-specific checks.
VerifyReport verify_model(const ModelDef& model, const VerifyOptions& options = {});

/// Relative disagreement between lie_phi and a Richardson-extrapolated
/// centered difference of phi along the integrated flow.
double lie_time_fd_error(const ModelDef& model, const Eigen::VectorXd& x, double dt = 1e-5);

/// Median darboux residual at points displaced by `shift` in x1 divided by
/// the median on the singular approximation f1 = 0 (solved for x1).
struct SingularRatio {
  std::size_t points = 0;
  double median_on = 0;
  double median_off = 0;
  double ratio = 0;
};
SingularRatio singular_approximation_ratio(const ModelDef& model, std::size_t samples, double box, double shift = 0.5,
                                           std::uint64_t seed = 3);

}  // namespace flowcurv
