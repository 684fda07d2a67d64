#pragma once

#include <optional>
#include <string>
#include <vector>

#include "flowcurv/model.hpp"

namespace flowcurv {

/// Crossing of a pwl breakpoint: term `term` left the branch `from_branch`
/// for `to_branch` at `time`.
struct RegionEvent {
  double time = 0;
  int term = 0;
  int from_branch = 0;
  int to_branch = 0;
  Region from, to;
};

enum class IntegrationStatus { Completed, StepUnderflow, NonFinite, MaxSteps };

/// Accepted steps plus event points. For piecewise-linear models `regions[i]`
/// is the region the field was frozen to when leaving sample i.
struct Trajectory {
  std::vector<double> times;
  std::vector<Eigen::VectorXd> states;
  std::vector<std::optional<Region>> regions;
  std::vector<RegionEvent> events;
  IntegrationStatus status = IntegrationStatus::Completed;
  std::string message;
  long rejected_steps = 0;

  bool ok() const { return status == IntegrationStatus::Completed; }
  std::size_t size() const { return times.size(); }
};

struct IntegrateOptions {
  double rel_tol = 1e-9;
  double abs_tol = 1e-12;
  /// Initial step; 0 picks one automatically.
  double initial_step = 0;
  double max_step = 0;  // 0: unbounded
  long max_steps = 50'000'000;
  /// Event localization tolerance in time.
  double event_tol = 1e-12;
  /// Region to start in; classified from x0 when empty.
  std::optional<Region> initial_region;
  /// Keep every accepted step (false keeps only the end points).
  bool store_steps = true;
};

/// Dormand-Prince 5(4) with step-size control and pwl breakpoint events.
/// Throws std::invalid_argument for non-positive tolerances or t_end <= 0.
Trajectory integrate(const ModelDef& model, const Eigen::VectorXd& x0, double t_end,
                     const IntegrateOptions& options = {});

/// Flow map over a signed time span `tau` (negative integrates backward).
/// Throws NumericalError if the integration does not complete.
Eigen::VectorXd advance(const ModelDef& model, const Eigen::VectorXd& x0, double tau,
                        const IntegrateOptions& options = {});

std::string to_string(IntegrationStatus status);

}  // namespace flowcurv
