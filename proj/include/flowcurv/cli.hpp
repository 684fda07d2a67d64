#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "flowcurv/manifold.hpp"
#include "flowcurv/model.hpp"

namespace flowcurv::cli {

/// Exit statuses of the command-line front end.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitNumerical = 2;

/// Runs one command. Results go to `out` unless an output file is given;
/// diagnostics go to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Registry name, or a path to a JSON model file when the name is not
/// registered. Throws ConfigError.
ModelDef resolve_model(const std::string& spec, const ParamSet& overrides);

/// "alpha=9" pairs; values may be constant expressions. Throws ConfigError.
ParamSet parse_params(const std::vector<std::string>& items);

/// "x1=-4:4:200,x2=-1:1:200" plus "x3=fp,x4=0" into a grid over the model's
/// state space. Coordinates named nowhere are fixed at 0. Throws ConfigError.
GridSpec parse_grid(const ModelDef& model, const std::string& grid, const std::string& slice);

/// Worker count: the request (0 means the hardware concurrency) capped by
/// FLOWCURV_THREADS.
int effective_threads(int requested);

}  // namespace flowcurv::cli
