#include "flowcurv/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "flowcurv/expression.hpp"
#include "flowcurv/geometry.hpp"
#include "flowcurv/models.hpp"
#include "flowcurv/parallel.hpp"
#include "flowcurv/spectral.hpp"
#include "flowcurv/table.hpp"
#include "flowcurv/verify.hpp"

namespace flowcurv::cli {
namespace {

namespace fs = std::filesystem;
using Eigen::VectorXd;

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  std::istringstream in(text);
  while (std::getline(in, cur, sep)) parts.push_back(cur);
  if (!text.empty() && text.back() == sep) parts.emplace_back();
  return parts;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

double parse_number(const std::string& text, const std::string& what) {
  try {
    const long double v = parse_constant(trim(text), ParamSet{});
    if (!std::isfinite(static_cast<double>(v))) throw ConfigError("not finite");
    return static_cast<double>(v);
  } catch (const ConfigError& e) {
    throw ConfigError(what + ": cannot read '" + text + "' as a number (" + e.what() + ")");
  }
}

// "x3" -> 2, checked against the model dimension.
int parse_coordinate(const std::string& name, int dim, const std::string& what) {
  const std::string s = trim(name);
  if (s.size() < 2 || s[0] != 'x') throw ConfigError(what + ": expected a coordinate name like x1, got '" + s + "'");
  int k = 0;
  for (std::size_t i = 1; i < s.size(); ++i) {
    if (s[i] < '0' || s[i] > '9') throw ConfigError(what + ": bad coordinate name '" + s + "'");
    k = k * 10 + (s[i] - '0');
    if (k > 1000) break;
  }
  if (k < 1 || k > dim)
    throw ConfigError(what + ": coordinate " + s + " outside x1..x" + std::to_string(dim));
  return k - 1;
}

VectorXd parse_state(const std::string& text, int dim, const std::string& what) {
  const auto parts = split(text, ',');
  if (static_cast<int>(parts.size()) != dim)
    throw ConfigError(what + ": expected " + std::to_string(dim) + " comma-separated values, got " +
                      std::to_string(parts.size()));
  VectorXd x(dim);
  for (int i = 0; i < dim; ++i) x[i] = parse_number(parts[static_cast<std::size_t>(i)], what);
  return x;
}

struct RunDefaults {
  std::vector<double> x0;
  double t_end;
};

// Initial state and horizon used when --x0 / --t-end are omitted.
RunDefaults defaults_for(const ModelDef& model) {
  static const std::map<std::string, RunDefaults> table = {
      {"chua3-pwl", {{0.1, 0.0, 0.0}, 200.0}},
      {"chua4-pwl", {{0.1, 0.0, 0.0, 0.0}, 500.0}},
      {"chua5-pwl", {{0.1, 0.0, 0.0, 0.0, 0.0}, 50.0}},
      {"chua4-cubic", {{0.1, 0.0, 0.0, 0.0}, 500.0}},
      {"chua5-cubic", {{0.1, 0.0, 0.0, 0.0, 0.0}, 50.0}},
      {"magnetoconvection5", {{0.1, 0.1, 0.1, 0.1, 0.1}, 200.0}},
      {"gear5", {{1.0, 0.0, 0.5, 0.0, 0.0}, 0.05}},
  };
  if (auto it = table.find(model.name()); it != table.end() && static_cast<int>(it->second.x0.size()) == model.dim())
    return it->second;
  return {std::vector<double>(static_cast<std::size_t>(model.dim()), 0.1), 100.0};
}

std::int64_t region_code(const std::optional<Region>& r) { return r ? r->code : 0; }

// Writes the table to `out`, or atomically to `path` through a temporary
// file that is removed if anything fails.
void emit(const Table& table, const std::string& format, const std::string& path, std::ostream& out) {
  auto write = [&](std::ostream& os) {
    if (format == "json")
      write_json(os, table);
    else
      write_csv(os, table);
  };
  if (path.empty()) {
    write(out);
    return;
  }
  const fs::path target(path);
  const fs::path tmp = target.string() + ".tmp";
  try {
    {
      std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
      if (!f) throw ConfigError("cannot open '" + tmp.string() + "' for writing");
      write(f);
      f.flush();
      if (!f) throw NumericalError("write to '" + tmp.string() + "' failed");
    }
    fs::rename(tmp, target);
  } catch (...) {
    std::error_code ec;
    fs::remove(tmp, ec);
    throw;
  }
}

struct Common {
  std::string model;
  std::vector<std::string> params;
  std::string output;
  std::string format = "csv";
  int threads = 0;
};

void add_common(CLI::App* sub, Common& c, bool needs_model = true) {
  auto* m = sub->add_option("-m,--model", c.model, "registry name or JSON model file");
  if (needs_model) m->required();
  sub->add_option("-p,--param", c.params, "parameter override name=value (repeatable)");
  sub->add_option("-o,--output", c.output, "output file (default: standard output)");
  sub->add_option("--format", c.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  sub->add_option("--threads", c.threads, "worker threads (0: all cores)")->check(CLI::NonNegativeNumber);
}

struct TrajectoryArgs {
  std::string x0;
  std::optional<double> t_end;
  double rtol = 1e-9;
  double atol = 1e-12;
};

void add_trajectory(CLI::App* sub, TrajectoryArgs& t) {
  sub->add_option("--x0", t.x0, "initial state, comma separated");
  sub->add_option("--t-end", t.t_end, "integration horizon");
  sub->add_option("--rtol", t.rtol, "relative tolerance")->check(CLI::PositiveNumber);
  sub->add_option("--atol", t.atol, "absolute tolerance")->check(CLI::PositiveNumber);
}

Trajectory run_trajectory(const ModelDef& model, const TrajectoryArgs& t) {
  const RunDefaults d = defaults_for(model);
  VectorXd x0 = Eigen::Map<const VectorXd>(d.x0.data(), static_cast<Eigen::Index>(d.x0.size()));
  if (!t.x0.empty()) x0 = parse_state(t.x0, model.dim(), "--x0");
  const double t_end = t.t_end.value_or(d.t_end);
  if (!(t_end > 0) || !std::isfinite(t_end)) throw ConfigError("--t-end must be a positive finite number");
  IntegrateOptions opt;
  opt.rel_tol = t.rtol;
  opt.abs_tol = t.atol;
  Trajectory traj = integrate(model, x0, t_end, opt);
  if (!traj.ok())
    throw NumericalError("integration stopped at t = " + format_double(traj.times.back()) + ": " +
                         to_string(traj.status) + (traj.message.empty() ? "" : " (" + traj.message + ")"));
  return traj;
}

std::vector<std::string> state_columns(int n) {
  std::vector<std::string> c;
  for (int i = 1; i <= n; ++i) c.push_back("x" + std::to_string(i));
  return c;
}

std::vector<VectorXd> grid_nodes(const GridSpec& g) {
  std::vector<VectorXd> nodes;
  std::vector<int> idx(g.axes.size(), 0);
  while (true) {
    VectorXd x = g.base;
    for (std::size_t a = 0; a < g.axes.size(); ++a) {
      const auto& ax = g.axes[a];
      x[ax.index] = ax.lo + (ax.hi - ax.lo) * idx[a] / (ax.count - 1);
    }
    nodes.push_back(std::move(x));
    std::size_t a = 0;
    for (; a < idx.size(); ++a) {
      if (++idx[a] < g.axes[a].count) break;
      idx[a] = 0;
    }
    if (a == idx.size()) break;
  }
  return nodes;
}

PlaneDisplay parse_display(const std::string& text, int n) {
  if (text == "auto") return n == 3 ? PlaneDisplay{PlaneScaling::UnitCoefficient, n - 1} : PlaneDisplay{PlaneScaling::Lambda, 0};
  if (text == "canonical") return {PlaneScaling::Canonical, 0};
  if (text == "lambda") return {PlaneScaling::Lambda, 0};
  if (text.rfind("unit:", 0) == 0) return {PlaneScaling::UnitCoefficient, parse_coordinate(text.substr(5), n, "--display")};
  throw ConfigError("--display must be auto, canonical, lambda or unit:xK");
}

std::string format_state(const VectorXd& x) {
  std::string s = "(";
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", x[i] + 0.0);
    s += (i ? ", " : "") + std::string(buf);
  }
  return s + ")";
}

}  // namespace

ParamSet parse_params(const std::vector<std::string>& items) {
  ParamSet ps;
  for (const auto& item : items) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("--param expects name=value, got '" + item + "'");
    const std::string name = trim(item.substr(0, eq));
    if (ps.contains(name)) throw ConfigError("parameter '" + name + "' given twice");
    try {
      ps.set(name, parse_constant(item.substr(eq + 1), ParamSet{}));
    } catch (const ConfigError& e) {
      throw ConfigError("--param " + name + ": " + e.what());
    }
  }
  return ps;
}

ModelDef resolve_model(const std::string& spec, const ParamSet& overrides) {
  for (const auto& info : builtin_models())
    if (info.name == spec) return make_builtin(spec, overrides);
  if (fs::exists(spec)) return load_model_file(spec, overrides);
  std::string names;
  for (const auto& info : builtin_models()) names += (names.empty() ? "" : ", ") + info.name;
  throw ConfigError("unknown model '" + spec + "' (not a file; registry: " + names + ")");
}

GridSpec parse_grid(const ModelDef& model, const std::string& grid, const std::string& slice) {
  const int n = model.dim();
  GridSpec g;
  g.base = VectorXd::Zero(n);
  std::vector<bool> used(static_cast<std::size_t>(n), false);
  auto claim = [&](int k, const std::string& what) {
    if (used[static_cast<std::size_t>(k)]) throw ConfigError(what + ": x" + std::to_string(k + 1) + " given twice");
    used[static_cast<std::size_t>(k)] = true;
  };
  if (trim(grid).empty()) throw ConfigError("--grid is empty");
  for (const auto& item : split(grid, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ConfigError("--grid: expected xK=lo:hi:count, got '" + item + "'");
    GridAxis ax;
    ax.index = parse_coordinate(item.substr(0, eq), n, "--grid");
    claim(ax.index, "--grid");
    const auto r = split(item.substr(eq + 1), ':');
    if (r.size() != 3) throw ConfigError("--grid: expected xK=lo:hi:count, got '" + item + "'");
    ax.lo = parse_number(r[0], "--grid");
    ax.hi = parse_number(r[1], "--grid");
    const double count = parse_number(r[2], "--grid");
    if (count < 2 || count != std::floor(count) || count > 1e6)
      throw ConfigError("--grid: count must be an integer >= 2, got '" + trim(r[2]) + "'");
    if (!(ax.hi > ax.lo)) throw ConfigError("--grid: empty range for x" + std::to_string(ax.index + 1));
    ax.count = static_cast<int>(count);
    g.axes.push_back(ax);
  }

  std::vector<int> fp_coords;
  if (!trim(slice).empty()) {
    for (const auto& item : split(slice, ',')) {
      const auto eq = item.find('=');
      if (eq == std::string::npos) throw ConfigError("--slice: expected xK=value or xK=fp, got '" + item + "'");
      const int k = parse_coordinate(item.substr(0, eq), n, "--slice");
      claim(k, "--slice");
      const std::string v = trim(item.substr(eq + 1));
      if (v == "fp")
        fp_coords.push_back(k);
      else
        g.base[k] = parse_number(v, "--slice");
    }
  }
  if (!fp_coords.empty()) {
    VectorXd centre = g.base;
    for (const auto& ax : g.axes) centre[ax.index] = 0.5 * (ax.lo + ax.hi);
    const auto fps = fixed_points(model);
    if (fps.empty()) throw ConfigError("--slice uses fp but the model has no fixed points");
    const FixedPoint* best = &fps.front();
    for (const auto& fp : fps)
      if ((fp.location - centre).norm() < (best->location - centre).norm()) best = &fp;
    for (int k : fp_coords) g.base[k] = best->location[k];
  }
  return g;
}

int effective_threads(int requested) {
  int t = requested > 0 ? requested : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  if (const char* env = std::getenv("FLOWCURV_THREADS")) {
    char* end = nullptr;
    const long cap = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && cap >= 1) t = std::min<long>(t, cap);
  }
  return std::max(1, t);
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app("Flow curvature analysis of autonomous dynamical systems", "flowcurv");
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "help for every command");

  Common common;
  TrajectoryArgs traj;
  std::string grid, slice, display = "auto", policy = "dominant-real";
  bool on_trajectory = false;
  int digits = 6;

  auto* list = app.add_subcommand("list-models", "print the registry names");
  auto* integ = app.add_subcommand("integrate", "integrate a trajectory");
  add_common(integ, common);
  add_trajectory(integ, traj);

  auto* scan = app.add_subcommand("phi-scan", "sample phi, its Lie derivative and the cofactor residual");
  add_common(scan, common);
  add_trajectory(scan, traj);
  scan->add_option("--grid", grid, "xK=lo:hi:count,... (omit to scan a trajectory)");
  scan->add_option("--slice", slice, "xK=value or xK=fp for coordinates off the grid");

  auto* mani = app.add_subcommand("manifold", "zero set of phi on a grid or along a trajectory");
  add_common(mani, common);
  add_trajectory(mani, traj);
  mani->add_option("--grid", grid, "xK=lo:hi:count,... over 2 or 3 coordinates");
  mani->add_option("--slice", slice, "xK=value or xK=fp for coordinates off the grid");
  mani->add_flag("--trajectory", on_trajectory, "locate crossings along a trajectory instead of a grid");

  auto* hyper = app.add_subcommand("hyperplane", "tangent linear system planes at the fixed points");
  add_common(hyper, common);
  hyper->add_option("--display", display, "auto, canonical, lambda or unit:xK");
  hyper->add_option("--policy", policy, "complex fast eigenvalue handling")
      ->check(CLI::IsMember({"dominant-real", "strict"}));
  hyper->add_option("--digits", digits, "significant digits of printed equations")->check(CLI::Range(1, 17));

  auto* curv = app.add_subcommand("curvature", "curvatures along a trajectory");
  add_common(curv, common);
  add_trajectory(curv, traj);

  auto* ver = app.add_subcommand("verify", "residual suites with a pass/fail table");
  add_common(ver, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (list->parsed()) {
      for (const auto& info : builtin_models()) out << info.name << '\n';
      return kExitOk;
    }

    const ModelDef model = resolve_model(common.model, parse_params(common.params));
    const int n = model.dim();
    const int threads = effective_threads(common.threads);

    if (integ->parsed()) {
      const Trajectory t = run_trajectory(model, traj);
      Table table;
      table.columns = {"t"};
      for (const auto& c : state_columns(n)) table.columns.push_back(c);
      table.columns.push_back("region");
      for (std::size_t i = 0; i < t.size(); ++i) {
        std::vector<Cell> row{t.times[i]};
        for (int k = 0; k < n; ++k) row.emplace_back(t.states[i][k]);
        row.emplace_back(region_code(t.regions[i]));
        table.add_row(std::move(row));
      }
      emit(table, common.format, common.output, out);
      return kExitOk;
    }

    if (scan->parsed()) {
      std::vector<VectorXd> points;
      std::optional<Trajectory> t;
      if (!grid.empty()) {
        if (!traj.x0.empty() || traj.t_end) throw ConfigError("phi-scan takes either --grid or --x0/--t-end");
        points = grid_nodes(parse_grid(model, grid, slice));
      } else {
        if (!slice.empty()) throw ConfigError("--slice needs --grid");
        t = run_trajectory(model, traj);
        points = t->states;
      }
      const auto samples = sample_points(model, points, threads);
      Table table;
      table.columns = state_columns(n);
      if (t) table.columns.insert(table.columns.begin(), "t");
      for (const char* c : {"phi", "lie", "cofactor_residual"}) table.columns.emplace_back(c);
      for (std::size_t i = 0; i < samples.size(); ++i) {
        std::vector<Cell> row;
        if (t) row.emplace_back(t->times[i]);
        for (int k = 0; k < n; ++k) row.emplace_back(samples[i].point[k]);
        row.emplace_back(samples[i].phi);
        row.emplace_back(samples[i].lie);
        row.emplace_back(samples[i].cofactor_residual);
        table.add_row(std::move(row));
      }
      emit(table, common.format, common.output, out);
      return kExitOk;
    }

    if (mani->parsed()) {
      ZeroSet zs;
      std::optional<Trajectory> t;
      if (on_trajectory) {
        if (!grid.empty() || !slice.empty()) throw ConfigError("--trajectory cannot be combined with --grid/--slice");
        t = run_trajectory(model, traj);
        zs = zero_crossings_on_trajectory(model, *t);
      } else {
        if (grid.empty()) throw ConfigError("manifold needs --grid or --trajectory");
        if (!traj.x0.empty() || traj.t_end) throw ConfigError("--x0/--t-end need --trajectory");
        const GridSpec g = parse_grid(model, grid, slice);
        if (g.axes.size() < 2 || g.axes.size() > 3) throw ConfigError("--grid must name 2 or 3 coordinates");
        zs = zero_set_grid(model, g, threads);
      }
      Table table;
      table.columns = state_columns(n);
      for (const char* c : {"phi", "region"}) table.columns.emplace_back(c);
      for (const auto& p : zs.points) {
        std::vector<Cell> row;
        for (int k = 0; k < n; ++k) row.emplace_back(p.point[k]);
        row.emplace_back(p.phi);
        row.emplace_back(region_code(p.region));
        table.add_row(std::move(row));
      }
      emit(table, common.format, common.output, out);
      for (const auto& w : zs.warnings) err << "warning: " << w << '\n';
      if (zs.degenerate) err << "warning: phi vanishes identically along the trajectory\n";
      if (zs.nonfinite_nodes) err << "warning: " << zs.nonfinite_nodes << " grid nodes with non-finite phi\n";
      return kExitOk;
    }

    if (hyper->parsed()) {
      const PlaneDisplay disp = parse_display(display, n);
      const FastPolicy pol = policy == "strict" ? FastPolicy::Strict : FastPolicy::DominantReal;
      const auto fps = fixed_points(model, {.include_virtual = true});
      if (fps.empty()) throw NumericalError("model has no fixed points");
      Table table;
      for (int i = 1; i <= n; ++i) table.columns.push_back("c" + std::to_string(i));
      table.columns.emplace_back("offset");
      std::ostringstream text;
      int k = 0;
      for (const auto& fp : fps) {
        const Hyperplane plane = tls_hyperplane(model, fp, pol);
        const VectorXd c = scaled_coefficients(plane, disp);
        std::vector<Cell> row;
        for (Eigen::Index i = 0; i <= n; ++i) row.emplace_back(c[i]);
        table.add_row(std::move(row));
        text << "fixed point " << ++k << ": " << format_state(fp.location);
        if (model.piecewise()) text << "  region " << region_label(model, fp.region);
        if (!fp.admissible) text << "  (virtual)";
        text << "\n  lambda = " << plane.lambda;
        if (plane.fast_pair_complex) {
          const Spectrum sp = spectrum_at(model, fp.location, fp.region);
          text << "  (fast pair " << sp.eigenvalues[0].real() << " +- " << std::abs(sp.eigenvalues[0].imag())
               << "i is complex; plane of the dominant real eigenvalue)";
        }
        text << "\n  " << plane_equation(plane, disp, digits) << '\n';
      }
      if (common.output.empty() && common.format == "json") {
        emit(table, common.format, common.output, out);
      } else {
        out << text.str();
        if (!common.output.empty()) emit(table, common.format, common.output, out);
      }
      return kExitOk;
    }

    if (curv->parsed()) {
      const Trajectory t = run_trajectory(model, traj);
      Table table;
      table.columns = {"t"};
      for (int i = 1; i < n; ++i) table.columns.push_back("kappa" + std::to_string(i));
      if (n == 3) table.columns.emplace_back("torsion");
      std::vector<CurvatureSet> sets(t.size());
      std::vector<std::string> failures(t.size());
      parallel_for(t.size(), threads, [&](std::size_t i) {
        try {
          StackOptions opt;
          opt.region = t.regions[i];
          sets[i] = curvatures(derivative_stack_l(model, t.states[i], n, opt));
        } catch (const std::domain_error& e) {
          failures[i] = e.what();
        }
      });
      for (std::size_t i = 0; i < t.size(); ++i) {
        std::vector<Cell> row{t.times[i]};
        const double nan = std::numeric_limits<double>::quiet_NaN();
        for (int k = 0; k < n - 1; ++k)
          row.emplace_back(failures[i].empty() ? sets[i].kappa[static_cast<std::size_t>(k)] : nan);
        if (n == 3) row.emplace_back(failures[i].empty() && sets[i].torsion ? *sets[i].torsion : nan);
        table.add_row(std::move(row));
      }
      emit(table, common.format, common.output, out);
      const auto bad = std::count_if(failures.begin(), failures.end(), [](const auto& s) { return !s.empty(); });
      if (bad) err << "warning: " << bad << " samples with zero velocity (curvature undefined)\n";
      return kExitOk;
    }

    if (ver->parsed()) {
      VerifyOptions vo;
      vo.threads = threads;
      const VerifyReport report = verify_model(model, vo);
      const Table table = report.table();
      if (common.output.empty() && common.format == "csv") {
        std::size_t w = 5;
        for (const auto& r : report.rows) w = std::max(w, r.check.size());
        for (const auto& r : report.rows) {
          char buf[64];
          std::snprintf(buf, sizeof buf, "%-10.3e %s %-9.3g", r.value, r.lower_bound ? ">=" : "<=", r.bound);
          out << (r.passed ? "pass  " : "FAIL  ") << r.check << std::string(w - r.check.size() + 2, ' ') << buf
              << "  " << r.note << '\n';
        }
        out << (report.passed() ? "all checks passed" : "some checks FAILED") << '\n';
      } else {
        emit(table, common.format, common.output, out);
      }
      return report.passed() ? kExitOk : kExitNumerical;
    }
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  }
  return kExitConfig;
}

}  // namespace flowcurv::cli
