#include "clv/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"

#include "clv/config.hpp"
#include "clv/error.hpp"
#include "clv/experiment.hpp"
#include "clv/systems.hpp"

namespace clv {

namespace {

struct Options {
  std::string config;
  std::vector<std::string> dirs;
  std::string svg;
  std::string system;
  std::string formula;
  std::vector<double> theta;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::size_t jobs = 1;
  bool quiet = false;
  std::optional<double> t_final;
  std::optional<double> step;
};

int cmd_run(const Options& o, std::ostream& out, std::ostream& err) {
  ExperimentConfig cfg = load_config(o.config);
  if (o.seed) cfg.seed = *o.seed;
  if (!o.out.empty()) cfg.output = o.out;
  cfg.jobs = std::max<std::size_t>(1, o.jobs);
  cfg.validate();

  ExperimentResult result = run_experiment(cfg);
  write_bundle(result, cfg.output);
  if (o.quiet) return kExitOk;

  err << "ground truth: " << result.truth.size() << " points, " << result.truth.unsafe_count()
      << " unsafe" << (result.truth_stats.cache_hit ? " (cache)" : "") << '\n';
  const auto& first = result.replicates.front().records;
  double final_total = 0.0;
  for (const auto& r : result.replicates) final_total += r.records.back().error.total;
  final_total /= static_cast<double>(result.replicates.size());
  out << cfg.name << ": " << to_string(cfg.sampler.mode) << ", " << result.replicates.size()
      << " replicate(s), " << first.size() - 1 << " iterations, |L| = " << first.back().labeled
      << '\n';
  out << "mean final true error " << std::setprecision(4) << final_total * 100.0 << "%\n";
  out << "wrote " << cfg.output << '\n';
  return kExitOk;
}

int cmd_compare(const Options& o, std::ostream& out) {
  std::vector<ResultTable> tables;
  for (const auto& d : o.dirs) tables.push_back(read_results(d));
  const std::string merged = compare_tables(tables);
  if (o.out.empty()) {
    out << merged;
  } else {
    std::ofstream f(o.out, std::ios::binary);
    if (!f) throw Error("cannot write " + o.out);
    f << merged;
  }
  if (!o.svg.empty()) {
    std::ofstream f(o.svg, std::ios::binary);
    if (!f) throw Error("cannot write " + o.svg);
    f << render_svg(tables);
  }
  return kExitOk;
}

int cmd_label(const Options& o, std::ostream& out) {
  const auto system = make_system(o.system);
  const auto formula = mtl::resolve(o.formula);
  if (o.theta.size() != system->param_dim()) {
    throw DimensionMismatch(system->name() + " expects " + std::to_string(system->param_dim()) +
                            " parameters, got " + std::to_string(o.theta.size()));
  }
  IntegratorConfig cfg;
  cfg.t_final = o.system == "vdp" ? 30.0 : 40.0;
  if (o.t_final) cfg.t_final = *o.t_final;
  if (o.step) cfg.step_h = *o.step;
  const Trajectory traj = simulate(*system, o.theta, cfg);
  const Label y = mtl::label(formula, traj);
  if (o.quiet) {
    out << (y == Label::Safe ? "+1" : "-1") << '\n';
    return kExitOk;
  }
  out << (y == Label::Safe ? "+1 safe" : "-1 unsafe");
  if (traj.diverged()) out << " (diverged)";
  out << '\n';
  out << "diverged " << (traj.diverged() ? "true" : "false") << '\n';
  for (const auto& name : mtl::channels(formula)) {
    const auto col = traj.channel(name);
    const auto [lo, hi] = std::minmax_element(col.begin(), col.end());
    out << name << " min " << *lo << " max " << *hi << '\n';
  }
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Statistical closed-loop verification with active learning", "clverify"};
  app.require_subcommand(1);
  Options o;
  app.add_option("--seed", o.seed, "override the master seed");
  app.add_option("--jobs", o.jobs, "concurrent simulations")->check(CLI::PositiveNumber);
  app.add_flag("--quiet", o.quiet, "data only on stdout, no diagnostics");
  app.add_option("--out", o.out, "output directory (run) or file (compare)");

  auto* run = app.add_subcommand("run", "run an experiment config");
  run->add_option("config", o.config)->required();
  run->fallthrough();

  auto* compare = app.add_subcommand("compare", "merge results of run directories");
  compare->add_option("dirs", o.dirs)->required();
  compare->add_option("--svg", o.svg, "also write an SVG chart");
  compare->fallthrough();

  auto* label = app.add_subcommand("label", "simulate and label one parameter point");
  label->add_option("system", o.system)->required();
  label->add_option("formula", o.formula)->required();
  label->add_option("theta", o.theta)->required();
  label->add_option("--t-final", o.t_final, "simulation horizon");
  label->add_option("--step", o.step, "integration step");
  label->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "clverify: " << e.what() << '\n';
    return kExitConfig;
  }

  try {
    if (*run) return cmd_run(o, out, err);
    if (*compare) return cmd_compare(o, out);
    return cmd_label(o, out);
  } catch (const ConfigError& e) {
    err << "clverify: config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "clverify: " << e.what() << '\n';
    return kExitRuntime;
  }
}

}  // namespace clv
