#include "clv/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "json.hpp"

#include "clv/config.hpp"
#include "clv/error.hpp"
#include "clv/rng.hpp"
#include "clv/systems.hpp"

namespace clv {

const char* to_string(SamplerMode mode) {
  switch (mode) {
    case SamplerMode::Batch:
      return "batch";
    case SamplerMode::Sequential:
      return "sequential";
    case SamplerMode::Passive:
      return "passive";
  }
  return "?";
}

std::size_t ExperimentConfig::iterations() const {
  const std::size_t extra = sampler.total - sampler.initial;
  if (sampler.mode == SamplerMode::Sequential) return extra;
  return extra / sampler.batch_size;
}

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& msg) {
    throw ConfigError("field '" + field + "': " + msg);
  };
  std::unique_ptr<SystemModel> sys;
  try {
    sys = make_system(system, gains);
  } catch (const Error& e) {
    fail("system", e.what());
  }
  try {
    mtl::resolve(formula, reading);
  } catch (const Error& e) {
    fail("formula", e.what());
  }
  try {
    grid.validate();
  } catch (const Error& e) {
    fail("grid", e.what());
  }
  if (grid.dim() != sys->param_dim()) {
    fail("grid", "system '" + system + "' has " + std::to_string(sys->param_dim()) +
                     " parameters but the grid has " + std::to_string(grid.dim()) + " axes");
  }
  std::size_t points = 0;
  try {
    points = grid.total();
  } catch (const Error& e) {
    fail("grid", e.what());
  }
  try {
    integrator.validate();
  } catch (const Error& e) {
    fail("integrator", e.what());
  }
  if (sampler.initial < 1) fail("sampler.initial", "must be >= 1");
  if (sampler.total < sampler.initial) fail("sampler.total", "must be >= sampler.initial");
  if (sampler.total > points) fail("sampler.total", "exceeds the number of grid points");
  if (sampler.mode != SamplerMode::Sequential) {
    if (sampler.batch_size < 1) fail("sampler.batch_size", "must be >= 1");
    if ((sampler.total - sampler.initial) % sampler.batch_size != 0) {
      fail("sampler.batch_size", "must divide sampler.total - sampler.initial");
    }
  }
  if (!(sampler.lambda >= 0.0 && sampler.lambda < 1.0)) fail("sampler.lambda", "must lie in [0, 1)");
  if (!(svm.gamma > 0.0)) fail("svm.gamma", "must be > 0");
  if (!(svm.cost.c_fn > 0.0)) fail("svm.c_fn", "must be > 0");
  if (!(svm.cost.c_fp > 0.0)) fail("svm.c_fp", "must be > 0");
  for (std::size_t i = 0; i < post_costs.size(); ++i) {
    if (!(post_costs[i].c_fn > 0.0 && post_costs[i].c_fp > 0.0)) {
      fail("post_costs[" + std::to_string(i) + "]", "costs must be > 0");
    }
  }
  if (replicates < 1) fail("replicates", "must be >= 1");
  if (estimators.kfold && estimators.k < 2) fail("estimators.k", "must be >= 2");
  if (output.empty()) fail("output", "must not be empty");
}

std::vector<std::uint64_t> experiment_seeds(const ExperimentConfig& cfg) {
  if (cfg.replicates == 1) return {cfg.seed};
  return replicate_seeds(cfg.seed, cfg.replicates);
}

ExperimentSetup prepare_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  ExperimentSetup s;
  s.system = make_system(cfg.system, cfg.gains);
  s.formula = mtl::resolve(cfg.formula, cfg.reading);
  s.grid = build_grid(cfg.grid);
  GroundTruthOptions opts;
  opts.cache_dir = cfg.cache_dir;
  opts.jobs = cfg.jobs;
  s.truth = ground_truth(*s.system, s.formula, cfg.grid, cfg.integrator, opts, &s.truth_stats);
  return s;
}

namespace {

// Labels by ground-truth lookup; the labels are those simulation would
// produce, since simulate() is deterministic.
class LabelSource {
 public:
  LabelSource(const ExperimentConfig& cfg, const ExperimentSetup& setup)
      : cfg_(cfg), setup_(setup) {}

  Label operator()(std::size_t idx) {
    if (!setup_.truth.labels.empty()) return setup_.truth.labels[idx];
    {
      std::lock_guard<std::mutex> lock(mu_);
      auto it = memo_.find(idx);
      if (it != memo_.end()) return it->second;
    }
    const Label y = label_point(*setup_.system, setup_.formula, setup_.grid[idx], cfg_.integrator);
    std::lock_guard<std::mutex> lock(mu_);
    memo_[idx] = y;
    return y;
  }

 private:
  const ExperimentConfig& cfg_;
  const ExperimentSetup& setup_;
  std::mutex mu_;
  std::map<std::size_t, Label> memo_;
};

}  // namespace

ReplicateRun run_replicate(const ExperimentConfig& cfg, const ExperimentSetup& setup,
                           std::uint64_t seed) {
  const auto start = std::chrono::steady_clock::now();
  ReplicateRun rep;
  rep.seed = seed;
  LabelSource labels(cfg, setup);
  const bool has_truth = !setup.truth.labels.empty();

  Rng rng(derive_seed(seed, 1));
  CandidatePool pool(setup.grid.size());
  const auto initial = random_initial(pool, cfg.sampler.initial, rng);
  ActiveContext ctx{setup.grid, [&labels](std::size_t i) { return labels(i); }, cfg.svm, 1};
  rep.run = initialize_run(ctx, initial, pool);

  // Validation candidates: a fixed random order of the grid; each
  // iteration takes the first |L| indices still unlabeled.
  std::vector<std::size_t> val_order;
  if (cfg.estimators.validation) {
    val_order.resize(setup.grid.size());
    for (std::size_t i = 0; i < val_order.size(); ++i) val_order[i] = i;
    Rng vrng(derive_seed(seed, 2));
    vrng.shuffle(val_order);
  }

  auto record = [&](std::size_t iteration) {
    IterationRecord r;
    r.iteration = iteration;
    r.labeled = rep.run.data.size();
    r.retrains = rep.run.retrains;
    r.retrain_seconds = rep.run.retrain_seconds;
    if (has_truth) {
      r.error = true_error(rep.run.model, setup.grid, setup.truth.labels);
    } else {
      r.error.total = r.error.unsafe = r.error.safe = kNotComputed;
    }
    if (cfg.estimators.kfold && r.labeled >= cfg.estimators.k) {
      r.kfold = kfold_error(rep.run.data, cfg.estimators.k, cfg.svm, derive_seed(seed, 3 + iteration));
    }
    if (cfg.estimators.validation) {
      TrainingSet holdout(setup.grid.dim());
      for (std::size_t idx : val_order) {
        if (holdout.size() == r.labeled) break;
        if (pool.contains(idx)) holdout.add(setup.grid[idx], labels(idx));
      }
      if (holdout.size() > 0) r.validation = independent_validation_error(rep.run.model, holdout);
    }
    rep.records.push_back(r);
  };

  record(0);
  const std::size_t iterations = cfg.iterations();
  for (std::size_t it = 1; it <= iterations; ++it) {
    switch (cfg.sampler.mode) {
      case SamplerMode::Batch:
        run_batch(ctx, rep.run, pool, 1, cfg.sampler.batch_size, cfg.sampler.lambda, rng);
        break;
      case SamplerMode::Sequential:
        run_sequential(ctx, rep.run, pool, 1, rng);
        break;
      case SamplerMode::Passive:
        run_passive(ctx, rep.run, pool, 1, cfg.sampler.batch_size, rng);
        break;
    }
    record(it);
  }

  for (const auto& cost : cfg.post_costs) {
    SvmConfig c = cfg.svm;
    c.cost = cost;
    const SvmModel m = train(rep.run.data, c);
    PostCostResult p;
    p.cost = cost;
    if (has_truth) {
      p.error = true_error(m, setup.grid, setup.truth.labels);
    } else {
      p.error.total = p.error.unsafe = p.error.safe = kNotComputed;
    }
    rep.post.push_back(p);
  }
  rep.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rep;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  ExperimentSetup setup = prepare_experiment(cfg);
  ExperimentResult result;
  result.config = cfg;
  const auto seeds = experiment_seeds(cfg);
  result.replicates.resize(seeds.size());
  const std::size_t workers = std::max<std::size_t>(1, std::min(cfg.jobs, seeds.size()));
  if (workers == 1) {
    for (std::size_t r = 0; r < seeds.size(); ++r) {
      result.replicates[r] = run_replicate(cfg, setup, seeds[r]);
    }
  } else {
    std::vector<std::thread> threads;
    std::vector<std::exception_ptr> errors(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      threads.emplace_back([&, w] {
        try {
          for (std::size_t r = w; r < seeds.size(); r += workers) {
            result.replicates[r] = run_replicate(cfg, setup, seeds[r]);
          }
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : threads) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  result.truth = std::move(setup.truth);
  result.truth_stats = setup.truth_stats;
  return result;
}

namespace {

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? kNotComputed : s / static_cast<double>(v.size());
}

}  // namespace

void write_bundle(const ExperimentResult& result, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const auto& reps = result.replicates;
  if (reps.empty()) throw InvalidArgument("no replicates to write");
  const std::size_t rows = reps.front().records.size();

  std::vector<std::vector<double>> totals;
  for (const auto& r : reps) {
    std::vector<double> c;
    for (const auto& rec : r.records) c.push_back(rec.error.total);
    totals.push_back(std::move(c));
  }
  const CurveStats total_stats = aggregate_curves(totals);

  std::ostringstream res;
  res << "# clverify results v1: mean over " << reps.size() << " replicate(s)\n";
  res << "iteration,n_labeled,retrains,total_error,total_sigma,unsafe_error,safe_error,kfold_error,"
         "validation_error\n";
  for (std::size_t i = 0; i < rows; ++i) {
    std::vector<double> unsafe, safe, kfold, val;
    for (const auto& r : reps) {
      unsafe.push_back(r.records[i].error.unsafe);
      safe.push_back(r.records[i].error.safe);
      kfold.push_back(r.records[i].kfold);
      val.push_back(r.records[i].validation);
    }
    const auto& rec = reps.front().records[i];
    res << rec.iteration << ',' << rec.labeled << ',' << rec.retrains << ','
        << num(total_stats.mean[i]) << ',' << num(total_stats.sigma[i]) << ',' << num(mean_of(unsafe))
        << ',' << num(mean_of(safe)) << ',' << num(mean_of(kfold)) << ',' << num(mean_of(val))
        << '\n';
  }
  write_file(dir / "results.csv", res.str());

  std::ostringstream per;
  per << "# clverify replicates v1\n";
  per << "replicate,seed,iteration,n_labeled,retrains,total_error,unsafe_error,safe_error,"
         "kfold_error,validation_error\n";
  for (std::size_t r = 0; r < reps.size(); ++r) {
    for (const auto& rec : reps[r].records) {
      per << r << ',' << reps[r].seed << ',' << rec.iteration << ',' << rec.labeled << ','
          << rec.retrains << ',' << num(rec.error.total) << ',' << num(rec.error.unsafe) << ','
          << num(rec.error.safe) << ',' << num(rec.kfold) << ',' << num(rec.validation) << '\n';
    }
  }
  write_file(dir / "replicates.csv", per.str());

  if (!result.config.post_costs.empty()) {
    std::ostringstream costs;
    costs << "# clverify costs v1: final training set retrained per cost matrix\n";
    costs << "replicate,seed,c_fn,c_fp,total_error,unsafe_error,safe_error\n";
    for (std::size_t r = 0; r < reps.size(); ++r) {
      for (const auto& p : reps[r].post) {
        costs << r << ',' << reps[r].seed << ',' << num(p.cost.c_fn) << ',' << num(p.cost.c_fp)
              << ',' << num(p.error.total) << ',' << num(p.error.unsafe) << ','
              << num(p.error.safe) << '\n';
      }
    }
    write_file(dir / "costs.csv", costs.str());
  }

  // Wall-clock figures vary between runs, so they stay out of the CSV files.
  nlohmann::ordered_json timing = nlohmann::ordered_json::array();
  for (std::size_t r = 0; r < reps.size(); ++r) {
    timing.push_back({{"replicate", r},
                      {"seed", reps[r].seed},
                      {"wall_seconds", reps[r].wall_seconds},
                      {"retrains", reps[r].run.retrains},
                      {"retrain_seconds", reps[r].run.retrain_seconds}});
  }
  write_file(dir / "timing.json", timing.dump(2) + "\n");

  std::ostringstream model;
  save_model(model, reps.front().run.model);
  write_file(dir / "model.txt", model.str());

  nlohmann::ordered_json meta;
  meta["config"] = nlohmann::ordered_json::parse(config_to_json(result.config));
  char key[20];
  std::snprintf(key, sizeof key, "%016llx", static_cast<unsigned long long>(result.truth.key));
  meta["ground_truth"] = {{"key", key},
                          {"points", result.truth.size()},
                          {"unsafe", result.truth.unsafe_count()}};
  nlohmann::ordered_json seeds = nlohmann::ordered_json::array();
  nlohmann::ordered_json calls = nlohmann::ordered_json::array();
  for (const auto& r : reps) {
    seeds.push_back(r.seed);
    calls.push_back(r.run.oracle_calls);
  }
  meta["seeds"] = seeds;
  meta["oracle_calls"] = calls;
  meta["rows"] = rows;
  write_file(dir / "run.json", meta.dump(2) + "\n");
}

ResultTable read_results(const std::filesystem::path& dir) {
  ResultTable t;
  t.family = dir.filename().string();
  if (t.family.empty()) t.family = dir.parent_path().filename().string();
  std::ifstream meta_in(dir / "run.json");
  if (meta_in) {
    try {
      const auto meta = nlohmann::json::parse(meta_in);
      t.family = meta.at("config").at("name").get<std::string>();
    } catch (const std::exception&) {
      // Fall back to the directory name.
    }
  }
  std::ifstream in(dir / "results.csv");
  if (!in) throw IncompatibleRuns("no results.csv in " + dir.string());
  std::string line;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      if (line.rfind("iteration,n_labeled,", 0) != 0) {
        throw IncompatibleRuns("unexpected results header in " + dir.string());
      }
      header = true;
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() < 5) throw IncompatibleRuns("short results row in " + dir.string());
    try {
      t.iteration.push_back(std::stoul(cells[0]));
      t.labeled.push_back(std::stoul(cells[1]));
      t.mean_error.push_back(std::stod(cells[3]));
      t.sigma_error.push_back(std::stod(cells[4]));
    } catch (const std::exception&) {
      throw IncompatibleRuns("malformed results row in " + dir.string() + ": " + line);
    }
  }
  if (!header) throw IncompatibleRuns("empty results.csv in " + dir.string());
  return t;
}

std::string compare_tables(const std::vector<ResultTable>& tables) {
  if (tables.size() < 2) throw IncompatibleRuns("compare needs at least two run directories");
  bool same = true;
  for (const auto& t : tables) same = same && t.iteration.size() == tables.front().iteration.size();
  if (!same) {
    std::string msg = "iteration counts differ:";
    for (const auto& t : tables) msg += " " + t.family + "=" + std::to_string(t.iteration.size());
    throw IncompatibleRuns(msg);
  }
  std::ostringstream os;
  os << "# clverify compare v1\n";
  os << "family,iteration,n_labeled,mean_error,sigma\n";
  for (const auto& t : tables) {
    for (std::size_t i = 0; i < t.iteration.size(); ++i) {
      os << t.family << ',' << t.iteration[i] << ',' << t.labeled[i] << ',' << num(t.mean_error[i])
         << ',' << num(t.sigma_error[i]) << '\n';
    }
  }
  return os.str();
}

std::string render_svg(const std::vector<ResultTable>& tables) {
  constexpr double kW = 640, kH = 400, kLeft = 60, kRight = 160, kTop = 20, kBottom = 50;
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
  double x_max = 1.0, y_max = 0.0;
  for (const auto& t : tables) {
    for (std::size_t i = 0; i < t.iteration.size(); ++i) {
      x_max = std::max(x_max, static_cast<double>(t.iteration[i]));
      if (std::isfinite(t.mean_error[i])) {
        const double s = std::isfinite(t.sigma_error[i]) ? t.sigma_error[i] : 0.0;
        y_max = std::max(y_max, t.mean_error[i] + s);
      }
    }
  }
  if (y_max <= 0.0) y_max = 1.0;
  const double pw = kW - kLeft - kRight, ph = kH - kTop - kBottom;
  auto px = [&](double x) { return kLeft + pw * x / x_max; };
  auto py = [&](double y) { return kTop + ph * (1.0 - y / y_max); };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<line x1=\"" << kLeft << "\" y1=\"" << kTop + ph << "\" x2=\"" << kLeft + pw << "\" y2=\""
     << kTop + ph << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\"" << kTop + ph
     << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double y = y_max * k / 4.0;
    os << "<text x=\"" << kLeft - 6 << "\" y=\"" << num(py(y) + 4) << "\" text-anchor=\"end\">"
       << num(std::round(y * 1e4) / 1e4) << "</text>\n";
    const double x = x_max * k / 4.0;
    os << "<text x=\"" << num(px(x)) << "\" y=\"" << kTop + ph + 16 << "\" text-anchor=\"middle\">"
       << num(std::round(x)) << "</text>\n";
  }
  os << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kH - 10
     << "\" text-anchor=\"middle\">iteration</text>\n";
  os << "<text x=\"14\" y=\"" << kTop + ph / 2 << "\" transform=\"rotate(-90 14 " << kTop + ph / 2
     << ")\" text-anchor=\"middle\">true misclassification error</text>\n";
  for (std::size_t f = 0; f < tables.size(); ++f) {
    const auto& t = tables[f];
    const char* color = kColors[f % (sizeof kColors / sizeof *kColors)];
    std::ostringstream line, band_hi, band_lo;
    for (std::size_t i = 0; i < t.iteration.size(); ++i) {
      if (!std::isfinite(t.mean_error[i])) continue;
      const double x = px(static_cast<double>(t.iteration[i]));
      line << num(x) << ',' << num(py(t.mean_error[i])) << ' ';
    }
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\""
       << line.str() << "\"/>\n";
    const double ly = kTop + 16.0 * static_cast<double>(f + 1);
    os << "<line x1=\"" << kLeft + pw + 10 << "\" y1=\"" << ly - 4 << "\" x2=\"" << kLeft + pw + 30
       << "\" y2=\"" << ly - 4 << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << kLeft + pw + 36 << "\" y=\"" << ly << "\">" << xml_escape(t.family) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace clv
