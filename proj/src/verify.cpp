#include "clv/verify.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include "clv/error.hpp"
#include "clv/rng.hpp"

namespace clv {

Label label_point(const SystemModel& system, const mtl::Formula& formula,
                  std::span<const double> theta, const IntegratorConfig& cfg) {
  return mtl::label(formula, simulate(system, theta, cfg));
}

std::size_t GroundTruth::unsafe_count() const {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), Label::Unsafe));
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex_key(std::uint64_t key) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, key);
  return buf;
}

template <typename T>
T read_field(std::istream& is, const char* name) {
  std::string tag;
  T value{};
  if (!(is >> tag) || tag != name || !(is >> value)) {
    throw ParseError(std::string("ground truth: expected field '") + name + "'");
  }
  return value;
}

}  // namespace

std::uint64_t ground_truth_key(const SystemModel& system, const mtl::Formula& formula,
                               const GridSpec& grid, const IntegratorConfig& cfg) {
  std::string s = system.fingerprint();
  s += '|';
  s += mtl::to_string(formula);
  s += '|';
  for (const auto& a : grid.axes) s += fmt(a.min) + ',' + fmt(a.max) + ',' + std::to_string(a.count) + ';';
  s += '|' + fmt(cfg.step_h) + ',' + fmt(cfg.t_final) + ',' + fmt(cfg.divergence_radius);
  return fnv1a(s);
}

void save_ground_truth(std::ostream& os, const GroundTruth& gt) {
  os << "clv-ground-truth v1\n";
  os << "key " << hex_key(gt.key) << '\n';
  os << "axes " << gt.grid.axes.size() << '\n';
  for (const auto& a : gt.grid.axes) os << fmt(a.min) << ' ' << fmt(a.max) << ' ' << a.count << '\n';
  os << "labels " << gt.labels.size() << '\n';
  for (std::size_t i = 0; i < gt.labels.size(); ++i) {
    os << (gt.labels[i] == Label::Safe ? '+' : '-');
    if ((i + 1) % 100 == 0 || i + 1 == gt.labels.size()) os << '\n';
  }
}

GroundTruth load_ground_truth(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != "clv-ground-truth v1") {
    throw ParseError("ground truth: bad header");
  }
  GroundTruth gt;
  const auto key = read_field<std::string>(is, "key");
  try {
    gt.key = std::stoull(key, nullptr, 16);
  } catch (const std::exception&) {
    throw ParseError("ground truth: bad key '" + key + "'");
  }
  const auto axes = read_field<std::size_t>(is, "axes");
  for (std::size_t d = 0; d < axes; ++d) {
    GridAxis a;
    if (!(is >> a.min >> a.max >> a.count)) throw ParseError("ground truth: bad axis line");
    gt.grid.axes.push_back(a);
  }
  const auto n = read_field<std::size_t>(is, "labels");
  gt.labels.reserve(n);
  char c = 0;
  while (gt.labels.size() < n && is >> c) {
    if (c == '+') {
      gt.labels.push_back(Label::Safe);
    } else if (c == '-') {
      gt.labels.push_back(Label::Unsafe);
    } else {
      throw ParseError(std::string("ground truth: bad label character '") + c + "'");
    }
  }
  if (gt.labels.size() != n) throw ParseError("ground truth: truncated label array");
  return gt;
}

GroundTruth ground_truth(const SystemModel& system, const mtl::Formula& formula,
                         const GridSpec& grid, const IntegratorConfig& cfg,
                         const GroundTruthOptions& opts, GroundTruthStats* stats) {
  GroundTruth gt;
  gt.key = ground_truth_key(system, formula, grid, cfg);
  gt.grid = grid;
  namespace fs = std::filesystem;
  fs::path cache_file;
  if (!opts.cache_dir.empty()) {
    cache_file = fs::path(opts.cache_dir) / ("gt-" + hex_key(gt.key) + ".txt");
    std::ifstream in(cache_file);
    if (in) {
      GroundTruth cached = load_ground_truth(in);
      if (cached.key == gt.key && cached.grid == grid && cached.size() == grid.total()) {
        if (stats) *stats = {0, true};
        return cached;
      }
    }
  }

  const PointSet points = build_grid(grid);
  const std::size_t n = points.size();
  gt.labels.assign(n, Label::Unsafe);
  const std::size_t workers = std::max<std::size_t>(1, std::min(opts.jobs, n));
  auto work = [&](std::size_t w) {
    for (std::size_t i = w; i < n; i += workers) {
      gt.labels[i] = label_point(system, formula, points[i], cfg);
    }
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          work(w);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  if (stats) *stats = {n, false};

  if (!cache_file.empty()) {
    fs::create_directories(cache_file.parent_path());
    const fs::path tmp = cache_file.string() + ".tmp";
    {
      std::ofstream out(tmp);
      save_ground_truth(out, gt);
    }
    fs::rename(tmp, cache_file);
  }
  return gt;
}

ErrorRates true_error(const SvmModel& model, const PointSet& grid, std::span<const Label> truth) {
  if (grid.size() != truth.size()) {
    throw DimensionMismatch("grid has " + std::to_string(grid.size()) + " points, truth has " +
                            std::to_string(truth.size()));
  }
  ErrorRates r;
  r.points = grid.size();
  for (std::size_t i = 0; i < r.points; ++i) {
    const Label p = predict(model, grid[i]);
    if (p == truth[i]) continue;
    ++r.wrong;
    if (truth[i] == Label::Unsafe) {
      ++r.unsafe_wrong;
    } else {
      ++r.safe_wrong;
    }
  }
  if (r.points > 0) {
    const double n = static_cast<double>(r.points);
    r.total = static_cast<double>(r.wrong) / n;
    r.unsafe = static_cast<double>(r.unsafe_wrong) / n;
    r.safe = static_cast<double>(r.safe_wrong) / n;
  }
  return r;
}

std::vector<std::vector<std::size_t>> kfold_partition(std::size_t n, std::size_t k,
                                                      std::uint64_t seed) {
  if (k < 2 || n < k) {
    throw TooFewPoints("k-fold needs 2 <= k <= n (k=" + std::to_string(k) +
                       ", n=" + std::to_string(n) + ")");
  }
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);
  std::vector<std::vector<std::size_t>> folds(k);
  for (std::size_t f = 0; f < k; ++f) {
    folds[f].assign(order.begin() + static_cast<std::ptrdiff_t>(f * n / k),
                    order.begin() + static_cast<std::ptrdiff_t>((f + 1) * n / k));
  }
  return folds;
}

double kfold_error(const TrainingSet& data, std::size_t k, const SvmConfig& cfg,
                   std::uint64_t seed) {
  const auto folds = kfold_partition(data.size(), k, seed);
  std::vector<char> held(data.size());
  double sum = 0.0;
  for (const auto& fold : folds) {
    std::fill(held.begin(), held.end(), 0);
    for (std::size_t i : fold) held[i] = 1;
    TrainingSet train_part(data.points.dim());
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (!held[i]) train_part.add(data.points[i], data.labels[i]);
    }
    const SvmModel m = train(train_part, cfg);
    std::size_t wrong = 0;
    for (std::size_t i : fold) wrong += predict(m, data.points[i]) != data.labels[i];
    sum += static_cast<double>(wrong) / static_cast<double>(fold.size());
  }
  return sum / static_cast<double>(folds.size());
}

double independent_validation_error(const SvmModel& model, const TrainingSet& holdout) {
  if (holdout.size() == 0) throw ValueUndefined("validation error of an empty holdout set");
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < holdout.size(); ++i) {
    wrong += predict(model, holdout.points[i]) != holdout.labels[i];
  }
  return static_cast<double>(wrong) / static_cast<double>(holdout.size());
}

double PlattModel::probability(double h) const {
  const double z = a * h + b;
  // Stable logistic for either sign of z.
  if (z >= 0.0) {
    const double e = std::exp(-z);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(z));
}

PlattModel platt_fit(std::span<const double> decisions, std::span<const Label> labels) {
  if (decisions.size() != labels.size()) {
    throw DimensionMismatch("platt: decisions and labels differ in length");
  }
  const std::size_t n = decisions.size();
  double n_pos = 0.0;
  for (Label y : labels) n_pos += y == Label::Safe;
  const double n_neg = static_cast<double>(n) - n_pos;
  if (n_pos == 0.0 || n_neg == 0.0) throw SingleClassData("platt scaling needs both classes");

  const double hi = (n_pos + 1.0) / (n_pos + 2.0);
  const double lo = 1.0 / (n_neg + 2.0);
  std::vector<double> target(n);
  for (std::size_t i = 0; i < n; ++i) target[i] = labels[i] == Label::Safe ? hi : lo;

  constexpr std::size_t kMaxIter = 100;
  constexpr double kMinStep = 1e-10;
  constexpr double kSigma = 1e-12;
  constexpr double kTol = 1e-10;

  auto objective = [&](double a, double b) {
    double f = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double z = decisions[i] * a + b;
      if (z >= 0.0) {
        f += target[i] * z + std::log1p(std::exp(-z));
      } else {
        f += (target[i] - 1.0) * z + std::log1p(std::exp(z));
      }
    }
    return f;
  };

  PlattModel m;
  m.a = 0.0;
  m.b = std::log((n_neg + 1.0) / (n_pos + 1.0));
  double fval = objective(m.a, m.b);
  for (; m.iterations < kMaxIter; ++m.iterations) {
    double h11 = kSigma, h22 = kSigma, h21 = 0.0, g1 = 0.0, g2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double f = decisions[i];
      const double z = f * m.a + m.b;
      double p, q;
      if (z >= 0.0) {
        const double e = std::exp(-z);
        p = e / (1.0 + e);
        q = 1.0 / (1.0 + e);
      } else {
        const double e = std::exp(z);
        p = 1.0 / (1.0 + e);
        q = e / (1.0 + e);
      }
      const double d2 = p * q;
      h11 += f * f * d2;
      h22 += d2;
      h21 += f * d2;
      const double d1 = target[i] - p;
      g1 += f * d1;
      g2 += d1;
    }
    if (std::abs(g1) < kTol && std::abs(g2) < kTol) break;
    const double det = h11 * h22 - h21 * h21;
    const double da = -(h22 * g1 - h21 * g2) / det;
    const double db = -(-h21 * g1 + h11 * g2) / det;
    const double gd = g1 * da + g2 * db;
    double step = 1.0;
    bool moved = false;
    while (step >= kMinStep) {
      const double na = m.a + step * da;
      const double nb = m.b + step * db;
      const double nf = objective(na, nb);
      if (nf < fval + 1e-4 * step * gd) {
        m.a = na;
        m.b = nb;
        fval = nf;
        moved = true;
        break;
      }
      step /= 2.0;
    }
    if (!moved) break;
  }
  return m;
}

PlattModel platt_scale(const SvmModel& model, const TrainingSet& calib) {
  std::vector<double> h(calib.size());
  for (std::size_t i = 0; i < calib.size(); ++i) h[i] = decision(model, calib.points[i]);
  return platt_fit(h, calib.labels);
}

CurveStats aggregate_curves(const std::vector<std::vector<double>>& curves) {
  if (curves.empty()) throw InvalidArgument("no curves to aggregate");
  const std::size_t len = curves.front().size();
  for (const auto& c : curves) {
    if (c.size() != len) {
      throw IncompatibleRuns("curve lengths differ: " + std::to_string(len) + " vs " +
                             std::to_string(c.size()));
    }
  }
  CurveStats s;
  s.mean.assign(len, 0.0);
  s.sigma.assign(len, 0.0);
  const double n = static_cast<double>(curves.size());
  for (std::size_t i = 0; i < len; ++i) {
    double sum = 0.0;
    for (const auto& c : curves) sum += c[i];
    const double mean = sum / n;
    double ss = 0.0;
    for (const auto& c : curves) ss += (c[i] - mean) * (c[i] - mean);
    s.mean[i] = mean;
    s.sigma[i] = curves.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  }
  return s;
}

std::vector<std::uint64_t> replicate_seeds(std::uint64_t master, std::size_t n) {
  if (n < 2) throw InvalidArgument("replicate needs at least 2 seeds");
  std::vector<std::uint64_t> seeds;
  std::set<std::uint64_t> seen;
  for (std::uint64_t stream = 0; seeds.size() < n; ++stream) {
    const std::uint64_t s = derive_seed(master, stream);
    if (seen.insert(s).second) seeds.push_back(s);
  }
  return seeds;
}

void check_replicate_seeds(std::span<const std::uint64_t> seeds) {
  if (seeds.size() < 2) throw InvalidArgument("replicate needs at least 2 seeds");
  std::set<std::uint64_t> seen(seeds.begin(), seeds.end());
  if (seen.size() != seeds.size()) throw InvalidArgument("replicate seeds must be distinct");
}

}  // namespace clv
