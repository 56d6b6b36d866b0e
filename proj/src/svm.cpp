#include "clv/svm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>

#include "clv/error.hpp"

namespace clv {

void PointSet::push_back(std::span<const double> p) {
  if (dim_ == 0 && coords_.empty()) dim_ = p.size();
  if (p.size() != dim_) throw DimensionMismatch("point dimension does not match point set");
  coords_.insert(coords_.end(), p.begin(), p.end());
}

namespace {

inline double kernel_unchecked(const double* a, const double* b, std::size_t dim, double inv_g2) {
  double d2 = 0.0;
  for (std::size_t k = 0; k < dim; ++k) {
    const double d = a[k] - b[k];
    d2 += d * d;
  }
  return std::exp(-d2 * inv_g2);
}

bool single_class(const TrainingSet& data) {
  return std::all_of(data.labels.begin(), data.labels.end(),
                     [&](Label y) { return y == data.labels.front(); });
}

}  // namespace

double rbf_kernel(std::span<const double> a, std::span<const double> b, double gamma) {
  if (a.size() != b.size()) throw DimensionMismatch("kernel arguments differ in dimension");
  if (!(gamma > 0.0)) throw InvalidArgument("kernel width must be > 0");
  return kernel_unchecked(a.data(), b.data(), a.size(), 1.0 / (gamma * gamma));
}

double decision(const SvmModel& model, std::span<const double> theta) {
  if (model.support_points.empty()) return model.bias;
  if (theta.size() != model.dim()) throw DimensionMismatch("query dimension does not match model");
  const double inv_g2 = 1.0 / (model.gamma * model.gamma);
  const std::size_t dim = model.dim();
  const double* sv = model.support_points.coords().data();
  double h = 0.0;
  for (std::size_t j = 0; j < model.alphas.size(); ++j) {
    h += model.alphas[j] * to_int(model.support_labels[j]) *
         kernel_unchecked(sv + j * dim, theta.data(), dim, inv_g2);
  }
  return h + model.bias;
}

Label predict(const SvmModel& model, std::span<const double> theta) {
  if (model.constant_label) return *model.constant_label;
  return decision(model, theta) > 0.0 ? Label::Safe : Label::Unsafe;
}

double dual_objective(const TrainingSet& data, std::span<const double> alphas, double gamma) {
  const std::size_t n = data.size();
  double lin = 0.0;
  double quad = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    lin += alphas[i];
    if (alphas[i] == 0.0) continue;
    for (std::size_t j = 0; j < n; ++j) {
      if (alphas[j] == 0.0) continue;
      quad += alphas[i] * alphas[j] * to_int(data.labels[i]) * to_int(data.labels[j]) *
              rbf_kernel(data.points[i], data.points[j], gamma);
    }
  }
  return lin - 0.5 * quad;
}

namespace {

// Dense signed kernel matrix Q_ij = y_i y_j k(x_i, x_j).
std::vector<double> signed_kernel(const TrainingSet& data, double gamma) {
  const std::size_t n = data.size();
  const std::size_t dim = data.points.dim();
  const double inv_g2 = 1.0 / (gamma * gamma);
  const double* x = data.points.coords().data();
  std::vector<double> q(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    q[i * n + i] = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = to_int(data.labels[i]) * to_int(data.labels[j]) *
                       kernel_unchecked(x + i * dim, x + j * dim, dim, inv_g2);
      q[i * n + j] = v;
      q[j * n + i] = v;
    }
  }
  return q;
}

bool warm_start_usable(const TrainingSet& data, const SvmConfig& cfg, std::span<const double> w) {
  if (w.size() != data.size()) return false;
  double balance = 0.0;
  double scale = 1.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double c = cfg.cost.bound(data.labels[i]);
    if (!(w[i] >= 0.0) || w[i] > c) return false;
    balance += w[i] * to_int(data.labels[i]);
    scale = std::max(scale, w[i]);
  }
  return !cfg.equality_constraint || std::abs(balance) <= 1e-9 * scale * static_cast<double>(w.size());
}

constexpr double kTau = 1e-12;

}  // namespace

DualSolution solve_dual(const TrainingSet& data, const SvmConfig& cfg,
                        std::span<const double> warm_start) {
  const std::size_t n = data.size();
  if (n == 0) throw InvalidArgument("training set is empty");
  if (data.points.size() != n) throw InvalidArgument("training points and labels differ in length");
  if (!(cfg.gamma > 0.0)) throw InvalidArgument("kernel width must be > 0");
  if (!(cfg.cost.c_fn > 0.0) || !(cfg.cost.c_fp > 0.0)) throw InvalidArgument("costs must be > 0");

  const std::vector<double> q = signed_kernel(data, cfg.gamma);
  std::vector<double> y(n), c(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = to_int(data.labels[i]);
    c[i] = cfg.cost.bound(data.labels[i]);
  }

  DualSolution sol;
  sol.alphas.assign(n, 0.0);
  if (warm_start_usable(data, cfg, warm_start)) sol.alphas.assign(warm_start.begin(), warm_start.end());
  std::vector<double>& a = sol.alphas;

  // Gradient of the minimization form f = 1/2 a^T Q a - e^T a.
  std::vector<double> g(n, -1.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (a[i] == 0.0) continue;
    for (std::size_t k = 0; k < n; ++k) g[k] += q[i * n + k] * a[i];
  }

  const std::size_t max_iter = std::max<std::size_t>(1000, cfg.max_passes_factor * n * n);
  sol.converged = false;
  std::size_t iter = 0;

  if (!cfg.equality_constraint) {
    // Box-only dual: single-coordinate ascent on the most violating index.
    for (; iter < max_iter; ++iter) {
      double worst = 0.0;
      std::size_t pick = n;
      for (std::size_t t = 0; t < n; ++t) {
        double v = 0.0;
        if (a[t] < c[t] && g[t] < 0.0) v = -g[t];
        if (a[t] > 0.0 && g[t] > 0.0) v = g[t];
        if (v > worst) {
          worst = v;
          pick = t;
        }
      }
      if (pick == n || worst < cfg.eps_kkt) {
        sol.converged = true;
        break;
      }
      const double old = a[pick];
      a[pick] = std::clamp(old - g[pick] / q[pick * n + pick], 0.0, c[pick]);
      const double d = a[pick] - old;
      for (std::size_t k = 0; k < n; ++k) g[k] += q[pick * n + k] * d;
    }
  } else {
    for (; iter < max_iter; ++iter) {
      double gmax = -std::numeric_limits<double>::infinity();
      double gmin = std::numeric_limits<double>::infinity();
      std::size_t i = n, j = n;
      for (std::size_t t = 0; t < n; ++t) {
        const double v = -y[t] * g[t];
        const bool up = (y[t] > 0.0) ? a[t] < c[t] : a[t] > 0.0;
        const bool low = (y[t] > 0.0) ? a[t] > 0.0 : a[t] < c[t];
        if (up && v > gmax) {
          gmax = v;
          i = t;
        }
        if (low && v < gmin) {
          gmin = v;
          j = t;
        }
      }
      if (i == n || j == n || gmax - gmin < cfg.eps_kkt) {
        sol.converged = true;
        break;
      }

      const double* qi = &q[i * n];
      const double* qj = &q[j * n];
      const double old_ai = a[i];
      const double old_aj = a[j];
      const double ci = c[i];
      const double cj = c[j];
      if (y[i] != y[j]) {
        double quad = qi[i] + qj[j] + 2.0 * qi[j];
        if (quad <= 0.0) quad = kTau;
        const double delta = (-g[i] - g[j]) / quad;
        const double diff = a[i] - a[j];
        a[i] += delta;
        a[j] += delta;
        if (diff > 0.0) {
          if (a[j] < 0.0) {
            a[j] = 0.0;
            a[i] = diff;
          }
        } else if (a[i] < 0.0) {
          a[i] = 0.0;
          a[j] = -diff;
        }
        if (diff > ci - cj) {
          if (a[i] > ci) {
            a[i] = ci;
            a[j] = ci - diff;
          }
        } else if (a[j] > cj) {
          a[j] = cj;
          a[i] = cj + diff;
        }
      } else {
        double quad = qi[i] + qj[j] - 2.0 * qi[j];
        if (quad <= 0.0) quad = kTau;
        const double delta = (g[i] - g[j]) / quad;
        const double sum = a[i] + a[j];
        a[i] -= delta;
        a[j] += delta;
        if (sum > ci) {
          if (a[i] > ci) {
            a[i] = ci;
            a[j] = sum - ci;
          }
        } else if (a[j] < 0.0) {
          a[j] = 0.0;
          a[i] = sum;
        }
        if (sum > cj) {
          if (a[j] > cj) {
            a[j] = cj;
            a[i] = sum - cj;
          }
        } else if (a[i] < 0.0) {
          a[i] = 0.0;
          a[j] = sum;
        }
      }
      const double di = a[i] - old_ai;
      const double dj = a[j] - old_aj;
      for (std::size_t k = 0; k < n; ++k) g[k] += qi[k] * di + qj[k] * dj;
    }
  }
  sol.iterations = iter;

  // With g = Q a - e, a^T Q a = a^T (g + e).
  double sum_a = 0.0, a_qa = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sum_a += a[i];
    a_qa += a[i] * (g[i] + 1.0);
  }
  sol.objective = sum_a - 0.5 * a_qa;
  return sol;
}

SvmModel build_model(const TrainingSet& data, const DualSolution& dual, const SvmConfig& cfg) {
  SvmModel m;
  m.gamma = cfg.gamma;
  m.cost = cfg.cost;
  m.bias = 0.0;
  m.support_points = PointSet(data.points.dim());
  m.converged = dual.converged;
  m.iterations = dual.iterations;
  if (single_class(data)) {
    m.constant_label = data.labels.front();
    return m;
  }
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (dual.alphas[i] > cfg.alpha_floor) {
      m.support_points.push_back(data.points[i]);
      m.alphas.push_back(dual.alphas[i]);
      m.support_labels.push_back(data.labels[i]);
    }
  }
  return m;
}

Fit fit(const TrainingSet& data, const SvmConfig& cfg, std::span<const double> warm_start) {
  if (data.size() == 0) throw InvalidArgument("training set is empty");
  Fit out;
  if (single_class(data)) {
    out.dual.alphas.assign(data.size(), 0.0);
    out.model = build_model(data, out.dual, cfg);
    return out;
  }
  out.dual = solve_dual(data, cfg, warm_start);
  out.model = build_model(data, out.dual, cfg);
  return out;
}

SvmModel train(const TrainingSet& data, const SvmConfig& cfg, std::span<const double> warm_start) {
  return fit(data, cfg, warm_start).model;
}

// ---------------------------------------------------------------------------

namespace {

void put(std::ostream& os, double v) {
  char buf[64];
  const int len = std::snprintf(buf, sizeof(buf), "%.17g", v);
  os.write(buf, len);
}

}  // namespace

void save_model(std::ostream& os, const SvmModel& m) {
  os << "svm-model v1\n";
  os << "dim " << m.dim() << " gamma ";
  put(os, m.gamma);
  os << " bias ";
  put(os, m.bias);
  os << " c_fn ";
  put(os, m.cost.c_fn);
  os << " c_fp ";
  put(os, m.cost.c_fp);
  os << "\nconstant ";
  if (m.constant_label) {
    os << (*m.constant_label == Label::Safe ? "+1" : "-1");
  } else {
    os << "none";
  }
  os << "\nsupports " << m.alphas.size() << "\n";
  for (std::size_t j = 0; j < m.alphas.size(); ++j) {
    put(os, m.alphas[j]);
    os << (m.support_labels[j] == Label::Safe ? " +1" : " -1");
    for (double v : m.support_points[j]) {
      os << ' ';
      put(os, v);
    }
    os << '\n';
  }
}

SvmModel load_model(std::istream& is) {
  auto bad = [](const std::string& what) { return InvalidArgument("malformed model file: " + what); };
  std::string line;
  if (!std::getline(is, line) || line != "svm-model v1") throw bad("missing header");
  SvmModel m;
  std::size_t dim = 0;
  std::string k1, k2, k3, k4, k5;
  if (!(is >> k1 >> dim >> k2 >> m.gamma >> k3 >> m.bias >> k4 >> m.cost.c_fn >> k5 >> m.cost.c_fp) ||
      k1 != "dim" || k2 != "gamma" || k3 != "bias" || k4 != "c_fn" || k5 != "c_fp") {
    throw bad("parameter line");
  }
  std::string key, value;
  if (!(is >> key >> value) || key != "constant") throw bad("constant line");
  if (value == "+1") m.constant_label = Label::Safe;
  else if (value == "-1") m.constant_label = Label::Unsafe;
  else if (value != "none") throw bad("constant value");
  std::size_t n = 0;
  if (!(is >> key >> n) || key != "supports") throw bad("supports line");
  m.support_points = PointSet(dim);
  std::vector<double> p(dim);
  for (std::size_t j = 0; j < n; ++j) {
    double alpha = 0.0;
    std::string lab;
    if (!(is >> alpha >> lab)) throw bad("support row");
    for (auto& v : p) {
      if (!(is >> v)) throw bad("support coordinates");
    }
    if (lab != "+1" && lab != "-1") throw bad("support label");
    m.alphas.push_back(alpha);
    m.support_labels.push_back(lab == "+1" ? Label::Safe : Label::Unsafe);
    m.support_points.push_back(p);
  }
  return m;
}

}  // namespace clv
