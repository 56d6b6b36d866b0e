#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "clv/mtl.hpp"

namespace clv {

using ThetaPoint = std::vector<double>;

// Row-major set of points of equal dimension.
class PointSet {
 public:
  PointSet() = default;
  explicit PointSet(std::size_t dim) : dim_(dim) {}

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return dim_ == 0 ? 0 : coords_.size() / dim_; }
  bool empty() const { return size() == 0; }

  std::span<const double> operator[](std::size_t i) const {
    return {coords_.data() + i * dim_, dim_};
  }
  void push_back(std::span<const double> p);
  void reserve(std::size_t n) { coords_.reserve(n * dim_); }

  const std::vector<double>& coords() const { return coords_; }
  bool operator==(const PointSet&) const = default;

 private:
  std::size_t dim_ = 0;
  std::vector<double> coords_;
};

struct TrainingSet {
  PointSet points;
  std::vector<Label> labels;

  explicit TrainingSet(std::size_t dim = 0) : points(dim) {}
  std::size_t size() const { return labels.size(); }
  void add(std::span<const double> p, Label y) {
    points.push_back(p);
    labels.push_back(y);
  }
};

// Per-class box bounds: C(y=+1) = c_fn, C(y=-1) = c_fp.
struct CostMatrix {
  double c_fn = 1.0;
  double c_fp = 1.0;

  double bound(Label y) const { return y == Label::Safe ? c_fn : c_fp; }
  bool operator==(const CostMatrix&) const = default;
};

struct SvmConfig {
  double gamma = 1.0;
  CostMatrix cost;
  // Keep sum_j alpha_j y_j = 0 in the dual even though b is fixed to 0.
  bool equality_constraint = true;
  double eps_kkt = 1e-3;
  double alpha_floor = 1e-8;
  // Iteration cap is max_passes * n pair updates.
  std::size_t max_passes_factor = 10;
};

// exp(-||a - b||^2 / gamma^2). Throws DimensionMismatch.
double rbf_kernel(std::span<const double> a, std::span<const double> b, double gamma);

struct SvmModel {
  PointSet support_points;
  std::vector<double> alphas;
  std::vector<Label> support_labels;
  double gamma = 1.0;
  double bias = 0.0;
  CostMatrix cost;
  // Set when trained on one class only: predictions are this label.
  std::optional<Label> constant_label;
  bool converged = true;
  std::size_t iterations = 0;

  bool degenerate() const { return constant_label.has_value(); }
  std::size_t dim() const { return support_points.dim(); }
};

// H(theta) = sum_j alpha_j y_j k(theta_j, theta) + b.
double decision(const SvmModel& model, std::span<const double> theta);

// sign(H) with sign(0) -> unsafe; a degenerate model returns its constant.
Label predict(const SvmModel& model, std::span<const double> theta);

// Solution of the box-constrained dual for all training points (including
// zero multipliers), used for warm starts and optimality checks.
struct DualSolution {
  std::vector<double> alphas;
  double objective = 0.0;
  std::size_t iterations = 0;
  bool converged = true;
};

// Dual objective sum alpha - 1/2 sum sum alpha_i alpha_j y_i y_j k_ij.
double dual_objective(const TrainingSet& data, std::span<const double> alphas, double gamma);

// SMO with maximal-violating-pair working set selection. warm_start, when
// given, must have one entry per training point (0 for new points); it is
// discarded if it violates the constraints.
DualSolution solve_dual(const TrainingSet& data, const SvmConfig& cfg,
                        std::span<const double> warm_start = {});

// Keeps the points with alpha > alpha_floor. All-one-class data yields a
// degenerate constant model instead of an error.
SvmModel build_model(const TrainingSet& data, const DualSolution& dual, const SvmConfig& cfg);

struct Fit {
  SvmModel model;
  DualSolution dual;
};

Fit fit(const TrainingSet& data, const SvmConfig& cfg, std::span<const double> warm_start = {});

SvmModel train(const TrainingSet& data, const SvmConfig& cfg,
               std::span<const double> warm_start = {});

// Portable text format:
//   svm-model v1
//   dim <d> gamma <g> bias <b> c_fn <c> c_fp <c>
//   constant <none|+1|-1>
//   supports <n>
//   <alpha> <label> <x_1> ... <x_d>     (n lines)
void save_model(std::ostream& os, const SvmModel& model);
SvmModel load_model(std::istream& is);

}  // namespace clv
