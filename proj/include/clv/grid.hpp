#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "clv/svm.hpp"

namespace clv {

struct GridAxis {
  double min = 0.0;
  double max = 1.0;
  std::size_t count = 2;
  bool operator==(const GridAxis&) const = default;
};

struct GridSpec {
  std::vector<GridAxis> axes;

  std::size_t dim() const { return axes.size(); }
  // Product of the axis counts; throws Overflow above max_points.
  std::size_t total(std::size_t max_points = kDefaultMaxPoints) const;
  void validate() const;
  std::string describe() const;
  bool operator==(const GridSpec&) const = default;

  static constexpr std::size_t kDefaultMaxPoints = 5'000'000;
};

// Row-major Cartesian product of inclusive linspaces (last axis fastest).
PointSet build_grid(const GridSpec& spec, std::size_t max_points = GridSpec::kDefaultMaxPoints);

}  // namespace clv
