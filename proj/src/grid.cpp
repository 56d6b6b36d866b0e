#include "clv/grid.hpp"

#include <sstream>

#include "clv/error.hpp"

namespace clv {

void GridSpec::validate() const {
  if (axes.empty()) throw InvalidArgument("grid needs at least one axis");
  for (std::size_t d = 0; d < axes.size(); ++d) {
    const auto& a = axes[d];
    if (a.count < 2) throw InvalidArgument("grid axis " + std::to_string(d) + " needs count >= 2");
    if (!(a.min < a.max)) throw InvalidArgument("grid axis " + std::to_string(d) + " needs min < max");
  }
}

std::size_t GridSpec::total(std::size_t max_points) const {
  validate();
  std::size_t n = 1;
  for (const auto& a : axes) {
    if (n > max_points / a.count) {
      throw Overflow("grid exceeds the configured maximum of " + std::to_string(max_points) + " points");
    }
    n *= a.count;
  }
  if (n > max_points) {
    throw Overflow("grid exceeds the configured maximum of " + std::to_string(max_points) + " points");
  }
  return n;
}

std::string GridSpec::describe() const {
  std::ostringstream os;
  os.precision(17);
  for (std::size_t d = 0; d < axes.size(); ++d) {
    if (d) os << ' ';
    os << '[' << axes[d].min << ',' << axes[d].max << ';' << axes[d].count << ']';
  }
  return os.str();
}

PointSet build_grid(const GridSpec& spec, std::size_t max_points) {
  const std::size_t n = spec.total(max_points);
  const std::size_t dim = spec.dim();
  PointSet out(dim);
  out.reserve(n);
  std::vector<std::size_t> idx(dim, 0);
  std::vector<double> p(dim);
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t d = 0; d < dim; ++d) {
      const auto& a = spec.axes[d];
      // Exact endpoints; interior points by linear interpolation.
      if (idx[d] + 1 == a.count) {
        p[d] = a.max;
      } else {
        p[d] = a.min + (a.max - a.min) * static_cast<double>(idx[d]) / static_cast<double>(a.count - 1);
      }
    }
    out.push_back(p);
    for (std::size_t d = dim; d-- > 0;) {
      if (++idx[d] < spec.axes[d].count) break;
      idx[d] = 0;
    }
  }
  return out;
}

}  // namespace clv
