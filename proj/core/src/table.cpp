#include "energraph/table.hpp"

#include <algorithm>
#include <stdexcept>

namespace energraph {

namespace {

void check_axis(const std::vector<double>& grid, const char* which) {
  if (grid.size() < 2)
    throw std::invalid_argument(std::string("lookup table ") + which +
                                " axis needs at least two points");
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (!(grid[i] > grid[i - 1]))
      throw std::invalid_argument(std::string("lookup table ") + which +
                                  " axis must be strictly increasing");
}

// Returns the left bracket index and the interpolation weight; clamps
// outside the grid and reports whether clamping happened.
struct Bracket {
  std::size_t i;
  double w;
  bool clamped;
};

Bracket bracket(const std::vector<double>& grid, double x) {
  if (x <= grid.front()) return {0, 0.0, x < grid.front()};
  if (x >= grid.back()) return {grid.size() - 2, 1.0, x > grid.back()};
  auto it = std::upper_bound(grid.begin(), grid.end(), x);
  std::size_t i = static_cast<std::size_t>(it - grid.begin()) - 1;
  double w = (x - grid[i]) / (grid[i + 1] - grid[i]);
  return {i, w, false};
}

}  // namespace

LookupTable1D::LookupTable1D(std::vector<double> grid, std::vector<double> values)
    : grid_(std::move(grid)), values_(std::move(values)) {
  check_axis(grid_, "1-D");
  if (values_.size() != grid_.size())
    throw std::invalid_argument("lookup table values must match grid length");
}

LookupTable1D::LookupTable1D(const LookupTable1D& other)
    : grid_(other.grid_), values_(other.values_),
      extrapolations_(other.extrapolations_.load()) {}

LookupTable1D& LookupTable1D::operator=(const LookupTable1D& other) {
  grid_ = other.grid_;
  values_ = other.values_;
  extrapolations_.store(other.extrapolations_.load());
  return *this;
}

double LookupTable1D::sample(double x) const {
  Bracket b = bracket(grid_, x);
  if (b.clamped) extrapolations_.fetch_add(1, std::memory_order_relaxed);
  return values_[b.i] * (1.0 - b.w) + values_[b.i + 1] * b.w;
}

LookupTable2D::LookupTable2D(std::vector<double> grid_x, std::vector<double> grid_y,
                             std::vector<double> values)
    : grid_x_(std::move(grid_x)), grid_y_(std::move(grid_y)), values_(std::move(values)) {
  check_axis(grid_x_, "2-D x");
  check_axis(grid_y_, "2-D y");
  if (values_.size() != grid_x_.size() * grid_y_.size())
    throw std::invalid_argument("lookup table values must match grid size");
}

LookupTable2D::LookupTable2D(const LookupTable2D& other)
    : grid_x_(other.grid_x_), grid_y_(other.grid_y_), values_(other.values_),
      extrapolations_(other.extrapolations_.load()) {}

LookupTable2D& LookupTable2D::operator=(const LookupTable2D& other) {
  grid_x_ = other.grid_x_;
  grid_y_ = other.grid_y_;
  values_ = other.values_;
  extrapolations_.store(other.extrapolations_.load());
  return *this;
}

double LookupTable2D::sample(double x, double y) const {
  Bracket bx = bracket(grid_x_, x);
  Bracket by = bracket(grid_y_, y);
  if (bx.clamped || by.clamped) extrapolations_.fetch_add(1, std::memory_order_relaxed);
  const std::size_t ny = grid_y_.size();
  double v00 = values_[bx.i * ny + by.i];
  double v01 = values_[bx.i * ny + by.i + 1];
  double v10 = values_[(bx.i + 1) * ny + by.i];
  double v11 = values_[(bx.i + 1) * ny + by.i + 1];
  double v0 = v00 * (1.0 - by.w) + v01 * by.w;
  double v1 = v10 * (1.0 - by.w) + v11 * by.w;
  return v0 * (1.0 - bx.w) + v1 * bx.w;
}

}  // namespace energraph
