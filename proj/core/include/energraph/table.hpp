#pragma once

// 1-D and 2-D lookup tables with linear interpolation and flat (clamped)
// extrapolation. Sampling outside the grid increments an extrapolation
// counter that reports surface as a warning; the counter is atomic so
// tables can be shared across concurrent simulations.

#include <atomic>
#include <vector>

namespace energraph {

class LookupTable1D {
public:
  LookupTable1D() = default;
  LookupTable1D(std::vector<double> grid, std::vector<double> values);

  LookupTable1D(const LookupTable1D& other);
  LookupTable1D& operator=(const LookupTable1D& other);

  double sample(double x) const;

  const std::vector<double>& grid() const { return grid_; }
  const std::vector<double>& values() const { return values_; }
  long extrapolation_count() const { return extrapolations_.load(); }

private:
  std::vector<double> grid_;
  std::vector<double> values_;
  mutable std::atomic<long> extrapolations_{0};
};

/// Row-major over x: value at (grid_x[i], grid_y[j]) is values[i * ny + j].
class LookupTable2D {
public:
  LookupTable2D() = default;
  LookupTable2D(std::vector<double> grid_x, std::vector<double> grid_y,
                std::vector<double> values);

  LookupTable2D(const LookupTable2D& other);
  LookupTable2D& operator=(const LookupTable2D& other);

  double sample(double x, double y) const;

  const std::vector<double>& grid_x() const { return grid_x_; }
  const std::vector<double>& grid_y() const { return grid_y_; }
  const std::vector<double>& values() const { return values_; }
  long extrapolation_count() const { return extrapolations_.load(); }

private:
  std::vector<double> grid_x_;
  std::vector<double> grid_y_;
  std::vector<double> values_;
  mutable std::atomic<long> extrapolations_{0};
};

}  // namespace energraph
