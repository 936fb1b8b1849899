#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace floodgsa {

/// Regular square-cell grid anchored at its lower-left corner. Row 0 is the
/// northern (top) row, matching the ASCII grid file layout.
struct GridGeometry {
  std::size_t ncols = 1;
  std::size_t nrows = 1;
  double x_origin = 0.0;
  double y_origin = 0.0;
  double cell_size = 1.0;
  double nodata_value = -9999.0;

  std::size_t cell_count() const noexcept { return ncols * nrows; }
  double width() const noexcept { return static_cast<double>(ncols) * cell_size; }
  double height() const noexcept { return static_cast<double>(nrows) * cell_size; }
  double x_max() const noexcept { return x_origin + width(); }
  double y_max() const noexcept { return y_origin + height(); }
  double center_x(std::size_t col) const noexcept {
    return x_origin + (static_cast<double>(col) + 0.5) * cell_size;
  }
  double center_y(std::size_t row) const noexcept {
    return y_max() - (static_cast<double>(row) + 0.5) * cell_size;
  }
  std::size_t index(std::size_t row, std::size_t col) const noexcept { return row * ncols + col; }

  /// Equal in everything but the nodata sentinel.
  bool compatible(const GridGeometry& other) const noexcept;
  void validate() const;

  bool operator==(const GridGeometry&) const = default;
};

class Raster {
 public:
  Raster() = default;
  explicit Raster(GridGeometry geometry, double fill = 0.0);
  Raster(GridGeometry geometry, std::vector<double> values);

  const GridGeometry& geometry() const noexcept { return geometry_; }
  std::size_t rows() const noexcept { return geometry_.nrows; }
  std::size_t cols() const noexcept { return geometry_.ncols; }
  std::size_t size() const noexcept { return values_.size(); }
  double cell_size() const noexcept { return geometry_.cell_size; }
  double nodata() const noexcept { return geometry_.nodata_value; }

  double operator()(std::size_t row, std::size_t col) const noexcept { return values_[row * geometry_.ncols + col]; }
  double& operator()(std::size_t row, std::size_t col) noexcept { return values_[row * geometry_.ncols + col]; }
  double operator[](std::size_t i) const noexcept { return values_[i]; }
  double& operator[](std::size_t i) noexcept { return values_[i]; }

  std::span<const double> values() const noexcept { return values_; }
  std::span<double> values() noexcept { return values_; }
  std::vector<double>& data() noexcept { return values_; }

  bool is_nodata(std::size_t i) const noexcept { return values_[i] == geometry_.nodata_value; }

  bool operator==(const Raster&) const = default;

 private:
  GridGeometry geometry_{};
  std::vector<double> values_;
};

struct RasterStats {
  std::size_t count = 0;  // valid (non-nodata) cells
  double mean = 0.0;
  double stddev = 0.0;    // population convention
  double min = 0.0;
  double max = 0.0;
  double sum = 0.0;
};

RasterStats statistics(const Raster& raster);

/// Cell-wise sum of two compatible rasters; nodata in either input yields nodata.
Raster add(const Raster& a, const Raster& b);

struct LabeledPoint {
  double x = 0.0;
  double y = 0.0;
  std::string label;

  bool operator==(const LabeledPoint&) const = default;
};

using PointSet = std::vector<LabeledPoint>;

/// CSV with header `label,x,y`.
PointSet read_points(const std::filesystem::path& path);
void write_points(const PointSet& points, const std::filesystem::path& path);

enum class ValueFormat {
  significant6,  // 6 significant digits, the interchange default
  exact,         // shortest round-trip representation
};

Raster parse_ascii_grid(std::string_view text, const std::string& source = "<grid>", std::size_t first_line = 1,
                        std::size_t* bytes_consumed = nullptr);
Raster read_ascii_grid(const std::filesystem::path& path);
std::string format_ascii_grid(const Raster& raster, ValueFormat format = ValueFormat::significant6);
void write_ascii_grid(const Raster& raster, const std::filesystem::path& path,
                      ValueFormat format = ValueFormat::significant6);

enum class ResampleMethod { block_mean, block_max };

/// Aggregates k x k blocks where k = target_cell_size / cell_size must be a
/// positive integer. Rows and columns that do not fill a whole block are
/// dropped on the sides away from the lower-left origin (north and east).
Raster resample(const Raster& raster, double target_cell_size, ResampleMethod method = ResampleMethod::block_mean);

/// Area-weighted mean onto an arbitrary target grid; nodata is ignored and a
/// target cell with no valid overlap becomes nodata.
Raster regrid_mean(const Raster& raster, const GridGeometry& target);

struct CellIndex {
  std::size_t row = 0;
  std::size_t col = 0;
};

/// Cell containing (x, y). Points on an interior edge go to the cell with the
/// higher row/column index. Throws ExtentError outside the closed extent.
CellIndex locate(const GridGeometry& geometry, double x, double y, std::string_view label = {});

/// Value of the containing cell for each point; nodata cells yield the
/// raster's nodata value.
std::vector<double> sample_at_points(const Raster& raster, const PointSet& points);

}  // namespace floodgsa
