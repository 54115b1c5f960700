#pragma once

// Regular lat/lon rasters: geometry, text I/O, sampling, resampling and the
// nodata-aware neighbourhood filters used by the climatology pipeline.
//
// Registration: (xll, yll) is the lower-left corner of the lower-left cell.
// Values are stored row-major with row 0 the northernmost row, so the cell at
// (row, col) has its centre at
//   lon = xll + (col + 0.5) * cell
//   lat = yll + (nrows - row - 0.5) * cell

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace rainstat::raster {

inline constexpr double kDefaultNodata = -9999.0;

struct GridGeometry {
  std::size_t ncols = 0;
  std::size_t nrows = 0;
  double xll = 0.0;
  double yll = 0.0;
  double cell = 0.0;
  double nodata = kDefaultNodata;

  std::size_t size() const noexcept { return ncols * nrows; }
  double west() const noexcept { return xll; }
  double east() const noexcept { return xll + static_cast<double>(ncols) * cell; }
  double south() const noexcept { return yll; }
  double north() const noexcept { return yll + static_cast<double>(nrows) * cell; }
  double center_lon(std::size_t col) const noexcept {
    return xll + (static_cast<double>(col) + 0.5) * cell;
  }
  double center_lat(std::size_t row) const noexcept {
    return yll + (static_cast<double>(nrows - row) - 0.5) * cell;
  }
  bool contains(double lat, double lon) const noexcept {
    return lat >= south() && lat <= north() && lon >= west() && lon <= east();
  }

  /// Throws ArgumentError when a geometry invariant is broken.
  void validate() const;

  friend bool operator==(const GridGeometry&, const GridGeometry&) = default;
};

/// True iff all geometry fields match exactly.
bool aligned(const GridGeometry& a, const GridGeometry& b) noexcept;

/// Throws AlignmentError naming `what` unless a and b are aligned.
void require_aligned(const GridGeometry& a, const GridGeometry& b,
                     const std::string& what);

class Grid {
 public:
  Grid() = default;
  /// Grid filled with `fill` (nodata by default).
  explicit Grid(const GridGeometry& geometry);
  Grid(const GridGeometry& geometry, double fill);
  Grid(const GridGeometry& geometry, std::vector<double> values);

  const GridGeometry& geometry() const noexcept { return geometry_; }
  std::size_t ncols() const noexcept { return geometry_.ncols; }
  std::size_t nrows() const noexcept { return geometry_.nrows; }
  double nodata() const noexcept { return geometry_.nodata; }
  std::size_t size() const noexcept { return values_.size(); }

  double& at(std::size_t row, std::size_t col) { return values_[row * ncols() + col]; }
  double at(std::size_t row, std::size_t col) const {
    return values_[row * ncols() + col];
  }
  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }

  bool is_nodata(double v) const noexcept;
  bool valid(std::size_t i) const noexcept { return !is_nodata(values_[i]); }
  std::size_t valid_count() const noexcept;

  /// Arithmetic mean of valid cells; nodata when none are valid.
  double valid_mean() const noexcept;

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  GridGeometry geometry_;
  std::vector<double> values_;
};

// ---------------------------------------------------------------------------
// Text I/O.
//
// Six header lines (`ncols`, `nrows`, `xllcorner`, `yllcorner`, `cellsize`,
// `NODATA_value`, key and value separated by a space) followed by nrows lines
// of ncols space-separated numbers, north row first. Numbers are written in
// shortest round-trip form, so read(write(g)) == g for every finite double.

Grid read_grid(const std::filesystem::path& path);
Grid read_grid(std::istream& in, const std::string& source_name = "<stream>");
void write_grid(const Grid& grid, const std::filesystem::path& path);
void write_grid(const Grid& grid, std::ostream& out);
std::string format_grid(const Grid& grid);

/// Shortest decimal text that parses back to exactly `v`.
std::string format_number(double v);

// ---------------------------------------------------------------------------
// Sampling and resampling.

/// Bilinear interpolation between the four cell centres around (lat, lon).
/// Outside the outermost ring of centres the nearest edge value is held.
/// Returns nodata if a corner carrying non-zero weight is nodata. Throws
/// RangeError when the point lies outside the grid's outer bounds.
double sample_bilinear(const Grid& grid, double lat, double lon);

/// Value of the cell containing (lat, lon); RangeError when outside.
double sample_nearest(const Grid& grid, double lat, double lon);

enum class ResampleMethod { nearest, bilinear };

/// Evaluates `method` at each target cell centre. Centres outside the source
/// bounds become the target's nodata. Throws ArgumentError when the two
/// extents do not overlap.
Grid resample(const Grid& grid, const GridGeometry& target, ResampleMethod method);

// ---------------------------------------------------------------------------
// Neighbourhood filters. All take an odd window size k >= 1 and ignore
// nodata and out-of-bounds cells (renormalising over the valid ones).

/// Mean of valid cells in the k x k window; nodata only if none are valid.
Grid uniform_filter(const Grid& grid, std::size_t k);

/// Separable Gaussian truncated to k x k, weights renormalised per pixel.
Grid gaussian_filter(const Grid& grid, std::size_t k, double sigma);
Grid gaussian_filter(const Grid& grid, std::size_t k);

/// Q3 - Q1 of the valid cells in each k x k window, nodata when fewer than
/// four are valid. Quartiles interpolate linearly at positions (n-1)/4 and
/// 3(n-1)/4 of the sorted values.
Grid window_iqr(const Grid& grid, std::size_t k);

/// sigma used by gaussian_filter(grid, k): the +-3 sigma span fills the window.
double default_sigma(std::size_t k) noexcept;

/// Linear-interpolated quantile of already sorted values at position
/// q * (n - 1). Shared by the IQR filter and its tests.
double sorted_quantile(std::span<const double> sorted, double q);

}  // namespace rainstat::raster
