#pragma once

// Gridded Mt / P0 climatology built from radar footprint observations:
// rasterise footprints with per-pixel de-duplication, turn the counts into
// initial estimates, blend toward a smoothed reference Mt where terrain is
// simple, then smooth the result.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rainstat/raster.hpp"

namespace rainstat::climatology {

inline constexpr double kHoursPerYear = 8766.0;  // 365.25 days
inline constexpr double kEarthRadiusKm = 6371.0;

struct SwathObservation {
  double time_s = 0.0;
  double lat = 0.0;
  double lon = 0.0;
  double nsrr_mm_h = 0.0;
  bool rain_certain = false;
  double diameter_km = 4.5;
};

/// Per-pixel counts from rendered footprints. n_rain <= n_total, and
/// sum_nsrr is zero wherever n_rain is zero.
struct AccumulatorGrid {
  raster::GridGeometry geometry;
  std::vector<std::uint32_t> n_total;
  std::vector<std::uint32_t> n_rain;
  std::vector<double> sum_nsrr;
  std::size_t observations = 0;  // observations read
  std::size_t skipped = 0;       // observations covering no pixel centre

  friend bool operator==(const AccumulatorGrid&, const AccumulatorGrid&) = default;
};

/// True iff the pixel centre (pixel_lat, pixel_lon) lies within the
/// footprint: equirectangular distance with longitude scaled by the cosine
/// of the observation latitude.
bool footprint_covers(const SwathObservation& obs, double pixel_lat, double pixel_lon) noexcept;

/// Rasterises a time-sorted observation stream. Within one pixel,
/// observations starting no more than `dedup_window_s` after the pixel's
/// current window start collapse into one logical observation that is rainy
/// if any contributor is rain-certain and carries the largest rain-certain
/// NSRR. Work is split by pixel rows across `workers`, so the output does not
/// depend on the worker count. Throws DataError for an unsorted stream or an
/// invalid observation.
AccumulatorGrid render_observations(std::span<const SwathObservation> observations,
                                    const raster::GridGeometry& geometry,
                                    double dedup_window_s = 60.0, unsigned workers = 1);

struct InitialEstimates {
  raster::Grid mt;         // mm/yr
  raster::Grid p0;         // percent
  raster::Grid cond_rate;  // mm/h over rainy observations
};

InitialEstimates initial_estimates(const AccumulatorGrid& acc);

/// w = 1 / (1 + ln(1 + IQR_k(elevation))), nodata where the elevation or
/// its window IQR is nodata.
raster::Grid elevation_weight(const raster::Grid& elevation, std::size_t k = 121);

/// (1 - w) * satellite + w * uniform_filter(reference, k). Falls back to the
/// satellite value where the smoothed reference or the weight is nodata.
raster::Grid merge_reference(const raster::Grid& satellite, const raster::Grid& reference,
                             const raster::Grid& weight, std::size_t k = 121);

struct Finalized {
  raster::Grid mt;
  raster::Grid p0;
};

/// Gaussian smoothing of both grids, then Mt >= 0 and P0 in [0, 100].
Finalized finalize(const raster::Grid& mt, const raster::Grid& p0, std::size_t k = 21,
                   std::optional<double> sigma = std::nullopt);

struct ClimatologyConfig {
  std::filesystem::path observations;
  raster::GridGeometry geometry;
  std::filesystem::path reference_mt;
  std::filesystem::path elevation;
  std::size_t k_uniform = 121;
  std::size_t k_gauss = 21;
  std::optional<double> sigma;
  double dedup_window_s = 60.0;
  unsigned workers = 1;
};

struct ClimatologyResult {
  raster::Grid mt;
  raster::Grid p0;
  std::string report;  // key=value lines in a fixed order
};

/// render -> initial_estimates -> elevation_weight -> merge_reference ->
/// finalize. Failures are rethrown as StageError naming the stage.
ClimatologyResult build_climatology(const ClimatologyConfig& config);

/// Same pipeline on in-memory inputs. `reference` and `elevation` are
/// resampled bilinearly onto `geometry` when not already aligned.
ClimatologyResult build_climatology(std::span<const SwathObservation> observations,
                                    const raster::GridGeometry& geometry,
                                    const raster::Grid& reference, const raster::Grid& elevation,
                                    const ClimatologyConfig& config);

// Observation CSV: time_s,lat,lon,nsrr_mm_h,rain_certain,diameter_km
std::vector<SwathObservation> read_observations(const std::filesystem::path& path);
std::vector<SwathObservation> parse_observations(std::istream& in,
                                                 const std::string& source_name = "<stream>");
std::string format_observations(std::span<const SwathObservation> observations);

}  // namespace rainstat::climatology
