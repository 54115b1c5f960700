#pragma once

// Rain-rate maps, ">N" masks and population / rain-zone tabulations.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "rainstat/rainmodel.hpp"
#include "rainstat/raster.hpp"

namespace rainstat::impact {

/// Country code used for masked pixels whose country is nodata.
inline constexpr long long kUnassigned = -1;

/// Per-pixel rain_rate(p) from aligned Mt and P0 grids. A pixel is nodata
/// when either input is. Throws AlignmentError for misaligned grids and
/// DataError for a pixel outside the model's domain.
raster::Grid rate_map(const raster::Grid& mt, const raster::Grid& p0,
                      const rainmodel::ModelParams& params, double p_pct, unsigned workers = 1);

struct HeavyMask {
  raster::GridGeometry geometry;
  std::vector<std::uint8_t> heavy;  // 1 where rate > threshold
  std::size_t nodata = 0;           // nodata rate pixels (reported false)

  std::size_t count() const noexcept;
};

HeavyMask heavy_mask(const raster::Grid& rate, double threshold = 95.0);

struct Population {
  double total = 0.0;  // population of every pixel in the region
  double heavy = 0.0;  // population of masked pixels

  friend bool operator==(const Population&, const Population&) = default;
};

struct ZonalPopulation {
  /// Keyed by country code; kUnassigned collects pixels with nodata country.
  std::map<long long, Population> countries;
  Population grand;
};

/// Sums population per country, overall and inside the mask. Nodata
/// population pixels count as zero. Throws AlignmentError for misaligned
/// inputs and DataError for negative population or non-integer codes.
ZonalPopulation zonal_population(const raster::Grid& population, const HeavyMask& mask,
                                 const raster::Grid& countries);

struct ZoneCoverage {
  long long code = 0;
  double land_pct = 0.0;       // share of valid zone pixels
  double populated_pct = 0.0;  // share of pixels with population > 0
  double pop_pct = 0.0;        // share of total population
};

/// One row per zone code present, ascending. Each column sums to 100 over
/// the rows, or is all zero when nothing is populated. EmptyDataError when
/// the zone grid has no valid pixel.
std::vector<ZoneCoverage> zone_coverage(const raster::Grid& zones, const raster::Grid& population);

struct RainZone {
  char letter;
  double r001_mm_h;
};

/// Zone codes 1..12 map to A, C, D, E, F, H, J, K, M, N, P, Q.
const std::vector<RainZone>& zone_table();
/// DataError for a code outside the table.
const RainZone& zone_for_code(long long code);

/// Integer value of a category pixel; DataError unless it is a
/// non-negative integer.
long long category_code(double value);

// country_code,total_pop,heavy_pop
std::string format_zonal_population(const ZonalPopulation& zp);
// rain_zone,r001_mm_h,land_pct_px,pop_gt0_pct_px,pop_pct
std::string format_zone_coverage(const std::vector<ZoneCoverage>& rows);

}  // namespace rainstat::impact
