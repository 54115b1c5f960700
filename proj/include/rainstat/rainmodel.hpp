#pragma once

// Exceedance model for 1-min rain rate driven by two climate statistics:
//
//   P(R) = P0 * exp(-a R (1 + b R) / (1 + c R))
//   a = x,  b = Mt / (y P0),  c = z b
//
// with Mt the mean annual rainfall (mm), P0 the annual probability of rain
// (percent) and (x, y, z) three globally fitted constants. All
// probabilities are percent throughout this library.

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace rainstat::rainmodel {

struct ModelParams {
  double x = 1.0;
  double y = 20000.0;
  double z = 26.0;

  /// Throws ArgumentError unless all three are finite and positive.
  void validate() const;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

struct ClimatePoint {
  double mt_mm = 0.0;   // mean annual rainfall, mm/yr
  double p0_pct = 0.0;  // annual probability of rain, percent

  void validate() const;
};

/// One (exceedance probability, rain rate) pair.
struct RatePoint {
  double p_pct = 0.0;
  double rate_mm_h = 0.0;

  friend bool operator==(const RatePoint&, const RatePoint&) = default;
};

struct SiteStatistics {
  std::string site_id;
  double lat = 0.0;
  double lon = 0.0;
  std::string country;
  double duration_years = 0.0;
  std::vector<RatePoint> points;

  /// Throws DataError when p is out of (0, 100], R is negative, or R
  /// decreases as p decreases.
  void validate() const;
};

/// {0.001, 0.002, 0.003, 0.005, ..., 1, 2, 3, 5} percent.
inline constexpr std::array<double, 16> kStandardLadder = {
    0.001, 0.002, 0.003, 0.005, 0.01, 0.02, 0.03, 0.05,
    0.1,   0.2,   0.3,   0.5,   1.0,  2.0,  3.0,  5.0};

/// Percent of time the rain rate exceeds `rate_mm_h`.
double exceedance_probability(double rate_mm_h, const ClimatePoint& climate,
                              const ModelParams& params);

/// Rain rate exceeded p percent of the time: 0 when p >= P0, otherwise the
/// root of exceedance_probability(R) = p found by bracketed bisection.
/// Throws ArgumentError for p outside (0, 100] and SolverError when no
/// bracket exists below 10,000 mm/h.
double rain_rate(double p_pct, const ClimatePoint& climate, const ModelParams& params);

inline constexpr double kRateCap = 10000.0;

std::vector<RatePoint> estimate_site_curve(const ClimatePoint& climate,
                                           const ModelParams& params,
                                           std::span<const double> ladder = kStandardLadder);

struct TrainingSite {
  SiteStatistics stats;
  ClimatePoint climate;
};

struct FitOptions {
  /// Relative objective change that ends a local descent.
  double tolerance = 1e-8;
  std::size_t max_iterations = 500;
  /// Number of best coarse-grid seeds refined by local descent.
  std::size_t refine_starts = 6;
  /// Seed for the multiplicative jitter applied to refined seeds; the
  /// unjittered coarse-grid seed is always refined as well.
  std::uint64_t seed = 0;
  unsigned workers = 1;
};

struct FitResult {
  ModelParams params;
  double objective = 0.0;        // mean squared relative error
  std::size_t residuals = 0;     // (site, rung) pairs with observed R > 0
  std::size_t starts = 0;        // local descents run
  std::size_t converged = 0;     // descents that met the tolerance
};

/// Mean of ((R_hat - R) / R)^2 over every training pair with R > 0.
double fit_objective(std::span<const TrainingSite> training, const ModelParams& params);

/// Multi-start damped Gauss-Newton fit of (x, y, z) in log space, seeded from
/// a coarse logarithmic grid. Ties on the objective go to the
/// lexicographically smallest (x, y, z).
FitResult fit_params(std::span<const TrainingSite> training, const FitOptions& options = {});

/// Log-linear interpolation of R against ln(p). Targets outside the observed
/// p range are dropped. Throws ArgumentError with fewer than two points or
/// repeated p values.
std::vector<RatePoint> loglinear_resample(std::span<const RatePoint> points,
                                          std::span<const double> targets);

// Params file: three `key=value` lines for x, y and z.
ModelParams read_params(const std::filesystem::path& path);
ModelParams parse_params(std::istream& in, const std::string& source_name = "<stream>");
std::string format_params(const ModelParams& params);

// Site-statistics CSV:
//   site_id,lat,lon,country,years,p_percent,rate_mm_h
// one row per (site, rung); sites are returned in first-appearance order.
std::vector<SiteStatistics> read_site_statistics(const std::filesystem::path& path);
std::vector<SiteStatistics> parse_site_statistics(std::istream& in,
                                                  const std::string& source_name = "<stream>");
std::string format_site_statistics(std::span<const SiteStatistics> sites);

}  // namespace rainstat::rainmodel
