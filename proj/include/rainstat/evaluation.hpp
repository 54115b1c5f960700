#pragma once

// Scoring of rain-rate estimates: relative-error summaries, REC curves and
// ">N" (R_0.01 > 95 mm/h) classification metrics.

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "rainstat/raster.hpp"

namespace rainstat::evaluation {

inline constexpr double kHeavyThreshold = 95.0;  // mm/h, zone N

struct ErrorSample {
  std::string site_id;
  double p_pct = 0.0;
  double observed = 0.0;   // mm/h
  double predicted = 0.0;  // mm/h
};

/// (predicted - observed) / observed. ArgumentError when observed <= 0.
double relative_error(const ErrorSample& sample);
/// predicted - observed.
double bias_error(const ErrorSample& sample) noexcept;

struct Summary {
  double mean = 0.0;
  double sd = 0.0;   // population standard deviation
  double rms = 0.0;  // sqrt(mean^2 + sd^2)
  std::size_t n = 0;
};

/// ArgumentError on an empty list.
Summary p311_summary(std::span<const double> errors);

/// Fraction of |errors| at or below each threshold. Thresholds must be
/// ascending; ArgumentError for empty errors or unsorted thresholds.
std::vector<double> rec_curve(std::span<const double> errors, std::span<const double> thresholds);

/// R_0.01 > threshold (strict).
bool classify_heavy(double r001_mm_h, double threshold = kHeavyThreshold) noexcept;

struct ConfusionMatrix {
  std::size_t tn = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tp = 0;

  std::size_t total() const noexcept { return tn + fp + fn + tp; }
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

/// ArgumentError on length mismatch or empty input.
ConfusionMatrix confusion(const std::vector<bool>& actual, const std::vector<bool>& predicted);
double accuracy(const ConfusionMatrix& cm);
/// Matthews correlation coefficient; 0 when any marginal is empty.
double mcc(const ConfusionMatrix& cm) noexcept;

struct SiteLabel {
  std::string site_id;
  std::string country;
  bool actual = false;
  bool predicted = false;
};

struct CountryLabel {
  bool actual = false;
  bool predicted = false;

  friend bool operator==(const CountryLabel&, const CountryLabel&) = default;
};

/// A country is heavy (actual or predicted) when any of its sites is.
std::map<std::string, CountryLabel> by_country(std::span<const SiteLabel> sites);

struct Station {
  std::string site_id;
  double lat = 0.0;
  double lon = 0.0;
  double mt_mm = 0.0;
};

struct StationComparison {
  Summary summary;
  std::vector<double> errors;  // one per compared station, input order
  std::size_t skipped = 0;     // stations that sampled nodata
};

/// Relative error of the bilinearly sampled grid value against each station
/// value. Stations on nodata are skipped; EmptyDataError when all are.
StationComparison station_comparison(const raster::Grid& climatology,
                                     std::span<const Station> stations);

// Error-samples CSV: site_id,p_percent,observed,predicted
std::vector<ErrorSample> read_error_samples(const std::filesystem::path& path);
std::vector<ErrorSample> parse_error_samples(std::istream& in,
                                             const std::string& source_name = "<stream>");

// Classification CSV: site_id,country,observed_r001,predicted_r001
std::vector<SiteLabel> read_site_labels(const std::filesystem::path& path,
                                        double threshold = kHeavyThreshold);
std::vector<SiteLabel> parse_site_labels(std::istream& in, const std::string& source_name = "<stream>",
                                         double threshold = kHeavyThreshold);

// Station CSV: site_id,lat,lon,mt_mm
std::vector<Station> read_stations(const std::filesystem::path& path);
std::vector<Station> parse_stations(std::istream& in, const std::string& source_name = "<stream>");

/// key=value lines with 4-decimal values: `<prefix>_mean`, `_sd`, `_rms`, `_n`.
std::string format_summary(const std::string& prefix, const Summary& summary);
/// key=value lines: tn, fp, fn, tp, accuracy, mcc, each prefixed.
std::string format_confusion(const std::string& prefix, const ConfusionMatrix& cm);
/// CSV `threshold,fraction`.
std::string format_rec(std::span<const double> thresholds, std::span<const double> fractions);

}  // namespace rainstat::evaluation
