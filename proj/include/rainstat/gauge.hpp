#pragma once

// Tipping-bucket records to 1-min rain-rate series and empirical exceedance
// statistics.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "rainstat/rainmodel.hpp"

namespace rainstat::gauge {

inline constexpr double kEventGapS = 1800.0;      // dry gap that separates rain events
inline constexpr double kQcCapMmH = 3048.0;       // 2 in/min
inline constexpr double kMinutesPerYear = 525960.0;

struct TipEvent {
  double time_s = 0.0;  // seconds since the Unix epoch, UTC
  double depth_mm = 0.254;
};

/// Whole minutes starting at `start_s` (a multiple of 60).
struct MinuteSpan {
  std::int64_t start_s = 0;
  std::size_t minutes = 0;

  std::int64_t end_s() const noexcept {
    return start_s + 60 * static_cast<std::int64_t>(minutes);
  }
};

struct MinuteSeries {
  std::int64_t start_s = 0;
  std::vector<double> rates;       // mm/h
  std::vector<std::uint8_t> valid;

  std::size_t size() const noexcept { return rates.size(); }
  std::size_t valid_count() const noexcept;

  friend bool operator==(const MinuteSeries&, const MinuteSeries&) = default;
};

/// Rebuilds a 1-min rate series from tip times. Tips are grouped into events
/// split by dry gaps longer than 30 min. Each event's cumulative depth is
/// interpolated with a natural cubic spline through (t_first - lead, 0) and
/// one knot per tip, where lead is the event's mean inter-tip interval
/// (60 s for a single tip, never more than 30 min). Minute depths are
/// clamped at zero and rescaled so each event keeps its total depth. All
/// minutes are marked valid. Throws DataError when tip times are not strictly
/// increasing, a depth is not positive, or a tip lies outside
/// (span.start_s, span.end_s].
MinuteSeries tips_to_rates(std::span<const TipEvent> events, const MinuteSpan& span);
MinuteSeries tips_to_rates(std::span<const double> tip_times_s, double bucket_mm,
                           const MinuteSpan& span);

/// Marks minutes above 3048 mm/h invalid; rates are left untouched.
MinuteSeries qc_filter(MinuteSeries series);

/// Longest run of consecutive calendar 12-month periods, counted from the
/// first full month, in which more than 90% of minutes are valid. Earliest
/// run wins ties; nullopt when no period qualifies.
std::optional<MinuteSeries> select_periods(const MinuteSeries& series);

/// R_p for every ladder rung whose expected count (p/100) N reaches
/// `min_count`, N being the number of valid minutes: the k-th largest valid
/// rate with k = floor((p/100) N).
std::vector<rainmodel::RatePoint> exceedance_stats(
    const MinuteSeries& series, std::span<const double> ladder = rainmodel::kStandardLadder,
    std::size_t min_count = 20);

/// Start of the calendar month containing t (UTC seconds).
std::int64_t month_start(std::int64_t t_s);
/// t plus `months` calendar months; t must be a month start.
std::int64_t add_months(std::int64_t month_start_s, int months);

// ISO 8601 UTC timestamps: YYYY-MM-DDTHH:MM:SS[.fff][Z]
double parse_iso8601(std::string_view text);
std::string format_iso8601(double t_s);

// Tip CSV: time_iso8601_utc,depth_mm
std::vector<TipEvent> read_tips(const std::filesystem::path& path);
std::vector<TipEvent> parse_tips(std::istream& in, const std::string& source_name = "<stream>");
std::string format_tips(std::span<const TipEvent> tips);

/// Site ids to drop, one per line; '#' starts a comment.
std::set<std::string> read_exclusions(const std::filesystem::path& path);

}  // namespace rainstat::gauge
