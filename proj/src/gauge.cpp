#include "rainstat/gauge.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "rainstat/errors.hpp"
#include "rainstat/textio.hpp"

namespace rainstat::gauge {

std::size_t MinuteSeries::valid_count() const noexcept {
  return static_cast<std::size_t>(std::count(valid.begin(), valid.end(), std::uint8_t{1}));
}

namespace {

// Natural cubic spline through (x[i], y[i]).
class NaturalSpline {
 public:
  NaturalSpline(std::vector<double> x, std::vector<double> y)
      : x_(std::move(x)), y_(std::move(y)), m_(x_.size(), 0.0) {
    const std::size_t n = x_.size();
    if (n < 3) return;
    // Tridiagonal system for the interior second derivatives (Thomas).
    std::vector<double> diag(n, 0.0), upper(n, 0.0), rhs(n, 0.0);
    for (std::size_t i = 1; i + 1 < n; ++i) {
      const double h0 = x_[i] - x_[i - 1], h1 = x_[i + 1] - x_[i];
      diag[i] = 2.0 * (h0 + h1);
      upper[i] = h1;
      rhs[i] = 6.0 * ((y_[i + 1] - y_[i]) / h1 - (y_[i] - y_[i - 1]) / h0);
    }
    for (std::size_t i = 2; i + 1 < n; ++i) {
      const double lower = x_[i] - x_[i - 1];
      const double w = lower / diag[i - 1];
      diag[i] -= w * upper[i - 1];
      rhs[i] -= w * rhs[i - 1];
    }
    for (std::size_t i = n - 2; i >= 1; --i) {
      m_[i] = (rhs[i] - upper[i] * m_[i + 1]) / diag[i];
      if (i == 1) break;
    }
  }

  double operator()(double t) const {
    if (t <= x_.front()) return y_.front();
    if (t >= x_.back()) return y_.back();
    const auto it = std::upper_bound(x_.begin(), x_.end(), t);
    const std::size_t i = static_cast<std::size_t>(it - x_.begin()) - 1;
    const double h = x_[i + 1] - x_[i];
    const double a = (x_[i + 1] - t) / h, b = (t - x_[i]) / h;
    return a * y_[i] + b * y_[i + 1] +
           ((a * a * a - a) * m_[i] + (b * b * b - b) * m_[i + 1]) * h * h / 6.0;
  }

 private:
  std::vector<double> x_, y_, m_;
};

void add_event(std::span<const TipEvent> tips, const MinuteSpan& span, std::vector<double>& rates) {
  const std::size_t n = tips.size();
  double lead = n >= 2 ? (tips[n - 1].time_s - tips[0].time_s) / static_cast<double>(n - 1) : 60.0;
  lead = std::min({lead, kEventGapS, tips[0].time_s - static_cast<double>(span.start_s)});

  std::vector<double> x{tips[0].time_s - lead}, y{0.0};
  double total = 0.0;
  for (const auto& tip : tips) {
    total += tip.depth_mm;
    x.push_back(tip.time_s);
    y.push_back(total);
  }
  const NaturalSpline spline(x, y);
  const double t0 = x.front(), t1 = x.back();
  const double origin = static_cast<double>(span.start_s);
  const auto first = static_cast<std::size_t>(std::floor((t0 - origin) / 60.0));
  const auto last = std::min(span.minutes - 1, static_cast<std::size_t>(std::ceil((t1 - origin) / 60.0)));

  std::vector<double> depth;
  depth.reserve(last - first + 1);
  double kept = 0.0;
  for (std::size_t m = first; m <= last; ++m) {
    const double a = std::max(origin + 60.0 * static_cast<double>(m), t0);
    const double b = std::min(origin + 60.0 * static_cast<double>(m + 1), t1);
    const double d = b > a ? std::max(0.0, spline(b) - spline(a)) : 0.0;
    depth.push_back(d);
    kept += d;
  }
  const double scale = kept > 0.0 ? total / kept : 0.0;
  for (std::size_t m = first; m <= last; ++m) rates[m] += depth[m - first] * scale * 60.0;
}

}  // namespace

MinuteSeries tips_to_rates(std::span<const TipEvent> events, const MinuteSpan& span) {
  if (span.start_s % 60 != 0) throw ArgumentError("series must start on a whole minute");
  MinuteSeries out{span.start_s, std::vector<double>(span.minutes, 0.0),
                   std::vector<std::uint8_t>(span.minutes, 1)};
  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto& e = events[i];
    if (!(e.depth_mm > 0.0) || !std::isfinite(e.depth_mm))
      throw DataError("tip " + std::to_string(i) + ": depth must be positive");
    if (!(e.time_s > static_cast<double>(span.start_s)) || e.time_s > static_cast<double>(span.end_s()))
      throw DataError("tip " + std::to_string(i) + " lies outside the series span");
    if (i > 0 && !(e.time_s > events[i - 1].time_s))
      throw DataError("tip times must be strictly increasing (tip " + std::to_string(i) + ")");
  }
  std::size_t begin = 0;
  for (std::size_t i = 1; i <= events.size(); ++i) {
    if (i == events.size() || events[i].time_s - events[i - 1].time_s > kEventGapS) {
      add_event(events.subspan(begin, i - begin), span, out.rates);
      begin = i;
    }
  }
  return out;
}

MinuteSeries tips_to_rates(std::span<const double> tip_times_s, double bucket_mm,
                           const MinuteSpan& span) {
  if (!(bucket_mm > 0.0)) throw ArgumentError("bucket size must be positive");
  std::vector<TipEvent> events;
  events.reserve(tip_times_s.size());
  for (double t : tip_times_s) events.push_back({t, bucket_mm});
  return tips_to_rates(events, span);
}

MinuteSeries qc_filter(MinuteSeries series) {
  for (std::size_t i = 0; i < series.size(); ++i) {
    if (series.rates[i] > kQcCapMmH) series.valid[i] = 0;
  }
  return series;
}

// ---------------------------------------------------------------------------
// Calendar helpers

namespace {
using namespace std::chrono;

sys_seconds to_sys(std::int64_t t) { return sys_seconds{seconds{t}}; }
}  // namespace

std::int64_t month_start(std::int64_t t_s) {
  const auto day = floor<days>(to_sys(t_s));
  const year_month_day ymd{day};
  return sys_seconds{sys_days{ymd.year() / ymd.month() / 1}}.time_since_epoch().count();
}

std::int64_t add_months(std::int64_t month_start_s, int months) {
  const year_month_day ymd{floor<days>(to_sys(month_start_s))};
  const year_month ym = ymd.year() / ymd.month() + std::chrono::months{months};
  return sys_seconds{sys_days{ym / 1}}.time_since_epoch().count();
}

std::optional<MinuteSeries> select_periods(const MinuteSeries& series) {
  const std::size_t n = series.size();
  std::int64_t first = month_start(series.start_s);
  if (first < series.start_s) first = add_months(first, 1);

  std::vector<std::size_t> prefix(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + (series.valid[i] ? 1 : 0);

  // Qualification flag per whole 12-month period inside the series.
  std::vector<std::pair<std::size_t, std::size_t>> bounds;  // minute index [begin, end)
  std::vector<bool> good;
  for (int k = 0;; ++k) {
    const std::int64_t a = add_months(first, 12 * k), b = add_months(first, 12 * (k + 1));
    const auto ia = static_cast<std::size_t>((a - series.start_s) / 60);
    const auto ib = static_cast<std::size_t>((b - series.start_s) / 60);
    if (ib > n) break;
    const std::size_t total = ib - ia, ok = prefix[ib] - prefix[ia];
    bounds.emplace_back(ia, ib);
    good.push_back(10 * ok > 9 * total);
  }

  std::size_t best_start = 0, best_len = 0;
  for (std::size_t i = 0; i < good.size();) {
    if (!good[i]) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < good.size() && good[j]) ++j;
    if (j - i > best_len) {
      best_start = i;
      best_len = j - i;
    }
    i = j;
  }
  if (best_len == 0) return std::nullopt;

  const std::size_t ia = bounds[best_start].first, ib = bounds[best_start + best_len - 1].second;
  MinuteSeries out;
  out.start_s = series.start_s + 60 * static_cast<std::int64_t>(ia);
  out.rates.assign(series.rates.begin() + static_cast<std::ptrdiff_t>(ia),
                   series.rates.begin() + static_cast<std::ptrdiff_t>(ib));
  out.valid.assign(series.valid.begin() + static_cast<std::ptrdiff_t>(ia),
                   series.valid.begin() + static_cast<std::ptrdiff_t>(ib));
  return out;
}

std::vector<rainmodel::RatePoint> exceedance_stats(const MinuteSeries& series,
                                                   std::span<const double> ladder,
                                                   std::size_t min_count) {
  std::vector<double> sorted;
  sorted.reserve(series.size());
  for (std::size_t i = 0; i < series.size(); ++i)
    if (series.valid[i]) sorted.push_back(series.rates[i]);
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  const double n = static_cast<double>(sorted.size());

  std::vector<rainmodel::RatePoint> out;
  for (double p : ladder) {
    // The ladder's decimal rungs are inexact in binary; a relative nudge of
    // 1e-12 keeps products such as 1% of 2000 at exactly 20.
    const double expected = p * n / 100.0 * (1.0 + 1e-12);
    if (expected < static_cast<double>(min_count) || expected < 1.0) continue;
    const auto k = static_cast<std::size_t>(std::floor(expected));
    out.push_back({p, sorted[std::min(k, sorted.size()) - 1]});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Text formats

double parse_iso8601(std::string_view text) {
  auto fail = [&] { throw DataError("bad ISO 8601 timestamp '" + std::string(text) + "'"); };
  std::string_view s = textio::trim(text);
  if (!s.empty() && (s.back() == 'Z' || s.back() == 'z')) s.remove_suffix(1);
  if (s.size() < 19 || s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != ' ') || s[13] != ':' ||
      s[16] != ':')
    fail();
  auto num = [&](std::size_t pos, std::size_t len) {
    int v = 0;
    auto res = std::from_chars(s.data() + pos, s.data() + pos + len, v);
    if (res.ec != std::errc() || res.ptr != s.data() + pos + len) fail();
    return v;
  };
  const int yr = num(0, 4), mo = num(5, 2), dy = num(8, 2), hh = num(11, 2), mi = num(14, 2),
            ss = num(17, 2);
  double frac = 0.0;
  if (s.size() > 19) {
    if (s[19] != '.' || s.size() == 20) fail();
    auto res = std::from_chars(s.data() + 19, s.data() + s.size(), frac);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) fail();
  }
  using namespace std::chrono;
  const year_month_day ymd{year{yr}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(dy)}};
  if (!ymd.ok() || hh > 23 || mi > 59 || ss > 60) fail();
  const auto days_since = sys_days{ymd}.time_since_epoch().count();
  return static_cast<double>(days_since) * 86400.0 + hh * 3600.0 + mi * 60.0 + ss + frac;
}

std::string format_iso8601(double t_s) {
  using namespace std::chrono;
  const double whole = std::floor(t_s);
  long long micros = std::llround((t_s - whole) * 1e6);
  auto secs = static_cast<std::int64_t>(whole);
  if (micros >= 1000000) {
    micros -= 1000000;
    ++secs;
  }
  const auto day = floor<days>(to_sys(secs));
  const year_month_day ymd{day};
  const std::int64_t sod = secs - sys_seconds{day}.time_since_epoch().count();
  char buf[48];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02d", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(sod / 3600), static_cast<int>(sod / 60 % 60), static_cast<int>(sod % 60));
  std::string out(buf);
  if (micros != 0) {
    std::snprintf(buf, sizeof buf, ".%06lld", micros);
    out += buf;
  }
  return out + "Z";
}

std::vector<TipEvent> parse_tips(std::istream& in, const std::string& source_name) {
  textio::CsvReader csv(in, source_name, {"time_iso8601_utc", "depth_mm"});
  std::vector<TipEvent> out;
  std::vector<std::string_view> f;
  while (csv.next(f)) {
    TipEvent e;
    try {
      e.time_s = parse_iso8601(f[0]);
    } catch (const DataError& err) {
      throw ParseError(source_name, csv.line(), err.what());
    }
    e.depth_mm = csv.number(f[1], "depth_mm");
    out.push_back(e);
  }
  return out;
}

std::vector<TipEvent> read_tips(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open tip file " + path.string());
  return parse_tips(in, path.string());
}

std::string format_tips(std::span<const TipEvent> tips) {
  std::string out = "time_iso8601_utc,depth_mm\n";
  for (const auto& t : tips) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof buf, t.depth_mm);
    out += format_iso8601(t.time_s) + "," + std::string(buf, res.ptr) + "\n";
  }
  return out;
}

std::set<std::string> read_exclusions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open exclusion list " + path.string());
  std::set<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    auto t = textio::trim(line.substr(0, line.find('#')));
    if (!t.empty()) out.emplace(t);
  }
  return out;
}

}  // namespace rainstat::gauge
