#include "rainstat/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "rainstat/errors.hpp"
#include "rainstat/textio.hpp"

namespace rainstat::evaluation {

double relative_error(const ErrorSample& sample) {
  if (!(sample.observed > 0.0))
    throw ArgumentError("relative error needs a positive observed value (site " + sample.site_id +
                        ")");
  return (sample.predicted - sample.observed) / sample.observed;
}

double bias_error(const ErrorSample& sample) noexcept { return sample.predicted - sample.observed; }

Summary p311_summary(std::span<const double> errors) {
  if (errors.empty()) throw ArgumentError("error summary of an empty list");
  const double n = static_cast<double>(errors.size());
  double sum = 0.0;
  for (double e : errors) sum += e;
  const double mean = sum / n;
  double ss = 0.0;
  for (double e : errors) ss += (e - mean) * (e - mean);
  Summary s;
  s.mean = mean;
  s.sd = std::sqrt(ss / n);
  s.rms = std::sqrt(mean * mean + s.sd * s.sd);
  s.n = errors.size();
  return s;
}

std::vector<double> rec_curve(std::span<const double> errors, std::span<const double> thresholds) {
  if (errors.empty()) throw ArgumentError("REC curve of an empty error list");
  if (!std::is_sorted(thresholds.begin(), thresholds.end()))
    throw ArgumentError("REC thresholds must be ascending");
  std::vector<double> mags;
  mags.reserve(errors.size());
  for (double e : errors) mags.push_back(std::fabs(e));
  std::sort(mags.begin(), mags.end());
  std::vector<double> out;
  out.reserve(thresholds.size());
  for (double t : thresholds) {
    const auto below = std::upper_bound(mags.begin(), mags.end(), t) - mags.begin();
    out.push_back(static_cast<double>(below) / static_cast<double>(mags.size()));
  }
  return out;
}

bool classify_heavy(double r001_mm_h, double threshold) noexcept { return r001_mm_h > threshold; }

ConfusionMatrix confusion(const std::vector<bool>& actual, const std::vector<bool>& predicted) {
  if (actual.size() != predicted.size())
    throw ArgumentError("confusion: " + std::to_string(actual.size()) + " actual labels vs " +
                        std::to_string(predicted.size()) + " predictions");
  if (actual.empty()) throw ArgumentError("confusion of empty label lists");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    if (actual[i])
      ++(predicted[i] ? cm.tp : cm.fn);
    else
      ++(predicted[i] ? cm.fp : cm.tn);
  }
  return cm;
}

double accuracy(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw ArgumentError("accuracy of an empty confusion matrix");
  return static_cast<double>(cm.tp + cm.tn) / static_cast<double>(cm.total());
}

double mcc(const ConfusionMatrix& cm) noexcept {
  const double tp = static_cast<double>(cm.tp), tn = static_cast<double>(cm.tn);
  const double fp = static_cast<double>(cm.fp), fn = static_cast<double>(cm.fn);
  const double denom = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn);
  if (denom == 0.0) return 0.0;
  return (tp * tn - fp * fn) / std::sqrt(denom);
}

std::map<std::string, CountryLabel> by_country(std::span<const SiteLabel> sites) {
  std::map<std::string, CountryLabel> out;
  for (const auto& s : sites) {
    auto& c = out[s.country];
    c.actual = c.actual || s.actual;
    c.predicted = c.predicted || s.predicted;
  }
  return out;
}

StationComparison station_comparison(const raster::Grid& climatology,
                                     std::span<const Station> stations) {
  StationComparison out;
  for (const auto& st : stations) {
    const double v = raster::sample_bilinear(climatology, st.lat, st.lon);
    if (v == climatology.geometry().nodata) {
      ++out.skipped;
      continue;
    }
    out.errors.push_back(relative_error({st.site_id, 0.0, st.mt_mm, v}));
  }
  if (out.errors.empty())
    throw EmptyDataError("station comparison: all " + std::to_string(stations.size()) +
                         " stations fall on nodata");
  out.summary = p311_summary(out.errors);
  return out;
}

// ---------------------------------------------------------------------------

namespace {

std::ifstream open(const std::filesystem::path& path, const char* what) {
  std::ifstream in(path);
  if (!in) throw DataError(std::string("cannot open ") + what + " " + path.string());
  return in;
}

}  // namespace

std::vector<ErrorSample> parse_error_samples(std::istream& in, const std::string& source_name) {
  textio::CsvReader csv(in, source_name, {"site_id", "p_percent", "observed", "predicted"});
  std::vector<ErrorSample> out;
  std::vector<std::string_view> f;
  while (csv.next(f)) {
    ErrorSample s{std::string(f[0]), csv.number(f[1], "p_percent"), csv.number(f[2], "observed"),
                  csv.number(f[3], "predicted")};
    if (!(s.observed > 0.0))
      throw ParseError(source_name, csv.line(), "observed rate must be positive");
    if (!(s.predicted >= 0.0))
      throw ParseError(source_name, csv.line(), "predicted rate must be non-negative");
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<ErrorSample> read_error_samples(const std::filesystem::path& path) {
  auto in = open(path, "error samples");
  return parse_error_samples(in, path.string());
}

std::vector<SiteLabel> parse_site_labels(std::istream& in, const std::string& source_name,
                                         double threshold) {
  textio::CsvReader csv(in, source_name,
                        {"site_id", "country", "observed_r001", "predicted_r001"});
  std::vector<SiteLabel> out;
  std::vector<std::string_view> f;
  while (csv.next(f)) {
    const double obs = csv.number(f[2], "observed_r001");
    const double pred = csv.number(f[3], "predicted_r001");
    out.push_back({std::string(f[0]), std::string(f[1]), classify_heavy(obs, threshold),
                   classify_heavy(pred, threshold)});
  }
  return out;
}

std::vector<SiteLabel> read_site_labels(const std::filesystem::path& path, double threshold) {
  auto in = open(path, "classification table");
  return parse_site_labels(in, path.string(), threshold);
}

std::vector<Station> parse_stations(std::istream& in, const std::string& source_name) {
  textio::CsvReader csv(in, source_name, {"site_id", "lat", "lon", "mt_mm"});
  std::vector<Station> out;
  std::vector<std::string_view> f;
  while (csv.next(f)) {
    Station s{std::string(f[0]), csv.number(f[1], "lat"), csv.number(f[2], "lon"),
              csv.number(f[3], "mt_mm")};
    if (!(s.mt_mm > 0.0)) throw ParseError(source_name, csv.line(), "mt_mm must be positive");
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<Station> read_stations(const std::filesystem::path& path) {
  auto in = open(path, "station list");
  return parse_stations(in, path.string());
}

std::string format_summary(const std::string& prefix, const Summary& summary) {
  return prefix + "_n=" + std::to_string(summary.n) + "\n" + prefix +
         "_mean=" + textio::fixed(summary.mean, 4) + "\n" + prefix +
         "_sd=" + textio::fixed(summary.sd, 4) + "\n" + prefix +
         "_rms=" + textio::fixed(summary.rms, 4) + "\n";
}

std::string format_confusion(const std::string& prefix, const ConfusionMatrix& cm) {
  std::string out;
  out += prefix + "_tn=" + std::to_string(cm.tn) + "\n";
  out += prefix + "_fp=" + std::to_string(cm.fp) + "\n";
  out += prefix + "_fn=" + std::to_string(cm.fn) + "\n";
  out += prefix + "_tp=" + std::to_string(cm.tp) + "\n";
  out += prefix + "_accuracy=" + textio::fixed(accuracy(cm), 4) + "\n";
  out += prefix + "_mcc=" + textio::fixed(mcc(cm), 4) + "\n";
  return out;
}

std::string format_rec(std::span<const double> thresholds, std::span<const double> fractions) {
  std::string out = "threshold,fraction\n";
  for (std::size_t i = 0; i < thresholds.size() && i < fractions.size(); ++i)
    out += raster::format_number(thresholds[i]) + "," + textio::fixed(fractions[i], 4) + "\n";
  return out;
}

}  // namespace rainstat::evaluation
