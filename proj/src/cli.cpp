#include "rainstat/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "rainstat/climatology.hpp"
#include "rainstat/evaluation.hpp"
#include "rainstat/gauge.hpp"
#include "rainstat/impact.hpp"
#include "rainstat/parallel.hpp"
#include "rainstat/rainmodel.hpp"
#include "rainstat/raster.hpp"
#include "rainstat/textio.hpp"

#ifndef RAINSTAT_VERSION
#define RAINSTAT_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;

namespace rainstat::cli {

int exit_code(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::argument:
      return kExitUsage;
    case ErrorKind::solver:
      return kExitSolver;
    default:
      return kExitData;
  }
}

// ---------------------------------------------------------------------------
// Config

Config Config::load(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArgumentError("cannot open config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  std::string raw = buf.str();
  std::istringstream lines(raw);
  std::map<std::string, std::string> values;
  try {
    values = textio::parse_key_values(lines, path.string());
  } catch (const ParseError& e) {
    throw ArgumentError(std::string("config: ") + e.what());
  }
  return Config(std::move(values), path.parent_path(), std::move(raw));
}

Config::Config(std::map<std::string, std::string> values, fs::path base_dir, std::string raw_text)
    : values_(std::move(values)), base_(std::move(base_dir)), raw_(std::move(raw_text)) {}

void Config::allow_only(std::initializer_list<std::string_view> allowed) const {
  for (const auto& [key, value] : values_) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw ArgumentError("config: unknown key '" + key + "'");
  }
}

std::string Config::text(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ArgumentError("config: missing required key '" + key + "'");
  return it->second;
}

std::string Config::text_or(const std::string& key, const std::string& fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

double Config::number(const std::string& key) const {
  const std::string v = text(key);
  try {
    return textio::to_double(v, "config", 0, key);
  } catch (const ParseError&) {
    throw ArgumentError("config: key '" + key + "' is not a number: '" + v + "'");
  }
}

double Config::number_or(const std::string& key, double fallback) const {
  return has(key) ? number(key) : fallback;
}

std::size_t Config::count(const std::string& key) const {
  const std::string v = text(key);
  long long n = 0;
  try {
    n = textio::to_int(v, "config", 0, key);
  } catch (const ParseError&) {
    n = -1;
  }
  if (n < 0) throw ArgumentError("config: key '" + key + "' must be a non-negative integer");
  return static_cast<std::size_t>(n);
}

std::size_t Config::count_or(const std::string& key, std::size_t fallback) const {
  return has(key) ? count(key) : fallback;
}

std::vector<double> Config::list_or(const std::string& key, std::vector<double> fallback) const {
  if (!has(key)) return fallback;
  std::vector<double> out;
  const std::string v = text(key);
  for (auto tok : textio::split_csv(v)) {
    try {
      out.push_back(textio::to_double(tok, "config", 0, key));
    } catch (const ParseError&) {
      throw ArgumentError("config: key '" + key + "' has a non-numeric entry '" + std::string(tok) +
                          "'");
    }
  }
  if (out.empty()) throw ArgumentError("config: key '" + key + "' is empty");
  return out;
}

fs::path Config::resolve(const std::string& value) const {
  const fs::path p(value);
  return p.is_absolute() ? p : base_ / p;
}

fs::path Config::input(const std::string& key) {
  const fs::path p = resolve(text(key));
  if (!fs::is_regular_file(p)) throw DataError("input '" + key + "' not found: " + p.string());
  inputs_.emplace_back(key, p);
  return p;
}

std::optional<fs::path> Config::optional_input(const std::string& key) {
  if (!has(key)) return std::nullopt;
  return input(key);
}

fs::path Config::extra_input(const std::string& label, const fs::path& path) {
  if (!fs::is_regular_file(path)) throw DataError("input '" + label + "' not found: " + path.string());
  inputs_.emplace_back(label, path);
  return path;
}

fs::path Config::output_dir() const { return resolve(text("out_dir")); }

// ---------------------------------------------------------------------------
// OutputSet

void OutputSet::add(std::string name, std::string content) {
  files_.emplace_back(std::move(name), std::move(content));
}

void OutputSet::commit(const fs::path& dir) const {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create output directory " + dir.string() + ": " + ec.message());
  std::vector<fs::path> staged;
  auto cleanup = [&] {
    for (const auto& p : staged) fs::remove(p, ec);
  };
  for (const auto& [name, content] : files_) {
    const fs::path tmp = dir / (name + ".partial");
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (out) staged.push_back(tmp);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.close();
    if (!out) {
      cleanup();
      throw DataError("cannot write " + tmp.string());
    }
  }
  for (std::size_t i = 0; i < files_.size(); ++i) {
    fs::rename(staged[i], dir / files_[i].first, ec);
    if (ec) {
      cleanup();
      throw DataError("cannot move output into place: " + ec.message());
    }
  }
}

// ---------------------------------------------------------------------------
// Commands

namespace {

using rainmodel::ClimatePoint;
using rainmodel::SiteStatistics;

std::vector<double> default_ladder() {
  return {rainmodel::kStandardLadder.begin(), rainmodel::kStandardLadder.end()};
}

std::vector<double> ladder_from(const Config& cfg) {
  auto ladder = cfg.list_or("ladder", default_ladder());
  for (double p : ladder) {
    if (!(p > 0.0 && p <= 100.0)) throw ArgumentError("config: ladder entries must lie in (0, 100]");
  }
  if (!std::is_sorted(ladder.begin(), ladder.end()) ||
      std::adjacent_find(ladder.begin(), ladder.end()) != ladder.end())
    throw ArgumentError("config: ladder must be strictly ascending");
  return ladder;
}

std::string kv(const std::string& key, const std::string& value) { return key + "=" + value + "\n"; }

std::set<std::string> exclusions(Config& cfg) {
  if (auto p = cfg.optional_input("exclude")) return gauge::read_exclusions(*p);
  return {};
}

// site_id,mt_mm,p0_pct
std::map<std::string, ClimatePoint> read_climate_table(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  textio::CsvReader csv(in, path.string(), {"site_id", "mt_mm", "p0_pct"});
  std::map<std::string, ClimatePoint> out;
  std::vector<std::string_view> f;
  while (csv.next(f)) {
    ClimatePoint c{csv.number(f[1], "mt_mm"), csv.number(f[2], "p0_pct")};
    try {
      c.validate();
    } catch (const ArgumentError& e) {
      throw ParseError(path.string(), csv.line(), e.what());
    }
    if (!out.emplace(std::string(f[0]), c).second)
      throw ParseError(path.string(), csv.line(), "duplicate site '" + std::string(f[0]) + "'");
  }
  return out;
}

ClimatePoint sample_climate(const raster::Grid& mt, const raster::Grid& p0, const std::string& site,
                            double lat, double lon) {
  double m = 0.0, p = 0.0;
  try {
    m = raster::sample_bilinear(mt, lat, lon);
    p = raster::sample_bilinear(p0, lat, lon);
  } catch (const RangeError& e) {
    throw DataError("site " + site + ": " + e.what());
  }
  if (m == mt.nodata() || p == p0.nodata())
    throw DataError("site " + site + " falls on nodata climatology");
  ClimatePoint c{m, p};
  try {
    c.validate();
  } catch (const ArgumentError& e) {
    throw DataError("site " + site + ": " + e.what());
  }
  return c;
}

struct ClimateGrids {
  raster::Grid mt, p0;
};

ClimateGrids read_climate_grids(const fs::path& mt_path, const fs::path& p0_path) {
  ClimateGrids g{raster::read_grid(mt_path), raster::read_grid(p0_path)};
  raster::require_aligned(g.mt.geometry(), g.p0.geometry(), "Mt and P0 grids");
  return g;
}

OutputSet cmd_fit(Config& cfg, const RunContext& ctx) {
  cfg.allow_only({"sites", "climate", "mt_grid", "p0_grid", "exclude", "refine_starts",
                  "max_iterations", "tolerance", "out_dir"});
  const fs::path sites_path = cfg.input("sites");
  std::optional<fs::path> climate_path, mt_path, p0_path;
  if (cfg.has("climate")) {
    if (cfg.has("mt_grid") || cfg.has("p0_grid"))
      throw ArgumentError("config: give either 'climate' or 'mt_grid'/'p0_grid', not both");
    climate_path = cfg.input("climate");
  } else {
    mt_path = cfg.input("mt_grid");
    p0_path = cfg.input("p0_grid");
  }
  const auto excluded = exclusions(cfg);
  rainmodel::FitOptions opt;
  opt.seed = ctx.seed;
  opt.workers = ctx.threads;
  opt.refine_starts = cfg.count_or("refine_starts", opt.refine_starts);
  opt.max_iterations = cfg.count_or("max_iterations", opt.max_iterations);
  opt.tolerance = cfg.number_or("tolerance", opt.tolerance);
  if (opt.refine_starts == 0) throw ArgumentError("config: refine_starts must be at least 1");
  if (!(opt.tolerance > 0.0)) throw ArgumentError("config: tolerance must be positive");

  std::vector<rainmodel::TrainingSite> training;
  {
    const auto sites = rainmodel::read_site_statistics(sites_path);
    std::map<std::string, ClimatePoint> table;
    std::optional<ClimateGrids> grids;
    if (climate_path)
      table = read_climate_table(*climate_path);
    else
      grids = read_climate_grids(*mt_path, *p0_path);
    for (const auto& s : sites) {
      if (excluded.count(s.site_id)) continue;
      ClimatePoint c;
      if (grids) {
        c = sample_climate(grids->mt, grids->p0, s.site_id, s.lat, s.lon);
      } else {
        auto it = table.find(s.site_id);
        if (it == table.end()) throw DataError("no climate entry for site " + s.site_id);
        c = it->second;
      }
      training.push_back({s, c});
    }
  }
  if (training.empty()) throw EmptyDataError("no training sites left after exclusions");

  const auto fit = rainmodel::fit_params(training, opt);

  std::string residuals = "site_id,p_percent,observed,predicted,rel_error\n";
  std::size_t rows = 0;
  for (const auto& t : training) {
    for (const auto& pt : t.stats.points) {
      if (!(pt.rate_mm_h > 0.0)) continue;
      const double pred = rainmodel::rain_rate(pt.p_pct, t.climate, fit.params);
      residuals += t.stats.site_id + "," + raster::format_number(pt.p_pct) + "," +
                   raster::format_number(pt.rate_mm_h) + "," + textio::fixed(pred, 6) + "," +
                   textio::fixed((pred - pt.rate_mm_h) / pt.rate_mm_h, 6) + "\n";
      ++rows;
    }
  }

  std::string report;
  report += kv("sites", std::to_string(training.size()));
  report += kv("excluded", std::to_string(excluded.size()));
  report += kv("residuals", std::to_string(rows));
  report += kv("objective", raster::format_number(fit.objective));
  report += kv("starts", std::to_string(fit.starts));
  report += kv("converged", std::to_string(fit.converged));

  OutputSet out;
  out.add("params.txt", rainmodel::format_params(fit.params));
  out.add("residuals.csv", std::move(residuals));
  out.add("report.txt", std::move(report));
  return out;
}

// site_id,lat,lon,country
struct Location {
  std::string site_id, country;
  double lat = 0.0, lon = 0.0;
};

std::vector<Location> read_locations(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  textio::CsvReader csv(in, path.string(), {"site_id", "lat", "lon", "country"});
  std::vector<Location> out;
  std::vector<std::string_view> f;
  while (csv.next(f)) {
    out.push_back({std::string(f[0]), std::string(f[3]), csv.number(f[1], "lat"),
                   csv.number(f[2], "lon")});
  }
  return out;
}

OutputSet cmd_predict(Config& cfg, const RunContext&) {
  cfg.allow_only({"params", "mt_grid", "p0_grid", "locations", "ladder", "out_dir"});
  const auto params_path = cfg.input("params");
  const auto mt_path = cfg.input("mt_grid");
  const auto p0_path = cfg.input("p0_grid");
  const auto loc_path = cfg.input("locations");
  const auto ladder = ladder_from(cfg);

  const auto params = rainmodel::read_params(params_path);
  const auto grids = read_climate_grids(mt_path, p0_path);
  std::vector<SiteStatistics> sites;
  for (const auto& loc : read_locations(loc_path)) {
    const ClimatePoint c = sample_climate(grids.mt, grids.p0, loc.site_id, loc.lat, loc.lon);
    sites.push_back({loc.site_id, loc.lat, loc.lon, loc.country, 0.0,
                     rainmodel::estimate_site_curve(c, params, ladder)});
  }
  OutputSet out;
  out.add("sites.csv", rainmodel::format_site_statistics(sites));
  return out;
}

OutputSet cmd_build_clim(Config& cfg, const RunContext& ctx) {
  cfg.allow_only({"observations", "reference_mt", "elevation", "ncols", "nrows", "xll", "yll",
                  "cell", "nodata", "k_uniform", "k_gauss", "sigma", "dedup_window_s",
                  "out_dir"});
  climatology::ClimatologyConfig cc;
  cc.observations = cfg.input("observations");
  cc.reference_mt = cfg.input("reference_mt");
  cc.elevation = cfg.input("elevation");
  cc.geometry.ncols = cfg.count("ncols");
  cc.geometry.nrows = cfg.count("nrows");
  cc.geometry.xll = cfg.number("xll");
  cc.geometry.yll = cfg.number("yll");
  cc.geometry.cell = cfg.number("cell");
  cc.geometry.nodata = cfg.number_or("nodata", raster::kDefaultNodata);
  cc.geometry.validate();
  cc.k_uniform = cfg.count_or("k_uniform", cc.k_uniform);
  cc.k_gauss = cfg.count_or("k_gauss", cc.k_gauss);
  if (cfg.has("sigma")) cc.sigma = cfg.number("sigma");
  cc.dedup_window_s = cfg.number_or("dedup_window_s", cc.dedup_window_s);
  if (cc.k_uniform % 2 == 0 || cc.k_gauss % 2 == 0)
    throw ArgumentError("config: window sizes must be odd");
  if (cc.sigma && !(*cc.sigma > 0.0)) throw ArgumentError("config: sigma must be positive");
  if (!(cc.dedup_window_s >= 0.0)) throw ArgumentError("config: dedup_window_s must be >= 0");
  cc.workers = ctx.threads;

  auto result = climatology::build_climatology(cc);
  OutputSet out;
  out.add("mt.asc", raster::format_grid(result.mt));
  out.add("p0.asc", raster::format_grid(result.p0));
  out.add("report.txt", std::move(result.report));
  return out;
}

// site_id,lat,lon,country,tips_file
struct GaugeStation {
  Location where;
  fs::path tips;
};

struct GaugeResult {
  std::optional<SiteStatistics> stats;
  std::size_t tips = 0, minutes = 0, qc_invalid = 0, selected_minutes = 0;
};

GaugeResult process_station(const GaugeStation& st, std::span<const double> ladder,
                            std::size_t min_count) {
  GaugeResult r;
  const auto tips = gauge::read_tips(st.tips);
  r.tips = tips.size();
  if (tips.empty()) return r;
  std::int64_t start = gauge::month_start(static_cast<std::int64_t>(std::floor(tips.front().time_s)));
  if (static_cast<double>(start) >= tips.front().time_s) start = gauge::add_months(start, -1);
  const std::int64_t end =
      gauge::add_months(gauge::month_start(static_cast<std::int64_t>(std::floor(tips.back().time_s))), 1);
  const gauge::MinuteSpan span{start, static_cast<std::size_t>((end - start) / 60)};
  gauge::MinuteSeries series;
  try {
    series = gauge::qc_filter(gauge::tips_to_rates(tips, span));
  } catch (const Error& e) {
    throw DataError(st.where.site_id + ": " + e.what());
  }
  r.minutes = series.size();
  r.qc_invalid = series.size() - series.valid_count();
  const auto selected = gauge::select_periods(series);
  if (!selected) return r;
  r.selected_minutes = selected->size();
  auto points = gauge::exceedance_stats(*selected, ladder, min_count);
  if (points.empty()) return r;
  r.stats = SiteStatistics{st.where.site_id, st.where.lat, st.where.lon, st.where.country,
                           static_cast<double>(selected->size()) / gauge::kMinutesPerYear,
                           std::move(points)};
  return r;
}

OutputSet cmd_gauge(Config& cfg, const RunContext& ctx) {
  cfg.allow_only({"stations", "exclude", "ladder", "min_count", "out_dir"});
  const auto stations_path = cfg.input("stations");
  const auto excluded = exclusions(cfg);
  const auto ladder = ladder_from(cfg);
  const std::size_t min_count = cfg.count_or("min_count", 20);

  std::vector<GaugeStation> stations;
  {
    std::ifstream in(stations_path);
    if (!in) throw DataError("cannot open " + stations_path.string());
    textio::CsvReader csv(in, stations_path.string(),
                          {"site_id", "lat", "lon", "country", "tips_file"});
    std::vector<std::string_view> f;
    std::set<std::string> seen;
    while (csv.next(f)) {
      GaugeStation st{{std::string(f[0]), std::string(f[3]), csv.number(f[1], "lat"),
                       csv.number(f[2], "lon")},
                      {}};
      if (!seen.insert(st.where.site_id).second)
        throw ParseError(stations_path.string(), csv.line(), "duplicate site '" + st.where.site_id + "'");
      if (excluded.count(st.where.site_id)) continue;
      fs::path tips{std::string(f[4])};
      if (tips.is_relative()) tips = stations_path.parent_path() / tips;
      st.tips = cfg.extra_input("tips." + st.where.site_id, tips);
      stations.push_back(std::move(st));
    }
  }

  std::vector<GaugeResult> results(stations.size());
  parallel_for(stations.size(), ctx.threads, [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) results[i] = process_station(stations[i], ladder, min_count);
  });

  std::vector<SiteStatistics> sites;
  std::string report = kv("stations", std::to_string(stations.size())) +
                       kv("excluded", std::to_string(excluded.size()));
  std::size_t retained = 0;
  std::string detail;
  for (std::size_t i = 0; i < stations.size(); ++i) {
    const auto& r = results[i];
    const std::string& id = stations[i].where.site_id;
    detail += kv("site." + id + ".tips", std::to_string(r.tips));
    detail += kv("site." + id + ".minutes", std::to_string(r.minutes));
    detail += kv("site." + id + ".qc_invalid", std::to_string(r.qc_invalid));
    detail += kv("site." + id + ".selected_years",
                 textio::fixed(static_cast<double>(r.selected_minutes) / gauge::kMinutesPerYear, 4));
    detail += kv("site." + id + ".rungs", std::to_string(r.stats ? r.stats->points.size() : 0));
    if (r.stats) {
      sites.push_back(*r.stats);
      ++retained;
    }
  }
  report += kv("retained", std::to_string(retained)) + detail;

  OutputSet out;
  out.add("sites.csv", rainmodel::format_site_statistics(sites));
  out.add("report.txt", std::move(report));
  return out;
}

OutputSet cmd_eval(Config& cfg, const RunContext&) {
  cfg.allow_only({"samples", "thresholds", "classify", "threshold", "grid", "stations", "out_dir"});
  const auto samples_path = cfg.optional_input("samples");
  const auto classify_path = cfg.optional_input("classify");
  std::optional<fs::path> grid_path, stations_path;
  if (cfg.has("grid") || cfg.has("stations")) {
    grid_path = cfg.input("grid");
    stations_path = cfg.input("stations");
  }
  if (!samples_path && !classify_path && !grid_path)
    throw ArgumentError("config: eval needs at least one of 'samples', 'classify' or 'grid'");
  const auto thresholds =
      cfg.list_or("thresholds", {0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0});
  const double heavy = cfg.number_or("threshold", evaluation::kHeavyThreshold);
  if (!std::is_sorted(thresholds.begin(), thresholds.end()))
    throw ArgumentError("config: thresholds must be ascending");

  OutputSet out;
  std::string report;
  if (samples_path) {
    const auto samples = evaluation::read_error_samples(*samples_path);
    if (samples.empty()) throw EmptyDataError("no error samples in " + samples_path->string());
    std::vector<double> rel, rel_pct, bias;
    for (const auto& s : samples) {
      const double e = evaluation::relative_error(s);
      rel.push_back(e);
      rel_pct.push_back(100.0 * e);
      bias.push_back(evaluation::bias_error(s));
    }
    report += evaluation::format_summary("rel_error_pct", evaluation::p311_summary(rel_pct));
    report += evaluation::format_summary("bias_mm_h", evaluation::p311_summary(bias));
    out.add("rec.csv", evaluation::format_rec(thresholds, evaluation::rec_curve(rel, thresholds)));
  }
  if (classify_path) {
    const auto labels = evaluation::read_site_labels(*classify_path, heavy);
    if (labels.empty()) throw EmptyDataError("no sites in " + classify_path->string());
    std::vector<bool> actual, predicted;
    for (const auto& l : labels) {
      actual.push_back(l.actual);
      predicted.push_back(l.predicted);
    }
    report += evaluation::format_confusion("by_site", evaluation::confusion(actual, predicted));
    actual.clear();
    predicted.clear();
    for (const auto& [country, l] : evaluation::by_country(labels)) {
      actual.push_back(l.actual);
      predicted.push_back(l.predicted);
    }
    report += evaluation::format_confusion("by_country", evaluation::confusion(actual, predicted));
  }
  if (grid_path) {
    const auto grid = raster::read_grid(*grid_path);
    const auto stations = evaluation::read_stations(*stations_path);
    std::vector<evaluation::Station> inside;
    for (const auto& s : stations) {
      if (!grid.geometry().contains(s.lat, s.lon))
        throw DataError("station " + s.site_id + " lies outside the grid");
      inside.push_back(s);
    }
    auto cmp = evaluation::station_comparison(grid, inside);
    for (auto& e : cmp.errors) e *= 100.0;
    report += evaluation::format_summary("station_rel_error_pct", evaluation::p311_summary(cmp.errors));
    report += kv("station_skipped", std::to_string(cmp.skipped));
  }
  out.add("report.txt", std::move(report));
  return out;
}

OutputSet cmd_impact(Config& cfg, const RunContext& ctx) {
  cfg.allow_only({"mt_grid", "p0_grid", "params", "p", "threshold", "population", "countries",
                  "zones", "out_dir"});
  const auto mt_path = cfg.input("mt_grid");
  const auto p0_path = cfg.input("p0_grid");
  const auto params_path = cfg.input("params");
  const auto pop_path = cfg.input("population");
  const auto countries_path = cfg.input("countries");
  const auto zones_path = cfg.optional_input("zones");
  const double p = cfg.number_or("p", 0.01);
  const double threshold = cfg.number_or("threshold", evaluation::kHeavyThreshold);
  if (!(p > 0.0 && p <= 100.0)) throw ArgumentError("config: p must lie in (0, 100]");

  const auto params = rainmodel::read_params(params_path);
  const auto grids = read_climate_grids(mt_path, p0_path);
  const auto pop = raster::read_grid(pop_path);
  const auto countries = raster::read_grid(countries_path);

  const auto rate = impact::rate_map(grids.mt, grids.p0, params, p, ctx.threads);
  const auto mask = impact::heavy_mask(rate, threshold);
  const auto zp = impact::zonal_population(pop, mask, countries);

  OutputSet out;
  out.add("rate.asc", raster::format_grid(rate));
  out.add("impact.csv", impact::format_zonal_population(zp));
  if (zones_path) {
    const auto zones = raster::read_grid(*zones_path);
    out.add("zones.csv", impact::format_zone_coverage(impact::zone_coverage(zones, pop)));
  }
  out.add("report.txt", kv("p_percent", raster::format_number(p)) +
                            kv("threshold_mm_h", raster::format_number(threshold)) +
                            kv("heavy_pixels", std::to_string(mask.count())) +
                            kv("nodata_pixels", std::to_string(mask.nodata)));
  return out;
}

std::string manifest(const std::string& command, const Config& cfg, const RunContext& ctx,
                     const OutputSet& outputs) {
  std::string m;
  m += kv("command", command);
  m += kv("version", RAINSTAT_VERSION);
  m += kv("seed", std::to_string(ctx.seed));
  m += kv("config_fnv1a", textio::fnv1a_hex(cfg.raw_text()));
  for (const auto& [label, path] : cfg.inputs()) {
    m += kv("input." + label, path.filename().string() + " " + textio::fnv1a_hex(textio::slurp(path)));
  }
  for (const auto& [name, content] : outputs.files())
    m += kv("output." + name, textio::fnv1a_hex(content));
  return m;
}

}  // namespace

OutputSet run_command(const std::string& command, Config& config, const RunContext& context) {
  OutputSet out;
  if (command == "fit")
    out = cmd_fit(config, context);
  else if (command == "predict")
    out = cmd_predict(config, context);
  else if (command == "build-clim")
    out = cmd_build_clim(config, context);
  else if (command == "gauge")
    out = cmd_gauge(config, context);
  else if (command == "eval")
    out = cmd_eval(config, context);
  else if (command == "impact")
    out = cmd_impact(config, context);
  else
    throw ArgumentError("unknown subcommand '" + command + "'");
  out.add("manifest.txt", manifest(command, config, context, out));
  return out;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Rain-rate exceedance statistics toolkit", "rainstat"};
  app.set_version_flag("--version", RAINSTAT_VERSION);
  std::string config_path;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  app.add_option("--config", config_path, "flat key=value run configuration")->required();
  app.add_option("--seed", seed, "seed for every random choice");
  app.add_option("--threads", threads, "worker threads")->check(CLI::Range(1u, 1024u));
  app.require_subcommand(1, 1);
  app.fallthrough();
  const std::pair<const char*, const char*> commands[] = {
      {"fit", "fit model parameters to site statistics"},
      {"predict", "estimate site curves from climatology grids"},
      {"build-clim", "build Mt/P0 grids from footprint observations"},
      {"gauge", "derive site statistics from tipping-bucket records"},
      {"eval", "error summaries, REC curve and classification scores"},
      {"impact", "rate map and population tabulations"}};
  for (const auto& [name, help] : commands) app.add_subcommand(name, help);

  std::vector<const char*> argv{"rainstat"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    return rc == 0 ? kExitOk : kExitUsage;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  try {
    Config cfg = Config::load(config_path);
    const fs::path out_dir = cfg.output_dir();
    set_default_workers(threads);
    const RunContext ctx{seed, threads};
    const OutputSet outputs = run_command(command, cfg, ctx);
    outputs.commit(out_dir);
    out << command << ": wrote " << outputs.files().size() << " files to " << out_dir.string()
        << "\n";
    return kExitOk;
  } catch (const Error& e) {
    err << "rainstat " << command << ": " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    err << "rainstat " << command << ": " << e.what() << "\n";
    return kExitData;
  }
}

}  // namespace rainstat::cli
