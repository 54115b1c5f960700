#include "rainstat/climatology.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>

#include "rainstat/errors.hpp"
#include "rainstat/parallel.hpp"
#include "rainstat/textio.hpp"

namespace rainstat::climatology {

using raster::Grid;
using raster::GridGeometry;

namespace {

constexpr double kKmPerDegree = kEarthRadiusKm * std::numbers::pi / 180.0;

void check_observation(const SwathObservation& o, std::size_t index) {
  const bool finite = std::isfinite(o.time_s) && std::isfinite(o.lat) && std::isfinite(o.lon) &&
                      std::isfinite(o.nsrr_mm_h) && std::isfinite(o.diameter_km);
  if (!finite || o.lat < -90.0 || o.lat > 90.0 || o.nsrr_mm_h < 0.0 || o.diameter_km < 3.0 ||
      o.diameter_km > 6.0)
    throw DataError("observation " + std::to_string(index) + " has invalid fields");
}

// Inclusive index range, padded by one so rounding never drops a pixel the
// exact predicate would accept.
struct IndexRange {
  long lo, hi;
};

IndexRange candidate_rows(const SwathObservation& o, const GridGeometry& g) {
  const double dlat = 0.5 * o.diameter_km / kKmPerDegree;
  const double top = (g.north() - (o.lat + dlat)) / g.cell - 0.5;
  const double bottom = (g.north() - (o.lat - dlat)) / g.cell - 0.5;
  return {static_cast<long>(std::ceil(top)) - 1, static_cast<long>(std::floor(bottom)) + 1};
}

IndexRange candidate_cols(const SwathObservation& o, const GridGeometry& g) {
  const double coslat = std::cos(o.lat * std::numbers::pi / 180.0);
  const double dlon = coslat > 1e-12 ? 0.5 * o.diameter_km / (kKmPerDegree * coslat) : 360.0;
  const double left = (o.lon - dlon - g.xll) / g.cell - 0.5;
  const double right = (o.lon + dlon - g.xll) / g.cell - 0.5;
  return {static_cast<long>(std::ceil(left)) - 1, static_cast<long>(std::floor(right)) + 1};
}

}  // namespace

bool footprint_covers(const SwathObservation& obs, double pixel_lat, double pixel_lon) noexcept {
  const double coslat = std::cos(obs.lat * std::numbers::pi / 180.0);
  const double dy = (pixel_lat - obs.lat) * kKmPerDegree;
  const double dx = (pixel_lon - obs.lon) * kKmPerDegree * coslat;
  const double r = 0.5 * obs.diameter_km;
  return dx * dx + dy * dy <= r * r;
}

AccumulatorGrid render_observations(std::span<const SwathObservation> observations,
                                    const GridGeometry& geometry, double dedup_window_s,
                                    unsigned workers) {
  geometry.validate();
  if (!(dedup_window_s > 0.0)) throw ArgumentError("dedup window must be positive");
  for (std::size_t i = 0; i < observations.size(); ++i) {
    check_observation(observations[i], i);
    if (i > 0 && observations[i].time_s < observations[i - 1].time_s)
      throw DataError("observation stream not sorted by time at index " + std::to_string(i));
  }

  const std::size_t nc = geometry.ncols, nr = geometry.nrows;
  AccumulatorGrid acc;
  acc.geometry = geometry;
  acc.n_total.assign(geometry.size(), 0);
  acc.n_rain.assign(geometry.size(), 0);
  acc.sum_nsrr.assign(geometry.size(), 0.0);
  acc.observations = observations.size();

  std::vector<IndexRange> rows(observations.size()), cols(observations.size());
  for (std::size_t i = 0; i < observations.size(); ++i) {
    rows[i] = candidate_rows(observations[i], geometry);
    cols[i] = candidate_cols(observations[i], geometry);
  }

  const unsigned bands = static_cast<unsigned>(std::max<std::size_t>(1, std::min<std::size_t>(workers, nr)));
  std::vector<std::vector<char>> touched(bands, std::vector<char>(observations.size(), 0));

  // Each band owns a contiguous block of rows and replays the whole stream
  // for them, so every pixel sees its observations in time order.
  parallel_for(bands, bands, [&](std::size_t b0, std::size_t b1) {
    for (std::size_t band = b0; band < b1; ++band) {
      const std::size_t r0 = nr * band / bands, r1 = nr * (band + 1) / bands;
      const std::size_t cells = (r1 - r0) * nc;
      std::vector<double> start(cells, std::numeric_limits<double>::quiet_NaN());
      std::vector<double> peak(cells, 0.0);
      std::vector<char> rainy(cells, 0);
      auto commit = [&](std::size_t local) {
        const std::size_t idx = r0 * nc + local;
        ++acc.n_total[idx];
        if (rainy[local]) {
          ++acc.n_rain[idx];
          acc.sum_nsrr[idx] += peak[local];
        }
      };
      for (std::size_t i = 0; i < observations.size(); ++i) {
        const SwathObservation& o = observations[i];
        const long rlo = std::max<long>(rows[i].lo, static_cast<long>(r0));
        const long rhi = std::min<long>(rows[i].hi, static_cast<long>(r1) - 1);
        const long clo = std::max<long>(cols[i].lo, 0);
        const long chi = std::min<long>(cols[i].hi, static_cast<long>(nc) - 1);
        for (long r = rlo; r <= rhi; ++r) {
          const double plat = geometry.center_lat(static_cast<std::size_t>(r));
          for (long c = clo; c <= chi; ++c) {
            if (!footprint_covers(o, plat, geometry.center_lon(static_cast<std::size_t>(c))))
              continue;
            touched[band][i] = 1;
            const std::size_t local = (static_cast<std::size_t>(r) - r0) * nc + static_cast<std::size_t>(c);
            if (std::isnan(start[local]) || o.time_s - start[local] > dedup_window_s) {
              if (!std::isnan(start[local])) commit(local);
              start[local] = o.time_s;
              rainy[local] = 0;
              peak[local] = 0.0;
            }
            if (o.rain_certain) {
              rainy[local] = 1;
              peak[local] = std::max(peak[local], o.nsrr_mm_h);
            }
          }
        }
      }
      for (std::size_t local = 0; local < cells; ++local)
        if (!std::isnan(start[local])) commit(local);
    }
  });

  for (std::size_t i = 0; i < observations.size(); ++i) {
    bool any = false;
    for (const auto& t : touched) any = any || t[i];
    if (!any) ++acc.skipped;
  }
  return acc;
}

InitialEstimates initial_estimates(const AccumulatorGrid& acc) {
  InitialEstimates out{Grid(acc.geometry), Grid(acc.geometry), Grid(acc.geometry)};
  for (std::size_t i = 0; i < acc.geometry.size(); ++i) {
    if (acc.n_total[i] == 0) continue;
    const double p0 = 100.0 * acc.n_rain[i] / acc.n_total[i];
    const double cond = acc.n_rain[i] > 0 ? acc.sum_nsrr[i] / acc.n_rain[i] : 0.0;
    out.p0[i] = p0;
    out.cond_rate[i] = cond;
    out.mt[i] = cond * kHoursPerYear * (p0 / 100.0);
  }
  return out;
}

Grid elevation_weight(const Grid& elevation, std::size_t k) {
  const Grid iqr = raster::window_iqr(elevation, k);
  Grid out(elevation.geometry());
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!elevation.valid(i) || !iqr.valid(i)) continue;
    out[i] = std::clamp(1.0 / (1.0 + std::log1p(iqr[i])), 0.0, 1.0);
  }
  return out;
}

Grid merge_reference(const Grid& satellite, const Grid& reference, const Grid& weight,
                     std::size_t k) {
  raster::require_aligned(satellite.geometry(), reference.geometry(), "merge_reference reference");
  raster::require_aligned(satellite.geometry(), weight.geometry(), "merge_reference weight");
  const Grid smooth = raster::uniform_filter(reference, k);
  Grid out(satellite.geometry());
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!satellite.valid(i)) continue;
    const double sat = satellite[i];
    if (!smooth.valid(i) || !weight.valid(i)) {
      out[i] = sat;
      continue;
    }
    const double w = std::clamp(weight[i], 0.0, 1.0);
    const double ref = smooth[i];
    out[i] = std::clamp((1.0 - w) * sat + w * ref, std::min(sat, ref), std::max(sat, ref));
  }
  return out;
}

Finalized finalize(const Grid& mt, const Grid& p0, std::size_t k, std::optional<double> sigma) {
  raster::require_aligned(mt.geometry(), p0.geometry(), "finalize");
  const double s = sigma.value_or(raster::default_sigma(k));
  Finalized out{raster::gaussian_filter(mt, k, s), raster::gaussian_filter(p0, k, s)};
  for (std::size_t i = 0; i < out.mt.size(); ++i) {
    if (out.mt.valid(i)) out.mt[i] = std::max(out.mt[i], 0.0);
    if (out.p0.valid(i)) out.p0[i] = std::clamp(out.p0[i], 0.0, 100.0);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Pipeline

namespace {

template <class Fn>
auto stage(const char* name, Fn&& fn) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(name, e);
  }
}

std::string mean_text(const Grid& g) {
  return g.valid_count() == 0 ? "nodata" : textio::fixed(g.valid_mean(), 6);
}

Grid on_geometry(const Grid& g, const GridGeometry& geometry) {
  if (raster::aligned(g.geometry(), geometry)) return g;
  return raster::resample(g, geometry, raster::ResampleMethod::bilinear);
}

}  // namespace

ClimatologyResult build_climatology(std::span<const SwathObservation> observations,
                                    const GridGeometry& geometry, const Grid& reference,
                                    const Grid& elevation, const ClimatologyConfig& config) {
  const auto acc = stage("render", [&] {
    return render_observations(observations, geometry, config.dedup_window_s, config.workers);
  });
  const auto initial = stage("initial_estimates", [&] { return initial_estimates(acc); });
  const Grid ref = stage("resample_reference", [&] { return on_geometry(reference, geometry); });
  const Grid weight = stage("elevation_weight", [&] {
    return elevation_weight(on_geometry(elevation, geometry), config.k_uniform);
  });
  const Grid merged = stage("merge_reference", [&] {
    return merge_reference(initial.mt, ref, weight, config.k_uniform);
  });
  auto final_grids = stage("finalize", [&] {
    return finalize(merged, initial.p0, config.k_gauss, config.sigma);
  });

  std::size_t observed = 0;
  for (auto n : acc.n_total) observed += n > 0;
  std::string report;
  auto line = [&](const std::string& key, const std::string& value) {
    report += key + "=" + value + "\n";
  };
  line("observations", std::to_string(acc.observations));
  line("skipped", std::to_string(acc.skipped));
  line("pixels", std::to_string(geometry.size()));
  line("pixels_observed", std::to_string(observed));
  line("mean_mt_initial", mean_text(initial.mt));
  line("mean_p0_initial", mean_text(initial.p0));
  line("mean_cond_rate", mean_text(initial.cond_rate));
  line("mean_weight", mean_text(weight));
  line("mean_mt_merged", mean_text(merged));
  line("mean_mt_final", mean_text(final_grids.mt));
  line("mean_p0_final", mean_text(final_grids.p0));
  return {std::move(final_grids.mt), std::move(final_grids.p0), std::move(report)};
}

ClimatologyResult build_climatology(const ClimatologyConfig& config) {
  const auto observations = stage("read_observations", [&] { return read_observations(config.observations); });
  const Grid reference = stage("read_reference", [&] { return raster::read_grid(config.reference_mt); });
  const Grid elevation = stage("read_elevation", [&] { return raster::read_grid(config.elevation); });
  return build_climatology(observations, config.geometry, reference, elevation, config);
}

// ---------------------------------------------------------------------------
// Observation CSV

std::vector<SwathObservation> parse_observations(std::istream& in, const std::string& source_name) {
  textio::CsvReader csv(in, source_name,
                        {"time_s", "lat", "lon", "nsrr_mm_h", "rain_certain", "diameter_km"});
  std::vector<SwathObservation> out;
  std::vector<std::string_view> f;
  while (csv.next(f)) {
    SwathObservation o;
    o.time_s = csv.number(f[0], "time_s");
    o.lat = csv.number(f[1], "lat");
    o.lon = csv.number(f[2], "lon");
    o.nsrr_mm_h = csv.number(f[3], "nsrr_mm_h");
    if (f[4] != "0" && f[4] != "1") throw ParseError(source_name, csv.line(), "rain_certain must be 0 or 1");
    o.rain_certain = f[4] == "1";
    o.diameter_km = csv.number(f[5], "diameter_km");
    out.push_back(o);
  }
  return out;
}

std::vector<SwathObservation> read_observations(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open observations " + path.string());
  return parse_observations(in, path.string());
}

std::string format_observations(std::span<const SwathObservation> observations) {
  using raster::format_number;
  std::string out = "time_s,lat,lon,nsrr_mm_h,rain_certain,diameter_km\n";
  for (const auto& o : observations) {
    out += format_number(o.time_s) + "," + format_number(o.lat) + "," + format_number(o.lon) + "," +
           format_number(o.nsrr_mm_h) + "," + (o.rain_certain ? "1" : "0") + "," +
           format_number(o.diameter_km) + "\n";
  }
  return out;
}

}  // namespace rainstat::climatology
