#include "rainstat/impact.hpp"

#include <algorithm>
#include <cmath>

#include "rainstat/errors.hpp"
#include "rainstat/parallel.hpp"
#include "rainstat/textio.hpp"

namespace rainstat::impact {

namespace {

// Neumaier compensated sum.
struct Accumulator {
  double sum = 0.0;
  double carry = 0.0;

  void add(double v) {
    const double t = sum + v;
    if (std::fabs(sum) >= std::fabs(v))
      carry += (sum - t) + v;
    else
      carry += (v - t) + sum;
    sum = t;
  }
  double value() const { return sum + carry; }
};

}  // namespace

raster::Grid rate_map(const raster::Grid& mt, const raster::Grid& p0,
                      const rainmodel::ModelParams& params, double p_pct, unsigned workers) {
  raster::require_aligned(mt.geometry(), p0.geometry(), "rate_map: Mt and P0 grids");
  if (!(p_pct > 0.0 && p_pct <= 100.0)) throw ArgumentError("p must lie in (0, 100]");
  params.validate();
  raster::Grid out(mt.geometry());
  const std::size_t nc = mt.ncols();
  parallel_for(mt.nrows(), workers, [&](std::size_t r0, std::size_t r1) {
    for (std::size_t i = r0 * nc; i < r1 * nc; ++i) {
      if (!mt.valid(i) || !p0.valid(i)) continue;
      const rainmodel::ClimatePoint c{mt[i], p0[i]};
      try {
        out[i] = rainmodel::rain_rate(p_pct, c, params);
      } catch (const ArgumentError& e) {
        throw DataError("rate_map: pixel (" + std::to_string(i / nc) + ", " +
                        std::to_string(i % nc) + "): " + e.what());
      }
    }
  });
  return out;
}

std::size_t HeavyMask::count() const noexcept {
  return static_cast<std::size_t>(std::count(heavy.begin(), heavy.end(), std::uint8_t{1}));
}

HeavyMask heavy_mask(const raster::Grid& rate, double threshold) {
  HeavyMask m{rate.geometry(), std::vector<std::uint8_t>(rate.size(), 0), 0};
  for (std::size_t i = 0; i < rate.size(); ++i) {
    if (!rate.valid(i))
      ++m.nodata;
    else if (rate[i] > threshold)
      m.heavy[i] = 1;
  }
  return m;
}

long long category_code(double value) {
  if (!(value >= 0.0) || value != std::floor(value) || value > 9.0e15)
    throw DataError("category value " + raster::format_number(value) +
                    " is not a non-negative integer");
  return static_cast<long long>(value);
}

ZonalPopulation zonal_population(const raster::Grid& population, const HeavyMask& mask,
                                 const raster::Grid& countries) {
  raster::require_aligned(population.geometry(), mask.geometry, "zonal_population: mask");
  raster::require_aligned(population.geometry(), countries.geometry(),
                          "zonal_population: country grid");
  std::map<long long, std::pair<Accumulator, Accumulator>> acc;
  Accumulator total, heavy;
  for (std::size_t i = 0; i < population.size(); ++i) {
    const long long code = countries.valid(i) ? category_code(countries[i]) : kUnassigned;
    const double pop = population.valid(i) ? population[i] : 0.0;
    if (pop < 0.0) throw DataError("negative population at cell " + std::to_string(i));
    auto& [t, h] = acc[code];
    t.add(pop);
    total.add(pop);
    if (mask.heavy[i]) {
      h.add(pop);
      heavy.add(pop);
    }
  }
  ZonalPopulation out;
  for (const auto& [code, pair] : acc)
    out.countries[code] = {pair.first.value(), pair.second.value()};
  out.grand = {total.value(), heavy.value()};
  return out;
}

std::vector<ZoneCoverage> zone_coverage(const raster::Grid& zones, const raster::Grid& population) {
  raster::require_aligned(zones.geometry(), population.geometry(), "zone_coverage: population");
  struct Tally {
    std::size_t land = 0, populated = 0;
    Accumulator pop;
  };
  std::map<long long, Tally> tallies;
  std::size_t land = 0, populated = 0;
  Accumulator pop_total;
  for (std::size_t i = 0; i < zones.size(); ++i) {
    if (!zones.valid(i)) continue;
    auto& t = tallies[category_code(zones[i])];
    const double pop = population.valid(i) ? population[i] : 0.0;
    if (pop < 0.0) throw DataError("negative population at cell " + std::to_string(i));
    ++t.land;
    ++land;
    if (pop > 0.0) {
      ++t.populated;
      ++populated;
    }
    t.pop.add(pop);
    pop_total.add(pop);
  }
  if (land == 0) throw EmptyDataError("zone grid has no valid pixels");

  const double total = pop_total.value();
  std::vector<ZoneCoverage> out;
  for (const auto& [code, t] : tallies) {
    ZoneCoverage z;
    z.code = code;
    z.land_pct = 100.0 * static_cast<double>(t.land) / static_cast<double>(land);
    z.populated_pct =
        populated ? 100.0 * static_cast<double>(t.populated) / static_cast<double>(populated) : 0.0;
    z.pop_pct = total > 0.0 ? 100.0 * t.pop.value() / total : 0.0;
    out.push_back(z);
  }
  return out;
}

const std::vector<RainZone>& zone_table() {
  static const std::vector<RainZone> table = {
      {'A', 8.0},  {'C', 15.0}, {'D', 19.0}, {'E', 22.0},  {'F', 28.0},  {'H', 32.0},
      {'J', 35.0}, {'K', 42.0}, {'M', 63.0}, {'N', 95.0}, {'P', 145.0}, {'Q', 115.0}};
  return table;
}

const RainZone& zone_for_code(long long code) {
  const auto& t = zone_table();
  if (code < 1 || code > static_cast<long long>(t.size()))
    throw DataError("unknown rain zone code " + std::to_string(code));
  return t[static_cast<std::size_t>(code - 1)];
}

std::string format_zonal_population(const ZonalPopulation& zp) {
  std::string out = "country_code,total_pop,heavy_pop\n";
  for (const auto& [code, p] : zp.countries) {
    out += (code == kUnassigned ? std::string("unassigned") : std::to_string(code)) + "," +
           raster::format_number(p.total) + "," + raster::format_number(p.heavy) + "\n";
  }
  out += "total," + raster::format_number(zp.grand.total) + "," +
         raster::format_number(zp.grand.heavy) + "\n";
  return out;
}

std::string format_zone_coverage(const std::vector<ZoneCoverage>& rows) {
  std::string out = "rain_zone,r001_mm_h,land_pct_px,pop_gt0_pct_px,pop_pct\n";
  for (const auto& z : rows) {
    const RainZone& zone = zone_for_code(z.code);
    out += std::string(1, zone.letter) + "," + raster::format_number(zone.r001_mm_h) + "," +
           textio::fixed(z.land_pct, 4) + "," + textio::fixed(z.populated_pct, 4) + "," +
           textio::fixed(z.pop_pct, 4) + "\n";
  }
  return out;
}

}  // namespace rainstat::impact
