#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "rainstat/climatology.hpp"
#include "rainstat/errors.hpp"
#include "support.hpp"

using namespace rainstat;
using namespace rainstat::climatology;
using raster::Grid;
using raster::GridGeometry;
using testing_support::geometry;

namespace {

constexpr double kPi = 3.14159265358979323846;

// Independent flat-earth distance test: 6371 km sphere, longitude shrunk by
// the cosine of the footprint latitude.
bool inside_disk(const SwathObservation& o, double lat, double lon) {
  const double km_per_deg = 6371.0 * kPi / 180.0;
  const double north = (lat - o.lat) * km_per_deg;
  const double east = (lon - o.lon) * km_per_deg * std::cos(o.lat * kPi / 180.0);
  return std::hypot(north, east) <= o.diameter_km / 2.0;
}

// Per-pixel replay of the windowing rule, one pixel at a time.
AccumulatorGrid brute_render(const std::vector<SwathObservation>& obs, const GridGeometry& g,
                             double window) {
  AccumulatorGrid acc;
  acc.geometry = g;
  acc.n_total.assign(g.size(), 0);
  acc.n_rain.assign(g.size(), 0);
  acc.sum_nsrr.assign(g.size(), 0.0);
  acc.observations = obs.size();
  std::vector<bool> used(obs.size(), false);
  for (std::size_t r = 0; r < g.nrows; ++r) {
    for (std::size_t c = 0; c < g.ncols; ++c) {
      const std::size_t i = r * g.ncols + c;
      bool open = false;
      double start = 0.0, peak = 0.0;
      bool rainy = false;
      for (std::size_t k = 0; k < obs.size(); ++k) {
        if (!inside_disk(obs[k], g.center_lat(r), g.center_lon(c))) continue;
        used[k] = true;
        if (!open || obs[k].time_s - start > window) {
          if (open) {
            ++acc.n_total[i];
            if (rainy) {
              ++acc.n_rain[i];
              acc.sum_nsrr[i] += peak;
            }
          }
          open = true;
          start = obs[k].time_s;
          rainy = false;
          peak = 0.0;
        }
        if (obs[k].rain_certain) {
          rainy = true;
          peak = std::max(peak, obs[k].nsrr_mm_h);
        }
      }
      if (open) {
        ++acc.n_total[i];
        if (rainy) {
          ++acc.n_rain[i];
          acc.sum_nsrr[i] += peak;
        }
      }
    }
  }
  for (bool u : used) acc.skipped += u ? 0 : 1;
  return acc;
}

std::vector<SwathObservation> random_stream(std::size_t n, const GridGeometry& g, double dt_max,
                                            std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> lat(g.south() - 0.05, g.north() + 0.05),
      lon(g.west() - 0.05, g.east() + 0.05), dt(0.0, dt_max), rate(0.1, 40.0), diam(3.0, 6.0),
      coin(0.0, 1.0);
  std::vector<SwathObservation> out;
  double t = 1.0e9;
  for (std::size_t i = 0; i < n; ++i) {
    t += dt(rng);
    const bool rain = coin(rng) < 0.4;
    out.push_back({t, lat(rng), lon(rng), rain ? rate(rng) : 0.0, rain, diam(rng)});
  }
  return out;
}

}  // namespace

TEST(FootprintCovers, AgreesWithIndependentDistance) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> off(-0.04, 0.04), lat(-35.0, 35.0), diam(3.0, 6.0);
  int agree = 0, total = 0;
  for (int i = 0; i < 20000; ++i) {
    const SwathObservation o{0.0, lat(rng), 10.0, 1.0, true, diam(rng)};
    const double plat = o.lat + off(rng), plon = o.lon + off(rng);
    ++total;
    agree += footprint_covers(o, plat, plon) == inside_disk(o, plat, plon);
  }
  EXPECT_EQ(agree, total);
}

TEST(Render, SingleObservationPaintsADisk) {
  const GridGeometry g = geometry(60, 60, 1.0 / 120.0, 30.0, 10.0);
  const SwathObservation o{0.0, 10.25, 30.25, 10.0, true, 4.5};
  const std::vector<SwathObservation> obs{o};
  const auto acc = render_observations(obs, g);
  std::size_t covered = 0;
  for (std::size_t r = 0; r < g.nrows; ++r)
    for (std::size_t c = 0; c < g.ncols; ++c) {
      const std::size_t i = r * g.ncols + c;
      const bool in = inside_disk(o, g.center_lat(r), g.center_lon(c));
      EXPECT_EQ(acc.n_total[i], in ? 1u : 0u);
      EXPECT_EQ(acc.n_rain[i], in ? 1u : 0u);
      EXPECT_EQ(acc.sum_nsrr[i], in ? 10.0 : 0.0);
      covered += in;
    }
  // 4.5 km disk on ~0.93 km pixels: about pi * 2.25^2 / (0.926 * 0.913) ~ 19 pixels.
  EXPECT_GT(covered, 12u);
  EXPECT_LT(covered, 28u);
  EXPECT_EQ(acc.skipped, 0u);
}

TEST(Render, CloseObservationsCollapseToTheirMaximum) {
  const GridGeometry g = geometry(1, 1, 0.01, 0.0, 0.0);
  const std::vector<SwathObservation> obs{{100.0, 0.005, 0.005, 3.0, true, 4.0},
                                          {105.0, 0.005, 0.005, 8.0, true, 4.0}};
  const auto acc = render_observations(obs, g, 60.0);
  EXPECT_EQ(acc.n_total[0], 1u);
  EXPECT_EQ(acc.n_rain[0], 1u);
  EXPECT_EQ(acc.sum_nsrr[0], 8.0);
}

TEST(Render, DistantObservationsCountSeparately) {
  const GridGeometry g = geometry(1, 1, 0.01, 0.0, 0.0);
  const std::vector<SwathObservation> obs{{100.0, 0.005, 0.005, 3.0, true, 4.0},
                                          {700.0, 0.005, 0.005, 8.0, true, 4.0}};
  const auto acc = render_observations(obs, g, 60.0);
  EXPECT_EQ(acc.n_total[0], 2u);
  EXPECT_EQ(acc.n_rain[0], 2u);
  EXPECT_EQ(acc.sum_nsrr[0], 11.0);
}

TEST(Render, RainFlagIsOrOfWindow) {
  const GridGeometry g = geometry(1, 1, 0.01, 0.0, 0.0);
  const std::vector<SwathObservation> obs{{0.0, 0.005, 0.005, 0.0, false, 4.0},
                                          {30.0, 0.005, 0.005, 2.0, true, 4.0},
                                          {60.0, 0.005, 0.005, 0.0, false, 4.0},
                                          {61.0, 0.005, 0.005, 0.0, false, 4.0}};
  const auto acc = render_observations(obs, g, 60.0);
  EXPECT_EQ(acc.n_total[0], 2u);  // [0, 60] and a new window at 61
  EXPECT_EQ(acc.n_rain[0], 1u);
  EXPECT_EQ(acc.sum_nsrr[0], 2.0);
}

TEST(Render, MatchesPerPixelReplayWithDedup) {
  const GridGeometry g = geometry(40, 30, 0.01, 100.0, 5.0);
  const auto obs = random_stream(400, g, 20.0, 77);
  const auto want = brute_render(obs, g, 60.0);
  for (unsigned workers : {1u, 2u, 7u}) {
    const auto got = render_observations(obs, g, 60.0, workers);
    EXPECT_EQ(got.n_total, want.n_total) << workers;
    EXPECT_EQ(got.n_rain, want.n_rain) << workers;
    EXPECT_EQ(got.sum_nsrr, want.sum_nsrr) << workers;
    EXPECT_EQ(got.skipped, want.skipped) << workers;
  }
}

TEST(Render, InvariantsHold) {
  const GridGeometry g = geometry(30, 30, 0.02, 0.0, 0.0);
  const auto acc = render_observations(random_stream(500, g, 10.0, 5), g);
  for (std::size_t i = 0; i < g.size(); ++i) {
    EXPECT_LE(acc.n_rain[i], acc.n_total[i]);
    if (acc.n_rain[i] == 0) EXPECT_EQ(acc.sum_nsrr[i], 0.0);
  }
}

TEST(Render, UnsortedStreamIsDataError) {
  const GridGeometry g = geometry(2, 2, 0.01);
  const std::vector<SwathObservation> obs{{10.0, 0.01, 0.01, 1.0, true, 4.0},
                                          {5.0, 0.01, 0.01, 1.0, true, 4.0}};
  EXPECT_THROW(render_observations(obs, g), DataError);
}

TEST(Render, OutOfBandDiameterIsDataError) {
  const GridGeometry g = geometry(2, 2, 0.01);
  const std::vector<SwathObservation> obs{{10.0, 0.01, 0.01, 1.0, true, 7.0}};
  EXPECT_THROW(render_observations(obs, g), DataError);
}

TEST(Render, FootprintOffGridIsCountedAsSkipped) {
  const GridGeometry g = geometry(2, 2, 0.01);
  const std::vector<SwathObservation> obs{{10.0, 5.0, 5.0, 1.0, true, 4.0}};
  const auto acc = render_observations(obs, g);
  EXPECT_EQ(acc.skipped, 1u);
  EXPECT_EQ(acc.observations, 1u);
}

TEST(InitialEstimates, RatioDefinitions) {
  AccumulatorGrid acc;
  acc.geometry = geometry(3, 1);
  acc.n_total = {10, 4, 0};
  acc.n_rain = {3, 0, 0};
  acc.sum_nsrr = {9.0, 0.0, 0.0};
  const auto est = initial_estimates(acc);
  EXPECT_DOUBLE_EQ(est.p0[0], 30.0);
  EXPECT_DOUBLE_EQ(est.cond_rate[0], 3.0);
  EXPECT_DOUBLE_EQ(est.mt[0], 3.0 * 8766.0 * 0.30);
  EXPECT_EQ(est.p0[1], 0.0);
  EXPECT_EQ(est.mt[1], 0.0);
  EXPECT_FALSE(est.mt.valid(2));
  EXPECT_FALSE(est.p0.valid(2));
  EXPECT_FALSE(est.cond_rate.valid(2));
}

TEST(InitialEstimates, UnitArithmetic) {
  AccumulatorGrid acc;
  acc.geometry = geometry(1, 1);
  acc.n_total = {100};
  acc.n_rain = {5};
  acc.sum_nsrr = {10.0};
  EXPECT_NEAR(initial_estimates(acc).mt[0], 876.6, 1e-9);
}

TEST(InitialEstimates, ScalesLinearlyWithNsrr) {
  const GridGeometry g = geometry(20, 20, 0.02);
  auto obs = random_stream(300, g, 30.0, 9);
  const auto base = initial_estimates(render_observations(obs, g));
  for (auto& o : obs) o.nsrr_mm_h *= 2.5;
  const auto scaled = initial_estimates(render_observations(obs, g));
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!base.mt.valid(i)) continue;
    EXPECT_NEAR(scaled.mt[i], 2.5 * base.mt[i], 1e-9 * (1.0 + base.mt[i]));
    EXPECT_EQ(scaled.p0[i], base.p0[i]);
  }
}

TEST(ElevationWeight, FlatTerrainIsOne) {
  const Grid flat(geometry(9, 9), 350.0);
  const Grid w = elevation_weight(flat, 5);
  for (double v : w.values()) EXPECT_EQ(v, 1.0);
}

TEST(ElevationWeight, IqrOfEMinusOneGivesHalf) {
  // Window {0, 0, a, a} with a = e - 1: Q1 = 0, Q3 = a, so w = 1 / (1 + ln e).
  const double a = std::exp(1.0) - 1.0;
  const Grid elev(geometry(2, 2), std::vector<double>{0.0, 0.0, a, a});
  const Grid w = elevation_weight(elev, 3);
  for (double v : w.values()) EXPECT_NEAR(v, 0.5, 1e-15);
}

TEST(ElevationWeight, NodataPropagates) {
  Grid e(geometry(5, 5), 100.0);
  e.at(2, 2) = -9999.0;
  const Grid w = elevation_weight(e, 3);
  EXPECT_FALSE(w.valid(2 * 5 + 2));
  EXPECT_EQ(w.at(0, 0), 1.0);
}

TEST(MergeReference, ZeroWeightKeepsSatellite) {
  std::mt19937_64 rng(4);
  const Grid sat = testing_support::random_grid(geometry(6, 6), rng, 100.0, 2000.0);
  const Grid ref = testing_support::random_grid(geometry(6, 6), rng, 100.0, 2000.0);
  const Grid w(geometry(6, 6), 0.0);
  EXPECT_EQ(merge_reference(sat, ref, w, 3), sat);
}

TEST(MergeReference, FullWeightOnConstantReference) {
  std::mt19937_64 rng(5);
  const Grid sat = testing_support::random_grid(geometry(6, 6), rng, 100.0, 2000.0);
  const Grid ref(geometry(6, 6), 1234.5);
  const Grid w(geometry(6, 6), 1.0);
  const Grid out = merge_reference(sat, ref, w, 5);
  for (double v : out.values()) EXPECT_EQ(v, 1234.5);
}

TEST(MergeReference, HandFiveByFiveConvexCombination) {
  std::mt19937_64 rng(6);
  const auto geo = geometry(5, 5);
  const Grid sat = testing_support::random_grid(geo, rng, 0.0, 1000.0);
  const Grid ref = testing_support::random_grid(geo, rng, 0.0, 1000.0);
  const Grid w = testing_support::random_grid(geo, rng, 0.0, 1.0);
  const Grid out = merge_reference(sat, ref, w, 3);
  for (long r = 0; r < 5; ++r)
    for (long c = 0; c < 5; ++c) {
      double sum = 0.0;
      int n = 0;
      for (long dr = -1; dr <= 1; ++dr)
        for (long dc = -1; dc <= 1; ++dc) {
          const long rr = r + dr, cc = c + dc;
          if (rr < 0 || cc < 0 || rr > 4 || cc > 4) continue;
          sum += ref.at(rr, cc);
          ++n;
        }
      const double wi = w.at(r, c);
      EXPECT_NEAR(out.at(r, c), (1 - wi) * sat.at(r, c) + wi * sum / n, 1e-9);
    }
}

TEST(MergeReference, OutputLiesBetweenInputs) {
  std::mt19937_64 rng(7);
  const auto geo = geometry(30, 30);
  const Grid sat = testing_support::random_grid(geo, rng, 0.0, 3000.0, 0.1);
  const Grid ref = testing_support::random_grid(geo, rng, 0.0, 3000.0, 0.1);
  const Grid w = testing_support::random_grid(geo, rng, 0.0, 1.0, 0.05);
  const Grid smooth = raster::uniform_filter(ref, 7);
  const Grid out = merge_reference(sat, ref, w, 7);
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!sat.valid(i)) {
      EXPECT_FALSE(out.valid(i));
      continue;
    }
    const double lo = std::min(sat[i], smooth.valid(i) ? smooth[i] : sat[i]);
    const double hi = std::max(sat[i], smooth.valid(i) ? smooth[i] : sat[i]);
    EXPECT_GE(out[i], lo);
    EXPECT_LE(out[i], hi);
  }
}

TEST(MergeReference, MisalignedIsAlignmentError) {
  const Grid a(geometry(3, 3), 1.0), b(geometry(3, 4), 1.0);
  EXPECT_THROW(merge_reference(a, b, a, 3), AlignmentError);
}

TEST(Finalize, ConstantsAndBounds) {
  const Grid mt(geometry(25, 25), 900.0), p0(geometry(25, 25), 4.0);
  const auto f = finalize(mt, p0);
  for (std::size_t i = 0; i < mt.size(); ++i) {
    EXPECT_EQ(f.mt[i], 900.0);
    EXPECT_EQ(f.p0[i], 4.0);
  }
  std::mt19937_64 rng(8);
  const Grid rp0 = testing_support::random_grid(geometry(25, 25), rng, 0.0, 100.0);
  const auto g = finalize(mt, rp0, 5);
  double in_max = 0.0;
  for (double v : rp0.values()) in_max = std::max(in_max, v);
  for (double v : g.p0.values()) {
    EXPECT_LE(v, in_max);
    EXPECT_GE(v, 0.0);
  }
}

TEST(Finalize, ImpulseMatchesGaussianFilter) {
  Grid mt(geometry(31, 31), 0.0);
  mt.at(15, 15) = 1000.0;
  const Grid p0(geometry(31, 31), 1.0);
  EXPECT_EQ(finalize(mt, p0, 21).mt, raster::gaussian_filter(mt, 21));
}

TEST(BuildClimatology, EmptyObservationsGiveNodata) {
  const auto geo = geometry(10, 10, 0.05);
  const Grid ref(geo, 1000.0), elev(geo, 10.0);
  ClimatologyConfig cfg;
  cfg.k_uniform = 3;
  cfg.k_gauss = 3;
  const auto res = build_climatology({}, geo, ref, elev, cfg);
  EXPECT_EQ(res.mt.valid_count(), 0u);
  EXPECT_EQ(res.p0.valid_count(), 0u);
  EXPECT_EQ(res.report.substr(0, 15), "observations=0\n");
}

TEST(BuildClimatology, UniformRainMatchesExpectation) {
  // Every pixel is revisited by independent footprints; each is raining with
  // probability q at a fixed rate v, so E[Mt] = v * 8766 * q.
  const auto geo = geometry(24, 24, 0.04, 10.0, 0.0);
  const double q = 0.06, v = 4.0;
  std::mt19937_64 rng(2024);
  std::bernoulli_distribution rain(q);
  std::vector<SwathObservation> obs;
  double t = 0.0;
  for (int pass = 0; pass < 400; ++pass) {
    for (std::size_t r = 0; r < geo.nrows; ++r)
      for (std::size_t c = 0; c < geo.ncols; ++c) {
        const bool wet = rain(rng);
        obs.push_back({t, geo.center_lat(r), geo.center_lon(c), wet ? v : 0.0, wet, 4.0});
      }
    t += 3600.0;
  }
  const double expect = v * kHoursPerYear * q;
  const Grid ref(geo, expect);
  std::uniform_real_distribution<double> hills(0.0, 800.0);
  Grid elev(geo);
  for (std::size_t i = 0; i < elev.size(); ++i) elev[i] = hills(rng);
  ClimatologyConfig cfg;
  cfg.k_uniform = 5;
  cfg.k_gauss = 5;
  const auto res = build_climatology(obs, geo, ref, elev, cfg);
  EXPECT_NEAR(res.mt.valid_mean(), expect, 0.02 * expect);
  EXPECT_NEAR(res.p0.valid_mean(), 100.0 * q, 0.02 * 100.0 * q);

  const auto again = build_climatology(obs, geo, ref, elev, cfg);
  EXPECT_EQ(again.mt, res.mt);
  EXPECT_EQ(again.p0, res.p0);
  EXPECT_EQ(again.report, res.report);
}

TEST(BuildClimatology, StageErrorNamesTheStage) {
  const auto geo = geometry(4, 4, 0.05);
  const std::vector<SwathObservation> obs{{10.0, 0.1, 0.1, 1.0, true, 4.0},
                                          {5.0, 0.1, 0.1, 1.0, true, 4.0}};
  try {
    build_climatology(obs, geo, Grid(geo, 1.0), Grid(geo, 1.0), ClimatologyConfig{});
    FAIL() << "expected a StageError";
  } catch (const StageError& e) {
    EXPECT_EQ(e.stage(), "render");
    EXPECT_EQ(e.kind(), ErrorKind::data);
  }
}

TEST(ObservationCsv, RoundTrip) {
  const std::vector<SwathObservation> obs{{1.5, -3.25, 100.125, 12.5, true, 4.5},
                                          {2.0, 0.0, 0.0, 0.0, false, 3.0}};
  std::istringstream in(format_observations(obs));
  const auto back = parse_observations(in);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].lon, 100.125);
  EXPECT_TRUE(back[0].rain_certain);
  EXPECT_FALSE(back[1].rain_certain);
}

TEST(ObservationCsv, BadFlagIsParseError) {
  std::istringstream in("time_s,lat,lon,nsrr_mm_h,rain_certain,diameter_km\n1,0,0,1,yes,4\n");
  EXPECT_THROW(parse_observations(in), ParseError);
}
