// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cli_scenario.hpp"
#include "rainstat/climatology.hpp"
#include "rainstat/errors.hpp"
#include "rainstat/evaluation.hpp"
#include "rainstat/gauge.hpp"
#include "rainstat/impact.hpp"
#include "rainstat/rainmodel.hpp"
#include "rainstat/raster.hpp"
#include "support.hpp"
#include "synthetic_gauge.hpp"

using namespace rainstat;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// 1. Forward model and inverse agree across random climates.
Outcome model_round_trip() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> mt(100.0, 4000.0), p0(0.5, 10.0);
  const rainmodel::ModelParams params{};
  double worst = 0.0;
  std::size_t checked = 0;
  for (int i = 0; i < 1000; ++i) {
    const rainmodel::ClimatePoint c{mt(rng), p0(rng)};
    for (double p : rainmodel::kStandardLadder) {
      if (p >= c.p0_pct) continue;
      const double r = rainmodel::rain_rate(p, c, params);
      worst = std::max(worst, std::fabs(rainmodel::exceedance_probability(r, c, params) - p) / p);
      ++checked;
    }
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {worst <= 1e-6 && secs < 5.0,
          "max |P(R(p)) - p|/p = " + fmt("%.3g", worst) + " over " + std::to_string(checked) +
              " points (tol 1e-6), " + fmt("%.2f", secs) + " s (limit 5 s)"};
}

std::vector<rainmodel::TrainingSite> training_set(const rainmodel::ModelParams& truth,
                                                  std::uint64_t seed, double noise) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> mt(300.0, 3500.0), p0(1.0, 9.0), eps(-noise, noise);
  std::vector<rainmodel::TrainingSite> out;
  for (int i = 0; i < 30; ++i) {
    rainmodel::TrainingSite t;
    t.climate = {mt(rng), p0(rng)};
    t.stats.site_id = "C" + std::to_string(i);
    for (double p : rainmodel::kStandardLadder) {
      const double r = rainmodel::rain_rate(p, t.climate, truth);
      if (r > 0.0) t.stats.points.push_back({p, r * (1.0 + eps(rng))});
    }
    out.push_back(std::move(t));
  }
  return out;
}

// 2. Fitting recovers generator curves and never loses to the generator on noisy data.
Outcome fit_recovery() {
  const rainmodel::ModelParams truth{1.15, 17000.0, 31.0};
  const auto clean = training_set(truth, 2, 0.0);
  rainmodel::FitOptions opt;
  opt.seed = 7;
  const auto fit = rainmodel::fit_params(clean, opt);
  double worst = 0.0;
  for (const auto& t : clean)
    for (const auto& pt : t.stats.points)
      worst = std::max(worst, std::fabs(rainmodel::rain_rate(pt.p_pct, t.climate, fit.params) /
                                            pt.rate_mm_h -
                                        1.0));
  const auto noisy = training_set(truth, 3, 0.10);
  const auto nfit = rainmodel::fit_params(noisy, opt);
  const double gen = rainmodel::fit_objective(noisy, truth);
  return {worst <= 0.005 && nfit.objective <= gen,
          "noiseless fit x=" + fmt("%.6g", fit.params.x) + " y=" + fmt("%.6g", fit.params.y) +
              " z=" + fmt("%.6g", fit.params.z) + ", max rel dev " + fmt("%.3g", worst) +
              " (tol 0.005); noisy objective " +
              fmt("%.6g", nfit.objective) + " vs generator " + fmt("%.6g", gen)};
}

// 3. rms^2 = mean^2 + sd^2, and the mean -3.1 / sd 30.9 fixture prints 31.0.
Outcome p311_identity() {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> d(0.02, 0.35);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    std::vector<double> e(50 + static_cast<std::size_t>(i) * 7);
    for (double& v : e) v = d(rng);
    const auto s = evaluation::p311_summary(e);
    worst = std::max(worst, std::fabs(s.rms * s.rms - (s.mean * s.mean + s.sd * s.sd)) /
                                (s.rms * s.rms));
  }
  // Two errors with mean -3.1% and population sd 30.9%.
  const std::vector<double> fixture{-34.0, 27.8};
  const auto s = evaluation::p311_summary(fixture);
  const bool identity = worst <= 1e-12;
  const bool row = std::fabs(s.rms - 31.0) <= 0.05;
  return {identity && row, "identity max rel dev " + fmt("%.3g", worst) +
                               " (tol 1e-12); fixture mean " + fmt("%.4f", s.mean) + " sd " +
                               fmt("%.4f", s.sd) + " rms " + fmt("%.4f", s.rms) +
                               " vs 31.0 +/- 0.05"};
}

// 4. Published confusion counts reproduce the published scores.
Outcome classification_metrics() {
  struct Row {
    const char* name;
    std::size_t tn, fp, fn, tp;
    double acc, mcc;
  };
  const Row rows[] = {{"zone by-site", 262, 6, 55, 25, 0.82, 0.43},
                      {"SPRG by-country", 6, 1, 5, 8, 0.70, 0.45},
                      {"ITU by-country", 5, 2, 9, 4, 0.45, 0.02}};
  Outcome o;
  for (const auto& r : rows) {
    evaluation::ConfusionMatrix cm;
    cm.tn = r.tn;
    cm.fp = r.fp;
    cm.fn = r.fn;
    cm.tp = r.tp;
    const double a = evaluation::accuracy(cm), m = evaluation::mcc(cm);
    o.pass = o.pass && std::fabs(a - r.acc) <= 0.005 && std::fabs(m - r.mcc) <= 0.005;
    o.detail += std::string(o.detail.empty() ? "" : "; ") + r.name + " acc " + fmt("%.4f", a) +
                " mcc " + fmt("%.4f", m);
  }
  o.detail += " (tol 0.005)";
  return o;
}

std::vector<rainmodel::RatePoint> gauge_pipeline(const rainmodel::ClimatePoint& c, int years,
                                                 std::uint64_t seed) {
  constexpr std::int64_t jan2001 = 978307200;
  const std::int64_t end = gauge::add_months(jan2001, 12 * years);
  const auto minutes = static_cast<std::size_t>((end - jan2001) / 60);
  const auto rec = testing_support::synthetic_gauge_record(c, {}, jan2001, minutes, seed);
  const auto series = gauge::qc_filter(gauge::tips_to_rates(rec.tip_times, rec.bucket_mm, rec.span));
  const auto sel = gauge::select_periods(series);
  if (!sel) return {};
  return gauge::exceedance_stats(*sel);
}

// 5. Tips generated from a known curve give back that curve.
Outcome gauge_self_consistency() {
  const rainmodel::ClimatePoint c{2000.0, 3.0};
  const auto pts = gauge_pipeline(c, 5, 5);
  double worst = 0.0;
  std::size_t rungs = 0;
  for (const auto& pt : pts) {
    if (pt.p_pct < 0.01) continue;
    const double want = rainmodel::rain_rate(pt.p_pct, c, {});
    const double dev = want > 0.0 ? std::fabs(pt.rate_mm_h / want - 1.0) : pt.rate_mm_h;
    worst = std::max(worst, dev);
    ++rungs;
  }
  const auto has_rare = [](const std::vector<rainmodel::RatePoint>& v) {
    return std::any_of(v.begin(), v.end(), [](const auto& p) { return p.p_pct == 0.001; });
  };
  const bool one_year = has_rare(gauge_pipeline(c, 1, 6));
  const bool four_year = has_rare(gauge_pipeline(c, 4, 7));
  const std::size_t expected_rungs = static_cast<std::size_t>(std::count_if(
      rainmodel::kStandardLadder.begin(), rainmodel::kStandardLadder.end(),
      [](double p) { return p >= 0.01; }));
  return {rungs == expected_rungs && worst <= 0.05 && !one_year && four_year,
          "5-year max rel dev " + fmt("%.4f", worst) + " over " + std::to_string(rungs) +
              " rungs (tol 0.05); p=0.001 present: 1 year " + (one_year ? "yes" : "no") +
              ", 4 years " + (four_year ? "yes" : "no")};
}

// 6. Rendering equals brute-force disk membership, for any worker count.
Outcome rasterization_oracle() {
  const auto g = testing_support::geometry(200, 200, 0.02, 30.0, -2.0);
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> lat(g.south() - 0.02, g.north() + 0.02),
      lon(g.west() - 0.02, g.east() + 0.02), rate(0.1, 50.0), diam(3.0, 6.0);
  std::bernoulli_distribution wet(0.5);
  std::vector<climatology::SwathObservation> obs;
  for (int i = 0; i < 1000; ++i) {
    const bool w = wet(rng);
    obs.push_back({100.0 * i, lat(rng), lon(rng), w ? rate(rng) : 0.0, w, diam(rng)});
  }
  const double km_per_deg = 6371.0 * 3.14159265358979323846 / 180.0;
  std::vector<std::uint32_t> n(g.size(), 0), nr(g.size(), 0);
  std::vector<double> sum(g.size(), 0.0);
  for (const auto& o : obs) {
    const double k = std::cos(o.lat * 3.14159265358979323846 / 180.0);
    const double rad = o.diameter_km / 2.0;
    for (std::size_t r = 0; r < g.nrows; ++r)
      for (std::size_t c = 0; c < g.ncols; ++c) {
        const double dy = (g.center_lat(r) - o.lat) * km_per_deg;
        const double dx = (g.center_lon(c) - o.lon) * km_per_deg * k;
        if (dx * dx + dy * dy > rad * rad) continue;
        const std::size_t i = r * g.ncols + c;
        ++n[i];
        if (o.rain_certain) {
          ++nr[i];
          sum[i] += o.nsrr_mm_h;
        }
      }
  }
  std::size_t mismatched = 0;
  bool same = true;
  climatology::AccumulatorGrid first;
  for (unsigned workers : {1u, 2u, 8u}) {
    const auto acc = climatology::render_observations(obs, g, 60.0, workers);
    if (workers == 1) {
      first = acc;
      for (std::size_t i = 0; i < g.size(); ++i)
        mismatched += acc.n_total[i] != n[i] || acc.n_rain[i] != nr[i] || acc.sum_nsrr[i] != sum[i];
    } else {
      same = same && acc == first;
    }
  }
  std::size_t covered = 0;
  for (auto v : n) covered += v > 0;
  return {mismatched == 0 && same && covered > 0,
          std::to_string(mismatched) + " mismatched pixels of " + std::to_string(g.size()) + " (" +
              std::to_string(covered) + " covered); workers 1/2/8 identical: " +
              (same ? "yes" : "no")};
}

// 7. Filter and merge properties.
Outcome filter_properties() {
  const auto geo = testing_support::geometry(150, 140, 0.5);
  const raster::Grid flat(geo, 1234.5678);
  const raster::Grid u = raster::uniform_filter(flat, 121), gs = raster::gaussian_filter(flat, 21);
  const bool uniform_exact = u == flat, gauss_exact = gs == flat;

  raster::Grid impulse(testing_support::geometry(41, 41), 0.0);
  impulse.at(20, 20) = 1.0;
  const raster::Grid resp = raster::gaussian_filter(impulse, 21);
  double mass = 0.0;
  for (double v : resp.values()) mass += v;

  std::mt19937_64 rng(7);
  const auto g2 = testing_support::geometry(80, 70);
  const raster::Grid sat = testing_support::random_grid(g2, rng, 0.0, 4000.0, 0.05);
  const raster::Grid ref = testing_support::random_grid(g2, rng, 0.0, 4000.0, 0.05);
  const raster::Grid w = testing_support::random_grid(g2, rng, 0.0, 1.0);
  const raster::Grid smooth = raster::uniform_filter(ref, 121);
  const raster::Grid merged = climatology::merge_reference(sat, ref, w, 121);
  std::size_t outside = 0;
  for (std::size_t i = 0; i < merged.size(); ++i) {
    if (!sat.valid(i)) {
      outside += merged.valid(i);
      continue;
    }
    const double other = smooth.valid(i) ? smooth[i] : sat[i];
    outside += merged[i] < std::min(sat[i], other) || merged[i] > std::max(sat[i], other);
  }

  const raster::Grid flat_elev(testing_support::geometry(30, 30), 812.0);
  const raster::Grid w_flat = climatology::elevation_weight(flat_elev, 121);
  bool ones = true;
  for (double v : w_flat.values()) ones = ones && v == 1.0;
  const double a = std::exp(1.0) - 1.0;
  const raster::Grid step(testing_support::geometry(2, 2), std::vector<double>{0.0, 0.0, a, a});
  const raster::Grid w_step = climatology::elevation_weight(step, 3);
  double half_dev = 0.0;
  for (double v : w_step.values()) half_dev = std::max(half_dev, std::fabs(v - 0.5));

  const bool pass = uniform_exact && gauss_exact && std::fabs(mass - 1.0) <= 1e-9 && outside == 0 &&
                    ones && half_dev <= 1e-12;
  return {pass, std::string("constant exact: uniform121 ") + (uniform_exact ? "yes" : "no") +
                    ", gauss21 " + (gauss_exact ? "yes" : "no") + "; impulse mass - 1 = " +
                    fmt("%.2g", mass - 1.0) + " (tol 1e-9); merge outside inputs: " +
                    std::to_string(outside) + "; flat weight 1: " + (ones ? "yes" : "no") +
                    "; |w(IQR=e-1) - 0.5| = " + fmt("%.2g", half_dev)};
}

// 8. Impact tabulation.
Outcome impact_tabulation() {
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<int> code(1, 12);
  std::uniform_real_distribution<double> people(0.0, 1000.0);
  const auto geo = testing_support::geometry(90, 60);
  raster::Grid zones(geo), pop(geo);
  for (std::size_t i = 0; i < zones.size(); ++i) {
    zones[i] = i % 17 == 0 ? geo.nodata : code(rng);
    pop[i] = i % 5 == 0 ? 0.0 : people(rng);
  }
  double land = 0, populated = 0, share = 0;
  for (const auto& z : impact::zone_coverage(zones, pop)) {
    land += z.land_pct;
    populated += z.populated_pct;
    share += z.pop_pct;
  }
  const double col_dev =
      std::max({std::fabs(land - 100.0), std::fabs(populated - 100.0), std::fabs(share - 100.0)});

  const double nd = raster::kDefaultNodata;
  const auto g4 = testing_support::geometry(4, 4);
  const raster::Grid hp(g4, std::vector<double>{10, 20, 0, 5, nd, 1, 2, 3, 4, 4, 4, 4, 100, 0, 7, 8});
  const raster::Grid hc(g4, std::vector<double>{1, 1, 2, 2, 1, 1, 2, 2, 3, 3, nd, nd, 3, 3, nd, 2});
  const raster::Grid hr(g4, std::vector<double>{100, 90, 96, 95, 200, 94.9, 120, nd, 10, 99, 96, 1,
                                                95.5, 300, 50, 101});
  const auto zp = impact::zonal_population(hp, impact::heavy_mask(hr), hc);
  const bool hand = zp.countries.size() == 4 && zp.countries.at(1) == impact::Population{31, 10} &&
                    zp.countries.at(2) == impact::Population{18, 10} &&
                    zp.countries.at(3) == impact::Population{108, 104} &&
                    zp.countries.at(impact::kUnassigned) == impact::Population{15, 4} &&
                    zp.grand == impact::Population{172, 128};

  const raster::Grid rates = testing_support::random_grid(geo, rng, 0.0, 250.0, 0.05);
  bool monotone = true;
  for (double t = 0.0; t < 250.0; t += 2.5) {
    const auto lo = impact::heavy_mask(rates, t), hi = impact::heavy_mask(rates, t + 2.5);
    for (std::size_t i = 0; i < rates.size(); ++i) monotone = monotone && hi.heavy[i] <= lo.heavy[i];
  }
  const raster::Grid boundary(testing_support::geometry(1, 1), 95.0);
  const bool boundary_false = impact::heavy_mask(boundary).count() == 0;

  return {col_dev <= 1e-9 && hand && monotone && boundary_false,
          "coverage column dev " + fmt("%.2g", col_dev) + " (tol 1e-9); hand 4x4 " +
              (hand ? "matches" : "differs") + "; mask monotone " + (monotone ? "yes" : "no") +
              "; 95.0 heavy " + (boundary_false ? "no" : "yes")};
}

// 9. Every subcommand is byte-identical across reruns and thread counts.
Outcome cli_determinism() {
  using testing_support::TempDir;
  std::vector<std::unique_ptr<TempDir>> dirs;
  const unsigned threads[] = {1, 2, 8, 1};
  for (std::size_t i = 0; i < std::size(threads); ++i) {
    dirs.push_back(std::make_unique<TempDir>("accept"));
    testing_support::write_scenario(dirs.back()->path());
  }
  std::string failures;
  std::size_t files = 0;
  for (const auto& cmd : testing_support::scenario_commands()) {
    std::map<std::string, std::string> first;
    for (std::size_t i = 0; i < dirs.size(); ++i) {
      const auto r = testing_support::run_cli({"--config", (*dirs[i] / (cmd + ".cfg")).string(),
                                               "--seed", "1234", "--threads",
                                               std::to_string(threads[i]), cmd});
      const auto snap = testing_support::snapshot(dirs[i]->path() / "out" / cmd);
      if (r.code != 0 || snap.empty()) {
        failures += " " + cmd + "(exit " + std::to_string(r.code) + ")";
        break;
      }
      if (i == 0) {
        first = snap;
        files += snap.size();
      } else if (snap != first) {
        failures += " " + cmd + "(threads " + std::to_string(threads[i]) + ")";
        break;
      }
    }
  }
  return {failures.empty(), "6 subcommands, " + std::to_string(files) +
                                " files, threads 1/2/8 and rerun" +
                                (failures.empty() ? ": identical" : "; differing:" + failures)};
}

}  // namespace

int main() {
  const std::pair<const char*, std::function<Outcome()>> checks[] = {
      {"model round trip", model_round_trip},
      {"fit recovery", fit_recovery},
      {"P.311 identity and summary row", p311_identity},
      {"classification metrics", classification_metrics},
      {"gauge self-consistency", gauge_self_consistency},
      {"rasterization oracle", rasterization_oracle},
      {"filter and merge properties", filter_properties},
      {"impact tabulation", impact_tabulation},
      {"determinism", cli_determinism},
  };
  int failed = 0;
  int n = 0;
  for (const auto& [name, fn] : checks) {
    ++n;
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += o.pass ? 0 : 1;
    std::printf("criterion %d %s: %s: %s\n", n, o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %d criteria passed\n", n - failed, n);
  return failed == 0 ? 0 : 1;
}
