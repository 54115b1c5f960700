#include "rainstat/rainmodel.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <random>
#include <sstream>
#include <tuple>

#include "rainstat/errors.hpp"
#include "rainstat/parallel.hpp"
#include "rainstat/raster.hpp"
#include "rainstat/textio.hpp"

namespace rainstat::rainmodel {

void ModelParams::validate() const {
  for (double v : {x, y, z}) {
    if (!std::isfinite(v) || !(v > 0.0)) throw ArgumentError("model parameters must be positive");
  }
}

void ClimatePoint::validate() const {
  if (!std::isfinite(mt_mm) || mt_mm < 0.0) throw ArgumentError("Mt must be >= 0");
  if (!std::isfinite(p0_pct) || p0_pct < 0.0 || p0_pct > 100.0)
    throw ArgumentError("P0 must lie in [0, 100]");
}

void SiteStatistics::validate() const {
  if (!std::isfinite(duration_years) || duration_years < 0.0)
    throw DataError("site " + site_id + ": duration must be non-negative");
  std::vector<RatePoint> sorted = points;
  for (const auto& pt : sorted) {
    if (!(pt.p_pct > 0.0 && pt.p_pct <= 100.0))
      throw DataError("site " + site_id + ": p outside (0, 100]");
    if (!std::isfinite(pt.rate_mm_h) || pt.rate_mm_h < 0.0)
      throw DataError("site " + site_id + ": negative or non-finite rain rate");
  }
  std::sort(sorted.begin(), sorted.end(),
            [](const RatePoint& a, const RatePoint& b) { return a.p_pct < b.p_pct; });
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    if (sorted[i].p_pct == sorted[i - 1].p_pct)
      throw DataError("site " + site_id + ": repeated exceedance probability");
    if (sorted[i].rate_mm_h > sorted[i - 1].rate_mm_h)
      throw DataError("site " + site_id + ": rain rate increases with exceedance probability");
  }
}

namespace {

// Shape term R (1 + bR) / (1 + cR) and the b, c coefficients.
struct Shape {
  double b, c;

  Shape(const ClimatePoint& climate, const ModelParams& params) {
    b = climate.p0_pct > 0.0 ? climate.mt_mm / (params.y * climate.p0_pct) : 0.0;
    c = params.z * b;
  }
  double f(double r) const { return r * (1.0 + b * r) / (1.0 + c * r); }
  double df(double r) const {
    const double d = 1.0 + c * r;
    return (1.0 + 2.0 * b * r + b * c * r * r) / (d * d);
  }
};

double exceedance_unchecked(double r, const ClimatePoint& climate, const ModelParams& params,
                            const Shape& shape) {
  if (climate.p0_pct == 0.0) return 0.0;
  return climate.p0_pct * std::exp(-params.x * shape.f(r));
}

double rain_rate_unchecked(double p, const ClimatePoint& climate, const ModelParams& params) {
  if (p >= climate.p0_pct) return 0.0;
  const Shape shape(climate, params);
  double lo = 0.0, hi = 1.0;
  while (exceedance_unchecked(hi, climate, params, shape) >= p) {
    if (hi >= kRateCap) throw SolverError("rain rate exceeds 10000 mm/h; climate inputs look wrong");
    lo = hi;
    hi = std::min(2.0 * hi, kRateCap);
  }
  for (;;) {
    const double mid = 0.5 * (lo + hi);
    const double pm = exceedance_unchecked(mid, climate, params, shape);
    if (std::abs(pm - p) <= 1e-9 * p) return mid;
    if (pm > p)
      lo = mid;
    else
      hi = mid;
    if (hi - lo <= 1e-9) return 0.5 * (lo + hi);
  }
}

}  // namespace

double exceedance_probability(double rate_mm_h, const ClimatePoint& climate,
                              const ModelParams& params) {
  if (!(rate_mm_h >= 0.0) || !std::isfinite(rate_mm_h))
    throw ArgumentError("rain rate must be finite and non-negative");
  climate.validate();
  params.validate();
  return exceedance_unchecked(rate_mm_h, climate, params, Shape(climate, params));
}

double rain_rate(double p_pct, const ClimatePoint& climate, const ModelParams& params) {
  if (!(p_pct > 0.0 && p_pct <= 100.0)) throw ArgumentError("p must lie in (0, 100]");
  climate.validate();
  params.validate();
  return rain_rate_unchecked(p_pct, climate, params);
}

std::vector<RatePoint> estimate_site_curve(const ClimatePoint& climate, const ModelParams& params,
                                           std::span<const double> ladder) {
  std::vector<RatePoint> out;
  out.reserve(ladder.size());
  for (double p : ladder) out.push_back({p, rain_rate(p, climate, params)});
  return out;
}

// ---------------------------------------------------------------------------
// Fitting

namespace {

struct Pair {
  double p, observed;
  ClimatePoint climate;
};

std::vector<Pair> usable_pairs(std::span<const TrainingSite> training) {
  std::vector<Pair> pairs;
  for (const auto& site : training) {
    site.climate.validate();
    for (const auto& pt : site.stats.points) {
      if (!(pt.p_pct > 0.0 && pt.p_pct <= 100.0))
        throw ArgumentError("site " + site.stats.site_id + ": p outside (0, 100]");
      if (pt.rate_mm_h > 0.0) pairs.push_back({pt.p_pct, pt.rate_mm_h, site.climate});
    }
  }
  return pairs;
}

using Vec3 = Eigen::Vector3d;

ModelParams from_log(const Vec3& t) { return {std::exp(t[0]), std::exp(t[1]), std::exp(t[2])}; }
Vec3 to_log(const ModelParams& p) { return {std::log(p.x), std::log(p.y), std::log(p.z)}; }

// Residuals (R_hat - R) / R; with `jacobian` also d residual / d log-param,
// from implicit differentiation of ln P0 - x f(R) = ln p.
bool evaluate(std::span<const Pair> pairs, const ModelParams& params, Eigen::VectorXd& res,
              Eigen::MatrixXd* jacobian) {
  const auto m = static_cast<Eigen::Index>(pairs.size());
  res.resize(m);
  if (jacobian) jacobian->setZero(m, 3);
  for (Eigen::Index i = 0; i < m; ++i) {
    const Pair& pr = pairs[static_cast<std::size_t>(i)];
    double r = 0.0;
    try {
      r = rain_rate_unchecked(pr.p, pr.climate, params);
    } catch (const SolverError&) {
      return false;
    }
    res[i] = (r - pr.observed) / pr.observed;
    if (!jacobian || r == 0.0) continue;
    const Shape s(pr.climate, params);
    const double denom = 1.0 + s.c * r;
    const double df_db = r * r / denom;
    const double df_dc = -r * r * (1.0 + s.b * r) / (denom * denom);
    const double fp = s.df(r);
    // dR/dlog(theta) = -(df/dlog(theta)) / f'(R) for x; b and c scale with
    // 1/y, c with z.
    const double dr_dlx = -s.f(r) / fp;
    const double dr_dly = (df_db * s.b + df_dc * s.c) / fp;
    const double dr_dlz = -(df_dc * s.c) / fp;
    (*jacobian)(i, 0) = dr_dlx / pr.observed;
    (*jacobian)(i, 1) = dr_dly / pr.observed;
    (*jacobian)(i, 2) = dr_dlz / pr.observed;
  }
  return true;
}

double objective_of(std::span<const Pair> pairs, const ModelParams& params) {
  Eigen::VectorXd res;
  if (!evaluate(pairs, params, res, nullptr)) return std::numeric_limits<double>::infinity();
  return res.squaredNorm() / static_cast<double>(res.size());
}

struct Descent {
  Vec3 theta;
  double objective;
  bool converged;
};

// Levenberg-Marquardt in log-parameter space.
Descent descend(std::span<const Pair> pairs, Vec3 theta, const FitOptions& opt) {
  const double m = static_cast<double>(pairs.size());
  Eigen::VectorXd res, trial_res;
  Eigen::MatrixXd jac;
  if (!evaluate(pairs, from_log(theta), res, &jac))
    return {theta, std::numeric_limits<double>::infinity(), false};
  double f = res.squaredNorm() / m;
  double lambda = 1e-3;

  for (std::size_t it = 0; it < opt.max_iterations; ++it) {
    if (f <= 1e-30) return {theta, f, true};
    const Eigen::Matrix3d h = jac.transpose() * jac;
    const Vec3 g = jac.transpose() * res;
    bool accepted = false;
    while (!accepted) {
      Eigen::Matrix3d a = h;
      for (int k = 0; k < 3; ++k) a(k, k) += lambda * h(k, k) + 1e-12 * (h.trace() + 1e-300);
      const Vec3 step = a.ldlt().solve(-g);
      const Vec3 next = theta + step;
      if (step.allFinite() && evaluate(pairs, from_log(next), trial_res, nullptr)) {
        const double f_next = trial_res.squaredNorm() / m;
        if (f_next < f) {
          const double rel = (f - f_next) / f;
          theta = next;
          f = f_next;
          lambda = std::max(lambda / 3.0, 1e-12);
          if (rel <= opt.tolerance) return {theta, f, true};
          if (!evaluate(pairs, from_log(theta), res, &jac)) return {theta, f, false};
          accepted = true;
          continue;
        }
      }
      lambda *= 4.0;
      // No descent direction left at any damping: a stationary point.
      if (lambda > 1e16) return {theta, f, true};
    }
  }
  return {theta, f, false};
}

bool better(double fa, const ModelParams& a, double fb, const ModelParams& b) {
  if (fa != fb) return fa < fb;
  return std::tie(a.x, a.y, a.z) < std::tie(b.x, b.y, b.z);
}

}  // namespace

double fit_objective(std::span<const TrainingSite> training, const ModelParams& params) {
  params.validate();
  const auto pairs = usable_pairs(training);
  if (pairs.empty()) throw ArgumentError("no training pairs with observed R > 0");
  return objective_of(pairs, params);
}

FitResult fit_params(std::span<const TrainingSite> training, const FitOptions& options) {
  const auto pairs = usable_pairs(training);
  const bool informative = std::any_of(pairs.begin(), pairs.end(),
                                       [](const Pair& pr) { return pr.p < pr.climate.p0_pct; });
  if (pairs.empty() || !informative)
    throw ArgumentError("training set needs a point with R > 0 and p < P0");

  // Coarse logarithmic grid around the usual magnitudes of (x, y, z).
  struct Seed {
    ModelParams params;
    double objective;
  };
  std::vector<Seed> seeds;
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j)
      for (int k = 0; k < 5; ++k) {
        const ModelParams p{std::pow(10.0, -0.5 + 0.25 * i), std::pow(10.0, 3.0 + 0.5 * j),
                            std::pow(10.0, 0.5 + 0.5 * k)};
        seeds.push_back({p, 0.0});
      }
  parallel_for(seeds.size(), options.workers, [&](std::size_t b, std::size_t e) {
    for (std::size_t s = b; s < e; ++s) seeds[s].objective = objective_of(pairs, seeds[s].params);
  });
  std::stable_sort(seeds.begin(), seeds.end(), [](const Seed& a, const Seed& b) {
    return better(a.objective, a.params, b.objective, b.params);
  });

  const std::size_t n_starts = std::min(std::max<std::size_t>(options.refine_starts, 1), seeds.size());
  std::vector<Vec3> starts;
  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> jitter(-0.1, 0.1);
  for (std::size_t s = 0; s < n_starts; ++s) {
    Vec3 t = to_log(seeds[s].params);
    if (s > 0) {
      for (int k = 0; k < 3; ++k) t[k] += jitter(rng);
    }
    starts.push_back(t);
  }

  std::vector<Descent> results(starts.size());
  parallel_for(starts.size(), options.workers, [&](std::size_t b, std::size_t e) {
    for (std::size_t s = b; s < e; ++s) results[s] = descend(pairs, starts[s], options);
  });

  FitResult best;
  best.objective = std::numeric_limits<double>::infinity();
  best.residuals = pairs.size();
  best.starts = results.size();
  bool found = false;
  for (const auto& r : results) {
    if (!r.converged) continue;
    ++best.converged;
    const ModelParams p = from_log(r.theta);
    if (!found || better(r.objective, p, best.objective, best.params)) {
      best.params = p;
      best.objective = r.objective;
      found = true;
    }
  }
  if (!found || !std::isfinite(best.objective))
    throw SolverError("no fit start converged");
  return best;
}

// ---------------------------------------------------------------------------

std::vector<RatePoint> loglinear_resample(std::span<const RatePoint> points,
                                          std::span<const double> targets) {
  if (points.size() < 2) throw ArgumentError("log-linear resampling needs at least two points");
  std::vector<RatePoint> knots(points.begin(), points.end());
  std::sort(knots.begin(), knots.end(),
            [](const RatePoint& a, const RatePoint& b) { return a.p_pct < b.p_pct; });
  for (std::size_t i = 0; i < knots.size(); ++i) {
    if (!(knots[i].p_pct > 0.0)) throw ArgumentError("exceedance probabilities must be positive");
    if (i > 0 && knots[i].p_pct == knots[i - 1].p_pct)
      throw ArgumentError("repeated exceedance probability");
  }
  std::vector<RatePoint> out;
  for (double p : targets) {
    if (p < knots.front().p_pct || p > knots.back().p_pct) continue;
    auto hi = std::lower_bound(knots.begin(), knots.end(), p,
                               [](const RatePoint& k, double v) { return k.p_pct < v; });
    if (hi->p_pct == p) {
      out.push_back({p, hi->rate_mm_h});
      continue;
    }
    auto lo = hi - 1;
    const double t = (std::log(p) - std::log(lo->p_pct)) / (std::log(hi->p_pct) - std::log(lo->p_pct));
    out.push_back({p, lo->rate_mm_h + t * (hi->rate_mm_h - lo->rate_mm_h)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Files

ModelParams parse_params(std::istream& in, const std::string& source_name) {
  const auto kv = textio::parse_key_values(in, source_name);
  ModelParams p;
  for (const auto& [key, value] : kv) {
    if (key != "x" && key != "y" && key != "z")
      throw ParseError(source_name, 0, "unknown params key '" + key + "'");
  }
  for (const char* key : {"x", "y", "z"}) {
    auto it = kv.find(key);
    if (it == kv.end()) throw ParseError(source_name, 0, std::string("missing params key '") + key + "'");
    const double v = textio::to_double(it->second, source_name, 0, key);
    (key[0] == 'x' ? p.x : key[0] == 'y' ? p.y : p.z) = v;
  }
  try {
    p.validate();
  } catch (const ArgumentError& e) {
    throw DataError(source_name + ": " + e.what());
  }
  return p;
}

ModelParams read_params(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open params file " + path.string());
  return parse_params(in, path.string());
}

std::string format_params(const ModelParams& params) {
  return "x=" + raster::format_number(params.x) + "\ny=" + raster::format_number(params.y) +
         "\nz=" + raster::format_number(params.z) + "\n";
}

std::vector<SiteStatistics> parse_site_statistics(std::istream& in, const std::string& source_name) {
  textio::CsvReader csv(in, source_name,
                        {"site_id", "lat", "lon", "country", "years", "p_percent", "rate_mm_h"});
  std::vector<SiteStatistics> sites;
  std::map<std::string, std::size_t> index;
  std::vector<std::string_view> f;
  while (csv.next(f)) {
    if (f[0].empty()) throw ParseError(source_name, csv.line(), "empty site_id");
    const std::string id(f[0]);
    const double lat = csv.number(f[1], "lat");
    const double lon = csv.number(f[2], "lon");
    const double years = csv.number(f[4], "years");
    const RatePoint pt{csv.number(f[5], "p_percent"), csv.number(f[6], "rate_mm_h")};
    auto [it, fresh] = index.emplace(id, sites.size());
    if (fresh) {
      sites.push_back({id, lat, lon, std::string(f[3]), years, {}});
    } else {
      const auto& s = sites[it->second];
      if (s.lat != lat || s.lon != lon || s.country != f[3] || s.duration_years != years)
        throw ParseError(source_name, csv.line(), "site " + id + ": metadata differs between rows");
    }
    sites[it->second].points.push_back(pt);
  }
  for (const auto& s : sites) s.validate();
  return sites;
}

std::vector<SiteStatistics> read_site_statistics(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open site statistics " + path.string());
  return parse_site_statistics(in, path.string());
}

std::string format_site_statistics(std::span<const SiteStatistics> sites) {
  using raster::format_number;
  std::string out = "site_id,lat,lon,country,years,p_percent,rate_mm_h\n";
  for (const auto& s : sites) {
    for (const auto& pt : s.points) {
      out += s.site_id + "," + format_number(s.lat) + "," + format_number(s.lon) + "," + s.country +
             "," + format_number(s.duration_years) + "," + format_number(pt.p_pct) + "," +
             format_number(pt.rate_mm_h) + "\n";
    }
  }
  return out;
}

}  // namespace rainstat::rainmodel
