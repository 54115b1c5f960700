#include "rainstat/raster.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string_view>

#include "rainstat/errors.hpp"
#include "rainstat/parallel.hpp"

namespace rainstat::raster {

void GridGeometry::validate() const {
  if (ncols == 0 || nrows == 0) throw ArgumentError("grid must have at least one row and column");
  if (!(cell > 0.0) || !std::isfinite(cell)) throw ArgumentError("cellsize must be positive");
  if (!std::isfinite(xll) || !std::isfinite(yll)) throw ArgumentError("grid corner must be finite");
  if (yll < -90.0) throw ArgumentError("yllcorner below -90");
  // Slack for decimal cell sizes such as 1/120 that do not sum exactly.
  if (north() > 90.0 + 1e-9) throw ArgumentError("grid extends north of 90");
}

bool aligned(const GridGeometry& a, const GridGeometry& b) noexcept {
  // nodata is part of the geometry record; NaN sentinels compare equal here.
  const bool same_nodata =
      a.nodata == b.nodata || (std::isnan(a.nodata) && std::isnan(b.nodata));
  return a.ncols == b.ncols && a.nrows == b.nrows && a.xll == b.xll && a.yll == b.yll &&
         a.cell == b.cell && same_nodata;
}

void require_aligned(const GridGeometry& a, const GridGeometry& b, const std::string& what) {
  if (!aligned(a, b)) throw AlignmentError(what + ": grids are not aligned");
}

Grid::Grid(const GridGeometry& geometry) : Grid(geometry, geometry.nodata) {}

Grid::Grid(const GridGeometry& geometry, double fill) : geometry_(geometry) {
  geometry_.validate();
  values_.assign(geometry_.size(), fill);
}

Grid::Grid(const GridGeometry& geometry, std::vector<double> values)
    : geometry_(geometry), values_(std::move(values)) {
  geometry_.validate();
  if (values_.size() != geometry_.size())
    throw ArgumentError("grid value count does not match ncols*nrows");
  for (double v : values_) {
    if (!std::isfinite(v) && !is_nodata(v)) throw ArgumentError("grid value is not finite");
  }
}

bool Grid::is_nodata(double v) const noexcept {
  const double nd = geometry_.nodata;
  return v == nd || (std::isnan(nd) && std::isnan(v));
}

std::size_t Grid::valid_count() const noexcept {
  return static_cast<std::size_t>(
      std::count_if(values_.begin(), values_.end(), [this](double v) { return !is_nodata(v); }));
}

double Grid::valid_mean() const noexcept {
  double sum = 0.0;
  std::size_t n = 0;
  for (double v : values_) {
    if (is_nodata(v)) continue;
    sum += v;
    ++n;
  }
  return n == 0 ? nodata() : sum / static_cast<double>(n);
}

// ---------------------------------------------------------------------------
// Text I/O

std::string format_number(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace {

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() &&
         std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) ==
                  std::tolower(static_cast<unsigned char>(y));
         });
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

bool parse_double(std::string_view tok, double& out) {
  if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
  auto res = std::from_chars(tok.data(), tok.data() + tok.size(), out);
  return res.ec == std::errc() && res.ptr == tok.data() + tok.size();
}

bool parse_count(std::string_view tok, std::size_t& out) {
  auto res = std::from_chars(tok.data(), tok.data() + tok.size(), out);
  return res.ec == std::errc() && res.ptr == tok.data() + tok.size();
}

}  // namespace

Grid read_grid(std::istream& in, const std::string& source_name) {
  static constexpr std::string_view kKeys[6] = {"ncols",     "nrows",    "xllcorner",
                                                "yllcorner", "cellsize", "NODATA_value"};
  std::string line;
  std::size_t lineno = 0;
  GridGeometry g;
  for (std::size_t h = 0; h < 6; ++h) {
    if (!std::getline(in, line)) throw ParseError(source_name, lineno + 1, "truncated header");
    ++lineno;
    auto toks = split_ws(line);
    if (toks.size() != 2 || !iequals(toks[0], kKeys[h]))
      throw ParseError(source_name, lineno, "expected header key '" + std::string(kKeys[h]) + "'");
    bool ok = true;
    switch (h) {
      case 0: ok = parse_count(toks[1], g.ncols); break;
      case 1: ok = parse_count(toks[1], g.nrows); break;
      case 2: ok = parse_double(toks[1], g.xll); break;
      case 3: ok = parse_double(toks[1], g.yll); break;
      case 4: ok = parse_double(toks[1], g.cell); break;
      case 5: ok = parse_double(toks[1], g.nodata); break;
    }
    if (!ok) throw ParseError(source_name, lineno, "bad value for " + std::string(kKeys[h]));
  }
  try {
    g.validate();
  } catch (const ArgumentError& e) {
    throw ParseError(source_name, lineno, e.what());
  }

  std::vector<double> values;
  values.reserve(g.size());
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto toks = split_ws(line);
    if (toks.empty()) continue;
    if (rows == g.nrows) throw ParseError(source_name, lineno, "more rows than nrows");
    if (toks.size() != g.ncols)
      throw ParseError(source_name, lineno,
                       "expected " + std::to_string(g.ncols) + " values, found " +
                           std::to_string(toks.size()));
    for (auto tok : toks) {
      double v = 0.0;
      if (!parse_double(tok, v))
        throw ParseError(source_name, lineno, "non-numeric token '" + std::string(tok) + "'");
      const bool is_nd = v == g.nodata || (std::isnan(g.nodata) && std::isnan(v));
      if (!std::isfinite(v) && !is_nd)
        throw ParseError(source_name, lineno, "non-finite value '" + std::string(tok) + "'");
      values.push_back(v);
    }
    ++rows;
  }
  if (rows != g.nrows)
    throw ParseError(source_name, lineno,
                     "expected " + std::to_string(g.nrows) + " rows, found " + std::to_string(rows));
  return Grid(g, std::move(values));
}

Grid read_grid(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open grid file " + path.string());
  return read_grid(in, path.string());
}

void write_grid(const Grid& grid, std::ostream& out) {
  const auto& g = grid.geometry();
  out << "ncols " << g.ncols << '\n'
      << "nrows " << g.nrows << '\n'
      << "xllcorner " << format_number(g.xll) << '\n'
      << "yllcorner " << format_number(g.yll) << '\n'
      << "cellsize " << format_number(g.cell) << '\n'
      << "NODATA_value " << format_number(g.nodata) << '\n';
  std::string row;
  for (std::size_t r = 0; r < g.nrows; ++r) {
    row.clear();
    for (std::size_t c = 0; c < g.ncols; ++c) {
      if (c) row += ' ';
      row += format_number(grid.at(r, c));
    }
    row += '\n';
    out << row;
  }
}

std::string format_grid(const Grid& grid) {
  std::ostringstream os;
  write_grid(grid, os);
  return os.str();
}

void write_grid(const Grid& grid, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write grid file " + path.string());
  write_grid(grid, out);
  if (!out) throw DataError("write failed for " + path.string());
}

// ---------------------------------------------------------------------------
// Sampling

namespace {

// Fractional index of a coordinate in cell-centre units, snapped to the
// nearest integer when within rounding noise of a centre.
double center_index(double offset_cells) {
  const double idx = offset_cells - 0.5;
  const double r = std::round(idx);
  return std::abs(idx - r) < 1e-9 ? r : idx;
}

struct Axis {
  std::size_t i0, i1;
  double t;  // weight of i1
};

Axis bracket(double idx, std::size_t n) {
  idx = std::clamp(idx, 0.0, static_cast<double>(n - 1));
  if (n == 1) return {0, 0, 0.0};
  auto i0 = static_cast<std::size_t>(std::floor(idx));
  i0 = std::min(i0, n - 2);
  return {i0, i0 + 1, idx - static_cast<double>(i0)};
}

}  // namespace

double sample_bilinear(const Grid& grid, double lat, double lon) {
  const auto& g = grid.geometry();
  if (!g.contains(lat, lon)) throw RangeError("point outside grid bounds");
  const Axis cx = bracket(center_index((lon - g.xll) / g.cell), g.ncols);
  const Axis ry = bracket(center_index((g.north() - lat) / g.cell), g.nrows);

  const std::size_t rows[2] = {ry.i0, ry.i1};
  const std::size_t cols[2] = {cx.i0, cx.i1};
  const double wr[2] = {1.0 - ry.t, ry.t};
  const double wc[2] = {1.0 - cx.t, cx.t};
  double acc = 0.0;
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) {
      const double w = wr[a] * wc[b];
      if (w == 0.0) continue;
      const double v = grid.at(rows[a], cols[b]);
      if (grid.is_nodata(v)) return grid.nodata();
      acc += w * v;
    }
  }
  return acc;
}

double sample_nearest(const Grid& grid, double lat, double lon) {
  const auto& g = grid.geometry();
  if (!g.contains(lat, lon)) throw RangeError("point outside grid bounds");
  auto col = static_cast<std::size_t>(std::floor((lon - g.xll) / g.cell));
  auto row = static_cast<std::size_t>(std::floor((g.north() - lat) / g.cell));
  return grid.at(std::min(row, g.nrows - 1), std::min(col, g.ncols - 1));
}

Grid resample(const Grid& grid, const GridGeometry& target, ResampleMethod method) {
  target.validate();
  const auto& s = grid.geometry();
  const bool overlap = target.west() < s.east() && target.east() > s.west() &&
                       target.south() < s.north() && target.north() > s.south();
  if (!overlap) throw ArgumentError("resample target does not overlap source grid");

  Grid out(target);
  parallel_for(target.nrows, [&](std::size_t r0, std::size_t r1) {
    for (std::size_t r = r0; r < r1; ++r) {
      const double lat = target.center_lat(r);
      for (std::size_t c = 0; c < target.ncols; ++c) {
        const double lon = target.center_lon(c);
        if (!s.contains(lat, lon)) continue;
        const double v = method == ResampleMethod::nearest ? sample_nearest(grid, lat, lon)
                                                           : sample_bilinear(grid, lat, lon);
        out.at(r, c) = grid.is_nodata(v) ? target.nodata : v;
      }
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// Filters

namespace {

void check_window(std::size_t k) {
  if (k == 0 || k % 2 == 0) throw ArgumentError("window size must be odd and positive");
}

// Values are filtered as deviations from one grid-wide reference value so
// that a constant field comes back bit-exact.
double reference_value(const Grid& grid) {
  for (double v : grid.values())
    if (!grid.is_nodata(v)) return v;
  return 0.0;
}

// Symmetric 1-D weighted window sum along one axis. `w[d]` is the weight at
// distance d. Terms are added in mirrored pairs so that mirrored inputs give
// bit-identical mirrored outputs.
void pass_rows(std::span<const double> in, std::span<double> out, std::size_t ncols,
               std::size_t nrows, std::span<const double> w) {
  const std::size_t h = w.size() - 1;
  parallel_for(nrows, [&](std::size_t r0, std::size_t r1) {
    for (std::size_t r = r0; r < r1; ++r) {
      for (std::size_t c = 0; c < ncols; ++c) {
        double acc = w[0] * in[r * ncols + c];
        for (std::size_t d = 1; d <= h; ++d) {
          const double up = r >= d ? in[(r - d) * ncols + c] : 0.0;
          const double dn = r + d < nrows ? in[(r + d) * ncols + c] : 0.0;
          acc += w[d] * (up + dn);
        }
        out[r * ncols + c] = acc;
      }
    }
  });
}

void pass_cols(std::span<const double> in, std::span<double> out, std::size_t ncols,
               std::size_t nrows, std::span<const double> w) {
  const std::size_t h = w.size() - 1;
  parallel_for(nrows, [&](std::size_t r0, std::size_t r1) {
    for (std::size_t r = r0; r < r1; ++r) {
      const double* row = in.data() + r * ncols;
      for (std::size_t c = 0; c < ncols; ++c) {
        double acc = w[0] * row[c];
        for (std::size_t d = 1; d <= h; ++d) {
          const double lt = c >= d ? row[c - d] : 0.0;
          const double rt = c + d < ncols ? row[c + d] : 0.0;
          acc += w[d] * (lt + rt);
        }
        out[r * ncols + c] = acc;
      }
    }
  });
}

Grid weighted_window_mean(const Grid& grid, std::span<const double> w) {
  const std::size_t nc = grid.ncols(), nr = grid.nrows(), n = grid.size();
  const double ref = reference_value(grid);
  std::vector<double> dev(n), mask(n);
  for (std::size_t i = 0; i < n; ++i) {
    const bool ok = grid.valid(i);
    dev[i] = ok ? grid[i] - ref : 0.0;
    mask[i] = ok ? 1.0 : 0.0;
  }
  std::vector<double> tmp(n);
  pass_rows(dev, tmp, nc, nr, w);
  pass_cols(tmp, dev, nc, nr, w);
  pass_rows(mask, tmp, nc, nr, w);
  pass_cols(tmp, mask, nc, nr, w);

  Grid out(grid.geometry());
  for (std::size_t i = 0; i < n; ++i) {
    if (mask[i] > 0.0) out[i] = ref + dev[i] / mask[i];
  }
  return out;
}

}  // namespace

Grid uniform_filter(const Grid& grid, std::size_t k) {
  check_window(k);
  const std::vector<double> w(k / 2 + 1, 1.0);
  return weighted_window_mean(grid, w);
}

double default_sigma(std::size_t k) noexcept { return static_cast<double>(k) / 6.0; }

Grid gaussian_filter(const Grid& grid, std::size_t k, double sigma) {
  check_window(k);
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ArgumentError("sigma must be positive");
  std::vector<double> w(k / 2 + 1);
  for (std::size_t d = 0; d < w.size(); ++d) {
    const double x = static_cast<double>(d);
    w[d] = std::exp(-x * x / (2.0 * sigma * sigma));
  }
  return weighted_window_mean(grid, w);
}

Grid gaussian_filter(const Grid& grid, std::size_t k) {
  return gaussian_filter(grid, k, default_sigma(k));
}

double sorted_quantile(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw ArgumentError("quantile of empty sample");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const double frac = pos - static_cast<double>(lo);
  if (lo + 1 >= sorted.size()) return sorted[lo];
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

namespace {

// Counts over value ranks with O(log n) insert/remove and k-th order lookup.
class RankCounter {
 public:
  explicit RankCounter(std::size_t n) : tree_(n + 1, 0) {
    top_ = 1;
    while (top_ * 2 <= n) top_ *= 2;
  }

  void add(std::size_t rank, int delta) {
    total_ += delta;
    for (std::size_t i = rank + 1; i < tree_.size(); i += i & (~i + 1)) tree_[i] += delta;
  }

  int total() const noexcept { return total_; }

  // Rank of the k-th smallest element currently counted (k is 0-based).
  std::size_t kth(int k) const {
    std::size_t pos = 0;
    int remaining = k + 1;
    for (std::size_t step = top_; step > 0; step /= 2) {
      const std::size_t next = pos + step;
      if (next < tree_.size() && tree_[next] < remaining) {
        pos = next;
        remaining -= tree_[next];
      }
    }
    return pos;  // 1-based index pos+1 holds it, i.e. rank pos
  }

 private:
  std::vector<int> tree_;
  std::size_t top_ = 1;
  int total_ = 0;
};

}  // namespace

Grid window_iqr(const Grid& grid, std::size_t k) {
  check_window(k);
  const std::size_t nc = grid.ncols(), nr = grid.nrows(), n = grid.size();
  const std::size_t h = k / 2;

  // Global ranks of valid cells; ties broken by position so ranks are unique.
  std::vector<std::size_t> order;
  order.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    if (grid.valid(i)) order.push_back(i);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return grid[a] < grid[b] || (grid[a] == grid[b] && a < b);
  });
  constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  std::vector<std::size_t> rank(n, kNone);
  std::vector<double> by_rank(order.size());
  for (std::size_t r = 0; r < order.size(); ++r) {
    rank[order[r]] = r;
    by_rank[r] = grid[order[r]];
  }

  Grid out(grid.geometry());
  if (order.size() < 4) return out;

  parallel_for(nr, [&](std::size_t r0, std::size_t r1) {
    RankCounter counter(order.size());
    auto touch_column = [&](std::size_t row_lo, std::size_t row_hi, std::size_t col, int delta) {
      for (std::size_t rr = row_lo; rr <= row_hi; ++rr) {
        const std::size_t rk = rank[rr * nc + col];
        if (rk != kNone) counter.add(rk, delta);
      }
    };
    auto order_stat = [&](double pos) {
      const auto lo = static_cast<int>(std::floor(pos));
      const double frac = pos - lo;
      const double a = by_rank[counter.kth(lo)];
      if (frac == 0.0) return a;
      const double b = by_rank[counter.kth(lo + 1)];
      return a + frac * (b - a);
    };

    for (std::size_t r = r0; r < r1; ++r) {
      const std::size_t row_lo = r >= h ? r - h : 0;
      const std::size_t row_hi = std::min(nr - 1, r + h);
      for (std::size_t c = 0; c <= std::min(h, nc - 1); ++c) touch_column(row_lo, row_hi, c, +1);
      for (std::size_t c = 0; c < nc; ++c) {
        if (c > 0) {
          if (c > h) touch_column(row_lo, row_hi, c - h - 1, -1);
          if (c + h < nc) touch_column(row_lo, row_hi, c + h, +1);
        }
        const int m = counter.total();
        if (m < 4) continue;
        const double span = static_cast<double>(m - 1);
        out.at(r, c) = order_stat(0.75 * span) - order_stat(0.25 * span);
      }
      const std::size_t first = nc > h + 1 ? nc - h - 1 : 0;
      for (std::size_t c = first; c < nc; ++c) touch_column(row_lo, row_hi, c, -1);
    }
  });
  return out;
}

}  // namespace rainstat::raster
