#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include <unistd.h>

#include "rainstat/raster.hpp"

namespace testing_support {

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("rainstat_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  out << content;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline rainstat::raster::GridGeometry geometry(std::size_t ncols, std::size_t nrows,
                                               double cell = 1.0, double xll = 0.0,
                                               double yll = 0.0) {
  rainstat::raster::GridGeometry g;
  g.ncols = ncols;
  g.nrows = nrows;
  g.xll = xll;
  g.yll = yll;
  g.cell = cell;
  return g;
}

inline rainstat::raster::Grid random_grid(const rainstat::raster::GridGeometry& g, std::mt19937_64& rng,
                                          double lo, double hi, double nodata_fraction = 0.0) {
  std::uniform_real_distribution<double> val(lo, hi), coin(0.0, 1.0);
  rainstat::raster::Grid out(g);
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = coin(rng) < nodata_fraction ? g.nodata : val(rng);
  return out;
}

}  // namespace testing_support
