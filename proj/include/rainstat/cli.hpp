#pragma once

// Batch front end: `rainstat <subcommand> --config FILE [--seed N] [--threads N]`.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "rainstat/errors.hpp"

namespace rainstat::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitSolver = 3;

int exit_code(ErrorKind kind) noexcept;

/// Flat key=value run configuration. Relative paths resolve against the
/// directory holding the config file. Malformed values raise ArgumentError;
/// missing input files raise DataError.
class Config {
 public:
  static Config load(const std::filesystem::path& path);
  Config(std::map<std::string, std::string> values, std::filesystem::path base_dir,
         std::string raw_text);

  /// ArgumentError naming the first key not in `allowed`.
  void allow_only(std::initializer_list<std::string_view> allowed) const;

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  std::string text(const std::string& key) const;
  std::string text_or(const std::string& key, const std::string& fallback) const;
  double number(const std::string& key) const;
  double number_or(const std::string& key, double fallback) const;
  std::size_t count(const std::string& key) const;
  std::size_t count_or(const std::string& key, std::size_t fallback) const;
  /// Comma-separated numbers.
  std::vector<double> list_or(const std::string& key, std::vector<double> fallback) const;

  /// Existing input file named by `key`, recorded for the manifest.
  std::filesystem::path input(const std::string& key);
  std::optional<std::filesystem::path> optional_input(const std::string& key);
  /// Existing file referenced from inside another input, also recorded.
  std::filesystem::path extra_input(const std::string& label, const std::filesystem::path& path);

  std::filesystem::path output_dir() const;

  const std::string& raw_text() const noexcept { return raw_; }
  const std::vector<std::pair<std::string, std::filesystem::path>>& inputs() const noexcept {
    return inputs_;
  }

 private:
  std::filesystem::path resolve(const std::string& value) const;

  std::map<std::string, std::string> values_;
  std::filesystem::path base_;
  std::string raw_;
  std::vector<std::pair<std::string, std::filesystem::path>> inputs_;
};

/// Output files staged in memory and written together on success.
class OutputSet {
 public:
  void add(std::string name, std::string content);
  const std::vector<std::pair<std::string, std::string>>& files() const noexcept { return files_; }
  /// Writes every file under a temporary name, then renames them into place.
  /// Temporary files are removed when any write fails.
  void commit(const std::filesystem::path& dir) const;

 private:
  std::vector<std::pair<std::string, std::string>> files_;
};

struct RunContext {
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

/// Executes one subcommand and returns its outputs (manifest included).
OutputSet run_command(const std::string& command, Config& config, const RunContext& context);

/// Full command-line entry point; returns the process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace rainstat::cli
