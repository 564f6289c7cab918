// ============================================================================
// cli_io.hpp -- run configuration, file formats and command drivers
//
// Counts file (CSV):
//   # key=value            metadata lines (seed, parameters), optional
//   l_M,m_M[,c]            header; a source-blocked background run uses l_B,m_B
//   3,2,1                  one sample window per row
//
// Reports are JSON (nlohmann) or CSV. Every command is a deterministic
// function of (config, seed, input files) and returns the output text; the
// CLI writes it to --out atomically or to stdout.
// ============================================================================
#pragma once
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "pdcal/detector_model.hpp"
#include "pdcal/error_model.hpp"
#include "pdcal/estimators.hpp"

namespace pdcal {

enum class Subcommand { Simulate, Estimate, Curve, Oracle };
enum class OutputFormat { Csv, Json };

struct DistSpec {
  DistKind kind = DistKind::Poisson;
  /// May be +infinity for variance curves (N >> 1 limit).
  double mean = 0.0;
  std::filesystem::path pmf_file;
};

struct RunConfig {
  Subcommand subcommand = Subcommand::Simulate;
  DistSpec dist;
  double eta1 = 1.0;
  double eta2 = 1.0;
  /// Curves only: eta2 follows eta1.
  bool eta2_equal = false;
  double bg1 = 0.0;
  double bg2 = 0.0;
  std::optional<std::uint64_t> samples;
  std::optional<std::uint64_t> seed;
  /// product | difference | equal-difference | coincidence | all
  std::string method = "all";
  std::filesystem::path counts;
  std::filesystem::path background;
  std::filesystem::path moments;
  std::filesystem::path out;
  std::optional<OutputFormat> format;
  unsigned workers = 1;
  bool with_coincidence = true;
  bool blocked = false;
  std::vector<double> grid;
};

/// Checks every numeric field against its domain before any work starts.
/// Throws ParameterError.
void validate(const RunConfig& config);

[[nodiscard]] PairDistribution make_distribution(const DistSpec& spec);
[[nodiscard]] OutputFormat parse_format(std::string_view name);
/// Accepts finite decimals and "inf".
[[nodiscard]] double parse_real(std::string_view text, std::string_view what);
/// Comma-separated list of reals.
[[nodiscard]] std::vector<double> parse_grid(std::string_view text);
/// 0.01, 0.02, ..., 1.00
[[nodiscard]] std::vector<double> default_curve_grid();

/// Shortest round-trip decimal representation.
[[nodiscard]] std::string format_real(double v);

// ----------------------------------------------------------------------------
// Counts files
// ----------------------------------------------------------------------------
struct CountsFile {
  std::vector<std::pair<std::string, std::string>> metadata;
  std::vector<CountRecord> records;
  bool background = false;  // header l_B,m_B
  bool has_coincidence = false;
};

void write_counts_csv(std::ostream& out, const CountsFile& file);
/// Throws ParseError (with 1-based line number) on malformed input.
[[nodiscard]] CountsFile read_counts_csv(std::istream& in);
[[nodiscard]] CountsFile read_counts_file(const std::filesystem::path& path);

// ----------------------------------------------------------------------------
// JSON schema
// ----------------------------------------------------------------------------
[[nodiscard]] nlohmann::json to_json(const MomentSet& mom);
/// Accepts a MomentSet object, or any object holding one under "moments".
[[nodiscard]] MomentSet moment_set_from_json(const nlohmann::json& j);
[[nodiscard]] nlohmann::json to_json(const EfficiencyEstimate& est);

// ----------------------------------------------------------------------------
// Commands
// ----------------------------------------------------------------------------
[[nodiscard]] std::string cmd_simulate(const RunConfig& config);
[[nodiscard]] std::string cmd_estimate(const RunConfig& config);
[[nodiscard]] std::string cmd_variance_curve(const RunConfig& config);
[[nodiscard]] std::string cmd_oracle(const RunConfig& config);

/// Validates, runs the subcommand and writes its output (atomically to
/// config.out when set, else to `fallback`).
void run(const RunConfig& config, std::ostream& fallback);

/// Writes to a temporary sibling and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

}  // namespace pdcal
