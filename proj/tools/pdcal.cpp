// pdcal -- absolute detection-efficiency calibration from photon-pair singles.
//
//   pdcal simulate --dist poisson --mean 5 --eta1 0.6 --eta2 0.4 --samples 100000 --seed 42 --out counts.csv
//   pdcal estimate --counts counts.csv [--background bg.csv] [--method all]
//   pdcal curve    --method difference --eta2 0.1 --mean inf
//   pdcal oracle   --dist thermal --mean 2 --eta1 0.5 --eta2 0.5
//
// Exit codes: 0 success, 2 parameter error, 3 data error, 4 method unavailable.
#include <iostream>

#include "CLI11.hpp"
#include "pdcal/cli_io.hpp"
#include "pdcal/errors.hpp"

namespace {

struct RawOptions {
  std::string dist = "poisson";
  std::string mean = "0";
  std::string pmf_file;
  double eta1 = 1.0;
  std::string eta2 = "1";
  double bg1 = 0.0;
  double bg2 = 0.0;
  std::optional<std::uint64_t> samples;
  std::optional<std::uint64_t> seed;
  std::string method = "all";
  std::string counts;
  std::string background;
  std::string moments;
  std::string out;
  std::string format;
  unsigned workers = 1;
  bool no_coincidence = false;
  bool blocked = false;
  std::string grid;
};

void add_source(CLI::App* cmd, RawOptions& o) {
  cmd->add_option("--dist", o.dist, "pair distribution: poisson | thermal | custom")
      ->check(CLI::IsMember({"poisson", "thermal", "custom"}));
  cmd->add_option("--mean", o.mean, "mean pair number N per sample window");
  cmd->add_option("--pmf-file", o.pmf_file, "custom pair-number pmf, one probability per line");
  cmd->add_option("--eta1", o.eta1, "detection efficiency of arm 1");
  cmd->add_option("--eta2", o.eta2, "detection efficiency of arm 2");
}

void add_output(CLI::App* cmd, RawOptions& o) {
  cmd->add_option("--out", o.out, "output path (default: stdout)");
  cmd->add_option("--format", o.format, "csv | json")->check(CLI::IsMember({"csv", "json"}));
}

pdcal::RunConfig to_config(pdcal::Subcommand sub, const RawOptions& o) {
  pdcal::RunConfig c;
  c.subcommand = sub;
  c.dist.kind = pdcal::dist_kind_from_string(o.dist);
  c.dist.mean = pdcal::parse_real(o.mean, "--mean");
  c.dist.pmf_file = o.pmf_file;
  c.eta1 = o.eta1;
  if (o.eta2 == "equal") {
    c.eta2_equal = true;
  } else {
    c.eta2 = pdcal::parse_real(o.eta2, "--eta2");
  }
  c.bg1 = o.bg1;
  c.bg2 = o.bg2;
  c.samples = o.samples;
  c.seed = o.seed;
  c.method = o.method;
  c.counts = o.counts;
  c.background = o.background;
  c.moments = o.moments;
  c.out = o.out;
  if (!o.format.empty()) c.format = pdcal::parse_format(o.format);
  c.workers = o.workers;
  c.with_coincidence = !o.no_coincidence;
  c.blocked = o.blocked;
  if (!o.grid.empty()) c.grid = pdcal::parse_grid(o.grid);
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Absolute photo-detection efficiency from photon-pair singles statistics"};
  app.require_subcommand(1);
  RawOptions o;

  auto* simulate = app.add_subcommand("simulate", "simulate count records (CSV)");
  add_source(simulate, o);
  simulate->add_option("--bg1", o.bg1, "mean background counts per window, arm 1");
  simulate->add_option("--bg2", o.bg2, "mean background counts per window, arm 2");
  simulate->add_option("--samples", o.samples, "number of sample windows M")->required();
  simulate->add_option("--seed", o.seed, "64-bit RNG seed")->required();
  simulate->add_option("--workers", o.workers, "worker threads (output does not depend on it)");
  simulate->add_flag("--no-coincidence", o.no_coincidence, "omit the coincidence column");
  simulate->add_flag("--blocked", o.blocked, "source blocked: write a background run (l_B,m_B)");
  add_output(simulate, o);

  auto* estimate = app.add_subcommand("estimate", "estimate efficiencies from count records");
  estimate->add_option("--counts", o.counts, "counts CSV");
  estimate->add_option("--background", o.background, "background run CSV");
  estimate->add_option("--moments", o.moments, "MomentSet JSON (e.g. oracle output)");
  estimate->add_option("--samples", o.samples, "sample size for a --moments input without one");
  estimate->add_option("--method", o.method,
                       "product | difference | equal-difference | coincidence | all")
      ->check(CLI::IsMember({"product", "difference", "equal-difference", "coincidence", "all"}));
  add_output(estimate, o);

  auto* curve = app.add_subcommand("curve", "variance of eta1 versus eta1 (Poisson source)");
  curve->alias("variance-curve");
  curve->add_option("--method", o.method, "product | difference")
      ->check(CLI::IsMember({"product", "difference"}));
  curve->add_option("--eta2", o.eta2, "fixed eta2, or 'equal' to follow eta1");
  curve->add_option("--mean", o.mean, "mean pair number N, or 'inf' for the N >> 1 limit");
  curve->add_option("--samples", o.samples, "sample size M (default 1)");
  curve->add_option("--grid", o.grid, "comma-separated eta1 values (default 0.01..1.00)");
  add_output(curve, o);

  auto* oracle = app.add_subcommand("oracle", "exact moments and covariances of the model");
  add_source(oracle, o);
  oracle->add_option("--samples", o.samples, "sample size M for covariances (default 1)");
  add_output(oracle, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    pdcal::Subcommand sub = pdcal::Subcommand::Simulate;
    if (estimate->parsed()) sub = pdcal::Subcommand::Estimate;
    if (curve->parsed()) {
      sub = pdcal::Subcommand::Curve;
      if (o.method == "all") o.method = "difference";
      if (curve->count("--mean") == 0) o.mean = "inf";
    }
    if (oracle->parsed()) sub = pdcal::Subcommand::Oracle;
    pdcal::run(to_config(sub, o), std::cout);
  } catch (const pdcal::Error& e) {
    std::cerr << "pdcal: " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "pdcal: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
