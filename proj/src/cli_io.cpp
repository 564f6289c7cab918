#include "pdcal/cli_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>
#include <unistd.h>

#include "pdcal/errors.hpp"
#include "pdcal/oracle.hpp"

namespace pdcal {

using nlohmann::json;

namespace {

constexpr std::string_view kSignalHeader = "l_M,m_M";
constexpr std::string_view kSignalHeaderC = "l_M,m_M,c";
constexpr std::string_view kBackgroundHeader = "l_B,m_B";

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

void require_unit(double eta, const char* flag) {
  if (!(eta >= 0.0 && eta <= 1.0)) {
    throw ParameterError(std::string(flag) + " must lie in [0, 1], got " + format_real(eta));
  }
}

void require_nonnegative_finite(double v, const char* flag) {
  if (!std::isfinite(v) || v < 0.0) {
    throw ParameterError(std::string(flag) + " must be finite and >= 0, got " + format_real(v));
  }
}

std::vector<Method> selected_methods(const std::string& selection, bool has_coincidence) {
  if (selection == "all") {
    std::vector<Method> out{Method::Product, Method::Difference, Method::EqualDifference};
    if (has_coincidence) out.push_back(Method::Coincidence);
    return out;
  }
  return {method_from_string(selection)};
}

OutputFormat format_or(const RunConfig& c, OutputFormat fallback) { return c.format.value_or(fallback); }

}  // namespace

// ----------------------------------------------------------------------------
// Parsing helpers
// ----------------------------------------------------------------------------
std::string format_real(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

double parse_real(std::string_view text, std::string_view what) {
  const auto t = trim(text);
  if (t == "inf" || t == "+inf" || t == "infinity") return std::numeric_limits<double>::infinity();
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc{} || ptr != t.data() + t.size() || std::isnan(v)) {
    throw ParameterError(std::string(what) + ": not a number '" + std::string(text) + "'");
  }
  return v;
}

std::vector<double> parse_grid(std::string_view text) {
  std::vector<double> out;
  while (!text.empty()) {
    const auto comma = text.find(',');
    out.push_back(parse_real(text.substr(0, comma), "--grid"));
    if (comma == std::string_view::npos) break;
    text.remove_prefix(comma + 1);
  }
  if (out.empty()) throw ParameterError("--grid is empty");
  return out;
}

std::vector<double> default_curve_grid() {
  std::vector<double> grid;
  for (int i = 1; i <= 100; ++i) grid.push_back(i / 100.0);
  return grid;
}

OutputFormat parse_format(std::string_view name) {
  if (name == "csv") return OutputFormat::Csv;
  if (name == "json") return OutputFormat::Json;
  throw ParameterError("unknown output format '" + std::string(name) + "'");
}

PairDistribution make_distribution(const DistSpec& spec) {
  switch (spec.kind) {
    case DistKind::Poisson: return PairDistribution::poisson(spec.mean);
    case DistKind::Thermal: return PairDistribution::thermal(spec.mean);
    case DistKind::Custom:
      if (spec.pmf_file.empty()) throw ParameterError("--dist custom requires --pmf-file");
      return load_pmf_file(spec.pmf_file);
  }
  throw ParameterError("unknown distribution");
}

void validate(const RunConfig& c) {
  if (c.workers < 1) throw ParameterError("--workers must be >= 1");
  require_unit(c.eta1, "--eta1");
  if (!c.eta2_equal) require_unit(c.eta2, "--eta2");

  switch (c.subcommand) {
    case Subcommand::Simulate:
      if (!c.seed) throw ParameterError("simulate requires an explicit --seed");
      if (!c.samples) throw ParameterError("simulate requires --samples");
      if (c.dist.kind != DistKind::Custom) require_nonnegative_finite(c.dist.mean, "--mean");
      require_nonnegative_finite(c.bg1, "--bg1");
      require_nonnegative_finite(c.bg2, "--bg2");
      if (c.format && *c.format != OutputFormat::Csv) {
        throw ParameterError("simulate writes CSV only");
      }
      break;
    case Subcommand::Estimate:
      if (c.counts.empty() == c.moments.empty()) {
        throw ParameterError("estimate needs exactly one of --counts or --moments");
      }
      if (!c.moments.empty() && !c.background.empty()) {
        throw ParameterError("--background applies to --counts input only");
      }
      if (c.method != "all") (void)method_from_string(c.method);
      break;
    case Subcommand::Curve:
      if (c.method != "product" && c.method != "difference") {
        throw ParameterError("variance curves need --method product or difference");
      }
      if (c.dist.kind != DistKind::Poisson) {
        throw ParameterError("variance curves are defined for a poisson source");
      }
      if (!(c.dist.mean > 0.0)) throw ParameterError("--mean must be > 0 (or inf)");
      if (!c.eta2_equal && !(c.eta2 > 0.0)) throw ParameterError("--eta2 must lie in (0, 1]");
      if (c.samples && *c.samples < 1) throw ParameterError("--samples must be >= 1");
      for (double g : c.grid) {
        if (!(g > 0.0 && g <= 1.0)) {
          throw ParameterError("--grid values must lie in (0, 1], got " + format_real(g));
        }
      }
      break;
    case Subcommand::Oracle:
      if (c.dist.kind != DistKind::Custom) require_nonnegative_finite(c.dist.mean, "--mean");
      if (c.samples && *c.samples < 1) throw ParameterError("--samples must be >= 1");
      break;
  }
}

// ----------------------------------------------------------------------------
// Counts files
// ----------------------------------------------------------------------------
void write_counts_csv(std::ostream& out, const CountsFile& file) {
  for (const auto& [key, value] : file.metadata) out << "# " << key << '=' << value << '\n';
  out << (file.background ? kBackgroundHeader
                          : (file.has_coincidence ? kSignalHeaderC : kSignalHeader))
      << '\n';
  std::string line;
  char buf[24];
  auto append = [&](Count v) {
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    line.append(buf, ptr);
  };
  for (const auto& r : file.records) {
    line.clear();
    append(r.l);
    line += ',';
    append(r.m);
    if (file.has_coincidence && !file.background) {
      line += ',';
      append(r.c.value_or(0));
    }
    line += '\n';
    out << line;
  }
}

CountsFile read_counts_csv(std::istream& in) {
  CountsFile file;
  std::string raw;
  std::size_t line_no = 0;
  bool header_seen = false;
  std::size_t columns = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto line = trim(raw);
    if (line.empty()) continue;
    if (line.front() == '#') {
      if (!header_seen) {
        const auto body = trim(line.substr(1));
        if (const auto eq = body.find('='); eq != std::string_view::npos) {
          file.metadata.emplace_back(std::string(trim(body.substr(0, eq))),
                                     std::string(trim(body.substr(eq + 1))));
        }
      }
      continue;
    }
    if (!header_seen) {
      if (line == kSignalHeader) {
        columns = 2;
      } else if (line == kSignalHeaderC) {
        columns = 3;
        file.has_coincidence = true;
      } else if (line == kBackgroundHeader) {
        columns = 2;
        file.background = true;
      } else {
        throw ParseError("expected header l_M,m_M[,c] or l_B,m_B, got '" + std::string(line) + "'",
                         line_no);
      }
      header_seen = true;
      continue;
    }
    std::array<Count, 3> values{};
    std::size_t field = 0;
    std::string_view rest = line;
    while (true) {
      const auto comma = rest.find(',');
      const auto token = trim(rest.substr(0, comma));
      if (field == columns) throw ParseError("too many fields", line_no);
      const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), values[field]);
      if (token.empty() || ec != std::errc{} || ptr != token.data() + token.size()) {
        throw ParseError("not a non-negative integer count '" + std::string(token) + "'", line_no);
      }
      ++field;
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (field != columns) {
      throw ParseError("expected " + std::to_string(columns) + " fields, got " + std::to_string(field),
                       line_no);
    }
    CountRecord r{values[0], values[1], std::nullopt};
    if (columns == 3) r.c = values[2];
    file.records.push_back(r);
  }
  if (!header_seen) throw ParseError("missing header line", line_no + 1);
  return file;
}

CountsFile read_counts_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open counts file " + path.string());
  return read_counts_csv(in);
}

// ----------------------------------------------------------------------------
// JSON
// ----------------------------------------------------------------------------
json to_json(const MomentSet& mom) {
  json j;
  j["sample_size"] = mom.sample_size ? json(*mom.sample_size) : json(nullptr);
  j["has_coincidence"] = mom.has_coincidence;
  for (Stat s : kAllStats) {
    const std::string key = "mean_" + std::string(stat_name(s));
    const bool coincidence_stat = s == Stat::C || s == Stat::C2;
    j[key] = coincidence_stat && !mom.has_coincidence ? json(nullptr) : json(mom[s]);
  }
  if (mom.cross) {
    json stats = json::array();
    for (Stat s : kAllStats) stats.push_back(stat_name(s));
    j["cross"] = {{"stats", stats}, {"matrix", *mom.cross}};
  } else {
    j["cross"] = nullptr;
  }
  return j;
}

MomentSet moment_set_from_json(const json& root) {
  const json& j = root.contains("moments") ? root.at("moments") : root;
  MomentSet mom;
  try {
    if (j.contains("sample_size") && !j.at("sample_size").is_null()) {
      mom.sample_size = j.at("sample_size").get<std::uint64_t>();
    }
    for (Stat s : {Stat::L, Stat::M, Stat::L2, Stat::M2, Stat::LM, Stat::D2}) {
      mom[s] = j.at("mean_" + std::string(stat_name(s))).get<double>();
    }
    mom.has_coincidence = j.contains("mean_c") && !j.at("mean_c").is_null();
    if (mom.has_coincidence) {
      mom[Stat::C] = j.at("mean_c").get<double>();
      mom[Stat::C2] = j.value("mean_c2", 0.0);
    }
    if (j.contains("cross") && !j.at("cross").is_null()) {
      const auto& cross = j.at("cross");
      const auto stats = cross.at("stats").get<std::vector<std::string>>();
      for (std::size_t i = 0; i < kStatCount; ++i) {
        if (i >= stats.size() || stats[i] != stat_name(kAllStats[i])) {
          throw DataError("cross moment table has unexpected statistic order");
        }
      }
      mom.cross = cross.at("matrix").get<StatMatrix>();
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed moment set JSON: ") + e.what());
  }
  mom.validate();
  return mom;
}

json to_json(const EfficiencyEstimate& est) {
  json j;
  j["method"] = to_string(est.method);
  j["eta1"] = est.eta1;
  j["eta2"] = est.eta2;
  j["var_eta1"] = est.var_eta1 ? json(*est.var_eta1) : json(nullptr);
  j["var_eta2"] = est.var_eta2 ? json(*est.var_eta2) : json(nullptr);
  j["std_eta1"] = est.var_eta1 ? json(std::sqrt(*est.var_eta1)) : json(nullptr);
  j["std_eta2"] = est.var_eta2 ? json(std::sqrt(*est.var_eta2)) : json(nullptr);
  j["background_corrected"] = est.background_corrected;
  j["out_of_range"] = est.out_of_range;
  j["unequal_arms"] = est.unequal_arms;
  return j;
}

// ----------------------------------------------------------------------------
// Commands
// ----------------------------------------------------------------------------
std::string cmd_simulate(const RunConfig& c) {
  validate(c);
  SimulationPlan plan;
  plan.dist = make_distribution(c.dist);
  plan.ch1 = DetectorChannel(c.eta1, c.bg1);
  plan.ch2 = DetectorChannel(c.eta2, c.bg2);
  plan.samples = *c.samples;
  plan.seed = *c.seed;
  plan.with_coincidence = c.with_coincidence;
  plan.blocked = c.blocked;

  CountsFile file;
  file.background = c.blocked;
  file.has_coincidence = c.with_coincidence && !c.blocked;
  file.metadata = {{"pdcal", "counts"},
                   {"run", c.blocked ? "background" : "signal"},
                   {"seed", std::to_string(*c.seed)},
                   {"dist", std::string(to_string(c.dist.kind))}};
  if (c.dist.kind == DistKind::Custom) {
    file.metadata.emplace_back("pmf_file", c.dist.pmf_file.string());
  } else {
    file.metadata.emplace_back("mean", format_real(c.dist.mean));
  }
  file.metadata.emplace_back("eta1", format_real(c.eta1));
  file.metadata.emplace_back("eta2", format_real(c.eta2));
  file.metadata.emplace_back("bg1", format_real(c.bg1));
  file.metadata.emplace_back("bg2", format_real(c.bg2));
  file.metadata.emplace_back("samples", std::to_string(*c.samples));
  file.records = simulate_records(plan, c.workers);

  std::ostringstream out;
  write_counts_csv(out, file);
  return out.str();
}

std::string cmd_estimate(const RunConfig& c) {
  validate(c);
  json report;
  report["format"] = "pdcal-estimate/1";

  MomentSet used;
  std::optional<MomentSet> raw, bg;
  if (!c.moments.empty()) {
    std::ifstream in(c.moments);
    if (!in) throw DataError("cannot open moments file " + c.moments.string());
    json j;
    try {
      j = json::parse(in);
    } catch (const json::exception& e) {
      throw DataError("moments file " + c.moments.string() + " is not valid JSON: " + e.what());
    }
    used = moment_set_from_json(j);
    if (!used.sample_size && c.samples) used.sample_size = *c.samples;
    report["input"] = {{"moments", c.moments.string()}};
  } else {
    const auto counts = read_counts_file(c.counts);
    raw = sample_moments(counts.records);
    report["input"] = {{"counts", c.counts.string()},
                       {"records", counts.records.size()},
                       {"has_coincidence", counts.has_coincidence}};
    if (!c.background.empty()) {
      const auto background = read_counts_file(c.background);
      auto bg_records = background.records;
      for (auto& r : bg_records) r.c.reset();
      bg = sample_moments(bg_records);
      report["input"]["background"] = c.background.string();
      report["input"]["background_records"] = bg_records.size();
      used = correct_background(*raw, *bg);
      report["raw_moments"] = to_json(*raw);
      report["background_moments"] = to_json(*bg);
    } else {
      used = *raw;
    }
  }
  report["background_corrected"] = bg.has_value();
  report["moments"] = to_json(used);

  if (c.method == "coincidence" && !used.has_coincidence) {
    throw MethodUnavailable("coincidence method needs a coincidence (c) column");
  }
  json estimates = json::array();
  json unavailable = json::array();
  if (c.method == "all" && !used.has_coincidence) {
    unavailable.push_back({{"method", "coincidence"}, {"reason", "no coincidence (c) column"}});
  }
  std::vector<EfficiencyEstimate> results;
  for (Method m : selected_methods(c.method, used.has_coincidence)) {
    auto est = estimate(m, used);
    est.background_corrected = bg.has_value();
    std::optional<VarianceReport> var;
    if (bg) {
      var = empirical_variance_corrected(*raw, *bg, m);
    } else if (used.sample_size && used.cross) {
      var = empirical_variance(used, m);
    }
    if (var) {
      est.var_eta1 = var->var_eta1;
      est.var_eta2 = var->var_eta2;
    }
    auto je = to_json(est);
    je["variance_source"] = var ? json(to_string(var->source)) : json(nullptr);
    estimates.push_back(je);
    results.push_back(est);
  }
  report["estimates"] = estimates;
  report["unavailable"] = unavailable;

  if (format_or(c, OutputFormat::Json) == OutputFormat::Json) return report.dump(2) + "\n";
  std::ostringstream out;
  out << "method,eta1,eta2,var_eta1,var_eta2,background_corrected,out_of_range,unequal_arms\n";
  for (const auto& e : results) {
    out << to_string(e.method) << ',' << format_real(e.eta1) << ',' << format_real(e.eta2) << ','
        << (e.var_eta1 ? format_real(*e.var_eta1) : "") << ','
        << (e.var_eta2 ? format_real(*e.var_eta2) : "") << ',' << e.background_corrected << ','
        << e.out_of_range << ',' << e.unequal_arms << '\n';
  }
  return out.str();
}

std::string cmd_variance_curve(const RunConfig& c) {
  validate(c);
  const Method method = method_from_string(c.method);
  const auto mode = c.eta2_equal ? Eta2Mode::equal_to_eta1() : Eta2Mode::fixed_at(c.eta2);
  const auto grid = c.grid.empty() ? default_curve_grid() : c.grid;
  const std::uint64_t samples = c.samples.value_or(1);
  const auto points = variance_curve(method, mode, c.dist.mean, samples, grid);

  const std::string eta2 = c.eta2_equal ? "equal" : format_real(c.eta2);
  if (format_or(c, OutputFormat::Csv) == OutputFormat::Json) {
    json j;
    j["format"] = "pdcal-variance-curve/1";
    j["method"] = c.method;
    j["eta2"] = eta2;
    j["mean"] = format_real(c.dist.mean);
    j["samples"] = samples;
    j["points"] = json::array();
    for (const auto& p : points) j["points"].push_back({{"eta1", p.eta1}, {"variance", p.variance}});
    return j.dump(2) + "\n";
  }
  std::ostringstream out;
  out << "# pdcal=variance-curve\n"
      << "# method=" << c.method << '\n'
      << "# eta2=" << eta2 << '\n'
      << "# mean=" << format_real(c.dist.mean) << '\n'
      << "# samples=" << samples << '\n'
      << "eta1,variance\n";
  for (const auto& p : points) out << format_real(p.eta1) << ',' << format_real(p.variance) << '\n';
  return out.str();
}

std::string cmd_oracle(const RunConfig& c) {
  validate(c);
  const auto dist = make_distribution(c.dist);
  const ExactMomentRequest req{dist, c.eta1, c.eta2, std::nullopt};
  const auto mom = exact_moments(req);
  const std::uint64_t samples = c.samples.value_or(1);

  if (format_or(c, OutputFormat::Json) == OutputFormat::Csv) {
    std::ostringstream out;
    out << "stat,mean\n";
    for (Stat s : kAllStats) out << stat_name(s) << ',' << format_real(mom[s]) << '\n';
    return out.str();
  }
  StatMatrix cov{};
  for (Stat u : kAllStats) {
    for (Stat v : kAllStats) {
      cov[index(u)][index(v)] = mom.covariance(u, v) / static_cast<double>(samples);
    }
  }
  json stats = json::array();
  for (Stat s : kAllStats) stats.push_back(stat_name(s));
  json j;
  j["format"] = "pdcal-oracle/1";
  j["parameters"] = {{"dist", to_string(dist.kind())},
                     {"mean", dist.mean()},
                     {"eta1", c.eta1},
                     {"eta2", c.eta2},
                     {"cutoff", summation_cutoff(dist)}};
  j["moments"] = to_json(mom);
  j["covariances"] = {{"samples", samples}, {"stats", stats}, {"matrix", cov}};
  return j.dump(2) + "\n";
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  auto tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw DataError("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw DataError("cannot move output into place at " + path.string() + ": " + ec.message());
  }
}

void run(const RunConfig& config, std::ostream& fallback) {
  validate(config);
  std::string content;
  switch (config.subcommand) {
    case Subcommand::Simulate: content = cmd_simulate(config); break;
    case Subcommand::Estimate: content = cmd_estimate(config); break;
    case Subcommand::Curve: content = cmd_variance_curve(config); break;
    case Subcommand::Oracle: content = cmd_oracle(config); break;
  }
  if (config.out.empty()) {
    fallback << content;
  } else {
    write_file_atomic(config.out, content);
  }
}

}  // namespace pdcal
