// Copyright 2026 The drsim Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Command-line front end: configuration parsing (flags over a key=value
// config file over defaults) and the run that writes tables, diagnostics and
// a replayable manifest.

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "drsim/dgp.hpp"
#include "drsim/gbm.hpp"
#include "drsim/harness.hpp"
#include "drsim/report.hpp"

namespace drsim {

class ConfigError : public Error {
 public:
  using Error::Error;
};

enum class TableChoice { kTable1, kTable2, kBoth };
enum class GbmProfile { kFull, kDesk };
enum class OutputFormat { kCsv, kMarkdown };

struct RunConfig {
  TableChoice table = TableChoice::kBoth;
  int n = 1000;
  int replicates = 1000;
  std::uint64_t seed = 20070101;
  GbmProfile gbm_profile = GbmProfile::kDesk;
  bool ipw_normalized = true;
  std::optional<double> weight_cap;
  BalanceReference balance_reference = BalanceReference::kDefault;
  OutputFormat output_format = OutputFormat::kCsv;
  std::string output_path = "drsim_out";

  friend bool operator==(const RunConfig&, const RunConfig&) = default;

  void validate() const {
    if (replicates < 1) throw ConfigError("replicates: must be >= 1");
    if (n < 8) throw ConfigError("n: must be >= 8");
    if (weight_cap && !(*weight_cap > 1.0)) {
      throw ConfigError("weight_cap: must be greater than 1");
    }
  }

  SimulationConfig simulation(int threads) const {
    SimulationConfig s;
    s.n = n;
    s.replicates = replicates;
    s.seed = seed;
    s.gbm = gbm_profile == GbmProfile::kFull ? GbmParams::full() : GbmParams::desk();
    s.ipw_normalized = ipw_normalized;
    s.weight_cap = weight_cap;
    s.balance_reference = balance_reference;
    s.threads = threads;
    return s;
  }

  std::vector<TableLayout> layouts() const {
    switch (table) {
      case TableChoice::kTable1: return {TableLayout::kTable1};
      case TableChoice::kTable2: return {TableLayout::kTable2};
      case TableChoice::kBoth: break;
    }
    return {TableLayout::kTable1, TableLayout::kTable2};
  }
};

// Options that steer a single invocation but are not part of the replayable
// configuration.
struct Invocation {
  RunConfig config;
  std::optional<std::string> only_cell;
  bool dump_datasets = false;
  std::optional<int> dump_gbm_replicate;
  bool help = false;
};

namespace detail {

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  std::istringstream in(v);
  T value{};
  in >> value;
  if (in.fail() || !in.eof()) {
    throw ConfigError(key + ": invalid number '" + v + "'");
  }
  return value;
}

inline void apply_key(RunConfig& c, const std::string& key, const std::string& v) {
  if (key == "table") {
    if (v == "table1") c.table = TableChoice::kTable1;
    else if (v == "table2") c.table = TableChoice::kTable2;
    else if (v == "both") c.table = TableChoice::kBoth;
    else throw ConfigError("table: expected table1, table2 or both, got '" + v + "'");
  } else if (key == "n") {
    c.n = parse_number<int>(key, v);
  } else if (key == "replicates") {
    c.replicates = parse_number<int>(key, v);
  } else if (key == "seed") {
    if (!v.empty() && v[0] == '-') throw ConfigError("seed: must be non-negative");
    c.seed = parse_number<std::uint64_t>(key, v);
  } else if (key == "gbm_profile") {
    if (v == "full") c.gbm_profile = GbmProfile::kFull;
    else if (v == "desk") c.gbm_profile = GbmProfile::kDesk;
    else throw ConfigError("gbm_profile: expected full or desk, got '" + v + "'");
  } else if (key == "ipw_normalized") {
    c.ipw_normalized = parse_bool(key, v);
  } else if (key == "weight_cap") {
    if (v == "none") c.weight_cap.reset();
    else c.weight_cap = parse_number<double>(key, v);
  } else if (key == "balance_reference") {
    if (v == "default") c.balance_reference = BalanceReference::kDefault;
    else if (v == "respondents_vs_nonrespondents")
      c.balance_reference = BalanceReference::kNonrespondents;
    else throw ConfigError("balance_reference: expected default or "
                           "respondents_vs_nonrespondents, got '" + v + "'");
  } else if (key == "output_format") {
    if (v == "csv") c.output_format = OutputFormat::kCsv;
    else if (v == "markdown") c.output_format = OutputFormat::kMarkdown;
    else throw ConfigError("output_format: expected csv or markdown, got '" + v + "'");
  } else if (key == "output_path") {
    if (v.empty()) throw ConfigError("output_path: must not be empty");
    c.output_path = v;
  } else {
    throw ConfigError("unknown configuration key '" + key + "'");
  }
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

// Flat key=value lines; '#' starts a comment.
inline void apply_config_text(RunConfig& c, std::istream& in) {
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key=value");
    }
    detail::apply_key(c, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
  }
}

inline std::string config_text(const RunConfig& c) {
  std::ostringstream out;
  const char* tables[] = {"table1", "table2", "both"};
  out << "table=" << tables[static_cast<int>(c.table)] << '\n'
      << "n=" << c.n << '\n'
      << "replicates=" << c.replicates << '\n'
      << "seed=" << c.seed << '\n'
      << "gbm_profile=" << (c.gbm_profile == GbmProfile::kFull ? "full" : "desk") << '\n'
      << "ipw_normalized=" << (c.ipw_normalized ? "true" : "false") << '\n'
      << "weight_cap=" << (c.weight_cap ? format_double(*c.weight_cap) : "none") << '\n'
      << "balance_reference="
      << (c.balance_reference == BalanceReference::kDefault ? "default"
                                                            : "respondents_vs_nonrespondents")
      << '\n'
      << "output_format=" << (c.output_format == OutputFormat::kCsv ? "csv" : "markdown")
      << '\n'
      << "output_path=" << c.output_path << '\n';
  return out.str();
}

inline Invocation parse_config(const std::vector<std::string>& args) {
  CLI::App app{"drsim: IPW and doubly robust estimators under nonresponse"};
  std::map<std::string, std::string> flags;
  const std::vector<std::pair<std::string, std::string>> keyed = {
      {"table", "table1, table2 or both"},
      {"n", "sample size per replicate"},
      {"replicates", "number of simulated datasets"},
      {"seed", "base seed"},
      {"gbm-profile", "full or desk"},
      {"ipw-normalized", "true or false"},
      {"weight-cap", "cap on POP weights (> 1) or none"},
      {"balance-reference", "default or respondents_vs_nonrespondents"},
      {"output-format", "csv or markdown"},
      {"output", "output directory"},
  };
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  for (const auto& [name, help] : keyed) {
    app.add_option("--" + name, flags[name], help);
  }
  std::string config_file, only_cell;
  int dump_gbm = -1;
  bool dump_datasets = false;
  app.add_option("--config", config_file, "key=value configuration file");
  app.add_option("--only-cell", only_cell, "run a single cell by id");
  app.add_flag("--dump-datasets", dump_datasets, "write simulated datasets as CSV");
  app.add_option("--dump-gbm", dump_gbm, "write boosted models for this replicate");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    Invocation inv;
    inv.help = true;
    return inv;
  } catch (const CLI::ParseError& e) {
    throw ConfigError(std::string(e.what()) + "\n" + app.help());
  }

  Invocation inv;
  if (!config_file.empty()) {
    std::ifstream in(config_file);
    if (!in) throw ConfigError("config: cannot open '" + config_file + "'");
    apply_config_text(inv.config, in);
  }
  for (const auto& [name, help] : keyed) {
    if (app.count("--" + name) == 0) continue;
    std::string key = name == "output" ? "output_path" : name;
    for (auto& ch : key) ch = ch == '-' ? '_' : ch;
    detail::apply_key(inv.config, key, flags[name]);
  }
  inv.config.validate();
  if (!only_cell.empty()) inv.only_cell = only_cell;
  inv.dump_datasets = dump_datasets;
  if (dump_gbm >= 0) inv.dump_gbm_replicate = dump_gbm;
  return inv;
}

inline std::string usage() {
  return "usage: drsim [--table table1|table2|both] [--n N] [--replicates R] [--seed S]\n"
         "             [--gbm-profile full|desk] [--ipw-normalized true|false]\n"
         "             [--weight-cap C|none] [--balance-reference default|"
         "respondents_vs_nonrespondents]\n"
         "             [--output-format csv|markdown] [--output DIR] [--config FILE]\n"
         "             [--only-cell ID] [--dump-datasets] [--dump-gbm REPLICATE]\n";
}

inline int thread_count_from_env() {
  if (const char* v = std::getenv("DRSIM_THREADS")) {
    const int t = std::atoi(v);
    if (t > 0) return t;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// Looks up a cell id such as "table1:gbm:x:pop:ks-fit-z".
inline CellSpec find_cell(const std::string& id, bool ipw_normalized) {
  for (TableLayout layout : {TableLayout::kTable1, TableLayout::kTable2}) {
    for (const CellSpec& cell : table_cells(layout, ipw_normalized)) {
      if (cell.id == id) return cell;
    }
  }
  throw ConfigError("only-cell: unknown cell id '" + id + "'");
}

namespace detail {

inline std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

}  // namespace detail

inline void write_manifest(const std::filesystem::path& dir, const RunConfig& c,
                           const std::vector<std::string>& cell_ids) {
  auto out = detail::open_output(dir / "manifest.txt");
  out << "# drsim run manifest; re-run with: drsim --config manifest.txt\n";
  out << "# cells:";
  for (const auto& id : cell_ids) out << ' ' << id;
  out << '\n' << config_text(c);
}

// Runs the configured simulation and writes every output file. Returns the
// process exit code: 0 success, 2 cell abort. Config errors are thrown.
inline int run(const Invocation& inv, std::ostream& log = std::cerr,
               int threads = thread_count_from_env()) {
  const RunConfig& c = inv.config;
  c.validate();
  const SimulationConfig sim = c.simulation(threads);
  const std::filesystem::path dir(c.output_path);
  std::filesystem::create_directories(dir);

  try {
    if (inv.only_cell) {
      const CellSpec cell = find_cell(*inv.only_cell, c.ipw_normalized);
      const CellResult result = run_cell(cell, sim);
      auto out = detail::open_output(dir / "only_cell.csv");
      write_estimates_header(out);
      write_estimates(out, result);
      log << cell.id << ": rmse " << format_double(result.rmse()) << " over "
          << result.estimates.size() << " replicates, " << result.failures()
          << " failures\n";
      return 0;
    }

    const TableRun run = run_tables(c.layouts(), sim, true);
    std::vector<std::string> ids;
    for (const auto& cell : run.output.cells) ids.push_back(cell.cell.id);
    write_manifest(dir, c, ids);

    auto diag = detail::open_output(dir / "diagnostics.csv");
    write_diagnostics_header(diag);
    for (const RmseTable& table : run.tables) {
      const std::string base(to_string(table.layout));
      if (c.output_format == OutputFormat::kCsv) {
        auto out = detail::open_output(dir / (base + ".csv"));
        write_table_csv(out, table);
      } else {
        auto out = detail::open_output(dir / (base + ".md"));
        write_table_markdown(out, table);
      }
      write_diagnostics(diag, table);
      write_table_markdown(log, table);
      log << '\n';
    }
    auto est = detail::open_output(dir / "estimates.csv");
    write_estimates_header(est);
    for (const auto& cell : run.output.cells) write_estimates(est, cell);
    auto weights = detail::open_output(dir / "weights.csv");
    write_weight_diagnostics(weights, run.output.weight_diagnostics);

    if (inv.dump_datasets) {
      for (bool interaction : {false, true}) {
        auto out = detail::open_output(
            dir / (interaction ? "datasets_interaction.csv" : "datasets_ks.csv"));
        write_dataset_csv_header(out);
        for (int r = 0; r < c.replicates; ++r) {
          write_dataset_csv(out, generate_replicate(sim.scenario(interaction),
                                                    static_cast<std::uint64_t>(r)));
        }
      }
    }
    if (inv.dump_gbm_replicate) {
      const Dataset d = generate_replicate(
          sim.scenario(false), static_cast<std::uint64_t>(*inv.dump_gbm_replicate));
      for (CovariateSet set : {CovariateSet::kZ, CovariateSet::kX}) {
        const std::string prefix(to_string(set));
        std::vector<std::string> labels;
        for (int j = 1; j <= kNumCovariates; ++j) labels.push_back(prefix + std::to_string(j));
        auto out = detail::open_output(
            dir / ("gbm_r" + std::to_string(*inv.dump_gbm_replicate) + "_" + prefix + ".txt"));
        dump_model(out, boost_propensity(d.covariates(set), d.t, sim.gbm, labels));
      }
    }
  } catch (const CellAborted& e) {
    log << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

}  // namespace drsim
