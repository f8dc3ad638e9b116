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

// Monte Carlo driver: evaluates every estimator cell of the two comparison
// tables over R replicates and reduces them to RMSE ratios against OLS.
//
// Both generating scenarios use the same seed, so a replicate index maps to
// the same covariates and response pattern in each; only Y differs. All
// propensity fits for a replicate are computed once and shared by every
// cell that needs them.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <tuple>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "drsim/common.hpp"
#include "drsim/dgp.hpp"
#include "drsim/estimators.hpp"
#include "drsim/gbm.hpp"
#include "drsim/linear_models.hpp"
#include "drsim/propensity.hpp"
#include "drsim/weighting.hpp"

namespace drsim {

class CellAborted : public Error {
 public:
  CellAborted(std::string cell, const std::string& why)
      : Error("cell " + cell + " aborted: " + why), cell_(std::move(cell)) {}
  const std::string& cell() const { return cell_; }

 private:
  std::string cell_;
};

inline double rmse(std::span<const double> estimates, double truth = kTrueMean) {
  if (estimates.empty()) throw InvalidArgument("rmse: no estimates");
  double sum_sq = 0.0;
  for (double e : estimates) sum_sq += (e - truth) * (e - truth);
  return std::sqrt(sum_sq / static_cast<double>(estimates.size()));
}

struct SimulationConfig {
  int n = 200;
  int replicates = 1000;
  std::uint64_t seed = 20070101;
  GbmParams gbm = GbmParams::desk();
  bool ipw_normalized = true;
  std::optional<double> weight_cap;
  BalanceReference balance_reference = BalanceReference::kDefault;
  int threads = 1;

  Scenario scenario(bool interaction) const { return {n, interaction, seed}; }
};

enum class TableLayout { kTable1, kTable2 };

inline std::string_view to_string(TableLayout t) {
  return t == TableLayout::kTable1 ? "table1" : "table2";
}

struct OutcomeColumn {
  std::string id;
  std::string title;
  bool interaction_scenario = false;
  OutcomeModel model;
};

inline const std::vector<OutcomeColumn>& outcome_columns() {
  static const std::vector<OutcomeColumn> columns = {
      {"ks-fit-z", "K&S model: fit with Z", false, {CovariateSet::kZ, false}},
      {"ks-fit-x", "K&S model: fit with X", false, {CovariateSet::kX, false}},
      {"int-fit-z-int", "With interaction: fit with Z and interactions", true,
       {CovariateSet::kZ, true}},
      {"int-fit-z", "With interaction: fit with Z, no interactions", true,
       {CovariateSet::kZ, false}},
      {"int-fit-x", "With interaction: fit with X", true, {CovariateSet::kX, false}},
  };
  return columns;
}

// Column whose boosted/robit DR rows switch to Z propensity covariates.
inline constexpr std::string_view kStarredColumn = "int-fit-z";

struct TableRow {
  Family family = Family::kOls;
  PsMethod ps_method = PsMethod::kNone;
  std::optional<CovariateSet> ps_covariates;
  Scheme scheme = Scheme::kNone;
  bool z_in_starred_column = false;

  std::string label() const {
    if (family == Family::kOls) return "OLS";
    std::string s(to_string(ps_method));
    s += ' ';
    s += to_string(*ps_covariates);
    s += ' ';
    s += family == Family::kIpw ? std::string(to_string(scheme)) : std::string(to_string(family));
    return s;
  }
};

inline std::vector<TableRow> table_rows(TableLayout layout) {
  std::vector<TableRow> rows = {
      {Family::kOls, PsMethod::kNone, std::nullopt, Scheme::kNone, false}};
  const CovariateSet sets[] = {CovariateSet::kZ, CovariateSet::kX};
  if (layout == TableLayout::kTable1) {
    for (PsMethod m : {PsMethod::kLogistic, PsMethod::kGbm, PsMethod::kRobit1}) {
      for (CovariateSet c : sets) {
        for (Scheme s : {Scheme::kPop, Scheme::kNr}) {
          rows.push_back({Family::kIpw, m, c, s, false});
        }
      }
    }
    return rows;
  }
  for (CovariateSet c : sets) {
    for (Family f : {Family::kBc, Family::kWls}) {
      rows.push_back({f, PsMethod::kLogistic, c, Scheme::kNone, false});
    }
  }
  for (PsMethod m : {PsMethod::kGbm, PsMethod::kRobit1}) {
    for (Family f : {Family::kBc, Family::kWls}) {
      rows.push_back({f, m, CovariateSet::kX, Scheme::kNone, true});
    }
  }
  return rows;
}

struct CellSpec {
  std::string id;
  EstimatorSpec spec;
  bool interaction_scenario = false;
  bool starred = false;
};

inline std::string cell_id(TableLayout layout, const EstimatorSpec& spec,
                           std::string_view column_id) {
  std::string id(to_string(layout));
  id += ':';
  id += to_string(spec.ps_method);
  id += ':';
  id += spec.ps_covariates ? to_string(*spec.ps_covariates) : "none";
  id += ':';
  id += spec.family == Family::kIpw ? to_string(spec.scheme) : to_string(spec.family);
  id += ':';
  id += column_id;
  return id;
}

inline CellSpec make_cell(TableLayout layout, const TableRow& row,
                          const OutcomeColumn& column, bool ipw_normalized) {
  CellSpec cell;
  EstimatorSpec& spec = cell.spec;
  spec.family = row.family;
  spec.ps_method = row.ps_method;
  spec.ps_covariates = row.ps_covariates;
  spec.scheme = row.scheme;
  spec.ipw_normalized = ipw_normalized;
  if (row.family != Family::kIpw) spec.outcome = column.model;
  if (row.z_in_starred_column && column.id == kStarredColumn) {
    spec.ps_covariates = CovariateSet::kZ;
    cell.starred = true;
  }
  cell.interaction_scenario = column.interaction_scenario;
  cell.id = cell_id(layout, spec, column.id);
  spec.validate();
  return cell;
}

// Per-replicate cache of propensity fits. Boosted models are grown once per
// covariate set; balance selection is done per weighting scheme.
class ReplicateFits {
 public:
  ReplicateFits(const Dataset& data, const SimulationConfig& config)
      : data_(data), config_(config) {}

  // DR estimators weight by 1/pi, so they use the POP-balanced GBM fit.
  const PropensityFit& get(PsMethod method, CovariateSet covs, Scheme scheme) {
    const Scheme selection =
        method == PsMethod::kGbm && scheme == Scheme::kNr ? Scheme::kNr : Scheme::kPop;
    const auto key = std::make_tuple(method, covs,
                                     method == PsMethod::kGbm ? selection : Scheme::kNone);
    if (auto it = fits_.find(key); it != fits_.end()) return it->second;

    PropensityFit fit;
    switch (method) {
      case PsMethod::kLogistic:
        fit = fit_logistic(build_design(data_, covs, false), data_.t);
        break;
      case PsMethod::kRobit1:
        fit = fit_robit1(build_design(data_, covs, false), data_.t);
        break;
      case PsMethod::kGbm:
        fit = select_balance_iteration(model(covs), data_.covariates(covs), data_.t,
                                       {selection, covs, config_.balance_reference});
        break;
      case PsMethod::kNone:
        throw InvalidArgument("propensity: no method");
    }
    return fits_.emplace(key, std::move(fit)).first->second;
  }

  const BoostedModel& model(CovariateSet covs) {
    auto it = models_.find(covs);
    if (it == models_.end()) {
      it = models_
               .emplace(covs, boost_propensity(data_.covariates(covs), data_.t,
                                               config_.gbm))
               .first;
    }
    return it->second;
  }

  const Dataset& data() const { return data_; }

 private:
  const Dataset& data_;
  const SimulationConfig& config_;
  std::map<std::tuple<PsMethod, CovariateSet, Scheme>, PropensityFit> fits_;
  std::map<CovariateSet, BoostedModel> models_;
};

inline Eigen::VectorXd apply_weight_cap(Eigen::VectorXd pi_hat,
                                        const std::optional<double>& cap) {
  if (cap) {
    const double floor = 1.0 / *cap;
    for (auto& p : pi_hat) p = std::max(p, floor);
  }
  return pi_hat;
}

struct CellEvaluation {
  Estimate estimate;
  int gbm_iterations = -1;
};

// Evaluates one cell on one replicate. `data` must be the dataset of the
// cell's scenario; `fits` is keyed to the same covariates and responses.
inline CellEvaluation evaluate_cell(const CellSpec& cell, const Dataset& data,
                                    ReplicateFits& fits,
                                    const SimulationConfig& config) {
  const EstimatorSpec& spec = cell.spec;
  CellEvaluation out;
  if (spec.family == Family::kOls) {
    out.estimate = est_ols_mean(data, *spec.outcome);
    out.estimate.spec = spec;
    return out;
  }
  const PropensityFit& ps = fits.get(spec.ps_method, *spec.ps_covariates, spec.scheme);
  const Eigen::VectorXd pi_hat = apply_weight_cap(ps.pi_hat, config.weight_cap);
  out.gbm_iterations = ps.chosen_iterations;
  switch (spec.family) {
    case Family::kIpw:
      out.estimate = est_ipw(data, pi_hat, spec.scheme, spec.ipw_normalized);
      break;
    case Family::kBc: {
      const DesignMatrix full =
          build_design(data, spec.outcome->covariates, spec.outcome->interaction);
      out.estimate = est_bc(data, pi_hat, fit_outcome_model(full, data.t, data.y), full);
      break;
    }
    case Family::kWls:
      out.estimate = est_dr_wls(data, pi_hat, *spec.outcome);
      break;
    case Family::kOls:
      break;
  }
  out.estimate.spec = spec;
  out.estimate.converged = ps.converged;
  return out;
}

struct CellResult {
  CellSpec cell;
  Scenario scenario;
  std::vector<double> estimates;       // finite estimates, replicate order
  std::vector<int> estimate_replicates;
  std::vector<int> failed_replicates;
  std::vector<double> max_weights;     // per finite estimate
  std::vector<double> ess;
  std::vector<int> gbm_iterations;
  int nonconverged_fits = 0;

  int failures() const { return static_cast<int>(failed_replicates.size()); }
  double rmse() const { return drsim::rmse(estimates); }
  double mean() const {
    double s = 0.0;
    for (double e : estimates) s += e;
    return s / static_cast<double>(estimates.size());
  }
};

struct WeightDiagnostic {
  int replicate = 0;
  PsMethod method = PsMethod::kNone;
  CovariateSet covariates = CovariateSet::kZ;
  Scheme scheme = Scheme::kNone;
  double max_ks = 0.0;
  double ess = 0.0;
  double max_weight = 0.0;
};

struct SimulationOutput {
  std::vector<CellResult> cells;
  std::vector<WeightDiagnostic> weight_diagnostics;  // replicate order
};

namespace detail {

template <typename Fn>
void parallel_for(int count, int threads, Fn&& fn) {
  threads = std::max(1, std::min(threads, count));
  if (threads == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (int w = 0; w < threads; ++w) {
    pool.emplace_back([&] {
      for (int i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

struct Slot {
  bool ok = false;
  double value = 0.0;
  double max_weight = 0.0;
  double ess = 0.0;
  int gbm_iterations = -1;
  bool converged = true;
};

}  // namespace detail

// Runs every cell over replicates 0..R-1. With collect_weight_diagnostics,
// also scores both weighting schemes for every propensity fit the cells used.
inline SimulationOutput run_cells(const std::vector<CellSpec>& cells,
                                  const SimulationConfig& config,
                                  bool collect_weight_diagnostics = false) {
  if (config.replicates < 1) throw InvalidArgument("simulation: replicates must be >= 1");
  const int reps = config.replicates;
  const Scenario base = config.scenario(false);
  const Scenario with_interaction = config.scenario(true);
  base.validate();

  std::vector<std::vector<detail::Slot>> slots(
      cells.size(), std::vector<detail::Slot>(static_cast<std::size_t>(reps)));
  std::vector<std::vector<WeightDiagnostic>> diag(static_cast<std::size_t>(reps));

  detail::parallel_for(reps, config.threads, [&](int r) {
    const auto idx = static_cast<std::uint64_t>(r);
    const Dataset data = generate_replicate(base, idx);
    if (data.degenerate()) {
      throw CellAborted(cells.empty() ? "all" : cells.front().id,
                        "replicate " + std::to_string(r) +
                            " has no respondents or no nonrespondents");
    }
    std::optional<Dataset> interaction_data;
    ReplicateFits fits(data, config);
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const CellSpec& cell = cells[c];
      const Dataset* d = &data;
      if (cell.interaction_scenario) {
        if (!interaction_data) interaction_data = generate_replicate(with_interaction, idx);
        d = &*interaction_data;
      }
      detail::Slot& slot = slots[c][static_cast<std::size_t>(r)];
      try {
        const CellEvaluation ev = evaluate_cell(cell, *d, fits, config);
        slot = {true, ev.estimate.value, ev.estimate.max_weight, ev.estimate.ess,
                ev.gbm_iterations, ev.estimate.converged};
      } catch (const CellAborted&) {
        throw;
      } catch (const Error&) {
        slot.ok = false;
      }
    }
    if (collect_weight_diagnostics) {
      std::vector<std::pair<PsMethod, CovariateSet>> used;
      for (const CellSpec& cell : cells) {
        if (cell.spec.ps_method == PsMethod::kNone) continue;
        const auto key = std::make_pair(cell.spec.ps_method, *cell.spec.ps_covariates);
        if (std::find(used.begin(), used.end(), key) == used.end()) used.push_back(key);
      }
      std::sort(used.begin(), used.end());
      for (const auto& [method, covs] : used) {
        for (Scheme scheme : {Scheme::kPop, Scheme::kNr}) {
          const PropensityFit& ps = fits.get(method, covs, scheme);
          const WeightVector w = compute_weights(
              apply_weight_cap(ps.pi_hat, config.weight_cap), data.t, scheme);
          diag[static_cast<std::size_t>(r)].push_back(
              {r, method, covs, scheme,
               max_marginal_ks(data.covariates(covs), data.t, w,
                               config.balance_reference),
               effective_sample_size(w), w.weights.maxCoeff()});
        }
      }
    }
  });

  SimulationOutput out;
  out.cells.reserve(cells.size());
  for (std::size_t c = 0; c < cells.size(); ++c) {
    CellResult res;
    res.cell = cells[c];
    res.scenario = cells[c].interaction_scenario ? with_interaction : base;
    for (int r = 0; r < reps; ++r) {
      const detail::Slot& s = slots[c][static_cast<std::size_t>(r)];
      if (s.ok) {
        res.estimates.push_back(s.value);
        res.estimate_replicates.push_back(r);
        res.max_weights.push_back(s.max_weight);
        res.ess.push_back(s.ess);
        if (s.gbm_iterations >= 0) res.gbm_iterations.push_back(s.gbm_iterations);
        if (!s.converged) ++res.nonconverged_fits;
      } else {
        res.failed_replicates.push_back(r);
      }
    }
    if (10 * res.failures() > reps || res.estimates.empty()) {
      throw CellAborted(res.cell.id, std::to_string(res.failures()) + " of " +
                                         std::to_string(reps) + " replicates failed");
    }
    out.cells.push_back(std::move(res));
  }
  for (auto& d : diag) {
    out.weight_diagnostics.insert(out.weight_diagnostics.end(), d.begin(), d.end());
  }
  return out;
}

inline CellResult run_cell(const CellSpec& cell, const SimulationConfig& config) {
  return std::move(run_cells({cell}, config).cells.front());
}

struct RmseTable {
  TableLayout layout = TableLayout::kTable1;
  std::vector<TableRow> rows;
  std::vector<OutcomeColumn> columns;
  std::vector<double> ols_rmse_per_column;
  // Indexed [row][column].
  std::vector<std::vector<double>> rmse;
  std::vector<std::vector<double>> ratio;
  std::vector<std::vector<const CellResult*>> results;

  double ratio_of(std::string_view row_label, std::string_view column_id) const {
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (rows[r].label() != row_label) continue;
      for (std::size_t c = 0; c < columns.size(); ++c) {
        if (columns[c].id == column_id) return ratio[r][c];
      }
    }
    throw InvalidArgument("table: no cell " + std::string(row_label) + " / " +
                          std::string(column_id));
  }
};

inline std::vector<CellSpec> table_cells(TableLayout layout, bool ipw_normalized) {
  std::vector<CellSpec> cells;
  for (const TableRow& row : table_rows(layout)) {
    for (const OutcomeColumn& col : outcome_columns()) {
      cells.push_back(make_cell(layout, row, col, ipw_normalized));
    }
  }
  return cells;
}

// Builds the ratio grid from cell results laid out as table_cells(layout).
inline RmseTable assemble_table(TableLayout layout,
                                std::span<const CellResult> results) {
  RmseTable table;
  table.layout = layout;
  table.rows = table_rows(layout);
  table.columns = outcome_columns();
  const std::size_t nc = table.columns.size();
  if (results.size() != table.rows.size() * nc) {
    throw InvalidArgument("table: result count does not match the layout");
  }
  table.rmse.assign(table.rows.size(), std::vector<double>(nc));
  table.ratio.assign(table.rows.size(), std::vector<double>(nc));
  table.results.assign(table.rows.size(), std::vector<const CellResult*>(nc));
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    for (std::size_t c = 0; c < nc; ++c) {
      table.results[r][c] = &results[r * nc + c];
      table.rmse[r][c] = results[r * nc + c].rmse();
    }
  }
  table.ols_rmse_per_column = table.rmse.front();
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    for (std::size_t c = 0; c < nc; ++c) {
      table.ratio[r][c] = table.rmse[r][c] / table.ols_rmse_per_column[c];
    }
  }
  return table;
}

struct TableRun {
  SimulationOutput output;
  std::vector<RmseTable> tables;
};

// Runs the requested tables on shared replicates. Tables point into
// output.cells, so keep the TableRun alive while using them.
inline TableRun run_tables(const std::vector<TableLayout>& layouts,
                           const SimulationConfig& config,
                           bool collect_weight_diagnostics = false) {
  std::vector<CellSpec> cells;
  for (TableLayout layout : layouts) {
    const auto part = table_cells(layout, config.ipw_normalized);
    cells.insert(cells.end(), part.begin(), part.end());
  }
  TableRun run;
  run.output = run_cells(cells, config, collect_weight_diagnostics);
  std::size_t offset = 0;
  for (TableLayout layout : layouts) {
    const std::size_t count = table_rows(layout).size() * outcome_columns().size();
    run.tables.push_back(assemble_table(
        layout, std::span<const CellResult>(run.output.cells).subspan(offset, count)));
    offset += count;
  }
  return run;
}

inline TableRun run_table1(const SimulationConfig& config) {
  return run_tables({TableLayout::kTable1}, config);
}

inline TableRun run_table2(const SimulationConfig& config) {
  return run_tables({TableLayout::kTable2}, config);
}

}  // namespace drsim
