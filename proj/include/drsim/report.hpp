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

// Writers for the ratio tables, the per-cell diagnostics, the per-replicate
// estimate log and the per-replicate weight diagnostics.

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "drsim/harness.hpp"

namespace drsim {

// Shortest round-trippable text form of a double.
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string format_fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

inline std::string row_estimator_name(const TableRow& row) {
  switch (row.family) {
    case Family::kOls: return "OLS";
    case Family::kIpw: return row.scheme == Scheme::kPop ? "IPW-POP" : "IPW-NR";
    case Family::kBc: return "BC";
    case Family::kWls: return "WLS";
  }
  return "?";
}

inline std::string row_id(const TableRow& row) {
  if (row.family == Family::kOls) return "ols";
  std::string id(to_string(row.ps_method));
  id += '-';
  id += to_string(*row.ps_covariates);
  id += '-';
  id += row.family == Family::kIpw ? to_string(row.scheme) : to_string(row.family);
  return id;
}

// One line per estimator row; per outcome column: ratio, OLS RMSE, failures.
inline void write_table_csv(std::ostream& out, const RmseTable& table) {
  out << "row_id,ps_method,ps_covariates,estimator";
  for (const auto& col : table.columns) {
    out << ',' << col.id << "_ratio," << col.id << "_ols_rmse," << col.id << "_failures";
  }
  out << '\n';
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const TableRow& row = table.rows[r];
    out << row_id(row) << ',' << to_string(row.ps_method) << ','
        << (row.ps_covariates ? to_string(*row.ps_covariates) : "none") << ','
        << row_estimator_name(row);
    for (std::size_t c = 0; c < table.columns.size(); ++c) {
      out << ',' << format_double(table.ratio[r][c]) << ','
          << format_double(table.ols_rmse_per_column[c]) << ','
          << table.results[r][c]->failures();
    }
    out << '\n';
  }
}

inline void write_table_markdown(std::ostream& out, const RmseTable& table) {
  const bool t1 = table.layout == TableLayout::kTable1;
  out << (t1 ? "### Table 1: IPW estimators\n\n" : "### Table 2: DR estimators\n\n");
  out << "| Propensity model | Covariates | Estimator |";
  for (const auto& col : table.columns) out << ' ' << col.title << " |";
  out << "\n|---|---|---|";
  for (std::size_t c = 0; c < table.columns.size(); ++c) out << "---|";
  out << '\n';
  bool any_star = false;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const TableRow& row = table.rows[r];
    if (row.family == Family::kOls) {
      out << "| OLS | | |";
    } else {
      std::string method(to_string(row.ps_method));
      if (row.ps_method == PsMethod::kGbm) {
        method = "GBM";
      } else {
        method[0] = static_cast<char>(std::toupper(method[0]));
      }
      std::string covs(to_string(*row.ps_covariates));
      covs[0] = static_cast<char>(std::toupper(covs[0]));
      out << "| " << method << " | " << covs << " | " << row_estimator_name(row) << " |";
    }
    for (std::size_t c = 0; c < table.columns.size(); ++c) {
      const CellResult& cell = *table.results[r][c];
      out << ' ';
      if (cell.cell.starred) {
        out << '*';
        any_star = true;
      }
      out << format_fixed(table.ratio[r][c], 1);
      if (row.family == Family::kOls) {
        out << " (" << format_fixed(table.ols_rmse_per_column[c], 2) << ')';
      }
      if (cell.failures() > 0) out << " [" << cell.failures() << " failed]";
      out << " |";
    }
    out << '\n';
  }
  out << "\nCells are RMSE ratios to the OLS estimator of the same column; the "
         "OLS RMSE is in parentheses.\n";
  if (any_star) out << "\n*These estimators use Z in the propensity score model.\n";
}

inline void write_diagnostics_header(std::ostream& out) {
  out << "cell_id,table,row_id,column,starred,replicates,failures,rmse,ratio,"
         "ols_rmse,mean_estimate,mean_ess,mean_max_weight,max_max_weight,"
         "mean_gbm_iterations,nonconverged_fits\n";
}

inline void write_diagnostics(std::ostream& out, const RmseTable& table) {
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    for (std::size_t c = 0; c < table.columns.size(); ++c) {
      const CellResult& cell = *table.results[r][c];
      auto mean = [](const auto& v) {
        double s = 0.0;
        for (auto x : v) s += static_cast<double>(x);
        return v.empty() ? 0.0 : s / static_cast<double>(v.size());
      };
      double max_w = 0.0;
      for (double w : cell.max_weights) max_w = std::max(max_w, w);
      const bool has_weights = table.rows[r].family != Family::kOls;
      out << cell.cell.id << ',' << to_string(table.layout) << ',' << row_id(table.rows[r])
          << ',' << table.columns[c].id << ',' << (cell.cell.starred ? 1 : 0) << ','
          << cell.estimates.size() + cell.failed_replicates.size() << ','
          << cell.failures() << ',' << format_double(table.rmse[r][c]) << ','
          << format_double(table.ratio[r][c]) << ','
          << format_double(table.ols_rmse_per_column[c]) << ','
          << format_double(cell.mean()) << ','
          << (has_weights ? format_double(mean(cell.ess)) : "") << ','
          << (has_weights ? format_double(mean(cell.max_weights)) : "") << ','
          << (has_weights ? format_double(max_w) : "") << ','
          << (cell.gbm_iterations.empty() ? "" : format_double(mean(cell.gbm_iterations)))
          << ',' << cell.nonconverged_fits << '\n';
    }
  }
}

inline void write_estimates_header(std::ostream& out) {
  out << "replicate,cell_id,value,max_weight,ess,gbm_iterations\n";
}

inline void write_estimates(std::ostream& out, const CellResult& cell) {
  std::size_t gbm = 0;
  for (std::size_t k = 0; k < cell.estimates.size(); ++k) {
    out << cell.estimate_replicates[k] << ',' << cell.cell.id << ','
        << format_double(cell.estimates[k]) << ',';
    if (cell.cell.spec.family != Family::kOls) {
      out << format_double(cell.max_weights[k]) << ',' << format_double(cell.ess[k]);
    } else {
      out << ',';
    }
    out << ',';
    if (!cell.gbm_iterations.empty()) out << cell.gbm_iterations[gbm++];
    out << '\n';
  }
  for (int r : cell.failed_replicates) out << r << ',' << cell.cell.id << ",nan,,,\n";
}

inline void write_weight_diagnostics(std::ostream& out,
                                     const std::vector<WeightDiagnostic>& rows) {
  out << "replicate,method,covariate_set,scheme,max_ks,ess,max_weight\n";
  for (const auto& d : rows) {
    out << d.replicate << ',' << to_string(d.method) << ',' << to_string(d.covariates)
        << ',' << to_string(d.scheme) << ',' << format_double(d.max_ks) << ','
        << format_double(d.ess) << ',' << format_double(d.max_weight) << '\n';
  }
}

}  // namespace drsim
