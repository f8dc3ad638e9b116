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

// Acceptance run: both tables at full replicate count plus the oracle suite.
// Prints one PASS/FAIL line per criterion and exits nonzero on any failure.
//
// Environment: DRSIM_THREADS (worker count), DRSIM_ACCEPT_REPLICATES
// (override R for a quick smoke run; the criteria are calibrated for 1000).

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "drsim/report.hpp"

namespace {

using namespace drsim;

struct Verdict {
  std::string id;
  bool pass = true;
  std::string detail;
};

std::vector<Verdict> verdicts;

void record(const std::string& id, bool pass, const std::string& detail) {
  verdicts.push_back({id, pass, detail});
  std::printf("%s %s: %s\n", pass ? "PASS" : "FAIL", id.c_str(), detail.c_str());
  std::fflush(stdout);
}

std::string fmt(double v, int decimals = 3) { return format_fixed(v, decimals); }

int env_int(const char* name, int fallback) {
  const char* v = std::getenv(name);
  if (v == nullptr || *v == '\0') return fallback;
  return std::max(1, std::atoi(v));
}

std::size_t column_index(const RmseTable& t, std::string_view id) {
  for (std::size_t c = 0; c < t.columns.size(); ++c) {
    if (t.columns[c].id == id) return c;
  }
  throw std::logic_error("unknown column " + std::string(id));
}

std::size_t row_index(const RmseTable& t, std::string_view label) {
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    if (t.rows[r].label() == label) return r;
  }
  throw std::logic_error("unknown row " + std::string(label));
}

// ---- oracle suite ---------------------------------------------------------

double brute_force_ks(const std::vector<double>& a, const std::vector<double>& wa,
                      const std::vector<double>& b, const std::vector<double>& wb) {
  double ta = 0.0, tb = 0.0;
  for (double w : wa) ta += w;
  for (double w : wb) tb += w;
  std::vector<double> points(a);
  points.insert(points.end(), b.begin(), b.end());
  double best = 0.0;
  for (double v : points) {
    double fa = 0.0, fb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) fa += a[i] <= v ? wa[i] : 0.0;
    for (std::size_t i = 0; i < b.size(); ++i) fb += b[i] <= v ? wb[i] : 0.0;
    best = std::max(best, std::abs(fa / ta - fb / tb));
  }
  return best;
}

bool check_ks(std::string& why) {
  std::mt19937_64 gen(7);
  std::uniform_int_distribution<int> size(1, 15), tie(0, 6);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    std::vector<double> a(size(gen)), wa(a.size()), b(size(gen)), wb(b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      a[i] = k % 2 ? tie(gen) : unit(gen);
      wa[i] = 0.05 + unit(gen);
    }
    for (std::size_t i = 0; i < b.size(); ++i) {
      b[i] = k % 2 ? tie(gen) : unit(gen);
      wb[i] = 0.05 + unit(gen);
    }
    worst = std::max(worst, std::abs(weighted_ks(a, wa, b, wb) - brute_force_ks(a, wa, b, wb)));
  }
  why = "max |sweep - brute force| = " + format_double(worst);
  return worst < 1e-12;
}

SimulationConfig small_config(int replicates, int threads) {
  SimulationConfig c;
  c.n = 200;
  c.replicates = replicates;
  c.seed = 4242;
  c.gbm.max_trees = 300;
  c.gbm.shrinkage = 0.05;
  c.threads = threads;
  return c;
}

void run_oracle_suite(int threads) {
  const Dataset d = generate_replicate({1000, false, 20070101}, 3);
  std::vector<std::string> failed;
  std::ostringstream notes;
  std::string why;

  if (!check_ks(why)) failed.push_back("ks");
  notes << why;

  const DesignMatrix xd = build_design(d, CovariateSet::kX, false);
  const PropensityFit logit = fit_logistic(xd, d.t);
  Eigen::VectorXd resid(d.size());
  for (Eigen::Index i = 0; i < d.size(); ++i) resid(i) = d.t(i) - logit.pi_hat(i);
  const double score = (xd.values.transpose() * resid).cwiseAbs().maxCoeff();
  if (!(logit.converged && score < 1e-6)) failed.push_back("irls");
  notes << "; irls score " << format_double(score);

  const DesignMatrix zd = build_design(d, CovariateSet::kZ, false);
  Eigen::VectorXd w(d.size());
  for (Eigen::Index i = 0; i < d.size(); ++i) w(i) = 1.0 / d.pi_true(i);
  const LinearFit wls = fit_least_squares(zd, d.y, w);
  const Eigen::VectorXd weighted_resid = w.cwiseProduct(d.y - wls.fitted);
  const double ortho = (zd.values.transpose() * weighted_resid).cwiseAbs().maxCoeff();
  if (!(ortho < 1e-8)) failed.push_back("wls");
  notes << "; wls orthogonality " << format_double(ortho);

  const double bc0 = bc_mean(d.t, d.y, logit.pi_hat, Eigen::VectorXd::Zero(d.size()));
  const double ht = ipw_mean(d.t, d.y, logit.pi_hat, Scheme::kPop, false);
  if (!(std::abs(bc0 - ht) <= 1e-12)) failed.push_back("bc-ht");
  notes << "; |bc0 - ht| " << format_double(std::abs(bc0 - ht));

  const WeightVector pop = compute_weights(logit.pi_hat, d.t, Scheme::kPop);
  const WeightVector nr = compute_weights(logit.pi_hat, d.t, Scheme::kNr);
  double pop_nr = 0.0;
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    if (d.t(i) == 1) {
      const double dev = std::abs(pop.weights(i) - nr.weights(i) - 1.0);
      pop_nr = std::max(pop_nr, dev / std::max(1.0, pop.weights(i)));
    }
  }
  if (!(pop_nr <= 1e-12)) failed.push_back("pop-nr");

  // Robit gradient against central differences at a point off the optimum.
  Eigen::VectorXd beta(5);
  beta << 0.3, -0.5, 0.2, -0.1, 0.05;
  const Eigen::VectorXd g = robit1_gradient(zd.values, d.t, beta);
  double fd_err = 0.0;
  for (Eigen::Index j = 0; j < beta.size(); ++j) {
    const double h = 1e-5;
    Eigen::VectorXd up = beta, dn = beta;
    up(j) += h;
    dn(j) -= h;
    const double fd = (robit1_log_likelihood(zd.values, d.t, up) -
                       robit1_log_likelihood(zd.values, d.t, dn)) / (2 * h);
    fd_err = std::max(fd_err, std::abs(fd - g(j)) / std::max(1.0, std::abs(g(j))));
  }
  if (!(fd_err < 1e-4)) failed.push_back("robit-gradient");
  notes << "; robit fd " << format_double(fd_err);

  // H1: bit-identical across runs and worker counts.
  const std::vector<TableLayout> both = {TableLayout::kTable1, TableLayout::kTable2};
  const TableRun h1a = run_tables(both, small_config(6, 1));
  const TableRun h1b = run_tables(both, small_config(6, std::max(2, threads)));
  bool h1 = h1a.output.cells.size() == h1b.output.cells.size();
  for (std::size_t k = 0; h1 && k < h1a.output.cells.size(); ++k) {
    h1 = h1a.output.cells[k].estimates == h1b.output.cells[k].estimates;
  }
  for (std::size_t t = 0; h1 && t < h1a.tables.size(); ++t) {
    h1 = h1a.tables[t].ratio == h1b.tables[t].ratio;
  }
  if (!h1) failed.push_back("H1");

  // H2: IPW rows carry the same absolute RMSE across a scenario's columns.
  const RmseTable& t1 = h1a.tables.front();
  double h2 = 0.0;
  for (std::size_t r = 1; r < t1.rows.size(); ++r) {
    for (auto [first, last] : {std::pair{0, 1}, std::pair{2, 4}}) {
      const double base = t1.ratio[r][first] * t1.ols_rmse_per_column[first];
      for (int c = first + 1; c <= last; ++c) {
        h2 = std::max(h2, std::abs(t1.ratio[r][c] * t1.ols_rmse_per_column[c] - base) / base);
      }
    }
  }
  if (!(h2 <= 1e-12)) failed.push_back("H2");

  // H3: cached fits equal fresh fits.
  const SimulationConfig sc = small_config(1, 1);
  const Dataset sd = generate_replicate(sc.scenario(false), 0);
  ReplicateFits fits(sd, sc);
  bool h3 = true;
  for (CovariateSet set : {CovariateSet::kZ, CovariateSet::kX}) {
    const DesignMatrix design = build_design(sd, set, false);
    h3 = h3 && fits.get(PsMethod::kLogistic, set, Scheme::kPop).pi_hat ==
                   fit_logistic(design, sd.t).pi_hat;
    h3 = h3 && fits.get(PsMethod::kRobit1, set, Scheme::kPop).pi_hat ==
                   fit_robit1(design, sd.t).pi_hat;
    for (Scheme s : {Scheme::kPop, Scheme::kNr}) {
      h3 = h3 && fits.get(PsMethod::kGbm, set, s).pi_hat ==
                     fit_gbm(sd.covariates(set), sd.t, sc.gbm, {s, set}).second.pi_hat;
    }
  }
  if (!h3) failed.push_back("H3");

  // H4: prefix RMSE equals RMSE of the estimate prefix.
  const TableRun prefix = run_tables(both, small_config(4, threads));
  bool h4 = true;
  for (std::size_t k = 0; k < prefix.output.cells.size(); ++k) {
    const auto& all = h1a.output.cells[k].estimates;
    const std::vector<double> head(all.begin(), all.begin() + 4);
    h4 = h4 && prefix.output.cells[k].estimates == head &&
         prefix.output.cells[k].rmse() == rmse(head);
  }
  if (!h4) failed.push_back("H4");

  std::string detail = notes.str();
  if (!failed.empty()) {
    detail += "; failed:";
    for (const auto& f : failed) detail += " " + f;
  }
  record("A9", failed.empty(), detail);
}

// ---- table criteria -------------------------------------------------------

void check_tables(const RmseTable& t1, const RmseTable& t2) {
  const std::vector<std::string> ks_cols = {"ks-fit-z", "ks-fit-x"};
  const std::vector<std::string> all_cols = {"ks-fit-z", "ks-fit-x", "int-fit-z-int",
                                             "int-fit-z", "int-fit-x"};

  {
    const double target[] = {1.16, 1.64, 1.35, 3.58, 5.00};
    bool ok = true;
    std::string d = "OLS RMSE";
    for (std::size_t c = 0; c < 5; ++c) {
      const double v = t1.ols_rmse_per_column[c];
      ok = ok && std::abs(v - target[c]) <= 0.15 * target[c];
      d += " " + fmt(v) + "/" + fmt(target[c], 2);
    }
    record("A1", ok, d);
  }
  {
    const double z = t1.ratio_of("logistic z pop", "ks-fit-z");
    const double x = t1.ratio_of("logistic z pop", "ks-fit-x");
    record("A2", std::abs(z - 1.4) <= 0.25 && std::abs(x - 1.0) <= 0.2,
           "logistic z pop " + fmt(z) + " (1.4+-0.25), " + fmt(x) + " (1.0+-0.2)");
  }
  {
    bool ok = true;
    std::string d;
    const std::size_t pop = row_index(t1, "logistic x pop"), nr = row_index(t1, "logistic x nr");
    for (const auto& col : ks_cols) {
      const std::size_t c = column_index(t1, col);
      ok = ok && t1.ratio[pop][c] >= 3 && t1.ratio[nr][c] >= 3;
      const double floor = std::min(t1.ratio[pop][c], t1.ratio[nr][c]);
      double others = 0.0;
      for (std::size_t r = 1; r < t1.rows.size(); ++r) {
        if (r != pop && r != nr) others = std::max(others, t1.ratio[r][c]);
      }
      ok = ok && floor > others;
      d += col + ": pop " + fmt(t1.ratio[pop][c]) + " nr " + fmt(t1.ratio[nr][c]) +
           " next " + fmt(others) + "; ";
    }
    record("A3", ok, d);
  }
  {
    bool ok = true;
    std::string d;
    for (const char* s : {"pop", "nr"}) {
      for (const auto& col : ks_cols) {
        const double g = t1.ratio_of(std::string("gbm x ") + s, col);
        const double l = t1.ratio_of(std::string("logistic x ") + s, col);
        ok = ok && g <= 4 && g < l;
        d += std::string(s) + "/" + col + " " + fmt(g) + " (logistic " + fmt(l) + "); ";
      }
    }
    record("A4", ok, d);
  }
  {
    bool ok = true;
    std::string d = "gbm x wls";
    for (const auto& col : all_cols) {
      const double v = t2.ratio_of("gbm x wls", col);
      const bool tight = col == "int-fit-z" || col == "int-fit-x";
      ok = ok && v <= 1.15 && (!tight || v <= 0.8);
      d += " " + col + "=" + fmt(v);
    }
    record("A5", ok, d);
  }
  {
    bool ok = true;
    std::string d = "logistic x bc";
    for (const char* col : {"ks-fit-x", "int-fit-z", "int-fit-x"}) {
      const double v = t2.ratio_of("logistic x bc", col);
      ok = ok && v >= 10;
      d += std::string(" ") + col + "=" + fmt(v);
    }
    record("A6", ok, d);
  }
  {
    bool ok = true;
    std::string d, bad;
    double lo = 1e300, hi = 0.0;
    for (std::size_t r = 1; r < t2.rows.size(); ++r) {
      for (const char* col : {"ks-fit-z", "int-fit-z-int"}) {
        const double v = t2.ratio[r][column_index(t2, col)];
        lo = std::min(lo, v);
        hi = std::max(hi, v);
        if (v < 0.9 || v > 1.1) {
          ok = false;
          bad += " " + t2.rows[r].label() + "/" + col + "=" + fmt(v);
        }
      }
    }
    d = "range [" + fmt(lo) + ", " + fmt(hi) + "]";
    if (!bad.empty()) d += "; outside:" + bad;
    record("A7", ok, d);
  }
}

void check_double_robustness(int threads) {
  SimulationConfig c;
  c.n = 2000;
  c.replicates = 200;
  c.threads = threads;
  std::vector<CellSpec> cells;
  const std::pair<CovariateSet, CovariateSet> combos[] = {
      {CovariateSet::kZ, CovariateSet::kX},  // right propensity, wrong outcome
      {CovariateSet::kX, CovariateSet::kZ},  // wrong propensity, right outcome
  };
  for (auto [ps, outcome] : combos) {
    for (Family f : {Family::kBc, Family::kWls}) {
      CellSpec cell;
      cell.spec.family = f;
      cell.spec.ps_method = PsMethod::kLogistic;
      cell.spec.ps_covariates = ps;
      cell.spec.outcome = OutcomeModel{outcome, false};
      cell.spec.validate();
      cell.id = std::string("dr:") + std::string(to_string(f)) + ":ps-" +
                std::string(to_string(ps)) + ":y-" + std::string(to_string(outcome));
      cells.push_back(cell);
    }
  }
  const SimulationOutput out = run_cells(cells, c);
  bool ok = true;
  std::string d;
  for (const CellResult& r : out.cells) {
    const double bias = r.mean() - kTrueMean;
    ok = ok && std::abs(bias) < 0.5;
    d += r.cell.id + " bias " + fmt(bias) + "; ";
  }
  record("A8", ok, d);
}

}  // namespace

int main() {
  const int hw = static_cast<int>(std::max(1U, std::thread::hardware_concurrency()));
  const int threads = env_int("DRSIM_THREADS", hw);
  const int replicates = env_int("DRSIM_ACCEPT_REPLICATES", 1000);
  std::printf("acceptance: threads=%d replicates=%d\n", threads, replicates);

  try {
    run_oracle_suite(threads);

    SimulationConfig c;
    c.n = 1000;
    c.replicates = replicates;
    c.gbm = GbmParams::desk();
    c.threads = threads;
    const TableRun run = run_tables({TableLayout::kTable1, TableLayout::kTable2}, c, false);
    for (const RmseTable& t : run.tables) {
      write_table_markdown(std::cout, t);
      std::cout << '\n';
    }
    std::cout.flush();
    check_tables(run.tables[0], run.tables[1]);

    // Reference: the OLS row at n = 200 (not a criterion).
    SimulationConfig small = c;
    small.n = 200;
    std::vector<CellSpec> ols;
    for (const auto& col : outcome_columns()) {
      ols.push_back(make_cell(TableLayout::kTable1, table_rows(TableLayout::kTable1)[0], col, true));
    }
    const SimulationOutput ols200 = run_cells(ols, small);
    std::printf("info: OLS RMSE at n=200:");
    for (const auto& r : ols200.cells) std::printf(" %.3f", r.rmse());
    std::printf("\n");

    check_double_robustness(threads);
  } catch (const std::exception& e) {
    std::printf("FAIL run: %s\n", e.what());
    return 1;
  }

  int failures = 0;
  for (const auto& v : verdicts) failures += v.pass ? 0 : 1;
  std::printf("acceptance: %zu criteria, %d failed\n", verdicts.size(), failures);
  return failures == 0 ? 0 : 1;
}
