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

// Estimators of the population mean of Y from respondents only: the OLS
// prediction mean, inverse-probability weighting (POP and NR schemes), and
// the bias-corrected and WLS doubly robust estimators.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>

#include <Eigen/Dense>

#include "drsim/common.hpp"
#include "drsim/dgp.hpp"
#include "drsim/linear_models.hpp"
#include "drsim/weighting.hpp"

namespace drsim {

enum class Family { kOls, kIpw, kBc, kWls };

inline std::string_view to_string(Family f) {
  switch (f) {
    case Family::kOls: return "ols";
    case Family::kIpw: return "ipw";
    case Family::kBc: return "bc";
    case Family::kWls: return "wls";
  }
  return "?";
}

struct OutcomeModel {
  CovariateSet covariates = CovariateSet::kZ;
  bool interaction = false;

  friend bool operator==(const OutcomeModel&, const OutcomeModel&) = default;
};

struct EstimatorSpec {
  Family family = Family::kOls;
  PsMethod ps_method = PsMethod::kNone;
  std::optional<CovariateSet> ps_covariates;
  Scheme scheme = Scheme::kNone;
  std::optional<OutcomeModel> outcome;
  bool ipw_normalized = true;

  void validate() const {
    const bool has_ps = ps_method != PsMethod::kNone && ps_covariates.has_value();
    const bool no_ps = ps_method == PsMethod::kNone && !ps_covariates.has_value();
    switch (family) {
      case Family::kOls:
        if (!no_ps || scheme != Scheme::kNone || !outcome) {
          throw InvalidArgument("spec: OLS takes an outcome model and no propensity model");
        }
        break;
      case Family::kIpw:
        if (!has_ps || scheme == Scheme::kNone || outcome) {
          throw InvalidArgument("spec: IPW takes a propensity model, a scheme and no outcome model");
        }
        break;
      case Family::kBc:
      case Family::kWls:
        if (!has_ps || !outcome) {
          throw InvalidArgument("spec: doubly robust estimators need both models");
        }
        break;
    }
    if (outcome && outcome->interaction && outcome->covariates == CovariateSet::kX) {
      throw InvalidArgument("spec: interaction outcome model requires Z");
    }
  }

  friend bool operator==(const EstimatorSpec&, const EstimatorSpec&) = default;
};

struct Estimate {
  double value = std::numeric_limits<double>::quiet_NaN();
  EstimatorSpec spec;
  double max_weight = std::numeric_limits<double>::quiet_NaN();
  double ess = std::numeric_limits<double>::quiet_NaN();
  bool converged = true;
};

namespace detail {

inline Estimate finish(double value, EstimatorSpec spec) {
  if (!std::isfinite(value)) throw Error("estimator produced a non-finite value");
  Estimate e;
  e.value = value;
  e.spec = std::move(spec);
  return e;
}

// pi = 1 is accepted here (certain response); fitted propensities never
// reach it.
inline void check_propensities(const Eigen::VectorXd& pi_hat,
                               const Eigen::VectorXi& t) {
  if (pi_hat.size() != t.size()) {
    throw InvalidArgument("estimator: pi_hat and t differ in length");
  }
  for (double p : pi_hat) {
    if (!(p > 0.0 && p <= 1.0)) throw InvalidArgument("estimator: pi_hat outside (0, 1]");
  }
}

inline void attach_weight_diagnostics(Estimate& e, const Eigen::VectorXd& pi_hat,
                                      const Eigen::VectorXi& t, Scheme scheme) {
  double max_w = 0.0, sum = 0.0, sum_sq = 0.0;
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    if (t(i) != 1) continue;
    const double w = scheme == Scheme::kNr ? (1.0 - pi_hat(i)) / pi_hat(i) : 1.0 / pi_hat(i);
    max_w = std::max(max_w, w);
    sum += w;
    sum_sq += w * w;
  }
  e.max_weight = max_w;
  e.ess = sum_sq > 0.0 ? sum * sum / sum_sq : 0.0;
}

inline DesignMatrix respondent_rows(const DesignMatrix& full,
                                    const Eigen::VectorXi& t) {
  DesignMatrix d = full;
  d.values.resize(t.sum(), full.cols());
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    if (t(i) == 1) d.values.row(r++) = full.values.row(i);
  }
  return d;
}

inline Eigen::VectorXd respondent_values(const Eigen::VectorXd& v,
                                         const Eigen::VectorXi& t) {
  Eigen::VectorXd out(t.sum());
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    if (t(i) == 1) out(r++) = v(i);
  }
  return out;
}

}  // namespace detail

// Outcome regression over respondents; returns the fit.
inline LinearFit fit_outcome_model(const DesignMatrix& full,
                                   const Eigen::VectorXi& t,
                                   const Eigen::VectorXd& y,
                                   const std::optional<Eigen::VectorXd>& pi_hat =
                                       std::nullopt) {
  const DesignMatrix resp = detail::respondent_rows(full, t);
  const Eigen::VectorXd y_resp = detail::respondent_values(y, t);
  if (!pi_hat) return fit_least_squares(resp, y_resp);
  const Eigen::VectorXd w =
      detail::respondent_values(*pi_hat, t).cwiseInverse();
  return fit_least_squares(resp, y_resp, w);
}

// Mean of OLS predictions over all units, fit on respondents.
inline double ols_prediction_mean(const DesignMatrix& full,
                                  const Eigen::VectorXi& t,
                                  const Eigen::VectorXd& y) {
  return predict(fit_outcome_model(full, t, y), full).mean();
}

inline Estimate est_ols_mean(const Dataset& data, const OutcomeModel& model) {
  const DesignMatrix full = build_design(data, model.covariates, model.interaction);
  EstimatorSpec spec;
  spec.family = Family::kOls;
  spec.outcome = model;
  return detail::finish(ols_prediction_mean(full, data.t, data.y), spec);
}

inline double ipw_mean(const Eigen::VectorXi& t, const Eigen::VectorXd& y,
                       const Eigen::VectorXd& pi_hat, Scheme scheme,
                       bool normalized) {
  detail::check_propensities(pi_hat, t);
  const auto n = static_cast<double>(t.size());
  const int n1 = t.sum();
  if (n1 == 0) throw InvalidArgument("ipw: no respondents");

  if (scheme == Scheme::kPop) {
    double num = 0.0, den = 0.0;
    for (Eigen::Index i = 0; i < t.size(); ++i) {
      if (t(i) == 1) {
        num += y(i) / pi_hat(i);
        den += 1.0 / pi_hat(i);
      }
    }
    if (!normalized) return num / n;
    if (!(den > 0.0)) throw Error("ipw: zero normalizing sum");
    return num / den;
  }
  if (scheme != Scheme::kNr) throw InvalidArgument("ipw: scheme must be POP or NR");

  // Respondent stratum uses its observed mean; nonrespondents get the
  // (1 - pi)/pi reweighted respondent mean.
  double sum_resp = 0.0, num = 0.0, den = 0.0;
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    if (t(i) == 1) {
      const double w = (1.0 - pi_hat(i)) / pi_hat(i);
      sum_resp += y(i);
      num += y(i) * w;
      den += w;
    }
  }
  const double mean_resp = sum_resp / n1;
  const int n0 = static_cast<int>(t.size()) - n1;
  if (n0 == 0) return mean_resp;
  if (!(den > 0.0)) throw Error("ipw: zero normalizing sum");
  const double mean_nonresp = num / den;
  return (n1 * mean_resp + n0 * mean_nonresp) / n;
}

inline Estimate est_ipw(const Dataset& data, const Eigen::VectorXd& pi_hat,
                        Scheme scheme, bool normalized) {
  EstimatorSpec spec;
  spec.family = Family::kIpw;
  spec.scheme = scheme;
  spec.ipw_normalized = normalized;
  Estimate e = detail::finish(ipw_mean(data.t, data.y, pi_hat, scheme, normalized), spec);
  detail::attach_weight_diagnostics(e, pi_hat, data.t, scheme);
  return e;
}

// (1/n) sum_i [ m(x_i) + t_i (y_i - m(x_i)) / pi_i ].
inline double bc_mean(const Eigen::VectorXi& t, const Eigen::VectorXd& y,
                      const Eigen::VectorXd& pi_hat,
                      const Eigen::VectorXd& m_hat) {
  detail::check_propensities(pi_hat, t);
  double total = 0.0;
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    total += m_hat(i);
    if (t(i) == 1) total += (y(i) - m_hat(i)) / pi_hat(i);
  }
  return total / static_cast<double>(t.size());
}

inline Estimate est_bc(const Dataset& data, const Eigen::VectorXd& pi_hat,
                       const LinearFit& y_fit, const DesignMatrix& full_design) {
  EstimatorSpec spec;
  spec.family = Family::kBc;
  spec.outcome = OutcomeModel{full_design.covariate_set, full_design.includes_interaction};
  Estimate e = detail::finish(
      bc_mean(data.t, data.y, pi_hat, predict(y_fit, full_design)), spec);
  detail::attach_weight_diagnostics(e, pi_hat, data.t, Scheme::kPop);
  return e;
}

// Weighted (1/pi) outcome regression over respondents, averaged over all units.
inline double wls_mean(const DesignMatrix& full, const Eigen::VectorXi& t,
                       const Eigen::VectorXd& y, const Eigen::VectorXd& pi_hat) {
  detail::check_propensities(pi_hat, t);
  return predict(fit_outcome_model(full, t, y, pi_hat), full).mean();
}

inline Estimate est_dr_wls(const Dataset& data, const Eigen::VectorXd& pi_hat,
                           const OutcomeModel& model) {
  const DesignMatrix full = build_design(data, model.covariates, model.interaction);
  EstimatorSpec spec;
  spec.family = Family::kWls;
  spec.outcome = model;
  Estimate e = detail::finish(wls_mean(full, data.t, data.y, pi_hat), spec);
  detail::attach_weight_diagnostics(e, pi_hat, data.t, Scheme::kPop);
  return e;
}

}  // namespace drsim
