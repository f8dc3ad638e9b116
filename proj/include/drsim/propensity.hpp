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

// Parametric propensity models: logistic regression by IRLS and robit(1)
// (Cauchy link) regression by Fisher scoring. Both return a PropensityFit
// whose probabilities lie strictly inside (0, 1).

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "drsim/common.hpp"
#include "drsim/linear_models.hpp"

namespace drsim {

struct PropensityFit {
  Eigen::VectorXd pi_hat;
  PsMethod method = PsMethod::kNone;
  CovariateSet covariate_set = CovariateSet::kZ;
  bool converged = false;
  int iterations = 0;
  std::string diagnostic;

  // Parametric fits only.
  Eigen::VectorXd coefficients;
  double log_likelihood = std::numeric_limits<double>::quiet_NaN();

  // Boosted fits only.
  int chosen_iterations = -1;
  double achieved_max_ks = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::pair<int, double>> balance_trace;  // (k, max KS) evaluated
};

struct LogisticOptions {
  int max_iterations = 100;
  double tolerance = 1e-8;
  double eta_cap = 30.0;
};

struct RobitOptions {
  int max_iterations = 2000;
  double gradient_tolerance = 1e-6;
  double init_scale = 0.5;
};

namespace detail {

inline void require_both_classes(const Eigen::VectorXi& t, Eigen::Index rows) {
  if (t.size() != rows) {
    throw InvalidArgument("propensity: design and indicator lengths differ");
  }
  const int ones = t.sum();
  if (ones == 0 || ones == t.size()) {
    throw InvalidArgument("propensity: both response classes must be present");
  }
}

inline double bernoulli_log_likelihood(const Eigen::VectorXd& p,
                                       const Eigen::VectorXi& t) {
  double ll = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    ll += t(i) == 1 ? std::log(p(i)) : std::log1p(-p(i));
  }
  return ll;
}

inline Eigen::VectorXd logistic_probabilities(const Eigen::MatrixXd& x,
                                              const Eigen::VectorXd& beta,
                                              double eta_cap) {
  Eigen::VectorXd p = x * beta;
  for (auto& v : p) v = clamp_probability(expit(std::clamp(v, -eta_cap, eta_cap)));
  return p;
}

}  // namespace detail

inline PropensityFit fit_logistic(const DesignMatrix& design,
                                  const Eigen::VectorXi& t,
                                  const LogisticOptions& opts = {}) {
  const Eigen::MatrixXd& x = design.values;
  detail::require_both_classes(t, x.rows());
  const Eigen::VectorXd tv = t.cast<double>();

  PropensityFit fit;
  fit.method = PsMethod::kLogistic;
  fit.covariate_set = design.covariate_set;

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(x.cols());
  Eigen::VectorXd p = detail::logistic_probabilities(x, beta, opts.eta_cap);
  double ll = detail::bernoulli_log_likelihood(p, t);
  double previous_norm = 0.0;
  int growth_streak = 0;

  for (int it = 1; it <= opts.max_iterations; ++it) {
    fit.iterations = it;
    const Eigen::VectorXd residual = tv - p;
    if ((x.transpose() * residual).cwiseAbs().maxCoeff() < opts.tolerance) {
      fit.converged = true;
      break;
    }
    const Eigen::VectorXd w = (p.array() * (1.0 - p.array())).matrix();
    const Eigen::VectorXd working = (residual.array() / w.array()).matrix();
    Eigen::VectorXd step = detail::weighted_qr_solve(x, working, &w);

    // Step halving guards against overshoot on nearly separated data.
    Eigen::VectorXd candidate = beta + step;
    Eigen::VectorXd p_candidate =
        detail::logistic_probabilities(x, candidate, opts.eta_cap);
    double ll_candidate = detail::bernoulli_log_likelihood(p_candidate, t);
    // Flat to rounding counts as no decrease so the last Newton steps land.
    const double slack = 1e-10 * (1.0 + std::abs(ll));
    for (int h = 0; h < 30 && !(ll_candidate >= ll - slack); ++h) {
      step *= 0.5;
      candidate = beta + step;
      p_candidate = detail::logistic_probabilities(x, candidate, opts.eta_cap);
      ll_candidate = detail::bernoulli_log_likelihood(p_candidate, t);
    }
    beta = candidate;
    p = p_candidate;
    ll = ll_candidate;

    const double norm = beta.norm();
    growth_streak = norm > previous_norm * 1.5 ? growth_streak + 1 : 0;
    previous_norm = norm;
    const bool saturated =
        ((x * beta).cwiseAbs().array() >= opts.eta_cap).any();
    if (saturated && growth_streak >= 5) {
      fit.diagnostic = "logistic: separation detected, coefficients diverging";
      break;
    }
  }
  if (!fit.converged && fit.diagnostic.empty()) {
    fit.diagnostic = "logistic: iteration limit reached";
  }
  fit.coefficients = beta;
  fit.pi_hat = p;
  fit.log_likelihood = ll;
  return fit;
}

// Student-t CDF with one degree of freedom.
inline double robit1_cdf(double eta) {
  return 0.5 + std::atan(eta) / std::numbers::pi;
}

inline double robit1_density(double eta) {
  return 1.0 / (std::numbers::pi * (1.0 + eta * eta));
}

inline Eigen::VectorXd robit1_probabilities(const Eigen::MatrixXd& x,
                                            const Eigen::VectorXd& beta) {
  Eigen::VectorXd p = x * beta;
  for (auto& v : p) v = clamp_probability(robit1_cdf(v));
  return p;
}

inline double robit1_log_likelihood(const Eigen::MatrixXd& x,
                                    const Eigen::VectorXi& t,
                                    const Eigen::VectorXd& beta) {
  return detail::bernoulli_log_likelihood(robit1_probabilities(x, beta), t);
}

inline Eigen::VectorXd robit1_gradient(const Eigen::MatrixXd& x,
                                       const Eigen::VectorXi& t,
                                       const Eigen::VectorXd& beta) {
  const Eigen::VectorXd eta = x * beta;
  Eigen::VectorXd u(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    const double f = clamp_probability(robit1_cdf(eta(i)));
    u(i) = (t(i) - f) * robit1_density(eta(i)) / (f * (1.0 - f));
  }
  return x.transpose() * u;
}

inline PropensityFit fit_robit1(const DesignMatrix& design,
                                const Eigen::VectorXi& t,
                                const RobitOptions& opts = {}) {
  const Eigen::MatrixXd& x = design.values;
  detail::require_both_classes(t, x.rows());

  const PropensityFit warm = fit_logistic(design, t);
  Eigen::VectorXd beta = warm.coefficients * opts.init_scale;
  double ll = robit1_log_likelihood(x, t, beta);

  PropensityFit fit;
  fit.method = PsMethod::kRobit1;
  fit.covariate_set = design.covariate_set;

  Eigen::VectorXd u(x.rows()), w(x.rows());
  for (int it = 1; it <= opts.max_iterations; ++it) {
    fit.iterations = it;
    const Eigen::VectorXd eta = x * beta;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const double f = clamp_probability(robit1_cdf(eta(i)));
      const double d = robit1_density(eta(i));
      const double v = f * (1.0 - f);
      u(i) = (t(i) - f) * d / v;
      w(i) = d * d / v;
    }
    if ((x.transpose() * u).norm() < opts.gradient_tolerance) {
      fit.converged = true;
      break;
    }
    const Eigen::VectorXd working = (u.array() / w.array()).matrix();
    Eigen::VectorXd step = detail::weighted_qr_solve(x, working, &w);

    // Near the optimum the likelihood change drops below rounding; a full
    // step that shrinks the gradient is then accepted as well.
    const double grad_norm = (x.transpose() * u).norm();
    bool improved = false;
    for (int h = 0; h < 40; ++h) {
      const Eigen::VectorXd candidate = beta + step;
      const double ll_candidate = robit1_log_likelihood(x, t, candidate);
      const bool polish = h == 0 && ll_candidate >= ll - 1e-9 * (1.0 + std::abs(ll)) &&
                          robit1_gradient(x, t, candidate).norm() < grad_norm;
      if (ll_candidate >= ll || polish) {
        improved = ll_candidate > ll || h == 0;
        beta = candidate;
        ll = ll_candidate;
        break;
      }
      step *= 0.5;
    }
    if (!improved) {
      fit.diagnostic = "robit: no ascent direction found";
      break;
    }
  }
  if (!fit.converged && fit.diagnostic.empty()) {
    fit.diagnostic = "robit: iteration limit reached";
  }
  fit.coefficients = beta;
  fit.pi_hat = robit1_probabilities(x, beta);
  fit.log_likelihood = ll;
  return fit;
}

}  // namespace drsim
