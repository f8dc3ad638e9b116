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

// Inverse-probability weights and weighted Kolmogorov-Smirnov balance.

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "drsim/common.hpp"
#include "drsim/dgp.hpp"

namespace drsim {

struct WeightVector {
  Eigen::VectorXd weights;  // zero for nonrespondents
  Scheme scheme = Scheme::kPop;
};

// Which sample the weighted respondents are compared against.
//   kDefault:         POP -> full sample, NR -> nonrespondents.
//   kNonrespondents:  nonrespondents for both schemes.
enum class BalanceReference { kDefault, kNonrespondents };

struct BalanceSpec {
  Scheme scheme = Scheme::kPop;
  CovariateSet covariates = CovariateSet::kX;
  BalanceReference reference = BalanceReference::kDefault;
};

inline WeightVector compute_weights(const Eigen::VectorXd& pi_hat,
                                    const Eigen::VectorXi& t, Scheme scheme) {
  if (pi_hat.size() != t.size()) {
    throw InvalidArgument("weights: pi_hat and t differ in length");
  }
  if (scheme != Scheme::kPop && scheme != Scheme::kNr) {
    throw InvalidArgument("weights: scheme must be POP or NR");
  }
  WeightVector w;
  w.scheme = scheme;
  w.weights.setZero(pi_hat.size());
  for (Eigen::Index i = 0; i < pi_hat.size(); ++i) {
    const double p = pi_hat(i);
    if (!(p > 0.0 && p < 1.0)) {
      throw InvalidArgument("weights: propensity outside (0, 1)");
    }
    if (t(i) == 1) w.weights(i) = scheme == Scheme::kPop ? 1.0 / p : (1.0 - p) / p;
  }
  return w;
}

inline double effective_sample_size(const WeightVector& w) {
  double sum = 0.0, sum_sq = 0.0;
  for (double v : w.weights) {
    if (v > 0.0) {
      sum += v;
      sum_sq += v * v;
    }
  }
  if (sum_sq == 0.0) throw InvalidArgument("ess: no positive weight");
  return sum * sum / sum_sq;
}

namespace detail {

struct PooledPoint {
  double value;
  int a_slot;       // index into the a-side weights, or -1
  double b_weight;  // weight contributed to the b side
};

inline std::vector<PooledPoint> pool_points(std::span<const double> values_a,
                                            std::span<const double> values_b,
                                            std::span<const double> w_b) {
  std::vector<PooledPoint> pooled;
  pooled.reserve(values_a.size() + values_b.size());
  for (std::size_t i = 0; i < values_a.size(); ++i) {
    pooled.push_back({values_a[i], static_cast<int>(i), 0.0});
  }
  for (std::size_t i = 0; i < values_b.size(); ++i) {
    pooled.push_back({values_b[i], -1, w_b[i]});
  }
  std::stable_sort(pooled.begin(), pooled.end(),
                   [](const PooledPoint& l, const PooledPoint& r) {
                     return l.value < r.value;
                   });
  return pooled;
}

// Sup over all thresholds of |F_a - F_b|, both ECDFs right-continuous.
inline double ks_sweep(const std::vector<PooledPoint>& pooled,
                       std::span<const double> w_a, double total_a,
                       double total_b) {
  double cum_a = 0.0, cum_b = 0.0, best = 0.0;
  for (std::size_t k = 0; k < pooled.size(); ++k) {
    const PooledPoint& pt = pooled[k];
    if (pt.a_slot >= 0) cum_a += w_a[static_cast<std::size_t>(pt.a_slot)];
    cum_b += pt.b_weight;
    if (k + 1 == pooled.size() || pooled[k + 1].value != pt.value) {
      best = std::max(best, std::abs(cum_a / total_a - cum_b / total_b));
    }
  }
  return best;
}

inline double positive_total(std::span<const double> w, const char* side) {
  double total = 0.0;
  for (double v : w) {
    if (v < 0.0 || !std::isfinite(v)) {
      throw InvalidArgument("weighted_ks: weights must be finite and >= 0");
    }
    total += v;
  }
  if (!(total > 0.0)) {
    throw InvalidArgument(std::string("weighted_ks: zero total weight on side ") + side);
  }
  return total;
}

}  // namespace detail

inline double weighted_ks(std::span<const double> values_a,
                          std::span<const double> w_a,
                          std::span<const double> values_b,
                          std::span<const double> w_b) {
  if (values_a.size() != w_a.size() || values_b.size() != w_b.size()) {
    throw InvalidArgument("weighted_ks: values and weights differ in length");
  }
  const double total_a = detail::positive_total(w_a, "a");
  const double total_b = detail::positive_total(w_b, "b");
  return detail::ks_sweep(detail::pool_points(values_a, values_b, w_b), w_a,
                          total_a, total_b);
}

// Presorts the pooled covariate columns once so that many weight vectors
// (e.g. one per boosting iteration) can be scored cheaply. Produces exactly
// the same value as max_marginal_ks for the same inputs.
class BalanceEvaluator {
 public:
  BalanceEvaluator(const CovariateMatrix& covariates, const Eigen::VectorXi& t,
                   Scheme scheme,
                   BalanceReference reference = BalanceReference::kDefault) {
    if (covariates.rows() != t.size()) {
      throw InvalidArgument("balance: covariates and t differ in length");
    }
    const bool full_reference =
        scheme == Scheme::kPop && reference == BalanceReference::kDefault;
    for (Eigen::Index i = 0; i < t.size(); ++i) {
      if (t(i) == 1) respondents_.push_back(i);
      if (full_reference || t(i) == 0) reference_.push_back(i);
    }
    if (respondents_.empty() || reference_.empty()) {
      throw InvalidArgument("balance: empty respondent or reference sample");
    }
    const std::vector<double> unit(reference_.size(), 1.0);
    for (int j = 0; j < kNumCovariates; ++j) {
      std::vector<double> a, b;
      for (auto i : respondents_) a.push_back(covariates(i, j));
      for (auto i : reference_) b.push_back(covariates(i, j));
      pooled_[static_cast<std::size_t>(j)] = detail::pool_points(a, b, unit);
    }
    total_b_ = static_cast<double>(reference_.size());
  }

  double max_ks(const WeightVector& w) const {
    const std::vector<double> w_a = respondent_weights(w);
    const double total_a = respondent_total(w_a);
    double best = 0.0;
    for (const auto& pooled : pooled_) {
      best = std::max(best, detail::ks_sweep(pooled, w_a, total_a, total_b_));
    }
    return best;
  }

  double column_ks(const WeightVector& w, int column) const {
    const std::vector<double> w_a = respondent_weights(w);
    return detail::ks_sweep(pooled_.at(static_cast<std::size_t>(column)), w_a,
                            respondent_total(w_a), total_b_);
  }

 private:
  std::vector<Eigen::Index> respondents_;
  std::vector<Eigen::Index> reference_;
  std::array<std::vector<detail::PooledPoint>, kNumCovariates> pooled_;
  double total_b_ = 0.0;

  std::vector<double> respondent_weights(const WeightVector& w) const {
    std::vector<double> w_a(respondents_.size());
    for (std::size_t r = 0; r < respondents_.size(); ++r) {
      w_a[r] = w.weights(respondents_[r]);
    }
    return w_a;
  }

  static double respondent_total(const std::vector<double>& w_a) {
    double total = 0.0;
    for (double v : w_a) total += v;
    if (!(total > 0.0)) {
      throw InvalidArgument("balance: zero total respondent weight");
    }
    return total;
  }
};

inline double max_marginal_ks(
    const CovariateMatrix& covariates, const Eigen::VectorXi& t,
    const WeightVector& w,
    BalanceReference reference = BalanceReference::kDefault) {
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    if (t(i) == 0 && w.weights(i) != 0.0) {
      throw InvalidArgument("balance: nonrespondent carries a nonzero weight");
    }
  }
  return BalanceEvaluator(covariates, t, w.scheme, reference).max_ks(w);
}

}  // namespace drsim
