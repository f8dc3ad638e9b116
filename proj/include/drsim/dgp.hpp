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

// Simulated replicates from the Kang-Schafer nonresponse design, with an
// optional 20*z1*z2 interaction in the outcome mean.
//
//   Z ~ N(0, I_4)
//   Y = 210 + 27.4 z1 + 13.7 (z2 + z3 + z4) [+ 20 z1 z2] + eps,  eps ~ N(0,1)
//   pi = expit(-z1 + 0.5 z2 - 0.25 z3 - 0.1 z4),  T ~ Bernoulli(pi)
//   X = (exp(z1/2), z2/(1+exp(z1)) + 10, (z1 z3/25 + 0.6)^3, (z2+z4+20)^2)
//
// The covariate, noise and response draws come from separate counter
// streams and do not depend on the interaction flag, so both scenarios
// share Z, X and T for a given (seed, replicate).

#include <array>
#include <cstdint>
#include <ostream>

#include <Eigen/Dense>

#include "drsim/common.hpp"
#include "drsim/rng.hpp"

namespace drsim {

inline constexpr double kTrueMean = 210.0;
inline constexpr int kNumCovariates = 4;

using Row4 = std::array<double, kNumCovariates>;
using CovariateMatrix = Eigen::Matrix<double, Eigen::Dynamic, kNumCovariates>;

struct Scenario {
  int n = 200;
  bool interaction = false;
  std::uint64_t base_seed = 20070101;

  void validate() const {
    if (n < 8) throw InvalidArgument("scenario: n must be >= 8");
  }
};

struct Dataset {
  CovariateMatrix z;
  CovariateMatrix x;
  Eigen::VectorXd y;
  Eigen::VectorXi t;
  Eigen::VectorXd pi_true;
  std::uint64_t replicate = 0;

  Eigen::Index size() const { return y.size(); }
  int respondents() const { return t.sum(); }
  int nonrespondents() const { return static_cast<int>(size()) - respondents(); }
  bool degenerate() const {
    return respondents() == 0 || nonrespondents() == 0;
  }
  const CovariateMatrix& covariates(CovariateSet set) const {
    return set == CovariateSet::kZ ? z : x;
  }
};

inline Row4 transform_covariates(const Row4& z) {
  const double z1 = z[0], z2 = z[1], z3 = z[2], z4 = z[3];
  const double c = z1 * z3 / 25.0 + 0.6;
  const double s = z2 + z4 + 20.0;
  return {std::exp(z1 / 2.0), z2 / (1.0 + std::exp(z1)) + 10.0, c * c * c,
          s * s};
}

inline double true_propensity(const Row4& z) {
  return expit(-z[0] + 0.5 * z[1] - 0.25 * z[2] - 0.1 * z[3]);
}

inline Dataset generate_replicate(const Scenario& scenario,
                                  std::uint64_t replicate_index) {
  scenario.validate();
  const int n = scenario.n;
  const CounterRng cov_rng(scenario.base_seed, replicate_index,
                           Stream::kCovariates);
  const CounterRng noise_rng(scenario.base_seed, replicate_index,
                             Stream::kOutcomeNoise);
  const CounterRng resp_rng(scenario.base_seed, replicate_index,
                            Stream::kResponse);

  Dataset d;
  d.replicate = replicate_index;
  d.z.resize(n, kNumCovariates);
  d.x.resize(n, kNumCovariates);
  d.y.resize(n);
  d.t.resize(n);
  d.pi_true.resize(n);
  for (int i = 0; i < n; ++i) {
    Row4 z;
    for (int j = 0; j < kNumCovariates; ++j) {
      z[j] = cov_rng.normal(static_cast<std::uint64_t>(i) * kNumCovariates + j);
      d.z(i, j) = z[j];
    }
    const Row4 x = transform_covariates(z);
    for (int j = 0; j < kNumCovariates; ++j) d.x(i, j) = x[j];

    double mean = kTrueMean + 27.4 * z[0] + 13.7 * (z[1] + z[2] + z[3]);
    if (scenario.interaction) mean += 20.0 * z[0] * z[1];
    d.y(i) = mean + noise_rng.normal(static_cast<std::uint64_t>(i));

    d.pi_true(i) = true_propensity(z);
    d.t(i) = resp_rng.uniform(static_cast<std::uint64_t>(i)) < d.pi_true(i) ? 1 : 0;
  }
  return d;
}

// CSV dump for debugging: replicate,unit,z1..z4,x1..x4,y,t,pi_true.
inline void write_dataset_csv_header(std::ostream& out) {
  out << "replicate,unit,z1,z2,z3,z4,x1,x2,x3,x4,y,t,pi_true\n";
}

inline void write_dataset_csv(std::ostream& out, const Dataset& d) {
  const auto old_precision = out.precision(17);
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    out << d.replicate << ',' << i;
    for (int j = 0; j < kNumCovariates; ++j) out << ',' << d.z(i, j);
    for (int j = 0; j < kNumCovariates; ++j) out << ',' << d.x(i, j);
    out << ',' << d.y(i) << ',' << d.t(i) << ',' << d.pi_true(i) << '\n';
  }
  out.precision(old_precision);
}

}  // namespace drsim
