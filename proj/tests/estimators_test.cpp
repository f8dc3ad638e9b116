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

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "drsim/dgp.hpp"
#include "drsim/estimators.hpp"
#include "drsim/linear_models.hpp"
#include "drsim/propensity.hpp"

namespace drsim {
namespace {

DesignMatrix line_design(std::initializer_list<double> z) {
  Eigen::MatrixXd v(static_cast<Eigen::Index>(z.size()), 2);
  Eigen::Index i = 0;
  for (double zi : z) {
    v(i, 0) = 1.0;
    v(i, 1) = zi;
    ++i;
  }
  return DesignMatrix::from_values(v, {"1", "z"});
}

Dataset all_respond(Dataset d) {
  d.t.setOnes();
  return d;
}

TEST(OlsMean, AllRespondEqualsSampleMean) {
  const Dataset d = all_respond(generate_replicate({100, false, 1}, 0));
  for (CovariateSet set : {CovariateSet::kZ, CovariateSet::kX}) {
    EXPECT_NEAR(est_ols_mean(d, {set, false}).value, d.y.mean(), 1e-9);
  }
}

TEST(OlsMean, ConstantOutcome) {
  Dataset d = generate_replicate({100, false, 2}, 0);
  d.y.setConstant(17.0);
  EXPECT_NEAR(est_ols_mean(d, {CovariateSet::kX, false}).value, 17.0, 1e-9);
}

TEST(OlsMean, HandLineFit) {
  // Respondents (0,1), (1,3) give y = 1 + 2z; predictions {1,3,5,7}.
  const DesignMatrix full = line_design({0, 1, 2, 3});
  const Eigen::Vector4i t(1, 1, 0, 0);
  const Eigen::Vector4d y(1, 3, 0, 0);
  EXPECT_NEAR(ols_prediction_mean(full, t, y), 4.0, 1e-12);
}

TEST(Ipw, HandArithmetic) {
  const Eigen::Vector3i t(1, 1, 0);
  const Eigen::Vector3d y(10, 20, 0);
  const Eigen::Vector3d pi(0.5, 0.8, 0.5);
  EXPECT_NEAR(ipw_mean(t, y, pi, Scheme::kPop, false), 15.0, 1e-12);
  EXPECT_NEAR(ipw_mean(t, y, pi, Scheme::kPop, true), 45.0 / 3.25, 1e-12);
  EXPECT_NEAR(ipw_mean(t, y, pi, Scheme::kNr, true), 14.0, 1e-12);
}

TEST(Ipw, AllRespondWithCertainResponse) {
  const Dataset d = all_respond(generate_replicate({50, false, 3}, 0));
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(d.size());
  for (bool normalized : {false, true}) {
    EXPECT_NEAR(est_ipw(d, ones, Scheme::kPop, normalized).value, d.y.mean(), 1e-9);
  }
  EXPECT_NEAR(est_ipw(d, ones, Scheme::kNr, true).value, d.y.mean(), 1e-9);
}

TEST(Ipw, RejectsInvalidPropensity) {
  const Dataset d = generate_replicate({50, false, 3}, 0);
  Eigen::VectorXd pi = Eigen::VectorXd::Constant(d.size(), 0.5);
  pi(0) = 0.0;
  EXPECT_THROW(est_ipw(d, pi, Scheme::kPop, true), InvalidArgument);
}

TEST(Ipw, Diagnostics) {
  const Eigen::Vector3i t(1, 1, 0);
  Dataset d;
  d.t = t;
  d.y = Eigen::Vector3d(10, 20, 0);
  const Estimate e = est_ipw(d, Eigen::Vector3d(0.5, 0.25, 0.5), Scheme::kPop, true);
  EXPECT_DOUBLE_EQ(e.max_weight, 4.0);
  EXPECT_NEAR(e.ess, 36.0 / 20.0, 1e-12);
}

TEST(Bc, HandArithmetic) {
  const Eigen::Vector2i t(1, 1);
  EXPECT_NEAR(bc_mean(t, Eigen::Vector2d(10, 20), Eigen::Vector2d(0.5, 1.0),
                      Eigen::Vector2d::Zero()),
              20.0, 1e-12);
}

TEST(Bc, InterpolatingFitEqualsOls) {
  // Noise-free outcome linear in Z: residuals vanish on respondents.
  Dataset d = generate_replicate({200, false, 4}, 0);
  const DesignMatrix full = build_design(d, CovariateSet::kZ, false);
  d.y = full.values * Eigen::Vector<double, 5>(210, 27.4, 13.7, 13.7, 13.7);
  const LinearFit fit = fit_outcome_model(full, d.t, d.y);
  const double ols = est_ols_mean(d, {CovariateSet::kZ, false}).value;
  EXPECT_NEAR(est_bc(d, d.pi_true, fit, full).value, ols, 1e-9);
}

TEST(Bc, AllRespondCertain) {
  const Dataset d = all_respond(generate_replicate({60, false, 5}, 0));
  const DesignMatrix full = build_design(d, CovariateSet::kX, false);
  const LinearFit fit = fit_outcome_model(full, d.t, d.y);
  EXPECT_NEAR(est_bc(d, Eigen::VectorXd::Ones(d.size()), fit, full).value, d.y.mean(), 1e-9);
}

TEST(Bc, ZeroOutcomeModelIsHorvitzThompson) {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> unif(0.01, 0.99);
  for (std::uint64_t r = 0; r < 20; ++r) {
    const Dataset d = generate_replicate({200, false, 6}, r);
    Eigen::VectorXd pi(d.size());
    for (auto& p : pi) p = unif(gen);
    EXPECT_NEAR(bc_mean(d.t, d.y, pi, Eigen::VectorXd::Zero(d.size())),
                ipw_mean(d.t, d.y, pi, Scheme::kPop, false), 1e-12 * 210.0);
  }
}

TEST(Wls, ConstantPropensityMatchesOls) {
  const Dataset d = generate_replicate({200, true, 7}, 0);
  const Eigen::VectorXd pi = Eigen::VectorXd::Constant(d.size(), 0.37);
  for (CovariateSet set : {CovariateSet::kZ, CovariateSet::kX}) {
    EXPECT_NEAR(est_dr_wls(d, pi, {set, false}).value,
                est_ols_mean(d, {set, false}).value, 1e-9);
  }
}

TEST(Wls, AllRespondCertain) {
  const Dataset d = all_respond(generate_replicate({60, false, 8}, 0));
  EXPECT_NEAR(est_dr_wls(d, Eigen::VectorXd::Ones(d.size()), {CovariateSet::kX, false}).value,
              d.y.mean(), 1e-9);
}

TEST(Wls, TwoPointsDetermineTheLine) {
  const DesignMatrix full = line_design({0, 1, 2});
  EXPECT_NEAR(wls_mean(full, Eigen::Vector3i(1, 1, 0), Eigen::Vector3d(0, 1, 0),
                       Eigen::Vector3d(0.5, 0.25, 0.5)),
              1.0, 1e-12);
}

TEST(Estimators, AffineEquivariance) {
  const double a = -2.5, b = 40.0;
  for (std::uint64_t r = 0; r < 10; ++r) {
    const Dataset d = generate_replicate({200, r % 2 == 1, 9}, r);
    Dataset shifted = d;
    shifted.y = (a * d.y.array() + b).matrix();
    const Eigen::VectorXd pi =
        fit_logistic(build_design(d, CovariateSet::kX, false), d.t).pi_hat;
    auto check = [&](double base, double moved) {
      EXPECT_NEAR(moved, a * base + b, 1e-10 * std::abs(a * base + b));
    };
    for (CovariateSet set : {CovariateSet::kZ, CovariateSet::kX}) {
      const OutcomeModel m{set, false};
      check(est_ols_mean(d, m).value, est_ols_mean(shifted, m).value);
      check(est_dr_wls(d, pi, m).value, est_dr_wls(shifted, pi, m).value);
      const DesignMatrix full = build_design(d, set, false);
      check(est_bc(d, pi, fit_outcome_model(full, d.t, d.y), full).value,
            est_bc(shifted, pi, fit_outcome_model(full, d.t, shifted.y), full).value);
    }
    check(est_ipw(d, pi, Scheme::kPop, true).value, est_ipw(shifted, pi, Scheme::kPop, true).value);
    check(est_ipw(d, pi, Scheme::kNr, true).value, est_ipw(shifted, pi, Scheme::kNr, true).value);
  }
}

TEST(Estimators, HorvitzThompsonUnbiasedWithTruePropensity) {
  const int reps = 100'000;
  double sum = 0.0, sum_sq = 0.0;
  for (int r = 0; r < reps; ++r) {
    const Dataset d = generate_replicate({200, false, 12345}, static_cast<std::uint64_t>(r));
    const double v = ipw_mean(d.t, d.y, d.pi_true, Scheme::kPop, false);
    sum += v;
    sum_sq += v * v;
  }
  const double mean = sum / reps;
  const double se = std::sqrt((sum_sq / reps - mean * mean) / reps);
  EXPECT_LT(std::abs(mean - kTrueMean), 3.0 * se) << "mean=" << mean << " se=" << se;
}

TEST(EstimatorSpec, Validation) {
  EstimatorSpec ols;
  ols.outcome = OutcomeModel{};
  EXPECT_NO_THROW(ols.validate());
  EstimatorSpec ipw;
  ipw.family = Family::kIpw;
  ipw.ps_method = PsMethod::kGbm;
  ipw.ps_covariates = CovariateSet::kX;
  ipw.scheme = Scheme::kNr;
  EXPECT_NO_THROW(ipw.validate());
  ipw.outcome = OutcomeModel{};
  EXPECT_THROW(ipw.validate(), InvalidArgument);
  EstimatorSpec bc;
  bc.family = Family::kBc;
  bc.ps_method = PsMethod::kLogistic;
  bc.ps_covariates = CovariateSet::kZ;
  EXPECT_THROW(bc.validate(), InvalidArgument);
  bc.outcome = OutcomeModel{CovariateSet::kX, true};
  EXPECT_THROW(bc.validate(), InvalidArgument);
}

}  // namespace
}  // namespace drsim
