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

// Design matrices for the outcome models and a weighted least-squares solver
// based on column-pivoted Householder QR of the sqrt(w)-scaled system.

#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "drsim/common.hpp"
#include "drsim/dgp.hpp"

namespace drsim {

enum class RowSelection { kAll, kRespondents };

struct DesignMatrix {
  Eigen::MatrixXd values;
  std::vector<std::string> column_labels;
  CovariateSet covariate_set = CovariateSet::kZ;
  bool includes_interaction = false;

  Eigen::Index rows() const { return values.rows(); }
  Eigen::Index cols() const { return values.cols(); }

  // Wraps an arbitrary matrix whose first column is the intercept.
  static DesignMatrix from_values(Eigen::MatrixXd values,
                                  std::vector<std::string> labels) {
    if (values.cols() == 0 ||
        static_cast<std::size_t>(values.cols()) != labels.size()) {
      throw InvalidArgument("design: label count must match column count");
    }
    if (!values.allFinite()) {
      throw InvalidArgument("design: non-finite entry");
    }
    if (values.rows() > 0 && !(values.col(0).array() == 1.0).all()) {
      throw InvalidArgument("design: first column must be the intercept");
    }
    DesignMatrix d;
    d.values = std::move(values);
    d.column_labels = std::move(labels);
    return d;
  }
};

inline DesignMatrix build_design(const Dataset& data, CovariateSet set,
                                 bool include_interaction,
                                 RowSelection rows = RowSelection::kAll) {
  if (include_interaction && set == CovariateSet::kX) {
    throw InvalidArgument(
        "design: the z1*z2 interaction is only defined for the Z covariates");
  }
  const CovariateMatrix& cov = data.covariates(set);
  std::vector<Eigen::Index> keep;
  keep.reserve(static_cast<std::size_t>(data.size()));
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    if (rows == RowSelection::kAll || data.t(i) == 1) keep.push_back(i);
  }

  const Eigen::Index p = 1 + kNumCovariates + (include_interaction ? 1 : 0);
  DesignMatrix d;
  d.covariate_set = set;
  d.includes_interaction = include_interaction;
  d.values.resize(static_cast<Eigen::Index>(keep.size()), p);
  const std::string prefix(to_string(set));
  d.column_labels = {"1"};
  for (int j = 1; j <= kNumCovariates; ++j) {
    d.column_labels.push_back(prefix + std::to_string(j));
  }
  if (include_interaction) d.column_labels.push_back("z1*z2");

  for (std::size_t r = 0; r < keep.size(); ++r) {
    const Eigen::Index i = keep[r];
    const auto row = static_cast<Eigen::Index>(r);
    d.values(row, 0) = 1.0;
    for (int j = 0; j < kNumCovariates; ++j) d.values(row, 1 + j) = cov(i, j);
    if (include_interaction) d.values(row, p - 1) = data.z(i, 0) * data.z(i, 1);
  }
  return d;
}

struct LinearFit {
  Eigen::VectorXd coefficients;
  Eigen::VectorXd fitted;
  bool weighted = false;
  std::vector<std::string> column_labels;
};

namespace detail {

// Minimizes sum_i w_i (y_i - x_i' b)^2. Throws RankDeficient naming the
// columns that fall outside the numerical rank.
inline Eigen::VectorXd weighted_qr_solve(
    const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
    const Eigen::VectorXd* weights,
    const std::vector<std::string>* labels = nullptr) {
  if (y.size() != x.rows()) {
    throw InvalidArgument("least squares: response length mismatch");
  }
  if (x.rows() < x.cols()) {
    throw RankDeficient("least squares: fewer rows than columns");
  }
  Eigen::MatrixXd a = x;
  Eigen::VectorXd b = y;
  if (weights != nullptr) {
    if (weights->size() != x.rows()) {
      throw InvalidArgument("least squares: weight length mismatch");
    }
    if ((weights->array() < 0.0).any() || !weights->allFinite()) {
      throw InvalidArgument("least squares: weights must be finite and >= 0");
    }
    if (!(weights->array() > 0.0).any()) {
      throw InvalidArgument("least squares: all weights are zero");
    }
    const Eigen::ArrayXd root = weights->array().sqrt();
    a = root.matrix().asDiagonal() * a;
    b = (root * b.array()).matrix();
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  if (qr.rank() < a.cols()) {
    std::ostringstream msg;
    msg << "least squares: rank deficient design, collinear column(s):";
    const auto& perm = qr.colsPermutation().indices();
    for (Eigen::Index k = qr.rank(); k < a.cols(); ++k) {
      const auto col = perm(k);
      msg << ' ';
      if (labels != nullptr) {
        msg << (*labels)[static_cast<std::size_t>(col)];
      } else {
        msg << '#' << col;
      }
    }
    throw RankDeficient(msg.str());
  }
  return qr.solve(b);
}

}  // namespace detail

inline LinearFit fit_least_squares(
    const DesignMatrix& design, const Eigen::VectorXd& y,
    const std::optional<Eigen::VectorXd>& weights = std::nullopt) {
  LinearFit fit;
  fit.coefficients = detail::weighted_qr_solve(
      design.values, y, weights ? &*weights : nullptr, &design.column_labels);
  fit.fitted = design.values * fit.coefficients;
  fit.weighted = weights.has_value();
  fit.column_labels = design.column_labels;
  return fit;
}

inline Eigen::VectorXd predict(const LinearFit& fit, const DesignMatrix& design) {
  if (design.column_labels != fit.column_labels) {
    throw InvalidArgument("predict: design columns differ from the fitted model");
  }
  return design.values * fit.coefficients;
}

}  // namespace drsim
