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

// Generalized boosted model for response propensities: Bernoulli
// log-likelihood boosting with shrunken depth-limited regression trees, and
// selection of the number of trees that minimizes the largest marginal KS
// statistic of the induced weights.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "drsim/common.hpp"
#include "drsim/dgp.hpp"
#include "drsim/propensity.hpp"
#include "drsim/weighting.hpp"

namespace drsim {

struct GbmParams {
  int max_trees = 10000;
  double shrinkage = 0.005;
  int max_depth = 3;
  int min_node_size = 10;

  static GbmParams full() { return {}; }
  static GbmParams desk() { return {3000, 0.01, 3, 10}; }

  void validate() const {
    if (max_trees < 0) throw InvalidArgument("gbm: max_trees must be >= 0");
    if (!(shrinkage > 0.0 && shrinkage <= 1.0)) {
      throw InvalidArgument("gbm: shrinkage must lie in (0, 1]");
    }
    if (max_depth < 1) throw InvalidArgument("gbm: max_depth must be >= 1");
    if (min_node_size < 1) throw InvalidArgument("gbm: min_node_size must be >= 1");
  }
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;  // log-odds increment at a leaf
};

class Tree {
 public:
  Tree() : nodes_(1) {}
  explicit Tree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {}

  // Rows with value <= threshold go left.
  template <typename Row>
  double predict(const Row& row) const {
    int k = 0;
    while (nodes_[static_cast<std::size_t>(k)].feature >= 0) {
      const TreeNode& node = nodes_[static_cast<std::size_t>(k)];
      k = row(node.feature) <= node.threshold ? node.left : node.right;
    }
    return nodes_[static_cast<std::size_t>(k)].value;
  }

  int depth() const { return depth_from(0); }
  const std::vector<TreeNode>& nodes() const { return nodes_; }

 private:
  std::vector<TreeNode> nodes_;

  int depth_from(int k) const {
    const TreeNode& node = nodes_[static_cast<std::size_t>(k)];
    if (node.feature < 0) return 0;
    return 1 + std::max(depth_from(node.left), depth_from(node.right));
  }
};

struct BoostedModel {
  double baseline = 0.0;
  std::vector<Tree> trees;
  double shrinkage = 0.01;
  std::vector<std::string> covariate_labels;
};

// Log-odds after the first k trees: baseline + shrinkage * sum of outputs,
// accumulated tree by tree.
inline Eigen::VectorXd gbm_scores(const BoostedModel& model,
                                  const CovariateMatrix& covariates, int k) {
  if (k < 0 || k > static_cast<int>(model.trees.size())) {
    throw InvalidArgument("gbm_predict: k out of range");
  }
  Eigen::VectorXd score = Eigen::VectorXd::Constant(covariates.rows(), model.baseline);
  for (int j = 0; j < k; ++j) {
    const Tree& tree = model.trees[static_cast<std::size_t>(j)];
    for (Eigen::Index i = 0; i < covariates.rows(); ++i) {
      score(i) += model.shrinkage * tree.predict(covariates.row(i));
    }
  }
  return score;
}

inline Eigen::VectorXd scores_to_probabilities(Eigen::VectorXd score) {
  for (auto& v : score) v = clamp_probability(expit(v));
  return score;
}

inline Eigen::VectorXd gbm_predict(const BoostedModel& model,
                                   const CovariateMatrix& covariates, int k) {
  return scores_to_probabilities(gbm_scores(model, covariates, k));
}

namespace detail {

// Level-wise exact split search. Each feature is presorted once per fit, and
// one pass over a feature's order scores every candidate midpoint for every
// open node at the current depth.
class TreeBuilder {
 public:
  TreeBuilder(const CovariateMatrix& covariates, const GbmParams& params)
      : x_(covariates), params_(params), order_(kNumCovariates) {
    const auto n = static_cast<std::size_t>(x_.rows());
    for (int j = 0; j < kNumCovariates; ++j) {
      auto& ord = order_[static_cast<std::size_t>(j)];
      ord.resize(n);
      std::iota(ord.begin(), ord.end(), 0);
      std::stable_sort(ord.begin(), ord.end(), [&](int a, int b) {
        return x_(a, j) < x_(b, j);
      });
    }
    node_of_.resize(n);
  }

  // residual = t - p, hessian = p (1 - p).
  Tree build(const Eigen::VectorXd& residual, const Eigen::VectorXd& hessian) {
    const auto n = static_cast<int>(x_.rows());
    std::vector<TreeNode> nodes(1);
    std::vector<Stats> stats(1);
    for (int i = 0; i < n; ++i) {
      node_of_[static_cast<std::size_t>(i)] = 0;
      stats[0].add(residual(i));
    }
    std::vector<int> open = {0};

    for (int depth = 0; depth < params_.max_depth && !open.empty(); ++depth) {
      std::vector<Candidate> best(nodes.size());
      std::vector<char> splittable(nodes.size(), 0);
      for (int k : open) {
        splittable[static_cast<std::size_t>(k)] =
            stats[static_cast<std::size_t>(k)].count >= 2 * params_.min_node_size;
      }
      for (int j = 0; j < kNumCovariates; ++j) {
        scan_feature(j, residual, stats, splittable, best);
      }

      std::vector<int> next_open;
      for (int k : open) {
        const Candidate& c = best[static_cast<std::size_t>(k)];
        if (c.feature < 0 || !(c.gain > 0.0)) continue;
        const int left = static_cast<int>(nodes.size());
        nodes.push_back({});
        nodes.push_back({});
        stats.push_back({});
        stats.push_back({});
        TreeNode& parent = nodes[static_cast<std::size_t>(k)];
        parent.feature = c.feature;
        parent.threshold = c.threshold;
        parent.left = left;
        parent.right = left + 1;
        next_open.push_back(left);
        next_open.push_back(left + 1);
      }
      if (next_open.empty()) break;
      for (int i = 0; i < n; ++i) {
        auto& k = node_of_[static_cast<std::size_t>(i)];
        const TreeNode& node = nodes[static_cast<std::size_t>(k)];
        if (node.feature < 0) continue;
        k = x_(i, node.feature) <= node.threshold ? node.left : node.right;
        stats[static_cast<std::size_t>(k)].add(residual(i));
      }
      open = std::move(next_open);
    }

    // Newton step per leaf: sum(t - p) / sum(p (1 - p)).
    std::vector<double> num(nodes.size(), 0.0), den(nodes.size(), 0.0);
    for (int i = 0; i < n; ++i) {
      const auto k = static_cast<std::size_t>(node_of_[static_cast<std::size_t>(i)]);
      num[k] += residual(i);
      den[k] += hessian(i);
    }
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      if (nodes[k].feature < 0) nodes[k].value = den[k] > 0.0 ? num[k] / den[k] : 0.0;
    }
    return Tree(std::move(nodes));
  }

  const std::vector<int>& leaf_of_rows() const { return node_of_; }

 private:
  struct Stats {
    int count = 0;
    double sum = 0.0;
    void add(double r) {
      ++count;
      sum += r;
    }
  };

  struct Candidate {
    int feature = -1;
    double threshold = 0.0;
    double gain = 0.0;
  };

  void scan_feature(int j, const Eigen::VectorXd& residual,
                    const std::vector<Stats>& stats,
                    const std::vector<char>& splittable,
                    std::vector<Candidate>& best) const {
    const std::size_t m = stats.size();
    std::vector<Stats> left(m);
    std::vector<double> last(m, 0.0);
    for (int i : order_[static_cast<std::size_t>(j)]) {
      const auto k = static_cast<std::size_t>(node_of_[static_cast<std::size_t>(i)]);
      if (!splittable[k]) continue;
      const double v = x_(i, j);
      Stats& l = left[k];
      if (l.count > 0 && v != last[k]) {
        const Stats& total = stats[k];
        const int right_count = total.count - l.count;
        if (l.count >= params_.min_node_size && right_count >= params_.min_node_size) {
          const double right_sum = total.sum - l.sum;
          const double gain = l.sum * l.sum / l.count +
                              right_sum * right_sum / right_count -
                              total.sum * total.sum / total.count;
          if (gain > best[k].gain) {
            double threshold = 0.5 * (last[k] + v);
            if (!(threshold < v)) threshold = last[k];
            best[k] = {j, threshold, gain};
          }
        }
      }
      l.add(residual(i));
      last[k] = v;
    }
  }

  const CovariateMatrix& x_;
  GbmParams params_;
  std::vector<std::vector<int>> order_;
  std::vector<int> node_of_;
};

}  // namespace detail

// Grows params.max_trees trees on the Bernoulli log-likelihood.
inline BoostedModel boost_propensity(const CovariateMatrix& covariates,
                                     const Eigen::VectorXi& t,
                                     const GbmParams& params,
                                     std::vector<std::string> labels = {}) {
  params.validate();
  detail::require_both_classes(t, covariates.rows());
  const Eigen::Index n = covariates.rows();
  const double mean_t = t.cast<double>().mean();

  BoostedModel model;
  model.baseline = std::log(mean_t / (1.0 - mean_t));
  model.shrinkage = params.shrinkage;
  model.covariate_labels = std::move(labels);
  model.trees.reserve(static_cast<std::size_t>(params.max_trees));

  detail::TreeBuilder builder(covariates, params);
  Eigen::VectorXd score = Eigen::VectorXd::Constant(n, model.baseline);
  Eigen::VectorXd residual(n), hessian(n);
  for (int m = 0; m < params.max_trees; ++m) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double p = clamp_probability(expit(score(i)));
      residual(i) = t(i) - p;
      hessian(i) = p * (1.0 - p);
    }
    Tree tree = builder.build(residual, hessian);
    const auto& leaf = builder.leaf_of_rows();
    for (Eigen::Index i = 0; i < n; ++i) {
      const double value =
          tree.nodes()[static_cast<std::size_t>(leaf[static_cast<std::size_t>(i)])].value;
      score(i) += model.shrinkage * value;
    }
    model.trees.push_back(std::move(tree));
  }
  return model;
}

// Picks k minimizing the largest marginal KS statistic of the weights
// implied by the k-tree probabilities. Candidates: every 100 trees (plus the
// last), then step 10 within +-100 of the best, then step 1 within +-10.
// Ties go to the smaller k.
inline PropensityFit select_balance_iteration(const BoostedModel& model,
                                              const CovariateMatrix& covariates,
                                              const Eigen::VectorXi& t,
                                              const BalanceSpec& balance) {
  const int max_k = static_cast<int>(model.trees.size());
  const BalanceEvaluator evaluator(covariates, t, balance.scheme, balance.reference);
  std::map<int, double> evaluated;

  // Scores for increasing k are accumulated in one pass per candidate list.
  auto evaluate = [&](std::vector<int> ks) {
    std::sort(ks.begin(), ks.end());
    Eigen::VectorXd score =
        Eigen::VectorXd::Constant(covariates.rows(), model.baseline);
    int done = 0;
    for (int k : ks) {
      for (; done < k; ++done) {
        const Tree& tree = model.trees[static_cast<std::size_t>(done)];
        for (Eigen::Index i = 0; i < covariates.rows(); ++i) {
          score(i) += model.shrinkage * tree.predict(covariates.row(i));
        }
      }
      if (evaluated.count(k)) continue;
      const WeightVector w =
          compute_weights(scores_to_probabilities(score), t, balance.scheme);
      evaluated[k] = evaluator.max_ks(w);
    }
  };
  auto best_k = [&] {
    auto best = evaluated.begin();
    for (auto it = evaluated.begin(); it != evaluated.end(); ++it) {
      if (it->second < best->second) best = it;
    }
    return best->first;
  };
  auto window = [&](int center, int radius, int step) {
    std::vector<int> ks;
    for (int k = std::max(0, center - radius); k <= std::min(max_k, center + radius);
         k += step) {
      ks.push_back(k);
    }
    return ks;
  };

  std::vector<int> grid;
  for (int k = 0; k <= max_k; k += 100) grid.push_back(k);
  if (grid.back() != max_k) grid.push_back(max_k);
  evaluate(grid);
  evaluate(window(best_k(), 100, 10));
  evaluate(window(best_k(), 10, 1));

  PropensityFit fit;
  fit.method = PsMethod::kGbm;
  fit.covariate_set = balance.covariates;
  fit.chosen_iterations = best_k();
  fit.achieved_max_ks = evaluated.at(fit.chosen_iterations);
  fit.balance_trace.assign(evaluated.begin(), evaluated.end());
  fit.pi_hat = gbm_predict(model, covariates, fit.chosen_iterations);
  fit.converged = true;
  fit.iterations = max_k;
  return fit;
}

inline std::pair<BoostedModel, PropensityFit> fit_gbm(
    const CovariateMatrix& covariates, const Eigen::VectorXi& t,
    const GbmParams& params, const BalanceSpec& balance) {
  BoostedModel model = boost_propensity(covariates, t, params);
  PropensityFit fit = select_balance_iteration(model, covariates, t, balance);
  return {std::move(model), std::move(fit)};
}

// Text dump for diffing models across implementations.
inline void dump_model(std::ostream& out, const BoostedModel& model) {
  const auto old_precision = out.precision(17);
  out << "gbm-model 1\n";
  out << "baseline " << model.baseline << '\n';
  out << "shrinkage " << model.shrinkage << '\n';
  out << "covariates";
  for (const auto& label : model.covariate_labels) out << ' ' << label;
  out << '\n' << "trees " << model.trees.size() << '\n';
  for (std::size_t j = 0; j < model.trees.size(); ++j) {
    const auto& nodes = model.trees[j].nodes();
    out << "tree " << j << ' ' << nodes.size() << '\n';
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      const TreeNode& node = nodes[k];
      if (node.feature < 0) {
        out << "  " << k << " leaf " << node.value << '\n';
      } else {
        out << "  " << k << " split " << node.feature << ' ' << node.threshold
            << ' ' << node.left << ' ' << node.right << '\n';
      }
    }
  }
  out.precision(old_precision);
}

}  // namespace drsim
