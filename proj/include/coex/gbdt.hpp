#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace coex {

// Boosting hyperparameters; tuning draws each from its documented range.
struct GBDTParams {
    double learning_rate = 0.1;
    int n_estimators = 300;
    int max_depth = 10;
    int num_leaves = 64;
    double l1 = 1e-8;
    double l2 = 1e-8;
    double subsample = 1.0;
};

// Flat node storage; feature < 0 marks a leaf. Split predicate:
// x[feature] < threshold goes left.
struct TreeNode {
    int feature = -1;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;
    double gain = 0.0;
};

struct RegressionTree {
    std::vector<TreeNode> nodes;

    double predict(const std::vector<double>& row) const;
};

// Additive model: prediction = base_score + learning_rate * sum(tree outputs).
struct GBDTModel {
    double base_score = 0.0;
    double learning_rate = 0.1;
    std::vector<std::string> feature_names;
    std::vector<RegressionTree> trees;
    GBDTParams params;

    double predict_raw(const std::vector<double>& row) const;
};

// Squared-error boosting with exact greedy splits found on pre-sorted
// per-feature index arrays partitioned down the tree. Leaf-wise best-first
// growth honoring both max_depth and num_leaves; L1 soft-thresholding and L2
// shrinkage applied to leaf statistics; deterministic under seed (ties broken
// by lowest feature index, then lowest threshold).
GBDTModel fit_gbdt_raw(const std::vector<std::vector<double>>& rows, const std::vector<double>& targets,
                       const std::vector<std::string>& feature_names, const GBDTParams& params,
                       std::uint64_t seed);

}  // namespace coex
