#pragma once

// Concrete fitted-model types. Callers normally hold ModelPtr; these are
// exposed for serialization round-trips and white-box tests.

#include "psl/learners.hpp"
#include "psl/rng.hpp"

namespace psl {

class MeanModel : public Model {
public:
    double value = 0.0;
    std::vector<double> predict(const Matrix& X) const override;
    nlohmann::ordered_json to_json() const override;
};

class LinearModel : public Model {
public:
    std::vector<double> beta;  // aligned with selected
    double intercept = 0.0;
    bool logistic = false;
    bool ridge_fallback = false;
    std::vector<double> predict(const Matrix& X) const override;
    nlohmann::ordered_json to_json() const override;
};

class TreeModel : public Model {
public:
    std::vector<TreeNode> nodes;
    bool clamp_prob = false;
    std::vector<double> predict(const Matrix& X) const override;
    nlohmann::ordered_json to_json() const override;
};

class ForestModel : public Model {
public:
    std::vector<std::vector<TreeNode>> trees;
    bool clamp_prob = false;
    std::vector<double> predict(const Matrix& X) const override;
    nlohmann::ordered_json to_json() const override;
};

class BoostModel : public Model {
public:
    double base_score = 0.0;
    double learning_rate = 0.1;
    bool logistic = false;
    std::vector<std::vector<TreeNode>> trees;
    std::vector<double> predict(const Matrix& X) const override;
    nlohmann::ordered_json to_json() const override;
};

class KnnModel : public Model {
public:
    std::size_t k = 10;
    Matrix train_x;  // selected columns only
    std::vector<double> train_y;
    std::vector<double> predict(const Matrix& X) const override;
    nlohmann::ordered_json to_json() const override;
};

// Builders used by fit(); X already restricted to the model's columns.
struct TreeConfig {
    std::size_t max_depth = 10;
    std::size_t min_leaf = 5;
    std::size_t mtry = 0;  // 0 = all features
};

std::vector<TreeNode> grow_regression_tree(const Matrix& X, const std::vector<double>& y,
                                           const std::vector<std::size_t>& rows,
                                           const TreeConfig& cfg, Rng* rng);
std::vector<TreeNode> grow_gini_tree(const Matrix& X, const std::vector<double>& y,
                                     const std::vector<double>& w,
                                     const std::vector<std::size_t>& rows, const TreeConfig& cfg,
                                     Rng* rng);
// xgboost-style tree on gradient/hessian pairs, leaf = -G/(H+reg_lambda).
// presorted[f] holds all row indices ordered by feature f (computed once per
// boosting run; ties by row index).
std::vector<TreeNode> grow_grad_tree(const Matrix& X, const std::vector<double>& grad,
                                     const std::vector<double>& hess, std::size_t max_depth,
                                     double reg_lambda, double min_child_weight,
                                     const std::vector<std::vector<std::uint32_t>>& presorted);
std::vector<std::vector<std::uint32_t>> presort_features(const Matrix& X);

}  // namespace psl
