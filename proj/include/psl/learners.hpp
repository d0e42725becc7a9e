#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "psl/common.hpp"

namespace psl {

enum class LearnerKind { regression, weighted_binary, both };

struct Learner {
    std::string name;
    LearnerKind kind = LearnerKind::regression;
    std::map<std::string, double> hyper;
    bool screen = false;     // correlation screening before fit
    double screen_p = 0.1;
};

class Model {
public:
    virtual ~Model() = default;
    virtual std::vector<double> predict(const Matrix& X) const = 0;
    virtual nlohmann::ordered_json to_json() const = 0;

    std::string learner_name;
    std::size_t p_original = 0;             // column count fit expects at predict time
    std::vector<std::size_t> selected;      // feature indices used by the model

protected:
    void check_dims(const Matrix& X) const;
    Matrix subset(const Matrix& X) const;   // columns restricted to selected
};

using ModelPtr = std::shared_ptr<const Model>;

// Regression learners reject weights; weight-capable learners treat a present
// weight vector as the signal to fit the binary path (y must then be 0/1).
ModelPtr fit(const Learner& learner, const Matrix& X, const std::vector<double>& y,
             const std::vector<double>* weights, std::uint64_t seed);

std::vector<std::size_t> correlation_screen(const Matrix& X, const std::vector<double>& y,
                                            double p_threshold);

std::vector<Learner> builtin_library(const std::string& mode);  // "pseudo" or "binary"
std::vector<Learner> library_from_json(const nlohmann::json& spec);

ModelPtr model_from_json(const nlohmann::json& j);

// Fixed-penalty lasso on the raw columns: minimizes
// (2n)^{-1} ||y - b - X beta||^2 + lambda ||beta||_1 with unpenalized intercept.
struct LassoFit {
    std::vector<double> beta;
    double intercept = 0.0;
};
LassoFit lasso_fixed(const Matrix& X, const std::vector<double>& y, double lambda);

// Internal tree machinery shared by cart/rf/gbm, exposed for serialization.
struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1, right = -1;
    double value = 0.0;
};

double tree_eval(const std::vector<TreeNode>& nodes, const double* row);

}  // namespace psl
