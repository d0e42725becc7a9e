#pragma once

#include <string>
#include <vector>

#include "psl/dataset.hpp"
#include "psl/estimators.hpp"

namespace psl {

struct RocPoint {
    double cutoff;
    double fp;
    double tp;
};

struct RocCurve {
    std::vector<RocPoint> points;  // ordered by decreasing cutoff, ends at the (1,1) limit
    double time = 0.0;

    std::string to_csv() const;
    std::string to_json() const;
};

struct PredictivenessCurve {
    struct Bin {
        double percentile;  // bin midpoint in [0,1]
        double mean_pseudo;
        std::size_t count;
    };
    struct GridPoint {
        double percentile;
        double fitted;
    };
    std::vector<Bin> binned;          // deciles
    std::vector<GridPoint> smoothed;  // 101-point percentile grid
    double marginal = 0.0;

    std::string to_csv() const;
    std::string to_json() const;
};

struct IpcwWeights {
    std::vector<double> weights;
    double t_star = 0.0;
};

// TP/FP ratios built from cause-1 and survival pseudo-values; negative
// pseudo-values enter the sums unmodified.
RocCurve roc_pseudo(const PseudoMatrix& pseudo, const std::vector<double>& scores, double t);
double auc_pseudo(const RocCurve& roc);
// Mann-Whitney statistic with the half-tie rule.
double auc_true_binary(const std::vector<bool>& labels, const std::vector<double>& scores);
PredictivenessCurve predictiveness_curve(const PseudoMatrix& pseudo,
                                         const std::vector<double>& scores, double t,
                                         double span = 0.3);
IpcwWeights ipcw_weights(const SurvivalDataset& dataset, double t_star, bool stratified = false);
double nn_loglik(const std::vector<bool>& labels, const std::vector<double>& predictions,
                 const std::vector<double>& weights);

}  // namespace psl
