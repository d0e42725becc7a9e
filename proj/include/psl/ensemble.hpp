#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "psl/dataset.hpp"
#include "psl/estimators.hpp"
#include "psl/learners.hpp"
#include "psl/metrics.hpp"

namespace psl {

// Stacked long-format design: m rows per subject, covariates plus the grid
// time as the last column.
struct StackedDesign {
    Matrix rows;
    std::vector<double> outcome;
    std::vector<std::size_t> subject_index;  // row -> subject
    std::vector<std::size_t> time_index;     // row -> grid slot
    std::vector<double> grid;
    std::size_t n = 0;
};

struct CvLearnerReport {
    std::string name;
    bool failed = false;
    double cv_objective = 0.0;  // column AUC in pseudo mode, column risk in binary mode
};

struct EnsembleModel {
    std::string mode;  // "pseudo-auc" or "binary-nnloglik"
    double t_star = 0.0;
    std::vector<double> grid;
    double lambda = 0.0;
    std::vector<ModelPtr> models;  // aligned with cv_report; null when failed
    std::vector<double> alpha_raw;
    std::vector<double> alpha_star;
    std::vector<CvLearnerReport> cv_report;
    double cv_objective = 0.0;  // achieved objective of the optimized weights

    nlohmann::ordered_json to_json() const;
    static EnsembleModel from_json(const nlohmann::json& j);
};

// Contiguous blocks of a seed-shuffled index order; sizes differ by at most
// one, earlier folds take the extra element.
std::vector<std::vector<std::size_t>> make_folds(std::size_t n, std::size_t v, std::uint64_t seed);

StackedDesign stack_time_grid(const SurvivalDataset& dataset, const PseudoMatrix& pseudo,
                              int cause);

struct CvPredictions {
    Matrix z;  // n x K cross-validated predictions at t_star
    std::vector<char> failed;
};
CvPredictions cv_base_predictions(const std::vector<Learner>& library,
                                  const StackedDesign& stacked,
                                  const std::vector<std::vector<std::size_t>>& folds, double t_star,
                                  std::uint64_t seed, std::size_t threads = 1);

struct WeightResult {
    std::vector<double> alpha_raw;   // on the unit L1 sphere (pseudo mode)
    std::vector<double> alpha_star;  // sum-normalized
    double objective = 0.0;
};
WeightResult optimize_auc_weights(const Matrix& z, const PseudoMatrix& pseudo, double lambda,
                                  double t_star, std::uint64_t seed);
WeightResult optimize_nnloglik_weights(const Matrix& probs, const std::vector<bool>& labels,
                                       const IpcwWeights& ipcw);

EnsembleModel fit_superlearner_pseudo(const SurvivalDataset& dataset,
                                      const std::vector<double>& grid, double t_star,
                                      const std::vector<Learner>& library, std::size_t v,
                                      double lambda, std::uint64_t seed, std::size_t threads = 1);
EnsembleModel fit_superlearner_binary(const SurvivalDataset& dataset, double t_star,
                                      const std::vector<Learner>& library, std::size_t v,
                                      bool stratified_weights, std::uint64_t seed,
                                      std::size_t threads = 1);

std::vector<double> predict_ensemble(const EnsembleModel& model, const Matrix& x);

}  // namespace psl
