#pragma once

#include <string>
#include <vector>

#include "psl/dataset.hpp"

namespace psl {

// Right-continuous step function with left limits.
struct StepFunction {
    double value_at_zero = 0.0;
    std::vector<double> jump_times;  // strictly increasing, positive
    std::vector<double> values;      // value on [jump_times[k], jump_times[k+1])

    double operator()(double t) const;
    double left_limit(double t) const;
};

StepFunction kaplan_meier(const SurvivalDataset& dataset);
StepFunction aalen_johansen(const SurvivalDataset& dataset, int cause);
// Kaplan-Meier of the censoring distribution (delta==0 are the events).
// Ties: real events leave the risk set before censorings at the same time.
StepFunction censoring_km(const SurvivalDataset& dataset);

struct PseudoMatrix {
    std::vector<double> times;
    std::vector<int> causes;
    std::size_t n = 0;
    std::vector<double> values;           // [(i*m + l)*c + j]
    std::vector<double> survival_pseudo;  // [i*m + l], 1 - sum over causes

    std::size_t m() const { return times.size(); }
    std::size_t c() const { return causes.size(); }
    double value(std::size_t i, std::size_t l, std::size_t j) const {
        return values[(i * m() + l) * c() + j];
    }
    double surv(std::size_t i, std::size_t l) const { return survival_pseudo[i * m() + l]; }
    void write_csv(const std::string& path) const;  // subject_id,time,cause,pseudo
};

PseudoMatrix pseudo_observations(const SurvivalDataset& dataset, const std::vector<int>& causes,
                                 const std::vector<double>& times);
PseudoMatrix stratified_pseudo_observations(const SurvivalDataset& dataset,
                                            const std::vector<int>& causes,
                                            const std::vector<double>& times);

}  // namespace psl
