#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "psl/ensemble.hpp"
#include "psl/simulate.hpp"

namespace psl {

struct MethodResult {
    std::string method;  // pseudo, pseudo.single, binary, true
    double tbauc = 0.0;
    double pauc = 0.0;
    double bias = 0.0;
    double sd_pred = 0.0;
    double mse = 0.0;
};

struct BenchConfig {
    ScenarioConfig scenario;
    std::size_t replicates = 1;
    std::vector<std::string> methods{"pseudo", "pseudo.single", "binary", "true"};
    std::vector<double> grid{17.5, 20.0, 26.5, 35.0};
    double lambda = 100.0;
    std::size_t folds = 10;
    std::string pseudo_library;  // JSON text for library_from_json, empty = builtin
    std::string binary_library;
    std::size_t threads = 1;  // runtime knob, never serialized

    nlohmann::ordered_json to_json() const;
    static BenchConfig from_json(const nlohmann::json& j);
};

struct BenchReport {
    struct MethodAggregate {
        std::string method;
        double mean_tbauc = 0.0, sd_tbauc = 0.0;
        double mean_pauc = 0.0, sd_pauc = 0.0;
        double mean_bias = 0.0, mean_sd_pred = 0.0, mean_mse = 0.0;
    };

    BenchConfig config;
    std::size_t completed = 0;
    std::size_t failed = 0;
    std::vector<MethodAggregate> aggregates;
    std::vector<std::vector<MethodResult>> replicate_results;  // completed replicates, in order

    nlohmann::ordered_json to_json() const;
    static BenchReport from_json(const nlohmann::json& j);
    std::string to_csv() const;       // aggregates table
    std::string to_markdown() const;  // aggregates table with notes
};

// Scores one prediction vector against validation pseudo-values and the
// latent truth; labels for tbauc are cause-1 events by t_star.
MethodResult evaluate_predictions(const std::string& method, const std::vector<double>& scores,
                                  const PseudoMatrix& pseudo,
                                  const std::vector<TruthRecord>& truth, double t_star);

// One generate/fit/evaluate pass; the replicate seed is derived from the
// master seed and the replicate index only, so results are pairing-stable and
// independent of scheduling.
std::vector<MethodResult> run_replicate(const BenchConfig& config, std::size_t replicate,
                                        std::size_t fit_threads = 1);

BenchReport run_bench(const BenchConfig& config);

}  // namespace psl
