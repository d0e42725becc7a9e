#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "psl/common.hpp"

namespace psl {

struct Record {
    double y = 0.0;                       // observed time
    int delta = 0;                        // 0 censored, 1..3 cause codes
    std::vector<double> x;
    std::optional<std::string> stratum;
};

struct SurvivalDataset {
    std::vector<Record> records;
    std::size_t p = 0;
    std::vector<std::string> feature_names;

    std::size_t n() const { return records.size(); }
    bool has_strata() const;
    Matrix covariates() const;
    void validate() const;  // throws std::invalid_argument naming the offending record
};

// Simulation truth side-channel: latent times and the true cause-1 incidence at t*.
struct TruthRecord {
    double t_latent_1 = 0.0;
    double t_latent_2 = 0.0;
    double true_cif = 0.0;
};

struct CsvSchema {
    std::string time_col = "time";
    std::string event_col = "event";
    std::string stratum_col = "stratum";  // optional in the file
};

SurvivalDataset read_csv(const std::string& path, const CsvSchema& schema = {});
void write_csv(const SurvivalDataset& dataset, const std::string& path);

std::vector<TruthRecord> read_truth_csv(const std::string& path);
void write_truth_csv(const std::vector<TruthRecord>& truths, const std::string& path);

std::pair<SurvivalDataset, SurvivalDataset> split_train_validation(const SurvivalDataset& dataset,
                                                                   double fraction,
                                                                   std::uint64_t seed);

// n, p, per-code event counts as a JSON string for reports.
std::string dataset_meta_json(const SurvivalDataset& dataset);

}  // namespace psl
