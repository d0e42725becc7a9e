#include "psl/bench.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "psl/estimators.hpp"
#include "psl/learners.hpp"
#include "psl/metrics.hpp"
#include "psl/rng.hpp"

namespace psl {

namespace {

using nlohmann::ordered_json;

const char* kAbsentMethods = "coxboost, rfsrc";

std::uint64_t mix_seed(std::uint64_t master, std::uint64_t salt, std::uint64_t index) {
    return philox4x64({salt, index, 0x62e9c541ull, 0}, {master, 0xbe9c4ull})[0];
}

std::uint64_t method_salt(const std::string& method) {
    if (method == "pseudo") return 1;
    if (method == "pseudo.single") return 2;
    if (method == "binary") return 3;
    if (method == "true") return 4;
    throw std::invalid_argument("unknown method: " + method);
}

std::vector<int> observed_causes_with_one(const SurvivalDataset& data) {
    std::vector<int> causes{1};
    for (const auto& rec : data.records)
        if (rec.delta > 0 && std::find(causes.begin(), causes.end(), rec.delta) == causes.end())
            causes.push_back(rec.delta);
    std::sort(causes.begin(), causes.end());
    return causes;
}

std::vector<Learner> resolve_library(const std::string& spec, const std::string& mode) {
    if (spec.empty()) return builtin_library(mode);
    return library_from_json(nlohmann::json::parse(spec));
}

double sd_or_zero(const std::vector<double>& v) { return v.size() < 2 ? 0.0 : sample_sd(v); }

ordered_json library_echo(const std::string& spec) {
    if (spec.empty()) return ordered_json(nullptr);
    return ordered_json::parse(spec);
}

}  // namespace

MethodResult evaluate_predictions(const std::string& method, const std::vector<double>& scores,
                                  const PseudoMatrix& pseudo,
                                  const std::vector<TruthRecord>& truth, double t_star) {
    const std::size_t n = truth.size();
    if (scores.size() != n) throw std::logic_error("score/truth length mismatch");
    MethodResult out;
    out.method = method;
    out.pauc = auc_pseudo(roc_pseudo(pseudo, scores, t_star));
    std::vector<bool> labels(n);
    for (std::size_t i = 0; i < n; ++i)
        labels[i] = truth[i].t_latent_1 <= t_star && truth[i].t_latent_1 <= truth[i].t_latent_2;
    out.tbauc = auc_true_binary(labels, scores);
    double bias = 0.0, mse = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double d = scores[i] - truth[i].true_cif;
        bias += d;
        mse += d * d;
    }
    out.bias = bias / static_cast<double>(n);
    out.mse = mse / static_cast<double>(n);
    out.sd_pred = sample_sd(scores);
    return out;
}

nlohmann::ordered_json BenchConfig::to_json() const {
    ordered_json j;
    j["scenario"] = scenario.to_json();
    j["replicates"] = replicates;
    j["methods"] = methods;
    j["grid"] = grid;
    j["lambda"] = lambda;
    j["folds"] = folds;
    j["pseudo_library"] = library_echo(pseudo_library);
    j["binary_library"] = library_echo(binary_library);
    return j;
}

BenchConfig BenchConfig::from_json(const nlohmann::json& j) {
    BenchConfig c;
    c.scenario = ScenarioConfig::from_json(j.at("scenario"));
    c.replicates = j.at("replicates").get<std::size_t>();
    c.methods = j.at("methods").get<std::vector<std::string>>();
    c.grid = j.at("grid").get<std::vector<double>>();
    c.lambda = j.at("lambda").get<double>();
    c.folds = j.at("folds").get<std::size_t>();
    if (j.contains("pseudo_library") && !j.at("pseudo_library").is_null())
        c.pseudo_library = j.at("pseudo_library").dump();
    if (j.contains("binary_library") && !j.at("binary_library").is_null())
        c.binary_library = j.at("binary_library").dump();
    return c;
}

std::vector<MethodResult> run_replicate(const BenchConfig& config, std::size_t replicate,
                                        std::size_t fit_threads) {
    for (const auto& m : config.methods) method_salt(m);

    ScenarioConfig sc = config.scenario;
    sc.seed = mix_seed(config.scenario.seed, 0x3e91ca7eull, replicate);
    ScenarioDraw draw = generate_scenario(sc);

    const Matrix vx = draw.validation.covariates();
    const auto causes = observed_causes_with_one(draw.validation);
    const PseudoMatrix vpseudo =
        pseudo_observations(draw.validation, causes, {config.scenario.t_star});

    std::vector<MethodResult> out;
    out.reserve(config.methods.size());
    for (const auto& method : config.methods) {
        const std::uint64_t fit_seed = mix_seed(sc.seed, 0xf17ull, method_salt(method));
        std::vector<double> scores;
        if (method == "true") {
            scores.reserve(draw.validation_truth.size());
            for (const auto& t : draw.validation_truth) scores.push_back(t.true_cif);
        } else if (method == "pseudo" || method == "pseudo.single") {
            std::vector<double> grid =
                method == "pseudo" ? config.grid : std::vector<double>{config.scenario.t_star};
            auto model = fit_superlearner_pseudo(
                draw.train, grid, config.scenario.t_star,
                resolve_library(config.pseudo_library, "pseudo"), config.folds, config.lambda,
                fit_seed, fit_threads);
            scores = predict_ensemble(model, vx);
        } else {
            auto model = fit_superlearner_binary(
                draw.train, config.scenario.t_star, resolve_library(config.binary_library, "binary"),
                config.folds, false, fit_seed, fit_threads);
            scores = predict_ensemble(model, vx);
        }
        out.push_back(evaluate_predictions(method, scores, vpseudo, draw.validation_truth,
                                           config.scenario.t_star));
    }
    return out;
}

BenchReport run_bench(const BenchConfig& config) {
    if (config.replicates == 0) throw std::invalid_argument("need at least one replicate");
    if (config.methods.empty()) throw std::invalid_argument("no methods requested");
    for (const auto& m : config.methods) method_salt(m);
    if (std::find(config.methods.begin(), config.methods.end(), "pseudo") !=
            config.methods.end() &&
        std::find(config.grid.begin(), config.grid.end(), config.scenario.t_star) ==
            config.grid.end())
        throw std::invalid_argument("grid must contain t_star for the pseudo method");

    const std::size_t r_total = config.replicates;
    std::vector<std::vector<MethodResult>> slots(r_total);
    std::vector<char> ok(r_total, 0);
    std::vector<std::string> errors(r_total);
    const std::size_t fit_threads = r_total == 1 ? config.threads : 1;
    run_parallel(r_total, config.threads, [&](std::size_t r) {
        try {
            slots[r] = run_replicate(config, r, fit_threads);
            ok[r] = 1;
        } catch (const std::exception& e) {
            errors[r] = e.what();
        }
    });

    BenchReport report;
    report.config = config;
    for (std::size_t r = 0; r < r_total; ++r) {
        if (ok[r])
            report.replicate_results.push_back(std::move(slots[r]));
        else
            ++report.failed;
    }
    report.completed = report.replicate_results.size();
    if (report.completed == 0) {
        std::string first;
        for (const auto& e : errors)
            if (!e.empty()) {
                first = e;
                break;
            }
        throw std::runtime_error("all replicates failed: " + first);
    }

    for (std::size_t m = 0; m < config.methods.size(); ++m) {
        std::vector<double> tbauc, pauc, bias, sd_pred, mse;
        for (const auto& rep : report.replicate_results) {
            tbauc.push_back(rep[m].tbauc);
            pauc.push_back(rep[m].pauc);
            bias.push_back(rep[m].bias);
            sd_pred.push_back(rep[m].sd_pred);
            mse.push_back(rep[m].mse);
        }
        BenchReport::MethodAggregate agg;
        agg.method = config.methods[m];
        agg.mean_tbauc = mean(tbauc);
        agg.sd_tbauc = sd_or_zero(tbauc);
        agg.mean_pauc = mean(pauc);
        agg.sd_pauc = sd_or_zero(pauc);
        agg.mean_bias = mean(bias);
        agg.mean_sd_pred = mean(sd_pred);
        agg.mean_mse = mean(mse);
        report.aggregates.push_back(agg);
    }
    return report;
}

nlohmann::ordered_json BenchReport::to_json() const {
    ordered_json j;
    j["schema_version"] = 1;
    j["kind"] = "bench_report";
    j["config"] = config.to_json();
    j["completed"] = completed;
    j["failed"] = failed;
    j["absent_methods"] = ordered_json::array({"coxboost", "rfsrc"});
    ordered_json aggs = ordered_json::array();
    for (const auto& a : aggregates) {
        ordered_json row;
        row["method"] = a.method;
        row["mean_tbauc"] = a.mean_tbauc;
        row["sd_tbauc"] = a.sd_tbauc;
        row["mean_pauc"] = a.mean_pauc;
        row["sd_pauc"] = a.sd_pauc;
        row["mean_bias"] = a.mean_bias;
        row["mean_sd_pred"] = a.mean_sd_pred;
        row["mean_mse"] = a.mean_mse;
        aggs.push_back(row);
    }
    j["aggregates"] = aggs;
    ordered_json reps = ordered_json::array();
    for (const auto& rep : replicate_results) {
        ordered_json methods = ordered_json::array();
        for (const auto& r : rep) {
            ordered_json row;
            row["method"] = r.method;
            row["tbauc"] = r.tbauc;
            row["pauc"] = r.pauc;
            row["bias"] = r.bias;
            row["sd_pred"] = r.sd_pred;
            row["mse"] = r.mse;
            methods.push_back(row);
        }
        reps.push_back(methods);
    }
    j["replicates"] = reps;
    return j;
}

BenchReport BenchReport::from_json(const nlohmann::json& j) {
    BenchReport report;
    report.config = BenchConfig::from_json(j.at("config"));
    report.completed = j.at("completed").get<std::size_t>();
    report.failed = j.at("failed").get<std::size_t>();
    for (const auto& row : j.at("aggregates")) {
        MethodAggregate a;
        a.method = row.at("method").get<std::string>();
        a.mean_tbauc = row.at("mean_tbauc").get<double>();
        a.sd_tbauc = row.at("sd_tbauc").get<double>();
        a.mean_pauc = row.at("mean_pauc").get<double>();
        a.sd_pauc = row.at("sd_pauc").get<double>();
        a.mean_bias = row.at("mean_bias").get<double>();
        a.mean_sd_pred = row.at("mean_sd_pred").get<double>();
        a.mean_mse = row.at("mean_mse").get<double>();
        report.aggregates.push_back(a);
    }
    for (const auto& rep : j.at("replicates")) {
        std::vector<MethodResult> methods;
        for (const auto& row : rep) {
            MethodResult r;
            r.method = row.at("method").get<std::string>();
            r.tbauc = row.at("tbauc").get<double>();
            r.pauc = row.at("pauc").get<double>();
            r.bias = row.at("bias").get<double>();
            r.sd_pred = row.at("sd_pred").get<double>();
            r.mse = row.at("mse").get<double>();
            methods.push_back(r);
        }
        report.replicate_results.push_back(std::move(methods));
    }
    return report;
}

std::string BenchReport::to_csv() const {
    if (aggregates.empty()) throw std::invalid_argument("report has no methods to render");
    std::ostringstream out;
    out << "method,mean_tbauc,sd_tbauc,mean_pauc,sd_pauc,mean_bias,mean_sd_pred,mean_mse\n";
    for (const auto& a : aggregates)
        out << a.method << ',' << format_double(a.mean_tbauc) << ',' << format_double(a.sd_tbauc)
            << ',' << format_double(a.mean_pauc) << ',' << format_double(a.sd_pauc) << ','
            << format_double(a.mean_bias) << ',' << format_double(a.mean_sd_pred) << ','
            << format_double(a.mean_mse) << '\n';
    return out.str();
}

std::string BenchReport::to_markdown() const {
    if (aggregates.empty()) throw std::invalid_argument("report has no methods to render");
    std::ostringstream out;
    out << "| method | mean.tbauc | sd.tbauc | mean.pauc | sd.pauc | mean.bias | sd.pred | mse "
           "|\n";
    out << "|---|---|---|---|---|---|---|---|\n";
    for (const auto& a : aggregates)
        out << "| " << a.method << " | " << format_double(a.mean_tbauc) << " | "
            << format_double(a.sd_tbauc) << " | " << format_double(a.mean_pauc) << " | "
            << format_double(a.sd_pauc) << " | " << format_double(a.mean_bias) << " | "
            << format_double(a.mean_sd_pred) << " | " << format_double(a.mean_mse) << " |\n";
    out << "\n";
    out << "replicates: " << completed << " completed, " << failed << " failed\n";
    out << "mse is reported unscaled\n";
    out << "not implemented: " << kAbsentMethods << "\n";
    return out.str();
}

}  // namespace psl
