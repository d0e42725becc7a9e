#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "psl/bench.hpp"
#include "psl/dataset.hpp"
#include "psl/ensemble.hpp"
#include "psl/estimators.hpp"
#include "psl/learners.hpp"
#include "psl/metrics.hpp"
#include "psl/simulate.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(text);
    while (std::getline(in, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

std::vector<double> parse_grid(const std::string& text) {
    std::vector<double> out;
    for (const auto& tok : split_list(text)) out.push_back(psl::parse_double(tok));
    if (out.empty()) throw std::invalid_argument("empty grid");
    return out;
}

nlohmann::json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    nlohmann::json j;
    in >> j;
    return j;
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_text(const std::string& path, const std::string& text) {
    fs::path p(path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << text;
}

void write_json(const std::string& path, const ordered_json& j) { write_text(path, j.dump(2) + "\n"); }

std::size_t threads_override(std::size_t flag_value) {
    if (const char* v = std::getenv("PSEUDOSL_THREADS")) {
        std::size_t n = static_cast<std::size_t>(std::strtoull(v, nullptr, 10));
        if (n == 0) throw std::invalid_argument("PSEUDOSL_THREADS must be a positive integer");
        return n;
    }
    return flag_value;
}

std::string out_override(const std::string& flag_value) {
    if (const char* v = std::getenv("PSEUDOSL_OUT")) return v;
    return flag_value;
}

std::vector<int> observed_causes_with_one(const psl::SurvivalDataset& data) {
    std::vector<int> causes{1};
    for (const auto& rec : data.records)
        if (rec.delta > 0 && std::find(causes.begin(), causes.end(), rec.delta) == causes.end())
            causes.push_back(rec.delta);
    std::sort(causes.begin(), causes.end());
    return causes;
}

struct SimulateArgs {
    std::string config_path;
    std::string scenario = "A";
    double censoring = 0.2;
    std::size_t n = 500;
    double t_star = 26.5;
    std::uint64_t seed = 1;
    std::string out = "sim";
};

int cmd_simulate(const SimulateArgs& args) {
    psl::ScenarioConfig config;
    if (!args.config_path.empty()) {
        config = psl::ScenarioConfig::from_json(read_json_file(args.config_path));
    } else {
        config.scenario = psl::scenario_from_string(args.scenario);
        config.censoring_target = args.censoring;
        config.n = args.n;
        config.t_star = args.t_star;
        config.seed = args.seed;
    }
    const std::string dir = out_override(args.out);
    fs::create_directories(dir);
    psl::ScenarioDraw draw = psl::generate_scenario(config);

    psl::write_csv(draw.train, dir + "/train.csv");
    psl::write_csv(draw.validation, dir + "/validation.csv");
    psl::write_truth_csv(draw.train_truth, dir + "/train_truth.csv");
    psl::write_truth_csv(draw.validation_truth, dir + "/validation_truth.csv");
    write_json(dir + "/config.json", config.to_json());
    write_text(dir + "/train_meta.json", psl::dataset_meta_json(draw.train) + "\n");
    write_text(dir + "/validation_meta.json", psl::dataset_meta_json(draw.validation) + "\n");

    std::cout << "scenario " << psl::to_string(config.scenario) << ", n=" << config.n
              << " per split, seed=" << config.seed << "\n";
    std::cout << "train: " << psl::dataset_meta_json(draw.train) << "\n";
    std::cout << "validation: " << psl::dataset_meta_json(draw.validation) << "\n";
    std::cout << "wrote train/validation CSVs, truth side-files, and config echo to " << dir
              << "\n";
    return 0;
}

struct FitArgs {
    std::string train_path;
    std::string mode = "pseudo";
    std::string grid = "17.5,20,26.5,35";
    double t_star = 26.5;
    std::string library_path;
    std::size_t folds = 10;
    double lambda = 100.0;
    std::uint64_t seed = 1;
    std::size_t threads = 1;
    bool stratified = false;
    std::string out = "model.json";
};

int cmd_fit(const FitArgs& args) {
    if (args.mode != "pseudo" && args.mode != "pseudo-single" && args.mode != "binary")
        throw std::invalid_argument("mode must be pseudo, pseudo-single, or binary");
    psl::SurvivalDataset train = psl::read_csv(args.train_path);
    const std::size_t threads = threads_override(args.threads);
    const std::string out = out_override(args.out);

    std::vector<psl::Learner> library;
    if (!args.library_path.empty())
        library = psl::library_from_json(read_json_file(args.library_path));
    else
        library = psl::builtin_library(args.mode == "binary" ? "binary" : "pseudo");

    psl::EnsembleModel model;
    if (args.mode == "binary") {
        model = psl::fit_superlearner_binary(train, args.t_star, library, args.folds,
                                             args.stratified, args.seed, threads);
    } else {
        std::vector<double> grid =
            args.mode == "pseudo" ? parse_grid(args.grid) : std::vector<double>{args.t_star};
        model = psl::fit_superlearner_pseudo(train, grid, args.t_star, library, args.folds,
                                             args.lambda, args.seed, threads);
    }
    write_json(out, model.to_json());

    std::cout << "mode " << args.mode << ", " << library.size() << " learners, cv objective "
              << psl::format_double(model.cv_objective) << "\n";
    for (const auto& rep : model.cv_report)
        if (rep.failed) std::cout << "learner " << rep.name << " failed and was dropped\n";
    std::cout << "wrote " << out << "\n";
    return 0;
}

struct EvaluateArgs {
    std::string model_path;
    std::string data_path;
    std::string truth_path;
    std::string out = "eval";
};

int cmd_evaluate(const EvaluateArgs& args) {
    const psl::EnsembleModel model = psl::EnsembleModel::from_json(read_json_file(args.model_path));
    const psl::SurvivalDataset data = psl::read_csv(args.data_path);
    const std::string dir = out_override(args.out);
    fs::create_directories(dir);

    const std::vector<double> scores = psl::predict_ensemble(model, data.covariates());
    const psl::PseudoMatrix pseudo =
        psl::pseudo_observations(data, observed_causes_with_one(data), {model.t_star});
    const psl::RocCurve roc = psl::roc_pseudo(pseudo, scores, model.t_star);
    const double pauc = psl::auc_pseudo(roc);
    const psl::PredictivenessCurve curve = psl::predictiveness_curve(pseudo, scores, model.t_star);

    write_text(dir + "/roc.csv", roc.to_csv());
    write_text(dir + "/predictiveness.csv", curve.to_csv());

    ordered_json j;
    j["schema_version"] = 1;
    j["kind"] = "evaluation";
    j["n"] = data.n();
    j["t_star"] = model.t_star;
    j["pauc"] = pauc;
    std::cout << "pauc " << psl::format_double(pauc) << " at t_star "
              << psl::format_double(model.t_star) << " on " << data.n() << " subjects\n";
    if (!args.truth_path.empty()) {
        const std::vector<psl::TruthRecord> truth = psl::read_truth_csv(args.truth_path);
        const psl::MethodResult r =
            psl::evaluate_predictions("model", scores, pseudo, truth, model.t_star);
        j["tbauc"] = r.tbauc;
        j["bias"] = r.bias;
        j["sd_pred"] = r.sd_pred;
        j["mse"] = r.mse;
        std::cout << "tbauc " << psl::format_double(r.tbauc) << ", bias "
                  << psl::format_double(r.bias) << ", sd_pred " << psl::format_double(r.sd_pred)
                  << ", mse " << psl::format_double(r.mse) << "\n";
    }
    write_json(dir + "/evaluation.json", j);
    std::cout << "wrote evaluation.json, roc.csv, predictiveness.csv to " << dir << "\n";
    return 0;
}

struct BenchArgs {
    std::string config_path;
    std::string scenario = "A";
    double censoring = 0.2;
    std::size_t n = 500;
    std::size_t replicates = 10;
    std::string methods = "pseudo,pseudo.single,binary,true";
    std::string grid = "17.5,20,26.5,35";
    double t_star = 26.5;
    double lambda = 100.0;
    std::size_t folds = 10;
    std::uint64_t seed = 1;
    std::size_t threads = 1;
    std::string pseudo_library_path;
    std::string binary_library_path;
    std::string out = "bench_report.json";
};

int cmd_bench(const BenchArgs& args) {
    psl::BenchConfig config;
    if (!args.config_path.empty()) {
        config = psl::BenchConfig::from_json(read_json_file(args.config_path));
    } else {
        config.scenario.scenario = psl::scenario_from_string(args.scenario);
        config.scenario.censoring_target = args.censoring;
        config.scenario.n = args.n;
        config.scenario.t_star = args.t_star;
        config.scenario.seed = args.seed;
        config.replicates = args.replicates;
        config.methods = split_list(args.methods);
        config.grid = parse_grid(args.grid);
        config.lambda = args.lambda;
        config.folds = args.folds;
        if (!args.pseudo_library_path.empty()) {
            config.pseudo_library = read_text_file(args.pseudo_library_path);
            psl::library_from_json(nlohmann::json::parse(config.pseudo_library));
        }
        if (!args.binary_library_path.empty()) {
            config.binary_library = read_text_file(args.binary_library_path);
            psl::library_from_json(nlohmann::json::parse(config.binary_library));
        }
    }
    config.threads = threads_override(args.threads);
    const std::string out = out_override(args.out);

    psl::BenchReport report = psl::run_bench(config);
    write_json(out, report.to_json());
    std::cout << report.to_markdown();
    std::cout << "wrote " << out << "\n";
    return 0;
}

struct ReportArgs {
    std::string input_path;
    std::string format = "markdown";
    std::string out;
};

int cmd_report(const ReportArgs& args) {
    const psl::BenchReport report = psl::BenchReport::from_json(read_json_file(args.input_path));
    std::string rendered;
    if (args.format == "csv")
        rendered = report.to_csv();
    else if (args.format == "markdown")
        rendered = report.to_markdown();
    else
        throw std::invalid_argument("format must be csv or markdown");
    const std::string out = out_override(args.out);
    if (out.empty()) {
        std::cout << rendered;
    } else {
        write_text(out, rendered);
        std::cout << "wrote " << out << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"pseudo-observation SuperLearner for competing-risks prediction"};
    app.require_subcommand(1);

    SimulateArgs sargs;
    CLI::App* sim = app.add_subcommand("simulate", "draw train/validation datasets with truth");
    sim->add_option("--config", sargs.config_path, "scenario config JSON (overrides flags)");
    sim->add_option("--scenario", sargs.scenario, "0, A, B, C, or D");
    sim->add_option("--censoring", sargs.censoring, "target censoring fraction, 0.2 or 0.5");
    sim->add_option("--n", sargs.n, "subjects per split");
    sim->add_option("--t-star", sargs.t_star, "prediction horizon");
    sim->add_option("--seed", sargs.seed, "master seed");
    sim->add_option("--out", sargs.out, "output directory");

    FitArgs fargs;
    CLI::App* fit = app.add_subcommand("fit", "fit a SuperLearner on a training CSV");
    fit->add_option("--train", fargs.train_path, "training CSV")->required();
    fit->add_option("--mode", fargs.mode, "pseudo, pseudo-single, or binary");
    fit->add_option("--grid", fargs.grid, "comma-separated pseudo-value time grid");
    fit->add_option("--t-star", fargs.t_star, "prediction horizon");
    fit->add_option("--library", fargs.library_path, "learner library JSON");
    fit->add_option("--folds", fargs.folds, "cross-validation folds");
    fit->add_option("--lambda", fargs.lambda, "weight tie-break penalty");
    fit->add_option("--seed", fargs.seed, "fit seed");
    fit->add_option("--threads", fargs.threads, "worker threads");
    fit->add_flag("--stratified", fargs.stratified, "stratified censoring weights (binary mode)");
    fit->add_option("--out", fargs.out, "model JSON path");

    EvaluateArgs eargs;
    CLI::App* ev = app.add_subcommand("evaluate", "score a model on a validation CSV");
    ev->add_option("--model", eargs.model_path, "model JSON")->required();
    ev->add_option("--data", eargs.data_path, "validation CSV")->required();
    ev->add_option("--truth", eargs.truth_path, "truth side-file CSV");
    ev->add_option("--out", eargs.out, "output directory");

    BenchArgs bargs;
    CLI::App* bench = app.add_subcommand("bench", "replicate study over simulated data");
    bench->add_option("--config", bargs.config_path, "bench config JSON (overrides flags)");
    bench->add_option("--scenario", bargs.scenario, "0, A, B, C, or D");
    bench->add_option("--censoring", bargs.censoring, "target censoring fraction");
    bench->add_option("--n", bargs.n, "subjects per split");
    bench->add_option("--replicates", bargs.replicates, "replicate count");
    bench->add_option("--methods", bargs.methods, "comma list of pseudo,pseudo.single,binary,true");
    bench->add_option("--grid", bargs.grid, "comma-separated time grid");
    bench->add_option("--t-star", bargs.t_star, "prediction horizon");
    bench->add_option("--lambda", bargs.lambda, "weight tie-break penalty");
    bench->add_option("--folds", bargs.folds, "cross-validation folds");
    bench->add_option("--seed", bargs.seed, "master seed");
    bench->add_option("--threads", bargs.threads, "replicate worker threads");
    bench->add_option("--pseudo-library", bargs.pseudo_library_path, "library JSON for pseudo methods");
    bench->add_option("--binary-library", bargs.binary_library_path, "library JSON for the binary method");
    bench->add_option("--out", bargs.out, "report JSON path");

    ReportArgs rargs;
    CLI::App* rep = app.add_subcommand("report", "render a bench report");
    rep->add_option("--input", rargs.input_path, "bench report JSON")->required();
    rep->add_option("--format", rargs.format, "csv or markdown");
    rep->add_option("--out", rargs.out, "output path (stdout when omitted)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim->parsed()) return cmd_simulate(sargs);
        if (fit->parsed()) return cmd_fit(fargs);
        if (ev->parsed()) return cmd_evaluate(eargs);
        if (bench->parsed()) return cmd_bench(bargs);
        if (rep->parsed()) return cmd_report(rargs);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
