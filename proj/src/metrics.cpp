#include "psl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace psl {

namespace {

std::size_t grid_slot(const PseudoMatrix& pseudo, double t) {
    for (std::size_t l = 0; l < pseudo.times.size(); ++l)
        if (pseudo.times[l] == t) return l;
    throw std::invalid_argument("time " + format_double(t) + " is not on the pseudo grid");
}

std::size_t cause1_slot(const PseudoMatrix& pseudo) {
    for (std::size_t j = 0; j < pseudo.causes.size(); ++j)
        if (pseudo.causes[j] == 1) return j;
    throw std::invalid_argument("pseudo matrix has no cause-1 values");
}

}  // namespace

RocCurve roc_pseudo(const PseudoMatrix& pseudo, const std::vector<double>& scores, double t) {
    const std::size_t n = pseudo.n;
    if (scores.size() != n) throw std::invalid_argument("score count differs from n");
    for (double s : scores)
        if (!std::isfinite(s)) throw std::invalid_argument("non-finite score");
    std::size_t l = grid_slot(pseudo, t);
    std::size_t j1 = cause1_slot(pseudo);

    double tp_total = 0.0, fp_total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        tp_total += pseudo.value(i, l, j1);
        fp_total += pseudo.surv(i, l);
    }
    if (tp_total == 0.0) throw std::invalid_argument("no incidence mass at the requested time");

    // accumulate from the largest score downward: cutoff = that score includes
    // strictly greater scores only
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    RocCurve roc;
    roc.time = t;
    double tp_sum = 0.0, fp_sum = 0.0;
    std::size_t i = 0;
    while (i < n) {
        double c = scores[order[i]];
        roc.points.push_back({c, fp_sum / fp_total, tp_sum / tp_total});
        while (i < n && scores[order[i]] == c) {
            tp_sum += pseudo.value(order[i], l, j1);
            fp_sum += pseudo.surv(order[i], l);
            ++i;
        }
    }
    roc.points.push_back({-std::numeric_limits<double>::infinity(), 1.0, 1.0});
    return roc;
}

double auc_pseudo(const RocCurve& roc) {
    std::vector<RocPoint> pts = roc.points;
    std::sort(pts.begin(), pts.end(), [](const RocPoint& a, const RocPoint& b) {
        return a.fp < b.fp || (a.fp == b.fp && a.tp < b.tp);
    });
    double area = 0.0;
    for (std::size_t k = 1; k < pts.size(); ++k)
        area += (pts[k].fp - pts[k - 1].fp) * (pts[k].tp + pts[k - 1].tp) / 2.0;
    return area;
}

double auc_true_binary(const std::vector<bool>& labels, const std::vector<double>& scores) {
    if (labels.size() != scores.size()) throw std::invalid_argument("label/score size mismatch");
    const std::size_t n = labels.size();
    std::size_t npos = 0;
    for (bool b : labels) npos += b ? 1 : 0;
    if (npos == 0 || npos == n) throw std::invalid_argument("labels are all one class");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    // rank-sum with midranks for ties
    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        double midrank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (std::size_t k = i; k < j; ++k)
            if (labels[order[k]]) rank_sum_pos += midrank;
        i = j;
    }
    double np = static_cast<double>(npos), nn = static_cast<double>(n - npos);
    return (rank_sum_pos - np * (np + 1) / 2.0) / (np * nn);
}

PredictivenessCurve predictiveness_curve(const PseudoMatrix& pseudo,
                                         const std::vector<double>& scores, double t,
                                         double span) {
    const std::size_t n = pseudo.n;
    if (scores.size() != n) throw std::invalid_argument("score count differs from n");
    if (n < 10) throw std::invalid_argument("decile binning needs n >= 10");
    if (!(span > 0.0)) throw std::invalid_argument("span must be positive");
    std::size_t l = grid_slot(pseudo, t);
    std::size_t j1 = cause1_slot(pseudo);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    PredictivenessCurve out;
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) total += pseudo.value(i, l, j1);
    out.marginal = total / static_cast<double>(n);

    for (std::size_t b = 0; b < 10; ++b) {
        std::size_t lo = b * n / 10, hi = (b + 1) * n / 10;
        double s = 0.0;
        for (std::size_t k = lo; k < hi; ++k) s += pseudo.value(order[k], l, j1);
        out.binned.push_back({(static_cast<double>(lo) + static_cast<double>(hi)) /
                                  (2.0 * static_cast<double>(n)),
                              s / static_cast<double>(hi - lo), hi - lo});
    }

    // tricube locally weighted running mean over percentile distance
    std::vector<double> pct(n), y(n);
    for (std::size_t k = 0; k < n; ++k) {
        pct[k] = (static_cast<double>(k) + 0.5) / static_cast<double>(n);
        y[k] = pseudo.value(order[k], l, j1);
    }
    for (int g = 0; g <= 100; ++g) {
        double at = static_cast<double>(g) / 100.0;
        double wsum = 0.0, wy = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            double d = std::abs(pct[k] - at) / span;
            if (d >= 1.0) continue;
            double w = std::pow(1.0 - d * d * d, 3);
            wsum += w;
            wy += w * y[k];
        }
        out.smoothed.push_back({at, wsum > 0.0 ? wy / wsum : out.marginal});
    }
    return out;
}

IpcwWeights ipcw_weights(const SurvivalDataset& dataset, double t_star, bool stratified) {
    dataset.validate();
    if (dataset.records.empty()) throw std::invalid_argument("empty dataset");
    if (!(t_star > 0.0)) throw std::invalid_argument("t_star must be positive");

    std::map<std::string, StepFunction> curves;
    StepFunction pooled;
    if (stratified) {
        std::map<std::string, SurvivalDataset> parts;
        for (const Record& r : dataset.records) {
            if (!r.stratum) throw std::invalid_argument("stratified weights need strata");
            auto& part = parts[*r.stratum];
            part.p = dataset.p;
            part.feature_names = dataset.feature_names;
            part.records.push_back(r);
        }
        for (auto& [label, part] : parts) curves[label] = censoring_km(part);
    } else {
        pooled = censoring_km(dataset);
    }

    IpcwWeights out;
    out.t_star = t_star;
    out.weights.resize(dataset.n());
    for (std::size_t i = 0; i < dataset.n(); ++i) {
        const Record& r = dataset.records[i];
        if (r.delta == 0 && r.y < t_star) {
            out.weights[i] = 0.0;
            continue;
        }
        const StepFunction& g = stratified ? curves.at(*r.stratum) : pooled;
        double gi = g.left_limit(std::min(r.y, t_star));
        if (gi <= 0.0)
            throw std::runtime_error("censoring survival is zero for subject " +
                                     std::to_string(i + 1));
        out.weights[i] = 1.0 / gi;
    }
    return out;
}

double nn_loglik(const std::vector<bool>& labels, const std::vector<double>& predictions,
                 const std::vector<double>& weights) {
    if (labels.size() != predictions.size() || labels.size() != weights.size())
        throw std::invalid_argument("nn_loglik: size mismatch");
    constexpr double eps = 1e-8;
    double wsum = 0.0, loss = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (weights[i] < 0.0) throw std::invalid_argument("negative weight");
        double p = std::clamp(predictions[i], eps, 1.0 - eps);
        loss -= weights[i] * (labels[i] ? std::log(p) : std::log(1.0 - p));
        wsum += weights[i];
    }
    if (wsum == 0.0) throw std::invalid_argument("all weights are zero");
    return loss / wsum;
}

std::string RocCurve::to_csv() const {
    std::ostringstream s;
    s << "cutoff,fp,tp\n";
    for (const RocPoint& p : points)
        s << format_double(p.cutoff) << ',' << format_double(p.fp) << ',' << format_double(p.tp)
          << '\n';
    return s.str();
}

std::string RocCurve::to_json() const {
    nlohmann::ordered_json j;
    j["schema_version"] = 1;
    j["time"] = time;
    auto& pts = j["points"] = nlohmann::ordered_json::array();
    for (const RocPoint& p : points) pts.push_back({{"cutoff", p.cutoff}, {"fp", p.fp}, {"tp", p.tp}});
    return j.dump();
}

std::string PredictivenessCurve::to_csv() const {
    std::ostringstream s;
    s << "kind,percentile,value,count\n";
    for (const Bin& b : binned)
        s << "binned," << format_double(b.percentile) << ',' << format_double(b.mean_pseudo) << ','
          << b.count << '\n';
    for (const GridPoint& g : smoothed)
        s << "smoothed," << format_double(g.percentile) << ',' << format_double(g.fitted) << ",\n";
    s << "marginal,," << format_double(marginal) << ",\n";
    return s.str();
}

std::string PredictivenessCurve::to_json() const {
    nlohmann::ordered_json j;
    j["schema_version"] = 1;
    j["marginal"] = marginal;
    auto& bins = j["binned"] = nlohmann::ordered_json::array();
    for (const Bin& b : binned)
        bins.push_back({{"percentile", b.percentile}, {"mean_pseudo", b.mean_pseudo},
                        {"count", b.count}});
    auto& sm = j["smoothed"] = nlohmann::ordered_json::array();
    for (const GridPoint& g : smoothed)
        sm.push_back({{"percentile", g.percentile}, {"fitted", g.fitted}});
    return j.dump();
}

}  // namespace psl
