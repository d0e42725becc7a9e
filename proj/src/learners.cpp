#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <Eigen/Dense>
#include <boost/math/distributions/students_t.hpp>

#include "psl/models.hpp"

namespace psl {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    double e = std::exp(z);
    return e / (1.0 + e);
}

double soft_threshold(double z, double t) {
    if (z > t) return z - t;
    if (z < -t) return z + t;
    return 0.0;
}

double column_variance(const Matrix& X, std::size_t j) {
    double m = 0.0;
    for (std::size_t i = 0; i < X.n; ++i) m += X(i, j);
    m /= static_cast<double>(X.n);
    double v = 0.0;
    for (std::size_t i = 0; i < X.n; ++i) {
        double d = X(i, j) - m;
        v += d * d;
    }
    return v / static_cast<double>(X.n);
}

// Centered and population-sd-scaled copy; zero-variance columns are reported
// and left as all zeros so penalized fits ignore them.
struct Standardized {
    Matrix xs;
    std::vector<double> mean, sd;
    std::vector<bool> constant;
};

Standardized standardize(const Matrix& X) {
    Standardized s;
    s.xs = Matrix(X.n, X.p);
    s.mean.assign(X.p, 0.0);
    s.sd.assign(X.p, 0.0);
    s.constant.assign(X.p, false);
    double n = static_cast<double>(X.n);
    for (std::size_t j = 0; j < X.p; ++j) {
        double m = 0.0;
        for (std::size_t i = 0; i < X.n; ++i) m += X(i, j);
        m /= n;
        double v = 0.0;
        for (std::size_t i = 0; i < X.n; ++i) {
            double d = X(i, j) - m;
            v += d * d;
        }
        v /= n;
        s.mean[j] = m;
        if (v <= 0.0) {
            s.constant[j] = true;
            s.sd[j] = 1.0;
            continue;
        }
        s.sd[j] = std::sqrt(v);
        for (std::size_t i = 0; i < X.n; ++i) s.xs(i, j) = (X(i, j) - m) / s.sd[j];
    }
    return s;
}

std::vector<double> log_spaced_path(double top, double ratio, std::size_t count) {
    std::vector<double> path(count);
    double step = std::log(ratio) / static_cast<double>(count - 1);
    for (std::size_t l = 0; l < count; ++l) path[l] = top * std::exp(step * static_cast<double>(l));
    return path;
}

// Contiguous blocks over a shuffled index vector; the first n%V folds take
// the extra element.
std::vector<std::vector<std::size_t>> internal_folds(std::size_t n, std::size_t v,
                                                     std::uint64_t seed, std::uint64_t salt) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(seed, salt);
    rng.shuffle(idx);
    std::vector<std::vector<std::size_t>> folds(v);
    std::size_t base = n / v, extra = n % v, at = 0;
    for (std::size_t f = 0; f < v; ++f) {
        std::size_t len = base + (f < extra ? 1 : 0);
        folds[f].assign(idx.begin() + static_cast<long>(at), idx.begin() + static_cast<long>(at + len));
        at += len;
    }
    return folds;
}

nlohmann::ordered_json trees_to_json(const std::vector<std::vector<TreeNode>>& trees) {
    nlohmann::ordered_json out = nlohmann::ordered_json::array();
    for (const auto& tree : trees) {
        nlohmann::ordered_json t = nlohmann::ordered_json::array();
        for (const auto& nd : tree)
            t.push_back({nd.feature, nd.threshold, nd.left, nd.right, nd.value});
        out.push_back(std::move(t));
    }
    return out;
}

std::vector<std::vector<TreeNode>> trees_from_json(const nlohmann::json& j) {
    std::vector<std::vector<TreeNode>> trees;
    for (const auto& t : j) {
        std::vector<TreeNode> tree;
        for (const auto& nd : t) {
            TreeNode node;
            node.feature = nd.at(0).get<int>();
            node.threshold = nd.at(1).get<double>();
            node.left = nd.at(2).get<int>();
            node.right = nd.at(3).get<int>();
            node.value = nd.at(4).get<double>();
            tree.push_back(node);
        }
        trees.push_back(std::move(tree));
    }
    return trees;
}

void fill_common(nlohmann::ordered_json& j, const Model& m, const char* type) {
    j["learner"] = m.learner_name;
    j["type"] = type;
    j["p"] = m.p_original;
    j["selected"] = m.selected;
}

void read_common(const nlohmann::json& j, Model& m) {
    m.learner_name = j.at("learner").get<std::string>();
    m.p_original = j.at("p").get<std::size_t>();
    m.selected = j.at("selected").get<std::vector<std::size_t>>();
}

}  // namespace

void Model::check_dims(const Matrix& X) const {
    if (X.p != p_original)
        throw std::invalid_argument("model '" + learner_name + "' expects " +
                                    std::to_string(p_original) + " columns, got " +
                                    std::to_string(X.p));
}

Matrix Model::subset(const Matrix& X) const {
    Matrix out(X.n, selected.size());
    for (std::size_t i = 0; i < X.n; ++i)
        for (std::size_t j = 0; j < selected.size(); ++j) out(i, j) = X(i, selected[j]);
    return out;
}

std::vector<double> MeanModel::predict(const Matrix& X) const {
    check_dims(X);
    return std::vector<double>(X.n, value);
}

nlohmann::ordered_json MeanModel::to_json() const {
    nlohmann::ordered_json j;
    fill_common(j, *this, "mean");
    j["value"] = value;
    return j;
}

std::vector<double> LinearModel::predict(const Matrix& X) const {
    check_dims(X);
    std::vector<double> out(X.n, intercept);
    for (std::size_t i = 0; i < X.n; ++i) {
        double s = intercept;
        for (std::size_t j = 0; j < selected.size(); ++j) s += beta[j] * X(i, selected[j]);
        out[i] = logistic ? sigmoid(s) : s;
    }
    return out;
}

nlohmann::ordered_json LinearModel::to_json() const {
    nlohmann::ordered_json j;
    fill_common(j, *this, "linear");
    j["intercept"] = intercept;
    j["beta"] = beta;
    j["logistic"] = logistic;
    j["ridge_fallback"] = ridge_fallback;
    return j;
}

std::vector<double> TreeModel::predict(const Matrix& X) const {
    check_dims(X);
    Matrix s = subset(X);
    std::vector<double> out(X.n);
    for (std::size_t i = 0; i < X.n; ++i) {
        double v = tree_eval(nodes, &s.a[i * s.p]);
        out[i] = clamp_prob ? std::clamp(v, 0.0, 1.0) : v;
    }
    return out;
}

nlohmann::ordered_json TreeModel::to_json() const {
    nlohmann::ordered_json j;
    fill_common(j, *this, "tree");
    j["clamp_prob"] = clamp_prob;
    j["trees"] = trees_to_json({nodes});
    return j;
}

std::vector<double> ForestModel::predict(const Matrix& X) const {
    check_dims(X);
    Matrix s = subset(X);
    std::vector<double> out(X.n, 0.0);
    for (std::size_t i = 0; i < X.n; ++i) {
        double acc = 0.0;
        for (const auto& tree : trees) acc += tree_eval(tree, &s.a[i * s.p]);
        double v = acc / static_cast<double>(trees.size());
        out[i] = clamp_prob ? std::clamp(v, 0.0, 1.0) : v;
    }
    return out;
}

nlohmann::ordered_json ForestModel::to_json() const {
    nlohmann::ordered_json j;
    fill_common(j, *this, "forest");
    j["clamp_prob"] = clamp_prob;
    j["trees"] = trees_to_json(trees);
    return j;
}

std::vector<double> BoostModel::predict(const Matrix& X) const {
    check_dims(X);
    Matrix s = subset(X);
    std::vector<double> out(X.n);
    for (std::size_t i = 0; i < X.n; ++i) {
        double f = base_score;
        for (const auto& tree : trees) f += learning_rate * tree_eval(tree, &s.a[i * s.p]);
        out[i] = logistic ? sigmoid(f) : f;
    }
    return out;
}

nlohmann::ordered_json BoostModel::to_json() const {
    nlohmann::ordered_json j;
    fill_common(j, *this, "boost");
    j["base_score"] = base_score;
    j["learning_rate"] = learning_rate;
    j["logistic"] = logistic;
    j["trees"] = trees_to_json(trees);
    return j;
}

std::vector<double> KnnModel::predict(const Matrix& X) const {
    check_dims(X);
    Matrix s = subset(X);
    std::size_t kk = std::min<std::size_t>(k, train_x.n);
    std::vector<double> out(X.n);
    std::vector<std::pair<double, std::size_t>> dist(train_x.n);
    for (std::size_t i = 0; i < X.n; ++i) {
        for (std::size_t r = 0; r < train_x.n; ++r) {
            double d2 = 0.0;
            for (std::size_t j = 0; j < s.p; ++j) {
                double d = s(i, j) - train_x(r, j);
                d2 += d * d;
            }
            dist[r] = {d2, r};
        }
        std::partial_sort(dist.begin(), dist.begin() + static_cast<long>(kk), dist.end());
        double acc = 0.0;
        for (std::size_t r = 0; r < kk; ++r) acc += train_y[dist[r].second];
        out[i] = acc / static_cast<double>(kk);
    }
    return out;
}

nlohmann::ordered_json KnnModel::to_json() const {
    nlohmann::ordered_json j;
    fill_common(j, *this, "knn");
    j["k"] = k;
    j["train_n"] = train_x.n;
    j["train_p"] = train_x.p;
    j["train_x"] = train_x.a;
    j["train_y"] = train_y;
    return j;
}

ModelPtr model_from_json(const nlohmann::json& j) {
    const std::string type = j.at("type").get<std::string>();
    if (type == "mean") {
        auto m = std::make_shared<MeanModel>();
        read_common(j, *m);
        m->value = j.at("value").get<double>();
        return m;
    }
    if (type == "linear") {
        auto m = std::make_shared<LinearModel>();
        read_common(j, *m);
        m->intercept = j.at("intercept").get<double>();
        m->beta = j.at("beta").get<std::vector<double>>();
        m->logistic = j.at("logistic").get<bool>();
        m->ridge_fallback = j.at("ridge_fallback").get<bool>();
        return m;
    }
    if (type == "tree") {
        auto m = std::make_shared<TreeModel>();
        read_common(j, *m);
        m->clamp_prob = j.at("clamp_prob").get<bool>();
        m->nodes = trees_from_json(j.at("trees"))[0];
        return m;
    }
    if (type == "forest") {
        auto m = std::make_shared<ForestModel>();
        read_common(j, *m);
        m->clamp_prob = j.at("clamp_prob").get<bool>();
        m->trees = trees_from_json(j.at("trees"));
        return m;
    }
    if (type == "boost") {
        auto m = std::make_shared<BoostModel>();
        read_common(j, *m);
        m->base_score = j.at("base_score").get<double>();
        m->learning_rate = j.at("learning_rate").get<double>();
        m->logistic = j.at("logistic").get<bool>();
        m->trees = trees_from_json(j.at("trees"));
        return m;
    }
    if (type == "knn") {
        auto m = std::make_shared<KnnModel>();
        read_common(j, *m);
        m->k = j.at("k").get<std::size_t>();
        m->train_x = Matrix(j.at("train_n").get<std::size_t>(), j.at("train_p").get<std::size_t>());
        m->train_x.a = j.at("train_x").get<std::vector<double>>();
        m->train_y = j.at("train_y").get<std::vector<double>>();
        return m;
    }
    throw std::invalid_argument("unknown model type '" + type + "'");
}

std::vector<std::size_t> correlation_screen(const Matrix& X, const std::vector<double>& y,
                                            double p_threshold) {
    std::size_t n = X.n;
    double ym = mean(y);
    double syy = 0.0;
    for (double v : y) syy += (v - ym) * (v - ym);
    std::vector<double> pvals(X.p, 1.0);
    if (n > 2 && syy > 0.0) {
        boost::math::students_t dist(static_cast<double>(n - 2));
        for (std::size_t j = 0; j < X.p; ++j) {
            double xm = 0.0;
            for (std::size_t i = 0; i < n; ++i) xm += X(i, j);
            xm /= static_cast<double>(n);
            double sxx = 0.0, sxy = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                double dx = X(i, j) - xm;
                sxx += dx * dx;
                sxy += dx * (y[i] - ym);
            }
            if (sxx <= 0.0) continue;
            double r = sxy / std::sqrt(sxx * syy);
            r = std::clamp(r, -1.0, 1.0);
            double denom = 1.0 - r * r;
            if (denom <= 0.0) {
                pvals[j] = 0.0;
                continue;
            }
            double t = r * std::sqrt(static_cast<double>(n - 2) / denom);
            pvals[j] = 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(t)));
        }
    }
    std::vector<std::size_t> keep;
    for (std::size_t j = 0; j < X.p; ++j)
        if (pvals[j] < p_threshold) keep.push_back(j);
    if (keep.empty()) {
        std::size_t best = 0;
        for (std::size_t j = 1; j < X.p; ++j)
            if (pvals[j] < pvals[best]) best = j;
        keep.push_back(best);
    }
    return keep;
}

LassoFit lasso_fixed(const Matrix& X, const std::vector<double>& y, double lambda) {
    std::size_t n = X.n, p = X.p;
    double nn = static_cast<double>(n);
    std::vector<double> xm(p, 0.0);
    double ym = mean(y);
    for (std::size_t j = 0; j < p; ++j) {
        for (std::size_t i = 0; i < n; ++i) xm[j] += X(i, j);
        xm[j] /= nn;
    }
    // Gram and cross moments of the centered columns
    std::vector<double> Q(p * p, 0.0), q(p, 0.0);
    for (std::size_t j = 0; j < p; ++j) {
        for (std::size_t k = j; k < p; ++k) {
            double s = 0.0;
            for (std::size_t i = 0; i < n; ++i) s += (X(i, j) - xm[j]) * (X(i, k) - xm[k]);
            Q[j * p + k] = Q[k * p + j] = s / nn;
        }
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += (X(i, j) - xm[j]) * (y[i] - ym);
        q[j] = s / nn;
    }
    std::vector<double> beta(p, 0.0);
    for (int sweep = 0; sweep < 100000; ++sweep) {
        double delta = 0.0;
        for (std::size_t j = 0; j < p; ++j) {
            if (Q[j * p + j] <= 1e-12) continue;
            double resid = q[j];
            for (std::size_t k = 0; k < p; ++k)
                if (k != j) resid -= Q[j * p + k] * beta[k];
            double next = soft_threshold(resid, lambda) / Q[j * p + j];
            delta = std::max(delta, std::fabs(next - beta[j]));
            beta[j] = next;
        }
        if (delta < 1e-12) break;
    }
    LassoFit fit;
    fit.beta = beta;
    fit.intercept = ym;
    for (std::size_t j = 0; j < p; ++j) fit.intercept -= beta[j] * xm[j];
    return fit;
}

namespace {

// ---- linear family -------------------------------------------------------

std::vector<std::size_t> drop_constant(const Matrix& X) {
    std::vector<std::size_t> keep;
    for (std::size_t j = 0; j < X.p; ++j)
        if (column_variance(X, j) > 0.0) keep.push_back(j);
    return keep;
}

Matrix take_columns(const Matrix& X, const std::vector<std::size_t>& cols) {
    Matrix out(X.n, cols.size());
    for (std::size_t i = 0; i < X.n; ++i)
        for (std::size_t j = 0; j < cols.size(); ++j) out(i, j) = X(i, cols[j]);
    return out;
}

std::shared_ptr<LinearModel> fit_ols(const Matrix& X, const std::vector<double>& y) {
    auto m = std::make_shared<LinearModel>();
    std::vector<std::size_t> keep = drop_constant(X);
    Matrix Z = take_columns(X, keep);
    std::size_t n = Z.n, p = Z.p;
    Eigen::MatrixXd D(n, p + 1);
    D.col(0).setOnes();
    for (std::size_t j = 0; j < p; ++j)
        for (std::size_t i = 0; i < n; ++i) D(static_cast<long>(i), static_cast<long>(j + 1)) = Z(i, j);
    Eigen::Map<const Eigen::VectorXd> yv(y.data(), static_cast<long>(n));
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(D);
    Eigen::VectorXd sol = qr.solve(yv);
    bool bad = qr.rank() < static_cast<long>(p + 1) || !sol.allFinite();
    if (bad) {
        Eigen::MatrixXd G = D.transpose() * D;
        G.diagonal().array() += 1e-8;
        sol = G.ldlt().solve(D.transpose() * yv);
        m->ridge_fallback = true;
    }
    m->intercept = sol(0);
    m->beta.resize(p);
    for (std::size_t j = 0; j < p; ++j) m->beta[j] = sol(static_cast<long>(j + 1));
    m->selected = keep;
    return m;
}

std::shared_ptr<LinearModel> fit_stepwise(const Matrix& X, const std::vector<double>& y) {
    std::vector<std::size_t> usable = drop_constant(X);
    Matrix Z = take_columns(X, usable);
    std::size_t n = Z.n, p = Z.p;
    Eigen::MatrixXd D(n, p + 1);
    D.col(0).setOnes();
    for (std::size_t j = 0; j < p; ++j)
        for (std::size_t i = 0; i < n; ++i) D(static_cast<long>(i), static_cast<long>(j + 1)) = Z(i, j);
    Eigen::Map<const Eigen::VectorXd> yv(y.data(), static_cast<long>(n));
    Eigen::MatrixXd G = D.transpose() * D;
    Eigen::VectorXd c = D.transpose() * yv;
    double yty = yv.squaredNorm();
    double nn = static_cast<double>(n);

    auto rss_of = [&](const std::vector<std::size_t>& set, Eigen::VectorXd* coef) {
        long k = static_cast<long>(set.size());
        Eigen::MatrixXd Gs(k, k);
        Eigen::VectorXd cs(k);
        for (long a = 0; a < k; ++a) {
            cs(a) = c(static_cast<long>(set[static_cast<std::size_t>(a)]));
            for (long b = 0; b < k; ++b)
                Gs(a, b) = G(static_cast<long>(set[static_cast<std::size_t>(a)]),
                             static_cast<long>(set[static_cast<std::size_t>(b)]));
        }
        Eigen::VectorXd sol = Gs.ldlt().solve(cs);
        if (!sol.allFinite() || (Gs * sol - cs).cwiseAbs().maxCoeff() > 1e-6 * (1.0 + cs.cwiseAbs().maxCoeff()))
            return std::numeric_limits<double>::infinity();
        if (coef) *coef = sol;
        return std::max(0.0, yty - cs.dot(sol));
    };
    auto aic_of = [&](double rss, std::size_t k) {
        return nn * std::log(std::max(rss, 1e-300) / nn) + 2.0 * static_cast<double>(k);
    };

    std::vector<std::size_t> current{0};  // design-column indices, 0 = intercept
    double current_aic = aic_of(rss_of(current, nullptr), 1);
    for (;;) {
        double best_aic = current_aic;
        std::vector<std::size_t> best_set;
        for (std::size_t j = 1; j <= p; ++j) {  // additions, then removals
            if (std::find(current.begin(), current.end(), j) != current.end()) continue;
            std::vector<std::size_t> trial = current;
            trial.push_back(j);
            std::sort(trial.begin(), trial.end());
            double a = aic_of(rss_of(trial, nullptr), trial.size());
            if (a < best_aic - 1e-10) {
                best_aic = a;
                best_set = trial;
            }
        }
        for (std::size_t j : current) {
            if (j == 0) continue;
            std::vector<std::size_t> trial;
            for (std::size_t t : current)
                if (t != j) trial.push_back(t);
            double a = aic_of(rss_of(trial, nullptr), trial.size());
            if (a < best_aic - 1e-10) {
                best_aic = a;
                best_set = trial;
            }
        }
        if (best_set.empty()) break;
        current = std::move(best_set);
        current_aic = best_aic;
    }

    Eigen::VectorXd coef;
    rss_of(current, &coef);
    auto m = std::make_shared<LinearModel>();
    m->intercept = coef(0);
    for (std::size_t a = 1; a < current.size(); ++a) {
        m->selected.push_back(usable[current[a] - 1]);
        m->beta.push_back(coef(static_cast<long>(a)));
    }
    return m;
}

std::shared_ptr<LinearModel> finish_standardized(const Standardized& s,
                                                 const std::vector<double>& beta_s,
                                                 double intercept_s, bool logistic) {
    auto m = std::make_shared<LinearModel>();
    m->logistic = logistic;
    double adj = intercept_s;
    for (std::size_t j = 0; j < s.xs.p; ++j) {
        if (s.constant[j]) continue;
        double b = beta_s[j] / s.sd[j];
        m->selected.push_back(j);
        m->beta.push_back(b);
        adj -= b * s.mean[j];
    }
    m->intercept = adj;
    return m;
}

// Ridge on standardized columns, tuning lambda by 5-fold CV over a log path;
// ties go to the larger lambda.
std::shared_ptr<LinearModel> fit_ridge_cv(const Matrix& X, const std::vector<double>& y,
                                          std::uint64_t seed) {
    Standardized s = standardize(X);
    std::size_t n = X.n, p = X.p;
    double ym = mean(y);
    std::vector<double> yc(n);
    for (std::size_t i = 0; i < n; ++i) yc[i] = y[i] - ym;

    double top = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
        double dot = 0.0;
        for (std::size_t i = 0; i < n; ++i) dot += s.xs(i, j) * yc[i];
        top = std::max(top, std::fabs(dot) / static_cast<double>(n));
    }
    if (top <= 0.0) {
        auto m = std::make_shared<LinearModel>();
        m->intercept = ym;
        return m;
    }
    std::vector<double> path = log_spaced_path(top * 1e3, 1e-7, 100);

    Eigen::Map<const RowMat> Xs(s.xs.a.data(), static_cast<long>(n), static_cast<long>(p));
    auto folds = internal_folds(n, 5, seed, 0x52d6u);
    std::vector<double> cv(path.size(), 0.0);
    for (const auto& holdout : folds) {
        std::vector<char> held(n, 0);
        for (std::size_t i : holdout) held[i] = 1;
        std::vector<std::size_t> train;
        for (std::size_t i = 0; i < n; ++i)
            if (!held[i]) train.push_back(i);
        long nt = static_cast<long>(train.size());
        Eigen::MatrixXd Xt(nt, static_cast<long>(p));
        Eigen::VectorXd yt(nt);
        double ytm = 0.0;
        for (long a = 0; a < nt; ++a) ytm += y[train[static_cast<std::size_t>(a)]];
        ytm /= static_cast<double>(nt);
        for (long a = 0; a < nt; ++a) {
            std::size_t i = train[static_cast<std::size_t>(a)];
            yt(a) = y[i] - ytm;
            for (std::size_t j = 0; j < p; ++j) Xt(a, static_cast<long>(j)) = s.xs(i, j);
        }
        Eigen::MatrixXd G = Xt.transpose() * Xt;
        Eigen::VectorXd ct = Xt.transpose() * yt;
        for (std::size_t l = 0; l < path.size(); ++l) {
            Eigen::MatrixXd Gl = G;
            Gl.diagonal().array() += static_cast<double>(nt) * path[l];
            Eigen::VectorXd beta = Gl.ldlt().solve(ct);
            double err = 0.0;
            for (std::size_t i : holdout) {
                double pred = ytm;
                for (std::size_t j = 0; j < p; ++j) pred += beta(static_cast<long>(j)) * s.xs(i, j);
                double d = y[i] - pred;
                err += d * d;
            }
            cv[l] += err;
        }
    }
    std::size_t best = 0;
    for (std::size_t l = 1; l < path.size(); ++l)
        if (cv[l] < cv[best]) best = l;

    Eigen::MatrixXd G = Xs.transpose() * Xs;
    G.diagonal().array() += static_cast<double>(n) * path[best];
    Eigen::VectorXd cfull(static_cast<long>(p));
    for (std::size_t j = 0; j < p; ++j) {
        double dot = 0.0;
        for (std::size_t i = 0; i < n; ++i) dot += s.xs(i, j) * yc[i];
        cfull(static_cast<long>(j)) = dot;
    }
    Eigen::VectorXd beta = G.ldlt().solve(cfull);
    std::vector<double> bs(p);
    for (std::size_t j = 0; j < p; ++j) bs[j] = beta(static_cast<long>(j));
    return finish_standardized(s, bs, ym, false);
}

// Coordinate descent over the Gram matrix for one lambda; beta is warm-started.
void cd_gaussian(const std::vector<double>& Q, const std::vector<double>& q, std::size_t p,
                 double lambda, std::vector<double>& beta) {
    for (int sweep = 0; sweep < 100000; ++sweep) {
        double delta = 0.0;
        for (std::size_t j = 0; j < p; ++j) {
            double qjj = Q[j * p + j];
            if (qjj <= 1e-12) {
                beta[j] = 0.0;
                continue;
            }
            double resid = q[j];
            for (std::size_t k = 0; k < p; ++k)
                if (k != j) resid -= Q[j * p + k] * beta[k];
            double next = soft_threshold(resid, lambda) / qjj;
            delta = std::max(delta, std::fabs(next - beta[j]));
            beta[j] = next;
        }
        if (delta < 1e-11) break;
    }
}

std::shared_ptr<LinearModel> fit_lasso_cv(const Matrix& X, const std::vector<double>& y,
                                          std::uint64_t seed) {
    Standardized s = standardize(X);
    std::size_t n = X.n, p = X.p;
    double nn = static_cast<double>(n);
    double ym = mean(y);
    std::vector<double> yc(n);
    for (std::size_t i = 0; i < n; ++i) yc[i] = y[i] - ym;

    auto gram = [&](const std::vector<std::size_t>& rows, std::vector<double>& Q,
                    std::vector<double>& q, double* y_mean) {
        double m = static_cast<double>(rows.size());
        double loc = 0.0;
        for (std::size_t i : rows) loc += y[i];
        loc /= m;
        *y_mean = loc;
        Q.assign(p * p, 0.0);
        q.assign(p, 0.0);
        for (std::size_t j = 0; j < p; ++j) {
            for (std::size_t k = j; k < p; ++k) {
                double acc = 0.0;
                for (std::size_t i : rows) acc += s.xs(i, j) * s.xs(i, k);
                Q[j * p + k] = Q[k * p + j] = acc / m;
            }
            double acc = 0.0;
            for (std::size_t i : rows) acc += s.xs(i, j) * (y[i] - loc);
            q[j] = acc / m;
        }
    };

    double top = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
        double dot = 0.0;
        for (std::size_t i = 0; i < n; ++i) dot += s.xs(i, j) * yc[i];
        top = std::max(top, std::fabs(dot) / nn);
    }
    if (top <= 0.0) {
        auto m = std::make_shared<LinearModel>();
        m->intercept = ym;
        return m;
    }
    std::vector<double> path = log_spaced_path(top, 1e-4, 100);

    auto folds = internal_folds(n, 5, seed, 0x1a550u);
    std::vector<double> cv(path.size(), 0.0);
    for (const auto& holdout : folds) {
        std::vector<char> held(n, 0);
        for (std::size_t i : holdout) held[i] = 1;
        std::vector<std::size_t> train;
        for (std::size_t i = 0; i < n; ++i)
            if (!held[i]) train.push_back(i);
        std::vector<double> Q, q;
        double ytm = 0.0;
        gram(train, Q, q, &ytm);
        std::vector<double> beta(p, 0.0);
        for (std::size_t l = 0; l < path.size(); ++l) {
            cd_gaussian(Q, q, p, path[l], beta);
            double err = 0.0;
            for (std::size_t i : holdout) {
                double pred = ytm;
                for (std::size_t j = 0; j < p; ++j) pred += beta[j] * s.xs(i, j);
                double d = y[i] - pred;
                err += d * d;
            }
            cv[l] += err;
        }
    }
    std::size_t best = 0;
    for (std::size_t l = 1; l < path.size(); ++l)
        if (cv[l] < cv[best]) best = l;

    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), 0);
    std::vector<double> Q, q;
    double full_m = 0.0;
    gram(all, Q, q, &full_m);
    std::vector<double> beta(p, 0.0);
    for (std::size_t l = 0; l <= best; ++l) cd_gaussian(Q, q, p, path[l], beta);
    return finish_standardized(s, beta, full_m, false);
}

// ---- binary family -------------------------------------------------------

std::shared_ptr<LinearModel> fit_logistic(const Matrix& X, const std::vector<double>& y,
                                          const std::vector<double>& w) {
    std::vector<std::size_t> keep = drop_constant(X);
    Matrix Z = take_columns(X, keep);
    std::size_t n = Z.n, p = Z.p;
    Eigen::MatrixXd D(n, p + 1);
    D.col(0).setOnes();
    for (std::size_t j = 0; j < p; ++j)
        for (std::size_t i = 0; i < n; ++i) D(static_cast<long>(i), static_cast<long>(j + 1)) = Z(i, j);
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(static_cast<long>(p + 1));
    for (int iter = 0; iter < 100; ++iter) {
        Eigen::VectorXd eta = D * beta;
        Eigen::VectorXd grad = Eigen::VectorXd::Zero(static_cast<long>(p + 1));
        Eigen::MatrixXd H = Eigen::MatrixXd::Zero(static_cast<long>(p + 1), static_cast<long>(p + 1));
        for (std::size_t i = 0; i < n; ++i) {
            double pi = sigmoid(std::clamp(eta(static_cast<long>(i)), -30.0, 30.0));
            double wi = w[i];
            grad += wi * (y[i] - pi) * D.row(static_cast<long>(i)).transpose();
            H += wi * std::max(pi * (1.0 - pi), 1e-12) * D.row(static_cast<long>(i)).transpose() *
                 D.row(static_cast<long>(i));
        }
        grad -= 1e-8 * beta;
        H.diagonal().array() += 1e-8;
        Eigen::VectorXd step = H.ldlt().solve(grad);
        beta += step;
        if (step.cwiseAbs().maxCoeff() < 1e-10) break;
    }
    auto m = std::make_shared<LinearModel>();
    m->logistic = true;
    m->intercept = beta(0);
    m->selected = keep;
    m->beta.resize(p);
    for (std::size_t j = 0; j < p; ++j) m->beta[j] = beta(static_cast<long>(j + 1));
    return m;
}

// Penalized weighted logistic regression: IRLS outer loop with a lasso
// coordinate-descent inner step, lambda tuned by 5-fold CV on weighted
// deviance. Warm starts along a descending path.
std::shared_ptr<LinearModel> fit_lasso_logistic_cv(const Matrix& X, const std::vector<double>& y,
                                                   const std::vector<double>& w,
                                                   std::uint64_t seed) {
    Standardized s = standardize(X);
    std::size_t n = X.n, p = X.p;
    double wsum = 0.0, wy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        wsum += w[i];
        wy += w[i] * y[i];
    }
    if (wsum <= 0.0) throw std::invalid_argument("lasso_logistic: all weights are zero");
    double p0 = std::clamp(wy / wsum, 1e-8, 1.0 - 1e-8);

    double top = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
        double dot = 0.0;
        for (std::size_t i = 0; i < n; ++i) dot += s.xs(i, j) * w[i] * (y[i] - p0);
        top = std::max(top, std::fabs(dot) / static_cast<double>(n));
    }
    if (top <= 0.0) {
        auto m = std::make_shared<LinearModel>();
        m->logistic = true;
        m->intercept = std::log(p0 / (1.0 - p0));
        return m;
    }
    std::vector<double> path = log_spaced_path(top, 1e-4, 100);

    // one IRLS+CD fit at fixed lambda, warm-started on (intercept, beta);
    // the inner loop tracks working residuals so a sweep is O(n p)
    auto fit_at = [&](const std::vector<std::size_t>& rows, double lambda, double& b0,
                      std::vector<double>& beta) {
        double m = static_cast<double>(rows.size());
        std::vector<double> omega(rows.size()), resid(rows.size()), den(p);
        for (int outer = 0; outer < 50; ++outer) {
            double osum = 0.0;
            for (std::size_t a = 0; a < rows.size(); ++a) {
                std::size_t i = rows[a];
                double eta = b0;
                for (std::size_t j = 0; j < p; ++j) eta += beta[j] * s.xs(i, j);
                double pi = std::clamp(sigmoid(eta), 1e-5, 1.0 - 1e-5);
                double v = pi * (1.0 - pi);
                omega[a] = w[i] * v;
                osum += omega[a];
                resid[a] = (y[i] - pi) / v;  // z - eta
            }
            for (std::size_t j = 0; j < p; ++j) {
                double d = 0.0;
                for (std::size_t a = 0; a < rows.size(); ++a)
                    d += omega[a] * s.xs(rows[a], j) * s.xs(rows[a], j);
                den[j] = d;
            }
            double change = 0.0;
            for (int sweep = 0; sweep < 1000; ++sweep) {
                double delta = 0.0;
                if (osum > 0.0) {
                    double oz = 0.0;
                    for (std::size_t a = 0; a < rows.size(); ++a) oz += omega[a] * resid[a];
                    double shift = oz / osum;
                    b0 += shift;
                    for (double& r : resid) r -= shift;
                    delta = std::max(delta, std::fabs(shift));
                }
                for (std::size_t j = 0; j < p; ++j) {
                    if (den[j] <= 1e-12) {
                        beta[j] = 0.0;
                        continue;
                    }
                    double num = 0.0;
                    for (std::size_t a = 0; a < rows.size(); ++a)
                        num += omega[a] * s.xs(rows[a], j) * resid[a];
                    double next = soft_threshold(num / m + (den[j] / m) * beta[j], lambda) /
                                  (den[j] / m);
                    double diff = next - beta[j];
                    if (diff != 0.0) {
                        for (std::size_t a = 0; a < rows.size(); ++a)
                            resid[a] -= diff * s.xs(rows[a], j);
                        beta[j] = next;
                    }
                    delta = std::max(delta, std::fabs(diff));
                }
                change = delta;
                if (delta < 1e-9) break;
            }
            if (change < 1e-9) break;
        }
    };

    auto deviance = [&](const std::vector<std::size_t>& rows, double b0,
                        const std::vector<double>& beta) {
        double acc = 0.0, wacc = 0.0;
        for (std::size_t i : rows) {
            double eta = b0;
            for (std::size_t j = 0; j < p; ++j) eta += beta[j] * s.xs(i, j);
            double pi = std::clamp(sigmoid(eta), 1e-8, 1.0 - 1e-8);
            acc -= w[i] * (y[i] * std::log(pi) + (1.0 - y[i]) * std::log(1.0 - pi));
            wacc += w[i];
        }
        return wacc > 0.0 ? acc / wacc : 0.0;
    };

    auto folds = internal_folds(n, 5, seed, 0x11b10u);
    std::vector<double> cv(path.size(), 0.0);
    for (const auto& holdout : folds) {
        std::vector<char> held(n, 0);
        for (std::size_t i : holdout) held[i] = 1;
        std::vector<std::size_t> train;
        for (std::size_t i = 0; i < n; ++i)
            if (!held[i]) train.push_back(i);
        double b0 = std::log(p0 / (1.0 - p0));
        std::vector<double> beta(p, 0.0);
        for (std::size_t l = 0; l < path.size(); ++l) {
            fit_at(train, path[l], b0, beta);
            cv[l] += deviance(holdout, b0, beta);
        }
    }
    std::size_t best = 0;
    for (std::size_t l = 1; l < path.size(); ++l)
        if (cv[l] < cv[best]) best = l;

    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), 0);
    double b0 = std::log(p0 / (1.0 - p0));
    std::vector<double> beta(p, 0.0);
    for (std::size_t l = 0; l <= best; ++l) fit_at(all, path[l], b0, beta);
    return finish_standardized(s, beta, b0, true);
}

// ---- trees and neighbors -------------------------------------------------

std::shared_ptr<TreeModel> fit_cart(const Matrix& X, const std::vector<double>& y,
                                    const std::vector<double>* w) {
    auto m = std::make_shared<TreeModel>();
    m->selected.resize(X.p);
    std::iota(m->selected.begin(), m->selected.end(), 0);
    std::vector<std::size_t> rows(X.n);
    std::iota(rows.begin(), rows.end(), 0);
    TreeConfig cfg;
    if (w) {
        m->nodes = grow_gini_tree(X, y, *w, rows, cfg, nullptr);
        m->clamp_prob = true;
    } else {
        m->nodes = grow_regression_tree(X, y, rows, cfg, nullptr);
    }
    return m;
}

std::shared_ptr<ForestModel> fit_rf(const Matrix& X, const std::vector<double>& y,
                                    const std::vector<double>* w, std::size_t ntrees,
                                    std::size_t mtry, std::uint64_t seed) {
    auto m = std::make_shared<ForestModel>();
    m->selected.resize(X.p);
    std::iota(m->selected.begin(), m->selected.end(), 0);
    m->clamp_prob = w != nullptr;
    if (mtry == 0)
        mtry = w ? std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(X.p))))
                 : std::max<std::size_t>(1, X.p / 3);
    TreeConfig cfg;
    cfg.mtry = mtry;
    Rng root(seed, 0xf03e57u);
    m->trees.reserve(ntrees);
    for (std::size_t t = 0; t < ntrees; ++t) {
        Rng rng = root.derive(t);
        std::vector<std::size_t> rows(X.n);
        for (std::size_t i = 0; i < X.n; ++i) rows[i] = rng.below(X.n);
        if (w)
            m->trees.push_back(grow_gini_tree(X, y, *w, rows, cfg, &rng));
        else
            m->trees.push_back(grow_regression_tree(X, y, rows, cfg, &rng));
    }
    return m;
}

std::shared_ptr<BoostModel> fit_xgb(const Matrix& X, const std::vector<double>& y,
                                    const std::vector<double>* w, std::size_t rounds,
                                    std::size_t depth, double lr, double reg_lambda,
                                    double min_child_weight) {
    auto m = std::make_shared<BoostModel>();
    m->selected.resize(X.p);
    std::iota(m->selected.begin(), m->selected.end(), 0);
    m->learning_rate = lr;
    m->logistic = w != nullptr;
    m->base_score = m->logistic ? 0.0 : mean(y);

    std::size_t n = X.n;
    auto presorted = presort_features(X);
    std::vector<double> f(n, m->base_score), g(n), h(n);
    m->trees.reserve(rounds);
    for (std::size_t r = 0; r < rounds; ++r) {
        for (std::size_t i = 0; i < n; ++i) {
            if (m->logistic) {
                double pi = sigmoid(f[i]);
                g[i] = (*w)[i] * (pi - y[i]);
                h[i] = std::max((*w)[i] * pi * (1.0 - pi), 1e-16);
            } else {
                g[i] = f[i] - y[i];
                h[i] = 1.0;
            }
        }
        auto tree = grow_grad_tree(X, g, h, depth, reg_lambda, min_child_weight, presorted);
        for (std::size_t i = 0; i < n; ++i) f[i] += lr * tree_eval(tree, &X.a[i * X.p]);
        m->trees.push_back(std::move(tree));
    }
    return m;
}

std::shared_ptr<KnnModel> fit_knn(const Matrix& X, const std::vector<double>& y, std::size_t k) {
    auto m = std::make_shared<KnnModel>();
    m->selected.resize(X.p);
    std::iota(m->selected.begin(), m->selected.end(), 0);
    m->k = k;
    m->train_x = X;
    m->train_y = y;
    return m;
}

// ---- dispatch ------------------------------------------------------------

std::string family_of(const std::string& name) {
    auto starts = [&](const char* pfx) { return name.rfind(pfx, 0) == 0; };
    if (starts("ols")) return "ols";
    if (starts("stepwise")) return "stepwise";
    if (starts("ridge")) return "ridge";
    if (starts("lasso_logistic")) return "lasso_logistic";
    if (starts("lasso")) return "lasso";
    if (starts("logistic")) return "logistic";
    if (starts("cart")) return "cart";
    if (starts("rf")) return "rf";
    if (starts("knn")) return "knn";
    if (starts("xgb")) return "xgb";
    if (starts("mean")) return "mean";
    throw std::invalid_argument("unknown learner '" + name + "'");
}

double hyper_or(const Learner& l, const std::string& key, double fallback) {
    auto it = l.hyper.find(key);
    return it == l.hyper.end() ? fallback : it->second;
}

// xgb_<rounds>_<depth>_<lr>
void parse_xgb_name(const std::string& name, std::size_t& rounds, std::size_t& depth, double& lr) {
    std::vector<std::string> parts;
    std::size_t at = 0;
    while (at <= name.size()) {
        std::size_t next = name.find('_', at);
        if (next == std::string::npos) next = name.size();
        parts.push_back(name.substr(at, next - at));
        at = next + 1;
    }
    if (parts.size() != 4) return;
    try {
        rounds = static_cast<std::size_t>(std::stoul(parts[1]));
        depth = static_cast<std::size_t>(std::stoul(parts[2]));
        lr = parse_double(parts[3]);
    } catch (const std::exception&) {
        throw std::invalid_argument("cannot parse boosting settings from '" + name + "'");
    }
}

}  // namespace

ModelPtr fit(const Learner& learner, const Matrix& X, const std::vector<double>& y,
             const std::vector<double>* weights, std::uint64_t seed) {
    if (X.n == 0 || X.p == 0) throw std::invalid_argument("fit: empty design matrix");
    if (y.size() != X.n) throw std::invalid_argument("fit: y length does not match rows");
    if (weights && weights->size() != X.n)
        throw std::invalid_argument("fit: weight length does not match rows");

    bool binary = false;
    switch (learner.kind) {
        case LearnerKind::regression:
            if (weights)
                throw std::invalid_argument("learner '" + learner.name +
                                            "' does not accept observation weights");
            break;
        case LearnerKind::weighted_binary:
            binary = true;
            break;
        case LearnerKind::both:
            binary = weights != nullptr;
            break;
    }
    if (binary) {
        for (double v : y)
            if (v != 0.0 && v != 1.0)
                throw std::invalid_argument("learner '" + learner.name +
                                            "' needs a 0/1 response when weighted");
    }
    std::vector<double> unit;
    const std::vector<double>* w = weights;
    if (binary && !w) {
        unit.assign(X.n, 1.0);
        w = &unit;
    }

    std::vector<std::size_t> screened;
    const Matrix* design = &X;
    Matrix reduced;
    if (learner.screen) {
        screened = correlation_screen(X, y, learner.screen_p);
        reduced = take_columns(X, screened);
        design = &reduced;
    }

    const std::string family = family_of(learner.name);
    std::shared_ptr<Model> model;
    if (family == "mean") {
        auto m = std::make_shared<MeanModel>();
        if (w) {
            double ws = 0.0, acc = 0.0;
            for (std::size_t i = 0; i < X.n; ++i) {
                ws += (*w)[i];
                acc += (*w)[i] * y[i];
            }
            m->value = ws > 0.0 ? acc / ws : mean(y);
        } else {
            m->value = mean(y);
        }
        model = m;
    } else if (family == "ols") {
        model = fit_ols(*design, y);
    } else if (family == "stepwise") {
        model = fit_stepwise(*design, y);
    } else if (family == "ridge") {
        model = fit_ridge_cv(*design, y, seed);
    } else if (family == "lasso") {
        model = fit_lasso_cv(*design, y, seed);
    } else if (family == "logistic") {
        model = fit_logistic(*design, y, *w);
    } else if (family == "lasso_logistic") {
        model = fit_lasso_logistic_cv(*design, y, *w, seed);
    } else if (family == "knn") {
        model = fit_knn(*design, y, static_cast<std::size_t>(hyper_or(learner, "k", 10)));
    } else if (family == "cart") {
        model = fit_cart(*design, y, binary ? w : nullptr);
    } else if (family == "rf") {
        model = fit_rf(*design, y, binary ? w : nullptr,
                       static_cast<std::size_t>(hyper_or(learner, "trees", 200)),
                       static_cast<std::size_t>(hyper_or(learner, "mtry", 0)), seed);
    } else if (family == "xgb") {
        std::size_t rounds = 200, depth = 2;
        double lr = 0.1;
        parse_xgb_name(learner.name, rounds, depth, lr);
        rounds = static_cast<std::size_t>(hyper_or(learner, "rounds", static_cast<double>(rounds)));
        depth = static_cast<std::size_t>(hyper_or(learner, "depth", static_cast<double>(depth)));
        lr = hyper_or(learner, "learning_rate", lr);
        model = fit_xgb(*design, y, binary ? w : nullptr, rounds, depth, lr,
                        hyper_or(learner, "reg_lambda", 1.0),
                        hyper_or(learner, "min_child_weight", 1.0));
    } else {
        throw std::invalid_argument("unknown learner '" + learner.name + "'");
    }

    if (learner.screen)
        for (auto& j : model->selected) j = screened[j];  // back to original columns
    model->learner_name = learner.name;
    model->p_original = X.p;
    return model;
}

std::vector<Learner> builtin_library(const std::string& mode) {
    std::vector<Learner> lib;
    auto add = [&](std::string name, LearnerKind kind, bool screen = false) {
        Learner l;
        l.name = std::move(name);
        l.kind = kind;
        l.screen = screen;
        lib.push_back(std::move(l));
    };
    if (mode == "pseudo") {
        add("ols_screen", LearnerKind::regression, true);
        add("stepwise", LearnerKind::regression);
        add("ridge", LearnerKind::regression);
        add("lasso", LearnerKind::regression);
        add("cart", LearnerKind::both);
        add("rf", LearnerKind::both);
        add("knn", LearnerKind::regression);
        add("xgb_200_2_0.01", LearnerKind::both);
        add("xgb_200_2_0.1", LearnerKind::both);
        add("xgb_200_2_0.2", LearnerKind::both);
        return lib;
    }
    if (mode == "binary") {
        add("logistic", LearnerKind::weighted_binary);
        add("lasso_logistic", LearnerKind::weighted_binary);
        add("cart", LearnerKind::both);
        add("rf", LearnerKind::both);
        add("xgb_200_2_0.01", LearnerKind::both);
        add("xgb_200_2_0.1", LearnerKind::both);
        add("xgb_200_2_0.2", LearnerKind::both);
        return lib;
    }
    throw std::invalid_argument("unknown library mode '" + mode + "'");
}

std::vector<Learner> library_from_json(const nlohmann::json& spec) {
    if (!spec.is_array()) throw std::invalid_argument("library spec must be an array");
    std::vector<Learner> lib;
    for (const auto& entry : spec) {
        Learner l;
        if (entry.is_string()) {
            l.name = entry.get<std::string>();
        } else {
            l.name = entry.at("name").get<std::string>();
            if (entry.contains("screen")) l.screen = entry.at("screen").get<bool>();
            if (entry.contains("screen_p")) l.screen_p = entry.at("screen_p").get<double>();
            if (entry.contains("params"))
                for (auto it = entry.at("params").begin(); it != entry.at("params").end(); ++it)
                    l.hyper[it.key()] = it.value().get<double>();
        }
        const std::string family = family_of(l.name);
        if (family == "logistic" || family == "lasso_logistic")
            l.kind = LearnerKind::weighted_binary;
        else if (family == "cart" || family == "rf" || family == "xgb" || family == "mean")
            l.kind = LearnerKind::both;
        else
            l.kind = LearnerKind::regression;
        if (l.name == "ols_screen") l.screen = true;
        lib.push_back(std::move(l));
    }
    if (lib.empty()) throw std::invalid_argument("library spec is empty");
    return lib;
}

}  // namespace psl
