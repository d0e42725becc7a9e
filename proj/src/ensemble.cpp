#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <set>
#include <stdexcept>

#include "psl/ensemble.hpp"
#include "psl/rng.hpp"

namespace psl {

namespace {

std::uint64_t task_seed(std::uint64_t seed, std::uint64_t salt, std::uint64_t a, std::uint64_t b) {
    return philox4x64({a, b, salt, 0}, {seed, 0x7075656c6cull})[0];
}

double combine_auc(const Matrix& z, const std::vector<double>& alpha, const PseudoMatrix& pseudo,
                   double t_star) {
    std::vector<double> scores(z.n, 0.0);
    for (std::size_t i = 0; i < z.n; ++i) {
        double s = 0.0;
        for (std::size_t k = 0; k < z.p; ++k) s += alpha[k] * z(i, k);
        scores[i] = s;
    }
    return auc_pseudo(roc_pseudo(pseudo, scores, t_star));
}

struct NmResult {
    std::vector<double> x;
    double f = std::numeric_limits<double>::infinity();
};

// Textbook Nelder-Mead (reflect 1, expand 2, contract 0.5, shrink 0.5) with a
// deterministic stable ordering of vertices.
NmResult nelder_mead(const std::function<double(const std::vector<double>&)>& fn,
                     const std::vector<double>& x0, double step, std::size_t max_eval) {
    const std::size_t d = x0.size();
    std::vector<std::vector<double>> xs(d + 1, x0);
    std::vector<double> fs(d + 1);
    std::size_t evals = 0;
    for (std::size_t j = 0; j < d; ++j) xs[j + 1][j] += step;
    for (std::size_t v = 0; v <= d; ++v) {
        fs[v] = fn(xs[v]);
        ++evals;
    }
    std::vector<std::size_t> order(d + 1);
    while (evals < max_eval) {
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return fs[a] < fs[b]; });
        std::size_t best = order[0], worst = order[d], second = order[d - 1];
        if (fs[worst] - fs[best] < 1e-15) break;

        std::vector<double> centroid(d, 0.0);
        for (std::size_t v = 0; v <= d; ++v) {
            if (v == worst) continue;
            for (std::size_t j = 0; j < d; ++j) centroid[j] += xs[v][j];
        }
        for (double& c : centroid) c /= static_cast<double>(d);

        auto blend = [&](double t) {
            std::vector<double> out(d);
            for (std::size_t j = 0; j < d; ++j) out[j] = centroid[j] + t * (centroid[j] - xs[worst][j]);
            return out;
        };
        std::vector<double> xr = blend(1.0);
        double fr = fn(xr);
        ++evals;
        if (fr < fs[best]) {
            std::vector<double> xe = blend(2.0);
            double fe = fn(xe);
            ++evals;
            if (fe < fr) {
                xs[worst] = std::move(xe);
                fs[worst] = fe;
            } else {
                xs[worst] = std::move(xr);
                fs[worst] = fr;
            }
        } else if (fr < fs[second]) {
            xs[worst] = std::move(xr);
            fs[worst] = fr;
        } else if (fr < fs[worst]) {
            std::vector<double> xc = blend(0.5);
            double fc = fn(xc);
            ++evals;
            if (fc <= fr) {
                xs[worst] = std::move(xc);
                fs[worst] = fc;
            } else {
                for (std::size_t v = 0; v <= d; ++v) {  // shrink
                    if (v == best) continue;
                    for (std::size_t j = 0; j < d; ++j)
                        xs[v][j] = xs[best][j] + 0.5 * (xs[v][j] - xs[best][j]);
                    fs[v] = fn(xs[v]);
                    ++evals;
                }
            }
        } else {
            std::vector<double> xc = blend(-0.5);
            double fc = fn(xc);
            ++evals;
            if (fc < fs[worst]) {
                xs[worst] = std::move(xc);
                fs[worst] = fc;
            } else {
                for (std::size_t v = 0; v <= d; ++v) {
                    if (v == best) continue;
                    for (std::size_t j = 0; j < d; ++j)
                        xs[v][j] = xs[best][j] + 0.5 * (xs[v][j] - xs[best][j]);
                    fs[v] = fn(xs[v]);
                    ++evals;
                }
            }
        }
    }
    NmResult out;
    for (std::size_t v = 0; v <= d; ++v) {
        if (fs[v] < out.f) {
            out.f = fs[v];
            out.x = xs[v];
        }
    }
    return out;
}

std::vector<double> l1_project(const std::vector<double>& theta) {
    double norm = 0.0;
    for (double t : theta) norm += std::fabs(t);
    std::vector<double> out(theta.size(), 0.0);
    if (norm < 1e-300) return out;
    for (std::size_t j = 0; j < theta.size(); ++j) out[j] = theta[j] / norm;
    return out;
}

nlohmann::ordered_json weight_json(const std::vector<double>& v) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (double x : v) arr.push_back(x);
    return arr;
}

}  // namespace

std::vector<std::vector<std::size_t>> make_folds(std::size_t n, std::size_t v,
                                                 std::uint64_t seed) {
    if (v < 2) throw std::invalid_argument("need at least 2 folds");
    if (v > n) throw std::invalid_argument("more folds than subjects");
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(seed, 0xf01d5u);
    rng.shuffle(idx);
    std::vector<std::vector<std::size_t>> folds(v);
    std::size_t base = n / v, extra = n % v, at = 0;
    for (std::size_t f = 0; f < v; ++f) {
        std::size_t len = base + (f < extra ? 1 : 0);
        folds[f].assign(idx.begin() + static_cast<long>(at),
                        idx.begin() + static_cast<long>(at + len));
        at += len;
    }
    return folds;
}

StackedDesign stack_time_grid(const SurvivalDataset& dataset, const PseudoMatrix& pseudo,
                              int cause) {
    const std::size_t n = dataset.n(), m = pseudo.m();
    if (pseudo.n != n) throw std::invalid_argument("pseudo matrix size differs from dataset");
    std::size_t jc = pseudo.causes.size();
    for (std::size_t j = 0; j < pseudo.causes.size(); ++j)
        if (pseudo.causes[j] == cause) jc = j;
    if (jc == pseudo.causes.size())
        throw std::invalid_argument("pseudo matrix does not cover cause " + std::to_string(cause));

    StackedDesign out;
    out.n = n;
    out.grid = pseudo.times;
    const std::size_t p = dataset.p;
    out.rows = Matrix(n * m, p + 1);
    out.outcome.resize(n * m);
    out.subject_index.resize(n * m);
    out.time_index.resize(n * m);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t l = 0; l < m; ++l) {
            std::size_t r = i * m + l;
            for (std::size_t j = 0; j < p; ++j) out.rows(r, j) = dataset.records[i].x[j];
            out.rows(r, p) = pseudo.times[l];
            out.outcome[r] = pseudo.value(i, l, jc);
            out.subject_index[r] = i;
            out.time_index[r] = l;
        }
    }
    return out;
}

CvPredictions cv_base_predictions(const std::vector<Learner>& library,
                                  const StackedDesign& stacked,
                                  const std::vector<std::vector<std::size_t>>& folds, double t_star,
                                  std::uint64_t seed, std::size_t threads) {
    const std::size_t n = stacked.n, k_count = library.size(), v_count = folds.size();
    const std::size_t p = stacked.rows.p;
    CvPredictions out;
    out.z = Matrix(n, k_count);

    // first row of each subject, for rebuilding prediction rows at t_star
    std::vector<std::size_t> first_row(n, 0);
    for (std::size_t r = stacked.rows.n; r-- > 0;) first_row[stacked.subject_index[r]] = r;

    std::vector<int> fold_of(n, 0);
    for (std::size_t v = 0; v < v_count; ++v)
        for (std::size_t i : folds[v]) fold_of[i] = static_cast<int>(v);

    std::vector<std::atomic<char>> failed(k_count);
    for (auto& f : failed) f.store(0);
    run_parallel(k_count * v_count, threads, [&](std::size_t task) {
        std::size_t k = task / v_count, v = task % v_count;
        if (failed[k].load()) return;  // column already excluded, skip the work
        std::vector<std::size_t> train_rows;
        train_rows.reserve(stacked.rows.n);
        for (std::size_t r = 0; r < stacked.rows.n; ++r) {
            std::size_t i = stacked.subject_index[r];
            if (static_cast<std::size_t>(fold_of[i]) != v) train_rows.push_back(r);
        }
        for (std::size_t r : train_rows)
            if (static_cast<std::size_t>(fold_of[stacked.subject_index[r]]) == v)
                throw std::logic_error("training split leaks a validation subject");
        Matrix xt(train_rows.size(), p);
        std::vector<double> yt(train_rows.size());
        for (std::size_t a = 0; a < train_rows.size(); ++a) {
            for (std::size_t j = 0; j < p; ++j) xt(a, j) = stacked.rows(train_rows[a], j);
            yt[a] = stacked.outcome[train_rows[a]];
        }
        try {
            ModelPtr model = fit(library[k], xt, yt, nullptr, task_seed(seed, 0x57ac4edull, k, v));
            Matrix xv(folds[v].size(), p);
            for (std::size_t a = 0; a < folds[v].size(); ++a) {
                std::size_t r = first_row[folds[v][a]];
                for (std::size_t j = 0; j + 1 < p; ++j) xv(a, j) = stacked.rows(r, j);
                xv(a, p - 1) = t_star;
            }
            std::vector<double> pred = model->predict(xv);
            for (std::size_t a = 0; a < folds[v].size(); ++a) out.z(folds[v][a], k) = pred[a];
        } catch (const std::logic_error&) {
            throw;
        } catch (const std::exception&) {
            failed[k].store(1);
        }
    });
    out.failed.resize(k_count);
    for (std::size_t k = 0; k < k_count; ++k) out.failed[k] = failed[k].load();
    return out;
}

WeightResult optimize_auc_weights(const Matrix& z, const PseudoMatrix& pseudo, double lambda,
                                  double t_star, std::uint64_t seed) {
    const std::size_t k = z.p;
    if (k == 0) throw std::invalid_argument("no usable learners to combine");
    if (k == 1) {
        WeightResult r;
        r.alpha_raw = {1.0};
        r.alpha_star = {1.0};
        r.objective = combine_auc(z, {1.0}, pseudo, t_star);
        return r;
    }

    auto fitness = [&](const std::vector<double>& theta) {
        std::vector<double> alpha = l1_project(theta);
        double norm = 0.0;
        for (double a : alpha) norm += std::fabs(a);
        if (norm < 0.5) return std::numeric_limits<double>::infinity();
        return -combine_auc(z, alpha, pseudo, t_star);
    };

    struct Candidate {
        std::vector<double> alpha;  // on the L1 sphere
        double auc = 0.0;
        double sum = 0.0;
        double negative_mass = 0.0;
    };
    std::vector<Candidate> pool;
    auto add_candidate = [&](const std::vector<double>& theta) {
        std::vector<double> alpha = l1_project(theta);
        double norm = 0.0;
        for (double a : alpha) norm += std::fabs(a);
        if (norm < 0.5) return;
        Candidate c;
        c.alpha = alpha;
        c.auc = combine_auc(z, alpha, pseudo, t_star);
        for (double a : alpha) {
            c.sum += a;
            if (a < 0.0) c.negative_mass -= a;
        }
        pool.push_back(std::move(c));
    };

    // every single-learner corner is always a candidate
    for (std::size_t j = 0; j < k; ++j) {
        std::vector<double> corner(k, 0.0);
        corner[j] = 1.0;
        add_candidate(corner);
    }

    std::vector<std::vector<double>> starts;
    for (std::size_t j = 0; j < k && starts.size() < 7; ++j) {
        std::vector<double> corner(k, 0.0);
        corner[j] = 1.0;
        starts.push_back(std::move(corner));
    }
    starts.emplace_back(k, 1.0 / static_cast<double>(k));
    Rng rng(seed, 0x0a1cu);
    while (starts.size() < 8) {
        std::vector<double> s(k);
        for (double& x : s) x = rng.uniform(-1.0, 1.0);
        starts.push_back(l1_project(s));
    }
    for (const auto& start : starts) {
        NmResult nm = nelder_mead(fitness, start, 0.25, 2000);
        if (std::isfinite(nm.f)) add_candidate(nm.x);
    }

    // best AUC wins; near-ties prefer a positive coefficient sum, then the
    // smaller lambda-weighted negative mass, then insertion order
    std::size_t best = 0;
    for (std::size_t c = 1; c < pool.size(); ++c) {
        const Candidate &a = pool[c], &b = pool[best];
        if (a.auc > b.auc + 1e-12) {
            best = c;
            continue;
        }
        if (std::fabs(a.auc - b.auc) <= 1e-12) {
            bool a_pos = a.sum > 1e-12, b_pos = b.sum > 1e-12;
            if (a_pos != b_pos) {
                if (a_pos) best = c;
                continue;
            }
            if (lambda * a.negative_mass < lambda * b.negative_mass - 1e-15) best = c;
        }
    }
    const Candidate& win = pool[best];
    if (std::fabs(win.sum) < 1e-12)
        throw std::runtime_error("optimized weights sum to zero; cannot normalize");
    WeightResult r;
    r.alpha_raw = win.alpha;
    r.alpha_star.resize(k);
    for (std::size_t j = 0; j < k; ++j) r.alpha_star[j] = win.alpha[j] / win.sum;
    r.objective = win.auc;
    return r;
}

WeightResult optimize_nnloglik_weights(const Matrix& probs, const std::vector<bool>& labels,
                                       const IpcwWeights& ipcw) {
    const std::size_t n = probs.n, k = probs.p;
    if (labels.size() != n || ipcw.weights.size() != n)
        throw std::invalid_argument("label/weight length differs from prediction rows");
    double wsum = 0.0;
    for (double w : ipcw.weights) wsum += w;
    if (wsum <= 0.0) throw std::invalid_argument("no usable subjects: all weights are zero");
    WeightResult r;
    if (k == 1) {
        r.alpha_raw = {1.0};
        r.alpha_star = {1.0};
        std::vector<double> col(n);
        for (std::size_t i = 0; i < n; ++i) col[i] = probs(i, 0);
        r.objective = nn_loglik(labels, col, ipcw.weights);
        return r;
    }

    std::vector<double> alpha(k, 1.0 / static_cast<double>(k));
    std::vector<double> combo(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < k; ++j) combo[i] += alpha[j] * probs(i, j);
    double current = nn_loglik(labels, combo, ipcw.weights);

    // projected coordinate search: shift mass between coordinate pairs with a
    // halving step, accepting strict improvements
    for (double step = 0.25; step >= 1e-5;) {
        bool improved = false;
        for (std::size_t a = 0; a < k; ++a) {
            for (std::size_t b = 0; b < k; ++b) {
                if (a == b || alpha[b] < step) continue;
                std::vector<double> trial_combo(n);
                for (std::size_t i = 0; i < n; ++i)
                    trial_combo[i] = combo[i] + step * (probs(i, a) - probs(i, b));
                double trial = nn_loglik(labels, trial_combo, ipcw.weights);
                if (trial < current - 1e-13) {
                    alpha[a] += step;
                    alpha[b] -= step;
                    combo = std::move(trial_combo);
                    current = trial;
                    improved = true;
                }
            }
        }
        if (!improved) step /= 2.0;
    }
    r.alpha_raw = alpha;
    r.alpha_star = alpha;
    r.objective = current;
    return r;
}

namespace {

// weights over usable columns expanded back to library positions
WeightResult expand_weights(const WeightResult& compact, const std::vector<char>& failed) {
    WeightResult full;
    full.objective = compact.objective;
    full.alpha_raw.assign(failed.size(), 0.0);
    full.alpha_star.assign(failed.size(), 0.0);
    std::size_t at = 0;
    for (std::size_t k = 0; k < failed.size(); ++k) {
        if (failed[k]) continue;
        full.alpha_raw[k] = compact.alpha_raw[at];
        full.alpha_star[k] = compact.alpha_star[at];
        ++at;
    }
    return full;
}

Matrix usable_columns(const Matrix& z, const std::vector<char>& failed) {
    std::size_t keep = 0;
    for (char f : failed)
        if (!f) ++keep;
    Matrix out(z.n, keep);
    std::size_t at = 0;
    for (std::size_t k = 0; k < z.p; ++k) {
        if (failed[k]) continue;
        for (std::size_t i = 0; i < z.n; ++i) out(i, at) = z(i, k);
        ++at;
    }
    return out;
}

std::vector<ModelPtr> full_refits(const std::vector<Learner>& library, const Matrix& x,
                                  const std::vector<double>& y, const std::vector<double>* w,
                                  std::vector<char>& failed, std::uint64_t seed,
                                  std::size_t threads) {
    std::vector<ModelPtr> models(library.size());
    run_parallel(library.size(), threads, [&](std::size_t k) {
        if (failed[k]) return;
        try {
            models[k] = fit(library[k], x, y, w, task_seed(seed, 0xf17full, k, 0xffffu));
        } catch (const std::exception&) {
            failed[k] = 1;
        }
    });
    return models;
}

}  // namespace

EnsembleModel fit_superlearner_pseudo(const SurvivalDataset& dataset,
                                      const std::vector<double>& grid, double t_star,
                                      const std::vector<Learner>& library, std::size_t v,
                                      double lambda, std::uint64_t seed, std::size_t threads) {
    if (library.empty()) throw std::invalid_argument("empty learner library");
    if (std::find(grid.begin(), grid.end(), t_star) == grid.end())
        throw std::invalid_argument("t_star must be on the time grid");
    for (const auto& l : library)
        if (l.kind == LearnerKind::weighted_binary)
            throw std::invalid_argument("learner '" + l.name +
                                        "' needs a binary outcome and cannot fit pseudo-values");

    std::set<int> seen;
    for (const auto& rec : dataset.records)
        if (rec.delta > 0) seen.insert(rec.delta);
    seen.insert(1);
    std::vector<int> causes(seen.begin(), seen.end());

    PseudoMatrix pseudo = pseudo_observations(dataset, causes, grid);
    auto folds = make_folds(dataset.n(), v, seed);
    StackedDesign stacked = stack_time_grid(dataset, pseudo, 1);
    CvPredictions cv = cv_base_predictions(library, stacked, folds, t_star, seed, threads);

    bool any = false;
    for (char f : cv.failed)
        if (!f) any = true;
    if (!any) throw std::runtime_error("all learners failed during cross-validation");

    Matrix zu = usable_columns(cv.z, cv.failed);
    WeightResult compact = optimize_auc_weights(zu, pseudo, lambda, t_star, seed);
    WeightResult weights = expand_weights(compact, cv.failed);

    EnsembleModel model;
    model.mode = "pseudo-auc";
    model.t_star = t_star;
    model.grid = grid;
    model.lambda = lambda;
    model.alpha_raw = weights.alpha_raw;
    model.alpha_star = weights.alpha_star;
    model.cv_objective = weights.objective;
    model.models = full_refits(library, stacked.rows, stacked.outcome, nullptr, cv.failed, seed,
                               threads);
    for (std::size_t k = 0; k < library.size(); ++k) {
        CvLearnerReport rep;
        rep.name = library[k].name;
        rep.failed = cv.failed[k] != 0;
        if (!rep.failed) {
            std::vector<double> col(cv.z.n);
            for (std::size_t i = 0; i < cv.z.n; ++i) col[i] = cv.z(i, k);
            rep.cv_objective = auc_pseudo(roc_pseudo(pseudo, col, t_star));
        }
        model.cv_report.push_back(std::move(rep));
    }
    return model;
}

EnsembleModel fit_superlearner_binary(const SurvivalDataset& dataset, double t_star,
                                      const std::vector<Learner>& library, std::size_t v,
                                      bool stratified_weights, std::uint64_t seed,
                                      std::size_t threads) {
    if (library.empty()) throw std::invalid_argument("empty learner library");
    for (const auto& l : library)
        if (l.kind == LearnerKind::regression)
            throw std::invalid_argument("learner '" + l.name +
                                        "' cannot use the IPCW weights required here");

    IpcwWeights ipcw = ipcw_weights(dataset, t_star, stratified_weights);
    double wsum = 0.0;
    for (double w : ipcw.weights) wsum += w;
    if (wsum <= 0.0)
        throw std::invalid_argument("no usable subjects: everyone is censored before t_star");

    const std::size_t n = dataset.n();
    std::vector<bool> labels(n);
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        labels[i] = dataset.records[i].y <= t_star && dataset.records[i].delta == 1;
        y[i] = labels[i] ? 1.0 : 0.0;
    }
    Matrix x = dataset.covariates();
    auto folds = make_folds(n, v, seed);

    const std::size_t k_count = library.size(), v_count = folds.size();
    Matrix probs(n, k_count);
    std::vector<int> fold_of(n, 0);
    for (std::size_t f = 0; f < v_count; ++f)
        for (std::size_t i : folds[f]) fold_of[i] = static_cast<int>(f);

    std::vector<std::atomic<char>> failed_flags(k_count);
    for (auto& f : failed_flags) f.store(0);
    run_parallel(k_count * v_count, threads, [&](std::size_t task) {
        std::size_t k = task / v_count, f = task % v_count;
        if (failed_flags[k].load()) return;
        std::vector<std::size_t> train;
        for (std::size_t i = 0; i < n; ++i)
            if (static_cast<std::size_t>(fold_of[i]) != f) train.push_back(i);
        Matrix xt(train.size(), x.p);
        std::vector<double> yt(train.size()), wt(train.size());
        for (std::size_t a = 0; a < train.size(); ++a) {
            for (std::size_t j = 0; j < x.p; ++j) xt(a, j) = x(train[a], j);
            yt[a] = y[train[a]];
            wt[a] = ipcw.weights[train[a]];
        }
        try {
            ModelPtr model = fit(library[k], xt, yt, &wt, task_seed(seed, 0xb1245ull, k, f));
            Matrix xv(folds[f].size(), x.p);
            for (std::size_t a = 0; a < folds[f].size(); ++a)
                for (std::size_t j = 0; j < x.p; ++j) xv(a, j) = x(folds[f][a], j);
            std::vector<double> pred = model->predict(xv);
            for (std::size_t a = 0; a < folds[f].size(); ++a) probs(folds[f][a], k) = pred[a];
        } catch (const std::exception&) {
            failed_flags[k].store(1);
        }
    });
    std::vector<char> failed(k_count);
    for (std::size_t k = 0; k < k_count; ++k) failed[k] = failed_flags[k].load();

    bool any = false;
    for (char f : failed)
        if (!f) any = true;
    if (!any) throw std::runtime_error("all learners failed during cross-validation");

    Matrix pu = usable_columns(probs, failed);
    WeightResult compact = optimize_nnloglik_weights(pu, labels, ipcw);
    WeightResult weights = expand_weights(compact, failed);

    EnsembleModel model;
    model.mode = "binary-nnloglik";
    model.t_star = t_star;
    model.alpha_raw = weights.alpha_raw;
    model.alpha_star = weights.alpha_star;
    model.cv_objective = weights.objective;
    model.models = full_refits(library, x, y, &ipcw.weights, failed, seed, threads);
    for (std::size_t k = 0; k < k_count; ++k) {
        CvLearnerReport rep;
        rep.name = library[k].name;
        rep.failed = failed[k] != 0;
        if (!rep.failed) {
            std::vector<double> col(n);
            for (std::size_t i = 0; i < n; ++i) col[i] = probs(i, k);
            rep.cv_objective = nn_loglik(labels, col, ipcw.weights);
        }
        model.cv_report.push_back(std::move(rep));
    }
    return model;
}

std::vector<double> predict_ensemble(const EnsembleModel& model, const Matrix& x) {
    std::vector<double> out(x.n, 0.0);
    const Matrix* design = &x;
    Matrix with_time;
    if (model.mode == "pseudo-auc") {
        with_time = Matrix(x.n, x.p + 1);
        for (std::size_t i = 0; i < x.n; ++i) {
            for (std::size_t j = 0; j < x.p; ++j) with_time(i, j) = x(i, j);
            with_time(i, x.p) = model.t_star;
        }
        design = &with_time;
    }
    for (std::size_t k = 0; k < model.models.size(); ++k) {
        if (!model.models[k] || model.alpha_star[k] == 0.0) continue;
        std::vector<double> pred = model.models[k]->predict(*design);
        for (std::size_t i = 0; i < x.n; ++i) out[i] += model.alpha_star[k] * pred[i];
    }
    return out;
}

nlohmann::ordered_json EnsembleModel::to_json() const {
    nlohmann::ordered_json j;
    j["schema_version"] = 1;
    j["mode"] = mode;
    j["t_star"] = t_star;
    j["grid"] = grid;
    j["lambda"] = lambda;
    j["cv_objective"] = cv_objective;
    j["alpha_raw"] = weight_json(alpha_raw);
    j["alpha_star"] = weight_json(alpha_star);
    nlohmann::ordered_json learners = nlohmann::ordered_json::array();
    for (std::size_t k = 0; k < cv_report.size(); ++k) {
        nlohmann::ordered_json entry;
        entry["name"] = cv_report[k].name;
        entry["failed"] = cv_report[k].failed;
        entry["cv_objective"] = cv_report[k].cv_objective;
        entry["model"] = models[k] ? models[k]->to_json() : nlohmann::ordered_json(nullptr);
        learners.push_back(std::move(entry));
    }
    j["learners"] = std::move(learners);
    return j;
}

EnsembleModel EnsembleModel::from_json(const nlohmann::json& j) {
    EnsembleModel model;
    model.mode = j.at("mode").get<std::string>();
    model.t_star = j.at("t_star").get<double>();
    model.grid = j.at("grid").get<std::vector<double>>();
    model.lambda = j.at("lambda").get<double>();
    model.cv_objective = j.at("cv_objective").get<double>();
    model.alpha_raw = j.at("alpha_raw").get<std::vector<double>>();
    model.alpha_star = j.at("alpha_star").get<std::vector<double>>();
    for (const auto& entry : j.at("learners")) {
        CvLearnerReport rep;
        rep.name = entry.at("name").get<std::string>();
        rep.failed = entry.at("failed").get<bool>();
        rep.cv_objective = entry.at("cv_objective").get<double>();
        model.cv_report.push_back(rep);
        model.models.push_back(entry.at("model").is_null() ? ModelPtr()
                                                           : model_from_json(entry.at("model")));
    }
    if (model.alpha_star.size() != model.models.size())
        throw std::invalid_argument("weight count differs from learner count");
    return model;
}

}  // namespace psl
