// Acceptance gate: one self-contained check per criterion, selected with
// --criterion N (all of them when the flag is absent). Each check prints a
// single pass/fail line; the exit code is nonzero when any printed line fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "psl/bench.hpp"

namespace {

using namespace psl;

struct Outcome {
    bool pass = false;
    std::string detail;
};

double now_seconds() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

std::string fmt(double x, int digits = 4) {
    std::ostringstream s;
    s << std::setprecision(digits) << x;
    return s.str();
}

SurvivalDataset random_dataset(Rng& rng, std::size_t n, bool with_censoring) {
    SurvivalDataset d;
    d.p = 0;
    for (;;) {
        d.records.clear();
        bool any_event = false;
        for (std::size_t i = 0; i < n; ++i) {
            Record r;
            r.y = 0.5 * static_cast<double>(1 + rng.below(12));  // ties on purpose
            int code = static_cast<int>(rng.below(with_censoring ? 4 : 3));
            r.delta = with_censoring ? code : code + 1;
            any_event |= r.delta != 0;
            d.records.push_back(r);
        }
        if (any_event) return d;
    }
}

// distinct grid times strictly below the largest observation
std::vector<double> interior_grid(const SurvivalDataset& d) {
    double top = 0.0;
    for (const auto& r : d.records) top = std::max(top, r.y);
    std::set<double> pts;
    for (const auto& r : d.records) {
        if (r.y < top) pts.insert(r.y);
        if (r.y + 0.25 < top) pts.insert(r.y + 0.25);
    }
    pts.insert(top * 0.5);
    return {pts.begin(), pts.end()};
}

// 1. closure and jackknife-mean identities plus exact indicators
Outcome criterion1() {
    Rng rng(4001);
    double max_closure = 0.0, max_mean = 0.0, max_indicator = 0.0;
    for (int rep = 0; rep < 400; ++rep) {
        SurvivalDataset d = random_dataset(rng, 3 + rng.below(48), true);
        std::vector<double> grid = interior_grid(d);
        PseudoMatrix ps = pseudo_observations(d, {1, 2, 3}, grid);
        StepFunction c1 = aalen_johansen(d, 1);
        StepFunction c2 = aalen_johansen(d, 2);
        StepFunction c3 = aalen_johansen(d, 3);
        StepFunction s = kaplan_meier(d);
        for (std::size_t l = 0; l < grid.size(); ++l) {
            double t = grid[l];
            max_closure = std::max(max_closure, std::fabs(c1(t) + c2(t) + c3(t) + s(t) - 1.0));
            double m1 = 0.0, m2 = 0.0, m3 = 0.0, ms = 0.0;
            for (std::size_t i = 0; i < d.n(); ++i) {
                m1 += ps.value(i, l, 0);
                m2 += ps.value(i, l, 1);
                m3 += ps.value(i, l, 2);
                ms += ps.surv(i, l);
            }
            double n = static_cast<double>(d.n());
            max_mean = std::max({max_mean, std::fabs(m1 / n - c1(t)), std::fabs(m2 / n - c2(t)),
                                 std::fabs(m3 / n - c3(t)), std::fabs(ms / n - s(t))});
        }
    }
    for (int rep = 0; rep < 100; ++rep) {
        SurvivalDataset d = random_dataset(rng, 3 + rng.below(48), false);
        std::vector<double> grid = interior_grid(d);
        PseudoMatrix ps = pseudo_observations(d, {1, 2, 3}, grid);
        for (std::size_t i = 0; i < d.n(); ++i)
            for (std::size_t l = 0; l < grid.size(); ++l)
                for (int cause = 1; cause <= 3; ++cause) {
                    double want =
                        (d.records[i].delta == cause && d.records[i].y <= grid[l]) ? 1.0 : 0.0;
                    max_indicator = std::max(
                        max_indicator,
                        std::fabs(ps.value(i, l, static_cast<std::size_t>(cause - 1)) - want));
                }
    }
    bool pass = max_closure <= 1e-12 && max_mean <= 1e-12 && max_indicator <= 1e-12;
    return {pass, "closure " + fmt(max_closure, 2) + ", pseudo mean " + fmt(max_mean, 2) +
                      ", indicator " + fmt(max_indicator, 2) + " (tol 1e-12, 500 datasets)"};
}

// 2. optimized pseudo sweep against naive leave-one-out recomputation
Outcome criterion2() {
    Rng rng(4002);
    double max_diff = 0.0;
    for (int rep = 0; rep < 100; ++rep) {
        SurvivalDataset d = random_dataset(rng, 4 + rng.below(47), true);
        std::vector<double> grid = interior_grid(d);
        PseudoMatrix ps = pseudo_observations(d, {1, 2}, grid);
        const std::size_t n = d.n();
        for (int cause : {1, 2}) {
            StepFunction full = aalen_johansen(d, cause);
            for (std::size_t i = 0; i < n; ++i) {
                SurvivalDataset loo;
                loo.p = 0;
                for (std::size_t r = 0; r < n; ++r)
                    if (r != i) loo.records.push_back(d.records[r]);
                StepFunction part = aalen_johansen(loo, cause);
                for (std::size_t l = 0; l < grid.size(); ++l) {
                    double naive = static_cast<double>(n) * full(grid[l]) -
                                   static_cast<double>(n - 1) * part(grid[l]);
                    max_diff = std::max(
                        max_diff,
                        std::fabs(ps.value(i, l, static_cast<std::size_t>(cause - 1)) - naive));
                }
            }
        }
    }
    return {max_diff <= 1e-12, "max |optimized - naive| " + fmt(max_diff, 2) +
                                   " (tol 1e-12, 100 datasets)"};
}

// 3. quadrature against the exponential closed form and Monte Carlo draws
Outcome criterion3() {
    Rng rng(4003);
    double max_exp = 0.0;
    for (int rep = 0; rep < 50; ++rep) {
        double g = 0.3 + 4.0 * rng.uniform();
        double k = 0.3 + 4.0 * rng.uniform();
        double t = 0.3 + 3.0 * rng.uniform();
        double rate = 1.0 / g + 1.0 / k;
        double closed = (1.0 - std::exp(-t / k)) -
                        (1.0 / k) / rate * (1.0 - std::exp(-t * rate)) +
                        (1.0 - std::exp(-t / g)) * std::exp(-t / k);
        max_exp = std::max(max_exp, std::fabs(true_cif(g, 1.0, k, 1.0, t) - closed));
    }

    double max_z = 0.0;
    const std::size_t pairs = 10000000;
    for (int set = 0; set < 50; ++set) {
        double g, k, g2, k2, t, cif;
        do {
            g = 5.0 + 55.0 * rng.uniform();
            k = 5.0 + 55.0 * rng.uniform();
            g2 = 0.8 + 3.2 * rng.uniform();
            k2 = 0.8 + 3.2 * rng.uniform();
            t = 5.0 + 35.0 * rng.uniform();
            cif = true_cif(g, g2, k, k2, t);
        } while (cif < 0.01 || cif > 0.99);
        double hits = 0.0;
        for (std::size_t i = 0; i < pairs; ++i) {
            double t1 = rng.weibull(g, g2), t2 = rng.weibull(k, k2);
            hits += (t1 <= t && t1 <= t2) ? 1.0 : 0.0;
        }
        double mc = hits / static_cast<double>(pairs);
        double se = std::sqrt(cif * (1.0 - cif) / static_cast<double>(pairs));
        max_z = std::max(max_z, std::fabs(mc - cif) / se);
    }
    bool pass = max_exp <= 1e-8 && max_z <= 3.0;
    return {pass, "exponential form max err " + fmt(max_exp, 2) + " (tol 1e-8), MC max |z| " +
                      fmt(max_z, 3) + " over 50 sets of 1e7 pairs (limit 3)"};
}

// 4. marginal cumulative incidence targets at t_star (first-event fractions)
Outcome criterion4() {
    ScenarioConfig cfg;
    cfg.scenario = Scenario::A;
    cfg.n = 100000;
    cfg.seed = 4004;
    ScenarioDraw draw = generate_scenario(cfg);
    double f1 = 0.0, f2 = 0.0;
    for (const auto& t : draw.train_truth) {
        f1 += (t.t_latent_1 <= cfg.t_star && t.t_latent_1 <= t.t_latent_2) ? 1.0 : 0.0;
        f2 += (t.t_latent_2 <= cfg.t_star && t.t_latent_2 < t.t_latent_1) ? 1.0 : 0.0;
    }
    f1 /= static_cast<double>(cfg.n);
    f2 /= static_cast<double>(cfg.n);
    bool pass = std::fabs(f1 - 0.20) <= 0.02 && std::fabs(f2 - 0.07) <= 0.02;
    return {pass, "cause-1 incidence " + fmt(f1) + " (target 0.20±0.02), cause-2 " + fmt(f2) +
                      " (target 0.07±0.02) at n=1e5"};
}

BenchReport oracle_bench(Scenario scenario) {
    BenchConfig cfg;
    cfg.scenario.scenario = scenario;
    cfg.scenario.n = 500;
    cfg.scenario.censoring_target = 0.2;
    cfg.scenario.seed = 11;
    cfg.replicates = 100;
    cfg.methods = {"true"};
    return run_bench(cfg);
}

// 5. true-scorer AUC levels on scenarios A and C
Outcome criterion5() {
    BenchReport a = oracle_bench(Scenario::A);
    BenchReport c = oracle_bench(Scenario::C);
    double ma = a.aggregates[0].mean_tbauc;
    double mc = c.aggregates[0].mean_tbauc;
    bool pass = ma >= 0.717 && ma <= 0.777 && mc >= 0.907 && mc <= 0.947;
    return {pass, "A mean tbauc " + fmt(ma) + " (band [0.717,0.777]), C mean tbauc " + fmt(mc) +
                      " (band [0.907,0.947]); 100 reps of n=500, 20% censoring"};
}

// 6. pseudo AUC tracks the uncensored-truth AUC
Outcome criterion6() {
    std::string detail;
    bool pass = true;
    for (Scenario sc : {Scenario::A, Scenario::C}) {
        BenchReport rep = oracle_bench(sc);
        double gap = 0.0;
        for (const auto& r : rep.replicate_results) gap += std::fabs(r[0].pauc - r[0].tbauc);
        gap /= static_cast<double>(rep.completed);
        double mean_gap =
            std::fabs(rep.aggregates[0].mean_pauc - rep.aggregates[0].mean_tbauc);
        pass = pass && gap <= 0.01 && mean_gap <= 0.01;
        if (!detail.empty()) detail += ", ";
        detail += to_string(sc) + " mean|pauc-tbauc| " + fmt(gap) + ", |mean gap| " +
                  fmt(mean_gap);
    }
    return {pass, detail + " (limits 0.01)"};
}

// 7. reduced-library ensemble beats its worst member and the floor
Outcome criterion7() {
    const std::vector<std::string> members{"ols_screen", "lasso", "cart", "xgb_200_2_0.1"};
    BenchConfig cfg;
    cfg.scenario.scenario = Scenario::A;
    cfg.scenario.n = 500;
    cfg.scenario.censoring_target = 0.2;
    cfg.scenario.seed = 21;
    cfg.replicates = 25;
    cfg.methods = {"pseudo"};
    cfg.pseudo_library = R"(["ols_screen","lasso","cart","xgb_200_2_0.1"])";
    double sl = run_bench(cfg).aggregates[0].mean_pauc;

    double worst = 1.0;
    std::string worst_name;
    for (const auto& name : members) {
        cfg.pseudo_library = "[\"" + name + "\"]";
        double solo = run_bench(cfg).aggregates[0].mean_pauc;
        if (solo < worst) {
            worst = solo;
            worst_name = name;
        }
    }
    bool pass = sl >= 0.68 && sl >= worst;
    return {pass, "SL mean pauc " + fmt(sl) + " (floor 0.68), worst member " + worst_name + " " +
                      fmt(worst) + "; 25 paired reps"};
}

// 8. AUC weight optimizer against a 0.01-step simplex grid search
Outcome criterion8() {
    Rng rng(4008);
    double max_gap = 0.0;
    for (int inst = 0; inst < 20; ++inst) {
        const std::size_t n = 120 + rng.below(81);
        PseudoMatrix pm;
        pm.times = {1.0};
        pm.causes = {1};
        pm.n = n;
        pm.values.resize(n);
        pm.survival_pseudo.resize(n);
        Matrix z(n, 3);
        double s0 = 0.4 + 1.2 * rng.uniform();
        double s1 = 0.2 + 0.8 * rng.uniform();
        double s2 = 0.1 + 0.4 * rng.uniform();
        for (std::size_t i = 0; i < n; ++i) {
            double label = rng.uniform() < 0.4 ? 1.0 : 0.0;
            pm.values[i] = label + rng.normal(0.0, 0.12);  // pseudo-like, may leave [0,1]
            pm.survival_pseudo[i] = 1.0 - pm.values[i];
            z(i, 0) = s0 * label + rng.normal(0.0, 1.0);
            z(i, 1) = s1 * label + rng.normal(0.0, 1.0);
            z(i, 2) = s2 * label + rng.normal(0.0, 1.0);
        }

        double grid_best = 0.0;
        std::vector<double> blend(n);
        for (int i = 0; i <= 100; ++i)
            for (int j = 0; j <= 100 - i; ++j) {
                double a0 = i / 100.0, a1 = j / 100.0, a2 = (100 - i - j) / 100.0;
                for (std::size_t r = 0; r < n; ++r)
                    blend[r] = a0 * z(r, 0) + a1 * z(r, 1) + a2 * z(r, 2);
                grid_best = std::max(grid_best, auc_pseudo(roc_pseudo(pm, blend, 1.0)));
            }

        WeightResult w = optimize_auc_weights(z, pm, 100.0, 1.0, rng.next_u64());
        max_gap = std::max(max_gap, grid_best - w.objective);
    }
    return {max_gap <= 0.005, "max (grid AUC - optimizer AUC) " + fmt(max_gap, 3) +
                                  " over 20 K=3 instances (limit 0.005)"};
}

// 9. reports are byte-identical across thread counts
Outcome criterion9() {
    BenchConfig cfg;
    cfg.scenario.scenario = Scenario::A;
    cfg.scenario.n = 120;
    cfg.scenario.seed = 303;
    cfg.replicates = 3;
    cfg.methods = {"pseudo.single", "true"};
    cfg.pseudo_library = R"(["mean","ols","cart"])";
    cfg.folds = 5;

    cfg.threads = 1;
    BenchReport one = run_bench(cfg);
    cfg.threads = 3;
    BenchReport three = run_bench(cfg);
    bool pass = one.to_json().dump() == three.to_json().dump() &&
                one.to_csv() == three.to_csv();
    return {pass, pass ? "json and csv bytes identical across --threads 1 and 3"
                       : "reports differ across --threads 1 and 3"};
}

// 10. no signal means chance-level pseudo AUC
Outcome criterion10() {
    BenchConfig cfg;
    cfg.scenario.scenario = Scenario::S0;
    cfg.scenario.n = 500;
    cfg.scenario.censoring_target = 0.2;
    cfg.scenario.seed = 31;
    cfg.replicates = 50;
    cfg.methods = {"pseudo.single"};
    cfg.pseudo_library = R"(["ols","cart"])";
    cfg.folds = 5;
    double pauc = run_bench(cfg).aggregates[0].mean_pauc;
    bool pass = pauc >= 0.45 && pauc <= 0.55;
    return {pass, "null-scenario mean pauc " + fmt(pauc) +
                      " over 50 reps (band [0.45,0.55], covariate-only library)"};
}

}  // namespace

int main(int argc, char** argv) {
    int which = 0;
    for (int a = 1; a + 1 < argc; ++a)
        if (std::strcmp(argv[a], "--criterion") == 0) which = std::atoi(argv[a + 1]);
    if (which < 0 || which > 10) {
        std::cerr << "usage: acceptance [--criterion 1..10]\n";
        return 2;
    }

    const std::vector<std::function<Outcome()>> criteria{
        criterion1, criterion2, criterion3, criterion4, criterion5,
        criterion6, criterion7, criterion8, criterion9, criterion10};

    bool all_pass = true;
    for (int k = 1; k <= 10; ++k) {
        if (which != 0 && which != k) continue;
        double t0 = now_seconds();
        Outcome o = criteria[static_cast<std::size_t>(k - 1)]();
        std::cout << "criterion " << k << ": " << (o.pass ? "PASS" : "FAIL") << " (" << o.detail
                  << "; " << fmt(now_seconds() - t0, 3) << "s)" << std::endl;
        all_pass = all_pass && o.pass;
    }
    return all_pass ? 0 : 1;
}
