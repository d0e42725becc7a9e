#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <utility>
#include <set>
#include <vector>

#include "psl/estimators.hpp"
#include "psl/rng.hpp"

using namespace psl;

namespace {

SurvivalDataset from_pairs(const std::vector<std::pair<double, int>>& obs) {
    SurvivalDataset d;
    d.p = 0;
    for (auto [y, delta] : obs) {
        Record r;
        r.y = y;
        r.delta = delta;
        d.records.push_back(r);
    }
    return d;
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
            int code = static_cast<int>(rng.below(with_censoring ? 4 : 2));
            r.delta = with_censoring ? code : code + 1;
            any_event |= r.delta != 0;
            d.records.push_back(r);
        }
        if (any_event) return d;
    }
}

// grid of distinct times strictly below the largest observation
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

// jackknife of the product-limit Aalen-Johansen estimator, recomputed naively
std::vector<double> naive_pseudo(const SurvivalDataset& d, int cause, double t) {
    const std::size_t n = d.n();
    const double full = aalen_johansen(d, cause)(t);
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        SurvivalDataset loo;
        loo.p = 0;
        for (std::size_t r = 0; r < n; ++r)
            if (r != i) loo.records.push_back(d.records[r]);
        double part = aalen_johansen(loo, cause)(t);
        out[i] = static_cast<double>(n) * full - static_cast<double>(n - 1) * part;
    }
    return out;
}

}  // namespace

TEST_CASE("step function is right-continuous with left limits") {
    StepFunction f;
    f.value_at_zero = 1.0;
    f.jump_times = {1.0, 3.0};
    f.values = {0.6, 0.2};
    CHECK(f(0.0) == 1.0);
    CHECK(f(0.99) == 1.0);
    CHECK(f(1.0) == 0.6);
    CHECK(f(2.5) == 0.6);
    CHECK(f(3.0) == 0.2);
    CHECK(f(9.0) == 0.2);
    CHECK(f.left_limit(1.0) == 1.0);
    CHECK(f.left_limit(3.0) == 0.6);
    CHECK(f.left_limit(3.5) == 0.2);
}

TEST_CASE("kaplan-meier pools all event causes") {
    auto d = from_pairs({{1, 1}, {2, 0}, {3, 2}, {4, 1}, {5, 0}});
    StepFunction s = kaplan_meier(d);
    CHECK(s(0.5) == 1.0);
    CHECK(s(1.0) == doctest::Approx(0.8).epsilon(1e-15));
    CHECK(s(2.9) == doctest::Approx(0.8).epsilon(1e-15));
    CHECK(s(3.0) == doctest::Approx(8.0 / 15).epsilon(1e-15));
    CHECK(s(4.0) == doctest::Approx(4.0 / 15).epsilon(1e-15));
    CHECK(s.left_limit(4.0) == doctest::Approx(8.0 / 15).epsilon(1e-15));
    CHECK(s(100.0) == doctest::Approx(4.0 / 15).epsilon(1e-15));
}

TEST_CASE("aalen-johansen splits incidence by cause and closes the identity") {
    auto d = from_pairs({{1, 1}, {2, 0}, {3, 2}, {4, 1}, {5, 0}});
    StepFunction c1 = aalen_johansen(d, 1);
    StepFunction c2 = aalen_johansen(d, 2);
    StepFunction s = kaplan_meier(d);
    CHECK(c1(1.0) == doctest::Approx(0.2).epsilon(1e-15));
    CHECK(c1(3.9) == doctest::Approx(0.2).epsilon(1e-15));
    CHECK(c1(4.0) == doctest::Approx(7.0 / 15).epsilon(1e-15));
    CHECK(c2(2.9) == 0.0);
    CHECK(c2(3.0) == doctest::Approx(4.0 / 15).epsilon(1e-15));
    for (double t : {0.5, 1.0, 2.5, 3.0, 4.0, 6.0})
        CHECK(c1(t) + c2(t) + s(t) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK_THROWS_AS(aalen_johansen(d, 0), std::invalid_argument);
    CHECK_THROWS_AS(aalen_johansen(d, 4), std::invalid_argument);
}

TEST_CASE("censoring km removes same-time events from the risk set first") {
    auto d = from_pairs({{1, 1}, {2, 0}, {3, 2}, {3, 1}, {4, 0}});
    StepFunction g = censoring_km(d);
    CHECK(g(1.5) == 1.0);
    CHECK(g(2.0) == doctest::Approx(0.75).epsilon(1e-15));
    CHECK(g.left_limit(3.0) == doctest::Approx(0.75).epsilon(1e-15));
    CHECK(g(3.5) == doctest::Approx(0.75).epsilon(1e-15));
    CHECK(g(4.0) == 0.0);

    // a censoring tied with events: denominator excludes the events
    auto tied = from_pairs({{1, 1}, {2, 1}, {2, 0}, {3, 1}});
    StepFunction g2 = censoring_km(tied);
    // at t=2 the risk set holds 3 subjects, one cause-1 event leaves first
    CHECK(g2(2.0) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("five-record fixture reproduces the weighted sub-distribution") {
    auto d = from_pairs({{1, 1}, {2, 0}, {3, 2}, {3, 1}, {4, 0}});
    CHECK(aalen_johansen(d, 1)(3.0) == doctest::Approx(7.0 / 15).epsilon(1e-15));
    CHECK(aalen_johansen(d, 2)(3.0) == doctest::Approx(4.0 / 15).epsilon(1e-15));

    PseudoMatrix ps = pseudo_observations(d, {1, 2}, {3.0});
    double m1 = 0.0, m2 = 0.0;
    for (std::size_t i = 0; i < 5; ++i) {
        m1 += ps.value(i, 0, 0);
        m2 += ps.value(i, 0, 1);
    }
    CHECK(m1 / 5 == doctest::Approx(7.0 / 15).epsilon(1e-13));
    CHECK(m2 / 5 == doctest::Approx(4.0 / 15).epsilon(1e-13));
}

TEST_CASE("three-record worked example gives exact pseudo-values") {
    auto d = from_pairs({{1, 1}, {2, 0}, {3, 1}});
    PseudoMatrix ps = pseudo_observations(d, {1}, {1.0});
    CHECK(ps.value(0, 0, 0) == 1.0);
    CHECK(ps.value(1, 0, 0) == 0.0);
    CHECK(ps.value(2, 0, 0) == 0.0);
    CHECK(ps.surv(0, 0) == 0.0);
    CHECK(ps.surv(1, 0) == 1.0);
}

TEST_CASE("pseudo-values are exact event indicators without censoring") {
    Rng rng(2024);
    for (int rep = 0; rep < 20; ++rep) {
        SurvivalDataset d = random_dataset(rng, 3 + rng.below(30), false);
        std::vector<double> grid = interior_grid(d);
        PseudoMatrix ps = pseudo_observations(d, {1, 2}, grid);
        for (std::size_t i = 0; i < d.n(); ++i)
            for (std::size_t l = 0; l < grid.size(); ++l) {
                double want1 = (d.records[i].delta == 1 && d.records[i].y <= grid[l]) ? 1.0 : 0.0;
                double want2 = (d.records[i].delta == 2 && d.records[i].y <= grid[l]) ? 1.0 : 0.0;
                CHECK(ps.value(i, l, 0) == want1);
                CHECK(ps.value(i, l, 1) == want2);
            }
    }
}

TEST_CASE("pseudo means recover the estimator on interior grid times") {
    Rng rng(7);
    for (int rep = 0; rep < 40; ++rep) {
        SurvivalDataset d = random_dataset(rng, 4 + rng.below(40), true);
        std::vector<double> grid = interior_grid(d);
        PseudoMatrix ps = pseudo_observations(d, {1, 2, 3}, grid);
        for (std::size_t l = 0; l < grid.size(); ++l) {
            for (std::size_t j = 0; j < 3; ++j) {
                double target = aalen_johansen(d, static_cast<int>(j + 1))(grid[l]);
                double m = 0.0;
                for (std::size_t i = 0; i < d.n(); ++i) m += ps.value(i, l, j);
                CHECK(m / static_cast<double>(d.n()) == doctest::Approx(target).epsilon(1e-12));
            }
            double s = 0.0;
            for (std::size_t i = 0; i < d.n(); ++i) s += ps.surv(i, l);
            CHECK(s / static_cast<double>(d.n()) ==
                  doctest::Approx(kaplan_meier(d)(grid[l])).epsilon(1e-12));
        }
    }
}

TEST_CASE("optimized pseudo sweep matches the naive leave-one-out oracle") {
    Rng rng(314);
    for (int rep = 0; rep < 25; ++rep) {
        SurvivalDataset d = random_dataset(rng, 4 + rng.below(22), true);
        std::vector<double> grid = interior_grid(d);
        PseudoMatrix ps = pseudo_observations(d, {1, 2}, grid);
        for (int cause : {1, 2}) {
            for (std::size_t l = 0; l < grid.size(); ++l) {
                std::vector<double> want = naive_pseudo(d, cause, grid[l]);
                for (std::size_t i = 0; i < d.n(); ++i)
                    CHECK(ps.value(i, l, static_cast<std::size_t>(cause - 1)) ==
                          doctest::Approx(want[i]).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("stratified pseudo equals the per-stratum computation") {
    auto d = from_pairs({{1, 1}, {2, 0}, {3, 2}, {4, 1}, {2, 1}, {3, 0}, {5, 1}});
    const char* labels[] = {"a", "a", "a", "a", "b", "b", "b"};
    for (std::size_t i = 0; i < d.n(); ++i) d.records[i].stratum = labels[i];
    std::vector<double> grid{1.5, 2.0, 3.5};
    PseudoMatrix all = stratified_pseudo_observations(d, {1, 2}, grid);

    auto sub = [&](const char* label) {
        SurvivalDataset s;
        s.p = 0;
        for (const auto& r : d.records)
            if (*r.stratum == label) s.records.push_back(r);
        return s;
    };
    PseudoMatrix pa = pseudo_observations(sub("a"), {1, 2}, grid);
    PseudoMatrix pb = pseudo_observations(sub("b"), {1, 2}, grid);
    for (std::size_t l = 0; l < grid.size(); ++l)
        for (std::size_t j = 0; j < 2; ++j) {
            for (std::size_t i = 0; i < 4; ++i) CHECK(all.value(i, l, j) == pa.value(i, l, j));
            for (std::size_t i = 0; i < 3; ++i) CHECK(all.value(4 + i, l, j) == pb.value(i, l, j));
        }

    d.records[6].stratum.reset();
    CHECK_THROWS_WITH_AS(stratified_pseudo_observations(d, {1}, grid),
                         doctest::Contains("record 7"), std::invalid_argument);
    d.records[6].stratum = "c";
    CHECK_THROWS_WITH_AS(stratified_pseudo_observations(d, {1}, grid),
                         doctest::Contains("stratum 'c'"), std::invalid_argument);
}

TEST_CASE("pseudo computation rejects degenerate inputs") {
    auto d = from_pairs({{1, 1}, {2, 0}});
    CHECK_THROWS_AS(pseudo_observations(d, {1}, {}), std::invalid_argument);
    CHECK_THROWS_AS(pseudo_observations(d, {1}, {0.0}), std::invalid_argument);
    CHECK_THROWS_AS(pseudo_observations(d, {5}, {1.0}), std::invalid_argument);
    auto solo = from_pairs({{1, 1}});
    CHECK_THROWS_AS(pseudo_observations(solo, {1}, {0.5}), std::invalid_argument);
    auto no_events = from_pairs({{1, 0}, {2, 0}});
    CHECK_THROWS_AS(pseudo_observations(no_events, {1}, {0.5}), std::invalid_argument);
}

TEST_CASE("pseudo csv lists every subject-time-cause triple") {
    auto d = from_pairs({{1, 1}, {2, 0}, {3, 2}});
    PseudoMatrix ps = pseudo_observations(d, {1, 2}, {1.5, 2.5});
    std::string path = "psl_test_pseudo.csv";
    ps.write_csv(path);
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    CHECK(line == "subject_id,time,cause,pseudo");
    std::size_t rows = 0;
    while (std::getline(in, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 3 * 2 * 2);
    in.close();
    std::remove(path.c_str());
}
