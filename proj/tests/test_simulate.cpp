#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "psl/simulate.hpp"

using namespace psl;

namespace {

// independent recursive Cox-de Boor evaluation with the same clamped-knot
// conventions, for cross-checking the iterative builder
double deboor(const std::vector<double>& k, std::size_t i, std::size_t d, double t, double hi) {
    if (d == 0) {
        bool inside = k[i] <= t && t < k[i + 1];
        if (t == hi && k[i] < hi && k[i + 1] == hi) inside = true;
        return inside ? 1.0 : 0.0;
    }
    double left = 0.0, right = 0.0;
    double den1 = k[i + d] - k[i];
    double den2 = k[i + d + 1] - k[i + 1];
    if (den1 > 0.0) left = (t - k[i]) / den1 * deboor(k, i, d - 1, t, hi);
    if (den2 > 0.0) right = (k[i + d + 1] - t) / den2 * deboor(k, i + 1, d - 1, t, hi);
    return left + right;
}

Matrix twenty_cols(const std::vector<double>& x1, const std::vector<double>& x2) {
    Matrix x(x1.size(), 20);
    for (std::size_t i = 0; i < x1.size(); ++i) {
        x(i, 0) = x1[i];
        x(i, 1) = x2[i];
    }
    return x;
}

double column_mean(const Matrix& x, std::size_t j) {
    double m = 0.0;
    for (std::size_t i = 0; i < x.n; ++i) m += x(i, j);
    return m / static_cast<double>(x.n);
}

double column_sd(const Matrix& x, std::size_t j) {
    double m = column_mean(x, j), v = 0.0;
    for (std::size_t i = 0; i < x.n; ++i) {
        double d = x(i, j) - m;
        v += d * d;
    }
    return std::sqrt(v / static_cast<double>(x.n - 1));
}

double column_corr(const Matrix& x, std::size_t a, std::size_t b) {
    double ma = column_mean(x, a), mb = column_mean(x, b);
    double num = 0.0, va = 0.0, vb = 0.0;
    for (std::size_t i = 0; i < x.n; ++i) {
        num += (x(i, a) - ma) * (x(i, b) - mb);
        va += (x(i, a) - ma) * (x(i, a) - ma);
        vb += (x(i, b) - mb) * (x(i, b) - mb);
    }
    return num / std::sqrt(va * vb);
}

}  // namespace

TEST_CASE("scenario names round-trip and reject unknowns") {
    for (Scenario s : {Scenario::S0, Scenario::A, Scenario::B, Scenario::C, Scenario::D})
        CHECK(scenario_from_string(to_string(s)) == s);
    CHECK(scenario_from_string("a") == Scenario::A);
    CHECK(scenario_from_string("s0") == Scenario::S0);
    CHECK_THROWS_AS(scenario_from_string("E"), std::invalid_argument);
}

TEST_CASE("scenario config survives json and validates its fields") {
    ScenarioConfig c;
    c.scenario = Scenario::C;
    c.n = 123;
    c.censoring_target = 0.5;
    c.t_star = 19.0;
    c.gamma2 = 3.0;
    c.kappa2 = 2.0;
    c.seed = 99;
    c.quantile_exponent_literal = true;
    ScenarioConfig back = ScenarioConfig::from_json(nlohmann::json::parse(c.to_json().dump()));
    CHECK(back.scenario == Scenario::C);
    CHECK(back.n == 123);
    CHECK(back.censoring_target == 0.5);
    CHECK(back.t_star == 19.0);
    CHECK(back.gamma2 == 3.0);
    CHECK(back.kappa2 == 2.0);
    CHECK(back.seed == 99);
    CHECK(back.quantile_exponent_literal);

    // omitted fields fall back to the defaults
    ScenarioConfig sparse = ScenarioConfig::from_json(nlohmann::json{{"scenario", "A"}});
    CHECK(sparse.n == 500);
    CHECK(sparse.t_star == 26.5);
    CHECK(sparse.censoring_target == 0.2);
    CHECK_FALSE(sparse.quantile_exponent_literal);

    CHECK_THROWS_AS(
        ScenarioConfig::from_json(nlohmann::json{{"scenario", "A"}, {"censoring_target", 1.5}}),
        std::invalid_argument);
    CHECK_THROWS_AS(ScenarioConfig::from_json(nlohmann::json{{"scenario", "A"}, {"n", 0}}),
                    std::invalid_argument);
    CHECK_THROWS_AS(ScenarioConfig::from_json(nlohmann::json{{"scenario", "A"}, {"t_star", -1.0}}),
                    std::invalid_argument);
}

TEST_CASE("covariate blocks have the designed moments and cross-correlation") {
    Rng rng(17);
    Matrix x = gen_covariates(40000, rng);
    REQUIRE(x.p == 20);

    for (std::size_t j = 0; j < 20; ++j) CHECK(std::abs(column_mean(x, j)) < 0.02);
    CHECK(column_sd(x, 0) == doctest::Approx(0.1).epsilon(0.03));
    // x6 = 0.25 * sum(x1..x5) + noise(0.1): sd = sqrt(5 * 0.25^2 * 0.01 + 0.01)
    CHECK(column_sd(x, 5) == doctest::Approx(std::sqrt(0.013125)).epsilon(0.03));
    // corr(x1, x6) = 0.25 * 0.01 / (0.1 * sd(x6))
    double want = 0.0025 / (0.1 * std::sqrt(0.013125));
    CHECK(std::abs(column_corr(x, 0, 5) - want) < 0.02);
    // the last block is mostly independent noise
    CHECK(column_sd(x, 19) == doctest::Approx(0.65).epsilon(0.05));

    CHECK_THROWS_AS(gen_covariates(0, rng), std::invalid_argument);
}

TEST_CASE("spline basis matches a recursive evaluation and sums to one") {
    Rng rng(23);
    for (std::size_t degree : {1u, 2u, 3u}) {
        std::vector<double> interior{-0.4, 0.1, 0.9};
        double lo = -1.5, hi = 2.0;
        std::vector<double> knots;
        for (std::size_t k = 0; k <= degree; ++k) knots.push_back(lo);
        for (double t : interior) knots.push_back(t);
        for (std::size_t k = 0; k <= degree; ++k) knots.push_back(hi);

        std::vector<double> probes{lo, -0.4, 0.1, 0.9, hi, -1.2, 0.33, 1.99, -2.5, 3.0};
        for (int r = 0; r < 30; ++r) probes.push_back(rng.uniform(lo, hi));
        Matrix basis = bspline_basis(probes, interior, lo, hi, degree);
        REQUIRE(basis.p == interior.size() + degree + 1);
        for (std::size_t r = 0; r < probes.size(); ++r) {
            double t = std::clamp(probes[r], lo, hi);
            double sum = 0.0;
            for (std::size_t j = 0; j < basis.p; ++j) {
                double want = deboor(knots, j, degree, t, hi);
                CHECK(basis(r, j) == doctest::Approx(want).epsilon(1e-12));
                CHECK(basis(r, j) >= 0.0);
                sum += basis(r, j);
            }
            CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
    CHECK_THROWS_AS(bspline_basis({0.0}, {}, 1.0, 1.0, 3), std::invalid_argument);
    CHECK_THROWS_AS(bspline_basis({0.0}, {2.0, -2.0}, -1.0, 1.0, 3), std::invalid_argument);
}

TEST_CASE("degree-one spline is the familiar hat basis") {
    Matrix b = bspline_basis({0.0, 0.25, 0.5, 1.0}, {0.5}, 0.0, 1.0, 1);
    REQUIRE(b.p == 3);
    CHECK(b(0, 0) == 1.0);
    CHECK(b(1, 0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(b(1, 1) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(b(2, 1) == 1.0);
    CHECK(b(3, 2) == 1.0);
}

TEST_CASE("scale models reproduce their published formulas") {
    std::vector<double> x1{0.0, 0.2, -0.1};
    std::vector<double> x2{0.1, 0.0, 0.3};
    Matrix x = twenty_cols(x1, x2);
    x(0, 5) = 0.4;
    x(0, 10) = -0.2;
    x(0, 15) = -0.3;
    x(0, 19) = 0.25;

    ScaleModel a = scale_model(Scenario::A, x);
    CHECK(a.gamma1[0] == doctest::Approx(std::exp(-2.0)).epsilon(1e-15));
    CHECK(a.gamma1[1] == doctest::Approx(std::exp(-2.0 + 2.5 * 0.2)).epsilon(1e-15));
    CHECK(a.delta1.empty());

    ScaleModel c = scale_model(Scenario::C, x);
    double z0 = 0.0, z1 = 0.4, z2 = -0.2, z3 = -0.3, z4 = 0.25;
    double lin = (1.1 * z0 + 1.4 * z1 - 2.1 * z2 - 1.2 * z3 - 2.3 * z4 - 1.5 * z0 * z1 +
                  6.7 * std::cos(z2 / 0.1) + 0.5 * std::min(z3, 0.0)) /
                 4.0;
    CHECK(c.gamma1[0] == doctest::Approx(std::exp(lin)).epsilon(1e-12));
    CHECK(c.delta1.empty());

    ScaleModel d = scale_model(Scenario::D, x);
    CHECK(d.gamma1[0] == doctest::Approx(c.gamma1[0]).epsilon(1e-15));
    double dlin = (1.1 * z0 + 1.4 * z1 - 2.1 * z2 - 1.2 * z3 - 2.3 * z4) / 3.0;
    CHECK(d.delta1[0] == doctest::Approx(std::exp(dlin)).epsilon(1e-12));

    Rng rng(5);
    ScaleModel null1 = scale_model(Scenario::S0, x, &rng);
    for (double g : null1.gamma1) CHECK(g > 0.0);
    Rng rng2(5);
    ScaleModel null2 = scale_model(Scenario::S0, x, &rng2);
    CHECK(null1.gamma1 == null2.gamma1);
    CHECK_THROWS_AS(scale_model(Scenario::S0, x), std::invalid_argument);
    CHECK_THROWS_AS(scale_model(Scenario::A, Matrix(3, 4)), std::invalid_argument);

    ScaleModel b = scale_model(Scenario::B, gen_covariates(50, rng));
    for (double g : b.gamma1) {
        CHECK(g > 0.0);
        CHECK(std::isfinite(g));
    }
}

TEST_CASE("rescaling pins the homogeneous incidence targets at t_star") {
    ScenarioConfig cfg;
    cfg.t_star = 26.5;
    cfg.gamma2 = 3.5;
    cfg.kappa2 = 2.5;
    std::vector<double> flat_g(40, 3.7), flat_k(40, 0.9);
    Rescaled rs = rescale_scales(flat_g, flat_k, cfg);

    // all scales equal means gamma_star == c_gamma, and then by construction
    // P(T1 <= t*) = 0.2 and P(T2 <= t*) = 0.07
    CHECK(rs.gamma_star[0] == doctest::Approx(rs.c_gamma).epsilon(1e-12));
    CHECK(rs.kappa_star[0] == doctest::Approx(rs.c_kappa).epsilon(1e-12));
    double p1 = 1.0 - std::exp(-std::pow(cfg.t_star / rs.gamma_star[0], cfg.gamma2));
    double p2 = 1.0 - std::exp(-std::pow(cfg.t_star / rs.kappa_star[0], cfg.kappa2));
    CHECK(p1 == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(p2 == doctest::Approx(0.07).epsilon(1e-12));
    CHECK(rs.c_gamma == doctest::Approx(26.5 / std::pow(-std::log(0.8), 1.0 / 3.5)).epsilon(1e-15));

    // heterogeneous scales keep the mean inverse ratio at one
    std::vector<double> het_g{1.0, 2.0, 4.0, 0.5}, het_k{3.0, 0.2, 1.0, 1.0};
    Rescaled hs = rescale_scales(het_g, het_k, cfg);
    double mg = 0.0, mk = 0.0;
    for (double g : hs.gamma_star) mg += hs.c_gamma / g;
    for (double k : hs.kappa_star) mk += hs.c_kappa / k;
    CHECK(mg / 4.0 == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(mk / 4.0 == doctest::Approx(1.0).epsilon(1e-12));

    ScenarioConfig lit = cfg;
    lit.quantile_exponent_literal = true;
    Rescaled ls = rescale_scales(flat_g, flat_k, lit);
    CHECK(ls.c_gamma == doctest::Approx(26.5 / std::pow(-std::log(0.8), -3.5)).epsilon(1e-15));
    CHECK(ls.c_gamma != doctest::Approx(rs.c_gamma).epsilon(1e-6));

    CHECK_THROWS_AS(rescale_scales({}, {}, cfg), std::invalid_argument);
    CHECK_THROWS_AS(rescale_scales({1.0}, {1.0, 2.0}, cfg), std::invalid_argument);
    CHECK_THROWS_AS(rescale_scales({-1.0}, {1.0}, cfg), std::invalid_argument);
}

TEST_CASE("latent times follow the requested weibull laws") {
    ScenarioConfig cfg;
    cfg.gamma2 = 3.5;
    cfg.kappa2 = 2.5;
    std::size_t n = 30000;
    std::vector<double> gs(n, 2.0), ks(n, 5.0);
    Rng rng(31);
    LatentTimes lt = sample_times(gs, ks, cfg, rng);
    double hit1 = 0.0, hit2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        hit1 += lt.t1[i] <= 2.0 ? 1.0 : 0.0;
        hit2 += lt.t2[i] <= 5.0 ? 1.0 : 0.0;
    }
    double want = 1.0 - std::exp(-1.0);
    CHECK(std::abs(hit1 / static_cast<double>(n) - want) < 0.01);
    CHECK(std::abs(hit2 / static_cast<double>(n) - want) < 0.01);

    Rng rng2(31);
    CHECK_THROWS_AS(sample_times({1.0, 2.0}, {1.0}, cfg, rng2), std::invalid_argument);
}

TEST_CASE("uniform censoring is calibrated to the requested share") {
    Rng rng(37);
    std::size_t n = 8000;
    std::vector<double> events(n);
    for (double& e : events) e = rng.weibull(30.0, 3.0);
    for (double target : {0.2, 0.5}) {
        std::vector<double> cens = gen_censoring(Scenario::A, events, {}, target, rng);
        double share = 0.0;
        for (std::size_t i = 0; i < n; ++i) share += cens[i] < events[i] ? 1.0 : 0.0;
        CHECK(std::abs(share / static_cast<double>(n) - target) < 0.03);
    }

    std::vector<double> flat(50, 4.0);
    CHECK_THROWS_AS(gen_censoring(Scenario::A, flat, {}, 0.2, rng), std::invalid_argument);
    CHECK_THROWS_AS(gen_censoring(Scenario::D, {1.0, 2.0}, {1.0}, 0.2, rng),
                    std::invalid_argument);

    std::vector<double> scales(200, 15.0);
    std::vector<double> ev(200, 10.0);
    std::vector<double> dc = gen_censoring(Scenario::D, ev, scales, 0.2, rng);
    for (double c : dc) CHECK(c > 0.0);
}

TEST_CASE("true cif matches the closed form for exponential latent times") {
    // with unit shapes both laws are exponential and the integral is explicit
    for (auto [g, k, t] : {std::tuple{2.0, 3.0, 1.7}, {1.0, 1.0, 2.0}, {5.0, 0.7, 0.9}}) {
        double rate = 1.0 / g + 1.0 / k;
        double want = (1.0 - std::exp(-t / k)) -
                      (1.0 / k) / rate * (1.0 - std::exp(-t * rate)) +
                      (1.0 - std::exp(-t / g)) * std::exp(-t / k);
        CHECK(true_cif(g, 1.0, k, 1.0, t) == doctest::Approx(want).epsilon(1e-8));
    }
}

TEST_CASE("true cif matches the closed form for equal weibull shapes") {
    double s = 3.5;
    for (auto [g, k, t] : {std::tuple{40.0, 55.0, 26.5}, {20.0, 80.0, 26.5}, {2.0, 1.0, 1.5}}) {
        double ag = std::pow(g, -s), ak = std::pow(k, -s);
        double ts = std::pow(t, s);
        double want = (1.0 - std::exp(-ak * ts)) -
                      ak / (ag + ak) * (1.0 - std::exp(-(ag + ak) * ts)) +
                      (1.0 - std::exp(-ag * ts)) * std::exp(-ak * ts);
        CHECK(true_cif(g, s, k, s, t) == doctest::Approx(want).epsilon(1e-8));
    }
    CHECK_THROWS_AS(true_cif(-1.0, 3.5, 1.0, 2.5, 26.5), std::invalid_argument);
    CHECK_THROWS_AS(true_cif(1.0, 3.5, 1.0, 0.0, 26.5), std::invalid_argument);
}

TEST_CASE("true cif agrees with direct latent simulation") {
    Rng rng(43);
    double g = 40.0, k = 60.0, t = 26.5;
    double cif = true_cif(g, 3.5, k, 2.5, t);
    std::size_t n = 200000;
    double hits = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double t1 = rng.weibull(g, 3.5), t2 = rng.weibull(k, 2.5);
        hits += (t1 <= t && t1 <= t2) ? 1.0 : 0.0;
    }
    double mc = hits / static_cast<double>(n);
    double se = std::sqrt(cif * (1.0 - cif) / static_cast<double>(n));
    CHECK(std::abs(mc - cif) < 4.0 * se + 1e-6);
}

TEST_CASE("scenario generation is deterministic and structurally sound") {
    ScenarioConfig cfg;
    cfg.scenario = Scenario::A;
    cfg.n = 400;
    cfg.seed = 2024;
    ScenarioDraw one = generate_scenario(cfg);
    ScenarioDraw two = generate_scenario(cfg);

    REQUIRE(one.train.n() == 400);
    REQUIRE(one.validation.n() == 400);
    REQUIRE(one.train_truth.size() == 400);
    CHECK(one.train.p == 20);
    CHECK(one.train.feature_names.front() == "x1");
    CHECK(one.train.feature_names.back() == "x20");

    bool same = true, train_vs_val = false;
    for (std::size_t i = 0; i < 400; ++i) {
        same = same && one.train.records[i].y == two.train.records[i].y &&
               one.train.records[i].delta == two.train.records[i].delta &&
               one.train.records[i].x == two.train.records[i].x &&
               one.train_truth[i].true_cif == two.train_truth[i].true_cif;
        train_vs_val = train_vs_val || one.train.records[i].y != one.validation.records[i].y;
    }
    CHECK(same);
    CHECK(train_vs_val);

    for (std::size_t i = 0; i < 400; ++i) {
        const Record& r = one.train.records[i];
        CHECK(r.y > 0.0);
        CHECK(r.delta >= 0);
        CHECK(r.delta <= 2);
        const TruthRecord& tr = one.train_truth[i];
        CHECK(tr.true_cif > 0.0);
        CHECK(tr.true_cif < 1.0);
        CHECK(tr.t_latent_1 > 0.0);
        CHECK(tr.t_latent_2 > 0.0);
        // observed time can only be the earliest latent time or earlier
        CHECK(r.y <= std::min(tr.t_latent_1, tr.t_latent_2) + 1e-12);
    }

    ScenarioConfig other = cfg;
    other.seed = 2025;
    ScenarioDraw three = generate_scenario(other);
    bool differs = false;
    for (std::size_t i = 0; i < 400; ++i)
        differs = differs || three.train.records[i].y != one.train.records[i].y;
    CHECK(differs);
}

TEST_CASE("generated censoring share lands near the configured target") {
    ScenarioConfig cfg;
    cfg.scenario = Scenario::A;
    cfg.n = 4000;
    cfg.seed = 7;
    for (double target : {0.2, 0.5}) {
        cfg.censoring_target = target;
        ScenarioDraw draw = generate_scenario(cfg);
        double censored = 0.0, cause1 = 0.0, cause2 = 0.0;
        for (const Record& r : draw.train.records) {
            censored += r.delta == 0 ? 1.0 : 0.0;
            cause1 += r.delta == 1 && r.y <= cfg.t_star ? 1.0 : 0.0;
            cause2 += r.delta == 2 && r.y <= cfg.t_star ? 1.0 : 0.0;
        }
        CHECK(std::abs(censored / 4000.0 - target) < 0.04);
        CHECK(cause1 / 4000.0 > 0.1);
        CHECK(cause1 / 4000.0 < 0.35);
        CHECK(cause2 / 4000.0 > 0.01);
    }
}

TEST_CASE("every scenario generates a usable draw") {
    for (Scenario s : {Scenario::S0, Scenario::A, Scenario::B, Scenario::C, Scenario::D}) {
        ScenarioConfig cfg;
        cfg.scenario = s;
        cfg.n = 300;
        cfg.seed = 11;
        ScenarioDraw draw = generate_scenario(cfg);
        std::size_t events = 0, censored = 0;
        for (const Record& r : draw.train.records) {
            CHECK(r.y > 0.0);
            if (r.delta > 0)
                ++events;
            else
                ++censored;
        }
        CHECK(events > 0);
        CHECK(censored > 0);
        for (const TruthRecord& tr : draw.train_truth) {
            CHECK(tr.true_cif >= 0.0);
            CHECK(tr.true_cif <= 1.0);
        }
    }
}
