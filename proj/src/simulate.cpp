#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "psl/simulate.hpp"

namespace psl {

namespace {

constexpr double kBetaB[11] = {.75, .5, 6.1, 1.02, -2.03, 1, 2, 1, .6, .1, 3};
constexpr double kBetaC[8] = {1.1 / 4, 1.4 / 4, -2.1 / 4, -1.2 / 4,
                              -2.3 / 4, -1.5 / 4, 6.7 / 4, .5 / 4};
constexpr double kAlphaD[5] = {1.1 / 3, 1.4 / 3, -2.1 / 3, -1.2 / 3, -2.3 / 3};

double weibull_cdf(double t, double scale, double shape) {
    if (t <= 0.0) return 0.0;
    return 1.0 - std::exp(-std::pow(t / scale, shape));
}

double weibull_pdf(double t, double scale, double shape) {
    if (t <= 0.0) return 0.0;
    double z = t / scale;
    return (shape / scale) * std::pow(z, shape - 1.0) * std::exp(-std::pow(z, shape));
}

// First four columns of the degree-3 basis over the column's own sample
// quantile knots.
Matrix spline_block(const std::vector<double>& col) {
    double lo = *std::min_element(col.begin(), col.end());
    double hi = *std::max_element(col.begin(), col.end());
    std::vector<double> interior = {quantile(col, 0.25), quantile(col, 0.5), quantile(col, 0.75)};
    Matrix full = bspline_basis(col, interior, lo, hi, 3);
    Matrix out(col.size(), 4);
    for (std::size_t i = 0; i < col.size(); ++i)
        for (std::size_t j = 0; j < 4; ++j) out(i, j) = full(i, j);
    return out;
}

}  // namespace

Scenario scenario_from_string(const std::string& name) {
    if (name == "0" || name == "S0" || name == "s0") return Scenario::S0;
    if (name == "A" || name == "a") return Scenario::A;
    if (name == "B" || name == "b") return Scenario::B;
    if (name == "C" || name == "c") return Scenario::C;
    if (name == "D" || name == "d") return Scenario::D;
    throw std::invalid_argument("unknown scenario '" + name + "'");
}

std::string to_string(Scenario scenario) {
    switch (scenario) {
        case Scenario::S0: return "0";
        case Scenario::A: return "A";
        case Scenario::B: return "B";
        case Scenario::C: return "C";
        case Scenario::D: return "D";
    }
    return "?";
}

nlohmann::ordered_json ScenarioConfig::to_json() const {
    nlohmann::ordered_json j;
    j["schema_version"] = 1;
    j["scenario"] = psl::to_string(scenario);
    j["n"] = n;
    j["censoring_target"] = censoring_target;
    j["t_star"] = t_star;
    j["gamma2"] = gamma2;
    j["kappa2"] = kappa2;
    j["seed"] = seed;
    j["quantile_exponent_literal"] = quantile_exponent_literal;
    return j;
}

ScenarioConfig ScenarioConfig::from_json(const nlohmann::json& j) {
    ScenarioConfig c;
    c.scenario = scenario_from_string(j.at("scenario").get<std::string>());
    if (j.contains("n")) c.n = j.at("n").get<std::size_t>();
    if (j.contains("censoring_target")) c.censoring_target = j.at("censoring_target").get<double>();
    if (j.contains("t_star")) c.t_star = j.at("t_star").get<double>();
    if (j.contains("gamma2")) c.gamma2 = j.at("gamma2").get<double>();
    if (j.contains("kappa2")) c.kappa2 = j.at("kappa2").get<double>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("quantile_exponent_literal"))
        c.quantile_exponent_literal = j.at("quantile_exponent_literal").get<bool>();
    if (c.censoring_target <= 0.0 || c.censoring_target >= 1.0)
        throw std::invalid_argument("censoring_target must lie in (0,1)");
    if (c.gamma2 <= 0.0 || c.kappa2 <= 0.0 || c.t_star <= 0.0 || c.n == 0)
        throw std::invalid_argument("shape, t_star and n must be positive");
    return c;
}

Matrix gen_covariates(std::size_t n, Rng& rng) {
    if (n == 0) throw std::invalid_argument("need at least one subject");
    Matrix x(n, 20);
    for (std::size_t i = 0; i < n; ++i) {
        double s1 = 0.0, s2 = 0.0, s3 = 0.0;
        for (std::size_t j = 0; j < 5; ++j) {
            x(i, j) = rng.normal(0.0, 0.1);
            s1 += x(i, j);
        }
        for (std::size_t j = 5; j < 10; ++j) {
            x(i, j) = 0.25 * s1 + rng.normal(0.0, 0.1);
            s2 += x(i, j);
        }
        for (std::size_t j = 10; j < 15; ++j) {
            x(i, j) = 0.15 * s2 + rng.normal(0.0, 0.5);
            s3 += x(i, j);
        }
        for (std::size_t j = 15; j < 20; ++j) x(i, j) = 0.05 * s3 + rng.normal(0.0, 0.65);
    }
    return x;
}

Matrix bspline_basis(const std::vector<double>& x, const std::vector<double>& interior, double lo,
                     double hi, std::size_t degree) {
    if (hi <= lo) throw std::invalid_argument("spline boundary is degenerate");
    std::vector<double> knots;
    for (std::size_t k = 0; k <= degree; ++k) knots.push_back(lo);
    for (double t : interior) knots.push_back(t);
    for (std::size_t k = 0; k <= degree; ++k) knots.push_back(hi);
    if (!std::is_sorted(knots.begin(), knots.end()))
        throw std::invalid_argument("interior knots must lie inside [lo, hi] in order");
    const std::size_t nb = interior.size() + degree + 1;

    Matrix out(x.size(), nb);
    std::vector<double> b(knots.size() - 1);
    for (std::size_t r = 0; r < x.size(); ++r) {
        double t = std::clamp(x[r], lo, hi);
        // degree 0, with the interval touching hi closed on the right
        for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
            bool inside = knots[i] <= t && t < knots[i + 1];
            if (t == hi && knots[i] < hi && knots[i + 1] == hi) inside = true;
            b[i] = inside ? 1.0 : 0.0;
        }
        for (std::size_t d = 1; d <= degree; ++d) {
            for (std::size_t i = 0; i + d + 1 < knots.size(); ++i) {
                double left = 0.0, right = 0.0;
                double den1 = knots[i + d] - knots[i];
                double den2 = knots[i + d + 1] - knots[i + 1];
                if (den1 > 0.0) left = (t - knots[i]) / den1 * b[i];
                if (den2 > 0.0) right = (knots[i + d + 1] - t) / den2 * b[i + 1];
                b[i] = left + right;
            }
        }
        for (std::size_t j = 0; j < nb; ++j) out(r, j) = b[j];
    }
    return out;
}

ScaleModel scale_model(Scenario scenario, const Matrix& x, Rng* rng) {
    const std::size_t n = x.n;
    if (x.p < 20) throw std::invalid_argument("scale model expects the 20-column design");
    ScaleModel out;
    out.gamma1.resize(n);
    switch (scenario) {
        case Scenario::S0: {
            if (!rng) throw std::invalid_argument("the null scenario draws random scales");
            for (std::size_t i = 0; i < n; ++i) out.gamma1[i] = std::exp(rng->normal(0.0, 0.35));
            break;
        }
        case Scenario::A: {
            for (std::size_t i = 0; i < n; ++i) out.gamma1[i] = std::exp(-2.0 + 2.5 * x(i, 0));
            break;
        }
        case Scenario::B: {
            std::vector<double> x1(n), x6(n);
            for (std::size_t i = 0; i < n; ++i) {
                x1[i] = x(i, 0);
                x6[i] = x(i, 5);
            }
            Matrix b1 = spline_block(x1);
            Matrix b6 = spline_block(x6);
            for (std::size_t i = 0; i < n; ++i) {
                double lin = kBetaB[0] * x1[i] + kBetaB[1] * x6[i] + kBetaB[2] * x1[i] * x6[i];
                for (std::size_t j = 0; j < 4; ++j) {
                    lin += kBetaB[3 + j] * b1(i, j);
                    lin += kBetaB[7 + j] * b6(i, j);
                }
                out.gamma1[i] = std::exp(6.0 + lin);
            }
            break;
        }
        case Scenario::C:
        case Scenario::D: {
            for (std::size_t i = 0; i < n; ++i) {
                double z0 = x(i, 0), z1 = x(i, 5), z2 = x(i, 10), z3 = x(i, 15), z4 = x(i, 19);
                double lin = kBetaC[0] * z0 + kBetaC[1] * z1 + kBetaC[2] * z2 + kBetaC[3] * z3 +
                             kBetaC[4] * z4 + kBetaC[5] * z0 * z1 + kBetaC[6] * std::cos(z2 / 0.1) +
                             kBetaC[7] * (z3 < 0.0 ? z3 : 0.0);
                out.gamma1[i] = std::exp(lin);
            }
            if (scenario == Scenario::D) {
                out.delta1.resize(n);
                for (std::size_t i = 0; i < n; ++i) {
                    double lin = kAlphaD[0] * x(i, 0) + kAlphaD[1] * x(i, 5) +
                                 kAlphaD[2] * x(i, 10) + kAlphaD[3] * x(i, 15) +
                                 kAlphaD[4] * x(i, 19);
                    out.delta1[i] = std::exp(lin);
                }
            }
            break;
        }
    }
    return out;
}

Rescaled rescale_scales(const std::vector<double>& gamma1, const std::vector<double>& kappa1,
                        const ScenarioConfig& config) {
    if (gamma1.size() != kappa1.size() || gamma1.empty())
        throw std::invalid_argument("scale vectors must be nonempty and equally long");
    for (double g : gamma1)
        if (!(g > 0.0)) throw std::invalid_argument("nonpositive surgery scale");
    for (double k : kappa1)
        if (!(k > 0.0)) throw std::invalid_argument("nonpositive death scale");

    Rescaled out;
    double eg = config.quantile_exponent_literal ? -config.gamma2 : 1.0 / config.gamma2;
    double ek = config.quantile_exponent_literal ? -config.kappa2 : 1.0 / config.kappa2;
    out.c_gamma = config.t_star / std::pow(-std::log(0.8), eg);
    out.c_kappa = config.t_star / std::pow(-std::log(0.93), ek);

    double n = static_cast<double>(gamma1.size());
    double mg = 0.0, mk = 0.0;
    for (double g : gamma1) mg += out.c_gamma / g;
    for (double k : kappa1) mk += out.c_kappa / k;
    mg /= n;
    mk /= n;
    out.gamma_star.resize(gamma1.size());
    out.kappa_star.resize(kappa1.size());
    for (std::size_t i = 0; i < gamma1.size(); ++i) {
        out.gamma_star[i] = gamma1[i] * mg;
        out.kappa_star[i] = kappa1[i] * mk;
    }
    return out;
}

LatentTimes sample_times(const std::vector<double>& gamma_star,
                         const std::vector<double>& kappa_star, const ScenarioConfig& config,
                         Rng& rng) {
    if (gamma_star.size() != kappa_star.size())
        throw std::invalid_argument("scale vectors must be equally long");
    LatentTimes out;
    out.t1.resize(gamma_star.size());
    out.t2.resize(kappa_star.size());
    for (std::size_t i = 0; i < gamma_star.size(); ++i) {
        out.t1[i] = rng.weibull(gamma_star[i], config.gamma2);
        out.t2[i] = rng.weibull(kappa_star[i], config.kappa2);
    }
    return out;
}

std::vector<double> gen_censoring(Scenario scenario, const std::vector<double>& event_times,
                                  const std::vector<double>& delta1, double censoring_target,
                                  Rng& rng) {
    const std::size_t n = event_times.size();
    std::vector<double> out(n);
    if (scenario == Scenario::D) {
        if (delta1.size() != n) throw std::invalid_argument("scenario D needs censoring scales");
        for (std::size_t i = 0; i < n; ++i) out[i] = rng.exponential(delta1[i]);
        return out;
    }

    double a = quantile(event_times, 0.05);
    double top = *std::max_element(event_times.begin(), event_times.end());
    if (!(top > a)) throw std::invalid_argument("event times are too concentrated to censor");

    // expected censored fraction when C ~ U(a, b), censoring on C < event
    auto expected = [&](double b) {
        double acc = 0.0;
        for (double e : event_times) acc += std::clamp((e - a) / (b - a), 0.0, 1.0);
        return acc / static_cast<double>(n);
    };
    double lo = a + 1e-12 * (top - a), hi = top;
    while (expected(hi) > censoring_target) hi = a + 2.0 * (hi - a);
    for (int iter = 0; iter < 100; ++iter) {
        double mid = 0.5 * (lo + hi);
        if (expected(mid) > censoring_target)
            lo = mid;
        else
            hi = mid;
    }
    double b = 0.5 * (lo + hi);
    for (std::size_t i = 0; i < n; ++i) out[i] = rng.uniform(a, b);
    return out;
}

double true_cif(double gamma_i, double gamma2, double kappa_i, double kappa2, double t_star) {
    if (!(gamma_i > 0.0) || !(kappa_i > 0.0) || !(gamma2 > 0.0) || !(kappa2 > 0.0))
        throw std::invalid_argument("true_cif needs positive parameters");
    auto integrand = [&](double u) {
        return weibull_cdf(u, gamma_i, gamma2) * weibull_pdf(u, kappa_i, kappa2);
    };
    double error = 0.0;
    double first = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(
        integrand, 0.0, t_star, 12, 1e-8, &error);
    double second = weibull_cdf(t_star, gamma_i, gamma2) * (1.0 - weibull_cdf(t_star, kappa_i, kappa2));
    return first + second;
}

ScenarioDraw generate_scenario(const ScenarioConfig& config) {
    Rng root(config.seed, 0x5ce0u);

    auto one_split = [&](std::uint64_t index, SurvivalDataset& data,
                         std::vector<TruthRecord>& truth) {
        Rng rng = root.derive(index);
        Matrix x = gen_covariates(config.n, rng);
        ScaleModel scales = scale_model(config.scenario, x, &rng);
        std::vector<double> kappa1(config.n);
        for (std::size_t i = 0; i < config.n; ++i) kappa1[i] = std::exp(2.5 * x(i, 1));
        Rescaled rs = rescale_scales(scales.gamma1, kappa1, config);
        LatentTimes latent = sample_times(rs.gamma_star, rs.kappa_star, config, rng);
        std::vector<double> events(config.n);
        for (std::size_t i = 0; i < config.n; ++i) events[i] = std::min(latent.t1[i], latent.t2[i]);
        std::vector<double> censor = gen_censoring(config.scenario, events, scales.delta1,
                                                   config.censoring_target, rng);

        data.p = 20;
        data.feature_names.clear();
        for (std::size_t j = 1; j <= 20; ++j) data.feature_names.push_back("x" + std::to_string(j));
        data.records.resize(config.n);
        truth.resize(config.n);
        for (std::size_t i = 0; i < config.n; ++i) {
            Record& rec = data.records[i];
            rec.x = x.row(i);
            double t1 = latent.t1[i], t2 = latent.t2[i], c = censor[i];
            if (t1 <= t2 && t1 <= c) {
                rec.y = t1;
                rec.delta = 1;
            } else if (t2 <= c) {
                rec.y = t2;
                rec.delta = 2;
            } else {
                rec.y = c;
                rec.delta = 0;
            }
            truth[i].t_latent_1 = t1;
            truth[i].t_latent_2 = t2;
            truth[i].true_cif =
                true_cif(rs.gamma_star[i], config.gamma2, rs.kappa_star[i], config.kappa2,
                         config.t_star);
        }
        data.validate();
    };

    ScenarioDraw draw;
    one_split(0, draw.train, draw.train_truth);
    one_split(1, draw.validation, draw.validation_truth);
    return draw;
}

}  // namespace psl
