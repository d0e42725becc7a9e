#include "psl/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>

namespace psl {

double StepFunction::operator()(double t) const {
    auto it = std::upper_bound(jump_times.begin(), jump_times.end(), t);
    if (it == jump_times.begin()) return value_at_zero;
    return values[static_cast<std::size_t>(it - jump_times.begin()) - 1];
}

double StepFunction::left_limit(double t) const {
    auto it = std::lower_bound(jump_times.begin(), jump_times.end(), t);
    if (it == jump_times.begin()) return value_at_zero;
    return values[static_cast<std::size_t>(it - jump_times.begin()) - 1];
}

namespace {

struct TimeRow {
    double t;
    int d_event;   // deaths from any cause at t
    int d_cause1;  // filled per requested cause
    int d_censor;
    int at_risk;
};

// Distinct observed times with per-time counts; at_risk counts y >= t.
std::vector<TimeRow> tabulate(const SurvivalDataset& d) {
    std::map<double, TimeRow> rows;
    for (const Record& r : d.records) {
        auto& row = rows.try_emplace(r.y, TimeRow{r.y, 0, 0, 0, 0}).first->second;
        if (r.delta == 0)
            row.d_censor++;
        else
            row.d_event++;
    }
    std::vector<TimeRow> out;
    out.reserve(rows.size());
    for (auto& [t, row] : rows) out.push_back(row);
    int remaining = static_cast<int>(d.n());
    for (auto& row : out) {
        row.at_risk = remaining;
        remaining -= row.d_event + row.d_censor;
    }
    return out;
}

void require_nonempty(const SurvivalDataset& d) {
    if (d.records.empty()) throw std::invalid_argument("empty dataset");
    d.validate();
}

}  // namespace

StepFunction kaplan_meier(const SurvivalDataset& dataset) {
    require_nonempty(dataset);
    StepFunction s;
    s.value_at_zero = 1.0;
    double surv = 1.0;
    for (const TimeRow& row : tabulate(dataset)) {
        if (row.d_event == 0) continue;
        surv *= 1.0 - static_cast<double>(row.d_event) / row.at_risk;
        s.jump_times.push_back(row.t);
        s.values.push_back(surv);
    }
    return s;
}

StepFunction aalen_johansen(const SurvivalDataset& dataset, int cause) {
    require_nonempty(dataset);
    if (cause < 1 || cause > 3) throw std::invalid_argument("cause must be in {1,2,3}");
    StepFunction c;
    c.value_at_zero = 0.0;
    double surv_left = 1.0, cif = 0.0;
    for (const TimeRow& row : tabulate(dataset)) {
        if (row.d_event == 0) continue;
        int d_cause = 0;
        for (const Record& r : dataset.records)
            if (r.y == row.t && r.delta == cause) d_cause++;
        if (d_cause > 0) {
            cif += surv_left * static_cast<double>(d_cause) / row.at_risk;
            c.jump_times.push_back(row.t);
            c.values.push_back(cif);
        }
        surv_left *= 1.0 - static_cast<double>(row.d_event) / row.at_risk;
    }
    return c;
}

StepFunction censoring_km(const SurvivalDataset& dataset) {
    require_nonempty(dataset);
    StepFunction g;
    g.value_at_zero = 1.0;
    double surv = 1.0;
    for (const TimeRow& row : tabulate(dataset)) {
        if (row.d_censor == 0) continue;
        // events at the same time have already left the risk set
        int denom = row.at_risk - row.d_event;
        surv *= 1.0 - static_cast<double>(row.d_censor) / denom;
        g.jump_times.push_back(row.t);
        g.values.push_back(surv);
    }
    return g;
}

namespace {

// The Aalen-Johansen CIF equals the censoring-weighted empirical
// sub-distribution: C_j(t) = n^{-1} sum_i 1{y_i <= t, delta_i = j} / G(y_i-),
// with G the censoring Kaplan-Meier under the events-first tie rule. The
// jackknife then telescopes to
//   pseudo_i = a_i + sum_{r != i} 1{y_r <= t, delta_r = j} (w_r - w_r^{-i}),
// where a_i is subject i's own weighted indicator and w^{-i} uses the
// leave-one-out censoring curve. With no censoring every weight is exactly 1
// and the pseudo-values are exactly the event indicators.
PseudoMatrix pseudo_core(const SurvivalDataset& dataset, const std::vector<int>& causes,
                         const std::vector<double>& times) {
    const std::size_t n = dataset.n();
    const std::size_t m = times.size();
    const std::size_t nc = causes.size();
    if (n < 2) throw std::invalid_argument("pseudo-observations need n >= 2");
    if (m == 0) throw std::invalid_argument("empty time grid");
    for (double t : times)
        if (!(t > 0.0)) throw std::invalid_argument("grid times must be positive");
    bool any_event = false;
    for (const Record& r : dataset.records) any_event |= (r.delta != 0);
    if (!any_event) throw std::invalid_argument("dataset has no events");

    std::vector<TimeRow> rows = tabulate(dataset);
    const std::size_t U = rows.size();

    // G(t-) for the full sample, per distinct time (value before processing row u)
    std::vector<double> g_left(U);
    {
        double g = 1.0;
        for (std::size_t u = 0; u < U; ++u) {
            g_left[u] = g;
            if (rows[u].d_censor > 0)
                g *= 1.0 - static_cast<double>(rows[u].d_censor) /
                               (rows[u].at_risk - rows[u].d_event);
        }
    }

    // per-record weighted indicators on the full sample
    std::vector<std::size_t> time_index(n);
    std::vector<double> w_full(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const Record& r = dataset.records[i];
        std::size_t u = static_cast<std::size_t>(
            std::lower_bound(rows.begin(), rows.end(), r.y,
                             [](const TimeRow& row, double t) { return row.t < t; }) -
            rows.begin());
        time_index[i] = u;
        if (r.delta != 0) w_full[i] = 1.0 / g_left[u];
    }

    // cause code -> slot
    std::vector<int> cause_slot(4, -1);
    for (std::size_t j = 0; j < nc; ++j) {
        if (causes[j] < 1 || causes[j] > 3) throw std::invalid_argument("cause must be in {1,2,3}");
        cause_slot[static_cast<std::size_t>(causes[j])] = static_cast<int>(j);
    }

    // event records grouped by distinct-time index, for the per-i sweep
    std::vector<std::vector<std::size_t>> events_at(U);
    for (std::size_t r = 0; r < n; ++r)
        if (dataset.records[r].delta != 0) events_at[time_index[r]].push_back(r);

    // sorted grid with original positions
    std::vector<std::size_t> grid_order(m);
    std::iota(grid_order.begin(), grid_order.end(), 0);
    std::stable_sort(grid_order.begin(), grid_order.end(),
                     [&](std::size_t a, std::size_t b) { return times[a] < times[b]; });

    PseudoMatrix out;
    out.times = times;
    out.causes = causes;
    out.n = n;
    out.values.assign(n * m * nc, 0.0);
    out.survival_pseudo.assign(n * m, 0.0);

    std::vector<double> running(nc);
    for (std::size_t i = 0; i < n; ++i) {
        const Record& ri = dataset.records[i];
        std::fill(running.begin(), running.end(), 0.0);
        double g_mi = 1.0;  // leave-i censoring KM, left limit at the current row
        std::size_t next_grid = 0;

        auto flush_grid_until = [&](double t_exclusive) {
            while (next_grid < m && times[grid_order[next_grid]] < t_exclusive) {
                std::size_t l = grid_order[next_grid];
                for (std::size_t j = 0; j < nc; ++j) {
                    double a_i = (ri.delta == causes[j] && ri.y <= times[l]) ? w_full[i] : 0.0;
                    out.values[(i * m + l) * nc + j] = a_i + running[j];
                }
                ++next_grid;
            }
        };

        for (std::size_t u = 0; u < U; ++u) {
            flush_grid_until(rows[u].t);
            for (std::size_t r : events_at[u]) {
                if (r == i) continue;
                int slot = cause_slot[static_cast<std::size_t>(dataset.records[r].delta)];
                if (slot >= 0)
                    running[static_cast<std::size_t>(slot)] += w_full[r] - 1.0 / g_mi;
            }
            int dc = rows[u].d_censor - (time_index[i] == u && ri.delta == 0 ? 1 : 0);
            if (dc > 0) {
                int at_risk = rows[u].at_risk - (ri.y >= rows[u].t ? 1 : 0);
                int dev = rows[u].d_event - (time_index[i] == u && ri.delta != 0 ? 1 : 0);
                g_mi *= 1.0 - static_cast<double>(dc) / (at_risk - dev);
            }
        }
        flush_grid_until(std::numeric_limits<double>::infinity());

        for (std::size_t l = 0; l < m; ++l) {
            double s = 1.0;
            for (std::size_t j = 0; j < nc; ++j) s -= out.values[(i * m + l) * nc + j];
            out.survival_pseudo[i * m + l] = s;
        }
    }
    return out;
}

}  // namespace

PseudoMatrix pseudo_observations(const SurvivalDataset& dataset, const std::vector<int>& causes,
                                 const std::vector<double>& times) {
    require_nonempty(dataset);
    return pseudo_core(dataset, causes, times);
}

PseudoMatrix stratified_pseudo_observations(const SurvivalDataset& dataset,
                                            const std::vector<int>& causes,
                                            const std::vector<double>& times) {
    require_nonempty(dataset);
    std::map<std::string, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < dataset.n(); ++i) {
        const Record& r = dataset.records[i];
        if (!r.stratum) throw std::invalid_argument("record " + std::to_string(i + 1) +
                                                    " is missing a stratum");
        groups[*r.stratum].push_back(i);
    }
    PseudoMatrix out;
    out.times = times;
    out.causes = causes;
    out.n = dataset.n();
    out.values.assign(dataset.n() * times.size() * causes.size(), 0.0);
    out.survival_pseudo.assign(dataset.n() * times.size(), 0.0);
    for (const auto& [label, idx] : groups) {
        if (idx.size() < 2)
            throw std::invalid_argument("stratum '" + label + "' has fewer than 2 records");
        SurvivalDataset sub;
        sub.p = dataset.p;
        sub.feature_names = dataset.feature_names;
        for (std::size_t i : idx) sub.records.push_back(dataset.records[i]);
        PseudoMatrix part = pseudo_core(sub, causes, times);
        for (std::size_t a = 0; a < idx.size(); ++a) {
            std::size_t i = idx[a];
            for (std::size_t l = 0; l < times.size(); ++l) {
                for (std::size_t j = 0; j < causes.size(); ++j)
                    out.values[(i * times.size() + l) * causes.size() + j] = part.value(a, l, j);
                out.survival_pseudo[i * times.size() + l] = part.surv(a, l);
            }
        }
    }
    return out;
}

void PseudoMatrix::write_csv(const std::string& path) const {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << "subject_id,time,cause,pseudo\n";
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t l = 0; l < m(); ++l)
            for (std::size_t j = 0; j < c(); ++j)
                f << i + 1 << ',' << format_double(times[l]) << ',' << causes[j] << ','
                  << format_double(value(i, l, j)) << '\n';
    if (!f) throw std::runtime_error("I/O failure writing " + path);
}

}  // namespace psl
