#include "psl/dataset.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "psl/rng.hpp"

namespace psl {

double mean(const std::vector<double>& v) {
    if (v.empty()) throw std::invalid_argument("mean of empty vector");
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_sd(const std::vector<double>& v) {
    if (v.size() < 2) throw std::invalid_argument("sd needs at least 2 values");
    double m = mean(v), ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

double quantile(std::vector<double> v, double q) {
    if (v.empty()) throw std::invalid_argument("quantile of empty vector");
    if (q < 0.0 || q > 1.0) throw std::invalid_argument("quantile level outside [0,1]");
    std::sort(v.begin(), v.end());
    double h = q * static_cast<double>(v.size() - 1);
    std::size_t lo = static_cast<std::size_t>(h);
    if (lo + 1 >= v.size()) return v.back();
    double frac = h - static_cast<double>(lo);
    return v[lo] + frac * (v[lo + 1] - v[lo]);
}

std::string format_double(double x) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
    double out = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), out);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw std::invalid_argument("unparseable number: '" + s + "'");
    return out;
}

bool SurvivalDataset::has_strata() const {
    return !records.empty() &&
           std::all_of(records.begin(), records.end(),
                       [](const Record& r) { return r.stratum.has_value(); });
}

Matrix SurvivalDataset::covariates() const {
    Matrix X(n(), p);
    for (std::size_t i = 0; i < n(); ++i)
        for (std::size_t j = 0; j < p; ++j) X(i, j) = records[i].x[j];
    return X;
}

void SurvivalDataset::validate() const {
    if (feature_names.size() != p)
        throw std::invalid_argument("feature_names size does not match p");
    for (std::size_t i = 0; i < records.size(); ++i) {
        const Record& r = records[i];
        if (!std::isfinite(r.y) || r.y < 0.0)
            throw std::invalid_argument("record " + std::to_string(i + 1) +
                                        ": time must be finite and nonnegative");
        if (r.delta < 0 || r.delta > 3)
            throw std::invalid_argument("record " + std::to_string(i + 1) +
                                        ": event code outside {0,1,2,3}");
        if (r.x.size() != p)
            throw std::invalid_argument("record " + std::to_string(i + 1) +
                                        ": covariate count differs from p");
        for (double v : r.x)
            if (!std::isfinite(v))
                throw std::invalid_argument("record " + std::to_string(i + 1) +
                                            ": non-finite covariate");
    }
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

}  // namespace

SurvivalDataset read_csv(const std::string& path, const CsvSchema& schema) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error(path + ": empty file");
    std::vector<std::string> header = split_line(line);

    long time_idx = -1, event_idx = -1, stratum_idx = -1;
    std::vector<std::size_t> feature_idx;
    SurvivalDataset d;
    for (std::size_t j = 0; j < header.size(); ++j) {
        if (header[j] == schema.time_col) {
            time_idx = static_cast<long>(j);
        } else if (header[j] == schema.event_col) {
            event_idx = static_cast<long>(j);
        } else if (header[j] == schema.stratum_col) {
            stratum_idx = static_cast<long>(j);
        } else {
            feature_idx.push_back(j);
            d.feature_names.push_back(header[j]);
        }
    }
    if (time_idx < 0) throw std::runtime_error(path + ": missing column '" + schema.time_col + "'");
    if (event_idx < 0)
        throw std::runtime_error(path + ": missing column '" + schema.event_col + "'");
    d.p = feature_idx.size();

    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        std::vector<std::string> cells = split_line(line);
        if (cells.size() != header.size())
            throw std::runtime_error(path + ": row " + std::to_string(row) +
                                     " has wrong cell count");
        Record r;
        try {
            r.y = parse_double(cells[static_cast<std::size_t>(time_idx)]);
        } catch (const std::exception&) {
            throw std::runtime_error(path + ": row " + std::to_string(row) + " column '" +
                                     schema.time_col + "' unparseable");
        }
        if (!std::isfinite(r.y) || r.y < 0.0)
            throw std::runtime_error(path + ": row " + std::to_string(row) + " negative time");
        const std::string& ev = cells[static_cast<std::size_t>(event_idx)];
        int code = 0;
        auto res = std::from_chars(ev.data(), ev.data() + ev.size(), code);
        if (res.ec != std::errc{} || res.ptr != ev.data() + ev.size())
            throw std::runtime_error(path + ": row " + std::to_string(row) + " column '" +
                                     schema.event_col + "' unparseable");
        if (code < 0 || code > 3)
            throw std::runtime_error(path + ": row " + std::to_string(row) +
                                     " event code outside {0..3}");
        r.delta = code;
        if (stratum_idx >= 0) r.stratum = cells[static_cast<std::size_t>(stratum_idx)];
        r.x.reserve(d.p);
        for (std::size_t k = 0; k < feature_idx.size(); ++k) {
            try {
                r.x.push_back(parse_double(cells[feature_idx[k]]));
            } catch (const std::exception&) {
                throw std::runtime_error(path + ": row " + std::to_string(row) + " column '" +
                                         d.feature_names[k] + "' unparseable");
            }
        }
        d.records.push_back(std::move(r));
    }
    d.validate();
    return d;
}

void write_csv(const SurvivalDataset& dataset, const std::string& path) {
    dataset.validate();
    bool strata = dataset.has_strata();
    if (strata) {
        for (const Record& r : dataset.records)
            if (r.stratum->find_first_of(",\n\r") != std::string::npos)
                throw std::invalid_argument("stratum labels may not contain commas or newlines");
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "time,event";
    if (strata) out << ",stratum";
    for (const std::string& name : dataset.feature_names) out << ',' << name;
    out << '\n';
    for (const Record& r : dataset.records) {
        out << format_double(r.y) << ',' << r.delta;
        if (strata) out << ',' << *r.stratum;
        for (double v : r.x) out << ',' << format_double(v);
        out << '\n';
    }
    if (!out) throw std::runtime_error("I/O failure writing " + path);
}

std::vector<TruthRecord> read_truth_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error(path + ": empty file");
    if (split_line(line) != std::vector<std::string>{"t_latent_1", "t_latent_2", "true_cif"})
        throw std::runtime_error(path + ": unexpected truth header");
    std::vector<TruthRecord> out;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        std::vector<std::string> cells = split_line(line);
        if (cells.size() != 3)
            throw std::runtime_error(path + ": row " + std::to_string(row) + " has wrong cell count");
        TruthRecord t;
        t.t_latent_1 = parse_double(cells[0]);
        t.t_latent_2 = parse_double(cells[1]);
        t.true_cif = parse_double(cells[2]);
        out.push_back(t);
    }
    return out;
}

void write_truth_csv(const std::vector<TruthRecord>& truths, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "t_latent_1,t_latent_2,true_cif\n";
    for (const TruthRecord& t : truths)
        out << format_double(t.t_latent_1) << ',' << format_double(t.t_latent_2) << ','
            << format_double(t.true_cif) << '\n';
    if (!out) throw std::runtime_error("I/O failure writing " + path);
}

std::pair<SurvivalDataset, SurvivalDataset> split_train_validation(const SurvivalDataset& dataset,
                                                                   double fraction,
                                                                   std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction < 1.0))
        throw std::invalid_argument("fraction must lie in (0,1)");
    if (dataset.n() < 2) throw std::invalid_argument("need at least 2 records to split");
    std::vector<std::size_t> idx(dataset.n());
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(seed, 0x5114ull);
    rng.shuffle(idx);
    std::size_t k = static_cast<std::size_t>(
        std::llround(fraction * static_cast<double>(dataset.n())));
    std::vector<std::size_t> first(idx.begin(), idx.begin() + static_cast<long>(k));
    std::vector<std::size_t> second(idx.begin() + static_cast<long>(k), idx.end());
    std::sort(first.begin(), first.end());
    std::sort(second.begin(), second.end());
    auto take = [&](const std::vector<std::size_t>& which) {
        SurvivalDataset out;
        out.p = dataset.p;
        out.feature_names = dataset.feature_names;
        for (std::size_t i : which) out.records.push_back(dataset.records[i]);
        return out;
    };
    return {take(first), take(second)};
}

std::string dataset_meta_json(const SurvivalDataset& dataset) {
    nlohmann::ordered_json j;
    j["schema_version"] = 1;
    j["n"] = dataset.n();
    j["p"] = dataset.p;
    std::array<std::size_t, 4> counts{};
    for (const Record& r : dataset.records) counts[static_cast<std::size_t>(r.delta)]++;
    j["event_counts"] = {{"censored", counts[0]},
                         {"cause1", counts[1]},
                         {"cause2", counts[2]},
                         {"cause3", counts[3]}};
    return j.dump();
}

}  // namespace psl
