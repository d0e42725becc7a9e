#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "psl/dataset.hpp"

using namespace psl;

namespace {

SurvivalDataset tiny(bool strata = false) {
    SurvivalDataset d;
    d.p = 2;
    d.feature_names = {"age", "marker"};
    auto add = [&](double y, int delta, double a, double b, const char* s) {
        Record r;
        r.y = y;
        r.delta = delta;
        r.x = {a, b};
        if (strata) r.stratum = s;
        d.records.push_back(r);
    };
    add(1.5, 1, 0.3, -1.0, "m");
    add(2.0, 0, -0.2, 0.5, "f");
    add(3.25, 2, 1.7, 2.5, "m");
    add(0.75, 3, -0.9, 0.125, "f");
    return d;
}

std::string temp_path(const char* name) { return std::string("psl_test_") + name; }

}  // namespace

TEST_CASE("csv write then read reproduces every record") {
    for (bool strata : {false, true}) {
        SurvivalDataset d = tiny(strata);
        std::string path = temp_path(strata ? "rt_s.csv" : "rt.csv");
        write_csv(d, path);
        SurvivalDataset back = read_csv(path);
        REQUIRE(back.n() == d.n());
        CHECK(back.p == d.p);
        CHECK(back.feature_names == d.feature_names);
        for (std::size_t i = 0; i < d.n(); ++i) {
            CHECK(back.records[i].y == d.records[i].y);
            CHECK(back.records[i].delta == d.records[i].delta);
            CHECK(back.records[i].x == d.records[i].x);
            CHECK(back.records[i].stratum == d.records[i].stratum);
        }
        CHECK(back.has_strata() == strata);
        std::remove(path.c_str());
    }
}

TEST_CASE("csv reader rejects malformed input with the row named") {
    std::string path = temp_path("bad.csv");
    auto write = [&](const char* text) {
        std::ofstream out(path);
        out << text;
    };

    write("age,marker\n1,2\n");
    CHECK_THROWS_WITH_AS(read_csv(path), doctest::Contains("missing column 'time'"),
                         std::runtime_error);

    write("time,event,age\n1.0,1\n");
    CHECK_THROWS_WITH_AS(read_csv(path), doctest::Contains("row 2"), std::runtime_error);

    write("time,event,age\n-1.0,1,3\n");
    CHECK_THROWS_AS(read_csv(path), std::runtime_error);

    write("time,event,age\n1.0,7,3\n");
    CHECK_THROWS_WITH_AS(read_csv(path), doctest::Contains("event code"), std::runtime_error);

    write("time,event,age\n1.0,one,3\n");
    CHECK_THROWS_WITH_AS(read_csv(path), doctest::Contains("'event' unparseable"),
                         std::runtime_error);

    std::remove(path.c_str());
}

TEST_CASE("validate names the offending record") {
    SurvivalDataset d = tiny();
    d.records[2].delta = 9;
    CHECK_THROWS_WITH_AS(d.validate(), doctest::Contains("record 3"), std::invalid_argument);
    d = tiny();
    d.records[1].x.pop_back();
    CHECK_THROWS_WITH_AS(d.validate(), doctest::Contains("record 2"), std::invalid_argument);
    d = tiny();
    d.records[0].y = -0.5;
    CHECK_THROWS_AS(d.validate(), std::invalid_argument);
}

TEST_CASE("covariates copies rows in order") {
    SurvivalDataset d = tiny();
    Matrix X = d.covariates();
    REQUIRE(X.n == 4);
    REQUIRE(X.p == 2);
    CHECK(X(0, 0) == 0.3);
    CHECK(X(2, 1) == 2.5);
    CHECK(X(3, 0) == -0.9);
}

TEST_CASE("train/validation split partitions the records") {
    SurvivalDataset d;
    d.p = 1;
    d.feature_names = {"x"};
    for (int i = 0; i < 10; ++i) {
        Record r;
        r.y = 1.0 + i;
        r.delta = i % 2;
        r.x = {static_cast<double>(i)};
        d.records.push_back(r);
    }
    auto [train, val] = split_train_validation(d, 0.6, 99);
    CHECK(train.n() == 6);
    CHECK(val.n() == 4);
    std::multiset<double> seen;
    for (const auto& r : train.records) seen.insert(r.x[0]);
    for (const auto& r : val.records) seen.insert(r.x[0]);
    std::multiset<double> expect;
    for (int i = 0; i < 10; ++i) expect.insert(i);
    CHECK(seen == expect);

    auto [t2, v2] = split_train_validation(d, 0.6, 99);
    for (std::size_t i = 0; i < train.n(); ++i) CHECK(t2.records[i].x == train.records[i].x);

    CHECK_THROWS_AS(split_train_validation(d, 0.0, 1), std::invalid_argument);
    CHECK_THROWS_AS(split_train_validation(d, 1.0, 1), std::invalid_argument);
}

TEST_CASE("meta json event counts agree with a recount") {
    SurvivalDataset d = tiny();
    auto j = nlohmann::json::parse(dataset_meta_json(d));
    CHECK(j.at("n") == 4);
    CHECK(j.at("p") == 2);
    std::size_t c0 = 0, c1 = 0, c2 = 0, c3 = 0;
    for (const auto& r : d.records) {
        if (r.delta == 0) ++c0;
        if (r.delta == 1) ++c1;
        if (r.delta == 2) ++c2;
        if (r.delta == 3) ++c3;
    }
    CHECK(j.at("event_counts").at("censored") == c0);
    CHECK(j.at("event_counts").at("cause1") == c1);
    CHECK(j.at("event_counts").at("cause2") == c2);
    CHECK(j.at("event_counts").at("cause3") == c3);
}

TEST_CASE("truth side-file round trips") {
    std::vector<TruthRecord> t{{1.25, 3.5, 0.125}, {2.0, 0.5, 0.875}};
    std::string path = temp_path("truth.csv");
    write_truth_csv(t, path);
    auto back = read_truth_csv(path);
    REQUIRE(back.size() == 2);
    CHECK(back[0].t_latent_1 == 1.25);
    CHECK(back[1].t_latent_2 == 0.5);
    CHECK(back[1].true_cif == 0.875);
    std::remove(path.c_str());
}
