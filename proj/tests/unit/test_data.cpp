#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "coxbvs/csv.hpp"
#include "coxbvs/data.hpp"

using namespace coxbvs;

namespace {

SurvivalRecord rec(double t, int ev, std::vector<double> x, int sub) {
    SurvivalRecord r;
    r.observed_time = t;
    r.event = ev;
    r.covariates = Eigen::Map<Eigen::VectorXd>(x.data(), static_cast<int>(x.size()));
    r.subgroup = sub;
    return r;
}

std::string write_temp_csv(const std::string& body) {
    static int counter = 0;
    const std::string path =
        (std::filesystem::temp_directory_path() / ("coxbvs_data_" + std::to_string(counter++) + ".csv"))
            .string();
    std::ofstream out(path);
    out << body;
    return path;
}

}  // namespace

TEST_CASE("load_dataset reads a small csv back") {
    const std::string path = write_temp_csv(
        "time,status,subgroup,g1,g2\n"
        "1.5,1,1,0.3,-0.2\n"
        "2.0,0,1,0.1,0.4\n"
        "0.7,1,2,-1.0,0.8\n"
        "3.2,0,2,0.5,0.5\n");
    const Dataset ds = load_dataset(path);
    CHECK(ds.p == 2);
    CHECK(ds.S == 2);
    CHECK(ds.subgroup_sizes == std::vector<int>{2, 2});
    CHECK(ds.records[2].observed_time == 0.7);
    CHECK(ds.records[2].event == 1);
    CHECK(ds.records[2].covariates[1] == 0.8);
    CHECK(ds.covariate_names == std::vector<std::string>{"g1", "g2"});
    std::remove(path.c_str());
}

TEST_CASE("load_dataset rejects a non-positive time with the row") {
    const std::string path = write_temp_csv(
        "time,status,subgroup,g1\n"
        "1.5,1,1,0.3\n"
        "0,0,1,0.1\n");
    CHECK_THROWS_WITH(load_dataset(path), Catch::Matchers::ContainsSubstring("row 3"));
    std::remove(path.c_str());
}

TEST_CASE("load_dataset reports schema and parse problems with context") {
    const std::string missing = write_temp_csv("time,status,g1\n1,1,0.5\n");
    CHECK_THROWS_WITH(load_dataset(missing), Catch::Matchers::ContainsSubstring("subgroup"));
    std::remove(missing.c_str());

    const std::string bad = write_temp_csv("time,status,subgroup,g1\n1,1,1,abc\n");
    CHECK_THROWS_WITH(load_dataset(bad), Catch::Matchers::ContainsSubstring("g1"));
    std::remove(bad.c_str());

    const std::string empty_sub = write_temp_csv(
        "time,status,subgroup,g1\n"
        "1,1,1,0.5\n"
        "2,0,3,0.2\n");
    CHECK_THROWS_WITH(load_dataset(empty_sub), Catch::Matchers::ContainsSubstring("subgroup 2"));
    std::remove(empty_sub.c_str());
}

TEST_CASE("load_dataset handles the case-study shape") {
    // 212 rows, 159 events, 187 covariate columns
    std::ostringstream body;
    body << "time,status,subgroup";
    for (int j = 1; j <= 187; ++j) body << ",x" << j;
    body << '\n';
    Rng rng(7);
    for (int i = 0; i < 212; ++i) {
        body << (0.5 + i) << ',' << (i < 159 ? 1 : 0) << ',' << (i % 2 + 1);
        for (int j = 0; j < 187; ++j) body << ',' << rng.normal();
        body << '\n';
    }
    const std::string path = write_temp_csv(body.str());
    const Dataset ds = load_dataset(path);
    CHECK(ds.p == 187);
    CHECK(static_cast<int>(ds.records.size()) == 212);
    int events = 0;
    for (const auto& r : ds.records) events += r.event;
    CHECK(events == 159);
    std::remove(path.c_str());
}

TEST_CASE("csv round trip preserves the dataset") {
    std::vector<SurvivalRecord> rs;
    Rng rng(3);
    for (int i = 0; i < 20; ++i)
        rs.push_back(rec(0.1 + rng.uniform(), i % 2, {rng.normal(), rng.normal()}, i % 3 + 1));
    const Dataset ds = make_dataset(rs);
    const std::string path = write_temp_csv("");
    save_dataset(ds, path);
    const Dataset back = load_dataset(path);
    REQUIRE(back.records.size() == ds.records.size());
    for (std::size_t i = 0; i < rs.size(); ++i) {
        CHECK(back.records[i].observed_time == ds.records[i].observed_time);
        CHECK(back.records[i].event == ds.records[i].event);
        CHECK(back.records[i].subgroup == ds.records[i].subgroup);
        CHECK(back.records[i].covariates == ds.records[i].covariates);
    }
    std::remove(path.c_str());
}

TEST_CASE("standardize scales a train column to sample sd one") {
    // column (1,2,3) -> (-1,0,1) under the n-1 convention
    const Dataset train = make_dataset(
        {rec(1, 1, {1.0}, 1), rec(2, 0, {2.0}, 1), rec(3, 1, {3.0}, 1)});
    const Dataset test = make_dataset({rec(1, 1, {2.0}, 1)});
    auto [tr, te, sp] = standardize(train, test, StandardizationParams::Scope::PerSubgroup);
    CHECK(tr.records[0].covariates[0] == Catch::Approx(-1.0));
    CHECK(tr.records[1].covariates[0] == Catch::Approx(0.0));
    CHECK(tr.records[2].covariates[0] == Catch::Approx(1.0));
    // test value equal to the train mean scales to zero
    CHECK(te.records[0].covariates[0] == Catch::Approx(0.0));
}

TEST_CASE("per-subgroup and pooled standardization differ as direct arithmetic says") {
    const Dataset train = make_dataset({
        rec(1, 1, {1.0}, 1), rec(2, 0, {3.0}, 1), rec(1, 1, {11.0}, 2), rec(2, 0, {13.0}, 2)});
    auto per = standardize(train, Dataset{}, StandardizationParams::Scope::PerSubgroup);
    auto pooled = standardize(train, Dataset{}, StandardizationParams::Scope::Pooled);
    // per-subgroup: each unit centered at its own mean
    const double sd_sub = std::sqrt(2.0);  // sd of {1,3} and of {11,13}
    CHECK(std::get<0>(per).records[0].covariates[0] == Catch::Approx(-1.0 / sd_sub));
    CHECK(std::get<0>(per).records[2].covariates[0] == Catch::Approx(-1.0 / sd_sub));
    // pooled: one shared mean 7 and sd of {1,3,11,13}
    const double sd_all = std::sqrt((36.0 + 16.0 + 16.0 + 36.0) / 3.0);
    CHECK(std::get<0>(pooled).records[0].covariates[0] == Catch::Approx((1.0 - 7.0) / sd_all));
    CHECK(std::get<0>(pooled).records[2].covariates[0] == Catch::Approx((11.0 - 7.0) / sd_all));
}

TEST_CASE("standardizing standardized data is the identity") {
    Rng rng(11);
    std::vector<SurvivalRecord> rs;
    for (int i = 0; i < 30; ++i)
        rs.push_back(rec(0.5 + rng.uniform(), i % 2, {rng.normal(), 2.0 * rng.normal() + 1.0},
                         i % 2 + 1));
    const Dataset ds = make_dataset(rs);
    auto [once, t1, sp1] = standardize(ds, Dataset{}, StandardizationParams::Scope::PerSubgroup);
    auto [twice, t2, sp2] =
        standardize(once, Dataset{}, StandardizationParams::Scope::PerSubgroup);
    for (std::size_t i = 0; i < rs.size(); ++i)
        for (int j = 0; j < 2; ++j)
            CHECK(std::abs(once.records[i].covariates[j] - twice.records[i].covariates[j]) <
                  1e-12);
}

TEST_CASE("standardize rejects constant columns naming the scope unit") {
    const Dataset train = make_dataset(
        {rec(1, 1, {1.0, 5.0}, 1), rec(2, 0, {2.0, 5.0}, 1)});
    CHECK_THROWS_WITH(standardize(train, Dataset{}, StandardizationParams::Scope::PerSubgroup),
                      Catch::Matchers::ContainsSubstring("covariate 2") &&
                          Catch::Matchers::ContainsSubstring("subgroup 1"));
}

TEST_CASE("build_grouped_data on two events") {
    const std::vector<SurvivalRecord> rs{rec(2, 1, {0.0}, 1), rec(5, 1, {0.0}, 1)};
    const GroupedData gd = build_grouped_data(rs);
    REQUIRE(gd.intervals() == 3);  // (0,2], (2,5], terminal
    CHECK(gd.boundaries[0] == 0.0);
    CHECK(gd.boundaries[1] == 2.0);
    CHECK(gd.boundaries[2] == 5.0);
    CHECK(gd.boundaries[3] > 5.0);
    CHECK(gd.failure_sets[0] == std::vector<int>{0});
    CHECK(gd.risk_sets[0] == std::vector<int>{0, 1});
    CHECK(gd.risk_sets[1] == std::vector<int>{1});
    CHECK(gd.event_counts[2] == 0);
}

TEST_CASE("tied event times land in one failure set") {
    const std::vector<SurvivalRecord> rs{rec(3, 1, {0.0}, 1), rec(3, 1, {0.0}, 1)};
    const GroupedData gd = build_grouped_data(rs);
    REQUIRE(gd.intervals() == 2);
    CHECK(gd.event_counts[0] == 2);
    CHECK(gd.failure_sets[0].size() == 2);
}

TEST_CASE("a censored patient is at risk but never fails") {
    const std::vector<SurvivalRecord> rs{
        rec(2, 1, {0.0}, 1), rec(4, 0, {0.0}, 1), rec(5, 1, {0.0}, 1)};
    const GroupedData gd = build_grouped_data(rs);
    // intervals (0,2], (2,5], terminal; censored at 4 is at risk in (2,5]
    REQUIRE(gd.intervals() == 3);
    CHECK(std::count(gd.risk_sets[1].begin(), gd.risk_sets[1].end(), 1) == 1);
    for (const auto& d : gd.failure_sets)
        CHECK(std::count(d.begin(), d.end(), 1) == 0);
}

TEST_CASE("an event tied with a censoring keeps the censored patient at risk") {
    const std::vector<SurvivalRecord> rs{rec(3, 1, {0.0}, 1), rec(3, 0, {0.0}, 1)};
    const GroupedData gd = build_grouped_data(rs);
    // both are in the risk set of (0,3]; only the event is in the failure set
    CHECK(gd.risk_sets[0].size() == 2);
    CHECK(gd.failure_sets[0] == std::vector<int>{0});
    // the censored one remains at risk through (0,3] and leaves afterwards
    CHECK(gd.risk_sets[1].empty());
}

TEST_CASE("zero events is an error") {
    CHECK_THROWS_WITH(build_grouped_data({rec(1, 0, {0.0}, 1)}),
                      Catch::Matchers::ContainsSubstring("zero events"));
}

TEST_CASE("grouped data risk sets are nested and failure sets partition the events") {
    Rng rng(5);
    std::vector<SurvivalRecord> rs;
    for (int i = 0; i < 60; ++i) {
        const double t = 0.1 + 3.0 * rng.uniform();
        rs.push_back(rec(rng.uniform() < 0.3 ? std::round(t * 4) / 4 + 0.25 : t,
                         rng.uniform() < 0.6 ? 1 : 0, {0.0}, 1));
    }
    const GroupedData gd = build_grouped_data(rs);
    for (int g = 1; g < gd.intervals(); ++g) {
        const std::set<int> prev(gd.risk_sets[g - 1].begin(), gd.risk_sets[g - 1].end());
        for (int k : gd.risk_sets[g]) CHECK(prev.count(k) == 1);
        CHECK(gd.event_counts[g] == static_cast<int>(gd.failure_sets[g].size()));
        const std::set<int> risk(gd.risk_sets[g].begin(), gd.risk_sets[g].end());
        for (int k : gd.failure_sets[g]) CHECK(risk.count(k) == 1);
    }
    std::set<int> all_failures;
    for (const auto& d : gd.failure_sets)
        for (int k : d) CHECK(all_failures.insert(k).second);  // pairwise disjoint
    std::set<int> events;
    for (int k = 0; k < static_cast<int>(rs.size()); ++k)
        if (rs[k].event) events.insert(k);
    CHECK(all_failures == events);
}

TEST_CASE("stratified_split keeps per-stratum counts and is seed-deterministic") {
    Rng rng(9);
    std::vector<SurvivalRecord> rs;
    for (int i = 0; i < 50; ++i)
        rs.push_back(rec(0.5 + rng.uniform(), i % 2, {rng.normal()}, i % 2 + 1));
    const Dataset ds = make_dataset(rs);
    auto [train, test] = stratified_split(ds, 0.8, 123);
    CHECK(train.records.size() + test.records.size() == ds.records.size());
    // per-stratum counts preserved and train fraction honored (round-half-up)
    for (int s = 1; s <= 2; ++s)
        for (int ev = 0; ev <= 1; ++ev) {
            int total = 0, in_train = 0;
            for (const auto& r : ds.records)
                if (r.subgroup == s && r.event == ev) ++total;
            for (const auto& r : train.records)
                if (r.subgroup == s && r.event == ev) ++in_train;
            int in_test = 0;
            for (const auto& r : test.records)
                if (r.subgroup == s && r.event == ev) ++in_test;
            CHECK(in_train + in_test == total);
            CHECK(in_train == static_cast<int>(std::floor(0.8 * total + 0.5)));
        }
    auto [train2, test2] = stratified_split(ds, 0.8, 123);
    REQUIRE(train2.records.size() == train.records.size());
    for (std::size_t i = 0; i < train.records.size(); ++i)
        CHECK(train2.records[i].observed_time == train.records[i].observed_time);
    auto [train3, test3] = stratified_split(ds, 0.8, 124);
    bool any_diff = train3.records.size() != train.records.size();
    for (std::size_t i = 0; !any_diff && i < train.records.size(); ++i)
        any_diff = train3.records[i].observed_time != train.records[i].observed_time;
    CHECK(any_diff);
    CHECK(train3.records.size() == train.records.size());  // same stratum counts
}

TEST_CASE("a ten-record stratum splits 8/2 at fraction 0.8") {
    std::vector<SurvivalRecord> rs;
    Rng rng(2);
    for (int i = 0; i < 10; ++i) rs.push_back(rec(1.0 + i, 1, {rng.normal()}, 1));
    for (int i = 0; i < 4; ++i) rs.push_back(rec(1.0 + i, 0, {rng.normal()}, 1));
    auto [train, test] = stratified_split(make_dataset(rs), 0.8, 77);
    int ev_train = 0;
    for (const auto& r : train.records) ev_train += r.event;
    CHECK(ev_train == 8);
}

TEST_CASE("stratified_split names a too-small stratum") {
    const Dataset ds = make_dataset(
        {rec(1, 1, {0.0}, 1), rec(2, 1, {0.0}, 1), rec(3, 0, {0.0}, 1)});
    CHECK_THROWS_WITH(stratified_split(ds, 0.8, 1),
                      Catch::Matchers::ContainsSubstring("subgroup 1") &&
                          Catch::Matchers::ContainsSubstring("event 0"));
}
