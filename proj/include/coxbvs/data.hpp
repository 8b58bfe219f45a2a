#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "coxbvs/math.hpp"
#include "coxbvs/rng.hpp"

namespace coxbvs {

// One observation: follow-up time, event status, covariate row, cohort label.
struct SurvivalRecord {
    double observed_time = 0.0;
    int event = 0;  // 1 = event observed, 0 = right-censored
    Eigen::VectorXd covariates;
    int subgroup = 1;  // label in 1..S
};

struct Dataset {
    std::vector<SurvivalRecord> records;
    int p = 0;
    int S = 0;
    std::vector<int> subgroup_sizes;           // indexed by subgroup-1
    std::vector<std::string> covariate_names;  // optional, kept for round trips

    std::vector<int> subgroup_indices(int s) const {
        std::vector<int> idx;
        for (int k = 0; k < static_cast<int>(records.size()); ++k)
            if (records[k].subgroup == s) idx.push_back(k);
        return idx;
    }
};

// Builds a Dataset from records, recomputing p/S/sizes.
// require_nonempty_subgroups enforces the invariant that every label in 1..S
// occurs; split outputs relax it (a vanished stratum side is reported later,
// when a model actually asks for that subgroup).
inline Dataset make_dataset(std::vector<SurvivalRecord> records,
                            bool require_nonempty_subgroups = true,
                            std::vector<std::string> covariate_names = {}) {
    if (records.empty()) throw std::invalid_argument("dataset has no records");
    Dataset ds;
    ds.p = static_cast<int>(records.front().covariates.size());
    int max_label = 0;
    for (std::size_t k = 0; k < records.size(); ++k) {
        const auto& r = records[k];
        if (static_cast<int>(r.covariates.size()) != ds.p)
            throw std::invalid_argument(detail::str(
                "record ", k + 1, ": expected ", ds.p, " covariates, got ", r.covariates.size()));
        if (!(r.observed_time > 0.0))
            throw std::invalid_argument(detail::str(
                "record ", k + 1, ": observed_time must be positive, got ", r.observed_time));
        if (r.event != 0 && r.event != 1)
            throw std::invalid_argument(detail::str(
                "record ", k + 1, ": event must be 0 or 1, got ", r.event));
        for (int j = 0; j < ds.p; ++j)
            if (!std::isfinite(r.covariates[j]))
                throw std::invalid_argument(detail::str(
                    "record ", k + 1, ", covariate ", j + 1, ": missing or non-finite value"));
        if (r.subgroup < 1)
            throw std::invalid_argument(detail::str(
                "record ", k + 1, ": subgroup label must be >= 1, got ", r.subgroup));
        max_label = std::max(max_label, r.subgroup);
    }
    ds.S = max_label;
    ds.subgroup_sizes.assign(ds.S, 0);
    for (const auto& r : records) ds.subgroup_sizes[r.subgroup - 1]++;
    if (require_nonempty_subgroups)
        for (int s = 1; s <= ds.S; ++s)
            if (ds.subgroup_sizes[s - 1] == 0)
                throw std::invalid_argument(detail::str("subgroup ", s, " has no records"));
    ds.records = std::move(records);
    ds.covariate_names = std::move(covariate_names);
    return ds;
}

// Time-axis partition with risk/failure sets per interval, for one subgroup.
// Indices refer to positions in the record sequence the partition was built
// from. boundaries[0] = 0 and boundaries.back() exceeds every observed time.
struct GroupedData {
    std::vector<double> boundaries;             // c_0 < c_1 < ... < c_J
    std::vector<std::vector<int>> risk_sets;    // R_g, g = 1..J (0-based storage)
    std::vector<std::vector<int>> failure_sets; // D_g
    std::vector<int> event_counts;              // d_g = |D_g|
    int intervals() const { return static_cast<int>(boundaries.size()) - 1; }
};

// Finest partition on which the grouped likelihood is well-defined:
// boundaries at the distinct observed event times, plus a terminal point
// just beyond the largest observed time.
inline GroupedData build_grouped_data(const std::vector<SurvivalRecord>& records) {
    if (records.empty()) throw std::invalid_argument("build_grouped_data: no records");
    std::vector<double> event_times;
    double max_time = 0.0;
    for (const auto& r : records) {
        if (!(r.observed_time > 0.0))
            throw std::invalid_argument("build_grouped_data: non-positive observed time");
        max_time = std::max(max_time, r.observed_time);
        if (r.event == 1) event_times.push_back(r.observed_time);
    }
    if (event_times.empty())
        throw std::invalid_argument(
            "build_grouped_data: subgroup has zero events; baseline hazard is unidentifiable");
    std::sort(event_times.begin(), event_times.end());
    event_times.erase(std::unique(event_times.begin(), event_times.end()), event_times.end());

    GroupedData gd;
    gd.boundaries.push_back(0.0);
    gd.boundaries.insert(gd.boundaries.end(), event_times.begin(), event_times.end());
    gd.boundaries.push_back(max_time * (1.0 + 1e-6));

    const int J = gd.intervals();
    gd.risk_sets.resize(J);
    gd.failure_sets.resize(J);
    gd.event_counts.assign(J, 0);
    const int n = static_cast<int>(records.size());
    for (int g = 1; g <= J; ++g) {
        const double lo = gd.boundaries[g - 1];
        const double hi = gd.boundaries[g];
        for (int k = 0; k < n; ++k) {
            const double t = records[k].observed_time;
            if (t > lo) gd.risk_sets[g - 1].push_back(k);
            if (records[k].event == 1 && t > lo && t <= hi) {
                gd.failure_sets[g - 1].push_back(k);
                gd.event_counts[g - 1]++;
            }
        }
    }
    return gd;
}

struct StandardizationParams {
    enum class Scope { PerSubgroup, Pooled };
    Scope scope = Scope::PerSubgroup;
    // One entry per scope unit: subgroup label order for PerSubgroup,
    // a single entry for Pooled.
    std::vector<Eigen::VectorXd> means;
    std::vector<Eigen::VectorXd> sds;

    int unit_for(int subgroup) const {
        return scope == Scope::Pooled ? 0 : subgroup - 1;
    }
};

namespace detail {

inline void column_moments(const std::vector<const SurvivalRecord*>& rows, int p,
                           const std::string& unit_name,
                           Eigen::VectorXd& mean, Eigen::VectorXd& sd) {
    const int n = static_cast<int>(rows.size());
    if (n < 2)
        throw std::invalid_argument(detail::str(
            "standardize: ", unit_name, " has ", n, " record(s); need at least 2"));
    mean = Eigen::VectorXd::Zero(p);
    for (const auto* r : rows) mean += r->covariates;
    mean /= n;
    sd = Eigen::VectorXd::Zero(p);
    for (const auto* r : rows) sd += (r->covariates - mean).cwiseAbs2();
    // Sample SD (divisor n-1), fixed for reproducibility.
    sd = (sd / (n - 1)).cwiseSqrt();
    for (int j = 0; j < p; ++j)
        if (!(sd[j] > 0.0))
            throw std::invalid_argument(detail::str(
                "standardize: covariate ", j + 1, " is constant in ", unit_name));
}

}  // namespace detail

// Scales columns to train mean 0 / sample SD 1 within each scope unit and
// applies the train parameters to the test set.
inline StandardizationParams standardization_params(
    const Dataset& train, StandardizationParams::Scope scope) {
    StandardizationParams sp;
    sp.scope = scope;
    if (scope == StandardizationParams::Scope::Pooled) {
        std::vector<const SurvivalRecord*> rows;
        for (const auto& r : train.records) rows.push_back(&r);
        sp.means.resize(1);
        sp.sds.resize(1);
        detail::column_moments(rows, train.p, "pooled training data", sp.means[0], sp.sds[0]);
    } else {
        sp.means.resize(train.S);
        sp.sds.resize(train.S);
        for (int s = 1; s <= train.S; ++s) {
            std::vector<const SurvivalRecord*> rows;
            for (const auto& r : train.records)
                if (r.subgroup == s) rows.push_back(&r);
            detail::column_moments(rows, train.p, detail::str("training subgroup ", s),
                                   sp.means[s - 1], sp.sds[s - 1]);
        }
    }
    return sp;
}

inline Dataset apply_standardization(const Dataset& ds, const StandardizationParams& sp) {
    Dataset out = ds;
    for (auto& r : out.records) {
        const int u = sp.unit_for(r.subgroup);
        if (u >= static_cast<int>(sp.means.size()))
            throw std::invalid_argument(detail::str(
                "apply_standardization: no parameters for subgroup ", r.subgroup));
        r.covariates = (r.covariates - sp.means[u]).cwiseQuotient(sp.sds[u]);
    }
    return out;
}

inline std::tuple<Dataset, Dataset, StandardizationParams> standardize(
    const Dataset& train, const Dataset& test, StandardizationParams::Scope scope) {
    StandardizationParams sp = standardization_params(train, scope);
    Dataset train_out = apply_standardization(train, sp);
    Dataset test_out = test.records.empty() ? test : apply_standardization(test, sp);
    return {std::move(train_out), std::move(test_out), sp};
}

// Reproducible split stratified by (subgroup, event); round-half-up of
// fraction*size records of each stratum go to train.
inline std::pair<Dataset, Dataset> stratified_split(const Dataset& dataset,
                                                    double train_fraction,
                                                    std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw std::invalid_argument("stratified_split: train_fraction must be in (0,1)");
    std::map<std::pair<int, int>, std::vector<int>> strata;
    for (int k = 0; k < static_cast<int>(dataset.records.size()); ++k) {
        const auto& r = dataset.records[k];
        strata[{r.subgroup, r.event}].push_back(k);
    }
    std::vector<char> to_train(dataset.records.size(), 0);
    Rng rng(seed);
    for (auto& [key, idx] : strata) {
        const int size = static_cast<int>(idx.size());
        if (size < 2)
            throw std::invalid_argument(detail::str(
                "stratified_split: stratum (subgroup ", key.first, ", event ", key.second,
                ") has ", size, " record(s); need at least 2"));
        // Fisher-Yates with the shared stream; strata are visited in sorted
        // key order, so the draw sequence is deterministic.
        for (int i = size - 1; i > 0; --i) {
            const int j = static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(i) + 1));
            std::swap(idx[i], idx[j]);
        }
        const int n_train = static_cast<int>(std::floor(train_fraction * size + 0.5));
        for (int i = 0; i < n_train; ++i) to_train[idx[i]] = 1;
    }
    std::vector<SurvivalRecord> train_recs, test_recs;
    for (int k = 0; k < static_cast<int>(dataset.records.size()); ++k)
        (to_train[k] ? train_recs : test_recs).push_back(dataset.records[k]);
    if (train_recs.empty() || test_recs.empty())
        throw std::invalid_argument("stratified_split: a split side is empty");
    Dataset train = make_dataset(std::move(train_recs), false, dataset.covariate_names);
    Dataset test = make_dataset(std::move(test_recs), false, dataset.covariate_names);
    // Keep the parent's subgroup count even if a label vanished on one side.
    train.S = std::max(train.S, dataset.S);
    test.S = std::max(test.S, dataset.S);
    train.subgroup_sizes.resize(train.S, 0);
    test.subgroup_sizes.resize(test.S, 0);
    return {std::move(train), std::move(test)};
}

// Collapses all subgroups into a single cohort (the pooled baseline model).
inline Dataset pool_subgroups(const Dataset& ds) {
    Dataset out = ds;
    for (auto& r : out.records) r.subgroup = 1;
    out.S = 1;
    out.subgroup_sizes = {static_cast<int>(out.records.size())};
    return out;
}

// Covariate matrix / time / event views for one subgroup, in record order.
struct SubgroupView {
    Eigen::MatrixXd X;
    Eigen::VectorXd time;
    Eigen::VectorXi event;
    std::vector<SurvivalRecord> records;  // the subgroup's records, same order
};

inline SubgroupView subgroup_view(const Dataset& ds, int s) {
    std::vector<int> idx = ds.subgroup_indices(s);
    SubgroupView v;
    const int n = static_cast<int>(idx.size());
    v.X.resize(n, ds.p);
    v.time.resize(n);
    v.event.resize(n);
    v.records.reserve(n);
    for (int i = 0; i < n; ++i) {
        const auto& r = ds.records[idx[i]];
        v.X.row(i) = r.covariates.transpose();
        v.time[i] = r.observed_time;
        v.event[i] = r.event;
        v.records.push_back(r);
    }
    return v;
}

}  // namespace coxbvs
