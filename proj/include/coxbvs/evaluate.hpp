#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "coxbvs/coxmodel.hpp"
#include "coxbvs/data.hpp"
#include "coxbvs/math.hpp"

namespace coxbvs {

// Right-continuous step function; for survival-type curves it starts at 1
// and is nonincreasing.
struct StepFunction {
    std::vector<double> times;   // jump locations, strictly increasing
    std::vector<double> values;  // value at and after each jump
    double start_value = 1.0;

    double value_at(double t) const {  // right-continuous evaluation
        int lo = -1, hi = static_cast<int>(times.size());
        while (hi - lo > 1) {
            const int mid = (lo + hi) / 2;
            (times[mid] <= t ? lo : hi) = mid;
        }
        return lo < 0 ? start_value : values[lo];
    }

    double value_before(double t) const {  // left limit
        int lo = -1, hi = static_cast<int>(times.size());
        while (hi - lo > 1) {
            const int mid = (lo + hi) / 2;
            (times[mid] < t ? lo : hi) = mid;
        }
        return lo < 0 ? start_value : values[lo];
    }
};

// Product-limit estimator. With flip_indicator = false this is the usual
// Kaplan-Meier survival curve; the censoring curve flips the event indicator.
inline StepFunction kaplan_meier(const Eigen::VectorXd& time, const Eigen::VectorXi& indicator) {
    const int n = static_cast<int>(time.size());
    if (n == 0) throw std::invalid_argument("kaplan_meier: empty input");
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](int a, int b) { return time[a] < time[b]; });
    StepFunction sf;
    double surv = 1.0;
    int at_risk = n;
    int k = 0;
    while (k < n) {
        const double t = time[order[k]];
        int d = 0, leaving = 0;
        while (k < n && time[order[k]] == t) {
            if (indicator[order[k]]) ++d;
            ++leaving;
            ++k;
        }
        if (d > 0) {
            surv *= 1.0 - static_cast<double>(d) / at_risk;
            sf.times.push_back(t);
            sf.values.push_back(surv);
        }
        at_risk -= leaving;
    }
    return sf;
}

// Kaplan-Meier curve of the censoring distribution (events and censorings
// swap roles).
inline StepFunction km_censoring(const Eigen::VectorXd& time, const Eigen::VectorXi& event) {
    Eigen::VectorXi flipped = event;
    for (int i = 0; i < flipped.size(); ++i) flipped[i] = event[i] ? 0 : 1;
    return kaplan_meier(time, flipped);
}

// Coefficients and plug-in baseline of one fitted cohort, with the training
// standardization needed to scale test covariates.
struct SubgroupPrediction {
    Eigen::VectorXd coefficients;
    Eigen::VectorXd hazard;           // posterior-mean increments
    std::vector<double> boundaries;
    double eta = 1.0;                 // H* parameters, used beyond the grid
    double kappa = 1.0;
};

struct PredictionModel {
    std::vector<SubgroupPrediction> subgroups;
    StandardizationParams standardization;

    const SubgroupPrediction& for_subgroup(int label) const {
        // A pooled model carries a single entry that serves every cohort.
        if (subgroups.size() == 1) return subgroups[0];
        if (label < 1 || label > static_cast<int>(subgroups.size()))
            throw std::invalid_argument(detail::str("no prediction entry for subgroup ", label));
        return subgroups[label - 1];
    }
};

// S(t | x) = exp(-e^{beta'x} H0(t)) for an already-standardized covariate row.
inline double predict_survival(const SubgroupPrediction& m, const Eigen::VectorXd& x, double t) {
    const double risk = std::exp(m.coefficients.dot(x));
    const double h0 = cumulative_baseline_at(m.hazard, m.boundaries, m.eta, m.kappa, t);
    return std::exp(-risk * h0);
}

namespace detail {

struct BrierTestSet {
    Eigen::VectorXd time;
    Eigen::VectorXi event;
    std::vector<Eigen::VectorXd> x;  // standardized covariate rows
};

inline BrierTestSet brier_test_set(const Dataset& test, const StandardizationParams& sp,
                                   int subgroup_label) {
    BrierTestSet ts;
    std::vector<int> idx;
    for (int k = 0; k < static_cast<int>(test.records.size()); ++k)
        if (subgroup_label == 0 || test.records[k].subgroup == subgroup_label) idx.push_back(k);
    if (idx.empty())
        throw std::invalid_argument(detail::str(
            "evaluation: test set has no records", subgroup_label == 0 ? "" : " for subgroup ",
            subgroup_label == 0 ? "" : detail::str(subgroup_label)));
    const int n = static_cast<int>(idx.size());
    ts.time.resize(n);
    ts.event.resize(n);
    for (int i = 0; i < n; ++i) {
        const auto& r = test.records[idx[i]];
        ts.time[i] = r.observed_time;
        ts.event[i] = r.event;
        const int u = sp.unit_for(r.subgroup);
        ts.x.push_back((r.covariates - sp.means[u]).cwiseQuotient(sp.sds[u]));
    }
    return ts;
}

// IPCW weight of one record at evaluation time t.
inline double ipcw_weight(double time, int event, double t, const StepFunction& censor_km) {
    if (time <= t && event == 1) {
        const double c = censor_km.value_before(time);
        if (!(c > 0.0))
            throw std::runtime_error(detail::str(
                "Brier score: censoring survival is 0 just before t=", time,
                "; choose a smaller evaluation horizon t*"));
        return 1.0 / c;
    }
    if (time > t) {
        const double c = censor_km.value_at(t);
        if (!(c > 0.0))
            throw std::runtime_error(detail::str(
                "Brier score: censoring survival is 0 at t=", t,
                "; choose a smaller evaluation horizon t*"));
        return 1.0 / c;
    }
    return 0.0;  // censored before t: status at t unknown, weight 0
}

}  // namespace detail

// IPCW Brier score with an arbitrary survival-probability source: predict(i, t)
// returns the predicted S(t | x_i) for test record i. The censoring curve is
// the reverse Kaplan-Meier of (time, event).
template <class Predict>
double brier_score_generic(const Eigen::VectorXd& time, const Eigen::VectorXi& event,
                           Predict&& predict, double t) {
    const StepFunction ckm = km_censoring(time, event);
    const int n = static_cast<int>(time.size());
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
        const double w = detail::ipcw_weight(time[i], event[i], t, ckm);
        if (w == 0.0) continue;
        const double ind = time[i] > t ? 1.0 : 0.0;
        const double resid = ind - predict(i, t);
        sum += w * resid * resid;
    }
    return sum / n;
}

namespace detail {

inline double brier_at(const SubgroupPrediction& m, const BrierTestSet& ts,
                       const StepFunction& censor_km, double t) {
    const int n = static_cast<int>(ts.time.size());
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
        const double w = ipcw_weight(ts.time[i], ts.event[i], t, censor_km);
        if (w == 0.0) continue;
        const double ind = ts.time[i] > t ? 1.0 : 0.0;
        const double resid = ind - predict_survival(m, ts.x[i], t);
        sum += w * resid * resid;
    }
    return sum / n;
}

// Exact integral of exp(-r * H0(t)) over [t0, t1] for one linear piece of H0
// (H0(t) = h_at_t0 + slope * (t - t0)) or, beyond the grid, for the Weibull
// tail H0(t) = offset + eta * t^kappa.
inline double integral_exp_linear(double r, double h_at_t0, double slope, double t0, double t1) {
    const double width = t1 - t0;
    const double a = r * h_at_t0;
    const double b = r * slope;
    if (b * width < 1e-12) return std::exp(-a) * width * (1.0 - 0.5 * b * width);
    return std::exp(-a) * (1.0 - std::exp(-b * width)) / b;
}

inline double integral_exp_weibull_tail(double r, double offset, double eta, double kappa,
                                        double t0, double t1) {
    // int exp(-r*(offset + eta t^kappa)) dt via the upper incomplete gamma:
    // int_a^b exp(-c t^k) dt = (Gamma(1/k, c a^k) - Gamma(1/k, c b^k)) / (k c^{1/k}).
    const double c = r * eta;
    const double s = 1.0 / kappa;
    const double g0 = boost::math::tgamma(s, c * std::pow(t0, kappa));
    const double g1 = boost::math::tgamma(s, c * std::pow(t1, kappa));
    return std::exp(-r * offset) * (g0 - g1) / (kappa * std::pow(c, s));
}

}  // namespace detail

// BS(t): IPCW-weighted mean squared difference between the survival status
// 1(time > t) and the predicted survival probability. Records censored
// before t contribute weight 0; events before t are weighted by the left
// limit of the censoring curve at their own time.
inline double brier_score(const PredictionModel& model, const Dataset& test, double t,
                          int subgroup_label = 0) {
    const auto ts = detail::brier_test_set(test, model.standardization, subgroup_label);
    const StepFunction ckm = km_censoring(ts.time, ts.event);
    return detail::brier_at(model.for_subgroup(std::max(subgroup_label, 1)), ts, ckm, t);
}

// Largest test event time with censoring survival above the floor; the
// default evaluation horizon.
inline double default_t_star(const Dataset& test, int subgroup_label = 0,
                             double min_censoring_survival = 0.05) {
    std::vector<double> times;
    std::vector<int> events;
    for (const auto& r : test.records)
        if (subgroup_label == 0 || r.subgroup == subgroup_label) {
            times.push_back(r.observed_time);
            events.push_back(r.event);
        }
    if (times.empty()) throw std::invalid_argument("default_t_star: empty test set");
    Eigen::VectorXd tv(static_cast<int>(times.size()));
    Eigen::VectorXi ev(static_cast<int>(times.size()));
    for (int i = 0; i < tv.size(); ++i) {
        tv[i] = times[i];
        ev[i] = events[i];
    }
    const StepFunction ckm = km_censoring(tv, ev);
    double best = -1.0;
    for (int i = 0; i < tv.size(); ++i)
        if (ev[i] == 1 && ckm.value_at(tv[i]) > min_censoring_survival)
            best = std::max(best, tv[i]);
    if (best <= 0.0)
        throw std::runtime_error(
            "default_t_star: no event time with positive censoring support");
    return best;
}

// Alternative horizon: a quantile of the observed test times. On designs
// with very heavy-tailed survival times the censoring-support rule above can
// land deep in a sparse tail where one or two extreme patients dominate the
// integral; the quantile horizon keeps the comparison in the populated part
// of the time axis.
inline double quantile_t_star(const Dataset& test, int subgroup_label, double quantile) {
    if (!(quantile > 0.0 && quantile <= 1.0))
        throw std::invalid_argument("quantile_t_star: quantile must be in (0,1]");
    std::vector<double> times;
    for (const auto& r : test.records)
        if (subgroup_label == 0 || r.subgroup == subgroup_label)
            times.push_back(r.observed_time);
    if (times.empty()) throw std::invalid_argument("quantile_t_star: empty test set");
    std::sort(times.begin(), times.end());
    return times[static_cast<std::size_t>(quantile * (times.size() - 1))];
}

// IBS(t*) = (1/t*) int_0^{t*} BS(t) dt, integrated exactly: weights and
// indicators are constant between the observed test times, and on each such
// segment the survival curves are exponentials of the piecewise-linear H0
// (Weibull-shaped beyond the grid), which integrate in closed form.
inline double integrated_brier(const PredictionModel& model, const Dataset& test, double t_star,
                               int subgroup_label = 0) {
    if (!(t_star > 0.0)) throw std::invalid_argument("integrated_brier: t* must be positive");
    const auto ts = detail::brier_test_set(test, model.standardization, subgroup_label);
    const StepFunction ckm = km_censoring(ts.time, ts.event);
    const auto& m = model.for_subgroup(std::max(subgroup_label, 1));

    std::vector<double> cuts{0.0, t_star};
    for (int i = 0; i < ts.time.size(); ++i)
        if (ts.time[i] < t_star) cuts.push_back(ts.time[i]);
    for (double b : m.boundaries)
        if (b > 0.0 && b < t_star) cuts.push_back(b);
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

    const int n = static_cast<int>(ts.time.size());
    const double grid_end = m.boundaries.back();
    double total = 0.0;
    for (std::size_t seg = 0; seg + 1 < cuts.size(); ++seg) {
        const double t0 = cuts[seg];
        const double t1 = cuts[seg + 1];
        const double tmid = 0.5 * (t0 + t1);
        const double h0 = cumulative_baseline_at(m.hazard, m.boundaries, m.eta, m.kappa, t0);
        const double h1 = cumulative_baseline_at(m.hazard, m.boundaries, m.eta, m.kappa, t1);
        const bool tail = t0 >= grid_end;
        const double slope = tail ? 0.0 : (h1 - h0) / (t1 - t0);
        for (int i = 0; i < n; ++i) {
            const double w = detail::ipcw_weight(ts.time[i], ts.event[i], tmid, ckm);
            if (w == 0.0) continue;
            const double ind = ts.time[i] > tmid ? 1.0 : 0.0;
            const double r = std::exp(m.coefficients.dot(ts.x[i]));
            // int (ind - S)^2 = ind^2 * len - 2 ind int S + int S^2
            double int_s, int_s2;
            if (tail) {
                const double offset = h0 - m.eta * std::pow(t0, m.kappa);
                int_s = detail::integral_exp_weibull_tail(r, offset, m.eta, m.kappa, t0, t1);
                int_s2 =
                    detail::integral_exp_weibull_tail(2.0 * r, offset, m.eta, m.kappa, t0, t1);
            } else {
                int_s = detail::integral_exp_linear(r, h0, slope, t0, t1);
                int_s2 = detail::integral_exp_linear(2.0 * r, h0, slope, t0, t1);
            }
            total += w * (ind * (t1 - t0) - 2.0 * ind * int_s + int_s2);
        }
    }
    return total / (n * t_star);
}

}  // namespace coxbvs
