#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "coxbvs/data.hpp"
#include "coxbvs/graph.hpp"
#include "coxbvs/math.hpp"
#include "coxbvs/rng.hpp"

namespace coxbvs {

// Gamma process prior on the cumulative baseline hazard, centered at the
// Weibull H*(t) = eta * t^kappa with concentration a0.
struct BaselineHazardPrior {
    double a0 = 2.0;
    std::vector<double> eta;    // per subgroup
    std::vector<double> kappa;  // per subgroup

    void validate() const {
        if (!(a0 > 0.0)) throw std::invalid_argument("baseline prior: a0 must be positive");
        for (double e : eta)
            if (!(e > 0.0)) throw std::invalid_argument("baseline prior: eta must be positive");
        for (double k : kappa)
            if (!(k > 0.0)) throw std::invalid_argument("baseline prior: kappa must be positive");
    }
};

// Spike-and-slab coefficient prior: N(0, tau^2) excluded, N(0, (c tau)^2)
// included. bernoulli_pi is the independent inclusion probability used by the
// baseline models without the MRF prior.
struct SelectionPrior {
    double tau = 0.0375;
    double c = 20.0;
    double bernoulli_pi = 0.02;

    double spike_sd() const { return tau; }
    double slab_sd() const { return c * tau; }
    double sd_for(int gamma_bit) const { return gamma_bit ? slab_sd() : spike_sd(); }

    void validate() const {
        if (!(tau > 0.0)) throw std::invalid_argument("selection prior: tau must be positive");
        if (!(c > 1.0)) throw std::invalid_argument("selection prior: c must exceed 1");
        if (!(bernoulli_pi > 0.0 && bernoulli_pi < 1.0))
            throw std::invalid_argument("selection prior: bernoulli_pi must be in (0,1)");
    }
};

// Per-subgroup sampler state for the Cox part of the model.
struct CoxSubgroupState {
    Eigen::VectorXd beta;
    Eigen::VectorXi gamma;
    Eigen::VectorXd hazard;          // h_g, one per interval
    Eigen::VectorXd mh_sd;           // fallback proposal scales, adapted in burn-in
    Eigen::VectorXi mh_adapt_count;  // Robbins-Monro step counters
};

namespace detail {

// Per-patient interval index (1-based) and event flag derived from the
// grouped risk/failure sets.
struct PatientIntervals {
    std::vector<int> interval_of;
    std::vector<char> is_event;
};

inline PatientIntervals patient_intervals(const GroupedData& gd, int n) {
    PatientIntervals pi;
    pi.interval_of.assign(n, 0);
    pi.is_event.assign(n, 0);
    const int J = gd.intervals();
    for (int g = 1; g <= J; ++g) {
        for (int k : gd.risk_sets[g - 1]) {
            if (k < 0 || k >= n)
                throw std::invalid_argument("grouped data refers to an out-of-range record");
            pi.interval_of[k] = std::max(pi.interval_of[k], g);
        }
        for (int k : gd.failure_sets[g - 1]) pi.is_event[k] = 1;
    }
    for (int k = 0; k < n; ++k)
        if (pi.interval_of[k] == 0)
            throw std::invalid_argument(detail::str("record ", k + 1, " is in no risk set"));
    return pi;
}

// q/(e^q - 1) and q * d/dq[q/(e^q - 1)], stable across the whole range.
inline void event_term_derivs(double q, double& w, double& qwp) {
    if (q < 1e-6) {
        w = 1.0 - 0.5 * q;
        qwp = -0.5 * q;
        return;
    }
    if (q > 700.0) {
        w = 0.0;
        qwp = 0.0;
        return;
    }
    const double em1 = std::expm1(q);
    w = q / em1;
    qwp = q * (em1 - q * (em1 + 1.0)) / (em1 * em1);
}

}  // namespace detail

// Grouped-data Cox likelihood machinery for one subgroup. Caches the
// per-patient interval lookup; all evaluations are O(n).
class CoxLikelihood {
public:
    CoxLikelihood() = default;
    CoxLikelihood(const GroupedData& gd, Eigen::MatrixXd X)
        : X_(std::move(X)), J_(gd.intervals()) {
        const int n = static_cast<int>(X_.rows());
        auto pi = detail::patient_intervals(gd, n);
        interval_of_ = std::move(pi.interval_of);
        is_event_ = std::move(pi.is_event);
    }

    int n() const { return static_cast<int>(X_.rows()); }
    int p() const { return static_cast<int>(X_.cols()); }
    int intervals() const { return J_; }
    const Eigen::MatrixXd& X() const { return X_; }
    bool is_event(int k) const { return is_event_[k] != 0; }
    int interval_of(int k) const { return interval_of_[k]; }

    Eigen::VectorXd linear_predictor(const Eigen::VectorXd& beta) const { return X_ * beta; }

    // log L = sum_k [ -A_k e^{lp_k} ] + sum_{events} log(1 - e^{-h_{g(k)} e^{lp_k}})
    // with A_k the cumulative hazard mass over intervals where k is at risk
    // but not failing. Returns -inf when an event term has zero probability.
    double loglik(const Eigen::VectorXd& lp, const Eigen::VectorXd& h) const {
        check_h(h);
        const Eigen::VectorXd prefix = hazard_prefix(h);
        double ll = 0.0;
        for (int k = 0; k < n(); ++k) {
            const int g = interval_of_[k];
            const double e = std::exp(lp[k]);
            const double a = prefix[g - 1] + (is_event_[k] ? 0.0 : h[g - 1]);
            ll -= a * e;
            if (is_event_[k]) ll += log1mexp(h[g - 1] * e);
        }
        return ll;
    }

    // Hazard masses reused across a coefficient sweep (h fixed in step 4):
    // A_k as above and the per-patient failure-interval increment h_{g(k)}.
    struct HazardTerms {
        Eigen::VectorXd at_risk_mass;   // A_k
        Eigen::VectorXd event_h;        // h_{g(k)}
    };

    HazardTerms hazard_terms(const Eigen::VectorXd& h) const {
        check_h(h);
        const Eigen::VectorXd prefix = hazard_prefix(h);
        HazardTerms ht;
        ht.at_risk_mass.resize(n());
        ht.event_h.resize(n());
        for (int k = 0; k < n(); ++k) {
            const int g = interval_of_[k];
            ht.at_risk_mass[k] = prefix[g - 1] + (is_event_[k] ? 0.0 : h[g - 1]);
            ht.event_h[k] = h[g - 1];
        }
        return ht;
    }

    // Value and first two derivatives of the log likelihood as a function of
    // beta_i alone, evaluated at beta_i = x; lp0 is the linear predictor at
    // the current beta with beta_i = x0.
    struct Derivs {
        double value = 0.0;
        double d1 = 0.0;
        double d2 = 0.0;
    };

    Derivs coefficient_derivs(const Eigen::VectorXd& lp0, double x0, double x, int i,
                              const HazardTerms& ht) const {
        Derivs d;
        const double shift = x - x0;
        for (int k = 0; k < n(); ++k) {
            const double xki = X_(k, i);
            const double e = std::exp(lp0[k] + shift * xki);
            const double a = ht.at_risk_mass[k];
            d.value -= a * e;
            d.d1 -= a * e * xki;
            d.d2 -= a * e * xki * xki;
            if (is_event_[k]) {
                const double q = ht.event_h[k] * e;
                d.value += log1mexp(q);
                double w, qwp;
                detail::event_term_derivs(q, w, qwp);
                d.d1 += xki * w;
                d.d2 += xki * xki * qwp;
            }
        }
        return d;
    }

    // Per-interval sum of e^{lp_k} over the at-risk patients that do not fail
    // in the interval (the rate contribution of step 5).
    Eigen::VectorXd risk_rate_terms(const Eigen::VectorXd& lp) const {
        Eigen::VectorXd per_interval = Eigen::VectorXd::Zero(J_);
        Eigen::VectorXd event_in = Eigen::VectorXd::Zero(J_);
        for (int k = 0; k < n(); ++k) {
            const double e = std::exp(lp[k]);
            per_interval[interval_of_[k] - 1] += e;
            if (is_event_[k]) event_in[interval_of_[k] - 1] += e;
        }
        // suffix sums: everyone observed in a later interval is still at risk
        Eigen::VectorXd out(J_);
        double suffix = 0.0;
        for (int g = J_ - 1; g >= 0; --g) {
            suffix += per_interval[g];
            out[g] = suffix - event_in[g];
        }
        return out;
    }

private:
    void check_h(const Eigen::VectorXd& h) const {
        if (static_cast<int>(h.size()) != J_)
            throw std::invalid_argument(detail::str(
                "hazard vector has length ", h.size(), ", expected ", J_));
    }

    Eigen::VectorXd hazard_prefix(const Eigen::VectorXd& h) const {
        Eigen::VectorXd prefix(J_ + 1);
        prefix[0] = 0.0;
        for (int g = 0; g < J_; ++g) prefix[g + 1] = prefix[g] + h[g];
        return prefix;
    }

    Eigen::MatrixXd X_;
    std::vector<int> interval_of_;
    std::vector<char> is_event_;
    int J_ = 0;
};

inline double grouped_log_likelihood(const Eigen::VectorXd& beta, const Eigen::VectorXd& h,
                                     const GroupedData& gd, const Eigen::MatrixXd& X) {
    if (X.cols() != beta.size())
        throw std::invalid_argument("grouped_log_likelihood: beta length != covariate count");
    CoxLikelihood lik(gd, X);
    return lik.loglik(lik.linear_predictor(beta), h);
}

// Censored Weibull MLE in the cumulative-hazard parameterization
// H(t) = eta * t^kappa, by a 1-D profile root solve in kappa.
inline std::pair<double, double> fit_weibull_baseline(const Eigen::VectorXd& time,
                                                      const Eigen::VectorXi& event) {
    const int n = static_cast<int>(time.size());
    if (n == 0 || event.size() != n)
        throw std::invalid_argument("fit_weibull_baseline: empty or mismatched input");
    int d = 0;
    double tmax = 0.0;
    for (int i = 0; i < n; ++i) {
        if (!(time[i] > 0.0))
            throw std::invalid_argument("fit_weibull_baseline: times must be positive");
        d += event[i];
        tmax = std::max(tmax, time[i]);
    }
    if (d < 2) throw std::invalid_argument("fit_weibull_baseline: need at least 2 events");

    // Work on times scaled into (0, 1]; eta is unscaled at the end.
    Eigen::VectorXd lt(n);
    for (int i = 0; i < n; ++i) lt[i] = std::log(time[i] / tmax);
    double sum_event_lt = 0.0;
    for (int i = 0; i < n; ++i)
        if (event[i]) sum_event_lt += lt[i];

    auto score = [&](double kappa) {
        double sw = 0.0, swl = 0.0;
        for (int i = 0; i < n; ++i) {
            const double w = std::exp(kappa * lt[i]);
            sw += w;
            swl += w * lt[i];
        }
        return d / kappa + sum_event_lt - d * swl / sw;
    };

    double lo = 1e-8;
    double hi = 1.0;
    int expansions = 0;
    while (score(hi) > 0.0) {
        hi *= 2.0;
        if (++expansions > 40)
            throw std::runtime_error(detail::str(
                "fit_weibull_baseline: no finite shape MLE (score still positive at kappa=", hi,
                " after ", expansions, " bracket expansions); event times look degenerate"));
    }
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (score(mid) > 0.0 ? lo : hi) = mid;
    }
    const double kappa = 0.5 * (lo + hi);
    double sw = 0.0;
    for (int i = 0; i < n; ++i) sw += std::exp(kappa * lt[i]);
    const double eta = d / sw / std::pow(tmax, kappa);
    return {eta, kappa};
}

// Conditional inclusion probability of gamma_{s,i} given the coefficient,
// the graph, and the other indicators. use_mrf = false swaps in the
// independent Bernoulli prior of the baseline models.
inline double gamma_inclusion_probability(const std::vector<CoxSubgroupState>& states, int s,
                                          int i, const JointAdjacency& G,
                                          const SelectionPrior& sel, const MrfPrior& mrf,
                                          bool use_mrf) {
    const CoxSubgroupState& st = states[s];
    const int p = static_cast<int>(st.beta.size());
    double log_odds;
    if (use_mrf) {
        double within_active = 0.0;
        for (int j = 0; j < p; ++j)
            if (j != i && G.within[s](i, j) && states[s].gamma[j]) within_active += 1.0;
        double between_active = 0.0;
        for (int r = 0; r < static_cast<int>(states.size()); ++r)
            if (r != s && G.between_edge(std::min(r, s), std::max(r, s), i) &&
                states[r].gamma[i])
                between_active += 1.0;
        log_odds = mrf.a + 2.0 * mrf.b_within * within_active +
                   2.0 * mrf.b_between * between_active;
    } else {
        log_odds = logit(sel.bernoulli_pi);
    }
    log_odds += normal_logpdf(st.beta[i], 0.0, sel.slab_sd()) -
                normal_logpdf(st.beta[i], 0.0, sel.spike_sd());
    return logistic(log_odds);
}

// Sequential Gibbs scan over the inclusion indicators of subgroup s.
inline void update_gamma(std::vector<CoxSubgroupState>& states, int s, const JointAdjacency& G,
                         const SelectionPrior& sel, const MrfPrior& mrf, bool use_mrf,
                         Rng& rng) {
    const int p = static_cast<int>(states[s].beta.size());
    for (int i = 0; i < p; ++i) {
        const double prob = gamma_inclusion_probability(states, s, i, G, sel, mrf, use_mrf);
        states[s].gamma[i] = rng.uniform() < prob ? 1 : 0;
    }
}

namespace detail {

struct ProposalParams {
    double mean = 0.0;
    double var = 0.0;
    bool newton = false;
};

// Proposal rule of the adaptive Metropolis-Hastings coefficient update: a
// Newton step on the log conditional posterior where it is concave, otherwise
// a random walk with the adapted per-coefficient scale. The rule is a
// deterministic function of the evaluation point, so the asymmetric
// acceptance ratio below is exact.
inline ProposalParams beta_proposal(const CoxLikelihood::Derivs& lik, double x, double sd_prior,
                                    double fallback_sd) {
    const double d1 = lik.d1 - x / (sd_prior * sd_prior);
    const double d2 = lik.d2 - 1.0 / (sd_prior * sd_prior);
    ProposalParams pp;
    if (d2 < -1e-12 && std::isfinite(d1) && std::isfinite(d2)) {
        pp.mean = x - d1 / d2;
        pp.var = std::min(-1.0 / d2, 25.0);
        pp.newton = std::isfinite(pp.mean);
    }
    if (!pp.newton) {
        pp.mean = x;
        pp.var = fallback_sd * fallback_sd;
    }
    return pp;
}

}  // namespace detail

// Metropolis-Hastings update of beta_{s,i} given everything else. lp is the
// subgroup linear predictor and is kept in sync on acceptance. Returns true
// on acceptance.
inline bool update_beta_coordinate(CoxSubgroupState& st, Eigen::VectorXd& lp,
                                   const CoxLikelihood& lik,
                                   const CoxLikelihood::HazardTerms& ht, int i,
                                   const SelectionPrior& sel, bool adapt, Rng& rng) {
    const double sd_prior = sel.sd_for(st.gamma[i]);
    const double x0 = st.beta[i];
    const auto d0 = lik.coefficient_derivs(lp, x0, x0, i, ht);
    const auto fwd = detail::beta_proposal(d0, x0, sd_prior, st.mh_sd[i]);
    const double x1 = rng.normal(fwd.mean, std::sqrt(fwd.var));
    const auto d1 = lik.coefficient_derivs(lp, x0, x1, i, ht);
    const auto rev = detail::beta_proposal(d1, x1, sd_prior, st.mh_sd[i]);

    const double f0 = d0.value + normal_logpdf(x0, 0.0, sd_prior);
    const double f1 = d1.value + normal_logpdf(x1, 0.0, sd_prior);
    const double log_r = f1 + normal_logpdf(x0, rev.mean, std::sqrt(rev.var)) -
                         f0 - normal_logpdf(x1, fwd.mean, std::sqrt(fwd.var));
    const bool accept = std::isfinite(f1) && std::log(rng.uniform()) < std::min(0.0, log_r);
    if (accept) {
        st.beta[i] = x1;
        lp += (x1 - x0) * lik.X().col(i);
    }
    if (adapt && !fwd.newton) {
        // Robbins-Monro on the fallback scale toward 44% acceptance,
        // burn-in only; the scale is frozen afterwards.
        st.mh_adapt_count[i] += 1;
        const double step = 1.0 / std::sqrt(1.0 + st.mh_adapt_count[i]);
        const double target = 0.44;
        st.mh_sd[i] = std::exp(std::log(st.mh_sd[i]) + step * ((accept ? 1.0 : 0.0) - target));
        st.mh_sd[i] = std::min(std::max(st.mh_sd[i], 1e-6), 1e3);
    }
    return accept;
}

// Independent gamma redraw of every hazard increment (step 5):
// h_g ~ Gamma(a0 * (H*(c_g) - H*(c_{g-1})) + d_g,
//             a0 + sum_{at risk, not failing in g} e^{lp_k}).
inline void update_hazard_increments(CoxSubgroupState& st, const CoxLikelihood& lik,
                                     const GroupedData& gd, const Eigen::VectorXd& lp,
                                     double a0, double eta, double kappa, Rng& rng) {
    const int J = gd.intervals();
    const Eigen::VectorXd risk_terms = lik.risk_rate_terms(lp);
    for (int g = 0; g < J; ++g) {
        const double dh = eta * (std::pow(gd.boundaries[g + 1], kappa) -
                                 std::pow(gd.boundaries[g], kappa));
        const double shape = a0 * dh + gd.event_counts[g];
        const double rate = a0 + risk_terms[g];
        st.hazard[g] = rng.gamma_rate(shape, rate);
    }
}

// H0(t) from the sampled increments: full increments of the intervals left of
// t, linear interpolation within the containing interval, prior-mean slope of
// H* beyond the terminal boundary.
inline double cumulative_baseline_at(const Eigen::VectorXd& h,
                                     const std::vector<double>& boundaries, double eta,
                                     double kappa, double t) {
    if (!(t >= 0.0)) throw std::invalid_argument("cumulative_baseline_at: t must be >= 0");
    const int J = static_cast<int>(boundaries.size()) - 1;
    if (static_cast<int>(h.size()) != J)
        throw std::invalid_argument("cumulative_baseline_at: h length != interval count");
    double total = 0.0;
    for (int g = 1; g <= J; ++g) {
        if (t >= boundaries[g]) {
            total += h[g - 1];
            continue;
        }
        if (t > boundaries[g - 1])
            total += h[g - 1] * (t - boundaries[g - 1]) / (boundaries[g] - boundaries[g - 1]);
        return total;
    }
    // beyond the terminal boundary
    return total + eta * (std::pow(t, kappa) - std::pow(boundaries[J], kappa));
}

}  // namespace coxbvs
