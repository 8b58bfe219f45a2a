#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "coxbvs/sampler.hpp"

namespace coxbvs {

// Empirical posterior summaries of one chain.
struct PosteriorSummary {
    int p = 0;
    int S = 0;
    std::vector<Eigen::VectorXd> selection_prob;     // per subgroup, length p
    std::vector<Eigen::VectorXd> marginal_mean;
    std::vector<Eigen::VectorXd> marginal_sd;
    std::vector<Eigen::VectorXd> conditional_mean;   // over draws with gamma = 1
    std::vector<Eigen::VectorXd> conditional_sd;
    // Conditional statistics are undefined when a variable is never (mean)
    // or at most once (sd) included; the flags make that explicit.
    std::vector<Eigen::Matrix<bool, Eigen::Dynamic, 1>> conditional_mean_defined;
    std::vector<Eigen::Matrix<bool, Eigen::Dynamic, 1>> conditional_sd_defined;
    std::vector<double> mean_model_size;             // m* per subgroup
};

namespace detail {

inline double sample_sd(double sum, double sumsq, int n) {
    if (n < 2) return 0.0;
    const double mean = sum / n;
    double var = (sumsq - n * mean * mean) / (n - 1);
    if (var < 0.0) var = 0.0;
    return std::sqrt(var);
}

}  // namespace detail

inline PosteriorSummary summarize(const ChainSamples& samples) {
    if (samples.draws() == 0) throw std::invalid_argument("summarize: chain has no stored draws");
    PosteriorSummary ps;
    ps.p = samples.p;
    ps.S = samples.S;
    const int n = samples.draws();
    for (int s = 0; s < samples.S; ++s) {
        Eigen::VectorXd sel = Eigen::VectorXd::Zero(samples.p);
        Eigen::VectorXd msum = Eigen::VectorXd::Zero(samples.p);
        Eigen::VectorXd msumsq = Eigen::VectorXd::Zero(samples.p);
        Eigen::VectorXd csum = Eigen::VectorXd::Zero(samples.p);
        Eigen::VectorXd csumsq = Eigen::VectorXd::Zero(samples.p);
        Eigen::VectorXi cn = Eigen::VectorXi::Zero(samples.p);
        double model_size = 0.0;
        for (int t = 0; t < n; ++t) {
            for (int i = 0; i < samples.p; ++i) {
                const double b = samples.beta[s](t, i);
                msum[i] += b;
                msumsq[i] += b * b;
                if (samples.gamma[s](t, i)) {
                    sel[i] += 1.0;
                    csum[i] += b;
                    csumsq[i] += b * b;
                    cn[i] += 1;
                    model_size += 1.0;
                }
            }
        }
        ps.selection_prob.push_back(sel / n);
        ps.marginal_mean.push_back(msum / n);
        Eigen::VectorXd msd(samples.p), cmean(samples.p), csd(samples.p);
        Eigen::Matrix<bool, Eigen::Dynamic, 1> cmean_def(samples.p), csd_def(samples.p);
        for (int i = 0; i < samples.p; ++i) {
            msd[i] = detail::sample_sd(msum[i], msumsq[i], n);
            cmean_def[i] = cn[i] >= 1;
            csd_def[i] = cn[i] >= 2;
            cmean[i] = cn[i] >= 1 ? csum[i] / cn[i] : 0.0;
            csd[i] = detail::sample_sd(csum[i], csumsq[i], cn[i]);
        }
        ps.marginal_sd.push_back(std::move(msd));
        ps.conditional_mean.push_back(std::move(cmean));
        ps.conditional_sd.push_back(std::move(csd));
        ps.conditional_mean_defined.push_back(std::move(cmean_def));
        ps.conditional_sd_defined.push_back(std::move(csd_def));
        ps.mean_model_size.push_back(model_size / n);
    }
    return ps;
}

// The m* rule: the round(mean model size) variables with the highest
// posterior selection probability, ties broken by lower index.
inline std::vector<std::vector<int>> select_variables(const PosteriorSummary& summary) {
    std::vector<std::vector<int>> out;
    for (int s = 0; s < summary.S; ++s) {
        const int m = static_cast<int>(std::floor(summary.mean_model_size[s] + 0.5));
        std::vector<int> order(summary.p);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
            return summary.selection_prob[s][a] > summary.selection_prob[s][b];
        });
        std::vector<int> sel(order.begin(), order.begin() + std::min(m, summary.p));
        std::sort(sel.begin(), sel.end());
        out.push_back(std::move(sel));
    }
    return out;
}

// Median probability model: marginal posterior mean where the selection
// probability exceeds 0.5 (strictly), zero elsewhere.
inline std::vector<Eigen::VectorXd> mpm_coefficients(const PosteriorSummary& summary) {
    std::vector<Eigen::VectorXd> out;
    for (int s = 0; s < summary.S; ++s) {
        Eigen::VectorXd beta = Eigen::VectorXd::Zero(summary.p);
        for (int i = 0; i < summary.p; ++i)
            if (summary.selection_prob[s][i] > 0.5) beta[i] = summary.marginal_mean[s][i];
        out.push_back(std::move(beta));
    }
    return out;
}

// Model-averaging approximation: per subgroup, the mean coefficient vector
// over the 100 stored iterations with the highest log-likelihood (fewer when
// the chain is shorter). Ties keep the earlier draw first.
inline std::vector<Eigen::VectorXd> bma_coefficients(const ChainSamples& samples,
                                                     int top_models = 100) {
    if (samples.draws() == 0)
        throw std::invalid_argument("bma_coefficients: chain has no stored draws");
    std::vector<Eigen::VectorXd> out;
    const int n = samples.draws();
    const int keep = std::min(top_models, n);
    for (int s = 0; s < samples.S; ++s) {
        std::vector<int> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
            return samples.loglik[s][a] > samples.loglik[s][b];
        });
        Eigen::VectorXd beta = Eigen::VectorXd::Zero(samples.p);
        for (int t = 0; t < keep; ++t) beta += samples.beta[s].row(order[t]).transpose();
        out.push_back(beta / keep);
    }
    return out;
}

// Posterior-mean hazard increments, the plug-in baseline for prediction.
inline std::vector<Eigen::VectorXd> mean_hazard(const ChainSamples& samples) {
    std::vector<Eigen::VectorXd> out;
    for (int s = 0; s < samples.S; ++s)
        out.push_back(samples.hazard[s].colwise().mean().transpose());
    return out;
}

struct EdgeProbabilities {
    // within[s](i,j): inclusion frequency of edge (i,j) in subgroup s
    std::vector<Eigen::MatrixXd> within;
    // between[q][i]: frequency of the covariate-i link of subgroup pair q
    std::vector<Eigen::VectorXd> between;
};

inline EdgeProbabilities edge_probabilities(const ChainSamples& samples) {
    if (samples.draws() == 0 || samples.edges_within.empty() ||
        samples.edges_within[0].cols() == 0)
        throw std::invalid_argument("edge_probabilities: chain stores no graph draws");
    EdgeProbabilities ep;
    const int n = samples.draws();
    const int p = samples.p;
    for (int s = 0; s < samples.S; ++s) {
        Eigen::MatrixXd m = Eigen::MatrixXd::Zero(p, p);
        for (int i = 0; i < p; ++i)
            for (int j = i + 1; j < p; ++j) {
                double c = 0.0;
                const int col = ChainSamples::pair_col(p, i, j);
                for (int t = 0; t < n; ++t) c += samples.edges_within[s](t, col);
                m(i, j) = c / n;
                m(j, i) = m(i, j);
            }
        ep.within.push_back(std::move(m));
    }
    for (const auto& eb : samples.edges_between) {
        Eigen::VectorXd v = Eigen::VectorXd::Zero(p);
        for (int i = 0; i < p; ++i) {
            double c = 0.0;
            for (int t = 0; t < n; ++t) c += eb(t, i);
            v[i] = c / n;
        }
        ep.between.push_back(std::move(v));
    }
    return ep;
}

}  // namespace coxbvs
