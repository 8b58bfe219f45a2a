#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "coxbvs/data.hpp"
#include "coxbvs/math.hpp"
#include "coxbvs/rng.hpp"

namespace coxbvs {

// Synthetic multi-subgroup design: block-structured Gaussian covariates and
// Weibull event/censoring times driven by per-subgroup linear predictors.
struct SimulationDesign {
    int p = 0;
    std::vector<int> n_per_subgroup;             // n_s
    std::vector<Eigen::VectorXd> true_effects;   // beta_s, length p each
    std::vector<double> weibull_scale;           // eta_s > 0
    std::vector<double> weibull_shape;           // kappa_s > 0
    double block_corr = 0.5;                     // within-block correlation of the covariates
    std::vector<std::vector<int>> blocks;        // 0-based covariate index blocks
    bool censoring_covariate_effect = true;      // include x'beta in censoring draw
    std::uint64_t seed = 0;

    int subgroups() const { return static_cast<int>(n_per_subgroup.size()); }

    void validate() const {
        const int S = subgroups();
        if (p < 1 || S < 1) throw std::invalid_argument("simulation design: empty dimensions");
        if (static_cast<int>(true_effects.size()) != S ||
            static_cast<int>(weibull_scale.size()) != S ||
            static_cast<int>(weibull_shape.size()) != S)
            throw std::invalid_argument("simulation design: per-subgroup field lengths differ");
        for (int s = 0; s < S; ++s) {
            if (static_cast<int>(true_effects[s].size()) != p)
                throw std::invalid_argument(detail::str(
                    "simulation design: effects for subgroup ", s + 1, " have length ",
                    true_effects[s].size(), ", expected ", p));
            if (!(weibull_scale[s] > 0.0) || !(weibull_shape[s] > 0.0))
                throw std::invalid_argument("simulation design: Weibull parameters must be positive");
        }
        std::vector<char> used(p, 0);
        for (const auto& b : blocks)
            for (int j : b) {
                if (j < 0 || j >= p)
                    throw std::invalid_argument("simulation design: block index out of range");
                if (used[j]) throw std::invalid_argument("simulation design: blocks overlap");
                used[j] = 1;
            }
    }
};

// Precision matrix with unit implied variances and equal-magnitude partial
// correlations inside each block. The standardized precision gets off-diagonal
// entries +rho inside blocks; the implied partial correlation
// -omega_ij/sqrt(omega_ii*omega_jj) is then -rho, the only sign for which the
// matrix stays positive definite at |rho| = 0.5 in blocks of three.
inline Eigen::MatrixXd make_precision(int p, const std::vector<std::vector<int>>& blocks,
                                      double partial_corr) {
    if (p < 1) throw std::invalid_argument("make_precision: p must be >= 1");
    Eigen::MatrixXd K = Eigen::MatrixXd::Identity(p, p);
    for (const auto& block : blocks)
        for (std::size_t a = 0; a < block.size(); ++a)
            for (std::size_t b = a + 1; b < block.size(); ++b) {
                const int i = block[a], j = block[b];
                if (i < 0 || i >= p || j < 0 || j >= p || i == j)
                    throw std::invalid_argument("make_precision: invalid block index");
                K(i, j) = partial_corr;
                K(j, i) = partial_corr;
            }
    Eigen::LLT<Eigen::MatrixXd> llt(K);
    if (llt.info() != Eigen::Success)
        throw std::invalid_argument(detail::str(
            "make_precision: partial correlation ", partial_corr,
            " does not give a positive definite block"));
    // Rescale so the implied covariance K^{-1} has unit diagonal:
    // Omega = D^{1/2} K D^{1/2} with D = diag(K^{-1}).
    const Eigen::MatrixXd sigma = llt.solve(Eigen::MatrixXd::Identity(p, p));
    const Eigen::VectorXd d = sigma.diagonal().cwiseSqrt();
    Eigen::MatrixXd omega = d.asDiagonal() * K * d.asDiagonal();
    omega = ((omega + omega.transpose()) / 2.0).eval();
    return omega;
}

// Precision matrix whose implied covariance is the unit-variance block
// equicorrelation model: corr(x_i, x_j) = rho for i, j sharing a block, 0
// elsewhere. This is the covariate model of the synthetic design; covariates
// with a shared effect move together. Closed form per k-block:
// ((1-rho)I + rho J)^{-1} = a I + b J with a = 1/(1-rho),
// b = -rho / ((1-rho)(1+(k-1)rho)).
inline Eigen::MatrixXd make_block_correlation_precision(int p,
                                                        const std::vector<std::vector<int>>& blocks,
                                                        double rho) {
    if (p < 1) throw std::invalid_argument("make_block_correlation_precision: p must be >= 1");
    Eigen::MatrixXd omega = Eigen::MatrixXd::Identity(p, p);
    for (const auto& block : blocks) {
        const int k = static_cast<int>(block.size());
        if (k < 2) continue;
        if (!(rho > -1.0 / (k - 1) && rho < 1.0))
            throw std::invalid_argument(detail::str(
                "make_block_correlation_precision: rho ", rho,
                " is outside the positive definite range for a block of ", k));
        const double a = 1.0 / (1.0 - rho);
        const double b = -rho / ((1.0 - rho) * (1.0 + (k - 1) * rho));
        for (int u = 0; u < k; ++u)
            for (int v = 0; v < k; ++v) {
                const int i = block[u], j = block[v];
                if (i < 0 || i >= p || j < 0 || j >= p)
                    throw std::invalid_argument(
                        "make_block_correlation_precision: invalid block index");
                omega(i, j) = (u == v ? a + b : b);
            }
    }
    return omega;
}

// i.i.d. rows from N(0, precision^{-1}).
inline Eigen::MatrixXd sample_expression(int n, const Eigen::MatrixXd& precision, Rng& rng) {
    const int p = static_cast<int>(precision.rows());
    Eigen::LLT<Eigen::MatrixXd> llt(precision);
    if (llt.info() != Eigen::Success)
        throw std::invalid_argument("sample_expression: precision is not positive definite");
    const Eigen::MatrixXd sigma = llt.solve(Eigen::MatrixXd::Identity(p, p));
    Eigen::LLT<Eigen::MatrixXd> lltS(((sigma + sigma.transpose()) / 2.0).eval());
    if (lltS.info() != Eigen::Success)
        throw std::invalid_argument("sample_expression: implied covariance failed Cholesky");
    const Eigen::MatrixXd L = lltS.matrixL();
    Eigen::MatrixXd X(n, p);
    Eigen::VectorXd z(p);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < p; ++j) z[j] = rng.normal();
        X.row(i) = (L * z).transpose();
    }
    return X;
}

struct SimulatedSurvival {
    Eigen::VectorXd event_time;      // T
    Eigen::VectorXd censoring_time;  // C
    Eigen::VectorXd observed_time;   // min(T, C)
    Eigen::VectorXi event;           // 1(T <= C)
};

// T = (-log u / (eta * exp(lp)))^{1/kappa}, the inverse-transform Weibull
// draw at a given uniform variate.
inline double weibull_time(double u, double eta, double kappa, double lp) {
    return std::pow(-std::log(u) / (eta * std::exp(lp)), 1.0 / kappa);
}

// Inverse-transform Weibull times: T = (-log U / (eta * exp(x'beta)))^{1/kappa}.
// Censoring times use the same parameters; whether the covariate term enters
// the censoring draw is configurable (on by default, which matches ~50%
// censoring when event and censoring distributions coincide).
inline SimulatedSurvival simulate_survival(const Eigen::MatrixXd& X,
                                           const Eigen::VectorXd& beta, double eta,
                                           double kappa, Rng& rng,
                                           bool censoring_covariate_effect = true) {
    if (!(eta > 0.0) || !(kappa > 0.0))
        throw std::invalid_argument("simulate_survival: eta and kappa must be positive");
    if (X.cols() != beta.size())
        throw std::invalid_argument("simulate_survival: dimension mismatch");
    const int n = static_cast<int>(X.rows());
    SimulatedSurvival out;
    out.event_time.resize(n);
    out.censoring_time.resize(n);
    out.observed_time.resize(n);
    out.event.resize(n);
    const Eigen::VectorXd lp = X * beta;
    for (int i = 0; i < n; ++i) {
        double u = rng.uniform();
        while (u <= 0.0) u = rng.uniform();
        const double t = weibull_time(u, eta, kappa, lp[i]);
        double uc = rng.uniform();
        while (uc <= 0.0) uc = rng.uniform();
        const double c = weibull_time(uc, eta, kappa, censoring_covariate_effect ? lp[i] : 0.0);
        out.event_time[i] = t;
        out.censoring_time[i] = c;
        out.observed_time[i] = std::min(t, c);
        out.event[i] = t <= c ? 1 : 0;
    }
    return out;
}

// Shared/subgroup-specific effect pattern for two subgroups:
// beta1 = (1,1,1,-1,-1,-1,0,...,0), beta2 = (0,0,0,-1,-1,-1,1,1,1,0,...,0).
inline std::pair<Eigen::VectorXd, Eigen::VectorXd> default_true_effects(int p) {
    if (p < 9) throw std::invalid_argument("default_true_effects: p must be >= 9");
    Eigen::VectorXd b1 = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd b2 = Eigen::VectorXd::Zero(p);
    for (int j = 0; j < 3; ++j) b1[j] = 1.0;
    for (int j = 3; j < 6; ++j) b1[j] = -1.0;
    for (int j = 3; j < 6; ++j) b2[j] = -1.0;
    for (int j = 6; j < 9; ++j) b2[j] = 1.0;
    return {b1, b2};
}

// Solves S(t1) = s1, S(t2) = s2 for the Weibull cumulative hazard
// H(t) = eta * t^kappa.
inline std::pair<double, double> weibull_from_survival_anchors(double t1, double s1,
                                                               double t2, double s2) {
    if (!(t1 > 0.0) || !(t2 > 0.0) || t1 == t2)
        throw std::invalid_argument("weibull_from_survival_anchors: need two distinct positive times");
    if (!(s1 > 0.0 && s1 < 1.0 && s2 > 0.0 && s2 < 1.0))
        throw std::invalid_argument("weibull_from_survival_anchors: probabilities must be in (0,1)");
    const double kappa = std::log(std::log(s2) / std::log(s1)) / std::log(t2 / t1);
    if (!std::isfinite(kappa) || !(kappa > 0.0))
        throw std::invalid_argument("weibull_from_survival_anchors: anchors imply non-increasing hazard");
    const double eta = -std::log(s1) / std::pow(t1, kappa);
    return {eta, kappa};
}

// Two-cohort design with the block covariate structure, the default effect
// pattern, and Weibull parameters anchored at 3-/5-year survival of 57%/42%
// (subgroup 1) and 75%/62% (subgroup 2).
inline SimulationDesign default_design(int p, int n_per_subgroup, std::uint64_t seed) {
    SimulationDesign d;
    d.p = p;
    d.n_per_subgroup = {n_per_subgroup, n_per_subgroup};
    auto [b1, b2] = default_true_effects(p);
    d.true_effects = {b1, b2};
    const auto w1 = weibull_from_survival_anchors(3.0, 0.57, 5.0, 0.42);
    const auto w2 = weibull_from_survival_anchors(3.0, 0.75, 5.0, 0.62);
    d.weibull_scale = {w1.first, w2.first};
    d.weibull_shape = {w1.second, w2.second};
    d.block_corr = 0.5;
    d.blocks = {{0, 1, 2}, {3, 4, 5}, {6, 7, 8}};
    d.seed = seed;
    return d;
}

// One full dataset draw from the design. The draw order is fixed
// (per subgroup: expression matrix, then survival), so a (design, seed) pair
// maps to exactly one dataset.
inline Dataset simulate_dataset(const SimulationDesign& design, std::uint64_t seed) {
    design.validate();
    Rng rng(seed);
    const Eigen::MatrixXd omega =
        make_block_correlation_precision(design.p, design.blocks, design.block_corr);
    std::vector<SurvivalRecord> records;
    for (int s = 0; s < design.subgroups(); ++s) {
        const Eigen::MatrixXd X = sample_expression(design.n_per_subgroup[s], omega, rng);
        const SimulatedSurvival sv =
            simulate_survival(X, design.true_effects[s], design.weibull_scale[s],
                              design.weibull_shape[s], rng, design.censoring_covariate_effect);
        for (int i = 0; i < design.n_per_subgroup[s]; ++i) {
            SurvivalRecord r;
            r.observed_time = sv.observed_time[i];
            r.event = sv.event[i];
            r.covariates = X.row(i).transpose();
            r.subgroup = s + 1;
            records.push_back(std::move(r));
        }
    }
    return make_dataset(std::move(records));
}

}  // namespace coxbvs
