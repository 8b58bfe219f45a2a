#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "coxbvs/math.hpp"
#include "coxbvs/rng.hpp"

namespace coxbvs {

// Joint graph over p covariates in S subgroups: a full undirected graph
// within each subgroup plus diagonal-only coupling between subgroups (an edge
// may link covariate i in subgroup r only with the same covariate i in
// subgroup s).
struct JointAdjacency {
    int p = 0;
    int S = 0;
    std::vector<Eigen::MatrixXi> within;   // S symmetric hollow p x p matrices
    std::vector<Eigen::VectorXi> between;  // one length-p vector per pair r < s

    JointAdjacency() = default;
    JointAdjacency(int p_, int S_) : p(p_), S(S_) {
        within.assign(S, Eigen::MatrixXi::Zero(p, p));
        between.assign(S * (S - 1) / 2, Eigen::VectorXi::Zero(p));
    }

    // Index of the unordered pair (r, s), r < s, both 0-based.
    int pair_index(int r, int s) const {
        if (r >= s) throw std::invalid_argument("pair_index: need r < s");
        return r * S - r * (r + 1) / 2 + (s - r - 1);
    }

    int within_edge(int s, int i, int j) const { return within[s](i, j); }
    int between_edge(int r, int s, int i) const {
        return between[pair_index(std::min(r, s), std::max(r, s))][i];
    }

    void set_within(int s, int i, int j, int bit) {
        within[s](i, j) = bit;
        within[s](j, i) = bit;
    }
    void set_between(int r, int s, int i, int bit) {
        between[pair_index(std::min(r, s), std::max(r, s))][i] = bit;
    }

    int edge_count() const {
        int c = 0;
        for (const auto& w : within) c += w.sum() / 2;
        for (const auto& b : between) c += b.sum();
        return c;
    }

    // Dense pS x pS adjacency with variables ordered subgroup-major.
    Eigen::MatrixXi to_dense() const {
        Eigen::MatrixXi G = Eigen::MatrixXi::Zero(p * S, p * S);
        for (int s = 0; s < S; ++s)
            G.block(s * p, s * p, p, p) = within[s];
        for (int r = 0; r < S; ++r)
            for (int s = r + 1; s < S; ++s)
                for (int i = 0; i < p; ++i) {
                    const int bit = between_edge(r, s, i);
                    G(r * p + i, s * p + i) = bit;
                    G(s * p + i, r * p + i) = bit;
                }
        return G;
    }
};

// Per-subgroup precision matrices tied to the within-subgroup subgraphs.
struct PrecisionState {
    std::vector<Eigen::MatrixXd> omegas;

    static PrecisionState identity(int p, int S) {
        PrecisionState st;
        st.omegas.assign(S, Eigen::MatrixXd::Identity(p, p));
        return st;
    }
};

// Continuous spike-and-slab prior on the precision entries: N(0, nu0^2) off
// the graph, N(0, nu1^2) on it, Exp(lambda/2) diagonals, Bernoulli(pi_edge)
// edges.
struct GraphPrior {
    double nu0 = 0.1;
    double nu1 = 10.0;
    double lambda = 1.0;
    double pi_edge = 0.1;

    void validate() const {
        // nu0 == nu1 is degenerate but well-defined; the reduction checks
        // against the Bernoulli-prior models rely on it.
        if (!(nu0 > 0.0) || !(nu1 > 0.0) || nu0 > nu1)
            throw std::invalid_argument("graph prior: need 0 < nu0 <= nu1");
        if (!(lambda > 0.0)) throw std::invalid_argument("graph prior: lambda must be positive");
        if (!(pi_edge > 0.0 && pi_edge < 1.0))
            throw std::invalid_argument("graph prior: pi_edge must be in (0,1)");
    }
};

// Markov random field prior over the joint inclusion vector:
// p(gamma | G) ~ exp(a * 1'gamma + b1 * gamma'G_within gamma
//                                + b2 * gamma'G_between gamma).
struct MrfPrior {
    double a = -4.0;
    double b_within = 1.0;   // weight on within-subgroup edges
    double b_between = 1.0;  // weight on between-subgroup edges

    void validate() const {
        if (b_within < 0.0 || b_between < 0.0)
            throw std::invalid_argument("MRF prior: edge weights must be nonnegative");
    }
};

// gamma is the pS-vector of inclusion indicators, subgroup-major
// (gamma[s*p + i] is covariate i in subgroup s).
inline double mrf_log_prior_unnormalized(const Eigen::VectorXi& gamma,
                                         const JointAdjacency& G, const MrfPrior& prior) {
    if (gamma.size() != static_cast<Eigen::Index>(G.p) * G.S)
        throw std::invalid_argument("mrf_log_prior_unnormalized: gamma length != p*S");
    const int p = G.p;
    double linear = 0.0;
    for (int k = 0; k < gamma.size(); ++k) linear += gamma[k];
    double quad_within = 0.0;
    for (int s = 0; s < G.S; ++s)
        for (int i = 0; i < p; ++i)
            for (int j = i + 1; j < p; ++j)
                if (G.within[s](i, j) && gamma[s * p + i] && gamma[s * p + j])
                    quad_within += 2.0;  // gamma'G gamma counts each edge twice
    double quad_between = 0.0;
    for (int r = 0; r < G.S; ++r)
        for (int s = r + 1; s < G.S; ++s)
            for (int i = 0; i < p; ++i)
                if (G.between_edge(r, s, i) && gamma[r * p + i] && gamma[s * p + i])
                    quad_between += 2.0;
    return prior.a * linear + prior.b_within * quad_within + prior.b_between * quad_between;
}

// Conditional inclusion probability of gamma_{s,i} given the rest:
// logistic(a + 2*b1*(active within neighbors) + 2*b2*(active between neighbors)).
inline double mrf_conditional_inclusion(const Eigen::VectorXi& gamma, const JointAdjacency& G,
                                        int s, int i, const MrfPrior& prior) {
    const int p = G.p;
    if (s < 0 || s >= G.S || i < 0 || i >= p)
        throw std::invalid_argument("mrf_conditional_inclusion: target out of range");
    double within_active = 0.0;
    for (int j = 0; j < p; ++j)
        if (j != i && G.within[s](i, j) && gamma[s * p + j]) within_active += 1.0;
    double between_active = 0.0;
    for (int r = 0; r < G.S; ++r)
        if (r != s && G.between_edge(std::min(r, s), std::max(r, s), i) && gamma[r * p + i])
            between_active += 1.0;
    return logistic(prior.a + 2.0 * prior.b_within * within_active +
                    2.0 * prior.b_between * between_active);
}

// Deterministic ingredients of one column update of the block Gibbs sweep,
// exposed for direct checking: u ~ N(mean, C) with
// C^{-1} = diag(1/v12) + (s22 + lambda) * Omega11^{-1}, mean = -C s12, and
// v ~ Gamma(n/2 + 1, rate (s22 + lambda)/2).
struct PrecisionColumnParams {
    Eigen::MatrixXd omega11_inv;
    Eigen::MatrixXd c_inv;
    Eigen::VectorXd mean;       // -C s12
    double gamma_shape = 0.0;
    double gamma_rate = 0.0;
};

namespace detail {

inline PrecisionColumnParams precision_column_params(const Eigen::MatrixXd& omega,
                                                     const Eigen::MatrixXi& G_ss,
                                                     const Eigen::MatrixXd& scatter, int n,
                                                     const GraphPrior& prior, int col) {
    const int p = static_cast<int>(omega.rows());
    PrecisionColumnParams out;
    const int m = p - 1;
    Eigen::MatrixXd omega11(m, m);
    Eigen::VectorXd s12(m), v12(m);
    int a = 0;
    for (int i = 0; i < p; ++i) {
        if (i == col) continue;
        int b = 0;
        for (int j = 0; j < p; ++j) {
            if (j == col) continue;
            omega11(a, b) = omega(i, j);
            ++b;
        }
        s12[a] = scatter(i, col);
        const double nu = G_ss(i, col) ? prior.nu1 : prior.nu0;
        v12[a] = nu * nu;
        ++a;
    }
    const double s22 = scatter(col, col);
    out.gamma_shape = 0.5 * n + 1.0;
    out.gamma_rate = 0.5 * (s22 + prior.lambda);
    if (m == 0) return out;

    Eigen::LLT<Eigen::MatrixXd> llt(omega11);
    if (llt.info() != Eigen::Success)
        throw std::runtime_error(detail::str(
            "precision update: leading block lost positive definiteness at column ", col + 1));
    out.omega11_inv = llt.solve(Eigen::MatrixXd::Identity(m, m));
    out.c_inv = (s22 + prior.lambda) * out.omega11_inv;
    out.c_inv.diagonal() += v12.cwiseInverse();
    Eigen::LLT<Eigen::MatrixXd> lltC(out.c_inv);
    if (lltC.info() != Eigen::Success)
        throw std::runtime_error(detail::str(
            "precision update: proposal covariance failed Cholesky at column ", col + 1));
    out.mean = -lltC.solve(s12);
    return out;
}

}  // namespace detail

// One full sweep of the block Gibbs sampler over the columns of Omega_ss:
// each column in turn is treated as the last one, its off-diagonal block is
// redrawn from a Gaussian and the corner from v + u'Omega11^{-1}u with
// gamma-distributed v. scatter = X_s' X_s on standardized covariates.
inline void update_precision_block(Eigen::MatrixXd& omega, const Eigen::MatrixXi& G_ss,
                                   const Eigen::MatrixXd& scatter, int n,
                                   const GraphPrior& prior, Rng& rng) {
    const int p = static_cast<int>(omega.rows());
    for (int col = 0; col < p; ++col) {
        const auto par = detail::precision_column_params(omega, G_ss, scatter, n, prior, col);
        const double v = rng.gamma_rate(par.gamma_shape, par.gamma_rate);
        if (p == 1) {
            omega(0, 0) = v;
            continue;
        }
        const int m = p - 1;
        Eigen::VectorXd z(m);
        for (int i = 0; i < m; ++i) z[i] = rng.normal();
        // C = (L L')^{-1} with c_inv = L L'; a N(0, C) draw is L'^{-1} z.
        Eigen::LLT<Eigen::MatrixXd> lltC(par.c_inv);
        const Eigen::VectorXd u =
            par.mean + lltC.matrixU().solve(z);
        int a = 0;
        for (int i = 0; i < p; ++i) {
            if (i == col) continue;
            omega(i, col) = u[a];
            omega(col, i) = u[a];
            ++a;
        }
        omega(col, col) = v + u.dot(par.omega11_inv * u);
    }
}

// Conditional inclusion probability of a within-subgroup edge g_{ss,ij}:
// odds = pi/(1-pi) * N(omega_ij|0,nu1^2)/N(omega_ij|0,nu0^2) * exp(2 b1 gamma_si gamma_sj).
inline double edge_within_probability(double omega_ij, int gamma_si, int gamma_sj,
                                      const GraphPrior& gp, const MrfPrior& mrf) {
    double log_odds = logit(gp.pi_edge) + normal_logpdf(omega_ij, 0.0, gp.nu1) -
                      normal_logpdf(omega_ij, 0.0, gp.nu0);
    if (gamma_si && gamma_sj) log_odds += 2.0 * mrf.b_within;
    return logistic(log_odds);
}

// Conditional inclusion probability of a between-subgroup edge g_{rs,ii};
// no precision factor here, only the Bernoulli prior and the MRF term.
inline double edge_between_probability(int gamma_ri, int gamma_si, const GraphPrior& gp,
                                       const MrfPrior& mrf) {
    double log_odds = logit(gp.pi_edge);
    if (gamma_ri && gamma_si) log_odds += 2.0 * mrf.b_between;
    return logistic(log_odds);
}

inline int update_edge_within(JointAdjacency& G, int s, int i, int j, double omega_ij,
                              const Eigen::VectorXi& gamma, const GraphPrior& gp,
                              const MrfPrior& mrf, Rng& rng) {
    if (i >= j) throw std::invalid_argument("update_edge_within: need i < j");
    const double prob =
        edge_within_probability(omega_ij, gamma[s * G.p + i], gamma[s * G.p + j], gp, mrf);
    const int bit = rng.uniform() < prob ? 1 : 0;
    G.set_within(s, i, j, bit);
    return bit;
}

inline int update_edge_between(JointAdjacency& G, int r, int s, int i,
                               const Eigen::VectorXi& gamma, const GraphPrior& gp,
                               const MrfPrior& mrf, Rng& rng) {
    if (r >= s) throw std::invalid_argument("update_edge_between: need r < s");
    const double prob =
        edge_between_probability(gamma[r * G.p + i], gamma[s * G.p + i], gp, mrf);
    const int bit = rng.uniform() < prob ? 1 : 0;
    G.set_between(r, s, i, bit);
    return bit;
}

// Exact per-variable inclusion marginals of the MRF prior by enumerating all
// 2^(pS) configurations. Testing oracle; the quadratic form is evaluated
// literally on the dense adjacency, independent of the incremental updates.
inline Eigen::VectorXd brute_force_mrf_marginals(const JointAdjacency& G, const MrfPrior& prior) {
    const int dim = G.p * G.S;
    if (dim > 20)
        throw std::invalid_argument("brute_force_mrf_marginals: p*S must be <= 20");
    const Eigen::MatrixXi dense = G.to_dense();
    const int p = G.p;
    const std::uint64_t count = 1ULL << dim;
    std::vector<double> logw(count);
    double max_logw = neg_inf;
    for (std::uint64_t mask = 0; mask < count; ++mask) {
        double linear = 0.0, qw = 0.0, qb = 0.0;
        for (int u = 0; u < dim; ++u) {
            if (!(mask >> u & 1)) continue;
            linear += 1.0;
            for (int v = 0; v < dim; ++v) {
                if (!(mask >> v & 1) || !dense(u, v)) continue;
                if (u / p == v / p)
                    qw += 1.0;
                else
                    qb += 1.0;
            }
        }
        logw[mask] = prior.a * linear + prior.b_within * qw + prior.b_between * qb;
        max_logw = std::max(max_logw, logw[mask]);
    }
    double total = 0.0;
    Eigen::VectorXd numer = Eigen::VectorXd::Zero(dim);
    for (std::uint64_t mask = 0; mask < count; ++mask) {
        const double w = std::exp(logw[mask] - max_logw);
        total += w;
        for (int u = 0; u < dim; ++u)
            if (mask >> u & 1) numer[u] += w;
    }
    return numer / total;
}

}  // namespace coxbvs
