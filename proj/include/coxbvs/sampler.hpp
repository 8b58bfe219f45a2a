#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "coxbvs/coxmodel.hpp"
#include "coxbvs/data.hpp"
#include "coxbvs/graph.hpp"
#include "coxbvs/math.hpp"
#include "coxbvs/rng.hpp"

namespace coxbvs {

// CoxBVS-SL: joint graph + MRF selection prior.
// SubStruct:  within-subgroup graphs only (between edges pinned empty, b2 = 0).
// Subgroup:   independent Bernoulli selection, no graph, per-subgroup fits.
// Pooled:     Subgroup machinery on all cohorts merged into one.
enum class ModelKind { CoxBVS_SL, SubStruct, Subgroup, Pooled };

inline bool model_uses_graph(ModelKind m) {
    return m == ModelKind::CoxBVS_SL || m == ModelKind::SubStruct;
}
inline bool model_uses_between_edges(ModelKind m) { return m == ModelKind::CoxBVS_SL; }

inline std::string model_name(ModelKind m) {
    switch (m) {
        case ModelKind::CoxBVS_SL: return "CoxBVS-SL";
        case ModelKind::SubStruct: return "Sub-struct";
        case ModelKind::Subgroup: return "Subgroup";
        case ModelKind::Pooled: return "Pooled";
    }
    throw std::logic_error("model_name: unknown model");
}

inline ModelKind model_from_name(const std::string& name) {
    if (name == "CoxBVS-SL") return ModelKind::CoxBVS_SL;
    if (name == "Sub-struct") return ModelKind::SubStruct;
    if (name == "Subgroup") return ModelKind::Subgroup;
    if (name == "Pooled") return ModelKind::Pooled;
    throw std::invalid_argument(detail::str(
        "unknown model '", name, "' (expected CoxBVS-SL, Sub-struct, Subgroup or Pooled)"));
}

// All fixed hyperparameters of one model variant.
struct PriorConfig {
    GraphPrior graph;
    MrfPrior mrf;
    SelectionPrior selection;
    double a0 = 2.0;

    void validate() const {
        graph.validate();
        mrf.validate();
        selection.validate();
        if (!(a0 > 0.0)) throw std::invalid_argument("prior config: a0 must be positive");
    }
};

struct ChainConfig {
    int iterations = 2000;
    int burn_in = 1000;
    int thin = 1;
    int omega_thin = 10;  // precision draws kept every omega_thin-th stored draw
    std::uint64_t seed = 0;
    ModelKind model = ModelKind::CoxBVS_SL;
    PriorConfig priors;

    void validate() const {
        if (iterations < 1) throw std::invalid_argument("chain config: iterations must be >= 1");
        if (burn_in < 0 || burn_in >= iterations)
            throw std::invalid_argument("chain config: need 0 <= burn_in < iterations");
        if (thin < 1) throw std::invalid_argument("chain config: thin must be >= 1");
        if (omega_thin < 1) throw std::invalid_argument("chain config: omega_thin must be >= 1");
        priors.validate();
    }
};

// Training inputs of one subgroup, standardized and grouped, with the fitted
// Weibull center of the baseline-hazard prior. stream_id picks the subgroup's
// RNG substream; by default it is the subgroup's position, so a dataset
// restricted to one subgroup can replay exactly by keeping the original id.
struct SubgroupData {
    Eigen::MatrixXd X;
    Eigen::VectorXd time;
    Eigen::VectorXi event;
    GroupedData grouped;
    double eta = 1.0;
    double kappa = 1.0;
    int stream_id = 0;
};

struct PreparedData {
    std::vector<SubgroupData> subgroups;
    int p = 0;
    int S() const { return static_cast<int>(subgroups.size()); }
};

// Grouping + parametric Weibull fit per subgroup of an already-standardized
// training set.
inline PreparedData prepare_training_data(const Dataset& train) {
    PreparedData out;
    out.p = train.p;
    for (int s = 1; s <= train.S; ++s) {
        SubgroupView v = subgroup_view(train, s);
        if (v.records.empty())
            throw std::invalid_argument(detail::str("training subgroup ", s, " is empty"));
        SubgroupData sd;
        sd.grouped = build_grouped_data(v.records);
        sd.X = std::move(v.X);
        sd.time = std::move(v.time);
        sd.event = std::move(v.event);
        auto [eta, kappa] = fit_weibull_baseline(sd.time, sd.event);
        sd.eta = eta;
        sd.kappa = kappa;
        sd.stream_id = s - 1;
        out.subgroups.push_back(std::move(sd));
    }
    return out;
}

// Standardizes train/test for the given model variant (per-subgroup scope for
// the subgroup-aware models, pooled scope with merged cohorts for Pooled) and
// prepares the training side.
struct ModelData {
    PreparedData prepared;
    Dataset train;  // standardized, post-pooling for Pooled
    Dataset test;   // standardized with training parameters (may be empty)
    StandardizationParams standardization;
};

inline ModelData prepare_for_model(const Dataset& train, const Dataset& test, ModelKind model) {
    ModelData md;
    if (model == ModelKind::Pooled) {
        const Dataset train_pooled = pool_subgroups(train);
        const Dataset test_pooled = test.records.empty() ? test : pool_subgroups(test);
        auto [tr, te, sp] =
            standardize(train_pooled, test_pooled, StandardizationParams::Scope::Pooled);
        md.train = std::move(tr);
        md.test = std::move(te);
        md.standardization = std::move(sp);
    } else {
        auto [tr, te, sp] = standardize(train, test, StandardizationParams::Scope::PerSubgroup);
        md.train = std::move(tr);
        md.test = std::move(te);
        md.standardization = std::move(sp);
    }
    md.prepared = prepare_training_data(md.train);
    return md;
}

// One MCMC iterate across all subgroups.
struct ChainState {
    std::vector<CoxSubgroupState> cox;
    JointAdjacency graph;
    PrecisionState precision;
};

// Empty-model start: no edges, identity precisions, no included variables,
// small uniform coefficients, unit-mean gamma hazard increments.
inline ChainState init_chain(int p, int S, const std::vector<int>& intervals,
                             const ChainConfig& config,
                             const std::vector<int>* stream_ids = nullptr) {
    ChainState st;
    st.graph = JointAdjacency(p, S);
    st.precision = PrecisionState::identity(p, S);
    for (int s = 0; s < S; ++s) {
        const int stream = stream_ids ? (*stream_ids)[s] : s;
        Rng rng(derive_seed(config.seed, 1 + static_cast<std::uint64_t>(stream)));
        CoxSubgroupState cs;
        cs.beta.resize(p);
        for (int i = 0; i < p; ++i) cs.beta[i] = rng.uniform(-0.02, 0.02);
        cs.gamma = Eigen::VectorXi::Zero(p);
        cs.hazard.resize(intervals[s]);
        for (int g = 0; g < intervals[s]; ++g) cs.hazard[g] = rng.gamma_rate(1.0, 1.0);
        cs.mh_sd = Eigen::VectorXd::Constant(p, 0.1);
        cs.mh_adapt_count = Eigen::VectorXi::Zero(p);
        st.cox.push_back(std::move(cs));
    }
    return st;
}

// Post-burn-in draws in columnar form. Precision draws are thinned further
// (only edge probabilities and coefficients feed the downstream summaries).
struct ChainSamples {
    int p = 0;
    int S = 0;
    std::vector<int> intervals;
    ModelKind model = ModelKind::CoxBVS_SL;
    int iterations = 0;
    int burn_in = 0;
    int thin = 1;
    int omega_thin = 10;
    std::uint64_t seed = 0;

    std::vector<Eigen::MatrixXd> beta;      // per subgroup: draws x p
    std::vector<Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>> gamma;
    std::vector<Eigen::MatrixXd> hazard;    // per subgroup: draws x J_s
    std::vector<Eigen::VectorXd> loglik;    // per subgroup: draws
    // graph draws (only for graph models): lexicographic i<j columns
    std::vector<Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>> edges_within;
    std::vector<Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>> edges_between;
    // thinned precision rows: lower-triangle-with-diagonal columns, i <= j
    std::vector<Eigen::MatrixXd> omega_tri;
    std::vector<int> omega_draw_rows;       // stored-draw index of each omega row
    std::vector<Eigen::VectorXd> mh_accept_rate;  // per subgroup: p

    int draws() const { return S > 0 ? static_cast<int>(beta[0].rows()) : 0; }

    static int pair_col(int p, int i, int j) {  // i < j, hollow lex order
        return i * (p - 1) - i * (i - 1) / 2 + (j - i - 1);
    }
    static int tri_col(int p, int i, int j) {  // i <= j, with diagonal
        return i * p - i * (i - 1) / 2 + (j - i);
    }
};

namespace detail {

inline void check_finite_loglik(double ll, int iteration, int subgroup) {
    if (std::isfinite(ll)) return;
    throw std::runtime_error(detail::str(
        "MCMC aborted at iteration ", iteration, ": non-finite log-likelihood in subgroup ",
        subgroup + 1, " (", ll, ")"));
}

}  // namespace detail

// The full Gibbs loop. Per iteration, in order: (1) block sweep of every
// precision matrix, (2) scan of all graph edges, (3) scan of all inclusion
// indicators, (4) Metropolis-Hastings scan of all coefficients, (5) redraw of
// all hazard increments. Steps 1-2 are skipped by the Bernoulli-prior models;
// Sub-struct keeps the between-subgroup edges pinned at zero.
//
// Each subgroup consumes its own derived RNG stream and the edge scan a
// further one, so per-subgroup chains are reproducible independently of S.
inline ChainSamples run_mcmc(const PreparedData& data, const ChainConfig& config) {
    config.validate();
    const int S = data.S();
    const int p = data.p;
    if (S < 1 || p < 1) throw std::invalid_argument("run_mcmc: empty prepared data");
    const bool use_graph = model_uses_graph(config.model);
    const bool use_between = model_uses_between_edges(config.model) && S > 1;
    const MrfPrior& mrf = config.priors.mrf;
    const GraphPrior& gp = config.priors.graph;
    const SelectionPrior& sel = config.priors.selection;

    std::vector<int> intervals(S), stream_ids(S);
    for (int s = 0; s < S; ++s) {
        intervals[s] = data.subgroups[s].grouped.intervals();
        stream_ids[s] = data.subgroups[s].stream_id;
    }
    ChainState state = init_chain(p, S, intervals, config, &stream_ids);

    std::vector<CoxLikelihood> lik;
    std::vector<Eigen::MatrixXd> scatter;
    std::vector<Eigen::VectorXd> lp;
    std::vector<Rng> rng_s;
    for (int s = 0; s < S; ++s) {
        lik.emplace_back(data.subgroups[s].grouped, data.subgroups[s].X);
        scatter.push_back(data.subgroups[s].X.transpose() * data.subgroups[s].X);
        lp.push_back(lik[s].linear_predictor(state.cox[s].beta));
        rng_s.emplace_back(derive_seed(config.seed, 1001 + static_cast<std::uint64_t>(stream_ids[s])));
    }
    Rng rng_graph(derive_seed(config.seed, 2));

    const int stored = (config.iterations - config.burn_in) / config.thin;
    ChainSamples out;
    out.p = p;
    out.S = S;
    out.intervals = intervals;
    out.model = config.model;
    out.iterations = config.iterations;
    out.burn_in = config.burn_in;
    out.thin = config.thin;
    out.omega_thin = config.omega_thin;
    out.seed = config.seed;
    const int n_pairs = p * (p - 1) / 2;
    const int n_tri = p * (p + 1) / 2;
    const int omega_rows = use_graph ? (stored + config.omega_thin - 1) / config.omega_thin : 0;
    for (int s = 0; s < S; ++s) {
        out.beta.emplace_back(stored, p);
        out.gamma.emplace_back(stored, p);
        out.hazard.emplace_back(stored, intervals[s]);
        out.loglik.emplace_back(stored);
        out.edges_within.emplace_back(stored, use_graph ? n_pairs : 0);
        out.omega_tri.emplace_back(omega_rows, use_graph ? n_tri : 0);
    }
    const int n_between_pairs = use_graph && S > 1 ? S * (S - 1) / 2 : 0;
    for (int q = 0; q < n_between_pairs; ++q) out.edges_between.emplace_back(stored, p);

    std::vector<Eigen::VectorXi> accept_count(S, Eigen::VectorXi::Zero(p));
    Eigen::VectorXi gamma_joint(p * S);
    int stored_count = 0;
    int omega_count = 0;

    for (int iter = 1; iter <= config.iterations; ++iter) {
        const bool adapt = iter <= config.burn_in;

        if (use_graph) {
            for (int s = 0; s < S; ++s)
                update_precision_block(state.precision.omegas[s], state.graph.within[s],
                                       scatter[s], static_cast<int>(data.subgroups[s].X.rows()),
                                       gp, rng_s[s]);
            for (int s = 0; s < S; ++s) gamma_joint.segment(s * p, p) = state.cox[s].gamma;
            for (int s = 0; s < S; ++s)
                for (int i = 0; i < p; ++i)
                    for (int j = i + 1; j < p; ++j)
                        update_edge_within(state.graph, s, i, j, state.precision.omegas[s](i, j),
                                           gamma_joint, gp, mrf, rng_graph);
            if (use_between)
                for (int r = 0; r < S; ++r)
                    for (int s2 = r + 1; s2 < S; ++s2)
                        for (int i = 0; i < p; ++i)
                            update_edge_between(state.graph, r, s2, i, gamma_joint, gp, mrf,
                                                rng_graph);
        }

        for (int s = 0; s < S; ++s)
            update_gamma(state.cox, s, state.graph, sel, mrf, use_graph, rng_s[s]);

        for (int s = 0; s < S; ++s) {
            const auto ht = lik[s].hazard_terms(state.cox[s].hazard);
            for (int i = 0; i < p; ++i)
                if (update_beta_coordinate(state.cox[s], lp[s], lik[s], ht, i, sel, adapt,
                                           rng_s[s]))
                    accept_count[s][i] += 1;
        }

        for (int s = 0; s < S; ++s)
            update_hazard_increments(state.cox[s], lik[s], data.subgroups[s].grouped, lp[s],
                                     config.priors.a0, data.subgroups[s].eta,
                                     data.subgroups[s].kappa, rng_s[s]);

        if (iter > config.burn_in && (iter - config.burn_in) % config.thin == 0) {
            for (int s = 0; s < S; ++s) {
                const double ll = lik[s].loglik(lp[s], state.cox[s].hazard);
                detail::check_finite_loglik(ll, iter, s);
                out.beta[s].row(stored_count) = state.cox[s].beta.transpose();
                for (int i = 0; i < p; ++i)
                    out.gamma[s](stored_count, i) =
                        static_cast<std::uint8_t>(state.cox[s].gamma[i]);
                out.hazard[s].row(stored_count) = state.cox[s].hazard.transpose();
                out.loglik[s][stored_count] = ll;
                if (use_graph)
                    for (int i = 0; i < p; ++i)
                        for (int j = i + 1; j < p; ++j)
                            out.edges_within[s](stored_count, ChainSamples::pair_col(p, i, j)) =
                                static_cast<std::uint8_t>(state.graph.within[s](i, j));
            }
            if (use_graph && S > 1 && use_between)
                for (int r = 0; r < S; ++r)
                    for (int s2 = r + 1; s2 < S; ++s2)
                        for (int i = 0; i < p; ++i)
                            out.edges_between[state.graph.pair_index(r, s2)](stored_count, i) =
                                static_cast<std::uint8_t>(state.graph.between_edge(r, s2, i));
            else
                for (auto& eb : out.edges_between) eb.row(stored_count).setZero();
            if (use_graph && stored_count % config.omega_thin == 0) {
                for (int s = 0; s < S; ++s)
                    for (int i = 0; i < p; ++i)
                        for (int j = i; j < p; ++j)
                            out.omega_tri[s](omega_count, ChainSamples::tri_col(p, i, j)) =
                                state.precision.omegas[s](i, j);
                out.omega_draw_rows.push_back(stored_count);
                ++omega_count;
            }
            ++stored_count;
        }
    }
    for (auto& om : out.omega_tri) om.conservativeResize(omega_count, Eigen::NoChange);
    for (int s = 0; s < S; ++s)
        out.mh_accept_rate.push_back(accept_count[s].cast<double>() / config.iterations);
    return out;
}

// Numeric convergence-diagnostic series for one stored scalar chain.
struct SeriesDiagnostics {
    bool zero_variance = false;
    Eigen::VectorXd autocorrelation;  // lags 1..max_lag
    Eigen::VectorXd running_mean;
};

inline SeriesDiagnostics diagnostics(const Eigen::VectorXd& series, int max_lag = 50) {
    const int n = static_cast<int>(series.size());
    if (n < 10) throw std::invalid_argument("diagnostics: need at least 10 stored records");
    SeriesDiagnostics out;
    const double mean = series.mean();
    const double denom = (series.array() - mean).square().sum();
    out.running_mean.resize(n);
    double acc = 0.0;
    for (int t = 0; t < n; ++t) {
        acc += series[t];
        out.running_mean[t] = acc / (t + 1);
    }
    max_lag = std::min(max_lag, n - 1);
    out.autocorrelation = Eigen::VectorXd::Zero(max_lag);
    if (denom <= 0.0) {
        out.zero_variance = true;
        return out;
    }
    for (int k = 1; k <= max_lag; ++k) {
        double num = 0.0;
        for (int t = 0; t + k < n; ++t) num += (series[t] - mean) * (series[t + k] - mean);
        out.autocorrelation[k - 1] = num / denom;
    }
    return out;
}

}  // namespace coxbvs
