#pragma once

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "coxbvs/chainio.hpp"
#include "coxbvs/csv.hpp"
#include "coxbvs/evaluate.hpp"
#include "coxbvs/posterior.hpp"
#include "coxbvs/sampler.hpp"
#include "coxbvs/simulate.hpp"

namespace coxbvs {

using nlohmann::json;

// JSON-facing prior settings; pi_edge left empty resolves to 2/(p-1) once the
// covariate count is known.
struct PriorSettings {
    MrfPrior mrf;
    SelectionPrior selection;
    double nu0 = 0.1;
    double nu1 = 10.0;
    double lambda = 1.0;
    std::optional<double> pi_edge;
    double a0 = 2.0;

    PriorConfig resolve(int p) const {
        PriorConfig pc;
        pc.mrf = mrf;
        pc.selection = selection;
        pc.graph.nu0 = nu0;
        pc.graph.nu1 = nu1;
        pc.graph.lambda = lambda;
        if (pi_edge) {
            pc.graph.pi_edge = *pi_edge;
        } else {
            if (p < 4)
                throw std::invalid_argument(
                    "pi_edge default 2/(p-1) is not in (0,1) for p < 4; set pi_edge explicitly");
            pc.graph.pi_edge = 2.0 / (p - 1);
        }
        pc.a0 = a0;
        pc.validate();
        return pc;
    }
};

// Hyperparameter sets used throughout the experiments: the simulation-study
// values and the case-study values.
inline PriorSettings simulation_preset() {
    PriorSettings ps;
    ps.mrf = {-4.0, 1.0, 1.0};
    ps.selection = {0.0375, 20.0, 0.02};
    ps.nu0 = 0.1;
    ps.nu1 = 10.0;
    ps.lambda = 1.0;
    ps.a0 = 2.0;
    return ps;
}

inline PriorSettings case_study_preset() {
    PriorSettings ps;
    ps.mrf = {-1.75, 0.5, 0.5};
    ps.selection = {0.0375, 20.0, 0.2};
    ps.nu0 = 0.6;
    ps.nu1 = 360.0;
    ps.lambda = 1.0;
    ps.a0 = 2.0;
    return ps;
}

inline PriorSettings preset_by_name(const std::string& name) {
    if (name == "simulation") return simulation_preset();
    if (name == "case-study") return case_study_preset();
    throw std::invalid_argument(detail::str(
        "unknown preset '", name, "' (expected 'simulation' or 'case-study')"));
}

struct ChainSettings {
    int iterations = 2000;
    int burn_in = 1000;
    int thin = 1;
    int omega_thin = 10;
};

struct EvaluationSettings {
    enum class TStarPolicy { CensoringSupport, TimeQuantile };
    std::optional<double> t_star;  // explicit horizon; empty: apply the policy
    TStarPolicy policy = TStarPolicy::CensoringSupport;
    double time_quantile = 0.8;
    double min_censoring_survival = 0.05;
    bool mpm = true;
    bool bma = true;

    double horizon(const Dataset& test, int subgroup_label) const {
        if (t_star) return *t_star;
        return policy == TStarPolicy::TimeQuantile
                   ? quantile_t_star(test, subgroup_label, time_quantile)
                   : default_t_star(test, subgroup_label, min_censoring_survival);
    }
};

struct ModelSpec {
    ModelKind kind = ModelKind::CoxBVS_SL;
    std::string label;     // output name; defaults to the model name, must be
                           // unique so hyperparameter sweeps of one variant
                           // keep separate result trees
    PriorSettings priors;  // per-model copy, possibly overridden
};

struct DesignSettings {
    int S = 2;
    double block_corr = 0.5;
    std::vector<std::vector<int>> blocks;            // 0-based; empty = default triples
    std::vector<Eigen::VectorXd> effects;            // empty = default pattern (needs p >= 9)
    std::vector<std::pair<double, double>> anchor_times;     // per subgroup (t1, t2)
    std::vector<std::pair<double, double>> anchor_survival;  // per subgroup (s1, s2)
    bool censoring_covariate_effect = true;

    SimulationDesign build(int p, int n, std::uint64_t seed) const {
        SimulationDesign d;
        if (effects.empty()) {
            d = default_design(p, n, seed);
        } else {
            d.p = p;
            d.n_per_subgroup.assign(effects.size(), n);
            d.true_effects = effects;
            for (std::size_t s = 0; s < effects.size(); ++s) {
                const auto& at = anchor_times.empty() ? std::pair<double, double>{3.0, 5.0}
                                                      : anchor_times[s];
                const auto& as = anchor_survival.empty()
                                     ? (s == 0 ? std::pair<double, double>{0.57, 0.42}
                                               : std::pair<double, double>{0.75, 0.62})
                                     : anchor_survival[s];
                auto [eta, kappa] =
                    weibull_from_survival_anchors(at.first, as.first, at.second, as.second);
                d.weibull_scale.push_back(eta);
                d.weibull_shape.push_back(kappa);
            }
            d.blocks = blocks;
            d.seed = seed;
        }
        if (!blocks.empty()) d.blocks = blocks;
        d.block_corr = block_corr;
        d.censoring_covariate_effect = censoring_covariate_effect;
        d.validate();
        return d;
    }
};

struct ExperimentConfig {
    std::uint64_t seed = 1;
    std::string output_dir = "out";
    int replications = 1;
    std::vector<int> grid_p{20};
    std::vector<int> grid_n{100};
    DesignSettings design;
    std::optional<std::string> dataset_path;  // alternative to simulation
    double train_fraction = 0.8;              // used with dataset_path
    std::vector<ModelSpec> models;
    ChainSettings chain;
    PriorSettings base_priors;
    EvaluationSettings evaluation;
    json raw;  // canonical config echo for hashing

    void validate() const {
        if (replications < 1) throw std::invalid_argument("config: replications must be >= 1");
        if (models.empty()) throw std::invalid_argument("config: at least one model required");
        if (grid_p.empty() || grid_n.empty())
            throw std::invalid_argument("config: empty scenario grid");
        if (!(train_fraction > 0.0 && train_fraction < 1.0))
            throw std::invalid_argument("config: train_fraction must be in (0,1)");
    }
};

namespace detail {

inline void parse_priors_into(const json& j, PriorSettings& ps) {
    if (j.contains("mrf")) {
        const auto& m = j.at("mrf");
        if (m.contains("a")) ps.mrf.a = m.at("a").get<double>();
        if (m.contains("b1")) ps.mrf.b_within = m.at("b1").get<double>();
        if (m.contains("b2")) ps.mrf.b_between = m.at("b2").get<double>();
    }
    if (j.contains("selection")) {
        const auto& m = j.at("selection");
        if (m.contains("tau")) ps.selection.tau = m.at("tau").get<double>();
        if (m.contains("c")) ps.selection.c = m.at("c").get<double>();
        if (m.contains("bernoulli_pi"))
            ps.selection.bernoulli_pi = m.at("bernoulli_pi").get<double>();
    }
    if (j.contains("graph")) {
        const auto& m = j.at("graph");
        if (m.contains("nu0")) ps.nu0 = m.at("nu0").get<double>();
        if (m.contains("nu1")) ps.nu1 = m.at("nu1").get<double>();
        if (m.contains("lambda")) ps.lambda = m.at("lambda").get<double>();
        if (m.contains("pi_edge") && !m.at("pi_edge").is_null())
            ps.pi_edge = m.at("pi_edge").get<double>();
    }
    if (j.contains("a0")) ps.a0 = j.at("a0").get<double>();
}

}  // namespace detail

inline ExperimentConfig parse_experiment_config(const json& j) {
    ExperimentConfig cfg;
    cfg.raw = j;
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("output_dir")) cfg.output_dir = j.at("output_dir").get<std::string>();
    if (j.contains("replications")) cfg.replications = j.at("replications").get<int>();
    if (j.contains("preset")) cfg.base_priors = preset_by_name(j.at("preset").get<std::string>());
    if (j.contains("priors")) detail::parse_priors_into(j.at("priors"), cfg.base_priors);
    if (j.contains("grid")) {
        const auto& g = j.at("grid");
        if (g.contains("p")) cfg.grid_p = g.at("p").get<std::vector<int>>();
        if (g.contains("n")) cfg.grid_n = g.at("n").get<std::vector<int>>();
    }
    if (j.contains("dataset")) cfg.dataset_path = j.at("dataset").get<std::string>();
    if (j.contains("train_fraction")) cfg.train_fraction = j.at("train_fraction").get<double>();
    if (j.contains("design")) {
        const auto& d = j.at("design");
        if (d.contains("S")) cfg.design.S = d.at("S").get<int>();
        if (d.contains("block_corr"))
            cfg.design.block_corr = d.at("block_corr").get<double>();
        if (d.contains("censoring_covariate_effect"))
            cfg.design.censoring_covariate_effect =
                d.at("censoring_covariate_effect").get<bool>();
        if (d.contains("blocks")) {
            for (const auto& b : d.at("blocks")) {
                std::vector<int> blk;
                for (int v : b.get<std::vector<int>>()) blk.push_back(v - 1);  // 1-based in JSON
                cfg.design.blocks.push_back(std::move(blk));
            }
        }
        if (d.contains("effects") && d.at("effects").is_array()) {
            for (const auto& e : d.at("effects")) {
                const auto vals = e.get<std::vector<double>>();
                Eigen::VectorXd v(static_cast<int>(vals.size()));
                for (std::size_t i = 0; i < vals.size(); ++i) v[static_cast<int>(i)] = vals[i];
                cfg.design.effects.push_back(std::move(v));
            }
        }
        if (d.contains("anchors")) {
            for (const auto& a : d.at("anchors")) {
                const auto t = a.at("times").get<std::vector<double>>();
                const auto s = a.at("survival").get<std::vector<double>>();
                if (t.size() != 2 || s.size() != 2)
                    throw std::invalid_argument("config: each anchor needs two times and two survival values");
                cfg.design.anchor_times.emplace_back(t[0], t[1]);
                cfg.design.anchor_survival.emplace_back(s[0], s[1]);
            }
        }
    }
    if (j.contains("chain")) {
        const auto& c = j.at("chain");
        if (c.contains("iterations")) cfg.chain.iterations = c.at("iterations").get<int>();
        if (c.contains("burn_in")) cfg.chain.burn_in = c.at("burn_in").get<int>();
        if (c.contains("thin")) cfg.chain.thin = c.at("thin").get<int>();
        if (c.contains("omega_thin")) cfg.chain.omega_thin = c.at("omega_thin").get<int>();
    }
    if (j.contains("evaluation")) {
        const auto& e = j.at("evaluation");
        if (e.contains("t_star") && !e.at("t_star").is_null())
            cfg.evaluation.t_star = e.at("t_star").get<double>();
        if (e.contains("t_star_policy")) {
            const auto pol = e.at("t_star_policy").get<std::string>();
            if (pol == "censoring-support")
                cfg.evaluation.policy = EvaluationSettings::TStarPolicy::CensoringSupport;
            else if (pol == "time-quantile")
                cfg.evaluation.policy = EvaluationSettings::TStarPolicy::TimeQuantile;
            else
                throw std::invalid_argument(detail::str(
                    "config: unknown t_star_policy '", pol,
                    "' (expected 'censoring-support' or 'time-quantile')"));
        }
        if (e.contains("t_star_quantile"))
            cfg.evaluation.time_quantile = e.at("t_star_quantile").get<double>();
        if (e.contains("min_censoring_survival"))
            cfg.evaluation.min_censoring_survival = e.at("min_censoring_survival").get<double>();
        if (e.contains("coefficients")) {
            cfg.evaluation.mpm = false;
            cfg.evaluation.bma = false;
            for (const auto& c : e.at("coefficients")) {
                if (c.get<std::string>() == "mpm") cfg.evaluation.mpm = true;
                if (c.get<std::string>() == "bma") cfg.evaluation.bma = true;
            }
        }
    }
    if (j.contains("models")) {
        for (const auto& m : j.at("models")) {
            ModelSpec spec;
            spec.kind = model_from_name(m.at("name").get<std::string>());
            spec.priors = cfg.base_priors;
            if (m.contains("priors")) detail::parse_priors_into(m.at("priors"), spec.priors);
            cfg.models.push_back(std::move(spec));
        }
    } else {
        for (const char* name : {"CoxBVS-SL", "Sub-struct", "Subgroup", "Pooled"}) {
            ModelSpec spec;
            spec.kind = model_from_name(name);
            spec.priors = cfg.base_priors;
            cfg.models.push_back(std::move(spec));
        }
    }
    cfg.validate();
    return cfg;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument(detail::str("cannot open config '", path, "'"));
    json j;
    in >> j;
    return parse_experiment_config(j);
}

inline std::string config_hash(const ExperimentConfig& cfg) {
    return sha256_hex(cfg.raw.dump());
}

// ---------------------------------------------------------------------------
// Fit, predict, evaluate for one (training set, model) pair
// ---------------------------------------------------------------------------

struct FitResult {
    ModelKind kind = ModelKind::CoxBVS_SL;
    ChainSamples samples;
    PosteriorSummary summary;
    std::vector<std::vector<int>> selected;  // m*-rule selection per subgroup
    PredictionModel mpm_model;
    PredictionModel bma_model;
    ModelData data;  // standardized train/test + prepared blocks
};

inline FitResult fit_model(const Dataset& train, const Dataset& test, ModelKind kind,
                           const PriorSettings& priors, const ChainSettings& chain,
                           std::uint64_t seed) {
    FitResult fr;
    fr.kind = kind;
    fr.data = prepare_for_model(train, test, kind);
    ChainConfig cc;
    cc.iterations = chain.iterations;
    cc.burn_in = chain.burn_in;
    cc.thin = chain.thin;
    cc.omega_thin = chain.omega_thin;
    cc.seed = seed;
    cc.model = kind;
    cc.priors = priors.resolve(fr.data.prepared.p);
    fr.samples = run_mcmc(fr.data.prepared, cc);
    fr.summary = summarize(fr.samples);
    fr.selected = select_variables(fr.summary);
    const auto mpm = mpm_coefficients(fr.summary);
    const auto bma = bma_coefficients(fr.samples);
    const auto h = mean_hazard(fr.samples);
    for (int s = 0; s < fr.samples.S; ++s) {
        SubgroupPrediction sp;
        sp.hazard = h[s];
        sp.boundaries = fr.data.prepared.subgroups[s].grouped.boundaries;
        sp.eta = fr.data.prepared.subgroups[s].eta;
        sp.kappa = fr.data.prepared.subgroups[s].kappa;
        sp.coefficients = mpm[s];
        fr.mpm_model.subgroups.push_back(sp);
        sp.coefficients = bma[s];
        fr.bma_model.subgroups.push_back(sp);
    }
    fr.mpm_model.standardization = fr.data.standardization;
    fr.bma_model.standardization = fr.data.standardization;
    return fr;
}

struct IbsRow {
    std::string model;
    int subgroup = 0;       // original test subgroup label
    std::string coef_type;  // "mpm" or "bma"
    double t_star = 0.0;
    double ibs = 0.0;
};

// Per-subgroup IBS of a fitted model on the raw (unstandardized) test set.
// t_star_by_subgroup holds one horizon per original subgroup label.
inline std::vector<IbsRow> evaluate_fit(const FitResult& fr, const Dataset& raw_test,
                                        const std::vector<double>& t_star_by_subgroup,
                                        const EvaluationSettings& ev) {
    std::vector<IbsRow> rows;
    for (int s = 1; s <= raw_test.S; ++s) {
        const double ts = t_star_by_subgroup[s - 1];
        if (ev.mpm)
            rows.push_back({model_name(fr.kind), s, "mpm", ts,
                            integrated_brier(fr.mpm_model, raw_test, ts, s)});
        if (ev.bma)
            rows.push_back({model_name(fr.kind), s, "bma", ts,
                            integrated_brier(fr.bma_model, raw_test, ts, s)});
    }
    return rows;
}

// ---------------------------------------------------------------------------
// JSON serialization of summaries and prediction models
// ---------------------------------------------------------------------------

namespace detail {

inline json vec_to_json(const Eigen::VectorXd& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

inline Eigen::VectorXd vec_from_json(const json& a) {
    Eigen::VectorXd v(static_cast<int>(a.size()));
    for (std::size_t i = 0; i < a.size(); ++i) v[static_cast<int>(i)] = a[i].get<double>();
    return v;
}

}  // namespace detail

inline json summary_to_json(const PosteriorSummary& ps) {
    json j;
    j["p"] = ps.p;
    j["S"] = ps.S;
    for (int s = 0; s < ps.S; ++s) {
        json sub;
        sub["selection_prob"] = detail::vec_to_json(ps.selection_prob[s]);
        sub["marginal_mean"] = detail::vec_to_json(ps.marginal_mean[s]);
        sub["marginal_sd"] = detail::vec_to_json(ps.marginal_sd[s]);
        sub["conditional_mean"] = detail::vec_to_json(ps.conditional_mean[s]);
        sub["conditional_sd"] = detail::vec_to_json(ps.conditional_sd[s]);
        json cmd = json::array(), csd = json::array();
        for (int i = 0; i < ps.p; ++i) {
            cmd.push_back(static_cast<bool>(ps.conditional_mean_defined[s][i]));
            csd.push_back(static_cast<bool>(ps.conditional_sd_defined[s][i]));
        }
        sub["conditional_mean_defined"] = cmd;
        sub["conditional_sd_defined"] = csd;
        sub["mean_model_size"] = ps.mean_model_size[s];
        j["subgroups"].push_back(sub);
    }
    return j;
}

inline PosteriorSummary summary_from_json(const json& j) {
    PosteriorSummary ps;
    ps.p = j.at("p").get<int>();
    ps.S = j.at("S").get<int>();
    for (const auto& sub : j.at("subgroups")) {
        ps.selection_prob.push_back(detail::vec_from_json(sub.at("selection_prob")));
        ps.marginal_mean.push_back(detail::vec_from_json(sub.at("marginal_mean")));
        ps.marginal_sd.push_back(detail::vec_from_json(sub.at("marginal_sd")));
        ps.conditional_mean.push_back(detail::vec_from_json(sub.at("conditional_mean")));
        ps.conditional_sd.push_back(detail::vec_from_json(sub.at("conditional_sd")));
        Eigen::Matrix<bool, Eigen::Dynamic, 1> cmd(ps.p), csd(ps.p);
        for (int i = 0; i < ps.p; ++i) {
            cmd[i] = sub.at("conditional_mean_defined")[i].get<bool>();
            csd[i] = sub.at("conditional_sd_defined")[i].get<bool>();
        }
        ps.conditional_mean_defined.push_back(cmd);
        ps.conditional_sd_defined.push_back(csd);
        ps.mean_model_size.push_back(sub.at("mean_model_size").get<double>());
    }
    return ps;
}

inline json prediction_model_to_json(const PredictionModel& mpm, const PredictionModel& bma,
                                     const std::string& model) {
    json j;
    j["model"] = model;
    json st;
    st["scope"] = mpm.standardization.scope == StandardizationParams::Scope::Pooled
                      ? "pooled"
                      : "per-subgroup";
    for (std::size_t u = 0; u < mpm.standardization.means.size(); ++u) {
        st["means"].push_back(detail::vec_to_json(mpm.standardization.means[u]));
        st["sds"].push_back(detail::vec_to_json(mpm.standardization.sds[u]));
    }
    j["standardization"] = st;
    for (std::size_t s = 0; s < mpm.subgroups.size(); ++s) {
        json sub;
        sub["mpm"] = detail::vec_to_json(mpm.subgroups[s].coefficients);
        sub["bma"] = detail::vec_to_json(bma.subgroups[s].coefficients);
        sub["hazard"] = detail::vec_to_json(mpm.subgroups[s].hazard);
        sub["boundaries"] = mpm.subgroups[s].boundaries;
        sub["eta"] = mpm.subgroups[s].eta;
        sub["kappa"] = mpm.subgroups[s].kappa;
        j["subgroups"].push_back(sub);
    }
    return j;
}

inline std::pair<PredictionModel, PredictionModel> prediction_model_from_json(const json& j) {
    PredictionModel mpm, bma;
    const auto& st = j.at("standardization");
    StandardizationParams sp;
    sp.scope = st.at("scope").get<std::string>() == "pooled"
                   ? StandardizationParams::Scope::Pooled
                   : StandardizationParams::Scope::PerSubgroup;
    for (const auto& m : st.at("means")) sp.means.push_back(detail::vec_from_json(m));
    for (const auto& m : st.at("sds")) sp.sds.push_back(detail::vec_from_json(m));
    mpm.standardization = sp;
    bma.standardization = sp;
    for (const auto& sub : j.at("subgroups")) {
        SubgroupPrediction p;
        p.hazard = detail::vec_from_json(sub.at("hazard"));
        p.boundaries = sub.at("boundaries").get<std::vector<double>>();
        p.eta = sub.at("eta").get<double>();
        p.kappa = sub.at("kappa").get<double>();
        p.coefficients = detail::vec_from_json(sub.at("mpm"));
        mpm.subgroups.push_back(p);
        p.coefficients = detail::vec_from_json(sub.at("bma"));
        bma.subgroups.push_back(p);
    }
    return {mpm, bma};
}

// ---------------------------------------------------------------------------
// Output writing
// ---------------------------------------------------------------------------

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error(detail::str("cannot write '", path.string(), "'"));
    out << std::setprecision(17);
    return out;
}

}  // namespace detail

inline void write_summary_csv(const PosteriorSummary& ps, const std::string& hash,
                              const std::filesystem::path& path) {
    auto out = detail::open_out(path);
    out << "# config_hash=" << hash << '\n';
    out << "subgroup,variable,selection_prob,marginal_mean,marginal_sd,conditional_mean,"
           "conditional_sd,conditional_defined,mean_model_size\n";
    for (int s = 0; s < ps.S; ++s)
        for (int i = 0; i < ps.p; ++i)
            out << (s + 1) << ',' << (i + 1) << ',' << ps.selection_prob[s][i] << ','
                << ps.marginal_mean[s][i] << ',' << ps.marginal_sd[s][i] << ','
                << ps.conditional_mean[s][i] << ',' << ps.conditional_sd[s][i] << ','
                << (ps.conditional_mean_defined[s][i] ? 1 : 0) << ',' << ps.mean_model_size[s]
                << '\n';
}

inline void write_edges_csv(const EdgeProbabilities& ep, const std::string& hash,
                            const std::filesystem::path& within_path,
                            const std::filesystem::path& between_path, int S) {
    auto wout = detail::open_out(within_path);
    wout << "# config_hash=" << hash << '\n';
    wout << "subgroup,i,j,probability\n";
    for (std::size_t s = 0; s < ep.within.size(); ++s) {
        const int p = static_cast<int>(ep.within[s].rows());
        for (int i = 0; i < p; ++i)
            for (int j = i + 1; j < p; ++j)
                wout << (s + 1) << ',' << (i + 1) << ',' << (j + 1) << ',' << ep.within[s](i, j)
                     << '\n';
    }
    auto bout = detail::open_out(between_path);
    bout << "# config_hash=" << hash << '\n';
    bout << "subgroup_r,subgroup_s,variable,probability\n";
    int q = 0;
    for (int r = 0; r < S; ++r)
        for (int s = r + 1; s < S; ++s, ++q) {
            if (q >= static_cast<int>(ep.between.size())) break;
            for (int i = 0; i < ep.between[q].size(); ++i)
                bout << (r + 1) << ',' << (s + 1) << ',' << (i + 1) << ',' << ep.between[q][i]
                     << '\n';
        }
}

inline void write_ibs_csv(const std::vector<IbsRow>& rows, const std::string& hash,
                          const std::filesystem::path& path) {
    auto out = detail::open_out(path);
    out << "# config_hash=" << hash << '\n';
    out << "model,subgroup,coefficients,t_star,ibs\n";
    for (const auto& r : rows)
        out << r.model << ',' << r.subgroup << ',' << r.coef_type << ',' << r.t_star << ','
            << r.ibs << '\n';
}

// Prediction-error curve at the distinct observed test times up to t*.
inline void write_pec_csv(const FitResult& fr, const Dataset& raw_test,
                          const std::vector<double>& t_star_by_subgroup,
                          const EvaluationSettings& ev, const std::string& hash,
                          const std::filesystem::path& path) {
    auto out = detail::open_out(path);
    out << "# config_hash=" << hash << '\n';
    out << "subgroup,coefficients,t,brier\n";
    for (int s = 1; s <= raw_test.S; ++s) {
        std::vector<double> times;
        for (const auto& r : raw_test.records)
            if (r.subgroup == s && r.observed_time <= t_star_by_subgroup[s - 1])
                times.push_back(r.observed_time);
        std::sort(times.begin(), times.end());
        times.erase(std::unique(times.begin(), times.end()), times.end());
        for (double t : times) {
            if (ev.mpm)
                out << s << ",mpm," << t << ',' << brier_score(fr.mpm_model, raw_test, t, s)
                    << '\n';
            if (ev.bma)
                out << s << ",bma," << t << ',' << brier_score(fr.bma_model, raw_test, t, s)
                    << '\n';
        }
    }
}

// ---------------------------------------------------------------------------
// Experiment driver
// ---------------------------------------------------------------------------

struct ReplicationSummary {
    std::string model;
    int scenario_p = 0;
    int scenario_n = 0;
    int replication = 0;
    PosteriorSummary summary;
    std::vector<std::vector<int>> selected;
    std::optional<EdgeProbabilities> edges;
    std::vector<IbsRow> ibs;
    double censoring_rate_train = 0.0;
    double censoring_rate_test = 0.0;
};

inline json replication_summary_to_json(const ReplicationSummary& rs, const std::string& hash) {
    json j;
    j["config_hash"] = hash;
    j["model"] = rs.model;
    j["scenario_p"] = rs.scenario_p;
    j["scenario_n"] = rs.scenario_n;
    j["replication"] = rs.replication;
    j["summary"] = summary_to_json(rs.summary);
    j["selected"] = rs.selected;
    j["censoring_rate_train"] = rs.censoring_rate_train;
    j["censoring_rate_test"] = rs.censoring_rate_test;
    if (rs.edges) {
        json ew = json::array();
        for (const auto& m : rs.edges->within) {
            json rows = json::array();
            for (Eigen::Index i = 0; i < m.rows(); ++i) {
                json row = json::array();
                for (Eigen::Index jj = 0; jj < m.cols(); ++jj) row.push_back(m(i, jj));
                rows.push_back(row);
            }
            ew.push_back(rows);
        }
        j["edges_within"] = ew;
        json eb = json::array();
        for (const auto& v : rs.edges->between) eb.push_back(detail::vec_to_json(v));
        j["edges_between"] = eb;
    }
    json ibs = json::array();
    for (const auto& r : rs.ibs) {
        json row;
        row["model"] = r.model;
        row["subgroup"] = r.subgroup;
        row["coefficients"] = r.coef_type;
        row["t_star"] = r.t_star;
        row["ibs"] = r.ibs;
        ibs.push_back(row);
    }
    j["ibs"] = ibs;
    return j;
}

inline ReplicationSummary replication_summary_from_json(const json& j) {
    ReplicationSummary rs;
    rs.model = j.at("model").get<std::string>();
    rs.scenario_p = j.at("scenario_p").get<int>();
    rs.scenario_n = j.at("scenario_n").get<int>();
    rs.replication = j.at("replication").get<int>();
    rs.summary = summary_from_json(j.at("summary"));
    rs.selected = j.at("selected").get<std::vector<std::vector<int>>>();
    rs.censoring_rate_train = j.at("censoring_rate_train").get<double>();
    rs.censoring_rate_test = j.at("censoring_rate_test").get<double>();
    if (j.contains("edges_within")) {
        EdgeProbabilities ep;
        for (const auto& rows : j.at("edges_within")) {
            const int p = static_cast<int>(rows.size());
            Eigen::MatrixXd m(p, p);
            for (int i = 0; i < p; ++i)
                for (int jj = 0; jj < p; ++jj) m(i, jj) = rows[i][jj].get<double>();
            ep.within.push_back(m);
        }
        for (const auto& v : j.at("edges_between"))
            ep.between.push_back(detail::vec_from_json(v));
        rs.edges = std::move(ep);
    }
    for (const auto& row : j.at("ibs")) {
        IbsRow r;
        r.model = row.at("model").get<std::string>();
        r.subgroup = row.at("subgroup").get<int>();
        r.coef_type = row.at("coefficients").get<std::string>();
        r.t_star = row.at("t_star").get<double>();
        r.ibs = row.at("ibs").get<double>();
        rs.ibs.push_back(r);
    }
    return rs;
}

inline double censoring_rate(const Dataset& ds) {
    if (ds.records.empty()) return 0.0;
    double censored = 0.0;
    for (const auto& r : ds.records) censored += r.event == 0 ? 1.0 : 0.0;
    return censored / static_cast<double>(ds.records.size());
}

struct ExperimentReport {
    std::vector<ReplicationSummary> replications;
    std::vector<std::string> failures;  // human-readable failure records
    bool all_ok() const { return failures.empty(); }
};

namespace detail {

inline std::string scenario_dir_name(int p, int n) {
    return detail::str("scenario_p", p, "_n", n);
}

}  // namespace detail

// Cross-replication means of the per-variable summaries and the unaggregated
// IBS table, per scenario and model.
inline void write_aggregate_report(const ExperimentReport& report, const ExperimentConfig& cfg,
                                   const std::string& hash, const std::filesystem::path& root);

// Runs the full pipeline: simulate (or split) -> fit every model variant ->
// evaluate -> write per-replication artifacts, then aggregate tables. Failing
// replications are recorded and skipped; the run continues.
inline ExperimentReport run_experiment(const ExperimentConfig& cfg,
                                       std::ostream* log = nullptr) {
    cfg.validate();
    namespace fs = std::filesystem;
    const std::string hash = config_hash(cfg);
    const fs::path root(cfg.output_dir);
    fs::create_directories(root);
    {
        auto cfg_out = detail::open_out(root / "config_used.json");
        json echo = cfg.raw;
        echo["config_hash"] = hash;
        cfg_out << echo.dump(2) << '\n';
    }

    ExperimentReport report;
    Dataset full_dataset;
    const bool dataset_mode = cfg.dataset_path.has_value();
    if (dataset_mode) full_dataset = load_dataset(*cfg.dataset_path);

    std::vector<std::pair<int, int>> scenarios;
    if (dataset_mode)
        scenarios.emplace_back(full_dataset.p, static_cast<int>(full_dataset.records.size()));
    else
        for (int p : cfg.grid_p)
            for (int n : cfg.grid_n) scenarios.emplace_back(p, n);

    int scenario_index = 0;
    for (const auto& [p_val, n_val] : scenarios) {
        const fs::path scen_dir = root / detail::scenario_dir_name(p_val, n_val);
        for (int rep = 0; rep < cfg.replications; ++rep) {
            const fs::path rep_dir = scen_dir / detail::str("rep_", rep);
            fs::create_directories(rep_dir);
            const std::uint64_t rep_stream =
                static_cast<std::uint64_t>(scenario_index) * 1000003ULL + rep;
            try {
                Dataset train, test;
                if (dataset_mode) {
                    auto [tr, te] = stratified_split(full_dataset, cfg.train_fraction,
                                                     derive_seed(cfg.seed, rep_stream * 2));
                    train = std::move(tr);
                    test = std::move(te);
                } else {
                    const SimulationDesign design =
                        cfg.design.build(p_val, n_val, cfg.seed);
                    train = simulate_dataset(design, derive_seed(cfg.seed, rep_stream * 2));
                    test = simulate_dataset(design, derive_seed(cfg.seed, rep_stream * 2 + 1));
                    json design_echo;
                    design_echo["config_hash"] = hash;
                    design_echo["p"] = design.p;
                    design_echo["n_per_subgroup"] = design.n_per_subgroup;
                    design_echo["block_corr"] = design.block_corr;
                    design_echo["weibull_scale"] = design.weibull_scale;
                    design_echo["weibull_shape"] = design.weibull_shape;
                    design_echo["censoring_covariate_effect"] =
                        design.censoring_covariate_effect;
                    design_echo["train_seed"] = derive_seed(cfg.seed, rep_stream * 2);
                    design_echo["test_seed"] = derive_seed(cfg.seed, rep_stream * 2 + 1);
                    auto dj = detail::open_out(rep_dir / "design.json");
                    dj << design_echo.dump(2) << '\n';
                }
                save_dataset(train, (rep_dir / "train.csv").string());
                save_dataset(test, (rep_dir / "test.csv").string());

                // One evaluation horizon per subgroup per split, shared by all
                // models so their scores are comparable.
                std::vector<double> t_star(test.S);
                for (int s = 1; s <= test.S; ++s)
                    t_star[s - 1] = cfg.evaluation.horizon(test, s);

                for (std::size_t mi = 0; mi < cfg.models.size(); ++mi) {
                    const ModelSpec& spec = cfg.models[mi];
                    const std::string mname = model_name(spec.kind);
                    const fs::path model_dir = rep_dir / mname;
                    fs::create_directories(model_dir);
                    const std::uint64_t chain_seed =
                        derive_seed(cfg.seed, rep_stream * 97 + 13 * (mi + 1));
                    if (log)
                        (*log) << "[run] p=" << p_val << " n=" << n_val << " rep=" << rep
                               << " model=" << mname << '\n'
                               << std::flush;
                    FitResult fr =
                        fit_model(train, test, spec.kind, spec.priors, cfg.chain, chain_seed);

                    json chain_echo;
                    chain_echo["config_hash"] = hash;
                    chain_echo["model"] = mname;
                    chain_echo["seed"] = chain_seed;
                    chain_echo["iterations"] = cfg.chain.iterations;
                    chain_echo["burn_in"] = cfg.chain.burn_in;
                    save_chain(fr.samples, (model_dir / "chain").string(), chain_echo);

                    ReplicationSummary rs;
                    rs.model = mname;
                    rs.scenario_p = p_val;
                    rs.scenario_n = n_val;
                    rs.replication = rep;
                    rs.summary = fr.summary;
                    rs.selected = fr.selected;
                    rs.censoring_rate_train = censoring_rate(train);
                    rs.censoring_rate_test = censoring_rate(test);
                    if (model_uses_graph(spec.kind)) rs.edges = edge_probabilities(fr.samples);
                    rs.ibs = evaluate_fit(fr, test, t_star, cfg.evaluation);

                    write_summary_csv(fr.summary, hash, model_dir / "summary.csv");
                    if (rs.edges)
                        write_edges_csv(*rs.edges, hash, model_dir / "edges_within.csv",
                                        model_dir / "edges_between.csv", fr.samples.S);
                    write_ibs_csv(rs.ibs, hash, model_dir / "ibs.csv");
                    write_pec_csv(fr, test, t_star, cfg.evaluation, hash,
                                  model_dir / "pec.csv");
                    {
                        auto mj = detail::open_out(model_dir / "model.json");
                        json pm = prediction_model_to_json(fr.mpm_model, fr.bma_model, mname);
                        pm["config_hash"] = hash;
                        mj << pm.dump(2) << '\n';
                    }
                    {
                        auto sj = detail::open_out(model_dir / "summary.json");
                        sj << replication_summary_to_json(rs, hash).dump(2) << '\n';
                    }
                    report.replications.push_back(std::move(rs));
                }
            } catch (const std::exception& e) {
                report.failures.push_back(detail::str(
                    "scenario p=", p_val, " n=", n_val, " rep=", rep, ": ", e.what()));
            }
        }
        ++scenario_index;
    }

    write_aggregate_report(report, cfg, hash, root);
    return report;
}

inline json aggregate_to_json(const ExperimentReport& report, const std::string& hash) {
    json j;
    j["config_hash"] = hash;
    j["failures"] = report.failures;
    // group replications by (scenario, model)
    std::map<std::tuple<int, int, std::string>, std::vector<const ReplicationSummary*>> groups;
    for (const auto& rs : report.replications)
        groups[{rs.scenario_p, rs.scenario_n, rs.model}].push_back(&rs);
    json cells = json::array();
    for (const auto& [key, rss] : groups) {
        const auto& [p_val, n_val, mname] = key;
        json cell;
        cell["scenario_p"] = p_val;
        cell["scenario_n"] = n_val;
        cell["model"] = mname;
        cell["replications"] = rss.size();
        const int S = rss.front()->summary.S;
        const int p = rss.front()->summary.p;
        for (int s = 0; s < S; ++s) {
            json sub;
            Eigen::VectorXd sel = Eigen::VectorXd::Zero(p);
            Eigen::VectorXd mm = Eigen::VectorXd::Zero(p);
            Eigen::VectorXd msd = Eigen::VectorXd::Zero(p);
            Eigen::VectorXd cm = Eigen::VectorXd::Zero(p);
            Eigen::VectorXd csd = Eigen::VectorXd::Zero(p);
            Eigen::VectorXd cm_n = Eigen::VectorXd::Zero(p);
            Eigen::VectorXd csd_n = Eigen::VectorXd::Zero(p);
            double msize = 0.0;
            for (const auto* rs : rss) {
                sel += rs->summary.selection_prob[s];
                mm += rs->summary.marginal_mean[s];
                msd += rs->summary.marginal_sd[s];
                msize += rs->summary.mean_model_size[s];
                for (int i = 0; i < p; ++i) {
                    if (rs->summary.conditional_mean_defined[s][i]) {
                        cm[i] += rs->summary.conditional_mean[s][i];
                        cm_n[i] += 1.0;
                    }
                    if (rs->summary.conditional_sd_defined[s][i]) {
                        csd[i] += rs->summary.conditional_sd[s][i];
                        csd_n[i] += 1.0;
                    }
                }
            }
            const double nrep = static_cast<double>(rss.size());
            sub["selection_prob"] = detail::vec_to_json(sel / nrep);
            sub["marginal_mean"] = detail::vec_to_json(mm / nrep);
            sub["marginal_sd"] = detail::vec_to_json(msd / nrep);
            for (int i = 0; i < p; ++i) {
                cm[i] = cm_n[i] > 0 ? cm[i] / cm_n[i] : 0.0;
                csd[i] = csd_n[i] > 0 ? csd[i] / csd_n[i] : 0.0;
            }
            sub["conditional_mean"] = detail::vec_to_json(cm);
            sub["conditional_sd"] = detail::vec_to_json(csd);
            sub["mean_model_size"] = msize / nrep;
            cell["subgroups"].push_back(sub);
        }
        // mean edge probabilities across replications
        if (rss.front()->edges) {
            const auto& first = *rss.front()->edges;
            std::vector<Eigen::MatrixXd> within(first.within.size());
            std::vector<Eigen::VectorXd> between(first.between.size());
            for (std::size_t s = 0; s < within.size(); ++s)
                within[s] = Eigen::MatrixXd::Zero(first.within[s].rows(), first.within[s].cols());
            for (std::size_t q = 0; q < between.size(); ++q)
                between[q] = Eigen::VectorXd::Zero(first.between[q].size());
            for (const auto* rs : rss) {
                for (std::size_t s = 0; s < within.size(); ++s) within[s] += rs->edges->within[s];
                for (std::size_t q = 0; q < between.size(); ++q)
                    between[q] += rs->edges->between[q];
            }
            json ew = json::array();
            for (auto& m : within) {
                m /= static_cast<double>(rss.size());
                json rows = json::array();
                for (Eigen::Index i = 0; i < m.rows(); ++i) {
                    json row = json::array();
                    for (Eigen::Index jj = 0; jj < m.cols(); ++jj) row.push_back(m(i, jj));
                    rows.push_back(row);
                }
                ew.push_back(rows);
            }
            cell["edges_within_mean"] = ew;
            json eb = json::array();
            for (auto& v : between) {
                v /= static_cast<double>(rss.size());
                eb.push_back(detail::vec_to_json(v));
            }
            cell["edges_between_mean"] = eb;
        }
        json ibs = json::array();
        for (const auto* rs : rss)
            for (const auto& r : rs->ibs) {
                json row;
                row["replication"] = rs->replication;
                row["subgroup"] = r.subgroup;
                row["coefficients"] = r.coef_type;
                row["t_star"] = r.t_star;
                row["ibs"] = r.ibs;
                ibs.push_back(row);
            }
        cell["ibs"] = ibs;
        cells.push_back(cell);
    }
    j["cells"] = cells;
    return j;
}

inline void write_aggregate_report(const ExperimentReport& report, const ExperimentConfig& cfg,
                                   const std::string& hash, const std::filesystem::path& root) {
    const json agg = aggregate_to_json(report, hash);
    {
        auto out = detail::open_out(root / "report.json");
        out << agg.dump(2) << '\n';
    }
    // flat CSVs for plotting
    auto sel_out = detail::open_out(root / "aggregate_selection.csv");
    sel_out << "# config_hash=" << hash << '\n';
    sel_out << "scenario_p,scenario_n,model,subgroup,variable,mean_selection_prob,"
               "mean_marginal_mean,mean_marginal_sd,mean_conditional_mean,mean_conditional_sd\n";
    for (const auto& cell : agg.at("cells")) {
        for (std::size_t s = 0; s < cell.at("subgroups").size(); ++s) {
            const auto& sub = cell.at("subgroups")[s];
            const auto& sel = sub.at("selection_prob");
            for (std::size_t i = 0; i < sel.size(); ++i)
                sel_out << cell.at("scenario_p").get<int>() << ','
                        << cell.at("scenario_n").get<int>() << ','
                        << cell.at("model").get<std::string>() << ',' << (s + 1) << ','
                        << (i + 1) << ',' << sel[i].get<double>() << ','
                        << sub.at("marginal_mean")[i].get<double>() << ','
                        << sub.at("marginal_sd")[i].get<double>() << ','
                        << sub.at("conditional_mean")[i].get<double>() << ','
                        << sub.at("conditional_sd")[i].get<double>() << '\n';
        }
    }
    auto ibs_out = detail::open_out(root / "aggregate_ibs.csv");
    ibs_out << "# config_hash=" << hash << '\n';
    ibs_out << "scenario_p,scenario_n,model,replication,subgroup,coefficients,t_star,ibs\n";
    for (const auto& cell : agg.at("cells"))
        for (const auto& row : cell.at("ibs"))
            ibs_out << cell.at("scenario_p").get<int>() << ','
                    << cell.at("scenario_n").get<int>() << ','
                    << cell.at("model").get<std::string>() << ','
                    << row.at("replication").get<int>() << ','
                    << row.at("subgroup").get<int>() << ','
                    << row.at("coefficients").get<std::string>() << ','
                    << row.at("t_star").get<double>() << ',' << row.at("ibs").get<double>()
                    << '\n';
}

// Re-aggregates from per-replication summary.json files on disk (the report
// subcommand). Returns the loaded summaries.
inline ExperimentReport load_experiment_tree(const std::filesystem::path& root) {
    namespace fs = std::filesystem;
    ExperimentReport report;
    if (!fs::exists(root))
        throw std::invalid_argument(detail::str("no experiment at '", root.string(), "'"));
    std::vector<fs::path> files;
    for (const auto& entry : fs::recursive_directory_iterator(root))
        if (entry.is_regular_file() && entry.path().filename() == "summary.json")
            files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
        std::ifstream in(f);
        json j;
        in >> j;
        report.replications.push_back(replication_summary_from_json(j));
    }
    if (report.replications.empty())
        throw std::invalid_argument(detail::str(
            "no summary.json files under '", root.string(), "'"));
    return report;
}

}  // namespace coxbvs
