// Command-line pipeline runner: simulate survival data, fit the model
// variants by MCMC, evaluate prediction error, and aggregate reports.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "coxbvs/chainio.hpp"
#include "coxbvs/csv.hpp"
#include "coxbvs/evaluate.hpp"
#include "coxbvs/experiment.hpp"
#include "coxbvs/posterior.hpp"
#include "coxbvs/sampler.hpp"
#include "coxbvs/simulate.hpp"

namespace fs = std::filesystem;
using coxbvs::json;

namespace {

coxbvs::ExperimentConfig config_from_options(const std::string& config_path,
                                             const std::string& preset,
                                             std::uint64_t seed_override, bool has_seed) {
    json j = json::object();
    if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (!in) throw std::invalid_argument("cannot open config '" + config_path + "'");
        in >> j;
    }
    if (!preset.empty()) j["preset"] = preset;
    if (has_seed) j["seed"] = seed_override;
    return coxbvs::parse_experiment_config(j);
}

int cmd_simulate(const coxbvs::ExperimentConfig& cfg, int p, int n, const std::string& out_dir) {
    fs::create_directories(out_dir);
    const coxbvs::SimulationDesign design = cfg.design.build(p, n, cfg.seed);
    const std::uint64_t train_seed = coxbvs::derive_seed(cfg.seed, 0);
    const std::uint64_t test_seed = coxbvs::derive_seed(cfg.seed, 1);
    const coxbvs::Dataset train = coxbvs::simulate_dataset(design, train_seed);
    const coxbvs::Dataset test = coxbvs::simulate_dataset(design, test_seed);
    coxbvs::save_dataset(train, (fs::path(out_dir) / "train.csv").string());
    coxbvs::save_dataset(test, (fs::path(out_dir) / "test.csv").string());
    json sidecar;
    sidecar["config_hash"] = coxbvs::config_hash(cfg);
    sidecar["p"] = design.p;
    sidecar["n_per_subgroup"] = design.n_per_subgroup;
    sidecar["block_corr"] = design.block_corr;
    sidecar["weibull_scale"] = design.weibull_scale;
    sidecar["weibull_shape"] = design.weibull_shape;
    sidecar["censoring_covariate_effect"] = design.censoring_covariate_effect;
    sidecar["seed"] = cfg.seed;
    sidecar["train_seed"] = train_seed;
    sidecar["test_seed"] = test_seed;
    sidecar["censoring_rate_train"] = coxbvs::censoring_rate(train);
    sidecar["censoring_rate_test"] = coxbvs::censoring_rate(test);
    std::ofstream sc(fs::path(out_dir) / "design.json");
    sc << sidecar.dump(2) << '\n';
    std::cout << "wrote train.csv, test.csv, design.json to " << out_dir << '\n';
    return 0;
}

int cmd_fit(const coxbvs::ExperimentConfig& cfg, const std::string& train_path,
            const std::string& model, const std::string& out_dir) {
    fs::create_directories(out_dir);
    const coxbvs::Dataset train = coxbvs::load_dataset(train_path);
    const coxbvs::ModelKind kind = coxbvs::model_from_name(model);
    coxbvs::PriorSettings priors = cfg.base_priors;
    for (const auto& spec : cfg.models)
        if (spec.kind == kind) priors = spec.priors;
    const std::uint64_t chain_seed = coxbvs::derive_seed(cfg.seed, 42);
    coxbvs::FitResult fr =
        coxbvs::fit_model(train, coxbvs::Dataset{}, kind, priors, cfg.chain, chain_seed);
    const std::string hash = coxbvs::config_hash(cfg);

    json chain_echo;
    chain_echo["config_hash"] = hash;
    chain_echo["model"] = model;
    chain_echo["seed"] = chain_seed;
    coxbvs::save_chain(fr.samples, (fs::path(out_dir) / "chain").string(), chain_echo);
    coxbvs::write_summary_csv(fr.summary, hash, fs::path(out_dir) / "summary.csv");
    if (coxbvs::model_uses_graph(kind)) {
        const auto ep = coxbvs::edge_probabilities(fr.samples);
        coxbvs::write_edges_csv(ep, hash, fs::path(out_dir) / "edges_within.csv",
                                fs::path(out_dir) / "edges_between.csv", fr.samples.S);
    }
    json pm = coxbvs::prediction_model_to_json(fr.mpm_model, fr.bma_model, model);
    pm["config_hash"] = hash;
    std::ofstream mj(fs::path(out_dir) / "model.json");
    mj << pm.dump(2) << '\n';
    std::cout << "fit " << model << ": " << fr.samples.draws() << " stored draws; outputs in "
              << out_dir << '\n';
    return 0;
}

int cmd_evaluate(const coxbvs::ExperimentConfig& cfg, const std::string& model_file,
                 const std::string& test_path, const std::string& out_dir) {
    fs::create_directories(out_dir);
    std::ifstream in(model_file);
    if (!in) throw std::invalid_argument("cannot open model file '" + model_file + "'");
    json pm;
    in >> pm;
    auto [mpm, bma] = coxbvs::prediction_model_from_json(pm);
    const coxbvs::Dataset test = coxbvs::load_dataset(test_path);
    const std::string hash = coxbvs::config_hash(cfg);
    const std::string model = pm.value("model", "unknown");

    std::vector<coxbvs::IbsRow> rows;
    auto pec = coxbvs::detail::open_out(fs::path(out_dir) / "pec.csv");
    pec << "# config_hash=" << hash << '\n';
    pec << "subgroup,coefficients,t,brier\n";
    for (int s = 1; s <= test.S; ++s) {
        const double t_star = cfg.evaluation.horizon(test, s);
        if (cfg.evaluation.mpm)
            rows.push_back({model, s, "mpm", t_star, coxbvs::integrated_brier(mpm, test, t_star, s)});
        if (cfg.evaluation.bma)
            rows.push_back({model, s, "bma", t_star, coxbvs::integrated_brier(bma, test, t_star, s)});
        std::vector<double> times;
        for (const auto& r : test.records)
            if (r.subgroup == s && r.observed_time <= t_star) times.push_back(r.observed_time);
        std::sort(times.begin(), times.end());
        times.erase(std::unique(times.begin(), times.end()), times.end());
        for (double t : times) {
            if (cfg.evaluation.mpm)
                pec << s << ",mpm," << t << ',' << coxbvs::brier_score(mpm, test, t, s) << '\n';
            if (cfg.evaluation.bma)
                pec << s << ",bma," << t << ',' << coxbvs::brier_score(bma, test, t, s) << '\n';
        }
    }
    coxbvs::write_ibs_csv(rows, hash, fs::path(out_dir) / "ibs.csv");
    for (const auto& r : rows)
        std::cout << r.model << " subgroup " << r.subgroup << " (" << r.coef_type
                  << "): IBS(" << r.t_star << ") = " << r.ibs << '\n';
    return 0;
}

int cmd_report(const coxbvs::ExperimentConfig& cfg, const std::string& experiment_dir) {
    const coxbvs::ExperimentReport report = coxbvs::load_experiment_tree(experiment_dir);
    coxbvs::write_aggregate_report(report, cfg, coxbvs::config_hash(cfg), experiment_dir);
    std::cout << "aggregated " << report.replications.size() << " replication summaries into "
              << experiment_dir << "/report.json\n";
    return 0;
}

int cmd_run_experiment(const coxbvs::ExperimentConfig& cfg, bool quiet) {
    const coxbvs::ExperimentReport report =
        coxbvs::run_experiment(cfg, quiet ? nullptr : &std::cerr);
    std::cout << "experiment finished: " << report.replications.size()
              << " model fits, " << report.failures.size() << " failures; outputs in "
              << cfg.output_dir << '\n';
    for (const auto& f : report.failures) std::cerr << "[failed] " << f << '\n';
    return report.all_ok() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bayesian Cox survival models for heterogeneous subgroups"};
    app.require_subcommand(1);

    std::string config_path, preset, out_dir = "out";
    std::uint64_t seed = 0;
    bool quiet = false;
    app.add_option("--config", config_path, "experiment config JSON")->capture_default_str();
    app.add_option("--preset", preset, "hyperparameter preset: simulation | case-study");
    auto* seed_opt = app.add_option("--seed", seed, "base RNG seed (overrides config)");
    app.add_flag("--quiet", quiet, "suppress progress logging");

    auto* sim = app.add_subcommand("simulate", "draw train/test data from the synthetic design");
    int sim_p = 20, sim_n = 100;
    sim->add_option("--p", sim_p, "covariate count")->capture_default_str();
    sim->add_option("--n", sim_n, "per-subgroup sample size")->capture_default_str();
    sim->add_option("--out", out_dir, "output directory")->capture_default_str();

    auto* fit = app.add_subcommand("fit", "run the MCMC sampler on a training CSV");
    std::string train_path, model = "CoxBVS-SL";
    fit->add_option("--train", train_path, "training CSV")->required();
    fit->add_option("--model", model, "CoxBVS-SL | Sub-struct | Subgroup | Pooled")
        ->capture_default_str();
    fit->add_option("--out", out_dir, "output directory")->capture_default_str();

    auto* ev = app.add_subcommand("evaluate", "prediction-error curves and IBS on a test CSV");
    std::string model_file, test_path;
    ev->add_option("--model-file", model_file, "model.json from a fit")->required();
    ev->add_option("--test", test_path, "test CSV")->required();
    ev->add_option("--out", out_dir, "output directory")->capture_default_str();

    auto* rep = app.add_subcommand("report", "aggregate per-replication summaries");
    std::string experiment_dir;
    rep->add_option("--experiment", experiment_dir, "experiment output directory")->required();

    auto* run = app.add_subcommand("run-experiment",
                                   "simulate -> fit all variants -> evaluate -> report");

    CLI11_PARSE(app, argc, argv);

    try {
        coxbvs::ExperimentConfig cfg =
            config_from_options(config_path, preset, seed, seed_opt->count() > 0);
        if (sim->parsed()) return cmd_simulate(cfg, sim_p, sim_n, out_dir);
        if (fit->parsed()) return cmd_fit(cfg, train_path, model, out_dir);
        if (ev->parsed()) return cmd_evaluate(cfg, model_file, test_path, out_dir);
        if (rep->parsed()) return cmd_report(cfg, experiment_dir);
        if (run->parsed()) return cmd_run_experiment(cfg, quiet);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
