#include <cstdio>
#include <functional>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "adsim/bench.hpp"
#include "adsim/cohort.hpp"
#include "adsim/csv.hpp"
#include "adsim/effects.hpp"
#include "adsim/errors.hpp"
#include "adsim/estimators.hpp"
#include "adsim/graph.hpp"
#include "adsim/model_bank.hpp"
#include "adsim/reference.hpp"
#include "adsim/simulate.hpp"

namespace {

using namespace adsim;

nlohmann::json load_json(const std::string& path) {
    try {
        return nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("InvalidJson", "cannot parse '" + path + "': " + e.what());
    }
}

int cmd_graph_check(const std::string& path) {
    auto graph = load_graph(path);
    auto report = validate(graph);
    if (report.ok()) {
        std::cout << "ok: " << graph.variables.size() << " variables, " << graph.edges.size()
                  << " edges, hash " << graph_hash(graph) << "\n";
        return 0;
    }
    std::cerr << report.to_string();
    return 1;
}

void cmd_cohort_prepare(const std::string& csv, const std::string& graph_path, std::uint64_t seed,
                        const std::string& out_csv, const std::string& out_gmm) {
    auto graph = load_graph(graph_path);
    auto issues = validate(graph);
    if (!issues.ok()) throw ConfigError("InvalidGraph", issues.to_string());

    auto cohort = ingest(csv, graph);
    auto subtype = infer_subtypes(cohort, seed);
    auto models = fit_imputation_models(cohort, graph, subtype.labels);
    auto labeled = impute(cohort, graph, subtype.labels, models, subtype.gmm);

    write_csv(out_csv, labeled_cohort_table(labeled, graph));
    nlohmann::json gmm{{"weights", subtype.gmm.weights},
                       {"means", subtype.gmm.means},
                       {"sds", subtype.gmm.sds}};
    if (!out_gmm.empty()) write_file(out_gmm, gmm.dump(2) + "\n");

    std::size_t imputed_cells = 0;
    for (const auto& per_patient : labeled.imputed) {
        for (const auto& per_step : per_patient) {
            for (bool flag : per_step) imputed_cells += flag ? 1 : 0;
        }
    }
    std::cout << "prepared " << labeled.data.size() << " patients, " << labeled.data.total_rows()
              << " visits, " << imputed_cells << " imputed cells\n";
}

void cmd_fit(const std::string& cohort_path, const std::string& graph_path,
             const std::string& out_path, double holdout, std::uint64_t seed,
             const std::string& report_path, const std::string& gmm_path) {
    auto graph = load_graph(graph_path);
    auto labeled = load_labeled_cohort(cohort_path, graph);

    if (!gmm_path.empty()) {
        auto j = load_json(gmm_path);
        labeled.gmm.weights = j.at("weights").get<std::array<double, 2>>();
        labeled.gmm.means = j.at("means").get<std::array<double, 2>>();
        labeled.gmm.sds = j.at("sds").get<std::array<double, 2>>();
    } else {
        std::vector<double> ratios;
        for (const auto& p : labeled.data.patients) {
            if (!p.abeta_missing.empty() && !p.abeta_missing[0]) ratios.push_back(p.abeta[0]);
        }
        labeled.gmm = fit_gmm2(ratios, seed);
    }

    auto result = fit_bank(labeled, graph, holdout, seed);
    save_bank(out_path, result.bank);
    if (!report_path.empty()) write_csv(report_path, fit_report_table(result.report));

    for (const auto& [name, model] : result.bank.baseline) {
        if (model.type == ConditionalModel::Type::logistic && !model.logistic.converged) {
            std::cerr << "warning: baseline model for " << name
                      << " did not converge (gradient " << model.logistic.final_grad_norm << ")\n";
        }
    }
    for (const auto& [name, model] : result.bank.autoregressive) {
        if (model.type == ConditionalModel::Type::logistic && !model.logistic.converged) {
            std::cerr << "warning: autoregressive model for " << name
                      << " did not converge (gradient " << model.logistic.final_grad_norm << ")\n";
        }
    }
    std::cout << "bank written to " << out_path << " (hash " << bank_hash(result.bank) << ")\n";
}

void cmd_simulate(const std::string& bank_path, const std::string& graph_path, std::size_t n,
                  int horizon, double gamma, double epsilon, const std::string& policy,
                  std::uint64_t seed, const std::string& out_dir, bool clamp,
                  const std::string& effects_path, bool emit_cohort) {
    auto graph = load_graph(graph_path);
    auto bank = load_bank(bank_path, graph);
    SimConfig config;
    config.n_patients = n;
    config.horizon = horizon;
    config.gamma = gamma;
    config.epsilon = epsilon;
    config.policy = policy_kind_from_string(policy);
    config.seed = seed;
    config.clamp_adas = clamp;
    nlohmann::json effects;
    if (!effects_path.empty()) effects = load_json(effects_path);
    auto dataset = sample_dataset(bank, graph, make_run(config, effects));
    export_dataset(dataset, graph, out_dir);
    if (emit_cohort) {
        write_csv(out_dir + "/cohort.csv", cohort_table(dataset, graph, /*include_z=*/true));
    }
    std::cout << "wrote " << out_dir << "/observational.csv, oracle.csv, provenance.json"
              << (emit_cohort ? ", cohort.csv" : "") << "\n";
}

void cmd_estimate(const std::string& train_path, const std::string& oracle_path,
                  const std::string& estimator, std::size_t ts, std::uint64_t seed,
                  const std::string& out_path, bool hide_z, bool with_diagnosis,
                  const std::string& effects_path, int hidden, int epochs, double lr) {
    EffectSpec effects = effects_path.empty() ? default_effect_spec()
                                              : effect_spec_from_json(load_json(effects_path));

    FeatureViewOptions options;
    options.hide_z = hide_z;
    options.include_diagnosis = with_diagnosis;
    options.ts = ts;
    auto view = build_feature_view(read_csv(train_path), options);

    CateEstimate estimate;
    if (estimator == "s") {
        estimate = s_learner(view, effects.n_actions());
    } else if (estimator == "t") {
        estimate = t_learner(view, effects.n_actions());
    } else if (estimator == "seq_t") {
        RecurrentRegressor::Options rnn;
        rnn.hidden = hidden;
        rnn.epochs = epochs;
        rnn.learning_rate = lr;
        rnn.seed = seed;
        estimate = seq_t_learner(view, rnn, effects.n_actions());
    } else {
        throw ConfigError("InvalidConfig", "unknown estimator '" + estimator + "'");
    }

    auto oracle = oracle_units_at(read_csv(oracle_path), view.ts);
    auto score = pehe(estimate, oracle);
    auto errors = ate_error(estimate, effects);

    nlohmann::json invocation{{"estimator", estimator}, {"ts", view.ts},      {"seed", seed},
                              {"hide_z", hide_z},       {"with_diagnosis", with_diagnosis},
                              {"hidden", hidden},       {"epochs", epochs},  {"lr", lr}};
    auto config_hash = hash_hex(invocation.dump());

    CsvTable table;
    table.columns = {"estimator", "action", "pehe", "ate_error", "n", "config_hash"};
    double macro_ate = 0.0;
    std::size_t scored = 0;
    for (std::size_t a = 1; a < estimate.n_actions; ++a) {
        if (!score.scored[a]) continue;
        macro_ate += errors[a];
        ++scored;
        table.rows.push_back({estimator, std::to_string(a), format_double(score.per_action[a]),
                              format_double(errors[a]), std::to_string(estimate.unit_ids.size()),
                              config_hash});
    }
    table.rows.push_back({estimator, "macro", format_double(score.macro),
                          format_double(scored > 0 ? macro_ate / scored : 0.0),
                          std::to_string(estimate.unit_ids.size()), config_hash});
    write_csv(out_path, table);

    auto skipped = estimate.skipped_arms();
    if (!skipped.empty()) {
        std::cerr << "warning: skipped arms:";
        for (auto a : skipped) std::cerr << " " << a;
        std::cerr << "\n";
    }
    std::cout << "macro PEHE " << format_double(score.macro) << " -> " << out_path << "\n";
}

void cmd_sweep(const std::string& spec_path, const std::string& out_dir) {
    auto j = load_json(spec_path);
    std::string bank_path = j.at("bank").get<std::string>();
    std::string graph_path = j.at("graph").get<std::string>();
    auto spec = sweep_spec_from_json(j);
    auto graph = load_graph(graph_path);
    auto bank = load_bank(bank_path, graph);

    auto result = run_sweep(bank, graph, spec);
    std::filesystem::create_directories(out_dir);
    write_csv(out_dir + "/records.csv", records_table(result));
    write_csv(out_dir + "/summary.csv", summary_table(summarize(result)));
    std::size_t failed = 0;
    for (const auto& r : result.records) {
        if (!r.error.empty()) ++failed;
    }
    std::cout << "wrote " << result.records.size() << " records (" << failed << " error rows) to "
              << out_dir << "\n";
}

void cmd_report_effects(const std::string& effects_path, double gamma) {
    EffectSpec spec = effects_path.empty() ? default_effect_spec()
                                           : effect_spec_from_json(load_json(effects_path));
    if (gamma >= 1.0) spec.gamma = gamma;
    CsvTable table;
    table.columns = {"action", "treatment", "ate", "delta_z0", "delta_z1"};
    for (std::size_t a = 0; a < spec.n_actions(); ++a) {
        table.rows.push_back({std::to_string(a), spec.actions.names[a], format_double(spec.ate[a]),
                              format_double(delta(spec, a, 0)), format_double(delta(spec, a, 1))});
    }
    std::cout << to_csv_string(table);
}

void cmd_report_cohort(const std::string& data_path, const std::string& graph_path) {
    auto graph = load_graph(graph_path);
    auto rows = cohort_report(read_csv(data_path), graph);
    std::cout << to_csv_string(cohort_report_table(rows));
}

void cmd_report_fit(const std::string& in_path) {
    auto table = read_csv(in_path);
    auto col = [&](const char* name) { return table.column_index(name); };
    std::printf("%-14s %-16s %8s %8s %8s\n", "Classifiers", "stage", "Acc", "F1", "#Classes");
    for (const auto& row : table.rows) {
        if (row[col("kind")] != "classifier") continue;
        std::printf("%-14s %-16s %7.0f%% %8.2f %8s\n", row[col("target")].c_str(),
                    row[col("stage")].c_str(), 100.0 * *parse_double(row[col("accuracy")]),
                    *parse_double(row[col("macro_f1")]), row[col("classes")].c_str());
    }
    std::printf("%-14s %-16s %8s %8s %8s\n", "Regressions", "stage", "R2", "RMSE", "sigma_Y");
    for (const auto& row : table.rows) {
        if (row[col("kind")] != "regression") continue;
        std::printf("%-14s %-16s %8.2f %8.2f %8.2g\n", row[col("target")].c_str(),
                    row[col("stage")].c_str(), *parse_double(row[col("r2")]),
                    *parse_double(row[col("rmse")]), *parse_double(row[col("sigma_y")]));
    }
}

void cmd_report_sweep(const std::string& in_path) {
    auto result = records_from_table(read_csv(in_path));
    std::cout << to_csv_string(summary_table(summarize(result)));
}

void cmd_make_reference(const std::string& out_dir, std::size_t cohort_n, int cohort_horizon,
                        std::uint64_t seed) {
    std::filesystem::create_directories(out_dir);
    auto graph = default_graph();
    save_graph(out_dir + "/default_graph.json", graph);
    auto bank = make_reference_bank(graph);
    save_bank(out_dir + "/reference_bank.json", bank);

    SimConfig config;
    config.n_patients = cohort_n;
    config.horizon = cohort_horizon;
    config.gamma = 1.0;
    config.epsilon = 1.0;
    config.policy = PolicyKind::random;
    config.seed = seed;
    auto dataset = sample_dataset(bank, graph, make_run(config));
    write_csv(out_dir + "/reference_cohort.csv", cohort_table(dataset, graph, /*include_z=*/false));

    nlohmann::json sweep{{"bank", out_dir + "/reference_bank.json"},
                         {"graph", out_dir + "/default_graph.json"},
                         {"base", {{"n", 5000}, {"T", 5}, {"gamma", 2.0}, {"epsilon", 0.5},
                                   {"policy", "covariate"}}},
                         {"knob", "N"},
                         {"grid", {200, 1000, 5000, 20000}},
                         {"estimators", {"s", "t"}},
                         {"seeds", {1, 2, 3, 4, 5, 6, 7, 8, 9, 10}}};
    write_file(out_dir + "/sweep_example.json", sweep.dump(2) + "\n");
    std::cout << "wrote default_graph.json, reference_bank.json, reference_cohort.csv, "
                 "sweep_example.json to "
              << out_dir << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"adsim: longitudinal Alzheimer's cohort simulator and causal-effect benchmark"};
    app.require_subcommand(1);
    std::function<int()> action;

    // graph check
    auto* graph_cmd = app.add_subcommand("graph", "graph configuration utilities");
    graph_cmd->require_subcommand(1);
    {
        static std::string path;
        auto* check = graph_cmd->add_subcommand("check", "validate a graph configuration file");
        check->add_option("file", path, "graph JSON file")->required();
        check->callback([&] { action = [] { return cmd_graph_check(path); }; });
    }

    // cohort prepare
    auto* cohort_cmd = app.add_subcommand("cohort", "cohort ingestion and preparation");
    cohort_cmd->require_subcommand(1);
    {
        static std::string csv, graph_path, out_csv = "labeled_cohort.csv", out_gmm = "gmm.json";
        static std::uint64_t seed = 0;
        auto* prepare = cohort_cmd->add_subcommand(
            "prepare", "ingest a raw cohort CSV, infer subtypes, impute missing cells");
        prepare->add_option("csv", csv, "raw cohort CSV")->required();
        prepare->add_option("--graph", graph_path, "graph JSON")->required();
        prepare->add_option("--seed", seed, "subtype inference seed");
        prepare->add_option("--out", out_csv, "labeled cohort output CSV");
        prepare->add_option("--gmm-out", out_gmm, "fitted mixture parameters JSON");
        prepare->callback([&] {
            action = [] {
                cmd_cohort_prepare(csv, graph_path, seed, out_csv, out_gmm);
                return 0;
            };
        });
    }

    // fit
    {
        static std::string cohort_path, graph_path, out_path = "bank.json", report_path, gmm_path;
        static double holdout = 0.2;
        static std::uint64_t seed = 0;
        auto* fit = app.add_subcommand("fit", "fit the conditional model bank from a labeled cohort");
        fit->add_option("--cohort", cohort_path, "labeled cohort CSV")->required();
        fit->add_option("--graph", graph_path, "graph JSON")->required();
        fit->add_option("--out", out_path, "bank output JSON");
        fit->add_option("--holdout", holdout, "patient-level holdout fraction [0, 0.5]");
        fit->add_option("--seed", seed, "split seed");
        fit->add_option("--report", report_path, "fit-quality report CSV");
        fit->add_option("--gmm", gmm_path, "subtype mixture JSON (default: refit from abeta_ratio)");
        fit->callback([&] {
            action = [] {
                cmd_fit(cohort_path, graph_path, out_path, holdout, seed, report_path, gmm_path);
                return 0;
            };
        });
    }

    // simulate
    {
        static std::string bank_path, graph_path, out_dir = "sim_out", policy = "covariate",
                           effects_path;
        static std::size_t n = 1000;
        static int horizon = 5;
        static double gamma = 1.0, epsilon = 0.5;
        static std::uint64_t seed = 0;
        static bool clamp = false, emit_cohort = false;
        auto* sim = app.add_subcommand("simulate", "sample trajectories with counterfactual outcomes");
        sim->add_option("--bank", bank_path, "model bank JSON")->required();
        sim->add_option("--graph", graph_path, "graph JSON")->required();
        sim->add_option("-N,--n", n, "number of patients");
        sim->add_option("-T,--horizon", horizon, "number of 12-month steps");
        sim->add_option("--gamma", gamma, "effect heterogeneity (>= 1)");
        sim->add_option("--epsilon", epsilon, "overlap strength [0, 1]");
        sim->add_option("--policy", policy, "behavior policy: random | covariate");
        sim->add_option("--seed", seed, "simulation seed");
        sim->add_option("--out", out_dir, "output directory");
        sim->add_flag("--clamp-adas", clamp, "clamp reported outcomes to [0, 85]");
        sim->add_option("--effects", effects_path, "effect/policy configuration JSON");
        sim->add_flag("--emit-cohort", emit_cohort, "also write cohort.csv (labeled schema)");
        sim->callback([&] {
            action = [] {
                cmd_simulate(bank_path, graph_path, n, horizon, gamma, epsilon, policy, seed,
                             out_dir, clamp, effects_path, emit_cohort);
                return 0;
            };
        });
    }

    // estimate
    {
        static std::string train, oracle, estimator = "t", out_path = "scores.csv", effects_path;
        static std::size_t ts = SIZE_MAX;
        static std::uint64_t seed = 0;
        static bool hide_z = false, with_diagnosis = false;
        static int hidden = 16, epochs = 500;
        static double lr = 0.01;
        auto* est = app.add_subcommand("estimate", "train an estimator and score it against oracle");
        est->add_option("--train", train, "observational CSV")->required();
        est->add_option("--oracle", oracle, "oracle CSV")->required();
        est->add_option("--estimator", estimator, "s | t | seq_t");
        est->add_option("--ts", ts, "evaluation step (default: last)");
        est->add_option("--seed", seed, "estimator seed (seq_t initialization)");
        est->add_option("--out", out_path, "scores output CSV");
        est->add_flag("--hide-z", hide_z, "exclude the subtype from features");
        est->add_flag("--with-diagnosis", with_diagnosis, "include the diagnosis as a feature");
        est->add_option("--effects", effects_path, "effect configuration JSON (for ATE targets)");
        est->add_option("--hidden", hidden, "recurrent hidden width");
        est->add_option("--epochs", epochs, "recurrent training epochs");
        est->add_option("--lr", lr, "recurrent learning rate");
        est->callback([&] {
            action = [] {
                cmd_estimate(train, oracle, estimator, ts, seed, out_path, hide_z, with_diagnosis,
                             effects_path, hidden, epochs, lr);
                return 0;
            };
        });
    }

    // sweep
    {
        static std::string spec_path, out_dir = "results";
        auto* sweep = app.add_subcommand("sweep", "run a knob sweep across estimators and seeds");
        sweep->add_option("--spec", spec_path, "sweep specification JSON")->required();
        sweep->add_option("--out", out_dir, "output directory");
        sweep->callback([&] {
            action = [] {
                cmd_sweep(spec_path, out_dir);
                return 0;
            };
        });
    }

    // report
    auto* report = app.add_subcommand("report", "formatted reports");
    report->require_subcommand(1);
    {
        static std::string effects_path;
        static double gamma = 0.0;
        auto* effects = report->add_subcommand("effects", "print the treatment effect table");
        effects->add_option("--effects", effects_path, "effect configuration JSON");
        effects->add_option("--gamma", gamma, "evaluate subtype effects at this gamma");
        effects->callback([&] {
            action = [] {
                cmd_report_effects(effects_path, gamma);
                return 0;
            };
        });
    }
    {
        static std::string data_path, graph_path;
        auto* cohort_report_cmd = report->add_subcommand("cohort", "first-visit cohort statistics");
        cohort_report_cmd->add_option("--data", data_path, "cohort CSV")->required();
        cohort_report_cmd->add_option("--graph", graph_path, "graph JSON")->required();
        cohort_report_cmd->callback([&] {
            action = [] {
                cmd_report_cohort(data_path, graph_path);
                return 0;
            };
        });
    }
    {
        static std::string in_path;
        auto* fit_report_cmd = report->add_subcommand("fit", "format a fit-quality report");
        fit_report_cmd->add_option("--in", in_path, "report CSV from `fit --report`")->required();
        fit_report_cmd->callback([&] {
            action = [] {
                cmd_report_fit(in_path);
                return 0;
            };
        });
    }
    {
        static std::string in_path;
        auto* sweep_report_cmd = report->add_subcommand("sweep", "summarize sweep records");
        sweep_report_cmd->add_option("--in", in_path, "records.csv from `sweep`")->required();
        sweep_report_cmd->callback([&] {
            action = [] {
                cmd_report_sweep(in_path);
                return 0;
            };
        });
    }

    // make-reference
    {
        static std::string out_dir = "data";
        static std::size_t cohort_n = 870;
        static int cohort_horizon = 5;
        static std::uint64_t seed = 424242;
        auto* make_ref = app.add_subcommand(
            "make-reference", "regenerate the shipped graph, bank, and synthetic cohort");
        make_ref->add_option("--out", out_dir, "output directory");
        make_ref->add_option("--cohort-n", cohort_n, "reference cohort size");
        make_ref->add_option("--cohort-horizon", cohort_horizon, "reference cohort visits");
        make_ref->add_option("--seed", seed, "generation seed");
        make_ref->callback([&] {
            action = [] {
                cmd_make_reference(out_dir, cohort_n, cohort_horizon, seed);
                return 0;
            };
        });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        return action();
    } catch (const adsim::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 3;
    }
}
