#pragma once

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "adsim/csv.hpp"
#include "adsim/effects.hpp"
#include "adsim/errors.hpp"
#include "adsim/graph.hpp"
#include "adsim/model_bank.hpp"
#include "adsim/parallel.hpp"
#include "adsim/rng.hpp"

namespace adsim {

struct SimConfig {
    std::size_t n_patients = 1000;
    int horizon = 5;
    double gamma = 1.0;
    double epsilon = 0.5;
    PolicyKind policy = PolicyKind::covariate;
    std::uint64_t seed = 0;
    bool clamp_adas = false;

    void check() const {
        if (n_patients < 1) throw ConfigError("InvalidConfig", "n_patients must be >= 1");
        if (horizon < 1) throw ConfigError("InvalidConfig", "horizon must be >= 1");
        if (!(gamma >= 1.0)) throw ConfigError("InvalidConfig", "gamma must be >= 1");
        if (!(epsilon >= 0.0 && epsilon <= 1.0)) {
            throw ConfigError("InvalidConfig", "epsilon must lie in [0,1]");
        }
    }
};

inline std::string to_string(PolicyKind kind) {
    return kind == PolicyKind::random ? "random" : "covariate";
}

inline PolicyKind policy_kind_from_string(const std::string& s) {
    if (s == "random") return PolicyKind::random;
    if (s == "covariate") return PolicyKind::covariate;
    throw ConfigError("InvalidConfig", "unknown policy '" + s + "'");
}

// A fully resolved simulation: config plus the effect/policy machinery.
struct SimRun {
    SimConfig config;
    EffectSpec effects;
    PolicySpec policy;
};

// Resolves a run from the scalar knobs plus an optional configuration JSON.
// The JSON may override the effect machinery (actions, ate, hilo, z_prior)
// and, under "policy", the action grouping: "classes" as three arrays of
// action indices and "diagnosis_map" as one class index per diagnosis level
// in declared level order.
inline SimRun make_run(const SimConfig& config, const nlohmann::json& effects_override = {}) {
    config.check();
    SimRun run;
    run.config = config;
    run.effects = effects_override.is_null() || effects_override.empty()
                      ? default_effect_spec()
                      : effect_spec_from_json(effects_override);
    run.effects.gamma = config.gamma;
    run.effects.check();
    run.policy = default_policy_spec(config.policy, config.epsilon, run.effects.ate);
    if (effects_override.is_object() && effects_override.contains("policy")) {
        const auto& jp = effects_override["policy"];
        try {
            if (jp.contains("classes")) {
                run.policy.action_classes = jp["classes"].get<std::vector<std::vector<std::size_t>>>();
            }
            if (jp.contains("diagnosis_map")) {
                run.policy.diagnosis_class_map = jp["diagnosis_map"].get<std::vector<std::size_t>>();
            }
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("InvalidPolicy", std::string("malformed policy section: ") + e.what());
        }
    }
    return run;
}

inline nlohmann::json run_config_json(const SimRun& run) {
    return nlohmann::json{{"n_patients", run.config.n_patients},
                          {"horizon", run.config.horizon},
                          {"gamma", run.config.gamma},
                          {"epsilon", run.config.epsilon},
                          {"policy", to_string(run.config.policy)},
                          {"seed", run.config.seed},
                          {"clamp_adas", run.config.clamp_adas},
                          {"effects", effect_spec_to_json(run.effects)},
                          {"action_classes", run.policy.action_classes},
                          {"diagnosis_class_map", run.policy.diagnosis_class_map}};
}

// One simulated patient: covariate values per step (modeling representation,
// latent slot included), diagnosis, action, the untreated outcome, and the
// full potential-outcome vector per step. The outcome noise is shared across
// actions within a step, so y[t][a] - y[t][0] is exactly delta(a, z).
struct Trajectory {
    std::string patient_id;
    int z = 0;
    double abeta = 0.0;
    std::vector<std::vector<double>> values;   // [t][var]
    std::vector<double> y0;                    // untreated ADAS13 per step
    std::vector<std::vector<double>> y;        // [t][action]
    std::vector<std::size_t> diagnosis;        // level index per step
    std::vector<std::size_t> action;           // per step
    std::vector<double> observed_y;            // y[t][action[t]]
    std::vector<double> outcome_noise;         // structural noise of y0 per step
};

struct Dataset {
    SimRun run;
    std::string graph_hash_value;
    std::string bank_hash_value;
    std::string config_hash_value;
    std::vector<Trajectory> trajectories;
};

inline Dataset sample_dataset(const ModelBank& bank, const CausalGraph& graph, const SimRun& run) {
    try {
        validate_bank(bank, graph);
    } catch (const Error& e) {
        throw BankGraphMismatch(e.what());
    }
    run.effects.check();

    const auto order = topological_order(graph);
    const std::size_t z_index = graph.index_of(graph.latent_name);
    std::size_t outcome_index = SIZE_MAX, diagnosis_index = SIZE_MAX;
    for (std::size_t v = 0; v < graph.variables.size(); ++v) {
        if (graph.variables[v].role == Role::outcome) outcome_index = v;
        if (graph.variables[v].role == Role::diagnosis) diagnosis_index = v;
    }
    const auto& diag_spec = graph.variables[diagnosis_index];
    run.policy.check(run.effects.n_actions(), diag_spec.levels.size());

    struct Step {
        std::size_t var_index;
        const ConditionalModel* baseline;
        const ConditionalModel* autoregressive;  // null for statics
        std::vector<std::size_t> parent_index_base;
        std::vector<std::size_t> parent_index_ar;
        std::vector<int> parent_offset_ar;
        bool is_latent, is_static, categorical;
    };
    std::vector<Step> steps;
    for (const auto& name : order) {
        Step step;
        step.var_index = graph.index_of(name);
        const auto& spec = graph.variables[step.var_index];
        step.is_latent = spec.role == Role::latent;
        step.is_static = spec.is_static();
        step.categorical = spec.is_categorical();
        step.baseline = step.is_latent ? nullptr : &bank.baseline_model(name);
        step.autoregressive =
            step.is_latent || step.is_static ? nullptr : &bank.autoregressive_model(name);
        if (step.baseline) {
            for (const auto& parent : step.baseline->parents) {
                step.parent_index_base.push_back(graph.index_of(parent.name));
            }
        }
        if (step.autoregressive) {
            for (const auto& parent : step.autoregressive->parents) {
                step.parent_index_ar.push_back(graph.index_of(parent.name));
                step.parent_offset_ar.push_back(parent.time_offset);
            }
        }
        steps.push_back(std::move(step));
    }

    Dataset dataset;
    dataset.run = run;
    dataset.graph_hash_value = graph_hash(graph);
    dataset.bank_hash_value = bank_hash(bank);
    dataset.config_hash_value = hash_hex(run_config_json(run).dump());
    dataset.trajectories.resize(run.config.n_patients);

    const std::size_t k = run.effects.n_actions();
    const int horizon = run.config.horizon;
    const std::size_t n_vars = graph.variables.size();

    parallel_for(run.config.n_patients, [&](std::size_t i) {
        auto rng = make_stream(run.config.seed, StreamPurpose::simulation, i);
        Trajectory traj;
        traj.patient_id = "P" + std::to_string(i);
        traj.z = rng.bernoulli(run.effects.z_prior) ? 1 : 0;
        traj.abeta = rng.normal(bank.gmm.means[static_cast<std::size_t>(traj.z)],
                                bank.gmm.sds[static_cast<std::size_t>(traj.z)]);

        traj.values.assign(static_cast<std::size_t>(horizon), std::vector<double>(n_vars, 0.0));
        traj.y0.resize(horizon);
        traj.y.assign(static_cast<std::size_t>(horizon), std::vector<double>(k, 0.0));
        traj.diagnosis.resize(horizon);
        traj.action.resize(horizon);
        traj.observed_y.resize(horizon);
        traj.outcome_noise.resize(horizon);

        std::vector<double> parent_values;
        for (int t = 0; t < horizon; ++t) {
            auto& row = traj.values[static_cast<std::size_t>(t)];
            for (const auto& step : steps) {
                if (step.is_latent) {
                    row[step.var_index] = static_cast<double>(traj.z);
                    continue;
                }
                if (t >= 1 && step.is_static) {
                    row[step.var_index] = traj.values[static_cast<std::size_t>(t - 1)][step.var_index];
                    continue;
                }
                const ConditionalModel* model = t == 0 ? step.baseline : step.autoregressive;
                parent_values.clear();
                if (t == 0) {
                    for (auto pi : step.parent_index_base) parent_values.push_back(row[pi]);
                } else {
                    for (std::size_t pj = 0; pj < step.parent_index_ar.size(); ++pj) {
                        const auto& source = step.parent_offset_ar[pj] == -1
                                                 ? traj.values[static_cast<std::size_t>(t - 1)]
                                                 : row;
                        parent_values.push_back(source[step.parent_index_ar[pj]]);
                    }
                }
                if (step.categorical) {
                    Eigen::VectorXd probs = model->class_probabilities(parent_values);
                    std::vector<double> pvec(probs.data(), probs.data() + probs.size());
                    row[step.var_index] = static_cast<double>(rng.categorical(pvec));
                } else {
                    double noise = model->linear.noise_sd * rng.normal();
                    row[step.var_index] = model->conditional_mean(parent_values) + noise;
                    if (step.var_index == outcome_index) {
                        traj.outcome_noise[static_cast<std::size_t>(t)] = noise;
                    }
                }
            }

            traj.y0[t] = row[outcome_index];
            traj.diagnosis[t] = static_cast<std::size_t>(row[diagnosis_index]);
            std::size_t policy_diagnosis =
                t == 0 ? traj.diagnosis[0] : traj.diagnosis[static_cast<std::size_t>(t - 1)];
            traj.action[t] = choose_action(run.policy, run.effects, policy_diagnosis, rng);
            for (std::size_t a = 0; a < k; ++a) {
                traj.y[t][a] = traj.y0[t] + delta(run.effects, a, traj.z);
            }
            traj.observed_y[t] = traj.y[t][traj.action[t]];
            if (traj.observed_y[t] != traj.y[t][traj.action[t]] || traj.y[t][0] != traj.y0[t]) {
                throw InternalError("Simulator", "consistency violation");
            }
        }
        dataset.trajectories[i] = std::move(traj);
    });

    return dataset;
}

// --- exports ------------------------------------------------------------

namespace detail {

inline std::string cell_to_string(const VariableSpec& spec, double value) {
    if (spec.is_categorical()) return spec.levels.at(static_cast<std::size_t>(value));
    return format_double(value);
}

inline std::vector<std::size_t> covariate_indices(const CausalGraph& graph) {
    std::vector<std::size_t> out;
    for (std::size_t v = 0; v < graph.variables.size(); ++v) {
        if (graph.variables[v].role == Role::covariate) out.push_back(v);
    }
    return out;
}

}  // namespace detail

enum class ExportMode { observational, oracle };

// Observational rows: patient_id, t, covariates, z, d, a, y — what an
// estimator may see. Oracle rows additionally carry every potential outcome
// and the per-action effects. With clamp_adas set, the observational y is
// clamped to the reporting scale [0, 85]; the oracle file keeps raw values
// so that scoring stays exact.
inline CsvTable export_table(const Dataset& dataset, const CausalGraph& graph, ExportMode mode) {
    const auto covariates = detail::covariate_indices(graph);
    const std::size_t k = dataset.run.effects.n_actions();
    std::size_t diagnosis_index = SIZE_MAX;
    for (std::size_t v = 0; v < graph.variables.size(); ++v) {
        if (graph.variables[v].role == Role::diagnosis) diagnosis_index = v;
    }
    if (diagnosis_index == SIZE_MAX) throw InternalError("Export", "no diagnosis variable");
    const auto& diag_spec = graph.variables[diagnosis_index];

    CsvTable table;
    table.columns = {"patient_id", "t"};
    for (auto v : covariates) table.columns.push_back(graph.variables[v].name);
    table.columns.push_back("z");
    table.columns.push_back("d");
    table.columns.push_back("a");
    table.columns.push_back("y");
    if (mode == ExportMode::oracle) {
        for (std::size_t a = 0; a < k; ++a) table.columns.push_back("y" + std::to_string(a));
        for (std::size_t a = 0; a < k; ++a) table.columns.push_back("delta" + std::to_string(a));
    }

    for (const auto& traj : dataset.trajectories) {
        for (std::size_t t = 0; t < traj.values.size(); ++t) {
            std::vector<std::string> row;
            row.reserve(table.columns.size());
            row.push_back(traj.patient_id);
            row.push_back(std::to_string(t));
            for (auto v : covariates) {
                row.push_back(detail::cell_to_string(graph.variables[v], traj.values[t][v]));
            }
            row.push_back(std::to_string(traj.z));
            row.push_back(diag_spec.levels.at(traj.diagnosis[t]));
            row.push_back(std::to_string(traj.action[t]));
            double y = traj.observed_y[t];
            if (mode == ExportMode::observational && dataset.run.config.clamp_adas) {
                y = std::min(85.0, std::max(0.0, y));
            }
            row.push_back(format_double(y));
            if (mode == ExportMode::oracle) {
                for (std::size_t a = 0; a < k; ++a) row.push_back(format_double(traj.y[t][a]));
                // The effect itself, not the float subtraction, so scoring
                // against ground truth is exact.
                for (std::size_t a = 0; a < k; ++a) {
                    row.push_back(format_double(delta(dataset.run.effects, a, traj.z)));
                }
            }
            table.rows.push_back(std::move(row));
        }
    }
    return table;
}

// Prepared-cohort export: the labeled-cohort schema consumed by `fit`, with
// the untreated outcome in the outcome column (the no-treatment action is
// what a treatment-free registry would record).
inline CsvTable cohort_table(const Dataset& dataset, const CausalGraph& graph, bool include_z) {
    CsvTable table;
    table.columns = {"patient_id", "visit", "abeta_ratio"};
    if (include_z) table.columns.push_back("z");
    for (const auto& v : graph.variables) {
        if (v.role != Role::latent) table.columns.push_back(v.name);
    }
    for (const auto& traj : dataset.trajectories) {
        for (std::size_t t = 0; t < traj.values.size(); ++t) {
            std::vector<std::string> row;
            row.push_back(traj.patient_id);
            row.push_back(std::to_string(t));
            row.push_back(format_double(traj.abeta));
            if (include_z) row.push_back(std::to_string(traj.z));
            for (std::size_t v = 0; v < graph.variables.size(); ++v) {
                if (graph.variables[v].role == Role::latent) continue;
                row.push_back(detail::cell_to_string(graph.variables[v], traj.values[t][v]));
            }
            table.rows.push_back(std::move(row));
        }
    }
    return table;
}

inline nlohmann::json provenance_json(const Dataset& dataset) {
    nlohmann::json j = run_config_json(dataset.run);
    j["graph_hash"] = dataset.graph_hash_value;
    j["bank_hash"] = dataset.bank_hash_value;
    j["config_hash"] = dataset.config_hash_value;
    return j;
}

inline void export_dataset(const Dataset& dataset, const CausalGraph& graph,
                           const std::string& directory) {
    std::filesystem::create_directories(directory);
    write_csv(directory + "/observational.csv",
              export_table(dataset, graph, ExportMode::observational));
    write_csv(directory + "/oracle.csv", export_table(dataset, graph, ExportMode::oracle));
    write_file(directory + "/provenance.json", provenance_json(dataset).dump(2) + "\n");
}

// Reconstructs trajectories from an oracle export (used for round-trip
// checks and by scoring code that wants typed access).
struct OracleUnits {
    std::vector<std::string> patient_ids;       // unit = patient at step ts
    std::vector<int> z;
    std::vector<std::vector<double>> delta;     // [unit][action]
    std::size_t n_actions = 0;
};

inline OracleUnits oracle_units_at(const CsvTable& table, std::size_t ts) {
    OracleUnits units;
    std::size_t k = 0;
    while (table.has_column("delta" + std::to_string(k))) ++k;
    if (k == 0) throw SchemaMismatch("no delta columns; not an oracle export");
    units.n_actions = k;
    const auto id_col = table.column_index("patient_id");
    const auto t_col = table.column_index("t");
    const auto z_col = table.column_index("z");
    std::vector<std::size_t> delta_cols;
    for (std::size_t a = 0; a < k; ++a) delta_cols.push_back(table.column_index("delta" + std::to_string(a)));
    for (const auto& row : table.rows) {
        auto t = parse_int(row[t_col]);
        if (!t || static_cast<std::size_t>(*t) != ts) continue;
        units.patient_ids.push_back(row[id_col]);
        auto z = parse_int(row[z_col]);
        if (!z) throw CellTypeError("bad z value '" + row[z_col] + "'");
        units.z.push_back(static_cast<int>(*z));
        std::vector<double> deltas(k);
        for (std::size_t a = 0; a < k; ++a) {
            auto v = parse_double(row[delta_cols[a]]);
            if (!v) throw CellTypeError("bad delta value");
            deltas[a] = *v;
        }
        units.delta.push_back(std::move(deltas));
    }
    if (units.patient_ids.empty()) {
        throw DataError("EmptyStep", "no oracle rows at t=" + std::to_string(ts));
    }
    return units;
}

}  // namespace adsim
