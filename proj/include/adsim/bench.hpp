#pragma once

#include <chrono>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "adsim/csv.hpp"
#include "adsim/errors.hpp"
#include "adsim/estimators.hpp"
#include "adsim/model_bank.hpp"
#include "adsim/parallel.hpp"
#include "adsim/reference.hpp"
#include "adsim/simulate.hpp"

namespace adsim {

enum class Knob { n_patients, gamma, epsilon, policy, horizon };

inline std::string to_string(Knob knob) {
    switch (knob) {
        case Knob::n_patients: return "N";
        case Knob::gamma: return "gamma";
        case Knob::epsilon: return "epsilon";
        case Knob::policy: return "policy";
        case Knob::horizon: return "T";
    }
    return "N";
}

inline Knob knob_from_string(const std::string& s) {
    if (s == "N") return Knob::n_patients;
    if (s == "gamma") return Knob::gamma;
    if (s == "epsilon") return Knob::epsilon;
    if (s == "policy") return Knob::policy;
    if (s == "T") return Knob::horizon;
    throw ConfigError("InvalidSweep", "unknown knob '" + s + "'");
}

struct SweepSpec {
    SimConfig base;
    Knob knob = Knob::n_patients;
    std::vector<std::string> grid;          // values as strings, typed per knob
    std::vector<std::string> estimators;    // "s", "t", "seq_t"
    std::vector<std::uint64_t> seeds;
    std::size_t ts = SIZE_MAX;              // default: last step
    FeatureViewOptions view_options;
    RecurrentRegressor::Options rnn_options;
    nlohmann::json effects_override;

    void check() const {
        if (grid.empty()) throw ConfigError("InvalidSweep", "empty grid");
        if (estimators.empty()) throw ConfigError("InvalidSweep", "no estimators");
        if (seeds.empty()) throw ConfigError("InvalidSweep", "no seeds");
        std::set<std::uint64_t> distinct(seeds.begin(), seeds.end());
        if (distinct.size() != seeds.size()) throw ConfigError("InvalidSweep", "duplicate seeds");
        for (const auto& e : estimators) {
            if (e != "s" && e != "t" && e != "seq_t") {
                throw ConfigError("InvalidSweep", "unknown estimator '" + e + "'");
            }
        }
    }
};

inline SimConfig apply_knob(SimConfig config, Knob knob, const std::string& value) {
    switch (knob) {
        case Knob::n_patients: {
            auto v = parse_int(value);
            if (!v || *v < 1) throw ConfigError("InvalidSweep", "bad N value '" + value + "'");
            config.n_patients = static_cast<std::size_t>(*v);
            break;
        }
        case Knob::gamma: {
            auto v = parse_double(value);
            if (!v) throw ConfigError("InvalidSweep", "bad gamma value '" + value + "'");
            config.gamma = *v;
            break;
        }
        case Knob::epsilon: {
            auto v = parse_double(value);
            if (!v) throw ConfigError("InvalidSweep", "bad epsilon value '" + value + "'");
            config.epsilon = *v;
            break;
        }
        case Knob::policy:
            config.policy = policy_kind_from_string(value);
            break;
        case Knob::horizon: {
            auto v = parse_int(value);
            if (!v || *v < 1) throw ConfigError("InvalidSweep", "bad T value '" + value + "'");
            config.horizon = static_cast<int>(*v);
            break;
        }
    }
    return config;
}

// One long-format benchmark record. Error rows carry the failure message and
// NaN metrics; wall_ms is the only nondeterministic field.
struct BenchRecord {
    std::string knob;
    std::string knob_value;
    std::string estimator;
    std::uint64_t seed = 0;
    std::string action;  // "1".."k-1" or "macro"
    double pehe = std::numeric_limits<double>::quiet_NaN();
    double ate_err = std::numeric_limits<double>::quiet_NaN();
    std::size_t n_units = 0;
    double wall_ms = 0.0;
    std::string config_hash;
    std::string error;
};

struct BenchResult {
    std::vector<BenchRecord> records;
};

inline CateEstimate run_estimator(const std::string& name, const FeatureView& view,
                                  std::size_t n_actions, const SweepSpec& spec, std::uint64_t seed) {
    if (name == "s") return s_learner(view, n_actions);
    if (name == "t") return t_learner(view, n_actions);
    RecurrentRegressor::Options options = spec.rnn_options;
    options.seed = seed;
    return seq_t_learner(view, options, n_actions);
}

// Simulate -> train on the observational view -> score against the oracle,
// for every (grid value x seed x estimator). Cells run concurrently under
// the worker budget; records come back in canonical (grid, seed, estimator,
// action) order regardless of scheduling, and a failing cell contributes an
// error row instead of aborting the sweep.
inline BenchResult run_sweep(const ModelBank& bank, const CausalGraph& graph, const SweepSpec& spec) {
    spec.check();
    struct Cell {
        std::size_t grid_index;
        std::size_t seed_index;
    };
    std::vector<Cell> cells;
    for (std::size_t g = 0; g < spec.grid.size(); ++g) {
        for (std::size_t s = 0; s < spec.seeds.size(); ++s) cells.push_back({g, s});
    }
    std::vector<std::vector<BenchRecord>> per_cell(cells.size());

    parallel_for(cells.size(), [&](std::size_t c) {
        const auto& cell = cells[c];
        const auto& value = spec.grid[cell.grid_index];
        auto& records = per_cell[c];

        auto emit_error = [&](const std::string& estimator, const std::string& message) {
            BenchRecord record;
            record.knob = to_string(spec.knob);
            record.knob_value = value;
            record.estimator = estimator;
            record.seed = spec.seeds[cell.seed_index];
            record.action = "macro";
            record.error = message;
            records.push_back(record);
        };

        SimConfig config;
        Dataset dataset;
        CsvTable observational, oracle_table;
        try {
            config = apply_knob(spec.base, spec.knob, value);
            config.seed = spec.seeds[cell.seed_index];
            auto run = make_run(config, spec.effects_override);
            dataset = sample_dataset(bank, graph, run);
            observational = export_table(dataset, graph, ExportMode::observational);
            oracle_table = export_table(dataset, graph, ExportMode::oracle);
        } catch (const std::exception& e) {
            for (const auto& estimator : spec.estimators) emit_error(estimator, e.what());
            return;
        }

        FeatureViewOptions view_options = spec.view_options;
        view_options.ts = spec.ts == SIZE_MAX ? static_cast<std::size_t>(config.horizon) - 1 : spec.ts;
        const std::size_t k = dataset.run.effects.n_actions();

        for (const auto& estimator : spec.estimators) {
            auto start = std::chrono::steady_clock::now();
            try {
                auto view = build_feature_view(observational, view_options);
                auto estimate = run_estimator(estimator, view, k, spec, config.seed);
                auto oracle = oracle_units_at(oracle_table, view_options.ts);
                auto score = pehe(estimate, oracle);
                auto errors = ate_error(estimate, dataset.run.effects);
                double wall_ms = std::chrono::duration<double, std::milli>(
                                     std::chrono::steady_clock::now() - start)
                                     .count();

                double macro_ate = 0.0;
                std::size_t scored = 0;
                for (std::size_t a = 1; a < k; ++a) {
                    if (!score.scored[a]) continue;
                    macro_ate += errors[a];
                    ++scored;
                    BenchRecord record;
                    record.knob = to_string(spec.knob);
                    record.knob_value = value;
                    record.estimator = estimator;
                    record.seed = config.seed;
                    record.action = std::to_string(a);
                    record.pehe = score.per_action[a];
                    record.ate_err = errors[a];
                    record.n_units = estimate.unit_ids.size();
                    record.wall_ms = wall_ms;
                    record.config_hash = dataset.config_hash_value;
                    records.push_back(record);
                }
                BenchRecord macro;
                macro.knob = to_string(spec.knob);
                macro.knob_value = value;
                macro.estimator = estimator;
                macro.seed = config.seed;
                macro.action = "macro";
                macro.pehe = score.macro;
                macro.ate_err = scored > 0 ? macro_ate / static_cast<double>(scored) : 0.0;
                macro.n_units = estimate.unit_ids.size();
                macro.wall_ms = wall_ms;
                macro.config_hash = dataset.config_hash_value;
                records.push_back(macro);
            } catch (const std::exception& e) {
                emit_error(estimator, e.what());
            }
        }
    });

    BenchResult result;
    for (auto& records : per_cell) {
        for (auto& record : records) result.records.push_back(std::move(record));
    }
    return result;
}

struct SummaryRow {
    std::string knob;
    std::string knob_value;
    std::string estimator;
    std::size_t n_seeds = 0;
    std::size_t n_failed = 0;
    double pehe_median = 0.0, pehe_q1 = 0.0, pehe_q3 = 0.0;
    double ate_median = 0.0, ate_q1 = 0.0, ate_q3 = 0.0;

    double pehe_iqr() const { return pehe_q3 - pehe_q1; }
    double ate_iqr() const { return ate_q3 - ate_q1; }
};

namespace detail {

inline double quantile(std::vector<double> values, double q) {
    std::sort(values.begin(), values.end());
    if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
    double position = q * static_cast<double>(values.size() - 1);
    auto lower = static_cast<std::size_t>(position);
    double fraction = position - static_cast<double>(lower);
    if (lower + 1 >= values.size()) return values.back();
    return values[lower] * (1.0 - fraction) + values[lower + 1] * fraction;
}

}  // namespace detail

// Median and IQR of the macro PEHE / macro ATE error per (knob value,
// estimator). Failed cells are counted but excluded from the quantiles.
inline std::vector<SummaryRow> summarize(const BenchResult& result) {
    if (result.records.empty()) throw EmptyInput("no records to summarize");
    std::vector<std::pair<std::string, std::string>> order;
    std::map<std::pair<std::string, std::string>, std::vector<const BenchRecord*>> groups;
    for (const auto& record : result.records) {
        if (record.action != "macro") continue;
        auto key = std::make_pair(record.knob_value, record.estimator);
        if (!groups.count(key)) order.push_back(key);
        groups[key].push_back(&record);
    }
    std::vector<SummaryRow> rows;
    for (const auto& key : order) {
        SummaryRow row;
        row.knob = result.records.front().knob;
        row.knob_value = key.first;
        row.estimator = key.second;
        std::vector<double> pehe_values, ate_values;
        for (const auto* record : groups[key]) {
            ++row.n_seeds;
            if (!record->error.empty()) {
                ++row.n_failed;
                continue;
            }
            pehe_values.push_back(record->pehe);
            ate_values.push_back(record->ate_err);
        }
        row.pehe_median = detail::quantile(pehe_values, 0.5);
        row.pehe_q1 = detail::quantile(pehe_values, 0.25);
        row.pehe_q3 = detail::quantile(pehe_values, 0.75);
        row.ate_median = detail::quantile(ate_values, 0.5);
        row.ate_q1 = detail::quantile(ate_values, 0.25);
        row.ate_q3 = detail::quantile(ate_values, 0.75);
        rows.push_back(row);
    }
    return rows;
}

// --- CSV/JSON formats --------------------------------------------------------

inline CsvTable records_table(const BenchResult& result) {
    CsvTable table;
    table.columns = {"knob", "value", "estimator", "seed",   "action",      "pehe",
                     "ate_error", "n", "wall_ms",  "config_hash", "error"};
    for (const auto& r : result.records) {
        table.rows.push_back({r.knob, r.knob_value, r.estimator, std::to_string(r.seed), r.action,
                              std::isnan(r.pehe) ? "" : format_double(r.pehe),
                              std::isnan(r.ate_err) ? "" : format_double(r.ate_err),
                              std::to_string(r.n_units), format_double(r.wall_ms), r.config_hash,
                              r.error});
    }
    return table;
}

inline BenchResult records_from_table(const CsvTable& table) {
    BenchResult result;
    for (const auto& row : table.rows) {
        BenchRecord r;
        r.knob = row[table.column_index("knob")];
        r.knob_value = row[table.column_index("value")];
        r.estimator = row[table.column_index("estimator")];
        r.seed = static_cast<std::uint64_t>(*parse_int(row[table.column_index("seed")]));
        r.action = row[table.column_index("action")];
        const auto& pehe_s = row[table.column_index("pehe")];
        if (!pehe_s.empty()) r.pehe = *parse_double(pehe_s);
        const auto& ate_s = row[table.column_index("ate_error")];
        if (!ate_s.empty()) r.ate_err = *parse_double(ate_s);
        r.n_units = static_cast<std::size_t>(*parse_int(row[table.column_index("n")]));
        r.wall_ms = *parse_double(row[table.column_index("wall_ms")]);
        r.config_hash = row[table.column_index("config_hash")];
        r.error = row[table.column_index("error")];
        result.records.push_back(std::move(r));
    }
    return result;
}

inline CsvTable summary_table(const std::vector<SummaryRow>& rows) {
    CsvTable table;
    table.columns = {"knob",        "value",   "estimator", "n_seeds",  "n_failed",
                     "pehe_median", "pehe_q1", "pehe_q3",   "pehe_iqr", "ate_median",
                     "ate_q1",      "ate_q3",  "ate_iqr"};
    for (const auto& r : rows) {
        table.rows.push_back({r.knob, r.knob_value, r.estimator, std::to_string(r.n_seeds),
                              std::to_string(r.n_failed), format_double(r.pehe_median),
                              format_double(r.pehe_q1), format_double(r.pehe_q3),
                              format_double(r.pehe_iqr()), format_double(r.ate_median),
                              format_double(r.ate_q1), format_double(r.ate_q3),
                              format_double(r.ate_iqr())});
    }
    return table;
}

inline SweepSpec sweep_spec_from_json(const nlohmann::json& j) {
    SweepSpec spec;
    try {
        const auto& base = j.at("base");
        spec.base.n_patients = base.value("n", std::size_t{5000});
        spec.base.horizon = base.value("T", 5);
        spec.base.gamma = base.value("gamma", 2.0);
        spec.base.epsilon = base.value("epsilon", 0.5);
        spec.base.policy = policy_kind_from_string(base.value("policy", std::string("covariate")));
        spec.base.clamp_adas = base.value("clamp_adas", false);
        spec.knob = knob_from_string(j.at("knob").get<std::string>());
        for (const auto& value : j.at("grid")) {
            if (value.is_string()) {
                spec.grid.push_back(value.get<std::string>());
            } else if (value.is_number_integer()) {
                spec.grid.push_back(std::to_string(value.get<long long>()));
            } else {
                spec.grid.push_back(format_double(value.get<double>()));
            }
        }
        spec.estimators = j.at("estimators").get<std::vector<std::string>>();
        spec.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
        if (j.contains("ts")) spec.ts = j["ts"].get<std::size_t>();
        if (j.contains("hide_z")) spec.view_options.hide_z = j["hide_z"].get<bool>();
        if (j.contains("with_diagnosis")) {
            spec.view_options.include_diagnosis = j["with_diagnosis"].get<bool>();
        }
        if (j.contains("rnn")) {
            spec.rnn_options.hidden = j["rnn"].value("hidden", 16);
            spec.rnn_options.epochs = j["rnn"].value("epochs", 500);
            spec.rnn_options.learning_rate = j["rnn"].value("lr", 0.01);
        }
        if (j.contains("effects")) spec.effects_override = j["effects"];
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("InvalidSweep", std::string("malformed sweep spec: ") + e.what());
    }
    spec.check();
    return spec;
}

// --- cohort statistics (first-visit slice) -----------------------------------

struct CohortStatRow {
    std::string variable;
    std::string level;  // empty for continuous rows
    std::size_t count = 0;
    double frequency = 0.0;  // percent
    double mean = 0.0, sd = 0.0;
    bool continuous = false;
};

// Count (frequency) per level for categorical variables and mean (sd) for
// continuous ones over the first visit of each patient, from a cohort-schema
// table. Numeric-parent categoricals (Education) are summarized as numbers.
// A z column, when present, contributes a subtype prevalence row.
inline std::vector<CohortStatRow> cohort_report(const CsvTable& table, const CausalGraph& graph) {
    if (table.rows.empty()) throw EmptyInput("no rows");
    const auto id_col = table.column_index("patient_id");
    const auto visit_col = table.column_index("visit");

    // First visit per patient = smallest visit value.
    std::map<std::string, std::pair<long long, std::size_t>> first_rows;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        auto visit = parse_int(table.rows[r][visit_col]);
        if (!visit) throw CellTypeError("bad visit '" + table.rows[r][visit_col] + "'");
        const auto& id = table.rows[r][id_col];
        auto it = first_rows.find(id);
        if (it == first_rows.end() || *visit < it->second.first) {
            first_rows[id] = {*visit, r};
        }
    }

    std::vector<CohortStatRow> rows;
    const double n = static_cast<double>(first_rows.size());
    for (const auto& v : graph.variables) {
        if (v.role == Role::latent || !table.has_column(v.name)) continue;
        const auto col = table.column_index(v.name);
        if (v.is_categorical() && !v.numeric_parent) {
            std::map<std::string, std::size_t> counts;
            for (const auto& level : v.levels) counts[level] = 0;
            for (const auto& [id, loc] : first_rows) {
                const auto& value = table.rows[loc.second][col];
                if (!value.empty()) ++counts[value];
            }
            for (const auto& level : v.levels) {
                CohortStatRow row;
                row.variable = v.name;
                row.level = level;
                row.count = counts[level];
                row.frequency = 100.0 * static_cast<double>(counts[level]) / n;
                rows.push_back(row);
            }
        } else {
            double sum = 0.0, sumsq = 0.0;
            std::size_t m = 0;
            for (const auto& [id, loc] : first_rows) {
                const auto& value = table.rows[loc.second][col];
                if (value.empty()) continue;
                auto parsed = parse_double(value);
                if (!parsed) throw CellTypeError("bad value '" + value + "' for " + v.name);
                sum += *parsed;
                sumsq += *parsed * *parsed;
                ++m;
            }
            CohortStatRow row;
            row.variable = v.name;
            row.continuous = true;
            row.count = m;
            if (m > 0) {
                row.mean = sum / static_cast<double>(m);
                row.sd = std::sqrt(std::max(0.0, sumsq / static_cast<double>(m) - row.mean * row.mean));
            }
            rows.push_back(row);
        }
    }
    if (table.has_column("z")) {
        const auto z_col = table.column_index("z");
        std::size_t positives = 0;
        for (const auto& [id, loc] : first_rows) {
            if (table.rows[loc.second][z_col] == "1") ++positives;
        }
        CohortStatRow row;
        row.variable = "Subtype";
        row.level = "1";
        row.count = positives;
        row.frequency = 100.0 * static_cast<double>(positives) / n;
        rows.push_back(row);
    }
    return rows;
}

inline CsvTable cohort_report_table(const std::vector<CohortStatRow>& rows) {
    CsvTable table;
    table.columns = {"variable", "level", "count", "frequency_pct", "mean", "sd"};
    for (const auto& r : rows) {
        table.rows.push_back({r.variable, r.level, std::to_string(r.count),
                              r.continuous ? "" : format_double(r.frequency),
                              r.continuous ? format_double(r.mean) : "",
                              r.continuous ? format_double(r.sd) : ""});
    }
    return table;
}

}  // namespace adsim
