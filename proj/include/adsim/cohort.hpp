#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "adsim/csv.hpp"
#include "adsim/errors.hpp"
#include "adsim/gmm.hpp"
#include "adsim/graph.hpp"
#include "adsim/models.hpp"
#include "adsim/rng.hpp"

namespace adsim {

// Longitudinal cohort in modeling representation: one slot per declared
// variable per visit, with continuous values stored directly and
// categorical values stored as level indices. The latent variable's slot is
// missing until subtypes are attached.
struct PatientSeries {
    std::string id;
    std::vector<std::vector<double>> values;  // [t][var]
    std::vector<std::vector<bool>> missing;   // [t][var]
    std::vector<double> abeta;                // [t]
    std::vector<bool> abeta_missing;          // [t]

    std::size_t horizon() const { return values.size(); }
};

struct RawCohort {
    std::vector<PatientSeries> patients;

    std::size_t size() const { return patients.size(); }
    std::size_t total_rows() const {
        std::size_t n = 0;
        for (const auto& p : patients) n += p.horizon();
        return n;
    }
};

struct SubtypeResult {
    std::vector<int> labels;  // one per patient
    Gmm1D gmm;
};

struct LabeledCohort {
    RawCohort data;                                     // fully imputed
    std::vector<int> z;                                 // per patient
    std::vector<std::vector<std::vector<bool>>> imputed;  // [patient][t][var]
    Gmm1D gmm;
};

namespace detail {

inline double parse_cell(const VariableSpec& spec, const std::string& raw, std::size_t line,
                         std::vector<std::string>& problems) {
    if (spec.is_categorical()) {
        for (std::size_t l = 0; l < spec.levels.size(); ++l) {
            if (spec.levels[l] == raw) return static_cast<double>(l);
        }
        problems.push_back("line " + std::to_string(line) + ": '" + raw +
                           "' is not a declared level of " + spec.name);
        return 0.0;
    }
    auto v = parse_double(raw);
    if (!v || !std::isfinite(*v)) {
        problems.push_back("line " + std::to_string(line) + ": '" + raw +
                           "' is not a finite number for " + spec.name);
        return 0.0;
    }
    return *v;
}

}  // namespace detail

// Reads a raw cohort CSV: patient_id, visit, abeta_ratio, then one column
// per declared (non-latent) variable; empty fields are MISSING. If
// `expect_z` is set a z column is also required (prepared-cohort schema).
// Visits are normalized to 0..T-1 per patient by sort order.
inline RawCohort ingest_table(const CsvTable& table, const CausalGraph& graph,
                              bool expect_z = false, std::vector<int>* z_out = nullptr) {
    std::vector<std::string> expected{"patient_id", "visit", "abeta_ratio"};
    if (expect_z) expected.push_back("z");
    for (const auto& v : graph.variables) {
        if (v.role != Role::latent) expected.push_back(v.name);
    }

    std::vector<std::string> missing_cols, extra_cols;
    for (const auto& name : expected) {
        if (!table.has_column(name)) missing_cols.push_back(name);
    }
    for (const auto& name : table.columns) {
        if (std::find(expected.begin(), expected.end(), name) == expected.end()) {
            extra_cols.push_back(name);
        }
    }
    if (!missing_cols.empty() || !extra_cols.empty()) {
        std::string msg;
        if (!missing_cols.empty()) {
            msg += "missing columns:";
            for (const auto& c : missing_cols) msg += " " + c;
        }
        if (!extra_cols.empty()) {
            if (!msg.empty()) msg += "; ";
            msg += "unexpected columns:";
            for (const auto& c : extra_cols) msg += " " + c;
        }
        throw SchemaMismatch(msg);
    }

    const std::size_t id_col = table.column_index("patient_id");
    const std::size_t visit_col = table.column_index("visit");
    const std::size_t abeta_col = table.column_index("abeta_ratio");
    const std::size_t z_col = expect_z ? table.column_index("z") : 0;
    std::vector<std::size_t> var_cols(graph.variables.size(), SIZE_MAX);
    for (std::size_t v = 0; v < graph.variables.size(); ++v) {
        if (graph.variables[v].role != Role::latent) {
            var_cols[v] = table.column_index(graph.variables[v].name);
        }
    }

    struct ParsedRow {
        long long visit;
        std::size_t row;
    };
    std::vector<std::string> order;  // first-appearance patient order
    std::unordered_map<std::string, std::vector<ParsedRow>> by_patient;
    std::vector<std::string> problems;

    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const std::size_t line = r + 2;  // header is line 1
        if (row.size() != table.columns.size()) {
            problems.push_back("line " + std::to_string(line) + ": expected " +
                               std::to_string(table.columns.size()) + " fields, got " +
                               std::to_string(row.size()));
            continue;
        }
        const std::string& id = row[id_col];
        auto visit = parse_int(row[visit_col]);
        if (id.empty() || !visit) {
            problems.push_back("line " + std::to_string(line) + ": unparseable patient_id/visit");
            continue;
        }
        if (!by_patient.count(id)) order.push_back(id);
        by_patient[id].push_back({*visit, r});
    }

    RawCohort cohort;
    if (z_out) z_out->clear();
    const std::size_t n_vars = graph.variables.size();
    for (const auto& id : order) {
        auto& rows = by_patient[id];
        std::sort(rows.begin(), rows.end(),
                  [](const ParsedRow& a, const ParsedRow& b) { return a.visit < b.visit; });
        for (std::size_t i = 1; i < rows.size(); ++i) {
            if (rows[i].visit == rows[i - 1].visit) {
                problems.push_back("patient " + id + ": duplicate visit " +
                                   std::to_string(rows[i].visit));
            }
        }

        PatientSeries series;
        series.id = id;
        int z_value = -1;
        for (const auto& parsed : rows) {
            const auto& row = table.rows[parsed.row];
            const std::size_t line = parsed.row + 2;
            std::vector<double> values(n_vars, 0.0);
            std::vector<bool> missing(n_vars, true);
            for (std::size_t v = 0; v < n_vars; ++v) {
                if (var_cols[v] == SIZE_MAX) continue;  // latent
                const std::string& raw = row[var_cols[v]];
                if (raw.empty()) continue;  // MISSING
                values[v] = detail::parse_cell(graph.variables[v], raw, line, problems);
                missing[v] = false;
            }
            const std::string& abeta_raw = row[abeta_col];
            if (abeta_raw.empty()) {
                series.abeta.push_back(0.0);
                series.abeta_missing.push_back(true);
            } else {
                auto v = parse_double(abeta_raw);
                if (!v) {
                    problems.push_back("line " + std::to_string(line) +
                                       ": unparseable abeta_ratio '" + abeta_raw + "'");
                    series.abeta.push_back(0.0);
                    series.abeta_missing.push_back(true);
                } else {
                    series.abeta.push_back(*v);
                    series.abeta_missing.push_back(false);
                }
            }
            if (expect_z) {
                auto zv = parse_int(row[z_col]);
                if (!zv || (*zv != 0 && *zv != 1)) {
                    problems.push_back("line " + std::to_string(line) + ": z must be 0 or 1");
                } else if (z_value >= 0 && z_value != *zv) {
                    problems.push_back("patient " + id + ": z changes over time");
                } else {
                    z_value = static_cast<int>(*zv);
                }
            }
            series.values.push_back(std::move(values));
            series.missing.push_back(std::move(missing));
        }
        cohort.patients.push_back(std::move(series));
        if (z_out) z_out->push_back(z_value);
    }

    if (!problems.empty()) {
        std::string report;
        for (const auto& p : problems) report += p + "\n";
        throw CellTypeError(std::to_string(problems.size()) + " bad cells/rows:\n" + report);
    }
    return cohort;
}

inline RawCohort ingest(const std::string& csv_path, const CausalGraph& graph) {
    return ingest_table(read_csv(csv_path), graph);
}

// Subtype inference: fit the two-component mixture on baseline amyloid
// ratios, then hard-label every patient from their baseline ratio (earliest
// available ratio as fallback; a prior-weighted coin from the run seed when
// no ratio exists at all). Labels are constant over a trajectory.
inline SubtypeResult infer_subtypes(const RawCohort& cohort, std::uint64_t seed) {
    std::vector<double> baseline_ratios;
    for (const auto& p : cohort.patients) {
        if (!p.abeta_missing.empty() && !p.abeta_missing[0]) {
            baseline_ratios.push_back(p.abeta[0]);
        }
    }
    SubtypeResult result;
    result.gmm = fit_gmm2(baseline_ratios, seed);
    result.labels.reserve(cohort.size());
    for (std::size_t i = 0; i < cohort.size(); ++i) {
        const auto& p = cohort.patients[i];
        double ratio = 0.0;
        bool found = false;
        for (std::size_t t = 0; t < p.abeta_missing.size(); ++t) {
            if (!p.abeta_missing[t]) {
                ratio = p.abeta[t];
                found = true;
                break;
            }
        }
        if (found) {
            result.labels.push_back(hard_label(result.gmm, ratio));
        } else {
            auto rng = make_stream(seed, StreamPurpose::subtype, i);
            result.labels.push_back(rng.bernoulli(result.gmm.weights[1]) ? 1 : 0);
        }
    }
    return result;
}

namespace detail {

// Marginal mean (continuous) or mode (categorical) over observed cells.
inline std::vector<double> marginal_fill(const RawCohort& cohort, const CausalGraph& graph) {
    const std::size_t n_vars = graph.variables.size();
    std::vector<double> fill(n_vars, 0.0);
    for (std::size_t v = 0; v < n_vars; ++v) {
        const auto& spec = graph.variables[v];
        if (spec.role == Role::latent) continue;
        if (spec.is_categorical()) {
            std::vector<std::size_t> counts(spec.levels.size(), 0);
            for (const auto& p : cohort.patients) {
                for (std::size_t t = 0; t < p.horizon(); ++t) {
                    if (!p.missing[t][v]) ++counts[static_cast<std::size_t>(p.values[t][v])];
                }
            }
            fill[v] = static_cast<double>(
                std::max_element(counts.begin(), counts.end()) - counts.begin());
        } else {
            double sum = 0.0;
            std::size_t n = 0;
            for (const auto& p : cohort.patients) {
                for (std::size_t t = 0; t < p.horizon(); ++t) {
                    if (!p.missing[t][v]) {
                        sum += p.values[t][v];
                        ++n;
                    }
                }
            }
            fill[v] = n > 0 ? sum / static_cast<double>(n) : 0.0;
        }
    }
    return fill;
}

}  // namespace detail

// Fits the baseline (t=0) conditional model for every non-latent variable
// that has at least one missing cell anywhere in the cohort. Missing parent
// cells are marginal-filled for the purpose of fitting, and rows where the
// target itself is missing are dropped.
inline std::map<std::string, ConditionalModel> fit_imputation_models(const RawCohort& cohort,
                                                                     const CausalGraph& graph,
                                                                     const std::vector<int>& z) {
    const std::size_t z_index = graph.index_of(graph.latent_name);
    auto fill = detail::marginal_fill(cohort, graph);

    std::set<std::string> needs_model;
    for (const auto& p : cohort.patients) {
        for (std::size_t t = 0; t < p.horizon(); ++t) {
            for (std::size_t v = 0; v < graph.variables.size(); ++v) {
                if (graph.variables[v].role == Role::latent) continue;
                if (p.missing[t][v]) needs_model.insert(graph.variables[v].name);
            }
        }
    }

    std::map<std::string, ConditionalModel> models;
    for (const auto& name : needs_model) {
        auto parents = parents_at(graph, name, 0).parents;
        const std::size_t target_index = graph.index_of(name);
        std::vector<std::vector<double>> rows;
        std::vector<double> targets;
        for (std::size_t i = 0; i < cohort.size(); ++i) {
            const auto& p = cohort.patients[i];
            if (p.horizon() == 0 || p.missing[0][target_index]) continue;
            std::vector<double> parent_values;
            parent_values.reserve(parents.size());
            for (const auto& parent : parents) {
                const std::size_t pi = graph.index_of(parent.name);
                if (pi == z_index) {
                    parent_values.push_back(static_cast<double>(z[i]));
                } else {
                    parent_values.push_back(p.missing[0][pi] ? fill[pi] : p.values[0][pi]);
                }
            }
            rows.push_back(std::move(parent_values));
            targets.push_back(p.values[0][target_index]);
        }
        models.emplace(name, fit_conditional(graph, name, parents, rows, targets));
    }
    return models;
}

// Graph-chained imputation: initialize missing cells at the marginal
// mean/mode, then sweep variables in topological order filling each missing
// cell with the baseline model's conditional mean (continuous) or modal
// class (categorical) given the currently-filled same-step parents. Sweeps
// repeat until the filled values stabilize (1e-6 for continuous, no label
// flips), at most 20 sweeps. Observed cells are never modified.
inline LabeledCohort impute(const RawCohort& cohort, const CausalGraph& graph,
                            const std::vector<int>& z,
                            const std::map<std::string, ConditionalModel>& baseline_models,
                            const Gmm1D& gmm) {
    if (z.size() != cohort.size()) {
        throw DataError("LabelMismatch", "one z label per patient required");
    }

    LabeledCohort out;
    out.data = cohort;
    out.z = z;
    out.gmm = gmm;

    const std::size_t z_index = graph.index_of(graph.latent_name);
    auto order = topological_order(graph);
    auto fill = detail::marginal_fill(cohort, graph);

    // The latent slot is filled from the labels and never counts as imputed.
    out.imputed.resize(cohort.size());
    for (std::size_t i = 0; i < cohort.size(); ++i) {
        auto& p = out.data.patients[i];
        out.imputed[i].resize(p.horizon());
        for (std::size_t t = 0; t < p.horizon(); ++t) {
            out.imputed[i][t].assign(graph.variables.size(), false);
            p.values[t][z_index] = static_cast<double>(z[i]);
            p.missing[t][z_index] = false;
            for (std::size_t v = 0; v < graph.variables.size(); ++v) {
                if (v == z_index) continue;
                if (cohort.patients[i].missing[t][v]) {
                    out.imputed[i][t][v] = true;
                    p.values[t][v] = fill[v];
                    p.missing[t][v] = false;
                }
            }
        }
    }

    for (int sweep = 0; sweep < 20; ++sweep) {
        bool changed = false;
        for (const auto& name : order) {
            const std::size_t v = graph.index_of(name);
            if (v == z_index) continue;
            const auto& spec = graph.variables[v];

            const ConditionalModel* model = nullptr;
            auto it = baseline_models.find(name);
            if (it != baseline_models.end()) model = &it->second;

            auto parents = parents_at(graph, name, 0).parents;
            for (std::size_t i = 0; i < out.data.size(); ++i) {
                auto& p = out.data.patients[i];
                for (std::size_t t = 0; t < p.horizon(); ++t) {
                    if (!out.imputed[i][t][v]) continue;
                    if (!model) {
                        throw NoModelForVariable("missing cells in '" + name +
                                                 "' but no baseline model provided");
                    }
                    std::vector<double> parent_values;
                    parent_values.reserve(parents.size());
                    for (const auto& parent : parents) {
                        parent_values.push_back(p.values[t][graph.index_of(parent.name)]);
                    }
                    if (spec.is_categorical()) {
                        double updated = static_cast<double>(model->modal_class(parent_values));
                        if (updated != p.values[t][v]) changed = true;
                        p.values[t][v] = updated;
                    } else {
                        double updated = model->conditional_mean(parent_values);
                        if (std::abs(updated - p.values[t][v]) > 1e-6) changed = true;
                        p.values[t][v] = updated;
                    }
                }
            }
        }
        if (!changed) break;
    }
    return out;
}

// Prepared-cohort CSV (the `fit` input format): z attached, no missing cells.
inline CsvTable labeled_cohort_table(const LabeledCohort& cohort, const CausalGraph& graph) {
    CsvTable table;
    table.columns = {"patient_id", "visit", "abeta_ratio", "z"};
    for (const auto& v : graph.variables) {
        if (v.role != Role::latent) table.columns.push_back(v.name);
    }
    for (std::size_t i = 0; i < cohort.data.size(); ++i) {
        const auto& p = cohort.data.patients[i];
        for (std::size_t t = 0; t < p.horizon(); ++t) {
            std::vector<std::string> row;
            row.push_back(p.id);
            row.push_back(std::to_string(t));
            row.push_back(p.abeta_missing[t] ? "" : format_double(p.abeta[t]));
            row.push_back(std::to_string(cohort.z[i]));
            for (std::size_t v = 0; v < graph.variables.size(); ++v) {
                const auto& spec = graph.variables[v];
                if (spec.role == Role::latent) continue;
                if (spec.is_categorical()) {
                    row.push_back(spec.levels.at(static_cast<std::size_t>(p.values[t][v])));
                } else {
                    row.push_back(format_double(p.values[t][v]));
                }
            }
            table.rows.push_back(std::move(row));
        }
    }
    return table;
}

inline LabeledCohort load_labeled_cohort(const std::string& csv_path, const CausalGraph& graph) {
    std::vector<int> z;
    RawCohort raw = ingest_table(read_csv(csv_path), graph, /*expect_z=*/true, &z);
    const std::size_t z_index = graph.index_of(graph.latent_name);
    for (std::size_t i = 0; i < raw.size(); ++i) {
        auto& p = raw.patients[i];
        if (z[i] < 0) throw DataError("LabelMissing", "patient " + p.id + " has no z label");
        for (std::size_t t = 0; t < p.horizon(); ++t) {
            p.values[t][z_index] = static_cast<double>(z[i]);
            p.missing[t][z_index] = false;
            for (std::size_t v = 0; v < graph.variables.size(); ++v) {
                if (p.missing[t][v]) {
                    throw DataError("MissingCell", "patient " + p.id + " visit " + std::to_string(t) +
                                                       " has a missing value for " +
                                                       graph.variables[v].name +
                                                       "; run `cohort prepare` first");
                }
            }
        }
    }
    LabeledCohort out;
    out.data = std::move(raw);
    out.z = std::move(z);
    out.imputed.resize(out.data.size());
    for (std::size_t i = 0; i < out.data.size(); ++i) {
        out.imputed[i].assign(out.data.patients[i].horizon(),
                              std::vector<bool>(graph.variables.size(), false));
    }
    return out;
}

}  // namespace adsim
