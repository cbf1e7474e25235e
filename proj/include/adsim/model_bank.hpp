#pragma once

#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "adsim/cohort.hpp"
#include "adsim/errors.hpp"
#include "adsim/gmm.hpp"
#include "adsim/graph.hpp"
#include "adsim/metrics.hpp"
#include "adsim/models.hpp"
#include "adsim/parallel.hpp"

namespace adsim {

constexpr int kBankFormatVersion = 1;

// The full bank of fitted conditionals: a baseline model per variable
// (except the latent) keyed by the t=0 parent set, an autoregressive model
// per dynamic variable keyed by the t>=1 parent set (which adds the
// self-lag), and the subtype mixture.
struct ModelBank {
    std::string graph_hash;
    Gmm1D gmm;
    std::map<std::string, ConditionalModel> baseline;
    std::map<std::string, ConditionalModel> autoregressive;
    std::string split = "train";
    double holdout_fraction = 0.0;
    std::uint64_t seed = 0;

    const ConditionalModel& baseline_model(const std::string& name) const {
        auto it = baseline.find(name);
        if (it == baseline.end()) throw NoModelForVariable("no baseline model for '" + name + "'");
        return it->second;
    }

    const ConditionalModel& autoregressive_model(const std::string& name) const {
        auto it = autoregressive.find(name);
        if (it == autoregressive.end()) {
            throw NoModelForVariable("no autoregressive model for '" + name + "'");
        }
        return it->second;
    }
};

// Structural coverage + alignment check against a graph.
inline void validate_bank(const ModelBank& bank, const CausalGraph& graph) {
    if (bank.graph_hash != graph_hash(graph)) {
        throw BankGraphMismatch("bank was fitted against a different graph (hash " + bank.graph_hash +
                                ")");
    }
    for (const auto& v : graph.variables) {
        if (v.role == Role::latent) continue;
        const auto& base = bank.baseline_model(v.name);
        Encoder expected(graph, parents_at(graph, v.name, 0).parents, v.name);
        if (base.feature_names() != expected.column_names()) {
            throw BankGraphMismatch("baseline model for '" + v.name +
                                    "' is not aligned with the graph's parent list");
        }
        if (!v.is_static()) {
            const auto& ar = bank.autoregressive_model(v.name);
            Encoder expected_ar(graph, parents_at(graph, v.name, 1).parents, v.name);
            if (ar.feature_names() != expected_ar.column_names()) {
                throw BankGraphMismatch("autoregressive model for '" + v.name +
                                        "' is not aligned with the graph's parent list");
            }
        }
    }
}

struct BankFitResult {
    ModelBank bank;
    std::vector<FitReport> report;
};

namespace detail {

struct SplitRows {
    // Baseline rows: (patient, 0). Transition rows: (patient, t) for t >= 1.
    std::vector<std::size_t> train_patients;
    std::vector<std::size_t> eval_patients;
};

inline SplitRows patient_split(std::size_t n_patients, double holdout_fraction, std::uint64_t seed) {
    std::vector<std::size_t> order(n_patients);
    for (std::size_t i = 0; i < n_patients; ++i) order[i] = i;
    auto rng = make_stream(seed, StreamPurpose::holdout, 0);
    for (std::size_t i = n_patients; i > 1; --i) {
        std::size_t j = rng.index(i);
        std::swap(order[i - 1], order[j]);
    }
    auto n_holdout = static_cast<std::size_t>(holdout_fraction * static_cast<double>(n_patients));
    SplitRows split;
    for (std::size_t i = 0; i < n_patients; ++i) {
        if (i < n_holdout) {
            split.eval_patients.push_back(order[i]);
        } else {
            split.train_patients.push_back(order[i]);
        }
    }
    std::sort(split.train_patients.begin(), split.train_patients.end());
    std::sort(split.eval_patients.begin(), split.eval_patients.end());
    if (split.eval_patients.empty()) split.eval_patients = split.train_patients;
    return split;
}

// Collect (parent-values, target) pairs for one variable at one stage.
inline void collect_rows(const LabeledCohort& cohort, const CausalGraph& graph,
                         const std::string& target, bool autoregressive,
                         const std::vector<std::size_t>& patients,
                         std::vector<std::vector<double>>& parent_rows,
                         std::vector<double>& targets) {
    const std::size_t target_index = graph.index_of(target);
    auto parents = parents_at(graph, target, autoregressive ? 1 : 0).parents;
    for (auto pi : patients) {
        const auto& p = cohort.data.patients[pi];
        if (!autoregressive) {
            if (p.horizon() == 0) continue;
            std::vector<double> row;
            row.reserve(parents.size());
            for (const auto& parent : parents) {
                row.push_back(p.values[0][graph.index_of(parent.name)]);
            }
            parent_rows.push_back(std::move(row));
            targets.push_back(p.values[0][target_index]);
        } else {
            for (std::size_t t = 1; t < p.horizon(); ++t) {
                std::vector<double> row;
                row.reserve(parents.size());
                for (const auto& parent : parents) {
                    std::size_t at = parent.time_offset == -1 ? t - 1 : t;
                    row.push_back(p.values[at][graph.index_of(parent.name)]);
                }
                parent_rows.push_back(std::move(row));
                targets.push_back(p.values[t][target_index]);
            }
        }
    }
}

inline FitReport evaluate_model(const ConditionalModel& model, const CausalGraph& graph,
                                const std::vector<std::vector<double>>& parent_rows,
                                const std::vector<double>& targets) {
    if (model.type == ConditionalModel::Type::logistic) {
        std::vector<std::size_t> preds(targets.size()), truths(targets.size());
        for (std::size_t i = 0; i < targets.size(); ++i) {
            preds[i] = model.modal_class(parent_rows[i]);
            truths[i] = static_cast<std::size_t>(targets[i]);
        }
        return classification_report(preds, truths);
    }
    std::vector<double> preds(targets.size());
    for (std::size_t i = 0; i < targets.size(); ++i) {
        preds[i] = model.conditional_mean(parent_rows[i]);
    }
    (void)graph;
    return regression_report(preds, targets);
}

}  // namespace detail

// Fits the whole bank: baseline models on t=0 rows of the training
// patients, autoregressive models on all (t-1 -> t) transition pairs pooled
// across t (the autoregression is stationary), metrics on the held-out
// patients (or the training set when holdout_fraction is 0). The split is
// at patient level so no patient contributes to both sides.
inline BankFitResult fit_bank(const LabeledCohort& cohort, const CausalGraph& graph,
                              double holdout_fraction, std::uint64_t seed) {
    if (!(holdout_fraction >= 0.0 && holdout_fraction <= 0.5)) {
        throw ConfigError("InvalidHoldout", "holdout_fraction must lie in [0, 0.5]");
    }
    auto split = detail::patient_split(cohort.data.size(), holdout_fraction, seed);

    BankFitResult result;
    result.bank.graph_hash = graph_hash(graph);
    result.bank.gmm = cohort.gmm;
    result.bank.split = holdout_fraction > 0.0 ? "holdout" : "train";
    result.bank.holdout_fraction = holdout_fraction;
    result.bank.seed = seed;

    struct Job {
        std::string target;
        bool autoregressive;
    };
    std::vector<Job> jobs;
    for (const auto& v : graph.variables) {
        if (v.role == Role::latent) continue;
        jobs.push_back({v.name, false});
        if (!v.is_static()) jobs.push_back({v.name, true});
    }

    std::vector<ConditionalModel> fitted(jobs.size());
    std::vector<FitReport> reports(jobs.size());
    parallel_for(jobs.size(), [&](std::size_t j) {
        const auto& job = jobs[j];
        std::vector<std::vector<double>> rows;
        std::vector<double> targets;
        detail::collect_rows(cohort, graph, job.target, job.autoregressive, split.train_patients,
                             rows, targets);
        try {
            fitted[j] = fit_conditional(
                graph, job.target, parents_at(graph, job.target, job.autoregressive ? 1 : 0).parents,
                rows, targets);
        } catch (const DegenerateInput& e) {
            throw InsufficientData("variable '" + job.target + "': " + e.what());
        }

        std::vector<std::vector<double>> eval_rows;
        std::vector<double> eval_targets;
        detail::collect_rows(cohort, graph, job.target, job.autoregressive, split.eval_patients,
                             eval_rows, eval_targets);
        reports[j] = detail::evaluate_model(fitted[j], graph, eval_rows, eval_targets);
        reports[j].target = job.target;
        reports[j].stage = job.autoregressive ? "autoregression" : "baseline";
        reports[j].split = result.bank.split;
    });

    for (std::size_t j = 0; j < jobs.size(); ++j) {
        if (jobs[j].autoregressive) {
            result.bank.autoregressive.emplace(jobs[j].target, std::move(fitted[j]));
        } else {
            result.bank.baseline.emplace(jobs[j].target, std::move(fitted[j]));
        }
    }

    // Report in the published layout: dynamic categorical targets first,
    // then dynamic continuous ones, in declaration order; baseline before
    // autoregression within each target.
    for (const auto& v : graph.variables) {
        if (v.role == Role::latent || v.is_static() || !v.is_categorical()) continue;
        for (std::size_t j = 0; j < jobs.size(); ++j) {
            if (jobs[j].target == v.name && !jobs[j].autoregressive) result.report.push_back(reports[j]);
        }
        for (std::size_t j = 0; j < jobs.size(); ++j) {
            if (jobs[j].target == v.name && jobs[j].autoregressive) result.report.push_back(reports[j]);
        }
    }
    for (const auto& v : graph.variables) {
        if (v.role == Role::latent || v.is_static() || v.is_categorical()) continue;
        for (std::size_t j = 0; j < jobs.size(); ++j) {
            if (jobs[j].target == v.name && !jobs[j].autoregressive) result.report.push_back(reports[j]);
        }
        for (std::size_t j = 0; j < jobs.size(); ++j) {
            if (jobs[j].target == v.name && jobs[j].autoregressive) result.report.push_back(reports[j]);
        }
    }
    return result;
}

// Pooling diagnostic for the stationarity assumption: refit each continuous
// autoregressor on transitions landing on even target steps and on odd ones,
// and compare coefficients on the combined-standard-error scale. On data that
// really is stationary the largest |z| stays within sampling error (4 SEs).
struct EvenOddCheck {
    double max_z = 0.0;
    std::string worst;  // "variable/feature"
    bool ok(double threshold = 4.0) const { return max_z < threshold; }
};

inline EvenOddCheck even_odd_consistency(const LabeledCohort& cohort, const CausalGraph& graph) {
    EvenOddCheck check;
    std::vector<std::size_t> all_patients(cohort.data.size());
    for (std::size_t i = 0; i < all_patients.size(); ++i) all_patients[i] = i;

    for (const auto& v : graph.variables) {
        if (v.role == Role::latent || v.is_static() || v.is_categorical()) continue;
        auto parents = parents_at(graph, v.name, 1).parents;
        Encoder encoder(graph, parents, v.name);
        const std::size_t target_index = graph.index_of(v.name);

        std::vector<std::vector<double>> rows_even, rows_odd;
        std::vector<double> y_even, y_odd;
        for (const auto& p : cohort.data.patients) {
            for (std::size_t t = 1; t < p.horizon(); ++t) {
                std::vector<double> row;
                for (const auto& parent : parents) {
                    std::size_t at = parent.time_offset == -1 ? t - 1 : t;
                    row.push_back(p.values[at][graph.index_of(parent.name)]);
                }
                if (t % 2 == 0) {
                    rows_even.push_back(std::move(row));
                    y_even.push_back(p.values[t][target_index]);
                } else {
                    rows_odd.push_back(std::move(row));
                    y_odd.push_back(p.values[t][target_index]);
                }
            }
        }
        if (rows_even.size() < encoder.width() + 1 || rows_odd.size() < encoder.width() + 1) {
            continue;  // not enough steps to split; nothing to compare
        }
        auto de = build_design(encoder, rows_even);
        auto dodd = build_design(encoder, rows_odd);
        Eigen::VectorXd ye = Eigen::Map<const Eigen::VectorXd>(y_even.data(), static_cast<Eigen::Index>(y_even.size()));
        Eigen::VectorXd yo = Eigen::Map<const Eigen::VectorXd>(y_odd.data(), static_cast<Eigen::Index>(y_odd.size()));
        auto fit_e = fit_linear(de.X, ye);
        auto fit_o = fit_linear(dodd.X, yo);
        auto se_e = linear_standard_errors(de.X, fit_e.noise_sd);
        auto se_o = linear_standard_errors(dodd.X, fit_o.noise_sd);
        for (Eigen::Index j = 0; j < fit_e.coefficients.size(); ++j) {
            double diff = std::abs(fit_e.coefficients[j] - fit_o.coefficients[j]);
            double scale = std::sqrt(se_e[j] * se_e[j] + se_o[j] * se_o[j]);
            double z = scale > 1e-12 ? diff / scale : (diff < 1e-9 ? 0.0 : std::numeric_limits<double>::infinity());
            if (z > check.max_z) {
                check.max_z = z;
                check.worst = v.name + "/" + encoder.column_names()[static_cast<std::size_t>(j)];
            }
        }
    }
    return check;
}

// --- serialization -----------------------------------------------------------

namespace detail {

inline nlohmann::json model_to_json(const ConditionalModel& model) {
    nlohmann::json j;
    j["type"] = model.type == ConditionalModel::Type::linear ? "linear" : "logistic";
    nlohmann::json parents = nlohmann::json::array();
    for (const auto& parent : model.parents) {
        parents.push_back(nlohmann::json::array({parent.name, parent.time_offset}));
    }
    j["parents"] = parents;
    j["features"] = model.feature_names();
    if (model.type == ConditionalModel::Type::linear) {
        j["coefficients"] = std::vector<double>(
            model.linear.coefficients.data(),
            model.linear.coefficients.data() + model.linear.coefficients.size());
        j["noise_sd"] = model.linear.noise_sd;
        j["rank"] = model.linear.rank;
    } else {
        j["classes"] = model.logistic.class_labels;
        nlohmann::json rows = nlohmann::json::array();
        for (Eigen::Index r = 0; r < model.logistic.weights.rows(); ++r) {
            std::vector<double> row(model.logistic.weights.cols());
            for (Eigen::Index c = 0; c < model.logistic.weights.cols(); ++c) {
                row[static_cast<std::size_t>(c)] = model.logistic.weights(r, c);
            }
            rows.push_back(row);
        }
        j["weights"] = rows;
        j["converged"] = model.logistic.converged;
        j["grad_norm"] = model.logistic.final_grad_norm;
        j["iterations"] = model.logistic.iterations;
    }
    return j;
}

inline ConditionalModel model_from_json(const nlohmann::json& j, const CausalGraph& graph,
                                        const std::string& target) {
    ConditionalModel model;
    model.target = target;
    for (const auto& jp : j.at("parents")) {
        model.parents.push_back({jp.at(0).get<std::string>(), jp.at(1).get<int>()});
    }
    model.encoder = Encoder(graph, model.parents, target);
    auto features = j.at("features").get<std::vector<std::string>>();
    if (features != model.encoder.column_names()) {
        throw ChecksumMismatch("feature alignment for '" + target +
                               "' does not match the provided graph");
    }
    if (j.at("type").get<std::string>() == "linear") {
        model.type = ConditionalModel::Type::linear;
        auto coefs = j.at("coefficients").get<std::vector<double>>();
        model.linear.coefficients =
            Eigen::Map<const Eigen::VectorXd>(coefs.data(), static_cast<Eigen::Index>(coefs.size()));
        model.linear.noise_sd = j.at("noise_sd").get<double>();
        model.linear.rank = j.value("rank", static_cast<Eigen::Index>(coefs.size()));
        if (model.linear.coefficients.size() != static_cast<Eigen::Index>(model.encoder.width())) {
            throw ChecksumMismatch("coefficient length mismatch for '" + target + "'");
        }
    } else {
        model.type = ConditionalModel::Type::logistic;
        model.logistic.class_labels = j.at("classes").get<std::vector<std::string>>();
        auto rows = j.at("weights").get<std::vector<std::vector<double>>>();
        model.logistic.weights.resize(static_cast<Eigen::Index>(rows.size()),
                                      static_cast<Eigen::Index>(model.encoder.width()));
        for (std::size_t r = 0; r < rows.size(); ++r) {
            if (rows[r].size() != model.encoder.width()) {
                throw ChecksumMismatch("weight width mismatch for '" + target + "'");
            }
            for (std::size_t c = 0; c < rows[r].size(); ++c) {
                model.logistic.weights(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                    rows[r][c];
            }
        }
        if (model.logistic.class_labels.size() != rows.size() + 1) {
            throw ChecksumMismatch("class/weight row mismatch for '" + target + "'");
        }
        model.logistic.converged = j.value("converged", true);
        model.logistic.final_grad_norm = j.value("grad_norm", 0.0);
        model.logistic.iterations = j.value("iterations", 0);
    }
    return model;
}

}  // namespace detail

inline nlohmann::json bank_to_json(const ModelBank& bank) {
    nlohmann::json j;
    j["format_version"] = kBankFormatVersion;
    j["graph_hash"] = bank.graph_hash;
    j["meta"] = {{"split", bank.split},
                 {"holdout_fraction", bank.holdout_fraction},
                 {"seed", bank.seed}};
    j["gmm"] = {{"weights", bank.gmm.weights}, {"means", bank.gmm.means}, {"sds", bank.gmm.sds}};
    j["baseline"] = nlohmann::json::object();
    for (const auto& [name, model] : bank.baseline) {
        j["baseline"][name] = detail::model_to_json(model);
    }
    j["autoregressive"] = nlohmann::json::object();
    for (const auto& [name, model] : bank.autoregressive) {
        j["autoregressive"][name] = detail::model_to_json(model);
    }
    return j;
}

inline void save_bank(const std::string& path, const ModelBank& bank) {
    write_file(path, bank_to_json(bank).dump(2) + "\n");
}

inline std::string bank_hash(const ModelBank& bank) { return hash_hex(bank_to_json(bank).dump()); }

inline ModelBank bank_from_json(const nlohmann::json& j, const CausalGraph& graph) {
    int version = j.value("format_version", -1);
    if (version != kBankFormatVersion) {
        throw VersionMismatch("bank format version " + std::to_string(version) + ", expected " +
                              std::to_string(kBankFormatVersion));
    }
    ModelBank bank;
    bank.graph_hash = j.at("graph_hash").get<std::string>();
    if (bank.graph_hash != graph_hash(graph)) {
        throw ChecksumMismatch("bank graph hash " + bank.graph_hash +
                               " does not match the provided graph (" + graph_hash(graph) + ")");
    }
    const auto& jg = j.at("gmm");
    bank.gmm.weights = jg.at("weights").get<std::array<double, 2>>();
    bank.gmm.means = jg.at("means").get<std::array<double, 2>>();
    bank.gmm.sds = jg.at("sds").get<std::array<double, 2>>();
    if (j.contains("meta")) {
        bank.split = j["meta"].value("split", "train");
        bank.holdout_fraction = j["meta"].value("holdout_fraction", 0.0);
        bank.seed = j["meta"].value("seed", std::uint64_t{0});
    }
    for (const auto& [name, jm] : j.at("baseline").items()) {
        bank.baseline.emplace(name, detail::model_from_json(jm, graph, name));
    }
    for (const auto& [name, jm] : j.at("autoregressive").items()) {
        bank.autoregressive.emplace(name, detail::model_from_json(jm, graph, name));
    }
    validate_bank(bank, graph);
    return bank;
}

// Fit-quality report rows in CSV form, mirroring the published two-block
// table: classifier rows carry accuracy / macro-F1 / class count, regression
// rows carry R^2 / RMSE / sigma_y.
inline CsvTable fit_report_table(const std::vector<FitReport>& report) {
    CsvTable table;
    table.columns = {"target", "stage", "kind", "split",   "n",  "accuracy",
                     "macro_f1", "classes", "r2", "rmse", "sigma_y"};
    for (const auto& r : report) {
        bool classifier = r.kind == FitKind::classifier;
        table.rows.push_back({r.target, r.stage, classifier ? "classifier" : "regression", r.split,
                              std::to_string(r.n), classifier ? format_double(r.accuracy) : "",
                              classifier ? format_double(r.macro_f1) : "",
                              classifier ? std::to_string(r.n_classes) : "",
                              classifier ? "" : format_double(r.r2),
                              classifier ? "" : format_double(r.rmse),
                              classifier ? "" : format_double(r.sigma_y)});
    }
    return table;
}

inline ModelBank load_bank(const std::string& path, const CausalGraph& graph) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw DataError("InvalidBank", "cannot parse '" + path + "': " + e.what());
    }
    try {
        return bank_from_json(j, graph);
    } catch (const nlohmann::json::exception& e) {
        throw DataError("InvalidBank", "malformed bank '" + path + "': " + e.what());
    }
}

}  // namespace adsim
