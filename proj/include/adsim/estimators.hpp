#pragma once

#include <algorithm>
#include <cctype>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "adsim/csv.hpp"
#include "adsim/effects.hpp"
#include "adsim/errors.hpp"
#include "adsim/linear.hpp"
#include "adsim/rnn.hpp"
#include "adsim/simulate.hpp"

namespace adsim {

namespace detail {

inline bool is_oracle_column(const std::string& name) {
    auto numbered = [&](const std::string& prefix) {
        if (name.size() <= prefix.size() || name.compare(0, prefix.size(), prefix) != 0) return false;
        for (std::size_t i = prefix.size(); i < name.size(); ++i) {
            if (!std::isdigit(static_cast<unsigned char>(name[i]))) return false;
        }
        return true;
    };
    return numbered("y") || numbered("delta");
}

}  // namespace detail

struct FeatureViewOptions {
    bool hide_z = false;            // estimators see the subtype by default
    bool include_diagnosis = false;
    std::size_t ts = SIZE_MAX;      // evaluation step; SIZE_MAX = last common step
};

// Per-unit feature view assembled from an observational export: covariates
// at the evaluation step (plus z, optionally d), and the full per-step
// sequences for sequential estimators. Construction fails hard if any
// oracle-only column is present in the input.
struct FeatureView {
    std::vector<std::string> unit_ids;
    std::vector<std::string> feature_names;
    Eigen::MatrixXd features;                 // units x p at step ts
    std::vector<Eigen::MatrixXd> sequences;   // per unit: (ts+1) x p
    std::vector<std::size_t> actions;         // at ts
    Eigen::VectorXd outcomes;                 // at ts
    std::size_t ts = 0;
    std::size_t n_actions = 0;
};

inline FeatureView build_feature_view(const CsvTable& table, const FeatureViewOptions& options = {}) {
    for (const auto& column : table.columns) {
        if (detail::is_oracle_column(column)) {
            throw LeakageDetected("oracle column '" + column +
                                  "' present in estimator training data");
        }
    }
    const auto id_col = table.column_index("patient_id");
    const auto t_col = table.column_index("t");
    const auto z_col = table.column_index("z");
    const auto d_col = table.column_index("d");
    const auto a_col = table.column_index("a");
    const auto y_col = table.column_index("y");

    // Candidate feature columns: the covariates, plus z / d per options.
    struct Column {
        std::size_t index;
        std::string name;
        bool numeric;
        std::vector<std::string> levels;  // categorical, sorted
    };
    std::vector<Column> columns;
    for (std::size_t c = 0; c < table.columns.size(); ++c) {
        const auto& name = table.columns[c];
        if (c == id_col || c == t_col || c == a_col || c == y_col) continue;
        if (c == z_col && options.hide_z) continue;
        if (c == d_col && !options.include_diagnosis) continue;
        Column column{c, name, true, {}};
        std::set<std::string> seen;
        for (const auto& row : table.rows) {
            const auto& value = row[c];
            if (!parse_double(value)) column.numeric = false;
            seen.insert(value);
        }
        if (!column.numeric) column.levels.assign(seen.begin(), seen.end());
        columns.push_back(std::move(column));
    }

    std::vector<std::string> names;
    for (const auto& column : columns) {
        if (column.numeric) {
            names.push_back(column.name);
        } else {
            for (std::size_t l = 1; l < column.levels.size(); ++l) {
                names.push_back(column.name + "=" + column.levels[l]);
            }
        }
    }

    auto encode_row = [&](const std::vector<std::string>& row, Eigen::RowVectorXd& out) {
        Eigen::Index pos = 0;
        for (const auto& column : columns) {
            const auto& value = row[column.index];
            if (column.numeric) {
                auto v = parse_double(value);
                if (!v) throw CellTypeError("non-numeric '" + value + "' in column " + column.name);
                out[pos++] = *v;
            } else {
                auto it = std::lower_bound(column.levels.begin(), column.levels.end(), value);
                if (it == column.levels.end() || *it != value) {
                    throw CellTypeError("unseen level '" + value + "' in column " + column.name);
                }
                auto level = static_cast<std::size_t>(it - column.levels.begin());
                for (std::size_t l = 1; l < column.levels.size(); ++l) {
                    out[pos++] = l == level ? 1.0 : 0.0;
                }
            }
        }
    };

    // Group rows by patient, ordered by t.
    struct Unit {
        std::vector<std::size_t> row_by_t;
    };
    std::vector<std::string> order;
    std::unordered_map<std::string, std::map<std::size_t, std::size_t>> by_patient;
    std::size_t max_t = 0;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        auto t = parse_int(row[t_col]);
        if (!t || *t < 0) throw CellTypeError("bad t value '" + row[t_col] + "'");
        const auto& id = row[id_col];
        if (!by_patient.count(id)) order.push_back(id);
        by_patient[id][static_cast<std::size_t>(*t)] = r;
        max_t = std::max(max_t, static_cast<std::size_t>(*t));
    }

    FeatureView view;
    view.ts = options.ts == SIZE_MAX ? max_t : options.ts;
    view.feature_names = names;
    const auto p = static_cast<Eigen::Index>(names.size());

    std::vector<std::string> kept;
    for (const auto& id : order) {
        const auto& steps = by_patient[id];
        bool complete = true;
        for (std::size_t t = 0; t <= view.ts; ++t) {
            if (!steps.count(t)) complete = false;
        }
        if (!complete) {
            throw DataError("IncompleteSequence",
                            "patient " + id + " lacks steps 0.." + std::to_string(view.ts));
        }
        kept.push_back(id);
    }

    view.unit_ids = kept;
    view.features.resize(static_cast<Eigen::Index>(kept.size()), p);
    view.outcomes.resize(static_cast<Eigen::Index>(kept.size()));
    view.actions.resize(kept.size());
    view.sequences.reserve(kept.size());

    Eigen::RowVectorXd encoded(p);
    for (std::size_t i = 0; i < kept.size(); ++i) {
        const auto& steps = by_patient[kept[i]];
        Eigen::MatrixXd sequence(static_cast<Eigen::Index>(view.ts + 1), p);
        for (std::size_t t = 0; t <= view.ts; ++t) {
            const auto& row = table.rows[steps.at(t)];
            encode_row(row, encoded);
            sequence.row(static_cast<Eigen::Index>(t)) = encoded;
        }
        view.sequences.push_back(std::move(sequence));
        view.features.row(static_cast<Eigen::Index>(i)) =
            view.sequences.back().row(static_cast<Eigen::Index>(view.ts));

        const auto& eval_row = table.rows[steps.at(view.ts)];
        auto action = parse_int(eval_row[a_col]);
        if (!action || *action < 0) throw CellTypeError("bad action '" + eval_row[a_col] + "'");
        view.actions[i] = static_cast<std::size_t>(*action);
        view.n_actions = std::max(view.n_actions, view.actions[i] + 1);
        auto y = parse_double(eval_row[y_col]);
        if (!y) throw CellTypeError("bad outcome '" + eval_row[y_col] + "'");
        view.outcomes[static_cast<Eigen::Index>(i)] = *y;
    }
    return view;
}

// Per-unit effect predictions for every retained arm, plus the implied ATE
// estimates (mean over units).
struct CateEstimate {
    std::vector<std::string> unit_ids;
    std::size_t n_actions = 0;
    std::vector<std::vector<double>> tau;  // [unit][action], action 0 slot unused
    std::vector<bool> arm_kept;            // [action], index 0 false
    std::vector<double> ate_hat;           // [action]

    std::vector<std::size_t> skipped_arms() const {
        std::vector<std::size_t> out;
        for (std::size_t a = 1; a < n_actions; ++a) {
            if (!arm_kept[a]) out.push_back(a);
        }
        return out;
    }
};

namespace detail {

inline CateEstimate empty_estimate(const FeatureView& view, std::size_t n_actions) {
    CateEstimate estimate;
    estimate.unit_ids = view.unit_ids;
    estimate.n_actions = n_actions;
    estimate.tau.assign(view.unit_ids.size(), std::vector<double>(n_actions, 0.0));
    estimate.arm_kept.assign(n_actions, false);
    estimate.ate_hat.assign(n_actions, 0.0);
    return estimate;
}

inline void finalize_ate(CateEstimate& estimate) {
    for (std::size_t a = 1; a < estimate.n_actions; ++a) {
        if (!estimate.arm_kept[a]) continue;
        double sum = 0.0;
        for (const auto& row : estimate.tau) sum += row[a];
        estimate.ate_hat[a] = sum / static_cast<double>(estimate.tau.size());
    }
}

}  // namespace detail

// S-learner: one linear model on features plus action dummies. Without
// interaction terms the predicted effect is constant across units, which is
// exactly the estimator's documented blind spot under subtype heterogeneity.
inline CateEstimate s_learner(const FeatureView& view, std::size_t n_actions = 0) {
    std::set<std::size_t> observed(view.actions.begin(), view.actions.end());
    if (observed.size() < 2) {
        throw InsufficientData("s_learner needs at least two observed actions");
    }
    if (n_actions == 0) n_actions = view.n_actions;
    const auto n = static_cast<Eigen::Index>(view.unit_ids.size());
    const Eigen::Index p = view.features.cols();
    const auto k = static_cast<Eigen::Index>(n_actions);

    Eigen::MatrixXd X(n, 1 + p + k - 1);
    X.col(0).setOnes();
    X.middleCols(1, p) = view.features;
    X.rightCols(k - 1).setZero();
    for (Eigen::Index i = 0; i < n; ++i) {
        auto a = view.actions[static_cast<std::size_t>(i)];
        if (a >= 1) X(i, 1 + p + static_cast<Eigen::Index>(a) - 1) = 1.0;
    }
    auto model = fit_linear(X, view.outcomes);

    auto estimate = detail::empty_estimate(view, n_actions);
    for (std::size_t a = 1; a < n_actions; ++a) {
        if (!observed.count(a)) continue;  // never seen: no prediction
        estimate.arm_kept[a] = true;
        // f(x, a) - f(x, 0) collapses to the dummy coefficient.
        double effect = model.coefficients[1 + p + static_cast<Eigen::Index>(a) - 1];
        for (auto& row : estimate.tau) row[a] = effect;
    }
    detail::finalize_ate(estimate);
    return estimate;
}

// T-learner: a separate linear model per arm. The no-treatment arm must be
// fittable; undersized treatment arms are skipped and reported.
inline CateEstimate t_learner(const FeatureView& view, std::size_t n_actions = 0) {
    if (n_actions == 0) n_actions = view.n_actions;
    const auto n = view.unit_ids.size();
    const Eigen::Index p = view.features.cols();
    const std::size_t min_rows = static_cast<std::size_t>(p) + 2;  // intercept + columns + 1

    std::vector<std::vector<Eigen::Index>> arm_rows(n_actions);
    for (std::size_t i = 0; i < n; ++i) {
        if (view.actions[i] < n_actions) {
            arm_rows[view.actions[i]].push_back(static_cast<Eigen::Index>(i));
        }
    }
    if (arm_rows[0].size() < min_rows) {
        throw ArmStarved("no-treatment arm has " + std::to_string(arm_rows[0].size()) +
                         " rows, need " + std::to_string(min_rows));
    }

    auto fit_arm = [&](const std::vector<Eigen::Index>& rows) {
        Eigen::MatrixXd X(static_cast<Eigen::Index>(rows.size()), 1 + p);
        Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
        for (std::size_t r = 0; r < rows.size(); ++r) {
            X(static_cast<Eigen::Index>(r), 0) = 1.0;
            X.row(static_cast<Eigen::Index>(r)).tail(p) = view.features.row(rows[r]);
            y(static_cast<Eigen::Index>(r)) = view.outcomes(rows[r]);
        }
        return fit_linear(X, y);
    };

    auto control = fit_arm(arm_rows[0]);
    auto predict = [&](const LinearGaussianModel& model, std::size_t unit) {
        Eigen::RowVectorXd x(1 + p);
        x(0) = 1.0;
        x.tail(p) = view.features.row(static_cast<Eigen::Index>(unit));
        return model.predict(x);
    };

    auto estimate = detail::empty_estimate(view, n_actions);
    for (std::size_t a = 1; a < n_actions; ++a) {
        if (arm_rows[a].size() < min_rows) continue;  // skipped, reported via arm_kept
        auto arm = fit_arm(arm_rows[a]);
        estimate.arm_kept[a] = true;
        for (std::size_t i = 0; i < n; ++i) {
            estimate.tau[i][a] = predict(arm, i) - predict(control, i);
        }
    }
    detail::finalize_ate(estimate);
    return estimate;
}

// Sequential T-learner: one RecurrentRegressor per arm, trained on the full
// sequences {0..ts} of the units that received that arm at ts.
inline CateEstimate seq_t_learner(const FeatureView& view, const RecurrentRegressor::Options& options,
                                  std::size_t n_actions = 0) {
    if (n_actions == 0) n_actions = view.n_actions;
    const auto n = view.unit_ids.size();
    const std::size_t min_rows = 4;

    std::vector<std::vector<std::size_t>> arm_rows(n_actions);
    for (std::size_t i = 0; i < n; ++i) {
        if (view.actions[i] < n_actions) arm_rows[view.actions[i]].push_back(i);
    }
    if (arm_rows[0].size() < min_rows) {
        throw ArmStarved("no-treatment arm has " + std::to_string(arm_rows[0].size()) +
                         " sequences, need " + std::to_string(min_rows));
    }

    const auto input_dim = static_cast<int>(view.features.cols());
    auto train_arm = [&](std::size_t a) {
        RecurrentRegressor::Options arm_options = options;
        arm_options.stream_index = a;
        RecurrentRegressor model(input_dim, arm_options);
        std::vector<Eigen::MatrixXd> sequences;
        std::vector<double> targets;
        for (auto i : arm_rows[a]) {
            sequences.push_back(view.sequences[i]);
            targets.push_back(view.outcomes(static_cast<Eigen::Index>(i)));
        }
        model.train(sequences, targets);
        return model;
    };

    auto control = train_arm(0);
    std::vector<double> control_pred(n);
    for (std::size_t i = 0; i < n; ++i) control_pred[i] = control.predict(view.sequences[i]);

    auto estimate = detail::empty_estimate(view, n_actions);
    for (std::size_t a = 1; a < n_actions; ++a) {
        if (arm_rows[a].size() < min_rows) continue;
        auto arm = train_arm(a);
        estimate.arm_kept[a] = true;
        for (std::size_t i = 0; i < n; ++i) {
            estimate.tau[i][a] = arm.predict(view.sequences[i]) - control_pred[i];
        }
    }
    detail::finalize_ate(estimate);
    return estimate;
}

// --- scoring -----------------------------------------------------------------

struct PeheResult {
    std::vector<double> per_action;  // index 0 unused; NaN for skipped arms
    std::vector<bool> scored;
    double macro = 0.0;
};

// Root-mean-squared error between predicted per-unit effects and the ground
// truth delta(a, z_i), per action, macro-averaged over scored arms.
inline PeheResult pehe(const CateEstimate& estimate, const OracleUnits& oracle) {
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < oracle.patient_ids.size(); ++i) index[oracle.patient_ids[i]] = i;
    if (oracle.patient_ids.size() != estimate.unit_ids.size()) {
        throw UnitMismatch("oracle has " + std::to_string(oracle.patient_ids.size()) +
                           " units, estimate has " + std::to_string(estimate.unit_ids.size()));
    }

    PeheResult result;
    result.per_action.assign(estimate.n_actions, std::numeric_limits<double>::quiet_NaN());
    result.scored.assign(estimate.n_actions, false);

    double macro_sum = 0.0;
    std::size_t macro_n = 0;
    for (std::size_t a = 1; a < estimate.n_actions; ++a) {
        if (!estimate.arm_kept[a]) continue;
        double sum_sq = 0.0;
        for (std::size_t i = 0; i < estimate.unit_ids.size(); ++i) {
            auto it = index.find(estimate.unit_ids[i]);
            if (it == index.end()) throw UnitMismatch("unit " + estimate.unit_ids[i] + " not in oracle");
            double truth = oracle.delta[it->second].at(a);
            double diff = estimate.tau[i][a] - truth;
            sum_sq += diff * diff;
        }
        result.per_action[a] = std::sqrt(sum_sq / static_cast<double>(estimate.unit_ids.size()));
        result.scored[a] = true;
        macro_sum += result.per_action[a];
        ++macro_n;
    }
    if (macro_n == 0) throw ArmStarved("no arm produced predictions to score");
    result.macro = macro_sum / static_cast<double>(macro_n);
    return result;
}

// Absolute error of the implied ATE estimates against the configured table.
inline std::vector<double> ate_error(const CateEstimate& estimate, const EffectSpec& effects) {
    std::vector<double> errors(estimate.n_actions, std::numeric_limits<double>::quiet_NaN());
    for (std::size_t a = 1; a < estimate.n_actions && a < effects.ate.size(); ++a) {
        if (!estimate.arm_kept[a]) continue;
        errors[a] = std::abs(estimate.ate_hat[a] - effects.ate[a]);
    }
    return errors;
}

}  // namespace adsim
