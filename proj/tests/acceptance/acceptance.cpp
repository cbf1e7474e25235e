// Acceptance suite: one numbered check per release criterion, each printing
// a single [PASS]/[FAIL] line. Run with no criterion arguments to execute
// everything, or pass numbers to select. CLI-facing checks exercise the real
// binary through std::system.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "adsim/bench.hpp"
#include "adsim/cohort.hpp"
#include "adsim/csv.hpp"
#include "adsim/effects.hpp"
#include "adsim/estimators.hpp"
#include "adsim/graph.hpp"
#include "adsim/model_bank.hpp"
#include "adsim/reference.hpp"
#include "adsim/rnn.hpp"
#include "adsim/simulate.hpp"

using namespace adsim;

namespace {

struct Context {
    std::string cli;
    std::string data;
    std::string work;
};

struct Outcome {
    bool pass = true;
    std::string detail;

    void check(bool condition, const std::string& message) {
        if (!condition) {
            pass = false;
            if (!detail.empty()) detail += "; ";
            detail += message;
        }
    }
};

int run_cli(const Context& ctx, const std::string& args, const std::string& stdout_path = "") {
    std::string command = ctx.cli + " " + args;
    command += " > " + (stdout_path.empty() ? ctx.work + "/stdout.log" : stdout_path);
    command += " 2> " + ctx.work + "/stderr.log";
    return std::system(command.c_str());
}

double median_with_failures(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    std::size_t n = values.size();
    if (n == 0) return std::numeric_limits<double>::quiet_NaN();
    return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

// ---------------------------------------------------------------------------
// 1. Effect closure identities, exact.
Outcome criterion_1(const Context&) {
    Outcome outcome;
    for (double gamma : {1.0, 1.5, 2.0, 4.0, 8.0}) {
        for (int pi = 1; pi <= 9; ++pi) {
            double prior = pi / 10.0;
            auto spec = default_effect_spec(gamma, prior);
            for (std::size_t a = 0; a < spec.n_actions(); ++a) {
                double mix = prior * delta(spec, a, 1) + (1.0 - prior) * delta(spec, a, 0);
                double scale = std::max(1.0, std::abs(spec.ate[a]));
                outcome.check(std::abs(mix - spec.ate[a]) <= 1e-12 * scale,
                              "closure off at a=" + std::to_string(a) + " gamma=" +
                                  format_double(gamma) + " p=" + format_double(prior));
                if (a >= 1 && spec.ate[a] != 0.0) {
                    double hi = spec.is_high(a, 1) ? delta(spec, a, 1) : delta(spec, a, 0);
                    double lo = spec.is_high(a, 1) ? delta(spec, a, 0) : delta(spec, a, 1);
                    outcome.check(std::abs(hi / lo - gamma) <= 1e-12 * gamma,
                                  "ratio off at a=" + std::to_string(a));
                }
            }
        }
    }
    if (outcome.pass) outcome.detail = "closure and ratio exact to 1e-12 over the gamma/prior grid";
    return outcome;
}

// ---------------------------------------------------------------------------
// 2. The report subcommand prints the trial ATE table exactly.
Outcome criterion_2(const Context& ctx) {
    Outcome outcome;
    std::string out = ctx.work + "/effects.csv";
    outcome.check(run_cli(ctx, "report effects", out) == 0, "CLI failed");
    if (!outcome.pass) return outcome;

    auto table = read_csv(out);
    std::vector<double> expected{0.0, -1.95, -2.48, -3.03, -3.20, -2.01, -1.29, -2.64};
    outcome.check(table.rows.size() == expected.size(), "row count");
    auto ate_col = table.column_index("ate");
    for (std::size_t a = 0; a < std::min(expected.size(), table.rows.size()); ++a) {
        auto printed = parse_double(table.rows[a][ate_col]);
        outcome.check(printed.has_value() && *printed == expected[a],
                      "ate[" + std::to_string(a) + "] printed as '" + table.rows[a][ate_col] + "'");
    }
    if (outcome.pass) outcome.detail = "printed table equals (0,-1.95,-2.48,-3.03,-3.2,-2.01,-1.29,-2.64)";
    return outcome;
}

// ---------------------------------------------------------------------------
// 3. Overlap knob: uniformity at eps=1, class confinement at eps=0, eps/k floor.
Outcome criterion_3(const Context&) {
    Outcome outcome;
    auto effects = default_effect_spec(2.0);
    const std::size_t k = effects.n_actions();

    {
        auto policy = default_policy_spec(PolicyKind::covariate, 1.0, effects.ate);
        auto rng = make_stream(3101, StreamPurpose::generic, 0);
        const int n = 100000;
        std::vector<int> counts(k, 0);
        for (int i = 0; i < n; ++i) ++counts[choose_action(policy, effects, 1, rng)];
        double p = 1.0 / static_cast<double>(k);
        double sigma = std::sqrt(p * (1 - p) / n);
        for (std::size_t a = 0; a < k; ++a) {
            double freq = static_cast<double>(counts[a]) / n;
            outcome.check(std::abs(freq - p) < 3 * sigma,
                          "eps=1 frequency of action " + std::to_string(a) + " off by " +
                              format_double((freq - p) / sigma) + " sigma");
        }
    }
    {
        auto policy = default_policy_spec(PolicyKind::covariate, 0.0, effects.ate);
        auto rng = make_stream(3102, StreamPurpose::generic, 0);
        std::size_t out_of_class = 0;
        for (std::size_t level = 0; level < 3; ++level) {
            const auto& cls = policy.action_classes[policy.diagnosis_class_map[level]];
            for (int i = 0; i < 20000; ++i) {
                auto a = choose_action(policy, effects, level, rng);
                if (std::find(cls.begin(), cls.end(), a) == cls.end()) ++out_of_class;
            }
        }
        outcome.check(out_of_class == 0,
                      "eps=0 emitted " + std::to_string(out_of_class) + " out-of-class actions");
    }
    {
        const double epsilon = 0.5;
        auto policy = default_policy_spec(PolicyKind::covariate, epsilon, effects.ate);
        auto rng = make_stream(3103, StreamPurpose::generic, 0);
        const int n = 100000;
        double floor = epsilon / static_cast<double>(k);
        double sigma = std::sqrt(floor * (1 - floor) / n);
        // CN stratum: out-of-class actions are reachable only through the
        // random branch, so each sits exactly at the floor (99.9% CI).
        std::vector<int> counts(k, 0);
        for (int i = 0; i < n; ++i) ++counts[choose_action(policy, effects, 0, rng)];
        for (std::size_t a : {0ul, 2ul, 3ul, 4ul, 7ul}) {
            double freq = static_cast<double>(counts[a]) / n;
            outcome.check(std::abs(freq - floor) < 3.29 * sigma,
                          "floor off for action " + std::to_string(a) + ": " + format_double(freq));
        }
    }
    if (outcome.pass) {
        outcome.detail = "uniform at eps=1 (3 sigma), zero out-of-class at eps=0, eps/k floor held";
    }
    return outcome;
}

// ---------------------------------------------------------------------------
// 4. Simulator consistency and byte-level determinism across worker counts.
Outcome criterion_4(const Context& ctx) {
    Outcome outcome;
    std::string dir1 = ctx.work + "/sim_w1", dir4 = ctx.work + "/sim_w4";
    std::string base_args = "simulate --bank " + ctx.data + "/reference_bank.json --graph " +
                            ctx.data + "/default_graph.json -N 1000 -T 5 --gamma 2 --epsilon 0.5 "
                            "--policy covariate --seed 404 --out ";
    setenv("ADSIM_WORKERS", "1", 1);
    outcome.check(run_cli(ctx, base_args + dir1) == 0, "CLI run 1 failed");
    setenv("ADSIM_WORKERS", "4", 1);
    outcome.check(run_cli(ctx, base_args + dir4) == 0, "CLI run 2 failed");
    unsetenv("ADSIM_WORKERS");
    if (!outcome.pass) return outcome;

    for (const char* name : {"observational.csv", "oracle.csv", "provenance.json"}) {
        outcome.check(read_file(dir1 + "/" + name) == read_file(dir4 + "/" + name),
                      std::string(name) + " differs across worker counts");
    }

    // Consistency identities on every generated row.
    auto graph = load_graph(ctx.data + "/default_graph.json");
    auto bank = load_bank(ctx.data + "/reference_bank.json", graph);
    SimConfig config;
    config.n_patients = 1000;
    config.horizon = 5;
    config.gamma = 2.0;
    config.epsilon = 0.5;
    config.policy = PolicyKind::covariate;
    config.seed = 404;
    auto dataset = sample_dataset(bank, graph, make_run(config));
    std::size_t rows = 0;
    for (const auto& traj : dataset.trajectories) {
        for (std::size_t t = 0; t < traj.y.size(); ++t) {
            ++rows;
            outcome.check(traj.observed_y[t] == traj.y[t][traj.action[t]], "y != y(a)");
            outcome.check(traj.y[t][0] == traj.y0[t], "y(0) != y0");
            for (std::size_t a = 0; a < traj.y[t].size(); ++a) {
                double effect = delta(dataset.run.effects, a, traj.z);
                outcome.check(traj.y[t][a] == traj.y0[t] + effect, "y(a) != y0 + delta");
                outcome.check(std::abs((traj.y[t][a] - traj.y[t][0]) - effect) <=
                                  8.0 * std::numeric_limits<double>::epsilon() *
                                      std::max(1.0, std::abs(traj.y0[t])),
                              "subtraction form beyond rounding");
            }
            if (!outcome.pass) return outcome;
        }
    }
    outcome.detail = "bit-identical CSVs with 1 vs 4 workers; consistency held on " +
                     std::to_string(rows) + " rows";
    return outcome;
}

// ---------------------------------------------------------------------------
// 5. Parameter recovery: simulate from the shipped bank, refit with `fit`.
Outcome criterion_5(const Context& ctx) {
    Outcome outcome;
    std::string sim_dir = ctx.work + "/recovery";
    outcome.check(run_cli(ctx, "simulate --bank " + ctx.data + "/reference_bank.json --graph " +
                                   ctx.data + "/default_graph.json -N 10000 -T 5 --gamma 1 "
                                   "--epsilon 1 --policy random --seed 556 --emit-cohort --out " +
                                   sim_dir) == 0,
                  "simulate failed");
    if (!outcome.pass) return outcome;
    outcome.check(run_cli(ctx, "fit --cohort " + sim_dir + "/cohort.csv --graph " + ctx.data +
                                   "/default_graph.json --holdout 0 --seed 5 --out " + sim_dir +
                                   "/refit_bank.json") == 0,
                  "fit failed");
    if (!outcome.pass) return outcome;

    auto graph = load_graph(ctx.data + "/default_graph.json");
    auto truth = load_bank(ctx.data + "/reference_bank.json", graph);
    auto refit = load_bank(sim_dir + "/refit_bank.json", graph);
    auto cohort = load_labeled_cohort(sim_dir + "/cohort.csv", graph);

    std::size_t coefficients_checked = 0;
    double worst_z = 0.0, worst_sd_rel = 0.0;
    std::string worst_name;
    for (int stage = 0; stage < 2; ++stage) {
        const auto& true_models = stage == 0 ? truth.baseline : truth.autoregressive;
        const auto& refit_models = stage == 0 ? refit.baseline : refit.autoregressive;
        for (const auto& [name, true_model] : true_models) {
            if (true_model.type != ConditionalModel::Type::linear) continue;
            const auto& fit_model = refit_models.at(name);

            // Rebuild the fitting design to get standard errors.
            std::vector<std::vector<double>> rows;
            std::vector<double> targets;
            const std::size_t target_index = graph.index_of(name);
            for (const auto& p : cohort.data.patients) {
                if (stage == 0) {
                    std::vector<double> row;
                    for (const auto& parent : true_model.parents) {
                        row.push_back(p.values[0][graph.index_of(parent.name)]);
                    }
                    rows.push_back(std::move(row));
                    targets.push_back(p.values[0][target_index]);
                } else {
                    for (std::size_t t = 1; t < p.horizon(); ++t) {
                        std::vector<double> row;
                        for (const auto& parent : true_model.parents) {
                            std::size_t at = parent.time_offset == -1 ? t - 1 : t;
                            row.push_back(p.values[at][graph.index_of(parent.name)]);
                        }
                        rows.push_back(std::move(row));
                        targets.push_back(p.values[t][target_index]);
                    }
                }
            }
            auto design = build_design(fit_model.encoder, rows);
            auto se = linear_standard_errors(design.X, fit_model.linear.noise_sd);
            for (Eigen::Index j = 0; j < se.size(); ++j) {
                double err = std::abs(fit_model.linear.coefficients[j] -
                                      true_model.linear.coefficients[j]);
                if (se[j] <= 1e-12) {
                    outcome.check(err <= 1e-9, name + " coefficient with zero SE moved");
                    continue;
                }
                ++coefficients_checked;
                double zscore = err / se[j];
                if (zscore > worst_z) {
                    worst_z = zscore;
                    worst_name = name + "/" + fit_model.feature_names()[static_cast<std::size_t>(j)];
                }
                outcome.check(zscore < 3.0, name + " coefficient " +
                                                fit_model.feature_names()[static_cast<std::size_t>(j)] +
                                                " off by " + format_double(zscore) + " SE");
            }
            double sd_rel = std::abs(fit_model.linear.noise_sd - true_model.linear.noise_sd) /
                            true_model.linear.noise_sd;
            worst_sd_rel = std::max(worst_sd_rel, sd_rel);
            outcome.check(sd_rel < 0.05, name + " noise sd off by " + format_double(100 * sd_rel) + "%");
        }
    }

    auto even_odd = even_odd_consistency(cohort, graph);
    outcome.check(even_odd.ok(), "even/odd autoregressor split disagrees at " + even_odd.worst +
                                     " (z=" + format_double(even_odd.max_z) + ")");
    if (outcome.pass) {
        outcome.detail = std::to_string(coefficients_checked) + " linear coefficients within 3 SE (worst " +
                         format_double(worst_z) + " at " + worst_name + "); noise sds within " +
                         format_double(100 * worst_sd_rel) + "%; even/odd split max z " +
                         format_double(even_odd.max_z);
    }
    return outcome;
}

// ---------------------------------------------------------------------------
// 6. Estimator ground truth: exact T-learner on noiseless-outcome data and
// the analytic ATE-plug-in PEHE.
Outcome criterion_6(const Context& ctx) {
    Outcome outcome;
    auto graph = load_graph(ctx.data + "/default_graph.json");
    auto bank = load_bank(ctx.data + "/reference_bank.json", graph);

    // Zero the outcome noise: effects become exactly recoverable.
    bank.baseline.at("ADAS13").linear.noise_sd = 0.0;
    bank.autoregressive.at("ADAS13").linear.noise_sd = 0.0;
    std::string noiseless_path = ctx.work + "/noiseless_bank.json";
    save_bank(noiseless_path, bank);

    std::string sim_dir = ctx.work + "/groundtruth";
    outcome.check(run_cli(ctx, "simulate --bank " + noiseless_path + " --graph " + ctx.data +
                                   "/default_graph.json -N 20000 -T 1 --gamma 2 --epsilon 1 "
                                   "--policy covariate --seed 606 --out " + sim_dir) == 0,
                  "simulate failed");
    if (!outcome.pass) return outcome;
    outcome.check(run_cli(ctx, "estimate --train " + sim_dir + "/observational.csv --oracle " +
                                   sim_dir + "/oracle.csv --estimator t --ts 0 --seed 1 --out " +
                                   sim_dir + "/scores.csv") == 0,
                  "estimate failed");
    if (!outcome.pass) return outcome;

    auto scores = read_csv(sim_dir + "/scores.csv");
    double macro = -1.0;
    for (const auto& row : scores.rows) {
        if (row[scores.column_index("action")] == "macro") {
            macro = *parse_double(row[scores.column_index("pehe")]);
        }
    }
    outcome.check(macro >= 0.0 && macro < 0.05,
                  "T-learner macro PEHE " + format_double(macro) + " not below 0.05");

    // ATE plug-in PEHE for action 1: analytic two-point spread, cross-checked
    // by brute-force enumeration over the generated units.
    auto oracle = oracle_units_at(read_csv(sim_dir + "/oracle.csv"), 0);
    auto effects = default_effect_spec(2.0, 0.418);
    CateEstimate plug_in;
    plug_in.unit_ids = oracle.patient_ids;
    plug_in.n_actions = effects.n_actions();
    plug_in.arm_kept.assign(effects.n_actions(), true);
    plug_in.arm_kept[0] = false;
    plug_in.ate_hat = effects.ate;
    plug_in.tau.assign(oracle.patient_ids.size(), effects.ate);
    auto plug_in_score = pehe(plug_in, oracle);

    double brute = 0.0;
    for (std::size_t i = 0; i < oracle.patient_ids.size(); ++i) {
        double diff = effects.ate[1] - oracle.delta[i][1];
        brute += diff * diff;
    }
    brute = std::sqrt(brute / static_cast<double>(oracle.patient_ids.size()));
    outcome.check(std::abs(plug_in_score.per_action[1] - brute) < 1e-9,
                  "brute-force cross-check disagrees");
    outcome.check(std::abs(plug_in_score.per_action[1] - 0.6783) < 0.02,
                  "plug-in PEHE(a=1) = " + format_double(plug_in_score.per_action[1]) +
                      ", expected 0.6783 +- 0.02");
    if (outcome.pass) {
        outcome.detail = "noiseless T-learner macro PEHE " + format_double(macro) +
                         "; plug-in PEHE(a=1) " + format_double(plug_in_score.per_action[1]) +
                         " (analytic 0.6783)";
    }
    return outcome;
}

// ---------------------------------------------------------------------------
// 7. Qualitative trend replication over the tunable knobs, 10 seeds each.
Outcome criterion_7(const Context& ctx) {
    Outcome outcome;
    auto graph = load_graph(ctx.data + "/default_graph.json");
    auto bank = load_bank(ctx.data + "/reference_bank.json", graph);

    SweepSpec base;
    base.base.horizon = 2;
    base.base.gamma = 2.0;
    base.base.epsilon = 1.0;
    base.base.policy = PolicyKind::covariate;
    base.ts = 1;
    base.seeds = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};

    auto macro_by = [&](const BenchResult& result, const std::string& value,
                        const std::string& estimator) {
        std::vector<double> values;
        for (const auto& r : result.records) {
            if (r.action != "macro" || r.knob_value != value || r.estimator != estimator) continue;
            // A cell that cannot be estimated counts as unbounded error.
            values.push_back(r.error.empty() ? r.pehe : std::numeric_limits<double>::infinity());
        }
        return values;
    };

    // (a) PEHE non-increasing in N on the default grid.
    {
        SweepSpec spec = base;
        spec.base.n_patients = 5000;
        spec.knob = Knob::n_patients;
        spec.grid = {"200", "1000", "5000", "20000"};
        spec.estimators = {"t"};
        auto result = run_sweep(bank, graph, spec);
        double previous = std::numeric_limits<double>::infinity();
        std::string trail;
        for (const auto& value : spec.grid) {
            double med = median_with_failures(macro_by(result, value, "t"));
            trail += (trail.empty() ? "" : " -> ") + format_double(med);
            outcome.check(med <= previous + 1e-12,
                          "(a) median PEHE increased at N=" + value);
            previous = med;
        }
        outcome.detail += "(a) N medians " + trail;
    }

    // (b) T-learner below S-learner at gamma in {2, 4}, per-seed.
    {
        SweepSpec spec = base;
        spec.base.n_patients = 50000;
        spec.knob = Knob::gamma;
        spec.grid = {"2", "4"};
        spec.estimators = {"s", "t"};
        auto result = run_sweep(bank, graph, spec);
        for (const auto& value : spec.grid) {
            auto s_values = macro_by(result, value, "s");
            auto t_values = macro_by(result, value, "t");
            int wins = 0;
            for (std::size_t i = 0; i < s_values.size(); ++i) {
                if (t_values[i] < s_values[i]) ++wins;
            }
            outcome.check(wins >= 9, "(b) T beat S in only " + std::to_string(wins) +
                                         "/10 seeds at gamma=" + value);
            outcome.detail += "; (b) gamma=" + value + " T wins " + std::to_string(wins) + "/10";
        }
    }

    // (c) PEHE at eps=0 at least PEHE at eps=1, S and T learners.
    {
        SweepSpec spec = base;
        spec.base.n_patients = 5000;
        spec.knob = Knob::epsilon;
        spec.grid = {"0", "0.25", "1"};
        spec.estimators = {"s", "t"};
        auto result = run_sweep(bank, graph, spec);
        for (const auto& estimator : spec.estimators) {
            double at0 = median_with_failures(macro_by(result, "0", estimator));
            double at1 = median_with_failures(macro_by(result, "1", estimator));
            outcome.check(at0 >= at1, "(c) " + estimator + ": median at eps=0 (" +
                                          format_double(at0) + ") below eps=1 (" +
                                          format_double(at1) + ")");
            outcome.detail += "; (c) " + estimator + " eps0=" + format_double(at0) +
                              " eps1=" + format_double(at1);
        }
    }

    // (d) Covariate policy at least as hard as random at eps=0.25.
    {
        SweepSpec spec = base;
        spec.base.n_patients = 5000;
        spec.base.epsilon = 0.25;
        spec.knob = Knob::policy;
        spec.grid = {"random", "covariate"};
        spec.estimators = {"t"};
        auto result = run_sweep(bank, graph, spec);
        double random_median = median_with_failures(macro_by(result, "random", "t"));
        double covariate_median = median_with_failures(macro_by(result, "covariate", "t"));
        outcome.check(covariate_median >= random_median,
                      "(d) covariate median " + format_double(covariate_median) +
                          " below random " + format_double(random_median));
        outcome.detail += "; (d) random=" + format_double(random_median) +
                          " covariate=" + format_double(covariate_median);
    }
    (void)ctx;
    return outcome;
}

// ---------------------------------------------------------------------------
// 8. Recurrent learner: gradient check and monotone descent.
Outcome criterion_8(const Context&) {
    Outcome outcome;
    auto rng = make_stream(808, StreamPurpose::generic, 0);
    std::vector<Eigen::MatrixXd> sequences;
    std::vector<double> targets;
    for (int i = 0; i < 8; ++i) {
        Eigen::MatrixXd seq(3, 2);
        for (int t = 0; t < 3; ++t) {
            seq(t, 0) = rng.normal();
            seq(t, 1) = rng.normal();
        }
        targets.push_back(0.6 * seq(2, 0) - 0.2 * seq(0, 1));
        sequences.push_back(std::move(seq));
    }

    RecurrentRegressor::Options options;
    options.hidden = 4;
    options.seed = 18;
    RecurrentRegressor model(2, options);
    auto analytic = model.gradient_view(model.loss_and_gradients(sequences, targets));
    auto params = model.parameter_view();
    double max_rel = 0.0;
    const double h = 1e-5;
    for (std::size_t j = 0; j < params.size(); ++j) {
        double orig = *params[j];
        *params[j] = orig + h;
        double up = model.loss_and_gradients(sequences, targets).loss;
        *params[j] = orig - h;
        double down = model.loss_and_gradients(sequences, targets).loss;
        *params[j] = orig;
        double numeric = (up - down) / (2.0 * h);
        max_rel = std::max(max_rel, std::abs(analytic[j] - numeric) / std::max(std::abs(numeric), 1e-8));
    }
    outcome.check(max_rel < 1e-3, "BPTT gradient relative error " + format_double(max_rel));

    RecurrentRegressor::Options train_options;
    train_options.hidden = 4;
    train_options.epochs = 300;
    train_options.learning_rate = 1e-3;
    train_options.seed = 19;
    RecurrentRegressor trainee(2, train_options);
    auto losses = trainee.train(sequences, targets);
    bool monotone = true;
    for (std::size_t e = 1; e < losses.size(); ++e) {
        if (losses[e] > losses[e - 1] + 1e-12) monotone = false;
    }
    outcome.check(monotone, "training loss increased at lr=1e-3");
    if (outcome.pass) {
        outcome.detail = "gradient max rel err " + format_double(max_rel) +
                         "; loss monotone over 300 epochs (" + format_double(losses.front()) +
                         " -> " + format_double(losses.back()) + ")";
    }
    return outcome;
}

// ---------------------------------------------------------------------------
// 9. Cohort report self-consistency against the tuned targets.
Outcome criterion_9(const Context& ctx) {
    Outcome outcome;
    auto graph = load_graph(ctx.data + "/default_graph.json");
    auto bank = load_bank(ctx.data + "/reference_bank.json", graph);

    // The shipped bank must be exactly what the generator produces.
    outcome.check(bank_to_json(bank) == bank_to_json(make_reference_bank(graph)),
                  "shipped bank is stale; run `adsim make-reference --out data`");

    SimConfig config;
    config.n_patients = 10000;
    config.horizon = 1;
    config.gamma = 1.0;
    config.epsilon = 1.0;
    config.policy = PolicyKind::random;
    config.seed = 909;
    auto dataset = sample_dataset(bank, graph, make_run(config));
    auto rows = cohort_report(cohort_table(dataset, graph, true), graph);

    double subtype_pct = -1.0, adas_mean = 0.0, adas_sd = 0.0;
    for (const auto& row : rows) {
        if (row.variable == "Subtype") subtype_pct = row.frequency;
        if (row.variable == "ADAS13") {
            adas_mean = row.mean;
            adas_sd = row.sd;
        }
    }
    outcome.check(std::abs(subtype_pct - 41.8) <= 2.0,
                  "subtype prevalence " + format_double(subtype_pct) + "% outside 41.8 +- 2");
    outcome.check(std::abs(adas_mean - 16.1) <= 0.5,
                  "ADAS13 mean " + format_double(adas_mean) + " outside 16.1 +- 0.5");
    outcome.check(std::abs(adas_sd - 8.3) <= 0.5,
                  "ADAS13 sd " + format_double(adas_sd) + " outside 8.3 +- 0.5");
    if (outcome.pass) {
        outcome.detail = "subtype " + format_double(subtype_pct) + "%, ADAS13 " +
                         format_double(adas_mean) + " (" + format_double(adas_sd) + ")";
    }
    return outcome;
}

// ---------------------------------------------------------------------------
// 10. Imputation under MCAR deletion.
Outcome criterion_10(const Context& ctx) {
    Outcome outcome;
    auto graph = load_graph(ctx.data + "/default_graph.json");
    auto bank = load_bank(ctx.data + "/reference_bank.json", graph);
    SimConfig config;
    config.n_patients = 2000;
    config.horizon = 5;
    config.gamma = 1.0;
    config.epsilon = 1.0;
    config.policy = PolicyKind::random;
    config.seed = 1010;
    auto dataset = sample_dataset(bank, graph, make_run(config));
    auto full = cohort_table(dataset, graph, /*include_z=*/false);

    // MCAR: delete 10% of cells in the imputable columns.
    std::vector<std::string> imputable{"Tau",    "PTau",          "FDG",   "AV45",
                                       "ADAS13", "MaritalStatus", "APOE4", "Education"};
    auto holed = full;
    auto rng = make_stream(2024, StreamPurpose::generic, 0);
    std::size_t deleted = 0;
    for (auto& row : holed.rows) {
        for (const auto& name : imputable) {
            if (rng.uniform01() < 0.10) {
                row[holed.column_index(name)] = "";
                ++deleted;
            }
        }
    }

    auto cohort = ingest_table(holed, graph);
    auto subtype = infer_subtypes(cohort, 7);
    auto models = fit_imputation_models(cohort, graph, subtype.labels);
    auto labeled = impute(cohort, graph, subtype.labels, models, subtype.gmm);

    // Per-variable RMSE over imputed cells vs the pre-deletion truth.
    std::size_t untouched_violations = 0, mask_size = 0;
    std::map<std::string, std::pair<double, std::size_t>> sq_errors;
    for (std::size_t i = 0; i < labeled.data.size(); ++i) {
        const auto& p = labeled.data.patients[i];
        for (std::size_t t = 0; t < p.horizon(); ++t) {
            const auto& truth_traj = dataset.trajectories[i];
            for (std::size_t v = 0; v < graph.variables.size(); ++v) {
                const auto& spec = graph.variables[v];
                if (spec.role == Role::latent) continue;
                double truth = truth_traj.values[t][v];
                if (labeled.imputed[i][t][v]) {
                    ++mask_size;
                    if (!spec.is_categorical()) {
                        auto& acc = sq_errors[spec.name];
                        acc.first += (p.values[t][v] - truth) * (p.values[t][v] - truth);
                        ++acc.second;
                    }
                } else if (p.values[t][v] != truth) {
                    ++untouched_violations;
                }
            }
        }
    }
    outcome.check(untouched_violations == 0,
                  std::to_string(untouched_violations) + " observed cells modified");
    outcome.check(mask_size == deleted, "mask does not match the deleted cells");

    std::string rmse_trail;
    for (const auto& [name, acc] : sq_errors) {
        double rmse = std::sqrt(acc.first / static_cast<double>(acc.second));
        double noise_sd = models.at(name).linear.noise_sd;
        rmse_trail += " " + name + "=" + format_double(rmse) + "/" + format_double(noise_sd);
        outcome.check(rmse <= 1.1 * noise_sd,
                      name + " imputation RMSE " + format_double(rmse) + " above 1.1 x " +
                          format_double(noise_sd));
    }
    if (outcome.pass) {
        outcome.detail = std::to_string(deleted) + " cells deleted; RMSE/noise_sd:" + rmse_trail;
    }
    return outcome;
}

}  // namespace

int main(int argc, char** argv) {
    Context ctx;
    std::vector<int> selected;
    for (int i = 1; i < argc; ++i) {
        std::string arg = argv[i];
        if (arg == "--cli" && i + 1 < argc) {
            ctx.cli = argv[++i];
        } else if (arg == "--data" && i + 1 < argc) {
            ctx.data = argv[++i];
        } else if (arg == "--work" && i + 1 < argc) {
            ctx.work = argv[++i];
        } else {
            selected.push_back(std::atoi(arg.c_str()));
        }
    }
    if (ctx.cli.empty() || ctx.data.empty()) {
        std::cerr << "usage: acceptance --cli <adsim binary> --data <data dir> [--work <dir>] "
                     "[criteria...]\n";
        return 2;
    }
    if (ctx.work.empty()) ctx.work = "acceptance_work";
    std::filesystem::create_directories(ctx.work);

    struct Criterion {
        int number;
        const char* title;
        std::function<Outcome(const Context&)> run;
    };
    std::vector<Criterion> criteria{
        {1, "effect closure identities (exact)", criterion_1},
        {2, "treatment-effect table fidelity", criterion_2},
        {3, "overlap knob behavior", criterion_3},
        {4, "simulator consistency and determinism", criterion_4},
        {5, "parameter recovery through the fit pipeline", criterion_5},
        {6, "estimator ground truth", criterion_6},
        {7, "benchmark trend replication", criterion_7},
        {8, "recurrent learner gradient and descent", criterion_8},
        {9, "cohort report self-consistency", criterion_9},
        {10, "imputation under MCAR deletion", criterion_10},
    };

    int failures = 0;
    for (const auto& criterion : criteria) {
        if (!selected.empty() &&
            std::find(selected.begin(), selected.end(), criterion.number) == selected.end()) {
            continue;
        }
        Outcome outcome;
        try {
            outcome = criterion.run(ctx);
        } catch (const std::exception& e) {
            outcome.pass = false;
            outcome.detail = std::string("exception: ") + e.what();
        }
        std::cout << (outcome.pass ? "[PASS]" : "[FAIL]") << " criterion " << criterion.number
                  << ": " << criterion.title;
        if (!outcome.detail.empty()) std::cout << " | " << outcome.detail;
        std::cout << "\n";
        if (!outcome.pass) ++failures;
    }
    return failures == 0 ? 0 : 1;
}
