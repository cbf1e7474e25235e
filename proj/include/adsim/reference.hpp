#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "adsim/graph.hpp"
#include "adsim/model_bank.hpp"

namespace adsim {

// Default single-step graph shipped with the simulator: the subtype feeds
// every biomarker and the outcome, biomarkers feed the outcome, the outcome
// feeds diagnosis, APOE4 and Race drive Tau, and demographics are roots.
// This is a defensible reconstruction rather than clinical ground truth;
// edit the JSON export of this graph to experiment with alternatives.
inline CausalGraph default_graph() {
    CausalGraph g;
    auto cat = [](std::string name, std::vector<std::string> levels, Temporal temporal, Role role,
                  bool numeric_parent = false) {
        VariableSpec v;
        v.name = std::move(name);
        v.kind = VarKind::categorical;
        v.levels = std::move(levels);
        v.temporal = temporal;
        v.role = role;
        v.numeric_parent = numeric_parent;
        return v;
    };
    auto cont = [](std::string name, Temporal temporal, Role role) {
        VariableSpec v;
        v.name = std::move(name);
        v.kind = VarKind::continuous;
        v.temporal = temporal;
        v.role = role;
        return v;
    };

    // Z first so ancestral sampling draws the subtype before everything else.
    g.variables.push_back(cat("Z", {"0", "1"}, Temporal::static_, Role::latent));
    g.variables.push_back(cat("Gender", {"Female", "Male"}, Temporal::static_, Role::covariate));
    g.variables.push_back(cat("Ethnicity", {"Hisp/Latino", "Not Hisp/Latino", "Unknown"},
                              Temporal::static_, Role::covariate));
    g.variables.push_back(cat("Race",
                              {"Am Indian/Alaskan", "Asian", "Black", "Hawaiian/Other PI",
                               "More than one", "Unknown", "White"},
                              Temporal::static_, Role::covariate));
    g.variables.push_back(cat("APOE4", {"0", "1", "2"}, Temporal::dynamic, Role::covariate));
    g.variables.push_back(cat("Education",
                              {"8", "9", "10", "11", "12", "13", "14", "15", "16", "17", "18", "19",
                               "20"},
                              Temporal::dynamic, Role::covariate, /*numeric_parent=*/true));
    g.variables.push_back(cat("MaritalStatus",
                              {"Divorced", "Married", "Never married", "Unknown", "Widowed"},
                              Temporal::dynamic, Role::covariate));
    g.variables.push_back(cont("Tau", Temporal::dynamic, Role::covariate));
    g.variables.push_back(cont("PTau", Temporal::dynamic, Role::covariate));
    g.variables.push_back(cont("FDG", Temporal::dynamic, Role::covariate));
    g.variables.push_back(cont("AV45", Temporal::dynamic, Role::covariate));
    g.variables.push_back(cont("ADAS13", Temporal::dynamic, Role::outcome));
    g.variables.push_back(cat("Diagnosis", {"CN", "MCI", "Dementia"}, Temporal::dynamic, Role::diagnosis));

    g.edges = {
        {"APOE4", "Tau"}, {"Race", "Tau"}, {"Z", "Tau"},
        {"Z", "PTau"},    {"Z", "FDG"},    {"Z", "AV45"},
        {"Z", "ADAS13"},  {"Tau", "ADAS13"}, {"PTau", "ADAS13"},
        {"FDG", "ADAS13"}, {"AV45", "ADAS13"}, {"ADAS13", "Diagnosis"},
    };
    g.latent_name = "Z";
    return g;
}

namespace detail {

inline ConditionalModel manual_linear(const CausalGraph& graph, const std::string& target, int time,
                                      const std::map<std::string, double>& coefs, double noise_sd) {
    ConditionalModel model;
    model.target = target;
    model.type = ConditionalModel::Type::linear;
    model.parents = parents_at(graph, target, time).parents;
    model.encoder = Encoder(graph, model.parents, target);
    const auto& names = model.encoder.column_names();
    model.linear.coefficients = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(names.size()));
    for (const auto& [name, value] : coefs) {
        auto it = std::find(names.begin(), names.end(), name);
        if (it == names.end()) throw InternalError("ReferenceBank", "unknown feature '" + name + "'");
        model.linear.coefficients[it - names.begin()] = value;
    }
    model.linear.noise_sd = noise_sd;
    model.linear.rank = static_cast<Eigen::Index>(names.size());
    return model;
}

inline ConditionalModel manual_logistic(const CausalGraph& graph, const std::string& target, int time,
                                        const std::vector<std::map<std::string, double>>& rows) {
    ConditionalModel model;
    model.target = target;
    model.type = ConditionalModel::Type::logistic;
    model.parents = parents_at(graph, target, time).parents;
    model.encoder = Encoder(graph, model.parents, target);
    const auto& spec = graph.variable(target);
    const auto& names = model.encoder.column_names();
    if (rows.size() != spec.levels.size() - 1) {
        throw InternalError("ReferenceBank", "need one weight row per non-reference class of " + target);
    }
    model.logistic.class_labels = spec.levels;
    model.logistic.weights =
        Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()),
                              static_cast<Eigen::Index>(names.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (const auto& [name, value] : rows[r]) {
            auto it = std::find(names.begin(), names.end(), name);
            if (it == names.end()) {
                throw InternalError("ReferenceBank", "unknown feature '" + name + "'");
            }
            model.logistic.weights(static_cast<Eigen::Index>(r), it - names.begin()) = value;
        }
    }
    model.logistic.converged = true;
    return model;
}

// Intercept-only multinomial logistic with the given marginal distribution.
inline ConditionalModel marginal_logistic(const CausalGraph& graph, const std::string& target,
                                          int time, const std::vector<double>& probs) {
    const auto& spec = graph.variable(target);
    std::vector<std::map<std::string, double>> rows;
    for (std::size_t l = 1; l < spec.levels.size(); ++l) {
        rows.push_back({{"(intercept)", std::log(probs[l] / probs[0])}});
    }
    return manual_logistic(graph, target, time, rows);
}

// Sticky autoregressive classifier: every class leans strongly towards its
// previous value.
inline ConditionalModel sticky_logistic(const CausalGraph& graph, const std::string& target,
                                        double away, double stay) {
    const auto& spec = graph.variable(target);
    std::vector<std::map<std::string, double>> rows;
    for (std::size_t l = 1; l < spec.levels.size(); ++l) {
        std::map<std::string, double> row{{"(intercept)", -away}};
        row[target + "[t-1]=" + spec.levels[l]] = stay;
        rows.push_back(std::move(row));
    }
    return manual_logistic(graph, target, 1, rows);
}

}  // namespace detail

// Parameters of the shipped synthetic reference bank. Everything below is
// hand-calibrated so that a large first-visit sample reproduces the target
// cohort statistics (subtype prevalence 41.8%, ADAS13 mean 16.1 sd 8.3,
// biomarker means/sds in the published ranges). The data are synthetic: no
// real patient records are embedded anywhere in this repository.
struct ReferenceParams {
    double z_prior = 0.418;

    // Amyloid ratio mixture (upper mode = subtype 1).
    std::array<double, 2> abeta_means{0.055, 0.095};
    std::array<double, 2> abeta_sds{0.008, 0.010};

    std::array<double, 3> apoe_probs{0.556, 0.352, 0.091};  // renormalized below

    double tau_intercept = 236.4;
    std::array<double, 3> tau_apoe{0.0, 30.0, 60.0};
    double tau_z = 80.0;
    double tau_noise = 115.0;

    double ptau_intercept = 21.03, ptau_z = 15.0, ptau_noise = 11.0;
    double fdg_intercept = 1.2836, fdg_z = -0.2, fdg_noise = 0.18;
    double av45_intercept = 1.0495, av45_z = 0.36, av45_noise = 0.25;

    double adas_z = 2.0, adas_tau = 0.02, adas_ptau = 0.05, adas_fdg = -8.0, adas_av45 = 6.0;
    double adas_target_mean = 16.1, adas_target_sd = 8.3;

    double diag_slope_mci = 0.10, diag_slope_dem = 0.30;
    std::array<double, 3> diag_targets{0.339, 0.158, 0.503};  // CN, MCI, Dementia

    // Autoregressive persistence.
    double biomarker_rho = 0.9;
    double adas_rho = 0.8;
    double adas_drift = 0.3;  // per-step worsening on top of the stationary mean
};

// Derived quantities shared by the bank builder and by tests that verify
// the calibration analytically.
struct ReferenceMoments {
    std::array<double, 3> apoe_probs;
    double apoe_mean_shift;  // E[tau_apoe]
    double apoe_var;
    double tau_mean, ptau_mean, fdg_mean, av45_mean;
    double adas_intercept;
    double adas_noise;
    double adas_mean_z0;       // E[ADAS13 | Z=0]
    double adas_delta_z;       // E[ADAS13 | Z=1] - E[ADAS13 | Z=0]
    double adas_cond_sd;       // sd of ADAS13 given (Z, APOE4)
};

inline ReferenceMoments reference_moments(const ReferenceParams& p = {}) {
    ReferenceMoments m;
    double total = p.apoe_probs[0] + p.apoe_probs[1] + p.apoe_probs[2];
    for (std::size_t i = 0; i < 3; ++i) m.apoe_probs[i] = p.apoe_probs[i] / total;

    m.apoe_mean_shift = 0.0;
    double second = 0.0;
    for (std::size_t i = 0; i < 3; ++i) {
        m.apoe_mean_shift += m.apoe_probs[i] * p.tau_apoe[i];
        second += m.apoe_probs[i] * p.tau_apoe[i] * p.tau_apoe[i];
    }
    m.apoe_var = second - m.apoe_mean_shift * m.apoe_mean_shift;

    m.tau_mean = p.tau_intercept + m.apoe_mean_shift + p.tau_z * p.z_prior;
    m.ptau_mean = p.ptau_intercept + p.ptau_z * p.z_prior;
    m.fdg_mean = p.fdg_intercept + p.fdg_z * p.z_prior;
    m.av45_mean = p.av45_intercept + p.av45_z * p.z_prior;

    double lin_mean = p.adas_z * p.z_prior + p.adas_tau * m.tau_mean + p.adas_ptau * m.ptau_mean +
                      p.adas_fdg * m.fdg_mean + p.adas_av45 * m.av45_mean;
    m.adas_intercept = p.adas_target_mean - lin_mean;

    double var_within = p.adas_tau * p.adas_tau * (p.tau_noise * p.tau_noise + m.apoe_var) +
                        p.adas_ptau * p.adas_ptau * p.ptau_noise * p.ptau_noise +
                        p.adas_fdg * p.adas_fdg * p.fdg_noise * p.fdg_noise +
                        p.adas_av45 * p.adas_av45 * p.av45_noise * p.av45_noise;
    m.adas_delta_z = p.adas_z + p.adas_tau * p.tau_z + p.adas_ptau * p.ptau_z +
                     p.adas_fdg * p.fdg_z + p.adas_av45 * p.av45_z;
    double var_between = m.adas_delta_z * m.adas_delta_z * p.z_prior * (1.0 - p.z_prior);
    double noise_var = p.adas_target_sd * p.adas_target_sd - var_within - var_between;
    if (noise_var <= 0.0) throw InternalError("ReferenceBank", "ADAS13 targets are not attainable");
    m.adas_noise = std::sqrt(noise_var);

    m.adas_mean_z0 = m.adas_intercept + p.adas_tau * (p.tau_intercept + m.apoe_mean_shift) +
                     p.adas_ptau * p.ptau_intercept + p.adas_fdg * p.fdg_intercept +
                     p.adas_av45 * p.av45_intercept;
    // Conditional on (Z, APOE4) the remaining spread excludes the APOE4 term.
    m.adas_cond_sd = std::sqrt(var_within - p.adas_tau * p.adas_tau * m.apoe_var + noise_var);
    return m;
}

namespace detail {

// Calibrates the two diagnosis intercepts so the first-visit marginals hit
// the targets, integrating the per-(Z, APOE4) normal mixture of ADAS13.
inline std::array<double, 2> calibrate_diagnosis_intercepts(const ReferenceParams& p,
                                                            const ReferenceMoments& m) {
    struct Component {
        double weight, mean;
    };
    std::vector<Component> components;
    for (int z = 0; z <= 1; ++z) {
        for (std::size_t a = 0; a < 3; ++a) {
            double weight = (z == 1 ? p.z_prior : 1.0 - p.z_prior) * m.apoe_probs[a];
            double mean = m.adas_mean_z0 + p.adas_tau * (p.tau_apoe[a] - m.apoe_mean_shift) +
                          m.adas_delta_z * z;
            components.push_back({weight, mean});
        }
    }

    double lo = components.front().mean, hi = components.front().mean;
    for (const auto& c : components) {
        lo = std::min(lo, c.mean);
        hi = std::max(hi, c.mean);
    }
    lo -= 8.0 * m.adas_cond_sd;
    hi += 8.0 * m.adas_cond_sd;
    const int n_grid = 1601;
    const double step = (hi - lo) / (n_grid - 1);

    double a_mci = -2.6, a_dem = -4.4;
    for (int iter = 0; iter < 200; ++iter) {
        double p_mci = 0.0, p_dem = 0.0;
        for (int g = 0; g < n_grid; ++g) {
            double x = lo + g * step;
            double density = 0.0;
            for (const auto& c : components) {
                double zscore = (x - c.mean) / m.adas_cond_sd;
                density += c.weight * std::exp(-0.5 * zscore * zscore) /
                           (m.adas_cond_sd * std::sqrt(2.0 * M_PI));
            }
            double trapezoid = (g == 0 || g == n_grid - 1) ? 0.5 : 1.0;
            double s_mci = a_mci + p.diag_slope_mci * x;
            double s_dem = a_dem + p.diag_slope_dem * x;
            double mx = std::max({0.0, s_mci, s_dem});
            double e0 = std::exp(-mx), e1 = std::exp(s_mci - mx), e2 = std::exp(s_dem - mx);
            double denom = e0 + e1 + e2;
            p_mci += trapezoid * density * step * e1 / denom;
            p_dem += trapezoid * density * step * e2 / denom;
        }
        double adj_mci = std::log(p.diag_targets[1] / p_mci);
        double adj_dem = std::log(p.diag_targets[2] / p_dem);
        a_mci += adj_mci;
        a_dem += adj_dem;
        if (std::abs(adj_mci) < 1e-10 && std::abs(adj_dem) < 1e-10) break;
    }
    return {a_mci, a_dem};
}

}  // namespace detail

// The shipped synthetic reference bank (see ReferenceParams for targets).
inline ModelBank make_reference_bank(const CausalGraph& graph, const ReferenceParams& p = {}) {
    const ReferenceMoments m = reference_moments(p);
    ModelBank bank;
    bank.graph_hash = graph_hash(graph);
    bank.gmm.weights = {1.0 - p.z_prior, p.z_prior};
    bank.gmm.means = p.abeta_means;
    bank.gmm.sds = p.abeta_sds;
    bank.split = "train";
    bank.seed = 0;

    using detail::manual_linear;
    using detail::manual_logistic;
    using detail::marginal_logistic;
    using detail::sticky_logistic;

    // --- baseline (t = 0) ----------------------------------------------
    bank.baseline.emplace("Gender", marginal_logistic(graph, "Gender", 0, {0.458, 0.542}));
    bank.baseline.emplace("Ethnicity",
                          marginal_logistic(graph, "Ethnicity", 0, {0.034, 0.960, 0.006}));
    bank.baseline.emplace(
        "Race", marginal_logistic(graph, "Race", 0,
                                  {0.926, 0.037, 0.015, 0.002, 0.016, 0.003, 0.002}));
    bank.baseline.emplace("APOE4", marginal_logistic(graph, "APOE4", 0,
                                                     {m.apoe_probs[0], m.apoe_probs[1], m.apoe_probs[2]}));
    bank.baseline.emplace("MaritalStatus",
                          marginal_logistic(graph, "MaritalStatus", 0,
                                            {0.765, 0.032, 0.112, 0.084, 0.007}));

    {
        // Discretized normal over the years-of-education levels.
        const auto& levels = graph.variable("Education").levels;
        const double mu = 13.2, sigma = 2.7;
        std::vector<double> probs(levels.size());
        auto phi = [](double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); };
        for (std::size_t l = 0; l < levels.size(); ++l) {
            double years = std::stod(levels[l]);
            double upper = l + 1 < levels.size() ? phi((years + 0.5 - mu) / sigma) : 1.0;
            double lower = l > 0 ? phi((years - 0.5 - mu) / sigma) : 0.0;
            probs[l] = upper - lower;
        }
        bank.baseline.emplace("Education", marginal_logistic(graph, "Education", 0, probs));
    }

    bank.baseline.emplace("Tau", manual_linear(graph, "Tau", 0,
                                               {{"(intercept)", p.tau_intercept},
                                                {"APOE4=1", p.tau_apoe[1]},
                                                {"APOE4=2", p.tau_apoe[2]},
                                                {"Z=1", p.tau_z}},
                                               p.tau_noise));
    bank.baseline.emplace("PTau", manual_linear(graph, "PTau", 0,
                                                {{"(intercept)", p.ptau_intercept}, {"Z=1", p.ptau_z}},
                                                p.ptau_noise));
    bank.baseline.emplace("FDG", manual_linear(graph, "FDG", 0,
                                               {{"(intercept)", p.fdg_intercept}, {"Z=1", p.fdg_z}},
                                               p.fdg_noise));
    bank.baseline.emplace("AV45", manual_linear(graph, "AV45", 0,
                                                {{"(intercept)", p.av45_intercept}, {"Z=1", p.av45_z}},
                                                p.av45_noise));
    bank.baseline.emplace("ADAS13", manual_linear(graph, "ADAS13", 0,
                                                  {{"(intercept)", m.adas_intercept},
                                                   {"Z=1", p.adas_z},
                                                   {"Tau", p.adas_tau},
                                                   {"PTau", p.adas_ptau},
                                                   {"FDG", p.adas_fdg},
                                                   {"AV45", p.adas_av45}},
                                                  m.adas_noise));

    auto diag_intercepts = detail::calibrate_diagnosis_intercepts(p, m);
    bank.baseline.emplace(
        "Diagnosis",
        manual_logistic(graph, "Diagnosis", 0,
                        {{{"(intercept)", diag_intercepts[0]}, {"ADAS13", p.diag_slope_mci}},
                         {{"(intercept)", diag_intercepts[1]}, {"ADAS13", p.diag_slope_dem}}}));

    // --- autoregression (t >= 1) ----------------------------------------
    // Continuous dynamics keep the baseline conditional distribution
    // stationary: coefficients scale by (1 - rho) and the innovation sd is
    // noise * sqrt(1 - rho^2).
    const double br = p.biomarker_rho;
    const double bshrink = 1.0 - br;
    const double bnoise = std::sqrt(1.0 - br * br);
    bank.autoregressive.emplace("Tau", manual_linear(graph, "Tau", 1,
                                                     {{"(intercept)", p.tau_intercept * bshrink},
                                                      {"APOE4=1", p.tau_apoe[1] * bshrink},
                                                      {"APOE4=2", p.tau_apoe[2] * bshrink},
                                                      {"Z=1", p.tau_z * bshrink},
                                                      {"Tau[t-1]", br}},
                                                     p.tau_noise * bnoise));
    bank.autoregressive.emplace(
        "PTau", manual_linear(graph, "PTau", 1,
                              {{"(intercept)", p.ptau_intercept * bshrink},
                               {"Z=1", p.ptau_z * bshrink},
                               {"PTau[t-1]", br}},
                              p.ptau_noise * bnoise));
    bank.autoregressive.emplace("FDG", manual_linear(graph, "FDG", 1,
                                                     {{"(intercept)", p.fdg_intercept * bshrink},
                                                      {"Z=1", p.fdg_z * bshrink},
                                                      {"FDG[t-1]", br}},
                                                     p.fdg_noise * bnoise));
    bank.autoregressive.emplace("AV45", manual_linear(graph, "AV45", 1,
                                                      {{"(intercept)", p.av45_intercept * bshrink},
                                                       {"Z=1", p.av45_z * bshrink},
                                                       {"AV45[t-1]", br}},
                                                      p.av45_noise * bnoise));
    const double ar = p.adas_rho;
    const double ashrink = 1.0 - ar;
    bank.autoregressive.emplace(
        "ADAS13", manual_linear(graph, "ADAS13", 1,
                                {{"(intercept)", m.adas_intercept * ashrink + p.adas_drift},
                                 {"Z=1", p.adas_z * ashrink},
                                 {"Tau", p.adas_tau * ashrink},
                                 {"PTau", p.adas_ptau * ashrink},
                                 {"FDG", p.adas_fdg * ashrink},
                                 {"AV45", p.adas_av45 * ashrink},
                                 {"ADAS13[t-1]", ar}},
                                m.adas_noise * std::sqrt(1.0 - ar * ar)));

    bank.autoregressive.emplace("APOE4", sticky_logistic(graph, "APOE4", 7.0, 14.0));
    bank.autoregressive.emplace("Education", sticky_logistic(graph, "Education", 6.0, 12.0));
    bank.autoregressive.emplace("MaritalStatus", sticky_logistic(graph, "MaritalStatus", 4.5, 9.0));
    bank.autoregressive.emplace(
        "Diagnosis",
        manual_logistic(graph, "Diagnosis", 1,
                        {{{"(intercept)", diag_intercepts[0] - 1.2},
                          {"ADAS13", p.diag_slope_mci},
                          {"Diagnosis[t-1]=MCI", 2.2},
                          {"Diagnosis[t-1]=Dementia", 1.0}},
                         {{"(intercept)", diag_intercepts[1] - 1.8},
                          {"ADAS13", p.diag_slope_dem},
                          {"Diagnosis[t-1]=MCI", 0.8},
                          {"Diagnosis[t-1]=Dementia", 3.2}}}));

    validate_bank(bank, graph);
    return bank;
}

}  // namespace adsim
