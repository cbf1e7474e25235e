#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "adsim/errors.hpp"
#include "adsim/rng.hpp"

namespace adsim {

struct ActionSet {
    std::vector<std::string> names;  // names[0] is the no-treatment action

    std::size_t size() const { return names.size(); }

    void check() const {
        if (names.size() < 2) throw ConfigError("InvalidActions", "need at least 2 actions");
        for (std::size_t i = 0; i < names.size(); ++i) {
            for (std::size_t j = i + 1; j < names.size(); ++j) {
                if (names[i] == names[j]) {
                    throw ConfigError("InvalidActions", "duplicate action name '" + names[i] + "'");
                }
            }
        }
    }
};

// Treatments and mean effects on the ADAS-Cog change scale (negative is
// improved cognition), from meta-analyses of the corresponding trials.
inline ActionSet default_action_set() {
    return ActionSet{{"No treatment", "Donepezil 5 mg", "Donepezil 10 mg", "Galantamine 24 mg",
                      "Galantamine 32 mg", "Rivastigmine 12 mg", "Memantine 20 mg",
                      "Memantine + ChEI"}};
}

inline std::vector<double> default_ate_table() {
    return {0.0, -1.95, -2.48, -3.03, -3.20, -2.01, -1.29, -2.64};
}

// Per-action mean effects plus the subtype-heterogeneity construction: each
// (action, subtype) pair is HIGH or LOW with multiplicative margin gamma,
// the opposite subtype having the opposite designation, scaled so the
// population mean stays at ate[a] for any gamma and subtype prior.
struct EffectSpec {
    ActionSet actions;
    std::vector<double> ate;          // ate[0] == 0
    std::vector<std::array<bool, 2>> high;  // high[a][z] for a >= 1 (index a-1)
    double gamma = 1.0;
    double z_prior = 0.418;  // p(Z = 1)

    std::size_t n_actions() const { return actions.size(); }

    void check() const {
        actions.check();
        if (ate.size() != actions.size()) {
            throw ConfigError("InvalidEffects", "ATE table length must equal action count");
        }
        if (ate[0] != 0.0) throw ConfigError("InvalidEffects", "ate[0] must be 0 (no-treatment)");
        if (high.size() != actions.size() - 1) {
            throw ConfigError("InvalidEffects", "need one HIGH/LOW row per action >= 1");
        }
        for (std::size_t a = 1; a < actions.size(); ++a) {
            if (high[a - 1][0] == high[a - 1][1]) {
                throw ConfigError("InvalidEffects",
                                  "action " + std::to_string(a) + " must be HIGH for exactly one subtype");
            }
        }
        if (!(gamma >= 1.0)) throw ConfigError("InvalidEffects", "gamma must be >= 1");
        if (!(z_prior > 0.0 && z_prior < 1.0)) {
            throw ConfigError("InvalidEffects", "z_prior must lie in (0,1)");
        }
    }

    bool is_high(std::size_t action, int z) const { return high[action - 1][static_cast<std::size_t>(z)]; }
};

// Alternating HIGH/LOW default: each subtype gets the stronger response on
// roughly half the drugs.
inline std::vector<std::array<bool, 2>> alternating_hilo(std::size_t n_actions) {
    std::vector<std::array<bool, 2>> high;
    for (std::size_t a = 1; a < n_actions; ++a) {
        bool z0_high = (a % 2) == 0;
        high.push_back({z0_high, !z0_high});
    }
    return high;
}

inline EffectSpec default_effect_spec(double gamma = 1.0, double z_prior = 0.418) {
    EffectSpec spec;
    spec.actions = default_action_set();
    spec.ate = default_ate_table();
    spec.high = alternating_hilo(spec.actions.size());
    spec.gamma = gamma;
    spec.z_prior = z_prior;
    return spec;
}

// Subtype-conditional effect. Both branches share the denominator
// p_high * gamma + p_low, which makes p(z) * delta(a,z) + p(1-z) * delta(a,1-z)
// equal ate[a] identically and delta_high / delta_low equal gamma.
inline double delta(const EffectSpec& spec, std::size_t action, int z) {
    if (action == 0) return 0.0;
    double p_same = z == 1 ? spec.z_prior : 1.0 - spec.z_prior;
    double p_other = 1.0 - p_same;
    if (spec.is_high(action, z)) {
        return spec.gamma * spec.ate[action] / (p_same * spec.gamma + p_other);
    }
    return spec.ate[action] / (p_same + p_other * spec.gamma);
}

inline const std::vector<double>& ate(const EffectSpec& spec) { return spec.ate; }

// Heterogeneity is fully mediated by the subtype, so CATE given z is delta.
inline double cate(const EffectSpec& spec, std::size_t action, int z) { return delta(spec, action, z); }

enum class PolicyKind { random, covariate };

struct PolicySpec {
    PolicyKind kind = PolicyKind::covariate;
    double epsilon = 0.5;
    // Diagnosis level index -> effect-class index (0 smallest |ate|, 2 largest).
    std::vector<std::size_t> diagnosis_class_map;
    // Partition of actions 1..k-1 into 3 classes ordered by effect size.
    std::vector<std::vector<std::size_t>> action_classes;

    void check(std::size_t n_actions, std::size_t n_diagnosis_levels) const {
        if (!(epsilon >= 0.0 && epsilon <= 1.0)) {
            throw ConfigError("InvalidPolicy", "epsilon must lie in [0,1]");
        }
        if (action_classes.size() != 3) throw ConfigError("InvalidPolicy", "expected 3 action classes");
        std::vector<bool> seen(n_actions, false);
        for (const auto& cls : action_classes) {
            if (cls.empty()) throw ConfigError("InvalidPolicy", "empty action class");
            for (auto a : cls) {
                if (a == 0 || a >= n_actions) throw ConfigError("InvalidPolicy", "action out of range");
                if (seen[a]) throw ConfigError("InvalidPolicy", "action assigned to two classes");
                seen[a] = true;
            }
        }
        for (std::size_t a = 1; a < n_actions; ++a) {
            if (!seen[a]) {
                throw ConfigError("InvalidPolicy", "action " + std::to_string(a) + " not in any class");
            }
        }
        if (diagnosis_class_map.size() != n_diagnosis_levels) {
            throw ConfigError("InvalidPolicy", "diagnosis map must cover all diagnosis levels");
        }
        for (auto c : diagnosis_class_map) {
            if (c >= 3) throw ConfigError("InvalidPolicy", "class index out of range");
        }
    }
};

// Actions 1..k-1 sorted by |ate| ascending and split into three classes
// (ceil-sized from the front), matching the grouping of treatments by
// effect magnitude.
inline std::vector<std::vector<std::size_t>> tertile_action_classes(const std::vector<double>& ate_table) {
    std::vector<std::size_t> order(ate_table.size() - 1);
    std::iota(order.begin(), order.end(), std::size_t{1});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return std::abs(ate_table[a]) < std::abs(ate_table[b]);
    });
    std::vector<std::vector<std::size_t>> classes(3);
    std::size_t remaining = order.size();
    std::size_t pos = 0;
    for (std::size_t c = 0; c < 3; ++c) {
        std::size_t take = (remaining + (2 - c)) / (3 - c);  // ceil(remaining / (3 - c))
        for (std::size_t i = 0; i < take; ++i) classes[c].push_back(order[pos++]);
        remaining -= take;
    }
    return classes;
}

// CN -> smallest-effect class, MCI -> moderate, Dementia -> largest.
inline PolicySpec default_policy_spec(PolicyKind kind, double epsilon,
                                      const std::vector<double>& ate_table) {
    PolicySpec spec;
    spec.kind = kind;
    spec.epsilon = epsilon;
    spec.diagnosis_class_map = {0, 1, 2};
    spec.action_classes = tertile_action_classes(ate_table);
    return spec;
}

// Draws one action. Always consumes exactly two rng values (branch, pick)
// so trajectory streams stay aligned for any epsilon. The random branch is
// uniform over all k actions including no-treatment, which puts an exact
// epsilon/k floor under every (diagnosis, action) assignment probability.
inline std::size_t choose_action(const PolicySpec& policy, const EffectSpec& effect,
                                 std::size_t prev_diagnosis_level, RngStream& rng) {
    double branch = rng.uniform01();
    double pick = rng.uniform01();
    const std::size_t k = effect.n_actions();
    bool random_branch = policy.kind == PolicyKind::random || branch < policy.epsilon;
    if (random_branch) {
        auto i = static_cast<std::size_t>(pick * static_cast<double>(k));
        return i < k ? i : k - 1;
    }
    const auto& cls = policy.action_classes.at(policy.diagnosis_class_map.at(prev_diagnosis_level));
    auto i = static_cast<std::size_t>(pick * static_cast<double>(cls.size()));
    return cls[i < cls.size() ? i : cls.size() - 1];
}

// --- JSON configuration -----------------------------------------------------

inline nlohmann::json effect_spec_to_json(const EffectSpec& spec) {
    nlohmann::json j;
    j["actions"] = spec.actions.names;
    j["ate"] = spec.ate;
    nlohmann::json hilo = nlohmann::json::array();
    for (const auto& row : spec.high) {
        hilo.push_back(nlohmann::json::array(
            {row[0] ? "high" : "low", row[1] ? "high" : "low"}));
    }
    j["hilo"] = hilo;
    j["gamma"] = spec.gamma;
    j["z_prior"] = spec.z_prior;
    return j;
}

inline EffectSpec effect_spec_from_json(const nlohmann::json& j) {
    EffectSpec spec = default_effect_spec();
    try {
        if (j.contains("actions")) spec.actions.names = j["actions"].get<std::vector<std::string>>();
        if (j.contains("ate")) spec.ate = j["ate"].get<std::vector<double>>();
        if (j.contains("hilo")) {
            spec.high.clear();
            for (const auto& row : j["hilo"]) {
                spec.high.push_back({row.at(0).get<std::string>() == "high",
                                     row.at(1).get<std::string>() == "high"});
            }
        } else if (j.contains("actions") || j.contains("ate")) {
            spec.high = alternating_hilo(spec.actions.size());
        }
        if (j.contains("gamma")) spec.gamma = j["gamma"].get<double>();
        if (j.contains("z_prior")) spec.z_prior = j["z_prior"].get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("InvalidEffects", std::string("malformed effects JSON: ") + e.what());
    }
    spec.check();
    return spec;
}

}  // namespace adsim
