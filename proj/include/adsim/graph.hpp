#pragma once

#include <algorithm>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "adsim/csv.hpp"
#include "adsim/errors.hpp"

namespace adsim {

enum class VarKind { continuous, categorical };
enum class Temporal { static_, dynamic };
enum class Role { covariate, outcome, diagnosis, latent };

struct VariableSpec {
    std::string name;
    VarKind kind = VarKind::continuous;
    std::vector<std::string> levels;  // categorical only, declaration order
    Temporal temporal = Temporal::dynamic;
    Role role = Role::covariate;
    // Categorical variable whose levels are numeric labels; when it appears
    // as a parent it enters the design as a single numeric column instead of
    // a one-hot block (Education).
    bool numeric_parent = false;

    bool is_categorical() const { return kind == VarKind::categorical; }
    bool is_static() const { return temporal == Temporal::static_; }

    std::size_t level_index(std::string_view value) const {
        for (std::size_t i = 0; i < levels.size(); ++i) {
            if (levels[i] == value) return i;
        }
        throw CellTypeError("value '" + std::string(value) + "' is not a declared level of " + name);
    }
};

struct ParentRef {
    std::string name;
    int time_offset = 0;  // 0 = same step, -1 = previous step
    bool operator==(const ParentRef&) const = default;
};

struct UnrolledParents {
    std::string child;
    int time = 0;
    std::vector<ParentRef> parents;
};

struct ValidationIssue {
    std::string code;
    std::string message;
};

struct ValidationReport {
    std::vector<ValidationIssue> issues;
    bool ok() const { return issues.empty(); }
    std::string to_string() const {
        std::string out;
        for (const auto& issue : issues) {
            out += issue.code + ": " + issue.message + "\n";
        }
        return out;
    }
};

class CausalGraph {
public:
    std::vector<VariableSpec> variables;
    std::vector<std::pair<std::string, std::string>> edges;  // (parent, child)
    std::string latent_name;

    const VariableSpec& variable(std::string_view name) const {
        for (const auto& v : variables) {
            if (v.name == name) return v;
        }
        throw UnknownVariable("no variable named '" + std::string(name) + "'");
    }

    bool has_variable(std::string_view name) const {
        return std::any_of(variables.begin(), variables.end(),
                           [&](const VariableSpec& v) { return v.name == name; });
    }

    std::size_t index_of(std::string_view name) const {
        for (std::size_t i = 0; i < variables.size(); ++i) {
            if (variables[i].name == name) return i;
        }
        throw UnknownVariable("no variable named '" + std::string(name) + "'");
    }

    // Same-step parents of `child`, in edge declaration order.
    std::vector<std::string> same_time_parents(std::string_view child) const {
        std::vector<std::string> out;
        for (const auto& [parent, c] : edges) {
            if (c == child) out.push_back(parent);
        }
        return out;
    }

    std::vector<std::string> children_of(std::string_view parent) const {
        std::vector<std::string> out;
        for (const auto& [p, child] : edges) {
            if (p == parent) out.push_back(child);
        }
        return out;
    }
};

inline ValidationReport validate(const CausalGraph& graph) {
    ValidationReport report;
    std::unordered_map<std::string, std::size_t> index;

    for (std::size_t i = 0; i < graph.variables.size(); ++i) {
        const auto& v = graph.variables[i];
        if (index.count(v.name)) {
            report.issues.push_back({"DuplicateVariable", "variable '" + v.name + "' declared twice"});
        }
        index.emplace(v.name, i);
        if (v.kind == VarKind::categorical) {
            if (v.levels.size() < 2) {
                report.issues.push_back(
                    {"InvalidVariable", "categorical '" + v.name + "' needs at least 2 levels"});
            }
            std::set<std::string> distinct(v.levels.begin(), v.levels.end());
            if (distinct.size() != v.levels.size()) {
                report.issues.push_back({"InvalidVariable", "categorical '" + v.name + "' has duplicate levels"});
            }
        }
    }

    auto count_role = [&](Role role) {
        return std::count_if(graph.variables.begin(), graph.variables.end(),
                             [&](const VariableSpec& v) { return v.role == role; });
    };
    if (count_role(Role::outcome) != 1) {
        report.issues.push_back({"InvalidSchema", "exactly one outcome variable is required"});
    }
    if (count_role(Role::diagnosis) != 1) {
        report.issues.push_back({"InvalidSchema", "exactly one diagnosis variable is required"});
    }
    if (count_role(Role::latent) != 1) {
        report.issues.push_back({"InvalidSchema", "exactly one latent variable is required"});
    } else {
        const auto latent = std::find_if(graph.variables.begin(), graph.variables.end(),
                                         [](const VariableSpec& v) { return v.role == Role::latent; });
        if (latent->name != graph.latent_name) {
            report.issues.push_back({"InvalidSchema", "latent_name '" + graph.latent_name +
                                                          "' does not match latent variable '" +
                                                          latent->name + "'"});
        }
    }

    for (const auto& [parent, child] : graph.edges) {
        if (!index.count(parent)) {
            report.issues.push_back({"DanglingEdge", "edge parent '" + parent + "' is not declared"});
            continue;
        }
        if (!index.count(child)) {
            report.issues.push_back({"DanglingEdge", "edge child '" + child + "' is not declared"});
            continue;
        }
        if (parent == child) {
            report.issues.push_back({"DanglingEdge", "self-edge on '" + parent + "'"});
            continue;
        }
        if (child == graph.latent_name) {
            report.issues.push_back({"InvalidEdge", "latent '" + child + "' must not have parents"});
        }
        const auto& pv = graph.variables[index.at(parent)];
        const auto& cv = graph.variables[index.at(child)];
        if (cv.is_static() && !pv.is_static()) {
            report.issues.push_back(
                {"InvalidEdge", "static '" + child + "' has dynamic parent '" + parent + "'"});
        }
    }

    // Cycle check (only meaningful once edges reference declared names).
    bool endpoints_ok = std::none_of(report.issues.begin(), report.issues.end(),
                                     [](const ValidationIssue& i) { return i.code == "DanglingEdge"; });
    if (endpoints_ok) {
        std::unordered_map<std::string, int> state;  // 0 unvisited, 1 on stack, 2 done
        std::vector<std::string> stack;
        std::vector<std::string> cycle;

        std::function<bool(const std::string&)> visit = [&](const std::string& node) -> bool {
            state[node] = 1;
            stack.push_back(node);
            for (const auto& [parent, child] : graph.edges) {
                if (parent != node) continue;
                int s = state[child];
                if (s == 1) {
                    auto it = std::find(stack.begin(), stack.end(), child);
                    cycle.assign(it, stack.end());
                    return false;
                }
                if (s == 0 && !visit(child)) return false;
            }
            stack.pop_back();
            state[node] = 2;
            return true;
        };
        for (const auto& v : graph.variables) {
            if (state[v.name] == 0 && !visit(v.name)) break;
        }
        if (!cycle.empty()) {
            std::string names;
            for (const auto& n : cycle) {
                if (!names.empty()) names += ", ";
                names += n;
            }
            report.issues.push_back({"CycleDetected", "cycle through [" + names + "]"});
        }
    }

    return report;
}

// Kahn's algorithm with ties broken by declaration order, so the result is
// deterministic for a given graph file.
inline std::vector<std::string> topological_order(const CausalGraph& graph) {
    std::unordered_map<std::string, int> in_degree;
    for (const auto& v : graph.variables) in_degree[v.name] = 0;
    for (const auto& [parent, child] : graph.edges) {
        if (!in_degree.count(parent) || !in_degree.count(child)) {
            throw UnknownVariable("edge endpoint not declared: " + parent + " -> " + child);
        }
        ++in_degree[child];
    }

    std::vector<std::string> order;
    std::vector<bool> emitted(graph.variables.size(), false);
    while (order.size() < graph.variables.size()) {
        bool progressed = false;
        for (std::size_t i = 0; i < graph.variables.size(); ++i) {
            const auto& name = graph.variables[i].name;
            if (!emitted[i] && in_degree[name] == 0) {
                emitted[i] = true;
                order.push_back(name);
                for (const auto& [parent, child] : graph.edges) {
                    if (parent == name) --in_degree[child];
                }
                progressed = true;
                break;
            }
        }
        if (!progressed) {
            std::string remaining;
            for (std::size_t i = 0; i < graph.variables.size(); ++i) {
                if (!emitted[i]) {
                    if (!remaining.empty()) remaining += ", ";
                    remaining += graph.variables[i].name;
                }
            }
            throw CycleDetected("no topological order; cycle among [" + remaining + "]");
        }
    }
    return order;
}

// Parents of `child` in the unrolled graph at step `time`: the same-step
// parents from the edge list, plus the self-lag (child, -1) for dynamic
// variables at t >= 1.
inline UnrolledParents parents_at(const CausalGraph& graph, std::string_view child, int time) {
    const auto& spec = graph.variable(child);
    UnrolledParents out;
    out.child = spec.name;
    out.time = time;
    for (const auto& name : graph.same_time_parents(child)) {
        out.parents.push_back({name, 0});
    }
    if (time >= 1 && !spec.is_static()) {
        out.parents.push_back({spec.name, -1});
    }
    return out;
}

// --- JSON configuration -----------------------------------------------------

inline std::string to_string(VarKind k) { return k == VarKind::continuous ? "continuous" : "categorical"; }
inline std::string to_string(Temporal t) { return t == Temporal::static_ ? "static" : "dynamic"; }
inline std::string to_string(Role r) {
    switch (r) {
        case Role::covariate: return "covariate";
        case Role::outcome: return "outcome";
        case Role::diagnosis: return "diagnosis";
        case Role::latent: return "latent";
    }
    return "covariate";
}

inline nlohmann::json graph_to_json(const CausalGraph& graph) {
    nlohmann::json j;
    j["variables"] = nlohmann::json::array();
    for (const auto& v : graph.variables) {
        nlohmann::json jv;
        jv["name"] = v.name;
        jv["kind"] = to_string(v.kind);
        if (v.is_categorical()) jv["levels"] = v.levels;
        jv["temporal"] = to_string(v.temporal);
        jv["role"] = to_string(v.role);
        if (v.numeric_parent) jv["numeric_parent"] = true;
        j["variables"].push_back(jv);
    }
    j["edges"] = nlohmann::json::array();
    for (const auto& [parent, child] : graph.edges) {
        j["edges"].push_back(nlohmann::json::array({parent, child}));
    }
    j["latent"] = graph.latent_name;
    return j;
}

inline CausalGraph graph_from_json(const nlohmann::json& j) {
    CausalGraph graph;
    try {
        for (const auto& jv : j.at("variables")) {
            VariableSpec v;
            v.name = jv.at("name").get<std::string>();
            std::string kind = jv.at("kind").get<std::string>();
            if (kind == "continuous") {
                v.kind = VarKind::continuous;
            } else if (kind == "categorical") {
                v.kind = VarKind::categorical;
                v.levels = jv.at("levels").get<std::vector<std::string>>();
            } else {
                throw ConfigError("InvalidGraph", "unknown kind '" + kind + "' for " + v.name);
            }
            std::string temporal = jv.at("temporal").get<std::string>();
            if (temporal == "static") {
                v.temporal = Temporal::static_;
            } else if (temporal == "dynamic") {
                v.temporal = Temporal::dynamic;
            } else {
                throw ConfigError("InvalidGraph", "unknown temporal '" + temporal + "' for " + v.name);
            }
            std::string role = jv.at("role").get<std::string>();
            if (role == "covariate") v.role = Role::covariate;
            else if (role == "outcome") v.role = Role::outcome;
            else if (role == "diagnosis") v.role = Role::diagnosis;
            else if (role == "latent") v.role = Role::latent;
            else throw ConfigError("InvalidGraph", "unknown role '" + role + "' for " + v.name);
            v.numeric_parent = jv.value("numeric_parent", false);
            graph.variables.push_back(std::move(v));
        }
        for (const auto& je : j.at("edges")) {
            graph.edges.emplace_back(je.at(0).get<std::string>(), je.at(1).get<std::string>());
        }
        graph.latent_name = j.at("latent").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("InvalidGraph", std::string("malformed graph JSON: ") + e.what());
    }
    return graph;
}

inline CausalGraph load_graph(const std::string& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("InvalidGraph", "cannot parse '" + path + "': " + e.what());
    }
    return graph_from_json(j);
}

inline void save_graph(const std::string& path, const CausalGraph& graph) {
    write_file(path, graph_to_json(graph).dump(2) + "\n");
}

// Canonical content hash; bank files carry it so a bank is never applied to
// a graph it was not fitted on.
inline std::string graph_hash(const CausalGraph& graph) {
    return hash_hex(graph_to_json(graph).dump());
}

}  // namespace adsim
