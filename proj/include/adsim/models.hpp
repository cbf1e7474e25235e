#pragma once

#include <string>
#include <vector>

#include "adsim/design.hpp"
#include "adsim/graph.hpp"
#include "adsim/linear.hpp"
#include "adsim/logistic.hpp"

namespace adsim {

// One fitted conditional distribution: a linear-Gaussian model for a
// continuous child or a multinomial logistic model for a categorical one,
// together with the parent list and encoder it was built against.
struct ConditionalModel {
    enum class Type { linear, logistic };

    std::string target;
    Type type = Type::linear;
    std::vector<ParentRef> parents;
    Encoder encoder;
    LinearGaussianModel linear;
    MultinomialLogisticModel logistic;

    const std::vector<std::string>& feature_names() const { return encoder.column_names(); }

    double conditional_mean(const std::vector<double>& parent_values) const {
        return linear.predict(encoder.encode(parent_values));
    }

    Eigen::VectorXd class_probabilities(const std::vector<double>& parent_values) const {
        return logistic.predict_proba(encoder.encode(parent_values));
    }

    std::size_t modal_class(const std::vector<double>& parent_values) const {
        Eigen::Index best;
        class_probabilities(parent_values).maxCoeff(&best);
        return static_cast<std::size_t>(best);
    }
};

inline ConditionalModel fit_conditional(const CausalGraph& graph, const std::string& target,
                                        const std::vector<ParentRef>& parents,
                                        const std::vector<std::vector<double>>& parent_rows,
                                        const std::vector<double>& targets) {
    const auto& spec = graph.variable(target);
    ConditionalModel model;
    model.target = target;
    model.parents = parents;
    model.encoder = Encoder(graph, parents, target);

    if (parent_rows.size() < model.encoder.width() + 1) {
        throw InsufficientData("variable '" + target + "' has " + std::to_string(parent_rows.size()) +
                               " usable rows for " + std::to_string(model.encoder.width()) +
                               " design columns");
    }

    auto design = build_design(model.encoder, parent_rows);
    design.check();

    if (spec.is_categorical()) {
        model.type = ConditionalModel::Type::logistic;
        std::vector<std::size_t> labels(targets.size());
        for (std::size_t i = 0; i < targets.size(); ++i) {
            labels[i] = static_cast<std::size_t>(targets[i]);
        }
        model.logistic = fit_logistic(design.X, labels, spec.levels);
    } else {
        model.type = ConditionalModel::Type::linear;
        Eigen::VectorXd y(static_cast<Eigen::Index>(targets.size()));
        for (std::size_t i = 0; i < targets.size(); ++i) y(static_cast<Eigen::Index>(i)) = targets[i];
        model.linear = fit_linear(design.X, y);
    }
    return model;
}

}  // namespace adsim
