#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "adsim/errors.hpp"
#include "adsim/graph.hpp"

namespace adsim {

// Values are stored as doubles everywhere in the modeling layer: a
// continuous variable holds its value, a categorical variable holds its
// level index. The encoder turns parent values into design-matrix rows:
// intercept, continuous passthrough, one-hot with the first level dropped,
// or the parsed numeric label for numeric_parent variables. The
// numeric_parent rule applies only where the variable feeds other models;
// its own self-lag stays one-hot so its autoregressive classifier can
// express per-level dynamics.
class Encoder {
public:
    Encoder() = default;

    Encoder(const CausalGraph& graph, const std::vector<ParentRef>& parents,
            const std::string& target = "") {
        column_names_.push_back("(intercept)");
        for (const auto& parent : parents) {
            const auto& spec = graph.variable(parent.name);
            Group group;
            group.var_index = graph.index_of(parent.name);
            group.offset = parent.time_offset;
            std::string suffix = parent.time_offset == -1 ? "[t-1]" : "";
            if (!spec.is_categorical()) {
                group.kind = Group::numeric;
                group.width = 1;
                column_names_.push_back(parent.name + suffix);
            } else if (spec.numeric_parent && parent.name != target) {
                group.kind = Group::numeric_label;
                group.width = 1;
                for (const auto& level : spec.levels) {
                    auto v = parse_double(level);
                    if (!v) {
                        throw ConfigError("InvalidGraph", "numeric_parent variable '" + spec.name +
                                                              "' has non-numeric level '" + level + "'");
                    }
                    group.label_values.push_back(*v);
                }
                column_names_.push_back(parent.name + suffix);
            } else {
                group.kind = Group::onehot;
                group.width = spec.levels.size() - 1;
                for (std::size_t l = 1; l < spec.levels.size(); ++l) {
                    column_names_.push_back(parent.name + suffix + "=" + spec.levels[l]);
                }
            }
            groups_.push_back(std::move(group));
        }
    }

    std::size_t width() const { return column_names_.size(); }
    const std::vector<std::string>& column_names() const { return column_names_; }

    // parent_values must be aligned with the encoder's parent list.
    void encode_into(const std::vector<double>& parent_values, double* out) const {
        out[0] = 1.0;
        std::size_t pos = 1;
        for (std::size_t g = 0; g < groups_.size(); ++g) {
            const auto& group = groups_[g];
            double v = parent_values[g];
            switch (group.kind) {
                case Group::numeric:
                    out[pos++] = v;
                    break;
                case Group::numeric_label:
                    out[pos++] = group.label_values.at(static_cast<std::size_t>(v));
                    break;
                case Group::onehot: {
                    auto idx = static_cast<std::size_t>(v);
                    for (std::size_t k = 0; k < group.width; ++k) out[pos + k] = 0.0;
                    if (idx > 0) {
                        if (idx - 1 >= group.width) {
                            throw InternalError("Encoder", "level index out of range");
                        }
                        out[pos + idx - 1] = 1.0;
                    }
                    pos += group.width;
                    break;
                }
            }
        }
    }

    Eigen::RowVectorXd encode(const std::vector<double>& parent_values) const {
        Eigen::RowVectorXd row(width());
        encode_into(parent_values, row.data());
        return row;
    }

    struct Group {
        enum Kind { numeric, numeric_label, onehot };
        std::size_t var_index = 0;
        int offset = 0;
        Kind kind = numeric;
        std::size_t width = 1;
        std::vector<double> label_values;
    };
    const std::vector<Group>& groups() const { return groups_; }

private:
    std::vector<std::string> column_names_;
    std::vector<Group> groups_;
};

struct DesignMatrix {
    Eigen::MatrixXd X;
    std::vector<std::string> column_names;

    void check() const {
        if (!X.allFinite()) throw DegenerateDesign("design matrix contains non-finite entries");
        if (static_cast<std::size_t>(X.cols()) != column_names.size()) {
            throw InternalError("DesignMatrix", "column name / width mismatch");
        }
    }
};

// Builds a design from per-row parent values (one inner vector per row,
// aligned with the encoder's parent list).
inline DesignMatrix build_design(const Encoder& encoder,
                                 const std::vector<std::vector<double>>& parent_rows) {
    DesignMatrix design;
    design.column_names = encoder.column_names();
    design.X.resize(static_cast<Eigen::Index>(parent_rows.size()),
                    static_cast<Eigen::Index>(encoder.width()));
    Eigen::RowVectorXd row(static_cast<Eigen::Index>(encoder.width()));
    for (std::size_t i = 0; i < parent_rows.size(); ++i) {
        encoder.encode_into(parent_rows[i], row.data());
        design.X.row(static_cast<Eigen::Index>(i)) = row;
    }
    return design;
}

}  // namespace adsim
