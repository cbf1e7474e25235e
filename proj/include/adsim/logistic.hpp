#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "adsim/errors.hpp"

namespace adsim {

struct MultinomialLogisticModel {
    std::vector<std::string> class_labels;
    // (classes-1) x features; class_labels[0] is the reference class with
    // implicit zero weights.
    Eigen::MatrixXd weights;
    bool converged = false;
    double final_grad_norm = 0.0;
    int iterations = 0;

    std::size_t n_classes() const { return class_labels.size(); }

    Eigen::VectorXd predict_proba(const Eigen::RowVectorXd& x) const {
        const auto k = static_cast<Eigen::Index>(n_classes());
        Eigen::VectorXd scores = Eigen::VectorXd::Zero(k);
        scores.tail(k - 1) = weights * x.transpose();
        double m = scores.maxCoeff();
        Eigen::VectorXd e = (scores.array() - m).exp();
        return e / e.sum();
    }

    Eigen::MatrixXd predict_proba(const Eigen::MatrixXd& X) const {
        const auto k = static_cast<Eigen::Index>(n_classes());
        Eigen::MatrixXd scores = Eigen::MatrixXd::Zero(X.rows(), k);
        scores.rightCols(k - 1) = X * weights.transpose();
        Eigen::VectorXd rowmax = scores.rowwise().maxCoeff();
        Eigen::MatrixXd e = (scores.colwise() - rowmax).array().exp();
        Eigen::VectorXd sums = e.rowwise().sum();
        return e.array().colwise() / sums.array();
    }

    std::size_t predict_class(const Eigen::RowVectorXd& x) const {
        Eigen::Index best;
        predict_proba(x).maxCoeff(&best);
        return static_cast<std::size_t>(best);
    }
};

struct LogisticOptions {
    double l2 = 1e-4;          // penalty on the mean log-likelihood scale
    double tolerance = 1e-6;   // gradient max-norm
    int max_iterations = 500;
};

namespace detail {

// Penalized mean log-likelihood.
inline double logistic_objective(const Eigen::MatrixXd& X, const std::vector<std::size_t>& labels,
                                 const Eigen::MatrixXd& W, double l2) {
    const Eigen::Index n = X.rows();
    const Eigen::Index k = W.rows() + 1;
    Eigen::MatrixXd scores = Eigen::MatrixXd::Zero(n, k);
    scores.rightCols(k - 1) = X * W.transpose();
    double ll = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        double m = scores.row(i).maxCoeff();
        double lse = m + std::log((scores.row(i).array() - m).exp().sum());
        ll += scores(i, static_cast<Eigen::Index>(labels[static_cast<std::size_t>(i)])) - lse;
    }
    return ll / static_cast<double>(n) - 0.5 * l2 * W.squaredNorm();
}

// Gradient of the penalized mean log-likelihood, same shape as W.
inline Eigen::MatrixXd logistic_gradient(const Eigen::MatrixXd& X,
                                         const std::vector<std::size_t>& labels,
                                         const Eigen::MatrixXd& P, const Eigen::MatrixXd& W,
                                         double l2) {
    const Eigen::Index n = X.rows();
    const Eigen::Index k = W.rows() + 1;
    Eigen::MatrixXd G(W.rows(), W.cols());
    for (Eigen::Index j = 1; j < k; ++j) {
        Eigen::VectorXd indicator = Eigen::VectorXd::Zero(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            if (static_cast<Eigen::Index>(labels[static_cast<std::size_t>(i)]) == j) indicator[i] = 1.0;
        }
        G.row(j - 1) = ((indicator - P.col(j)).transpose() * X) / static_cast<double>(n);
    }
    G -= l2 * W;
    return G;
}

}  // namespace detail

// Multinomial logistic regression by blockwise Newton ascent with
// backtracking line search on the penalized mean log-likelihood. The
// penalized objective is strictly concave, so the optimum is unique; the
// line search keeps the objective non-decreasing at every iteration.
// Failure to reach the gradient tolerance is recorded on the model rather
// than thrown: quasi-separable data (near-constant autoregressed classes)
// legitimately runs into the iteration cap.
inline MultinomialLogisticModel fit_logistic(const Eigen::MatrixXd& X,
                                             const std::vector<std::size_t>& labels,
                                             std::vector<std::string> class_labels,
                                             const LogisticOptions& options = {}) {
    const Eigen::Index n = X.rows();
    const auto k = static_cast<Eigen::Index>(class_labels.size());
    if (n < 1) throw DegenerateDesign("no rows to fit");
    if (labels.size() != static_cast<std::size_t>(n)) {
        throw DegenerateDesign("design/label row mismatch");
    }
    if (k < 2) throw DegenerateInput("need at least two classes");
    {
        std::vector<bool> seen(static_cast<std::size_t>(k), false);
        std::size_t distinct = 0;
        for (auto label : labels) {
            if (label >= static_cast<std::size_t>(k)) throw DegenerateInput("label index out of range");
            if (!seen[label]) {
                seen[label] = true;
                ++distinct;
            }
        }
        if (distinct < 2) throw DegenerateInput("fewer than two distinct labels present");
    }

    MultinomialLogisticModel model;
    model.class_labels = std::move(class_labels);
    model.weights = Eigen::MatrixXd::Zero(k - 1, X.cols());

    double objective = detail::logistic_objective(X, labels, model.weights, options.l2);
    const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(X.cols(), X.cols());

    for (int iter = 0; iter < options.max_iterations; ++iter) {
        Eigen::MatrixXd P = model.predict_proba(X);
        Eigen::MatrixXd G = detail::logistic_gradient(X, labels, P, model.weights, options.l2);
        model.final_grad_norm = G.cwiseAbs().maxCoeff();
        model.iterations = iter;
        if (model.final_grad_norm < options.tolerance) {
            model.converged = true;
            return model;
        }

        // Blockwise Newton direction: one p x p solve per non-reference class.
        Eigen::MatrixXd direction(k - 1, X.cols());
        for (Eigen::Index j = 1; j < k; ++j) {
            Eigen::VectorXd w = (P.col(j).array() * (1.0 - P.col(j).array())).matrix();
            Eigen::MatrixXd H =
                (X.transpose() * w.asDiagonal() * X) / static_cast<double>(n) + options.l2 * identity;
            direction.row(j - 1) = H.ldlt().solve(G.row(j - 1).transpose()).transpose();
        }

        double slope = (G.array() * direction.array()).sum();
        if (!(slope > 0.0)) {
            // Numerically flat; treat as converged at this gradient norm.
            break;
        }
        double step = 1.0;
        bool accepted = false;
        for (int half = 0; half < 40; ++half) {
            Eigen::MatrixXd candidate = model.weights + step * direction;
            double value = detail::logistic_objective(X, labels, candidate, options.l2);
            if (value >= objective + 1e-4 * step * slope) {
                model.weights = std::move(candidate);
                objective = value;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;
    }

    Eigen::MatrixXd P = model.predict_proba(X);
    Eigen::MatrixXd G = detail::logistic_gradient(X, labels, P, model.weights, options.l2);
    model.final_grad_norm = G.cwiseAbs().maxCoeff();
    model.iterations = options.max_iterations;
    model.converged = model.final_grad_norm < options.tolerance;
    return model;
}

}  // namespace adsim
