#pragma once

#include <vector>

#include <Eigen/Dense>

#include "adsim/errors.hpp"

namespace adsim {

struct LinearGaussianModel {
    Eigen::VectorXd coefficients;
    double noise_sd = 0.0;
    Eigen::Index rank = 0;

    double predict(const Eigen::RowVectorXd& x) const { return x.dot(coefficients); }

    Eigen::VectorXd predict(const Eigen::MatrixXd& X) const { return X * coefficients; }
};

// Ordinary least squares through a rank-revealing (column-pivoted) QR.
// Columns judged rank-deficient receive zero weight. noise_sd is the
// degrees-of-freedom corrected residual standard deviation.
inline LinearGaussianModel fit_linear(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
    const Eigen::Index n = X.rows();
    const Eigen::Index p = X.cols();
    if (n < 1) throw DegenerateDesign("no rows to fit");
    if (X.rows() != y.rows()) throw DegenerateDesign("design/target row mismatch");
    if (!X.allFinite() || !y.allFinite()) {
        throw DegenerateDesign("non-finite values in design or target");
    }

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    LinearGaussianModel model;
    model.rank = qr.rank();
    if (model.rank == p) {
        model.coefficients = qr.solve(y);
    } else {
        // Solve on the pivot columns only; the dropped columns get zero.
        const auto& perm = qr.colsPermutation();
        Eigen::MatrixXd Xr(n, model.rank);
        for (Eigen::Index j = 0; j < model.rank; ++j) {
            Xr.col(j) = X.col(perm.indices()[j]);
        }
        Eigen::VectorXd beta_r = Xr.colPivHouseholderQr().solve(y);
        model.coefficients = Eigen::VectorXd::Zero(p);
        for (Eigen::Index j = 0; j < model.rank; ++j) {
            model.coefficients[perm.indices()[j]] = beta_r[j];
        }
    }

    Eigen::VectorXd residuals = y - X * model.coefficients;
    double sse = residuals.squaredNorm();
    Eigen::Index dof = n - model.rank;
    model.noise_sd = dof > 0 ? std::sqrt(sse / static_cast<double>(dof)) : 0.0;
    // Exactly-interpolated targets can leave a tiny negative-rounding SSE.
    if (!(model.noise_sd >= 0.0)) model.noise_sd = 0.0;
    return model;
}

// Classic OLS coefficient standard errors, sigma * sqrt(diag((X'X)^-1)).
// Meaningful for full-rank designs.
inline Eigen::VectorXd linear_standard_errors(const Eigen::MatrixXd& X, double noise_sd) {
    Eigen::MatrixXd xtx = X.transpose() * X;
    Eigen::MatrixXd inv = xtx.ldlt().solve(Eigen::MatrixXd::Identity(X.cols(), X.cols()));
    return (inv.diagonal().array().max(0.0).sqrt() * noise_sd).matrix();
}

}  // namespace adsim
