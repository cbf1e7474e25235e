#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "adsim/errors.hpp"
#include "adsim/rng.hpp"

namespace adsim {

// Minimal recurrent regressor: h_t = tanh(Wx x_t + Wh h_{t-1} + b) with
// h_{-1} = 0, prediction w . h_last + c. Trained by full-batch gradient
// descent on mean squared error with backpropagation through time.
class RecurrentRegressor {
public:
    struct Options {
        int hidden = 16;
        int epochs = 500;
        double learning_rate = 0.01;
        std::uint64_t seed = 0;
        std::uint64_t stream_index = 0;  // per-arm substream
    };

    RecurrentRegressor() = default;

    explicit RecurrentRegressor(int input_dim, const Options& options)
        : options_(options), input_dim_(input_dim) {
        if (options.hidden < 1) throw ConfigError("InvalidConfig", "hidden width must be >= 1");
        const int h = options.hidden;
        const double scale = 1.0 / std::sqrt(static_cast<double>(h));
        auto rng = make_stream(options.seed, StreamPurpose::estimator, options.stream_index);
        auto init = [&](Eigen::Index rows, Eigen::Index cols) {
            Eigen::MatrixXd m(rows, cols);
            for (Eigen::Index r = 0; r < rows; ++r) {
                for (Eigen::Index c = 0; c < cols; ++c) {
                    m(r, c) = (2.0 * rng.uniform01() - 1.0) * scale;
                }
            }
            return m;
        };
        Wx_ = init(h, input_dim);
        Wh_ = init(h, h);
        b_ = init(h, 1);
        w_ = init(h, 1);
        c_ = (2.0 * rng.uniform01() - 1.0) * scale;
    }

    double predict(const Eigen::MatrixXd& sequence) const {
        Eigen::VectorXd h = Eigen::VectorXd::Zero(Wx_.rows());
        for (Eigen::Index t = 0; t < sequence.rows(); ++t) {
            h = (Wx_ * sequence.row(t).transpose() + Wh_ * h + b_).array().tanh();
        }
        return w_.dot(h) + c_;
    }

    // Mean squared error over the batch and its gradient with respect to
    // every parameter, via BPTT. Exposed so tests can check the analytic
    // gradient against finite differences.
    struct Gradients {
        Eigen::MatrixXd Wx, Wh;
        Eigen::VectorXd b, w;
        double c = 0.0;
        double loss = 0.0;
    };

    Gradients loss_and_gradients(const std::vector<Eigen::MatrixXd>& sequences,
                                 const std::vector<double>& targets) const {
        const int h = static_cast<int>(Wx_.rows());
        const std::size_t n = sequences.size();
        Gradients g;
        g.Wx = Eigen::MatrixXd::Zero(h, input_dim_);
        g.Wh = Eigen::MatrixXd::Zero(h, h);
        g.b = Eigen::VectorXd::Zero(h);
        g.w = Eigen::VectorXd::Zero(h);

        for (std::size_t i = 0; i < n; ++i) {
            const auto& seq = sequences[i];
            const Eigen::Index steps = seq.rows();
            std::vector<Eigen::VectorXd> hidden(static_cast<std::size_t>(steps));
            Eigen::VectorXd h_prev = Eigen::VectorXd::Zero(h);
            for (Eigen::Index t = 0; t < steps; ++t) {
                hidden[static_cast<std::size_t>(t)] =
                    (Wx_ * seq.row(t).transpose() + Wh_ * h_prev + b_).array().tanh();
                h_prev = hidden[static_cast<std::size_t>(t)];
            }
            double prediction = w_.dot(h_prev) + c_;
            double err = prediction - targets[i];
            g.loss += err * err / static_cast<double>(n);

            double dpred = 2.0 * err / static_cast<double>(n);
            g.w += dpred * h_prev;
            g.c += dpred;

            Eigen::VectorXd dh = dpred * w_;
            for (Eigen::Index t = steps - 1; t >= 0; --t) {
                const auto& h_t = hidden[static_cast<std::size_t>(t)];
                Eigen::VectorXd da = dh.array() * (1.0 - h_t.array().square());
                g.Wx += da * seq.row(t);
                g.b += da;
                if (t > 0) {
                    g.Wh += da * hidden[static_cast<std::size_t>(t - 1)].transpose();
                }
                dh = Wh_.transpose() * da;
            }
        }
        return g;
    }

    // Returns the per-epoch training losses.
    std::vector<double> train(const std::vector<Eigen::MatrixXd>& sequences,
                              const std::vector<double>& targets) {
        if (sequences.empty()) throw InsufficientData("no training sequences");
        if (sequences.size() != targets.size()) {
            throw DataError("LengthMismatch", "sequences/targets differ");
        }
        std::vector<double> losses;
        losses.reserve(static_cast<std::size_t>(options_.epochs));
        for (int epoch = 0; epoch < options_.epochs; ++epoch) {
            auto g = loss_and_gradients(sequences, targets);
            if (!std::isfinite(g.loss)) {
                throw DivergedLoss("non-finite training loss at epoch " + std::to_string(epoch) +
                                   " (lr=" + std::to_string(options_.learning_rate) + ")");
            }
            losses.push_back(g.loss);
            const double lr = options_.learning_rate;
            Wx_ -= lr * g.Wx;
            Wh_ -= lr * g.Wh;
            b_ -= lr * g.b;
            w_ -= lr * g.w;
            c_ -= lr * g.c;
        }
        return losses;
    }

    // Parameter access for the finite-difference harness.
    std::vector<double*> parameter_view() {
        std::vector<double*> view;
        for (Eigen::Index i = 0; i < Wx_.size(); ++i) view.push_back(Wx_.data() + i);
        for (Eigen::Index i = 0; i < Wh_.size(); ++i) view.push_back(Wh_.data() + i);
        for (Eigen::Index i = 0; i < b_.size(); ++i) view.push_back(b_.data() + i);
        for (Eigen::Index i = 0; i < w_.size(); ++i) view.push_back(w_.data() + i);
        view.push_back(&c_);
        return view;
    }

    std::vector<double> gradient_view(const Gradients& g) const {
        std::vector<double> flat;
        for (Eigen::Index i = 0; i < g.Wx.size(); ++i) flat.push_back(*(g.Wx.data() + i));
        for (Eigen::Index i = 0; i < g.Wh.size(); ++i) flat.push_back(*(g.Wh.data() + i));
        for (Eigen::Index i = 0; i < g.b.size(); ++i) flat.push_back(*(g.b.data() + i));
        for (Eigen::Index i = 0; i < g.w.size(); ++i) flat.push_back(*(g.w.data() + i));
        flat.push_back(g.c);
        return flat;
    }

private:
    Options options_;
    int input_dim_ = 0;
    Eigen::MatrixXd Wx_, Wh_;
    Eigen::VectorXd b_, w_;
    double c_ = 0.0;
};

}  // namespace adsim
