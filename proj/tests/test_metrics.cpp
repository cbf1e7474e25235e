#include <catch2/catch_amalgamated.hpp>

#include <vector>

#include "adsim/metrics.hpp"

using namespace adsim;

TEST_CASE("perfect classifier scores 1.0 on accuracy and F1", "[metrics]") {
    std::vector<std::size_t> truth{0, 1, 2, 1, 0, 2};
    auto report = classification_report(truth, truth);
    REQUIRE(report.accuracy == 1.0);
    REQUIRE(report.macro_f1 == 1.0);
    REQUIRE(report.n_classes == 3);
}

TEST_CASE("macro F1 on a hand-computed 3-class confusion", "[metrics]") {
    // Truth counts: A appears 5x, B 6x, C 4x.
    // Confusion (rows truth, columns predicted):
    //      A  B  C
    //  A   3  1  1
    //  B   2  4  0
    //  C   0  1  3
    std::vector<std::size_t> truth{0, 0, 0, 0, 0, 1, 1, 1, 1, 1, 1, 2, 2, 2, 2};
    std::vector<std::size_t> pred {0, 0, 0, 1, 2, 0, 0, 1, 1, 1, 1, 1, 2, 2, 2};

    // Per class: precision_A = 3/5, recall_A = 3/5, F1_A = 0.6
    //            precision_B = 4/6, recall_B = 4/6, F1_B = 2/3
    //            precision_C = 3/4, recall_C = 3/4, F1_C = 0.75
    // macro F1 = (0.6 + 2/3 + 0.75) / 3
    auto report = classification_report(pred, truth);
    REQUIRE(report.accuracy == Catch::Approx(10.0 / 15.0).epsilon(1e-12));
    REQUIRE(report.macro_f1 == Catch::Approx((0.6 + 2.0 / 3.0 + 0.75) / 3.0).epsilon(1e-12));
}

TEST_CASE("classes absent from the truth are excluded from macro F1", "[metrics]") {
    std::vector<std::size_t> truth{0, 0, 1, 1};
    std::vector<std::size_t> pred{0, 2, 1, 1};  // class 2 predicted but never true
    auto report = classification_report(pred, truth);
    REQUIRE(report.n_classes == 2);
    // F1_0: precision 1/1, recall 1/2 -> 2/3. F1_1: 1.0.
    REQUIRE(report.macro_f1 == Catch::Approx((2.0 / 3.0 + 1.0) / 2.0).epsilon(1e-12));
}

TEST_CASE("predicting the mean anchors R^2 at zero", "[metrics]") {
    std::vector<double> truth{1.0, 2.0, 3.0, 4.0, 5.0};
    std::vector<double> pred(5, 3.0);
    auto report = regression_report(pred, truth);
    REQUIRE(report.r2 == Catch::Approx(0.0).margin(1e-12));
    REQUIRE(report.rmse == Catch::Approx(report.sigma_y).epsilon(1e-12));
}

TEST_CASE("population conventions make R^2 = 1 - RMSE^2/sigma^2 exact", "[metrics]") {
    std::vector<double> truth{0.4, 1.1, -2.0, 3.3, 0.0, 5.2};
    std::vector<double> pred{0.5, 1.0, -1.0, 3.0, 0.3, 4.0};
    auto report = regression_report(pred, truth);
    double reconstructed = 1.0 - report.rmse * report.rmse / (report.sigma_y * report.sigma_y);
    REQUIRE(report.r2 == Catch::Approx(reconstructed).epsilon(1e-12));
    REQUIRE(report.r2 <= 1.0);
}

TEST_CASE("R^2 is 1 exactly when RMSE is 0", "[metrics]") {
    std::vector<double> truth{1.5, 2.5, 3.5};
    auto perfect = regression_report(truth, truth);
    REQUIRE(perfect.r2 == 1.0);
    REQUIRE(perfect.rmse == 0.0);

    std::vector<double> off{1.5, 2.5, 3.6};
    auto imperfect = regression_report(off, truth);
    REQUIRE(imperfect.r2 < 1.0);
}

TEST_CASE("worse-than-mean predictions give negative R^2", "[metrics]") {
    std::vector<double> truth{1.0, 2.0, 3.0};
    std::vector<double> pred{3.0, 2.0, 1.0};
    auto report = regression_report(pred, truth);
    REQUIRE(report.r2 < 0.0);
}

TEST_CASE("empty inputs are rejected", "[metrics]") {
    std::vector<double> empty;
    REQUIRE_THROWS_AS(regression_report(empty, empty), EmptyInput);
    std::vector<std::size_t> empty_labels;
    REQUIRE_THROWS_AS(classification_report(empty_labels, empty_labels), EmptyInput);
}
