#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "rlev/errors.hpp"
#include "rlev/metrics.hpp"

using namespace rlev;

namespace {

std::vector<eval_result> three_results() {
    return {{0, 0.5, true, 4}, {1, 0.3, false, 2}, {2, 0.2, true, 6}};
}

}  // namespace

TEST_CASE("acc and h_acc from a small slice") {
    const auto report = compute_metrics(three_results(), 1.0 / 3.0);
    CHECK(report.acc == doctest::Approx(2.0 / 3.0));
    CHECK(report.h_acc == doctest::Approx(0.7));
    CHECK(report.mean_length == doctest::Approx(4.0));
    CHECK(report.n == 3);
}

TEST_CASE("value density divides H-Acc as a percentage by the mean length") {
    CHECK(value_density(0.57, 84.8) == doctest::Approx(0.67).epsilon(0.02));
    CHECK(value_density(0.5, 0.0) == 0.0);
}

TEST_CASE("reference metric grid is self-consistent under the density formula") {
    // (h_acc %, mean length, printed density) for each estimator/size/reward cell.
    struct row {
        double h_acc, length, density;
    };
    const row rows[12] = {
        {55.0, 168.1, 0.33}, {57.0, 84.8, 0.67}, {57.6, 226.2, 0.25}, {61.9, 68.7, 0.90},
        {56.7, 186.2, 0.30}, {58.9, 86.4, 0.68}, {60.9, 345.5, 0.18}, {63.3, 78.7, 0.80},
        {56.0, 251.1, 0.22}, {57.7, 100.4, 0.57}, {59.9, 169.0, 0.35}, {61.7, 148.3, 0.42},
    };
    for (const auto& r : rows)
        CHECK(std::abs(value_density(r.h_acc / 100.0, r.length) - r.density) <= 0.01);
}

TEST_CASE("h_acc is invariant to uniform value rescaling") {
    auto results = three_results();
    const double base = compute_metrics(results, 1.0 / 3.0).h_acc;
    for (auto& r : results) r.value *= 3.0;
    CHECK(compute_metrics(results, 1.0 / 3.0).h_acc == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("all-correct and all-wrong slices pin both accuracies") {
    std::vector<eval_result> results{{0, 0.9, true, 1}, {1, 0.1, true, 2}, {2, 0.4, true, 3},
                                     {3, 0.2, true, 1}, {4, 0.3, true, 2}};
    auto report = compute_metrics(results);
    CHECK(report.acc == 1.0);
    CHECK(report.h_acc == 1.0);
    CHECK(report.acc_high_bin == 1.0);
    CHECK(report.acc_low_bin == 1.0);

    for (auto& r : results) r.correct = false;
    report = compute_metrics(results);
    CHECK(report.acc == 0.0);
    CHECK(report.h_acc == 0.0);
}

TEST_CASE("bins take ceil(fraction * n) members from each end") {
    std::vector<eval_result> results;
    for (int i = 0; i < 10; ++i)
        results.push_back({i, static_cast<double>(i), i % 2 == 0, 1});
    const auto [high, low] = bin_membership(results, 0.2);
    CHECK(high == std::vector<int>{9, 8});
    CHECK(low == std::vector<int>{1, 0});

    // Bins are disjoint and correctly sized.
    for (int h : high) CHECK(std::find(low.begin(), low.end(), h) == low.end());

    const auto report = compute_metrics(results, 0.2);
    CHECK(report.acc_high_bin == 0.5);  // {9, 8}: only 8 correct
    CHECK(report.acc_low_bin == 0.5);   // {1, 0}: only 0 correct
}

TEST_CASE("equal values fall back to the prompt-id tie-break") {
    std::vector<eval_result> results;
    for (int i = 0; i < 10; ++i) results.push_back({i, 0.5, true, 1});
    const auto [high, low] = bin_membership(results, 0.2);
    CHECK(high == std::vector<int>{0, 1});
    CHECK(low == std::vector<int>{8, 9});
}

TEST_CASE("metric errors are reported") {
    CHECK_THROWS_AS(compute_metrics({}, 0.2), data_error);
    std::vector<eval_result> zero_value{{0, 0.0, true, 1}, {1, 0.0, false, 1}};
    CHECK_THROWS_AS(compute_metrics(zero_value, 0.5), data_error);
    CHECK_THROWS_AS(compute_metrics(three_results(), 0.0), config_error);
    CHECK_THROWS_AS(compute_metrics(three_results(), 0.6), config_error);
    // ceil(0.5 * 3) = 2 per bin cannot fit disjointly into 3 results.
    CHECK_THROWS_AS(compute_metrics(three_results(), 0.5), config_error);
}

TEST_CASE("json and csv exports carry every field") {
    const auto report = compute_metrics(three_results(), 1.0 / 3.0);
    const std::string j = to_json_string(report);
    for (const char* key : {"acc", "h_acc", "mean_length", "value_density", "acc_high_bin",
                            "acc_low_bin", "n"})
        CHECK(j.find(key) != std::string::npos);
    CHECK(metrics_csv_header() == "acc,h_acc,mean_length,value_density,acc_high_bin,acc_low_bin,n");
    const std::string row = metrics_csv_row(report);
    CHECK(std::count(row.begin(), row.end(), ',') == 6);
}
