#include "rlev/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <json.hpp>

#include "rlev/errors.hpp"

namespace rlev {

double value_density(double h_acc, double mean_length) {
    if (!(mean_length > 0.0)) return 0.0;
    return h_acc * 100.0 / mean_length;
}

namespace {

// Sorted copy, highest value first, ties by ascending prompt_id.
std::vector<eval_result> by_value_desc(std::span<const eval_result> results) {
    std::vector<eval_result> sorted(results.begin(), results.end());
    std::sort(sorted.begin(), sorted.end(), [](const eval_result& a, const eval_result& b) {
        if (a.value != b.value) return a.value > b.value;
        return a.prompt_id < b.prompt_id;
    });
    return sorted;
}

std::size_t bin_size(std::size_t n, double bin_fraction) {
    if (!(bin_fraction > 0.0) || bin_fraction > 0.5)
        throw config_error("bin_fraction must be in (0, 0.5], got " +
                           std::to_string(bin_fraction));
    const auto size = static_cast<std::size_t>(
        std::ceil(bin_fraction * static_cast<double>(n)));
    if (2 * size > n)
        throw config_error("bin_fraction " + std::to_string(bin_fraction) +
                           " makes the value bins overlap on " + std::to_string(n) + " results");
    return size;
}

}  // namespace

metrics_report compute_metrics(std::span<const eval_result> results, double bin_fraction) {
    if (results.empty()) throw data_error("compute_metrics: empty result list");

    metrics_report report;
    report.n = static_cast<int>(results.size());

    double total_value = 0.0;
    double achieved_value = 0.0;
    double total_length = 0.0;
    int correct = 0;
    for (const auto& r : results) {
        total_value += r.value;
        total_length += r.response_length;
        if (r.correct) {
            ++correct;
            achieved_value += r.value;
        }
    }
    if (!(total_value > 0.0)) throw data_error("compute_metrics: total value is zero");

    report.acc = static_cast<double>(correct) / static_cast<double>(results.size());
    report.h_acc = achieved_value / total_value;
    report.mean_length = total_length / static_cast<double>(results.size());
    report.value_density = value_density(report.h_acc, report.mean_length);

    const std::vector<eval_result> sorted = by_value_desc(results);
    const std::size_t size = bin_size(sorted.size(), bin_fraction);
    int high_correct = 0;
    int low_correct = 0;
    for (std::size_t i = 0; i < size; ++i) {
        if (sorted[i].correct) ++high_correct;
        if (sorted[sorted.size() - 1 - i].correct) ++low_correct;
    }
    report.acc_high_bin = static_cast<double>(high_correct) / static_cast<double>(size);
    report.acc_low_bin = static_cast<double>(low_correct) / static_cast<double>(size);
    return report;
}

std::pair<std::vector<int>, std::vector<int>> bin_membership(std::span<const eval_result> results,
                                                             double bin_fraction) {
    if (results.empty()) throw data_error("bin_membership: empty result list");
    const std::vector<eval_result> sorted = by_value_desc(results);
    const std::size_t size = bin_size(sorted.size(), bin_fraction);
    std::vector<int> high;
    std::vector<int> low;
    for (std::size_t i = 0; i < size; ++i) {
        high.push_back(sorted[i].prompt_id);
        low.push_back(sorted[sorted.size() - size + i].prompt_id);
    }
    return {std::move(high), std::move(low)};
}

std::string to_json_string(const metrics_report& report) {
    nlohmann::json j{
        {"acc", report.acc},
        {"h_acc", report.h_acc},
        {"mean_length", report.mean_length},
        {"value_density", report.value_density},
        {"acc_high_bin", report.acc_high_bin},
        {"acc_low_bin", report.acc_low_bin},
        {"n", report.n},
    };
    return j.dump();
}

namespace {

std::string num(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", x);
    return buf;
}

}  // namespace

std::string metrics_csv_header() {
    return "acc,h_acc,mean_length,value_density,acc_high_bin,acc_low_bin,n";
}

std::string metrics_csv_row(const metrics_report& r) {
    return num(r.acc) + "," + num(r.h_acc) + "," + num(r.mean_length) + "," +
           num(r.value_density) + "," + num(r.acc_high_bin) + "," + num(r.acc_low_bin) + "," +
           std::to_string(r.n);
}

}  // namespace rlev
