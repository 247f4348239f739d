#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

namespace rlev {

struct eval_result {
    int prompt_id = 0;
    double value = 0.0;  // human-defined v(x), always the true dataset value
    bool correct = false;
    int response_length = 0;  // tokens excluding EOS
};

struct metrics_report {
    double acc = 0.0;
    double h_acc = 0.0;
    double mean_length = 0.0;
    double value_density = 0.0;
    double acc_high_bin = 0.0;
    double acc_low_bin = 0.0;
    int n = 0;
};

// Value density = H-Acc as a percentage divided by mean response length.
// H-Acc enters on the 0-100 scale; using the raw fraction here would be a
// silent 100x unit error.
double value_density(double h_acc, double mean_length);

// Acc, H-Acc, mean length, value density, and the accuracy of the top/bottom
// value bins (ceil(bin_fraction * n) prompts each, ties broken by prompt_id).
metrics_report compute_metrics(std::span<const eval_result> results, double bin_fraction = 0.2);

// Ids of the top and bottom value bins, in the deterministic sort order.
std::pair<std::vector<int>, std::vector<int>> bin_membership(std::span<const eval_result> results,
                                                             double bin_fraction = 0.2);

std::string to_json_string(const metrics_report& report);

// Header and row for the sweep/ablation CSV exports.
std::string metrics_csv_header();
std::string metrics_csv_row(const metrics_report& report);

}  // namespace rlev
