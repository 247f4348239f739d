#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rlev/estimators.hpp"
#include "rlev/exact_oracle.hpp"
#include "rlev/exam_env.hpp"
#include "rlev/metrics.hpp"
#include "rlev/policy.hpp"
#include "rlev/value_model.hpp"

namespace rlev {

enum class cohort_kind { top_valued, bottom_valued };

const char* to_string(cohort_kind c);

// Mean EOS probability per step position, averaged over prefixes that have
// not yet emitted EOS. In exact mode active_count is the expected number of
// active rollouts (one virtual rollout per prompt); in sampled mode it is the
// literal count of still-active rollouts.
struct trajectory_row {
    int step = 0;
    double mean_eos_prob = 0.0;
    double active_count = 0.0;
};

struct trajectory_table {
    cohort_kind cohort = cohort_kind::top_valued;
    std::string checkpoint_label;
    std::string mode;  // "exact" or "sampled"
    std::vector<trajectory_row> rows;
};

struct trajectory_options {
    int sample_count = 1000;  // rollouts per prompt when enumeration is over budget
    double budget = default_sequence_budget;
    std::uint64_t seed = 0;
    std::string checkpoint_label = "policy";
};

// Tables for the cohort_size highest- and lowest-valued prompts.
std::pair<trajectory_table, trajectory_table> eos_trajectories(
    const policy& pi, std::span<const valued_prompt> dataset, int cohort_size,
    const trajectory_options& options = {});

struct ablation_row {
    reward_form form = reward_form::human_aligned;
    metrics_report report;  // seed-averaged
    std::uint64_t data_hash = 0;
};

struct ablation_grid {
    std::vector<ablation_row> rows;
    std::vector<std::uint64_t> seeds;
};

// Trains one policy per (form, seed) with everything else fixed; rollout
// seed streams are shared across forms by construction.
ablation_grid run_ablation(const train_config& base, std::span<const valued_prompt> dataset,
                           std::span<const reward_form> forms,
                           std::span<const std::uint64_t> seeds);

// One seed-averaged report per alpha, all else fixed.
std::vector<std::pair<double, metrics_report>> alpha_sweep(
    const train_config& base, std::span<const valued_prompt> dataset,
    std::span<const double> alphas, std::span<const std::uint64_t> seeds);

metrics_report mean_report(std::span<const metrics_report> reports);

void write_trajectory_csv(std::ostream& out, const trajectory_table& top,
                          const trajectory_table& bottom);
void write_ablation_csv(std::ostream& out, const ablation_grid& grid);
void write_alpha_sweep_csv(std::ostream& out,
                           std::span<const std::pair<double, metrics_report>> rows);

}  // namespace rlev
