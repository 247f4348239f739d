#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rlev/exam_env.hpp"
#include "rlev/metrics.hpp"
#include "rlev/policy.hpp"
#include "rlev/value_model.hpp"

namespace rlev {

enum class estimator { reinforce_baseline, rloo, grpo };

const char* to_string(estimator kind);
estimator estimator_from_string(const std::string& name);

struct estimator_kind {
    estimator kind = estimator::rloo;
    int group_size = 8;           // rollouts per prompt for rloo/grpo
    double baseline_decay = 0.9;  // EMA decay of the reinforce baseline
    double grpo_std_floor = 1e-6;
};

// Advantage vector for one group (rloo/grpo: G rollouts of the same prompt)
// or one batch (reinforce). The reinforce baseline reads baseline_state and
// then decays it toward the batch mean.
std::vector<double> advantages(const estimator_kind& kind, std::span<const double> rewards,
                               double& baseline_state);

// Score-function gradient of the advantage-weighted log-likelihood,
// accumulated per context in first-visit order. All step distributions are
// taken from the policy as passed in, so applying the result afterwards is
// one simultaneous gradient step.
struct logit_update {
    context ctx;
    std::vector<double> grad;
};

std::vector<logit_update> policy_gradient(const policy& pi, std::span<const rollout> rollouts,
                                          std::span<const double> advantages);

void apply_update(policy& pi, std::span<const rollout> rollouts,
                  std::span<const double> advantages, double lr);

struct train_config {
    estimator_kind est;
    reward_spec rspec;
    double learning_rate = 0.05;  // desk-scale default for tabular logits
    int rollout_batch = 128;
    int epochs = 1;
    std::uint64_t seed = 0;
    int eval_every = 50;
    int max_len = 6;
    int context_window = 1;
    int vocab_size = 0;  // 0 = infer from the dataset
};

struct run_log_record {
    int step = 0;
    double mean_reward = 0.0;
    double acc = 0.0;
    double h_acc = 0.0;
    double mean_length = 0.0;
    std::optional<std::string> policy_checkpoint_ref;
};

std::string to_jsonl(const run_log_record& rec);

struct train_result {
    policy final_policy;
    std::vector<run_log_record> log;
    reward_spec resolved_spec;  // uniform_scale filled in, shuffle applied
};

// Deterministic on-policy training. Rollout seeds depend only on
// (config.seed, step, slot), never on the reward form, so paired ablation
// runs share their sampling streams.
train_result train(const train_config& config, std::span<const valued_prompt> dataset);

// Greedy decoding over the dataset; the evaluation slice behind all metrics.
std::vector<eval_result> evaluate_policy(const policy& pi, std::span<const valued_prompt> dataset);

int infer_vocab_size(std::span<const valued_prompt> dataset);

}  // namespace rlev
