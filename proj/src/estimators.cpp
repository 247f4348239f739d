#include "rlev/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

#include <json.hpp>

#include "rlev/errors.hpp"

namespace rlev {

const char* to_string(estimator kind) {
    switch (kind) {
        case estimator::reinforce_baseline: return "reinforce_baseline";
        case estimator::rloo: return "rloo";
        case estimator::grpo: return "grpo";
    }
    throw std::logic_error("unknown estimator");
}

estimator estimator_from_string(const std::string& name) {
    if (name == "reinforce_baseline" || name == "reinforce") return estimator::reinforce_baseline;
    if (name == "rloo") return estimator::rloo;
    if (name == "grpo") return estimator::grpo;
    throw config_error("unknown estimator '" + name + "'");
}

std::vector<double> advantages(const estimator_kind& kind, std::span<const double> rewards,
                               double& baseline_state) {
    if (rewards.empty()) throw config_error("advantages: empty reward group");
    std::vector<double> advs(rewards.size());
    const double sum = std::accumulate(rewards.begin(), rewards.end(), 0.0);
    const double mean = sum / static_cast<double>(rewards.size());

    switch (kind.kind) {
        case estimator::reinforce_baseline: {
            if (kind.baseline_decay < 0.0 || kind.baseline_decay >= 1.0)
                throw config_error("advantages: baseline_decay must be in [0, 1)");
            for (std::size_t i = 0; i < rewards.size(); ++i)
                advs[i] = rewards[i] - baseline_state;
            baseline_state = kind.baseline_decay * baseline_state +
                             (1.0 - kind.baseline_decay) * mean;
            return advs;
        }
        case estimator::rloo: {
            if (kind.group_size < 2)
                throw config_error("advantages: rloo needs group_size >= 2");
            if (rewards.size() != static_cast<std::size_t>(kind.group_size))
                throw config_error("advantages: got " + std::to_string(rewards.size()) +
                                   " rewards for group_size " + std::to_string(kind.group_size));
            const double denom = static_cast<double>(rewards.size()) - 1.0;
            for (std::size_t i = 0; i < rewards.size(); ++i)
                advs[i] = rewards[i] - (sum - rewards[i]) / denom;
            return advs;
        }
        case estimator::grpo: {
            if (kind.group_size < 2)
                throw config_error("advantages: grpo needs group_size >= 2");
            if (rewards.size() != static_cast<std::size_t>(kind.group_size))
                throw config_error("advantages: got " + std::to_string(rewards.size()) +
                                   " rewards for group_size " + std::to_string(kind.group_size));
            if (!(kind.grpo_std_floor > 0.0))
                throw config_error("advantages: grpo_std_floor must be > 0");
            double var = 0.0;
            for (double r : rewards) var += (r - mean) * (r - mean);
            var /= static_cast<double>(rewards.size());
            const double denom = std::max(std::sqrt(var), kind.grpo_std_floor);
            for (std::size_t i = 0; i < rewards.size(); ++i) advs[i] = (rewards[i] - mean) / denom;
            return advs;
        }
    }
    throw std::logic_error("unknown estimator");
}

std::vector<logit_update> policy_gradient(const policy& pi, std::span<const rollout> rollouts,
                                          std::span<const double> advantages) {
    if (rollouts.size() != advantages.size())
        throw std::invalid_argument("policy_gradient: one advantage per rollout required");

    std::vector<logit_update> updates;
    std::unordered_map<context, std::size_t, context_hash> index;
    const std::size_t vocab = static_cast<std::size_t>(pi.vocab_size());

    for (std::size_t i = 0; i < rollouts.size(); ++i) {
        const double a = advantages[i];
        if (a == 0.0) continue;
        const rollout& r = rollouts[i];
        const std::span<const token> tokens(r.tokens);
        for (std::size_t t = 0; t < tokens.size(); ++t) {
            const context ctx = pi.make_context(r.prompt_id, tokens.first(t));
            auto [it, inserted] = index.try_emplace(ctx, updates.size());
            if (inserted) updates.push_back({ctx, std::vector<double>(vocab, 0.0)});
            std::vector<double>& grad = updates[it->second].grad;
            const std::vector<double> dist = pi.step_distribution(ctx);
            for (std::size_t k = 0; k < vocab; ++k) grad[k] -= a * dist[k];
            grad[static_cast<std::size_t>(tokens[t])] += a;
        }
    }
    return updates;
}

void apply_update(policy& pi, std::span<const rollout> rollouts,
                  std::span<const double> advantages, double lr) {
    std::vector<logit_update> updates = policy_gradient(pi, rollouts, advantages);
    for (auto& u : updates) {
        for (double& g : u.grad) g *= lr;
        pi.add_to_logits(u.ctx, u.grad);
    }
}

std::string to_jsonl(const run_log_record& rec) {
    nlohmann::json j{
        {"step", rec.step},
        {"mean_reward", rec.mean_reward},
        {"acc", rec.acc},
        {"h_acc", rec.h_acc},
        {"mean_length", rec.mean_length},
    };
    if (rec.policy_checkpoint_ref) j["policy_checkpoint_ref"] = *rec.policy_checkpoint_ref;
    return j.dump();
}

std::vector<eval_result> evaluate_policy(const policy& pi,
                                         std::span<const valued_prompt> dataset) {
    std::vector<eval_result> results;
    results.reserve(dataset.size());
    for (const auto& prompt : dataset) {
        const rollout r = greedy_rollout(pi, prompt);
        results.push_back({prompt.id, prompt.value, r.correct, r.length});
    }
    return results;
}

int infer_vocab_size(std::span<const valued_prompt> dataset) {
    token max_token = 1;
    for (const auto& p : dataset) {
        for (token t : p.prompt_tokens) max_token = std::max(max_token, t);
        for (token t : p.reference_answer) max_token = std::max(max_token, t);
    }
    return std::max(3, max_token + 1);
}

namespace {

void validate_train_config(const train_config& c) {
    if (c.learning_rate < 0.0) throw config_error("train: learning_rate must be >= 0");
    if (c.rollout_batch < 1) throw config_error("train: rollout_batch must be >= 1");
    if (c.epochs < 1) throw config_error("train: epochs must be >= 1");
    if (c.eval_every < 1) throw config_error("train: eval_every must be >= 1");
    if (c.max_len < 1) throw config_error("train: max_len must be >= 1");
    if (c.context_window < 0) throw config_error("train: context_window must be >= 0");
}

run_log_record eval_snapshot(const policy& pi, std::span<const valued_prompt> dataset, int step,
                             double mean_reward) {
    run_log_record rec;
    rec.step = step;
    rec.mean_reward = mean_reward;
    double total_value = 0.0;
    double achieved = 0.0;
    double total_length = 0.0;
    int correct = 0;
    for (const auto& res : evaluate_policy(pi, dataset)) {
        total_value += res.value;
        total_length += res.response_length;
        if (res.correct) {
            ++correct;
            achieved += res.value;
        }
    }
    const double n = static_cast<double>(dataset.size());
    rec.acc = correct / n;
    rec.h_acc = total_value > 0.0 ? achieved / total_value : 0.0;
    rec.mean_length = total_length / n;
    return rec;
}

}  // namespace

train_result train(const train_config& config, std::span<const valued_prompt> dataset) {
    if (dataset.empty()) throw data_error("train: empty dataset");
    validate_train_config(config);

    const int vocab = config.vocab_size > 0 ? config.vocab_size : infer_vocab_size(dataset);
    for (const auto& p : dataset)
        for (token t : p.reference_answer)
            if (t >= vocab)
                throw config_error("train: vocab_size " + std::to_string(vocab) +
                                   " cannot emit answer token " + std::to_string(t));

    const std::vector<double> values = dataset_values(dataset);
    const reward_spec spec = resolve_uniform_scale(config.rspec, values);
    const std::vector<double> reward_values = effective_values(spec, values);

    train_result out{policy(vocab, config.context_window, config.max_len), {}, spec};
    policy& pi = out.final_policy;

    const bool grouped = config.est.kind != estimator::reinforce_baseline;
    const int group = grouped ? config.est.group_size : 1;
    const int prompts_per_step = std::max(1, config.rollout_batch / group);

    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    double baseline_state = 0.0;
    int global_step = 0;
    const int steps_per_epoch =
        static_cast<int>((dataset.size() + prompts_per_step - 1) /
                         static_cast<std::size_t>(prompts_per_step));
    const int total_steps = steps_per_epoch * config.epochs;

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        rng order_gen(mix(config.seed, 0x6f72646572ull, static_cast<std::uint64_t>(epoch)));
        order_gen.shuffle(order);

        for (std::size_t chunk = 0; chunk < dataset.size(); chunk += prompts_per_step) {
            ++global_step;
            const std::size_t chunk_end =
                std::min(chunk + static_cast<std::size_t>(prompts_per_step), dataset.size());

            std::vector<rollout> rollouts;
            std::vector<double> advs;
            std::vector<double> batch_rewards;
            double reward_sum = 0.0;

            for (std::size_t slot = chunk; slot < chunk_end; ++slot) {
                const std::size_t prompt_index = order[slot];
                const valued_prompt& prompt = dataset[prompt_index];
                std::vector<double> group_rewards;
                for (int g = 0; g < group; ++g) {
                    const std::uint64_t rollout_seed =
                        mix(config.seed, 0x726f6c6cull,
                            static_cast<std::uint64_t>(global_step),
                            static_cast<std::uint64_t>((slot - chunk) * group +
                                                       static_cast<std::size_t>(g)));
                    rollout r = sample_rollout(pi, prompt, rollout_seed);
                    r.reward = reward(spec, reward_values[prompt_index], r.correct);
                    reward_sum += r.reward;
                    group_rewards.push_back(r.reward);
                    rollouts.push_back(std::move(r));
                }
                if (grouped) {
                    const std::vector<double> a =
                        advantages(config.est, group_rewards, baseline_state);
                    advs.insert(advs.end(), a.begin(), a.end());
                } else {
                    batch_rewards.push_back(group_rewards.front());
                }
            }
            if (!grouped) {
                advs = advantages(config.est, batch_rewards, baseline_state);
            }

            apply_update(pi, rollouts, advs, config.learning_rate);

            if (global_step % config.eval_every == 0 || global_step == total_steps) {
                out.log.push_back(eval_snapshot(pi, dataset, global_step,
                                                reward_sum /
                                                    static_cast<double>(rollouts.size())));
            }
        }
    }
    return out;
}

}  // namespace rlev
