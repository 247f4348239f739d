#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "rlev/exam_env.hpp"
#include "rlev/policy.hpp"
#include "rlev/value_model.hpp"

namespace rlev {

// Enumeration is only allowed while the feasible-sequence count stays under
// this budget; larger instances belong to the Monte-Carlo estimators.
inline constexpr double default_sequence_budget = 1e6;

struct enumerated_sequence {
    std::vector<token> tokens;  // trailing EOS unless truncated at max_len
    double probability = 0.0;
    bool correct = false;
};

struct enumerated_space {
    int prompt_id = 0;
    std::vector<enumerated_sequence> sequences;
    double total_probability = 0.0;
};

// Number of feasible sequences: every non-EOS string shorter than max_len
// followed by EOS, plus every non-EOS string of exactly max_len tokens.
double feasible_sequence_count(int vocab_size, int max_len);

enumerated_space enumerate(const policy& pi, const valued_prompt& prompt,
                           double budget = default_sequence_budget);

// J = sum over feasible sequences of probability * reward.
double exact_objective(const policy& pi, const valued_prompt& prompt, const reward_spec& spec,
                       double budget = default_sequence_budget);

// p_v: probability the finished response is correct given the next token is v,
// over all continuations under the current policy. For v = EOS this is the
// verdict on the prefix itself.
double correctness_probability(const policy& pi, const valued_prompt& prompt,
                               std::span<const token> prefix, token v);

// Distribution-level response statistics under the current policy: the
// probability that a full generation is correct and the expected response
// length (tokens before EOS or the cap).
struct response_stats {
    double p_correct = 0.0;
    double expected_length = 0.0;
};

response_stats expected_response_stats(const policy& pi, const valued_prompt& prompt,
                                       double budget = default_sequence_budget);

// Gradient of J with respect to one stored logit row. `conditional` is the
// single-step form pi_k * s * (p_k - sum_v pi_v p_v) evaluated at
// reach-averaged correctness probabilities; `total` multiplies in the
// probability of reaching the context and is what finite differences see.
struct logit_gradient {
    context ctx;
    double scale = 1.0;  // s(x) under the reward spec
    double reach_probability = 0.0;
    std::vector<double> pi_row;
    std::vector<double> p_hat;  // reach-conditioned correctness probability per token
    std::vector<double> conditional;
    std::vector<double> total;
};

logit_gradient exact_logit_gradient(const policy& pi, const valued_prompt& prompt,
                                    const context& ctx, const reward_spec& spec,
                                    double budget = default_sequence_budget);

// Closed form for the EOS entry: s * pi_e * (1 - pi_e) * (p_e - p_bar_not_e),
// with p_bar_not_e the policy-weighted mean correctness over non-EOS tokens.
// `value` carries the reach weight so it matches logit_gradient::total[0].
struct eos_gradient_result {
    double value = 0.0;
    double conditional = 0.0;
    double pi_e = 0.0;
    double p_e = 0.0;
    double p_bar_not_e = 0.0;
    double reach_probability = 0.0;
    bool degenerate = false;  // pi_e == 1 exactly; value forced to 0
};

eos_gradient_result eos_gradient(const policy& pi, const valued_prompt& prompt, const context& ctx,
                                 const reward_spec& spec,
                                 double budget = default_sequence_budget);

// Central differences of exact_objective on one logit row.
std::vector<double> finite_difference_gradient(const policy& pi, const valued_prompt& prompt,
                                               const context& ctx, const reward_spec& spec,
                                               double eps,
                                               double budget = default_sequence_budget);

// Every context the prompt can put the policy in, sorted.
std::vector<context> reachable_contexts(const policy& pi, const valued_prompt& prompt);

struct grad_report_row {
    context ctx;
    int token_index = 0;
    double analytic = 0.0;           // reach-weighted exact gradient entry
    double finite_difference = 0.0;
    std::optional<double> eos_formula;  // populated when token_index is EOS
    double max_abs_error = 0.0;         // |analytic - finite_difference|
};

// Full analytic-vs-finite-difference comparison over all reachable contexts.
std::vector<grad_report_row> gradient_report(const policy& pi, const valued_prompt& prompt,
                                             const reward_spec& spec, double eps,
                                             double budget = default_sequence_budget);

void write_gradient_report_csv(std::ostream& out, std::span<const grad_report_row> rows);

// Randomized small instance for gradient checking: logits uniform in [-2, 2]
// on every reachable context, a random short answer, a random prompt value,
// and a human-aligned reward with the given alpha.
struct gradient_check_instance {
    policy pi;
    valued_prompt prompt;
    reward_spec spec;
};

gradient_check_instance make_gradient_check_instance(int vocab_size, int max_len,
                                                     int context_window, double alpha,
                                                     std::uint64_t seed, int prompt_id = 0);

}  // namespace rlev
