#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <unordered_map>
#include <vector>

#include "rlev/exam_env.hpp"
#include "rlev/rng.hpp"

namespace rlev {

// Conditioning state of the tabular policy: which prompt, how many tokens
// emitted so far, and the last min(position, window) of them.
struct context {
    int prompt_id = 0;
    int position = 0;
    std::vector<token> recent;

    bool operator==(const context&) const = default;
    bool operator<(const context& other) const;
    std::string key() const;  // "prompt_id:position:recent-tokens", used in CSV/JSONL
};

struct context_hash {
    std::size_t operator()(const context& c) const noexcept {
        std::uint64_t h = mix(static_cast<std::uint64_t>(c.prompt_id),
                              static_cast<std::uint64_t>(c.position));
        for (token t : c.recent) h = mix(h, static_cast<std::uint64_t>(t) + 1);
        return static_cast<std::size_t>(h);
    }
};

// Context-indexed softmax policy over a small vocabulary with EOS at index 0.
// Unseen contexts read as the zero logit row, i.e. the uniform distribution.
class policy {
public:
    policy(int vocab_size, int context_window, int max_len);

    int vocab_size() const { return vocab_size_; }
    int context_window() const { return context_window_; }
    int max_len() const { return max_len_; }
    std::size_t row_count() const { return logits_.size(); }

    // Context for the next step after `generated` tokens of this prompt.
    context make_context(int prompt_id, std::span<const token> generated) const;

    // nullptr when the context has no stored row.
    const std::vector<double>* find_logits(const context& ctx) const;
    std::vector<double> logits(const context& ctx) const;
    std::vector<double> step_distribution(const context& ctx) const;

    void add_to_logits(const context& ctx, std::span<const double> delta);
    void set_logits(const context& ctx, std::vector<double> row);

    // Stored rows in (prompt_id, position, recent) order; basis of the
    // checkpoint format, so the ordering is part of the contract.
    std::vector<std::pair<context, std::vector<double>>> rows_sorted() const;

    void save(std::ostream& out) const;
    void save_file(const std::filesystem::path& path) const;
    static policy load(std::istream& in, const std::string& where);
    static policy load_file(const std::filesystem::path& path);

private:
    int vocab_size_;
    int context_window_;
    int max_len_;
    std::unordered_map<context, std::vector<double>, context_hash> logits_;
};

// One sampled (or greedy) response.
struct rollout {
    int prompt_id = 0;
    std::vector<token> tokens;  // ends with EOS unless truncated at max_len
    std::vector<std::vector<double>> step_distributions;  // filled on request
    bool truncated = false;
    bool correct = false;
    double reward = 0.0;
    int length = 0;  // non-EOS tokens emitted

    std::span<const token> response() const;  // tokens without the terminal EOS
};

rollout sample_rollout(const policy& pi, const valued_prompt& prompt, std::uint64_t rng_seed,
                       bool record_distributions = false);
rollout sample_rollout(const policy& pi, const valued_prompt& prompt, rng& gen,
                       bool record_distributions = false);

// Argmax decoding, lowest index on ties.
rollout greedy_rollout(const policy& pi, const valued_prompt& prompt);

// Sum of per-step log probabilities of a feasible response (ends in EOS or
// has exactly max_len tokens).
double logprob(const policy& pi, const valued_prompt& prompt, std::span<const token> tokens);

}  // namespace rlev
