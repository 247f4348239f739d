#include "rlev/exact_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "rlev/errors.hpp"

namespace rlev {

namespace {

void check_budget(const policy& pi, double budget) {
    const double count = feasible_sequence_count(pi.vocab_size(), pi.max_len());
    if (count > budget) {
        std::ostringstream msg;
        msg << "enumeration budget exceeded: vocab_size=" << pi.vocab_size()
            << ", max_len=" << pi.max_len() << " spans " << count << " sequences (budget "
            << budget << "); use the sampling estimators instead";
        throw budget_error(msg.str());
    }
}

bool prefix_correct(std::span<const token> prefix, const valued_prompt& prompt) {
    return verify(prefix, prompt.reference_answer).correct;
}

// P(final response correct | current non-terminated prefix) under pi.
double continuation_correct_prob(const policy& pi, const valued_prompt& prompt,
                                 std::vector<token>& prefix) {
    const std::vector<double> dist = pi.step_distribution(pi.make_context(prompt.id, prefix));
    double total = dist[0] * (prefix_correct(prefix, prompt) ? 1.0 : 0.0);
    const bool last_step = static_cast<int>(prefix.size()) + 1 == pi.max_len();
    for (token v = 1; v < pi.vocab_size(); ++v) {
        prefix.push_back(v);
        const double p = last_step ? (prefix_correct(prefix, prompt) ? 1.0 : 0.0)
                                   : continuation_correct_prob(pi, prompt, prefix);
        prefix.pop_back();
        total += dist[static_cast<std::size_t>(v)] * p;
    }
    return total;
}

// p_v for every token at once, for a non-terminated prefix.
std::vector<double> per_token_correct_probs(const policy& pi, const valued_prompt& prompt,
                                            std::vector<token>& prefix) {
    std::vector<double> p(static_cast<std::size_t>(pi.vocab_size()), 0.0);
    p[0] = prefix_correct(prefix, prompt) ? 1.0 : 0.0;
    const bool last_step = static_cast<int>(prefix.size()) + 1 == pi.max_len();
    for (token v = 1; v < pi.vocab_size(); ++v) {
        prefix.push_back(v);
        p[static_cast<std::size_t>(v)] = last_step
                                             ? (prefix_correct(prefix, prompt) ? 1.0 : 0.0)
                                             : continuation_correct_prob(pi, prompt, prefix);
        prefix.pop_back();
    }
    return p;
}

void validate_context(const policy& pi, const context& ctx) {
    if (ctx.position < 0 || ctx.position >= pi.max_len())
        throw std::invalid_argument("context position " + std::to_string(ctx.position) +
                                    " outside [0, max_len)");
    const std::size_t expected =
        std::min(static_cast<std::size_t>(ctx.position),
                 static_cast<std::size_t>(pi.context_window()));
    if (ctx.recent.size() != expected)
        throw std::invalid_argument("context '" + ctx.key() + "' is unreachable: recent length " +
                                    std::to_string(ctx.recent.size()) + " should be " +
                                    std::to_string(expected));
    for (token t : ctx.recent)
        if (t <= 0 || t >= pi.vocab_size())
            throw std::invalid_argument("context '" + ctx.key() +
                                        "' is unreachable: recent token out of range");
}

// Accumulated statistics of one logit row across every prefix that lands on it.
struct context_stats {
    double reach = 0.0;
    std::vector<double> p_weighted;  // reach-weighted p_v accumulators
};

void accumulate_context_stats(const policy& pi, const valued_prompt& prompt, const context& ctx,
                              std::vector<token>& prefix, double prob, context_stats& stats) {
    if (static_cast<int>(prefix.size()) == ctx.position) {
        if (pi.make_context(prompt.id, prefix) == ctx) {
            stats.reach += prob;
            const std::vector<double> p = per_token_correct_probs(pi, prompt, prefix);
            for (std::size_t k = 0; k < p.size(); ++k) stats.p_weighted[k] += prob * p[k];
        }
        return;
    }
    const std::vector<double> dist = pi.step_distribution(pi.make_context(prompt.id, prefix));
    for (token v = 1; v < pi.vocab_size(); ++v) {
        prefix.push_back(v);
        accumulate_context_stats(pi, prompt, ctx, prefix, prob * dist[static_cast<std::size_t>(v)],
                                 stats);
        prefix.pop_back();
    }
}

context_stats gather_context_stats(const policy& pi, const valued_prompt& prompt,
                                   const context& ctx, double budget) {
    check_budget(pi, budget);
    validate_context(pi, ctx);
    context_stats stats;
    stats.p_weighted.assign(static_cast<std::size_t>(pi.vocab_size()), 0.0);
    std::vector<token> prefix;
    accumulate_context_stats(pi, prompt, ctx, prefix, 1.0, stats);
    if (stats.reach <= 0.0)
        throw std::invalid_argument("context '" + ctx.key() + "' is unreachable for prompt " +
                                    std::to_string(prompt.id));
    return stats;
}

void enumerate_walk(const policy& pi, const valued_prompt& prompt, std::vector<token>& prefix,
                    double prob, std::vector<enumerated_sequence>& out) {
    const std::vector<double> dist = pi.step_distribution(pi.make_context(prompt.id, prefix));

    enumerated_sequence stop;
    stop.tokens = prefix;
    stop.tokens.push_back(eos_token);
    stop.probability = prob * dist[0];
    stop.correct = prefix_correct(prefix, prompt);
    out.push_back(std::move(stop));

    const bool last_step = static_cast<int>(prefix.size()) + 1 == pi.max_len();
    for (token v = 1; v < pi.vocab_size(); ++v) {
        prefix.push_back(v);
        const double p = prob * dist[static_cast<std::size_t>(v)];
        if (last_step) {
            enumerated_sequence full;
            full.tokens = prefix;
            full.probability = p;
            full.correct = prefix_correct(prefix, prompt);
            out.push_back(std::move(full));
        } else {
            enumerate_walk(pi, prompt, prefix, p, out);
        }
        prefix.pop_back();
    }
}

void stats_walk(const policy& pi, const valued_prompt& prompt, std::vector<token>& prefix,
                double prob, response_stats& stats) {
    const std::vector<double> dist = pi.step_distribution(pi.make_context(prompt.id, prefix));
    const double stop = prob * dist[0];
    if (prefix_correct(prefix, prompt)) stats.p_correct += stop;
    stats.expected_length += stop * static_cast<double>(prefix.size());
    const bool last_step = static_cast<int>(prefix.size()) + 1 == pi.max_len();
    for (token v = 1; v < pi.vocab_size(); ++v) {
        prefix.push_back(v);
        const double p = prob * dist[static_cast<std::size_t>(v)];
        if (last_step) {
            if (prefix_correct(prefix, prompt)) stats.p_correct += p;
            stats.expected_length += p * static_cast<double>(prefix.size());
        } else {
            stats_walk(pi, prompt, prefix, p, stats);
        }
        prefix.pop_back();
    }
}

double objective_walk(const policy& pi, const valued_prompt& prompt, const reward_spec& spec,
                      std::vector<token>& prefix, double prob) {
    const std::vector<double> dist = pi.step_distribution(pi.make_context(prompt.id, prefix));
    double j = prob * dist[0] * reward(spec, prompt.value, prefix_correct(prefix, prompt));
    const bool last_step = static_cast<int>(prefix.size()) + 1 == pi.max_len();
    for (token v = 1; v < pi.vocab_size(); ++v) {
        prefix.push_back(v);
        const double p = prob * dist[static_cast<std::size_t>(v)];
        j += last_step ? p * reward(spec, prompt.value, prefix_correct(prefix, prompt))
                       : objective_walk(pi, prompt, spec, prefix, p);
        prefix.pop_back();
    }
    return j;
}

}  // namespace

double feasible_sequence_count(int vocab_size, int max_len) {
    const double branching = vocab_size - 1;
    double count = 0.0;
    double level = 1.0;
    for (int len = 0; len < max_len; ++len) {
        count += level;  // prefixes of this length followed by EOS
        level *= branching;
    }
    return count + level;  // plus the truncated full-length strings
}

enumerated_space enumerate(const policy& pi, const valued_prompt& prompt, double budget) {
    check_budget(pi, budget);
    enumerated_space space;
    space.prompt_id = prompt.id;
    std::vector<token> prefix;
    enumerate_walk(pi, prompt, prefix, 1.0, space.sequences);
    for (const auto& seq : space.sequences) space.total_probability += seq.probability;
    return space;
}

double exact_objective(const policy& pi, const valued_prompt& prompt, const reward_spec& spec,
                       double budget) {
    check_budget(pi, budget);
    std::vector<token> prefix;
    return objective_walk(pi, prompt, spec, prefix, 1.0);
}

response_stats expected_response_stats(const policy& pi, const valued_prompt& prompt,
                                       double budget) {
    check_budget(pi, budget);
    response_stats stats;
    std::vector<token> prefix;
    stats_walk(pi, prompt, prefix, 1.0, stats);
    return stats;
}

double correctness_probability(const policy& pi, const valued_prompt& prompt,
                               std::span<const token> prefix, token v) {
    if (static_cast<int>(prefix.size()) >= pi.max_len())
        throw std::invalid_argument("correctness_probability: prefix already at max_len");
    for (token t : prefix)
        if (t == eos_token)
            throw std::invalid_argument("correctness_probability: prefix contains EOS");
    if (v < 0 || v >= pi.vocab_size())
        throw std::invalid_argument("correctness_probability: token out of range");

    std::vector<token> work(prefix.begin(), prefix.end());
    if (v == eos_token) return prefix_correct(work, prompt) ? 1.0 : 0.0;
    work.push_back(v);
    if (static_cast<int>(work.size()) == pi.max_len())
        return prefix_correct(work, prompt) ? 1.0 : 0.0;
    return continuation_correct_prob(pi, prompt, work);
}

logit_gradient exact_logit_gradient(const policy& pi, const valued_prompt& prompt,
                                    const context& ctx, const reward_spec& spec, double budget) {
    const context_stats stats = gather_context_stats(pi, prompt, ctx, budget);

    logit_gradient g;
    g.ctx = ctx;
    g.scale = reward_scale(spec, prompt.value);
    g.reach_probability = stats.reach;
    g.pi_row = pi.step_distribution(ctx);
    g.p_hat.resize(stats.p_weighted.size());
    for (std::size_t k = 0; k < g.p_hat.size(); ++k) g.p_hat[k] = stats.p_weighted[k] / stats.reach;

    double mean_p = 0.0;
    for (std::size_t v = 0; v < g.pi_row.size(); ++v) mean_p += g.pi_row[v] * g.p_hat[v];

    g.conditional.resize(g.pi_row.size());
    g.total.resize(g.pi_row.size());
    for (std::size_t k = 0; k < g.pi_row.size(); ++k) {
        g.conditional[k] = g.pi_row[k] * g.scale * (g.p_hat[k] - mean_p);
        g.total[k] = g.reach_probability * g.conditional[k];
    }
    return g;
}

eos_gradient_result eos_gradient(const policy& pi, const valued_prompt& prompt, const context& ctx,
                                 const reward_spec& spec, double budget) {
    const context_stats stats = gather_context_stats(pi, prompt, ctx, budget);
    const std::vector<double> dist = pi.step_distribution(ctx);
    const double scale = reward_scale(spec, prompt.value);

    eos_gradient_result r;
    r.pi_e = dist[0];
    r.p_e = stats.p_weighted[0] / stats.reach;
    r.reach_probability = stats.reach;

    if (r.pi_e == 1.0) {
        r.degenerate = true;  // p_bar_not_e undefined; report a zero gradient
        return r;
    }

    double non_eos_weighted = 0.0;
    for (std::size_t v = 1; v < dist.size(); ++v)
        non_eos_weighted += dist[v] * (stats.p_weighted[v] / stats.reach);
    r.p_bar_not_e = non_eos_weighted / (1.0 - r.pi_e);
    r.conditional = scale * r.pi_e * (1.0 - r.pi_e) * (r.p_e - r.p_bar_not_e);
    r.value = stats.reach * r.conditional;
    return r;
}

std::vector<double> finite_difference_gradient(const policy& pi, const valued_prompt& prompt,
                                               const context& ctx, const reward_spec& spec,
                                               double eps, double budget) {
    if (!(eps > 0.0)) throw std::invalid_argument("finite_difference_gradient: eps must be > 0");
    check_budget(pi, budget);
    validate_context(pi, ctx);

    const std::vector<double> base = pi.logits(ctx);
    policy work = pi;
    std::vector<double> grad(base.size(), 0.0);
    for (std::size_t k = 0; k < base.size(); ++k) {
        std::vector<double> row = base;
        row[k] = base[k] + eps;
        work.set_logits(ctx, row);
        const double plus = exact_objective(work, prompt, spec, budget);
        row[k] = base[k] - eps;
        work.set_logits(ctx, std::move(row));
        const double minus = exact_objective(work, prompt, spec, budget);
        grad[k] = (plus - minus) / (2.0 * eps);
        work.set_logits(ctx, base);
    }
    return grad;
}

namespace {

void collect_contexts(const policy& pi, const valued_prompt& prompt, std::vector<token>& prefix,
                      std::set<context>& out) {
    out.insert(pi.make_context(prompt.id, prefix));
    // Prefixes of length max_len are forced stops, not decision points.
    if (static_cast<int>(prefix.size()) + 1 >= pi.max_len()) return;
    for (token v = 1; v < pi.vocab_size(); ++v) {
        prefix.push_back(v);
        collect_contexts(pi, prompt, prefix, out);
        prefix.pop_back();
    }
}

}  // namespace

std::vector<context> reachable_contexts(const policy& pi, const valued_prompt& prompt) {
    std::set<context> unique;
    std::vector<token> prefix;
    collect_contexts(pi, prompt, prefix, unique);
    return std::vector<context>(unique.begin(), unique.end());
}

std::vector<grad_report_row> gradient_report(const policy& pi, const valued_prompt& prompt,
                                             const reward_spec& spec, double eps, double budget) {
    std::vector<grad_report_row> rows;
    for (const context& ctx : reachable_contexts(pi, prompt)) {
        const logit_gradient g = exact_logit_gradient(pi, prompt, ctx, spec, budget);
        const eos_gradient_result e = eos_gradient(pi, prompt, ctx, spec, budget);
        const std::vector<double> fd = finite_difference_gradient(pi, prompt, ctx, spec, eps, budget);
        for (int k = 0; k < pi.vocab_size(); ++k) {
            grad_report_row row;
            row.ctx = ctx;
            row.token_index = k;
            row.analytic = g.total[static_cast<std::size_t>(k)];
            row.finite_difference = fd[static_cast<std::size_t>(k)];
            if (k == eos_token) row.eos_formula = e.value;
            row.max_abs_error = std::abs(row.analytic - row.finite_difference);
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

gradient_check_instance make_gradient_check_instance(int vocab_size, int max_len,
                                                     int context_window, double alpha,
                                                     std::uint64_t seed, int prompt_id) {
    rng gen(mix(seed, 0x67726164ull));

    valued_prompt prompt;
    prompt.id = prompt_id;
    prompt.exam_id = 0;
    prompt.prompt_tokens = {1};
    const int answer_len = 1 + gen.next_below(std::min(2, max_len));
    prompt.reference_answer.resize(static_cast<std::size_t>(answer_len));
    for (auto& t : prompt.reference_answer) t = 1 + gen.next_below(vocab_size - 1);
    prompt.exam_total = 100.0;
    prompt.raw_score = std::floor(gen.next_double() * 100.0 * 1000.0) / 1000.0;
    prompt.value = prompt.raw_score / prompt.exam_total;

    gradient_check_instance instance{policy(vocab_size, context_window, max_len), prompt, {}};
    instance.spec.form = reward_form::human_aligned;
    instance.spec.alpha = alpha;

    for (const context& ctx : reachable_contexts(instance.pi, prompt)) {
        std::vector<double> row(static_cast<std::size_t>(vocab_size));
        for (double& z : row) z = gen.next_in(-2.0, 2.0);
        instance.pi.set_logits(ctx, std::move(row));
    }
    return instance;
}

void write_gradient_report_csv(std::ostream& out, std::span<const grad_report_row> rows) {
    auto num = [](double x) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.12g", x);
        return std::string(buf);
    };
    out << "context,token,analytic,finite_difference,eos_formula,max_abs_error\n";
    for (const auto& row : rows) {
        out << row.ctx.key() << ',' << row.token_index << ',' << num(row.analytic) << ','
            << num(row.finite_difference) << ','
            << (row.eos_formula ? num(*row.eos_formula) : std::string()) << ','
            << num(row.max_abs_error) << '\n';
    }
}

}  // namespace rlev
