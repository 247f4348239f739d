#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "rlev/errors.hpp"
#include "rlev/exact_oracle.hpp"
#include "rlev/rng.hpp"

using namespace rlev;

namespace {

valued_prompt make_prompt(std::vector<token> answer, double value = 0.02, int id = 0) {
    valued_prompt p;
    p.id = id;
    p.prompt_tokens = {1};
    p.reference_answer = std::move(answer);
    p.exam_total = 100.0;
    p.raw_score = value * 100.0;
    p.value = value;
    return p;
}

reward_spec aligned_spec(double alpha = 10.0) {
    reward_spec spec;
    spec.alpha = alpha;
    return spec;
}

}  // namespace

TEST_CASE("enumeration of vocab 3, max_len 2 lists exactly seven sequences") {
    policy pi(3, 1, 2);
    const auto prompt = make_prompt({1});
    const enumerated_space space = enumerate(pi, prompt);

    CHECK(feasible_sequence_count(3, 2) == 7.0);
    REQUIRE(space.sequences.size() == 7);
    CHECK(space.total_probability == doctest::Approx(1.0).epsilon(1e-12));

    // Uniform policy: immediate EOS has probability 1/3.
    for (const auto& seq : space.sequences) {
        if (seq.tokens == std::vector<token>{eos_token})
            CHECK(seq.probability == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    }
}

TEST_CASE("enumerated probabilities always sum to one") {
    for (int trial = 0; trial < 100; ++trial) {
        const int vocab = 3 + trial % 2;
        const int max_len = 2 + trial % 2;
        const auto instance = make_gradient_check_instance(
            vocab, max_len, trial % 3, 10.0, static_cast<std::uint64_t>(trial), trial);
        const enumerated_space space = enumerate(instance.pi, instance.prompt);
        CHECK(std::abs(space.total_probability - 1.0) < 1e-10);
        for (const auto& seq : space.sequences) {
            CHECK(seq.probability > 0.0);
            CHECK(seq.probability <= 1.0);
        }
    }
}

TEST_CASE("exact objective of a near-deterministic correct policy") {
    policy pi(3, 1, 2);
    const auto prompt = make_prompt({1}, 0.02);
    pi.set_logits(pi.make_context(0, {}), {-50.0, 50.0, -50.0});
    pi.set_logits(pi.make_context(0, std::vector<token>{1}), {50.0, -50.0, -50.0});
    // Emits 1 then EOS with probability ~1; reward = scale_factor(0.02, 10) = 1.2.
    CHECK(exact_objective(pi, prompt, aligned_spec()) == doctest::Approx(1.2).epsilon(1e-12));
}

TEST_CASE("exact objective is zero when no sequence can be correct") {
    policy pi(3, 1, 2);
    const auto prompt = make_prompt({1, 1, 1});  // longer than max_len
    CHECK(exact_objective(pi, prompt, aligned_spec()) == 0.0);
}

TEST_CASE("objective is linear in a constant reward scale") {
    const auto instance = make_gradient_check_instance(4, 3, 1, 10.0, 42, 0);
    reward_spec correctness;
    correctness.form = reward_form::correctness_only;
    reward_spec uniform;
    uniform.form = reward_form::uniform;
    uniform.uniform_scale = 1.37;
    const double j_c = exact_objective(instance.pi, instance.prompt, correctness);
    const double j_u = exact_objective(instance.pi, instance.prompt, uniform);
    CHECK(j_u == doctest::Approx(1.37 * j_c).epsilon(1e-12));
}

TEST_CASE("expected response statistics by hand on the uniform policy") {
    // vocab 3, max_len 2, answer [1]: correct sequences are [1,EOS], [1,1],
    // [2,1], each with probability 1/9. Lengths: 0 with 1/3, 1 with 2/9,
    // 2 with 4/9.
    policy pi(3, 1, 2);
    const auto prompt = make_prompt({1});
    const response_stats stats = expected_response_stats(pi, prompt);
    CHECK(stats.p_correct == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(stats.expected_length == doctest::Approx(10.0 / 9.0).epsilon(1e-12));
}

TEST_CASE("expected response statistics on a near-deterministic policy") {
    policy pi(3, 1, 2);
    const auto prompt = make_prompt({1});
    pi.set_logits(pi.make_context(0, {}), {-50.0, 50.0, -50.0});
    pi.set_logits(pi.make_context(0, std::vector<token>{1}), {50.0, -50.0, -50.0});
    const response_stats stats = expected_response_stats(pi, prompt);
    CHECK(stats.p_correct == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(stats.expected_length == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("correctness probability of EOS is the prefix verdict") {
    policy pi(3, 1, 3);
    const auto prompt = make_prompt({1, 2});
    CHECK(correctness_probability(pi, prompt, std::vector<token>{1, 2}, eos_token) == 1.0);
    CHECK(correctness_probability(pi, prompt, std::vector<token>{2, 1}, eos_token) == 0.0);
    CHECK(correctness_probability(pi, prompt, std::vector<token>{}, eos_token) == 0.0);
}

TEST_CASE("correctness probability matches Monte-Carlo continuation sampling") {
    const auto instance = make_gradient_check_instance(3, 3, 1, 10.0, 7, 0);
    const policy& pi = instance.pi;
    const valued_prompt& prompt = instance.prompt;
    const std::vector<token> prefix{1};
    const token next = 2;
    const double exact = correctness_probability(pi, prompt, prefix, next);

    const int n = 100000;
    rng gen(12345);
    int hits = 0;
    for (int i = 0; i < n; ++i) {
        std::vector<token> tokens = prefix;
        tokens.push_back(next);
        bool terminated = false;
        while (!terminated && static_cast<int>(tokens.size()) < pi.max_len()) {
            const auto dist = pi.step_distribution(pi.make_context(prompt.id, tokens));
            const token chosen = gen.sample_categorical(dist);
            if (chosen == eos_token)
                terminated = true;
            else
                tokens.push_back(chosen);
        }
        if (verify(tokens, prompt.reference_answer).correct) ++hits;
    }
    const double estimate = static_cast<double>(hits) / n;
    const double se = std::sqrt(std::max(estimate * (1.0 - estimate), 1e-12) / n);
    CHECK(std::abs(exact - estimate) <= 3.0 * se);
}

TEST_CASE("correctness probability rejects infeasible prefixes") {
    policy pi(3, 1, 2);
    const auto prompt = make_prompt({1});
    CHECK_THROWS_AS(correctness_probability(pi, prompt, std::vector<token>{1, 2}, 1),
                    std::invalid_argument);
    CHECK_THROWS_AS(correctness_probability(pi, prompt, std::vector<token>{eos_token}, 1),
                    std::invalid_argument);
    CHECK_THROWS_AS(correctness_probability(pi, prompt, std::vector<token>{}, 9),
                    std::invalid_argument);
}

TEST_CASE("gradient vanishes when every token has the same correctness outlook") {
    policy pi(3, 1, 2);
    const auto prompt = make_prompt({1, 1, 1});  // unreachable answer: p identically 0
    const context ctx = pi.make_context(0, {});
    const logit_gradient g = exact_logit_gradient(pi, prompt, ctx, aligned_spec());
    for (double x : g.total) CHECK(x == 0.0);
    for (double x : g.conditional) CHECK(x == 0.0);
}

TEST_CASE("gradient scales exactly linearly in the reward scale") {
    const auto instance = make_gradient_check_instance(4, 3, 1, 10.0, 99, 0);
    reward_spec s1;
    s1.form = reward_form::correctness_only;
    reward_spec s2;
    s2.form = reward_form::uniform;
    s2.uniform_scale = 2.0;

    for (const context& ctx : reachable_contexts(instance.pi, instance.prompt)) {
        const auto g1 = exact_logit_gradient(instance.pi, instance.prompt, ctx, s1);
        const auto g2 = exact_logit_gradient(instance.pi, instance.prompt, ctx, s2);
        REQUIRE(g1.total.size() == g2.total.size());
        for (std::size_t k = 0; k < g1.total.size(); ++k)
            CHECK(std::abs(g2.total[k] - 2.0 * g1.total[k]) < 1e-12);
        const auto argmax = [](const std::vector<double>& v) {
            return std::max_element(v.begin(), v.end()) - v.begin();
        };
        CHECK(argmax(g1.total) == argmax(g2.total));
    }
}

TEST_CASE("analytic gradient matches central finite differences") {
    for (std::uint64_t seed : {11ull, 22ull, 33ull}) {
        const auto instance =
            make_gradient_check_instance(3 + seed % 2, 2 + seed % 2, seed % 3, 10.0, seed, 0);
        for (const context& ctx : reachable_contexts(instance.pi, instance.prompt)) {
            const auto g = exact_logit_gradient(instance.pi, instance.prompt, ctx, instance.spec);
            const auto fd = finite_difference_gradient(instance.pi, instance.prompt, ctx,
                                                       instance.spec, 1e-5);
            double conditional_sum = 0.0;
            double total_sum = 0.0;
            for (std::size_t k = 0; k < fd.size(); ++k) {
                CHECK(std::abs(g.total[k] - fd[k]) < 1e-6);
                conditional_sum += g.conditional[k];
                total_sum += g.total[k];
            }
            // Policy-weighted advantages balance, so each gradient sums to zero.
            CHECK(std::abs(conditional_sum) < 1e-12);
            CHECK(std::abs(total_sum) < 1e-12);
        }
    }
}

TEST_CASE("finite-difference error shrinks quadratically in eps") {
    const auto instance = make_gradient_check_instance(3, 3, 1, 10.0, 5, 0);
    const context ctx = instance.pi.make_context(0, {});
    const auto g = exact_logit_gradient(instance.pi, instance.prompt, ctx, instance.spec);

    const auto max_err = [&](double eps) {
        const auto fd =
            finite_difference_gradient(instance.pi, instance.prompt, ctx, instance.spec, eps);
        double err = 0.0;
        for (std::size_t k = 0; k < fd.size(); ++k)
            err = std::max(err, std::abs(fd[k] - g.total[k]));
        return err;
    };
    const double coarse = max_err(2e-2);
    const double fine = max_err(1e-2);
    REQUIRE(coarse > 1e-10);  // truncation error dominates rounding noise here
    CHECK(coarse / fine == doctest::Approx(4.0).epsilon(0.4));
}

TEST_CASE("gradient is tiny once the policy is deterministic at an optimum") {
    policy pi(3, 1, 2);
    const auto prompt = make_prompt({1});
    pi.set_logits(pi.make_context(0, {}), {-40.0, 40.0, -40.0});
    pi.set_logits(pi.make_context(0, std::vector<token>{1}), {40.0, -40.0, -40.0});
    for (const context& ctx : reachable_contexts(pi, prompt)) {
        const auto g = exact_logit_gradient(pi, prompt, ctx, aligned_spec());
        const auto fd = finite_difference_gradient(pi, prompt, ctx, aligned_spec(), 1e-5);
        for (std::size_t k = 0; k < fd.size(); ++k) {
            CHECK(std::abs(g.total[k]) < 1e-8);
            CHECK(std::abs(fd[k]) < 1e-8);
        }
    }
}

TEST_CASE("EOS closed form agrees with the full gradient's EOS entry") {
    for (int trial = 0; trial < 100; ++trial) {
        const auto instance =
            make_gradient_check_instance(3 + trial % 2, 2 + trial % 2, trial % 3,
                                         trial % 2 ? 10.0 : 1.0,
                                         static_cast<std::uint64_t>(1000 + trial), trial);
        for (const context& ctx : reachable_contexts(instance.pi, instance.prompt)) {
            const auto g = exact_logit_gradient(instance.pi, instance.prompt, ctx, instance.spec);
            const auto e = eos_gradient(instance.pi, instance.prompt, ctx, instance.spec);
            CHECK(std::abs(e.value - g.total[0]) < 1e-12);
            // Sign is governed by p_e versus the mean continuation correctness.
            if (e.p_e > e.p_bar_not_e) CHECK(e.value > 0.0);
            if (e.p_e < e.p_bar_not_e) CHECK(e.value < 0.0);
        }
    }
}

TEST_CASE("EOS gradient direct evaluation") {
    // pi_e = 0.5, p_e = 1, continuation mass sits on a never-correct token.
    policy pi(3, 1, 2);
    const auto prompt = make_prompt({1});
    const context ctx = pi.make_context(0, std::vector<token>{1});
    pi.set_logits(ctx, {0.0, -50.0, 0.0});

    reward_spec doubled;
    doubled.form = reward_form::uniform;
    doubled.uniform_scale = 2.0;

    const auto e = eos_gradient(pi, prompt, ctx, doubled);
    CHECK(e.pi_e == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(e.p_e == 1.0);
    CHECK(e.p_bar_not_e == doctest::Approx(0.0).epsilon(1e-10));
    CHECK(e.conditional == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("a saturated EOS row is flagged degenerate") {
    policy pi(3, 1, 2);
    const auto prompt = make_prompt({1});
    const context ctx = pi.make_context(0, {});
    pi.set_logits(ctx, {800.0, 0.0, 0.0});  // softmax underflows to exactly [1, 0, 0]
    const auto e = eos_gradient(pi, prompt, ctx, aligned_spec());
    CHECK(e.degenerate);
    CHECK(e.value == 0.0);
}

TEST_CASE("unreachable contexts are rejected") {
    policy pi(3, 1, 3);
    const auto prompt = make_prompt({1});
    context bad;
    bad.prompt_id = 0;
    bad.position = 1;
    bad.recent = {eos_token};
    CHECK_THROWS_AS(exact_logit_gradient(pi, prompt, bad, aligned_spec()), std::invalid_argument);

    context too_far;
    too_far.prompt_id = 0;
    too_far.position = 3;
    too_far.recent = {1};
    CHECK_THROWS_AS(exact_logit_gradient(pi, prompt, too_far, aligned_spec()),
                    std::invalid_argument);

    context wrong_window;
    wrong_window.prompt_id = 0;
    wrong_window.position = 2;
    wrong_window.recent = {1, 2};  // window is 1
    CHECK_THROWS_AS(eos_gradient(pi, prompt, wrong_window, aligned_spec()),
                    std::invalid_argument);
}

TEST_CASE("oversized instances trip the enumeration budget") {
    policy pi(12, 1, 8);
    const auto prompt = make_prompt({1});
    CHECK(feasible_sequence_count(12, 8) > 1e6);
    CHECK_THROWS_AS(enumerate(pi, prompt), budget_error);
    CHECK_THROWS_AS(exact_objective(pi, prompt, aligned_spec()), budget_error);
    CHECK_THROWS_AS(
        finite_difference_gradient(pi, prompt, pi.make_context(0, {}), aligned_spec(), 1e-5),
        budget_error);
    // A raised budget lets the same call through.
    CHECK_NOTHROW(exact_objective(pi, prompt, aligned_spec(), 1e9));
}

TEST_CASE("gradient report rows cover every context and token") {
    const auto instance = make_gradient_check_instance(3, 2, 1, 10.0, 3, 0);
    const auto rows = gradient_report(instance.pi, instance.prompt, instance.spec, 1e-5);
    const auto contexts = reachable_contexts(instance.pi, instance.prompt);
    CHECK(rows.size() == contexts.size() * 3);
    for (const auto& row : rows) {
        CHECK(row.max_abs_error == std::abs(row.analytic - row.finite_difference));
        CHECK(row.eos_formula.has_value() == (row.token_index == eos_token));
    }

    std::ostringstream out;
    write_gradient_report_csv(out, rows);
    const std::string text = out.str();
    CHECK(text.rfind("context,token,analytic,finite_difference,eos_formula,max_abs_error\n", 0) ==
          0);
}
