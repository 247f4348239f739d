#include <doctest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "rlev/analysis.hpp"
#include "rlev/errors.hpp"

using namespace rlev;

namespace {

std::vector<valued_prompt> toy_dataset() {
    exam_dataset_config c;
    c.num_exams = 2;
    c.questions_per_exam = 5;
    c.vocab_size = 4;
    c.answer_length = 1;
    c.seed = 19;
    return generate_dataset(c);
}

train_config quick_config() {
    train_config config;
    config.epochs = 3;
    config.rollout_batch = 16;
    config.est.group_size = 4;
    config.max_len = 3;
    config.eval_every = 50;
    return config;
}

}  // namespace

TEST_CASE("an untrained uniform policy yields flat trajectories at 1/vocab") {
    const auto dataset = toy_dataset();
    const policy pi(4, 1, 3);
    const auto [top, bottom] = eos_trajectories(pi, dataset, 3);
    CHECK(top.mode == "exact");
    REQUIRE(top.rows.size() == 3);
    for (const auto& table : {top, bottom})
        for (const auto& row : table.rows)
            CHECK(row.mean_eos_prob == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(top.cohort == cohort_kind::top_valued);
    CHECK(bottom.cohort == cohort_kind::bottom_valued);
}

TEST_CASE("a constant EOS logit shows up as its softmax value at every step") {
    const auto dataset = toy_dataset();
    policy pi(4, 0, 3);  // window 0: one context per (prompt, position)
    for (const auto& p : dataset)
        for (int t = 0; t < 3; ++t) {
            context ctx;
            ctx.prompt_id = p.id;
            ctx.position = t;
            pi.set_logits(ctx, {1.0, 0.0, 0.0, 0.0});
        }
    const double expected = std::exp(1.0) / (std::exp(1.0) + 3.0);
    const auto [top, bottom] = eos_trajectories(pi, dataset, 3);
    for (const auto& row : top.rows) CHECK(row.mean_eos_prob == doctest::Approx(expected));
    for (const auto& row : bottom.rows) CHECK(row.mean_eos_prob == doctest::Approx(expected));
}

TEST_CASE("active counts start at the cohort size and never increase") {
    const auto dataset = toy_dataset();
    const policy pi(4, 1, 3);

    SUBCASE("exact mode tracks expected active mass") {
        const auto [top, bottom] = eos_trajectories(pi, dataset, 4);
        CHECK(top.rows.front().active_count == doctest::Approx(4.0));
        for (std::size_t i = 1; i < top.rows.size(); ++i)
            CHECK(top.rows[i].active_count <= top.rows[i - 1].active_count);
        (void)bottom;
    }
    SUBCASE("sampled mode counts live rollouts") {
        trajectory_options options;
        options.budget = 1.0;  // force sampling
        options.sample_count = 200;
        const auto [top, bottom] = eos_trajectories(pi, dataset, 4, options);
        CHECK(top.mode == "sampled");
        CHECK(top.rows.front().active_count == 4 * 200);
        for (const auto& table : {top, bottom})
            for (std::size_t i = 1; i < table.rows.size(); ++i) {
                CHECK(table.rows[i].active_count <= table.rows[i - 1].active_count);
                CHECK(table.rows[i].active_count == std::floor(table.rows[i].active_count));
            }
    }
}

TEST_CASE("overlapping cohorts are rejected") {
    const auto dataset = toy_dataset();
    const policy pi(4, 1, 3);
    CHECK_THROWS_AS(eos_trajectories(pi, dataset, 6), config_error);
    CHECK_THROWS_AS(eos_trajectories(pi, dataset, 0), config_error);
}

TEST_CASE("alpha zero collapses the human-aligned reward onto correctness") {
    const auto dataset = toy_dataset();
    reward_spec aligned;
    aligned.alpha = 0.0;
    reward_spec correctness;
    correctness.form = reward_form::correctness_only;
    for (const auto& p : dataset)
        for (bool correct : {true, false})
            CHECK(reward(aligned, p.value, correct) == reward(correctness, p.value, correct));
}

TEST_CASE("shuffling a single-prompt dataset is the identity") {
    std::vector<valued_prompt> dataset;
    {
        valued_prompt p;
        p.id = 0;
        p.prompt_tokens = {1};
        p.reference_answer = {2};
        p.raw_score = 3.0;
        p.exam_total = 3.0;
        p.value = 1.0;
        dataset.push_back(p);
    }
    train_config config = quick_config();
    config.rspec.form = reward_form::human_aligned;
    const auto aligned = train(config, dataset);
    config.rspec.form = reward_form::shuffled;
    const auto shuffled = train(config, dataset);
    REQUIRE(aligned.log.size() == shuffled.log.size());
    for (std::size_t i = 0; i < aligned.log.size(); ++i)
        CHECK(to_jsonl(aligned.log[i]) == to_jsonl(shuffled.log[i]));
}

TEST_CASE("a one-form grid equals the plain training run") {
    const auto dataset = toy_dataset();
    const train_config base = quick_config();
    const reward_form forms[] = {reward_form::correctness_only};
    const std::uint64_t seeds[] = {5};
    const ablation_grid grid = run_ablation(base, dataset, forms, seeds);
    REQUIRE(grid.rows.size() == 1);

    train_config direct = base;
    direct.rspec.form = reward_form::correctness_only;
    direct.seed = 5;
    const auto result = train(direct, dataset);
    const auto report = compute_metrics(evaluate_policy(result.final_policy, dataset));
    CHECK(grid.rows[0].report.acc == report.acc);
    CHECK(grid.rows[0].report.h_acc == report.h_acc);
    CHECK(grid.rows[0].report.mean_length == report.mean_length);
    CHECK(grid.rows[0].data_hash == dataset_hash(dataset));
}

TEST_CASE("every grid row sees the same dataset") {
    const auto dataset = toy_dataset();
    const reward_form forms[] = {reward_form::human_aligned, reward_form::correctness_only,
                                 reward_form::uniform};
    const std::uint64_t seeds[] = {1, 2};
    const ablation_grid grid = run_ablation(quick_config(), dataset, forms, seeds);
    REQUIRE(grid.rows.size() == 3);
    for (const auto& row : grid.rows) CHECK(row.data_hash == grid.rows.front().data_hash);
    CHECK(grid.seeds == std::vector<std::uint64_t>{1, 2});
}

TEST_CASE("alpha sweep: zero alpha reproduces the correctness-only run exactly") {
    const auto dataset = toy_dataset();
    const train_config base = quick_config();
    const double alphas[] = {0.0, 10.0};
    const std::uint64_t seeds[] = {3};
    const auto rows = alpha_sweep(base, dataset, alphas, seeds);
    REQUIRE(rows.size() == 2);

    const reward_form forms[] = {reward_form::correctness_only};
    const ablation_grid grid = run_ablation(base, dataset, forms, seeds);
    CHECK(rows[0].first == 0.0);
    CHECK(rows[0].second.acc == grid.rows[0].report.acc);
    CHECK(rows[0].second.h_acc == grid.rows[0].report.h_acc);
    CHECK(rows[0].second.mean_length == grid.rows[0].report.mean_length);
}

TEST_CASE("alpha sweep emits one row per alpha") {
    const auto dataset = toy_dataset();
    train_config base = quick_config();
    base.epochs = 1;
    const double alphas[] = {1, 5, 10, 15, 20};
    const std::uint64_t seeds[] = {0};
    CHECK(alpha_sweep(base, dataset, alphas, seeds).size() == 5);
}

TEST_CASE("csv exports have the documented headers") {
    const auto dataset = toy_dataset();
    const policy pi(4, 1, 3);
    const auto [top, bottom] = eos_trajectories(pi, dataset, 2);
    std::ostringstream traj;
    write_trajectory_csv(traj, top, bottom);
    CHECK(traj.str().rfind("cohort,step,mean_eos_prob,active_count\n", 0) == 0);
    CHECK(traj.str().find("top_valued,0,") != std::string::npos);
    CHECK(traj.str().find("bottom_valued,0,") != std::string::npos);

    const reward_form forms[] = {reward_form::correctness_only};
    const std::uint64_t seeds[] = {0};
    train_config base = quick_config();
    base.epochs = 1;
    const ablation_grid grid = run_ablation(base, dataset, forms, seeds);
    std::ostringstream ab;
    write_ablation_csv(ab, grid);
    CHECK(ab.str().rfind("form,seeds,data_hash,acc,", 0) == 0);

    const double alphas[] = {10.0};
    std::ostringstream sweep;
    write_alpha_sweep_csv(sweep, alpha_sweep(base, dataset, alphas, seeds));
    CHECK(sweep.str().rfind("alpha,acc,", 0) == 0);
}
