#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace rlev {

// A question's human-assigned worth: raw exam points and the per-exam
// normalized share in [0, 1].
struct human_value {
    double raw_score = 0.0;
    double exam_total = 0.0;
    double normalized = 0.0;
};

enum class reward_form {
    human_aligned,     // 1 + min(alpha * v, 1) for correct answers
    multiplicative,    // 1 + alpha * v, unclipped
    uniform,           // constant scale for every correct answer
    shuffled,          // human_aligned on a fixed permutation of the values
    correctness_only,  // plain 0/1
};

const char* to_string(reward_form form);
reward_form reward_form_from_string(const std::string& name);

struct reward_spec {
    reward_form form = reward_form::human_aligned;
    double alpha = 10.0;
    // Scale used by the uniform form. Unset means "resolve to the dataset
    // mean scale factor at run start"; see resolve_uniform_scale.
    std::optional<double> uniform_scale;
    // Seed of the value permutation used by the shuffled form. The
    // permutation is drawn once per run and frozen.
    std::uint64_t shuffle_seed = 0;
};

enum class difficulty_category {
    primary_school,
    junior_high,
    senior_high,
    university,
    phd,
};

// v(x) = raw_score / exam_total. Throws std::domain_error outside the domain.
double normalize_value(double raw_score, double exam_total);

// Bundles a raw score with its normalization, enforcing the invariants.
human_value make_human_value(double raw_score, double exam_total);

// s = 1 + min(alpha * v, 1); always in [1, 2].
double scale_factor(double v, double alpha);

// Surrogate training reward. Incorrect answers earn 0 under every form.
// For the shuffled form, v must already be the permuted value.
double reward(const reward_spec& spec, double v, bool correct);

// Scale a correct answer would earn: reward(spec, v, true).
double reward_scale(const reward_spec& spec, double v);

// Target objective U: v for a correct answer, 0 otherwise. Kept separate
// from the surrogate reward.
double utility(double v, bool correct);

// Deterministic permutation of the value list; the multiset is preserved.
std::vector<double> shuffle_values(std::vector<double> values, std::uint64_t seed);

// Weak-label mapping from difficulty to a normalized value.
double difficulty_to_value(difficulty_category level);

// Mean of scale_factor over a value list; the uniform form's default scale.
double mean_scale_factor(std::span<const double> values, double alpha);

// Fills spec.uniform_scale from the dataset values when unset.
reward_spec resolve_uniform_scale(reward_spec spec, std::span<const double> dataset_values);

// Per-prompt values a run actually rewards on: the dataset values, permuted
// once when the form is shuffled.
std::vector<double> effective_values(const reward_spec& spec, std::span<const double> dataset_values);

}  // namespace rlev
