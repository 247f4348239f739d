#include "rlev/value_model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "rlev/errors.hpp"
#include "rlev/rng.hpp"

namespace rlev {

const char* to_string(reward_form form) {
    switch (form) {
        case reward_form::human_aligned: return "human_aligned";
        case reward_form::multiplicative: return "multiplicative";
        case reward_form::uniform: return "uniform";
        case reward_form::shuffled: return "shuffled";
        case reward_form::correctness_only: return "correctness_only";
    }
    throw std::logic_error("unknown reward_form");
}

reward_form reward_form_from_string(const std::string& name) {
    if (name == "human_aligned") return reward_form::human_aligned;
    if (name == "multiplicative") return reward_form::multiplicative;
    if (name == "uniform") return reward_form::uniform;
    if (name == "shuffled") return reward_form::shuffled;
    if (name == "correctness_only") return reward_form::correctness_only;
    throw config_error("unknown reward form '" + name + "'");
}

double normalize_value(double raw_score, double exam_total) {
    if (!(exam_total > 0.0))
        throw std::domain_error("normalize_value: exam_total must be positive, got " +
                                std::to_string(exam_total));
    if (raw_score < 0.0 || raw_score > exam_total)
        throw std::domain_error("normalize_value: raw_score " + std::to_string(raw_score) +
                                " outside [0, " + std::to_string(exam_total) + "]");
    return raw_score / exam_total;
}

human_value make_human_value(double raw_score, double exam_total) {
    return {raw_score, exam_total, normalize_value(raw_score, exam_total)};
}

double scale_factor(double v, double alpha) {
    if (v < 0.0 || v > 1.0)
        throw std::domain_error("scale_factor: v must be in [0, 1], got " + std::to_string(v));
    if (alpha < 0.0)
        throw std::domain_error("scale_factor: alpha must be nonnegative, got " +
                                std::to_string(alpha));
    return 1.0 + std::min(alpha * v, 1.0);
}

double reward(const reward_spec& spec, double v, bool correct) {
    if (!correct) return 0.0;
    switch (spec.form) {
        case reward_form::human_aligned:
        case reward_form::shuffled:
            return scale_factor(v, spec.alpha);
        case reward_form::multiplicative:
            if (v < 0.0 || v > 1.0)
                throw std::domain_error("reward: v must be in [0, 1], got " + std::to_string(v));
            if (spec.alpha < 0.0)
                throw std::domain_error("reward: alpha must be nonnegative");
            return 1.0 + spec.alpha * v;
        case reward_form::uniform:
            if (!spec.uniform_scale)
                throw config_error("reward: uniform form requires a resolved uniform_scale");
            if (*spec.uniform_scale < 1.0)
                throw config_error("reward: uniform_scale must be >= 1, got " +
                                   std::to_string(*spec.uniform_scale));
            return *spec.uniform_scale;
        case reward_form::correctness_only:
            return 1.0;
    }
    throw std::logic_error("unknown reward_form");
}

double reward_scale(const reward_spec& spec, double v) { return reward(spec, v, true); }

double utility(double v, bool correct) {
    if (v < 0.0 || v > 1.0)
        throw std::domain_error("utility: v must be in [0, 1], got " + std::to_string(v));
    return correct ? v : 0.0;
}

std::vector<double> shuffle_values(std::vector<double> values, std::uint64_t seed) {
    if (values.empty()) throw data_error("shuffle_values: empty value list");
    rng gen(mix(seed, 0x76616c7565ull));  // independent of other seed streams
    gen.shuffle(values);
    return values;
}

double difficulty_to_value(difficulty_category level) {
    switch (level) {
        case difficulty_category::primary_school: return 0.01;
        case difficulty_category::junior_high: return 0.02;
        case difficulty_category::senior_high: return 0.04;
        case difficulty_category::university: return 0.06;
        case difficulty_category::phd: return 0.08;
    }
    throw std::logic_error("unknown difficulty_category");
}

double mean_scale_factor(std::span<const double> values, double alpha) {
    if (values.empty()) throw data_error("mean_scale_factor: empty value list");
    double sum = 0.0;
    for (double v : values) sum += scale_factor(v, alpha);
    return sum / static_cast<double>(values.size());
}

reward_spec resolve_uniform_scale(reward_spec spec, std::span<const double> dataset_values) {
    if (spec.form == reward_form::uniform && !spec.uniform_scale)
        spec.uniform_scale = mean_scale_factor(dataset_values, spec.alpha);
    return spec;
}

std::vector<double> effective_values(const reward_spec& spec,
                                     std::span<const double> dataset_values) {
    std::vector<double> values(dataset_values.begin(), dataset_values.end());
    if (spec.form == reward_form::shuffled) return shuffle_values(std::move(values), spec.shuffle_seed);
    return values;
}

}  // namespace rlev
