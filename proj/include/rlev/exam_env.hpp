#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace rlev {

using token = int;

// EOS sits at vocabulary index 0 everywhere in this project.
inline constexpr token eos_token = 0;

// One exam question: an integer-token prompt, its reference answer, and the
// human-assigned score normalized against the exam total.
struct valued_prompt {
    int id = 0;
    int exam_id = 0;
    std::vector<token> prompt_tokens;
    std::vector<token> reference_answer;  // 1..4 tokens, never EOS
    double raw_score = 0.0;
    double exam_total = 0.0;
    double value = 0.0;  // raw_score / exam_total

    bool operator==(const valued_prompt&) const = default;
};

struct verdict {
    bool correct = false;
    int matched_suffix_length = 0;
};

enum class score_distribution { uniform_scores, skewed_scores };

const char* to_string(score_distribution d);
score_distribution score_distribution_from_string(const std::string& name);

struct exam_dataset_config {
    int vocab_size = 6;  // includes EOS at index 0
    int num_exams = 4;
    int questions_per_exam = 50;
    int answer_length = 2;  // maximum; per-question lengths are 1..answer_length
    score_distribution scores = score_distribution::skewed_scores;
    std::uint64_t seed = 0;
    int first_exam_id = 0;  // offset so train/test generations use disjoint exams
};

// Deterministic synthetic exam generator. Per exam, raw scores sum to the
// exam total, so per-exam values sum to 1.
std::vector<valued_prompt> generate_dataset(const exam_dataset_config& config);

// Trailing exact match: correct iff the final |reference| tokens of the
// response equal the reference answer.
verdict verify(std::span<const token> response_tokens, std::span<const token> reference_answer);

// JSONL, one record per line: id, exam_id, prompt_tokens, reference_answer,
// raw_score, exam_total, value.
std::vector<valued_prompt> load_dataset(const std::filesystem::path& path);
void save_dataset(const std::filesystem::path& path, std::span<const valued_prompt> dataset);

// FNV-1a over the serialized records; stamps manifests and ablation rows so
// paired runs can prove they saw identical data.
std::uint64_t dataset_hash(std::span<const valued_prompt> dataset);

std::vector<double> dataset_values(std::span<const valued_prompt> dataset);

}  // namespace rlev
