#include "rlev/exam_env.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>

#include <json.hpp>

#include "rlev/errors.hpp"
#include "rlev/rng.hpp"
#include "rlev/value_model.hpp"

namespace rlev {

namespace {

constexpr int max_answer_length = 4;

std::uint64_t fnv1a(std::uint64_t h, std::span<const token> tokens) {
    for (token t : tokens) {
        h ^= static_cast<std::uint64_t>(static_cast<std::uint32_t>(t));
        h *= 0x100000001b3ull;
    }
    return h;
}

void validate_config(const exam_dataset_config& c) {
    if (c.vocab_size < 3)
        throw config_error("generate_dataset: vocab_size must be >= 3 (EOS plus at least two "
                           "tokens), got " + std::to_string(c.vocab_size));
    if (c.num_exams < 1) throw config_error("generate_dataset: num_exams must be >= 1");
    if (c.questions_per_exam < 1)
        throw config_error("generate_dataset: questions_per_exam must be >= 1");
    if (c.answer_length < 1 || c.answer_length > max_answer_length)
        throw config_error("generate_dataset: answer_length must be in [1, 4], got " +
                           std::to_string(c.answer_length));
    if (c.first_exam_id < 0) throw config_error("generate_dataset: first_exam_id must be >= 0");
}

// Long-tailed point menu: mostly 1-2 point questions with rare 10-15 point
// ones, so per-exam normalization yields a right-skewed value distribution.
struct score_bucket {
    double points;
    int weight;
};
constexpr score_bucket skewed_buckets[] = {
    {1.0, 40}, {2.0, 30}, {3.0, 15}, {5.0, 10}, {10.0, 4}, {15.0, 1},
};

double draw_skewed_score(rng& gen) {
    int total_weight = 0;
    for (const auto& b : skewed_buckets) total_weight += b.weight;
    int pick = gen.next_below(total_weight);
    for (const auto& b : skewed_buckets) {
        if (pick < b.weight) return b.points;
        pick -= b.weight;
    }
    return skewed_buckets[0].points;
}

// Prompt tokens encode the question id in base (vocab_size - 1), offset by 1
// so EOS never appears. Length grows with the id range so prompts stay unique.
std::vector<token> encode_prompt(int id, int vocab_size, int total_questions) {
    const int base = vocab_size - 1;
    int length = 3;
    double capacity = static_cast<double>(base) * base * base;
    while (capacity < static_cast<double>(total_questions)) {
        ++length;
        capacity *= base;
    }
    std::vector<token> tokens(static_cast<std::size_t>(length));
    int rest = id;
    for (int j = 0; j < length; ++j) {
        tokens[static_cast<std::size_t>(j)] = 1 + rest % base;
        rest /= base;
    }
    return tokens;
}

void check_record(const valued_prompt& p, const std::string& where) {
    if (!(p.exam_total > 0.0)) throw data_error(where + ": exam_total must be positive");
    if (p.raw_score < 0.0 || p.raw_score > p.exam_total)
        throw data_error(where + ": raw_score outside [0, exam_total]");
    if (std::abs(p.value - p.raw_score / p.exam_total) > 1e-9)
        throw data_error(where + ": value " + std::to_string(p.value) +
                         " violates value = raw_score / exam_total");
    if (p.reference_answer.empty() ||
        p.reference_answer.size() > static_cast<std::size_t>(max_answer_length))
        throw data_error(where + ": reference_answer length must be 1..4");
    for (token t : p.reference_answer)
        if (t == eos_token) throw data_error(where + ": reference_answer contains EOS");
}

nlohmann::json to_json(const valued_prompt& p) {
    return nlohmann::json{
        {"id", p.id},
        {"exam_id", p.exam_id},
        {"prompt_tokens", p.prompt_tokens},
        {"reference_answer", p.reference_answer},
        {"raw_score", p.raw_score},
        {"exam_total", p.exam_total},
        {"value", p.value},
    };
}

}  // namespace

const char* to_string(score_distribution d) {
    return d == score_distribution::uniform_scores ? "uniform_scores" : "skewed_scores";
}

score_distribution score_distribution_from_string(const std::string& name) {
    if (name == "uniform_scores" || name == "uniform") return score_distribution::uniform_scores;
    if (name == "skewed_scores" || name == "skewed") return score_distribution::skewed_scores;
    throw config_error("unknown score distribution '" + name + "'");
}

std::vector<valued_prompt> generate_dataset(const exam_dataset_config& config) {
    validate_config(config);
    const int total_questions = config.num_exams * config.questions_per_exam;
    std::vector<valued_prompt> dataset;
    dataset.reserve(static_cast<std::size_t>(total_questions));

    for (int e = 0; e < config.num_exams; ++e) {
        rng exam_gen(mix(config.seed, 0x6578616dull, static_cast<std::uint64_t>(e)));
        std::vector<double> raw_scores(static_cast<std::size_t>(config.questions_per_exam));
        double exam_total = 0.0;
        for (auto& s : raw_scores) {
            s = config.scores == score_distribution::uniform_scores ? 1.0
                                                                    : draw_skewed_score(exam_gen);
            exam_total += s;
        }

        for (int q = 0; q < config.questions_per_exam; ++q) {
            valued_prompt p;
            p.id = e * config.questions_per_exam + q;
            p.exam_id = config.first_exam_id + e;
            p.prompt_tokens = encode_prompt(p.id, config.vocab_size, total_questions);
            const human_value hv =
                make_human_value(raw_scores[static_cast<std::size_t>(q)], exam_total);
            p.raw_score = hv.raw_score;
            p.exam_total = hv.exam_total;
            p.value = hv.normalized;

            // The answer is a pure function of (seed, prompt_tokens).
            rng answer_gen(mix(config.seed, 0x616e73ull, fnv1a(0xcbf29ce484222325ull, p.prompt_tokens)));
            int length = 1 + answer_gen.next_below(config.answer_length);
            p.reference_answer.resize(static_cast<std::size_t>(length));
            for (auto& t : p.reference_answer) t = 1 + answer_gen.next_below(config.vocab_size - 1);

            dataset.push_back(std::move(p));
        }
    }
    return dataset;
}

verdict verify(std::span<const token> response_tokens, std::span<const token> reference_answer) {
    verdict v;
    const std::size_t n = reference_answer.size();
    if (n == 0) return v;
    // Longest k such that the last k response tokens equal the last k
    // reference tokens; correct means the whole answer sits at the end.
    const std::size_t max_k = std::min(response_tokens.size(), n);
    std::size_t k = 0;
    while (k < max_k &&
           response_tokens[response_tokens.size() - 1 - k] == reference_answer[n - 1 - k])
        ++k;
    v.matched_suffix_length = static_cast<int>(k);
    v.correct = k == n;
    return v;
}

std::vector<valued_prompt> load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw data_error("load_dataset: cannot open " + path.string());

    std::vector<valued_prompt> dataset;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const std::string where = path.string() + ":" + std::to_string(line_no);
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw data_error(where + ": parse error: " + e.what());
        }
        valued_prompt p;
        try {
            p.id = j.at("id").get<int>();
            p.exam_id = j.at("exam_id").get<int>();
            p.prompt_tokens = j.at("prompt_tokens").get<std::vector<token>>();
            p.reference_answer = j.at("reference_answer").get<std::vector<token>>();
            p.raw_score = j.at("raw_score").get<double>();
            p.exam_total = j.at("exam_total").get<double>();
            p.value = j.at("value").get<double>();
        } catch (const nlohmann::json::exception& e) {
            throw data_error(where + ": bad record: " + e.what());
        }
        check_record(p, where);
        dataset.push_back(std::move(p));
    }

    if (dataset.empty()) {
        std::cerr << "warning: " << path.string() << " holds no records\n";
        return dataset;
    }

    // Exams must arrive whole: raw scores of each exam add up to its total.
    std::map<int, std::pair<double, double>> per_exam;  // exam_id -> (sum, total)
    for (const auto& p : dataset) {
        auto [it, inserted] = per_exam.try_emplace(p.exam_id, 0.0, p.exam_total);
        it->second.first += p.raw_score;
        if (!inserted && std::abs(it->second.second - p.exam_total) > 1e-9)
            throw data_error(path.string() + ": exam " + std::to_string(p.exam_id) +
                             " has inconsistent exam_total values");
    }
    for (const auto& [exam_id, sums] : per_exam) {
        if (std::abs(sums.first - sums.second) > 1e-9)
            throw data_error(path.string() + ": exam " + std::to_string(exam_id) +
                             " raw scores sum to " + std::to_string(sums.first) +
                             ", expected exam_total " + std::to_string(sums.second));
    }
    return dataset;
}

void save_dataset(const std::filesystem::path& path, std::span<const valued_prompt> dataset) {
    std::ofstream out(path);
    if (!out) throw data_error("save_dataset: cannot open " + path.string() + " for writing");
    for (const auto& p : dataset) out << to_json(p).dump() << '\n';
}

std::uint64_t dataset_hash(std::span<const valued_prompt> dataset) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (const auto& p : dataset) {
        const std::string s = to_json(p).dump();
        for (unsigned char c : s) {
            h ^= c;
            h *= 0x100000001b3ull;
        }
        h ^= '\n';
        h *= 0x100000001b3ull;
    }
    return h;
}

std::vector<double> dataset_values(std::span<const valued_prompt> dataset) {
    std::vector<double> values;
    values.reserve(dataset.size());
    for (const auto& p : dataset) values.push_back(p.value);
    return values;
}

}  // namespace rlev
