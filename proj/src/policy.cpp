#include "rlev/policy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "rlev/errors.hpp"

namespace rlev {

bool context::operator<(const context& other) const {
    if (prompt_id != other.prompt_id) return prompt_id < other.prompt_id;
    if (position != other.position) return position < other.position;
    return recent < other.recent;
}

std::string context::key() const {
    std::ostringstream out;
    out << prompt_id << ':' << position << ':';
    for (std::size_t i = 0; i < recent.size(); ++i) {
        if (i) out << '-';
        out << recent[i];
    }
    return out.str();
}

policy::policy(int vocab_size, int context_window, int max_len)
    : vocab_size_(vocab_size), context_window_(context_window), max_len_(max_len) {
    if (vocab_size_ < 2) throw config_error("policy: vocab_size must be >= 2 (EOS plus one token)");
    if (context_window_ < 0) throw config_error("policy: context_window must be >= 0");
    if (max_len_ < 1) throw config_error("policy: max_len must be >= 1");
}

context policy::make_context(int prompt_id, std::span<const token> generated) const {
    context ctx;
    ctx.prompt_id = prompt_id;
    ctx.position = static_cast<int>(generated.size());
    const std::size_t keep =
        std::min(generated.size(), static_cast<std::size_t>(context_window_));
    ctx.recent.assign(generated.end() - static_cast<std::ptrdiff_t>(keep), generated.end());
    return ctx;
}

const std::vector<double>* policy::find_logits(const context& ctx) const {
    auto it = logits_.find(ctx);
    return it == logits_.end() ? nullptr : &it->second;
}

std::vector<double> policy::logits(const context& ctx) const {
    if (const auto* row = find_logits(ctx)) return *row;
    return std::vector<double>(static_cast<std::size_t>(vocab_size_), 0.0);
}

std::vector<double> policy::step_distribution(const context& ctx) const {
    std::vector<double> probs = logits(ctx);
    const double max_logit = *std::max_element(probs.begin(), probs.end());
    double sum = 0.0;
    for (double& p : probs) {
        p = std::exp(p - max_logit);
        sum += p;
    }
    for (double& p : probs) p /= sum;
    return probs;
}

void policy::add_to_logits(const context& ctx, std::span<const double> delta) {
    if (delta.size() != static_cast<std::size_t>(vocab_size_))
        throw std::invalid_argument("policy::add_to_logits: delta size mismatch");
    auto it = logits_.find(ctx);
    if (it == logits_.end())
        it = logits_.emplace(ctx, std::vector<double>(static_cast<std::size_t>(vocab_size_), 0.0))
                 .first;
    for (int k = 0; k < vocab_size_; ++k)
        it->second[static_cast<std::size_t>(k)] += delta[static_cast<std::size_t>(k)];
}

void policy::set_logits(const context& ctx, std::vector<double> row) {
    if (row.size() != static_cast<std::size_t>(vocab_size_))
        throw std::invalid_argument("policy::set_logits: row size mismatch");
    for (double v : row)
        if (!std::isfinite(v)) throw std::invalid_argument("policy::set_logits: non-finite logit");
    logits_[ctx] = std::move(row);
}

std::vector<std::pair<context, std::vector<double>>> policy::rows_sorted() const {
    std::vector<std::pair<context, std::vector<double>>> rows(logits_.begin(), logits_.end());
    std::sort(rows.begin(), rows.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    return rows;
}

void policy::save(std::ostream& out) const {
    nlohmann::json header{{"kind", "rlev-policy"},
                          {"vocab_size", vocab_size_},
                          {"context_window", context_window_},
                          {"max_len", max_len_}};
    out << header.dump() << '\n';
    for (const auto& [ctx, row] : rows_sorted()) {
        nlohmann::json j{{"prompt_id", ctx.prompt_id},
                         {"position", ctx.position},
                         {"recent", ctx.recent},
                         {"logits", row}};
        out << j.dump() << '\n';
    }
}

void policy::save_file(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw data_error("policy::save_file: cannot open " + path.string());
    save(out);
}

policy policy::load(std::istream& in, const std::string& where) {
    std::string line;
    if (!std::getline(in, line)) throw data_error(where + ": missing checkpoint header");
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw data_error(where + ":1: parse error: " + e.what());
    }
    if (header.value("kind", "") != "rlev-policy")
        throw data_error(where + ": not a policy checkpoint");
    policy pi(header.at("vocab_size").get<int>(), header.at("context_window").get<int>(),
              header.at("max_len").get<int>());
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw data_error(where + ":" + std::to_string(line_no) + ": parse error: " + e.what());
        }
        context ctx;
        ctx.prompt_id = j.at("prompt_id").get<int>();
        ctx.position = j.at("position").get<int>();
        ctx.recent = j.at("recent").get<std::vector<token>>();
        auto row = j.at("logits").get<std::vector<double>>();
        if (row.size() != static_cast<std::size_t>(pi.vocab_size()))
            throw data_error(where + ":" + std::to_string(line_no) + ": logit row length " +
                             std::to_string(row.size()) + " does not match vocab_size");
        pi.set_logits(ctx, std::move(row));
    }
    return pi;
}

policy policy::load_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw data_error("policy::load_file: cannot open " + path.string());
    return load(in, path.string());
}

std::span<const token> rollout::response() const {
    std::span<const token> all(tokens);
    if (!truncated && !all.empty()) return all.first(all.size() - 1);
    return all;
}

namespace {

rollout finish_rollout(rollout r, const valued_prompt& prompt) {
    r.length = static_cast<int>(r.response().size());
    r.correct = verify(r.response(), prompt.reference_answer).correct;
    return r;
}

}  // namespace

rollout sample_rollout(const policy& pi, const valued_prompt& prompt, std::uint64_t rng_seed,
                       bool record_distributions) {
    rng gen(rng_seed);
    return sample_rollout(pi, prompt, gen, record_distributions);
}

rollout sample_rollout(const policy& pi, const valued_prompt& prompt, rng& gen,
                       bool record_distributions) {
    rollout r;
    r.prompt_id = prompt.id;
    for (int t = 0; t < pi.max_len(); ++t) {
        const context ctx = pi.make_context(prompt.id, r.tokens);
        std::vector<double> dist = pi.step_distribution(ctx);
        const token chosen = gen.sample_categorical(dist);
        if (record_distributions) r.step_distributions.push_back(std::move(dist));
        r.tokens.push_back(chosen);
        if (chosen == eos_token) return finish_rollout(std::move(r), prompt);
    }
    r.truncated = true;
    return finish_rollout(std::move(r), prompt);
}

rollout greedy_rollout(const policy& pi, const valued_prompt& prompt) {
    rollout r;
    r.prompt_id = prompt.id;
    for (int t = 0; t < pi.max_len(); ++t) {
        const context ctx = pi.make_context(prompt.id, r.tokens);
        const std::vector<double> row = pi.logits(ctx);
        const token chosen = static_cast<token>(
            std::max_element(row.begin(), row.end()) - row.begin());
        r.tokens.push_back(chosen);
        if (chosen == eos_token) return finish_rollout(std::move(r), prompt);
    }
    r.truncated = true;
    return finish_rollout(std::move(r), prompt);
}

double logprob(const policy& pi, const valued_prompt& prompt, std::span<const token> tokens) {
    const bool ends_in_eos = !tokens.empty() && tokens.back() == eos_token;
    if (!ends_in_eos && tokens.size() != static_cast<std::size_t>(pi.max_len()))
        throw std::invalid_argument(
            "logprob: sequence must end in EOS or have exactly max_len tokens");
    double total = 0.0;
    for (std::size_t t = 0; t < tokens.size(); ++t) {
        if (tokens[t] == eos_token && t + 1 != tokens.size())
            throw std::invalid_argument("logprob: EOS before the final position");
        const context ctx = pi.make_context(prompt.id, tokens.first(t));
        const std::vector<double> dist = pi.step_distribution(ctx);
        total += std::log(dist[static_cast<std::size_t>(tokens[t])]);
    }
    return total;
}

}  // namespace rlev
