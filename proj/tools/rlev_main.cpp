// rlev: desk-scale value-weighted RL laboratory.
//
// Subcommands: gen-data, train, eval, grad-check, ablate, sweep-alpha, traj.
// Every run writes a manifest.json whose config_snapshot can be fed back via
// --config to reproduce the outputs byte for byte.
//
// Exit codes: 0 ok, 1 usage, 2 config, 3 data, 4 enumeration budget,
// 5 check failure, 10 internal.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rlev/analysis.hpp"
#include "rlev/errors.hpp"
#include "rlev/estimators.hpp"
#include "rlev/exact_oracle.hpp"
#include "rlev/exam_env.hpp"
#include "rlev/metrics.hpp"
#include "rlev/policy.hpp"
#include "rlev/value_model.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int exit_usage = 1;
constexpr int exit_config = 2;
constexpr int exit_data = 3;
constexpr int exit_budget = 4;
constexpr int exit_check_failure = 5;
constexpr int exit_internal = 10;

// Ties every tunable to a config-file key, so file values fill in whatever
// the command line left at its default and the manifest can snapshot the
// fully resolved configuration.
class config_binder {
public:
    template <class T>
    void bind(const std::string& key, T* target) {
        entries_.push_back({key,
                            [target](const json& v) { *target = v.get<T>(); },
                            [target]() { return json(*target); }});
    }

    std::vector<std::string> merge(const json& cfg, const CLI::App& cmd) const {
        if (!cfg.is_object()) throw rlev::config_error("config file must hold a JSON object");
        std::vector<std::string> overridden;
        for (auto it = cfg.begin(); it != cfg.end(); ++it) {
            const entry* e = find(it.key());
            if (!e)
                throw rlev::config_error("unknown config key '" + it.key() + "' for subcommand " +
                                         cmd.get_name());
            const CLI::Option* opt = cmd.get_option_no_throw("--" + flag_name(it.key()));
            if (opt != nullptr && opt->count() > 0) {
                overridden.push_back(it.key());  // flag wins over the file value
                continue;
            }
            try {
                e->set(it.value());
            } catch (const json::exception& ex) {
                throw rlev::config_error("config key '" + it.key() +
                                         "': type mismatch: " + ex.what());
            }
        }
        std::sort(overridden.begin(), overridden.end());
        return overridden;
    }

    json snapshot() const {
        json j = json::object();
        for (const auto& e : entries_) j[e.key] = e.get();
        return j;
    }

private:
    struct entry {
        std::string key;
        std::function<void(const json&)> set;
        std::function<json()> get;
    };

    static std::string flag_name(std::string key) {
        std::replace(key.begin(), key.end(), '_', '-');
        return key;
    }

    const entry* find(const std::string& key) const {
        for (const auto& e : entries_)
            if (e.key == key) return &e;
        return nullptr;
    }

    std::vector<entry> entries_;
};

json load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw rlev::config_error("cannot open config file " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw rlev::config_error("config file " + path + ": " + e.what());
    }
    // A manifest works as a config file: reuse its snapshot.
    if (j.is_object() && j.contains("config_snapshot")) return j.at("config_snapshot");
    return j;
}

struct common_flags {
    std::string out_dir = ".";
    std::string config_file;
};

void register_common(CLI::App* cmd, common_flags& f) {
    cmd->add_option("--out-dir", f.out_dir, "Directory for all outputs")
        ->envname("RLEV_OUT_DIR");
    cmd->add_option("--config", f.config_file,
                    "JSON config file (flat object or a previous manifest)");
}

fs::path resolve_out(const common_flags& common, const std::string& name) {
    fs::path p(name);
    if (p.is_absolute()) return p;
    return fs::path(common.out_dir) / p;
}

void write_manifest(const common_flags& common, const std::string& command,
                    const config_binder& binder, std::uint64_t seed,
                    std::vector<std::string> artifacts,
                    const std::vector<std::string>& overridden) {
    fs::create_directories(common.out_dir);
    std::sort(artifacts.begin(), artifacts.end());
    json manifest{{"command", command},
                  {"config_snapshot", binder.snapshot()},
                  {"seed", seed},
                  {"output_dir", common.out_dir},
                  {"artifact_index", artifacts}};
    if (!overridden.empty()) manifest["overridden_keys"] = overridden;
    std::ofstream out(fs::path(common.out_dir) / "manifest.json");
    if (!out) throw rlev::data_error("cannot write manifest to " + common.out_dir);
    out << manifest.dump(2) << '\n';
}

std::ofstream open_artifact(const fs::path& path) {
    fs::create_directories(path.parent_path().empty() ? fs::path(".") : path.parent_path());
    std::ofstream out(path);
    if (!out) throw rlev::data_error("cannot open " + path.string() + " for writing");
    return out;
}

std::vector<std::string> split_csv(const std::string& text) {
    std::vector<std::string> parts;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ','))
        if (!item.empty()) parts.push_back(item);
    return parts;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
    std::vector<std::uint64_t> seeds;
    for (const auto& s : split_csv(text)) {
        try {
            seeds.push_back(std::stoull(s));
        } catch (const std::exception&) {
            throw rlev::config_error("bad seed '" + s + "' in seed list");
        }
    }
    if (seeds.empty()) throw rlev::config_error("empty seed list");
    return seeds;
}

std::vector<double> parse_double_list(const std::string& text, const char* what) {
    std::vector<double> values;
    for (const auto& s : split_csv(text)) {
        try {
            values.push_back(std::stod(s));
        } catch (const std::exception&) {
            throw rlev::config_error(std::string("bad ") + what + " '" + s + "'");
        }
    }
    if (values.empty()) throw rlev::config_error(std::string("empty ") + what + " list");
    return values;
}

// ---------------------------------------------------------------- training flags

struct train_flags {
    std::string data;
    std::string estimator_name = "rloo";
    std::string reward_name = "human_aligned";
    double alpha = 10.0;
    int group_size = 8;
    double baseline_decay = 0.9;
    double grpo_std_floor = 1e-6;
    double uniform_scale = 0.0;  // 0 = dataset mean scale factor at run start
    std::uint64_t shuffle_seed = 0;
    double lr = 0.05;
    int batch = 128;
    int epochs = 1;
    int eval_every = 50;
    int max_len = 6;
    int context_window = 1;
    int vocab = 0;  // 0 = infer from the dataset
    std::uint64_t seed = 0;
};

void register_train_flags(CLI::App* cmd, train_flags& f, config_binder& binder) {
    cmd->add_option("--data", f.data, "Dataset JSONL path");
    cmd->add_option("--estimator", f.estimator_name, "reinforce_baseline | rloo | grpo");
    cmd->add_option("--reward", f.reward_name,
                    "human_aligned | multiplicative | uniform | shuffled | correctness_only");
    cmd->add_option("--alpha", f.alpha, "Value scaling strength");
    cmd->add_option("--group-size", f.group_size, "Rollouts per prompt (rloo/grpo)");
    cmd->add_option("--baseline-decay", f.baseline_decay, "Reinforce baseline EMA decay");
    cmd->add_option("--std-floor", f.grpo_std_floor, "GRPO std floor");
    cmd->add_option("--uniform-scale", f.uniform_scale,
                    "Uniform reward scale; 0 derives the dataset mean");
    cmd->add_option("--shuffle-seed", f.shuffle_seed, "Seed of the shuffled-value permutation");
    cmd->add_option("--lr", f.lr, "Learning rate");
    cmd->add_option("--batch", f.batch, "Rollouts per optimization step");
    cmd->add_option("--epochs", f.epochs, "Passes over the dataset");
    cmd->add_option("--eval-every", f.eval_every, "Steps between run-log records");
    cmd->add_option("--max-len", f.max_len, "Response cap");
    cmd->add_option("--context-window", f.context_window, "Recent tokens in the context");
    cmd->add_option("--vocab", f.vocab, "Vocabulary size; 0 infers from the dataset");
    cmd->add_option("--seed", f.seed, "Run seed");

    binder.bind("data", &f.data);
    binder.bind("estimator", &f.estimator_name);
    binder.bind("reward", &f.reward_name);
    binder.bind("alpha", &f.alpha);
    binder.bind("group_size", &f.group_size);
    binder.bind("baseline_decay", &f.baseline_decay);
    binder.bind("std_floor", &f.grpo_std_floor);
    binder.bind("uniform_scale", &f.uniform_scale);
    binder.bind("shuffle_seed", &f.shuffle_seed);
    binder.bind("lr", &f.lr);
    binder.bind("batch", &f.batch);
    binder.bind("epochs", &f.epochs);
    binder.bind("eval_every", &f.eval_every);
    binder.bind("max_len", &f.max_len);
    binder.bind("context_window", &f.context_window);
    binder.bind("vocab", &f.vocab);
    binder.bind("seed", &f.seed);
}

rlev::train_config to_train_config(const train_flags& f) {
    if (f.alpha < 0.0)
        throw rlev::config_error("alpha must be >= 0, got " + std::to_string(f.alpha));
    if (f.lr < 0.0) throw rlev::config_error("lr must be >= 0, got " + std::to_string(f.lr));
    if (f.uniform_scale != 0.0 && f.uniform_scale < 1.0)
        throw rlev::config_error("uniform-scale must be >= 1 (or 0 for the dataset mean), got " +
                                 std::to_string(f.uniform_scale));
    if (f.baseline_decay < 0.0 || f.baseline_decay >= 1.0)
        throw rlev::config_error("baseline-decay must be in [0, 1)");

    rlev::train_config config;
    config.est.kind = rlev::estimator_from_string(f.estimator_name);
    if (config.est.kind != rlev::estimator::reinforce_baseline && f.group_size < 2)
        throw rlev::config_error("group-size must be >= 2, got " + std::to_string(f.group_size));
    config.est.group_size = f.group_size;
    config.est.baseline_decay = f.baseline_decay;
    config.est.grpo_std_floor = f.grpo_std_floor;
    config.rspec.form = rlev::reward_form_from_string(f.reward_name);
    config.rspec.alpha = f.alpha;
    if (f.uniform_scale != 0.0) config.rspec.uniform_scale = f.uniform_scale;
    config.rspec.shuffle_seed = f.shuffle_seed;
    config.learning_rate = f.lr;
    config.rollout_batch = f.batch;
    config.epochs = f.epochs;
    config.eval_every = f.eval_every;
    config.max_len = f.max_len;
    config.context_window = f.context_window;
    config.vocab_size = f.vocab;
    config.seed = f.seed;
    return config;
}

std::vector<rlev::valued_prompt> load_required_dataset(const std::string& path) {
    if (path.empty()) throw rlev::config_error("--data is required");
    return rlev::load_dataset(path);
}

// ---------------------------------------------------------------- subcommands

int run_gen_data(const common_flags& common, const config_binder& binder,
                 const std::vector<std::string>& overridden, int exams, int questions, int vocab,
                 int answer_len, const std::string& scores, std::uint64_t seed, int first_exam_id,
                 const std::string& out_name) {
    rlev::exam_dataset_config config;
    config.num_exams = exams;
    config.questions_per_exam = questions;
    config.vocab_size = vocab;
    config.answer_length = answer_len;
    config.scores = rlev::score_distribution_from_string(scores);
    config.seed = seed;
    config.first_exam_id = first_exam_id;

    const auto dataset = rlev::generate_dataset(config);
    fs::create_directories(common.out_dir);
    rlev::save_dataset(resolve_out(common, out_name), dataset);
    write_manifest(common, "gen-data", binder, seed, {out_name}, overridden);
    std::cout << "wrote " << dataset.size() << " prompts to "
              << resolve_out(common, out_name).string() << '\n';
    return 0;
}

int run_train(const common_flags& common, const config_binder& binder,
              const std::vector<std::string>& overridden, const train_flags& flags,
              const std::string& log_name, const std::string& checkpoint_name) {
    const rlev::train_config config = to_train_config(flags);
    const auto dataset = load_required_dataset(flags.data);

    rlev::train_result result = rlev::train(config, dataset);

    fs::create_directories(common.out_dir);
    result.final_policy.save_file(resolve_out(common, checkpoint_name));
    if (!result.log.empty()) result.log.back().policy_checkpoint_ref = checkpoint_name;

    auto log_out = open_artifact(resolve_out(common, log_name));
    for (const auto& rec : result.log) log_out << rlev::to_jsonl(rec) << '\n';

    write_manifest(common, "train", binder, flags.seed, {log_name, checkpoint_name}, overridden);
    if (!result.log.empty()) {
        const auto& last = result.log.back();
        std::cout << "step " << last.step << ": acc " << last.acc << ", h_acc " << last.h_acc
                  << ", mean length " << last.mean_length << '\n';
    }
    return 0;
}

int run_eval(const common_flags& common, const config_binder& binder,
             const std::vector<std::string>& overridden, const std::string& data,
             const std::string& policy_path, double bin_fraction, std::uint64_t seed,
             const std::string& out_name) {
    const auto dataset = load_required_dataset(data);
    if (policy_path.empty()) throw rlev::config_error("--policy is required");
    const rlev::policy pi = rlev::policy::load_file(policy_path);

    const auto report = rlev::compute_metrics(rlev::evaluate_policy(pi, dataset), bin_fraction);
    auto out = open_artifact(resolve_out(common, out_name));
    out << rlev::to_json_string(report) << '\n';
    write_manifest(common, "eval", binder, seed, {out_name}, overridden);
    std::cout << rlev::to_json_string(report) << '\n';
    return 0;
}

int run_grad_check(const common_flags& common, const config_binder& binder,
                   const std::vector<std::string>& overridden, int vocab, int max_len, int trials,
                   double eps, double tol, std::uint64_t seed, const std::string& out_name) {
    if (vocab < 2) throw rlev::config_error("vocab must be >= 2");
    if (max_len < 1) throw rlev::config_error("max-len must be >= 1");
    if (trials < 1) throw rlev::config_error("trials must be >= 1");
    if (!(eps > 0.0)) throw rlev::config_error("eps must be > 0");
    if (!(tol > 0.0)) throw rlev::config_error("tol must be > 0");

    const double alphas[] = {0.0, 1.0, 10.0};
    std::vector<rlev::grad_report_row> rows;
    double max_error = 0.0;
    for (int trial = 0; trial < trials; ++trial) {
        const int window = trial % std::min(3, max_len + 1);
        const double alpha = alphas[static_cast<std::size_t>(trial % 3)];
        const auto instance = rlev::make_gradient_check_instance(
            vocab, max_len, window, alpha, rlev::mix(seed, static_cast<std::uint64_t>(trial)),
            trial);
        auto report =
            rlev::gradient_report(instance.pi, instance.prompt, instance.spec, eps);
        for (const auto& row : report) max_error = std::max(max_error, row.max_abs_error);
        rows.insert(rows.end(), report.begin(), report.end());
    }

    auto out = open_artifact(resolve_out(common, out_name));
    rlev::write_gradient_report_csv(out, rows);
    write_manifest(common, "grad-check", binder, seed, {out_name}, overridden);

    std::cout << rows.size() << " gradient entries checked, max |analytic - fd| = " << max_error
              << " (tolerance " << tol << ")\n";
    if (max_error >= tol) {
        std::cerr << "grad-check FAILED\n";
        return exit_check_failure;
    }
    return 0;
}

int run_ablate_cmd(const common_flags& common, const config_binder& binder,
                   const std::vector<std::string>& overridden, const train_flags& flags,
                   const std::string& forms_text, const std::string& seeds_text,
                   const std::string& out_name) {
    const rlev::train_config base = to_train_config(flags);
    const auto dataset = load_required_dataset(flags.data);

    std::vector<rlev::reward_form> forms;
    for (const auto& name : split_csv(forms_text))
        forms.push_back(rlev::reward_form_from_string(name));
    const auto seeds = parse_seed_list(seeds_text);

    const auto grid = rlev::run_ablation(base, dataset, forms, seeds);
    auto out = open_artifact(resolve_out(common, out_name));
    rlev::write_ablation_csv(out, grid);
    write_manifest(common, "ablate", binder, seeds.front(), {out_name}, overridden);
    std::cout << "ablation grid: " << grid.rows.size() << " forms x " << seeds.size()
              << " seeds\n";
    return 0;
}

int run_sweep_alpha(const common_flags& common, const config_binder& binder,
                    const std::vector<std::string>& overridden, const train_flags& flags,
                    const std::string& alphas_text, const std::string& seeds_text,
                    const std::string& out_name) {
    const rlev::train_config base = to_train_config(flags);
    const auto dataset = load_required_dataset(flags.data);
    const auto alphas = parse_double_list(alphas_text, "alpha");
    const auto seeds = parse_seed_list(seeds_text);

    const auto rows = rlev::alpha_sweep(base, dataset, alphas, seeds);
    auto out = open_artifact(resolve_out(common, out_name));
    rlev::write_alpha_sweep_csv(out, rows);
    write_manifest(common, "sweep-alpha", binder, seeds.front(), {out_name}, overridden);
    std::cout << "alpha sweep: " << rows.size() << " settings x " << seeds.size() << " seeds\n";
    return 0;
}

int run_traj(const common_flags& common, const config_binder& binder,
             const std::vector<std::string>& overridden, const std::string& data,
             const std::string& policy_path, int cohort_size, int samples, std::uint64_t seed,
             const std::string& label, const std::string& out_name) {
    const auto dataset = load_required_dataset(data);
    if (policy_path.empty()) throw rlev::config_error("--policy is required");
    const rlev::policy pi = rlev::policy::load_file(policy_path);

    rlev::trajectory_options options;
    options.sample_count = samples;
    options.seed = seed;
    options.checkpoint_label = label;
    const auto [top, bottom] = rlev::eos_trajectories(pi, dataset, cohort_size, options);

    auto out = open_artifact(resolve_out(common, out_name));
    rlev::write_trajectory_csv(out, top, bottom);
    write_manifest(common, "traj", binder, seed, {out_name}, overridden);
    std::cout << "trajectories (" << top.mode << " mode) for 2 x " << cohort_size
              << " prompts\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Desk-scale laboratory for value-weighted correctness rewards"};
    app.require_subcommand(1);

    // gen-data
    common_flags gen_common;
    config_binder gen_binder;
    int gen_exams = 4, gen_questions = 50, gen_vocab = 6, gen_answer_len = 2, gen_first_exam = 0;
    std::string gen_scores = "skewed_scores", gen_out = "dataset.jsonl";
    std::uint64_t gen_seed = 0;
    auto* gen = app.add_subcommand("gen-data", "Generate a synthetic exam dataset");
    register_common(gen, gen_common);
    gen->add_option("--exams", gen_exams, "Number of exams");
    gen->add_option("--questions", gen_questions, "Questions per exam");
    gen->add_option("--vocab", gen_vocab, "Vocabulary size including EOS");
    gen->add_option("--answer-len", gen_answer_len, "Maximum answer length (1-4)");
    gen->add_option("--scores", gen_scores, "uniform_scores | skewed_scores");
    gen->add_option("--seed", gen_seed, "Generator seed");
    gen->add_option("--first-exam-id", gen_first_exam,
                    "Exam id offset (keeps train/test exams disjoint)");
    gen->add_option("--out", gen_out, "Output JSONL name");
    gen_binder.bind("exams", &gen_exams);
    gen_binder.bind("questions", &gen_questions);
    gen_binder.bind("vocab", &gen_vocab);
    gen_binder.bind("answer_len", &gen_answer_len);
    gen_binder.bind("scores", &gen_scores);
    gen_binder.bind("seed", &gen_seed);
    gen_binder.bind("first_exam_id", &gen_first_exam);
    gen_binder.bind("out", &gen_out);

    // train
    common_flags train_common;
    config_binder train_binder;
    train_flags train_opts;
    std::string train_log = "run_log.jsonl", train_ckpt = "policy.jsonl";
    auto* train_cmd = app.add_subcommand("train", "Train a tabular policy");
    register_common(train_cmd, train_common);
    register_train_flags(train_cmd, train_opts, train_binder);
    train_cmd->add_option("--run-log", train_log, "Run log JSONL name");
    train_cmd->add_option("--checkpoint", train_ckpt, "Policy checkpoint name");
    train_binder.bind("run_log", &train_log);
    train_binder.bind("checkpoint", &train_ckpt);

    // eval
    common_flags eval_common;
    config_binder eval_binder;
    std::string eval_data, eval_policy, eval_out = "metrics.json";
    double eval_bin_fraction = 0.2;
    std::uint64_t eval_seed = 0;
    auto* eval_cmd = app.add_subcommand("eval", "Greedy-decode a checkpoint and report metrics");
    register_common(eval_cmd, eval_common);
    eval_cmd->add_option("--data", eval_data, "Dataset JSONL path");
    eval_cmd->add_option("--policy", eval_policy, "Policy checkpoint path");
    eval_cmd->add_option("--bin-fraction", eval_bin_fraction, "Value-bin fraction");
    eval_cmd->add_option("--seed", eval_seed, "Recorded in the manifest");
    eval_cmd->add_option("--out", eval_out, "Metrics JSON name");
    eval_binder.bind("data", &eval_data);
    eval_binder.bind("policy", &eval_policy);
    eval_binder.bind("bin_fraction", &eval_bin_fraction);
    eval_binder.bind("seed", &eval_seed);
    eval_binder.bind("out", &eval_out);

    // grad-check
    common_flags grad_common;
    config_binder grad_binder;
    int grad_vocab = 3, grad_max_len = 2, grad_trials = 100;
    double grad_eps = 1e-5, grad_tol = 1e-6;
    std::uint64_t grad_seed = 0;
    std::string grad_out = "grad_report.csv";
    auto* grad_cmd =
        app.add_subcommand("grad-check", "Verify analytic gradients against finite differences");
    register_common(grad_cmd, grad_common);
    grad_cmd->add_option("--vocab", grad_vocab, "Vocabulary size including EOS");
    grad_cmd->add_option("--max-len", grad_max_len, "Response cap");
    grad_cmd->add_option("--trials", grad_trials, "Random instances to check");
    grad_cmd->add_option("--eps", grad_eps, "Finite-difference step");
    grad_cmd->add_option("--tol", grad_tol, "Maximum allowed |analytic - fd|");
    grad_cmd->add_option("--seed", grad_seed, "Instance seed");
    grad_cmd->add_option("--out", grad_out, "Report CSV name");
    grad_binder.bind("vocab", &grad_vocab);
    grad_binder.bind("max_len", &grad_max_len);
    grad_binder.bind("trials", &grad_trials);
    grad_binder.bind("eps", &grad_eps);
    grad_binder.bind("tol", &grad_tol);
    grad_binder.bind("seed", &grad_seed);
    grad_binder.bind("out", &grad_out);

    // ablate
    common_flags ablate_common;
    config_binder ablate_binder;
    train_flags ablate_opts;
    std::string ablate_forms = "human_aligned,uniform,shuffled,correctness_only";
    std::string ablate_seeds = "0,1,2,3,4";
    std::string ablate_out = "ablation.csv";
    auto* ablate_cmd = app.add_subcommand("ablate", "Train every reward form on shared seeds");
    register_common(ablate_cmd, ablate_common);
    register_train_flags(ablate_cmd, ablate_opts, ablate_binder);
    ablate_cmd->add_option("--forms", ablate_forms, "Comma-separated reward forms");
    ablate_cmd->add_option("--seeds", ablate_seeds, "Comma-separated seeds");
    ablate_cmd->add_option("--out", ablate_out, "Grid CSV name");
    ablate_binder.bind("forms", &ablate_forms);
    ablate_binder.bind("seeds", &ablate_seeds);
    ablate_binder.bind("out", &ablate_out);

    // sweep-alpha
    common_flags sweep_common;
    config_binder sweep_binder;
    train_flags sweep_opts;
    std::string sweep_alphas = "1,5,10,15,20";
    std::string sweep_seeds = "0,1,2,3,4";
    std::string sweep_out = "alpha_sweep.csv";
    auto* sweep_cmd = app.add_subcommand("sweep-alpha", "Seed-averaged metrics per alpha");
    register_common(sweep_cmd, sweep_common);
    register_train_flags(sweep_cmd, sweep_opts, sweep_binder);
    sweep_cmd->add_option("--alphas", sweep_alphas, "Comma-separated alpha values");
    sweep_cmd->add_option("--seeds", sweep_seeds, "Comma-separated seeds");
    sweep_cmd->add_option("--out", sweep_out, "Sweep CSV name");
    sweep_binder.bind("alphas", &sweep_alphas);
    sweep_binder.bind("seeds", &sweep_seeds);
    sweep_binder.bind("out", &sweep_out);

    // traj
    common_flags traj_common;
    config_binder traj_binder;
    std::string traj_data, traj_policy, traj_label = "policy", traj_out = "trajectories.csv";
    int traj_cohort = 20, traj_samples = 1000;
    std::uint64_t traj_seed = 0;
    auto* traj_cmd =
        app.add_subcommand("traj", "EOS probability trajectories for value cohorts");
    register_common(traj_cmd, traj_common);
    traj_cmd->add_option("--data", traj_data, "Dataset JSONL path");
    traj_cmd->add_option("--policy", traj_policy, "Policy checkpoint path");
    traj_cmd->add_option("--cohort-size", traj_cohort, "Prompts per value cohort");
    traj_cmd->add_option("--samples", traj_samples, "Rollouts per prompt in sampled mode");
    traj_cmd->add_option("--seed", traj_seed, "Sampling seed");
    traj_cmd->add_option("--label", traj_label, "Checkpoint label recorded in the table");
    traj_cmd->add_option("--out", traj_out, "Trajectory CSV name");
    traj_binder.bind("data", &traj_data);
    traj_binder.bind("policy", &traj_policy);
    traj_binder.bind("cohort_size", &traj_cohort);
    traj_binder.bind("samples", &traj_samples);
    traj_binder.bind("seed", &traj_seed);
    traj_binder.bind("label", &traj_label);
    traj_binder.bind("out", &traj_out);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return exit_usage;
    }

    try {
        auto merge = [](const common_flags& common, const config_binder& binder,
                        const CLI::App& cmd) {
            return common.config_file.empty()
                       ? std::vector<std::string>{}
                       : binder.merge(load_config_file(common.config_file), cmd);
        };

        if (gen->parsed()) {
            const auto overridden = merge(gen_common, gen_binder, *gen);
            return run_gen_data(gen_common, gen_binder, overridden, gen_exams, gen_questions,
                                gen_vocab, gen_answer_len, gen_scores, gen_seed, gen_first_exam,
                                gen_out);
        }
        if (train_cmd->parsed()) {
            const auto overridden = merge(train_common, train_binder, *train_cmd);
            return run_train(train_common, train_binder, overridden, train_opts, train_log,
                             train_ckpt);
        }
        if (eval_cmd->parsed()) {
            const auto overridden = merge(eval_common, eval_binder, *eval_cmd);
            return run_eval(eval_common, eval_binder, overridden, eval_data, eval_policy,
                            eval_bin_fraction, eval_seed, eval_out);
        }
        if (grad_cmd->parsed()) {
            const auto overridden = merge(grad_common, grad_binder, *grad_cmd);
            return run_grad_check(grad_common, grad_binder, overridden, grad_vocab, grad_max_len,
                                  grad_trials, grad_eps, grad_tol, grad_seed, grad_out);
        }
        if (ablate_cmd->parsed()) {
            const auto overridden = merge(ablate_common, ablate_binder, *ablate_cmd);
            return run_ablate_cmd(ablate_common, ablate_binder, overridden, ablate_opts,
                                  ablate_forms, ablate_seeds, ablate_out);
        }
        if (sweep_cmd->parsed()) {
            const auto overridden = merge(sweep_common, sweep_binder, *sweep_cmd);
            return run_sweep_alpha(sweep_common, sweep_binder, overridden, sweep_opts,
                                   sweep_alphas, sweep_seeds, sweep_out);
        }
        if (traj_cmd->parsed()) {
            const auto overridden = merge(traj_common, traj_binder, *traj_cmd);
            return run_traj(traj_common, traj_binder, overridden, traj_data, traj_policy,
                            traj_cohort, traj_samples, traj_seed, traj_label, traj_out);
        }
        std::cerr << "no subcommand given\n";
        return exit_usage;
    } catch (const rlev::config_error& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return exit_config;
    } catch (const rlev::data_error& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return exit_data;
    } catch (const rlev::budget_error& e) {
        std::cerr << "budget error: " << e.what() << '\n';
        return exit_budget;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_internal;
    }
}
