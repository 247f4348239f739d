#include "rlev/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "rlev/errors.hpp"
#include "rlev/exact_oracle.hpp"
#include "rlev/rng.hpp"

namespace rlev {

const char* to_string(cohort_kind c) {
    return c == cohort_kind::top_valued ? "top_valued" : "bottom_valued";
}

namespace {

// Probability-weighted EOS statistics over all active prefixes of one prompt.
void exact_walk(const policy& pi, const valued_prompt& prompt, std::vector<token>& prefix,
                double prob, std::vector<double>& eos_mass, std::vector<double>& active_mass) {
    const auto t = prefix.size();
    const std::vector<double> dist = pi.step_distribution(pi.make_context(prompt.id, prefix));
    active_mass[t] += prob;
    eos_mass[t] += prob * dist[0];
    if (static_cast<int>(t) + 1 >= pi.max_len()) return;
    for (token v = 1; v < pi.vocab_size(); ++v) {
        prefix.push_back(v);
        exact_walk(pi, prompt, prefix, prob * dist[static_cast<std::size_t>(v)], eos_mass,
                   active_mass);
        prefix.pop_back();
    }
}

trajectory_table cohort_trajectory(const policy& pi, std::span<const valued_prompt> cohort,
                                   cohort_kind kind, const trajectory_options& options,
                                   bool exact) {
    trajectory_table table;
    table.cohort = kind;
    table.checkpoint_label = options.checkpoint_label;
    table.mode = exact ? "exact" : "sampled";

    const auto steps = static_cast<std::size_t>(pi.max_len());
    std::vector<double> eos_mass(steps, 0.0);
    std::vector<double> active_mass(steps, 0.0);

    for (const auto& prompt : cohort) {
        if (exact) {
            std::vector<token> prefix;
            exact_walk(pi, prompt, prefix, 1.0, eos_mass, active_mass);
        } else {
            for (int i = 0; i < options.sample_count; ++i) {
                const std::uint64_t seed = mix(options.seed, 0x7472616aull,
                                               static_cast<std::uint64_t>(prompt.id),
                                               static_cast<std::uint64_t>(i));
                const rollout r = sample_rollout(pi, prompt, seed, true);
                for (std::size_t t = 0; t < r.step_distributions.size(); ++t) {
                    active_mass[t] += 1.0;
                    eos_mass[t] += r.step_distributions[t][0];
                }
            }
        }
    }

    for (std::size_t t = 0; t < steps; ++t) {
        if (!(active_mass[t] > 0.0)) break;
        table.rows.push_back({static_cast<int>(t), eos_mass[t] / active_mass[t], active_mass[t]});
    }
    return table;
}

}  // namespace

std::pair<trajectory_table, trajectory_table> eos_trajectories(
    const policy& pi, std::span<const valued_prompt> dataset, int cohort_size,
    const trajectory_options& options) {
    if (cohort_size < 1) throw config_error("eos_trajectories: cohort_size must be >= 1");
    if (2 * static_cast<std::size_t>(cohort_size) > dataset.size())
        throw config_error("eos_trajectories: cohorts of " + std::to_string(cohort_size) +
                           " overlap on a dataset of " + std::to_string(dataset.size()));

    std::vector<valued_prompt> sorted(dataset.begin(), dataset.end());
    std::sort(sorted.begin(), sorted.end(), [](const valued_prompt& a, const valued_prompt& b) {
        if (a.value != b.value) return a.value > b.value;
        return a.id < b.id;
    });

    const std::span<const valued_prompt> all(sorted);
    const auto size = static_cast<std::size_t>(cohort_size);
    const bool exact =
        feasible_sequence_count(pi.vocab_size(), pi.max_len()) <= options.budget;

    return {cohort_trajectory(pi, all.first(size), cohort_kind::top_valued, options, exact),
            cohort_trajectory(pi, all.last(size), cohort_kind::bottom_valued, options, exact)};
}

metrics_report mean_report(std::span<const metrics_report> reports) {
    if (reports.empty()) throw data_error("mean_report: no reports");
    metrics_report mean;
    for (const auto& r : reports) {
        mean.acc += r.acc;
        mean.h_acc += r.h_acc;
        mean.mean_length += r.mean_length;
        mean.value_density += r.value_density;
        mean.acc_high_bin += r.acc_high_bin;
        mean.acc_low_bin += r.acc_low_bin;
    }
    const double n = static_cast<double>(reports.size());
    mean.acc /= n;
    mean.h_acc /= n;
    mean.mean_length /= n;
    mean.value_density /= n;
    mean.acc_high_bin /= n;
    mean.acc_low_bin /= n;
    mean.n = reports.front().n;
    return mean;
}

namespace {

metrics_report seed_averaged_run(const train_config& base,
                                 std::span<const valued_prompt> dataset,
                                 std::span<const std::uint64_t> seeds) {
    std::vector<metrics_report> reports;
    for (std::uint64_t seed : seeds) {
        train_config config = base;
        config.seed = seed;
        const train_result result = train(config, dataset);
        reports.push_back(compute_metrics(evaluate_policy(result.final_policy, dataset)));
    }
    return mean_report(reports);
}

}  // namespace

ablation_grid run_ablation(const train_config& base, std::span<const valued_prompt> dataset,
                           std::span<const reward_form> forms,
                           std::span<const std::uint64_t> seeds) {
    if (forms.empty()) throw config_error("run_ablation: no reward forms given");
    if (seeds.empty()) throw config_error("run_ablation: no seeds given");

    ablation_grid grid;
    grid.seeds.assign(seeds.begin(), seeds.end());
    const std::uint64_t hash = dataset_hash(dataset);
    for (reward_form form : forms) {
        train_config config = base;
        config.rspec.form = form;
        grid.rows.push_back({form, seed_averaged_run(config, dataset, seeds), hash});
    }
    return grid;
}

std::vector<std::pair<double, metrics_report>> alpha_sweep(
    const train_config& base, std::span<const valued_prompt> dataset,
    std::span<const double> alphas, std::span<const std::uint64_t> seeds) {
    if (alphas.empty()) throw config_error("alpha_sweep: no alphas given");
    if (seeds.empty()) throw config_error("alpha_sweep: no seeds given");

    std::vector<std::pair<double, metrics_report>> rows;
    for (double alpha : alphas) {
        if (alpha < 0.0) throw config_error("alpha_sweep: alpha must be >= 0");
        train_config config = base;
        config.rspec.alpha = alpha;
        rows.emplace_back(alpha, seed_averaged_run(config, dataset, seeds));
    }
    return rows;
}

namespace {

std::string num(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", x);
    return buf;
}

void write_table_rows(std::ostream& out, const trajectory_table& table) {
    for (const auto& row : table.rows)
        out << to_string(table.cohort) << ',' << row.step << ',' << num(row.mean_eos_prob) << ','
            << num(row.active_count) << '\n';
}

}  // namespace

void write_trajectory_csv(std::ostream& out, const trajectory_table& top,
                          const trajectory_table& bottom) {
    out << "cohort,step,mean_eos_prob,active_count\n";
    write_table_rows(out, top);
    write_table_rows(out, bottom);
}

void write_ablation_csv(std::ostream& out, const ablation_grid& grid) {
    out << "form,seeds,data_hash," << metrics_csv_header() << '\n';
    for (const auto& row : grid.rows) {
        char hash[32];
        std::snprintf(hash, sizeof hash, "%016llx",
                      static_cast<unsigned long long>(row.data_hash));
        out << to_string(row.form) << ',' << grid.seeds.size() << ',' << hash << ','
            << metrics_csv_row(row.report) << '\n';
    }
}

void write_alpha_sweep_csv(std::ostream& out,
                           std::span<const std::pair<double, metrics_report>> rows) {
    out << "alpha," << metrics_csv_header() << '\n';
    for (const auto& [alpha, report] : rows)
        out << num(alpha) << ',' << metrics_csv_row(report) << '\n';
}

}  // namespace rlev
