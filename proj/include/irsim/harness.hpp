#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "irsim/config.hpp"

namespace irsim {

struct RunKey {
    Variant variant = Variant::D3qn;
    int elements = 0;
    std::uint64_t seed = 0;

    std::string label() const {
        return std::string(variant_name(variant)) + "_K" + std::to_string(elements);
    }
    std::string file_tag() const { return label() + "_seed" + std::to_string(seed); }
    std::string noma_scheme() const {
        return elements > 0 ? "irs-noma_K" + std::to_string(elements) : "noirs-noma";
    }
    std::string oma_scheme() const {
        return elements > 0 ? "irs-oma_K" + std::to_string(elements) : "noirs-oma";
    }
};

struct EpisodeSummary {
    double cumulative_reward = 0.0;
    int steps = 0;
    double mean_sum_rate = 0.0;
};

struct RunResult {
    RunKey key;
    std::vector<EpisodeSummary> curve;
    std::optional<int> convergence_episode;
    EpisodeStats evaluation;
    double eval_mean_noma = 0.0;
    double eval_mean_oma = 0.0;
    long audited_steps = 0;
    long hard_violations = 0;
    long qos_violation_steps = 0;
    double wall_seconds = 0.0;  // reported on stdout, never written to files
};

namespace harnessdetail {

inline void write_row(std::ofstream& os, const char* fmt, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, fmt, args...);
    os << buf;
}

inline std::ofstream open_csv(const std::filesystem::path& dir, const std::string& name) {
    std::ofstream os(dir / name, std::ios::trunc);
    if (!os) throw std::runtime_error("harness: cannot write " + (dir / name).string());
    return os;
}

inline double mean_of(const std::vector<double>& v) {
    double acc = 0.0;
    for (double x : v) acc += x;
    return v.empty() ? 0.0 : acc / v.size();
}

inline double se_of(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double acc = 0.0;
    for (double x : v) acc += (x - m) * (x - m);
    return std::sqrt(acc / (v.size() - 1) / v.size());
}

}  // namespace harnessdetail

/// Derives the IRS block for a scheme's element count. The sub-surface count
/// stays fixed and the patch size scales, so every element count exposes the
/// same state and action space; zero elements selects the no-IRS mode.
inline IrsConfig irs_for_elements(IrsConfig base, int elements) {
    if (elements == 0) return IrsConfig{0, 0, base.sub_h, base.sub_v, base.spacing};
    if (base.subsurfaces < 1 || elements % base.subsurfaces != 0)
        throw std::invalid_argument(
            "harness: element count must be a multiple of the sub-surface count");
    const int per_sub = elements / base.subsurfaces;
    base.elements = elements;
    if (per_sub % base.sub_v == 0) {
        base.sub_h = per_sub / base.sub_v;
    } else {
        base.sub_h = per_sub;
        base.sub_v = 1;
    }
    return base;
}

/// One training run plus one greedy evaluation; all randomness derives from
/// the run seed.
inline std::pair<RunResult, DqnAgent> train_run(const ExperimentConfig& cfg, RunKey key) {
    const auto t0 = std::chrono::steady_clock::now();

    EnvConfig env_cfg = cfg.env;
    env_cfg.irs = irs_for_elements(cfg.env.irs, key.elements);
    env_cfg.seed = key.seed;
    Environment env(env_cfg);

    AgentConfig agent_cfg = cfg.agent;
    agent_cfg.variant = key.variant;
    const ActionLayout layout =
        agent_cfg.flat_actions
            ? ActionLayout::flat_mode(env_cfg.robots, env_cfg.irs.subsurfaces, env_cfg.phase_bits,
                                      env_cfg.power_levels)
            : ActionLayout::branched(env_cfg.robots, env_cfg.irs.subsurfaces, env_cfg.phase_bits,
                                     env_cfg.power_levels);
    const StateCodec codec(env_cfg.irs.subsurfaces, env_cfg.phase_bits, env_cfg.robots,
                           env_cfg.power_budget, env_cfg.world);
    DqnAgent agent(layout, codec.dimension(),  agent_cfg,
                   mix_seed(key.seed, static_cast<std::uint64_t>(key.variant) + 101,
                            static_cast<std::uint64_t>(key.elements)));

    RunResult result;
    result.key = key;
    result.curve.reserve(static_cast<std::size_t>(cfg.episodes));
    std::vector<double> rewards;
    rewards.reserve(static_cast<std::size_t>(cfg.episodes));
    for (int ep = 0; ep < cfg.episodes; ++ep) {
        EpisodeOptions opt;
        opt.training = true;
        opt.epsilon = agent.epsilon(ep);
        const EpisodeStats stats = run_episode(env, agent, ep, opt);
        result.curve.push_back({stats.cumulative_reward, stats.steps, stats.mean_sum_rate});
        rewards.push_back(stats.cumulative_reward);
    }
    result.convergence_episode = detect_convergence(rewards);

    // Greedy evaluation averaged over several endpoint draws; the episode
    // indices continue past the training range, so every scheme sharing a seed
    // sees the same evaluation endpoints.
    double noma_acc = 0.0, oma_acc = 0.0;
    for (int e = 0; e < cfg.eval_episodes; ++e) {
        EpisodeOptions eval_opt;
        eval_opt.epsilon = 0.0;
        eval_opt.keep_details = e == 0;
        EpisodeStats eval = run_episode(env, agent, cfg.episodes + e, eval_opt);
        noma_acc += eval.mean_sum_rate;
        oma_acc += harnessdetail::mean_of(eval.step_oma_rates);
        if (e == 0) result.evaluation = std::move(eval);
    }
    result.eval_mean_noma = noma_acc / cfg.eval_episodes;
    result.eval_mean_oma = oma_acc / cfg.eval_episodes;

    result.audited_steps = env.audited_steps();
    result.hard_violations = env.hard_violations();
    result.qos_violation_steps = env.qos_violation_steps();
    result.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return {std::move(result), std::move(agent)};
}

/// Trajectory rows exactly as the world module documents them.
inline void write_trajectory_csv(const std::vector<Trajectory>& trajectories, const GridMap& grid,
                                 std::ostream& os) {
    os << "robot_id,step,x,y\n";
    char buf[128];
    for (std::size_t r = 0; r < trajectories.size(); ++r) {
        for (std::size_t s = 0; s < trajectories[r].cells.size(); ++s) {
            const Vec3 p = grid.cell_center(trajectories[r].cells[s]);
            std::snprintf(buf, sizeof buf, "%zu,%zu,%.12g,%.12g\n", r + 1, s, p.x, p.y);
            os << buf;
        }
    }
}

/// Learning curve, trajectory (with I_w / F_w markers), per-step rate report
/// and sum-rate-versus-path files for one run.
inline void emit_outputs(const RunResult& result, const GridMap& grid,
                         const std::filesystem::path& dir) {
    using harnessdetail::open_csv;
    using harnessdetail::write_row;
    const std::string tag = result.key.file_tag();

    {
        auto os = open_csv(dir, "learning_" + tag + ".csv");
        os << "episode,cumulative_reward,steps,mean_sum_rate,converged\n";
        const int conv = result.convergence_episode.value_or(-1);
        for (std::size_t e = 0; e < result.curve.size(); ++e) {
            const auto& row = result.curve[e];
            write_row(os, "%zu,%.12g,%d,%.12g,%d\n", e + 1, row.cumulative_reward, row.steps,
                      row.mean_sum_rate, conv >= 0 && static_cast<int>(e + 1) >= conv ? 1 : 0);
        }
    }

    {
        auto os = open_csv(dir, "trajectory_" + tag + ".csv");
        os << "robot_id,step,x,y,marker\n";
        for (std::size_t r = 0; r < result.evaluation.trajectories.size(); ++r) {
            const auto& cells = result.evaluation.trajectories[r].cells;
            for (std::size_t s = 0; s < cells.size(); ++s) {
                const Vec3 p = grid.cell_center(cells[s]);
                std::string marker;
                if (s == 0) marker = "I_" + std::to_string(r + 1);
                if (s + 1 == cells.size()) marker = "F_" + std::to_string(r + 1);
                write_row(os, "%zu,%zu,%.12g,%.12g,%s\n", r + 1, s, p.x, p.y, marker.c_str());
            }
        }
    }

    {
        auto os = open_csv(dir, "rates_" + tag + ".csv");
        os << "t,robot,decoding_order,p,sinr,rate,qos_ok\n";
        for (std::size_t t = 0; t < result.evaluation.step_details.size(); ++t) {
            const StepInfo& info = result.evaluation.step_details[t];
            for (int r = 0; r < static_cast<int>(info.report.rate.size()); ++r)
                write_row(os, "%zu,%d,%d,%.12g,%.12g,%.12g,%d\n", t, r + 1, info.order.of(r),
                          info.powers.p[r], info.report.sinr[r], info.report.rate[r],
                          info.report.qos_ok[r] ? 1 : 0);
        }
    }

    const double res = grid.resolution();
    {
        auto os = open_csv(dir, "fig4_" + result.key.noma_scheme() + "_seed" +
                                    std::to_string(result.key.seed) + ".csv");
        os << "path_m,sum_rate\n";
        for (std::size_t s = 0; s < result.evaluation.step_sum_rates.size(); ++s)
            write_row(os, "%.12g,%.12g\n", (s + 1) * res, result.evaluation.step_sum_rates[s]);
    }
    {
        auto os = open_csv(dir, "fig4_" + result.key.oma_scheme() + "_seed" +
                                    std::to_string(result.key.seed) + ".csv");
        os << "path_m,sum_rate\n";
        for (std::size_t s = 0; s < result.evaluation.step_oma_rates.size(); ++s)
            write_row(os, "%.12g,%.12g\n", (s + 1) * res, result.evaluation.step_oma_rates[s]);
    }
}

struct ComparisonTable {
    std::map<std::string, std::vector<double>> scheme_rates;  // per-seed eval mean sum-rate
    std::map<std::string, std::vector<double>> convergence;   // per-seed episode (budget if none)
    int episode_budget = 0;

    struct Gap {
        double mean = 0.0;
        double se = 0.0;
    };

    /// Paired per-seed difference a - b.
    static Gap paired_gap(const std::vector<double>& a, const std::vector<double>& b) {
        std::vector<double> diffs;
        const std::size_t n = std::min(a.size(), b.size());
        for (std::size_t i = 0; i < n; ++i) diffs.push_back(a[i] - b[i]);
        return {harnessdetail::mean_of(diffs), harnessdetail::se_of(diffs)};
    }

    std::string render() const {
        std::string out;
        char buf[256];
        out += "scheme, mean sum-rate [bits/s/Hz], std error, seeds\n";
        for (const auto& [label, rates] : scheme_rates) {
            std::snprintf(buf, sizeof buf, "%-18s %10.4f %12.4f %7zu\n", label.c_str(),
                          harnessdetail::mean_of(rates), harnessdetail::se_of(rates),
                          rates.size());
            out += buf;
        }
        out += "variant, mean convergence episode, std error, seeds\n";
        for (const auto& [label, eps] : convergence) {
            std::snprintf(buf, sizeof buf, "%-18s %10.1f %12.2f %7zu\n", label.c_str(),
                          harnessdetail::mean_of(eps), harnessdetail::se_of(eps), eps.size());
            out += buf;
        }
        return out;
    }
};

/// Aggregates evaluation sum-rates per scheme and convergence episodes per
/// variant. Runs that never converged count as the full episode budget.
inline ComparisonTable compare_variants(const std::vector<RunResult>& results,
                                        int episode_budget) {
    ComparisonTable table;
    table.episode_budget = episode_budget;
    for (const RunResult& r : results) {
        // Scheme rows compare element counts under the d3qn policy only.
        if (r.key.variant == Variant::D3qn) {
            table.scheme_rates[r.key.noma_scheme()].push_back(r.eval_mean_noma);
            table.scheme_rates[r.key.oma_scheme()].push_back(r.eval_mean_oma);
        }
        table.convergence[variant_name(r.key.variant)].push_back(
            static_cast<double>(r.convergence_episode.value_or(episode_budget)));
    }
    return table;
}

/// Unique (variant, elements) pairs the campaign trains: every requested
/// variant at the configured element count, plus the d3qn scheme sweep over
/// scheme_elements and the optional no-IRS baseline.
inline std::vector<std::pair<Variant, int>> run_plan(const ExperimentConfig& cfg) {
    std::vector<std::pair<Variant, int>> plan;
    const auto push = [&plan](Variant v, int k) {
        for (const auto& p : plan)
            if (p.first == v && p.second == k) return;
        plan.emplace_back(v, k);
    };
    for (Variant v : cfg.variants) push(v, cfg.env.irs.elements);
    for (int k : cfg.scheme_elements) push(Variant::D3qn, k);
    if (cfg.include_no_irs) push(Variant::D3qn, 0);
    return plan;
}

struct SuiteOutcome {
    std::vector<RunResult> results;
    ComparisonTable table;
};

/// Full campaign: trains every planned (variant, elements, seed) run, emits
/// per-run artifacts and checkpoint, then aggregate curves and the comparison
/// table. Output order is fixed, so reruns are byte-identical.
inline SuiteOutcome run_suite(const ExperimentConfig& cfg, bool verbose = false) {
    cfg.validate();
    const std::filesystem::path dir(cfg.output_dir);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    {  // fail before any training if the destination is unusable
        std::ofstream probe(dir / ".writable", std::ios::trunc);
        if (!probe) throw std::runtime_error("harness: output directory not writable: " +
                                             dir.string());
    }
    std::filesystem::remove(dir / ".writable");

    SuiteOutcome outcome;
    const GridMap grid = build_grid(cfg.env.world);
    for (const auto& [variant, elements] : run_plan(cfg)) {
        for (std::uint64_t seed : cfg.seeds) {
            auto [result, agent] = train_run(cfg, RunKey{variant, elements, seed});
            emit_outputs(result, grid, dir);
            {
                std::ofstream ck(dir / ("net_" + result.key.file_tag() + ".ckpt"),
                                 std::ios::trunc);
                agent.online().save(ck);
            }
            if (verbose)
                std::printf("run %-22s reward %10.2f  conv %5d  eval %6.3f  (%.1fs)\n",
                            result.key.file_tag().c_str(),
                            result.curve.empty() ? 0.0 : result.curve.back().cumulative_reward,
                            result.convergence_episode.value_or(-1), result.eval_mean_noma,
                            result.wall_seconds);
            outcome.results.push_back(std::move(result));
        }
    }

    // Aggregate learning curves per run label (mean across seeds).
    std::map<std::string, std::vector<const RunResult*>> by_label;
    for (const RunResult& r : outcome.results) by_label[r.key.label()].push_back(&r);
    for (const auto& [label, runs] : by_label) {
        auto os = harnessdetail::open_csv(dir, "fig2_mean_" + label + ".csv");
        os << "episode,mean_cumulative_reward\n";
        const std::size_t episodes = runs.front()->curve.size();
        for (std::size_t e = 0; e < episodes; ++e) {
            double acc = 0.0;
            for (const RunResult* r : runs) acc += r->curve[e].cumulative_reward;
            harnessdetail::write_row(os, "%zu,%.12g\n", e + 1, acc / runs.size());
        }
    }

    // Aggregate sum-rate-versus-path curves per scheme over the common prefix.
    std::map<std::string, std::vector<const RunResult*>> by_scheme;
    for (const RunResult& r : outcome.results) by_scheme[r.key.noma_scheme()].push_back(&r);
    for (const auto& [scheme, runs] : by_scheme) {
        std::size_t common = runs.front()->evaluation.step_sum_rates.size();
        for (const RunResult* r : runs)
            common = std::min(common, r->evaluation.step_sum_rates.size());
        auto os = harnessdetail::open_csv(dir, "fig4_mean_" + scheme + ".csv");
        os << "path_m,mean_sum_rate\n";
        for (std::size_t s = 0; s < common; ++s) {
            double acc = 0.0;
            for (const RunResult* r : runs) acc += r->evaluation.step_sum_rates[s];
            harnessdetail::write_row(os, "%.12g,%.12g\n", (s + 1) * grid.resolution(),
                                     acc / runs.size());
        }
    }

    outcome.table = compare_variants(outcome.results, cfg.episodes);
    {
        auto os = harnessdetail::open_csv(dir, "comparison.csv");
        os << "group,label,mean,std_error,samples\n";
        for (const auto& [label, rates] : outcome.table.scheme_rates)
            harnessdetail::write_row(os, "scheme,%s,%.12g,%.12g,%zu\n", label.c_str(),
                                     harnessdetail::mean_of(rates), harnessdetail::se_of(rates),
                                     rates.size());
        for (const auto& [label, eps] : outcome.table.convergence)
            harnessdetail::write_row(os, "variant,%s,%.12g,%.12g,%zu\n", label.c_str(),
                                     harnessdetail::mean_of(eps), harnessdetail::se_of(eps),
                                     eps.size());
    }
    return outcome;
}

}  // namespace irsim
