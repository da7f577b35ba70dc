// Command line front end: train single runs, evaluate checkpoints, run the
// full comparison campaign, and exercise the built-in verification oracles.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "irsim/harness.hpp"

using namespace irsim;
namespace fs = std::filesystem;

namespace {

struct CommonOpts {
    std::string preset = "desk";
    std::string config_path;
    std::string output_dir;
};

ExperimentConfig resolve_config(const CommonOpts& opts) {
    ExperimentConfig cfg = preset_by_name(opts.preset);
    if (!opts.config_path.empty()) cfg = load_config(opts.config_path, std::move(cfg));
    if (!opts.output_dir.empty()) cfg.output_dir = opts.output_dir;
    return cfg;
}

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--preset", opts.preset, "base preset: desk or paper")
        ->check(CLI::IsMember({"desk", "paper"}));
    cmd->add_option("--config", opts.config_path, "JSON overlay applied on top of the preset");
    cmd->add_option("--out", opts.output_dir, "output directory");
}

int cmd_train(const CommonOpts& opts, std::uint64_t seed, bool seed_set,
              const std::string& variant, int elements, int episodes) {
    ExperimentConfig cfg = resolve_config(opts);
    if (episodes > 0) cfg.episodes = episodes;
    RunKey key;
    key.variant = cfgdetail::variant_from_string(variant);
    key.elements = elements >= 0 ? elements : cfg.env.irs.elements;
    key.seed = seed_set ? seed : cfg.seeds.front();

    fs::create_directories(cfg.output_dir);
    auto [result, agent] = train_run(cfg, key);
    const GridMap grid = build_grid(cfg.env.world);
    emit_outputs(result, grid, cfg.output_dir);
    {
        std::ofstream ck(fs::path(cfg.output_dir) / ("net_" + key.file_tag() + ".ckpt"),
                         std::ios::trunc);
        agent.online().save(ck);
    }

    std::printf("run %s: %d episodes, eval sum-rate %.4f bits/s/Hz, convergence %s\n",
                key.file_tag().c_str(), cfg.episodes, result.eval_mean_noma,
                result.convergence_episode ? std::to_string(*result.convergence_episode).c_str()
                                           : "none");
    std::printf("constraint audit: %ld steps, %ld hard violations, %ld QoS-violating steps\n",
                result.audited_steps, result.hard_violations, result.qos_violation_steps);
    std::printf("wall time %.1fs, artifacts in %s\n", result.wall_seconds,
                cfg.output_dir.c_str());
    return result.hard_violations == 0 ? 0 : 1;
}

int cmd_evaluate(const CommonOpts& opts, const std::string& checkpoint, std::uint64_t seed,
                 bool seed_set, const std::string& variant, int elements,
                 const std::string& dump_channel) {
    ExperimentConfig cfg = resolve_config(opts);
    EnvConfig env_cfg = cfg.env;
    env_cfg.irs = irs_for_elements(cfg.env.irs, elements >= 0 ? elements : cfg.env.irs.elements);
    env_cfg.seed = seed_set ? seed : cfg.seeds.front();
    Environment env(env_cfg);

    AgentConfig agent_cfg = cfg.agent;
    agent_cfg.variant = cfgdetail::variant_from_string(variant);
    const ActionLayout layout =
        agent_cfg.flat_actions
            ? ActionLayout::flat_mode(env_cfg.robots, env_cfg.irs.subsurfaces,
                                      env_cfg.phase_bits, env_cfg.power_levels)
            : ActionLayout::branched(env_cfg.robots, env_cfg.irs.subsurfaces, env_cfg.phase_bits,
                                     env_cfg.power_levels);
    const StateCodec codec(env_cfg.irs.subsurfaces, env_cfg.phase_bits, env_cfg.robots,
                           env_cfg.power_budget, env_cfg.world);
    DqnAgent agent(layout, codec.dimension(), agent_cfg, env_cfg.seed);

    std::ifstream ck(checkpoint);
    if (!ck) {
        std::fprintf(stderr, "cannot open checkpoint %s\n", checkpoint.c_str());
        return 2;
    }
    agent.load_online(DuelingNet::load(ck));

    EpisodeOptions opt;
    opt.epsilon = 0.0;
    opt.keep_details = true;
    const EpisodeStats stats = run_episode(env, agent, cfg.episodes, opt);

    fs::create_directories(cfg.output_dir);
    {
        std::ofstream os(fs::path(cfg.output_dir) / "evaluate_trajectory.csv", std::ios::trunc);
        write_trajectory_csv(stats.trajectories, env.grid(), os);
    }
    if (!dump_channel.empty()) {
        std::ofstream os(dump_channel, std::ios::trunc);
        dump_channel_csv(env.current_realization(), os);
    }

    std::printf("greedy evaluation: %d steps, mean sum-rate %.4f bits/s/Hz\n", stats.steps,
                stats.mean_sum_rate);
    for (std::size_t r = 0; r < stats.trajectories.size(); ++r)
        std::printf("robot %zu path length %.1f m\n", r + 1,
                    stats.trajectories[r].path_length(env.grid().resolution()));
    return env.hard_violations() == 0 ? 0 : 1;
}

int cmd_compare(const CommonOpts& opts, const std::string& seeds_csv, int episodes) {
    ExperimentConfig cfg = resolve_config(opts);
    if (episodes > 0) cfg.episodes = episodes;
    if (!seeds_csv.empty()) {
        cfg.seeds.clear();
        std::stringstream ss(seeds_csv);
        std::string tok;
        while (std::getline(ss, tok, ',')) cfg.seeds.push_back(std::stoull(tok));
    }

    const SuiteOutcome outcome = run_suite(cfg, /*verbose=*/true);
    std::printf("\n%s", outcome.table.render().c_str());

    long violations = 0;
    for (const RunResult& r : outcome.results) violations += r.hard_violations;
    std::printf("constraint audit: %ld hard violations across %zu runs\n", violations,
                outcome.results.size());
    return violations == 0 ? 0 : 1;
}

std::vector<double> margined_state_cli(const DuelingNet& net, Rng& rng) {
    // Finite differences need pre-activations away from rectifier kinks.
    for (int attempt = 0; attempt < 200; ++attempt) {
        std::vector<double> state(static_cast<std::size_t>(net.input_dim()));
        for (double& v : state) v = rng.normal();
        bool clear = true;
        std::vector<double> x = state;
        for (const Layer& l : net.params().trunk) {
            std::vector<double> y(static_cast<std::size_t>(l.out));
            for (int o = 0; o < l.out && clear; ++o) {
                double acc = l.b[o];
                for (int i = 0; i < l.in; ++i)
                    acc += l.W[static_cast<std::size_t>(o) * l.in + i] * x[i];
                if (std::abs(acc) < 1e-3) clear = false;
                y[o] = std::max(0.0, acc);
            }
            if (!clear) break;
            x = std::move(y);
        }
        if (clear) return state;
    }
    throw std::runtime_error("gradcheck: could not find a margin-clear probe state");
}

int cmd_gradcheck(int nets) {
    Rng rng(20240809);
    double worst_dueling = 0.0;
    for (int n = 0; n < nets; ++n) {
        DuelingNet net(6, {16, 16}, {5, 4, 4, 3}, HeadMode::Dueling, rng);
        GradCheckSample s;
        s.state = margined_state_cli(net, rng);
        for (int size : net.branches()) s.action.push_back(rng.uniform_int(size));
        s.target = rng.normal();
        worst_dueling = std::max(worst_dueling, grad_check(net, s));
    }

    double worst_linear = 0.0;
    for (int n = 0; n < nets; ++n) {
        DuelingNet net(6, {}, {5, 3}, HeadMode::Dueling, rng);
        GradCheckSample s;
        s.state.resize(6);
        for (double& v : s.state) v = rng.normal();
        for (int size : net.branches()) s.action.push_back(rng.uniform_int(size));
        s.target = rng.normal();
        worst_linear = std::max(worst_linear, grad_check(net, s));
    }

    const bool ok = worst_dueling < 1e-4 && worst_linear < 1e-8;
    std::printf("gradcheck: %d rectifier nets max rel error %.3e (< 1e-4), %d linear nets %.3e "
                "(< 1e-8): %s\n",
                nets, worst_dueling, nets, worst_linear, ok ? "PASS" : "FAIL");
    return ok ? 0 : 1;
}

int cmd_oracle(std::uint64_t seed, const std::string& dump_path) {
    bool all_ok = true;
    const auto report = [&all_ok](const char* name, bool ok, double measured) {
        std::printf("oracle %-28s %s (%.3e)\n", name, ok ? "PASS" : "FAIL", measured);
        all_ok = all_ok && ok;
    };

    {  // blocked-cell count of the default room against direct enumeration
        const WorldModel w = paper_world();
        const GridMap grid = build_grid(w);
        int expected = 0;
        for (int j = 0; j < grid.ny(); ++j)
            for (int i = 0; i < grid.nx(); ++i) {
                const double cx = (i + 0.5) * w.grid_resolution;
                const double cy = (j + 0.5) * w.grid_resolution;
                for (const Box& b : w.obstacles)
                    if (cx >= b.lo.x && cx <= b.hi.x && cy >= b.lo.y && cy <= b.hi.y) {
                        ++expected;
                        break;
                    }
            }
        report("grid-blocked-count", grid.blocked_count() == expected && expected == 825,
               static_cast<double>(grid.blocked_count()));
    }

    const WorldModel w = paper_world();
    ChannelParams params;
    IrsConfig irs{4, 4, 1, 1, 0.0625};
    Rng rng(seed);

    {  // effective channel against the explicit diagonal-matrix form
        double worst = 0.0;
        for (int trial = 0; trial < 50; ++trial) {
            const auto real = sample_channel({{1.0 + 6.0 * rng.uniform(), 1.0 + 4.0 * rng.uniform(), 0.3}},
                                             w, params, irs, rng);
            std::vector<int> idx(4);
            for (auto& v : idx) v = rng.uniform_int(4);
            const PhaseState ph = PhaseState::from_element_indices(idx, 2);
            cplx expected = real.direct[0];
            for (int k = 0; k < 4; ++k)
                expected += std::conj(real.ap_irs[k]) * std::polar(1.0, ph.theta(k)) *
                            real.irs_robot[0][k];
            const cplx got = effective_channel(real, ph, 0);
            worst = std::max(worst, std::abs(got - expected) / std::abs(expected));
        }
        report("effective-channel-matrix", worst < 1e-12, worst);
    }

    {  // SINR/rate from raw complex triples, recomputed with plain loops
        double worst = 0.0;
        for (int trial = 0; trial < 200; ++trial) {
            const int n = 1 + rng.uniform_int(3);
            std::vector<cplx> H(n);
            for (auto& h : H) h = cplx{rng.normal(), rng.normal()} * 1e-3;
            std::vector<double> gains;
            for (const auto& h : H) gains.push_back(std::norm(h));
            const DecodingOrder order = decoding_order(gains);
            PowerAllocation powers;
            powers.budget = 0.1;
            for (int i = 0; i < n; ++i) powers.p.push_back(0.1 / n);
            const double noise = 1e-9;
            for (int i = 0; i < n; ++i) {
                double interf = 0.0;
                for (int j = 0; j < n; ++j)
                    if (order.of(j) > order.of(i))
                        interf += (H[j].real() * H[j].real() + H[j].imag() * H[j].imag()) *
                                  powers.p[j];
                const double own =
                    (H[i].real() * H[i].real() + H[i].imag() * H[i].imag()) * powers.p[i];
                const double expect_sinr = own / (interf + noise);
                const double expect_rate = std::log2(1.0 + expect_sinr);
                worst = std::max(worst, std::abs(sinr(i, H, powers, order, noise) - expect_sinr) /
                                            expect_sinr);
                worst = std::max(worst, std::abs(rate(i, H, powers, order, noise) - expect_rate) /
                                            std::max(expect_rate, 1e-300));
            }
        }
        report("sinr-rate-bruteforce", worst < 1e-10, worst);
    }

    {  // brute-force phase search dominates random codebook states
        bool dominated = true;
        double best_seen = 0.0;
        for (int trial = 0; trial < 20; ++trial) {
            IrsConfig small{3, 3, 1, 1, 0.0625};
            const auto real = sample_channel({{2.0 + 4.0 * rng.uniform(), 1.0 + 3.0 * rng.uniform(), 0.3}},
                                             w, params, small, rng);
            const PhaseState best = best_phase_bruteforce(real, 2, 0);
            const double best_power = std::norm(effective_channel(real, best, 0));
            best_seen = best_power;
            for (int probe = 0; probe < 200; ++probe) {
                std::vector<int> idx(3);
                for (auto& v : idx) v = rng.uniform_int(4);
                const PhaseState cand = PhaseState::from_element_indices(idx, 2);
                if (std::norm(effective_channel(real, cand, 0)) > best_power + 1e-18)
                    dominated = false;
            }
        }
        report("phase-bruteforce-maximal", dominated, best_seen);
    }

    if (!dump_path.empty()) {
        Rng dump_rng(seed);
        const auto real = sample_channel({{4.0, 1.0, 0.3}, {6.5, 5.5, 0.3}}, w, params,
                                         IrsConfig{10, 5, 2, 1, 0.0625}, dump_rng);
        std::ofstream os(dump_path, std::ios::trunc);
        dump_channel_csv(real, os);
        std::printf("oracle wrote channel dump to %s\n", dump_path.c_str());
    }

    return all_ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"IRS-aided multi-robot NOMA simulator and D3QN training harness"};
    app.require_subcommand(1);

    CommonOpts train_opts, eval_opts, compare_opts;
    std::uint64_t train_seed = 0, eval_seed = 0, oracle_seed = 7;
    std::string train_variant = "d3qn", eval_variant = "d3qn";
    int train_elements = -1, eval_elements = -1;
    int train_episodes = 0, compare_episodes = 0, gradcheck_nets = 100;
    std::string checkpoint, compare_seeds, dump_channel, oracle_dump;

    CLI::App* train = app.add_subcommand("train", "train one run and emit its artifacts");
    add_common(train, train_opts);
    CLI::Option* train_seed_opt = train->add_option("--seed", train_seed, "run seed");
    train->add_option("--variant", train_variant, "d3qn, double or dueling")
        ->check(CLI::IsMember({"d3qn", "double", "dueling"}));
    train->add_option("--elements", train_elements, "IRS element count (0 = no IRS)");
    train->add_option("--episodes", train_episodes, "episode budget override");

    CLI::App* evaluate = app.add_subcommand("evaluate", "greedy evaluation of a checkpoint");
    add_common(evaluate, eval_opts);
    evaluate->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
    CLI::Option* eval_seed_opt = evaluate->add_option("--seed", eval_seed, "environment seed");
    evaluate->add_option("--variant", eval_variant, "d3qn, double or dueling")
        ->check(CLI::IsMember({"d3qn", "double", "dueling"}));
    evaluate->add_option("--elements", eval_elements, "IRS element count (0 = no IRS)");
    evaluate->add_option("--dump-channel", dump_channel, "write the realization CSV here");

    CLI::App* compare = app.add_subcommand("compare", "full campaign with comparison table");
    add_common(compare, compare_opts);
    compare->add_option("--seeds", compare_seeds, "comma-separated seed list");
    compare->add_option("--episodes", compare_episodes, "episode budget override");

    CLI::App* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient audit");
    gradcheck->add_option("--nets", gradcheck_nets, "number of random nets per family");

    CLI::App* oracle = app.add_subcommand("oracle", "brute-force small-instance checks");
    oracle->add_option("--seed", oracle_seed, "oracle seed");
    oracle->add_option("--dump-channel", oracle_dump, "write a sample realization CSV here");

    CLI11_PARSE(app, argc, argv);

    try {
        if (train->parsed())
            return cmd_train(train_opts, train_seed, !train_seed_opt->empty(), train_variant,
                             train_elements, train_episodes);
        if (evaluate->parsed())
            return cmd_evaluate(eval_opts, checkpoint, eval_seed, !eval_seed_opt->empty(),
                                eval_variant, eval_elements, dump_channel);
        if (compare->parsed()) return cmd_compare(compare_opts, compare_seeds, compare_episodes);
        if (gradcheck->parsed()) return cmd_gradcheck(gradcheck_nets);
        if (oracle->parsed()) return cmd_oracle(oracle_seed, oracle_dump);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
