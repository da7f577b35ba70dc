#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "irsim/channel.hpp"
#include "irsim/noma.hpp"
#include "irsim/world.hpp"

namespace irsim {

struct EnvConfig {
    WorldModel world;
    ChannelParams channel;
    IrsConfig irs;
    int robots = 2;
    double power_budget = 0.1;  // P, watts
    double qos_rate = 0.0;      // R_bar, bits/s/Hz
    int phase_bits = 2;         // B0
    int power_levels = 4;       // v
    int power_steps = 0;        // simplex quantization, 0 picks max(N, 2v)
    PowerOrderMode power_order = PowerOrderMode::AsPaper;
    int max_steps = 70;
    bool freeze_channel = false;  // one realization for every cell (oracle runs)
    std::uint64_t seed = 1;

    void validate() const {
        world.validate();
        channel.validate();
        irs.validate();
        if (robots < 1) throw std::invalid_argument("env: need at least one robot");
        if (power_budget <= 0) throw std::invalid_argument("env: power budget must be positive");
        if (phase_bits < 0 || phase_bits > 16)
            throw std::invalid_argument("env: phase bits out of range");
        if (power_levels < 1) throw std::invalid_argument("env: power levels must be positive");
        if (max_steps < 0) throw std::invalid_argument("env: max steps must be nonnegative");
    }
};

/// What the learner observes and what the logs record.
struct EnvSnapshot {
    std::vector<int> phase_idx;   // codebook index per sub-surface
    std::vector<Cell> cells;      // per robot
    std::vector<bool> arrived;
    std::vector<double> power;    // watts per robot
};

struct StepInfo {
    RateReport report;
    DecodingOrder order;
    PowerAllocation powers;
    std::vector<cplx> effective;
    std::vector<bool> invalid_move;
    int qos_violations = 0;
    bool terminal = false;
    FeasibilityReport feasibility;
};

/// Episode dynamics: moves are absorbed by walls and obstacles, channels are
/// redrawn (deterministically) when a robot changes cell, phases and power are
/// set directly by the chosen action.
class Environment {
public:
    explicit Environment(EnvConfig cfg)
        : cfg_(std::move(cfg)), grid_(build_grid(cfg_.world)),
          channel_(cfg_.world, cfg_.channel, cfg_.irs, cfg_.seed) {
        cfg_.validate();
        const DecodingOrder canonical = trivial_order();
        const auto cands = power_candidates(cfg_.robots, cfg_.power_budget, cfg_.power_levels,
                                            canonical, cfg_.power_order, cfg_.power_steps);
        if (static_cast<int>(cands.size()) < cfg_.power_levels)
            throw std::invalid_argument(
                "env: power quantization too coarse for the requested candidate count");
        if (cfg_.freeze_channel) {
            Rng rng(mix_seed(cfg_.seed, 0x46525aULL));
            std::vector<Vec3> centers;
            for (int r = 0; r < cfg_.robots; ++r)
                centers.push_back(grid_.cell_center({grid_.nx() / 2, grid_.ny() / 2}));
            frozen_ = sample_channel(centers, cfg_.world, cfg_.channel, cfg_.irs, rng);
        }
    }

    const EnvConfig& config() const { return cfg_; }
    const GridMap& grid() const { return grid_; }
    int robots() const { return cfg_.robots; }
    int subsurfaces() const { return cfg_.irs.subsurfaces; }
    const EnvSnapshot& snapshot() const { return snap_; }
    const std::vector<Cell>& initial_cells() const { return initial_; }
    const std::vector<Cell>& final_cells() const { return final_; }
    const RateReport& last_report() const { return last_report_; }
    int steps_taken() const { return steps_; }
    bool done() const { return done_; }
    const ChannelRealization& current_realization() const { return realization_; }

    long audited_steps() const { return audited_steps_; }
    long hard_violations() const { return hard_violations_; }
    long qos_violation_steps() const { return qos_violation_steps_; }

    /// Sample endpoints, randomize phases and power, compute the initial rates.
    void reset(int episode) {
        Rng ep_rng(mix_seed(cfg_.seed, 0x455044ULL, static_cast<std::uint64_t>(episode)));
        initial_.clear();
        final_.clear();
        poses_.clear();
        for (int r = 0; r < cfg_.robots; ++r) {
            auto [ini, fin] = sample_endpoints(grid_, ep_rng);
            initial_.push_back(ini);
            final_.push_back(fin);
            poses_.push_back(RobotPose{ini, false});
        }

        snap_.phase_idx.assign(static_cast<std::size_t>(subsurfaces()), 0);
        const int levels = 1 << cfg_.phase_bits;
        for (int& idx : snap_.phase_idx) idx = ep_rng.uniform_int(levels);
        sync_snapshot_cells();

        steps_ = 0;
        done_ = cfg_.max_steps == 0;

        const auto physics = evaluate_physics(ep_rng.uniform_int(cfg_.power_levels));
        last_report_ = physics.report;
        snap_.power = physics.powers.p;
        audit(physics);
    }

    /// Apply one action tuple. Arrived robots are forced to stillness; the
    /// episode ends when everyone arrived or the step budget runs out.
    StepInfo step(const std::vector<Move>& moves, const std::vector<int>& phase_idx,
                  int power_choice) {
        if (done_) throw std::logic_error("env: step on a finished episode");
        if (static_cast<int>(moves.size()) != cfg_.robots ||
            static_cast<int>(phase_idx.size()) != subsurfaces())
            throw std::invalid_argument("env: action arity mismatch");

        std::vector<bool> invalid(static_cast<std::size_t>(cfg_.robots), false);
        for (int r = 0; r < cfg_.robots; ++r) {
            const StepOutcome out = step_robot(poses_[r], moves[r], grid_);
            invalid[r] = !out.valid;
            poses_[r] = out.pose;
            if (poses_[r].cell == final_[r]) poses_[r].arrived = true;
        }
        snap_.phase_idx = phase_idx;
        sync_snapshot_cells();

        StepInfo info = evaluate_physics(power_choice);
        info.invalid_move = std::move(invalid);
        snap_.power = info.powers.p;
        last_report_ = info.report;

        ++steps_;
        bool all_arrived = true;
        for (const RobotPose& p : poses_) all_arrived = all_arrived && p.arrived;
        done_ = all_arrived || steps_ >= cfg_.max_steps;
        info.terminal = done_;

        audit(info);
        return info;
    }

private:
    DecodingOrder trivial_order() const {
        DecodingOrder o;
        o.pos.resize(static_cast<std::size_t>(cfg_.robots));
        for (int i = 0; i < cfg_.robots; ++i) o.pos[i] = i + 1;
        return o;
    }

    void sync_snapshot_cells() {
        snap_.cells.clear();
        snap_.arrived.clear();
        for (const RobotPose& p : poses_) {
            snap_.cells.push_back(p.cell);
            snap_.arrived.push_back(p.arrived);
        }
    }

    StepInfo evaluate_physics(int power_choice) {
        if (power_choice < 0 || power_choice >= cfg_.power_levels)
            throw std::out_of_range("env: power candidate index");

        realization_ = cfg_.freeze_channel ? *frozen_ : channel_.at_cells(snap_.cells, grid_);
        phases_ = PhaseState::from_subsurface_indices(snap_.phase_idx, cfg_.phase_bits, cfg_.irs);

        StepInfo info;
        info.effective = effective_channels(realization_, phases_);
        std::vector<double> gains;
        gains.reserve(info.effective.size());
        for (const cplx& h : info.effective) gains.push_back(std::norm(h));
        info.order = decoding_order(gains);

        const auto cands = power_candidates(cfg_.robots, cfg_.power_budget, cfg_.power_levels,
                                            info.order, cfg_.power_order, cfg_.power_steps);
        info.powers = cands[static_cast<std::size_t>(power_choice)];
        info.report = rate_report(info.effective, info.powers, info.order,
                                  cfg_.channel.noise_power, cfg_.qos_rate);
        for (bool ok : info.report.qos_ok)
            if (!ok) ++info.qos_violations;

        FeasibilitySnapshot fs;
        fs.phases = &phases_;
        fs.effective = info.effective;
        fs.order = info.order;
        fs.powers = info.powers;
        fs.rates = info.report.rate;
        fs.qos_rate = cfg_.qos_rate;
        fs.cells = snap_.cells;
        fs.grid = &grid_;
        info.feasibility = check_constraints(fs);
        return info;
    }

    void audit(const StepInfo& info) {
        ++audited_steps_;
        if (!info.feasibility.hard_ok()) ++hard_violations_;
        if (info.qos_violations > 0) ++qos_violation_steps_;
    }

    EnvConfig cfg_;
    GridMap grid_;
    ChannelModel channel_;
    std::optional<ChannelRealization> frozen_;

    std::vector<RobotPose> poses_;
    std::vector<Cell> initial_, final_;
    EnvSnapshot snap_;
    PhaseState phases_;
    ChannelRealization realization_;
    RateReport last_report_;
    int steps_ = 0;
    bool done_ = true;

    long audited_steps_ = 0;
    long hard_violations_ = 0;
    long qos_violation_steps_ = 0;
};

}  // namespace irsim
