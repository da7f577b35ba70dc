#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "irsim/env.hpp"
#include "irsim/neural.hpp"

namespace irsim {

// ---------------------------------------------------------------------------
// State encoding

/// Fixed-width observation: sub-surface phases scaled to [0,1), per-robot cell
/// center coordinates scaled by the room extents, per-robot power fractions.
class StateCodec {
public:
    StateCodec(int subsurfaces, int phase_bits, int robots, double budget, const WorldModel& world)
        : subsurfaces_(subsurfaces), phase_bits_(phase_bits), robots_(robots), budget_(budget),
          room_x_(world.room.x), room_y_(world.room.y), resolution_(world.grid_resolution) {}

    int dimension() const { return subsurfaces_ + 3 * robots_; }

    std::vector<double> encode(const EnvSnapshot& snap) const {
        std::vector<double> e;
        e.reserve(static_cast<std::size_t>(dimension()));
        const int levels = 1 << phase_bits_;
        for (int idx : snap.phase_idx) e.push_back(static_cast<double>(idx) / levels);
        for (const Cell& c : snap.cells) {
            e.push_back(c.i * resolution_ / room_x_);
            e.push_back(c.j * resolution_ / room_y_);
        }
        for (double p : snap.power) e.push_back(p / budget_);
        return e;
    }

    /// Inverse mapping, used for logging and round-trip checks.
    EnvSnapshot decode(const std::vector<double>& e) const {
        if (static_cast<int>(e.size()) != dimension())
            throw std::invalid_argument("state codec: dimension mismatch");
        EnvSnapshot snap;
        const int levels = 1 << phase_bits_;
        std::size_t at = 0;
        for (int m = 0; m < subsurfaces_; ++m)
            snap.phase_idx.push_back(static_cast<int>(std::lround(e[at++] * levels)) % levels);
        for (int r = 0; r < robots_; ++r) {
            const double x = e[at++] * room_x_;
            const double y = e[at++] * room_y_;
            snap.cells.push_back({static_cast<int>(std::lround(x / resolution_)),
                                  static_cast<int>(std::lround(y / resolution_))});
        }
        snap.arrived.assign(static_cast<std::size_t>(robots_), false);
        for (int r = 0; r < robots_; ++r) snap.power.push_back(e[at++] * budget_);
        return snap;
    }

private:
    int subsurfaces_, phase_bits_, robots_;
    double budget_, room_x_, room_y_, resolution_;
};

// ---------------------------------------------------------------------------
// Action space

struct ActionDecoded {
    std::vector<Move> moves;     // one per robot
    std::vector<int> phase_idx;  // one codebook index per sub-surface
    int power_choice = 0;
};

/// Branched layout: one branch of 5 moves per robot, one 2^B0 branch per
/// sub-surface, one v-way power branch. Flat mode enumerates the whole joint
/// product in a single branch (tiny configs only, enables brute-force audits).
struct ActionLayout {
    int robots = 1;
    int subsurfaces = 0;
    int phase_bits = 0;
    int power_levels = 1;
    bool flat = false;
    std::vector<int> branch_sizes;
    long joint_size = 1;

    static ActionLayout branched(int robots, int subsurfaces, int phase_bits, int power_levels) {
        ActionLayout l;
        l.robots = robots;
        l.subsurfaces = subsurfaces;
        l.phase_bits = phase_bits;
        l.power_levels = power_levels;
        l.joint_size = joint(robots, subsurfaces, phase_bits, power_levels);
        for (int r = 0; r < robots; ++r) l.branch_sizes.push_back(kMoveCount);
        for (int m = 0; m < subsurfaces; ++m) l.branch_sizes.push_back(1 << phase_bits);
        l.branch_sizes.push_back(power_levels);
        return l;
    }

    static ActionLayout flat_mode(int robots, int subsurfaces, int phase_bits, int power_levels) {
        ActionLayout l = branched(robots, subsurfaces, phase_bits, power_levels);
        if (l.joint_size > 100000)
            throw std::invalid_argument("action layout: joint space too large for flat mode");
        l.flat = true;
        l.branch_sizes = {static_cast<int>(l.joint_size)};
        return l;
    }

    static long joint(int robots, int subsurfaces, int phase_bits, int power_levels) {
        long j = power_levels;
        for (int r = 0; r < robots; ++r) j *= kMoveCount;
        for (int m = 0; m < subsurfaces; ++m) j *= 1L << phase_bits;
        return j;
    }

    int branches() const { return static_cast<int>(branch_sizes.size()); }

    ActionDecoded decode(const std::vector<int>& choice) const {
        if (static_cast<int>(choice.size()) != branches())
            throw std::invalid_argument("action layout: tuple arity mismatch");
        ActionDecoded out;
        if (flat) {
            long rem = choice[0];
            out.power_choice = static_cast<int>(rem % power_levels);
            rem /= power_levels;
            const long levels = 1L << phase_bits;
            out.phase_idx.assign(static_cast<std::size_t>(subsurfaces), 0);
            for (int m = subsurfaces - 1; m >= 0; --m) {
                out.phase_idx[m] = static_cast<int>(rem % levels);
                rem /= levels;
            }
            out.moves.assign(static_cast<std::size_t>(robots), Move::Still);
            for (int r = robots - 1; r >= 0; --r) {
                out.moves[r] = static_cast<Move>(rem % kMoveCount);
                rem /= kMoveCount;
            }
            return out;
        }
        for (int r = 0; r < robots; ++r) out.moves.push_back(static_cast<Move>(choice[r]));
        for (int m = 0; m < subsurfaces; ++m) out.phase_idx.push_back(choice[robots + m]);
        out.power_choice = choice.back();
        return out;
    }

    std::vector<int> encode(const ActionDecoded& a) const {
        if (flat) {
            long code = 0;
            for (int r = 0; r < robots; ++r)
                code = code * kMoveCount + static_cast<int>(a.moves[r]);
            for (int m = 0; m < subsurfaces; ++m)
                code = code * (1L << phase_bits) + a.phase_idx[m];
            code = code * power_levels + a.power_choice;
            return {static_cast<int>(code)};
        }
        std::vector<int> choice;
        for (Move m : a.moves) choice.push_back(static_cast<int>(m));
        for (int idx : a.phase_idx) choice.push_back(idx);
        choice.push_back(a.power_choice);
        return choice;
    }
};

/// Per-branch epsilon-greedy: each branch flips its own coin, drawing uniform
/// on explore and the branch argmax (lowest index wins ties) otherwise.
/// Exploration then perturbs one decision component at a time more often than
/// the whole tuple, which keeps credit assignment across branches workable.
inline std::vector<int> select_action(const std::vector<double>& q,
                                      const std::vector<int>& branch_sizes, double eps, Rng& rng) {
    std::vector<int> choice(branch_sizes.size(), 0);
    int off = 0;
    for (std::size_t b = 0; b < branch_sizes.size(); ++b) {
        if (eps > 0.0 && rng.uniform() < eps) {
            choice[b] = rng.uniform_int(branch_sizes[b]);
        } else {
            int best = 0;
            for (int a = 1; a < branch_sizes[b]; ++a)
                if (q[off + a] > q[off + best]) best = a;
            choice[b] = best;
        }
        off += branch_sizes[b];
    }
    return choice;
}

// ---------------------------------------------------------------------------
// Reward

struct RewardConfig {
    double scale = 1000.0;
    double qos_penalty = 0.0;           // zero keeps the reward paper-faithful
    double invalid_move_penalty = 0.0;  // likewise
};

inline double compute_reward(const std::vector<double>& prev_rates,
                             const std::vector<double>& cur_rates,
                             const std::vector<bool>& qos_ok,
                             const std::vector<bool>& invalid_move, const RewardConfig& cfg) {
    if (prev_rates.size() != cur_rates.size())
        throw std::invalid_argument("reward: rate list length mismatch");
    double diff = 0.0;
    for (std::size_t i = 0; i < cur_rates.size(); ++i) diff += cur_rates[i] - prev_rates[i];
    int violations = 0;
    for (bool ok : qos_ok)
        if (!ok) ++violations;
    int invalid = 0;
    for (bool bad : invalid_move)
        if (bad) ++invalid;
    return cfg.scale * diff - cfg.qos_penalty * violations - cfg.invalid_move_penalty * invalid;
}

// ---------------------------------------------------------------------------
// Replay memory

struct Transition {
    std::vector<double> state;
    std::vector<int> action;
    double reward = 0.0;
    std::vector<double> next_state;
    bool terminal = false;
};

class ReplayMemory {
public:
    explicit ReplayMemory(std::size_t capacity) : capacity_(capacity) {}

    std::size_t size() const { return buffer_.size(); }
    std::size_t capacity() const { return capacity_; }

    void push(Transition t) {
        if (buffer_.size() < capacity_) {
            buffer_.push_back(std::move(t));
        } else {
            buffer_[write_] = std::move(t);
        }
        write_ = (write_ + 1) % capacity_;
    }

    /// Uniform sample without replacement within the minibatch.
    std::vector<const Transition*> sample(std::size_t n, Rng& rng) const {
        if (n > buffer_.size()) throw std::invalid_argument("replay: sample larger than memory");
        std::vector<std::size_t> idx(buffer_.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        std::vector<const Transition*> out;
        out.reserve(n);
        for (std::size_t k = 0; k < n; ++k) {
            const std::size_t pick =
                k + static_cast<std::size_t>(rng.uniform_int(static_cast<int>(idx.size() - k)));
            std::swap(idx[k], idx[pick]);
            out.push_back(&buffer_[idx[k]]);
        }
        return out;
    }

private:
    std::size_t capacity_;
    std::size_t write_ = 0;
    std::vector<Transition> buffer_;
};

// ---------------------------------------------------------------------------
// Q-learning variants and targets

enum class Variant { D3qn, DoubleOnly, DuelingOnly };

inline const char* variant_name(Variant v) {
    switch (v) {
        case Variant::D3qn: return "d3qn";
        case Variant::DoubleOnly: return "double";
        default: return "dueling";
    }
}

/// Bootstrapped target: terminal transitions collapse to the reward; the
/// greedy action comes from the online net for the double variants and from
/// the target net for dueling-only.
inline double td_target(const Transition& t, const DuelingNet& online, const DuelingNet& target,
                        double discount, Variant variant) {
    if (t.terminal) return t.reward;
    const ForwardPass tf = target.forward(t.next_state);
    std::vector<int> greedy;
    if (variant == Variant::DuelingOnly) {
        greedy = target.greedy_action(tf);
    } else {
        greedy = online.greedy_action(online.forward(t.next_state));
    }
    return t.reward + discount * target.joint_q(tf, greedy);
}

struct AgentConfig {
    double discount = 0.95;       // eta
    double learning_rate = 1e-3;  // eta0
    double eps_start = 1.0;
    double eps_end = 0.05;
    double eps_decay = 0.995;     // multiplicative, per episode
    int target_sync_period = 200; // C, environment steps
    int replay_capacity = 100000;
    int minibatch = 64;           // N-bar
    int train_every = 1;          // environment steps between updates
    double td_clip = 0.0;         // clip |Q - W| in updates; 0 disables
    std::vector<int> hidden{128, 128};
    RewardConfig reward;
    Variant variant = Variant::D3qn;
    bool flat_actions = false;

    void validate() const {
        if (discount < 0.0 || discount >= 1.0)
            throw std::invalid_argument("agent: discount must lie in [0, 1)");
        if (learning_rate <= 0) throw std::invalid_argument("agent: learning rate must be positive");
        if (replay_capacity < 1 || minibatch < 1 || train_every < 1 || target_sync_period < 1)
            throw std::invalid_argument("agent: counters must be positive");
        if (eps_start < 0 || eps_start > 1 || eps_end < 0 || eps_end > eps_start ||
            eps_decay <= 0 || eps_decay > 1)
            throw std::invalid_argument("agent: epsilon schedule out of range");
    }
};

struct TrainStats {
    bool trained = false;
    double mean_loss = 0.0;
};

/// Online/target net pair plus replay memory; one instance per training run.
class DqnAgent {
public:
    DqnAgent(const ActionLayout& layout, int state_dim, const AgentConfig& cfg, std::uint64_t seed)
        : layout_(layout), cfg_(cfg), memory_(static_cast<std::size_t>(cfg.replay_capacity)),
          act_rng_(mix_seed(seed, 0x414354ULL)), replay_rng_(mix_seed(seed, 0x52504cULL)) {
        cfg_.validate();
        Rng init_rng(mix_seed(seed, 0x4e4554ULL));
        const HeadMode mode =
            cfg.variant == Variant::DoubleOnly ? HeadMode::Single : HeadMode::Dueling;
        online_ = DuelingNet(state_dim, cfg.hidden, layout.branch_sizes, mode, init_rng);
        target_ = clone_into_target(online_);
    }

    const ActionLayout& layout() const { return layout_; }
    const AgentConfig& config() const { return cfg_; }
    DuelingNet& online() { return online_; }
    const DuelingNet& online() const { return online_; }
    const DuelingNet& target() const { return target_; }

    /// Swap in checkpointed parameters (both nets).
    void load_online(DuelingNet net) {
        if (net.input_dim() != online_.input_dim() || net.branches() != online_.branches())
            throw std::invalid_argument("agent: checkpoint shape mismatch");
        online_ = std::move(net);
        target_ = clone_into_target(online_);
    }
    ReplayMemory& memory() { return memory_; }
    long skipped_train_steps() const { return skipped_; }
    long global_steps() const { return global_steps_; }

    double epsilon(int episode) const {
        double eps = cfg_.eps_start;
        for (int e = 0; e < episode; ++e) eps *= cfg_.eps_decay;
        return std::max(cfg_.eps_end, eps);
    }

    std::vector<int> act(const std::vector<double>& state, double eps) {
        const ForwardPass f = online_.forward(state);
        return select_action(f.q, layout_.branch_sizes, eps, act_rng_);
    }

    void remember(Transition t) { memory_.push(std::move(t)); }

    /// Ticks the environment-step counter and syncs the target every C steps.
    void on_env_step() {
        ++global_steps_;
        if (global_steps_ % cfg_.target_sync_period == 0) target_ = clone_into_target(online_);
    }

    TrainStats train_step() {
        TrainStats stats;
        if (memory_.size() < static_cast<std::size_t>(cfg_.minibatch)) {
            ++skipped_;
            return stats;
        }
        const auto batch = memory_.sample(static_cast<std::size_t>(cfg_.minibatch), replay_rng_);
        GradientSet grads = online_.shaped_zeros();
        double loss = 0.0;
        for (const Transition* t : batch) {
            const double w = td_target(*t, online_, target_, cfg_.discount, cfg_.variant);
            const ForwardPass f = online_.forward(t->state);
            const double q = online_.joint_q(f, t->action);
            loss += 0.5 * (w - q) * (w - q);
            double delta = q - w;
            // Bounding the error keeps bootstrapped updates from blowing up
            // under the x1000 reward scale.
            if (cfg_.td_clip > 0.0)
                delta = std::clamp(delta, -cfg_.td_clip, cfg_.td_clip);
            online_.accumulate_backward(f, t->action, delta, grads);
        }
        online_.sgd_step(grads, cfg_.learning_rate / cfg_.minibatch);
        stats.trained = true;
        stats.mean_loss = loss / cfg_.minibatch;
        return stats;
    }

private:
    ActionLayout layout_;
    AgentConfig cfg_;
    DuelingNet online_;
    DuelingNet target_;
    ReplayMemory memory_;
    Rng act_rng_;
    Rng replay_rng_;
    long global_steps_ = 0;
    long skipped_ = 0;
};

// ---------------------------------------------------------------------------
// Episode loop

struct EpisodeStats {
    double cumulative_reward = 0.0;
    int steps = 0;
    double mean_sum_rate = 0.0;
    std::vector<double> step_sum_rates;
    std::vector<double> step_oma_rates;
    std::vector<Trajectory> trajectories;
    std::vector<StepInfo> step_details;  // filled only when keep_details is set
};

struct EpisodeOptions {
    double epsilon = 0.0;
    bool training = false;
    bool keep_details = false;
};

inline EpisodeStats run_episode(Environment& env, DqnAgent& agent, int episode,
                                const EpisodeOptions& opt) {
    const StateCodec codec(env.subsurfaces(), env.config().phase_bits, env.robots(),
                           env.config().power_budget, env.config().world);
    env.reset(episode);

    EpisodeStats stats;
    stats.trajectories.resize(static_cast<std::size_t>(env.robots()));
    const double step_seconds = env.config().world.grid_resolution / env.config().world.robot_velocity;
    for (int r = 0; r < env.robots(); ++r) {
        stats.trajectories[r].seconds_per_step = step_seconds;
        stats.trajectories[r].append(env.snapshot().cells[r]);
    }

    std::vector<double> prev_rates = env.last_report().rate;
    while (!env.done()) {
        const std::vector<double> state = codec.encode(env.snapshot());
        const std::vector<int> choice = agent.act(state, opt.epsilon);
        const ActionDecoded action = agent.layout().decode(choice);

        const StepInfo info = env.step(action.moves, action.phase_idx, action.power_choice);
        const double reward = compute_reward(prev_rates, info.report.rate, info.report.qos_ok,
                                             info.invalid_move, agent.config().reward);
        prev_rates = info.report.rate;

        for (int r = 0; r < env.robots(); ++r)
            stats.trajectories[r].append(env.snapshot().cells[r]);
        stats.cumulative_reward += reward;
        stats.step_sum_rates.push_back(info.report.sum);
        stats.step_oma_rates.push_back(oma_sum_rate(info.effective, env.config().power_budget,
                                                    env.config().channel.noise_power));
        if (opt.keep_details) stats.step_details.push_back(info);
        ++stats.steps;

        if (opt.training) {
            agent.remember(Transition{state, choice, reward, codec.encode(env.snapshot()),
                                      info.terminal});
            if (agent.global_steps() % agent.config().train_every == 0) agent.train_step();
        }
        agent.on_env_step();
    }

    if (stats.steps > 0) {
        double acc = 0.0;
        for (double r : stats.step_sum_rates) acc += r;
        stats.mean_sum_rate = acc / stats.steps;
    }
    return stats;
}

// ---------------------------------------------------------------------------
// Convergence detection

/// First episode (1-based count) from which the trailing moving average stays
/// within 5% of the final-stretch mean. Returns nullopt when the curve never
/// settles.
inline std::optional<int> detect_convergence(const std::vector<double>& rewards, int window = 50,
                                             double band_fraction = 0.05, int final_stretch = 1000) {
    const int n = static_cast<int>(rewards.size());
    if (n < window || window < 1) return std::nullopt;

    const int tail = std::min(final_stretch, n);
    double final_mean = 0.0;
    for (int e = n - tail; e < n; ++e) final_mean += rewards[e];
    final_mean /= tail;
    const double band = band_fraction * std::abs(final_mean);

    std::vector<double> ma(static_cast<std::size_t>(n) + 1, 0.0);
    double acc = 0.0;
    for (int e = 0; e < n; ++e) {
        acc += rewards[e];
        if (e >= window) acc -= rewards[e - window];
        ma[e + 1] = acc / window;
    }

    // Strict comparison: a zero-width band (final mean zero) never matches, so
    // an oscillating curve around zero is not declared converged.
    int candidate = -1;
    for (int e = window; e <= n; ++e) {
        if (std::abs(ma[e] - final_mean) < band) {
            if (candidate < 0) candidate = e;
        } else {
            candidate = -1;
        }
    }
    if (candidate < 0) return std::nullopt;
    return candidate;
}

}  // namespace irsim
