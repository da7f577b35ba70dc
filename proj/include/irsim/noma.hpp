#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "irsim/channel.hpp"
#include "irsim/world.hpp"

namespace irsim {

struct PowerAllocation {
    std::vector<double> p;  // watts per robot
    double budget = 0.0;    // total transmit power P

    double total() const { return std::accumulate(p.begin(), p.end(), 0.0); }
};

/// O(i) is robot i's decoding position, 1-based. Larger O means a stronger
/// effective channel: the weakest-gain robot is decoded first.
struct DecodingOrder {
    std::vector<int> pos;

    int of(int robot) const { return pos[static_cast<std::size_t>(robot)]; }
    int size() const { return static_cast<int>(pos.size()); }

    bool is_permutation() const {
        std::vector<int> seen(pos.size(), 0);
        for (int o : pos) {
            if (o < 1 || o > size() || seen[o - 1]++) return false;
        }
        return true;
    }
};

/// Ascending sort of gains; ties resolved toward the lower robot index.
inline DecodingOrder decoding_order(const std::vector<double>& gains) {
    const int n = static_cast<int>(gains.size());
    if (n < 1) throw std::invalid_argument("decoding_order: need at least one robot");
    std::vector<int> by_gain(n);
    std::iota(by_gain.begin(), by_gain.end(), 0);
    std::stable_sort(by_gain.begin(), by_gain.end(),
                     [&](int a, int b) { return gains[a] < gains[b]; });
    DecodingOrder order;
    order.pos.resize(n);
    for (int rank = 0; rank < n; ++rank) order.pos[by_gain[rank]] = rank + 1;
    return order;
}

/// SINR of robot i: own received power over the residual from robots decoded
/// later plus noise.
inline double sinr(int i, const std::vector<cplx>& effective, const PowerAllocation& powers,
                   const DecodingOrder& order, double noise) {
    if (noise <= 0) throw std::invalid_argument("sinr: noise power must be positive");
    const int n = static_cast<int>(effective.size());
    if (order.size() != n || static_cast<int>(powers.p.size()) != n)
        throw std::invalid_argument("sinr: dimension mismatch");
    double interference = 0.0;
    for (int j = 0; j < n; ++j)
        if (order.of(j) > order.of(i)) interference += std::norm(effective[j]) * powers.p[j];
    return std::norm(effective[i]) * powers.p[i] / (interference + noise);
}

inline double rate(int i, const std::vector<cplx>& effective, const PowerAllocation& powers,
                   const DecodingOrder& order, double noise) {
    return std::log2(1.0 + sinr(i, effective, powers, order, noise));
}

inline double sum_rate(const std::vector<cplx>& effective, const PowerAllocation& powers,
                       const DecodingOrder& order, double noise) {
    double acc = 0.0;
    for (int i = 0; i < static_cast<int>(effective.size()); ++i)
        acc += rate(i, effective, powers, order, noise);
    return acc;
}

struct RateReport {
    std::vector<double> sinr;
    std::vector<double> rate;
    std::vector<bool> qos_ok;
    double sum = 0.0;
};

inline RateReport rate_report(const std::vector<cplx>& effective, const PowerAllocation& powers,
                              const DecodingOrder& order, double noise, double qos_rate) {
    RateReport rep;
    const int n = static_cast<int>(effective.size());
    rep.sinr.resize(n);
    rep.rate.resize(n);
    rep.qos_ok.resize(n);
    for (int i = 0; i < n; ++i) {
        rep.sinr[i] = sinr(i, effective, powers, order, noise);
        rep.rate[i] = std::log2(1.0 + rep.sinr[i]);
        rep.qos_ok[i] = rep.rate[i] >= qos_rate;
        rep.sum += rep.rate[i];
    }
    return rep;
}

/// Everything a constraint audit needs for one timeslot.
struct FeasibilitySnapshot {
    const PhaseState* phases = nullptr;
    std::vector<cplx> effective;
    DecodingOrder order;
    PowerAllocation powers;
    std::vector<double> rates;
    double qos_rate = 0.0;
    std::vector<Cell> cells;
    const GridMap* grid = nullptr;
};

struct ConstraintCheck {
    bool ok = true;
    double slack = 0.0;  // negative when violated
};

struct FeasibilityReport {
    ConstraintCheck qos;          // (8a) R_i >= R_bar
    ConstraintCheck unit_modulus; // (8b) |phasor| = 1
    ConstraintCheck gain_order;   // (8c) O ascending in |H|^2 (ties allowed)
    ConstraintCheck power_budget; // (8e) sum p_i <= P
    ConstraintCheck trajectory;   // (8f) robots on free cells

    bool all_ok() const {
        return qos.ok && unit_modulus.ok && gain_order.ok && power_budget.ok && trajectory.ok;
    }
    /// Everything except QoS, which training enforces only softly.
    bool hard_ok() const {
        return unit_modulus.ok && gain_order.ok && power_budget.ok && trajectory.ok;
    }
};

inline FeasibilityReport check_constraints(const FeasibilitySnapshot& snap) {
    FeasibilityReport rep;

    double min_rate_slack = std::numeric_limits<double>::infinity();
    for (double r : snap.rates) min_rate_slack = std::min(min_rate_slack, r - snap.qos_rate);
    rep.qos.slack = snap.rates.empty() ? 0.0 : min_rate_slack;
    rep.qos.ok = rep.qos.slack >= 0.0;

    // Unit modulus holds by construction of PhaseState; report measured slack.
    double worst_mod = 0.0;
    if (snap.phases) {
        for (int k = 0; k < snap.phases->size(); ++k)
            worst_mod = std::max(worst_mod, std::abs(std::abs(snap.phases->phasor(k)) - 1.0));
    }
    rep.unit_modulus.slack = -worst_mod;
    rep.unit_modulus.ok = worst_mod <= 1e-12;

    const int n = static_cast<int>(snap.effective.size());
    rep.gain_order.ok = snap.order.is_permutation() && snap.order.size() == n;
    double min_gap = std::numeric_limits<double>::infinity();
    if (rep.gain_order.ok) {
        std::vector<double> gain_at_pos(n, 0.0);
        for (int i = 0; i < n; ++i) gain_at_pos[snap.order.of(i) - 1] = std::norm(snap.effective[i]);
        for (int k = 1; k < n; ++k) min_gap = std::min(min_gap, gain_at_pos[k] - gain_at_pos[k - 1]);
        if (n > 1 && min_gap < 0.0) rep.gain_order.ok = false;
    }
    rep.gain_order.slack = (n > 1 && std::isfinite(min_gap)) ? min_gap : 0.0;

    // Budget check tolerates accumulated rounding in the quantized simplex.
    const double used = snap.powers.total();
    rep.power_budget.slack = snap.powers.budget - used;
    rep.power_budget.ok = used <= snap.powers.budget * (1.0 + 1e-12);

    int off_grid = 0;
    if (snap.grid) {
        for (const Cell& c : snap.cells)
            if (!snap.grid->free_cell(c)) ++off_grid;
    }
    rep.trajectory.slack = -static_cast<double>(off_grid);
    rep.trajectory.ok = off_grid == 0;

    return rep;
}

enum class PowerOrderMode {
    AsPaper,       // later-decoded (stronger) robots get at least as much power
    Conventional,  // weaker robots get at least as much power
};

namespace detail {

/// Positive integer compositions m_1 <= m_2 <= ... <= m_n with sum = steps,
/// lexicographic order.
inline void ascending_compositions(int n, int steps, std::vector<int>& cur,
                                   std::vector<std::vector<int>>& out) {
    if (static_cast<int>(cur.size()) == n - 1) {
        const int last = steps - std::accumulate(cur.begin(), cur.end(), 0);
        if (last >= (cur.empty() ? 1 : cur.back())) {
            cur.push_back(last);
            out.push_back(cur);
            cur.pop_back();
        }
        return;
    }
    const int lo = cur.empty() ? 1 : cur.back();
    const int used = std::accumulate(cur.begin(), cur.end(), 0);
    const int remaining_slots = n - static_cast<int>(cur.size());
    for (int m = lo; m * remaining_slots + used <= steps; ++m) {
        cur.push_back(m);
        ascending_compositions(n, steps, cur, out);
        cur.pop_back();
    }
}

}  // namespace detail

/// Candidate power allocations on the quantized simplex sum(p) = P with
/// step P/steps, each robot strictly positive, respecting the ordering rule.
/// Returns min(v, feasible) allocations; fewer than v means the quantized set
/// ran out. v == 1 picks the allocation closest to an equal split.
inline std::vector<PowerAllocation> power_candidates(int n, double budget, int v,
                                                     const DecodingOrder& order,
                                                     PowerOrderMode mode = PowerOrderMode::AsPaper,
                                                     int steps = 0) {
    if (n < 1 || v < 1) throw std::invalid_argument("power_candidates: n and v must be positive");
    if (budget <= 0) throw std::invalid_argument("power_candidates: budget must be positive");
    if (steps <= 0) steps = std::max(n, 2 * v);

    std::vector<std::vector<int>> sorted_shares;
    std::vector<int> cur;
    detail::ascending_compositions(n, steps, cur, sorted_shares);

    // Rank robots by decoding position; AsPaper hands the largest share to the
    // latest-decoded robot, Conventional reverses that.
    std::vector<int> robot_at_pos(n);
    for (int i = 0; i < n; ++i) robot_at_pos[order.of(i) - 1] = i;

    std::vector<PowerAllocation> all;
    all.reserve(sorted_shares.size());
    for (const auto& shares : sorted_shares) {
        PowerAllocation alloc;
        alloc.budget = budget;
        alloc.p.resize(n);
        for (int posn = 0; posn < n; ++posn) {
            const int share = (mode == PowerOrderMode::AsPaper) ? shares[posn]
                                                                : shares[n - 1 - posn];
            alloc.p[robot_at_pos[posn]] = budget * share / steps;
        }
        all.push_back(std::move(alloc));
    }

    if (static_cast<int>(all.size()) <= v && v > 1) return all;

    if (v == 1) {
        const double even = budget / n;
        std::size_t best = 0;
        double best_dist = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < all.size(); ++c) {
            double dist = 0.0;
            for (double pw : all[c].p) dist += (pw - even) * (pw - even);
            if (dist < best_dist) {
                best_dist = dist;
                best = c;
            }
        }
        return {all[best]};
    }

    // Evenly spaced picks across the enumeration, endpoints included.
    std::vector<PowerAllocation> out;
    out.reserve(static_cast<std::size_t>(v));
    const std::size_t last = all.size() - 1;
    for (int t = 0; t < v; ++t) {
        const std::size_t idx =
            static_cast<std::size_t>(std::llround(static_cast<double>(t) * last / (v - 1)));
        out.push_back(all[idx]);
    }
    return out;
}

/// TDMA benchmark: each robot gets a 1/N share of the slot at full power.
inline double oma_sum_rate(const std::vector<cplx>& effective, double budget, double noise) {
    const int n = static_cast<int>(effective.size());
    if (n < 1) throw std::invalid_argument("oma_sum_rate: need at least one robot");
    double acc = 0.0;
    for (const cplx& h : effective)
        acc += std::log2(1.0 + std::norm(h) * budget / noise) / n;
    return acc;
}

}  // namespace irsim
