#pragma once

#include <vector>

#include "irsim/neural.hpp"
#include "irsim/rng.hpp"

namespace irsim::testsupport {

/// Finite differences are only trustworthy away from rectifier kinks: draw
/// states until every trunk pre-activation clears a margin much wider than the
/// probe step.
inline std::vector<double> margined_state(const DuelingNet& net, Rng& rng,
                                          double margin = 1e-3, int max_tries = 200) {
    const int dim = net.input_dim();
    for (int attempt = 0; attempt < max_tries; ++attempt) {
        std::vector<double> state(static_cast<std::size_t>(dim));
        for (double& v : state) v = rng.normal();

        bool clear = true;
        std::vector<double> x = state;
        for (const Layer& l : net.params().trunk) {
            std::vector<double> y(static_cast<std::size_t>(l.out));
            for (int o = 0; o < l.out && clear; ++o) {
                double acc = l.b[o];
                for (int i = 0; i < l.in; ++i) acc += l.W[static_cast<std::size_t>(o) * l.in + i] * x[i];
                if (std::abs(acc) < margin) clear = false;
                y[o] = std::max(0.0, acc);
            }
            if (!clear) break;
            x = std::move(y);
        }
        if (clear) return state;
    }
    // Fall back to the last draw; in practice the loop terminates early.
    std::vector<double> state(static_cast<std::size_t>(dim));
    for (double& v : state) v = rng.normal();
    return state;
}

inline std::vector<int> random_action(const DuelingNet& net, Rng& rng) {
    std::vector<int> action;
    action.reserve(net.branches().size());
    for (int size : net.branches()) action.push_back(rng.uniform_int(size));
    return action;
}

}  // namespace irsim::testsupport
