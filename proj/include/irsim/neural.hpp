#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "irsim/rng.hpp"

namespace irsim {

/// Dense layer, weights row-major (out x in).
struct Layer {
    int in = 0;
    int out = 0;
    bool relu = false;
    std::vector<double> W;
    std::vector<double> b;

    void init(Rng& rng) {
        W.resize(static_cast<std::size_t>(in) * out);
        b.assign(static_cast<std::size_t>(out), 0.0);
        const double bound = 1.0 / std::sqrt(static_cast<double>(in));
        for (double& w : W) w = (rng.uniform() * 2.0 - 1.0) * bound;
    }

    void zero() {
        W.assign(static_cast<std::size_t>(in) * out, 0.0);
        b.assign(static_cast<std::size_t>(out), 0.0);
    }

    std::vector<double> apply(const std::vector<double>& x) const {
        std::vector<double> y(static_cast<std::size_t>(out));
        for (int o = 0; o < out; ++o) {
            double acc = b[o];
            const double* row = W.data() + static_cast<std::size_t>(o) * in;
            for (int i = 0; i < in; ++i) acc += row[i] * x[i];
            y[o] = relu ? std::max(0.0, acc) : acc;
        }
        return y;
    }
};

/// Parameter bundle; gradients reuse the same shapes.
struct NetParams {
    std::vector<Layer> trunk;  // shared feature layers
    Layer value;               // scalar state value stream
    Layer advantage;           // one output per action across all branches

    void zero() {
        for (Layer& l : trunk) l.zero();
        value.zero();
        advantage.zero();
    }

    template <typename Fn>
    void for_each(Fn&& fn) {
        for (Layer& l : trunk) {
            for (double& w : l.W) fn(w);
            for (double& v : l.b) fn(v);
        }
        for (double& w : value.W) fn(w);
        for (double& v : value.b) fn(v);
        for (double& w : advantage.W) fn(w);
        for (double& v : advantage.b) fn(v);
    }

    template <typename Fn>
    void for_each(Fn&& fn) const {
        for (const Layer& l : trunk) {
            for (double w : l.W) fn(w);
            for (double v : l.b) fn(v);
        }
        for (double w : value.W) fn(w);
        for (double v : value.b) fn(v);
        for (double w : advantage.W) fn(w);
        for (double v : advantage.b) fn(v);
    }

    std::vector<double*> param_ptrs() {
        std::vector<double*> out;
        for_each([&out](double& w) { out.push_back(&w); });
        return out;
    }

    std::size_t param_count() {
        std::size_t n = 0;
        for_each([&n](double&) { ++n; });
        return n;
    }
};

using GradientSet = NetParams;

enum class HeadMode {
    Dueling,  // Q = V + (A - mean A) per branch
    Single,   // Q = raw head outputs, no value stream
};

struct ForwardPass {
    std::vector<std::vector<double>> acts;  // acts[0] = input, then trunk outputs
    double value = 0.0;
    std::vector<double> adv;  // raw head outputs
    std::vector<double> q;    // per-action Q values, branch-concatenated
};

/// Q-network over a branched action space: a shared rectifier trunk, a scalar
/// value stream and one advantage entry per action. Every branch is
/// mean-centered before the value is added back, so the advantages stay
/// identifiable.
class DuelingNet {
public:
    DuelingNet() = default;

    DuelingNet(int input_dim, std::vector<int> hidden, std::vector<int> branch_sizes,
               HeadMode mode, Rng& rng)
        : mode_(mode), input_dim_(input_dim), branches_(std::move(branch_sizes)) {
        if (input_dim < 1) throw std::invalid_argument("net: input dimension must be positive");
        if (branches_.empty()) throw std::invalid_argument("net: need at least one branch");
        offsets_.resize(branches_.size());
        int total = 0;
        for (std::size_t b = 0; b < branches_.size(); ++b) {
            if (branches_[b] < 1) throw std::invalid_argument("net: branch sizes must be positive");
            offsets_[b] = total;
            total += branches_[b];
        }

        int width = input_dim;
        for (int h : hidden) {
            Layer l;
            l.in = width;
            l.out = h;
            l.relu = true;
            l.init(rng);
            params_.trunk.push_back(std::move(l));
            width = h;
        }
        params_.value = Layer{width, 1, false, {}, {}};
        params_.value.init(rng);
        params_.advantage = Layer{width, total, false, {}, {}};
        params_.advantage.init(rng);
    }

    HeadMode mode() const { return mode_; }
    int input_dim() const { return input_dim_; }
    const std::vector<int>& branches() const { return branches_; }
    int branch_offset(int b) const { return offsets_[static_cast<std::size_t>(b)]; }
    int total_actions() const { return offsets_.back() + branches_.back(); }
    NetParams& params() { return params_; }
    const NetParams& params() const { return params_; }

    ForwardPass forward(const std::vector<double>& state) const {
        if (static_cast<int>(state.size()) != input_dim_)
            throw std::invalid_argument("net: state dimension mismatch");
        for (double v : state)
            if (!std::isfinite(v)) throw std::invalid_argument("net: non-finite state input");

        ForwardPass f;
        f.acts.push_back(state);
        for (const Layer& l : params_.trunk) f.acts.push_back(l.apply(f.acts.back()));
        f.adv = params_.advantage.apply(f.acts.back());
        f.value = (mode_ == HeadMode::Dueling) ? params_.value.apply(f.acts.back())[0] : 0.0;

        f.q.resize(f.adv.size());
        for (std::size_t b = 0; b < branches_.size(); ++b) {
            const int off = offsets_[b];
            const int size = branches_[b];
            if (mode_ == HeadMode::Dueling) {
                double mean = 0.0;
                for (int a = 0; a < size; ++a) mean += f.adv[off + a];
                mean /= size;
                for (int a = 0; a < size; ++a) f.q[off + a] = f.value + f.adv[off + a] - mean;
            } else {
                for (int a = 0; a < size; ++a) f.q[off + a] = f.adv[off + a];
            }
        }
        return f;
    }

    /// Q of a full action tuple: the value stream once plus each chosen
    /// branch's centered advantage.
    double joint_q(const ForwardPass& f, const std::vector<int>& action) const {
        check_action(action);
        double q = (mode_ == HeadMode::Dueling) ? f.value : 0.0;
        for (std::size_t b = 0; b < branches_.size(); ++b) {
            const int off = offsets_[b];
            if (mode_ == HeadMode::Dueling)
                q += f.q[off + action[b]] - f.value;
            else
                q += f.adv[off + action[b]];
        }
        return q;
    }

    std::vector<int> greedy_action(const ForwardPass& f) const {
        std::vector<int> action(branches_.size(), 0);
        for (std::size_t b = 0; b < branches_.size(); ++b) {
            const int off = offsets_[b];
            int best = 0;
            for (int a = 1; a < branches_[b]; ++a)
                if (f.q[off + a] > f.q[off + best]) best = a;
            action[b] = best;
        }
        return action;
    }

    /// Gradients of 0.5 * (target - Q(state, action))^2 over every parameter.
    GradientSet backward(const ForwardPass& f, const std::vector<int>& action,
                         double target) const {
        check_action(action);
        GradientSet g = shaped_zeros();
        const double dq = joint_q(f, action) - target;  // dL/dQ
        accumulate_backward(f, action, dq, g);
        return g;
    }

    /// Same backward pass accumulating into an existing gradient set (for
    /// minibatch averaging); dq = dL/dQ for this sample.
    void accumulate_backward(const ForwardPass& f, const std::vector<int>& action, double dq,
                             GradientSet& g) const {
        const std::vector<double>& feat = f.acts.back();
        const int width = static_cast<int>(feat.size());

        std::vector<double> dfeat(static_cast<std::size_t>(width), 0.0);

        if (mode_ == HeadMode::Dueling) {
            // d(joint Q)/dV = 1, the value stream is counted once.
            g.value.b[0] += dq;
            for (int i = 0; i < width; ++i) g.value.W[i] += dq * feat[i];
            for (int i = 0; i < width; ++i) dfeat[i] += dq * params_.value.W[i];
        }

        for (std::size_t b = 0; b < branches_.size(); ++b) {
            const int off = offsets_[b];
            const int size = branches_[b];
            for (int a = 0; a < size; ++a) {
                double dadv = (a == action[b]) ? 1.0 : 0.0;
                if (mode_ == HeadMode::Dueling) dadv -= 1.0 / size;
                if (dadv == 0.0) continue;
                const double scaled = dq * dadv;
                const int row = off + a;
                g.advantage.b[row] += scaled;
                double* gw = g.advantage.W.data() + static_cast<std::size_t>(row) * width;
                const double* aw = params_.advantage.W.data() + static_cast<std::size_t>(row) * width;
                for (int i = 0; i < width; ++i) {
                    gw[i] += scaled * feat[i];
                    dfeat[i] += scaled * aw[i];
                }
            }
        }

        // Through the trunk.
        std::vector<double> delta = std::move(dfeat);
        for (int l = static_cast<int>(params_.trunk.size()) - 1; l >= 0; --l) {
            const Layer& layer = params_.trunk[static_cast<std::size_t>(l)];
            Layer& grad = g.trunk[static_cast<std::size_t>(l)];
            const std::vector<double>& x = f.acts[static_cast<std::size_t>(l)];
            const std::vector<double>& y = f.acts[static_cast<std::size_t>(l) + 1];
            std::vector<double> dx(static_cast<std::size_t>(layer.in), 0.0);
            for (int o = 0; o < layer.out; ++o) {
                if (layer.relu && y[o] <= 0.0) continue;  // dead rectifier
                const double d = delta[o];
                if (d == 0.0) continue;
                grad.b[o] += d;
                double* gw = grad.W.data() + static_cast<std::size_t>(o) * layer.in;
                const double* w = layer.W.data() + static_cast<std::size_t>(o) * layer.in;
                for (int i = 0; i < layer.in; ++i) {
                    gw[i] += d * x[i];
                    dx[i] += d * w[i];
                }
            }
            delta = std::move(dx);
        }
    }

    GradientSet shaped_zeros() const {
        GradientSet g = params_;
        g.zero();
        return g;
    }

    void sgd_step(const GradientSet& g, double lr) {
        axpy(params_, g, -lr);
    }

    void check_action(const std::vector<int>& action) const {
        if (action.size() != branches_.size())
            throw std::invalid_argument("net: action tuple arity mismatch");
        for (std::size_t b = 0; b < branches_.size(); ++b)
            if (action[b] < 0 || action[b] >= branches_[b])
                throw std::out_of_range("net: action index out of branch range");
    }

    void save(std::ostream& os) const {
        os << "irsim-net 1\n";
        os << static_cast<int>(mode_) << ' ' << input_dim_ << ' ' << params_.trunk.size() << ' '
           << branches_.size() << '\n';
        for (const Layer& l : params_.trunk) os << l.out << ' ';
        os << '\n';
        for (int b : branches_) os << b << ' ';
        os << '\n';
        char buf[64];
        params_.for_each([&](double w) {
            std::snprintf(buf, sizeof buf, "%a\n", w);
            os << buf;
        });
    }

    static DuelingNet load(std::istream& is) {
        std::string magic, version;
        is >> magic >> version;
        if (magic != "irsim-net") throw std::runtime_error("checkpoint: bad magic");
        int mode, input_dim;
        std::size_t n_trunk, n_branches;
        is >> mode >> input_dim >> n_trunk >> n_branches;
        std::vector<int> hidden(n_trunk);
        for (auto& h : hidden) is >> h;
        std::vector<int> branches(n_branches);
        for (auto& b : branches) is >> b;
        Rng rng(0);
        DuelingNet net(input_dim, hidden, branches, static_cast<HeadMode>(mode), rng);
        net.params_.for_each([&is](double& w) {
            std::string tok;
            is >> tok;
            w = std::strtod(tok.c_str(), nullptr);
        });
        if (!is) throw std::runtime_error("checkpoint: truncated parameter block");
        return net;
    }

    static void axpy(NetParams& dst, const NetParams& src, double scale) {
        auto add = [scale](std::vector<double>& d, const std::vector<double>& s) {
            for (std::size_t i = 0; i < d.size(); ++i) d[i] += scale * s[i];
        };
        for (std::size_t l = 0; l < dst.trunk.size(); ++l) {
            add(dst.trunk[l].W, src.trunk[l].W);
            add(dst.trunk[l].b, src.trunk[l].b);
        }
        add(dst.value.W, src.value.W);
        add(dst.value.b, src.value.b);
        add(dst.advantage.W, src.advantage.W);
        add(dst.advantage.b, src.advantage.b);
    }

private:
    HeadMode mode_ = HeadMode::Dueling;
    int input_dim_ = 0;
    std::vector<int> branches_;
    std::vector<int> offsets_;
    NetParams params_;
};

/// Deep copy; later updates of the online net leave the copy untouched.
inline DuelingNet clone_into_target(const DuelingNet& online) { return online; }

struct GradCheckSample {
    std::vector<double> state;
    std::vector<int> action;
    double target = 0.0;
};

/// Central-difference audit of backward(). Per-parameter relative error,
/// floored at 1% of the gradient's largest magnitude so negligible entries do
/// not drown the measurement in roundoff.
inline double grad_check(DuelingNet& net, const GradCheckSample& sample, double h = 1e-5) {
    GradientSet analytic = net.backward(net.forward(sample.state), sample.action, sample.target);
    std::vector<double*> aptr = analytic.param_ptrs();

    const auto loss = [&net, &sample]() {
        const ForwardPass f = net.forward(sample.state);
        const double q = net.joint_q(f, sample.action);
        return 0.5 * (sample.target - q) * (sample.target - q);
    };

    std::vector<double*> params = net.params().param_ptrs();
    std::vector<double> fd(params.size());
    double gmax = 0.0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double keep = *params[i];
        *params[i] = keep + h;
        const double up = loss();
        *params[i] = keep - h;
        const double down = loss();
        *params[i] = keep;
        fd[i] = (up - down) / (2.0 * h);
        gmax = std::max(gmax, std::max(std::abs(fd[i]), std::abs(*aptr[i])));
    }
    if (gmax == 0.0) return 0.0;

    double worst = 0.0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double denom = std::max(std::max(std::abs(fd[i]), std::abs(*aptr[i])), 0.01 * gmax);
        worst = std::max(worst, std::abs(fd[i] - *aptr[i]) / denom);
    }
    return worst;
}

}  // namespace irsim
