#pragma once

#include <complex>
#include <cstdint>
#include <cstdio>
#include <ostream>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "irsim/geometry.hpp"
#include "irsim/rng.hpp"
#include "irsim/world.hpp"

namespace irsim {

using cplx = std::complex<double>;

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double dbm_to_watts(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

enum class LinkClass { ApRobot, IrsRobot, ApIrs };

/// Rician K-factor pair: the value used when the link has line of sight and
/// the value used when an obstacle blocks it.
struct RicianFactor {
    double los = 10.0;
    double blocked = 0.0;
};

struct ChannelParams {
    double ref_loss = 1e-3;        // C, linear gain at 1 m
    double exp_ap_robot = 3.0;     // gamma_Ai
    double exp_irs_robot = 2.4;    // gamma_Ii
    double exp_ap_irs = 2.2;       // gamma_AI
    RicianFactor rician_ap_robot{10.0, 0.0};
    RicianFactor rician_irs_robot{10.0, 0.0};
    RicianFactor rician_ap_irs{10.0, 0.0};
    double noise_power = 1e-11;    // sigma^2, watts
    double wavelength = 0.125;     // meters

    double exponent(LinkClass u) const {
        switch (u) {
            case LinkClass::ApRobot: return exp_ap_robot;
            case LinkClass::IrsRobot: return exp_irs_robot;
            default: return exp_ap_irs;
        }
    }
    const RicianFactor& rician(LinkClass u) const {
        switch (u) {
            case LinkClass::ApRobot: return rician_ap_robot;
            case LinkClass::IrsRobot: return rician_irs_robot;
            default: return rician_ap_irs;
        }
    }

    void validate() const {
        if (ref_loss <= 0) throw std::invalid_argument("channel: reference loss must be positive");
        if (exp_ap_robot < 0 || exp_irs_robot < 0 || exp_ap_irs < 0)
            throw std::invalid_argument("channel: path loss exponents must be nonnegative");
        if (rician_ap_robot.los < 0 || rician_irs_robot.los < 0 || rician_ap_irs.los < 0 ||
            rician_ap_robot.blocked < 0 || rician_irs_robot.blocked < 0 ||
            rician_ap_irs.blocked < 0)
            throw std::invalid_argument("channel: Rician factors must be nonnegative");
        if (noise_power <= 0) throw std::invalid_argument("channel: noise power must be positive");
        if (wavelength <= 0) throw std::invalid_argument("channel: wavelength must be positive");
    }
};

/// Element layout of the surface: M sub-surfaces tiled along x, each a
/// K_h x K_v patch, K = M * K_h * K_v. elements == 0 models the no-IRS case.
struct IrsConfig {
    int elements = 8;      // K
    int subsurfaces = 4;   // M
    int sub_h = 2;         // K_h (columns, x)
    int sub_v = 1;         // K_v (rows, y)
    double spacing = 0.0625;

    int per_sub() const { return sub_h * sub_v; }

    void validate() const {
        if (elements == 0 && subsurfaces == 0) return;  // no-IRS mode
        if (elements < 1 || subsurfaces < 1 || sub_h < 1 || sub_v < 1)
            throw std::invalid_argument("irs: counts must be at least 1");
        if (elements != subsurfaces * per_sub())
            throw std::invalid_argument("irs: K must equal M * K_h * K_v");
        if (spacing <= 0) throw std::invalid_argument("irs: spacing must be positive");
    }

    int subsurface_of(int k) const { return k / per_sub(); }

    /// Offset of element k from the surface center, in the ceiling plane.
    Vec3 element_offset(int k) const {
        const int m = k / per_sub();
        const int local = k % per_sub();
        const int col = m * sub_h + local % sub_h;
        const int row = local / sub_h;
        const int total_cols = subsurfaces * sub_h;
        return {(col - (total_cols - 1) * 0.5) * spacing,
                (row - (sub_v - 1) * 0.5) * spacing, 0.0};
    }
};

/// Quantized per-element phases; amplitudes are identically one.
class PhaseState {
public:
    PhaseState() = default;

    static PhaseState zeros(int elements, int bits) {
        PhaseState p;
        p.bits_ = bits;
        p.theta_.assign(static_cast<std::size_t>(elements), 0.0);
        return p;
    }

    /// One codebook index per sub-surface; all elements of a sub-surface share
    /// the phase.
    static PhaseState from_subsurface_indices(const std::vector<int>& idx, int bits,
                                              const IrsConfig& irs) {
        if (static_cast<int>(idx.size()) != irs.subsurfaces)
            throw std::invalid_argument("phase state: one index per sub-surface required");
        PhaseState p;
        p.bits_ = bits;
        p.theta_.resize(static_cast<std::size_t>(irs.elements));
        for (int k = 0; k < irs.elements; ++k)
            p.theta_[k] = codebook_phase(idx[irs.subsurface_of(k)], bits);
        return p;
    }

    static PhaseState from_element_indices(const std::vector<int>& idx, int bits) {
        PhaseState p;
        p.bits_ = bits;
        p.theta_.resize(idx.size());
        for (std::size_t k = 0; k < idx.size(); ++k) p.theta_[k] = codebook_phase(idx[k], bits);
        return p;
    }

    static double codebook_phase(int n, int bits) {
        const int levels = 1 << bits;
        if (n < 0 || n >= levels) throw std::invalid_argument("phase state: index out of codebook");
        return 2.0 * M_PI * n / levels;
    }

    int size() const { return static_cast<int>(theta_.size()); }
    int bits() const { return bits_; }
    double theta(int k) const { return theta_[k]; }
    cplx phasor(int k) const { return std::polar(1.0, theta_[k]); }

private:
    std::vector<double> theta_;
    int bits_ = 0;
};

/// One draw of every link for the current robot placement.
struct ChannelRealization {
    std::vector<cplx> ap_irs;                 // h, length K
    std::vector<cplx> direct;                 // h_bar per robot
    std::vector<std::vector<cplx>> irs_robot; // g per robot, length K
    std::vector<std::vector<cplx>> cascade;   // psi per robot: conj(h[k]) * g[k]

    int robots() const { return static_cast<int>(direct.size()); }
    int elements() const { return static_cast<int>(ap_irs.size()); }

    void fill_cascade() {
        cascade.assign(irs_robot.size(), {});
        for (std::size_t r = 0; r < irs_robot.size(); ++r) {
            cascade[r].resize(ap_irs.size());
            for (std::size_t k = 0; k < ap_irs.size(); ++k)
                cascade[r][k] = std::conj(ap_irs[k]) * irs_robot[r][k];
        }
    }
};

/// Distance-dependent gain C * d^-gamma.
inline double path_loss(double d, LinkClass u, const ChannelParams& params) {
    if (d <= 0) throw std::domain_error("path_loss: distance must be positive");
    return params.ref_loss * std::pow(d, -params.exponent(u));
}

/// Planar-array steering vector toward `far_point`; every entry has unit
/// magnitude.
inline std::vector<cplx> los_component(const Vec3& far_point, const Vec3& array_center,
                                       const IrsConfig& irs, double wavelength) {
    if (far_point == array_center)
        throw std::invalid_argument("los_component: coincident endpoints");
    const Vec3 dir = (far_point - array_center).normalized();
    std::vector<cplx> v(static_cast<std::size_t>(irs.elements));
    const double wavenumber = 2.0 * M_PI / wavelength;
    for (int k = 0; k < irs.elements; ++k)
        v[k] = std::polar(1.0, -wavenumber * dir.dot(irs.element_offset(k)));
    return v;
}

namespace detail {

inline cplx unit_gaussian(Rng& rng) {
    return {rng.normal() * M_SQRT1_2, rng.normal() * M_SQRT1_2};
}

/// Rician mix per the link model: L * [ sqrt(a/(a+1)) LoS + sqrt(1/(a+1)) NLoS ].
inline cplx mix_link(double loss, double alpha, cplx los, cplx nlos) {
    return loss * (std::sqrt(alpha / (alpha + 1.0)) * los +
                   std::sqrt(1.0 / (alpha + 1.0)) * nlos);
}

inline std::vector<cplx> sample_ap_irs(const WorldModel& world, const ChannelParams& params,
                                       const IrsConfig& irs, Rng& rng) {
    const int K = irs.elements;
    std::vector<cplx> h(static_cast<std::size_t>(K));
    if (K == 0) return h;
    const double d = distance(world.ap_pos, world.irs_pos);
    const double loss = path_loss(d, LinkClass::ApIrs, params);
    const auto& rf = params.rician(LinkClass::ApIrs);
    const double alpha = line_of_sight(world.ap_pos, world.irs_pos, world) ? rf.los : rf.blocked;
    const auto los = los_component(world.ap_pos, world.irs_pos, irs, params.wavelength);
    for (int k = 0; k < K; ++k) h[k] = mix_link(loss, alpha, los[k], unit_gaussian(rng));
    return h;
}

inline cplx sample_direct(const Vec3& pos, const WorldModel& world, const ChannelParams& params,
                          Rng& rng) {
    const double d = distance(world.ap_pos, pos);
    const double loss = path_loss(d, LinkClass::ApRobot, params);
    const auto& rf = params.rician(LinkClass::ApRobot);
    const double alpha = line_of_sight(world.ap_pos, pos, world) ? rf.los : rf.blocked;
    const cplx los = std::polar(1.0, -2.0 * M_PI * d / params.wavelength);
    return mix_link(loss, alpha, los, unit_gaussian(rng));
}

inline std::vector<cplx> sample_irs_robot(const Vec3& pos, const WorldModel& world,
                                          const ChannelParams& params, const IrsConfig& irs,
                                          Rng& rng) {
    const int K = irs.elements;
    std::vector<cplx> g(static_cast<std::size_t>(K));
    if (K == 0) return g;
    const double d = distance(world.irs_pos, pos);
    const double loss = path_loss(d, LinkClass::IrsRobot, params);
    const auto& rf = params.rician(LinkClass::IrsRobot);
    const double alpha = line_of_sight(world.irs_pos, pos, world) ? rf.los : rf.blocked;
    const auto los = los_component(pos, world.irs_pos, irs, params.wavelength);
    for (int k = 0; k < K; ++k) g[k] = mix_link(loss, alpha, los[k], unit_gaussian(rng));
    return g;
}

}  // namespace detail

/// Draws the AP->IRS vector, plus per-robot direct scalar and IRS->robot
/// vector; the Rician factor of each link follows its visibility.
inline ChannelRealization sample_channel(const std::vector<Vec3>& robot_positions,
                                         const WorldModel& world, const ChannelParams& params,
                                         const IrsConfig& irs, Rng& rng) {
    params.validate();
    irs.validate();
    ChannelRealization out;
    out.ap_irs = detail::sample_ap_irs(world, params, irs, rng);
    for (const Vec3& pos : robot_positions) {
        out.direct.push_back(detail::sample_direct(pos, world, params, rng));
        out.irs_robot.push_back(detail::sample_irs_robot(pos, world, params, irs, rng));
    }
    out.fill_cascade();
    return out;
}

/// H_i = sum_k conj(h[k]) e^{j theta_k} g_i[k] + h_bar_i.
inline cplx effective_channel(const ChannelRealization& real, const PhaseState& phases,
                              int robot) {
    if (robot < 0 || robot >= real.robots())
        throw std::out_of_range("effective_channel: robot index");
    if (phases.size() != real.elements())
        throw std::invalid_argument("effective_channel: phase/element count mismatch");
    cplx acc = 0.0;
    const auto& psi = real.cascade[robot];
    for (int k = 0; k < real.elements(); ++k) acc += phases.phasor(k) * psi[k];
    return acc + real.direct[robot];
}

inline std::vector<cplx> effective_channels(const ChannelRealization& real,
                                            const PhaseState& phases) {
    std::vector<cplx> H(static_cast<std::size_t>(real.robots()));
    for (int i = 0; i < real.robots(); ++i) H[i] = effective_channel(real, phases, i);
    return H;
}

/// Exhaustive search over every per-element codebook assignment; maximizer of
/// |H_robot|^2. Small instances only.
inline PhaseState best_phase_bruteforce(const ChannelRealization& real, int bits, int robot) {
    const int K = real.elements();
    if (K * bits > 16)
        throw std::invalid_argument("best_phase_bruteforce: enumeration bound K*B0 <= 16 exceeded");
    const long levels = 1L << bits;
    long total = 1;
    for (int k = 0; k < K; ++k) total *= levels;

    std::vector<int> idx(static_cast<std::size_t>(K), 0);
    std::vector<int> best_idx = idx;
    double best_power = -1.0;
    for (long code = 0; code < total; ++code) {
        long rem = code;
        for (int k = 0; k < K; ++k) {
            idx[k] = static_cast<int>(rem % levels);
            rem /= levels;
        }
        const PhaseState cand = PhaseState::from_element_indices(idx, bits);
        const double power = std::norm(effective_channel(real, cand, robot));
        if (power > best_power) {
            best_power = power;
            best_idx = idx;
        }
    }
    return PhaseState::from_element_indices(best_idx, bits);
}

/// Debug dump: one row per element and link, plus the per-robot direct scalar.
inline void dump_channel_csv(const ChannelRealization& real, std::ostream& os) {
    os << "link,robot,k,re,im\n";
    char buf[128];
    for (int k = 0; k < real.elements(); ++k) {
        std::snprintf(buf, sizeof buf, "ap_irs,,%d,%.17g,%.17g\n", k, real.ap_irs[k].real(),
                      real.ap_irs[k].imag());
        os << buf;
    }
    for (int r = 0; r < real.robots(); ++r) {
        std::snprintf(buf, sizeof buf, "direct,%d,,%.17g,%.17g\n", r, real.direct[r].real(),
                      real.direct[r].imag());
        os << buf;
        for (int k = 0; k < real.elements(); ++k) {
            std::snprintf(buf, sizeof buf, "irs_robot,%d,%d,%.17g,%.17g\n", r, k,
                          real.irs_robot[r][k].real(), real.irs_robot[r][k].imag());
            os << buf;
        }
    }
}

/// Deterministic position-keyed channel source. NLoS draws are frozen per
/// (robot, cell): revisiting a cell reproduces the realization bit for bit,
/// which keeps the decision process stationary. The AP->IRS link is drawn
/// once per seed.
class ChannelModel {
public:
    ChannelModel(WorldModel world, ChannelParams params, IrsConfig irs, std::uint64_t seed)
        : world_(std::move(world)), params_(params), irs_(irs), seed_(seed) {
        params_.validate();
        irs_.validate();
        Rng rng(mix_seed(seed_, kTagApIrs));
        ap_irs_ = detail::sample_ap_irs(world_, params_, irs_, rng);
    }

    const WorldModel& world() const { return world_; }
    const ChannelParams& params() const { return params_; }
    const IrsConfig& irs() const { return irs_; }

    /// Assembles the realization bundle for robots at the given cells.
    ChannelRealization at_cells(const std::vector<Cell>& cells, const GridMap& grid) {
        ChannelRealization out;
        out.ap_irs = ap_irs_;
        for (std::size_t r = 0; r < cells.size(); ++r) {
            const auto& link = robot_link(static_cast<int>(r), cells[r], grid);
            out.direct.push_back(link.direct);
            out.irs_robot.push_back(link.irs_robot);
        }
        out.fill_cascade();
        return out;
    }

private:
    struct RobotLink {
        cplx direct;
        std::vector<cplx> irs_robot;
    };

    static constexpr std::uint64_t kTagApIrs = 0x41495251ULL;
    static constexpr std::uint64_t kTagDirect = 0x444952ULL;
    static constexpr std::uint64_t kTagReflect = 0x524546ULL;

    /// Direct and reflected links use separate substreams so the direct draw
    /// at a cell does not depend on the element count.
    const RobotLink& robot_link(int robot, Cell cell, const GridMap& grid) {
        const std::uint64_t key =
            (static_cast<std::uint64_t>(robot) << 40) |
            (static_cast<std::uint64_t>(static_cast<std::uint32_t>(cell.i)) << 20) |
            static_cast<std::uint64_t>(static_cast<std::uint32_t>(cell.j));
        auto it = memo_.find(key);
        if (it != memo_.end()) return it->second;

        const Vec3 pos = grid.cell_center(cell);
        Rng direct_rng(mix_seed(seed_, kTagDirect, static_cast<std::uint64_t>(robot),
                                static_cast<std::uint64_t>(cell.i),
                                static_cast<std::uint64_t>(cell.j)));
        Rng reflect_rng(mix_seed(seed_, kTagReflect, static_cast<std::uint64_t>(robot),
                                 static_cast<std::uint64_t>(cell.i),
                                 static_cast<std::uint64_t>(cell.j)));
        RobotLink link{detail::sample_direct(pos, world_, params_, direct_rng),
                       detail::sample_irs_robot(pos, world_, params_, irs_, reflect_rng)};
        return memo_.emplace(key, std::move(link)).first->second;
    }

    WorldModel world_;
    ChannelParams params_;
    IrsConfig irs_;
    std::uint64_t seed_;
    std::vector<cplx> ap_irs_;
    std::unordered_map<std::uint64_t, RobotLink> memo_;
};

}  // namespace irsim
