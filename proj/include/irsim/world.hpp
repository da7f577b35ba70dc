#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "irsim/geometry.hpp"
#include "irsim/rng.hpp"

namespace irsim {

/// Grid moves: right/left/still/up/down, one cell per step.
enum class Move : int { Right = 0, Left = 1, Still = 2, Up = 3, Down = 4 };

inline constexpr std::array<Move, 5> kMoveSet{Move::Right, Move::Left, Move::Still,
                                              Move::Up, Move::Down};
inline constexpr int kMoveCount = 5;

struct Cell {
    int i = 0;  // x index
    int j = 0;  // y index
    bool operator==(const Cell& o) const { return i == o.i && j == o.j; }
    bool operator!=(const Cell& o) const { return !(*this == o); }
};

inline int manhattan(Cell a, Cell b) { return std::abs(a.i - b.i) + std::abs(a.j - b.j); }

/// Indoor scene: room extents, axis-aligned obstacles, AP and IRS placement.
struct WorldModel {
    Vec3 room;                    // length (x), width (y), height (z), meters
    std::vector<Box> obstacles;   // boxes resting on the floor
    Vec3 ap_pos;
    Vec3 irs_pos;                 // mounted on the ceiling: irs_pos.z == room.z
    double robot_height = 0.3;
    double grid_resolution = 0.1;
    double robot_velocity = 0.1;  // m/s, one cell per timeslot at default scale

    void validate() const {
        if (room.x <= 0 || room.y <= 0 || room.z <= 0)
            throw std::invalid_argument("world: room dimensions must be positive");
        if (grid_resolution <= 0)
            throw std::invalid_argument("world: grid resolution must be positive");
        const Box room_box{{0, 0, 0}, room};
        for (const Box& b : obstacles) {
            if (!b.valid() || !room_box.contains(b))
                throw std::invalid_argument("world: obstacle outside the room");
            if (b.hi.z <= robot_height)
                throw std::invalid_argument("world: obstacle lower than the robot");
        }
        if (irs_pos.z != room.z)
            throw std::invalid_argument("world: IRS must be mounted on the ceiling");
        if (robot_height <= 0 || robot_height >= room.z)
            throw std::invalid_argument("world: robot height out of range");
        if (robot_velocity <= 0)
            throw std::invalid_argument("world: robot velocity must be positive");
    }
};

/// Occupancy lattice over the room footprint. A cell is blocked iff its center
/// lies inside some obstacle footprint; centers sit at half-resolution offsets.
class GridMap {
public:
    GridMap() = default;
    GridMap(int nx, int ny, double resolution, double robot_height)
        : nx_(nx), ny_(ny), res_(resolution), robot_h_(robot_height),
          blocked_(static_cast<std::size_t>(nx) * ny, 0) {}

    int nx() const { return nx_; }
    int ny() const { return ny_; }
    double resolution() const { return res_; }
    double robot_height() const { return robot_h_; }

    bool in_bounds(Cell c) const { return c.i >= 0 && c.i < nx_ && c.j >= 0 && c.j < ny_; }
    bool blocked(Cell c) const { return blocked_[index(c)] != 0; }
    bool free_cell(Cell c) const { return in_bounds(c) && !blocked(c); }
    void set_blocked(Cell c, bool v) { blocked_[index(c)] = v ? 1 : 0; }

    Vec3 cell_center(Cell c) const {
        return {(c.i + 0.5) * res_, (c.j + 0.5) * res_, robot_h_};
    }

    /// Inverse of cell_center on the x/y plane.
    Cell cell_of(double x, double y) const {
        return {static_cast<int>(std::floor(x / res_)), static_cast<int>(std::floor(y / res_))};
    }

    int blocked_count() const {
        return static_cast<int>(std::count(blocked_.begin(), blocked_.end(), 1));
    }
    int free_count() const { return nx_ * ny_ - blocked_count(); }

    std::vector<Cell> free_cells() const {
        std::vector<Cell> out;
        out.reserve(static_cast<std::size_t>(free_count()));
        for (int j = 0; j < ny_; ++j)
            for (int i = 0; i < nx_; ++i)
                if (!blocked({i, j})) out.push_back({i, j});
        return out;
    }

private:
    std::size_t index(Cell c) const {
        return static_cast<std::size_t>(c.j) * nx_ + c.i;
    }

    int nx_ = 0, ny_ = 0;
    double res_ = 0.1, robot_h_ = 0.3;
    std::vector<std::uint8_t> blocked_;
};

inline GridMap build_grid(const WorldModel& world) {
    world.validate();
    const double res = world.grid_resolution;
    const auto cells_along = [res](double extent) {
        return static_cast<int>(std::floor(extent / res * (1.0 + 1e-12) + 1e-9));
    };
    GridMap grid(cells_along(world.room.x), cells_along(world.room.y), res, world.robot_height);
    for (int j = 0; j < grid.ny(); ++j) {
        for (int i = 0; i < grid.nx(); ++i) {
            const Vec3 center = grid.cell_center({i, j});
            for (const Box& b : world.obstacles) {
                if (b.footprint_contains(center.x, center.y)) {
                    grid.set_blocked({i, j}, true);
                    break;
                }
            }
        }
    }
    return grid;
}

/// True iff the open segment a->b crosses no obstacle interior.
inline bool line_of_sight(const Vec3& a, const Vec3& b, const WorldModel& world) {
    for (const Box& box : world.obstacles)
        if (segment_intersects_box(a, b, box)) return false;
    return true;
}

/// Two distinct free cells drawn uniformly, rejecting pairs closer than two
/// grid moves apart (such pairs break the position-count formula).
inline std::pair<Cell, Cell> sample_endpoints(const GridMap& grid, Rng& rng) {
    const std::vector<Cell> free = grid.free_cells();
    if (free.size() < 2)
        throw std::runtime_error("sample_endpoints: need at least two free cells");

    // Max pairwise Manhattan distance via the (i+j) / (i-j) extents.
    int lo_s = free[0].i + free[0].j, hi_s = lo_s;
    int lo_d = free[0].i - free[0].j, hi_d = lo_d;
    for (const Cell& c : free) {
        lo_s = std::min(lo_s, c.i + c.j);
        hi_s = std::max(hi_s, c.i + c.j);
        lo_d = std::min(lo_d, c.i - c.j);
        hi_d = std::max(hi_d, c.i - c.j);
    }
    if (std::max(hi_s - lo_s, hi_d - lo_d) < 2)
        throw std::runtime_error("sample_endpoints: no endpoint pair at distance >= 2");

    const int n = static_cast<int>(free.size());
    for (;;) {
        const Cell initial = free[rng.uniform_int(n)];
        const Cell final = free[rng.uniform_int(n)];
        if (manhattan(initial, final) >= 2) return {initial, final};
    }
}

/// Count of intermediate positions between the endpoints. The raw formula goes
/// negative for co-located endpoints; clamped at zero.
inline int num_positions(Cell initial, Cell final) {
    return std::max(0, manhattan(initial, final) - 1);
}

struct RobotPose {
    Cell cell;
    bool arrived = false;
};

struct StepOutcome {
    RobotPose pose;
    bool valid = true;  // false when the move hit a wall or an obstacle
};

/// One-cell displacement. Invalid moves are absorbed (pose unchanged) and
/// flagged; arrived robots always hold still.
inline StepOutcome step_robot(const RobotPose& pose, Move move, const GridMap& grid) {
    if (pose.arrived || move == Move::Still) return {pose, true};
    Cell next = pose.cell;
    switch (move) {
        case Move::Right: next.i += 1; break;
        case Move::Left: next.i -= 1; break;
        case Move::Up: next.j += 1; break;
        case Move::Down: next.j -= 1; break;
        default: break;
    }
    if (!grid.free_cell(next)) return {pose, false};
    return {RobotPose{next, pose.arrived}, true};
}

/// Visited cells of one robot plus arrival timestamps at the robot velocity.
struct Trajectory {
    std::vector<Cell> cells;
    double seconds_per_step = 1.0;

    void append(Cell c) { cells.push_back(c); }
    std::size_t steps() const { return cells.empty() ? 0 : cells.size() - 1; }
    double time_at(std::size_t idx) const { return static_cast<double>(idx) * seconds_per_step; }

    /// Meters actually travelled (still steps contribute nothing).
    double path_length(double resolution) const {
        double len = 0.0;
        for (std::size_t s = 1; s < cells.size(); ++s)
            len += manhattan(cells[s - 1], cells[s]) * resolution;
        return len;
    }

    bool valid_on(const GridMap& grid) const {
        for (std::size_t s = 0; s < cells.size(); ++s) {
            if (!grid.free_cell(cells[s])) return false;
            if (s > 0 && manhattan(cells[s - 1], cells[s]) > 1) return false;
        }
        return true;
    }
};

}  // namespace irsim
