#pragma once

#include "irsim/world.hpp"

namespace irsim {

/// 8m x 6m x 3m room: four full-height pillars at the quadrant centers, two
/// parterres against the long walls, a fountain base centered up to grid
/// alignment. AP sits at the west wall midpoint, IRS at the ceiling center.
/// All footprints land on 0.1 m grid lines.
inline WorldModel paper_world() {
    WorldModel w;
    w.room = {8.0, 6.0, 3.0};
    w.obstacles = {
        {{1.5, 1.0, 0.0}, {2.5, 2.0, 3.0}},  // pillars, 1x1x3
        {{5.5, 1.0, 0.0}, {6.5, 2.0, 3.0}},
        {{1.5, 4.0, 0.0}, {2.5, 5.0, 3.0}},
        {{5.5, 4.0, 0.0}, {6.5, 5.0, 3.0}},
        {{3.5, 0.0, 0.0}, {4.5, 1.0, 1.0}},  // parterres, 1x1x1
        {{3.5, 5.0, 0.0}, {4.5, 6.0, 1.0}},
        {{3.2, 2.2, 0.0}, {4.7, 3.7, 1.0}},  // fountain base, 1.5x1.5x1
    };
    w.ap_pos = {0.0, 3.0, 2.0};
    w.irs_pos = {4.0, 3.0, 3.0};
    w.robot_height = 0.3;
    w.grid_resolution = 0.1;
    w.robot_velocity = 0.1;
    return w;
}

/// Small 6m x 4m x 2m arena for fast runs: one pillar, one low parterre, AP on
/// the west wall, IRS at the ceiling center.
inline WorldModel desk_world() {
    WorldModel w;
    w.room = {6.0, 4.0, 2.0};
    w.obstacles = {
        {{2.6, 0.6, 0.0}, {3.6, 1.6, 2.0}},  // pillar
        {{1.2, 2.4, 0.0}, {2.2, 3.4, 1.0}},  // parterre
    };
    w.ap_pos = {0.1, 2.0, 1.8};
    w.irs_pos = {3.0, 2.0, 2.0};
    w.robot_height = 0.3;
    w.grid_resolution = 0.1;
    w.robot_velocity = 0.1;
    return w;
}

}  // namespace irsim
