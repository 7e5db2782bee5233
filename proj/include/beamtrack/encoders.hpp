// SPDX-License-Identifier: Apache-2.0
//
// Scene-to-matrix encoders. A virtual LIDAR casts rays against the scene
// geometry; the resulting cloud quantizes into a categorical voxel grid
// (obstacle -1, free 0, BS -2, UE -3). The GNSS encoder projects the scene
// to a ground-plane matrix (scatterer 1, transmitter 10, receiver gradient
// rising from 3 along the heading).

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "beamtrack/geometry.hpp"
#include "beamtrack/scene.hpp"
#include "beamtrack/scene_sim.hpp"

namespace beamtrack {

struct GridSpec {
    Vec3 origin;
    Vec3 cell_size;              // meters per cell, per axis
    std::array<int, 3> dims{1, 1, 1};  // cell counts; dims[2] == 1 for 2-D grids

    void validate() const {
        if (cell_size.x <= 0.0 || cell_size.y <= 0.0 || cell_size.z <= 0.0)
            throw std::invalid_argument("GridSpec: cell_size must be positive");
        if (dims[0] < 1 || dims[1] < 1 || dims[2] < 1)
            throw std::invalid_argument("GridSpec: dims must be >= 1");
    }

    std::array<int, 3> cell_of(const Vec3& p) const {
        return {static_cast<int>(std::floor((p.x - origin.x) / cell_size.x)),
                static_cast<int>(std::floor((p.y - origin.y) / cell_size.y)),
                static_cast<int>(std::floor((p.z - origin.z) / cell_size.z))};
    }

    bool inside(const std::array<int, 3>& c) const {
        return c[0] >= 0 && c[0] < dims[0] && c[1] >= 0 && c[1] < dims[1] && c[2] >= 0 &&
               c[2] < dims[2];
    }
};

struct PointCloud {
    std::vector<Vec3> points;
    Pose sensor_pose;
};

inline constexpr std::int8_t kCellFree = 0;
inline constexpr std::int8_t kCellObstacle = -1;
inline constexpr std::int8_t kCellBs = -2;
inline constexpr std::int8_t kCellUe = -3;

struct VoxelGrid {
    std::array<int, 3> dims{0, 0, 0};
    std::vector<std::int8_t> values;  // x-major: ((x * ny) + y) * nz + z

    std::int8_t& at(int x, int y, int z) {
        return values[(static_cast<std::size_t>(x) * dims[1] + y) * dims[2] + z];
    }
    std::int8_t at(int x, int y, int z) const {
        return values[(static_cast<std::size_t>(x) * dims[1] + y) * dims[2] + z];
    }
};

inline constexpr std::int8_t kCoordScatterer = 1;
inline constexpr std::int8_t kCoordTransmitter = 10;
inline constexpr std::int8_t kCoordGradientStart = 3;

struct CoordMatrix {
    int nx = 0, ny = 0;
    std::vector<std::int8_t> values;  // x-major

    std::int8_t& at(int x, int y) { return values[static_cast<std::size_t>(x) * ny + y]; }
    std::int8_t at(int x, int y) const { return values[static_cast<std::size_t>(x) * ny + y]; }
};

// Casts n_azimuth x n_elevation rays from the sensor and keeps the nearest
// box-surface hit of each within max_range. Azimuths cover the full circle
// relative to the sensor heading; elevations span [el_min, el_max].
// exclude_vehicle_id drops the sensor's own body from the targets.
inline PointCloud virtual_lidar(const Scenario& sc, const Scene& scene, const Pose& sensor,
                                int n_azimuth, int n_elevation, double max_range,
                                double el_min = -0.26, double el_max = 0.26,
                                int exclude_vehicle_id = -1) {
    if (n_azimuth < 1 || n_elevation < 1)
        throw std::invalid_argument("virtual_lidar: ray counts must be >= 1");
    if (max_range <= 0.0) throw std::invalid_argument("virtual_lidar: max_range must be > 0");

    std::vector<Box> boxes = sc.buildings;
    for (const auto& v : scene.vehicles)
        if (v.id != exclude_vehicle_id) boxes.push_back(v.body_box());

    PointCloud cloud;
    cloud.sensor_pose = sensor;
    for (int j = 0; j < n_elevation; ++j) {
        const double el = (n_elevation == 1)
                              ? (el_min + el_max) / 2.0
                              : el_min + (el_max - el_min) * j / (n_elevation - 1);
        const double cos_el = std::cos(el), sin_el = std::sin(el);
        for (int i = 0; i < n_azimuth; ++i) {
            const double az = sensor.heading + 2.0 * std::numbers::pi * i / n_azimuth;
            const Vec3 dir{cos_el * std::cos(az), cos_el * std::sin(az), sin_el};
            double nearest = max_range;
            bool hit = false;
            for (const Box& b : boxes) {
                const auto t = ray_box_hit(sensor.pos, dir, b);
                if (t && *t <= nearest) {
                    nearest = *t;
                    hit = true;
                }
            }
            if (hit) cloud.points.push_back(sensor.pos + dir * nearest);
        }
    }
    return cloud;
}

// Quantizes a point cloud into the categorical voxel grid. Points outside the
// grid are dropped; the BS and UE markers are mandatory and take precedence
// over obstacles (UE over BS if they ever share a cell).
inline VoxelGrid voxelize(const PointCloud& cloud, const GridSpec& grid, const Vec3& bs_pos,
                          const Vec3& ue_pos) {
    grid.validate();
    const auto bs_cell = grid.cell_of(bs_pos);
    const auto ue_cell = grid.cell_of(ue_pos);
    if (!grid.inside(bs_cell)) throw std::invalid_argument("voxelize: BS outside the grid");
    if (!grid.inside(ue_cell)) throw std::invalid_argument("voxelize: UE outside the grid");

    VoxelGrid out;
    out.dims = grid.dims;
    out.values.assign(static_cast<std::size_t>(grid.dims[0]) * grid.dims[1] * grid.dims[2],
                      kCellFree);
    for (const Vec3& p : cloud.points) {
        const auto c = grid.cell_of(p);
        if (grid.inside(c)) out.at(c[0], c[1], c[2]) = kCellObstacle;
    }
    out.at(bs_cell[0], bs_cell[1], bs_cell[2]) = kCellBs;
    out.at(ue_cell[0], ue_cell[1], ue_cell[2]) = kCellUe;
    return out;
}

// Ground-plane coordinate matrix. Buildings and every vehicle other than the
// receiver mark their footprint cells as scatterers; the transmitter cell is
// 10; the receiver paints gradient_len cells starting at 3 from its own cell
// along the axis nearest its heading, truncated at the grid edge.
inline CoordMatrix coord_matrix(const Scenario& sc, const Scene& scene, const GridSpec& grid,
                                const Vec3& tx_pos, const VehicleState& rx, int gradient_len) {
    grid.validate();
    if (gradient_len < 1 || gradient_len > 7)
        throw std::invalid_argument("coord_matrix: gradient_len must be in [1, 7]");
    const auto tx_cell = grid.cell_of(tx_pos);
    const auto rx_cell = grid.cell_of(rx.position);
    if (!(tx_cell[0] >= 0 && tx_cell[0] < grid.dims[0] && tx_cell[1] >= 0 &&
          tx_cell[1] < grid.dims[1]))
        throw std::invalid_argument("coord_matrix: transmitter outside the grid");
    if (!(rx_cell[0] >= 0 && rx_cell[0] < grid.dims[0] && rx_cell[1] >= 0 &&
          rx_cell[1] < grid.dims[1]))
        throw std::invalid_argument("coord_matrix: receiver outside the grid");

    CoordMatrix out;
    out.nx = grid.dims[0];
    out.ny = grid.dims[1];
    out.values.assign(static_cast<std::size_t>(out.nx) * out.ny, 0);

    auto mark_footprint = [&](const Box& b) {
        for (int x = 0; x < out.nx; ++x) {
            const double cx = grid.origin.x + (x + 0.5) * grid.cell_size.x;
            if (cx < b.lo.x || cx > b.hi.x) continue;
            for (int y = 0; y < out.ny; ++y) {
                const double cy = grid.origin.y + (y + 0.5) * grid.cell_size.y;
                if (cy < b.lo.y || cy > b.hi.y) continue;
                out.at(x, y) = kCoordScatterer;
            }
        }
    };
    for (const Box& b : sc.buildings) mark_footprint(b);
    for (const auto& v : scene.vehicles)
        if (v.id != rx.id) mark_footprint(v.body_box());

    out.at(tx_cell[0], tx_cell[1]) = kCoordTransmitter;

    // nearest-axis rasterization of the heading
    const double c = std::cos(rx.heading), s = std::sin(rx.heading);
    int step_x = 0, step_y = 0;
    if (std::abs(c) >= std::abs(s))
        step_x = (c >= 0.0) ? 1 : -1;
    else
        step_y = (s >= 0.0) ? 1 : -1;
    for (int k = 0; k < gradient_len; ++k) {
        const int x = rx_cell[0] + k * step_x;
        const int y = rx_cell[1] + k * step_y;
        if (x < 0 || x >= out.nx || y < 0 || y >= out.ny) break;
        out.at(x, y) = static_cast<std::int8_t>(kCoordGradientStart + k);
    }
    return out;
}

// Grid defaults per scenario; the voxel grid matches the scenario bounds.
inline GridSpec default_voxel_grid(const Scenario& sc) {
    GridSpec g;
    g.origin = sc.bounds_lo;
    const double cell = (sc.kind == ScenarioKind::urban_canyon) ? 1.0 : 2.0;
    g.cell_size = {cell, cell, cell};
    const Vec3 extent = sc.bounds_hi - sc.bounds_lo;
    g.dims = {static_cast<int>(std::ceil(extent.x / cell)),
              static_cast<int>(std::ceil(extent.y / cell)),
              static_cast<int>(std::ceil(extent.z / cell))};
    return g;
}

inline GridSpec default_coord_grid(const Scenario& sc, int cells = 64) {
    GridSpec g;
    g.origin = sc.bounds_lo;
    const Vec3 extent = sc.bounds_hi - sc.bounds_lo;
    g.cell_size = {extent.x / cells, extent.y / cells, 1.0};
    g.dims = {cells, cells, 1};
    return g;
}

// Fixed input scaling used before tensors reach the network.
inline constexpr double kVoxelScale = 3.0;
inline constexpr double kCoordScale = 10.0;

}  // namespace beamtrack
