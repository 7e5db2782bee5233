// SPDX-License-Identifier: Apache-2.0
//
// Scenario, vehicle and episode data model. Episodes are time-ordered lists
// of scenes sampled at a fixed interval; each scene carries vehicle state and
// the synthesized rays from every receiver's serving base station.

#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "beamtrack/geometry.hpp"
#include "beamtrack/mimo.hpp"

namespace beamtrack {

inline constexpr double kSpeedOfLight = 299792458.0;

enum class ScenarioKind { urban_canyon, roundabout };

inline std::string to_string(ScenarioKind k) {
    return k == ScenarioKind::urban_canyon ? "urban_canyon" : "roundabout";
}

inline ScenarioKind scenario_kind_from_string(const std::string& s) {
    if (s == "urban_canyon") return ScenarioKind::urban_canyon;
    if (s == "roundabout") return ScenarioKind::roundabout;
    throw std::invalid_argument("unknown scenario kind: " + s);
}

// Straight lane along the y axis at a fixed x offset; direction +1 drives
// toward +y.
struct LaneSpec {
    double x = 0.0;
    double y_min = 0.0;
    double y_max = 0.0;
    int direction = 1;
    double half_width = 1.5;
};

// Circular lane; direction +1 is counter-clockwise.
struct RingSpec {
    Vec3 center;
    double radius = 0.0;
    int direction = 1;
    double half_width = 1.5;
};

struct BaseStation {
    Vec3 pos;
    double heading = 0.0;  // boresight azimuth; array axis is perpendicular
};

struct Scenario {
    ScenarioKind kind = ScenarioKind::urban_canyon;
    std::vector<Box> buildings;
    std::vector<BaseStation> bs;
    std::vector<LaneSpec> lanes;
    RingSpec ring;
    double speed_min = 0.0;  // m/s
    double speed_max = 0.0;
    double carrier_hz = 28e9;
    double scene_interval_ms = 20.0;
    int n_traffic = 4;       // non-receiver vehicles
    double truck_fraction = 0.5;
    // receiver spawn band along the road around the BS ordinate (urban);
    // zero width disables the band and spawns anywhere on the lane
    double rx_spawn_near = 0.0;
    double rx_spawn_far = 0.0;
    // spawn receivers uniformly over the beam grid instead of the lane; used
    // by the parked calibration preset so every codeword gets coverage
    bool rx_spawn_beam_uniform = false;
    Vec3 bounds_lo, bounds_hi;

    double wavelength() const { return kSpeedOfLight / carrier_hz; }

    bool in_bounds(const Vec3& p) const {
        return p.x >= bounds_lo.x && p.x <= bounds_hi.x && p.y >= bounds_lo.y &&
               p.y <= bounds_hi.y;
    }

    void validate() const {
        if (bs.empty()) throw std::invalid_argument("Scenario: needs at least one BS");
        if (speed_min < 0.0 || speed_max < speed_min)
            throw std::invalid_argument("Scenario: invalid speed range");
        if (carrier_hz <= 0.0) throw std::invalid_argument("Scenario: invalid carrier");
        for (const Box& b : buildings)
            if (!b.valid()) throw std::invalid_argument("Scenario: degenerate building box");
        // lanes must stay clear of buildings
        for (const LaneSpec& lane : lanes) {
            const Box strip{{lane.x - lane.half_width, lane.y_min, 0.0},
                            {lane.x + lane.half_width, lane.y_max, 0.1}};
            for (const Box& b : buildings)
                if (footprints_overlap(strip, b))
                    throw std::invalid_argument("Scenario: lane intersects a building");
        }
        if (kind == ScenarioKind::roundabout) {
            if (ring.radius <= 0.0) throw std::invalid_argument("Scenario: ring radius");
            for (const Box& b : buildings) {
                // closest/farthest footprint point from the ring center
                const double dx = std::max({b.lo.x - ring.center.x, ring.center.x - b.hi.x, 0.0});
                const double dy = std::max({b.lo.y - ring.center.y, ring.center.y - b.hi.y, 0.0});
                const double nearest = std::hypot(dx, dy);
                if (nearest < ring.radius + ring.half_width) {
                    const double fx = std::max(std::abs(b.lo.x - ring.center.x),
                                               std::abs(b.hi.x - ring.center.x));
                    const double fy = std::max(std::abs(b.lo.y - ring.center.y),
                                               std::abs(b.hi.y - ring.center.y));
                    const double farthest = std::hypot(fx, fy);
                    if (farthest > ring.radius - ring.half_width)
                        throw std::invalid_argument("Scenario: ring lane intersects a building");
                }
            }
        }
    }
};

struct VehicleState {
    int id = 0;
    Vec3 position;       // center of the footprint, on the ground
    Vec3 velocity;       // m/s
    double heading = 0.0;
    double length = 4.5, width = 1.8, height = 1.6;
    bool is_receiver = false;
    int receiver_index = -1;

    // motion bookkeeping, not serialized
    int lane = -1;
    double ring_angle = 0.0;
    double speed = 0.0;

    Vec3 antenna_pos() const { return {position.x, position.y, position.z + height}; }

    // Axis-aligned box over the heading-rotated footprint.
    Box body_box() const {
        const double c = std::abs(std::cos(heading)), s = std::abs(std::sin(heading));
        const double ex = (length * c + width * s) / 2.0;
        const double ey = (length * s + width * c) / 2.0;
        return {{position.x - ex, position.y - ey, position.z},
                {position.x + ex, position.y + ey, position.z + height}};
    }

    void validate(const Scenario& sc) const {
        const double v = velocity.norm();
        if (v < sc.speed_min - 1e-9 || v > sc.speed_max + 1e-9)
            throw std::invalid_argument("VehicleState: speed outside scenario range");
        if (v > 0.0) {
            const double dir_angle = std::atan2(velocity.y, velocity.x);
            double diff = std::remainder(dir_angle - heading, 2.0 * std::numbers::pi);
            if (std::abs(diff) > 1e-6)
                throw std::invalid_argument("VehicleState: heading disagrees with velocity");
        }
    }
};

struct Scene {
    int scene_id = 0;
    double t_ms = 0.0;
    std::vector<VehicleState> vehicles;
    std::vector<std::vector<RayPath>> rays_per_receiver;  // index = receiver_index
    std::vector<int> serving_bs;                          // index = receiver_index

    const VehicleState& receiver(int rx_index) const {
        for (const auto& v : vehicles)
            if (v.is_receiver && v.receiver_index == rx_index) return v;
        throw std::invalid_argument("Scene: no receiver with index " + std::to_string(rx_index));
    }
};

struct Episode {
    int episode_id = 0;
    double scene_interval_ms = 20.0;
    std::vector<Scene> scenes;
};

}  // namespace beamtrack
