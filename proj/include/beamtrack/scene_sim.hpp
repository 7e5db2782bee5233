// SPDX-License-Identifier: Apache-2.0
//
// Synthetic episode generation: scenario construction, seeded vehicle
// spawning, constant-speed kinematics and deterministic ray synthesis
// (line of sight plus one image-method reflection per building facade).

#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "beamtrack/geometry.hpp"
#include "beamtrack/rng.hpp"
#include "beamtrack/scene.hpp"

namespace beamtrack {

struct ScenarioParams {
    // urban canyon
    double road_length = 200.0;
    double lane_offset = 2.0;       // lanes at +-lane_offset
    double sidewalk_x = 5.0;        // BS standoff from the road axis
    double bs_height = 5.0;
    double building_near_x = 6.5;
    double building_far_x = 9.5;
    // roundabout
    double ring_radius = 25.0;
    double ring_bs_height = 6.0;
    double building_ring_radius = 33.0;
    // receiver spawn band along the road, measured from the BS ordinate;
    // keeps receivers where the beams actually move
    double rx_spawn_near = 12.0;
    double rx_spawn_far = 45.0;
    // shared
    double speed_min = 8.0;   // m/s
    double speed_max = 15.0;
    int n_traffic = 4;
    double truck_fraction = 0.5;
    double carrier_hz = 28e9;
    double scene_interval_ms = 20.0;
};

inline Scenario make_scenario(ScenarioKind kind, const ScenarioParams& p = {}) {
    Scenario sc;
    sc.kind = kind;
    sc.speed_min = p.speed_min;
    sc.speed_max = p.speed_max;
    sc.carrier_hz = p.carrier_hz;
    sc.scene_interval_ms = p.scene_interval_ms;
    sc.n_traffic = p.n_traffic;
    sc.truck_fraction = p.truck_fraction;
    sc.rx_spawn_near = p.rx_spawn_near;
    sc.rx_spawn_far = p.rx_spawn_far;

    if (kind == ScenarioKind::urban_canyon) {
        const double len = p.road_length;
        sc.lanes.push_back({-p.lane_offset, 0.0, len, +1});
        sc.lanes.push_back({+p.lane_offset, 0.0, len, -1});
        // one BS on each sidewalk, boresight facing the road, array axis
        // along the road so the codebook sweeps the direction of travel
        sc.bs.push_back({{-p.sidewalk_x, len / 2.0, p.bs_height}, 0.0});
        sc.bs.push_back({{+p.sidewalk_x, len / 2.0, p.bs_height}, std::numbers::pi});
        // two rows of building boxes with gaps between them
        const double x0 = p.building_near_x, x1 = p.building_far_x;
        const double spans[][2] = {{5, 45}, {50, 95}, {105, 150}, {155, 195}};
        const double heights[] = {9.0, 8.0, 9.5, 8.5};
        for (int i = 0; i < 4; ++i) {
            const double ylo = spans[i][0] * (len / 200.0);
            const double yhi = spans[i][1] * (len / 200.0);
            sc.buildings.push_back({{x0, ylo, 0.0}, {x1, yhi, heights[i]}});
            sc.buildings.push_back({{-x1, ylo, 0.0}, {-x0, yhi, heights[(i + 2) % 4]}});
        }
        sc.bounds_lo = {-10.0, 0.0, 0.0};
        sc.bounds_hi = {10.0, len, 10.0};
    } else {
        sc.ring = {{0.0, 0.0, 0.0}, p.ring_radius, +1};
        sc.bs.push_back({{0.0, 0.0, p.ring_bs_height}, 0.0});
        // buildings surrounding the roundabout
        const int n_buildings = 6;
        const double heights[n_buildings] = {8.0, 9.0, 7.5, 8.5, 9.5, 7.0};
        for (int i = 0; i < n_buildings; ++i) {
            const double ang = (2.0 * std::numbers::pi * i) / n_buildings +
                               std::numbers::pi / n_buildings;
            const double cx = p.building_ring_radius * std::cos(ang);
            const double cy = p.building_ring_radius * std::sin(ang);
            const double half = 3.5;
            sc.buildings.push_back(
                {{cx - half, cy - half, 0.0}, {cx + half, cy + half, heights[i]}});
        }
        const double extent = p.building_ring_radius + 7.0;
        sc.bounds_lo = {-extent, -extent, 0.0};
        sc.bounds_hi = {extent, extent, 10.0};
    }
    sc.validate();
    return sc;
}

// Named presets mirroring the two tracking datasets plus a parked variant
// used by the sanity gates.
struct Preset {
    std::string name;
    Scenario scenario;
    int n_scenes = 10;
    int n_receivers = 2;
    int default_episodes = 200;
};

inline Preset scenario_preset(const std::string& name) {
    if (name == "t001") {
        ScenarioParams p;
        p.speed_min = 10.0;
        p.speed_max = 60.0 / 3.6;
        p.bs_height = 7.0;
        p.rx_spawn_near = 0.0;
        p.rx_spawn_far = 36.0;
        return {name, make_scenario(ScenarioKind::urban_canyon, p), 10, 2, 200};
    }
    if (name == "t002") {
        ScenarioParams p;
        p.speed_min = 5.5;
        p.speed_max = 60.0 / 3.6;  // up to 60 km/h
        return {name, make_scenario(ScenarioKind::roundabout, p), 20, 5, 100};
    }
    if (name == "t001_static") {
        ScenarioParams p;
        p.speed_min = 0.0;
        p.speed_max = 0.0;
        p.bs_height = 7.0;
        Preset preset{name, make_scenario(ScenarioKind::urban_canyon, p), 10, 2, 400};
        preset.scenario.rx_spawn_beam_uniform = true;
        return preset;
    }
    throw std::invalid_argument("unknown preset: " + name);
}

namespace detail {

inline VehicleState advance(const Scenario& sc, VehicleState v, double dt) {
    if (sc.kind == ScenarioKind::urban_canyon || v.lane >= 0) {
        v.position += v.velocity * dt;
    } else {
        const double omega = v.speed / sc.ring.radius * sc.ring.direction;
        v.ring_angle += omega * dt;
        v.position = {sc.ring.center.x + sc.ring.radius * std::cos(v.ring_angle),
                      sc.ring.center.y + sc.ring.radius * std::sin(v.ring_angle), 0.0};
        const double tx = -std::sin(v.ring_angle) * sc.ring.direction;
        const double ty = std::cos(v.ring_angle) * sc.ring.direction;
        v.velocity = {v.speed * tx, v.speed * ty, 0.0};
        if (v.speed > 0.0) v.heading = std::atan2(ty, tx);
    }
    return v;
}

inline void set_vehicle_class(VehicleState& v, bool truck) {
    if (truck) {
        v.length = 8.0;
        v.width = 2.4;
        v.height = 3.2;
    } else {
        v.length = 4.5;
        v.width = 1.8;
        v.height = 1.6;
    }
}

inline std::vector<VehicleState> spawn_vehicles(const Scenario& sc, int n_receivers, Rng& rng) {
    std::vector<VehicleState> out;
    const int total = n_receivers + sc.n_traffic;
    constexpr double kMinSpacing = 12.0;  // same-lane gap, keeps bodies apart
    constexpr int kMaxTries = 64;
    for (int i = 0; i < total; ++i) {
        VehicleState v;
        v.id = i;
        v.is_receiver = i < n_receivers;
        v.receiver_index = v.is_receiver ? i : -1;
        v.speed = rng.uniform(sc.speed_min, sc.speed_max);
        const bool truck = !v.is_receiver && rng.uniform() < sc.truck_fraction;
        set_vehicle_class(v, truck);

        if (sc.kind == ScenarioKind::urban_canyon) {
            for (int attempt = 0; attempt < kMaxTries; ++attempt) {
                const std::size_t li = rng.uniform_int(sc.lanes.size());
                const LaneSpec& lane = sc.lanes[li];
                const double len = lane.y_max - lane.y_min;
                // receivers spawn in a band around the BS ordinate where the
                // beams actually move; traffic spreads over the corridor
                double y;
                if (v.is_receiver && sc.rx_spawn_beam_uniform) {
                    // invert the steering relation so the spatial frequency,
                    // and with it the beam label, is uniformly covered
                    double best = std::numeric_limits<double>::infinity();
                    Vec3 bs_pos;
                    for (const auto& b : sc.bs) {
                        const double dx = std::abs(b.pos.x - lane.x);
                        if (dx < best) {
                            best = dx;
                            bs_pos = b.pos;
                        }
                    }
                    const double dz = bs_pos.z - (0.0 + v.height);
                    const double standoff = std::hypot(best, dz);
                    const double u = rng.uniform(-0.96, 0.96);
                    const double dy = standoff * u / std::sqrt(1.0 - u * u);
                    y = std::clamp(bs_pos.y + dy, lane.y_min + 5.0, lane.y_max - 5.0);
                } else if (v.is_receiver && sc.rx_spawn_far > sc.rx_spawn_near) {
                    const double mid = lane.y_min + len / 2.0;
                    const double offset = rng.uniform(sc.rx_spawn_near, sc.rx_spawn_far);
                    const double side = rng.uniform() < 0.5 ? -1.0 : 1.0;
                    y = std::clamp(mid + side * offset, lane.y_min + 5.0, lane.y_max - 5.0);
                } else if (v.is_receiver) {
                    y = rng.uniform(lane.y_min + 0.32 * len, lane.y_min + 0.68 * len);
                } else {
                    y = rng.uniform(lane.y_min + 5.0, lane.y_max - 5.0);
                }
                bool clear = true;
                for (const auto& other : out)
                    if (other.lane == static_cast<int>(li) &&
                        std::abs(other.position.y - y) < kMinSpacing)
                        clear = false;
                if (!clear && attempt + 1 < kMaxTries) continue;
                v.lane = static_cast<int>(li);
                v.position = {lane.x, y, 0.0};
                const double dir = lane.direction;
                v.velocity = {0.0, v.speed * dir, 0.0};
                v.heading = (v.speed > 0.0)
                                ? std::atan2(v.velocity.y, v.velocity.x)
                                : (dir > 0 ? std::numbers::pi / 2 : -std::numbers::pi / 2);
                break;
            }
        } else {
            const double min_arc_angle = kMinSpacing / sc.ring.radius;
            for (int attempt = 0; attempt < kMaxTries; ++attempt) {
                const double ang = rng.uniform(0.0, 2.0 * std::numbers::pi);
                bool clear = true;
                for (const auto& other : out) {
                    const double diff = std::abs(
                        std::remainder(other.ring_angle - ang, 2.0 * std::numbers::pi));
                    if (diff < min_arc_angle) clear = false;
                }
                if (!clear && attempt + 1 < kMaxTries) continue;
                v.lane = -1;
                v.ring_angle = ang;
                v.position = {sc.ring.center.x + sc.ring.radius * std::cos(ang),
                              sc.ring.center.y + sc.ring.radius * std::sin(ang), 0.0};
                const double tx = -std::sin(ang) * sc.ring.direction;
                const double ty = std::cos(ang) * sc.ring.direction;
                v.velocity = {v.speed * tx, v.speed * ty, 0.0};
                v.heading = std::atan2(ty, tx);
                break;
            }
        }
        out.push_back(v);
    }
    return out;
}

}  // namespace detail

// Blocker boxes for a scene: buildings plus every vehicle body except the
// receiver's own.
inline std::vector<Box> blocker_boxes(const Scenario& sc, const Scene& scene, int exclude_id) {
    std::vector<Box> boxes = sc.buildings;
    for (const auto& v : scene.vehicles)
        if (v.id != exclude_id) boxes.push_back(v.body_box());
    return boxes;
}

// Deterministic geometric ray synthesis between one BS and one receiver:
// free-space LOS when unobstructed, plus one specular reflection per building
// facade found with the image method. At most the 8 strongest rays are kept,
// sorted by |gain| descending.
inline std::vector<RayPath> synthesize_rays(const Scenario& sc, const Scene& scene,
                                            const BaseStation& bs, const VehicleState& rx) {
    constexpr int kMaxRays = 8;
    constexpr double kReflectionCoeff = 0.3;
    const double lambda = sc.wavelength();
    const Pose tx_pose{bs.pos, bs.heading};
    const Pose rx_pose{rx.antenna_pos(), rx.heading};
    const std::vector<Box> blockers = blocker_boxes(sc, scene, rx.id);

    struct Candidate {
        RayPath ray;
        int sort_key;  // 0 = LOS, then facade order
    };
    std::vector<Candidate> cands;

    auto make_ray = [&](const Vec3& dep_target, const Vec3& arr_target, double path_len,
                        double amp_scale) {
        RayPath ray;
        const Vec3 u_dep = (dep_target - tx_pose.pos).normalized();
        const Vec3 u_arr = (arr_target - rx_pose.pos).normalized();
        const LocalAngles dep = local_angles(tx_pose, u_dep);
        const LocalAngles arr = local_angles(rx_pose, u_arr);
        ray.aod_az = dep.az;
        ray.aod_el = dep.el;
        ray.aoa_az = arr.az;
        ray.aoa_el = arr.el;
        const double amp = amp_scale * lambda / (4.0 * std::numbers::pi * path_len);
        const double phase = -2.0 * std::numbers::pi * path_len / lambda;
        ray.gain = std::polar(amp, phase);
        ray.delay_s = path_len / kSpeedOfLight;
        return ray;
    };

    if (!los_blocked(tx_pose.pos, rx_pose.pos, blockers)) {
        const double d = distance(tx_pose.pos, rx_pose.pos);
        cands.push_back({make_ray(rx_pose.pos, tx_pose.pos, d, 1.0), 0});
    }

    int facade_index = 1;
    for (const Box& building : sc.buildings) {
        for (const Facade& f : side_facades(building)) {
            ++facade_index;
            const double side_tx = (tx_pose.pos[f.axis] - f.plane) * f.normal;
            const double side_rx = (rx_pose.pos[f.axis] - f.plane) * f.normal;
            if (side_tx <= 0.0 || side_rx <= 0.0) continue;  // both strictly outside
            const Vec3 image = mirror_across_facade(tx_pose.pos, f);
            const double t = side_tx / (side_tx + side_rx);
            const Vec3 hit = image + (rx_pose.pos - image) * t;
            const Box& fb = f.face_bounds;
            if (hit.x < fb.lo.x || hit.x > fb.hi.x || hit.y < fb.lo.y || hit.y > fb.hi.y ||
                hit.z < fb.lo.z || hit.z > fb.hi.z)
                continue;
            if (los_blocked(tx_pose.pos, hit, blockers) || los_blocked(hit, rx_pose.pos, blockers))
                continue;
            const double path_len = distance(tx_pose.pos, hit) + distance(hit, rx_pose.pos);
            cands.push_back({make_ray(hit, hit, path_len, kReflectionCoeff), facade_index});
        }
    }

    std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
        const double ga = std::abs(a.ray.gain), gb = std::abs(b.ray.gain);
        if (ga != gb) return ga > gb;
        return a.sort_key < b.sort_key;
    });
    if (cands.size() > kMaxRays) cands.resize(kMaxRays);

    std::vector<RayPath> rays;
    rays.reserve(cands.size());
    for (auto& c : cands) rays.push_back(c.ray);
    return rays;
}

// Spawns seeded vehicles, advances them scene by scene at the scenario's
// fixed interval, and synthesizes rays from each receiver's serving BS
// (nearest at scene 0, held for the whole episode). Truncates when a receiver
// leaves the bounds; an episode shorter than two scenes is an error.
inline Episode simulate_episode(const Scenario& sc, int n_scenes, int n_receivers,
                                std::uint64_t seed, int episode_id = 0) {
    if (n_scenes < 2) throw std::invalid_argument("simulate_episode: n_scenes must be >= 2");
    if (n_receivers < 1)
        throw std::invalid_argument("simulate_episode: n_receivers must be >= 1");
    sc.validate();

    Rng rng(derive_seed(seed, 0x5ce9e));
    std::vector<VehicleState> vehicles = detail::spawn_vehicles(sc, n_receivers, rng);

    // serving BS fixed per receiver: nearest at spawn
    std::vector<int> serving(static_cast<std::size_t>(n_receivers), 0);
    for (int r = 0; r < n_receivers; ++r) {
        const Vec3 ant = vehicles[static_cast<std::size_t>(r)].antenna_pos();
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t b = 0; b < sc.bs.size(); ++b) {
            const double d = distance(ant, sc.bs[b].pos);
            if (d < best) {
                best = d;
                serving[static_cast<std::size_t>(r)] = static_cast<int>(b);
            }
        }
    }

    Episode ep;
    ep.episode_id = episode_id;
    ep.scene_interval_ms = sc.scene_interval_ms;
    const double dt = sc.scene_interval_ms / 1000.0;

    for (int k = 0; k < n_scenes; ++k) {
        Scene scene;
        scene.scene_id = k;
        scene.t_ms = k * sc.scene_interval_ms;
        scene.vehicles = vehicles;
        scene.serving_bs = serving;

        bool receiver_left = false;
        for (const auto& v : vehicles) {
            v.validate(sc);
            if (v.is_receiver && !sc.in_bounds(v.position)) receiver_left = true;
        }
        if (receiver_left) break;

        scene.rays_per_receiver.resize(static_cast<std::size_t>(n_receivers));
        for (int r = 0; r < n_receivers; ++r) {
            const VehicleState& rx = scene.receiver(r);
            const BaseStation& bs = sc.bs[static_cast<std::size_t>(serving[r])];
            scene.rays_per_receiver[static_cast<std::size_t>(r)] =
                synthesize_rays(sc, scene, bs, rx);
        }
        ep.scenes.push_back(std::move(scene));

        for (auto& v : vehicles) v = detail::advance(sc, v, dt);
    }

    if (ep.scenes.size() < 2)
        throw std::runtime_error("simulate_episode: receiver left bounds before two scenes");
    return ep;
}

}  // namespace beamtrack
