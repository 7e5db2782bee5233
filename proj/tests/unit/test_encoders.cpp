// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

#include "beamtrack/encoders.hpp"
#include "beamtrack/scene_sim.hpp"

using namespace beamtrack;
using std::numbers::pi;

namespace {

Scenario empty_scenario() {
    Scenario sc;
    sc.kind = ScenarioKind::urban_canyon;
    sc.bs.push_back({{0.0, 0.0, 5.0}, 0.0});
    sc.speed_max = 20.0;
    sc.bounds_lo = {-100, -100, 0};
    sc.bounds_hi = {100, 100, 10};
    return sc;
}

std::map<int, int> value_histogram(const std::vector<std::int8_t>& values) {
    std::map<int, int> h;
    for (auto v : values) ++h[v];
    return h;
}

}  // namespace

TEST_SUITE("encoders") {

TEST_CASE("virtual lidar in an empty scenario returns no points") {
    const Scenario sc = empty_scenario();
    Scene scene;
    const PointCloud cloud = virtual_lidar(sc, scene, Pose{{0, 0, 2}, 0.0}, 64, 4, 100.0);
    CHECK(cloud.points.empty());
}

TEST_CASE("virtual lidar inside a surrounding cube sees distances in [r, r*sqrt(3)]") {
    Scenario sc = empty_scenario();
    const double r = 10.0;
    sc.buildings.push_back({{-r, -r, -r + 2}, {r, r, r + 2}});
    Scene scene;
    const Pose sensor{{0, 0, 2}, 0.0};
    const PointCloud cloud = virtual_lidar(sc, scene, sensor, 128, 8, 100.0);
    REQUIRE(cloud.points.size() == 128 * 8);  // every ray exits through a face
    for (const Vec3& p : cloud.points) {
        const double d = distance(p, sensor.pos);
        CHECK(d >= r - 1e-9);
        CHECK(d <= r * std::sqrt(3.0) + 1e-9);
    }
}

TEST_CASE("virtual lidar hits a wall plane exactly") {
    Scenario sc = empty_scenario();
    sc.buildings.push_back({{10, -50, 0}, {12, 50, 20}});
    Scene scene;
    // single horizontal ray toward +x
    const PointCloud cloud =
        virtual_lidar(sc, scene, Pose{{0, 0, 2}, 0.0}, 1, 1, 100.0, 0.0, 0.0);
    REQUIRE(cloud.points.size() == 1);
    CHECK(cloud.points[0].x == doctest::Approx(10.0).epsilon(1e-9));
    CHECK(std::abs(cloud.points[0].y) < 1e-9);
}

TEST_CASE("voxelize marks markers on an empty cloud") {
    GridSpec grid;
    grid.origin = {0, 0, 0};
    grid.cell_size = {1, 1, 1};
    grid.dims = {4, 4, 4};
    PointCloud cloud;
    const VoxelGrid g = voxelize(cloud, grid, {0.5, 0.5, 0.5}, {2.5, 2.5, 2.5});
    const auto h = value_histogram(g.values);
    CHECK(h.at(kCellBs) == 1);
    CHECK(h.at(kCellUe) == 1);
    CHECK(h.at(kCellFree) == 62);
    CHECK(g.at(0, 0, 0) == kCellBs);
    CHECK(g.at(2, 2, 2) == kCellUe);
}

TEST_CASE("voxelize floor convention at cell corners") {
    GridSpec grid;
    grid.origin = {0, 0, 0};
    grid.cell_size = {1, 1, 1};
    grid.dims = {4, 4, 1};
    PointCloud cloud;
    cloud.points.push_back({2.0, 2.0, 0.0});  // exactly on the corner of four cells
    const VoxelGrid g = voxelize(cloud, grid, {0.5, 0.5, 0.5}, {3.5, 3.5, 0.5});
    CHECK(g.at(2, 2, 0) == kCellObstacle);
    CHECK(g.at(1, 1, 0) == kCellFree);
}

TEST_CASE("markers take precedence over obstacle points") {
    GridSpec grid;
    grid.origin = {0, 0, 0};
    grid.cell_size = {1, 1, 1};
    grid.dims = {3, 3, 1};
    PointCloud cloud;
    cloud.points.push_back({0.2, 0.2, 0.2});  // same cell as the BS
    cloud.points.push_back({2.2, 2.2, 0.2});  // same cell as the UE
    const VoxelGrid g = voxelize(cloud, grid, {0.5, 0.5, 0.5}, {2.5, 2.5, 0.5});
    CHECK(g.at(0, 0, 0) == kCellBs);
    CHECK(g.at(2, 2, 0) == kCellUe);
}

TEST_CASE("voxelize requires markers inside the grid") {
    GridSpec grid;
    grid.origin = {0, 0, 0};
    grid.cell_size = {1, 1, 1};
    grid.dims = {2, 2, 2};
    PointCloud cloud;
    CHECK_THROWS_AS((void)voxelize(cloud, grid, {5, 0, 0}, {1, 1, 1}), std::invalid_argument);
    CHECK_THROWS_AS((void)voxelize(cloud, grid, {1, 1, 1}, {-1, 0, 0}), std::invalid_argument);
}

TEST_CASE("voxelize drops out-of-bounds points and ignores point order") {
    GridSpec grid;
    grid.origin = {0, 0, 0};
    grid.cell_size = {0.5, 0.5, 0.5};
    grid.dims = {4, 4, 4};
    PointCloud a, b;
    a.points = {{0.1, 0.1, 0.1}, {1.9, 1.9, 1.9}, {50, 50, 50}, {0.7, 0.2, 0.2}};
    b.points = a.points;
    std::reverse(b.points.begin(), b.points.end());
    const VoxelGrid ga = voxelize(a, grid, {0.3, 1.8, 0.3}, {1.8, 0.3, 0.3});
    const VoxelGrid gb = voxelize(b, grid, {0.3, 1.8, 0.3}, {1.8, 0.3, 0.3});
    CHECK(ga.values == gb.values);
}

TEST_CASE("translating cloud, markers and origin together leaves the grid unchanged") {
    GridSpec grid;
    grid.origin = {0, 0, 0};
    grid.cell_size = {1, 1, 1};
    grid.dims = {6, 6, 3};
    PointCloud cloud;
    cloud.points = {{0.25, 3.5, 0.5}, {4.75, 1.1, 2.2}, {2.5, 2.5, 1.5}};
    const Vec3 shift{13.25, -7.5, 1.25};
    GridSpec grid2 = grid;
    grid2.origin = grid.origin + shift;
    PointCloud cloud2;
    for (const auto& p : cloud.points) cloud2.points.push_back(p + shift);
    const VoxelGrid ga = voxelize(cloud, grid, {1.5, 1.5, 0.5}, {4.5, 4.5, 0.5});
    const VoxelGrid gb =
        voxelize(cloud2, grid2, Vec3{1.5, 1.5, 0.5} + shift, Vec3{4.5, 4.5, 0.5} + shift);
    CHECK(ga.values == gb.values);
}

TEST_CASE("coord matrix paints the documented categorical values") {
    Scenario sc = empty_scenario();
    sc.buildings.push_back({{6, 0, 0}, {10, 16, 9}});
    GridSpec grid;
    grid.origin = {0, 0, 0};
    grid.cell_size = {1, 1, 1};
    grid.dims = {16, 16, 1};

    VehicleState rx;
    rx.id = 0;
    rx.is_receiver = true;
    rx.receiver_index = 0;
    rx.position = {2.5, 3.5, 0};
    rx.heading = 0.0;  // +x

    VehicleState other;
    other.id = 1;
    other.position = {2.5, 12.5, 0};
    other.heading = pi / 2;

    Scene scene;
    scene.vehicles = {rx, other};

    const CoordMatrix m = coord_matrix(sc, scene, grid, {0.5, 8.5, 6}, rx, 3);
    CHECK(m.at(0, 8) == kCoordTransmitter);
    CHECK(m.at(2, 3) == 3);  // gradient start at the receiver cell
    CHECK(m.at(3, 3) == 4);
    CHECK(m.at(4, 3) == 5);
    CHECK(m.at(5, 3) == 0);
    CHECK(m.at(7, 5) == kCoordScatterer);   // building footprint
    CHECK(m.at(2, 12) == kCoordScatterer);  // other vehicle
    // value set is exactly {0, 1, 3, 4, 5, 10}
    for (auto v : m.values)
        CHECK((v == 0 || v == 1 || v == 3 || v == 4 || v == 5 || v == 10));
}

TEST_CASE("gradient run truncates at the grid edge and follows -y headings") {
    const Scenario sc = empty_scenario();
    GridSpec grid;
    grid.origin = {0, 0, 0};
    grid.cell_size = {1, 1, 1};
    grid.dims = {8, 8, 1};
    VehicleState rx;
    rx.position = {4.5, 1.5, 0};
    rx.heading = -pi / 2;  // -y
    Scene scene;
    scene.vehicles = {rx};
    const CoordMatrix m = coord_matrix(sc, scene, grid, {7.5, 7.5, 0}, rx, 4);
    CHECK(m.at(4, 1) == 3);
    CHECK(m.at(4, 0) == 4);  // truncated after two cells
    int gradient_cells = 0;
    for (auto v : m.values)
        if (v >= 3 && v != 10) ++gradient_cells;
    CHECK(gradient_cells == 2);
}

TEST_CASE("coord matrix rejects out-of-grid endpoints") {
    const Scenario sc = empty_scenario();
    GridSpec grid;
    grid.origin = {0, 0, 0};
    grid.cell_size = {1, 1, 1};
    grid.dims = {4, 4, 1};
    VehicleState rx;
    rx.position = {2, 2, 0};
    Scene scene;
    scene.vehicles = {rx};
    CHECK_THROWS_AS((void)coord_matrix(sc, scene, grid, {9, 1, 0}, rx, 3),
                    std::invalid_argument);
    rx.position = {-3, 2, 0};
    scene.vehicles = {rx};
    CHECK_THROWS_AS((void)coord_matrix(sc, scene, grid, {1, 1, 0}, rx, 3),
                    std::invalid_argument);
}

TEST_CASE("default grids cover the scenario bounds") {
    const Scenario urban = scenario_preset("t001").scenario;
    const GridSpec vg = default_voxel_grid(urban);
    CHECK(vg.dims[0] == 20);
    CHECK(vg.dims[1] == 200);
    CHECK(vg.dims[2] == 10);
    const GridSpec cg = default_coord_grid(urban);
    CHECK(cg.dims[0] == 64);
    CHECK(cg.dims[1] == 64);
    CHECK(cg.cell_size.y == doctest::Approx(200.0 / 64.0));

    const Scenario ring = scenario_preset("t002").scenario;
    const GridSpec rg = default_voxel_grid(ring);
    CHECK(rg.dims[0] == rg.dims[1]);
    CHECK(rg.dims[2] >= 5);
    CHECK(rg.dims[2] * rg.cell_size.z >= ring.bounds_hi.z);
}

TEST_CASE("generated scenes produce conformant voxel grids") {
    const Preset p = scenario_preset("t001");
    const Episode ep = simulate_episode(p.scenario, 4, 2, 77, 0);
    const GridSpec grid = default_voxel_grid(p.scenario);
    for (const Scene& s : ep.scenes) {
        const VehicleState& rx = s.receiver(0);
        const BaseStation& bs = p.scenario.bs[static_cast<std::size_t>(s.serving_bs[0])];
        const PointCloud cloud =
            virtual_lidar(p.scenario, s, Pose{rx.antenna_pos(), rx.heading}, 128, 8, 120.0,
                          -0.26, 0.26, rx.id);
        const VoxelGrid g = voxelize(cloud, grid, bs.pos, rx.antenna_pos());
        const auto h = value_histogram(g.values);
        CHECK(h.at(kCellBs) == 1);
        CHECK(h.at(kCellUe) == 1);
        for (const auto& [value, count] : h)
            CHECK((value == kCellFree || value == kCellObstacle || value == kCellBs ||
                   value == kCellUe));
        CHECK(h.count(kCellObstacle) == 1);  // lidar sees the canyon walls
    }
}

}  // TEST_SUITE
