#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "dot/errors.hpp"
#include "dot/geo.hpp"
#include "dot/rng.hpp"

using namespace dot;

namespace {

CameraIntrinsics hd_camera() { return {1000, 1000, 960, 540, 1920, 1080}; }

CameraPose random_pose(Rng& rng) {
  CameraPose p;
  p.altitude_agl = rng.uniform(10, 150);
  p.pitch_deg = rng.uniform(-90, -30);
  p.yaw_deg = rng.uniform(-180, 360);
  p.drone_xy = {rng.uniform(-500, 500), rng.uniform(-500, 500)};
  return p;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("pixel_to_ground examples") {
  const auto k = hd_camera();
  CameraPose nadir;
  nadir.altitude_agl = 100;
  nadir.drone_xy = {12.5, -7.25};
  auto g = pixel_to_ground({960, 540}, k, nadir);
  CHECK(g.east == 12.5);
  CHECK(g.north == -7.25);

  nadir.drone_xy = {0, 0};
  auto e = pixel_to_ground({1160, 540}, k, nadir);
  CHECK(e.east == doctest::Approx(20.0).epsilon(1e-12));
  CHECK(std::abs(e.north) < 1e-12);
  // Image up is the heading direction at nadir.
  CHECK(pixel_to_ground({960, 440}, k, nadir).north == doctest::Approx(10.0).epsilon(1e-12));

  CameraPose tilted;
  tilted.altitude_agl = 100;
  tilted.pitch_deg = -45;
  for (double yaw : {0.0, 30.0, 90.0, 200.0}) {
    tilted.yaw_deg = yaw;
    auto t = pixel_to_ground({960, 540}, k, tilted);
    CHECK(std::abs(std::hypot(t.east, t.north) - 100.0) < 1e-9);
    CHECK(std::abs(std::atan2(t.east, t.north) - std::remainder(yaw, 360.0) * M_PI / 180.0) < 1e-12);
  }
}

TEST_CASE("pixel_to_ground errors and validation") {
  const auto k = hd_camera();
  CameraPose shallow;
  shallow.altitude_agl = 50;
  shallow.pitch_deg = -5;
  // 5 degrees down, fy = 1000: rows above cy - 87.5 look above the horizon.
  CHECK_THROWS_AS(pixel_to_ground({960, 100}, k, shallow), NoIntersection);
  CHECK_NOTHROW(pixel_to_ground({960, 1000}, k, shallow));
  CameraPose bad;
  bad.altitude_agl = 0;
  CHECK_THROWS_AS(pixel_to_ground({0, 0}, k, bad), ValidationError);
  bad.altitude_agl = 10;
  bad.pitch_deg = 0;
  CHECK_THROWS_AS(pixel_to_ground({0, 0}, k, bad), ValidationError);
  bad.pitch_deg = -91;
  CHECK_THROWS_AS(pixel_to_ground({0, 0}, k, bad), ValidationError);
  CameraIntrinsics badk = k;
  badk.cx = 3000;
  CHECK_THROWS_AS(pixel_to_ground({0, 0}, badk, CameraPose{10, -90, 0, {0, 0}}), ValidationError);
}

TEST_CASE("geometry properties") {
  const auto k = hd_camera();
  Rng rng(31);
  double worst = 0;
  int roundtrips = 0;
  while (roundtrips < 1000) {
    CameraPose pose = random_pose(rng);
    const Point px(rng.uniform(0, 1920), rng.uniform(0, 1080));
    GroundPoint g;
    try {
      g = pixel_to_ground(px, k, pose);
    } catch (const NoIntersection&) {
      continue;
    }
    worst = std::max(worst, (ground_to_pixel({g.east, g.north}, k, pose) - px).norm());
    ++roundtrips;

    // Yaw leaves ground range unchanged.
    CameraPose turned = pose;
    turned.yaw_deg += rng.uniform(0, 360);
    auto g2 = pixel_to_ground(px, k, turned);
    const double r1 = std::hypot(g.east - pose.drone_xy.x(), g.north - pose.drone_xy.y());
    const double r2 = std::hypot(g2.east - pose.drone_xy.x(), g2.north - pose.drone_xy.y());
    CHECK(std::abs(r1 - r2) < 1e-9 * std::max(1.0, r1));
  }
  CHECK(worst < 1e-6);

  CameraPose nadir{40, -90, 17, {0, 0}};
  CameraPose higher{80, -90, 17, {0, 0}};
  for (int i = 0; i < 50; ++i) {
    const Point px(rng.uniform(0, 1920), rng.uniform(0, 1080));
    auto a = pixel_to_ground(px, k, nadir), b = pixel_to_ground(px, k, higher);
    CHECK(b.east == doctest::Approx(2 * a.east).epsilon(1e-12));
    CHECK(b.north == doctest::Approx(2 * a.north).epsilon(1e-12));
  }
}

TEST_CASE("geodetic conversion") {
  GeoOrigin o{51.5, -0.12};
  GroundPoint g;
  g.east = 120;
  g.north = -340;
  attach_geodetic(g, o);
  REQUIRE(g.lat.has_value());
  CHECK(*g.lat < o.lat_deg);
  CHECK(*g.lon > o.lon_deg);
  auto back = geodetic_to_local(*g.lat, *g.lon, o);
  CHECK(std::abs(back.x() - 120) < 1e-9);
  CHECK(std::abs(back.y() + 340) < 1e-9);
  // One degree of latitude is about 111.3 km on this sphere.
  CHECK(geodetic_to_local(52.5, -0.12, o).y() == doctest::Approx(111319.49).epsilon(1e-6));
}

TEST_CASE("line_cross_count examples") {
  // A 60 px jump needs a radius above the 50 px default to associate.
  LineCrossConfig cfg{540, 80};
  CHECK(line_cross_count({{0, {{100, 500, .9}}}, {1, {{100, 560, .9}}}}, {540, 50}).count() == 0);
  auto single = line_cross_count({{0, {{100, 500, .9}}}, {1, {{102, 560, .9}}}}, cfg);
  CHECK(single.count() == 1);
  CHECK(single.crossings[0].frame == 1);
  CHECK(single.running_count == std::vector<Index>{0, 1});

  auto osc = line_cross_count({{0, {{100, 530, .9}}}, {1, {{100, 550, .9}}}, {2, {{100, 530, .9}}}}, cfg);
  CHECK(osc.count() == 2);

  auto two = line_cross_count({{0, {{100, 500, .9}, {900, 100, .8}}}, {1, {{100, 545, .9}, {905, 110, .8}}}}, cfg);
  CHECK(two.count() == 1);
  CHECK(two.crossings[0].detection.x == 100);

  // Too far apart to associate.
  CHECK(line_cross_count({{0, {{100, 450, .9}}}, {1, {{100, 600, .9}}}}, cfg).count() == 0);
  // A point landing exactly on the line counts as the lower side.
  CHECK(line_cross_count({{0, {{100, 539, .9}}}, {1, {{100, 540, .9}}}}, cfg).count() == 1);

  CHECK_THROWS_AS(line_cross_count({{3, {}}, {3, {}}}, cfg), ValidationError);
  CHECK_THROWS_AS(line_cross_count({{3, {}}, {1, {}}}, cfg), ValidationError);
}

TEST_CASE("line_cross_count ignores detections far from the line") {
  Rng rng(32);
  LineCrossConfig cfg{540, 50};
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<FrameDetections> base;
    for (int f = 0; f < 8; ++f) {
      FrameDetections fd{f * 2, {}};
      for (int i = 0; i < 4; ++i) fd.points.push_back({200.0 * i + 50, 540 + rng.uniform(-40, 40), .9});
      base.push_back(fd);
    }
    auto with = base;
    for (auto& fd : with)
      for (int i = 0; i < 3; ++i) {
        // Keep distractors more than two radii from the line.
        const double y = rng.below(2) ? rng.uniform(0, 439) : rng.uniform(641, 1080);
        fd.points.push_back({rng.uniform(0, 1920), y, .5});
      }
    CHECK(line_cross_count(base, cfg).count() == line_cross_count(with, cfg).count());
  }
}

TEST_CASE("pose and ground-point files") {
  const std::string path = "test_geo_poses.csv";
  std::map<std::int64_t, CameraPose> poses{{1, {55.5, -60, 12.25, {1, 2}}}, {4, {70, -90, 0, {-3.5, 0.1}}}};
  write_poses(path, poses);
  auto back = read_poses(path);
  REQUIRE(back.size() == 2);
  CHECK(back.at(1).altitude_agl == 55.5);
  CHECK(back.at(4).drone_xy == Eigen::Vector2d(-3.5, 0.1));

  std::ofstream(path) << "frame,altitude_m,pitch_deg,yaw_deg,east_m,north_m\n1,50,10,0,0,0\n";
  CHECK_THROWS_AS(read_poses(path), ValidationError);
  std::ofstream(path) << "frame,alt,pitch_deg,yaw_deg,east_m,north_m\n";
  CHECK_THROWS_AS(read_poses(path), ValidationError);

  GroundPoint g;
  g.frame = 3;
  g.east = 1.5;
  g.north = -2;
  write_ground_points(path, {g}, 7);
  CHECK(slurp(path) == "frame,east_m,north_m\n3,1.500,-2.000\ncount=7\n");
  std::remove(path.c_str());
}
