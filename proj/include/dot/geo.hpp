#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "dot/points.hpp"

namespace dot {

struct CameraIntrinsics {
  double fx = 0.0, fy = 0.0;  // focal lengths, pixels
  double cx = 0.0, cy = 0.0;  // principal point, pixels
  Index width = 0, height = 0;
  void validate() const;
};

/// World frame is local ENU with the ground at up = 0. The camera looks
/// along +z with x to the image right and y to the image bottom.
struct CameraPose {
  double altitude_agl = 0.0;  // metres
  double pitch_deg = -90.0;   // -90 looks straight down, 0 is the horizon
  double yaw_deg = 0.0;       // clockwise from north
  Eigen::Vector2d drone_xy = Eigen::Vector2d::Zero();  // (east, north) metres
  void validate() const;
};

struct GeoOrigin {
  double lat_deg = 0.0;
  double lon_deg = 0.0;
};

struct GroundPoint {
  double east = 0.0, north = 0.0;
  std::optional<double> lat, lon;
  std::int64_t frame = 0;
};

/// Camera-to-world rotation: pitch about the east axis, then yaw about up.
Eigen::Matrix3d camera_to_world(const CameraPose& pose);

/// Intersects the pixel ray with the ground. Throws NoIntersection when the
/// ray does not descend.
GroundPoint pixel_to_ground(const Point& pixel, const CameraIntrinsics& k, const CameraPose& pose);
/// Forward pinhole projection of a ground location. Throws NoIntersection
/// when the location is behind the camera.
Point ground_to_pixel(const Eigen::Vector2d& east_north, const CameraIntrinsics& k, const CameraPose& pose);

/// Local tangent-plane conversion around `origin` (sub-kilometre accuracy).
void attach_geodetic(GroundPoint& g, const GeoOrigin& origin);
Eigen::Vector2d geodetic_to_local(double lat_deg, double lon_deg, const GeoOrigin& origin);

struct FrameDetections {
  std::int64_t frame = 0;
  ScoredPoints points;
};

struct LineCrossConfig {
  double line_y = 0.0;
  double match_radius = 50.0;
};

struct Crossing {
  std::int64_t frame = 0;  // frame in which the detection is on the new side
  ScoredPoint detection;
};

struct LineCrossResult {
  std::vector<Crossing> crossings;
  std::vector<Index> running_count;  // one entry per input frame
  Index count() const { return static_cast<Index>(crossings.size()); }
};

/// Frame-to-frame association by mutual nearest neighbour within the radius;
/// every associated pair that changes side of line_y counts once. Frame ids
/// must be strictly increasing.
LineCrossResult line_cross_count(const std::vector<FrameDetections>& frames, const LineCrossConfig& cfg);

/// Reads `frame,altitude_m,pitch_deg,yaw_deg,east_m,north_m` rows.
std::map<std::int64_t, CameraPose> read_poses(const std::string& path);
void write_poses(const std::string& path, const std::map<std::int64_t, CameraPose>& poses);

/// Writes `frame,east_m,north_m[,lat,lon]` rows and a final `count=<n>` line.
void write_ground_points(const std::string& path, const std::vector<GroundPoint>& points, Index count);
void write_ground_points(std::ostream& out, const std::vector<GroundPoint>& points, Index count);

}  // namespace dot
