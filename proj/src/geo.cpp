#include "dot/geo.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include "dot/csv.hpp"
#include "dot/errors.hpp"

namespace dot {

namespace {

constexpr double kEarthRadius = 6378137.0;  // WGS84 equatorial, metres
constexpr double kDescentEps = 1e-12;

double rad(double deg) { return deg * std::numbers::pi / 180.0; }
double deg(double r) { return r * 180.0 / std::numbers::pi; }

// cos and sin of an angle in degrees, exact at multiples of 90 so the nadir
// and level poses produce exact axis-aligned rays.
Eigen::Vector2d cos_sin(double degrees) {
  const double q = degrees / 90.0;
  if (q == std::round(q)) {
    switch (((static_cast<long long>(q) % 4) + 4) % 4) {
      case 0: return {1.0, 0.0};
      case 1: return {0.0, 1.0};
      case 2: return {-1.0, 0.0};
      default: return {0.0, -1.0};
    }
  }
  return {std::cos(rad(degrees)), std::sin(rad(degrees))};
}

std::string fmt(const Point& p) {
  std::ostringstream os;
  os << "(" << p.x() << ", " << p.y() << ")";
  return os.str();
}

}  // namespace

void CameraIntrinsics::validate() const {
  if (!(fx > 0 && fy > 0)) throw ValidationError("focal lengths must be positive");
  if (width <= 0 || height <= 0) throw ValidationError("image size must be positive");
  if (!(cx >= 0 && cx <= double(width) && cy >= 0 && cy <= double(height)))
    throw ValidationError("principal point must lie inside the image");
}

void CameraPose::validate() const {
  if (!(altitude_agl > 0 && std::isfinite(altitude_agl))) throw ValidationError("altitude must be positive");
  if (!(pitch_deg >= -90.0 && pitch_deg < 0.0))
    throw ValidationError("gimbal pitch must lie in [-90, 0) degrees");
  if (!std::isfinite(yaw_deg) || !drone_xy.allFinite()) throw ValidationError("pose must be finite");
}

Eigen::Matrix3d camera_to_world(const CameraPose& pose) {
  // Columns: where camera x, y, z point when level and facing north.
  Eigen::Matrix3d base;
  base << 1, 0, 0,
          0, 0, 1,
          0, -1, 0;
  const Eigen::Vector2d p = cos_sin(pose.pitch_deg), y = cos_sin(pose.yaw_deg);
  Eigen::Matrix3d pitch, yaw;
  pitch << 1, 0, 0,
           0, p(0), -p(1),
           0, p(1), p(0);
  // Clockwise (seen from above) rotation by the heading.
  yaw << y(0), y(1), 0,
         -y(1), y(0), 0,
         0, 0, 1;
  return yaw * pitch * base;
}

GroundPoint pixel_to_ground(const Point& pixel, const CameraIntrinsics& k, const CameraPose& pose) {
  k.validate();
  pose.validate();
  const Eigen::Vector3d ray((pixel.x() - k.cx) / k.fx, (pixel.y() - k.cy) / k.fy, 1.0);
  const Eigen::Vector3d d = camera_to_world(pose) * ray;
  if (!(d.z() < -kDescentEps)) throw NoIntersection("pixel " + fmt(pixel) + " does not see the ground plane");
  const double s = pose.altitude_agl / -d.z();
  GroundPoint g;
  g.east = pose.drone_xy.x() + s * d.x();
  g.north = pose.drone_xy.y() + s * d.y();
  return g;
}

Point ground_to_pixel(const Eigen::Vector2d& east_north, const CameraIntrinsics& k, const CameraPose& pose) {
  k.validate();
  pose.validate();
  const Eigen::Vector3d v(east_north.x() - pose.drone_xy.x(), east_north.y() - pose.drone_xy.y(),
                          -pose.altitude_agl);
  const Eigen::Vector3d c = camera_to_world(pose).transpose() * v;
  if (!(c.z() > 0)) throw NoIntersection("ground location is behind the camera");
  return {k.fx * c.x() / c.z() + k.cx, k.fy * c.y() / c.z() + k.cy};
}

void attach_geodetic(GroundPoint& g, const GeoOrigin& origin) {
  g.lat = origin.lat_deg + deg(g.north / kEarthRadius);
  g.lon = origin.lon_deg + deg(g.east / (kEarthRadius * std::cos(rad(origin.lat_deg))));
}

Eigen::Vector2d geodetic_to_local(double lat_deg, double lon_deg, const GeoOrigin& origin) {
  return {rad(lon_deg - origin.lon_deg) * kEarthRadius * std::cos(rad(origin.lat_deg)),
          rad(lat_deg - origin.lat_deg) * kEarthRadius};
}

namespace {

// For each point in `from`, index of the nearest point in `to` within r, or -1.
std::vector<int> nearest(const ScoredPoints& from, const ScoredPoints& to, double r) {
  std::vector<int> out(from.size(), -1);
  for (std::size_t i = 0; i < from.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < to.size(); ++j) {
      const double d = std::hypot(from[i].x - to[j].x, from[i].y - to[j].y);
      if (d <= r && d < best) {
        best = d;
        out[i] = static_cast<int>(j);
      }
    }
  }
  return out;
}

}  // namespace

LineCrossResult line_cross_count(const std::vector<FrameDetections>& frames, const LineCrossConfig& cfg) {
  if (!(cfg.match_radius > 0)) throw ValidationError("match radius must be positive");
  for (std::size_t f = 1; f < frames.size(); ++f)
    if (frames[f].frame <= frames[f - 1].frame)
      throw ValidationError("frame ids must be strictly increasing; frame " + std::to_string(frames[f].frame) +
                            " follows " + std::to_string(frames[f - 1].frame));
  LineCrossResult res;
  auto side = [&](double y) { return y >= cfg.line_y; };
  for (std::size_t f = 0; f < frames.size(); ++f) {
    if (f > 0) {
      const auto& prev = frames[f - 1].points;
      const auto& cur = frames[f].points;
      const auto fwd = nearest(prev, cur, cfg.match_radius);
      const auto back = nearest(cur, prev, cfg.match_radius);
      for (std::size_t i = 0; i < prev.size(); ++i) {
        const int j = fwd[i];
        if (j < 0 || back[static_cast<std::size_t>(j)] != static_cast<int>(i)) continue;
        const auto& now = cur[static_cast<std::size_t>(j)];
        if (side(prev[i].y) != side(now.y)) res.crossings.push_back({frames[f].frame, now});
      }
    }
    res.running_count.push_back(res.count());
  }
  return res;
}

std::map<std::int64_t, CameraPose> read_poses(const std::string& path) {
  const auto t = csv::read(path);
  csv::expect_header(t, {"frame", "altitude_m", "pitch_deg", "yaw_deg", "east_m", "north_m"});
  std::map<std::int64_t, CameraPose> out;
  for (const auto& r : t.rows) {
    CameraPose p;
    const auto frame = csv::to_int(t, r, 0);
    p.altitude_agl = csv::to_double(t, r, 1);
    p.pitch_deg = csv::to_double(t, r, 2);
    p.yaw_deg = csv::to_double(t, r, 3);
    p.drone_xy = {csv::to_double(t, r, 4), csv::to_double(t, r, 5)};
    try {
      p.validate();
    } catch (const ValidationError& e) {
      throw ValidationError(path + ":" + std::to_string(r.line) + ": " + e.what());
    }
    if (!out.emplace(frame, p).second)
      throw ValidationError(path + ":" + std::to_string(r.line) + ": duplicate frame " + std::to_string(frame));
  }
  return out;
}

void write_poses(const std::string& path, const std::map<std::int64_t, CameraPose>& poses) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path);
  out << "frame,altitude_m,pitch_deg,yaw_deg,east_m,north_m\n";
  for (const auto& [f, p] : poses)
    out << f << "," << csv::format_exact(p.altitude_agl) << "," << csv::format_exact(p.pitch_deg) << ","
        << csv::format_exact(p.yaw_deg) << "," << csv::format_exact(p.drone_xy.x()) << ","
        << csv::format_exact(p.drone_xy.y()) << "\n";
}

void write_ground_points(const std::string& path, const std::vector<GroundPoint>& points, Index count) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path);
  write_ground_points(out, points, count);
}

void write_ground_points(std::ostream& out, const std::vector<GroundPoint>& points, Index count) {
  const bool geo = !points.empty() && points.front().lat.has_value();
  out << "frame,east_m,north_m" << (geo ? ",lat,lon" : "") << "\n";
  for (const auto& g : points) {
    out << g.frame << "," << csv::format_fixed(g.east, 3) << "," << csv::format_fixed(g.north, 3);
    if (geo) out << "," << csv::format_fixed(g.lat.value_or(0), 8) << "," << csv::format_fixed(g.lon.value_or(0), 8);
    out << "\n";
  }
  out << "count=" << count << "\n";
}

}  // namespace dot
