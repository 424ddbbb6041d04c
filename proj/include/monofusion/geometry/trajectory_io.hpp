#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "monofusion/common/error.hpp"
#include "monofusion/geometry/pose.hpp"

namespace mf {

struct StampedPose {
  double timestamp = 0.0;
  PoseSE3 pose;  // camera-to-world
};

using Trajectory = std::vector<StampedPose>;

/// TUM format: `timestamp tx ty tz qx qy qz qw` per line, '#' starts a comment line.
inline Trajectory parse_tum_trajectory(std::istream& in, const std::string& origin = "<trajectory>") {
  Trajectory out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ss(line);
    double v[8];
    for (double& x : v)
      if (!(ss >> x))
        fail(ErrorCode::FormatError, origin + ":" + std::to_string(line_no) + ": expected 8 numbers");
    std::string extra;
    if (ss >> extra)
      fail(ErrorCode::FormatError, origin + ":" + std::to_string(line_no) + ": trailing token '" + extra + "'");
    const Eigen::Quaterniond q(v[7], v[4], v[5], v[6]);
    if (!(q.norm() > 1e-9))
      fail(ErrorCode::FormatError, origin + ":" + std::to_string(line_no) + ": zero quaternion");
    out.push_back({v[0], PoseSE3::from_quaternion(q, Eigen::Vector3d(v[1], v[2], v[3]))});
  }
  return out;
}

inline Trajectory read_tum_trajectory(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::IoError, "cannot open trajectory " + path);
  return parse_tum_trajectory(in, path);
}

inline std::string format_tum_line(const StampedPose& sp) {
  const auto q = sp.pose.quaternion();
  const auto& t = sp.pose.translation();
  char buf[320];
  std::snprintf(buf, sizeof(buf), "%.6f %.17g %.17g %.17g %.17g %.17g %.17g %.17g", sp.timestamp, t.x(),
                t.y(), t.z(), q.x(), q.y(), q.z(), q.w());
  return buf;
}

inline std::string format_tum_trajectory(const Trajectory& traj) {
  std::string out = "# timestamp tx ty tz qx qy qz qw\n";
  for (const auto& sp : traj) {
    out += format_tum_line(sp);
    out += '\n';
  }
  return out;
}

inline void write_tum_trajectory(const std::string& path, const Trajectory& traj) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorCode::IoError, "cannot write trajectory " + path);
  out << format_tum_trajectory(traj);
}

}  // namespace mf
