#include "foodmet/sfmio/bundle.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <vector>

namespace foodmet::sfmio {

void PinholeCamera::validate() const {
  if (!(fx > 0) || !(fy > 0)) throw ParameterError("camera focal lengths must be positive");
  if (width <= 0 || height <= 0) throw ParameterError("camera size must be positive");
  if (!(cx >= 0 && cx < width && cy >= 0 && cy < height)) {
    throw ParameterError("principal point outside the image");
  }
}

std::optional<Pixel> project(const PinholeCamera& cam, const Vec3& world) {
  const Vec3 q = cam.pose.apply(world);
  if (q.z() <= 0.0) return std::nullopt;
  return Pixel{cam.fx * q.x() / q.z() + cam.cx, cam.fy * q.y() / q.z() + cam.cy};
}

Vec3 unproject(const PinholeCamera& cam, const Pixel& pixel, double depth) {
  const Vec3 q((pixel.u - cam.cx) / cam.fx * depth,
               (pixel.v - cam.cy) / cam.fy * depth, depth);
  return cam.pose.inverse().apply(q);
}

Mat3 quaternion_to_rotation(double qw, double qx, double qy, double qz) {
  const double norm = std::sqrt(qw * qw + qx * qx + qy * qy + qz * qz);
  if (!(norm > 1e-12) || !std::isfinite(norm)) {
    throw ParameterError("quaternion has zero or non-finite norm");
  }
  return Eigen::Quaterniond(qw / norm, qx / norm, qy / norm, qz / norm)
      .toRotationMatrix();
}

namespace {

struct Line {
  std::size_t number;
  std::string text;
};

// All lines except '#' comments. Blank lines are kept: images.txt uses an
// empty second line for images without 2D observations.
std::vector<Line> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<Line> lines;
  std::string text;
  std::size_t n = 0;
  while (std::getline(in, text)) {
    ++n;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    if (!text.empty() && text.front() == '#') continue;
    lines.push_back({n, text});
  }
  return lines;
}

std::vector<std::string> tokens_of(const std::string& line) {
  std::istringstream ss(line);
  std::vector<std::string> out;
  for (std::string t; ss >> t;) out.push_back(t);
  return out;
}

template <typename T>
T number(const std::string& token, const Line& line, const char* field) {
  T value{};
  const char* end = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(token.data(), end, value);
  if (ec != std::errc{} || ptr != end) {
    throw ParseError(std::string("bad ") + field + " '" + token + "'", line.number,
                     ParseError::Unit::kLine);
  }
  return value;
}

bool blank(const std::string& s) {
  return s.find_first_not_of(" \t") == std::string::npos;
}

}  // namespace

SfmBundle parse_bundle(const std::filesystem::path& dir) {
  std::map<long long, PinholeCamera> intrinsics;
  for (const Line& line : read_lines(dir / "cameras.txt")) {
    if (blank(line.text)) continue;
    const auto t = tokens_of(line.text);
    if (t.size() < 4) throw ParseError("short camera line", line.number, ParseError::Unit::kLine);
    PinholeCamera cam;
    const auto id = number<long long>(t[0], line, "camera id");
    cam.width = number<int>(t[2], line, "width");
    cam.height = number<int>(t[3], line, "height");
    if (t[1] == "PINHOLE") {
      if (t.size() != 8) throw ParseError("PINHOLE needs fx fy cx cy", line.number, ParseError::Unit::kLine);
      cam.fx = number<double>(t[4], line, "fx");
      cam.fy = number<double>(t[5], line, "fy");
      cam.cx = number<double>(t[6], line, "cx");
      cam.cy = number<double>(t[7], line, "cy");
    } else if (t[1] == "SIMPLE_PINHOLE") {
      if (t.size() != 7) throw ParseError("SIMPLE_PINHOLE needs f cx cy", line.number, ParseError::Unit::kLine);
      cam.fx = cam.fy = number<double>(t[4], line, "f");
      cam.cx = number<double>(t[5], line, "cx");
      cam.cy = number<double>(t[6], line, "cy");
    } else {
      throw UnsupportedModelError("unsupported camera model '" + t[1] + "'",
                                  line.number, ParseError::Unit::kLine);
    }
    intrinsics[id] = cam;
  }

  SfmBundle bundle;
  const auto image_lines = read_lines(dir / "images.txt");
  std::size_t i = 0;
  while (i < image_lines.size()) {
    const Line& line = image_lines[i];
    if (blank(line.text)) {  // stray blank between records or at EOF
      ++i;
      continue;
    }
    const auto t = tokens_of(line.text);
    if (t.size() < 10) throw ParseError("short image line", line.number, ParseError::Unit::kLine);
    const double qw = number<double>(t[1], line, "qw");
    const double qx = number<double>(t[2], line, "qx");
    const double qy = number<double>(t[3], line, "qy");
    const double qz = number<double>(t[4], line, "qz");
    const Vec3 trans(number<double>(t[5], line, "tx"), number<double>(t[6], line, "ty"),
                     number<double>(t[7], line, "tz"));
    const auto cam_id = number<long long>(t[8], line, "camera id");
    // Names may contain spaces; everything after the camera id is the name.
    std::string name = t[9];
    for (std::size_t k = 10; k < t.size(); ++k) name += " " + t[k];

    Mat3 rotation;
    try {
      rotation = quaternion_to_rotation(qw, qx, qy, qz);
    } catch (const ParameterError& e) {
      throw ParseError(e.what(), line.number, ParseError::Unit::kLine);
    }
    auto cam_it = intrinsics.find(cam_id);
    if (cam_it == intrinsics.end()) {
      throw ParseError("image references unknown camera " + t[8], line.number,
                       ParseError::Unit::kLine);
    }
    PinholeCamera cam = cam_it->second;
    cam.pose = RigidTransform(rotation, trans);
    if (!bundle.cameras.emplace(name, cam).second) {
      throw ParseError("duplicate image name '" + name + "'", line.number,
                       ParseError::Unit::kLine);
    }
    // The following line lists 2D observations (possibly empty).
    i += 2;
  }

  for (const Line& line : read_lines(dir / "points3D.txt")) {
    if (blank(line.text)) continue;
    const auto t = tokens_of(line.text);
    if (t.size() < 4) throw ParseError("short point line", line.number, ParseError::Unit::kLine);
    bundle.cloud.points.emplace_back(number<double>(t[1], line, "x"),
                                     number<double>(t[2], line, "y"),
                                     number<double>(t[3], line, "z"));
  }
  if (bundle.cloud.empty()) throw StructuralError("bundle has no 3D points");
  return bundle;
}

void write_bundle(const SfmBundle& bundle, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream cams(dir / "cameras.txt");
  std::ofstream imgs(dir / "images.txt");
  std::ofstream pts(dir / "points3D.txt");
  if (!cams || !imgs || !pts) throw IoError("cannot write bundle to " + dir.string());

  char buf[512];
  cams << "# Camera list with one line of data per camera:\n"
       << "#   CAMERA_ID, MODEL, WIDTH, HEIGHT, PARAMS[]\n";
  imgs << "# Image list with two lines of data per image:\n"
       << "#   IMAGE_ID, QW, QX, QY, QZ, TX, TY, TZ, CAMERA_ID, NAME\n"
       << "#   POINTS2D[] as (X, Y, POINT3D_ID)\n";
  int id = 1;
  for (const auto& [name, cam] : bundle.cameras) {
    std::snprintf(buf, sizeof(buf), "%d PINHOLE %d %d %.17g %.17g %.17g %.17g\n", id,
                  cam.width, cam.height, cam.fx, cam.fy, cam.cx, cam.cy);
    cams << buf;
    const Eigen::Quaterniond q(cam.pose.rotation());
    const Vec3& t = cam.pose.translation();
    std::snprintf(buf, sizeof(buf), "%d %.17g %.17g %.17g %.17g %.17g %.17g %.17g %d ", id,
                  q.w(), q.x(), q.y(), q.z(), t.x(), t.y(), t.z(), id);
    imgs << buf << name << "\n\n";
    ++id;
  }
  pts << "# 3D point list with one line of data per point:\n"
      << "#   POINT3D_ID, X, Y, Z, R, G, B, ERROR, TRACK[] as (IMAGE_ID, POINT2D_IDX)\n";
  for (std::size_t k = 0; k < bundle.cloud.size(); ++k) {
    const Vec3& p = bundle.cloud.points[k];
    std::snprintf(buf, sizeof(buf), "%zu %.17g %.17g %.17g 128 128 128 0\n", k + 1, p.x(),
                  p.y(), p.z());
    pts << buf;
  }
  if (!cams || !imgs || !pts) throw IoError("failed writing bundle to " + dir.string());
}

ProjectedCloud::ProjectedCloud(const PinholeCamera& cam, const PointCloud& cloud) {
  indices_.reserve(cloud.size());
  pixels_.reserve(cloud.size());
  for (std::uint32_t i = 0; i < cloud.size(); ++i) {
    if (auto px = project(cam, cloud.points[i])) {
      indices_.push_back(i);
      pixels_.push_back(*px);
    }
  }
}

std::uint32_t ProjectedCloud::nearest_index(const Pixel& pixel) const {
  if (indices_.empty()) throw NoCandidateError("no cloud point in front of the camera");
  double best = std::numeric_limits<double>::infinity();
  std::uint32_t best_index = indices_.front();
  for (std::size_t k = 0; k < pixels_.size(); ++k) {
    const double du = pixels_[k].u - pixel.u;
    const double dv = pixels_[k].v - pixel.v;
    const double d = du * du + dv * dv;
    if (d < best) {  // strict: ascending indices keep the lowest on ties
      best = d;
      best_index = indices_[k];
    }
  }
  return best_index;
}

Vec3 nearest_projected_point(const PinholeCamera& cam, const PointCloud& cloud,
                             const Pixel& pixel) {
  if (cloud.empty()) throw ParameterError("nearest_projected_point: empty cloud");
  return cloud.points[ProjectedCloud(cam, cloud).nearest_index(pixel)];
}

}  // namespace foodmet::sfmio
