#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "stocs/error.hpp"
#include "stocs/geometry.hpp"

namespace stocs {

/// Shortest decimal text that reads back to the same double.
inline std::string format_double(double v) {
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

inline std::optional<double> parse_double(std::string_view text) {
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) return std::nullopt;
  return v;
}

namespace detail {

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

inline Error parse_error(std::size_t line, const std::string& what) {
  return Error(ErrorCode::ParseError, "line " + std::to_string(line) + ": " + what);
}

}  // namespace detail

/// Point cloud plus the optional per-point membership weights.
struct CloudData {
  PointCloud cloud;
  std::optional<std::vector<double>> weights;
};

/// Reads the ASCII PLY subset: one `vertex` element whose properties include
/// x, y, z and optionally nx, ny, nz and prob. Other vertex properties are
/// read and ignored.
inline CloudData read_cloud(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  const auto next_line = [&]() -> bool {
    if (!std::getline(in, line)) return false;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  };

  if (!next_line() || detail::split_ws(line) != std::vector<std::string_view>{"ply"}) {
    throw detail::parse_error(1, "expected 'ply'");
  }
  std::optional<std::size_t> count;
  std::vector<std::string> props;
  bool in_vertex = false;
  bool saw_format = false;
  for (;;) {
    if (!next_line()) throw detail::parse_error(line_no + 1, "missing end_header");
    const auto tok = detail::split_ws(line);
    if (tok.empty() || tok[0] == "comment" || tok[0] == "obj_info") continue;
    if (tok[0] == "end_header") break;
    if (tok[0] == "format") {
      if (tok.size() != 3 || tok[1] != "ascii") throw detail::parse_error(line_no, "only 'format ascii 1.0' is supported");
      saw_format = true;
    } else if (tok[0] == "element") {
      if (tok.size() != 3) throw detail::parse_error(line_no, "malformed element line");
      if (tok[1] != "vertex") throw detail::parse_error(line_no, "unsupported element '" + std::string(tok[1]) + "'");
      if (count) throw detail::parse_error(line_no, "duplicate vertex element");
      std::size_t n = 0;
      const auto res = std::from_chars(tok[2].data(), tok[2].data() + tok[2].size(), n);
      if (res.ec != std::errc() || res.ptr != tok[2].data() + tok[2].size()) {
        throw detail::parse_error(line_no, "bad vertex count");
      }
      count = n;
      in_vertex = true;
    } else if (tok[0] == "property") {
      if (!in_vertex) throw detail::parse_error(line_no, "property outside the vertex element");
      if (tok.size() != 3) throw detail::parse_error(line_no, "only scalar properties are supported");
      static constexpr std::array<std::string_view, 6> kTypes{"float", "double", "float32", "float64", "int", "uchar"};
      if (std::find(kTypes.begin(), kTypes.end(), tok[1]) == kTypes.end()) {
        throw detail::parse_error(line_no, "unsupported property type '" + std::string(tok[1]) + "'");
      }
      props.emplace_back(tok[2]);
    } else {
      throw detail::parse_error(line_no, "unexpected header keyword '" + std::string(tok[0]) + "'");
    }
  }
  if (!saw_format) throw detail::parse_error(line_no, "missing format line");
  if (!count) throw detail::parse_error(line_no, "missing vertex element");

  const auto find = [&](std::string_view name) -> int {
    for (std::size_t i = 0; i < props.size(); ++i) {
      if (props[i] == name) return static_cast<int>(i);
    }
    return -1;
  };
  const std::array<int, 3> xyz{find("x"), find("y"), find("z")};
  const std::array<int, 3> nxyz{find("nx"), find("ny"), find("nz")};
  const int prob = find("prob");
  if (xyz[0] < 0 || xyz[1] < 0 || xyz[2] < 0) throw detail::parse_error(line_no, "x, y and z are required");
  const int normal_props = (nxyz[0] >= 0) + (nxyz[1] >= 0) + (nxyz[2] >= 0);
  if (normal_props != 0 && normal_props != 3) throw detail::parse_error(line_no, "normals need nx, ny and nz");

  std::vector<Point3> pts;
  std::vector<UnitVec3> nrm;
  std::vector<double> weights;
  pts.reserve(*count);
  std::vector<double> values(props.size());
  while (pts.size() < *count) {
    if (!next_line()) {
      throw Error(ErrorCode::CountMismatch, "header declares " + std::to_string(*count) + " vertices, found " +
                                                std::to_string(pts.size()));
    }
    const auto tok = detail::split_ws(line);
    if (tok.empty()) continue;
    if (tok.size() != props.size()) {
      throw detail::parse_error(line_no, "expected " + std::to_string(props.size()) + " values, found " +
                                             std::to_string(tok.size()));
    }
    for (std::size_t i = 0; i < tok.size(); ++i) {
      const auto v = parse_double(tok[i]);
      if (!v) throw detail::parse_error(line_no, "not a number: '" + std::string(tok[i]) + "'");
      if (!std::isfinite(*v)) {
        throw Error(ErrorCode::NonFiniteValue, "line " + std::to_string(line_no) + ": non-finite value");
      }
      values[i] = *v;
    }
    pts.emplace_back(values[xyz[0]], values[xyz[1]], values[xyz[2]]);
    if (normal_props == 3) nrm.emplace_back(values[nxyz[0]], values[nxyz[1]], values[nxyz[2]]);
    if (prob >= 0) {
      if (values[prob] < 0.0) throw detail::parse_error(line_no, "prob must be non-negative");
      weights.push_back(values[prob]);
    }
  }
  while (next_line()) {
    if (!detail::split_ws(line).empty()) {
      throw Error(ErrorCode::CountMismatch,
                  "header declares " + std::to_string(*count) + " vertices but more data follows (line " +
                      std::to_string(line_no) + ")");
    }
  }
  CloudData out{PointCloud(std::move(pts), std::move(nrm)), std::nullopt};
  if (prob >= 0) out.weights = std::move(weights);
  return out;
}

inline CloudData load_cloud(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  return read_cloud(in);
}

inline void write_cloud(std::ostream& out, const PointCloud& cloud, const std::vector<double>* weights = nullptr) {
  if (weights && weights->size() != cloud.size()) {
    throw Error(ErrorCode::InvalidInput, "weight count differs from point count");
  }
  out << "ply\nformat ascii 1.0\nelement vertex " << cloud.size() << "\n";
  out << "property double x\nproperty double y\nproperty double z\n";
  if (cloud.has_normals()) out << "property double nx\nproperty double ny\nproperty double nz\n";
  if (weights) out << "property double prob\n";
  out << "end_header\n";
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto& p = cloud.point(i);
    out << format_double(p.x()) << ' ' << format_double(p.y()) << ' ' << format_double(p.z());
    if (cloud.has_normals()) {
      const auto& n = cloud.normal(i);
      out << ' ' << format_double(n.x()) << ' ' << format_double(n.y()) << ' ' << format_double(n.z());
    }
    if (weights) out << ' ' << format_double((*weights)[i]);
    out << '\n';
  }
}

inline void save_cloud(const std::string& path, const PointCloud& cloud, const std::vector<double>* weights = nullptr) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  write_cloud(out, cloud, weights);
  if (!out) throw Error(ErrorCode::IoError, "write failed: " + path);
}

/// Pose file: four rows of four numbers (homogeneous model-to-scene
/// transform) and an optional `score <v>` line.
struct PoseFile {
  RigidTransform transform;
  std::optional<double> score;
};

inline void write_pose(std::ostream& out, const RigidTransform& t, std::optional<double> score = std::nullopt) {
  const Eigen::Matrix4d m = t.matrix();
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) out << (c ? " " : "") << format_double(m(r, c));
    out << '\n';
  }
  if (score) out << "score " << format_double(*score) << '\n';
}

inline void save_pose(const std::string& path, const RigidTransform& t, std::optional<double> score = std::nullopt) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  write_pose(out, t, score);
  if (!out) throw Error(ErrorCode::IoError, "write failed: " + path);
}

inline PoseFile read_pose(std::istream& in) {
  Eigen::Matrix4d m;
  std::string line;
  std::size_t line_no = 0;
  int row = 0;
  PoseFile out;
  while (std::getline(in, line)) {
    ++line_no;
    const auto tok = detail::split_ws(line);
    if (tok.empty()) continue;
    if (row < 4) {
      if (tok.size() != 4) throw detail::parse_error(line_no, "expected 4 numbers");
      for (int c = 0; c < 4; ++c) {
        const auto v = parse_double(tok[static_cast<std::size_t>(c)]);
        if (!v) throw detail::parse_error(line_no, "not a number");
        if (!std::isfinite(*v)) throw Error(ErrorCode::NonFiniteValue, "line " + std::to_string(line_no));
        m(row, c) = *v;
      }
      ++row;
    } else if (tok.size() == 2 && tok[0] == "score" && !out.score) {
      const auto v = parse_double(tok[1]);
      if (!v) throw detail::parse_error(line_no, "bad score");
      out.score = *v;
    } else {
      throw detail::parse_error(line_no, "unexpected content after the matrix");
    }
  }
  if (row < 4) throw detail::parse_error(line_no + 1, "pose needs 4 rows");
  if (m.row(3) != Eigen::RowVector4d(0, 0, 0, 1)) {
    throw Error(ErrorCode::ParseError, "pose last row must be 0 0 0 1");
  }
  out.transform = RigidTransform::from_matrix(m);
  return out;
}

inline PoseFile load_pose(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  return read_pose(in);
}

}  // namespace stocs
