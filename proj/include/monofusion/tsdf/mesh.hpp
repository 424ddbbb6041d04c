#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

#include "monofusion/common/binary_io.hpp"
#include "monofusion/common/error.hpp"
#include "monofusion/tsdf/volume.hpp"

namespace mf::tsdf {

struct TriangleMesh {
  std::vector<Eigen::Vector3d> vertices;
  std::vector<Rgb> colors;  // per vertex, [0, 1]
  std::vector<std::array<int, 3>> faces;

  [[nodiscard]] bool empty() const noexcept { return faces.empty(); }
};

namespace detail {

struct EdgeKey {
  std::uint64_t a, b;
  bool operator==(const EdgeKey&) const = default;
};

struct EdgeKeyHash {
  std::size_t operator()(const EdgeKey& k) const noexcept {
    return static_cast<std::size_t>(k.a * 0x9e3779b97f4a7c15ULL ^ (k.b + 0x632be59bd9b4e019ULL + (k.a << 6)));
  }
};

inline std::uint64_t pack_voxel(int i, int j, int k) noexcept {
  constexpr std::uint64_t mask = (1ULL << 21) - 1;
  return ((static_cast<std::uint64_t>(i) & mask) << 42) | ((static_cast<std::uint64_t>(j) & mask) << 21) |
         (static_cast<std::uint64_t>(k) & mask);
}

// Six tetrahedra sharing the cell diagonal 0-7 (corner bit 0 = +x, bit 1 = +y, bit 2 = +z).
// The split is the same in every cell, so neighbouring cells agree on shared faces.
inline constexpr std::array<std::array<int, 4>, 6> kTetrahedra{{
    {0, 1, 3, 7}, {0, 1, 5, 7}, {0, 2, 3, 7}, {0, 2, 6, 7}, {0, 4, 5, 7}, {0, 4, 6, 7},
}};

}  // namespace detail

/// Zero-level surface by marching tetrahedra over every cell whose eight corners are observed.
/// Vertices on shared edges are welded; faces are wound counter-clockwise seen from the
/// positive (free space) side.
inline TriangleMesh extract_mesh(const HashedTsdfVolume& vol) {
  TriangleMesh mesh;
  std::vector<const VoxelBlock*> order;
  order.reserve(vol.block_count());
  for (const auto& b : vol.blocks()) order.push_back(&b);
  std::sort(order.begin(), order.end(), [](const VoxelBlock* a, const VoxelBlock* b) { return a->coord < b->coord; });

  std::unordered_map<detail::EdgeKey, int, detail::EdgeKeyHash> edge_vertex;
  const double vs = vol.voxel_size();

  struct Corner {
    Eigen::Vector3i idx;
    const TsdfVoxel* v;
  };

  auto vertex_on_edge = [&](const Corner& a, const Corner& b) {
    std::uint64_t ka = detail::pack_voxel(a.idx.x(), a.idx.y(), a.idx.z());
    std::uint64_t kb = detail::pack_voxel(b.idx.x(), b.idx.y(), b.idx.z());
    const Corner* p = &a;
    const Corner* q = &b;
    if (ka > kb) {
      std::swap(ka, kb);
      std::swap(p, q);
    }
    const auto [it, inserted] = edge_vertex.try_emplace({ka, kb}, static_cast<int>(mesh.vertices.size()));
    if (inserted) {
      const double dp = p->v->tsdf, dq = q->v->tsdf;
      const double s = dp / (dp - dq);
      const Eigen::Vector3d pp = p->idx.cast<double>() * vs, pq = q->idx.cast<double>() * vs;
      mesh.vertices.push_back(pp + s * (pq - pp));
      const Rgb& cp = p->v->color;
      const Rgb& cq = q->v->color;
      mesh.colors.push_back({static_cast<float>(cp.r + s * (cq.r - cp.r)), static_cast<float>(cp.g + s * (cq.g - cp.g)),
                             static_cast<float>(cp.b + s * (cq.b - cp.b))});
    }
    return it->second;
  };

  auto emit = [&](int a, int b, int c, const Eigen::Vector3d& outward) {
    if (a == b || b == c || a == c) return;
    const Eigen::Vector3d n = (mesh.vertices[static_cast<std::size_t>(b)] - mesh.vertices[static_cast<std::size_t>(a)])
                                  .cross(mesh.vertices[static_cast<std::size_t>(c)] -
                                         mesh.vertices[static_cast<std::size_t>(a)]);
    if (n.dot(outward) < 0.0) std::swap(b, c);
    mesh.faces.push_back({a, b, c});
  };

  std::array<Corner, 8> cell;
  for (const VoxelBlock* block : order) {
    const int ox = block->coord.x * kBlockSide, oy = block->coord.y * kBlockSide, oz = block->coord.z * kBlockSide;
    for (int k = 0; k < kBlockSide; ++k)
      for (int j = 0; j < kBlockSide; ++j)
        for (int i = 0; i < kBlockSide; ++i) {
          bool complete = true;
          bool has_neg = false, has_pos = false;
          for (int c = 0; c < 8 && complete; ++c) {
            const Eigen::Vector3i idx(ox + i + (c & 1), oy + j + ((c >> 1) & 1), oz + k + ((c >> 2) & 1));
            const bool inside = i + (c & 1) < kBlockSide && j + ((c >> 1) & 1) < kBlockSide &&
                                k + ((c >> 2) & 1) < kBlockSide;
            const TsdfVoxel* v = inside ? &block->at(i + (c & 1), j + ((c >> 1) & 1), k + ((c >> 2) & 1))
                                        : vol.voxel(idx.x(), idx.y(), idx.z());
            if (!v || !v->observed()) complete = false;
            else {
              cell[static_cast<std::size_t>(c)] = {idx, v};
              (v->tsdf < 0.0 ? has_neg : has_pos) = true;
            }
          }
          if (!complete || !has_neg || !has_pos) continue;

          for (const auto& tet : detail::kTetrahedra) {
            std::array<const Corner*, 4> neg{}, pos{};
            int nn = 0, np = 0;
            for (int c : tet) {
              const Corner& corner = cell[static_cast<std::size_t>(c)];
              if (corner.v->tsdf < 0.0) neg[static_cast<std::size_t>(nn++)] = &corner;
              else pos[static_cast<std::size_t>(np++)] = &corner;
            }
            if (nn == 0 || np == 0) continue;
            Eigen::Vector3d pos_mean = Eigen::Vector3d::Zero(), neg_mean = Eigen::Vector3d::Zero();
            for (int a = 0; a < np; ++a) pos_mean += pos[static_cast<std::size_t>(a)]->idx.cast<double>();
            for (int a = 0; a < nn; ++a) neg_mean += neg[static_cast<std::size_t>(a)]->idx.cast<double>();
            const Eigen::Vector3d outward = pos_mean / np - neg_mean / nn;
            if (nn == 1 || np == 1) {
              const bool single_neg = nn == 1;
              const Corner& apex = single_neg ? *neg[0] : *pos[0];
              const auto& others = single_neg ? pos : neg;
              const int a = vertex_on_edge(apex, *others[0]);
              const int b = vertex_on_edge(apex, *others[1]);
              const int c = vertex_on_edge(apex, *others[2]);
              emit(a, b, c, outward);
            } else {
              // Two negative, two positive corners: a quad.
              const int a = vertex_on_edge(*neg[0], *pos[0]);
              const int b = vertex_on_edge(*neg[0], *pos[1]);
              const int c = vertex_on_edge(*neg[1], *pos[1]);
              const int d = vertex_on_edge(*neg[1], *pos[0]);
              emit(a, b, c, outward);
              emit(a, c, d, outward);
            }
          }
        }
  }
  return mesh;
}

// ---------------------------------------------------------------------------------------------
// PLY

inline std::uint8_t quantize_color(float c) noexcept {
  return static_cast<std::uint8_t>(std::lround(std::clamp(c, 0.f, 1.f) * 255.f));
}

/// Binary little-endian PLY with float x, y, z, uchar red, green, blue and an int face list.
inline void write_ply(const std::string& path, const TriangleMesh& mesh) {
  std::ostringstream header;
  header << "ply\nformat binary_little_endian 1.0\n"
         << "element vertex " << mesh.vertices.size() << "\n"
         << "property float x\nproperty float y\nproperty float z\n"
         << "property uchar red\nproperty uchar green\nproperty uchar blue\n"
         << "element face " << mesh.faces.size() << "\n"
         << "property list uchar int vertex_indices\nend_header\n";
  binary::Writer w;
  const std::string h = header.str();
  w.put_raw(h.data(), h.size());
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    const auto& v = mesh.vertices[i];
    w.put(static_cast<float>(v.x()));
    w.put(static_cast<float>(v.y()));
    w.put(static_cast<float>(v.z()));
    const Rgb c = i < mesh.colors.size() ? mesh.colors[i] : Rgb{1.f, 1.f, 1.f};
    w.put(quantize_color(c.r));
    w.put(quantize_color(c.g));
    w.put(quantize_color(c.b));
  }
  for (const auto& f : mesh.faces) {
    w.put(std::uint8_t{3});
    w.put(static_cast<std::int32_t>(f[0]));
    w.put(static_cast<std::int32_t>(f[1]));
    w.put(static_cast<std::int32_t>(f[2]));
  }
  w.save(path);
}

/// Reads binary little-endian PLY files with float or double vertex coordinates, optional
/// uchar colors and triangle faces (list uchar int / uint).
inline TriangleMesh read_ply(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot open " + path);
  std::string line;
  std::getline(in, line);
  if (line != "ply") fail(ErrorCode::FormatError, path + ": not a PLY file");

  struct Property {
    std::string name, type;
  };
  std::size_t n_vertices = 0, n_faces = 0;
  std::vector<Property> vprops;
  std::string current;
  bool binary_le = false;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    if (word == "format") {
      std::string fmt;
      ls >> fmt;
      binary_le = fmt == "binary_little_endian";
    } else if (word == "element") {
      std::size_t count = 0;
      ls >> current >> count;
      if (current == "vertex") n_vertices = count;
      else if (current == "face") n_faces = count;
      else fail(ErrorCode::FormatError, path + ": unsupported element '" + current + "'");
    } else if (word == "property") {
      std::string type, name;
      ls >> type;
      if (type == "list") {
        std::string count_type, item_type;
        ls >> count_type >> item_type >> name;
        if (current != "face" || count_type != "uchar" || (item_type != "int" && item_type != "uint"))
          fail(ErrorCode::FormatError, path + ": unsupported list property");
      } else {
        ls >> name;
        if (current == "vertex") vprops.push_back({name, type});
      }
    } else if (word == "end_header") {
      break;
    }
  }
  if (!binary_le) fail(ErrorCode::FormatError, path + ": only binary_little_endian PLY is supported");

  std::vector<char> rest((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  binary::Reader r(std::move(rest), path);
  TriangleMesh mesh;
  mesh.vertices.resize(n_vertices);
  bool has_color = false;
  for (const auto& p : vprops) has_color |= p.name == "red";
  if (has_color) mesh.colors.resize(n_vertices);
  for (std::size_t i = 0; i < n_vertices; ++i) {
    for (const auto& p : vprops) {
      double value = 0.0;
      if (p.type == "float" || p.type == "float32") value = r.get<float>();
      else if (p.type == "double" || p.type == "float64") value = r.get<double>();
      else if (p.type == "uchar" || p.type == "uint8") value = r.get<std::uint8_t>();
      else if (p.type == "int" || p.type == "int32") value = r.get<std::int32_t>();
      else fail(ErrorCode::FormatError, path + ": unsupported property type '" + p.type + "'");
      if (p.name == "x") mesh.vertices[i].x() = value;
      else if (p.name == "y") mesh.vertices[i].y() = value;
      else if (p.name == "z") mesh.vertices[i].z() = value;
      else if (p.name == "red") mesh.colors[i].r = static_cast<float>(value / 255.0);
      else if (p.name == "green") mesh.colors[i].g = static_cast<float>(value / 255.0);
      else if (p.name == "blue") mesh.colors[i].b = static_cast<float>(value / 255.0);
    }
  }
  mesh.faces.resize(n_faces);
  for (std::size_t i = 0; i < n_faces; ++i) {
    if (r.get<std::uint8_t>() != 3) fail(ErrorCode::FormatError, path + ": only triangle faces are supported");
    for (int k = 0; k < 3; ++k) {
      const auto idx = r.get<std::int32_t>();
      if (idx < 0 || static_cast<std::size_t>(idx) >= n_vertices)
        fail(ErrorCode::FormatError, path + ": face index out of range");
      mesh.faces[i][static_cast<std::size_t>(k)] = idx;
    }
  }
  return mesh;
}

}  // namespace mf::tsdf
