// SPDX-License-Identifier: Apache-2.0
//
// Structured log-polar triangulations of the annulus sector
//   { (r cos t, r sin t) : delta < r < 1, 0 < t < pi }
// with the material interface on the ray theta = pi/4.
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace cornersim {

struct Point {
  double x;
  double y;
};

enum class Region : std::int8_t { Minus = -1, Plus = 1 };

enum class MeshKind {
  Standard,          // uniform angular grid, criss-cross quads
  TCoercivityPlus,   // Plus spacing three times Minus spacing; theta -> pi - 3 theta is a permutation
  TCoercivityMinus,  // uniform pi/(4 n_minus) spacing; theta -> pi/2 - theta is a permutation
  Imported,          // no grid information
};

const char* to_string(MeshKind kind) noexcept;

struct MeshParams {
  double delta = 0.0;
  int n_t = 0;
  int n_theta = 0;
};

/// Grid bookkeeping for generated meshes. Grid node (i, j) sits at radius
/// radii[i] and angle angles[j]; its vertex index is i * angles.size() + j.
/// Quad centers follow the grid nodes, center of quad (i, j) at
/// num_grid_nodes() + i * (angles.size() - 1) + j.
struct GridInfo {
  std::vector<double> radii;
  std::vector<double> angles;
  int interface_column = 0;  // index j with angles[j] == pi/4

  int num_radial() const noexcept { return static_cast<int>(radii.size()); }
  int num_angular() const noexcept { return static_cast<int>(angles.size()); }
  int num_grid_nodes() const noexcept { return num_radial() * num_angular(); }
  int node(int i, int j) const noexcept { return i * num_angular() + j; }
  int center(int i, int j) const noexcept {
    return num_grid_nodes() + i * (num_angular() - 1) + j;
  }
};

class AnnulusMesh {
 public:
  using Triangle = std::array<int, 3>;
  using Edge = std::pair<int, int>;

  /// Assembles a mesh from raw parts (used for synthetic meshes and import).
  /// Throws ParamError on inconsistent sizes or out-of-range indices.
  static AnnulusMesh from_parts(std::vector<Point> vertices, std::vector<Triangle> triangles,
                                std::vector<Region> regions, std::vector<std::uint8_t> boundary);

  std::size_t num_vertices() const noexcept { return vertices_.size(); }
  std::size_t num_triangles() const noexcept { return triangles_.size(); }

  const std::vector<Point>& vertices() const noexcept { return vertices_; }
  const std::vector<Triangle>& triangles() const noexcept { return triangles_; }
  const std::vector<Region>& regions() const noexcept { return regions_; }
  const std::vector<std::uint8_t>& boundary() const noexcept { return boundary_; }
  bool is_boundary(std::size_t v) const noexcept { return boundary_[v] != 0; }
  const std::vector<Edge>& interface_edges() const noexcept { return interface_edges_; }

  const MeshParams& params() const noexcept { return params_; }
  MeshKind kind() const noexcept { return kind_; }
  const std::optional<GridInfo>& grid() const noexcept { return grid_; }

  /// Polar radius and angle of a vertex.
  double radius(std::size_t v) const noexcept;
  double angle(std::size_t v) const noexcept;

  /// Signed area of triangle `t` (positive for counter-clockwise).
  double signed_area(std::size_t t) const noexcept;
  double total_area() const noexcept;

  /// Unique undirected edges, sorted.
  std::vector<Edge> edges() const;

  /// Smallest interior angle over all triangles, in degrees.
  double min_angle_degrees() const noexcept;

 private:
  friend AnnulusMesh build_annulus_mesh(double, int, int);
  friend AnnulusMesh build_tcoercivity_mesh(double, int, int, MeshKind);

  std::vector<Point> vertices_;
  std::vector<Triangle> triangles_;
  std::vector<Region> regions_;
  std::vector<std::uint8_t> boundary_;
  std::vector<Edge> interface_edges_;
  MeshParams params_;
  MeshKind kind_ = MeshKind::Imported;
  std::optional<GridInfo> grid_;
};

/// Log-polar criss-cross mesh: n_t uniform cells in ln r on [ln delta, 0],
/// n_theta uniform cells on [0, pi]. Requires 0 < delta < 1, n_t >= 1,
/// n_theta >= 4 with n_theta % 4 == 0.
AnnulusMesh build_annulus_mesh(double delta, int n_t, int n_theta);

/// Mesh variant where a reflection operator is an exact vertex permutation.
/// `kind` is TCoercivityPlus (Minus sector: n_minus cells of pi/(4 n_minus),
/// Plus sector: n_minus cells of 3 pi/(4 n_minus)) or TCoercivityMinus
/// (4 n_minus uniform cells).
AnnulusMesh build_tcoercivity_mesh(double delta, int n_t, int n_minus,
                                   MeshKind kind = MeshKind::TCoercivityPlus);

enum class MeshFormat { NativeText, VtkLegacy };

/// Serialises a mesh. NativeText:
///   annulus-mesh v1
///   <V>
///   x y boundary_flag        (V lines)
///   <T>
///   i j k region             (T lines, region -1 or 1)
std::string export_mesh(const AnnulusMesh& mesh, MeshFormat format);

/// Writes `export_mesh` output to `path`; throws IoError on failure.
void write_mesh(const AnnulusMesh& mesh, MeshFormat format, const std::string& path);

/// Parses a NativeText document into an Imported mesh; throws ParamError on malformed input.
AnnulusMesh import_mesh_native(const std::string& text);

/// Locates the triangle containing a point and returns P1 interpolation weights.
class PointLocator {
 public:
  explicit PointLocator(const AnnulusMesh& mesh, int buckets_per_axis = 0);

  struct Hit {
    int triangle;
    std::array<double, 3> bary;
  };

  /// Nearest containing triangle; points slightly outside (within `slack`
  /// in barycentric terms) snap to the closest triangle. Returns nullopt otherwise.
  std::optional<Hit> locate(Point p, double slack = 1e-9) const;

  /// P1 interpolation of a nodal field; throws DomainError outside the mesh.
  double interpolate(const std::vector<double>& nodal, Point p) const;

 private:
  const AnnulusMesh* mesh_;
  double x0_, y0_, cell_w_, cell_h_;
  int nx_, ny_;
  std::vector<std::vector<int>> buckets_;
};

}  // namespace cornersim
