// SPDX-License-Identifier: Apache-2.0
#include "cornersim/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include "cornersim/errors.hpp"

namespace cornersim {

namespace {

constexpr double kPiMesh = std::numbers::pi;

Point polar_point(double r, double theta, bool at_zero, bool at_pi) {
  if (at_zero) return {r, 0.0};
  if (at_pi) return {-r, 0.0};
  return {r * std::cos(theta), r * std::sin(theta)};
}

std::vector<double> log_radii(double delta, int n_t) {
  const double log_delta = std::log(delta);
  std::vector<double> radii(static_cast<std::size_t>(n_t) + 1);
  for (int i = 0; i <= n_t; ++i) {
    const double t = log_delta * (1.0 - static_cast<double>(i) / n_t);
    radii[static_cast<std::size_t>(i)] = std::exp(t);
  }
  radii.front() = delta;
  radii.back() = 1.0;
  return radii;
}

void check_delta(double delta) {
  if (!(delta > 0.0 && delta < 1.0)) throw ParamError("mesh: delta must lie in (0, 1)");
  if (std::abs(std::log(delta)) > 700.0) {
    throw DegenerateError("mesh: |ln delta| > 700, grid arithmetic would overflow");
  }
}

double signed_area_of(const Point& a, const Point& b, const Point& c) {
  return 0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y));
}

}  // namespace

const char* to_string(MeshKind kind) noexcept {
  switch (kind) {
    case MeshKind::Standard:
      return "standard";
    case MeshKind::TCoercivityPlus:
      return "tcoercivity-plus";
    case MeshKind::TCoercivityMinus:
      return "tcoercivity-minus";
    case MeshKind::Imported:
      return "imported";
  }
  return "unknown";
}

namespace detail {

// Criss-cross triangulation of a (radius x angle) tensor grid.
void fill_grid_mesh(const GridInfo& grid, std::vector<Point>& vertices,
                    std::vector<AnnulusMesh::Triangle>& triangles, std::vector<Region>& regions,
                    std::vector<std::uint8_t>& boundary, std::vector<AnnulusMesh::Edge>& iface) {
  const int nr = grid.num_radial();
  const int na = grid.num_angular();
  const double log_r0 = std::log(grid.radii.front());
  const double log_r1 = std::log(grid.radii.back());
  vertices.clear();
  boundary.clear();
  vertices.reserve(static_cast<std::size_t>(grid.num_grid_nodes() + (nr - 1) * (na - 1)));
  for (int i = 0; i < nr; ++i) {
    for (int j = 0; j < na; ++j) {
      vertices.push_back(polar_point(grid.radii[i], grid.angles[j], j == 0, j == na - 1));
      const bool on_boundary = i == 0 || i == nr - 1 || j == 0 || j == na - 1;
      boundary.push_back(on_boundary ? 1 : 0);
    }
  }
  for (int i = 0; i + 1 < nr; ++i) {
    // Center of the quad in (ln r, theta).
    const double t_mid = 0.5 * (std::log(grid.radii[i]) + std::log(grid.radii[i + 1]));
    const double r_mid = std::exp(std::clamp(t_mid, log_r0, log_r1));
    for (int j = 0; j + 1 < na; ++j) {
      const double theta_mid = 0.5 * (grid.angles[j] + grid.angles[j + 1]);
      vertices.push_back(polar_point(r_mid, theta_mid, false, false));
      boundary.push_back(0);
    }
  }

  const double iface_angle = grid.angles[static_cast<std::size_t>(grid.interface_column)];
  triangles.clear();
  regions.clear();
  for (int i = 0; i + 1 < nr; ++i) {
    for (int j = 0; j + 1 < na; ++j) {
      const int c = grid.center(i, j);
      const int v00 = grid.node(i, j);
      const int v10 = grid.node(i + 1, j);
      const int v11 = grid.node(i + 1, j + 1);
      const int v01 = grid.node(i, j + 1);
      const Region region = grid.angles[j + 1] <= iface_angle ? Region::Minus : Region::Plus;
      const std::array<AnnulusMesh::Triangle, 4> quad{{{c, v00, v10}, {c, v10, v11},
                                                        {c, v11, v01}, {c, v01, v00}}};
      for (auto tri : quad) {
        if (signed_area_of(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]) < 0.0) {
          std::swap(tri[1], tri[2]);
        }
        triangles.push_back(tri);
        regions.push_back(region);
      }
    }
  }
  iface.clear();
  for (int i = 0; i + 1 < nr; ++i) {
    iface.emplace_back(grid.node(i, grid.interface_column),
                       grid.node(i + 1, grid.interface_column));
  }
}

}  // namespace detail

AnnulusMesh AnnulusMesh::from_parts(std::vector<Point> vertices, std::vector<Triangle> triangles,
                                    std::vector<Region> regions,
                                    std::vector<std::uint8_t> boundary) {
  if (regions.size() != triangles.size()) throw ParamError("mesh: one region per triangle");
  if (boundary.size() != vertices.size()) throw ParamError("mesh: one boundary flag per vertex");
  for (const auto& tri : triangles) {
    for (int v : tri) {
      if (v < 0 || static_cast<std::size_t>(v) >= vertices.size()) {
        throw ParamError("mesh: triangle vertex index out of range");
      }
    }
  }
  AnnulusMesh mesh;
  mesh.vertices_ = std::move(vertices);
  mesh.triangles_ = std::move(triangles);
  mesh.regions_ = std::move(regions);
  mesh.boundary_ = std::move(boundary);
  mesh.kind_ = MeshKind::Imported;
  return mesh;
}

double AnnulusMesh::radius(std::size_t v) const noexcept {
  return std::hypot(vertices_[v].x, vertices_[v].y);
}

double AnnulusMesh::angle(std::size_t v) const noexcept {
  return std::clamp(std::atan2(vertices_[v].y, vertices_[v].x), 0.0, kPiMesh);
}

double AnnulusMesh::signed_area(std::size_t t) const noexcept {
  const auto& tri = triangles_[t];
  return signed_area_of(vertices_[tri[0]], vertices_[tri[1]], vertices_[tri[2]]);
}

double AnnulusMesh::total_area() const noexcept {
  double sum = 0.0;
  for (std::size_t t = 0; t < triangles_.size(); ++t) sum += signed_area(t);
  return sum;
}

std::vector<AnnulusMesh::Edge> AnnulusMesh::edges() const {
  std::vector<Edge> out;
  out.reserve(triangles_.size() * 3);
  for (const auto& tri : triangles_) {
    for (int k = 0; k < 3; ++k) {
      const int a = tri[k];
      const int b = tri[(k + 1) % 3];
      out.emplace_back(std::min(a, b), std::max(a, b));
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

double AnnulusMesh::min_angle_degrees() const noexcept {
  double best = 180.0;
  for (const auto& tri : triangles_) {
    for (int k = 0; k < 3; ++k) {
      const Point& p = vertices_[tri[k]];
      const Point& q = vertices_[tri[(k + 1) % 3]];
      const Point& s = vertices_[tri[(k + 2) % 3]];
      const double ux = q.x - p.x, uy = q.y - p.y;
      const double vx = s.x - p.x, vy = s.y - p.y;
      const double ang = std::atan2(std::abs(ux * vy - uy * vx), ux * vx + uy * vy);
      best = std::min(best, ang * 180.0 / kPiMesh);
    }
  }
  return best;
}

AnnulusMesh build_annulus_mesh(double delta, int n_t, int n_theta) {
  if (n_t < 1) throw ParamError("build_annulus_mesh: n_t must be >= 1");
  if (n_theta < 4 || n_theta % 4 != 0) {
    throw ParamError("build_annulus_mesh: n_theta must be a positive multiple of 4");
  }
  check_delta(delta);

  GridInfo grid;
  grid.radii = log_radii(delta, n_t);
  grid.angles.resize(static_cast<std::size_t>(n_theta) + 1);
  for (int j = 0; j <= n_theta; ++j) grid.angles[j] = kPiMesh * j / n_theta;
  grid.interface_column = n_theta / 4;
  grid.angles[grid.interface_column] = kPiMesh / 4.0;

  AnnulusMesh mesh;
  detail::fill_grid_mesh(grid, mesh.vertices_, mesh.triangles_, mesh.regions_, mesh.boundary_,
                         mesh.interface_edges_);
  mesh.params_ = MeshParams{delta, n_t, n_theta};
  mesh.kind_ = MeshKind::Standard;
  mesh.grid_ = std::move(grid);
  return mesh;
}

AnnulusMesh build_tcoercivity_mesh(double delta, int n_t, int n_minus, MeshKind kind) {
  if (n_t < 1) throw ParamError("build_tcoercivity_mesh: n_t must be >= 1");
  if (n_minus < 1) throw ParamError("build_tcoercivity_mesh: n_minus must be >= 1");
  if (kind != MeshKind::TCoercivityPlus && kind != MeshKind::TCoercivityMinus) {
    throw ParamError("build_tcoercivity_mesh: kind must be a T-coercivity variant");
  }
  check_delta(delta);

  GridInfo grid;
  grid.radii = log_radii(delta, n_t);
  const double minus_step = kPiMesh / (4.0 * n_minus);
  for (int j = 0; j < n_minus; ++j) grid.angles.push_back(minus_step * j);
  grid.interface_column = n_minus;
  grid.angles.push_back(kPiMesh / 4.0);
  const int plus_cells = kind == MeshKind::TCoercivityPlus ? n_minus : 3 * n_minus;
  const double plus_step = 3.0 * kPiMesh / 4.0 / plus_cells;
  for (int k = 1; k < plus_cells; ++k) grid.angles.push_back(kPiMesh / 4.0 + plus_step * k);
  grid.angles.push_back(kPiMesh);

  AnnulusMesh mesh;
  detail::fill_grid_mesh(grid, mesh.vertices_, mesh.triangles_, mesh.regions_, mesh.boundary_,
                         mesh.interface_edges_);
  mesh.params_ = MeshParams{delta, n_t, n_minus + plus_cells};
  mesh.kind_ = kind;
  mesh.grid_ = std::move(grid);
  return mesh;
}

std::string export_mesh(const AnnulusMesh& mesh, MeshFormat format) {
  std::string out;
  char buf[128];
  const auto& verts = mesh.vertices();
  const auto& tris = mesh.triangles();
  const auto& regions = mesh.regions();
  if (format == MeshFormat::NativeText) {
    out += "annulus-mesh v1\n";
    out += std::to_string(verts.size()) + "\n";
    for (std::size_t v = 0; v < verts.size(); ++v) {
      std::snprintf(buf, sizeof buf, "%.17g %.17g %d\n", verts[v].x, verts[v].y,
                    mesh.is_boundary(v) ? 1 : 0);
      out += buf;
    }
    out += std::to_string(tris.size()) + "\n";
    for (std::size_t t = 0; t < tris.size(); ++t) {
      std::snprintf(buf, sizeof buf, "%d %d %d %d\n", tris[t][0], tris[t][1], tris[t][2],
                    static_cast<int>(regions[t]));
      out += buf;
    }
    return out;
  }

  out += "# vtk DataFile Version 3.0\n";
  out += "annulus sector mesh\n";
  out += "ASCII\n";
  out += "DATASET UNSTRUCTURED_GRID\n";
  out += "POINTS " + std::to_string(verts.size()) + " double\n";
  for (const auto& p : verts) {
    std::snprintf(buf, sizeof buf, "%.17g %.17g 0\n", p.x, p.y);
    out += buf;
  }
  out += "CELLS " + std::to_string(tris.size()) + " " + std::to_string(4 * tris.size()) + "\n";
  for (const auto& tri : tris) {
    std::snprintf(buf, sizeof buf, "3 %d %d %d\n", tri[0], tri[1], tri[2]);
    out += buf;
  }
  out += "CELL_TYPES " + std::to_string(tris.size()) + "\n";
  for (std::size_t t = 0; t < tris.size(); ++t) out += "5\n";
  out += "CELL_DATA " + std::to_string(tris.size()) + "\n";
  out += "SCALARS region int 1\n";
  out += "LOOKUP_TABLE default\n";
  for (Region r : regions) out += std::to_string(static_cast<int>(r)) + "\n";
  return out;
}

void write_mesh(const AnnulusMesh& mesh, MeshFormat format, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path + " for writing");
  os << export_mesh(mesh, format);
  if (!os) throw IoError("write failed for " + path);
}

AnnulusMesh import_mesh_native(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || line != "annulus-mesh v1") {
    throw ParamError("import_mesh_native: missing 'annulus-mesh v1' header");
  }
  auto read_count = [&is, &line](const char* what) {
    if (!std::getline(is, line)) throw ParamError(std::string("import_mesh_native: missing ") + what);
    std::size_t pos = 0;
    const long long n = std::stoll(line, &pos);
    if (pos != line.size() || n < 0) throw ParamError(std::string("import_mesh_native: bad ") + what);
    return static_cast<std::size_t>(n);
  };

  const std::size_t nv = read_count("vertex count");
  std::vector<Point> verts(nv);
  std::vector<std::uint8_t> boundary(nv);
  for (std::size_t v = 0; v < nv; ++v) {
    if (!std::getline(is, line)) throw ParamError("import_mesh_native: truncated vertex block");
    char* end = nullptr;
    verts[v].x = std::strtod(line.c_str(), &end);
    char* end2 = nullptr;
    verts[v].y = std::strtod(end, &end2);
    char* end3 = nullptr;
    const long flag = std::strtol(end2, &end3, 10);
    if (end == line.c_str() || end2 == end || end3 == end2 || (flag != 0 && flag != 1)) {
      throw ParamError("import_mesh_native: malformed vertex line '" + line + "'");
    }
    boundary[v] = static_cast<std::uint8_t>(flag);
  }
  const std::size_t nt = read_count("triangle count");
  std::vector<AnnulusMesh::Triangle> tris(nt);
  std::vector<Region> regions(nt);
  for (std::size_t t = 0; t < nt; ++t) {
    if (!std::getline(is, line)) throw ParamError("import_mesh_native: truncated triangle block");
    std::istringstream ls(line);
    int region = 0;
    if (!(ls >> tris[t][0] >> tris[t][1] >> tris[t][2] >> region) ||
        (region != -1 && region != 1)) {
      throw ParamError("import_mesh_native: malformed triangle line '" + line + "'");
    }
    regions[t] = region < 0 ? Region::Minus : Region::Plus;
  }
  return AnnulusMesh::from_parts(std::move(verts), std::move(tris), std::move(regions),
                                 std::move(boundary));
}

PointLocator::PointLocator(const AnnulusMesh& mesh, int buckets_per_axis) : mesh_(&mesh) {
  double xmin = std::numeric_limits<double>::max(), ymin = xmin;
  double xmax = -xmin, ymax = -xmin;
  for (const auto& p : mesh.vertices()) {
    xmin = std::min(xmin, p.x);
    xmax = std::max(xmax, p.x);
    ymin = std::min(ymin, p.y);
    ymax = std::max(ymax, p.y);
  }
  const int n = buckets_per_axis > 0
                    ? buckets_per_axis
                    : std::max(1, static_cast<int>(std::sqrt(mesh.num_triangles() / 2.0)));
  nx_ = ny_ = n;
  x0_ = xmin;
  y0_ = ymin;
  cell_w_ = std::max(xmax - xmin, 1e-300) / nx_;
  cell_h_ = std::max(ymax - ymin, 1e-300) / ny_;
  buckets_.assign(static_cast<std::size_t>(nx_) * ny_, {});
  const auto& verts = mesh.vertices();
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles()[t];
    double bx0 = verts[tri[0]].x, bx1 = bx0, by0 = verts[tri[0]].y, by1 = by0;
    for (int k = 1; k < 3; ++k) {
      bx0 = std::min(bx0, verts[tri[k]].x);
      bx1 = std::max(bx1, verts[tri[k]].x);
      by0 = std::min(by0, verts[tri[k]].y);
      by1 = std::max(by1, verts[tri[k]].y);
    }
    const int i0 = std::clamp(static_cast<int>((bx0 - x0_) / cell_w_), 0, nx_ - 1);
    const int i1 = std::clamp(static_cast<int>((bx1 - x0_) / cell_w_), 0, nx_ - 1);
    const int j0 = std::clamp(static_cast<int>((by0 - y0_) / cell_h_), 0, ny_ - 1);
    const int j1 = std::clamp(static_cast<int>((by1 - y0_) / cell_h_), 0, ny_ - 1);
    for (int j = j0; j <= j1; ++j) {
      for (int i = i0; i <= i1; ++i) {
        buckets_[static_cast<std::size_t>(j) * nx_ + i].push_back(static_cast<int>(t));
      }
    }
  }
}

std::optional<PointLocator::Hit> PointLocator::locate(Point p, double slack) const {
  const int i = static_cast<int>(std::floor((p.x - x0_) / cell_w_));
  const int j = static_cast<int>(std::floor((p.y - y0_) / cell_h_));
  std::optional<Hit> best;
  double best_min = -std::numeric_limits<double>::infinity();
  const auto& verts = mesh_->vertices();
  for (int jj = std::max(0, j - 1); jj <= std::min(ny_ - 1, j + 1); ++jj) {
    for (int ii = std::max(0, i - 1); ii <= std::min(nx_ - 1, i + 1); ++ii) {
      for (int t : buckets_[static_cast<std::size_t>(jj) * nx_ + ii]) {
        const auto& tri = mesh_->triangles()[static_cast<std::size_t>(t)];
        const Point& a = verts[tri[0]];
        const Point& b = verts[tri[1]];
        const Point& c = verts[tri[2]];
        const double area2 = (b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y);
        const double l1 = ((b.x - p.x) * (c.y - p.y) - (c.x - p.x) * (b.y - p.y)) / area2;
        const double l2 = ((c.x - p.x) * (a.y - p.y) - (a.x - p.x) * (c.y - p.y)) / area2;
        const double l3 = 1.0 - l1 - l2;
        const double m = std::min({l1, l2, l3});
        if (m > best_min) {
          best_min = m;
          best = Hit{t, {l1, l2, l3}};
        }
      }
    }
  }
  if (!best || best_min < -slack) return std::nullopt;
  return best;
}

double PointLocator::interpolate(const std::vector<double>& nodal, Point p) const {
  const auto hit = locate(p);
  if (!hit) throw DomainError("PointLocator: point outside the mesh");
  const auto& tri = mesh_->triangles()[static_cast<std::size_t>(hit->triangle)];
  return hit->bary[0] * nodal[tri[0]] + hit->bary[1] * nodal[tri[1]] +
         hit->bary[2] * nodal[tri[2]];
}

}  // namespace cornersim
