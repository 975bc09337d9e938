// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <random>

#include "doctest.h"

#include "cornersim/errors.hpp"
#include "cornersim/fem.hpp"
#include "cornersim/mesh.hpp"
#include "cornersim/spectral.hpp"

using namespace cornersim;

namespace {

SparseSymMatrix dense_to_sparse(const Eigen::MatrixXd& a) {
  return SparseSymMatrix(a.sparseView());
}

std::shared_ptr<const AnnulusMesh> free_points(int n) {
  std::vector<Point> pts;
  for (int k = 0; k < n; ++k) pts.push_back({0.1 * k, 0.0});
  return std::make_shared<const AnnulusMesh>(
      AnnulusMesh::from_parts(pts, {}, {}, std::vector<std::uint8_t>(static_cast<std::size_t>(n), 0)));
}

ReducedSystem raw_system(const Eigen::MatrixXd& a, const Vector& b) {
  return apply_dirichlet(dense_to_sparse(a), b, free_points(static_cast<int>(a.rows())));
}

// Area of the part of triangle (a, b, c) with x < threshold, by polygon clipping.
double clipped_area(const std::array<Point, 3>& tri, double threshold) {
  std::vector<Point> poly;
  for (int k = 0; k < 3; ++k) {
    const Point p = tri[k];
    const Point q = tri[(k + 1) % 3];
    const bool pin = p.x < threshold;
    const bool qin = q.x < threshold;
    if (pin) poly.push_back(p);
    if (pin != qin) {
      const double t = (threshold - p.x) / (q.x - p.x);
      poly.push_back({threshold, p.y + t * (q.y - p.y)});
    }
  }
  double area = 0.0;
  for (std::size_t k = 0; k < poly.size(); ++k) {
    const Point& p = poly[k];
    const Point& q = poly[(k + 1) % poly.size()];
    area += p.x * q.y - q.x * p.y;
  }
  return 0.5 * std::abs(area);
}

double triangle_area(const std::array<Point, 3>& t) {
  return 0.5 * std::abs((t[1].x - t[0].x) * (t[2].y - t[0].y) - (t[2].x - t[0].x) * (t[1].y - t[0].y));
}

}  // namespace

TEST_CASE("local stiffness of the unit right triangle") {
  const LocalMatrix k = local_stiffness({0, 0}, {1, 0}, {0, 1}, 1.0);
  const double expected[3][3] = {{1.0, -0.5, -0.5}, {-0.5, 0.5, 0.0}, {-0.5, 0.0, 0.5}};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) CHECK(k[i][j] == doctest::Approx(expected[i][j]).epsilon(1e-15));
  }
  const LocalMatrix scaled = local_stiffness({0, 0}, {1, 0}, {0, 1}, -2.5);
  CHECK(scaled[0][0] == doctest::Approx(-2.5));
}

TEST_CASE("two-triangle assembly matches hand-assembled values") {
  // Unit square split along the diagonal (0,0)-(1,1); both triangles give
  // the textbook Laplace stencil with zero coupling across the diagonal.
  const AnnulusMesh m = AnnulusMesh::from_parts({{0, 0}, {1, 0}, {1, 1}, {0, 1}}, {{0, 1, 2}, {0, 2, 3}},
                                                {Region::Minus, Region::Plus}, {0, 0, 0, 0});
  const SparseSymMatrix k = assemble_weighted_stiffness(m, 2.0, 3.0);
  // Minus triangle (0,1,2): right angle at 1. Plus triangle (0,2,3): right angle at 3.
  const double expected[4][4] = {{0.5 * 2 + 0.5 * 3, -0.5 * 2, 0.0, -0.5 * 3},
                                 {-0.5 * 2, 1.0 * 2, -0.5 * 2, 0.0},
                                 {0.0, -0.5 * 2, 0.5 * 2 + 0.5 * 3, -0.5 * 3},
                                 {-0.5 * 3, 0.0, -0.5 * 3, 1.0 * 3}};
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) CHECK(k.coeff(i, j) == doctest::Approx(expected[i][j]).epsilon(1e-15));
  }
}

TEST_CASE("stiffness is symmetric, bilinear in sigma, and Laplace-like for unit sigma") {
  const AnnulusMesh m = build_annulus_mesh(0.3, 6, 12);
  const SparseSymMatrix a = assemble_stiffness(m, Contrast(1.0, -0.7));
  const SparseSymMatrix b = assemble_stiffness(m, Contrast(4.0, -2.8));
  CHECK((Eigen::MatrixXd(b.storage()) - 4.0 * Eigen::MatrixXd(a.storage())).cwiseAbs().maxCoeff() <= 1e-12);
  const Eigen::MatrixXd d(a.storage());
  CHECK((d - d.transpose()).cwiseAbs().maxCoeff() == 0.0);

  const SparseSymMatrix lap = assemble_weighted_stiffness(m, 1.0, 1.0);
  const Vector ones = Vector::Ones(lap.dimension());
  CHECK((lap * ones).cwiseAbs().maxCoeff() <= 1e-12);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 20; ++trial) {
    Vector x(lap.dimension());
    for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = g(rng);
    CHECK(x.dot(lap * x) >= 0.0);
  }
}

TEST_CASE("degenerate triangles are rejected") {
  const AnnulusMesh flat = AnnulusMesh::from_parts({{0, 0}, {1, 0}, {2, 0}}, {{0, 1, 2}}, {Region::Plus},
                                                   {0, 0, 0});
  CHECK_THROWS_AS(assemble_weighted_stiffness(flat, 1.0, 1.0), DegenerateError);
}

TEST_CASE("load vectors") {
  SUBCASE("constant source on one triangle") {
    const AnnulusMesh m = AnnulusMesh::from_parts({{0.6, 0.0}, {0.9, 0.1}, {0.7, 0.4}}, {{0, 1, 2}},
                                                  {Region::Minus}, {0, 0, 0});
    const double area = m.signed_area(0);
    const Vector b = assemble_load(m, NodalValues{{1.0, 1.0, 1.0}});
    for (int i = 0; i < 3; ++i) CHECK(b[i] == doctest::Approx(area / 3.0).epsilon(1e-14));
    const Vector zero = assemble_load(m, HalfPlaneX{0.5, 100.0});
    CHECK(zero.cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("half-plane source converges to the clipped area") {
    for (int n : {8, 16, 32, 64}) {
      const AnnulusMesh m = build_annulus_mesh(0.1, n, n);
      double exact = 0.0;
      for (const auto& tri : m.triangles()) {
        exact += clipped_area({m.vertices()[tri[0]], m.vertices()[tri[1]], m.vertices()[tri[2]]}, 0.5);
      }
      const double total = assemble_load(m, HalfPlaneX{0.5, 100.0}).sum();
      const double err = std::abs(total - 100.0 * exact) / (100.0 * exact);
      CAPTURE(n);
      CHECK(err <= 0.1 / n);
    }
  }
  SUBCASE("annular source integrates the outer band") {
    const AnnulusMesh m = build_annulus_mesh(0.2, 40, 64);
    double band = 0.0;
    for (std::size_t t = 0; t < m.num_triangles(); ++t) {
      const auto& tri = m.triangles()[t];
      double rmin = 1.0;
      for (int v : tri) rmin = std::min(rmin, m.radius(static_cast<std::size_t>(v)));
      if (rmin >= 0.5 - 1e-12) band += m.signed_area(t);
    }
    const double total = assemble_load(m, Annular{0.5, 1.0}).sum();
    CHECK(total == doctest::Approx(band).epsilon(0.02));
  }
  CHECK_THROWS_AS(validate_source(Annular{1.5, 1.0}), ParamError);
  CHECK_THROWS_AS(validate_source(HalfPlaneX{0.5, std::nan("")}), ParamError);
}

TEST_CASE("Dirichlet elimination") {
  const AnnulusMesh tri = AnnulusMesh::from_parts({{0, 0}, {1, 0}, {0, 1}}, {{0, 1, 2}}, {Region::Plus}, {1, 1, 1});
  auto shared = std::make_shared<const AnnulusMesh>(tri);
  const SparseSymMatrix k = assemble_weighted_stiffness(tri, 1.0, 1.0);
  const ReducedSystem empty = apply_dirichlet(k, Vector::Ones(3), shared);
  CHECK(empty.matrix.dimension() == 0);
  CHECK(empty.free_dofs.empty());

  const Eigen::MatrixXd a{{2.0, -1.0}, {-1.0, 2.0}};
  const ReducedSystem same = raw_system(a, Vector::Ones(2));
  CHECK(Eigen::MatrixXd(same.matrix.storage()) == a);

  const AnnulusMesh m = build_annulus_mesh(0.4, 5, 8);
  const ReducedSystem r = apply_dirichlet(assemble_stiffness(m, Contrast(1.0, -0.5)),
                                          Vector::Zero(static_cast<Eigen::Index>(m.num_vertices())),
                                          std::make_shared<const AnnulusMesh>(m));
  const Eigen::MatrixXd d(r.matrix.storage());
  CHECK((d - d.transpose()).cwiseAbs().maxCoeff() == 0.0);
  const Vector expanded = r.expand(Vector::Ones(r.matrix.dimension()));
  for (std::size_t v = 0; v < m.num_vertices(); ++v) {
    CHECK(expanded[static_cast<Eigen::Index>(v)] == (m.is_boundary(v) ? 0.0 : 1.0));
  }
}

TEST_CASE("direct solves of small systems") {
  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(3, 3);
  const Vector b{{1.0, -2.0, 3.0}};
  CHECK(solve_direct(raw_system(id, b)).values == b);

  const Eigen::MatrixXd indef{{1.0, 2.0}, {2.0, 1.0}};
  const FemSolution s = solve_direct(raw_system(indef, Vector{{3.0, 3.0}}));
  CHECK(s.values[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(s.values[1] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(s.diagnostics.refinement_steps >= 1);

  const Eigen::MatrixXd singular{{1.0, 1.0}, {1.0, 1.0}};
  CHECK_THROWS_AS(solve_direct(raw_system(singular, Vector{{1.0, 0.0}})), SingularSystemError);
}

TEST_CASE("discrete solution satisfies the Galerkin equations") {
  const AnnulusMesh m = build_annulus_mesh(0.2, 24, 24);
  auto mesh = std::make_shared<const AnnulusMesh>(m);
  const ReducedSystem sys =
      apply_dirichlet(assemble_stiffness(m, Contrast(1.0, -0.6)), assemble_load(m, HalfPlaneX{0.5, 100.0}), mesh);
  const FemSolution sol = solve_direct(sys);
  const Vector uf = sys.restrict_to_free(sol.values);
  CHECK((sys.matrix * uf - sys.load).norm() / sys.load.norm() <= 1e-8);
  CHECK(sol.diagnostics.relative_residual <= kResidualTolerance);
  for (std::size_t v = 0; v < m.num_vertices(); ++v) {
    if (m.is_boundary(v)) CHECK(sol.values[static_cast<Eigen::Index>(v)] == 0.0);
  }
}

TEST_CASE("norms") {
  const AnnulusMesh m = build_annulus_mesh(0.3, 6, 8);
  const auto nv = static_cast<Eigen::Index>(m.num_vertices());
  CHECK(h1_seminorm(m, Vector::Zero(nv)) == 0.0);
  CHECK(l2_norm(m, Vector::Zero(nv)) == 0.0);

  Vector x(nv);
  for (Eigen::Index v = 0; v < nv; ++v) x[v] = m.vertices()[static_cast<std::size_t>(v)].x;
  CHECK(h1_seminorm(m, x) == doctest::Approx(std::sqrt(m.total_area())).epsilon(1e-12));
  CHECK(h1_seminorm(m, -3.0 * x) == doctest::Approx(3.0 * h1_seminorm(m, x)).epsilon(1e-12));
  CHECK(l2_norm(m, Vector::Ones(nv)) == doctest::Approx(std::sqrt(m.total_area())).epsilon(1e-12));

  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Vector y(nv);
  for (Eigen::Index v = 0; v < nv; ++v) y[v] = u(rng);
  double oracle = 0.0;
  for (std::size_t t = 0; t < m.num_triangles(); ++t) {
    const auto& tri = m.triangles()[t];
    const double a = y[tri[0]], b = y[tri[1]], c = y[tri[2]];
    oracle += m.signed_area(t) / 6.0 * (a * a + b * b + c * c + a * b + a * c + b * c);
  }
  CHECK(l2_norm(m, y) == doctest::Approx(std::sqrt(oracle)).epsilon(1e-12));
}

TEST_CASE("smallest singular value") {
  const Eigen::MatrixXd d = Eigen::Vector3d(3.0, -1.0, 2.0).asDiagonal();
  CHECK(smallest_singular(dense_to_sparse(d)).value == doctest::Approx(1.0).epsilon(1e-10));
  const Eigen::MatrixXd swap{{0.0, 1.0}, {1.0, 0.0}};
  CHECK(smallest_singular(dense_to_sparse(swap)).value == doctest::Approx(1.0).epsilon(1e-10));
  const Eigen::MatrixXd sing{{1.0, 1.0}, {1.0, 1.0}};
  const SmallestSingular s = smallest_singular(dense_to_sparse(sing));
  CHECK(s.singular);
  CHECK(s.value == 0.0);

  // Against a dense eigen-solver on a genuine stiffness matrix.
  const AnnulusMesh m = build_annulus_mesh(0.3, 8, 8);
  const ReducedSystem sys = apply_dirichlet(assemble_stiffness(m, Contrast(1.0, -0.6)),
                                            Vector::Zero(static_cast<Eigen::Index>(m.num_vertices())),
                                            std::make_shared<const AnnulusMesh>(m));
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Eigen::MatrixXd(sys.matrix.storage()));
  CHECK(smallest_singular(sys.matrix).value ==
        doctest::Approx(es.eigenvalues().cwiseAbs().minCoeff()).epsilon(1e-7));
}

TEST_CASE("inertia reflects the sign structure") {
  const AnnulusMesh m = build_annulus_mesh(0.3, 16, 16);
  auto mesh = std::make_shared<const AnnulusMesh>(m);
  const auto nv = static_cast<Eigen::Index>(m.num_vertices());
  const ReducedSystem inside = apply_dirichlet(assemble_stiffness(m, Contrast(1.0, -0.5)), Vector::Zero(nv), mesh);
  const Inertia in = matrix_inertia(inside.matrix);
  CHECK(in.positive > 0);
  CHECK(in.negative > 0);
  CHECK(in.positive + in.negative + in.zero == inside.matrix.dimension());

  const ReducedSystem lap = apply_dirichlet(assemble_weighted_stiffness(m, 1.0, 1.0), Vector::Zero(nv), mesh);
  const Inertia pos = matrix_inertia(lap.matrix);
  CHECK(pos.negative == 0);
  CHECK(pos.positive == lap.matrix.dimension());
}

TEST_CASE("outside the critical interval the stiffness stays uniformly invertible") {
  // Smallest |eigenvalue| relative to the unit-coefficient stiffness, which
  // removes the h^2 scaling of the algebraic eigenvalues.
  double lo = 1e300;
  double hi = 0.0;
  for (int n : {16, 32}) {
    for (double delta : {0.1, 0.3, 0.5}) {
      const AnnulusMesh m = build_annulus_mesh(delta, n, n);
      auto mesh = std::make_shared<const AnnulusMesh>(m);
      const auto nv = static_cast<Eigen::Index>(m.num_vertices());
      const ReducedSystem k = apply_dirichlet(assemble_stiffness(m, Contrast(1.0, -0.2)), Vector::Zero(nv), mesh);
      const ReducedSystem k1 = apply_dirichlet(assemble_weighted_stiffness(m, 1.0, 1.0), Vector::Zero(nv), mesh);
      const double ratio = smallest_singular(k.matrix).value / smallest_singular(k1.matrix).value;
      lo = std::min(lo, ratio);
      hi = std::max(hi, ratio);
    }
  }
  CHECK(lo > 0.05);
  CHECK(hi / lo < 5.0);
}

TEST_CASE("unit-coefficient manufactured solution converges in H1") {
  // u = sin(theta) (r - delta)(1 - r), -Laplace u = sin(theta) (3 - delta / r^2).
  const double delta = 0.5;
  auto exact_grad = [&](double x, double y) {
    const double r = std::hypot(x, y);
    const double s = y / r;
    const double c = x / r;
    const double g = (r - delta) * (1.0 - r);
    const double dg = 1.0 + delta - 2.0 * r;
    // grad = g' sin(theta) e_r + g cos(theta) / r e_theta
    const double ur = dg * s;
    const double ut = g * c / r;
    return std::array<double, 2>{ur * c - ut * s, ur * s + ut * c};
  };
  std::vector<double> errors;
  std::vector<double> sizes;
  for (int n : {8, 16, 32, 64}) {
    const AnnulusMesh m = build_annulus_mesh(delta, n, n);
    auto mesh = std::make_shared<const AnnulusMesh>(m);
    std::vector<double> f(m.num_vertices());
    for (std::size_t v = 0; v < f.size(); ++v) {
      const double r = m.radius(v);
      f[v] = std::sin(m.angle(v)) * (3.0 - delta / (r * r));
    }
    const ReducedSystem sys =
        apply_dirichlet(assemble_weighted_stiffness(m, 1.0, 1.0), assemble_load(m, NodalValues{f}), mesh);
    const FemSolution sol = solve_direct(sys);
    double err2 = 0.0;
    for (std::size_t t = 0; t < m.num_triangles(); ++t) {
      const auto& tri = m.triangles()[t];
      std::array<Point, 3> p = {m.vertices()[tri[0]], m.vertices()[tri[1]], m.vertices()[tri[2]]};
      const double area = triangle_area(p);
      // Gradient of the discrete field on this triangle.
      const double det = (p[1].x - p[0].x) * (p[2].y - p[0].y) - (p[2].x - p[0].x) * (p[1].y - p[0].y);
      const double du1 = sol.values[tri[1]] - sol.values[tri[0]];
      const double du2 = sol.values[tri[2]] - sol.values[tri[0]];
      const double gx = (du1 * (p[2].y - p[0].y) - du2 * (p[1].y - p[0].y)) / det;
      const double gy = (du2 * (p[1].x - p[0].x) - du1 * (p[2].x - p[0].x)) / det;
      for (int e = 0; e < 3; ++e) {
        const Point q{0.5 * (p[e].x + p[(e + 1) % 3].x), 0.5 * (p[e].y + p[(e + 1) % 3].y)};
        const auto ge = exact_grad(q.x, q.y);
        err2 += area / 3.0 * ((ge[0] - gx) * (ge[0] - gx) + (ge[1] - gy) * (ge[1] - gy));
      }
    }
    errors.push_back(std::sqrt(err2));
    sizes.push_back(1.0 / n);
  }
  // Least-squares slope of log error against log h.
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double k = static_cast<double>(errors.size());
  for (std::size_t i = 0; i < errors.size(); ++i) {
    const double lx = std::log(sizes[i]);
    const double ly = std::log(errors[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double rate = (k * sxy - sx * sy) / (k * sxx - sx * sx);
  MESSAGE("H1 error rate " << rate);
  CHECK(rate >= 0.9);
}

TEST_CASE("singular coefficient extraction from synthetic fields") {
  const SpectralData s = make_spectral_data(Contrast(1.0, -0.6));
  const Ring ring{0.05, 0.6};
  const Complex c(2.0, 1.0);
  // 2 Re{c r^{i mu}} phi = c r^{i mu} phi + conj(c) r^{-i mu} phi.
  auto oscillating = [&](double r, double t) {
    return 2.0 * std::real(c * oscillating_power(r, s.mu)) * phi_eval(t, s);
  };
  const SingularCoefficients got = extract_singular_coefficients(oscillating, ring, s);
  CHECK(std::abs(got.c_plus - c) <= 1e-8 * std::abs(c));
  CHECK(std::abs(got.c_minus - std::conj(c)) <= 1e-8 * std::abs(c));

  auto smooth = [&](double r, double t) { return r * r * phi_eval(t, s); };
  const SingularCoefficients zero = extract_singular_coefficients(smooth, ring, s);
  CHECK(std::abs(zero.c_plus) <= 1e-8);
  CHECK(std::abs(zero.c_minus) <= 1e-8);

  CHECK_THROWS_AS(extract_singular_coefficients(smooth, Ring{0.4, 0.5}, s), FitError);
}

TEST_CASE("extracted coefficients of a discrete solution reflect with unit modulus") {
  const Contrast contrast(1.0, -0.6);
  const SpectralData s = make_spectral_data(contrast);
  const double delta = 0.02;
  const AnnulusMesh m = build_annulus_mesh(delta, 96, 96);
  auto mesh = std::make_shared<const AnnulusMesh>(m);
  const ReducedSystem sys =
      apply_dirichlet(assemble_stiffness(m, contrast), assemble_load(m, Annular{0.7, 1.0}), mesh);
  const FemSolution sol = solve_direct(sys);
  const SingularCoefficients c = extract_singular_coefficients(sol, Ring{0.04, 0.5}, s);
  const double modulus = std::abs(c.c_plus) / std::abs(c.c_minus);
  CHECK(modulus >= 0.95);
  CHECK(modulus <= 1.05);
  // The Dirichlet condition at r = delta fixes the phase: c_minus / c_plus ~ -delta^{2 i mu}.
  const Complex predicted = -oscillating_power(delta, 2.0 * s.mu);
  MESSAGE("phase mismatch " << std::abs(c.c_minus / c.c_plus - predicted));
  CHECK(std::abs(c.c_minus / c.c_plus - predicted) <= 0.1);
  CHECK_THROWS_AS(extract_singular_coefficients(sol, Ring{0.01, 0.5}, s), FitError);
}
