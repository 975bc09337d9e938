// SPDX-License-Identifier: Apache-2.0
#include "cornersim/fem.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include <Eigen/OrderingMethods>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include "cornersim/errors.hpp"

namespace cornersim {

namespace {

using Triplet = Eigen::Triplet<double, int>;

double mesh_scale(const AnnulusMesh& mesh) {
  double xmin = std::numeric_limits<double>::max(), ymin = xmin;
  double xmax = -xmin, ymax = -xmin;
  for (const auto& p : mesh.vertices()) {
    xmin = std::min(xmin, p.x);
    xmax = std::max(xmax, p.x);
    ymin = std::min(ymin, p.y);
    ymax = std::max(ymax, p.y);
  }
  return std::hypot(xmax - xmin, ymax - ymin);
}

SparseSymMatrix from_triplets(Eigen::Index n, const std::vector<Triplet>& triplets) {
  SparseSymMatrix::Storage m(n, n);
  m.setFromTriplets(triplets.begin(), triplets.end());
  m.makeCompressed();
  return SparseSymMatrix(std::move(m));
}

double source_value(const SourceSpec& source, const Point& p) {
  if (const auto* hp = std::get_if<HalfPlaneX>(&source)) {
    return p.x < hp->threshold ? hp->amplitude : 0.0;
  }
  const auto& an = std::get<Annular>(source);
  return std::hypot(p.x, p.y) > an.r_inner ? an.amplitude : 0.0;
}

}  // namespace

SparseSymMatrix::SparseSymMatrix(Storage m) : m_(std::move(m)) {
  if (m_.rows() != m_.cols()) throw ParamError("SparseSymMatrix: matrix is not square");
  m_.makeCompressed();
  const Storage t = m_.transpose();
  for (Eigen::Index k = 0; k < m_.outerSize(); ++k) {
    Storage::InnerIterator a(m_, k);
    Storage::InnerIterator b(t, k);
    for (; a && b; ++a, ++b) {
      if (a.index() != b.index() || a.value() != b.value()) {
        throw ParamError("SparseSymMatrix: matrix is not symmetric");
      }
    }
    if (a || b) throw ParamError("SparseSymMatrix: matrix is not structurally symmetric");
  }
}

double SparseSymMatrix::max_norm() const noexcept {
  double best = 0.0;
  for (Eigen::Index k = 0; k < m_.nonZeros(); ++k) best = std::max(best, std::abs(m_.valuePtr()[k]));
  return best;
}

double SparseSymMatrix::inf_norm() const noexcept {
  // Symmetric, so column sums equal row sums.
  double best = 0.0;
  for (Eigen::Index k = 0; k < m_.outerSize(); ++k) {
    double sum = 0.0;
    for (Storage::InnerIterator it(m_, k); it; ++it) sum += std::abs(it.value());
    best = std::max(best, sum);
  }
  return best;
}

LocalMatrix local_stiffness(const Point& p0, const Point& p1, const Point& p2, double sigma) {
  const std::array<const Point*, 3> p{&p0, &p1, &p2};
  std::array<double, 3> b{}, c{};
  for (int i = 0; i < 3; ++i) {
    const Point& pj = *p[(i + 1) % 3];
    const Point& pk = *p[(i + 2) % 3];
    b[i] = pj.y - pk.y;
    c[i] = pk.x - pj.x;
  }
  const double area = 0.5 * std::abs((p1.x - p0.x) * (p2.y - p0.y) - (p2.x - p0.x) * (p1.y - p0.y));
  LocalMatrix k{};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) k[i][j] = sigma * (b[i] * b[j] + c[i] * c[j]) / (4.0 * area);
  }
  return k;
}

SparseSymMatrix assemble_weighted_stiffness(const AnnulusMesh& mesh, double w_minus,
                                            double w_plus) {
  const double scale = mesh_scale(mesh);
  const auto& verts = mesh.vertices();
  std::vector<Triplet> triplets;
  triplets.reserve(mesh.num_triangles() * 9);
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    if (std::abs(mesh.signed_area(t)) < 1e-14 * scale * scale) {
      std::ostringstream msg;
      msg << "assemble_stiffness: triangle " << t << " is degenerate";
      throw DegenerateError(msg.str());
    }
    const auto& tri = mesh.triangles()[t];
    const double w = mesh.regions()[t] == Region::Minus ? w_minus : w_plus;
    const LocalMatrix k = local_stiffness(verts[tri[0]], verts[tri[1]], verts[tri[2]], w);
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) triplets.emplace_back(tri[i], tri[j], k[i][j]);
    }
  }
  return from_triplets(static_cast<Eigen::Index>(mesh.num_vertices()), triplets);
}

SparseSymMatrix assemble_stiffness(const AnnulusMesh& mesh, const Contrast& contrast) {
  return assemble_weighted_stiffness(mesh, contrast.sigma_minus(), contrast.sigma_plus());
}

SparseSymMatrix assemble_mass(const AnnulusMesh& mesh) {
  std::vector<Triplet> triplets;
  triplets.reserve(mesh.num_triangles() * 9);
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles()[t];
    const double area = std::abs(mesh.signed_area(t));
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        triplets.emplace_back(tri[i], tri[j], area / 12.0 * (i == j ? 2.0 : 1.0));
      }
    }
  }
  return from_triplets(static_cast<Eigen::Index>(mesh.num_vertices()), triplets);
}

void validate_source(const SourceSpec& source) {
  if (const auto* hp = std::get_if<HalfPlaneX>(&source)) {
    if (!std::isfinite(hp->amplitude) || !std::isfinite(hp->threshold)) {
      throw ParamError("HalfPlaneX source: amplitude and threshold must be finite");
    }
  } else if (const auto* an = std::get_if<Annular>(&source)) {
    if (!std::isfinite(an->amplitude)) throw ParamError("Annular source: amplitude must be finite");
    if (!(an->r_inner > 0.0 && an->r_inner < 1.0)) {
      throw ParamError("Annular source: r_inner must lie in (0, 1)");
    }
  } else {
    for (double v : std::get<NodalValues>(source).values) {
      if (!std::isfinite(v)) throw ParamError("NodalValues source: values must be finite");
    }
  }
}

Vector assemble_load(const AnnulusMesh& mesh, const SourceSpec& source) {
  validate_source(source);
  const auto* nodal = std::get_if<NodalValues>(&source);
  if (nodal && nodal->values.size() != mesh.num_vertices()) {
    throw ParamError("assemble_load: nodal source size does not match the mesh");
  }
  const auto& verts = mesh.vertices();
  Vector load = Vector::Zero(static_cast<Eigen::Index>(mesh.num_vertices()));
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles()[t];
    const double area = std::abs(mesh.signed_area(t));
    // fm[k]: source at the midpoint of the edge opposite local vertex k.
    std::array<double, 3> fm{};
    for (int k = 0; k < 3; ++k) {
      const int a = tri[(k + 1) % 3];
      const int b = tri[(k + 2) % 3];
      if (nodal) {
        fm[k] = 0.5 * (nodal->values[a] + nodal->values[b]);
      } else {
        fm[k] = source_value(source, {0.5 * (verts[a].x + verts[b].x), 0.5 * (verts[a].y + verts[b].y)});
      }
    }
    // The basis function of vertex k is 1/2 at the two adjacent midpoints, 0 at the opposite one.
    for (int k = 0; k < 3; ++k) {
      load[tri[k]] += area / 3.0 * 0.5 * (fm[(k + 1) % 3] + fm[(k + 2) % 3]);
    }
  }
  return load;
}

Vector ReducedSystem::expand(const Vector& reduced) const {
  Vector full = Vector::Zero(static_cast<Eigen::Index>(mesh->num_vertices()));
  for (std::size_t k = 0; k < free_dofs.size(); ++k) full[free_dofs[k]] = reduced[static_cast<Eigen::Index>(k)];
  return full;
}

Vector ReducedSystem::restrict_to_free(const Vector& full) const {
  Vector reduced(static_cast<Eigen::Index>(free_dofs.size()));
  for (std::size_t k = 0; k < free_dofs.size(); ++k) reduced[static_cast<Eigen::Index>(k)] = full[free_dofs[k]];
  return reduced;
}

ReducedSystem apply_dirichlet(const SparseSymMatrix& matrix, const Vector& load,
                              std::shared_ptr<const AnnulusMesh> mesh) {
  const auto n = static_cast<Eigen::Index>(mesh->num_vertices());
  if (matrix.dimension() != n || load.size() != n) {
    throw ParamError("apply_dirichlet: matrix/load dimensions do not match the mesh");
  }
  ReducedSystem sys;
  std::vector<int> full_to_free(static_cast<std::size_t>(n), -1);
  for (Eigen::Index v = 0; v < n; ++v) {
    if (!mesh->is_boundary(static_cast<std::size_t>(v))) {
      full_to_free[static_cast<std::size_t>(v)] = static_cast<int>(sys.free_dofs.size());
      sys.free_dofs.push_back(static_cast<int>(v));
    }
  }
  const auto nf = static_cast<Eigen::Index>(sys.free_dofs.size());
  std::vector<Triplet> triplets;
  triplets.reserve(static_cast<std::size_t>(matrix.storage().nonZeros()));
  for (Eigen::Index k = 0; k < matrix.storage().outerSize(); ++k) {
    const int col = full_to_free[static_cast<std::size_t>(k)];
    if (col < 0) continue;
    for (SparseSymMatrix::Storage::InnerIterator it(matrix.storage(), k); it; ++it) {
      const int row = full_to_free[static_cast<std::size_t>(it.index())];
      if (row >= 0) triplets.emplace_back(row, col, it.value());
    }
  }
  sys.matrix = from_triplets(nf, triplets);
  sys.load.resize(nf);
  for (Eigen::Index k = 0; k < nf; ++k) sys.load[k] = load[sys.free_dofs[static_cast<std::size_t>(k)]];
  sys.mesh = std::move(mesh);
  return sys;
}

struct IndefiniteFactorization::Impl {
  Eigen::SparseLU<SparseSymMatrix::Storage, Eigen::COLAMDOrdering<int>> lu;
};

IndefiniteFactorization::IndefiniteFactorization(const SparseSymMatrix& matrix)
    : impl_(std::make_unique<Impl>()), n_(matrix.dimension()) {
  if (n_ == 0) {
    pivot_floor_ = std::numeric_limits<double>::infinity();
    return;
  }
  const double scale = matrix.max_norm();
  impl_->lu.isSymmetric(true);
  impl_->lu.compute(matrix.storage());
  if (impl_->lu.info() != Eigen::Success) {
    throw SingularSystemError("IndefiniteFactorization: exactly singular pivot", 0.0);
  }
  // Diagonal blocks of U live in the supernodal L storage.
  const auto& mapped = impl_->lu.matrixL().m_mapL;
  double floor = std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < n_; ++j) {
    for (typename std::decay_t<decltype(mapped)>::InnerIterator it(mapped, j); it; ++it) {
      if (it.index() == j) {
        floor = std::min(floor, std::abs(it.value()));
        break;
      }
    }
  }
  pivot_floor_ = floor;
  if (!(floor >= kPivotTolerance * scale)) {
    std::ostringstream msg;
    msg << "IndefiniteFactorization: pivot " << floor << " below " << kPivotTolerance
        << " x max-norm " << scale;
    throw SingularSystemError(msg.str(), floor);
  }
}

IndefiniteFactorization::~IndefiniteFactorization() = default;
IndefiniteFactorization::IndefiniteFactorization(IndefiniteFactorization&&) noexcept = default;
IndefiniteFactorization& IndefiniteFactorization::operator=(IndefiniteFactorization&&) noexcept =
    default;

Vector IndefiniteFactorization::solve(const Vector& rhs) const {
  if (n_ == 0) return Vector(0);
  return impl_->lu.solve(rhs);
}

FemSolution solve_direct(const ReducedSystem& system) {
  const IndefiniteFactorization lu(system.matrix);
  return solve_direct(system, lu);
}

FemSolution solve_direct(const ReducedSystem& system, const IndefiniteFactorization& lu) {
  FemSolution sol;
  sol.mesh = system.mesh;
  sol.diagnostics.pivot_floor = lu.pivot_floor();
  const Vector& b = system.load;
  Vector x = lu.solve(b);
  const double bnorm = b.norm();
  auto residual = [&](const Vector& y) {
    return bnorm > 0.0 ? (b - system.matrix * y).norm() / bnorm : (system.matrix * y).norm();
  };
  // One refinement step always, more only if the residual target is missed.
  for (int step = 0; step < 4; ++step) {
    if (step >= 1 && residual(x) <= kResidualTolerance) break;
    x += lu.solve(b - system.matrix * x);
    sol.diagnostics.refinement_steps = step + 1;
  }
  sol.diagnostics.relative_residual = residual(x);
  if (!(sol.diagnostics.relative_residual <= kResidualTolerance)) {
    std::ostringstream msg;
    msg << "solve_direct: relative residual " << sol.diagnostics.relative_residual
        << " above tolerance after refinement";
    throw SingularSystemError(msg.str(), lu.pivot_floor());
  }
  sol.values = system.expand(x);
  return sol;
}

double h1_seminorm(const AnnulusMesh& mesh, const Vector& nodal) {
  const SparseSymMatrix k1 = assemble_weighted_stiffness(mesh, 1.0, 1.0);
  return std::sqrt(std::max(0.0, nodal.dot(k1 * nodal)));
}

double h1_seminorm(const FemSolution& solution) {
  return h1_seminorm(*solution.mesh, solution.values);
}

double l2_norm(const AnnulusMesh& mesh, const Vector& nodal) {
  const SparseSymMatrix m = assemble_mass(mesh);
  return std::sqrt(std::max(0.0, nodal.dot(m * nodal)));
}

double l2_norm(const FemSolution& solution) { return l2_norm(*solution.mesh, solution.values); }

SmallestSingular smallest_singular(const SparseSymMatrix& matrix) {
  try {
    const IndefiniteFactorization lu(matrix);
    return smallest_singular(matrix, lu);
  } catch (const SingularSystemError&) {
    return SmallestSingular{0.0, true, 0};
  }
}

SmallestSingular smallest_singular(const SparseSymMatrix& matrix,
                                   const IndefiniteFactorization& lu) {
  constexpr int kMaxIterations = 200;
  constexpr double kRelTol = 1e-8;
  const Eigen::Index n = matrix.dimension();
  if (n == 0) return SmallestSingular{std::numeric_limits<double>::infinity(), false, 0};
  const Eigen::Index block = std::min<Eigen::Index>(4, n);

  std::mt19937_64 rng(0x5eedULL);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd x(n, block);
  for (Eigen::Index j = 0; j < block; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) x(i, j) = normal(rng);
  }
  auto orthonormalize = [block, n](const Eigen::MatrixXd& m) -> Eigen::MatrixXd {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
    return qr.householderQ() * Eigen::MatrixXd::Identity(n, block);
  };
  x = orthonormalize(x);

  double previous = std::numeric_limits<double>::infinity();
  Eigen::MatrixXd y(n, block);
  for (int it = 1; it <= kMaxIterations; ++it) {
    for (Eigen::Index j = 0; j < block; ++j) y.col(j) = lu.solve(x.col(j));
    Eigen::MatrixXd g = x.transpose() * y;
    g = 0.5 * (g + g.transpose()).eval();
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(g, Eigen::EigenvaluesOnly);
    const double dominant = eig.eigenvalues().cwiseAbs().maxCoeff();
    if (!std::isfinite(dominant)) return SmallestSingular{0.0, true, it};
    const double estimate = 1.0 / dominant;
    if (std::abs(estimate - previous) <= kRelTol * estimate) {
      return SmallestSingular{estimate, false, it};
    }
    previous = estimate;
    x = orthonormalize(y);
  }
  throw ConvergenceError("smallest_singular: inverse iteration did not converge in 200 steps");
}

Inertia matrix_inertia(const SparseSymMatrix& matrix) {
  Eigen::SimplicialLDLT<SparseSymMatrix::Storage, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt(
      matrix.storage());
  if (ldlt.info() != Eigen::Success) {
    throw SingularSystemError("matrix_inertia: LDL^T factorization broke down", 0.0);
  }
  const double tol = 1e-14 * matrix.max_norm();
  Inertia out;
  const Vector d = ldlt.vectorD();
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    if (d[i] > tol) {
      ++out.positive;
    } else if (d[i] < -tol) {
      ++out.negative;
    } else {
      ++out.zero;
    }
  }
  return out;
}

SingularCoefficients extract_singular_coefficients(
    const std::function<double(double, double)>& field, Ring ring, const SpectralData& spectral,
    int angular_samples) {
  const double mu = spectral.mu;
  if (!(ring.r_lo > 0.0 && ring.r_hi > ring.r_lo)) {
    throw FitError("extract_singular_coefficients: ring must satisfy 0 < r_lo < r_hi");
  }
  if (ring.r_hi / ring.r_lo < std::exp(kPi / (4.0 * mu))) {
    throw FitError("extract_singular_coefficients: ring too thin, need r_hi/r_lo >= e^{pi/(4 mu)}");
  }
  angular_samples = std::max(angular_samples, 16);

  // Composite trapezoid on [0, pi/4] and [pi/4, pi] separately (phi has a kink at pi/4).
  struct Sample {
    double theta, weight;
  };
  std::vector<Sample> samples;
  const int n_minus = std::max(4, angular_samples / 4);
  const int n_plus = std::max(4, angular_samples - n_minus);
  auto add_piece = [&samples](double a, double b, int cells, double sigma) {
    const double h = (b - a) / cells;
    for (int k = 0; k <= cells; ++k) {
      const double w = (k == 0 || k == cells) ? 0.5 * h : h;
      samples.push_back({k == cells ? b : a + h * k, w * sigma});
    }
  };
  add_piece(0.0, kInterfaceAngle, n_minus, spectral.contrast.sigma_minus());
  add_piece(kInterfaceAngle, kPi, n_plus, spectral.contrast.sigma_plus());

  std::vector<double> phi(samples.size());
  double denom = 0.0;
  for (std::size_t k = 0; k < samples.size(); ++k) {
    phi[k] = phi_eval(samples[k].theta, spectral);
    denom += samples[k].weight * phi[k] * phi[k];
  }

  Eigen::MatrixXcd basis(kExtractionRadii, 5);
  Eigen::VectorXcd proj(kExtractionRadii);
  const double log_ratio = std::log(ring.r_hi / ring.r_lo);
  for (int q = 0; q < kExtractionRadii; ++q) {
    const double r = q == kExtractionRadii - 1
                         ? ring.r_hi
                         : ring.r_lo * std::exp(log_ratio * q / (kExtractionRadii - 1));
    double num = 0.0;
    for (std::size_t k = 0; k < samples.size(); ++k) {
      num += samples[k].weight * field(r, samples[k].theta) * phi[k];
    }
    proj[q] = num / denom;
    const Complex w = oscillating_power(r, mu);
    basis(q, 0) = w;
    basis(q, 1) = std::conj(w);
    basis(q, 2) = r * r;
    basis(q, 3) = 1.0 / (r * r);
    basis(q, 4) = 1.0;
  }

  Eigen::VectorXd scale(5);
  for (int c = 0; c < 5; ++c) {
    scale[c] = basis.col(c).norm();
    basis.col(c) /= scale[c];
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXcd> qr(basis);
  qr.setThreshold(1e-10);
  if (qr.rank() < 5) throw FitError("extract_singular_coefficients: fit basis is rank deficient");
  Eigen::VectorXcd coef = qr.solve(proj);
  const double pnorm = proj.norm();
  const double res = (basis * coef - proj).norm();
  for (int c = 0; c < 5; ++c) coef[c] /= scale[c];

  SingularCoefficients out;
  out.c_plus = coef[0];
  out.c_minus = coef[1];
  out.fit_residual = pnorm > 0.0 ? res / pnorm : res;
  return out;
}

SingularCoefficients extract_singular_coefficients(const FemSolution& solution, Ring ring,
                                                   const SpectralData& spectral) {
  const AnnulusMesh& mesh = *solution.mesh;
  if (mesh.grid() && !(ring.r_lo > mesh.params().delta && ring.r_hi < 1.0)) {
    throw FitError("extract_singular_coefficients: ring must lie inside (delta, 1)");
  }
  const PointLocator locator(mesh);
  const int samples = mesh.grid() ? 8 * mesh.params().n_theta : 2048;
  const std::vector<double> nodal(solution.values.data(),
                                  solution.values.data() + solution.values.size());
  auto field = [&](double r, double theta) {
    return locator.interpolate(nodal, {r * std::cos(theta), r * std::sin(theta)});
  };
  return extract_singular_coefficients(field, ring, spectral, samples);
}

}  // namespace cornersim
