#include "spectral/neumann.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <random>

#include "core/errors.hpp"
#include "core/parallel.hpp"

namespace conekit::spectral {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

double mass_entry(int arity, double measure, bool diagonal) {
  // simplex P1 mass: measure * (1 + delta_ij) / ((d+1)(d+2))
  const double d = arity - 1;
  return measure * (diagonal ? 2.0 : 1.0) / ((d + 1.0) * (d + 2.0));
}

void fix_sign(std::vector<double>& w) {
  size_t imax = 0;
  for (size_t i = 1; i < w.size(); ++i)
    if (std::abs(w[i]) > std::abs(w[imax])) imax = i;
  if (w[imax] < 0.0)
    for (double& x : w) x = -x;
}

VectorXd to_vec(const std::vector<double>& v) {
  return Eigen::Map<const VectorXd>(v.data(), static_cast<long>(v.size()));
}

}  // namespace

AssembledForms assemble_lb_neumann_serial(const geom::SphericalMesh& mesh) {
  const int n = mesh.node_count();
  const int arity = mesh.cell_arity();
  std::vector<Eigen::Triplet<double>> kt, mt;
  kt.reserve(mesh.cells.size() * arity * arity);
  mt.reserve(mesh.cells.size() * arity * arity);
  for (size_t c = 0; c < mesh.cells.size(); ++c) {
    const auto& cell = mesh.cells[c];
    const auto& g = mesh.cell_geom[c];
    for (int a = 0; a < arity; ++a)
      for (int b = 0; b < arity; ++b) {
        kt.emplace_back(cell[a], cell[b], g.measure * g.grad[a].dot(g.grad[b]));
        mt.emplace_back(cell[a], cell[b], mass_entry(arity, g.measure, a == b));
      }
  }
  AssembledForms forms;
  forms.stiffness.resize(n, n);
  forms.mass.resize(n, n);
  forms.stiffness.setFromTriplets(kt.begin(), kt.end());
  forms.mass.setFromTriplets(mt.begin(), mt.end());
  return forms;
}

AssembledForms assemble_lb_neumann(const geom::SphericalMesh& mesh) {
  const int n = mesh.node_count();
  const int arity = mesh.cell_arity();
  const auto& incident = mesh.node_cells;  // fixed traversal order
  // sparsity pattern per row
  std::vector<std::vector<int>> cols(n);
  par::for_each_index(static_cast<size_t>(n), [&](size_t i) {
    auto& ci = cols[i];
    for (int c : incident[i])
      for (int a = 0; a < arity; ++a) ci.push_back(mesh.cells[c][a]);
    std::sort(ci.begin(), ci.end());
    ci.erase(std::unique(ci.begin(), ci.end()), ci.end());
  });
  AssembledForms forms;
  forms.stiffness.resize(n, n);
  forms.mass.resize(n, n);
  Eigen::VectorXi row_sizes(n);
  for (int i = 0; i < n; ++i) row_sizes[i] = static_cast<int>(cols[i].size());
  forms.stiffness.reserve(row_sizes);
  forms.mass.reserve(row_sizes);
  for (int i = 0; i < n; ++i)
    for (int j : cols[i]) {
      forms.stiffness.insert(i, j) = 0.0;
      forms.mass.insert(i, j) = 0.0;
    }
  forms.stiffness.makeCompressed();
  forms.mass.makeCompressed();
  // fill values row by row; each row is owned by one thread
  par::for_each_index(static_cast<size_t>(n), [&](size_t i) {
    const int* idx = forms.stiffness.innerIndexPtr();
    const int lo = forms.stiffness.outerIndexPtr()[i];
    const int hi = forms.stiffness.outerIndexPtr()[i + 1];
    double* kv = forms.stiffness.valuePtr();
    double* mv = forms.mass.valuePtr();
    auto slot = [&](int j) {
      const int* p = std::lower_bound(idx + lo, idx + hi, j);
      return static_cast<int>(p - idx);
    };
    for (int c : incident[i]) {
      const auto& cell = mesh.cells[c];
      const auto& g = mesh.cell_geom[c];
      int a = 0;
      while (cell[a] != static_cast<int>(i)) ++a;
      for (int b = 0; b < arity; ++b) {
        const int s = slot(cell[b]);
        kv[s] += g.measure * g.grad[a].dot(g.grad[b]);
        mv[s] += mass_entry(arity, g.measure, a == b);
      }
    }
  });
  return forms;
}

double alpha_exponent(double lambda, int dim) {
  if (lambda < 0.0) throw ConfigError("alpha_exponent: negative eigenvalue");
  const double half = (dim - 2) / 2.0;
  return -half + std::sqrt(half * half + lambda);
}

double rayleigh_quotient(const geom::SphericalMesh& mesh,
                         const std::vector<double>& v) {
  if (v.size() != mesh.nodes.size())
    throw ConfigError("field size does not match node count");
  AssembledForms forms = assemble_lb_neumann(mesh);
  VectorXd x = to_vec(v);
  const double mm = x.dot(forms.mass * x);
  if (!(mm > 0.0)) throw ConfigError("rayleigh_quotient of the zero field");
  return x.dot(forms.stiffness * x) / mm;
}

namespace {

struct EigPairs {
  std::vector<double> values;
  std::vector<VectorXd> vectors;  // mass-orthonormal
};

EigPairs dense_solve(const AssembledForms& forms, int count) {
  MatrixXd K = MatrixXd(forms.stiffness);
  MatrixXd M = MatrixXd(forms.mass);
  Eigen::GeneralizedSelfAdjointEigenSolver<MatrixXd> ges(K, M);
  if (ges.info() != Eigen::Success)
    throw NumericalError("dense generalized eigensolver failed");
  EigPairs out;
  for (int j = 0; j < count; ++j) {
    out.values.push_back(ges.eigenvalues()[j]);
    out.vectors.push_back(ges.eigenvectors().col(j));
  }
  return out;
}

// Shift-invert Lanczos with full reorthogonalization in the M inner product.
EigPairs lanczos_solve(const AssembledForms& forms, int count) {
  const int n = static_cast<int>(forms.stiffness.rows());
  const double sigma = -1e-3;
  Eigen::SparseMatrix<double> A =
      Eigen::SparseMatrix<double>(forms.stiffness) -
      sigma * Eigen::SparseMatrix<double>(forms.mass);
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(A);
  if (ldlt.info() != Eigen::Success)
    throw NumericalError("factorization failed in shift-invert eigensolver");
  Eigen::SparseMatrix<double> M(forms.mass);

  std::mt19937_64 rng(0x5DEECE66Dull);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  VectorXd v0(n);
  for (int i = 0; i < n; ++i) v0[i] = unif(rng);

  const int m = std::min(n, std::max(3 * count + 30, 60));
  std::vector<VectorXd> basis;
  std::vector<double> alpha, beta;
  VectorXd v = v0 / std::sqrt(v0.dot(M * v0));
  basis.push_back(v);
  for (int j = 0; j < m; ++j) {
    VectorXd w = ldlt.solve(M * basis[j]);
    double aj = w.dot(M * basis[j]);
    alpha.push_back(aj);
    w -= aj * basis[j];
    if (j > 0) w -= beta[j - 1] * basis[j - 1];
    for (const auto& q : basis) w -= (w.dot(M * q)) * q;  // full reorth
    double bj = std::sqrt(std::max(0.0, w.dot(M * w)));
    if (bj < 1e-14) break;
    beta.push_back(bj);
    if (j + 1 < m) basis.push_back(w / bj);
  }
  const int steps = static_cast<int>(alpha.size());
  MatrixXd T = MatrixXd::Zero(steps, steps);
  for (int j = 0; j < steps; ++j) {
    T(j, j) = alpha[j];
    if (j + 1 < steps) T(j, j + 1) = T(j + 1, j) = beta[j];
  }
  Eigen::SelfAdjointEigenSolver<MatrixXd> tes(T);
  Eigen::SparseMatrix<double> K(forms.stiffness);
  // largest theta = 1/(lambda - sigma) corresponds to the smallest lambda
  EigPairs out;
  for (int j = steps - 1; j >= 0 && static_cast<int>(out.values.size()) < count;
       --j) {
    const double theta = tes.eigenvalues()[j];
    if (theta <= 0.0) break;
    VectorXd y = VectorXd::Zero(n);
    for (int i = 0; i < static_cast<int>(basis.size()); ++i)
      y += tes.eigenvectors()(i, j) * basis[i];
    y /= std::sqrt(y.dot(M * y));
    double lambda = sigma + 1.0 / theta;
    // Rayleigh-quotient polish; orthogonalize against accepted pairs so
    // multiple eigenvalues keep a full eigenbasis.
    for (int it = 0; it < 4; ++it) {
      VectorXd res = K * y - lambda * (M * y);
      if (res.norm() <= 1e-10 * (M * y).norm()) break;
      const double tau = 1e-10 * (1.0 + std::abs(lambda));
      Eigen::SparseMatrix<double> S = K - (lambda - tau) * M;
      Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> rqi(S);
      if (rqi.info() != Eigen::Success) break;
      VectorXd z = rqi.solve(M * y);
      for (const auto& q : out.vectors) z -= (z.dot(M * q)) * q;
      const double norm = std::sqrt(z.dot(M * z));
      if (!(norm > 0.0)) break;
      y = z / norm;
      lambda = y.dot(K * y) / y.dot(M * y);
    }
    for (const auto& q : out.vectors) y -= (y.dot(M * q)) * q;
    y /= std::sqrt(y.dot(M * y));
    lambda = y.dot(K * y) / y.dot(M * y);
    out.values.push_back(lambda);
    out.vectors.push_back(y);
  }
  if (static_cast<int>(out.values.size()) < count)
    throw NumericalError("shift-invert Lanczos recovered too few eigenpairs");
  return out;
}

}  // namespace

NeumannSpectrum solve_neumann_spectrum(const geom::SphericalMesh& mesh, int k) {
  const int n = mesh.node_count();
  if (k < 1) throw ConfigError("eigenpair count k must be >= 1");
  if (k >= n) throw ConfigError("eigenpair count k must be below the node count");
  AssembledForms forms = assemble_lb_neumann(mesh);
  const int count = k + 1;
  EigPairs pairs = n <= 3000 ? dense_solve(forms, count)
                             : lanczos_solve(forms, count);
  NeumannSpectrum spec;
  spec.dim = mesh.dim;
  for (int j = 0; j < count; ++j) {
    const double lambda = std::max(0.0, pairs.values[j]);
    const VectorXd& w = pairs.vectors[j];
    VectorXd res = forms.stiffness * w - pairs.values[j] * (forms.mass * w);
    const double rel = res.norm() / (forms.mass * w).norm();
    if (rel > 1e-8)
      throw NumericalError("eigensolver residual " + std::to_string(rel) +
                           " above 1e-8 for pair " + std::to_string(j));
    spec.lambdas.push_back(lambda);
    spec.residuals.push_back(rel);
    std::vector<double> mode(w.data(), w.data() + n);
    fix_sign(mode);
    spec.modes.push_back(std::move(mode));
    spec.alphas.push_back(alpha_exponent(lambda, mesh.dim));
  }
  return spec;
}

std::vector<double> expansion_coefficients(const AssembledForms& forms,
                                           const NeumannSpectrum& spectrum,
                                           const std::vector<double>& v) {
  VectorXd x = to_vec(v);
  VectorXd mx = forms.mass * x;
  std::vector<double> coeffs;
  coeffs.reserve(spectrum.modes.size());
  for (const auto& mode : spectrum.modes) coeffs.push_back(to_vec(mode).dot(mx));
  return coeffs;
}

}  // namespace conekit::spectral
