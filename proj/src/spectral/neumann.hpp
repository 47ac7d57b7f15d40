#pragma once

#include <Eigen/Sparse>
#include <vector>

#include "geom/spherical_mesh.hpp"

namespace conekit::spectral {

using SparseMat = Eigen::SparseMatrix<double, Eigen::RowMajor>;

// P1 stiffness and consistent mass of the Laplace-Beltrami operator on D
// with natural (Neumann) boundary conditions.
struct AssembledForms {
  SparseMat stiffness;
  SparseMat mass;
};

// Row-gather assembly, parallel over rows with a fixed traversal order.
AssembledForms assemble_lb_neumann(const geom::SphericalMesh& mesh);

// Cell-scatter reference assembly kept for testing the parallel kernel.
AssembledForms assemble_lb_neumann_serial(const geom::SphericalMesh& mesh);

struct NeumannSpectrum {
  int dim = 3;                             // ambient dimension N
  std::vector<double> lambdas;             // k+1 values, ascending, lambda_0 ~ 0
  std::vector<std::vector<double>> modes;  // nodal fields, mass-orthonormal
  std::vector<double> alphas;              // harmonic exponents per mode
  std::vector<double> residuals;           // ||K w - lambda M w|| / ||M w||

  double lambda1() const { return lambdas.at(1); }
};

// First k+1 eigenpairs of K w = lambda M w.  Dense solve up to 3000 unknowns,
// shift-invert Lanczos above.  Throws NumericalError with the achieved
// residual if the iteration does not reach 1e-8.
NeumannSpectrum solve_neumann_spectrum(const geom::SphericalMesh& mesh, int k);

// alpha solving alpha^2 + (N-2) alpha - lambda = 0, nonnegative root.
double alpha_exponent(double lambda, int dim);

double rayleigh_quotient(const geom::SphericalMesh& mesh,
                         const std::vector<double>& v);

// L^2(D) expansion coefficients (v, w_j) under the consistent mass product.
std::vector<double> expansion_coefficients(const AssembledForms& forms,
                                           const NeumannSpectrum& spectrum,
                                           const std::vector<double>& v);

}  // namespace conekit::spectral
