#pragma once

#include <Eigen/Dense>
#include <vector>

#include "geom/spherical_mesh.hpp"

namespace conekit::graph {

using geom::Vec3;

// Star-shaped domain Omega_phi = {s q : q in D, 0 < s < e^{phi(q)}},
// described by the log-radius phi on the nodes of D.
struct RadialGraph {
  const geom::SphericalMesh* mesh = nullptr;
  std::vector<double> phi;
  std::vector<Vec3> grad_phi;  // per-cell tangential gradient

  const geom::SphericalMesh& domain() const { return *mesh; }
};

// Builds the graph and the per-cell gradients; phi must be finite everywhere.
RadialGraph make_graph(const geom::SphericalMesh& mesh,
                       std::vector<double> phi);

// V(phi) = (1/N) int_D e^{N phi}
double volume(const RadialGraph& g);
// V'(phi)[v] = int e^{N phi} v,   V''(phi)[v,w] = N int e^{N phi} v w
double volume_grad(const RadialGraph& g, const std::vector<double>& v);
double volume_hess(const RadialGraph& g, const std::vector<double>& v,
                   const std::vector<double>& w);
// nodal Riesz weights of V': w_i e^{N phi_i}
std::vector<double> volume_gradient(const RadialGraph& g);

// P(phi) = int e^{(N-1) phi} sqrt(1 + |grad phi|^2)
double perimeter(const RadialGraph& g);
// exact derivative of the discrete perimeter along v
double perimeter_grad(const RadialGraph& g, const std::vector<double>& v);
// nodal vector dP/dphi_i (so perimeter_grad(g, v) = sum_i g_i v_i)
std::vector<double> perimeter_gradient(const RadialGraph& g);

// cell-scatter reference implementation of the same vector, kept for
// testing the row-parallel kernel
std::vector<double> perimeter_gradient_serial(const RadialGraph& g);

struct NodeGeometry {
  Vec3 normal = Vec3::Zero();                     // exterior unit normal
  Eigen::Matrix2d metric = Eigen::Matrix2d::Identity();
  Eigen::Matrix2d metric_inv = Eigen::Matrix2d::Identity();
  Eigen::Matrix2d second_fundamental = Eigen::Matrix2d::Zero();
  double mean_curvature = 0.0;
};

struct GraphGeometry {
  std::vector<NodeGeometry> at_node;
};

// Pointwise surface geometry of Gamma_phi at the quadrature nodes.  The
// Hessian of phi is recovered by a quadratic fit over the node patch
// (diagnostics only; the flow works with weak forms).
GraphGeometry graph_geometry(const RadialGraph& g);

// Mean curvature from the divergence form of the prescribed-curvature
// equation; an independent discrete route used to cross-check the trace form.
std::vector<double> mean_curvature_divergence_form(const RadialGraph& g);

struct CmcResidual {
  std::vector<double> nodal;  // residual of the constrained criticality
  double norm = 0.0;          // weighted L2 norm
};

// Weak residual of the volume-constrained perimeter criticality equation
// with the multiplier lambda, normalized by the weighted lumped mass.
CmcResidual cmc_residual(const RadialGraph& g, double lambda);

struct OrthogonalityResidual {
  std::vector<double> boundary;  // d(phi)/d(conormal), one per boundary sample
  double sup = 0.0;
};

OrthogonalityResidual orthogonality_residual(const RadialGraph& g);

// Shifts phi by a constant so that the volume equals c exactly.
RadialGraph project_volume(const RadialGraph& g, double c_target);

}  // namespace conekit::graph
