#pragma once

#include <string>
#include <vector>

#include "geom/spherical_mesh.hpp"
#include "graph/radial_graph.hpp"

namespace conekit::flow {

enum class Functional { kPerimeter, kTorsion };

struct FlowInit {
  enum Kind { kConstant, kEigenmode, kFile } kind = kConstant;
  int mode_index = 1;
  double amplitude = 0.0;
  std::string path;
};

struct FlowConfig {
  Functional functional = Functional::kPerimeter;
  double c_target = 1.0;
  FlowInit init;
  double step0 = 1.0;
  double shrink = 0.5;
  double grow = 1.3;
  int grow_after = 3;  // consecutive accepted steps before growing
  double armijo = 1e-4;
  int max_iters = 2000;
  double tol_grad = 1e-8;      // projected-gradient norm
  double tol_residual = 1e-5;  // CMC / flux-constancy certification
  int torsion_ns = 64;         // radial cells of the inner torsion solves
  bool h1_precondition = false;

  void validate() const;
};

struct FlowRecord {
  int iter = 0;
  double value = 0.0;
  double volume = 0.0;
  double grad_norm = 0.0;
  double step = 0.0;
  double residual = 0.0;  // CMC norm (perimeter) or flux CoV (torsion)
};

struct FlowTrace {
  std::vector<FlowRecord> records;
  bool converged = false;
  bool stalled = false;
  double lambda_hat = 0.0;  // multiplier estimate at the final iterate
  // perimeter diagnostics
  double cmc_residual_norm = 0.0;
  double ortho_residual_sup = 0.0;
  // torsion diagnostics
  double flux_mean = 0.0;
  double flux_cov = 0.0;              // std / |mean| over Gamma
  double lambda_from_flux = 0.0;      // -1/2 mean(flux)^2
  // radial-symmetry flag of the final graph
  bool nonradial = false;
  double phi_mean = 0.0;
  double phi_std = 0.0;
};

struct ProjectedGradient {
  std::vector<double> direction;  // descent direction; step is phi - s * d
  double norm = 0.0;   // plain Riesz norm of the projected derivative
                       // (independent of the preconditioner choice)
  double lambda_hat = 0.0;  // multiplier estimate
  double decrease = 0.0;    // predicted first-order decrease rate
};

// Riesz representative of the constrained derivative in the weighted
// L^2(e^{N phi} dsigma) product, projected onto the volume-preserving
// tangent space.  The torsion gradient reuses the flux of the given solve.
ProjectedGradient riesz_projected_gradient(const graph::RadialGraph& g,
                                           Functional functional,
                                           int torsion_ns,
                                           bool h1_precondition = false);

struct FlowResult {
  FlowTrace trace;
  graph::RadialGraph final_graph;
};

FlowResult run_flow(const FlowConfig& cfg, const geom::SphericalMesh& mesh);

struct BaselineComparison {
  double baseline = 0.0;  // sector value at the same volume, same grid
  double achieved = 0.0;
  double margin = 0.0;                 // baseline - achieved
  double halfspace_reference = 0.0;    // analytic half-space value, reported
};

BaselineComparison baseline_compare(const geom::SphericalMesh& mesh,
                                    double c_target, Functional functional,
                                    double achieved, int torsion_ns = 64);

}  // namespace conekit::flow
