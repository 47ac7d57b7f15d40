#pragma once

#include <vector>

#include "graph/radial_graph.hpp"
#include "spectral/neumann.hpp"

namespace conekit::torsion {

// 1-D section of the domain used by the mapped solver: the arc itself for
// N=2, or the colatitude profile of an axisymmetric N=3 domain (cap about
// the pole, or a tube), with lateral weight w(t) so that dsigma = w dt.
struct RadialSection {
  int dim = 2;
  std::vector<double> t;       // section coordinate, strictly increasing
  std::vector<double> weight;  // w(t) at the section nodes
  std::vector<double> phi;     // log-radius per section node
  std::vector<std::vector<int>> mesh_nodes;  // mesh nodes behind each entry
};

// Extracts the section from a radial graph.  Throws NumericalError when the
// dimension/symmetry combination is unsupported (N=3 needs an axisymmetric
// mesh and phi constant on each colatitude ring).
RadialSection section_from_graph(const graph::RadialGraph& g);

struct TorsionField {
  RadialSection section;
  int n_s = 0;
  std::vector<double> values;        // (n_s+1) x nq grid, s-major, row 0 = vertex
  std::vector<double> flux_section;  // du/dnu on Gamma_phi per section node
  std::vector<double> flux;          // the same, mapped onto the mesh nodes
  double energy_load = 0.0;          // -1/2 int u
  double energy_grad = 0.0;          // -1/2 int |grad u|^2
  double solver_residual = 0.0;

  double value(int i, int k) const {
    return values[static_cast<size_t>(i) * section.t.size() + k];
  }
  double energy_gap() const { return energy_load - energy_grad; }
};

// Mixed problem -Lap u = 1, u = 0 on Gamma_phi, natural condition on the
// cone wall, solved on the fixed grid (s, t) in (0,1] x section with
// rho = s e^{phi}.  The vertex s=0 carries a single collapsed unknown.
TorsionField solve_torsion(const graph::RadialGraph& g, int n_s);

struct TorsionEnergy {
  double value = 0.0;  // -1/2 int u (the reported energy)
  double grad_form = 0.0;
  double gap = 0.0;
};

TorsionEnergy torsion_energy(const graph::RadialGraph& g, int n_s);

// Exact directional derivative of the discrete torsional energy along v
// (differentiates the assembled mapped forms around the Galerkin solution).
// Converges to -1/2 int_D e^{N phi} v (du/dnu)^2 dsigma.
double energy_first_variation(const graph::RadialGraph& g,
                              const std::vector<double>& v,
                              const TorsionField& field);

// The boundary-flux quadrature of the same derivative,
// -1/2 int e^{N phi} v (du/dnu)^2; agrees with energy_first_variation up to
// discretization error and drives the flow's multiplier estimate.
double energy_first_variation_flux_form(const graph::RadialGraph& g,
                                        const std::vector<double>& v,
                                        const TorsionField& field);

// Nodal vector of the exact discrete derivative: sum_i G_i v_i equals
// energy_first_variation(g, v, field).
std::vector<double> energy_shape_gradient(const graph::RadialGraph& g,
                                          const TorsionField& field);

// Flux of the linearized torsion problem at phi = 0 for v expanded in the
// Neumann eigenbasis: sum_j c_j (alpha_j / N) w_j.
std::vector<double> linearized_torsion_flux(
    const spectral::NeumannSpectrum& spectrum,
    const std::vector<double>& coeffs);

// Spectral second variation of the constrained torsional energy at the unit
// sector: (sum_j alpha_j c_j^2 - sum_j c_j^2) / N^2 over the nontrivial
// modes.  The equivalent harmonic-extension energy route must agree to
// machine precision and is checked internally.
double torsion_second_variation_at_zero(
    const spectral::NeumannSpectrum& spectrum,
    const std::vector<double>& coeffs, int dim);

// The harmonic-extension route alone (radial integral of the extension
// energy), exposed for the cross-check tests.
double torsion_second_variation_extension_route(
    const spectral::NeumannSpectrum& spectrum,
    const std::vector<double>& coeffs, int dim);

}  // namespace conekit::torsion
