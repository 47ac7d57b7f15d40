#pragma once

#include <map>
#include <string>
#include <vector>

#include "geom/spherical_mesh.hpp"
#include "spectral/neumann.hpp"

namespace conekit::cert {

// Three-valued verdicts: outcomes inside the numerical tolerance band are
// reported as inconclusive instead of being forced to a boolean.
enum class Verdict { kTrue, kFalse, kInconclusive };

std::string to_string(Verdict v);

struct CertificateReport {
  int dim = 3;
  double lambda1 = 0.0;
  double threshold = 0.0;  // N - 1
  double eig_residual = 0.0;
  double area = 0.0;
  double hemisphere_area = 0.0;
  double criterion_integral = 0.0;  // int_{bd D} u_e du_e/dnu
  double mean_constraint = 0.0;     // int_D u_e
  Verdict lambda1_lt = Verdict::kInconclusive;
  Verdict area_lt = Verdict::kInconclusive;
  Verdict condition_1_7 = Verdict::kInconclusive;
  bool prop52_applicable = false;
  double second_variation_torsion = 0.0;    // (alpha_1 - 1) / N^2
  double second_variation_perimeter = 0.0;  // lambda_1 - (N - 1)
  std::map<std::string, double> oracle_deltas;
};

// Quadrature of u_e du_e/dnu over the relative boundary using the stored
// co-normals (du_e/dnu = nu . e on the sphere).
double criterion_integral_numeric(const geom::SphericalMesh& mesh,
                                  const geom::Vec3& e);

// int_0^pi sin^m(t) dt by the Wallis recursion.
double wallis_integral(int m);

// r (1-r^2)^{(N-1)/2} c_N (1 - N sin^2 theta) with the explicit constant
// c_N = (N-2)/(N-1) omega_{N-2} int_0^pi sin^{N-3}.
double cap_criterion_closed_form(double theta, double r, int dim);

struct TunnelCriterion {
  double total = 0.0;
  double cap_part = 0.0;   // the two spherical caps, closed form
  double wall_part = 0.0;  // -eps int x1^2 over the joining walls, quadrature
};

// Boundary criterion of the cap-tunnel-cap domain; needs its mesh for the
// wall quadrature.
TunnelCriterion tunnel_criterion(double theta, double r, double eps, int dim,
                                 const geom::SphericalMesh& mesh);

// Assembles the full instability certificate for direction e.  When the
// defining analytic spec is known, closed-form oracle deltas are attached.
CertificateReport check_condition_1_7(const geom::SphericalMesh& mesh,
                                      const geom::Vec3& e,
                                      const geom::DomainSpec* spec_hint = nullptr);

// Spectral second variation of the constrained torsional energy at the unit
// sector for a normalized expansion in the Neumann eigenbasis.
double torsion_second_variation_value(const spectral::NeumannSpectrum& spectrum,
                                      const std::vector<double>& coeffs,
                                      int dim);

// v' K v - (N-1) v' M v for zero-mean v (the perimeter second variation).
double perimeter_second_variation_value(const geom::SphericalMesh& mesh,
                                        const std::vector<double>& v);

}  // namespace conekit::cert
