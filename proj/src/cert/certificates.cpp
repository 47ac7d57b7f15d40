#include "cert/certificates.hpp"

#include <cmath>
#include <numbers>
#include <variant>

#include "core/errors.hpp"
#include "spectral/neumann.hpp"
#include "torsion/solver.hpp"

namespace conekit::cert {

namespace {
constexpr double kPi = std::numbers::pi;

geom::Vec3 checked_unit(const geom::Vec3& e) {
  if (std::abs(e.norm() - 1.0) > 1e-10)
    throw ConfigError("direction e must be a unit vector");
  return e;
}

Verdict band_verdict(double value, double threshold, double tol) {
  if (value < threshold - tol) return Verdict::kTrue;
  if (value > threshold + tol) return Verdict::kFalse;
  return Verdict::kInconclusive;
}

Verdict verdict_and(Verdict a, Verdict b) {
  if (a == Verdict::kFalse || b == Verdict::kFalse) return Verdict::kFalse;
  if (a == Verdict::kTrue && b == Verdict::kTrue) return Verdict::kTrue;
  return Verdict::kInconclusive;
}
}  // namespace

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::kTrue: return "true";
    case Verdict::kFalse: return "false";
    default: return "inconclusive";
  }
}

double criterion_integral_numeric(const geom::SphericalMesh& mesh,
                                  const geom::Vec3& e) {
  checked_unit(e);
  if (mesh.boundary.empty())
    throw ConfigError("criterion integral needs a nonempty boundary");
  double acc = 0.0;
  for (const auto& bs : mesh.boundary)
    acc += bs.weight * mesh.nodes[bs.node].dot(e) * bs.conormal.dot(e);
  return acc;
}

double wallis_integral(int m) {
  if (m < 0) throw ConfigError("negative sine power");
  double even = kPi, odd = 2.0;  // W_0, W_1
  if (m == 0) return even;
  if (m == 1) return odd;
  double w = 0.0;
  for (int i = 2; i <= m; ++i) {
    w = (i - 1.0) / i * (i % 2 == 0 ? even : odd);
    (i % 2 == 0 ? even : odd) = w;
  }
  return w;
}

double cap_criterion_closed_form(double theta, double r, int dim) {
  if (dim < 3) throw ConfigError("cap criterion needs N >= 3");
  if (!(theta > -kPi / 2 && theta < kPi / 2)) throw ConfigError("theta range");
  if (!(r > 0.0 && r < 1.0)) throw ConfigError("r out of (0,1)");
  const double c_n = (dim - 2.0) / (dim - 1.0) * geom::unit_ball_volume(dim - 2) *
                     wallis_integral(dim - 3);
  const double s = std::sin(theta);
  return r * std::pow(1.0 - r * r, (dim - 1.0) / 2.0) * c_n *
         (1.0 - dim * s * s);
}

TunnelCriterion tunnel_criterion(double theta, double r, double eps, int dim,
                                 const geom::SphericalMesh& mesh) {
  geom::validate_spec(geom::TunnelSpec{theta, r, eps});
  if (dim != 3) throw ConfigError("tunnel criterion is meshable only for N = 3");
  TunnelCriterion out;
  out.cap_part = 2.0 * cap_criterion_closed_form(theta, r, dim);
  // trapezoid over the wall polylines: boundary edges with both endpoints on
  // the same plane x2 = +-eps (corner halves stay with the wall this way)
  std::map<std::pair<int, int>, int> edge_count;
  for (const auto& cell : mesh.cells)
    for (int a = 0; a < 3; ++a) {
      int u = cell[a], v = cell[(a + 1) % 3];
      edge_count[{std::min(u, v), std::max(u, v)}]++;
    }
  auto on_wall = [&](int node, double side) {
    return std::abs(mesh.nodes[node].y() - side * eps) < 1e-9;
  };
  double wall = 0.0;
  bool found = false;
  for (const auto& [edge, count] : edge_count) {
    if (count != 1) continue;
    for (double side : {-1.0, 1.0}) {
      if (!on_wall(edge.first, side) || !on_wall(edge.second, side)) continue;
      const auto &xa = mesh.nodes[edge.first], &xb = mesh.nodes[edge.second];
      const double len = (xa - xb).norm();
      wall += 0.5 * len * (-eps) * (xa.x() * xa.x() + xb.x() * xb.x());
      found = true;
    }
  }
  if (!found)
    throw ConfigError("mesh carries no tunnel wall: does not match the spec");
  out.wall_part = wall;
  out.total = out.cap_part + out.wall_part;
  return out;
}

CertificateReport check_condition_1_7(const geom::SphericalMesh& mesh,
                                      const geom::Vec3& e,
                                      const geom::DomainSpec* spec_hint) {
  checked_unit(e);
  CertificateReport rep;
  rep.dim = mesh.dim;
  rep.threshold = mesh.dim - 1.0;
  rep.area = geom::surface_measure(mesh);
  rep.hemisphere_area = geom::hemisphere_measure(mesh.dim);

  auto spectrum = spectral::solve_neumann_spectrum(mesh, 2);
  rep.lambda1 = spectrum.lambda1();
  rep.eig_residual = *std::max_element(spectrum.residuals.begin(),
                                       spectrum.residuals.end());

  std::vector<double> ue(mesh.nodes.size());
  for (size_t i = 0; i < ue.size(); ++i) ue[i] = mesh.nodes[i].dot(e);
  rep.mean_constraint = geom::integrate_on_domain(mesh, ue);
  rep.criterion_integral = criterion_integral_numeric(mesh, e);
  rep.prop52_applicable = std::abs(rep.mean_constraint) <= 1e-6 * rep.area;

  const double tol_eig = 10.0 * std::max(rep.eig_residual, 1e-12);
  rep.lambda1_lt = band_verdict(rep.lambda1, rep.threshold, tol_eig);
  rep.area_lt = band_verdict(rep.area, rep.hemisphere_area, 1e-6 * rep.area);
  rep.condition_1_7 = verdict_and(rep.lambda1_lt, rep.area_lt);

  rep.second_variation_torsion =
      (spectrum.alphas[1] - 1.0) / (mesh.dim * mesh.dim);
  rep.second_variation_perimeter = rep.lambda1 - rep.threshold;

  if (spec_hint) {
    if (const auto* c = std::get_if<geom::CapSpec>(spec_hint)) {
      if (c->r > 0.0)
        rep.oracle_deltas["criterion_vs_cap_closed_form"] =
            rep.criterion_integral -
            cap_criterion_closed_form(c->theta, c->r, mesh.dim);
      rep.oracle_deltas["area_vs_closed_form"] =
          rep.area - 2.0 * kPi * (1.0 - c->r);
    } else if (const auto* t = std::get_if<geom::TubeSpec>(spec_hint)) {
      rep.oracle_deltas["criterion_vs_tube_closed_form"] =
          rep.criterion_integral +
          2.0 * kPi * std::sin(t->r) * std::pow(std::cos(t->r), 2);
      rep.oracle_deltas["area_vs_closed_form"] =
          rep.area - 4.0 * kPi * std::sin(t->r);
    } else if (const auto* tn = std::get_if<geom::TunnelSpec>(spec_hint)) {
      rep.oracle_deltas["criterion_vs_tunnel_parts"] =
          rep.criterion_integral -
          tunnel_criterion(tn->theta, tn->r, tn->eps, mesh.dim, mesh).total;
    } else if (const auto* a = std::get_if<geom::ArcSpec>(spec_hint)) {
      rep.oracle_deltas["lambda1_vs_closed_form"] =
          rep.lambda1 - std::pow(kPi / a->beta, 2);
    }
  }
  return rep;
}

double torsion_second_variation_value(const spectral::NeumannSpectrum& spectrum,
                                      const std::vector<double>& coeffs,
                                      int dim) {
  double norm2 = 0.0;
  for (double c : coeffs) norm2 += c * c;
  if (!(norm2 > 0.0)) throw ConfigError("empty expansion");
  std::vector<double> unit(coeffs);
  for (double& c : unit) c /= std::sqrt(norm2);
  return torsion::torsion_second_variation_at_zero(spectrum, unit, dim);
}

double perimeter_second_variation_value(const geom::SphericalMesh& mesh,
                                        const std::vector<double>& v) {
  if (v.size() != mesh.nodes.size()) throw ConfigError("field size mismatch");
  const double mean = geom::integrate_on_domain(mesh, v);
  double l2 = 0.0;
  for (size_t i = 0; i < v.size(); ++i)
    l2 += mesh.node_weights[i] * v[i] * v[i];
  if (std::abs(mean) > 1e-8 * std::sqrt(l2 * mesh.total_measure) + 1e-300)
    throw ConfigError("perimeter second variation requires a zero-mean field");
  auto forms = spectral::assemble_lb_neumann(mesh);
  Eigen::Map<const Eigen::VectorXd> x(v.data(), static_cast<long>(v.size()));
  return x.dot(forms.stiffness * x) -
         (mesh.dim - 1.0) * x.dot(forms.mass * x);
}

}  // namespace conekit::cert
