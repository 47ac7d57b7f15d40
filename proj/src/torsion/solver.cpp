#include "torsion/solver.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

#include "core/errors.hpp"

namespace conekit::torsion {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kGauss = 0.57735026918962576451;  // 1/sqrt(3)

double clamp1(double x) { return std::min(1.0, std::max(-1.0, x)); }

double lateral_weight(int dim, double t) {
  return dim == 2 ? 1.0 : 2.0 * kPi * std::sin(t);
}

// int_a^b s^p ds for p >= -1 (p = -1 needs a > 0)
double moment(double a, double b, int p) {
  if (p == -1) return std::log(b / a);
  return (std::pow(b, p + 1) - std::pow(a, p + 1)) / (p + 1);
}

// s-direction element integrals over [a,b], hat basis l0, l1
struct SInts {
  double R[2][2];  // int l'_a l'_b s^{N-1}
  double T[2][2];  // int l'_a l_b s^{N-2}
  double S[2][2];  // int l_a l_b s^{N-3}
  double L[2];     // int l_a s^{N-1}
};

SInts s_integrals(double a, double b, int N) {
  const double h = b - a;
  auto Mp = [&](int p) { return moment(a, b, p); };
  auto ell0 = [&](int p) { return (b * Mp(p) - Mp(p + 1)) / h; };
  auto ell1 = [&](int p) { return (Mp(p + 1) - a * Mp(p)) / h; };
  SInts si;
  const double mr = Mp(N - 1);
  si.R[0][0] = si.R[1][1] = mr / (h * h);
  si.R[0][1] = si.R[1][0] = -mr / (h * h);
  si.T[0][0] = -ell0(N - 2) / h;
  si.T[0][1] = -ell1(N - 2) / h;
  si.T[1][0] = ell0(N - 2) / h;
  si.T[1][1] = ell1(N - 2) / h;
  const double m0 = Mp(N - 3), m1 = Mp(N - 2), m2 = Mp(N - 1);
  si.S[0][0] = (b * b * m0 - 2.0 * b * m1 + m2) / (h * h);
  si.S[0][1] = si.S[1][0] = (-m2 + (a + b) * m1 - a * b * m0) / (h * h);
  si.S[1][1] = (m2 - 2.0 * a * m1 + a * a * m0) / (h * h);
  si.L[0] = ell0(N - 1);
  si.L[1] = ell1(N - 1);
  return si;
}

// Core element [0, h]: the bottom edge collapses onto the vertex dof, whose
// shape is l0(s) with no tangential variation.  Only the top-pair entry of
// the tangential block is needed, and it stays finite for N = 2.
struct CoreInts {
  double R00, R01, R11;
  double T01, T11;  // int l'_a l_b s^{N-2} entries that appear
  double S11;       // int l1 l1 s^{N-3} = M_{N-1}/h^2
  double L0, L1;
};

CoreInts core_integrals(double h, int N) {
  auto Mp = [&](int p) { return moment(0.0, h, p); };
  CoreInts ci;
  const double mr = Mp(N - 1);
  ci.R00 = ci.R11 = mr / (h * h);
  ci.R01 = -mr / (h * h);
  const double e0 = (h * Mp(N - 2) - Mp(N - 1)) / h;  // int l0 s^{N-2}
  const double e1 = Mp(N - 1) / h;                    // int l1 s^{N-2}
  ci.T01 = -e1 / h;
  ci.T11 = e1 / h;
  (void)e0;
  ci.S11 = Mp(N - 1) / (h * h);
  ci.L0 = (h * Mp(N - 1) - Mp(N)) / h;
  ci.L1 = Mp(N) / h;
  return ci;
}

// 2-point Gauss data of one section cell
struct TInts {
  double A0[2][2] = {};  // c_rad psi_a psi_b
  double A1[2][2] = {};  // c_cross psi_a psi'_b
  double A2[2][2] = {};  // c_tan psi'_a psi'_b
  double L[2] = {};      // c_load psi_a
  double A0c[2] = {};    // c_rad (1) psi_a
  double A1c[2] = {};    // c_cross (1) psi'_b
  double A0cc = 0.0;     // c_rad (1)(1)
  double Lc = 0.0;       // c_load (1)
  double BM[2][2] = {};  // boundary mass weight e^{(N-1)phi} slope w_lat
};

TInts t_integrals(const RadialSection& sec, int k) {
  const double t0 = sec.t[k], t1 = sec.t[k + 1];
  const double ht = t1 - t0;
  const double dphi = (sec.phi[k + 1] - sec.phi[k]) / ht;
  const int N = sec.dim;
  TInts ti;
  for (int gp = 0; gp < 2; ++gp) {
    const double xi = gp == 0 ? -kGauss : kGauss;
    const double tau = 0.5 * (t0 + t1) + 0.5 * ht * xi;
    const double wq = 0.5 * ht;
    const double psi[2] = {(t1 - tau) / ht, (tau - t0) / ht};
    const double dpsi[2] = {-1.0 / ht, 1.0 / ht};
    const double phi_g = psi[0] * sec.phi[k] + psi[1] * sec.phi[k + 1];
    const double wlat = lateral_weight(N, tau);
    const double base = wlat * std::exp((N - 2) * phi_g);
    const double c_rad = base * (1.0 + dphi * dphi);
    const double c_cross = base * dphi;
    const double c_tan = base;
    const double c_load = wlat * std::exp(N * phi_g);
    const double c_bmass =
        wlat * std::exp((N - 1) * phi_g) * std::sqrt(1.0 + dphi * dphi);
    for (int a = 0; a < 2; ++a) {
      ti.L[a] += wq * c_load * psi[a];
      ti.A0c[a] += wq * c_rad * psi[a];
      ti.A1c[a] += wq * c_cross * dpsi[a];
      for (int b = 0; b < 2; ++b) {
        ti.A0[a][b] += wq * c_rad * psi[a] * psi[b];
        ti.A1[a][b] += wq * c_cross * psi[a] * dpsi[b];
        ti.A2[a][b] += wq * c_tan * dpsi[a] * dpsi[b];
        ti.BM[a][b] += wq * c_bmass * psi[a] * psi[b];
      }
    }
    ti.A0cc += wq * c_rad;
    ti.Lc += wq * c_load;
  }
  return ti;
}

// Derivatives of the t-integrals with respect to the two section values
// phi_k, phi_{k+1} of the cell, for the discrete shape gradient.
struct TDeriv {
  TInts d[2];
};

TDeriv t_integral_derivs(const RadialSection& sec, int k) {
  const double t0 = sec.t[k], t1 = sec.t[k + 1];
  const double ht = t1 - t0;
  const double dphi = (sec.phi[k + 1] - sec.phi[k]) / ht;
  const int N = sec.dim;
  TDeriv td;
  for (int gp = 0; gp < 2; ++gp) {
    const double xi = gp == 0 ? -kGauss : kGauss;
    const double tau = 0.5 * (t0 + t1) + 0.5 * ht * xi;
    const double wq = 0.5 * ht;
    const double psi[2] = {(t1 - tau) / ht, (tau - t0) / ht};
    const double dpsi[2] = {-1.0 / ht, 1.0 / ht};
    const double phi_g = psi[0] * sec.phi[k] + psi[1] * sec.phi[k + 1];
    const double wlat = lateral_weight(N, tau);
    const double base = wlat * std::exp((N - 2) * phi_g);
    const double c_load = wlat * std::exp(N * phi_g);
    for (int al = 0; al < 2; ++al) {
      const double d_rad =
          base * ((N - 2) * psi[al] * (1.0 + dphi * dphi) +
                  2.0 * dphi * dpsi[al]);
      const double d_cross = base * ((N - 2) * psi[al] * dphi + dpsi[al]);
      const double d_tan = base * (N - 2) * psi[al];
      const double d_load = c_load * N * psi[al];
      TInts& ti = td.d[al];
      for (int a = 0; a < 2; ++a) {
        ti.L[a] += wq * d_load * psi[a];
        ti.A0c[a] += wq * d_rad * psi[a];
        ti.A1c[a] += wq * d_cross * dpsi[a];
        for (int b = 0; b < 2; ++b) {
          ti.A0[a][b] += wq * d_rad * psi[a] * psi[b];
          ti.A1[a][b] += wq * d_cross * psi[a] * dpsi[b];
          ti.A2[a][b] += wq * d_tan * dpsi[a] * dpsi[b];
        }
      }
      ti.A0cc += wq * d_rad;
      ti.Lc += wq * d_load;
    }
  }
  return td;
}

RadialSection arc_section(const graph::RadialGraph& g) {
  const auto& mesh = *g.mesh;
  std::vector<std::vector<int>> adj(mesh.nodes.size());
  for (const auto& cell : mesh.cells) {
    adj[cell[0]].push_back(cell[1]);
    adj[cell[1]].push_back(cell[0]);
  }
  int start = -1;
  for (size_t i = 0; i < adj.size(); ++i)
    if (adj[i].size() == 1) {
      start = static_cast<int>(i);
      break;
    }
  if (start < 0) throw NumericalError("arc mesh has no endpoint");
  RadialSection sec;
  sec.dim = 2;
  int prev = -1, cur = start;
  double t = 0.0;
  while (true) {
    sec.t.push_back(t);
    sec.weight.push_back(1.0);
    sec.phi.push_back(g.phi[cur]);
    sec.mesh_nodes.push_back({cur});
    int next = -1;
    for (int n : adj[cur])
      if (n != prev) next = n;
    if (next < 0) break;
    t += std::acos(clamp1(mesh.nodes[cur].dot(mesh.nodes[next])));
    prev = cur;
    cur = next;
  }
  if (sec.t.size() != mesh.nodes.size())
    throw NumericalError("arc mesh is not a simple chain");
  return sec;
}

RadialSection ring_section(const graph::RadialGraph& g) {
  const auto& mesh = *g.mesh;
  std::vector<std::pair<double, int>> colat(mesh.nodes.size());
  for (size_t i = 0; i < mesh.nodes.size(); ++i)
    colat[i] = {std::acos(clamp1(mesh.nodes[i].z())), static_cast<int>(i)};
  std::sort(colat.begin(), colat.end());
  RadialSection sec;
  sec.dim = 3;
  const double tol = 1e-7;
  size_t i = 0;
  while (i < colat.size()) {
    size_t j = i;
    while (j < colat.size() && colat[j].first - colat[i].first < tol) ++j;
    std::vector<int> ring;
    double tsum = 0.0;
    for (size_t q = i; q < j; ++q) {
      ring.push_back(colat[q].second);
      tsum += colat[q].first;
    }
    const double t = tsum / ring.size();
    double phi0 = g.phi[ring[0]];
    for (int node : ring)
      if (std::abs(g.phi[node] - phi0) > 1e-8 * (1.0 + std::abs(phi0)))
        throw NumericalError(
            "N=3 torsion solve requires phi constant on colatitude rings");
    sec.t.push_back(t);
    sec.weight.push_back(lateral_weight(3, t));
    sec.phi.push_back(phi0);
    sec.mesh_nodes.push_back(std::move(ring));
    i = j;
  }
  if (sec.t.size() < 3)
    throw NumericalError("N=3 torsion solve needs an axisymmetric ring mesh");
  // the ring lattice must reproduce the surface measure
  double sec_area = 0.0;
  for (size_t k = 0; k + 1 < sec.t.size(); ++k)
    sec_area += 2.0 * kPi *
                (std::cos(sec.t[k]) - std::cos(sec.t[k + 1]));
  if (std::abs(sec_area - mesh.total_measure) > 0.05 * mesh.total_measure)
    throw NumericalError(
        "mesh is not an axisymmetric cap/tube lattice; unsupported combination");
  return sec;
}

}  // namespace

RadialSection section_from_graph(const graph::RadialGraph& g) {
  if (g.mesh->dim == 2) return arc_section(g);
  return ring_section(g);
}

TorsionField solve_torsion(const graph::RadialGraph& g, int n_s) {
  if (n_s < 2) throw ConfigError("torsion grid needs n_s >= 2");
  TorsionField field;
  field.section = section_from_graph(g);
  field.n_s = n_s;
  const RadialSection& sec = field.section;
  const int nq = static_cast<int>(sec.t.size());
  const int N = sec.dim;
  const int n_full = 1 + n_s * nq;
  auto dof = [&](int i, int k) { return 1 + (i - 1) * nq + k; };

  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<size_t>(n_full) * 10);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n_full);
  const double hs = 1.0 / n_s;
  const CoreInts ci = core_integrals(hs, N);
  std::vector<SInts> si(n_s);
  for (int i = 1; i < n_s; ++i) si[i] = s_integrals(i * hs, (i + 1) * hs, N);

  for (int k = 0; k + 1 < nq; ++k) {
    const TInts ti = t_integrals(sec, k);
    // core element: vertex + the two dofs of row 1
    {
      const int d[2] = {dof(1, k), dof(1, k + 1)};
      trip.emplace_back(0, 0, ci.R00 * ti.A0cc);
      for (int b = 0; b < 2; ++b) {
        const double kv = ci.R01 * ti.A0c[b] - ci.T01 * ti.A1c[b];
        trip.emplace_back(0, d[b], kv);
        trip.emplace_back(d[b], 0, kv);
        rhs[d[b]] += ci.L1 * ti.L[b];
        for (int a = 0; a < 2; ++a)
          trip.emplace_back(d[a], d[b],
                            ci.R11 * ti.A0[a][b] -
                                ci.T11 * (ti.A1[a][b] + ti.A1[b][a]) +
                                ci.S11 * ti.A2[a][b]);
      }
      rhs[0] += ci.L0 * ti.Lc;
    }
    // regular elements, including the Dirichlet row i = n_s
    for (int i = 1; i < n_s; ++i) {
      const SInts& s = si[i];
      const int d[2][2] = {{dof(i, k), dof(i, k + 1)},
                           {dof(i + 1, k), dof(i + 1, k + 1)}};
      for (int sa = 0; sa < 2; ++sa)
        for (int a = 0; a < 2; ++a) {
          rhs[d[sa][a]] += s.L[sa] * ti.L[a];
          for (int sb = 0; sb < 2; ++sb)
            for (int b = 0; b < 2; ++b)
              trip.emplace_back(
                  d[sa][a], d[sb][b],
                  s.R[sa][sb] * ti.A0[a][b] -
                      (s.T[sa][sb] * ti.A1[a][b] + s.T[sb][sa] * ti.A1[b][a]) +
                      s.S[sa][sb] * ti.A2[a][b]);
        }
    }
  }
  Eigen::SparseMatrix<double> K_full(n_full, n_full);
  K_full.setFromTriplets(trip.begin(), trip.end());

  // Dirichlet on the last row: reduce, solve, re-embed
  const int n_int = n_full - nq;
  Eigen::SparseMatrix<double> K_int = K_full.topLeftCorner(n_int, n_int);
  Eigen::VectorXd f_int = rhs.head(n_int);
  Eigen::VectorXd u_int;
  if (n_int <= 200000) {
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(K_int);
    if (ldlt.info() != Eigen::Success)
      throw NumericalError("torsion factorization failed");
    u_int = ldlt.solve(f_int);
  } else {
    Eigen::ConjugateGradient<Eigen::SparseMatrix<double>,
                             Eigen::Lower | Eigen::Upper>
        cg(K_int);
    cg.setTolerance(1e-10);
    cg.setMaxIterations(20000);
    u_int = cg.solve(f_int);
    if (cg.info() != Eigen::Success)
      throw NumericalError("torsion CG did not converge, residual " +
                           std::to_string(cg.error()));
  }
  field.solver_residual = (K_int * u_int - f_int).norm() / f_int.norm();
  if (field.solver_residual > 1e-8)
    throw NumericalError("torsion solve residual " +
                         std::to_string(field.solver_residual));

  Eigen::VectorXd u_full = Eigen::VectorXd::Zero(n_full);
  u_full.head(n_int) = u_int;

  field.energy_load = -0.5 * rhs.dot(u_full);
  field.energy_grad = -0.5 * u_full.dot(K_full * u_full);

  field.values.assign(static_cast<size_t>(n_s + 1) * nq, 0.0);
  for (int k = 0; k < nq; ++k) field.values[k] = u_full[0];
  for (int i = 1; i < n_s; ++i)
    for (int k = 0; k < nq; ++k)
      field.values[static_cast<size_t>(i) * nq + k] = u_full[dof(i, k)];

  // variationally consistent flux on Gamma: boundary-row residual against
  // the boundary mass
  Eigen::VectorXd res_b = (K_full * u_full - rhs).tail(nq);
  std::vector<Eigen::Triplet<double>> bm;
  for (int k = 0; k + 1 < nq; ++k) {
    const TInts ti = t_integrals(sec, k);
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) bm.emplace_back(k + a, k + b, ti.BM[a][b]);
  }
  Eigen::SparseMatrix<double> M_gamma(nq, nq);
  M_gamma.setFromTriplets(bm.begin(), bm.end());
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> bldlt(M_gamma);
  if (bldlt.info() != Eigen::Success)
    throw NumericalError("boundary mass factorization failed");
  Eigen::VectorXd fx = bldlt.solve(res_b);
  field.flux_section.assign(fx.data(), fx.data() + nq);

  field.flux.assign(g.phi.size(), 0.0);
  for (int k = 0; k < nq; ++k)
    for (int node : sec.mesh_nodes[k]) field.flux[node] = fx[k];
  return field;
}

TorsionEnergy torsion_energy(const graph::RadialGraph& g, int n_s) {
  TorsionField field = solve_torsion(g, n_s);
  TorsionEnergy e;
  e.value = field.energy_load;
  e.grad_form = field.energy_grad;
  e.gap = field.energy_gap();
  return e;
}

std::vector<double> energy_shape_gradient(const graph::RadialGraph& g,
                                          const TorsionField& field) {
  const RadialSection& sec = field.section;
  const int nq = static_cast<int>(sec.t.size());
  const int N = sec.dim;
  const int n_s = field.n_s;
  const double hs = 1.0 / n_s;
  const CoreInts ci = core_integrals(hs, N);
  std::vector<SInts> si(n_s);
  for (int i = 1; i < n_s; ++i) si[i] = s_integrals(i * hs, (i + 1) * hs, N);
  const double uv = field.value(0, 0);

  // dE[dphi] = 1/2 da(u,u)[dphi] - dl(u)[dphi] around the Galerkin solution
  std::vector<double> dsec(nq, 0.0);
  for (int k = 0; k + 1 < nq; ++k) {
    const TDeriv td = t_integral_derivs(sec, k);
    for (int al = 0; al < 2; ++al) {
      const TInts& A = td.d[al];
      double acc = 0.0;
      const double ub[2] = {field.value(1, k), field.value(1, k + 1)};
      acc += 0.5 * ci.R00 * A.A0cc * uv * uv;
      for (int b = 0; b < 2; ++b)
        acc += uv * ub[b] * (ci.R01 * A.A0c[b] - ci.T01 * A.A1c[b]);
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
          acc += 0.5 * ub[a] * ub[b] *
                 (ci.R11 * A.A0[a][b] - ci.T11 * (A.A1[a][b] + A.A1[b][a]) +
                  ci.S11 * A.A2[a][b]);
      acc -= ci.L0 * A.Lc * uv + ci.L1 * (A.L[0] * ub[0] + A.L[1] * ub[1]);
      for (int i = 1; i < n_s; ++i) {
        const SInts& s = si[i];
        const double uu[2][2] = {{field.value(i, k), field.value(i, k + 1)},
                                 {field.value(i + 1, k), field.value(i + 1, k + 1)}};
        for (int sa = 0; sa < 2; ++sa)
          for (int a = 0; a < 2; ++a) {
            acc -= s.L[sa] * A.L[a] * uu[sa][a];
            for (int sb = 0; sb < 2; ++sb)
              for (int b = 0; b < 2; ++b)
                acc += 0.5 * uu[sa][a] * uu[sb][b] *
                       (s.R[sa][sb] * A.A0[a][b] -
                        (s.T[sa][sb] * A.A1[a][b] + s.T[sb][sa] * A.A1[b][a]) +
                        s.S[sa][sb] * A.A2[a][b]);
          }
      }
      dsec[k + al] += acc;
    }
  }
  std::vector<double> out(g.phi.size(), 0.0);
  for (int k = 0; k < nq; ++k) {
    const auto& ring = sec.mesh_nodes[k];
    for (int node : ring) out[node] = dsec[k] / ring.size();
  }
  return out;
}

double energy_first_variation(const graph::RadialGraph& g,
                              const std::vector<double>& v,
                              const TorsionField& field) {
  if (v.size() != g.phi.size()) throw ConfigError("field size mismatch");
  const auto grad = energy_shape_gradient(g, field);
  double acc = 0.0;
  for (size_t i = 0; i < v.size(); ++i) acc += grad[i] * v[i];
  return acc;
}

double energy_first_variation_flux_form(const graph::RadialGraph& g,
                                        const std::vector<double>& v,
                                        const TorsionField& field) {
  if (v.size() != g.phi.size() || field.flux.size() != g.phi.size())
    throw ConfigError("field size mismatch");
  const int N = g.mesh->dim;
  double acc = 0.0;
  for (size_t i = 0; i < v.size(); ++i)
    acc += g.mesh->node_weights[i] * std::exp(N * g.phi[i]) * v[i] *
           field.flux[i] * field.flux[i];
  return -0.5 * acc;
}

std::vector<double> linearized_torsion_flux(
    const spectral::NeumannSpectrum& spectrum,
    const std::vector<double>& coeffs) {
  if (coeffs.size() > spectrum.modes.size())
    throw ConfigError("more coefficients than computed modes");
  if (spectrum.modes.empty()) throw ConfigError("empty spectrum");
  const int N = spectrum.dim;
  std::vector<double> out(spectrum.modes[0].size(), 0.0);
  for (size_t j = 0; j < coeffs.size(); ++j) {
    const double factor = coeffs[j] * spectrum.alphas[j] / N;
    if (factor == 0.0) continue;
    const auto& mode = spectrum.modes[j];
    for (size_t i = 0; i < out.size(); ++i) out[i] += factor * mode[i];
  }
  return out;
}

double torsion_second_variation_extension_route(
    const spectral::NeumannSpectrum& spectrum,
    const std::vector<double>& coeffs, int dim) {
  double dirichlet = 0.0, mass = 0.0;
  for (size_t j = 1; j < coeffs.size(); ++j) {
    const double a = spectrum.alphas[j], l = spectrum.lambdas[j];
    const double radial = 1.0 / (2.0 * a + dim - 2.0);  // int_0^1 r^{2a+N-3}
    dirichlet += coeffs[j] * coeffs[j] * (a * a + l) * radial;
    mass += coeffs[j] * coeffs[j];
  }
  return (dirichlet - mass) / (dim * dim);
}

double torsion_second_variation_at_zero(
    const spectral::NeumannSpectrum& spectrum,
    const std::vector<double>& coeffs, int dim) {
  if (coeffs.size() > spectrum.modes.size())
    throw ConfigError("more coefficients than computed modes");
  double norm2 = 0.0;
  for (double c : coeffs) norm2 += c * c;
  if (!coeffs.empty() &&
      std::abs(coeffs[0]) > 1e-8 * std::sqrt(std::max(norm2, 1e-300)))
    throw ConfigError("second variation requires a zero-mean variation");
  double value = 0.0;
  for (size_t j = 1; j < coeffs.size(); ++j)
    value += coeffs[j] * coeffs[j] * (spectrum.alphas[j] - 1.0);
  value /= dim * dim;
  const double other =
      torsion_second_variation_extension_route(spectrum, coeffs, dim);
  if (std::abs(value - other) > 1e-12 * (1.0 + std::abs(value)))
    throw NumericalError("spectral and extension-energy routes disagree");
  return value;
}

}  // namespace conekit::torsion
