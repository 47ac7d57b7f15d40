#include "graph/radial_graph.hpp"

#include <algorithm>
#include <cmath>

#include "core/errors.hpp"
#include "core/parallel.hpp"

namespace conekit::graph {

namespace {

using Eigen::Matrix2d;
using Eigen::Vector2d;

std::vector<Vec3> cell_gradients(const geom::SphericalMesh& mesh,
                                 const std::vector<double>& phi) {
  std::vector<Vec3> out(mesh.cells.size(), Vec3::Zero());
  const int arity = mesh.cell_arity();
  par::for_each_index(mesh.cells.size(), [&](size_t c) {
    Vec3 grad = Vec3::Zero();
    for (int a = 0; a < arity; ++a)
      grad += phi[mesh.cells[c][a]] * mesh.cell_geom[c].grad[a];
    out[c] = grad;
  });
  return out;
}

double cell_mean_exp(const RadialGraph& g, size_t c, double factor) {
  const auto& cell = g.mesh->cells[c];
  const int arity = g.mesh->cell_arity();
  double acc = 0.0;
  for (int a = 0; a < arity; ++a) acc += std::exp(factor * g.phi[cell[a]]);
  return acc / arity;
}

// Quadratic fit of phi over the patch around a node, in tangent normal
// coordinates.  Returns the gradient (2-vector), Hessian (2x2) and the
// tangent frame; falls back to a linear fit on starved patches.
struct PatchFit {
  Vec3 t1 = Vec3::Zero(), t2 = Vec3::Zero();
  Vector2d grad = Vector2d::Zero();
  Matrix2d hess = Matrix2d::Zero();
};

std::vector<std::vector<int>> node_neighbors(const geom::SphericalMesh& mesh) {
  std::vector<std::vector<int>> adj(mesh.nodes.size());
  const int arity = mesh.cell_arity();
  for (const auto& cell : mesh.cells)
    for (int a = 0; a < arity; ++a)
      for (int b = 0; b < arity; ++b)
        if (a != b) adj[cell[a]].push_back(cell[b]);
  for (auto& list : adj) {
    std::sort(list.begin(), list.end());
    list.erase(std::unique(list.begin(), list.end()), list.end());
  }
  return adj;
}

PatchFit fit_patch(const geom::SphericalMesh& mesh,
                   const std::vector<double>& phi,
                   const std::vector<std::vector<int>>& adj, int node) {
  const Vec3& q = mesh.nodes[node];
  PatchFit fit;
  int imin = 0;
  for (int d = 1; d < 3; ++d)
    if (std::abs(q[d]) < std::abs(q[imin])) imin = d;
  Vec3 axis = Vec3::Zero();
  axis[imin] = 1.0;
  fit.t1 = (axis - q.dot(axis) * q).normalized();
  fit.t2 = q.cross(fit.t1);

  std::vector<int> patch = adj[node];
  if (patch.size() < 6) {
    std::vector<int> ring2 = patch;
    for (int p : patch)
      for (int r : adj[p])
        if (r != node) ring2.push_back(r);
    std::sort(ring2.begin(), ring2.end());
    ring2.erase(std::unique(ring2.begin(), ring2.end()), ring2.end());
    patch = std::move(ring2);
  }
  const int rows = static_cast<int>(patch.size());
  const bool quadratic = rows >= 5;
  const int cols = quadratic ? 5 : 2;
  Eigen::MatrixXd A(rows, cols);
  Eigen::VectorXd b(rows);
  for (int r = 0; r < rows; ++r) {
    const Vec3& p = mesh.nodes[patch[r]];
    const double c = std::min(1.0, std::max(-1.0, q.dot(p)));
    Vec3 dir = p - c * q;
    const double dn = dir.norm();
    const double dist = std::acos(c);
    Vec3 xi = dn > 1e-14 ? Vec3(dist * dir / dn) : Vec3::Zero();
    const double x = xi.dot(fit.t1), y = xi.dot(fit.t2);
    A(r, 0) = x;
    A(r, 1) = y;
    if (quadratic) {
      A(r, 2) = 0.5 * x * x;
      A(r, 3) = x * y;
      A(r, 4) = 0.5 * y * y;
    }
    b[r] = phi[patch[r]] - phi[node];
  }
  Eigen::VectorXd sol = A.colPivHouseholderQr().solve(b);
  fit.grad = Vector2d(sol[0], sol[1]);
  if (quadratic) {
    fit.hess << sol[2], sol[3], sol[3], sol[4];
  }
  return fit;
}

// 1-D counterpart: arclength derivative and second derivative at a node of
// the arc chain, one-sided at the ends.
struct LineFit {
  double d1 = 0.0, d2 = 0.0;
  Vec3 tangent = Vec3::Zero();  // direction of increasing arclength
};

LineFit fit_line(const geom::SphericalMesh& mesh, const std::vector<double>& phi,
                 const std::vector<std::vector<int>>& adj, int node) {
  // neighbors along the chain, with signed arclength offsets
  LineFit fit;
  std::vector<std::pair<double, int>> pts;  // (offset, node)
  const Vec3& q = mesh.nodes[node];
  Vec3 t = Vec3::Zero();
  for (int p : adj[node]) {
    double s = std::acos(std::min(1.0, std::max(-1.0, q.dot(mesh.nodes[p]))));
    Vec3 dir = (mesh.nodes[p] - q.dot(mesh.nodes[p]) * q);
    if (t.isZero()) t = dir.normalized();
    double sign = dir.dot(t) > 0 ? 1.0 : -1.0;
    pts.push_back({sign * s, p});
    if (adj[node].size() == 1) {  // endpoint: extend with the next node
      for (int r : adj[p])
        if (r != node) {
          double s2 = std::acos(std::min(1.0, std::max(-1.0, q.dot(mesh.nodes[r]))));
          pts.push_back({sign * s2, r});
        }
    }
  }
  fit.tangent = t;
  // quadratic f(s) = f0 + c1 s + c2 s^2 / 2 through the two offsets
  if (pts.size() < 2) throw NumericalError("arc node with a starved patch");
  const double s1 = pts[0].first, s2 = pts[1].first;
  const double f0 = phi[node];
  const double d1 = phi[pts[0].second] - f0, d2 = phi[pts[1].second] - f0;
  const double det = 0.5 * s1 * s2 * (s2 - s1);
  fit.d1 = (d1 * 0.5 * s2 * s2 - d2 * 0.5 * s1 * s1) / det;
  fit.d2 = (s1 * d2 - s2 * d1) / det;
  return fit;
}

}  // namespace

RadialGraph make_graph(const geom::SphericalMesh& mesh,
                       std::vector<double> phi) {
  if (phi.size() != mesh.nodes.size())
    throw ConfigError("phi size does not match node count");
  for (double x : phi)
    if (!std::isfinite(x)) throw ConfigError("phi must be finite at every node");
  RadialGraph g;
  g.mesh = &mesh;
  g.phi = std::move(phi);
  g.grad_phi = cell_gradients(mesh, g.phi);
  return g;
}

double volume(const RadialGraph& g) {
  const int N = g.mesh->dim;
  const auto& w = g.mesh->node_weights;
  double v = par::sum_blocked(g.phi.size(), [&](size_t i) {
    return w[i] * std::exp(N * g.phi[i]);
  });
  if (!std::isfinite(v)) throw NumericalError("volume overflow for extreme phi");
  return v / N;
}

double volume_grad(const RadialGraph& g, const std::vector<double>& v) {
  if (v.size() != g.phi.size()) throw ConfigError("field size mismatch");
  const int N = g.mesh->dim;
  const auto& w = g.mesh->node_weights;
  return par::sum_blocked(g.phi.size(), [&](size_t i) {
    return w[i] * std::exp(N * g.phi[i]) * v[i];
  });
}

double volume_hess(const RadialGraph& g, const std::vector<double>& v,
                   const std::vector<double>& w_field) {
  if (v.size() != g.phi.size() || w_field.size() != g.phi.size())
    throw ConfigError("field size mismatch");
  const int N = g.mesh->dim;
  const auto& w = g.mesh->node_weights;
  return N * par::sum_blocked(g.phi.size(), [&](size_t i) {
    return w[i] * std::exp(N * g.phi[i]) * v[i] * w_field[i];
  });
}

std::vector<double> volume_gradient(const RadialGraph& g) {
  const int N = g.mesh->dim;
  std::vector<double> out(g.phi.size());
  par::for_each_index(g.phi.size(), [&](size_t i) {
    out[i] = g.mesh->node_weights[i] * std::exp(N * g.phi[i]);
  });
  return out;
}

double perimeter(const RadialGraph& g) {
  const int N = g.mesh->dim;
  return par::sum_blocked(g.mesh->cells.size(), [&](size_t c) {
    const double slope = std::sqrt(1.0 + g.grad_phi[c].squaredNorm());
    return g.mesh->cell_geom[c].measure * cell_mean_exp(g, c, N - 1) * slope;
  });
}

double perimeter_grad(const RadialGraph& g, const std::vector<double>& v) {
  if (v.size() != g.phi.size()) throw ConfigError("field size mismatch");
  const int N = g.mesh->dim;
  const int arity = g.mesh->cell_arity();
  return par::sum_blocked(g.mesh->cells.size(), [&](size_t c) {
    const auto& cell = g.mesh->cells[c];
    const auto& geo = g.mesh->cell_geom[c];
    const double slope = std::sqrt(1.0 + g.grad_phi[c].squaredNorm());
    Vec3 grad_v = Vec3::Zero();
    double mean_ev = 0.0;
    for (int a = 0; a < arity; ++a) {
      grad_v += v[cell[a]] * geo.grad[a];
      mean_ev += std::exp((N - 1) * g.phi[cell[a]]) * v[cell[a]];
    }
    mean_ev /= arity;
    return geo.measure * ((N - 1) * mean_ev * slope +
                          cell_mean_exp(g, c, N - 1) *
                              g.grad_phi[c].dot(grad_v) / slope);
  });
}

std::vector<double> perimeter_gradient(const RadialGraph& g) {
  const int N = g.mesh->dim;
  const int arity = g.mesh->cell_arity();
  const auto& mesh = *g.mesh;
  // row-gather over nodes: deterministic for any thread count
  std::vector<double> out(mesh.nodes.size(), 0.0);
  par::for_each_index(mesh.nodes.size(), [&](size_t i) {
    double acc = 0.0;
    for (int c : mesh.node_cells[i]) {
      const auto& cell = mesh.cells[c];
      const auto& geo = mesh.cell_geom[c];
      const double slope = std::sqrt(1.0 + g.grad_phi[c].squaredNorm());
      int a = 0;
      while (cell[a] != static_cast<int>(i)) ++a;
      acc += geo.measure *
             ((N - 1) * std::exp((N - 1) * g.phi[i]) / arity * slope +
              cell_mean_exp(g, c, N - 1) * g.grad_phi[c].dot(geo.grad[a]) / slope);
    }
    out[i] = acc;
  });
  return out;
}

std::vector<double> perimeter_gradient_serial(const RadialGraph& g) {
  const int N = g.mesh->dim;
  const int arity = g.mesh->cell_arity();
  const auto& mesh = *g.mesh;
  std::vector<double> out(mesh.nodes.size(), 0.0);
  for (size_t c = 0; c < mesh.cells.size(); ++c) {
    const auto& cell = mesh.cells[c];
    const auto& geo = mesh.cell_geom[c];
    const double slope = std::sqrt(1.0 + g.grad_phi[c].squaredNorm());
    const double mean_e = cell_mean_exp(g, c, N - 1);
    for (int a = 0; a < arity; ++a)
      out[cell[a]] += geo.measure *
                      ((N - 1) * std::exp((N - 1) * g.phi[cell[a]]) / arity * slope +
                       mean_e * g.grad_phi[c].dot(geo.grad[a]) / slope);
  }
  return out;
}

GraphGeometry graph_geometry(const RadialGraph& g) {
  const auto& mesh = *g.mesh;
  const int N = mesh.dim;
  auto adj = node_neighbors(mesh);
  GraphGeometry geo;
  geo.at_node.resize(mesh.nodes.size());
  par::for_each_index(mesh.nodes.size(), [&](size_t i) {
    NodeGeometry ng;
    Vector2d a;
    Matrix2d hess;
    Vec3 grad3;
    if (N == 2) {
      LineFit lf = fit_line(mesh, g.phi, adj, static_cast<int>(i));
      a = Vector2d(lf.d1, 0.0);
      hess = Matrix2d::Zero();
      hess(0, 0) = lf.d2;
      grad3 = lf.d1 * lf.tangent;
    } else {
      PatchFit pf = fit_patch(mesh, g.phi, adj, static_cast<int>(i));
      a = pf.grad;
      hess = pf.hess;
      grad3 = pf.grad[0] * pf.t1 + pf.grad[1] * pf.t2;
    }
    const double phi_i = g.phi[i];
    const double s2 = 1.0 + a.squaredNorm();
    const double slope = std::sqrt(s2);
    const int dsurf = N - 1;  // tangent dimensions actually used
    Matrix2d id = Matrix2d::Identity();
    ng.metric = std::exp(2.0 * phi_i) * (id + a * a.transpose());
    ng.metric_inv =
        std::exp(-2.0 * phi_i) * (id - (a * a.transpose()) / s2);
    ng.second_fundamental =
        std::exp(phi_i) * (id + a * a.transpose() - hess) / slope;
    if (dsurf == 1) {
      // unused second tangent direction: keep it neutral
      ng.metric(1, 1) = 1.0;
      ng.metric_inv(1, 1) = 1.0;
      ng.second_fundamental(1, 1) = 0.0;
      ng.second_fundamental(0, 1) = ng.second_fundamental(1, 0) = 0.0;
      ng.metric(0, 1) = ng.metric(1, 0) = 0.0;
      ng.metric_inv(0, 1) = ng.metric_inv(1, 0) = 0.0;
    }
    double trace = 0.0;
    for (int r = 0; r < dsurf; ++r)
      for (int s = 0; s < dsurf; ++s)
        trace += ng.metric_inv(r, s) * ng.second_fundamental(s, r);
    ng.mean_curvature = trace / dsurf;
    ng.normal = (mesh.nodes[i] - grad3) / slope;
    geo.at_node[i] = ng;
  });
  return geo;
}

std::vector<double> mean_curvature_divergence_form(const RadialGraph& g) {
  const auto& mesh = *g.mesh;
  const int N = mesh.dim;
  const int arity = mesh.cell_arity();
  // weak divergence of F = grad(phi)/sqrt(1+|grad phi|^2) against P1 hats
  std::vector<double> div_weak(mesh.nodes.size(), 0.0);
  for (size_t c = 0; c < mesh.cells.size(); ++c) {
    const auto& cell = mesh.cells[c];
    const auto& geo = mesh.cell_geom[c];
    const Vec3 f = g.grad_phi[c] / std::sqrt(1.0 + g.grad_phi[c].squaredNorm());
    for (int a = 0; a < arity; ++a)
      div_weak[cell[a]] -= geo.measure * f.dot(geo.grad[a]);
  }
  std::vector<double> out(mesh.nodes.size());
  auto adj = node_neighbors(mesh);
  for (size_t i = 0; i < out.size(); ++i) {
    // recovered |grad phi| at the node via patch fit
    Vector2d a;
    if (N == 2) {
      LineFit lf = fit_line(mesh, g.phi, adj, static_cast<int>(i));
      a = Vector2d(lf.d1, 0.0);
    } else {
      PatchFit pf = fit_patch(mesh, g.phi, adj, static_cast<int>(i));
      a = pf.grad;
    }
    const double slope = std::sqrt(1.0 + a.squaredNorm());
    const double div_nodal = div_weak[i] / mesh.node_weights[i];
    out[i] = (-div_nodal + (N - 1) / slope) / ((N - 1) * std::exp(g.phi[i]));
  }
  return out;
}

CmcResidual cmc_residual(const RadialGraph& g, double lambda) {
  CmcResidual res;
  const auto pgrad = perimeter_gradient(g);
  const auto vgrad = volume_gradient(g);
  res.nodal.resize(pgrad.size());
  double acc = 0.0;
  for (size_t i = 0; i < pgrad.size(); ++i) {
    res.nodal[i] = (pgrad[i] - lambda * vgrad[i]) / vgrad[i];
    acc += vgrad[i] * res.nodal[i] * res.nodal[i];
  }
  res.norm = std::sqrt(acc);
  return res;
}

OrthogonalityResidual orthogonality_residual(const RadialGraph& g) {
  const auto& mesh = *g.mesh;
  if (mesh.boundary.empty()) throw ConfigError("mesh has an empty boundary");
  auto adj = node_neighbors(mesh);
  OrthogonalityResidual res;
  res.boundary.resize(mesh.boundary.size());
  for (size_t b = 0; b < mesh.boundary.size(); ++b) {
    const auto& bs = mesh.boundary[b];
    Vec3 grad3;
    if (mesh.dim == 2) {
      LineFit lf = fit_line(mesh, g.phi, adj, bs.node);
      grad3 = lf.d1 * lf.tangent;
    } else {
      PatchFit pf = fit_patch(mesh, g.phi, adj, bs.node);
      grad3 = pf.grad[0] * pf.t1 + pf.grad[1] * pf.t2;
    }
    res.boundary[b] = grad3.dot(bs.conormal);
    res.sup = std::max(res.sup, std::abs(res.boundary[b]));
  }
  return res;
}

RadialGraph project_volume(const RadialGraph& g, double c_target) {
  if (!(c_target > 0.0)) throw ConfigError("target volume must be positive");
  const double shift = std::log(c_target / volume(g)) / g.mesh->dim;
  std::vector<double> phi = g.phi;
  for (double& x : phi) x += shift;
  RadialGraph out;
  out.mesh = g.mesh;
  out.phi = std::move(phi);
  out.grad_phi = g.grad_phi;  // constant shift leaves the gradients unchanged
  return out;
}

}  // namespace conekit::graph
