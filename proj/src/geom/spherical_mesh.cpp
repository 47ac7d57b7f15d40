#include "geom/spherical_mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include "core/errors.hpp"
#include "core/parallel.hpp"

namespace conekit::geom {

namespace {

constexpr double kPi = std::numbers::pi;

double clamp1(double x) { return std::min(1.0, std::max(-1.0, x)); }

// Orthonormal frame {b1, b2} spanning the plane orthogonal to the cap axis
// e_theta = (sin t, 0, cos t).
struct AxisFrame {
  Vec3 axis, b1, b2;
};

AxisFrame cap_frame(double theta) {
  AxisFrame f;
  f.axis = Vec3(std::sin(theta), 0.0, std::cos(theta));
  f.b1 = Vec3(std::cos(theta), 0.0, -std::sin(theta));
  f.b2 = Vec3(0.0, 1.0, 0.0);
  return f;
}

Vec3 on_ring(const AxisFrame& f, double psi, double phi) {
  return std::cos(psi) * f.axis +
         std::sin(psi) * (std::cos(phi) * f.b1 + std::sin(phi) * f.b2);
}

struct RingNode {
  int id;
  double angle;  // representative in [0, 2*pi)
};

double wrap_angle(double a) {
  a = std::fmod(a, 2.0 * kPi);
  if (a < 0.0) a += 2.0 * kPi;
  return a;
}

// Triangulates the annulus between two closed node rings (angles sorted
// ascending).  Produces |A| + |B| triangles via a circular two-pointer walk;
// valid for concentric convex rings.
void triangulate_annulus(const std::vector<RingNode>& a,
                         const std::vector<RingNode>& b,
                         std::vector<std::array<int, 3>>& cells) {
  const int m = static_cast<int>(a.size());
  const int n = static_cast<int>(b.size());
  // Start b at the node closest in angle to a[0].
  int b0 = 0;
  double best = 10.0;
  for (int j = 0; j < n; ++j) {
    double d = std::abs(std::remainder(b[j].angle - a[0].angle, 2.0 * kPi));
    if (d < best) {
      best = d;
      b0 = j;
    }
  }
  // Lifted (monotone) angle sequences, one full turn each.
  std::vector<double> ta(m + 1), tb(n + 1);
  for (int i = 0; i <= m; ++i) ta[i] = a[i % m].angle + 2.0 * kPi * (i / m);
  tb[0] = a[0].angle + std::remainder(b[b0].angle - a[0].angle, 2.0 * kPi);
  for (int j = 1; j <= n; ++j) {
    double step = wrap_angle(b[(b0 + j) % n].angle - b[(b0 + j - 1) % n].angle);
    if (step <= 0.0) step = 2.0 * kPi / n;
    tb[j] = tb[j - 1] + step;
  }
  auto aid = [&](int i) { return a[i % m].id; };
  auto bid = [&](int j) { return b[(b0 + j) % n].id; };
  int ia = 0, ib = 0;
  while (ia < m || ib < n) {
    bool adv_a;
    if (ia == m)
      adv_a = false;
    else if (ib == n)
      adv_a = true;
    else
      adv_a = (ta[ia] + ta[ia + 1]) <= (tb[ib] + tb[ib + 1]);
    if (adv_a) {
      cells.push_back({aid(ia), aid(ia + 1), bid(ib)});
      ++ia;
    } else {
      cells.push_back({aid(ia), bid(ib + 1), bid(ib)});
      ++ib;
    }
  }
}

int ring_count(double radius, double h, int min_count) {
  return std::max(min_count,
                  static_cast<int>(std::lround(2.0 * kPi * radius / h)));
}

SphericalMesh build_arc(double beta, double h) {
  SphericalMesh mesh;
  mesh.dim = 2;
  const int n = std::max(2, static_cast<int>(std::lround(beta / h)));
  mesh.nodes.reserve(n + 1);
  for (int i = 0; i <= n; ++i) {
    // symmetric about the positive x2 axis
    double alpha = beta * (2.0 * i - n) / (2.0 * n);
    mesh.nodes.emplace_back(std::sin(alpha), std::cos(alpha), 0.0);
  }
  for (int i = 0; i < n; ++i) mesh.cells.push_back({i, i + 1, -1});
  auto tangent = [](const Vec3& x) { return Vec3(x.y(), -x.x(), 0.0); };
  // outward co-normals at the two endpoints
  mesh.boundary.push_back({0, tangent(mesh.nodes[0]), 1.0});
  mesh.boundary.push_back({n, -tangent(mesh.nodes[n]), 1.0});
  return mesh;
}

// Rings of a geodesic disc of radius psi_max about f.axis.  `custom_outer`
// optionally supplies the outermost ring (used by the tunnel builder);
// otherwise a uniform boundary ring is generated.
struct DiscResult {
  std::vector<int> outer_nodes;  // ids on the boundary circle, any order
};

DiscResult build_disc(SphericalMesh& mesh, const AxisFrame& frame,
                      double psi_max, double h,
                      const std::vector<RingNode>* custom_outer) {
  DiscResult out;
  const int n_r = std::max(2, static_cast<int>(std::lround(psi_max / h)));
  const double dpsi = psi_max / n_r;
  const int apex = mesh.node_count();
  mesh.nodes.push_back(frame.axis);
  std::vector<RingNode> prev;
  for (int j = 1; j <= n_r; ++j) {
    const double psi = j * dpsi;
    std::vector<RingNode> ring;
    if (j == n_r && custom_outer) {
      ring = *custom_outer;
      std::sort(ring.begin(), ring.end(),
                [](const RingNode& x, const RingNode& y) {
                  return x.angle < y.angle;
                });
    } else {
      const int m = ring_count(std::sin(psi), h, 4);
      ring.reserve(m);
      for (int q = 0; q < m; ++q) {
        double phi = 2.0 * kPi * q / m;
        ring.push_back({mesh.node_count(), phi});
        mesh.nodes.push_back(on_ring(frame, psi, phi));
      }
    }
    if (j == 1) {
      for (size_t q = 0; q < ring.size(); ++q)
        mesh.cells.push_back({apex, ring[q].id,
                              ring[(q + 1) % ring.size()].id});
    } else {
      triangulate_annulus(prev, ring, mesh.cells);
    }
    if (j == n_r)
      for (const auto& rn : ring) out.outer_nodes.push_back(rn.id);
    prev = std::move(ring);
  }
  return out;
}

SphericalMesh build_cap(double theta, double r, double h) {
  SphericalMesh mesh;
  mesh.dim = 3;
  const AxisFrame frame = cap_frame(theta);
  const double psi_max = std::acos(r);
  DiscResult disc = build_disc(mesh, frame, psi_max, h, nullptr);
  const double root = std::sqrt(1.0 - r * r);
  for (int id : disc.outer_nodes) {
    Vec3 nu = (r * mesh.nodes[id] - frame.axis) / root;
    mesh.boundary.push_back({id, nu, 0.0});
  }
  return mesh;
}

SphericalMesh build_tube(double r, double h) {
  SphericalMesh mesh;
  mesh.dim = 3;
  const int n_rows = std::max(2, static_cast<int>(std::lround(2.0 * r / h)));
  const int m = ring_count(1.0, h, 8);
  std::vector<RingNode> prev;
  std::vector<int> first_row, last_row;
  for (int i = 0; i <= n_rows; ++i) {
    // colatitude sweeps the band |x3| < sin r
    double colat = kPi / 2.0 + r * (2.0 * i - n_rows) / n_rows;
    std::vector<RingNode> ring;
    ring.reserve(m);
    for (int q = 0; q < m; ++q) {
      double phi = 2.0 * kPi * q / m;
      ring.push_back({mesh.node_count(), phi});
      mesh.nodes.emplace_back(std::sin(colat) * std::cos(phi),
                              std::sin(colat) * std::sin(phi),
                              std::cos(colat));
    }
    if (i == 0)
      for (const auto& rn : ring) first_row.push_back(rn.id);
    if (i == n_rows)
      for (const auto& rn : ring) last_row.push_back(rn.id);
    if (i > 0) {
      // equal ring counts: structured quad split keeps the node weights
      // rotationally uniform, so odd fields integrate to zero exactly
      for (int q = 0; q < m; ++q) {
        int a = prev[q].id, b = prev[(q + 1) % m].id;
        int c = ring[q].id, d = ring[(q + 1) % m].id;
        mesh.cells.push_back({a, b, d});
        mesh.cells.push_back({a, d, c});
      }
    }
    prev = std::move(ring);
  }
  // x = y cos r + z sin r with y on the equator, z = +-e3; nu = -y sin r + z cos r
  auto conormal = [&](int id, double zsign) {
    const Vec3& x = mesh.nodes[id];
    Vec3 y(x.x(), x.y(), 0.0);
    y.normalize();
    Vec3 z(0.0, 0.0, zsign);
    return Vec3(-std::sin(r) * y + std::cos(r) * z);
  };
  for (int id : first_row) mesh.boundary.push_back({id, conormal(id, 1.0), 0.0});
  for (int id : last_row) mesh.boundary.push_back({id, conormal(id, -1.0), 0.0});
  return mesh;
}

// Strip coordinates for the joining band of a tunnel domain:
// x(s, tau) = (sin s cos tau, sin tau, cos s cos tau); the caps are centered
// at e_{+-theta} and the strip meets their boundary circles at s = +-s_b(tau).
struct TunnelFrame {
  double theta, r, eps;
  double tau_e;  // asin(eps)
  double s_b(double tau) const {
    return theta - std::acos(clamp1(r / std::cos(tau)));
  }
};

Vec3 strip_point(double s, double tau) {
  return Vec3(std::sin(s) * std::cos(tau), std::sin(tau),
              std::cos(s) * std::cos(tau));
}

SphericalMesh build_tunnel(double theta, double r, double eps, double h) {
  TunnelFrame tf{theta, r, eps, std::asin(eps)};
  const double root = std::sqrt(1.0 - r * r);
  if (eps >= root)
    throw ConfigError("tunnel does not connect the caps: eps >= sqrt(1-r^2)");
  if (r / std::cos(tf.tau_e) >= 1.0 || tf.s_b(tf.tau_e) <= 0.0)
    throw ConfigError("tunnel does not connect the caps");

  SphericalMesh mesh;
  mesh.dim = 3;

  // --- joining strip, mirror-symmetric in x1 by construction ---
  const int n_tau = std::max(2, static_cast<int>(std::lround(2.0 * tf.tau_e / h)));
  const int n_c =
      2 * std::max(1, static_cast<int>(std::lround(tf.s_b(0.0) / h)));
  std::vector<std::vector<int>> strip(n_tau + 1, std::vector<int>(n_c + 1));
  for (int i = 0; i <= n_tau; ++i) {
    const double tau = tf.tau_e * (2.0 * i - n_tau) / n_tau;
    const double sb = tf.s_b(tau);
    for (int j = 0; j <= n_c / 2; ++j) {
      const double s = sb * (2.0 * j - n_c) / n_c;  // s <= 0
      Vec3 x = strip_point(s, tau);
      strip[i][j] = mesh.node_count();
      mesh.nodes.push_back(x);
      if (j < n_c / 2) {
        strip[i][n_c - j] = mesh.node_count();
        mesh.nodes.emplace_back(-x.x(), x.y(), x.z());
      }
    }
  }
  for (int i = 0; i < n_tau; ++i)
    for (int j = 0; j < n_c; ++j) {
      int a = strip[i][j], b = strip[i][j + 1];
      int c = strip[i + 1][j], d = strip[i + 1][j + 1];
      if (j < n_c / 2) {
        mesh.cells.push_back({a, b, d});
        mesh.cells.push_back({a, d, c});
      } else {
        mesh.cells.push_back({a, b, c});
        mesh.cells.push_back({b, d, c});
      }
    }

  // --- cap about e_theta, outer ring partly made of strip end nodes ---
  const AxisFrame frame = cap_frame(theta);
  auto cap_angle = [&](const Vec3& x) {
    Vec3 p = x - x.dot(frame.axis) * frame.axis;
    return wrap_angle(std::atan2(p.dot(frame.b2), p.dot(frame.b1)));
  };
  std::vector<RingNode> outer;
  for (int i = 0; i <= n_tau; ++i) {
    int id = strip[i][n_c];
    outer.push_back({id, cap_angle(mesh.nodes[id])});
  }
  const double phi_hat = std::asin(eps / root);  // half-angle of the opening
  const double arc_len = (2.0 * kPi - 2.0 * phi_hat) * root;
  const int m_b = std::max(4, static_cast<int>(std::lround(arc_len / h)));
  std::vector<int> cap_plus_boundary;
  const int cap_first_new = mesh.node_count();
  for (int q = 1; q < m_b; ++q) {
    double phi = kPi + phi_hat + q * (2.0 * kPi - 2.0 * phi_hat) / m_b;
    int id = mesh.node_count();
    mesh.nodes.push_back(on_ring(frame, std::acos(r), phi));
    outer.push_back({id, wrap_angle(phi)});
    cap_plus_boundary.push_back(id);
  }
  const int cap_cells_begin = static_cast<int>(mesh.cells.size());
  build_disc(mesh, frame, std::acos(r), h, &outer);
  const int cap_nodes_end = mesh.node_count();
  const int cap_cells_end = static_cast<int>(mesh.cells.size());

  // --- mirrored cap about e_{-theta}: bitwise x1-negation of the first ---
  std::map<int, int> mirror_id;
  for (int i = 0; i <= n_tau; ++i) mirror_id[strip[i][n_c]] = strip[i][0];
  for (int id = cap_first_new; id < cap_nodes_end; ++id) {
    const Vec3& x = mesh.nodes[id];
    mirror_id[id] = mesh.node_count();
    mesh.nodes.emplace_back(-x.x(), x.y(), x.z());
  }
  for (int c = cap_cells_begin; c < cap_cells_end; ++c) {
    auto cell = mesh.cells[c];
    mesh.cells.push_back(
        {mirror_id.at(cell[0]), mirror_id.at(cell[1]), mirror_id.at(cell[2])});
  }
  // The fan/annuli cells created before the custom ring belong to the cap,
  // but build_disc may also have been given strip nodes; mirror covers all.

  // --- boundary samples ---
  auto cap_conormal = [&](int id, double axis_sign) {
    Vec3 axis(axis_sign * frame.axis.x(), frame.axis.y(), frame.axis.z());
    return Vec3((r * mesh.nodes[id] - axis) / root);
  };
  // junction corners carry the cap co-normal
  for (int i = 0; i <= n_tau; i += n_tau) {
    mesh.boundary.push_back({strip[i][n_c], cap_conormal(strip[i][n_c], 1.0), 0.0});
    mesh.boundary.push_back({strip[i][0], cap_conormal(strip[i][0], -1.0), 0.0});
  }
  for (int id : cap_plus_boundary) {
    mesh.boundary.push_back({id, cap_conormal(id, 1.0), 0.0});
    mesh.boundary.push_back({mirror_id.at(id), cap_conormal(mirror_id.at(id), -1.0), 0.0});
  }
  const double wroot = std::sqrt(1.0 - eps * eps);
  for (int j = 1; j < n_c; ++j) {
    int lo = strip[0][j], hi = strip[n_tau][j];
    mesh.boundary.push_back(
        {lo, (Vec3(0, -1, 0) - eps * mesh.nodes[lo]) / wroot, 0.0});
    mesh.boundary.push_back(
        {hi, (Vec3(0, 1, 0) - eps * mesh.nodes[hi]) / wroot, 0.0});
  }
  return mesh;
}

}  // namespace

void validate_spec(const DomainSpec& spec) {
  if (const auto* a = std::get_if<ArcSpec>(&spec)) {
    if (!(a->beta > 0.0 && a->beta < 2.0 * kPi))
      throw ConfigError("beta out of (0, 2*pi)");
  } else if (const auto* c = std::get_if<CapSpec>(&spec)) {
    if (!(c->theta > -kPi / 2.0 && c->theta < kPi / 2.0))
      throw ConfigError("theta out of (-pi/2, pi/2)");
    if (!(c->r >= 0.0 && c->r < 1.0)) throw ConfigError("r out of (0,1)");
  } else if (const auto* t = std::get_if<TunnelSpec>(&spec)) {
    const double theta_min = std::asin(1.0 / std::sqrt(3.0));
    if (!(t->theta > theta_min && t->theta < kPi / 2.0))
      throw ConfigError("tunnel theta out of (arcsin(1/sqrt(N)), pi/2)");
    const double r_theta = std::sqrt(std::max(std::cos(t->theta) * std::cos(t->theta),
                                              std::sin(t->theta) * std::sin(t->theta)));
    if (!(t->r > r_theta && t->r < 1.0))
      throw ConfigError("tunnel r out of (r_theta, 1)");
    if (!(t->eps > 0.0 && t->eps < 1.0))
      throw ConfigError("eps out of (0,1)");
  } else if (const auto* tb = std::get_if<TubeSpec>(&spec)) {
    if (tb->k != 1) throw ConfigError("only tube k=1 (N=3) is meshable");
    if (!(tb->r > 0.0 && tb->r < kPi / 2.0))
      throw ConfigError("tube r out of (0, pi/2)");
  } else if (const auto* mf = std::get_if<MeshFileSpec>(&spec)) {
    if (mf->path.empty()) throw ConfigError("empty mesh file path");
  }
}

DomainSpec parse_domain_spec(const std::string& text) {
  std::string name = text;
  std::map<std::string, std::string> kv;
  auto colon = text.find(':');
  if (colon != std::string::npos) {
    name = text.substr(0, colon);
    std::stringstream rest(text.substr(colon + 1));
    std::string item;
    while (std::getline(rest, item, ',')) {
      auto eq = item.find('=');
      if (eq == std::string::npos)
        throw ConfigError("expected key=value in spec: " + item);
      kv[item.substr(0, eq)] = item.substr(eq + 1);
    }
  }
  auto num = [&](const std::string& key) {
    auto it = kv.find(key);
    if (it == kv.end()) throw ConfigError("missing spec key: " + key);
    try {
      return std::stod(it->second);
    } catch (const std::exception&) {
      throw ConfigError("bad number for key " + key + ": " + it->second);
    }
  };
  DomainSpec spec;
  if (name == "arc")
    spec = ArcSpec{num("beta")};
  else if (name == "cap")
    spec = CapSpec{num("theta"), num("r")};
  else if (name == "hemisphere")
    spec = CapSpec{0.0, 0.0};
  else if (name == "tunnel")
    spec = TunnelSpec{num("theta"), num("r"), num("eps")};
  else if (name == "tube")
    spec = TubeSpec{static_cast<int>(std::lround(num("k"))), num("r")};
  else if (name == "file")
    spec = MeshFileSpec{kv.count("path") ? kv["path"] : ""};
  else
    throw ConfigError("unknown domain spec: " + name);
  validate_spec(spec);
  return spec;
}

std::string spec_to_string(const DomainSpec& spec) {
  char buf[160];
  if (const auto* a = std::get_if<ArcSpec>(&spec))
    std::snprintf(buf, sizeof buf, "arc:beta=%.17g", a->beta);
  else if (const auto* c = std::get_if<CapSpec>(&spec))
    std::snprintf(buf, sizeof buf, "cap:theta=%.17g,r=%.17g", c->theta, c->r);
  else if (const auto* t = std::get_if<TunnelSpec>(&spec))
    std::snprintf(buf, sizeof buf, "tunnel:theta=%.17g,r=%.17g,eps=%.17g",
                  t->theta, t->r, t->eps);
  else if (const auto* tb = std::get_if<TubeSpec>(&spec))
    std::snprintf(buf, sizeof buf, "tube:k=%d,r=%.17g", tb->k, tb->r);
  else
    return "file:path=" + std::get<MeshFileSpec>(spec).path;
  return buf;
}

void SphericalMesh::finalize() {
  const int nn = node_count();
  cell_geom.assign(cells.size(), {});
  node_weights.assign(nn, 0.0);
  node_cells.assign(nn, {});
  for (size_t c = 0; c < cells.size(); ++c)
    for (int a = 0; a < dim; ++a)
      node_cells[cells[c][a]].push_back(static_cast<int>(c));
  total_measure = 0.0;
  for (size_t c = 0; c < cells.size(); ++c) {
    const auto& cell = cells[c];
    CellGeometry g;
    if (dim == 2) {
      const Vec3 &a = nodes[cell[0]], &b = nodes[cell[1]];
      const double len = std::acos(clamp1(a.dot(b)));
      if (!(len > 1e-14))
        throw NumericalError("degenerate segment in cell " + std::to_string(c));
      Vec3 t = (b - a).normalized();
      g.measure = len;
      g.grad[0] = -t / len;
      g.grad[1] = t / len;
      node_weights[cell[0]] += len / 2.0;
      node_weights[cell[1]] += len / 2.0;
    } else {
      const Vec3 &a = nodes[cell[0]], &b = nodes[cell[1]], &cc = nodes[cell[2]];
      const Vec3 n = (b - a).cross(cc - a);
      const double area2 = n.norm();
      if (!(area2 > 1e-18))
        throw NumericalError("degenerate triangle in cell " + std::to_string(c));
      const Vec3 nh = n / area2;
      g.measure = area2 / 2.0;
      g.grad[0] = nh.cross(cc - b) / area2;
      g.grad[1] = nh.cross(a - cc) / area2;
      g.grad[2] = nh.cross(b - a) / area2;
      for (int v = 0; v < 3; ++v) node_weights[cell[v]] += g.measure / 3.0;
    }
    total_measure += g.measure;
    cell_geom[c] = g;
  }
  // boundary quadrature weights from the boundary edges implied by the cells
  if (!boundary.empty()) {
    std::map<int, double> w;
    if (dim == 2) {
      for (auto& bs : boundary) w[bs.node] = 1.0;
    } else {
      std::map<std::pair<int, int>, int> edge_count;
      for (const auto& cell : cells)
        for (int e = 0; e < 3; ++e) {
          int u = cell[e], v = cell[(e + 1) % 3];
          edge_count[{std::min(u, v), std::max(u, v)}]++;
        }
      for (const auto& [edge, count] : edge_count)
        if (count == 1) {
          double half = 0.5 * (nodes[edge.first] - nodes[edge.second]).norm();
          w[edge.first] += half;
          w[edge.second] += half;
        }
    }
    for (auto& bs : boundary) {
      auto it = w.find(bs.node);
      if (it == w.end())
        throw NumericalError("boundary node " + std::to_string(bs.node) +
                             " is not on a boundary edge");
      bs.weight = it->second;
    }
  }
}

void SphericalMesh::validate(bool expect_connected) const {
  for (size_t i = 0; i < nodes.size(); ++i)
    if (std::abs(nodes[i].norm() - 1.0) > 1e-12)
      throw NumericalError("node " + std::to_string(i) + " off the sphere");
  for (const auto& bs : boundary) {
    if (std::abs(bs.conormal.norm() - 1.0) > 1e-10)
      throw NumericalError("non-unit co-normal at node " + std::to_string(bs.node));
    if (std::abs(bs.conormal.dot(nodes[bs.node])) > 1e-10)
      throw NumericalError("co-normal not tangent at node " + std::to_string(bs.node));
  }
  if (expect_connected && !cells.empty()) {
    std::vector<int> comp(nodes.size(), -1);
    std::vector<std::vector<int>> adj(nodes.size());
    for (const auto& cell : cells) {
      int arity = dim;
      for (int e = 0; e < arity; ++e)
        for (int f = e + 1; f < arity; ++f) {
          adj[cell[e]].push_back(cell[f]);
          adj[cell[f]].push_back(cell[e]);
        }
    }
    std::vector<int> stack{cells[0][0]};
    comp[cells[0][0]] = 0;
    while (!stack.empty()) {
      int u = stack.back();
      stack.pop_back();
      for (int v : adj[u])
        if (comp[v] < 0) {
          comp[v] = 0;
          stack.push_back(v);
        }
    }
    for (const auto& cell : cells)
      if (comp[cell[0]] < 0) throw NumericalError("mesh is disconnected");
  }
  double wsum = 0.0;
  for (double w : node_weights) {
    if (w < 0.0) throw NumericalError("negative quadrature weight");
    wsum += w;
  }
  if (std::abs(wsum - total_measure) > 1e-10 * std::max(1.0, total_measure))
    throw NumericalError("quadrature weights do not sum to the surface measure");
}

SphericalMesh build_domain(const DomainSpec& spec, double h) {
  validate_spec(spec);
  if (!(h > 0.0)) throw ConfigError("mesh size h must be positive");
  SphericalMesh mesh;
  if (const auto* a = std::get_if<ArcSpec>(&spec))
    mesh = build_arc(a->beta, h);
  else if (const auto* c = std::get_if<CapSpec>(&spec))
    mesh = build_cap(c->theta, c->r, h);
  else if (const auto* t = std::get_if<TunnelSpec>(&spec))
    mesh = build_tunnel(t->theta, t->r, t->eps, h);
  else if (const auto* tb = std::get_if<TubeSpec>(&spec))
    mesh = build_tube(tb->r, h);
  else
    return load_mesh_file(std::get<MeshFileSpec>(spec).path);
  mesh.finalize();
  mesh.validate();
  return mesh;
}

double surface_measure(const SphericalMesh& mesh) { return mesh.total_measure; }

double unit_ball_volume(int m) {
  if (m < 0) throw ConfigError("negative dimension");
  std::vector<double> v(std::max(2, m + 1));
  v[0] = 1.0;
  v[1] = 2.0;
  for (int i = 2; i <= m; ++i) v[i] = 2.0 * kPi * v[i - 2] / i;
  return v[m];
}

double hemisphere_measure(int dim) {
  if (dim < 2) throw ConfigError("dimension must be >= 2");
  return 0.5 * dim * unit_ball_volume(dim);
}

double integrate_on_domain(const SphericalMesh& mesh,
                           const std::vector<double>& f) {
  if (f.size() != mesh.nodes.size())
    throw ConfigError("field size does not match node count");
  return par::sum_blocked(f.size(),
                          [&](size_t i) { return mesh.node_weights[i] * f[i]; });
}

double integrate_on_boundary(const SphericalMesh& mesh,
                             const std::vector<double>& g) {
  if (mesh.boundary.empty()) throw ConfigError("mesh has an empty boundary");
  if (g.size() != mesh.boundary.size())
    throw ConfigError("field size does not match boundary count");
  return par::sum_blocked(
      g.size(), [&](size_t i) { return mesh.boundary[i].weight * g[i]; });
}

SphericalMesh load_mesh_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open mesh file: " + path);
  SphericalMesh mesh;
  std::string tag;
  if (!(in >> tag >> mesh.dim) || tag != "N" || (mesh.dim != 2 && mesh.dim != 3))
    throw ConfigError("mesh file must start with 'N 2' or 'N 3'");
  while (in >> tag) {
    if (tag == "v") {
      Vec3 x = Vec3::Zero();
      for (int d = 0; d < mesh.dim; ++d) in >> x[d];
      mesh.nodes.push_back(x);
    } else if (tag == "c") {
      std::array<int, 3> cell{-1, -1, -1};
      for (int d = 0; d < mesh.dim; ++d) in >> cell[d];
      mesh.cells.push_back(cell);
    } else if (tag == "b") {
      BoundarySample bs;
      in >> bs.node;
      for (int d = 0; d < mesh.dim; ++d) in >> bs.conormal[d];
      mesh.boundary.push_back(bs);
    } else {
      throw ConfigError("unknown mesh file tag: " + tag);
    }
    if (!in) throw ConfigError("malformed mesh file: " + path);
  }
  for (const auto& cell : mesh.cells)
    for (int d = 0; d < mesh.dim; ++d)
      if (cell[d] < 0 || cell[d] >= mesh.node_count())
        throw ConfigError("cell index out of range in " + path);
  mesh.finalize();
  mesh.validate();
  return mesh;
}

void save_mesh_file(const SphericalMesh& mesh, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write mesh file: " + path);
  char buf[256];
  out << "N " << mesh.dim << "\n";
  for (const auto& x : mesh.nodes) {
    out << "v";
    for (int d = 0; d < mesh.dim; ++d) {
      std::snprintf(buf, sizeof buf, " %.17g", x[d]);
      out << buf;
    }
    out << "\n";
  }
  for (const auto& cell : mesh.cells) {
    out << "c";
    for (int d = 0; d < mesh.dim; ++d) out << " " << cell[d];
    out << "\n";
  }
  for (const auto& bs : mesh.boundary) {
    out << "b " << bs.node;
    for (int d = 0; d < mesh.dim; ++d) {
      std::snprintf(buf, sizeof buf, " %.17g", bs.conormal[d]);
      out << buf;
    }
    out << "\n";
  }
}

}  // namespace conekit::geom
