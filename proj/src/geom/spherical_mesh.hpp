#pragma once

#include <Eigen/Dense>
#include <array>
#include <string>
#include <variant>
#include <vector>

namespace conekit::geom {

using Vec3 = Eigen::Vector3d;

// Domain presets on S^{N-1}.  Arc lives on S^1 (N=2); the others on S^2.
struct ArcSpec {
  double beta = 0.0;  // angular width, radians
};
struct CapSpec {
  double theta = 0.0;  // tilt of the cap axis in the (x1,xN) plane
  double r = 0.0;      // height: D = {x . e_theta > r}; r = 0 is a hemisphere
};
struct TunnelSpec {
  double theta = 0.0;
  double r = 0.0;
  double eps = 0.0;  // half-width of the joining band |x2| < eps
};
struct TubeSpec {
  int k = 1;       // only k = 1 is meshable (N = 3)
  double r = 0.0;  // geodesic half-width about the equator S^k
};
struct MeshFileSpec {
  std::string path;
};

using DomainSpec =
    std::variant<ArcSpec, CapSpec, TunnelSpec, TubeSpec, MeshFileSpec>;

// Throws ConfigError when parameters are out of range.
void validate_spec(const DomainSpec& spec);

// `name:key=value,...` mini-grammar, e.g. "cap:theta=0.2,r=0.5",
// "arc:beta=4.712", "tube:k=1,r=0.45", "tunnel:theta=0.87,r=0.85,eps=0.05",
// "hemisphere", "file:path=mesh.txt".
DomainSpec parse_domain_spec(const std::string& text);
std::string spec_to_string(const DomainSpec& spec);

struct BoundarySample {
  int node = -1;
  Vec3 conormal = Vec3::Zero();  // unit, tangent to the sphere, outward
  double weight = 0.0;           // (N-2)-dimensional quadrature weight
};

struct CellGeometry {
  double measure = 0.0;           // triangle area (N=3) or arc length (N=2)
  std::array<Vec3, 3> grad = {};  // P1 basis gradients in the cell plane
};

struct SphericalMesh {
  int dim = 3;  // ambient dimension N (2 or 3)
  std::vector<Vec3> nodes;
  // Triangles for N=3; segments for N=2 with cell[2] == -1.
  std::vector<std::array<int, 3>> cells;
  std::vector<BoundarySample> boundary;

  // Derived at construction (see finalize()).
  std::vector<double> node_weights;  // lumped quadrature, sums to area()
  std::vector<CellGeometry> cell_geom;
  std::vector<std::vector<int>> node_cells;  // incident cells per node
  double total_measure = 0.0;

  int node_count() const { return static_cast<int>(nodes.size()); }
  int cell_count() const { return static_cast<int>(cells.size()); }
  int cell_arity() const { return dim; }
  double area() const { return total_measure; }

  // Computes cell measures, P1 gradients, lumped weights and boundary
  // weights.  Throws NumericalError on degenerate cells (reports the cell).
  void finalize();

  // Checks the structural invariants: unit nodes, tangent unit co-normals,
  // positive measures, connectivity.  Throws on violation.
  void validate(bool expect_connected = true) const;
};

// Mesh construction.  h is the target edge length (radians).
SphericalMesh build_domain(const DomainSpec& spec, double h);

double surface_measure(const SphericalMesh& mesh);

// Area of the half sphere S^{N-1}_+, any N >= 2.
double hemisphere_measure(int dim);

// Volume of the unit ball in R^m (omega_0 = 1, omega_1 = 2).
double unit_ball_volume(int m);

// Lumped-quadrature integral of a nodal field over D.
double integrate_on_domain(const SphericalMesh& mesh,
                           const std::vector<double>& f);

// Integral over the relative boundary; g is indexed like mesh.boundary.
// For N=2 this is the sum of the endpoint values.
double integrate_on_boundary(const SphericalMesh& mesh,
                             const std::vector<double>& g);

// Plain-text mesh file round trip (format described in the README).
SphericalMesh load_mesh_file(const std::string& path);
void save_mesh_file(const SphericalMesh& mesh, const std::string& path);

}  // namespace conekit::geom
