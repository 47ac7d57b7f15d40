#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <numbers>

#include "core/errors.hpp"
#include "geom/spherical_mesh.hpp"

using namespace conekit;
using geom::SphericalMesh;
using geom::Vec3;

namespace {
constexpr double kPi = std::numbers::pi;

std::vector<double> nodal(const SphericalMesh& m,
                          const std::function<double(const Vec3&)>& f) {
  std::vector<double> out(m.nodes.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = f(m.nodes[i]);
  return out;
}
}  // namespace

TEST_CASE("arc mesh: node count, boundary, exact measure") {
  const double beta = 1.5 * kPi;
  auto mesh = geom::build_domain(geom::ArcSpec{beta}, beta / 512);
  CHECK(mesh.node_count() == 513);
  CHECK(mesh.boundary.size() == 2);
  CHECK(geom::surface_measure(mesh) == doctest::Approx(beta).epsilon(1e-12));
  // integrate_on_boundary with g == 1 counts the endpoints
  CHECK(geom::integrate_on_boundary(mesh, {1.0, 1.0}) == doctest::Approx(2.0));
}

TEST_CASE("cap and tube areas against closed forms") {
  auto cap = geom::build_domain(geom::CapSpec{0.0, 0.5}, 0.05);
  CHECK(geom::surface_measure(cap) ==
        doctest::Approx(2.0 * kPi * 0.5).epsilon(0.01));

  auto tube = geom::build_domain(geom::TubeSpec{1, kPi / 6}, 0.05);
  CHECK(geom::surface_measure(tube) ==
        doctest::Approx(4.0 * kPi * std::sin(kPi / 6)).epsilon(0.01));

  auto hemi = geom::build_domain(geom::parse_domain_spec("hemisphere"), 0.05);
  CHECK(geom::surface_measure(hemi) == doctest::Approx(2.0 * kPi).epsilon(0.01));
}

TEST_CASE("area refinement order is at least 1.5 on analytic presets") {
  const double exact = 2.0 * kPi * (1.0 - 0.3);
  auto coarse = geom::build_domain(geom::CapSpec{0.0, 0.3}, 0.2);
  auto fine = geom::build_domain(geom::CapSpec{0.0, 0.3}, 0.1);
  double e0 = std::abs(geom::surface_measure(coarse) - exact);
  double e1 = std::abs(geom::surface_measure(fine) - exact);
  CHECK(e0 / e1 >= 3.0);
}

TEST_CASE("hemisphere measures from the ball-volume recursion") {
  CHECK(geom::hemisphere_measure(2) == doctest::Approx(kPi).epsilon(1e-14));
  CHECK(geom::hemisphere_measure(3) == doctest::Approx(2 * kPi).epsilon(1e-14));
  CHECK(geom::hemisphere_measure(4) == doctest::Approx(kPi * kPi).epsilon(1e-14));
  // numeric cross-check: |S^3|/2 via int_0^pi |S^2| sin^2(psi) dpsi / 2
  const int n = 20000;
  double quad = 0.0;
  for (int i = 0; i < n; ++i) {
    double psi = kPi * (i + 0.5) / n;
    quad += 4.0 * kPi * std::sin(psi) * std::sin(psi) * (kPi / n);
  }
  CHECK(geom::hemisphere_measure(4) == doctest::Approx(quad / 2).epsilon(1e-6));
}

TEST_CASE("domain quadrature: constants, odd fields, second moments") {
  auto hemi = geom::build_domain(geom::CapSpec{0.0, 0.0}, 0.05);
  auto ones = nodal(hemi, [](const Vec3&) { return 1.0; });
  CHECK(geom::integrate_on_domain(hemi, ones) ==
        doctest::Approx(geom::surface_measure(hemi)).epsilon(1e-13));

  auto x1 = nodal(hemi, [](const Vec3& x) { return x.x(); });
  CHECK(std::abs(geom::integrate_on_domain(hemi, x1)) < 1e-4);

  // structured tube rings make the odd integral cancel to roundoff
  auto tube = geom::build_domain(geom::TubeSpec{1, 0.5}, 0.1);
  auto tx1 = nodal(tube, [](const Vec3& x) { return x.x(); });
  CHECK(std::abs(geom::integrate_on_domain(tube, tx1)) < 1e-12);

  // int_{S^2} x1^2 = 4*pi/3, halved on the hemisphere; quadrature converges
  auto x1sq = nodal(hemi, [](const Vec3& x) { return x.x() * x.x(); });
  double coarse_val = geom::integrate_on_domain(hemi, x1sq);
  CHECK(coarse_val == doctest::Approx(2.0 * kPi / 3.0).epsilon(0.01));
  auto hemi2 = geom::build_domain(geom::CapSpec{0.0, 0.0}, 0.025);
  auto x1sq2 = nodal(hemi2, [](const Vec3& x) { return x.x() * x.x(); });
  double fine_val = geom::integrate_on_domain(hemi2, x1sq2);
  CHECK(std::abs(fine_val - 2.0 * kPi / 3.0) <
        std::abs(coarse_val - 2.0 * kPi / 3.0));
}

TEST_CASE("boundary quadrature lengths") {
  const double r = 0.4;
  auto cap = geom::build_domain(geom::CapSpec{0.0, r}, 0.04);
  std::vector<double> ones(cap.boundary.size(), 1.0);
  CHECK(geom::integrate_on_boundary(cap, ones) ==
        doctest::Approx(2.0 * kPi * std::sqrt(1.0 - r * r)).epsilon(0.005));

  const double rr = 0.5;
  auto tube = geom::build_domain(geom::TubeSpec{1, rr}, 0.05);
  std::vector<double> tones(tube.boundary.size(), 1.0);
  CHECK(geom::integrate_on_boundary(tube, tones) ==
        doctest::Approx(4.0 * kPi * std::cos(rr)).epsilon(0.005));
}

TEST_CASE("analytic co-normals: cap (tilted) and tube identities") {
  const double theta = 0.6, r = 0.7;
  auto cap = geom::build_domain(geom::CapSpec{theta, r}, 0.05);
  const Vec3 e_theta(std::sin(theta), 0.0, std::cos(theta));
  for (const auto& bs : cap.boundary) {
    Vec3 expect = (r * cap.nodes[bs.node] - e_theta) / std::sqrt(1 - r * r);
    CHECK((bs.conormal - expect).norm() < 1e-8);
  }

  const double rr = 0.45;
  auto tube = geom::build_domain(geom::TubeSpec{1, rr}, 0.08);
  for (const auto& bs : tube.boundary) {
    const Vec3& x = tube.nodes[bs.node];
    Vec3 y = Vec3(x.x(), x.y(), 0.0) / std::cos(rr);
    Vec3 z(0.0, 0.0, x.z() > 0 ? 1.0 : -1.0);
    Vec3 expect = -y * std::sin(rr) + z * std::cos(rr);
    CHECK((bs.conormal - expect).norm() < 1e-8);
  }
}

TEST_CASE("tunnel mesh: symmetric, connected, inside the hemisphere") {
  const double theta = 50.0 * kPi / 180.0, r = 0.85, eps = 0.05;
  auto mesh = geom::build_domain(geom::TunnelSpec{theta, r, eps}, 0.05);
  mesh.validate(true);
  CHECK(!mesh.boundary.empty());
  // area: two caps plus a thin bridge, below the hemisphere area
  double area = geom::surface_measure(mesh);
  CHECK(area > 2.0 * (2.0 * kPi * (1.0 - r)));
  CHECK(area < geom::hemisphere_measure(3));
  // u_{e1} has exactly zero mean by the x1-mirror symmetry of the mesh
  auto x1 = nodal(mesh, [](const Vec3& x) { return x.x(); });
  CHECK(std::abs(geom::integrate_on_domain(mesh, x1)) < 1e-12 * area);
  // every node is inside one of the three pieces
  for (const auto& x : mesh.nodes) {
    bool in_cap = x.dot(Vec3(std::sin(theta), 0, std::cos(theta))) >= r - 1e-9 ||
                  x.dot(Vec3(-std::sin(theta), 0, std::cos(theta))) >= r - 1e-9;
    bool in_band = std::abs(x.y()) <= eps + 1e-9 && x.z() > 0.0;
    CHECK((in_cap || in_band));
  }
}

TEST_CASE("spec parsing and validation errors") {
  CHECK_THROWS_AS(geom::parse_domain_spec("cap:theta=0.1,r=2"), ConfigError);
  CHECK_THROWS_AS(geom::parse_domain_spec("arc:beta=-1"), ConfigError);
  CHECK_THROWS_AS(geom::parse_domain_spec("blob:x=1"), ConfigError);
  CHECK_THROWS_AS(geom::parse_domain_spec("tube:k=2,r=0.3"), ConfigError);
  CHECK_THROWS_AS(geom::parse_domain_spec("tunnel:theta=0.2,r=0.85,eps=0.05"),
                  ConfigError);
  CHECK_THROWS_AS(geom::build_domain(geom::ArcSpec{1.0}, -0.1), ConfigError);
  auto spec = geom::parse_domain_spec("cap:theta=0.25,r=0.5");
  CHECK(geom::spec_to_string(spec).rfind("cap:", 0) == 0);
}

TEST_CASE("mesh file round trip") {
  auto mesh = geom::build_domain(geom::CapSpec{0.2, 0.6}, 0.15);
  const std::string path = "roundtrip_mesh.txt";
  geom::save_mesh_file(mesh, path);
  auto loaded = geom::load_mesh_file(path);
  CHECK(loaded.dim == mesh.dim);
  CHECK(loaded.node_count() == mesh.node_count());
  CHECK(loaded.cell_count() == mesh.cell_count());
  CHECK(loaded.boundary.size() == mesh.boundary.size());
  CHECK(geom::surface_measure(loaded) ==
        doctest::Approx(geom::surface_measure(mesh)).epsilon(1e-15));
  // resave is byte-identical
  const std::string path2 = "roundtrip_mesh2.txt";
  geom::save_mesh_file(loaded, path2);
  std::ifstream f1(path), f2(path2);
  std::string s1((std::istreambuf_iterator<char>(f1)), {});
  std::string s2((std::istreambuf_iterator<char>(f2)), {});
  CHECK(s1 == s2);
  std::remove(path.c_str());
  std::remove(path2.c_str());
}
