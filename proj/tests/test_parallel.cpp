#include <doctest.h>

#include <cmath>
#include <vector>

#include "core/parallel.hpp"
#include "geom/spherical_mesh.hpp"
#include "graph/radial_graph.hpp"

using namespace conekit;

TEST_CASE("blocked reduction matches the serial reference") {
  std::vector<double> xs(100003);
  for (size_t i = 0; i < xs.size(); ++i)
    xs[i] = std::sin(0.37 * i) / (1.0 + 1e-4 * i);
  auto term = [&](size_t i) { return xs[i]; };
  const double serial = par::sum_serial(xs.size(), term);
  const double blocked = par::sum_blocked(xs.size(), term);
  CHECK(std::abs(serial - blocked) < 1e-12 * xs.size());

  // chunked combination is independent of the thread count
  const int saved = par::max_threads();
  par::set_threads(1);
  const double one_thread = par::sum_blocked(xs.size(), term);
  par::set_threads(saved);
  CHECK(one_thread == blocked);
}

TEST_CASE("row-parallel perimeter gradient matches the cell scatter") {
  auto mesh = geom::build_domain(geom::CapSpec{0.1, 0.35}, 0.06);
  std::vector<double> phi(mesh.nodes.size());
  for (size_t i = 0; i < phi.size(); ++i)
    phi[i] = 0.25 * std::sin(2.0 * mesh.nodes[i].x()) +
             0.1 * mesh.nodes[i].y() * mesh.nodes[i].z();
  auto g = graph::make_graph(mesh, phi);
  auto parallel = graph::perimeter_gradient(g);
  auto serial = graph::perimeter_gradient_serial(g);
  REQUIRE(parallel.size() == serial.size());
  double scale = 0.0;
  for (double x : serial) scale = std::max(scale, std::abs(x));
  for (size_t i = 0; i < serial.size(); ++i)
    CHECK(std::abs(parallel[i] - serial[i]) <= 1e-13 * scale);
}

TEST_CASE("for_each_index covers every index exactly once") {
  std::vector<int> hits(5000, 0);
  par::for_each_index(hits.size(), [&](size_t i) { hits[i] += 1; });
  for (int h : hits) CHECK(h == 1);
}
