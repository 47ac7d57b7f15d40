#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "core/errors.hpp"
#include "geom/spherical_mesh.hpp"
#include "graph/radial_graph.hpp"
#include "spectral/neumann.hpp"
#include "torsion/sector.hpp"
#include "torsion/solver.hpp"

using namespace conekit;

namespace {
constexpr double kPi = std::numbers::pi;

std::vector<double> constant_field(const geom::SphericalMesh& m, double value) {
  return std::vector<double>(m.nodes.size(), value);
}
}  // namespace

TEST_CASE("sector torsion function and flux") {
  CHECK(torsion::sector_torsion_exact(1.0, 1.0, 3) == doctest::Approx(0.0));
  CHECK(torsion::sector_torsion_exact(0.0, 1.0, 3) ==
        doctest::Approx(1.0 / 6.0).epsilon(1e-15));
  CHECK(torsion::sector_flux(1.0, 3) == doctest::Approx(-1.0 / 3.0));
  CHECK_THROWS_AS(torsion::sector_torsion_exact(1.2, 1.0, 3), ConfigError);
}

TEST_CASE("sector energy: closed form, radial quadrature, scaling") {
  const double E = torsion::sector_energy(1.0, 2.0 * kPi, 3);
  CHECK(E == doctest::Approx(-kPi / 45.0).epsilon(1e-14));
  // -1/2 int u over the sector by radial quadrature
  const int n = 200000;
  double quad = 0.0;
  for (int i = 0; i < n; ++i) {
    double r = (i + 0.5) / n;
    quad += -0.5 * (1.0 - r * r) / 6.0 * r * r * (2.0 * kPi) / n;
  }
  CHECK(E == doctest::Approx(quad).epsilon(1e-8));
  for (double t : {0.5, 2.0})
    CHECK(torsion::sector_energy(t, 2.0 * kPi, 3) ==
          doctest::Approx(std::pow(t, 5) * E).epsilon(1e-14));
}

TEST_CASE("fixed-volume sector energy and the half-space value") {
  CHECK(torsion::sector_radius_for_volume(2.0 * kPi / 3.0, 2.0 * kPi, 3) ==
        doctest::Approx(1.0).epsilon(1e-14));
  CHECK(torsion::fixed_volume_sector_energy(2.0 * kPi / 3.0, 2.0 * kPi, 3) ==
        doctest::Approx(-kPi / 45.0).epsilon(1e-14));
  CHECK(torsion::halfspace_energy(2.0 * kPi / 3.0, 3) ==
        doctest::Approx(-kPi / 45.0).epsilon(1e-14));

  // doubling the volume scales the energy by 2^{(N+2)/N}
  for (int N : {2, 3, 4}) {
    const double H = geom::hemisphere_measure(N) * 0.7;
    const double c = 0.9;
    CHECK(torsion::fixed_volume_sector_energy(2.0 * c, H, N) ==
          doctest::Approx(std::pow(2.0, (N + 2.0) / N) *
                          torsion::fixed_volume_sector_energy(c, H, N))
              .epsilon(1e-13));
    // scale-invariant combination c^{-(N+2)/N} E(c)
    const double r1 = torsion::fixed_volume_sector_energy(c, H, N) /
                      std::pow(c, (N + 2.0) / N);
    const double r2 = torsion::fixed_volume_sector_energy(3.7 * c, H, N) /
                      std::pow(3.7 * c, (N + 2.0) / N);
    CHECK(r1 == doctest::Approx(r2).epsilon(1e-13));
  }

  // identical to the sector formula at the hemisphere, ten random volumes
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> unif(0.05, 20.0);
  for (int N : {2, 3, 5}) {
    const double H = geom::hemisphere_measure(N);
    for (int trial = 0; trial < 10; ++trial) {
      const double c = unif(rng);
      const double a = torsion::halfspace_energy(c, N);
      const double b = torsion::fixed_volume_sector_energy(c, H, N);
      CHECK(std::abs(a - b) <= 1e-12 * std::abs(a));
      CHECK(a < 0.0);
    }
  }

  // the printed half-space value deviates from the consistent chain
  const double printed = torsion::halfspace_energy_printed(2.0 * kPi / 3.0, 3);
  CHECK(printed == doctest::Approx(-0.01117).epsilon(0.01));
  CHECK(std::abs(printed - torsion::halfspace_energy(2.0 * kPi / 3.0, 3)) >
        0.05);
}

TEST_CASE("minimizer flux constant") {
  CHECK(torsion::minimizer_flux_constant(-3.0 / (2.0 * 5.0), 3) ==
        doctest::Approx(1.0).epsilon(1e-14));
  CHECK_THROWS_AS(torsion::minimizer_flux_constant(0.1, 3), ConfigError);
  // the sector at its own volume reproduces the flux R_c / N
  for (int N : {2, 3}) {
    const double H = 0.8 * geom::hemisphere_measure(N);
    const double O1 = torsion::fixed_volume_sector_energy(1.0, H, N);
    const double Rc = torsion::sector_radius_for_volume(1.0, H, N);
    CHECK(torsion::minimizer_flux_constant(O1, N) ==
          doctest::Approx(Rc / N).epsilon(1e-13));
  }
}

TEST_CASE("mapped torsion solve reproduces the unit sector (N=2)") {
  const double beta = kPi / 2.0;
  auto mesh = geom::build_domain(geom::ArcSpec{beta}, beta / 128);
  auto g = graph::make_graph(mesh, constant_field(mesh, 0.0));
  auto field = torsion::solve_torsion(g, 64);

  // grid values against u = (1 - s^2) / (2N)
  double sup = 0.0;
  const int nq = static_cast<int>(field.section.t.size());
  for (int i = 0; i <= field.n_s; ++i)
    for (int k = 0; k < nq; ++k) {
      double s = static_cast<double>(i) / field.n_s;
      sup = std::max(sup, std::abs(field.value(i, k) - (1.0 - s * s) / 4.0));
    }
  CHECK(sup < 2e-4);

  // positivity away from the Dirichlet boundary
  for (int i = 0; i < field.n_s; ++i)
    for (int k = 0; k < nq; ++k) CHECK(field.value(i, k) > 0.0);

  // energy identity and the closed form -beta/32
  CHECK(std::abs(field.energy_gap()) < 1e-10);
  CHECK(field.energy_load == doctest::Approx(-beta / 32.0).epsilon(5e-3));

  // flux is a near-constant -R/N = -1/2
  for (double f : field.flux_section) CHECK(f == doctest::Approx(-0.5).epsilon(5e-3));
}

TEST_CASE("mapped torsion solve: axisymmetric N=3 domains") {
  auto cap = geom::build_domain(geom::CapSpec{0.0, 0.4}, 0.05);
  auto gc = graph::make_graph(cap, constant_field(cap, 0.0));
  auto ec = torsion::torsion_energy(gc, 48);
  CHECK(ec.value ==
        doctest::Approx(torsion::sector_energy(1.0, 2.0 * kPi * 0.6, 3))
            .epsilon(0.01));
  CHECK(std::abs(ec.gap) < 1e-10);

  auto tube = geom::build_domain(geom::TubeSpec{1, 0.5}, 0.05);
  auto gt = graph::make_graph(tube, constant_field(tube, 0.0));
  auto et = torsion::torsion_energy(gt, 48);
  CHECK(et.value ==
        doctest::Approx(
            torsion::sector_energy(1.0, 4.0 * kPi * std::sin(0.5), 3))
            .epsilon(0.01));

  // flux close to -R/N = -1/3
  auto ft = torsion::solve_torsion(gt, 48);
  for (double f : ft.flux_section) CHECK(f == doctest::Approx(-1.0 / 3).epsilon(5e-3));

  // non-axisymmetric phi is rejected
  std::vector<double> skew(tube.nodes.size());
  for (size_t i = 0; i < skew.size(); ++i) skew[i] = 0.1 * tube.nodes[i].x();
  auto gbad = graph::make_graph(tube, skew);
  CHECK_THROWS_AS(torsion::solve_torsion(gbad, 16), NumericalError);
}

TEST_CASE("torsion scaling law under constant shifts") {
  const double beta = 1.2;
  auto mesh = geom::build_domain(geom::ArcSpec{beta}, beta / 192);
  std::vector<double> phi(mesh.nodes.size());
  for (size_t i = 0; i < phi.size(); ++i)
    phi[i] = 0.2 * std::sin(3.0 * mesh.nodes[i].x());
  auto g = graph::make_graph(mesh, phi);
  const double E = torsion::torsion_energy(g, 96).value;
  for (double t : {0.5, 2.0}) {
    std::vector<double> shifted(phi);
    for (double& x : shifted) x += std::log(t);
    auto gs = graph::make_graph(mesh, shifted);
    CHECK(torsion::torsion_energy(gs, 96).value ==
          doctest::Approx(std::pow(t, mesh.dim + 2) * E).epsilon(5e-3));
  }

  // enlarging the domain can only lower the energy
  std::vector<double> bigger(phi);
  for (size_t i = 0; i < phi.size(); ++i)
    bigger[i] += 0.25 + 0.1 * mesh.nodes[i].y();
  auto gb = graph::make_graph(mesh, bigger);
  CHECK(torsion::torsion_energy(gb, 96).value < E);
}

TEST_CASE("first variation of the torsional energy") {
  const double beta = 1.5 * kPi;
  auto mesh = geom::build_domain(geom::ArcSpec{beta}, beta / 256);
  const int N = mesh.dim;
  auto g0 = graph::make_graph(mesh, constant_field(mesh, 0.0));
  auto f0 = torsion::solve_torsion(g0, 128);

  std::vector<double> v(mesh.nodes.size());
  for (size_t i = 0; i < v.size(); ++i)
    v[i] = 0.3 + 0.2 * mesh.nodes[i].x() - 0.1 * mesh.nodes[i].y();
  const double at_zero = torsion::energy_first_variation(g0, v, f0);
  const double expected =
      -geom::integrate_on_domain(mesh, v) / (2.0 * N * N);
  CHECK(at_zero == doctest::Approx(expected).epsilon(1e-3));
  CHECK(torsion::energy_first_variation_flux_form(g0, v, f0) ==
        doctest::Approx(expected).epsilon(1e-6));

  // central finite differences of resolved solves, order two in t
  std::vector<double> phi(mesh.nodes.size());
  for (size_t i = 0; i < phi.size(); ++i)
    phi[i] = 0.15 * std::sin(2.0 * mesh.nodes[i].x() + 0.4);
  auto g = graph::make_graph(mesh, phi);
  auto field = torsion::solve_torsion(g, 128);
  const double exact = torsion::energy_first_variation(g, v, field);

  // the Lemma-style boundary-flux quadrature is a consistent second route
  const double flux_form = torsion::energy_first_variation_flux_form(g, v, field);
  CHECK(flux_form == doctest::Approx(exact).epsilon(1e-4));

  double prev = -1.0;
  for (double t : {1e-2, 1e-3}) {
    std::vector<double> plus(phi), minus(phi);
    for (size_t i = 0; i < phi.size(); ++i) {
      plus[i] += t * v[i];
      minus[i] -= t * v[i];
    }
    const double ep = torsion::torsion_energy(graph::make_graph(mesh, plus), 128).value;
    const double em = torsion::torsion_energy(graph::make_graph(mesh, minus), 128).value;
    const double err = std::abs((ep - em) / (2.0 * t) - exact);
    if (prev > 0.0) CHECK(prev / err > 25.0);
    prev = err;
  }
}

TEST_CASE("linearized flux in the eigenbasis") {
  const double beta = 1.5 * kPi;
  auto mesh = geom::build_domain(geom::ArcSpec{beta}, beta / 128);
  auto spec = spectral::solve_neumann_spectrum(mesh, 3);
  const int N = mesh.dim;

  std::vector<double> c = {0.0, 1.0, 0.0, 0.0};
  auto flux = torsion::linearized_torsion_flux(spec, c);
  for (size_t i = 0; i < flux.size(); ++i)
    CHECK(flux[i] ==
          doctest::Approx(spec.alphas[1] / N * spec.modes[1][i]).epsilon(1e-12));

  auto zero = torsion::linearized_torsion_flux(spec, {0.0, 0.0});
  for (double x : zero) CHECK(x == 0.0);
}

TEST_CASE("spectral second variation at the unit sector") {
  const double beta = 1.5 * kPi;
  auto mesh = geom::build_domain(geom::ArcSpec{beta}, beta / 512);
  auto spec = spectral::solve_neumann_spectrum(mesh, 2);
  const int N = mesh.dim;

  std::vector<double> c = {0.0, 1.0, 0.0};
  const double value = torsion::torsion_second_variation_at_zero(spec, c, N);
  CHECK(value == doctest::Approx(-1.0 / 12.0).epsilon(2e-3));
  CHECK(torsion::torsion_second_variation_extension_route(spec, c, N) ==
        doctest::Approx(value).epsilon(1e-12));

  // a convex arc gives a positive second variation
  auto convex = geom::build_domain(geom::ArcSpec{kPi / 2}, kPi / 1024);
  auto cspec = spectral::solve_neumann_spectrum(convex, 1);
  CHECK(torsion::torsion_second_variation_at_zero(cspec, {0.0, 1.0}, N) > 0.0);

  // nonzero mean is rejected
  CHECK_THROWS_AS(
      torsion::torsion_second_variation_at_zero(spec, {0.5, 1.0, 0.0}, N),
      ConfigError);
}

TEST_CASE("second variation against a finite-difference Hessian (N=2)") {
  const double beta = 1.5 * kPi;
  auto mesh = geom::build_domain(geom::ArcSpec{beta}, beta / 256);
  auto spec = spectral::solve_neumann_spectrum(mesh, 1);
  const int N = mesh.dim;
  const double spectral_value =
      torsion::torsion_second_variation_at_zero(spec, {0.0, 1.0}, N);

  const double c0 = geom::surface_measure(mesh) / N;
  auto at = [&](double t) {
    std::vector<double> phi(mesh.nodes.size());
    for (size_t i = 0; i < phi.size(); ++i) phi[i] = t * spec.modes[1][i];
    auto g = graph::project_volume(graph::make_graph(mesh, phi), c0);
    return torsion::torsion_energy(g, 128).value;
  };
  const double t = 1e-2;
  const double fd = (at(t) - 2.0 * at(0.0) + at(-t)) / (t * t);
  CHECK(fd == doctest::Approx(spectral_value).epsilon(0.10));
}
