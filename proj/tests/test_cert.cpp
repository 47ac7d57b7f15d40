#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "cert/certificates.hpp"
#include "core/errors.hpp"
#include "geom/spherical_mesh.hpp"
#include "spectral/neumann.hpp"

using namespace conekit;
using geom::Vec3;

namespace {
constexpr double kPi = std::numbers::pi;
const Vec3 kE1(1.0, 0.0, 0.0);
}  // namespace

TEST_CASE("closed-form cap criterion and its constant") {
  // c_3 = pi: the N = 3 value is pi r (1-r^2)(1 - 3 sin^2 theta)
  const double theta = 0.4, r = 0.7;
  CHECK(cert::cap_criterion_closed_form(theta, r, 3) ==
        doctest::Approx(kPi * r * (1 - r * r) *
                        (1 - 3 * std::sin(theta) * std::sin(theta)))
            .epsilon(1e-14));
  // vanishes on the sign-change line theta = arcsin(1/sqrt(N))
  for (int N : {3, 4, 6})
    CHECK(std::abs(cert::cap_criterion_closed_form(
              std::asin(1.0 / std::sqrt(N)), 0.5, N)) < 1e-14);
  // quoted value at theta = 50 deg, r = 0.85
  CHECK(cert::cap_criterion_closed_form(50.0 * kPi / 180.0, 0.85, 3) ==
        doctest::Approx(-0.5635).epsilon(2e-4));
  CHECK(cert::wallis_integral(0) == doctest::Approx(kPi));
  CHECK(cert::wallis_integral(1) == doctest::Approx(2.0));
  CHECK(cert::wallis_integral(3) == doctest::Approx(4.0 / 3.0));
  CHECK_THROWS_AS(cert::cap_criterion_closed_form(0.1, 0.5, 2), ConfigError);
}

TEST_CASE("numeric criterion integral against Lemma-type closed forms") {
  const double theta = 0.3, r = 0.6;
  const double exact = cert::cap_criterion_closed_form(theta, r, 3);
  double errs[2];
  int idx = 0;
  for (double h : {0.05, 0.025}) {
    auto mesh = geom::build_domain(geom::CapSpec{theta, r}, h);
    errs[idx++] = std::abs(cert::criterion_integral_numeric(mesh, kE1) - exact);
  }
  CHECK(errs[0] < 0.02 * std::abs(exact));
  CHECK(errs[0] / errs[1] >= 2.8);  // observed order >= 1.5

  // tube: du_e/dnu = e.nu = -sin(r)(e.y), so the boundary integral over the
  // two circles of radius cos r is -2 pi sin r cos^2 r
  const double rr = 0.5;
  auto tube = geom::build_domain(geom::TubeSpec{1, rr}, 0.04);
  const double tube_exact =
      -2.0 * kPi * std::sin(rr) * std::pow(std::cos(rr), 2);
  CHECK(cert::criterion_integral_numeric(tube, kE1) ==
        doctest::Approx(tube_exact).epsilon(0.01));

  // pointwise tube identity u_e du_e/dnu = -tan(r) u_e^2 on the boundary
  for (const auto& bs : tube.boundary) {
    const double ue = tube.nodes[bs.node].dot(kE1);
    CHECK(std::abs(tube.nodes[bs.node].dot(kE1) * bs.conormal.dot(kE1) +
                   std::tan(rr) * ue * ue) < 1e-8);
  }

  // reflection symmetry: flipping e across the symmetry axis changes nothing
  auto cap = geom::build_domain(geom::CapSpec{0.0, 0.5}, 0.06);
  const double plus = cert::criterion_integral_numeric(cap, kE1);
  const double minus = cert::criterion_integral_numeric(cap, Vec3(-1, 0, 0));
  CHECK(plus == doctest::Approx(minus).epsilon(1e-12));
}

TEST_CASE("tunnel criterion: parts, limits, symmetry") {
  const double theta = 50.0 * kPi / 180.0, r = 0.85;
  for (double eps : {0.05, 0.02}) {
    auto mesh = geom::build_domain(geom::TunnelSpec{theta, r, eps}, 0.03);
    auto parts = cert::tunnel_criterion(theta, r, eps, 3, mesh);
    CHECK(parts.cap_part ==
          doctest::Approx(2.0 * cert::cap_criterion_closed_form(theta, r, 3))
              .epsilon(1e-14));
    // wall part: -eps (1-eps^2)^{3/2} * 2 * (s_b - sin s_b cos s_b)
    const double sb = theta - std::acos(r / std::sqrt(1 - eps * eps));
    const double wall_exact = -eps * std::pow(1 - eps * eps, 1.5) * 2.0 *
                              (sb - std::sin(sb) * std::cos(sb));
    CHECK(parts.wall_part == doctest::Approx(wall_exact).epsilon(0.02));
    CHECK(parts.total < parts.cap_part);  // wall only strengthens the sign
    CHECK(parts.total < 0.0);
    // the generic boundary quadrature differs by the O(eps) opening arcs
    const double numeric = cert::criterion_integral_numeric(mesh, kE1);
    CHECK(numeric < 0.0);
    CHECK(std::abs(numeric - parts.total) < 2.0 * eps);
    // the mean constraint holds exactly by mirror symmetry
    std::vector<double> ue(mesh.nodes.size());
    for (size_t i = 0; i < ue.size(); ++i) ue[i] = mesh.nodes[i].x();
    CHECK(std::abs(geom::integrate_on_domain(mesh, ue)) <
          1e-12 * geom::surface_measure(mesh));
  }
}

TEST_CASE("condition (1.7) verdicts on the appendix domains") {
  // tube below the area threshold: both clauses hold
  {
    auto spec = geom::TubeSpec{1, kPi / 6 - 0.05};
    auto mesh = geom::build_domain(spec, 0.06);
    geom::DomainSpec hint = spec;
    auto rep = cert::check_condition_1_7(mesh, kE1, &hint);
    CHECK(rep.lambda1_lt == cert::Verdict::kTrue);
    CHECK(rep.area_lt == cert::Verdict::kTrue);
    CHECK(rep.condition_1_7 == cert::Verdict::kTrue);
    CHECK(rep.prop52_applicable);
    CHECK(rep.criterion_integral < 0.0);
    CHECK(rep.second_variation_torsion < 0.0);
    CHECK(rep.second_variation_perimeter < 0.0);
    CHECK(std::abs(rep.oracle_deltas.at("area_vs_closed_form")) <
          0.01 * rep.area);
  }
  // large cap: lambda_1 sits above N - 1
  {
    auto mesh = geom::build_domain(geom::CapSpec{0.0, 0.2}, 0.07);
    auto rep = cert::check_condition_1_7(mesh, kE1);
    CHECK(rep.lambda1_lt == cert::Verdict::kFalse);
    CHECK(rep.condition_1_7 == cert::Verdict::kFalse);
    CHECK(rep.second_variation_perimeter > 0.0);
  }
  // wide arc: eigenvalue clause holds, area clause fails (N = 2)
  {
    auto spec = geom::ArcSpec{1.5 * kPi};
    auto mesh = geom::build_domain(spec, 1.5 * kPi / 512);
    geom::DomainSpec hint = spec;
    auto rep = cert::check_condition_1_7(mesh, kE1, &hint);
    CHECK(rep.lambda1 == doctest::Approx(4.0 / 9.0).epsilon(1e-3));
    CHECK(rep.lambda1_lt == cert::Verdict::kTrue);
    CHECK(rep.area_lt == cert::Verdict::kFalse);
    CHECK(rep.condition_1_7 == cert::Verdict::kFalse);
    CHECK(std::abs(rep.oracle_deltas.at("lambda1_vs_closed_form")) < 1e-3);
  }
}

TEST_CASE("sign coherence of the boundary criterion (Prop 5.2 discrete)") {
  for (double rr : {0.3, 0.45}) {
    auto mesh = geom::build_domain(geom::TubeSpec{1, rr}, 0.06);
    auto rep = cert::check_condition_1_7(mesh, kE1);
    REQUIRE(rep.prop52_applicable);
    if (rep.criterion_integral < -1e-6)
      CHECK(rep.lambda1 < rep.threshold + 10 * rep.eig_residual);
  }
}

TEST_CASE("second-variation values at the first eigenfunction") {
  const double beta = 1.5 * kPi;
  auto mesh = geom::build_domain(geom::ArcSpec{beta}, beta / 512);
  auto spectrum = spectral::solve_neumann_spectrum(mesh, 1);

  CHECK(cert::torsion_second_variation_value(spectrum, {0.0, 1.0}, 2) ==
        doctest::Approx(-1.0 / 12.0).epsilon(1e-3));
  CHECK(cert::perimeter_second_variation_value(mesh, spectrum.modes[1]) ==
        doctest::Approx(spectrum.lambda1() - 1.0).epsilon(1e-8));
  CHECK(cert::perimeter_second_variation_value(mesh, spectrum.modes[1]) ==
        doctest::Approx(-5.0 / 9.0).epsilon(2e-3));

  // both second variations share the sign of lambda_1 - (N-1)
  auto hemi = geom::build_domain(geom::CapSpec{0.0, 0.0}, 0.1);
  auto hspec = spectral::solve_neumann_spectrum(hemi, 1);
  const double tors = cert::torsion_second_variation_value(hspec, {0.0, 1.0}, 3);
  const double peri = cert::perimeter_second_variation_value(hemi, hspec.modes[1]);
  CHECK(std::abs(tors) < 2e-3);   // lambda_1 = N - 1: both nearly vanish
  CHECK(std::abs(peri) < 4e-2);
  CHECK(tors * peri >= 0.0);

  CHECK_THROWS_AS(
      cert::perimeter_second_variation_value(mesh, std::vector<double>(
                                                       mesh.nodes.size(), 1.0)),
      ConfigError);
}

TEST_CASE("assembled quadratic form equals the direct quadrature route") {
  auto mesh = geom::build_domain(geom::CapSpec{0.0, 0.45}, 0.09);
  auto forms = spectral::assemble_lb_neumann(mesh);
  std::mt19937_64 rng(17);
  std::normal_distribution<double> gauss;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> v(mesh.nodes.size());
    for (double& x : v) x = gauss(rng);
    const double mean =
        geom::integrate_on_domain(mesh, v) / geom::surface_measure(mesh);
    for (double& x : v) x -= mean;
    const double assembled = cert::perimeter_second_variation_value(mesh, v);
    // independent route: per-cell P1 gradients and consistent cell mass
    double dirichlet = 0.0, mass = 0.0;
    for (size_t c = 0; c < mesh.cells.size(); ++c) {
      const auto& cell = mesh.cells[c];
      const auto& geo = mesh.cell_geom[c];
      geom::Vec3 grad = geom::Vec3::Zero();
      for (int a = 0; a < 3; ++a) grad += v[cell[a]] * geo.grad[a];
      dirichlet += geo.measure * grad.squaredNorm();
      for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b)
          mass += geo.measure * (a == b ? 2.0 : 1.0) / 12.0 * v[cell[a]] *
                  v[cell[b]];
    }
    const double direct = dirichlet - (mesh.dim - 1.0) * mass;
    CHECK(assembled == doctest::Approx(direct).epsilon(1e-10));
  }
}
