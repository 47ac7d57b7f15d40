// Timing harness comparing the OpenMP kernels against their serial
// reference implementations on refined meshes.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include "core/parallel.hpp"
#include "geom/spherical_mesh.hpp"
#include "graph/radial_graph.hpp"
#include "spectral/neumann.hpp"

using namespace conekit;

namespace {

double now_ms() {
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

template <class F>
double time_best(int reps, F&& fn) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const double t0 = now_ms();
    fn();
    best = std::min(best, now_ms() - t0);
  }
  return best;
}

void report(const char* name, double serial_ms, double parallel_ms,
            double max_diff) {
  std::printf("%-26s serial %9.3f ms   parallel %9.3f ms   speedup %5.2fx   max|diff| %.2e\n",
              name, serial_ms, parallel_ms, serial_ms / parallel_ms, max_diff);
}

}  // namespace

int main(int argc, char** argv) {
  const double h = argc > 1 ? std::atof(argv[1]) : 0.02;
  const int reps = argc > 2 ? std::atoi(argv[2]) : 5;
  std::printf("threads=%d  h=%g\n", par::max_threads(), h);

  auto mesh = geom::build_domain(geom::CapSpec{0.0, 0.2}, h);
  std::printf("cap mesh: %d nodes, %d cells\n", mesh.node_count(),
              mesh.cell_count());
  // large weighted reduction
  {
    std::vector<double> xs(4000000);
    for (size_t i = 0; i < xs.size(); ++i) xs[i] = std::sin(0.001 * i);
    auto term = [&](size_t i) { return xs[i] / (1.0 + 1e-7 * i); };
    double a = 0.0, b = 0.0;
    const double ts =
        time_best(reps, [&] { a = par::sum_serial(xs.size(), term); });
    const double tp =
        time_best(reps, [&] { b = par::sum_blocked(xs.size(), term); });
    report("weighted reduction (4e6)", ts, tp, std::abs(a - b));
  }

  // Laplace-Beltrami assembly
  {
    spectral::AssembledForms fa, fb;
    const double ts =
        time_best(reps, [&] { fa = spectral::assemble_lb_neumann_serial(mesh); });
    const double tp =
        time_best(reps, [&] { fb = spectral::assemble_lb_neumann(mesh); });
    const double diff =
        (Eigen::MatrixXd(fa.stiffness) - Eigen::MatrixXd(fb.stiffness))
            .lpNorm<Eigen::Infinity>();
    report("stiffness+mass assembly", ts, tp, diff);
  }

  // perimeter shape gradient
  {
    std::vector<double> phi(mesh.nodes.size());
    for (size_t i = 0; i < phi.size(); ++i)
      phi[i] = 0.2 * std::sin(2.0 * mesh.nodes[i].x()) +
               0.1 * mesh.nodes[i].y() * mesh.nodes[i].z();
    auto g = graph::make_graph(mesh, phi);
    std::vector<double> ga, gb;
    const double ts =
        time_best(reps, [&] { ga = graph::perimeter_gradient_serial(g); });
    const double tp = time_best(reps, [&] { gb = graph::perimeter_gradient(g); });
    double diff = 0.0;
    for (size_t i = 0; i < ga.size(); ++i)
      diff = std::max(diff, std::abs(ga[i] - gb[i]));
    report("perimeter gradient", ts, tp, diff);
  }
  return 0;
}
