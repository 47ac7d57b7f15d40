#include "flow/flow.hpp"

#include <Eigen/SparseCholesky>
#include <cmath>
#include <fstream>
#include <numbers>
#include <optional>

#include "core/errors.hpp"
#include "spectral/neumann.hpp"
#include "torsion/sector.hpp"
#include "torsion/solver.hpp"

namespace conekit::flow {

namespace {

void check_positive(double x, const char* what) {
  if (!(x > 0.0)) throw ConfigError(std::string(what) + " must be positive");
}

struct State {
  graph::RadialGraph g;
  double value = 0.0;
  std::optional<torsion::TorsionField> field;  // torsion only
};

State evaluate(const geom::SphericalMesh& mesh, std::vector<double> phi,
               Functional functional, int torsion_ns) {
  State st{graph::make_graph(mesh, std::move(phi)), 0.0, std::nullopt};
  if (functional == Functional::kPerimeter) {
    st.value = graph::perimeter(st.g);
  } else {
    st.field = torsion::solve_torsion(st.g, torsion_ns);
    st.value = st.field->energy_load;
  }
  return st;
}

ProjectedGradient project_direction(const graph::RadialGraph& g,
                                    const std::vector<double>& grad_form,
                                    bool h1_precondition) {
  const auto weights = graph::volume_gradient(g);
  ProjectedGradient out;
  double gsum = 0.0, wsum = 0.0;
  for (size_t i = 0; i < weights.size(); ++i) {
    gsum += grad_form[i];
    wsum += weights[i];
  }
  out.lambda_hat = gsum / wsum;
  std::vector<double> residual(weights.size());
  double plain2 = 0.0;
  for (size_t i = 0; i < weights.size(); ++i) {
    residual[i] = grad_form[i] - out.lambda_hat * weights[i];
    plain2 += residual[i] * residual[i] / weights[i];
  }
  // Preconditioner-independent stationarity measure: the plain Riesz norm.
  out.norm = std::sqrt(plain2);
  out.direction.resize(weights.size());
  if (!h1_precondition) {
    for (size_t i = 0; i < weights.size(); ++i)
      out.direction[i] = residual[i] / weights[i];
  } else {
    // (M_w + K) solve, then exact re-projection by weighted mean removal
    auto forms = spectral::assemble_lb_neumann(g.domain());
    Eigen::SparseMatrix<double> A(forms.stiffness);
    for (int i = 0; i < A.rows(); ++i) A.coeffRef(i, i) += weights[i];
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(A);
    if (ldlt.info() != Eigen::Success)
      throw NumericalError("preconditioner factorization failed");
    Eigen::Map<const Eigen::VectorXd> r(residual.data(),
                                        static_cast<long>(residual.size()));
    Eigen::VectorXd d = ldlt.solve(r);
    double wd = 0.0;
    for (size_t i = 0; i < weights.size(); ++i) wd += weights[i] * d[i];
    const double mean = wd / wsum;
    for (size_t i = 0; i < weights.size(); ++i)
      out.direction[i] = d[i] - mean;
  }
  double decrease = 0.0;
  for (size_t i = 0; i < weights.size(); ++i)
    decrease += residual[i] * out.direction[i];
  out.decrease = decrease;
  return out;
}

ProjectedGradient gradient_of(const State& st, Functional functional,
                              bool h1_precondition) {
  std::vector<double> form;
  if (functional == Functional::kPerimeter) {
    form = graph::perimeter_gradient(st.g);
  } else {
    const auto& flux = st.field->flux;
    const int N = st.g.mesh->dim;
    form.resize(st.g.phi.size());
    for (size_t i = 0; i < form.size(); ++i)
      form[i] = -0.5 * st.g.mesh->node_weights[i] *
                std::exp(N * st.g.phi[i]) * flux[i] * flux[i];
  }
  return project_direction(st.g, form, h1_precondition);
}

struct FluxStats {
  double mean = 0.0, cov = 0.0;
};

FluxStats flux_statistics(const torsion::TorsionField& field) {
  // lumped measure of Gamma per section node: e^{(N-1)phi} slope w_lat dt
  const auto& sec = field.section;
  const int nq = static_cast<int>(sec.t.size());
  std::vector<double> w(nq, 0.0);
  for (int k = 0; k + 1 < nq; ++k) {
    const double ht = sec.t[k + 1] - sec.t[k];
    const double dphi = (sec.phi[k + 1] - sec.phi[k]) / ht;
    for (int gp = 0; gp < 2; ++gp) {
      const double xi = gp == 0 ? -0.57735026918962576451 : 0.57735026918962576451;
      const double tau = 0.5 * (sec.t[k] + sec.t[k + 1]) + 0.5 * ht * xi;
      const double psi1 = (tau - sec.t[k]) / ht;
      const double phi_g = (1.0 - psi1) * sec.phi[k] + psi1 * sec.phi[k + 1];
      const double wlat =
          sec.dim == 2 ? 1.0 : 2.0 * std::numbers::pi * std::sin(tau);
      const double dens = wlat * std::exp((sec.dim - 1) * phi_g) *
                          std::sqrt(1.0 + dphi * dphi) * 0.5 * ht;
      w[k] += dens * (1.0 - psi1);
      w[k + 1] += dens * psi1;
    }
  }
  double wsum = 0.0, mean = 0.0;
  for (int k = 0; k < nq; ++k) {
    wsum += w[k];
    mean += w[k] * field.flux_section[k];
  }
  mean /= wsum;
  double var = 0.0;
  for (int k = 0; k < nq; ++k) {
    const double d = field.flux_section[k] - mean;
    var += w[k] * d * d;
  }
  FluxStats st;
  st.mean = mean;
  st.cov = std::sqrt(var / wsum) / std::max(std::abs(mean), 1e-300);
  return st;
}

std::vector<double> initial_phi(const FlowConfig& cfg,
                                const geom::SphericalMesh& mesh) {
  switch (cfg.init.kind) {
    case FlowInit::kConstant:
      return std::vector<double>(mesh.nodes.size(), 0.0);
    case FlowInit::kEigenmode: {
      auto spectrum =
          spectral::solve_neumann_spectrum(mesh, std::max(1, cfg.init.mode_index));
      std::vector<double> phi = spectrum.modes.at(cfg.init.mode_index);
      for (double& x : phi) x *= cfg.init.amplitude;
      return phi;
    }
    case FlowInit::kFile: {
      std::ifstream in(cfg.init.path);
      if (!in) throw ConfigError("cannot open phi file: " + cfg.init.path);
      std::string tag;
      size_t count = 0;
      if (!(in >> tag >> count) || tag != "phi" || count != mesh.nodes.size())
        throw ConfigError("phi file does not match the mesh: " + cfg.init.path);
      std::vector<double> phi(count);
      for (double& x : phi)
        if (!(in >> x)) throw ConfigError("short phi file: " + cfg.init.path);
      return phi;
    }
  }
  throw ConfigError("unknown flow initializer");
}

}  // namespace

void FlowConfig::validate() const {
  check_positive(c_target, "target volume");
  check_positive(step0, "initial step");
  check_positive(tol_grad, "gradient tolerance");
  check_positive(tol_residual, "residual tolerance");
  if (!(shrink > 0.0 && shrink < 1.0)) throw ConfigError("shrink must be in (0,1)");
  if (!(grow >= 1.0)) throw ConfigError("grow factor must be >= 1");
  if (max_iters < 1) throw ConfigError("max_iters must be >= 1");
  if (!std::isfinite(init.amplitude)) throw ConfigError("non-finite amplitude");
  if (functional == Functional::kTorsion && torsion_ns < 2)
    throw ConfigError("torsion grid needs n_s >= 2");
}

ProjectedGradient riesz_projected_gradient(const graph::RadialGraph& g,
                                           Functional functional,
                                           int torsion_ns,
                                           bool h1_precondition) {
  State st{g, 0.0, std::nullopt};
  if (functional == Functional::kTorsion)
    st.field = torsion::solve_torsion(g, torsion_ns);
  return gradient_of(st, functional, h1_precondition);
}

FlowResult run_flow(const FlowConfig& cfg, const geom::SphericalMesh& mesh) {
  cfg.validate();
  auto start_graph =
      graph::project_volume(graph::make_graph(mesh, initial_phi(cfg, mesh)),
                            cfg.c_target);
  State cur = evaluate(mesh, start_graph.phi, cfg.functional, cfg.torsion_ns);

  FlowTrace trace;
  double step = cfg.step0;
  int accepted_run = 0;
  bool stalled = false;

  for (int iter = 0; iter <= cfg.max_iters; ++iter) {
    ProjectedGradient pg = gradient_of(cur, cfg.functional, cfg.h1_precondition);
    double residual_metric;
    if (cfg.functional == Functional::kPerimeter)
      residual_metric = graph::cmc_residual(cur.g, pg.lambda_hat).norm;
    else
      residual_metric = flux_statistics(*cur.field).cov;
    trace.records.push_back({iter, cur.value, graph::volume(cur.g), pg.norm,
                             step, residual_metric});
    trace.lambda_hat = pg.lambda_hat;
    if (pg.norm <= cfg.tol_grad) break;
    if (iter == cfg.max_iters) break;

    // Armijo backtracking on the projected iterate
    bool accepted = false;
    while (step > 1e-16 * cfg.step0) {
      std::vector<double> phi_trial(cur.g.phi);
      for (size_t i = 0; i < phi_trial.size(); ++i)
        phi_trial[i] -= step * pg.direction[i];
      auto projected = graph::project_volume(
          graph::make_graph(mesh, std::move(phi_trial)), cfg.c_target);
      State trial =
          evaluate(mesh, projected.phi, cfg.functional, cfg.torsion_ns);
      if (trial.value <= cur.value - cfg.armijo * step * pg.decrease) {
        cur = std::move(trial);
        accepted = true;
        ++accepted_run;
        if (accepted_run >= cfg.grow_after) {
          step *= cfg.grow;
          accepted_run = 0;
        }
        break;
      }
      step *= cfg.shrink;
      accepted_run = 0;
    }
    if (!accepted) {
      stalled = true;
      break;
    }
  }

  // convergence is judged by the preconditioner-independent residual norm
  trace.converged = !trace.records.empty() &&
                    trace.records.back().grad_norm <= cfg.tol_grad;
  trace.stalled = stalled && !trace.converged;

  // final certification
  if (cfg.functional == Functional::kPerimeter) {
    ProjectedGradient pg = gradient_of(cur, cfg.functional, false);
    trace.lambda_hat = pg.lambda_hat;
    trace.cmc_residual_norm = graph::cmc_residual(cur.g, pg.lambda_hat).norm;
    trace.ortho_residual_sup = graph::orthogonality_residual(cur.g).sup;
  } else {
    const FluxStats fs = flux_statistics(*cur.field);
    trace.flux_mean = fs.mean;
    trace.flux_cov = fs.cov;
    trace.lambda_from_flux = -0.5 * fs.mean * fs.mean;
  }
  // scale-aware radial-symmetry test on the final graph
  const auto& w = mesh.node_weights;
  double wsum = 0.0, mean = 0.0;
  for (size_t i = 0; i < w.size(); ++i) {
    wsum += w[i];
    mean += w[i] * cur.g.phi[i];
  }
  mean /= wsum;
  double var = 0.0;
  for (size_t i = 0; i < w.size(); ++i) {
    const double d = cur.g.phi[i] - mean;
    var += w[i] * d * d;
  }
  trace.phi_mean = mean;
  trace.phi_std = std::sqrt(var / wsum);
  trace.nonradial = trace.phi_std > 1e-3 * (1.0 + std::abs(mean));

  return FlowResult{std::move(trace), std::move(cur.g)};
}

BaselineComparison baseline_compare(const geom::SphericalMesh& mesh,
                                    double c_target, Functional functional,
                                    double achieved, int torsion_ns) {
  check_positive(c_target, "target volume");
  BaselineComparison out;
  out.achieved = achieved;
  auto round_graph = graph::project_volume(
      graph::make_graph(mesh, std::vector<double>(mesh.nodes.size(), 0.0)),
      c_target);
  if (functional == Functional::kPerimeter) {
    out.baseline = graph::perimeter(round_graph);
    const int N = mesh.dim;
    const double omega = geom::unit_ball_volume(N);
    const double radius = std::pow(2.0 * c_target / omega, 1.0 / N);
    out.halfspace_reference =
        0.5 * N * omega * std::pow(radius, N - 1);
  } else {
    out.baseline = torsion::torsion_energy(round_graph, torsion_ns).value;
    out.halfspace_reference = torsion::halfspace_energy(c_target, mesh.dim);
  }
  out.margin = out.baseline - achieved;
  return out;
}

}  // namespace conekit::flow
