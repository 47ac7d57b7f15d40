#include "cli/cli.hpp"

#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>

#include "cert/certificates.hpp"
#include "core/errors.hpp"
#include "core/parallel.hpp"
#include "flow/flow.hpp"
#include "geom/spherical_mesh.hpp"
#include "graph/radial_graph.hpp"
#include "spectral/neumann.hpp"
#include "torsion/sector.hpp"
#include "torsion/solver.hpp"

namespace conekit::cli {

namespace {

constexpr const char* kVersion = "0.1.0";

std::string num(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string quoted(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

// Minimal ordered JSON composer; doubles carry 17 significant digits.
struct Json {
  std::ostringstream body;
  bool first = true;

  void sep() {
    if (!first) body << ",";
    first = false;
  }
  Json& field(const std::string& key, double value) {
    sep();
    body << quoted(key) << ":" << num(value);
    return *this;
  }
  Json& field(const std::string& key, int value) {
    sep();
    body << quoted(key) << ":" << value;
    return *this;
  }
  Json& field(const std::string& key, bool value) {
    sep();
    body << quoted(key) << ":" << (value ? "true" : "false");
    return *this;
  }
  Json& field(const std::string& key, const std::string& value) {
    sep();
    body << quoted(key) << ":" << quoted(value);
    return *this;
  }
  Json& raw(const std::string& key, const std::string& payload) {
    sep();
    body << quoted(key) << ":" << payload;
    return *this;
  }
  Json& numbers(const std::string& key, const std::vector<double>& values) {
    sep();
    body << quoted(key) << ":[";
    for (size_t i = 0; i < values.size(); ++i)
      body << (i ? "," : "") << num(values[i]);
    body << "]";
    return *this;
  }
  std::string str() const { return "{" + body.str() + "}"; }
};

void write_file(const std::string& path, const std::string& payload) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write output file: " + path);
  out << payload;
  if (!payload.empty() && payload.back() != '\n') out << "\n";
}

std::vector<double> load_phi(const std::string& path, size_t expected) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open phi file: " + path);
  std::string tag;
  size_t count = 0;
  if (!(in >> tag >> count) || tag != "phi" || count != expected)
    throw ConfigError("phi file does not match the mesh: " + path);
  std::vector<double> phi(count);
  for (double& x : phi)
    if (!(in >> x)) throw ConfigError("short phi file: " + path);
  return phi;
}

void save_phi(const std::string& path, const std::vector<double>& phi) {
  std::ostringstream out;
  out << "phi " << phi.size() << "\n";
  for (double x : phi) out << num(x) << "\n";
  write_file(path, out.str());
}

geom::Vec3 parse_direction(const std::string& text) {
  std::stringstream ss(text);
  std::string item;
  std::vector<double> xs;
  while (std::getline(ss, item, ',')) xs.push_back(std::stod(item));
  if (xs.size() != 2 && xs.size() != 3)
    throw ConfigError("direction needs 2 or 3 comma-separated components");
  geom::Vec3 e(xs[0], xs[1], xs.size() == 3 ? xs[2] : 0.0);
  if (!(e.norm() > 0)) throw ConfigError("zero direction");
  return e.normalized();
}

flow::FlowInit parse_init(const std::string& text) {
  flow::FlowInit init;
  if (text == "const" || text == "constant") {
    init.kind = flow::FlowInit::kConstant;
  } else if (text.rfind("file:", 0) == 0) {
    init.kind = flow::FlowInit::kFile;
    init.path = text.substr(5);
  } else if (text.rfind("w", 0) == 0) {
    auto colon = text.find(':');
    if (colon == std::string::npos)
      throw ConfigError("eigenmode init must look like w1:0.05");
    init.kind = flow::FlowInit::kEigenmode;
    init.mode_index = std::stoi(text.substr(1, colon - 1));
    init.amplitude = std::stod(text.substr(colon + 1));
    if (init.mode_index < 1) throw ConfigError("mode index must be >= 1");
  } else {
    throw ConfigError("unknown flow init: " + text);
  }
  return init;
}

std::string verdict_json(const cert::CertificateReport& rep) {
  Json v;
  v.field("lambda1_lt", cert::to_string(rep.lambda1_lt));
  v.field("area_lt", cert::to_string(rep.area_lt));
  v.field("condition_1_7", cert::to_string(rep.condition_1_7));
  v.field("prop52_applicable", rep.prop52_applicable);
  return v.str();
}

std::string certificate_json(const cert::CertificateReport& rep) {
  Json j;
  j.field("dim", rep.dim);
  j.field("lambda1", rep.lambda1);
  j.field("threshold", rep.threshold);
  j.field("eig_residual", rep.eig_residual);
  j.field("area", rep.area);
  j.field("hemisphere_area", rep.hemisphere_area);
  j.field("criterion_integral", rep.criterion_integral);
  j.field("mean_constraint", rep.mean_constraint);
  j.raw("verdicts", verdict_json(rep));
  {
    Json sv;
    sv.field("torsion", rep.second_variation_torsion);
    sv.field("perimeter", rep.second_variation_perimeter);
    j.raw("second_variation", sv.str());
  }
  {
    Json od;
    for (const auto& [key, value] : rep.oracle_deltas) od.field(key, value);
    j.raw("oracle_deltas", od.str());
  }
  {
    Json m;
    m.field("lambda1", "numeric:p1-eigensolve");
    m.field("area", "numeric:mesh-quadrature");
    m.field("hemisphere_area", "closed-form:ball-volume-recursion");
    m.field("criterion_integral", "numeric:boundary-quadrature");
    m.field("mean_constraint", "numeric:mesh-quadrature");
    m.field("second_variation", "closed-form:spectral");
    m.field("oracle_deltas", "numeric-minus-closed-form");
    j.raw("methods", m.str());
  }
  return j.str();
}

struct GlobalOpts {
  int threads = 0;
  long long seed = 0;
  bool quiet = false;
};

void emit_manifest(const GlobalOpts& g, const std::string& command,
                   const std::string& config_echo, double elapsed_ms) {
  if (g.quiet) return;
  Json j;
  j.field("tool", std::string("conekit"));
  j.field("version", std::string(kVersion));
  j.field("command", command);
  j.field("config", config_echo);
  j.field("threads", par::max_threads());
  j.field("seed", static_cast<int>(g.seed));
  j.field("elapsed_ms", elapsed_ms);
  std::cout << j.str() << "\n";
}

// ---- subcommand payloads ----------------------------------------------

std::string spectrum_json(const geom::SphericalMesh& mesh, int k) {
  auto spec = spectral::solve_neumann_spectrum(mesh, k);
  Json j;
  j.field("dim", spec.dim);
  j.field("count", static_cast<int>(spec.lambdas.size()));
  j.numbers("lambdas", spec.lambdas);
  j.numbers("alphas", spec.alphas);
  j.numbers("residuals", spec.residuals);
  Json m;
  m.field("lambdas", "numeric:p1-eigensolve");
  m.field("alphas", "closed-form:quadratic-root");
  j.raw("methods", m.str());
  return j.str();
}

std::string functionals_json(const graph::RadialGraph& g) {
  Json j;
  j.field("volume", graph::volume(g));
  j.field("perimeter", graph::perimeter(g));
  auto geo = graph::graph_geometry(g);
  double hmin = 1e300, hmax = -1e300, hmean = 0.0, wsum = 0.0;
  const auto& w = g.mesh->node_weights;
  for (size_t i = 0; i < geo.at_node.size(); ++i) {
    const double h = geo.at_node[i].mean_curvature;
    hmin = std::min(hmin, h);
    hmax = std::max(hmax, h);
    hmean += w[i] * h;
    wsum += w[i];
  }
  {
    Json h;
    h.field("min", hmin);
    h.field("max", hmax);
    h.field("mean", hmean / wsum);
    j.raw("mean_curvature", h.str());
  }
  auto pg = flow::riesz_projected_gradient(g, flow::Functional::kPerimeter, 0);
  j.field("perimeter_multiplier_estimate", pg.lambda_hat);
  j.field("cmc_residual_norm", graph::cmc_residual(g, pg.lambda_hat).norm);
  j.field("orthogonality_residual_sup", graph::orthogonality_residual(g).sup);
  Json m;
  m.field("volume", "numeric:nodal-quadrature");
  m.field("perimeter", "numeric:cell-quadrature");
  m.field("mean_curvature", "numeric:patch-fit-trace-form");
  m.field("residuals", "numeric:weak-form");
  j.raw("methods", m.str());
  return j.str();
}

int cmd_mesh(const GlobalOpts&, const std::string& spec_str, double h,
             const std::string& out) {
  auto mesh = geom::build_domain(geom::parse_domain_spec(spec_str), h);
  geom::save_mesh_file(mesh, out);
  return 0;
}

int cmd_spectrum(const GlobalOpts&, const std::string& spec_str, double h,
                 int k, const std::string& out) {
  auto mesh = geom::build_domain(geom::parse_domain_spec(spec_str), h);
  const std::string payload = spectrum_json(mesh, k);
  if (out.empty())
    std::cout << payload << "\n";
  else
    write_file(out, payload);
  return 0;
}

int cmd_certify(const GlobalOpts&, const std::string& spec_str, double h,
                const std::string& e_str, const std::string& out) {
  auto spec = geom::parse_domain_spec(spec_str);
  auto mesh = geom::build_domain(spec, h);
  geom::Vec3 e(1.0, 0.0, 0.0);
  if (!e_str.empty()) e = parse_direction(e_str);
  auto rep = cert::check_condition_1_7(mesh, e, &spec);
  const std::string payload = certificate_json(rep);
  if (out.empty())
    std::cout << payload << "\n";
  else
    write_file(out, payload);
  return 0;
}

int cmd_torsion(const GlobalOpts&, const std::string& mesh_path,
                const std::string& phi_path, int ns, const std::string& out,
                const std::string& report) {
  auto mesh = geom::load_mesh_file(mesh_path);
  std::vector<double> phi(mesh.nodes.size(), 0.0);
  if (!phi_path.empty()) phi = load_phi(phi_path, mesh.nodes.size());
  auto g = graph::make_graph(mesh, std::move(phi));
  auto field = torsion::solve_torsion(g, ns);
  if (!out.empty()) {
    std::ostringstream csv;
    csv << "s,node,u\n";
    const int nq = static_cast<int>(field.section.t.size());
    for (int i = 0; i <= field.n_s; ++i)
      for (int k = 0; k < nq; ++k)
        csv << num(static_cast<double>(i) / field.n_s) << ","
            << field.section.mesh_nodes[k].front() << ","
            << num(field.value(i, k)) << "\n";
    write_file(out, csv.str());
  }
  double fmin = 1e300, fmax = -1e300;
  for (double f : field.flux_section) {
    fmin = std::min(fmin, f);
    fmax = std::max(fmax, f);
  }
  Json j;
  j.field("energy", field.energy_load);
  j.field("energy_grad_form", field.energy_grad);
  j.field("gap", field.energy_gap());
  j.field("solver_residual", field.solver_residual);
  {
    Json fx;
    fx.field("min", fmin);
    fx.field("max", fmax);
    j.raw("flux", fx.str());
  }
  Json m;
  m.field("energy", "numeric:mapped-fem");
  m.field("flux", "numeric:variational-extraction");
  j.raw("methods", m.str());
  if (report.empty())
    std::cout << j.str() << "\n";
  else
    write_file(report, j.str());
  return 0;
}

int cmd_functionals(const GlobalOpts&, const std::string& mesh_path,
                    const std::string& phi_path, const std::string& out) {
  auto mesh = geom::load_mesh_file(mesh_path);
  std::vector<double> phi(mesh.nodes.size(), 0.0);
  if (!phi_path.empty()) phi = load_phi(phi_path, mesh.nodes.size());
  auto g = graph::make_graph(mesh, std::move(phi));
  const std::string payload = functionals_json(g);
  if (out.empty())
    std::cout << payload << "\n";
  else
    write_file(out, payload);
  return 0;
}

int cmd_flow(const GlobalOpts&, const std::string& functional,
             const std::string& spec_str, double h, double volume,
             const std::string& init_str, int max_iters, double tol_grad,
             double tol_residual, int ns, bool h1, const std::string& out,
             const std::string& phi_out) {
  auto mesh = geom::build_domain(geom::parse_domain_spec(spec_str), h);
  flow::FlowConfig cfg;
  if (functional == "perimeter")
    cfg.functional = flow::Functional::kPerimeter;
  else if (functional == "torsion")
    cfg.functional = flow::Functional::kTorsion;
  else
    throw ConfigError("functional must be perimeter or torsion");
  cfg.c_target = volume;
  cfg.init = parse_init(init_str);
  cfg.max_iters = max_iters;
  cfg.tol_grad = tol_grad;
  cfg.tol_residual = tol_residual;
  cfg.torsion_ns = ns;
  cfg.h1_precondition = h1;
  auto result = flow::run_flow(cfg, mesh);

  if (!out.empty()) {
    std::ostringstream csv;
    csv << "iter,value,volume,grad_norm,step,cmc_or_flux_residual\n";
    for (const auto& r : result.trace.records)
      csv << r.iter << "," << num(r.value) << "," << num(r.volume) << ","
          << num(r.grad_norm) << "," << num(r.step) << "," << num(r.residual)
          << "\n";
    write_file(out, csv.str());
  }
  if (!phi_out.empty()) save_phi(phi_out, result.final_graph.phi);

  auto cmp = flow::baseline_compare(mesh, cfg.c_target, cfg.functional,
                                    result.trace.records.back().value,
                                    cfg.torsion_ns);
  Json j;
  j.field("functional", functional);
  j.field("iterations", static_cast<int>(result.trace.records.size() - 1));
  j.field("final_value", result.trace.records.back().value);
  j.field("converged", result.trace.converged);
  j.field("stalled", result.trace.stalled);
  j.field("lambda_hat", result.trace.lambda_hat);
  j.field("nonradial", result.trace.nonradial);
  j.field("phi_mean", result.trace.phi_mean);
  j.field("phi_std", result.trace.phi_std);
  if (cfg.functional == flow::Functional::kPerimeter) {
    j.field("cmc_residual_norm", result.trace.cmc_residual_norm);
    j.field("orthogonality_residual_sup", result.trace.ortho_residual_sup);
  } else {
    j.field("flux_mean", result.trace.flux_mean);
    j.field("flux_cov", result.trace.flux_cov);
    j.field("lambda_from_flux", result.trace.lambda_from_flux);
  }
  {
    Json b;
    b.field("baseline", cmp.baseline);
    b.field("achieved", cmp.achieved);
    b.field("margin", cmp.margin);
    b.field("halfspace_reference", cmp.halfspace_reference);
    j.raw("baseline_compare", b.str());
  }
  std::cout << j.str() << "\n";
  return 0;
}

int cmd_sweep(const GlobalOpts&, const std::string& family,
              const std::string& vary, double from, double to, int count,
              double theta, double r, double eps, double h,
              const std::string& out) {
  if (count < 1) throw ConfigError("sweep grid must be non-empty");
  struct Row {
    double value = 0.0;
    std::string payload;
    std::string error;
  };
  std::vector<Row> rows(count);
  for (int i = 0; i < count; ++i)
    rows[i].value = count == 1 ? from : from + (to - from) * i / (count - 1);

  par::for_each_index(static_cast<size_t>(count), [&](size_t i) {
    Row& row = rows[i];
    try {
      geom::DomainSpec spec;
      if (family == "cap")
        spec = geom::CapSpec{vary == "theta" ? row.value : theta,
                             vary == "r" ? row.value : r};
      else if (family == "tube")
        spec = geom::TubeSpec{1, vary == "r" ? row.value : r};
      else if (family == "tunnel")
        spec = geom::TunnelSpec{vary == "theta" ? row.value : theta,
                                vary == "r" ? row.value : r,
                                vary == "eps" ? row.value : eps};
      else
        throw ConfigError("sweep family must be cap, tube or tunnel");
      geom::validate_spec(spec);
      auto mesh = geom::build_domain(spec, h);
      auto rep = cert::check_condition_1_7(mesh, geom::Vec3(1, 0, 0), &spec);
      std::ostringstream line;
      line << num(rep.lambda1) << "," << num(rep.area) << ","
           << num(rep.criterion_integral) << "," << num(rep.mean_constraint)
           << "," << cert::to_string(rep.lambda1_lt) << ","
           << cert::to_string(rep.area_lt) << ","
           << cert::to_string(rep.condition_1_7) << ","
           << (rep.prop52_applicable ? "true" : "false") << ","
           << num(rep.second_variation_torsion) << ","
           << num(rep.second_variation_perimeter);
      row.payload = line.str();
    } catch (const std::exception& ex) {
      row.error = ex.what();
    }
  });

  std::ostringstream csv;
  csv << "param,value,lambda1,area,criterion_integral,mean_constraint,"
         "lambda1_lt,area_lt,condition_1_7,prop52_applicable,"
         "second_variation_torsion,second_variation_perimeter,error\n";
  for (const auto& row : rows) {
    if (row.error.empty())
      csv << vary << "," << num(row.value) << "," << row.payload << ",\n";
    else
      csv << vary << "," << num(row.value) << ",,,,,,,,,,,"
          << "\"" << row.error << "\"\n";
  }
  if (out.empty())
    std::cout << csv.str();
  else
    write_file(out, csv.str());
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"numerical certificates and flows for domains in cones"};
  app.require_subcommand(1);
  // the mesh-size option is spelled --h, so help lives on --help only
  app.set_help_flag("--help", "print help");
  GlobalOpts g;
  app.add_option("--threads", g.threads, "worker threads (0 = library default)");
  app.add_option("--seed", g.seed, "seed echoed into the manifest");
  app.add_flag("--quiet", g.quiet, "suppress the manifest line");

  std::string spec_str, e_str, out, report, mesh_path, phi_path, phi_out;
  std::string functional = "perimeter", init_str = "const";
  std::string family = "cap", vary = "r";
  double h = 0.05, volume = 1.0, from = 0.1, to = 0.5;
  double theta = 0.0, radius = 0.5, eps = 0.05;
  double tol_grad = 1e-6, tol_residual = 1e-5;
  int k = 4, ns = 64, max_iters = 2000, count = 10;

  auto add_subcommand = [&](const std::string& name, const std::string& desc) {
    auto* cmd = app.add_subcommand(name, desc);
    cmd->set_help_flag("--help", "print help");
    return cmd;
  };

  auto* mesh_cmd = add_subcommand("mesh", "build a domain mesh");
  mesh_cmd->add_option("--spec", spec_str)->required();
  mesh_cmd->add_option("--h", h)->required();
  mesh_cmd->add_option("--out", out)->required();

  auto* spec_cmd = add_subcommand("spectrum", "Neumann eigenpairs on D");
  spec_cmd->add_option("--spec", spec_str)->required();
  spec_cmd->add_option("--h", h)->required();
  spec_cmd->add_option("-k,--count", k);
  spec_cmd->add_option("--out", out);

  auto* cert_cmd = add_subcommand("certify", "instability certificate");
  cert_cmd->add_option("--spec", spec_str)->required();
  cert_cmd->add_option("--h", h)->required();
  cert_cmd->add_option("--e", e_str, "direction, comma separated");
  cert_cmd->add_option("--out", out);

  auto* tors_cmd = add_subcommand("torsion", "mixed torsion solve");
  tors_cmd->add_option("--mesh", mesh_path)->required();
  tors_cmd->add_option("--phi", phi_path);
  tors_cmd->add_option("--ns", ns);
  tors_cmd->add_option("--out", out);
  tors_cmd->add_option("--report", report);

  auto* func_cmd = add_subcommand("functionals", "graph functionals");
  func_cmd->add_option("--mesh", mesh_path)->required();
  func_cmd->add_option("--phi", phi_path);
  func_cmd->add_option("--out", out);

  auto* flow_cmd = add_subcommand("flow", "projected gradient descent");
  flow_cmd->add_option("--functional", functional);
  flow_cmd->add_option("--spec", spec_str)->required();
  flow_cmd->add_option("--h", h)->required();
  flow_cmd->add_option("--volume", volume)->required();
  flow_cmd->add_option("--init", init_str);
  flow_cmd->add_option("--max-iters", max_iters);
  flow_cmd->add_option("--tol-grad", tol_grad);
  flow_cmd->add_option("--tol-residual", tol_residual);
  flow_cmd->add_option("--ns", ns);
  bool h1 = false;
  flow_cmd->add_flag("--h1", h1, "H1 preconditioner");
  flow_cmd->add_option("--out", out);
  flow_cmd->add_option("--phi-out", phi_out);

  auto* sweep_cmd = add_subcommand("sweep", "certificate parameter sweep");
  sweep_cmd->add_option("--family", family);
  sweep_cmd->add_option("--vary", vary);
  sweep_cmd->add_option("--from", from)->required();
  sweep_cmd->add_option("--to", to)->required();
  sweep_cmd->add_option("--count", count);
  sweep_cmd->add_option("--theta", theta);
  sweep_cmd->add_option("--r", radius);
  sweep_cmd->add_option("--eps", eps);
  sweep_cmd->add_option("--h", h);
  sweep_cmd->add_option("--out", out);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {  // --help
      std::cout << app.help();
      return 0;
    }
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }

  par::set_threads(g.threads);
  std::string echo;
  for (const auto& a : args) echo += (echo.empty() ? "" : " ") + a;

  const auto t0 = std::chrono::steady_clock::now();
  int rc = 0;
  std::string stage = "setup";
  try {
    if (mesh_cmd->parsed()) {
      stage = "meshing";
      rc = cmd_mesh(g, spec_str, h, out);
    } else if (spec_cmd->parsed()) {
      stage = "eigensolve";
      rc = cmd_spectrum(g, spec_str, h, k, out);
    } else if (cert_cmd->parsed()) {
      stage = "certification";
      rc = cmd_certify(g, spec_str, h, e_str, out);
    } else if (tors_cmd->parsed()) {
      stage = "torsion solve";
      rc = cmd_torsion(g, mesh_path, phi_path, ns, out, report);
    } else if (func_cmd->parsed()) {
      stage = "functional evaluation";
      rc = cmd_functionals(g, mesh_path, phi_path, out);
    } else if (flow_cmd->parsed()) {
      stage = "flow";
      rc = cmd_flow(g, functional, spec_str, h, volume, init_str, max_iters,
                    tol_grad, tol_residual, ns, h1, out, phi_out);
    } else if (sweep_cmd->parsed()) {
      stage = "sweep";
      rc = cmd_sweep(g, family, vary, from, to, count, theta, radius, eps, h,
                     out);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure in " << stage << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }
  const double elapsed =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                t0)
          .count();
  emit_manifest(g, app.get_subcommands().front()->get_name(), echo, elapsed);
  return rc;
}

}  // namespace conekit::cli
