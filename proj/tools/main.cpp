// varicart command-line tool: derives Euler-Lagrange/evolution equations,
// boundary-adapted Cartan coefficients, minimal boundary conditions and
// port-Hamiltonian power balances from .vb model files, and audits the energy
// balance of discretized models.

#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "varicart/modelio.hpp"
#include "varicart/numverify.hpp"

namespace {

using namespace varicart;

constexpr int kExitOk = 0;
constexpr int kExitModelError = 1;
constexpr int kExitVerifyFailed = 2;
constexpr int kExitUsage = 64;

struct CommonOpts {
  std::string model_path;
  std::string face;
  std::string format = "text";
  std::string out_path;
};

void add_common(CLI::App* cmd, CommonOpts& opts, bool with_face = true) {
  cmd->add_option("model", opts.model_path, "model definition file (.vb)")->required();
  if (with_face) cmd->add_option("--face", opts.face, "boundary face name (default: all declared)");
  cmd->add_option("--format", opts.format, "output format")
      ->check(CLI::IsMember({"text", "latex", "json"}));
  cmd->add_option("--out", opts.out_path, "write the report to a file instead of stdout");
}

ReportFormat format_of(const CommonOpts& opts) {
  if (opts.format == "json") return ReportFormat::json;
  if (opts.format == "latex") return ReportFormat::latex;
  return ReportFormat::text;
}

std::optional<std::string> face_of(const CommonOpts& opts) {
  if (opts.face.empty()) return std::nullopt;
  return opts.face;
}

void emit(const CommonOpts& opts, const std::string& content) {
  if (opts.out_path.empty()) {
    std::cout << content;
    return;
  }
  std::ofstream out(opts.out_path);
  if (!out) throw model_error("cannot open output file '" + opts.out_path + "'");
  out << content;
}

struct SimulateOpts {
  std::string grid = "64";
  double dt = 0;
  double t_end = 1.0;
  std::vector<std::string> bc;
  std::vector<std::string> params;
  std::vector<std::string> init;
  std::string audit_out;
  int refine = 1;
  std::size_t stride = 16;
  double audit_tol = 0.05;
};

GridSpec parse_grid_spec(const ModelSpec& model, const SimulateOpts& sim) {
  GridSpec spec;
  std::stringstream ss(sim.grid);
  std::string piece;
  while (std::getline(ss, piece, ','))
    spec.nodes.push_back(static_cast<std::size_t>(std::stoul(piece)));
  if (spec.nodes.size() != model.bundle.r())
    throw model_error("--grid needs one node count per spatial direction");
  spec.extent.assign(spec.nodes.size(), 1.0);
  spec.policy.assign(spec.nodes.size(), {FacePolicy::clamped, FacePolicy::clamped});

  auto policy_of = [](const std::string& name) {
    if (name == "clamped") return FacePolicy::clamped;
    if (name == "free") return FacePolicy::free;
    if (name == "periodic") return FacePolicy::periodic;
    throw model_error("unknown boundary policy '" + name + "' (clamped|free|periodic)");
  };
  for (const auto& assign : sim.bc) {
    auto eq = assign.find('=');
    if (eq == std::string::npos)
      throw model_error("--bc expects FACE=policy or FACE.min=policy, got '" + assign + "'");
    std::string lhs = assign.substr(0, eq);
    FacePolicy pol = policy_of(assign.substr(eq + 1));
    std::string face = lhs;
    int side = -1;  // both
    if (auto dot = lhs.find('.'); dot != std::string::npos) {
      face = lhs.substr(0, dot);
      std::string which = lhs.substr(dot + 1);
      if (which == "min") side = 0;
      else if (which == "max") side = 1;
      else throw model_error("--bc side must be min or max");
    }
    std::size_t dir = model.bundle.direction(face);
    if (side < 0) {
      spec.policy[dir] = {pol, pol};
    } else {
      spec.policy[dir][static_cast<std::size_t>(side)] = pol;
    }
  }
  return spec;
}

std::map<Symbol, double> parse_param_values(const ModelSpec& model, const SimulateOpts& sim) {
  std::map<Symbol, double> values;
  for (const auto& p : model.bundle.parameters()) values[p] = 1.0;  // paper-style defaults
  for (const auto& assign : sim.params) {
    auto eq = assign.find('=');
    if (eq == std::string::npos)
      throw model_error("--param expects NAME=VALUE, got '" + assign + "'");
    Symbol p = model.bundle.parameter(assign.substr(0, eq));
    values[p] = std::stod(assign.substr(eq + 1));
  }
  return values;
}

/// Initial data expressions are polynomials in the spatial coordinates and the
/// declared parameters, e.g. --init "w=X^2*(1-X)^2".
void apply_initial_data(const ModelSpec& model, const SimulateOpts& sim,
                        const std::map<Symbol, double>& params, const SemiDiscretePH& ode,
                        GridState& state) {
  for (const auto& assign : sim.init) {
    auto eq = assign.find('=');
    if (eq == std::string::npos)
      throw model_error("--init expects FIELD=EXPR, got '" + assign + "'");
    std::string field = assign.substr(0, eq);
    std::size_t alpha = model.bundle.dependent_index(field);

    dsl::SymbolResolver rs;
    rs.r = model.bundle.r();
    rs.plain = [&](const std::string& n) -> std::optional<Symbol> {
      for (const auto& v : model.bundle.independent())
        if (v.name == n) return Symbol::parameter(n);  // coordinate placeholder
      for (const auto& p : model.bundle.parameters())
        if (p.name() == n) return p;
      return std::nullopt;
    };
    rs.dependent = [](const std::string&) { return std::optional<std::size_t>{}; };
    dsl::Cursor cur(dsl::tokenize(assign.substr(eq + 1)));
    ScalarExpr expr = dsl::parse_expr(cur, rs);
    if (!cur.at_end()) throw model_error("trailing input in --init expression");

    std::map<Symbol, double> env;
    for (const auto& [p, v] : params) env[p] = v;
    const auto& names = model.bundle.independent();
    const_cast<SemiDiscretePH&>(ode).set_field(state, alpha, [&](double x, double y) {
      auto point = env;
      point[Symbol::parameter(names[0].name)] = x;
      if (names.size() > 1) point[Symbol::parameter(names[1].name)] = y;
      return eval_numeric(expr, point);
    });
  }
}

int run_simulate(const CommonOpts& common, const SimulateOpts& sim) {
  ModelSpec model = parse_model_file(common.model_path);
  if (!model.ph)
    throw model_error("simulate requires a hamiltonian model with a structure block");

  GridSpec grid = parse_grid_spec(model, sim);
  auto params = parse_param_values(model, sim);

  SemiDiscretePH ode(*model.ph, grid, params);
  GridState s0 = ode.zero_state();
  apply_initial_data(model, sim, params, ode, s0);

  auto [dt_bound, c] = ode.stability_bound(s0);
  double dt = sim.dt > 0 ? sim.dt : 0.1 * dt_bound;

  std::ostringstream os;
  os << "semi-discrete model: " << model.name << ", grid";
  for (std::size_t d = 0; d < grid.nodes.size(); ++d)
    os << (d ? "x" : " ") << grid.nodes[d];
  os << ", h_min = " << ode.grid().min_spacing() << "\n";
  os << "stability: dt <= c*h_min^2 with c ~= " << c << " (dt_max ~= " << dt_bound
     << "), using dt = " << dt << "\n";

  Trajectory traj = simulate(ode, s0, dt, sim.t_end, sim.stride);
  AuditResult audit = energy_audit(ode, traj);

  os << "samples: " << audit.t.size() << ", H(0) = " << audit.H.front()
     << ", H(end) = " << audit.H.back() << "\n";
  os << "relative energy drift: " << audit.energy_drift << "\n";
  os << "max |dH/dt - Phi|: " << audit.max_residual
     << " (relative: " << audit.max_rel_residual << ")\n";

  if (sim.refine > 1) {
    auto init = [&](const SemiDiscretePH& o, GridState& s) {
      apply_initial_data(model, sim, params, o, s);
    };
    ConvergenceTable table =
        audit_convergence(*model.ph, grid, params, init, dt, sim.t_end, sim.refine, sim.stride);
    os << "refinement table (h -> h/2, dt -> dt/4):\n";
    for (std::size_t k = 0; k < table.levels.size(); ++k) {
      os << "  level " << k << ": nodes";
      for (auto n : table.levels[k].nodes) os << " " << n;
      os << ", max residual = " << table.levels[k].max_residual;
      if (k > 0) os << ", ratio = " << table.ratios[k - 1];
      os << "\n";
    }
  }

  if (!sim.audit_out.empty()) {
    std::ofstream csv(sim.audit_out);
    if (!csv) throw model_error("cannot open '" + sim.audit_out + "'");
    write_audit_csv(audit, csv);
    os << "audit series written to " << sim.audit_out << "\n";
  }

  emit(common, os.str());
  return audit.max_rel_residual <= sim.audit_tol ? kExitOk : kExitVerifyFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"variational boundary-condition and boundary-port calculus"};
  app.require_subcommand(1);

  CommonOpts el_opts, bc_opts, ports_opts, power_opts, verify_opts, sim_common;
  bool naive_split = false;
  SimulateOpts sim_opts;

  CLI::App* el = app.add_subcommand("el", "domain equations (Euler-Lagrange or evolution)");
  add_common(el, el_opts, false);
  CLI::App* bc = app.add_subcommand("bc", "boundary conditions on declared faces");
  add_common(bc, bc_opts);
  bc->add_flag("--naive-split", naive_split,
               "use the symmetric non-adapted coefficient split (comparison report)");
  CLI::App* ports = app.add_subcommand("ports", "collocated boundary ports of a port-Hamiltonian model");
  add_common(ports, ports_opts);
  CLI::App* power = app.add_subcommand("power", "full power-balance decomposition");
  add_common(power, power_opts);
  CLI::App* verify = app.add_subcommand("verify", "check the decomposition identity symbolically");
  add_common(verify, verify_opts, false);

  CLI::App* sim = app.add_subcommand("simulate", "discretize, integrate and audit the energy balance");
  add_common(sim, sim_common, false);
  sim->add_option("--grid", sim_opts.grid, "nodes per spatial direction, e.g. 64 or 48,32");
  sim->add_option("--dt", sim_opts.dt, "time step (default: 0.1 x stability bound)");
  sim->add_option("--tend", sim_opts.t_end, "simulation horizon");
  sim->add_option("--bc", sim_opts.bc,
                  "face policy, FACE=clamped|free|periodic or FACE.min=...; repeatable");
  sim->add_option("--param", sim_opts.params, "parameter value NAME=VALUE; repeatable (default 1)");
  sim->add_option("--init", sim_opts.init,
                  "initial data FIELD=polynomial in the spatial coordinates; repeatable");
  sim->add_option("--audit-out", sim_opts.audit_out, "write t,H,Phi,residual series as CSV");
  sim->add_option("--refine", sim_opts.refine, "number of refinement levels for the audit table");
  sim->add_option("--stride", sim_opts.stride, "output sampling stride in steps");
  sim->add_option("--audit-tol", sim_opts.audit_tol,
                  "relative residual above which the audit fails (exit 2)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help() << std::flush;
    return kExitUsage;
  }

  try {
    if (el->parsed()) {
      ModelSpec model = parse_model_file(el_opts.model_path);
      emit(el_opts, render_report(build_equations_report(model), format_of(el_opts)));
      return kExitOk;
    }
    if (bc->parsed()) {
      ModelSpec model = parse_model_file(bc_opts.model_path);
      ReportDocument doc = build_boundary_report(model, face_of(bc_opts), naive_split);
      emit(bc_opts, render_report(doc, format_of(bc_opts)));
      return kExitOk;
    }
    if (ports->parsed() || power->parsed()) {
      const CommonOpts& opts = ports->parsed() ? ports_opts : power_opts;
      ModelSpec model = parse_model_file(opts.model_path);
      ReportDocument doc = build_ports_report(model, face_of(opts));
      emit(opts, render_report(doc, format_of(opts)));
      return kExitOk;
    }
    if (verify->parsed()) {
      ModelSpec model = parse_model_file(verify_opts.model_path);
      ReportDocument doc = build_verify_report(model);
      emit(verify_opts, render_report(doc, format_of(verify_opts)));
      return doc.residual_zero.value_or(false) ? kExitOk : kExitVerifyFailed;
    }
    if (sim->parsed()) return run_simulate(sim_common, sim_opts);
  } catch (const model_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitModelError;
  } catch (const eval_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitModelError;
  } catch (const arithmetic_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitModelError;
  } catch (const expr_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitModelError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitModelError;
  }
  return kExitUsage;
}
