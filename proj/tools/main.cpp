// energraph command-line interface: validate, report, draw, simulate,
// linearize, export-eqs, combine, and optimize over .model documents.
// Exit codes: 0 success, 1 usage error, 2 validation/simulation failure.

#include "energraph/analysis.hpp"
#include "energraph/io.hpp"
#include "energraph/simulate.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace {

using namespace energraph;

Eigen::VectorXd parse_vector(const std::string& text, const char* flag) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    try {
      values.push_back(std::stod(cell));
    } catch (const std::exception&) {
      throw IoError(std::string(flag) + ": bad number '" + cell + "'");
    }
  }
  return Eigen::Map<const Eigen::VectorXd>(values.data(),
                                           static_cast<Eigen::Index>(values.size()));
}

int run_validate(const std::string& model) {
  Graph g = load_graph(model);
  ValidationReport report = validate(g);
  for (const auto& e : report.errors) std::cout << "error: " << e << "\n";
  for (const auto& w : report.warnings) std::cout << "warning: " << w << "\n";
  if (report.ok()) {
    std::cout << g.name() << ": no errors (" << report.warnings.size() << " warnings)\n";
    return 0;
  }
  return 2;
}

int run_simulate(const std::string& model, double t_final, double dt,
                 const std::string& signals_path, const std::string& out_path,
                 const std::string& method, const std::string& audit_path) {
  Graph g = load_graph(model);
  DynamicSystem sys = assemble(g);
  SignalSchedule schedule;
  if (!signals_path.empty()) schedule = load_signals_csv(signals_path);
  Eigen::VectorXd x0 = sys.initial_state();

  Trajectory traj;
  const bool use_dae = method == "dae" || (method == "auto" && sys.is_dae());
  if (use_dae)
    traj = simulate_dae(sys, x0, schedule, 0.0, t_final, dt);
  else
    traj = simulate_ode(sys, x0, schedule, 0.0, t_final, dt);
  write_trajectory_csv(traj, out_path);
  if (!audit_path.empty()) write_audit_csv(energy_audit(traj, sys), audit_path);
  if (sys.table_extrapolations() > 0)
    std::cerr << "warning: " << sys.table_extrapolations()
              << " lookup-table samples fell outside their grids (held flat)\n";
  std::cout << "wrote " << traj.rows() << " rows to " << out_path << "\n";
  return 0;
}

int run_linearize(const std::string& model, const std::string& x0_text,
                  const std::string& u0_text, const std::string& d0_text,
                  const std::string& out_path) {
  Graph g = load_graph(model);
  DynamicSystem sys = assemble(g);
  Eigen::VectorXd x0 = parse_vector(x0_text, "--x0");
  Eigen::VectorXd u0 = u0_text.empty() ? Eigen::VectorXd::Zero(sys.input_count())
                                       : parse_vector(u0_text, "--u0");
  Eigen::VectorXd d0 = d0_text.empty() ? Eigen::VectorXd::Zero(sys.disturbance_count())
                                       : parse_vector(d0_text, "--d0");
  LinearModel lin = linearize(sys, x0, u0, d0);
  for (const auto& note : lin.notes) std::cerr << "warning: " << note << "\n";
  write_linear_model_csv(lin, out_path);
  std::cout << "wrote A (" << lin.a.rows() << "x" << lin.a.cols() << "), B (" << lin.b.rows()
            << "x" << lin.b.cols() << "), Z to " << out_path << "\n";
  return 0;
}

int run_optimize(const std::string& problem_path, std::uint64_t seed, int budget,
                 int threads, const std::string& out_path) {
  DesignProblem problem = load_problem(problem_path);
  OptimizeResult result = optimize(problem, seed, budget, threads);
  write_history_csv(result, problem, out_path);
  std::cout << "best objective " << result.objective << " after " << result.history.size()
            << " evaluations; history in " << out_path << "\n";
  std::cout << "best point:";
  for (std::size_t i = 0; i < problem.theta.size(); ++i)
    std::cout << ' ' << problem.theta[i].name << '=' << result.theta[i];
  for (std::size_t i = 0; i < problem.phi.size(); ++i)
    std::cout << ' ' << problem.phi[i].name << '=' << result.phi[i];
  std::cout << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"graph-based energy system modeling toolbox"};
  app.require_subcommand(1);

  std::string model, out_path, kind = "full", signals_path, method = "auto";
  std::string x0_text, u0_text, d0_text, audit_path;
  double t_final = 1.0, dt = 1e-3;
  std::uint64_t seed = 1;
  int budget = 160, threads = 0;
  bool substitute = false;

  auto* c_validate = app.add_subcommand("validate", "check a model file");
  c_validate->add_option("model", model, "model file")->required();

  auto* c_report = app.add_subcommand("report", "print tabular reports");
  c_report->add_option("model", model, "model file")->required();
  c_report->add_option("--kind", kind, "graph|parameter|input|port|initcond|full");

  auto* c_draw = app.add_subcommand("draw", "export a DOT drawing");
  c_draw->add_option("model", model, "model file")->required();
  c_draw->add_option("-o,--output", out_path, "output .dot file")->required();

  auto* c_sim = app.add_subcommand("simulate", "integrate a system");
  c_sim->add_option("model", model, "model file")->required();
  c_sim->add_option("--t-final", t_final, "final time (s)")->required();
  c_sim->add_option("--dt", dt, "time step (s)")->required();
  c_sim->add_option("--signals", signals_path, "signals CSV (time,...)");
  c_sim->add_option("-o,--output", out_path, "trajectory CSV")->required();
  c_sim->add_option("--method", method, "auto|ode|dae");
  c_sim->add_option("--audit", audit_path, "energy audit CSV");

  auto* c_lin = app.add_subcommand("linearize", "A/B/Z about an operating point");
  c_lin->add_option("model", model, "model file")->required();
  c_lin->add_option("--x0", x0_text, "state operating point, comma separated")->required();
  c_lin->add_option("--u0", u0_text, "input operating point, comma separated");
  c_lin->add_option("--d0", d0_text, "disturbance operating point, comma separated");
  c_lin->add_option("-o,--output", out_path, "linearization CSV")->required();

  auto* c_eqs = app.add_subcommand("export-eqs", "print the system equations");
  c_eqs->add_option("model", model, "model file")->required();
  c_eqs->add_flag("--substitute", substitute, "substitute non-design parameter values");

  auto* c_combine = app.add_subcommand("combine", "realize a system definition");
  c_combine->add_option("model", model, "system definition file")->required();
  c_combine->add_option("-o,--output", out_path, "merged component file")->required();

  auto* c_opt = app.add_subcommand("optimize", "run the design optimizer");
  c_opt->add_option("problem", model, "problem file")->required();
  c_opt->add_option("--seed", seed, "random seed")->required();
  c_opt->add_option("--budget", budget, "objective evaluation budget")->required();
  c_opt->add_option("--threads", threads, "worker threads (0 = hardware)");
  c_opt->add_option("-o,--output", out_path, "history CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (c_validate->parsed()) return run_validate(model);
    if (c_report->parsed()) {
      std::cout << render_report(load_graph(model), report_kind_from_string(kind));
      return 0;
    }
    if (c_draw->parsed()) {
      std::ofstream out(out_path);
      if (!out) throw IoError("cannot write '" + out_path + "'");
      out << export_drawing(load_graph(model));
      return 0;
    }
    if (c_sim->parsed())
      return run_simulate(model, t_final, dt, signals_path, out_path, method, audit_path);
    if (c_lin->parsed()) return run_linearize(model, x0_text, u0_text, d0_text, out_path);
    if (c_eqs->parsed()) {
      std::cout << export_equations(load_graph(model), substitute);
      return 0;
    }
    if (c_combine->parsed()) {
      ModelDocument doc = load_model(model);
      if (!doc.is_system()) throw IoError(model + ": combine expects a system definition");
      const std::string base = std::filesystem::path(model).parent_path().string();
      save_model(realize_system(std::get<SystemDefinition>(doc.content), base), out_path);
      return 0;
    }
    if (c_opt->parsed()) return run_optimize(model, seed, budget, threads, out_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
