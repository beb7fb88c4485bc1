#include "energraph/io.hpp"

#include "test_util.hpp"

#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace energraph;
using energraph::testing::graphs_equal;

namespace {

std::filesystem::path temp_dir() {
  auto dir = std::filesystem::temp_directory_path() / "energraph_io_tests";
  std::filesystem::create_directories(dir);
  return dir;
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

int count_occurrences(const std::string& text, const std::string& needle) {
  int n = 0;
  for (std::size_t pos = text.find(needle); pos != std::string::npos;
       pos = text.find(needle, pos + needle.size()))
    ++n;
  return n;
}

}  // namespace

TEST_CASE("save/load round-trips every catalog component structurally") {
  for (ComponentKind kind : all_component_kinds()) {
    CAPTURE(to_string(kind));
    Graph g = instantiate(kind, "unit");
    auto path = temp_dir() / (std::string(to_string(kind)) + ".model");
    save_model(g, path.string());
    Graph back = load_graph(path.string());
    std::string why;
    REQUIRE_MESSAGE(graphs_equal(g, back, &why), why);
    CHECK(validate(back).errors.empty());
  }
}

TEST_CASE("save/load round-trips combined systems with namespaced tables") {
  Graph loop = combine(
      "Loop",
      {instantiate(ComponentKind::Reservoir, "res"), instantiate(ComponentKind::Pump, "pump")},
      {{{"res", 3}, {"pump", 1}}});
  auto path = temp_dir() / "loop.model";
  save_model(loop, path.string());
  Graph back = load_graph(path.string());
  std::string why;
  REQUIRE_MESSAGE(graphs_equal(loop, back, &why), why);
  CHECK(validate(back).errors.empty());
}

TEST_CASE("load rejects out-of-range edge references naming the edge") {
  auto path = temp_dir() / "bad_edge.model";
  spit(path, R"({
    "schema_version": 1, "kind": "component", "name": "bad",
    "vertices": [
      {"name": "a", "kind": "dynamic", "equations": ["x_dot"], "initial_condition": [0]},
      {"name": "b", "kind": "dynamic", "equations": ["x_dot"], "initial_condition": [0]},
      {"name": "c", "kind": "dynamic", "equations": ["x_dot"], "initial_condition": [0]}
    ],
    "edges": [{"name": "broken", "tail": 9, "head": 1,
               "flows": [{"equation": "xt"}]}]
  })");
  CHECK_THROWS_WITH_AS(load_graph(path.string()),
                       doctest::Contains("references vertex 9 of 3"), IoError);
}

TEST_CASE("load rejects unknown fields with their path") {
  auto path = temp_dir() / "unknown_field.model";
  spit(path, R"({
    "schema_version": 1, "kind": "component", "name": "bad",
    "vertices": [{"name": "a", "kind": "dynamic", "equations": ["x_dot"],
                  "initial_condition": [0], "naem": "typo"}],
    "edges": []
  })");
  CHECK_THROWS_WITH_AS(load_graph(path.string()),
                       doctest::Contains("unknown field 'naem'"), IoError);
}

TEST_CASE("load rejects unsupported schema versions and kinds") {
  auto v2 = temp_dir() / "v2.model";
  spit(v2, R"({"schema_version": 2, "kind": "component", "name": "x",
               "vertices": [], "edges": []})");
  CHECK_THROWS_WITH_AS(load_graph(v2.string()), doctest::Contains("schema version"),
                       IoError);
  auto weird = temp_dir() / "weird.model";
  spit(weird, R"({"schema_version": 1, "kind": "poem", "name": "x"})");
  CHECK_THROWS_AS(load_graph(weird.string()), IoError);
  CHECK_THROWS_AS(load_graph((temp_dir() / "missing.model").string()), IoError);
}

TEST_CASE("a system file reproduces the programmatic combine") {
  auto path = temp_dir() / "sys.model";
  spit(path, R"({
    "schema_version": 1, "kind": "system", "name": "Sys",
    "components": [
      {"name": "mainTank", "catalog": "tank"},
      {"name": "heatLoad", "catalog": "heat_load"}
    ],
    "connections": [{"primary": ["mainTank", 2], "secondary": ["heatLoad", 1]}],
    "input_common": [["u3", "u2"]]
  })");
  Graph from_file = load_graph(path.string());

  Graph programmatic = input_common(
      combine("Sys",
              {instantiate(ComponentKind::Tank, "mainTank"),
               instantiate(ComponentKind::HeatLoad, "heatLoad")},
              {{{"mainTank", 2}, {"heatLoad", 1}}}),
      {{"u3", "u2"}});
  std::string why;
  CHECK_MESSAGE(graphs_equal(from_file, programmatic, &why), why);
}

TEST_CASE("system files may reference other model files and override ICs") {
  auto component = temp_dir() / "mytank.model";
  save_model(instantiate(ComponentKind::Tank, "whatever"), component.string());
  auto path = temp_dir() / "nested.model";
  spit(path, R"({
    "schema_version": 1, "kind": "system", "name": "Nested",
    "components": [{"name": "tank", "file": "mytank.model"}],
    "initial_conditions": {"Fluid Mass": [1234]}
  })");
  Graph g = load_graph(path.string());
  CHECK(g.vertex(1).initial_condition == std::vector<double>{1234.0});
}

TEST_CASE("golden full reports stay byte-identical for every catalog kind") {
  for (ComponentKind kind : all_component_kinds()) {
    CAPTURE(to_string(kind));
    Graph g = instantiate(kind, std::string(to_string(kind)));
    std::string rendered = render_report(g, ReportKind::Full);
    auto golden = std::filesystem::path(ENERGRAPH_GOLDEN_DIR) /
                  (std::string(to_string(kind)) + ".report.txt");
    REQUIRE_MESSAGE(std::filesystem::exists(golden),
                    "missing golden file " << golden.string());
    CHECK(rendered == slurp(golden));
  }
}

TEST_CASE("reports cover the per-kind layouts") {
  Graph tank = instantiate(ComponentKind::Tank, "mainTank");
  std::string graph_report = render_report(tank, ReportKind::Graph);
  CHECK(graph_report.find("Fluid Mass") != std::string::npos);
  CHECK(graph_report.find("Advection Out") != std::string::npos);

  // Unset initial conditions are flagged.
  GraphBuilder b("bare");
  VertexSpec v;
  v.name = "n";
  v.equations.push_back(Expression::parse("x_dot"));
  b.add_vertex(v);
  std::string initcond = render_report(b.build(), ReportKind::InitCond);
  CHECK(initcond.find("unassigned") != std::string::npos);

  // Parameter-free graphs render a placeholder row.
  std::string params = render_report(b.build(), ReportKind::Parameter);
  CHECK(params.find("(none)") != std::string::npos);

  std::string full = render_report(tank, ReportKind::Full);
  for (const char* section : {"graph report", "parameter report", "input report",
                              "port report", "initial condition report"})
    CHECK(full.find(section) != std::string::npos);

  CHECK(report_kind_from_string("graph") == ReportKind::Graph);
  CHECK_THROWS_AS(report_kind_from_string("sonnet"), IoError);
}

TEST_CASE("drawing export emits DOT with the documented styles") {
  GraphBuilder b("mini");
  VertexSpec v1, v2;
  v1.name = "a";
  v1.equations.push_back(Expression::parse("x_dot"));
  v1.initial_condition = std::vector<double>{0.0};
  v2 = v1;
  v2.name = "b";
  b.add_vertex(v1).add_vertex(v2);
  b.add_edge("e", "xt-xh", 1, 2, false);
  std::string dot = export_drawing(b.build());
  CHECK(count_occurrences(dot, "[label=") == 3);  // 2 node + 1 edge statements
  CHECK(count_occurrences(dot, "->") == 1);

  Graph load = instantiate(ComponentKind::HeatLoad, "hl");
  std::string dot_load = export_drawing(load);
  CHECK(count_occurrences(dot_load, "shape=ellipse") == 3);  // 3 declared nodes
  CHECK(count_occurrences(dot_load, "->") == 4);             // 4 edges incl. dangling
  CHECK(count_occurrences(dot_load, "style=dashed],") <= 1);
  CHECK(dot_load.find("style=dashed") != std::string::npos);  // external marking
  CHECK(export_drawing(load) == dot_load);                    // deterministic

  Graph virt = instantiate(ComponentKind::VirtualElement, "virt");
  CHECK(export_drawing(virt).find("doublecircle") != std::string::npos);
}

TEST_CASE("equation export substitutes parameters on request") {
  Graph tank = instantiate(ComponentKind::Tank, "mainTank");
  std::string symbolic = export_equations(tank, false);
  CHECK(symbolic.find("cp_f") != std::string::npos);
  CHECK(symbolic.find("3300") == std::string::npos);
  // The state-bound mass parameter resolves to its global state symbol.
  CHECK(symbolic.find("M_t") == std::string::npos);
  CHECK(symbolic.find("x1") != std::string::npos);

  std::string substituted = export_equations(tank, true);
  CHECK(substituted.find("3300") != std::string::npos);
  CHECK(substituted.find("cp_f") == std::string::npos);

  // Design variables never substitute.
  GraphBuilder b("design");
  VertexSpec v;
  v.name = "n";
  v.equations.push_back(Expression::parse("C_d*x_dot"));
  v.initial_condition = std::vector<double>{0.0};
  b.add_vertex(v);
  b.add_edge("loss", "k_d*xt", 1, 0, true);
  Parameter cd;
  cd.description = "design capacitance";
  cd.var = "C_d";
  cd.value = 5.0;
  cd.is_design_variable = true;
  b.add_parameter(cd);
  Parameter kd;
  kd.description = "loss";
  kd.var = "k_d";
  kd.value = 2.0;
  b.add_parameter(kd);
  std::string out = export_equations(b.build(), true);
  CHECK(out.find("C_d") != std::string::npos);  // survives substitution
  CHECK(out.find("k_d") == std::string::npos);  // literal 2 appears instead
  CHECK(out.find(" = - ") != std::string::npos);

  // One line per dynamic state, with x<i>_dot on the left.
  Graph plate = instantiate(ComponentKind::TwoPhaseColdPlate, "plate");
  std::string plate_eqs = export_equations(plate, false);
  int equation_lines = 0;
  std::istringstream lines(plate_eqs);
  for (std::string line; std::getline(lines, line);)
    if (!line.empty() && line[0] != '#') ++equation_lines;
  CHECK(equation_lines == 3);
  CHECK(plate_eqs.find("x1_dot") != std::string::npos);
  CHECK(plate_eqs.find("x3_dot") != std::string::npos);
}

TEST_CASE("trajectory CSV carries the full column contract") {
  DynamicSystem sys = assemble(instantiate(ComponentKind::HeatLoad, "hl"));
  SignalSchedule schedule =
      SignalSchedule::constants({{"u1", 0.2}, {"u2", 100.0}, {"Inlet Temperature", 300.0}});
  Trajectory traj = simulate_ode(sys, sys.initial_state(), schedule, 0.0, 0.1, 1e-2);
  auto path = temp_dir() / "traj.csv";
  write_trajectory_csv(traj, path.string());

  std::string text = slurp(path);
  std::istringstream lines(text);
  std::string header;
  std::getline(lines, header);
  const int columns = 1 + count_occurrences(header, ",");
  CHECK(columns == 1 + sys.state_count() + sys.input_count() + sys.flow_count());
  CHECK(header.find("Fluid Temperature") != std::string::npos);
  CHECK(header.find("u1") != std::string::npos);
  CHECK(header.find("Convection") != std::string::npos);
  int rows = 0;
  for (std::string line; std::getline(lines, line);)
    if (!line.empty()) ++rows;
  CHECK(rows == traj.rows());
}

TEST_CASE("signals CSV loads as piecewise-linear series") {
  auto path = temp_dir() / "signals.csv";
  spit(path, "time,u1,Inlet Temperature\n0,0.1,300\n1,0.3,310\n2,0.3,305\n");
  SignalSchedule s = load_signals_csv(path.string());
  CHECK(s.value("u1", 0.5) == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(s.value("Inlet Temperature", 1.5) == doctest::Approx(307.5).epsilon(1e-15));
  CHECK(s.value("u1", 9.0) == 0.3);  // flat outside the samples

  auto bad = temp_dir() / "bad_signals.csv";
  spit(bad, "u1,time\n0,0\n");
  CHECK_THROWS_AS(load_signals_csv(bad.string()), IoError);
  auto ragged = temp_dir() / "ragged.csv";
  spit(ragged, "time,u1\n0,1\n1\n");
  CHECK_THROWS_AS(load_signals_csv(ragged.string()), IoError);
}

TEST_CASE("numeric CSV output round-trips through 17 significant digits") {
  DynamicSystem sys = assemble(instantiate(ComponentKind::MassSpringDamper, "msd"));
  Trajectory traj =
      simulate_ode(sys, sys.initial_state(), SignalSchedule{}, 0.0, 0.05, 1e-2);
  auto path = temp_dir() / "roundtrip.csv";
  write_trajectory_csv(traj, path.string());

  std::ifstream in(path);
  std::string header, line;
  std::getline(in, header);
  int row = 0;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string cell;
    std::getline(ss, cell, ',');
    CHECK(std::stod(cell) == traj.time[static_cast<std::size_t>(row)]);
    for (int c = 0; c < sys.state_count(); ++c) {
      std::getline(ss, cell, ',');
      CHECK(std::stod(cell) == traj.states(row, c));
    }
    ++row;
  }
}

TEST_CASE("linear model CSV lists A row-major, then B, then Z") {
  LinearModel model;
  model.a.resize(2, 2);
  model.a << 1, 2, 3, 4;
  model.b.resize(2, 1);
  model.b << 5, 6;
  model.z.resize(2);
  model.z << 7, 8;
  auto path = temp_dir() / "lin.csv";
  write_linear_model_csv(model, path.string());
  std::string text = slurp(path);
  CHECK(text.find("matrix,row,col,value") == 0);
  CHECK(text.find("A,1,2,2\n") != std::string::npos);
  CHECK(text.find("B,2,1,6\n") != std::string::npos);
  CHECK(text.find("Z,1,1,7\n") != std::string::npos);
}

TEST_CASE("problem files load the full optimization description") {
  auto model = temp_dir() / "decay.model";
  {
    GraphBuilder b("decay");
    VertexSpec v;
    v.name = "node";
    v.equations.push_back(Expression::parse("x_dot"));
    v.initial_condition = std::vector<double>{1.0};
    b.add_vertex(v);
    b.add_edge("loss", "k_d*xt", 1, 0, true);
    Parameter p;
    p.description = "loss";
    p.var = "k_d";
    p.value = 1.0;
    b.add_parameter(p);
    save_model(b.build(), model.string());
  }
  auto path = temp_dir() / "problem.json";
  spit(path, R"({
    "schema_version": 1, "kind": "problem",
    "model": "decay.model",
    "design_variables": [{"name": "th1", "lower": 0, "upper": 1}],
    "vertex_scaling": {"1": "th1 + 0.5"},
    "objective": "(th1-0.3)^2",
    "t_final": 1.0, "dt": 0.05
  })");
  DesignProblem problem = load_problem(path.string());
  CHECK(problem.baseline.name() == "decay");
  REQUIRE(problem.theta.size() == 1);
  CHECK(problem.theta[0].name == "th1");
  CHECK(problem.vertex_scaling.count(1) == 1);
  const double theta[] = {0.25};
  ObjectiveResult r = evaluate_objective(problem, theta, {});
  CHECK(r.value == doctest::Approx(0.0025).epsilon(1e-12));

  OptimizeResult best = optimize(problem, 5, 64);
  auto hist = temp_dir() / "history.csv";
  write_history_csv(best, problem, hist.string());
  std::string text = slurp(hist);
  CHECK(text.find("evaluation,generation,member,objective,th1") == 0);
  CHECK(count_occurrences(text, "\n") == 65);  // header + 64 evaluations

  auto bad = temp_dir() / "bad_problem.json";
  spit(bad, R"({"schema_version": 1, "kind": "problem", "model": "decay.model",
                "design_variables": [{"name": "xt", "lower": 0, "upper": 1}],
                "objective": "1", "t_final": 1, "dt": 0.1})");
  CHECK_THROWS_WITH_AS(load_problem(bad.string()), doctest::Contains("reserved"), IoError);
}
