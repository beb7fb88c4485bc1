// End-to-end checks of the installed command-line surface: every subcommand
// is exercised against real model files through the actual binary.

#include "energraph/io.hpp"

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace energraph;

namespace {

std::filesystem::path work_dir() {
  auto dir = std::filesystem::temp_directory_path() / "energraph_cli_tests";
  std::filesystem::create_directories(dir);
  return dir;
}

struct RunResult {
  int exit_code;
  std::string out;
};

RunResult run_cli(const std::string& args) {
  auto stdout_path = work_dir() / "stdout.txt";
  const std::string command = std::string(ENERGRAPH_CLI_PATH) + " " + args + " > " +
                              stdout_path.string() + " 2>&1";
  int status = std::system(command.c_str());
  RunResult result;
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(stdout_path);
  std::ostringstream ss;
  ss << in.rdbuf();
  result.out = ss.str();
  return result;
}

std::string quoted(const std::filesystem::path& p) { return "\"" + p.string() + "\""; }

int line_count(const std::filesystem::path& p) {
  std::ifstream in(p);
  int n = 0;
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) ++n;
  return n;
}

std::filesystem::path write_tank_model() {
  auto path = work_dir() / "tank.model";
  save_model(instantiate(ComponentKind::Tank, "mainTank"), path.string());
  return path;
}

}  // namespace

TEST_CASE("validate exits 0 on a shipped component and 2 on a broken one") {
  auto tank = write_tank_model();
  RunResult ok = run_cli("validate " + quoted(tank));
  CHECK(ok.exit_code == 0);
  CHECK(ok.out.find("no errors") != std::string::npos);

  auto broken = work_dir() / "broken.model";
  {
    std::ofstream out(broken);
    out << R"({"schema_version": 1, "kind": "component", "name": "broken",
               "vertices": [{"name": "n", "kind": "dynamic", "equations": ["x_dot"],
                             "initial_condition": [0]}],
               "edges": [{"name": "e", "tail": 1, "head": 0, "external": true,
                          "flows": [{"equation": "u9*xt"}]}]})";
  }
  RunResult bad = run_cli("validate " + quoted(broken));
  CHECK(bad.exit_code == 2);
  CHECK(bad.out.find("undeclared input u9") != std::string::npos);
}

TEST_CASE("usage errors exit 1") {
  CHECK(run_cli("").exit_code == 1);
  CHECK(run_cli("frobnicate x").exit_code == 1);
  CHECK(run_cli("simulate").exit_code == 1);  // missing required flags
  CHECK(run_cli("--help").exit_code == 0);
}

TEST_CASE("simulate honors the row-count contract") {
  auto tank = write_tank_model();
  auto signals = work_dir() / "signals.csv";
  {
    std::ofstream out(signals);
    out << "time,u1,u2,Source Temperature\n0,0.0,1.0,350\n10,0.0,1.0,350\n";
  }
  auto traj = work_dir() / "traj.csv";
  RunResult r = run_cli("simulate " + quoted(tank) + " --t-final 10 --dt 0.001 --signals " +
                        quoted(signals) + " -o " + quoted(traj));
  REQUIRE(r.exit_code == 0);
  // Header plus 10001 sample rows.
  CHECK(line_count(traj) == 10002);

  std::ifstream in(traj);
  std::string header, first, line, last;
  std::getline(in, header);
  std::getline(in, first);
  while (std::getline(in, line))
    if (!line.empty()) last = line;
  CHECK(header.rfind("time,", 0) == 0);
  CHECK(first.rfind("0,6000", 0) == 0);
  // Drain leaves M(10) = 5990 to within accumulated roundoff.
  std::stringstream lastss(last);
  std::string cell;
  std::getline(lastss, cell, ',');
  CHECK(std::stod(cell) == 10.0);
  std::getline(lastss, cell, ',');
  CHECK(std::stod(cell) == doctest::Approx(5990.0).epsilon(1e-12));
}

TEST_CASE("simulate writes the energy audit on request") {
  auto tank = write_tank_model();
  auto traj = work_dir() / "t2.csv";
  auto audit = work_dir() / "audit.csv";
  RunResult r = run_cli("simulate " + quoted(tank) +
                        " --t-final 1 --dt 0.01 -o " + quoted(traj) + " --audit " +
                        quoted(audit));
  REQUIRE(r.exit_code == 0);
  std::ifstream in(audit);
  std::string header;
  std::getline(in, header);
  CHECK(header == "time,stored_energy,external_power,drift");
  CHECK(line_count(audit) == 102);
}

TEST_CASE("linearize reproduces the scalar advection numbers through the CLI") {
  auto model = work_dir() / "advection.model";
  {
    GraphBuilder b("adv");
    VertexSpec v, src;
    v.name = "node";
    v.equations.push_back(Expression::parse("C_v*x_dot"));
    v.initial_condition = std::vector<double>{300.0};
    src.name = "T_in";
    src.kind = VertexKind::External;
    b.add_vertex(v).add_vertex(src);
    b.add_edge("adv", "u1*cp_v*(xt-xh)", 2, 1, true);
    Parameter cv;
    cv.description = "capacitance";
    cv.var = "C_v";
    cv.value = 100.0;
    b.add_parameter(cv);
    Parameter cp;
    cp.description = "specific heat";
    cp.var = "cp_v";
    cp.value = 4.0;
    b.add_parameter(cp);
    b.add_input({"flow", "u1", "kg/s", ""});
    save_model(b.build(), model.string());
  }
  auto lin = work_dir() / "lin.csv";
  RunResult r = run_cli("linearize " + quoted(model) +
                        " --x0 300 --u0 0.2 --d0 350 -o " + quoted(lin));
  REQUIRE(r.exit_code == 0);

  std::ifstream in(lin);
  std::string line;
  std::getline(in, line);
  CHECK(line == "matrix,row,col,value");
  double a = 0, b_val = 0, z = 0;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string m, row, col, value;
    std::getline(ss, m, ',');
    std::getline(ss, row, ',');
    std::getline(ss, col, ',');
    std::getline(ss, value, ',');
    if (m == "A") a = std::stod(value);
    if (m == "B") b_val = std::stod(value);
    if (m == "Z") z = std::stod(value);
  }
  CHECK(a == doctest::Approx(-0.008).epsilon(1e-12));
  CHECK(b_val == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(z == doctest::Approx(2.4).epsilon(1e-12));
}

TEST_CASE("report, draw, and export-eqs write their formats") {
  auto tank = write_tank_model();
  RunResult report = run_cli("report " + quoted(tank) + " --kind graph");
  CHECK(report.exit_code == 0);
  CHECK(report.out.find("graph report") != std::string::npos);
  CHECK(run_cli("report " + quoted(tank) + " --kind sonnet").exit_code == 2);

  auto dot = work_dir() / "tank.dot";
  CHECK(run_cli("draw " + quoted(tank) + " -o " + quoted(dot)).exit_code == 0);
  std::ifstream in(dot);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CHECK(text.find("digraph") != std::string::npos);
  CHECK(text.find("style=dashed") != std::string::npos);

  RunResult eqs = run_cli("export-eqs " + quoted(tank) + " --substitute");
  CHECK(eqs.exit_code == 0);
  CHECK(eqs.out.find("3300") != std::string::npos);
}

TEST_CASE("combine realizes a system definition into a component file") {
  auto sys = work_dir() / "sys.model";
  {
    std::ofstream out(sys);
    out << R"({
      "schema_version": 1, "kind": "system", "name": "Sys",
      "components": [
        {"name": "mainTank", "catalog": "tank"},
        {"name": "heatLoad", "catalog": "heat_load"}
      ],
      "connections": [{"primary": ["mainTank", 2], "secondary": ["heatLoad", 1]}],
      "input_common": [["u3", "u2"]]
    })";
  }
  auto merged = work_dir() / "merged.model";
  REQUIRE(run_cli("combine " + quoted(sys) + " -o " + quoted(merged)).exit_code == 0);
  Graph g = load_graph(merged.string());
  CHECK(g.vertex_count() == 5);  // the load's inlet stand-in merged away
  CHECK(g.edge_count() == 8);    // 5 tank + 4 load - 1 merged
  CHECK(g.inputs().size() == 3);
  CHECK(validate(g).errors.empty());

  // The realized system also simulates through the CLI.
  auto traj = work_dir() / "sys_traj.csv";
  RunResult sim = run_cli("simulate " + quoted(merged) +
                          " --t-final 1 --dt 0.001 -o " + quoted(traj));
  CHECK(sim.exit_code == 0);
  CHECK(line_count(traj) == 1002);
}

TEST_CASE("optimize runs a problem file end to end") {
  auto model = work_dir() / "decay.model";
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
  auto problem = work_dir() / "problem.json";
  {
    std::ofstream out(problem);
    out << R"({
      "schema_version": 1, "kind": "problem",
      "model": "decay.model",
      "design_variables": [{"name": "th1", "lower": 0, "upper": 1}],
      "objective": "(th1-0.3)^2",
      "t_final": 1.0, "dt": 0.05
    })";
  }
  auto history = work_dir() / "history.csv";
  RunResult r = run_cli("optimize " + quoted(problem) + " --seed 9 --budget 160 -o " +
                        quoted(history));
  REQUIRE(r.exit_code == 0);
  CHECK(r.out.find("best objective") != std::string::npos);
  CHECK(line_count(history) == 161);  // header + one row per evaluation

  // Same seed, same history, byte for byte.
  auto history2 = work_dir() / "history2.csv";
  REQUIRE(run_cli("optimize " + quoted(problem) + " --seed 9 --budget 160 -o " +
                  quoted(history2))
              .exit_code == 0);
  std::ifstream a(history), b(history2);
  std::string ta((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
  std::string tb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
  CHECK(ta == tb);
}

TEST_CASE("simulation failures surface as exit code 2") {
  auto pipe = work_dir() / "pipe.model";
  save_model(instantiate(ComponentKind::Pipe, "pipe"), pipe.string());
  auto signals = work_dir() / "reverse.csv";
  {
    std::ofstream out(signals);
    out << "time,Upstream Pressure,Downstream Pressure\n0,1e5,9e5\n1,1e5,9e5\n";
  }
  auto traj = work_dir() / "never.csv";
  RunResult r = run_cli("simulate " + quoted(pipe) + " --t-final 0.01 --dt 0.001 --signals " +
                        quoted(signals) + " -o " + quoted(traj));
  CHECK(r.exit_code == 2);
  CHECK(r.out.find("non-finite") != std::string::npos);
}
