// Throughput benchmarks for the hot paths: compiled expression evaluation,
// structure-matrix assembly, RK4 stepping, and implicit-Euler DAE stepping.

#include "energraph/analysis.hpp"
#include "energraph/components.hpp"
#include "energraph/compose.hpp"
#include "energraph/simulate.hpp"

#include <benchmark/benchmark.h>

namespace {

using namespace energraph;

Graph tank_heat_load_system() {
  Graph tank = instantiate(ComponentKind::Tank, "mainTank");
  Graph load = instantiate(ComponentKind::HeatLoad, "heatLoad");
  Graph sys = combine("Sys", {tank, load}, {{{"mainTank", 2}, {"heatLoad", 1}}});
  return input_common(sys, {{"u3", "u2"}});
}

void BM_ExpressionEvaluate(benchmark::State& state) {
  Expression e = Expression::parse("rho*A_c*sqrt(2*(xt-xh+rho*g*dz)/(rho*fLDK))");
  std::map<std::string, int> slots = {{"rho", 0}, {"A_c", 1}, {"xt", 2}, {"xh", 3},
                                      {"g", 4},   {"dz", 5},  {"fLDK", 6}};
  CompiledExpr compiled = CompiledExpr::compile(e, slots);
  std::vector<double> values = {1000.0, 1e-4, 2.2e5, 1.8e5, 9.81, 0.0, 2.0};
  for (auto _ : state) {
    benchmark::DoNotOptimize(compiled.eval(values));
    values[2] += 1.0;
  }
}
BENCHMARK(BM_ExpressionEvaluate);

void BM_IncidenceAndKhatriRao(benchmark::State& state) {
  Graph plate = instantiate(ComponentKind::TwoPhaseColdPlate, "plate",
                            {.discretization = 8});
  for (auto _ : state) {
    Eigen::MatrixXd m = incidence_matrix(plate);
    benchmark::DoNotOptimize(khatri_rao(m, smatrix(plate)));
  }
}
BENCHMARK(BM_IncidenceAndKhatriRao);

void BM_Assemble(benchmark::State& state) {
  Graph sys = tank_heat_load_system();
  for (auto _ : state) benchmark::DoNotOptimize(assemble(sys));
}
BENCHMARK(BM_Assemble);

void BM_Rk4Step(benchmark::State& state) {
  DynamicSystem sys = assemble(tank_heat_load_system());
  SignalSchedule schedule = SignalSchedule::constants(
      {{"u1", 0.3}, {"u2", 0.3}, {"u4", 400.0}, {"mainTank.Source Temperature", 330.0}});
  Eigen::VectorXd x0 = sys.initial_state();
  const double dt = 1e-3;
  double t = 0.0;
  for (auto _ : state) {
    Trajectory traj = simulate_ode(sys, x0, schedule, t, t + dt, dt);
    benchmark::DoNotOptimize(traj.states);
  }
}
BENCHMARK(BM_Rk4Step);

void BM_DaeStep(benchmark::State& state) {
  Graph coupling = instantiate(ComponentKind::VirtualElement, "virt");
  DynamicSystem sys = assemble(coupling);
  SignalSchedule schedule =
      SignalSchedule::constants({{"virt.Side A", 1.0}, {"virt.Side B", 0.0}});
  Eigen::VectorXd x0 = sys.initial_state();
  for (auto _ : state) {
    Trajectory traj = simulate_dae(sys, x0, schedule, 0.0, 1e-3, 1e-3);
    benchmark::DoNotOptimize(traj.states);
  }
}
BENCHMARK(BM_DaeStep);

}  // namespace

BENCHMARK_MAIN();
