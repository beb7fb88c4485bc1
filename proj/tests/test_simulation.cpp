#include "energraph/simulate.hpp"

#include "energraph/components.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <cmath>

using namespace energraph;

namespace {

/// Closed two-vertex conduction pair: C1 = C2 = 1, one edge k (x_tail - x_head).
Graph conduction_pair(double k = 1.0) {
  GraphBuilder b("pair");
  VertexSpec v1, v2;
  v1.name = "a";
  v1.equations.push_back(Expression::parse("x_dot"));
  v1.initial_condition = std::vector<double>{1.0};
  v2.name = "b";
  v2.equations.push_back(Expression::parse("x_dot"));
  v2.initial_condition = std::vector<double>{0.0};
  b.add_vertex(v1).add_vertex(v2);
  b.add_edge("k", "k_c*(xt-xh)", 1, 2, false);
  Parameter p;
  p.description = "conductance";
  p.var = "k_c";
  p.value = k;
  b.add_parameter(p);
  return b.build();
}

/// Closed conduction ring over n unit capacitances.
Graph conduction_ring(int n) {
  GraphBuilder b("ring");
  for (int i = 1; i <= n; ++i) {
    VertexSpec v;
    v.name = "v" + std::to_string(i);
    v.equations.push_back(Expression::parse("x_dot"));
    v.initial_condition = std::vector<double>{100.0 + 10.0 * i};
    b.add_vertex(v);
  }
  for (int i = 1; i <= n; ++i)
    b.add_edge("e" + std::to_string(i), "k_c*(xt-xh)", i, i % n + 1, false);
  Parameter p;
  p.description = "conductance";
  p.var = "k_c";
  p.value = 0.8;
  b.add_parameter(p);
  return b.build();
}

Graph heated_vertex(double power_is_u = 0.0) {
  (void)power_is_u;
  GraphBuilder b("heated");
  VertexSpec v;
  v.name = "node";
  v.equations.push_back(Expression::parse("x_dot"));
  v.initial_condition = std::vector<double>{50.0};
  b.add_vertex(v);
  b.add_edge("heat", "u1", 0, 1, true);
  b.add_input({"heat input", "u1", "W", ""});
  return b.build();
}

}  // namespace

TEST_CASE("symmetric exchange matches the closed-form exponential") {
  DynamicSystem sys = assemble(conduction_pair());
  Trajectory traj = simulate_ode(sys, sys.initial_state(), SignalSchedule{}, 0.0, 1.0, 1e-3);
  // x1 = 1/2 + e^{-2t}/2, x2 = 1/2 - e^{-2t}/2.
  const double expected_a = 0.5 + 0.5 * std::exp(-2.0);
  const double expected_b = 0.5 - 0.5 * std::exp(-2.0);
  const int last = traj.rows() - 1;
  CHECK(std::abs(traj.states(last, 0) - expected_a) <= 1e-8);
  CHECK(std::abs(traj.states(last, 1) - expected_b) <= 1e-8);
  CHECK(traj.time[static_cast<std::size_t>(last)] == 1.0);
}

TEST_CASE("a flowless system holds its state exactly") {
  GraphBuilder b("still");
  VertexSpec v;
  v.name = "n";
  v.equations.push_back(Expression::parse("x_dot"));
  v.initial_condition = std::vector<double>{42.0};
  b.add_vertex(v);
  DynamicSystem sys = assemble(b.build());
  Trajectory traj = simulate_ode(sys, sys.initial_state(), SignalSchedule{}, 0.0, 1.0, 1e-2);
  for (int i = 0; i < traj.rows(); ++i) CHECK(traj.states(i, 0) == 42.0);

  EnergyAudit audit = energy_audit(traj, sys);
  CHECK(audit.max_drift == 0.0);
}

TEST_CASE("tank drain integrates the mass balance exactly") {
  Graph tank = instantiate(ComponentKind::Tank, "tank");  // M0 = 6000
  DynamicSystem sys = assemble(tank);
  SignalSchedule schedule = SignalSchedule::constants({{"u1", 0.0}, {"u2", 1.0}});
  Trajectory traj = simulate_ode(sys, sys.initial_state(), schedule, 0.0, 10.0, 1e-3);
  const int last = traj.rows() - 1;
  CHECK(std::abs(traj.states(last, 0) - 5990.0) <= 1e-12 * 5990.0);
  // Draining at the stored temperature leaves the temperature untouched.
  CHECK(traj.states(last, 1) == doctest::Approx(300.0).epsilon(1e-12));
}

TEST_CASE("closed conduction ring conserves stored energy to roundoff") {
  DynamicSystem sys = assemble(conduction_ring(5));
  Trajectory traj = simulate_ode(sys, sys.initial_state(), SignalSchedule{}, 0.0, 10.0, 1e-3);
  REQUIRE(traj.rows() == 10001);
  EnergyAudit audit = energy_audit(traj, sys);
  CHECK(audit.max_drift <= 1e-9);
}

TEST_CASE("constant external power raises the audit linearly") {
  DynamicSystem sys = assemble(heated_vertex());
  SignalSchedule schedule = SignalSchedule::constants({{"u1", 25.0}});
  Trajectory traj = simulate_ode(sys, sys.initial_state(), schedule, 0.0, 4.0, 1e-3);
  EnergyAudit audit = energy_audit(traj, sys);
  const int last = traj.rows() - 1;
  const double gained = audit.stored_energy[last] - audit.stored_energy[0];
  CHECK(std::abs(gained - 25.0 * 4.0) <= 1e-6 * std::abs(gained));
  CHECK(audit.max_drift <= 1e-9);
}

TEST_CASE("RK4 shows fourth-order convergence on a smooth nonlinear system") {
  // Nonlinear exchange: P = k (xt - xh) + 0.05 (xt - xh)^3.
  GraphBuilder b("cubic");
  VertexSpec v1, v2;
  v1.name = "a";
  v1.equations.push_back(Expression::parse("x_dot"));
  v1.initial_condition = std::vector<double>{2.0};
  v2.name = "b";
  v2.equations.push_back(Expression::parse("x_dot"));
  v2.initial_condition = std::vector<double>{-1.0};
  b.add_vertex(v1).add_vertex(v2);
  b.add_edge("e", "k_c*(xt-xh) + 0.05*(xt-xh)^3", 1, 2, false);
  Parameter p;
  p.description = "k";
  p.var = "k_c";
  p.value = 1.0;
  b.add_parameter(p);
  DynamicSystem sys = assemble(b.build());

  auto end_state = [&](double dt) {
    Trajectory t = simulate_ode(sys, sys.initial_state(), SignalSchedule{}, 0.0, 1.0, dt);
    return t.states.row(t.rows() - 1).eval();
  };
  Eigen::RowVectorXd reference = end_state(0.02 / 64.0);
  const double err_h = (end_state(0.02) - reference).cwiseAbs().maxCoeff();
  const double err_h2 = (end_state(0.01) - reference).cwiseAbs().maxCoeff();
  CHECK(err_h / err_h2 >= 12.0);
}

TEST_CASE("implicit Euler converges at first order") {
  DynamicSystem sys = assemble(conduction_pair());
  auto end_state = [&](double dt) {
    Trajectory t = simulate_dae(sys, sys.initial_state(), SignalSchedule{}, 0.0, 1.0, dt);
    return t.states.row(t.rows() - 1).eval();
  };
  Eigen::RowVectorXd exact(2);
  exact << 0.5 + 0.5 * std::exp(-2.0), 0.5 - 0.5 * std::exp(-2.0);
  const double err_h = (end_state(0.02) - exact).cwiseAbs().maxCoeff();
  const double err_h2 = (end_state(0.01) - exact).cwiseAbs().maxCoeff();
  CHECK(err_h / err_h2 == doctest::Approx(2.0).epsilon(0.25));
}

TEST_CASE("state-dependent capacitance reproduces the filling-tank mixing solution") {
  // d(cp M T)/dt balance with u2 = 0: T(t) = T_in + (T0 - T_in) M0 / M(t).
  Graph tank = with_initial_conditions(instantiate(ComponentKind::Tank, "tank"),
                                       {{"Fluid Mass", {1000.0}}});
  DynamicSystem sys = assemble(tank);
  SignalSchedule schedule =
      SignalSchedule::constants({{"u1", 0.5}, {"u2", 0.0}, {"Source Temperature", 350.0}});
  Trajectory traj = simulate_ode(sys, sys.initial_state(), schedule, 0.0, 200.0, 1e-2);
  const int last = traj.rows() - 1;
  const double mass = traj.states(last, 0);
  const double temp = traj.states(last, 1);
  CHECK(mass == doctest::Approx(1000.0 + 0.5 * 200.0).epsilon(1e-9));
  const double expected = 350.0 + (300.0 - 350.0) * 1000.0 / mass;
  CHECK(std::abs(temp - expected) <= 1e-6 * std::abs(expected));
}

TEST_CASE("DAE projection solves the stitched chain constraints") {
  GraphBuilder b("cond");
  VertexSpec v1, v2, src;
  v1.name = "a";
  v1.equations.push_back(Expression::parse("x_dot"));
  v1.initial_condition = std::vector<double>{300.0};
  v2 = v1;
  v2.name = "b";
  v2.initial_condition = std::vector<double>{305.0};
  src.name = "inlet";
  src.kind = VertexKind::External;
  b.add_vertex(v1).add_vertex(v2).add_vertex(src);
  b.add_edge("feed", "k_c*(xt-xh)", 3, 1, true);
  b.add_edge("link", "k_c*(xt-xh)", 1, 2, false);
  Parameter p;
  p.description = "k";
  p.var = "k_c";
  p.value = 0.5;
  b.add_parameter(p);

  AlgebraicModel pump{"pump", Expression::parse("x_up + dx"), {{"dx", 25.0}}};
  StitchedSystem stitched = stitch("loop", {b.build()}, {pump},
                                   {{"x1", ChainStep::Kind::Prescription, "BC", ""},
                                    {"x2", ChainStep::Kind::Continuity, "x1", ""},
                                    {"x3", ChainStep::Kind::Model, "x2", "pump"}},
                                   {{"cond", "inlet", "x3"}}, {{"BC", 300.0}});
  DynamicSystem sys = assemble(stitched);
  const double tol = 1e-10;
  Trajectory traj = simulate_dae(sys, sys.initial_state(), SignalSchedule{}, 0.0, 1.0, 1e-2,
                                 tol);

  // Projection at t0: x1 = x2 = BC, x3 = BC + pump rise.
  CHECK(traj.states(0, 0) == doctest::Approx(300.0).epsilon(1e-12));
  CHECK(traj.states(0, 1) == doctest::Approx(300.0).epsilon(1e-12));
  CHECK(traj.states(0, 2) == doctest::Approx(325.0).epsilon(1e-12));

  // The algebraic rows stay on the manifold at every accepted step.
  Eigen::VectorXd u(0), d = sys.disturbances_at(SignalSchedule{}, 0.0);
  for (int i = 0; i < traj.rows(); ++i) {
    Eigen::VectorXd x = traj.states.row(i).transpose();
    Eigen::VectorXd r = sys.dae_residual(x, Eigen::VectorXd::Zero(sys.state_count()), u, d,
                                         traj.time[static_cast<std::size_t>(i)]);
    for (int k = 0; k < 3; ++k) REQUIRE(std::abs(r[k]) <= tol);
  }

  // Residual structure: algebraic rows ignore xdot, dynamic rows depend on
  // it linearly through the mass diagonal.
  Eigen::VectorXd x = traj.states.row(0).transpose();
  Eigen::VectorXd xdot_a = Eigen::VectorXd::Constant(5, 1.5);
  Eigen::VectorXd xdot_b = Eigen::VectorXd::Constant(5, -2.0);
  Eigen::VectorXd ra = sys.dae_residual(x, xdot_a, u, d, 0.0);
  Eigen::VectorXd rb = sys.dae_residual(x, xdot_b, u, d, 0.0);
  for (int k = 0; k < 3; ++k) CHECK(ra[k] == rb[k]);
  for (int k = 3; k < 5; ++k)
    CHECK(ra[k] - rb[k] == doctest::Approx(1.5 - (-2.0)).epsilon(1e-14));
}

TEST_CASE("pure ODE through the DAE path tracks RK4 within O(dt)") {
  DynamicSystem sys = assemble(conduction_pair());
  const double dt = 1e-3;
  Trajectory rk4 = simulate_ode(sys, sys.initial_state(), SignalSchedule{}, 0.0, 1.0, dt);
  Trajectory dae = simulate_dae(sys, sys.initial_state(), SignalSchedule{}, 0.0, 1.0, dt);
  REQUIRE(rk4.rows() == dae.rows());

  double max_rate = 0.0;
  Eigen::VectorXd u(0), d(0);
  for (int i = 0; i < rk4.rows(); ++i) {
    Eigen::VectorXd x = rk4.states.row(i).transpose();
    max_rate = std::max(max_rate,
                        sys.f(x, u, d, rk4.time[static_cast<std::size_t>(i)])
                            .cwiseAbs()
                            .maxCoeff());
  }
  const double gap = (rk4.states - dae.states).cwiseAbs().maxCoeff();
  CHECK(gap <= 5.0 * dt * max_rate);
}

TEST_CASE("identical runs produce bit-identical trajectories") {
  DynamicSystem sys = assemble(instantiate(ComponentKind::DcMotor, "motor"));
  SignalSchedule schedule = SignalSchedule::constants({{"u1", 12.0}, {"u2", 0.1}});
  Trajectory a = simulate_ode(sys, sys.initial_state(), schedule, 0.0, 0.5, 1e-4);
  Trajectory b = simulate_ode(sys, sys.initial_state(), schedule, 0.0, 0.5, 1e-4);
  CHECK(a.states == b.states);
  CHECK(a.flows == b.flows);
  CHECK(a.inputs == b.inputs);
}

TEST_CASE("assemble classifies systems and exposes the documented layout") {
  DynamicSystem load = assemble(instantiate(ComponentKind::HeatLoad, "hl"));
  CHECK_FALSE(load.is_dae());
  CHECK(load.state_count() == 2);
  CHECK(load.disturbance_count() == 1);
  CHECK(load.flow_count() == 4);

  DynamicSystem plate = assemble(instantiate(ComponentKind::TwoPhaseColdPlate, "plate"));
  CHECK(plate.state_count() == 3);
  CHECK(plate.state_names()[0] == "Refrigerant[1]");

  DynamicSystem virt = assemble(instantiate(ComponentKind::VirtualElement, "virt"));
  CHECK(virt.is_dae());
}

TEST_CASE("assemble and simulate reject contract violations") {
  DynamicSystem sys = assemble(conduction_pair());
  Eigen::VectorXd wrong(3);
  wrong << 1, 2, 3;
  CHECK_THROWS_AS(simulate_ode(sys, wrong, SignalSchedule{}, 0.0, 1.0, 1e-2),
                  SimulationError);
  CHECK_THROWS_AS(
      simulate_ode(sys, sys.initial_state(), SignalSchedule{}, 0.0, 1.0, 0.0),
      SimulationError);

  DynamicSystem dae = assemble(instantiate(ComponentKind::VirtualElement, "virt"));
  CHECK_THROWS_AS(simulate_ode(dae, dae.initial_state(), SignalSchedule{}, 0.0, 1.0, 1e-2),
                  SimulationError);
  CHECK_THROWS_AS(dae.f(dae.initial_state(), Eigen::VectorXd(0),
                        Eigen::VectorXd::Zero(dae.disturbance_count()), 0.0),
                  SimulationError);
}

TEST_CASE("singular constant capacitance is rejected at assembly") {
  GraphBuilder b("bad");
  VertexSpec v;
  v.name = "n";
  v.equations.push_back(Expression::parse("0*x_dot + x_dot - x_dot"));
  v.initial_condition = std::vector<double>{0.0};
  b.add_vertex(v);
  CHECK_THROWS_AS(assemble(b.build()), SimulationError);
}

TEST_CASE("state-dependent singular capacitance is reported during integration") {
  // lambda x x_dot capacitance hits zero when the state crosses zero.
  Graph msd = with_initial_conditions(instantiate(ComponentKind::MassSpringDamper, "msd"),
                                      {{"Mass Velocity", {0.0}}, {"Spring Force", {0.0}}});
  DynamicSystem sys = assemble(msd);
  CHECK_THROWS_WITH_AS(
      simulate_ode(sys, sys.initial_state(), SignalSchedule{}, 0.0, 0.1, 1e-3),
      doctest::Contains("singular capacitance"), SimulationError);
}

TEST_CASE("non-finite states are reported with the state name and step") {
  // Reverse pressure drives the duct radicand negative: sqrt -> NaN.
  Graph pipe = instantiate(ComponentKind::Pipe, "pipe");
  DynamicSystem sys = assemble(pipe);
  SignalSchedule schedule = SignalSchedule::constants(
      {{"Upstream Pressure", 1.0e5}, {"Downstream Pressure", 9e5}});
  CHECK_THROWS_WITH_AS(simulate_ode(sys, sys.initial_state(), schedule, 0.0, 0.01, 1e-3),
                       doctest::Contains("non-finite state"), SimulationError);
}

TEST_CASE("signal schedules interpolate linearly and hold flat outside") {
  SignalSchedule s;
  s.set_series("sig", {0.0, 1.0, 2.0}, {10.0, 20.0, 0.0});
  CHECK(s.value("sig", -1.0) == 10.0);
  CHECK(s.value("sig", 0.5) == 15.0);
  CHECK(s.value("sig", 1.5) == 10.0);
  CHECK(s.value("sig", 5.0) == 0.0);
  CHECK(s.value("missing", 1.0, 7.0) == 7.0);

  SignalSchedule pwc;
  pwc.set_series("sig", {0.0, 1.0}, {3.0, 9.0}, true);
  CHECK(pwc.value("sig", 0.99) == 3.0);
  CHECK(pwc.value("sig", 1.0) == 9.0);

  CHECK_THROWS_AS(s.set_series("bad", {1.0, 0.5}, {0.0, 0.0}), SimulationError);
}

TEST_CASE("input schedules resolve through origin names after combine") {
  Graph sys_graph = combine("Sys",
                            {instantiate(ComponentKind::Tank, "mainTank"),
                             instantiate(ComponentKind::HeatLoad, "heatLoad")},
                            {{{"mainTank", 2}, {"heatLoad", 1}}});
  DynamicSystem sys = assemble(sys_graph);
  SignalSchedule by_origin;
  by_origin.set_constant("mainTank.u2", 0.7);
  Eigen::VectorXd u = sys.inputs_at(by_origin, 0.0);
  CHECK(u[1] == 0.7);  // global u2 descends from mainTank.u2
  SignalSchedule by_var;
  by_var.set_constant("u2", 0.9);
  CHECK(sys.inputs_at(by_var, 0.0)[1] == 0.9);
}
