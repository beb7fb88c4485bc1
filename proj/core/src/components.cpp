#include "energraph/components.hpp"

#include <cmath>

namespace energraph {

const char* to_string(ComponentKind kind) {
  switch (kind) {
    case ComponentKind::Tank: return "tank";
    case ComponentKind::HeatLoad: return "heat_load";
    case ComponentKind::Pipe: return "pipe";
    case ComponentKind::Pump: return "pump";
    case ComponentKind::Reservoir: return "reservoir";
    case ComponentKind::SplitJunction: return "split_junction";
    case ComponentKind::MixJunction: return "mix_junction";
    case ComponentKind::TwoPhaseColdPlate: return "two_phase_cold_plate";
    case ComponentKind::MassSpringDamper: return "mass_spring_damper";
    case ComponentKind::BuckConverter: return "buck_converter";
    case ComponentKind::DcMotor: return "dc_motor";
    case ComponentKind::LossElement: return "loss_element";
    case ComponentKind::ConversionElement: return "conversion_element";
    case ComponentKind::VirtualElement: return "virtual_element";
  }
  return "?";
}

const std::vector<ComponentKind>& all_component_kinds() {
  static const std::vector<ComponentKind> kinds = {
      ComponentKind::Tank,          ComponentKind::HeatLoad,
      ComponentKind::Pipe,          ComponentKind::Pump,
      ComponentKind::Reservoir,     ComponentKind::SplitJunction,
      ComponentKind::MixJunction,   ComponentKind::TwoPhaseColdPlate,
      ComponentKind::MassSpringDamper, ComponentKind::BuckConverter,
      ComponentKind::DcMotor,       ComponentKind::LossElement,
      ComponentKind::ConversionElement, ComponentKind::VirtualElement,
  };
  return kinds;
}

ComponentKind component_kind_from_string(const std::string& text) {
  for (ComponentKind k : all_component_kinds())
    if (text == to_string(k)) return k;
  throw GraphError("unknown component kind '" + text + "'");
}

// ---------------------------------------------------------------------------
// Physics helpers
// ---------------------------------------------------------------------------

double advection_power(double mdot, double cp, double t_tail) {
  if (mdot < 0.0)
    throw PhysicsError("advection mass flow must align with the edge orientation (mdot >= 0)");
  return mdot * cp * t_tail;
}

double convection_power(double ha, double t_tail, double t_head) {
  if (ha < 0.0) throw PhysicsError("convective conductance hA must be nonnegative");
  return ha * (t_tail - t_head);
}

double duct_mass_flow(double rho, double area, double p_tail, double p_head, double dz,
                      double f_ld_kl, double g) {
  if (rho <= 0.0 || area <= 0.0 || f_ld_kl <= 0.0)
    throw PhysicsError("duct flow requires positive density, area, and loss factor");
  const double radicand = 2.0 * (p_tail - p_head + rho * g * dz) / (rho * f_ld_kl);
  if (radicand < 0.0)
    throw PhysicsError("reverse pressure across duct: net driving head is negative");
  return rho * area * std::sqrt(radicand);
}

double pump_mass_flow(double rho, double area, const PumpMap& head_map, double omega,
                      double p_tail, double p_head, double g) {
  if (rho <= 0.0 || area <= 0.0) throw PhysicsError("pump flow requires positive density and area");
  const double rise = p_head - p_tail;
  const double head = head_map.sample(omega, rise);
  const double radicand = 2.0 * g * (head - rise / (rho * g));
  if (radicand < 0.0)
    throw PhysicsError("stalled pump: pressure rise exceeds the available head");
  return rho * area * std::sqrt(radicand);
}

Eigen::Matrix2d two_phase_capacitance(double p, double h, double volume,
                                      const FluidProps& props) {
  const FluidState s = props(p, h);
  const double phi1 = (s.drho_dp * h - 1.0) * volume;
  const double phi2 = (s.drho_dh * h + s.rho) * volume;
  Eigen::Matrix2d c;
  c << phi2, phi1, s.drho_dh * volume, s.drho_dp * volume;
  const double det = c(0, 0) * c(1, 1) - c(0, 1) * c(1, 0);
  const double scale = std::max(std::abs(c(0, 0) * c(1, 1)), std::abs(c(0, 1) * c(1, 0)));
  if (std::abs(det) <= 1e-12 * scale || scale == 0.0)
    throw PhysicsError("degenerate fluid: two-phase capacitance block is singular");
  return c;
}

// ---------------------------------------------------------------------------
// Catalog builders
// ---------------------------------------------------------------------------

namespace {

Parameter scalar_param(std::string description, std::string var, double value,
                       std::string units, bool design = false) {
  Parameter p;
  p.description = std::move(description);
  p.var = std::move(var);
  p.value = value;
  p.units = std::move(units);
  p.is_design_variable = design;
  return p;
}

Parameter state_param(std::string description, std::string var, int vertex, int state,
                      std::string units) {
  Parameter p;
  p.description = std::move(description);
  p.var = std::move(var);
  p.value = StateRef{vertex, state};
  p.units = std::move(units);
  return p;
}

InputSpec input_spec(std::string description, std::string var, std::string units) {
  InputSpec i;
  i.description = std::move(description);
  i.var = std::move(var);
  i.units = std::move(units);
  return i;
}

VertexSpec dynamic_vertex(std::string name, std::string equation, std::string units,
                          std::vector<double> ic) {
  VertexSpec v;
  v.name = std::move(name);
  v.kind = VertexKind::Dynamic;
  v.equations.push_back(Expression::parse(equation));
  v.units.push_back(std::move(units));
  v.initial_condition = std::move(ic);
  return v;
}

VertexSpec external_vertex(std::string name, std::string units) {
  VertexSpec v;
  v.name = std::move(name);
  v.kind = VertexKind::External;
  v.units.push_back(std::move(units));
  return v;
}

Graph build_tank(const std::string& name) {
  GraphBuilder b(name);
  b.add_vertex(dynamic_vertex("Fluid Mass", "x_dot", "kg", {6000.0}));
  b.add_vertex(dynamic_vertex("Fluid Temperature", "cp_f*M_t*x_dot", "K", {300.0}));
  b.add_vertex(external_vertex("Source Temperature", "K"));
  b.add_edge("Mass In", "u1", 0, 1, true);
  b.add_edge("Mass Out", "u2", 1, 0, true);
  b.add_edge("Advection In", "cp_f*u1*xt", 3, 2, true);
  b.add_edge("Advection Out", "cp_f*u2*xt", 2, 0, true);
  // Enthalpy carried by the net stored-mass change; keeps the temperature
  // state honest when inflow and outflow differ.
  b.add_edge("Mass Displacement", "cp_f*(u1-u2)*xt", 2, 0, true);
  b.add_parameter(scalar_param("Fluid Specific Heat", "cp_f", 3300.0, "J/(kg*K)"));
  b.add_parameter(state_param("Tank Fluid Mass State", "M_t", 1, 1, "kg"));
  b.add_input(input_spec("Inlet Mass Flow", "u1", "kg/s"));
  b.add_input(input_spec("Outlet Mass Flow", "u2", "kg/s"));
  b.add_port({PortType::EdgeConnection, 3, "Thermal"});
  b.add_port({PortType::EdgeConnection, 4, "Thermal"});
  return b.build();
}

Graph build_heat_load(const std::string& name) {
  GraphBuilder b(name);
  b.add_vertex(dynamic_vertex("Fluid Temperature", "cp_f*V_f*rho_f*x_dot", "K", {300.0}));
  b.add_vertex(dynamic_vertex("Wall Temperature", "C_w*x_dot", "K", {320.0}));
  b.add_vertex(external_vertex("Inlet Temperature", "K"));
  b.add_edge("Advection In", "cp_f*u1*xt", 3, 1, true);
  b.add_edge("Advection Out", "cp_f*u1*xt", 1, 0, true);
  b.add_edge("Convection", "hA_s*(xt-xh)", 2, 1, false);
  b.add_edge("Heat Input", "u2", 0, 2, true);
  b.add_parameter(scalar_param("Fluid Specific Heat", "cp_f", 3300.0, "J/(kg*K)"));
  b.add_parameter(scalar_param("Fluid Volume", "V_f", 1e-3, "m^3"));
  b.add_parameter(scalar_param("Fluid Density", "rho_f", 1000.0, "kg/m^3"));
  b.add_parameter(scalar_param("Convective Conductance", "hA_s", 50.0, "W/K"));
  b.add_parameter(scalar_param("Wall Thermal Capacitance", "C_w", 2000.0, "J/K"));
  b.add_input(input_spec("Mass Flow", "u1", "kg/s"));
  b.add_input(input_spec("Device Heat Load", "u2", "W"));
  b.add_port({PortType::EdgeConnection, 1, "Thermal"});
  b.add_port({PortType::EdgeConnection, 2, "Thermal"});
  return b.build();
}

Graph build_pipe(const std::string& name) {
  GraphBuilder b(name);
  b.add_vertex(dynamic_vertex("Pressure", "(M_f/E_f)*x_dot", "Pa", {2e5}));
  b.add_vertex(external_vertex("Upstream Pressure", "Pa"));
  b.add_vertex(external_vertex("Downstream Pressure", "Pa"));
  const std::string duct = "rho_f*A_c*sqrt(2*(xt-xh+rho_f*g_c*dz)/(rho_f*fLDK))";
  b.add_edge("Duct In", duct, 2, 1, true);
  b.add_edge("Duct Out", duct, 1, 3, true);
  b.add_parameter(scalar_param("Fluid Density", "rho_f", 1000.0, "kg/m^3"));
  b.add_parameter(scalar_param("Cross Section Area", "A_c", 1e-4, "m^2"));
  b.add_parameter(scalar_param("Gravitational Acceleration", "g_c", 9.81, "m/s^2"));
  b.add_parameter(scalar_param("Inlet-Outlet Height Difference", "dz", 0.0, "m"));
  b.add_parameter(scalar_param("Friction and Minor Loss Factor", "fLDK", 2.0, "-"));
  b.add_parameter(scalar_param("Fluid Mass", "M_f", 1.0, "kg"));
  b.add_parameter(scalar_param("Bulk Modulus", "E_f", 1e7, "Pa"));
  b.add_port({PortType::EdgeConnection, 1, "Hydraulic"});
  b.add_port({PortType::EdgeConnection, 2, "Hydraulic"});
  return b.build();
}

LookupTable2D default_pump_map() {
  // Head (m) over speed (rad/s) x pressure rise (Pa):
  // H = 20 (omega/200)^2 - 0.3 dp / (rho g), sampled on a coarse grid.
  const std::vector<double> speeds = {0.0, 50.0, 100.0, 150.0, 200.0};
  const std::vector<double> rises = {0.0, 2.5e4, 5e4, 1e5, 2e5};
  std::vector<double> head;
  head.reserve(speeds.size() * rises.size());
  for (double w : speeds)
    for (double dp : rises)
      head.push_back(20.0 * (w / 200.0) * (w / 200.0) - 0.3 * dp / (1000.0 * 9.81));
  return LookupTable2D(speeds, rises, head);
}

Graph build_pump(const std::string& name) {
  GraphBuilder b(name);
  b.add_vertex(external_vertex("Suction Pressure", "Pa"));
  b.add_vertex(external_vertex("Discharge Pressure", "Pa"));
  b.add_edge("Pump Flow",
             "rho_f*A_c*sqrt(2*g_c*(H_map(u1,xh-xt)-(xh-xt)/(rho_f*g_c)))", 1, 2, false);
  b.add_parameter(scalar_param("Fluid Density", "rho_f", 1000.0, "kg/m^3"));
  b.add_parameter(scalar_param("Cross Section Area", "A_c", 1e-4, "m^2"));
  b.add_parameter(scalar_param("Gravitational Acceleration", "g_c", 9.81, "m/s^2"));
  Parameter map;
  map.description = "Pump Head Map";
  map.var = "H_map";
  map.value = default_pump_map();
  map.units = "m";
  b.add_parameter(std::move(map));
  b.add_input(input_spec("Pump Speed", "u1", "rad/s"));
  b.add_port({PortType::VertexConnection, 1, "Hydraulic"});
  b.add_port({PortType::VertexConnection, 2, "Hydraulic"});
  return b.build();
}

Graph build_reservoir(const std::string& name) {
  GraphBuilder b(name);
  b.add_vertex(dynamic_vertex("Reservoir Pressure", "(A_res/g_c)*x_dot", "Pa", {2e5}));
  b.add_vertex(external_vertex("Inlet Pressure", "Pa"));
  b.add_vertex(external_vertex("Outlet Pressure", "Pa"));
  const std::string duct = "rho_f*A_c*sqrt(2*(xt-xh+rho_f*g_c*dz)/(rho_f*fLDK))";
  b.add_edge("Duct In", duct, 2, 1, true);
  b.add_edge("Duct Out", duct, 1, 3, true);
  b.add_parameter(scalar_param("Fluid Density", "rho_f", 1000.0, "kg/m^3"));
  b.add_parameter(scalar_param("Duct Cross Section Area", "A_c", 1e-4, "m^2"));
  b.add_parameter(scalar_param("Reservoir Surface Area", "A_res", 0.05, "m^2"));
  b.add_parameter(scalar_param("Gravitational Acceleration", "g_c", 9.81, "m/s^2"));
  b.add_parameter(scalar_param("Inlet-Outlet Height Difference", "dz", 0.0, "m"));
  b.add_parameter(scalar_param("Friction and Minor Loss Factor", "fLDK", 2.0, "-"));
  b.add_port({PortType::EdgeConnection, 1, "Hydraulic"});
  b.add_port({PortType::EdgeConnection, 2, "Hydraulic"});
  b.add_port({PortType::VertexConnection, 1, "Hydraulic"});
  return b.build();
}

Graph build_split_junction(const std::string& name) {
  GraphBuilder b(name);
  b.add_vertex(dynamic_vertex("Junction Temperature", "cp_f*V_j*rho_f*x_dot", "K", {300.0}));
  b.add_vertex(external_vertex("Inlet Temperature", "K"));
  b.add_edge("Advection In", "cp_f*u3*xt", 2, 1, true);
  b.add_edge("Advection Out A", "cp_f*u1*xt", 1, 0, true);
  b.add_edge("Advection Out B", "cp_f*u2*xt", 1, 0, true);
  b.add_parameter(scalar_param("Fluid Specific Heat", "cp_f", 3300.0, "J/(kg*K)"));
  b.add_parameter(scalar_param("Junction Volume", "V_j", 2e-4, "m^3"));
  b.add_parameter(scalar_param("Fluid Density", "rho_f", 1000.0, "kg/m^3"));
  b.add_input(input_spec("Outlet A Mass Flow", "u1", "kg/s"));
  b.add_input(input_spec("Outlet B Mass Flow", "u2", "kg/s"));
  b.add_input(input_spec("Inlet Mass Flow", "u3", "kg/s"));
  b.add_port({PortType::EdgeConnection, 1, "Thermal"});
  b.add_port({PortType::EdgeConnection, 2, "Thermal"});
  b.add_port({PortType::EdgeConnection, 3, "Thermal"});
  return b.build();
}

Graph build_mix_junction(const std::string& name) {
  GraphBuilder b(name);
  b.add_vertex(dynamic_vertex("Junction Temperature", "cp_f*V_j*rho_f*x_dot", "K", {300.0}));
  b.add_vertex(external_vertex("Inlet Temperature A", "K"));
  b.add_vertex(external_vertex("Inlet Temperature B", "K"));
  b.add_edge("Advection In A", "cp_f*u1*xt", 2, 1, true);
  b.add_edge("Advection In B", "cp_f*u2*xt", 3, 1, true);
  b.add_edge("Advection Out", "cp_f*u3*xt", 1, 0, true);
  b.add_parameter(scalar_param("Fluid Specific Heat", "cp_f", 3300.0, "J/(kg*K)"));
  b.add_parameter(scalar_param("Junction Volume", "V_j", 2e-4, "m^3"));
  b.add_parameter(scalar_param("Fluid Density", "rho_f", 1000.0, "kg/m^3"));
  b.add_input(input_spec("Inlet A Mass Flow", "u1", "kg/s"));
  b.add_input(input_spec("Inlet B Mass Flow", "u2", "kg/s"));
  b.add_input(input_spec("Outlet Mass Flow", "u3", "kg/s"));
  b.add_port({PortType::EdgeConnection, 1, "Thermal"});
  b.add_port({PortType::EdgeConnection, 2, "Thermal"});
  b.add_port({PortType::EdgeConnection, 3, "Thermal"});
  return b.build();
}

LookupTable2D refrigerant_temperature_table() {
  const FluidProps props = synthetic_refrigerant();
  std::vector<double> p_grid, h_grid;
  for (int i = 0; i <= 9; ++i) p_grid.push_back(1e5 + i * 1e5);
  for (int j = 0; j <= 16; ++j) h_grid.push_back(1e5 + j * 2.5e4);
  std::vector<double> temps;
  temps.reserve(p_grid.size() * h_grid.size());
  for (double p : p_grid)
    for (double h : h_grid) temps.push_back(props(p, h).temperature);
  return LookupTable2D(p_grid, h_grid, temps);
}

Graph build_two_phase_cold_plate(const std::string& name, int volumes) {
  if (volumes < 1)
    throw GraphError("two_phase_cold_plate requires a discretization count >= 1");
  GraphBuilder b(name);

  // State order (h_r, p_r) per refrigerant volume. The capacitance rows
  // spell out the mass/energy balance expansion for the affine synthetic
  // refrigerant rho = a_rho + b_rho*p + c_rho*h:
  //   energy: Phi2 h_dot + Phi1 p_dot, mass: (drho_dh h_dot + drho_dp p_dot) V_r.
  VertexSpec refrigerant;
  refrigerant.kind = VertexKind::Dynamic;
  refrigerant.state_count = 2;
  refrigerant.equations.push_back(Expression::parse(
      "((a_rho+b_rho*x2+2*c_rho*x1)*V_r)*x1_dot + ((b_rho*x1-1)*V_r)*x2_dot"));
  refrigerant.equations.push_back(Expression::parse("(c_rho*V_r)*x1_dot + (b_rho*V_r)*x2_dot"));
  refrigerant.units = {"J/kg", "Pa"};
  refrigerant.initial_condition = std::vector<double>{2.8e5, 4e5};

  for (int i = 1; i <= volumes; ++i) {
    VertexSpec r = refrigerant;
    r.name = volumes == 1 ? std::string("Refrigerant")
                          : "Refrigerant " + std::to_string(i);
    b.add_vertex(std::move(r));
  }
  for (int i = 1; i <= volumes; ++i)
    b.add_vertex(dynamic_vertex(
        volumes == 1 ? std::string("Wall Temperature") : "Wall Temperature " + std::to_string(i),
        "Cw_r*x_dot", "K", {300.0}));

  const auto refr = [&](int i) { return i; };                  // vertex id of volume i
  const auto wall = [&](int i) { return volumes + i; };

  {
    EdgeSpec adv_in;
    adv_in.name = "Advection In";
    adv_in.external = true;
    adv_in.flows.push_back({Expression::parse("u1*u3"), 1, 1});
    adv_in.flows.push_back({Expression::parse("u1"), 1, 2});
    b.add_edge(std::move(adv_in), 0, refr(1));
  }
  for (int i = 1; i < volumes; ++i) {
    EdgeSpec adv;
    adv.name = "Advection " + std::to_string(i) + "-" + std::to_string(i + 1);
    adv.flows.push_back({Expression::parse("u1*xt1"), 1, 1});
    adv.flows.push_back({Expression::parse("u1"), 2, 2});
    b.add_edge(std::move(adv), refr(i), refr(i + 1));
  }
  {
    EdgeSpec adv_out;
    adv_out.name = "Advection Out";
    adv_out.external = true;
    adv_out.flows.push_back({Expression::parse("u2*xt1"), 1, 1});
    adv_out.flows.push_back({Expression::parse("u2"), 2, 2});
    b.add_edge(std::move(adv_out), refr(volumes), 0);
  }
  for (int i = 1; i <= volumes; ++i) {
    EdgeSpec conv;
    conv.name = volumes == 1 ? std::string("Refrigerant Convection")
                             : "Refrigerant Convection " + std::to_string(i);
    conv.flows.push_back({Expression::parse("hA_r*(xt-T_ref(xh2,xh1))"), 1, 1});
    b.add_edge(std::move(conv), wall(i), refr(i));
  }
  for (int i = 1; i <= volumes; ++i) {
    EdgeSpec heat;
    heat.name = volumes == 1 ? std::string("Wall Heat Input")
                             : "Wall Heat Input " + std::to_string(i);
    heat.external = true;
    heat.flows.push_back({Expression::parse("u4*inv_n"), 1, 1});
    b.add_edge(std::move(heat), 0, wall(i));
  }

  b.add_parameter(scalar_param("Density Offset", "a_rho", 500.0, "kg/m^3"));
  b.add_parameter(scalar_param("Density Pressure Slope", "b_rho", 1e-5, "kg/(m^3*Pa)"));
  b.add_parameter(scalar_param("Density Enthalpy Slope", "c_rho", -1e-3, "kg^2/(m^3*J)"));
  b.add_parameter(scalar_param("Volume per Control Volume", "V_r", 1e-3, "m^3"));
  b.add_parameter(scalar_param("Wall Thermal Capacitance", "Cw_r", 2000.0, "J/K"));
  b.add_parameter(scalar_param("Refrigerant Convective Conductance", "hA_r", 100.0, "W/K"));
  b.add_parameter(scalar_param("Inverse Control Volume Count", "inv_n", 1.0 / volumes, "-"));
  Parameter t_ref;
  t_ref.description = "Refrigerant Temperature Table";
  t_ref.var = "T_ref";
  t_ref.value = refrigerant_temperature_table();
  t_ref.units = "K";
  b.add_parameter(std::move(t_ref));

  b.add_input(input_spec("Inlet Mass Flow", "u1", "kg/s"));
  b.add_input(input_spec("Outlet Mass Flow", "u2", "kg/s"));
  b.add_input(input_spec("Inlet Enthalpy", "u3", "J/kg"));
  b.add_input(input_spec("Device Heat Load", "u4", "W"));
  b.add_port({PortType::EdgeConnection, 1, "Refrigerant"});
  b.add_port({PortType::EdgeConnection, volumes + 1, "Refrigerant"});
  return b.build();
}

Graph build_mass_spring_damper(const std::string& name) {
  GraphBuilder b(name);
  b.add_vertex(dynamic_vertex("Mass Velocity", "m_b*x*x_dot", "m/s", {1.0}));
  b.add_vertex(dynamic_vertex("Spring Force", "c_s*x*x_dot", "N", {0.5}));
  b.add_edge("Spring-Mass Transmission", "xh*xt", 1, 2, false);
  b.add_edge("Damper Loss", "b_d*xt^2", 1, 0, true);
  b.add_edge("Force Input", "u1*xh", 0, 1, true);
  b.add_parameter(scalar_param("Block Mass", "m_b", 1.0, "kg"));
  b.add_parameter(scalar_param("Spring Compliance", "c_s", 0.01, "m/N"));
  b.add_parameter(scalar_param("Damping Coefficient", "b_d", 0.5, "N*s/m"));
  b.add_input(input_spec("Applied Force", "u1", "N"));
  b.add_port({PortType::VertexConnection, 1, "Mechanical"});
  return b.build();
}

Graph build_buck_converter(const std::string& name) {
  GraphBuilder b(name);
  b.add_vertex(dynamic_vertex("Inductor Current", "L_i*x*x_dot", "A", {2.0}));
  b.add_vertex(dynamic_vertex("Capacitor Voltage", "C_o*x*x_dot", "V", {12.0}));
  b.add_vertex(external_vertex("Source Voltage", "V"));
  b.add_edge("Switch Conversion", "u1*xt*xh", 3, 1, true);
  b.add_edge("LC Transmission", "xt*xh", 1, 2, false);
  b.add_edge("Load Loss", "G_l*xt^2", 2, 0, true);
  b.add_parameter(scalar_param("Inductance", "L_i", 1e-3, "H"));
  b.add_parameter(scalar_param("Output Capacitance", "C_o", 1e-4, "F"));
  b.add_parameter(scalar_param("Load Conductance", "G_l", 0.5, "S"));
  b.add_input(input_spec("Duty Cycle", "u1", "-"));
  b.add_port({PortType::VertexConnection, 3, "Electrical"});
  b.add_port({PortType::VertexConnection, 2, "Electrical"});
  return b.build();
}

Graph build_dc_motor(const std::string& name) {
  GraphBuilder b(name);
  b.add_vertex(dynamic_vertex("Armature Current", "L_a*x*x_dot", "A", {5.0}));
  b.add_vertex(dynamic_vertex("Shaft Speed", "J_r*x*x_dot", "rad/s", {100.0}));
  b.add_edge("Drive Power", "u1*xh", 0, 1, true);
  b.add_edge("Electromechanical Conversion", "K_t*xt*xh", 1, 2, false);
  b.add_edge("Winding Loss", "R_a*xt^2", 1, 0, true);
  b.add_edge("Friction Loss", "b_f*xt^2", 2, 0, true);
  b.add_edge("Load Power", "u2*xt", 2, 0, true);
  b.add_parameter(scalar_param("Armature Inductance", "L_a", 1e-2, "H"));
  b.add_parameter(scalar_param("Rotor Inertia", "J_r", 0.05, "kg*m^2"));
  b.add_parameter(scalar_param("Torque Constant", "K_t", 0.1, "N*m/A"));
  b.add_parameter(scalar_param("Winding Resistance", "R_a", 0.5, "ohm"));
  b.add_parameter(scalar_param("Friction Coefficient", "b_f", 0.01, "N*m*s"));
  b.add_input(input_spec("Applied Voltage", "u1", "V"));
  b.add_input(input_spec("Load Torque", "u2", "N*m"));
  b.add_port({PortType::VertexConnection, 2, "Mechanical"});
  b.add_port({PortType::EdgeConnection, 5, "Mechanical"});
  return b.build();
}

Graph build_loss_element(const std::string& name, const std::string& domain) {
  GraphBuilder b(name);
  b.add_vertex(external_vertex("Element State", "-"));
  b.add_edge("Dissipation", "lam_p*xt^2", 1, 0, true);
  b.add_parameter(scalar_param("Characteristic Loss Property", "lam_p", 1.0, "-"));
  b.add_port({PortType::VertexConnection, 1, domain});
  return b.build();
}

Graph build_conversion_element(const std::string& name, const std::string& domain) {
  GraphBuilder b(name);
  b.add_vertex(external_vertex("Input State", "-"));
  b.add_vertex(external_vertex("Output State", "-"));
  b.add_edge("Conversion", "lam_p*xt*xh", 1, 2, false);
  b.add_parameter(scalar_param("Conversion Ratio", "lam_p", 1.0, "-"));
  b.add_port({PortType::VertexConnection, 1, domain});
  b.add_port({PortType::VertexConnection, 2, domain});
  return b.build();
}

Graph build_virtual_element(const std::string& name, const std::string& domain) {
  GraphBuilder b(name);
  VertexSpec virt;
  virt.name = "Virtual State";
  virt.kind = VertexKind::Algebraic;
  virt.equations.push_back(Expression::constant(0.0));
  virt.units = {"-"};
  virt.initial_condition = std::vector<double>{0.0};
  b.add_vertex(std::move(virt));
  b.add_vertex(external_vertex("Side A", "-"));
  b.add_vertex(external_vertex("Side B", "-"));
  b.add_edge("Coupling In", "xt*xh", 2, 1, false);
  b.add_edge("Coupling Out", "xt*xh", 1, 3, false);
  b.add_port({PortType::VertexConnection, 2, domain});
  b.add_port({PortType::VertexConnection, 3, domain});
  return b.build();
}

}  // namespace

Graph instantiate(ComponentKind kind, const std::string& name,
                  const ComponentOptions& options) {
  switch (kind) {
    case ComponentKind::Tank: return build_tank(name);
    case ComponentKind::HeatLoad: return build_heat_load(name);
    case ComponentKind::Pipe: return build_pipe(name);
    case ComponentKind::Pump: return build_pump(name);
    case ComponentKind::Reservoir: return build_reservoir(name);
    case ComponentKind::SplitJunction: return build_split_junction(name);
    case ComponentKind::MixJunction: return build_mix_junction(name);
    case ComponentKind::TwoPhaseColdPlate:
      return build_two_phase_cold_plate(name, options.discretization);
    case ComponentKind::MassSpringDamper: return build_mass_spring_damper(name);
    case ComponentKind::BuckConverter: return build_buck_converter(name);
    case ComponentKind::DcMotor: return build_dc_motor(name);
    case ComponentKind::LossElement: return build_loss_element(name, options.domain);
    case ComponentKind::ConversionElement:
      return build_conversion_element(name, options.domain);
    case ComponentKind::VirtualElement: return build_virtual_element(name, options.domain);
  }
  throw GraphError("unknown component kind");
}

}  // namespace energraph
