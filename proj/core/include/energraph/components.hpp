#pragma once

// Prebuilt component graphs spanning the thermal-fluid, two-phase, and
// electro-mechanical domains, plus the closed-form physics helpers their
// equations are built from. Topologies, equations, default parameters,
// inputs and ports for every kind are enumerated in docs/catalog.md; default
// parameter values are desk-scale constants for well-conditioned simulation,
// not physical truth.

#include "energraph/fluid.hpp"
#include "energraph/graph.hpp"

#include <Eigen/Dense>

namespace energraph {

enum class ComponentKind {
  Tank,
  HeatLoad,
  Pipe,
  Pump,
  Reservoir,
  SplitJunction,
  MixJunction,
  TwoPhaseColdPlate,
  MassSpringDamper,
  BuckConverter,
  DcMotor,
  LossElement,
  ConversionElement,
  VirtualElement,
};

const char* to_string(ComponentKind kind);
ComponentKind component_kind_from_string(const std::string& text);
const std::vector<ComponentKind>& all_component_kinds();

struct ComponentOptions {
  /// Control volumes for the two-phase cold plate (series chain).
  int discretization = 1;
  /// Port domain label for the generic loss/conversion/virtual elements.
  std::string domain = "Mechanical";
};

/// Builds a catalog component graph. Throws GraphError on an unknown kind or
/// invalid options. Every catalog graph passes validate() with zero errors.
Graph instantiate(ComponentKind kind, const std::string& name,
                  const ComponentOptions& options = {});

// ---------------------------------------------------------------------------
// Physics helpers
// ---------------------------------------------------------------------------

class PhysicsError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Advective heat transfer mdot * cp * T_tail. Flow must align with the
/// edge orientation, so mdot < 0 is rejected.
double advection_power(double mdot, double cp, double t_tail);

/// Convective heat transfer hA * (T_tail - T_head).
double convection_power(double ha, double t_tail, double t_head);

/// Duct mass flow rho * A * sqrt(2 (p_tail - p_head + rho g dz) / (rho fLDK)).
/// A negative radicand means the pressure gradient opposes the edge
/// orientation and raises a reverse-pressure PhysicsError.
double duct_mass_flow(double rho, double area, double p_tail, double p_head, double dz,
                      double f_ld_kl, double g);

using PumpMap = LookupTable2D;  // head H (m) over (omega, p_head - p_tail)

/// Centrifugal pump mass flow rho * A * sqrt(2 g (H - (p_head - p_tail)/(rho g)))
/// with the head H taken from the empirical map. A pressure rise beyond the
/// available head raises a stalled-pump PhysicsError.
double pump_mass_flow(double rho, double area, const PumpMap& head_map, double omega,
                      double p_tail, double p_head, double g);

/// Two-phase capacitance block for state order (h, p):
///   [[Phi2, Phi1], [drho_dh V, drho_dp V]]
/// with Phi1 = (drho_dp h - 1) V and Phi2 = (drho_dh h + rho) V. A block
/// whose determinant vanishes against its entry scale raises a
/// degenerate-fluid PhysicsError.
Eigen::Matrix2d two_phase_capacitance(double p, double h, double volume,
                                      const FluidProps& props);

}  // namespace energraph
