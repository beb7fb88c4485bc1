#pragma once

// Fluid property evaluation for two-phase components. The synthetic
// refrigerant is an analytic stand-in for tabulated property data: density
// is affine in pressure and enthalpy, so its thermodynamic derivatives are
// known exactly and property-consistency tests have a closed-form oracle.

#include <functional>
#include <stdexcept>

namespace energraph {

struct FluidState {
  double rho = 0.0;          // kg/m^3
  double drho_dp = 0.0;      // at constant enthalpy, kg/(m^3 Pa)
  double drho_dh = 0.0;      // at constant pressure, kg^2/(m^3 J)
  double temperature = 0.0;  // K
  double quality = 0.0;      // vapor mass fraction, clamped to [0, 1]
};

class FluidDomainError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Property evaluator over a documented (p, h) box. Calls outside the box
/// throw FluidDomainError. Evaluators are stateless and shareable.
struct FluidProps {
  std::function<FluidState(double p, double h)> eval;
  double p_min = 0.0;
  double p_max = 0.0;
  double h_min = 0.0;
  double h_max = 0.0;

  FluidState operator()(double p, double h) const;
};

/// Analytic refrigerant model: rho = 500 + 1e-5 * p - 1e-3 * h on
/// p in [1e5, 1e6] Pa, h in [1e5, 5e5] J/kg, with a linear saturation dome
/// for temperature and quality.
FluidProps synthetic_refrigerant();

}  // namespace energraph
