#include "energraph/fluid.hpp"

#include <algorithm>
#include <string>

namespace energraph {

FluidState FluidProps::operator()(double p, double h) const {
  if (p < p_min || p > p_max)
    throw FluidDomainError("pressure " + std::to_string(p) + " Pa outside property domain [" +
                           std::to_string(p_min) + ", " + std::to_string(p_max) + "]");
  if (h < h_min || h > h_max)
    throw FluidDomainError("enthalpy " + std::to_string(h) + " J/kg outside property domain [" +
                           std::to_string(h_min) + ", " + std::to_string(h_max) + "]");
  return eval(p, h);
}

FluidProps synthetic_refrigerant() {
  constexpr double rho_0 = 500.0;
  constexpr double drho_dp = 1e-5;
  constexpr double drho_dh = -1e-3;
  constexpr double p_ref = 1e5;
  constexpr double cp_liquid = 1400.0;
  constexpr double cp_vapor = 900.0;

  FluidProps props;
  props.p_min = 1e5;
  props.p_max = 1e6;
  props.h_min = 1e5;
  props.h_max = 5e5;
  props.eval = [=](double p, double h) {
    FluidState s;
    s.rho = rho_0 + drho_dp * p + drho_dh * h;
    s.drho_dp = drho_dp;
    s.drho_dh = drho_dh;

    const double t_sat = 250.0 + 5e-5 * (p - p_ref);
    const double h_liquid = 1.6e5 + 0.04 * (p - p_ref);
    const double h_vapor = 3.8e5 + 0.02 * (p - p_ref);
    s.quality = std::clamp((h - h_liquid) / (h_vapor - h_liquid), 0.0, 1.0);
    if (h < h_liquid)
      s.temperature = t_sat - (h_liquid - h) / cp_liquid;
    else if (h > h_vapor)
      s.temperature = t_sat + (h - h_vapor) / cp_vapor;
    else
      s.temperature = t_sat;
    return s;
  };
  return props;
}

}  // namespace energraph
