#pragma once

// Assembles a Graph or StitchedSystem into an executable DynamicSystem and
// integrates it: classical fixed-step RK4 for ODE-form systems, implicit
// Euler with damped Newton iteration for DAE (mass-matrix) systems.
//
// The state vector x holds the dynamic and algebraic vertex states in graph
// order (for stitched systems the chain's algebraic states come first, then
// the graph states). Inputs u follow the graph's input list; disturbances d
// are the external-vertex states plus any stitched boundary conditions, in
// the order reported by disturbance_names(). Equations evaluate against a
// compiled slot machine, so a DynamicSystem is immutable and cheap to share;
// each simulate call owns its mutable integration state and identical inputs
// produce bit-identical trajectories.

#include "energraph/compose.hpp"
#include "energraph/graph.hpp"

#include <Eigen/Dense>

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace energraph {

class SimulationError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Piecewise signal samples per input/disturbance name. Interpolation is
/// piecewise linear by default (or held piecewise constant), flat outside
/// the sampled range. Unlisted names resolve to the fallback value.
struct SignalSchedule {
  struct Series {
    std::vector<double> times;
    std::vector<double> values;
    bool piecewise_constant = false;
  };
  std::map<std::string, Series> series;

  SignalSchedule() = default;
  static SignalSchedule constants(const std::map<std::string, double>& values);

  void set_constant(const std::string& name, double value);
  void set_series(const std::string& name, std::vector<double> times,
                  std::vector<double> values, bool piecewise_constant = false);
  bool has(const std::string& name) const { return series.count(name) != 0; }
  double value(const std::string& name, double t, double fallback = 0.0) const;
};

struct Trajectory {
  std::vector<double> time;
  Eigen::MatrixXd states;  // rows x state count
  Eigen::MatrixXd inputs;  // rows x input count
  Eigen::MatrixXd flows;   // rows x flow entry count
  // Audit channels: path-integral stored energy and net external power.
  Eigen::VectorXd stored_energy;
  Eigen::VectorXd external_power;
  std::vector<std::string> state_names;
  std::vector<std::string> input_names;
  std::vector<std::string> flow_names;

  int rows() const { return static_cast<int>(time.size()); }
};

/// Closed-loop input source: u = policy(t, x, d).
using InputPolicy =
    std::function<Eigen::VectorXd(double t, const Eigen::VectorXd& x, const Eigen::VectorXd& d)>;

struct JacobianResult {
  Eigen::MatrixXd dfdx;
  Eigen::MatrixXd dfdu;
  std::vector<std::string> notes;  // finite-difference fallbacks taken
};

class DynamicSystem {
public:
  DynamicSystem() = default;

  const std::string& name() const;
  bool is_dae() const;
  int state_count() const;
  int input_count() const;
  int disturbance_count() const;
  int flow_count() const;

  const std::vector<std::string>& state_names() const;
  const std::vector<std::string>& input_names() const;
  const std::vector<std::string>& disturbance_names() const;
  const std::vector<std::string>& flow_names() const;

  /// 0/1 diagonal of the DAE mass matrix (1 on dynamic state rows).
  Eigen::VectorXd mass_diagonal() const;

  /// Signed structure matrix W mapping flow entries to state rows, i.e.
  /// -(expanded partitioned incidence) with exogenous dangling columns
  /// included: C'(x) x_dot = W Gamma - offsets.
  Eigen::MatrixXd structure_matrix() const;

  /// Total lookup-table extrapolations seen by this system's tables so far;
  /// nonzero counts surface as warnings after simulation.
  long table_extrapolations() const;

  /// Initial conditions gathered from the source graphs (algebraic chain
  /// states start at 0 until projected). Throws if a dynamic state has no
  /// assigned initial condition.
  Eigen::VectorXd initial_state() const;

  /// State derivative of the ODE form; throws SimulationError for DAE
  /// systems or on a singular capacitance block.
  Eigen::VectorXd f(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                    const Eigen::VectorXd& d, double t) const;

  /// All edge flow entries at the given point.
  Eigen::VectorXd flows(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                        const Eigen::VectorXd& d, double t) const;

  /// DAE residual R(x, xdot, u, d, t); zero rows of the mass diagonal are
  /// the algebraic constraints.
  Eigen::VectorXd dae_residual(const Eigen::VectorXd& x, const Eigen::VectorXd& xdot,
                               const Eigen::VectorXd& u, const Eigen::VectorXd& d,
                               double t) const;

  /// Analytic Jacobians of f (symbolic partials compiled at assembly,
  /// entry-wise finite-difference fallback for table lookups).
  JacobianResult jacobians(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                           const Eigen::VectorXd& d, double t) const;

  /// Path-integral stored quantity used by the energy audit.
  double stored_energy(const Eigen::VectorXd& x) const;

  /// Net power crossing the system boundary (flows touching external
  /// vertices or the environment).
  double external_power(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                        const Eigen::VectorXd& d, double t) const;

  /// Resolves the disturbance vector from a schedule at time t.
  Eigen::VectorXd disturbances_at(const SignalSchedule& schedule, double t) const;
  /// Resolves the input vector from a schedule at time t (series may be
  /// keyed by input var or by its recorded origin name).
  Eigen::VectorXd inputs_at(const SignalSchedule& schedule, double t) const;

  struct Impl;
  const Impl& impl() const { return *impl_; }

private:
  friend DynamicSystem assemble(const Graph&);
  friend DynamicSystem assemble(const StitchedSystem&);
  std::shared_ptr<const Impl> impl_;
};

/// Binds evaluators to the graph's parameter values. Throws SimulationError
/// on unresolvable parameters or a singular constant capacitance block.
DynamicSystem assemble(const Graph& g);
DynamicSystem assemble(const StitchedSystem& s);

Trajectory simulate_ode(const DynamicSystem& sys, const Eigen::VectorXd& x0,
                        const SignalSchedule& schedule, double t0, double t1, double dt);
Trajectory simulate_ode(const DynamicSystem& sys, const Eigen::VectorXd& x0,
                        const InputPolicy& policy, const SignalSchedule& disturbances,
                        double t0, double t1, double dt);

/// Implicit Euler with damped Newton (step halved up to 8 times on residual
/// increase); at t0 the algebraic states are projected onto the constraint
/// manifold by a Newton solve of the algebraic rows alone.
Trajectory simulate_dae(const DynamicSystem& sys, const Eigen::VectorXd& x0,
                        const SignalSchedule& schedule, double t0, double t1, double dt,
                        double newton_tol = 1e-10, int max_iter = 25);
Trajectory simulate_dae(const DynamicSystem& sys, const Eigen::VectorXd& x0,
                        const InputPolicy& policy, const SignalSchedule& disturbances,
                        double t0, double t1, double dt, double newton_tol = 1e-10,
                        int max_iter = 25);

struct EnergyAudit {
  std::vector<double> time;
  Eigen::VectorXd stored_energy;
  Eigen::VectorXd external_power;
  /// |E(t) - E(0) - integral of external power| / max(|E(0)|, 1).
  Eigen::VectorXd drift;
  double max_drift = 0.0;
};

EnergyAudit energy_audit(const Trajectory& traj, const DynamicSystem& sys);

}  // namespace energraph
