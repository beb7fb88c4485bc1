#pragma once

// Control-oriented analysis and design optimization: linearization about an
// operating point (A, B, Z), structural passivity checks on edge equations,
// passivity-index accumulation, design-variable augmentation of vertex and
// edge equations, objective evaluation by forward simulation, and a
// deterministic elitist genetic algorithm.

#include "energraph/graph.hpp"
#include "energraph/simulate.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace energraph {

class AnalysisError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Linearization
// ---------------------------------------------------------------------------

/// x_dot ~= A x + B u + Z about (x0, u0) with disturbances frozen at d0.
/// Z = f(x0, u0) - A x0 - B u0 holds exactly by construction.
struct LinearModel {
  Eigen::MatrixXd a;
  Eigen::MatrixXd b;
  Eigen::VectorXd z;
  Eigen::VectorXd x0, u0, d0;
  std::vector<std::string> notes;  // finite-difference fallbacks taken
};

LinearModel linearize(const DynamicSystem& sys, const Eigen::VectorXd& x0,
                      const Eigen::VectorXd& u0, const Eigen::VectorXd& d0);

// ---------------------------------------------------------------------------
// Passivity
// ---------------------------------------------------------------------------

/// Decomposition of one flow entry as offset + sum(gain_k * u_k); affine is
/// false when any second derivative with respect to an input fails to vanish.
struct AffineFlowReport {
  int edge = 0;   // 1-based
  int entry = 1;  // 1-based
  bool affine = true;
  Expression offset;
  std::vector<std::pair<std::string, Expression>> gains;
};

struct PassivityFormReport {
  bool all_affine = true;
  std::vector<AffineFlowReport> flows;
};

PassivityFormReport passivity_form_check(const Graph& g);

/// Accumulated passivity z(t) = integral of u^T y by trapezoidal rule;
/// violation is flagged when max z(t) exceeds beta.
struct PassivityTrace {
  std::vector<double> time;
  std::vector<double> z;
  double beta = 0.0;
  bool violation = false;
};

PassivityTrace passivity_index(const Eigen::MatrixXd& u_series,
                               const Eigen::MatrixXd& y_series,
                               const std::vector<double>& grid, double beta);

// ---------------------------------------------------------------------------
// Design problems
// ---------------------------------------------------------------------------

struct DesignVariable {
  std::string name;  // must be a valid symbol; referenced by scaling/objective
  double lower = 0.0;
  double upper = 1.0;
  bool discrete = false;
  std::vector<double> levels;  // discrete values when discrete
};

/// u_input = clamp(gain * (reference - x_state)). gain_var/reference_var name
/// controller variables that override the constants.
struct ProportionalLaw {
  int input = 1;  // 1-based
  int state = 1;  // 1-based
  double gain = 0.0;
  std::string gain_var;
  double reference = 0.0;
  std::string reference_var;
  double min = -std::numeric_limits<double>::infinity();
  double max = std::numeric_limits<double>::infinity();
};

/// u = clamp(K x + b) elementwise.
struct AffineLaw {
  Eigen::MatrixXd k;
  Eigen::VectorXd b;
  double min = -std::numeric_limits<double>::infinity();
  double max = std::numeric_limits<double>::infinity();
};

struct ControlLaw {
  enum class Kind { OpenLoop, Proportional, Affine };
  Kind kind = Kind::OpenLoop;
  std::vector<ProportionalLaw> proportional;
  AffineLaw affine;
};

struct DesignProblem {
  Graph baseline;
  std::vector<DesignVariable> theta;  // plant design variables
  std::vector<DesignVariable> phi;    // controller variables
  std::map<int, Expression> vertex_scaling;  // 1-based vertex -> psi_c(theta)
  std::map<int, Expression> edge_scaling;    // 1-based edge -> psi(theta)
  ControlLaw control;
  /// Objective integrand over x<i> (global state order), u<k>, t, and the
  /// design/controller variable names.
  Expression objective;
  Eigen::VectorXd x0;      // empty: use the graph's initial conditions
  SignalSchedule signals;  // open-loop inputs and disturbance profiles
  double t_final = 1.0;
  double dt = 1e-2;
};

/// Scales each vertex equation by psi_c and each flow entry by psi evaluated
/// at theta. Scaling by exactly 1 folds away (the baseline trees are reused
/// unchanged); scaling by 0 removes the edge's contribution. A nonpositive
/// psi_c on a dynamic vertex throws AnalysisError.
Graph augment_design(const Graph& g, const DesignProblem& problem,
                     std::span<const double> theta);

struct ObjectiveResult {
  double value = std::numeric_limits<double>::infinity();
  std::string note;  // diagnostic when the simulation was infeasible
};

/// Forward-simulates the augmented system under the control law and
/// integrates the objective by trapezoidal quadrature; solver failures map
/// to +infinity with the failure message in the note.
ObjectiveResult evaluate_objective(const DesignProblem& problem,
                                   std::span<const double> theta,
                                   std::span<const double> phi);

// ---------------------------------------------------------------------------
// Genetic algorithm
// ---------------------------------------------------------------------------

struct OptimizeEntry {
  int generation = 0;
  int member = 0;
  std::vector<double> theta;
  std::vector<double> phi;
  double objective = 0.0;
};

struct OptimizeResult {
  std::vector<double> theta;
  std::vector<double> phi;
  double objective = std::numeric_limits<double>::infinity();
  std::vector<OptimizeEntry> history;  // every evaluation, generation-major
};

/// Elitist generational GA: population 16, tournament selection (k=3),
/// uniform crossover (p=0.5), Gaussian mutation with sigma = 0.1 x bound
/// width clipped to bounds, discrete genes resampled with probability 0.2.
/// Runs budget/16 generations. Deterministic for a fixed seed; candidate
/// evaluations may run concurrently (threads = 0 picks the hardware count,
/// 1 forces serial) without changing the result.
OptimizeResult optimize(const DesignProblem& problem, std::uint64_t seed, int budget,
                        int threads = 0);

}  // namespace energraph
