#pragma once

// File formats and human-readable output: versioned .model JSON documents
// (component and system definitions), fixed-width reports, DOT drawing
// export, equation export, and the CSV formats for trajectories, signals,
// linearizations, and optimization histories. All numeric CSV output uses
// 17 significant digits so values round-trip exactly.

#include "energraph/analysis.hpp"
#include "energraph/components.hpp"
#include "energraph/compose.hpp"
#include "energraph/graph.hpp"
#include "energraph/simulate.hpp"

#include <map>
#include <string>
#include <variant>
#include <vector>

namespace energraph {

class IoError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Model files
// ---------------------------------------------------------------------------

/// Component reference inside a system definition: either a catalog kind or
/// another model file (exactly one of catalog/file is set).
struct SystemComponent {
  std::string name;
  std::string catalog;
  ComponentOptions options;
  std::string file;
};

struct SystemDefinition {
  std::string name;
  std::vector<SystemComponent> components;
  std::vector<ConnectionSpec> connections;
  std::vector<std::pair<std::string, std::string>> input_common_rules;
  std::map<std::string, std::vector<double>> initial_conditions;
};

struct ModelDocument {
  std::variant<Graph, SystemDefinition> content;
  bool is_system() const { return std::holds_alternative<SystemDefinition>(content); }
};

/// Loads a .model document. Schema violations and unknown fields are
/// rejected with a path-to-field diagnostic.
ModelDocument load_model(const std::string& path);

/// Loads a document and realizes it into a graph (system definitions are
/// combined, input_common rules applied, initial conditions overridden).
/// Component file references resolve relative to the document's directory.
Graph load_graph(const std::string& path);

Graph realize_system(const SystemDefinition& def, const std::string& base_dir);

void save_model(const Graph& g, const std::string& path);

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

enum class ReportKind { Graph, Parameter, Input, Port, InitCond, Full };

ReportKind report_kind_from_string(const std::string& text);

/// Fixed-width tabular report; deterministic ordering (element index
/// ascending), columns sized to the longest cell.
std::string render_report(const Graph& g, ReportKind kind);

// ---------------------------------------------------------------------------
// Drawing and equations
// ---------------------------------------------------------------------------

/// DOT description: dynamic vertices solid, external dashed, algebraic
/// double-circled; edges directed tail -> head and labeled by name.
std::string export_drawing(const Graph& g);

/// One line per dynamic state: `C_expr * x<i>_dot [+ ...] = signed flows`,
/// with vertex/edge locals rewritten over global state symbols x<i> and
/// disturbance symbols d<k> (legend in the leading comment lines).
/// substitute_params replaces non-design scalar parameters by literals;
/// design variables always stay symbolic.
std::string export_equations(const Graph& g, bool substitute_params);

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

void write_trajectory_csv(const Trajectory& traj, const std::string& path);
void write_audit_csv(const EnergyAudit& audit, const std::string& path);

/// Signals file: first column `time`, remaining columns named series
/// (piecewise-linear interpolation).
SignalSchedule load_signals_csv(const std::string& path);

/// Rows `matrix,row,col,value` covering A (row-major), B, and Z.
void write_linear_model_csv(const LinearModel& model, const std::string& path);

void write_history_csv(const OptimizeResult& result, const DesignProblem& problem,
                       const std::string& path);

// ---------------------------------------------------------------------------
// Optimization problem files
// ---------------------------------------------------------------------------

DesignProblem load_problem(const std::string& path);

}  // namespace energraph
