#pragma once

// Core data model: vertices, edges, parameters, inputs and ports, plus the
// incidence-matrix machinery, the multi-state S matrix, and the Khatri-Rao
// expansion used to assemble multi-state dynamics.
//
// Index convention: vertices and edges are addressed 1-based throughout the
// data model (edge endpoint pairs, ports, state references), matching the
// model file format and reports. An endpoint of 0 denotes the environment;
// such a dangling edge must be flagged external and represents an exogenous
// power flow. Matrices returned by the free functions below use ordinary
// 0-based Eigen indexing.
//
// Graphs are immutable values after construction: build them with
// GraphBuilder, which normalizes vertex ordering to (dynamic, algebraic,
// external) and remaps all stored indices accordingly.

#include "energraph/expr.hpp"
#include "energraph/table.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace energraph {

class GraphError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

enum class VertexKind { Dynamic, Algebraic, External };

const char* to_string(VertexKind kind);

struct VertexSpec {
  std::string name;
  VertexKind kind = VertexKind::Dynamic;
  /// One equation per state row (the left side of the conservation law),
  /// written over local symbols x/x_dot (single state) or x<k>/x<k>_dot.
  /// Dynamic rows must be linear in the state derivatives; algebraic rows
  /// omit them; external vertices carry no equations.
  std::vector<Expression> equations;
  int state_count = 1;
  std::vector<std::string> units;  // metadata only, one label per state
  std::optional<std::vector<double>> initial_condition;
};

/// One entry of an edge's flow vector. tail_state/head_state give the
/// 1-based state row of the endpoint vertex this entry drives, realizing
/// the 0/1 S-matrix rule entry by entry.
struct FlowEntry {
  Expression equation;
  int tail_state = 1;
  int head_state = 1;
};

struct EdgeSpec {
  std::string name;
  std::vector<FlowEntry> flows;
  bool external = false;
  int flow_arity() const { return static_cast<int>(flows.size()); }
};

struct EdgeEndpoints {
  int tail = 0;  // 1-based vertex, 0 = environment
  int head = 0;
};

/// Parameter bound to a live vertex state at assembly time (e.g. a thermal
/// capacitance proportional to a stored-mass state on another vertex).
struct StateRef {
  int vertex = 0;  // 1-based
  int state = 1;
};

struct Parameter {
  std::string description;
  std::string var;
  std::variant<double, LookupTable1D, LookupTable2D, StateRef> value;
  std::string units;
  bool is_design_variable = false;

  bool is_scalar() const { return std::holds_alternative<double>(value); }
  bool is_table1d() const { return std::holds_alternative<LookupTable1D>(value); }
  bool is_table2d() const { return std::holds_alternative<LookupTable2D>(value); }
  bool is_state_ref() const { return std::holds_alternative<StateRef>(value); }
  double scalar() const { return std::get<double>(value); }
};

struct InputSpec {
  std::string description;
  std::string var;  // u<k>
  std::string units;
  std::string origin;  // provenance chain after combine, e.g. "mainTank.u1"
};

enum class PortType { EdgeConnection, VertexConnection };

struct Port {
  PortType type = PortType::EdgeConnection;
  int element_index = 0;  // 1-based into edges or vertices
  std::string domain;
};

/// Row of the external-connectivity map D: dangling external edge entry
/// `entry` of edge `edge` drives state row `state` of vertex `vertex`
/// with the given sign (+1 inflow, -1 outflow).
struct ExternalFlow {
  int vertex = 0;  // 1-based
  int state = 1;
  int edge = 0;  // 1-based
  int entry = 1;
  double sign = 1.0;
};

class Graph {
public:
  Graph() = default;

  const std::string& name() const { return name_; }
  const std::vector<VertexSpec>& vertices() const { return vertices_; }
  const std::vector<EdgeSpec>& edges() const { return edges_; }
  const std::vector<EdgeEndpoints>& edge_matrix() const { return edge_matrix_; }
  const std::vector<Parameter>& parameters() const { return parameters_; }
  const std::vector<InputSpec>& inputs() const { return inputs_; }
  const std::vector<Port>& ports() const { return ports_; }
  const std::vector<std::string>& notes() const { return notes_; }
  const std::vector<ExternalFlow>& external_flow_map() const { return external_flows_; }

  int vertex_count() const { return static_cast<int>(vertices_.size()); }
  int edge_count() const { return static_cast<int>(edges_.size()); }
  int dynamic_vertex_count() const { return n_dynamic_; }
  int algebraic_vertex_count() const { return n_algebraic_; }
  int external_vertex_count() const { return n_external_; }
  /// States carried by dynamic + algebraic vertices.
  int state_count() const { return n_states_; }
  int total_flow_entries() const { return n_flow_entries_; }

  const VertexSpec& vertex(int index_1based) const;
  const EdgeSpec& edge(int index_1based) const;
  const Parameter* find_parameter(const std::string& var) const;
  const InputSpec* find_input(const std::string& var) const;

private:
  friend class GraphBuilder;
  std::string name_;
  std::vector<VertexSpec> vertices_;
  std::vector<EdgeSpec> edges_;
  std::vector<EdgeEndpoints> edge_matrix_;
  std::vector<Parameter> parameters_;
  std::vector<InputSpec> inputs_;
  std::vector<Port> ports_;
  std::vector<std::string> notes_;
  std::vector<ExternalFlow> external_flows_;
  int n_dynamic_ = 0;
  int n_algebraic_ = 0;
  int n_external_ = 0;
  int n_states_ = 0;
  int n_flow_entries_ = 0;
};

class GraphBuilder {
public:
  explicit GraphBuilder(std::string name);

  GraphBuilder& add_vertex(VertexSpec vertex);
  GraphBuilder& add_edge(EdgeSpec edge, int tail, int head);
  GraphBuilder& add_parameter(Parameter parameter);
  GraphBuilder& add_input(InputSpec input);
  GraphBuilder& add_port(Port port);
  GraphBuilder& add_note(std::string note);

  /// Single-flow edge convenience; the equation string is parsed here.
  GraphBuilder& add_edge(std::string name, std::string equation, int tail, int head,
                         bool external = false);

  /// Normalizes vertex order to (dynamic, algebraic, external), remaps all
  /// stored indices, derives the external-flow map, and returns the graph.
  /// Throws GraphError on structurally impossible input (bad indices,
  /// arity/endpoint mismatches); semantic problems are left to validate().
  Graph build();

private:
  Graph g_;
};

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

struct ValidationReport {
  std::vector<std::string> errors;
  std::vector<std::string> warnings;
  bool ok() const { return errors.empty(); }
};

/// Checks every type invariant, symbol resolution, and initial-condition
/// coverage. Never throws; all findings are collected in the report.
ValidationReport validate(const Graph& g);

/// Returns a copy of the graph with the named vertices' initial conditions
/// replaced. Throws GraphError on an unknown vertex or a length mismatch.
Graph with_initial_conditions(const Graph& g,
                              const std::map<std::string, std::vector<double>>& by_vertex);

// ---------------------------------------------------------------------------
// Structure matrices
// ---------------------------------------------------------------------------

/// Vertex-by-edge incidence matrix: +1 where the vertex is the tail of the
/// edge, -1 where it is the head. Environment endpoints contribute nothing,
/// so a dangling external edge produces a single-entry column.
Eigen::MatrixXd incidence_matrix(const Graph& g);

/// Splits M into rows over dynamic + algebraic vertices (top) and external
/// vertices (bottom); stacking the two restores M exactly.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> partition_incidence(const Eigen::MatrixXd& m,
                                                                const Graph& g);

/// 0/1 mapping of edge flow entries to vertex state rows, stored expanded
/// with the block dimensions kept alongside.
struct SMatrix {
  std::vector<int> row_blocks;  // state count per vertex
  std::vector<int> col_blocks;  // flow arity per edge
  Eigen::MatrixXd entries;      // (total states) x (total flow entries), 0/1

  int row_offset(int vertex_0based) const;
  int col_offset(int edge_0based) const;
};

SMatrix smatrix(const Graph& g);

/// Blockwise (Khatri-Rao) expansion of the incidence matrix by the S matrix:
/// entry ((vertex i, state m), (edge j, entry n)) = m_ij * s. For graphs
/// where every state count and flow arity is 1 the result equals M.
Eigen::MatrixXd khatri_rao(const Eigen::MatrixXd& m, const SMatrix& s);

// ---------------------------------------------------------------------------
// Reserved symbol helpers
// ---------------------------------------------------------------------------

namespace symbols {

/// u<k> -> k, otherwise nullopt.
std::optional<int> input_index(const std::string& name);

struct LocalState {
  int state;  // 1-based
  bool derivative;
};
/// x, x_dot, x<k>, x<k>_dot -> state row; x aliases x1.
std::optional<LocalState> local_state(const std::string& name);

struct EndpointState {
  bool head;  // false = tail
  int state;  // 1-based
};
/// xt, xh, xt<k>, xh<k> -> endpoint state; xt aliases xt1.
std::optional<EndpointState> endpoint_state(const std::string& name);

std::string input(int k);
std::string state(int k);
std::string state_dot(int k);
std::string tail(int k);
std::string head(int k);

/// True for any reserved form above (parameter vars must avoid these).
bool is_reserved(const std::string& name);

}  // namespace symbols

}  // namespace energraph
