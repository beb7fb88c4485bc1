#pragma once

// Connecting component graphs into system graphs (vertex and edge
// connections with primary/secondary priority), rewriting input
// dependencies, and stitching dynamic graphs with algebraic component
// models into a DAE-ready description.

#include "energraph/graph.hpp"

#include <map>
#include <string>
#include <vector>

namespace energraph {

class CompositionError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Port reference by component instance name (the graph's name).
struct PortRef {
  std::string component;
  int port = 0;  // 1-based into the component's port list
};

/// One connection; the primary side's properties win on merges.
struct ConnectionSpec {
  PortRef primary;
  PortRef secondary;
};

/// Merges component graphs into one system graph.
///
/// Vertex connections fuse the two port vertices (at most one may be
/// dynamic; the surviving spec is the higher-kind vertex's, primary winning
/// ties). Edge connections fuse the two external stub edges into one
/// internal edge that carries the primary's equations, oriented from the
/// outward stub's interior vertex to the inward stub's interior vertex;
/// external stand-in vertices orphaned by the merge are dropped.
///
/// Inputs are renamed by prefixing the component name (recorded in each
/// input's origin) and renumbered to a contiguous global u-sequence;
/// parameters are namespaced as <component>_<var>. Consumed ports are
/// removed; unused external elements remain available as system ports.
Graph combine(const std::string& name, const std::vector<Graph>& components,
              const std::vector<ConnectionSpec>& connections);

/// Replaces input variables by expressions over the remaining inputs
/// (e.g. u3 -> (u1+u2)), removes the replaced inputs, and renumbers the
/// rest contiguously. The renumbering map is recorded in the graph notes.
Graph input_common(const Graph& g,
                   const std::vector<std::pair<std::string, std::string>>& rules);

// ---------------------------------------------------------------------------
// Stitching graphs with algebraic component models
// ---------------------------------------------------------------------------

/// Component model that computes its outlet state algebraically from the
/// upstream state: outlet = expression over the symbol x_up and the
/// model's own parameters (substituted at stitch time).
struct AlgebraicModel {
  std::string name;
  Expression outlet;
  Bindings params;
};

/// One algebraic state and the constraint row that defines it.
struct ChainStep {
  enum class Kind { Prescription, Continuity, Model };
  std::string state;     // unique algebraic state name
  Kind kind = Kind::Continuity;
  /// Boundary-condition name (prescription) or upstream reference: another
  /// chain state, or a dynamic state addressed as "graph.vertex".
  std::string upstream;
  std::string model;  // AlgebraicModel name for Kind::Model
};

/// Binds a graph's external vertex to a chain state so the stitched
/// algebraic chain drives the graph's boundary.
struct ExternalBinding {
  std::string graph;
  std::string external_vertex;
  std::string chain_state;
};

/// Everything a DAE integrator needs: the global state is x = (x_alg,
/// x_dyn) with x_alg the chain states in order and x_dyn the concatenated
/// graph states; the mass matrix is diag(0 ... 0, 1 ... 1).
struct StitchedSystem {
  std::string name;
  std::vector<Graph> graphs;
  std::vector<AlgebraicModel> models;
  std::vector<ChainStep> chain;
  std::vector<ExternalBinding> bindings;
  std::map<std::string, double> boundary_conditions;
};

/// Validates and packages a stitched system. Throws CompositionError on a
/// dangling algebraic state (defined twice or never), an upstream reference
/// that resolves to nothing, or a cyclic chain without a boundary-condition
/// or dynamic-state anchor.
StitchedSystem stitch(std::string name, std::vector<Graph> graphs,
                      std::vector<AlgebraicModel> models, std::vector<ChainStep> chain,
                      std::vector<ExternalBinding> bindings,
                      std::map<std::string, double> boundary_conditions);

}  // namespace energraph
