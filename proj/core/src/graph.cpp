#include "energraph/graph.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>

namespace energraph {

const char* to_string(VertexKind kind) {
  switch (kind) {
    case VertexKind::Dynamic: return "dynamic";
    case VertexKind::Algebraic: return "algebraic";
    case VertexKind::External: return "external";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Reserved symbols
// ---------------------------------------------------------------------------

namespace symbols {

namespace {

// Parses a positive decimal suffix starting at `pos`; the whole remainder
// must be digits.
std::optional<int> suffix_number(const std::string& name, std::size_t pos) {
  if (pos >= name.size()) return std::nullopt;
  int value = 0;
  for (std::size_t i = pos; i < name.size(); ++i) {
    char c = name[i];
    if (!std::isdigit(static_cast<unsigned char>(c))) return std::nullopt;
    value = value * 10 + (c - '0');
    if (value > 1'000'000) return std::nullopt;
  }
  return value;
}

}  // namespace

std::optional<int> input_index(const std::string& name) {
  if (name.size() < 2 || name[0] != 'u') return std::nullopt;
  auto n = suffix_number(name, 1);
  if (n && *n >= 1) return n;
  return std::nullopt;
}

std::optional<LocalState> local_state(const std::string& name) {
  if (name == "x") return LocalState{1, false};
  if (name == "x_dot") return LocalState{1, true};
  if (name.size() < 2 || name[0] != 'x') return std::nullopt;
  std::string body = name;
  bool derivative = false;
  if (body.size() > 4 && body.substr(body.size() - 4) == "_dot") {
    derivative = true;
    body = body.substr(0, body.size() - 4);
  }
  auto n = suffix_number(body, 1);
  if (n && *n >= 1) return LocalState{*n, derivative};
  return std::nullopt;
}

std::optional<EndpointState> endpoint_state(const std::string& name) {
  if (name == "xt") return EndpointState{false, 1};
  if (name == "xh") return EndpointState{true, 1};
  if (name.size() < 3 || name[0] != 'x') return std::nullopt;
  bool head = name[1] == 'h';
  if (!head && name[1] != 't') return std::nullopt;
  auto n = suffix_number(name, 2);
  if (n && *n >= 1) return EndpointState{head, *n};
  return std::nullopt;
}

std::string input(int k) { return "u" + std::to_string(k); }
std::string state(int k) { return "x" + std::to_string(k); }
std::string state_dot(int k) { return "x" + std::to_string(k) + "_dot"; }
std::string tail(int k) { return "xt" + std::to_string(k); }
std::string head(int k) { return "xh" + std::to_string(k); }

bool is_reserved(const std::string& name) {
  return input_index(name) || local_state(name) || endpoint_state(name) || name == "t";
}

}  // namespace symbols

// ---------------------------------------------------------------------------
// Graph accessors
// ---------------------------------------------------------------------------

const VertexSpec& Graph::vertex(int index_1based) const {
  if (index_1based < 1 || index_1based > vertex_count())
    throw GraphError("vertex index " + std::to_string(index_1based) + " out of range");
  return vertices_[static_cast<std::size_t>(index_1based - 1)];
}

const EdgeSpec& Graph::edge(int index_1based) const {
  if (index_1based < 1 || index_1based > edge_count())
    throw GraphError("edge index " + std::to_string(index_1based) + " out of range");
  return edges_[static_cast<std::size_t>(index_1based - 1)];
}

const Parameter* Graph::find_parameter(const std::string& var) const {
  for (const auto& p : parameters_)
    if (p.var == var) return &p;
  return nullptr;
}

const InputSpec* Graph::find_input(const std::string& var) const {
  for (const auto& i : inputs_)
    if (i.var == var) return &i;
  return nullptr;
}

// ---------------------------------------------------------------------------
// Builder
// ---------------------------------------------------------------------------

GraphBuilder::GraphBuilder(std::string name) { g_.name_ = std::move(name); }

GraphBuilder& GraphBuilder::add_vertex(VertexSpec vertex) {
  g_.vertices_.push_back(std::move(vertex));
  return *this;
}

GraphBuilder& GraphBuilder::add_edge(EdgeSpec edge, int tail, int head) {
  if (edge.flows.empty())
    throw GraphError("edge '" + edge.name + "' must carry at least one flow entry");
  g_.edges_.push_back(std::move(edge));
  g_.edge_matrix_.push_back({tail, head});
  return *this;
}

GraphBuilder& GraphBuilder::add_edge(std::string name, std::string equation, int tail,
                                     int head, bool external) {
  EdgeSpec e;
  e.name = std::move(name);
  e.flows.push_back({Expression::parse(equation), 1, 1});
  e.external = external;
  return add_edge(std::move(e), tail, head);
}

GraphBuilder& GraphBuilder::add_parameter(Parameter parameter) {
  g_.parameters_.push_back(std::move(parameter));
  return *this;
}

GraphBuilder& GraphBuilder::add_input(InputSpec input) {
  g_.inputs_.push_back(std::move(input));
  return *this;
}

GraphBuilder& GraphBuilder::add_port(Port port) {
  g_.ports_.push_back(std::move(port));
  return *this;
}

GraphBuilder& GraphBuilder::add_note(std::string note) {
  g_.notes_.push_back(std::move(note));
  return *this;
}

Graph GraphBuilder::build() {
  const int nv = static_cast<int>(g_.vertices_.size());

  for (const auto& ep : g_.edge_matrix_) {
    if (ep.tail < 0 || ep.tail > nv || ep.head < 0 || ep.head > nv)
      throw GraphError("edge endpoint out of range in graph '" + g_.name_ + "'");
    if (ep.tail == 0 && ep.head == 0)
      throw GraphError("edge with both endpoints on the environment in graph '" +
                       g_.name_ + "'");
  }

  // Normalize vertex order: dynamic, algebraic, external (stable).
  auto rank = [](VertexKind k) {
    switch (k) {
      case VertexKind::Dynamic: return 0;
      case VertexKind::Algebraic: return 1;
      case VertexKind::External: return 2;
    }
    return 3;
  };
  std::vector<int> order(static_cast<std::size_t>(nv));
  for (int i = 0; i < nv; ++i) order[static_cast<std::size_t>(i)] = i;
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return rank(g_.vertices_[static_cast<std::size_t>(a)].kind) <
           rank(g_.vertices_[static_cast<std::size_t>(b)].kind);
  });
  std::vector<int> remap(static_cast<std::size_t>(nv + 1), 0);  // old 1-based -> new 1-based
  std::vector<VertexSpec> sorted;
  sorted.reserve(static_cast<std::size_t>(nv));
  for (int newi = 0; newi < nv; ++newi) {
    int oldi = order[static_cast<std::size_t>(newi)];
    remap[static_cast<std::size_t>(oldi + 1)] = newi + 1;
    sorted.push_back(std::move(g_.vertices_[static_cast<std::size_t>(oldi)]));
  }
  g_.vertices_ = std::move(sorted);

  for (auto& ep : g_.edge_matrix_) {
    if (ep.tail > 0) ep.tail = remap[static_cast<std::size_t>(ep.tail)];
    if (ep.head > 0) ep.head = remap[static_cast<std::size_t>(ep.head)];
  }
  for (auto& port : g_.ports_) {
    if (port.type == PortType::VertexConnection && port.element_index >= 1 &&
        port.element_index <= nv)
      port.element_index = remap[static_cast<std::size_t>(port.element_index)];
  }
  for (auto& p : g_.parameters_) {
    if (auto* sr = std::get_if<StateRef>(&p.value)) {
      if (sr->vertex >= 1 && sr->vertex <= nv)
        sr->vertex = remap[static_cast<std::size_t>(sr->vertex)];
    }
  }

  g_.n_dynamic_ = g_.n_algebraic_ = g_.n_external_ = 0;
  g_.n_states_ = 0;
  for (const auto& v : g_.vertices_) {
    if (v.state_count < 1)
      throw GraphError("vertex '" + v.name + "' must carry at least one state");
    switch (v.kind) {
      case VertexKind::Dynamic:
        ++g_.n_dynamic_;
        g_.n_states_ += v.state_count;
        break;
      case VertexKind::Algebraic:
        ++g_.n_algebraic_;
        g_.n_states_ += v.state_count;
        break;
      case VertexKind::External:
        ++g_.n_external_;
        break;
    }
  }

  g_.n_flow_entries_ = 0;
  for (const auto& e : g_.edges_) g_.n_flow_entries_ += e.flow_arity();

  // Derive the external-flow map (rows of D) from dangling external edges.
  g_.external_flows_.clear();
  const int n_internal = g_.n_dynamic_ + g_.n_algebraic_;
  for (int j = 0; j < static_cast<int>(g_.edges_.size()); ++j) {
    const auto& ep = g_.edge_matrix_[static_cast<std::size_t>(j)];
    const auto& e = g_.edges_[static_cast<std::size_t>(j)];
    int vertex = 0;
    double sgn = 0.0;
    bool at_tail = false;
    if (ep.tail == 0) {
      vertex = ep.head;
      sgn = 1.0;  // inflow
    } else if (ep.head == 0) {
      vertex = ep.tail;
      sgn = -1.0;  // outflow
      at_tail = true;
    } else {
      continue;
    }
    if (vertex < 1 || vertex > n_internal) continue;  // environment or external vertex
    for (int n = 0; n < e.flow_arity(); ++n) {
      const auto& entry = e.flows[static_cast<std::size_t>(n)];
      g_.external_flows_.push_back(
          {vertex, at_tail ? entry.tail_state : entry.head_state, j + 1, n + 1, sgn});
    }
  }

  return std::move(g_);
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

namespace {

struct CallArity {
  std::string name;
  int arity;
};

void collect_call_arities(const Expression& e, std::vector<CallArity>& out) {
  const auto& n = e.node();
  if (n.kind == Expression::Kind::Call)
    out.push_back({n.name, static_cast<int>(n.children.size())});
  for (const auto& c : n.children) collect_call_arities(c, out);
}

}  // namespace

ValidationReport validate(const Graph& g) {
  ValidationReport report;
  auto error = [&](std::string msg) { report.errors.push_back(std::move(msg)); };
  auto warn = [&](std::string msg) { report.warnings.push_back(std::move(msg)); };

  const int nv = g.vertex_count();
  const int ne = g.edge_count();

  // Parameters: names, uniqueness, table axes, state-ref targets.
  std::set<std::string> param_vars;
  for (const auto& p : g.parameters()) {
    if (p.var.empty()) {
      error("parameter with empty variable name");
      continue;
    }
    if (!param_vars.insert(p.var).second)
      error("duplicate parameter variable '" + p.var + "'");
    if (symbols::is_reserved(p.var))
      error("parameter variable '" + p.var + "' collides with a reserved symbol");
    if (p.is_table1d() && std::get<LookupTable1D>(p.value).grid().size() < 2)
      error("parameter '" + p.var + "' carries an empty 1-D table");
    if (p.is_table2d() && std::get<LookupTable2D>(p.value).grid_x().size() < 2)
      error("parameter '" + p.var + "' carries an empty 2-D table");
    if (p.is_state_ref()) {
      const auto& sr = std::get<StateRef>(p.value);
      if (sr.vertex < 1 || sr.vertex > g.dynamic_vertex_count() + g.algebraic_vertex_count())
        error("parameter '" + p.var + "' references a non-state vertex " +
              std::to_string(sr.vertex));
      else if (sr.state < 1 || sr.state > g.vertex(sr.vertex).state_count)
        error("parameter '" + p.var + "' references state " + std::to_string(sr.state) +
              " beyond vertex '" + g.vertex(sr.vertex).name + "'");
    }
  }

  // Inputs: u<k> pattern, uniqueness.
  std::set<std::string> input_vars;
  std::set<int> input_numbers;
  for (const auto& in : g.inputs()) {
    auto k = symbols::input_index(in.var);
    if (!k) {
      error("input variable '" + in.var + "' does not match u<number>");
      continue;
    }
    if (!input_vars.insert(in.var).second)
      error("duplicate input variable '" + in.var + "'");
    else
      input_numbers.insert(*k);
    if (param_vars.count(in.var))
      error("input variable '" + in.var + "' collides with a parameter");
  }
  for (int k = 1; k <= static_cast<int>(input_numbers.size()); ++k)
    if (!input_numbers.count(k)) {
      warn("input numbering is not contiguous from u1");
      break;
    }

  std::set<std::string> used_inputs;
  std::set<std::string> used_params;

  auto check_call_names = [&](const Expression& e, const std::string& where) {
    std::vector<CallArity> calls;
    collect_call_arities(e, calls);
    for (const auto& c : calls) {
      const Parameter* p = g.find_parameter(c.name);
      if (!p) {
        error(where + ": call '" + c.name + "' does not match any table parameter");
        continue;
      }
      used_params.insert(c.name);
      if (c.arity == 1 && !p->is_table1d())
        error(where + ": call '" + c.name + "' expects a 1-D table parameter");
      else if (c.arity == 2 && !p->is_table2d())
        error(where + ": call '" + c.name + "' expects a 2-D table parameter");
      else if (c.arity > 2)
        error(where + ": call '" + c.name + "' takes too many arguments");
    }
  };

  // Vertices.
  for (int vi = 1; vi <= nv; ++vi) {
    const auto& v = g.vertex(vi);
    const std::string where = "vertex " + std::to_string(vi) + " ('" + v.name + "')";
    if (v.kind == VertexKind::External) {
      if (!v.equations.empty()) error(where + ": external vertices carry no equation");
      if (v.initial_condition) warn(where + ": initial condition on an external vertex is ignored");
      continue;
    }
    if (static_cast<int>(v.equations.size()) != v.state_count) {
      error(where + ": expected " + std::to_string(v.state_count) +
            " equation rows, got " + std::to_string(v.equations.size()));
      continue;
    }
    if (v.initial_condition &&
        static_cast<int>(v.initial_condition->size()) != v.state_count)
      error(where + ": initial condition length " +
            std::to_string(v.initial_condition->size()) + " does not match state count " +
            std::to_string(v.state_count));
    if (v.kind == VertexKind::Dynamic && !v.initial_condition)
      error(where + ": initial condition unassigned");

    for (int row = 0; row < v.state_count; ++row) {
      const Expression& eq = v.equations[static_cast<std::size_t>(row)];
      const std::string rwhere = where + " row " + std::to_string(row + 1);
      bool has_dot = false;
      for (const auto& sym : eq.free_symbols()) {
        if (auto ls = symbols::local_state(sym)) {
          if (ls->state > v.state_count)
            error(rwhere + ": symbol '" + sym + "' exceeds the vertex state count");
          if (ls->derivative) has_dot = true;
          continue;
        }
        if (symbols::endpoint_state(sym) || symbols::input_index(sym)) {
          error(rwhere + ": symbol '" + sym + "' is not allowed in a vertex equation");
          continue;
        }
        if (!g.find_parameter(sym))
          error(rwhere + ": unresolved symbol '" + sym + "'");
        else
          used_params.insert(sym);
      }
      if (v.kind == VertexKind::Dynamic && !has_dot)
        error(rwhere + ": dynamic vertex equation must contain a state derivative");
      if (v.kind == VertexKind::Algebraic && has_dot)
        error(rwhere + ": algebraic vertex equation must omit state derivatives");
      check_call_names(eq, rwhere);

      // Dynamic rows must be linear in every state derivative (x_dot
      // aliasing x1_dot).
      if (v.kind == VertexKind::Dynamic) {
        auto diff_dot = [](const Expression& expr, int k) {
          Expression d = expr.differentiate(symbols::state_dot(k));
          if (k == 1) d = Expression::add(d, expr.differentiate("x_dot"));
          return d;
        };
        for (int k = 1; k <= v.state_count && has_dot; ++k) {
          try {
            Expression first = diff_dot(eq, k);
            for (int l = 1; l <= v.state_count; ++l) {
              if (!diff_dot(first, l).is_constant(0.0)) {
                error(rwhere + ": equation is not linear in the state derivatives");
                break;
              }
            }
          } catch (const UnsupportedDerivative&) {
            error(rwhere + ": capacitance cannot be extracted (non-differentiable form)");
            break;
          }
        }
      }
    }
  }

  // Edges.
  for (int j = 1; j <= ne; ++j) {
    const auto& e = g.edge(j);
    const auto& ep = g.edge_matrix()[static_cast<std::size_t>(j - 1)];
    const std::string where = "edge " + std::to_string(j) + " ('" + e.name + "')";

    const bool dangling = ep.tail == 0 || ep.head == 0;
    if (dangling && !e.external)
      error(where + ": an edge touching the environment must be flagged external");
    if (ep.tail != 0 && ep.tail == ep.head) error(where + ": self-loop edge");

    const VertexSpec* tail = ep.tail > 0 ? &g.vertex(ep.tail) : nullptr;
    const VertexSpec* head = ep.head > 0 ? &g.vertex(ep.head) : nullptr;

    for (int n = 0; n < e.flow_arity(); ++n) {
      const auto& entry = e.flows[static_cast<std::size_t>(n)];
      const std::string fwhere = where + " entry " + std::to_string(n + 1);
      if (tail && (entry.tail_state < 1 || entry.tail_state > tail->state_count))
        error(fwhere + ": tail state " + std::to_string(entry.tail_state) +
              " out of range for vertex '" + tail->name + "'");
      if (head && (entry.head_state < 1 || entry.head_state > head->state_count))
        error(fwhere + ": head state " + std::to_string(entry.head_state) +
              " out of range for vertex '" + head->name + "'");
      for (const auto& sym : entry.equation.free_symbols()) {
        if (auto es = symbols::endpoint_state(sym)) {
          const VertexSpec* endpoint = es->head ? head : tail;
          if (!endpoint)
            error(fwhere + ": symbol '" + sym + "' references the environment endpoint");
          else if (es->state > endpoint->state_count)
            error(fwhere + ": symbol '" + sym + "' exceeds the endpoint state count");
          continue;
        }
        if (symbols::local_state(sym)) {
          error(fwhere + ": vertex symbol '" + sym + "' is not allowed in an edge equation");
          continue;
        }
        if (symbols::input_index(sym)) {
          if (!g.find_input(sym))
            error(fwhere + ": undeclared input " + sym);
          else
            used_inputs.insert(sym);
          continue;
        }
        if (!g.find_parameter(sym))
          error(fwhere + ": unresolved symbol '" + sym + "'");
        else
          used_params.insert(sym);
      }
      check_call_names(entry.equation, fwhere);
    }
  }

  // Ports.
  for (std::size_t pi = 0; pi < g.ports().size(); ++pi) {
    const auto& port = g.ports()[pi];
    const std::string where = "port " + std::to_string(pi + 1);
    if (port.type == PortType::EdgeConnection) {
      if (port.element_index < 1 || port.element_index > ne)
        error(where + ": edge index " + std::to_string(port.element_index) + " out of range");
      else if (!g.edge(port.element_index).external)
        error(where + ": edge connection must target an external edge");
    } else {
      if (port.element_index < 1 || port.element_index > nv)
        error(where + ": vertex index " + std::to_string(port.element_index) + " out of range");
    }
  }

  // Usage warnings and frozen-state warnings.
  for (const auto& in : g.inputs())
    if (!used_inputs.count(in.var)) warn("input " + in.var + " is declared but never used");
  for (const auto& p : g.parameters())
    if (!used_params.count(p.var) && !p.is_state_ref())
      warn("parameter " + p.var + " is declared but never used");

  const int n_internal = g.dynamic_vertex_count() + g.algebraic_vertex_count();
  std::vector<std::set<int>> touched(static_cast<std::size_t>(n_internal + 1));
  for (int j = 1; j <= ne; ++j) {
    const auto& ep = g.edge_matrix()[static_cast<std::size_t>(j - 1)];
    for (const auto& entry : g.edge(j).flows) {
      if (ep.tail >= 1 && ep.tail <= n_internal)
        touched[static_cast<std::size_t>(ep.tail)].insert(entry.tail_state);
      if (ep.head >= 1 && ep.head <= n_internal)
        touched[static_cast<std::size_t>(ep.head)].insert(entry.head_state);
    }
  }
  for (int vi = 1; vi <= n_internal; ++vi) {
    const auto& v = g.vertex(vi);
    for (int m = 1; m <= v.state_count; ++m)
      if (!touched[static_cast<std::size_t>(vi)].count(m))
        warn("vertex '" + v.name + "' state " + std::to_string(m) +
             " has no incident flow entry");
  }

  return report;
}

Graph with_initial_conditions(const Graph& g,
                              const std::map<std::string, std::vector<double>>& by_vertex) {
  GraphBuilder builder(g.name());
  std::set<std::string> seen;
  for (const auto& v : g.vertices()) {
    VertexSpec copy = v;
    auto it = by_vertex.find(v.name);
    if (it != by_vertex.end()) {
      if (static_cast<int>(it->second.size()) != v.state_count)
        throw GraphError("initial condition for '" + v.name + "' has " +
                         std::to_string(it->second.size()) + " values, expected " +
                         std::to_string(v.state_count));
      copy.initial_condition = it->second;
      seen.insert(v.name);
    }
    builder.add_vertex(std::move(copy));
  }
  for (const auto& [name, values] : by_vertex)
    if (!seen.count(name)) throw GraphError("unknown vertex '" + name + "' in initial conditions");
  for (int j = 0; j < g.edge_count(); ++j) {
    const auto& ep = g.edge_matrix()[static_cast<std::size_t>(j)];
    builder.add_edge(g.edges()[static_cast<std::size_t>(j)], ep.tail, ep.head);
  }
  for (const auto& p : g.parameters()) builder.add_parameter(p);
  for (const auto& in : g.inputs()) builder.add_input(in);
  for (const auto& port : g.ports()) builder.add_port(port);
  for (const auto& note : g.notes()) builder.add_note(note);
  return builder.build();
}

// ---------------------------------------------------------------------------
// Structure matrices
// ---------------------------------------------------------------------------

Eigen::MatrixXd incidence_matrix(const Graph& g) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(g.vertex_count(), g.edge_count());
  for (int j = 0; j < g.edge_count(); ++j) {
    const auto& ep = g.edge_matrix()[static_cast<std::size_t>(j)];
    if (ep.tail > 0) m(ep.tail - 1, j) += 1.0;
    if (ep.head > 0) m(ep.head - 1, j) -= 1.0;
  }
  return m;
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> partition_incidence(const Eigen::MatrixXd& m,
                                                                const Graph& g) {
  if (m.rows() != g.vertex_count())
    throw GraphError("incidence matrix row count does not match the graph");
  const int top = g.dynamic_vertex_count() + g.algebraic_vertex_count();
  return {m.topRows(top), m.bottomRows(g.vertex_count() - top)};
}

int SMatrix::row_offset(int vertex_0based) const {
  int off = 0;
  for (int i = 0; i < vertex_0based; ++i) off += row_blocks[static_cast<std::size_t>(i)];
  return off;
}

int SMatrix::col_offset(int edge_0based) const {
  int off = 0;
  for (int j = 0; j < edge_0based; ++j) off += col_blocks[static_cast<std::size_t>(j)];
  return off;
}

SMatrix smatrix(const Graph& g) {
  SMatrix s;
  int total_rows = 0;
  for (const auto& v : g.vertices()) {
    s.row_blocks.push_back(v.state_count);
    total_rows += v.state_count;
  }
  int total_cols = 0;
  for (const auto& e : g.edges()) {
    s.col_blocks.push_back(e.flow_arity());
    total_cols += e.flow_arity();
  }
  s.entries = Eigen::MatrixXd::Zero(total_rows, total_cols);

  int col = 0;
  for (int j = 0; j < g.edge_count(); ++j) {
    const auto& e = g.edges()[static_cast<std::size_t>(j)];
    const auto& ep = g.edge_matrix()[static_cast<std::size_t>(j)];
    for (int n = 0; n < e.flow_arity(); ++n, ++col) {
      const auto& entry = e.flows[static_cast<std::size_t>(n)];
      if (ep.tail > 0) s.entries(s.row_offset(ep.tail - 1) + entry.tail_state - 1, col) = 1.0;
      if (ep.head > 0) s.entries(s.row_offset(ep.head - 1) + entry.head_state - 1, col) = 1.0;
    }
  }
  return s;
}

Eigen::MatrixXd khatri_rao(const Eigen::MatrixXd& m, const SMatrix& s) {
  if (m.rows() != static_cast<Eigen::Index>(s.row_blocks.size()) ||
      m.cols() != static_cast<Eigen::Index>(s.col_blocks.size()))
    throw GraphError("dimension mismatch between incidence matrix and S matrix blocks");

  Eigen::MatrixXd out = s.entries;
  int row = 0;
  for (std::size_t i = 0; i < s.row_blocks.size(); ++i) {
    int col = 0;
    for (std::size_t j = 0; j < s.col_blocks.size(); ++j) {
      out.block(row, col, s.row_blocks[i], s.col_blocks[j]) *=
          m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      col += s.col_blocks[j];
    }
    row += s.row_blocks[i];
  }
  return out;
}

}  // namespace energraph
