#include "energraph/compose.hpp"

#include <algorithm>
#include <map>
#include <set>

namespace energraph {

namespace {

int kind_rank(VertexKind k) {
  switch (k) {
    case VertexKind::Dynamic: return 2;
    case VertexKind::Algebraic: return 1;
    case VertexKind::External: return 0;
  }
  return -1;
}

struct PortRecord {
  std::string component;
  int number = 0;  // 1-based within the component
  Port port;       // element_index already remapped to global indices
  bool consumed = false;
};

// Working copy of the merged system while connections are applied.
struct Workspace {
  std::vector<VertexSpec> vertices;
  std::vector<int> vertex_alias;  // union-find parent, 1-based; 0 = root of itself
  std::vector<bool> vertex_dead;
  std::vector<bool> vertex_was_stub_far;  // far stand-in of a merged edge stub
  std::vector<EdgeSpec> edges;
  std::vector<EdgeEndpoints> endpoints;
  std::vector<bool> edge_dead;
  std::vector<Parameter> parameters;
  std::vector<InputSpec> inputs;
  std::vector<PortRecord> ports;
  std::vector<std::string> notes;

  int find_vertex(int v) {
    while (v > 0 && vertex_alias[static_cast<std::size_t>(v)] != 0)
      v = vertex_alias[static_cast<std::size_t>(v)];
    return v;
  }
};

void apply_substitution(Workspace& ws, const std::map<std::string, Expression>& rules,
                        std::size_t vertex_begin, std::size_t vertex_end,
                        std::size_t edge_begin, std::size_t edge_end,
                        const std::map<std::string, std::string>* call_renames = nullptr) {
  auto rewrite = [&](Expression& e) {
    e = e.substitute(rules);
    if (call_renames) e = e.rename_calls(*call_renames);
  };
  for (std::size_t i = vertex_begin; i < vertex_end; ++i)
    for (auto& eq : ws.vertices[i].equations) rewrite(eq);
  for (std::size_t i = edge_begin; i < edge_end; ++i)
    for (auto& flow : ws.edges[i].flows) rewrite(flow.equation);
}

const PortRecord* find_port(const Workspace& ws, const PortRef& ref, std::string& err) {
  int seen = 0;
  for (const auto& rec : ws.ports) {
    if (rec.component != ref.component) continue;
    ++seen;
    if (rec.number == ref.port) return &rec;
  }
  if (seen == 0)
    err = "unknown component '" + ref.component + "' in connection";
  else
    err = "component '" + ref.component + "' has no port " + std::to_string(ref.port);
  return nullptr;
}

}  // namespace

Graph combine(const std::string& name, const std::vector<Graph>& components,
              const std::vector<ConnectionSpec>& connections) {
  if (components.empty()) throw CompositionError("combine requires at least one component");
  {
    std::set<std::string> names;
    for (const auto& c : components)
      if (!names.insert(c.name()).second)
        throw CompositionError("duplicate component instance name '" + c.name() + "'");
  }

  Workspace ws;
  ws.vertices.emplace_back();  // 1-based padding
  ws.vertex_alias.push_back(0);
  ws.vertex_dead.push_back(true);
  ws.vertex_was_stub_far.push_back(false);

  // Lay every component into the workspace, namespacing parameters and
  // assigning collision-free input placeholders (renumbered at the end).
  std::vector<std::string> input_placeholders;
  for (const auto& comp : components) {
    const int v_off = static_cast<int>(ws.vertices.size()) - 1;
    const std::size_t vertex_begin = ws.vertices.size();
    const std::size_t edge_begin = ws.edges.size();

    for (const auto& v : comp.vertices()) {
      VertexSpec copy = v;
      copy.name = comp.name() + "." + v.name;
      ws.vertices.push_back(std::move(copy));
      ws.vertex_alias.push_back(0);
      ws.vertex_dead.push_back(false);
      ws.vertex_was_stub_far.push_back(false);
    }
    for (int j = 0; j < comp.edge_count(); ++j) {
      EdgeSpec copy = comp.edges()[static_cast<std::size_t>(j)];
      copy.name = comp.name() + "." + copy.name;
      const auto& ep = comp.edge_matrix()[static_cast<std::size_t>(j)];
      ws.edges.push_back(std::move(copy));
      ws.endpoints.push_back({ep.tail > 0 ? ep.tail + v_off : 0, ep.head > 0 ? ep.head + v_off : 0});
      ws.edge_dead.push_back(false);
    }

    std::map<std::string, Expression> rules;
    std::map<std::string, std::string> call_renames;
    for (const auto& p : comp.parameters()) {
      Parameter copy = p;
      copy.var = comp.name() + "_" + p.var;
      if (auto* sr = std::get_if<StateRef>(&copy.value)) sr->vertex += v_off;
      if (p.is_table1d() || p.is_table2d())
        call_renames.emplace(p.var, copy.var);
      else
        rules.emplace(p.var, Expression::symbol(copy.var));
      ws.parameters.push_back(std::move(copy));
    }
    for (const auto& in : comp.inputs()) {
      InputSpec copy = in;
      copy.origin = comp.name() + "." + (in.origin.empty() ? in.var : in.origin);
      copy.var = comp.name() + "__" + in.var;  // placeholder, renumbered below
      rules.emplace(in.var, Expression::symbol(copy.var));
      input_placeholders.push_back(copy.var);
      ws.inputs.push_back(std::move(copy));
    }
    apply_substitution(ws, rules, vertex_begin, ws.vertices.size(), edge_begin,
                       ws.edges.size(), &call_renames);

    int port_number = 0;
    for (const auto& port : comp.ports()) {
      Port copy = port;
      if (port.type == PortType::VertexConnection)
        copy.element_index += v_off;
      else
        copy.element_index += static_cast<int>(edge_begin);
      ws.ports.push_back({comp.name(), ++port_number, copy, false});
    }
    for (const auto& note : comp.notes()) ws.notes.push_back(comp.name() + ": " + note);
  }

  // Interior endpoint of an external stub edge: the side that is neither the
  // environment nor an external stand-in vertex.
  auto stub_sides = [&](int edge_idx, int& interior, int& far, bool& outward) -> bool {
    const auto& ep = ws.endpoints[static_cast<std::size_t>(edge_idx)];
    int tail = ws.find_vertex(ep.tail);
    int head = ws.find_vertex(ep.head);
    auto is_far = [&](int v) {
      return v == 0 || ws.vertices[static_cast<std::size_t>(v)].kind == VertexKind::External;
    };
    if (is_far(tail) == is_far(head)) return false;
    if (is_far(head)) {
      interior = tail;
      far = head;
      outward = true;
    } else {
      interior = head;
      far = tail;
      outward = false;
    }
    return true;
  };

  for (const auto& conn : connections) {
    if (conn.primary.component == conn.secondary.component)
      throw CompositionError("cannot connect component '" + conn.primary.component +
                             "' to itself");
    std::string err;
    const PortRecord* prec = find_port(ws, conn.primary, err);
    if (!prec) throw CompositionError(err);
    const PortRecord* srec = find_port(ws, conn.secondary, err);
    if (!srec) throw CompositionError(err);
    if (prec->consumed)
      throw CompositionError("port " + std::to_string(conn.primary.port) + " of '" +
                             conn.primary.component + "' is already consumed");
    if (srec->consumed)
      throw CompositionError("port " + std::to_string(conn.secondary.port) + " of '" +
                             conn.secondary.component + "' is already consumed");
    if (prec->port.type != srec->port.type)
      throw CompositionError("connection type mismatch between '" + conn.primary.component +
                             "' and '" + conn.secondary.component + "'");
    if (prec->port.domain != srec->port.domain)
      throw CompositionError("domain mismatch: '" + prec->port.domain + "' vs '" +
                             srec->port.domain + "'");

    if (prec->port.type == PortType::VertexConnection) {
      int pv = ws.find_vertex(prec->port.element_index);
      int sv = ws.find_vertex(srec->port.element_index);
      if (pv == sv)
        throw CompositionError("vertices of '" + conn.primary.component + "' and '" +
                               conn.secondary.component + "' are already merged");
      const VertexSpec& pspec = ws.vertices[static_cast<std::size_t>(pv)];
      const VertexSpec& sspec = ws.vertices[static_cast<std::size_t>(sv)];
      if (pspec.kind == VertexKind::Dynamic && sspec.kind == VertexKind::Dynamic)
        throw CompositionError("vertex connection would merge two dynamic vertices ('" +
                               pspec.name + "', '" + sspec.name + "')");
      // Higher kind survives; the primary wins ties.
      int survivor = (kind_rank(sspec.kind) > kind_rank(pspec.kind)) ? sv : pv;
      int loser = survivor == pv ? sv : pv;
      ws.vertex_alias[static_cast<std::size_t>(loser)] = survivor;
      ws.vertex_dead[static_cast<std::size_t>(loser)] = true;
    } else {
      int pe = prec->port.element_index - 1;
      int se = srec->port.element_index - 1;
      const EdgeSpec& pedge = ws.edges[static_cast<std::size_t>(pe)];
      const EdgeSpec& sedge = ws.edges[static_cast<std::size_t>(se)];
      if (!pedge.external || !sedge.external)
        throw CompositionError("edge connection requires external edges ('" + pedge.name +
                               "', '" + sedge.name + "')");
      if (pedge.flow_arity() != sedge.flow_arity())
        throw CompositionError("flow arity mismatch between '" + pedge.name + "' (" +
                               std::to_string(pedge.flow_arity()) + ") and '" + sedge.name +
                               "' (" + std::to_string(sedge.flow_arity()) + ")");
      int p_int = 0, p_far = 0, s_int = 0, s_far = 0;
      bool p_out = false, s_out = false;
      if (!stub_sides(pe, p_int, p_far, p_out))
        throw CompositionError("cannot determine the interior endpoint of '" + pedge.name + "'");
      if (!stub_sides(se, s_int, s_far, s_out))
        throw CompositionError("cannot determine the interior endpoint of '" + sedge.name + "'");
      if (p_out == s_out)
        throw CompositionError("edges '" + pedge.name + "' and '" + sedge.name +
                               "' are both oriented " + (p_out ? "outward" : "inward"));

      const int out_edge = p_out ? pe : se;
      const int in_edge = p_out ? se : pe;
      // The merged edge lives in the primary's record and carries the
      // primary's equations; the secondary's equations are discarded.
      EdgeSpec merged = pedge;
      merged.external = false;
      for (int k = 0; k < merged.flow_arity(); ++k) {
        merged.flows[static_cast<std::size_t>(k)].tail_state =
            ws.edges[static_cast<std::size_t>(out_edge)].flows[static_cast<std::size_t>(k)].tail_state;
        merged.flows[static_cast<std::size_t>(k)].head_state =
            ws.edges[static_cast<std::size_t>(in_edge)].flows[static_cast<std::size_t>(k)].head_state;
      }
      for (int k = 0; k < sedge.flow_arity(); ++k)
        ws.notes.push_back("edge connection '" + pedge.name + "' <- '" + sedge.name +
                           "': discarded equation '" +
                           sedge.flows[static_cast<std::size_t>(k)].equation.str() + "'");
      ws.endpoints[static_cast<std::size_t>(pe)] = {p_out ? p_int : s_int,
                                                    p_out ? s_int : p_int};
      ws.edges[static_cast<std::size_t>(pe)] = std::move(merged);
      ws.edge_dead[static_cast<std::size_t>(se)] = true;
      for (int far : {p_far, s_far})
        if (far > 0) ws.vertex_was_stub_far[static_cast<std::size_t>(far)] = true;
    }

    for (auto& rec : ws.ports) {
      if (rec.component == conn.primary.component && rec.number == conn.primary.port)
        rec.consumed = true;
      if (rec.component == conn.secondary.component && rec.number == conn.secondary.port)
        rec.consumed = true;
    }
  }

  // Drop external stand-ins orphaned by edge merges: no live incident edge
  // and no remaining port.
  for (std::size_t v = 1; v < ws.vertices.size(); ++v) {
    if (ws.vertex_dead[v] || !ws.vertex_was_stub_far[v]) continue;
    bool incident = false;
    for (std::size_t j = 0; j < ws.edges.size() && !incident; ++j) {
      if (ws.edge_dead[j]) continue;
      if (ws.find_vertex(ws.endpoints[j].tail) == static_cast<int>(v) ||
          ws.find_vertex(ws.endpoints[j].head) == static_cast<int>(v))
        incident = true;
    }
    bool ported = false;
    for (const auto& rec : ws.ports)
      if (!rec.consumed && rec.port.type == PortType::VertexConnection &&
          ws.find_vertex(rec.port.element_index) == static_cast<int>(v))
        ported = true;
    if (!incident && !ported) ws.vertex_dead[v] = true;
  }

  // Renumber the input placeholders to a contiguous global u-sequence.
  {
    std::map<std::string, Expression> rules;
    int next = 0;
    for (auto& in : ws.inputs) {
      std::string final_var = symbols::input(++next);
      rules.emplace(in.var, Expression::symbol(final_var));
      in.var = final_var;
    }
    apply_substitution(ws, rules, 1, ws.vertices.size(), 0, ws.edges.size());
  }

  // Compact into a builder; build() renormalizes vertex order.
  GraphBuilder builder(name);
  std::vector<int> vertex_compact(ws.vertices.size(), 0);
  int next_vertex = 0;
  for (std::size_t v = 1; v < ws.vertices.size(); ++v) {
    if (ws.vertex_dead[v]) continue;
    vertex_compact[v] = ++next_vertex;
    builder.add_vertex(ws.vertices[v]);
  }
  auto resolve_vertex = [&](int v) {
    if (v == 0) return 0;
    int root = ws.find_vertex(v);
    return root > 0 ? vertex_compact[static_cast<std::size_t>(root)] : 0;
  };

  std::vector<int> edge_compact(ws.edges.size(), 0);
  int next_edge = 0;
  for (std::size_t j = 0; j < ws.edges.size(); ++j) {
    if (ws.edge_dead[j]) continue;
    edge_compact[j] = ++next_edge;
    builder.add_edge(ws.edges[j], resolve_vertex(ws.endpoints[j].tail),
                     resolve_vertex(ws.endpoints[j].head));
  }

  for (auto& p : ws.parameters) {
    if (auto* sr = std::get_if<StateRef>(&p.value)) {
      int mapped = resolve_vertex(sr->vertex);
      if (mapped == 0)
        throw CompositionError("state-bound parameter '" + p.var +
                               "' lost its target vertex during combine");
      sr->vertex = mapped;
    }
    builder.add_parameter(p);
  }
  for (const auto& in : ws.inputs) builder.add_input(in);
  for (const auto& rec : ws.ports) {
    if (rec.consumed) continue;
    Port port = rec.port;
    if (port.type == PortType::VertexConnection) {
      port.element_index = resolve_vertex(port.element_index);
      if (port.element_index == 0) continue;
    } else {
      port.element_index = edge_compact[static_cast<std::size_t>(port.element_index - 1)];
      if (port.element_index == 0) continue;
    }
    builder.add_port(port);
  }
  for (const auto& note : ws.notes) builder.add_note(note);
  return builder.build();
}

// ---------------------------------------------------------------------------
// Input dependencies
// ---------------------------------------------------------------------------

Graph input_common(const Graph& g,
                   const std::vector<std::pair<std::string, std::string>>& rules) {
  std::map<std::string, Expression> replacement;
  std::set<std::string> removed;
  for (const auto& [old_var, text] : rules) {
    if (!g.find_input(old_var))
      throw CompositionError("input_common: '" + old_var + "' is not a declared input");
    if (replacement.count(old_var))
      throw CompositionError("input_common: duplicate rule for '" + old_var + "'");
    Expression expr = Expression::parse(text);
    if (expr.is_symbol() && expr.symbol_name() == old_var) continue;  // identity rule
    for (const auto& sym : expr.free_symbols()) {
      if (symbols::input_index(sym)) {
        if (!g.find_input(sym))
          throw CompositionError("input_common: replacement for '" + old_var +
                                 "' references undeclared input " + sym);
      } else if (!g.find_parameter(sym)) {
        throw CompositionError("input_common: replacement for '" + old_var +
                               "' introduces undeclared symbol '" + sym + "'");
      }
    }
    replacement.emplace(old_var, std::move(expr));
    removed.insert(old_var);
  }
  for (const auto& [old_var, expr] : replacement)
    for (const auto& sym : expr.free_symbols())
      if (removed.count(sym))
        throw CompositionError("input_common: replacement for '" + old_var +
                               "' references removed input " + sym);

  GraphBuilder builder(g.name());
  std::vector<VertexSpec> vertices = g.vertices();
  std::vector<EdgeSpec> edges = g.edges();
  for (auto& v : vertices)
    for (auto& eq : v.equations) eq = eq.substitute(replacement);
  for (auto& e : edges)
    for (auto& f : e.flows) f.equation = f.equation.substitute(replacement);

  // Renumber the surviving inputs contiguously.
  std::vector<InputSpec> survivors;
  for (const auto& in : g.inputs())
    if (!removed.count(in.var)) survivors.push_back(in);
  std::map<std::string, Expression> renumber;
  std::vector<std::string> mapping_notes;
  for (std::size_t k = 0; k < survivors.size(); ++k) {
    std::string final_var = symbols::input(static_cast<int>(k) + 1);
    if (survivors[k].var != final_var) {
      renumber.emplace(survivors[k].var, Expression::symbol(final_var));
      mapping_notes.push_back("input " + survivors[k].var + " -> " + final_var);
      if (survivors[k].origin.empty()) survivors[k].origin = survivors[k].var;
      survivors[k].var = final_var;
    }
  }
  if (!renumber.empty()) {
    for (auto& v : vertices)
      for (auto& eq : v.equations) eq = eq.substitute(renumber);
    for (auto& e : edges)
      for (auto& f : e.flows) f.equation = f.equation.substitute(renumber);
  }

  for (const auto& v : vertices) builder.add_vertex(v);
  for (int j = 0; j < g.edge_count(); ++j) {
    const auto& ep = g.edge_matrix()[static_cast<std::size_t>(j)];
    builder.add_edge(edges[static_cast<std::size_t>(j)], ep.tail, ep.head);
  }
  for (const auto& p : g.parameters()) builder.add_parameter(p);
  for (const auto& in : survivors) builder.add_input(in);
  for (const auto& port : g.ports()) builder.add_port(port);
  for (const auto& note : g.notes()) builder.add_note(note);
  for (auto& note : mapping_notes) builder.add_note(std::move(note));
  return builder.build();
}

// ---------------------------------------------------------------------------
// Stitching
// ---------------------------------------------------------------------------

StitchedSystem stitch(std::string name, std::vector<Graph> graphs,
                      std::vector<AlgebraicModel> models, std::vector<ChainStep> chain,
                      std::vector<ExternalBinding> bindings,
                      std::map<std::string, double> boundary_conditions) {
  std::map<std::string, std::size_t> state_index;
  for (std::size_t i = 0; i < chain.size(); ++i) {
    if (chain[i].state.empty())
      throw CompositionError("stitch: chain step " + std::to_string(i + 1) +
                             " has no state name");
    if (!state_index.emplace(chain[i].state, i).second)
      throw CompositionError("stitch: algebraic state '" + chain[i].state +
                             "' is defined more than once");
  }

  std::map<std::string, const AlgebraicModel*> model_by_name;
  for (const auto& m : models) model_by_name[m.name] = &m;

  auto find_graph = [&](const std::string& gname) -> const Graph* {
    for (const auto& g : graphs)
      if (g.name() == gname) return &g;
    return nullptr;
  };

  auto resolves_dynamic = [&](const std::string& ref) {
    auto dot = ref.find('.');
    if (dot == std::string::npos) return false;
    const Graph* g = find_graph(ref.substr(0, dot));
    if (!g) return false;
    const std::string vname = ref.substr(dot + 1);
    for (const auto& v : g->vertices())
      if (v.name == vname && v.kind != VertexKind::External) return true;
    return false;
  };

  for (const auto& step : chain) {
    switch (step.kind) {
      case ChainStep::Kind::Prescription:
        if (!boundary_conditions.count(step.upstream))
          throw CompositionError("stitch: prescription for '" + step.state +
                                 "' references unknown boundary condition '" + step.upstream +
                                 "'");
        break;
      case ChainStep::Kind::Continuity:
      case ChainStep::Kind::Model:
        if (!state_index.count(step.upstream) && !resolves_dynamic(step.upstream))
          throw CompositionError("stitch: upstream reference '" + step.upstream + "' for '" +
                                 step.state + "' resolves to nothing");
        break;
    }
    if (step.kind == ChainStep::Kind::Model) {
      auto it = model_by_name.find(step.model);
      if (it == model_by_name.end())
        throw CompositionError("stitch: unknown algebraic model '" + step.model + "'");
      for (const auto& sym : it->second->outlet.free_symbols())
        if (sym != "x_up" && !it->second->params.count(sym))
          throw CompositionError("stitch: model '" + step.model +
                                 "' outlet references unknown symbol '" + sym + "'");
    }
  }

  // Cycle check: follow upstream links within the chain.
  for (std::size_t start = 0; start < chain.size(); ++start) {
    std::set<std::size_t> seen;
    std::size_t cur = start;
    for (;;) {
      if (!seen.insert(cur).second)
        throw CompositionError("stitch: cyclic algebraic dependency through '" +
                               chain[cur].state + "' without a dynamic or boundary anchor");
      auto it = state_index.find(chain[cur].upstream);
      if (chain[cur].kind == ChainStep::Kind::Prescription || it == state_index.end()) break;
      cur = it->second;
    }
  }

  for (const auto& bind : bindings) {
    const Graph* g = find_graph(bind.graph);
    if (!g)
      throw CompositionError("stitch: binding references unknown graph '" + bind.graph + "'");
    bool found = false;
    for (const auto& v : g->vertices())
      if (v.name == bind.external_vertex && v.kind == VertexKind::External) found = true;
    if (!found)
      throw CompositionError("stitch: binding references unknown external vertex '" +
                             bind.external_vertex + "' in graph '" + bind.graph + "'");
    if (!state_index.count(bind.chain_state))
      throw CompositionError("stitch: binding references unknown chain state '" +
                             bind.chain_state + "'");
  }

  StitchedSystem sys;
  sys.name = std::move(name);
  sys.graphs = std::move(graphs);
  sys.models = std::move(models);
  sys.chain = std::move(chain);
  sys.bindings = std::move(bindings);
  sys.boundary_conditions = std::move(boundary_conditions);
  return sys;
}

}  // namespace energraph
