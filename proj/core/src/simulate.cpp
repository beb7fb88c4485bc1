#include "energraph/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <set>

namespace energraph {

// ---------------------------------------------------------------------------
// SignalSchedule
// ---------------------------------------------------------------------------

SignalSchedule SignalSchedule::constants(const std::map<std::string, double>& values) {
  SignalSchedule s;
  for (const auto& [name, value] : values) s.set_constant(name, value);
  return s;
}

void SignalSchedule::set_constant(const std::string& name, double value) {
  series[name] = Series{{0.0}, {value}, true};
}

void SignalSchedule::set_series(const std::string& name, std::vector<double> times,
                                std::vector<double> values, bool piecewise_constant) {
  if (times.size() != values.size() || times.empty())
    throw SimulationError("signal series '" + name + "' needs matching nonempty samples");
  for (std::size_t i = 1; i < times.size(); ++i)
    if (times[i] < times[i - 1])
      throw SimulationError("signal series '" + name + "' has decreasing sample times");
  series[name] = Series{std::move(times), std::move(values), piecewise_constant};
}

double SignalSchedule::value(const std::string& name, double t, double fallback) const {
  auto it = series.find(name);
  if (it == series.end()) return fallback;
  const Series& s = it->second;
  if (t <= s.times.front()) return s.values.front();
  if (t >= s.times.back()) return s.values.back();
  auto up = std::upper_bound(s.times.begin(), s.times.end(), t);
  std::size_t i = static_cast<std::size_t>(up - s.times.begin()) - 1;
  if (s.piecewise_constant) return s.values[i];
  double span = s.times[i + 1] - s.times[i];
  if (span <= 0.0) return s.values[i + 1];
  double w = (t - s.times[i]) / span;
  return s.values[i] * (1.0 - w) + s.values[i + 1] * w;
}

// ---------------------------------------------------------------------------
// Assembly internals
// ---------------------------------------------------------------------------

namespace {

/// Compiled expression plus its compiled partial derivatives, grouped by the
/// slot each symbol resolved to. Slots whose symbolic derivative is
/// unavailable (table calls) are listed for finite-difference fallback.
struct Entry {
  CompiledExpr value;
  struct Partial {
    int slot;
    CompiledExpr d;
  };
  std::vector<Partial> dstate;
  std::vector<Partial> dinput;
  std::vector<int> fd_state;
  std::vector<int> fd_input;
  std::string label;
};

constexpr double kGaussNodes[8] = {
    0.01985507175123188, 0.10166676129318664, 0.2372337950418355, 0.40828267875217505,
    0.5917173212478249,  0.7627662049581645,  0.8983332387068134, 0.9801449282487681};
constexpr double kGaussWeights[8] = {
    0.05061426814518813, 0.11119051722668723, 0.15685332293894364, 0.18134189168918097,
    0.18134189168918097, 0.15685332293894364, 0.11119051722668723, 0.05061426814518813};

}  // namespace

struct DynamicSystem::Impl {
  std::string name;
  bool dae = false;

  // Slot layout: [states][scalar params][inputs][disturbances][t].
  int n_states = 0;
  int n_inputs = 0;
  int n_dist = 0;
  int slot_inputs0 = 0;
  int slot_dist0 = 0;
  int slot_time = 0;
  std::vector<double> slot_template;  // parameter slots prefilled

  std::vector<std::string> state_names;
  std::vector<std::string> input_names;
  std::vector<std::string> input_origins;
  std::vector<std::string> dist_names;
  std::vector<double> dist_fallback;
  std::vector<std::string> flow_names;

  Eigen::VectorXd mass_diag;
  std::vector<double> initial;
  std::vector<bool> initial_assigned;

  std::vector<Entry> flow_entries;

  struct Block {
    int first_row = 0;
    int size = 0;
    bool algebraic = false;
    std::vector<Entry> cap;     // size*size row-major (dynamic blocks)
    std::vector<Entry> offset;  // size (algebraic: the whole equation)
    std::string vertex_name;
  };
  std::vector<Block> blocks;

  struct ChainRow {
    int row = 0;
    Entry rhs;
    std::string state_name;
  };
  std::vector<ChainRow> chain_rows;

  struct WTriplet {
    int row;
    int flow;
    double sign;
  };
  std::vector<WTriplet> w;

  std::vector<Graph> graphs;  // owns the lookup tables the code points into

  // -- evaluation helpers ---------------------------------------------------

  void fill_slots(std::vector<double>& slots, const Eigen::VectorXd& x,
                  const Eigen::VectorXd& u, const Eigen::VectorXd& d, double t) const {
    slots = slot_template;
    for (int i = 0; i < n_states; ++i) slots[static_cast<std::size_t>(i)] = x[i];
    for (int i = 0; i < n_inputs; ++i) slots[static_cast<std::size_t>(slot_inputs0 + i)] = u[i];
    for (int i = 0; i < n_dist; ++i) slots[static_cast<std::size_t>(slot_dist0 + i)] = d[i];
    slots[static_cast<std::size_t>(slot_time)] = t;
  }

  static double fd_derivative(const CompiledExpr& value, std::vector<double>& slots, int slot) {
    const double saved = slots[static_cast<std::size_t>(slot)];
    const double h = 1e-6 * std::max(1.0, std::abs(saved));
    slots[static_cast<std::size_t>(slot)] = saved + h;
    const double plus = value.eval(slots);
    slots[static_cast<std::size_t>(slot)] = saved - h;
    const double minus = value.eval(slots);
    slots[static_cast<std::size_t>(slot)] = saved;
    return (plus - minus) / (2.0 * h);
  }

  Eigen::VectorXd eval_flows(std::vector<double>& slots) const {
    Eigen::VectorXd gamma(static_cast<Eigen::Index>(flow_entries.size()));
    for (std::size_t k = 0; k < flow_entries.size(); ++k)
      gamma[static_cast<Eigen::Index>(k)] = flow_entries[k].value.eval(slots);
    return gamma;
  }

  /// Net inflow v = W * Gamma minus the vertex-equation offsets, i.e. the
  /// right side each capacitance block is solved against.
  Eigen::VectorXd eval_rhs(std::vector<double>& slots, const Eigen::VectorXd& gamma) const {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(n_states);
    for (const auto& t : w) v[t.row] += t.sign * gamma[t.flow];
    for (const auto& b : blocks)
      for (int r = 0; r < b.size; ++r)
        v[b.first_row + r] -= b.offset[static_cast<std::size_t>(r)].value.eval(slots);
    return v;
  }

  Eigen::MatrixXd eval_block_capacitance(const Block& b, std::vector<double>& slots) const {
    Eigen::MatrixXd c(b.size, b.size);
    for (int r = 0; r < b.size; ++r)
      for (int m = 0; m < b.size; ++m)
        c(r, m) = b.cap[static_cast<std::size_t>(r * b.size + m)].value.eval(slots);
    return c;
  }

  /// Solves the dynamic blocks for the state derivative; algebraic rows are
  /// left as NaN (callers either reject DAE form or overwrite them).
  Eigen::VectorXd solve_blocks(std::vector<double>& slots, const Eigen::VectorXd& v,
                               double t) const {
    Eigen::VectorXd xdot =
        Eigen::VectorXd::Constant(n_states, std::numeric_limits<double>::quiet_NaN());
    for (const auto& b : blocks) {
      if (b.algebraic) continue;
      Eigen::MatrixXd c = eval_block_capacitance(b, slots);
      Eigen::FullPivLU<Eigen::MatrixXd> lu(c);
      if (!lu.isInvertible())
        throw SimulationError("singular capacitance block for vertex '" + b.vertex_name +
                              "' at t=" + std::to_string(t));
      xdot.segment(b.first_row, b.size) = lu.solve(v.segment(b.first_row, b.size));
    }
    return xdot;
  }

  /// d(entry)/d(state slot) with finite-difference fallback, accumulated
  /// into a dense matrix row/column store.
  void accumulate_state_partials(const Entry& e, std::vector<double>& slots,
                                 const std::function<void(int, double)>& sink) const {
    for (const auto& p : e.dstate) sink(p.slot, p.d.eval(slots));
    for (int slot : e.fd_state) sink(slot, fd_derivative(e.value, slots, slot));
  }

  void accumulate_input_partials(const Entry& e, std::vector<double>& slots,
                                 const std::function<void(int, double)>& sink) const {
    for (const auto& p : e.dinput) sink(p.slot - slot_inputs0, p.d.eval(slots));
    for (int slot : e.fd_input) sink(slot - slot_inputs0, fd_derivative(e.value, slots, slot));
  }
};

namespace {

using Impl = DynamicSystem::Impl;

/// Builds an Entry: compiles the expression and the symbolic partial with
/// respect to every symbol that maps to a state or input slot. Symbols whose
/// derivative has no closed form fall back to finite differences.
Entry make_entry(const Expression& source, const std::map<std::string, int>& slots,
                 const CallResolver* calls, int n_states, int slot_inputs0, int n_inputs,
                 std::string label) {
  Entry e;
  e.label = std::move(label);
  e.value = CompiledExpr::compile(source, slots, calls);

  std::map<int, Expression> by_state;
  std::map<int, Expression> by_input;
  std::set<int> fd_state, fd_input;
  for (const auto& sym : source.free_symbols()) {
    auto it = slots.find(sym);
    if (it == slots.end()) continue;
    const int slot = it->second;
    const bool is_state = slot < n_states;
    const bool is_input = slot >= slot_inputs0 && slot < slot_inputs0 + n_inputs;
    if (!is_state && !is_input) continue;
    try {
      Expression d = source.differentiate(sym);
      if (d.is_constant(0.0)) continue;
      auto& bucket = is_state ? by_state : by_input;
      auto found = bucket.find(slot);
      if (found == bucket.end())
        bucket.emplace(slot, std::move(d));
      else
        found->second = Expression::add(found->second, d);
    } catch (const UnsupportedDerivative&) {
      (is_state ? fd_state : fd_input).insert(slot);
    }
  }
  for (auto& [slot, d] : by_state)
    e.dstate.push_back({slot, CompiledExpr::compile(d, slots, calls)});
  for (auto& [slot, d] : by_input)
    e.dinput.push_back({slot, CompiledExpr::compile(d, slots, calls)});
  e.fd_state.assign(fd_state.begin(), fd_state.end());
  e.fd_input.assign(fd_input.begin(), fd_input.end());
  return e;
}

std::shared_ptr<Impl> assemble_impl(std::string system_name, std::vector<Graph> graphs,
                                    const StitchedSystem* stitched) {
  auto impl = std::make_shared<Impl>();
  impl->name = std::move(system_name);
  impl->graphs = std::move(graphs);

  for (const auto& g : impl->graphs) {
    ValidationReport report = validate(g);
    if (!report.ok()) {
      std::string msg = "cannot assemble '" + g.name() + "':";
      for (const auto& e : report.errors) msg += "\n  " + e;
      throw SimulationError(msg);
    }
  }

  const bool qualify = stitched != nullptr || impl->graphs.size() > 1;
  const int n_chain = stitched ? static_cast<int>(stitched->chain.size()) : 0;
  impl->dae = stitched != nullptr;

  // ---- state layout ----
  struct VertexSlot {
    int first_row = -1;
  };
  std::vector<std::vector<VertexSlot>> vertex_rows(impl->graphs.size());
  std::map<std::string, int> chain_slot;  // chain state name -> state slot

  int row = 0;
  for (int c = 0; c < n_chain; ++c) {
    const auto& step = stitched->chain[static_cast<std::size_t>(c)];
    chain_slot[step.state] = row;
    impl->state_names.push_back(step.state);
    ++row;
  }
  for (std::size_t gi = 0; gi < impl->graphs.size(); ++gi) {
    const Graph& g = impl->graphs[gi];
    vertex_rows[gi].resize(static_cast<std::size_t>(g.vertex_count()));
    const std::string prefix = qualify ? g.name() + "." : "";
    for (int vi = 1; vi <= g.vertex_count(); ++vi) {
      const auto& v = g.vertex(vi);
      if (v.kind == VertexKind::External) continue;
      vertex_rows[gi][static_cast<std::size_t>(vi - 1)].first_row = row;
      for (int m = 1; m <= v.state_count; ++m) {
        impl->state_names.push_back(prefix + v.name +
                                    (v.state_count > 1 ? "[" + std::to_string(m) + "]" : ""));
        ++row;
      }
      if (v.kind == VertexKind::Algebraic) impl->dae = true;
    }
  }
  impl->n_states = row;

  impl->mass_diag = Eigen::VectorXd::Zero(impl->n_states);
  impl->initial.assign(static_cast<std::size_t>(impl->n_states), 0.0);
  impl->initial_assigned.assign(static_cast<std::size_t>(impl->n_states), false);
  for (int c = 0; c < n_chain; ++c) impl->initial_assigned[static_cast<std::size_t>(c)] = true;

  // ---- parameter, input, disturbance slots ----
  int slot = impl->n_states;
  std::vector<std::map<std::string, int>> param_slot(impl->graphs.size());
  std::vector<std::map<std::string, int>> input_slot(impl->graphs.size());
  std::vector<std::map<int, int>> ext_state_slot(impl->graphs.size());  // vertex -> first slot
  impl->slot_template.clear();

  std::map<std::pair<std::size_t, std::string>, const Parameter*> table_params;

  for (std::size_t gi = 0; gi < impl->graphs.size(); ++gi) {
    const Graph& g = impl->graphs[gi];
    for (const auto& p : g.parameters()) {
      if (p.is_scalar()) {
        param_slot[gi][p.var] = slot++;
      } else if (p.is_state_ref()) {
        const auto& sr = std::get<StateRef>(p.value);
        param_slot[gi][p.var] =
            vertex_rows[gi][static_cast<std::size_t>(sr.vertex - 1)].first_row + sr.state - 1;
      } else {
        table_params[{gi, p.var}] = &p;
      }
    }
  }
  impl->slot_inputs0 = slot;
  for (std::size_t gi = 0; gi < impl->graphs.size(); ++gi) {
    const Graph& g = impl->graphs[gi];
    const std::string prefix = qualify ? g.name() + "." : "";
    for (const auto& in : g.inputs()) {
      input_slot[gi][in.var] = slot++;
      impl->input_names.push_back(prefix + in.var);
      impl->input_origins.push_back(in.origin);
    }
  }
  impl->n_inputs = static_cast<int>(impl->input_names.size());

  impl->slot_dist0 = slot;
  std::map<std::string, int> bc_slot;
  for (std::size_t gi = 0; gi < impl->graphs.size(); ++gi) {
    const Graph& g = impl->graphs[gi];
    const std::string prefix = qualify ? g.name() + "." : "";
    for (int vi = 1; vi <= g.vertex_count(); ++vi) {
      const auto& v = g.vertex(vi);
      if (v.kind != VertexKind::External) continue;
      // A bound external vertex aliases its chain state instead of owning a
      // disturbance slot.
      const ChainStep* bound = nullptr;
      if (stitched) {
        for (const auto& bind : stitched->bindings)
          if (bind.graph == g.name() && bind.external_vertex == v.name)
            for (const auto& step : stitched->chain)
              if (step.state == bind.chain_state) bound = &step;
      }
      if (bound) {
        if (v.state_count != 1)
          throw SimulationError("bound external vertex '" + v.name +
                                "' must carry a single state");
        ext_state_slot[gi][vi] = chain_slot.at(bound->state);
        continue;
      }
      ext_state_slot[gi][vi] = slot;
      for (int m = 1; m <= v.state_count; ++m) {
        impl->dist_names.push_back(prefix + v.name +
                                   (v.state_count > 1 ? "[" + std::to_string(m) + "]" : ""));
        impl->dist_fallback.push_back(0.0);
        ++slot;
      }
    }
  }
  if (stitched) {
    for (const auto& [bc_name, bc_value] : stitched->boundary_conditions) {
      bc_slot[bc_name] = slot++;
      impl->dist_names.push_back(bc_name);
      impl->dist_fallback.push_back(bc_value);
    }
  }
  impl->n_dist = static_cast<int>(impl->dist_names.size());
  impl->slot_time = slot++;
  impl->slot_template.assign(static_cast<std::size_t>(slot), 0.0);

  // Fill parameter values into the template.
  for (std::size_t gi = 0; gi < impl->graphs.size(); ++gi)
    for (const auto& p : impl->graphs[gi].parameters())
      if (p.is_scalar())
        impl->slot_template[static_cast<std::size_t>(param_slot[gi][p.var])] = p.scalar();

  // ---- compile vertex blocks ----
  for (std::size_t gi = 0; gi < impl->graphs.size(); ++gi) {
    const Graph& g = impl->graphs[gi];
    CallResolver calls;
    calls.table1d = [impl_raw = impl.get(), gi](const std::string& name) -> const LookupTable1D* {
      const Parameter* p = impl_raw->graphs[gi].find_parameter(name);
      return p && p->is_table1d() ? &std::get<LookupTable1D>(p->value) : nullptr;
    };
    calls.table2d = [impl_raw = impl.get(), gi](const std::string& name) -> const LookupTable2D* {
      const Parameter* p = impl_raw->graphs[gi].find_parameter(name);
      return p && p->is_table2d() ? &std::get<LookupTable2D>(p->value) : nullptr;
    };

    for (int vi = 1; vi <= g.vertex_count(); ++vi) {
      const auto& v = g.vertex(vi);
      if (v.kind == VertexKind::External) continue;
      Impl::Block block;
      block.first_row = vertex_rows[gi][static_cast<std::size_t>(vi - 1)].first_row;
      block.size = v.state_count;
      block.algebraic = v.kind == VertexKind::Algebraic;
      block.vertex_name = v.name;

      std::map<std::string, int> local = param_slot[gi];
      for (int m = 1; m <= v.state_count; ++m)
        local[symbols::state(m)] = block.first_row + m - 1;
      local["x"] = block.first_row;
      local["t"] = impl->slot_time;

      std::map<std::string, Expression> zero_dots;
      zero_dots.emplace("x_dot", Expression::constant(0.0));
      for (int m = 1; m <= v.state_count; ++m)
        zero_dots.emplace(symbols::state_dot(m), Expression::constant(0.0));

      for (int r = 0; r < v.state_count; ++r) {
        const Expression& eq = v.equations[static_cast<std::size_t>(r)];
        if (!block.algebraic) {
          for (int m = 1; m <= v.state_count; ++m) {
            Expression c = eq.differentiate(symbols::state_dot(m));
            if (m == 1) c = Expression::add(c, eq.differentiate("x_dot"));
            block.cap.push_back(make_entry(c, local, &calls, impl->n_states,
                                           impl->slot_inputs0, impl->n_inputs,
                                           v.name + " C[" + std::to_string(r + 1) + "][" +
                                               std::to_string(m) + "]"));
          }
        }
        block.offset.push_back(make_entry(eq.substitute(zero_dots), local, &calls,
                                          impl->n_states, impl->slot_inputs0, impl->n_inputs,
                                          v.name + " offset"));
      }

      if (!block.algebraic) {
        for (int m = 0; m < v.state_count; ++m)
          impl->mass_diag[block.first_row + m] = 1.0;
        // Reject capacitance blocks that are constant and singular outright.
        bool constant = true;
        for (const auto& entry : block.cap)
          if (!entry.dstate.empty() || !entry.fd_state.empty()) constant = false;
        if (constant) {
          std::vector<double> probe = impl->slot_template;
          Eigen::MatrixXd c(block.size, block.size);
          for (int r = 0; r < block.size; ++r)
            for (int m = 0; m < block.size; ++m)
              c(r, m) = block.cap[static_cast<std::size_t>(r * block.size + m)].value.eval(probe);
          if (!Eigen::FullPivLU<Eigen::MatrixXd>(c).isInvertible())
            throw SimulationError("singular constant capacitance block for vertex '" + v.name +
                                  "'");
        }
        if (v.initial_condition) {
          for (int m = 0; m < v.state_count; ++m) {
            impl->initial[static_cast<std::size_t>(block.first_row + m)] =
                (*v.initial_condition)[static_cast<std::size_t>(m)];
            impl->initial_assigned[static_cast<std::size_t>(block.first_row + m)] = true;
          }
        }
      } else {
        if (v.initial_condition)
          for (int m = 0; m < v.state_count; ++m)
            impl->initial[static_cast<std::size_t>(block.first_row + m)] =
                (*v.initial_condition)[static_cast<std::size_t>(m)];
        for (int m = 0; m < v.state_count; ++m)
          impl->initial_assigned[static_cast<std::size_t>(block.first_row + m)] = true;
      }
      impl->blocks.push_back(std::move(block));
    }

    // ---- compile flow entries and the structure matrix ----
    const std::string prefix = qualify ? g.name() + "." : "";
    const int n_internal = g.dynamic_vertex_count() + g.algebraic_vertex_count();
    for (int j = 1; j <= g.edge_count(); ++j) {
      const auto& e = g.edge(j);
      const auto& ep = g.edge_matrix()[static_cast<std::size_t>(j - 1)];
      for (int n = 0; n < e.flow_arity(); ++n) {
        const auto& entry = e.flows[static_cast<std::size_t>(n)];
        std::map<std::string, int> local = param_slot[gi];
        for (const auto& [var, s] : input_slot[gi]) local[var] = s;
        local["t"] = impl->slot_time;
        auto map_endpoint = [&](int vertex, bool head) {
          if (vertex == 0) return;
          const auto& vs = g.vertex(vertex);
          int base = vs.kind == VertexKind::External
                         ? ext_state_slot[gi].at(vertex)
                         : vertex_rows[gi][static_cast<std::size_t>(vertex - 1)].first_row;
          for (int m = 1; m <= vs.state_count; ++m) {
            local[head ? symbols::head(m) : symbols::tail(m)] = base + m - 1;
            if (m == 1) local[head ? "xh" : "xt"] = base;
          }
        };
        map_endpoint(ep.tail, false);
        map_endpoint(ep.head, true);

        const int flow_index = static_cast<int>(impl->flow_entries.size());
        impl->flow_names.push_back(prefix + e.name +
                                   (e.flow_arity() > 1 ? "[" + std::to_string(n + 1) + "]" : ""));
        impl->flow_entries.push_back(make_entry(entry.equation, local, &calls, impl->n_states,
                                                impl->slot_inputs0, impl->n_inputs,
                                                impl->flow_names.back()));

        if (ep.tail >= 1 && ep.tail <= n_internal)
          impl->w.push_back(
              {vertex_rows[gi][static_cast<std::size_t>(ep.tail - 1)].first_row +
                   entry.tail_state - 1,
               flow_index, -1.0});
        if (ep.head >= 1 && ep.head <= n_internal)
          impl->w.push_back(
              {vertex_rows[gi][static_cast<std::size_t>(ep.head - 1)].first_row +
                   entry.head_state - 1,
               flow_index, 1.0});
      }
    }
  }

  // ---- compile the stitched chain rows ----
  if (stitched) {
    auto resolve_upstream = [&](const std::string& ref) -> int {
      auto it = chain_slot.find(ref);
      if (it != chain_slot.end()) return it->second;
      auto dot = ref.find('.');
      if (dot != std::string::npos) {
        const std::string gname = ref.substr(0, dot);
        const std::string vname = ref.substr(dot + 1);
        for (std::size_t gi = 0; gi < impl->graphs.size(); ++gi) {
          const Graph& g = impl->graphs[gi];
          if (g.name() != gname) continue;
          for (int vi = 1; vi <= g.vertex_count(); ++vi)
            if (g.vertex(vi).name == vname && g.vertex(vi).kind != VertexKind::External)
              return vertex_rows[gi][static_cast<std::size_t>(vi - 1)].first_row;
        }
      }
      throw SimulationError("stitched upstream reference '" + ref + "' did not resolve");
    };

    for (int c = 0; c < n_chain; ++c) {
      const auto& step = stitched->chain[static_cast<std::size_t>(c)];
      Impl::ChainRow cr;
      cr.row = c;
      cr.state_name = step.state;
      Expression rhs;
      std::map<std::string, int> local;
      local["t"] = impl->slot_time;
      switch (step.kind) {
        case ChainStep::Kind::Prescription:
          rhs = Expression::symbol("bc_value");
          local["bc_value"] = bc_slot.at(step.upstream);
          break;
        case ChainStep::Kind::Continuity:
          rhs = Expression::symbol("x_up");
          local["x_up"] = resolve_upstream(step.upstream);
          break;
        case ChainStep::Kind::Model: {
          const AlgebraicModel* model = nullptr;
          for (const auto& m : stitched->models)
            if (m.name == step.model) model = &m;
          std::map<std::string, Expression> subst;
          for (const auto& [var, value] : model->params)
            subst.emplace(var, Expression::constant(value));
          rhs = model->outlet.substitute(subst);
          local["x_up"] = resolve_upstream(step.upstream);
          break;
        }
      }
      cr.rhs = make_entry(rhs, local, nullptr, impl->n_states, impl->slot_inputs0,
                          impl->n_inputs, "chain " + step.state);
      impl->chain_rows.push_back(std::move(cr));
    }
  }

  return impl;
}

}  // namespace

// ---------------------------------------------------------------------------
// DynamicSystem surface
// ---------------------------------------------------------------------------

DynamicSystem assemble(const Graph& g) {
  DynamicSystem sys;
  sys.impl_ = assemble_impl(g.name(), {g}, nullptr);
  return sys;
}

DynamicSystem assemble(const StitchedSystem& s) {
  DynamicSystem sys;
  sys.impl_ = assemble_impl(s.name, s.graphs, &s);
  return sys;
}

const std::string& DynamicSystem::name() const { return impl_->name; }
bool DynamicSystem::is_dae() const { return impl_->dae; }
int DynamicSystem::state_count() const { return impl_->n_states; }
int DynamicSystem::input_count() const { return impl_->n_inputs; }
int DynamicSystem::disturbance_count() const { return impl_->n_dist; }
int DynamicSystem::flow_count() const { return static_cast<int>(impl_->flow_entries.size()); }
const std::vector<std::string>& DynamicSystem::state_names() const { return impl_->state_names; }
const std::vector<std::string>& DynamicSystem::input_names() const { return impl_->input_names; }
const std::vector<std::string>& DynamicSystem::disturbance_names() const {
  return impl_->dist_names;
}
const std::vector<std::string>& DynamicSystem::flow_names() const { return impl_->flow_names; }
Eigen::VectorXd DynamicSystem::mass_diagonal() const { return impl_->mass_diag; }

Eigen::MatrixXd DynamicSystem::structure_matrix() const {
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(impl_->n_states,
                                            static_cast<Eigen::Index>(impl_->flow_entries.size()));
  for (const auto& t : impl_->w) w(t.row, t.flow) += t.sign;
  return w;
}

long DynamicSystem::table_extrapolations() const {
  long total = 0;
  for (const auto& g : impl_->graphs)
    for (const auto& p : g.parameters()) {
      if (p.is_table1d()) total += std::get<LookupTable1D>(p.value).extrapolation_count();
      if (p.is_table2d()) total += std::get<LookupTable2D>(p.value).extrapolation_count();
    }
  return total;
}

Eigen::VectorXd DynamicSystem::initial_state() const {
  for (int i = 0; i < impl_->n_states; ++i)
    if (!impl_->initial_assigned[static_cast<std::size_t>(i)])
      throw SimulationError("initial condition unassigned for state '" +
                            impl_->state_names[static_cast<std::size_t>(i)] + "'");
  return Eigen::Map<const Eigen::VectorXd>(impl_->initial.data(), impl_->n_states);
}

Eigen::VectorXd DynamicSystem::f(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                                 const Eigen::VectorXd& d, double t) const {
  if (impl_->dae)
    throw SimulationError("system '" + impl_->name +
                          "' is in DAE form; use simulate_dae or dae_residual");
  std::vector<double> slots;
  impl_->fill_slots(slots, x, u, d, t);
  Eigen::VectorXd gamma = impl_->eval_flows(slots);
  Eigen::VectorXd v = impl_->eval_rhs(slots, gamma);
  return impl_->solve_blocks(slots, v, t);
}

Eigen::VectorXd DynamicSystem::flows(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                                     const Eigen::VectorXd& d, double t) const {
  std::vector<double> slots;
  impl_->fill_slots(slots, x, u, d, t);
  return impl_->eval_flows(slots);
}

Eigen::VectorXd DynamicSystem::dae_residual(const Eigen::VectorXd& x,
                                            const Eigen::VectorXd& xdot,
                                            const Eigen::VectorXd& u, const Eigen::VectorXd& d,
                                            double t) const {
  std::vector<double> slots;
  impl_->fill_slots(slots, x, u, d, t);
  Eigen::VectorXd gamma = impl_->eval_flows(slots);
  Eigen::VectorXd v = impl_->eval_rhs(slots, gamma);
  Eigen::VectorXd r = Eigen::VectorXd::Zero(impl_->n_states);
  for (const auto& cr : impl_->chain_rows)
    r[cr.row] = x[cr.row] - cr.rhs.value.eval(slots);
  for (const auto& b : impl_->blocks) {
    if (b.algebraic) {
      // offset already subtracted inside v, so the constraint is just -v.
      for (int m = 0; m < b.size; ++m) r[b.first_row + m] = -v[b.first_row + m];
    } else {
      Eigen::MatrixXd c = impl_->eval_block_capacitance(b, slots);
      Eigen::FullPivLU<Eigen::MatrixXd> lu(c);
      if (!lu.isInvertible())
        throw SimulationError("singular capacitance block for vertex '" + b.vertex_name +
                              "' at t=" + std::to_string(t));
      r.segment(b.first_row, b.size) =
          xdot.segment(b.first_row, b.size) - lu.solve(v.segment(b.first_row, b.size));
    }
  }
  return r;
}

JacobianResult DynamicSystem::jacobians(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                                        const Eigen::VectorXd& d, double t) const {
  if (impl_->dae)
    throw SimulationError("jacobians() requires the ODE form");
  const Impl& im = *impl_;
  const int n = im.n_states;
  const int m = im.n_inputs;

  std::vector<double> slots;
  im.fill_slots(slots, x, u, d, t);
  Eigen::VectorXd gamma = im.eval_flows(slots);
  Eigen::VectorXd v = im.eval_rhs(slots, gamma);
  Eigen::VectorXd f0 = im.solve_blocks(slots, v, t);

  JacobianResult out;
  std::set<std::string> fd_labels;

  // dv/dx and dv/du accumulated through the structure triplets.
  Eigen::MatrixXd dvdx = Eigen::MatrixXd::Zero(n, n);
  Eigen::MatrixXd dvdu = Eigen::MatrixXd::Zero(n, m);
  std::vector<std::vector<std::pair<int, double>>> flow_dx(im.flow_entries.size());
  std::vector<std::vector<std::pair<int, double>>> flow_du(im.flow_entries.size());
  for (std::size_t k = 0; k < im.flow_entries.size(); ++k) {
    const Entry& e = im.flow_entries[k];
    im.accumulate_state_partials(
        e, slots, [&](int s, double val) { flow_dx[k].push_back({s, val}); });
    im.accumulate_input_partials(
        e, slots, [&](int s, double val) { flow_du[k].push_back({s, val}); });
    if (!e.fd_state.empty() || !e.fd_input.empty()) fd_labels.insert(e.label);
  }
  for (const auto& trip : im.w) {
    for (const auto& [s, val] : flow_dx[static_cast<std::size_t>(trip.flow)])
      dvdx(trip.row, s) += trip.sign * val;
    for (const auto& [s, val] : flow_du[static_cast<std::size_t>(trip.flow)])
      dvdu(trip.row, s) += trip.sign * val;
  }
  for (const auto& b : im.blocks)
    for (int r = 0; r < b.size; ++r) {
      const Entry& g_entry = b.offset[static_cast<std::size_t>(r)];
      im.accumulate_state_partials(
          g_entry, slots, [&](int s, double val) { dvdx(b.first_row + r, s) -= val; });
      if (!g_entry.fd_state.empty()) fd_labels.insert(g_entry.label);
    }

  out.dfdx = Eigen::MatrixXd::Zero(n, n);
  out.dfdu = Eigen::MatrixXd::Zero(n, m);
  for (const auto& b : im.blocks) {
    Eigen::MatrixXd c = im.eval_block_capacitance(b, slots);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(c);
    if (!lu.isInvertible())
      throw SimulationError("singular capacitance block for vertex '" + b.vertex_name + "'");
    // d(C f)/dx = dv/dx  =>  C dfdx = dv/dx - (dC/dx_j) f0 column by column.
    Eigen::MatrixXd rhs = dvdx.block(b.first_row, 0, b.size, n);
    for (int r = 0; r < b.size; ++r)
      for (int mm = 0; mm < b.size; ++mm) {
        const Entry& ce = b.cap[static_cast<std::size_t>(r * b.size + mm)];
        im.accumulate_state_partials(ce, slots, [&](int s, double val) {
          rhs(r, s) -= val * f0[b.first_row + mm];
        });
        if (!ce.fd_state.empty()) fd_labels.insert(ce.label);
      }
    out.dfdx.block(b.first_row, 0, b.size, n) = lu.solve(rhs);
    out.dfdu.block(b.first_row, 0, b.size, m) =
        lu.solve(dvdu.block(b.first_row, 0, b.size, m));
  }
  for (const auto& label : fd_labels)
    out.notes.push_back("finite-difference fallback used for " + label);
  return out;
}

double DynamicSystem::stored_energy(const Eigen::VectorXd& x) const {
  const Impl& im = *impl_;
  double energy = 0.0;
  std::vector<double> slots = im.slot_template;
  slots[static_cast<std::size_t>(im.slot_time)] = 0.0;
  for (int q = 0; q < 8; ++q) {
    const double s = kGaussNodes[q];
    for (int i = 0; i < im.n_states; ++i) slots[static_cast<std::size_t>(i)] = s * x[i];
    double rate = 0.0;
    for (const auto& b : im.blocks) {
      if (b.algebraic) continue;
      for (int r = 0; r < b.size; ++r)
        for (int m = 0; m < b.size; ++m)
          rate += b.cap[static_cast<std::size_t>(r * b.size + m)].value.eval(slots) *
                  x[b.first_row + m];
    }
    energy += kGaussWeights[q] * rate;
  }
  return energy;
}

double DynamicSystem::external_power(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                                     const Eigen::VectorXd& d, double t) const {
  std::vector<double> slots;
  impl_->fill_slots(slots, x, u, d, t);
  Eigen::VectorXd gamma = impl_->eval_flows(slots);
  double p = 0.0;
  for (const auto& trip : impl_->w) p += trip.sign * gamma[trip.flow];
  return p;
}

Eigen::VectorXd DynamicSystem::disturbances_at(const SignalSchedule& schedule, double t) const {
  Eigen::VectorXd d(impl_->n_dist);
  for (int i = 0; i < impl_->n_dist; ++i)
    d[i] = schedule.value(impl_->dist_names[static_cast<std::size_t>(i)], t,
                          impl_->dist_fallback[static_cast<std::size_t>(i)]);
  return d;
}

Eigen::VectorXd DynamicSystem::inputs_at(const SignalSchedule& schedule, double t) const {
  Eigen::VectorXd u(impl_->n_inputs);
  for (int i = 0; i < impl_->n_inputs; ++i) {
    const std::string& name = impl_->input_names[static_cast<std::size_t>(i)];
    const std::string& origin = impl_->input_origins[static_cast<std::size_t>(i)];
    if (schedule.has(name) || origin.empty() || !schedule.has(origin))
      u[i] = schedule.value(name, t, 0.0);
    else
      u[i] = schedule.value(origin, t, 0.0);
  }
  return u;
}

// ---------------------------------------------------------------------------
// Integration
// ---------------------------------------------------------------------------

namespace {

int step_count(double t0, double t1, double dt) {
  if (!(dt > 0.0)) throw SimulationError("dt must be positive");
  if (t1 < t0) throw SimulationError("t_final must not precede t_start");
  const double span = t1 - t0;
  if (span == 0.0) return 0;
  const double raw = span / dt;
  int n = static_cast<int>(std::llround(raw));
  if (n < 1 || std::abs(n * dt - span) > 1e-9 * std::max(1.0, span))
    n = static_cast<int>(std::ceil(raw - 1e-12));
  return n;
}

void check_finite(const Eigen::VectorXd& x, const DynamicSystem& sys, int step, double t) {
  for (int i = 0; i < x.size(); ++i)
    if (!std::isfinite(x[i]))
      throw SimulationError("non-finite state '" +
                            sys.state_names()[static_cast<std::size_t>(i)] + "' at step " +
                            std::to_string(step) + " (t=" + std::to_string(t) + ")");
}

Trajectory make_trajectory(const DynamicSystem& sys, int rows) {
  Trajectory traj;
  traj.time.reserve(static_cast<std::size_t>(rows));
  traj.states.resize(rows, sys.state_count());
  traj.inputs.resize(rows, sys.input_count());
  traj.flows.resize(rows, sys.flow_count());
  traj.stored_energy.resize(rows);
  traj.external_power.resize(rows);
  traj.state_names = sys.state_names();
  traj.input_names = sys.input_names();
  traj.flow_names = sys.flow_names();
  return traj;
}

void record_row(Trajectory& traj, int row, const DynamicSystem& sys, double t,
                const Eigen::VectorXd& x, const Eigen::VectorXd& u, const Eigen::VectorXd& d) {
  traj.time.push_back(t);
  traj.states.row(row) = x.transpose();
  traj.inputs.row(row) = u.transpose();
  traj.flows.row(row) = sys.flows(x, u, d, t).transpose();
  traj.stored_energy[row] = sys.stored_energy(x);
  traj.external_power[row] = sys.external_power(x, u, d, t);
}

InputPolicy schedule_policy(const DynamicSystem& sys, const SignalSchedule& schedule) {
  return [&sys, &schedule](double t, const Eigen::VectorXd&, const Eigen::VectorXd&) {
    return sys.inputs_at(schedule, t);
  };
}

}  // namespace

Trajectory simulate_ode(const DynamicSystem& sys, const Eigen::VectorXd& x0,
                        const SignalSchedule& schedule, double t0, double t1, double dt) {
  return simulate_ode(sys, x0, schedule_policy(sys, schedule), schedule, t0, t1, dt);
}

Trajectory simulate_ode(const DynamicSystem& sys, const Eigen::VectorXd& x0,
                        const InputPolicy& policy, const SignalSchedule& disturbances,
                        double t0, double t1, double dt) {
  if (sys.is_dae())
    throw SimulationError("system '" + sys.name() + "' is in DAE form; use simulate_dae");
  if (x0.size() != sys.state_count())
    throw SimulationError("x0 length " + std::to_string(x0.size()) +
                          " does not match state count " + std::to_string(sys.state_count()));
  check_finite(x0, sys, 0, t0);

  const int n = step_count(t0, t1, dt);
  Trajectory traj = make_trajectory(sys, n + 1);

  Eigen::VectorXd x = x0;
  for (int i = 0; i <= n; ++i) {
    const double t = i == n ? t1 : t0 + i * dt;
    Eigen::VectorXd d = sys.disturbances_at(disturbances, t);
    Eigen::VectorXd u = policy(t, x, d);
    record_row(traj, i, sys, t, x, u, d);
    if (i == n) break;

    const double h = std::min(dt, t1 - t);
    const double t_half = t + 0.5 * h;
    const double t_full = t + h;

    Eigen::VectorXd k1 = sys.f(x, u, d, t);
    Eigen::VectorXd x2 = x + 0.5 * h * k1;
    Eigen::VectorXd d2 = sys.disturbances_at(disturbances, t_half);
    Eigen::VectorXd u2 = policy(t_half, x2, d2);
    Eigen::VectorXd k2 = sys.f(x2, u2, d2, t_half);
    Eigen::VectorXd x3 = x + 0.5 * h * k2;
    Eigen::VectorXd u3 = policy(t_half, x3, d2);
    Eigen::VectorXd k3 = sys.f(x3, u3, d2, t_half);
    Eigen::VectorXd x4 = x + h * k3;
    Eigen::VectorXd d4 = sys.disturbances_at(disturbances, t_full);
    Eigen::VectorXd u4 = policy(t_full, x4, d4);
    Eigen::VectorXd k4 = sys.f(x4, u4, d4, t_full);

    x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    check_finite(x, sys, i + 1, t_full);
  }
  return traj;
}

// ---------------------------------------------------------------------------
// DAE: implicit Euler with damped Newton
// ---------------------------------------------------------------------------

namespace {

struct NewtonSystem {
  const DynamicSystem::Impl& im;
  const DynamicSystem& sys;

  Eigen::VectorXd residual(const Eigen::VectorXd& x, const Eigen::VectorXd* x_prev, double dt,
                           const Eigen::VectorXd& u, const Eigen::VectorXd& d, double t) const {
    Eigen::VectorXd xdot = Eigen::VectorXd::Zero(im.n_states);
    if (x_prev) xdot = (x - *x_prev) / dt;
    return sys.dae_residual(x, xdot, u, d, t);
  }

  /// Jacobian of the residual with respect to x (with the implicit-Euler
  /// substitution xdot = (x - x_prev)/dt when x_prev is given).
  Eigen::MatrixXd jacobian(const Eigen::VectorXd& x, bool with_mass, double dt,
                           const Eigen::VectorXd& u, const Eigen::VectorXd& d, double t) const {
    const int n = im.n_states;
    std::vector<double> slots;
    im.fill_slots(slots, x, u, d, t);
    Eigen::VectorXd gamma = im.eval_flows(slots);
    Eigen::VectorXd v = im.eval_rhs(slots, gamma);

    Eigen::MatrixXd dvdx = Eigen::MatrixXd::Zero(n, n);
    std::vector<std::vector<std::pair<int, double>>> flow_dx(im.flow_entries.size());
    for (std::size_t k = 0; k < im.flow_entries.size(); ++k)
      im.accumulate_state_partials(im.flow_entries[k], slots, [&](int s, double val) {
        flow_dx[k].push_back({s, val});
      });
    for (const auto& trip : im.w)
      for (const auto& [s, val] : flow_dx[static_cast<std::size_t>(trip.flow)])
        dvdx(trip.row, s) += trip.sign * val;
    for (const auto& b : im.blocks)
      for (int r = 0; r < b.size; ++r)
        im.accumulate_state_partials(b.offset[static_cast<std::size_t>(r)], slots,
                                     [&](int s, double val) { dvdx(b.first_row + r, s) -= val; });

    Eigen::MatrixXd j = Eigen::MatrixXd::Zero(n, n);
    for (const auto& cr : im.chain_rows) {
      j(cr.row, cr.row) += 1.0;
      im.accumulate_state_partials(cr.rhs, slots,
                                   [&](int s, double val) { j(cr.row, s) -= val; });
    }
    for (const auto& b : im.blocks) {
      if (b.algebraic) {
        j.block(b.first_row, 0, b.size, n) = -dvdx.block(b.first_row, 0, b.size, n);
        continue;
      }
      Eigen::MatrixXd c = im.eval_block_capacitance(b, slots);
      Eigen::FullPivLU<Eigen::MatrixXd> lu(c);
      if (!lu.isInvertible())
        throw SimulationError("singular capacitance block for vertex '" + b.vertex_name +
                              "' at t=" + std::to_string(t));
      Eigen::VectorXd fb = lu.solve(v.segment(b.first_row, b.size));
      Eigen::MatrixXd rhs = dvdx.block(b.first_row, 0, b.size, n);
      for (int r = 0; r < b.size; ++r)
        for (int m = 0; m < b.size; ++m)
          im.accumulate_state_partials(b.cap[static_cast<std::size_t>(r * b.size + m)], slots,
                                       [&](int s, double val) { rhs(r, s) -= val * fb[m]; });
      j.block(b.first_row, 0, b.size, n) = -lu.solve(rhs);
      if (with_mass)
        for (int m = 0; m < b.size; ++m) j(b.first_row + m, b.first_row + m) += 1.0 / dt;
    }
    return j;
  }
};

}  // namespace

Trajectory simulate_dae(const DynamicSystem& sys, const Eigen::VectorXd& x0,
                        const SignalSchedule& schedule, double t0, double t1, double dt,
                        double newton_tol, int max_iter) {
  return simulate_dae(sys, x0, schedule_policy(sys, schedule), schedule, t0, t1, dt,
                      newton_tol, max_iter);
}

Trajectory simulate_dae(const DynamicSystem& sys, const Eigen::VectorXd& x0,
                        const InputPolicy& policy, const SignalSchedule& disturbances,
                        double t0, double t1, double dt, double newton_tol, int max_iter) {
  if (x0.size() != sys.state_count())
    throw SimulationError("x0 length " + std::to_string(x0.size()) +
                          " does not match state count " + std::to_string(sys.state_count()));
  check_finite(x0, sys, 0, t0);
  const NewtonSystem ns{sys.impl(), sys};
  const Eigen::VectorXd mass = sys.mass_diagonal();
  const int n = sys.state_count();

  std::vector<int> alg_rows;
  for (int i = 0; i < n; ++i)
    if (mass[i] == 0.0) alg_rows.push_back(i);

  // Project the algebraic states onto the constraint manifold at t0 with
  // the dynamic states frozen.
  Eigen::VectorXd x = x0;
  {
    Eigen::VectorXd d = sys.disturbances_at(disturbances, t0);
    Eigen::VectorXd u = policy(t0, x, d);
    for (int iter = 0; iter <= max_iter && !alg_rows.empty(); ++iter) {
      Eigen::VectorXd r_full = ns.residual(x, nullptr, dt, u, d, t0);
      Eigen::VectorXd r(static_cast<Eigen::Index>(alg_rows.size()));
      for (std::size_t k = 0; k < alg_rows.size(); ++k)
        r[static_cast<Eigen::Index>(k)] = r_full[alg_rows[k]];
      if (r.lpNorm<Eigen::Infinity>() <= newton_tol) break;
      if (iter == max_iter)
        throw SimulationError(
            "inconsistent initial conditions: algebraic projection failed (residual=" +
            std::to_string(r.lpNorm<Eigen::Infinity>()) + ")");
      Eigen::MatrixXd j_full = ns.jacobian(x, false, dt, u, d, t0);
      Eigen::MatrixXd j(alg_rows.size(), alg_rows.size());
      for (std::size_t a = 0; a < alg_rows.size(); ++a)
        for (std::size_t b = 0; b < alg_rows.size(); ++b)
          j(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) =
              j_full(alg_rows[a], alg_rows[b]);
      Eigen::VectorXd delta = j.fullPivLu().solve(-r);
      for (std::size_t k = 0; k < alg_rows.size(); ++k)
        x[alg_rows[k]] += delta[static_cast<Eigen::Index>(k)];
    }
  }

  const int steps = step_count(t0, t1, dt);
  Trajectory traj = make_trajectory(sys, steps + 1);
  {
    Eigen::VectorXd d = sys.disturbances_at(disturbances, t0);
    Eigen::VectorXd u = policy(t0, x, d);
    record_row(traj, 0, sys, t0, x, u, d);
  }

  for (int i = 0; i < steps; ++i) {
    const double t_next = i + 1 == steps ? t1 : t0 + (i + 1) * dt;
    const double h = t_next - (i == 0 ? t0 : traj.time[static_cast<std::size_t>(i)]);
    Eigen::VectorXd d = sys.disturbances_at(disturbances, t_next);
    Eigen::VectorXd x_prev = x;
    Eigen::VectorXd u = policy(t_next, x, d);

    double r_norm = std::numeric_limits<double>::infinity();
    bool converged = false;
    for (int iter = 0; iter < max_iter; ++iter) {
      Eigen::VectorXd r = ns.residual(x, &x_prev, h, u, d, t_next);
      r_norm = r.lpNorm<Eigen::Infinity>();
      if (r_norm <= newton_tol) {
        converged = true;
        break;
      }
      Eigen::MatrixXd j = ns.jacobian(x, true, h, u, d, t_next);
      Eigen::VectorXd delta = j.fullPivLu().solve(-r);
      // Damped update: halve the step while the residual increases.
      double alpha = 1.0;
      Eigen::VectorXd x_trial;
      for (int damp = 0; damp <= 8; ++damp) {
        x_trial = x + alpha * delta;
        double trial_norm =
            ns.residual(x_trial, &x_prev, h, u, d, t_next).lpNorm<Eigen::Infinity>();
        if (trial_norm < r_norm || damp == 8) break;
        alpha *= 0.5;
      }
      x = x_trial;
      u = policy(t_next, x, d);
    }
    if (!converged) {
      Eigen::VectorXd r = ns.residual(x, &x_prev, h, u, d, t_next);
      if (r.lpNorm<Eigen::Infinity>() > newton_tol)
        throw SimulationError("Newton iteration failed to converge at t=" +
                              std::to_string(t_next) +
                              " (residual=" + std::to_string(r.lpNorm<Eigen::Infinity>()) + ")");
    }
    check_finite(x, sys, i + 1, t_next);
    record_row(traj, i + 1, sys, t_next, x, u, d);
  }
  return traj;
}

// ---------------------------------------------------------------------------
// Energy audit
// ---------------------------------------------------------------------------

EnergyAudit energy_audit(const Trajectory& traj, const DynamicSystem& sys) {
  if (traj.states.cols() != sys.state_count())
    throw SimulationError("trajectory was not produced by this system");
  EnergyAudit audit;
  audit.time = traj.time;
  audit.stored_energy = traj.stored_energy;
  audit.external_power = traj.external_power;
  const int rows = traj.rows();
  audit.drift.resize(rows);
  const double e0 = rows > 0 ? traj.stored_energy[0] : 0.0;
  const double scale = std::max(std::abs(e0), 1.0);
  double integral = 0.0;
  for (int i = 0; i < rows; ++i) {
    if (i > 0) {
      const double h = traj.time[static_cast<std::size_t>(i)] -
                       traj.time[static_cast<std::size_t>(i - 1)];
      integral += 0.5 * h * (traj.external_power[i] + traj.external_power[i - 1]);
    }
    audit.drift[i] = std::abs(traj.stored_energy[i] - e0 - integral) / scale;
    audit.max_drift = std::max(audit.max_drift, audit.drift[i]);
  }
  return audit;
}

}  // namespace energraph
