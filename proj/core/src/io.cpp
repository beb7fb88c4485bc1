#include "energraph/io.hpp"

#include <json.hpp>

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace energraph {

namespace {

using nlohmann::json;

std::string fmt_short(double v) {
  char buf[40];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

std::string fmt17(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// ---- JSON plumbing --------------------------------------------------------

[[noreturn]] void fail(const std::string& path, const std::string& msg) {
  throw IoError(path + ": " + msg);
}

void check_fields(const json& obj, std::initializer_list<const char*> allowed,
                  const std::string& path) {
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (const char* a : allowed)
      if (key == a) ok = true;
    if (!ok) fail(path, "unknown field '" + key + "'");
  }
}

const json& need(const json& obj, const char* key, const std::string& path) {
  auto it = obj.find(key);
  if (it == obj.end()) fail(path, std::string("missing field '") + key + "'");
  return *it;
}

std::string need_string(const json& obj, const char* key, const std::string& path) {
  const json& v = need(obj, key, path);
  if (!v.is_string()) fail(path + "/" + key, "expected a string");
  return v.get<std::string>();
}

double need_number(const json& obj, const char* key, const std::string& path) {
  const json& v = need(obj, key, path);
  if (!v.is_number()) fail(path + "/" + key, "expected a number");
  return v.get<double>();
}

int need_int(const json& obj, const char* key, const std::string& path) {
  const json& v = need(obj, key, path);
  if (!v.is_number_integer()) fail(path + "/" + key, "expected an integer");
  return v.get<int>();
}

std::vector<double> number_list(const json& v, const std::string& path) {
  if (!v.is_array()) fail(path, "expected an array of numbers");
  std::vector<double> out;
  for (const auto& x : v) {
    if (!x.is_number()) fail(path, "expected an array of numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

Expression parse_equation(const std::string& text, const std::string& path) {
  try {
    return Expression::parse(text);
  } catch (const ExprError& e) {
    fail(path, std::string("bad equation: ") + e.what());
  }
}

json read_document(const std::string& file) {
  std::ifstream in(file);
  if (!in) throw IoError("cannot open '" + file + "'");
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw IoError(file + ": " + e.what());
  }
  if (!doc.is_object()) throw IoError(file + ": expected a JSON object");
  int version = need_int(doc, "schema_version", file);
  if (version != 1)
    throw IoError(file + ": unsupported schema version " + std::to_string(version));
  return doc;
}

// ---- component documents ----------------------------------------------------

VertexKind vertex_kind_from_string(const std::string& text, const std::string& path) {
  if (text == "dynamic") return VertexKind::Dynamic;
  if (text == "algebraic") return VertexKind::Algebraic;
  if (text == "external") return VertexKind::External;
  fail(path, "unknown vertex kind '" + text + "'");
}

Graph parse_component(const json& doc, const std::string& file) {
  check_fields(doc,
               {"schema_version", "kind", "name", "vertices", "edges", "parameters",
                "inputs", "ports", "notes"},
               file);
  GraphBuilder builder(need_string(doc, "name", file));

  const json& vertices = need(doc, "vertices", file);
  if (!vertices.is_array()) fail(file + "/vertices", "expected an array");
  int vi = 0;
  for (const auto& jv : vertices) {
    const std::string path = file + "/vertices/" + std::to_string(vi++);
    check_fields(jv, {"name", "kind", "equations", "state_count", "units", "initial_condition"},
                 path);
    VertexSpec v;
    v.name = need_string(jv, "name", path);
    v.kind = vertex_kind_from_string(need_string(jv, "kind", path), path);
    if (jv.contains("state_count")) v.state_count = need_int(jv, "state_count", path);
    if (jv.contains("equations")) {
      for (const auto& eq : need(jv, "equations", path)) {
        if (!eq.is_string()) fail(path + "/equations", "expected equation strings");
        v.equations.push_back(parse_equation(eq.get<std::string>(), path));
      }
    }
    if (jv.contains("units"))
      for (const auto& u : jv["units"]) v.units.push_back(u.get<std::string>());
    if (jv.contains("initial_condition"))
      v.initial_condition = number_list(jv["initial_condition"], path + "/initial_condition");
    builder.add_vertex(std::move(v));
  }

  const int vertex_count = vi;
  const json& edges = need(doc, "edges", file);
  if (!edges.is_array()) fail(file + "/edges", "expected an array");
  int ei = 0;
  for (const auto& je : edges) {
    const std::string path = file + "/edges/" + std::to_string(ei++);
    check_fields(je, {"name", "external", "tail", "head", "flows"}, path);
    EdgeSpec e;
    e.name = need_string(je, "name", path);
    if (je.contains("external")) e.external = je["external"].get<bool>();
    const int tail = need_int(je, "tail", path);
    const int head = need_int(je, "head", path);
    if (tail < 0 || tail > vertex_count || head < 0 || head > vertex_count)
      fail(path, "edge '" + e.name + "' references vertex " +
                     std::to_string(tail < 0 || tail > vertex_count ? tail : head) + " of " +
                     std::to_string(vertex_count));
    const json& flows = need(je, "flows", path);
    if (!flows.is_array() || flows.empty()) fail(path + "/flows", "expected a nonempty array");
    int fi = 0;
    for (const auto& jf : flows) {
      const std::string fpath = path + "/flows/" + std::to_string(fi++);
      check_fields(jf, {"equation", "tail_state", "head_state"}, fpath);
      FlowEntry entry;
      entry.equation = parse_equation(need_string(jf, "equation", fpath), fpath);
      if (jf.contains("tail_state")) entry.tail_state = need_int(jf, "tail_state", fpath);
      if (jf.contains("head_state")) entry.head_state = need_int(jf, "head_state", fpath);
      e.flows.push_back(std::move(entry));
    }
    builder.add_edge(std::move(e), tail, head);
  }

  if (doc.contains("parameters")) {
    int pi = 0;
    for (const auto& jp : doc["parameters"]) {
      const std::string path = file + "/parameters/" + std::to_string(pi++);
      check_fields(jp, {"description", "var", "value", "units", "design_variable"}, path);
      Parameter p;
      p.description = need_string(jp, "description", path);
      p.var = need_string(jp, "var", path);
      if (jp.contains("units")) p.units = jp["units"].get<std::string>();
      if (jp.contains("design_variable")) p.is_design_variable = jp["design_variable"].get<bool>();
      const json& value = need(jp, "value", path);
      if (value.is_number()) {
        p.value = value.get<double>();
      } else if (value.is_object()) {
        const std::string type = need_string(value, "type", path + "/value");
        if (type == "table1d") {
          check_fields(value, {"type", "grid", "values"}, path + "/value");
          try {
            p.value = LookupTable1D(number_list(value["grid"], path), number_list(value["values"], path));
          } catch (const std::invalid_argument& e) {
            fail(path + "/value", e.what());
          }
        } else if (type == "table2d") {
          check_fields(value, {"type", "grid_x", "grid_y", "values"}, path + "/value");
          try {
            p.value = LookupTable2D(number_list(value["grid_x"], path),
                                    number_list(value["grid_y"], path),
                                    number_list(value["values"], path));
          } catch (const std::invalid_argument& e) {
            fail(path + "/value", e.what());
          }
        } else if (type == "state") {
          check_fields(value, {"type", "vertex", "state"}, path + "/value");
          p.value = StateRef{need_int(value, "vertex", path + "/value"),
                             need_int(value, "state", path + "/value")};
        } else {
          fail(path + "/value", "unknown parameter value type '" + type + "'");
        }
      } else {
        fail(path + "/value", "expected a number or a typed object");
      }
      builder.add_parameter(std::move(p));
    }
  }

  if (doc.contains("inputs")) {
    int ii = 0;
    for (const auto& ji : doc["inputs"]) {
      const std::string path = file + "/inputs/" + std::to_string(ii++);
      check_fields(ji, {"description", "var", "units", "origin"}, path);
      InputSpec in;
      in.description = need_string(ji, "description", path);
      in.var = need_string(ji, "var", path);
      if (ji.contains("units")) in.units = ji["units"].get<std::string>();
      if (ji.contains("origin")) in.origin = ji["origin"].get<std::string>();
      builder.add_input(std::move(in));
    }
  }

  if (doc.contains("ports")) {
    int pi = 0;
    for (const auto& jp : doc["ports"]) {
      const std::string path = file + "/ports/" + std::to_string(pi++);
      check_fields(jp, {"type", "index", "domain"}, path);
      Port port;
      const std::string type = need_string(jp, "type", path);
      if (type == "edge")
        port.type = PortType::EdgeConnection;
      else if (type == "vertex")
        port.type = PortType::VertexConnection;
      else
        fail(path, "unknown port type '" + type + "'");
      port.element_index = need_int(jp, "index", path);
      port.domain = need_string(jp, "domain", path);
      builder.add_port(std::move(port));
    }
  }

  if (doc.contains("notes"))
    for (const auto& n : doc["notes"]) builder.add_note(n.get<std::string>());

  try {
    return builder.build();
  } catch (const GraphError& e) {
    fail(file, e.what());
  }
}

json component_to_json(const Graph& g) {
  json doc;
  doc["schema_version"] = 1;
  doc["kind"] = "component";
  doc["name"] = g.name();

  doc["vertices"] = json::array();
  for (const auto& v : g.vertices()) {
    json jv;
    jv["name"] = v.name;
    jv["kind"] = to_string(v.kind);
    jv["state_count"] = v.state_count;
    if (!v.equations.empty()) {
      json eqs = json::array();
      for (const auto& eq : v.equations) eqs.push_back(eq.str());
      jv["equations"] = std::move(eqs);
    }
    if (!v.units.empty()) jv["units"] = v.units;
    if (v.initial_condition) jv["initial_condition"] = *v.initial_condition;
    doc["vertices"].push_back(std::move(jv));
  }

  doc["edges"] = json::array();
  for (int j = 0; j < g.edge_count(); ++j) {
    const auto& e = g.edges()[static_cast<std::size_t>(j)];
    const auto& ep = g.edge_matrix()[static_cast<std::size_t>(j)];
    json je;
    je["name"] = e.name;
    je["external"] = e.external;
    je["tail"] = ep.tail;
    je["head"] = ep.head;
    json flows = json::array();
    for (const auto& f : e.flows) {
      json jf;
      jf["equation"] = f.equation.str();
      jf["tail_state"] = f.tail_state;
      jf["head_state"] = f.head_state;
      flows.push_back(std::move(jf));
    }
    je["flows"] = std::move(flows);
    doc["edges"].push_back(std::move(je));
  }

  doc["parameters"] = json::array();
  for (const auto& p : g.parameters()) {
    json jp;
    jp["description"] = p.description;
    jp["var"] = p.var;
    jp["units"] = p.units;
    jp["design_variable"] = p.is_design_variable;
    if (p.is_scalar()) {
      jp["value"] = p.scalar();
    } else if (p.is_table1d()) {
      const auto& t = std::get<LookupTable1D>(p.value);
      jp["value"] = {{"type", "table1d"}, {"grid", t.grid()}, {"values", t.values()}};
    } else if (p.is_table2d()) {
      const auto& t = std::get<LookupTable2D>(p.value);
      jp["value"] = {{"type", "table2d"},
                     {"grid_x", t.grid_x()},
                     {"grid_y", t.grid_y()},
                     {"values", t.values()}};
    } else {
      const auto& sr = std::get<StateRef>(p.value);
      jp["value"] = {{"type", "state"}, {"vertex", sr.vertex}, {"state", sr.state}};
    }
    doc["parameters"].push_back(std::move(jp));
  }

  doc["inputs"] = json::array();
  for (const auto& in : g.inputs()) {
    json ji;
    ji["description"] = in.description;
    ji["var"] = in.var;
    ji["units"] = in.units;
    if (!in.origin.empty()) ji["origin"] = in.origin;
    doc["inputs"].push_back(std::move(ji));
  }

  doc["ports"] = json::array();
  for (const auto& port : g.ports()) {
    json jp;
    jp["type"] = port.type == PortType::EdgeConnection ? "edge" : "vertex";
    jp["index"] = port.element_index;
    jp["domain"] = port.domain;
    doc["ports"].push_back(std::move(jp));
  }

  if (!g.notes().empty()) doc["notes"] = g.notes();
  return doc;
}

SystemDefinition parse_system(const json& doc, const std::string& file) {
  check_fields(doc,
               {"schema_version", "kind", "name", "components", "connections",
                "input_common", "initial_conditions"},
               file);
  SystemDefinition def;
  def.name = need_string(doc, "name", file);

  const json& components = need(doc, "components", file);
  if (!components.is_array() || components.empty())
    fail(file + "/components", "expected a nonempty array");
  int ci = 0;
  for (const auto& jc : components) {
    const std::string path = file + "/components/" + std::to_string(ci++);
    check_fields(jc, {"name", "catalog", "file", "options"}, path);
    SystemComponent comp;
    comp.name = need_string(jc, "name", path);
    if (jc.contains("catalog")) comp.catalog = jc["catalog"].get<std::string>();
    if (jc.contains("file")) comp.file = jc["file"].get<std::string>();
    if (comp.catalog.empty() == comp.file.empty())
      fail(path, "component must set exactly one of 'catalog' or 'file'");
    if (jc.contains("options")) {
      const json& jo = jc["options"];
      check_fields(jo, {"discretization", "domain"}, path + "/options");
      if (jo.contains("discretization"))
        comp.options.discretization = need_int(jo, "discretization", path + "/options");
      if (jo.contains("domain")) comp.options.domain = jo["domain"].get<std::string>();
    }
    def.components.push_back(std::move(comp));
  }

  if (doc.contains("connections")) {
    int ni = 0;
    for (const auto& jc : doc["connections"]) {
      const std::string path = file + "/connections/" + std::to_string(ni++);
      check_fields(jc, {"primary", "secondary"}, path);
      auto parse_ref = [&](const json& jr, const char* which) {
        if (!jr.is_array() || jr.size() != 2 || !jr[0].is_string() ||
            !jr[1].is_number_integer())
          fail(path, std::string(which) + " must be [component, port]");
        return PortRef{jr[0].get<std::string>(), jr[1].get<int>()};
      };
      ConnectionSpec spec;
      spec.primary = parse_ref(need(jc, "primary", path), "primary");
      spec.secondary = parse_ref(need(jc, "secondary", path), "secondary");
      def.connections.push_back(std::move(spec));
    }
  }

  if (doc.contains("input_common")) {
    for (const auto& jr : doc["input_common"]) {
      if (!jr.is_array() || jr.size() != 2)
        fail(file + "/input_common", "expected [old, replacement] pairs");
      def.input_common_rules.emplace_back(jr[0].get<std::string>(), jr[1].get<std::string>());
    }
  }

  if (doc.contains("initial_conditions")) {
    for (const auto& [vertex, values] : doc["initial_conditions"].items())
      def.initial_conditions[vertex] =
          number_list(values, file + "/initial_conditions/" + vertex);
  }
  return def;
}

}  // namespace

// ---------------------------------------------------------------------------
// Model file surface
// ---------------------------------------------------------------------------

ModelDocument load_model(const std::string& path) {
  json doc = read_document(path);
  const std::string kind = need_string(doc, "kind", path);
  ModelDocument out;
  if (kind == "component")
    out.content = parse_component(doc, path);
  else if (kind == "system")
    out.content = parse_system(doc, path);
  else
    throw IoError(path + ": unknown document kind '" + kind + "'");
  return out;
}

Graph realize_system(const SystemDefinition& def, const std::string& base_dir) {
  std::vector<Graph> components;
  for (const auto& comp : def.components) {
    if (!comp.catalog.empty()) {
      components.push_back(
          instantiate(component_kind_from_string(comp.catalog), comp.name, comp.options));
    } else {
      std::filesystem::path p(comp.file);
      if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
      Graph g = load_graph(p.string());
      // The instance name comes from the system definition.
      GraphBuilder b(comp.name);
      for (const auto& v : g.vertices()) b.add_vertex(v);
      for (int j = 0; j < g.edge_count(); ++j)
        b.add_edge(g.edges()[static_cast<std::size_t>(j)],
                   g.edge_matrix()[static_cast<std::size_t>(j)].tail,
                   g.edge_matrix()[static_cast<std::size_t>(j)].head);
      for (const auto& p2 : g.parameters()) b.add_parameter(p2);
      for (const auto& in : g.inputs()) b.add_input(in);
      for (const auto& port : g.ports()) b.add_port(port);
      for (const auto& note : g.notes()) b.add_note(note);
      components.push_back(b.build());
    }
  }
  Graph combined = def.connections.empty() && components.size() == 1
                       ? components.front()
                       : combine(def.name, components, def.connections);
  if (!def.input_common_rules.empty()) combined = input_common(combined, def.input_common_rules);
  if (!def.initial_conditions.empty())
    combined = with_initial_conditions(combined, def.initial_conditions);
  return combined;
}

Graph load_graph(const std::string& path) {
  ModelDocument doc = load_model(path);
  if (!doc.is_system()) return std::get<Graph>(std::move(doc.content));
  const std::string base = std::filesystem::path(path).parent_path().string();
  return realize_system(std::get<SystemDefinition>(doc.content), base);
}

void save_model(const Graph& g, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << component_to_json(g).dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

namespace {

std::string render_table(const std::vector<std::string>& header,
                         const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) width[c] = header[c].size();
  for (const auto& row : rows)
    for (std::size_t c = 0; c < row.size(); ++c)
      width[c] = std::max(width[c], row[c].size());

  std::ostringstream out;
  auto emit = [&](const std::vector<std::string>& cells) {
    for (std::size_t c = 0; c < cells.size(); ++c) {
      out << cells[c];
      if (c + 1 < cells.size())
        out << std::string(width[c] - cells[c].size() + 2, ' ');
    }
    out << '\n';
  };
  emit(header);
  if (rows.empty())
    out << "(none)\n";
  else
    for (const auto& row : rows) emit(row);
  return out.str();
}

std::string equations_cell(const std::vector<Expression>& eqs) {
  std::string out;
  for (std::size_t i = 0; i < eqs.size(); ++i) {
    if (i) out += "; ";
    out += eqs[i].str();
  }
  return out.empty() ? "-" : out;
}

std::string render_graph_report(const Graph& g) {
  std::ostringstream out;
  out << "=== " << g.name() << " : graph report ===\n";
  std::vector<std::vector<std::string>> vrows;
  for (int i = 1; i <= g.vertex_count(); ++i) {
    const auto& v = g.vertex(i);
    std::string units;
    for (std::size_t k = 0; k < v.units.size(); ++k) {
      if (k) units += ", ";
      units += v.units[k];
    }
    vrows.push_back({std::to_string(i), v.name, to_string(v.kind),
                     std::to_string(v.state_count), units.empty() ? "-" : units,
                     equations_cell(v.equations)});
  }
  out << render_table({"#", "Vertex", "Kind", "States", "Units", "Equation"}, vrows);

  out << '\n';
  std::vector<std::vector<std::string>> erows;
  for (int j = 1; j <= g.edge_count(); ++j) {
    const auto& e = g.edge(j);
    const auto& ep = g.edge_matrix()[static_cast<std::size_t>(j - 1)];
    std::string flows;
    for (std::size_t k = 0; k < e.flows.size(); ++k) {
      if (k) flows += "; ";
      flows += e.flows[k].equation.str();
    }
    erows.push_back({std::to_string(j), e.name, e.external ? "yes" : "no",
                     ep.tail == 0 ? "env" : std::to_string(ep.tail),
                     ep.head == 0 ? "env" : std::to_string(ep.head), flows});
  }
  out << render_table({"#", "Edge", "External", "Tail", "Head", "Equation"}, erows);
  return out.str();
}

std::string render_parameter_report(const Graph& g) {
  std::ostringstream out;
  out << "=== " << g.name() << " : parameter report ===\n";
  std::vector<std::vector<std::string>> rows;
  int i = 0;
  for (const auto& p : g.parameters()) {
    std::string value;
    if (p.is_scalar())
      value = fmt_short(p.scalar());
    else if (p.is_table1d())
      value = "table1d(" + std::to_string(std::get<LookupTable1D>(p.value).grid().size()) + ")";
    else if (p.is_table2d()) {
      const auto& t = std::get<LookupTable2D>(p.value);
      value = "table2d(" + std::to_string(t.grid_x().size()) + "x" +
              std::to_string(t.grid_y().size()) + ")";
    } else {
      const auto& sr = std::get<StateRef>(p.value);
      value = "state(" + std::to_string(sr.vertex) + "," + std::to_string(sr.state) + ")";
    }
    rows.push_back({std::to_string(++i), p.description, p.var, value,
                    p.units.empty() ? "-" : p.units, p.is_design_variable ? "yes" : "no"});
  }
  out << render_table({"#", "Description", "Var", "Value", "Units", "Design"}, rows);
  return out.str();
}

std::string render_input_report(const Graph& g) {
  std::ostringstream out;
  out << "=== " << g.name() << " : input report ===\n";
  std::vector<std::vector<std::string>> rows;
  int i = 0;
  for (const auto& in : g.inputs())
    rows.push_back({std::to_string(++i), in.description, in.var,
                    in.units.empty() ? "-" : in.units,
                    in.origin.empty() ? "-" : in.origin});
  out << render_table({"#", "Description", "Var", "Units", "Origin"}, rows);
  return out.str();
}

std::string render_port_report(const Graph& g) {
  std::ostringstream out;
  out << "=== " << g.name() << " : port report ===\n";
  std::vector<std::vector<std::string>> rows;
  int i = 0;
  for (const auto& port : g.ports()) {
    std::string element;
    if (port.type == PortType::EdgeConnection)
      element = "edge " + std::to_string(port.element_index) + " (" +
                g.edge(port.element_index).name + ")";
    else
      element = "vertex " + std::to_string(port.element_index) + " (" +
                g.vertex(port.element_index).name + ")";
    rows.push_back({std::to_string(++i),
                    port.type == PortType::EdgeConnection ? "EdgeConnection" : "VertexConnection",
                    element, port.domain});
  }
  out << render_table({"#", "Type", "Element", "Domain"}, rows);
  return out.str();
}

std::string render_initcond_report(const Graph& g) {
  std::ostringstream out;
  out << "=== " << g.name() << " : initial condition report ===\n";
  std::vector<std::vector<std::string>> rows;
  int i = 0;
  for (int vi = 1; vi <= g.vertex_count(); ++vi) {
    const auto& v = g.vertex(vi);
    if (v.kind == VertexKind::External) continue;
    for (int m = 0; m < v.state_count; ++m) {
      std::string units = m < static_cast<int>(v.units.size()) ? v.units[static_cast<std::size_t>(m)] : "-";
      std::string value = v.initial_condition
                              ? fmt_short((*v.initial_condition)[static_cast<std::size_t>(m)])
                              : "unassigned";
      rows.push_back({std::to_string(++i), v.name, std::to_string(m + 1), units, value});
    }
  }
  out << render_table({"#", "Vertex", "State", "Units", "Initial"}, rows);
  return out.str();
}

}  // namespace

ReportKind report_kind_from_string(const std::string& text) {
  if (text == "graph") return ReportKind::Graph;
  if (text == "parameter") return ReportKind::Parameter;
  if (text == "input") return ReportKind::Input;
  if (text == "port") return ReportKind::Port;
  if (text == "initcond") return ReportKind::InitCond;
  if (text == "full") return ReportKind::Full;
  throw IoError("unknown report kind '" + text + "'");
}

std::string render_report(const Graph& g, ReportKind kind) {
  switch (kind) {
    case ReportKind::Graph: return render_graph_report(g);
    case ReportKind::Parameter: return render_parameter_report(g);
    case ReportKind::Input: return render_input_report(g);
    case ReportKind::Port: return render_port_report(g);
    case ReportKind::InitCond: return render_initcond_report(g);
    case ReportKind::Full:
      return render_graph_report(g) + "\n" + render_parameter_report(g) + "\n" +
             render_input_report(g) + "\n" + render_port_report(g) + "\n" +
             render_initcond_report(g);
  }
  throw IoError("unknown report kind");
}

// ---------------------------------------------------------------------------
// Drawing
// ---------------------------------------------------------------------------

std::string export_drawing(const Graph& g) {
  std::ostringstream out;
  out << "digraph \"" << g.name() << "\" {\n";
  out << "  rankdir=LR;\n";
  for (int i = 1; i <= g.vertex_count(); ++i) {
    const auto& v = g.vertex(i);
    out << "  v" << i << " [label=\"" << v.name << "\"";
    switch (v.kind) {
      case VertexKind::Dynamic: out << ", shape=ellipse, style=solid"; break;
      case VertexKind::Algebraic: out << ", shape=doublecircle, style=solid"; break;
      case VertexKind::External: out << ", shape=ellipse, style=dashed"; break;
    }
    out << "];\n";
  }
  for (int j = 1; j <= g.edge_count(); ++j) {
    const auto& e = g.edge(j);
    const auto& ep = g.edge_matrix()[static_cast<std::size_t>(j - 1)];
    const std::string tail = ep.tail == 0 ? "env_e" + std::to_string(j) : "v" + std::to_string(ep.tail);
    const std::string head = ep.head == 0 ? "env_e" + std::to_string(j) : "v" + std::to_string(ep.head);
    out << "  " << tail << " -> " << head << " [label=\"" << e.name << "\"";
    if (e.external) out << ", style=dashed";
    out << "];\n";
  }
  out << "}\n";
  return out.str();
}

// ---------------------------------------------------------------------------
// Equation export
// ---------------------------------------------------------------------------

std::string export_equations(const Graph& g, bool substitute_params) {
  std::ostringstream out;
  out << "# equations: " << g.name() << "\n";

  // Global state and disturbance numbering.
  std::map<int, int> first_row;  // vertex (1-based) -> first global state (1-based)
  int next_state = 1, next_dist = 1;
  std::map<int, int> first_dist;
  for (int vi = 1; vi <= g.vertex_count(); ++vi) {
    const auto& v = g.vertex(vi);
    if (v.kind == VertexKind::External) {
      first_dist[vi] = next_dist;
      for (int m = 0; m < v.state_count; ++m, ++next_dist)
        out << "# d" << next_dist << " = " << v.name
            << (v.state_count > 1 ? "[" + std::to_string(m + 1) + "]" : "") << "\n";
    } else {
      first_row[vi] = next_state;
      for (int m = 0; m < v.state_count; ++m, ++next_state)
        out << "# x" << next_state << " = " << v.name
            << (v.state_count > 1 ? "[" + std::to_string(m + 1) + "]" : "") << "\n";
    }
  }

  // Parameter substitutions: state-bound parameters always resolve to their
  // global state symbol; scalars become literals when requested, except
  // design variables, which never substitute.
  std::map<std::string, Expression> param_subst;
  for (const auto& p : g.parameters()) {
    if (p.is_state_ref()) {
      const auto& sr = std::get<StateRef>(p.value);
      param_subst.emplace(p.var,
                          Expression::symbol(symbols::state(first_row.at(sr.vertex) + sr.state - 1)));
    } else if (substitute_params && p.is_scalar() && !p.is_design_variable) {
      param_subst.emplace(p.var, Expression::constant(p.scalar()));
    }
  }

  auto endpoint_rules = [&](int vertex, bool head, std::map<std::string, Expression>& rules) {
    if (vertex == 0) return;
    const auto& v = g.vertex(vertex);
    const bool external = v.kind == VertexKind::External;
    const int base = external ? first_dist.at(vertex) : first_row.at(vertex);
    for (int m = 1; m <= v.state_count; ++m) {
      std::string global = external ? "d" + std::to_string(base + m - 1)
                                    : symbols::state(base + m - 1);
      rules.emplace(head ? symbols::head(m) : symbols::tail(m), Expression::symbol(global));
      if (m == 1) rules.emplace(head ? "xh" : "xt", Expression::symbol(global));
    }
  };

  // Signed flow lists per state row.
  const int n_states = next_state - 1;
  std::vector<std::vector<std::pair<double, std::string>>> rhs(
      static_cast<std::size_t>(n_states + 1));
  for (int j = 1; j <= g.edge_count(); ++j) {
    const auto& e = g.edge(j);
    const auto& ep = g.edge_matrix()[static_cast<std::size_t>(j - 1)];
    for (const auto& entry : e.flows) {
      std::map<std::string, Expression> rules = param_subst;
      endpoint_rules(ep.tail, false, rules);
      endpoint_rules(ep.head, true, rules);
      const std::string text = entry.equation.substitute(rules).str();
      if (ep.tail != 0 && first_row.count(ep.tail))
        rhs[static_cast<std::size_t>(first_row.at(ep.tail) + entry.tail_state - 1)]
            .emplace_back(-1.0, text);
      if (ep.head != 0 && first_row.count(ep.head))
        rhs[static_cast<std::size_t>(first_row.at(ep.head) + entry.head_state - 1)]
            .emplace_back(1.0, text);
    }
  }

  for (int vi = 1; vi <= g.vertex_count(); ++vi) {
    const auto& v = g.vertex(vi);
    if (v.kind == VertexKind::External) continue;
    for (int r = 0; r < v.state_count; ++r) {
      const Expression& eq = v.equations[static_cast<std::size_t>(r)];
      std::map<std::string, Expression> local_rules = param_subst;
      for (int m = 1; m <= v.state_count; ++m)
        local_rules.emplace(symbols::state(m),
                            Expression::symbol(symbols::state(first_row.at(vi) + m - 1)));
      local_rules.emplace("x", Expression::symbol(symbols::state(first_row.at(vi))));

      std::string lhs;
      if (v.kind == VertexKind::Dynamic) {
        for (int m = 1; m <= v.state_count; ++m) {
          Expression c = eq.differentiate(symbols::state_dot(m));
          if (m == 1) c = Expression::add(c, eq.differentiate("x_dot"));
          if (c.is_constant(0.0)) continue;
          if (!lhs.empty()) lhs += " + ";
          lhs += c.substitute(local_rules).str() + " * " +
                 symbols::state_dot(first_row.at(vi) + m - 1);
        }
        std::map<std::string, Expression> zero_dots;
        zero_dots.emplace("x_dot", Expression::constant(0.0));
        for (int m = 1; m <= v.state_count; ++m)
          zero_dots.emplace(symbols::state_dot(m), Expression::constant(0.0));
        Expression offset = eq.substitute(zero_dots).folded();
        if (!offset.is_constant(0.0))
          lhs += " + " + offset.substitute(local_rules).str();
      } else {
        lhs = eq.substitute(local_rules).str();
      }

      const auto& terms = rhs[static_cast<std::size_t>(first_row.at(vi) + r)];
      std::string right;
      for (const auto& [sign, text] : terms) {
        if (right.empty())
          right = (sign < 0 ? "- " : "") + text;
        else
          right += (sign < 0 ? " - " : " + ") + text;
      }
      if (right.empty()) right = "0";
      out << lhs << " = " << right << "\n";
    }
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

namespace {

std::string csv_safe(std::string name) {
  for (char& c : name)
    if (c == ',') c = ';';
  return name;
}

}  // namespace

void write_trajectory_csv(const Trajectory& traj, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << "time";
  for (const auto& n : traj.state_names) out << ',' << csv_safe(n);
  for (const auto& n : traj.input_names) out << ',' << csv_safe(n);
  for (const auto& n : traj.flow_names) out << ',' << csv_safe(n);
  out << '\n';
  for (int i = 0; i < traj.rows(); ++i) {
    out << fmt17(traj.time[static_cast<std::size_t>(i)]);
    for (int c = 0; c < traj.states.cols(); ++c) out << ',' << fmt17(traj.states(i, c));
    for (int c = 0; c < traj.inputs.cols(); ++c) out << ',' << fmt17(traj.inputs(i, c));
    for (int c = 0; c < traj.flows.cols(); ++c) out << ',' << fmt17(traj.flows(i, c));
    out << '\n';
  }
}

void write_audit_csv(const EnergyAudit& audit, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << "time,stored_energy,external_power,drift\n";
  for (std::size_t i = 0; i < audit.time.size(); ++i)
    out << fmt17(audit.time[i]) << ',' << fmt17(audit.stored_energy[static_cast<Eigen::Index>(i)])
        << ',' << fmt17(audit.external_power[static_cast<Eigen::Index>(i)]) << ','
        << fmt17(audit.drift[static_cast<Eigen::Index>(i)]) << '\n';
}

SignalSchedule load_signals_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw IoError(path + ": empty signals file");
  std::vector<std::string> names;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) names.push_back(cell);
  }
  if (names.empty() || names.front() != "time")
    throw IoError(path + ": first column must be 'time'");

  std::vector<double> times;
  std::vector<std::vector<double>> columns(names.size() - 1);
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> values;
    while (std::getline(ss, cell, ',')) {
      try {
        values.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw IoError(path + ": bad number '" + cell + "' on line " + std::to_string(line_no));
      }
    }
    if (values.size() != names.size())
      throw IoError(path + ": line " + std::to_string(line_no) + " has " +
                    std::to_string(values.size()) + " cells, expected " +
                    std::to_string(names.size()));
    times.push_back(values.front());
    for (std::size_t c = 1; c < values.size(); ++c) columns[c - 1].push_back(values[c]);
  }
  if (times.empty()) throw IoError(path + ": signals file holds no samples");

  SignalSchedule schedule;
  for (std::size_t c = 1; c < names.size(); ++c)
    schedule.set_series(names[c], times, columns[c - 1], false);
  return schedule;
}

void write_linear_model_csv(const LinearModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << "matrix,row,col,value\n";
  for (Eigen::Index i = 0; i < model.a.rows(); ++i)
    for (Eigen::Index j = 0; j < model.a.cols(); ++j)
      out << "A," << i + 1 << ',' << j + 1 << ',' << fmt17(model.a(i, j)) << '\n';
  for (Eigen::Index i = 0; i < model.b.rows(); ++i)
    for (Eigen::Index j = 0; j < model.b.cols(); ++j)
      out << "B," << i + 1 << ',' << j + 1 << ',' << fmt17(model.b(i, j)) << '\n';
  for (Eigen::Index i = 0; i < model.z.size(); ++i)
    out << "Z," << i + 1 << ",1," << fmt17(model.z(i)) << '\n';
}

void write_history_csv(const OptimizeResult& result, const DesignProblem& problem,
                       const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << "evaluation,generation,member,objective";
  for (const auto& v : problem.theta) out << ',' << csv_safe(v.name);
  for (const auto& v : problem.phi) out << ',' << csv_safe(v.name);
  out << '\n';
  int eval = 0;
  for (const auto& entry : result.history) {
    out << ++eval << ',' << entry.generation << ',' << entry.member << ','
        << fmt17(entry.objective);
    for (double v : entry.theta) out << ',' << fmt17(v);
    for (double v : entry.phi) out << ',' << fmt17(v);
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Problem files
// ---------------------------------------------------------------------------

namespace {

std::vector<DesignVariable> parse_variables(const json& arr, const std::string& path) {
  std::vector<DesignVariable> out;
  int i = 0;
  for (const auto& jv : arr) {
    const std::string vpath = path + "/" + std::to_string(i++);
    check_fields(jv, {"name", "lower", "upper", "discrete", "levels"}, vpath);
    DesignVariable v;
    v.name = need_string(jv, "name", vpath);
    if (symbols::is_reserved(v.name))
      fail(vpath, "variable name '" + v.name + "' collides with a reserved symbol");
    v.lower = need_number(jv, "lower", vpath);
    v.upper = need_number(jv, "upper", vpath);
    if (v.upper < v.lower) fail(vpath, "upper bound below lower bound");
    if (jv.contains("discrete")) v.discrete = jv["discrete"].get<bool>();
    if (jv.contains("levels")) v.levels = number_list(jv["levels"], vpath + "/levels");
    if (v.discrete && v.levels.empty()) fail(vpath, "discrete variable needs levels");
    out.push_back(std::move(v));
  }
  return out;
}

}  // namespace

DesignProblem load_problem(const std::string& path) {
  json doc = read_document(path);
  const std::string kind = need_string(doc, "kind", path);
  if (kind != "problem") throw IoError(path + ": expected a problem document");
  check_fields(doc,
               {"schema_version", "kind", "model", "design_variables", "controller_variables",
                "vertex_scaling", "edge_scaling", "control", "objective", "t_final", "dt",
                "initial_conditions", "signals", "signals_csv"},
               path);

  DesignProblem problem;
  const std::string base = std::filesystem::path(path).parent_path().string();

  const json& model = need(doc, "model", path);
  if (model.is_string()) {
    std::filesystem::path p(model.get<std::string>());
    if (p.is_relative()) p = std::filesystem::path(base) / p;
    problem.baseline = load_graph(p.string());
  } else if (model.is_object()) {
    const std::string mkind = need_string(model, "kind", path + "/model");
    if (mkind == "component")
      problem.baseline = parse_component(model, path + "/model");
    else if (mkind == "system")
      problem.baseline = realize_system(parse_system(model, path + "/model"), base);
    else
      fail(path + "/model", "unknown document kind '" + mkind + "'");
  } else {
    fail(path + "/model", "expected a file path or an inline document");
  }

  if (doc.contains("design_variables"))
    problem.theta = parse_variables(doc["design_variables"], path + "/design_variables");
  if (doc.contains("controller_variables"))
    problem.phi = parse_variables(doc["controller_variables"], path + "/controller_variables");

  auto parse_scaling = [&](const char* key, std::map<int, Expression>& target) {
    if (!doc.contains(key)) return;
    for (const auto& [index_text, expr] : doc[key].items()) {
      int index = 0;
      try {
        index = std::stoi(index_text);
      } catch (const std::exception&) {
        fail(path + "/" + key, "index '" + index_text + "' is not an integer");
      }
      target.emplace(index, parse_equation(expr.get<std::string>(), path + "/" + key));
    }
  };
  parse_scaling("vertex_scaling", problem.vertex_scaling);
  parse_scaling("edge_scaling", problem.edge_scaling);

  if (doc.contains("control")) {
    const json& jc = doc["control"];
    const std::string type = need_string(jc, "type", path + "/control");
    if (type == "open_loop") {
      check_fields(jc, {"type"}, path + "/control");
      problem.control.kind = ControlLaw::Kind::OpenLoop;
    } else if (type == "proportional") {
      check_fields(jc, {"type", "laws"}, path + "/control");
      problem.control.kind = ControlLaw::Kind::Proportional;
      int i = 0;
      for (const auto& jl : need(jc, "laws", path + "/control")) {
        const std::string lpath = path + "/control/laws/" + std::to_string(i++);
        check_fields(jl,
                     {"input", "state", "gain", "gain_var", "reference", "reference_var",
                      "min", "max"},
                     lpath);
        ProportionalLaw law;
        law.input = need_int(jl, "input", lpath);
        law.state = need_int(jl, "state", lpath);
        if (jl.contains("gain")) law.gain = jl["gain"].get<double>();
        if (jl.contains("gain_var")) law.gain_var = jl["gain_var"].get<std::string>();
        if (jl.contains("reference")) law.reference = jl["reference"].get<double>();
        if (jl.contains("reference_var"))
          law.reference_var = jl["reference_var"].get<std::string>();
        if (jl.contains("min")) law.min = jl["min"].get<double>();
        if (jl.contains("max")) law.max = jl["max"].get<double>();
        problem.control.proportional.push_back(std::move(law));
      }
    } else if (type == "affine") {
      check_fields(jc, {"type", "k", "b", "min", "max"}, path + "/control");
      problem.control.kind = ControlLaw::Kind::Affine;
      const json& jk = need(jc, "k", path + "/control");
      const json& jb = need(jc, "b", path + "/control");
      const auto rows = jk.size();
      const auto cols = rows ? jk[0].size() : 0;
      problem.control.affine.k.resize(static_cast<Eigen::Index>(rows),
                                      static_cast<Eigen::Index>(cols));
      for (std::size_t r = 0; r < rows; ++r) {
        auto row = number_list(jk[r], path + "/control/k");
        if (row.size() != cols) fail(path + "/control/k", "ragged matrix");
        for (std::size_t c = 0; c < cols; ++c)
          problem.control.affine.k(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
              row[c];
      }
      auto b = number_list(jb, path + "/control/b");
      problem.control.affine.b =
          Eigen::Map<const Eigen::VectorXd>(b.data(), static_cast<Eigen::Index>(b.size()));
      if (jc.contains("min")) problem.control.affine.min = jc["min"].get<double>();
      if (jc.contains("max")) problem.control.affine.max = jc["max"].get<double>();
    } else {
      fail(path + "/control", "unknown control type '" + type + "'");
    }
  }

  problem.objective = parse_equation(need_string(doc, "objective", path), path + "/objective");
  problem.t_final = need_number(doc, "t_final", path);
  problem.dt = need_number(doc, "dt", path);

  if (doc.contains("initial_conditions")) {
    auto x0 = number_list(doc["initial_conditions"], path + "/initial_conditions");
    problem.x0 =
        Eigen::Map<const Eigen::VectorXd>(x0.data(), static_cast<Eigen::Index>(x0.size()));
  }
  if (doc.contains("signals_csv")) {
    std::filesystem::path p(doc["signals_csv"].get<std::string>());
    if (p.is_relative()) p = std::filesystem::path(base) / p;
    problem.signals = load_signals_csv(p.string());
  }
  if (doc.contains("signals")) {
    for (const auto& [name, js] : doc["signals"].items()) {
      const std::string spath = path + "/signals/" + name;
      check_fields(js, {"times", "values", "piecewise_constant"}, spath);
      bool pwc = js.contains("piecewise_constant") && js["piecewise_constant"].get<bool>();
      problem.signals.set_series(name, number_list(need(js, "times", spath), spath),
                                 number_list(need(js, "values", spath), spath), pwc);
    }
  }
  return problem;
}

}  // namespace energraph
