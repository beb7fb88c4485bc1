#include "energraph/graph.hpp"

#include "energraph/components.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <random>

using namespace energraph;
using energraph::testing::uniform_int;

namespace {

VertexSpec simple_vertex(std::string name, VertexKind kind = VertexKind::Dynamic) {
  VertexSpec v;
  v.name = std::move(name);
  v.kind = kind;
  if (kind != VertexKind::External) {
    v.equations.push_back(Expression::parse(kind == VertexKind::Dynamic ? "x_dot" : "0"));
    v.initial_condition = std::vector<double>{0.0};
  }
  return v;
}

Graph two_vertex_one_edge() {
  GraphBuilder b("pair");
  b.add_vertex(simple_vertex("v1"));
  b.add_vertex(simple_vertex("v2"));
  b.add_edge("e1", "xt-xh", 2, 1, false);
  return b.build();
}

/// Random structurally-valid graph: every edge runs between two distinct
/// vertices (dynamic or external).
Graph random_graph(std::mt19937_64& eng) {
  const int nv = uniform_int(eng, 2, 20);
  const int ne = uniform_int(eng, 1, 40);
  GraphBuilder b("random");
  for (int i = 1; i <= nv; ++i) {
    const bool external = i > 1 && uniform_int(eng, 0, 4) == 0;
    b.add_vertex(simple_vertex("v" + std::to_string(i),
                               external ? VertexKind::External : VertexKind::Dynamic));
  }
  for (int j = 1; j <= ne; ++j) {
    int tail = uniform_int(eng, 1, nv);
    int head = uniform_int(eng, 1, nv);
    while (head == tail) head = uniform_int(eng, 1, nv);
    b.add_edge("e" + std::to_string(j), "xt-xh", tail, head, false);
  }
  return b.build();
}

}  // namespace

TEST_CASE("incidence matrix follows the tail/head sign convention") {
  // Single edge with EdgeMatrix row (2,1): column (-1, +1).
  Graph g = two_vertex_one_edge();
  Eigen::MatrixXd m = incidence_matrix(g);
  REQUIRE(m.rows() == 2);
  REQUIRE(m.cols() == 1);
  CHECK(m(0, 0) == -1.0);
  CHECK(m(1, 0) == 1.0);

  // 3 vertices, edges {(1,2),(2,3)}.
  GraphBuilder b("chain");
  for (int i = 1; i <= 3; ++i) b.add_vertex(simple_vertex("v" + std::to_string(i)));
  b.add_edge("e1", "xt-xh", 1, 2, false);
  b.add_edge("e2", "xt-xh", 2, 3, false);
  Eigen::MatrixXd m3 = incidence_matrix(b.build());
  Eigen::MatrixXd expected(3, 2);
  expected << 1, 0, -1, 1, 0, -1;
  CHECK(m3 == expected);
}

TEST_CASE("incidence matrix of an edgeless graph is Nv x 0") {
  GraphBuilder b("bare");
  b.add_vertex(simple_vertex("v1"));
  b.add_vertex(simple_vertex("v2"));
  Eigen::MatrixXd m = incidence_matrix(b.build());
  CHECK(m.rows() == 2);
  CHECK(m.cols() == 0);
}

TEST_CASE("partition splits dynamic rows from external rows") {
  GraphBuilder b("mix");
  b.add_vertex(simple_vertex("d1"));
  b.add_vertex(simple_vertex("d2"));
  b.add_vertex(simple_vertex("s1", VertexKind::External));
  b.add_edge("e1", "xt-xh", 1, 2, false);
  b.add_edge("e2", "xt-xh", 3, 1, true);
  Graph g = b.build();
  Eigen::MatrixXd m = incidence_matrix(g);
  auto [top, bottom] = partition_incidence(m, g);
  REQUIRE(top.rows() == 2);
  REQUIRE(bottom.rows() == 1);
  CHECK(top == m.topRows(2));
  CHECK(bottom == m.bottomRows(1));

  Eigen::MatrixXd restacked(m.rows(), m.cols());
  restacked << top, bottom;
  CHECK(restacked == m);
}

TEST_CASE("partition of an all-dynamic graph leaves no external rows") {
  Graph g = two_vertex_one_edge();
  auto [top, bottom] = partition_incidence(incidence_matrix(g), g);
  CHECK(top.rows() == 2);
  CHECK(bottom.rows() == 0);
}

TEST_CASE("the single-phase cold plate partitions to a 2 x |E| dynamic block") {
  Graph load = instantiate(ComponentKind::HeatLoad, "hl");
  auto [top, bottom] = partition_incidence(incidence_matrix(load), load);
  CHECK(top.rows() == 2);
  CHECK(top.cols() == load.edge_count());
  CHECK(bottom.rows() == 1);
}

TEST_CASE("symbol names follow the identifier grammar") {
  CHECK_THROWS_AS(Expression::symbol(""), ExprError);
  CHECK_THROWS_AS(Expression::symbol("9x"), ExprError);
  CHECK_THROWS_AS(Expression::symbol("a-b"), ExprError);
  CHECK(Expression::symbol("_ok9").symbol_name() == "_ok9");
}

TEST_CASE("builder normalizes vertex order to dynamic, algebraic, external") {
  GraphBuilder b("scrambled");
  b.add_vertex(simple_vertex("ext", VertexKind::External));
  b.add_vertex(simple_vertex("alg", VertexKind::Algebraic));
  b.add_vertex(simple_vertex("dyn"));
  b.add_edge("e1", "xt-xh", 1, 3, true);  // ext -> dyn before normalization
  Port port;
  port.type = PortType::VertexConnection;
  port.element_index = 3;  // dyn before normalization
  port.domain = "Thermal";
  b.add_port(port);
  Graph g = b.build();
  CHECK(g.vertex(1).name == "dyn");
  CHECK(g.vertex(2).name == "alg");
  CHECK(g.vertex(3).name == "ext");
  CHECK(g.edge_matrix()[0].tail == 3);
  CHECK(g.edge_matrix()[0].head == 1);
  CHECK(g.ports()[0].element_index == 1);
}

TEST_CASE("khatri_rao equals the incidence matrix in the all-single case") {
  std::mt19937_64 eng(5);
  for (int trial = 0; trial < 10; ++trial) {
    Graph g = random_graph(eng);
    Eigen::MatrixXd m = incidence_matrix(g);
    CHECK(khatri_rao(m, smatrix(g)) == m);
  }
}

TEST_CASE("khatri_rao expands a two-state vertex with an identity block") {
  GraphBuilder b("pair2");
  VertexSpec v;
  v.name = "two";
  v.kind = VertexKind::Dynamic;
  v.state_count = 2;
  v.equations.push_back(Expression::parse("x1_dot"));
  v.equations.push_back(Expression::parse("x2_dot"));
  v.initial_condition = std::vector<double>{0.0, 0.0};
  b.add_vertex(std::move(v));
  EdgeSpec e;
  e.name = "flow";
  e.external = true;
  e.flows.push_back({Expression::parse("u1"), 1, 1});
  e.flows.push_back({Expression::parse("u1"), 2, 2});
  b.add_edge(std::move(e), 1, 0);  // vertex is the tail: m = +1
  b.add_input({"drive", "u1", "-", ""});
  Graph g = b.build();

  Eigen::MatrixXd expanded = khatri_rao(incidence_matrix(g), smatrix(g));
  CHECK(expanded == Eigen::MatrixXd::Identity(2, 2));
}

TEST_CASE("khatri_rao reproduces the two-phase cold plate expansion") {
  Graph plate = instantiate(ComponentKind::TwoPhaseColdPlate, "plate");
  Eigen::MatrixXd expanded = khatri_rao(incidence_matrix(plate), smatrix(plate));
  Eigen::MatrixXd expected(3, 6);
  expected << -1, 0, 1, 0, -1, 0,
               0, -1, 0, 1, 0, 0,
               0, 0, 0, 0, 1, -1;
  REQUIRE(expanded.rows() == 3);
  REQUIRE(expanded.cols() == 6);
  CHECK(expanded == expected);
}

TEST_CASE("khatri_rao rejects nonconformal blocks") {
  Graph g = two_vertex_one_edge();
  SMatrix s = smatrix(g);
  Eigen::MatrixXd wrong = Eigen::MatrixXd::Zero(3, 1);
  CHECK_THROWS_AS(khatri_rao(wrong, s), GraphError);
}

TEST_CASE("random graphs satisfy the column and restack properties") {
  std::mt19937_64 eng(42);
  for (int trial = 0; trial < 50; ++trial) {
    Graph g = random_graph(eng);
    Eigen::MatrixXd m = incidence_matrix(g);
    for (int j = 0; j < m.cols(); ++j) {
      int plus = 0, minus = 0;
      for (int i = 0; i < m.rows(); ++i) {
        if (m(i, j) == 1.0) ++plus;
        if (m(i, j) == -1.0) ++minus;
      }
      REQUIRE(plus == 1);
      REQUIRE(minus == 1);
    }
    auto [top, bottom] = partition_incidence(m, g);
    Eigen::MatrixXd restacked(m.rows(), m.cols());
    if (bottom.rows() > 0)
      restacked << top, bottom;
    else
      restacked = top;
    REQUIRE(restacked == m);
  }
}

TEST_CASE("validate accepts the shipped tank") {
  ValidationReport report = validate(instantiate(ComponentKind::Tank, "mainTank"));
  CHECK(report.errors.empty());
}

TEST_CASE("validate reports undeclared inputs") {
  GraphBuilder b("bad");
  b.add_vertex(simple_vertex("v1"));
  b.add_edge("e1", "u9*xt", 1, 0, true);
  ValidationReport report = validate(b.build());
  REQUIRE_FALSE(report.ok());
  bool found = false;
  for (const auto& e : report.errors)
    if (e.find("undeclared input u9") != std::string::npos) found = true;
  CHECK(found);
}

TEST_CASE("validate reports initial-condition length mismatches") {
  GraphBuilder b("bad_ic");
  VertexSpec v = simple_vertex("v1");
  v.initial_condition = std::vector<double>{1.0, 2.0};  // 1 state, 2 values
  b.add_vertex(std::move(v));
  ValidationReport report = validate(b.build());
  REQUIRE_FALSE(report.ok());
  CHECK(report.errors.front().find("initial condition length") != std::string::npos);
}

TEST_CASE("validate covers the remaining structural invariants") {
  SUBCASE("missing initial condition on a dynamic vertex") {
    GraphBuilder b("g");
    VertexSpec v = simple_vertex("v1");
    v.initial_condition.reset();
    b.add_vertex(std::move(v));
    ValidationReport r = validate(b.build());
    REQUIRE_FALSE(r.ok());
    CHECK(r.errors.front().find("initial condition unassigned") != std::string::npos);
  }
  SUBCASE("algebraic equation must omit the state derivative") {
    GraphBuilder b("g");
    VertexSpec v;
    v.name = "alg";
    v.kind = VertexKind::Algebraic;
    v.equations.push_back(Expression::parse("x_dot"));
    b.add_vertex(std::move(v));
    CHECK_FALSE(validate(b.build()).ok());
  }
  SUBCASE("dynamic equation must contain the state derivative") {
    GraphBuilder b("g");
    VertexSpec v = simple_vertex("v1");
    v.equations[0] = Expression::parse("x");
    b.add_vertex(std::move(v));
    CHECK_FALSE(validate(b.build()).ok());
  }
  SUBCASE("dangling edge must be external") {
    GraphBuilder b("g");
    b.add_vertex(simple_vertex("v1"));
    b.add_edge("e1", "u1", 0, 1, false);
    b.add_input({"in", "u1", "-", ""});
    CHECK_FALSE(validate(b.build()).ok());
  }
  SUBCASE("self-loop edge") {
    GraphBuilder b("g");
    b.add_vertex(simple_vertex("v1"));
    b.add_edge("e1", "xt", 1, 1, false);
    CHECK_FALSE(validate(b.build()).ok());
  }
  SUBCASE("unresolved symbol") {
    GraphBuilder b("g");
    b.add_vertex(simple_vertex("v1"));
    b.add_edge("e1", "mystery*xt", 1, 0, true);
    ValidationReport r = validate(b.build());
    REQUIRE_FALSE(r.ok());
    CHECK(r.errors.front().find("mystery") != std::string::npos);
  }
  SUBCASE("edge connection port must target an external edge") {
    GraphBuilder b("g");
    b.add_vertex(simple_vertex("v1"));
    b.add_vertex(simple_vertex("v2"));
    b.add_edge("e1", "xt-xh", 1, 2, false);
    b.add_port({PortType::EdgeConnection, 1, "Thermal"});
    CHECK_FALSE(validate(b.build()).ok());
  }
  SUBCASE("nonlinear state-derivative dependence") {
    GraphBuilder b("g");
    VertexSpec v = simple_vertex("v1");
    v.equations[0] = Expression::parse("x_dot^2");
    b.add_vertex(std::move(v));
    CHECK_FALSE(validate(b.build()).ok());
  }
  SUBCASE("parameter variable colliding with a reserved symbol") {
    GraphBuilder b("g");
    b.add_vertex(simple_vertex("v1"));
    Parameter p;
    p.description = "bad";
    p.var = "xt";
    p.value = 1.0;
    b.add_parameter(std::move(p));
    CHECK_FALSE(validate(b.build()).ok());
  }
  SUBCASE("call resolving to a scalar parameter") {
    GraphBuilder b("g");
    b.add_vertex(simple_vertex("v1"));
    b.add_edge("e1", "H(xt)", 1, 0, true);
    Parameter p;
    p.description = "not a table";
    p.var = "H";
    p.value = 2.0;
    b.add_parameter(std::move(p));
    CHECK_FALSE(validate(b.build()).ok());
  }
}

TEST_CASE("validate never throws and collects warnings") {
  GraphBuilder b("warned");
  b.add_vertex(simple_vertex("v1"));
  b.add_input({"unused", "u1", "-", ""});
  Parameter p;
  p.description = "unused";
  p.var = "k";
  p.value = 1.0;
  b.add_parameter(std::move(p));
  ValidationReport report = validate(b.build());
  CHECK(report.ok());
  CHECK(report.warnings.size() >= 2);  // unused input, unused parameter, frozen state
}

TEST_CASE("builder rejects impossible structures") {
  {
    GraphBuilder b("g");
    b.add_vertex(simple_vertex("v1"));
    CHECK_THROWS_AS(b.add_edge(EdgeSpec{"empty", {}, false}, 1, 0), GraphError);
  }
  {
    GraphBuilder b("g");
    b.add_vertex(simple_vertex("v1"));
    b.add_edge("e", "xt", 1, 7, false);
    CHECK_THROWS_AS(b.build(), GraphError);
  }
  {
    GraphBuilder b("g");
    b.add_vertex(simple_vertex("v1"));
    b.add_edge("e", "1", 0, 0, true);
    CHECK_THROWS_AS(b.build(), GraphError);
  }
}

TEST_CASE("external flow map lists dangling external edge entries") {
  Graph tank = instantiate(ComponentKind::Tank, "t");
  // Mass In (env->1, +1), Mass Out (1->env, -1), Advection Out and Mass
  // Displacement (2->env, -1) dangle; Advection In runs to an external
  // vertex and is not part of D.
  const auto& d = tank.external_flow_map();
  REQUIRE(d.size() == 4);
  CHECK(d[0].vertex == 1);
  CHECK(d[0].sign == 1.0);
  CHECK(d[1].vertex == 1);
  CHECK(d[1].sign == -1.0);
  CHECK(d[2].vertex == 2);
  CHECK(d[2].sign == -1.0);
  CHECK(d[3].vertex == 2);
  CHECK(d[3].sign == -1.0);
}

TEST_CASE("lookup tables interpolate linearly and clamp outside the grid") {
  LookupTable1D t({0.0, 1.0, 3.0}, {10.0, 20.0, 40.0});
  CHECK(t.sample(0.5) == 15.0);
  CHECK(t.sample(2.0) == 30.0);
  CHECK(t.sample(-5.0) == 10.0);  // flat extrapolation
  CHECK(t.sample(9.0) == 40.0);
  CHECK(t.extrapolation_count() == 2);

  // Bilinear interpolation reproduces a bilinear function exactly.
  LookupTable2D t2({0.0, 1.0, 2.0}, {0.0, 2.0},
                   {0.0, 1.0, 1.0, 4.0, 2.0, 7.0});  // f(x,y) = x + y/2 + x*y
  auto f = [](double x, double y) { return x + y / 2.0 + x * y; };
  for (double x : {0.25, 0.75, 1.5})
    for (double y : {0.5, 1.0, 1.75})
      CHECK(t2.sample(x, y) == doctest::Approx(f(x, y)).epsilon(1e-15));

  CHECK_THROWS_AS(LookupTable1D({1.0, 1.0}, {0.0, 0.0}), std::invalid_argument);
  CHECK_THROWS_AS(LookupTable1D({1.0, 2.0}, {0.0}), std::invalid_argument);
  CHECK_THROWS_AS(LookupTable2D({2.0, 1.0}, {0.0, 1.0}, {0, 0, 0, 0}), std::invalid_argument);
}

TEST_CASE("with_initial_conditions replaces values by vertex name") {
  Graph tank = instantiate(ComponentKind::Tank, "t");
  Graph changed = with_initial_conditions(tank, {{"Fluid Mass", {1234.0}}});
  CHECK(changed.vertex(1).initial_condition == std::vector<double>{1234.0});
  CHECK(changed.vertex(2).initial_condition == tank.vertex(2).initial_condition);
  CHECK_THROWS_AS(with_initial_conditions(tank, {{"nope", {1.0}}}), GraphError);
  CHECK_THROWS_AS(with_initial_conditions(tank, {{"Fluid Mass", {1.0, 2.0}}}), GraphError);
}
