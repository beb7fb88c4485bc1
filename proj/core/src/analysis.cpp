#include "energraph/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <random>
#include <thread>

namespace energraph {

// ---------------------------------------------------------------------------
// Linearization
// ---------------------------------------------------------------------------

LinearModel linearize(const DynamicSystem& sys, const Eigen::VectorXd& x0,
                      const Eigen::VectorXd& u0, const Eigen::VectorXd& d0) {
  if (x0.size() != sys.state_count() || u0.size() != sys.input_count() ||
      d0.size() != sys.disturbance_count())
    throw AnalysisError("linearize: operating point dimensions do not match the system");
  JacobianResult jac = sys.jacobians(x0, u0, d0, 0.0);
  LinearModel model;
  model.a = std::move(jac.dfdx);
  model.b = std::move(jac.dfdu);
  model.z = sys.f(x0, u0, d0, 0.0) - model.a * x0 - model.b * u0;
  model.x0 = x0;
  model.u0 = u0;
  model.d0 = d0;
  model.notes = std::move(jac.notes);
  return model;
}

// ---------------------------------------------------------------------------
// Passivity
// ---------------------------------------------------------------------------

PassivityFormReport passivity_form_check(const Graph& g) {
  PassivityFormReport report;
  for (int j = 1; j <= g.edge_count(); ++j) {
    const EdgeSpec& e = g.edge(j);
    for (int n = 0; n < e.flow_arity(); ++n) {
      const Expression& eq = e.flows[static_cast<std::size_t>(n)].equation;
      AffineFlowReport flow;
      flow.edge = j;
      flow.entry = n + 1;

      std::vector<std::string> inputs;
      for (const auto& sym : eq.free_symbols())
        if (symbols::input_index(sym)) inputs.push_back(sym);

      std::map<std::string, Expression> zero_inputs;
      for (const auto& var : inputs) zero_inputs.emplace(var, Expression::constant(0.0));
      flow.offset = eq.substitute(zero_inputs);

      for (const auto& var : inputs) {
        try {
          Expression gain = eq.differentiate(var);
          for (const auto& other : inputs)
            if (!gain.differentiate(other).is_constant(0.0)) flow.affine = false;
          flow.gains.emplace_back(var, std::move(gain));
        } catch (const UnsupportedDerivative&) {
          flow.affine = false;
        }
      }
      if (!flow.affine) report.all_affine = false;
      report.flows.push_back(std::move(flow));
    }
  }
  return report;
}

PassivityTrace passivity_index(const Eigen::MatrixXd& u_series,
                               const Eigen::MatrixXd& y_series,
                               const std::vector<double>& grid, double beta) {
  const int rows = static_cast<int>(grid.size());
  if (u_series.rows() != rows || y_series.rows() != rows ||
      u_series.cols() != y_series.cols())
    throw AnalysisError("passivity_index: series shapes do not match the time grid");
  PassivityTrace trace;
  trace.time = grid;
  trace.beta = beta;
  trace.z.resize(static_cast<std::size_t>(rows), 0.0);
  double max_z = rows > 0 ? 0.0 : -std::numeric_limits<double>::infinity();
  for (int i = 1; i < rows; ++i) {
    const double h = grid[static_cast<std::size_t>(i)] - grid[static_cast<std::size_t>(i - 1)];
    const double prev = u_series.row(i - 1).dot(y_series.row(i - 1));
    const double cur = u_series.row(i).dot(y_series.row(i));
    trace.z[static_cast<std::size_t>(i)] =
        trace.z[static_cast<std::size_t>(i - 1)] + 0.5 * h * (prev + cur);
    max_z = std::max(max_z, trace.z[static_cast<std::size_t>(i)]);
  }
  trace.violation = max_z > beta;
  return trace;
}

// ---------------------------------------------------------------------------
// Design augmentation and objective
// ---------------------------------------------------------------------------

namespace {

Bindings variable_bindings(const std::vector<DesignVariable>& vars,
                           std::span<const double> values, const char* label) {
  if (values.size() != vars.size())
    throw AnalysisError(std::string(label) + " vector length does not match the problem");
  Bindings b;
  for (std::size_t i = 0; i < vars.size(); ++i) {
    const auto& v = vars[i];
    if (values[i] < v.lower - 1e-12 || values[i] > v.upper + 1e-12)
      throw AnalysisError(std::string(label) + " variable '" + v.name + "' is out of bounds");
    b[v.name] = values[i];
  }
  return b;
}

}  // namespace

Graph augment_design(const Graph& g, const DesignProblem& problem,
                     std::span<const double> theta) {
  Bindings bindings = variable_bindings(problem.theta, theta, "theta");

  std::vector<VertexSpec> vertices = g.vertices();
  for (const auto& [index, psi_expr] : problem.vertex_scaling) {
    if (index < 1 || index > g.vertex_count())
      throw AnalysisError("vertex scaling index " + std::to_string(index) + " out of range");
    const double psi = psi_expr.evaluate(bindings);
    VertexSpec& v = vertices[static_cast<std::size_t>(index - 1)];
    if (v.kind == VertexKind::Dynamic && psi <= 0.0)
      throw AnalysisError("nonphysical capacitance scaling " + std::to_string(psi) +
                          " on dynamic vertex '" + v.name + "'");
    for (auto& eq : v.equations) eq = Expression::mul(Expression::constant(psi), eq);
  }

  std::vector<EdgeSpec> edges = g.edges();
  for (const auto& [index, psi_expr] : problem.edge_scaling) {
    if (index < 1 || index > g.edge_count())
      throw AnalysisError("edge scaling index " + std::to_string(index) + " out of range");
    const double psi = psi_expr.evaluate(bindings);
    for (auto& flow : edges[static_cast<std::size_t>(index - 1)].flows)
      flow.equation = Expression::mul(Expression::constant(psi), flow.equation);
  }

  GraphBuilder builder(g.name());
  for (auto& v : vertices) builder.add_vertex(std::move(v));
  for (int j = 0; j < g.edge_count(); ++j) {
    const auto& ep = g.edge_matrix()[static_cast<std::size_t>(j)];
    builder.add_edge(std::move(edges[static_cast<std::size_t>(j)]), ep.tail, ep.head);
  }
  for (const auto& p : g.parameters()) builder.add_parameter(p);
  for (const auto& in : g.inputs()) builder.add_input(in);
  for (const auto& port : g.ports()) builder.add_port(port);
  for (const auto& note : g.notes()) builder.add_note(note);
  return builder.build();
}

namespace {

InputPolicy build_policy(const DesignProblem& problem, const DynamicSystem& sys,
                         const Bindings& phi) {
  switch (problem.control.kind) {
    case ControlLaw::Kind::OpenLoop:
      return [&sys, &problem](double t, const Eigen::VectorXd&, const Eigen::VectorXd&) {
        return sys.inputs_at(problem.signals, t);
      };
    case ControlLaw::Kind::Proportional: {
      struct Bound {
        int input;
        int state;
        double gain, reference, lo, hi;
      };
      std::vector<Bound> laws;
      for (const auto& law : problem.control.proportional) {
        if (law.input < 1 || law.input > sys.input_count() || law.state < 1 ||
            law.state > sys.state_count())
          throw AnalysisError("proportional law indices out of range");
        Bound bound{law.input, law.state, law.gain, law.reference, law.min, law.max};
        if (!law.gain_var.empty()) bound.gain = phi.at(law.gain_var);
        if (!law.reference_var.empty()) bound.reference = phi.at(law.reference_var);
        laws.push_back(bound);
      }
      return [&sys, &problem, laws](double t, const Eigen::VectorXd& x, const Eigen::VectorXd&) {
        Eigen::VectorXd u = sys.inputs_at(problem.signals, t);
        for (const auto& law : laws)
          u[law.input - 1] =
              std::clamp(law.gain * (law.reference - x[law.state - 1]), law.lo, law.hi);
        return u;
      };
    }
    case ControlLaw::Kind::Affine: {
      const AffineLaw& law = problem.control.affine;
      if (law.k.rows() != sys.input_count() || law.k.cols() != sys.state_count() ||
          law.b.size() != sys.input_count())
        throw AnalysisError("affine law dimensions do not match the system");
      return [law](double, const Eigen::VectorXd& x, const Eigen::VectorXd&) {
        Eigen::VectorXd u = law.k * x + law.b;
        for (int i = 0; i < u.size(); ++i) u[i] = std::clamp(u[i], law.min, law.max);
        return u;
      };
    }
  }
  throw AnalysisError("unknown control law kind");
}

}  // namespace

ObjectiveResult evaluate_objective(const DesignProblem& problem,
                                   std::span<const double> theta,
                                   std::span<const double> phi) {
  Bindings theta_b = variable_bindings(problem.theta, theta, "theta");
  Bindings phi_b = variable_bindings(problem.phi, phi, "phi");

  ObjectiveResult result;
  Trajectory traj;
  const DynamicSystem* sys_ptr = nullptr;
  DynamicSystem sys;
  try {
    Graph augmented = augment_design(problem.baseline, problem, theta);
    sys = assemble(augmented);
    sys_ptr = &sys;
    Eigen::VectorXd x0 =
        problem.x0.size() == sys.state_count() ? problem.x0 : sys.initial_state();
    InputPolicy policy = build_policy(problem, sys, phi_b);
    if (sys.is_dae())
      traj = simulate_dae(sys, x0, policy, problem.signals, 0.0, problem.t_final, problem.dt);
    else
      traj = simulate_ode(sys, x0, policy, problem.signals, 0.0, problem.t_final, problem.dt);
  } catch (const std::exception& e) {
    result.note = e.what();
    return result;  // infeasible: +inf
  }

  // Integrand slots: states, inputs, t, then the design/controller variables.
  std::map<std::string, int> slots;
  const int n = sys_ptr->state_count();
  const int m = sys_ptr->input_count();
  for (int i = 0; i < n; ++i) slots[symbols::state(i + 1)] = i;
  for (int k = 0; k < m; ++k) slots[symbols::input(k + 1)] = n + k;
  slots["t"] = n + m;
  std::vector<double> values(static_cast<std::size_t>(n + m + 1), 0.0);
  for (const auto& [name, value] : theta_b) {
    slots[name] = static_cast<int>(values.size());
    values.push_back(value);
  }
  for (const auto& [name, value] : phi_b) {
    slots[name] = static_cast<int>(values.size());
    values.push_back(value);
  }

  CompiledExpr integrand;
  try {
    integrand = CompiledExpr::compile(problem.objective, slots, nullptr);
  } catch (const ExprError& e) {
    throw AnalysisError(std::string("objective integrand: ") + e.what());
  }

  double j = 0.0;
  double prev_t = 0.0, prev_f = 0.0;
  for (int row = 0; row < traj.rows(); ++row) {
    for (int i = 0; i < n; ++i) values[static_cast<std::size_t>(i)] = traj.states(row, i);
    for (int k = 0; k < m; ++k) values[static_cast<std::size_t>(n + k)] = traj.inputs(row, k);
    const double t = traj.time[static_cast<std::size_t>(row)];
    values[static_cast<std::size_t>(n + m)] = t;
    const double f = integrand.eval(values);
    if (row > 0) j += 0.5 * (t - prev_t) * (f + prev_f);
    prev_t = t;
    prev_f = f;
  }
  if (!std::isfinite(j)) {
    result.note = "objective integrated to a non-finite value";
    return result;
  }
  result.value = j;
  result.note.clear();
  return result;
}

// ---------------------------------------------------------------------------
// Genetic algorithm
// ---------------------------------------------------------------------------

namespace {

constexpr int kPopulation = 16;
constexpr int kTournament = 3;
constexpr double kCrossover = 0.5;
constexpr double kMutationSigmaScale = 0.1;
constexpr double kDiscreteResample = 0.2;

struct GeneSpec {
  double lower, upper;
  bool discrete;
  std::vector<double> levels;
};

double uniform01(std::mt19937_64& eng) {
  return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

double gaussian(std::mt19937_64& eng) {
  double u1 = uniform01(eng);
  double u2 = uniform01(eng);
  if (u1 < 1e-300) u1 = 1e-300;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

double random_gene(const GeneSpec& g, std::mt19937_64& eng) {
  if (g.discrete) {
    std::size_t i = std::min(g.levels.size() - 1,
                             static_cast<std::size_t>(uniform01(eng) * g.levels.size()));
    return g.levels[i];
  }
  return g.lower + uniform01(eng) * (g.upper - g.lower);
}

}  // namespace

OptimizeResult optimize(const DesignProblem& problem, std::uint64_t seed, int budget,
                        int threads) {
  if (budget < kPopulation)
    throw AnalysisError("optimize: budget must cover at least one population of " +
                        std::to_string(kPopulation));

  std::vector<GeneSpec> genes;
  for (const auto& v : problem.theta) {
    if (v.discrete && v.levels.empty())
      throw AnalysisError("discrete variable '" + v.name + "' has no levels");
    genes.push_back({v.lower, v.upper, v.discrete, v.levels});
  }
  const std::size_t n_theta = genes.size();
  for (const auto& v : problem.phi) {
    if (v.discrete && v.levels.empty())
      throw AnalysisError("discrete variable '" + v.name + "' has no levels");
    genes.push_back({v.lower, v.upper, v.discrete, v.levels});
  }
  const std::size_t n_genes = genes.size();
  if (n_genes == 0) throw AnalysisError("optimize: the problem declares no variables");

  std::mt19937_64 eng(seed);
  const int generations = budget / kPopulation;
  int pool = threads;
  if (pool <= 0) pool = static_cast<int>(std::thread::hardware_concurrency());
  pool = std::clamp(pool, 1, kPopulation);

  using Candidate = std::vector<double>;
  auto evaluate_all = [&](const std::vector<Candidate>& pop) {
    std::vector<double> scores(pop.size());
    auto eval_one = [&](std::size_t i) {
      try {
        std::span<const double> all(pop[i]);
        ObjectiveResult r =
            evaluate_objective(problem, all.subspan(0, n_theta), all.subspan(n_theta));
        return r.value;
      } catch (const std::exception&) {
        return std::numeric_limits<double>::infinity();
      }
    };
    if (pool <= 1) {
      for (std::size_t i = 0; i < pop.size(); ++i) scores[i] = eval_one(i);
    } else {
      std::vector<std::future<double>> futures;
      futures.reserve(pop.size());
      for (std::size_t i = 0; i < pop.size(); ++i)
        futures.push_back(std::async(std::launch::async, eval_one, i));
      for (std::size_t i = 0; i < pop.size(); ++i) scores[i] = futures[i].get();
    }
    return scores;
  };

  OptimizeResult result;
  std::vector<Candidate> population(kPopulation);
  for (auto& c : population) {
    c.resize(n_genes);
    for (std::size_t g = 0; g < n_genes; ++g) c[g] = random_gene(genes[g], eng);
  }

  std::vector<double> scores;
  for (int gen = 0; gen < generations; ++gen) {
    if (gen > 0) {
      // Elitist generational step: the best-ever candidate survives, the
      // rest come from tournament selection + crossover + mutation.
      std::vector<Candidate> next(kPopulation);
      if (result.theta.size() + result.phi.size() == n_genes) {
        Candidate best_ever(n_genes);
        std::copy(result.theta.begin(), result.theta.end(), best_ever.begin());
        std::copy(result.phi.begin(), result.phi.end(),
                  best_ever.begin() + static_cast<std::ptrdiff_t>(n_theta));
        next[0] = std::move(best_ever);
      } else {
        // Nothing feasible yet: carry the least-bad member of the last
        // generation instead.
        std::size_t best = 0;
        for (std::size_t i = 1; i < scores.size(); ++i)
          if (scores[i] < scores[best]) best = i;
        next[0] = population[best];
      }
      auto tournament = [&]() -> const Candidate& {
        int best = -1;
        for (int k = 0; k < kTournament; ++k) {
          int i = std::min(kPopulation - 1,
                           static_cast<int>(uniform01(eng) * kPopulation));
          if (best < 0 || scores[static_cast<std::size_t>(i)] <
                              scores[static_cast<std::size_t>(best)])
            best = i;
        }
        return population[static_cast<std::size_t>(best)];
      };
      for (int i = 1; i < kPopulation; ++i) {
        const Candidate& a = tournament();
        const Candidate& b = tournament();
        Candidate child(n_genes);
        for (std::size_t g = 0; g < n_genes; ++g)
          child[g] = uniform01(eng) < kCrossover ? a[g] : b[g];
        for (std::size_t g = 0; g < n_genes; ++g) {
          const GeneSpec& spec = genes[g];
          if (spec.discrete) {
            if (uniform01(eng) < kDiscreteResample) child[g] = random_gene(spec, eng);
          } else {
            child[g] += gaussian(eng) * kMutationSigmaScale * (spec.upper - spec.lower);
            child[g] = std::clamp(child[g], spec.lower, spec.upper);
          }
        }
        next[static_cast<std::size_t>(i)] = std::move(child);
      }
      population = std::move(next);
    }

    scores = evaluate_all(population);
    for (int i = 0; i < kPopulation; ++i) {
      OptimizeEntry entry;
      entry.generation = gen;
      entry.member = i;
      entry.theta.assign(population[static_cast<std::size_t>(i)].begin(),
                         population[static_cast<std::size_t>(i)].begin() +
                             static_cast<std::ptrdiff_t>(n_theta));
      entry.phi.assign(population[static_cast<std::size_t>(i)].begin() +
                           static_cast<std::ptrdiff_t>(n_theta),
                       population[static_cast<std::size_t>(i)].end());
      entry.objective = scores[static_cast<std::size_t>(i)];
      result.history.push_back(std::move(entry));
      if (scores[static_cast<std::size_t>(i)] < result.objective) {
        result.objective = scores[static_cast<std::size_t>(i)];
        result.theta = result.history.back().theta;
        result.phi = result.history.back().phi;
      }
    }
  }
  return result;
}

}  // namespace energraph
