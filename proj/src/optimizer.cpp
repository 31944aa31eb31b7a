#include "nld/optimizer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "nld/errors.hpp"
#include "nld/solver.hpp"

namespace nld {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

void PgdConfig::validate() const {
  if (!(tau > 0.0 && tau <= 1.0)) throw ParameterError("step size tau must lie in (0, 1]");
  if (max_iterations < 0) throw ParameterError("iteration count must be nonnegative");
  if (!(q > 1.0)) throw ParameterError("cost exponent q must exceed 1");
  if (!(lambda > 0.0)) throw ParameterError("cost weight lambda must be positive");
  if (!(a_min > 0.0 && a_min <= a_max)) throw ParameterError("design bounds need 0 < a_min <= a_max");
  if (!(solver_tol > 0.0)) throw ParameterError("solver tolerance must be positive");
  if (!(stop_tol >= 0.0)) throw ParameterError("stop tolerance must be nonnegative");
  kind.validate();
  quad.validate();
}

double design_penalty(const Mesh& mesh, const DesignField& design, double lambda, double q) {
  double total = 0.0;
  for (std::size_t e = 0; e < mesh.num_interior_elements(); ++e)
    total += lambda * std::pow(std::abs(design.values[e]), q) * mesh.measure(e);
  return total;
}

double design_l2(const Mesh& mesh, const DesignField& design) {
  double total = 0.0;
  for (std::size_t e = 0; e < mesh.num_interior_elements(); ++e)
    total += design.values[e] * design.values[e] * mesh.measure(e);
  return std::sqrt(total);
}

double reduced_cost(const Mesh& mesh, const DesignField& design, FormKind kind, const Source& f, double lambda,
                    double q, const QuadConfig& config, double tol) {
  const FormOperator op(mesh, kind, config);
  const auto F = assemble_load(mesh, f, op.components());
  const StateField u = design_to_state(op, design, F, tol);
  return dot(F, u.values) + design_penalty(mesh, design, lambda, q);
}

double directional_derivative(const Mesh& mesh, const DesignField& design, std::span<const double> direction,
                              FormKind kind, const Source& f, double lambda, double q, const QuadConfig& config,
                              double tol) {
  if (direction.size() != mesh.num_interior_elements()) throw ParameterError("direction size mismatch");
  const FormOperator op(mesh, kind, config);
  const auto F = assemble_load(mesh, f, op.components());
  const StateField u = design_to_state(op, design, F, tol);
  const auto g = op.element_energies(u);
  double d = 0.0;
  for (std::size_t e = 0; e < direction.size(); ++e)
    d += -direction[e] * g[e] + lambda * q * std::pow(design.values[e], q - 1.0) * direction[e] * mesh.measure(e);
  return d;
}

std::vector<double> project_design(std::span<const double> values, double a_min, double a_max) {
  std::vector<double> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = std::max(std::min(a_max, values[i]), a_min);
  return out;
}

std::vector<double> pgd_step(const Mesh& mesh, const DesignField& a, std::span<const double> g, double tau,
                             double lambda, double q) {
  std::vector<double> next(a.values.size());
  for (std::size_t e = 0; e < next.size(); ++e) {
    const double area = mesh.measure(e);
    next[e] = a.values[e] + tau / area * (g[e] - q * lambda * std::pow(a.values[e], q - 1.0) * area);
  }
  return project_design(next, a.a_min, a.a_max);
}

PgdResult run_pgd(const Mesh& mesh, const PgdConfig& config) {
  config.validate();
  const FormOperator op(mesh, config.kind, config.quad);
  const auto F = assemble_load(mesh, config.source, op.components());

  PgdResult result;
  result.design = DesignField::constant(mesh, 0.5 * (config.a_min + config.a_max), config.a_min, config.a_max);
  for (int k = 0;; ++k) {
    result.design.validate(mesh);
    try {
      auto t0 = Clock::now();
      const SymSparseMatrix K = op.stiffness(result.design);
      result.assembly_time += seconds_since(t0);
      t0 = Clock::now();
      result.state = {solve_spd(K, F, config.solver_tol), op.components()};
      result.solve_time += seconds_since(t0);
    } catch (const std::exception& e) {
      throw PgdAborted(std::string("state solve failed at iteration ") + std::to_string(k) + ": " + e.what(),
                       result);
    }
    result.compliance = dot(F, result.state.values);
    const double cost = result.compliance + design_penalty(mesh, result.design, config.lambda, config.q);
    const auto [lo, hi] = std::minmax_element(result.design.values.begin(), result.design.values.end());
    result.cost_history.push_back(cost);
    result.log.push_back({k, cost, l2_norm(mesh, result.state), design_l2(mesh, result.design), *hi, *lo});
    result.iterations_run = k;
    if (k == config.max_iterations) break;
    if (config.stop_tol > 0.0 && k > 0) {
      const double prev = result.cost_history[static_cast<std::size_t>(k) - 1];
      if ((prev - cost) / std::abs(prev) < config.stop_tol) break;
    }
    const auto t0 = Clock::now();
    const auto g = op.element_energies(result.state);
    result.gradient_sweep_time += seconds_since(t0);
    result.design.values = pgd_step(mesh, result.design, g, config.tau, config.lambda, config.q);
  }
  return result;
}

void write_iteration_log(std::ostream& out, const std::vector<IterationRecord>& log) {
  out << "iter,reduced_cost,state_l2,design_l2,max_design,min_design\n";
  char buf[256];
  for (const auto& r : log) {
    std::snprintf(buf, sizeof buf, "%d,%.10e,%.10e,%.10e,%.10e,%.10e\n", r.iter, r.reduced_cost, r.state_l2,
                  r.design_l2, r.max_design, r.min_design);
    out << buf;
  }
}

}  // namespace nld
