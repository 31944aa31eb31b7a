#pragma once

#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "nld/forms.hpp"

namespace nld {

struct PgdConfig {
  double tau = 0.25;
  int max_iterations = 20;
  FormKind kind = FormKind::local_conductivity();
  Source source;
  double a_min = 0.1;
  double a_max = 2.0;
  double lambda = 0.5;  // constant cost weight
  double q = 2.0;
  double solver_tol = 1e-10;
  double stop_tol = 0.0;  // relative cost decrease threshold; 0 disables early stop
  QuadConfig quad = QuadConfig::defaults(2);

  void validate() const;
};

struct IterationRecord {
  int iter = 0;
  double reduced_cost = 0.0;
  double state_l2 = 0.0;
  double design_l2 = 0.0;
  double max_design = 0.0;
  double min_design = 0.0;
};

struct PgdResult {
  DesignField design;
  StateField state;
  std::vector<double> cost_history;  // iterations_run + 1 entries
  std::vector<IterationRecord> log;
  double compliance = 0.0;  // <f, u> at the final design
  double assembly_time = 0.0;
  double solve_time = 0.0;
  double gradient_sweep_time = 0.0;
  int iterations_run = 0;
};

/// Raised when a solve fails mid-run; carries the iterations completed so far.
class PgdAborted : public std::runtime_error {
 public:
  PgdAborted(const std::string& what, PgdResult partial)
      : std::runtime_error(what), partial_(std::move(partial)) {}
  const PgdResult& partial() const noexcept { return partial_; }

 private:
  PgdResult partial_;
};

/// sum_T lambda |a_T|^q |T| over Interior elements.
double design_penalty(const Mesh& mesh, const DesignField& design, double lambda, double q);

/// ||a||_{L^2(Omega)}.
double design_l2(const Mesh& mesh, const DesignField& design);

/// <f, T[a]> + sum_T lambda |a_T|^q |T|.
double reduced_cost(const Mesh& mesh, const DesignField& design, FormKind kind, const Source& f, double lambda,
                    double q, const QuadConfig& config, double tol = 1e-10);

/// Gateaux derivative in direction b: -sum_T b_T g_T + sum_T lambda q a_T^(q-1) b_T |T|.
double directional_derivative(const Mesh& mesh, const DesignField& design, std::span<const double> direction,
                              FormKind kind, const Source& f, double lambda, double q, const QuadConfig& config,
                              double tol = 1e-10);

/// Element-wise clamp to [a_min, a_max].
std::vector<double> project_design(std::span<const double> values, double a_min, double a_max);

/// One explicit projected step from design a with gradient values g (Interior elements).
std::vector<double> pgd_step(const Mesh& mesh, const DesignField& a, std::span<const double> g, double tau,
                             double lambda, double q);

PgdResult run_pgd(const Mesh& mesh, const PgdConfig& config);

/// CSV with header `iter,reduced_cost,state_l2,design_l2,max_design,min_design`.
void write_iteration_log(std::ostream& out, const std::vector<IterationRecord>& log);

}  // namespace nld
