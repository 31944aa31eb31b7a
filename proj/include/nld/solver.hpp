#pragma once

#include <span>
#include <string>
#include <vector>

#include "nld/forms.hpp"

namespace nld {

struct SolveStats {
  std::string method;  // "cholesky" or "pcg"
  double residual = 0.0;  // ||K u - F|| / ||F||
  int iterations = 0;
};

/// Dense Cholesky below 2000 unknowns, Jacobi-preconditioned CG otherwise.
/// max_iter <= 0 selects 10 n. Throws SolverError when CG stalls and
/// NumericalIntegrityError when Cholesky meets a nonpositive pivot.
std::vector<double> solve_spd(const SymSparseMatrix& K, std::span<const double> F, double tol = 1e-10,
                              int max_iter = 0, SolveStats* stats = nullptr);

inline constexpr std::size_t kDirectSolveLimit = 2000;

/// u = T[a]: solves K[a] u = F for the given operator and load.
StateField design_to_state(const FormOperator& op, const DesignField& design, std::span<const double> load,
                           double tol = 1e-10, SolveStats* stats = nullptr);

StateField design_to_state(const Mesh& mesh, const DesignField& design, FormKind kind, const Source& f,
                           double tol, const QuadConfig& config);

}  // namespace nld
