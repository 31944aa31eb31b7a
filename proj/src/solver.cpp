#include "nld/solver.hpp"

#include <Eigen/Cholesky>
#include <Eigen/IterativeLinearSolvers>

#include <cmath>

#include "nld/errors.hpp"

namespace nld {

namespace {

double relative_residual(const SymSparseMatrix& K, std::span<const double> u, std::span<const double> F) {
  const auto Ku = K.multiply(u);
  double r = 0.0;
  double f = 0.0;
  for (std::size_t i = 0; i < F.size(); ++i) {
    r += (Ku[i] - F[i]) * (Ku[i] - F[i]);
    f += F[i] * F[i];
  }
  return f > 0.0 ? std::sqrt(r / f) : std::sqrt(r);
}

}  // namespace

std::vector<double> solve_spd(const SymSparseMatrix& K, std::span<const double> F, double tol, int max_iter,
                              SolveStats* stats) {
  const std::size_t n = K.size();
  if (F.size() != n) throw ParameterError("right-hand side size does not match the matrix");
  if (!(tol > 0.0)) throw ParameterError("solver tolerance must be positive");
  SolveStats local;
  std::vector<double> u(n, 0.0);
  bool zero = true;
  for (double x : F) zero &= x == 0.0;
  if (zero || n == 0) {
    local.method = n < kDirectSolveLimit ? "cholesky" : "pcg";
    if (stats) *stats = local;
    return u;
  }
  const Eigen::Map<const Eigen::VectorXd> b(F.data(), static_cast<Eigen::Index>(n));
  if (n < kDirectSolveLimit) {
    local.method = "cholesky";
    Eigen::LLT<Eigen::MatrixXd> llt(K.to_dense());
    if (llt.info() != Eigen::Success) throw NumericalIntegrityError("Cholesky factorization met a nonpositive pivot");
    Eigen::Map<Eigen::VectorXd>(u.data(), static_cast<Eigen::Index>(n)) = llt.solve(b);
    local.residual = relative_residual(K, u, F);
    if (!(local.residual <= tol)) {
      // one step of iterative refinement
      const auto Ku = K.multiply(u);
      Eigen::VectorXd r(static_cast<Eigen::Index>(n));
      for (std::size_t i = 0; i < n; ++i) r[static_cast<Eigen::Index>(i)] = F[i] - Ku[i];
      const Eigen::VectorXd du = llt.solve(r);
      for (std::size_t i = 0; i < n; ++i) u[i] += du[static_cast<Eigen::Index>(i)];
      local.residual = relative_residual(K, u, F);
      local.iterations = 1;
    }
    if (!(local.residual <= tol))
      throw SolverError("direct solve missed the residual tolerance", local.residual, local.iterations);
  } else {
    local.method = "pcg";
    const Eigen::SparseMatrix<double> A = K.to_eigen();
    Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper,
                             Eigen::DiagonalPreconditioner<double>>
        cg;
    cg.setTolerance(0.5 * tol);
    cg.setMaxIterations(max_iter > 0 ? max_iter : static_cast<int>(10 * n));
    cg.compute(A);
    // the recursive CG residual drifts from the true one; restart from the current iterate
    Eigen::VectorXd x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    for (int restart = 0; restart < 5; ++restart) {
      x = cg.solveWithGuess(b, x);
      local.iterations += static_cast<int>(cg.iterations());
      Eigen::Map<Eigen::VectorXd>(u.data(), static_cast<Eigen::Index>(n)) = x;
      local.residual = relative_residual(K, u, F);
      if (local.residual <= tol || cg.info() == Eigen::NoConvergence) break;
    }
    if (!(local.residual <= tol))
      throw SolverError("conjugate gradients did not converge", local.residual, local.iterations);
  }
  if (stats) *stats = local;
  return u;
}

StateField design_to_state(const FormOperator& op, const DesignField& design, std::span<const double> load,
                           double tol, SolveStats* stats) {
  if (load.size() != op.num_unknowns()) throw ParameterError("load size does not match the operator");
  const SymSparseMatrix K = op.stiffness(design);
  return {solve_spd(K, load, tol, 0, stats), op.components()};
}

StateField design_to_state(const Mesh& mesh, const DesignField& design, FormKind kind, const Source& f,
                           double tol, const QuadConfig& config) {
  const FormOperator op(mesh, kind, config);
  const auto F = assemble_load(mesh, f, op.components());
  return design_to_state(op, design, F, tol);
}

}  // namespace nld
