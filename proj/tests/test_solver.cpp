#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "nld/errors.hpp"
#include "nld/solver.hpp"

using namespace nld;

namespace {

SymSparseMatrix dense_to_sym(const Eigen::MatrixXd& A) {
  const auto n = static_cast<std::size_t>(A.rows());
  std::vector<double> d(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) d[i * n + j] = A(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  return SymSparseMatrix::from_dense_lower(n, d);
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

TEST(SolveSpd, Identity) {
  const auto I = dense_to_sym(Eigen::MatrixXd::Identity(5, 5));
  const std::vector<double> F{1.0, -2.0, 3.0, 0.5, 7.0};
  const auto u = solve_spd(I, F);
  for (std::size_t i = 0; i < F.size(); ++i) EXPECT_DOUBLE_EQ(u[i], F[i]);
}

TEST(SolveSpd, RandomDenseSystem) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n;
  Eigen::MatrixXd B(50, 50);
  for (Eigen::Index i = 0; i < B.size(); ++i) B.data()[i] = n(rng);
  const Eigen::MatrixXd A = B * B.transpose() + 50.0 * Eigen::MatrixXd::Identity(50, 50);
  std::vector<double> F(50);
  for (double& x : F) x = n(rng);
  SolveStats st;
  solve_spd(dense_to_sym(A), F, 1e-10, 0, &st);
  EXPECT_EQ(st.method, "cholesky");
  EXPECT_LE(st.residual, 1e-10);
}

TEST(SolveSpd, IterativePathAboveDirectLimit) {
  const Mesh m = build_interval_mesh(0.0, 1.0, 2500);
  const auto K = assemble_stiffness(m, DesignField::constant(m, 1.0, 1.0, 1.0), FormKind::local_conductivity(),
                                    QuadConfig::defaults(1));
  const auto F = assemble_load(m, Source{});
  SolveStats st;
  solve_spd(K, F, 1e-10, 0, &st);
  EXPECT_EQ(st.method, "pcg");
  EXPECT_LE(st.residual, 1e-10);
  EXPECT_THROW(solve_spd(K, F, 1e-10, 3), SolverError);
}

TEST(SolveSpd, IndefiniteMatrixIsIntegrityError) {
  Eigen::MatrixXd A = Eigen::MatrixXd::Identity(3, 3);
  A(1, 1) = -1.0;
  EXPECT_THROW(solve_spd(dense_to_sym(A), std::vector<double>{1.0, 1.0, 1.0}), NumericalIntegrityError);
}

TEST(SolveSpd, ZeroRightHandSide) {
  const auto u = solve_spd(dense_to_sym(Eigen::MatrixXd::Identity(4, 4)), std::vector<double>(4, 0.0));
  for (double x : u) EXPECT_EQ(x, 0.0);
}

TEST(DesignToState, LocalLaplacianIsNodallyExact) {
  const Mesh m = build_interval_mesh(0.0, 1.0, 16);
  const StateField u = design_to_state(m, DesignField::constant(m, 1.0, 1.0, 1.0), FormKind::local_conductivity(),
                                       Source{}, 1e-12, QuadConfig::defaults(1));
  for (std::size_t d = 0; d < m.num_dofs(); ++d) {
    const double x = m.vertex(m.dof_vertex(d))[0];
    EXPECT_NEAR(u.values[d], 0.5 * x * (1.0 - x), 1e-13);
  }
}

TEST(DesignToState, EnergyIdentityAndScaling) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> U(0.1, 2.0);
  const Mesh m = extend_with_horizon(build_interval_mesh(0.0, 1.0, 16), 0.25);
  const FormKind kind = FormKind::fractional_conductivity(0.5, 0.25);
  const FormOperator op(m, kind, QuadConfig::defaults(1));
  DesignField a = DesignField::constant(m, 1.0, 0.1, 5.0);
  for (double& v : a.values) v = U(rng);
  const auto F = assemble_load(m, Source{});
  const StateField u = design_to_state(op, a, F);
  const double compliance = dot(F, u.values);
  EXPECT_NEAR(op.stiffness(a).quadratic_form(u.values), compliance, 1e-8 * compliance);

  DesignField twice = a;
  twice.a_max = 10.0;
  twice.exterior_value *= 2.0;
  for (double& v : twice.values) v *= 2.0;
  const StateField half = design_to_state(op, twice, F);
  for (std::size_t i = 0; i < u.values.size(); ++i) EXPECT_NEAR(half.values[i], 0.5 * u.values[i], 1e-12);
}

TEST(DesignToState, LargerCoefficientLowersCompliance) {
  const Mesh m = extend_with_horizon(build_disk_mesh_rings(1.0, 3), 0.2);
  const FormOperator op(m, FormKind::fractional_conductivity(0.5, 0.2), QuadConfig::defaults(2));
  const auto F = assemble_load(m, Source{});
  double prev = 1e300;
  for (double c : {0.2, 0.5, 1.0, 1.9}) {
    const StateField u = design_to_state(op, DesignField::constant(m, c, 0.1, 2.0), F);
    const double compliance = dot(F, u.values);
    EXPECT_LT(compliance, prev);
    prev = compliance;
  }
}

TEST(DesignToState, ZeroLoadGivesZeroState) {
  const Mesh m = extend_with_horizon(build_interval_mesh(0.0, 1.0, 8), 0.2);
  const StateField u = design_to_state(m, DesignField::constant(m, 1.0, 0.1, 2.0),
                                       FormKind::fractional_conductivity(0.5, 0.2), Source::parse("const:0"), 1e-10,
                                       QuadConfig::defaults(1));
  for (double x : u.values) EXPECT_EQ(x, 0.0);
}
