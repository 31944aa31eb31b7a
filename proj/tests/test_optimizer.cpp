#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "nld/errors.hpp"
#include "nld/optimizer.hpp"
#include "nld/oracle.hpp"
#include "nld/solver.hpp"

using namespace nld;

TEST(Projection, ClampsAndIsIdempotent) {
  const std::vector<double> x{2.5, 1.0, -3.0, 0.1, 2.0};
  const auto p = project_design(x, 0.1, 2.0);
  EXPECT_EQ(p, (std::vector<double>{2.0, 1.0, 0.1, 0.1, 2.0}));
  EXPECT_EQ(project_design(p, 0.1, 2.0), p);
}

TEST(ReducedCost, ZeroLoadIsPenaltyOnly) {
  const Mesh m = build_disk_mesh_rings(1.0, 4);
  const double r = reduced_cost(m, DesignField::constant(m, 1.0, 0.1, 2.0), FormKind::local_conductivity(),
                                Source::parse("const:0"), 0.5, 2.0, QuadConfig::defaults(2));
  EXPECT_NEAR(r, 0.5 * m.interior_measure(), 1e-14);
}

TEST(Gradient, ZeroDirection) {
  const Mesh m = build_interval_mesh(0.0, 1.0, 8);
  const std::vector<double> b(8, 0.0);
  EXPECT_EQ(directional_derivative(m, DesignField::constant(m, 1.0, 0.1, 2.0), b, FormKind::local_conductivity(),
                                   Source{}, 0.5, 2.0, QuadConfig::defaults(1)),
            0.0);
}

TEST(Gradient, MatchesFiniteDifferences) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> U(0.3, 1.8);
  std::normal_distribution<double> N;
  const Mesh local = build_interval_mesh(0.0, 1.0, 16);
  const Mesh layered = extend_with_horizon(local, 0.25);
  struct Case { const Mesh& mesh; FormKind kind; };
  const Case cases[] = {{local, FormKind::local_conductivity()},
                        {layered, FormKind::fractional_conductivity(0.5, 0.25)}};
  for (const auto& c : cases)
    for (int k = 0; k < 4; ++k) {
      DesignField a = DesignField::constant(c.mesh, 1.0, 0.1, 2.0);
      for (double& v : a.values) v = U(rng);
      std::vector<double> b(a.values.size());
      for (double& v : b) v = N(rng);
      const double exact = directional_derivative(c.mesh, a, b, c.kind, Source{}, 0.5, 2.0,
                                                  QuadConfig::defaults(1), 1e-12);
      const double fd = central_difference_derivative(c.mesh, a, b, c.kind, Source{}, 0.5, 2.0,
                                                       QuadConfig::defaults(1));
      EXPECT_NEAR(exact, fd, 1e-4 * std::abs(fd)) << c.kind.name();
    }
}

TEST(Gradient, UniformDirectionLocal) {
  const Mesh m = build_disk_mesh_rings(1.0, 4);
  const DesignField a = DesignField::constant(m, 0.8, 0.1, 2.0);
  const std::vector<double> b(m.num_interior_elements(), 1.0);
  const double d = directional_derivative(m, a, b, FormKind::local_conductivity(), Source{}, 0.5, 2.0,
                                          QuadConfig::defaults(2));
  const StateField u = design_to_state(m, a, FormKind::local_conductivity(), Source{}, 1e-12, QuadConfig::defaults(2));
  const auto K1 = assemble_stiffness(m, DesignField::constant(m, 1.0, 1.0, 1.0), FormKind::local_conductivity(),
                                     QuadConfig::defaults(2));
  const double expected = -K1.quadratic_form(u.values) + 2.0 * 0.5 * 0.8 * m.interior_measure();
  EXPECT_NEAR(d, expected, 1e-12 * std::abs(expected));
}

TEST(PgdStep, StationaryDesignIsFixedPoint) {
  const Mesh m = build_disk_mesh_rings(1.0, 3);
  DesignField a = DesignField::constant(m, 1.0, 0.1, 2.0);
  std::mt19937_64 rng(22);
  std::uniform_real_distribution<double> U(0.2, 1.9);
  std::vector<double> g(a.values.size());
  for (std::size_t e = 0; e < g.size(); ++e) {
    a.values[e] = U(rng);
    g[e] = m.measure(e) * 2.0 * 0.5 * a.values[e];
  }
  const auto next = pgd_step(m, a, g, 0.25, 0.5, 2.0);
  for (std::size_t e = 0; e < g.size(); ++e) EXPECT_NEAR(next[e], a.values[e], 1e-14);
}

TEST(Pgd, ZeroIterationsReturnsInitialDesign) {
  const Mesh m = build_disk_mesh_rings(1.0, 3);
  PgdConfig c;
  c.max_iterations = 0;
  const PgdResult r = run_pgd(m, c);
  EXPECT_EQ(r.iterations_run, 0);
  ASSERT_EQ(r.cost_history.size(), 1u);
  for (double v : r.design.values) EXPECT_DOUBLE_EQ(v, 1.05);
  EXPECT_NEAR(r.cost_history[0],
              reduced_cost(m, r.design, c.kind, c.source, c.lambda, c.q, c.quad, c.solver_tol), 1e-12);
}

TEST(Pgd, FractionalDescentIn1D) {
  const Mesh m = extend_with_horizon(build_interval_mesh(0.0, 1.0, 64), 0.1);
  PgdConfig c;
  c.kind = FormKind::fractional_conductivity(0.5, 0.1);
  c.max_iterations = 50;
  c.quad = QuadConfig::defaults(1);
  const PgdResult r = run_pgd(m, c);
  ASSERT_EQ(r.cost_history.size(), 51u);
  for (std::size_t k = 1; k < r.cost_history.size(); ++k) EXPECT_LE(r.cost_history[k], r.cost_history[k - 1] + 1e-12);
  for (double v : r.design.values) {
    EXPECT_GE(v, c.a_min);
    EXPECT_LE(v, c.a_max);
  }
}

TEST(Pgd, EarlyStopAndLog) {
  const Mesh m = build_interval_mesh(0.0, 1.0, 32);
  PgdConfig c;
  c.max_iterations = 500;
  c.stop_tol = 1e-6;
  c.quad = QuadConfig::defaults(1);
  const PgdResult r = run_pgd(m, c);
  EXPECT_LT(r.iterations_run, 500);
  EXPECT_EQ(r.cost_history.size(), static_cast<std::size_t>(r.iterations_run) + 1);
  std::ostringstream out;
  write_iteration_log(out, r.log);
  const std::string text = out.str();
  EXPECT_EQ(text.rfind("iter,reduced_cost,state_l2,design_l2,max_design,min_design\n0,", 0), 0u);
}

TEST(PgdConfig, Validation) {
  PgdConfig c;
  c.tau = 0.0;
  EXPECT_THROW(c.validate(), ParameterError);
  c = PgdConfig{};
  c.q = 1.0;
  EXPECT_THROW(c.validate(), ParameterError);
  c = PgdConfig{};
  c.a_min = 3.0;
  EXPECT_THROW(c.validate(), ParameterError);
}
