#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "nld/errors.hpp"
#include "nld/quadrature.hpp"

using namespace nld;

namespace {

double factorial(int n) { return std::tgamma(n + 1.0); }

double sum(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

using Tri = std::array<Point, 3>;

Point map(const Tri& t, const Point& r) {
  return {t[0][0] + r[0] * (t[1][0] - t[0][0]) + r[1] * (t[2][0] - t[0][0]),
          t[0][1] + r[0] * (t[1][1] - t[0][1]) + r[1] * (t[2][1] - t[0][1])};
}

double jac(const Tri& t) {
  return std::abs((t[1][0] - t[0][0]) * (t[2][1] - t[0][1]) - (t[2][0] - t[0][0]) * (t[1][1] - t[0][1]));
}

// Reorders b so that the vertices it shares with a come first, in a's order;
// a is reordered so its shared vertices lead.
std::pair<Tri, Tri> align(Tri a, Tri b, int& shared) {
  Tri ra, rb;
  int k = 0;
  std::array<bool, 3> used_a{}, used_b{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      if (!used_b[j] && a[i] == b[j]) {
        ra[k] = a[i];
        rb[k] = b[j];
        used_a[i] = used_b[j] = true;
        ++k;
      }
  shared = k;
  int ka = k, kb = k;
  for (int i = 0; i < 3; ++i) {
    if (!used_a[i]) ra[ka++] = a[i];
    if (!used_b[i]) rb[kb++] = b[i];
  }
  return {ra, rb};
}

double pair_integral(const Tri& a, const Tri& b, double s, int order) {
  int shared = 0;
  auto [ra, rb] = align(a, b, shared);
  const PairClass cls = shared == 3 ? PairClass::Identical : shared == 2 ? PairClass::EdgeTouch
                        : shared == 1 ? PairClass::VertexTouch : PairClass::Disjoint;
  const PairQuadRule rule = singular_pair_rule(2, cls, s, order);
  double total = 0.0;
  for (const PairNode& n : rule.nodes) {
    const Point x = map(ra, n.x);
    const Point y = map(rb, n.y);
    total += n.weight * std::pow(std::hypot(x[0] - y[0], x[1] - y[1]), -2.0 * s);
  }
  return total * jac(ra) * jac(rb);
}

}  // namespace

TEST(GaussSimplex, LineRuleIsTwoPointGaussForOrderThree) {
  const QuadRule r = gauss_simplex(1, 3);
  ASSERT_EQ(r.size(), 2u);
  EXPECT_NEAR(r.reference_point(0)[0] + r.reference_point(1)[0], 1.0, 1e-15);
  EXPECT_NEAR(std::abs(r.reference_point(0)[0] - r.reference_point(1)[0]), 1.0 / std::sqrt(3.0), 1e-14);
  EXPECT_NEAR(sum(r.weights), 1.0, 1e-14);
}

TEST(GaussSimplex, SmallTriangleRules) {
  const QuadRule centroid = gauss_simplex(2, 1);
  ASSERT_EQ(centroid.size(), 1u);
  EXPECT_DOUBLE_EQ(centroid.weights[0], 0.5);
  const QuadRule three = gauss_simplex(2, 2);
  ASSERT_EQ(three.size(), 3u);
  EXPECT_NEAR(sum(three.weights), 0.5, 1e-15);
}

TEST(GaussSimplex, MonomialExactnessUpToOrder) {
  for (int order = 1; order <= 20; ++order) {
    const QuadRule tri = gauss_simplex(2, order);
    EXPECT_NEAR(sum(tri.weights), 0.5, 1e-14) << order;
    for (double w : tri.weights) EXPECT_GT(w, 0.0);
    for (int a = 0; a <= order; ++a)
      for (int b = 0; a + b <= order; ++b) {
        double q = 0.0;
        for (std::size_t i = 0; i < tri.size(); ++i) {
          const Point p = tri.reference_point(i);
          q += tri.weights[i] * std::pow(p[0], a) * std::pow(p[1], b);
        }
        const double exact = factorial(a) * factorial(b) / factorial(a + b + 2);
        EXPECT_NEAR(q, exact, 1e-12) << "order " << order << " monomial " << a << "," << b;
      }
    const QuadRule line = gauss_simplex(1, order);
    for (int a = 0; a <= order; ++a) {
      double q = 0.0;
      for (std::size_t i = 0; i < line.size(); ++i) q += line.weights[i] * std::pow(line.reference_point(i)[0], a);
      EXPECT_NEAR(q, 1.0 / (a + 1), 1e-13);
    }
  }
}

TEST(GaussSimplex, RejectsUnsupportedOrder) {
  EXPECT_THROW(gauss_simplex(2, 0), ParameterError);
  EXPECT_THROW(gauss_simplex(2, 21), ParameterError);
  EXPECT_THROW(gauss_simplex(3, 2), ParameterError);
}

TEST(GaussJacobi, IntegratesWeightedMonomials) {
  for (double beta : {-0.8, -0.3, 0.0, 0.5, 1.4, 2.6}) {
    const LineRule r = gauss_jacobi(6, beta);
    for (int a = 0; a <= 11; ++a) {
      double q = 0.0;
      for (std::size_t i = 0; i < r.nodes.size(); ++i) q += r.weights[i] * std::pow(r.nodes[i], a);
      EXPECT_NEAR(q, 1.0 / (a + beta + 1.0), 1e-13 / (a + beta + 1.0)) << beta << " " << a;
    }
  }
}

TEST(SingularPairRule, IdenticalIntervalClosedForm) {
  for (double s : {0.1, 0.5, 0.9}) {
    const PairQuadRule rule = singular_pair_rule(1, PairClass::Identical, s, 4);
    double q = 0.0;
    for (const PairNode& n : rule.nodes) q += n.weight * std::pow(std::abs(n.x[0] - n.y[0]), 1.0 - 2.0 * s);
    const double exact = 1.0 / ((1.0 - s) * (3.0 - 2.0 * s));
    EXPECT_NEAR(q, exact, 1e-8 * exact) << s;
  }
}

TEST(SingularPairRule, DisjointIntervalsMatchReference) {
  // reference value from a 30-digit tanh-sinh evaluation
  const double exact = 1.4065996717693694;
  const PairQuadRule rule = singular_pair_rule(1, PairClass::Disjoint, 0.25, 12);
  double q = 0.0;
  for (const PairNode& n : rule.nodes) q += n.weight * std::sqrt(std::abs(2.0 + n.y[0] - n.x[0]));
  EXPECT_NEAR(q, exact, 1e-10 * exact);
}

TEST(SingularPairRule, VertexTouchHatDifference) {
  // [0,1] and [1,2] with the shared vertex first in both; hat centred at 1.
  const double exact = 0.19871093441625558;
  const double s = 0.25;
  const PairQuadRule rule = singular_pair_rule(1, PairClass::VertexTouch, s, 6);
  double q = 0.0;
  for (const PairNode& n : rule.nodes) {
    const double x = 1.0 - n.x[0];
    const double y = 1.0 + n.y[0];
    const double d = (1.0 - n.x[0]) - (1.0 - n.y[0]);
    q += n.weight * d * d * std::pow(std::abs(x - y), -1.0 - 2.0 * s);
  }
  EXPECT_NEAR(q, exact, 1e-8 * exact);
}

TEST(SingularPairRule, NodesAvoidDiagonalAndWeightsPositive) {
  const std::array<PairClass, 4> classes{PairClass::Disjoint, PairClass::VertexTouch, PairClass::EdgeTouch,
                                         PairClass::Identical};
  for (int dim : {1, 2})
    for (PairClass c : classes) {
      if (dim == 1 && c == PairClass::EdgeTouch) continue;
      for (double s : {0.1, 0.5, 0.9}) {
        const PairQuadRule rule = singular_pair_rule(dim, c, s, 5);
        ASSERT_FALSE(rule.nodes.empty());
        for (const PairNode& n : rule.nodes) {
          EXPECT_GT(n.weight, 0.0);
          EXPECT_TRUE(std::isfinite(n.weight));
          if (c != PairClass::Disjoint) {
            // touching pairs share their leading vertices, so equal reference points coincide physically
            EXPECT_FALSE(n.x == n.y && c == PairClass::Identical);
          }
        }
      }
    }
}

TEST(SingularPairRule, RejectsBadParameters) {
  EXPECT_THROW(singular_pair_rule(1, PairClass::Identical, 0.0, 4), ParameterError);
  EXPECT_THROW(singular_pair_rule(1, PairClass::Identical, 1.0, 4), ParameterError);
  EXPECT_THROW(singular_pair_rule(1, PairClass::Identical, 0.5, 13), ParameterError);
  EXPECT_THROW(singular_pair_rule(1, PairClass::EdgeTouch, 0.5, 4), ParameterError);
}

TEST(SingularPairRule, OneDimensionalRefinementIsMonotone) {
  const double exact = 0.19871093441625558;
  double previous = 1e300;
  for (int order = 2; order <= 12; order += 2) {
    const PairQuadRule rule = singular_pair_rule(1, PairClass::VertexTouch, 0.25, order);
    double q = 0.0;
    for (const PairNode& n : rule.nodes) {
      const double d = n.y[0] - n.x[0];
      q += n.weight * d * d * std::pow(n.x[0] + n.y[0], -1.5);
    }
    const double err = std::abs(q - exact);
    EXPECT_LE(err, previous + 1e-15) << order;
    previous = err;
  }
}

// Splitting the reference triangle into four congruent children expresses the
// self-interaction integral through child self, edge and vertex integrals.
TEST(SingularPairRule, TriangleSelfSimilarity) {
  const Tri T{{{0, 0}, {1, 0}, {0, 1}}};
  const Tri c0{{{0, 0}, {0.5, 0}, {0, 0.5}}};
  const Tri c1{{{0.5, 0}, {1, 0}, {0.5, 0.5}}};
  const Tri c2{{{0, 0.5}, {0.5, 0.5}, {0, 1}}};
  const Tri m{{{0.5, 0}, {0.5, 0.5}, {0, 0.5}}};
  const std::array<Tri, 4> kids{c0, c1, c2, m};
  for (double s : {0.1, 0.5, 0.9}) {
    const int order = 12;
    const double whole = pair_integral(T, T, s, order);
    double parts = 0.0;
    for (const Tri& a : kids)
      for (const Tri& b : kids) parts += pair_integral(a, b, s, order);
    EXPECT_NEAR(parts, whole, 1e-7 * whole) << s;
    // the scaling law for the identical term on its own
    EXPECT_NEAR(pair_integral(c0, c0, s, order), whole * std::pow(0.5, 4.0 - 2.0 * s), 1e-12 * whole);
  }
}

TEST(PairRuleCache, ReturnsStableReference) {
  PairRuleCache cache;
  const PairQuadRule& a = cache.get(2, PairClass::EdgeTouch, 0.3, 4);
  const PairQuadRule& b = cache.get(2, PairClass::EdgeTouch, 0.3, 4);
  EXPECT_EQ(&a, &b);
  EXPECT_EQ(a.transform, TransformKind::DuffyEdge);
}
