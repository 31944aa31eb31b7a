#pragma once

#include <array>
#include <map>
#include <memory>
#include <mutex>
#include <tuple>
#include <vector>

#include "nld/mesh.hpp"

namespace nld {

/// 1D rule on [0, 1].
struct LineRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// k-point Gauss-Legendre rule on [0, 1].
LineRule gauss_legendre(int points);

/// k-point Gauss-Jacobi rule on [0, 1] for the weight x^beta, beta > -1:
/// sum_i w_i g(x_i) ~ int_0^1 x^beta g(x) dx, exact for polynomial g of degree 2k-1.
LineRule gauss_jacobi(int points, double beta);

/// Rule on the reference simplex (interval [0,1] or triangle (0,0),(1,0),(0,1)).
struct QuadRule {
  int dimension = 1;
  int order = 0;  // exact for total degree <= order
  std::vector<std::array<double, 3>> points;  // barycentric coordinates
  std::vector<double> weights;                 // positive, sum to the reference measure

  std::size_t size() const noexcept { return weights.size(); }
  /// Reference Cartesian coordinates of point i (barycentric entries 1 and 2).
  Point reference_point(std::size_t i) const { return {points[i][1], points[i][2]}; }
};

QuadRule gauss_simplex(int dimension, int order);

enum class TransformKind : std::uint8_t { None, DuffyVertex, DuffyEdge, DuffyIdentical };

struct PairNode {
  Point x;  // reference coordinates in the first element
  Point y;  // reference coordinates in the second element
  double weight;
};

/// Rule on the product of two reference simplices.
///
/// Conventions for touching pairs: shared vertices occupy the leading local
/// slots of both elements in the same order (vertex touch: slot 0; edge touch:
/// slots 0 and 1). For an integrand F(x, y) that behaves like
/// |x - y|^(2 - n - 2s) times a bounded piecewise-analytic factor near the
/// shared set, sum_i w_i F(x_i, y_i) approximates the integral over the product
/// of reference simplices. The radial variable is integrated with Gauss-Jacobi
/// weights, so the singular power is captured exactly.
struct PairQuadRule {
  int dimension = 1;
  PairClass pair_class = PairClass::Disjoint;
  TransformKind transform = TransformKind::None;
  int order = 0;
  double s = 0.0;
  std::vector<PairNode> nodes;
};

/// Regularized rule for a touching (or identical) element pair, or a tensor
/// Gauss rule for Disjoint. s must lie in (0, 1); order in [1, 12].
PairQuadRule singular_pair_rule(int dimension, PairClass pair_class, double s, int order);

/// Thread-safe memo of pair rules keyed by (dimension, class, s, order).
class PairRuleCache {
 public:
  const PairQuadRule& get(int dimension, PairClass pair_class, double s, int order);

 private:
  std::mutex mutex_;
  std::map<std::tuple<int, int, double, int>, std::unique_ptr<PairQuadRule>> rules_;
};

}  // namespace nld
