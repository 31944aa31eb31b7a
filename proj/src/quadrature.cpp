#include "nld/quadrature.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

#include "nld/errors.hpp"

namespace nld {

namespace {

int points_for_order(int order) { return (order + 2) / 2; }

// Touching-pair integrands of P1 functions are low-degree polynomials in the
// radial variable once the singular power is split off; the angular factors
// |M w|^(-n-2s) are analytic but with nearby complex poles, so they get more points.
int radial_points(int order) { return (order + 2) / 4 + 1; }
int angular_points(int order) { return order + 2; }

/// Golub-Welsch for the monic Jacobi recurrence with weight (1-t)^alpha (1+t)^beta on [-1, 1].
LineRule golub_welsch_jacobi(int n, double alpha, double beta) {
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  const double ab = alpha + beta;
  for (int k = 0; k < n; ++k) {
    const double two_k = 2.0 * k + ab;
    J(k, k) = k == 0 ? (beta - alpha) / (ab + 2.0) : (beta * beta - alpha * alpha) / (two_k * (two_k + 2.0));
    if (k + 1 < n) {
      const double m = k + 1.0;
      const double t = 2.0 * m + ab;
      const double b2 = 4.0 * m * (m + alpha) * (m + beta) * (m + ab) / (t * t * (t + 1.0) * (t - 1.0));
      J(k, k + 1) = J(k + 1, k) = std::sqrt(b2);
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(J);
  const double mu0 = std::exp((ab + 1.0) * std::log(2.0) + std::lgamma(alpha + 1.0) + std::lgamma(beta + 1.0) -
                              std::lgamma(ab + 2.0));
  LineRule rule;
  for (int k = 0; k < n; ++k) {
    const double v0 = eig.eigenvectors()(0, k);
    rule.nodes.push_back(eig.eigenvalues()(k));
    rule.weights.push_back(mu0 * v0 * v0);
  }
  return rule;
}

QuadRule conical_triangle_rule(int order) {
  // Stroud conical product: int_T f = int_0^1 int_0^1 f(u, (1-u) v) (1-u) du dv.
  const int k = points_for_order(order);
  const LineRule gj = gauss_jacobi(k, 1.0);  // weight x in the variable x = 1 - u
  const LineRule gl = gauss_legendre(k);
  QuadRule rule;
  rule.dimension = 2;
  rule.order = order;
  for (int i = 0; i < k; ++i) {
    const double u = 1.0 - gj.nodes[i];
    for (int j = 0; j < k; ++j) {
      const double v = (1.0 - u) * gl.nodes[j];
      rule.points.push_back({1.0 - u - v, u, v});
      rule.weights.push_back(gj.weights[i] * gl.weights[j]);
    }
  }
  return rule;
}

void add_orbit3(QuadRule& rule, double a, double weight) {
  const double b = 1.0 - 2.0 * a;
  rule.points.push_back({a, a, b});
  rule.points.push_back({a, b, a});
  rule.points.push_back({b, a, a});
  for (int i = 0; i < 3; ++i) rule.weights.push_back(0.5 * weight);
}

}  // namespace

LineRule gauss_legendre(int points) {
  if (points < 1) throw ParameterError("Gauss-Legendre needs at least one point");
  LineRule r = golub_welsch_jacobi(points, 0.0, 0.0);
  for (int i = 0; i < points; ++i) {
    r.nodes[i] = 0.5 * (r.nodes[i] + 1.0);
    r.weights[i] *= 0.5;
  }
  return r;
}

LineRule gauss_jacobi(int points, double beta) {
  if (points < 1) throw ParameterError("Gauss-Jacobi needs at least one point");
  if (!(beta > -1.0)) throw ParameterError("Gauss-Jacobi exponent must exceed -1");
  LineRule r = golub_welsch_jacobi(points, 0.0, beta);
  const double scale = std::pow(2.0, -beta - 1.0);
  for (int i = 0; i < points; ++i) {
    r.nodes[i] = 0.5 * (r.nodes[i] + 1.0);
    r.weights[i] *= scale;
  }
  return r;
}

QuadRule gauss_simplex(int dimension, int order) {
  if (dimension != 1 && dimension != 2) throw ParameterError("simplex rules exist for dimension 1 and 2");
  if (order < 1 || order > 20) throw ParameterError("simplex rule order must lie in [1, 20]");
  if (dimension == 1) {
    const LineRule gl = gauss_legendre(points_for_order(order));
    QuadRule rule;
    rule.dimension = 1;
    rule.order = order;
    for (std::size_t i = 0; i < gl.nodes.size(); ++i) {
      rule.points.push_back({1.0 - gl.nodes[i], gl.nodes[i], 0.0});
      rule.weights.push_back(gl.weights[i]);
    }
    return rule;
  }
  QuadRule rule;
  rule.dimension = 2;
  rule.order = order;
  switch (order) {
    case 1:
      rule.points.push_back({1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0});
      rule.weights.push_back(0.5);
      return rule;
    case 2:
      add_orbit3(rule, 1.0 / 6.0, 1.0 / 3.0);
      return rule;
    case 4:
      // Dunavant, 6 points
      add_orbit3(rule, 0.445948490915965, 0.223381589678011);
      add_orbit3(rule, 0.091576213509771, 0.109951743655322);
      return rule;
    case 5:
      // Radon, 7 points
      rule.points.push_back({1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0});
      rule.weights.push_back(0.5 * 0.225);
      add_orbit3(rule, (6.0 - std::sqrt(15.0)) / 21.0, (155.0 - std::sqrt(15.0)) / 1200.0);
      add_orbit3(rule, (6.0 + std::sqrt(15.0)) / 21.0, (155.0 + std::sqrt(15.0)) / 1200.0);
      return rule;
    default:
      return conical_triangle_rule(order);
  }
}

namespace {

void check_pair_args(int dimension, double s, int order) {
  if (dimension != 1 && dimension != 2) throw ParameterError("pair rules exist for dimension 1 and 2");
  if (!(s > 0.0 && s < 1.0)) throw ParameterError("fractional order s must lie in (0, 1)");
  if (order < 1 || order > 12) throw ParameterError("pair rule order must lie in [1, 12]");
}

// Radial Gauss-Jacobi nodes on [0, L] for an integrand rho^J F with F ~ rho^(beta - J):
// returns (rho, plain weight) so that sum w * F(rho) ~ int_0^L rho^J F(rho) drho.
template <class Emit>
void radial(const LineRule& gj, double beta, int J, double L, Emit&& emit) {
  const double scale = std::pow(L, beta + 1.0);
  for (std::size_t k = 0; k < gj.nodes.size(); ++k) {
    const double rho = L * gj.nodes[k];
    emit(rho, gj.weights[k] * scale * std::pow(rho, J - beta));
  }
}

void identical_1d(PairQuadRule& rule, int order) {
  const double beta = 1.0 - 2.0 * rule.s;
  const LineRule gj = gauss_jacobi(radial_points(order), beta);
  const LineRule gl = gauss_legendre(points_for_order(order));
  for (double sign : {1.0, -1.0})
    radial(gj, beta, 0, 1.0, [&](double rho, double wr) {
      const double z = sign * rho;
      const double lo = std::max(0.0, -z);
      const double len = 1.0 - rho;
      for (std::size_t j = 0; j < gl.nodes.size(); ++j) {
        const double x = lo + len * gl.nodes[j];
        rule.nodes.push_back({{x, 0.0}, {x + z, 0.0}, wr * len * gl.weights[j]});
      }
    });
}

void vertex_1d(PairQuadRule& rule, int order) {
  const double beta = 2.0 - 2.0 * rule.s;
  const LineRule gj = gauss_jacobi(radial_points(order), beta);
  const LineRule gl = gauss_legendre(angular_points(order));
  for (int piece = 0; piece < 2; ++piece) {
    const double lo = 0.5 * piece;
    for (std::size_t j = 0; j < gl.nodes.size(); ++j) {
      const double sigma = lo + 0.5 * gl.nodes[j];
      const double m = std::max(sigma, 1.0 - sigma);
      radial(gj, beta, 1, 1.0 / m, [&](double rho, double wr) {
        rule.nodes.push_back({{rho * (1.0 - sigma), 0.0}, {rho * sigma, 0.0}, wr * 0.5 * gl.weights[j]});
      });
    }
  }
}

void identical_2d(PairQuadRule& rule, int order) {
  const double beta = 1.0 - 2.0 * rule.s;
  const LineRule gj = gauss_jacobi(radial_points(order), beta);
  const LineRule gl = gauss_legendre(angular_points(order));
  const QuadRule inner = gauss_simplex(2, order);
  struct Piece {
    Point ea, eb;
    double t0, t1;
  };
  // Boundary of the l1 unit ball, split where z1 + z2 changes sign so the
  // scale of the admissible x-region is linear on each piece.
  const Piece pieces[] = {
      {{1, 0}, {0, 1}, 0.0, 1.0},   {{0, 1}, {-1, 0}, 0.0, 0.5}, {{0, 1}, {-1, 0}, 0.5, 1.0},
      {{-1, 0}, {0, -1}, 0.0, 1.0}, {{0, -1}, {1, 0}, 0.0, 0.5}, {{0, -1}, {1, 0}, 0.5, 1.0},
  };
  for (const Piece& p : pieces) {
    for (std::size_t j = 0; j < gl.nodes.size(); ++j) {
      const double t = p.t0 + (p.t1 - p.t0) * gl.nodes[j];
      const double wt = (p.t1 - p.t0) * gl.weights[j];
      const Point omega{(1.0 - t) * p.ea[0] + t * p.eb[0], (1.0 - t) * p.ea[1] + t * p.eb[1]};
      const double c = 0.5 * (std::abs(omega[0] + omega[1]) + std::abs(omega[0]) + std::abs(omega[1]));
      radial(gj, beta, 1, 1.0 / c, [&](double rho, double wr) {
        const Point z{rho * omega[0], rho * omega[1]};
        // x ranges over a homothetic copy of the reference triangle.
        const std::array<double, 3> m{std::max(0.0, z[0] + z[1]), std::max(0.0, -z[0]), std::max(0.0, -z[1])};
        const double scale = 1.0 - rho * c;
        for (std::size_t q = 0; q < inner.size(); ++q) {
          const Point x{m[1] + scale * inner.points[q][1], m[2] + scale * inner.points[q][2]};
          rule.nodes.push_back({x, {x[0] + z[0], x[1] + z[1]}, wt * wr * scale * scale * inner.weights[q]});
        }
      });
    }
  }
}

void edge_2d(PairQuadRule& rule, int order) {
  const double beta = 2.0 - 2.0 * rule.s;
  const LineRule gj = gauss_jacobi(radial_points(order), beta);
  const LineRule gl = gauss_legendre(points_for_order(order));
  const QuadRule tri = gauss_simplex(2, std::min(20, order + 4));
  using W = std::array<double, 3>;  // (|z|, b, b') direction on the l1 sphere patch
  struct Sub {
    double sign;
    W v0, v1, v2;
  };
  const Sub subs[] = {
      {1.0, {0, 1, 0}, {0.5, 0.5, 0}, {0, 0.5, 0.5}},
      {1.0, {1, 0, 0}, {0, 0, 1}, {0, 0.5, 0.5}},
      {1.0, {1, 0, 0}, {0, 0.5, 0.5}, {0.5, 0.5, 0}},
      {-1.0, {0, 0, 1}, {0.5, 0, 0.5}, {0, 0.5, 0.5}},
      {-1.0, {1, 0, 0}, {0, 1, 0}, {0, 0.5, 0.5}},
      {-1.0, {1, 0, 0}, {0, 0.5, 0.5}, {0.5, 0, 0.5}},
  };
  for (const Sub& sub : subs) {
    // measure in the (w2, w3) chart
    const double area = std::abs((sub.v1[1] - sub.v0[1]) * (sub.v2[2] - sub.v0[2]) -
                                 (sub.v2[1] - sub.v0[1]) * (sub.v1[2] - sub.v0[2]));
    for (std::size_t q = 0; q < tri.size(); ++q) {
      const double m1 = tri.points[q][1];
      const double m2 = tri.points[q][2];
      W w;
      for (int i = 0; i < 3; ++i) w[i] = sub.v0[i] + m1 * (sub.v1[i] - sub.v0[i]) + m2 * (sub.v2[i] - sub.v0[i]);
      const double oz = sub.sign * w[0];
      const double ell = std::max(w[1], w[2] + oz) + std::max(0.0, -oz);
      radial(gj, beta, 2, 1.0 / ell, [&](double rho, double wr) {
        const double z = rho * oz;
        const double b = rho * w[1];
        const double bp = rho * w[2];
        const double lo = std::max(0.0, -z);
        const double len = 1.0 - rho * ell;
        for (std::size_t j = 0; j < gl.nodes.size(); ++j) {
          const double a = lo + len * gl.nodes[j];
          rule.nodes.push_back({{a, b}, {a + z, bp}, area * tri.weights[q] * wr * len * gl.weights[j]});
        }
      });
    }
  }
}

void vertex_2d(PairQuadRule& rule, int order) {
  const double beta = 3.0 - 2.0 * rule.s;
  const LineRule gj = gauss_jacobi(radial_points(order), beta);
  const LineRule gl = gauss_legendre(points_for_order(order));
  for (int region = 0; region < 2; ++region)
    for (std::size_t i = 0; i < gj.nodes.size(); ++i) {
      const double xi = gj.nodes[i];
      const double wxi = gj.weights[i] * std::pow(xi, 3.0 - beta);
      for (std::size_t a = 0; a < gl.nodes.size(); ++a) {
        const double eta = gl.nodes[a];
        for (std::size_t b = 0; b < gl.nodes.size(); ++b)
          for (std::size_t c = 0; c < gl.nodes.size(); ++c) {
            const double t1 = gl.nodes[b];
            const double t2 = gl.nodes[c];
            const Point outer{xi * (1.0 - t1), xi * t1};
            const Point inner{xi * eta * (1.0 - t2), xi * eta * t2};
            const double w = wxi * eta * gl.weights[a] * gl.weights[b] * gl.weights[c];
            if (region == 0)
              rule.nodes.push_back({outer, inner, w});
            else
              rule.nodes.push_back({inner, outer, w});
          }
      }
    }
}

}  // namespace

PairQuadRule singular_pair_rule(int dimension, PairClass pair_class, double s, int order) {
  check_pair_args(dimension, s, order);
  PairQuadRule rule;
  rule.dimension = dimension;
  rule.pair_class = pair_class;
  rule.order = order;
  rule.s = s;
  switch (pair_class) {
    case PairClass::Disjoint: {
      rule.transform = TransformKind::None;
      const QuadRule r = gauss_simplex(dimension, order);
      for (std::size_t p = 0; p < r.size(); ++p)
        for (std::size_t q = 0; q < r.size(); ++q)
          rule.nodes.push_back({r.reference_point(p), r.reference_point(q), r.weights[p] * r.weights[q]});
      break;
    }
    case PairClass::Identical:
      rule.transform = TransformKind::DuffyIdentical;
      if (dimension == 1)
        identical_1d(rule, order);
      else
        identical_2d(rule, order);
      break;
    case PairClass::EdgeTouch:
      if (dimension == 1) throw ParameterError("edge-touching pairs do not exist in 1D");
      rule.transform = TransformKind::DuffyEdge;
      edge_2d(rule, order);
      break;
    case PairClass::VertexTouch:
      rule.transform = TransformKind::DuffyVertex;
      if (dimension == 1)
        vertex_1d(rule, order);
      else
        vertex_2d(rule, order);
      break;
  }
  return rule;
}

const PairQuadRule& PairRuleCache::get(int dimension, PairClass pair_class, double s, int order) {
  std::lock_guard lock(mutex_);
  auto key = std::make_tuple(dimension, static_cast<int>(pair_class), s, order);
  auto it = rules_.find(key);
  if (it == rules_.end())
    it = rules_.emplace(key, std::make_unique<PairQuadRule>(singular_pair_rule(dimension, pair_class, s, order))).first;
  return *it->second;
}

}  // namespace nld
