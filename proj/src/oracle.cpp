#include "nld/oracle.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <random>

#include "nld/errors.hpp"
#include "nld/optimizer.hpp"

namespace nld {

namespace {

constexpr int kComponents = 10;  // packed products of up to four basis differences
using Vec = std::array<double, kComponents>;

// Gauss-Kronrod 7/15 on [-1, 1]
constexpr double kXgk[8] = {0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
                            0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
                            0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
                            0.207784955007898467600689403773245, 0.0};
constexpr double kWgk[8] = {0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
                            0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
                            0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
                            0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr double kWg[4] = {0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
                           0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Piece {
  double a, b;
  Vec value, error;
};

template <class F>
Piece gk15(F& f, double a, double b) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  Piece p{a, b, {}, {}};
  Vec gauss{};
  auto add = [&](const Vec& v, double wk, double wg) {
    for (int k = 0; k < kComponents; ++k) {
      p.value[k] += wk * v[k];
      gauss[k] += wg * v[k];
    }
  };
  add(f(c), kWgk[7], kWg[3]);
  for (int j = 0; j < 7; ++j) {
    const double wg = j % 2 == 1 ? kWg[j / 2] : 0.0;
    add(f(c - h * kXgk[j]), kWgk[j], wg);
    add(f(c + h * kXgk[j]), kWgk[j], wg);
  }
  for (int k = 0; k < kComponents; ++k) {
    p.value[k] *= h;
    p.error[k] = std::abs(p.value[k] - h * gauss[k]);
  }
  return p;
}

/// Bisects the worst piece until every component meets rel * max(|I_k|, 1e-4 max_j |I_j|).
template <class F>
Vec adaptive(F&& f, double a, double b, double rel, int budget) {
  std::vector<Piece> pieces{gk15(f, a, b)};
  while (true) {
    Vec total{}, err{};
    for (const Piece& p : pieces)
      for (int k = 0; k < kComponents; ++k) {
        total[k] += p.value[k];
        err[k] += p.error[k];
      }
    double biggest = 0.0;
    for (double v : total) biggest = std::max(biggest, std::abs(v));
    Vec allowed{};
    bool done = true;
    for (int k = 0; k < kComponents; ++k) {
      allowed[k] = rel * std::max(std::abs(total[k]), 1e-4 * biggest);
      done &= err[k] <= allowed[k] || biggest == 0.0;
    }
    if (done) return total;
    if (static_cast<int>(pieces.size()) >= budget) throw OracleError("adaptive quadrature budget exhausted");
    std::size_t worst = 0;
    double worst_score = -1.0;
    for (std::size_t i = 0; i < pieces.size(); ++i) {
      double score = 0.0;
      for (int k = 0; k < kComponents; ++k)
        if (allowed[k] > 0.0) score = std::max(score, pieces[i].error[k] / allowed[k]);
      if (score > worst_score) {
        worst_score = score;
        worst = i;
      }
    }
    const Piece p = pieces[worst];
    const double mid = 0.5 * (p.a + p.b);
    pieces[worst] = gk15(f, p.a, mid);
    pieces.push_back(gk15(f, mid, p.b));
  }
}

Vec packed_products(const std::array<double, 4>& d, int m, double kernel) {
  Vec v{};
  int idx = 0;
  for (int r = 0; r < m; ++r)
    for (int c = 0; c <= r; ++c) v[idx++] = d[r] * d[c] * kernel;
  return v;
}

}  // namespace

Eigen::MatrixXd dense_fractional_assembly_1d(const Mesh& mesh, const DesignField& design, double s, double R,
                                             double tol) {
  if (mesh.dimension() != 1) throw ParameterError("the dense oracle is one-dimensional");
  if (mesh.num_interior_elements() > 64) throw ParameterError("the dense oracle is limited to 64 elements");
  if (!(s > 0.0 && s < 1.0)) throw ParameterError("s must lie in (0, 1)");
  if (!mesh.has_horizon_layer() || std::abs(mesh.horizon_width() - R) > 1e-9 * std::max(1.0, R))
    throw ConfigurationError("the oracle needs a horizon layer of width R");
  design.validate(mesh);

  const double gamma = gamma_constant(s, 1, 2);
  const double p = -1.0 - 2.0 * s;
  const std::size_t n = mesh.num_dofs();
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  const int budget = 4000;
  const double inner_tol = 1e-3 * tol;

  auto endpoints = [&](std::size_t e) {
    const auto el = mesh.element(e);
    int lo = el[0], hi = el[1];
    if (mesh.vertex(lo)[0] > mesh.vertex(hi)[0]) std::swap(lo, hi);
    return std::array<int, 2>{lo, hi};
  };

  for (std::size_t e1 = 0; e1 < mesh.num_elements(); ++e1)
    for (std::size_t e2 = 0; e2 < mesh.num_elements(); ++e2) {
      if (mesh.region(e1) == Region::HorizonLayer && mesh.region(e2) == Region::HorizonLayer) continue;
      const auto v1 = endpoints(e1);
      const auto v2 = endpoints(e2);
      const double a1 = mesh.vertex(v1[0])[0], b1 = mesh.vertex(v1[1])[0];
      const double a2 = mesh.vertex(v2[0])[0], b2 = mesh.vertex(v2[1])[0];
      const double h1 = b1 - a1, h2 = b2 - a2;
      std::array<int, 4> verts{};
      int m = 0;
      Vec M{};
      if (e1 == e2) {
        // x = a1 + xi, y = x + t; phi differences are exact multiples of t
        verts = {v1[0], v1[1], -1, -1};
        m = 2;
        auto outer = [&](double xi) {
          auto inner = [&](double t) {
            return packed_products({t / h1, -t / h1, 0.0, 0.0}, 2, std::pow(std::abs(t), p));
          };
          const Vec left = adaptive(inner, -xi, 0.0, inner_tol, budget);
          const Vec right = adaptive(inner, 0.0, h1 - xi, inner_tol, budget);
          Vec out{};
          for (int k = 0; k < kComponents; ++k) out[k] = left[k] + right[k];
          return out;
        };
        M = adaptive(outer, 0.0, h1, tol, budget);
      } else if (v1[1] == v2[0] || v1[0] == v2[1]) {
        // touching at p: xi, eta are the distances of x and y from p
        const bool first_left = v1[1] == v2[0];
        const int shared = first_left ? v1[1] : v1[0];
        const int far1 = first_left ? v1[0] : v1[1];
        const int far2 = first_left ? v2[1] : v2[0];
        verts = {shared, far1, far2, -1};
        m = 3;
        auto outer = [&](double xi) {
          auto inner = [&](double eta) {
            return packed_products({eta / h2 - xi / h1, xi / h1, -eta / h2, 0.0}, 3, std::pow(xi + eta, p));
          };
          return adaptive(inner, 0.0, h2, inner_tol, budget);
        };
        M = adaptive(outer, 0.0, h1, tol, budget);
      } else {
        verts = {v1[0], v1[1], v2[0], v2[1]};
        m = 4;
        auto outer = [&](double x) {
          auto inner = [&](double y) {
            return packed_products({(b1 - x) / h1, (x - a1) / h1, -(b2 - y) / h2, -(y - a2) / h2}, 4,
                                   std::pow(std::abs(x - y), p));
          };
          return adaptive(inner, a2, b2, inner_tol, budget);
        };
        M = adaptive(outer, a1, b1, tol, budget);
      }
      const double A = 0.5 * (design.on_element(e1) + design.on_element(e2));
      int idx = 0;
      for (int r = 0; r < m; ++r)
        for (int c = 0; c <= r; ++c, ++idx) {
          const int dr = mesh.dof(static_cast<std::size_t>(verts[r]));
          const int dc = mesh.dof(static_cast<std::size_t>(verts[c]));
          if (dr < 0 || dc < 0) continue;
          const double v = gamma * A * M[idx];
          K(dr, dc) += v;
          if (r != c) K(dc, dr) += v;
        }
    }
  return K;
}

BbmProbe bbm_limit_probe(const Mesh& mesh, const StateField& v, std::span<const double> s_ladder, double R,
                         const QuadConfig& config) {
  BbmProbe out;
  const FormOperator local(mesh, FormKind::local_conductivity(), config);
  out.local_energy = local.unit_energy(v);
  const Mesh layered = extend_with_horizon(mesh, R);
  for (double s : s_ladder) {
    const FormOperator op(layered, FormKind::fractional_conductivity(s, R), config);
    BbmRung rung;
    rung.s = s;
    rung.energy = op.unit_energy(v);
    rung.gap = out.local_energy > 0.0 ? std::abs(rung.energy - out.local_energy) / out.local_energy : 0.0;
    out.rungs.push_back(rung);
  }
  for (const BbmRung& r : out.rungs)
    if (r.gap < out.rungs.back().gap) out.last_rung_is_minimum = false;
  return out;
}

std::vector<KornRung> korn_probe(const Mesh& mesh, std::span<const double> s_ladder, double R, int samples,
                                 std::uint64_t seed, const QuadConfig& config) {
  if (mesh.dimension() != 2) throw ParameterError("the Korn probe needs a 2D mesh");
  const Mesh layered = extend_with_horizon(mesh, R);
  const DesignField one = DesignField::constant(layered, 1.0, 1.0, 1.0);
  const std::size_t n = layered.num_dofs();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::vector<KornRung> out;
  for (double s : s_ladder) {
    const Eigen::MatrixXd Kpd =
        FormOperator(layered, FormKind::fractional_peridynamic(s, R), config).stiffness(one).to_dense();
    const Eigen::MatrixXd Ks =
        FormOperator(layered, FormKind::fractional_conductivity(s, R), config).stiffness(one).to_dense();
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(2 * static_cast<Eigen::Index>(n), 2 * static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(n); ++i)
      for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(n); ++j)
        for (int c = 0; c < 2; ++c) B(2 * i + c, 2 * j + c) = Ks(i, j);
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> eig(Kpd, B, Eigen::EigenvaluesOnly);
    KornRung rung;
    rung.s = s;
    rung.min_eigen_ratio = eig.eigenvalues().minCoeff();
    rung.min_random_ratio = 1e300;
    for (int k = 0; k < samples; ++k) {
      Eigen::VectorXd x(2 * static_cast<Eigen::Index>(n));
      for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = normal(rng);
      rung.min_random_ratio = std::min(rung.min_random_ratio, x.dot(Kpd * x) / x.dot(B * x));
    }
    out.push_back(rung);
  }
  return out;
}

double central_difference_derivative(const Mesh& mesh, const DesignField& design, std::span<const double> direction,
                                     FormKind kind, const Source& f, double lambda, double q,
                                     const QuadConfig& config, double step, double tol) {
  DesignField plus = design;
  DesignField minus = design;
  for (std::size_t e = 0; e < direction.size(); ++e) {
    plus.values[e] += step * direction[e];
    minus.values[e] -= step * direction[e];
  }
  const double rp = reduced_cost(mesh, plus, kind, f, lambda, q, config, tol);
  const double rm = reduced_cost(mesh, minus, kind, f, lambda, q, config, tol);
  return (rp - rm) / (2.0 * step);
}

}  // namespace nld
