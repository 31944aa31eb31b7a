#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <vector>

#include "nld/forms.hpp"

namespace nld {

/// Reference stiffness of the 1D fractional conductivity form over the
/// interior DOFs, computed cell by cell with nested adaptive Gauss-Kronrod
/// quadrature. `mesh` must carry a horizon layer of width R. Throws
/// OracleError when the adaptive budget runs out.
Eigen::MatrixXd dense_fractional_assembly_1d(const Mesh& mesh, const DesignField& design, double s, double R,
                                             double tol = 1e-9);

struct BbmRung {
  double s = 0.0;
  double energy = 0.0;  // B_s[1](v, v)
  double gap = 0.0;     // |energy - local| / local (0 when local == 0)
};

struct BbmProbe {
  std::vector<BbmRung> rungs;
  double local_energy = 0.0;  // ||grad v||^2
  bool last_rung_is_minimum = true;
};

/// Fractional energies of a fixed P1 function along an s ladder. `mesh` covers
/// Omega only; the layer of width R is added internally.
BbmProbe bbm_limit_probe(const Mesh& mesh, const StateField& v, std::span<const double> s_ladder, double R,
                         const QuadConfig& config);

struct KornRung {
  double s = 0.0;
  double min_eigen_ratio = 0.0;   // smallest generalized eigenvalue of (K_PD, K_scalar x I)
  double min_random_ratio = 0.0;  // smallest Rayleigh-quotient ratio over random vectors
};

/// Ratio of the peridynamic energy to the componentwise fractional energy on a
/// small 2D mesh (Omega only; layer of width R added internally).
std::vector<KornRung> korn_probe(const Mesh& mesh, std::span<const double> s_ladder, double R, int samples,
                                 std::uint64_t seed, const QuadConfig& config);

/// Central difference (r(a + h b) - r(a - h b)) / 2h of the reduced cost.
double central_difference_derivative(const Mesh& mesh, const DesignField& design, std::span<const double> direction,
                                     FormKind kind, const Source& f, double lambda, double q,
                                     const QuadConfig& config, double step = 1e-5, double tol = 1e-12);

}  // namespace nld
