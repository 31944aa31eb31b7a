#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "nld/mesh.hpp"
#include "nld/quadrature.hpp"

namespace nld {

/// Piecewise-constant coefficient. `values` holds one entry per Interior
/// element; HorizonLayer elements use `exterior_value`.
struct DesignField {
  std::vector<double> values;
  double exterior_value = 1.0;
  double a_min = 1.0;
  double a_max = 1.0;

  /// a == value on Omega, exterior fixed at the midpoint of the bounds.
  static DesignField constant(const Mesh& mesh, double value, double a_min, double a_max);

  double on_element(std::size_t e) const { return e < values.size() ? values[e] : exterior_value; }
  /// Throws ParameterError if sizes or bounds are violated.
  void validate(const Mesh& mesh) const;
};

enum class FormTag : std::uint8_t { FractionalConductivity, LocalConductivity, FractionalPeridynamic, LocalElasticity };

struct FormKind {
  FormTag tag = FormTag::LocalConductivity;
  double s = 1.0;
  double R = 0.0;

  static FormKind fractional_conductivity(double s, double R);
  static FormKind local_conductivity();
  static FormKind fractional_peridynamic(double s, double R);
  static FormKind local_elasticity();

  bool fractional() const noexcept {
    return tag == FormTag::FractionalConductivity || tag == FormTag::FractionalPeridynamic;
  }
  bool vector_valued() const noexcept {
    return tag == FormTag::FractionalPeridynamic || tag == FormTag::LocalElasticity;
  }
  int components(int dimension) const noexcept { return vector_valued() ? dimension : 1; }
  void validate() const;
  std::string name() const;
};

/// P1 function on the interior DOFs, zero at all other vertices. Vector fields
/// interleave components: values[dof * components + c].
struct StateField {
  std::vector<double> values;
  int components = 1;

  static StateField zeros(const Mesh& mesh, int components);
  double vertex_value(const Mesh& mesh, std::size_t v, int c = 0) const;
  /// Value at barycentric coordinates `bary` inside element e.
  double evaluate(const Mesh& mesh, std::size_t e, const std::array<double, 3>& bary, int c = 0) const;
};

struct QuadConfig {
  int touch_order = 6;
  int near_order = 5;
  int far_order = 4;
  double far_factor = 3.0;  // pairs further apart than far_factor * h use far_order
  int threads = 0;          // 0: hardware concurrency
  bool cache_pairs = false; // keep per-pair local matrices in memory

  static QuadConfig defaults(int dimension);
  void validate() const;
};

double gamma_constant(double s, int n, int p = 2);

/// Symmetric matrix stored as CSR of its lower triangle (column <= row).
class SymSparseMatrix {
 public:
  SymSparseMatrix() = default;
  SymSparseMatrix(std::size_t n, std::vector<std::uint64_t> row_ptr, std::vector<std::uint64_t> col_idx,
                  std::vector<double> values);

  /// Lower triangle of a dense row-major n x n buffer (upper part ignored).
  static SymSparseMatrix from_dense_lower(std::size_t n, const std::vector<double>& dense);
  /// Sums duplicates; entries above the diagonal are mirrored into the lower triangle.
  static SymSparseMatrix from_triplets(std::size_t n, const std::vector<Eigen::Triplet<double>>& triplets);

  std::size_t size() const noexcept { return n_; }
  std::size_t nnz() const noexcept { return values_.size(); }
  const std::vector<std::uint64_t>& row_ptr() const noexcept { return row_ptr_; }
  const std::vector<std::uint64_t>& col_idx() const noexcept { return col_idx_; }
  const std::vector<double>& values() const noexcept { return values_; }

  double entry(std::size_t i, std::size_t j) const;
  std::vector<double> diagonal() const;
  void multiply(std::span<const double> x, std::span<double> y) const;
  std::vector<double> multiply(std::span<const double> x) const;
  double quadratic_form(std::span<const double> x) const;
  Eigen::MatrixXd to_dense() const;
  Eigen::SparseMatrix<double> to_eigen() const;  // full symmetric pattern

  SymSparseMatrix scaled(double factor) const;

 private:
  std::size_t n_ = 0;
  std::vector<std::uint64_t> row_ptr_{0};
  std::vector<std::uint64_t> col_idx_;
  std::vector<double> values_;
};

/// Assembles one of the four forms on a fixed mesh. For fractional kinds the
/// element-pair structure (classification, quadrature choice) is fixed at
/// construction, so repeated assembly with changing designs and repeated
/// gradient sweeps reuse it. Results are independent of the thread count.
class FormOperator {
 public:
  FormOperator(const Mesh& mesh, FormKind kind, QuadConfig config);
  ~FormOperator();
  FormOperator(const FormOperator&) = delete;
  FormOperator& operator=(const FormOperator&) = delete;

  const Mesh& mesh() const noexcept { return mesh_; }
  const FormKind& kind() const noexcept { return kind_; }
  const QuadConfig& config() const noexcept { return config_; }
  int components() const noexcept { return components_; }
  std::size_t num_unknowns() const noexcept { return mesh_.num_dofs() * components_; }
  /// Number of element pairs visited per sweep (elements for local kinds).
  std::size_t num_pairs() const noexcept;

  SymSparseMatrix stiffness(const DesignField& design) const;

  /// B[chi_T](u, u) for every element T (Interior and HorizonLayer).
  std::vector<double> element_energies(const StateField& u) const;

  /// B[1](u, u).
  double unit_energy(const StateField& u) const;

 private:
  struct PairData;
  void check_state(const StateField& u) const;

  const Mesh& mesh_;
  FormKind kind_;
  QuadConfig config_;
  int components_;
  std::unique_ptr<PairData> pairs_;
};

SymSparseMatrix assemble_stiffness(const Mesh& mesh, const DesignField& design, FormKind kind,
                                   const QuadConfig& config);

/// Source term: f = c everywhere, or f = c on the open ball B_r(center) and 0 elsewhere.
struct Source {
  enum class Kind : std::uint8_t { Constant, Ball };
  Kind kind = Kind::Constant;
  double value = 1.0;
  double radius = 0.0;
  Point center{0.0, 0.0};

  /// "const:c" or "ball:c:r:x0:y0" (y0 ignored in 1D but required).
  static Source parse(const std::string& text);
  std::string to_string() const;
  double operator()(const Point& x) const;
};

/// Entry i = int_Omega f phi_i; vector kinds apply f to every component.
std::vector<double> assemble_load(const Mesh& mesh, const Source& f, int components = 1);

/// B[chi_T](u, u) for Interior elements only (see FormOperator::element_energies).
std::vector<double> element_gradient_values(const Mesh& mesh, const StateField& u, FormKind kind,
                                            const QuadConfig& config);

/// sqrt(B[1](u, u)).
double seminorm(const Mesh& mesh, const StateField& u, FormKind kind, const QuadConfig& config);
double seminorm(const Mesh& mesh, const StateField& u, FormKind kind);

/// ||u||_{L^2(Omega)}, exact for P1 (all components).
double l2_norm(const Mesh& mesh, const StateField& u);

/// Binary cache: "NLDMAT01", n, nnz, s, R, SHA-256 mesh hash, CSR arrays.
void save_matrix_cache(const std::string& path, const SymSparseMatrix& K, double s, double R, const Mesh& mesh);
/// Throws ConfigurationError on a hash, s or R mismatch.
SymSparseMatrix load_matrix_cache(const std::string& path, const Mesh& mesh, double s, double R);

}  // namespace nld
