#include "nld/forms.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <exception>
#include <fstream>
#include <mutex>
#include <numbers>
#include <sstream>
#include <thread>

#include "nld/errors.hpp"
#include "nld/parallel.hpp"

namespace nld {

// ---------------------------------------------------------------- fields

DesignField DesignField::constant(const Mesh& mesh, double value, double a_min, double a_max) {
  DesignField d;
  d.values.assign(mesh.num_interior_elements(), value);
  d.a_min = a_min;
  d.a_max = a_max;
  d.exterior_value = 0.5 * (a_min + a_max);
  d.validate(mesh);
  return d;
}

void DesignField::validate(const Mesh& mesh) const {
  if (!(a_min > 0.0 && a_min <= a_max)) throw ParameterError("design bounds need 0 < a_min <= a_max");
  if (values.size() != mesh.num_interior_elements())
    throw ParameterError("design has " + std::to_string(values.size()) + " values, mesh has " +
                         std::to_string(mesh.num_interior_elements()) + " interior elements");
  if (!(exterior_value >= a_min && exterior_value <= a_max))
    throw ParameterError("exterior design value outside the bounds");
  for (double v : values)
    if (!(v >= a_min && v <= a_max)) throw ParameterError("design value outside the bounds");
}

FormKind FormKind::fractional_conductivity(double s, double R) {
  FormKind k{FormTag::FractionalConductivity, s, R};
  k.validate();
  return k;
}
FormKind FormKind::local_conductivity() { return {FormTag::LocalConductivity, 1.0, 0.0}; }
FormKind FormKind::fractional_peridynamic(double s, double R) {
  FormKind k{FormTag::FractionalPeridynamic, s, R};
  k.validate();
  return k;
}
FormKind FormKind::local_elasticity() { return {FormTag::LocalElasticity, 1.0, 0.0}; }

void FormKind::validate() const {
  if (fractional()) {
    if (!(s > 0.0 && s < 1.0)) throw ParameterError("fractional order s must lie in (0, 1)");
    if (!(R > 0.0)) throw ParameterError("horizon R must be positive for fractional forms");
  }
}

std::string FormKind::name() const {
  switch (tag) {
    case FormTag::FractionalConductivity: return "fractional-conductivity";
    case FormTag::LocalConductivity: return "local-conductivity";
    case FormTag::FractionalPeridynamic: return "fractional-peridynamic";
    case FormTag::LocalElasticity: return "local-elasticity";
  }
  return "?";
}

StateField StateField::zeros(const Mesh& mesh, int components) {
  return {std::vector<double>(mesh.num_dofs() * components, 0.0), components};
}

double StateField::vertex_value(const Mesh& mesh, std::size_t v, int c) const {
  const int d = mesh.dof(v);
  return d < 0 ? 0.0 : values[static_cast<std::size_t>(d) * components + c];
}

double StateField::evaluate(const Mesh& mesh, std::size_t e, const std::array<double, 3>& bary, int c) const {
  const auto el = mesh.element(e);
  double u = 0.0;
  for (std::size_t k = 0; k < el.size(); ++k) u += bary[k] * vertex_value(mesh, el[k], c);
  return u;
}

QuadConfig QuadConfig::defaults(int dimension) {
  QuadConfig c;
  if (dimension == 1) {
    c.touch_order = 10;
    c.near_order = 12;
    c.far_order = 8;
  }
  return c;
}

void QuadConfig::validate() const {
  for (int o : {touch_order, near_order, far_order})
    if (o < 1 || o > 12) throw ParameterError("quadrature orders must lie in [1, 12]");
  if (!(far_factor >= 0.0)) throw ParameterError("far_factor must be nonnegative");
  if (threads < 0) throw ParameterError("thread count must be nonnegative");
}

double gamma_constant(double s, int n, int p) {
  if (!(s > 0.0 && s < 1.0)) throw ParameterError("gamma_constant needs s in (0, 1)");
  if (n != 1 && n != 2) throw ParameterError("gamma_constant supports n = 1, 2");
  if (p != 2) throw ParameterError("gamma_constant supports p = 2");
  const double sphere_moment = n == 1 ? 2.0 : std::numbers::pi;
  return p * (1.0 - s) / sphere_moment;
}

// ---------------------------------------------------------------- matrix

SymSparseMatrix::SymSparseMatrix(std::size_t n, std::vector<std::uint64_t> row_ptr,
                                 std::vector<std::uint64_t> col_idx, std::vector<double> values)
    : n_(n), row_ptr_(std::move(row_ptr)), col_idx_(std::move(col_idx)), values_(std::move(values)) {
  if (row_ptr_.size() != n_ + 1 || row_ptr_.back() != col_idx_.size() || col_idx_.size() != values_.size())
    throw ParameterError("inconsistent CSR arrays");
  for (std::size_t i = 0; i < n_; ++i)
    for (auto k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k)
      if (col_idx_[k] > i || (k > row_ptr_[i] && col_idx_[k] <= col_idx_[k - 1]))
        throw ParameterError("CSR arrays must hold a sorted lower triangle");
}

SymSparseMatrix SymSparseMatrix::from_dense_lower(std::size_t n, const std::vector<double>& dense) {
  std::vector<std::uint64_t> rp{0};
  std::vector<std::uint64_t> ci;
  std::vector<double> v;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      const double x = dense[i * n + j];
      if (x != 0.0 || i == j) {
        ci.push_back(j);
        v.push_back(x);
      }
    }
    rp.push_back(ci.size());
  }
  return SymSparseMatrix(n, std::move(rp), std::move(ci), std::move(v));
}

SymSparseMatrix SymSparseMatrix::from_triplets(std::size_t n, const std::vector<Eigen::Triplet<double>>& triplets) {
  std::vector<Eigen::Triplet<double>> lower;
  lower.reserve(triplets.size());
  for (const auto& t : triplets) {
    if (t.row() >= t.col())
      lower.push_back(t);
    else
      lower.emplace_back(t.col(), t.row(), t.value());
  }
  Eigen::SparseMatrix<double, Eigen::RowMajor> M(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  M.setFromTriplets(lower.begin(), lower.end());
  M.makeCompressed();
  std::vector<std::uint64_t> rp(n + 1);
  std::vector<std::uint64_t> ci;
  std::vector<double> v;
  for (std::size_t i = 0; i < n; ++i) {
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(M, static_cast<Eigen::Index>(i)); it; ++it) {
      ci.push_back(static_cast<std::uint64_t>(it.col()));
      v.push_back(it.value());
    }
    rp[i + 1] = ci.size();
  }
  return SymSparseMatrix(n, std::move(rp), std::move(ci), std::move(v));
}

double SymSparseMatrix::entry(std::size_t i, std::size_t j) const {
  if (i < j) std::swap(i, j);
  const auto first = col_idx_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[i]);
  const auto last = col_idx_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[i + 1]);
  const auto it = std::lower_bound(first, last, j);
  return it != last && *it == j ? values_[static_cast<std::size_t>(it - col_idx_.begin())] : 0.0;
}

std::vector<double> SymSparseMatrix::diagonal() const {
  std::vector<double> d(n_);
  for (std::size_t i = 0; i < n_; ++i) d[i] = entry(i, i);
  return d;
}

void SymSparseMatrix::multiply(std::span<const double> x, std::span<double> y) const {
  if (x.size() != n_ || y.size() != n_) throw ParameterError("matrix-vector size mismatch");
  std::fill(y.begin(), y.end(), 0.0);
  for (std::size_t i = 0; i < n_; ++i)
    for (auto k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
      const std::size_t j = col_idx_[k];
      y[i] += values_[k] * x[j];
      if (j != i) y[j] += values_[k] * x[i];
    }
}

std::vector<double> SymSparseMatrix::multiply(std::span<const double> x) const {
  std::vector<double> y(n_);
  multiply(x, y);
  return y;
}

double SymSparseMatrix::quadratic_form(std::span<const double> x) const {
  if (x.size() != n_) throw ParameterError("quadratic form size mismatch");
  double q = 0.0;
  for (std::size_t i = 0; i < n_; ++i)
    for (auto k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
      const std::size_t j = col_idx_[k];
      q += (j == i ? 1.0 : 2.0) * values_[k] * x[i] * x[j];
    }
  return q;
}

Eigen::MatrixXd SymSparseMatrix::to_dense() const {
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(n_));
  for (std::size_t i = 0; i < n_; ++i)
    for (auto k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
      const auto j = static_cast<Eigen::Index>(col_idx_[k]);
      D(static_cast<Eigen::Index>(i), j) = values_[k];
      D(j, static_cast<Eigen::Index>(i)) = values_[k];
    }
  return D;
}

Eigen::SparseMatrix<double> SymSparseMatrix::to_eigen() const {
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(2 * values_.size());
  for (std::size_t i = 0; i < n_; ++i)
    for (auto k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
      const auto r = static_cast<int>(i);
      const auto c = static_cast<int>(col_idx_[k]);
      t.emplace_back(r, c, values_[k]);
      if (r != c) t.emplace_back(c, r, values_[k]);
    }
  Eigen::SparseMatrix<double> M(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(n_));
  M.setFromTriplets(t.begin(), t.end());
  return M;
}

SymSparseMatrix SymSparseMatrix::scaled(double factor) const {
  SymSparseMatrix m = *this;
  for (double& v : m.values_) v *= factor;
  return m;
}

// ---------------------------------------------------------------- pair engine

namespace {

double reference_measure(int dim) { return dim == 2 ? 0.5 : 1.0; }

struct ElementGeometry {
  Point centroid;
  double radius;  // max vertex distance from the centroid
};

/// One element pair with the vertex orderings the pair rule expects: shared
/// vertices first, in the same order in both elements. Local unknowns run over
/// the distinct vertices of the pair: shared ones, then the rest of e1, then the
/// rest of e2.
struct PairPlan {
  int e1 = 0;
  int e2 = 0;
  PairClass cls = PairClass::Disjoint;
  bool far = false;
  int shared = 0;
  int vertices = 0;
  std::array<int, 3> p1{0, 1, 2};
  std::array<int, 3> p2{0, 1, 2};
};

inline std::array<double, 3> barycentric(int dim, const Point& r) {
  if (dim == 1) return {1.0 - r[0], r[0], 0.0};
  return {1.0 - r[0] - r[1], r[0], r[1]};
}

constexpr int kMaxSlots = 12;

}  // namespace

struct FormOperator::PairData {
  const Mesh* mesh = nullptr;
  int dim = 1;
  int nv = 2;
  int comps = 1;
  std::size_t packed = 10;  // packed size for 2 * nv distinct vertices
  double gamma = 0.0;
  double kernel_exponent = 0.0;  // applied to |x - y|^2
  double far_distance = 0.0;
  std::vector<ElementGeometry> geometry;
  // Pairs (i, j) with i an Interior element and j >= i, enumerated row by row.
  std::vector<std::uint64_t> row_offset;
  PairRuleCache rules;
  const PairQuadRule* identical = nullptr;
  const PairQuadRule* edge = nullptr;
  const PairQuadRule* vertex = nullptr;
  const PairQuadRule* near = nullptr;
  const PairQuadRule* far = nullptr;
  std::vector<double> cache;
  bool cached = false;

  std::size_t rows() const { return row_offset.size() - 1; }

  PairPlan plan(int e1, int e2) const {
    PairPlan p;
    p.e1 = e1;
    p.e2 = e2;
    if (e1 == e2) {
      p.cls = PairClass::Identical;
      p.shared = p.vertices = nv;
      return p;
    }
    const auto a = mesh->element(static_cast<std::size_t>(e1));
    const auto b = mesh->element(static_cast<std::size_t>(e2));
    int k = 0;
    std::array<bool, 3> used_a{}, used_b{};
    for (int i = 0; i < nv; ++i)
      for (int j = 0; j < nv; ++j)
        if (!used_b[j] && a[i] == b[j]) {
          p.p1[k] = i;
          p.p2[k] = j;
          used_a[i] = used_b[j] = true;
          ++k;
        }
    p.shared = k;
    p.vertices = 2 * nv - k;
    int ka = k;
    int kb = k;
    for (int i = 0; i < nv; ++i) {
      if (!used_a[i]) p.p1[ka++] = i;
      if (!used_b[i]) p.p2[kb++] = i;
    }
    if (k == 0) {
      p.cls = PairClass::Disjoint;
      const auto& g1 = geometry[static_cast<std::size_t>(e1)];
      const auto& g2 = geometry[static_cast<std::size_t>(e2)];
      const double gap =
          std::hypot(g1.centroid[0] - g2.centroid[0], g1.centroid[1] - g2.centroid[1]) - g1.radius - g2.radius;
      p.far = gap > far_distance;
    } else if (k == 1) {
      p.cls = PairClass::VertexTouch;
    } else {
      p.cls = PairClass::EdgeTouch;
    }
    return p;
  }

  const PairQuadRule& rule(const PairPlan& p) const {
    switch (p.cls) {
      case PairClass::Identical: return *identical;
      case PairClass::EdgeTouch: return *edge;
      case PairClass::VertexTouch: return *vertex;
      case PairClass::Disjoint: break;
    }
    return p.far ? *far : *near;
  }

  struct Frame {
    Point origin_diff{0.0, 0.0};
    std::array<Point, 2> e1{};
    std::array<Point, 2> e2{};
    double scale = 0.0;
  };

  Frame frame(const PairPlan& p) const {
    const auto a = mesh->element(static_cast<std::size_t>(p.e1));
    const auto b = mesh->element(static_cast<std::size_t>(p.e2));
    Frame f;
    const Point& a0 = mesh->vertex(static_cast<std::size_t>(a[p.p1[0]]));
    const Point& b0 = mesh->vertex(static_cast<std::size_t>(b[p.p2[0]]));
    if (p.cls == PairClass::Disjoint) f.origin_diff = {a0[0] - b0[0], a0[1] - b0[1]};
    for (int k = 0; k < dim; ++k) {
      const Point& ak = mesh->vertex(static_cast<std::size_t>(a[p.p1[k + 1]]));
      const Point& bk = mesh->vertex(static_cast<std::size_t>(b[p.p2[k + 1]]));
      f.e1[k] = {ak[0] - a0[0], ak[1] - a0[1]};
      f.e2[k] = {bk[0] - b0[0], bk[1] - b0[1]};
    }
    const double ref = reference_measure(dim);
    f.scale = gamma * (mesh->measure(static_cast<std::size_t>(p.e1)) / ref) *
              (mesh->measure(static_cast<std::size_t>(p.e2)) / ref);
    return f;
  }

  static int slot_count(const PairPlan& p, int comps) { return p.vertices * comps; }

  /// Global unknown index per local slot (-1 for constrained vertices).
  void slot_indices(const PairPlan& p, std::array<int, kMaxSlots>& out) const {
    const auto a = mesh->element(static_cast<std::size_t>(p.e1));
    const auto b = mesh->element(static_cast<std::size_t>(p.e2));
    for (int k = 0; k < p.vertices; ++k) {
      const int v = k < nv ? a[p.p1[k]] : b[p.p2[k - nv + p.shared]];
      const int d = mesh->dof(static_cast<std::size_t>(v));
      for (int c = 0; c < comps; ++c) out[k * comps + c] = d < 0 ? -1 : d * comps + c;
    }
  }

  /// Basis differences phi_v(x) - phi_v(y) at one quadrature node (projected on
  /// the bond direction for vector kinds); returns the kernel weight.
  double node_vector(const PairPlan& p, const Frame& f, const PairNode& n, std::array<double, kMaxSlots>& d) const {
    const auto lx = barycentric(dim, n.x);
    const auto ly = barycentric(dim, n.y);
    const Point r{f.origin_diff[0] + n.x[0] * f.e1[0][0] + n.x[1] * f.e1[1][0] - n.y[0] * f.e2[0][0] -
                      n.y[1] * f.e2[1][0],
                  f.origin_diff[1] + n.x[0] * f.e1[0][1] + n.x[1] * f.e1[1][1] - n.y[0] * f.e2[0][1] -
                      n.y[1] * f.e2[1][1]};
    const double r2 = r[0] * r[0] + r[1] * r[1];
    std::array<double, 6> dv{};
    for (int k = 0; k < p.shared; ++k) dv[k] = lx[k] - ly[k];
    for (int k = p.shared; k < nv; ++k) {
      dv[k] = lx[k];
      dv[nv + k - p.shared] = -ly[k];
    }
    if (comps == 1) {
      for (int k = 0; k < p.vertices; ++k) d[k] = dv[k];
    } else {
      const double inv = 1.0 / std::sqrt(r2);
      const double rh[2] = {r[0] * inv, r[1] * inv};
      for (int k = 0; k < p.vertices; ++k)
        for (int c = 0; c < comps; ++c) d[k * comps + c] = dv[k] * rh[c];
    }
    return n.weight * std::pow(r2, kernel_exponent);
  }

  /// Packed lower triangle of the local matrix of one ordered pair integral.
  void local_matrix(const PairPlan& p, double* out) const {
    std::fill(out, out + packed, 0.0);
    const Frame f = frame(p);
    const int slots = slot_count(p, comps);
    std::array<double, kMaxSlots> d{};
    for (const PairNode& n : rule(p).nodes) {
      const double w = node_vector(p, f, n, d);
      std::size_t idx = 0;
      for (int r = 0; r < slots; ++r) {
        const double wr = w * d[r];
        for (int c = 0; c <= r; ++c) out[idx++] += wr * d[c];
      }
    }
    const auto used = static_cast<std::size_t>(slots * (slots + 1) / 2);
    for (std::size_t i = 0; i < used; ++i) out[i] *= f.scale;
  }

  /// gamma * int_{T1 x T2} (Du)^2 |x - y|^(-n-2s) for the state u.
  double local_energy(const PairPlan& p, const StateField& u) const {
    std::array<int, kMaxSlots> idx{};
    slot_indices(p, idx);
    const int slots = slot_count(p, comps);
    std::array<double, kMaxSlots> ul{};
    bool any = false;
    for (int k = 0; k < slots; ++k) {
      ul[k] = idx[k] < 0 ? 0.0 : u.values[static_cast<std::size_t>(idx[k])];
      any |= ul[k] != 0.0;
    }
    if (!any) return 0.0;
    const Frame f = frame(p);
    std::array<double, kMaxSlots> d{};
    double e = 0.0;
    for (const PairNode& n : rule(p).nodes) {
      const double w = node_vector(p, f, n, d);
      double du = 0.0;
      for (int k = 0; k < slots; ++k) du += d[k] * ul[k];
      e += w * du * du;
    }
    return e * f.scale;
  }

  double packed_energy(const PairPlan& p, const double* m, const StateField& u) const {
    std::array<int, kMaxSlots> idx{};
    slot_indices(p, idx);
    const int slots = slot_count(p, comps);
    std::array<double, kMaxSlots> ul{};
    for (int k = 0; k < slots; ++k) ul[k] = idx[k] < 0 ? 0.0 : u.values[static_cast<std::size_t>(idx[k])];
    double e = 0.0;
    std::size_t i = 0;
    for (int r = 0; r < slots; ++r)
      for (int c = 0; c <= r; ++c) e += (r == c ? 1.0 : 2.0) * m[i++] * ul[r] * ul[c];
    return e;
  }

  /// Adds coefficient * local matrix into the dense row-major accumulator (lower part).
  void scatter(const PairPlan& p, const double* m, double coefficient, std::vector<double>& K, std::size_t n) const {
    std::array<int, kMaxSlots> idx{};
    slot_indices(p, idx);
    const int slots = slot_count(p, comps);
    std::size_t i = 0;
    for (int r = 0; r < slots; ++r)
      for (int c = 0; c <= r; ++c, ++i) {
        const int gr = idx[r];
        const int gc = idx[c];
        if (gr < 0 || gc < 0) continue;
        K[static_cast<std::size_t>(std::max(gr, gc)) * n + std::min(gr, gc)] += coefficient * m[i];
      }
  }

  /// Visits every pair row block: fn(first_row, last_row) with a buffer
  /// budget of `per_pair` doubles per pair.
  template <class Fn>
  void for_each_block(std::size_t per_pair, Fn&& fn) const {
    const std::size_t budget = std::max<std::size_t>(mesh->num_elements(), (std::size_t{1} << 23) / per_pair);
    std::size_t first = 0;
    while (first < rows()) {
      std::size_t last = first + 1;
      while (last < rows() && row_offset[last + 1] - row_offset[first] <= budget) ++last;
      fn(first, last);
      first = last;
    }
  }
};

FormOperator::FormOperator(const Mesh& mesh, FormKind kind, QuadConfig config)
    : mesh_(mesh), kind_(kind), config_(config), components_(kind.components(mesh.dimension())) {
  kind_.validate();
  config_.validate();
  if (!kind_.fractional()) return;
  if (!mesh_.has_horizon_layer()) throw ConfigurationError("fractional forms need a mesh with a horizon layer");
  if (std::abs(mesh_.horizon_width() - kind_.R) > 1e-9 * std::max(1.0, kind_.R))
    throw ConfigurationError("horizon layer width " + std::to_string(mesh_.horizon_width()) +
                             " does not match R = " + std::to_string(kind_.R));

  pairs_ = std::make_unique<PairData>();
  PairData& P = *pairs_;
  P.mesh = &mesh_;
  P.dim = mesh_.dimension();
  P.nv = P.dim + 1;
  P.comps = components_;
  const int max_slots = 2 * P.nv * components_;
  P.packed = static_cast<std::size_t>(max_slots * (max_slots + 1) / 2);
  P.gamma = gamma_constant(kind_.s, P.dim, 2);
  P.kernel_exponent = -0.5 * (P.dim + 2.0 * kind_.s);
  P.far_distance = config_.far_factor * mesh_.h();
  P.geometry.resize(mesh_.num_elements());
  for (std::size_t e = 0; e < mesh_.num_elements(); ++e) {
    const Point c = mesh_.centroid(e);
    double r = 0.0;
    for (int v : mesh_.element(e))
      r = std::max(r, std::hypot(mesh_.vertex(static_cast<std::size_t>(v))[0] - c[0],
                                 mesh_.vertex(static_cast<std::size_t>(v))[1] - c[1]));
    P.geometry[e] = {c, r};
  }
  const std::size_t N = mesh_.num_elements();
  const std::size_t Ni = mesh_.num_interior_elements();
  P.row_offset.assign(Ni + 1, 0);
  for (std::size_t i = 0; i < Ni; ++i) P.row_offset[i + 1] = P.row_offset[i] + (N - i);

  const double s = kind_.s;
  P.identical = &P.rules.get(P.dim, PairClass::Identical, s, config_.touch_order);
  P.vertex = &P.rules.get(P.dim, PairClass::VertexTouch, s, config_.touch_order);
  if (P.dim == 2) P.edge = &P.rules.get(P.dim, PairClass::EdgeTouch, s, config_.touch_order);
  P.near = &P.rules.get(P.dim, PairClass::Disjoint, s, config_.near_order);
  P.far = &P.rules.get(P.dim, PairClass::Disjoint, s, config_.far_order);

  if (config_.cache_pairs) {
    P.cache.assign(P.row_offset.back() * P.packed, 0.0);
    parallel_for(Ni, config_.threads, [&](std::size_t i) {
      for (std::size_t j = i; j < N; ++j)
        P.local_matrix(P.plan(static_cast<int>(i), static_cast<int>(j)),
                       P.cache.data() + (P.row_offset[i] + (j - i)) * P.packed);
    });
    P.cached = true;
  }
}

FormOperator::~FormOperator() = default;

std::size_t FormOperator::num_pairs() const noexcept {
  return pairs_ ? pairs_->row_offset.back() : mesh_.num_interior_elements();
}

void FormOperator::check_state(const StateField& u) const {
  if (u.components != components_ || u.values.size() != num_unknowns())
    throw ParameterError("state size does not match mesh and form");
}

// ---------------------------------------------------------------- local forms

namespace {

/// Gradients of the barycentric functions of element e.
std::array<Point, 3> p1_gradients(const Mesh& mesh, std::size_t e) {
  const auto el = mesh.element(e);
  const Point& v0 = mesh.vertex(static_cast<std::size_t>(el[0]));
  const Point& v1 = mesh.vertex(static_cast<std::size_t>(el[1]));
  if (mesh.dimension() == 1) {
    const double inv = 1.0 / (v1[0] - v0[0]);
    return {Point{-inv, 0.0}, Point{inv, 0.0}, Point{0.0, 0.0}};
  }
  const Point& v2 = mesh.vertex(static_cast<std::size_t>(el[2]));
  const double det = (v1[0] - v0[0]) * (v2[1] - v0[1]) - (v2[0] - v0[0]) * (v1[1] - v0[1]);
  const Point g1{(v2[1] - v0[1]) / det, -(v2[0] - v0[0]) / det};
  const Point g2{-(v1[1] - v0[1]) / det, (v1[0] - v0[0]) / det};
  return {Point{-g1[0] - g2[0], -g1[1] - g2[1]}, g1, g2};
}

/// Unit-coefficient element matrix, (nv * comps)^2 row-major.
std::vector<double> local_element_matrix(const Mesh& mesh, std::size_t e, FormTag tag) {
  const int nv = mesh.dimension() + 1;
  const auto g = p1_gradients(mesh, e);
  const double area = mesh.measure(e);
  if (tag == FormTag::LocalConductivity) {
    std::vector<double> K(static_cast<std::size_t>(nv * nv));
    for (int i = 0; i < nv; ++i)
      for (int j = 0; j < nv; ++j) K[i * nv + j] = area * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
    return K;
  }
  const int d = mesh.dimension();
  const int L = nv * d;
  std::vector<double> K(static_cast<std::size_t>(L * L));
  const double pref = area / (d + 2.0);
  for (int i = 0; i < nv; ++i)
    for (int c = 0; c < d; ++c)
      for (int j = 0; j < nv; ++j)
        for (int cc = 0; cc < d; ++cc) {
          const double dot = g[i][0] * g[j][0] + g[i][1] * g[j][1];
          // 2 eps:eps + div div for the fields phi_i e_c and phi_j e_cc
          const double v = (c == cc ? dot : 0.0) + g[i][cc] * g[j][c] + g[i][c] * g[j][cc];
          K[(i * d + c) * L + (j * d + cc)] = pref * v;
        }
  return K;
}

}  // namespace

SymSparseMatrix FormOperator::stiffness(const DesignField& design) const {
  design.validate(mesh_);
  const std::size_t n = num_unknowns();
  if (!pairs_) {
    std::vector<Eigen::Triplet<double>> trip;
    const int nv = mesh_.dimension() + 1;
    for (std::size_t e = 0; e < mesh_.num_interior_elements(); ++e) {
      const auto K = local_element_matrix(mesh_, e, kind_.tag);
      const auto el = mesh_.element(e);
      const int L = nv * components_;
      for (int r = 0; r < L; ++r) {
        const int dr = mesh_.dof(static_cast<std::size_t>(el[r / components_]));
        if (dr < 0) continue;
        for (int c = 0; c <= L - 1; ++c) {
          const int dc = mesh_.dof(static_cast<std::size_t>(el[c / components_]));
          if (dc < 0) continue;
          const int gr = dr * components_ + r % components_;
          const int gc = dc * components_ + c % components_;
          if (gr < gc) continue;
          trip.emplace_back(gr, gc, design.on_element(e) * K[r * L + c]);
        }
      }
    }
    for (std::size_t i = 0; i < n; ++i) trip.emplace_back(static_cast<int>(i), static_cast<int>(i), 0.0);
    SymSparseMatrix M = SymSparseMatrix::from_triplets(n, trip);
    for (double v : M.diagonal())
      if (!(v > 0.0) || !std::isfinite(v)) throw NumericalIntegrityError("stiffness has a nonpositive diagonal entry");
    return M;
  }

  const PairData& P = *pairs_;
  std::vector<double> dense(n * n, 0.0);
  const std::size_t N = mesh_.num_elements();
  auto coefficient = [&](std::size_t i, std::size_t j) {
    return i == j ? design.on_element(i) : design.on_element(i) + design.on_element(j);
  };
  if (P.cached) {
    for (std::size_t i = 0; i < P.rows(); ++i)
      for (std::size_t j = i; j < N; ++j)
        P.scatter(P.plan(static_cast<int>(i), static_cast<int>(j)),
                  P.cache.data() + (P.row_offset[i] + (j - i)) * P.packed, coefficient(i, j), dense, n);
  } else {
    std::vector<double> buffer;
    P.for_each_block(P.packed, [&](std::size_t first, std::size_t last) {
      const std::uint64_t base = P.row_offset[first];
      buffer.resize((P.row_offset[last] - base) * P.packed);
      parallel_for(last - first, config_.threads, [&](std::size_t r) {
        const std::size_t i = first + r;
        for (std::size_t j = i; j < N; ++j)
          P.local_matrix(P.plan(static_cast<int>(i), static_cast<int>(j)),
                         buffer.data() + (P.row_offset[i] - base + (j - i)) * P.packed);
      });
      for (std::size_t i = first; i < last; ++i)
        for (std::size_t j = i; j < N; ++j)
          P.scatter(P.plan(static_cast<int>(i), static_cast<int>(j)),
                    buffer.data() + (P.row_offset[i] - base + (j - i)) * P.packed, coefficient(i, j), dense, n);
    });
  }
  for (std::size_t i = 0; i < n; ++i)
    if (!(dense[i * n + i] > 0.0) || !std::isfinite(dense[i * n + i]))
      throw NumericalIntegrityError("stiffness has a nonpositive diagonal entry");
  return SymSparseMatrix::from_dense_lower(n, dense);
}

std::vector<double> FormOperator::element_energies(const StateField& u) const {
  check_state(u);
  const std::size_t N = mesh_.num_elements();
  std::vector<double> g(N, 0.0);
  if (!pairs_) {
    const int nv = mesh_.dimension() + 1;
    const int L = nv * components_;
    for (std::size_t e = 0; e < mesh_.num_interior_elements(); ++e) {
      const auto K = local_element_matrix(mesh_, e, kind_.tag);
      const auto el = mesh_.element(e);
      std::vector<double> ul(static_cast<std::size_t>(L));
      for (int r = 0; r < L; ++r) ul[r] = u.vertex_value(mesh_, static_cast<std::size_t>(el[r / components_]), r % components_);
      double q = 0.0;
      for (int r = 0; r < L; ++r)
        for (int c = 0; c < L; ++c) q += ul[r] * K[r * L + c] * ul[c];
      g[e] = q;
    }
    return g;
  }
  const PairData& P = *pairs_;
  std::vector<double> buffer;
  P.for_each_block(1, [&](std::size_t first, std::size_t last) {
    const std::uint64_t base = P.row_offset[first];
    buffer.assign(P.row_offset[last] - base, 0.0);
    parallel_for(last - first, config_.threads, [&](std::size_t r) {
      const std::size_t i = first + r;
      for (std::size_t j = i; j < N; ++j) {
        const PairPlan plan = P.plan(static_cast<int>(i), static_cast<int>(j));
        double& out = buffer[P.row_offset[i] - base + (j - i)];
        out = P.cached ? P.packed_energy(plan, P.cache.data() + (P.row_offset[i] + (j - i)) * P.packed, u)
                       : P.local_energy(plan, u);
      }
    });
    for (std::size_t i = first; i < last; ++i)
      for (std::size_t j = i; j < N; ++j) {
        const double e = buffer[P.row_offset[i] - base + (j - i)];
        g[i] += e;
        if (j != i) g[j] += e;
      }
  });
  return g;
}

double FormOperator::unit_energy(const StateField& u) const {
  const auto g = element_energies(u);
  double total = 0.0;
  for (double x : g) total += x;
  return total;
}

SymSparseMatrix assemble_stiffness(const Mesh& mesh, const DesignField& design, FormKind kind,
                                   const QuadConfig& config) {
  return FormOperator(mesh, kind, config).stiffness(design);
}

std::vector<double> element_gradient_values(const Mesh& mesh, const StateField& u, FormKind kind,
                                            const QuadConfig& config) {
  auto g = FormOperator(mesh, kind, config).element_energies(u);
  g.resize(mesh.num_interior_elements());
  return g;
}

double seminorm(const Mesh& mesh, const StateField& u, FormKind kind, const QuadConfig& config) {
  return std::sqrt(std::max(0.0, FormOperator(mesh, kind, config).unit_energy(u)));
}

double seminorm(const Mesh& mesh, const StateField& u, FormKind kind) {
  return seminorm(mesh, u, kind, QuadConfig::defaults(mesh.dimension()));
}

double l2_norm(const Mesh& mesh, const StateField& u) {
  const int dim = mesh.dimension();
  const double factor = dim == 1 ? 1.0 / 6.0 : 1.0 / 12.0;
  double total = 0.0;
  for (std::size_t e = 0; e < mesh.num_interior_elements(); ++e) {
    const auto el = mesh.element(e);
    for (int c = 0; c < u.components; ++c) {
      double sum = 0.0;
      double sq = 0.0;
      for (int v : el) {
        const double x = u.vertex_value(mesh, static_cast<std::size_t>(v), c);
        sum += x;
        sq += x * x;
      }
      total += mesh.measure(e) * factor * (sq + sum * sum);
    }
  }
  return std::sqrt(total);
}

// ---------------------------------------------------------------- loads

Source Source::parse(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ':')) parts.push_back(item);
  auto number = [&](std::size_t k) {
    try {
      std::size_t used = 0;
      const double v = std::stod(parts.at(k), &used);
      if (used != parts[k].size()) throw std::invalid_argument("trailing characters");
      return v;
    } catch (const std::exception&) {
      throw ParameterError("bad number in source descriptor '" + text + "'");
    }
  };
  Source f;
  if (!parts.empty() && parts[0] == "const" && parts.size() == 2) {
    f.kind = Kind::Constant;
    f.value = number(1);
    return f;
  }
  if (!parts.empty() && parts[0] == "ball" && parts.size() == 5) {
    f.kind = Kind::Ball;
    f.value = number(1);
    f.radius = number(2);
    f.center = {number(3), number(4)};
    if (!(f.radius > 0.0)) throw ParameterError("ball source needs a positive radius");
    return f;
  }
  throw ParameterError("unsupported source descriptor '" + text + "' (use const:c or ball:c:r:x0:y0)");
}

std::string Source::to_string() const {
  // shortest representation that round-trips
  auto num = [](double v) {
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
  };
  if (kind == Kind::Constant) return "const:" + num(value);
  return "ball:" + num(value) + ':' + num(radius) + ':' + num(center[0]) + ':' + num(center[1]);
}

double Source::operator()(const Point& x) const {
  if (kind == Kind::Constant) return value;
  return std::hypot(x[0] - center[0], x[1] - center[1]) < radius ? value : 0.0;
}

std::vector<double> assemble_load(const Mesh& mesh, const Source& f, int components) {
  if (components < 1 || components > mesh.dimension()) throw ParameterError("bad component count for the load");
  const int dim = mesh.dimension();
  const int nv = dim + 1;
  const QuadRule rule = gauss_simplex(dim, 10);
  const double ref = reference_measure(dim);
  std::vector<double> F(mesh.num_dofs() * components, 0.0);
  for (std::size_t e = 0; e < mesh.num_interior_elements(); ++e) {
    const auto el = mesh.element(e);
    std::array<double, 3> contrib{};
    bool inside = true;
    double min_dist = 1e300;
    if (f.kind == Source::Kind::Ball) {
      for (int v : el) {
        const Point& p = mesh.vertex(static_cast<std::size_t>(v));
        inside &= std::hypot(p[0] - f.center[0], p[1] - f.center[1]) < f.radius;
      }
      // lower bound of the distance from the ball centre to the element
      const Point c = mesh.centroid(e);
      double rad = 0.0;
      for (int v : el) {
        const Point& p = mesh.vertex(static_cast<std::size_t>(v));
        rad = std::max(rad, std::hypot(p[0] - c[0], p[1] - c[1]));
      }
      min_dist = std::hypot(c[0] - f.center[0], c[1] - f.center[1]) - rad;
    }
    if (f.kind == Source::Kind::Constant || inside) {
      for (int k = 0; k < nv; ++k) contrib[k] = f.value * mesh.measure(e) / nv;
    } else if (min_dist >= f.radius) {
      continue;
    } else {
      for (std::size_t q = 0; q < rule.size(); ++q) {
        Point x{0.0, 0.0};
        for (int k = 0; k < nv; ++k) {
          const Point& p = mesh.vertex(static_cast<std::size_t>(el[k]));
          x[0] += rule.points[q][k] * p[0];
          x[1] += rule.points[q][k] * p[1];
        }
        const double w = rule.weights[q] * mesh.measure(e) / ref * f(x);
        for (int k = 0; k < nv; ++k) contrib[k] += w * rule.points[q][k];
      }
    }
    for (int k = 0; k < nv; ++k) {
      const int d = mesh.dof(static_cast<std::size_t>(el[k]));
      if (d < 0) continue;
      for (int c = 0; c < components; ++c) F[static_cast<std::size_t>(d) * components + c] += contrib[k];
    }
  }
  return F;
}

// ---------------------------------------------------------------- matrix cache

namespace {

constexpr char kMagic[8] = {'N', 'L', 'D', 'M', 'A', 'T', '0', '1'};

void put_u64(std::ostream& out, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xffu);
  out.write(b, 8);
}

void put_f64(std::ostream& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

std::uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) throw ConfigurationError("matrix cache truncated");
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

double get_f64(std::istream& in) { return std::bit_cast<double>(get_u64(in)); }

}  // namespace

void save_matrix_cache(const std::string& path, const SymSparseMatrix& K, double s, double R, const Mesh& mesh) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParameterError("cannot write matrix cache " + path);
  out.write(kMagic, 8);
  put_u64(out, K.size());
  put_u64(out, K.nnz());
  put_f64(out, s);
  put_f64(out, R);
  const auto hash = mesh_content_hash(mesh);
  out.write(reinterpret_cast<const char*>(hash.data()), static_cast<std::streamsize>(hash.size()));
  for (auto v : K.row_ptr()) put_u64(out, v);
  for (auto v : K.col_idx()) put_u64(out, v);
  for (double v : K.values()) put_f64(out, v);
  if (!out) throw ParameterError("failed writing matrix cache " + path);
}

SymSparseMatrix load_matrix_cache(const std::string& path, const Mesh& mesh, double s, double R) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigurationError("cannot open matrix cache " + path);
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) throw ConfigurationError("not a matrix cache file");
  const std::uint64_t n = get_u64(in);
  const std::uint64_t nnz = get_u64(in);
  const double fs = get_f64(in);
  const double fR = get_f64(in);
  std::array<std::uint8_t, 32> hash{};
  if (!in.read(reinterpret_cast<char*>(hash.data()), 32)) throw ConfigurationError("matrix cache truncated");
  if (hash != mesh_content_hash(mesh)) throw ConfigurationError("matrix cache belongs to a different mesh");
  if (fs != s || fR != R) throw ConfigurationError("matrix cache was built for different s or R");
  if (nnz > n * (n + 1) / 2) throw ConfigurationError("matrix cache has an impossible nonzero count");
  std::vector<std::uint64_t> rp(n + 1);
  std::vector<std::uint64_t> ci(nnz);
  std::vector<double> v(nnz);
  for (auto& x : rp) x = get_u64(in);
  for (auto& x : ci) x = get_u64(in);
  for (auto& x : v) x = get_f64(in);
  try {
    return SymSparseMatrix(n, std::move(rp), std::move(ci), std::move(v));
  } catch (const ParameterError& e) {
    throw ConfigurationError(std::string("corrupt matrix cache: ") + e.what());
  }
}

}  // namespace nld
