#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace nld {

using Point = std::array<double, 2>;
using Simplex = std::array<int, 3>;  // 1D elements leave the last slot at -1

enum class Region : std::uint8_t { Interior = 0, HorizonLayer = 1 };

/// Adjacency of two elements, by number of shared vertices.
enum class PairClass : std::uint8_t { Disjoint, VertexTouch, EdgeTouch, Identical };

const char* to_string(PairClass c);

/// Simplicial mesh of Omega, optionally followed by a horizon layer meshing
/// Omega_R \ Omega. Interior elements always precede layer elements, so the
/// design coefficient of element e lives at index e for e < num_interior_elements().
///
/// Immutable after construction; the constructor validates the invariants.
class Mesh {
 public:
  Mesh(int dimension, std::vector<Point> vertices, std::vector<Simplex> elements,
       std::vector<std::uint8_t> interior_vertex_flags, std::vector<Region> regions);

  int dimension() const noexcept { return dim_; }
  int vertices_per_element() const noexcept { return dim_ + 1; }
  std::size_t num_vertices() const noexcept { return vertices_.size(); }
  std::size_t num_elements() const noexcept { return elements_.size(); }
  std::size_t num_interior_elements() const noexcept { return num_interior_elements_; }
  bool has_horizon_layer() const noexcept { return num_interior_elements_ < elements_.size(); }

  const Point& vertex(std::size_t v) const { return vertices_[v]; }
  const std::vector<Point>& vertices() const noexcept { return vertices_; }
  std::span<const int> element(std::size_t e) const {
    return {elements_[e].data(), static_cast<std::size_t>(dim_ + 1)};
  }
  const std::vector<Simplex>& elements() const noexcept { return elements_; }
  Region region(std::size_t e) const { return regions_[e]; }
  bool is_interior_vertex(std::size_t v) const { return interior_flags_[v] != 0; }

  /// Degree-of-freedom index of a vertex, or -1 for vertices carrying the
  /// homogeneous volume constraint.
  int dof(std::size_t v) const { return dof_of_vertex_[v]; }
  std::size_t num_dofs() const noexcept { return dof_vertices_.size(); }
  std::size_t dof_vertex(std::size_t d) const { return dof_vertices_[d]; }

  double measure(std::size_t e) const { return measure_[e]; }
  double diameter(std::size_t e) const;
  double inradius(std::size_t e) const;
  Point centroid(std::size_t e) const;

  /// Largest element diameter.
  double h() const noexcept { return h_; }
  /// Largest diameter divided by smallest inradius.
  double quasi_uniformity_ratio() const noexcept { return quasi_uniformity_; }

  /// Sum of interior element measures.
  double interior_measure() const;

  /// Width of the horizon layer measured from the geometry (0 without a layer).
  /// In 1D the distance of the outermost layer vertex from the interval; in 2D
  /// the radial distance between the outer layer circle and the Omega boundary circle.
  double horizon_width() const noexcept { return horizon_width_; }

  const std::vector<int>& elements_of_vertex(std::size_t v) const { return vertex_elements_[v]; }

 private:
  void validate() const;
  void compute_geometry();

  int dim_;
  std::vector<Point> vertices_;
  std::vector<Simplex> elements_;
  std::vector<std::uint8_t> interior_flags_;
  std::vector<Region> regions_;
  std::size_t num_interior_elements_ = 0;
  std::vector<int> dof_of_vertex_;
  std::vector<std::size_t> dof_vertices_;
  std::vector<double> measure_;
  std::vector<std::vector<int>> vertex_elements_;
  double h_ = 0.0;
  double quasi_uniformity_ = 0.0;
  double horizon_width_ = 0.0;
};

/// Uniform partition of [a_end, b_end].
Mesh build_interval_mesh(double a_end, double b_end, int num_elements);

/// Concentric-ring triangulation of the disk of the given radius with `rings`
/// rings; ring i carries 8i vertices, so the mesh has (2*rings - 1)^2 interior
/// vertices. Boundary vertices lie on the circle.
Mesh build_disk_mesh_rings(double radius, int rings);

/// Coarsest ring triangulation of the disk with h <= target_h.
Mesh build_disk_mesh(double radius, double target_h);

/// Ring triangulation with exactly `dofs` interior vertices; dofs must be
/// (2m - 1)^2 for some m >= 1.
Mesh build_disk_mesh_for_dofs(double radius, std::size_t dofs);

/// Appends HorizonLayer elements covering Omega_R \ Omega. R = 0 returns the
/// mesh unchanged. 2D meshes must have their boundary on a circle.
Mesh extend_with_horizon(const Mesh& mesh, double R);

PairClass classify_pair(const Mesh& mesh, std::size_t e1, std::size_t e2);

/// Number of vertices shared by two elements.
int shared_vertex_count(const Mesh& mesh, std::size_t e1, std::size_t e2);

/// Plain-text serialization: `dim n_vertices n_elements`, vertex lines
/// `x [y] interior_flag [values...]`, element lines `v0 v1 [v2] region_tag [values...]`.
/// Optional per-vertex / per-element value columns are appended for field output.
void write_mesh(std::ostream& out, const Mesh& mesh,
                std::span<const std::vector<double>> vertex_values = {},
                std::span<const std::vector<double>> element_values = {});
std::string mesh_to_string(const Mesh& mesh);
Mesh read_mesh(std::istream& in);
Mesh read_mesh_file(const std::string& path);
void write_mesh_file(const std::string& path, const Mesh& mesh);

/// SHA-256 of the canonical text serialization.
std::array<std::uint8_t, 32> mesh_content_hash(const Mesh& mesh);

/// Index of the element containing p, if any (brute force with bounding boxes).
std::optional<std::size_t> locate_point(const Mesh& mesh, const Point& p,
                                        bool interior_only = true);

}  // namespace nld
