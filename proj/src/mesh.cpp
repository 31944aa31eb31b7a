#include "nld/mesh.hpp"

#include <openssl/sha.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>

#include "nld/errors.hpp"

namespace nld {

namespace {

double dist(const Point& a, const Point& b) { return std::hypot(a[0] - b[0], a[1] - b[1]); }

double signed_area(const Point& a, const Point& b, const Point& c) {
  return 0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]));
}

struct RingVertex {
  int index;
  double angle;  // in [0, 2pi)
};

double normalized_angle(double x, double y) {
  double a = std::atan2(y, x);
  if (a < 0.0) a += 2.0 * std::numbers::pi;
  return a;
}

/// Triangulates the annulus between two closed rings sorted by angle, both
/// starting near angle 0. Produces inner.size() + outer.size() triangles.
void zip_rings(const std::vector<RingVertex>& inner, const std::vector<RingVertex>& outer,
               const std::vector<Point>& coords, std::vector<Simplex>& out) {
  const std::size_t ni = inner.size();
  const std::size_t no = outer.size();
  auto next_angle = [](const std::vector<RingVertex>& ring, std::size_t k) {
    // angle of ring[k], unwrapped past 2pi for k == size
    if (k < ring.size()) return ring[k].angle;
    return ring[0].angle + 2.0 * std::numbers::pi;
  };
  std::size_t i = 0;
  std::size_t o = 0;
  while (i < ni || o < no) {
    const bool advance_outer =
        o < no && (i == ni || next_angle(outer, o + 1) <= next_angle(inner, i + 1));
    Simplex t;
    if (advance_outer) {
      t = {inner[i % ni].index, outer[o % no].index, outer[(o + 1) % no].index};
      ++o;
    } else {
      t = {inner[i % ni].index, outer[o % no].index, inner[(i + 1) % ni].index};
      ++i;
    }
    if (signed_area(coords[t[0]], coords[t[1]], coords[t[2]]) < 0.0) std::swap(t[1], t[2]);
    out.push_back(t);
  }
}

std::vector<RingVertex> make_ring(std::vector<Point>& coords, const Point& center, double r,
                                  int count, double phase) {
  std::vector<RingVertex> ring;
  ring.reserve(count);
  for (int k = 0; k < count; ++k) {
    const double theta = phase + 2.0 * std::numbers::pi * k / count;
    ring.push_back({static_cast<int>(coords.size()), std::fmod(theta, 2.0 * std::numbers::pi)});
    coords.push_back({center[0] + r * std::cos(theta), center[1] + r * std::sin(theta)});
  }
  return ring;
}

}  // namespace

const char* to_string(PairClass c) {
  switch (c) {
    case PairClass::Disjoint: return "Disjoint";
    case PairClass::VertexTouch: return "VertexTouch";
    case PairClass::EdgeTouch: return "EdgeTouch";
    case PairClass::Identical: return "Identical";
  }
  return "?";
}

Mesh::Mesh(int dimension, std::vector<Point> vertices, std::vector<Simplex> elements,
           std::vector<std::uint8_t> interior_vertex_flags, std::vector<Region> regions)
    : dim_(dimension),
      vertices_(std::move(vertices)),
      elements_(std::move(elements)),
      interior_flags_(std::move(interior_vertex_flags)),
      regions_(std::move(regions)) {
  if (dim_ != 1 && dim_ != 2) throw ParameterError("mesh dimension must be 1 or 2");
  if (interior_flags_.size() != vertices_.size())
    throw ParameterError("interior flag count does not match vertex count");
  if (regions_.size() != elements_.size())
    throw ParameterError("region tag count does not match element count");
  if (elements_.empty()) throw ParameterError("mesh has no elements");

  num_interior_elements_ = static_cast<std::size_t>(
      std::find(regions_.begin(), regions_.end(), Region::HorizonLayer) - regions_.begin());

  vertex_elements_.assign(vertices_.size(), {});
  for (std::size_t e = 0; e < elements_.size(); ++e) {
    for (int k = 0; k <= dim_; ++k) {
      const int v = elements_[e][k];
      if (v < 0 || static_cast<std::size_t>(v) >= vertices_.size())
        throw ParameterError("element references a vertex out of range");
      vertex_elements_[v].push_back(static_cast<int>(e));
    }
  }

  dof_of_vertex_.assign(vertices_.size(), -1);
  for (std::size_t v = 0; v < vertices_.size(); ++v) {
    if (interior_flags_[v]) {
      dof_of_vertex_[v] = static_cast<int>(dof_vertices_.size());
      dof_vertices_.push_back(v);
    }
  }
  compute_geometry();
  validate();
}

void Mesh::compute_geometry() {
  measure_.resize(elements_.size());
  h_ = 0.0;
  double min_inradius = std::numeric_limits<double>::infinity();
  for (std::size_t e = 0; e < elements_.size(); ++e) {
    const auto& t = elements_[e];
    if (dim_ == 1) {
      measure_[e] = std::abs(vertices_[t[1]][0] - vertices_[t[0]][0]);
    } else {
      measure_[e] = std::abs(signed_area(vertices_[t[0]], vertices_[t[1]], vertices_[t[2]]));
    }
    h_ = std::max(h_, diameter(e));
    min_inradius = std::min(min_inradius, inradius(e));
  }
  quasi_uniformity_ = min_inradius > 0.0 ? h_ / min_inradius : std::numeric_limits<double>::infinity();

  horizon_width_ = 0.0;
  if (!has_horizon_layer()) return;
  std::vector<std::uint8_t> in_interior(vertices_.size(), 0);
  std::vector<std::uint8_t> in_layer(vertices_.size(), 0);
  for (std::size_t e = 0; e < elements_.size(); ++e)
    for (int k = 0; k <= dim_; ++k)
      (regions_[e] == Region::Interior ? in_interior : in_layer)[elements_[e][k]] = 1;

  if (dim_ == 1) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t v = 0; v < vertices_.size(); ++v)
      if (in_interior[v]) {
        lo = std::min(lo, vertices_[v][0]);
        hi = std::max(hi, vertices_[v][0]);
      }
    for (std::size_t v = 0; v < vertices_.size(); ++v)
      if (in_layer[v] && !in_interior[v])
        horizon_width_ = std::max(horizon_width_, std::max(lo - vertices_[v][0], vertices_[v][0] - hi));
    return;
  }
  Point c{0.0, 0.0};
  std::size_t nb = 0;
  for (std::size_t v = 0; v < vertices_.size(); ++v)
    if (in_interior[v] && in_layer[v]) {
      c[0] += vertices_[v][0];
      c[1] += vertices_[v][1];
      ++nb;
    }
  if (nb == 0) return;
  c[0] /= nb;
  c[1] /= nb;
  double inner = 0.0;
  double outer = 0.0;
  for (std::size_t v = 0; v < vertices_.size(); ++v) {
    if (in_interior[v] && in_layer[v]) inner += dist(vertices_[v], c) / nb;
    if (in_layer[v]) outer = std::max(outer, dist(vertices_[v], c));
  }
  horizon_width_ = outer - inner;
}

void Mesh::validate() const {
  for (std::size_t e = num_interior_elements_; e < regions_.size(); ++e)
    if (regions_[e] != Region::HorizonLayer)
      throw ParameterError("interior elements must precede horizon layer elements");
  const double scale = std::max(h_, 1e-300);
  for (std::size_t e = 0; e < elements_.size(); ++e)
    if (!(measure_[e] > 1e-14 * std::pow(scale, dim_)))
      throw ParameterError("degenerate element " + std::to_string(e));

  for (std::size_t v = 0; v < vertices_.size(); ++v) {
    if (!interior_flags_[v]) continue;
    bool in_interior = false;
    for (int e : vertex_elements_[v]) {
      if (regions_[e] == Region::HorizonLayer)
        throw ParameterError("vertex " + std::to_string(v) + " is flagged interior but touches the horizon layer");
      in_interior = true;
    }
    if (!in_interior) throw ParameterError("interior vertex " + std::to_string(v) + " has no element");
  }

  if (dim_ == 2) {
    std::map<std::pair<int, int>, int> edge_count;
    for (const auto& t : elements_)
      for (int k = 0; k < 3; ++k) {
        int a = t[k];
        int b = t[(k + 1) % 3];
        if (a > b) std::swap(a, b);
        if (++edge_count[{a, b}] > 2) throw ParameterError("non-conforming mesh: edge shared by more than two elements");
      }
  }
}

double Mesh::diameter(std::size_t e) const {
  const auto& t = elements_[e];
  if (dim_ == 1) return measure_[e];
  return std::max({dist(vertices_[t[0]], vertices_[t[1]]), dist(vertices_[t[1]], vertices_[t[2]]),
                   dist(vertices_[t[2]], vertices_[t[0]])});
}

double Mesh::inradius(std::size_t e) const {
  const auto& t = elements_[e];
  if (dim_ == 1) return 0.5 * measure_[e];
  const double perimeter = dist(vertices_[t[0]], vertices_[t[1]]) +
                           dist(vertices_[t[1]], vertices_[t[2]]) +
                           dist(vertices_[t[2]], vertices_[t[0]]);
  return 2.0 * measure_[e] / perimeter;
}

Point Mesh::centroid(std::size_t e) const {
  Point c{0.0, 0.0};
  for (int k = 0; k <= dim_; ++k) {
    c[0] += vertices_[elements_[e][k]][0];
    c[1] += vertices_[elements_[e][k]][1];
  }
  c[0] /= (dim_ + 1);
  c[1] /= (dim_ + 1);
  return c;
}

double Mesh::interior_measure() const {
  double sum = 0.0;
  for (std::size_t e = 0; e < num_interior_elements_; ++e) sum += measure_[e];
  return sum;
}

Mesh build_interval_mesh(double a_end, double b_end, int num_elements) {
  if (!(a_end < b_end)) throw ParameterError("interval mesh needs a_end < b_end");
  if (num_elements < 1) throw ParameterError("interval mesh needs at least one element");
  std::vector<Point> vertices;
  std::vector<std::uint8_t> flags;
  for (int i = 0; i <= num_elements; ++i) {
    const double x = i == num_elements ? b_end : a_end + (b_end - a_end) * i / num_elements;
    vertices.push_back({x, 0.0});
    flags.push_back(i > 0 && i < num_elements);
  }
  std::vector<Simplex> elements;
  for (int i = 0; i < num_elements; ++i) elements.push_back({i, i + 1, -1});
  std::vector<Region> regions(num_elements, Region::Interior);
  return Mesh(1, std::move(vertices), std::move(elements), std::move(flags), std::move(regions));
}

Mesh build_disk_mesh_rings(double radius, int rings) {
  if (!(radius > 0.0)) throw ParameterError("disk radius must be positive");
  if (rings < 1) throw ParameterError("disk mesh needs at least one ring");
  std::vector<Point> coords{{0.0, 0.0}};
  std::vector<Simplex> elements;
  std::vector<RingVertex> previous;
  for (int i = 1; i <= rings; ++i) {
    const double r = i == rings ? radius : radius * i / rings;
    auto ring = make_ring(coords, {0.0, 0.0}, r, 8 * i, 0.0);
    if (i == 1) {
      for (int k = 0; k < 8; ++k) {
        Simplex t{0, ring[k].index, ring[(k + 1) % 8].index};
        elements.push_back(t);
      }
    } else {
      zip_rings(previous, ring, coords, elements);
    }
    previous = std::move(ring);
  }
  std::vector<std::uint8_t> flags(coords.size(), 1);
  for (const auto& v : previous) flags[v.index] = 0;
  std::vector<Region> regions(elements.size(), Region::Interior);
  return Mesh(2, std::move(coords), std::move(elements), std::move(flags), std::move(regions));
}

Mesh build_disk_mesh(double radius, double target_h) {
  if (!(radius > 0.0)) throw ParameterError("disk radius must be positive");
  if (!(target_h > 0.0 && target_h < radius)) throw ParameterError("disk mesh needs 0 < target_h < radius");
  constexpr int max_rings = 512;
  // h scales like radius / rings; start from the estimate and walk up.
  int rings = std::max(1, static_cast<int>(std::floor(radius / target_h)));
  for (; rings <= max_rings; ++rings) {
    Mesh m = build_disk_mesh_rings(radius, rings);
    if (m.h() <= target_h) return m;
  }
  throw ParameterError("target_h unreachable: more than 512 rings required");
}

Mesh build_disk_mesh_for_dofs(double radius, std::size_t dofs) {
  const auto root = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(dofs))));
  if (root * root != dofs || root % 2 == 0)
    throw ParameterError("disk DOF count must be (2m-1)^2, got " + std::to_string(dofs));
  return build_disk_mesh_rings(radius, static_cast<int>((root + 1) / 2));
}

Mesh extend_with_horizon(const Mesh& mesh, double R) {
  if (!(R >= 0.0)) throw ParameterError("horizon must be nonnegative");
  if (R == 0.0) return mesh;
  if (mesh.has_horizon_layer()) throw ParameterError("mesh already has a horizon layer");

  std::vector<Point> coords = mesh.vertices();
  std::vector<Simplex> elements = mesh.elements();
  std::vector<Region> regions(elements.size(), Region::Interior);

  if (mesh.dimension() == 1) {
    double lo = coords[0][0];
    double hi = coords[0][0];
    int lo_v = 0;
    int hi_v = 0;
    for (std::size_t v = 0; v < coords.size(); ++v) {
      if (coords[v][0] < lo) { lo = coords[v][0]; lo_v = static_cast<int>(v); }
      if (coords[v][0] > hi) { hi = coords[v][0]; hi_v = static_cast<int>(v); }
    }
    const int layers = std::max(1, static_cast<int>(std::ceil(R / mesh.h() - 1e-9)));
    int prev_lo = lo_v;
    int prev_hi = hi_v;
    for (int j = 1; j <= layers; ++j) {
      const double off = j == layers ? R : R * j / layers;
      coords.push_back({lo - off, 0.0});
      elements.push_back({static_cast<int>(coords.size()) - 1, prev_lo, -1});
      prev_lo = static_cast<int>(coords.size()) - 1;
      coords.push_back({hi + off, 0.0});
      elements.push_back({prev_hi, static_cast<int>(coords.size()) - 1, -1});
      prev_hi = static_cast<int>(coords.size()) - 1;
      regions.push_back(Region::HorizonLayer);
      regions.push_back(Region::HorizonLayer);
    }
  } else {
    // Boundary edges belong to exactly one element.
    std::map<std::pair<int, int>, int> edge_count;
    for (const auto& t : elements)
      for (int k = 0; k < 3; ++k) {
        int a = t[k];
        int b = t[(k + 1) % 3];
        if (a > b) std::swap(a, b);
        ++edge_count[{a, b}];
      }
    std::vector<int> boundary;
    {
      std::vector<std::uint8_t> seen(coords.size(), 0);
      for (const auto& [edge, count] : edge_count)
        if (count == 1)
          for (int v : {edge.first, edge.second})
            if (!seen[v]) {
              seen[v] = 1;
              boundary.push_back(v);
            }
    }
    if (boundary.size() < 3) throw ParameterError("2D mesh has no closed boundary");
    Point c{0.0, 0.0};
    for (int v : boundary) {
      c[0] += coords[v][0] / boundary.size();
      c[1] += coords[v][1] / boundary.size();
    }
    double rho0 = 0.0;
    for (int v : boundary) rho0 += dist(coords[v], c) / boundary.size();
    for (int v : boundary)
      if (std::abs(dist(coords[v], c) - rho0) > 1e-9 * rho0)
        throw ParameterError("2D horizon extension requires the boundary to lie on a circle");

    std::vector<RingVertex> inner;
    for (int v : boundary) inner.push_back({v, normalized_angle(coords[v][0] - c[0], coords[v][1] - c[1])});
    std::sort(inner.begin(), inner.end(), [](const RingVertex& a, const RingVertex& b) { return a.angle < b.angle; });
    const double phase = inner.front().angle;
    double mean_edge = 0.0;
    for (std::size_t k = 0; k < inner.size(); ++k)
      mean_edge += dist(coords[inner[k].index], coords[inner[(k + 1) % inner.size()].index]) / inner.size();
    const int layers = std::max(1, static_cast<int>(std::ceil(R / mean_edge - 1e-9)));
    const int nb = static_cast<int>(inner.size());
    for (int j = 1; j <= layers; ++j) {
      const double r = j == layers ? rho0 + R : rho0 + R * j / layers;
      const int count = std::max(nb, static_cast<int>(std::lround(nb * r / rho0)));
      auto ring = make_ring(coords, c, r, count, phase);
      // Shift to a common angular origin so the zipper starts aligned.
      auto rebase = [phase](std::vector<RingVertex>& rv) {
        for (auto& x : rv) {
          x.angle -= phase;
          if (x.angle < 0.0) x.angle += 2.0 * std::numbers::pi;
          if (x.angle >= 2.0 * std::numbers::pi - 1e-12) x.angle = 0.0;
        }
        std::sort(rv.begin(), rv.end(), [](const RingVertex& a, const RingVertex& b) { return a.angle < b.angle; });
      };
      rebase(ring);
      if (j == 1) rebase(inner);
      zip_rings(inner, ring, coords, elements);
      regions.resize(elements.size(), Region::HorizonLayer);
      inner = std::move(ring);
    }
  }

  std::vector<std::uint8_t> flags(coords.size(), 0);
  for (std::size_t v = 0; v < mesh.num_vertices(); ++v) flags[v] = mesh.is_interior_vertex(v) ? 1 : 0;
  return Mesh(mesh.dimension(), std::move(coords), std::move(elements), std::move(flags), std::move(regions));
}

int shared_vertex_count(const Mesh& mesh, std::size_t e1, std::size_t e2) {
  const auto a = mesh.element(e1);
  const auto b = mesh.element(e2);
  int shared = 0;
  for (int va : a)
    for (int vb : b) shared += va == vb;
  return shared;
}

PairClass classify_pair(const Mesh& mesh, std::size_t e1, std::size_t e2) {
  if (e1 >= mesh.num_elements() || e2 >= mesh.num_elements())
    throw ParameterError("element index out of range");
  if (e1 == e2) return PairClass::Identical;
  switch (shared_vertex_count(mesh, e1, e2)) {
    case 0: return PairClass::Disjoint;
    case 1: return PairClass::VertexTouch;
    case 2: return mesh.dimension() == 2 ? PairClass::EdgeTouch : PairClass::Identical;
    default: return PairClass::Identical;
  }
}

namespace {

std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace

void write_mesh(std::ostream& out, const Mesh& mesh, std::span<const std::vector<double>> vertex_values,
                std::span<const std::vector<double>> element_values) {
  const int dim = mesh.dimension();
  out << dim << ' ' << mesh.num_vertices() << ' ' << mesh.num_elements() << '\n';
  for (std::size_t v = 0; v < mesh.num_vertices(); ++v) {
    out << format_double(mesh.vertex(v)[0]);
    if (dim == 2) out << ' ' << format_double(mesh.vertex(v)[1]);
    out << ' ' << (mesh.is_interior_vertex(v) ? 1 : 0);
    for (const auto& column : vertex_values) out << ' ' << format_double(column.at(v));
    out << '\n';
  }
  for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
    for (int v : mesh.element(e)) out << v << ' ';
    out << static_cast<int>(mesh.region(e));
    for (const auto& column : element_values) out << ' ' << format_double(column.at(e));
    out << '\n';
  }
}

std::string mesh_to_string(const Mesh& mesh) {
  std::ostringstream os;
  write_mesh(os, mesh);
  return os.str();
}

Mesh read_mesh(std::istream& in) {
  int dim = 0;
  std::size_t nv = 0;
  std::size_t ne = 0;
  if (!(in >> dim >> nv >> ne)) throw ParameterError("mesh file: bad header");
  if (dim != 1 && dim != 2) throw ParameterError("mesh file: dimension must be 1 or 2");
  std::string line;
  std::getline(in, line);
  std::vector<Point> coords(nv, {0.0, 0.0});
  std::vector<std::uint8_t> flags(nv);
  for (std::size_t v = 0; v < nv; ++v) {
    if (!std::getline(in, line)) throw ParameterError("mesh file: truncated vertex block");
    std::istringstream ls(line);
    int flag = 0;
    ls >> coords[v][0];
    if (dim == 2) ls >> coords[v][1];
    if (!(ls >> flag)) throw ParameterError("mesh file: bad vertex line " + std::to_string(v));
    flags[v] = flag != 0;
  }
  std::vector<Simplex> elements(ne, {-1, -1, -1});
  std::vector<Region> regions(ne);
  for (std::size_t e = 0; e < ne; ++e) {
    if (!std::getline(in, line)) throw ParameterError("mesh file: truncated element block");
    std::istringstream ls(line);
    for (int k = 0; k <= dim; ++k) ls >> elements[e][k];
    int tag = -1;
    if (!(ls >> tag) || (tag != 0 && tag != 1)) throw ParameterError("mesh file: bad element line " + std::to_string(e));
    regions[e] = static_cast<Region>(tag);
  }
  return Mesh(dim, std::move(coords), std::move(elements), std::move(flags), std::move(regions));
}

Mesh read_mesh_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParameterError("cannot open mesh file " + path);
  return read_mesh(in);
}

void write_mesh_file(const std::string& path, const Mesh& mesh) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParameterError("cannot write mesh file " + path);
  write_mesh(out, mesh);
}

std::array<std::uint8_t, 32> mesh_content_hash(const Mesh& mesh) {
  const std::string text = mesh_to_string(mesh);
  std::array<std::uint8_t, 32> digest{};
  SHA256(reinterpret_cast<const unsigned char*>(text.data()), text.size(), digest.data());
  return digest;
}

std::optional<std::size_t> locate_point(const Mesh& mesh, const Point& p, bool interior_only) {
  const std::size_t count = interior_only ? mesh.num_interior_elements() : mesh.num_elements();
  const double eps = 1e-12 * std::max(1.0, mesh.h());
  for (std::size_t e = 0; e < count; ++e) {
    const auto t = mesh.element(e);
    if (mesh.dimension() == 1) {
      const double a = std::min(mesh.vertex(t[0])[0], mesh.vertex(t[1])[0]);
      const double b = std::max(mesh.vertex(t[0])[0], mesh.vertex(t[1])[0]);
      if (p[0] >= a - eps && p[0] <= b + eps) return e;
      continue;
    }
    const Point& a = mesh.vertex(t[0]);
    const Point& b = mesh.vertex(t[1]);
    const Point& c = mesh.vertex(t[2]);
    if (p[0] < std::min({a[0], b[0], c[0]}) - eps || p[0] > std::max({a[0], b[0], c[0]}) + eps ||
        p[1] < std::min({a[1], b[1], c[1]}) - eps || p[1] > std::max({a[1], b[1], c[1]}) + eps)
      continue;
    const double area = signed_area(a, b, c);
    const double l0 = signed_area(p, b, c) / area;
    const double l1 = signed_area(a, p, c) / area;
    const double l2 = 1.0 - l0 - l1;
    const double tol = 1e-12;
    if (l0 >= -tol && l1 >= -tol && l2 >= -tol) return e;
  }
  return std::nullopt;
}

}  // namespace nld
