#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace pcle {

struct Point {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Point&) const = default;
};

inline double squared_distance(Point a, Point b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  return dx * dx + dy * dy;
}

/// Scattered fibre positions of a fibre bundle in continuous pixel units,
/// plus the circular field of view they were drawn in. `width`/`height`
/// record the grid the pattern is currently associated with (0 when unknown).
struct FibrePattern {
  std::vector<Point> fibres;
  Point fov_center;
  double fov_radius = 0.0;
  int width = 0;
  int height = 0;

  std::size_t size() const { return fibres.size(); }
  bool operator==(const FibrePattern&) const = default;
};

/// Checks the FibrePattern invariants: every fibre inside the FoV disc and no
/// pair closer than min_separation. Throws GeometryError on violation.
void validate_pattern(const FibrePattern& pattern, double min_separation = 1e-6);

/// Spacing giving `pixels_per_fibre` grid pixels per fibre on a hexagonal lattice.
double hex_spacing_for_density(double pixels_per_fibre);

/// Jittered hexagonal lattice clipped to the disc inscribed in the grid.
/// Throws ConfigError on bad arguments and GeometryError when fewer than 3
/// fibres survive.
FibrePattern generate_quasi_hex_pattern(int grid_w, int grid_h, double spacing, double jitter_frac,
                                        std::uint64_t seed, double min_separation = 1e-3);

/// Translates the FoV centre to the grid centre and drops fibres that fall
/// outside [0, w) x [0, h).
FibrePattern fit_pattern_to_grid(const FibrePattern& pattern, int grid_w, int grid_h);

/// Uniform scaling of all coordinates (used to move a pattern between grids
/// that differ by an integer factor).
FibrePattern scale_pattern(const FibrePattern& pattern, double factor);

struct Triangle {
  std::array<int, 3> v;  // counter-clockwise fibre indices
};

/// Affine map from a pixel position to the barycentric weights of one
/// triangle: w_i = a_i * x + b_i * y + c_i.
struct BarycentricPlane {
  std::array<double, 3> a;
  std::array<double, 3> b;
  std::array<double, 3> c;
};

struct DelaunayMesh {
  std::vector<Triangle> triangles;
  std::vector<BarycentricPlane> planes;
  std::size_t vertex_count = 0;

  /// Sorted unique undirected edges (i < j).
  std::vector<std::pair<int, int>> edges() const;
};

/// Delaunay triangulation of the fibre positions. Cocircular configurations are
/// resolved so that the diagonal of every cocircular quadrilateral touches the
/// lowest-index vertex of the four. Throws GeometryError when fewer than 3
/// fibres are given, when all fibres are collinear, or on duplicate positions.
DelaunayMesh delaunay(const FibrePattern& pattern);

/// Orientation predicate (twice the signed area of abc).
double orient2d(Point a, Point b, Point c);
/// Positive when d lies strictly inside the circumcircle of the ccw triangle abc.
double incircle(Point a, Point b, Point c, Point d);

/// For every pixel centre covered by the mesh, the index of the covering
/// triangle (-1 elsewhere). Pixels on shared edges go to the lowest triangle index.
std::vector<int> rasterize_mesh(const DelaunayMesh& mesh, const FibrePattern& pattern, int grid_w, int grid_h);

enum class LabelRegion { convex_hull, full_rectangle };

inline constexpr int kOutsideLabel = -1;

struct VoronoiLabelMap {
  int width = 0;
  int height = 0;
  std::vector<int> labels;            // fibre index or kOutsideLabel
  std::vector<std::size_t> cell_sizes;  // labelled pixel count per fibre

  int at(int x, int y) const { return labels[static_cast<std::size_t>(y) * width + x]; }
};

/// Nearest-fibre label for every pixel centre in the requested region; ties go
/// to the lowest fibre index.
VoronoiLabelMap voronoi_labels(const FibrePattern& pattern, int grid_w, int grid_h,
                               LabelRegion region = LabelRegion::convex_hull);

/// Fibre pattern file (JSON):
///   {"width": W, "height": H, "fov_center": [x, y], "fov_radius": r, "fibres": [[x, y], ...]}
void save_pattern(const std::filesystem::path& path, const FibrePattern& pattern);
FibrePattern load_pattern(const std::filesystem::path& path);
std::string pattern_to_json(const FibrePattern& pattern);
FibrePattern pattern_from_json(const std::string& text);

}  // namespace pcle
