#include "pcle/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "pcle/error.hpp"
#include "pcle/rng.hpp"

namespace pcle {

// ---------------------------------------------------------------------------
// predicates

double orient2d(Point a, Point b, Point c) { return (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x); }

namespace {

struct Sign {
  double value;
  double bound;
};

Sign orient_with_bound(Point a, Point b, Point c) {
  const double l = (b.x - a.x) * (c.y - a.y);
  const double r = (b.y - a.y) * (c.x - a.x);
  return {l - r, (std::abs(l) + std::abs(r)) * 1e-14};
}

Sign incircle_with_bound(Point a, Point b, Point c, Point d) {
  const double adx = a.x - d.x, ady = a.y - d.y;
  const double bdx = b.x - d.x, bdy = b.y - d.y;
  const double cdx = c.x - d.x, cdy = c.y - d.y;
  const double alift = adx * adx + ady * ady;
  const double blift = bdx * bdx + bdy * bdy;
  const double clift = cdx * cdx + cdy * cdy;
  const double bc = bdx * cdy - bdy * cdx;
  const double ca = cdx * ady - cdy * adx;
  const double ab = adx * bdy - ady * bdx;
  const double det = alift * bc + blift * ca + clift * ab;
  const double perm = (std::abs(bdx * cdy) + std::abs(bdy * cdx)) * alift +
                      (std::abs(cdx * ady) + std::abs(cdy * adx)) * blift +
                      (std::abs(adx * bdy) + std::abs(ady * bdx)) * clift;
  return {det, perm * 1e-12};
}

int sign_of(Sign s) {
  if (s.value > s.bound) return 1;
  if (s.value < -s.bound) return -1;
  return 0;
}

}  // namespace

double incircle(Point a, Point b, Point c, Point d) { return incircle_with_bound(a, b, c, d).value; }

// ---------------------------------------------------------------------------
// pattern generation and fitting

void validate_pattern(const FibrePattern& pattern, double min_separation) {
  const double r2 = pattern.fov_radius * pattern.fov_radius * (1.0 + 1e-12) + 1e-12;
  for (std::size_t i = 0; i < pattern.size(); ++i) {
    const Point p = pattern.fibres[i];
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw GeometryError("non-finite fibre position");
    if (squared_distance(p, pattern.fov_center) > r2)
      throw GeometryError("fibre " + std::to_string(i) + " lies outside the field of view");
  }
  std::vector<std::size_t> order(pattern.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return pattern.fibres[a].x < pattern.fibres[b].x;
  });
  const double sep2 = min_separation * min_separation;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const Point p = pattern.fibres[order[i]];
    for (std::size_t j = i + 1; j < order.size(); ++j) {
      const Point q = pattern.fibres[order[j]];
      if (q.x - p.x >= min_separation) break;
      if (squared_distance(p, q) < sep2)
        throw GeometryError("fibres " + std::to_string(order[i]) + " and " + std::to_string(order[j]) +
                            " are closer than the minimum separation");
    }
  }
}

double hex_spacing_for_density(double pixels_per_fibre) {
  if (!(pixels_per_fibre > 0)) throw ConfigError("pixels per fibre must be positive");
  return std::sqrt(2.0 * pixels_per_fibre / std::sqrt(3.0));
}

FibrePattern generate_quasi_hex_pattern(int grid_w, int grid_h, double spacing, double jitter_frac,
                                        std::uint64_t seed, double min_separation) {
  if (grid_w <= 0 || grid_h <= 0) throw ConfigError("grid dimensions must be positive");
  if (!(spacing > 0) || !std::isfinite(spacing)) throw ConfigError("fibre spacing must be positive");
  if (!(jitter_frac >= 0.0 && jitter_frac < 0.5)) throw ConfigError("jitter fraction must lie in [0, 0.5)");

  FibrePattern out;
  out.width = grid_w;
  out.height = grid_h;
  out.fov_center = {grid_w / 2.0, grid_h / 2.0};
  out.fov_radius = std::min(grid_w, grid_h) / 2.0;

  const double row_step = spacing * std::sqrt(3.0) / 2.0;
  const int rows = static_cast<int>(std::ceil(out.fov_radius / row_step)) + 1;
  const int cols = static_cast<int>(std::ceil(out.fov_radius / spacing)) + 2;
  const double amp = jitter_frac * spacing;
  const double r2 = out.fov_radius * out.fov_radius;

  Rng rng(seed);
  std::uniform_real_distribution<double> jitter(-amp, amp);

  // hash of accepted fibres for the separation check
  const double cell = std::max(min_separation, spacing);
  std::unordered_map<std::int64_t, std::vector<int>> buckets;
  auto key = [&](Point p) {
    const auto cx = static_cast<std::int64_t>(std::floor(p.x / cell));
    const auto cy = static_cast<std::int64_t>(std::floor(p.y / cell));
    return (cx << 32) ^ (cy & 0xffffffff);
  };
  auto separated = [&](Point p) {
    const auto cx = static_cast<std::int64_t>(std::floor(p.x / cell));
    const auto cy = static_cast<std::int64_t>(std::floor(p.y / cell));
    for (std::int64_t dy = -1; dy <= 1; ++dy)
      for (std::int64_t dx = -1; dx <= 1; ++dx) {
        auto it = buckets.find(((cx + dx) << 32) ^ ((cy + dy) & 0xffffffff));
        if (it == buckets.end()) continue;
        for (int idx : it->second)
          if (squared_distance(out.fibres[idx], p) < min_separation * min_separation) return false;
      }
    return true;
  };

  for (int r = -rows; r <= rows; ++r) {
    const double y = out.fov_center.y + r * row_step;
    const double offset = (r % 2 != 0) ? spacing / 2.0 : 0.0;
    for (int q = -cols; q <= cols; ++q) {
      const Point site{out.fov_center.x + q * spacing + offset, y};
      for (int attempt = 0; attempt < 8; ++attempt) {
        Point p = site;
        if (amp > 0) {
          p.x += jitter(rng);
          p.y += jitter(rng);
        }
        if (squared_distance(p, out.fov_center) > r2) break;
        if (!separated(p)) continue;
        buckets[key(p)].push_back(static_cast<int>(out.fibres.size()));
        out.fibres.push_back(p);
        break;
      }
    }
  }
  if (out.fibres.size() < 3) throw GeometryError("fewer than 3 fibres inside the field of view");
  return out;
}

FibrePattern fit_pattern_to_grid(const FibrePattern& pattern, int grid_w, int grid_h) {
  if (grid_w <= 0 || grid_h <= 0) throw ConfigError("grid dimensions must be positive");
  const double dx = grid_w / 2.0 - pattern.fov_center.x;
  const double dy = grid_h / 2.0 - pattern.fov_center.y;
  FibrePattern out;
  out.width = grid_w;
  out.height = grid_h;
  out.fov_center = {grid_w / 2.0, grid_h / 2.0};
  out.fov_radius = pattern.fov_radius;
  out.fibres.reserve(pattern.size());
  for (const Point& f : pattern.fibres) {
    const Point p{f.x + dx, f.y + dy};
    if (p.x >= 0.0 && p.x < grid_w && p.y >= 0.0 && p.y < grid_h) out.fibres.push_back(p);
  }
  if (out.fibres.size() < 3)
    throw GeometryError("only " + std::to_string(out.fibres.size()) + " fibres survive fitting to a " +
                        std::to_string(grid_w) + "x" + std::to_string(grid_h) + " grid");
  return out;
}

FibrePattern scale_pattern(const FibrePattern& pattern, double factor) {
  FibrePattern out = pattern;
  for (Point& p : out.fibres) p = {p.x * factor, p.y * factor};
  out.fov_center = {pattern.fov_center.x * factor, pattern.fov_center.y * factor};
  out.fov_radius = pattern.fov_radius * factor;
  out.width = static_cast<int>(pattern.width * factor);
  out.height = static_cast<int>(pattern.height * factor);
  return out;
}

// ---------------------------------------------------------------------------
// Delaunay triangulation: Bowyer-Watson with ghost triangles. A ghost
// triangle has one vertex at infinity (kInf) and stands for a convex-hull edge,
// so points outside the current hull need no special casing.

namespace {

constexpr int kInf = -1;

struct Tri {
  std::array<int, 3> v;
  std::array<int, 3> n;  // n[i] is across the edge opposite v[i]
  bool alive = true;

  bool ghost() const { return v[0] == kInf || v[1] == kInf || v[2] == kInf; }
  int slot_of(int vertex) const { return v[0] == vertex ? 0 : (v[1] == vertex ? 1 : 2); }
};

class Triangulator {
 public:
  explicit Triangulator(const std::vector<Point>& pts) : pts_(pts) {}

  DelaunayMesh run() {
    const int n = static_cast<int>(pts_.size());
    if (n < 3) throw GeometryError("Delaunay triangulation needs at least 3 fibres");
    check_duplicates();
    const std::vector<int> order = insertion_order();
    start(order);
    for (int idx : order)
      if (!inserted_[idx]) insert(idx);
    resolve_cocircular();
    return extract();
  }

 private:
  const std::vector<Point>& pts_;
  std::vector<Tri> tris_;
  std::vector<char> inserted_;
  int last_ = 0;
  Rng walk_rng_{0x5eed};

  Point P(int i) const { return pts_[static_cast<std::size_t>(i)]; }

  void check_duplicates() const {
    std::vector<int> idx(pts_.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](int a, int b) {
      return P(a).x < P(b).x || (P(a).x == P(b).x && P(a).y < P(b).y);
    });
    for (std::size_t i = 1; i < idx.size(); ++i)
      if (P(idx[i]) == P(idx[i - 1]))
        throw GeometryError("duplicate fibre positions (" + std::to_string(idx[i - 1]) + ", " +
                            std::to_string(idx[i]) + ")");
  }

  // Snake order over a coarse grid keeps consecutive insertions close.
  std::vector<int> insertion_order() const {
    double minx = P(0).x, maxx = minx, miny = P(0).y, maxy = miny;
    for (const Point& p : pts_) {
      minx = std::min(minx, p.x);
      maxx = std::max(maxx, p.x);
      miny = std::min(miny, p.y);
      maxy = std::max(maxy, p.y);
    }
    const int cells = std::max(1, static_cast<int>(std::sqrt(static_cast<double>(pts_.size()) / 4.0)));
    const double w = std::max(maxx - minx, 1e-12);
    const double h = std::max(maxy - miny, 1e-12);
    std::vector<std::pair<long, int>> keyed;
    keyed.reserve(pts_.size());
    for (int i = 0; i < static_cast<int>(pts_.size()); ++i) {
      const int cy = std::min(cells - 1, static_cast<int>((P(i).y - miny) / h * cells));
      int cx = std::min(cells - 1, static_cast<int>((P(i).x - minx) / w * cells));
      if (cy % 2 == 1) cx = cells - 1 - cx;
      keyed.emplace_back(static_cast<long>(cy) * cells + cx, i);
    }
    std::stable_sort(keyed.begin(), keyed.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<int> order;
    order.reserve(keyed.size());
    for (const auto& k : keyed) order.push_back(k.second);
    return order;
  }

  void start(const std::vector<int>& order) {
    inserted_.assign(pts_.size(), 0);
    const int a = order[0];
    const int b = order[1];
    int c = -1;
    for (std::size_t k = 2; k < order.size(); ++k)
      if (sign_of(orient_with_bound(P(a), P(b), P(order[k]))) != 0) {
        c = order[k];
        break;
      }
    if (c < 0) throw GeometryError("all fibres are collinear");
    if (sign_of(orient_with_bound(P(a), P(b), P(c))) < 0)
      make_first(a, c, b);
    else
      make_first(a, b, c);
  }

  void make_first(int a, int b, int c) {
    // real triangle 0, ghosts 1..3 (ghost k+1 sits across the edge opposite vertex k)
    tris_.push_back({{a, b, c}, {1, 2, 3}});
    const std::array<int, 3> v{a, b, c};
    for (int k = 0; k < 3; ++k) {
      const int u = v[(k + 1) % 3];
      const int w = v[(k + 2) % 3];
      // ghost (w, u, inf): n[2] is the real triangle; n[0] across (u, inf), n[1] across (inf, w)
      tris_.push_back({{w, u, kInf}, {-1, -1, 0}});
    }
    link_ghosts();
    inserted_[a] = inserted_[b] = inserted_[c] = 1;
    last_ = 0;
  }

  void link_ghosts() {
    // ghost for edge (w,u) shares edge (u, inf) with the ghost whose real edge starts at u
    for (int g = 1; g <= 3; ++g) {
      for (int h = 1; h <= 3; ++h) {
        if (g == h) continue;
        if (tris_[h].v[0] == tris_[g].v[1]) tris_[g].n[0] = h;  // edge (u, inf)
        if (tris_[h].v[1] == tris_[g].v[0]) tris_[g].n[1] = h;  // edge (inf, w)
      }
    }
  }

  bool in_conflict(const Tri& t, Point p) const {
    if (!t.ghost()) return sign_of(incircle_with_bound(P(t.v[0]), P(t.v[1]), P(t.v[2]), p)) > 0;
    const int k = t.slot_of(kInf);
    const Point a = P(t.v[(k + 1) % 3]);
    const Point b = P(t.v[(k + 2) % 3]);
    const int s = sign_of(orient_with_bound(a, b, p));
    if (s > 0) return true;
    if (s < 0) return false;
    // collinear with the hull edge: conflicting only strictly inside the segment
    const double t_along = (p.x - a.x) * (b.x - a.x) + (p.y - a.y) * (b.y - a.y);
    return t_along > 0 && t_along < squared_distance(a, b);
  }

  int locate(Point p) {
    int t = last_;
    if (!tris_[t].alive || tris_[t].ghost()) {
      t = -1;
      for (int i = static_cast<int>(tris_.size()) - 1; i >= 0; --i)
        if (tris_[i].alive && !tris_[i].ghost()) {
          t = i;
          break;
        }
    }
    const int max_steps = 4 * static_cast<int>(tris_.size()) + 16;
    for (int step = 0; step < max_steps; ++step) {
      const Tri& tri = tris_[t];
      if (tri.ghost()) return t;
      const int first = static_cast<int>(walk_rng_() % 3);
      int next = -1;
      for (int e = 0; e < 3; ++e) {
        const int i = (first + e) % 3;
        const Point a = P(tri.v[(i + 1) % 3]);
        const Point b = P(tri.v[(i + 2) % 3]);
        if (orient2d(a, b, p) < 0) {
          next = tri.n[i];
          break;
        }
      }
      if (next < 0) return t;
      t = next;
    }
    return -1;
  }

  void insert(int idx) {
    const Point p = P(idx);
    int seed = locate(p);
    if (seed < 0 || !in_conflict(tris_[seed], p)) {
      seed = -1;
      for (int i = 0; i < static_cast<int>(tris_.size()); ++i)
        if (tris_[i].alive && in_conflict(tris_[i], p)) {
          seed = i;
          break;
        }
      if (seed < 0) throw GeometryError("Delaunay insertion failed for fibre " + std::to_string(idx));
    }

    struct Boundary {
      int a, b;    // directed edge of the cavity, cavity on its left
      int outer;   // triangle across the edge
    };
    std::vector<int> cavity{seed};
    std::vector<Boundary> boundary;
    std::vector<int> stack{seed};
    std::unordered_map<int, char> state;  // 1 = cavity, 2 = kept
    state[seed] = 1;
    while (!stack.empty()) {
      const int t = stack.back();
      stack.pop_back();
      for (int i = 0; i < 3; ++i) {
        const int nb = tris_[t].n[i];
        auto it = state.find(nb);
        if (it == state.end()) {
          const bool conflict = in_conflict(tris_[nb], p);
          state[nb] = conflict ? 1 : 2;
          if (conflict) {
            cavity.push_back(nb);
            stack.push_back(nb);
            continue;
          }
        } else if (it->second == 1) {
          continue;
        }
        boundary.push_back({tris_[t].v[(i + 1) % 3], tris_[t].v[(i + 2) % 3], nb});
      }
    }

    for (int t : cavity) tris_[t].alive = false;
    std::unordered_map<int, int> by_start;  // boundary edge start vertex -> new triangle
    std::vector<int> created;
    created.reserve(boundary.size());
    for (const Boundary& e : boundary) {
      const int id = static_cast<int>(tris_.size());
      tris_.push_back({{e.a, e.b, idx}, {-1, -1, e.outer}});
      Tri& outer = tris_[e.outer];
      for (int i = 0; i < 3; ++i)
        if (outer.v[i] != e.a && outer.v[i] != e.b) outer.n[i] = id;
      by_start[e.a] = id;
      created.push_back(id);
    }
    for (int id : created) {
      Tri& t = tris_[id];
      const int other = by_start.at(t.v[1]);  // its edge (p, v1) mirrors our (v1, p)
      t.n[0] = other;
      tris_[other].n[1] = id;
      if (!t.ghost()) last_ = id;
    }
    inserted_[idx] = 1;
  }

  // Flip every cocircular diagonal so that it touches the lowest-index vertex of
  // its quadrilateral.
  void resolve_cocircular() {
    compact();
    for (int pass = 0; pass < 64; ++pass) {
      bool changed = false;
      for (int t = 0; t < static_cast<int>(tris_.size()); ++t) {
        if (tris_[t].ghost()) continue;
        for (int i = 0; i < 3; ++i) {
          const int u = tris_[t].n[i];
          if (u < t || tris_[u].ghost()) continue;
          const int a = tris_[t].v[i];
          const int b = tris_[t].v[(i + 1) % 3];
          const int c = tris_[t].v[(i + 2) % 3];
          int d = -1;
          for (int k = 0; k < 3; ++k)
            if (tris_[u].v[k] != b && tris_[u].v[k] != c) d = tris_[u].v[k];
          if (sign_of(incircle_with_bound(P(tris_[t].v[0]), P(tris_[t].v[1]), P(tris_[t].v[2]), P(d))) != 0) continue;
          const int lowest = std::min({a, b, c, d});
          if (lowest == b || lowest == c) continue;
          if (sign_of(orient_with_bound(P(a), P(b), P(d))) <= 0 || sign_of(orient_with_bound(P(a), P(d), P(c))) <= 0)
            continue;
          flip(t, i, u);
          changed = true;
        }
      }
      if (!changed) break;
    }
  }

  // t = (a, b, c) with the shared edge (b, c) opposite slot i; u holds (c, b, d).
  // Result: t = (a, b, d), u = (a, d, c).
  void flip(int t, int i, int u) {
    const int a = tris_[t].v[i];
    const int b = tris_[t].v[(i + 1) % 3];
    const int c = tris_[t].v[(i + 2) % 3];
    const int sd = [&] {
      for (int k = 0; k < 3; ++k)
        if (tris_[u].v[k] != b && tris_[u].v[k] != c) return k;
      return 0;
    }();
    const int d = tris_[u].v[sd];
    const int n_ab = tris_[t].n[(i + 2) % 3];  // across edge (a, b)
    const int n_ca = tris_[t].n[(i + 1) % 3];  // across edge (c, a)
    const int n_bd = tris_[u].n[tris_[u].slot_of(c)];  // across edge (b, d)
    const int n_dc = tris_[u].n[tris_[u].slot_of(b)];  // across edge (d, c)

    tris_[t].v = {a, b, d};
    tris_[t].n = {n_bd, u, n_ab};
    tris_[u].v = {a, d, c};
    tris_[u].n = {n_dc, n_ca, t};
    relink(n_bd, u, t);
    relink(n_ca, t, u);
  }

  void relink(int tri, int from, int to) {
    for (int k = 0; k < 3; ++k)
      if (tris_[tri].n[k] == from) tris_[tri].n[k] = to;
  }

  void compact() {
    std::vector<int> remap(tris_.size(), -1);
    std::vector<Tri> kept;
    kept.reserve(tris_.size() / 2);
    for (std::size_t i = 0; i < tris_.size(); ++i)
      if (tris_[i].alive) {
        remap[i] = static_cast<int>(kept.size());
        kept.push_back(tris_[i]);
      }
    for (Tri& t : kept)
      for (int& nb : t.n) nb = remap[nb];
    tris_ = std::move(kept);
  }

  DelaunayMesh extract() const {
    DelaunayMesh mesh;
    mesh.vertex_count = pts_.size();
    for (const Tri& t : tris_) {
      if (t.ghost()) continue;
      // smallest index first
      std::array<int, 3> v = t.v;
      while (v[0] != std::min({v[0], v[1], v[2]})) std::rotate(v.begin(), v.begin() + 1, v.end());
      mesh.triangles.push_back({v});
    }
    std::sort(mesh.triangles.begin(), mesh.triangles.end(),
              [](const Triangle& x, const Triangle& y) { return x.v < y.v; });
    mesh.planes.reserve(mesh.triangles.size());
    for (const Triangle& t : mesh.triangles) {
      const Point p0 = P(t.v[0]), p1 = P(t.v[1]), p2 = P(t.v[2]);
      const double area2 = orient2d(p0, p1, p2);
      BarycentricPlane pl{};
      const std::array<Point, 3> q{p0, p1, p2};
      for (int k = 0; k < 3; ++k) {
        const Point s = q[(k + 1) % 3];
        const Point e = q[(k + 2) % 3];
        pl.a[k] = -(e.y - s.y) / area2;
        pl.b[k] = (e.x - s.x) / area2;
        pl.c[k] = ((e.y - s.y) * s.x - (e.x - s.x) * s.y) / area2;
      }
      mesh.planes.push_back(pl);
    }
    return mesh;
  }
};

}  // namespace

std::vector<std::pair<int, int>> DelaunayMesh::edges() const {
  std::vector<std::pair<int, int>> out;
  out.reserve(triangles.size() * 3);
  for (const Triangle& t : triangles)
    for (int k = 0; k < 3; ++k) {
      const int a = t.v[k];
      const int b = t.v[(k + 1) % 3];
      out.emplace_back(std::min(a, b), std::max(a, b));
    }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

DelaunayMesh delaunay(const FibrePattern& pattern) { return Triangulator(pattern.fibres).run(); }

std::vector<int> rasterize_mesh(const DelaunayMesh& mesh, const FibrePattern& pattern, int grid_w, int grid_h) {
  std::vector<int> owner(static_cast<std::size_t>(grid_w) * grid_h, -1);
  constexpr double kEdgeTol = 1e-12;
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const auto& v = mesh.triangles[t].v;
    const Point p0 = pattern.fibres[v[0]], p1 = pattern.fibres[v[1]], p2 = pattern.fibres[v[2]];
    const double minx = std::min({p0.x, p1.x, p2.x}), maxx = std::max({p0.x, p1.x, p2.x});
    const double miny = std::min({p0.y, p1.y, p2.y}), maxy = std::max({p0.y, p1.y, p2.y});
    const int x0 = std::max(0, static_cast<int>(std::ceil(minx - 0.5 - 1e-9)));
    const int x1 = std::min(grid_w - 1, static_cast<int>(std::floor(maxx - 0.5 + 1e-9)));
    const int y0 = std::max(0, static_cast<int>(std::ceil(miny - 0.5 - 1e-9)));
    const int y1 = std::min(grid_h - 1, static_cast<int>(std::floor(maxy - 0.5 + 1e-9)));
    const BarycentricPlane& pl = mesh.planes[t];
    for (int y = y0; y <= y1; ++y) {
      const double cy = y + 0.5;
      for (int x = x0; x <= x1; ++x) {
        int& o = owner[static_cast<std::size_t>(y) * grid_w + x];
        if (o >= 0) continue;
        const double cx = x + 0.5;
        bool inside = true;
        for (int k = 0; k < 3 && inside; ++k) inside = pl.a[k] * cx + pl.b[k] * cy + pl.c[k] >= -kEdgeTol;
        if (inside) o = static_cast<int>(t);
      }
    }
  }
  return owner;
}

// ---------------------------------------------------------------------------
// Voronoi labels

VoronoiLabelMap voronoi_labels(const FibrePattern& pattern, int grid_w, int grid_h, LabelRegion region) {
  if (grid_w <= 0 || grid_h <= 0) throw ConfigError("grid dimensions must be positive");
  if (pattern.fibres.empty()) throw GeometryError("empty fibre pattern");
  VoronoiLabelMap map;
  map.width = grid_w;
  map.height = grid_h;
  map.labels.assign(static_cast<std::size_t>(grid_w) * grid_h, kOutsideLabel);
  map.cell_sizes.assign(pattern.size(), 0);

  std::vector<char> wanted(map.labels.size(), 1);
  if (region == LabelRegion::convex_hull) {
    const DelaunayMesh mesh = delaunay(pattern);
    const std::vector<int> owner = rasterize_mesh(mesh, pattern, grid_w, grid_h);
    for (std::size_t i = 0; i < owner.size(); ++i) wanted[i] = owner[i] >= 0;
  }

  // bucket grid over the union of the fibre bounding box and the raster
  double minx = 0.0, miny = 0.0, maxx = grid_w, maxy = grid_h;
  for (const Point& p : pattern.fibres) {
    minx = std::min(minx, p.x);
    miny = std::min(miny, p.y);
    maxx = std::max(maxx, p.x);
    maxy = std::max(maxy, p.y);
  }
  const double area = (maxx - minx) * (maxy - miny);
  const double cell = std::max(1.0, std::sqrt(area / static_cast<double>(pattern.size())));
  const int bw = static_cast<int>((maxx - minx) / cell) + 1;
  const int bh = static_cast<int>((maxy - miny) / cell) + 1;
  std::vector<std::vector<int>> buckets(static_cast<std::size_t>(bw) * bh);
  auto bucket_x = [&](double x) { return std::clamp(static_cast<int>((x - minx) / cell), 0, bw - 1); };
  auto bucket_y = [&](double y) { return std::clamp(static_cast<int>((y - miny) / cell), 0, bh - 1); };
  for (int i = 0; i < static_cast<int>(pattern.size()); ++i)
    buckets[static_cast<std::size_t>(bucket_y(pattern.fibres[i].y)) * bw + bucket_x(pattern.fibres[i].x)].push_back(i);

  const int max_ring = std::max(bw, bh);
  for (int y = 0; y < grid_h; ++y) {
    for (int x = 0; x < grid_w; ++x) {
      const std::size_t pix = static_cast<std::size_t>(y) * grid_w + x;
      if (!wanted[pix]) continue;
      const Point c{x + 0.5, y + 0.5};
      const int bx = bucket_x(c.x);
      const int by = bucket_y(c.y);
      double best = std::numeric_limits<double>::infinity();
      int best_idx = -1;
      for (int r = 0; r <= max_ring; ++r) {
        for (int yy = by - r; yy <= by + r; ++yy) {
          if (yy < 0 || yy >= bh) continue;
          const bool edge_row = (yy == by - r || yy == by + r);
          for (int xx = bx - r; xx <= bx + r; xx += (edge_row || r == 0) ? 1 : 2 * r) {
            if (xx < 0 || xx >= bw) continue;
            for (int idx : buckets[static_cast<std::size_t>(yy) * bw + xx]) {
              const double d2 = squared_distance(c, pattern.fibres[idx]);
              if (d2 < best || (d2 == best && idx < best_idx)) {
                best = d2;
                best_idx = idx;
              }
            }
          }
        }
        // anything not yet visited is at least r * cell away
        const double reach = r * cell;
        if (best_idx >= 0 && best < reach * reach * (1.0 - 1e-12)) break;
      }
      map.labels[pix] = best_idx;
      ++map.cell_sizes[static_cast<std::size_t>(best_idx)];
    }
  }
  return map;
}

// ---------------------------------------------------------------------------
// pattern file

std::string pattern_to_json(const FibrePattern& pattern) {
  nlohmann::json j;
  j["width"] = pattern.width;
  j["height"] = pattern.height;
  j["fov_center"] = {pattern.fov_center.x, pattern.fov_center.y};
  j["fov_radius"] = pattern.fov_radius;
  nlohmann::json fibres = nlohmann::json::array();
  for (const Point& p : pattern.fibres) fibres.push_back({p.x, p.y});
  j["fibres"] = std::move(fibres);
  return j.dump(1);
}

FibrePattern pattern_from_json(const std::string& text) {
  try {
    const nlohmann::json j = nlohmann::json::parse(text);
    FibrePattern p;
    p.width = j.at("width").get<int>();
    p.height = j.at("height").get<int>();
    p.fov_center = {j.at("fov_center").at(0).get<double>(), j.at("fov_center").at(1).get<double>()};
    p.fov_radius = j.at("fov_radius").get<double>();
    for (const auto& f : j.at("fibres")) p.fibres.push_back({f.at(0).get<double>(), f.at(1).get<double>()});
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed fibre pattern: ") + e.what());
  }
}

void save_pattern(const std::filesystem::path& path, const FibrePattern& pattern) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << pattern_to_json(pattern) << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

FibrePattern load_pattern(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return pattern_from_json(ss.str());
}

}  // namespace pcle
