//
// Project     : tps
// Module      : geometry
// Description : domains, node generators, fill and separation distances
//

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <tps/types.hpp>

namespace tps {

struct Box {
    Point lo{0.0, 0.0};
    Point hi{0.0, 0.0};

    double diameter() const { return (hi - lo).norm(); }

    /// Euclidean distance between two boxes (0 if they touch or overlap).
    static double distance(const Box& a, const Box& b) {
        double s = 0.0;
        for (int ax = 0; ax < 2; ++ax) {
            const double gap = std::max({a.lo[ax] - b.hi[ax], b.lo[ax] - a.hi[ax], 0.0});
            s += gap * gap;
        }
        return std::sqrt(s);
    }
};

enum class DomainKind { UnitSquare, LShape };

inline double point_segment_distance(const Point& p, const Point& a, const Point& b) {
    const Point ab = b - a;
    const double len2 = ab.squaredNorm();
    if (len2 == 0.0)
        return (p - a).norm();
    const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
    return (p - (a + t * ab)).norm();
}

/// The two benchmark geometries. Both have piecewise-linear boundaries, so
/// membership and distance-to-boundary are exact.
///
/// UnitSquare is the closed square [0,1]^2. LShape is the closure of
/// (-1/2,1/2)^2 minus the quadrant [0,1/2]^2: a point belongs to it iff it
/// lies in the bounding square and has x <= 0 or y <= 0. The reentrant
/// segments x=0, y in [0,1/2] and y=0, x in [0,1/2] are part of the domain;
/// the removed quadrant's outer corner (1/2,1/2) is not.
class Domain {
  public:
    explicit Domain(DomainKind kind) : kind_(kind) {}

    static Domain unit_square() { return Domain(DomainKind::UnitSquare); }
    static Domain l_shape() { return Domain(DomainKind::LShape); }

    DomainKind kind() const { return kind_; }

    bool contains(const Point& p) const {
        if (kind_ == DomainKind::UnitSquare)
            return p.x() >= 0.0 && p.x() <= 1.0 && p.y() >= 0.0 && p.y() <= 1.0;
        return p.x() >= -0.5 && p.x() <= 0.5 && p.y() >= -0.5 && p.y() <= 0.5 &&
               (p.x() <= 0.0 || p.y() <= 0.0);
    }

    Box bounding_box() const {
        if (kind_ == DomainKind::UnitSquare)
            return {Point(0.0, 0.0), Point(1.0, 1.0)};
        return {Point(-0.5, -0.5), Point(0.5, 0.5)};
    }

    double diameter() const {
        return kind_ == DomainKind::UnitSquare ? std::sqrt(2.0) : std::sqrt(2.0);
    }

    /// Deepest interior point distance (inradius).
    double inradius() const { return kind_ == DomainKind::UnitSquare ? 0.5 : 0.25; }

    /// Closed boundary polygon, counter-clockwise.
    std::vector<Point> boundary_polygon() const {
        if (kind_ == DomainKind::UnitSquare)
            return {Point(0, 0), Point(1, 0), Point(1, 1), Point(0, 1)};
        return {Point(-0.5, -0.5), Point(0.5, -0.5), Point(0.5, 0.0),
                Point(0.0, 0.0),   Point(0.0, 0.5),  Point(-0.5, 0.5)};
    }

    double dist_to_boundary(const Point& p) const {
        const auto poly = boundary_polygon();
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < poly.size(); ++i) {
            const Point& a = poly[i];
            const Point& b = poly[(i + 1) % poly.size()];
            best = std::min(best, point_segment_distance(p, a, b));
        }
        return best;
    }

  private:
    DomainKind kind_;
};

inline std::string domain_name(DomainKind k) {
    return k == DomainKind::UnitSquare ? "square" : "lshape";
}

/// Uniform hash grid over 2D points supporting incremental insertion,
/// radius queries and nearest-neighbor distance queries.
class HashGrid2D {
  public:
    HashGrid2D() = default;
    explicit HashGrid2D(double cell) : cell_(cell) {}

    double cell_size() const { return cell_; }
    std::size_t size() const { return points_.size(); }

    void insert(const Point& p) {
        const int ix = cellx(p.x()), iy = celly(p.y());
        cells_[key(ix, iy)].push_back(static_cast<int>(points_.size()));
        points_.push_back(p);
        min_ix_ = std::min(min_ix_, ix);
        max_ix_ = std::max(max_ix_, ix);
        min_iy_ = std::min(min_iy_, iy);
        max_iy_ = std::max(max_iy_, iy);
    }

    bool any_within(const Point& p, double r) const {
        if (points_.empty())
            return false;
        const double r2 = r * r;
        const int ix0 = cellx(p.x() - r), ix1 = cellx(p.x() + r);
        const int iy0 = celly(p.y() - r), iy1 = celly(p.y() + r);
        for (int ix = ix0; ix <= ix1; ++ix)
            for (int iy = iy0; iy <= iy1; ++iy) {
                auto it = cells_.find(key(ix, iy));
                if (it == cells_.end())
                    continue;
                for (int idx : it->second)
                    if ((points_[idx] - p).squaredNorm() < r2)
                        return true;
            }
        return false;
    }

    /// Distance to the nearest stored point (infinity when empty).
    /// `skip` excludes one stored index (for self-queries).
    double nearest_dist(const Point& p, int skip = -1) const {
        if (points_.empty())
            return std::numeric_limits<double>::infinity();
        double best2 = std::numeric_limits<double>::infinity();
        const int cx = cellx(p.x()), cy = celly(p.y());
        const int max_ring = std::max({cx - min_ix_, max_ix_ - cx, cy - min_iy_, max_iy_ - cy}) + 1;
        for (int ring = 0; ring <= max_ring; ++ring) {
            // cells at Chebyshev ring distance r only hold points farther
            // than (r-1)*cell, so a good enough hit ends the search
            const double lower = (ring - 1) * cell_;
            if (lower > 0.0 && lower * lower >= best2)
                break;
            for (int ix = cx - ring; ix <= cx + ring; ++ix)
                for (int iy = cy - ring; iy <= cy + ring; ++iy) {
                    if (std::max(std::abs(ix - cx), std::abs(iy - cy)) != ring)
                        continue;
                    auto it = cells_.find(key(ix, iy));
                    if (it == cells_.end())
                        continue;
                    for (int idx : it->second) {
                        if (idx == skip)
                            continue;
                        best2 = std::min(best2, (points_[idx] - p).squaredNorm());
                    }
                }
        }
        return std::sqrt(best2);
    }

  private:
    static std::int64_t key(int ix, int iy) {
        return (static_cast<std::int64_t>(ix) << 32) ^ (static_cast<std::uint32_t>(iy));
    }
    int cellx(double x) const { return static_cast<int>(std::floor(x / cell_)); }
    int celly(double y) const { return static_cast<int>(std::floor(y / cell_)); }

    double cell_ = 1.0;
    int min_ix_ = std::numeric_limits<int>::max(), max_ix_ = std::numeric_limits<int>::min();
    int min_iy_ = std::numeric_limits<int>::max(), max_iy_ = std::numeric_limits<int>::min();
    std::unordered_map<std::int64_t, std::vector<int>> cells_;
    std::vector<Point> points_;
};

struct NodeSet {
    std::vector<Point> points;
    Domain domain{DomainKind::UnitSquare};
    double h = 0.0;  ///< fill distance (sampled)
    double q = 0.0;  ///< separation distance

    int size() const { return static_cast<int>(points.size()); }
};

namespace detail {

inline HashGrid2D build_query_grid(const std::vector<Point>& pts, const Box& bbox) {
    // degenerate extents (collinear points) must not shrink the cells
    const double extent =
        std::max({bbox.hi.x() - bbox.lo.x(), bbox.hi.y() - bbox.lo.y(), 1e-12});
    const double cell = extent / std::ceil(std::sqrt(static_cast<double>(pts.size()) + 1.0));
    HashGrid2D grid(cell);
    for (const auto& p : pts)
        grid.insert(p);
    return grid;
}

}  // namespace detail

/// Sup over a resolution x resolution domain sample grid of the distance to
/// the nearest node. The sample grid includes the bounding-box edges.
inline double fill_distance(const NodeSet& nodes, int resolution = 512) {
    if (resolution < 64)
        throw std::invalid_argument("fill_distance: resolution must be >= 64");
    if (nodes.points.empty())
        throw std::invalid_argument("fill_distance: empty node set");
    const Box bbox = nodes.domain.bounding_box();
    HashGrid2D grid = detail::build_query_grid(nodes.points, bbox);
    double sup = 0.0;
    for (int iy = 0; iy < resolution; ++iy) {
        const double y = bbox.lo.y() + (bbox.hi.y() - bbox.lo.y()) * iy / (resolution - 1);
        for (int ix = 0; ix < resolution; ++ix) {
            const double x = bbox.lo.x() + (bbox.hi.x() - bbox.lo.x()) * ix / (resolution - 1);
            const Point p(x, y);
            if (!nodes.domain.contains(p))
                continue;
            sup = std::max(sup, grid.nearest_dist(p));
        }
    }
    return sup;
}

/// Exact minimal pairwise distance.
inline double separation_distance(const std::vector<Point>& pts) {
    if (pts.size() < 2)
        throw std::invalid_argument("separation_distance: need at least 2 points");
    Point lo = pts.front(), hi = pts.front();
    for (const auto& p : pts) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    HashGrid2D grid = detail::build_query_grid(pts, Box{lo, hi});
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < pts.size(); ++i)
        best = std::min(best, grid.nearest_dist(pts[i], static_cast<int>(i)));
    return best;
}

inline double separation_distance(const NodeSet& nodes) { return separation_distance(nodes.points); }

namespace detail {

inline void finalize(NodeSet& ns, int fill_resolution = 512) {
    ns.h = fill_distance(ns, fill_resolution);
    ns.q = ns.points.size() >= 2 ? separation_distance(ns.points)
                                 : std::numeric_limits<double>::infinity();
}

}  // namespace detail

/// Tensor grid of spacing 1/(n-1) on the bounding square, restricted to the
/// closed domain.
inline NodeSet uniform_nodes(const Domain& domain, int n) {
    if (n < 2)
        throw std::invalid_argument("uniform_nodes: n must be >= 2");
    const Box bbox = domain.bounding_box();
    NodeSet ns;
    ns.domain = domain;
    for (int iy = 0; iy < n; ++iy)
        for (int ix = 0; ix < n; ++ix) {
            const Point p(bbox.lo.x() + (bbox.hi.x() - bbox.lo.x()) * ix / (n - 1),
                          bbox.lo.y() + (bbox.hi.y() - bbox.lo.y()) * iy / (n - 1));
            if (domain.contains(p))
                ns.points.push_back(p);
        }
    detail::finalize(ns);
    return ns;
}

namespace detail {

/// March a straight piece from `a` towards `b` with the given spacing.
/// The start point is always emitted, the end point never (it is the next
/// piece's start).
inline void march_segment(const Point& a, const Point& b, double spacing,
                          std::vector<Point>& out) {
    const double len = (b - a).norm();
    out.push_back(a);
    if (len <= spacing)
        return;
    const Point dir = (b - a) / len;
    for (double s = spacing; s < len - 1e-12 * std::max(len, 1.0); s += spacing)
        out.push_back(a + s * dir);
}

/// March a circular arc around `center` from angle a0 to a1 (radians).
inline void march_arc(const Point& center, double radius, double a0, double a1, double spacing,
                      std::vector<Point>& out) {
    if (radius <= 0.0)
        return;
    const double len = std::abs(a1 - a0) * radius;
    const double step = spacing / radius * (a1 > a0 ? 1.0 : -1.0);
    out.push_back(center + radius * Point(std::cos(a0), std::sin(a0)));
    if (len <= spacing)
        return;
    for (double a = a0 + step; (a1 > a0 ? a < a1 - 1e-12 : a > a1 + 1e-12); a += step)
        out.push_back(center + radius * Point(std::cos(a), std::sin(a)));
}

/// Points on the inward offset curve {x : dist(x, boundary) = t}, sampled at
/// the given arclength spacing. Empty when the offset vanishes.
inline std::vector<Point> sample_offset_curve(const Domain& domain, double t, double spacing) {
    std::vector<Point> out;
    if (domain.kind() == DomainKind::UnitSquare) {
        if (1.0 - 2.0 * t <= 1e-12)
            return out;
        const Point c0(t, t), c1(1 - t, t), c2(1 - t, 1 - t), c3(t, 1 - t);
        march_segment(c0, c1, spacing, out);
        march_segment(c1, c2, spacing, out);
        march_segment(c2, c3, spacing, out);
        march_segment(c3, c0, spacing, out);
        return out;
    }
    // L-shape: offset polygon with a reentrant arc around the origin
    if (0.25 - t <= 1e-12)
        return out;
    const double pi = 3.14159265358979323846;
    const Point p1a(-0.5 + t, -0.5 + t), p1b(0.5 - t, -0.5 + t);
    const Point p2b(0.5 - t, -t);
    const Point p3b(0.0, -t);
    const Point p4a(-t, 0.0), p4b(-t, 0.5 - t);
    const Point p5b(-0.5 + t, 0.5 - t);
    march_segment(p1a, p1b, spacing, out);
    march_segment(p1b, p2b, spacing, out);
    march_segment(p2b, p3b, spacing, out);
    if (t > 1e-12) {
        // arc split at the diagonal so its midpoint is always a sample
        march_arc(Point(0, 0), t, -0.5 * pi, -0.75 * pi, spacing, out);
        march_arc(Point(0, 0), t, -0.75 * pi, -pi, spacing, out);
    }
    march_segment(p4a, p4b, spacing, out);
    march_segment(p4b, p5b, spacing, out);
    march_segment(p5b, p1a, spacing, out);
    return out;
}

}  // namespace detail

/// Nodes graded towards the boundary: local spacing proportional to
/// min(h_min + dist(x, boundary), h). Layered construction: inward offset
/// curves of the boundary at depths t_0 = 0, t_{k+1} = t_k + c*delta*(h_min + t_k),
/// each sampled at arclength spacing c*delta*(h_min + t_k), followed by a
/// uniform interior grid; candidates too close to an accepted node are
/// dropped. The covering and separation guarantees hold for delta in
/// (0.1, 1].
inline NodeSet boundary_concentrated_nodes(const Domain& domain, double h, double h_min,
                                           double delta = 1.0) {
    if (!(h_min > 0.0) || !(h >= h_min))
        throw std::invalid_argument("boundary_concentrated_nodes: need 0 < h_min <= h");
    if (h > domain.diameter())
        throw std::invalid_argument("boundary_concentrated_nodes: h exceeds domain diameter");
    if (!(delta > 0.0) || delta > 1.0)
        throw std::invalid_argument("boundary_concentrated_nodes: delta must be in (0,1]");

    constexpr double march_factor = 0.6;
    constexpr double drop_factor = 1.0 / 3.0;

    const auto local_spacing = [&](const Point& p) {
        return std::min(h_min + domain.dist_to_boundary(p), h);
    };

    NodeSet ns;
    ns.domain = domain;

    std::vector<double> layer_depth;       // t_k
    std::vector<HashGrid2D> layer_grid;    // accepted nodes per layer
    HashGrid2D interior_grid;

    const auto clear_of_accepted = [&](const Point& p, int layer_hint) {
        const double r = drop_factor * delta * local_spacing(p);
        const int k0 = std::max(layer_hint - 1, 0);
        const int k1 = std::min(layer_hint + 1, static_cast<int>(layer_grid.size()) - 1);
        for (int k = k0; k <= k1; ++k)
            if (layer_grid[k].any_within(p, r))
                return false;
        return !interior_grid.any_within(p, r);
    };

    // boundary layers
    double t = 0.0;
    while (h_min + t < h) {
        const double spacing = march_factor * delta * (h_min + t);
        auto pts = detail::sample_offset_curve(domain, t, spacing);
        if (pts.empty())
            break;
        layer_depth.push_back(t);
        layer_grid.emplace_back(spacing);
        const int k = static_cast<int>(layer_grid.size()) - 1;
        for (const auto& p : pts)
            if (clear_of_accepted(p, k)) {
                layer_grid[k].insert(p);
                ns.points.push_back(p);
            }
        t += march_factor * delta * (h_min + t);
    }

    // interior grid; aligned so the grid hits the box edges and, for the
    // L-shape, the reentrant lines x=0 and y=0
    const Box bbox = domain.bounding_box();
    const double width = bbox.hi.x() - bbox.lo.x();
    const double s_target = march_factor * delta * std::min(h, h_min + t);
    const int ncell = 2 * std::max(1, static_cast<int>(std::ceil(width / (2.0 * s_target))));
    const double s_int = width / ncell;
    interior_grid = HashGrid2D(s_int);
    const auto bracketing_layer = [&](const Point& p) {
        const double d = domain.dist_to_boundary(p);
        const auto it = std::upper_bound(layer_depth.begin(), layer_depth.end(), d);
        return static_cast<int>(it - layer_depth.begin()) - 1;
    };
    for (int iy = 0; iy <= ncell; ++iy)
        for (int ix = 0; ix <= ncell; ++ix) {
            const Point p(bbox.lo.x() + ix * s_int, bbox.lo.y() + iy * s_int);
            if (!domain.contains(p))
                continue;
            if (clear_of_accepted(p, bracketing_layer(p))) {
                interior_grid.insert(p);
                ns.points.push_back(p);
            }
        }

    detail::finalize(ns);
    return ns;
}

/// Plain-text node file: one node per line, two floating-point fields
/// separated by a single space, '#' lines ignored. 17 significant digits,
/// which round-trips doubles exactly.
inline void write_nodes(const std::string& path, const NodeSet& nodes) {
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("write_nodes: cannot open " + path);
    out << "# domain=" << domain_name(nodes.domain.kind()) << "\n";
    char buf[80];
    for (const auto& p : nodes.points) {
        std::snprintf(buf, sizeof(buf), "%.17g %.17g\n", p.x(), p.y());
        out << buf;
    }
}

inline NodeSet read_nodes(const std::string& path, const Domain& domain,
                          bool compute_distances = true) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("read_nodes: cannot open " + path);
    NodeSet ns;
    ns.domain = domain;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#')
            continue;
        std::istringstream ss(line);
        double x = 0.0, y = 0.0;
        if (!(ss >> x >> y))
            throw std::runtime_error("read_nodes: malformed line '" + line + "'");
        ns.points.emplace_back(x, y);
    }
    if (compute_distances && !ns.points.empty())
        detail::finalize(ns);
    return ns;
}

}  // namespace tps
