//
// Test-only oracles, kept independent of the library's solve paths.
//

#pragma once

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include <tps/geometry.hpp>
#include <tps/types.hpp>

namespace oracle {

/// Plain Gaussian elimination with partial pivoting; deliberately written
/// from scratch so dense-solver tests do not depend on Eigen's LU.
inline std::vector<double> gauss_solve(std::vector<std::vector<double>> a,
                                       std::vector<double> b) {
    const int n = static_cast<int>(a.size());
    for (int col = 0; col < n; ++col) {
        int piv = col;
        for (int r = col + 1; r < n; ++r)
            if (std::abs(a[r][col]) > std::abs(a[piv][col]))
                piv = r;
        if (std::abs(a[piv][col]) < 1e-300)
            throw std::runtime_error("gauss_solve: singular matrix");
        std::swap(a[piv], a[col]);
        std::swap(b[piv], b[col]);
        for (int r = col + 1; r < n; ++r) {
            const double f = a[r][col] / a[col][col];
            for (int c = col; c < n; ++c)
                a[r][c] -= f * a[col][c];
            b[r] -= f * b[col];
        }
    }
    std::vector<double> x(n);
    for (int r = n - 1; r >= 0; --r) {
        double s = b[r];
        for (int c = r + 1; c < n; ++c)
            s -= a[r][c] * x[c];
        x[r] = s / a[r][r];
    }
    return x;
}

/// Brute-force fill distance: exhaustive nearest-node scan over a fine
/// sample grid (no spatial acceleration).
inline double brute_force_fill_distance(const tps::NodeSet& nodes, int resolution) {
    const tps::Box bbox = nodes.domain.bounding_box();
    double sup = 0.0;
    for (int iy = 0; iy < resolution; ++iy)
        for (int ix = 0; ix < resolution; ++ix) {
            const tps::Point p(
                bbox.lo.x() + (bbox.hi.x() - bbox.lo.x()) * ix / (resolution - 1),
                bbox.lo.y() + (bbox.hi.y() - bbox.lo.y()) * iy / (resolution - 1));
            if (!nodes.domain.contains(p))
                continue;
            double best = std::numeric_limits<double>::infinity();
            for (const auto& q : nodes.points)
                best = std::min(best, (p - q).norm());
            sup = std::max(sup, best);
        }
    return sup;
}

/// Deterministic uniform points inside a domain.
inline std::vector<tps::Point> random_domain_points(const tps::Domain& domain, int n,
                                                    unsigned seed) {
    std::mt19937 rng(seed);
    const tps::Box bbox = domain.bounding_box();
    std::uniform_real_distribution<double> ux(bbox.lo.x(), bbox.hi.x());
    std::uniform_real_distribution<double> uy(bbox.lo.y(), bbox.hi.y());
    std::vector<tps::Point> pts;
    while (static_cast<int>(pts.size()) < n) {
        const tps::Point p(ux(rng), uy(rng));
        if (domain.contains(p))
            pts.push_back(p);
    }
    return pts;
}

inline tps::NodeSet random_node_set(const tps::Domain& domain, int n, unsigned seed,
                                    int fill_resolution = 128) {
    tps::NodeSet ns;
    ns.domain = domain;
    ns.points = random_domain_points(domain, n, seed);
    ns.h = tps::fill_distance(ns, fill_resolution);
    ns.q = tps::separation_distance(ns.points);
    return ns;
}

}  // namespace oracle
