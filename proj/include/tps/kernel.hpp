//
// Project     : tps
// Module      : kernel
// Description : polyharmonic kernel, polynomial tail, interpolant evaluation
//

#pragma once

#include <array>
#include <cmath>
#include <vector>

#include <tps/geometry.hpp>
#include <tps/types.hpp>

namespace tps {

/// Smoothness order m and space dimension d of the polyharmonic kernel.
/// Requires m > d/2; the benchmark harness exercises m = d = 2 only.
struct KernelOrder {
    int m = 2;
    int d = 2;

    void validate() const {
        if (m < 1 || d < 1 || 2 * m <= d)
            throw std::invalid_argument("KernelOrder: requires m >= 1, d >= 1, m > d/2");
    }

    bool is_thin_plate_2d() const { return m == 2 && d == 2; }
};

/// phi_m(r) = r^(2m-d) log r for even d, r^(2m-d) for odd d, extended
/// continuously by phi(0) = 0.
inline double phi(KernelOrder order, double r) {
    const int e = 2 * order.m - order.d;
    if (r <= 0.0)
        return 0.0;
    const double re = std::pow(r, e);
    return (order.d % 2 == 0) ? re * std::log(r) : re;
}

/// Fast path for m = d = 2 taking the squared radius:
/// r^2 log r = r2 * log(r2) / 2.
inline double phi2_r2(double r2) { return r2 > 0.0 ? 0.5 * r2 * std::log(r2) : 0.0; }

/// Monomial x^e0 * y^e1 * z^e2 (trailing exponents zero for d < 3).
struct Monomial {
    std::array<int, 3> e{0, 0, 0};

    int degree() const { return e[0] + e[1] + e[2]; }

    double eval(const Point& p) const {
        double v = 1.0;
        for (int k = 0; k < e[0]; ++k)
            v *= p.x();
        for (int k = 0; k < e[1]; ++k)
            v *= p.y();
        return v;
    }
};

/// Monomial basis of P_{m-1} in d variables, graded-lexicographic:
/// ascending total degree, earlier variables first within a degree.
/// Size is binom(m-1+d, d).
inline std::vector<Monomial> poly_basis(KernelOrder order) {
    // the basis is well defined even when the kernel existence condition
    // m > d/2 fails, so only the shape parameters are checked here
    if (order.m < 1 || order.d < 1 || order.d > 3)
        throw std::invalid_argument("poly_basis: need m >= 1 and d in {1,2,3}");
    std::vector<Monomial> basis;
    const int max_deg = order.m - 1;
    for (int deg = 0; deg <= max_deg; ++deg) {
        if (order.d == 1) {
            basis.push_back({{deg, 0, 0}});
        } else if (order.d == 2) {
            for (int e0 = deg; e0 >= 0; --e0)
                basis.push_back({{e0, deg - e0, 0}});
        } else {
            for (int e0 = deg; e0 >= 0; --e0)
                for (int e1 = deg - e0; e1 >= 0; --e1)
                    basis.push_back({{e0, e1, deg - e0 - e1}});
        }
    }
    return basis;
}

inline int poly_basis_size(KernelOrder order) {
    return static_cast<int>(poly_basis(order).size());
}

/// Kernel expansion coefficients c plus the polynomial tail lambda over the
/// monomial basis. Valid interpolants satisfy P^T c = 0.
struct Interpolant {
    NodeSet nodes;
    KernelOrder order;
    Vector c;
    Vector lambda;
};

inline double eval_interpolant(const Interpolant& s, const Point& x) {
    double v = 0.0;
    if (s.order.is_thin_plate_2d()) {
        for (int i = 0; i < s.nodes.size(); ++i)
            v += s.c[i] * phi2_r2((x - s.nodes.points[i]).squaredNorm());
    } else {
        for (int i = 0; i < s.nodes.size(); ++i)
            v += s.c[i] * phi(s.order, (x - s.nodes.points[i]).norm());
    }
    const auto basis = poly_basis(s.order);
    for (std::size_t j = 0; j < basis.size(); ++j)
        v += s.lambda[static_cast<int>(j)] * basis[j].eval(x);
    return v;
}

/// Evaluate at many points with vectorized kernel sums (m = d = 2 path).
inline Vector eval_interpolant_many(const Interpolant& s, const std::vector<Point>& xs) {
    const int n = s.nodes.size();
    const int ne = static_cast<int>(xs.size());
    Vector out(ne);
    if (!s.order.is_thin_plate_2d() || n < 64) {
        for (int k = 0; k < ne; ++k)
            out[k] = eval_interpolant(s, xs[k]);
        return out;
    }
    Eigen::ArrayXd nx(n), ny(n);
    for (int i = 0; i < n; ++i) {
        nx[i] = s.nodes.points[i].x();
        ny[i] = s.nodes.points[i].y();
    }
    const Eigen::ArrayXd c = s.c.array();
    const auto basis = poly_basis(s.order);
    Eigen::ArrayXd r2(n);
    for (int k = 0; k < ne; ++k) {
        r2 = (nx - xs[k].x()).square() + (ny - xs[k].y()).square();
        // r2 = 0 contributes 0; bump it to keep log finite
        r2 = r2.max(1e-300);
        double v = 0.5 * (c * r2 * r2.log()).sum();
        for (std::size_t j = 0; j < basis.size(); ++j)
            v += s.lambda[static_cast<int>(j)] * basis[j].eval(xs[k]);
        out[k] = v;
    }
    return out;
}

}  // namespace tps
