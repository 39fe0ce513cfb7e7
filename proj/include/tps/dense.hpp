//
// Project     : tps
// Module      : dense
// Description : saddle-point system assembly, dense reference solver,
//               pivot selection and Schur-complement reduction
//

#pragma once

#include <vector>

#include <Eigen/Dense>

#include <tps/kernel.hpp>

namespace tps {

/// Constrained kernel system
///   [ G  P ] [ c      ]   [ f ]
///   [ P^T 0 ] [ lambda ] = [ 0 ]
/// with G_ij = phi(|x_i - x_j|) and P_ij = b_j(x_i).
struct SaddleSystem {
    NodeSet nodes;
    KernelOrder order;
    Matrix G;  ///< N x N, symmetric, zero diagonal
    Matrix P;  ///< N x Q, full column rank
    Vector f;  ///< N samples
};

namespace detail {

inline Matrix poly_matrix(const std::vector<Point>& pts, KernelOrder order) {
    const auto basis = poly_basis(order);
    Matrix P(pts.size(), basis.size());
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (std::size_t j = 0; j < basis.size(); ++j)
            P(static_cast<int>(i), static_cast<int>(j)) = basis[j].eval(pts[i]);
    return P;
}

inline Matrix kernel_matrix(const std::vector<Point>& rows, const std::vector<Point>& cols,
                            KernelOrder order) {
    Matrix G(rows.size(), cols.size());
    if (order.is_thin_plate_2d()) {
        for (std::size_t j = 0; j < cols.size(); ++j)
            for (std::size_t i = 0; i < rows.size(); ++i)
                G(static_cast<int>(i), static_cast<int>(j)) =
                    phi2_r2((rows[i] - cols[j]).squaredNorm());
    } else {
        for (std::size_t j = 0; j < cols.size(); ++j)
            for (std::size_t i = 0; i < rows.size(); ++i)
                G(static_cast<int>(i), static_cast<int>(j)) =
                    phi(order, (rows[i] - cols[j]).norm());
    }
    return G;
}

}  // namespace detail

inline SaddleSystem assemble_dense(const NodeSet& nodes, KernelOrder order,
                                   const Vector& f_values) {
    order.validate();
    const int n = nodes.size();
    const int q = poly_basis_size(order);
    if (n < q)
        throw std::invalid_argument("assemble_dense: fewer nodes than polynomial dimension");
    if (f_values.size() != n)
        throw std::invalid_argument("assemble_dense: f size mismatch");
    if (n >= 2) {
        const double sep = nodes.q > 0.0 ? nodes.q : separation_distance(nodes.points);
        if (sep < 1e-12 * nodes.domain.diameter())
            throw std::invalid_argument("assemble_dense: duplicate points");
    }

    SaddleSystem sys;
    sys.nodes = nodes;
    sys.order = order;
    sys.G = detail::kernel_matrix(nodes.points, nodes.points, order);
    sys.G.diagonal().setZero();
    sys.P = detail::poly_matrix(nodes.points, order);
    sys.f = f_values;

    Eigen::ColPivHouseholderQR<Matrix> qr(sys.P);
    qr.setThreshold(1e-10);
    if (qr.rank() < q)
        throw UnisolvencyError("assemble_dense: nodes not unisolvent for the polynomial tail");
    return sys;
}

/// Reference solver: factorize the full (N+Q) x (N+Q) saddle matrix with
/// partial-pivoted LU and one step of iterative refinement. Independent of
/// the Schur-complement path it validates.
inline Interpolant solve_dense(const SaddleSystem& sys) {
    const int n = static_cast<int>(sys.G.rows());
    const int q = static_cast<int>(sys.P.cols());
    Matrix A = Matrix::Zero(n + q, n + q);
    A.topLeftCorner(n, n) = sys.G;
    A.topRightCorner(n, q) = sys.P;
    A.bottomLeftCorner(q, n) = sys.P.transpose();
    Vector rhs = Vector::Zero(n + q);
    rhs.head(n) = sys.f;

    Eigen::PartialPivLU<Matrix> lu(A);
    Vector x = lu.solve(rhs);
    x += lu.solve(rhs - A * x);

    const double rel = (rhs - A * x).norm() / std::max(rhs.norm(), 1e-300);
    if (!x.allFinite() || rel > 1e-6)
        throw SingularSystemError("solve_dense: saddle system numerically singular");

    Interpolant s;
    s.nodes = sys.nodes;
    s.order = sys.order;
    s.c = x.head(n);
    s.lambda = x.tail(q);
    return s;
}

/// Greedy maximal-volume pivot selection for the m = d = 2 tail (Q = 3):
/// farthest point from the origin, then farthest from the first, then the
/// point maximizing the triangle area. Deterministic given the node order.
inline std::vector<int> select_pivot_points(const NodeSet& nodes) {
    const int n = nodes.size();
    if (n < 3)
        throw std::invalid_argument("select_pivot_points: need at least 3 nodes");
    const auto& pts = nodes.points;

    int i0 = 0;
    double best = -1.0;
    for (int i = 0; i < n; ++i)
        if (pts[i].norm() > best) {
            best = pts[i].norm();
            i0 = i;
        }
    int i1 = -1;
    best = -1.0;
    for (int i = 0; i < n; ++i) {
        if (i == i0)
            continue;
        const double d = (pts[i] - pts[i0]).norm();
        if (d > best) {
            best = d;
            i1 = i;
        }
    }
    int i2 = -1;
    best = -1.0;
    for (int i = 0; i < n; ++i) {
        if (i == i0 || i == i1)
            continue;
        const Point u = pts[i1] - pts[i0];
        const Point v = pts[i] - pts[i0];
        const double area = 0.5 * std::abs(u.x() * v.y() - u.y() * v.x());
        if (area > best) {
            best = area;
            i2 = i;
        }
    }
    if (i2 < 0 || best <= 1e-14)
        throw UnisolvencyError("select_pivot_points: no unisolvent subset (collinear nodes)");
    return {i0, i1, i2};
}

/// Data of the elimination of the pivot block and the Lagrange multiplier:
///   M     = [ P1^T  0  ]      (2Q x 2Q)
///           [ G11   P1 ]
///   W_row = [ G21  P2 ]        ((N-Q) x 2Q)
///   W_col = [ P2^T ; G12 ]     (2Q x (N-Q))
/// so that S = G22 - W_row M^{-1} W_col is the SPD Schur complement.
struct SchurReduction {
    std::vector<int> pivot;  ///< Q indices into the original node order
    std::vector<int> rest;   ///< remaining N-Q indices, row order of G22 / W_row
    Matrix M;
    Eigen::PartialPivLU<Matrix> M_lu;
    Matrix W_row;
    Matrix W_col;
    Vector f1, f2;

    int q() const { return static_cast<int>(pivot.size()); }
    int rest_size() const { return static_cast<int>(rest.size()); }

    /// Reduced right-hand side f2 - W_row M^{-1} [0; f1].
    Vector reduced_rhs() const {
        Vector z = Vector::Zero(2 * q());
        z.tail(q()) = f1;
        return f2 - W_row * M_lu.solve(z);
    }

    /// The eliminated correction applied to a vector:
    /// W_row (M^{-1} (W_col v)).
    Vector correction(const Vector& v) const { return W_row * M_lu.solve(W_col * v); }
};

namespace detail {

/// Assemble the reduction blocks from node coordinates; used both by the
/// dense path (via schur_reduce) and by the hierarchical path, which never
/// forms the dense G.
inline SchurReduction make_schur_reduction(const NodeSet& nodes, KernelOrder order,
                                           const Vector& f_values, std::vector<int> pivot,
                                           std::vector<int> rest) {
    const int q = static_cast<int>(pivot.size());
    SchurReduction red;
    red.pivot = std::move(pivot);
    red.rest = std::move(rest);

    std::vector<Point> p1(q), p2(red.rest.size());
    red.f1.resize(q);
    red.f2.resize(static_cast<int>(red.rest.size()));
    for (int i = 0; i < q; ++i) {
        p1[i] = nodes.points[red.pivot[i]];
        red.f1[i] = f_values[red.pivot[i]];
    }
    for (std::size_t i = 0; i < red.rest.size(); ++i) {
        p2[i] = nodes.points[red.rest[i]];
        red.f2[static_cast<int>(i)] = f_values[red.rest[i]];
    }

    const Matrix P1 = poly_matrix(p1, order);
    const Matrix P2 = poly_matrix(p2, order);
    const Matrix G11 = kernel_matrix(p1, p1, order);
    const Matrix G21 = kernel_matrix(p2, p1, order);

    red.M = Matrix::Zero(2 * q, 2 * q);
    red.M.topLeftCorner(q, q) = P1.transpose();
    red.M.bottomLeftCorner(q, q) = G11;
    red.M.bottomRightCorner(q, q) = P1;
    red.M_lu.compute(red.M);
    if (std::abs(red.M_lu.determinant()) < 1e-300)
        throw SingularSystemError("schur_reduce: pivot block M singular");

    const int nr = static_cast<int>(red.rest.size());
    red.W_row.resize(nr, 2 * q);
    red.W_row.leftCols(q) = G21;
    red.W_row.rightCols(q) = P2;
    red.W_col.resize(2 * q, nr);
    red.W_col.topRows(q) = P2.transpose();
    red.W_col.bottomRows(q) = G21.transpose();
    return red;
}

}  // namespace detail

inline SchurReduction schur_reduce(const SaddleSystem& sys, const std::vector<int>& pivot) {
    std::vector<char> is_pivot(sys.nodes.size(), 0);
    for (int i : pivot)
        is_pivot[i] = 1;
    std::vector<int> rest;
    rest.reserve(sys.nodes.size() - pivot.size());
    for (int i = 0; i < sys.nodes.size(); ++i)
        if (!is_pivot[i])
            rest.push_back(i);
    return detail::make_schur_reduction(sys.nodes, sys.order, sys.f, pivot, rest);
}

/// Dense Schur complement S = G22 - W_row M^{-1} W_col, assembled explicitly
/// (test and oracle use).
inline Matrix assemble_dense_schur(const NodeSet& nodes, KernelOrder order,
                                   const SchurReduction& red) {
    std::vector<Point> p2(red.rest.size());
    for (std::size_t i = 0; i < red.rest.size(); ++i)
        p2[i] = nodes.points[red.rest[i]];
    Matrix G22 = detail::kernel_matrix(p2, p2, order);
    G22.diagonal().setZero();
    return G22 - red.W_row * red.M_lu.solve(red.W_col);
}

/// Recover (c, lambda) in the original node order from the Schur solution c2.
inline std::pair<Vector, Vector> schur_backsubstitute(const SchurReduction& red, const Vector& c2,
                                                      const Vector& f1) {
    const int q = red.q();
    Vector z = Vector::Zero(2 * q);
    z.tail(q) = f1;
    const Vector cl = red.M_lu.solve(z - red.W_col * c2);

    const int n = red.rest_size() + q;
    Vector c = Vector::Zero(n);
    for (int i = 0; i < q; ++i)
        c[red.pivot[i]] = cl[i];
    for (int i = 0; i < red.rest_size(); ++i)
        c[red.rest[i]] = c2[i];
    return {c, cl.tail(q)};
}

/// Dense pipeline via the Schur complement (validates against solve_dense).
inline Interpolant solve_dense_schur(const SaddleSystem& sys) {
    const auto pivot = select_pivot_points(sys.nodes);
    SchurReduction red = schur_reduce(sys, pivot);
    Vector c2;
    if (red.rest_size() > 0) {
        const Matrix S = assemble_dense_schur(sys.nodes, sys.order, red);
        Eigen::LLT<Matrix> llt(S);
        if (llt.info() != Eigen::Success)
            throw PivotBreakdownError("solve_dense_schur: Schur complement not SPD");
        c2 = llt.solve(red.reduced_rhs());
    } else {
        c2 = Vector::Zero(0);
    }
    auto [c, lambda] = schur_backsubstitute(red, c2, red.f1);
    Interpolant s;
    s.nodes = sys.nodes;
    s.order = sys.order;
    s.c = std::move(c);
    s.lambda = std::move(lambda);
    return s;
}

}  // namespace tps
