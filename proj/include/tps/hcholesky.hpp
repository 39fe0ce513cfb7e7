//
// Project     : tps
// Module      : hcholesky
// Description : approximate hierarchical Cholesky factorization of an SPD
//               H-matrix and the associated triangular solves
//

#pragma once

#include <vector>

#include <Eigen/Dense>

#include <tps/hmatrix.hpp>

namespace tps {

/// Lower-triangular factor over the cluster tree. Leaf clusters hold exact
/// dense Cholesky factors; every internal cluster holds its subdiagonal
/// coupling block in factored form L21 = U Z^T.
class HCholeskyFactor {
  public:
    struct NodeData {
        Matrix denseL;  ///< leaf clusters: dense lower factor
        Matrix U;       ///< internal: |c2| x k
        Matrix Z;       ///< internal: |c1| x k, L21 = U Z^T
    };

    HCholeskyFactor(const ClusterTree& tree, double eps)
        : tree_(&tree), eps_(eps), data_(tree.num_nodes()) {}

    const ClusterTree& cluster_tree() const { return *tree_; }
    double eps() const { return eps_; }
    NodeData& node(int cluster_id) { return data_[cluster_id]; }
    const NodeData& node(int cluster_id) const { return data_[cluster_id]; }

    std::size_t storage_entries() const {
        std::size_t s = 0;
        for (const auto& d : data_)
            s += d.denseL.size() + d.U.size() + d.Z.size();
        return s;
    }

    /// Solve L X = B in place (forward substitution over the tree).
    void solve_lower(Eigen::Ref<Matrix> B, int cluster_id) const {
        const Cluster& c = tree_->node(cluster_id);
        const NodeData& d = data_[cluster_id];
        if (c.is_leaf()) {
            d.denseL.triangularView<Eigen::Lower>().solveInPlace(B);
            return;
        }
        const Cluster& c1 = tree_->node(c.child[0]);
        const Cluster& c2 = tree_->node(c.child[1]);
        solve_lower(B.topRows(c1.size()), c.child[0]);
        B.bottomRows(c2.size()).noalias() -= d.U * (d.Z.transpose() * B.topRows(c1.size()));
        solve_lower(B.bottomRows(c2.size()), c.child[1]);
    }

    /// Solve L^T X = B in place (backward substitution).
    void solve_upper(Eigen::Ref<Matrix> B, int cluster_id) const {
        const Cluster& c = tree_->node(cluster_id);
        const NodeData& d = data_[cluster_id];
        if (c.is_leaf()) {
            d.denseL.transpose().triangularView<Eigen::Upper>().solveInPlace(B);
            return;
        }
        const Cluster& c1 = tree_->node(c.child[0]);
        const Cluster& c2 = tree_->node(c.child[1]);
        solve_upper(B.bottomRows(c2.size()), c.child[1]);
        B.topRows(c1.size()).noalias() -= d.Z * (d.U.transpose() * B.bottomRows(c2.size()));
        solve_upper(B.topRows(c1.size()), c.child[0]);
    }

    /// y = L x (for factorization quality checks).
    void apply_lower(Eigen::Ref<Matrix> B, int cluster_id) const {
        const Cluster& c = tree_->node(cluster_id);
        const NodeData& d = data_[cluster_id];
        if (c.is_leaf()) {
            B = d.denseL.triangularView<Eigen::Lower>() * B;
            return;
        }
        const Cluster& c1 = tree_->node(c.child[0]);
        const Cluster& c2 = tree_->node(c.child[1]);
        apply_lower(B.bottomRows(c2.size()), c.child[1]);
        B.bottomRows(c2.size()).noalias() += d.U * (d.Z.transpose() * B.topRows(c1.size()));
        apply_lower(B.topRows(c1.size()), c.child[0]);
    }

    /// y = L^T x.
    void apply_upper(Eigen::Ref<Matrix> B, int cluster_id) const {
        const Cluster& c = tree_->node(cluster_id);
        const NodeData& d = data_[cluster_id];
        if (c.is_leaf()) {
            B = d.denseL.transpose().triangularView<Eigen::Upper>() * B;
            return;
        }
        const Cluster& c1 = tree_->node(c.child[0]);
        const Cluster& c2 = tree_->node(c.child[1]);
        apply_upper(B.topRows(c1.size()), c.child[0]);
        B.topRows(c1.size()).noalias() += d.Z * (d.U.transpose() * B.bottomRows(c2.size()));
        apply_upper(B.bottomRows(c2.size()), c.child[1]);
    }

  private:
    const ClusterTree* tree_;
    double eps_;
    std::vector<NodeData> data_;
};

/// Solve L y = rhs or L^T y = rhs.
inline Vector solve_triangular(const HCholeskyFactor& f, const Vector& rhs, bool transposed) {
    if (rhs.size() != f.cluster_tree().size())
        throw std::invalid_argument("solve_triangular: dimension mismatch");
    Matrix y = rhs;
    if (transposed)
        f.solve_upper(y, f.cluster_tree().root());
    else
        f.solve_lower(y, f.cluster_tree().root());
    return y.col(0);
}

/// Preconditioner application (L L^T)^{-1} r.
inline Vector llt_solve(const HCholeskyFactor& f, const Vector& r) {
    Matrix y = r;
    f.solve_lower(y, f.cluster_tree().root());
    f.solve_upper(y, f.cluster_tree().root());
    return y.col(0);
}

/// L (L^T v), the factorization's approximation of the input matrix.
inline Vector llt_apply(const HCholeskyFactor& f, const Vector& v) {
    Matrix y = v;
    f.apply_upper(y, f.cluster_tree().root());
    f.apply_lower(y, f.cluster_tree().root());
    return y.col(0);
}

namespace detail {

/// Map cluster id -> block node id of its diagonal block, plus the ids of
/// the (c2,c1) subdiagonal block inside each internal diagonal block.
struct DiagonalMap {
    std::vector<int> diag;   // per cluster id
    std::vector<int> lower;  // per cluster id, block (c2,c1); -1 at leaves

    DiagonalMap(const ClusterTree& tree, const BlockTree& blocks)
        : diag(tree.num_nodes(), -1), lower(tree.num_nodes(), -1) {
        walk(tree, blocks, blocks.root());
    }

    void walk(const ClusterTree& tree, const BlockTree& blocks, int bid) {
        const BlockNode& bn = blocks.node(bid);
        if (bn.row != bn.col)
            return;
        const int c = bn.row;
        diag[c] = bid;
        const Cluster& cl = tree.node(c);
        if (cl.is_leaf())
            return;
        for (int kid : bn.children) {
            const BlockNode& kn = blocks.node(kid);
            if (kn.row == cl.child[1] && kn.col == cl.child[0])
                lower[c] = kid;
            walk(tree, blocks, kid);
        }
    }
};

/// Restricted low-rank update A(sub) -= U C U^T over the subtree rooted at
/// block `bid`; X/Y rows are relative to the subtree's cluster ranges.
inline void update_subtree(HMatrix& a, int bid, int row0, int col0, const Matrix& X,
                           const Matrix& Y, double eps_rel) {
    const auto st = a.state(bid);
    if (st == HMatrix::State::Unused)
        return;
    if (st == HMatrix::State::Split) {
        for (int kid : a.block_tree().node(bid).children)
            update_subtree(a, kid, row0, col0, X, Y, eps_rel);
        return;
    }
    const Cluster& r = a.row_cluster(bid);
    const Cluster& c = a.col_cluster(bid);
    const auto Xr = X.middleRows(r.begin - row0, r.size());
    const auto Yc = Y.middleRows(c.begin - col0, c.size());
    if (st == HMatrix::State::Dense) {
        a.dense_block(bid).noalias() += Xr * Yc.transpose();
    } else {
        const LowRankBlock& b = a.lowrank_block(bid);
        LowRankBlock ext;
        ext.U.resize(r.size(), b.rank() + X.cols());
        ext.V.resize(c.size(), b.rank() + X.cols());
        ext.U << b.U, Xr;
        ext.V << b.V, Yc;
        a.set_lowrank(bid, recompress(ext, eps_rel));
    }
}

inline void hcholesky_recurse(HMatrix& a, const DiagonalMap& map, HCholeskyFactor& f,
                              int cluster_id, double eps, double shift) {
    const ClusterTree& tree = a.cluster_tree();
    const Cluster& c = tree.node(cluster_id);
    auto& nd = f.node(cluster_id);
    if (c.is_leaf()) {
        Matrix d = a.dense_block(map.diag[cluster_id]);
        if (shift > 0.0)
            d.diagonal().array() += shift;
        Eigen::LLT<Matrix> llt(d);
        if (llt.info() != Eigen::Success)
            throw PivotBreakdownError(
                "hcholesky: non-positive pivot (tolerance too loose or input not SPD)");
        nd.denseL = llt.matrixL();
        return;
    }
    hcholesky_recurse(a, map, f, c.child[0], eps, shift);

    // L21 = A21 L11^{-T} with A21 agglomerated to a single low-rank block
    LowRankBlock a21 = agglomerate_block(a, map.lower[cluster_id], eps);
    Matrix Z = a21.V;
    f.solve_lower(Z, c.child[0]);
    nd.U = std::move(a21.U);
    nd.Z = std::move(Z);

    // A22 -= L21 L21^T = U (Z^T Z) U^T, truncated block-local
    if (nd.U.cols() > 0) {
        const Matrix C = nd.Z.transpose() * nd.Z;
        const Cluster& c2 = tree.node(c.child[1]);
        update_subtree(a, map.diag[c.child[1]], c2.begin, c2.begin, Matrix(-nd.U * C), nd.U, eps);
    }
    hcholesky_recurse(a, map, f, c.child[1], eps, shift);
}

}  // namespace detail

/// Approximate Cholesky factorization L L^T of a symmetric, numerically SPD
/// H-matrix. Off-diagonal coupling blocks are agglomerated to low rank at
/// eps_chol; dense leaves use exact Cholesky. An optional diagonal shift
/// regularizes borderline-definite inputs.
inline HCholeskyFactor hcholesky(const HMatrix& h, double eps_chol, double shift = 0.0) {
    if (!h.symmetric())
        throw std::invalid_argument("hcholesky: input must be symmetric");
    HMatrix a = h;  // factorization consumes a working copy
    detail::DiagonalMap map(a.cluster_tree(), a.block_tree());
    HCholeskyFactor f(a.cluster_tree(), eps_chol);
    detail::hcholesky_recurse(a, map, f, a.cluster_tree().root(), eps_chol, shift);
    return f;
}

}  // namespace tps
