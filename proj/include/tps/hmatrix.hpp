//
// Project     : tps
// Module      : hmatrix
// Description : blockwise dense plus low-rank kernel matrix: Chebyshev
//               assembly, SVD recompression, coarsening, matvec, updates
//

#pragma once

#include <cmath>
#include <fstream>
#include <vector>

#include <Eigen/Dense>

#include <tps/cluster.hpp>
#include <tps/dense.hpp>
#include <tps/kernel.hpp>

namespace tps {

struct LowRankBlock {
    Matrix U;  ///< rows x k
    Matrix V;  ///< cols x k, block value = U * V^T

    int rank() const { return static_cast<int>(U.cols()); }
    std::size_t entries() const { return U.size() + V.size(); }
};

/// Rank-truncated SVD of U V^T: discards singular values <= eps_rel times
/// the largest one, so the 2-norm error is at most eps_rel * sigma_max.
inline LowRankBlock recompress(const LowRankBlock& b, double eps_rel) {
    if (!(eps_rel > 0.0) || eps_rel > 1.0)
        throw std::invalid_argument("recompress: eps_rel must be in (0,1]");
    const int m = static_cast<int>(b.U.rows());
    const int n = static_cast<int>(b.V.rows());
    const int k = b.rank();
    if (k == 0)
        return b;

    const int ku = std::min(m, k), kv = std::min(n, k);
    Eigen::HouseholderQR<Matrix> qru(b.U), qrv(b.V);
    const Matrix Ru = qru.matrixQR().topRows(ku).triangularView<Eigen::Upper>();
    const Matrix Rv = qrv.matrixQR().topRows(kv).triangularView<Eigen::Upper>();

    Eigen::BDCSVD<Matrix> svd(Ru * Rv.transpose(), Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    const double smax = sv.size() > 0 ? sv[0] : 0.0;
    int r = 0;
    while (r < sv.size() && sv[r] > eps_rel * smax && sv[r] > 0.0)
        ++r;

    LowRankBlock out;
    out.U = (qru.householderQ() * Matrix::Identity(m, ku)) * svd.matrixU().leftCols(r) *
            sv.head(r).asDiagonal();
    out.V = (qrv.householderQ() * Matrix::Identity(n, kv)) * svd.matrixV().leftCols(r);
    return out;
}

namespace cheb {

/// Chebyshev points of the first kind for degree p (p+1 points) on [a,b].
inline Vector points(double a, double b, int p) {
    const int n = p + 1;
    Vector t(n);
    for (int i = 0; i < n; ++i) {
        const double th = 3.14159265358979323846 * (2.0 * i + 1.0) / (2.0 * n);
        t[i] = 0.5 * (a + b) + 0.5 * (b - a) * std::cos(th);
    }
    return t;
}

/// Lagrange basis values at the given coordinates, L(i,j) = ell_j(x_i),
/// via the barycentric formula. Degenerate intervals are widened slightly.
inline Matrix lagrange_matrix(const std::vector<double>& coords, double a, double b, int p) {
    const double scale = std::max({1.0, std::abs(a), std::abs(b)});
    if (b - a < 1e-12 * scale) {
        const double mid = 0.5 * (a + b);
        a = mid - 0.5e-12 * scale;
        b = mid + 0.5e-12 * scale;
    }
    const int n = p + 1;
    const Vector t = points(a, b, p);
    Vector w(n);
    for (int i = 0; i < n; ++i) {
        const double th = 3.14159265358979323846 * (2.0 * i + 1.0) / (2.0 * n);
        w[i] = (i % 2 == 0 ? 1.0 : -1.0) * std::sin(th);
    }
    Matrix L(coords.size(), n);
    Vector d(n);
    for (std::size_t i = 0; i < coords.size(); ++i) {
        const double x = coords[i];
        int hit = -1;
        for (int j = 0; j < n; ++j) {
            d[j] = x - t[j];
            if (std::abs(d[j]) < 1e-14 * scale)
                hit = j;
        }
        if (hit >= 0) {
            L.row(static_cast<int>(i)).setZero();
            L(static_cast<int>(i), hit) = 1.0;
            continue;
        }
        double denom = 0.0;
        for (int j = 0; j < n; ++j)
            denom += w[j] / d[j];
        for (int j = 0; j < n; ++j)
            L(static_cast<int>(i), j) = (w[j] / d[j]) / denom;
    }
    return L;
}

/// Tensor-product Lagrange basis over a box, column index mu = ix*(p+1)+iy.
inline Matrix tensor_lagrange(const std::vector<Point>& pts, int begin, int end, const Box& box,
                              int p) {
    std::vector<double> xs(end - begin), ys(end - begin);
    for (int i = begin; i < end; ++i) {
        xs[i - begin] = pts[i].x();
        ys[i - begin] = pts[i].y();
    }
    const Matrix Lx = lagrange_matrix(xs, box.lo.x(), box.hi.x(), p);
    const Matrix Ly = lagrange_matrix(ys, box.lo.y(), box.hi.y(), p);
    const int n1 = p + 1;
    Matrix L(end - begin, n1 * n1);
    for (int ix = 0; ix < n1; ++ix)
        for (int iy = 0; iy < n1; ++iy)
            L.col(ix * n1 + iy) = Lx.col(ix).cwiseProduct(Ly.col(iy));
    return L;
}

/// Kernel values between the tensor Chebyshev grids of two boxes.
inline Matrix kernel_at_nodes(const Box& bs, const Box& bt, int p) {
    const Vector sx = points(bs.lo.x(), bs.hi.x(), p);
    const Vector sy = points(bs.lo.y(), bs.hi.y(), p);
    const Vector tx = points(bt.lo.x(), bt.hi.x(), p);
    const Vector ty = points(bt.lo.y(), bt.hi.y(), p);
    const int n1 = p + 1;
    Matrix K(n1 * n1, n1 * n1);
    for (int ix = 0; ix < n1; ++ix)
        for (int iy = 0; iy < n1; ++iy)
            for (int jx = 0; jx < n1; ++jx)
                for (int jy = 0; jy < n1; ++jy) {
                    const double dx = sx[ix] - tx[jx];
                    const double dy = sy[iy] - ty[jy];
                    K(ix * n1 + iy, jx * n1 + jy) = phi2_r2(dx * dx + dy * dy);
                }
    return K;
}

}  // namespace cheb

/// Hierarchical matrix congruent to (a coarsening of) its block tree.
/// In symmetric mode only blocks with row offset >= column offset are
/// stored; matvec mirrors the strictly lower blocks.
class HMatrix {
  public:
    enum class State { Unused, Split, Dense, LowRank };

    HMatrix(const ClusterTree& tree, const BlockTree& blocks, bool symmetric)
        : tree_(&tree), blocks_(&blocks), symmetric_(symmetric) {
        state_.assign(blocks.num_nodes(), State::Unused);
        dense_.resize(blocks.num_nodes());
        lr_.resize(blocks.num_nodes());
    }

    const ClusterTree& cluster_tree() const { return *tree_; }
    const BlockTree& block_tree() const { return *blocks_; }
    bool symmetric() const { return symmetric_; }
    int dim() const { return tree_->size(); }

    State state(int id) const { return state_[id]; }
    const Matrix& dense_block(int id) const { return dense_[id]; }
    Matrix& dense_block(int id) { return dense_[id]; }
    const LowRankBlock& lowrank_block(int id) const { return lr_[id]; }
    LowRankBlock& lowrank_block(int id) { return lr_[id]; }

    void set_dense(int id, Matrix d) {
        state_[id] = State::Dense;
        dense_[id] = std::move(d);
    }
    void set_lowrank(int id, LowRankBlock b) {
        state_[id] = State::LowRank;
        lr_[id] = std::move(b);
    }
    void set_split(int id) { state_[id] = State::Split; }
    void clear(int id) {
        state_[id] = State::Unused;
        dense_[id] = Matrix();
        lr_[id] = LowRankBlock{};
    }

    const Cluster& row_cluster(int id) const { return tree_->node(blocks_->node(id).row); }
    const Cluster& col_cluster(int id) const { return tree_->node(blocks_->node(id).col); }

    bool stored_side(int id) const {
        return !symmetric_ || row_cluster(id).begin >= col_cluster(id).begin;
    }

    std::size_t storage_entries() const {
        std::size_t s = 0;
        for (int id = 0; id < blocks_->num_nodes(); ++id) {
            if (state_[id] == State::Dense)
                s += dense_[id].size();
            else if (state_[id] == State::LowRank)
                s += lr_[id].entries();
        }
        return s;
    }
    std::size_t storage_bytes() const { return storage_entries() * sizeof(double); }

    Vector matvec(const Vector& v) const {
        if (v.size() != dim())
            throw std::invalid_argument("HMatrix::matvec: dimension mismatch");
        Vector y = Vector::Zero(dim());
        for (int id = 0; id < blocks_->num_nodes(); ++id) {
            if (state_[id] != State::Dense && state_[id] != State::LowRank)
                continue;
            const Cluster& r = row_cluster(id);
            const Cluster& c = col_cluster(id);
            const auto vc = v.segment(c.begin, c.size());
            if (state_[id] == State::Dense) {
                y.segment(r.begin, r.size()).noalias() += dense_[id] * vc;
                if (symmetric_ && r.begin > c.begin)
                    y.segment(c.begin, c.size()).noalias() +=
                        dense_[id].transpose() * v.segment(r.begin, r.size());
            } else {
                y.segment(r.begin, r.size()).noalias() +=
                    lr_[id].U * (lr_[id].V.transpose() * vc);
                if (symmetric_ && r.begin > c.begin)
                    y.segment(c.begin, c.size()).noalias() +=
                        lr_[id].V * (lr_[id].U.transpose() * v.segment(r.begin, r.size()));
            }
        }
        return y;
    }

  private:
    const ClusterTree* tree_;
    const BlockTree* blocks_;
    bool symmetric_;
    std::vector<State> state_;
    std::vector<Matrix> dense_;
    std::vector<LowRankBlock> lr_;
};

/// Assemble the kernel matrix over the permuted points: dense leaves hold
/// exact entries, admissible leaves the tensor Chebyshev interpolant of
/// degree p per axis (rank (p+1)^2 before recompression).
inline HMatrix assemble_hmatrix(const std::vector<Point>& permuted_points, const ClusterTree& tree,
                                const BlockTree& blocks, int p, bool symmetric = true) {
    if (p < 0)
        throw std::invalid_argument("assemble_hmatrix: p must be >= 0");
    HMatrix h(tree, blocks, symmetric);
    for (int id = 0; id < blocks.num_nodes(); ++id) {
        const BlockNode& bn = blocks.node(id);
        if (bn.kind == BlockKind::Split) {
            h.set_split(id);
            continue;
        }
        if (!h.stored_side(id))
            continue;
        const Cluster& r = tree.node(bn.row);
        const Cluster& c = tree.node(bn.col);
        if (bn.kind == BlockKind::Dense) {
            // phi(0) = 0, so diagonal entries come out exactly zero
            Matrix d(r.size(), c.size());
            for (int j = 0; j < c.size(); ++j)
                for (int i = 0; i < r.size(); ++i)
                    d(i, j) = phi2_r2(
                        (permuted_points[r.begin + i] - permuted_points[c.begin + j]).squaredNorm());
            h.set_dense(id, std::move(d));
        } else {
            LowRankBlock b;
            b.U = cheb::tensor_lagrange(permuted_points, r.begin, r.end, r.box, p);
            const Matrix K = cheb::kernel_at_nodes(r.box, c.box, p);
            b.V = cheb::tensor_lagrange(permuted_points, c.begin, c.end, c.box, p) * K.transpose();
            h.set_lowrank(id, std::move(b));
        }
    }
    return h;
}

/// Recompress every low-rank leaf at the given relative tolerance.
inline void recompress_all(HMatrix& h, double eps_rel) {
    for (int id = 0; id < h.block_tree().num_nodes(); ++id)
        if (h.state(id) == HMatrix::State::LowRank)
            h.set_lowrank(id, recompress(h.lowrank_block(id), eps_rel));
}

/// Low-rank representation of an entire block subtree (dense leaves are
/// factored exactly, merges recompressed bottom-up).
inline LowRankBlock agglomerate_block(const HMatrix& h, int id, double eps_rel) {
    switch (h.state(id)) {
        case HMatrix::State::LowRank:
            return h.lowrank_block(id);
        case HMatrix::State::Dense: {
            LowRankBlock b;
            b.U = h.dense_block(id);
            b.V = Matrix::Identity(h.col_cluster(id).size(), h.col_cluster(id).size());
            return recompress(b, eps_rel);
        }
        case HMatrix::State::Split: {
            const Cluster& r = h.row_cluster(id);
            const Cluster& c = h.col_cluster(id);
            std::vector<std::pair<int, LowRankBlock>> parts;
            int ktot = 0;
            for (int kid : h.block_tree().node(id).children) {
                if (h.state(kid) == HMatrix::State::Unused)
                    continue;
                parts.emplace_back(kid, agglomerate_block(h, kid, eps_rel));
                ktot += parts.back().second.rank();
            }
            LowRankBlock stacked;
            stacked.U = Matrix::Zero(r.size(), ktot);
            stacked.V = Matrix::Zero(c.size(), ktot);
            int off = 0;
            for (auto& [kid, b] : parts) {
                const Cluster& rk = h.row_cluster(kid);
                const Cluster& ck = h.col_cluster(kid);
                stacked.U.block(rk.begin - r.begin, off, rk.size(), b.rank()) = b.U;
                stacked.V.block(ck.begin - c.begin, off, ck.size(), b.rank()) = b.V;
                off += b.rank();
            }
            return recompress(stacked, eps_rel);
        }
        default:
            throw std::logic_error("agglomerate_block: unused block");
    }
}

/// Bottom-up block agglomeration: replace a split node whose children are
/// all leaves (low-rank, or leaf-sized dense blocks factored exactly) by
/// one recompressed low-rank block whenever that strictly reduces storage.
inline void coarsen(HMatrix& h, double eps_rel) {
    const BlockTree& bt = h.block_tree();
    // children have larger ids than their parent, so descending order is
    // bottom-up
    for (int id = bt.num_nodes() - 1; id >= 0; --id) {
        if (h.state(id) != HMatrix::State::Split || !h.stored_side(id))
            continue;
        const auto& kids = bt.node(id).children;
        bool mergeable = !kids.empty();
        std::size_t child_entries = 0;
        for (int kid : kids) {
            const auto st = h.state(kid);
            mergeable = mergeable && (st == HMatrix::State::LowRank || st == HMatrix::State::Dense);
            if (st == HMatrix::State::LowRank)
                child_entries += h.lowrank_block(kid).entries();
            else if (st == HMatrix::State::Dense)
                child_entries += h.dense_block(kid).size();
        }
        if (!mergeable)
            continue;
        LowRankBlock merged = recompress(agglomerate_block(h, id, eps_rel), eps_rel);
        if (merged.entries() < child_entries) {
            h.set_lowrank(id, std::move(merged));
            for (int kid : kids)
                h.clear(kid);
        }
    }
}

/// h <- truncate(h + X Y^T). Dense leaves are updated exactly, low-rank
/// leaves recompressed at eps_rel. In symmetric mode X Y^T must itself be
/// symmetric.
inline void low_rank_update(HMatrix& h, const Matrix& X, const Matrix& Y, double eps_rel) {
    if (X.rows() != h.dim() || Y.rows() != h.dim() || X.cols() != Y.cols())
        throw std::invalid_argument("low_rank_update: dimension mismatch");
    if (X.cols() == 0)
        return;
    for (int id = 0; id < h.block_tree().num_nodes(); ++id) {
        const auto st = h.state(id);
        if (st != HMatrix::State::Dense && st != HMatrix::State::LowRank)
            continue;
        const Cluster& r = h.row_cluster(id);
        const Cluster& c = h.col_cluster(id);
        const auto Xr = X.middleRows(r.begin, r.size());
        const auto Yc = Y.middleRows(c.begin, c.size());
        if (st == HMatrix::State::Dense) {
            h.dense_block(id).noalias() += Xr * Yc.transpose();
        } else {
            LowRankBlock& b = h.lowrank_block(id);
            LowRankBlock ext;
            ext.U.resize(r.size(), b.rank() + X.cols());
            ext.V.resize(c.size(), b.rank() + X.cols());
            ext.U << b.U, Xr;
            ext.V << b.V, Yc;
            h.set_lowrank(id, recompress(ext, eps_rel));
        }
    }
}

/// Per-leaf structure dump: row offset, col offset, rows, cols, kind, rank.
inline void dump_block_structure(const HMatrix& h, std::ostream& out) {
    out << "row,col,rows,cols,kind,rank\n";
    for (int id = 0; id < h.block_tree().num_nodes(); ++id) {
        const auto st = h.state(id);
        if (st != HMatrix::State::Dense && st != HMatrix::State::LowRank)
            continue;
        const Cluster& r = h.row_cluster(id);
        const Cluster& c = h.col_cluster(id);
        const bool dense = st == HMatrix::State::Dense;
        const int rank = dense ? std::min(r.size(), c.size()) : h.lowrank_block(id).rank();
        out << r.begin << ',' << c.begin << ',' << r.size() << ',' << c.size() << ','
            << (dense ? "dense" : "lowrank") << ',' << rank << '\n';
    }
}

}  // namespace tps
