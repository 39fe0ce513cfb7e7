//
// Project     : tps
// Module      : cluster
// Description : geometric cluster tree and admissibility block partition
//

#pragma once

#include <numeric>
#include <vector>

#include <tps/geometry.hpp>
#include <tps/types.hpp>

namespace tps {

struct Cluster {
    int begin = 0;  ///< index range into the permuted order
    int end = 0;
    Box box;        ///< tight bounding box of the cluster's points
    int child[2] = {-1, -1};

    int size() const { return end - begin; }
    bool is_leaf() const { return child[0] < 0; }
};

/// Recursive geometric bisection: split the tight bounding box at the
/// midpoint of its longest axis (ties towards the lower axis index) until
/// clusters hold at most leaf_size indices. Indices are reordered so every
/// cluster is a contiguous range; perm()[i] maps permuted position i to the
/// original point index.
class ClusterTree {
  public:
    ClusterTree(const std::vector<Point>& points, int leaf_size) : leaf_size_(leaf_size) {
        if (leaf_size < 1)
            throw std::invalid_argument("ClusterTree: leaf_size must be >= 1");
        if (points.empty())
            throw std::invalid_argument("ClusterTree: empty point set");
        perm_.resize(points.size());
        std::iota(perm_.begin(), perm_.end(), 0);
        build(points, 0, static_cast<int>(points.size()));
    }

    int root() const { return 0; }
    const Cluster& node(int id) const { return nodes_[id]; }
    int num_nodes() const { return static_cast<int>(nodes_.size()); }
    int size() const { return nodes_[0].size(); }
    int leaf_size() const { return leaf_size_; }
    const std::vector<int>& perm() const { return perm_; }

    /// Points in permuted order.
    std::vector<Point> permuted_points(const std::vector<Point>& original) const {
        std::vector<Point> out(perm_.size());
        for (std::size_t i = 0; i < perm_.size(); ++i)
            out[i] = original[perm_[i]];
        return out;
    }

  private:
    int build(const std::vector<Point>& points, int begin, int end) {
        const int id = static_cast<int>(nodes_.size());
        nodes_.push_back({});
        Cluster cl;
        cl.begin = begin;
        cl.end = end;
        cl.box.lo = cl.box.hi = points[perm_[begin]];
        for (int i = begin + 1; i < end; ++i) {
            cl.box.lo = cl.box.lo.cwiseMin(points[perm_[i]]);
            cl.box.hi = cl.box.hi.cwiseMax(points[perm_[i]]);
        }
        if (end - begin > leaf_size_) {
            const Point ext = cl.box.hi - cl.box.lo;
            const int axis = ext.y() > ext.x() ? 1 : 0;
            if (ext[axis] <= 0.0)
                throw std::invalid_argument("ClusterTree: coincident points cannot be split");
            const double mid = 0.5 * (cl.box.lo[axis] + cl.box.hi[axis]);
            // tight boxes guarantee both sides are nonempty
            auto it = std::partition(perm_.begin() + begin, perm_.begin() + end,
                                     [&](int idx) { return points[idx][axis] < mid; });
            const int split = static_cast<int>(it - perm_.begin());
            nodes_[id] = cl;  // store before recursing (vector may grow)
            const int c0 = build(points, begin, split);
            const int c1 = build(points, split, end);
            nodes_[id].child[0] = c0;
            nodes_[id].child[1] = c1;
            nodes_[id].box = cl.box;
        } else {
            nodes_[id] = cl;
        }
        return id;
    }

    int leaf_size_;
    std::vector<Cluster> nodes_;
    std::vector<int> perm_;
};

enum class BlockKind { Split, Dense, Admissible };

struct BlockNode {
    int row = 0;  ///< row cluster id
    int col = 0;  ///< column cluster id
    BlockKind kind = BlockKind::Split;
    std::vector<int> children;
};

/// Partition of the index product driven by the admissibility condition
/// max{diam(sigma), diam(tau)} <= eta * dist(sigma, tau) with box metrics.
class BlockTree {
  public:
    BlockTree(const ClusterTree& tree, double eta) : tree_(&tree), eta_(eta) {
        if (!(eta > 0.0))
            throw std::invalid_argument("BlockTree: eta must be positive");
        build(tree.root(), tree.root());
    }

    const ClusterTree& cluster_tree() const { return *tree_; }
    double eta() const { return eta_; }
    int root() const { return 0; }
    const BlockNode& node(int id) const { return nodes_[id]; }
    int num_nodes() const { return static_cast<int>(nodes_.size()); }

    bool admissible(const Cluster& a, const Cluster& b) const {
        const double dist = Box::distance(a.box, b.box);
        return dist > 0.0 && std::max(a.box.diameter(), b.box.diameter()) <= eta_ * dist;
    }

    /// All leaf ids in construction order.
    std::vector<int> leaves() const {
        std::vector<int> out;
        for (int i = 0; i < num_nodes(); ++i)
            if (nodes_[i].kind != BlockKind::Split)
                out.push_back(i);
        return out;
    }

  private:
    int build(int row, int col) {
        const int id = static_cast<int>(nodes_.size());
        nodes_.push_back({row, col, BlockKind::Split, {}});
        const Cluster& r = tree_->node(row);
        const Cluster& c = tree_->node(col);
        if (admissible(r, c)) {
            nodes_[id].kind = BlockKind::Admissible;
        } else if (r.is_leaf() && c.is_leaf()) {
            nodes_[id].kind = BlockKind::Dense;
        } else {
            // size-matched descent: refine the side with the larger box,
            // both when comparable (diagonal pairs always split both)
            const double dr = r.box.diameter(), dc = c.box.diameter();
            const bool split_row = !r.is_leaf() && (c.is_leaf() || dr >= dc * (1.0 - 1e-12));
            const bool split_col = !c.is_leaf() && (r.is_leaf() || dc >= dr * (1.0 - 1e-12));
            const auto rows = split_row ? std::vector<int>{r.child[0], r.child[1]}
                                        : std::vector<int>{row};
            const auto cols = split_col ? std::vector<int>{c.child[0], c.child[1]}
                                        : std::vector<int>{col};
            std::vector<int> kids;
            for (int rc : rows)
                for (int cc : cols)
                    kids.push_back(build(rc, cc));
            nodes_[id].children = std::move(kids);
        }
        return id;
    }

    const ClusterTree* tree_;
    double eta_;
    std::vector<BlockNode> nodes_;
};

}  // namespace tps
