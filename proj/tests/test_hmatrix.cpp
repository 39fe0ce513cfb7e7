#include <catch2/catch_amalgamated.hpp>

#include <random>

#include <tps/hmatrix.hpp>

#include "oracles.hpp"

using namespace tps;

namespace {

Matrix dense_kernel_matrix(const std::vector<Point>& pts) {
    Matrix g(pts.size(), pts.size());
    for (std::size_t j = 0; j < pts.size(); ++j)
        for (std::size_t i = 0; i < pts.size(); ++i)
            g(static_cast<int>(i), static_cast<int>(j)) =
                phi2_r2((pts[i] - pts[j]).squaredNorm());
    return g;
}

/// Chebyshev interpolant of the kernel on a box pair, evaluated directly at
/// arbitrary sample pairs (independent of assemble_hmatrix).
double cheb_interp_value(const Box& bs, const Box& bt, int p, const Point& x, const Point& y) {
    const Matrix lx = cheb::tensor_lagrange({x}, 0, 1, bs, p);
    const Matrix ly = cheb::tensor_lagrange({y}, 0, 1, bt, p);
    const Matrix k = cheb::kernel_at_nodes(bs, bt, p);
    return (lx * k * ly.transpose())(0, 0);
}

double max_cheb_error(const Box& bs, const Box& bt, int p, int samples, unsigned seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> u(0, 1);
    double worst = 0.0;
    for (int t = 0; t < samples; ++t) {
        const Point x(bs.lo.x() + u(rng) * (bs.hi.x() - bs.lo.x()),
                      bs.lo.y() + u(rng) * (bs.hi.y() - bs.lo.y()));
        const Point y(bt.lo.x() + u(rng) * (bt.hi.x() - bt.lo.x()),
                      bt.lo.y() + u(rng) * (bt.hi.y() - bt.lo.y()));
        const double exact = phi2_r2((x - y).squaredNorm());
        worst = std::max(worst, std::abs(exact - cheb_interp_value(bs, bt, p, x, y)));
    }
    return worst;
}

}  // namespace

TEST_CASE("recompress keeps exact rank-1 blocks") {
    std::mt19937 rng(1);
    std::normal_distribution<double> g;
    LowRankBlock b;
    b.U = Matrix::NullaryExpr(30, 1, [&](int, int) { return g(rng); });
    b.V = Matrix::NullaryExpr(25, 1, [&](int, int) { return g(rng); });
    const Matrix before = b.U * b.V.transpose();
    const LowRankBlock after = recompress(b, 1e-8);
    CHECK(after.rank() == 1);
    CHECK((after.U * after.V.transpose() - before).norm() <= 1e-12 * before.norm());
}

TEST_CASE("recompress finds the true rank of an inflated factorization") {
    std::mt19937 rng(2);
    std::normal_distribution<double> g;
    const Matrix x = Matrix::NullaryExpr(40, 5, [&](int, int) { return g(rng); });
    const Matrix y = Matrix::NullaryExpr(35, 5, [&](int, int) { return g(rng); });
    const Matrix mix1 = Matrix::NullaryExpr(5, 20, [&](int, int) { return g(rng); });
    const Matrix mix2 = Matrix::NullaryExpr(5, 20, [&](int, int) { return g(rng); });
    LowRankBlock b;
    b.U = x * mix1;
    b.V = y * mix2;  // U V^T = x (mix1 mix2^T) y^T has rank <= 5
    const Matrix before = b.U * b.V.transpose();
    const LowRankBlock after = recompress(b, 1e-12);
    CHECK(after.rank() <= 5);
    CHECK((after.U * after.V.transpose() - before).norm() <= 1e-9 * before.norm());
}

TEST_CASE("recompress at eps_rel = 1 drops to rank 0 or 1") {
    std::mt19937 rng(3);
    std::normal_distribution<double> g;
    LowRankBlock b;
    b.U = Matrix::NullaryExpr(20, 6, [&](int, int) { return g(rng); });
    b.V = Matrix::NullaryExpr(20, 6, [&](int, int) { return g(rng); });
    CHECK(recompress(b, 1.0).rank() <= 1);
}

TEST_CASE("single dense leaf reproduces the kernel matrix exactly") {
    const auto pts = oracle::random_domain_points(Domain::unit_square(), 24, 5);
    ClusterTree tree(pts, 32);
    BlockTree blocks(tree, 2.0);
    const auto perm_pts = tree.permuted_points(pts);
    const HMatrix h = assemble_hmatrix(perm_pts, tree, blocks, 4, true);
    REQUIRE(h.state(0) == HMatrix::State::Dense);
    const Matrix g = dense_kernel_matrix(perm_pts);
    CHECK(h.dense_block(0) == g);

    std::mt19937 rng(6);
    std::normal_distribution<double> gauss;
    const Vector v = Vector::NullaryExpr(24, [&](int) { return gauss(rng); });
    const Vector hv = h.matvec(v);
    const Vector gv = g * v;
    for (int i = 0; i < 24; ++i)
        CHECK(hv[i] == gv[i]);  // bit identical on the degenerate structure
}

TEST_CASE("matvec of zero vector is zero, dimensions are checked") {
    const auto pts = oracle::random_domain_points(Domain::unit_square(), 200, 7);
    ClusterTree tree(pts, 16);
    BlockTree blocks(tree, 2.0);
    const HMatrix h = assemble_hmatrix(tree.permuted_points(pts), tree, blocks, 3, true);
    CHECK(h.matvec(Vector::Zero(200)).isZero());
    CHECK_THROWS_AS(h.matvec(Vector::Zero(10)), std::invalid_argument);
}

TEST_CASE("all-dense block partition matches the dense matrix") {
    const auto pts = oracle::random_domain_points(Domain::unit_square(), 64, 8);
    ClusterTree tree(pts, 8);
    BlockTree blocks(tree, 1e-9);  // nothing is admissible at this eta
    const auto perm_pts = tree.permuted_points(pts);
    const HMatrix h = assemble_hmatrix(perm_pts, tree, blocks, 2, true);
    const Matrix g = dense_kernel_matrix(perm_pts);
    std::mt19937 rng(9);
    std::normal_distribution<double> gauss;
    const Vector v = Vector::NullaryExpr(64, [&](int) { return gauss(rng); });
    CHECK((h.matvec(v) - g * v).lpNorm<Eigen::Infinity>() <=
          1e-14 * (g * v).lpNorm<Eigen::Infinity>());
}

TEST_CASE("Chebyshev interpolation error on an admissible box pair") {
    const Box bs{Point(0, 0), Point(1, 1)};
    const Box bt{Point(3, 3), Point(4, 4)};
    const double dist = Box::distance(bs, bt);

    // p = 4: the error follows the dist^2 (1 + |log dist|) e^{-b p} shape
    const double e4 = max_cheb_error(bs, bt, 4, 1000, 11);
    std::vector<double> ps, es;
    for (int p = 2; p <= 10; ++p) {
        ps.push_back(p);
        es.push_back(max_cheb_error(bs, bt, p, 400, 100 + p));
    }
    // fit log e = log C' - b p
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < ps.size(); ++i) {
        sx += ps[i];
        sy += std::log(es[i]);
        sxx += ps[i] * ps[i];
        sxy += ps[i] * std::log(es[i]);
    }
    const double n = static_cast<double>(ps.size());
    const double b = -(n * sxy - sx * sy) / (n * sxx - sx * sx);
    CHECK(b > 0.0);
    const double shape = dist * dist * (1.0 + std::abs(std::log(dist)));
    const double cfit = e4 / (shape * std::exp(-b * 4));
    CHECK(e4 <= cfit * shape * std::exp(-b * 4) * (1.0 + 1e-12));
}

TEST_CASE("degree-zero interpolation is the box-center constant") {
    const Box bs{Point(0, 0), Point(1, 1)};
    const Box bt{Point(3, 3), Point(4, 4)};
    const Point cs(0.5, 0.5), ct(3.5, 3.5);
    const double center_value = phi2_r2((cs - ct).squaredNorm());
    CHECK(cheb_interp_value(bs, bt, 0, Point(0.1, 0.9), Point(3.2, 3.9)) ==
          Catch::Approx(center_value).epsilon(1e-12));

    // the error is bounded by the kernel's oscillation over the boxes
    std::mt19937 rng(13);
    std::uniform_real_distribution<double> u(0, 1);
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (int t = 0; t < 2000; ++t) {
        const Point x(u(rng), u(rng));
        const Point y(3 + u(rng), 3 + u(rng));
        const double v = phi2_r2((x - y).squaredNorm());
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    CHECK(max_cheb_error(bs, bt, 0, 1000, 17) <= (hi - lo) + 1e-12);
}

TEST_CASE("error decays exponentially in the degree at eta = 1") {
    const Box bs{Point(0, 0), Point(1, 1)};
    const Box bt{Point(2, 2), Point(3, 3)};  // diam = dist = sqrt 2
    std::vector<double> errs;
    for (int p = 2; p <= 10; ++p)
        errs.push_back(max_cheb_error(bs, bt, p, 600, 200 + p));
    for (std::size_t i = 1; i < errs.size(); ++i)
        CHECK(errs[i] < errs[i - 1]);
    for (std::size_t i = 0; i + 1 < errs.size(); ++i) {
        const int p = static_cast<int>(i) + 2;
        if (p >= 3)
            CHECK(errs[i + 1] / errs[i] <= 0.8);
    }
}

TEST_CASE("assembled ranks respect (p+1)^2 and shrink under recompression") {
    const NodeSet ns = uniform_nodes(Domain::unit_square(), 33);  // 1089 points
    ClusterTree tree(ns.points, 32);
    BlockTree blocks(tree, 2.0);
    const int p = 5;
    HMatrix h = assemble_hmatrix(tree.permuted_points(ns.points), tree, blocks, p, true);
    int lowrank_blocks = 0;
    for (int id = 0; id < blocks.num_nodes(); ++id)
        if (h.state(id) == HMatrix::State::LowRank) {
            ++lowrank_blocks;
            CHECK(h.lowrank_block(id).rank() <= (p + 1) * (p + 1));
        }
    REQUIRE(lowrank_blocks > 0);
    const std::size_t before = h.storage_entries();
    recompress_all(h, 1e-8);
    CHECK(h.storage_entries() < before);
    for (int id = 0; id < blocks.num_nodes(); ++id)
        if (h.state(id) == HMatrix::State::LowRank)
            CHECK(h.lowrank_block(id).rank() < (p + 1) * (p + 1));
}

TEST_CASE("matvec against the dense kernel matrix at N = 2025") {
    const NodeSet ns = uniform_nodes(Domain::unit_square(), 45);
    ClusterTree tree(ns.points, 32);
    BlockTree blocks(tree, 2.0);
    const auto perm_pts = tree.permuted_points(ns.points);
    HMatrix h = assemble_hmatrix(perm_pts, tree, blocks, 6, true);
    recompress_all(h, 1e-8);
    coarsen(h, 1e-8);
    const Matrix g = dense_kernel_matrix(perm_pts);
    std::mt19937 rng(23);
    std::normal_distribution<double> gauss;
    for (int t = 0; t < 10; ++t) {
        const Vector v = Vector::NullaryExpr(ns.size(), [&](int) { return gauss(rng); });
        const Vector gv = g * v;
        CHECK((h.matvec(v) - gv).norm() <= 1e-5 * gv.norm());
    }
}

TEST_CASE("symmetric mode: bilinear form is symmetric") {
    const NodeSet ns = uniform_nodes(Domain::unit_square(), 20);
    ClusterTree tree(ns.points, 16);
    BlockTree blocks(tree, 2.0);
    HMatrix h = assemble_hmatrix(tree.permuted_points(ns.points), tree, blocks, 5, true);
    recompress_all(h, 1e-10);
    std::mt19937 rng(29);
    std::normal_distribution<double> gauss;
    for (int t = 0; t < 5; ++t) {
        const Vector v = Vector::NullaryExpr(ns.size(), [&](int) { return gauss(rng); });
        const Vector w = Vector::NullaryExpr(ns.size(), [&](int) { return gauss(rng); });
        const double vhw = v.dot(h.matvec(w));
        const double whv = w.dot(h.matvec(v));
        CHECK(vhw == Catch::Approx(whv).epsilon(1e-12));
    }
}

TEST_CASE("coarsen collapses a globally rank-1 matrix to the root") {
    const auto pts = oracle::random_domain_points(Domain::unit_square(), 256, 31);
    ClusterTree tree(pts, 16);
    BlockTree blocks(tree, 2.0);
    std::mt19937 rng(37);
    std::normal_distribution<double> gauss;
    const Vector u = Vector::NullaryExpr(256, [&](int) { return gauss(rng); });
    const Vector w = Vector::NullaryExpr(256, [&](int) { return gauss(rng); });

    HMatrix h(tree, blocks, false);
    for (int id = 0; id < blocks.num_nodes(); ++id) {
        const BlockNode& bn = blocks.node(id);
        const Cluster& r = tree.node(bn.row);
        const Cluster& c = tree.node(bn.col);
        if (bn.kind == BlockKind::Split) {
            h.set_split(id);
        } else if (bn.kind == BlockKind::Dense) {
            h.set_dense(id, u.segment(r.begin, r.size()) * w.segment(c.begin, c.size()).transpose());
        } else {
            LowRankBlock b;
            b.U = u.segment(r.begin, r.size());
            b.V = w.segment(c.begin, c.size());
            h.set_lowrank(id, b);
        }
    }
    const Vector v = Vector::NullaryExpr(256, [&](int) { return gauss(rng); });
    const Vector before = h.matvec(v);
    const std::size_t entries_before = h.storage_entries();
    coarsen(h, 1e-10);
    CHECK(h.storage_entries() <= entries_before);
    // everything below the root merged away
    CHECK(h.state(0) != HMatrix::State::Split);
    const Vector after = h.matvec(v);
    CHECK((after - before).norm() <= 1e-9 * before.norm());
}

TEST_CASE("coarsen leaves incompressible blocks alone and never grows storage") {
    const NodeSet ns = uniform_nodes(Domain::unit_square(), 33);
    ClusterTree tree(ns.points, 32);
    BlockTree blocks(tree, 2.0);
    HMatrix h = assemble_hmatrix(tree.permuted_points(ns.points), tree, blocks, 4, true);
    recompress_all(h, 1e-8);
    const std::size_t before = h.storage_entries();
    coarsen(h, 1e-8);
    CHECK(h.storage_entries() <= before);

    // full-rank random children cannot merge at a tight tolerance
    const auto pts = oracle::random_domain_points(Domain::unit_square(), 64, 41);
    ClusterTree t2(pts, 8);
    BlockTree b2(t2, 2.0);
    HMatrix h2(t2, b2, false);
    std::mt19937 rng(43);
    std::normal_distribution<double> gauss;
    for (int id = 0; id < b2.num_nodes(); ++id) {
        const BlockNode& bn = b2.node(id);
        const Cluster& r = t2.node(bn.row);
        const Cluster& c = t2.node(bn.col);
        if (bn.kind == BlockKind::Split) {
            h2.set_split(id);
        } else if (bn.kind == BlockKind::Dense) {
            h2.set_dense(id,
                         Matrix::NullaryExpr(r.size(), c.size(), [&](int, int) { return gauss(rng); }));
        } else {
            LowRankBlock b;
            const int k = std::min(r.size(), c.size());
            b.U = Matrix::NullaryExpr(r.size(), k, [&](int, int) { return gauss(rng); });
            b.V = Matrix::NullaryExpr(c.size(), k, [&](int, int) { return gauss(rng); });
            h2.set_lowrank(id, b);
        }
    }
    const auto states_before = [&] {
        std::vector<HMatrix::State> s;
        for (int id = 0; id < b2.num_nodes(); ++id)
            s.push_back(h2.state(id));
        return s;
    }();
    coarsen(h2, 1e-14);
    for (int id = 0; id < b2.num_nodes(); ++id)
        CHECK(h2.state(id) == states_before[id]);
}

TEST_CASE("low-rank update: zero update is a no-op, dense leaf is exact") {
    const auto pts = oracle::random_domain_points(Domain::unit_square(), 30, 47);
    ClusterTree tree(pts, 32);
    BlockTree blocks(tree, 2.0);
    const auto perm_pts = tree.permuted_points(pts);
    HMatrix h = assemble_hmatrix(perm_pts, tree, blocks, 4, true);
    const Matrix g = dense_kernel_matrix(perm_pts);

    HMatrix h0 = h;
    low_rank_update(h0, Matrix::Zero(30, 2), Matrix::Zero(30, 2), 1e-8);
    std::mt19937 rng(53);
    std::normal_distribution<double> gauss;
    const Vector v = Vector::NullaryExpr(30, [&](int) { return gauss(rng); });
    CHECK((h0.matvec(v) - h.matvec(v)).norm() == 0.0);

    const Matrix x = Matrix::NullaryExpr(30, 3, [&](int, int) { return gauss(rng); });
    low_rank_update(h, x, x, 1e-8);  // x x^T keeps the matrix symmetric
    const Matrix updated = g + x * x.transpose();
    CHECK((h.matvec(v) - updated * v).norm() <= 1e-12 * (updated * v).norm());

    CHECK_THROWS_AS(low_rank_update(h, Matrix::Zero(10, 2), Matrix::Zero(30, 2), 1e-8),
                    std::invalid_argument);
}

TEST_CASE("low-rank update at N = 2025 matches the dense oracle") {
    const NodeSet ns = uniform_nodes(Domain::unit_square(), 45);
    ClusterTree tree(ns.points, 32);
    BlockTree blocks(tree, 2.0);
    const auto perm_pts = tree.permuted_points(ns.points);
    HMatrix h = assemble_hmatrix(perm_pts, tree, blocks, 6, true);
    recompress_all(h, 1e-8);
    std::mt19937 rng(59);
    std::normal_distribution<double> gauss;
    const Matrix x = Matrix::NullaryExpr(ns.size(), 4, [&](int, int) { return gauss(rng); });
    low_rank_update(h, x, x, 1e-8);
    const Matrix updated = dense_kernel_matrix(perm_pts) + x * x.transpose();
    for (int t = 0; t < 5; ++t) {
        const Vector v = Vector::NullaryExpr(ns.size(), [&](int) { return gauss(rng); });
        const Vector ref = updated * v;
        CHECK((h.matvec(v) - ref).norm() <= 1e-5 * ref.norm());
    }
}

TEST_CASE("storage grows like N log N") {
    std::vector<double> ns_sizes, entries;
    for (int level : {32, 64, 128}) {  // N = 2^10, 2^12, 2^14
        const NodeSet ns = uniform_nodes(Domain::unit_square(), level);
        ClusterTree tree(ns.points, 32);
        BlockTree blocks(tree, 2.0);
        HMatrix h = assemble_hmatrix(tree.permuted_points(ns.points), tree, blocks, 6, true);
        recompress_all(h, 1e-8);
        coarsen(h, 1e-8);
        ns_sizes.push_back(static_cast<double>(ns.size()));
        entries.push_back(static_cast<double>(h.storage_entries()));
    }
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < ns_sizes.size(); ++i) {
        sx += std::log(ns_sizes[i]);
        sy += std::log(entries[i]);
        sxx += std::log(ns_sizes[i]) * std::log(ns_sizes[i]);
        sxy += std::log(ns_sizes[i]) * std::log(entries[i]);
    }
    const double n = 3.0;
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    CHECK(slope <= 1.25);
}

TEST_CASE("block structure dump lists every stored leaf") {
    const NodeSet ns = uniform_nodes(Domain::unit_square(), 17);
    ClusterTree tree(ns.points, 16);
    BlockTree blocks(tree, 2.0);
    HMatrix h = assemble_hmatrix(tree.permuted_points(ns.points), tree, blocks, 3, true);
    std::ostringstream os;
    dump_block_structure(h, os);
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    CHECK(line == "row,col,rows,cols,kind,rank");
    int rows = 0;
    while (std::getline(is, line))
        if (!line.empty())
            ++rows;
    int stored = 0;
    for (int id = 0; id < blocks.num_nodes(); ++id)
        if (h.state(id) == HMatrix::State::Dense || h.state(id) == HMatrix::State::LowRank)
            ++stored;
    CHECK(rows == stored);
}
