//
// Project     : tps
// Module      : solve
// Description : end-to-end interpolation pipeline: Schur operator,
//               preconditioned CG, solution reconstruction
//

#pragma once

#include <chrono>
#include <functional>
#include <memory>
#include <sstream>
#include <utility>

#include <tps/dense.hpp>
#include <tps/hcholesky.hpp>
#include <tps/hmatrix.hpp>

namespace tps {

struct SolverConfig {
    enum class Method { Dense, HMatrix };

    Method method = Method::HMatrix;
    int cheb_degree = 6;
    double eta = 2.0;
    int leaf_size = 32;
    double eps_rel = 1e-8;
    double eps_chol = 1e-4;
    double cg_tol = 1e-8;
    int cg_maxit = 500;

    void validate() const {
        if (!(cg_tol > 0.0) || cg_tol >= 1.0)
            throw std::invalid_argument("SolverConfig: cg_tol must be in (0,1)");
        if (cg_maxit < 1)
            throw std::invalid_argument("SolverConfig: cg_maxit must be >= 1");
        if (leaf_size < 1 || cheb_degree < 0 || !(eta > 0.0))
            throw std::invalid_argument("SolverConfig: invalid clustering parameters");
    }
};

struct SolveReport {
    int iterations = 0;
    double final_residual = 0.0;  ///< relative, recomputed from the true residual
    bool converged = true;
    bool spd_failure = false;     ///< negative curvature encountered in CG
    std::size_t hmatrix_storage_bytes = 0;
    int update_rank = 0;          ///< observed rank of the eliminated correction
    int chol_retries = 0;
    double chol_shift = 0.0;
    double setup_ms = 0.0;
    double factor_ms = 0.0;
    double solve_ms = 0.0;

    std::string to_json() const {
        std::ostringstream os;
        os << "{ \"iterations\": " << iterations << ", \"final_residual\": " << final_residual
           << ", \"converged\": " << (converged ? "true" : "false")
           << ", \"spd_failure\": " << (spd_failure ? "true" : "false")
           << ", \"hmatrix_storage_bytes\": " << hmatrix_storage_bytes
           << ", \"update_rank\": " << update_rank << ", \"chol_retries\": " << chol_retries
           << ", \"chol_shift\": " << chol_shift << ", \"setup_ms\": " << setup_ms
           << ", \"factor_ms\": " << factor_ms << ", \"solve_ms\": " << solve_ms << " }";
        return os.str();
    }
};

/// S v = G22 v - W_row (M^{-1} (W_col v)); the correction chain is applied
/// exactly, only G22 goes through the H-matrix.
inline Vector apply_schur(const HMatrix& h, const SchurReduction& red, const Vector& v) {
    return h.matvec(v) - red.correction(v);
}

using LinearOp = std::function<Vector(const Vector&)>;

/// Standard preconditioned conjugate gradient with a true-residual recheck
/// at acceptance. Stops at ||rhs - A x|| <= cg_tol * ||rhs|| or cg_maxit.
inline std::pair<Vector, SolveReport> pcg(const LinearOp& apply, const LinearOp& precond,
                                          const Vector& rhs, const SolverConfig& cfg) {
    cfg.validate();
    SolveReport rep;
    const double bnorm = rhs.norm();
    Vector x = Vector::Zero(rhs.size());
    if (bnorm == 0.0)
        return {x, rep};

    Vector r = rhs;
    Vector z = precond(r);
    Vector p = z;
    double rz = r.dot(z);
    for (int it = 1; it <= cfg.cg_maxit; ++it) {
        rep.iterations = it;
        const Vector Ap = apply(p);
        const double pAp = p.dot(Ap);
        if (!(pAp > 0.0)) {
            rep.spd_failure = true;
            rep.converged = false;
            rep.final_residual = r.norm() / bnorm;
            return {x, rep};
        }
        const double alpha = rz / pAp;
        x += alpha * p;
        r -= alpha * Ap;
        if (r.norm() <= cfg.cg_tol * bnorm) {
            const Vector r_true = rhs - apply(x);
            rep.final_residual = r_true.norm() / bnorm;
            if (rep.final_residual <= cfg.cg_tol)
                return {x, rep};
            // recurrence drifted: restart on the true residual
            r = r_true;
            z = precond(r);
            p = z;
            rz = r.dot(z);
            continue;
        }
        z = precond(r);
        const double rz_new = r.dot(z);
        p = z + (rz_new / rz) * p;
        rz = rz_new;
    }
    rep.converged = false;
    rep.final_residual = (rhs - apply(x)).norm() / bnorm;
    return {x, rep};
}

namespace detail {

/// f-independent part of the Schur reduction (geometry only).
inline SchurReduction make_schur_geometry(const NodeSet& nodes, KernelOrder order,
                                          std::vector<int> pivot, std::vector<int> rest) {
    const Vector dummy = Vector::Zero(nodes.size());
    return make_schur_reduction(nodes, order, dummy, std::move(pivot), std::move(rest));
}

inline void set_schur_rhs(SchurReduction& red, const Vector& f_values) {
    for (int i = 0; i < red.q(); ++i)
        red.f1[i] = f_values[red.pivot[i]];
    for (int i = 0; i < red.rest_size(); ++i)
        red.f2[i] = f_values[red.rest[i]];
}

inline double mean_dense_diagonal(const HMatrix& h) {
    double s = 0.0;
    int n = 0;
    for (int id = 0; id < h.block_tree().num_nodes(); ++id) {
        if (h.state(id) != HMatrix::State::Dense)
            continue;
        if (h.block_tree().node(id).row != h.block_tree().node(id).col)
            continue;
        s += h.dense_block(id).diagonal().cwiseAbs().sum();
        n += static_cast<int>(h.dense_block(id).rows());
    }
    return n > 0 ? s / n : 1.0;
}

}  // namespace detail

/// One-time setup (clustering, H-matrix assembly, preconditioner
/// factorization) reusable across right-hand sides on the same nodes.
class TpsSolver {
  public:
    TpsSolver(const NodeSet& nodes, KernelOrder order, SolverConfig cfg)
        : nodes_(nodes), order_(order), cfg_(cfg) {
        cfg_.validate();
        order_.validate();
        if (!order_.is_thin_plate_2d())
            cfg_.method = SolverConfig::Method::Dense;  // H path is specialized to phi_2
        const auto t0 = clock_now();

        if (cfg_.method == SolverConfig::Method::Dense) {
            setup_dense();
        } else {
            setup_hmatrix();
        }
        base_report_.setup_ms = ms_since(t0) - base_report_.factor_ms;
    }

    const SolveReport& setup_report() const { return base_report_; }
    const HMatrix* hmatrix() const { return h_.get(); }

    std::pair<Interpolant, SolveReport> solve(const Vector& f_values) const {
        if (f_values.size() != nodes_.size())
            throw std::invalid_argument("TpsSolver::solve: f size mismatch");
        SolveReport rep = base_report_;
        const auto t0 = clock_now();

        Interpolant s;
        s.nodes = nodes_;
        s.order = order_;

        if (cfg_.method == SolverConfig::Method::Dense) {
            Vector rhs = Vector::Zero(nodes_.size() + qdim_);
            rhs.head(nodes_.size()) = f_values;
            Vector x = dense_lu_->solve(rhs);
            x += dense_lu_->solve(rhs - (*dense_A_) * x);
            s.c = x.head(nodes_.size());
            s.lambda = x.tail(qdim_);
            rep.solve_ms = ms_since(t0);
            return {s, rep};
        }

        SchurReduction& red = *red_;
        detail::set_schur_rhs(red, f_values);
        Vector c2;
        if (red.rest_size() > 0) {
            const Vector rhs = red.reduced_rhs();
            const LinearOp apply = [&](const Vector& v) { return apply_schur(*h_, red, v); };
            const LinearOp precond = [&](const Vector& v) { return llt_solve(*factor_, v); };
            auto [x, cg_rep] = pcg(apply, precond, rhs, cfg_);
            c2 = std::move(x);
            rep.iterations = cg_rep.iterations;
            rep.final_residual = cg_rep.final_residual;
            rep.converged = cg_rep.converged;
            rep.spd_failure = cg_rep.spd_failure;
        } else {
            c2 = Vector::Zero(0);
        }
        auto [c, lambda] = schur_backsubstitute(red, c2, red.f1);
        s.c = std::move(c);
        s.lambda = std::move(lambda);
        rep.solve_ms = ms_since(t0);
        return {s, rep};
    }

  private:
    static std::chrono::steady_clock::time_point clock_now() {
        return std::chrono::steady_clock::now();
    }
    static double ms_since(std::chrono::steady_clock::time_point t0) {
        return std::chrono::duration<double, std::milli>(clock_now() - t0).count();
    }

    void setup_dense() {
        const int n = nodes_.size();
        qdim_ = poly_basis_size(order_);
        const Vector zero = Vector::Zero(n);
        SaddleSystem sys = assemble_dense(nodes_, order_, zero);
        dense_A_ = std::make_unique<Matrix>(Matrix::Zero(n + qdim_, n + qdim_));
        dense_A_->topLeftCorner(n, n) = sys.G;
        dense_A_->topRightCorner(n, qdim_) = sys.P;
        dense_A_->bottomLeftCorner(qdim_, n) = sys.P.transpose();
        dense_lu_ = std::make_unique<Eigen::PartialPivLU<Matrix>>(*dense_A_);
    }

    void setup_hmatrix() {
        const int n = nodes_.size();
        qdim_ = poly_basis_size(order_);
        const auto pivot = select_pivot_points(nodes_);
        std::vector<char> is_pivot(n, 0);
        for (int i : pivot)
            is_pivot[i] = 1;
        std::vector<int> rest_original;
        rest_original.reserve(n - pivot.size());
        for (int i = 0; i < n; ++i)
            if (!is_pivot[i])
                rest_original.push_back(i);

        if (rest_original.empty()) {
            red_ = std::make_unique<SchurReduction>(
                detail::make_schur_geometry(nodes_, order_, pivot, {}));
            return;
        }

        std::vector<Point> rest_pts(rest_original.size());
        for (std::size_t i = 0; i < rest_original.size(); ++i)
            rest_pts[i] = nodes_.points[rest_original[i]];
        tree_ = std::make_unique<ClusterTree>(rest_pts, cfg_.leaf_size);
        blocks_ = std::make_unique<BlockTree>(*tree_, cfg_.eta);

        // remaining indices in cluster order
        std::vector<int> rest(rest_original.size());
        for (std::size_t i = 0; i < rest.size(); ++i)
            rest[i] = rest_original[tree_->perm()[i]];

        const auto perm_pts = tree_->permuted_points(rest_pts);
        h_ = std::make_unique<HMatrix>(
            assemble_hmatrix(perm_pts, *tree_, *blocks_, cfg_.cheb_degree, true));
        recompress_all(*h_, cfg_.eps_rel);
        coarsen(*h_, cfg_.eps_rel);
        base_report_.hmatrix_storage_bytes = h_->storage_bytes();

        red_ = std::make_unique<SchurReduction>(
            detail::make_schur_geometry(nodes_, order_, pivot, rest));

        const auto t0 = clock_now();
        build_preconditioner();
        base_report_.factor_ms = ms_since(t0);
    }

    /// The factorization target is S itself: fold the eliminated correction
    /// -W_row M^{-1} W_col = -W_row T W_row^T into a copy of the G22
    /// H-matrix before factoring.
    void build_preconditioner() {
        const SchurReduction& red = *red_;
        const int q2 = 2 * red.q();
        Matrix swap = Matrix::Zero(q2, q2);  // W_col = swap-blocks of W_row^T
        swap.topRightCorner(red.q(), red.q()).setIdentity();
        swap.bottomLeftCorner(red.q(), red.q()).setIdentity();
        const Matrix T = red.M_lu.solve(swap);
        const Matrix Ts = 0.5 * (T + T.transpose());  // W T W^T is symmetric, so this is exact

        const Matrix X = -(red.W_row * Ts);
        const Matrix& Y = red.W_row;

        // observed rank of the correction via a thin QR of W_row
        {
            Eigen::HouseholderQR<Matrix> qr(red.W_row);
            const Matrix R =
                qr.matrixQR().topRows(std::min<int>(red.W_row.rows(), q2)).triangularView<Eigen::Upper>();
            Eigen::BDCSVD<Matrix> svd(R * Ts * R.transpose());
            const auto& sv = svd.singularValues();
            int r = 0;
            while (r < sv.size() && sv[r] > 1e-12 * sv[0])
                ++r;
            base_report_.update_rank = r;
        }

        HMatrix target = *h_;
        low_rank_update(target, X, Y, cfg_.eps_chol);

        double shift = 0.0;
        const double scale = detail::mean_dense_diagonal(target);
        for (int attempt = 0;; ++attempt) {
            try {
                factor_ = std::make_unique<HCholeskyFactor>(hcholesky(target, cfg_.eps_chol, shift));
                break;
            } catch (const PivotBreakdownError&) {
                if (attempt >= 3)
                    throw;
                shift = shift == 0.0 ? cfg_.eps_chol * scale : shift * 100.0;
                ++base_report_.chol_retries;
            }
        }
        base_report_.chol_shift = shift;
    }

    NodeSet nodes_;
    KernelOrder order_;
    SolverConfig cfg_;
    int qdim_ = 0;
    SolveReport base_report_;

    // dense path
    std::unique_ptr<Matrix> dense_A_;
    std::unique_ptr<Eigen::PartialPivLU<Matrix>> dense_lu_;

    // hierarchical path
    std::unique_ptr<ClusterTree> tree_;
    std::unique_ptr<BlockTree> blocks_;
    std::unique_ptr<HMatrix> h_;
    std::unique_ptr<SchurReduction> red_;
    std::unique_ptr<HCholeskyFactor> factor_;
};

/// Full pipeline on one right-hand side.
inline std::pair<Interpolant, SolveReport> interpolate(const NodeSet& nodes,
                                                       const Vector& f_values, KernelOrder order,
                                                       const SolverConfig& cfg) {
    TpsSolver solver(nodes, order, cfg);
    return solver.solve(f_values);
}

}  // namespace tps
