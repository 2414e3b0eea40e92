#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "ddvc/errors.hpp"
#include "ddvc/rng.hpp"
#include "ddvc/velocity.hpp"

namespace ddvc {

/// Affine state-feedback gain on increments: the applied gain is
/// K(p) = K0 + sum_i p_i * Kbar_block_i.
struct VelocityGains {
    Eigen::MatrixXd K0;   // n_u x n_x
    Eigen::MatrixXd Kbar; // n_u x (n_x * n_p), horizontal blocks K_1..K_np

    Eigen::Index state_dim() const { return K0.cols(); }
    Eigen::Index input_dim() const { return K0.rows(); }
    Eigen::Index scheduling_dim() const {
        return K0.cols() == 0 ? 0 : Kbar.cols() / K0.cols();
    }

    Eigen::MatrixXd block(Eigen::Index i) const {
        return Kbar.middleCols(i * K0.cols(), K0.cols());
    }

    static VelocityGains zero(Eigen::Index nu, Eigen::Index nx, Eigen::Index np) {
        return {Eigen::MatrixXd::Zero(nu, nx), Eigen::MatrixXd::Zero(nu, nx * np)};
    }
};

inline double spectral_radius(const Eigen::MatrixXd& A) {
    return A.eigenvalues().cwiseAbs().maxCoeff();
}

/// Evaluates the affine gain at a scheduling point.
inline Eigen::MatrixXd eval_gain(const VelocityGains& g, const Eigen::VectorXd& p) {
    if (p.size() != g.scheduling_dim())
        throw DimensionError("scheduling vector size does not match gains");
    Eigen::MatrixXd K = g.K0;
    for (Eigen::Index i = 0; i < p.size(); ++i) K += p(i) * g.block(i);
    return K;
}

/// Shifted data matrices of one increment/scheduling sequence, together
/// with their Kronecker-weighted companions and the stacked matrix used by
/// the excitation rank test.
struct DataMatrices {
    Eigen::Index state_dim = 0;
    Eigen::Index input_dim = 0;
    Eigen::Index scheduling_dim = 0;

    Eigen::MatrixXd U;     // n_u x (N-1)
    Eigen::MatrixXd Up;    // n_u*n_p x (N-1),  col j = p_j kron U.col(j)
    Eigen::MatrixXd X;     // n_x x (N-1)
    Eigen::MatrixXd Xp;    // n_x*n_p x (N-1),  col j = p_j kron X.col(j)
    Eigen::MatrixXd Xnext; // n_x x (N-1), one step ahead of X
    Eigen::MatrixXd P;     // n_p x (N-1), scheduling aligned with X columns
    Eigen::MatrixXd G;     // stacked [X; Xp; U; Up]

    Eigen::Index columns() const { return X.cols(); }
    Eigen::Index pe_target_rank() const {
        return (1 + scheduling_dim) * (state_dim + input_dim);
    }
};

/// Assembles the shifted data matrices from a velocity dictionary. Columns
/// run over the first N-1 entries; Xnext carries the one-step shift.
inline DataMatrices build_data_matrices(const VelocityDictionary& vd) {
    const Eigen::Index n = vd.length();
    if (n < 2)
        throw InsufficientDataError(
            "need at least 2 increment samples to form shifted data matrices");
    const Eigen::Index nx = vd.state_dim(), nu = vd.input_dim(),
                       np = vd.scheduling_dim();
    const Eigen::Index cols = n - 1;

    DataMatrices dm;
    dm.state_dim = nx;
    dm.input_dim = nu;
    dm.scheduling_dim = np;
    dm.U = vd.input_increments().leftCols(cols);
    dm.X = vd.state_increments().leftCols(cols);
    dm.Xnext = vd.state_increments().rightCols(cols);
    dm.P = vd.scheduling().leftCols(cols);
    dm.Up.resize(nu * np, cols);
    dm.Xp.resize(nx * np, cols);
    for (Eigen::Index j = 0; j < cols; ++j) {
        for (Eigen::Index i = 0; i < np; ++i) {
            dm.Up.col(j).segment(i * nu, nu) = dm.P(i, j) * dm.U.col(j);
            dm.Xp.col(j).segment(i * nx, nx) = dm.P(i, j) * dm.X.col(j);
        }
    }
    dm.G.resize((1 + np) * (nx + nu), cols);
    dm.G << dm.X, dm.Xp, dm.U, dm.Up;
    return dm;
}

/// Numerical rank of the stacked data matrix and whether it reaches the
/// full-row-rank excitation condition.
inline std::pair<Eigen::Index, bool> check_pe(const DataMatrices& dm,
                                              double rank_tol = 1e-8) {
    if (dm.G.size() == 0) return {0, dm.pe_target_rank() == 0};
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(dm.G);
    const double largest = svd.singularValues()(0);
    Eigen::Index rank = 0;
    if (largest > 0)
        for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i)
            if (svd.singularValues()(i) > rank_tol * largest) ++rank;
    return {rank, rank == dm.pe_target_rank()};
}

/// Matrix linking the measured data to a chosen feedback gain; realizes the
/// closed loop purely from data via closed_loop_step().
struct ConsistencyMatrix {
    Eigen::MatrixXd V;        // (N-1) x n_x(1 + n_p + n_p^2)
    double residual = 0.0;    // max abs residual of the defining equation
};

/// Target of the consistency equation: the identity/gain block matrix that
/// the stacked data matrix must reproduce.
inline Eigen::MatrixXd consistency_target(Eigen::Index nx, Eigen::Index nu,
                                          Eigen::Index np,
                                          const VelocityGains& gains) {
    const Eigen::Index rows = (1 + np) * (nx + nu);
    const Eigen::Index cols = nx * (1 + np + np * np);
    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(rows, cols);
    T.topLeftCorner(nx, nx).setIdentity();
    T.block(nx, nx, nx * np, nx * np).setIdentity();
    T.block(nx + nx * np, 0, nu, nx) = gains.K0;
    T.block(nx + nx * np, nx, nu, nx * np) = gains.Kbar;
    for (Eigen::Index i = 0; i < np; ++i) {
        T.block(nx + nx * np + nu + i * nu, nx + i * nx, nu, nx) = gains.K0;
        T.block(nx + nx * np + nu + i * nu, nx + nx * np + i * nx * np, nu,
                nx * np) = gains.Kbar;
    }
    return T;
}

/// Minimum-norm solution of the consistency equation for the given gains.
/// Requires excitation; otherwise the equation may have no solution.
inline ConsistencyMatrix closed_loop_consistency(const DataMatrices& dm,
                                                 const VelocityGains& gains,
                                                 double residual_tol = 1e-8) {
    if (gains.state_dim() != dm.state_dim || gains.input_dim() != dm.input_dim ||
        gains.scheduling_dim() != dm.scheduling_dim)
        throw DimensionError("gain dimensions do not match data matrices");
    const auto [rank, ok] = check_pe(dm);
    if (!ok)
        throw PersistencyError(
            "data is not persistently exciting (rank " + std::to_string(rank) +
            " of " + std::to_string(dm.pe_target_rank()) +
            "); the consistency equation may be unsolvable");
    const Eigen::MatrixXd target = consistency_target(
        dm.state_dim, dm.input_dim, dm.scheduling_dim, gains);
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(
        dm.G, Eigen::ComputeThinU | Eigen::ComputeThinV);
    ConsistencyMatrix out;
    out.V = svd.solve(target);
    out.residual = (dm.G * out.V - target).cwiseAbs().maxCoeff();
    if (out.residual > residual_tol)
        throw PersistencyError("consistency equation residual " +
                               std::to_string(out.residual) +
                               " exceeds tolerance");
    return out;
}

/// Stacks [dx; p kron dx; p kron p kron dx].
inline Eigen::VectorXd scheduling_lift(const Eigen::VectorXd& dx,
                                       const Eigen::VectorXd& p) {
    const Eigen::Index nx = dx.size(), np = p.size();
    Eigen::VectorXd z(nx * (1 + np + np * np));
    z.head(nx) = dx;
    for (Eigen::Index i = 0; i < np; ++i)
        z.segment(nx + i * nx, nx) = p(i) * dx;
    for (Eigen::Index i = 0; i < np; ++i)
        for (Eigen::Index j = 0; j < np; ++j)
            z.segment(nx * (1 + np) + (i * np + j) * nx, nx) = p(i) * p(j) * dx;
    return z;
}

/// One step of the data-based closed loop at scheduling p.
inline Eigen::VectorXd closed_loop_step(const DataMatrices& dm,
                                        const ConsistencyMatrix& cm,
                                        const Eigen::VectorXd& dx,
                                        const Eigen::VectorXd& p) {
    if (dx.size() != dm.state_dim || p.size() != dm.scheduling_dim)
        throw DimensionError("state/scheduling size mismatch in closed-loop step");
    return dm.Xnext * (cm.V * scheduling_lift(dx, p));
}

/// Synthetic affine-LPV velocity system plus a data set generated from it;
/// used to exercise the data-based representation against the model-based
/// one on known ground truth.
struct SyntheticLpv {
    LPVCoefficients coeffs;
    VelocityDictionary dictionary;
    PBox box;
};

inline SyntheticLpv make_synthetic_lpv(RandomStream& rng, Eigen::Index nx,
                                       Eigen::Index nu, Eigen::Index np,
                                       Eigen::Index extra_columns = 4) {
    LPVCoefficients c;
    c.A.resize(static_cast<std::size_t>(np) + 1);
    c.B.resize(static_cast<std::size_t>(np) + 1);
    Eigen::MatrixXd A0(nx, nx);
    for (Eigen::Index i = 0; i < nx; ++i)
        for (Eigen::Index j = 0; j < nx; ++j) A0(i, j) = rng.normal();
    // place the offset dynamics anywhere between comfortably stable and
    // mildly unstable
    const double target_radius = rng.uniform(0.3, 1.2);
    const double actual = std::max(1e-9, A0.eigenvalues().cwiseAbs().maxCoeff());
    A0 *= target_radius / actual;
    c.A[0] = A0;
    for (Eigen::Index t = 1; t <= np; ++t) {
        Eigen::MatrixXd At(nx, nx);
        for (Eigen::Index i = 0; i < nx; ++i)
            for (Eigen::Index j = 0; j < nx; ++j)
                At(i, j) = 0.3 * rng.normal();
        c.A[static_cast<std::size_t>(t)] = At;
    }
    for (Eigen::Index t = 0; t <= np; ++t) {
        Eigen::MatrixXd Bt(nx, nu);
        for (Eigen::Index i = 0; i < nx; ++i)
            for (Eigen::Index j = 0; j < nu; ++j)
                Bt(i, j) = (t == 0 ? 1.0 : 0.3) * rng.normal();
        c.B[static_cast<std::size_t>(t)] = Bt;
    }

    const Eigen::Index length = (1 + np) * (nx + nu) + 1 + extra_columns;
    Eigen::MatrixXd dx(nx, length), du(nu, length), p(np, length);
    for (Eigen::Index i = 0; i < nx; ++i) dx(i, 0) = rng.normal();
    for (Eigen::Index k = 0; k < length; ++k) {
        for (Eigen::Index i = 0; i < np; ++i) p(i, k) = rng.uniform(-1.0, 1.0);
        for (Eigen::Index i = 0; i < nu; ++i) du(i, k) = rng.normal();
        if (k + 1 < length) {
            const VelocityMatrices m = lpv_eval(c, p.col(k));
            dx.col(k + 1) = m.A * dx.col(k) + m.B * du.col(k);
        }
    }
    PBox box(Eigen::VectorXd::Constant(np, -1.0),
             Eigen::VectorXd::Constant(np, 1.0));
    return {std::move(c), VelocityDictionary(std::move(dx), std::move(p),
                                             std::move(du)),
            std::move(box)};
}

} // namespace ddvc
