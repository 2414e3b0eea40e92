#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <memory>
#include <ostream>
#include <string>
#include <unsupported/Eigen/KroneckerProduct>
#include <utility>
#include <vector>

#include "ddvc/datarep.hpp"
#include "ddvc/lmi.hpp"
#include "ddvc/rng.hpp"
#include "ddvc/scheduling.hpp"

namespace ddvc {

// ---------------------------------------------------------------------------
// dimension bookkeeping and variable layout
// ---------------------------------------------------------------------------

struct SynthesisDims {
    Eigen::Index nx = 0;   // state dimension
    Eigen::Index nu = 0;   // input dimension
    Eigen::Index np = 0;   // scheduling dimension
    Eigen::Index cols = 0; // data-matrix column count

    Eigen::Index nxp() const { return nx * np; }
    Eigen::Index nxu() const { return nx + nu; }
    Eigen::Index lifted() const { return nx * (1 + np + np * np); }
    Eigen::Index sched_rows() const { return nx + nxp(); } // nx(1+np)
    Eigen::Index multiplier_size() const { return 4 * nxp(); }
    Eigen::Index fq_rows() const { return cols * (1 + np); }
    Eigen::Index fq_cols() const { return sched_rows(); }
    Eigen::Index w_size() const { return 2 * sched_rows() + nxu(); }
};

/// Flat indexing of the decision variables (Z, F_Q, Xi, Y0, Ybar).
/// Symmetric matrices are stored as their upper triangle so that symmetry
/// is structural rather than an extra constraint.
class VariableLayout {
public:
    explicit VariableLayout(const SynthesisDims& d) : dims_(d) {
        z_off_ = 0;
        z_len_ = sym_size(d.nx);
        fq_off_ = z_off_ + z_len_;
        fq_len_ = d.fq_rows() * d.fq_cols();
        xi_off_ = fq_off_ + fq_len_;
        xi_len_ = sym_size(d.multiplier_size());
        y0_off_ = xi_off_ + xi_len_;
        y0_len_ = d.nu * d.nx;
        ybar_off_ = y0_off_ + y0_len_;
        ybar_len_ = d.nu * d.nxp();
        total_ = ybar_off_ + ybar_len_;
    }

    Eigen::Index total() const { return total_; }

    Eigen::MatrixXd Z(const Eigen::VectorXd& x) const {
        return unpack_sym(x, z_off_, dims_.nx);
    }
    Eigen::MatrixXd FQ(const Eigen::VectorXd& x) const {
        return unpack_full(x, fq_off_, dims_.fq_rows(), dims_.fq_cols());
    }
    Eigen::MatrixXd Xi(const Eigen::VectorXd& x) const {
        return unpack_sym(x, xi_off_, dims_.multiplier_size());
    }
    Eigen::MatrixXd Y0(const Eigen::VectorXd& x) const {
        return unpack_full(x, y0_off_, dims_.nu, dims_.nx);
    }
    Eigen::MatrixXd Ybar(const Eigen::VectorXd& x) const {
        return unpack_full(x, ybar_off_, dims_.nu, dims_.nxp());
    }

    /// Objective selector for trace(Z).
    Eigen::VectorXd trace_z_selector() const {
        Eigen::VectorXd c = Eigen::VectorXd::Zero(total_);
        for (Eigen::Index i = 0; i < dims_.nx; ++i)
            c(z_off_ + sym_index(i, i)) = 1.0;
        return c;
    }

    static Eigen::Index sym_size(Eigen::Index n) { return n * (n + 1) / 2; }

private:
    static Eigen::Index sym_index(Eigen::Index i, Eigen::Index j) {
        // upper triangle, column-major: requires i <= j
        return j * (j + 1) / 2 + i;
    }

    static Eigen::MatrixXd unpack_sym(const Eigen::VectorXd& x,
                                      Eigen::Index off, Eigen::Index n) {
        Eigen::MatrixXd m(n, n);
        for (Eigen::Index j = 0; j < n; ++j)
            for (Eigen::Index i = 0; i <= j; ++i)
                m(i, j) = m(j, i) = x(off + sym_index(i, j));
        return m;
    }

    static Eigen::MatrixXd unpack_full(const Eigen::VectorXd& x,
                                       Eigen::Index off, Eigen::Index rows,
                                       Eigen::Index cols) {
        Eigen::MatrixXd m(rows, cols);
        for (Eigen::Index j = 0; j < cols; ++j)
            for (Eigen::Index i = 0; i < rows; ++i)
                m(i, j) = x(off + j * rows + i);
        return m;
    }

    SynthesisDims dims_;
    Eigen::Index z_off_ = 0, z_len_ = 0;
    Eigen::Index fq_off_ = 0, fq_len_ = 0;
    Eigen::Index xi_off_ = 0, xi_len_ = 0;
    Eigen::Index y0_off_ = 0, y0_len_ = 0;
    Eigen::Index ybar_off_ = 0, ybar_len_ = 0;
    Eigen::Index total_ = 0;
};

// ---------------------------------------------------------------------------
// multiplier rearrangement
// ---------------------------------------------------------------------------

/// Rearranges the blocks of F_Q = [F11 F12; F21 F22] into the wide
/// multiplier F = [F1 F2 F3] acting on the scheduling lift:
///   F1 = F11,
///   F2 block i = (column block i of F12) + (row block i of F21),
///   F3 block (i,j) = F22 block (i,j).
/// With this construction the lifted-multiplier identity holds for every
/// scheduling value, so F never needs to be a solver variable.
inline Eigen::MatrixXd fq_to_f(const Eigen::MatrixXd& FQ,
                               const SynthesisDims& d) {
    if (FQ.rows() != d.fq_rows() || FQ.cols() != d.fq_cols())
        throw DimensionError("F_Q has wrong dimensions");
    const Eigen::Index nx = d.nx, np = d.np, cols = d.cols;
    Eigen::MatrixXd F = Eigen::MatrixXd::Zero(cols, d.lifted());
    F.leftCols(nx) = FQ.topLeftCorner(cols, nx);
    for (Eigen::Index i = 0; i < np; ++i) {
        F.middleCols(nx + i * nx, nx) =
            FQ.block(0, nx + i * nx, cols, nx) +
            FQ.block(cols + i * cols, 0, cols, nx);
        for (Eigen::Index j = 0; j < np; ++j)
            F.middleCols(nx * (1 + np) + (i * np + j) * nx, nx) =
                FQ.block(cols + i * cols, nx + j * nx, cols, nx);
    }
    return F;
}

/// [I; p kron I; p kron p kron I] with identity size n.
inline Eigen::MatrixXd scheduling_lift_matrix(const Eigen::VectorXd& p,
                                              Eigen::Index n) {
    const Eigen::Index np = p.size();
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(n * (1 + np + np * np), n);
    L.topRows(n).setIdentity();
    for (Eigen::Index i = 0; i < np; ++i)
        L.middleRows(n + i * n, n) = p(i) * Eigen::MatrixXd::Identity(n, n);
    for (Eigen::Index i = 0; i < np; ++i)
        for (Eigen::Index j = 0; j < np; ++j)
            L.middleRows(n * (1 + np) + (i * np + j) * n, n) =
                p(i) * p(j) * Eigen::MatrixXd::Identity(n, n);
    return L;
}

/// [I; p kron I] with identity size n.
inline Eigen::MatrixXd scheduling_stack_matrix(const Eigen::VectorXd& p,
                                               Eigen::Index n) {
    const Eigen::Index np = p.size();
    Eigen::MatrixXd S = Eigen::MatrixXd::Zero(n * (1 + np), n);
    S.topRows(n).setIdentity();
    for (Eigen::Index i = 0; i < np; ++i)
        S.middleRows(n + i * n, n) = p(i) * Eigen::MatrixXd::Identity(n, n);
    return S;
}

/// Residual of the lifted-multiplier identity at one scheduling point:
/// F * lift(p) - stack(p)^T F_Q stack(p). Zero by construction of fq_to_f.
inline double permutation_identity_residual(const Eigen::MatrixXd& FQ,
                                            const SynthesisDims& d,
                                            const Eigen::VectorXd& p) {
    const Eigen::MatrixXd F = fq_to_f(FQ, d);
    const Eigen::MatrixXd lhs = F * scheduling_lift_matrix(p, d.nx);
    const Eigen::MatrixXd rhs = scheduling_stack_matrix(p, d.cols).transpose() *
                                FQ * scheduling_stack_matrix(p, d.nx);
    return (lhs - rhs).cwiseAbs().maxCoeff();
}

// ---------------------------------------------------------------------------
// problem assembly
// ---------------------------------------------------------------------------

struct SynthesisOptions {
    double epsilon = 1e-6;       // margin replacing strict inequalities
    bool maximize_trace = true;  // false: minimize trace(Z) instead
    double eq_tol = 1e-6;        // accepted equality residual at the solution
    int verification_samples = 100;
};

/// Assembled synthesis program: decision-variable layout, constants, and
/// the solver-ready constraint data. The builder member functions are also
/// used after the solve to re-verify the solution independently of
/// whatever the backend reports.
class SynthesisProblem {
public:
    SynthesisProblem(DataMatrices dm, Eigen::MatrixXd Q, Eigen::MatrixXd R,
                     PBox pbox, SynthesisOptions opts = {})
        : dm_(std::move(dm)), Q_(std::move(Q)), R_(std::move(R)),
          pbox_(std::move(pbox)), opts_(opts),
          dims_{dm_.state_dim, dm_.input_dim, dm_.scheduling_dim, dm_.columns()},
          layout_(dims_) {
        validate_inputs();
        build_constants();
        build_sdp();
    }

    const SynthesisDims& dims() const { return dims_; }
    const VariableLayout& layout() const { return layout_; }
    const SdpProblem& sdp() const { return sdp_; }
    const DataMatrices& data() const { return dm_; }
    const PBox& pbox() const { return pbox_; }
    const SynthesisOptions& options() const { return opts_; }
    const Eigen::MatrixXd& Q() const { return Q_; }
    const Eigen::MatrixXd& R() const { return R_; }

    // --- constraint builders (affine in the flat variable vector) ---

    /// Combined multiplier/performance inequality, PSD side (>= 0 when the
    /// margined constraint holds).
    Eigen::MatrixXd main_inequality(const Eigen::VectorXd& x) const {
        const Eigen::MatrixXd W = performance_matrix(x);
        Eigen::MatrixXd m = outer_w_.transpose() * W * outer_w_;
        if (dims_.np > 0) {
            const Eigen::MatrixXd Xi = layout_.Xi(x);
            m += outer_xi_.transpose() * Xi * outer_xi_;
        }
        const Eigen::Index n = m.rows();
        return m - opts_.epsilon * Eigen::MatrixXd::Identity(n, n);
    }

    /// Multiplier vertex inequality at scheduling vertex v, PSD side.
    Eigen::MatrixXd vertex_inequality(const Eigen::VectorXd& x,
                                      const Eigen::VectorXd& v) const {
        Eigen::MatrixXd f = multiplier_form(layout_.Xi(x), v);
        const Eigen::Index n = f.rows();
        return -f - opts_.epsilon * Eigen::MatrixXd::Identity(n, n);
    }

    Eigen::MatrixXd xi22_inequality(const Eigen::VectorXd& x) const {
        const Eigen::Index s = 2 * dims_.nxp();
        const Eigen::MatrixXd Xi = layout_.Xi(x);
        return Xi.bottomRightCorner(s, s) -
               opts_.epsilon * Eigen::MatrixXd::Identity(s, s);
    }

    Eigen::MatrixXd z_inequality(const Eigen::VectorXd& x) const {
        return layout_.Z(x) -
               opts_.epsilon * Eigen::MatrixXd::Identity(dims_.nx, dims_.nx);
    }

    /// Residual of the data-consistency equality (target minus data times
    /// rearranged multiplier).
    Eigen::MatrixXd equality_residual(const Eigen::VectorXd& x) const {
        return synthesis_target(x) - dm_.G * fq_to_f(layout_.FQ(x), dims_);
    }

    /// Scaled-gain analog of the consistency target: Z and Y in place of
    /// identity and gain blocks.
    Eigen::MatrixXd synthesis_target(const Eigen::VectorXd& x) const {
        const Eigen::Index nx = dims_.nx, nu = dims_.nu, np = dims_.np;
        const Eigen::MatrixXd Z = layout_.Z(x);
        const Eigen::MatrixXd Y0 = layout_.Y0(x);
        const Eigen::MatrixXd Ybar = layout_.Ybar(x);
        Eigen::MatrixXd T =
            Eigen::MatrixXd::Zero((1 + np) * (nx + nu), dims_.lifted());
        T.topLeftCorner(nx, nx) = Z;
        for (Eigen::Index i = 0; i < np; ++i)
            T.block(nx + i * nx, nx + i * nx, nx, nx) = Z;
        T.block(nx + nx * np, 0, nu, nx) = Y0;
        T.block(nx + nx * np, nx, nu, nx * np) = Ybar;
        for (Eigen::Index i = 0; i < np; ++i) {
            T.block(nx + nx * np + nu + i * nu, nx + i * nx, nu, nx) = Y0;
            T.block(nx + nx * np + nu + i * nu, nx * (1 + np) + i * nx * np,
                    nu, nx * np) = Ybar;
        }
        return T;
    }

    /// The performance block matrix in the scheduling-stacked coordinates.
    Eigen::MatrixXd performance_matrix(const Eigen::VectorXd& x) const {
        const Eigen::Index a = dims_.sched_rows();
        const Eigen::Index nx = dims_.nx, nu = dims_.nu;
        const Eigen::MatrixXd Z = layout_.Z(x);
        const Eigen::MatrixXd FQ = layout_.FQ(x);

        Eigen::MatrixXd Z0 = Eigen::MatrixXd::Zero(a, a);
        Z0.topLeftCorner(nx, nx) = Z;
        Eigen::MatrixXd QZ = Eigen::MatrixXd::Zero(nx, a);
        QZ.leftCols(nx) = q_sqrt_ * Z;
        Eigen::MatrixXd Y = Eigen::MatrixXd::Zero(nu, a);
        Y.leftCols(nx) = layout_.Y0(x);
        Y.rightCols(dims_.nxp()) = layout_.Ybar(x);

        const Eigen::Index n = dims_.w_size();
        Eigen::MatrixXd W = Eigen::MatrixXd::Zero(n, n);
        W.block(0, 0, a, a) = Z0;
        W.block(0, a, a, a) = FQ.transpose() * shifted_block_.transpose();
        W.block(a, 0, a, a) = shifted_block_ * FQ;
        W.block(0, 2 * a, a, nx) = QZ.transpose();
        W.block(2 * a, 0, nx, a) = QZ;
        W.block(0, 2 * a + nx, a, nu) = Y.transpose() * r_sqrt_;
        W.block(2 * a + nx, 0, nu, a) = r_sqrt_ * Y;
        W.block(a, a, a, a) = Z0;
        W.block(2 * a, 2 * a, nx, nx).setIdentity();
        W.block(2 * a + nx, 2 * a + nx, nu, nu).setIdentity();
        return W;
    }

    /// Quadratic form of the multiplier at one scheduling point (the
    /// expression that must stay negative semidefinite over the box).
    Eigen::MatrixXd multiplier_form(const Eigen::MatrixXd& Xi,
                                    const Eigen::VectorXd& v) const {
        const Eigen::Index s = 2 * dims_.nxp();
        Eigen::MatrixXd stack(2 * s, s);
        stack.topRows(s).setIdentity();
        stack.bottomRows(s) = scaling_matrix(v);
        return stack.transpose() * Xi * stack;
    }

    /// diag(v) kron I_{2 nx}.
    Eigen::MatrixXd scaling_matrix(const Eigen::VectorXd& v) const {
        const Eigen::Index b = 2 * dims_.nx;
        Eigen::MatrixXd P = Eigen::MatrixXd::Zero(v.size() * b, v.size() * b);
        for (Eigen::Index i = 0; i < v.size(); ++i)
            P.block(i * b, i * b, b, b) =
                v(i) * Eigen::MatrixXd::Identity(b, b);
        return P;
    }

    /// Scheduling-dependent outer factor of the performance condition; the
    /// implied pointwise inequality is factor(p)^T W factor(p) > 0.
    Eigen::MatrixXd pointwise_factor(const Eigen::VectorXd& p) const {
        return l22_ + l21_ * scaling_matrix(p) * l12_;
    }

    /// Data-based closed-loop state map at one scheduling point, formed
    /// from the solved multiplier and Z.
    Eigen::MatrixXd closed_loop_matrix(const Eigen::VectorXd& x,
                                       const Eigen::VectorXd& p) const {
        const Eigen::MatrixXd sx = scheduling_stack_matrix(p, dims_.nx);
        const Eigen::MatrixXd AZ =
            sx.transpose() * shifted_block_ * layout_.FQ(x) * sx;
        const Eigen::MatrixXd Z = layout_.Z(x);
        return AZ * Z.inverse();
    }

private:
    void validate_inputs() {
        if (Q_.rows() != dims_.nx || Q_.cols() != dims_.nx)
            throw DimensionError("Q must be state-dimension square");
        if (R_.rows() != dims_.nu || R_.cols() != dims_.nu)
            throw DimensionError("R must be input-dimension square");
        if (pbox_.dim() != dims_.np)
            throw DimensionError("scheduling box dimension mismatch");
        const auto [rank, pe] = check_pe(dm_);
        if (!pe)
            throw PersistencyError("synthesis requires persistently exciting "
                                   "data (rank " + std::to_string(rank) +
                                   " of " + std::to_string(dm_.pe_target_rank()) +
                                   ")");
        const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eq(Q_);
        if (eq.eigenvalues().minCoeff() < -1e-12)
            throw ParameterError("Q must be positive semidefinite");
        const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> er(R_);
        if (er.eigenvalues().minCoeff() <= 0)
            throw ParameterError("R must be positive definite");
        q_sqrt_ = eq.operatorSqrt();
        r_sqrt_ = er.operatorSqrt();
    }

    void build_constants() {
        const Eigen::Index nx = dims_.nx, np = dims_.np;
        const Eigen::Index nxp2 = 2 * dims_.nxp();
        const Eigen::Index nxu = dims_.nxu();
        const Eigen::Index inner = 2 * nx + nxu; // columns of L12/L22

        // block selectors of the doubled state coordinates
        Eigen::MatrixXd g1 = Eigen::MatrixXd::Zero(nx, 2 * nx);
        g1.leftCols(nx).setIdentity();
        Eigen::MatrixXd g2 = Eigen::MatrixXd::Zero(nx, 2 * nx);
        g2.rightCols(nx).setIdentity();

        l12_ = Eigen::MatrixXd::Zero(nxp2, inner);
        for (Eigen::Index i = 0; i < np; ++i)
            l12_.block(i * 2 * nx, 0, 2 * nx, 2 * nx).setIdentity();

        const Eigen::Index w = dims_.w_size();
        l21_ = Eigen::MatrixXd::Zero(w, nxp2);
        l22_ = Eigen::MatrixXd::Zero(w, inner);
        Eigen::Index r = 0;
        l22_.block(r, 0, nx, 2 * nx) = g1;
        r += nx;
        for (Eigen::Index i = 0; i < np; ++i)
            l21_.block(r + i * nx, i * 2 * nx, nx, 2 * nx) = g1;
        r += dims_.nxp();
        l22_.block(r, 0, nx, 2 * nx) = g2;
        r += nx;
        for (Eigen::Index i = 0; i < np; ++i)
            l21_.block(r + i * nx, i * 2 * nx, nx, 2 * nx) = g2;
        r += dims_.nxp();
        l22_.block(r, 2 * nx, nxu, nxu).setIdentity();

        // outer factors of the combined inequality
        outer_xi_ = Eigen::MatrixXd::Zero(2 * nxp2, nxp2 + inner);
        outer_xi_.topRightCorner(nxp2, inner) = l12_;
        outer_xi_.bottomLeftCorner(nxp2, nxp2).setIdentity();
        outer_w_ = Eigen::MatrixXd::Zero(w, nxp2 + inner);
        outer_w_.leftCols(nxp2) = l21_;
        outer_w_.rightCols(inner) = l22_;

        shifted_block_ = Eigen::MatrixXd::Zero(dims_.sched_rows(),
                                               dims_.cols * (1 + np));
        shifted_block_.topLeftCorner(nx, dims_.cols) = dm_.Xnext;
        for (Eigen::Index i = 0; i < np; ++i)
            shifted_block_.block(nx + i * nx, dims_.cols * (1 + i), nx,
                                 dims_.cols) = dm_.Xnext;
    }

    void build_sdp() {
        sdp_.num_vars = layout_.total();
        sdp_.objective = layout_.trace_z_selector();
        if (opts_.maximize_trace) sdp_.objective = -sdp_.objective;

        const auto self = this;
        sdp_.blocks.push_back(probe_block(
            "performance", sdp_.num_vars,
            [self](const Eigen::VectorXd& x) { return self->main_inequality(x); }));
        if (dims_.np > 0) {
            const auto vertices = pbox_.vertices();
            for (std::size_t k = 0; k < vertices.size(); ++k) {
                const Eigen::VectorXd v = vertices[k];
                std::string label = "vertex[" + std::to_string(k) + "] at (";
                for (Eigen::Index i = 0; i < v.size(); ++i)
                    label += (i ? "," : "") + std::to_string(v(i));
                label += ")";
                sdp_.blocks.push_back(probe_block(
                    label, sdp_.num_vars, [self, v](const Eigen::VectorXd& x) {
                        return self->vertex_inequality(x, v);
                    }));
            }
            sdp_.blocks.push_back(probe_block(
                "multiplier-corner", sdp_.num_vars,
                [self](const Eigen::VectorXd& x) {
                    return self->xi22_inequality(x);
                }));
        }
        sdp_.blocks.push_back(probe_block(
            "z-positivity", sdp_.num_vars,
            [self](const Eigen::VectorXd& x) { return self->z_inequality(x); }));

        auto [A, b] = probe_equalities(
            sdp_.num_vars,
            [self](const Eigen::VectorXd& x) { return self->equality_residual(x); });
        sdp_.eq_A = std::move(A);
        sdp_.eq_b = std::move(b);
    }

    DataMatrices dm_;
    Eigen::MatrixXd Q_, R_, q_sqrt_, r_sqrt_;
    PBox pbox_;
    SynthesisOptions opts_;
    SynthesisDims dims_;
    VariableLayout layout_;

    Eigen::MatrixXd l12_, l21_, l22_;
    Eigen::MatrixXd outer_xi_, outer_w_;
    Eigen::MatrixXd shifted_block_; // blkdiag(Xnext, I_np kron Xnext)
    SdpProblem sdp_;
};

inline SynthesisProblem assemble(DataMatrices dm, Eigen::MatrixXd Q,
                                 Eigen::MatrixXd R, PBox pbox,
                                 SynthesisOptions opts = {}) {
    return SynthesisProblem(std::move(dm), std::move(Q), std::move(R),
                            std::move(pbox), opts);
}

// ---------------------------------------------------------------------------
// solving, verification, gain recovery
// ---------------------------------------------------------------------------

/// Post-solve checks computed from the problem data alone (no trust in the
/// backend's self-reported feasibility).
struct VerificationReport {
    double main_min_eig = 0.0;        // >= 0 when the margined LMI holds
    double vertex_max_eig = 0.0;      // <= 0 likewise (over all vertices)
    double xi22_min_eig = 0.0;
    double z_min_eig = 0.0;
    double equality_residual = 0.0;
    double permutation_residual = 0.0;
    double gain_residual = 0.0;
    double interior_multiplier_max = 0.0; // raw multiplier form, sampled box
    double pointwise_min_eig = 0.0;       // implied performance LMI, sampled
    double vertex_spectral_radius = 0.0;  // data-based closed loop at corners
    double z_condition = 0.0;
    bool feasible = false;

    bool passed(double eq_tol) const {
        return feasible && main_min_eig >= 0.0 && vertex_max_eig <= 0.0 &&
               xi22_min_eig >= 0.0 && z_min_eig >= 0.0 &&
               equality_residual <= eq_tol && permutation_residual <= 1e-10 &&
               gain_residual <= 1e-8 && interior_multiplier_max <= 1e-12 &&
               vertex_spectral_radius < 1.0;
    }
};

struct SynthesisSolution {
    Eigen::MatrixXd Z, FQ, F, Xi, Y0, Ybar;
    VelocityGains gains;
    SdpSolution diagnostics;
    VerificationReport verification;
    double trace_z = 0.0;
};

/// Recovers the affine gain from the solved scaled variables. Fails if Z is
/// too close to singular for the inversion to be trustworthy.
inline VelocityGains recover_gains(const Eigen::MatrixXd& Z,
                                   const Eigen::MatrixXd& Y0,
                                   const Eigen::MatrixXd& Ybar,
                                   double* condition = nullptr) {
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Z);
    const double min_eig = es.eigenvalues().minCoeff();
    const double max_eig = es.eigenvalues().maxCoeff();
    if (min_eig <= 1e-9 * std::max(1.0, max_eig))
        throw ConditioningError("Z is near singular (min eigenvalue " +
                                std::to_string(min_eig) + ")");
    if (condition) *condition = max_eig / min_eig;
    const Eigen::Index nx = Z.rows();
    const Eigen::Index np = Ybar.cols() == 0 ? 0 : Ybar.cols() / nx;
    const Eigen::MatrixXd Zinv = Z.inverse();
    VelocityGains g;
    g.K0 = Y0 * Zinv;
    g.Kbar.resize(Y0.rows(), nx * np);
    for (Eigen::Index i = 0; i < np; ++i)
        g.Kbar.middleCols(i * nx, nx) = Ybar.middleCols(i * nx, nx) * Zinv;
    return g;
}

/// Independent certificate checks on a candidate solution vector.
inline VerificationReport verify_solution(const SynthesisProblem& prob,
                                          const Eigen::VectorXd& x,
                                          std::uint64_t sample_seed = 2024) {
    const auto& d = prob.dims();
    VerificationReport rep;

    auto min_eig = [](const Eigen::MatrixXd& m) {
        if (m.size() == 0) return 0.0;
        const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
            Eigen::MatrixXd(0.5 * (m + m.transpose())), Eigen::EigenvaluesOnly);
        return es.eigenvalues().minCoeff();
    };
    auto max_eig = [&min_eig](const Eigen::MatrixXd& m) {
        return m.size() == 0 ? 0.0 : -min_eig(Eigen::MatrixXd(-m));
    };

    rep.main_min_eig = min_eig(prob.main_inequality(x));
    rep.z_min_eig = min_eig(prob.z_inequality(x));
    rep.equality_residual = prob.equality_residual(x).cwiseAbs().maxCoeff();

    const Eigen::MatrixXd Z = prob.layout().Z(x);
    {
        const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
            Z, Eigen::EigenvaluesOnly);
        rep.z_condition =
            es.eigenvalues().maxCoeff() / std::max(1e-300, es.eigenvalues().minCoeff());
    }

    RandomStream rng(sample_seed, "verification");
    const int samples = prob.options().verification_samples;

    if (d.np > 0) {
        rep.vertex_max_eig = -std::numeric_limits<double>::infinity();
        const Eigen::MatrixXd Xi = prob.layout().Xi(x);
        for (const auto& v : prob.pbox().vertices())
            rep.vertex_max_eig =
                std::max(rep.vertex_max_eig,
                         max_eig(prob.multiplier_form(Xi, v)) +
                             prob.options().epsilon);
        rep.xi22_min_eig = min_eig(prob.xi22_inequality(x));

        rep.interior_multiplier_max = -std::numeric_limits<double>::infinity();
        for (int s = 0; s < samples; ++s) {
            Eigen::VectorXd unit(d.np);
            for (Eigen::Index i = 0; i < d.np; ++i) unit(i) = rng.uniform();
            const Eigen::VectorXd p = prob.pbox().sample(unit);
            rep.interior_multiplier_max =
                std::max(rep.interior_multiplier_max,
                         max_eig(prob.multiplier_form(Xi, p)));
        }
    }

    // implied pointwise performance inequality and permutation identity
    const Eigen::MatrixXd FQ = prob.layout().FQ(x);
    const Eigen::MatrixXd W = prob.performance_matrix(x);
    rep.pointwise_min_eig = std::numeric_limits<double>::infinity();
    rep.permutation_residual = 0.0;
    for (int s = 0; s < samples; ++s) {
        Eigen::VectorXd p(d.np);
        if (d.np > 0) {
            Eigen::VectorXd unit(d.np);
            for (Eigen::Index i = 0; i < d.np; ++i) unit(i) = rng.uniform();
            p = prob.pbox().sample(unit);
        }
        const Eigen::MatrixXd factor = prob.pointwise_factor(p);
        rep.pointwise_min_eig = std::min(
            rep.pointwise_min_eig, min_eig(factor.transpose() * W * factor));
        rep.permutation_residual =
            std::max(rep.permutation_residual,
                     permutation_identity_residual(FQ, d, p));
    }

    // gain reconstruction and vertex closed-loop certificates
    double cond = 0.0;
    const VelocityGains gains =
        recover_gains(Z, prob.layout().Y0(x), prob.layout().Ybar(x), &cond);
    rep.gain_residual =
        (prob.layout().Y0(x) - gains.K0 * Z).cwiseAbs().maxCoeff();
    if (d.np > 0) {
        const Eigen::MatrixXd IZ = Eigen::kroneckerProduct(
            Eigen::MatrixXd::Identity(d.np, d.np), Z);
        rep.gain_residual = std::max(
            rep.gain_residual,
            (prob.layout().Ybar(x) - gains.Kbar * IZ).cwiseAbs().maxCoeff());
    }

    rep.vertex_spectral_radius = 0.0;
    if (d.np > 0) {
        for (const auto& v : prob.pbox().vertices())
            rep.vertex_spectral_radius =
                std::max(rep.vertex_spectral_radius,
                         spectral_radius(prob.closed_loop_matrix(x, v)));
    } else {
        rep.vertex_spectral_radius =
            spectral_radius(prob.closed_loop_matrix(x, Eigen::VectorXd(0)));
    }
    rep.feasible = true;
    return rep;
}

/// Runs the backend on the assembled program and returns the solution with
/// recovered gains and the independent verification report. Throws
/// InfeasibleError when the backend proves infeasibility.
inline SynthesisSolution solve(const SynthesisProblem& prob,
                               const SdpBackend& backend) {
    SdpSolution raw = backend.solve(prob.sdp());
    if (raw.status == SdpStatus::Infeasible)
        throw InfeasibleError("synthesis program infeasible: " + raw.message);
    if (raw.status == SdpStatus::Failed)
        throw Error("SDP backend '" + backend.name() + "' failed: " + raw.message);

    SynthesisSolution sol;
    sol.diagnostics = raw;
    const auto& layout = prob.layout();
    sol.Z = layout.Z(raw.x);
    sol.FQ = layout.FQ(raw.x);
    sol.F = fq_to_f(sol.FQ, prob.dims());
    sol.Xi = layout.Xi(raw.x);
    sol.Y0 = layout.Y0(raw.x);
    sol.Ybar = layout.Ybar(raw.x);
    sol.trace_z = sol.Z.trace();
    sol.gains = recover_gains(sol.Z, sol.Y0, sol.Ybar);
    sol.verification = verify_solution(prob, raw.x);
    return sol;
}

/// Time-invariant special case: no scheduling blocks, single constant gain.
inline SynthesisSolution synth_lti(const DataMatrices& dm,
                                   const Eigen::MatrixXd& Q,
                                   const Eigen::MatrixXd& R,
                                   const SdpBackend& backend,
                                   SynthesisOptions opts = {}) {
    if (dm.scheduling_dim != 0)
        throw DimensionError("synth_lti expects scheduling-free data matrices");
    PBox empty_box{Eigen::VectorXd(0), Eigen::VectorXd(0)};
    const SynthesisProblem prob(dm, Q, R, empty_box, opts);
    return solve(prob, backend);
}

// ---------------------------------------------------------------------------
// reproducibility dump
// ---------------------------------------------------------------------------

inline void dump_matrix(std::ostream& os, const std::string& label,
                        const Eigen::MatrixXd& m) {
    os << label << " (" << m.rows() << "x" << m.cols() << ")\n";
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            if (j) os << ' ';
            char buf[32];
            std::snprintf(buf, sizeof(buf), "%.17g", m(i, j));
            os << buf;
        }
        os << '\n';
    }
    os << '\n';
}

/// Writes every assembled constraint block and the data matrices in a
/// plain labeled text format.
inline void dump_problem(std::ostream& os, const SynthesisProblem& prob) {
    const auto& d = prob.dims();
    os << "synthesis problem: nx=" << d.nx << " nu=" << d.nu << " np=" << d.np
       << " columns=" << d.cols << " vars=" << prob.layout().total() << "\n\n";
    dump_matrix(os, "G", prob.data().G);
    dump_matrix(os, "Xnext", prob.data().Xnext);
    dump_matrix(os, "Q", prob.Q());
    dump_matrix(os, "R", prob.R());
    for (const auto& blk : prob.sdp().blocks) {
        dump_matrix(os, "block '" + blk.label + "' constant", blk.constant);
        for (std::size_t i = 0; i < blk.coeffs.size(); ++i)
            if (blk.coeffs[i].size() > 0)
                dump_matrix(os,
                            "block '" + blk.label + "' coeff[" +
                                std::to_string(i) + "]",
                            blk.coeffs[i]);
    }
    dump_matrix(os, "eq_A", prob.sdp().eq_A);
    dump_matrix(os, "eq_b", prob.sdp().eq_b);
}

inline void dump_solution(std::ostream& os, const SynthesisSolution& sol) {
    os << "status: " << to_string(sol.diagnostics.status)
       << "  iterations: " << sol.diagnostics.iterations
       << "  trace(Z): " << sol.trace_z << "\n\n";
    dump_matrix(os, "Z", sol.Z);
    dump_matrix(os, "F_Q", sol.FQ);
    dump_matrix(os, "F", sol.F);
    dump_matrix(os, "Xi", sol.Xi);
    dump_matrix(os, "Y0", sol.Y0);
    dump_matrix(os, "Ybar", sol.Ybar);
    dump_matrix(os, "K0", sol.gains.K0);
    dump_matrix(os, "Kbar", sol.gains.Kbar);
}

} // namespace ddvc
