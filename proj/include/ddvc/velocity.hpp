#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <utility>
#include <vector>

#include "ddvc/dictionary.hpp"
#include "ddvc/errors.hpp"
#include "ddvc/plants.hpp"
#include "ddvc/scheduling.hpp"

namespace ddvc {

/// State/input matrices of the time-difference dynamics at one argument
/// pair: Delta x_{k+1} = A Delta x_k + B Delta u_k.
struct VelocityMatrices {
    Eigen::MatrixXd A; // n_x x n_x
    Eigen::MatrixXd B; // n_x x n_u
};

/// Affine expansion of the velocity matrices in the scheduling vector:
/// A(p) = A[0] + sum_i p_i A[i], likewise for B. Entry 0 is the offset.
struct LPVCoefficients {
    std::vector<Eigen::MatrixXd> A; // n_p + 1 matrices, n_x x n_x
    std::vector<Eigen::MatrixXd> B; // n_p + 1 matrices, n_x x n_u

    Eigen::Index scheduling_dim() const {
        return static_cast<Eigen::Index>(A.size()) - 1;
    }
};

/// Evaluates the affine expansion at a scheduling point.
inline VelocityMatrices lpv_eval(const LPVCoefficients& c,
                                 const Eigen::VectorXd& p) {
    if (p.size() != c.scheduling_dim())
        throw DimensionError("scheduling vector size does not match coefficients");
    VelocityMatrices m{c.A[0], c.B[0]};
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        m.A += p(i) * c.A[static_cast<std::size_t>(i) + 1];
        m.B += p(i) * c.B[static_cast<std::size_t>(i) + 1];
    }
    return m;
}

/// Increment/scheduling sequences derived from a data dictionary:
/// triples (dx_k, p_k, du_k) for k = 2 .. length of the source.
class VelocityDictionary {
public:
    VelocityDictionary(Eigen::MatrixXd dx, Eigen::MatrixXd p, Eigen::MatrixXd du)
        : dx_(std::move(dx)), p_(std::move(p)), du_(std::move(du)) {
        if (dx_.cols() != p_.cols() || dx_.cols() != du_.cols())
            throw DimensionError("velocity sequences have unequal lengths");
        if (dx_.cols() < 1)
            throw InsufficientDataError("empty velocity dictionary");
    }

    Eigen::Index length() const { return dx_.cols(); }
    Eigen::Index state_dim() const { return dx_.rows(); }
    Eigen::Index input_dim() const { return du_.rows(); }
    Eigen::Index scheduling_dim() const { return p_.rows(); }

    const Eigen::MatrixXd& state_increments() const { return dx_; }
    const Eigen::MatrixXd& scheduling() const { return p_; }
    const Eigen::MatrixXd& input_increments() const { return du_; }

    std::vector<Eigen::VectorXd> scheduling_samples() const {
        std::vector<Eigen::VectorXd> out;
        out.reserve(static_cast<std::size_t>(p_.cols()));
        for (Eigen::Index k = 0; k < p_.cols(); ++k) out.push_back(p_.col(k));
        return out;
    }

private:
    Eigen::MatrixXd dx_; // n_x x N
    Eigen::MatrixXd p_;  // n_p x N
    Eigen::MatrixXd du_; // n_u x N
};

/// Converts raw samples into increment/scheduling triples. The source keeps
/// the raw data; the result stores only differences.
inline VelocityDictionary difference_dictionary(const DataDictionary& d,
                                                const SchedulingBasis& basis) {
    const Eigen::Index n = d.length() - 1;
    Eigen::MatrixXd dx(d.state_dim(), n);
    Eigen::MatrixXd du(d.input_dim(), n);
    Eigen::MatrixXd p(basis.size, n);
    for (Eigen::Index k = 0; k < n; ++k) {
        dx.col(k) = d.states().col(k + 1) - d.states().col(k);
        du.col(k) = d.inputs().col(k + 1) - d.inputs().col(k);
        p.col(k) = eval_basis(basis, d.states().col(k + 1), d.inputs().col(k + 1),
                              d.states().col(k), d.inputs().col(k));
    }
    return VelocityDictionary(std::move(dx), std::move(p), std::move(du));
}

namespace detail {

/// Gauss-Legendre nodes/weights on [0, 1], computed by Newton iteration on
/// the Legendre recurrence.
inline std::pair<std::vector<double>, std::vector<double>>
gauss_legendre_unit(int n) {
    std::vector<double> nodes(static_cast<std::size_t>(n));
    std::vector<double> weights(static_cast<std::size_t>(n));
    const double pi = 3.14159265358979323846;
    for (int i = 0; i < n; ++i) {
        // root of P_n on [-1, 1], refined from the Chebyshev guess
        double z = std::cos(pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = 0.0;
            for (int j = 0; j < n; ++j) {
                const double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
            }
            dp = n * (z * p0 - p1) / (z * z - 1.0);
            const double dz = p0 / dp;
            z -= dz;
            if (std::abs(dz) < 1e-15) break;
        }
        nodes[static_cast<std::size_t>(i)] = 0.5 * (1.0 - z); // map to [0,1]
        weights[static_cast<std::size_t>(i)] = 1.0 / ((1.0 - z * z) * dp * dp);
    }
    return {nodes, weights};
}

} // namespace detail

/// Velocity matrices as the line integral of the Jacobians along the convex
/// segment between (x_{k-1}, u_{k-1}) and (x_k, u_k), by Gauss-Legendre
/// quadrature. Exact for Jacobians polynomial of degree <= 2*nodes - 1
/// along the segment.
inline VelocityMatrices velocity_matrices_quadrature(
    const Plant::JacFn& jac_x, const Plant::JacFn& jac_u,
    const Eigen::VectorXd& xk, const Eigen::VectorXd& uk,
    const Eigen::VectorXd& xkm1, const Eigen::VectorXd& ukm1, int nodes = 10) {
    if (nodes < 2) throw ParameterError("quadrature needs at least 2 nodes");
    const auto [ts, ws] = detail::gauss_legendre_unit(nodes);
    VelocityMatrices m;
    for (std::size_t i = 0; i < ts.size(); ++i) {
        const double lambda = ts[i];
        const Eigen::VectorXd x = xkm1 + lambda * (xk - xkm1);
        const Eigen::VectorXd u = ukm1 + lambda * (uk - ukm1);
        const Eigen::MatrixXd Jx = jac_x(x, u);
        const Eigen::MatrixXd Ju = jac_u(x, u);
        if (!Jx.allFinite() || !Ju.allFinite())
            throw NumericError("non-finite Jacobian on the quadrature segment");
        if (i == 0) {
            m.A = ws[i] * Jx;
            m.B = ws[i] * Ju;
        } else {
            m.A += ws[i] * Jx;
            m.B += ws[i] * Ju;
        }
    }
    return m;
}

/// Closed-form velocity matrices of the unbalanced disc; only the first
/// state coordinate enters through the divided difference of sin.
inline VelocityMatrices disc_velocity_analytic(double x1k, double x1km1,
                                               const DiscParams& p = {}) {
    p.validate();
    if (!std::isfinite(x1k) || !std::isfinite(x1km1))
        throw NumericError("non-finite angle argument");
    VelocityMatrices m;
    m.A.resize(2, 2);
    m.A << 1.0, p.sample_time,
        -p.gravity_coeff() * sin_divided_difference(x1k, x1km1),
        p.damping_coeff();
    m.B.resize(2, 1);
    m.B << 0.0, p.input_coeff();
    return m;
}

/// One observation for the affine-coefficient fit.
struct VelocitySample {
    Eigen::VectorXd scheduling;  // p at this argument pair
    VelocityMatrices matrices;   // A_v, B_v at the same arguments
};

/// Least-squares fit of the affine expansion from sampled velocity
/// matrices. Returns the coefficients and the maximum absolute residual
/// over all matrix entries; the residual is ~0 when the basis spans the
/// variation exactly.
inline std::pair<LPVCoefficients, double>
fit_coefficients(const std::vector<VelocitySample>& samples) {
    if (samples.empty()) throw InsufficientDataError("no samples to fit");
    const Eigen::Index np = samples.front().scheduling.size();
    const Eigen::Index nx = samples.front().matrices.A.rows();
    const Eigen::Index nu = samples.front().matrices.B.cols();
    const auto count = static_cast<Eigen::Index>(samples.size());
    if (count < np + 1)
        throw IllPosedFitError("need at least " + std::to_string(np + 1) +
                               " samples for " + std::to_string(np) +
                               " basis functions");

    Eigen::MatrixXd regressor(count, np + 1);
    Eigen::MatrixXd targets(count, nx * (nx + nu));
    for (Eigen::Index s = 0; s < count; ++s) {
        const auto& sample = samples[static_cast<std::size_t>(s)];
        if (sample.scheduling.size() != np ||
            sample.matrices.A.rows() != nx || sample.matrices.B.cols() != nu)
            throw DimensionError("inconsistent sample dimensions in fit");
        regressor(s, 0) = 1.0;
        regressor.row(s).tail(np) = sample.scheduling.transpose();
        Eigen::Index c = 0;
        for (Eigen::Index j = 0; j < nx; ++j)
            for (Eigen::Index i = 0; i < nx; ++i)
                targets(s, c++) = sample.matrices.A(i, j);
        for (Eigen::Index j = 0; j < nu; ++j)
            for (Eigen::Index i = 0; i < nx; ++i)
                targets(s, c++) = sample.matrices.B(i, j);
    }

    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(
        regressor, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const double rank_tol =
        1e-10 * svd.singularValues()(0) * static_cast<double>(count);
    if (svd.singularValues().minCoeff() <= rank_tol)
        throw IllPosedFitError("regressor is rank deficient; scheduling "
                               "samples are not affinely independent");
    const Eigen::MatrixXd coeffs = svd.solve(targets); // (np+1) x (nx*(nx+nu))

    LPVCoefficients out;
    out.A.resize(static_cast<std::size_t>(np) + 1);
    out.B.resize(static_cast<std::size_t>(np) + 1);
    for (Eigen::Index t = 0; t <= np; ++t) {
        Eigen::MatrixXd A(nx, nx), B(nx, nu);
        Eigen::Index c = 0;
        for (Eigen::Index j = 0; j < nx; ++j)
            for (Eigen::Index i = 0; i < nx; ++i) A(i, j) = coeffs(t, c++);
        for (Eigen::Index j = 0; j < nu; ++j)
            for (Eigen::Index i = 0; i < nx; ++i) B(i, j) = coeffs(t, c++);
        out.A[static_cast<std::size_t>(t)] = std::move(A);
        out.B[static_cast<std::size_t>(t)] = std::move(B);
    }

    double residual = 0.0;
    for (const auto& sample : samples) {
        const VelocityMatrices fitted = lpv_eval(out, sample.scheduling);
        residual = std::max(residual,
                            (fitted.A - sample.matrices.A).cwiseAbs().maxCoeff());
        residual = std::max(residual,
                            (fitted.B - sample.matrices.B).cwiseAbs().maxCoeff());
    }
    return {std::move(out), residual};
}

/// Analytic affine expansion of the disc velocity-form in the
/// divided-difference basis; handy as an exact reference.
inline LPVCoefficients disc_lpv_coefficients(const DiscParams& p = {}) {
    p.validate();
    LPVCoefficients c;
    c.A.resize(2);
    c.B.resize(2);
    c.A[0].resize(2, 2);
    c.A[0] << 1.0, p.sample_time, 0.0, p.damping_coeff();
    c.A[1] = Eigen::MatrixXd::Zero(2, 2);
    c.A[1](1, 0) = -p.gravity_coeff();
    c.B[0].resize(2, 1);
    c.B[0] << 0.0, p.input_coeff();
    c.B[1] = Eigen::MatrixXd::Zero(2, 1);
    return c;
}

} // namespace ddvc
