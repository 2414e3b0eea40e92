#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "ddvc/errors.hpp"

namespace ddvc {

/// One matrix inequality constraint in decision variables x:
///   constant + sum_i x_i coeffs[i]  >= 0   (positive semidefinite)
/// All matrices are symmetric and share the block size.
struct LmiBlock {
    std::string label;
    Eigen::MatrixXd constant;
    std::vector<Eigen::MatrixXd> coeffs;

    Eigen::Index size() const { return constant.rows(); }

    Eigen::MatrixXd evaluate(const Eigen::VectorXd& x) const {
        Eigen::MatrixXd s = constant;
        for (std::size_t i = 0; i < coeffs.size(); ++i)
            if (coeffs[i].size() > 0) s += x(static_cast<Eigen::Index>(i)) * coeffs[i];
        return s;
    }
};

/// Linear semidefinite program:
///   minimize objective . x
///   s.t.     every block is PSD,  eq_A x = eq_b
struct SdpProblem {
    Eigen::Index num_vars = 0;
    Eigen::VectorXd objective;      // size num_vars; zero vector => feasibility
    std::vector<LmiBlock> blocks;
    Eigen::MatrixXd eq_A;           // may have zero rows
    Eigen::VectorXd eq_b;
};

enum class SdpStatus { Optimal, Feasible, Infeasible, Failed };

inline const char* to_string(SdpStatus s) {
    switch (s) {
    case SdpStatus::Optimal: return "optimal";
    case SdpStatus::Feasible: return "feasible";
    case SdpStatus::Infeasible: return "infeasible";
    case SdpStatus::Failed: return "failed";
    }
    return "unknown";
}

struct SdpSolution {
    SdpStatus status = SdpStatus::Failed;
    Eigen::VectorXd x;
    double objective_value = 0.0;
    int iterations = 0;
    double gap_estimate = 0.0;   // backend-reported optimality gap
    double min_block_eig = 0.0;  // worst eigenvalue across blocks at x
    std::string message;
};

/// Solver interface. Implementations must handle PSD blocks; equality
/// support and objective support are advertised through the flags so
/// callers can check before handing over a problem. Returned solutions are
/// always re-verified independently by the caller.
class SdpBackend {
public:
    virtual ~SdpBackend() = default;
    virtual std::string name() const = 0;
    virtual bool supports_equalities() const = 0;
    virtual bool supports_objective() const = 0;
    virtual SdpSolution solve(const SdpProblem& problem) const = 0;
};

/// Builds an LmiBlock by probing an affine matrix-valued builder at the
/// origin and at unit vectors. Keeps the constraint definition in readable
/// matrix code while the solver sees plain coefficient data.
inline LmiBlock probe_block(
    const std::string& label, Eigen::Index num_vars,
    const std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>& builder) {
    LmiBlock block;
    block.label = label;
    Eigen::VectorXd x = Eigen::VectorXd::Zero(num_vars);
    block.constant = builder(x);
    if (block.constant.rows() != block.constant.cols())
        throw DimensionError("LMI block '" + label + "' is not square");
    block.coeffs.resize(static_cast<std::size_t>(num_vars));
    for (Eigen::Index i = 0; i < num_vars; ++i) {
        x(i) = 1.0;
        Eigen::MatrixXd s = builder(x) - block.constant;
        x(i) = 0.0;
        if (s.cwiseAbs().maxCoeff() > 0)
            block.coeffs[static_cast<std::size_t>(i)] = std::move(s);
        else
            block.coeffs[static_cast<std::size_t>(i)] = Eigen::MatrixXd();
    }
    return block;
}

/// Probes an affine residual builder into rows of (eq_A, eq_b). The builder
/// returns the residual matrix R(x); rows encode vec(R(x)) = 0.
inline std::pair<Eigen::MatrixXd, Eigen::VectorXd> probe_equalities(
    Eigen::Index num_vars,
    const std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>& builder) {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(num_vars);
    const Eigen::MatrixXd r0 = builder(x);
    const Eigen::Index rows = r0.size();
    Eigen::MatrixXd A(rows, num_vars);
    for (Eigen::Index i = 0; i < num_vars; ++i) {
        x(i) = 1.0;
        const Eigen::MatrixXd ri = builder(x) - r0;
        x(i) = 0.0;
        A.col(i) = Eigen::Map<const Eigen::VectorXd>(ri.data(), ri.size());
    }
    Eigen::VectorXd b = -Eigen::Map<const Eigen::VectorXd>(r0.data(), r0.size());
    return {std::move(A), std::move(b)};
}

/// Reparametrization x = x0 + N z that eliminates the equality constraints;
/// N spans the nullspace of eq_A.
struct EqualityReduction {
    Eigen::VectorXd x0;
    Eigen::MatrixXd nullspace;          // num_vars x num_free
    std::vector<LmiBlock> blocks;       // constraints in z
    Eigen::VectorXd objective;          // objective in z
    double objective_offset = 0.0;

    Eigen::VectorXd lift(const Eigen::VectorXd& z) const {
        return x0 + nullspace * z;
    }
};

inline EqualityReduction reduce_equalities(const SdpProblem& p,
                                           double eq_tol = 1e-8) {
    EqualityReduction red;
    if (p.eq_A.rows() == 0) {
        red.x0 = Eigen::VectorXd::Zero(p.num_vars);
        red.nullspace = Eigen::MatrixXd::Identity(p.num_vars, p.num_vars);
        red.blocks = p.blocks;
        red.objective = p.objective;
        return red;
    }
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(
        p.eq_A, Eigen::ComputeFullV | Eigen::ComputeThinU);
    const auto& sv = svd.singularValues();
    const double tol = std::max(p.eq_A.rows(), p.eq_A.cols()) * sv(0) * 1e-13;
    Eigen::Index rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv(i) > tol) ++rank;

    red.x0 = svd.solve(p.eq_b);
    const double residual = (p.eq_A * red.x0 - p.eq_b).cwiseAbs().maxCoeff();
    if (residual > eq_tol * (1.0 + p.eq_b.cwiseAbs().maxCoeff()))
        throw InfeasibleError("equality constraints are inconsistent "
                              "(residual " + std::to_string(residual) + ")");
    red.nullspace = svd.matrixV().rightCols(p.num_vars - rank);

    const Eigen::Index nz = red.nullspace.cols();
    red.blocks.reserve(p.blocks.size());
    for (const auto& blk : p.blocks) {
        LmiBlock r;
        r.label = blk.label;
        r.constant = blk.evaluate(red.x0);
        r.coeffs.resize(static_cast<std::size_t>(nz));
        for (Eigen::Index j = 0; j < nz; ++j) {
            Eigen::MatrixXd s = Eigen::MatrixXd::Zero(blk.size(), blk.size());
            for (std::size_t i = 0; i < blk.coeffs.size(); ++i)
                if (blk.coeffs[i].size() > 0)
                    s += red.nullspace(static_cast<Eigen::Index>(i), j) *
                         blk.coeffs[i];
            r.coeffs[static_cast<std::size_t>(j)] = std::move(s);
        }
        red.blocks.push_back(std::move(r));
    }
    red.objective = red.nullspace.transpose() * p.objective;
    red.objective_offset = p.objective.dot(red.x0);
    return red;
}

/// Smallest eigenvalue over all blocks at the given point of the original
/// variable space; the caller-side feasibility measure.
inline double min_block_eigenvalue(const SdpProblem& p, const Eigen::VectorXd& x) {
    double worst = std::numeric_limits<double>::infinity();
    for (const auto& blk : p.blocks) {
        const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
            blk.evaluate(x), Eigen::EigenvaluesOnly);
        worst = std::min(worst, es.eigenvalues().minCoeff());
    }
    return worst;
}

} // namespace ddvc
