#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "ddvc/lmi.hpp"

namespace ddvc {

/// Alternating-projections feasibility solver: projects the block values
/// onto the PSD cone and the iterate back onto the affine constraint set in
/// turns. No objective handling; intended for tiny problems and for
/// cross-checking the interior-point backend, not as the main path.
class ProjectionBackend : public SdpBackend {
public:
    struct Options {
        int max_iterations = 20000;
        double margin = 1e-9;   // eigenvalue floor used when clipping
        double tol = 0.0;       // accept when min block eigenvalue >= tol
    };

    ProjectionBackend() = default;
    explicit ProjectionBackend(Options opts) : opts_(opts) {}

    std::string name() const override { return "projection"; }
    bool supports_equalities() const override { return true; }
    bool supports_objective() const override { return false; }

    SdpSolution solve(const SdpProblem& problem) const override {
        SdpSolution sol;
        EqualityReduction red;
        try {
            red = reduce_equalities(problem);
        } catch (const InfeasibleError& e) {
            sol.status = SdpStatus::Infeasible;
            sol.message = e.what();
            return sol;
        }
        const Eigen::Index nz = red.nullspace.cols();

        // Gram matrix of the affine map z -> (blocks), factorized once.
        Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(nz, nz);
        for (const auto& b : red.blocks) {
            const Eigen::Index m = b.size();
            Eigen::MatrixXd flat(m * m, nz);
            for (Eigen::Index j = 0; j < nz; ++j) {
                const auto& A = b.coeffs[static_cast<std::size_t>(j)];
                if (A.size() == 0)
                    flat.col(j).setZero();
                else
                    flat.col(j) =
                        Eigen::Map<const Eigen::VectorXd>(A.data(), m * m);
            }
            gram.noalias() += flat.transpose() * flat;
        }
        const Eigen::LDLT<Eigen::MatrixXd> gram_ldlt(
            gram + 1e-12 * Eigen::MatrixXd::Identity(nz, nz));

        Eigen::VectorXd z = Eigen::VectorXd::Zero(nz);
        for (int it = 0; it < opts_.max_iterations; ++it) {
            // forward: current block values, clipped onto the cone
            double worst = std::numeric_limits<double>::infinity();
            Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nz);
            for (const auto& b : red.blocks) {
                const Eigen::Index m = b.size();
                Eigen::MatrixXd s = b.evaluate(z);
                s = 0.5 * (s + s.transpose());
                const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s);
                worst = std::min(worst, es.eigenvalues().minCoeff());
                const Eigen::VectorXd clipped =
                    es.eigenvalues().cwiseMax(opts_.margin);
                const Eigen::MatrixXd target = es.eigenvectors() *
                                               clipped.asDiagonal() *
                                               es.eigenvectors().transpose();
                const Eigen::MatrixXd diff = target - b.constant;
                for (Eigen::Index j = 0; j < nz; ++j) {
                    const auto& A = b.coeffs[static_cast<std::size_t>(j)];
                    if (A.size() > 0)
                        rhs(j) += (A.array() * diff.array()).sum();
                }
            }
            if (worst >= opts_.tol) {
                sol.status = SdpStatus::Feasible;
                sol.x = red.lift(z);
                sol.iterations = it;
                sol.min_block_eig = min_block_eigenvalue(problem, sol.x);
                return sol;
            }
            // backward: least-squares fit of z to the clipped targets
            z = gram_ldlt.solve(rhs);
        }
        sol.status = SdpStatus::Failed;
        sol.iterations = opts_.max_iterations;
        sol.message = "alternating projections did not converge";
        sol.x = red.lift(z);
        sol.min_block_eig = min_block_eigenvalue(problem, sol.x);
        return sol;
    }

private:
    Options opts_;
};

} // namespace ddvc
