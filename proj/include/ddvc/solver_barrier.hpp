#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "ddvc/lmi.hpp"

namespace ddvc {

/// Logarithmic-barrier interior-point solver for small dense SDPs.
///
/// Equalities are eliminated exactly through a nullspace
/// reparametrization, a phase-I program maximizes the uniform feasibility
/// margin, and phase II follows the central path of the reduced problem
/// with damped Newton steps. Problem sizes in this library are tiny
/// (tens to a few hundred variables, blocks below ~30 rows), where this
/// method is simple and dependable.
class BarrierBackend : public SdpBackend {
public:
    struct Options {
        double feasibility_margin = 1e-8; // interior depth to accept in phase I
        double gap_tol = 1e-9;            // duality-gap target, phase II
        double mu_init = 1.0;
        double mu_factor = 20.0;
        int max_newton = 100;             // per centering
        int max_outer = 64;
        double newton_tol = 1e-11;        // half squared Newton decrement
    };

    BarrierBackend() = default;
    explicit BarrierBackend(Options opts) : opts_(opts) {}

    std::string name() const override { return "barrier"; }
    bool supports_equalities() const override { return true; }
    bool supports_objective() const override { return true; }

    SdpSolution solve(const SdpProblem& problem) const override {
        SdpSolution sol;
        if (problem.blocks.empty()) {
            sol.status = SdpStatus::Failed;
            sol.message = "no matrix constraints";
            return sol;
        }
        EqualityReduction red;
        try {
            red = reduce_equalities(problem);
        } catch (const InfeasibleError& e) {
            sol.status = SdpStatus::Infeasible;
            sol.message = e.what();
            return sol;
        }
        const Eigen::Index nz = red.nullspace.cols();
        Eigen::Index total_dim = 0;
        for (const auto& b : red.blocks) total_dim += b.size();

        // ---- phase I: maximize the uniform margin t ----
        std::vector<LmiBlock> phase1 = red.blocks;
        for (auto& b : phase1) {
            b.coeffs.push_back(
                -Eigen::MatrixXd::Identity(b.size(), b.size()));
        }
        Eigen::VectorXd g1 = Eigen::VectorXd::Zero(nz + 1);
        g1(nz) = -1.0; // minimize -t
        Eigen::VectorXd w = Eigen::VectorXd::Zero(nz + 1);
        double t0 = std::numeric_limits<double>::infinity();
        for (const auto& b : red.blocks) {
            const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
                b.constant, Eigen::EigenvaluesOnly);
            t0 = std::min(t0, es.eigenvalues().minCoeff());
        }
        w(nz) = t0 - 1.0;

        int iter_count = 0;
        double mu = opts_.mu_init;
        bool feasible = false;
        for (int outer = 0; outer < opts_.max_outer; ++outer) {
            if (!center(phase1, g1, mu, w, iter_count)) {
                sol.status = SdpStatus::Failed;
                sol.message = "phase-I centering failed";
                return sol;
            }
            const double margin = w(nz);
            if (margin >= opts_.feasibility_margin) {
                feasible = true;
                break;
            }
            const double gap = static_cast<double>(total_dim) / mu;
            if (margin + gap < opts_.feasibility_margin) {
                sol.status = SdpStatus::Infeasible;
                sol.iterations = iter_count;
                sol.message = infeasibility_report(red.blocks,
                                                   w.head(nz), margin);
                return sol;
            }
            mu *= opts_.mu_factor;
        }
        if (!feasible) {
            sol.status = SdpStatus::Failed;
            sol.iterations = iter_count;
            sol.message = "phase I did not converge";
            return sol;
        }

        Eigen::VectorXd z = w.head(nz);
        const bool has_objective = red.objective.cwiseAbs().maxCoeff() > 0;
        if (!has_objective) {
            sol.status = SdpStatus::Feasible;
            sol.x = red.lift(z);
            sol.iterations = iter_count;
            sol.gap_estimate = 0.0;
            sol.min_block_eig = min_block_eigenvalue(problem, sol.x);
            return sol;
        }

        // ---- phase II: follow the central path of the true objective ----
        mu = opts_.mu_init;
        double gap = std::numeric_limits<double>::infinity();
        for (int outer = 0; outer < opts_.max_outer; ++outer) {
            if (!center(red.blocks, red.objective, mu, z, iter_count)) {
                sol.status = SdpStatus::Failed;
                sol.message = "phase-II centering failed";
                return sol;
            }
            gap = static_cast<double>(total_dim) / mu;
            const double scale =
                1.0 + std::abs(red.objective.dot(z) + red.objective_offset);
            if (gap < opts_.gap_tol * scale) break;
            mu *= opts_.mu_factor;
        }

        sol.status = SdpStatus::Optimal;
        sol.x = red.lift(z);
        sol.objective_value = problem.objective.dot(sol.x);
        sol.iterations = iter_count;
        sol.gap_estimate = gap;
        sol.min_block_eig = min_block_eigenvalue(problem, sol.x);
        return sol;
    }

private:
    Options opts_;

    static bool factorize(const std::vector<LmiBlock>& blocks,
                          const Eigen::VectorXd& z,
                          std::vector<Eigen::LLT<Eigen::MatrixXd>>& llts) {
        llts.clear();
        llts.reserve(blocks.size());
        for (const auto& b : blocks) {
            Eigen::MatrixXd s = b.evaluate(z);
            // symmetrize to shed accumulated round-off
            s = 0.5 * (s + s.transpose());
            llts.emplace_back(s);
            if (llts.back().info() != Eigen::Success) return false;
        }
        return true;
    }

    static double barrier_value(const Eigen::VectorXd& g, double mu,
                                const Eigen::VectorXd& z,
                                const std::vector<Eigen::LLT<Eigen::MatrixXd>>& llts) {
        double v = mu * g.dot(z);
        for (const auto& llt : llts) {
            const auto& L = llt.matrixLLT();
            for (Eigen::Index i = 0; i < L.rows(); ++i) v -= 2.0 * std::log(L(i, i));
        }
        return v;
    }

    /// One centering run: damped Newton on mu*g.z - sum logdet S(z).
    /// Returns false if the point cannot be kept strictly feasible.
    bool center(const std::vector<LmiBlock>& blocks, const Eigen::VectorXd& g,
                double mu, Eigen::VectorXd& z, int& iter_count) const {
        const Eigen::Index n = z.size();
        std::vector<Eigen::LLT<Eigen::MatrixXd>> llts;
        if (!factorize(blocks, z, llts)) return false;

        for (int it = 0; it < opts_.max_newton; ++it) {
            ++iter_count;
            Eigen::VectorXd grad = mu * g;
            Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(n, n);
            for (std::size_t l = 0; l < blocks.size(); ++l) {
                const auto& b = blocks[l];
                const Eigen::Index m = b.size();
                const auto& L = llts[l].matrixL();
                Eigen::MatrixXd scaled(m * m, n);
                for (Eigen::Index j = 0; j < n; ++j) {
                    const auto& A = b.coeffs[static_cast<std::size_t>(j)];
                    if (A.size() == 0) {
                        scaled.col(j).setZero();
                        continue;
                    }
                    Eigen::MatrixXd t1 = L.solve(A);
                    Eigen::MatrixXd w = L.solve(t1.transpose());
                    grad(j) -= w.trace();
                    scaled.col(j) =
                        Eigen::Map<const Eigen::VectorXd>(w.data(), m * m);
                }
                hess.noalias() += scaled.transpose() * scaled;
            }

            Eigen::VectorXd step;
            {
                Eigen::LDLT<Eigen::MatrixXd> ldlt(hess);
                step = -ldlt.solve(grad);
                if (!step.allFinite() || ldlt.info() != Eigen::Success) {
                    const double ridge =
                        std::max(1e-14, 1e-12 * hess.trace() /
                                            static_cast<double>(std::max<Eigen::Index>(n, 1)));
                    Eigen::LDLT<Eigen::MatrixXd> retry(
                        hess + ridge * Eigen::MatrixXd::Identity(n, n));
                    step = -retry.solve(grad);
                    if (!step.allFinite()) return false;
                }
            }

            const double decrement_sq = -grad.dot(step);
            if (decrement_sq * 0.5 < opts_.newton_tol) return true;

            const double fval = barrier_value(g, mu, z, llts);
            double alpha = 1.0;
            bool moved = false;
            std::vector<Eigen::LLT<Eigen::MatrixXd>> trial_llts;
            for (int ls = 0; ls < 60; ++ls) {
                const Eigen::VectorXd trial = z + alpha * step;
                if (factorize(blocks, trial, trial_llts)) {
                    const double ftrial = barrier_value(g, mu, trial, trial_llts);
                    if (ftrial <= fval + 0.25 * alpha * grad.dot(step)) {
                        z = trial;
                        llts = std::move(trial_llts);
                        moved = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if (!moved) return true; // stalled at numerical precision
        }
        return true;
    }

    static std::string infeasibility_report(const std::vector<LmiBlock>& blocks,
                                            const Eigen::VectorXd& z,
                                            double margin) {
        std::string worst_label = "?";
        double worst = std::numeric_limits<double>::infinity();
        for (const auto& b : blocks) {
            const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
                b.evaluate(z), Eigen::EigenvaluesOnly);
            const double e = es.eigenvalues().minCoeff();
            if (e < worst) {
                worst = e;
                worst_label = b.label;
            }
        }
        return "infeasible: best uniform margin " + std::to_string(margin) +
               "; most violated constraint '" + worst_label +
               "' (min eigenvalue " + std::to_string(worst) + ")";
    }
};

} // namespace ddvc
