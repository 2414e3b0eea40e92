#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ddvc/datarep.hpp"
#include "ddvc/dictionary.hpp"
#include "ddvc/errors.hpp"
#include "ddvc/plants.hpp"
#include "ddvc/scheduling.hpp"

namespace ddvc {

/// Memory of the realized incremental controller: the previous plant state
/// and the previously applied input, plus the leaky-integrator channels
/// when reference tracking is enabled.
struct ControllerState {
    Eigen::VectorXd x_prev;
    Eigen::VectorXd u_prev;
    Eigen::VectorXd integrator;      // x_I at the current step
    Eigen::VectorXd integrator_prev; // x_I one step earlier
};

struct FixedPointOptions {
    double tol = 1e-10;
    int max_iterations = 50;
    double damping = 1.0;      // relaxation factor of the iteration
    bool fallback = true;      // on failure reuse u_prev inside the basis
};

/// Result of one controller evaluation.
struct ControllerStepResult {
    Eigen::VectorXd u;
    Eigen::VectorXd scheduling;
    bool used_fallback = false;
    int fixed_point_iterations = 0;
};

/// Integrator channel configuration: x_I' = leak * x_I + (r - C_r x).
struct IntegratorSpec {
    double leak = 0.9;
    Eigen::MatrixXd C_r; // n_I x n_x selector of tracked outputs

    Eigen::Index size() const { return C_r.rows(); }
};

/// Incremental state-feedback law realized from velocity gains:
///   u_k = u_{k-1} + K(p_k) * [x_k - x_{k-1}; x_I,k - x_I,k-1]
/// with p_k from the scheduling basis on the raw plant signals. When the
/// basis depends on the current input the evaluation is an implicit
/// equation, resolved by damped fixed-point iteration.
class VelocityController {
public:
    VelocityController(VelocityGains gains, SchedulingBasis basis,
                       std::optional<IntegratorSpec> integrator = {},
                       FixedPointOptions fp = {})
        : gains_(std::move(gains)), basis_(std::move(basis)),
          integrator_(std::move(integrator)), fp_(fp) {
        const Eigen::Index ni = integrator_ ? integrator_->size() : 0;
        plant_state_dim_ = gains_.state_dim() - ni;
        if (plant_state_dim_ < 1)
            throw DimensionError("gain state dimension smaller than "
                                 "integrator channel count");
        if (integrator_ &&
            (integrator_->leak <= 0.0 || integrator_->leak > 1.0))
            throw ParameterError("integrator leak must lie in (0, 1]");
    }

    Eigen::Index plant_state_dim() const { return plant_state_dim_; }
    Eigen::Index input_dim() const { return gains_.input_dim(); }
    const VelocityGains& gains() const { return gains_; }
    const SchedulingBasis& basis() const { return basis_; }

    /// Seeds the memory: previous state = current state, previous input
    /// zero (or as given), integrators at zero.
    ControllerState initial_state(const Eigen::VectorXd& x0,
                                  std::optional<Eigen::VectorXd> u0 = {}) const {
        ControllerState s;
        s.x_prev = x0;
        s.u_prev = u0 ? *u0 : Eigen::VectorXd::Zero(input_dim());
        const Eigen::Index ni = integrator_ ? integrator_->size() : 0;
        s.integrator = Eigen::VectorXd::Zero(ni);
        s.integrator_prev = Eigen::VectorXd::Zero(ni);
        return s;
    }

    /// Computes u_k and advances the memory. `reference` feeds the
    /// integrator channels and is ignored when tracking is disabled.
    ControllerStepResult step(ControllerState& state, const Eigen::VectorXd& x,
                              const Eigen::VectorXd& reference = {}) const {
        if (x.size() != plant_state_dim_)
            throw DimensionError("controller saw a state of wrong dimension");

        Eigen::VectorXd delta(gains_.state_dim());
        delta.head(plant_state_dim_) = x - state.x_prev;
        if (integrator_)
            delta.tail(integrator_->size()) =
                state.integrator - state.integrator_prev;

        ControllerStepResult res;
        if (!basis_.depends_on_input) {
            res.scheduling =
                eval_basis(basis_, x, state.u_prev, state.x_prev, state.u_prev);
            res.u = state.u_prev + eval_gain(gains_, res.scheduling) * delta;
        } else {
            // fixed point u = g(u): scheduling re-evaluated at the trial input
            Eigen::VectorXd u = state.u_prev;
            bool converged = false;
            for (int it = 0; it < fp_.max_iterations; ++it) {
                ++res.fixed_point_iterations;
                const Eigen::VectorXd p =
                    eval_basis(basis_, x, u, state.x_prev, state.u_prev);
                const Eigen::VectorXd next =
                    state.u_prev + eval_gain(gains_, p) * delta;
                const double change = (next - u).lpNorm<Eigen::Infinity>();
                u = (1.0 - fp_.damping) * u + fp_.damping * next;
                if (change <= fp_.tol) {
                    converged = true;
                    res.scheduling = p;
                    break;
                }
            }
            if (converged) {
                res.u = u;
            } else if (fp_.fallback) {
                res.scheduling = eval_basis(basis_, x, state.u_prev,
                                            state.x_prev, state.u_prev);
                res.u = state.u_prev + eval_gain(gains_, res.scheduling) * delta;
                res.used_fallback = true;
            } else {
                throw FixedPointError("input fixed point did not converge in " +
                                      std::to_string(fp_.max_iterations) +
                                      " iterations");
            }
        }
        if (!res.u.allFinite())
            throw NumericError("controller produced a non-finite input");

        // advance memory; the integrator runs on the measured output
        state.x_prev = x;
        state.u_prev = res.u;
        if (integrator_) {
            const Eigen::VectorXd ref =
                reference.size() ? reference
                                 : Eigen::VectorXd::Zero(integrator_->size());
            if (ref.size() != integrator_->size())
                throw DimensionError("reference dimension mismatch");
            Eigen::VectorXd next =
                integrator_->leak * state.integrator + ref - integrator_->C_r * x;
            state.integrator_prev = state.integrator;
            state.integrator = std::move(next);
        }
        return res;
    }

private:
    VelocityGains gains_;
    SchedulingBasis basis_;
    std::optional<IntegratorSpec> integrator_;
    FixedPointOptions fp_;
    Eigen::Index plant_state_dim_ = 0;
};

/// Static gain-scheduled state feedback u = K(p) [x; x_I]; the law used by
/// the direct (non-incremental) designs. Scheduling is evaluated on the
/// current state only.
class StaticController {
public:
    StaticController(VelocityGains gains, SchedulingBasis basis,
                     std::optional<IntegratorSpec> integrator = {})
        : gains_(std::move(gains)), basis_(std::move(basis)),
          integrator_(std::move(integrator)) {
        const Eigen::Index ni = integrator_ ? integrator_->size() : 0;
        plant_state_dim_ = gains_.state_dim() - ni;
        if (plant_state_dim_ < 1)
            throw DimensionError("gain state dimension smaller than "
                                 "integrator channel count");
    }

    Eigen::Index plant_state_dim() const { return plant_state_dim_; }
    Eigen::Index input_dim() const { return gains_.input_dim(); }

    ControllerState initial_state(const Eigen::VectorXd& x0) const {
        ControllerState s;
        s.x_prev = x0;
        s.u_prev = Eigen::VectorXd::Zero(input_dim());
        const Eigen::Index ni = integrator_ ? integrator_->size() : 0;
        s.integrator = Eigen::VectorXd::Zero(ni);
        s.integrator_prev = Eigen::VectorXd::Zero(ni);
        return s;
    }

    ControllerStepResult step(ControllerState& state, const Eigen::VectorXd& x,
                              const Eigen::VectorXd& reference = {}) const {
        ControllerStepResult res;
        res.scheduling =
            eval_basis(basis_, x, state.u_prev, state.x_prev, state.u_prev);
        Eigen::VectorXd augmented(gains_.state_dim());
        augmented.head(plant_state_dim_) = x;
        if (integrator_) augmented.tail(integrator_->size()) = state.integrator;
        res.u = eval_gain(gains_, res.scheduling) * augmented;
        if (!res.u.allFinite())
            throw NumericError("controller produced a non-finite input");
        state.x_prev = x;
        state.u_prev = res.u;
        if (integrator_) {
            const Eigen::VectorXd ref =
                reference.size() ? reference
                                 : Eigen::VectorXd::Zero(integrator_->size());
            Eigen::VectorXd next =
                integrator_->leak * state.integrator + ref - integrator_->C_r * x;
            state.integrator_prev = state.integrator;
            state.integrator = std::move(next);
        }
        return res;
    }

private:
    VelocityGains gains_;
    SchedulingBasis basis_;
    std::optional<IntegratorSpec> integrator_;
    Eigen::Index plant_state_dim_ = 0;
};

/// Appends the leaky-integrator channels to recorded data: the added state
/// is the filter x_I,k+1 = leak * x_I,k - C_r x_k run over the recording
/// (zero reference during collection), starting from zero. Synthesis on
/// the augmented dictionary then bakes integral action into the gains.
inline DataDictionary augment_integrator(const DataDictionary& d,
                                         const IntegratorSpec& spec) {
    if (spec.leak <= 0.0 || spec.leak > 1.0)
        throw ParameterError("integrator leak must lie in (0, 1]");
    if (spec.C_r.cols() != d.state_dim())
        throw DimensionError("tracked-output selector does not match state");
    const Eigen::Index ni = spec.size();
    Eigen::MatrixXd augmented(d.state_dim() + ni, d.length());
    augmented.topRows(d.state_dim()) = d.states();
    Eigen::VectorXd xi = Eigen::VectorXd::Zero(ni);
    for (Eigen::Index k = 0; k < d.length(); ++k) {
        augmented.block(d.state_dim(), k, ni, 1) = xi;
        xi = spec.leak * xi - spec.C_r * d.states().col(k);
    }
    return DataDictionary(d.inputs(), std::move(augmented), d.sample_time());
}

// ---------------------------------------------------------------------------
// simulation
// ---------------------------------------------------------------------------

/// Time-indexed closed-loop record with the derived qualitative metrics.
struct Trajectory {
    Eigen::MatrixXd states;     // n_x x steps
    Eigen::MatrixXd inputs;     // n_u x steps
    Eigen::MatrixXd scheduling; // n_p x steps
    Eigen::VectorXd reference;  // steps
    double sample_time = 0.01;

    bool diverged = false;
    Eigen::Index divergence_step = -1;
    Eigen::Index scheduling_exits = 0; // samples where p left the box
    Eigen::Index fallback_steps = 0;   // fixed-point fallbacks taken

    Eigen::Index steps() const { return states.cols(); }
};

using ReferenceSignal = std::function<double(Eigen::Index step, double time)>;

inline ReferenceSignal constant_reference(double value) {
    return [value](Eigen::Index, double) { return value; };
}

/// Step from `before` to `after` at the given time.
inline ReferenceSignal step_reference(double after, double at_time = 0.0,
                                      double before = 0.0) {
    return [=](Eigen::Index, double t) { return t >= at_time ? after : before; };
}

struct SimulationOptions {
    double divergence_threshold = 1e6;
    std::optional<PBox> scheduling_box; // report excursions when provided
};

/// Forward-simulates the plant under any controller exposing
/// initial_state()/step(). Residual trajectory columns past a divergence
/// are truncated.
template <typename Controller>
Trajectory simulate(const Plant& plant, const Controller& controller,
                    const ReferenceSignal& reference,
                    const Eigen::VectorXd& x_init, Eigen::Index steps,
                    const SimulationOptions& opts = {}) {
    if (steps < 1) throw ParameterError("simulation needs at least one step");
    if (x_init.size() != plant.state_dim)
        throw DimensionError("initial state dimension mismatch");

    Trajectory traj;
    traj.sample_time = plant.sample_time;
    traj.states.resize(plant.state_dim, steps);
    traj.inputs.resize(plant.input_dim, steps);
    traj.scheduling.resize(controller.basis().size, steps);
    traj.reference.resize(steps);

    auto state = controller.initial_state(x_init);
    Eigen::VectorXd x = x_init;
    Eigen::Index recorded = 0;
    for (Eigen::Index k = 0; k < steps; ++k) {
        const double t = static_cast<double>(k) * plant.sample_time;
        const double r = reference(k, t);
        Eigen::VectorXd ref(1);
        ref << r;
        ControllerStepResult res;
        try {
            res = controller.step(state, x, ref);
        } catch (const NumericError&) {
            traj.diverged = true;
            traj.divergence_step = k;
            break;
        }
        traj.states.col(k) = x;
        traj.inputs.col(k) = res.u;
        traj.scheduling.col(k) = res.scheduling;
        traj.reference(k) = r;
        if (res.used_fallback) ++traj.fallback_steps;
        if (opts.scheduling_box &&
            !opts.scheduling_box->contains(res.scheduling, 1e-12))
            ++traj.scheduling_exits;
        recorded = k + 1;

        if (x.lpNorm<Eigen::Infinity>() > opts.divergence_threshold) {
            traj.diverged = true;
            traj.divergence_step = k;
            break;
        }
        try {
            x = plant.step(x, res.u);
        } catch (const NumericError&) {
            traj.diverged = true;
            traj.divergence_step = k;
            break;
        }
    }
    traj.states.conservativeResize(Eigen::NoChange, recorded);
    traj.inputs.conservativeResize(Eigen::NoChange, recorded);
    traj.scheduling.conservativeResize(Eigen::NoChange, recorded);
    traj.reference.conservativeResize(recorded);
    return traj;
}

// ---------------------------------------------------------------------------
// trajectory classification
// ---------------------------------------------------------------------------

/// Detects a sustained oscillation in the trajectory tail: bounded,
/// non-convergent, and near-periodic (normalized autocorrelation peak above
/// 0.9 at some lag within the window). Diverged trajectories are never
/// flagged; they carry their own flag.
inline bool detect_limit_cycle(const Trajectory& traj, Eigen::Index window = 100,
                               double tol = 1e-4) {
    if (traj.diverged) return false;
    if (traj.steps() < 2 * window + 1) return false;

    const Eigen::Index tail_len = 2 * window;
    const Eigen::MatrixXd tail =
        traj.states.rightCols(tail_len).topRows(1); // tracked coordinate
    const Eigen::RowVectorXd centered =
        tail.row(0).array() - tail.row(0).mean();

    // convergence would shrink the deviation between the two half-windows
    const double rms_first =
        std::sqrt(centered.head(window).squaredNorm() / double(window));
    const double rms_second =
        std::sqrt(centered.tail(window).squaredNorm() / double(window));
    if (rms_second < tol) return false;                  // settled
    if (rms_second < 0.5 * rms_first) return false;      // still decaying

    const double denom = centered.squaredNorm();
    if (denom <= tol * tol) return false;
    double best = -1.0;
    for (Eigen::Index lag = 1; lag <= window; ++lag) {
        const Eigen::Index n = tail_len - lag;
        const double num =
            (centered.head(n).array() * centered.tail(n).array()).sum();
        const double scale =
            std::sqrt(centered.head(n).squaredNorm() *
                      centered.tail(n).squaredNorm());
        if (scale > 0) best = std::max(best, num / scale);
    }
    return best > 0.9;
}

enum class Outcome { Settled, LimitCycle, Diverged, Undetermined };

inline const char* to_string(Outcome o) {
    switch (o) {
    case Outcome::Settled: return "settled";
    case Outcome::LimitCycle: return "limit-cycle";
    case Outcome::Diverged: return "diverged";
    case Outcome::Undetermined: return "undetermined";
    }
    return "unknown";
}

struct TrajectoryMetrics {
    Outcome outcome = Outcome::Undetermined;
    double final_error = 0.0;     // |tracked output - reference| at the end
    Eigen::Index settle_step = -1; // first step after which the error stays low
    double max_state = 0.0;
    double input_energy = 0.0;    // sum of squared inputs
};

/// Classifies a trajectory against the tracked coordinate (state 0).
inline TrajectoryMetrics analyze_trajectory(const Trajectory& traj,
                                            double settle_tol = 0.01,
                                            Eigen::Index cycle_window = 100) {
    TrajectoryMetrics m;
    if (traj.steps() == 0) {
        m.outcome = Outcome::Diverged;
        return m;
    }
    m.max_state = traj.states.cwiseAbs().maxCoeff();
    m.input_energy = traj.inputs.squaredNorm();
    const Eigen::Index last = traj.steps() - 1;
    m.final_error = std::abs(traj.states(0, last) - traj.reference(last));

    if (traj.diverged) {
        m.outcome = Outcome::Diverged;
        return m;
    }
    for (Eigen::Index k = traj.steps(); k-- > 0;) {
        if (std::abs(traj.states(0, k) - traj.reference(k)) > settle_tol) {
            m.settle_step = (k + 1 < traj.steps()) ? k + 1 : -1;
            break;
        }
        if (k == 0) m.settle_step = 0;
    }
    if (m.settle_step >= 0 && m.final_error <= settle_tol) {
        m.outcome = Outcome::Settled;
        return m;
    }
    m.settle_step = -1;
    if (detect_limit_cycle(traj, cycle_window)) {
        m.outcome = Outcome::LimitCycle;
        return m;
    }
    m.outcome = Outcome::Undetermined;
    return m;
}

} // namespace ddvc
