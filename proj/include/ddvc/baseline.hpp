#pragma once

#include <Eigen/Dense>
#include <optional>
#include <utility>

#include "ddvc/control.hpp"
#include "ddvc/datarep.hpp"
#include "ddvc/synthesis.hpp"

namespace ddvc {

/// Widest value range of sin(x)/x; the default scheduling box of the
/// direct design covers every reachable state.
inline PBox sinc_range_box() {
    Eigen::VectorXd lo(1), hi(1);
    lo << -0.2173;
    hi << 1.0;
    return PBox(lo, hi);
}

/// Treats the raw (non-differenced) signals of a dictionary as the
/// sequences entering the data matrices; the route taken by the direct
/// designs. Scheduling is evaluated per sample on the current signals.
inline VelocityDictionary raw_signal_dictionary(const DataDictionary& d,
                                                const SchedulingBasis& basis) {
    Eigen::MatrixXd p(basis.size, d.length());
    for (Eigen::Index k = 0; k < d.length(); ++k) {
        const Eigen::Index prev = k > 0 ? k - 1 : k;
        p.col(k) = eval_basis(basis, d.states().col(k), d.inputs().col(k),
                              d.states().col(prev), d.inputs().col(prev));
    }
    return VelocityDictionary(d.states(), std::move(p), d.inputs());
}

struct BaselineDesign {
    SynthesisSolution solution;
    IntegratorSpec integrator;
    SchedulingBasis basis;

    StaticController controller() const {
        return StaticController(solution.gains, basis, integrator);
    }
};

/// Direct gain-scheduled state-feedback design on the integrator-augmented
/// raw data. The resulting law is u = K(p) [x; x_I] with p = sin(x1)/x1.
inline BaselineDesign direct_lpv_baseline(const DataDictionary& d,
                                          const Eigen::MatrixXd& Q,
                                          const Eigen::MatrixXd& R,
                                          const IntegratorSpec& integrator,
                                          const SdpBackend& backend,
                                          std::optional<PBox> box = {},
                                          SynthesisOptions opts = {}) {
    const SchedulingBasis basis = sinc_current_basis(0);
    const DataDictionary augmented = augment_integrator(d, integrator);
    const VelocityDictionary raw = raw_signal_dictionary(augmented, basis);
    const DataMatrices dm = build_data_matrices(raw);
    const PBox pbox = box ? *box : sinc_range_box();
    const SynthesisProblem prob(dm, Q, R, pbox, opts);
    BaselineDesign design{solve(prob, backend), integrator, basis};
    return design;
}

/// Time-invariant state-feedback design on the integrator-augmented raw
/// data; the local approximation every scheduling-aware design is compared
/// against.
inline BaselineDesign lti_baseline(const DataDictionary& d,
                                   const Eigen::MatrixXd& Q,
                                   const Eigen::MatrixXd& R,
                                   const IntegratorSpec& integrator,
                                   const SdpBackend& backend,
                                   SynthesisOptions opts = {}) {
    SchedulingBasis empty = polynomial_basis({});
    const DataDictionary augmented = augment_integrator(d, integrator);
    const VelocityDictionary raw = raw_signal_dictionary(augmented, empty);
    const DataMatrices dm = build_data_matrices(raw);
    BaselineDesign design{synth_lti(dm, Q, R, backend, opts), integrator,
                          std::move(empty)};
    return design;
}

} // namespace ddvc
