#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "ddvc/errors.hpp"

namespace ddvc {

/// Divided difference of sin: (sin(a) - sin(b)) / (a - b), extended by its
/// limit cos(a) at a == b. Evaluated through the identity
/// cos((a+b)/2) * sinc((a-b)/2) so the branch switch is continuous.
inline double sin_divided_difference(double a, double b) {
    const double mid = 0.5 * (a + b);
    const double half = 0.5 * (a - b);
    double s;
    if (std::abs(half) < 1e-6) {
        // series for sin(t)/t; cancellation-free near coincident arguments
        const double t2 = half * half;
        s = 1.0 - t2 / 6.0 * (1.0 - t2 / 20.0);
    } else {
        s = std::sin(half) / half;
    }
    return std::cos(mid) * s;
}

/// sin(x)/x with the removable singularity filled in (value 1 at x = 0).
inline double sinc(double x) {
    if (std::abs(x) < 1e-6) {
        const double t2 = x * x;
        return 1.0 - t2 / 6.0 * (1.0 - t2 / 20.0);
    }
    return std::sin(x) / x;
}

/// Map from (x_k, u_k, x_{k-1}, u_{k-1}) to the scheduling vector.
///
/// Basis functions must return finite values for all admissible arguments,
/// including coincident ones; builders below install the required
/// removable-singularity guards.
struct SchedulingBasis {
    using EvalFn = std::function<Eigen::VectorXd(
        const Eigen::VectorXd& xk, const Eigen::VectorXd& uk,
        const Eigen::VectorXd& xkm1, const Eigen::VectorXd& ukm1)>;

    Eigen::Index size = 0;          // number of basis functions
    std::string kind = "custom";    // sinc-difference | sinc-current | polynomial | custom
    bool depends_on_input = false;  // whether u_k enters the map
    EvalFn fn;
};

/// Scheduling from the divided difference of sin over one state coordinate,
/// p = sind(x_i[k], x_i[k-1]). Always lands in [-1, 1].
inline SchedulingBasis sinc_difference_basis(Eigen::Index state_index = 0) {
    SchedulingBasis b;
    b.size = 1;
    b.kind = "sinc-difference";
    b.depends_on_input = false;
    b.fn = [state_index](const Eigen::VectorXd& xk, const Eigen::VectorXd&,
                         const Eigen::VectorXd& xkm1, const Eigen::VectorXd&) {
        Eigen::VectorXd p(1);
        p(0) = sin_divided_difference(xk(state_index), xkm1(state_index));
        return p;
    };
    return b;
}

/// Scheduling p = sin(x_i[k]) / x_i[k] on the current state only; the form
/// used by direct (non-velocity) embeddings.
inline SchedulingBasis sinc_current_basis(Eigen::Index state_index = 0) {
    SchedulingBasis b;
    b.size = 1;
    b.kind = "sinc-current";
    b.depends_on_input = false;
    b.fn = [state_index](const Eigen::VectorXd& xk, const Eigen::VectorXd&,
                         const Eigen::VectorXd&, const Eigen::VectorXd&) {
        Eigen::VectorXd p(1);
        p(0) = sinc(xk(state_index));
        return p;
    };
    return b;
}

/// One monomial factor in a polynomial basis function.
struct MonomialFactor {
    enum class Arg { StateK, InputK, StateKm1, InputKm1 };
    Arg arg = Arg::StateK;
    Eigen::Index index = 0;
    int power = 1;
};

/// Polynomial scheduling basis; each entry of `terms` is a product of
/// factors forming one basis function.
inline SchedulingBasis
polynomial_basis(std::vector<std::vector<MonomialFactor>> terms) {
    SchedulingBasis b;
    b.size = static_cast<Eigen::Index>(terms.size());
    b.kind = "polynomial";
    for (const auto& term : terms)
        for (const auto& f : term)
            if (f.arg == MonomialFactor::Arg::InputK) b.depends_on_input = true;
    b.fn = [terms = std::move(terms)](
               const Eigen::VectorXd& xk, const Eigen::VectorXd& uk,
               const Eigen::VectorXd& xkm1, const Eigen::VectorXd& ukm1) {
        Eigen::VectorXd p(static_cast<Eigen::Index>(terms.size()));
        for (std::size_t i = 0; i < terms.size(); ++i) {
            double v = 1.0;
            for (const auto& f : terms[i]) {
                double base = 0.0;
                switch (f.arg) {
                case MonomialFactor::Arg::StateK: base = xk(f.index); break;
                case MonomialFactor::Arg::InputK: base = uk(f.index); break;
                case MonomialFactor::Arg::StateKm1: base = xkm1(f.index); break;
                case MonomialFactor::Arg::InputKm1: base = ukm1(f.index); break;
                }
                v *= std::pow(base, f.power);
            }
            p(static_cast<Eigen::Index>(i)) = v;
        }
        return p;
    };
    return b;
}

/// Evaluates the basis with argument validation.
inline Eigen::VectorXd eval_basis(const SchedulingBasis& basis,
                                  const Eigen::VectorXd& xk,
                                  const Eigen::VectorXd& uk,
                                  const Eigen::VectorXd& xkm1,
                                  const Eigen::VectorXd& ukm1) {
    if (xk.size() != xkm1.size() || uk.size() != ukm1.size())
        throw DimensionError("basis arguments at k and k-1 differ in size");
    if (!xk.allFinite() || !uk.allFinite() || !xkm1.allFinite() ||
        !ukm1.allFinite())
        throw NumericError("non-finite basis argument");
    Eigen::VectorXd p = basis.fn(xk, uk, xkm1, ukm1);
    if (p.size() != basis.size)
        throw DimensionError("basis returned wrong number of components");
    if (!p.allFinite()) throw NumericError("basis evaluated to non-finite value");
    return p;
}

/// Axis-aligned box over scheduling space with its corner enumeration.
///
/// A box is used instead of a general polytope: corner enumeration is
/// trivial and the vertex LMI instantiation in the synthesis needs exactly
/// the corner list.
class PBox {
public:
    PBox(Eigen::VectorXd lower, Eigen::VectorXd upper)
        : lower_(std::move(lower)), upper_(std::move(upper)) {
        if (lower_.size() != upper_.size())
            throw DimensionError("box bound sizes differ");
        if (((upper_ - lower_).array() < 0).any())
            throw ParameterError("box has upper < lower on some axis");
    }

    Eigen::Index dim() const { return lower_.size(); }
    const Eigen::VectorXd& lower() const { return lower_; }
    const Eigen::VectorXd& upper() const { return upper_; }

    bool contains(const Eigen::VectorXd& p, double tol = 0.0) const {
        if (p.size() != dim()) throw DimensionError("point/box dimension mismatch");
        return ((p - lower_).array() >= -tol).all() &&
               ((upper_ - p).array() >= -tol).all();
    }

    Eigen::Index vertex_count() const { return Eigen::Index(1) << dim(); }

    /// Corners in lexicographic order: axis 0 varies slowest, lower bound
    /// before upper bound.
    std::vector<Eigen::VectorXd> vertices() const {
        std::vector<Eigen::VectorXd> vs;
        const Eigen::Index n = dim();
        vs.reserve(static_cast<std::size_t>(vertex_count()));
        for (Eigen::Index mask = 0; mask < vertex_count(); ++mask) {
            Eigen::VectorXd v(n);
            for (Eigen::Index j = 0; j < n; ++j) {
                const bool hi = (mask >> (n - 1 - j)) & 1;
                v(j) = hi ? upper_(j) : lower_(j);
            }
            vs.push_back(std::move(v));
        }
        return vs;
    }

    Eigen::VectorXd sample(const Eigen::VectorXd& unit) const {
        return lower_ + (upper_ - lower_).cwiseProduct(unit);
    }

private:
    Eigen::VectorXd lower_, upper_;
};

/// Builds the scheduling box around observed samples.
///
/// Each axis is inflated by `margin` times the sample range; axes with zero
/// range get an absolute half-width of `degenerate_floor` instead, so the
/// box never collapses to a point.
inline PBox build_pbox(const std::vector<Eigen::VectorXd>& samples,
                       double margin = 0.05, double degenerate_floor = 1e-3) {
    if (samples.empty()) throw InsufficientDataError("no scheduling samples");
    if (!std::isfinite(margin) || margin < 0)
        throw ParameterError("margin must be finite and >= 0");
    const Eigen::Index n = samples.front().size();
    Eigen::VectorXd lo = samples.front(), hi = samples.front();
    for (const auto& s : samples) {
        if (s.size() != n) throw DimensionError("scheduling samples differ in size");
        lo = lo.cwiseMin(s);
        hi = hi.cwiseMax(s);
    }
    for (Eigen::Index j = 0; j < n; ++j) {
        const double w = hi(j) - lo(j);
        if (w == 0.0) {
            lo(j) -= degenerate_floor;
            hi(j) += degenerate_floor;
        } else {
            lo(j) -= margin * w;
            hi(j) += margin * w;
        }
    }
    return PBox(lo, hi);
}

} // namespace ddvc
