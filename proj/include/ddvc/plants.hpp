#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <string>
#include <utility>

#include "ddvc/errors.hpp"

namespace ddvc {

/// Discrete-time plant x_{k+1} = f(x_k, u_k) with full state observation.
/// Jacobian maps are analytic for the built-in plants; use fd_jacobians()
/// to wrap a custom step map.
struct Plant {
    using StepFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&,
                                                 const Eigen::VectorXd&)>;
    using JacFn = std::function<Eigen::MatrixXd(const Eigen::VectorXd&,
                                                const Eigen::VectorXd&)>;

    std::string name;
    Eigen::Index state_dim = 0;
    Eigen::Index input_dim = 0;
    double sample_time = 0.01;
    StepFn f;
    JacFn jac_x; // d f / d x
    JacFn jac_u; // d f / d u

    Eigen::VectorXd step(const Eigen::VectorXd& x,
                         const Eigen::VectorXd& u) const {
        if (x.size() != state_dim || u.size() != input_dim)
            throw DimensionError("plant step called with wrong dimensions");
        Eigen::VectorXd next = f(x, u);
        if (!next.allFinite())
            throw NumericError("plant '" + name + "' produced non-finite state");
        return next;
    }
};

/// Physical parameters of the unbalanced disc. Values below are
/// representative for this class of laboratory setup; override from config
/// when matching a particular rig.
struct DiscParams {
    double mass = 0.076;          // kg
    double gravity = 9.8;         // m/s^2
    double arm = 0.041;           // m, distance of the off-center mass
    double inertia = 2.4e-4;      // kg m^2
    double tau = 0.5;             // s, motor time constant
    double motor_gain = 11.0;     // Km
    double sample_time = 0.01;    // s

    void validate() const {
        if (!(mass > 0 && gravity > 0 && arm > 0 && inertia > 0 && tau > 0 &&
              motor_gain > 0 && sample_time > 0))
            throw ParameterError("disc parameters must be positive");
    }

    // Lumped coefficients of the Euler-discretized dynamics.
    double gravity_coeff() const {
        return sample_time * mass * gravity * arm / inertia;
    }
    double damping_coeff() const { return 1.0 - sample_time / tau; }
    double input_coeff() const { return sample_time * motor_gain / tau; }
};

/// Euler-discretized unbalanced disc:
///   x1' = x1 + Ts x2
///   x2' = (1 - Ts/tau) x2 - (Ts m g l / J) sin(x1) + (Ts Km / tau) u
inline Plant make_disc_plant(const DiscParams& p = {}) {
    p.validate();
    Plant plant;
    plant.name = "disc";
    plant.state_dim = 2;
    plant.input_dim = 1;
    plant.sample_time = p.sample_time;
    const double ts = p.sample_time;
    const double grav = p.gravity_coeff();
    const double damp = p.damping_coeff();
    const double gain = p.input_coeff();
    plant.f = [=](const Eigen::VectorXd& x, const Eigen::VectorXd& u) {
        Eigen::VectorXd next(2);
        next(0) = x(0) + ts * x(1);
        next(1) = damp * x(1) - grav * std::sin(x(0)) + gain * u(0);
        return next;
    };
    plant.jac_x = [=](const Eigen::VectorXd& x, const Eigen::VectorXd&) {
        Eigen::MatrixXd J(2, 2);
        J << 1.0, ts, -grav * std::cos(x(0)), damp;
        return J;
    };
    plant.jac_u = [=](const Eigen::VectorXd&, const Eigen::VectorXd&) {
        Eigen::MatrixXd J(2, 1);
        J << 0.0, gain;
        return J;
    };
    return plant;
}

inline Plant make_lti_plant(Eigen::MatrixXd A, Eigen::MatrixXd B,
                            double sample_time = 0.01) {
    if (A.rows() != A.cols() || B.rows() != A.rows())
        throw DimensionError("inconsistent LTI matrices");
    Plant plant;
    plant.name = "lti";
    plant.state_dim = A.rows();
    plant.input_dim = B.cols();
    plant.sample_time = sample_time;
    plant.f = [A, B](const Eigen::VectorXd& x, const Eigen::VectorXd& u) {
        return Eigen::VectorXd(A * x + B * u);
    };
    plant.jac_x = [A](const Eigen::VectorXd&, const Eigen::VectorXd&) { return A; };
    plant.jac_u = [B](const Eigen::VectorXd&, const Eigen::VectorXd&) { return B; };
    return plant;
}

/// Installs central-difference Jacobians on a plant that only has a step map.
inline void fd_jacobians(Plant& plant, double h = 1e-6) {
    const auto f = plant.f;
    const Eigen::Index nx = plant.state_dim, nu = plant.input_dim;
    plant.jac_x = [f, nx, h](const Eigen::VectorXd& x, const Eigen::VectorXd& u) {
        Eigen::MatrixXd J(nx, nx);
        for (Eigen::Index j = 0; j < nx; ++j) {
            Eigen::VectorXd xp = x, xm = x;
            xp(j) += h;
            xm(j) -= h;
            J.col(j) = (f(xp, u) - f(xm, u)) / (2 * h);
        }
        return J;
    };
    plant.jac_u = [f, nx, nu, h](const Eigen::VectorXd& x, const Eigen::VectorXd& u) {
        Eigen::MatrixXd J(nx, nu);
        for (Eigen::Index j = 0; j < nu; ++j) {
            Eigen::VectorXd up = u, um = u;
            up(j) += h;
            um(j) -= h;
            J.col(j) = (f(x, up) - f(x, um)) / (2 * h);
        }
        return J;
    };
}

} // namespace ddvc
