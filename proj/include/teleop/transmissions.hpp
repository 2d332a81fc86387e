#ifndef TELEOP_TRANSMISSIONS_HPP
#define TELEOP_TRANSMISSIONS_HPP

/** @file
 * Master-slave couplings of the 1-DoF teleoperator.
 *
 * Three transmissions can be engaged between the master (operator-side) and
 * slave (environment-side) shafts: a rigid rod, a torsion spring and rotary
 * damper in parallel, and a pair of motors under position-exchange PD
 * control.  None of them scales torque or position, so unsaturated coupling
 * torques on the two shafts are equal and opposite.
 */

#include <algorithm>
#include <cmath>
#include <type_traits>
#include <variant>

#include "teleop/error.hpp"

namespace teleop {

/// Angle (rad) and angular velocity (rad/s) of one rotational inertia.
struct ShaftState {
    double angle = 0.0;
    double velocity = 0.0;

    friend bool operator==(const ShaftState&, const ShaftState&) = default;
};

/// Rigid rod.  Integrated as one merged inertia with viscous losses
/// `parasitic_damping` (N·m·s/rad) acting on the common velocity.
///
/// `output_side_share` is the fraction of those losses located on the
/// environment side of the output torque sensor (environment motor and
/// bearings).  It only changes what that sensor reads.
struct Rigid {
    double parasitic_damping = 0.005;
    double output_side_share = 0.25;
};

/// Torsion spring (N·m/rad) and rotary damper (N·m·s/rad) in parallel.
/// Either element can be disengaged independently.
struct SpringDamper {
    double stiffness = 0.5;
    double damping = 0.01;
    bool spring_engaged = true;
    bool damper_engaged = true;
};

/// Position-exchange PD control between two back-drivable motors; each
/// motor command is clamped to ±motor_torque_limit.
struct Electromechanical {
    double kp = 2.0;
    double kd = 0.02;
    double motor_torque_limit = 5.0;
};

using TransmissionSpec = std::variant<Rigid, SpringDamper, Electromechanical>;

struct CouplingTorques {
    double on_master = 0.0;
    double on_slave = 0.0;
};

namespace detail {

inline bool finite_nonneg(double v) { return std::isfinite(v) && v >= 0.0; }

}  // namespace detail

/// Throws InvalidSpec when a coefficient is negative or non-finite.
inline void validate(const TransmissionSpec& spec) {
    std::visit(
        [](const auto& s) {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, Rigid>) {
                if (!detail::finite_nonneg(s.parasitic_damping))
                    throw InvalidSpec("rigid: parasitic_damping must be finite and >= 0");
                if (!(s.output_side_share >= 0.0 && s.output_side_share <= 1.0))
                    throw InvalidSpec("rigid: output_side_share must lie in [0, 1]");
            } else if constexpr (std::is_same_v<T, SpringDamper>) {
                if (!detail::finite_nonneg(s.stiffness))
                    throw InvalidSpec("spring_damper: stiffness must be finite and >= 0");
                if (!detail::finite_nonneg(s.damping))
                    throw InvalidSpec("spring_damper: damping must be finite and >= 0");
            } else {
                if (!detail::finite_nonneg(s.kp))
                    throw InvalidSpec("electromechanical: kp must be finite and >= 0");
                if (!detail::finite_nonneg(s.kd))
                    throw InvalidSpec("electromechanical: kd must be finite and >= 0");
                if (!(s.motor_torque_limit > 0.0) || std::isnan(s.motor_torque_limit))
                    throw InvalidSpec("electromechanical: motor_torque_limit must be > 0");
            }
        },
        spec);
}

/**
 * Torques the transmission applies to the master and slave shafts.
 *
 * For SpringDamper, τ = k·(θm − θs) + b·(ωm − ωs) with disengaged elements
 * contributing zero, and the result is (−τ, +τ).  Electromechanical uses kp
 * and kd in the same law and clamps each motor to its torque limit.
 *
 * Throws RigidVariant for Rigid and InvalidSpec for an invalid spec.
 */
inline CouplingTorques coupling_torques(ShaftState master, ShaftState slave,
                                        const TransmissionSpec& spec) {
    validate(spec);
    const double dtheta = master.angle - slave.angle;
    const double domega = master.velocity - slave.velocity;
    return std::visit(
        [&](const auto& s) -> CouplingTorques {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, Rigid>) {
                throw RigidVariant();
            } else if constexpr (std::is_same_v<T, SpringDamper>) {
                const double k = s.spring_engaged ? s.stiffness : 0.0;
                const double b = s.damper_engaged ? s.damping : 0.0;
                const double tau = k * dtheta + b * domega;
                return {-tau, tau};
            } else {
                const double tau = s.kp * dtheta + s.kd * domega;
                const double lim = s.motor_torque_limit;
                return {std::clamp(-tau, -lim, lim), std::clamp(tau, -lim, lim)};
            }
        },
        spec);
}

/// Common state of rigidly coupled shafts.  Throws ConstraintViolation
/// unless both states coincide exactly.
inline ShaftState rigid_constraint(ShaftState master, ShaftState slave) {
    if (!(master == slave))
        throw ConstraintViolation("rigid transmission requires identical master and slave states");
    return master;
}

}  // namespace teleop

#endif  // TELEOP_TRANSMISSIONS_HPP
