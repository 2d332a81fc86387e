#ifndef TELEOP_OPERATORS_HPP
#define TELEOP_OPERATORS_HPP

// Simulated participants.  Each model is a closed-form function of time and
// master state; nothing is accumulated between calls.

#include <cmath>
#include <numbers>
#include <type_traits>
#include <variant>

#include "teleop/error.hpp"
#include "teleop/transmissions.hpp"

namespace teleop {

struct TorqueStep {
    double amplitude = 0.1;  // N·m
    double onset = 0.1;      // s
};

struct TorqueSine {
    double amplitude = 0.1;
    double frequency = 1.0;  // Hz
    double phase = 0.0;      // rad
};

/// Linear sweep from f0 to f1 over `duration`; holds f1 afterwards.
struct TorqueChirp {
    double amplitude = 0.1;
    double f0 = 0.1;
    double f1 = 10.0;
    double duration = 10.0;
};

struct ReferenceStep {
    double amplitude = 0.0;  // rad
    double onset = 0.0;
};

struct ReferenceSine {
    double amplitude = 0.0;
    double frequency = 1.0;
    double phase = 0.0;
};

using ReferenceProfile = std::variant<ReferenceStep, ReferenceSine>;

/// Hand modelled as a spring-damper pulling the master toward a target
/// trajectory.
struct ImpedanceTracker {
    ReferenceProfile target = ReferenceStep{};
    double hand_stiffness = 0.0;
    double hand_damping = 0.0;
};

using OperatorSpec = std::variant<TorqueStep, TorqueSine, TorqueChirp, ImpedanceTracker>;

namespace detail {

inline void require(bool ok, const char* what) {
    if (!ok) throw InvalidSpec(what);
}

}  // namespace detail

inline void validate(const OperatorSpec& spec) {
    using detail::require;
    std::visit(
        [](const auto& o) {
            using T = std::decay_t<decltype(o)>;
            if constexpr (std::is_same_v<T, TorqueStep>) {
                require(std::isfinite(o.amplitude) && o.amplitude >= 0.0, "step: amplitude must be >= 0");
                require(std::isfinite(o.onset), "step: onset must be finite");
            } else if constexpr (std::is_same_v<T, TorqueSine>) {
                require(std::isfinite(o.amplitude) && o.amplitude >= 0.0, "sine: amplitude must be >= 0");
                require(std::isfinite(o.frequency) && o.frequency > 0.0, "sine: frequency must be > 0");
                require(std::isfinite(o.phase), "sine: phase must be finite");
            } else if constexpr (std::is_same_v<T, TorqueChirp>) {
                require(std::isfinite(o.amplitude) && o.amplitude >= 0.0, "chirp: amplitude must be >= 0");
                require(std::isfinite(o.f0) && o.f0 > 0.0, "chirp: f0 must be > 0");
                require(std::isfinite(o.f1) && o.f1 >= o.f0, "chirp: f1 must be >= f0");
                require(std::isfinite(o.duration) && o.duration > 0.0, "chirp: duration must be > 0");
            } else {
                require(std::isfinite(o.hand_stiffness) && o.hand_stiffness >= 0.0,
                        "impedance_tracker: hand_stiffness must be >= 0");
                require(std::isfinite(o.hand_damping) && o.hand_damping >= 0.0,
                        "impedance_tracker: hand_damping must be >= 0");
                std::visit(
                    [](const auto& r) {
                        using R = std::decay_t<decltype(r)>;
                        require(std::isfinite(r.amplitude) && r.amplitude >= 0.0,
                                "impedance_tracker: reference amplitude must be >= 0");
                        if constexpr (std::is_same_v<R, ReferenceSine>)
                            require(std::isfinite(r.frequency) && r.frequency > 0.0,
                                    "impedance_tracker: reference frequency must be > 0");
                    },
                    o.target);
            }
        },
        spec);
}

inline double reference_angle(double t, const ReferenceProfile& ref) {
    if (const auto* s = std::get_if<ReferenceStep>(&ref)) return t >= s->onset ? s->amplitude : 0.0;
    const auto& s = std::get<ReferenceSine>(ref);
    return s.amplitude * std::sin(2.0 * std::numbers::pi * s.frequency * t + s.phase);
}

/// Chirp phase φ(t) = 2π(f0·t + (f1 − f0)·t²/(2·duration)), continued at f1
/// past the end of the sweep.
inline double chirp_phase(double t, const TorqueChirp& c) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    if (t <= c.duration) return two_pi * (c.f0 * t + (c.f1 - c.f0) * t * t / (2.0 * c.duration));
    const double end = two_pi * (c.f0 * c.duration + (c.f1 - c.f0) * c.duration / 2.0);
    return end + two_pi * c.f1 * (t - c.duration);
}

/// Torque the simulated participant applies to the master shaft at time t.
inline double operator_torque(double t, ShaftState master, const OperatorSpec& spec) {
    return std::visit(
        [&](const auto& o) -> double {
            using T = std::decay_t<decltype(o)>;
            if constexpr (std::is_same_v<T, TorqueStep>) {
                return t >= o.onset ? o.amplitude : 0.0;
            } else if constexpr (std::is_same_v<T, TorqueSine>) {
                return o.amplitude * std::sin(2.0 * std::numbers::pi * o.frequency * t + o.phase);
            } else if constexpr (std::is_same_v<T, TorqueChirp>) {
                return o.amplitude * std::sin(chirp_phase(t, o));
            } else {
                return o.hand_stiffness * (reference_angle(t, o.target) - master.angle) -
                       o.hand_damping * master.velocity;
            }
        },
        spec);
}

}  // namespace teleop

#endif  // TELEOP_OPERATORS_HPP
