#ifndef TELEOP_ENVIRONMENTS_HPP
#define TELEOP_ENVIRONMENTS_HPP

#include <cmath>
#include <functional>
#include <numbers>
#include <string>
#include <type_traits>
#include <variant>

#include "teleop/error.hpp"
#include "teleop/transmissions.hpp"

namespace teleop {

/// No rendering; the environment motor applies no torque.
struct FreeSpace {};

/// Virtual torsion spring, τ = −k·(θ − θ_rest).
struct TorsionSpring {
    double stiffness = 0.0;  // N·m/rad
    double rest_angle = 0.0;
};

/// Spring plus viscous damper; stands in for physical environments.
struct SpringDamperEnv {
    double stiffness = 0.0;
    double damping = 0.0;  // N·m·s/rad
    double rest_angle = 0.0;
};

/// Extension point for user-supplied environments.  Not serialisable.
struct CustomEnvironment {
    std::function<double(const ShaftState&)> torque;
    std::string name = "custom";
};

using EnvironmentSpec = std::variant<FreeSpace, TorsionSpring, SpringDamperEnv, CustomEnvironment>;

/// Converts a stiffness given in mN·m/deg to N·m/rad.
constexpr double mnm_per_deg_to_nm_per_rad(double value) {
    return value * 1e-3 * 180.0 / std::numbers::pi;
}

inline void validate(const EnvironmentSpec& spec) {
    std::visit(
        [](const auto& e) {
            using T = std::decay_t<decltype(e)>;
            if constexpr (std::is_same_v<T, TorsionSpring> || std::is_same_v<T, SpringDamperEnv>) {
                if (!(std::isfinite(e.stiffness) && e.stiffness >= 0.0))
                    throw InvalidSpec("environment: stiffness must be finite and >= 0");
                if (!std::isfinite(e.rest_angle))
                    throw InvalidSpec("environment: rest_angle must be finite");
            }
            if constexpr (std::is_same_v<T, SpringDamperEnv>) {
                if (!(std::isfinite(e.damping) && e.damping >= 0.0))
                    throw InvalidSpec("environment: damping must be finite and >= 0");
            }
            if constexpr (std::is_same_v<T, CustomEnvironment>) {
                if (!e.torque) throw InvalidSpec("environment: custom environment has no callback");
            }
        },
        spec);
}

/// Torque the environment applies to the slave shaft.
inline double environment_torque(ShaftState slave, const EnvironmentSpec& spec) {
    return std::visit(
        [&](const auto& e) -> double {
            using T = std::decay_t<decltype(e)>;
            if constexpr (std::is_same_v<T, FreeSpace>) {
                return 0.0;
            } else if constexpr (std::is_same_v<T, TorsionSpring>) {
                return -e.stiffness * (slave.angle - e.rest_angle);
            } else if constexpr (std::is_same_v<T, SpringDamperEnv>) {
                return -e.stiffness * (slave.angle - e.rest_angle) - e.damping * slave.velocity;
            } else {
                return e.torque(slave);
            }
        },
        spec);
}

/// Stiffness of the conservative part of the environment (0 for free space
/// and custom environments).
inline double environment_stiffness(const EnvironmentSpec& spec) {
    if (const auto* s = std::get_if<TorsionSpring>(&spec)) return s->stiffness;
    if (const auto* s = std::get_if<SpringDamperEnv>(&spec)) return s->stiffness;
    return 0.0;
}

inline double environment_rest_angle(const EnvironmentSpec& spec) {
    if (const auto* s = std::get_if<TorsionSpring>(&spec)) return s->rest_angle;
    if (const auto* s = std::get_if<SpringDamperEnv>(&spec)) return s->rest_angle;
    return 0.0;
}

}  // namespace teleop

#endif  // TELEOP_ENVIRONMENTS_HPP
