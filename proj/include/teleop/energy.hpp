#ifndef TELEOP_ENERGY_HPP
#define TELEOP_ENERGY_HPP

// Energy bookkeeping for linear configurations (SpringDamper, unsaturated
// Electromechanical or Rigid transmission; FreeSpace, TorsionSpring or
// SpringDamperEnv environment) simulated in true-state mode.
//
// Semi-implicit Euler conserves the modified energy
//     H̃ = T + V − (dt/2)·Σ_i ∂V/∂θ_i · ω_i
// exactly for linear springs, and for any non-conservative torques f_i
//     H̃(n+1) − H̃(n) = dt · Σ_i f_i · (ω_i(n) + ω_i(n+1)) / 2.

#include <variant>

#include "teleop/engine.hpp"

namespace teleop {

struct EnergyTerms {
    double kinetic = 0.0;
    double potential = 0.0;
    double modified = 0.0;  // integrator-consistent energy H̃

    double mechanical() const { return kinetic + potential; }
};

namespace detail {

inline double transmission_stiffness(const TransmissionSpec& spec) {
    if (const auto* s = std::get_if<SpringDamper>(&spec)) return s->spring_engaged ? s->stiffness : 0.0;
    if (const auto* s = std::get_if<Electromechanical>(&spec)) return s->kp;
    return 0.0;
}

}  // namespace detail

inline EnergyTerms energy(const SimConfig& cfg, ShaftState master, ShaftState slave) {
    const double k_env = environment_stiffness(cfg.environment);
    const double x_env = slave.angle - environment_rest_angle(cfg.environment);
    EnergyTerms e;
    if (std::holds_alternative<Rigid>(cfg.transmission)) {
        const double inertia = cfg.master_inertia + cfg.slave_inertia;
        e.kinetic = 0.5 * inertia * master.velocity * master.velocity;
        e.potential = 0.5 * k_env * x_env * x_env;
        e.modified = e.mechanical() - 0.5 * cfg.dt * k_env * x_env * master.velocity;
        return e;
    }
    const double k = detail::transmission_stiffness(cfg.transmission);
    const double stretch = master.angle - slave.angle;
    e.kinetic = 0.5 * cfg.master_inertia * master.velocity * master.velocity +
                0.5 * cfg.slave_inertia * slave.velocity * slave.velocity;
    e.potential = 0.5 * k * stretch * stretch + 0.5 * k_env * x_env * x_env;
    const double dv_master = k * stretch;
    const double dv_slave = -k * stretch + k_env * x_env;
    e.modified = e.mechanical() -
                 0.5 * cfg.dt * (dv_master * master.velocity + dv_slave * slave.velocity);
    return e;
}

/// Energy audit of one logged tick.
inline EnergyTerms energy_at(const SimConfig& cfg, const TimeSeriesLog& log, std::size_t n) {
    return energy(cfg, {log.master_angle[n], log.master_velocity[n]},
                  {log.slave_angle[n], log.slave_velocity[n]});
}

}  // namespace teleop

#endif  // TELEOP_ENERGY_HPP
