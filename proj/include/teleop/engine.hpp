#ifndef TELEOP_ENGINE_HPP
#define TELEOP_ENGINE_HPP

/** @file
 * Fixed-step closed-loop simulation of operator → master shaft →
 * transmission → slave shaft → environment.
 *
 * Integration is semi-implicit Euler: velocities are advanced with the
 * torques of the current tick, then angles with the new velocities.  One tick
 * corresponds to one iteration of a sampled controller, so dt = 1e-3 models a
 * 1 kHz loop.
 *
 * Sensor model:
 *  - encoders truncate the angle to 2π/counts_per_rev;
 *  - the input torque sensor reads the operator torque;
 *  - the output torque sensor sits inline between the transmission and the
 *    environment side and reads the torque delivered into it;
 *  - both torque readings get seeded white Gaussian noise and are then
 *    clamped to ±torque_saturation.
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "teleop/environments.hpp"
#include "teleop/error.hpp"
#include "teleop/operators.hpp"
#include "teleop/transmissions.hpp"

namespace teleop {

struct SensorSpec {
    double torque_saturation = 5.0;  // N·m
    double torque_noise_std = 1e-3;  // N·m
    std::uint32_t encoder_counts_per_rev = 2000;  // 500 CPT, x4 quadrature
    /// Control and rendering read encoder angles (and backward-difference
    /// velocities) instead of the true state.
    bool angle_from_quantized = true;
};

/// Master and slave inertias default to 2e-4 kg·m²; the physical values are
/// unknown, so treat them as conventions.
struct SimConfig {
    double dt = 1e-3;
    double duration = 1.0;
    double master_inertia = 2e-4;
    double slave_inertia = 2e-4;
    TransmissionSpec transmission = SpringDamper{};
    EnvironmentSpec environment = FreeSpace{};
    OperatorSpec operator_model = TorqueStep{};
    SensorSpec sensors{};
    std::uint64_t rng_seed = 0;
    ShaftState initial_master{};
    ShaftState initial_slave{};
    /// Render the environment torque computed on the previous tick.
    bool environment_delay = false;
};

/// Per-tick record.  All columns have the same length.
struct TimeSeriesLog {
    double dt = 0.0;
    std::vector<double> time;
    std::vector<double> master_angle;
    std::vector<double> master_velocity;
    std::vector<double> slave_angle;
    std::vector<double> slave_velocity;
    std::vector<double> operator_torque;
    std::vector<double> operator_torque_sensed;
    std::vector<double> environment_torque;         // torque rendered on the slave
    std::vector<double> environment_torque_sensed;  // output shaft sensor reading
    std::vector<double> master_angle_quantized;
    std::vector<double> slave_angle_quantized;

    std::size_t size() const noexcept { return time.size(); }

    void reserve(std::size_t n) {
        for (auto* c : columns()) c->reserve(n);
    }

    std::vector<std::vector<double>*> columns() {
        return {&time, &master_angle, &master_velocity, &slave_angle, &slave_velocity,
                &operator_torque, &operator_torque_sensed, &environment_torque,
                &environment_torque_sensed, &master_angle_quantized, &slave_angle_quantized};
    }

    std::vector<const std::vector<double>*> columns() const {
        return {&time, &master_angle, &master_velocity, &slave_angle, &slave_velocity,
                &operator_torque, &operator_torque_sensed, &environment_torque,
                &environment_torque_sensed, &master_angle_quantized, &slave_angle_quantized};
    }

    friend bool operator==(const TimeSeriesLog&, const TimeSeriesLog&) = default;
};

/// Truncates `angle` toward −∞ to a whole number of encoder counts.
/// Angles within rounding distance of a count boundary map onto it.
inline double encoder_quantize(double angle, std::uint32_t counts_per_rev) {
    if (counts_per_rev < 1) throw InvalidSpec("encoder_counts_per_rev must be >= 1");
    constexpr double two_pi = 2.0 * std::numbers::pi;
    const double counts = static_cast<double>(counts_per_rev);
    double c = angle * counts / two_pi;
    const double nearest = std::nearbyint(c);
    if (std::abs(c - nearest) <= 1e-12 * std::max(1.0, std::abs(c))) c = nearest;
    return std::floor(c) * two_pi / counts;
}

/// Number of log rows, floor(duration/dt) + 1.  The small slack keeps
/// e.g. 1.0/1e-3 from truncating to 999.
inline std::size_t tick_count(double duration, double dt) {
    return static_cast<std::size_t>(std::floor(duration / dt + 1e-9)) + 1;
}

inline void validate(const SensorSpec& s) {
    if (!(s.torque_saturation > 0.0) || !std::isfinite(s.torque_saturation))
        throw InvalidSpec("sensors: torque_saturation must be > 0");
    if (!(s.torque_noise_std >= 0.0) || !std::isfinite(s.torque_noise_std))
        throw InvalidSpec("sensors: torque_noise_std must be >= 0");
    if (s.encoder_counts_per_rev < 1) throw InvalidSpec("sensors: encoder_counts_per_rev must be >= 1");
}

inline void validate(const SimConfig& cfg) {
    if (!(cfg.dt > 0.0) || !std::isfinite(cfg.dt)) throw InvalidSpec("dt must be > 0");
    if (!(cfg.duration >= cfg.dt) || !std::isfinite(cfg.duration))
        throw InvalidSpec("duration must be >= dt");
    if (!(cfg.master_inertia > 0.0) || !std::isfinite(cfg.master_inertia))
        throw InvalidSpec("master_inertia must be > 0");
    if (!(cfg.slave_inertia > 0.0) || !std::isfinite(cfg.slave_inertia))
        throw InvalidSpec("slave_inertia must be > 0");
    validate(cfg.transmission);
    validate(cfg.environment);
    validate(cfg.operator_model);
    validate(cfg.sensors);
    for (const auto& s : {cfg.initial_master, cfg.initial_slave})
        if (!std::isfinite(s.angle) || !std::isfinite(s.velocity))
            throw InvalidSpec("initial shaft states must be finite");
}

/**
 * Runs the closed loop for floor(duration/dt)+1 ticks.
 *
 * Master:  J_m·ω̇_m = τ_operator + τ_coupling,master
 * Slave:   J_s·ω̇_s = τ_coupling,slave + τ_environment
 * Rigid:   (J_m+J_s)·ω̇ = τ_operator + τ_environment − b_parasitic·ω
 *
 * Row n holds the state at t = n·dt and the torques applied during the step
 * that leaves it.  Throws InvalidSpec for an invalid config and Diverged when
 * the state stops being finite.
 */
inline TimeSeriesLog run_simulation(const SimConfig& cfg) {
    validate(cfg);
    const bool rigid = std::holds_alternative<Rigid>(cfg.transmission);
    ShaftState master = cfg.initial_master;
    ShaftState slave = cfg.initial_slave;
    if (rigid) master = slave = rigid_constraint(master, slave);

    const double dt = cfg.dt;
    const auto& sensors = cfg.sensors;
    const std::uint32_t cpr = sensors.encoder_counts_per_rev;
    const std::size_t n_ticks = tick_count(cfg.duration, dt);

    std::mt19937_64 rng(cfg.rng_seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    auto sense = [&](double torque) {
        if (sensors.torque_noise_std > 0.0) torque += sensors.torque_noise_std * noise(rng);
        return std::clamp(torque, -sensors.torque_saturation, sensors.torque_saturation);
    };

    // Seeded so the first backward difference reproduces the initial velocity.
    double qm_prev = encoder_quantize(master.angle - master.velocity * dt, cpr);
    double qs_prev = encoder_quantize(slave.angle - slave.velocity * dt, cpr);
    double env_prev = 0.0;

    TimeSeriesLog log;
    log.dt = dt;
    log.reserve(n_ticks);

    for (std::size_t n = 0; n < n_ticks; ++n) {
        const double t = static_cast<double>(n) * dt;
        const double qm = encoder_quantize(master.angle, cpr);
        const double qs = encoder_quantize(slave.angle, cpr);
        const ShaftState master_meas = sensors.angle_from_quantized
                                           ? ShaftState{qm, (qm - qm_prev) / dt}
                                           : master;
        const ShaftState slave_meas = sensors.angle_from_quantized
                                          ? ShaftState{qs, (qs - qs_prev) / dt}
                                          : slave;

        const double tau_op = operator_torque(t, master, cfg.operator_model);
        const double env_now = environment_torque(slave_meas, cfg.environment);
        const double tau_env = (cfg.environment_delay && n > 0) ? env_prev : env_now;
        env_prev = env_now;

        double accel_master = 0.0;
        double accel_slave = 0.0;
        double shaft_torque = 0.0;
        if (rigid) {
            const auto& r = std::get<Rigid>(cfg.transmission);
            const double accel = (tau_op + tau_env - r.parasitic_damping * master.velocity) /
                                 (cfg.master_inertia + cfg.slave_inertia);
            accel_master = accel_slave = accel;
            shaft_torque = cfg.slave_inertia * accel - tau_env +
                           r.output_side_share * r.parasitic_damping * master.velocity;
        } else {
            const auto c = coupling_torques(master_meas, slave_meas, cfg.transmission);
            accel_master = (tau_op + c.on_master) / cfg.master_inertia;
            accel_slave = (c.on_slave + tau_env) / cfg.slave_inertia;
            shaft_torque = c.on_slave;
        }

        log.time.push_back(t);
        log.master_angle.push_back(master.angle);
        log.master_velocity.push_back(master.velocity);
        log.slave_angle.push_back(slave.angle);
        log.slave_velocity.push_back(slave.velocity);
        log.operator_torque.push_back(tau_op);
        log.operator_torque_sensed.push_back(sense(tau_op));
        log.environment_torque.push_back(tau_env);
        log.environment_torque_sensed.push_back(sense(shaft_torque));
        log.master_angle_quantized.push_back(qm);
        log.slave_angle_quantized.push_back(qs);

        if (n + 1 == n_ticks) break;

        master.velocity += dt * accel_master;
        master.angle += dt * master.velocity;
        if (rigid) {
            slave = master;
        } else {
            slave.velocity += dt * accel_slave;
            slave.angle += dt * slave.velocity;
        }
        if (!std::isfinite(master.angle) || !std::isfinite(master.velocity) ||
            !std::isfinite(slave.angle) || !std::isfinite(slave.velocity))
            throw Diverged(n + 1);
        qm_prev = qm;
        qs_prev = qs;
    }
    return log;
}

}  // namespace teleop

#endif  // TELEOP_ENGINE_HPP
