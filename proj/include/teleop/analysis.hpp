#ifndef TELEOP_ANALYSIS_HPP
#define TELEOP_ANALYSIS_HPP

// Participant / Environment identification on an engine log.
//
//   Participant: sensed operator torque → master angle
//   Environment: output shaft torque    → slave angle
//
// Each system is fitted independently; a failure of one is reported in its
// SystemFit and does not prevent the other.

#include <optional>
#include <string>
#include <vector>

#include "teleop/engine.hpp"
#include "teleop/sysid.hpp"

namespace teleop {

enum class SystemKind { participant, environment };

inline std::string to_string(SystemKind k) {
    return k == SystemKind::participant ? "Participant" : "Environment";
}

struct SystemFit {
    SystemKind kind = SystemKind::participant;
    std::optional<SecondOrderFit> fit;
    std::string error_kind;  // exception class name when fit is empty
    std::string error;

    bool ok() const { return fit.has_value(); }
};

namespace detail {

template <class F>
SystemFit guarded_fit(SystemKind kind, F&& f) {
    SystemFit out;
    out.kind = kind;
    try {
        out.fit = f();
    } catch (const RankDeficient& e) {
        out.error_kind = "RankDeficient";
        out.error = e.what();
    } catch (const UnstableFit& e) {
        out.error_kind = "UnstableFit";
        out.error = e.what();
    } catch (const InvalidData& e) {
        out.error_kind = "InvalidData";
        out.error = e.what();
    }
    return out;
}

}  // namespace detail

inline SecondOrderFit fit_participant(const TimeSeriesLog& log, FitOptions options = {}) {
    return fit_second_order(log.operator_torque_sensed, log.master_angle, log.dt, options);
}

inline SecondOrderFit fit_environment(const TimeSeriesLog& log, FitOptions options = {}) {
    return fit_second_order(log.environment_torque_sensed, log.slave_angle, log.dt, options);
}

inline SystemFit identify(const TimeSeriesLog& log, SystemKind kind, FitOptions options = {}) {
    return detail::guarded_fit(kind, [&] {
        return kind == SystemKind::participant ? fit_participant(log, options)
                                               : fit_environment(log, options);
    });
}

inline std::vector<SystemFit> identify_systems(const TimeSeriesLog& log, FitOptions options = {}) {
    return {identify(log, SystemKind::participant, options),
            identify(log, SystemKind::environment, options)};
}

}  // namespace teleop

#endif  // TELEOP_ANALYSIS_HPP
