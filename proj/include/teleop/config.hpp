#ifndef TELEOP_CONFIG_HPP
#define TELEOP_CONFIG_HPP

/** @file
 * JSON configuration schema for simulations and psychometric observers.
 *
 * Parsing is strict: unknown keys, wrong types and missing required fields
 * raise ConfigError naming the offending field (dotted path).  Writing
 * produces the fully resolved form with every default spelled out, which
 * parses back to an identical configuration.
 */

#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <utility>

#include <nlohmann/json.hpp>

#include "teleop/engine.hpp"
#include "teleop/environments.hpp"
#include "teleop/error.hpp"
#include "teleop/psychophysics.hpp"
#include "teleop/sysid.hpp"

namespace teleop {

using json = nlohmann::json;

/// Configuration error; `field()` is the dotted path of the culprit, empty
/// for syntax errors.
class ConfigError : public Error {
public:
    ConfigError(std::string field, const std::string& message)
        : Error(field.empty() ? message : field + ": " + message), field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

/// Parses JSON text; syntax errors report "source:line:column".
inline json parse_config_text(const std::string& text, const std::string& source = "<config>") {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        std::size_t line = 1;
        std::size_t column = 1;
        const std::size_t end = std::min<std::size_t>(e.byte > 0 ? e.byte - 1 : 0, text.size());
        for (std::size_t i = 0; i < end; ++i) {
            if (text[i] == '\n') {
                ++line;
                column = 1;
            } else {
                ++column;
            }
        }
        throw ConfigError("", source + ":" + std::to_string(line) + ":" + std::to_string(column) +
                                  ": syntax error: " + e.what());
    }
}

inline json load_config_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("", "cannot open config file " + path);
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config_text(text.str(), path);
}

/// Strict reader over one JSON object.  Call finish() once every expected
/// key has been read to reject the rest.
class ConfigObject {
public:
    ConfigObject(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
    }

    const std::string& path() const noexcept { return path_; }

    std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    /// Accepts `key` without reading it.
    void skip(const std::string& key) { seen_.insert(key); }

    bool has(const std::string& key) {
        seen_.insert(key);
        return j_.contains(key) && !j_.at(key).is_null();
    }

    const json& at(const std::string& key) {
        seen_.insert(key);
        if (!j_.contains(key)) throw ConfigError(field(key), "missing required field");
        return j_.at(key);
    }

    double number(const std::string& key) {
        const json& v = at(key);
        if (!v.is_number()) throw ConfigError(field(key), "expected a number");
        return v.get<double>();
    }

    double number(const std::string& key, double fallback) {
        seen_.insert(key);
        return has(key) ? number(key) : fallback;
    }

    std::uint64_t unsigned_integer(const std::string& key) {
        const json& v = at(key);
        if (!v.is_number_unsigned()) throw ConfigError(field(key), "expected a non-negative integer");
        return v.get<std::uint64_t>();
    }

    std::uint64_t unsigned_integer(const std::string& key, std::uint64_t fallback) {
        seen_.insert(key);
        return has(key) ? unsigned_integer(key) : fallback;
    }

    bool boolean(const std::string& key, bool fallback) {
        seen_.insert(key);
        if (!has(key)) return fallback;
        const json& v = j_.at(key);
        if (!v.is_boolean()) throw ConfigError(field(key), "expected true or false");
        return v.get<bool>();
    }

    std::string string(const std::string& key) {
        const json& v = at(key);
        if (!v.is_string()) throw ConfigError(field(key), "expected a string");
        return v.get<std::string>();
    }

    std::string string(const std::string& key, const std::string& fallback) {
        seen_.insert(key);
        return has(key) ? string(key) : fallback;
    }

    ConfigObject object(const std::string& key) { return ConfigObject(at(key), field(key)); }

    void finish() const {
        for (const auto& [key, value] : j_.items())
            if (!seen_.count(key)) throw ConfigError(field(key), "unknown key");
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

namespace detail {

inline ShaftState shaft_from_json(ConfigObject o) {
    ShaftState s;
    s.angle = o.number("angle", 0.0);
    s.velocity = o.number("velocity", 0.0);
    o.finish();
    return s;
}

inline json shaft_to_json(const ShaftState& s) { return {{"angle", s.angle}, {"velocity", s.velocity}}; }

template <class F>
void rethrow_as_config(const std::string& field, F&& f) {
    try {
        f();
    } catch (const InvalidSpec& e) {
        throw ConfigError(field, e.what());
    }
}

}  // namespace detail

inline TransmissionSpec transmission_from_json(ConfigObject o) {
    const std::string type = o.string("type");
    TransmissionSpec spec;
    if (type == "rigid") {
        Rigid r;
        r.parasitic_damping = o.number("parasitic_damping", r.parasitic_damping);
        r.output_side_share = o.number("output_side_share", r.output_side_share);
        spec = r;
    } else if (type == "spring_damper") {
        SpringDamper s;
        s.stiffness = o.number("stiffness", s.stiffness);
        s.damping = o.number("damping", s.damping);
        s.spring_engaged = o.boolean("spring_engaged", s.spring_engaged);
        s.damper_engaged = o.boolean("damper_engaged", s.damper_engaged);
        spec = s;
    } else if (type == "electromechanical") {
        Electromechanical e;
        e.kp = o.number("kp", e.kp);
        e.kd = o.number("kd", e.kd);
        e.motor_torque_limit = o.number("motor_torque_limit", e.motor_torque_limit);
        spec = e;
    } else {
        throw ConfigError(o.field("type"), "unknown transmission type '" + type +
                                               "' (expected rigid, spring_damper or electromechanical)");
    }
    o.finish();
    detail::rethrow_as_config(o.path(), [&] { validate(spec); });
    return spec;
}

inline json to_json(const TransmissionSpec& spec) {
    if (const auto* r = std::get_if<Rigid>(&spec))
        return {{"type", "rigid"},
                {"parasitic_damping", r->parasitic_damping},
                {"output_side_share", r->output_side_share}};
    if (const auto* s = std::get_if<SpringDamper>(&spec))
        return {{"type", "spring_damper"},
                {"stiffness", s->stiffness},
                {"damping", s->damping},
                {"spring_engaged", s->spring_engaged},
                {"damper_engaged", s->damper_engaged}};
    const auto& e = std::get<Electromechanical>(spec);
    return {{"type", "electromechanical"}, {"kp", e.kp}, {"kd", e.kd}, {"motor_torque_limit", e.motor_torque_limit}};
}

namespace detail {

inline double stiffness_field(ConfigObject& o) {
    const bool si = o.has("stiffness");
    const bool mnm_units = o.has("stiffness_mnm_per_deg");
    if (si && mnm_units)
        throw ConfigError(o.field("stiffness"), "give either stiffness or stiffness_mnm_per_deg, not both");
    if (mnm_units) {
        o.skip("stiffness");
        return mnm_per_deg_to_nm_per_rad(o.number("stiffness_mnm_per_deg"));
    }
    o.skip("stiffness_mnm_per_deg");
    return o.number("stiffness");
}

}  // namespace detail

inline EnvironmentSpec environment_from_json(ConfigObject o) {
    const std::string type = o.string("type");
    EnvironmentSpec spec;
    if (type == "free_space") {
        spec = FreeSpace{};
    } else if (type == "torsion_spring") {
        TorsionSpring s;
        s.stiffness = detail::stiffness_field(o);
        s.rest_angle = o.number("rest_angle", 0.0);
        spec = s;
    } else if (type == "spring_damper") {
        SpringDamperEnv s;
        s.stiffness = detail::stiffness_field(o);
        s.damping = o.number("damping", 0.0);
        s.rest_angle = o.number("rest_angle", 0.0);
        spec = s;
    } else {
        throw ConfigError(o.field("type"), "unknown environment type '" + type +
                                               "' (expected free_space, torsion_spring or spring_damper)");
    }
    o.finish();
    detail::rethrow_as_config(o.path(), [&] { validate(spec); });
    return spec;
}

inline json to_json(const EnvironmentSpec& spec) {
    if (std::holds_alternative<FreeSpace>(spec)) return {{"type", "free_space"}};
    if (const auto* s = std::get_if<TorsionSpring>(&spec))
        return {{"type", "torsion_spring"}, {"stiffness", s->stiffness}, {"rest_angle", s->rest_angle}};
    if (const auto* s = std::get_if<SpringDamperEnv>(&spec))
        return {{"type", "spring_damper"},
                {"stiffness", s->stiffness},
                {"damping", s->damping},
                {"rest_angle", s->rest_angle}};
    throw ConfigError("environment", "custom environments cannot be serialised");
}

inline ReferenceProfile reference_from_json(ConfigObject o) {
    const std::string type = o.string("type");
    ReferenceProfile ref;
    if (type == "step") {
        ref = ReferenceStep{o.number("amplitude"), o.number("onset", 0.0)};
    } else if (type == "sine") {
        ReferenceSine s;
        s.amplitude = o.number("amplitude");
        s.frequency = o.number("frequency");
        s.phase = o.number("phase", 0.0);
        ref = s;
    } else {
        throw ConfigError(o.field("type"), "unknown reference type '" + type + "' (expected step or sine)");
    }
    o.finish();
    return ref;
}

inline json to_json(const ReferenceProfile& ref) {
    if (const auto* s = std::get_if<ReferenceStep>(&ref))
        return {{"type", "step"}, {"amplitude", s->amplitude}, {"onset", s->onset}};
    const auto& s = std::get<ReferenceSine>(ref);
    return {{"type", "sine"}, {"amplitude", s.amplitude}, {"frequency", s.frequency}, {"phase", s.phase}};
}

/// `run_duration` is the default length of a chirp sweep.
inline OperatorSpec operator_from_json(ConfigObject o, double run_duration) {
    const std::string type = o.string("type");
    OperatorSpec spec;
    if (type == "step") {
        TorqueStep st;
        st.amplitude = o.number("amplitude", st.amplitude);
        st.onset = o.number("onset", st.onset);
        spec = st;
    } else if (type == "sine") {
        TorqueSine s;
        s.amplitude = o.number("amplitude", s.amplitude);
        s.frequency = o.number("frequency", s.frequency);
        s.phase = o.number("phase", 0.0);
        spec = s;
    } else if (type == "chirp") {
        TorqueChirp c;
        c.amplitude = o.number("amplitude", c.amplitude);
        c.f0 = o.number("f0", c.f0);
        c.f1 = o.number("f1", c.f1);
        c.duration = o.number("duration", run_duration);
        spec = c;
    } else if (type == "impedance_tracker") {
        ImpedanceTracker t;
        t.target = reference_from_json(o.object("target"));
        t.hand_stiffness = o.number("hand_stiffness");
        t.hand_damping = o.number("hand_damping", 0.0);
        spec = t;
    } else {
        throw ConfigError(o.field("type"), "unknown operator type '" + type +
                                               "' (expected step, sine, chirp or impedance_tracker)");
    }
    o.finish();
    detail::rethrow_as_config(o.path(), [&] { validate(spec); });
    return spec;
}

inline json to_json(const OperatorSpec& spec) {
    if (const auto* s = std::get_if<TorqueStep>(&spec))
        return {{"type", "step"}, {"amplitude", s->amplitude}, {"onset", s->onset}};
    if (const auto* s = std::get_if<TorqueSine>(&spec))
        return {{"type", "sine"}, {"amplitude", s->amplitude}, {"frequency", s->frequency}, {"phase", s->phase}};
    if (const auto* c = std::get_if<TorqueChirp>(&spec))
        return {{"type", "chirp"}, {"amplitude", c->amplitude}, {"f0", c->f0}, {"f1", c->f1}, {"duration", c->duration}};
    const auto& t = std::get<ImpedanceTracker>(spec);
    return {{"type", "impedance_tracker"},
            {"target", to_json(t.target)},
            {"hand_stiffness", t.hand_stiffness},
            {"hand_damping", t.hand_damping}};
}

inline SensorSpec sensors_from_json(ConfigObject o) {
    SensorSpec s;
    s.torque_saturation = o.number("torque_saturation", s.torque_saturation);
    s.torque_noise_std = o.number("torque_noise_std", s.torque_noise_std);
    const auto cpr = o.unsigned_integer("encoder_counts_per_rev", s.encoder_counts_per_rev);
    if (cpr < 1 || cpr > 0xffffffffu)
        throw ConfigError(o.field("encoder_counts_per_rev"), "must lie in [1, 2^32)");
    s.encoder_counts_per_rev = static_cast<std::uint32_t>(cpr);
    s.angle_from_quantized = o.boolean("angle_from_quantized", s.angle_from_quantized);
    o.finish();
    return s;
}

inline json to_json(const SensorSpec& s) {
    return {{"torque_saturation", s.torque_saturation},
            {"torque_noise_std", s.torque_noise_std},
            {"encoder_counts_per_rev", s.encoder_counts_per_rev},
            {"angle_from_quantized", s.angle_from_quantized}};
}

/**
 * Reads a simulation config.  `duration`, `transmission` and `operator` are
 * required; so is `environment` unless `environment_required` is false (it
 * then defaults to free space).
 */
inline SimConfig sim_config_from_json(const json& j, const std::string& path = "",
                                      bool environment_required = true) {
    ConfigObject o(j, path);
    SimConfig c;
    c.duration = o.number("duration");
    c.dt = o.number("dt", c.dt);
    c.master_inertia = o.number("master_inertia", c.master_inertia);
    c.slave_inertia = o.number("slave_inertia", c.slave_inertia);
    c.rng_seed = o.unsigned_integer("rng_seed", c.rng_seed);
    c.transmission = transmission_from_json(o.object("transmission"));
    if (environment_required || o.has("environment"))
        c.environment = environment_from_json(o.object("environment"));
    c.operator_model = operator_from_json(o.object("operator"), c.duration);
    if (o.has("sensors")) c.sensors = sensors_from_json(o.object("sensors"));
    if (o.has("initial_master")) c.initial_master = detail::shaft_from_json(o.object("initial_master"));
    if (o.has("initial_slave")) c.initial_slave = detail::shaft_from_json(o.object("initial_slave"));
    c.environment_delay = o.boolean("environment_delay", false);
    o.finish();
    detail::rethrow_as_config(path.empty() ? "<root>" : path, [&] { validate(c); });
    if (std::holds_alternative<Rigid>(c.transmission) && !(c.initial_master == c.initial_slave))
        throw ConfigError(o.field("initial_slave"),
                          "rigid transmission requires identical initial master and slave states");
    return c;
}

inline json to_json(const SimConfig& c) {
    return {{"dt", c.dt},
            {"duration", c.duration},
            {"master_inertia", c.master_inertia},
            {"slave_inertia", c.slave_inertia},
            {"rng_seed", c.rng_seed},
            {"transmission", to_json(c.transmission)},
            {"environment", to_json(c.environment)},
            {"operator", to_json(c.operator_model)},
            {"sensors", to_json(c.sensors)},
            {"initial_master", detail::shaft_to_json(c.initial_master)},
            {"initial_slave", detail::shaft_to_json(c.initial_slave)},
            {"environment_delay", c.environment_delay}};
}

inline PsychometricFunction psychometric_from_json(ConfigObject o) {
    PsychometricFunction pf;
    pf.threshold_mu = o.number("threshold_mu", pf.threshold_mu);
    pf.slope_sigma = o.number("slope_sigma");
    pf.lapse_rate = o.number("lapse_rate", pf.lapse_rate);
    o.finish();
    detail::rethrow_as_config(o.path(), [&] { validate(pf); });
    return pf;
}

inline json to_json(const PsychometricFunction& pf) {
    return {{"threshold_mu", pf.threshold_mu}, {"slope_sigma", pf.slope_sigma}, {"lapse_rate", pf.lapse_rate}};
}

inline PoleMapping pole_mapping_from_string(const std::string& s, const std::string& field) {
    if (s == "integrator") return PoleMapping::integrator;
    if (s == "tustin") return PoleMapping::tustin;
    if (s == "matched") return PoleMapping::matched;
    throw ConfigError(field, "unknown pole mapping '" + s + "' (expected integrator, tustin or matched)");
}

inline std::string to_string(PoleMapping m) {
    switch (m) {
        case PoleMapping::integrator: return "integrator";
        case PoleMapping::tustin: return "tustin";
        case PoleMapping::matched: return "matched";
    }
    return "?";
}

inline FitMetric fit_metric_from_string(const std::string& s, const std::string& field) {
    if (s == "one_step_ahead") return FitMetric::one_step_ahead;
    if (s == "free_run") return FitMetric::free_run;
    throw ConfigError(field, "unknown fit metric '" + s + "' (expected one_step_ahead or free_run)");
}

inline std::string to_string(FitMetric m) {
    return m == FitMetric::one_step_ahead ? "one_step_ahead" : "free_run";
}

}  // namespace teleop

#endif  // TELEOP_CONFIG_HPP
