#include "cli.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "teleop/teleop.hpp"

namespace teleop::cli {
namespace {

namespace fs = std::filesystem;

struct Flags {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    bool quiet = false;
    std::string log;
    std::string system;
    std::vector<std::string> models;
};

class UsageError : public Error {
public:
    using Error::Error;
};

struct LoadedConfig {
    json config = json::object();
    fs::path base_dir;
};

LoadedConfig load_config(const Flags& f, const std::string& command) {
    LoadedConfig lc;
    lc.base_dir = fs::current_path();
    if (f.config.empty()) return lc;
    json j = load_config_file(f.config);
    lc.base_dir = fs::absolute(fs::path(f.config)).parent_path();
    if (j.is_object() && j.contains("teleop_manifest")) {
        ConfigObject m(j, "manifest");
        if (m.unsigned_integer("teleop_manifest") != 1)
            throw ConfigError("manifest.teleop_manifest", "unsupported manifest version");
        const std::string cmd = m.string("command");
        if (cmd != command)
            throw ConfigError("manifest.command", "manifest was written by '" + cmd + "', not '" + command + "'");
        for (const char* k : {"tool_version", "config_path", "output_dir", "seed"}) m.skip(k);
        lc.config = m.at("config");
        m.finish();
        lc.base_dir = fs::current_path();
    } else {
        lc.config = std::move(j);
    }
    if (!lc.config.is_object()) throw ConfigError("<root>", "expected an object");
    return lc;
}

std::string absolute_path(const std::string& p, const fs::path& base) {
    fs::path path(p);
    if (path.is_relative()) path = base / path;
    return fs::weakly_canonical(path).string();
}

fs::path prepare_out_dir(const std::string& out) {
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec || !fs::is_directory(out)) throw UsageError("cannot create output directory " + out);
    return fs::absolute(fs::path(out));
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream o(path, std::ios::binary);
    if (!o) throw UsageError("cannot write " + path.string());
    o << text;
    if (!o) throw UsageError("failed writing " + path.string());
}

void write_manifest(const fs::path& out_dir, const std::string& command, const Flags& f, const json& resolved,
                    std::optional<std::uint64_t> seed) {
    json m;
    m["teleop_manifest"] = 1;
    m["command"] = command;
    m["tool_version"] = tool_version;
    m["config_path"] = f.config.empty() ? json(nullptr) : json(fs::absolute(f.config).string());
    m["output_dir"] = out_dir.string();
    m["seed"] = seed ? json(*seed) : json(nullptr);
    m["config"] = resolved;
    write_text(out_dir / "manifest.json", m.dump(2) + "\n");
}

std::string fmt(double v) { return format_double(v); }

FitOptions fit_options_from(ConfigObject& o) {
    FitOptions opts;
    opts.mapping = pole_mapping_from_string(o.string("pole_mapping", "integrator"), o.field("pole_mapping"));
    opts.metric = fit_metric_from_string(o.string("fit_metric", "one_step_ahead"), o.field("fit_metric"));
    return opts;
}

void fit_options_to(json& j, const FitOptions& opts) {
    j["pole_mapping"] = to_string(opts.mapping);
    j["fit_metric"] = to_string(opts.metric);
}

// ---------------------------------------------------------------- simulate

int cmd_simulate(const Flags& f, std::ostream& out) {
    const LoadedConfig lc = load_config(f, "simulate");
    SimConfig cfg = sim_config_from_json(lc.config);
    if (f.seed) cfg.rng_seed = *f.seed;
    const fs::path dir = prepare_out_dir(f.out);
    write_manifest(dir, "simulate", f, to_json(cfg), cfg.rng_seed);
    const TimeSeriesLog log = run_simulation(cfg);
    save_log_csv((dir / "log.csv").string(), log);
    if (!f.quiet) out << "simulate: " << log.size() << " samples written to " << (dir / "log.csv").string() << "\n";
    return exit_ok;
}

// ---------------------------------------------------------------- identify

std::string model_file_text(const std::string& label, const SecondOrderFit& fit, const FitOptions& opts) {
    std::ostringstream os;
    os << "system = " << label << "\n"
       << "gain = " << fmt(fit.model.gain) << "\n"
       << "natural_frequency = " << fmt(fit.model.natural_frequency) << "\n"
       << "damping_ratio = " << fmt(fit.model.damping_ratio) << "\n"
       << "percent_fit = " << fmt(fit.report.percent_fit) << "\n"
       << "fpe = " << fmt(fit.report.fpe) << "\n"
       << "mse = " << fmt(fit.report.mse) << "\n"
       << "n_samples = " << fit.report.n_samples << "\n"
       << "n_params = " << fit.report.n_params << "\n"
       << "pole_mapping = " << to_string(opts.mapping) << "\n"
       << "fit_metric = " << to_string(opts.metric) << "\n"
       << "a1 = " << fmt(fit.arx.a1) << "\n"
       << "a2 = " << fmt(fit.arx.a2) << "\n"
       << "b1 = " << fmt(fit.arx.b1) << "\n"
       << "b2 = " << fmt(fit.arx.b2) << "\n";
    return os.str();
}

struct LabelledModel {
    std::string label;
    SecondOrderModel model;
};

LabelledModel read_model_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError("cannot open model file " + path);
    static const std::vector<std::string> known = {"system", "gain", "natural_frequency", "damping_ratio",
                                                   "percent_fit", "fpe", "mse", "n_samples", "n_params",
                                                   "pole_mapping", "fit_metric", "a1", "a2", "b1", "b2"};
    std::map<std::string, std::string> kv;
    std::string line;
    std::size_t line_no = 0;
    const auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        const auto e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        const std::string where = path + ":" + std::to_string(line_no) + ": ";
        if (eq == std::string::npos) throw InvalidData(where + "expected 'key = value'");
        const std::string key = trim(t.substr(0, eq));
        if (std::find(known.begin(), known.end(), key) == known.end())
            throw InvalidData(where + "unknown key '" + key + "'");
        kv[key] = trim(t.substr(eq + 1));
    }
    LabelledModel lm;
    lm.label = kv.count("system") ? kv["system"] : fs::path(path).stem().string();
    const auto number = [&](const std::string& key) {
        if (!kv.count(key)) throw InvalidData(path + ": missing '" + key + "'");
        const auto v = parse_double(kv[key]);
        if (!v) throw InvalidData(path + ": '" + key + "' is not a number");
        return *v;
    };
    lm.model.gain = number("gain");
    lm.model.natural_frequency = number("natural_frequency");
    lm.model.damping_ratio = number("damping_ratio");
    try {
        validate(lm.model);
    } catch (const InvalidSpec& e) {
        throw InvalidData(path + ": " + e.what());
    }
    return lm;
}

std::string summary_csv_header() {
    return "system,status,gain,natural_frequency,damping_ratio,percent_fit,fpe,mse,fpe_over_mse,n_samples,error\n";
}

std::string summary_csv_row(const SystemFit& sf) {
    std::ostringstream os;
    os << to_string(sf.kind) << ',';
    if (sf.ok()) {
        const auto& fit = *sf.fit;
        os << "ok," << fmt(fit.model.gain) << ',' << fmt(fit.model.natural_frequency) << ','
           << fmt(fit.model.damping_ratio) << ',' << fmt(fit.report.percent_fit) << ',' << fmt(fit.report.fpe) << ','
           << fmt(fit.report.mse) << ',' << fmt(fit.report.fpe / fit.report.mse) << ',' << fit.report.n_samples
           << ",\n";
    } else {
        std::string msg = sf.error;
        std::replace(msg.begin(), msg.end(), ',', ';');
        std::replace(msg.begin(), msg.end(), '\n', ' ');
        os << sf.error_kind << ",nan,nan,nan,nan,nan,nan,nan,0," << msg << "\n";
    }
    return os.str();
}

int cmd_identify(const Flags& f, std::ostream& out, std::ostream& err) {
    const LoadedConfig lc = load_config(f, "identify");
    ConfigObject o(lc.config, "");
    std::string log_path = f.log.empty() ? o.string("log", "") : f.log;
    if (!f.log.empty()) o.skip("log");
    if (log_path.empty()) throw ConfigError("log", "missing required field (or pass --log)");
    log_path = absolute_path(log_path, f.log.empty() ? lc.base_dir : fs::current_path());
    const std::string systems = f.system.empty() ? o.string("systems", "both") : f.system;
    if (!f.system.empty()) o.skip("systems");
    if (systems != "both" && systems != "participant" && systems != "environment")
        throw ConfigError("systems", "expected both, participant or environment");
    const FitOptions opts = fit_options_from(o);
    o.finish();

    json resolved{{"log", log_path}, {"systems", systems}};
    fit_options_to(resolved, opts);
    const fs::path dir = prepare_out_dir(f.out);
    write_manifest(dir, "identify", f, resolved, std::nullopt);

    const TimeSeriesLog log = load_log_csv(log_path);
    std::vector<SystemFit> fits;
    if (systems != "environment") fits.push_back(identify(log, SystemKind::participant, opts));
    if (systems != "participant") fits.push_back(identify(log, SystemKind::environment, opts));

    std::string summary = summary_csv_header();
    bool any_ok = false;
    for (const auto& sf : fits) {
        summary += summary_csv_row(sf);
        const std::string name = sf.kind == SystemKind::participant ? "participant.model" : "environment.model";
        if (sf.ok()) {
            any_ok = true;
            write_text(dir / name, model_file_text(to_string(sf.kind), *sf.fit, opts));
            if (!f.quiet) {
                const auto& fit = *sf.fit;
                out << to_string(sf.kind) << ": gain " << fmt(fit.model.gain) << " rad/(N m), wn "
                    << fmt(fit.model.natural_frequency) << " rad/s, zeta " << fmt(fit.model.damping_ratio)
                    << ", fit " << fmt(fit.report.percent_fit) << " %, fpe/mse "
                    << fmt(fit.report.fpe / fit.report.mse) << "\n";
            }
        } else {
            err << to_string(sf.kind) << ": " << sf.error_kind << ": " << sf.error << "\n";
        }
    }
    write_text(dir / "summary.csv", summary);
    return any_ok ? exit_ok : exit_numeric;
}

// ---------------------------------------------------------------- figures

struct Trace {
    std::string label;
    SecondOrderModel model;
    std::string color;
    bool dashed = false;
};

std::string csv_label(std::string s) {
    for (char& c : s)
        if (c == ',' || c == '"' || c == '\n' || c == '\r') c = '_';
    return s;
}

int cmd_figures(const Flags& f, std::ostream& out, std::ostream& err) {
    const LoadedConfig lc = load_config(f, "figures");
    ConfigObject o(lc.config, "");

    std::string log_path;
    if (!f.log.empty()) {
        o.skip("log");
        log_path = absolute_path(f.log, fs::current_path());
    } else if (o.has("log")) {
        log_path = absolute_path(o.string("log"), lc.base_dir);
    }
    std::vector<std::string> model_paths;
    if (!f.models.empty()) {
        o.skip("models");
        for (const auto& m : f.models) model_paths.push_back(absolute_path(m, fs::current_path()));
    } else if (o.has("models")) {
        const json& arr = o.at("models");
        if (!arr.is_array()) throw ConfigError("models", "expected an array of paths");
        for (std::size_t i = 0; i < arr.size(); ++i) {
            if (!arr[i].is_string()) throw ConfigError("models[" + std::to_string(i) + "]", "expected a string");
            model_paths.push_back(absolute_path(arr[i].get<std::string>(), lc.base_dir));
        }
    }
    if (log_path.empty() && model_paths.empty())
        throw ConfigError("log", "give a log CSV or at least one model file (log / models or --log / --model)");
    const FitOptions opts = fit_options_from(o);
    std::optional<double> duration, dt, w_lo, w_hi;
    if (o.has("duration")) duration = o.number("duration");
    if (o.has("dt")) dt = o.number("dt");
    if (o.has("frequency_min")) w_lo = o.number("frequency_min");
    if (o.has("frequency_max")) w_hi = o.number("frequency_max");
    const std::uint64_t points = o.unsigned_integer("points", 400);
    o.finish();
    if (points < 2) throw ConfigError("points", "must be >= 2");

    std::vector<Trace> traces;
    if (!log_path.empty()) {
        const TimeSeriesLog log = load_log_csv(log_path);
        for (const auto& sf : identify_systems(log, opts)) {
            if (!sf.ok()) {
                err << to_string(sf.kind) << ": " << sf.error_kind << ": " << sf.error << "\n";
                continue;
            }
            traces.push_back({to_string(sf.kind), sf.fit->model, "", false});
        }
        if (traces.empty() && model_paths.empty()) throw UnstableFit("figures: no system could be identified");
    }
    for (const auto& p : model_paths) {
        const LabelledModel lm = read_model_file(p);
        traces.push_back({lm.label, lm.model, "", false});
    }
    static const char* palette[] = {"#2e8b57", "#8e44ad", "#d68910", "#17a589", "#566573"};
    std::size_t extra = 0;
    std::map<std::string, int> seen;
    for (auto& t : traces) {
        if (t.label == "Participant") {
            t.color = svg::participant_color;
        } else if (t.label == "Environment") {
            t.color = svg::environment_color;
            t.dashed = true;
        } else {
            t.color = palette[extra++ % std::size(palette)];
        }
        const int n = ++seen[t.label];
        if (n > 1) t.label += "_" + std::to_string(n);
        t.label = csv_label(t.label);
    }

    if (!duration) {
        double d = 0.0;
        for (const auto& t : traces) {
            const double wn = t.model.natural_frequency;
            const double zeta = t.model.damping_ratio;
            const double periods = 40.0 * std::numbers::pi / wn;
            d = std::max(d, zeta > 0.0 ? std::min(8.0 / (zeta * wn), periods) : periods);
        }
        duration = d;
    }
    if (!dt) dt = *duration / 2000.0;
    if (!w_lo || !w_hi) {
        double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
        for (const auto& t : traces) {
            lo = std::min(lo, t.model.natural_frequency / 100.0);
            hi = std::max(hi, t.model.natural_frequency * 100.0);
        }
        if (!w_lo) w_lo = lo;
        if (!w_hi) w_hi = hi;
    }
    if (!(*dt > 0.0) || !(*duration >= *dt)) throw ConfigError("duration", "need duration >= dt > 0");
    if (!(*w_lo > 0.0) || !(*w_hi > *w_lo)) throw ConfigError("frequency_min", "need 0 < frequency_min < frequency_max");

    json resolved;
    resolved["log"] = log_path.empty() ? json(nullptr) : json(log_path);
    resolved["models"] = model_paths;
    resolved["duration"] = *duration;
    resolved["dt"] = *dt;
    resolved["frequency_min"] = *w_lo;
    resolved["frequency_max"] = *w_hi;
    resolved["points"] = points;
    fit_options_to(resolved, opts);
    const fs::path dir = prepare_out_dir(f.out);
    write_manifest(dir, "figures", f, resolved, std::nullopt);

    const std::vector<double> freqs = logspace(*w_lo, *w_hi, points);
    std::vector<std::vector<double>> steps;
    std::vector<BodeResponse> bodes;
    for (const auto& t : traces) {
        steps.push_back(step_response(t.model, *duration, *dt));
        bodes.push_back(bode(t.model, freqs));
    }
    const std::size_t n_steps = steps.front().size();
    std::vector<double> time(n_steps);
    for (std::size_t i = 0; i < n_steps; ++i) time[i] = static_cast<double>(i) * *dt;

    std::ostringstream step_csv;
    step_csv << "time";
    for (const auto& t : traces) step_csv << ',' << t.label;
    step_csv << '\n';
    for (std::size_t i = 0; i < n_steps; ++i) {
        step_csv << fmt(time[i]);
        for (const auto& s : steps) step_csv << ',' << fmt(s[i]);
        step_csv << '\n';
    }
    write_text(dir / "step.csv", step_csv.str());

    std::ostringstream bode_csv;
    bode_csv << "frequency_rad_s";
    for (const auto& t : traces) bode_csv << ',' << t.label << "_magnitude_db," << t.label << "_phase_deg";
    bode_csv << '\n';
    for (std::size_t i = 0; i < freqs.size(); ++i) {
        bode_csv << fmt(freqs[i]);
        for (const auto& b : bodes) bode_csv << ',' << fmt(b.magnitude_db[i]) << ',' << fmt(b.phase_deg[i]);
        bode_csv << '\n';
    }
    write_text(dir / "bode.csv", bode_csv.str());

    svg::Figure step_fig{"Step response", 720.0, 320.0, {}};
    svg::Panel sp{"Unit torque step", "time (s)", "angle (rad)", false, {}};
    for (std::size_t k = 0; k < traces.size(); ++k)
        sp.series.push_back({traces[k].label, time, steps[k], traces[k].color, traces[k].dashed});
    step_fig.panels.push_back(std::move(sp));
    svg::save(step_fig, (dir / "step.svg").string());

    svg::Figure bode_fig{"Bode plot", 720.0, 260.0, {}};
    svg::Panel mag{"Magnitude", "frequency (rad/s)", "magnitude (dB)", true, {}};
    svg::Panel ph{"Phase", "frequency (rad/s)", "phase (deg)", true, {}};
    for (std::size_t k = 0; k < traces.size(); ++k) {
        mag.series.push_back({traces[k].label, freqs, bodes[k].magnitude_db, traces[k].color, traces[k].dashed});
        ph.series.push_back({traces[k].label, freqs, bodes[k].phase_deg, traces[k].color, traces[k].dashed});
    }
    bode_fig.panels.push_back(std::move(mag));
    bode_fig.panels.push_back(std::move(ph));
    svg::save(bode_fig, (dir / "bode.svg").string());

    if (!f.quiet) out << "figures: " << traces.size() << " trace(s) written to " << dir.string() << "\n";
    return exit_ok;
}

// ---------------------------------------------------------------- psych

struct PsychConfig {
    std::string paradigm;
    std::uint64_t seed = 0;
    double reference = 0.0;
    std::string observer_type;
    PsychometricFunction pf;
    std::optional<TransmissionSpec> transmission;
    SimConfig simulation;
    FitOptions fit_options;
    StaircaseState staircase;
    std::vector<double> comparisons;
    std::uint64_t trials_per_level = 20;
    double fit_lapse_rate = 0.02;
};

json optional_bound(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

PsychConfig psych_from_json(const json& j) {
    ConfigObject o(j, "");
    PsychConfig c;
    c.paradigm = o.string("paradigm");
    if (c.paradigm != "staircase" && c.paradigm != "constant_stimuli")
        throw ConfigError("paradigm", "expected staircase or constant_stimuli");
    c.seed = o.unsigned_integer("seed", 0);
    c.reference = o.number("reference", 0.0);
    if (!std::isfinite(c.reference)) throw ConfigError("reference", "must be finite");
    if (o.has("transmission")) c.transmission = transmission_from_json(o.object("transmission"));

    ConfigObject ob = o.object("observer");
    c.observer_type = ob.string("type");
    if (c.observer_type == "psychometric" || c.observer_type == "simulation") {
        c.pf.threshold_mu = ob.number("threshold_mu", c.pf.threshold_mu);
        c.pf.slope_sigma = ob.number("slope_sigma");
        c.pf.lapse_rate = ob.number("lapse_rate", c.pf.lapse_rate);
        detail::rethrow_as_config("observer", [&] { validate(c.pf); });
    } else if (c.observer_type != "always_correct") {
        throw ConfigError("observer.type", "expected psychometric, always_correct or simulation");
    }
    if (c.observer_type == "simulation") {
        if (!c.transmission) throw ConfigError("transmission", "missing required field (simulation observer)");
        json sim = ob.at("simulation");
        if (!sim.is_object()) throw ConfigError("observer.simulation", "expected an object");
        if (sim.contains("transmission"))
            throw ConfigError("observer.simulation.transmission", "set the transmission at the top level");
        if (sim.contains("environment"))
            throw ConfigError("observer.simulation.environment", "the environment is the stimulus; remove it");
        sim["transmission"] = to_json(*c.transmission);
        c.simulation = sim_config_from_json(sim, "observer.simulation", false);
        c.fit_options = fit_options_from(ob);
    }
    ob.finish();

    c.fit_lapse_rate = o.number("fit_lapse_rate", c.pf.lapse_rate);
    if (!(c.fit_lapse_rate >= 0.0 && c.fit_lapse_rate < 0.5))
        throw ConfigError("fit_lapse_rate", "must lie in [0, 0.5)");

    if (c.paradigm == "staircase") {
        if (o.has("constant_stimuli")) throw ConfigError("constant_stimuli", "not used by the staircase paradigm");
        StaircaseState& s = c.staircase;
        if (o.has("staircase")) {
            ConfigObject so = o.object("staircase");
            s.current_level = so.number("start_level", s.current_level);
            s.step_size = so.number("step_size", s.step_size);
            const auto up = so.unsigned_integer("up", s.rule.up);
            const auto down = so.unsigned_integer("down", s.rule.down);
            if (up < 1 || down < 1 || up > 1000 || down > 1000)
                throw ConfigError("staircase.up", "up/down must lie in [1, 1000]");
            s.rule = {static_cast<unsigned>(up), static_cast<unsigned>(down)};
            s.reversal_target = so.unsigned_integer("reversals", s.reversal_target);
            s.max_trials = so.unsigned_integer("max_trials", s.max_trials);
            if (so.has("floor")) s.floor = so.number("floor");
            if (so.has("ceiling")) s.ceiling = so.number("ceiling");
            so.finish();
        }
        if (s.max_trials < 1) throw ConfigError("staircase.max_trials", "must be >= 1");
        detail::rethrow_as_config("staircase", [&] { validate(s); });
    } else {
        if (o.has("staircase")) throw ConfigError("staircase", "not used by the constant_stimuli paradigm");
        ConfigObject co = o.object("constant_stimuli");
        const json& levels = co.at("comparisons");
        if (!levels.is_array()) throw ConfigError("constant_stimuli.comparisons", "expected an array of numbers");
        for (std::size_t i = 0; i < levels.size(); ++i) {
            if (!levels[i].is_number())
                throw ConfigError("constant_stimuli.comparisons[" + std::to_string(i) + "]", "expected a number");
            c.comparisons.push_back(levels[i].get<double>());
        }
        c.trials_per_level = co.unsigned_integer("trials_per_level", c.trials_per_level);
        co.finish();
    }
    o.finish();
    return c;
}

json to_json(const PsychConfig& c) {
    json j;
    j["paradigm"] = c.paradigm;
    j["seed"] = c.seed;
    j["reference"] = c.reference;
    if (c.transmission) j["transmission"] = teleop::to_json(*c.transmission);
    json ob{{"type", c.observer_type}};
    if (c.observer_type != "always_correct") {
        ob["threshold_mu"] = c.pf.threshold_mu;
        ob["slope_sigma"] = c.pf.slope_sigma;
        ob["lapse_rate"] = c.pf.lapse_rate;
    }
    if (c.observer_type == "simulation") {
        json sim = teleop::to_json(c.simulation);
        sim.erase("transmission");
        sim.erase("environment");
        ob["simulation"] = sim;
        fit_options_to(ob, c.fit_options);
    }
    j["observer"] = ob;
    j["fit_lapse_rate"] = c.fit_lapse_rate;
    if (c.paradigm == "staircase") {
        const auto& s = c.staircase;
        j["staircase"] = {{"start_level", s.current_level},  {"step_size", s.step_size},
                          {"up", s.rule.up},                 {"down", s.rule.down},
                          {"reversals", s.reversal_target},  {"max_trials", s.max_trials},
                          {"floor", optional_bound(s.floor)}, {"ceiling", optional_bound(s.ceiling)}};
    } else {
        j["constant_stimuli"] = {{"comparisons", c.comparisons}, {"trials_per_level", c.trials_per_level}};
    }
    return j;
}

std::string trials_csv(const std::vector<TrialRecord>& trials) {
    std::ostringstream os;
    os << "index,reference,comparison,response_greater,correct,draw_index,effective_reference,effective_comparison\n";
    for (const auto& r : trials)
        os << r.index << ',' << fmt(r.reference) << ',' << fmt(r.comparison) << ',' << (r.response_greater ? 1 : 0)
           << ',' << (r.correct ? 1 : 0) << ',' << r.draw_index << ',' << fmt(r.effective_reference) << ','
           << fmt(r.effective_comparison) << '\n';
    return os.str();
}

template <class Obs>
std::string run_psych_session(const PsychConfig& c, Obs observer, std::vector<TrialRecord>& trials) {
    std::ostringstream os;
    if (c.paradigm == "staircase") {
        const StaircaseRun run = run_staircase(c.staircase, c.reference, observer, c.seed);
        trials = run.trials;
        const auto& s = run.state;
        os << "trials = " << s.trial_count << "\n";
        os << "reversals = " << s.reversal_levels.size() << "\n";
        os << "reversal_levels = ";
        for (std::size_t i = 0; i < s.reversal_levels.size(); ++i) os << (i ? ";" : "") << fmt(s.reversal_levels[i]);
        os << "\n";
        os << "terminated_by = " << (s.reversal_levels.size() >= s.reversal_target ? "reversals" : "max_trials")
           << "\n";
        os << "final_level = " << fmt(s.current_level) << "\n";
        os << "at_floor = " << (s.current_level == s.floor ? "true" : "false") << "\n";
        try {
            const double th = staircase_threshold(s);
            os << "threshold_status = ok\n";
            os << "threshold = " << fmt(th) << "\n";
        } catch (const InsufficientReversals& e) {
            os << "threshold_status = InsufficientReversals\n";
            os << "threshold = nan\n";
        }
    } else {
        trials = run_constant_stimuli(c.comparisons, c.trials_per_level, c.reference, observer, c.seed);
        os << "trials = " << trials.size() << "\n";
        std::map<double, std::pair<std::size_t, std::size_t>> counts;
        for (const auto& r : trials) {
            auto& cnt = counts[r.comparison];
            ++cnt.first;
            if (r.response_greater) ++cnt.second;
        }
        std::size_t i = 0;
        for (const auto& [level, cnt] : counts) {
            os << "level." << i << ".comparison = " << fmt(level) << "\n";
            os << "level." << i << ".trials = " << cnt.first << "\n";
            os << "level." << i << ".proportion_greater = "
               << fmt(static_cast<double>(cnt.second) / static_cast<double>(cnt.first)) << "\n";
            ++i;
        }
        std::optional<PsychometricFit> fit;
        std::string status = "ok";
        try {
            fit = fit_psychometric(trials, c.fit_lapse_rate);
        } catch (const DegenerateFit& e) {
            fit = e.clamped();
            status = "DegenerateFit";
        } catch (const InvalidData& e) {
            status = "InvalidData";
        }
        os << "fit_status = " << status << "\n";
        os << "fit_lapse_rate = " << fmt(c.fit_lapse_rate) << "\n";
        if (fit) {
            os << "pse = " << fmt(fit->pf.threshold_mu) << "\n";
            os << "sigma = " << fmt(fit->pf.slope_sigma) << "\n";
            os << "jnd = " << fmt(fit->jnd) << "\n";
            os << "log_likelihood = " << fmt(fit->log_likelihood) << "\n";
        }
    }
    return os.str();
}

int cmd_psych(const Flags& f, std::ostream& out) {
    const LoadedConfig lc = load_config(f, "psych");
    PsychConfig c = psych_from_json(lc.config);
    if (f.seed) c.seed = *f.seed;
    const fs::path dir = prepare_out_dir(f.out);
    write_manifest(dir, "psych", f, to_json(c), c.seed);

    std::vector<TrialRecord> trials;
    std::string body;
    if (c.observer_type == "psychometric")
        body = run_psych_session(c, PsychometricObserver{c.pf}, trials);
    else if (c.observer_type == "always_correct")
        body = run_psych_session(c, AlwaysCorrectObserver{}, trials);
    else
        body = run_psych_session(c, SimulatedStiffnessObserver{c.simulation, *c.transmission, c.pf, c.fit_options},
                                 trials);

    std::ostringstream summary;
    summary << "paradigm = " << c.paradigm << "\n"
            << "observer = " << c.observer_type << "\n"
            << "seed = " << c.seed << "\n"
            << "reference = " << fmt(c.reference) << "\n"
            << body;
    write_text(dir / "trials.csv", trials_csv(trials));
    write_text(dir / "summary.txt", summary.str());
    if (!f.quiet) out << summary.str();
    return exit_ok;
}

// ---------------------------------------------------------------- sweep

struct SweepRow {
    std::string sim_status = "ok";
    std::string sim_error;
    std::vector<SystemFit> fits;
};

int cmd_sweep(const Flags& f, std::ostream& out, std::ostream& err) {
    const LoadedConfig lc = load_config(f, "sweep");
    ConfigObject o(lc.config, "");
    SimConfig base = sim_config_from_json(o.at("base"), "base");
    if (f.seed) base.rng_seed = *f.seed;
    const std::string pointer = o.string("parameter");
    json::json_pointer ptr;
    try {
        ptr = json::json_pointer(pointer);
    } catch (const json::exception& e) {
        throw ConfigError("parameter", std::string("invalid JSON pointer: ") + e.what());
    }
    const json base_json = to_json(base);
    if (!base_json.contains(ptr)) throw ConfigError("parameter", "'" + pointer + "' does not name a base field");
    const json& values = o.at("values");
    if (!values.is_array() || values.empty()) throw ConfigError("values", "expected a non-empty array");
    const FitOptions opts = fit_options_from(o);
    const std::uint64_t threads_cfg = o.unsigned_integer("threads", 0);
    o.finish();

    std::vector<SimConfig> configs;
    for (std::size_t i = 0; i < values.size(); ++i) {
        json variant = base_json;
        variant[ptr] = values[i];
        configs.push_back(sim_config_from_json(variant, "values[" + std::to_string(i) + "]"));
    }

    json resolved{{"base", base_json}, {"parameter", pointer}, {"values", values}, {"threads", threads_cfg}};
    fit_options_to(resolved, opts);
    const fs::path dir = prepare_out_dir(f.out);
    write_manifest(dir, "sweep", f, resolved, base.rng_seed);

    std::vector<SweepRow> rows(configs.size());
    std::atomic<std::size_t> next{0};
    const auto worker = [&] {
        for (std::size_t i = next++; i < configs.size(); i = next++) {
            try {
                rows[i].fits = identify_systems(run_simulation(configs[i]), opts);
            } catch (const Diverged& e) {
                rows[i].sim_status = "Diverged";
                rows[i].sim_error = e.what();
            }
        }
    };
    std::size_t n_threads = threads_cfg ? threads_cfg : std::max(1u, std::thread::hardware_concurrency());
    n_threads = std::min(n_threads, configs.size());
    std::vector<std::thread> pool;
    for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    std::ostringstream csv;
    csv << "value,simulation_status";
    for (const char* p : {"participant", "environment"})
        csv << ',' << p << "_status," << p << "_gain," << p << "_natural_frequency," << p << "_damping_ratio," << p
            << "_percent_fit," << p << "_fpe," << p << "_mse";
    csv << '\n';
    bool any_ok = false;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const json& v = values[i];
        csv << (v.is_number() ? fmt(v.get<double>()) : csv_label(v.dump())) << ',' << rows[i].sim_status;
        if (rows[i].sim_status != "ok") err << "values[" << i << "]: " << rows[i].sim_error << "\n";
        for (std::size_t k = 0; k < 2; ++k) {
            if (rows[i].fits.size() == 2 && rows[i].fits[k].ok()) {
                any_ok = true;
                const auto& fit = *rows[i].fits[k].fit;
                csv << ",ok," << fmt(fit.model.gain) << ',' << fmt(fit.model.natural_frequency) << ','
                    << fmt(fit.model.damping_ratio) << ',' << fmt(fit.report.percent_fit) << ','
                    << fmt(fit.report.fpe) << ',' << fmt(fit.report.mse);
            } else {
                const std::string status = rows[i].fits.size() == 2 ? rows[i].fits[k].error_kind : "skipped";
                csv << ',' << status << ",nan,nan,nan,nan,nan,nan";
            }
        }
        csv << '\n';
    }
    write_text(dir / "sweep.csv", csv.str());
    if (!f.quiet) out << "sweep: " << rows.size() << " runs written to " << (dir / "sweep.csv").string() << "\n";
    return any_ok ? exit_ok : exit_numeric;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Simulate, identify and analyse teleoperated haptic interaction"};
    app.require_subcommand(1);
    Flags f;
    std::uint64_t seed = 0;

    const auto common = [&](CLI::App* sub) {
        sub->add_option("--config", f.config, "JSON config file or manifest.json of an earlier run");
        sub->add_option("--out", f.out, "Output directory")->required();
        sub->add_option("--seed", seed, "Override the config's random seed");
        sub->add_flag("--quiet", f.quiet, "Suppress progress output");
    };
    CLI::App* simulate = app.add_subcommand("simulate", "Run a closed-loop simulation and write log.csv");
    common(simulate);
    CLI::App* identify_cmd = app.add_subcommand("identify", "Fit Participant and Environment models to a log");
    common(identify_cmd);
    identify_cmd->add_option("--log", f.log, "Log CSV written by simulate");
    identify_cmd->add_option("--system", f.system, "both, participant or environment")
        ->check(CLI::IsMember({"both", "participant", "environment"}));
    CLI::App* figures = app.add_subcommand("figures", "Step response and Bode plots from a log or model files");
    common(figures);
    figures->add_option("--log", f.log, "Log CSV to identify and plot");
    figures->add_option("--model", f.models, "Model file written by identify (repeatable)");
    CLI::App* psych = app.add_subcommand("psych", "Run a psychophysics session");
    common(psych);
    CLI::App* sweep = app.add_subcommand("sweep", "Sweep one config parameter and identify every run");
    common(sweep);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? exit_ok : exit_usage;
    }
    for (CLI::App* sub : app.get_subcommands())
        if (sub->get_option("--seed")->count() > 0) f.seed = seed;

    try {
        if (simulate->parsed()) return cmd_simulate(f, out);
        if (identify_cmd->parsed()) return cmd_identify(f, out, err);
        if (figures->parsed()) return cmd_figures(f, out, err);
        if (psych->parsed()) return cmd_psych(f, out);
        if (sweep->parsed()) return cmd_sweep(f, out, err);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return exit_usage;
    } catch (const SchemaError& e) {
        err << "schema error: " << e.what() << "\n";
        return exit_usage;
    } catch (const InvalidSpec& e) {
        err << "invalid configuration: " << e.what() << "\n";
        return exit_usage;
    } catch (const InvalidData& e) {
        err << "invalid input: " << e.what() << "\n";
        return exit_usage;
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n";
        return exit_usage;
    } catch (const Diverged& e) {
        err << "simulation diverged: " << e.what() << "\n";
        return exit_numeric;
    } catch (const Error& e) {
        err << "numeric failure: " << e.what() << "\n";
        return exit_numeric;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return exit_usage;
    }
    return exit_usage;
}

}  // namespace teleop::cli
