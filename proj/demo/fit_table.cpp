// Goodness-of-fit table for the Participant and Environment systems of each
// transmission, driven by a torque step against a 4 mN·m/deg virtual spring.
//
//   fit_table [duration_s] [seed]

#include <cstdio>
#include <cstdlib>
#include <string>
#include <utility>
#include <vector>

#include "teleop/teleop.hpp"

using namespace teleop;

int main(int argc, char** argv) {
    const double duration = argc > 1 ? std::atof(argv[1]) : 10.0;
    const auto seed = argc > 2 ? std::strtoull(argv[2], nullptr, 10) : 1ull;

    const std::vector<std::pair<std::string, TransmissionSpec>> transmissions = {
        {"rigid", Rigid{}},
        {"spring_damper", SpringDamper{}},
        {"electromechanical", Electromechanical{}},
    };

    std::printf("%-18s %-12s %10s %12s %12s %9s %10s %8s\n", "transmission", "system", "fit (%)", "FPE", "MSE",
                "gain", "wn (rad/s)", "zeta");
    for (const auto& [name, transmission] : transmissions) {
        SimConfig cfg;
        cfg.duration = duration;
        cfg.transmission = transmission;
        cfg.environment = TorsionSpring{mnm_per_deg_to_nm_per_rad(4.0)};
        cfg.operator_model = TorqueStep{0.1, 0.1};
        cfg.rng_seed = seed;
        TimeSeriesLog log;
        try {
            log = run_simulation(cfg);
        } catch (const Error& e) {
            std::printf("%-18s simulation failed: %s\n", name.c_str(), e.what());
            continue;
        }
        for (const auto& sf : identify_systems(log)) {
            if (!sf.ok()) {
                std::printf("%-18s %-12s %s\n", name.c_str(), to_string(sf.kind).c_str(), sf.error_kind.c_str());
                continue;
            }
            const auto& f = *sf.fit;
            std::printf("%-18s %-12s %10.3f %12.4e %12.4e %9.4f %10.3f %8.4f\n", name.c_str(),
                        to_string(sf.kind).c_str(), f.report.percent_fit, f.report.fpe, f.report.mse, f.model.gain,
                        f.model.natural_frequency, f.model.damping_ratio);
        }
    }
}
