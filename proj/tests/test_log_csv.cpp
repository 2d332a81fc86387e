#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <string>

#include "teleop/environments.hpp"
#include "teleop/format.hpp"
#include "teleop/log_csv.hpp"

using namespace teleop;

namespace {

TimeSeriesLog sample_log() {
    SimConfig c;
    c.duration = 0.5;
    c.transmission = SpringDamper{};
    c.environment = TorsionSpring{0.23};
    c.operator_model = TorqueChirp{0.1, 0.5, 20.0, 0.5};
    c.rng_seed = 4;
    return run_simulation(c);
}

std::string to_csv(const TimeSeriesLog& log) {
    std::ostringstream os;
    write_log_csv(os, log);
    return os.str();
}

TimeSeriesLog from_csv(const std::string& text) {
    std::istringstream is(text);
    return read_log_csv(is);
}

}  // namespace

TEST(Format, ShortestRoundTrip) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-1e3, 1e3);
    for (int i = 0; i < 2000; ++i) {
        const double v = u(rng) * std::pow(10.0, static_cast<int>(rng() % 40) - 20);
        EXPECT_EQ(*parse_double(format_double(v)), v);
    }
    EXPECT_EQ(format_double(0.1), "0.1");
    EXPECT_EQ(format_double(-2.0), "-2");
    EXPECT_FALSE(parse_double("1.5x"));
    EXPECT_FALSE(parse_double(""));
}

TEST(LogCsv, HeaderAndRowCount) {
    const auto log = sample_log();
    const auto text = to_csv(log);
    EXPECT_EQ(text.substr(0, text.find('\n')),
              "time,master_angle,master_velocity,slave_angle,slave_velocity,operator_torque,"
              "operator_torque_sensed,environment_torque,environment_torque_sensed,"
              "master_angle_quantized,slave_angle_quantized");
    EXPECT_EQ(static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')), log.size() + 1);
}

TEST(LogCsv, RoundTripIsExact) {
    const auto log = sample_log();
    const auto back = from_csv(to_csv(log));
    EXPECT_EQ(back.columns().size(), log.columns().size());
    for (std::size_t c = 0; c < log.columns().size(); ++c) EXPECT_EQ(*back.columns()[c], *log.columns()[c]) << c;
    EXPECT_NEAR(back.dt, log.dt, 1e-15);
    EXPECT_EQ(to_csv(back), to_csv(log));
}

TEST(LogCsv, AcceptsCrlf) {
    auto text = to_csv(sample_log());
    std::string crlf;
    for (char ch : text) {
        if (ch == '\n') crlf += '\r';
        crlf += ch;
    }
    EXPECT_EQ(from_csv(crlf).size(), sample_log().size());
}

TEST(LogCsv, TruncatedFileIsSchemaError) {
    const auto text = to_csv(sample_log());
    const auto cut = text.substr(0, text.size() / 2);
    EXPECT_THROW(from_csv(cut.substr(0, cut.rfind(',') )), SchemaError);
}

TEST(LogCsv, RejectsBadInput) {
    const auto text = to_csv(sample_log());
    const auto header = text.substr(0, text.find('\n') + 1);
    EXPECT_THROW(from_csv(""), SchemaError);
    EXPECT_THROW(from_csv("time,angle\n0,1\n"), SchemaError);
    EXPECT_THROW(from_csv(header), SchemaError);
    EXPECT_THROW(from_csv(header + "0,0,0,0,0,0,0,0,0,0,0\n"), SchemaError);
    EXPECT_THROW(from_csv(header + "0,0,0,0,0,0,0,0,0,0,0\n0.001,0,0,0,0,0,0,0,0,0,0,0\n"), SchemaError);
    EXPECT_THROW(from_csv(header + "0,0,0,0,0,0,0,0,0,0,0\n0.001,0,0,0,0,abc,0,0,0,0,0\n"), SchemaError);
    EXPECT_THROW(from_csv(header + "0,0,0,0,0,0,0,0,0,0,0\n0.001,0,0,0,0,0,0,0,0,0,0\n0.005,0,0,0,0,0,0,0,0,0,0\n"),
                 SchemaError);
    EXPECT_THROW(from_csv(header + "0.001,0,0,0,0,0,0,0,0,0,0\n0,0,0,0,0,0,0,0,0,0,0\n"), SchemaError);
}

TEST(LogCsv, MissingFileIsSchemaError) {
    EXPECT_THROW(load_log_csv("/nonexistent/log.csv"), SchemaError);
}
