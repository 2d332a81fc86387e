#ifndef TELEOP_LOG_CSV_HPP
#define TELEOP_LOG_CSV_HPP

// CSV interchange format of TimeSeriesLog.  One header line, then one row per
// tick, columns in the order of log_csv_header.  Values use the shortest
// round-trip representation, so write → read reproduces the log exactly.

#include <array>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>

#include "teleop/engine.hpp"
#include "teleop/error.hpp"
#include "teleop/format.hpp"

namespace teleop {

inline constexpr std::array<std::string_view, 11> log_csv_header = {
    "time",
    "master_angle",
    "master_velocity",
    "slave_angle",
    "slave_velocity",
    "operator_torque",
    "operator_torque_sensed",
    "environment_torque",
    "environment_torque_sensed",
    "master_angle_quantized",
    "slave_angle_quantized",
};

inline void write_log_csv(std::ostream& out, const TimeSeriesLog& log) {
    for (std::size_t c = 0; c < log_csv_header.size(); ++c)
        out << (c ? "," : "") << log_csv_header[c];
    out << '\n';
    const auto cols = log.columns();
    std::string line;
    for (std::size_t i = 0; i < log.size(); ++i) {
        line.clear();
        for (std::size_t c = 0; c < cols.size(); ++c) {
            if (c) line += ',';
            line += format_double((*cols[c])[i]);
        }
        line += '\n';
        out << line;
    }
}

/// Throws SchemaError (with the offending line number) on a header mismatch,
/// short or malformed row, fewer than two rows, or non-uniform time column.
inline TimeSeriesLog read_log_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw SchemaError("log csv: empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    {
        std::string expected;
        for (std::size_t c = 0; c < log_csv_header.size(); ++c)
            expected += (c ? "," : "") + std::string(log_csv_header[c]);
        if (line != expected) throw SchemaError("log csv: header does not match the engine schema");
    }
    TimeSeriesLog log;
    auto cols = log.columns();
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::size_t c = 0;
        std::size_t start = 0;
        while (true) {
            const auto comma = line.find(',', start);
            const auto field = std::string_view(line).substr(
                start, comma == std::string::npos ? std::string::npos : comma - start);
            if (c >= cols.size())
                throw SchemaError("log csv: too many fields on line " + std::to_string(line_no));
            const auto v = parse_double(field);
            if (!v)
                throw SchemaError("log csv: malformed number in column '" +
                                  std::string(log_csv_header[c]) + "' on line " +
                                  std::to_string(line_no));
            cols[c]->push_back(*v);
            ++c;
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        if (c != cols.size())
            throw SchemaError("log csv: expected " + std::to_string(cols.size()) + " fields on line " +
                              std::to_string(line_no) + ", got " + std::to_string(c));
    }
    if (log.size() < 2) throw SchemaError("log csv: need at least two rows");
    log.dt = log.time[1] - log.time[0];
    if (!(log.dt > 0.0)) throw SchemaError("log csv: time column must increase");
    for (std::size_t i = 1; i < log.size(); ++i) {
        const double expected = static_cast<double>(i) * log.dt + log.time[0];
        if (std::abs(log.time[i] - expected) > 1e-6 * log.dt)
            throw SchemaError("log csv: time column is not uniformly sampled (line " +
                              std::to_string(i + 2) + ")");
    }
    return log;
}

inline void save_log_csv(const std::string& path, const TimeSeriesLog& log) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path);
    write_log_csv(out, log);
}

inline TimeSeriesLog load_log_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SchemaError("cannot open log " + path);
    return read_log_csv(in);
}

}  // namespace teleop

#endif  // TELEOP_LOG_CSV_HPP
