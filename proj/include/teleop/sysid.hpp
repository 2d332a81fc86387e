#ifndef TELEOP_SYSID_HPP
#define TELEOP_SYSID_HPP

/** @file
 * Second-order system identification and goodness-of-fit statistics.
 *
 * Models have the form
 *     G(s) = K·ωn² / (s² + 2ζωn·s + ωn²)
 * and are identified from a torque input and an angle output by fitting a
 * discrete ARX(2,2) model
 *     y[n] + a1·y[n−1] + a2·y[n−2] = b1·u[n−1] + b2·u[n−2]
 * with ordinary least squares, then mapping its poles to continuous time.
 */

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "teleop/engine.hpp"
#include "teleop/error.hpp"

namespace teleop {

struct SecondOrderModel {
    double gain = 1.0;               // DC gain, rad/(N·m)
    double natural_frequency = 1.0;  // rad/s
    double damping_ratio = 0.0;
};

inline void validate(const SecondOrderModel& m) {
    if (!std::isfinite(m.gain)) throw InvalidSpec("model: gain must be finite");
    if (!(m.natural_frequency > 0.0) || !std::isfinite(m.natural_frequency))
        throw InvalidSpec("model: natural_frequency must be > 0");
    if (!(m.damping_ratio >= 0.0) || !std::isfinite(m.damping_ratio))
        throw InvalidSpec("model: damping_ratio must be >= 0");
}

struct FitReport {
    double percent_fit = 0.0;
    double fpe = 0.0;
    double mse = 0.0;
    std::size_t n_samples = 0;
    std::size_t n_params = 0;
};

/// How discrete poles are carried over to continuous time.
enum class PoleMapping {
    /// Exact inverse of the engine's semi-implicit Euler discretisation.
    integrator,
    /// Bilinear (Tustin) transform, s = (2/dt)·(z − 1)/(z + 1).
    tustin,
    /// Pole matching, s = ln(z)/dt; exact for sampled continuous systems
    /// driven through a zero-order hold.
    matched,
};

/// Which predictions the FitReport is computed on.
enum class FitMetric { one_step_ahead, free_run };

struct FitOptions {
    PoleMapping mapping = PoleMapping::integrator;
    FitMetric metric = FitMetric::one_step_ahead;
};

struct ArxCoefficients {
    double a1 = 0.0;
    double a2 = 0.0;
    double b1 = 0.0;
    double b2 = 0.0;
};

struct SecondOrderFit {
    SecondOrderModel model;
    FitReport report;
    ArxCoefficients arx;
    std::array<std::complex<double>, 2> discrete_poles;
};

inline constexpr std::size_t arx_parameter_count = 4;
inline constexpr std::size_t min_fit_samples = 50;

/// 100·(1 − ‖measured − predicted‖ / ‖measured − mean(measured)‖).
inline double percent_fit(std::span<const double> measured, std::span<const double> predicted) {
    if (measured.empty() || measured.size() != predicted.size())
        throw InvalidData("percent_fit: series must be non-empty and of equal length");
    const double mean = std::accumulate(measured.begin(), measured.end(), 0.0) /
                        static_cast<double>(measured.size());
    double residual = 0.0;
    double spread = 0.0;
    for (std::size_t i = 0; i < measured.size(); ++i) {
        const double e = measured[i] - predicted[i];
        const double d = measured[i] - mean;
        residual += e * e;
        spread += d * d;
    }
    if (spread == 0.0) throw ConstantSignal("percent_fit: measured signal is constant");
    return 100.0 * (1.0 - std::sqrt(residual) / std::sqrt(spread));
}

/// Akaike's final prediction error, mse·(1 + d/N)/(1 − d/N).
inline double final_prediction_error(double mse, std::size_t n_params, std::size_t n_samples) {
    if (n_samples <= n_params)
        throw DegenerateSample("final_prediction_error: need n_samples > n_params");
    if (!(mse >= 0.0)) throw InvalidData("final_prediction_error: mse must be >= 0");
    const double ratio = static_cast<double>(n_params) / static_cast<double>(n_samples);
    return mse * (1.0 + ratio) / (1.0 - ratio);
}

namespace detail {

inline std::vector<double> demeaned(std::span<const double> x) {
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
    std::vector<double> out(x.begin(), x.end());
    for (auto& v : out) v -= mean;
    return out;
}

// Solves the 4x4 normal equations by Gaussian elimination with partial
// pivoting.  Columns are pre-scaled to unit norm, so the pivot threshold is
// relative to a unit diagonal.
inline std::array<double, 4> solve_normal_equations(std::array<std::array<long double, 5>, 4> m) {
    constexpr long double pivot_floor = 1e-14L;
    for (std::size_t col = 0; col < 4; ++col) {
        std::size_t best = col;
        for (std::size_t r = col + 1; r < 4; ++r)
            if (std::fabs(m[r][col]) > std::fabs(m[best][col])) best = r;
        if (std::fabs(m[best][col]) < pivot_floor)
            throw RankDeficient("fit_second_order: regressors are linearly dependent "
                                "(input insufficiently exciting)");
        std::swap(m[col], m[best]);
        for (std::size_t r = col + 1; r < 4; ++r) {
            const long double f = m[r][col] / m[col][col];
            for (std::size_t c = col; c < 5; ++c) m[r][c] -= f * m[col][c];
        }
    }
    std::array<double, 4> x{};
    for (std::size_t i = 4; i-- > 0;) {
        long double acc = m[i][4];
        for (std::size_t c = i + 1; c < 4; ++c) acc -= m[i][c] * x[c];
        x[i] = static_cast<double>(acc / m[i][i]);
    }
    return x;
}

struct ContinuousPolynomial {
    double c1;  // 2ζωn
    double c0;  // ωn²
};

inline ContinuousPolynomial to_continuous(const ArxCoefficients& arx,
                                          const std::array<std::complex<double>, 2>& z,
                                          double dt, PoleMapping mapping) {
    switch (mapping) {
        case PoleMapping::integrator:
            return {(1.0 - arx.a2) / dt, (1.0 + arx.a1 + arx.a2) / (dt * dt)};
        case PoleMapping::tustin: {
            const double h = dt / 2.0;
            const double d = 1.0 - arx.a1 + arx.a2;
            if (!(d > 0.0)) throw UnstableFit("fit_second_order: pole at z = -1");
            return {2.0 * (1.0 - arx.a2) / (h * d), (1.0 + arx.a1 + arx.a2) / (h * h * d)};
        }
        case PoleMapping::matched: {
            for (const auto& p : z)
                if (p.imag() == 0.0 && p.real() <= 0.0)
                    throw UnstableFit("fit_second_order: pole on the non-positive real axis "
                                      "has no continuous-time counterpart");
            const auto s1 = std::log(z[0]) / dt;
            const auto s2 = std::log(z[1]) / dt;
            return {-(s1 + s2).real(), (s1 * s2).real()};
        }
    }
    throw InvalidSpec("unknown pole mapping");
}

}  // namespace detail

/**
 * Fits a second-order model to a torque input and angle output sampled at dt.
 *
 * Both records are demeaned first.  The report is computed on one-step-ahead
 * predictions by default (or free-run simulation of the ARX model), with
 * n_params = 4.
 *
 * Throws InvalidData for unequal or short (< 50) series or dt <= 0,
 * RankDeficient when the input is constant or the regressors are dependent,
 * and UnstableFit when a discrete pole lies on or outside the unit circle.
 */
inline SecondOrderFit fit_second_order(std::span<const double> input, std::span<const double> output,
                                       double dt, FitOptions options = {}) {
    if (input.size() != output.size())
        throw InvalidData("fit_second_order: input and output lengths differ");
    if (input.size() < min_fit_samples)
        throw InvalidData("fit_second_order: need at least 50 samples");
    if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidData("fit_second_order: dt must be > 0");

    const auto u = detail::demeaned(input);
    const auto y = detail::demeaned(output);
    const std::size_t n = y.size();

    auto regressor = [&](std::size_t k) -> std::array<double, 4> {
        return {-y[k - 1], -y[k - 2], u[k - 1], u[k - 2]};
    };

    std::array<long double, 4> norm2{};
    for (std::size_t k = 2; k < n; ++k) {
        const auto phi = regressor(k);
        for (std::size_t j = 0; j < 4; ++j) norm2[j] += static_cast<long double>(phi[j]) * phi[j];
    }
    std::array<long double, 4> scale{};
    for (std::size_t j = 0; j < 4; ++j) {
        if (norm2[j] == 0.0L)
            throw RankDeficient(j < 2 ? "fit_second_order: output is constant"
                                      : "fit_second_order: input is constant (unexcited system)");
        scale[j] = 1.0L / std::sqrt(norm2[j]);
    }

    std::array<std::array<long double, 5>, 4> normal{};
    for (std::size_t k = 2; k < n; ++k) {
        const auto phi = regressor(k);
        std::array<long double, 4> c{};
        for (std::size_t j = 0; j < 4; ++j) c[j] = phi[j] * scale[j];
        for (std::size_t i = 0; i < 4; ++i) {
            for (std::size_t j = 0; j < 4; ++j) normal[i][j] += c[i] * c[j];
            normal[i][4] += c[i] * y[k];
        }
    }
    const auto scaled = detail::solve_normal_equations(normal);
    ArxCoefficients arx{static_cast<double>(scaled[0] * scale[0]), static_cast<double>(scaled[1] * scale[1]),
                        static_cast<double>(scaled[2] * scale[2]), static_cast<double>(scaled[3] * scale[3])};

    const std::complex<double> disc = std::sqrt(std::complex<double>(arx.a1 * arx.a1 - 4.0 * arx.a2));
    const std::array<std::complex<double>, 2> poles = {(-arx.a1 + disc) / 2.0, (-arx.a1 - disc) / 2.0};
    for (const auto& p : poles)
        if (!(std::abs(p) < 1.0))
            throw UnstableFit("fit_second_order: discrete pole |z| = " + std::to_string(std::abs(p)) +
                              " is not inside the unit circle");

    const auto poly = detail::to_continuous(arx, poles, dt, options.mapping);
    if (!(poly.c0 > 0.0) || !(poly.c1 >= 0.0) || !std::isfinite(poly.c0) || !std::isfinite(poly.c1))
        throw UnstableFit("fit_second_order: no stable continuous-time second-order equivalent");

    SecondOrderFit fit;
    fit.arx = arx;
    fit.discrete_poles = poles;
    fit.model.natural_frequency = std::sqrt(poly.c0);
    fit.model.damping_ratio = poly.c1 / (2.0 * fit.model.natural_frequency);
    fit.model.gain = (arx.b1 + arx.b2) / (1.0 + arx.a1 + arx.a2);

    std::vector<double> measured(y.begin() + 2, y.end());
    std::vector<double> predicted(n - 2);
    if (options.metric == FitMetric::one_step_ahead) {
        for (std::size_t k = 2; k < n; ++k) {
            const auto phi = regressor(k);
            predicted[k - 2] = phi[0] * arx.a1 + phi[1] * arx.a2 + phi[2] * arx.b1 + phi[3] * arx.b2;
        }
    } else {
        double y1 = y[1];
        double y2 = y[0];
        for (std::size_t k = 2; k < n; ++k) {
            const double next = -arx.a1 * y1 - arx.a2 * y2 + arx.b1 * u[k - 1] + arx.b2 * u[k - 2];
            predicted[k - 2] = next;
            y2 = y1;
            y1 = next;
        }
    }
    double sse = 0.0;
    for (std::size_t i = 0; i < measured.size(); ++i) {
        const double e = measured[i] - predicted[i];
        sse += e * e;
    }
    fit.report.n_samples = measured.size();
    fit.report.n_params = arx_parameter_count;
    fit.report.mse = sse / static_cast<double>(measured.size());
    fit.report.fpe = final_prediction_error(fit.report.mse, fit.report.n_params, fit.report.n_samples);
    fit.report.percent_fit = percent_fit(measured, predicted);
    return fit;
}

/// Closed-form unit-step response sampled at t = 0, dt, …, floor(duration/dt)·dt.
inline std::vector<double> step_response(const SecondOrderModel& model, double duration, double dt) {
    validate(model);
    if (!(dt > 0.0) || !(duration >= dt)) throw InvalidData("step_response: need duration >= dt > 0");
    const double k = model.gain;
    const double wn = model.natural_frequency;
    const double zeta = model.damping_ratio;
    // Near ζ = 1 the other branches cancel catastrophically.
    constexpr double critical_band = 1e-8;
    const std::size_t n = tick_count(duration, dt);
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) * dt;
        double y = 0.0;
        if (std::abs(zeta - 1.0) <= critical_band) {
            y = 1.0 - std::exp(-wn * t) * (1.0 + wn * t);
        } else if (zeta < 1.0) {
            const double root = std::sqrt(1.0 - zeta * zeta);
            const double wd = wn * root;
            y = 1.0 - std::exp(-zeta * wn * t) * (std::cos(wd * t) + zeta / root * std::sin(wd * t));
        } else {
            const double root = std::sqrt(zeta * zeta - 1.0);
            const double s1 = -wn * (zeta - root);
            const double s2 = -wn * (zeta + root);
            y = 1.0 - (s2 * std::exp(s1 * t) - s1 * std::exp(s2 * t)) / (s2 - s1);
        }
        out[i] = k * y;
    }
    return out;
}

struct BodeResponse {
    std::vector<double> frequency;  // rad/s
    std::vector<double> magnitude_db;
    std::vector<double> phase_deg;
};

/// Magnitude (dB) and phase (deg, 0 at DC falling to −180) of G(jω).
inline BodeResponse bode(const SecondOrderModel& model, std::span<const double> freqs) {
    validate(model);
    BodeResponse r;
    r.frequency.assign(freqs.begin(), freqs.end());
    r.magnitude_db.reserve(freqs.size());
    r.phase_deg.reserve(freqs.size());
    const double wn = model.natural_frequency;
    const double zeta = model.damping_ratio;
    for (const double w : freqs) {
        if (!(w > 0.0)) throw InvalidData("bode: frequencies must be > 0");
        const double re = wn * wn - w * w;
        const double im = 2.0 * zeta * wn * w;
        const double mag = std::abs(model.gain) * wn * wn / std::hypot(re, im);
        double phase = -std::atan2(im, re) * 180.0 / std::numbers::pi;
        if (model.gain < 0.0) phase -= 180.0;
        r.magnitude_db.push_back(20.0 * std::log10(mag));
        r.phase_deg.push_back(phase);
    }
    return r;
}

/// `count` logarithmically spaced points from lo to hi inclusive.
inline std::vector<double> logspace(double lo, double hi, std::size_t count) {
    std::vector<double> out(count);
    const double a = std::log10(lo);
    const double b = std::log10(hi);
    for (std::size_t i = 0; i < count; ++i) {
        const double f = count > 1 ? static_cast<double>(i) / static_cast<double>(count - 1) : 0.0;
        out[i] = std::pow(10.0, a + (b - a) * f);
    }
    return out;
}

}  // namespace teleop

#endif  // TELEOP_SYSID_HPP
