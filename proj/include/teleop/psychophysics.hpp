#ifndef TELEOP_PSYCHOPHYSICS_HPP
#define TELEOP_PSYCHOPHYSICS_HPP

/** @file
 * Psychophysical paradigms run against simulated observers.
 *
 * An observer is any callable
 *     ObserverResponse(double reference, double comparison, SeededStream&)
 * that reports whether the comparison felt greater.  Two are provided: one
 * that samples a cumulative-Gaussian psychometric function directly, and one
 * that renders both stimuli as virtual springs through a transmission,
 * identifies the participant-side stiffness of each run, and judges those.
 */

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <boost/math/distributions/normal.hpp>

#include "teleop/analysis.hpp"
#include "teleop/engine.hpp"
#include "teleop/error.hpp"
#include "teleop/sysid.hpp"

namespace teleop {

/// P("comparison greater") = λ + (1 − 2λ)·Φ(((c − r) − μ)/σ).
struct PsychometricFunction {
    double threshold_mu = 0.0;
    double slope_sigma = 1.0;
    double lapse_rate = 0.02;
};

inline void validate(const PsychometricFunction& pf) {
    if (!std::isfinite(pf.threshold_mu)) throw InvalidSpec("psychometric: threshold_mu must be finite");
    if (!(pf.slope_sigma > 0.0) || !std::isfinite(pf.slope_sigma))
        throw InvalidSpec("psychometric: slope_sigma must be > 0");
    if (!(pf.lapse_rate >= 0.0 && pf.lapse_rate < 0.5))
        throw InvalidSpec("psychometric: lapse_rate must lie in [0, 0.5)");
}

inline double standard_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

inline double standard_normal_quantile(double p) {
    return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

inline double probability_greater(const PsychometricFunction& pf, double difference) {
    return pf.lapse_rate +
           (1.0 - 2.0 * pf.lapse_rate) * standard_normal_cdf((difference - pf.threshold_mu) / pf.slope_sigma);
}

/// Stimulus difference detected with probability 0.75 above the PSE.
inline double just_noticeable_difference(const PsychometricFunction& pf) {
    return pf.slope_sigma * standard_normal_quantile(0.75);
}

/// Seeded random stream that counts its draws, so every response can be
/// traced back to the draw that produced it.
class SeededStream {
public:
    explicit SeededStream(std::uint64_t seed) : engine_(seed) {}

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() {
        ++draws_;
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    /// Uniform integer in [0, n), unbiased.
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                    std::numeric_limits<std::uint64_t>::max() % n;
        std::uint64_t x = 0;
        do {
            ++draws_;
            x = engine_();
        } while (x >= limit);
        return x % n;
    }

    std::uint64_t next_seed() {
        ++draws_;
        return engine_();
    }

    /// Number of draws so far; the index of the next draw.
    std::uint64_t draws() const noexcept { return draws_; }

private:
    std::mt19937_64 engine_;
    std::uint64_t draws_ = 0;
};

struct ObserverResponse {
    bool greater = false;
    std::uint64_t draw_index = 0;
    double effective_reference = std::numeric_limits<double>::quiet_NaN();
    double effective_comparison = std::numeric_limits<double>::quiet_NaN();
};

template <class F>
concept Observer = requires(F f, double r, double c, SeededStream& s) {
    { f(r, c, s) } -> std::convertible_to<ObserverResponse>;
};

inline ObserverResponse simulated_observer(double reference, double comparison,
                                           const PsychometricFunction& pf, SeededStream& rng) {
    validate(pf);
    ObserverResponse r;
    r.draw_index = rng.draws();
    r.greater = rng.uniform() < probability_greater(pf, comparison - reference);
    return r;
}

struct PsychometricObserver {
    PsychometricFunction pf;

    ObserverResponse operator()(double reference, double comparison, SeededStream& rng) const {
        return simulated_observer(reference, comparison, pf, rng);
    }
};

/// Always answers correctly; consumes no randomness.
struct AlwaysCorrectObserver {
    ObserverResponse operator()(double reference, double comparison, SeededStream& rng) const {
        return {comparison > reference, rng.draws()};
    }
};

struct TrialRecord {
    std::size_t index = 0;
    double reference = 0.0;
    double comparison = 0.0;
    bool response_greater = false;
    bool correct = false;
    std::uint64_t draw_index = 0;
    double effective_reference = std::numeric_limits<double>::quiet_NaN();
    double effective_comparison = std::numeric_limits<double>::quiet_NaN();
};

/// A "greater" answer is correct iff the comparison really is greater.
inline bool is_correct(double reference, double comparison, bool response_greater) {
    return response_greater == (comparison > reference);
}

template <Observer Obs>
TrialRecord run_trial(std::size_t index, double reference, double comparison, Obs& observer,
                      SeededStream& rng) {
    const ObserverResponse resp = observer(reference, comparison, rng);
    TrialRecord rec;
    rec.index = index;
    rec.reference = reference;
    rec.comparison = comparison;
    rec.response_greater = resp.greater;
    rec.correct = is_correct(reference, comparison, resp.greater);
    rec.draw_index = resp.draw_index;
    rec.effective_reference = resp.effective_reference;
    rec.effective_comparison = resp.effective_comparison;
    return rec;
}

/**
 * Method of constant stimuli: every comparison level is presented
 * trials_per_level times in a seeded Fisher-Yates shuffled order.
 */
template <Observer Obs>
std::vector<TrialRecord> run_constant_stimuli(std::span<const double> levels, std::size_t trials_per_level,
                                              double reference, Obs observer, std::uint64_t seed) {
    std::vector<double> distinct(levels.begin(), levels.end());
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    if (distinct.size() < 2) throw InvalidData("constant stimuli: need at least two distinct levels");
    if (trials_per_level < 1) throw InvalidData("constant stimuli: trials_per_level must be >= 1");
    for (double l : levels)
        if (!std::isfinite(l)) throw InvalidData("constant stimuli: levels must be finite");

    std::vector<double> order;
    order.reserve(levels.size() * trials_per_level);
    for (double l : levels) order.insert(order.end(), trials_per_level, l);

    SeededStream rng(seed);
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

    std::vector<TrialRecord> records;
    records.reserve(order.size());
    for (std::size_t i = 0; i < order.size(); ++i)
        records.push_back(run_trial(i, reference, order[i], observer, rng));
    return records;
}

struct StaircaseRule {
    unsigned up = 1;    // consecutive incorrect answers before the level rises
    unsigned down = 2;  // consecutive correct answers before the level falls
};

/// Transformed up-down staircase.  Levels are stimulus differences
/// (comparison − reference).
struct StaircaseState {
    double current_level = 1.0;
    double step_size = 0.1;
    StaircaseRule rule{};
    unsigned consecutive_correct = 0;
    unsigned consecutive_incorrect = 0;
    std::vector<double> reversal_levels;
    std::size_t trial_count = 0;
    std::size_t reversal_target = 12;
    std::size_t max_trials = 1000;
    double floor = -std::numeric_limits<double>::infinity();
    double ceiling = std::numeric_limits<double>::infinity();
    int last_direction = 0;  // −1 falling, +1 rising, 0 before the first move

    bool terminated() const {
        return reversal_levels.size() >= reversal_target || trial_count >= max_trials;
    }
};

inline void validate(const StaircaseState& s) {
    if (!(s.step_size > 0.0) || !std::isfinite(s.step_size))
        throw InvalidSpec("staircase: step_size must be > 0");
    if (s.rule.up < 1 || s.rule.down < 1) throw InvalidSpec("staircase: up/down counts must be >= 1");
    if (!std::isfinite(s.current_level)) throw InvalidSpec("staircase: current_level must be finite");
    if (s.floor > s.ceiling) throw InvalidSpec("staircase: floor must not exceed ceiling");
}

/**
 * Applies one response.  `rule.down` consecutive correct answers lower the
 * level by step_size, `rule.up` consecutive incorrect answers raise it.  A
 * change of direction records the level it happened at as a reversal.
 */
inline StaircaseState staircase_update(StaircaseState s, bool response_correct) {
    validate(s);
    ++s.trial_count;
    int direction = 0;
    if (response_correct) {
        s.consecutive_incorrect = 0;
        if (++s.consecutive_correct >= s.rule.down) {
            direction = -1;
            s.consecutive_correct = 0;
        }
    } else {
        s.consecutive_correct = 0;
        if (++s.consecutive_incorrect >= s.rule.up) {
            direction = +1;
            s.consecutive_incorrect = 0;
        }
    }
    if (direction != 0) {
        if (s.last_direction != 0 && direction != s.last_direction)
            s.reversal_levels.push_back(s.current_level);
        s.last_direction = direction;
        s.current_level = std::clamp(s.current_level + direction * s.step_size, s.floor, s.ceiling);
    }
    return s;
}

/// Mean of the reversal levels after discarding the first two.
inline double staircase_threshold(const StaircaseState& s) {
    if (s.reversal_levels.size() < 4)
        throw InsufficientReversals("staircase_threshold: need at least 4 reversals, have " +
                                    std::to_string(s.reversal_levels.size()));
    if (!s.terminated()) throw InvalidData("staircase_threshold: staircase has not terminated");
    const auto first = s.reversal_levels.begin() + 2;
    return std::accumulate(first, s.reversal_levels.end(), 0.0) /
           static_cast<double>(s.reversal_levels.end() - first);
}

struct StaircaseRun {
    StaircaseState state;
    std::vector<TrialRecord> trials;
};

/// Runs a staircase to termination; trial i presents reference + level_i.
template <Observer Obs>
StaircaseRun run_staircase(StaircaseState initial, double reference, Obs observer, std::uint64_t seed) {
    validate(initial);
    SeededStream rng(seed);
    StaircaseRun run{std::move(initial), {}};
    while (!run.state.terminated()) {
        const double comparison = reference + run.state.current_level;
        run.trials.push_back(run_trial(run.trials.size(), reference, comparison, observer, rng));
        run.state = staircase_update(std::move(run.state), run.trials.back().correct);
    }
    return run;
}

struct PsychometricFit {
    PsychometricFunction pf;
    double jnd = 0.0;
    double log_likelihood = 0.0;
    std::size_t iterations = 0;
};

/// Responses are perfectly separated by stimulus level, so σ → 0.  The
/// clamped fit (σ = sigma_min) is attached.
class DegenerateFit : public Error {
public:
    explicit DegenerateFit(PsychometricFit clamped)
        : Error("fit_psychometric: responses perfectly separated; slope clamped at sigma_min"),
          clamped_(clamped) {}

    const PsychometricFit& clamped() const noexcept { return clamped_; }

private:
    PsychometricFit clamped_;
};

namespace detail {

struct LevelCounts {
    double level;
    double trials;
    double greater;
};

inline double log_likelihood(std::span<const LevelCounts> data, double mu, double sigma, double lapse) {
    constexpr double p_floor = 1e-300;
    const PsychometricFunction pf{mu, sigma, lapse};
    double ll = 0.0;
    for (const auto& d : data) {
        const double p = std::clamp(probability_greater(pf, d.level), p_floor, 1.0 - 1e-16);
        ll += d.greater * std::log(p) + (d.trials - d.greater) * std::log1p(-p);
    }
    return ll;
}

template <class F>
double golden_maximise(F&& f, double lo, double hi, double tol) {
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo;
    double b = hi;
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    double fc = f(c);
    double fd = f(d);
    while (b - a > tol) {
        if (fc > fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    return (a + b) / 2.0;
}

}  // namespace detail

inline constexpr double sigma_min = 1e-6;

/**
 * Maximum-likelihood cumulative-Gaussian fit of (μ, σ) with the lapse rate
 * held fixed.  Stimulus is comparison − reference.  Alternates golden-section
 * searches over μ and log σ until the log-likelihood improves by less than
 * 1e-9.
 *
 * Throws InvalidData with fewer than two levels or when only one response
 * type occurs, and DegenerateFit when the responses are perfectly separated.
 */
inline PsychometricFit fit_psychometric(std::span<const TrialRecord> records, double lapse_rate = 0.02) {
    if (!(lapse_rate >= 0.0 && lapse_rate < 0.5))
        throw InvalidSpec("fit_psychometric: lapse_rate must lie in [0, 0.5)");
    std::map<double, detail::LevelCounts> by_level;
    std::size_t greater = 0;
    for (const auto& r : records) {
        const double x = r.comparison - r.reference;
        auto& c = by_level.try_emplace(x, detail::LevelCounts{x, 0.0, 0.0}).first->second;
        c.trials += 1.0;
        if (r.response_greater) {
            c.greater += 1.0;
            ++greater;
        }
    }
    if (by_level.size() < 2) throw InvalidData("fit_psychometric: need at least two stimulus levels");
    if (greater == 0 || greater == records.size())
        throw InvalidData("fit_psychometric: both response types must be present");

    std::vector<detail::LevelCounts> data;
    for (const auto& [x, c] : by_level) data.push_back(c);
    const double lo = data.front().level;
    const double hi = data.back().level;
    const double span = hi - lo;

    // Perfect separation: all-"less" levels followed by all-"greater" levels.
    {
        std::size_t i = 0;
        while (i < data.size() && data[i].greater == 0.0) ++i;
        std::size_t j = i;
        while (j < data.size() && data[j].greater == data[j].trials) ++j;
        if (j == data.size() && i > 0 && i < data.size()) {
            PsychometricFit clamped;
            clamped.pf = {(data[i - 1].level + data[i].level) / 2.0, sigma_min, lapse_rate};
            clamped.jnd = just_noticeable_difference(clamped.pf);
            clamped.log_likelihood =
                detail::log_likelihood(data, clamped.pf.threshold_mu, sigma_min, lapse_rate);
            throw DegenerateFit(clamped);
        }
    }

    const double mu_lo = lo - span;
    const double mu_hi = hi + span;
    const double log_sigma_lo = std::log(sigma_min);
    const double log_sigma_hi = std::log(10.0 * span);
    double mu = (lo + hi) / 2.0;
    double log_sigma = std::log(span / 4.0);
    double ll = detail::log_likelihood(data, mu, std::exp(log_sigma), lapse_rate);
    std::size_t it = 0;
    constexpr std::size_t max_iterations = 1000;
    for (; it < max_iterations; ++it) {
        mu = detail::golden_maximise(
            [&](double m) { return detail::log_likelihood(data, m, std::exp(log_sigma), lapse_rate); }, mu_lo,
            mu_hi, 1e-12 * std::max(1.0, span));
        log_sigma = detail::golden_maximise(
            [&](double ls) { return detail::log_likelihood(data, mu, std::exp(ls), lapse_rate); },
            log_sigma_lo, log_sigma_hi, 1e-12);
        const double next = detail::log_likelihood(data, mu, std::exp(log_sigma), lapse_rate);
        const double gain = next - ll;
        ll = next;
        if (std::abs(gain) < 1e-9) break;
    }
    PsychometricFit fit;
    fit.pf = {mu, std::exp(log_sigma), lapse_rate};
    fit.jnd = just_noticeable_difference(fit.pf);
    fit.log_likelihood = ll;
    fit.iterations = it + 1;
    return fit;
}

/// Stiffness a participant would infer from a run: the inverse DC gain of
/// the participant-side fit (N·m/rad).
inline double effective_stiffness(const SecondOrderFit& fit) { return 1.0 / fit.model.gain; }

/**
 * Observer whose stimulus is the participant-side stiffness identified from
 * a full simulation.  Each presentation renders a virtual torsion spring of
 * the given stiffness through `transmission`, driven by the operator model
 * of `base`, with fresh sensor noise drawn from the stream.
 */
struct SimulatedStiffnessObserver {
    SimConfig base;
    TransmissionSpec transmission;
    PsychometricFunction pf;
    FitOptions fit_options{};

    double perceived_stiffness(double stiffness, std::uint64_t seed) const {
        SimConfig cfg = base;
        cfg.transmission = transmission;
        cfg.environment = TorsionSpring{stiffness, 0.0};
        cfg.rng_seed = seed;
        return effective_stiffness(fit_participant(run_simulation(cfg), fit_options));
    }

    ObserverResponse operator()(double reference, double comparison, SeededStream& rng) const {
        const std::uint64_t ref_seed = rng.next_seed();
        const std::uint64_t cmp_seed = rng.next_seed();
        const double ref_eff = perceived_stiffness(reference, ref_seed);
        const double cmp_eff = perceived_stiffness(comparison, cmp_seed);
        ObserverResponse r = simulated_observer(ref_eff, cmp_eff, pf, rng);
        r.effective_reference = ref_eff;
        r.effective_comparison = cmp_eff;
        return r;
    }
};

/// One stiffness-discrimination trial through a given transmission.
inline TrialRecord stiffness_discrimination_session(const SimConfig& base, const TransmissionSpec& transmission,
                                                    double reference_k, double comparison_k,
                                                    const PsychometricFunction& pf, std::uint64_t seed,
                                                    FitOptions fit_options = {}) {
    SimulatedStiffnessObserver observer{base, transmission, pf, fit_options};
    SeededStream rng(seed);
    return run_trial(0, reference_k, comparison_k, observer, rng);
}

}  // namespace teleop

#endif  // TELEOP_PSYCHOPHYSICS_HPP
