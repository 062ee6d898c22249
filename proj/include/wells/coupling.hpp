// Coupled Euler-Maruyama simulation under the reflection-maximal switching
// scheme.
//
// Two trajectories of dZ = -grad U(Z) dt + eps dB advance on a step-h grid.
// While their distance exceeds d = threshold_factor * eps * sqrt(h) the
// noise of the second trajectory is the mirror image of the first's
// (reflection coupling); once the distance at the previous step is <= d the
// next step samples a maximal coupling of the two Gaussian proposals, which
// is the only mechanism that can declare the pair coupled.
#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "wells/potential.hpp"
#include "wells/rng.hpp"
#include "wells/vec.hpp"

namespace wells {

enum class Scheme { Reflection, Maximal, Coupled };

struct SimParams {
    double epsilon = 0.5;
    double step = 1e-3;
    double threshold_factor = 2.0;
    double max_time = 1e3;
    std::uint64_t seed = 0;
    double divergence_radius = 1e6;

    // d is always derived, never cached, so it can't go stale.
    double threshold() const { return threshold_factor * epsilon * std::sqrt(step); }
    long max_steps() const { return static_cast<long>(std::floor(max_time / step + 0.5)); }
    void validate() const;
};

// Mutable pair state plus scratch buffers so stepping never allocates.
struct CoupledState {
    Vec x, y;
    long steps = 0;
    Scheme scheme = Scheme::Reflection;
    Rng rng;

    Vec noise, grad_x, grad_y;

    static CoupledState start(Vec x0, Vec y0, const SimParams& params, Rng rng);
    double time(const SimParams& params) const { return static_cast<double>(steps) * params.step; }
};

struct InitCondition {
    enum class Mode { Points, Uniform, FixedXUniformY };
    Mode mode = Mode::Points;
    Vec x0, y0;  // Points / FixedXUniformY (x side)
    Vec lo, hi;  // Uniform bounds, per coordinate

    static InitCondition points(Vec x0, Vec y0);
    static InitCondition uniform(Vec lo, Vec hi);
    static InitCondition fixed_x_uniform_y(Vec x0, Vec lo, Vec hi);

    int dimension() const;
    void draw(Rng& rng, Vec& x, Vec& y) const;
};

struct InstrumentConfig {
    bool basins = false;          // track per-step basin labels and event times
    bool track_xi1 = false;       // keep simulating past coupling until xi_1 is seen
    bool stop_on_separation = false;  // stop when the pair splits across basins (tau_eps runs)
    bool stop_on_h1_event = false;    // stop once X hits the low region or Y first leaves it
    int basin_check_stride = 10;  // descent-snapshot cadence for kinds without a cheap test
    bool record_trace = false;
    long trace_cap = 200000;
};

enum class SampleStatus { Coupled, Censored, Diverged, Separated, EventStop };

struct TraceStep {
    Scheme scheme_used;   // scheme that produced this step
    double dist_after;    // |x - y| after the step
    bool coupled;
};

constexpr double kUnset = std::numeric_limits<double>::quiet_NaN();
inline bool observed(double t) { return !std::isnan(t); }

struct CouplingRecord {
    long sample_index = 0;
    SampleStatus status = SampleStatus::Censored;
    double tau_c = kUnset;    // set when status == Coupled; integer multiple of h
    long steps = 0;
    // instrumented event times (NaN while unobserved)
    double tau_eps1 = kUnset;  // first time > h with both trajectories in the same basin
    double kappa_x = kUnset;   // first hit of trajectory X to the low-basin region
    double kappa_y = kUnset;
    double xi1 = kUnset;       // first simultaneous presence in the low-basin region
    double tau_sep = kUnset;   // separation time when stop_on_separation ended the run
    double x_first_leave = kUnset;  // first departure from the starting basin label
    double y_first_leave = kUnset;
    bool basin_trace_enabled = false;
    std::vector<TraceStep> trace;
};

// One Euler-Maruyama update z - grad U(z) h + eps sqrt(h) * noise, where
// `noise` is the raw standard-normal draw. Throws on non-finite output.
Vec em_step(const PotentialSpec& spec, std::span<const double> z, double h, double epsilon,
            std::span<const double> noise);

// One reflection-coupling step: X gets fresh noise xi, Y gets the mirror
// image P xi with P = I - 2 e e^T. Never couples; selects the next scheme
// from the post-step distance. Requires state.scheme == Reflection.
void reflection_step(const PotentialSpec& spec, CoupledState& state, const SimParams& params);

// One maximal-coupling step of the Gaussian proposals N(m_x, s^2 I),
// N(m_y, s^2 I) by accept/reflect. On acceptance y is assigned bitwise from
// x and the scheme becomes Coupled. Returns true iff the pair coupled.
// Requires state.scheme == Maximal.
bool maximal_step(const PotentialSpec& spec, CoupledState& state, const SimParams& params);

// Full sample: iterate until coupled, censored at max_time, or diverged.
// The RNG stream is derived from (params.seed, sample_index).
CouplingRecord sample_coupling_time(const PotentialSpec& spec, const SimParams& params,
                                    const InitCondition& init, const InstrumentConfig& instrument,
                                    long sample_index = 0);

struct FirstPassagePair {
    double tau_coarse = kUnset;  // tau_h^h
    double tau_fine = kUnset;    // tau_h^{h1}
    bool censored_coarse = false;
    bool censored_fine = false;
};

// One reflection-coupled pair run at fine step h1 (h = n * h1), with the
// coarse chain driven by the aggregated Brownian increments of the fine
// chain. Returns the first times each sampled distance process drops to
// the coarse threshold 2 eps sqrt(h).
FirstPassagePair sample_first_passage_pair(const PotentialSpec& spec, const SimParams& params,
                                           const InitCondition& init, double h1,
                                           long sample_index = 0);

struct BatchResult {
    std::vector<CouplingRecord> records;
    long n_coupled = 0;
    long n_censored = 0;
    long n_diverged = 0;
    long n_separated = 0;
    long n_event_stop = 0;
    bool partial = false;

    double censor_fraction() const {
        return records.empty() ? 0.0 : static_cast<double>(n_censored) / records.size();
    }
};

// n_samples independent records; sample i always uses the stream derived
// from (params.seed, i), so the result is bit-identical for any worker
// count. Divergent samples are kept (flagged) without aborting the batch.
BatchResult run_batch(const PotentialSpec& spec, const SimParams& params,
                      const InitCondition& init, const InstrumentConfig& instrument,
                      long n_samples, int workers, std::atomic<bool>* cancel = nullptr);

}  // namespace wells
