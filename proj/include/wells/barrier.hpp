// Noise sweep and zero-noise extrapolation.
//
// For a multi-well landscape the tail rate obeys r(eps) ~ C0 exp(-2 H_U /
// eps^2), so -eps^2 log r(eps) = 2 H_U - eps^2 log C0 is linear in eps^2
// and its intercept at eps^2 = 0 is twice the essential barrier height.
// For a strongly convex single well the rate is flat in eps instead; the
// contrast drives the landscape classification verdict.
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "wells/coupling.hpp"
#include "wells/tail.hpp"

namespace wells {

struct SamplingBudget {
    long n_samples = 100000;
    int workers = 0;  // 0 = hardware concurrency
    GridConfig grid;
};

struct SweepEntry {
    double epsilon = 0.0;
    double rate = 0.0;
    double t_star = 0.0;
    long sample_count = 0;
    double censor_fraction = 0.0;
    bool usable = false;        // false when the estimator returned no exponential tail
    std::string status;
    TailEstimate estimate;      // full per-point table for plot regeneration
};

struct RateSweep {
    PotentialSpec potential;
    std::vector<SweepEntry> entries;  // epsilon strictly increasing

    std::vector<const SweepEntry*> usable_entries() const;
};

// Per-epsilon simulation time caps; epsilons must be strictly increasing.
struct SweepPlan {
    std::vector<double> epsilons;
    std::vector<double> max_times;  // same length as epsilons
    double step = 1e-3;
    double threshold_factor = 2.0;
    double divergence_radius = 1e6;
    std::uint64_t seed = 0;
};

// Runs run_batch + estimate_rate for every epsilon. Entries whose tail
// estimate fails are kept but marked unusable. Throws if fewer than two
// epsilons succeed.
RateSweep sweep(const PotentialSpec& spec, const SweepPlan& plan, const InitCondition& init,
                const SamplingBudget& budget);

struct BarrierEstimate {
    double r0 = 0.0;           // extrapolated intercept of -eps^2 log r, equals 2 H_U
    double h_u = 0.0;          // r0 / 2
    double fit_slope = 0.0;
    double fit_intercept = 0.0;  // == r0
    double intercept_se = 0.0;
    bool barrier_detected = false;  // false when the intercept is not positive
    std::vector<double> epsilons_used;
    std::vector<double> residuals;
};

// OLS of -eps^2 log r(eps) against eps^2 over the `use_smallest` smallest
// usable epsilons. A non-positive intercept is reported as "no barrier
// detected" rather than an error.
BarrierEstimate extrapolate(const RateSweep& sweep, int use_smallest = 6);

enum class Verdict { SingleWellConvexLike, MultiWell, Inconclusive };

std::string verdict_name(Verdict v);

// SingleWellConvexLike when the rates are flat in eps (max/min < 1 +
// flatness_tol); MultiWell when the extrapolation intercept clears zero by
// three standard errors and the rates increase with eps.
Verdict classify(const RateSweep& sweep, double flatness_tol = 0.25);

}  // namespace wells
