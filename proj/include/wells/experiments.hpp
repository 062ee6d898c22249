// Config-driven reproductions of the validation studies: quadratic tail
// flatness, the step-size first-passage bias, barrier sweeps for the double
// well / interacting particles / Rosenbrock / ANN losses, and the (H1)-(H3)
// assumption checks. Every runner is fully determined by (plan, seed); an
// empty out_dir skips file output.
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "wells/barrier.hpp"
#include "wells/coupling.hpp"
#include "wells/potential.hpp"
#include "wells/tail.hpp"

namespace wells {

// ---------------------------------------------------------------------------
// Quadratic tails: rate(eps) should match lambda_min(A) for every eps.
// ---------------------------------------------------------------------------

struct QuadraticTailsPlan {
    std::vector<int> sizes{2, 4, 6, 8};
    std::vector<double> epsilons{0.02, 0.1, 0.5, 1.5};
    double step = 1e-3;
    double max_time = 400.0;
    long samples = 100000;
    std::uint64_t seed = 1;
    int workers = 0;
    GridConfig grid;
};

struct QuadraticCell {
    int k = 0;
    double epsilon = 0.0;
    double lambda_min = 0.0;
    TailEstimate estimate;
};

struct QuadraticTailsReport {
    std::vector<QuadraticCell> cells;
};

QuadraticTailsReport run_quadratic_tails(const QuadraticTailsPlan& plan,
                                         const std::string& out_dir = "");

// ---------------------------------------------------------------------------
// Step-size study: extrapolated first-passage bias vs sqrt(h).
// ---------------------------------------------------------------------------

struct StepSizePlan {
    int lehmer_k = 2;
    double epsilon = 1.0;
    std::vector<double> hs{0.0002, 0.0005, 0.001, 0.005, 0.01};
    std::vector<int> subdivisions{2, 4, 8, 16};  // h1 = h / n
    long samples = 10000;
    double max_time = 400.0;
    std::uint64_t seed = 1;
    int workers = 0;
};

struct StepSizeEntry {
    double h = 0.0;
    std::vector<double> sqrt_h1;
    std::vector<double> mean_diff;   // mean(tau_h^h - tau_h^{h1}) per h1
    double extrapolated_diff = 0.0;  // intercept at sqrt(h1) = 0, est. of tau_h^h - tau_h^0
    double inner_r2 = 0.0;
};

struct StepSizeReport {
    std::vector<StepSizeEntry> entries;
    double slope = 0.0;  // of extrapolated_diff vs sqrt(h)
    double intercept = 0.0;
    double r2 = 0.0;
};

StepSizeReport run_step_size_study(const StepSizePlan& plan, const std::string& out_dir = "");

// ---------------------------------------------------------------------------
// Barrier sweeps (double well, interacting particles, Rosenbrock, ANN).
// ---------------------------------------------------------------------------

struct BarrierSweepPlan {
    std::string label;
    PotentialSpec potential;
    SweepPlan sweep;
    InitCondition init;
    SamplingBudget budget;
    int use_smallest = 6;
    double flatness_tol = 0.25;
};

struct BarrierSweepReport {
    std::string label;
    RateSweep rates;
    std::optional<BarrierEstimate> extrapolation;  // absent if too few usable entries
    std::optional<Verdict> verdict;                // absent below 3 usable entries
};

BarrierSweepReport run_barrier_sweep(const BarrierSweepPlan& plan,
                                     const std::string& out_dir = "");

BarrierSweepPlan double_well_barrier_plan(std::uint64_t seed, long samples = 100000);
BarrierSweepPlan ips_barrier_plan(double sigma, std::uint64_t seed, long samples = 100000,
                                  bool largest_five_only = true);
BarrierSweepPlan rosenbrock_tails_plan(std::uint64_t seed, long samples = 20000);
// Hidden-layer widths (4,3), (10,10), (20,20).
std::vector<BarrierSweepPlan> ann_barrier_plans(std::uint64_t seed, long samples = 10000);

struct AnnBarrierReport {
    std::vector<BarrierSweepReport> networks;  // small, medium, big
    std::vector<double> intercepts;
    bool ordering_ok = false;  // small > medium > big
};

AnnBarrierReport run_ann_barrier(std::uint64_t seed, long samples = 10000, int workers = 0,
                                 const std::string& out_dir = "");

// ---------------------------------------------------------------------------
// Assumption checks.
// ---------------------------------------------------------------------------

// (H1): X starts in the far basin, Y near the global minimum; estimate the
// frequency of Y holding the low region until X arrives.
struct H1Plan {
    PotentialSpec potential;
    Vec x0, y0;
    std::vector<double> epsilons{0.6, 0.65, 0.7, 0.75};
    double step = 1e-3;
    double max_time = 2000.0;
    long samples = 100000;
    std::uint64_t seed = 1;
    int workers = 0;
};

struct H1Entry {
    double epsilon = 0.0;
    long samples = 0;
    long conditioning = 0;    // X entered the low region within the cap
    long stayed = 0;          // ... with Y never having left it first
    long y_left_first = 0;    // Y left the low region before X entered
    long no_event = 0;        // neither event within the cap
    bool defined = false;
    double frequency = 0.0;   // stayed / conditioning when defined
};

struct H1Report {
    std::vector<H1Entry> entries;
};

H1Plan h1_plan_ips(std::uint64_t seed, long samples = 100000);
H1Plan h1_plan_double_well(std::uint64_t seed, long samples = 100000);
H1Report run_h1_check(const H1Plan& plan, const std::string& out_dir = "");

// (H2): both trajectories start in the same basin; simulate to tau_eps =
// min(coupling, first separation) and split by outcome.
struct H2Plan {
    PotentialSpec potential;
    InitCondition init;  // both in one basin
    std::vector<double> epsilons{0.1, 0.3, 0.6};
    std::vector<long> samples_per_eps;  // defaults to `samples` everywhere
    long samples = 200000;
    double step = 1e-3;
    double max_time = 400.0;
    GridConfig conditional_grid;  // min_uncensored is lower for conditionals
    std::vector<Vec> probe_starts;  // fixed X0 probes (Y uniform), boundary included
    long probe_samples = 20000;
    std::uint64_t seed = 1;
    int workers = 0;
};

struct H2Entry {
    double epsilon = 0.0;
    long samples = 0;
    long n_coupled = 0;
    long n_exit = 0;
    long n_censored = 0;
    double p_coupled = 0.0;  // P[coupled at tau_eps]
    TailEstimate coupled_tail;
    TailEstimate exit_tail;
};

struct H2Probe {
    double epsilon = 0.0;
    Vec x0;
    double p_coupled = 0.0;
    long samples = 0;
};

struct H2Report {
    std::vector<H2Entry> entries;
    std::vector<H2Probe> probes;
};

H2Plan h2_plan_double_well(std::uint64_t seed);
H2Report run_h2_check(const H2Plan& plan, const std::string& out_dir = "");

// (H3): trajectories start in different basins; the overshoot
// xi_1 - max(kappa_X, kappa_Y) must have a steeper tail than the coupling
// time at every eps.
struct H3Plan {
    PotentialSpec potential;
    Vec x0, y0;
    std::vector<double> epsilons{0.5, 0.55, 0.6};
    std::vector<double> max_times;  // per epsilon; defaults to max_time
    double max_time = 1500.0;
    double step = 1e-3;
    long samples = 100000;
    GridConfig conditional_grid;
    std::uint64_t seed = 1;
    int workers = 0;
};

struct H3Entry {
    double epsilon = 0.0;
    long samples = 0;
    long overshoot_observed = 0;
    long overshoot_unresolved = 0;  // kappas seen but xi1 censored
    double overshoot_median = 0.0;
    TailEstimate overshoot_tail;
    TailEstimate coupling_tail;
    bool steeper = false;
};

struct H3Report {
    std::vector<H3Entry> entries;
};

H3Plan h3_plan_ips(std::uint64_t seed, long samples = 100000);
H3Report run_h3_check(const H3Plan& plan, const std::string& out_dir = "");

}  // namespace wells
