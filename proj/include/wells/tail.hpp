// Exponential-tail estimation for coupling-time survival curves.
//
// Builds the empirical survival counts n_i = #{tau > t_i} on a time grid,
// wraps each point in an Agresti-Coull confidence interval, and searches
// for the smallest window start N0 whose weighted log-linear fit stays
// inside the intervals often enough. The fitted slope over [t_N0, t_N] is
// the tail rate; failure to find any admissible window is itself a
// meaningful outcome (the curve is nowhere statistically exponential).
#pragma once

#include <string>
#include <vector>

#include "wells/coupling.hpp"

namespace wells {

struct AgrestiCoull {
    double p_tilde = 0.0;
    double lower = 0.0;
    double upper = 0.0;
};

// p~ = (n + z^2/2)/(M + z^2) with bounds p~ -+ z sqrt(p~(1-p~)/M~),
// clamped to [0, 1].
AgrestiCoull agresti_coull(long n, long m, double z);

// Weighted least squares for y ~ a t + b. Throws on all-zero weights or a
// single distinct t.
struct LinearFit {
    double a = 0.0;
    double b = 0.0;
};
LinearFit weighted_regression(const std::vector<double>& t, const std::vector<double>& y,
                              const std::vector<double>& w);

struct SurvivalPoint {
    double t = 0.0;
    long count = 0;       // n_i = #{tau > t_i}
    AgrestiCoull ci;
    double weight = 0.0;  // n_i / M
};

struct SurvivalCurve {
    std::vector<SurvivalPoint> points;  // strictly increasing t
    long total = 0;                     // M
    double z = 1.96;
    double alpha = 0.05;
};

enum class GridSpacing { Uniform, Log };

struct GridConfig {
    int points = 200;
    long min_uncensored = 1000;
    double z = 1.96;
    double alpha = 0.05;
    GridSpacing spacing = GridSpacing::Uniform;
    int min_tail_points = 5;  // smallest admissible fit window
};

// Survival counts over [0, max uncensored tau]. Censored samples (tau
// unobserved beyond max_time) contribute to every count with t_i strictly
// below max_time.
SurvivalCurve build_survival_curve(const std::vector<double>& taus, long n_censored,
                                   double max_time, const GridConfig& grid);

SurvivalCurve build_survival_curve(const std::vector<CouplingRecord>& records, double max_time,
                                   const GridConfig& grid);

enum class TailStatus {
    Ok,
    NoExponentialTail,  // no window passes the violation test: not exponential anywhere
    DegenerateFit,      // flat or single-atom curve
    InsufficientData,
};

std::string tail_status_name(TailStatus s);

struct TailPoint {
    double t = 0.0;
    double p_tilde = 0.0;
    double lower = 0.0;
    double upper = 0.0;
    double weight = 0.0;
};

struct TailEstimate {
    TailStatus status = TailStatus::InsufficientData;
    double slope_a = 0.0;      // regression slope (negative for a decaying tail)
    double intercept_b = 0.0;
    double t_star = 0.0;
    int n0_index = 0;
    double rate_r = 0.0;       // -slope_a
    int violations = 0;
    int window_points = 0;
    long total = 0;
    long uncensored = 0;
    double censor_fraction = 0.0;
    bool high_censoring = false;  // flagged above 20%
    std::vector<TailPoint> per_point;
    std::string message;

    bool ok() const { return status == TailStatus::Ok; }
};

// The window search: binary search for the smallest accepted N0 (violation
// count < alpha * window size against the log-mapped confidence bands),
// with a linear-scan fallback when the acceptance set turns out to be
// non-monotone.
TailEstimate find_t_star(const SurvivalCurve& curve, int min_tail_points = 5);

// Convenience: records -> survival curve -> find_t_star.
TailEstimate estimate_rate(const std::vector<CouplingRecord>& records, double max_time,
                           const GridConfig& grid = {});

// Same pipeline on raw event times (conditional distributions, oracles).
TailEstimate estimate_rate_values(const std::vector<double>& values, long n_censored,
                                  double max_time, const GridConfig& grid = {});

}  // namespace wells
