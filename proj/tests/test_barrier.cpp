#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "support/stats.hpp"
#include "wells/barrier.hpp"

using namespace wells;

namespace {

// hand-built sweep with prescribed rates
RateSweep synthetic_sweep(const std::vector<double>& epsilons, const std::vector<double>& rates) {
    RateSweep sweep;
    sweep.potential = PotentialSpec::double_well();
    for (std::size_t i = 0; i < epsilons.size(); ++i) {
        SweepEntry e;
        e.epsilon = epsilons[i];
        e.rate = rates[i];
        e.usable = rates[i] > 0.0;
        e.sample_count = 100000;
        sweep.entries.push_back(e);
    }
    return sweep;
}

}  // namespace

TEST_CASE("extrapolation recovers a noise-free barrier exactly") {
    const double h = 0.8;
    std::vector<double> eps{0.3, 0.35, 0.4, 0.45, 0.5, 0.6};
    std::vector<double> rates;
    for (double e : eps) rates.push_back(std::exp(-2.0 * h / (e * e)));
    const BarrierEstimate est = extrapolate(synthetic_sweep(eps, rates), 6);
    CHECK(est.h_u == doctest::Approx(h).epsilon(1e-6));
    CHECK(est.r0 == doctest::Approx(2.0 * h).epsilon(1e-6));
    CHECK(est.barrier_detected);
    // identity H_U = intercept / 2, exact
    CHECK(est.h_u == 0.5 * est.fit_intercept);
}

TEST_CASE("extrapolation is scale-consistent in the prefactor") {
    const double h = 0.6;
    std::vector<double> eps{0.3, 0.4, 0.5, 0.6};
    for (double c0 : {0.25, 1.0, 7.5}) {
        std::vector<double> rates;
        for (double e : eps) rates.push_back(c0 * std::exp(-2.0 * h / (e * e)));
        const BarrierEstimate est = extrapolate(synthetic_sweep(eps, rates), 4);
        CHECK(est.fit_intercept == doctest::Approx(2.0 * h).epsilon(1e-9));
        CHECK(est.fit_slope == doctest::Approx(-std::log(c0)).epsilon(1e-9));
    }
}

TEST_CASE("use_smallest keeps the low-noise prefix") {
    // corrupt the largest epsilon; a fit over the 3 smallest must ignore it
    const double h = 0.5;
    std::vector<double> eps{0.3, 0.35, 0.4, 0.9};
    std::vector<double> rates;
    for (double e : eps) rates.push_back(std::exp(-2.0 * h / (e * e)));
    rates.back() *= 40.0;
    const BarrierEstimate est = extrapolate(synthetic_sweep(eps, rates), 3);
    CHECK(est.epsilons_used.size() == 3);
    CHECK(est.h_u == doctest::Approx(h).epsilon(1e-6));
}

TEST_CASE("non-positive intercept reports no barrier rather than an error") {
    // rates DECREASING in eps produce a negative intercept
    std::vector<double> eps{0.3, 0.4, 0.5};
    std::vector<double> rates{1.0, 0.9, 0.85};
    const BarrierEstimate est = extrapolate(synthetic_sweep(eps, rates), 3);
    CHECK(!est.barrier_detected);
}

TEST_CASE("verdicts: flat sweeps are single-well, scaling sweeps are multi-well") {
    // flat rates within 2%
    {
        std::vector<double> eps{0.1, 0.5, 1.0, 1.5};
        std::vector<double> rates{0.50, 0.505, 0.498, 0.51};
        CHECK(classify(synthetic_sweep(eps, rates)) == Verdict::SingleWellConvexLike);
    }
    // genuine barrier scaling with slight noise
    {
        const double h = 0.8076;
        std::vector<double> eps{0.4, 0.45, 0.5, 0.6, 0.7};
        std::vector<double> rates;
        std::mt19937 gen(9);
        std::normal_distribution<double> jitter(0.0, 0.01);
        for (double e : eps)
            rates.push_back(0.9 * std::exp(-2.0 * h / (e * e)) * (1.0 + jitter(gen)));
        CHECK(classify(synthetic_sweep(eps, rates)) == Verdict::MultiWell);
    }
    // increasing but too wobbly for a confident intercept
    {
        std::vector<double> eps{0.4, 0.5, 0.6, 0.7};
        std::vector<double> rates{1e-3, 5e-3, 4.0e-3, 9e-3};  // non-monotone
        const Verdict v = classify(synthetic_sweep(eps, rates));
        CHECK(v != Verdict::SingleWellConvexLike);
        CHECK(v != Verdict::MultiWell);
    }
}

TEST_CASE("verdict is invariant under entry reordering") {
    const double h = 0.8;
    std::vector<double> eps{0.4, 0.45, 0.5, 0.6, 0.7};
    std::vector<double> rates;
    for (double e : eps) rates.push_back(std::exp(-2.0 * h / (e * e)));
    const Verdict base = classify(synthetic_sweep(eps, rates));

    // reversed insertion order, then re-sorted as the sweep contract requires
    std::vector<double> eps_r(eps.rbegin(), eps.rend());
    std::vector<double> rates_r(rates.rbegin(), rates.rend());
    RateSweep rsweep = synthetic_sweep(eps_r, rates_r);
    std::sort(rsweep.entries.begin(), rsweep.entries.end(),
              [](const SweepEntry& a, const SweepEntry& b) { return a.epsilon < b.epsilon; });
    CHECK(classify(rsweep) == base);
}

TEST_CASE("preconditions on sweep inputs") {
    std::vector<double> eps{0.4, 0.5};
    std::vector<double> rates{1e-3, 2e-3};
    const RateSweep two = synthetic_sweep(eps, rates);
    CHECK_THROWS_AS(classify(two), std::invalid_argument);  // needs >= 3
    CHECK_THROWS_AS(extrapolate(two, 1), std::invalid_argument);

    RateSweep one = synthetic_sweep({0.4}, {1e-3});
    CHECK_THROWS_AS(extrapolate(one, 2), std::invalid_argument);

    SweepPlan plan;
    plan.epsilons = {0.5};
    plan.max_times = {10.0};
    SamplingBudget budget;
    CHECK_THROWS_AS(sweep(PotentialSpec::double_well(), plan,
                          InitCondition::points(Vec{1.0}, Vec{-1.0}), budget),
                    std::invalid_argument);

    SweepPlan bad_order;
    bad_order.epsilons = {0.5, 0.4};
    bad_order.max_times = {10.0, 10.0};
    CHECK_THROWS_AS(sweep(PotentialSpec::double_well(), bad_order,
                          InitCondition::points(Vec{1.0}, Vec{-1.0}), budget),
                    std::invalid_argument);
}

TEST_CASE("sweep runs end to end on a tiny lehmer batch") {
    SweepPlan plan;
    plan.epsilons = {0.3, 0.6, 1.2};
    plan.max_times = {200.0, 200.0, 200.0};
    plan.seed = 5;
    SamplingBudget budget;
    budget.n_samples = 4000;
    budget.workers = 2;
    budget.grid.min_uncensored = 1000;
    const auto spec = PotentialSpec::lehmer(2);
    const RateSweep result =
        sweep(spec, plan, InitCondition::points(Vec{1.0, 1.0}, Vec{-1.0, -1.0}), budget);
    REQUIRE(result.entries.size() == 3);
    const auto usable = result.usable_entries();
    REQUIRE(usable.size() == 3);
    // rates flat in eps for the strongly convex quadratic (loose at 4k samples)
    double rmin = usable[0]->rate, rmax = usable[0]->rate;
    for (const auto* e : usable) {
        rmin = std::min(rmin, e->rate);
        rmax = std::max(rmax, e->rate);
    }
    CHECK(rmax / rmin < 1.35);
    CHECK(classify(result) == Verdict::SingleWellConvexLike);
}
