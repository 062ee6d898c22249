#include "wells/barrier.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace wells {

std::vector<const SweepEntry*> RateSweep::usable_entries() const {
    std::vector<const SweepEntry*> out;
    for (const auto& e : entries)
        if (e.usable) out.push_back(&e);
    return out;
}

RateSweep sweep(const PotentialSpec& spec, const SweepPlan& plan, const InitCondition& init,
                const SamplingBudget& budget) {
    if (plan.epsilons.size() < 2)
        throw std::invalid_argument("sweep: need at least 2 epsilons");
    if (plan.max_times.size() != plan.epsilons.size())
        throw std::invalid_argument("sweep: max_times must match epsilons");
    for (std::size_t i = 1; i < plan.epsilons.size(); ++i)
        if (!(plan.epsilons[i] > plan.epsilons[i - 1]))
            throw std::invalid_argument("sweep: epsilons must be strictly increasing");

    RateSweep out;
    out.potential = spec;
    long usable = 0;
    for (std::size_t i = 0; i < plan.epsilons.size(); ++i) {
        SimParams params;
        params.epsilon = plan.epsilons[i];
        params.step = plan.step;
        params.threshold_factor = plan.threshold_factor;
        params.max_time = plan.max_times[i];
        params.divergence_radius = plan.divergence_radius;
        // one independent stream family per epsilon index
        params.seed = plan.seed + 0x1000000ULL * (i + 1);

        const BatchResult batch =
            run_batch(spec, params, init, InstrumentConfig{}, budget.n_samples, budget.workers);
        TailEstimate est = estimate_rate(batch.records, params.max_time, budget.grid);

        SweepEntry entry;
        entry.epsilon = params.epsilon;
        entry.sample_count = static_cast<long>(batch.records.size());
        entry.censor_fraction = batch.censor_fraction();
        entry.status = tail_status_name(est.status);
        entry.usable = est.ok() && est.rate_r > 0.0;
        if (entry.usable) {
            entry.rate = est.rate_r;
            entry.t_star = est.t_star;
        }
        entry.estimate = std::move(est);
        if (entry.usable) ++usable;
        out.entries.push_back(std::move(entry));
    }
    if (usable < 2) throw std::runtime_error("sweep: fewer than 2 usable rate estimates");
    return out;
}

namespace {

struct OlsResult {
    double slope = 0.0;
    double intercept = 0.0;
    double intercept_se = 0.0;
    std::vector<double> residuals;
};

OlsResult ols(const std::vector<double>& x, const std::vector<double>& y) {
    const int n = static_cast<int>(x.size());
    double sx = 0.0, sy = 0.0;
    for (int i = 0; i < n; ++i) {
        sx += x[i];
        sy += y[i];
    }
    const double mx = sx / n, my = sy / n;
    double sxx = 0.0, sxy = 0.0;
    for (int i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (!(sxx > 0.0)) throw std::invalid_argument("extrapolate: all epsilons coincide");
    OlsResult out;
    out.slope = sxy / sxx;
    out.intercept = my - out.slope * mx;
    out.residuals.resize(n);
    double rss = 0.0;
    for (int i = 0; i < n; ++i) {
        out.residuals[i] = y[i] - (out.intercept + out.slope * x[i]);
        rss += out.residuals[i] * out.residuals[i];
    }
    if (n > 2) {
        const double s2 = rss / (n - 2);
        double sum_x2 = 0.0;
        for (int i = 0; i < n; ++i) sum_x2 += x[i] * x[i];
        out.intercept_se = std::sqrt(s2 * sum_x2 / (n * sxx));
    }
    return out;
}

}  // namespace

BarrierEstimate extrapolate(const RateSweep& rate_sweep, int use_smallest) {
    auto usable = rate_sweep.usable_entries();
    if (static_cast<int>(usable.size()) < 2)
        throw std::invalid_argument("extrapolate: need at least 2 usable sweep entries");
    if (use_smallest < 2) throw std::invalid_argument("extrapolate: use_smallest must be >= 2");

    // entries are epsilon-sorted; keep the smallest-epsilon prefix
    const int take = std::min<int>(use_smallest, static_cast<int>(usable.size()));
    std::vector<double> x, y;
    BarrierEstimate out;
    for (int i = 0; i < take; ++i) {
        const double eps2 = usable[i]->epsilon * usable[i]->epsilon;
        x.push_back(eps2);
        y.push_back(-eps2 * std::log(usable[i]->rate));
        out.epsilons_used.push_back(usable[i]->epsilon);
    }
    const OlsResult fit = ols(x, y);
    out.fit_slope = fit.slope;
    out.fit_intercept = fit.intercept;
    out.intercept_se = fit.intercept_se;
    out.residuals = fit.residuals;
    out.r0 = fit.intercept;
    out.h_u = 0.5 * fit.intercept;
    out.barrier_detected = fit.intercept > 0.0;
    return out;
}

std::string verdict_name(Verdict v) {
    switch (v) {
        case Verdict::SingleWellConvexLike: return "single_well_convex_like";
        case Verdict::MultiWell: return "multi_well";
        case Verdict::Inconclusive: return "inconclusive";
    }
    return "unknown";
}

Verdict classify(const RateSweep& rate_sweep, double flatness_tol) {
    auto usable = rate_sweep.usable_entries();
    if (usable.size() < 3)
        throw std::invalid_argument("classify: need at least 3 usable sweep entries");

    double r_min = usable.front()->rate, r_max = r_min;
    for (const auto* e : usable) {
        r_min = std::min(r_min, e->rate);
        r_max = std::max(r_max, e->rate);
    }
    if (r_max / r_min < 1.0 + flatness_tol) return Verdict::SingleWellConvexLike;

    bool increasing = true;
    for (std::size_t i = 1; i < usable.size(); ++i)
        if (!(usable[i]->rate > usable[i - 1]->rate)) increasing = false;

    const BarrierEstimate est = extrapolate(rate_sweep, static_cast<int>(usable.size()));
    if (increasing && est.intercept_se > 0.0 && est.fit_intercept > 3.0 * est.intercept_se)
        return Verdict::MultiWell;
    return Verdict::Inconclusive;
}

}  // namespace wells
