#include <cmath>
#include <cstring>

#include "doctest.h"
#include "support/stats.hpp"
#include "wells/coupling.hpp"
#include "wells/potential.hpp"
#include "wells/tail.hpp"

using namespace wells;

namespace {

SimParams base_params(double eps, double h, double max_time, std::uint64_t seed) {
    SimParams p;
    p.epsilon = eps;
    p.step = h;
    p.max_time = max_time;
    p.seed = seed;
    return p;
}

}  // namespace

TEST_CASE("em_step applies the full update") {
    // 1x1 Lehmer degenerates to A = [[1]]: drift is -z
    const auto lh1 = PotentialSpec::lehmer(1);
    Vec out = em_step(lh1, Vec{1.0}, 0.1, 0.5, Vec{0.0});
    CHECK(out[0] == doctest::Approx(0.9).epsilon(1e-12));

    // near-critical point moves by less than |grad| h
    const auto dw = PotentialSpec::double_well();
    out = em_step(dw, Vec{0.9740}, 1e-3, 0.5, Vec{0.0});
    CHECK(std::abs(out[0] - 0.9740) < 1e-5);

    // gradient zero at the Lehmer minimum: fixed point with zero noise
    const auto lh2 = PotentialSpec::lehmer(2);
    out = em_step(lh2, Vec{0.0, 0.0}, 0.1, 0.5, Vec{0.0, 0.0});
    CHECK(out[0] == 0.0);
    CHECK(out[1] == 0.0);

    // noise enters scaled by eps sqrt(h)
    out = em_step(lh1, Vec{0.0}, 0.04, 2.0, Vec{1.0});
    CHECK(out[0] == doctest::Approx(2.0 * 0.2).epsilon(1e-12));

    CHECK_THROWS_AS(em_step(lh2, Vec{0.0, 0.0}, 0.1, 0.5, Vec{0.0}), std::invalid_argument);
}

TEST_CASE("reflection step mirrors the noise across the separating direction") {
    const auto lh = PotentialSpec::lehmer(2);
    SimParams p = base_params(0.5, 1e-3, 10.0, 3);

    // x - y aligned with axis 1: with the same draw, Y's noise must be the
    // mirror image; verify via the algebraic identity on the new distance
    for (int trial = 0; trial < 50; ++trial) {
        CoupledState st = CoupledState::start(Vec{1.0, 0.3}, Vec{-0.5, 0.3}, p, Rng(3, trial));
        REQUIRE(st.scheme == Scheme::Reflection);
        const Vec x_old = st.x, y_old = st.y;
        Rng replay = st.rng;  // same stream: recover the noise draw
        Vec xi(2);
        replay.fill_normal(xi.data(), 2);

        reflection_step(lh, st, p);

        // reconstruct both updates by hand
        const Vec gx = gradient(lh, x_old), gy = gradient(lh, y_old);
        const double s = p.epsilon * std::sqrt(p.step);
        Vec e(2);
        const double dxy = dist(x_old, y_old);
        for (int i = 0; i < 2; ++i) e[i] = (x_old[i] - y_old[i]) / dxy;
        const double proj = e[0] * xi[0] + e[1] * xi[1];
        for (int i = 0; i < 2; ++i) {
            const double x_expect = x_old[i] - gx[i] * p.step + s * xi[i];
            const double y_expect = y_old[i] - gy[i] * p.step + s * (xi[i] - 2.0 * proj * e[i]);
            CHECK(st.x[i] == doctest::Approx(x_expect).epsilon(1e-12));
            CHECK(st.y[i] == doctest::Approx(y_expect).epsilon(1e-12));
        }
    }
}

TEST_CASE("reflection in one dimension negates the noise") {
    const auto dw = PotentialSpec::double_well();
    SimParams p = base_params(0.4, 1e-3, 10.0, 5);
    CoupledState st = CoupledState::start(Vec{0.9}, Vec{-1.0}, p, Rng(5, 0));
    Rng replay = st.rng;
    const double xi = replay.normal();
    const Vec x_old = st.x, y_old = st.y;
    reflection_step(dw, st, p);
    const double s = p.epsilon * std::sqrt(p.step);
    CHECK(st.x[0] == doctest::Approx(x_old[0] - gradient(dw, x_old)[0] * p.step + s * xi));
    CHECK(st.y[0] == doctest::Approx(y_old[0] - gradient(dw, y_old)[0] * p.step - s * xi));
}

TEST_CASE("maximal step couples with probability one for identical proposals") {
    // a flat direction: Lehmer gradient at symmetric points differs, so use
    // two equal points via... x != y is required; instead make the proposal
    // means coincide by symmetry of the double well's cubic term? Simpler:
    // checked directly through the kernel contract with m_x = m_y by using
    // a potential whose drift maps the two starts to the same mean is not
    // available among the built-ins, so verify the limit law instead:
    // for |Delta| -> 0 the empirical meeting probability approaches 1.
    const auto lh = PotentialSpec::lehmer(1);
    SimParams p = base_params(1.0, 1e-2, 10.0, 11);
    const double d = p.threshold();
    long coupled = 0;
    const int trials = 20000;
    for (int t = 0; t < trials; ++t) {
        // tiny separation: Delta ~ separation (1 + h) / (eps sqrt(h)) << 1
        CoupledState st = CoupledState::start(Vec{d * 1e-4}, Vec{0.0}, p, Rng(11, t));
        REQUIRE(st.scheme == Scheme::Maximal);
        if (maximal_step(lh, st, p)) ++coupled;
    }
    CHECK(static_cast<double>(coupled) / trials > 0.999);
}

TEST_CASE("maximal step meets at the closed-form Gaussian rate") {
    // free dynamics surrogate: Lehmer(k) drift is -Ax; pick points whose
    // one-step means sit |Delta| sigma apart and compare to 2 Phi(-|D|/2)
    const auto lh = PotentialSpec::lehmer(3);
    SimParams p = base_params(1.0, 1e-2, 10.0, 13);
    const double sigma = p.epsilon * std::sqrt(p.step);

    for (double delta_target : {0.5, 1.0, 2.0}) {
        // along axis 1 the 3x3 Lehmer drift scales the separation by
        // (1 - h) after one step; solve for the separation giving Delta
        const double sep = delta_target * sigma / (1.0 - p.step);
        long met = 0;
        const long trials = 100000;
        for (long t = 0; t < trials; ++t) {
            CoupledState st =
                CoupledState::start(Vec{sep, 0.0, 0.0}, Vec{0.0, 0.0, 0.0}, p, Rng(13, t));
            st.scheme = Scheme::Maximal;  // force the maximal kernel regardless of d
            if (maximal_step(lh, st, p)) ++met;
        }
        const double expected = 2.0 * testsupport::normal_cdf(-delta_target / 2.0);
        const double se = std::sqrt(expected * (1.0 - expected) / trials);
        CHECK(std::abs(static_cast<double>(met) / trials - expected) < 3.0 * se);
    }
}

TEST_CASE("maximal step preserves the Y marginal (projection KS)") {
    const auto lh = PotentialSpec::lehmer(3);
    SimParams p = base_params(1.0, 1e-2, 10.0, 17);
    const double sigma = p.epsilon * std::sqrt(p.step);
    const Vec y0{0.1, -0.2, 0.3};
    const Vec gy = gradient(lh, y0);
    const double mean_y0 = y0[0] - gy[0] * p.step;

    std::vector<double> first_coord;
    const long trials = 100000;
    first_coord.reserve(trials);
    for (long t = 0; t < trials; ++t) {
        CoupledState st = CoupledState::start(Vec{0.6, -0.2, 0.3}, y0, p, Rng(17, t));
        st.scheme = Scheme::Maximal;
        maximal_step(lh, st, p);
        first_coord.push_back(st.y[0]);
    }
    const double pval = testsupport::ks_test_pvalue(std::move(first_coord), [&](double v) {
        return testsupport::normal_cdf((v - mean_y0) / sigma);
    });
    CHECK(pval > 0.01);
}

TEST_CASE("already-coupled start returns tau zero and no steps") {
    const auto dw = PotentialSpec::double_well();
    SimParams p = base_params(0.5, 1e-3, 10.0, 19);
    const auto rec = sample_coupling_time(dw, p, InitCondition::points(Vec{0.3}, Vec{0.3}),
                                          InstrumentConfig{}, 0);
    CHECK(rec.status == SampleStatus::Coupled);
    CHECK(rec.tau_c == 0.0);
    CHECK(rec.steps == 0);
}

TEST_CASE("coupling times are integer multiples of h and absorbing") {
    const auto dw = PotentialSpec::double_well();
    SimParams p = base_params(0.6, 1e-3, 400.0, 23);
    InstrumentConfig ins;
    ins.record_trace = true;
    for (long i = 0; i < 20; ++i) {
        const auto rec = sample_coupling_time(dw, p, InitCondition::points(Vec{0.97}, Vec{0.4}),
                                              ins, i);
        if (rec.status != SampleStatus::Coupled) continue;
        const double steps_f = rec.tau_c / p.step;
        CHECK(std::abs(steps_f - std::round(steps_f)) < 1e-9);
        // absorbing: the final trace entry is the coupling event, and no
        // trace entry after a coupled one exists
        bool seen_coupled = false;
        for (const auto& ts : rec.trace) {
            if (seen_coupled) CHECK(false);
            if (ts.coupled) seen_coupled = true;
        }
        CHECK(seen_coupled);
        CHECK(rec.trace.back().dist_after == 0.0);
    }
}

TEST_CASE("scheme switching replays against the stored trace") {
    const auto dw = PotentialSpec::double_well();
    SimParams p = base_params(0.5, 1e-3, 200.0, 29);
    const double d = p.threshold();
    InstrumentConfig ins;
    ins.record_trace = true;
    for (long i = 0; i < 50; ++i) {
        const auto rec = sample_coupling_time(
            dw, p, InitCondition::points(Vec{0.974}, Vec{-1.0241}), ins, i);
        REQUIRE(!rec.trace.empty());
        // step 1 scheme is set by the initial distance
        const double d0 = std::abs(0.974 - (-1.0241));
        CHECK(rec.trace[0].scheme_used ==
              (d0 <= d ? Scheme::Maximal : Scheme::Reflection));
        // scheme at step n is Maximal iff the distance after step n-1 was
        // within the threshold (and the pair not yet coupled)
        for (std::size_t n = 1; n < rec.trace.size(); ++n) {
            const Scheme expected =
                rec.trace[n - 1].dist_after <= d ? Scheme::Maximal : Scheme::Reflection;
            CHECK(rec.trace[n].scheme_used == expected);
        }
        // reflection steps never couple
        for (const auto& ts : rec.trace)
            if (ts.coupled) CHECK(ts.scheme_used == Scheme::Maximal);
    }
}

TEST_CASE("marginal preservation: coupled X agrees with a solo chain") {
    // X_T from coupled runs vs X_T from independent solo runs (different
    // stream family), two-sample KS at significance 0.01
    const auto dw = PotentialSpec::double_well();
    const double T = 4.0;
    SimParams p = base_params(0.5, 1e-3, T, 31);
    const long n = 10000;

    std::vector<double> coupled_x;
    coupled_x.reserve(n);
    InstrumentConfig ins;
    ins.record_trace = false;
    for (long i = 0; i < n; ++i) {
        // capped at T with no coupling possible before T? coupling may
        // happen; after coupling X continues as a plain chain, so evolve
        // the pair manually to time T
        Rng rng(31, i);
        Vec x{0.974}, y{-1.0241};
        CoupledState st = CoupledState::start(x, y, p, rng);
        const long steps = p.max_steps();
        for (long s = 0; s < steps; ++s) {
            if (st.scheme == Scheme::Coupled) {
                st.rng.fill_normal(st.noise.data(), 1);
                st.x = em_step(dw, st.x, p.step, p.epsilon, st.noise);
                st.y = st.x;
            } else if (st.scheme == Scheme::Reflection) {
                reflection_step(dw, st, p);
            } else {
                maximal_step(dw, st, p);
            }
        }
        coupled_x.push_back(st.x[0]);
    }

    std::vector<double> solo_x;
    solo_x.reserve(n);
    for (long i = 0; i < n; ++i) {
        Rng rng(777, i);  // independent streams
        Vec x{0.974}, noise(1);
        const long steps = p.max_steps();
        for (long s = 0; s < steps; ++s) {
            rng.fill_normal(noise.data(), 1);
            x = em_step(dw, x, p.step, p.epsilon, noise);
        }
        solo_x.push_back(x[0]);
    }

    CHECK(testsupport::ks_two_sample_pvalue(std::move(coupled_x), std::move(solo_x)) > 0.01);
}

TEST_CASE("instrumented events: xi1 dominates both hitting times") {
    const auto ips = PotentialSpec::interacting_particles(3, 0.05);
    SimParams p = base_params(0.65, 1e-3, 400.0, 37);
    InstrumentConfig ins;
    ins.basins = true;
    ins.track_xi1 = true;
    const BatchResult batch = run_batch(ips, p,
                                        InitCondition::points(Vec{1, 1, 1}, Vec{-1, -1, -1}),
                                        ins, 200, 2);
    long with_xi = 0;
    for (const auto& r : batch.records) {
        if (observed(r.xi1)) {
            REQUIRE(observed(r.kappa_x));
            REQUIRE(observed(r.kappa_y));
            CHECK(r.xi1 >= std::max(r.kappa_x, r.kappa_y));
            ++with_xi;
        }
        // kappa_y for a start at the global minimum is the first step
        if (observed(r.kappa_y)) CHECK(r.kappa_y >= p.step);
        if (observed(r.tau_eps1)) CHECK(r.tau_eps1 >= 2.0 * p.step);
    }
    CHECK(with_xi > 100);
}

TEST_CASE("run_batch is deterministic across worker counts") {
    const auto dw = PotentialSpec::double_well();
    SimParams p = base_params(0.55, 1e-3, 200.0, 41);
    const auto init = InitCondition::points(Vec{0.974}, Vec{-1.0241});
    InstrumentConfig ins;
    ins.basins = true;
    const BatchResult a = run_batch(dw, p, init, ins, 300, 1);
    const BatchResult b = run_batch(dw, p, init, ins, 300, 8);
    REQUIRE(a.records.size() == b.records.size());
    for (std::size_t i = 0; i < a.records.size(); ++i) {
        CHECK(a.records[i].sample_index == b.records[i].sample_index);
        CHECK(a.records[i].status == b.records[i].status);
        // bitwise equality of every recorded time
        CHECK(std::memcmp(&a.records[i].tau_c, &b.records[i].tau_c, sizeof(double)) == 0);
        CHECK(std::memcmp(&a.records[i].tau_eps1, &b.records[i].tau_eps1, sizeof(double)) == 0);
        CHECK(a.records[i].steps == b.records[i].steps);
    }
}

TEST_CASE("empty batch and zero samples") {
    const auto dw = PotentialSpec::double_well();
    SimParams p = base_params(0.5, 1e-3, 10.0, 43);
    const BatchResult batch = run_batch(dw, p, InitCondition::points(Vec{1.0}, Vec{-1.0}),
                                        InstrumentConfig{}, 0, 4);
    CHECK(batch.records.empty());
}

TEST_CASE("survival counts are monotone and censoring is reported") {
    const auto dw = PotentialSpec::double_well();
    SimParams p = base_params(0.4, 1e-3, 40.0, 47);  // tight cap: plenty of censoring
    const BatchResult batch = run_batch(dw, p, InitCondition::points(Vec{0.974}, Vec{-1.0241}),
                                        InstrumentConfig{}, 2000, 2);
    CHECK(batch.n_censored > 0);
    CHECK(batch.censor_fraction() > 0.0);

    GridConfig grid;
    grid.min_uncensored = 1;
    const SurvivalCurve curve = build_survival_curve(batch.records, p.max_time, grid);
    for (std::size_t i = 1; i < curve.points.size(); ++i)
        CHECK(curve.points[i].count <= curve.points[i - 1].count);
}

TEST_CASE("divergence is trapped and reported without aborting the batch") {
    // a huge step on the double well explodes the quartic drift
    const auto dw = PotentialSpec::double_well();
    SimParams p = base_params(0.5, 0.9, 50.0, 53);
    p.divergence_radius = 1e3;
    const BatchResult batch = run_batch(dw, p, InitCondition::points(Vec{2.5}, Vec{-2.5}),
                                        InstrumentConfig{}, 50, 2);
    CHECK(batch.n_diverged > 0);
    for (const auto& r : batch.records)
        if (r.status == SampleStatus::Diverged) CHECK(r.steps >= 1);
}

TEST_CASE("first-passage pair: equal steps give equal times") {
    const auto lh = PotentialSpec::lehmer(2);
    SimParams p = base_params(1.0, 1e-3, 400.0, 59);
    const auto init = InitCondition::points(Vec{1.0, 1.0}, Vec{-1.0, -1.0});
    for (long i = 0; i < 10; ++i) {
        const FirstPassagePair pair = sample_first_passage_pair(lh, p, init, p.step, i);
        REQUIRE(!pair.censored_coarse);
        REQUIRE(!pair.censored_fine);
        CHECK(pair.tau_coarse == doctest::Approx(pair.tau_fine).epsilon(1e-12));
    }
}

TEST_CASE("first-passage pair: coarse sampling can only miss crossings") {
    const auto lh = PotentialSpec::lehmer(2);
    SimParams p = base_params(1.0, 0.005, 400.0, 61);
    const auto init = InitCondition::points(Vec{1.0, 1.0}, Vec{-1.0, -1.0});
    double mean_diff = 0.0;
    long n = 0;
    for (long i = 0; i < 3000; ++i) {
        const FirstPassagePair pair = sample_first_passage_pair(lh, p, init, p.step / 8, i);
        if (pair.censored_coarse || pair.censored_fine) continue;
        mean_diff += pair.tau_coarse - pair.tau_fine;
        ++n;
    }
    REQUIRE(n > 2900);
    mean_diff /= n;
    CHECK(mean_diff >= 0.0);
}

TEST_CASE("h1 divides h is enforced") {
    const auto lh = PotentialSpec::lehmer(2);
    SimParams p = base_params(1.0, 1e-3, 10.0, 67);
    const auto init = InitCondition::points(Vec{1.0, 1.0}, Vec{-1.0, -1.0});
    CHECK_THROWS_AS(sample_first_passage_pair(lh, p, init, 3e-4, 0), std::invalid_argument);
}

TEST_CASE("sim parameter validation") {
    SimParams p;
    p.epsilon = 0.0;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    p = SimParams{};
    p.step = -1.0;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    p = SimParams{};
    p.max_time = 0.0;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    // threshold is derived, never stale
    p = SimParams{};
    p.epsilon = 0.5;
    p.step = 1e-3;
    CHECK(p.threshold() == doctest::Approx(2.0 * 0.5 * std::sqrt(1e-3)));
    p.epsilon = 1.0;
    CHECK(p.threshold() == doctest::Approx(2.0 * std::sqrt(1e-3)));
}
