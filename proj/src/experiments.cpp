#include "wells/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <functional>
#include <stdexcept>
#include <thread>

#include <nlohmann/json.hpp>

#include "wells/io.hpp"

namespace wells {

namespace {

namespace fs = std::filesystem;

void ensure_dir(const std::string& dir) {
    if (!dir.empty()) fs::create_directories(dir);
}

std::string eps_tag(double eps) {
    std::string s = format_double(eps);
    for (auto& c : s)
        if (c == '.' || c == '-' || c == '+') c = '_';
    return s;
}

struct SimpleFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
};

SimpleFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
    const int n = static_cast<int>(x.size());
    double sx = 0.0, sy = 0.0;
    for (int i = 0; i < n; ++i) {
        sx += x[i];
        sy += y[i];
    }
    const double mx = sx / n, my = sy / n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (int i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    SimpleFit f;
    if (!(sxx > 0.0)) throw std::invalid_argument("fit_line: degenerate abscissae");
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    f.r2 = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
    return f;
}

void parallel_samples(long n, int workers, const std::function<void(long)>& body) {
    if (workers <= 0) workers = static_cast<int>(std::thread::hardware_concurrency());
    workers = static_cast<int>(std::max<long>(1, std::min<long>(workers, n)));
    if (workers == 1) {
        for (long i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<long> next{0};
    auto run = [&]() {
        for (;;) {
            const long i = next.fetch_add(1);
            if (i >= n) return;
            body(i);
        }
    };
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(run);
    for (auto& t : pool) t.join();
}

std::uint64_t stream_family(std::uint64_t seed, std::size_t index) {
    return seed + 0x1000000ULL * (index + 1);
}

}  // namespace

// ---------------------------------------------------------------------------
// Quadratic tails
// ---------------------------------------------------------------------------

QuadraticTailsReport run_quadratic_tails(const QuadraticTailsPlan& plan,
                                         const std::string& out_dir) {
    ensure_dir(out_dir);
    QuadraticTailsReport report;
    std::size_t cell_index = 0;
    for (int k : plan.sizes) {
        const PotentialSpec spec = PotentialSpec::lehmer(k);
        const double lambda = least_eigenvalue(spec.lehmer_a);
        const InitCondition init =
            InitCondition::points(Vec(k, 1.0), Vec(k, -1.0));
        for (double eps : plan.epsilons) {
            SimParams params;
            params.epsilon = eps;
            params.step = plan.step;
            params.max_time = plan.max_time;
            params.seed = stream_family(plan.seed, cell_index++);
            const BatchResult batch = run_batch(spec, params, init, InstrumentConfig{},
                                                plan.samples, plan.workers);
            QuadraticCell cell;
            cell.k = k;
            cell.epsilon = eps;
            cell.lambda_min = lambda;
            cell.estimate = estimate_rate(batch.records, params.max_time, plan.grid);
            if (!out_dir.empty()) {
                const std::string tag = "k" + std::to_string(k) + "_eps" + eps_tag(eps);
                write_records_csv(out_dir + "/records_" + tag + ".csv", batch.records);
                write_json_file(out_dir + "/estimate_" + tag + ".json",
                                estimate_to_json(cell.estimate));
                write_survival_plot_csv(out_dir + "/survival_" + tag + ".csv", cell.estimate);
            }
            report.cells.push_back(std::move(cell));
        }
    }
    if (!out_dir.empty()) {
        json j;
        j["schema_version"] = kSchemaVersion;
        j["experiment"] = "quadratic_tails";
        j["seed"] = plan.seed;
        j["samples"] = plan.samples;
        json cells = json::array();
        for (const auto& c : report.cells)
            cells.push_back(json{{"k", c.k},
                                 {"epsilon", c.epsilon},
                                 {"lambda_min", c.lambda_min},
                                 {"rate", c.estimate.ok() ? c.estimate.rate_r : 0.0},
                                 {"status", tail_status_name(c.estimate.status)}});
        j["cells"] = cells;
        write_json_file(out_dir + "/report.json", j);
    }
    return report;
}

// ---------------------------------------------------------------------------
// Step-size study
// ---------------------------------------------------------------------------

StepSizeReport run_step_size_study(const StepSizePlan& plan, const std::string& out_dir) {
    ensure_dir(out_dir);
    if (plan.hs.empty() || plan.subdivisions.empty())
        throw std::invalid_argument("step-size plan: empty grids");

    const PotentialSpec spec = PotentialSpec::lehmer(plan.lehmer_k);
    const InitCondition init =
        InitCondition::points(Vec(plan.lehmer_k, 1.0), Vec(plan.lehmer_k, -1.0));

    StepSizeReport report;
    for (std::size_t hi = 0; hi < plan.hs.size(); ++hi) {
        const double h = plan.hs[hi];
        StepSizeEntry entry;
        entry.h = h;
        for (std::size_t ni = 0; ni < plan.subdivisions.size(); ++ni) {
            const int sub = plan.subdivisions[ni];
            const double h1 = h / sub;
            SimParams params;
            params.epsilon = plan.epsilon;
            params.step = h;
            params.max_time = plan.max_time;
            params.seed = stream_family(plan.seed, hi * 64 + ni);

            std::vector<double> diffs(plan.samples,
                                      std::numeric_limits<double>::quiet_NaN());
            parallel_samples(plan.samples, plan.workers, [&](long i) {
                const FirstPassagePair pair =
                    sample_first_passage_pair(spec, params, init, h1, i);
                if (!pair.censored_coarse && !pair.censored_fine)
                    diffs[i] = pair.tau_coarse - pair.tau_fine;
            });
            double sum = 0.0;
            long count = 0;
            for (double d : diffs)
                if (!std::isnan(d)) {
                    sum += d;
                    ++count;
                }
            if (count == 0) throw std::runtime_error("step-size study: all pairs censored");
            entry.sqrt_h1.push_back(std::sqrt(h1));
            entry.mean_diff.push_back(sum / count);
        }
        const SimpleFit inner = fit_line(entry.sqrt_h1, entry.mean_diff);
        entry.extrapolated_diff = inner.intercept;
        entry.inner_r2 = inner.r2;
        report.entries.push_back(std::move(entry));
    }

    std::vector<double> xs, ys;
    for (const auto& e : report.entries) {
        xs.push_back(std::sqrt(e.h));
        ys.push_back(e.extrapolated_diff);
    }
    const SimpleFit outer = fit_line(xs, ys);
    report.slope = outer.slope;
    report.intercept = outer.intercept;
    report.r2 = outer.r2;

    if (!out_dir.empty()) {
        json j;
        j["schema_version"] = kSchemaVersion;
        j["experiment"] = "step_size_study";
        j["seed"] = plan.seed;
        j["samples"] = plan.samples;
        json entries = json::array();
        for (const auto& e : report.entries)
            entries.push_back(json{{"h", e.h},
                                   {"sqrt_h1", e.sqrt_h1},
                                   {"mean_diff", e.mean_diff},
                                   {"extrapolated_diff", e.extrapolated_diff},
                                   {"inner_r2", e.inner_r2}});
        j["entries"] = entries;
        j["fit"] = json{{"slope", report.slope}, {"intercept", report.intercept}, {"r2", report.r2}};
        write_json_file(out_dir + "/report.json", j);
    }
    return report;
}

// ---------------------------------------------------------------------------
// Barrier sweeps
// ---------------------------------------------------------------------------

BarrierSweepReport run_barrier_sweep(const BarrierSweepPlan& plan, const std::string& out_dir) {
    ensure_dir(out_dir);
    BarrierSweepReport report;
    report.label = plan.label;
    report.rates = sweep(plan.potential, plan.sweep, plan.init, plan.budget);

    const auto usable = report.rates.usable_entries();
    if (static_cast<int>(usable.size()) >= 2)
        report.extrapolation = extrapolate(report.rates, plan.use_smallest);
    if (static_cast<int>(usable.size()) >= 3)
        report.verdict = classify(report.rates, plan.flatness_tol);

    if (!out_dir.empty()) {
        write_json_file(out_dir + "/sweep.json", sweep_to_json(report.rates));
        for (const auto& e : report.rates.entries) {
            const std::string tag = "eps" + eps_tag(e.epsilon);
            write_json_file(out_dir + "/estimate_" + tag + ".json",
                            estimate_to_json(e.estimate));
            write_survival_plot_csv(out_dir + "/survival_" + tag + ".csv", e.estimate);
        }
        json j;
        j["schema_version"] = kSchemaVersion;
        j["experiment"] = "barrier_sweep";
        j["label"] = plan.label;
        j["potential"] = spec_to_json(plan.potential);
        j["seed"] = plan.sweep.seed;
        j["samples"] = plan.budget.n_samples;
        if (report.extrapolation) {
            j["extrapolation"] = barrier_to_json(*report.extrapolation);
            write_extrapolation_csv(out_dir + "/extrapolation.csv", report.rates,
                                    *report.extrapolation);
        }
        if (report.verdict) j["verdict"] = verdict_name(*report.verdict);
        write_json_file(out_dir + "/report.json", j);
    }
    return report;
}

BarrierSweepPlan double_well_barrier_plan(std::uint64_t seed, long samples) {
    BarrierSweepPlan plan;
    plan.label = "double_well";
    plan.potential = PotentialSpec::double_well();
    plan.sweep.epsilons = {0.4, 0.45, 0.5, 0.6, 0.7};
    plan.sweep.max_times = {1000.0, 1200.0, 800.0, 400.0, 200.0};
    plan.sweep.step = 1e-3;
    plan.sweep.seed = seed;
    // one trajectory per minimum: the sweep watches the shallow-side escape
    plan.init = InitCondition::points(Vec{0.9740}, Vec{-1.0241});
    plan.budget.n_samples = samples;
    plan.use_smallest = 5;
    return plan;
}

BarrierSweepPlan ips_barrier_plan(double sigma, std::uint64_t seed, long samples,
                                  bool largest_five_only) {
    BarrierSweepPlan plan;
    plan.label = "interacting_particles";
    plan.potential = PotentialSpec::interacting_particles(3, sigma);
    if (largest_five_only) {
        plan.sweep.epsilons = {0.47, 0.5, 0.55, 0.6, 0.7};
        plan.sweep.max_times = {400.0, 400.0, 300.0, 250.0, 150.0};
        plan.use_smallest = 5;
    } else {
        plan.sweep.epsilons = {0.4, 0.41, 0.42, 0.43, 0.45, 0.47, 0.5, 0.55, 0.6, 0.7};
        plan.sweep.max_times = {4000.0, 3500.0, 3000.0, 2500.0, 1500.0,
                                400.0,  400.0,  300.0,  250.0,  150.0};
        plan.use_smallest = 6;
    }
    plan.sweep.step = 1e-3;
    plan.sweep.seed = seed;
    plan.init = InitCondition::points(Vec{1.0, 1.0, 1.0}, Vec{-1.0, -1.0, -1.0});
    plan.budget.n_samples = samples;
    return plan;
}

BarrierSweepPlan rosenbrock_tails_plan(std::uint64_t seed, long samples) {
    BarrierSweepPlan plan;
    plan.label = "rosenbrock_4d";
    plan.potential = PotentialSpec::rosenbrock(4, 1.0, 20.0);
    plan.sweep.epsilons = {0.003, 0.01, 0.03, 0.1};
    plan.sweep.max_times = {2000.0, 2000.0, 2000.0, 2000.0};
    plan.sweep.step = 1e-3;
    plan.sweep.seed = seed;
    // one trajectory pinned at the reported secondary minimum
    plan.init = InitCondition::points(Vec{1.0, 1.0, 1.0, 1.0}, Vec{-1.0, 1.0, 1.0, 1.0});
    plan.budget.n_samples = samples;
    plan.use_smallest = 4;
    return plan;
}

std::vector<BarrierSweepPlan> ann_barrier_plans(std::uint64_t seed, long samples) {
    const std::uint64_t data_seed = 20240501;  // one training set shared by all sizes
    struct SizePair {
        int n1, n2;
        const char* label;
    };
    const SizePair sizes[] = {{4, 3, "ann_small"}, {10, 10, "ann_medium"}, {20, 20, "ann_big"}};
    std::vector<BarrierSweepPlan> plans;
    int idx = 0;
    for (const auto& sz : sizes) {
        BarrierSweepPlan plan;
        plan.label = sz.label;
        plan.potential = PotentialSpec::ann_loss(sz.n1, sz.n2, data_seed, 100);
        plan.sweep.epsilons = {0.7, 0.8, 0.9, 1.0, 1.1, 1.2};
        plan.sweep.max_times = std::vector<double>(6, 80.0);
        plan.sweep.step = 1e-3;
        plan.sweep.seed = seed + 7919 * idx++;
        const int dim = plan.potential.dimension;
        plan.init = InitCondition::uniform(Vec(dim, -1.0), Vec(dim, 1.0));
        plan.budget.n_samples = samples;
        plan.budget.grid.min_uncensored = std::min<long>(1000, samples / 4);
        plan.use_smallest = 6;
        plan.flatness_tol = 0.25;
        plans.push_back(std::move(plan));
    }
    return plans;
}

AnnBarrierReport run_ann_barrier(std::uint64_t seed, long samples, int workers,
                                 const std::string& out_dir) {
    ensure_dir(out_dir);
    AnnBarrierReport report;
    for (auto& plan : ann_barrier_plans(seed, samples)) {
        plan.budget.workers = workers;
        const std::string sub = out_dir.empty() ? "" : out_dir + "/" + plan.label;
        report.networks.push_back(run_barrier_sweep(plan, sub));
        const auto& net = report.networks.back();
        report.intercepts.push_back(net.extrapolation ? net.extrapolation->fit_intercept : 0.0);
    }
    report.ordering_ok = report.intercepts.size() == 3 &&
                         report.intercepts[0] > report.intercepts[1] &&
                         report.intercepts[1] > report.intercepts[2];
    if (!out_dir.empty()) {
        json j;
        j["schema_version"] = kSchemaVersion;
        j["experiment"] = "ann_barrier";
        j["seed"] = seed;
        j["intercepts"] = report.intercepts;
        j["ordering_ok"] = report.ordering_ok;
        write_json_file(out_dir + "/report.json", j);
    }
    return report;
}

// ---------------------------------------------------------------------------
// (H1)
// ---------------------------------------------------------------------------

H1Plan h1_plan_ips(std::uint64_t seed, long samples) {
    H1Plan plan;
    plan.potential = PotentialSpec::interacting_particles(3, 0.05);
    plan.x0 = Vec{1.0, 1.0, 1.0};
    plan.y0 = Vec{-1.0, -1.0, -1.0};
    plan.epsilons = {0.6, 0.65, 0.7, 0.75};
    plan.max_time = 2000.0;
    plan.samples = samples;
    plan.seed = seed;
    return plan;
}

H1Plan h1_plan_double_well(std::uint64_t seed, long samples) {
    H1Plan plan;
    plan.potential = PotentialSpec::double_well();
    plan.x0 = Vec{0.9740};
    plan.y0 = Vec{-1.0241};
    plan.epsilons = {0.5, 0.6, 0.7};
    plan.max_time = 2000.0;
    plan.samples = samples;
    plan.seed = seed;
    return plan;
}

H1Report run_h1_check(const H1Plan& plan, const std::string& out_dir) {
    ensure_dir(out_dir);
    H1Report report;
    const InitCondition init = InitCondition::points(plan.x0, plan.y0);
    InstrumentConfig ins;
    ins.basins = true;
    ins.stop_on_h1_event = true;
    for (std::size_t i = 0; i < plan.epsilons.size(); ++i) {
        SimParams params;
        params.epsilon = plan.epsilons[i];
        params.step = plan.step;
        params.max_time = plan.max_time;
        params.seed = stream_family(plan.seed, i);
        const BatchResult batch =
            run_batch(plan.potential, params, init, ins, plan.samples, plan.workers);
        H1Entry entry;
        entry.epsilon = plan.epsilons[i];
        entry.samples = static_cast<long>(batch.records.size());
        for (const auto& r : batch.records) {
            const bool x_entered = observed(r.kappa_x);
            const bool y_left = observed(r.y_first_leave);
            if (x_entered) {
                ++entry.conditioning;
                if (!y_left || r.y_first_leave >= r.kappa_x) ++entry.stayed;
            } else if (y_left) {
                ++entry.y_left_first;
            } else {
                ++entry.no_event;
            }
        }
        entry.defined = entry.conditioning > 0;
        entry.frequency = entry.defined
                              ? static_cast<double>(entry.stayed) / entry.conditioning
                              : 0.0;
        report.entries.push_back(entry);
    }
    if (!out_dir.empty()) {
        json j;
        j["schema_version"] = kSchemaVersion;
        j["experiment"] = "h1_check";
        j["potential"] = spec_to_json(plan.potential);
        j["seed"] = plan.seed;
        json entries = json::array();
        for (const auto& e : report.entries)
            entries.push_back(json{{"epsilon", e.epsilon},
                                   {"samples", e.samples},
                                   {"conditioning_events", e.conditioning},
                                   {"stayed", e.stayed},
                                   {"y_left_first", e.y_left_first},
                                   {"no_event", e.no_event},
                                   {"defined", e.defined},
                                   {"conditional_frequency", e.frequency}});
        j["entries"] = entries;
        write_json_file(out_dir + "/report.json", j);
    }
    return report;
}

// ---------------------------------------------------------------------------
// (H2)
// ---------------------------------------------------------------------------

H2Plan h2_plan_double_well(std::uint64_t seed) {
    H2Plan plan;
    plan.potential = PotentialSpec::double_well();
    // both start in the shallow right basin, as in the verification study
    plan.init = InitCondition::uniform(Vec{0.1}, Vec{1.5});
    plan.epsilons = {0.1, 0.3, 0.6};
    plan.samples_per_eps = {400000, 200000, 200000};
    plan.max_time = 400.0;
    plan.conditional_grid.min_uncensored = 400;
    plan.probe_starts = {Vec{0.05129}, Vec{0.5}, Vec{1.2}};  // first one on the basin boundary
    plan.probe_samples = 20000;
    plan.seed = seed;
    return plan;
}

H2Report run_h2_check(const H2Plan& plan, const std::string& out_dir) {
    ensure_dir(out_dir);
    H2Report report;
    InstrumentConfig ins;
    ins.basins = true;
    ins.stop_on_separation = true;

    for (std::size_t i = 0; i < plan.epsilons.size(); ++i) {
        SimParams params;
        params.epsilon = plan.epsilons[i];
        params.step = plan.step;
        params.max_time = plan.max_time;
        params.seed = stream_family(plan.seed, i);
        const long n = i < plan.samples_per_eps.size() ? plan.samples_per_eps[i] : plan.samples;
        const BatchResult batch =
            run_batch(plan.potential, params, plan.init, ins, n, plan.workers);

        H2Entry entry;
        entry.epsilon = params.epsilon;
        entry.samples = static_cast<long>(batch.records.size());
        std::vector<double> coupled_times, exit_times;
        for (const auto& r : batch.records) {
            if (r.status == SampleStatus::Coupled) {
                ++entry.n_coupled;
                coupled_times.push_back(r.tau_c);
            } else if (r.status == SampleStatus::Separated) {
                ++entry.n_exit;
                exit_times.push_back(r.tau_sep);
            } else if (r.status == SampleStatus::Censored) {
                ++entry.n_censored;
            }
        }
        const long resolved = entry.n_coupled + entry.n_exit;
        entry.p_coupled = resolved > 0 ? static_cast<double>(entry.n_coupled) / resolved : 0.0;
        entry.coupled_tail =
            estimate_rate_values(coupled_times, 0, params.max_time, plan.conditional_grid);
        entry.exit_tail =
            estimate_rate_values(exit_times, 0, params.max_time, plan.conditional_grid);
        report.entries.push_back(std::move(entry));
    }

    // fixed-X0 probes of the coupling probability, boundary start included
    for (std::size_t p = 0; p < plan.probe_starts.size(); ++p) {
        for (std::size_t i = 0; i < plan.epsilons.size(); ++i) {
            SimParams params;
            params.epsilon = plan.epsilons[i];
            params.step = plan.step;
            params.max_time = plan.max_time;
            params.seed = stream_family(plan.seed, 100 + p * 16 + i);
            // the probe keeps the plan's uniform law for Y
            const Vec lo = plan.init.mode == InitCondition::Mode::Uniform
                               ? plan.init.lo
                               : Vec(plan.probe_starts[p].size(), 0.1);
            const Vec hi = plan.init.mode == InitCondition::Mode::Uniform
                               ? plan.init.hi
                               : Vec(plan.probe_starts[p].size(), 1.5);
            const InitCondition init =
                InitCondition::fixed_x_uniform_y(plan.probe_starts[p], lo, hi);
            const BatchResult batch =
                run_batch(plan.potential, params, init, ins, plan.probe_samples, plan.workers);
            H2Probe probe;
            probe.epsilon = params.epsilon;
            probe.x0 = plan.probe_starts[p];
            probe.samples = static_cast<long>(batch.records.size());
            const long resolved = batch.n_coupled + batch.n_separated;
            probe.p_coupled =
                resolved > 0 ? static_cast<double>(batch.n_coupled) / resolved : 0.0;
            report.probes.push_back(std::move(probe));
        }
    }

    if (!out_dir.empty()) {
        json j;
        j["schema_version"] = kSchemaVersion;
        j["experiment"] = "h2_check";
        j["potential"] = spec_to_json(plan.potential);
        j["seed"] = plan.seed;
        json entries = json::array();
        for (const auto& e : report.entries)
            entries.push_back(json{{"epsilon", e.epsilon},
                                   {"samples", e.samples},
                                   {"n_coupled", e.n_coupled},
                                   {"n_exit", e.n_exit},
                                   {"n_censored", e.n_censored},
                                   {"p_coupled", e.p_coupled},
                                   {"coupled_tail", estimate_to_json(e.coupled_tail)},
                                   {"exit_tail", estimate_to_json(e.exit_tail)}});
        j["entries"] = entries;
        json probes = json::array();
        for (const auto& p : report.probes)
            probes.push_back(json{{"epsilon", p.epsilon},
                                  {"x0", p.x0},
                                  {"samples", p.samples},
                                  {"p_coupled", p.p_coupled}});
        j["probes"] = probes;
        write_json_file(out_dir + "/report.json", j);
    }
    return report;
}

// ---------------------------------------------------------------------------
// (H3)
// ---------------------------------------------------------------------------

H3Plan h3_plan_ips(std::uint64_t seed, long samples) {
    H3Plan plan;
    plan.potential = PotentialSpec::interacting_particles(3, 0.05);
    plan.x0 = Vec{1.0, 1.0, 1.0};
    plan.y0 = Vec{-1.0, -1.0, -1.0};
    plan.epsilons = {0.5, 0.55, 0.6};
    plan.max_times = {800.0, 500.0, 300.0};
    plan.samples = samples;
    plan.conditional_grid.min_uncensored = 1000;
    plan.seed = seed;
    return plan;
}

H3Report run_h3_check(const H3Plan& plan, const std::string& out_dir) {
    ensure_dir(out_dir);
    H3Report report;
    const InitCondition init = InitCondition::points(plan.x0, plan.y0);
    InstrumentConfig ins;
    ins.basins = true;
    ins.track_xi1 = true;
    for (std::size_t i = 0; i < plan.epsilons.size(); ++i) {
        SimParams params;
        params.epsilon = plan.epsilons[i];
        params.step = plan.step;
        params.max_time = i < plan.max_times.size() ? plan.max_times[i] : plan.max_time;
        params.seed = stream_family(plan.seed, i);
        const BatchResult batch =
            run_batch(plan.potential, params, init, ins, plan.samples, plan.workers);

        H3Entry entry;
        entry.epsilon = params.epsilon;
        entry.samples = static_cast<long>(batch.records.size());
        std::vector<double> overshoots;
        for (const auto& r : batch.records) {
            if (observed(r.kappa_x) && observed(r.kappa_y)) {
                if (observed(r.xi1))
                    overshoots.push_back(r.xi1 - std::max(r.kappa_x, r.kappa_y));
                else
                    ++entry.overshoot_unresolved;
            }
        }
        entry.overshoot_observed = static_cast<long>(overshoots.size());
        if (!overshoots.empty()) {
            std::vector<double> sorted = overshoots;
            std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
            entry.overshoot_median = sorted[sorted.size() / 2];
        }
        entry.overshoot_tail =
            estimate_rate_values(overshoots, 0, params.max_time, plan.conditional_grid);
        entry.coupling_tail = estimate_rate(batch.records, params.max_time, plan.conditional_grid);
        entry.steeper = entry.overshoot_tail.ok() && entry.coupling_tail.ok() &&
                        entry.overshoot_tail.rate_r > entry.coupling_tail.rate_r;
        report.entries.push_back(std::move(entry));
    }
    if (!out_dir.empty()) {
        json j;
        j["schema_version"] = kSchemaVersion;
        j["experiment"] = "h3_check";
        j["potential"] = spec_to_json(plan.potential);
        j["seed"] = plan.seed;
        json entries = json::array();
        for (const auto& e : report.entries)
            entries.push_back(json{{"epsilon", e.epsilon},
                                   {"samples", e.samples},
                                   {"overshoot_observed", e.overshoot_observed},
                                   {"overshoot_unresolved", e.overshoot_unresolved},
                                   {"overshoot_median", e.overshoot_median},
                                   {"overshoot_tail", estimate_to_json(e.overshoot_tail)},
                                   {"coupling_tail", estimate_to_json(e.coupling_tail)},
                                   {"steeper", e.steeper}});
        j["entries"] = entries;
        write_json_file(out_dir + "/report.json", j);
    }
    return report;
}

}  // namespace wells
