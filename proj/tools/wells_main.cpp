// wells: landscape classification by coupled Langevin sampling.
//
// Subcommands: sample (coupling-time batches), estimate (tail slope from a
// sample file), sweep (noise sweep + zero-noise extrapolation), oracle
// (grid minimax / string-method barriers), experiment (canned studies).
#include <atomic>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "wells/barrier.hpp"
#include "wells/coupling.hpp"
#include "wells/experiments.hpp"
#include "wells/io.hpp"
#include "wells/oracle.hpp"
#include "wells/potential.hpp"
#include "wells/tail.hpp"

namespace {

std::atomic<bool> g_cancel{false};

void handle_sigint(int) { g_cancel.store(true); }

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumerical = 3;

struct CommonOpts {
    std::string config_path;
    std::string out_dir;
    long seed = -1;       // -1: take from config
    int workers = 0;      // 0: hardware concurrency
    long budget = -1;     // -1: take from config
};

wells::RunConfig load_config(const CommonOpts& opts, bool need_seed) {
    wells::RunConfig cfg = wells::parse_run_config(wells::read_json_file(opts.config_path));
    if (opts.seed >= 0) {
        cfg.sim.seed = static_cast<std::uint64_t>(opts.seed);
        cfg.seed_set = true;
    }
    if (need_seed && !cfg.seed_set)
        throw wells::ConfigError("config.seed: missing (pass --seed or set it in the config)");
    if (opts.budget >= 0) cfg.samples = opts.budget;
    if (opts.workers > 0) cfg.workers = opts.workers;
    return cfg;
}

void write_sample_manifest(const std::string& dir, const wells::RunConfig& cfg,
                           const wells::BatchResult& batch) {
    wells::json m;
    m["schema_version"] = wells::kSchemaVersion;
    m["kind"] = "samples";
    m["potential"] = wells::spec_to_json(cfg.potential);
    m["sim"] = wells::sim_to_json(cfg.sim);
    m["init"] = wells::init_to_json(cfg.init);
    m["samples_requested"] = cfg.samples;
    m["counts"] = wells::json{{"coupled", batch.n_coupled},
                              {"censored", batch.n_censored},
                              {"diverged", batch.n_diverged},
                              {"separated", batch.n_separated}};
    m["censor_fraction"] = batch.censor_fraction();
    m["partial"] = batch.partial;
    wells::write_json_file(dir + "/manifest.json", m);
}

int cmd_sample(const CommonOpts& opts) {
    wells::RunConfig cfg = load_config(opts, true);
    std::filesystem::create_directories(opts.out_dir);
    const wells::BatchResult batch =
        wells::run_batch(cfg.potential, cfg.sim, cfg.init, cfg.instrument, cfg.samples,
                         cfg.workers, &g_cancel);
    wells::write_records_csv(opts.out_dir + "/records.csv", batch.records);
    write_sample_manifest(opts.out_dir, cfg, batch);
    std::printf("wrote %zu records to %s (coupled %ld, censored %ld, diverged %ld)%s\n",
                batch.records.size(), opts.out_dir.c_str(), batch.n_coupled, batch.n_censored,
                batch.n_diverged, batch.partial ? " [partial]" : "");
    return kExitOk;
}

int cmd_estimate(const std::string& in_dir, const std::string& out_file,
                 const std::string& config_path) {
    wells::GridConfig grid;
    if (!config_path.empty()) {
        const wells::json root = wells::read_json_file(config_path);
        if (root.contains("estimate"))
            grid = wells::grid_from_json(root.at("estimate"), "config.estimate");
    }
    const wells::json manifest = wells::read_json_file(in_dir + "/manifest.json");
    const double max_time = manifest.at("sim").at("max_time").get<double>();
    const auto records = wells::read_records_csv(in_dir + "/records.csv", max_time);
    const wells::TailEstimate est = wells::estimate_rate(records, max_time, grid);
    wells::write_json_file(out_file, wells::estimate_to_json(est));
    wells::write_survival_plot_csv(out_file + ".survival.csv", est);
    if (!est.ok()) {
        std::printf("estimate: %s (%s)\n", wells::tail_status_name(est.status).c_str(),
                    est.message.c_str());
        return kExitNumerical;
    }
    std::printf("rate %.6g  t* %.6g  censoring %.2f%%%s\n", est.rate_r, est.t_star,
                100.0 * est.censor_fraction, est.high_censoring ? " [high]" : "");
    return kExitOk;
}

int cmd_sweep(const CommonOpts& opts) {
    wells::RunConfig cfg = load_config(opts, true);
    if (!cfg.sweep_section)
        throw wells::ConfigError("config.sweep: missing (required by the sweep command)");
    std::filesystem::create_directories(opts.out_dir);

    wells::BarrierSweepPlan plan;
    plan.label = "sweep";
    plan.potential = cfg.potential;
    plan.sweep.epsilons = cfg.sweep_section->epsilons;
    plan.sweep.max_times = cfg.sweep_section->max_times;
    plan.sweep.step = cfg.sim.step;
    plan.sweep.threshold_factor = cfg.sim.threshold_factor;
    plan.sweep.divergence_radius = cfg.sim.divergence_radius;
    plan.sweep.seed = cfg.sim.seed;
    plan.init = cfg.init;
    plan.budget.n_samples = cfg.samples;
    plan.budget.workers = cfg.workers;
    plan.budget.grid = cfg.grid;
    plan.use_smallest = cfg.sweep_section->use_smallest;
    plan.flatness_tol = cfg.sweep_section->flatness_tol;

    const wells::BarrierSweepReport report = wells::run_barrier_sweep(plan, opts.out_dir);
    if (report.extrapolation) {
        std::printf("intercept (2 H_U) %.6g  H_U %.6g  barrier %s\n",
                    report.extrapolation->fit_intercept, report.extrapolation->h_u,
                    report.extrapolation->barrier_detected ? "detected" : "not detected");
    }
    if (report.verdict)
        std::printf("verdict: %s\n", wells::verdict_name(*report.verdict).c_str());
    return kExitOk;
}

int cmd_oracle(const CommonOpts& opts) {
    const wells::RunConfig cfg = load_config(opts, false);
    if (!cfg.oracle_section)
        throw wells::ConfigError("config.oracle: missing (required by the oracle command)");
    std::filesystem::create_directories(opts.out_dir);
    const auto& sec = *cfg.oracle_section;
    const wells::PotentialSpec& spec = cfg.potential;
    wells::json out;
    out["schema_version"] = wells::kSchemaVersion;
    out["potential"] = wells::spec_to_json(spec);

    wells::CriticalPointSet minima = wells::known_minima(spec);
    if (minima.minima.empty())
        throw wells::ConfigError("oracle: no known minima for this potential kind");

    if (sec.mode == "grid" || sec.mode == "both") {
        std::vector<wells::GridAxis> axes = sec.axes;
        if (axes.empty()) {
            if (spec.kind == wells::PotentialKind::DoubleWell1D)
                axes = {{-2.0, 2.0, 4001}};
            else if (spec.kind == wells::PotentialKind::InteractingParticles)
                axes = std::vector<wells::GridAxis>(3, {-1.7, 1.6, 61});
            else
                throw wells::ConfigError("config.oracle.bounds: required for this potential");
        }
        const wells::GridGraph grid = wells::build_grid(spec, axes, false, cfg.workers);
        const double h_u = wells::essential_barrier_height_grid(grid, minima);
        out["grid"] = wells::json{{"h_u", h_u},
                                  {"nodes", grid.node_count()},
                                  {"axes", axes.size()}};
    }

    if (sec.mode == "string" || sec.mode == "both") {
        wells::Vec start, end;
        if (sec.string_cfg.has_endpoints) {
            start = sec.string_cfg.start;
            end = sec.string_cfg.end;
        } else {
            if (minima.minima.size() < 2)
                throw wells::ConfigError("oracle: string mode needs two minima or endpoints");
            start = minima.minima.back().position;   // highest minimum
            end = minima.minima.front().position;    // global minimum
        }
        wells::StringConfig string_cfg = sec.string_cfg.config;
        if (string_cfg.waypoints.empty())
            string_cfg.waypoints = wells::sign_staircase_waypoints(minima, start, end);
        const wells::StringPath path = wells::string_method(spec, start, end, string_cfg);
        const auto barriers = wells::barriers_along_path(path);
        const double h_u = wells::essential_barrier_along_path(path);
        wells::json jb = wells::json::array();
        for (const auto& b : barriers)
            jb.push_back(wells::json{{"peak_energy", b.peak_energy},
                                     {"ascent", b.ascent},
                                     {"descent", b.descent}});
        out["string"] = wells::json{{"h_u", h_u},
                                    {"converged", path.converged},
                                    {"iterations", path.iterations},
                                    {"barriers", jb}};
        // MEP export: arclength, coordinates, energy
        std::ofstream mep(opts.out_dir + "/mep.csv", std::ios::binary);
        mep << "arclength";
        for (int d = 0; d < spec.dimension; ++d) mep << ",x" << d;
        mep << ",energy\n";
        const auto arcs = path.arc_lengths();
        for (std::size_t i = 0; i < path.images.size(); ++i) {
            mep << wells::format_double(arcs[i]);
            for (double v : path.images[i]) mep << ',' << wells::format_double(v);
            mep << ',' << wells::format_double(path.energies[i]) << '\n';
        }
    }

    wells::write_json_file(opts.out_dir + "/oracle.json", out);
    std::printf("oracle report written to %s\n", opts.out_dir.c_str());
    return kExitOk;
}

int cmd_experiment(const std::string& name, const CommonOpts& opts) {
    const std::uint64_t seed = opts.seed >= 0 ? static_cast<std::uint64_t>(opts.seed) : 1;
    const int workers = opts.workers;
    std::filesystem::create_directories(opts.out_dir);

    if (name == "quadratic_tails") {
        wells::QuadraticTailsPlan plan;
        plan.seed = seed;
        plan.workers = workers;
        if (opts.budget > 0) plan.samples = opts.budget;
        wells::run_quadratic_tails(plan, opts.out_dir);
    } else if (name == "step_size") {
        wells::StepSizePlan plan;
        plan.seed = seed;
        plan.workers = workers;
        if (opts.budget > 0) plan.samples = opts.budget;
        wells::run_step_size_study(plan, opts.out_dir);
    } else if (name == "double_well_barrier") {
        auto plan = wells::double_well_barrier_plan(seed, opts.budget > 0 ? opts.budget : 100000);
        plan.budget.workers = workers;
        wells::run_barrier_sweep(plan, opts.out_dir);
    } else if (name == "ips_barrier") {
        auto plan =
            wells::ips_barrier_plan(0.05, seed, opts.budget > 0 ? opts.budget : 100000);
        plan.budget.workers = workers;
        wells::run_barrier_sweep(plan, opts.out_dir);
    } else if (name == "rosenbrock_tails") {
        auto plan = wells::rosenbrock_tails_plan(seed, opts.budget > 0 ? opts.budget : 20000);
        plan.budget.workers = workers;
        wells::run_barrier_sweep(plan, opts.out_dir);
    } else if (name == "ann_barrier") {
        wells::run_ann_barrier(seed, opts.budget > 0 ? opts.budget : 10000, workers,
                               opts.out_dir);
    } else if (name == "h1") {
        auto plan = wells::h1_plan_ips(seed, opts.budget > 0 ? opts.budget : 100000);
        plan.workers = workers;
        wells::run_h1_check(plan, opts.out_dir);
    } else if (name == "h2") {
        auto plan = wells::h2_plan_double_well(seed);
        plan.workers = workers;
        if (opts.budget > 0) {
            plan.samples = opts.budget;
            plan.samples_per_eps.clear();
        }
        wells::run_h2_check(plan, opts.out_dir);
    } else if (name == "h3") {
        auto plan = wells::h3_plan_ips(seed, opts.budget > 0 ? opts.budget : 100000);
        plan.workers = workers;
        wells::run_h3_check(plan, opts.out_dir);
    } else {
        throw wells::ConfigError(
            "unknown experiment '" + name +
            "' (expected quadratic_tails, step_size, double_well_barrier, ips_barrier, "
            "rosenbrock_tails, ann_barrier, h1, h2, or h3)");
    }
    std::printf("experiment %s written to %s\n", name.c_str(), opts.out_dir.c_str());
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    std::signal(SIGINT, handle_sigint);

    CLI::App app{"landscape classification by coupled overdamped Langevin sampling"};
    app.require_subcommand(1);

    CommonOpts opts;
    std::string estimate_in, estimate_out, experiment_name;

    auto add_common = [&](CLI::App* cmd, bool with_config) {
        if (with_config)
            cmd->add_option("--config", opts.config_path, "JSON configuration file")
                ->required()
                ->envname("WELLS_CONFIG");
        cmd->add_option("--out", opts.out_dir, "output directory")
            ->required()
            ->envname("WELLS_OUT");
        cmd->add_option("--seed", opts.seed, "seed override")->envname("WELLS_SEED");
        cmd->add_option("--workers", opts.workers, "worker threads (0 = all cores)")
            ->envname("WELLS_WORKERS");
        cmd->add_option("--budget", opts.budget, "sample-count override")
            ->envname("WELLS_BUDGET");
    };

    add_common(app.add_subcommand("sample", "simulate a coupling-time batch"), true);
    add_common(app.add_subcommand("sweep", "noise sweep with extrapolation"), true);
    add_common(app.add_subcommand("oracle", "grid / string barrier oracles"), true);

    auto* est = app.add_subcommand("estimate", "tail estimate from a sample directory");
    est->add_option("--in", estimate_in, "sample directory (records.csv + manifest.json)")
        ->required();
    est->add_option("--out", estimate_out, "output JSON path")->required();
    est->add_option("--config", opts.config_path, "config carrying an estimate section");

    auto* exp = app.add_subcommand("experiment", "run a canned study");
    exp->add_option("--name", experiment_name, "experiment name")->required();
    add_common(exp, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (app.got_subcommand("sample")) return cmd_sample(opts);
        if (app.got_subcommand("sweep")) return cmd_sweep(opts);
        if (app.got_subcommand("oracle")) return cmd_oracle(opts);
        if (app.got_subcommand("estimate"))
            return cmd_estimate(estimate_in, estimate_out, opts.config_path);
        if (app.got_subcommand("experiment")) return cmd_experiment(experiment_name, opts);
    } catch (const wells::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitData;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "input error: %s\n", e.what());
        return kExitData;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitNumerical;
    }
    return kExitUsage;
}
