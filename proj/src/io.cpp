#include "wells/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace wells {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
    return j;
}

void write_json_file(const std::string& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << j.dump(2) << "\n";
}

void check_keys(const json& obj, const std::string& where,
                std::initializer_list<const char*> allowed) {
    if (!obj.is_object()) throw ConfigError(where + ": expected an object");
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!ok.count(it.key()))
            throw ConfigError(where + "." + it.key() + ": unknown key");
}

namespace {

double require_number(const json& obj, const std::string& where, const char* key) {
    if (!obj.contains(key)) throw ConfigError(where + "." + key + ": missing");
    const auto& v = obj.at(key);
    if (!v.is_number()) throw ConfigError(where + "." + key + ": expected a number");
    return v.get<double>();
}

double number_or(const json& obj, const char* key, double fallback, const std::string& where) {
    if (!obj.contains(key)) return fallback;
    const auto& v = obj.at(key);
    if (!v.is_number()) throw ConfigError(where + "." + key + ": expected a number");
    return v.get<double>();
}

long integer_or(const json& obj, const char* key, long fallback, const std::string& where) {
    if (!obj.contains(key)) return fallback;
    const auto& v = obj.at(key);
    if (!v.is_number_integer()) throw ConfigError(where + "." + key + ": expected an integer");
    return v.get<long>();
}

Vec vec_from_json(const json& v, const std::string& where) {
    if (!v.is_array()) throw ConfigError(where + ": expected an array of numbers");
    Vec out;
    for (const auto& x : v) {
        if (!x.is_number()) throw ConfigError(where + ": expected an array of numbers");
        out.push_back(x.get<double>());
    }
    return out;
}

}  // namespace

json spec_to_json(const PotentialSpec& spec) {
    json j;
    j["kind"] = kind_name(spec.kind);
    switch (spec.kind) {
        case PotentialKind::LehmerQuadratic: j["k"] = spec.lehmer_k; break;
        case PotentialKind::DoubleWell1D: break;
        case PotentialKind::InteractingParticles:
            j["n"] = spec.particles;
            j["sigma"] = spec.interaction;
            break;
        case PotentialKind::Rosenbrock:
            j["n"] = spec.rosen_n;
            j["a"] = spec.rosen_a;
            j["b"] = spec.rosen_b;
            break;
        case PotentialKind::AnnLoss:
            j["n1"] = spec.ann_n1;
            j["n2"] = spec.ann_n2;
            j["data_seed"] = spec.ann_seed;
            j["m"] = spec.ann_m;
            break;
    }
    return j;
}

PotentialSpec spec_from_json(const json& j, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + ": expected an object");
    if (!j.contains("kind")) throw ConfigError(where + ".kind: missing");
    if (!j.at("kind").is_string()) throw ConfigError(where + ".kind: expected a string");
    const std::string kind = j.at("kind").get<std::string>();
    try {
        if (kind == "lehmer_quadratic") {
            check_keys(j, where, {"kind", "k"});
            return PotentialSpec::lehmer(static_cast<int>(integer_or(j, "k", 2, where)));
        }
        if (kind == "double_well_1d") {
            check_keys(j, where, {"kind"});
            return PotentialSpec::double_well();
        }
        if (kind == "interacting_particles") {
            check_keys(j, where, {"kind", "n", "sigma"});
            return PotentialSpec::interacting_particles(
                static_cast<int>(integer_or(j, "n", 3, where)),
                require_number(j, where, "sigma"));
        }
        if (kind == "rosenbrock") {
            check_keys(j, where, {"kind", "n", "a", "b"});
            return PotentialSpec::rosenbrock(static_cast<int>(integer_or(j, "n", 2, where)),
                                             number_or(j, "a", 1.0, where),
                                             number_or(j, "b", 20.0, where));
        }
        if (kind == "ann_loss") {
            check_keys(j, where, {"kind", "n1", "n2", "data_seed", "m"});
            return PotentialSpec::ann_loss(static_cast<int>(integer_or(j, "n1", 4, where)),
                                           static_cast<int>(integer_or(j, "n2", 3, where)),
                                           static_cast<std::uint64_t>(
                                               integer_or(j, "data_seed", 0, where)),
                                           static_cast<int>(integer_or(j, "m", 100, where)));
        }
    } catch (const std::invalid_argument& e) {
        throw ConfigError(where + ": " + e.what());
    }
    throw ConfigError(where + ".kind: unknown potential kind '" + kind + "'");
}

json sim_to_json(const SimParams& p) {
    return json{{"epsilon", p.epsilon},
                {"step", p.step},
                {"threshold_factor", p.threshold_factor},
                {"max_time", p.max_time},
                {"seed", p.seed},
                {"divergence_radius", p.divergence_radius}};
}

SimParams sim_from_json(const json& j, const std::string& where) {
    check_keys(j, where,
               {"epsilon", "step", "threshold_factor", "max_time", "seed", "divergence_radius"});
    SimParams p;
    p.epsilon = require_number(j, where, "epsilon");
    p.step = number_or(j, "step", 1e-3, where);
    p.threshold_factor = number_or(j, "threshold_factor", 2.0, where);
    p.max_time = require_number(j, where, "max_time");
    p.divergence_radius = number_or(j, "divergence_radius", 1e6, where);
    if (j.contains("seed")) p.seed = static_cast<std::uint64_t>(integer_or(j, "seed", 0, where));
    try {
        p.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(where + ": " + e.what());
    }
    return p;
}

json init_to_json(const InitCondition& c) {
    json j;
    switch (c.mode) {
        case InitCondition::Mode::Points:
            j["mode"] = "points";
            j["x0"] = c.x0;
            j["y0"] = c.y0;
            break;
        case InitCondition::Mode::Uniform:
            j["mode"] = "uniform";
            j["lo"] = c.lo;
            j["hi"] = c.hi;
            break;
        case InitCondition::Mode::FixedXUniformY:
            j["mode"] = "fixed_x_uniform_y";
            j["x0"] = c.x0;
            j["lo"] = c.lo;
            j["hi"] = c.hi;
            break;
    }
    return j;
}

InitCondition init_from_json(const json& j, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + ": expected an object");
    if (!j.contains("mode")) throw ConfigError(where + ".mode: missing");
    const std::string mode = j.at("mode").get<std::string>();
    try {
        if (mode == "points") {
            check_keys(j, where, {"mode", "x0", "y0"});
            if (!j.contains("x0") || !j.contains("y0"))
                throw ConfigError(where + ": points mode needs x0 and y0");
            return InitCondition::points(vec_from_json(j.at("x0"), where + ".x0"),
                                         vec_from_json(j.at("y0"), where + ".y0"));
        }
        if (mode == "uniform") {
            check_keys(j, where, {"mode", "lo", "hi"});
            if (!j.contains("lo") || !j.contains("hi"))
                throw ConfigError(where + ": uniform mode needs lo and hi");
            return InitCondition::uniform(vec_from_json(j.at("lo"), where + ".lo"),
                                          vec_from_json(j.at("hi"), where + ".hi"));
        }
        if (mode == "fixed_x_uniform_y") {
            check_keys(j, where, {"mode", "x0", "lo", "hi"});
            if (!j.contains("x0") || !j.contains("lo") || !j.contains("hi"))
                throw ConfigError(where + ": fixed_x_uniform_y mode needs x0, lo, hi");
            return InitCondition::fixed_x_uniform_y(vec_from_json(j.at("x0"), where + ".x0"),
                                                    vec_from_json(j.at("lo"), where + ".lo"),
                                                    vec_from_json(j.at("hi"), where + ".hi"));
        }
    } catch (const std::invalid_argument& e) {
        throw ConfigError(where + ": " + e.what());
    }
    throw ConfigError(where + ".mode: unknown init mode '" + mode + "'");
}

GridConfig grid_from_json(const json& j, const std::string& where) {
    check_keys(j, where, {"points", "min_uncensored", "z", "alpha", "spacing", "min_tail_points"});
    GridConfig g;
    g.points = static_cast<int>(integer_or(j, "points", g.points, where));
    g.min_uncensored = integer_or(j, "min_uncensored", g.min_uncensored, where);
    g.z = number_or(j, "z", g.z, where);
    g.alpha = number_or(j, "alpha", g.alpha, where);
    g.min_tail_points = static_cast<int>(integer_or(j, "min_tail_points", g.min_tail_points, where));
    if (j.contains("spacing")) {
        const std::string s = j.at("spacing").get<std::string>();
        if (s == "uniform")
            g.spacing = GridSpacing::Uniform;
        else if (s == "log")
            g.spacing = GridSpacing::Log;
        else
            throw ConfigError(where + ".spacing: expected 'uniform' or 'log'");
    }
    return g;
}

json grid_to_json(const GridConfig& g) {
    return json{{"points", g.points},
                {"min_uncensored", g.min_uncensored},
                {"z", g.z},
                {"alpha", g.alpha},
                {"spacing", g.spacing == GridSpacing::Uniform ? "uniform" : "log"},
                {"min_tail_points", g.min_tail_points}};
}

json estimate_to_json(const TailEstimate& est) {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["status"] = tail_status_name(est.status);
    j["total"] = est.total;
    j["uncensored"] = est.uncensored;
    j["censor_fraction"] = est.censor_fraction;
    j["high_censoring"] = est.high_censoring;
    if (!est.message.empty()) j["message"] = est.message;
    if (est.ok()) {
        j["slope_a"] = est.slope_a;
        j["intercept_b"] = est.intercept_b;
        j["t_star"] = est.t_star;
        j["n0_index"] = est.n0_index;
        j["rate_r"] = est.rate_r;
        j["violations"] = est.violations;
        j["window_points"] = est.window_points;
    }
    json pts = json::array();
    for (const auto& p : est.per_point)
        pts.push_back(json{{"t", p.t},
                           {"p_tilde", p.p_tilde},
                           {"lower", p.lower},
                           {"upper", p.upper},
                           {"weight", p.weight}});
    j["per_point"] = pts;
    return j;
}

json sweep_to_json(const RateSweep& sweep) {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["potential"] = spec_to_json(sweep.potential);
    json entries = json::array();
    for (const auto& e : sweep.entries) {
        json je{{"epsilon", e.epsilon},
                {"usable", e.usable},
                {"status", e.status},
                {"sample_count", e.sample_count},
                {"censor_fraction", e.censor_fraction}};
        if (e.usable) {
            je["rate"] = e.rate;
            je["t_star"] = e.t_star;
        }
        entries.push_back(je);
    }
    j["entries"] = entries;
    return j;
}

json barrier_to_json(const BarrierEstimate& est) {
    return json{{"schema_version", kSchemaVersion},
                {"r0_intercept", est.r0},
                {"h_u", est.h_u},
                {"fit_slope", est.fit_slope},
                {"fit_intercept", est.fit_intercept},
                {"intercept_se", est.intercept_se},
                {"barrier_detected", est.barrier_detected},
                {"epsilons_used", est.epsilons_used},
                {"residuals", est.residuals}};
}

void write_records_csv(const std::string& path, const std::vector<CouplingRecord>& records) {
    std::ofstream out(path, std::ios::binary);  // binary: byte-identical newlines everywhere
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "sample_index,tau_c,censored,tau_eps1,kappa_x,kappa_y,xi1,steps\n";
    auto field = [](double v) { return observed(v) ? format_double(v) : std::string(); };
    for (const auto& r : records) {
        if (r.status != SampleStatus::Coupled && r.status != SampleStatus::Censored) continue;
        out << r.sample_index << ',' << (r.status == SampleStatus::Coupled ? field(r.tau_c) : "")
            << ',' << (r.status == SampleStatus::Censored ? 1 : 0) << ',' << field(r.tau_eps1)
            << ',' << field(r.kappa_x) << ',' << field(r.kappa_y) << ',' << field(r.xi1) << ','
            << r.steps << '\n';
    }
}

std::vector<CouplingRecord> read_records_csv(const std::string& path, double) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error(path + ": empty file");
    if (line.rfind("sample_index,tau_c,censored", 0) != 0)
        throw std::runtime_error(path + ": unexpected CSV header");

    std::vector<CouplingRecord> records;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        while (cells.size() < 8) cells.emplace_back();
        auto opt = [](const std::string& s) { return s.empty() ? kUnset : std::stod(s); };
        CouplingRecord r;
        r.sample_index = std::stol(cells[0]);
        const bool censored = cells[2] == "1";
        r.status = censored ? SampleStatus::Censored : SampleStatus::Coupled;
        if (!censored) r.tau_c = opt(cells[1]);
        r.tau_eps1 = opt(cells[3]);
        r.kappa_x = opt(cells[4]);
        r.kappa_y = opt(cells[5]);
        r.xi1 = opt(cells[6]);
        r.steps = std::stol(cells[7]);
        records.push_back(std::move(r));
    }
    return records;
}

void write_survival_plot_csv(const std::string& path, const TailEstimate& est) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "t,log_survival,fit\n";
    for (const auto& p : est.per_point) {
        const double fit = est.ok() && p.t >= est.t_star
                               ? est.slope_a * p.t + est.intercept_b
                               : std::numeric_limits<double>::quiet_NaN();
        out << format_double(p.t) << ',' << format_double(std::log(p.p_tilde)) << ','
            << (std::isnan(fit) ? std::string() : format_double(fit)) << '\n';
    }
}

void write_extrapolation_csv(const std::string& path, const RateSweep& sweep,
                             const BarrierEstimate& est) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "eps_sq,neg_eps_sq_log_r,fit\n";
    for (const auto& e : sweep.entries) {
        if (!e.usable) continue;
        const double x = e.epsilon * e.epsilon;
        out << format_double(x) << ',' << format_double(-x * std::log(e.rate)) << ','
            << format_double(est.fit_intercept + est.fit_slope * x) << '\n';
    }
    out << "0,," << format_double(est.fit_intercept) << '\n';
}

RunConfig parse_run_config(const json& root) {
    check_keys(root, "config",
               {"schema", "potential", "sim", "init", "samples", "seed", "workers", "instrument",
                "estimate", "sweep", "oracle"});
    if (!root.contains("schema")) throw ConfigError("config.schema: missing");
    if (root.at("schema").get<long>() != kSchemaVersion)
        throw ConfigError("config.schema: unsupported version (expected " +
                          std::to_string(kSchemaVersion) + ")");
    if (!root.contains("potential")) throw ConfigError("config.potential: missing");

    RunConfig cfg;
    cfg.potential = spec_from_json(root.at("potential"), "config.potential");

    if (root.contains("sim")) cfg.sim = sim_from_json(root.at("sim"), "config.sim");
    if (root.contains("seed")) {
        cfg.sim.seed = static_cast<std::uint64_t>(integer_or(root, "seed", 0, "config"));
        cfg.seed_set = true;
    } else if (root.contains("sim") && root.at("sim").contains("seed")) {
        cfg.seed_set = true;
    }
    cfg.samples = integer_or(root, "samples", cfg.samples, "config");
    if (cfg.samples < 0) throw ConfigError("config.samples: must be >= 0");
    cfg.workers = static_cast<int>(integer_or(root, "workers", 0, "config"));

    if (root.contains("init")) {
        cfg.init = init_from_json(root.at("init"), "config.init");
    } else {
        // default: both trajectories pinned at +/- 1 in every coordinate
        Vec x0(cfg.potential.dimension, 1.0), y0(cfg.potential.dimension, -1.0);
        cfg.init = InitCondition::points(std::move(x0), std::move(y0));
    }
    if (cfg.init.dimension() != cfg.potential.dimension)
        throw ConfigError("config.init: dimension does not match the potential");

    if (root.contains("instrument")) {
        const auto& ins = root.at("instrument");
        check_keys(ins, "config.instrument",
                   {"basins", "track_xi1", "stop_on_separation", "basin_check_stride"});
        cfg.instrument.basins = ins.value("basins", false);
        cfg.instrument.track_xi1 = ins.value("track_xi1", false);
        cfg.instrument.stop_on_separation = ins.value("stop_on_separation", false);
        cfg.instrument.basin_check_stride =
            static_cast<int>(integer_or(ins, "basin_check_stride", 10, "config.instrument"));
    }
    if (root.contains("estimate")) cfg.grid = grid_from_json(root.at("estimate"), "config.estimate");

    if (root.contains("sweep")) {
        const auto& sw = root.at("sweep");
        check_keys(sw, "config.sweep", {"epsilons", "max_times", "use_smallest", "flatness_tol"});
        SweepSection sec;
        if (!sw.contains("epsilons")) throw ConfigError("config.sweep.epsilons: missing");
        sec.epsilons = vec_from_json(sw.at("epsilons"), "config.sweep.epsilons");
        if (sw.contains("max_times"))
            sec.max_times = vec_from_json(sw.at("max_times"), "config.sweep.max_times");
        else
            sec.max_times.assign(sec.epsilons.size(), cfg.sim.max_time);
        if (sec.max_times.size() != sec.epsilons.size())
            throw ConfigError("config.sweep.max_times: length must match epsilons");
        sec.use_smallest = static_cast<int>(integer_or(sw, "use_smallest", 6, "config.sweep"));
        sec.flatness_tol = number_or(sw, "flatness_tol", 0.25, "config.sweep");
        cfg.sweep_section = std::move(sec);
    }

    if (root.contains("oracle")) {
        const auto& oc = root.at("oracle");
        check_keys(oc, "config.oracle", {"mode", "bounds", "resolution", "string"});
        OracleSection sec;
        sec.mode = oc.value("mode", std::string("both"));
        if (sec.mode != "grid" && sec.mode != "string" && sec.mode != "both")
            throw ConfigError("config.oracle.mode: expected grid, string, or both");
        if (oc.contains("bounds")) {
            const auto& bounds = oc.at("bounds");
            if (!bounds.is_array()) throw ConfigError("config.oracle.bounds: expected an array");
            std::vector<long> res;
            if (oc.contains("resolution")) {
                for (const auto& r : oc.at("resolution")) res.push_back(r.get<long>());
            }
            int axis = 0;
            for (const auto& b : bounds) {
                const Vec pair = vec_from_json(b, "config.oracle.bounds");
                if (pair.size() != 2) throw ConfigError("config.oracle.bounds: each entry is [lo, hi]");
                GridAxis ax;
                ax.lo = pair[0];
                ax.hi = pair[1];
                ax.resolution = res.empty() ? 201
                               : axis < static_cast<int>(res.size())
                                   ? static_cast<int>(res[axis])
                                   : static_cast<int>(res.back());
                sec.axes.push_back(ax);
                ++axis;
            }
        }
        if (oc.contains("string")) {
            const auto& st = oc.at("string");
            check_keys(st, "config.oracle.string",
                       {"images", "step", "iters", "tol", "start", "end"});
            sec.string_cfg.config.images =
                static_cast<int>(integer_or(st, "images", 64, "config.oracle.string"));
            sec.string_cfg.config.step = number_or(st, "step", 1e-2, "config.oracle.string");
            sec.string_cfg.config.max_iters =
                integer_or(st, "iters", 200000, "config.oracle.string");
            sec.string_cfg.config.tol = number_or(st, "tol", 1e-10, "config.oracle.string");
            if (st.contains("start") != st.contains("end"))
                throw ConfigError("config.oracle.string: start and end must come together");
            if (st.contains("start")) {
                sec.string_cfg.start = vec_from_json(st.at("start"), "config.oracle.string.start");
                sec.string_cfg.end = vec_from_json(st.at("end"), "config.oracle.string.end");
                sec.string_cfg.has_endpoints = true;
            }
        }
        cfg.oracle_section = std::move(sec);
    }
    return cfg;
}

}  // namespace wells
