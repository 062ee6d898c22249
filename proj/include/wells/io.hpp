// Serialization: experiment configuration (JSON with strict schema
// checking), sample CSVs, manifests, estimate reports, and plot data.
#pragma once

#include <initializer_list>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "wells/barrier.hpp"
#include "wells/coupling.hpp"
#include "wells/oracle.hpp"
#include "wells/potential.hpp"
#include "wells/tail.hpp"

namespace wells {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

// Thrown for malformed configuration; message names the offending field.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

std::string format_double(double v);  // shortest round-trip-safe form

json read_json_file(const std::string& path);
void write_json_file(const std::string& path, const json& j);

// Rejects keys outside `allowed`; `where` names the object in errors.
void check_keys(const json& obj, const std::string& where,
                std::initializer_list<const char*> allowed);

json spec_to_json(const PotentialSpec& spec);
PotentialSpec spec_from_json(const json& j, const std::string& where);

json sim_to_json(const SimParams& p);
SimParams sim_from_json(const json& j, const std::string& where);

json init_to_json(const InitCondition& c);
InitCondition init_from_json(const json& j, const std::string& where);

GridConfig grid_from_json(const json& j, const std::string& where);
json grid_to_json(const GridConfig& g);

json estimate_to_json(const TailEstimate& est);
json sweep_to_json(const RateSweep& sweep);
json barrier_to_json(const BarrierEstimate& est);

// Sample CSV, columns:
// sample_index,tau_c,censored,tau_eps1,kappa_x,kappa_y,xi1,steps
// Coupled and censored rows only; diverged counts live in the manifest.
void write_records_csv(const std::string& path, const std::vector<CouplingRecord>& records);
std::vector<CouplingRecord> read_records_csv(const std::string& path, double max_time);

// Plot data: per-epsilon log-survival with the fitted line, and the
// extrapolation scatter with its fit.
void write_survival_plot_csv(const std::string& path, const TailEstimate& est);
void write_extrapolation_csv(const std::string& path, const RateSweep& sweep,
                             const BarrierEstimate& est);

// ---------------------------------------------------------------------------
// CLI run configuration
// ---------------------------------------------------------------------------

struct SweepSection {
    std::vector<double> epsilons;
    std::vector<double> max_times;
    int use_smallest = 6;
    double flatness_tol = 0.25;
};

struct StringSection {
    StringConfig config;
    Vec start, end;
    bool has_endpoints = false;
};

struct OracleSection {
    std::string mode = "both";  // grid | string | both
    std::vector<GridAxis> axes;
    StringSection string_cfg;
};

struct RunConfig {
    PotentialSpec potential;
    SimParams sim;
    InitCondition init;
    long samples = 100000;
    int workers = 0;
    bool seed_set = false;
    InstrumentConfig instrument;
    GridConfig grid;
    std::optional<SweepSection> sweep_section;
    std::optional<OracleSection> oracle_section;
};

// Parses and validates the full config document. Unknown keys anywhere are
// hard errors; the seed must be present here or supplied by the caller.
RunConfig parse_run_config(const json& root);

}  // namespace wells
