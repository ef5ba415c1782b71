// scenario.hpp: declarative scenario runner. A scenario file (TOML or JSON)
// names a model, dissipation channels, pulses and reference frames; numeric
// fields may be expressions resolved against the computed spectrum.

#pragma once

#include "json.hpp"
#include "usq/quadrature.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace usq {

enum class ScenarioKind { ground_sweep, two_photon_rabi, cascade_squeeze, custom };

std::string_view to_string(ScenarioKind k);
/// "ground-sweep", "two-photon-rabi", "cascade-squeeze" or "custom".
ScenarioKind parse_scenario_kind(std::string_view name);

struct ScenarioConfig {
    std::string text;        ///< configuration bytes exactly as read
    std::string format;      ///< "toml" or "json"
    nlohmann::json doc;      ///< parsed document
    ScenarioKind kind = ScenarioKind::custom;
    std::string name;        ///< output file stem
    int n_max = 20;
};

/// Parses and validates the top-level structure. Throws ConfigError.
ScenarioConfig parse_scenario(std::string text, std::string_view format = "toml");
ScenarioConfig load_scenario(const std::filesystem::path& path);

struct RunOptions {
    std::optional<int> workers;
    std::optional<int> n_max;       ///< overrides the configured truncation
    bool probe_convergence = false; ///< also re-run dynamics at n_max + 10
    bool log = true;                ///< progress lines on stderr
};

/// One output row; absent values are written as empty CSV fields.
struct SeriesRow {
    double t = 0.0;
    std::optional<double> s1n_gen;
    std::optional<double> s2n_gen;
    std::optional<double> s1n_std;
    std::optional<double> s2n_std;
    std::optional<double> flux;
    std::optional<double> pop_q;
};

struct SeriesTable {
    std::string label;
    ReferenceFrame frame;
    std::vector<SeriesRow> rows;
};

struct RunResult {
    ScenarioKind kind = ScenarioKind::custom;
    std::string name;
    std::string config_text;
    std::string config_format;
    int n_max = 0;
    nlohmann::json spectrum;    ///< lowest levels of the static Hamiltonian
    nlohmann::json convergence; ///< truncation deltas against n_max + 10
    nlohmann::json metrics;     ///< scenario-specific measurements
    nlohmann::json metadata;    ///< solver settings, diagnostics, flags
    std::vector<SeriesTable> series;
    std::optional<SqueezingMap> map;
    double wall_time = 0.0;

    const SeriesTable& table(std::string_view label) const;
};

RunResult run_scenario(const ScenarioConfig& cfg, const RunOptions& opts = {});
RunResult run_ground_sweep(const ScenarioConfig& cfg, const RunOptions& opts = {});
RunResult run_two_photon(const ScenarioConfig& cfg, const RunOptions& opts = {});
RunResult run_cascade(const ScenarioConfig& cfg, const RunOptions& opts = {});
RunResult run_custom(const ScenarioConfig& cfg, const RunOptions& opts = {});

inline constexpr std::string_view kSeriesHeader = "t,s1n_gen,s2n_gen,s1n_std,s2n_std,flux,pop_q";

/// Shortest round-trip text (17 significant digits at most), '.' decimal.
std::string format_number(double v);
std::string format_series_csv(const SeriesTable& table);
std::string format_map_csv(const SqueezingMap& map);
/// Inverse of format_series_csv. Throws ConfigError on malformed input.
std::vector<SeriesRow> parse_series_csv(std::string_view text);

nlohmann::json sidecar(const RunResult& r);

/// Writes the CSV file(s), the JSON sidecar and a byte-identical copy of the
/// configuration into `dir`; returns the written paths. Throws Error with the
/// offending path on I/O failure.
std::vector<std::filesystem::path> emit(const RunResult& r, const std::filesystem::path& dir);

} // namespace usq
