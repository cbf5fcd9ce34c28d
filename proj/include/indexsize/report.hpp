#pragma once

// End-to-end run: configure a backend, execute the selected size-estimation
// methods, run the audits and emit a summary report plus plot data.

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "indexsize/engine.hpp"
#include "indexsize/estimators.hpp"
#include "indexsize/probes.hpp"
#include "indexsize/universe.hpp"

namespace indexsize {

/// Method ids in report order.
inline const std::vector<std::string> kMethodIds{"A", "B", "C1", "C2", "D1", "D2", "D3"};

struct ProbeSettings {
    YearRange years{1700, 2013};          // longitudinal span (C2, D3, composition)
    YearRange custom_range{1700, 2013};   // C1
    YearRange absurd_range{1700, 2013};   // D2
    std::string absurd_term = "1";
    std::string absurd_site = "ssstfsffsdffasdfs.com";
    int fan_out = 1;
    int delay_ms = 0;
    double requests_per_minute = 0.0;  // mock-live pacing
};

struct ToggleAuditSettings {
    SearchCategory category = SearchCategory::articles;
    std::string term;
    std::string excluded_site;  // empty: none
    std::vector<int> years;     // empty: probe years
};

struct AuditSettings {
    std::vector<YearRange> ranges;  // sectional monotonicity audit
    std::optional<std::vector<int>> flag_years;  // nullopt: probe years
    std::optional<ToggleAuditSettings> toggle;
    bool composition = true;
    bool serp = false;
};

struct RunConfig {
    std::string backend = "simulated";  // simulated | mock-live
    std::uint64_t seed = 42;
    double error_rate = 0.10;
    std::vector<std::string> methods = kMethodIds;

    // Resolved paths; empty when not configured.
    std::string queries_fixture;
    std::string studies_fixture;
    std::string decades_fixture;
    nlohmann::json method_inputs = nlohmann::json::object();

    UniverseConfig universe;
    std::map<std::string, CoveragePolicy> views;  // gs, mas, wos
    FaultProfile faults;

    ProbeSettings probe;
    AuditSettings audit;
    std::string output_dir;

    /// Relative paths resolve against base_dir. Unknown keys are rejected.
    static RunConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = ".");
    static RunConfig load(const std::string& path);

    /// Throws ConfigError when a selected method lacks its inputs, including a
    /// fixture file that does not exist.
    void validate() const;
};

struct ReportRow {
    std::string method_id;
    std::string label;
    EstimateResult result;
    bool discarded = false;
    std::string error;  // non-empty: the method failed

    bool ok() const { return error.empty(); }
    bool operator==(const ReportRow&) const = default;
};

struct ConsensusBand {
    std::vector<std::string> methods;
    Count min = 0;
    Count max = 0;
    Count center = 0;  // median of the retained rows
    double error_rate = 0.0;
    Count adjusted_low = 0;  // error_adjust(center)
    Count adjusted_high = 0;  // center
    Count adjusted_midpoint = 0;

    bool operator==(const ConsensusBand&) const = default;
};

/// min/max over the estimates, center = their median, and the band
/// [error_adjust(center, rate), center] with its midpoint.
ConsensusBand consensus(const std::vector<std::pair<std::string, Count>>& estimates, double error_rate);

struct ReportFinding {
    std::string audit;
    InconsistencyFinding finding;
    bool operator==(const ReportFinding&) const = default;
};

struct PlotSeries {
    std::string name;
    std::vector<std::pair<int, Count>> points;
    bool operator==(const PlotSeries&) const = default;
};

struct Correlation {
    std::string name;
    double r = 0.0;
    std::size_t n = 0;
    bool operator==(const Correlation&) const = default;
};

struct CompositionSummary {
    Count all = 0, records = 0, citations = 0, patents = 0;
    double share_records = 0, share_citations = 0, share_patents = 0;
    bool operator==(const CompositionSummary&) const = default;
};

struct SummaryReport {
    std::string backend;
    std::uint64_t seed = 0;
    std::vector<ReportRow> rows;
    std::optional<ConsensusBand> consensus;
    std::vector<ReportFinding> findings;
    std::vector<PlotSeries> plots;
    std::optional<CompositionSummary> composition;
    std::vector<Correlation> correlations;
    std::optional<DecadeTable> decades;
    std::vector<std::string> notes;

    const ReportRow* row(const std::string& id) const;
    bool has_errors() const;

    nlohmann::json to_json() const;
    static SummaryReport from_json(const nlohmann::json& j);
};

bool operator==(const SummaryReport& a, const SummaryReport& b);

struct BackendBundle {
    std::shared_ptr<const GroundTruthUniverse> universe;  // simulated only
    std::map<std::string, std::shared_ptr<const IndexView>> views;
    std::unique_ptr<EngineBackend> engine;
    std::string source;  // human-readable origin for provenance fields
};

/// Simulated: generates the universe and every configured view, and puts the
/// engine over view "gs". Mock-live: loads the query fixture (may be empty).
BackendBundle make_backend(const RunConfig& config);

/// Executes every selected method. Method-level failures land in the row's
/// error field; configuration problems throw ConfigError before any query.
/// Queries are logged as JSON lines to `query_log` when given.
SummaryReport run(const RunConfig& config, std::ostream* query_log = nullptr);

enum class ReportFormat { csv, json };

/// Writes summary.csv + findings.csv (csv) or summary.json (json), plus
/// plot_<series>.csv and decades.csv when present. Returns the files written.
std::vector<std::filesystem::path> emit(const SummaryReport& report, const std::filesystem::path& dir,
                                        ReportFormat format);

SummaryReport read_summary_json(const std::filesystem::path& path);

}  // namespace indexsize
