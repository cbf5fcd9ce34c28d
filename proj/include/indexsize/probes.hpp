#pragma once

// Query protocols (sectional, longitudinal, absurd) and the audits that turn
// their answers into inconsistency findings.

#include <chrono>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "indexsize/engine.hpp"
#include "indexsize/estimators.hpp"

namespace indexsize {

struct SeriesPoint {
    int year = 0;
    std::optional<HitCountEstimate> hce;
    std::string error;  // set when the backend failed for this year
};

struct YearSeries {
    SearchCategory category = SearchCategory::articles;
    SearchFlags flags;
    std::string term;
    std::optional<std::string> excluded_site;
    std::vector<SeriesPoint> points;  // strictly increasing years

    /// Throws ValidationError on unordered or duplicate years.
    void validate() const;
    /// Sum of the answered points.
    Count total() const;
    bool complete() const;
    std::vector<int> years() const;
    /// HCE values; failed points contribute 0.
    std::vector<double> values() const;
    const SeriesPoint* at(int year) const;
};

enum class FindingKind { range_non_monotone, flag_exclusion_negative, false_serp, citation_toggle_shrink };

std::string_view to_string(FindingKind k);
FindingKind parse_finding_kind(std::string_view s);

struct InconsistencyFinding {
    FindingKind kind = FindingKind::range_non_monotone;
    std::string where;  // year, range or page
    std::string other;  // the range or series compared against, if any
    Count magnitude = 0;

    bool operator==(const InconsistencyFinding&) const = default;
};

struct ProbeOptions {
    int fan_out = 1;
    std::chrono::milliseconds delay{0};  // pause after every query, per worker
};

/// Issues one count per query with bounded fan-out. Results line up with the
/// input; backend failures are returned as error strings, never thrown.
struct CountOutcome {
    std::optional<HitCountEstimate> hce;
    std::string error;
};
std::vector<CountOutcome> run_counts(const EngineBackend& engine, std::span<const Query> queries,
                                     const ProbeOptions& opts = {});

/// One count per year, no aggregate replay. Failed years keep their error.
YearSeries query_years(const EngineBackend& engine, const Query& tmpl, std::span<const int> years,
                       const ProbeOptions& opts = {});

struct LongitudinalResult {
    YearSeries series;
    Count total = 0;
    bool complete = true;
    /// The backend answered with a recorded pre-summed total; series is empty.
    bool from_recorded_aggregate = false;
};

/// One count per year with `tmpl`'s term, site, flags and category; its year
/// range and pagination are ignored.
LongitudinalResult longitudinal_sum(const EngineBackend& engine, const Query& tmpl, std::span<const int> years,
                                    const ProbeOptions& opts = {});
std::vector<int> years_of(YearRange r);

struct RangeObservation {
    YearRange range;
    std::optional<HitCountEstimate> hce;
    std::string error;
};

struct SectionalResult {
    std::vector<RangeObservation> observations;
    std::vector<InconsistencyFinding> findings;
};

/// Queries each range and flags every nested pair r1 ⊂ r2 with
/// HCE(r1) > HCE(r2); magnitude is HCE(r2) - HCE(r1).
SectionalResult sectional_probe(const EngineBackend& engine, const Query& tmpl, std::span<const YearRange> ranges,
                                const ProbeOptions& opts = {});
std::vector<InconsistencyFinding> range_monotonicity_audit(std::span<const RangeObservation> observations);

enum class AbsurdMode { total, custom_range, longitudinal };

std::string_view to_string(AbsurdMode m);
AbsurdMode parse_absurd_mode(std::string_view s);

struct AbsurdRequest {
    std::string term = "1";
    std::string excluded_site;
    SearchFlags flags;
    SearchCategory category = SearchCategory::articles;
    AbsurdMode mode = AbsurdMode::total;
    std::optional<YearRange> range;  // custom range, or the longitudinal span
    bool citation_control = true;
};

struct AbsurdResult {
    EstimateResult estimate;
    std::optional<YearSeries> series;  // longitudinal mode with per-year answers
    bool complete = true;
};

/// Throws ValidationError for an empty term or a non-hostname site, and lets
/// BackendError through in total and custom-range modes.
AbsurdResult absurd_probe(const EngineBackend& engine, const AbsurdRequest& request, const ProbeOptions& opts = {});

struct CompositionResult {
    Count all = 0;                // records + citations + patents
    Count records_citations = 0;  // patents excluded
    Count records_patents = 0;    // citations excluded
    Count records = 0;            // both excluded
    Count citations = 0;          // all - records_patents
    Count patents = 0;            // all - records_citations
    double share_records = 0.0;
    double share_citations = 0.0;
    double share_patents = 0.0;
    std::vector<InconsistencyFinding> findings;
    std::map<std::string, YearSeries> series;  // keyed by flags label, when per-year data exists
};

/// Components by subtraction. Negative components stay negative and become
/// findings labelled `where`.
CompositionResult composition_from_totals(Count all, Count records_citations, Count records_patents, Count records,
                                          const std::string& where);

/// Runs the four flag combinations over `years` for an articles query.
CompositionResult composition_breakdown(const EngineBackend& engine, const Query& tmpl, std::span<const int> years,
                                        const ProbeOptions& opts = {});

/// A finding per year where the patents-excluding count beats the inclusive one.
std::vector<InconsistencyFinding> flag_inconsistencies(const YearSeries& inclusive, const YearSeries& excluding);
/// A finding per year where switching citations on lowers the count.
std::vector<InconsistencyFinding> citation_toggle_audit(const YearSeries& with_citations,
                                                        const YearSeries& without_citations);
/// Walks result pages until the results run out, the cap is hit or max_pages;
/// every empty page with an HCE promising more is a false-SERP finding.
std::vector<InconsistencyFinding> serp_audit(const EngineBackend& engine, const Query& query, int max_pages = 60);

/// Product-moment correlation. Throws UndefinedEstimateError on zero variance.
double pearson(std::span<const double> x, std::span<const double> y);

struct DecadeRow {
    YearRange decade;
    std::map<std::string, Count> counts;
    std::map<std::string, double> ratios;  // engine / reference, 2 decimals
};

struct DecadeTable {
    std::string reference;
    std::vector<std::string> engines;
    std::vector<DecadeRow> rows;
};

/// 1951-1960, 1961-1970, ... clipped to the domain; the last bucket may be partial.
std::vector<YearRange> decade_buckets(YearRange domain);
/// Ratio columns for a table whose counts are filled in.
void compute_decade_ratios(DecadeTable& table);
/// Series must share one year domain.
DecadeTable decade_aggregate(const std::vector<std::pair<std::string, YearSeries>>& series,
                             const std::string& reference);
/// Columns: decade, engine, count.
DecadeTable load_decade_fixture(const std::string& path, const std::string& reference);

}  // namespace indexsize
