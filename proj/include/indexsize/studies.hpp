#pragma once

// Empirical GS-vs-WoS comparison studies: CSV ingestion, comparability
// filtering and ratio synthesis.
//
// CSV columns (any order): study_id, unit, database, count, language,
// sample_note. One row per (study, unit, database).

#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "indexsize/universe.hpp"

namespace indexsize {

enum class StudyUnit { documents, unique_citing_documents, citations, other };

std::string_view to_string(StudyUnit u);
/// Unrecognized labels map to other.
StudyUnit classify_unit(std::string_view label);

struct StudyRecord {
    std::string study_id;
    StudyUnit unit = StudyUnit::other;
    std::string unit_label;  // as written in the file
    std::optional<Count> gs_count;
    std::optional<Count> wos_count;
    std::map<std::string, Count> other_counts;  // database -> count
    std::map<std::string, std::string> languages;  // database -> language basis
    std::string sample_note;

    bool operator==(const StudyRecord&) const = default;
};

struct RowError {
    std::size_t line = 0;
    std::string message;
};

struct StudyParseResult {
    std::vector<StudyRecord> records;
    std::vector<RowError> errors;
};

/// Throws SchemaError when a column is missing. Bad rows become RowErrors and
/// the rest of the file is still parsed.
StudyParseResult parse_studies(std::istream& in, const std::string& name = "<stream>");
StudyParseResult parse_studies_csv(const std::string& path);

void write_studies_csv(std::ostream& out, std::span<const StudyRecord> records);

struct FilterPolicy {
    Count min_wos_count = 10;
    std::set<StudyUnit> allowed_units{StudyUnit::documents, StudyUnit::unique_citing_documents};
    bool require_same_language_basis = true;
};

struct StudyRatio {
    std::string study_id;
    Count gs = 0;
    Count wos = 0;
    double ratio = 0.0;
};

struct StudyExclusion {
    std::string study_id;
    std::string reason;
};

struct StudyRatioSet {
    StudyUnit unit = StudyUnit::documents;
    std::vector<StudyRatio> ratios;
    std::vector<StudyExclusion> excluded;
    std::vector<double> values() const;
};

/// GS/WoS per surviving study of `unit`. Throws UndefinedEstimateError when
/// nothing survives and ValidationError when the unit is not allowed.
StudyRatioSet study_ratios(std::span<const StudyRecord> records, StudyUnit unit, const FilterPolicy& policy = {});

struct RatioSummary {
    double median = 0.0;
    double geometric_mean = 0.0;
    std::size_t n = 0;
};

/// Median (midpoint for even n) and exp(mean(log)). Throws ValidationError on
/// an empty list and UndefinedEstimateError on a ratio <= 0.
RatioSummary summarize_ratios(std::span<const double> ratios);

}  // namespace indexsize
