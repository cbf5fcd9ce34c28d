#include "indexsize/studies.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "indexsize/csv.hpp"
#include "indexsize/errors.hpp"

namespace indexsize {

namespace {

const char* const kColumns[] = {"study_id", "unit", "database", "count", "language", "sample_note"};

bool is_gs(const std::string& db) { return db == "GS"; }
bool is_wos(const std::string& db) { return db == "WoS"; }

}  // namespace

std::string_view to_string(StudyUnit u) {
    switch (u) {
        case StudyUnit::documents: return "documents";
        case StudyUnit::unique_citing_documents: return "unique-citing-documents";
        case StudyUnit::citations: return "citations";
        case StudyUnit::other: return "other";
    }
    return "other";
}

StudyUnit classify_unit(std::string_view label) {
    for (auto u : {StudyUnit::documents, StudyUnit::unique_citing_documents, StudyUnit::citations})
        if (to_string(u) == label) return u;
    return StudyUnit::other;
}

StudyParseResult parse_studies(std::istream& in, const std::string& name) {
    const auto rows = csv::read(in);
    if (rows.empty()) throw SchemaError(name + ": missing header row");

    std::map<std::string, std::size_t> col;
    for (std::size_t i = 0; i < rows.front().fields.size(); ++i) col[csv::trim(rows.front().fields[i])] = i;
    for (const char* c : kColumns)
        if (!col.count(c)) throw SchemaError(name + ": missing column '" + c + "'");
    const std::size_t width = rows.front().fields.size();

    StudyParseResult res;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        auto field = [&](const char* c) { return csv::trim(row.fields[col[c]]); };
        if (row.fields.size() != width) {
            res.errors.push_back({row.line, "expected " + std::to_string(width) + " fields, got " +
                                                std::to_string(row.fields.size())});
            continue;
        }
        const std::string study = field("study_id");
        const std::string unit = field("unit");
        const std::string db = field("database");
        if (study.empty() || unit.empty() || db.empty()) {
            res.errors.push_back({row.line, "study_id, unit and database are required"});
            continue;
        }
        Count n;
        try {
            n = csv::parse_count(field("count"));
        } catch (const std::exception&) {
            res.errors.push_back({row.line, "count: not a number '" + field("count") + "'"});
            continue;
        }
        if (n < 0) {
            res.errors.push_back({row.line, "count: must be non-negative"});
            continue;
        }

        auto it = std::find_if(res.records.begin(), res.records.end(), [&](const StudyRecord& s) {
            return s.study_id == study && s.unit_label == unit;
        });
        if (it == res.records.end()) {
            StudyRecord s;
            s.study_id = study;
            s.unit_label = unit;
            s.unit = classify_unit(unit);
            s.sample_note = field("sample_note");
            res.records.push_back(std::move(s));
            it = std::prev(res.records.end());
        }
        if (it->languages.count(db)) {
            res.errors.push_back({row.line, "duplicate database '" + db + "' for " + study + "/" + unit});
            continue;
        }
        if (is_gs(db)) it->gs_count = n;
        else if (is_wos(db)) it->wos_count = n;
        else it->other_counts[db] = n;
        it->languages[db] = field("language");
    }
    return res;
}

StudyParseResult parse_studies_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    return parse_studies(in, path);
}

void write_studies_csv(std::ostream& out, std::span<const StudyRecord> records) {
    csv::write_row(out, {std::begin(kColumns), std::end(kColumns)});
    for (const auto& s : records) {
        auto emit = [&](const std::string& db, Count n) {
            const auto lang = s.languages.find(db);
            csv::write_row(out, {s.study_id, s.unit_label, db, std::to_string(n),
                                 lang == s.languages.end() ? std::string() : lang->second, s.sample_note});
        };
        if (s.gs_count) emit("GS", *s.gs_count);
        if (s.wos_count) emit("WoS", *s.wos_count);
        for (const auto& [db, n] : s.other_counts) emit(db, n);
    }
}

std::vector<double> StudyRatioSet::values() const {
    std::vector<double> v;
    for (const auto& r : ratios) v.push_back(r.ratio);
    return v;
}

StudyRatioSet study_ratios(std::span<const StudyRecord> records, StudyUnit unit, const FilterPolicy& policy) {
    if (!policy.allowed_units.count(unit))
        throw ValidationError("unit", std::string(to_string(unit)) + " is not an allowed unit");
    if (policy.min_wos_count < 1) throw ValidationError("min_wos_count", "must be >= 1");

    StudyRatioSet out;
    out.unit = unit;
    for (const auto& s : records) {
        if (s.unit != unit) continue;
        const std::string id = s.study_id + " (" + s.unit_label + ")";
        if (!s.gs_count) {
            out.excluded.push_back({id, "no GS count"});
            continue;
        }
        if (!s.wos_count) {
            out.excluded.push_back({id, "no WoS count"});
            continue;
        }
        if (*s.wos_count < policy.min_wos_count) {
            out.excluded.push_back({id, "WoS count " + std::to_string(*s.wos_count) + " below minimum " +
                                            std::to_string(policy.min_wos_count)});
            continue;
        }
        if (policy.require_same_language_basis && s.languages.at("GS") != s.languages.at("WoS")) {
            out.excluded.push_back({id, "language basis differs (" + s.languages.at("GS") + " vs " +
                                            s.languages.at("WoS") + ")"});
            continue;
        }
        out.ratios.push_back({s.study_id, *s.gs_count, *s.wos_count,
                              static_cast<double>(*s.gs_count) / static_cast<double>(*s.wos_count)});
    }
    if (out.ratios.empty())
        throw UndefinedEstimateError("no study survives the filter for unit " + std::string(to_string(unit)));
    return out;
}

RatioSummary summarize_ratios(std::span<const double> ratios) {
    if (ratios.empty()) throw ValidationError("ratios", "need at least one ratio");
    std::vector<double> v(ratios.begin(), ratios.end());
    std::sort(v.begin(), v.end());  // summing in sorted order makes the result order-free
    long double log_sum = 0;
    for (double r : v) {
        if (!(r > 0.0)) throw UndefinedEstimateError("geometric mean undefined: ratio <= 0");
        log_sum += std::log(static_cast<long double>(r));
    }
    const std::size_t n = v.size();
    RatioSummary s;
    s.n = n;
    s.median = n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
    s.geometric_mean = static_cast<double>(std::exp(log_sum / static_cast<long double>(n)));
    return s;
}

}  // namespace indexsize
