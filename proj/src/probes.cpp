#include "indexsize/probes.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include "indexsize/csv.hpp"
#include "indexsize/errors.hpp"

namespace indexsize {

// ---------------------------------------------------------------------------
// YearSeries

void YearSeries::validate() const {
    for (std::size_t i = 1; i < points.size(); ++i)
        if (points[i].year <= points[i - 1].year)
            throw ValidationError("series", "years must be strictly increasing (" + std::to_string(points[i].year) + ")");
}

Count YearSeries::total() const {
    Count t = 0;
    for (const auto& p : points)
        if (p.hce) t += p.hce->value;
    return t;
}

bool YearSeries::complete() const {
    return std::all_of(points.begin(), points.end(), [](const SeriesPoint& p) { return p.hce.has_value(); });
}

std::vector<int> YearSeries::years() const {
    std::vector<int> out;
    out.reserve(points.size());
    for (const auto& p : points) out.push_back(p.year);
    return out;
}

std::vector<double> YearSeries::values() const {
    std::vector<double> out;
    out.reserve(points.size());
    for (const auto& p : points) out.push_back(p.hce ? static_cast<double>(p.hce->value) : 0.0);
    return out;
}

const SeriesPoint* YearSeries::at(int year) const {
    auto it = std::lower_bound(points.begin(), points.end(), year,
                               [](const SeriesPoint& p, int y) { return p.year < y; });
    return it != points.end() && it->year == year ? &*it : nullptr;
}

std::string_view to_string(FindingKind k) {
    switch (k) {
        case FindingKind::range_non_monotone: return "range-non-monotone";
        case FindingKind::flag_exclusion_negative: return "flag-exclusion-negative";
        case FindingKind::false_serp: return "false-serp";
        case FindingKind::citation_toggle_shrink: return "citation-toggle-shrink";
    }
    return "range-non-monotone";
}

FindingKind parse_finding_kind(std::string_view s) {
    for (auto k : {FindingKind::range_non_monotone, FindingKind::flag_exclusion_negative, FindingKind::false_serp,
                   FindingKind::citation_toggle_shrink})
        if (to_string(k) == s) return k;
    throw ValidationError("kind", "unknown finding kind '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// fan-out

std::vector<CountOutcome> run_counts(const EngineBackend& engine, std::span<const Query> queries,
                                     const ProbeOptions& opts) {
    std::vector<CountOutcome> out(queries.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < queries.size(); i = next++) {
            try {
                out[i].hce = engine.count(queries[i]);
            } catch (const BackendError& e) {
                out[i].error = e.what();
            }
            if (opts.delay.count() > 0) std::this_thread::sleep_for(opts.delay);
        }
    };
    const std::size_t workers =
        std::min<std::size_t>(static_cast<std::size_t>(std::max(1, opts.fan_out)), std::max<std::size_t>(1, queries.size()));
    if (workers == 1) {
        worker();
        return out;
    }
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    pool.clear();  // joins
    return out;
}

// ---------------------------------------------------------------------------
// longitudinal

std::vector<int> years_of(YearRange r) {
    r.validate("years");
    std::vector<int> v;
    v.reserve(static_cast<std::size_t>(r.span()));
    for (int y = r.from; y <= r.to; ++y) v.push_back(y);
    return v;
}

namespace {

YearSeries empty_series(const Query& tmpl) {
    YearSeries s;
    s.category = tmpl.category;
    s.flags = tmpl.flags;
    s.term = tmpl.term;
    s.excluded_site = tmpl.excluded_site;
    return s;
}

bool contiguous(std::span<const int> years) {
    for (std::size_t i = 1; i < years.size(); ++i)
        if (years[i] != years[i - 1] + 1) return false;
    return true;
}

}  // namespace

YearSeries query_years(const EngineBackend& engine, const Query& tmpl, std::span<const int> years,
                       const ProbeOptions& opts) {
    std::vector<Query> queries;
    queries.reserve(years.size());
    for (int y : years) {
        Query q = tmpl;
        q.year_range = YearRange{y, y};
        q.page = 1;
        queries.push_back(std::move(q));
    }
    auto outcomes = run_counts(engine, queries, opts);
    YearSeries s = empty_series(tmpl);
    s.points.reserve(years.size());
    for (std::size_t i = 0; i < years.size(); ++i)
        s.points.push_back({years[i], outcomes[i].hce, std::move(outcomes[i].error)});
    s.validate();
    return s;
}

LongitudinalResult longitudinal_sum(const EngineBackend& engine, const Query& tmpl, std::span<const int> years,
                                    const ProbeOptions& opts) {
    if (years.empty()) throw ValidationError("years", "longitudinal probe needs at least one year");
    for (std::size_t i = 1; i < years.size(); ++i)
        if (years[i] <= years[i - 1]) throw ValidationError("years", "must be strictly increasing");

    LongitudinalResult res;
    res.series = empty_series(tmpl);

    if (engine.capabilities().replays_aggregates && contiguous(years)) {
        Query q = tmpl;
        q.year_range.reset();
        if (auto agg = engine.recorded_aggregate(q, {years.front(), years.back()})) {
            res.total = agg->value;
            res.from_recorded_aggregate = true;
            return res;
        }
    }

    res.series = query_years(engine, tmpl, years, opts);
    res.total = res.series.total();
    res.complete = res.series.complete();
    return res;
}

// ---------------------------------------------------------------------------
// sectional

std::vector<InconsistencyFinding> range_monotonicity_audit(std::span<const RangeObservation> obs) {
    std::vector<InconsistencyFinding> out;
    for (const auto& inner : obs) {
        if (!inner.hce) continue;
        for (const auto& outer : obs) {
            if (!outer.hce || inner.range == outer.range || !outer.range.contains(inner.range)) continue;
            if (inner.hce->value > outer.hce->value)
                out.push_back({FindingKind::range_non_monotone, inner.range.str(), outer.range.str(),
                               outer.hce->value - inner.hce->value});
        }
    }
    return out;
}

SectionalResult sectional_probe(const EngineBackend& engine, const Query& tmpl, std::span<const YearRange> ranges,
                                const ProbeOptions& opts) {
    std::vector<Query> queries;
    for (const auto& r : ranges) {
        r.validate("ranges");
        Query q = tmpl;
        q.year_range = r;
        queries.push_back(std::move(q));
    }
    auto outcomes = run_counts(engine, queries, opts);
    SectionalResult res;
    for (std::size_t i = 0; i < ranges.size(); ++i)
        res.observations.push_back({ranges[i], outcomes[i].hce, std::move(outcomes[i].error)});
    res.findings = range_monotonicity_audit(res.observations);
    return res;
}

// ---------------------------------------------------------------------------
// absurd query

std::string_view to_string(AbsurdMode m) {
    switch (m) {
        case AbsurdMode::total: return "total";
        case AbsurdMode::custom_range: return "custom-range";
        case AbsurdMode::longitudinal: return "longitudinal";
    }
    return "total";
}

AbsurdMode parse_absurd_mode(std::string_view s) {
    if (s == "total") return AbsurdMode::total;
    if (s == "custom-range") return AbsurdMode::custom_range;
    if (s == "longitudinal") return AbsurdMode::longitudinal;
    throw ValidationError("mode", "expected total, custom-range or longitudinal");
}

AbsurdResult absurd_probe(const EngineBackend& engine, const AbsurdRequest& req, const ProbeOptions& opts) {
    if (req.term.empty()) throw ValidationError("term", "the site exclusion needs a term next to it");
    if (!is_hostname(req.excluded_site))
        throw ValidationError("excluded_site", "not a hostname: '" + req.excluded_site + "'");
    if (req.mode != AbsurdMode::total && !req.range)
        throw ValidationError("range", std::string(to_string(req.mode)) + " mode needs a year range");

    Query q;
    q.term = req.term;
    q.excluded_site = req.excluded_site;
    q.flags = req.flags;
    q.category = req.category;

    AbsurdResult res;
    auto& est = res.estimate;
    est.method = "absurd-query/" + std::string(to_string(req.mode));
    est.inputs.emplace_back("include_citations", req.flags.include_citations ? 1.0 : 0.0);
    est.inputs.emplace_back("include_patents", req.flags.include_patents ? 1.0 : 0.0);
    est.provenance = engine.capabilities().name + ": <" + req.term + " -site:" + req.excluded_site + "> " +
                     std::string(to_string(req.category)) + " " + flags_label(req.flags) +
                     (req.range ? " " + req.range->str() : std::string());

    // Runs the same protocol for an arbitrary query; used for the control too.
    auto measure = [&](const Query& base) -> std::pair<Count, bool> {
        if (req.mode == AbsurdMode::longitudinal) {
            const auto years = years_of(*req.range);
            auto lr = longitudinal_sum(engine, base, years, opts);
            if (&base == &q) {
                if (!lr.from_recorded_aggregate) res.series = std::move(lr.series);
                if (lr.from_recorded_aggregate) est.diagnostics.push_back("recorded longitudinal aggregate replayed");
            }
            return {lr.total, lr.complete};
        }
        Query one = base;
        if (req.mode == AbsurdMode::custom_range) one.year_range = req.range;
        return {engine.count(one).value, true};
    };

    auto [value, complete] = measure(q);
    est.estimate = value;
    res.complete = complete;
    if (!complete) est.diagnostics.push_back("incomplete: some years failed, total is partial");

    if (req.citation_control && req.flags.include_citations) {
        Query control = q;
        control.term.clear();
        control.excluded_site.reset();
        try {
            auto [cv, ccomplete] = measure(control);
            if (!ccomplete) est.diagnostics.push_back("citation control incomplete");
            else if (value < cv)
                est.diagnostics.push_back("citations dropped: " + std::to_string(value) + " below empty-query control " +
                                          std::to_string(cv));
            else
                est.diagnostics.push_back("no citation drop detected: empty-query control " + std::to_string(cv));
        } catch (const BackendError& e) {
            est.diagnostics.push_back(std::string("citation control unavailable: ") + e.what());
        }
    }
    return res;
}

// ---------------------------------------------------------------------------
// composition

CompositionResult composition_from_totals(Count all, Count records_citations, Count records_patents, Count records,
                                          const std::string& where) {
    CompositionResult c;
    c.all = all;
    c.records_citations = records_citations;
    c.records_patents = records_patents;
    c.records = records;
    c.citations = all - records_patents;
    c.patents = all - records_citations;
    if (all > 0) {
        const double a = static_cast<double>(all);
        c.share_records = static_cast<double>(records) / a;
        c.share_citations = static_cast<double>(c.citations) / a;
        c.share_patents = static_cast<double>(c.patents) / a;
    }
    if (c.citations < 0) c.findings.push_back({FindingKind::citation_toggle_shrink, where, "citations", c.citations});
    if (c.patents < 0) c.findings.push_back({FindingKind::flag_exclusion_negative, where, "patents", c.patents});
    return c;
}

CompositionResult composition_breakdown(const EngineBackend& engine, const Query& tmpl, std::span<const int> years,
                                        const ProbeOptions& opts) {
    if (tmpl.category != SearchCategory::articles)
        throw ValidationError("category", "composition needs the patent toggle, which only articles have");
    const SearchFlags combos[4] = {{true, true}, {true, false}, {false, true}, {false, false}};
    LongitudinalResult lr[4];
    for (int i = 0; i < 4; ++i) {
        Query q = tmpl;
        q.flags = combos[i];
        lr[i] = longitudinal_sum(engine, q, years, opts);
    }
    const std::string span = std::to_string(years.front()) + "-" + std::to_string(years.back());
    auto res = composition_from_totals(lr[0].total, lr[1].total, lr[2].total, lr[3].total, span);

    // With per-year data the negative-component findings are per year instead.
    const bool per_year = std::none_of(std::begin(lr), std::end(lr),
                                       [](const LongitudinalResult& r) { return r.from_recorded_aggregate; });
    if (per_year) {
        res.findings.clear();
        for (std::size_t i = 0; i < years.size(); ++i) {
            const auto& pa = lr[0].series.points[i];
            const auto& prc = lr[1].series.points[i];
            const auto& prp = lr[2].series.points[i];
            const auto& pr = lr[3].series.points[i];
            if (!pa.hce || !prc.hce || !prp.hce || !pr.hce) continue;
            auto y = composition_from_totals(pa.hce->value, prc.hce->value, prp.hce->value, pr.hce->value,
                                             std::to_string(years[i]));
            res.findings.insert(res.findings.end(), y.findings.begin(), y.findings.end());
        }
    }
    for (int i = 0; i < 4; ++i)
        if (!lr[i].from_recorded_aggregate) res.series.emplace(flags_label(combos[i]), std::move(lr[i].series));
    return res;
}

// ---------------------------------------------------------------------------
// audits

namespace {

void check_same_domain(const YearSeries& a, const YearSeries& b) {
    a.validate();
    b.validate();
    if (a.years() != b.years()) throw ValidationError("series", "year domains differ");
}

}  // namespace

std::vector<InconsistencyFinding> flag_inconsistencies(const YearSeries& inclusive, const YearSeries& excluding) {
    check_same_domain(inclusive, excluding);
    std::vector<InconsistencyFinding> out;
    for (std::size_t i = 0; i < inclusive.points.size(); ++i) {
        const auto& a = inclusive.points[i];
        const auto& b = excluding.points[i];
        if (a.hce && b.hce && b.hce->value > a.hce->value)
            out.push_back({FindingKind::flag_exclusion_negative, std::to_string(a.year), flags_label(excluding.flags),
                           a.hce->value - b.hce->value});
    }
    return out;
}

std::vector<InconsistencyFinding> citation_toggle_audit(const YearSeries& with_citations,
                                                        const YearSeries& without_citations) {
    check_same_domain(with_citations, without_citations);
    std::vector<InconsistencyFinding> out;
    for (std::size_t i = 0; i < with_citations.points.size(); ++i) {
        const auto& a = with_citations.points[i];
        const auto& b = without_citations.points[i];
        if (a.hce && b.hce && a.hce->value < b.hce->value)
            out.push_back({FindingKind::citation_toggle_shrink, std::to_string(a.year),
                           flags_label(without_citations.flags), a.hce->value - b.hce->value});
    }
    return out;
}

std::vector<InconsistencyFinding> serp_audit(const EngineBackend& engine, const Query& query, int max_pages) {
    std::vector<InconsistencyFinding> out;
    for (int p = 1; p <= max_pages; ++p) {
        Query q = query;
        q.page = p;
        const auto page = engine.fetch_page(q);
        if (page.capped) break;
        const Count offset = static_cast<Count>(p - 1) * q.page_size;
        if (page.false_serp) out.push_back({FindingKind::false_serp, "page " + std::to_string(p), q.canonical(), page.hce.value});
        else if (static_cast<int>(page.ids.size()) < q.page_size) break;
        if (offset + q.page_size >= page.hce.value) break;
    }
    return out;
}

double pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw ValidationError("series", "lengths differ");
    if (x.size() < 2) throw ValidationError("series", "need at least two points");
    const auto n = static_cast<long double>(x.size());
    long double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    long double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const long double dx = x[i] - mx, dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0 || syy == 0) throw UndefinedEstimateError("correlation undefined: a series has zero variance");
    const long double r = sxy / std::sqrt(sxx * syy);
    return static_cast<double>(std::clamp(r, -1.0L, 1.0L));
}

// ---------------------------------------------------------------------------
// decades

std::vector<YearRange> decade_buckets(YearRange domain) {
    domain.validate("domain");
    std::vector<YearRange> out;
    int from = domain.from;
    while (from <= domain.to) {
        // decades run x1..(x+1)0
        const int end = from + ((10 - ((from - 1) % 10 + 10) % 10) - 1);
        const int to = std::min(end, domain.to);
        out.push_back({from, to});
        from = to + 1;
    }
    return out;
}

void compute_decade_ratios(DecadeTable& t) {
    for (auto& row : t.rows) {
        row.ratios.clear();
        const auto ref = row.counts.find(t.reference);
        if (ref == row.counts.end() || ref->second <= 0) continue;
        for (const auto& e : t.engines) {
            const auto it = row.counts.find(e);
            if (it == row.counts.end()) continue;
            row.ratios[e] = std::round(static_cast<double>(it->second) / static_cast<double>(ref->second) * 100.0) / 100.0;
        }
    }
}

DecadeTable decade_aggregate(const std::vector<std::pair<std::string, YearSeries>>& series,
                             const std::string& reference) {
    if (series.empty()) throw ValidationError("series", "no engines given");
    const auto years = series.front().second.years();
    if (years.empty()) throw ValidationError("series", "empty series");
    for (const auto& [name, s] : series) {
        s.validate();
        if (s.years() != years) throw ValidationError("series", "engine '" + name + "' has a different year domain");
    }
    DecadeTable t;
    t.reference = reference;
    for (const auto& [name, s] : series) t.engines.push_back(name);
    if (std::find(t.engines.begin(), t.engines.end(), reference) == t.engines.end())
        throw ValidationError("reference", "unknown reference engine '" + reference + "'");

    for (const auto& b : decade_buckets({years.front(), years.back()})) {
        DecadeRow row;
        row.decade = b;
        for (const auto& [name, s] : series) {
            Count sum = 0;
            for (const auto& p : s.points)
                if (b.contains(p.year) && p.hce) sum += p.hce->value;
            row.counts[name] = sum;
        }
        t.rows.push_back(std::move(row));
    }
    compute_decade_ratios(t);
    return t;
}

DecadeTable load_decade_fixture(const std::string& path, const std::string& reference) {
    const auto rows = csv::read_file(path);
    if (rows.empty() || rows.front().fields.size() != 3 || csv::trim(rows.front().fields[0]) != "decade" ||
        csv::trim(rows.front().fields[1]) != "engine" || csv::trim(rows.front().fields[2]) != "count")
        throw SchemaError(path + ": header must be decade,engine,count");
    DecadeTable t;
    t.reference = reference;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& f = rows[i].fields;
        if (f.size() != 3) throw SchemaError(path + ":" + std::to_string(rows[i].line) + ": expected 3 fields");
        YearRange d;
        Count n;
        try {
            d = YearRange::parse(csv::trim(f[0]), "decade");
            n = csv::parse_count(csv::trim(f[2]));
        } catch (const std::exception& e) {
            throw SchemaError(path + ":" + std::to_string(rows[i].line) + ": " + e.what());
        }
        const std::string engine = csv::trim(f[1]);
        if (std::find(t.engines.begin(), t.engines.end(), engine) == t.engines.end()) t.engines.push_back(engine);
        auto it = std::find_if(t.rows.begin(), t.rows.end(), [&](const DecadeRow& r) { return r.decade == d; });
        if (it == t.rows.end()) {
            t.rows.push_back({d, {}, {}});
            it = std::prev(t.rows.end());
        }
        it->counts[engine] = n;
    }
    std::sort(t.rows.begin(), t.rows.end(), [](const DecadeRow& a, const DecadeRow& b) { return a.decade < b.decade; });
    compute_decade_ratios(t);
    return t;
}

}  // namespace indexsize
